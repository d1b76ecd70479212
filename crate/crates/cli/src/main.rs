use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use concurrence_lab::audit;
use concurrence_lab::concurrence::{
    self, c2_purity, concurrence_purity, minor_sum, three_qubit_c2, two_qubit_c2,
};
use concurrence_lab::decomposer::{decompose_c2, symmetrize_form};
use concurrence_lab::quadform::{builtin_form, settings_of_form, BUILTIN_NAMES};
use concurrence_lab::shotsim::{
    estimate_c2, noise_scan, noise_scan_csv, Estimator, ShotPlan, Source,
};
use concurrence_lab::statevec::families;
use concurrence_lab::{PureState, QuadraticForm};

/// Concurrence lab: states, oracles, quadratic forms, shot simulation,
/// audits.
#[derive(Parser)]
#[command(name = "conclab", version, about)]
struct Cli {
    /// Emit machine-readable JSON on stdout where applicable.
    #[arg(long, global = true)]
    json: bool,
    /// Output file path for commands that write a file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect states.
    State {
        #[command(subcommand)]
        action: StateAction,
    },
    /// Compute the concurrence of a state with a chosen engine.
    Concurrence {
        /// State JSON file.
        state: PathBuf,
        #[arg(long, value_enum, default_value = "purity")]
        engine: Engine,
    },
    /// Evaluate, list, or plan settings for the built-in formulas.
    Formula {
        #[command(subcommand)]
        action: FormulaAction,
    },
    /// Generate the quadratic form for the given site dimensions.
    Decompose {
        /// Comma-separated site dimensions, e.g. 2,2,2.
        #[arg(long, value_parser = parse_dims)]
        dims: Dims,
        /// Average the coefficients over all site permutations.
        #[arg(long)]
        symmetrize: bool,
    },
    /// Estimate a form from simulated shots.
    Simulate {
        /// Built-in form name or a form JSON file.
        #[arg(long)]
        form: String,
        /// State JSON file.
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        shots: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "plugin")]
        estimator: EstimatorArg,
        /// Qubit count for nqubit_ghz.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Regenerate the audit ledger and per-formula reports.
    Audit {
        /// `all` or a formula id (eq6, eq7, eq7_symmetric, eq8, eq9, eq10,
        /// eq11, eq12, minor_sum, decompose, projector_16p).
        target: String,
        #[arg(long)]
        seed: u64,
    },
    /// Scan the coherence-loss noise family.
    #[command(name = "noise-scan")]
    NoiseScan {
        /// Ideal-state amplitude on |00>, e.g. "0.6" or "0.6+0.1i".
        #[arg(long, value_parser = parse_complex)]
        alpha: Complex64,
        /// Ideal-state amplitude on |11>.
        #[arg(long, value_parser = parse_complex)]
        beta: Complex64,
        /// Comma-separated epsilon grid in [0, 1).
        #[arg(long, value_parser = parse_grid, default_value = "0,0.05,0.1,0.15,0.2")]
        eps: Grid,
        #[arg(long, default_value_t = 1_000_000)]
        shots: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "plugin")]
        estimator: EstimatorArg,
    },
}

#[derive(Subcommand)]
enum StateAction {
    /// Write a state of a named family to JSON.
    Gen(GenArgs),
    /// Print amplitudes and per-bipartition purities.
    Show { state: PathBuf },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Qubit count for ghz / w / product via dims.
    #[arg(long)]
    n: Option<usize>,
    /// Site dimensions for haar / product, e.g. 2,2.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<Dims>,
    #[arg(long)]
    seed: Option<u64>,
    /// First amplitude (ghz / schmidt), e.g. "0.6" or "0.6-0.8i".
    #[arg(long, value_parser = parse_complex)]
    a0: Option<Complex64>,
    /// Second amplitude (ghz / schmidt).
    #[arg(long, value_parser = parse_complex)]
    a1: Option<Complex64>,
    /// W-state weights, semicolon-separated, e.g. "0.5;0.5;0.7071".
    #[arg(long, value_parser = parse_weights)]
    weights: Option<Weights>,
}

#[derive(Subcommand)]
enum FormulaAction {
    /// Print the built-in form names.
    List,
    /// Evaluate a built-in form exactly on a state.
    Eval {
        name: String,
        state: PathBuf,
        /// Qubit count for nqubit_ghz.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Print the measurement settings a form needs.
    Settings {
        name: String,
        /// Qubit count for nqubit_ghz.
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    /// Canonical purity form.
    Purity,
    /// Minor-sum convention.
    Minors,
    /// Two-qubit determinant form.
    Eq6,
    /// Three-qubit closed form (carries factor 2 vs the canonical C^2).
    Eq9,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Bell,
    Ghz,
    W,
    Haar,
    Schmidt,
    Product,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Plugin,
    #[value(name = "split-half")]
    SplitHalf,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Plugin => Estimator::Plugin,
            EstimatorArg::SplitHalf => Estimator::SplitHalf,
        }
    }
}

#[derive(Clone)]
struct Dims(Vec<usize>);

fn parse_dims(s: &str) -> Result<Dims, String> {
    let dims: Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
    match dims {
        Ok(d) if !d.is_empty() => Ok(Dims(d)),
        _ => Err(format!("cannot parse dims from `{s}`")),
    }
}

#[derive(Clone)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let g: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match g {
        Ok(g) if !g.is_empty() => Ok(Grid(g)),
        _ => Err(format!("cannot parse grid from `{s}`")),
    }
}

#[derive(Clone)]
struct Weights(Vec<Complex64>);

fn parse_weights(s: &str) -> Result<Weights, String> {
    let w: Result<Vec<Complex64>, _> = s.split(';').map(parse_complex).collect();
    match w {
        Ok(w) if w.len() >= 2 => Ok(Weights(w)),
        Ok(_) => Err("need at least two weights".into()),
        Err(e) => Err(e),
    }
}

/// Parse "re", "re+imi" or "re-imi", e.g. "0.6", "0.6-0.8i".
fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t = s.trim();
    if let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('I')) {
        // find the sign separating re and im (not the leading sign)
        let chars: Vec<char> = body.chars().collect();
        for pos in (1..chars.len()).rev() {
            if (chars[pos] == '+' || chars[pos] == '-')
                && chars[pos - 1] != 'e'
                && chars[pos - 1] != 'E'
            {
                let re: f64 = body[..pos]
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad real part in `{s}`"))?;
                let im_str = &body[pos..];
                let im: f64 = if im_str == "+" || im_str == "-" {
                    format!("{im_str}1").parse().unwrap()
                } else {
                    im_str
                        .parse()
                        .map_err(|_| format!("bad imaginary part in `{s}`"))?
                };
                return Ok(Complex64::new(re, im));
            }
        }
        // pure imaginary, e.g. "0.5i"
        let im: f64 = body
            .parse()
            .map_err(|_| format!("cannot parse complex number `{s}`"))?;
        return Ok(Complex64::new(0.0, im));
    }
    t.parse::<f64>()
        .map(|re| Complex64::new(re, 0.0))
        .map_err(|_| format!("cannot parse complex number `{s}`"))
}

fn results_dir() -> PathBuf {
    std::env::var_os("CONCURRENCE_LAB_RESULTS")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn load_state(path: &Path) -> Result<PureState> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read state file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid state JSON in {}", path.display()))
}

fn write_or_print(out: &Option<PathBuf>, content: &str, label: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, content)?;
            eprintln!("{label} written to {}", path.display());
            Ok(())
        }
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn unit(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn cmd_state_gen(args: &GenArgs, out: &Option<PathBuf>) -> Result<()> {
    let inv_sqrt2 = unit(std::f64::consts::FRAC_1_SQRT_2);
    let state = match args.family {
        Family::Bell => families::bell(),
        Family::Ghz => {
            let n = args.n.context("--n is required for ghz")?;
            families::ghz(
                n,
                args.a0.unwrap_or(inv_sqrt2),
                args.a1.unwrap_or(inv_sqrt2),
            )?
        }
        Family::W => match (&args.weights, args.n) {
            (Some(w), _) => families::w(&w.0)?,
            (None, Some(n)) => {
                let equal = unit(1.0 / (n as f64).sqrt());
                families::w(&vec![equal; n])?
            }
            (None, None) => bail!("w needs --weights or --n"),
        },
        Family::Haar => {
            let dims = args.dims.as_ref().context("--dims is required for haar")?;
            let seed = args.seed.context("--seed is required for haar")?;
            PureState::random_haar(&dims.0, seed)?
        }
        Family::Schmidt => families::schmidt(
            args.a0.unwrap_or(inv_sqrt2),
            args.a1.unwrap_or(inv_sqrt2),
        )?,
        Family::Product => {
            let dims = match (&args.dims, args.n) {
                (Some(d), _) => d.0.clone(),
                (None, Some(n)) => vec![2; n],
                (None, None) => bail!("product needs --dims or --n"),
            };
            families::product_zero(&dims)?
        }
    };
    let json = serde_json::to_string_pretty(&state)?;
    write_or_print(out, &json, "state")
}

fn cmd_state_show(path: &Path, json: bool) -> Result<()> {
    let state = load_state(path)?;
    if json {
        let bipartitions: Vec<serde_json::Value> = concurrence::enumerate_bipartitions(
            state.n_sites(),
        )?
        .iter()
        .map(|s| {
            Ok(serde_json::json!({
                "sites": s.sites(),
                "purity": state.partial_trace(s)?.purity(),
            }))
        })
        .collect::<Result<_>>()?;
        let doc = serde_json::json!({
            "dims": state.dims(),
            "amps": state.amps().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "bipartition_purities": bipartitions,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }
    println!("dims: {:?}", state.dims());
    println!("amplitudes (index: re, im):");
    for (i, z) in state.amps().iter().enumerate() {
        if z.norm() > 1e-14 {
            println!("  {i:4}: {:+.6} {:+.6}", z.re, z.im);
        }
    }
    println!("bipartition purities:");
    for subset in concurrence::enumerate_bipartitions(state.n_sites())? {
        let purity = state.partial_trace(&subset)?.purity();
        println!("  {:?}: {purity:.6}", subset.sites());
    }
    Ok(())
}

fn cmd_concurrence(path: &Path, engine: Engine, json: bool) -> Result<()> {
    let state = load_state(path)?;
    let (convention, c2) = match engine {
        Engine::Purity => ("eq1-canonical", c2_purity(&state)?),
        Engine::Minors => ("minor-sum", minor_sum(&state)?),
        Engine::Eq6 => ("eq6", two_qubit_c2(&state)?),
        Engine::Eq9 => ("eq9", three_qubit_c2(&state)?),
    };
    let c = if engine as usize == Engine::Purity as usize {
        concurrence_purity(&state)?
    } else {
        c2.max(0.0).sqrt()
    };
    if json {
        println!(
            "{}",
            serde_json::json!({"convention": convention, "c2": c2, "c": c})
        );
    } else {
        println!("convention: {convention}");
        println!("C^2 = {c2:.12}");
        println!("C   = {c:.12}");
    }
    Ok(())
}

fn resolve_form(name_or_path: &str, n: Option<usize>) -> Result<QuadraticForm> {
    if BUILTIN_NAMES.contains(&name_or_path) {
        return Ok(builtin_form(name_or_path, n)?);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return serde_json::from_str(&text)
            .with_context(|| format!("invalid form JSON in {}", path.display()));
    }
    bail!(
        "`{name_or_path}` is neither a built-in form ({}) nor a file",
        BUILTIN_NAMES.join(", ")
    )
}

fn cmd_formula(action: &FormulaAction, json: bool) -> Result<()> {
    match action {
        FormulaAction::List => {
            for name in BUILTIN_NAMES {
                println!("{name}");
            }
        }
        FormulaAction::Eval { name, state, n } => {
            let form = builtin_form(name, *n)?;
            let psi = load_state(state)?;
            let value = form.evaluate(&psi)?;
            if json {
                println!("{}", serde_json::json!({"form": name, "value": value}));
            } else {
                println!("{name} = {value:.12}");
            }
        }
        FormulaAction::Settings { name, n } => {
            let form = builtin_form(name, *n)?;
            let settings = settings_of_form(&form)?;
            if json {
                println!(
                    "{}",
                    serde_json::json!({
                        "form": name,
                        "count": settings.len(),
                        "settings": settings,
                    })
                );
            } else {
                println!("{name}: {} settings", settings.len());
                for s in &settings {
                    println!("  {s}");
                }
            }
        }
    }
    Ok(())
}

fn cmd_decompose(dims: &[usize], symmetrize: bool, out: &Option<PathBuf>, json: bool) -> Result<()> {
    let d = decompose_c2(dims)?;
    let form = if symmetrize {
        symmetrize_form(&d.form)?
    } else {
        d.form
    };
    let summary = serde_json::json!({
        "dims": dims,
        "terms": form.n_terms(),
        "minor_terms": d.minor_terms,
        "max_imag_residue": d.max_imag_residue,
        "symmetrized": symmetrize,
    });
    if json {
        println!("{summary}");
    } else {
        println!(
            "dims {:?}: {} terms from {} minors, imag residue {:.3e}",
            dims,
            form.n_terms(),
            d.minor_terms,
            d.max_imag_residue
        );
    }
    let content = serde_json::to_string_pretty(&form)?;
    match out {
        Some(_) => write_or_print(out, &content, "form"),
        None => {
            // no --out: print the form only in json mode to keep stdout sane
            if json {
                println!("{content}");
            }
            Ok(())
        }
    }
}

fn cmd_simulate(
    form_name: &str,
    state_path: &Path,
    shots: u64,
    seed: u64,
    estimator: Estimator,
    n: Option<usize>,
    out: &Option<PathBuf>,
) -> Result<()> {
    let form = resolve_form(form_name, n)?;
    let state = load_state(state_path)?;
    let plan = ShotPlan {
        settings: settings_of_form(&form)?,
        shots_per_setting: shots,
        seed,
        estimator,
    };
    let report = estimate_c2(&form, &Source::Pure(&state), &plan)?;
    let content = serde_json::to_string_pretty(&report)?;
    write_or_print(out, &content, "estimate report")
}

fn cmd_audit(target: &str, seed: u64, json: bool) -> Result<()> {
    let reports = if target == "all" {
        audit::run_all(seed)?
    } else {
        audit::run_one(target, seed)?
    };
    let dir = results_dir();
    let ledger = audit::write_results(&dir, seed, &reports)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        print!("{}", audit::calibration_table(&reports));
        println!();
        print!("{}", audit::settings_table_text(&audit::settings_table()?));
        println!();
        println!("ledger: {}", ledger.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_noise_scan(
    alpha: Complex64,
    beta: Complex64,
    grid: &[f64],
    shots: u64,
    seed: u64,
    estimator: Estimator,
    out: &Option<PathBuf>,
    json: bool,
) -> Result<()> {
    let form = builtin_form("two_qubit_schmidt", None)?;
    let plan = ShotPlan {
        settings: settings_of_form(&form)?,
        shots_per_setting: shots,
        seed,
        estimator,
    };
    let rows = noise_scan(alpha, beta, grid, &plan)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    }
    let csv = noise_scan_csv(&rows);
    match out {
        Some(_) => write_or_print(out, &csv, "noise scan"),
        None => {
            if !json {
                print!("{csv}");
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::State { action } => match action {
            StateAction::Gen(args) => cmd_state_gen(args, &cli.out),
            StateAction::Show { state } => cmd_state_show(state, cli.json),
        },
        Command::Concurrence { state, engine } => cmd_concurrence(state, *engine, cli.json),
        Command::Formula { action } => cmd_formula(action, cli.json),
        Command::Decompose { dims, symmetrize } => {
            cmd_decompose(&dims.0, *symmetrize, &cli.out, cli.json)
        }
        Command::Simulate {
            form,
            state,
            shots,
            seed,
            estimator,
            n,
        } => cmd_simulate(
            form,
            state,
            *shots,
            *seed,
            (*estimator).into(),
            *n,
            &cli.out,
        ),
        Command::Audit { target, seed } => cmd_audit(target, *seed, cli.json),
        Command::NoiseScan {
            alpha,
            beta,
            eps,
            shots,
            seed,
            estimator,
        } => cmd_noise_scan(
            *alpha,
            *beta,
            &eps.0,
            *shots,
            *seed,
            (*estimator).into(),
            &cli.out,
            cli.json,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // clap exits with code 2 on usage errors
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("0.6").unwrap(), Complex64::new(0.6, 0.0));
        assert_eq!(
            parse_complex("0.6-0.8i").unwrap(),
            Complex64::new(0.6, -0.8)
        );
        assert_eq!(parse_complex("-1+2i").unwrap(), Complex64::new(-1.0, 2.0));
        assert_eq!(parse_complex("0.5i").unwrap(), Complex64::new(0.0, 0.5));
        assert_eq!(parse_complex("1e-3").unwrap(), Complex64::new(1e-3, 0.0));
        assert_eq!(
            parse_complex("1e-3+2e-4i").unwrap(),
            Complex64::new(1e-3, 2e-4)
        );
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn dims_parsing() {
        assert_eq!(parse_dims("2,2,3").unwrap().0, vec![2, 2, 3]);
        assert!(parse_dims("2,x").is_err());
    }
}
