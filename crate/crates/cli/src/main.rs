use clap::{Args, Parser, Subcommand};
use coordwise::error::Error;
use coordwise::experiments::{run_experiment, write_outputs, ExperimentConfig, ExperimentKind};
use coordwise::lab::io::{read_kernel_csv, read_target_csv};
use coordwise::lab::verify::{
    conductance_report, random_scan_from_blocks, run_suite, verify_blocks, verify_kernel, CheckReport, SuiteConfig,
};
use coordwise::lab::{DiscreteKernel, DiscreteTarget};
use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_REPLICATES: u8 = 4;

#[derive(Parser)]
#[command(name = "coordwise", version, about = "Coordinate-wise MCMC experiments and exact conductance checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one of the scaling experiments.
    Experiment(ExperimentArgs),
    /// Exact verification on finite state spaces.
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Args)]
struct ExperimentArgs {
    /// hier-logistic, hier-covariates, logreg-alpha or diffusion
    kind: String,
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the full grids instead of the desk-scale ones.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    groups: Option<String>,
    #[arg(long)]
    obs_per_group: Option<String>,
    /// ℓ for the hierarchical kinds, d for logreg-alpha.
    #[arg(long)]
    covariates: Option<String>,
    /// Comma-separated sampler strings, e.g. gibbs-ars,mwg-barker:k=10
    #[arg(long)]
    samplers: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    burnin: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Results CSV (stdout when absent).
    #[arg(long)]
    out: Option<String>,
    /// SVG plot path.
    #[arg(long)]
    plot: Option<String>,
    /// sine or ou (diffusion)
    #[arg(long)]
    drift: Option<String>,
    /// Observation counts (diffusion).
    #[arg(long = "N")]
    n_obs: Option<String>,
    /// Imputed points per interval (diffusion).
    #[arg(long = "R")]
    resolution: Option<String>,
    #[arg(long)]
    theta_true: Option<String>,
    /// Time horizon (diffusion).
    #[arg(long = "T")]
    horizon: Option<String>,
    /// reduced or ito
    #[arg(long)]
    girsanov: Option<String>,
    /// Any other config key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Check conductance inequalities on a CSV kernel, CSV block kernels, or random instances.
    Conductance(ConductanceArgs),
}

#[derive(Args)]
struct ConductanceArgs {
    /// Target as `state,prob` rows.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Coordinate cardinalities of the product space, e.g. 3,4. Flat when absent.
    #[arg(long)]
    card: Option<String>,
    /// Full kernel as `row,col,value` triples.
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Block kernel P_i, one per coordinate, in order. Repeatable.
    #[arg(long)]
    block: Vec<PathBuf>,
    /// Selection weights for the blocks (uniform when absent).
    #[arg(long)]
    weights: Option<String>,
    /// s values for the conductance profile.
    #[arg(long, default_value = "0,0.05,0.1,0.2,0.3,0.45")]
    grid: String,
    /// Run the randomized suite instead of reading files.
    #[arg(long)]
    random: bool,
    /// Instances per randomized family.
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn floats(s: &str, what: &str) -> Result<Vec<f64>, Error> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| Error::Config(format!("{what}: cannot parse '{x}'")))).collect()
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig, Error> {
    let kind: ExperimentKind = a.kind.parse()?;
    let mut cfg = ExperimentConfig::defaults(kind);
    if a.full_scale {
        cfg.full_scale();
    }
    if let Some(p) = &a.config {
        let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        cfg.apply_file(&text)?;
        if cfg.kind != kind {
            return Err(Error::Config(format!("config file sets kind {} but the command asks for {kind}", cfg.kind)));
        }
    }
    let flags = [
        ("groups", &a.groups),
        ("obs-per-group", &a.obs_per_group),
        ("covariates", &a.covariates),
        ("samplers", &a.samplers),
        ("iters", &a.iters),
        ("burnin", &a.burnin),
        ("reps", &a.reps),
        ("seed", &a.seed),
        ("out", &a.out),
        ("plot", &a.plot),
        ("drift", &a.drift),
        ("N", &a.n_obs),
        ("R", &a.resolution),
        ("theta-true", &a.theta_true),
        ("T", &a.horizon),
        ("girsanov", &a.girsanov),
    ];
    for (key, v) in flags {
        if let Some(v) = v {
            cfg.set(key, v)?;
        }
    }
    for kv in &a.extra {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects key=value, got '{kv}'")))?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn experiment(a: &ExperimentArgs) -> Result<ExitCode, Error> {
    let cfg = experiment_config(a)?;
    let out = run_experiment(&cfg)?;
    write_outputs(&out, &cfg)?;
    if out.failures > 0 {
        log::warn!("{} of {} runs failed", out.failures, out.tasks);
    }
    Ok(ExitCode::SUCCESS)
}

/// Input problems in the verifier count as configuration errors.
fn input<T>(r: Result<T, Error>) -> Result<T, Error> {
    r.map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    })
}

fn open(p: &PathBuf) -> Result<File, Error> {
    File::open(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
}

fn verify_conductance(a: &ConductanceArgs) -> Result<ExitCode, Error> {
    let grid = floats(&a.grid, "grid")?;
    let (passed, report) = if a.random {
        let mut sc = SuiteConfig { grid, ..SuiteConfig::default() };
        if let Some(s) = a.seed {
            sc.seed = s;
        }
        if let Some(n) = a.instances {
            sc.flux_instances = n;
            sc.perturbation_instances = n;
            sc.mixing_instances = n;
            sc.product_instances = n;
            sc.imh_instances = n;
        }
        let r = run_suite(&sc)?;
        (r.passed(), serde_json::to_value(&r).map_err(|e| Error::Numeric(e.to_string()))?)
    } else {
        let path = a.target.as_ref().ok_or_else(|| Error::Config("--target is required unless --random is given".into()))?;
        let pi = input(read_target_csv(open(path)?))?;
        let target = match &a.card {
            Some(c) => {
                let card = c
                    .split(',')
                    .map(|x| x.trim().parse::<usize>().map_err(|_| Error::Config(format!("card: cannot parse '{x}'"))))
                    .collect::<Result<Vec<_>, _>>()?;
                input(DiscreteTarget::new(card, pi))?
            }
            None => input(DiscreteTarget::flat(pi))?,
        };
        let n = target.len();
        let (checks, summary): (Vec<CheckReport>, _) = if !a.block.is_empty() {
            let blocks = a.block.iter().map(|p| input(read_kernel_csv(open(p)?, Some(n)))).collect::<Result<Vec<_>, _>>()?;
            let weights = a.weights.as_deref().map(|w| floats(w, "weights")).transpose()?;
            let p = input(random_scan_from_blocks(&target, blocks, weights.as_deref()))?;
            let checks = verify_blocks(&target, &p, &grid)?;
            (checks, conductance_report(&p.kernel, &grid, Some(&target), &p.blocks)?)
        } else if let Some(kp) = &a.kernel {
            let m = input(read_kernel_csv(open(kp)?, Some(n)))?;
            let k = input(DiscreteKernel::new(m, target.pi.clone()))?;
            (verify_kernel(&k)?, conductance_report(&k, &grid, None, &[])?)
        } else {
            return Err(Error::Config("give --kernel, one --block per coordinate, or --random".into()));
        };
        let passed = checks.iter().all(|c| c.passed());
        let v = serde_json::json!({ "passed": passed, "checks": checks, "kernel": summary });
        (passed, v)
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Numeric(e.to_string()))?;
    match &a.out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    if passed {
        Ok(ExitCode::SUCCESS)
    } else {
        log::error!("verification found violations");
        Ok(ExitCode::from(EXIT_VIOLATION))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Experiment(a) => experiment(a),
        Command::Verify(VerifyCommand::Conductance(a)) => verify_conductance(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(EXIT_CONFIG),
                Error::Replicates(_) => ExitCode::from(EXIT_REPLICATES),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
