use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use cordes_core::perturb::{ForcingKind, PsiKind};
use cordes_lab::config::NormField;
use cordes_lab::{CliError, Command, RunConfig, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "cordes-lab", version, about = "Numerical laboratory for the Cordes-type operator on the unit ball")]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// JSON or TOML run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default `runs/<command>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Args)]
struct Flags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_parser = parse_psi)]
    psi: Option<PsiKind>,
    #[arg(long, value_parser = parse_forcing)]
    forcing: Option<ForcingKind>,
    #[arg(long, value_parser = parse_field)]
    field: Option<NormField>,
    #[arg(long)]
    kmax: Option<usize>,
    /// Comma-separated mode indices.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<usize>>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated probe truncation levels.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    angular_nodes: Option<usize>,
    /// `r,w` CSV to compare against, or `classical`.
    #[arg(long)]
    baseline: Option<String>,
    /// Skip positivity, barrier and boundedness certificates.
    #[arg(long)]
    no_certify: bool,
    /// Run the `δ`-halving linearization check.
    #[arg(long)]
    linearization: bool,
    /// Solve with `L_γ + p w^{p−1}` instead of `L_γ`.
    #[arg(long)]
    linearized: bool,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn parse_psi(s: &str) -> Result<PsiKind, String> {
    parse_enum(s)
}

fn parse_forcing(s: &str) -> Result<ForcingKind, String> {
    parse_enum(s)
}

fn parse_field(s: &str) -> Result<NormField, String> {
    parse_enum(s)
}

impl Flags {
    fn into_config(self) -> RunConfig {
        RunConfig {
            n: self.n,
            gamma: self.gamma,
            p: self.p,
            sigma: self.sigma,
            t: self.t,
            modes: self.modes,
            kmax: self.kmax,
            delta: self.delta,
            forcing: self.forcing,
            psi: self.psi,
            radius: self.radius,
            max_iter: self.max_iter,
            tol: self.tol,
            angular_nodes: self.angular_nodes,
            trials: self.trials,
            levels: self.levels,
            linearized: self.linearized.then_some(true),
            certify: self.no_certify.then_some(false),
            linearization: self.linearization.then_some(true),
            field: self.field,
            baseline: self.baseline,
            seed: self.seed,
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("CORDES_LAB_THREADS") {
        let n: usize = v.parse().map_err(|_| CliError::Config(format!("CORDES_LAB_THREADS = `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(cli.command.name()));
    let result = init_threads()
        .and_then(|_| match &cli.config {
            Some(path) => RunConfig::from_path(path),
            None => Ok(RunConfig::default()),
        })
        .map(|file| RunManifest::new(cli.command, cli.config.clone(), file.merged(cli.flags.into_config()), out.clone()))
        .and_then(|m| cordes_lab::run(&m));
    match result {
        Ok(artifacts) => {
            if let Some(s) = artifacts.summary() {
                println!("{}", serde_json::to_string_pretty(&s).unwrap_or_default());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = e.report();
            let text = serde_json::to_string_pretty(&report).unwrap_or_default();
            eprintln!("{text}");
            if std::fs::create_dir_all(&out).is_ok() {
                let _ = std::fs::write(out.join("error.json"), text + "\n");
            }
            ExitCode::from(report.exit_code as u8)
        }
    }
}
