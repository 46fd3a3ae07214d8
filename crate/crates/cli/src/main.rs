use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dqpt_cli::config::Mode;
use dqpt_cli::runs::{self, to_json};
use dqpt_cli::{CliError, Result, ScenarioConfig};

/// Worker-count override for the thread pool.
const THREADS_ENV: &str = "DQPT_THREADS";

#[derive(Parser)]
#[command(name = "dqpt", version, about = "Loschmidt amplitudes, geometric phases and DTOPs after sudden quenches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-evolve a two-level or spin-j quench and write the phase trace.
    Spin(ScenarioArgs),
    /// Time-evolve an SSH quench and write the DTOP trace.
    Ssh(ScenarioArgs),
    /// Compare every closed form against its matrix oracle on seeded cases.
    Verify(VerifyArgs),
    /// Print predicted critical times and momenta.
    Critical(ScenarioArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Flat `key = value` scenario file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    /// Spin quantum number j (0.5, 1, 1.5, ...).
    #[arg(long, allow_hyphen_values = true)]
    j: Option<String>,
    /// Temperature: zero, inf or a positive number.
    #[arg(long)]
    temp: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    omega0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    phi0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// Overlap of the initial and final field directions.
    #[arg(long, allow_hyphen_values = true)]
    dot: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    mi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    mf: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    j2: Option<String>,
    #[arg(long = "t-max", allow_hyphen_values = true)]
    t_max: Option<String>,
    /// Number of time samples, including t = 0.
    #[arg(long = "t-steps", allow_hyphen_values = true)]
    t_steps: Option<String>,
    #[arg(long = "k-points", allow_hyphen_values = true)]
    k_points: Option<String>,
    /// Trace CSV path; the JSON report then goes to stdout.
    #[arg(long)]
    out: Option<String>,
    /// Long-format PGP field CSV (ssh only).
    #[arg(long = "phase-map")]
    phase_map: Option<String>,
    /// Rate normalization: one, two-j or dim.
    #[arg(long = "rate-norm")]
    rate_norm: Option<String>,
}

impl ScenarioArgs {
    fn flags(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("mode", &self.mode),
            ("j", &self.j),
            ("temp", &self.temp),
            ("omega0", &self.omega0),
            ("theta0", &self.theta0),
            ("phi0", &self.phi0),
            ("theta", &self.theta),
            ("phi", &self.phi),
            ("dot", &self.dot),
            ("mi", &self.mi),
            ("mf", &self.mf),
            ("j2", &self.j2),
            ("t_max", &self.t_max),
            ("t_steps", &self.t_steps),
            ("k_points", &self.k_points),
            ("out", &self.out),
            ("phase_map", &self.phase_map),
            ("rate_norm", &self.rate_norm),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }

    fn load(&self) -> Result<ScenarioConfig> {
        let file = match &self.config {
            Some(p) => Some(fs::read_to_string(p).map_err(|e| CliError::io(p.display().to_string(), e))?),
            None => None,
        };
        ScenarioConfig::from_sources(file.as_deref(), &self.flags())
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    cases: usize,
    /// Report path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path.display().to_string(), e))
}

fn finish(w: &mut impl Write, path: &str) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// CSV to `--out` and report to stdout, or CSV to stdout and report to stderr.
fn emit(cfg: &ScenarioConfig, run: impl FnOnce(&mut dyn Write) -> Result<String>) -> Result<()> {
    match &cfg.out {
        Some(path) => {
            let mut w = create(path)?;
            let report = run(&mut w)?;
            finish(&mut w, &path.display().to_string())?;
            print!("{report}");
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            let report = run(&mut w)?;
            finish(&mut w, "stdout")?;
            eprint!("{report}");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spin(args) => {
            let cfg = args.load()?;
            if cfg.mode == Mode::Ssh {
                return Err(CliError::Config("`spin` needs mode two-level or spin; use `ssh`".into()));
            }
            emit(&cfg, |w| runs::run_spin(&cfg, w).map(|r| to_json(&r)))
        }
        Command::Ssh(args) => {
            let cfg = args.load()?;
            if cfg.mode != Mode::Ssh {
                return Err(CliError::Config("`ssh` needs mode ssh".into()));
            }
            let phase_map = cfg.ssh_params().and_then(|p| p.phase_map.clone());
            let mut pgp = phase_map.as_deref().map(create).transpose()?;
            emit(&cfg, |w| {
                let report = runs::run_ssh(&cfg, w, pgp.as_mut().map(|p| p as &mut dyn Write))?;
                Ok(to_json(&report))
            })?;
            if let (Some(w), Some(p)) = (pgp.as_mut(), phase_map) {
                finish(w, &p.display().to_string())?;
            }
            Ok(())
        }
        Command::Critical(args) => {
            let cfg = args.load()?;
            print!("{}", to_json(&runs::run_critical(&cfg)?));
            Ok(())
        }
        Command::Verify(args) => {
            let report = runs::run_verify(args.seed, args.cases)?;
            let json = to_json(&report);
            match &args.out {
                Some(p) => fs::write(p, &json).map_err(|e| CliError::io(p.display().to_string(), e))?,
                None => print!("{json}"),
            }
            if !report.passed {
                return Err(CliError::Verification(format!("a residual exceeds {}", runs::VERIFY_TOL)));
            }
            Ok(())
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={v}: expected a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("{THREADS_ENV}: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let result = configure_threads().and_then(|()| run(cli));
    eprintln!("elapsed: {:.3} s", start.elapsed().as_secs_f64());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
