use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levelcg::config::{Algo, DataSource, ModelKind, Psi, RunConfig};
use levelcg::data::{gen_synthetic_returns, write_returns_csv, ReturnsSpec};
use levelcg::imrt_io::write_imrt_dir;
use levelcg::report::RunStatus;
use levelcg::{run, sweep, BenchError, SweepConfig};
use levelcg_core::models::{gen_synthetic_imrt, ImrtGenSpec};

/// Level-set conditional gradient solvers: portfolio and IMRT experiments.
#[derive(Parser)]
#[command(name = "levelcg", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configuration and write its JSON report.
    #[command(alias = "run")]
    Solve(SolveArgs),
    /// Run a list of configurations and emit a table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// CSV table path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Markdown table path; printed to stdout when absent.
        #[arg(long)]
        markdown: Option<PathBuf>,
    },
    /// Write a synthetic returns CSV.
    GenReturns {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        assets: usize,
        #[arg(long, default_value_t = 500)]
        samples: usize,
    },
    /// Write a synthetic IMRT instance directory.
    GenImrt {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        phi: Option<f64>,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// JSON run config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    algo: Option<String>,
    /// Returns CSV, IMRT directory, or `synthetic`.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// `auto` or an asset count.
    #[arg(long)]
    psi: Option<String>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    max_outer: Option<u64>,
    #[arg(long)]
    max_inner: Option<u64>,
    /// Total CGO iteration budget.
    #[arg(long)]
    budget: Option<u64>,
    /// DNCG horizon.
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV trace path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Allow DNCG / IPP-LCG on convex models.
    #[arg(long)]
    force: bool,
    /// Record wall time in the report.
    #[arg(long)]
    wall_time: bool,
}

fn apply(args: SolveArgs) -> Result<RunConfig, BenchError> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &args.model {
        c.model = ModelKind::from_name(m).ok_or_else(|| BenchError::Config(format!("unknown model `{m}`")))?;
        if args.data.is_none() && args.config.is_none() && c.model.portfolio().is_none() {
            c.data = DataSource::SyntheticImrt { spec: Default::default() };
        }
    }
    if let Some(a) = &args.algo {
        c.algo = Algo::from_name(a).ok_or_else(|| BenchError::Config(format!("unknown algorithm `{a}`")))?;
    }
    if let Some(d) = &args.data {
        let imrt = c.model.portfolio().is_none();
        c.data = match (d.as_str(), imrt) {
            ("synthetic", false) => DataSource::SyntheticReturns { spec: ReturnsSpec::default() },
            ("synthetic", true) => DataSource::SyntheticImrt { spec: Default::default() },
            (p, false) => DataSource::Csv { path: p.into() },
            (p, true) => DataSource::ImrtDir { path: p.into() },
        };
    }
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {$(
            if let Some(v) = args.$flag { c.$field = v; }
        )*};
    }
    set!(eps => epsilon, mu => mu, theta => theta, max_outer => max_outer, max_inner => max_inner, k => k, seed => seed);
    if let Some(p) = &args.psi {
        c.psi = Psi::parse(p)?;
    }
    if args.phi.is_some() {
        c.phi = args.phi;
    }
    if args.budget.is_some() {
        c.budget = args.budget;
    }
    if args.out.is_some() {
        c.out = args.out;
    }
    if args.trace.is_some() {
        c.trace = args.trace;
    }
    c.force |= args.force;
    c.wall_time |= args.wall_time;
    c.validate()?;
    Ok(c)
}

fn main_inner(cli: Cli) -> Result<ExitCode, BenchError> {
    match cli.cmd {
        Cmd::Solve(args) => {
            let cfg = apply(args)?;
            let report = run(&cfg)?;
            if cfg.out.is_none() {
                print!("{}", report.to_json()?);
            }
            if report.status == RunStatus::Failed {
                eprintln!("solver failed: {}", report.error.as_deref().unwrap_or("unknown"));
                return Ok(ExitCode::from(2));
            }
        }
        Cmd::Sweep { config, csv, markdown } => {
            let text = std::fs::read_to_string(&config).map_err(|e| BenchError::io(&config, e))?;
            let sc: SweepConfig = serde_json::from_str(&text).map_err(|e| BenchError::Config(e.to_string()))?;
            let table = sweep(&sc.expand()?)?;
            if let Some(p) = csv {
                table.write_csv(p)?;
            }
            let md = table.to_markdown();
            match markdown {
                Some(p) => std::fs::write(&p, md).map_err(|e| BenchError::io(&p, e))?,
                None => print!("{md}"),
            }
            if table.reports.iter().any(|r| r.status == RunStatus::Failed) {
                return Ok(ExitCode::from(2));
            }
        }
        Cmd::GenReturns { out, seed, assets, samples } => {
            let spec = ReturnsSpec { n_assets: assets, n_samples: samples, ..Default::default() };
            write_returns_csv(&gen_synthetic_returns(&spec, seed)?, out)?;
        }
        Cmd::GenImrt { out, seed, phi } => {
            write_imrt_dir(&gen_synthetic_imrt(&ImrtGenSpec::default(), seed)?, phi, out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match main_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
