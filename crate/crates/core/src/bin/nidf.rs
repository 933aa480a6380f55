//! Command-line front end; all work happens in `nidf::pipeline`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nidf::pipeline::{self, RunConfig};
use nidf::{NidfError, Result, SelectorKind};

#[derive(Parser)]
#[command(name = "nidf", version, about = "Interval-view feature selection with score fusion")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// zscore, minmax or none.
    #[arg(long, global = true)]
    normalize: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Label column name, or zero-based index.
    #[arg(long, global = true)]
    label_col: Option<String>,
    /// Treat the first CSV row as data.
    #[arg(long, global = true)]
    no_header: bool,
    /// lapscore, mcfs or variance.
    #[arg(long, global = true)]
    selector: Option<String>,
    /// Extra `key=value` settings, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Record runtime in reports.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the four interval views.
    Views { dataset: PathBuf },
    /// Score every view with the selector.
    Score {
        dataset: PathBuf,
        /// Also score the original data.
        #[arg(long)]
        original: bool,
    },
    /// Fuse per-view scores into one score vector.
    Fuse {
        dataset: PathBuf,
        /// Read views and scores from `<prefix>.{tag}.csv` / `.score.csv`.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Cluster on top-ranked features and report ACC / NMI.
    Eval {
        dataset: PathBuf,
        scores: PathBuf,
        #[arg(long, default_value = "custom")]
        method: String,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Views, scoring, fusion and evaluation in one go.
    Pipeline { dataset: PathBuf },
    /// Raw versus fused comparison table.
    Bench {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
        /// Comma-separated selectors.
        #[arg(long, default_value = "lapscore,mcfs")]
        selectors: String,
    },
}

fn build_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &g.config {
        cfg.apply_file(p)?;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(n) = &g.normalize {
        cfg.normalize = n.parse()?;
    }
    if let Some(d) = &g.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(l) = &g.label_col {
        cfg.label_col = Some(l.parse()?);
    }
    if let Some(s) = &g.selector {
        cfg.selector = s.parse()?;
    }
    if g.no_header {
        cfg.has_header = false;
    }
    if g.timing {
        cfg.timing = true;
    }
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| NidfError::input(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(&cli.global)?;
    if let Some(j) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| NidfError::input(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Views { dataset } => {
            for p in pipeline::cmd_views(&dataset, &cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Score { dataset, original } => {
            for p in pipeline::cmd_score(&dataset, original, &cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Fuse { dataset, from } => {
            let a = pipeline::cmd_fuse(&dataset, from.as_deref(), &cfg)?;
            if !a.state.converged {
                eprintln!("warning: fusion stopped at the iteration cap without converging");
            }
            println!("{}\n{}", a.z_csv.display(), a.sidecar.display());
        }
        Command::Eval {
            dataset,
            scores,
            method,
            csv,
        } => {
            let r = pipeline::cmd_eval(&dataset, &scores, &method, csv.as_deref(), &cfg)?;
            println!("ACC {:.4}  NMI {:.4}", r.acc_avg, r.nmi_avg);
        }
        Command::Pipeline { dataset } => {
            let a = pipeline::cmd_pipeline(&dataset, &cfg)?;
            if !a.result.outcome.state.converged {
                eprintln!("warning: fusion stopped at the iteration cap without converging");
            }
            println!("{}\n{}", a.z_csv.display(), a.sidecar.display());
            if let Some(r) = &a.result.report {
                println!("ACC {:.4}  NMI {:.4}", r.acc_avg, r.nmi_avg);
            }
        }
        Command::Bench {
            datasets,
            selectors,
        } => {
            let sels: Vec<SelectorKind> = selectors
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<_>>()?;
            let (path, table) = pipeline::cmd_bench(&datasets, &sels, &cfg)?;
            print!("{}", table.to_csv());
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
