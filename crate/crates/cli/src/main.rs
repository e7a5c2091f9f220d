use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use psp_cli::config::{level_label, Model};
use psp_cli::pipeline::fit_only;
use psp_cli::{emit_plot_data, run_backtest, run_pipeline, write_synthetic, BacktestReport, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "psp", version, about = "Option-portfolio VaR by implied volatility surface projection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Configuration helpers.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
    /// Write a deterministic synthetic chain and VIX dataset.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 124)]
        days: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Fit and persist one volatility surface per quote date.
    FitSurfaces {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run every model over the full window and backtest the results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_paths: Option<usize>,
        /// Comma-separated subset of psp, const_vol, vix.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Also write plot data after the run.
        #[arg(long)]
        plots: bool,
    },
    /// Recompute the backtest report of a completed run.
    Backtest { run_dir: PathBuf },
    /// Write per-model, per-level plot CSVs of a completed run.
    EmitPlotData { run_dir: PathBuf },
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print the default configuration, or write it to a file.
    Init {
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn print_report(report: &BacktestReport) {
    println!("{} forecast days ({:?} to {:?})", report.n_days, report.first_date, report.last_date);
    for level in &report.levels {
        println!("confidence {}:", level.confidence);
        for m in &level.methods {
            let c = &m.coverage;
            let rank = level.ranks.get(m.model.name()).map(|r| r.rank).unwrap_or(0);
            println!(
                "  {:<9} violations {:>3} rate {:.4}  uc {:.3} (p {:.4})  ind {:.3} (p {:.4})  cc {:.3} (p {:.4})  rank {}",
                m.model.name(),
                c.violations,
                c.violation_rate,
                c.uc.statistic,
                c.uc.p_value,
                c.ind.statistic,
                c.ind.p_value,
                c.cc.statistic,
                c.cc.p_value,
                rank
            );
        }
        for d in &level.dm {
            println!("  DM {} vs {}: {:.4} (p {:.4})", d.model_a, d.model_b, d.statistic, d.p_value);
        }
    }
}

fn parse_models(names: &[String]) -> Result<Vec<Model>, CliError> {
    names
        .iter()
        .map(|n| Model::parse(n.trim()).ok_or_else(|| CliError::Config(format!("unknown model {n:?}"))))
        .collect()
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Config {
            action: ConfigAction::Init { output },
        } => {
            let text = RunConfig::default().to_json() + "\n";
            match output {
                Some(p) => std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))?,
                None => print!("{text}"),
            }
        }
        Command::Synth { out_dir, days, seed } => {
            let (chains, vix) = write_synthetic(&out_dir, seed, days)?;
            println!("wrote {} and {}", chains.display(), vix.display());
        }
        Command::FitSurfaces { config, output_dir } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(d) = output_dir {
                cfg.paths.output_dir = d;
            }
            let fitted = fit_only(&cfg)?;
            let arb = fitted.iter().filter(|f| f.diagnostics.arbitrage_violations > 0).count();
            println!("fitted {} surfaces into {}", fitted.len(), cfg.paths.output_dir.join("surfaces").display());
            if arb > 0 {
                log::warn!("{arb} surfaces have static arbitrage diagnostics");
            }
        }
        Command::Run {
            config,
            output_dir,
            seed,
            n_paths,
            models,
            plots,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(d) = output_dir {
                cfg.paths.output_dir = d;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = n_paths {
                cfg.simulation.n_paths = n;
            }
            if let Some(m) = models {
                cfg.models = parse_models(&m)?;
            }
            cfg.validate()?;
            let summary = run_pipeline(&cfg)?;
            for w in &summary.warnings {
                log::warn!("{w}");
            }
            print_report(&summary.report);
            if plots {
                let written = emit_plot_data(&summary.output_dir)?;
                println!("wrote {} plot files", written.len());
            }
            println!("results in {}", summary.output_dir.display());
            let labels: Vec<_> = cfg.confidence_levels.iter().map(|l| level_label(*l)).collect();
            log::info!("levels {}", labels.join(", "));
        }
        Command::Backtest { run_dir } => print_report(&run_backtest(&run_dir)?),
        Command::EmitPlotData { run_dir } => {
            for p in emit_plot_data(&run_dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
