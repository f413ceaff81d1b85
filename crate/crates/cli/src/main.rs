use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nemsim::harness::{
    emit_plots, fig6_preset, preset, run_and_persist, ArtifactBundle, ExperimentConfig, ExperimentKind, HarnessError,
    OutputFormat,
};

#[derive(Parser)]
#[command(name = "nemsim", version, about = "Disordered nanoresonator chains: localization, thermalization, entanglement")]
struct Cli {
    /// Master seed for the disorder realizations.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of disorder realizations.
    #[arg(long, global = true)]
    realizations: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Use N = 51 for the open-system figures instead of 21.
    #[arg(long, global = true)]
    full: bool,
    /// Bundle directory (default: out/<command>, or the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format.
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<OutputFormat>,
    /// Render PNG images after the run.
    #[arg(long, global = true)]
    plots: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coupling estimates for the reference devices.
    Table1,
    /// Relative ground-state dispersion against chain length.
    Fig2,
    /// Localized profiles, closed and with a thermal bath.
    Fig3,
    /// Dispersion growth for several bath occupations.
    Fig4,
    /// Concurrence with the central site, clean chain.
    Fig5,
    /// Concurrence with the central site, disordered chain.
    Fig6,
    /// Continuous-time quantum walk.
    Fig7,
    /// Run an experiment described by a TOML file.
    Run { config: PathBuf },
    /// Render the plots listed in a bundle.
    Plot { bundle: PathBuf },
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: HarnessError| e.to_string())
}

impl Cli {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(r) = self.realizations {
            cfg.realizations = r;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
    }
}

fn figure(cli: &Cli, name: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match name {
        "fig6" => fig6_preset(cli.full),
        _ => preset(name.parse::<ExperimentKind>()?, cli.full),
    };
    cfg.output_dir = Path::new("out").join(name);
    cli.apply(&mut cfg);
    Ok(cfg)
}

fn print_table1(bundle: &ArtifactBundle) {
    let Some(t) = bundle.table("table1") else { return };
    let widths: Vec<usize> = t.columns.iter().map(|c| c.len().max(10)).collect();
    let header: Vec<String> = t.columns.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
    println!("{}", header.join("  "));
    for row in &t.rows {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:>w$.3}")).collect();
        println!("{}", cells.join("  "));
    }
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let cfg = match &cli.command {
        Command::Plot { bundle } => {
            for path in emit_plots(bundle)? {
                println!("{}", path.display());
            }
            return Ok(());
        }
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(config)?;
            cli.apply(&mut cfg);
            cfg
        }
        Command::Table1 => figure(cli, "table1")?,
        Command::Fig2 => figure(cli, "fig2")?,
        Command::Fig3 => figure(cli, "fig3")?,
        Command::Fig4 => figure(cli, "fig4")?,
        Command::Fig5 => figure(cli, "fig5")?,
        Command::Fig6 => figure(cli, "fig6")?,
        Command::Fig7 => figure(cli, "fig7")?,
    };
    let dir = cfg.output_dir.clone();
    let bundle = run_and_persist(&cfg, &dir)?;
    if matches!(cli.command, Command::Table1) {
        print_table1(&bundle);
    }
    for t in &bundle.tables {
        println!("{}", dir.join(t.file_name(cfg.format)).display());
    }
    if cli.plots {
        for path in emit_plots(&dir)? {
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nemsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
