use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use domstab::ingest::{Delimiter, SampleIdRule, TableFormat};
use domstab::metrics::LogBase;
use domstab::report::{self, Command, RunConfig, SimulateOptions, DEFAULT_MIN_TOTAL_READS, DEFAULT_SIMULATION_STEPS};
use domstab::{ModelKind, SelectionPolicy};

/// Dominance and stability analysis of species-abundance time series.
#[derive(Parser)]
#[command(name = "domstab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-sample community and species dominance, and community stability.
    Metrics(Common),
    /// Regress community dominance on the classic diversity indices.
    CompareIndices(Common),
    /// Fit the stability models; one table per model kind.
    Fit(Common),
    /// Fit, validate and select one model per subject.
    Select(Common),
    /// Iterate the selected model of one subject as a dominance map.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        subject: String,
        /// Initial dominance; defaults to the subject's first sample.
        #[arg(long)]
        d0: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_SIMULATION_STEPS)]
        steps: usize,
    },
    /// Every table and plot, with a simulation per subject.
    ReportAll(Common),
}

#[derive(Args)]
struct Common {
    /// Abundance table: species rows, sample columns.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_TOTAL_READS)]
    min_total_reads: u64,
    /// `FORMAT[:REGEX]` with FORMAT one of mmddyy, yymmdd, ordinal, lexical;
    /// REGEX needs named groups `subject` and `time`.
    #[arg(long)]
    id_rule: Option<String>,
    /// auto, comma or tab.
    #[arg(long, default_value = "auto")]
    delimiter: String,
    /// Comma-separated model kinds (linear, logistic, logistic-sine, l-q, q-q).
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// `key = value` lines for r2_min, se_ratio_max and mag_max; flags win.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    r2_min: Option<f64>,
    #[arg(long)]
    se_ratio_max: Option<f64>,
    #[arg(long)]
    mag_max: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
    /// Use relative abundances instead of read counts.
    #[arg(long)]
    normalize: bool,
    /// Shannon entropy in bits instead of nats.
    #[arg(long)]
    bits: bool,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn read_policy(path: &Path, policy: &mut SelectionPolicy) -> anyhow::Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", path.display(), i + 1);
        };
        let value: f64 = value
            .trim()
            .parse()
            .with_context(|| format!("{}:{}: bad number", path.display(), i + 1))?;
        match key.trim() {
            "r2_min" => policy.r2_min = value,
            "se_ratio_max" | "ratio_max" => policy.ratio_max = value,
            "mag_max" => policy.mag_max = value,
            other => bail!("{}:{}: unknown key {other:?}", path.display(), i + 1),
        }
    }
    Ok(())
}

fn config(c: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::new(&c.input, &c.out);
    cfg.min_total_reads = c.min_total_reads;
    if let Some(rule) = &c.id_rule {
        cfg.id_rule = rule.parse::<SampleIdRule>()?;
    }
    cfg.format = TableFormat {
        delimiter: c.delimiter.parse::<Delimiter>().map_err(anyhow::Error::msg)?,
    };
    if !c.models.is_empty() {
        cfg.models = c
            .models
            .iter()
            .map(|m| m.parse::<ModelKind>().map_err(anyhow::Error::msg))
            .collect::<anyhow::Result<_>>()?;
    }
    let mut policy = SelectionPolicy::default();
    if let Some(path) = &c.policy {
        read_policy(path, &mut policy)?;
    }
    policy = SelectionPolicy::new(
        c.r2_min.unwrap_or(policy.r2_min),
        c.se_ratio_max.unwrap_or(policy.ratio_max),
        c.mag_max.unwrap_or(policy.mag_max),
    )?;
    cfg.policy = policy;
    cfg.seed = c.seed;
    cfg.plot = c.plot;
    cfg.normalize = c.normalize;
    cfg.log_base = if c.bits { LogBase::Two } else { LogBase::Natural };
    cfg.threads = c.threads;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (common, command) = match &cli.command {
        Cmd::Metrics(c) => (c, Command::Metrics),
        Cmd::CompareIndices(c) => (c, Command::CompareIndices),
        Cmd::Fit(c) => (c, Command::Fit),
        Cmd::Select(c) => (c, Command::Select),
        Cmd::ReportAll(c) => (c, Command::ReportAll),
        Cmd::Simulate { common, subject, d0, steps } => (
            common,
            Command::Simulate(SimulateOptions {
                subject: Some(subject.clone()),
                d0: *d0,
                steps: *steps,
            }),
        ),
    };
    let cfg = match config(common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    match report::run(&cfg, &command) {
        Ok(outcome) => {
            for f in &outcome.failures {
                eprintln!("subject {} ({}): {}", f.subject, f.stage, f.error);
            }
            eprintln!(
                "{}: wrote {} files to {}",
                command.name(),
                outcome.files.len(),
                cfg.out_dir.display()
            );
            if outcome.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
