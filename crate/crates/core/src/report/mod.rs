//! Cohort pipelines behind the command-line tool: every command reads the
//! abundance table, processes subjects in parallel and writes CSV tables
//! (and optionally SVG plots) under the output directory.
//!
//! Output layout, relative to the output directory:
//!
//! | file | written by |
//! |------|------------|
//! | `metrics/<subject>.csv`, `stability/<subject>.csv` | metrics, report-all |
//! | `compare_indices.csv` | compare-indices, report-all |
//! | `fits/fit_<kind>.csv` | fit, select, report-all |
//! | `selection.csv`, `validity.csv` | select, report-all |
//! | `simulate/<subject>_trajectory.csv`, `simulate/<subject>_fixed_points.csv`, `simulation.csv` | simulate, report-all |
//! | `plots/<subject>.svg` | any fitting command with plotting on; always by report-all |
//! | `failures.csv`, `manifest.csv` | every command |

pub mod svg;
pub mod tables;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use crate::dynamics::{iterate, regime_profile};
use crate::error::{Error, Result};
use crate::fitting::{fit_all, FitInput, ModelFit};
use crate::ingest::{filter_low_reads, parse_str, split_subjects, SampleIdRule, SubjectSeries, TableFormat};
use crate::metrics::{regress_dominance_vs_index, IndexKind, LogBase};
use crate::models::ModelKind;
use crate::scalar::format_real;
use crate::selection::{select, summarize, validate, SelectedModel, SelectionPolicy, SummaryRow};
use crate::stability::{apply_sentinel, community_series, subject_records, DominanceRecord, StabilitySeries};

use tables::{IndexRow, SimulationRow, ValidityRow};

pub const DEFAULT_MIN_TOTAL_READS: u64 = 10;
pub const DEFAULT_SIMULATION_STEPS: usize = 500;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub format: TableFormat,
    pub id_rule: SampleIdRule,
    /// Species with fewer reads than this over a subject are dropped.
    pub min_total_reads: u64,
    pub models: Vec<ModelKind>,
    pub policy: SelectionPolicy,
    pub plot: bool,
    /// Recorded in the manifest. The pipeline itself draws no random numbers.
    pub seed: u64,
    /// Work on relative abundances instead of raw read counts.
    pub normalize: bool,
    pub log_base: LogBase,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            out_dir: out_dir.into(),
            format: TableFormat::default(),
            id_rule: SampleIdRule::default(),
            min_total_reads: DEFAULT_MIN_TOTAL_READS,
            models: ModelKind::ALL.to_vec(),
            policy: SelectionPolicy::default(),
            plot: false,
            seed: 0,
            normalize: false,
            log_base: LogBase::Natural,
            threads: 0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Precondition("no model kinds requested".into()));
        }
        SelectionPolicy::new(self.policy.r2_min, self.policy.ratio_max, self.policy.mag_max)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    /// `None` simulates every subject.
    pub subject: Option<String>,
    /// Defaults to the subject's first observed `D_c`.
    pub d0: Option<f64>,
    pub steps: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            subject: None,
            d0: None,
            steps: DEFAULT_SIMULATION_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Metrics,
    CompareIndices,
    Fit,
    Select,
    Simulate(SimulateOptions),
    ReportAll,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Metrics => "metrics",
            Command::CompareIndices => "compare-indices",
            Command::Fit => "fit",
            Command::Select => "select",
            Command::Simulate(_) => "simulate",
            Command::ReportAll => "report-all",
        }
    }

    fn wants_metrics(&self) -> bool {
        matches!(self, Command::Metrics | Command::ReportAll)
    }

    fn wants_indices(&self) -> bool {
        matches!(self, Command::CompareIndices | Command::ReportAll)
    }

    fn wants_fits(&self) -> bool {
        !matches!(self, Command::Metrics | Command::CompareIndices)
    }

    fn wants_selection(&self) -> bool {
        matches!(self, Command::Select | Command::Simulate(_) | Command::ReportAll)
    }
}

/// A subject-level analysis failure. The rest of the cohort is unaffected.
#[derive(Debug, Clone)]
pub struct Failure {
    pub subject: String,
    pub stage: &'static str,
    pub error: Error,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    /// Written files relative to the output directory, in write order.
    pub files: Vec<PathBuf>,
    pub failures: Vec<Failure>,
}

impl RunOutcome {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Reads, splits and filters the input table. Subjects that lose every
/// species to the read filter come back as errors.
pub fn load_subjects(config: &RunConfig) -> Result<Vec<(String, Result<SubjectSeries>)>> {
    let text = fs::read_to_string(&config.input).map_err(|e| Error::io(&config.input, e))?;
    let table = parse_str(&text, config.format)?;
    let subjects = split_subjects(&table, &config.id_rule)?;
    Ok(subjects
        .into_iter()
        .map(|s| (s.subject_id.clone(), filter_low_reads(&s, config.min_total_reads)))
        .collect())
}

/// Writes via a temporary sibling and a rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Subject ID made safe for use as a file name.
pub fn file_stem(subject: &str) -> String {
    let s: String = subject
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') { format!("_{s}") } else { s }
}

fn par_map<I: Sync, O: Send>(items: &[I], threads: usize, f: impl Fn(&I) -> O + Sync) -> Vec<O> {
    let workers = if threads == 0 {
        thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        threads
    }
    .min(items.len())
    .max(1);
    let next = AtomicUsize::new(0);
    let mut done: Vec<(usize, O)> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= items.len() {
                            break out;
                        }
                        out.push((i, f(&items[i])));
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    done.sort_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, o)| o).collect()
}

type Fits = Vec<(ModelKind, Result<ModelFit<f64>>)>;

/// Everything computed for one subject.
#[derive(Default)]
struct SubjectWork {
    subject: String,
    indices: Option<IndexRow>,
    fits: Fits,
    summary: Option<SummaryRow>,
    validity: Vec<ValidityRow>,
    simulation: Option<SimulationRow>,
    files: Vec<PathBuf>,
    failures: Vec<Failure>,
}

impl SubjectWork {
    fn fail(&mut self, stage: &'static str, error: Error) {
        self.failures.push(Failure {
            subject: self.subject.clone(),
            stage,
            error,
        });
    }

    fn write(&mut self, out_dir: &Path, rel: PathBuf, bytes: &[u8]) -> Result<()> {
        write_atomic(&out_dir.join(&rel), bytes)?;
        self.files.push(rel);
        Ok(())
    }
}

fn dominance(series: &SubjectSeries, config: &RunConfig) -> Result<(Vec<DominanceRecord<f64>>, StabilitySeries<f64>)> {
    let records = apply_sentinel(subject_records::<f64>(series, config.normalize)?)?;
    let stability = community_series(&series.subject_id, &records)?;
    Ok((records, stability))
}

fn fixed_point_domain(lo: f64, hi: f64) -> (f64, f64) {
    let span = if hi > lo { hi - lo } else { hi.abs().max(1.0) };
    let a = (lo - span / 2.0).max(0.0);
    let b = (hi + span / 2.0).max(a + 1.0);
    (a, b)
}

fn process_subject(
    config: &RunConfig,
    command: &Command,
    subject: &str,
    series: &Result<SubjectSeries>,
) -> Result<SubjectWork> {
    let mut work = SubjectWork {
        subject: subject.to_string(),
        ..Default::default()
    };
    let stem = file_stem(subject);
    let series = match series {
        Ok(s) => s,
        Err(e) => {
            work.fail("input", e.clone());
            return Ok(work);
        }
    };

    if command.wants_indices() {
        work.indices = Some(IndexRow {
            subject: subject.to_string(),
            n: series.n_samples(),
            fits: IndexKind::ALL
                .iter()
                .map(|&k| (k, regress_dominance_vs_index::<f64>(series, k, config.log_base)))
                .collect(),
        });
    }
    if !command.wants_metrics() && !command.wants_fits() {
        return Ok(work);
    }

    let (records, stability) = match dominance(series, config) {
        Ok(x) => x,
        Err(e) => {
            work.fail("metrics", e);
            return Ok(work);
        }
    };
    if command.wants_metrics() {
        let bytes = tables::metrics_table(&series.species_ids, &records);
        work.write(&config.out_dir, PathBuf::from("metrics").join(format!("{stem}.csv")), &bytes)?;
        let bytes = tables::stability_table(&series.sample_ids, &stability);
        work.write(&config.out_dir, PathBuf::from("stability").join(format!("{stem}.csv")), &bytes)?;
    }
    if !command.wants_fits() {
        return Ok(work);
    }

    let input = match FitInput::from_series(&stability) {
        Ok(i) => i,
        Err(e) => {
            work.fail("fit", e);
            return Ok(work);
        }
    };
    work.fits = fit_all(&config.models, &input);
    let d_range = input.d_range();

    let mut selected: Option<SelectedModel<f64>> = None;
    if command.wants_selection() {
        for (kind, fit) in &work.fits {
            work.validity.push(ValidityRow {
                subject: subject.to_string(),
                kind: *kind,
                outcome: fit
                    .as_ref()
                    .map(|f| validate(f, &config.policy))
                    .map_err(|e| e.to_string()),
            });
        }
        let ok: Vec<ModelFit<f64>> = work.fits.iter().filter_map(|(_, f)| f.as_ref().ok().cloned()).collect();
        match select(&ok, &config.policy) {
            Ok(sel) => {
                work.summary = Some(summarize(subject, &sel, d_range));
                selected = Some(sel);
            }
            Err(e) => work.fail("select", e),
        }
    }

    let plot = config.plot || matches!(command, Command::ReportAll);
    if plot {
        let curves: Vec<svg::Curve<'_>> = work
            .fits
            .iter()
            .filter_map(|(_, f)| f.as_ref().ok())
            .map(|f| svg::Curve {
                label: match f.r2 {
                    Some(r2) => format!("{} (R2={r2:.2})", f.kind()),
                    None => f.kind().to_string(),
                },
                params: &f.params,
                highlight: selected.as_ref().is_some_and(|s| s.fit.params == f.params),
            })
            .collect();
        let points: Vec<(f64, f64)> = input.d.iter().copied().zip(input.s.iter().copied()).collect();
        let title = match &selected {
            Some(s) => format!("Subject {subject}: {} selected", s.kind()),
            None => format!("Subject {subject}"),
        };
        let bytes = svg::render(&title, &points, &curves);
        work.write(&config.out_dir, PathBuf::from("plots").join(format!("{stem}.svg")), bytes.as_bytes())?;
    }

    let sim = match command {
        Command::Simulate(o) => Some(o.clone()),
        Command::ReportAll => Some(SimulateOptions::default()),
        _ => None,
    };
    if let (Some(opts), Some(sel)) = (sim, &selected) {
        let params = sel.fit.params;
        let d0 = opts.d0.unwrap_or(records[0].community);
        match iterate(&params, d0, opts.steps) {
            Ok(traj) => {
                let bytes = tables::trajectory_table(&params, &traj);
                work.write(
                    &config.out_dir,
                    PathBuf::from("simulate").join(format!("{stem}_trajectory.csv")),
                    &bytes,
                )?;
                work.simulation = Some(SimulationRow {
                    subject: subject.to_string(),
                    kind: params.kind(),
                    trajectory: traj,
                });
            }
            Err(e) => work.fail("simulate", e),
        }
        let (lo, hi) = d_range.unwrap_or((0.0, 1.0));
        let (lo, hi) = fixed_point_domain(lo, hi);
        match regime_profile(&params, lo, hi, 2) {
            Ok(profile) => {
                let bytes = tables::fixed_points_table(&profile.fixed_points, &profile.qualitative);
                work.write(
                    &config.out_dir,
                    PathBuf::from("simulate").join(format!("{stem}_fixed_points.csv")),
                    &bytes,
                )?;
            }
            Err(e) => work.fail("fixed-points", e),
        }
    }
    Ok(work)
}

/// Runs one command over the cohort. Subject-level analysis failures are
/// collected in the outcome (and in `failures.csv`); input and I/O problems
/// abort with an error.
pub fn run(config: &RunConfig, command: &Command) -> Result<RunOutcome> {
    config.check()?;
    let mut subjects = load_subjects(config)?;
    if let Command::Simulate(SimulateOptions { subject: Some(id), .. }) = command {
        subjects.retain(|(s, _)| s == id);
        if subjects.is_empty() {
            return Err(Error::UnknownSubject(id.clone()));
        }
    }
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;

    let works = par_map(&subjects, config.threads, |(id, series)| {
        process_subject(config, command, id, series)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut outcome = RunOutcome::default();
    for w in &works {
        outcome.files.extend(w.files.iter().cloned());
        outcome.failures.extend(w.failures.iter().cloned());
    }
    let mut emit = |rel: &str, bytes: Vec<u8>| -> Result<()> {
        write_atomic(&config.out_dir.join(rel), &bytes)?;
        outcome.files.push(PathBuf::from(rel));
        Ok(())
    };

    if command.wants_indices() {
        let rows: Vec<&IndexRow> = works.iter().filter_map(|w| w.indices.as_ref()).collect();
        emit("compare_indices.csv", tables::compare_indices_table(&rows))?;
    }
    if command.wants_fits() && !matches!(command, Command::Simulate(_)) {
        for &kind in &config.models {
            let rows: Vec<(String, &Result<ModelFit<f64>>)> = works
                .iter()
                .flat_map(|w| {
                    w.fits
                        .iter()
                        .filter(move |(k, _)| *k == kind)
                        .map(move |(_, f)| (w.subject.clone(), f))
                })
                .collect();
            emit(&format!("fits/fit_{}.csv", kind.slug()), tables::fit_table(kind, &rows))?;
        }
    }
    if command.wants_selection() && !matches!(command, Command::Simulate(_)) {
        let rows: Vec<SummaryRow> = works.iter().filter_map(|w| w.summary.clone()).collect();
        emit("selection.csv", tables::selection_table(&rows))?;
        let rows: Vec<&ValidityRow> = works.iter().flat_map(|w| w.validity.iter()).collect();
        emit("validity.csv", tables::validity_table(&rows))?;
    }
    if matches!(command, Command::Simulate(_) | Command::ReportAll) {
        let rows: Vec<&SimulationRow> = works.iter().filter_map(|w| w.simulation.as_ref()).collect();
        emit("simulation.csv", tables::simulation_table(&rows))?;
    }

    let failure_rows: Vec<(String, String, String)> = outcome
        .failures
        .iter()
        .map(|f| (f.subject.clone(), f.stage.to_string(), f.error.to_string()))
        .collect();
    write_atomic(&config.out_dir.join("failures.csv"), &tables::failures_table(&failure_rows))?;
    outcome.files.push(PathBuf::from("failures.csv"));

    let manifest = manifest_entries(config, command, subjects.len(), &outcome);
    write_atomic(&config.out_dir.join("manifest.csv"), &tables::manifest_table(&manifest))?;
    outcome.files.push(PathBuf::from("manifest.csv"));
    Ok(outcome)
}

fn manifest_entries(config: &RunConfig, command: &Command, subjects: usize, outcome: &RunOutcome) -> Vec<(String, String)> {
    let models: Vec<&str> = config.models.iter().map(|k| k.slug()).collect();
    let mut m = vec![
        ("tool".to_string(), format!("domstab {}", env!("CARGO_PKG_VERSION"))),
        ("command".into(), command.name().into()),
        ("input".into(), config.input.display().to_string()),
        ("seed".into(), config.seed.to_string()),
        ("id_rule".into(), config.id_rule.to_string()),
        ("min_total_reads".into(), config.min_total_reads.to_string()),
        ("normalize".into(), config.normalize.to_string()),
        ("log_base".into(), match config.log_base {
            LogBase::Natural => "e".into(),
            LogBase::Two => "2".into(),
        }),
        ("models".into(), models.join(",")),
        ("r2_min".into(), format_real(config.policy.r2_min)),
        ("se_ratio_max".into(), format_real(config.policy.ratio_max)),
        ("mag_max".into(), format_real(config.policy.mag_max)),
        ("subjects".into(), subjects.to_string()),
        ("failures".into(), outcome.failures.len().to_string()),
    ];
    if let Command::Simulate(o) = command {
        m.push(("steps".into(), o.steps.to_string()));
        if let Some(d0) = o.d0 {
            m.push(("d0".into(), format_real(d0)));
        }
    }
    for f in &outcome.files {
        m.push(("file".into(), f.to_string_lossy().replace('\\', "/")));
    }
    m
}
