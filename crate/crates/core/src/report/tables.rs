//! CSV layouts. Every table has a fixed header and is written with `\n`
//! line endings; numbers use [`format_real`].

use csv::{Terminator, WriterBuilder};

use crate::dynamics::{FixedPoint, Trajectory, TrajectoryStatus};
use crate::error::Result;
use crate::fitting::ModelFit;
use crate::metrics::{IndexKind, LinearRegression};
use crate::models::{Branch, DerivedParams, ModelKind, ModelParams, PointKind, QualitativeEquilibrium};
use crate::scalar::format_real;
use crate::selection::{SummaryRow, ValidityReport};
use crate::stability::{DominanceRecord, StabilitySeries};

pub(crate) struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub(crate) fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = WriterBuilder::new()
            .terminator(Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer
            .write_record(header.iter().map(|h| h.as_ref()))
            .expect("writing to memory");
        Self { writer }
    }

    pub(crate) fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        self.writer
            .write_record(fields.iter().map(|f| f.as_ref()))
            .expect("writing to memory");
    }

    pub(crate) fn finish(self) -> Vec<u8> {
        self.writer.into_inner().expect("writing to memory")
    }
}

fn num(x: f64) -> String {
    format_real(x)
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `sample_id, D_c, <sp>_D_sd, <sp>_D_s, …, sentinel_replaced`; the last
/// column lists the species whose `D_s` was replaced, `;`-separated.
pub fn metrics_table(species_ids: &[String], records: &[DominanceRecord<f64>]) -> Vec<u8> {
    let mut header = vec!["sample_id".to_string(), "D_c".to_string()];
    for sp in species_ids {
        header.push(format!("{sp}_D_sd"));
        header.push(format!("{sp}_D_s"));
    }
    header.push("sentinel_replaced".into());
    let mut t = Table::new(&header);
    for rec in records {
        let mut row = vec![rec.sample_id.clone(), num(rec.community)];
        for sp in &rec.species {
            row.push(num(sp.distance));
            row.push(num(sp.dominance));
        }
        let replaced: Vec<&str> = rec
            .species
            .iter()
            .filter(|s| s.sentinel)
            .map(|s| s.species_id.as_str())
            .collect();
        row.push(replaced.join(";"));
        t.row(&row);
    }
    t.finish()
}

/// One row per consecutive pair of samples; excluded steps have an empty
/// `S_c` and a reason.
pub fn stability_table(sample_ids: &[String], series: &StabilitySeries<f64>) -> Vec<u8> {
    let mut t = Table::new(&["t", "sample_id", "D_c", "S_c", "excluded", "negative_base"]);
    for p in &series.points {
        t.row(&[
            p.t.to_string(),
            sample_ids.get(p.t).cloned().unwrap_or_default(),
            num(p.dominance),
            opt(p.stability),
            p.exclusion.map(|e| e.reason().to_string()).unwrap_or_default(),
            p.negative_base.to_string(),
        ]);
    }
    t.finish()
}

/// Regressions of `D_c` on each comparison index for one subject.
pub struct IndexRow {
    pub subject: String,
    pub n: usize,
    pub fits: Vec<(IndexKind, Result<LinearRegression<f64>>)>,
}

/// `subject, <index>_b, <index>_a, <index>_R, …, n, flag`, closed by a
/// `Mean` row averaging each column over the subjects where it is defined.
pub fn compare_indices_table(rows: &[&IndexRow]) -> Vec<u8> {
    let mut header = vec!["subject".to_string()];
    for k in IndexKind::ALL {
        for col in ["b", "a", "R"] {
            header.push(format!("{}_{col}", k.name()));
        }
    }
    header.push("n".into());
    header.push("flag".into());
    let mut t = Table::new(&header);
    let width = IndexKind::ALL.len() * 3;
    let mut sums = vec![(0.0, 0usize); width + 1];
    for row in rows {
        let mut fields = vec![row.subject.clone()];
        let mut flags = Vec::new();
        for (i, k) in IndexKind::ALL.iter().enumerate() {
            match row.fits.iter().find(|(kind, _)| kind == k).map(|(_, r)| r) {
                Some(Ok(reg)) => {
                    for (j, v) in [reg.slope, reg.intercept, reg.r].into_iter().enumerate() {
                        fields.push(num(v));
                        sums[3 * i + j].0 += v;
                        sums[3 * i + j].1 += 1;
                    }
                }
                Some(Err(e)) => {
                    fields.extend([String::new(), String::new(), String::new()]);
                    flags.push(format!("{}: {e}", k.name()));
                }
                None => fields.extend([String::new(), String::new(), String::new()]),
            }
        }
        fields.push(row.n.to_string());
        sums[width].0 += row.n as f64;
        sums[width].1 += 1;
        fields.push(flags.join("; "));
        t.row(&fields);
    }
    if !rows.is_empty() {
        let mut mean = vec!["Mean".to_string()];
        mean.extend(
            sums.iter()
                .map(|&(s, c)| if c == 0 { String::new() } else { num(s / c as f64) }),
        );
        mean.push(String::new());
        t.row(&mean);
    }
    t.finish()
}

/// Parameter positions (into `to_vec` order) in the column order of the
/// published tables.
fn column_order(kind: ModelKind) -> &'static [usize] {
    match kind {
        ModelKind::Logistic | ModelKind::LogisticSine => &[0, 2, 1],
        ModelKind::Linear => &[0, 1],
        ModelKind::LinearQuadratic => &[0, 1, 2, 3, 4],
        ModelKind::QuadraticQuadratic => &[0, 1, 2, 3, 4, 5],
    }
}

fn derived_columns(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::LinearQuadratic => &["b1", "c2"],
        ModelKind::QuadraticQuadratic => &["c1", "c2"],
        _ => &[],
    }
}

fn derived_values(d: &DerivedParams<f64>) -> Vec<f64> {
    match *d {
        DerivedParams::LinearQuadratic { b1, c2, .. } => vec![b1, c2],
        DerivedParams::QuadraticQuadratic { c1, c2, .. } => vec![c1, c2],
    }
}

pub fn fit_header(kind: ModelKind) -> Vec<String> {
    let names = kind.param_names();
    let mut h = vec!["subject".to_string()];
    for &i in column_order(kind) {
        h.push(names[i].to_string());
        h.push(format!("SE_{}", names[i]));
    }
    if kind == ModelKind::Linear {
        h.push("R".into());
    }
    h.push("R2".into());
    h.extend(derived_columns(kind).iter().map(|s| s.to_string()));
    for s in ["n", "R2_adj", "residual_ss", "converged", "iterations", "flags", "error"] {
        h.push(s.into());
    }
    h
}

/// One row per subject for a single model kind; a failed fit keeps its row
/// with the error in the last column.
pub fn fit_table(kind: ModelKind, rows: &[(String, &Result<ModelFit<f64>>)]) -> Vec<u8> {
    let header = fit_header(kind);
    let mut t = Table::new(&header);
    for (subject, fit) in rows {
        let mut fields = vec![subject.clone()];
        match fit {
            Ok(fit) => {
                let p = fit.params.to_vec();
                for &i in column_order(kind) {
                    fields.push(num(p[i]));
                    fields.push(fit.std_errors.get(i).copied().map(num).unwrap_or_default());
                }
                if kind == ModelKind::Linear {
                    fields.push(opt(fit.pearson_r));
                }
                fields.push(opt(fit.r2));
                if let Some(d) = &fit.derived {
                    fields.extend(derived_values(d).into_iter().map(num));
                } else {
                    fields.extend(derived_columns(kind).iter().map(|_| String::new()));
                }
                fields.push(fit.n.to_string());
                fields.push(opt(fit.r2_adj));
                fields.push(num(fit.residual_ss));
                fields.push(fit.converged.to_string());
                fields.push(fit.iterations.to_string());
                let flags: Vec<String> = fit.flags.iter().map(|f| f.to_string()).collect();
                fields.push(flags.join(";"));
                fields.push(String::new());
            }
            Err(e) => {
                fields.resize(header.len() - 1, String::new());
                fields.push(e.to_string());
            }
        }
        t.row(&fields);
    }
    t.finish()
}

pub fn selection_table(rows: &[SummaryRow]) -> Vec<u8> {
    let mut t = Table::new(&["subject", "kind", "quality", "signs", "pattern", "narrative", "rationale"]);
    for r in rows {
        t.row(&[
            r.subject.clone(),
            r.kind.to_string(),
            r.quality.clone(),
            r.signs.clone(),
            r.pattern.clone(),
            r.narrative.clone(),
            r.rationale.label().to_string(),
        ]);
    }
    t.finish()
}

/// Gate outcome of one attempted fit. `Err` carries the fitting error.
pub struct ValidityRow {
    pub subject: String,
    pub kind: ModelKind,
    pub outcome: std::result::Result<ValidityReport, String>,
}

pub fn validity_table(rows: &[&ValidityRow]) -> Vec<u8> {
    let mut t = Table::new(&["subject", "kind", "r2_ok", "se_ok", "magnitude_ok", "valid", "reasons"]);
    for r in rows {
        match &r.outcome {
            Ok(rep) => t.row(&[
                r.subject.clone(),
                r.kind.to_string(),
                rep.r2_ok.to_string(),
                rep.se_ok.to_string(),
                rep.magnitude_ok.to_string(),
                rep.valid.to_string(),
                rep.reasons.join("; "),
            ]),
            Err(e) => t.row(&[
                r.subject.clone(),
                r.kind.to_string(),
                String::new(),
                String::new(),
                String::new(),
                "false".into(),
                format!("fit failed: {e}"),
            ]),
        }
    }
    t.finish()
}

/// `t, D_c, S` along the trajectory; `S` is the model value at `D_c(t)`.
pub fn trajectory_table(params: &ModelParams<f64>, traj: &Trajectory<f64>) -> Vec<u8> {
    let mut t = Table::new(&["t", "D_c", "S"]);
    for (i, &d) in traj.values.iter().enumerate() {
        t.row(&[i.to_string(), num(d), num(params.value(d))]);
    }
    t.finish()
}

fn point_kind(kind: PointKind) -> &'static str {
    match kind {
        PointKind::Joint => "joint",
        PointKind::Vertex(Branch::Left) => "vertex-left",
        PointKind::Vertex(Branch::Right) => "vertex-right",
    }
}

/// Numeric roots of the model with their map multipliers, followed by the
/// qualitative equilibria read off the piecewise sign rules.
pub fn fixed_points_table(numeric: &[FixedPoint<f64>], qualitative: &[QualitativeEquilibrium<f64>]) -> Vec<u8> {
    let mut t = Table::new(&["source", "D_star", "multiplier", "verdict", "point", "on_branch"]);
    for fp in numeric {
        t.row(&[
            "numeric".to_string(),
            num(fp.d_star),
            num(fp.multiplier),
            fp.verdict.label().to_string(),
            "root".to_string(),
            String::new(),
        ]);
    }
    for q in qualitative {
        t.row(&[
            "qualitative".to_string(),
            num(q.location),
            String::new(),
            q.verdict.label().to_string(),
            point_kind(q.kind).to_string(),
            q.on_branch.to_string(),
        ]);
    }
    t.finish()
}

pub struct SimulationRow {
    pub subject: String,
    pub kind: ModelKind,
    pub trajectory: Trajectory<f64>,
}

pub fn simulation_table(rows: &[&SimulationRow]) -> Vec<u8> {
    let mut t = Table::new(&["subject", "kind", "D_0", "steps", "status", "final_D", "limit", "collapse_step"]);
    for r in rows {
        let traj = &r.trajectory;
        let (limit, collapse) = match traj.status {
            TrajectoryStatus::Converged(d) => (num(d), String::new()),
            TrajectoryStatus::Collapsed(s) => (String::new(), s.to_string()),
            _ => (String::new(), String::new()),
        };
        t.row(&[
            r.subject.clone(),
            r.kind.to_string(),
            num(traj.d0),
            (traj.values.len() - 1).to_string(),
            traj.status.label().to_string(),
            traj.values.last().copied().map(num).unwrap_or_default(),
            limit,
            collapse,
        ]);
    }
    t.finish()
}

pub fn failures_table(rows: &[(String, String, String)]) -> Vec<u8> {
    let mut t = Table::new(&["subject", "stage", "error"]);
    for (subject, stage, err) in rows {
        t.row(&[subject, stage, err]);
    }
    t.finish()
}

pub fn manifest_table(entries: &[(String, String)]) -> Vec<u8> {
    let mut t = Table::new(&["key", "value"]);
    for (k, v) in entries {
        t.row(&[k, v]);
    }
    t.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_str, split_subjects, SampleIdRule, TableFormat};
    use crate::stability::{apply_sentinel, community_series, subject_records};

    fn text(bytes: Vec<u8>) -> String {
        String::from_utf8(bytes).unwrap()
    }

    #[test]
    fn two_species_metrics_row() {
        let table = parse_str("otu,s1_000001\nsp1,4\nsp2,1\n", TableFormat::default()).unwrap();
        let rule: SampleIdRule = "ordinal".parse().unwrap();
        let series = &split_subjects(&table, &rule).unwrap()[0];
        let recs = apply_sentinel(subject_records::<f64>(series, false).unwrap()).unwrap();
        let out = text(metrics_table(&series.species_ids, &recs));
        let mut lines = out.lines();
        assert_eq!(lines.next().unwrap(), "sample_id,D_c,sp1_D_sd,sp1_D_s,sp2_D_sd,sp2_D_s,sentinel_replaced");
        assert_eq!(lines.next().unwrap(), "s1_000001,0.96,0.6,0.36,2.4,-1.44,");
    }

    #[test]
    fn absent_species_are_flagged() {
        let table = parse_str("otu,x_1,x_2\nsp1,4,5\nsp2,0,1\n", TableFormat::default()).unwrap();
        let rule: SampleIdRule = "ordinal".parse().unwrap();
        let series = &split_subjects(&table, &rule).unwrap()[0];
        let recs = apply_sentinel(subject_records::<f64>(series, false).unwrap()).unwrap();
        let out = text(metrics_table(&series.species_ids, &recs));
        let first = out.lines().nth(1).unwrap();
        assert!(first.contains(",inf,"), "{first}");
        assert!(first.ends_with(",sp2"), "{first}");
        let st = text(stability_table(&series.sample_ids, &community_series("x", &recs).unwrap()));
        assert_eq!(st.lines().count(), 2);
        assert!(st.starts_with("t,sample_id,D_c,S_c,excluded,negative_base\n"));
    }

    #[test]
    fn empty_cohort_tables_are_header_only() {
        assert_eq!(text(selection_table(&[])).lines().count(), 1);
        assert_eq!(text(compare_indices_table(&[])).lines().count(), 1);
        assert_eq!(text(fit_table(ModelKind::QuadraticQuadratic, &[])).lines().count(), 1);
    }

    #[test]
    fn logistic_columns_follow_published_order() {
        let h = fit_header(ModelKind::Logistic);
        assert_eq!(&h[..8], ["subject", "K", "SE_K", "r", "SE_r", "a", "SE_a", "R2"]);
        let h = fit_header(ModelKind::LinearQuadratic);
        assert_eq!(&h[11..14], ["R2", "b1", "c2"]);
    }

    #[test]
    fn failed_fit_keeps_its_row() {
        let err: Result<ModelFit<f64>> = Err(crate::error::Error::InsufficientSupport {
            kind: ModelKind::LinearQuadratic,
        });
        let out = text(fit_table(ModelKind::LinearQuadratic, &[("402".into(), &err)]));
        let row = out.lines().nth(1).unwrap();
        let header = out.lines().next().unwrap();
        let mut rdr = csv::Reader::from_reader(out.as_bytes());
        let rec = rdr.records().next().unwrap().unwrap();
        assert_eq!(rec.len(), header.split(',').count());
        assert!(row.starts_with("402,,"));
        assert!(!rec.get(rec.len() - 1).unwrap().is_empty());
    }

    #[test]
    fn mean_row_skips_undefined_cells() {
        let reg = |b: f64| LinearRegression { slope: b, intercept: 0.0, r: 1.0, n: 3 };
        let rows = [
            IndexRow {
                subject: "a".into(),
                n: 3,
                fits: vec![(IndexKind::Simpson, Ok(reg(2.0)))],
            },
            IndexRow {
                subject: "b".into(),
                n: 5,
                fits: vec![
                    (IndexKind::Simpson, Ok(reg(4.0))),
                    (IndexKind::ShannonEvenness, Err(crate::error::Error::DegenerateRegression("x".into()))),
                ],
            },
        ];
        let refs: Vec<&IndexRow> = rows.iter().collect();
        let out = text(compare_indices_table(&refs));
        let mut rdr = csv::Reader::from_reader(out.as_bytes());
        let headers = rdr.headers().unwrap().clone();
        let recs: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
        let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
        let mean = &recs[2];
        assert_eq!(&mean[0], "Mean");
        assert_eq!(&mean[col("simpson_b")], "3");
        assert_eq!(&mean[col("n")], "4");
        assert_eq!(&mean[col("shannon_b")], "");
        assert!(recs[1][col("flag")].starts_with("shannon_evenness"));
    }
}
