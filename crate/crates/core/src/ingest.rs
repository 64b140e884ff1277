//! Abundance-table parsing, per-subject series assembly and read filtering.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use regex::Regex;

use crate::error::{Error, IdKind, Result};

/// Species × samples matrix of read counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbundanceTable {
    species_ids: Vec<String>,
    sample_ids: Vec<String>,
    /// `counts[species][sample]`
    counts: Vec<Vec<u64>>,
}

impl AbundanceTable {
    pub fn new(
        species_ids: Vec<String>,
        sample_ids: Vec<String>,
        counts: Vec<Vec<u64>>,
    ) -> Result<Self> {
        if counts.len() != species_ids.len() {
            return Err(Error::Precondition(format!(
                "{} count rows for {} species",
                counts.len(),
                species_ids.len()
            )));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != sample_ids.len() {
                return Err(Error::Parse {
                    row: i + 1,
                    expected: sample_ids.len() + 1,
                    found: row.len() + 1,
                });
            }
        }
        check_unique(&species_ids, IdKind::Species)?;
        check_unique(&sample_ids, IdKind::Sample)?;
        Ok(Self {
            species_ids,
            sample_ids,
            counts,
        })
    }

    pub fn species_ids(&self) -> &[String] {
        &self.species_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn n_species(&self) -> usize {
        self.species_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn column(&self, sample: usize) -> Vec<u64> {
        self.counts.iter().map(|row| row[sample]).collect()
    }
}

fn check_unique(ids: &[String], kind: IdKind) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    /// Tab if the header line contains a tab, comma otherwise.
    #[default]
    Auto,
    Comma,
    Tab,
}

impl Delimiter {
    fn resolve(self, text: &str) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
            Delimiter::Auto => {
                let header = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
                if header.contains('\t') {
                    b'\t'
                } else {
                    b','
                }
            }
        }
    }
}

impl FromStr for Delimiter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Delimiter::Auto),
            "comma" | "," | "csv" => Ok(Delimiter::Comma),
            "tab" | "\\t" | "tsv" => Ok(Delimiter::Tab),
            other => Err(format!("unknown delimiter {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TableFormat {
    pub delimiter: Delimiter,
}

/// Parses a delimiter-separated table whose header row holds sample IDs and
/// whose first column holds species IDs. Data rows are numbered from 1.
pub fn parse_table<R: Read>(mut reader: R, format: TableFormat) -> Result<AbundanceTable> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::EmptyTable(format!("unreadable input: {e}")))?;
    parse_str(&text, format)
}

pub fn parse_str(text: &str, format: TableFormat) -> Result<AbundanceTable> {
    let delimiter = format.delimiter.resolve(text);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| Error::EmptyTable(e.to_string()))?,
        None => return Err(Error::EmptyTable("no header row".into())),
    };
    if header.len() < 2 {
        return Err(Error::EmptyTable("header has no sample columns".into()));
    }
    let sample_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let width = header.len();

    let mut species_ids = Vec::new();
    let mut counts = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::EmptyTable(format!("row {row}: {e}")))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(Error::Parse {
                row,
                expected: width,
                found: rec.len(),
            });
        }
        species_ids.push(rec[0].to_owned());
        let values = rec
            .iter()
            .enumerate()
            .skip(1)
            .map(|(col, cell)| {
                cell.parse::<u64>().map_err(|_| Error::Value {
                    row,
                    col,
                    value: cell.to_owned(),
                })
            })
            .collect::<Result<Vec<u64>>>()?;
        counts.push(values);
    }
    AbundanceTable::new(species_ids, sample_ids, counts)
}

/// Writes the table back in the same layout `parse_table` reads.
pub fn emit_table<W: Write>(table: &AbundanceTable, writer: W, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(writer);
    let io = |e: csv::Error| Error::io("<table>", e);
    let mut header = vec!["species".to_string()];
    header.extend(table.sample_ids.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for (id, row) in table.species_ids.iter().zip(&table.counts) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<table>", e))
}

/// How the time token of a sample ID is turned into a sort key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DateToken {
    /// Six digits, month-day-year; sorted as year-month-day.
    Mmddyy,
    /// Six digits already in year-month-day order.
    Yymmdd,
    /// Non-negative integer sample index.
    Ordinal,
    /// Plain string comparison.
    Lexical,
}

/// Splits a sample ID into a subject and a time token.
#[derive(Debug, Clone)]
pub struct SampleIdRule {
    pattern: Regex,
    date: DateToken,
}

impl Default for SampleIdRule {
    fn default() -> Self {
        Self::new(r"^(?P<subject>.+)_(?P<time>\d{6})$", DateToken::Mmddyy)
            .expect("default rule compiles")
    }
}

impl SampleIdRule {
    /// `pattern` must contain named groups `subject` and `time`.
    pub fn new(pattern: &str, date: DateToken) -> Result<Self> {
        let pattern = Regex::new(pattern).map_err(|e| Error::InvalidIdRule(e.to_string()))?;
        let names: Vec<&str> = pattern.capture_names().flatten().collect();
        if !names.contains(&"subject") || !names.contains(&"time") {
            return Err(Error::InvalidIdRule(
                "pattern needs named groups `subject` and `time`".into(),
            ));
        }
        Ok(Self { pattern, date })
    }

    pub fn date_token(&self) -> DateToken {
        self.date
    }

    /// Returns `(subject, sortable time key)`.
    pub fn split(&self, sample_id: &str) -> Result<(String, String)> {
        let bad = || Error::IdRule(sample_id.to_owned());
        let caps = self.pattern.captures(sample_id).ok_or_else(bad)?;
        let subject = caps.name("subject").ok_or_else(bad)?.as_str();
        let time = caps.name("time").ok_or_else(bad)?.as_str();
        if subject.is_empty() {
            return Err(bad());
        }
        let key = match self.date {
            DateToken::Mmddyy => {
                if time.len() != 6 || !time.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(bad());
                }
                format!("{}{}", &time[4..6], &time[0..4])
            }
            DateToken::Yymmdd => {
                if time.len() != 6 || !time.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(bad());
                }
                time.to_owned()
            }
            DateToken::Ordinal => {
                let v: u64 = time.parse().map_err(|_| bad())?;
                format!("{v:020}")
            }
            DateToken::Lexical => time.to_owned(),
        };
        Ok((subject.to_owned(), key))
    }
}

impl fmt::Display for SampleIdRule {
    /// The `FORMAT:REGEX` form accepted by `FromStr`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_name = match self.date {
            DateToken::Mmddyy => "mmddyy",
            DateToken::Yymmdd => "yymmdd",
            DateToken::Ordinal => "ordinal",
            DateToken::Lexical => "lexical",
        };
        write!(f, "{fmt_name}:{}", self.pattern.as_str())
    }
}

impl FromStr for SampleIdRule {
    type Err = Error;

    /// `FORMAT` or `FORMAT:REGEX`, with FORMAT one of `mmddyy`, `yymmdd`,
    /// `ordinal`, `lexical`.
    fn from_str(s: &str) -> Result<Self> {
        let (fmt, pattern) = match s.split_once(':') {
            Some((f, p)) => (f, Some(p)),
            None => (s, None),
        };
        let date = match fmt.to_ascii_lowercase().as_str() {
            "mmddyy" => DateToken::Mmddyy,
            "yymmdd" => DateToken::Yymmdd,
            "ordinal" => DateToken::Ordinal,
            "lexical" => DateToken::Lexical,
            other => return Err(Error::InvalidIdRule(format!("unknown date format {other:?}"))),
        };
        let default_pattern = match date {
            DateToken::Mmddyy | DateToken::Yymmdd => r"^(?P<subject>.+)_(?P<time>\d{6})$",
            DateToken::Ordinal => r"^(?P<subject>.+)_(?P<time>\d+)$",
            DateToken::Lexical => r"^(?P<subject>[^_]+)_(?P<time>.+)$",
        };
        SampleIdRule::new(pattern.unwrap_or(default_pattern), date)
    }
}

/// Time-ordered samples of one subject over a fixed species roster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectSeries {
    pub subject_id: String,
    /// Ordered by time; position is the time index.
    pub sample_ids: Vec<String>,
    pub species_ids: Vec<String>,
    /// `counts[species][t]`
    pub counts: Vec<Vec<u64>>,
}

impl SubjectSeries {
    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_species(&self) -> usize {
        self.species_ids.len()
    }

    /// Fewer than two samples: kept for metric reports, excluded from
    /// stability analyses.
    pub fn is_short(&self) -> bool {
        self.n_samples() < 2
    }

    pub fn sample_counts(&self, t: usize) -> Vec<u64> {
        self.counts.iter().map(|row| row[t]).collect()
    }

    pub fn species_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }
}

/// Groups table columns by subject (in order of first appearance) and orders
/// each subject's samples by time key, ties broken by column order. The
/// roster is every species with a nonzero count somewhere in the subject.
pub fn split_subjects(table: &AbundanceTable, rule: &SampleIdRule) -> Result<Vec<SubjectSeries>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<(String, usize)>> = Vec::new();
    for (col, id) in table.sample_ids().iter().enumerate() {
        let (subject, key) = rule.split(id)?;
        match order.iter().position(|s| *s == subject) {
            Some(g) => groups[g].push((key, col)),
            None => {
                order.push(subject);
                groups.push(vec![(key, col)]);
            }
        }
    }

    Ok(order
        .into_iter()
        .zip(groups)
        .map(|(subject_id, mut cols)| {
            cols.sort();
            let cols: Vec<usize> = cols.into_iter().map(|(_, c)| c).collect();
            let mut species_ids = Vec::new();
            let mut counts = Vec::new();
            for (sp, row) in table.species_ids().iter().zip(table.counts()) {
                let sub: Vec<u64> = cols.iter().map(|&c| row[c]).collect();
                if sub.iter().any(|&v| v > 0) {
                    species_ids.push(sp.clone());
                    counts.push(sub);
                }
            }
            SubjectSeries {
                subject_id,
                sample_ids: cols.iter().map(|&c| table.sample_ids()[c].clone()).collect(),
                species_ids,
                counts,
            }
        })
        .collect())
}

/// Drops species whose summed reads over the subject fall below `min_total`.
pub fn filter_low_reads(series: &SubjectSeries, min_total: u64) -> Result<SubjectSeries> {
    let mut species_ids = Vec::new();
    let mut counts = Vec::new();
    for (id, row) in series.species_ids.iter().zip(&series.counts) {
        if row.iter().sum::<u64>() >= min_total {
            species_ids.push(id.clone());
            counts.push(row.clone());
        }
    }
    if species_ids.is_empty() {
        return Err(Error::EmptyRoster(series.subject_id.clone()));
    }
    Ok(SubjectSeries {
        subject_id: series.subject_id.clone(),
        sample_ids: series.sample_ids.clone(),
        species_ids,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Result<AbundanceTable> {
        parse_str(text, TableFormat::default())
    }

    #[test]
    fn parses_small_table() {
        let t = table("id,s1,s2\nA,4,1\nB,1,1\n").unwrap();
        assert_eq!(t.species_ids(), ["A", "B"]);
        assert_eq!(t.sample_ids(), ["s1", "s2"]);
        assert_eq!(t.counts(), [vec![4, 1], vec![1, 1]]);
    }

    #[test]
    fn detects_tabs() {
        let t = table("id\ts1\ts2\nA\t4\t1\n").unwrap();
        assert_eq!(t.counts(), [vec![4, 1]]);
    }

    #[test]
    fn ragged_row_reports_row_index() {
        let err = table("id,s1,s2\nA,4\n").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }), "{err:?}");
        let err = table("id,s1,s2\nA,4,1\nB,1,1,7\n").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err:?}");
    }

    #[test]
    fn rejects_negative_and_non_numeric_cells() {
        let err = table("id,s1,s2\nA,-3,1\n").unwrap_err();
        assert_eq!(
            err,
            Error::Value {
                row: 1,
                col: 1,
                value: "-3".into()
            }
        );
        assert!(matches!(
            table("id,s1\nA,x\n").unwrap_err(),
            Error::Value { .. }
        ));
        assert!(matches!(
            table("id,s1\nA,1.5\n").unwrap_err(),
            Error::Value { .. }
        ));
    }

    #[test]
    fn rejects_duplicate_ids() {
        assert!(matches!(
            table("id,s1,s1\nA,1,1\n").unwrap_err(),
            Error::DuplicateId {
                kind: IdKind::Sample,
                ..
            }
        ));
        assert!(matches!(
            table("id,s1\nA,1\nA,2\n").unwrap_err(),
            Error::DuplicateId {
                kind: IdKind::Species,
                ..
            }
        ));
    }

    #[test]
    fn emit_round_trips() {
        let text = "species,a_010106,a_010506\nx,0,12\ny,7,3\n";
        let t = table(text).unwrap();
        let mut out = Vec::new();
        emit_table(&t, &mut out, b',').unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn splits_subjects_by_id_rule() {
        let t = table("id,400_010106,412_010106,400_010506\nA,1,2,3\nB,0,5,0\n").unwrap();
        let subjects = split_subjects(&t, &SampleIdRule::default()).unwrap();
        assert_eq!(subjects.len(), 2);
        assert_eq!(subjects[0].subject_id, "400");
        assert_eq!(subjects[0].sample_ids, ["400_010106", "400_010506"]);
        assert!(!subjects[0].is_short());
        // B never appears for 400
        assert_eq!(subjects[0].species_ids, ["A"]);
        assert_eq!(subjects[1].subject_id, "412");
        assert!(subjects[1].is_short());
        assert_eq!(subjects[1].species_ids, ["A", "B"]);
    }

    #[test]
    fn orders_by_year_then_month_then_day() {
        let t = table("id,7_010207,7_123106,7_020106\nA,1,2,3\n").unwrap();
        let s = split_subjects(&t, &SampleIdRule::default()).unwrap();
        assert_eq!(s[0].sample_ids, ["7_020106", "7_123106", "7_010207"]);
        assert_eq!(s[0].counts, [vec![3, 2, 1]]);
    }

    #[test]
    fn ties_keep_column_order() {
        let rule: SampleIdRule = "lexical".parse().unwrap();
        let t = table("id,s_b,s_a,s_b2,s_a\nA,1,2,3,4\n");
        // duplicate sample id is rejected before splitting
        assert!(t.is_err());
        let t = table("id,s_b,s_a,s_a1\nA,1,2,3\n").unwrap();
        let s = split_subjects(&t, &rule).unwrap();
        assert_eq!(s[0].sample_ids, ["s_a", "s_a1", "s_b"]);
    }

    #[test]
    fn single_subject_keeps_all_columns() {
        let t = table("id,9_010106,9_010306,9_010506\nA,1,2,3\n").unwrap();
        let s = split_subjects(&t, &SampleIdRule::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].n_samples(), 3);
    }

    #[test]
    fn unmatched_id_is_rejected() {
        let t = table("id,400\nA,1\n").unwrap();
        assert_eq!(
            split_subjects(&t, &SampleIdRule::default()).unwrap_err(),
            Error::IdRule("400".into())
        );
    }

    #[test]
    fn custom_rule_parses() {
        let rule: SampleIdRule = "ordinal:^(?P<subject>[A-Z]+)-(?P<time>\\d+)$".parse().unwrap();
        let t = table("id,AB-10,AB-9,C-1\nA,1,2,3\n").unwrap();
        let s = split_subjects(&t, &rule).unwrap();
        assert_eq!(s[0].sample_ids, ["AB-9", "AB-10"]);
        assert!("weekly".parse::<SampleIdRule>().is_err());
        assert!(SampleIdRule::new("^(?P<subject>.+)$", DateToken::Lexical).is_err());
    }

    fn series(totals: &[(&str, u64)]) -> SubjectSeries {
        SubjectSeries {
            subject_id: "s".into(),
            sample_ids: vec!["s_1".into(), "s_2".into()],
            species_ids: totals.iter().map(|(id, _)| id.to_string()).collect(),
            counts: totals.iter().map(|&(_, t)| vec![t - t / 2, t / 2]).collect(),
        }
    }

    #[test]
    fn low_read_filter_uses_threshold_ten() {
        let s = series(&[("A", 250), ("B", 9), ("C", 10)]);
        let f = filter_low_reads(&s, 10).unwrap();
        assert_eq!(f.species_ids, ["A", "C"]);
        assert_eq!(filter_low_reads(&s, 0).unwrap(), s);
        assert_eq!(
            filter_low_reads(&s, 251).unwrap_err(),
            Error::EmptyRoster("s".into())
        );
    }
}
