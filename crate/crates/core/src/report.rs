//! Corpus reports: one cell of metric rates per system and condition.
//!
//! Machine-readable output (CSV, JSON) keeps full precision; the text table
//! rounds to whole percentages with rows as metrics and columns as systems,
//! one block per condition. Naturalness (MOS) and word error rate columns
//! are merged in from an external CSV when supplied.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{aggregate_corpus, display_percent, DecisionRule, Metric, MetricRates, TurnMetrics};

/// Classification of one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleResult {
    pub system: String,
    pub condition: String,
    pub sample_id: String,
    pub weak_hold: bool,
    pub strong_hold: bool,
    pub early_yield: bool,
    pub late_yield: bool,
}

impl SampleResult {
    pub fn new(system: &str, condition: &str, sample_id: &str, m: TurnMetrics) -> Self {
        Self {
            system: system.to_string(),
            condition: condition.to_string(),
            sample_id: sample_id.to_string(),
            weak_hold: m.weak_hold,
            strong_hold: m.strong_hold,
            early_yield: m.early_yield,
            late_yield: m.late_yield,
        }
    }

    pub fn metrics(&self) -> TurnMetrics {
        TurnMetrics {
            weak_hold: self.weak_hold,
            strong_hold: self.strong_hold,
            early_yield: self.early_yield,
            late_yield: self.late_yield,
        }
    }
}

/// Externally measured quality scores for a system and condition.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExternalScores {
    pub mos: Option<f64>,
    pub wer: Option<f64>,
}

#[derive(Deserialize)]
struct ScoreRow {
    system: String,
    condition: String,
    mos: Option<f64>,
    wer: Option<f64>,
}

pub type ScoreTable = BTreeMap<(String, String), ExternalScores>;

/// Read `system,condition,mos,wer` rows; either score may be blank.
pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut table = ScoreTable::new();
    for row in reader.deserialize::<ScoreRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        table.insert((row.system, row.condition), ExternalScores { mos: row.mos, wer: row.wer });
    }
    Ok(table)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Corpus {
        location: path.display().to_string(),
        msg: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub system: String,
    pub condition: String,
    pub n: usize,
    pub weak_hold: f64,
    pub strong_hold: f64,
    pub early_yield: f64,
    pub late_yield: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mos: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wer: Option<f64>,
}

impl ReportCell {
    pub fn rates(&self) -> MetricRates {
        MetricRates {
            weak_hold: self.weak_hold,
            strong_hold: self.strong_hold,
            early_yield: self.early_yield,
            late_yield: self.late_yield,
            n: self.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    /// Run settings echoed into every output, in key order.
    pub metadata: BTreeMap<String, String>,
    pub rule: DecisionRule,
    pub threshold: f64,
    pub cells: Vec<ReportCell>,
}

impl CorpusReport {
    /// Group samples by (system, condition), both sorted by name.
    pub fn from_samples(
        samples: &[SampleResult],
        rule: DecisionRule,
        threshold: f64,
        scores: &ScoreTable,
    ) -> Result<Self> {
        let mut groups: BTreeMap<(String, String), Vec<TurnMetrics>> = BTreeMap::new();
        for s in samples {
            groups
                .entry((s.system.clone(), s.condition.clone()))
                .or_default()
                .push(s.metrics());
        }
        if groups.is_empty() {
            return Err(Error::Region("no samples to report".into()));
        }
        let cells = groups
            .into_iter()
            .map(|((system, condition), metrics)| {
                let r = aggregate_corpus(&metrics)?;
                let extra = scores.get(&(system.clone(), condition.clone())).copied().unwrap_or_default();
                Ok(ReportCell {
                    system,
                    condition,
                    n: r.n,
                    weak_hold: r.weak_hold,
                    strong_hold: r.strong_hold,
                    early_yield: r.early_yield,
                    late_yield: r.late_yield,
                    mos: extra.mos,
                    wer: extra.wer,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            metadata: BTreeMap::new(),
            rule,
            threshold,
            cells,
        })
    }

    fn has_scores(&self) -> bool {
        self.cells.iter().any(|c| c.mos.is_some() || c.wer.is_some())
    }

    fn metadata_lines(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "# rule={} threshold={}", self.rule, self.threshold);
        out
    }

    /// Full-precision rates, preceded by `#` metadata lines.
    pub fn to_csv(&self) -> String {
        let scores = self.has_scores();
        let mut out = self.metadata_lines();
        out.push_str("system,condition,weak_hold,strong_hold,early_yield,late_yield,n");
        if scores {
            out.push_str(",mos,wer");
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&c.system),
                csv_field(&c.condition),
                c.weak_hold,
                c.strong_hold,
                c.early_yield,
                c.late_yield,
                c.n
            );
            if scores {
                let _ = write!(out, ",{},{}", opt(c.mos), opt(c.wer));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Tables in the layout metric × system, one per condition.
    pub fn to_table(&self) -> String {
        let mut systems: Vec<&str> = self.cells.iter().map(|c| c.system.as_str()).collect();
        systems.dedup();
        systems.sort();
        systems.dedup();
        let mut conditions: Vec<&str> = self.cells.iter().map(|c| c.condition.as_str()).collect();
        conditions.sort();
        conditions.dedup();
        let lookup = |s: &str, cond: &str| self.cells.iter().find(|c| c.system == s && c.condition == cond);
        let width = systems.iter().map(|s| s.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        for cond in conditions {
            let _ = writeln!(
                out,
                "{} (rule: {}, threshold: {}; values in %)",
                cond.to_uppercase(),
                self.rule,
                self.threshold
            );
            let _ = write!(out, "{:<12}", "Metric");
            for s in &systems {
                let _ = write!(out, " {s:>width$}");
            }
            out.push('\n');
            let mut row = |label: &str, value: &dyn Fn(&ReportCell) -> Option<String>| {
                let _ = write!(out, "{label:<12}");
                for s in &systems {
                    let v = lookup(s, cond).and_then(value).unwrap_or_else(|| "-".into());
                    let _ = write!(out, " {v:>width$}");
                }
                out.push('\n');
            };
            for m in Metric::ALL {
                row(m.title(), &|c| Some(display_percent(c.rates().get(m)).to_string()));
            }
            if self.has_scores() {
                row("MOS", &|c| c.mos.map(|v| format!("{v:.1}")));
                row("WER", &|c| c.wer.map(|v| format!("{v:.1}")));
            }
            row("n", &|c| Some(c.n.to_string()));
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-sample rows with 0/1 verdicts.
pub fn samples_csv(samples: &[SampleResult]) -> String {
    let mut out = String::from("system,condition,sample_id,weak_hold,strong_hold,early_yield,late_yield\n");
    for s in samples {
        let b = |v: bool| u8::from(v);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&s.system),
            csv_field(&s.condition),
            csv_field(&s.sample_id),
            b(s.weak_hold),
            b(s.strong_hold),
            b(s.early_yield),
            b(s.late_yield)
        );
    }
    out
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<SampleResult>> {
    #[derive(Deserialize)]
    struct Row {
        system: String,
        condition: String,
        sample_id: String,
        weak_hold: u8,
        strong_hold: u8,
        early_yield: u8,
        late_yield: u8,
    }
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    reader
        .deserialize::<Row>()
        .map(|row| {
            let r = row.map_err(|e| csv_err(path, e))?;
            Ok(SampleResult {
                system: r.system,
                condition: r.condition,
                sample_id: r.sample_id,
                weak_hold: r.weak_hold == 1,
                strong_hold: r.strong_hold == 1,
                early_yield: r.early_yield == 1,
                late_yield: r.late_yield == 1,
            })
        })
        .collect()
}
