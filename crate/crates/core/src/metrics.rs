//! Hold and yield classification over the regions of a two-sentence turn.
//!
//! A turn is a statement, a pause, a question and a silent tail. Three frame
//! spans are evaluated:
//!
//! * the pause between the sentences, where the agent should keep the turn;
//! * the last 600 ms of the question, where a good voice already signals the
//!   upcoming yield;
//! * the silent tail after the question, where the turn has been yielded.
//!
//! A region "favors" the agent when its probability is strictly above the
//! threshold (0.5 by default), and the user when strictly below it.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregation::{ProbTrace, Region};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const EARLY_YIELD_WINDOW: f64 = 0.6;
pub const DEFAULT_TAIL: f64 = 0.4;

/// Sentence boundaries of a turn, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnMarkers {
    pub statement_end: f64,
    pub question_start: f64,
    pub question_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub early_window: f64,
    pub tail: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            early_window: EARLY_YIELD_WINDOW,
            tail: DEFAULT_TAIL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRegions {
    pub pause: Range<usize>,
    pub early_yield: Range<usize>,
    pub late_yield: Range<usize>,
}

impl TurnRegions {
    /// One past the last frame any region touches.
    pub fn end(&self) -> usize {
        self.late_yield.end.max(self.early_yield.end).max(self.pause.end)
    }
}

fn to_frame(t: f64, frame_rate: f64) -> usize {
    (t * frame_rate).round().max(0.0) as usize
}

pub fn derive_regions(markers: &TurnMarkers, cfg: &RegionConfig, frame_rate: f64) -> Result<TurnRegions> {
    let TurnMarkers {
        statement_end,
        question_start,
        question_end,
    } = *markers;
    if [statement_end, question_start, question_end]
        .iter()
        .any(|t| !t.is_finite() || *t < 0.0)
    {
        return Err(Error::Region("turn markers must be finite and non-negative".into()));
    }
    if question_start <= statement_end {
        return Err(Error::Region(format!(
            "no pause: question starts at {question_start} s, statement ends at {statement_end} s"
        )));
    }
    if question_end - question_start < cfg.early_window - 1e-9 {
        return Err(Error::Region(format!(
            "turn too short for early-yield window: question lasts {:.3} s",
            question_end - question_start
        )));
    }
    if !(cfg.tail > 0.0) {
        return Err(Error::Region("tail silence must be longer than zero".into()));
    }
    let end = to_frame(question_end, frame_rate);
    let regions = TurnRegions {
        pause: to_frame(statement_end, frame_rate)..to_frame(question_start, frame_rate),
        early_yield: to_frame(question_end - cfg.early_window, frame_rate)..end,
        late_yield: end..to_frame(question_end + cfg.tail, frame_rate),
    };
    if regions.pause.is_empty() || regions.late_yield.is_empty() {
        return Err(Error::Region(format!("pause or tail is shorter than one frame at {frame_rate} Hz")));
    }
    Ok(regions)
}

/// How a region's frames are reduced to a single verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionRule {
    /// The region mean is beyond the threshold.
    #[default]
    Mean,
    /// Every frame of the region is beyond the threshold.
    AllFrames,
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecisionRule::Mean => "mean",
            DecisionRule::AllFrames => "all-frames",
        })
    }
}

impl FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(DecisionRule::Mean),
            "all-frames" | "all_frames" | "all" => Ok(DecisionRule::AllFrames),
            other => Err(Error::Config(format!("unknown decision rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TurnMetrics {
    pub weak_hold: bool,
    pub strong_hold: bool,
    pub early_yield: bool,
    pub late_yield: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    WeakHold,
    StrongHold,
    EarlyYield,
    LateYield,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::WeakHold,
        Metric::StrongHold,
        Metric::EarlyYield,
        Metric::LateYield,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::WeakHold => "weak_hold",
            Metric::StrongHold => "strong_hold",
            Metric::EarlyYield => "early_yield",
            Metric::LateYield => "late_yield",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::WeakHold => "Weak Hold",
            Metric::StrongHold => "Strong Hold",
            Metric::EarlyYield => "Early Yield",
            Metric::LateYield => "Late Yield",
        }
    }
}

impl TurnMetrics {
    pub fn get(&self, metric: Metric) -> bool {
        match metric {
            Metric::WeakHold => self.weak_hold,
            Metric::StrongHold => self.strong_hold,
            Metric::EarlyYield => self.early_yield,
            Metric::LateYield => self.late_yield,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Agent,
    User,
}

struct Judge<'a> {
    trace: &'a ProbTrace,
    rule: DecisionRule,
    threshold: f64,
}

impl Judge<'_> {
    fn favors(&self, side: Side, region: Region, span: &Range<usize>) -> bool {
        let beyond = |p: f64| match side {
            Side::Agent => p > self.threshold,
            Side::User => p < self.threshold,
        };
        let mut values = self.trace.region_values(region, span.clone());
        match self.rule {
            DecisionRule::Mean => {
                let (sum, n) = values.fold((0.0, 0usize), |(s, n), p| (s + p, n + 1));
                beyond(sum / n as f64)
            }
            DecisionRule::AllFrames => values.all(beyond),
        }
    }
}

pub fn classify(trace: &ProbTrace, regions: &TurnRegions, rule: DecisionRule, threshold: f64) -> Result<TurnMetrics> {
    for (name, span) in [
        ("pause", &regions.pause),
        ("early-yield", &regions.early_yield),
        ("late-yield", &regions.late_yield),
    ] {
        if span.is_empty() {
            return Err(Error::Region(format!("{name} region is empty")));
        }
        if span.end > trace.len() {
            return Err(Error::Region(format!(
                "{name} region ends at frame {} but the trace has {} frames",
                span.end,
                trace.len()
            )));
        }
    }
    let judge = Judge {
        trace,
        rule,
        threshold,
    };
    let weak_hold = judge.favors(Side::Agent, Region::Fut, &regions.pause);
    let strong_hold = weak_hold && judge.favors(Side::Agent, Region::Now, &regions.pause);
    let early_yield = judge.favors(Side::User, Region::Fut, &regions.early_yield);
    let late_yield = judge.favors(Side::User, Region::Now, &regions.late_yield)
        && judge.favors(Side::User, Region::Fut, &regions.late_yield);
    Ok(TurnMetrics {
        weak_hold,
        strong_hold,
        early_yield,
        late_yield,
    })
}

/// Percentage of samples for which each metric holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRates {
    pub weak_hold: f64,
    pub strong_hold: f64,
    pub early_yield: f64,
    pub late_yield: f64,
    pub n: usize,
}

impl MetricRates {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::WeakHold => self.weak_hold,
            Metric::StrongHold => self.strong_hold,
            Metric::EarlyYield => self.early_yield,
            Metric::LateYield => self.late_yield,
        }
    }
}

/// Rounded integer percentage as shown in tables.
pub fn display_percent(value: f64) -> i64 {
    value.round() as i64
}

pub fn aggregate_corpus(samples: &[TurnMetrics]) -> Result<MetricRates> {
    if samples.is_empty() {
        return Err(Error::Region("cannot aggregate an empty set of samples".into()));
    }
    let n = samples.len();
    let pct = |m: Metric| 100.0 * samples.iter().filter(|s| s.get(m)).count() as f64 / n as f64;
    Ok(MetricRates {
        weak_hold: pct(Metric::WeakHold),
        strong_hold: pct(Metric::StrongHold),
        early_yield: pct(Metric::EarlyYield),
        late_yield: pct(Metric::LateYield),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::ProbFrame;
    use proptest::prelude::*;

    fn markers(se: f64, qs: f64, qe: f64) -> TurnMarkers {
        TurnMarkers {
            statement_end: se,
            question_start: qs,
            question_end: qe,
        }
    }

    #[test]
    fn regions_at_50_hz() {
        let r = derive_regions(&markers(2.0, 2.4, 4.4), &RegionConfig::default(), 50.0).unwrap();
        assert_eq!(r.pause, 100..120);
        assert_eq!(r.early_yield, 190..220);
        assert_eq!(r.late_yield, 220..240);
    }

    #[test]
    fn region_errors() {
        let cfg = RegionConfig::default();
        let err = derive_regions(&markers(2.0, 2.4, 2.9), &cfg, 50.0).unwrap_err();
        assert!(err.to_string().contains("turn too short for early-yield window"));
        let no_tail = RegionConfig { tail: 0.0, ..cfg };
        assert!(derive_regions(&markers(2.0, 2.4, 4.4), &no_tail, 50.0).is_err());
        assert!(derive_regions(&markers(2.4, 2.4, 4.4), &cfg, 50.0).is_err());
        // exactly 600 ms of question is enough
        assert!(derive_regions(&markers(2.0, 2.4, 3.0), &cfg, 50.0).is_ok());
    }

    fn piecewise(parts: &[(usize, f64, f64)]) -> ProbTrace {
        let frames = parts
            .iter()
            .flat_map(|&(n, p_now, p_fut)| std::iter::repeat_n(ProbFrame { p_now, p_fut }, n))
            .collect();
        ProbTrace::new(50.0, frames).unwrap()
    }

    fn regions() -> TurnRegions {
        TurnRegions {
            pause: 10..20,
            early_yield: 30..40,
            late_yield: 40..50,
        }
    }

    #[test]
    fn classify_examples() {
        let t = piecewise(&[(10, 0.9, 0.9), (10, 0.9, 0.9), (10, 0.9, 0.9), (20, 0.2, 0.2)]);
        let m = classify(&t, &regions(), DecisionRule::Mean, 0.5).unwrap();
        assert_eq!(m, TurnMetrics { weak_hold: true, strong_hold: true, early_yield: true, late_yield: true });

        let t = piecewise(&[(10, 0.5, 0.5), (10, 0.4, 0.6), (10, 0.5, 0.5), (10, 0.5, 0.7), (10, 0.4, 0.4)]);
        let m = classify(&t, &regions(), DecisionRule::Mean, 0.5).unwrap();
        assert_eq!(m, TurnMetrics { weak_hold: true, strong_hold: false, early_yield: false, late_yield: true });

        let t = piecewise(&[(50, 0.5, 0.5)]);
        for rule in [DecisionRule::Mean, DecisionRule::AllFrames] {
            assert_eq!(classify(&t, &regions(), rule, 0.5).unwrap(), TurnMetrics::default());
        }
    }

    #[test]
    fn mean_and_all_frames_differ() {
        // one dissenting frame in the pause
        let mut parts = vec![(10, 0.9, 0.9), (9, 0.9, 0.9), (1, 0.9, 0.1), (30, 0.1, 0.1)];
        let t = piecewise(&parts);
        assert!(classify(&t, &regions(), DecisionRule::Mean, 0.5).unwrap().weak_hold);
        assert!(!classify(&t, &regions(), DecisionRule::AllFrames, 0.5).unwrap().weak_hold);
        parts[2] = (1, 0.9, 0.9);
        let t = piecewise(&parts);
        assert!(classify(&t, &regions(), DecisionRule::AllFrames, 0.5).unwrap().strong_hold);
    }

    #[test]
    fn region_past_trace_end() {
        let t = piecewise(&[(45, 0.5, 0.5)]);
        assert!(matches!(classify(&t, &regions(), DecisionRule::Mean, 0.5), Err(Error::Region(_))));
    }

    #[test]
    fn corpus_rates() {
        let yes = TurnMetrics { weak_hold: true, ..Default::default() };
        let mut samples = vec![yes; 97];
        samples.extend(vec![TurnMetrics::default(); 3]);
        let r = aggregate_corpus(&samples).unwrap();
        assert_eq!(r.weak_hold, 97.0);
        assert_eq!(r.n, 100);

        let r = aggregate_corpus(&[yes, TurnMetrics::default(), TurnMetrics::default()]).unwrap();
        assert_eq!(display_percent(r.weak_hold), 33);
        assert!((r.weak_hold - 100.0 / 3.0).abs() < 1e-12);

        assert!(aggregate_corpus(&[]).is_err());
    }

    fn arb_trace() -> impl Strategy<Value = ProbTrace> {
        proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 50)
            .prop_map(|v| ProbTrace::new(50.0, v.into_iter().map(|(p_now, p_fut)| ProbFrame { p_now, p_fut }).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn strong_implies_weak(t in arb_trace(), all in any::<bool>()) {
            let rule = if all { DecisionRule::AllFrames } else { DecisionRule::Mean };
            let m = classify(&t, &regions(), rule, 0.5).unwrap();
            prop_assert!(!m.strong_hold || m.weak_hold);
        }

        #[test]
        fn raising_pause_p_fut_keeps_weak_hold(t in arb_trace(), bump in 0.0f64..0.5) {
            let before = classify(&t, &regions(), DecisionRule::AllFrames, 0.5).unwrap();
            let mut frames = t.frames().to_vec();
            for f in &mut frames[regions().pause] {
                f.p_fut = (f.p_fut + bump).min(1.0);
            }
            let raised = ProbTrace::new(50.0, frames).unwrap();
            let after = classify(&raised, &regions(), DecisionRule::AllFrames, 0.5).unwrap();
            prop_assert!(!before.weak_hold || after.weak_hold);
        }

        #[test]
        fn only_region_values_matter(t in arb_trace(), noise in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 10)) {
            // frames 0..10 lie outside every region
            let mut frames = t.frames().to_vec();
            for (f, (a, b)) in frames[..10].iter_mut().zip(noise) {
                *f = ProbFrame { p_now: a, p_fut: b };
            }
            let other = ProbTrace::new(50.0, frames).unwrap();
            prop_assert_eq!(
                classify(&t, &regions(), DecisionRule::Mean, 0.5).unwrap(),
                classify(&other, &regions(), DecisionRule::Mean, 0.5).unwrap()
            );
        }
    }
}
