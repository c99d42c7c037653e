//! Sources of per-frame label distributions.
//!
//! Distributions come either from trace files written by an external model
//! runner, or from the future-leak oracle, which looks at the true voice
//! activity of a constructed scenario and emits the one-hot label of the
//! upcoming window. The oracle makes the whole evaluation chain testable
//! without a neural network: a scenario built to hold the turn must be
//! classified as a hold.
//!
//! Binary trace layout (all integers and floats little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `VAPT` |
//! | 1 | version, `1` |
//! | 4 | frame rate, f32 |
//! | 4 | frame count, u32 |
//! | 1024 × count | 256 f32 probabilities per frame, frame-major |
//!
//! The text form carries `key=value` header lines (`frame_rate` is required,
//! `frames` optional) followed by one comma-separated row per frame: 256
//! values for a distribution trace, or `p_now,p_fut` for a probability trace.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::{Aggregator, LabelDistribution, ProbFrame, ProbTrace};
use crate::codec::{encode_window, CodecConfig, Speaker, VaWindow, NUM_LABELS};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VAPT";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 13;
const FRAME_BYTES: usize = NUM_LABELS * 4;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDistTrace {
    frame_rate: f64,
    frames: Vec<LabelDistribution>,
}

impl FrameDistTrace {
    pub fn new(frame_rate: f64, frames: Vec<LabelDistribution>) -> Result<Self> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::TraceHeader(format!("frame rate must be positive, got {frame_rate}")));
        }
        Ok(Self { frame_rate, frames })
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn frames(&self) -> &[LabelDistribution] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn to_prob_trace(&self, aggregator: &Aggregator) -> Result<ProbTrace> {
        crate::aggregation::trace_from_distributions(&self.frames, self.frame_rate, aggregator)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.frames.len() * FRAME_BYTES);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.frame_rate as f32).to_le_bytes());
        out.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        for frame in &self.frames {
            for &p in frame.probs() {
                out.extend_from_slice(&(p as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::TraceHeader("missing VAPT magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::TraceHeader(format!("unsupported version {}", bytes[4])));
        }
        let frame_rate = f32::from_le_bytes(bytes[5..9].try_into().unwrap()) as f64;
        let count = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        let body = &bytes[HEADER_LEN..];
        let complete = body.len() / FRAME_BYTES;
        if complete < count {
            return Err(Error::TraceFormat {
                row: complete + 1,
                msg: format!(
                    "frame holds {} of {NUM_LABELS} values",
                    (body.len() % FRAME_BYTES) / 4
                ),
            });
        }
        if body.len() != count * FRAME_BYTES {
            return Err(Error::TraceHeader(format!(
                "header declares {count} frames but the body holds {} bytes",
                body.len()
            )));
        }
        let frames = body
            .chunks_exact(FRAME_BYTES)
            .enumerate()
            .map(|(i, chunk)| {
                let probs = chunk
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                    .collect();
                LabelDistribution::new(probs).map_err(|e| validation(i + 1, e))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(frame_rate, frames)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("frame_rate={}\nframes={}\n", self.frame_rate, self.frames.len());
        for frame in &self.frames {
            let row: Vec<String> = frame.probs().iter().map(|p| p.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

fn validation(row: usize, err: Error) -> Error {
    let msg = match err {
        Error::Distribution(msg) => msg,
        other => other.to_string(),
    };
    Error::TraceValidation { row, msg }
}

/// Contents of a trace file of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceData {
    Distributions(FrameDistTrace),
    Probabilities(ProbTrace),
}

impl TraceData {
    pub fn frame_rate(&self) -> f64 {
        match self {
            TraceData::Distributions(t) => t.frame_rate(),
            TraceData::Probabilities(t) => t.frame_rate(),
        }
    }

    pub fn into_prob_trace(self, aggregator: &Aggregator) -> Result<ProbTrace> {
        match self {
            TraceData::Distributions(t) => t.to_prob_trace(aggregator),
            TraceData::Probabilities(t) => Ok(t),
        }
    }
}

struct TextTrace {
    frame_rate: f64,
    rows: Vec<Vec<f64>>,
}

fn parse_text(text: &str) -> Result<TextTrace> {
    let mut frame_rate: Option<f64> = None;
    let mut declared_frames: Option<usize> = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            if !rows.is_empty() {
                return Err(Error::TraceHeader(format!("header line '{line}' after data rows")));
            }
            match key.trim() {
                "frame_rate" => {
                    let v: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::TraceHeader(format!("bad frame_rate '{value}'")))?;
                    if frame_rate.is_some_and(|old| old != v) {
                        return Err(Error::TraceHeader("contradictory frame_rate lines".into()));
                    }
                    frame_rate = Some(v);
                }
                "frames" => {
                    let v: usize = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::TraceHeader(format!("bad frames '{value}'")))?;
                    if declared_frames.is_some_and(|old| old != v) {
                        return Err(Error::TraceHeader("contradictory frames lines".into()));
                    }
                    declared_frames = Some(v);
                }
                other => return Err(Error::TraceHeader(format!("unknown header key '{other}'"))),
            }
            continue;
        }
        let row = rows.len() + 1;
        let values = line
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| Error::TraceFormat {
                    row,
                    msg: format!("'{}' is not a number", v.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    let frame_rate = frame_rate.ok_or_else(|| Error::TraceHeader("missing frame_rate".into()))?;
    if !(frame_rate.is_finite() && frame_rate > 0.0) {
        return Err(Error::TraceHeader(format!("frame rate must be positive, got {frame_rate}")));
    }
    if let Some(n) = declared_frames {
        if n != rows.len() {
            return Err(Error::TraceHeader(format!(
                "header declares {n} frames, file has {}",
                rows.len()
            )));
        }
    }
    Ok(TextTrace { frame_rate, rows })
}

fn dist_from_text(parsed: TextTrace) -> Result<FrameDistTrace> {
    let frames = parsed
        .rows
        .into_iter()
        .enumerate()
        .map(|(i, values)| {
            if values.len() != NUM_LABELS {
                return Err(Error::TraceFormat {
                    row: i + 1,
                    msg: format!("expected {NUM_LABELS} values, found {}", values.len()),
                });
            }
            LabelDistribution::new(values).map_err(|e| validation(i + 1, e))
        })
        .collect::<Result<Vec<_>>>()?;
    FrameDistTrace::new(parsed.frame_rate, frames)
}

fn prob_from_text(parsed: TextTrace) -> Result<ProbTrace> {
    let mut frames = Vec::with_capacity(parsed.rows.len());
    for (i, values) in parsed.rows.into_iter().enumerate() {
        let row = i + 1;
        let [p_now, p_fut] = values[..] else {
            return Err(Error::TraceFormat {
                row,
                msg: format!("expected p_now,p_fut, found {} values", values.len()),
            });
        };
        if !((0.0..=1.0).contains(&p_now) && (0.0..=1.0).contains(&p_fut)) {
            return Err(Error::TraceValidation {
                row,
                msg: "probabilities must lie in [0, 1]".into(),
            });
        }
        frames.push(ProbFrame { p_now, p_fut });
    }
    if frames.is_empty() {
        return Err(Error::TraceFormat { row: 1, msg: "no data rows".into() });
    }
    ProbTrace::new(parsed.frame_rate, frames)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn utf8(bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|_| Error::TraceHeader("neither a binary trace nor UTF-8 text".into()))
}

/// Parse a distribution trace from bytes, binary or text.
pub fn parse_trace(bytes: &[u8]) -> Result<FrameDistTrace> {
    if bytes.starts_with(MAGIC) {
        return FrameDistTrace::from_bytes(bytes);
    }
    dist_from_text(parse_text(&utf8(bytes.to_vec())?)?)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<FrameDistTrace> {
    parse_trace(&read(path.as_ref())?)
}

pub fn load_prob_trace(path: impl AsRef<Path>) -> Result<ProbTrace> {
    prob_from_text(parse_text(&utf8(read(path.as_ref())?)?)?)
}

/// Load any trace file, deciding the kind from its content.
pub fn load_any(path: impl AsRef<Path>) -> Result<TraceData> {
    let bytes = read(path.as_ref())?;
    if bytes.starts_with(MAGIC) {
        return FrameDistTrace::from_bytes(&bytes).map(TraceData::Distributions);
    }
    let parsed = parse_text(&utf8(bytes)?)?;
    if parsed.rows.first().is_some_and(|r| r.len() == 2) {
        prob_from_text(parsed).map(TraceData::Probabilities)
    } else {
        dist_from_text(parsed).map(TraceData::Distributions)
    }
}

pub fn write_trace(path: impl AsRef<Path>, trace: &FrameDistTrace) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn prob_trace_text(trace: &ProbTrace) -> String {
    let mut out = format!("frame_rate={}\n", trace.frame_rate());
    for f in trace.frames() {
        let _ = writeln!(out, "{},{}", f.p_now, f.p_fut);
    }
    out
}

pub fn write_prob_trace(path: impl AsRef<Path>, trace: &ProbTrace) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, prob_trace_text(trace)).map_err(|e| Error::io(path, e))
}

/// Ground-truth voice activity of a constructed two-speaker scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaScenario {
    pub duration: f64,
    #[serde(default)]
    pub agent: Vec<(f64, f64)>,
    #[serde(default)]
    pub user: Vec<(f64, f64)>,
}

impl VaScenario {
    pub fn new(duration: f64, agent: Vec<(f64, f64)>, user: Vec<(f64, f64)>) -> Result<Self> {
        let s = Self { duration, agent, user };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Scenario(format!("duration {} is not positive", self.duration)));
        }
        for s in Speaker::BOTH {
            let mut last_off = f64::NEG_INFINITY;
            for &(on, off) in self.intervals(s) {
                if !(on >= 0.0 && on < off && off <= self.duration) {
                    return Err(Error::Scenario(format!(
                        "{s:?} interval ({on}, {off}) is empty or outside [0, {}]",
                        self.duration
                    )));
                }
                if on < last_off {
                    return Err(Error::Scenario(format!("{s:?} intervals overlap or are unsorted")));
                }
                last_off = off;
            }
        }
        Ok(())
    }

    pub fn intervals(&self, speaker: Speaker) -> &[(f64, f64)] {
        match speaker {
            Speaker::Agent => &self.agent,
            Speaker::User => &self.user,
        }
    }

    /// Frame-level activity; a frame is active when its midpoint is inside
    /// an interval.
    pub fn frame_activity(&self, speaker: Speaker, frame_rate: f64) -> Vec<bool> {
        let n = (self.duration * frame_rate + 1e-9).floor() as usize;
        let intervals = self.intervals(speaker);
        (0..n)
            .map(|k| {
                let mid = (k as f64 + 0.5) / frame_rate;
                intervals.iter().any(|&(on, off)| mid >= on && mid < off)
            })
            .collect()
    }
}

/// One-hot distributions of the true upcoming window at every frame for
/// which a full window exists.
pub fn oracle_distributions(scenario: &VaScenario, cfg: &CodecConfig) -> Result<FrameDistTrace> {
    scenario.validate()?;
    let fr = cfg.frame_rate();
    let horizon = cfg.horizon_frames();
    let agent = scenario.frame_activity(Speaker::Agent, fr);
    let user = scenario.frame_activity(Speaker::User, fr);
    if agent.len() < horizon {
        return Err(Error::Scenario(format!(
            "scenario lasts {} s, shorter than the {} s projection window",
            scenario.duration,
            horizon as f64 / fr
        )));
    }
    let frames = (0..=agent.len() - horizon)
        .map(|n| {
            let window = VaWindow::new(agent[n..n + horizon].to_vec(), user[n..n + horizon].to_vec());
            encode_window(&window, cfg).map(LabelDistribution::one_hot)
        })
        .collect::<Result<Vec<_>>>()?;
    FrameDistTrace::new(fr, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::VapLabel;
    use proptest::prelude::*;

    fn hot(y: u8) -> LabelDistribution {
        LabelDistribution::one_hot(VapLabel::from(y))
    }

    #[test]
    fn binary_round_trip() {
        let t = FrameDistTrace::new(50.0, vec![hot(240), LabelDistribution::uniform()]).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..4], b"VAPT");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes.len(), 13 + 2 * 1024);
        let back = FrameDistTrace::from_bytes(&bytes).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.len(), 2);
    }

    #[test]
    fn binary_errors() {
        let t = FrameDistTrace::new(50.0, vec![hot(1), hot(2)]).unwrap();
        let bytes = t.to_bytes();
        assert!(matches!(FrameDistTrace::from_bytes(b"VAPX\x01"), Err(Error::TraceHeader(_))));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(FrameDistTrace::from_bytes(&v2), Err(Error::TraceHeader(_))));
        let cut = &bytes[..bytes.len() - 4];
        assert!(matches!(FrameDistTrace::from_bytes(cut), Err(Error::TraceFormat { row: 2, .. })));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 4]);
        assert!(matches!(FrameDistTrace::from_bytes(&long), Err(Error::TraceHeader(_))));
        let mut bad = bytes;
        bad[13 + 1024..13 + 1028].copy_from_slice(&0.5f32.to_le_bytes());
        bad[13 + 1024 + 8..13 + 1024 + 12].copy_from_slice(&0.4f32.to_le_bytes());
        let err = FrameDistTrace::from_bytes(&bad).unwrap_err();
        assert!(matches!(err, Error::TraceValidation { row: 2, .. }), "{err}");
    }

    #[test]
    fn text_trace_parsing() {
        let t = FrameDistTrace::new(50.0, vec![hot(3), hot(4)]).unwrap();
        assert_eq!(parse_trace(t.to_text().as_bytes()).unwrap(), t);

        let short = format!("frame_rate=50\n{}\n", vec!["0"; 255].join(","));
        let err = parse_trace(short.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::TraceFormat { row: 1, .. }), "{err}");
        assert!(err.to_string().contains("row 1"));

        let mut row = vec!["0".to_string(); 256];
        row[0] = "0.9".into();
        let low = format!("frame_rate=50\n{}\n", row.join(","));
        assert!(matches!(parse_trace(low.as_bytes()), Err(Error::TraceValidation { row: 1, .. })));

        let headless = vec!["0"; 256].join(",");
        assert!(matches!(parse_trace(headless.as_bytes()), Err(Error::TraceHeader(_))));
        let clash = "frame_rate=50\nframe_rate=25\n";
        assert!(matches!(parse_trace(clash.as_bytes()), Err(Error::TraceHeader(_))));
        let count = format!("frame_rate=50\nframes=3\n{}\n", t.to_text().lines().nth(2).unwrap());
        assert!(matches!(parse_trace(count.as_bytes()), Err(Error::TraceHeader(_))));
    }

    #[test]
    fn prob_trace_text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ptrace");
        let t = ProbTrace::new(
            50.0,
            vec![ProbFrame { p_now: 0.25, p_fut: 0.75 }, ProbFrame { p_now: 1.0 / 3.0, p_fut: 0.0 }],
        )
        .unwrap();
        write_prob_trace(&path, &t).unwrap();
        assert_eq!(load_prob_trace(&path).unwrap(), t);
        assert!(matches!(load_any(&path).unwrap(), TraceData::Probabilities(_)));
        std::fs::write(&path, "frame_rate=50\n0.2,1.5\n").unwrap();
        assert!(load_prob_trace(&path).is_err());
    }

    #[test]
    fn oracle_examples() {
        let cfg = CodecConfig::default();
        let s = VaScenario::new(4.0, vec![(0.0, 3.0)], vec![]).unwrap();
        let t = oracle_distributions(&s, &cfg).unwrap();
        assert_eq!(t.frames()[25].argmax().value(), 240);
        // a 4 s scene at 50 Hz has 200 frames, so 101 full windows
        assert_eq!(t.len(), 101);

        let silent = VaScenario::new(3.0, vec![], vec![]).unwrap();
        let t = oracle_distributions(&silent, &cfg).unwrap();
        assert!(t.frames().iter().all(|d| d.prob(VapLabel::from(0)) == 1.0));

        let short = VaScenario::new(1.5, vec![(0.0, 1.0)], vec![]).unwrap();
        assert!(matches!(oracle_distributions(&short, &cfg), Err(Error::Scenario(_))));
    }

    #[test]
    fn oracle_at_a_speaker_change() {
        // agent [0, 2], user [2.4, 4]; window at t = 1.9 s is frames 95..195
        let cfg = CodecConfig::default();
        let s = VaScenario::new(6.0, vec![(0.0, 2.0)], vec![(2.4, 4.0)]).unwrap();
        let t = oracle_distributions(&s, &cfg).unwrap();
        let agent: Vec<bool> = (95..195).map(|k| k < 100).collect();
        let user: Vec<bool> = (95..195).map(|k| (120..200).contains(&k)).collect();
        let expected = encode_window(&VaWindow::new(agent, user), &cfg).unwrap();
        assert_eq!(t.frames()[95].argmax(), expected);
        // agent covers exactly half of bin 0, which is not a majority; the
        // user fills the last two bins only
        assert_eq!(expected.value(), 0b0000_0011);
    }

    #[test]
    fn scenario_validation() {
        assert!(VaScenario::new(3.0, vec![(1.0, 0.5)], vec![]).is_err());
        assert!(VaScenario::new(3.0, vec![(0.0, 1.0), (0.5, 2.0)], vec![]).is_err());
        assert!(VaScenario::new(3.0, vec![], vec![(2.0, 3.5)]).is_err());
    }

    fn arb_f32_dist() -> impl Strategy<Value = LabelDistribution> {
        proptest::collection::vec(0u16..1000, 256).prop_map(|raw| {
            let total: u32 = raw.iter().map(|&v| v as u32).sum::<u32>().max(1);
            let probs = raw.iter().map(|&v| (v as f32 / total as f32) as f64).collect();
            LabelDistribution::new(probs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn oracle_is_one_hot(on in 0.0f64..2.0, len in 0.1f64..2.0, uon in 0.0f64..3.0) {
            let s = VaScenario::new(5.0, vec![(on, on + len)], vec![(uon, uon + 1.5)]).unwrap();
            let t = oracle_distributions(&s, &CodecConfig::default()).unwrap();
            for d in t.frames() {
                prop_assert_eq!(d.probs().iter().filter(|&&p| p == 1.0).count(), 1);
                prop_assert_eq!(d.probs().iter().filter(|&&p| p == 0.0).count(), 255);
            }
        }

        #[test]
        fn binary_format_is_bit_exact(frames in proptest::collection::vec(arb_f32_dist(), 1..4), rate in prop::sample::select(vec![12.5f64, 25.0, 50.0, 100.0])) {
            let t = FrameDistTrace::new(rate, frames).unwrap();
            let bytes = t.to_bytes();
            let back = FrameDistTrace::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
