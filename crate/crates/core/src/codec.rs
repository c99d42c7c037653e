//! The discrete projection state space.
//!
//! A projection window covers the next [`HORIZON`] seconds of two-speaker
//! voice activity. Each speaker's part of the window is cut into four bins of
//! increasing length (0.2, 0.4, 0.6 and 0.8 s). A bin is active when strictly
//! more than half of its frames carry voice activity, so a window collapses to
//! 8 bits, or one of 256 labels.
//!
//! Bit layout of a [`VapLabel`]: the agent occupies the high nibble, the user
//! the low nibble, and within a nibble the nearest bin is the most significant
//! bit. Label `240` (`0b1111_0000`) therefore reads "agent active throughout,
//! user silent".

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// Bin lengths in seconds, nearest first.
pub const BIN_DURATIONS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

/// Length of a projection window in seconds.
pub const HORIZON: f64 = 2.0;

pub const NUM_LABELS: usize = 256;

pub const DEFAULT_FRAME_RATE: f64 = 50.0;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Speaker {
    /// Channel 0, the system whose speech is evaluated.
    Agent = 0,
    /// Channel 1, the simulated interlocutor.
    User = 1,
}

impl Speaker {
    pub const BOTH: [Speaker; 2] = [Speaker::Agent, Speaker::User];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn other(self) -> Speaker {
        match self {
            Speaker::Agent => Speaker::User,
            Speaker::User => Speaker::Agent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecConfig {
    bin_durations: [f64; 4],
    frame_rate: f64,
    bin_frames: [usize; 4],
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self::new(DEFAULT_FRAME_RATE).expect("default frame rate divides every bin")
    }
}

impl CodecConfig {
    /// Standard bins at the given frame rate.
    pub fn new(frame_rate: f64) -> Result<Self> {
        Self::with_bins(BIN_DURATIONS, frame_rate)
    }

    pub fn with_bins(bin_durations: [f64; 4], frame_rate: f64) -> Result<Self> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::Config(format!("frame rate must be positive, got {frame_rate}")));
        }
        if bin_durations.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Config("bin durations must be positive".into()));
        }
        if bin_durations.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("bin durations must be strictly increasing".into()));
        }
        let total: f64 = bin_durations.iter().sum();
        if (total - HORIZON).abs() > EPS {
            return Err(Error::Config(format!(
                "bin durations sum to {total} s, expected {HORIZON} s"
            )));
        }
        let mut bin_frames = [0usize; 4];
        for (slot, d) in bin_frames.iter_mut().zip(bin_durations) {
            let frames = d * frame_rate;
            let rounded = frames.round();
            if (frames - rounded).abs() > 1e-6 || rounded < 1.0 {
                return Err(Error::Config(format!(
                    "a {d} s bin is {frames} frames at {frame_rate} Hz, not a whole number"
                )));
            }
            *slot = rounded as usize;
        }
        Ok(Self {
            bin_durations,
            frame_rate,
            bin_frames,
        })
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn bin_durations(&self) -> [f64; 4] {
        self.bin_durations
    }

    pub fn bin_frames(&self) -> [usize; 4] {
        self.bin_frames
    }

    /// Frames in one projection window (100 at 50 Hz).
    pub fn horizon_frames(&self) -> usize {
        self.bin_frames.iter().sum()
    }

    /// Contiguous frame ranges of the four bins, nearest first.
    pub fn bin_frame_spans(&self) -> [Range<usize>; 4] {
        let mut start = 0;
        self.bin_frames.map(|n| {
            let span = start..start + n;
            start += n;
            span
        })
    }
}

/// Activity of the eight bins, indexed `[speaker][bin]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BinMatrix {
    pub bins: [[bool; 4]; 2],
}

impl BinMatrix {
    pub fn new(agent: [bool; 4], user: [bool; 4]) -> Self {
        Self {
            bins: [agent, user],
        }
    }

    pub fn speaker(&self, speaker: Speaker) -> [bool; 4] {
        self.bins[speaker.index()]
    }

    pub fn is_active(&self, speaker: Speaker, bin: usize) -> bool {
        self.bins[speaker.index()][bin]
    }

    pub fn label(&self) -> VapLabel {
        let mut value = 0u8;
        for (s, row) in self.bins.iter().enumerate() {
            for (i, &active) in row.iter().enumerate() {
                if active {
                    value |= 1 << bit_position(s, i);
                }
            }
        }
        VapLabel(value)
    }
}

fn bit_position(speaker: usize, bin: usize) -> u32 {
    (7 - (4 * speaker + bin)) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VapLabel(u8);

impl VapLabel {
    pub fn new(value: i64) -> Result<Self> {
        u8::try_from(value)
            .map(VapLabel)
            .map_err(|_| Error::LabelRange(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = VapLabel> {
        (0..=u8::MAX).map(VapLabel)
    }

    pub fn bins(self) -> BinMatrix {
        let mut bins = [[false; 4]; 2];
        for (s, row) in bins.iter_mut().enumerate() {
            for (i, cell) in row.iter_mut().enumerate() {
                *cell = self.0 >> bit_position(s, i) & 1 == 1;
            }
        }
        BinMatrix { bins }
    }

    pub fn is_active(self, speaker: Speaker, bin: usize) -> bool {
        self.0 >> bit_position(speaker.index(), bin) & 1 == 1
    }

    /// The same state with the two speakers exchanged.
    pub fn swap_speakers(self) -> VapLabel {
        VapLabel(self.0.rotate_left(4))
    }
}

impl From<u8> for VapLabel {
    fn from(value: u8) -> Self {
        VapLabel(value)
    }
}

impl fmt::Display for VapLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:04b}|{:04b})", self.0, self.0 >> 4, self.0 & 0x0f)
    }
}

pub fn decode_label(value: i64) -> Result<BinMatrix> {
    Ok(VapLabel::new(value)?.bins())
}

/// Frame-level voice activity of both speakers over one projection window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VaWindow {
    frames: [Vec<bool>; 2],
}

impl VaWindow {
    pub fn new(agent: Vec<bool>, user: Vec<bool>) -> Self {
        Self {
            frames: [agent, user],
        }
    }

    pub fn silent(cfg: &CodecConfig) -> Self {
        let n = cfg.horizon_frames();
        Self::new(vec![false; n], vec![false; n])
    }

    /// A window in which every bin is either fully active or fully silent.
    pub fn realizing(bins: &BinMatrix, cfg: &CodecConfig) -> Self {
        let frames = Speaker::BOTH.map(|s| {
            cfg.bin_frame_spans()
                .into_iter()
                .zip(bins.speaker(s))
                .flat_map(|(span, active)| std::iter::repeat_n(active, span.len()))
                .collect()
        });
        Self { frames }
    }

    pub fn speaker(&self, speaker: Speaker) -> &[bool] {
        &self.frames[speaker.index()]
    }

    pub fn speaker_mut(&mut self, speaker: Speaker) -> &mut [bool] {
        &mut self.frames[speaker.index()]
    }
}

/// Collapse a window to its label using the strict-majority rule per bin.
pub fn encode_window(window: &VaWindow, cfg: &CodecConfig) -> Result<VapLabel> {
    let expected = cfg.horizon_frames();
    for s in Speaker::BOTH {
        let actual = window.speaker(s).len();
        if actual != expected {
            return Err(Error::Dimension { expected, actual });
        }
    }
    let spans = cfg.bin_frame_spans();
    let mut bins = BinMatrix::default();
    for s in Speaker::BOTH {
        let frames = window.speaker(s);
        for (i, span) in spans.iter().enumerate() {
            let active = frames[span.clone()].iter().filter(|&&a| a).count();
            bins.bins[s.index()][i] = 2 * active > span.len();
        }
    }
    Ok(bins.label())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spans_at_50_hz() {
        let cfg = CodecConfig::default();
        assert_eq!(cfg.bin_frame_spans(), [0..10, 10..30, 30..60, 60..100]);
        assert_eq!(cfg.horizon_frames(), 100);
    }

    #[test]
    fn spans_at_100_and_25_hz() {
        let cfg = CodecConfig::new(100.0).unwrap();
        assert_eq!(cfg.bin_frame_spans(), [0..20, 20..60, 60..120, 120..200]);
        let cfg = CodecConfig::new(25.0).unwrap();
        assert_eq!(cfg.bin_frame_spans(), [0..5, 5..15, 15..30, 30..50]);
    }

    #[test]
    fn rejects_fractional_bins() {
        // 0.2 s at 12 Hz is 2.4 frames
        assert!(matches!(CodecConfig::new(12.0), Err(Error::Config(_))));
        assert!(CodecConfig::new(0.0).is_err());
        assert!(CodecConfig::with_bins([0.4, 0.2, 0.6, 0.8], 50.0).is_err());
        assert!(CodecConfig::with_bins([0.2, 0.4, 0.6, 0.7], 50.0).is_err());
    }

    #[test]
    fn encode_examples() {
        let cfg = CodecConfig::default();
        assert_eq!(encode_window(&VaWindow::silent(&cfg), &cfg).unwrap().value(), 0);

        let agent = VaWindow::new(vec![true; 100], vec![false; 100]);
        assert_eq!(encode_window(&agent, &cfg).unwrap().value(), 240);

        let w = VaWindow::new(
            (0..100).map(|k| k >= 30).collect(),
            (0..100).map(|k| k < 30).collect(),
        );
        assert_eq!(encode_window(&w, &cfg).unwrap().value(), 60);
    }

    #[test]
    fn wrong_frame_count() {
        let cfg = CodecConfig::default();
        let w = VaWindow::new(vec![false; 99], vec![false; 100]);
        assert!(matches!(
            encode_window(&w, &cfg),
            Err(Error::Dimension {
                expected: 100,
                actual: 99
            })
        ));
    }

    #[test]
    fn exact_half_is_inactive() {
        let cfg = CodecConfig::default();
        let mut w = VaWindow::silent(&cfg);
        w.speaker_mut(Speaker::Agent)[..5].fill(true);
        assert_eq!(encode_window(&w, &cfg).unwrap().value(), 0);
        w.speaker_mut(Speaker::Agent)[5] = true;
        assert_eq!(encode_window(&w, &cfg).unwrap().value(), 0b1000_0000);
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_label(255).unwrap().bins, [[true; 4]; 2]);
        assert_eq!(
            decode_label(240).unwrap(),
            BinMatrix::new([true; 4], [false; 4])
        );
        assert_eq!(
            decode_label(60).unwrap(),
            BinMatrix::new([false, false, true, true], [true, true, false, false])
        );
        assert!(matches!(decode_label(256), Err(Error::LabelRange(256))));
        assert!(matches!(decode_label(-1), Err(Error::LabelRange(-1))));
    }

    #[test]
    fn exhaustive_round_trip() {
        for cfg in [CodecConfig::default(), CodecConfig::new(25.0).unwrap()] {
            for label in VapLabel::all() {
                let bins = label.bins();
                assert_eq!(bins.label(), label);
                let window = VaWindow::realizing(&bins, &cfg);
                assert_eq!(encode_window(&window, &cfg).unwrap(), label);
            }
        }
    }

    #[test]
    fn swap_exchanges_nibbles() {
        assert_eq!(VapLabel::from(0xf0).swap_speakers().value(), 0x0f);
        for label in VapLabel::all() {
            let swapped = label.swap_speakers().bins();
            assert_eq!(swapped.bins[0], label.bins().bins[1]);
            assert_eq!(swapped.bins[1], label.bins().bins[0]);
        }
    }

    proptest! {
        #[test]
        fn adding_activity_never_clears_a_bin(
            agent in proptest::collection::vec(any::<bool>(), 100),
            user in proptest::collection::vec(any::<bool>(), 100),
            extra in proptest::collection::vec(0usize..100, 1..30),
        ) {
            let cfg = CodecConfig::default();
            let before = encode_window(&VaWindow::new(agent.clone(), user.clone()), &cfg).unwrap();
            let mut more = agent;
            for k in extra {
                more[k] = true;
            }
            let after = encode_window(&VaWindow::new(more, user), &cfg).unwrap();
            let (b, a) = (before.value() >> 4, after.value() >> 4);
            prop_assert_eq!(b & a, b);
            prop_assert_eq!(before.value() & 0x0f, after.value() & 0x0f);
        }
    }
}
