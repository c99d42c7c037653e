//! Automatic evaluation of turn-taking cues in synthesized speech.
//!
//! A voice activity projection model predicts, frame by frame, how the next
//! two seconds of a two-party conversation will unfold. Feeding it the speech
//! of a dialog system (with a silent partner channel) and reading its
//! predictions at the right moments tells us whether the voice signals that
//! it wants to keep the turn during a mid-turn pause, and whether it signals
//! the end of its turn at the end.
//!
//! The crate is organized along that chain:
//!
//! * [`codec`]: the 256-state discrete projection space;
//! * [`aggregation`]: label distributions to next-speaker probabilities;
//! * [`metrics`]: hold and yield classification and corpus rates;
//! * [`predictor`]: trace files and the future-leak oracle;
//! * [`corpus`]: statement–question pair extraction and prompt variants;
//! * [`audio`]: WAV I/O, alignments and silence normalization;
//! * [`prosody`]: F0 estimation and final-syllable prosody edits;
//! * [`report`]: corpus tables in CSV, JSON and text.
//!
//! ```
//! use vapcue::aggregation::{Aggregator, BinWeighting, LabelDistribution};
//! use vapcue::codec::{CodecConfig, VapLabel};
//!
//! let agg = Aggregator::new(CodecConfig::default(), BinWeighting::Duration);
//! // agent silent for 0.6 s, then speaking; user speaking first
//! let frame = agg.frame(&LabelDistribution::one_hot(VapLabel::from(60)));
//! assert_eq!((frame.p_now, frame.p_fut), (0.0, 1.0));
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod audio;
pub mod codec;
pub mod corpus;
mod error;
pub mod metrics;
pub mod predictor;
pub mod prosody;
pub mod report;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/aggregation.md")]
    mod aggregation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/audio.md")]
    mod audio {}
    #[doc = include_str!("../../../book/src/prosody.md")]
    mod prosody {}
}
