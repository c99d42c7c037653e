//! From label distributions to next-speaker probabilities.
//!
//! A model emits, per frame, a distribution over the 256 projection labels.
//! Each label contributes its active bins scaled by the label's probability;
//! summing these contributions gives, for every speaker and bin, the
//! probability that the bin is active. The near region (`Now`, bins 0 and 1,
//! 0 to 0.6 s) and the far region (`Fut`, bins 2 and 3, 0.6 to 2 s) are then
//! reduced to one weight per speaker, and the agent's share of the two
//! speakers' weights is the reported probability.
//!
//! Within a region the bins are weighted by their duration by default, which
//! makes the speaker weight the expected fraction of the region's time that
//! speaker is active. [`BinWeighting::Uniform`] gives each bin equal weight.

use serde::{Deserialize, Serialize};

use crate::codec::{CodecConfig, Speaker, VapLabel, NUM_LABELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    /// Allowed deviation of the probability mass from 1.
    pub const SUM_TOLERANCE: f64 = 1e-4;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() != NUM_LABELS {
            return Err(Error::Distribution(format!(
                "expected {NUM_LABELS} probabilities, got {}",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::Distribution(format!("probability of label {i} is {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Distribution(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn one_hot(label: VapLabel) -> Self {
        let mut probs = vec![0.0; NUM_LABELS];
        probs[label.index()] = 1.0;
        Self { probs }
    }

    pub fn uniform() -> Self {
        Self {
            probs: vec![1.0 / NUM_LABELS as f64; NUM_LABELS],
        }
    }

    /// Weighted mixture of distributions; weights are normalized.
    pub fn mixture(parts: &[(f64, &LabelDistribution)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if !(total > 0.0) || parts.iter().any(|(w, _)| *w < 0.0) {
            return Err(Error::Distribution("mixture weights must be non-negative with positive sum".into()));
        }
        let mut probs = vec![0.0; NUM_LABELS];
        for (w, d) in parts {
            for (acc, p) in probs.iter_mut().zip(&d.probs) {
                *acc += w / total * p;
            }
        }
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, label: VapLabel) -> f64 {
        self.probs[label.index()]
    }

    /// Most probable label; the lowest index wins ties.
    pub fn argmax(&self) -> VapLabel {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        VapLabel::from(best as u8)
    }

    /// Relabel every state with the two speakers exchanged.
    pub fn swap_speakers(&self) -> Self {
        let mut probs = vec![0.0; NUM_LABELS];
        for label in VapLabel::all() {
            probs[label.swap_speakers().index()] = self.probs[label.index()];
        }
        Self { probs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Now,
    Fut,
}

impl Region {
    pub fn bins(self) -> std::ops::Range<usize> {
        match self {
            Region::Now => 0..2,
            Region::Fut => 2..4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinWeighting {
    #[default]
    Duration,
    Uniform,
}

/// Agent-probabilities for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbFrame {
    pub p_now: f64,
    pub p_fut: f64,
}

impl ProbFrame {
    pub fn get(&self, region: Region) -> f64 {
        match region {
            Region::Now => self.p_now,
            Region::Fut => self.p_fut,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbTrace {
    frame_rate: f64,
    frames: Vec<ProbFrame>,
}

impl ProbTrace {
    pub fn new(frame_rate: f64, frames: Vec<ProbFrame>) -> Result<Self> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::Distribution(format!("frame rate {frame_rate} is not positive")));
        }
        if frames.is_empty() {
            return Err(Error::Distribution("probability trace is empty".into()));
        }
        for (i, f) in frames.iter().enumerate() {
            for p in [f.p_now, f.p_fut] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Distribution(format!("frame {i}: probability {p} outside [0, 1]")));
                }
            }
        }
        Ok(Self { frame_rate, frames })
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn frames(&self) -> &[ProbFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Values of one region over a frame range.
    pub fn region_values(&self, region: Region, span: std::ops::Range<usize>) -> impl Iterator<Item = f64> + '_ {
        self.frames[span].iter().map(move |f| f.get(region))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregator {
    cfg: CodecConfig,
    weighting: BinWeighting,
}

impl Aggregator {
    pub fn new(cfg: CodecConfig, weighting: BinWeighting) -> Self {
        Self { cfg, weighting }
    }

    pub fn config(&self) -> &CodecConfig {
        &self.cfg
    }

    pub fn weighting(&self) -> BinWeighting {
        self.weighting
    }

    /// Per-bin weights for `region`, summing to one; zero outside the region.
    pub fn bin_weights(&self, region: Region) -> [f64; 4] {
        let durations = self.cfg.bin_durations();
        let mut weights = [0.0; 4];
        for i in region.bins() {
            weights[i] = match self.weighting {
                BinWeighting::Duration => durations[i],
                BinWeighting::Uniform => 1.0,
            };
        }
        let total: f64 = weights.iter().sum();
        weights.map(|w| w / total)
    }

    /// Direct evaluation: every label's active bins in the region, scaled by
    /// the label probability.
    pub fn speaker_region_weight(&self, d: &LabelDistribution, speaker: Speaker, region: Region) -> f64 {
        let weights = self.bin_weights(region);
        VapLabel::all()
            .map(|label| {
                let bins = label.bins().speaker(speaker);
                let covered: f64 = region
                    .bins()
                    .filter(|&i| bins[i])
                    .map(|i| weights[i])
                    .sum();
                d.prob(label) * covered
            })
            .sum()
    }

    /// Probability that each bin is active, indexed `[speaker][bin]`.
    pub fn bin_marginals(&self, d: &LabelDistribution) -> [[f64; 4]; 2] {
        let mut marginals = [[0.0; 4]; 2];
        for (y, &p) in d.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (s, row) in marginals.iter_mut().enumerate() {
                for (i, m) in row.iter_mut().enumerate() {
                    if y >> (7 - (4 * s + i)) & 1 == 1 {
                        *m += p;
                    }
                }
            }
        }
        marginals
    }

    fn region_weights(&self, marginals: &[[f64; 4]; 2], region: Region) -> [f64; 2] {
        let weights = self.bin_weights(region);
        marginals.map(|row| region.bins().map(|i| row[i] * weights[i]).sum())
    }

    /// Agent share of the region's activity; 0.5 when neither speaker has any.
    pub fn agent_probability(&self, d: &LabelDistribution, region: Region) -> f64 {
        let [agent, user] = self.region_weights(&self.bin_marginals(d), region);
        normalize(agent, user)
    }

    pub fn p_now(&self, d: &LabelDistribution) -> f64 {
        self.agent_probability(d, Region::Now)
    }

    pub fn p_fut(&self, d: &LabelDistribution) -> f64 {
        self.agent_probability(d, Region::Fut)
    }

    pub fn frame(&self, d: &LabelDistribution) -> ProbFrame {
        let marginals = self.bin_marginals(d);
        let [a_now, u_now] = self.region_weights(&marginals, Region::Now);
        let [a_fut, u_fut] = self.region_weights(&marginals, Region::Fut);
        ProbFrame {
            p_now: normalize(a_now, u_now),
            p_fut: normalize(a_fut, u_fut),
        }
    }
}

fn normalize(agent: f64, user: f64) -> f64 {
    let total = agent + user;
    if total > 0.0 {
        (agent / total).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

/// Per-frame probabilities for a sequence of distributions.
pub fn trace_from_distributions(
    dists: &[LabelDistribution],
    frame_rate: f64,
    aggregator: &Aggregator,
) -> Result<ProbTrace> {
    if dists.is_empty() {
        return Err(Error::Distribution("no frames to aggregate".into()));
    }
    let expected = aggregator.config().frame_rate();
    if (frame_rate - expected).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "trace frame rate {frame_rate} Hz does not match configured {expected} Hz"
        )));
    }
    ProbTrace::new(frame_rate, dists.iter().map(|d| aggregator.frame(d)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn agg() -> Aggregator {
        Aggregator::new(CodecConfig::default(), BinWeighting::Duration)
    }

    fn hot(y: u8) -> LabelDistribution {
        LabelDistribution::one_hot(VapLabel::from(y))
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(LabelDistribution::new(vec![1.0 / 255.0; 255]).is_err());
        assert!(LabelDistribution::new(vec![0.9 / 256.0; 256]).is_err());
        let mut probs = vec![0.0; 256];
        probs[0] = 1.5;
        probs[1] = -0.5;
        assert!(LabelDistribution::new(probs).is_err());
        let mut probs = vec![0.0; 256];
        probs[3] = 1.0 + 5e-5;
        assert!(LabelDistribution::new(probs).is_ok());
    }

    #[test]
    fn region_weight_examples() {
        let a = agg();
        assert_eq!(a.speaker_region_weight(&hot(240), Speaker::Agent, Region::Now), 1.0);
        for s in Speaker::BOTH {
            for r in [Region::Now, Region::Fut] {
                let w = a.speaker_region_weight(&LabelDistribution::uniform(), s, r);
                assert!((w - 0.5).abs() < 1e-12);
            }
        }
        assert_eq!(a.speaker_region_weight(&hot(60), Speaker::Agent, Region::Fut), 1.0);
        assert_eq!(a.speaker_region_weight(&hot(60), Speaker::Agent, Region::Now), 0.0);
    }

    #[test]
    fn duration_weighting_within_region() {
        // agent bin 0 only (label 0b1000_0000): 0.2 of the 0.6 s near region
        let a = agg();
        let w = a.speaker_region_weight(&hot(0x80), Speaker::Agent, Region::Now);
        assert!((w - 1.0 / 3.0).abs() < 1e-12);
        let u = Aggregator::new(CodecConfig::default(), BinWeighting::Uniform);
        let w = u.speaker_region_weight(&hot(0x80), Speaker::Agent, Region::Now);
        assert!((w - 0.5).abs() < 1e-12);
    }

    #[test]
    fn p_examples() {
        let a = agg();
        assert_eq!(a.frame(&hot(240)), ProbFrame { p_now: 1.0, p_fut: 1.0 });
        assert_eq!(a.frame(&hot(60)), ProbFrame { p_now: 0.0, p_fut: 1.0 });
        let mix = LabelDistribution::mixture(&[(0.5, &hot(240)), (0.5, &hot(15))]).unwrap();
        assert!((a.p_now(&mix) - 0.5).abs() < 1e-12);
        assert!((a.p_fut(&mix) - 0.5).abs() < 1e-12);
        assert_eq!(a.frame(&hot(0)), ProbFrame { p_now: 0.5, p_fut: 0.5 });
    }

    #[test]
    fn traces() {
        let a = agg();
        let t = trace_from_distributions(&[hot(240), hot(240), hot(240)], 50.0, &a).unwrap();
        assert!(t.frames().iter().all(|f| *f == ProbFrame { p_now: 1.0, p_fut: 1.0 }));
        let t = trace_from_distributions(&[hot(240), hot(15)], 50.0, &a).unwrap();
        assert_eq!(t.frames()[1], ProbFrame { p_now: 0.0, p_fut: 0.0 });
        let u = LabelDistribution::uniform();
        let t = trace_from_distributions(&[u.clone(), u], 50.0, &a).unwrap();
        assert!(t.frames().iter().all(|f| (f.p_now - 0.5).abs() < 1e-12 && (f.p_fut - 0.5).abs() < 1e-12));
        assert!(trace_from_distributions(&[], 50.0, &a).is_err());
        assert!(trace_from_distributions(&[hot(1)], 25.0, &a).is_err());
    }

    fn arb_dist() -> impl Strategy<Value = LabelDistribution> {
        proptest::collection::vec(0.0f64..1.0, 256).prop_map(|raw| {
            let total: f64 = raw.iter().sum::<f64>().max(1e-12);
            LabelDistribution::new(raw.iter().map(|p| p / total).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn output_is_a_probability(d in arb_dist()) {
            for w in [BinWeighting::Duration, BinWeighting::Uniform] {
                let f = Aggregator::new(CodecConfig::default(), w).frame(&d);
                prop_assert!((0.0..=1.0).contains(&f.p_now));
                prop_assert!((0.0..=1.0).contains(&f.p_fut));
            }
        }

        #[test]
        fn swapping_speakers_complements(d in arb_dist()) {
            let a = agg();
            let f = a.frame(&d);
            let g = a.frame(&d.swap_speakers());
            prop_assert!((g.p_now - (1.0 - f.p_now)).abs() <= 1e-12);
            prop_assert!((g.p_fut - (1.0 - f.p_fut)).abs() <= 1e-12);
        }
    }
}
