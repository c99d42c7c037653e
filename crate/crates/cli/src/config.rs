//! Run configuration: a TOML file of sections, overridable key by key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vapcue::aggregation::{Aggregator, BinWeighting};
use vapcue::audio::SilenceConfig;
use vapcue::codec::{CodecConfig, DEFAULT_FRAME_RATE};
use vapcue::corpus::{Condition, FilterConfig};
use vapcue::metrics::{DecisionRule, RegionConfig, DEFAULT_TAIL, DEFAULT_THRESHOLD, EARLY_YIELD_WINDOW};
use vapcue::prosody::ManipulationParams;
use vapcue::Error;

use crate::InputError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub audio_dir: Option<PathBuf>,
    pub alignment_dir: Option<PathBuf>,
    pub trace_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecSection {
    pub frame_rate: f64,
}

impl Default for CodecSection {
    fn default() -> Self {
        Self { frame_rate: DEFAULT_FRAME_RATE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationSection {
    pub weighting: BinWeighting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub rule: DecisionRule,
    pub threshold: f64,
    pub early_window: f64,
    pub tail: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            rule: DecisionRule::Mean,
            threshold: DEFAULT_THRESHOLD,
            early_window: EARLY_YIELD_WINDOW,
            tail: DEFAULT_TAIL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Prompt variants to produce and evaluate.
    pub conditions: Vec<Condition>,
    /// Sample rate audio is converted to on read.
    pub sample_rate: u32,
    /// Worker threads for per-sample work; 0 uses one per core.
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            conditions: Condition::ALL.to_vec(),
            sample_rate: vapcue::audio::DEFAULT_SAMPLE_RATE,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub codec: CodecSection,
    pub aggregation: AggregationSection,
    pub metrics: MetricsSection,
    pub filter: FilterConfig,
    pub silence: SilenceConfig,
    pub prosody: ManipulationParams,
    pub run: RunSection,
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl RunConfig {
    /// Defaults, then the file, then `section.key=value` overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> anyhow::Result<Self> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| InputError(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{item}' is not key=value")))?;
            let parts: Vec<&str> = key.trim().split('.').collect();
            let (last, sections) = parts.split_last().expect("split yields one part");
            let mut node = &mut table;
            for section in sections {
                node = node
                    .entry(section.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("'{section}' in '{key}' is not a section")))?;
            }
            node.insert(last.to_string(), parse_value(raw.trim()));
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> vapcue::Result<()> {
        self.codec_config()?;
        self.filter.validate()?;
        let m = &self.metrics;
        if !(m.threshold > 0.0 && m.threshold < 1.0) {
            return Err(Error::Config(format!("metrics.threshold must lie in (0, 1), got {}", m.threshold)));
        }
        if !(m.early_window > 0.0 && m.tail > 0.0) {
            return Err(Error::Config("metrics.early_window and metrics.tail must be positive".into()));
        }
        let p = &self.prosody;
        if !(p.stretch_factor.is_finite() && p.stretch_factor >= 1.0) {
            return Err(Error::Config(format!("prosody.stretch_factor must be at least 1, got {}", p.stretch_factor)));
        }
        if !p.gain_db.is_finite() {
            return Err(Error::Config("prosody.gain_db must be finite".into()));
        }
        if !(self.silence.pause > 0.0 && self.silence.tail >= 0.0) {
            return Err(Error::Config("silence.pause must be positive and silence.tail non-negative".into()));
        }
        if self.run.conditions.is_empty() {
            return Err(Error::Config("run.conditions is empty".into()));
        }
        if self.run.sample_rate == 0 {
            return Err(Error::Config("run.sample_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn codec_config(&self) -> vapcue::Result<CodecConfig> {
        CodecConfig::new(self.codec.frame_rate)
    }

    pub fn aggregator(&self) -> vapcue::Result<Aggregator> {
        Ok(Aggregator::new(self.codec_config()?, self.aggregation.weighting))
    }

    pub fn region_config(&self) -> RegionConfig {
        RegionConfig {
            early_window: self.metrics.early_window,
            tail: self.metrics.tail,
        }
    }

    /// The configured path for `key`, which must be set and exist.
    pub fn require_path(&self, key: &str, value: &Option<PathBuf>) -> anyhow::Result<PathBuf> {
        let path = value
            .clone()
            .ok_or_else(|| InputError(format!("paths.{key} is not set")))?;
        if !path.exists() {
            return Err(InputError(format!("paths.{key} {} does not exist", path.display())).into());
        }
        Ok(path)
    }

    pub fn output_dir(&self) -> anyhow::Result<PathBuf> {
        let dir = self
            .paths
            .output_dir
            .clone()
            .ok_or_else(|| InputError("paths.output_dir is not set".into()))?;
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Every setting as `section.key` → value, plus the digest.
    pub fn flat(&self) -> BTreeMap<String, String> {
        fn walk(prefix: &str, value: &toml::Value, out: &mut BTreeMap<String, String>) {
            match value {
                toml::Value::Table(t) => {
                    for (k, v) in t {
                        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                        walk(&key, v, out);
                    }
                }
                toml::Value::String(s) => {
                    out.insert(prefix.to_string(), s.clone());
                }
                other => {
                    out.insert(prefix.to_string(), other.to_string());
                }
            }
        }
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = BTreeMap::new();
        walk("", &value, &mut out);
        out.insert("config_sha256".into(), self.digest());
        out
    }

    /// Serializable header for JSON artifacts.
    pub fn stamp(&self) -> ConfigStamp {
        ConfigStamp {
            config_sha256: self.digest(),
            config: self.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigStamp {
    pub config_sha256: String,
    pub config: RunConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.digest().len(), 64);
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::load(
            None,
            &[
                "codec.frame_rate=25".into(),
                "metrics.rule=all-frames".into(),
                "aggregation.weighting=uniform".into(),
                "prosody.pitch_target={fixed-hz = 180.0}".into(),
                "run.conditions=[\"original\"]".into(),
                "paths.output_dir=out/x".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.codec.frame_rate, 25.0);
        assert_eq!(cfg.metrics.rule, DecisionRule::AllFrames);
        assert_eq!(cfg.aggregation.weighting, BinWeighting::Uniform);
        assert_eq!(cfg.prosody.pitch_target, vapcue::prosody::PitchTarget::FixedHz(180.0));
        assert_eq!(cfg.run.conditions, vec![Condition::Original]);
        assert_eq!(cfg.paths.output_dir, Some(PathBuf::from("out/x")));
        assert_ne!(cfg.digest(), RunConfig::default().digest());
    }

    #[test]
    fn bad_settings_are_validation_errors() {
        for bad in ["codec.frame_rate=12", "metrics.threshold=1.5", "metrics.nope=1", "prosody.stretch_factor=0.5"] {
            let err = RunConfig::load(None, &[bad.into()]).unwrap_err();
            let core = err.downcast_ref::<Error>().unwrap_or_else(|| panic!("{bad}: {err}"));
            assert!(core.is_validation(), "{bad}");
        }
    }

    #[test]
    fn flat_lists_every_key() {
        let flat = RunConfig::default().flat();
        assert_eq!(flat["codec.frame_rate"], "50.0");
        assert_eq!(flat["metrics.rule"], "mean");
        assert!(flat.contains_key("prosody.gain_db"));
        assert!(flat.contains_key("config_sha256"));
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = RunConfig::load(
            None,
            &["silence.fill=\"preserve-edges\"".into(), "prosody.f0.max_hz=300".into(), "filter.min_chars=40".into()],
        )
        .unwrap();
        assert_eq!(cfg.silence.pause, 0.4);
        assert_eq!(cfg.prosody.f0.max_hz, 300.0);
        assert_eq!(cfg.prosody.f0.min_hz, 60.0);
        assert_eq!(cfg.filter.min_chars, 40);
        assert_eq!(cfg.filter.max_chars, 250);
    }
}
