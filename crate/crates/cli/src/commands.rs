//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vapcue::audio::{
    assemble_stereo, normalize_silences, read_wav, textgrid_to_alignment, write_wav, AlignedWord, Alignment,
    AudioBuffer,
};
use vapcue::corpus::{extract_pairs, load_dialogs, load_manifest, manifest_csv, Lexicon, ManifestRow, RejectReason};
use vapcue::metrics::{classify, derive_regions, TurnMarkers, TurnMetrics};
use vapcue::predictor::{load_any, oracle_distributions, write_prob_trace, write_trace, VaScenario};
use vapcue::prosody::{manipulate_final_syllable, ManipulationParams, ManipulationReport};
use vapcue::report::{load_samples, load_scores, samples_csv, CorpusReport, SampleResult, ScoreTable};
use vapcue::Error;

use crate::config::{ConfigStamp, RunConfig};
use crate::tree::{files_with_ext, sample_key, write, write_json};
use crate::InputError;

/// Trace file extensions, in lookup order.
pub const TRACE_EXTENSIONS: [&str; 3] = ["vapt", "ptrace", "txt"];

fn pool(cfg: &RunConfig) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(cfg.run.workers).build()?)
}

fn digest_line(cfg: &RunConfig) -> String {
    format!("# config_sha256={}\n", cfg.digest())
}

/// Alignment JSON carrying the config digest.
fn stamped_alignment(al: &Alignment, cfg: &RunConfig) -> String {
    let mut value: serde_json::Value = serde_json::from_str(&al.to_json()).expect("alignment JSON parses");
    value["config_sha256"] = cfg.digest().into();
    serde_json::to_string_pretty(&value).expect("alignment serializes") + "\n"
}

/// Alignment JSON or, failing that, a TextGrid with a `words` tier.
fn load_alignment(base: &Path) -> anyhow::Result<Alignment> {
    let json = base.with_extension("json");
    if json.exists() {
        return Alignment::load(&json).with_context(|| format!("alignment {}", json.display()));
    }
    let grid = base.with_extension("TextGrid");
    if grid.exists() {
        let text = std::fs::read_to_string(&grid).with_context(|| format!("reading {}", grid.display()))?;
        return textgrid_to_alignment(&text, "words", None).with_context(|| format!("alignment {}", grid.display()));
    }
    Err(InputError(format!("no alignment {} (.json or .TextGrid)", base.display())).into())
}

fn read_mono(path: &Path, cfg: &RunConfig) -> anyhow::Result<AudioBuffer> {
    let audio = read_wav(path, Some(cfg.run.sample_rate)).with_context(|| format!("audio {}", path.display()))?;
    if audio.is_mono() {
        Ok(audio)
    } else {
        Ok(AudioBuffer::mono(audio.channel(0), audio.sample_rate())?)
    }
}

#[derive(Serialize)]
struct ExtractSummary {
    #[serde(flatten)]
    stamp: ConfigStamp,
    dialogs: usize,
    candidates: usize,
    accepted: usize,
    rejected: BTreeMap<String, usize>,
}

pub fn extract(cfg: &RunConfig) -> anyhow::Result<()> {
    let corpus = cfg.require_path("corpus", &cfg.paths.corpus)?;
    let out = cfg.output_dir()?;
    let dialogs = load_dialogs(&corpus)?;
    let loaded;
    let lexicon = match &cfg.paths.lexicon {
        Some(path) => {
            loaded = Lexicon::load(path)?;
            &loaded
        }
        None => Lexicon::bundled(),
    };
    let extraction = extract_pairs(&dialogs, &cfg.filter, lexicon)?;
    if extraction.pairs.is_empty() {
        return Err(InputError(format!("no qualifying pairs in {}", corpus.display())).into());
    }
    let rows: Vec<ManifestRow> = extraction.pairs.iter().map(ManifestRow::from).collect();
    write(&out.join("manifest.csv"), digest_line(cfg) + &manifest_csv(&rows)?)?;
    write_json(
        &out.join("manifest.json"),
        &serde_json::json!({ "config_sha256": cfg.digest(), "pairs": rows }),
    )?;

    let mut rejected: BTreeMap<String, usize> = RejectReason::ALL.iter().map(|r| (r.to_string(), 0)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dialog_id", "turn_index", "sentence_index", "statement", "question", "reasons"])?;
    for r in &extraction.rejections {
        for reason in &r.reasons {
            *rejected.entry(reason.to_string()).or_default() += 1;
        }
        let reasons: Vec<String> = r.reasons.iter().map(ToString::to_string).collect();
        w.write_record([
            r.pair.dialog_id.clone(),
            r.pair.turn_index.to_string(),
            r.pair.sentence_index.to_string(),
            r.pair.statement.clone(),
            r.pair.question.clone(),
            reasons.join(";"),
        ])?;
    }
    write(&out.join("rejections.csv"), digest_line(cfg).into_bytes().into_iter().chain(w.into_inner()?).collect::<Vec<u8>>())?;
    let summary = ExtractSummary {
        stamp: cfg.stamp(),
        dialogs: dialogs.len(),
        candidates: extraction.pairs.len() + extraction.rejections.len(),
        accepted: extraction.pairs.len(),
        rejected,
    };
    write_json(&out.join("extract.json"), &summary)?;
    println!(
        "{} dialogs, {} candidate pairs, {} accepted -> {}",
        summary.dialogs,
        summary.candidates,
        summary.accepted,
        out.join("manifest.csv").display()
    );
    Ok(())
}

pub fn permute(cfg: &RunConfig) -> anyhow::Result<()> {
    let manifest = cfg.require_path("manifest", &cfg.paths.manifest)?;
    let out = cfg.output_dir()?;
    let rows = load_manifest(&manifest)?;
    if rows.is_empty() {
        return Err(InputError(format!("manifest {} has no pairs", manifest.display())).into());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "condition", "text"])?;
    for row in &rows {
        for &cond in &cfg.run.conditions {
            let text = row.prompt(cond);
            w.write_record([row.sample_id(), cond.to_string(), text.to_string()])?;
            write(&out.join("prompts").join(cond.to_string()).join(format!("{}.txt", row.sample_id())), format!("{text}\n"))?;
        }
    }
    write(&out.join("prompts.csv"), digest_line(cfg).into_bytes().into_iter().chain(w.into_inner()?).collect::<Vec<u8>>())?;
    println!("{} pairs x {} conditions -> {}", rows.len(), cfg.run.conditions.len(), out.join("prompts").display());
    Ok(())
}

#[derive(Serialize)]
struct NormalizedFile {
    file: String,
    input_duration: f64,
    output_duration: f64,
    question_shift: f64,
}

pub fn normalize(cfg: &RunConfig, stereo: bool) -> anyhow::Result<()> {
    let audio_dir = cfg.require_path("audio_dir", &cfg.paths.audio_dir)?;
    let alignment_dir = cfg.require_path("alignment_dir", &cfg.paths.alignment_dir)?;
    let out = cfg.output_dir()?;
    let files = files_with_ext(&audio_dir, "wav")?;
    if files.is_empty() {
        return Err(InputError(format!("no .wav files under {}", audio_dir.display())).into());
    }
    let results = pool(cfg)?.install(|| {
        files
            .par_iter()
            .map(|rel| -> anyhow::Result<NormalizedFile> {
                let audio = read_mono(&audio_dir.join(rel), cfg)?;
                let al = load_alignment(&alignment_dir.join(rel))?;
                let (normalized, shifted) = normalize_silences(&audio, &al, &cfg.silence)
                    .with_context(|| format!("normalizing {}", rel.display()))?;
                let wav = out.join("audio").join(rel);
                crate::tree::ensure_parent(&wav)?;
                write_wav(&wav, &normalized)?;
                if stereo {
                    let path = out.join("stereo").join(rel);
                    crate::tree::ensure_parent(&path)?;
                    write_wav(&path, &assemble_stereo(&normalized)?)?;
                }
                write(&out.join("alignments").join(rel).with_extension("json"), stamped_alignment(&shifted, cfg))?;
                Ok(NormalizedFile {
                    file: rel.display().to_string(),
                    input_duration: audio.duration(),
                    output_duration: normalized.duration(),
                    question_shift: shifted.markers().question_start - al.markers().question_start,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;
    write_json(
        &out.join("normalize.json"),
        &serde_json::json!({ "config_sha256": cfg.digest(), "config": cfg, "files": results }),
    )?;
    println!("normalized {} files -> {}", results.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct ManipulatedFile {
    file: String,
    #[serde(flatten)]
    report: ManipulationReport,
}

pub fn manipulate(cfg: &RunConfig) -> anyhow::Result<()> {
    let audio_dir = cfg.require_path("audio_dir", &cfg.paths.audio_dir)?;
    let alignment_dir = cfg.require_path("alignment_dir", &cfg.paths.alignment_dir)?;
    let out = cfg.output_dir()?;
    let files = files_with_ext(&audio_dir, "wav")?;
    if files.is_empty() {
        return Err(InputError(format!("no .wav files under {}", audio_dir.display())).into());
    }
    let results = pool(cfg)?.install(|| {
        files
            .par_iter()
            .map(|rel| -> anyhow::Result<ManipulatedFile> {
                let audio = read_mono(&audio_dir.join(rel), cfg)?;
                let al = load_alignment(&alignment_dir.join(rel))?;
                let (edited, shifted, report) = manipulate_final_syllable(&audio, &al, &cfg.prosody)
                    .with_context(|| format!("manipulating {}", rel.display()))?;
                let wav = out.join("audio").join(rel);
                crate::tree::ensure_parent(&wav)?;
                write_wav(&wav, &edited)?;
                write(&out.join("alignments").join(rel).with_extension("json"), stamped_alignment(&shifted, cfg))?;
                Ok(ManipulatedFile { file: rel.display().to_string(), report })
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;
    for r in &results {
        for w in &r.report.warnings {
            eprintln!("warning: {}: {w}", r.file);
        }
    }
    write_json(
        &out.join("manipulate.json"),
        &serde_json::json!({
            "config_sha256": cfg.digest(),
            "config": cfg,
            "stand_in_defaults": cfg.prosody == ManipulationParams::default(),
            "files": results,
        }),
    )?;
    println!("manipulated {} files -> {}", results.len(), out.display());
    Ok(())
}

/// A sample that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exception {
    pub system: String,
    pub condition: String,
    pub sample_id: String,
    pub reason: String,
}

pub struct Evaluation {
    pub samples: Vec<SampleResult>,
    pub exceptions: Vec<Exception>,
    pub report: CorpusReport,
}

fn find_trace(trace_dir: &Path, rel: &Path) -> Option<PathBuf> {
    TRACE_EXTENSIONS
        .iter()
        .map(|ext| trace_dir.join(rel).with_extension(ext))
        .find(|p| p.is_file())
}

fn evaluate_sample(cfg: &RunConfig, alignment: &Path, trace: &Path) -> anyhow::Result<TurnMetrics> {
    let al = Alignment::load(alignment).with_context(|| format!("alignment {}", alignment.display()))?;
    let data = load_any(trace).with_context(|| format!("trace {}", trace.display()))?;
    let rate = cfg.codec.frame_rate;
    if (data.frame_rate() - rate).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "trace {} has frame rate {} Hz but the run is configured for {rate} Hz",
            trace.display(),
            data.frame_rate()
        ))
        .into());
    }
    let probs = data.into_prob_trace(&cfg.aggregator()?)?;
    let regions = derive_regions(&al.markers(), &cfg.region_config(), rate)
        .with_context(|| format!("regions of {}", alignment.display()))?;
    classify(&probs, &regions, cfg.metrics.rule, cfg.metrics.threshold)
        .with_context(|| format!("classifying {}", trace.display()))
}

fn scores(cfg: &RunConfig) -> anyhow::Result<ScoreTable> {
    match &cfg.paths.scores {
        Some(p) => Ok(load_scores(p)?),
        None => Ok(ScoreTable::new()),
    }
}

fn write_report(cfg: &RunConfig, out: &Path, samples: &[SampleResult]) -> anyhow::Result<CorpusReport> {
    let mut report = CorpusReport::from_samples(samples, cfg.metrics.rule, cfg.metrics.threshold, &scores(cfg)?)?;
    report.metadata = cfg.flat();
    write(&out.join("report.csv"), report.to_csv())?;
    write(&out.join("report.json"), report.to_json())?;
    write(&out.join("report.txt"), format!("config_sha256: {}\n\n{}", cfg.digest(), report.to_table()))?;
    Ok(report)
}

pub fn evaluate(cfg: &RunConfig) -> anyhow::Result<Evaluation> {
    let alignment_dir = cfg.require_path("alignment_dir", &cfg.paths.alignment_dir)?;
    let trace_dir = cfg.require_path("trace_dir", &cfg.paths.trace_dir)?;
    let out = cfg.output_dir()?;
    let files = files_with_ext(&alignment_dir, "json")?;
    if files.is_empty() {
        return Err(InputError(format!("no alignment files under {}", alignment_dir.display())).into());
    }
    let outcomes = pool(cfg)?.install(|| {
        files
            .par_iter()
            .map(|rel| -> anyhow::Result<Result<SampleResult, Exception>> {
                let (system, condition, id) = sample_key(rel)?;
                match find_trace(&trace_dir, rel) {
                    None => Ok(Err(Exception {
                        system,
                        condition,
                        sample_id: id,
                        reason: "missing trace".into(),
                    })),
                    Some(trace) => {
                        let m = evaluate_sample(cfg, &alignment_dir.join(rel), &trace)?;
                        Ok(Ok(SampleResult::new(&system, &condition, &id, m)))
                    }
                }
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;
    let (samples, exceptions): (Vec<_>, Vec<_>) = outcomes.into_iter().partition(|o| o.is_ok());
    let mut samples: Vec<SampleResult> = samples.into_iter().flatten().collect();
    let exceptions: Vec<Exception> = exceptions.into_iter().filter_map(|e| e.err()).collect();
    samples.sort_by(|a, b| (&a.system, &a.condition, &a.sample_id).cmp(&(&b.system, &b.condition, &b.sample_id)));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["system", "condition", "sample_id", "reason"])?;
    for e in &exceptions {
        w.write_record([&e.system, &e.condition, &e.sample_id, &e.reason])?;
        eprintln!("warning: skipped {}/{}/{}: {}", e.system, e.condition, e.sample_id, e.reason);
    }
    write(&out.join("exceptions.csv"), digest_line(cfg).into_bytes().into_iter().chain(w.into_inner()?).collect::<Vec<u8>>())?;
    if samples.is_empty() {
        return Err(InputError(format!(
            "none of the {} samples has a trace under {}; see {}",
            exceptions.len(),
            trace_dir.display(),
            out.join("exceptions.csv").display()
        ))
        .into());
    }
    write(&out.join("samples.csv"), digest_line(cfg) + &samples_csv(&samples))?;
    let report = write_report(cfg, &out, &samples)?;
    print!("{}", report.to_table());
    println!("{} samples evaluated, {} skipped -> {}", samples.len(), exceptions.len(), out.display());
    Ok(Evaluation { samples, exceptions, report })
}

pub fn report(cfg: &RunConfig, files: &[PathBuf]) -> anyhow::Result<()> {
    let out = cfg.output_dir()?;
    let mut samples = Vec::new();
    for f in files {
        samples.extend(load_samples(f)?);
    }
    samples.sort_by(|a, b| (&a.system, &a.condition, &a.sample_id).cmp(&(&b.system, &b.condition, &b.sample_id)));
    let report = write_report(cfg, &out, &samples)?;
    print!("{}", report.to_table());
    Ok(())
}

/// One oracle scenario, optionally with the turn markers to evaluate it at.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub id: Option<String>,
    pub system: Option<String>,
    pub condition: Option<String>,
    pub duration: f64,
    #[serde(default)]
    pub agent: Vec<(f64, f64)>,
    #[serde(default)]
    pub user: Vec<(f64, f64)>,
    pub markers: Option<TurnMarkers>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    Many(Vec<ScenarioEntry>),
    One(ScenarioEntry),
}

/// Two placeholder words spanning the statement and the question.
fn marker_alignment(m: &TurnMarkers, agent: &[(f64, f64)]) -> vapcue::Result<Alignment> {
    let onset = agent
        .iter()
        .map(|&(a, _)| a)
        .find(|&a| a < m.statement_end)
        .unwrap_or(0.0);
    Alignment::new(
        vec![
            AlignedWord { w: "statement.".into(), on: onset, off: m.statement_end },
            AlignedWord { w: "question?".into(), on: m.question_start, off: m.question_end },
        ],
        1,
    )
}

/// Traces go to `traces/<system>/<condition>/<id>.vapt` (or `.ptrace`),
/// alignments for scenarios with markers to the same path under
/// `alignments/`.
pub fn oracle_sim(cfg: &RunConfig, scenario: &Path, ptrace: bool) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(scenario)
        .map_err(|e| InputError(format!("cannot read {}: {e}", scenario.display())))?;
    let parsed: ScenarioFile = serde_json::from_str(&text).map_err(Error::from)?;
    let stem = scenario.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
    let entries = match parsed {
        ScenarioFile::Many(v) => v,
        ScenarioFile::One(mut e) => {
            e.id.get_or_insert(stem);
            vec![e]
        }
    };
    let out = cfg.output_dir()?;
    let codec = cfg.codec_config()?;
    let mut written = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let id = e.id.clone().unwrap_or_else(|| format!("scenario_{i:03}"));
        let rel = PathBuf::from(e.system.as_deref().unwrap_or("oracle"))
            .join(e.condition.as_deref().unwrap_or("original"))
            .join(&id);
        let va = VaScenario::new(e.duration, e.agent.clone(), e.user.clone()).with_context(|| format!("scenario {id}"))?;
        let trace = oracle_distributions(&va, &codec).with_context(|| format!("scenario {id}"))?;
        let path = out.join("traces").join(&rel).with_extension(if ptrace { "ptrace" } else { "vapt" });
        crate::tree::ensure_parent(&path)?;
        if ptrace {
            write_prob_trace(&path, &trace.to_prob_trace(&cfg.aggregator()?)?)?;
        } else {
            write_trace(&path, &trace)?;
        }
        if let Some(m) = &e.markers {
            let al = marker_alignment(m, &e.agent).with_context(|| format!("markers of scenario {id}"))?;
            write(&out.join("alignments").join(&rel).with_extension("json"), stamped_alignment(&al, cfg))?;
        }
        written.push(serde_json::json!({ "id": id, "trace": path.strip_prefix(&out).unwrap_or(&path), "frames": trace.len() }));
    }
    write_json(
        &out.join("oracle.json"),
        &serde_json::json!({ "config_sha256": cfg.digest(), "config": cfg, "traces": written }),
    )?;
    println!("wrote {} oracle traces -> {}", entries.len(), out.join("traces").display());
    Ok(())
}

pub fn plot(
    cfg: &RunConfig,
    audio: &Path,
    trace: &Path,
    alignment: Option<&Path>,
    name: Option<&str>,
) -> anyhow::Result<()> {
    let out = cfg.output_dir()?;
    let sound = read_mono(audio, cfg)?;
    let data = load_any(trace).with_context(|| format!("trace {}", trace.display()))?;
    if (data.frame_rate() - cfg.codec.frame_rate).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "trace {} has frame rate {} Hz but the run is configured for {} Hz",
            trace.display(),
            data.frame_rate(),
            cfg.codec.frame_rate
        ))
        .into());
    }
    let probs = data.into_prob_trace(&cfg.aggregator()?)?;
    let markers = match alignment {
        Some(p) => Some(Alignment::load(p).with_context(|| format!("alignment {}", p.display()))?.markers()),
        None => None,
    };
    let regions = match &markers {
        Some(m) => Some(derive_regions(m, &cfg.region_config(), probs.frame_rate())?),
        None => None,
    };
    let name = name
        .map(str::to_string)
        .or_else(|| audio.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "plot".into());
    let rendered = crate::plot::render(&sound, &probs, markers.as_ref(), regions.as_ref(), &out.join(format!("{name}.png")))?;
    if let Some(w) = &rendered.warning {
        eprintln!("warning: {w}");
    }
    let mut csv = digest_line(cfg);
    csv.push_str("time,p_now,p_fut\n");
    for (i, f) in probs.frames().iter().enumerate() {
        csv.push_str(&format!("{},{},{}\n", i as f64 / probs.frame_rate(), f.p_now, f.p_fut));
    }
    write(&out.join(format!("{name}.csv")), csv)?;
    let sidecar = serde_json::json!({
        "config_sha256": cfg.digest(),
        "audio": audio,
        "trace": trace,
        "image": format!("{name}.png"),
        "frame_rate": probs.frame_rate(),
        "frames": probs.len(),
        "audio_duration": sound.duration(),
        "plot": rendered.layout,
        "truncated": rendered.warning.is_some(),
        "markers": markers,
    });
    write_json(&out.join(format!("{name}.json")), &sidecar)?;
    println!("plot -> {}", out.join(format!("{name}.png")).display());
    Ok(())
}

pub fn textgrid(input: &Path, tier: &str, statement_words: Option<usize>, output: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| InputError(format!("cannot read {}: {e}", input.display())))?;
    let al = textgrid_to_alignment(&text, tier, statement_words)?;
    write(output, al.to_json() + "\n")
}
