//! Statement–question pairs from written task-oriented dialogs.
//!
//! Agent turns are split into sentences, and every statement ending in a
//! period that is immediately followed by a question becomes a candidate
//! pair. Candidates are kept only when neither sentence contains a comma or a
//! digit, each sentence has at least five words, the pair is between 50 and
//! 250 characters long, and both sentences end in a one-syllable word (so the
//! last word of the statement can be treated as its last syllable).
//!
//! Two dialog layouts are read: a map from dialog id to `{"log": [...]}`
//! where user and agent alternate starting with the user, and a list of
//! `{"dialogue_id", "turns": [{"speaker", "utterance"}]}` records.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    User,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub index: usize,
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialog {
    pub id: String,
    pub turns: Vec<Turn>,
}

fn corpus_err(location: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Corpus {
        location: location.into(),
        msg: msg.into(),
    }
}

fn role_of(speaker: &str) -> Option<Role> {
    match speaker.to_ascii_lowercase().as_str() {
        "user" | "customer" => Some(Role::User),
        "system" | "agent" | "clerk" | "sys" => Some(Role::Agent),
        _ => None,
    }
}

/// Parse one dialog file in either supported layout.
pub fn parse_dialogs(text: &str, source: &str) -> Result<Vec<Dialog>> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| corpus_err(format!("{source}:{}:{}", e.line(), e.column()), e.to_string()))?;
    let mut dialogs = Vec::new();
    match value {
        Value::Object(map) => {
            for (id, body) in map {
                let log = body
                    .get("log")
                    .and_then(Value::as_array)
                    .ok_or_else(|| corpus_err(format!("{source}: {id}"), "missing 'log' array"))?;
                let turns = log
                    .iter()
                    .enumerate()
                    .map(|(index, t)| {
                        let text = t
                            .get("text")
                            .and_then(Value::as_str)
                            .ok_or_else(|| corpus_err(format!("{source}: {id} turn {index}"), "missing 'text'"))?;
                        let role = if index % 2 == 0 { Role::User } else { Role::Agent };
                        Ok(Turn { index, role, text: text.to_string() })
                    })
                    .collect::<Result<Vec<_>>>()?;
                dialogs.push(Dialog { id: id.trim_end_matches(".json").to_string(), turns });
            }
        }
        Value::Array(items) => {
            for (n, item) in items.iter().enumerate() {
                let id = item
                    .get("dialogue_id")
                    .or_else(|| item.get("dialog_id"))
                    .or_else(|| item.get("id"))
                    .and_then(Value::as_str)
                    .ok_or_else(|| corpus_err(format!("{source}: item {n}"), "missing dialogue_id"))?;
                let raw = item
                    .get("turns")
                    .and_then(Value::as_array)
                    .ok_or_else(|| corpus_err(format!("{source}: {id}"), "missing 'turns' array"))?;
                let turns = raw
                    .iter()
                    .enumerate()
                    .map(|(index, t)| {
                        let loc = || format!("{source}: {id} turn {index}");
                        let speaker = t
                            .get("speaker")
                            .and_then(Value::as_str)
                            .ok_or_else(|| corpus_err(loc(), "missing 'speaker'"))?;
                        let role = role_of(speaker)
                            .ok_or_else(|| corpus_err(loc(), format!("unknown speaker '{speaker}'")))?;
                        let text = t
                            .get("utterance")
                            .or_else(|| t.get("text"))
                            .and_then(Value::as_str)
                            .ok_or_else(|| corpus_err(loc(), "missing 'utterance'"))?;
                        Ok(Turn { index, role, text: text.to_string() })
                    })
                    .collect::<Result<Vec<_>>>()?;
                dialogs.push(Dialog { id: id.trim_end_matches(".json").to_string(), turns });
            }
        }
        _ => return Err(corpus_err(source, "expected a JSON object or array of dialogs")),
    }
    Ok(dialogs)
}

/// Load a dialog file, or every `.json` file under a directory in name order.
pub fn load_dialogs(path: impl AsRef<Path>) -> Result<Vec<Dialog>> {
    let path = path.as_ref();
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut files = Vec::new();
        let entries = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        for entry in entries {
            let p = entry.map_err(|e| Error::io(path, e))?.path();
            if p.extension().is_some_and(|e| e == "json") {
                files.push(p);
            }
        }
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    let mut dialogs = Vec::new();
    for file in files {
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        dialogs.extend(parse_dialogs(&text, &file.display().to_string())?);
    }
    Ok(dialogs)
}

/// Split on '.', '?' or '!' followed by whitespace or the end of the text.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        let boundary = matches!(c, '.' | '?' | '!') && chars.peek().is_none_or(|n| n.is_whitespace());
        if boundary {
            let s = current.trim();
            if !s.is_empty() {
                sentences.push(s.to_string());
            }
            current.clear();
        }
    }
    let rest = current.trim();
    if !rest.is_empty() {
        sentences.push(rest.to_string());
    }
    sentences
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_words_per_sentence: usize,
    pub min_chars: usize,
    pub max_chars: usize,
    pub forbid_commas: bool,
    pub forbid_digits: bool,
    pub require_monosyllabic_end: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_words_per_sentence: 5,
            min_chars: 50,
            max_chars: 250,
            forbid_commas: true,
            forbid_digits: true,
            require_monosyllabic_end: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_words_per_sentence == 0 || self.min_chars == 0 || self.min_chars >= self.max_chars {
            return Err(Error::Config(
                "filter bounds must be positive with min_chars < max_chars".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Comma,
    Digit,
    MinWords,
    MinChars,
    MaxChars,
    Polysyllabic,
}

impl RejectReason {
    pub const ALL: [RejectReason; 6] = [
        RejectReason::Comma,
        RejectReason::Digit,
        RejectReason::MinWords,
        RejectReason::MinChars,
        RejectReason::MaxChars,
        RejectReason::Polysyllabic,
    ];
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Comma => "comma",
            RejectReason::Digit => "digit",
            RejectReason::MinWords => "min_words",
            RejectReason::MinChars => "min_chars",
            RejectReason::MaxChars => "max_chars",
            RejectReason::Polysyllabic => "polysyllabic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub dialog_id: String,
    pub turn_index: usize,
    /// Position of the statement among the turn's sentences.
    pub sentence_index: usize,
    pub statement: String,
    pub question: String,
}

impl SentencePair {
    pub fn new(statement: &str, question: &str) -> Self {
        Self {
            dialog_id: String::new(),
            turn_index: 0,
            sentence_index: 0,
            statement: statement.to_string(),
            question: question.to_string(),
        }
    }

    /// Character count of the pair joined by one space.
    pub fn char_count(&self) -> usize {
        self.statement.chars().count() + 1 + self.question.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub pair: SentencePair,
    pub reasons: Vec<RejectReason>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub pairs: Vec<SentencePair>,
    pub rejections: Vec<Rejection>,
}

fn words(sentence: &str) -> Vec<&str> {
    sentence.split_whitespace().collect()
}

/// Every rule the pair breaks, in a fixed order; empty when it qualifies.
pub fn check_pair(pair: &SentencePair, cfg: &FilterConfig, lexicon: &Lexicon) -> Vec<RejectReason> {
    let both = [pair.statement.as_str(), pair.question.as_str()];
    let mut reasons = Vec::new();
    if cfg.forbid_commas && both.iter().any(|s| s.contains(',')) {
        reasons.push(RejectReason::Comma);
    }
    if cfg.forbid_digits && both.iter().any(|s| s.chars().any(|c| c.is_ascii_digit())) {
        reasons.push(RejectReason::Digit);
    }
    if both.iter().any(|s| words(s).len() < cfg.min_words_per_sentence) {
        reasons.push(RejectReason::MinWords);
    }
    let chars = pair.char_count();
    if chars < cfg.min_chars {
        reasons.push(RejectReason::MinChars);
    }
    if chars > cfg.max_chars {
        reasons.push(RejectReason::MaxChars);
    }
    if cfg.require_monosyllabic_end {
        let one_syllable = |s: &str| {
            words(s)
                .last()
                .is_some_and(|w| count_syllables(w, lexicon).is_ok_and(|n| n == 1))
        };
        if !both.iter().all(|s| one_syllable(s)) {
            reasons.push(RejectReason::Polysyllabic);
        }
    }
    reasons
}

/// All qualifying pairs in (dialog id, turn, sentence) order, plus every
/// rejected candidate with its reasons.
pub fn extract_pairs(dialogs: &[Dialog], cfg: &FilterConfig, lexicon: &Lexicon) -> Result<Extraction> {
    cfg.validate()?;
    let mut candidates = Vec::new();
    for dialog in dialogs {
        for turn in dialog.turns.iter().filter(|t| t.role == Role::Agent) {
            let sentences = split_sentences(&turn.text);
            for (i, pair) in sentences.windows(2).enumerate() {
                let (s, q) = (&pair[0], &pair[1]);
                if s.ends_with('.') && !s.ends_with("?.") && q.ends_with('?') {
                    candidates.push(SentencePair {
                        dialog_id: dialog.id.clone(),
                        turn_index: turn.index,
                        sentence_index: i,
                        statement: s.clone(),
                        question: q.clone(),
                    });
                }
            }
        }
    }
    candidates.sort_by(|a, b| {
        (&a.dialog_id, a.turn_index, a.sentence_index).cmp(&(&b.dialog_id, b.turn_index, b.sentence_index))
    });
    let mut out = Extraction::default();
    for pair in candidates {
        let reasons = check_pair(&pair, cfg, lexicon);
        if reasons.is_empty() {
            out.pairs.push(pair);
        } else {
            out.rejections.push(Rejection { pair, reasons });
        }
    }
    Ok(out)
}

/// Syllable counts by word, from a pronunciation dictionary.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    counts: HashMap<String, u32>,
}

static BUNDLED: OnceLock<Lexicon> = OnceLock::new();

impl Lexicon {
    /// The bundled table, derived from the CMU Pronouncing Dictionary.
    pub fn bundled() -> &'static Lexicon {
        BUNDLED.get_or_init(|| {
            let gz: &[u8] = include_bytes!("../data/syllables.txt.gz");
            let mut text = String::new();
            GzDecoder::new(gz)
                .read_to_string(&mut text)
                .expect("bundled lexicon decompresses");
            Lexicon::parse(&text)
        })
    }

    /// Read either `word count` lines or CMU dictionary lines
    /// (`word PH1 ON0 ES`, stressed vowels count as syllables). Alternate
    /// pronunciations (`word(2)`) are ignored.
    pub fn parse(text: &str) -> Lexicon {
        let mut counts = HashMap::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            if word.starts_with(";;;") || word.contains('(') {
                continue;
            }
            let rest: Vec<&str> = parts.collect();
            let n = match rest[..] {
                [single] if single.parse::<u32>().is_ok() => single.parse().unwrap(),
                _ => rest.iter().filter(|p| p.ends_with(|c: char| c.is_ascii_digit())).count() as u32,
            };
            if n > 0 {
                counts.entry(word.to_lowercase()).or_insert(n);
            }
        }
        Lexicon { counts }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Lexicon> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.counts.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

fn normalize_word(word: &str) -> Result<String> {
    let w = word
        .trim_matches(|c: char| !c.is_alphabetic())
        .to_lowercase()
        .replace('’', "'");
    if w.is_empty() || !w.chars().all(|c| c.is_ascii_lowercase() || c == '\'') {
        return Err(Error::Word(format!("'{word}' is not an alphabetic word")));
    }
    Ok(w)
}

/// Vowel groups, less a silent final 'e' when another group precedes it.
pub fn heuristic_syllables(word: &str) -> u32 {
    let letters: Vec<char> = word.chars().filter(|c| c.is_ascii_alphabetic()).collect();
    let is_vowel = |c: char| "aeiouy".contains(c);
    let mut groups = 0;
    let mut prev = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = letters.len();
    let silent_e = n >= 2 && letters[n - 1] == 'e' && !is_vowel(letters[n - 2]);
    if silent_e && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

pub fn count_syllables(word: &str, lexicon: &Lexicon) -> Result<u32> {
    let w = normalize_word(word)?;
    if let Some(n) = lexicon.get(&w) {
        return Ok(n);
    }
    Ok(heuristic_syllables(&w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Original,
    Comma,
    Filler,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Original, Condition::Comma, Condition::Filler];
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Original => "original",
            Condition::Comma => "comma",
            Condition::Filler => "filler",
        })
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "original" => Ok(Condition::Original),
            "comma" => Ok(Condition::Comma),
            "filler" => Ok(Condition::Filler),
            other => Err(Error::Config(format!("unknown condition '{other}'"))),
        }
    }
}

pub const FILLER: &str = "um";

/// The prompt text for a condition. Only the statement's final period
/// changes; the question is left as is.
pub fn permute(pair: &SentencePair, condition: Condition) -> String {
    let stem = pair.statement.strip_suffix('.').unwrap_or(&pair.statement);
    match condition {
        Condition::Original => format!("{} {}", pair.statement, pair.question),
        Condition::Comma => format!("{stem}, {}", pair.question),
        Condition::Filler => format!("{stem} {FILLER}, {}", pair.question),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub dialog_id: String,
    pub turn_index: usize,
    pub sentence_index: usize,
    pub statement: String,
    pub question: String,
    pub original: String,
    pub comma: String,
    pub filler: String,
}

impl From<&SentencePair> for ManifestRow {
    fn from(p: &SentencePair) -> Self {
        Self {
            dialog_id: p.dialog_id.clone(),
            turn_index: p.turn_index,
            sentence_index: p.sentence_index,
            statement: p.statement.clone(),
            question: p.question.clone(),
            original: permute(p, Condition::Original),
            comma: permute(p, Condition::Comma),
            filler: permute(p, Condition::Filler),
        }
    }
}

impl ManifestRow {
    /// Stable identifier used to name per-sample files.
    pub fn sample_id(&self) -> String {
        format!("{}_{}_{}", self.dialog_id, self.turn_index, self.sentence_index)
    }

    pub fn pair(&self) -> SentencePair {
        SentencePair {
            dialog_id: self.dialog_id.clone(),
            turn_index: self.turn_index,
            sentence_index: self.sentence_index,
            statement: self.statement.clone(),
            question: self.question.clone(),
        }
    }

    pub fn prompt(&self, condition: Condition) -> &str {
        match condition {
            Condition::Original => &self.original,
            Condition::Comma => &self.comma,
            Condition::Filler => &self.filler,
        }
    }
}

pub fn manifest_csv(rows: &[ManifestRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| corpus_err("manifest", e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| corpus_err("manifest", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn manifest_json(rows: &[ManifestRow]) -> String {
    serde_json::to_string_pretty(rows).expect("manifest serializes") + "\n"
}

/// Read a manifest written as JSON or CSV.
///
/// JSON may be a bare array of rows or an object with a `pairs` array; CSV
/// lines starting with `#` are skipped.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum JsonManifest {
        Rows(Vec<ManifestRow>),
        Wrapped { pairs: Vec<ManifestRow> },
    }
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let head = text.trim_start();
    if head.starts_with('[') || head.starts_with('{') {
        return Ok(match serde_json::from_str(&text)? {
            JsonManifest::Rows(rows) | JsonManifest::Wrapped { pairs: rows } => rows,
        });
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<ManifestRow>, _>>()
        .map_err(|e| corpus_err(path.display().to_string(), e.to_string()))
}
