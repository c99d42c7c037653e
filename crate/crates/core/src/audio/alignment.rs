//! Word alignments of a statement followed by a question.
//!
//! On disk an alignment is JSON:
//!
//! ```json
//! { "words": [{"w": "Yes", "on": 0.12, "off": 0.31}, ...],
//!   "statement_end": 1.4, "question_start": 1.8, "question_end": 3.9 }
//! ```
//!
//! The markers must agree with the word list: `statement_end` is the offset
//! of the statement's last word, `question_start` the onset of the following
//! word and `question_end` the offset of the last word. `statement_end` and
//! `question_start` may be omitted when the statement's last word carries its
//! period.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::TurnMarkers;

/// Marker and word-boundary agreement, in seconds.
const MARKER_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedWord {
    pub w: String,
    pub on: f64,
    pub off: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    words: Vec<AlignedWord>,
    statement_words: usize,
}

#[derive(Serialize, Deserialize)]
struct AlignmentFile {
    words: Vec<AlignedWord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    statement_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question_start: Option<f64>,
    #[serde(default)]
    question_end: Option<f64>,
}

impl Alignment {
    /// `statement_words` is the number of leading words that form the statement.
    pub fn new(words: Vec<AlignedWord>, statement_words: usize) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Alignment("word list is empty".into()));
        }
        for (i, w) in words.iter().enumerate() {
            if !(w.on.is_finite() && w.off.is_finite() && w.on >= 0.0) {
                return Err(Error::Alignment(format!("word {i} ('{}') has invalid times", w.w)));
            }
            if w.off < w.on {
                return Err(Error::Alignment(format!(
                    "word {i} ('{}') ends at {} before it starts at {}",
                    w.w, w.off, w.on
                )));
            }
        }
        if let Some(i) = (1..words.len()).find(|&i| words[i].on < words[i - 1].off - 1e-9) {
            return Err(Error::Alignment(format!(
                "timestamps are not monotone at word {i} ('{}')",
                words[i].w
            )));
        }
        if statement_words == 0 || statement_words >= words.len() {
            return Err(Error::Alignment(format!(
                "statement of {statement_words} words leaves no question in {} words",
                words.len()
            )));
        }
        Ok(Self {
            words,
            statement_words,
        })
    }

    pub fn words(&self) -> &[AlignedWord] {
        &self.words
    }

    pub fn statement_words(&self) -> &[AlignedWord] {
        &self.words[..self.statement_words]
    }

    pub fn question_words(&self) -> &[AlignedWord] {
        &self.words[self.statement_words..]
    }

    pub fn last_statement_word(&self) -> &AlignedWord {
        &self.words[self.statement_words - 1]
    }

    pub fn markers(&self) -> TurnMarkers {
        TurnMarkers {
            statement_end: self.last_statement_word().off,
            question_start: self.words[self.statement_words].on,
            question_end: self.words.last().expect("non-empty").off,
        }
    }

    /// Move every word from index `from` on by `delta` seconds.
    pub(crate) fn shift_from(&self, from: usize, delta: f64) -> Self {
        let mut words = self.words.clone();
        for w in &mut words[from..] {
            w.on += delta;
            w.off += delta;
        }
        Self {
            words,
            statement_words: self.statement_words,
        }
    }

    pub(crate) fn replace_word(&self, index: usize, word: AlignedWord) -> Self {
        let mut words = self.words.clone();
        words[index] = word;
        Self {
            words,
            statement_words: self.statement_words,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: AlignmentFile = serde_json::from_str(text)?;
        let question_end = file
            .question_end
            .ok_or_else(|| Error::Alignment("missing question_end".into()))?;
        if file.words.is_empty() {
            return Err(Error::Alignment("word list is empty".into()));
        }
        let statement_words = match file.statement_end {
            Some(end) => {
                file.words
                    .iter()
                    .position(|w| (w.off - end).abs() <= MARKER_TOLERANCE)
                    .ok_or_else(|| Error::Alignment(format!("statement_end {end} is not a word offset")))?
                    + 1
            }
            None => file
                .words
                .iter()
                .position(|w| w.w.trim_end().ends_with('.'))
                .ok_or_else(|| Error::Alignment("missing statement_end and no word ends with '.'".into()))?
                + 1,
        };
        let alignment = Self::new(file.words, statement_words)?;
        let derived = alignment.markers();
        if let Some(start) = file.question_start {
            if (start - derived.question_start).abs() > MARKER_TOLERANCE {
                return Err(Error::Alignment(format!(
                    "question_start {start} does not match the first question word at {}",
                    derived.question_start
                )));
            }
        }
        if (question_end - derived.question_end).abs() > MARKER_TOLERANCE {
            return Err(Error::Alignment(format!(
                "question_end {question_end} does not match the last word offset {}",
                derived.question_end
            )));
        }
        Ok(alignment)
    }

    pub fn to_json(&self) -> String {
        let m = self.markers();
        let file = AlignmentFile {
            words: self.words.clone(),
            statement_end: Some(m.statement_end),
            question_start: Some(m.question_start),
            question_end: Some(m.question_end),
        };
        serde_json::to_string_pretty(&file).expect("alignment serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

const SILENCE_LABELS: [&str; 5] = ["", "sil", "sp", "<eps>", "spn"];

fn textgrid_values(text: &str) -> Vec<String> {
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.contains("<exists>") {
            continue;
        }
        let value = if line.starts_with('"') {
            line
        } else if let Some((_, v)) = line.split_once('=') {
            v.trim()
        } else if line.ends_with(':') {
            continue;
        } else {
            line
        };
        let value = match value.strip_prefix('"') {
            Some(rest) => rest.strip_suffix('"').unwrap_or(rest).replace("\"\"", "\""),
            None => value.to_string(),
        };
        values.push(value);
    }
    values
}

/// Convert an interval tier of a Praat TextGrid (long or short text form)
/// into an alignment.
///
/// The statement/question split is taken from `statement_words` when given,
/// else from a word ending in '.', else from the longest silence between
/// consecutive words.
pub fn textgrid_to_alignment(text: &str, tier: &str, statement_words: Option<usize>) -> Result<Alignment> {
    let bad = |msg: &str| Error::Alignment(format!("TextGrid: {msg}"));
    let values = textgrid_values(text);
    let mut it = values.iter();
    let mut next = || it.next().ok_or_else(|| bad("unexpected end of file"));
    let num = |v: &String| v.parse::<f64>().map_err(|_| bad(&format!("expected a number, found '{v}'")));
    if next()? != "ooTextFile" || next()? != "TextGrid" {
        return Err(bad("not a TextGrid"));
    }
    num(next()?)?;
    num(next()?)?;
    let tiers = num(next()?)? as usize;
    let mut found = None;
    for _ in 0..tiers {
        let class = next()?.clone();
        let name = next()?.clone();
        num(next()?)?;
        num(next()?)?;
        let count = num(next()?)? as usize;
        let mut items = Vec::with_capacity(count);
        for _ in 0..count {
            if class == "IntervalTier" {
                let on = num(next()?)?;
                let off = num(next()?)?;
                items.push(AlignedWord {
                    w: next()?.trim().to_string(),
                    on,
                    off,
                });
            } else {
                next()?;
                next()?;
            }
        }
        if class == "IntervalTier" && name == tier && found.is_none() {
            found = Some(items);
        }
    }
    let words: Vec<AlignedWord> = found
        .ok_or_else(|| bad(&format!("no interval tier named '{tier}'")))?
        .into_iter()
        .filter(|w| !SILENCE_LABELS.contains(&w.w.to_lowercase().as_str()))
        .collect();
    if words.len() < 2 {
        return Err(bad("fewer than two words on the tier"));
    }
    let split = match statement_words {
        Some(n) => n,
        None => match words.iter().position(|w| w.w.ends_with('.')) {
            Some(i) => i + 1,
            None => {
                (1..words.len())
                    .max_by(|&a, &b| {
                        let gap = |i: usize| words[i].on - words[i - 1].off;
                        gap(a).total_cmp(&gap(b)).then(b.cmp(&a))
                    })
                    .expect("at least two words")
            }
        },
    };
    Alignment::new(words, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE_PAIR: &str = r#"{
      "words": [
        {"w": "Yes", "on": 0.10, "off": 0.32},
        {"w": "that", "on": 0.32, "off": 0.50},
        {"w": "time", "on": 0.50, "off": 0.81},
        {"w": "will", "on": 0.81, "off": 0.97},
        {"w": "work.", "on": 0.97, "off": 1.40},
        {"w": "Would", "on": 2.05, "off": 2.20},
        {"w": "you", "on": 2.20, "off": 2.31},
        {"w": "like", "on": 2.31, "off": 2.52},
        {"w": "me", "on": 2.52, "off": 2.63},
        {"w": "to", "on": 2.63, "off": 2.72},
        {"w": "book", "on": 2.72, "off": 2.96},
        {"w": "it", "on": 2.96, "off": 3.07},
        {"w": "for", "on": 3.07, "off": 3.22},
        {"w": "you?", "on": 3.22, "off": 3.61}
      ],
      "statement_end": 1.40,
      "question_start": 2.05,
      "question_end": 3.61
    }"#;

    #[test]
    fn markers_from_fixture() {
        let a = Alignment::from_json(EXAMPLE_PAIR).unwrap();
        assert_eq!(a.words().len(), 14);
        let m = a.markers();
        assert_eq!((m.statement_end, m.question_start, m.question_end), (1.40, 2.05, 3.61));
        assert_eq!(a.last_statement_word().w, "work.");
        assert_eq!(a.question_words().len(), 9);
        assert_eq!(Alignment::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn markers_derived_from_punctuation() {
        let v: serde_json::Value = serde_json::from_str(EXAMPLE_PAIR).unwrap();
        let stripped = serde_json::json!({ "words": v["words"], "question_end": 3.61 });
        let a = Alignment::from_json(&stripped.to_string()).unwrap();
        assert_eq!(a.markers().question_start, 2.05);
    }

    #[test]
    fn rejects_bad_alignments() {
        let empty = r#"{"words": [], "statement_end": 1, "question_start": 1, "question_end": 2}"#;
        assert!(matches!(Alignment::from_json(empty), Err(Error::Alignment(_))));
        let reversed = EXAMPLE_PAIR.replace(r#""on": 0.50, "off": 0.81"#, r#""on": 0.50, "off": 0.40"#);
        assert!(Alignment::from_json(&reversed).is_err());
        let unordered = EXAMPLE_PAIR.replace(r#""on": 2.52, "off": 2.63"#, r#""on": 2.10, "off": 2.63"#);
        assert!(Alignment::from_json(&unordered).is_err());
        let no_end = EXAMPLE_PAIR.replace(r#""question_end": 3.61"#, r#""x": 0"#);
        let err = Alignment::from_json(&no_end).unwrap_err();
        assert!(err.to_string().contains("question_end"));
        let wrong = EXAMPLE_PAIR.replace(r#""question_start": 2.05"#, r#""question_start": 1.9"#);
        assert!(Alignment::from_json(&wrong).is_err());
    }

    const TEXTGRID: &str = r#"File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 2.5
tiers? <exists>
size = 2
item []:
    item [1]:
        class = "IntervalTier"
        name = "words"
        xmin = 0
        xmax = 2.5
        intervals: size = 6
        intervals [1]:
            xmin = 0
            xmax = 0.1
            text = ""
        intervals [2]:
            xmin = 0.1
            xmax = 0.5
            text = "sure"
        intervals [3]:
            xmin = 0.5
            xmax = 0.9
            text = "thing"
        intervals [4]:
            xmin = 0.9
            xmax = 1.6
            text = ""
        intervals [5]:
            xmin = 1.6
            xmax = 1.9
            text = "anything"
        intervals [6]:
            xmin = 1.9
            xmax = 2.5
            text = "else"
    item [2]:
        class = "TextTier"
        name = "events"
        xmin = 0
        xmax = 2.5
        points: size = 1
        points [1]:
            number = 1.2
            mark = "x"
"#;

    #[test]
    fn textgrid_long_form() {
        let a = textgrid_to_alignment(TEXTGRID, "words", None).unwrap();
        assert_eq!(a.words().len(), 4);
        let m = a.markers();
        assert_eq!((m.statement_end, m.question_start, m.question_end), (0.9, 1.6, 2.5));
        let b = textgrid_to_alignment(TEXTGRID, "words", Some(3)).unwrap();
        assert_eq!(b.markers().statement_end, 1.9);
        assert!(textgrid_to_alignment(TEXTGRID, "phones", None).is_err());
    }

    #[test]
    fn textgrid_short_form() {
        let short = "\"ooTextFile\"\n\"TextGrid\"\n0\n2\n<exists>\n1\n\"IntervalTier\"\n\"words\"\n0\n2\n3\n0\n0.5\n\"ok.\"\n0.5\n1.2\n\"\"\n1.2\n2\n\"ready?\"\n";
        let a = textgrid_to_alignment(short, "words", None).unwrap();
        assert_eq!(a.statement_words().len(), 1);
        assert_eq!(a.markers().question_start, 1.2);
    }
}
