use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use vapcue::corpus::{
    extract_pairs, load_dialogs, permute, Condition, FilterConfig, Lexicon, RejectReason, SentencePair,
};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

/// Final words of every candidate sentence, counted by hand.
const FINAL_WORD_SYLLABLES: &[(&str, u32)] = &[
    ("work", 1), ("you", 1), ("north", 1), ("park", 1), ("room", 1), ("day", 1), ("it", 1),
    ("booked", 1), ("town", 1), ("now", 1), ("me", 1), ("week", 1), ("well", 1),
    ("afternoon", 3), ("number", 2), ("west", 1), ("way", 1), ("with", 1), ("many", 2),
    ("want", 1), ("full", 1), ("one", 1), ("menu", 2), ("night", 1), ("time", 1), ("sea", 1),
    ("is", 1), ("group", 1), ("do", 1),
];

fn last_word(s: &str) -> String {
    s.split_whitespace()
        .last()
        .unwrap()
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// The filter predicates, restated.
fn independent_check(p: &SentencePair) -> bool {
    let table: BTreeMap<&str, u32> = FINAL_WORD_SYLLABLES.iter().copied().collect();
    let both = [p.statement.as_str(), p.question.as_str()];
    let chars = p.statement.chars().count() + 1 + p.question.chars().count();
    both.iter().all(|s| !s.contains(','))
        && both.iter().all(|s| !s.chars().any(|c| c.is_ascii_digit()))
        && both.iter().all(|s| s.split_whitespace().count() >= 5)
        && (50..=250).contains(&chars)
        && both.iter().all(|s| table[last_word(s).as_str()] == 1)
}

#[test]
fn fixture_extraction_matches_hand_labels() {
    let dialogs = load_dialogs(fixture()).unwrap();
    assert_eq!(dialogs.len(), 20);
    let ex = extract_pairs(&dialogs, &FilterConfig::default(), Lexicon::bundled()).unwrap();

    let accepted: Vec<&str> = ex.pairs.iter().map(|p| p.dialog_id.as_str()).collect();
    assert_eq!(
        accepted,
        ["MUL0001", "MUL0002", "MUL0009", "MUL0010", "PMUL0013", "PMUL0016", "PMUL0017", "PMUL0019", "PMUL0020"]
    );
    use RejectReason::*;
    let rejected: Vec<(&str, Vec<RejectReason>)> =
        ex.rejections.iter().map(|r| (r.pair.dialog_id.as_str(), r.reasons.clone())).collect();
    assert_eq!(
        rejected,
        vec![
            ("MUL0003", vec![Comma]),
            ("MUL0004", vec![Digit]),
            ("MUL0005", vec![MinWords]),
            ("MUL0006", vec![MinChars]),
            ("MUL0007", vec![MaxChars]),
            ("MUL0008", vec![Polysyllabic]),
            ("MUL0011", vec![MinWords, MinChars, Polysyllabic]),
            ("MUL0012", vec![Comma, Digit]),
            ("PMUL0014", vec![Polysyllabic]),
            ("PMUL0015", vec![MinWords]),
        ]
    );
    let exercised: BTreeSet<RejectReason> = ex.rejections.iter().flat_map(|r| r.reasons.clone()).collect();
    assert_eq!(exercised.len(), RejectReason::ALL.len());

    for p in &ex.pairs {
        assert!(independent_check(p), "{p:?}");
    }
    for r in &ex.rejections {
        assert!(!independent_check(&r.pair), "{:?}", r.pair);
    }
}

#[test]
fn extraction_is_deterministic() {
    let a = extract_pairs(&load_dialogs(fixture()).unwrap(), &FilterConfig::default(), Lexicon::bundled()).unwrap();
    let b = extract_pairs(&load_dialogs(fixture()).unwrap(), &FilterConfig::default(), Lexicon::bundled()).unwrap();
    assert_eq!(a.pairs, b.pairs);
    assert_eq!(a.rejections, b.rejections);
}

#[test]
fn provenance_of_multi_sentence_turns() {
    let ex = extract_pairs(&load_dialogs(fixture()).unwrap(), &FilterConfig::default(), Lexicon::bundled()).unwrap();
    let room = ex.pairs.iter().find(|p| p.dialog_id == "PMUL0017").unwrap();
    assert_eq!((room.turn_index, room.sentence_index), (1, 1));
    assert_eq!(room.statement, "The room has a view of the sea.");
    let gallery = ex.pairs.iter().find(|p| p.dialog_id == "PMUL0019").unwrap();
    assert_eq!(gallery.sentence_index, 1);
    assert!(gallery.char_count() > 200);
}

#[test]
fn example_pair_and_its_variants() {
    let ex = extract_pairs(&load_dialogs(fixture()).unwrap(), &FilterConfig::default(), Lexicon::bundled()).unwrap();
    let p = &ex.pairs[0];
    assert_eq!(p.statement, "Yes that time will work.");
    assert_eq!(p.question, "Would you like me to book it for you?");
    assert_eq!(permute(p, Condition::Original), "Yes that time will work. Would you like me to book it for you?");
    assert_eq!(permute(p, Condition::Comma), "Yes that time will work, Would you like me to book it for you?");
    assert_eq!(permute(p, Condition::Filler), "Yes that time will work um, Would you like me to book it for you?");
}

#[test]
fn permutation_lengths() {
    let ex = extract_pairs(&load_dialogs(fixture()).unwrap(), &FilterConfig::default(), Lexicon::bundled()).unwrap();
    for p in &ex.pairs {
        let original = permute(p, Condition::Original).len();
        assert_eq!(permute(p, Condition::Comma).len(), original);
        assert_eq!(permute(p, Condition::Filler).len(), original + 3);
    }
}

#[test]
fn bad_json_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"X.json\": {\"log\": [\n    {\"text\": \"hi\"},\n  ]}\n}\n").unwrap();
    let err = load_dialogs(&path).unwrap_err().to_string();
    assert!(err.contains("broken.json:4:"), "{err}");
}
