use vapcue::aggregation::{Aggregator, BinWeighting, LabelDistribution};
use vapcue::codec::{CodecConfig, VapLabel};
use vapcue::predictor::{load_any, parse_trace, write_trace, FrameDistTrace, TraceData};
use vapcue::Error;

/// Header and frames assembled byte by byte.
fn hand_built(frame_rate: f32, frames: &[Vec<f32>]) -> Vec<u8> {
    let mut b = vec![0x56, 0x41, 0x50, 0x54, 0x01];
    b.extend(frame_rate.to_le_bytes());
    b.extend((frames.len() as u32).to_le_bytes());
    for f in frames {
        for v in f {
            b.extend(v.to_le_bytes());
        }
    }
    b
}

fn one_hot(label: usize) -> Vec<f32> {
    let mut v = vec![0.0; 256];
    v[label] = 1.0;
    v
}

#[test]
fn header_bytes_are_fixed() {
    let bytes = hand_built(50.0, &[]);
    assert_eq!(bytes, [b'V', b'A', b'P', b'T', 1, 0x00, 0x00, 0x48, 0x42, 0, 0, 0, 0]);
}

#[test]
fn hand_built_bytes_parse() {
    let mut mixed = vec![0.0f32; 256];
    mixed[0] = 0.25;
    mixed[255] = 0.75;
    let bytes = hand_built(50.0, &[one_hot(240), one_hot(15), mixed]);
    assert_eq!(bytes.len(), 13 + 3 * 1024);
    let trace = parse_trace(&bytes).unwrap();
    assert_eq!(trace.frame_rate(), 50.0);
    assert_eq!(trace.len(), 3);
    assert_eq!(trace.frames()[0].argmax(), VapLabel::from(240));
    assert_eq!(trace.frames()[1].prob(VapLabel::from(15)), 1.0);
    assert_eq!(trace.frames()[2].prob(VapLabel::from(255)), 0.75);

    let probs = trace
        .to_prob_trace(&Aggregator::new(CodecConfig::default(), BinWeighting::Duration))
        .unwrap();
    let f = probs.frames();
    assert_eq!((f[0].p_now, f[0].p_fut), (1.0, 1.0));
    assert_eq!((f[1].p_now, f[1].p_fut), (0.0, 0.0));
    assert!((f[2].p_now - 0.5).abs() < 1e-12);
}

#[test]
fn writer_emits_the_same_bytes() {
    let frames = vec![one_hot(60), one_hot(3)];
    let trace = FrameDistTrace::new(
        25.0,
        frames
            .iter()
            .map(|f| LabelDistribution::new(f.iter().map(|&v| v as f64).collect()).unwrap())
            .collect(),
    )
    .unwrap();
    assert_eq!(trace.to_bytes(), hand_built(25.0, &frames));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.vapt");
    write_trace(&path, &trace).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), hand_built(25.0, &frames));
    assert_eq!(load_any(&path).unwrap(), TraceData::Distributions(trace));
}

#[test]
fn text_and_binary_agree() {
    let bytes = hand_built(50.0, &[one_hot(7), one_hot(200)]);
    let binary = parse_trace(&bytes).unwrap();
    let text = parse_trace(binary.to_text().as_bytes()).unwrap();
    assert_eq!(binary, text);
}

#[test]
fn malformed_inputs() {
    let mut wrong_version = hand_built(50.0, &[one_hot(0)]);
    wrong_version[4] = 2;
    assert!(matches!(parse_trace(&wrong_version), Err(Error::TraceHeader(_))));

    let mut short = hand_built(50.0, &[one_hot(0), one_hot(1)]);
    short.truncate(short.len() - 8);
    match parse_trace(&short) {
        Err(Error::TraceFormat { row, .. }) => assert_eq!(row, 2),
        other => panic!("{other:?}"),
    }

    let mut extra = hand_built(50.0, &[one_hot(0)]);
    extra.extend([0u8; 1024]);
    assert!(matches!(parse_trace(&extra), Err(Error::TraceHeader(_))));

    let mut bad_sum = one_hot(0);
    bad_sum[1] = 0.5;
    match parse_trace(&hand_built(50.0, &[one_hot(0), bad_sum])) {
        Err(e @ Error::TraceValidation { row: 2, .. }) => assert!(e.is_validation()),
        other => panic!("{other:?}"),
    }

    assert!(parse_trace(&hand_built(0.0, &[one_hot(0)])).is_err());
}
