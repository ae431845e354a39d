use proptest::prelude::*;
use ttscore::corpus::{
    parse_manifest, read_alignment, read_tokens, write_alignment, write_manifest, write_tokens, AlignmentSegment,
    EvalRecord, F0Contour, FeatureMatrix, Manifest, TokenSequence,
};
use ttscore::prosody::{pool_phoneme, PoolMode};
use ttscore::synth::alignment_from_durations;

fn record(i: usize, mos: Option<f64>, text: String) -> EvalRecord {
    let mut r = EvalRecord::new(format!("utt{i:03}"), format!("sys{}", i % 4));
    r.text = text;
    r.mos = mos;
    r.phonemes = Some(vec!["AH".into(), "B".into()]);
    r.feature_path = Some(format!("feats/utt{i:03}.ttsf"));
    if i % 3 == 0 {
        r.metrics.insert("elo".into(), i as f64 * 1.5);
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn manifests_round_trip(texts in prop::collection::vec("[a-zA-Z ,.'\"\\\\]{0,20}", 50), mos in prop::collection::vec(prop::option::of(1.0..5.0f64), 50)) {
        let dir = tempfile::tempdir().unwrap();
        let records: Vec<EvalRecord> = texts.into_iter().zip(mos).enumerate().map(|(i, (t, m))| record(i, m, t)).collect();
        let path = dir.path().join("m.jsonl");
        write_manifest(&path, &records).unwrap();
        prop_assert_eq!(parse_manifest(&path).unwrap(), records);
    }

    #[test]
    fn features_round_trip(frames in 1usize..20, dims in 1usize..6, seed in any::<u32>()) {
        let values: Vec<f32> = (0..frames * dims).map(|i| ((i as u32).wrapping_mul(seed) % 1000) as f32 / 7.0 - 50.0).collect();
        let m = FeatureMatrix::new(frames, dims, values).unwrap();
        prop_assert_eq!(FeatureMatrix::from_bytes(&m.to_bytes(), "mem".as_ref()).unwrap(), m);
    }

    #[test]
    fn token_files_round_trip(seqs in prop::collection::vec(prop::collection::vec(0u32..500, 1..30), 1..10)) {
        let dir = tempfile::tempdir().unwrap();
        let entries: Vec<(String, TokenSequence)> = seqs
            .into_iter()
            .enumerate()
            .map(|(i, ids)| (format!("u{i}"), TokenSequence::new(ids, 500).unwrap()))
            .collect();
        let path = dir.path().join("t.tok");
        write_tokens(&path, &entries).unwrap();
        prop_assert_eq!(read_tokens(&path, 500).unwrap(), entries);
    }

    #[test]
    fn generated_alignments_validate(durations in prop::collection::vec(1usize..8, 1..20)) {
        let dir = tempfile::tempdir().unwrap();
        let segs = alignment_from_durations(&durations);
        let frames: usize = durations.iter().sum();
        let path = dir.path().join("a.jsonl");
        write_alignment(&path, "u", &segs).unwrap();
        prop_assert_eq!(read_alignment(&path, "u", durations.len(), frames).unwrap(), segs);
    }
}

#[test]
fn manifest_paths_resolve_against_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("sub")).unwrap();
    let path = dir.path().join("sub/m.jsonl");
    write_manifest(&path, &[record(1, Some(3.0), "hi".into())]).unwrap();
    let m = Manifest::load(&path).unwrap();
    let r = &m.records[0];
    assert_eq!(
        m.resolve(r.feature_path.as_ref().unwrap()),
        dir.path().join("sub/feats/utt001.ttsf")
    );
    // absent field and missing file are both reported
    assert!(m.require(r, "token_path", &r.token_path).is_err());
    assert!(m.require(r, "feature_path", &r.feature_path).is_err());
    std::fs::create_dir(dir.path().join("sub/feats")).unwrap();
    std::fs::write(dir.path().join("sub/feats/utt001.ttsf"), b"").unwrap();
    assert!(m.require(r, "feature_path", &r.feature_path).is_ok());
    assert_eq!(m.phonemes(r).unwrap().len(), 2);
    assert_eq!(r.column("mos"), Some(3.0));
}

#[test]
fn unknown_manifest_fields_and_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jsonl");
    std::fs::write(
        &path,
        "{\"utt_id\":\"a\",\"system_id\":\"s\",\"extra\":1}\n\n{\"utt_id\":\"b\"\n",
    )
    .unwrap();
    let err = parse_manifest(&path).unwrap_err().to_string();
    assert!(err.contains('3'), "{err}");
}

#[test]
fn pooling_averages_frames_per_phoneme() {
    let m = FeatureMatrix::from_rows(&[[0.0f32, 2.0], [2.0, 4.0], [5.0, 5.0], [1.0, 1.0], [3.0, 9.0]]).unwrap();
    let segs = vec![AlignmentSegment::new(0, 0, 2), AlignmentSegment::new(1, 2, 5)];
    let mean = pool_phoneme(&m, &segs, PoolMode::Mean).unwrap();
    assert_eq!(mean.row(0), &[1.0, 3.0]);
    assert_eq!(mean.row(1), &[3.0, 5.0]);
    let max = pool_phoneme(&m, &segs, PoolMode::Max).unwrap();
    assert_eq!(max.row(1), &[5.0, 9.0]);
}

#[test]
fn f0_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let f0 = F0Contour::new(vec![0.0, 110.5, 220.25, 0.0]).unwrap();
    let path = dir.path().join("f0.ttsf");
    f0.write(&path).unwrap();
    assert_eq!(F0Contour::read(&path).unwrap(), f0);
}
