use std::path::Path;
use std::process::{Command, Output};

use ttscore::corpus::{write_manifest, write_tokens, EvalRecord, PhonemeSequence, TokenSequence};
use ttscore::evalbench::{CorrelationReport, Level};

fn ttscore(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttscore"))
        .args(args)
        .current_dir(dir)
        .env("TTSCORE_LOG", "warn")
        .env_remove("TTSCORE_CONFIG")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttscore(dir.path(), &["frobnicate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(code(&ttscore(dir.path(), &["score", "--bogus-flag", "1"])), 2);
    assert_eq!(code(&ttscore(dir.path(), &["--help"])), 0);
}

#[test]
fn exit_codes_follow_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    // missing required option
    let o = ttscore(dir.path(), &["fit-kmeans", "--k", "2", "--out", "km.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--manifest"));
    // missing input file
    let o = ttscore(
        dir.path(),
        &["fit-kmeans", "--manifest", "nope.jsonl", "--k", "2", "--out", "km.json"],
    );
    assert_eq!(code(&o), 4);
    // malformed manifest
    std::fs::write(dir.path().join("bad.jsonl"), "{\"utt_id\": 3}\n").unwrap();
    let o = ttscore(
        dir.path(),
        &["fit-kmeans", "--manifest", "bad.jsonl", "--k", "2", "--out", "km.json"],
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("bad.jsonl:1"));
    // bad option value
    let o = ttscore(
        dir.path(),
        &[
            "perturb-f0",
            "--manifest",
            "bad.jsonl",
            "--kind",
            "sideways",
            "--out-dir",
            "x",
        ],
    );
    assert_eq!(code(&o), 3);
}

fn small_corpus(dir: &Path) {
    let o = ttscore(
        dir,
        &[
            "synth-corpus",
            "--out",
            "c",
            "--seed",
            "5",
            "--train-utts",
            "8",
            "--eval-texts",
            "3",
            "--systems",
            "2",
            "--perturb-utts",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn options_come_from_flags_then_config_then_environment() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    std::fs::write(
        dir.path().join("cfg.toml"),
        "seed = 9\n[fit-kmeans]\nk = 3\nmax_iters = 4\n",
    )
    .unwrap();
    let run = |extra: &[&str], env: &[(&str, &str)]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ttscore"));
        cmd.current_dir(dir.path()).env("TTSCORE_LOG", "warn");
        for (k, v) in env {
            cmd.env(k, v);
        }
        let mut args = vec!["fit-kmeans", "--manifest", "c/train.jsonl", "--out", "km.json"];
        args.extend(extra);
        let o = cmd.args(&args).output().unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let text = std::fs::read_to_string(dir.path().join("km.json.run.json")).unwrap();
        serde_json::from_str::<serde_json::Value>(&text).unwrap()
    };
    let r = run(&["--config", "cfg.toml"], &[("TTSCORE_K", "5")]);
    assert_eq!(r["config"]["k"], 3);
    assert_eq!(r["config"]["max-iters"], 4);
    assert_eq!(r["seed"], 9);
    let r = run(&["--config", "cfg.toml", "--k", "4", "--seed", "1"], &[]);
    assert_eq!(r["config"]["k"], 4);
    assert_eq!(r["seed"], 1);
    let r = run(&[], &[("TTSCORE_K", "6"), ("TTSCORE_SEED", "2")]);
    assert_eq!(r["config"]["k"], 6);
    assert_eq!(r["seed"], 2);
    assert_eq!(r["config"]["max-iters"], 100);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let o = Command::new(env!("CARGO_BIN_EXE_ttscore"))
        .current_dir(dir.path())
        .env("TTSCORE_K", "many")
        .args(["fit-kmeans", "--manifest", "c/train.jsonl", "--out", "km.json"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

fn scoring_fixture(dir: &Path) {
    let inv: Vec<String> = (0..5).map(|i| format!("p{i}")).collect();
    std::fs::write(dir.join("inv.txt"), inv.join("\n") + "\n").unwrap();
    let mut records = Vec::new();
    let mut tokens = Vec::new();
    for i in 0..12 {
        let ph: Vec<String> = (0..3 + i % 4).map(|j| format!("p{}", (i + j) % 5)).collect();
        let ids: Vec<u32> = (0..ph.len() as u32).map(|j| (i as u32 + j) % 6).collect();
        let mut r = EvalRecord::new(format!("u{i:02}"), format!("sys{}", i % 3));
        r.phonemes = Some(PhonemeSequence::new(ph).unwrap().symbols().to_vec());
        r.mos = Some(1.0 + (i % 5) as f64);
        r.token_path = Some("all.tok".into());
        tokens.push((r.utt_id.clone(), TokenSequence::new(ids, 6).unwrap()));
        records.push(r);
    }
    write_manifest(&dir.join("m.jsonl"), &records).unwrap();
    write_tokens(&dir.join("all.tok"), &tokens).unwrap();
    let o = ttscore(
        dir,
        &[
            "train-gen",
            "--manifest",
            "m.jsonl",
            "--vocab",
            "6",
            "--inventory",
            "inv.txt",
            "--epochs",
            "2",
            "--model-dim",
            "16",
            "--embed-dim",
            "16",
            "--ffn-dim",
            "32",
            "--out",
            "g.ttsg",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn score_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    scoring_fixture(dir.path());
    let score = |out: &str, workers: &str| {
        let o = ttscore(
            dir.path(),
            &[
                "score",
                "--manifest",
                "m.jsonl",
                "--model",
                "g.ttsg",
                "--metric",
                "ttscore-int",
                "--out",
                out,
                "--workers",
                workers,
            ],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let a = score("a.jsonl", "1");
    let b = score("b.jsonl", "1");
    let c = score("c.jsonl", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().next().unwrap().contains("\"metric\":\"ttscore_int\""));

    // a conditional model cannot produce uLM scores
    let o = ttscore(
        dir.path(),
        &[
            "score",
            "--manifest",
            "m.jsonl",
            "--model",
            "g.ttsg",
            "--metric",
            "ulm",
            "--out",
            "u.jsonl",
        ],
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn correlate_writes_one_record_per_pair_and_level() {
    let dir = tempfile::tempdir().unwrap();
    scoring_fixture(dir.path());
    let o = ttscore(
        dir.path(),
        &[
            "score",
            "--manifest",
            "m.jsonl",
            "--model",
            "g.ttsg",
            "--metric",
            "int",
            "--out",
            "s.jsonl",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = ttscore(
        dir.path(),
        &[
            "correlate",
            "--manifest",
            "m.jsonl",
            "--results",
            "s.jsonl",
            "--pair",
            "ttscore_int:mos",
            "mos:mos",
            "--out",
            "r.jsonl",
            "--table",
            "r.txt",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let reports: Vec<CorrelationReport> = std::fs::read_to_string(dir.path().join("r.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(reports.len(), 4);
    assert_eq!(reports[0].level, Level::Utterance);
    assert_eq!(reports[1].level, Level::System);
    assert_eq!(reports[0].n, 12);
    assert_eq!(reports[1].n, 3);
    assert!((reports[2].lcc - 1.0).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&o.stdout).contains("ttscore_int ~ mos"));
    assert!(dir.path().join("r.txt").exists());
    assert!(dir.path().join("r.jsonl.run.json").exists());

    let o = ttscore(
        dir.path(),
        &[
            "correlate",
            "--manifest",
            "m.jsonl",
            "--pair",
            "ttscore_int:mos",
            "--out",
            "x.jsonl",
        ],
    );
    assert_eq!(code(&o), 3, "join without results has no rows");
}

#[test]
fn metrics_and_distributions_on_the_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    for args in [
        vec![
            "wer",
            "--manifest",
            "c/eval.jsonl",
            "--hyp",
            "c/eval_hyp.jsonl",
            "--out",
            "wer.jsonl",
        ],
        vec![
            "wer",
            "--manifest",
            "c/eval.jsonl",
            "--hyp",
            "c/eval_hyp.jsonl",
            "--unit",
            "char",
            "--out",
            "cer.jsonl",
        ],
        vec!["f0-metrics", "--manifest", "c/perturb.jsonl", "--out", "f0.jsonl"],
        vec![
            "perturb-f0",
            "--manifest",
            "c/perturb.jsonl",
            "--kind",
            "flip",
            "--out-dir",
            "flipped",
        ],
        vec![
            "distributions",
            "--manifest",
            "c/perturb.jsonl",
            "--results",
            "f0.jsonl",
            "--metric",
            "f0_corr",
            "--bins",
            "4",
            "--compare",
            "orig:inverse",
            "--out",
            "dist.json",
        ],
    ] {
        let o = ttscore(dir.path(), &args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    }
    let wer = std::fs::read_to_string(dir.path().join("wer.jsonl")).unwrap();
    assert_eq!(wer.lines().count(), 9);
    let f0 = std::fs::read_to_string(dir.path().join("f0.jsonl")).unwrap();
    let inverse_corr: Vec<f64> = f0
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["metric"] == "f0_corr" && v["utt_id"].as_str().unwrap().ends_with("inverse"))
        .map(|v| v["value"].as_f64().unwrap())
        .collect();
    assert_eq!(inverse_corr.len(), 2);
    assert!(inverse_corr.iter().all(|c| (c + 1.0).abs() < 1e-9));
    let dist: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dist.json")).unwrap()).unwrap();
    assert_eq!(dist["shifts"].as_array().unwrap().len(), 1);
    assert_eq!(std::fs::read_dir(dir.path().join("flipped")).unwrap().count(), 6 + 1);
}
