use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn toy(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy").join(name)
}

fn itermem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itermem")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = itermem(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn value(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
}

#[test]
fn bundled_toy_data_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--seed", "7", "synth", "--out-dir", s(dir.path())]);
    for f in ["sentences.tsv", "gold.tsv", "openie4.tsv", "clausie.tsv", "rnnoie.tsv"] {
        assert_eq!(
            fs::read_to_string(dir.path().join(f)).unwrap(),
            fs::read_to_string(toy(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let cfg = d("pipeline.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"paths": {{"sentences": "{}", "gold": "{}"}},
                "model": {{"embed_dim": 8, "hidden_dim": 8, "attn_dim": 8}},
                "train": {{"epochs": 2}},
                "decode": {{"max_iters": 3, "max_len": 10}}}}"#,
            s(&toy("sentences.tsv")),
            s(&toy("gold.tsv"))
        ),
    )
    .unwrap();
    let c = s(&cfg);
    let src = |n: &str| format!("{n}={}", s(&toy(&format!("{n}.tsv"))));
    let out = ok(&[
        "--config", c, "ingest", "--source", &src("openie4"), "--source", &src("clausie"),
        "--source", &src("rnnoie"), "--out", s(&d("pooled.tsv")), "--bootstrap-out", s(&d("boot.tsv")),
    ]);
    assert!(out.contains("source openie4"));
    assert!(out.contains("duplicates removed"));
    ok(&[
        "--config", c, "score-filter", "--pooled", s(&d("pooled.tsv")), "--out", s(&d("agg.tsv")),
        "--report", s(&d("report.jsonl")),
    ]);
    ok(&["--config", c, "build-train", "--extractions", s(&d("agg.tsv")), "--out", s(&d("train.tsv"))]);
    let out = ok(&[
        "--config", c, "train", "--train", s(&d("train.tsv")), "--checkpoint-out", s(&d("model.ckpt")),
        "--loss-out", s(&d("loss.csv")),
    ]);
    assert!(out.contains("epoch 2 loss"));
    assert_eq!(fs::read_to_string(d("loss.csv")).unwrap().lines().count(), 4);
    ok(&["--config", c, "decode", "--checkpoint", s(&d("model.ckpt")), "--out", s(&d("pred.tsv"))]);
    let out = ok(&[
        "--config", c, "eval", "--pred", s(&d("pred.tsv")), "--curve-out", s(&d("curve.csv")),
        "--svg-out", s(&d("curve.svg")),
    ]);
    for k in ["optimal_f1", "auc", "last_f1"] {
        assert!((0.0..=1.0).contains(&value(&out, k)));
    }
    assert!(fs::read_to_string(d("curve.svg")).unwrap().starts_with("<svg"));
    ok(&["--config", c, "pr-curve", "--pred", s(&d("pred.tsv")), "--out", s(&d("curve2.csv"))]);
    let out = ok(&["redundancy", "--pred", s(&d("agg.tsv"))]);
    assert!(value(&out, "mno") >= 1.0);
    ok(&[
        "--config", c, "export-attention", "--checkpoint", s(&d("model.ckpt")), "--id", "s0001",
        "--out", s(&d("att.csv")),
    ]);
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_path(d("att.csv")).unwrap();
    let widths: Vec<usize> = rd.records().map(|r| r.unwrap().len()).collect();
    assert!(widths.len() >= 2 && widths.iter().all(|&w| w == widths[0]));
}

#[test]
fn missing_file_exits_two_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    let out = itermem(&[
        "ingest", "--sentences", s(&toy("sentences.tsv")), "--source", &format!("a={}", s(&missing)),
        "--out", s(&dir.path().join("o.tsv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
    let out = itermem(&["decode", "--checkpoint", s(&missing), "--sentences", s(&toy("sentences.tsv")), "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
}

#[test]
fn gold_as_predictions_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.tsv");
    let lines: Vec<String> = fs::read_to_string(toy("gold.tsv"))
        .unwrap()
        .lines()
        .map(|l| {
            let (id, rest) = l.split_once('\t').unwrap();
            format!("{id}\t1.0\t{rest}")
        })
        .collect();
    fs::write(&pred, lines.join("\n") + "\n").unwrap();
    let out = ok(&["eval", "--gold", s(&toy("gold.tsv")), "--pred", s(&pred)]);
    assert_eq!(value(&out, "optimal_f1"), 1.0);
    assert_eq!(value(&out, "last_f1"), 1.0);
}

fn pooled(dir: &Path) -> PathBuf {
    let out = dir.join("pooled.tsv");
    ok(&[
        "ingest", "--sentences", s(&toy("sentences.tsv")),
        "--source", &format!("openie4={}", s(&toy("openie4.tsv"))),
        "--source", &format!("clausie={}", s(&toy("clausie.tsv"))),
        "--out", s(&out),
    ]);
    out
}

#[test]
fn rank_filter_is_deterministic_and_reports_objective() {
    let dir = tempfile::tempdir().unwrap();
    let p = pooled(dir.path());
    let run = |tag: &str| {
        let out = dir.path().join(format!("agg{tag}.tsv"));
        let rep = dir.path().join(format!("rep{tag}.jsonl"));
        ok(&[
            "score-filter", "--sentences", s(&toy("sentences.tsv")), "--pooled", s(&p), "--scorer", "rank",
            "--out", s(&out), "--report", s(&rep),
        ]);
        (fs::read(&out).unwrap(), fs::read_to_string(&rep).unwrap())
    };
    let (a, ra) = run("a");
    let (b, rb) = run("b");
    assert_eq!(a, b);
    assert_eq!(ra, rb);

    // objective = sum of selected scores minus pairwise ROUGE-2 of the selected tuples
    let agg = String::from_utf8(a).unwrap();
    let mut by_sentence: std::collections::BTreeMap<String, Vec<(f64, Vec<String>)>> = Default::default();
    for l in agg.lines() {
        let f: Vec<&str> = l.split('\t').collect();
        let words = f[2..5].iter().flat_map(|x| x.split_whitespace()).map(str::to_string).collect();
        by_sentence.entry(f[0].into()).or_default().push((f[1].parse().unwrap(), words));
    }
    for line in ra.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let id = v["sentence"].as_str().unwrap();
        let sel = by_sentence.get(id).cloned().unwrap_or_default();
        assert_eq!(v["selected"].as_u64().unwrap() as usize, sel.len());
        let mut obj: f64 = sel.iter().map(|x| x.0).sum();
        for i in 0..sel.len() {
            for j in i + 1..sel.len() {
                obj -= bigram_f1(&sel[i].1, &sel[j].1);
            }
        }
        // scores are printed with limited precision
        assert!((obj - v["objective"].as_f64().unwrap()).abs() < 1e-4, "{id}");
    }
}

/// Bigram F1 with clipped counts; unigram F1 when either side has under two words.
fn bigram_f1(a: &[String], b: &[String]) -> f64 {
    let grams = |x: &[String]| -> Vec<String> {
        if a.len() < 2 || b.len() < 2 {
            x.to_vec()
        } else {
            x.windows(2).map(|w| w.join(" ")).collect()
        }
    };
    let (ga, mut gb) = (grams(a), grams(b));
    let (na, nb) = (ga.len() as f64, gb.len() as f64);
    let mut m = 0.0;
    for g in ga {
        if let Some(i) = gb.iter().position(|x| *x == g) {
            gb.remove(i);
            m += 1.0;
        }
    }
    if m == 0.0 {
        return 0.0;
    }
    let (p, r) = (m / na, m / nb);
    2.0 * p * r / (p + r)
}

#[test]
fn invalid_config_exits_two_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"train": {"learning_rate": -1}, "decode": {"max_len": 0}}"#).unwrap();
    let out = itermem(&["--config", s(&cfg), "redundancy", "--pred", s(&toy("openie4.tsv"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("train.learning_rate") && err.contains("decode.max_len"), "{err}");
    fs::write(&cfg, r#"{"seeds": 3}"#).unwrap();
    let out = itermem(&["--config", s(&cfg), "redundancy", "--pred", s(&toy("openie4.tsv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn no_confidence_source_keeps_file_order() {
    let dir = tempfile::tempdir().unwrap();
    let sents = dir.path().join("s.tsv");
    fs::write(&sents, "s1\talice met bob and bob met carol .\n").unwrap();
    let src = dir.path().join("x.tsv");
    fs::write(
        &src,
        "s1\t0.1\talice\tmet\tbob\ns1\t0.9\tbob\tmet\tcarol\ns1\t0.5\tcarol\tmet\talice\n",
    )
    .unwrap();
    let order = |extra: &[&str]| {
        let out = dir.path().join("boot.tsv");
        let pooled = dir.path().join("p.tsv");
        let mut args = vec![
            "ingest", "--sentences", s(&sents), "--out", s(&pooled),
            "--bootstrap-out", s(&out),
        ];
        let spec = format!("x={}", s(&src));
        args.extend(["--source", spec.as_str()]);
        args.extend(extra);
        ok(&args);
        fs::read_to_string(out)
            .unwrap()
            .lines()
            .map(|l| l.split('\t').nth(2).unwrap().to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(order(&[]), ["bob", "carol", "alice"]);
    assert_eq!(order(&["--no-confidence", "x"]), ["alice", "bob", "carol"]);
}
