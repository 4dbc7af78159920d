use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kgresearch_core::curate::ebm::{render_review_xml, ReviewVersion};
use kgresearch_core::curate::mcq::read_items;
use kgresearch_core::federation::mock::MockServer;
use serde_json::{json, Value};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(String, String)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kgresearch"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("spawn kgresearch");
    assert!(
        out.status.success(),
        "kgresearch {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pathway_parse_writes_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap.json");
    let kgml = fixtures().join("kgml/hsa90001.xml");
    run(&["pathway", "parse", "--kgml", s(&kgml), "--out", s(&out)]);
    let snap: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(snap["pathway_id"], "path:hsa90001");
    assert_eq!(snap["reactions"].as_array().unwrap().len(), 4);
    assert!(snap["endpoints"].as_array().unwrap().iter().any(|e| e == "Inflammation"));
}

#[test]
fn curators_write_valid_items() {
    let dir = tempfile::tempdir().unwrap();
    let kgml = fixtures().join("kgml");
    let cases: Vec<(&str, Vec<String>)> = vec![
        ("target.jsonl", vec!["curate".into(), "target-id".into(), "--kgml-dir".into(), s(&kgml).into(), "--seed".into(), "3".into()]),
        ("flux.jsonl", vec!["curate".into(), "flux".into(), "--kgml-dir".into(), s(&kgml).into(), "--target".into(), "HK1".into()]),
        (
            "sample.jsonl",
            vec!["curate".into(), "sample-size".into(), "--truths".into(), s(&fixtures().join("truths.jsonl")).into()],
        ),
        (
            "surrogate.jsonl",
            vec![
                "curate".into(),
                "surrogate".into(),
                "--drugs".into(),
                s(&fixtures().join("drugs.txt")).into(),
                "--kgml-dir".into(),
                s(&kgml).into(),
            ],
        ),
    ];
    for (file, mut args) in cases {
        let out = dir.path().join(file);
        args.extend(["--out".into(), s(&out).into()]);
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        run(&args);
        let items = read_items(&out).unwrap();
        assert!(!items.is_empty(), "{file} is empty");
        for item in &items {
            item.validate().unwrap();
            assert!(!item.answers.is_empty());
        }
    }
    let sample = read_items(&dir.path().join("sample.jsonl")).unwrap();
    assert_eq!(sample.len(), 3);
    assert_eq!(sample[0].answer_texts(), vec!["268"]);
}

#[test]
fn curation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let kgml = fixtures().join("kgml");
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        run(&["curate", "target-id", "--kgml-dir", s(&kgml), "--seed", "9", "--out", s(out)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn regimen_corpus_to_items() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = json!({"trials": [
        {"trial_id": "M1", "population": "solid tumors", "drugs": [{"name": "Kinastat", "route": "oral"}],
         "dose_levels": [{"level": 1, "doses": {"Kinastat": 200.0}, "dlts": [{"term": "Rash", "count": 1}]}],
         "mtd": {"Kinastat": 200.0}},
        {"trial_id": "C1", "population": "solid tumors",
         "drugs": [{"name": "Kinastat", "route": "oral"}, {"name": "Novelimab", "route": "intravenous"}],
         "dose_levels": [{"level": 1, "doses": {"Kinastat": 100.0, "Novelimab": 3.0}, "dlts": [{"term": "Colitis", "count": 1}]}]}
    ]});
    let path = dir.path().join("corpus.json");
    fs::write(&path, corpus.to_string()).unwrap();
    let out = dir.path().join("regimen.jsonl");
    run(&["curate", "regimen", "--corpus", s(&path), "--out", s(&out)]);
    let items = read_items(&out).unwrap();
    assert_eq!(items.len(), 1);
    assert_eq!(items[0].metadata["design_class"], "IV");
    assert_eq!(items[0].answers.len(), 1);
}

#[test]
fn ebm_curate_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let reviews = dir.path().join("reviews");
    fs::create_dir_all(&reviews).unwrap();
    for (v, included) in [(1u32, vec![11u64, 12]), (2, vec![11, 12, 13, 14])] {
        let review = ReviewVersion {
            base_doi: "10.1002/14651858.CD900001".into(),
            version_doi: format!("10.1002/14651858.CD900001.pub{v}"),
            version: v,
            title: "Exercise for chronic low back pain".into(),
            objectives: "To assess exercise therapy.".into(),
            included: included.into_iter().collect(),
            ..Default::default()
        };
        fs::write(reviews.join(format!("v{v}.xml")), render_review_xml(&review)).unwrap();
    }
    let tasks = dir.path().join("gap_tasks.jsonl");
    run(&["curate", "ebm", "--reviews", s(&reviews), "--out", s(&tasks)]);
    let task: Value = serde_json::from_str(fs::read_to_string(&tasks).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(task["truth"], json!([13, 14]));

    let preds = dir.path().join("preds.jsonl");
    let line = json!({"base_doi": "10.1002/14651858.CD900001", "ranked": [99, 14, 50]});
    fs::write(&preds, format!("{line}\n")).unwrap();
    let out = run(&["score", "ebm", "--tasks", s(&tasks), "--predictions", s(&preds)]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let summary: Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
    assert_eq!(summary["tasks"], 1);
    assert_eq!(summary["mean_recall"], 0.5);
}

#[test]
fn bench_prepare_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("litqa.jsonl");
    let records: String = (0..40)
        .map(|i| {
            json!({"id": format!("q{i:02}"), "question": format!("Question {i}?"), "ideal": "yes",
                   "distractors": ["no", "maybe"]})
            .to_string()
                + "\n"
        })
        .collect();
    fs::write(&input, records).unwrap();
    let items = dir.path().join("items.jsonl");
    run(&["bench", "prepare", "--benchmark", "litqa2", "--in", s(&input), "--out", s(&items), "--seed", "1"]);
    let prepared = kgresearch_core::bench::read_items(&items).unwrap();
    assert_eq!(prepared.len(), 25);

    let preds: String = prepared
        .iter()
        .map(|it| {
            let answer = match &it.answer {
                kgresearch_core::bench::AnswerKey::Single { answer } => answer.clone(),
                other => panic!("unexpected key {other:?}"),
            };
            json!({"id": it.id, "prediction": answer}).to_string() + "\n"
        })
        .collect();
    let pred_path = dir.path().join("preds.jsonl");
    fs::write(&pred_path, preds).unwrap();
    let report = dir.path().join("report");
    run(&["bench", "score", "--items", s(&items), "--predictions", s(&pred_path), "--report", s(&report)]);
    assert!(report.join("report.jsonl").is_file());
    assert!(report.join("report.md").is_file());
}

fn mock_env(server: &MockServer) -> Vec<(String, String)> {
    ["biothings", "kegg", "pubtator", "pubmed"]
        .iter()
        .map(|id| (format!("KGRESEARCH_ENDPOINT_{}", id.to_uppercase()), format!("{}/{id}", server.url())))
        .collect()
}

fn federation_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/federation/routes.json")
}

#[test]
fn fetch_against_mock_server() {
    let server = MockServer::from_fixture_file(&federation_fixture()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_env(
        &["fetch", "--kind", "gene", "--query", "TP53", "--sources", "biothings,kegg,pubtator", "--out", s(dir.path())],
        &mock_env(&server),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("TP53"), "{stdout}");
    let exts: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path().extension().unwrap().to_string_lossy().into_owned())
        .collect();
    for ext in ["json", "csv", "md"] {
        assert!(exts.iter().any(|e| e == ext), "no .{ext} output");
    }
}

#[test]
fn research_run_writes_workspace() {
    let server = MockServer::from_fixture_file(&federation_fixture()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    run_env(
        &[
            "research",
            "run",
            "--query",
            "Which genes drive TP53 signaling in cancer?",
            "--bfrs-budget",
            "2",
            "--dfrs-budget",
            "1",
            "--kbs",
            "biothings,kegg,pubtator,pubmed",
            "--workspace",
            s(&ws),
        ],
        &mock_env(&server),
    );
    for f in ["transcript.jsonl", "manifest.json", "answer.md", "graph.json"] {
        assert!(ws.join(f).is_file(), "missing {f}");
    }
    let export = dir.path().join("graph_export.json");
    run(&["graph", "export", "--graph", s(&ws), "--out", s(&export)]);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&export).unwrap()).unwrap();
    for key in ["entities", "relations", "observations", "conflict_groups"] {
        assert!(doc[key].is_array(), "export lacks {key}");
    }
    let stats = run(&["graph", "stats", "--graph", s(&ws.join("graph.json"))]);
    let stats: Value = serde_json::from_slice(&stats.stdout).unwrap();
    assert_eq!(stats["entities"], doc["entities"].as_array().unwrap().len());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_kgresearch"))
        .args(["bench", "prepare", "--benchmark", "nope", "--in", "x", "--out", "y"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown benchmark"));
    let out = Command::new(env!("CARGO_BIN_EXE_kgresearch"))
        .args(["research", "run", "--query", "q", "--oracle", "ftp://x", "--workspace", "/tmp/unused"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
