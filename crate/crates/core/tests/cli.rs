use curvreal::geometry::constancy_degree;
use curvreal::io::{from_text, to_line, MetricJetDocument, ModelDocument, ReportDocument, SolutionDocument};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curvreal"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let mut all = vec!["gen"];
    all.extend_from_slice(args);
    let p = path.to_str().unwrap().to_string();
    all.extend_from_slice(&["--out", &p]);
    let out = run(&all);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

fn reports(out: &Output) -> Vec<ReportDocument> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| from_text(l).unwrap()).collect()
}

fn verdict(rep: &ReportDocument, name: &str) -> bool {
    rep.verdicts.iter().find(|v| v.name == name).unwrap_or_else(|| panic!("no verdict {name}")).pass
}

#[test]
fn gen_is_deterministic() {
    let a = run(&["gen", "--dim", "4", "--signature", "2,2", "--kind", "hermitian", "--seed", "9"]);
    let b = run(&["gen", "--dim", "4", "--signature", "2,2", "--kind", "hermitian", "--seed", "9"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["gen", "--dim", "4", "--signature", "2,2", "--kind", "hermitian", "--seed", "10"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn gen_rejects_bad_requests() {
    for args in [
        &["gen", "--dim", "3", "--signature", "1,2", "--kind", "hermitian"][..],
        &["gen", "--dim", "3", "--signature", "1,1"],
        &["gen", "--dim", "6", "--signature", "3,3", "--kind", "hyper-para"],
        &["gen", "--dim", "4", "--kind", "nope"],
    ] {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn document_round_trip_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "m.json", &["--dim", "8", "--signature", "4,4", "--kind", "hyper-para", "--seed", "3"]);
    let text = fs::read_to_string(&p).unwrap();
    let doc: ModelDocument = from_text(&text).unwrap();
    let (model, structure) = doc.to_model().unwrap();
    let again = ModelDocument::encode(&model, &structure, doc.meta.clone());
    assert_eq!(to_line(&again), text);
}

#[test]
fn check_accepts_generated_models() {
    let dir = TempDir::new().unwrap();
    let a = gen(dir.path(), "a.json", &["--dim", "4", "--signature", "0,4", "--kind", "hermitian", "--seed", "1"]);
    let b = gen(dir.path(), "b.json", &["--dim", "4", "--signature", "2,2", "--kind", "para", "--seed", "2"]);
    let c = gen(dir.path(), "c.json", &["--dim", "3", "--signature", "1,2", "--seed", "3"]);
    let out = run(&["check", &a, &b, &c, "--jobs", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let reps = reports(&out);
    assert_eq!(reps.len(), 3);
    assert!(reps[0].input.ends_with("a.json") && reps[2].input.ends_with("c.json"));
    assert!(reps.iter().all(|r| r.passed()));
}

#[test]
fn check_reports_pair_symmetry_conflict() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.json");
    let doc = r#"{"schema":1,"kind":"plain","dim":3,"eps":[["1","0","0"],["0","1","0"],["0","0","1"]],"A":{"1,2,1,2":"1","1,2,1,3":"2","1,3,1,2":"3"}}"#;
    fs::write(&p, doc).unwrap();
    let out = run(&["check", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let rep = &reports(&out)[0];
    assert!(!verdict(rep, "pair-symmetry"));
    let detail = &rep.verdicts.iter().find(|v| v.name == "pair-symmetry").unwrap().detail;
    assert!(!detail.is_empty());
}

#[test]
fn check_reports_bad_structure() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("j.json");
    let doc = r#"{"schema":1,"kind":"hermitian","dim":2,"eps":[["1","0"],["0","1"]],"A":{},"J":[["1","0"],["0","1"]]}"#;
    fs::write(&p, doc).unwrap();
    let out = run(&["check", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!verdict(&reports(&out)[0], "structure"));
}

#[test]
fn parse_errors_are_located() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("broken.json");
    fs::write(&p, "{\"schema\":1,\n\"kind\": plain}").unwrap();
    let out = run(&["check", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    let missing = run(&["check", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn realize_flat_model_gives_constant_metric() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("flat.json");
    fs::write(&p, r#"{"schema":1,"kind":"plain","dim":3,"eps":[["-1","0","0"],["0","1","0"],["0","0","1"]],"A":{}}"#).unwrap();
    let out_path = dir.path().join("g.json");
    let out = run(&["realize", p.to_str().unwrap(), "--order", "3", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: MetricJetDocument = from_text(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let (g, _) = doc.decode().unwrap();
    assert_eq!(doc.order, 3);
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(constancy_degree(g.get(i, j)), 3);
        }
    }
}

#[test]
fn realize_conformally_flat_mode() {
    let dir = TempDir::new().unwrap();
    let cf = gen(dir.path(), "cf.json", &["--dim", "4", "--signature", "1,3", "--conformally-flat", "--seed", "4"]);
    let generic = gen(dir.path(), "gen.json", &["--dim", "4", "--signature", "1,3", "--seed", "4"]);
    let out = run(&["realize", &cf, "--mode", "conformally-flat", "--order", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rep = &reports(&out)[0];
    assert!(verdict(rep, "weyl-flat") && verdict(rep, "point-curvature"));
    let bad = run(&["realize", &generic, "--mode", "conformally-flat", "--order", "3"]);
    assert_eq!(bad.status.code(), Some(1));
    let small = run(&["realize", &cf, "--order", "1"]);
    assert_eq!(small.status.code(), Some(2));
}

#[test]
fn realize_structured_model_writes_fields() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "h.json", &["--dim", "4", "--signature", "2,2", "--kind", "para", "--seed", "6"]);
    let out_path = dir.path().join("g.json");
    let out = run(&["realize", &p, "--order", "3", "--out", out_path.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: MetricJetDocument = from_text(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc.kind, "para");
    assert!(doc.j.is_some());
}

#[test]
fn solve_flat_conformal_is_trivial() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("flat.json");
    fs::write(&p, r#"{"schema":1,"kind":"plain","dim":3,"eps":[["1","0","0"],["0","1","0"],["0","0","1"]],"A":{}}"#).unwrap();
    let out_path = dir.path().join("s.json");
    let out = run(&["solve", p.to_str().unwrap(), "--target", "tau", "--order", "4", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: SolutionDocument = from_text(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let (unknowns, _, _) = doc.decode().unwrap();
    assert!(unknowns.values().all(|s| s.is_zero()));
}

#[test]
fn solve_hermitian_batch_with_report() {
    let dir = TempDir::new().unwrap();
    let a = gen(dir.path(), "a.json", &["--dim", "4", "--signature", "0,4", "--kind", "hermitian", "--seed", "11"]);
    let b = gen(dir.path(), "b.json", &["--dim", "4", "--signature", "2,2", "--kind", "para", "--seed", "12"]);
    let outdir = dir.path().join("out");
    let report = dir.path().join("report.jsonl");
    let out = run(&[
        "solve", &a, &b, "--target", "tau-taustar", "--order", "4", "--jobs", "2", "--quiet",
        "--out", outdir.to_str().unwrap(), "--report", report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", fs::read_to_string(&report).unwrap_or_default());
    assert!(outdir.join("a.out.json").exists() && outdir.join("b.out.json").exists());
    let text = fs::read_to_string(&report).unwrap();
    let reps: Vec<ReportDocument> = text.lines().map(|l| from_text(l).unwrap()).collect();
    assert_eq!(reps.len(), 2);
    for rep in &reps {
        for name in ["tau-constancy", "taustar-constancy", "two-jet-vanishing", "cauchy-data", "point-model", "linearization"] {
            assert!(verdict(rep, name), "{name}");
        }
        assert!(!rep.diagnostics.determinants.is_empty());
    }
}

#[test]
fn solve_rejects_unsupported_targets() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "p.json", &["--dim", "3", "--signature", "0,3", "--seed", "1"]);
    let out = run(&["solve", &p, "--target", "tau-taustar"]);
    assert_eq!(out.status.code(), Some(2));
}
