use std::path::Path;
use std::process::{Command, Output};

fn run(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nesy-rpm"))
        .args(args)
        .env("RPM_ARTIFACTS", root)
        .output()
        .expect("binary runs")
}

fn ok(root: &Path, args: &[&str]) -> String {
    let out = run(root, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn quick_config(dir: &Path) -> String {
    let path = dir.join("quick.cfg");
    std::fs::write(
        &path,
        "# small settings for tests\nae_epochs = 4\nae_panels = 200\nrules_epochs = 2\nrules_hidden = 16\n\
         rules_synth_budget = 40\nimg_epochs = 1\nimg_panels = 64\nraster_size = 32\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn gen_is_deterministic_and_split() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(a.path(), &["gen", "center", "100", "--seed", "7"]);
    ok(b.path(), &["gen", "center", "100", "--seed", "7"]);
    for (name, n) in [("train", 60), ("val", 20), ("test", 20)] {
        let fa = std::fs::read(a.path().join("center").join(format!("{name}.jsonl"))).unwrap();
        let fb = std::fs::read(b.path().join("center").join(format!("{name}.jsonl"))).unwrap();
        assert_eq!(fa, fb);
        assert_eq!(fa.iter().filter(|&&c| c == b'\n').count(), n + 1);
    }
}

#[test]
fn usage_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["gen", "hexagonal"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["train", "everything", "center"]).status.code(), Some(2));
    assert_eq!(
        run(d.path(), &["eval", "x.jsonl", "--mode", "z"]).status.code(),
        Some(2)
    );
}

#[test]
fn rules_before_autoencoder_fails() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["gen", "center", "20"]);
    let out = run(d.path(), &["train", "rules", "center"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing prerequisite"));
}

#[test]
fn render_writes_panels_and_sheet() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["gen", "out_in_grid", "10"]);
    let data = d.path().join("out_in_grid").join("test.jsonl");
    ok(d.path(), &["render", data.to_str().unwrap(), "--range", "0..2"]);
    let dir = d.path().join("render").join("out_in_grid").join("p00008");
    let files: Vec<_> = std::fs::read_dir(&dir).unwrap().collect();
    assert_eq!(files.len(), 17);
    let sheet = std::fs::read(dir.join("sheet.pgm")).unwrap();
    assert!(sheet.starts_with(b"P5\n"));
    let out = run(d.path(), &["render", data.to_str().unwrap(), "--range", "1..5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_eval_report_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let root = d.path();
    let cfg = quick_config(root);
    ok(root, &["gen", "center", "300", "--seed", "3"]);
    ok(root, &["--config", &cfg, "train", "ae", "center"]);
    let rules = ok(root, &["--config", &cfg, "train", "rules", "center"]);
    assert!(rules.contains("nets with F1 >= 0.90"));
    ok(root, &["--config", &cfg, "train", "img", "center"]);

    let manifest = std::fs::read_to_string(root.join("center/rules/manifest.json")).unwrap();
    assert_eq!(manifest.matches("\"file\"").count(), 11);
    let weights = std::fs::read(root.join("center/rules/c0-type-constant.bin")).unwrap();
    assert!(weights.starts_with(b"NRPW"));

    let test = root.join("center/test.jsonl");
    let test = test.to_str().unwrap();
    let first = ok(root, &["--config", &cfg, "eval", test, "--mode", "c,a,b"]);
    let csv = std::fs::read(root.join("center/reports/eval-c.csv")).unwrap();
    let second = ok(root, &["--config", &cfg, "eval", test, "--mode", "c,a,b"]);
    assert_eq!(first, second);
    assert_eq!(csv, std::fs::read(root.join("center/reports/eval-c.csv")).unwrap());
    assert!(first.contains("c: Symbolic/Neural"));
    assert!(first.contains("A: Image/Neural"));

    let solved = ok(root, &["--config", &cfg, "solve", test]);
    assert_eq!(solved.lines().count(), 61);

    let table = ok(root, &["report"]);
    assert!(table.contains("Center"));
    assert!(root.join("report.csv").exists());

    // Models of one configuration cannot evaluate another.
    ok(root, &["gen", "left_right", "10"]);
    for stage in ["ae", "rules"] {
        let src = root.join("center").join(stage);
        let dst = root.join("left_right").join(stage);
        std::fs::create_dir_all(&dst).unwrap();
        for f in std::fs::read_dir(&src).unwrap() {
            let f = f.unwrap();
            std::fs::copy(f.path(), dst.join(f.file_name())).unwrap();
        }
    }
    let lr = root.join("left_right/test.jsonl");
    let out = run(root, &["eval", lr.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
