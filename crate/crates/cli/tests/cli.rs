use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lwrcert_core::certify::{parse_report_csv, Category};
use lwrcert_core::nn::read_model_file;

const TINY: &str = "\
# coarse grid and a small network so the whole pipeline runs in seconds
grid.dx = 20
grid.x_max = 1000
grid.dt = 1
grid.t_max = 50
samples.count = 400
train.hidden = 8,8
train.adam_iterations = 50
train.lbfgs_iterations = 50
train.history_every = 10
sweep.v_f = 5,15,25,35,45
";

fn lwrcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lwrcert"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lwrcert(args);
    assert!(
        out.status.success(),
        "lwrcert {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fail(args: &[&str]) -> String {
    let out = lwrcert(args);
    assert!(!out.status.success(), "lwrcert {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, format!("{TINY}{extra}")).unwrap();
    path
}

fn full_run(cfg: &Path, out: &Path) {
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    for verb in ["generate", "train", "certify", "report"] {
        ok(&[verb, "--config", c, "--output", o]);
    }
}

const ARTIFACTS: &[&str] = &[
    "datasets/rho_vf5.tsed",
    "datasets/rho_vf15.tsed",
    "datasets/rho_vf25.tsed",
    "datasets/rho_vf35.tsed",
    "datasets/rho_vf45.tsed",
    "model.tsem",
    "train_report.txt",
    "certification.csv",
    "certification.txt",
    "summary.txt",
    "npl_curve.csv",
];

#[test]
fn help_documents_every_config_key() {
    let help = ok(&["--help"]);
    for key in lwrcert_core::pipeline::CONFIG_KEYS.iter().map(|(k, _)| k) {
        assert!(help.contains(key), "--help lacks {key}");
    }
    for verb in ["generate", "train", "certify", "report"] {
        assert!(help.contains(verb));
    }
}

#[test]
fn pipeline_artifacts_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    full_run(&cfg, &a);
    full_run(&cfg, &b);
    for rel in ARTIFACTS {
        let (x, y) = (fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap());
        assert!(x == y, "{rel} differs between runs");
    }
    let curve = fs::read_to_string(a.join("npl_curve.csv")).unwrap();
    let speeds: Vec<&str> = curve.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(speeds, ["5", "15", "25", "35", "45"]);

    // rerunning report alone reproduces its outputs
    let before = fs::read(a.join("summary.txt")).unwrap();
    ok(&["report", "--output", a.to_str().unwrap()]);
    assert_eq!(fs::read(a.join("summary.txt")).unwrap(), before);
}

#[test]
fn manifest_lists_every_artifact_with_its_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let run = tmp.path().join("run");
    full_run(&cfg, &run);
    let manifest = lwrcert_core::pipeline::RunManifest::load(&run).unwrap();
    for rel in ARTIFACTS {
        let bytes = fs::read(run.join(rel)).unwrap();
        assert_eq!(
            manifest.files.get(*rel),
            Some(&lwrcert_core::pipeline::sha256_hex(&bytes)),
            "{rel}"
        );
    }
    for stage in ["generate", "train", "certify", "report"] {
        assert!(manifest.wall_times.contains_key(stage), "{stage}");
    }
    assert!(manifest.notes.iter().any(|n| n.starts_with("godunov_l1")));
}

#[test]
fn seed_changes_model_but_not_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let (c0, c1) = (write_config(tmp.path(), ""), tmp.path().join("seed1.cfg"));
    fs::write(&c1, format!("{TINY}seed = 1\n")).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (cfg, out) in [(&c0, &a), (&c1, &b)] {
        ok(&[
            "generate",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
        ]);
        ok(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
        ]);
    }
    let (ma, mb) = (
        read_model_file(&a.join("model.tsem")).unwrap(),
        read_model_file(&b.join("model.tsem")).unwrap(),
    );
    assert_eq!(ma.layer_sizes(), mb.layer_sizes());
    assert_ne!(
        fs::read(a.join("model.tsem")).unwrap(),
        fs::read(b.join("model.tsem")).unwrap()
    );
}

#[test]
fn stricter_thresholds_keep_npl_column() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let run = tmp.path().join("run");
    full_run(&cfg, &run);
    let base = parse_report_csv(&fs::read_to_string(run.join("certification.csv")).unwrap()).unwrap();

    let strict = tmp.path().join("strict.cfg");
    fs::write(
        &strict,
        format!("{TINY}certify.reuse_max = 0.5\ncertify.refine_max = 1.0\n"),
    )
    .unwrap();
    ok(&[
        "certify",
        "--config",
        strict.to_str().unwrap(),
        "--output",
        run.to_str().unwrap(),
    ]);
    let s = parse_report_csv(&fs::read_to_string(run.join("certification.csv")).unwrap()).unwrap();
    assert_eq!(base.rows.len(), s.rows.len());
    for (a, b) in base.rows.iter().zip(&s.rows) {
        assert_eq!(a.npl, b.npl);
        assert!(b.category >= a.category);
    }
    let trained = s.row(25.0).unwrap();
    assert_eq!(trained.npl, 1.0);
    assert_eq!(trained.category, Category::Refine);
}

#[test]
fn discard_verdicts_are_not_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "certify.reuse_max = 0.001\ncertify.refine_max = 0.002\n");
    let run = tmp.path().join("run");
    full_run(&cfg, &run);
    let r = parse_report_csv(&fs::read_to_string(run.join("certification.csv")).unwrap()).unwrap();
    assert!(r.rows.iter().all(|row| row.category == Category::Discard));
}

#[test]
fn certify_regenerates_a_missing_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let run = tmp.path().join("run");
    full_run(&cfg, &run);
    let csv = fs::read(run.join("certification.csv")).unwrap();
    fs::remove_file(run.join("datasets/rho_vf45.tsed")).unwrap();
    let out = ok(&[
        "certify",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        run.to_str().unwrap(),
    ]);
    assert!(out.contains("regenerated missing dataset"), "{out}");
    assert_eq!(fs::read(run.join("certification.csv")).unwrap(), csv);
    let manifest = fs::read_to_string(run.join("manifest.txt")).unwrap();
    assert!(manifest.contains("note = regenerated datasets/rho_vf45.tsed"));
}

#[test]
fn invalid_config_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad_dx.cfg");
    fs::write(&cfg, "grid.dx = 3\n").unwrap();
    let err = fail(&["generate", "--config", cfg.to_str().unwrap()]);
    assert!(err.contains("does not divide"), "{err}");
    let cfg = tmp.path().join("typo.cfg");
    fs::write(&cfg, "grid.ddx = 2\n").unwrap();
    let err = fail(&["generate", "--config", cfg.to_str().unwrap()]);
    assert!(err.contains("line 1") && err.contains("grid.ddx"), "{err}");
}

#[test]
fn unwritable_output_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let err = fail(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        blocker.join("run").to_str().unwrap(),
    ]);
    assert!(err.contains("I/O error"), "{err}");
}

#[test]
fn truncated_dataset_names_missing_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let run = tmp.path().join("run");
    ok(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        run.to_str().unwrap(),
    ]);
    let path = run.join("datasets/rho_vf25.tsed");
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();
    let err = fail(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        run.to_str().unwrap(),
    ]);
    assert!(
        err.contains("format error") && err.contains(&format!("{})", bytes.len())),
        "{err}"
    );
}

#[test]
fn report_without_manifest_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let err = fail(&["report", "--output", tmp.path().to_str().unwrap()]);
    assert!(err.contains("no manifest"), "{err}");
}

#[test]
fn config_verb_prints_effective_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let text = ok(&["config", "--config", cfg.to_str().unwrap(), "--output", "elsewhere"]);
    let parsed = lwrcert_core::pipeline::RunConfig::parse(&text).unwrap();
    assert_eq!(parsed.grid.dx(), 20.0);
    assert_eq!(parsed.output_dir, PathBuf::from("elsewhere"));
}

#[test]
fn export_writes_dataset_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let run = tmp.path().join("run");
    ok(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        run.to_str().unwrap(),
    ]);
    let csv = ok(&["export", run.join("datasets/rho_vf25.tsed").to_str().unwrap()]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x,t,rho");
    assert_eq!(lines.len(), 1 + 51 * 51);
    assert_eq!(lines[1], "0,0,0.13");
}
