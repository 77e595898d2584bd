use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn taxonomy(name: &str) -> String {
    root()
        .join("fixtures/taxonomy")
        .join(format!("{name}.toml"))
        .display()
        .to_string()
}

fn profile(name: &str) -> String {
    root()
        .join("fixtures/profiles")
        .join(format!("{name}.toml"))
        .display()
        .to_string()
}

fn run(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evalcards"))
        .args(args)
        .current_dir(cwd)
        .env("EVALCARDS_NO_COLOR", "1")
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Synthesizes a small Visus dataset into `dir/data` and returns the paths.
fn small_dataset(dir: &Path) -> (String, String) {
    let o = run(
        dir,
        &[
            "synth",
            "--taxonomy",
            &taxonomy("visus"),
            "--profile",
            &profile("linear"),
            "--out",
            "data",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    ("data/logs".into(), "data/surveys".into())
}

#[test]
fn validate_reports_terminal_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (name, n) in [("visus", 11), ("distil", 6), ("tworavens", 18)] {
        let o = run(dir.path(), &["taxonomy", "validate", &taxonomy(name)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(
            stdout(&o).contains(&format!("{n} terminal components")),
            "{}",
            stdout(&o)
        );
    }
}

#[test]
fn validate_names_a_missing_functionality() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(taxonomy("visus")).unwrap();
    let cut = text.replace("[l2.compare_models]\naction = \"apply\"\n", "");
    assert_ne!(cut, text);
    std::fs::write(dir.path().join("cut.toml"), cut).unwrap();
    let o = run(dir.path(), &["taxonomy", "validate", "cut.toml"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("compare_models"), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("cut.toml:"),
        "diagnostics are anchored to the file"
    );
}

#[test]
fn skeleton_needs_actions_before_it_validates() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&run(dir.path(), &["taxonomy", "init", "mine.toml"])),
        0
    );
    let skeleton = std::fs::read_to_string(dir.path().join("mine.toml")).unwrap();
    for l2 in ["open_dataset", "specify_problem", "export_model"] {
        assert!(skeleton.contains(l2));
    }
    let o = run(dir.path(), &["taxonomy", "validate", "mine.toml"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no action assigned"));
    // init refuses to clobber without --force.
    assert_eq!(
        code(&run(dir.path(), &["taxonomy", "init", "mine.toml"])),
        2
    );
    assert_eq!(
        code(&run(
            dir.path(),
            &["taxonomy", "init", "mine.toml", "--force"]
        )),
        0
    );
}

#[test]
fn analyze_without_surveys_marks_attitudes_missing() {
    let dir = tempfile::tempdir().unwrap();
    let (logs, _) = small_dataset(dir.path());
    let o = run(
        dir.path(),
        &[
            "analyze",
            "--taxonomy",
            &taxonomy("visus"),
            "--logs",
            &logs,
            "--out",
            "v.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(
        stdout(&o).contains("24 sessions, 12 users, 11 components"),
        "{}",
        stdout(&o)
    );
    let export: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    let rows = export["attitudes"]["components"].as_array().unwrap();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r["no_data"] == true));
    assert!(dir.path().join("v.json.run.json").exists());
}

#[test]
fn analyze_reports_user_errors_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let o = run(
        dir.path(),
        &[
            "analyze",
            "--taxonomy",
            &taxonomy("visus"),
            "--logs",
            "empty",
            "--out",
            "v.json",
        ],
    );
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("v.json").exists());

    // Logs recorded against another system's taxonomy.
    let (logs, surveys) = small_dataset(dir.path());
    let args = [
        "analyze",
        "--taxonomy",
        &taxonomy("distil"),
        "--logs",
        &logs,
        "--surveys",
        &surveys,
        "--out",
        "d.json",
    ];
    let o = run(dir.path(), &args);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains(".jsonl:"), "{}", stderr(&o));
}

#[test]
fn outputs_are_never_overwritten_silently() {
    let dir = tempfile::tempdir().unwrap();
    let (logs, surveys) = small_dataset(dir.path());
    let args = [
        "analyze",
        "--taxonomy",
        &taxonomy("visus"),
        "--logs",
        &logs,
        "--surveys",
        &surveys,
        "--out",
        "v.json",
    ];
    assert_eq!(code(&run(dir.path(), &args)), 0);
    let first = std::fs::read(dir.path().join("v.json")).unwrap();
    let o = run(dir.path(), &args);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&run(dir.path(), &forced)), 0);
    assert_eq!(std::fs::read(dir.path().join("v.json")).unwrap(), first);

    let synth = [
        "synth",
        "--taxonomy",
        &taxonomy("visus"),
        "--profile",
        &profile("linear"),
        "--out",
        "data",
    ];
    assert_eq!(code(&run(dir.path(), &synth)), 2);
}

#[test]
fn render_and_compare_preconditions() {
    let dir = tempfile::tempdir().unwrap();
    let (logs, surveys) = small_dataset(dir.path());
    let args = [
        "analyze",
        "--taxonomy",
        &taxonomy("visus"),
        "--logs",
        &logs,
        "--surveys",
        &surveys,
        "--out",
        "v.json",
    ];
    assert_eq!(code(&run(dir.path(), &args)), 0);

    let o = run(dir.path(), &["render", "v.json", "--out", "reports"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let html = std::fs::read_to_string(dir.path().join("reports/visus.html")).unwrap();
    assert_eq!(html.matches("<section class=\"card").count(), 8);

    let o = run(dir.path(), &["compare", "v.json", "--out", "cmp.html"]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("cmp.html").exists());

    let mut text = std::fs::read_to_string(dir.path().join("v.json")).unwrap();
    text = text.replacen("\"steps\": 1", "\"steps\": 2", 1);
    std::fs::write(dir.path().join("tampered.json"), text).unwrap();
    let o = run(dir.path(), &["render", "tampered.json", "--out", "t"]);
    assert_eq!(code(&o), 2);

    let o = run(dir.path(), &["render", "missing.json", "--out", "t"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn synth_rejects_a_pair_outside_the_model() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "archetype = \"iterative\"\nn_users = 2\ntasks = [\"a\"]\ndwell_ms = [1, 2]\niteration_pair = [\"see_pdp\", \"nope\"]\nseed = 1\n",
    )
    .unwrap();
    let o = run(
        dir.path(),
        &[
            "synth",
            "--taxonomy",
            &taxonomy("visus"),
            "--profile",
            "bad.toml",
            "--out",
            "x",
        ],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nope"));
}

#[test]
fn study_profile_writes_82_logs_and_seed_override_changes_them() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "synth",
            "--taxonomy",
            &taxonomy("visus"),
            "--profile",
            &profile("study"),
            "--out",
            "a",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        std::fs::read_dir(dir.path().join("a/logs"))
            .unwrap()
            .count(),
        82
    );
    let seeded = [
        "synth",
        "--taxonomy",
        &taxonomy("visus"),
        "--profile",
        &profile("study"),
        "--out",
        "b",
        "--seed",
        "1",
    ];
    assert_eq!(code(&run(dir.path(), &seeded)), 0);
    let log =
        |d: &str| std::fs::read(dir.path().join(d).join("logs/u01_classification.jsonl")).unwrap();
    assert_ne!(log("a"), log("b"));
}

#[test]
fn sequential_flag_gives_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let (logs, surveys) = small_dataset(dir.path());
    let base = [
        "analyze",
        "--taxonomy",
        &taxonomy("visus"),
        "--logs",
        &logs,
        "--surveys",
        &surveys,
        "--out",
    ];
    let mut par = base.to_vec();
    par.push("p.json");
    let mut seq = base.to_vec();
    seq.extend(["s.json", "--sequential"]);
    assert_eq!(code(&run(dir.path(), &par)), 0);
    assert_eq!(code(&run(dir.path(), &seq)), 0);
    assert_eq!(
        std::fs::read(dir.path().join("p.json")).unwrap(),
        std::fs::read(dir.path().join("s.json")).unwrap()
    );
}
