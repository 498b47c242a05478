use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use genception::backends::mock::ScriptedDescriber;
use genception::backends::{Backends, CallLog, Recorded};
use genception::fixtures;
use genception::report::Format;
use genception::storage::RunStatus;
use genception_cli::config::{resolve, ConfigFlags};
use genception_cli::serve::AppState;
use genception_cli::{commands, exit_code, EXIT_INVALID, EXIT_RUN_FAILED, EXIT_USAGE};

fn genception(root: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_genception"))
        .arg("--root")
        .arg(root)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn recorded(log: &Arc<CallLog>) -> Backends {
    let m = Backends::mock(0);
    Backends {
        describer: Arc::new(Recorded::new(m.describer.clone(), log.clone())),
        generator: Arc::new(Recorded::new(m.generator.clone(), log.clone())),
        embedder: Arc::new(Recorded::new(m.embedder.clone(), log.clone())),
        ..m
    }
}

#[test]
fn flags_override_file_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    std::fs::write(&file, "iterations = 4\nparallelism = 2\ndataset = \"data\"\n").unwrap();

    let flags = ConfigFlags {
        iterations: Some(6),
        ..ConfigFlags::default()
    };
    let r = resolve(Some(&file), &flags).unwrap();
    assert_eq!(r.config.iterations, 6);
    assert_eq!(r.config.parallelism, 2);
    assert_eq!(r.config.word_limit, 500);
    assert_eq!(r.config.dataset, dir.path().join("data"));
    assert!(r.explicit_iterations);

    let r = resolve(Some(&file), &ConfigFlags::default()).unwrap();
    assert_eq!((r.config.iterations, r.config.parallelism), (4, 2));
    let r = resolve(None, &ConfigFlags::default()).unwrap();
    assert_eq!(r.config, genception::model::RunConfig::default());
    assert!(!r.explicit_iterations);
}

#[test]
fn bad_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    std::fs::write(&file, "iteration = 4\n").unwrap();
    let err = resolve(Some(&file), &ConfigFlags::default()).unwrap_err();
    assert_eq!(exit_code(&err), EXIT_INVALID);
    std::fs::write(&file, "iterations = 0\n").unwrap();
    let err = resolve(Some(&file), &ConfigFlags::default()).unwrap_err();
    assert_eq!(exit_code(&err), EXIT_INVALID);
}

#[test]
fn serve_defaults_to_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fixtures::write_fixture_dataset(&data).unwrap();
    let flags = ConfigFlags {
        dataset: Some(data.clone()),
        ..ConfigFlags::default()
    };
    let app = AppState::from_config(dir.path(), None, &flags, 5, 0).unwrap();
    assert_eq!(app.config().iterations, 1);
    assert_eq!(app.config().describer, "human");

    let file = dir.path().join("serve.toml");
    std::fs::write(&file, "iterations = 3\n").unwrap();
    let app = AppState::from_config(dir.path(), Some(&file), &flags, 5, 0).unwrap();
    assert_eq!(app.config().iterations, 3);
}

#[tokio::test]
async fn resuming_a_finished_run_calls_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fixtures::write_fixture_dataset(&data).unwrap();
    let flags = ConfigFlags {
        dataset: Some(data),
        no_cache: true,
        ..ConfigFlags::default()
    };
    let log = CallLog::new();
    let state = commands::run(dir.path(), None, &flags, None, Some(recorded(&log)))
        .await
        .unwrap();
    assert_eq!(log.total(), 6 * 10);

    let again = CallLog::new();
    let resumed = commands::run(dir.path(), None, &ConfigFlags::default(), Some(&state.run_id), Some(recorded(&again)))
        .await
        .unwrap();
    assert_eq!(again.total(), 0);
    assert_eq!(resumed.chains, state.chains);
    assert_eq!(resumed.status, RunStatus::Complete);
}

#[tokio::test]
async fn changed_flags_on_resume_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fixtures::write_fixture_dataset(&data).unwrap();
    let flags = ConfigFlags {
        dataset: Some(data),
        iterations: Some(1),
        ..ConfigFlags::default()
    };
    let state = commands::run(dir.path(), None, &flags, None, None).await.unwrap();
    let changed = ConfigFlags {
        iterations: Some(2),
        ..ConfigFlags::default()
    };
    let err = commands::run(dir.path(), None, &changed, Some(&state.run_id), None)
        .await
        .unwrap_err();
    assert_eq!(exit_code(&err), EXIT_INVALID);
}

#[tokio::test]
async fn run_where_every_chain_fails_is_a_run_failure() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fixtures::write_fixture_dataset(&data).unwrap();
    let flags = ConfigFlags {
        dataset: Some(data),
        ..ConfigFlags::default()
    };
    let backends = Backends {
        describer: Arc::new(ScriptedDescriber::new("silent", Vec::<String>::new())),
        ..Backends::mock(0)
    };
    let err = commands::run(dir.path(), None, &flags, None, Some(backends))
        .await
        .unwrap_err();
    assert_eq!(exit_code(&err), EXIT_RUN_FAILED);
}

#[tokio::test]
async fn score_report_and_strip_of_a_mock_run() {
    let dir = tempfile::tempdir().unwrap();
    let md = commands::mock_run(dir.path(), 3, 4, 0, true, Format::Md).await.unwrap();
    assert!(md.contains("| overall mean |"));
    let run_id = genception::storage::RunStore::new(dir.path()).list_runs().unwrap().remove(0);

    let csv = commands::score(dir.path(), &run_id, false, Format::Csv).await.unwrap();
    assert!(csv.starts_with("row,mock-describer"));
    let fid = commands::report(dir.path(), std::slice::from_ref(&run_id), commands::Metric::Fid, Format::Json).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fid).unwrap();
    assert_eq!(v["metric"], "GC_FID@3");

    let html = commands::strip(dir.path(), &run_id, "ocr/0002", commands::StripKind::Html, None).unwrap();
    assert_eq!(html.matches("<img ").count(), 4);
    let err = commands::strip(dir.path(), &run_id, "ocr/9999", commands::StripKind::Html, None).unwrap_err();
    assert_eq!(exit_code(&err), EXIT_INVALID);
}

#[tokio::test]
async fn single_image_sets_get_run_level_fid_only() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let seeds = fixtures::write_fixture_dataset(&data).unwrap();
    std::fs::remove_file(&seeds[1].image_ref).unwrap();
    std::fs::remove_file(&seeds[2].image_ref).unwrap();
    let flags = ConfigFlags {
        dataset: Some(data),
        iterations: Some(1),
        ..ConfigFlags::default()
    };
    let state = commands::run(dir.path(), None, &flags, None, None).await.unwrap();
    commands::score(dir.path(), &state.run_id, true, Format::Md).await.unwrap();
    let err = commands::report(dir.path(), std::slice::from_ref(&state.run_id), commands::Metric::Fid, Format::Md).unwrap_err();
    assert!(err.to_string().contains("run-level FID only"), "{err}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert_eq!(genception(root, &["--no-such-flag"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(genception(root, &["run", "--iterations", "many"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(genception(root, &["validate", "missing-dir"]).status.code(), Some(EXIT_INVALID));
    assert_eq!(genception(root, &["score", "no-such-run"]).status.code(), Some(EXIT_INVALID));
    assert_eq!(genception(root, &["--help"]).status.code(), Some(0));

    let out = genception(root, &["mock-run", "--iterations", "2", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("row,mock-describer"));

    let run_id = std::fs::read_dir(root.join("runs")).unwrap().next().unwrap().unwrap().file_name();
    let run_id = run_id.to_str().unwrap();
    let out = genception(root, &["run", "--resume", run_id]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(genception(root, &["validate", root.join("fixtures/dataset").to_str().unwrap()]).status.code(), Some(0));
}

#[tokio::test]
async fn correlate_two_stores_against_leaderboards() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fixtures::write_fixture_dataset(&data).unwrap();
    let mut ids = Vec::new();
    for seed in 0..3u64 {
        let flags = ConfigFlags {
            dataset: Some(data.clone()),
            iterations: Some(1),
            mock_seed: Some(seed),
            ..ConfigFlags::default()
        };
        let backends = Backends {
            describer: Arc::new(ScriptedDescriber::new(
                format!("model-{seed}"),
                (0..6).map(|i| format!("picture {i} variant {seed}")),
            )),
            ..Backends::mock(seed)
        };
        ids.push(commands::run(dir.path(), None, &flags, None, Some(backends)).await.unwrap().run_id);
    }
    let bench = dir.path().join("bench.json");
    std::fs::write(
        &bench,
        r#"{"Board": {"model-0": 1.0, "model-1": 2.0, "model-2": 4.0}}"#,
    )
    .unwrap();
    let csv = commands::correlate(dir.path(), &ids, &bench, None, Format::Csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], ",GC@1 cosine,Board");
    assert!(lines[2].starts_with("Board,"));
    assert!(lines[2].ends_with(",1.00"));

    std::fs::write(&bench, r#"{"Board": {"model-0": 1.0}}"#).unwrap();
    let err = commands::correlate(dir.path(), &ids, &bench, None, Format::Csv).unwrap_err();
    assert_eq!(exit_code(&err), EXIT_INVALID);
}
