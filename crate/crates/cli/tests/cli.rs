use std::path::Path;
use std::process::Command;

use orchestra::neuralnet::{deserialize, serialize};
use orchestra::training::{inject_feedback, read_feedback_log};
use orchestra::{Network, StrategyKind};
use orchestra_cli::*;

fn cfg(out: &Path) -> RunConfig {
    RunConfig {
        out_dir: out.to_path_buf(),
        ..RunConfig::default()
    }
}

fn quick(out: &Path) -> RunConfig {
    RunConfig {
        iterations: 40,
        hidden_dims: vec![16, 8],
        n_tasks: 60,
        validation_tasks: 40,
        ..cfg(out)
    }
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn default_training_writes_500_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_train(&cfg(dir.path())).unwrap();
    assert_eq!(out.records.len(), 500);
    let csv = String::from_utf8(read(dir.path().join("train_records.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 501);
    assert!(dir.path().join(SNAPSHOT_FILE).exists());
}

#[test]
fn zero_iterations_checkpoints_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let c = RunConfig {
        iterations: 0,
        ..cfg(dir.path())
    };
    let out = cmd_train(&c).unwrap();
    assert!(out.records.is_empty());
    assert_eq!(read(dir.path().join("train_records.csv")), b"iteration,cross_entropy_loss,confidence_loss\n");
    let sim = c.simulation().unwrap();
    let initial = c.model_config().build(&sim).unwrap();
    let loaded: Network = deserialize(&read(&out.checkpoint)).unwrap();
    assert_eq!(serialize(&loaded), serialize(&initial));
}

#[test]
fn unwritable_out_dir_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = cmd_train(&cfg(&blocker.join("sub"))).err().unwrap();
    assert!(matches!(err, CliError::Io { .. }), "{err}");
}

#[test]
fn train_rerun_from_snapshot_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_train(&quick(a.path())).unwrap();
    let mut again = RunConfig::load(&a.path().join(SNAPSHOT_FILE)).unwrap();
    again.out_dir = b.path().to_path_buf();
    cmd_train(&again).unwrap();
    for f in ["model.ckpt", "train_records.csv", SNAPSHOT_FILE] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{f}");
    }
}

#[test]
fn evaluate_writes_four_reports_and_a_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let trained = cmd_train(&quick(&dir.path().join("train"))).unwrap();
    let c = RunConfig {
        checkpoint: Some(trained.checkpoint.clone()),
        ..quick(&dir.path().join("eval"))
    };
    let cmp = cmd_evaluate(&c).unwrap();
    assert_eq!(cmp.reports.len(), 4);
    let csv = String::from_utf8(read(dir.path().join("eval/comparison.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 5);
    for s in StrategyKind::BASELINES {
        assert!(dir.path().join(format!("eval/report_{s}.json")).exists());
        assert!(dir.path().join(format!("eval/confusion_{s}.csv")).exists());
    }
}

#[test]
fn single_task_evaluation_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let c = RunConfig {
        strategies: vec![StrategyKind::RoundRobin],
        n_tasks: 1,
        ..cfg(dir.path())
    };
    let cmp = cmd_evaluate(&c).unwrap();
    assert_eq!(cmp.reports[0].n_tasks, 1);
    assert_eq!(cmp.reports[0].confusion.total(), 1);
}

#[test]
fn neural_without_checkpoint_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_evaluate(&cfg(dir.path())).err().unwrap();
    assert!(matches!(err, CliError::Usage(_)));
    assert!(err.one_line().contains("checkpoint"));
}

#[test]
fn gridsearch_space_files() {
    let dir = tempfile::tempdir().unwrap();
    let space = dir.path().join("space.toml");
    std::fs::write(
        &space,
        "hidden_dims = [[8]]\ndropout = [0.0]\nlearning_rate = [0.01, 0.001]\nbatch_size = [16]\nconfidence_weight = [0.2]\n",
    )
    .unwrap();
    let c = RunConfig {
        iterations: 20,
        ..quick(&dir.path().join("a"))
    };
    let first = cmd_gridsearch(&c, Some(&space)).unwrap();
    assert_eq!(first.len(), 2);
    let again = RunConfig {
        out_dir: dir.path().join("b"),
        ..c.clone()
    };
    let second = cmd_gridsearch(&again, Some(&space)).unwrap();
    assert_eq!(first[0], second[0]);
    assert_eq!(read(dir.path().join("a/grid_results.csv")), read(dir.path().join("b/grid_results.csv")));

    std::fs::write(&space, "hidden_dims = [[8]]\ndropout = [0.0]\nlearning_rate = 0.01\n").unwrap();
    let err = cmd_gridsearch(&c, Some(&space)).err().unwrap().one_line();
    assert!(err.starts_with("error: parse:") && err.contains("line 3"), "{err}");

    std::fs::write(&space, "").unwrap();
    assert!(matches!(cmd_gridsearch(&c, Some(&space)), Err(CliError::Parse(_))));
}

#[test]
fn sensitivity_rejects_bad_rows_and_keeps_degenerate_ones() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("weights.csv");
    std::fs::write(&weights, "# c,r,conf\n0.4,0.4,0.2\n0.5,0.5,0.5\n1,0,0\n").unwrap();
    let out = cmd_sensitivity(&quick(&dir.path().join("s")), Some(&weights)).unwrap();
    assert_eq!(out.rows.len(), 2);
    assert_eq!(out.rows[0].delta, 0.0);
    assert!(out.rows[1].accuracy.is_finite());
    assert_eq!(out.rejected.len(), 1);
    assert_eq!(out.rejected[0].0, 3);
    let csv = String::from_utf8(read(dir.path().join("s/sensitivity.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(parse_weight_grid("0.4,0.4\n").is_err());
    assert!(parse_weight_grid("# nothing\n").is_err());
}

#[tokio::test]
async fn serve_session_round_trip() {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};

    let dir = tempfile::tempdir().unwrap();
    let trained = cmd_train(&quick(&dir.path().join("train"))).unwrap();
    let c = RunConfig {
        checkpoint: Some(trained.checkpoint.clone()),
        ..quick(&dir.path().join("serve"))
    };
    let listener = bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    assert!(bind(&addr.to_string()).await.is_err());

    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn({
        let c = c.clone();
        async move {
            serve_on(listener, &c, async {
                let _ = stop_rx.await;
            })
            .await
        }
    });

    let request = |method: &str, path: &str, body: &str| {
        format!(
            "{method} {path} HTTP/1.1\r\nhost: x\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        )
    };
    let send = |raw: String| async move {
        let mut s = tokio::net::TcpStream::connect(addr).await.unwrap();
        s.write_all(raw.as_bytes()).await.unwrap();
        let mut buf = String::new();
        s.read_to_string(&mut buf).await.unwrap();
        buf
    };
    assert!(send(request("GET", "/api/health", "")).await.contains("\"ok\""));
    for _ in 0..3 {
        let resp = send(request("POST", "/api/step", "")).await;
        let body = resp.split("\r\n\r\n").nth(1).unwrap();
        let d: serde_json::Value = serde_json::from_str(body).unwrap();
        let other = (d["model_choice"].as_u64().unwrap() + 1) % 3;
        let resp = send(request(
            "POST",
            &format!("/api/decision/{}", d["decision_id"]),
            &format!("{{\"action\":\"override\",\"agent\":{other}}}"),
        ))
        .await;
        assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    }
    stop_tx.send(()).unwrap();
    server.await.unwrap().unwrap();

    let records = read_feedback_log(&dir.path().join("serve/feedback.jsonl")).unwrap();
    assert_eq!(records.len(), 3);
    let (_, report) = inject_feedback(&records, trained.model, &c.train_config()).unwrap();
    assert_eq!(report.applied, 3);
}

#[tokio::test]
async fn serve_start_and_stop_leaves_an_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    let trained = cmd_train(&RunConfig {
        iterations: 0,
        ..quick(&dir.path().join("train"))
    })
    .unwrap();
    let c = RunConfig {
        checkpoint: Some(trained.checkpoint),
        ..quick(&dir.path().join("serve"))
    };
    let listener = bind("127.0.0.1:0").await.unwrap();
    serve_on(listener, &c, async {}).await.unwrap();
    assert!(read_feedback_log(&dir.path().join("serve/feedback.jsonl")).unwrap().is_empty());

    let no_ckpt = RunConfig {
        checkpoint: None,
        ..c
    };
    let listener = bind("127.0.0.1:0").await.unwrap();
    assert!(matches!(serve_on(listener, &no_ckpt, async {}).await, Err(CliError::Usage(_))));
}

fn orchestra() -> Command {
    Command::new(env!("CARGO_BIN_EXE_orchestra"))
}

#[test]
fn binary_errors_are_one_line_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = orchestra().args(["evaluate", "--strategy", "psychic"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error: usage:"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "iterations = \"many\"\n").unwrap();
    let out = orchestra().arg("train").arg("--config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error: config:") && stderr.contains("line 1"), "{stderr}");
}

#[test]
fn binary_flags_reach_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = orchestra()
        .args(["train", "--iterations", "3", "--batch-size", "8", "--lr", "0.001", "--seed", "5", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let snap = RunConfig::load(&dir.path().join(SNAPSHOT_FILE)).unwrap();
    assert_eq!((snap.iterations, snap.batch_size, snap.master_seed), (3, 8, 5));
    assert_eq!(snap.learning_rate, 0.001);
    assert_eq!(std::fs::read_to_string(dir.path().join("train_records.csv")).unwrap().lines().count(), 4);
}
