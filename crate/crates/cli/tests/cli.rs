use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use mmsc_core::synth::{self, session};

fn mmsc(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmsc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ALM_BASE_URL")
        .env_remove("ALM_MODEL_ID")
        .env_remove("ALM_API_KEY")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[track_caller]
fn ok(o: Output) -> Output {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    o
}

/// Two synthetic sessions aligned and segmented into `<dir>/data`.
fn prepare(dir: &Path) {
    for (id, n, seed) in [("s1", 3, 1), ("s2", 3, 2)] {
        let files = synth::write_session(&dir.join("raw"), &session(id, n, seed)).unwrap();
        let aligned = format!("{id}.aligned.jsonl");
        let out = ok(mmsc(
            dir,
            &[
                "align",
                "--audio",
                files.audio.to_str().unwrap(),
                "--asr",
                files.asr.to_str().unwrap(),
                "--ref",
                files.reference.to_str().unwrap(),
                "--out",
                &aligned,
            ],
        ));
        assert!(
            stdout(&out).contains("alignment score 1.0000"),
            "{}",
            stdout(&out)
        );
        ok(mmsc(
            dir,
            &[
                "segment",
                "--audio",
                files.audio.to_str().unwrap(),
                "--aligned",
                &aligned,
                "--out-dir",
                "data",
            ],
        ));
    }
}

#[test]
fn help_lists_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[&str])] = &[
        (
            "align",
            &[
                "--audio",
                "--asr",
                "--ref",
                "--out",
                "--min-score",
                "--config",
            ],
        ),
        ("segment", &["--audio", "--aligned", "--out-dir"]),
        (
            "run",
            &[
                "--config",
                "--dataset",
                "--out-dir",
                "--backend",
                "--replay-only",
                "--concurrency",
            ],
        ),
        (
            "ablate",
            &[
                "--config",
                "--dataset",
                "--out-dir",
                "--backend",
                "--replay-only",
                "--concurrency",
            ],
        ),
        ("aggregate", &["--traj", "--out", "--dataset", "--config"]),
        ("evaluate", &["--pred", "--out", "--config"]),
        ("report", &["--out-dir", "--config"]),
        ("mock-backend", &["--dataset", "--script", "--addr"]),
    ];
    for (sub, flags) in cases {
        let help = stdout(&ok(mmsc(dir.path(), &[sub, "--help"])));
        for flag in *flags {
            assert!(help.contains(flag), "{sub} --help lacks {flag}");
        }
    }
    let top = stdout(&ok(mmsc(dir.path(), &["--help"])));
    for var in ["ALM_BASE_URL", "ALM_API_KEY", "ALM_MODEL_ID"] {
        assert!(top.contains(var));
    }
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = mmsc(dir.path(), &["align", "--audio", "x.wav"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--asr"));
    assert_eq!(mmsc(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        mmsc(dir.path(), &["run", "--backend", "psychic"])
            .status
            .code(),
        Some(1)
    );
    let o = mmsc(
        dir.path(),
        &["run", "--dataset", "missing", "--backend", "mock"],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());
    fs::write(dir.path().join("typo.toml"), "temprature = 0.5\n").unwrap();
    let o = mmsc(
        dir.path(),
        &[
            "run",
            "--config",
            "typo.toml",
            "--dataset",
            "data",
            "--backend",
            "mock",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("temprature"), "{}", stderr(&o));

    fs::write(
        dir.path().join("bad.toml"),
        "prompts = [\"P2\"]\nmodality = \"text\"\n",
    )
    .unwrap();
    let o = mmsc(
        dir.path(),
        &[
            "run",
            "--config",
            "bad.toml",
            "--dataset",
            "data",
            "--backend",
            "mock",
        ],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));

    let o = mmsc(
        dir.path(),
        &[
            "run",
            "--dataset",
            "data",
            "--backend",
            "mock",
            "--concurrency",
            "0",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = mmsc(
        dir.path(),
        &[
            "ablate",
            "--config",
            "cot",
            "--dataset",
            "data",
            "--backend",
            "mock",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = mmsc(dir.path(), &["run", "--dataset", "data"]);
    assert_eq!(o.status.code(), Some(1), "live without ALM_BASE_URL");
    assert!(stderr(&o).contains("ALM_BASE_URL"));
}

#[test]
fn shuffled_asr_fails_qc() {
    let dir = tempfile::tempdir().unwrap();
    let s = session("bad", 12, 9);
    let mut s2 = s.clone();
    s2.words = synth::shuffle_words(&s.words, 3);
    let files = synth::write_session(dir.path(), &s2).unwrap();
    let args = [
        "align",
        "--audio",
        files.audio.to_str().unwrap(),
        "--asr",
        files.asr.to_str().unwrap(),
        "--ref",
        files.reference.to_str().unwrap(),
        "--out",
        "bad.aligned.jsonl",
    ];
    let o = mmsc(dir.path(), &args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("excluded"), "{}", stderr(&o));
    assert!(!dir.path().join("bad.aligned.jsonl").exists());

    let mut lenient = args.to_vec();
    lenient.extend(["--min-score", "0"]);
    ok(mmsc(dir.path(), &lenient));
    let o = mmsc(dir.path(), &[&args[..], &["--min-score", "1.5"]].concat());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_aggregate_evaluate_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    assert!(d.join("data/s1/0.wav").exists());
    assert!(d.join("data/s1.aligned.jsonl").exists());

    let out = stdout(&ok(mmsc(
        d,
        &[
            "run",
            "--config",
            "wo-P2",
            "--dataset",
            "data",
            "--backend",
            "mock",
            "--concurrency",
            "2",
        ],
    )));
    assert!(out.contains("wo-P2"));
    for f in [
        "wo-P2.traj.jsonl",
        "wo-P2.pred.jsonl",
        "report.csv",
        "report.md",
        "run-manifest.json",
    ] {
        assert!(d.join("out").join(f).exists(), "missing {f}");
    }
    let traj = fs::read_to_string(d.join("out/wo-P2.traj.jsonl")).unwrap();
    assert_eq!(traj.lines().count(), 6 * 9);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("out/run-manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["cache_misses"], 54, "{manifest}");

    ok(mmsc(
        d,
        &[
            "aggregate",
            "--traj",
            "out/wo-P2.traj.jsonl",
            "--dataset",
            "data",
            "--out",
            "re.pred.jsonl",
        ],
    ));
    assert_eq!(
        fs::read(d.join("re.pred.jsonl")).unwrap(),
        fs::read(d.join("out/wo-P2.pred.jsonl")).unwrap()
    );

    let o = ok(mmsc(d, &["evaluate", "--pred", "re.pred.jsonl"]));
    let m: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(m["n"], 6);
    assert!(stderr(&o).contains("macro-F1"));

    // Without gold codes there is nothing to score.
    ok(mmsc(
        d,
        &[
            "aggregate",
            "--traj",
            "out/wo-P2.traj.jsonl",
            "--out",
            "nogold.pred.jsonl",
        ],
    ));
    assert_eq!(
        mmsc(d, &["evaluate", "--pred", "nogold.pred.jsonl"])
            .status
            .code(),
        Some(1)
    );

    let before = fs::read(d.join("out/report.csv")).unwrap();
    fs::remove_file(d.join("out/report.csv")).unwrap();
    ok(mmsc(d, &["report", "--out-dir", "out"]));
    assert_eq!(fs::read(d.join("out/report.csv")).unwrap(), before);
}

#[test]
fn replay_with_cold_cache_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    fs::write(
        d.join("exp.toml"),
        "name = \"direct\"\ndataset = \"data\"\n",
    )
    .unwrap();
    let o = mmsc(d, &["run", "--config", "exp.toml", "--replay-only"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("replay cache has no entry"),
        "{}",
        stderr(&o)
    );
    assert!(fs::read_to_string(d.join("out/report.csv"))
        .unwrap()
        .contains("failed"));

    // Warm the cache with the mock backend; replay then succeeds offline.
    ok(mmsc(
        d,
        &["run", "--config", "exp.toml", "--backend", "mock"],
    ));
    let warm = fs::read(d.join("out/direct.pred.jsonl")).unwrap();
    ok(mmsc(
        d,
        &[
            "run",
            "--config",
            "exp.toml",
            "--backend",
            "replay",
            "--out-dir",
            "replayed",
        ],
    ));
    assert_eq!(
        fs::read(d.join("replayed/direct.pred.jsonl")).unwrap(),
        warm
    );
}

#[test]
fn live_backend_against_mock_server() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    let mut server = Command::new(env!("CARGO_BIN_EXE_mmsc"))
        .args(["mock-backend", "--dataset", "data", "--addr", "127.0.0.1:0"])
        .current_dir(d)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut url = String::new();
    BufReader::new(server.stdout.take().unwrap())
        .read_line(&mut url)
        .unwrap();

    let live = Command::new(env!("CARGO_BIN_EXE_mmsc"))
        .args([
            "run",
            "--config",
            "cot",
            "--dataset",
            "data",
            "--out-dir",
            "live",
            "--cache-dir",
            "live-cache",
        ])
        .current_dir(d)
        .env("ALM_BASE_URL", url.trim())
        .env("ALM_MODEL_ID", "scripted")
        .env_remove("ALM_API_KEY")
        .output()
        .unwrap();
    server.kill().unwrap();
    let _ = server.wait();
    let live = ok(live);
    assert!(stdout(&live).contains("cot"));

    ok(mmsc(
        d,
        &[
            "run",
            "--config",
            "cot",
            "--dataset",
            "data",
            "--backend",
            "mock",
            "--out-dir",
            "mock",
        ],
    ));
    let finals = |p: &str| {
        fs::read_to_string(d.join(p))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["final"].clone())
            .collect::<Vec<_>>()
    };
    let live_finals = finals("live/cot.pred.jsonl");
    assert_eq!(live_finals.len(), 6);
    assert!(live_finals.iter().all(|v| v.is_string()));
    assert_eq!(live_finals, finals("mock/cot.pred.jsonl"));
}
