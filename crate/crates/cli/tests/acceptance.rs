//! Acceptance suite: one PASS/FAIL line per criterion, then a single verdict.
//!
//! Run with `cargo test -p mmsc-cli --test acceptance -- --nocapture` to see
//! the lines.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mmsc_core::align::{
    align_session, align_tokens, alignment_cost, apply_qc, replay, QcDecision, QcScope,
};
use mmsc_core::coder::{aggregate, Verdict, VoteTally};
use mmsc_core::eval::{
    confusion, metrics, percent, render_csv, run_experiment, ConfusionMatrix, ReportRow, RunConfig,
};
use mmsc_core::gateway::{Gateway, MockBackend, MockScript};
use mmsc_core::ingest::{read_wav, slice_audio, write_wav, AudioBuffer};
use mmsc_core::synth::{self, session, shuffle_words, substitute_words};
use mmsc_core::{MiCode, TimeSpan, UtteranceId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() < limit_s,
        format!("took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn vote_oracle(counts: [usize; 3]) -> (MiCode, bool) {
    let best = *counts.iter().max().unwrap();
    let tied: Vec<MiCode> = MiCode::ALL
        .into_iter()
        .filter(|c| counts[c.index()] == best)
        .collect();
    (tied[0], tied.len() > 1)
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut agree = 0;
    let mut total = 0;
    for ct in 0..=12 {
        for st in 0..=12 - ct {
            let fn_ = 12 - ct - st;
            total += 1;
            let p = aggregate(
                UtteranceId::new("a", 0),
                VoteTally::from_counts(ct, st, fn_, 0),
            );
            let (want, tie) = vote_oracle([ct, st, fn_]);
            if p.verdict == Verdict::Code(want) && p.tie_break_applied == tie {
                agree += 1;
            }
        }
    }
    check(
        total == 91 && agree == 91,
        format!("{agree}/{total} multisets agree"),
    )?;
    for (counts, want) in [((6, 0, 6), MiCode::Ct), ((0, 6, 6), MiCode::St)] {
        let p = aggregate(
            UtteranceId::new("a", 0),
            VoteTally::from_counts(counts.0, counts.1, counts.2, 0),
        );
        check(
            p.verdict == Verdict::Code(want) && p.tie_break_applied,
            format!(
                "{counts:?} gave {} (tie-break {})",
                p.verdict, p.tie_break_applied
            ),
        )?;
    }
    within(t.elapsed(), 1.0)?;
    Ok(format!(
        "91/91 multisets, both tie cases, {:.1} ms",
        t.elapsed().as_secs_f64() * 1e3
    ))
}

fn criterion_2(dir: &Path) -> Outcome {
    let ds = synth::write_dataset(dir, &[session("m1", 3, 21), session("m2", 2, 22)])
        .map_err(|e| e.to_string())?;
    let n = ds.evaluable().count();
    check(n == 5, format!("dataset has {n} utterances"))?;
    let gold: Vec<_> = ds.evaluable().map(|(i, g)| (&i.aligned.id, g)).collect();
    let gw = Gateway::new(Arc::new(MockBackend::new(MockScript::from_gold(
        gold, 3, 0.3,
    ))));
    let mut seen = Vec::new();
    for (name, want) in [
        ("mm-sc-audio", 12),
        ("mm-sc-audio-text", 12),
        ("wo-P1", 9),
        ("wo-P2", 9),
        ("wo-P3", 9),
        ("wo-P4", 9),
        ("direct", 1),
    ] {
        let out = run_experiment(&gw, &RunConfig::builtin(name).unwrap(), &ds)
            .map_err(|e| e.to_string())?;
        check(
            out.trajectories.len() == 5 * want,
            format!("{name}: {} trajectories", out.trajectories.len()),
        )?;
        for p in &out.predictions {
            let per = out
                .trajectories
                .iter()
                .filter(|t| t.utterance_id == p.utterance_id)
                .count();
            check(per == want, format!("{name}: {} has {per}", p.utterance_id))?;
        }
        seen.push(format!("{name}={want}"));
    }
    Ok(format!("per utterance: {}", seen.join(" ")))
}

fn criterion_3() -> Outcome {
    use MiCode::*;
    let m = metrics(&confusion(&[Ct, Ct, St, Fn], &[Ct, St, St, Fn]).unwrap());
    check(
        (m.accuracy - 0.75).abs() < 1e-9 && (m.macro_f1 - 7.0 / 9.0).abs() < 1e-9,
        format!("fixture 1: acc {} f1 {}", m.accuracy, m.macro_f1),
    )?;
    let m = metrics(&confusion(&[Ct, St, Fn], &[Fn, Fn, Fn]).unwrap());
    check(
        (m.accuracy - 1.0 / 3.0).abs() < 1e-9 && (m.macro_f1 - 1.0 / 6.0).abs() < 1e-9,
        format!("fixture 2: acc {} f1 {}", m.accuracy, m.macro_f1),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut cm = ConfusionMatrix::default();
        for cell in cm.counts.iter_mut().flatten() {
            *cell = if rng.random_bool(0.25) {
                0
            } else {
                rng.random_range(0..40)
            };
        }
        let m = metrics(&cm);
        let mean = MiCode::ALL
            .iter()
            .map(|c| m.per_class.get(*c).f1)
            .sum::<f64>()
            / 3.0;
        worst = worst.max((m.macro_f1 - mean).abs());
    }
    check(
        worst < 1e-12,
        format!("max |macro-F1 - mean F1| = {worst:e}"),
    )?;
    Ok(format!(
        "both fixtures exact, 1000 matrices max deviation {worst:e}"
    ))
}

fn levenshtein(a: &[String], b: &[String]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    d[0] = (0..=b.len()).collect();
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            d[i][j] = (d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]))
                .min(d[i - 1][j] + 1)
                .min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let alphabet = ["so", "i", "want", "to", "quit", "maybe"];
    let tokens = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let n = rng.random_range(0..=50);
        (0..n)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())].to_string())
            .collect()
    };
    let (mut cost_ok, mut replay_ok) = (0, 0);
    for _ in 0..200 {
        let a = tokens(&mut rng);
        let b = tokens(&mut rng);
        let ops = align_tokens(&a, &b);
        cost_ok += usize::from(alignment_cost(&ops) == levenshtein(&a, &b));
        replay_ok += usize::from(replay(&ops, &a, &b).as_deref() == Some(b.as_slice()));
    }
    check(cost_ok == 200, format!("cost matched {cost_ok}/200"))?;
    check(replay_ok == 200, format!("replay matched {replay_ok}/200"))?;
    within(t.elapsed(), 5.0)?;
    Ok(format!(
        "200/200 cost and replay, {:.0} ms",
        t.elapsed().as_secs_f64() * 1e3
    ))
}

fn criterion_5() -> Outcome {
    let s = session("qc", 20, 11);
    let score = |words: &[mmsc_core::ingest::TimedWord]| {
        let out = align_session("qc", words, &s.reference, Some(s.audio.duration_s())).unwrap();
        let score = out.session_score;
        (score, apply_qc(out.utterances, 0.6, QcScope::Session).1)
    };
    let (clean, d1) = score(&s.words);
    let (noisy, d2) = score(&substitute_words(&s.words, 0.1, 5));
    let (shuffled, d3) = score(&shuffle_words(&s.words, 5));
    let summary =
        format!("identical {clean:.4}, 10% substituted {noisy:.4}, shuffled {shuffled:.4}");
    check(
        clean == 1.0 && d1 == QcDecision::Accept,
        format!("identical: {summary}"),
    )?;
    check(
        d2 == QcDecision::Accept,
        format!("substituted excluded: {summary}"),
    )?;
    check(
        matches!(d3, QcDecision::Exclude(_)),
        format!("shuffled accepted: {summary}"),
    )?;
    Ok(summary)
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let ch = rng.random_range(1..=2u16);
        let frames = rng.random_range(0..5000usize);
        let samples = (0..frames * ch as usize)
            .map(|_| rng.random::<i16>())
            .collect();
        let buf = AudioBuffer::new(
            *[8000, 16000, 44100].get(rng.random_range(0..3)).unwrap(),
            ch,
            samples,
        )
        .unwrap();
        let bytes = write_wav(&buf);
        let back = read_wav(&bytes).map_err(|e| e.to_string())?;
        check(
            write_wav(&back) == bytes && back == buf,
            "round trip differs",
        )?;
    }
    let samples: Vec<i16> = (0..40_000).map(|_| rng.random()).collect();
    let buf = AudioBuffer::new(16_000, 1, samples.clone()).unwrap();
    let clip = slice_audio(&buf, TimeSpan::new(0.5, 1.5).unwrap()).map_err(|e| e.to_string())?;
    check(
        clip.frames() == 16_000,
        format!("[0.5,1.5) gave {} samples", clip.frames()),
    )?;
    let cut = 1.2345;
    let left = slice_audio(&buf, TimeSpan::new(0.0, cut).unwrap()).unwrap();
    let right = slice_audio(&buf, TimeSpan::new(cut, buf.duration_s()).unwrap()).unwrap();
    let joined: Vec<i16> = left
        .samples()
        .iter()
        .chain(right.samples())
        .copied()
        .collect();
    check(
        joined == samples,
        "complementary slices differ from the original",
    )?;
    Ok("50 random buffers byte-identical, 16000 samples, slices concatenate".into())
}

fn mmsc(cwd: &Path, args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mmsc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ALM_BASE_URL")
        .env_remove("ALM_MODEL_ID")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!(
            "mmsc {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn criterion_7(dir: &Path) -> Outcome {
    let t = Instant::now();
    for (id, n, seed) in [("e1", 3, 31), ("e2", 2, 32)] {
        let s = session(id, n, seed);
        let f = synth::write_session(&dir.join("raw"), &s).map_err(|e| e.to_string())?;
        let aligned = dir.join(format!("{id}.aligned.jsonl"));
        mmsc(
            dir,
            &[
                "align",
                "--audio",
                f.audio.to_str().unwrap(),
                "--asr",
                f.asr.to_str().unwrap(),
                "--ref",
                f.reference.to_str().unwrap(),
                "--out",
                aligned.to_str().unwrap(),
            ],
        )?;
        mmsc(
            dir,
            &[
                "segment",
                "--audio",
                f.audio.to_str().unwrap(),
                "--aligned",
                aligned.to_str().unwrap(),
                "--out-dir",
                "data",
            ],
        )?;
    }
    for out in ["run1", "run2"] {
        mmsc(
            dir,
            &[
                "ablate",
                "--dataset",
                "data",
                "--backend",
                "mock",
                "--out-dir",
                out,
            ],
        )?;
    }
    let csv = fs::read_to_string(dir.join("run1/report.csv")).map_err(|e| e.to_string())?;
    let rows = csv
        .lines()
        .skip(1)
        .filter(|l| l.contains(",complete"))
        .count();
    check(rows == 9, format!("{rows} complete rows"))?;
    let mut compared = 0;
    for entry in fs::read_dir(dir.join("run1")).map_err(|e| e.to_string())? {
        let name = entry
            .map_err(|e| e.to_string())?
            .file_name()
            .into_string()
            .unwrap();
        if name.ends_with(".pred.jsonl") || name.starts_with("report.") {
            let a = fs::read(dir.join("run1").join(&name)).unwrap();
            let b = fs::read(dir.join("run2").join(&name)).map_err(|e| format!("{name}: {e}"))?;
            check(a == b, format!("{name} differs between runs"))?;
            compared += 1;
        }
    }
    check(compared == 11, format!("compared {compared} files"))?;
    within(t.elapsed(), 30.0)?;
    Ok(format!(
        "9 rows, {compared} files byte-identical on warm rerun, {:.1}s",
        t.elapsed().as_secs_f64()
    ))
}

fn criterion_8() -> Outcome {
    check(
        percent(0.5256) == "52.56",
        format!("percent gave {}", percent(0.5256)),
    )?;
    let mut m = metrics(&confusion(&[MiCode::Ct], &[MiCode::Ct]).unwrap());
    m.accuracy = 0.5256;
    let csv = render_csv(&[ReportRow::complete("mm-sc-audio", m)]);
    check(
        csv.contains("mm-sc-audio,52.56,"),
        format!("report row: {csv}"),
    )?;
    Ok("0.5256 -> \"52.56\"".into())
}

#[test]
fn acceptance_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "vote aggregation oracle", criterion_1()),
        (2, "trajectory counts", criterion_2(&tmp.path().join("c2"))),
        (3, "metrics fixtures", criterion_3()),
        (4, "alignment oracle", criterion_4()),
        (5, "alignment QC discrimination", criterion_5()),
        (6, "codec exactness", criterion_6()),
        (7, "end-to-end determinism", {
            let d = tmp.path().join("c7");
            fs::create_dir_all(&d).unwrap();
            criterion_7(&d)
        }),
        (8, "report formatting", criterion_8()),
    ];
    let mut failed = 0;
    for (n, name, r) in &results {
        match r {
            Ok(detail) => println!("criterion {n} ({name}): PASS - {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL - {why}");
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
