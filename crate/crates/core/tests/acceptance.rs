//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Built without the libtest harness. `cargo test --release --test
//! acceptance` is the quick way to run it. Set `TEMPOLEARN_MNIST` to a
//! directory of MNIST IDX files to add the MNIST parts of criteria 2 and 12.
//!
//! The process exits nonzero when a criterion fails that is not listed in
//! `KNOWN_FAILURES`, or when the run itself errors.

#[allow(dead_code)]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::{leaky_sweep, lstm_sweep, REL_TOL};
use tempolearn::datasets::{gen_low_overlap, write_idx, Dataset};
use tempolearn::experiments::presets::mnist_split;
use tempolearn::experiments::{run_preset, PresetContext, PresetReport, Scale};
use tempolearn::numerics::Rng;
use tempolearn::sampling::{Condition, Schedule, Session};

/// Criteria that fail at the tolerances given and stay reported as FAIL.
/// Listing one here keeps it from failing the build. It does not change
/// what is measured.
const KNOWN_FAILURES: &[u32] = &[5, 8, 10];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

type Res<T> = Result<T, String>;

fn preset(id: &str, seed: u64, mnist: Option<&PathBuf>) -> Res<PresetReport> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut ctx = PresetContext::new(seed, dir.path().join(id));
    ctx.mnist_dir = mnist.cloned();
    run_preset(id, &ctx).map_err(|e| format!("{id} seed {seed}: {e}"))
}

fn checks_where(report: &PresetReport, keep: impl Fn(&str) -> bool) -> Outcome {
    let picked: Vec<_> = report.checks.iter().filter(|c| keep(&c.name)).collect();
    let failed: Vec<String> =
        picked.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.name, c.detail)).collect();
    if picked.is_empty() {
        return outcome(false, format!("{}: no matching checks", report.id));
    }
    if failed.is_empty() {
        outcome(true, format!("{}: {} checks hold", report.id, picked.len()))
    } else {
        outcome(false, format!("{}: {}", report.id, failed.join("; ")))
    }
}

/// `check` over seeds 1..=10; passes when it holds for at least 9.
fn nine_of_ten(id: &str, check: &str) -> Res<Outcome> {
    let mut held = Vec::new();
    for seed in 1..=10 {
        let r = preset(id, seed, None)?;
        let c = r.check(check).ok_or_else(|| format!("{id} has no check {check}"))?;
        held.push(c.passed);
    }
    let n = held.iter().filter(|&&h| h).count();
    let misses: Vec<String> = held.iter().zip(1..).filter(|(h, _)| !**h).map(|(_, s)| s.to_string()).collect();
    Ok(outcome(n >= 9, format!("{check} holds for {n}/10 seeds (misses: [{}])", misses.join(","))))
}

fn criterion_1() -> Res<Outcome> {
    let (leaky_cases, leaky_worst) = leaky_sweep();
    let (lstm_cases, lstm_worst) = lstm_sweep();
    let passed = leaky_cases >= 100 && lstm_cases >= 100 && leaky_worst < REL_TOL && lstm_worst < REL_TOL;
    Ok(outcome(
        passed,
        format!(
            "{leaky_cases} feedforward/leaky instances worst {leaky_worst:.2e}, {lstm_cases} lstm instances worst {lstm_worst:.2e}, tolerance {REL_TOL:e}"
        ),
    ))
}

fn criterion_2(mnist: Option<&PathBuf>) -> Res<Outcome> {
    let mut o = nine_of_ten("fig2a", "synthetic_k1_lt_random_lt_k5_lt_k10")?;
    if let Some(dir) = mnist {
        let r = preset("fig2a", 1, Some(dir))?;
        let c = r.check("mnist_k1_lt_random_lt_k5_lt_k10").ok_or("fig2a ran without its MNIST check")?;
        o.passed &= c.passed;
        o.detail += &format!("; mnist {}", c.detail);
    } else {
        o.detail += "; MNIST part skipped (TEMPOLEARN_MNIST unset)";
    }
    Ok(o)
}

fn labels(ds: &Dataset, s: &Schedule) -> Vec<usize> {
    s.order.iter().map(|&i| ds.labels[i]).collect()
}

/// Independent check of one schedule's invariants.
fn schedule_invariants(ds: &Dataset, s: &Schedule, condition: Condition, balanced: bool) -> Res<()> {
    let mut sorted = s.order.clone();
    sorted.sort_unstable();
    if sorted != (0..ds.len()).collect::<Vec<_>>() {
        return Err(format!("{condition}: order is not a permutation"));
    }
    let lab = labels(ds, s);
    for i in 0..lab.len() {
        if s.boundary_flags[i] != (i == 0 || lab[i] != lab[i - 1]) {
            return Err(format!("{condition}: boundary flag wrong at {i}"));
        }
    }
    let Condition::KRepetition(k) = condition else { return Ok(()) };
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for &c in &lab {
        match runs.last_mut() {
            Some((rc, n)) if *rc == c => *n += 1,
            _ => runs.push((c, 1)),
        }
    }
    for (idx, &(c, n)) in runs.iter().enumerate() {
        let final_run = runs[idx + 1..].iter().all(|&(rc, _)| rc != c);
        if n != k && !final_run {
            return Err(format!("{condition}: run of {n} for category {c} before its final run"));
        }
    }
    if k == 1 {
        if balanced && lab.windows(2).any(|w| w[0] == w[1]) {
            return Err("k1: adjacent positions share a category".into());
        }
        let mut last = BTreeMap::new();
        for (i, &c) in lab.iter().enumerate() {
            last.insert(c, i);
        }
        let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
        for (q, &c) in lab.iter().enumerate() {
            if let Some(&p) = prev.get(&c) {
                let mut between = lab[p + 1..q].to_vec();
                between.sort_unstable();
                let expect: Vec<usize> = last.iter().filter(|&(&d, &l)| d != c && l > p).map(|(&d, _)| d).collect();
                if between != expect {
                    return Err(format!("k1: between positions {p} and {q} saw {between:?}, expected {expect:?}"));
                }
            }
            prev.insert(c, q);
        }
    }
    Ok(())
}

/// All conditions over one session: per-schedule invariants plus identical
/// within-category exemplar sequences across every k.
fn session_invariants(ds: &Dataset, seed: u64, ks: &[usize], balanced: bool) -> Res<usize> {
    let session = Session::new(ds, seed).map_err(|e| e.to_string())?;
    let mut per_category: Option<Vec<Vec<usize>>> = None;
    let mut checked = 0;
    for &k in ks {
        let cond = Condition::KRepetition(k);
        let s = session.schedule(ds, cond).map_err(|e| e.to_string())?;
        schedule_invariants(ds, &s, cond, balanced)?;
        let mut seqs = vec![Vec::new(); ds.num_categories];
        for &i in &s.order {
            seqs[ds.labels[i]].push(i);
        }
        match &per_category {
            None => per_category = Some(seqs),
            Some(first) if *first != seqs => {
                return Err(format!("k{k}: within-category order differs from k{}", ks[0]))
            }
            Some(_) => {}
        }
        checked += 1;
    }
    let s = session.schedule(ds, Condition::Random).map_err(|e| e.to_string())?;
    schedule_invariants(ds, &s, Condition::Random, balanced)?;
    Ok(checked + 1)
}

/// Ten classes of 28×28 images with MNIST's class proportions at a fifth
/// of its size, written as IDX files under the standard names.
fn write_mnist_shaped(dir: &Path) -> Res<()> {
    let train_counts = [5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949];
    let test_counts = [980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009];
    let mut rng = Rng::new(28);
    for (stem, counts) in [("train", &train_counts), ("t10k", &test_counts)] {
        let mut samples = Vec::new();
        let mut labs = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for _ in 0..n / 5 {
                samples
                    .push((0..784).map(|_| if rng.next_f64() < 0.1 + 0.05 * c as f64 { 1.0 } else { 0.0 }).collect());
                labs.push(c);
            }
        }
        let ds = Dataset::new(stem, samples, labs, 10).map_err(|e| e.to_string())?;
        write_idx(
            &ds,
            28,
            28,
            &dir.join(format!("{stem}-images-idx3-ubyte")),
            &dir.join(format!("{stem}-labels-idx1-ubyte")),
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn criterion_12(mnist: Option<&PathBuf>) -> Res<Outcome> {
    let ks = [1, 3, 5, 10, 16, 24];
    let mut schedules = 0;
    for (cats, items) in [(4, 300), (2, 7), (3, 10), (5, 33), (10, 24)] {
        for seed in 0..40 {
            let ds = gen_low_overlap(&mut Rng::new(seed), cats, items, 2 * cats, 0.1).map_err(|e| e.to_string())?;
            schedules += session_invariants(&ds, seed + 100, &ks, true)?;
        }
    }
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (dir, source) = match mnist {
        Some(d) => (d.clone(), "MNIST"),
        None => {
            write_mnist_shaped(tmp.path())?;
            (tmp.path().to_path_buf(), "MNIST-shaped IDX surrogate")
        }
    };
    let mut mnist_schedules = 0;
    for seed in 0..5 {
        let (train, _) = mnist_split(&dir, Scale::Desk, seed).map_err(|e| e.to_string())?;
        mnist_schedules += session_invariants(&train, seed, &ks, false)?;
    }
    Ok(outcome(
        true,
        format!("{schedules} balanced synthetic schedules and {mnist_schedules} {source} desk-subset schedules satisfy every invariant"),
    ))
}

fn dir_bytes(dir: &Path) -> Res<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        out.insert(name, fs::read(&p).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn criterion_13() -> Res<Outcome> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let out = tmp.path().join(tag);
        let status = Command::new(env!("CARGO_BIN_EXE_tempolearn"))
            .args(["run", "fig2c", "--seed", "1", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        // 1 means the run finished with a failed check, which is fine here
        if !matches!(status.status.code(), Some(0 | 1)) {
            return Err(format!(
                "tempolearn exited with {:?}: {}",
                status.status,
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        outputs.push(dir_bytes(&out.join("fig2c"))?);
    }
    let same = outputs[0] == outputs[1];
    let csvs = outputs[0].keys().filter(|k| k.ends_with(".csv")).count();
    Ok(outcome(same && csvs > 0, format!("{csvs} CSVs, byte-identical across two runs: {same}")))
}

fn run() -> Res<Vec<(u32, &'static str, Outcome, f64)>> {
    let mnist = std::env::var_os("TEMPOLEARN_MNIST").map(PathBuf::from);
    let mnist = mnist.as_ref();
    let mut results = Vec::new();
    let mut record = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Res<Outcome>| -> Res<()> {
        let t = Instant::now();
        let o = f()?;
        let secs = t.elapsed().as_secs_f64();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {n:>2} {name}: {} [{secs:.0}s]", o.detail);
        results.push((n, name, o, secs));
        Ok(())
    };

    record(1, "gradient oracle", &mut criterion_1)?;
    record(2, "feedforward smoothness ordering", &mut || criterion_2(mnist))?;
    record(3, "leaky memory benefits from smoothness", &mut || {
        Ok(checks_where(&preset("fig2b", 1, None)?, |n| n == "leaky_k5_lt_k1"))
    })?;
    let fig2c = preset("fig2c", 1, None)?;
    record(4, "leaky+reset beats k1, random and feedforward", &mut || {
        Ok(checks_where(&fig2c, |n| n.starts_with("reset_")))
    })?;
    record(5, "stateless transfer of leaky+reset", &mut || {
        Ok(checks_where(&fig2c, |n| n == "stateless_reset_k5_beats_feedforward_k5"))
    })?;
    record(6, "non-overlapping stream reverses the memory benefit", &mut || {
        Ok(checks_where(&preset("a7", 1, None)?, |_| true))
    })?;
    record(7, "cross-entropy keeps the feedforward ordering", &mut || {
        nine_of_ten("a3", "ce_k1_lt_random_lt_k5_lt_k10")
    })?;
    record(8, "mini-batch order invariance and batch-matched smoothness", &mut || {
        let a5 = checks_where(&preset("a5", 1, None)?, |n| n == "batch6_ababab_equals_aaabbb_bitwise");
        let a6 = checks_where(&preset("a6", 1, None)?, |_| true);
        Ok(outcome(a5.passed && a6.passed, format!("{}; {}", a5.detail, a6.detail)))
    })?;
    record(9, "multiscale autoencoder error, selectivity and efficiency", &mut || {
        Ok(checks_where(&preset("fig3", 1, None)?, |_| true))
    })?;
    record(10, "slow features reconstructed better than fast", &mut || {
        Ok(checks_where(&preset("a13", 1, None)?, |_| true))
    })?;
    record(11, "LSTM within and across stream structures", &mut || {
        Ok(checks_where(&preset("a10", 1, None)?, |_| true))
    })?;
    record(12, "schedule invariants", &mut || criterion_12(mnist))?;
    record(13, "determinism of run fig2c", &mut criterion_13)?;
    Ok(results)
}

fn main() -> ExitCode {
    let t = Instant::now();
    let results = match run() {
        Ok(r) => r,
        Err(e) => {
            println!("acceptance run failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let passed = results.iter().filter(|r| r.2.passed).count();
    let unexpected: Vec<u32> =
        results.iter().filter(|r| !r.2.passed && !KNOWN_FAILURES.contains(&r.0)).map(|r| r.0).collect();
    let now_passing: Vec<u32> =
        results.iter().filter(|r| r.2.passed && KNOWN_FAILURES.contains(&r.0)).map(|r| r.0).collect();
    println!("{passed}/{} criteria pass in {:.0}s", results.len(), t.elapsed().as_secs_f64());
    if !now_passing.is_empty() {
        println!("listed as known failures but passing: {now_passing:?}");
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
