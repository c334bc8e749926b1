//! One line per acceptance criterion, then a single assertion over all.
//! Runs the full benchmark twice, so expect a couple of minutes.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use travbench::cli_io::pipeline::{COLLAPSE_RUN, NO_CORRECTION_RUN};
use travbench::cli_io::repro::{run_repro, ReproConfig, ReproSummary};
use travbench::encoder_net::{EncoderConfig, ModelState};
use travbench::evalmetrics::auroc;
use travbench::learners::Method;
use travbench::smppi::{NavOutcome, Scenario};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn out_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("travbench_acceptance_{}_{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn brute_auroc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut s = 0.0;
    for p in pos {
        for n in neg {
            s += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    s / (pos.len() * neg.len()) as f64
}

fn metric_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (np, nn) = (rng.gen_range(1..=150), rng.gen_range(1..=150));
        // half the sets draw from a coarse grid so ties are common
        let draw = |r: &mut ChaCha8Rng| {
            if i % 2 == 0 {
                r.gen_range(0..20) as f64
            } else {
                r.gen::<f64>()
            }
        };
        let pos: Vec<f64> = (0..np).map(|_| draw(&mut rng)).collect();
        let neg: Vec<f64> = (0..nn).map(|_| draw(&mut rng)).collect();
        let a = auroc(&pos, &neg).map_err(|e| e.to_string())?;
        worst = worst.max((a - brute_auroc(&pos, &neg)).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst <= 1e-12 && secs < 5.0,
        format!("100 sets, max |diff| {worst:.1e}, {secs:.2}s"),
    )
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let (worst, counts, with_reg) = common::run_gradcheck(120);
    let secs = t.elapsed().as_secs_f64();
    check(
        worst < common::TOLERANCE && counts.iter().all(|&c| c > 0) && with_reg > 0 && secs < 60.0,
        format!("120 configs (svdd/soft/nnpu/ours {counts:?}, {with_reg} with regression), max rel err {worst:.1e}, {secs:.2}s"),
    )
}

fn ordering(s: &ReproSummary, secs: f64) -> Outcome {
    let a = |m: &str| s.report.row(m).map(|r| r.auroc).unwrap_or(f64::NAN);
    let (ours, nnpu, soft, svdd) = (a("ours"), a("nnpu"), a("soft_svdd"), a("svdd"));
    check(
        ours > nnpu && soft >= svdd && ours >= 0.90 && s.n_positives >= 5000 && s.n_unlabeled >= 20000 && secs < 600.0,
        format!(
            "AUROC ours {ours:.4} > nnpu {nnpu:.4}, soft {soft:.4} >= svdd {svdd:.4}; {} pos / {} unl; {secs:.1}s",
            s.n_positives, s.n_unlabeled
        ),
    )
}

fn collapse(s: &ReproSummary) -> Outcome {
    let var = s
        .variances
        .iter()
        .find(|v| v.0 == COLLAPSE_RUN)
        .map_or(f64::NAN, |v| v.1);
    let tpr = s.report.row(COLLAPSE_RUN).map_or(f64::NAN, |r| r.tpr_mean);
    check(
        var < 1e-6 && (tpr - 0.5).abs() <= 0.02,
        format!("variance {var:.2e}, mean TPR {tpr:.4}"),
    )
}

fn non_negativity(s: &ReproSummary) -> Outcome {
    let min = |name: &str| {
        s.run(name)
            .map(|r| {
                r.log
                    .pu_terms
                    .iter()
                    .map(|t| t.reported)
                    .fold(f64::INFINITY, f64::min)
            })
            .unwrap_or(f64::NAN)
    };
    let neg = s.run(NO_CORRECTION_RUN).map_or(0, |r| {
        r.log.pu_terms.iter().filter(|t| t.reported < 0.0).count()
    });
    let (nnpu, ours, off) = (min("nnpu"), min("ours"), min(NO_CORRECTION_RUN));
    check(
        nnpu >= 0.0 && ours >= 0.0 && neg > 0,
        format!("min term nnpu {nnpu:.2e}, ours {ours:.2e}; uncorrected min {off:.3}, {neg} negative batches"),
    )
}

fn safety(s: &ReproSummary) -> Outcome {
    let t = Instant::now();
    let mut runs = Vec::new();
    for alpha1 in [0.5, 0.0] {
        let mut sc = Scenario::obstacle_band(alpha1);
        sc.mppi.seed = 1;
        runs.push(sc.run().map_err(|e| e.to_string())?.nav);
    }
    let secs = t.elapsed().as_secs_f64();
    let (on, off) = (&runs[0], &runs[1]);
    let repro_agrees = s
        .scenario("obstacle_band_alpha1_0.5")
        .map(|o| o.blocked_steps)
        == Some(on.blocked_contacts())
        && s.scenario("obstacle_band_alpha1_0")
            .map(|o| o.blocked_steps)
            == Some(off.blocked_contacts());
    check(
        on.blocked_contacts() == 0
            && off.blocked_contacts() >= 1
            && on.outcome == NavOutcome::Reached
            && off.outcome == NavOutcome::Reached
            && repro_agrees
            && secs < 120.0,
        format!(
            "blocked steps alpha1=0.5: {}, alpha1=0: {} (both {:?}/{:?}), {secs:.1}s",
            on.blocked_contacts(),
            off.blocked_contacts(),
            on.outcome,
            off.outcome
        ),
    )
}

fn stabilizing(s: &ReproSummary) -> Outcome {
    let imp = |n: &str| {
        s.scenario(n)
            .and_then(|o| o.true_impact)
            .unwrap_or(f64::NAN)
    };
    let (on, off) = (imp("bump_band_compact"), imp("bump_band_compact_alpha2_0"));
    check(
        on < off,
        format!("compact car impact alpha2=0.5 {on:.0} < alpha2=0 {off:.0}"),
    )
}

fn vehicles(s: &ReproSummary) -> Outcome {
    let dev = |n: &str| s.scenario(n).map_or(f64::NAN, |o| o.lateral_deviation);
    let (car, six) = (dev("bump_band_compact"), dev("bump_band_6x6"));
    check(
        car > six,
        format!("lateral deviation compact {car:.2} m > 6x6 {six:.2} m"),
    )
}

fn files_equal(a: &Path, b: &Path, files: &[PathBuf]) -> std::result::Result<usize, String> {
    for f in files {
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => return Err(format!("{} differs", f.display())),
        }
    }
    Ok(files.len())
}

fn determinism(first: &ReproSummary, dir: &Path) -> Outcome {
    let again = out_dir("second");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_travbench"))
        .args(["repro", "--seed", "1", "--out"])
        .arg(&again)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("travbench repro exited with {status}"));
    }
    let n = files_equal(dir, &again, &first.files)?;
    let kinds = ["report", "checkpoints/", "renders/"];
    let covered = kinds.iter().all(|k| {
        first
            .files
            .iter()
            .any(|f| f.to_string_lossy().starts_with(k))
    });
    let _ = std::fs::remove_dir_all(&again);
    check(
        covered,
        format!("{n} files byte-identical between the library run and `travbench repro --seed 1`"),
    )
}

fn permutation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for m in 0..20u64 {
        let k = rng.gen_range(4..=32);
        let cfg = EncoderConfig {
            k,
            final_layer_bias: m % 2 == 1,
            ..EncoderConfig::default()
        };
        let model =
            ModelState::init(cfg, Method::ALL[(m % 4) as usize], m).map_err(|e| e.to_string())?;
        let mut patch: Vec<[f64; 3]> = (0..k)
            .map(|_| {
                [
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-0.5..0.5),
                ]
            })
            .collect();
        let e = model.encode(&patch).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            patch.shuffle(&mut rng);
            if model.encode(&patch).map_err(|e| e.to_string())? != e {
                return Err(format!("model {m} changed under a permutation"));
            }
        }
    }
    Ok("20 models x 100 permutations, exact equality".into())
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |i: usize, name: &'static str, r: Outcome| {
        match &r {
            Ok(d) => println!("criterion {i:>2} PASS  {name}: {d}"),
            Err(d) => println!("criterion {i:>2} FAIL  {name}: {d}"),
        }
        results.push((i, name, r));
    };

    report(1, "metric oracle", metric_oracle());
    report(2, "gradient check", gradients());

    let dir = out_dir("first");
    let t = Instant::now();
    let summary = run_repro(&ReproConfig::full(1), &dir);
    let secs = t.elapsed().as_secs_f64();
    match &summary {
        Ok(s) => {
            report(3, "method ordering", ordering(s, secs));
            report(4, "collapse signature", collapse(s));
            report(5, "nnPU non-negativity", non_negativity(s));
            report(6, "navigation safety", safety(s));
            report(7, "stabilizing ablation", stabilizing(s));
            report(8, "vehicle distinctness", vehicles(s));
            report(9, "determinism", determinism(s, &dir));
        }
        Err(e) => {
            for (i, name) in [
                (3, "method ordering"),
                (4, "collapse signature"),
                (5, "nnPU non-negativity"),
                (6, "navigation safety"),
                (7, "stabilizing ablation"),
                (8, "vehicle distinctness"),
                (9, "determinism"),
            ] {
                report(i, name, Err(format!("repro failed: {e}")));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    report(10, "permutation invariance", permutation());

    let failed: Vec<usize> = results
        .iter()
        .filter(|r| r.2.is_err())
        .map(|r| r.0)
        .collect();
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", results.len());
}
