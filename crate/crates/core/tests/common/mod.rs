#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use travbench::encoder_net::{EncoderConfig, ModelState, OutputGrads, Tape};
use travbench::learners::{
    loss_nnpu, loss_ours_pu, loss_regression, loss_soft_svdd, loss_svdd, Method, PuConfig,
};

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-4;

/// A small random network with a random batch of patches.
#[derive(Debug, Clone)]
pub struct GradCase {
    pub model: ModelState,
    pub pos: Vec<Vec<[f64; 3]>>,
    pub unl: Vec<Vec<[f64; 3]>>,
    pub targets: Vec<f64>,
    pub with_regression: bool,
}

fn patch(rng: &mut ChaCha8Rng, k: usize) -> Vec<[f64; 3]> {
    (0..k)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.5..0.5),
            ]
        })
        .collect()
}

fn widths(rng: &mut ChaCha8Rng, n: std::ops::Range<usize>) -> Vec<usize> {
    let len = rng.gen_range(n);
    (0..len).map(|_| rng.gen_range(2..7)).collect()
}

pub fn random_case(seed: u64, method: Method) -> GradCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point_widths = vec![3];
    point_widths.extend(widths(&mut rng, 1..3));
    let config = EncoderConfig {
        k: rng.gen_range(3..7),
        point_widths,
        embedding_dim: rng.gen_range(2..6),
        class_head: widths(&mut rng, 0..2),
        reg_head: widths(&mut rng, 0..2),
        final_layer_bias: rng.gen(),
    };
    let mut model = ModelState::init(config.clone(), method, seed).unwrap();
    // nonzero biases so that no ReLU sits exactly at its kink
    let mask = model.weight_mask();
    for (p, w) in model.params.iter_mut().zip(&mask) {
        if !w {
            *p = rng.gen_range(-0.3..0.3);
        }
    }
    model.pu = PuConfig {
        prior: rng.gen_range(0.2..0.8),
        non_negative: rng.gen(),
    };
    model.svdd.nu = rng.gen_range(0.2..1.0);
    model.svdd.learn_center = rng.gen();
    let (np, nu) = (rng.gen_range(2..5), rng.gen_range(2..5));
    let pos: Vec<_> = (0..np).map(|_| patch(&mut rng, config.k)).collect();
    let unl: Vec<_> = (0..nu).map(|_| patch(&mut rng, config.k)).collect();

    let embs: Vec<Vec<f64>> = pos.iter().map(|p| model.encode(p).unwrap()).collect();
    let dim = config.embedding_dim;
    model.svdd.center = (0..dim)
        .map(|j| embs.iter().map(|e| e[j]).sum::<f64>() / np as f64 + rng.gen_range(-0.1..0.1))
        .collect();
    let d: Vec<f64> = embs
        .iter()
        .map(|e| {
            e.iter()
                .zip(&model.svdd.center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    model.svdd.radius = mean * rng.gen_range(0.6..1.4) + 0.05;
    let targets = (0..np).map(|_| rng.gen_range(0.0..1.0)).collect();
    GradCase {
        model,
        pos,
        unl,
        targets,
        with_regression: rng.gen(),
    }
}

/// Distance of a piecewise loss from its nearest branch switch.
fn branch_margin(case: &GradCase, outs: &[(Vec<f64>, f64, f64)]) -> f64 {
    let m = &case.model;
    let np = case.pos.len();
    let r2 = m.svdd.radius * m.svdd.radius;
    let d2 = |e: &[f64]| {
        e.iter()
            .zip(&m.svdd.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    match m.method {
        Method::Svdd => f64::INFINITY,
        Method::SoftSvdd => outs[..np]
            .iter()
            .map(|o| (d2(&o.0) - r2).abs())
            .fold(f64::INFINITY, f64::min),
        Method::NnPu => {
            let lp: Vec<f64> = outs[..np].iter().map(|o| o.1).collect();
            let lu: Vec<f64> = outs[np..].iter().map(|o| o.1).collect();
            loss_nnpu(&lp, &lu, &m.pu).raw_negative_term.abs()
        }
        Method::Ours => {
            let ep: Vec<Vec<f64>> = outs[..np].iter().map(|o| o.0.clone()).collect();
            let eu: Vec<Vec<f64>> = outs[np..].iter().map(|o| o.0.clone()).collect();
            loss_ours_pu(&ep, &eu, &m.svdd, &m.pu)
                .pu
                .raw_negative_term
                .abs()
        }
    }
}

/// The objective the trainer descends, and its analytic gradient over the
/// network parameters, then the radius, then the center.
pub fn objective(case: &GradCase, want_grad: bool) -> (f64, Vec<f64>, f64) {
    let m = &case.model;
    let np = case.pos.len();
    let patches: Vec<&Vec<[f64; 3]>> = case.pos.iter().chain(&case.unl).collect();
    let mut tapes = vec![Tape::default(); patches.len()];
    let outs: Vec<(Vec<f64>, f64, f64)> = patches
        .iter()
        .zip(tapes.iter_mut())
        .map(|(p, t)| {
            let o = m.forward(p, t).unwrap();
            (o.embedding, o.heads.class_logit, o.heads.trav_pred)
        })
        .collect();
    let mut ups = vec![OutputGrads::default(); patches.len()];
    let (mut d_radius, mut d_center) = (0.0, vec![0.0; m.svdd.center.len()]);
    let mut value = match m.method {
        Method::Svdd | Method::SoftSvdd => {
            let embs: Vec<Vec<f64>> = outs[..np].iter().map(|o| o.0.clone()).collect();
            let l = if m.method == Method::Svdd {
                loss_svdd(&embs, &m.svdd, 0.0)
            } else {
                loss_soft_svdd(&embs, &m.svdd)
            };
            for (u, d) in ups.iter_mut().zip(l.d_embeddings) {
                u.d_embedding = d;
            }
            d_radius = l.d_radius;
            d_center = l.d_center;
            l.value
        }
        Method::NnPu => {
            let lp: Vec<f64> = outs[..np].iter().map(|o| o.1).collect();
            let lu: Vec<f64> = outs[np..].iter().map(|o| o.1).collect();
            let l = loss_nnpu(&lp, &lu, &m.pu);
            for (u, d) in ups.iter_mut().zip(l.d_pos.iter().chain(&l.d_unl)) {
                u.d_class_logit = *d;
            }
            if l.corrected {
                -l.raw_negative_term
            } else {
                l.value
            }
        }
        Method::Ours => {
            let ep: Vec<Vec<f64>> = outs[..np].iter().map(|o| o.0.clone()).collect();
            let eu: Vec<Vec<f64>> = outs[np..].iter().map(|o| o.0.clone()).collect();
            let l = loss_ours_pu(&ep, &eu, &m.svdd, &m.pu);
            for (u, d) in ups.iter_mut().zip(l.d_pos.into_iter().chain(l.d_unl)) {
                u.d_embedding = d;
            }
            d_radius = l.d_radius;
            d_center = l.d_center;
            if l.pu.corrected {
                -l.pu.raw_negative_term
            } else {
                l.pu.value
            }
        }
    };
    if case.with_regression {
        let preds: Vec<f64> = outs[..np].iter().map(|o| o.2).collect();
        let (v, g) = loss_regression(&preds, &case.targets);
        value += v;
        for (u, d) in ups.iter_mut().zip(g) {
            u.d_trav_pred = d;
        }
    }
    let mut grads = Vec::new();
    if want_grad {
        grads = vec![0.0; m.n_params()];
        for (u, t) in ups.iter().zip(&tapes) {
            m.backward(t, u, &mut grads).unwrap();
        }
        grads.push(d_radius);
        grads.extend(d_center);
    }
    let kink = tapes
        .iter()
        .map(|t| t.kink_margin(m))
        .fold(f64::INFINITY, f64::min);
    (value, grads, kink.min(branch_margin(case, &outs)))
}

fn perturbed(case: &GradCase, i: usize, h: f64) -> GradCase {
    let mut c = case.clone();
    let n = c.model.n_params();
    if i < n {
        c.model.params[i] += h;
    } else if i == n {
        c.model.svdd.radius += h;
    } else {
        c.model.svdd.center[i - n - 1] += h;
    }
    c
}

/// Relative error `‖a − n‖ / max(‖a‖, ‖n‖)` between the analytic gradient
/// and central differences over every coordinate the method trains, or
/// `None` when the case sits too close to a kink for differences to mean
/// anything.
pub fn check(case: &GradCase) -> Option<f64> {
    let (_, analytic, margin) = objective(case, true);
    if margin < 1e-3 {
        return None;
    }
    let m = &case.model;
    let n = m.n_params();
    let mut coords: Vec<usize> = (0..n).collect();
    if matches!(m.method, Method::SoftSvdd | Method::Ours) {
        coords.push(n);
    }
    if m.svdd.learn_center && m.method != Method::NnPu {
        coords.extend(n + 1..n + 1 + m.svdd.center.len());
    }
    let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
    for i in coords {
        let fp = objective(&perturbed(case, i, STEP), false).0;
        let fm = objective(&perturbed(case, i, -STEP), false).0;
        let num = (fp - fm) / (2.0 * STEP);
        let a = analytic[i];
        diff += (a - num) * (a - num);
        na += a * a;
        nn += num * num;
    }
    let scale = na.sqrt().max(nn.sqrt());
    Some(if scale < 1e-12 {
        diff.sqrt()
    } else {
        diff.sqrt() / scale
    })
}

/// Runs checks over seeds until `n` configurations were usable; returns
/// the worst error and the per-method counts.
pub fn run_gradcheck(n: usize) -> (f64, [usize; 4], usize) {
    let mut worst = 0.0f64;
    let mut counts = [0usize; 4];
    let (mut done, mut with_reg) = (0, 0);
    let mut seed = 0u64;
    while done < n {
        let method = Method::ALL[(seed % 4) as usize];
        let case = random_case(seed, method);
        seed += 1;
        if let Some(e) = check(&case) {
            worst = worst.max(e);
            counts[(seed as usize - 1) % 4] += 1;
            with_reg += case.with_regression as usize;
            done += 1;
        }
        assert!(seed < 20 * n as u64, "too many configurations near a kink");
    }
    (worst, counts, with_reg)
}
