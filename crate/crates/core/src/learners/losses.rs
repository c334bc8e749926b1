//! Training objectives and their gradients with respect to the network
//! outputs (embeddings, logits, regression predictions).

use super::{PuConfig, SvddState};
use crate::encoder_net::sigmoid;

/// Loss value with gradients w.r.t. each embedding and the sphere state.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingLoss {
    pub value: f64,
    pub d_embeddings: Vec<Vec<f64>>,
    pub d_radius: f64,
    /// Zero unless the center is learnable.
    pub d_center: Vec<f64>,
}

fn sq_dist(a: &[f64], c: &[f64]) -> f64 {
    a.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One-class Deep SVDD: mean squared distance to the center, plus a
/// precomputed weight-decay value (its gradient is applied by the trainer).
pub fn loss_svdd(
    embeddings: &[Vec<f64>],
    svdd: &SvddState,
    weight_decay_term: f64,
) -> EmbeddingLoss {
    let n = embeddings.len().max(1) as f64;
    let dim = svdd.center.len();
    let mut value = 0.0;
    let mut d_center = vec![0.0; dim];
    let d_embeddings = embeddings
        .iter()
        .map(|e| {
            value += sq_dist(e, &svdd.center);
            e.iter()
                .zip(&svdd.center)
                .zip(d_center.iter_mut())
                .map(|((x, c), dc)| {
                    let g = 2.0 * (x - c) / n;
                    *dc -= g;
                    g
                })
                .collect()
        })
        .collect();
    if !svdd.learn_center {
        d_center.iter_mut().for_each(|v| *v = 0.0);
    }
    EmbeddingLoss {
        value: value / n + weight_decay_term,
        d_embeddings,
        d_radius: 0.0,
        d_center,
    }
}

/// Soft-boundary Deep SVDD: `R² + 1/(ν·n) Σ max(0, ‖φ−c‖² − R²)`.
pub fn loss_soft_svdd(embeddings: &[Vec<f64>], svdd: &SvddState) -> EmbeddingLoss {
    let n = embeddings.len().max(1) as f64;
    let r2 = svdd.radius * svdd.radius;
    let scale = 1.0 / (svdd.nu * n);
    let dim = svdd.center.len();
    let mut value = r2;
    let mut d_radius = 2.0 * svdd.radius;
    let mut d_center = vec![0.0; dim];
    let d_embeddings = embeddings
        .iter()
        .map(|e| {
            let d2 = sq_dist(e, &svdd.center);
            if d2 > r2 {
                value += scale * (d2 - r2);
                d_radius -= scale * 2.0 * svdd.radius;
                e.iter()
                    .zip(&svdd.center)
                    .zip(d_center.iter_mut())
                    .map(|((x, c), dc)| {
                        let g = scale * 2.0 * (x - c);
                        *dc -= g;
                        g
                    })
                    .collect()
            } else {
                vec![0.0; e.len()]
            }
        })
        .collect();
    if !svdd.learn_center {
        d_center.iter_mut().for_each(|v| *v = 0.0);
    }
    EmbeddingLoss {
        value,
        d_embeddings,
        d_radius,
        d_center,
    }
}

/// Sigmoid surrogate `ℓ(z) = 1/(1+e^z)`.
#[inline]
pub fn sigmoid_loss(z: f64) -> f64 {
    sigmoid(-z)
}

/// `dℓ/dz`.
#[inline]
fn sigmoid_loss_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    -s * (1.0 - s)
}

/// Non-negative PU risk on raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PuLoss {
    /// Reported risk `π·R̂p⁺ + max(0, R̂u⁻ − π·R̂p⁻)` (no clamp when the
    /// correction is off).
    pub value: f64,
    /// Gradient of the objective actually descended, w.r.t. each logit.
    pub d_pos: Vec<f64>,
    pub d_unl: Vec<f64>,
    /// `R̂u⁻ − π·R̂p⁻` before clamping.
    pub raw_negative_term: f64,
    /// The unlabeled-risk term as it enters `value`.
    pub negative_term: f64,
    /// True when the correction fired: the descended objective is then
    /// `−(R̂u⁻ − π·R̂p⁻)` instead of the risk.
    pub corrected: bool,
}

/// nnPU risk. When the corrected term would be negative the estimator
/// steps along `−∇(R̂u⁻ − π·R̂p⁻)` (the non-negative descent rule with γ = 1).
pub fn loss_nnpu(pos_logits: &[f64], unl_logits: &[f64], pu: &PuConfig) -> PuLoss {
    let np = pos_logits.len().max(1) as f64;
    let nu = unl_logits.len().max(1) as f64;
    let prior = pu.prior;
    let r_p_plus: f64 = pos_logits.iter().map(|&z| sigmoid_loss(z)).sum::<f64>() / np;
    let r_p_minus: f64 = pos_logits.iter().map(|&z| sigmoid_loss(-z)).sum::<f64>() / np;
    let r_u_minus: f64 = unl_logits.iter().map(|&z| sigmoid_loss(-z)).sum::<f64>() / nu;
    let raw = r_u_minus - prior * r_p_minus;
    let corrected = pu.non_negative && raw < 0.0;

    // d/dz ℓ(-z) = -ℓ'(-z)
    let (d_pos, d_unl, value, negative_term);
    if corrected {
        d_pos = pos_logits
            .iter()
            .map(|&z| prior * (-sigmoid_loss_grad(-z)) / np)
            .collect();
        d_unl = unl_logits
            .iter()
            .map(|&z| -(-sigmoid_loss_grad(-z)) / nu)
            .collect();
        negative_term = 0.0;
        value = prior * r_p_plus;
    } else {
        d_pos = pos_logits
            .iter()
            .map(|&z| prior * sigmoid_loss_grad(z) / np - prior * (-sigmoid_loss_grad(-z)) / np)
            .collect();
        d_unl = unl_logits
            .iter()
            .map(|&z| (-sigmoid_loss_grad(-z)) / nu)
            .collect();
        negative_term = raw;
        value = prior * r_p_plus + raw;
    }
    PuLoss {
        value,
        d_pos,
        d_unl,
        raw_negative_term: raw,
        negative_term,
        corrected,
    }
}

/// Hypersphere discriminant `R² − ‖φ − c‖²`.
pub fn discriminant(embedding: &[f64], svdd: &SvddState) -> f64 {
    svdd.radius * svdd.radius - sq_dist(embedding, &svdd.center)
}

/// nnPU risk on the hypersphere discriminant, with gradients pushed back
/// to the embeddings and the radius.
#[derive(Debug, Clone, PartialEq)]
pub struct OursLoss {
    pub pu: PuLoss,
    pub d_pos: Vec<Vec<f64>>,
    pub d_unl: Vec<Vec<f64>>,
    pub d_radius: f64,
    pub d_center: Vec<f64>,
}

pub fn loss_ours_pu(
    pos: &[Vec<f64>],
    unl: &[Vec<f64>],
    svdd: &SvddState,
    pu: &PuConfig,
) -> OursLoss {
    let gp: Vec<f64> = pos.iter().map(|e| discriminant(e, svdd)).collect();
    let gu: Vec<f64> = unl.iter().map(|e| discriminant(e, svdd)).collect();
    let inner = loss_nnpu(&gp, &gu, pu);
    let dim = svdd.center.len();
    let mut d_radius = 0.0;
    let mut d_center = vec![0.0; dim];
    let mut back = |embs: &[Vec<f64>], dg: &[f64]| -> Vec<Vec<f64>> {
        embs.iter()
            .zip(dg)
            .map(|(e, &g)| {
                d_radius += g * 2.0 * svdd.radius;
                e.iter()
                    .zip(&svdd.center)
                    .zip(d_center.iter_mut())
                    .map(|((x, c), dc)| {
                        let v = -2.0 * g * (x - c);
                        *dc -= v;
                        v
                    })
                    .collect()
            })
            .collect()
    };
    let d_pos = back(pos, &inner.d_pos);
    let d_unl = back(unl, &inner.d_unl);
    if !svdd.learn_center {
        d_center.iter_mut().for_each(|v| *v = 0.0);
    }
    OursLoss {
        pu: inner,
        d_pos,
        d_unl,
        d_radius,
        d_center,
    }
}

/// Mean squared error over labeled positives; empty input gives zero.
pub fn loss_regression(preds: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(preds.len(), targets.len());
    if preds.is_empty() {
        return (0.0, Vec::new());
    }
    let n = preds.len() as f64;
    let value = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    let grad = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    (value, grad)
}

/// `(λ/2)·Σ w²` over weight entries.
pub fn weight_decay_term(params: &[f64], mask: &[bool], lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    0.5 * lambda
        * params
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(w, _)| w * w)
            .sum::<f64>()
}
