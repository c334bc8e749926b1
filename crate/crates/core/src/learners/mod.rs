//! The four objectives (Deep SVDD, soft-boundary SVDD, nnPU, and the
//! hypersphere-discriminant PU objective) plus the regression head, served
//! by one deterministic training loop.

mod losses;
mod optim;

pub use losses::{
    discriminant, loss_nnpu, loss_ours_pu, loss_regression, loss_soft_svdd, loss_svdd,
    sigmoid_loss, weight_decay_term, EmbeddingLoss, OursLoss, PuLoss,
};
pub use optim::{Optimizer, OptimizerState};

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{augment, AugmentSpec, DatasetSplit, LabelKind, TraversalSample};
use crate::encoder_net::{sigmoid, EncoderConfig, ModelState, OutputGrads, Tape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Svdd,
    SoftSvdd,
    NnPu,
    Ours,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Svdd, Method::SoftSvdd, Method::NnPu, Method::Ours];

    pub fn name(self) -> &'static str {
        match self {
            Method::Svdd => "svdd",
            Method::SoftSvdd => "soft_svdd",
            Method::NnPu => "nnpu",
            Method::Ours => "ours",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Methods that see only positives.
    pub fn is_one_class(self) -> bool {
        matches!(self, Method::Svdd | Method::SoftSvdd)
    }

    fn uses_radius(self) -> bool {
        matches!(self, Method::SoftSvdd | Method::Ours)
    }
}

/// Hypersphere center, radius and soft-boundary ν.
#[derive(Debug, Clone, PartialEq)]
pub struct SvddState {
    pub center: Vec<f64>,
    pub radius: f64,
    pub nu: f64,
    /// Off by default; turning it on (with a final-layer bias) admits the
    /// trivial collapsed solution.
    pub learn_center: bool,
}

impl SvddState {
    pub fn new(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            radius: 0.0,
            nu: 0.1,
            learn_center: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuConfig {
    pub prior: f64,
    pub non_negative: bool,
}

impl Default for PuConfig {
    fn default() -> Self {
        Self {
            prior: 0.5,
            non_negative: true,
        }
    }
}

/// Decision threshold on the normal score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalThreshold(pub f64);

impl Default for EvalThreshold {
    fn default() -> Self {
        Self(0.5)
    }
}

impl EvalThreshold {
    pub fn new(t: f64) -> Result<Self> {
        if t > 0.0 && t < 1.0 {
            Ok(Self(t))
        } else {
            Err(Error::InvalidConfig(format!(
                "threshold {t} must lie in (0,1)"
            )))
        }
    }

    pub fn classify(self, score: f64) -> bool {
        score >= self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weight_decay: f64,
    pub optimizer: Optimizer,
    pub encoder: EncoderConfig,
    pub nu: f64,
    pub pu: PuConfig,
    pub learn_center: bool,
    pub augment: Option<AugmentSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 300,
            seed: 0,
            weight_decay: 1e-5,
            optimizer: Optimizer::adam(),
            encoder: EncoderConfig::default(),
            nu: 0.1,
            pu: PuConfig::default(),
            learn_center: false,
            augment: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "nu {} outside (0,1]",
                self.nu
            )));
        }
        if !(self.pu.prior > 0.0 && self.pu.prior < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "class prior {} outside (0,1)",
                self.pu.prior
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig(
                "weight_decay must be non-negative".into(),
            ));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        self.encoder.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub method_loss: f64,
    pub regression_loss: f64,
    pub total: f64,
}

/// Unlabeled-risk term of one PU batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchTerm {
    pub epoch: usize,
    /// `R̂u⁻ − π·R̂p⁻` before any clamp.
    pub raw: f64,
    /// The term as reported in the risk.
    pub reported: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub pu_terms: Vec<BatchTerm>,
}

impl TrainLog {
    /// `epoch,method_loss,regression_loss,total` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,method_loss,regression_loss,total\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e}",
                e.epoch, e.method_loss, e.regression_loss, e.total
            );
        }
        s
    }
}

/// Normal score in `[0,1]`: `exp(−‖φ−c‖²)` for the one-class methods, the
/// sigmoid of the logit (nnPU) or of the discriminant (ours).
pub fn score(state: &ModelState, sample: &TraversalSample) -> Result<f64> {
    let emb = state.encode(&sample.patch)?;
    Ok(score_embedding(state, &emb))
}

pub fn score_embedding(state: &ModelState, emb: &[f64]) -> f64 {
    match state.method {
        Method::Svdd | Method::SoftSvdd => {
            let d2: f64 = emb
                .iter()
                .zip(&state.svdd.center)
                .map(|(a, c)| (a - c) * (a - c))
                .sum();
            (-d2).exp()
        }
        Method::NnPu => sigmoid(state.forward_heads(emb).class_logit),
        Method::Ours => sigmoid(discriminant(emb, &state.svdd)),
    }
}

/// Predicted traversability value in `(0,1)`.
pub fn predict_value(state: &ModelState, sample: &TraversalSample) -> Result<f64> {
    let emb = state.encode(&sample.patch)?;
    Ok(state.forward_heads(&emb).trav_pred)
}

/// Total sample variance (trace of the covariance) of the embeddings.
pub fn embedding_variance(state: &ModelState, samples: &[TraversalSample]) -> Result<f64> {
    if samples.len() < 2 {
        return Ok(0.0);
    }
    let embs = samples
        .iter()
        .map(|s| state.encode(&s.patch))
        .collect::<Result<Vec<_>>>()?;
    let dim = embs[0].len();
    let n = embs.len() as f64;
    let mut total = 0.0;
    for j in 0..dim {
        let mean = embs.iter().map(|e| e[j]).sum::<f64>() / n;
        total += embs.iter().map(|e| (e[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
    }
    Ok(total)
}

/// Fresh model for `method`: seeded weights, and for the hypersphere
/// methods the center set to the mean initial embedding of the training
/// positives (radius to the RMS distance for the methods that learn it).
pub fn initialize(
    train: &[TraversalSample],
    method: Method,
    cfg: &TrainConfig,
) -> Result<ModelState> {
    cfg.validate()?;
    let positives: Vec<&TraversalSample> = train.iter().filter(|s| s.is_positive()).collect();
    if positives.is_empty() {
        return Err(Error::CannotTrain("training split has no positives".into()));
    }
    if !method.is_one_class() && !train.iter().any(|s| s.label == LabelKind::Unlabeled) {
        return Err(Error::CannotTrain(format!(
            "{} needs unlabeled samples",
            method.name()
        )));
    }
    let mut m = ModelState::init(cfg.encoder.clone(), method, cfg.seed)?;
    m.pu = cfg.pu;
    m.svdd.nu = cfg.nu;
    m.svdd.learn_center = cfg.learn_center;
    if method != Method::NnPu {
        let dim = cfg.encoder.embedding_dim;
        let mut c = vec![0.0; dim];
        let embs = positives
            .iter()
            .map(|s| m.encode(&s.patch))
            .collect::<Result<Vec<_>>>()?;
        for e in &embs {
            for (cj, ej) in c.iter_mut().zip(e) {
                *cj += ej;
            }
        }
        let n = embs.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        if method.uses_radius() {
            let msd = embs
                .iter()
                .map(|e| {
                    e.iter()
                        .zip(&c)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .sum::<f64>()
                / n;
            m.svdd.radius = msd.sqrt();
        }
        m.svdd.center = c;
    }
    Ok(m)
}

/// Contiguous slice `i` of `n` split into `parts` nearly equal pieces.
fn chunk(n: usize, parts: usize, i: usize) -> std::ops::Range<usize> {
    (i * n / parts)..((i + 1) * n / parts)
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut s = crate::terrain_sim::SplitMix::new(
        seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.rotate_left(32),
    );
    s.next_u64()
}

struct Batch<'a> {
    samples: Vec<std::borrow::Cow<'a, TraversalSample>>,
    /// Number of leading positives in `samples`.
    n_pos: usize,
}

/// Trains `method` on `split.train`. Deterministic for a fixed config.
pub fn train(
    split: &DatasetSplit,
    method: Method,
    with_regression: bool,
    cfg: &TrainConfig,
) -> Result<(ModelState, TrainLog)> {
    let mut model = initialize(&split.train, method, cfg)?;
    let mut log = TrainLog::default();
    if cfg.epochs == 0 {
        return Ok((model, log));
    }
    let pos: Vec<&TraversalSample> = split.train.iter().filter(|s| s.is_positive()).collect();
    let unl: Vec<&TraversalSample> = split
        .train
        .iter()
        .filter(|s| s.label == LabelKind::Unlabeled)
        .collect();
    if with_regression && pos.iter().any(|s| s.trav_value.is_none()) {
        return Err(Error::CannotTrain(
            "regression needs a value on every positive".into(),
        ));
    }
    let one_class = method.is_one_class();
    let n_batches = if one_class {
        pos.len().div_ceil(cfg.batch_size)
    } else {
        (pos.len() + unl.len())
            .div_ceil(cfg.batch_size)
            .min(pos.len())
            .min(unl.len())
    };

    let dim = cfg.encoder.embedding_dim;
    let n_net = model.n_params();
    let extra_r = method.uses_radius() as usize;
    let extra_c = if cfg.learn_center && method != Method::NnPu {
        dim
    } else {
        0
    };
    let n_theta = n_net + extra_r + extra_c;
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, n_theta);
    let mask = model.weight_mask();
    let mut theta = vec![0.0; n_theta];
    let mut grads = vec![0.0; n_theta];
    let mut tapes: Vec<Tape> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5452_4149_4E00);
    let mut pos_order: Vec<usize> = (0..pos.len()).collect();
    let mut unl_order: Vec<usize> = (0..unl.len()).collect();

    for epoch in 0..cfg.epochs {
        pos_order.shuffle(&mut rng);
        unl_order.shuffle(&mut rng);
        let (mut sum_m, mut sum_r) = (0.0, 0.0);
        for b in 0..n_batches {
            let mut batch = Batch {
                samples: Vec::new(),
                n_pos: 0,
            };
            for &i in &pos_order[chunk(pos.len(), n_batches, b)] {
                batch.samples.push(std::borrow::Cow::Borrowed(pos[i]));
            }
            batch.n_pos = batch.samples.len();
            if !one_class {
                for &i in &unl_order[chunk(unl.len(), n_batches, b)] {
                    batch.samples.push(std::borrow::Cow::Borrowed(unl[i]));
                }
            }
            if let Some(spec) = &cfg.augment {
                for (j, s) in batch.samples.iter_mut().enumerate() {
                    let seed = mix(cfg.seed, (epoch * n_batches + b) as u64, j as u64);
                    *s = std::borrow::Cow::Owned(augment(s, spec, seed));
                }
            }
            let (lm, lr) = step(
                &mut model,
                &batch,
                method,
                with_regression,
                cfg,
                &mut tapes,
                &mut grads,
                epoch,
                &mut log,
            )?;
            sum_m += lm;
            sum_r += lr;

            // weight decay gradient on weights only
            if cfg.weight_decay > 0.0 {
                for ((g, w), &is_w) in grads.iter_mut().zip(&model.params).zip(&mask) {
                    if is_w {
                        *g += cfg.weight_decay * w;
                    }
                }
            }
            theta[..n_net].copy_from_slice(&model.params);
            if extra_r == 1 {
                theta[n_net] = model.svdd.radius;
            }
            if extra_c > 0 {
                theta[n_net + extra_r..].copy_from_slice(&model.svdd.center);
            }
            opt.step(&mut theta, &grads);
            model.params.copy_from_slice(&theta[..n_net]);
            if extra_r == 1 {
                model.svdd.radius = theta[n_net].abs();
            }
            if extra_c > 0 {
                model.svdd.center.copy_from_slice(&theta[n_net + extra_r..]);
            }
        }
        let nb = n_batches.max(1) as f64;
        let method_loss = sum_m / nb;
        let regression_loss = sum_r / nb;
        log.epochs.push(EpochLog {
            epoch,
            method_loss,
            regression_loss,
            total: method_loss + regression_loss,
        });
    }
    Ok((model, log))
}

/// Loss and gradient for one batch. Fills `grads` (network, then radius,
/// then center) and returns `(method_loss, regression_loss)`.
#[allow(clippy::too_many_arguments)]
fn step(
    model: &mut ModelState,
    batch: &Batch<'_>,
    method: Method,
    with_regression: bool,
    cfg: &TrainConfig,
    tapes: &mut Vec<Tape>,
    grads: &mut [f64],
    epoch: usize,
    log: &mut TrainLog,
) -> Result<(f64, f64)> {
    let n = batch.samples.len();
    if tapes.len() < n {
        tapes.resize_with(n, Tape::default);
    }
    let mut outs = Vec::with_capacity(n);
    for (s, tape) in batch.samples.iter().zip(tapes.iter_mut()) {
        outs.push(model.forward(&s.patch, tape)?);
    }
    let np = batch.n_pos;
    let mut ups: Vec<OutputGrads> = vec![OutputGrads::default(); n];
    let n_net = model.n_params();
    grads.iter_mut().for_each(|g| *g = 0.0);
    let decay = weight_decay_term(&model.params, &model.weight_mask(), cfg.weight_decay);

    let mut d_radius = 0.0;
    let mut d_center: Vec<f64> = Vec::new();
    let method_loss = match method {
        Method::Svdd | Method::SoftSvdd => {
            let embs: Vec<Vec<f64>> = outs[..np].iter().map(|o| o.embedding.clone()).collect();
            let l = if method == Method::Svdd {
                loss_svdd(&embs, &model.svdd, decay)
            } else {
                let mut l = loss_soft_svdd(&embs, &model.svdd);
                l.value += decay;
                l
            };
            for (u, d) in ups.iter_mut().zip(l.d_embeddings) {
                u.d_embedding = d;
            }
            d_radius = l.d_radius;
            d_center = l.d_center;
            l.value
        }
        Method::NnPu => {
            let lp: Vec<f64> = outs[..np].iter().map(|o| o.heads.class_logit).collect();
            let lu: Vec<f64> = outs[np..].iter().map(|o| o.heads.class_logit).collect();
            let l = loss_nnpu(&lp, &lu, &model.pu);
            log.pu_terms.push(BatchTerm {
                epoch,
                raw: l.raw_negative_term,
                reported: l.negative_term,
            });
            for (u, d) in ups.iter_mut().zip(l.d_pos.iter().chain(&l.d_unl)) {
                u.d_class_logit = *d;
            }
            l.value + decay
        }
        Method::Ours => {
            let ep: Vec<Vec<f64>> = outs[..np].iter().map(|o| o.embedding.clone()).collect();
            let eu: Vec<Vec<f64>> = outs[np..].iter().map(|o| o.embedding.clone()).collect();
            let l = loss_ours_pu(&ep, &eu, &model.svdd, &model.pu);
            log.pu_terms.push(BatchTerm {
                epoch,
                raw: l.pu.raw_negative_term,
                reported: l.pu.negative_term,
            });
            for (u, d) in ups.iter_mut().zip(l.d_pos.into_iter().chain(l.d_unl)) {
                u.d_embedding = d;
            }
            d_radius = l.d_radius;
            d_center = l.d_center;
            l.pu.value + decay
        }
    };

    let mut reg_loss = 0.0;
    if with_regression {
        let preds: Vec<f64> = outs[..np].iter().map(|o| o.heads.trav_pred).collect();
        let targets: Vec<f64> = batch.samples[..np]
            .iter()
            .map(|s| s.trav_value.unwrap_or(0.0))
            .collect();
        let (v, g) = loss_regression(&preds, &targets);
        reg_loss = v;
        for (u, d) in ups.iter_mut().zip(g) {
            u.d_trav_pred = d;
        }
    }

    for ((u, tape), _) in ups.iter().zip(tapes.iter()).zip(0..n) {
        model.backward(tape, u, &mut grads[..n_net])?;
    }
    let mut off = n_net;
    if method.uses_radius() {
        grads[off] = d_radius;
        off += 1;
    }
    if off < grads.len() {
        grads[off..].copy_from_slice(&d_center);
    }
    Ok((method_loss, reg_loss))
}
