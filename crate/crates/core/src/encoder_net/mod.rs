//! Point-set encoder: a shared per-point MLP, coordinate-wise max-pool, a
//! linear embedding layer and two small heads (classifier logit and squashed
//! traversability regressor), with exact reverse-mode gradients.
//!
//! All parameters live in one flat `Vec<f64>`; layers address it by offset.
//! Weights are row-major `out × in`.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learners::{Method, PuConfig, SvddState};

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Points per patch.
    pub k: usize,
    /// Per-point MLP widths starting with the input width 3.
    pub point_widths: Vec<usize>,
    pub embedding_dim: usize,
    /// Hidden widths of the classifier head (output width 1 is implied).
    pub class_head: Vec<usize>,
    /// Hidden widths of the regression head.
    pub reg_head: Vec<usize>,
    /// Bias on the embedding layer.
    pub final_layer_bias: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            k: 16,
            point_widths: vec![3, 32, 64],
            embedding_dim: 32,
            class_head: vec![16],
            reg_head: vec![16],
            final_layer_bias: false,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        if self.point_widths.len() < 2 || self.point_widths[0] != 3 {
            return Err(Error::InvalidConfig(
                "point widths must start at 3 and have a hidden layer".into(),
            ));
        }
        if self.embedding_dim < 2 {
            return Err(Error::InvalidConfig(
                "embedding_dim must be at least 2".into(),
            ));
        }
        let all = self
            .point_widths
            .iter()
            .chain(&self.class_head)
            .chain(&self.reg_head);
        if all.clone().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dense {
    pub inp: usize,
    pub out: usize,
    pub w: usize,
    pub b: Option<usize>,
}

impl Dense {
    #[inline]
    fn apply(&self, params: &[f64], x: &[f64], y: &mut [f64]) {
        let w = &params[self.w..self.w + self.inp * self.out];
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &w[o * self.inp..(o + 1) * self.inp];
            let mut acc = self.b.map_or(0.0, |b| params[b + o]);
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            *yo = acc;
        }
    }

    /// Accumulates parameter gradients for upstream `dy` at input `x`, and
    /// writes `dx = Wᵀ dy` when requested.
    #[inline]
    fn back(
        &self,
        params: &[f64],
        x: &[f64],
        dy: &[f64],
        grads: &mut [f64],
        dx: Option<&mut [f64]>,
    ) {
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &mut grads[self.w + o * self.inp..self.w + (o + 1) * self.inp];
            for (r, xi) in row.iter_mut().zip(x) {
                *r += g * xi;
            }
            if let Some(b) = self.b {
                grads[b + o] += g;
            }
        }
        if let Some(dx) = dx {
            dx.iter_mut().for_each(|v| *v = 0.0);
            let w = &params[self.w..self.w + self.inp * self.out];
            for (o, &g) in dy.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &w[o * self.inp..(o + 1) * self.inp];
                for (d, wi) in dx.iter_mut().zip(row) {
                    *d += g * wi;
                }
            }
        }
    }
}

/// Parameter offsets derived from an [`EncoderConfig`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub point: Vec<Dense>,
    pub embed: Dense,
    pub class: Vec<Dense>,
    pub reg: Vec<Dense>,
    pub n_params: usize,
}

impl Layout {
    pub fn new(cfg: &EncoderConfig) -> Self {
        let mut off = 0;
        let mut dense = |inp: usize, out: usize, bias: bool| {
            let d = Dense {
                inp,
                out,
                w: off,
                b: bias.then_some(off + inp * out),
            };
            off += inp * out + if bias { out } else { 0 };
            d
        };
        let point: Vec<Dense> = cfg
            .point_widths
            .windows(2)
            .map(|w| dense(w[0], w[1], true))
            .collect();
        let pooled = *cfg.point_widths.last().unwrap();
        let embed = dense(pooled, cfg.embedding_dim, cfg.final_layer_bias);
        let mut head = |hidden: &[usize]| {
            let mut widths = vec![cfg.embedding_dim];
            widths.extend_from_slice(hidden);
            widths.push(1);
            widths
                .windows(2)
                .map(|w| dense(w[0], w[1], true))
                .collect::<Vec<_>>()
        };
        let class = head(&cfg.class_head);
        let reg = head(&cfg.reg_head);
        Self {
            point,
            embed,
            class,
            reg,
            n_params: off,
        }
    }

    fn all(&self) -> impl Iterator<Item = &Dense> {
        self.point
            .iter()
            .chain(std::iter::once(&self.embed))
            .chain(&self.class)
            .chain(&self.reg)
    }

    /// `true` for weight entries, `false` for biases (weight decay mask).
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_params];
        for d in self.all() {
            m[d.w..d.w + d.inp * d.out]
                .iter_mut()
                .for_each(|x| *x = true);
        }
        m
    }
}

/// Network parameters plus the learner state attached to them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: EncoderConfig,
    pub params: Vec<f64>,
    pub method: Method,
    pub svdd: SvddState,
    pub pu: PuConfig,
    pub seed: u64,
    pub(crate) layout: Layout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadOutputs {
    pub class_logit: f64,
    /// Squashed into `(0, 1)`.
    pub trav_pred: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub embedding: Vec<f64>,
    pub heads: HeadOutputs,
}

/// Upstream gradients at the three outputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputGrads {
    /// Empty means zero.
    pub d_embedding: Vec<f64>,
    pub d_class_logit: f64,
    pub d_trav_pred: f64,
}

/// Activations recorded by [`ModelState::forward`] for [`ModelState::backward`].
#[derive(Debug, Clone, Default)]
pub struct Tape {
    recorded: bool,
    /// `acts[0]` is the flattened input patch; `acts[l]` the post-ReLU output
    /// of point layer `l`, each `k × width`.
    acts: Vec<Vec<f64>>,
    pool_arg: Vec<usize>,
    pooled: Vec<f64>,
    embedding: Vec<f64>,
    /// Inputs of every head layer (embedding first).
    class_in: Vec<Vec<f64>>,
    reg_in: Vec<Vec<f64>>,
    trav_pred: f64,
}

impl Tape {
    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }

    /// Smallest |pre-activation| seen at any ReLU, the smallest gap between
    /// the maximum and runner-up in the max-pool; both measure distance to a
    /// kink (finite-difference checks avoid configurations close to one).
    pub fn kink_margin(&self, state: &ModelState) -> f64 {
        let mut m = f64::INFINITY;
        let k = state.config.k;
        for (l, d) in state.layout.point.iter().enumerate() {
            for p in 0..k {
                let x = &self.acts[l][p * d.inp..(p + 1) * d.inp];
                let mut z = vec![0.0; d.out];
                d.apply(&state.params, x, &mut z);
                m = z.iter().fold(m, |m, v| m.min(v.abs()));
            }
        }
        let last = self.acts.last().unwrap();
        let width = state.layout.embed.inp;
        for j in 0..width {
            let mut col: Vec<f64> = (0..k).map(|p| last[p * width + j]).collect();
            col.sort_by(|a, b| b.total_cmp(a));
            if k > 1 && col[0] > 0.0 {
                m = m.min(col[0] - col[1]);
            }
        }
        for (layers, ins) in [
            (&state.layout.class, &self.class_in),
            (&state.layout.reg, &self.reg_in),
        ] {
            for (i, d) in layers.iter().enumerate().take(layers.len() - 1) {
                let mut z = vec![0.0; d.out];
                d.apply(&state.params, &ins[i], &mut z);
                m = z.iter().fold(m, |m, v| m.min(v.abs()));
            }
        }
        m
    }
}

#[inline]
fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| {
        if *x <= 0.0 {
            *x = 0.0
        }
    });
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ModelState {
    /// Fresh model: weights uniform in `±sqrt(6/(fan_in+fan_out))`, biases 0.
    pub fn init(config: EncoderConfig, method: Method, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.n_params];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for d in layout.all() {
            let a = (6.0 / (d.inp + d.out) as f64).sqrt();
            for p in &mut params[d.w..d.w + d.inp * d.out] {
                *p = rng.gen_range(-a..a);
            }
        }
        let svdd = SvddState::new(config.embedding_dim);
        Ok(Self {
            config,
            params,
            method,
            svdd,
            pu: PuConfig::default(),
            seed,
            layout,
        })
    }

    /// Rebuilds a state from raw parts, checking shapes.
    pub fn from_parts(
        config: EncoderConfig,
        params: Vec<f64>,
        method: Method,
        svdd: SvddState,
        pu: PuConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.n_params {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters given, config needs {}",
                params.len(),
                layout.n_params
            )));
        }
        if svdd.center.len() != config.embedding_dim {
            return Err(Error::ShapeMismatch(
                "center dimension differs from embedding_dim".into(),
            ));
        }
        Ok(Self {
            config,
            params,
            method,
            svdd,
            pu,
            seed,
            layout,
        })
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params
    }

    pub fn weight_mask(&self) -> Vec<bool> {
        self.layout.weight_mask()
    }

    fn check_patch(&self, patch: &[[f64; 3]]) -> Result<()> {
        if patch.len() != self.config.k {
            return Err(Error::ShapeMismatch(format!(
                "patch has {} points, model expects {}",
                patch.len(),
                self.config.k
            )));
        }
        Ok(())
    }

    /// Embedding of a patch. Invariant under any permutation of the points.
    pub fn encode(&self, patch: &[[f64; 3]]) -> Result<Vec<f64>> {
        self.check_patch(patch)?;
        let mut pooled = vec![f64::NEG_INFINITY; self.layout.embed.inp];
        let mut a: Vec<f64> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        for p in patch {
            a.clear();
            a.extend_from_slice(p);
            for d in &self.layout.point {
                b.resize(d.out, 0.0);
                d.apply(&self.params, &a, &mut b);
                relu(&mut b);
                std::mem::swap(&mut a, &mut b);
            }
            for (m, v) in pooled.iter_mut().zip(&a) {
                if *v > *m {
                    *m = *v;
                }
            }
        }
        let mut emb = vec![0.0; self.layout.embed.out];
        self.layout.embed.apply(&self.params, &pooled, &mut emb);
        Ok(emb)
    }

    fn run_head(&self, layers: &[Dense], emb: &[f64], record: Option<&mut Vec<Vec<f64>>>) -> f64 {
        let mut x = emb.to_vec();
        let mut rec = record;
        if let Some(r) = rec.as_deref_mut() {
            r.clear();
        }
        for (i, d) in layers.iter().enumerate() {
            if let Some(r) = rec.as_deref_mut() {
                r.push(x.clone());
            }
            let mut y = vec![0.0; d.out];
            d.apply(&self.params, &x, &mut y);
            if i + 1 < layers.len() {
                relu(&mut y);
            }
            x = y;
        }
        x[0]
    }

    /// Classifier logit and squashed regression output for an embedding.
    pub fn forward_heads(&self, embedding: &[f64]) -> HeadOutputs {
        HeadOutputs {
            class_logit: self.run_head(&self.layout.class, embedding, None),
            trav_pred: sigmoid(self.run_head(&self.layout.reg, embedding, None)),
        }
    }

    /// Full forward pass, recording activations into `tape`.
    pub fn forward(&self, patch: &[[f64; 3]], tape: &mut Tape) -> Result<Outputs> {
        self.check_patch(patch)?;
        let k = self.config.k;
        tape.recorded = false;
        tape.acts.resize(self.layout.point.len() + 1, Vec::new());
        tape.acts[0].clear();
        tape.acts[0].extend(patch.iter().flatten());
        for (l, d) in self.layout.point.iter().enumerate() {
            let (prev, next) = tape.acts.split_at_mut(l + 1);
            let x = &prev[l];
            let y = &mut next[0];
            y.resize(k * d.out, 0.0);
            for p in 0..k {
                let out = &mut y[p * d.out..(p + 1) * d.out];
                d.apply(&self.params, &x[p * d.inp..(p + 1) * d.inp], out);
                relu(out);
            }
        }
        let width = self.layout.embed.inp;
        let last = tape.acts.last().unwrap();
        tape.pooled.clear();
        tape.pooled.resize(width, f64::NEG_INFINITY);
        tape.pool_arg.clear();
        tape.pool_arg.resize(width, 0);
        for p in 0..k {
            for j in 0..width {
                let v = last[p * width + j];
                // strict: the first maximal point wins
                if v > tape.pooled[j] {
                    tape.pooled[j] = v;
                    tape.pool_arg[j] = p;
                }
            }
        }
        tape.embedding.resize(self.layout.embed.out, 0.0);
        self.layout
            .embed
            .apply(&self.params, &tape.pooled, &mut tape.embedding);
        let emb = tape.embedding.clone();
        let class_logit = self.run_head(&self.layout.class, &emb, Some(&mut tape.class_in));
        let trav_pred = sigmoid(self.run_head(&self.layout.reg, &emb, Some(&mut tape.reg_in)));
        tape.trav_pred = trav_pred;
        tape.recorded = true;
        Ok(Outputs {
            embedding: emb,
            heads: HeadOutputs {
                class_logit,
                trav_pred,
            },
        })
    }

    fn head_back(
        &self,
        layers: &[Dense],
        ins: &[Vec<f64>],
        d_out: f64,
        grads: &mut [f64],
        d_emb: &mut [f64],
    ) {
        let mut dy = vec![d_out];
        for i in (0..layers.len()).rev() {
            let d = &layers[i];
            let mut dx = vec![0.0; d.inp];
            d.back(&self.params, &ins[i], &dy, grads, Some(&mut dx));
            if i > 0 {
                // input of layer i is the ReLU output of layer i-1
                for (g, x) in dx.iter_mut().zip(&ins[i]) {
                    if *x <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            dy = dx;
        }
        for (e, g) in d_emb.iter_mut().zip(&dy) {
            *e += g;
        }
    }

    /// Accumulates (`+=`) parameter gradients into `grads` given upstream
    /// gradients at the outputs. Max-pool routes to the first maximal point;
    /// ReLU'(0) = 0.
    pub fn backward(&self, tape: &Tape, upstream: &OutputGrads, grads: &mut [f64]) -> Result<()> {
        if !tape.recorded {
            return Err(Error::MissingTape);
        }
        if grads.len() != self.layout.n_params {
            return Err(Error::ShapeMismatch("gradient buffer length".into()));
        }
        let mut d_emb = vec![0.0; self.layout.embed.out];
        if !upstream.d_embedding.is_empty() {
            if upstream.d_embedding.len() != d_emb.len() {
                return Err(Error::ShapeMismatch("d_embedding length".into()));
            }
            d_emb.copy_from_slice(&upstream.d_embedding);
        }
        if upstream.d_class_logit != 0.0 {
            self.head_back(
                &self.layout.class,
                &tape.class_in,
                upstream.d_class_logit,
                grads,
                &mut d_emb,
            );
        }
        if upstream.d_trav_pred != 0.0 {
            let s = tape.trav_pred;
            let dz = upstream.d_trav_pred * s * (1.0 - s);
            self.head_back(&self.layout.reg, &tape.reg_in, dz, grads, &mut d_emb);
        }
        if d_emb.iter().all(|&g| g == 0.0) {
            return Ok(());
        }
        let mut d_pooled = vec![0.0; self.layout.embed.inp];
        self.layout.embed.back(
            &self.params,
            &tape.pooled,
            &d_emb,
            grads,
            Some(&mut d_pooled),
        );

        let k = self.config.k;
        let n_layers = self.layout.point.len();
        let width = self.layout.embed.inp;
        // gradient w.r.t. the post-ReLU output of the last point layer
        let mut d_act = vec![0.0; k * width];
        for j in 0..width {
            d_act[tape.pool_arg[j] * width + j] += d_pooled[j];
        }
        for l in (0..n_layers).rev() {
            let d = &self.layout.point[l];
            let out = &tape.acts[l + 1];
            let inp = &tape.acts[l];
            let mut d_in = if l > 0 {
                vec![0.0; k * d.inp]
            } else {
                Vec::new()
            };
            let mut dz = vec![0.0; d.out];
            for p in 0..k {
                let mut any = false;
                for o in 0..d.out {
                    let g = if out[p * d.out + o] > 0.0 {
                        d_act[p * d.out + o]
                    } else {
                        0.0
                    };
                    dz[o] = g;
                    any |= g != 0.0;
                }
                if !any {
                    continue;
                }
                let x = &inp[p * d.inp..(p + 1) * d.inp];
                if l > 0 {
                    d.back(
                        &self.params,
                        x,
                        &dz,
                        grads,
                        Some(&mut d_in[p * d.inp..(p + 1) * d.inp]),
                    );
                } else {
                    d.back(&self.params, x, &dz, grads, None);
                }
            }
            d_act = d_in;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn small_cfg(k: usize) -> EncoderConfig {
        EncoderConfig {
            k,
            point_widths: vec![3, 5, 6],
            embedding_dim: 4,
            class_head: vec![3],
            reg_head: vec![3],
            final_layer_bias: true,
        }
    }

    fn random_patch(rng: &mut ChaCha8Rng, k: usize) -> Vec<[f64; 3]> {
        (0..k)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect()
    }

    #[test]
    fn identity_toy_pools_coordinatewise() {
        let cfg = EncoderConfig {
            k: 2,
            point_widths: vec![3, 3],
            embedding_dim: 3,
            class_head: vec![],
            reg_head: vec![],
            final_layer_bias: false,
        };
        let mut m = ModelState::init(cfg, Method::Ours, 0).unwrap();
        m.params.iter_mut().for_each(|p| *p = 0.0);
        let l0 = m.layout.point[0];
        for i in 0..3 {
            m.params[l0.w + i * 3 + i] = 1.0;
        }
        let e = m.layout.embed;
        for i in 0..3 {
            m.params[e.w + i * 3 + i] = 1.0;
        }
        let mut tape = Tape::default();
        let out = m
            .forward(&[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]], &mut tape)
            .unwrap();
        assert_eq!(tape.pooled(), &[1.0, 2.0, 0.0]);
        assert_eq!(out.embedding, vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn zero_network_outputs() {
        let mut m = ModelState::init(small_cfg(4), Method::NnPu, 1).unwrap();
        m.params.iter_mut().for_each(|p| *p = 0.0);
        let h = m.forward_heads(&[0.3, -1.0, 2.0, 0.0]);
        assert_eq!(h.class_logit, 0.0);
        assert_eq!(h.trav_pred, 0.5);
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn permutation_and_duplication_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = ModelState::init(EncoderConfig::default(), Method::Ours, 5).unwrap();
        let mut patch = random_patch(&mut rng, 16);
        let e0 = m.encode(&patch).unwrap();
        for _ in 0..10 {
            patch.shuffle(&mut rng);
            assert_eq!(m.encode(&patch).unwrap(), e0);
        }
        // duplicated patch equals dedup padded by repetition
        let base = random_patch(&mut rng, 8);
        let mut dup = base.clone();
        dup.extend_from_slice(&base);
        let mut padded = base.clone();
        padded.resize(16, base[0]);
        assert_eq!(m.encode(&dup).unwrap(), m.encode(&padded).unwrap());
    }

    #[test]
    fn tape_forward_matches_encode() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = ModelState::init(small_cfg(6), Method::Ours, 2).unwrap();
        let patch = random_patch(&mut rng, 6);
        let mut tape = Tape::default();
        let out = m.forward(&patch, &mut tape).unwrap();
        assert_eq!(out.embedding, m.encode(&patch).unwrap());
        assert_eq!(out.heads, m.forward_heads(&out.embedding));
    }

    #[test]
    fn shape_and_tape_errors() {
        let m = ModelState::init(small_cfg(6), Method::Ours, 2).unwrap();
        assert!(matches!(
            m.encode(&[[0.0; 3]; 5]),
            Err(Error::ShapeMismatch(_))
        ));
        let mut g = vec![0.0; m.n_params()];
        assert!(matches!(
            m.backward(&Tape::default(), &OutputGrads::default(), &mut g),
            Err(Error::MissingTape)
        ));
        let mut cfg = small_cfg(6);
        cfg.embedding_dim = 1;
        assert!(ModelState::init(cfg, Method::Ours, 0).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = ModelState::init(small_cfg(5), Method::Ours, 3).unwrap();
        let mut tape = Tape::default();
        m.forward(&random_patch(&mut rng, 5), &mut tape).unwrap();
        let mut g = vec![0.0; m.n_params()];
        m.backward(&tape, &OutputGrads::default(), &mut g).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = ModelState::init(EncoderConfig::default(), Method::Svdd, 9).unwrap();
        let b = ModelState::init(EncoderConfig::default(), Method::Svdd, 9).unwrap();
        assert_eq!(a.params, b.params);
        let l = a.layout.point[1];
        let bound = (6.0 / (l.inp + l.out) as f64).sqrt();
        assert!(a.params[l.w..l.w + l.inp * l.out]
            .iter()
            .all(|w| w.abs() <= bound));
        assert!(a.params[l.b.unwrap()..l.b.unwrap() + l.out]
            .iter()
            .all(|&b| b == 0.0));
        assert!(a.layout.embed.b.is_none());
    }
}
