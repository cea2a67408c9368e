//! Conditional normalizing flow over (log IOPS, log latency).
//!
//! A stack of affine coupling layers maps the standardized log-space target
//! pair to a standard 2D normal, conditioning every layer on the standardized
//! workload features. Each layer passes one target dimension through and
//! transforms the other as `z_t = y_t * exp(s) + t`, where the scale and
//! translate nets are two-layer perceptrons (10 tanh hidden units) reading
//! `[passed dim, condition]`. The scale output is bounded by
//! `SCALE_BOUND * tanh(raw)` to keep training stable, and final-layer weights
//! start at zero so the initial flow is the identity.
//!
//! Training maximizes exact log-likelihood via the change of variables
//! formula; gradients are reverse-mode, written out by hand for exactly this
//! architecture, and optimized with Adam.

use crate::domain::{encode_features, feature_dim, DatasetKind, LoadGroup, PerfPoint};
use crate::metrics::Scaler;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const HIDDEN: usize = 10;
pub const SCALE_BOUND: f64 = 2.0;
pub const DEFAULT_LAYERS: usize = 16;
const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrainConfig {
    pub n_layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FlowTrainConfig {
    fn default() -> Self {
        FlowTrainConfig {
            n_layers: DEFAULT_LAYERS,
            epochs: 80,
            batch_size: 200,
            learning_rate: 1e-2,
            seed: 42,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("no training rows")]
    EmptyTrainingSet,
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NumericFailure { epoch: usize, batch: usize },
    #[error("model deserialization failed: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Two-layer perceptron `R^{1+c} -> R` with tanh hidden activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_in: usize,
    /// HIDDEN rows of n_in weights; column 0 multiplies the passed target
    /// dimension, the rest the condition vector.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    fn zero(n_in: usize) -> Self {
        Mlp { n_in, w1: vec![0.0; HIDDEN * n_in], b1: vec![0.0; HIDDEN], w2: vec![0.0; HIDDEN], b2: 0.0 }
    }

    fn n_params(&self) -> usize {
        HIDDEN * self.n_in + 2 * HIDDEN + 1
    }

    /// Raw output; `h_out` receives the hidden tanh activations.
    fn forward(&self, in0: f64, cond: &[f64], h_out: &mut [f64; HIDDEN]) -> f64 {
        let mut out = self.b2;
        for j in 0..HIDDEN {
            let row = &self.w1[j * self.n_in..(j + 1) * self.n_in];
            let mut pre = self.b1[j] + row[0] * in0;
            for (w, x) in row[1..].iter().zip(cond) {
                pre += w * x;
            }
            let h = pre.tanh();
            h_out[j] = h;
            out += self.w2[j] * h;
        }
        out
    }

    /// Accumulates parameter gradients for upstream `g_raw` into `grads`
    /// (same layout as [`flat_params`]) and returns the gradient w.r.t. the
    /// passed target input.
    fn backward(
        &self,
        g_raw: f64,
        in0: f64,
        cond: &[f64],
        h: &[f64; HIDDEN],
        grads: &mut [f64],
    ) -> f64 {
        let (gw1, rest) = grads.split_at_mut(HIDDEN * self.n_in);
        let (gb1, rest) = rest.split_at_mut(HIDDEN);
        let (gw2, gb2) = rest.split_at_mut(HIDDEN);
        let mut g_in0 = 0.0;
        for j in 0..HIDDEN {
            gw2[j] += g_raw * h[j];
            let gpre = g_raw * self.w2[j] * (1.0 - h[j] * h[j]);
            gb1[j] += gpre;
            let row_off = j * self.n_in;
            gw1[row_off] += gpre * in0;
            for (k, x) in cond.iter().enumerate() {
                gw1[row_off + 1 + k] += gpre * x;
            }
            g_in0 += gpre * self.w1[row_off];
        }
        gb2[0] += g_raw;
        g_in0
    }

    fn copy_params_to(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
    }

    fn set_params_from(&mut self, v: &[f64]) {
        let n = HIDDEN * self.n_in;
        self.w1.copy_from_slice(&v[..n]);
        self.b1.copy_from_slice(&v[n..n + HIDDEN]);
        self.w2.copy_from_slice(&v[n + HIDDEN..n + 2 * HIDDEN]);
        self.b2 = v[n + 2 * HIDDEN];
    }
}

/// One affine coupling layer. `pass_dim` flows through unchanged and drives
/// the scale/translate nets together with the condition vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingLayer {
    pub pass_dim: usize,
    pub scale: Mlp,
    pub translate: Mlp,
}

impl CouplingLayer {
    /// Forward transform; returns the output pair and the log-determinant
    /// (the bounded scale-net output of the transformed dimension).
    pub fn forward(&self, y: [f64; 2], cond: &[f64]) -> ([f64; 2], f64) {
        let p = self.pass_dim;
        let t = 1 - p;
        let mut h = [0.0; HIDDEN];
        let s = SCALE_BOUND * self.scale.forward(y[p], cond, &mut h).tanh();
        let tr = self.translate.forward(y[p], cond, &mut h);
        let mut z = y;
        z[t] = y[t] * s.exp() + tr;
        (z, s)
    }

    pub fn inverse(&self, z: [f64; 2], cond: &[f64]) -> [f64; 2] {
        let p = self.pass_dim;
        let t = 1 - p;
        let mut h = [0.0; HIDDEN];
        let s = SCALE_BOUND * self.scale.forward(z[p], cond, &mut h).tanh();
        let tr = self.translate.forward(z[p], cond, &mut h);
        let mut y = z;
        y[t] = (z[t] - tr) * (-s).exp();
        y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowModel {
    pub format_version: u32,
    pub kind: DatasetKind,
    pub cond_dim: usize,
    /// Fitted on the training rows' (ln IOPS, ln latency) pairs.
    pub target_scaler: Scaler,
    /// Fitted on the training rows' feature vectors.
    pub cond_scaler: Scaler,
    pub layers: Vec<CouplingLayer>,
    /// Mean negative log-likelihood per epoch (log-target space).
    pub train_nll: Vec<f64>,
}

impl FlowModel {
    /// Identity-initialized flow: hidden layers random (seeded), output
    /// layers zero, so the stack starts as the identity map.
    pub fn identity_init(
        kind: DatasetKind,
        cond_dim: usize,
        n_layers: usize,
        rng: &mut ChaCha8Rng,
    ) -> FlowModel {
        let n_in = 1 + cond_dim;
        let w_scale = 1.0 / (n_in as f64).sqrt();
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            let mut make = || {
                let mut mlp = Mlp::zero(n_in);
                for w in &mut mlp.w1 {
                    let e: f64 = StandardNormal.sample(rng);
                    *w = e * w_scale;
                }
                mlp
            };
            layers.push(CouplingLayer { pass_dim: i % 2, scale: make(), translate: make() });
        }
        FlowModel {
            format_version: 1,
            kind,
            cond_dim,
            target_scaler: Scaler { mean: vec![0.0, 0.0], std: vec![1.0, 1.0] },
            cond_scaler: Scaler { mean: vec![0.0; cond_dim], std: vec![1.0; cond_dim] },
            layers,
            train_nll: Vec::new(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.scale.n_params() + l.translate.n_params()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            l.scale.copy_params_to(&mut out);
            l.translate.copy_params_to(&mut out);
        }
        out
    }

    pub fn set_params_flat(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.n_params(), "parameter vector length mismatch");
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.scale.n_params();
            l.scale.set_params_from(&v[off..off + n]);
            off += n;
            let n = l.translate.n_params();
            l.translate.set_params_from(&v[off..off + n]);
            off += n;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, FlowError> {
        Ok(serde_json::from_str(s)?)
    }

    fn check_features(&self, features: &[f64]) -> Result<(), FlowError> {
        if features.len() != self.cond_dim {
            return Err(FlowError::DimensionMismatch {
                expected: self.cond_dim,
                got: features.len(),
            });
        }
        Ok(())
    }

    /// Constant log-Jacobian of the target standardizer, part of the density
    /// over unstandardized log targets.
    fn scaler_log_jacobian(&self) -> f64 {
        -(self.target_scaler.std[0].ln() + self.target_scaler.std[1].ln())
    }
}

/// Maps a log-space target pair to latent space. Returns the latent pair and
/// the total log-determinant d z / d y (coupling scales plus the
/// standardizer's constant Jacobian).
pub fn flow_forward(
    model: &FlowModel,
    y_log: [f64; 2],
    features: &[f64],
) -> Result<([f64; 2], f64), FlowError> {
    model.check_features(features)?;
    let cond = model.cond_scaler.transform(features);
    let mut z = model.target_scaler.transform_pair(y_log);
    let mut logdet = model.scaler_log_jacobian();
    for layer in &model.layers {
        let (next, s) = layer.forward(z, &cond);
        z = next;
        logdet += s;
    }
    Ok((z, logdet))
}

/// Inverse of [`flow_forward`]: latent pair back to log-space target.
pub fn flow_inverse(
    model: &FlowModel,
    z: [f64; 2],
    features: &[f64],
) -> Result<[f64; 2], FlowError> {
    model.check_features(features)?;
    let cond = model.cond_scaler.transform(features);
    let mut y = z;
    for layer in model.layers.iter().rev() {
        y = layer.inverse(y, &cond);
    }
    let y = model.target_scaler.inverse(&y);
    Ok([y[0], y[1]])
}

/// Exact conditional log-density of a log-space target pair; integrates to 1
/// over the (ln IOPS, ln latency) plane.
pub fn flow_logdensity(
    model: &FlowModel,
    y_log: [f64; 2],
    features: &[f64],
) -> Result<f64, FlowError> {
    let (z, logdet) = flow_forward(model, y_log, features)?;
    Ok(-0.5 * (z[0] * z[0] + z[1] * z[1]) - LN_2PI + logdet)
}

/// Draws `n` performance points: latent standard normals pushed through the
/// inverse stack, de-standardized and exponentiated.
pub fn sample_flow(
    model: &FlowModel,
    features: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<PerfPoint>, FlowError> {
    model.check_features(features)?;
    let cond = model.cond_scaler.transform(features);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut y = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
        for layer in model.layers.iter().rev() {
            y = layer.inverse(y, &cond);
        }
        let y = model.target_scaler.inverse(&y);
        out.push(PerfPoint { iops: y[0].exp(), latency: y[1].exp() });
    }
    Ok(out)
}

struct LayerCache {
    in0: f64,
    y_t_in: f64,
    s: f64,
    h_scale: [f64; HIDDEN],
    h_trans: [f64; HIDDEN],
}

impl LayerCache {
    fn new() -> Self {
        LayerCache { in0: 0.0, y_t_in: 0.0, s: 0.0, h_scale: [0.0; HIDDEN], h_trans: [0.0; HIDDEN] }
    }
}

/// Mean NLL of a standardized batch and its parameter gradient (layout of
/// [`FlowModel::params_flat`]); includes the standardizer's constant
/// log-Jacobian so values match [`flow_logdensity`] up to sign.
pub fn nll_and_grad_std(
    model: &FlowModel,
    targets_std: &[[f64; 2]],
    conds_std: &[Vec<f64>],
    grad: &mut [f64],
) -> f64 {
    assert_eq!(targets_std.len(), conds_std.len());
    assert_eq!(grad.len(), model.n_params());
    grad.iter_mut().for_each(|g| *g = 0.0);
    let n = targets_std.len() as f64;
    let n_layers = model.layers.len();
    let mut caches: Vec<LayerCache> = (0..n_layers).map(|_| LayerCache::new()).collect();
    let mlp_size = HIDDEN * (1 + model.cond_dim) + 2 * HIDDEN + 1;

    let mut total = 0.0;
    for (y0, cond) in targets_std.iter().zip(conds_std) {
        // forward, caching per layer
        let mut y = *y0;
        let mut sum_s = 0.0;
        for (layer, cache) in model.layers.iter().zip(&mut caches) {
            let p = layer.pass_dim;
            let t = 1 - p;
            cache.in0 = y[p];
            cache.y_t_in = y[t];
            let raw_s = layer.scale.forward(y[p], cond, &mut cache.h_scale);
            let s = SCALE_BOUND * raw_s.tanh();
            let tr = layer.translate.forward(y[p], cond, &mut cache.h_trans);
            cache.s = s;
            y[t] = y[t] * s.exp() + tr;
            sum_s += s;
        }
        total += 0.5 * (y[0] * y[0] + y[1] * y[1]) + LN_2PI - sum_s;

        // backward
        let mut g = [y[0], y[1]];
        for (i, layer) in model.layers.iter().enumerate().rev() {
            let cache = &caches[i];
            let p = layer.pass_dim;
            let t = 1 - p;
            let exp_s = cache.s.exp();
            let g_trans_out = g[t];
            let dy_t = g_trans_out * exp_s;
            let ds = g_trans_out * cache.y_t_in * exp_s - 1.0;
            let dtr = g_trans_out;
            // d s / d raw = SCALE_BOUND * (1 - tanh^2) with tanh = s / SCALE_BOUND
            let draw_s = ds * (SCALE_BOUND - cache.s * cache.s / SCALE_BOUND);

            let off = i * 2 * mlp_size;
            let g_in_scale = layer.scale.backward(
                draw_s,
                cache.in0,
                cond,
                &cache.h_scale,
                &mut grad[off..off + mlp_size],
            );
            let g_in_trans = layer.translate.backward(
                dtr,
                cache.in0,
                cond,
                &cache.h_trans,
                &mut grad[off + mlp_size..off + 2 * mlp_size],
            );
            g[p] += g_in_scale + g_in_trans;
            g[t] = dy_t;
        }
    }
    for g in grad.iter_mut() {
        *g /= n;
    }
    total / n - model.scaler_log_jacobian()
}

/// Fits the flow on all measurements of the training groups. Targets are
/// (ln IOPS, ln latency); the condition is the group's feature vector. Both
/// standardizers are fitted on training rows only.
pub fn fit_flow(
    groups: &[LoadGroup],
    kind: DatasetKind,
    cfg: &FlowTrainConfig,
) -> Result<FlowModel, FlowError> {
    let cond_dim = feature_dim(kind);
    let mut targets: Vec<Vec<f64>> = Vec::new();
    let mut conds: Vec<Vec<f64>> = Vec::new();
    for g in groups {
        let f = encode_features(&g.spec, kind);
        for p in &g.points {
            targets.push(vec![p.iops.ln(), p.latency.ln()]);
            conds.push(f.clone());
        }
    }
    if targets.is_empty() {
        return Err(FlowError::EmptyTrainingSet);
    }
    let target_scaler =
        Scaler::fit(&targets).map_err(|e| FlowError::DegenerateData(e.to_string()))?;
    let cond_scaler = Scaler::fit(&conds).map_err(|e| FlowError::DegenerateData(e.to_string()))?;

    let targets_std: Vec<[f64; 2]> = targets
        .iter()
        .map(|t| {
            let s = target_scaler.transform(t);
            [s[0], s[1]]
        })
        .collect();
    let conds_std: Vec<Vec<f64>> = conds.iter().map(|c| cond_scaler.transform(c)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = FlowModel::identity_init(kind, cond_dim, cfg.n_layers, &mut rng);
    model.target_scaler = target_scaler;
    model.cond_scaler = cond_scaler;

    let n = targets_std.len();
    let n_params = model.n_params();
    let mut grad = vec![0.0; n_params];
    let mut adam_m = vec![0.0; n_params];
    let mut adam_v = vec![0.0; n_params];
    let (beta1, beta2, adam_eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut step = 0u32;

    let mut order: Vec<usize> = (0..n).collect();
    let mut params = model.params_flat();
    let mut train_nll = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        use rand::Rng;
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let bt: Vec<[f64; 2]> = batch.iter().map(|&i| targets_std[i]).collect();
            let bc: Vec<Vec<f64>> = batch.iter().map(|&i| conds_std[i].clone()).collect();
            let nll = nll_and_grad_std(&model, &bt, &bc, &mut grad);
            if !nll.is_finite() {
                return Err(FlowError::NumericFailure { epoch, batch: batch_idx });
            }
            epoch_loss += nll * batch.len() as f64;

            step += 1;
            let bc1 = 1.0 - beta1.powi(step as i32);
            let bc2 = 1.0 - beta2.powi(step as i32);
            for ((p, g), (m, v)) in params
                .iter_mut()
                .zip(&grad)
                .zip(adam_m.iter_mut().zip(adam_v.iter_mut()))
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p -= cfg.learning_rate * mhat / (vhat.sqrt() + adam_eps);
            }
            model.set_params_flat(&params);
        }
        train_nll.push(epoch_loss / n as f64);
    }
    model.train_nll = train_nll;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_model(cond_dim: usize, n_layers: usize, seed: u64) -> FlowModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model =
            FlowModel::identity_init(DatasetKind::CacheRandom, cond_dim, n_layers, &mut rng);
        // randomize every parameter so output layers are active
        let params: Vec<f64> =
            (0..model.n_params()).map(|_| rng.gen_range(-0.7..0.7)).collect();
        model.set_params_flat(&params);
        model
    }

    #[test]
    fn identity_init_is_identity_with_zero_logdet() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = FlowModel::identity_init(DatasetKind::CacheRandom, 3, 6, &mut rng);
        let y = [0.7, -1.3];
        let cond = vec![0.2, -0.5, 1.0];
        for layer in &model.layers {
            let (z, s) = layer.forward(y, &cond);
            assert_eq!(z, y);
            assert_eq!(s, 0.0);
        }
        let (z, logdet) = flow_forward(&model, y, &cond).unwrap();
        assert_eq!(z, y);
        assert_eq!(logdet, 0.0);
        // standardized origin has log-density exactly -ln(2 pi)
        let ld = flow_logdensity(&model, [0.0, 0.0], &cond).unwrap();
        assert_eq!(ld, -LN_2PI);
    }

    #[test]
    fn coupling_layer_inverts_within_1e12() {
        let model = random_model(4, 8, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let y = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let cond: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for layer in &model.layers {
                let (z, _) = layer.forward(y, &cond);
                let back = layer.inverse(z, &cond);
                assert!((back[0] - y[0]).abs() < 1e-12);
                assert!((back[1] - y[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_stack_inverts() {
        let model = random_model(4, 16, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut max_err: f64 = 0.0;
        for _ in 0..500 {
            let y = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let cond: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (z, _) = flow_forward(&model, y, &cond).unwrap();
            let back = flow_inverse(&model, z, &cond).unwrap();
            max_err = max_err.max((back[0] - y[0]).abs()).max((back[1] - y[1]).abs());
        }
        assert!(max_err < 1e-9, "max inversion error {max_err}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let model = random_model(2, 4, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let targets: Vec<[f64; 2]> =
            (0..12).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
        let conds: Vec<Vec<f64>> =
            (0..12).map(|_| (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();

        let mut grad = vec![0.0; model.n_params()];
        nll_and_grad_std(&model, &targets, &conds, &mut grad);

        let params = model.params_flat();
        let mut probe = model.clone();
        let h = 1e-5;
        let mut scratch = vec![0.0; model.n_params()];
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += h;
            probe.set_params_flat(&p);
            let up = nll_and_grad_std(&probe, &targets, &conds, &mut scratch);
            p[i] -= 2.0 * h;
            probe.set_params_flat(&p);
            let down = nll_and_grad_std(&probe, &targets, &conds, &mut scratch);
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1e-4);
            assert!(
                (fd - grad[i]).abs() / denom <= 1e-4,
                "param {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }

    fn synthetic_groups(n_loads: usize, k: usize, seed: u64) -> Vec<LoadGroup> {
        use crate::domain::{IoType, LoadType, WorkloadSpec};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut groups = Vec::new();
        for i in 0..n_loads {
            let jobs = rng.gen_range(1..=32u32);
            let spec = WorkloadSpec {
                load_type: LoadType::Random,
                io_type: IoType::Read,
                read_fraction: 50.0,
                block_size_kb: 8,
                n_jobs: jobs,
                queue_depth: 4,
                raid: None,
            };
            let mu = 6.0 + 0.6 * f64::from(jobs).ln();
            let points = (0..k)
                .map(|_| {
                    let e0: f64 = StandardNormal.sample(&mut rng);
                    let e1: f64 = StandardNormal.sample(&mut rng);
                    PerfPoint {
                        iops: (mu + 0.25 * e0).exp(),
                        latency: (-mu + 0.2 * (-0.8 * e0 + 0.6 * e1)).exp(),
                    }
                })
                .collect();
            groups.push(LoadGroup { load_id: format!("l{i}"), spec, points });
        }
        groups
    }

    #[test]
    fn zero_epochs_returns_identity_model() {
        let groups = synthetic_groups(4, 10, 1);
        let cfg = FlowTrainConfig { epochs: 0, n_layers: 4, ..Default::default() };
        let model = fit_flow(&groups, DatasetKind::CacheRandom, &cfg).unwrap();
        assert!(model.train_nll.is_empty());
        for layer in &model.layers {
            assert!(layer.scale.w2.iter().all(|&w| w == 0.0));
            assert_eq!(layer.scale.b2, 0.0);
        }
    }

    #[test]
    fn training_is_deterministic_bitwise() {
        let groups = synthetic_groups(6, 12, 2);
        let cfg = FlowTrainConfig { epochs: 3, n_layers: 4, batch_size: 16, ..Default::default() };
        let a = fit_flow(&groups, DatasetKind::CacheRandom, &cfg).unwrap();
        let b = fit_flow(&groups, DatasetKind::CacheRandom, &cfg).unwrap();
        assert_eq!(a.train_nll, b.train_nll);
        assert_eq!(a.params_flat(), b.params_flat());
    }

    #[test]
    fn nll_approaches_entropy_of_known_gaussian() {
        // Correlated 2D normal targets (rho = 0.8, unit marginals), constant
        // condition. Differential entropy: ln(2 pi e) + 0.5 ln det(Sigma).
        use crate::domain::{IoType, LoadType, WorkloadSpec};
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let rho: f64 = 0.8;
        let spec = WorkloadSpec {
            load_type: LoadType::Random,
            io_type: IoType::Read,
            read_fraction: 50.0,
            block_size_kb: 8,
            n_jobs: 2,
            queue_depth: 2,
            raid: None,
        };
        let points: Vec<PerfPoint> = (0..4000)
            .map(|_| {
                let e0: f64 = StandardNormal.sample(&mut rng);
                let e1: f64 = StandardNormal.sample(&mut rng);
                let z0 = e0;
                let z1 = rho * e0 + (1.0 - rho * rho).sqrt() * e1;
                PerfPoint { iops: z0.exp(), latency: z1.exp() }
            })
            .collect();
        let groups = vec![LoadGroup { load_id: "g".into(), spec, points }];
        let cfg = FlowTrainConfig {
            epochs: 40,
            n_layers: 8,
            batch_size: 200,
            learning_rate: 1e-2,
            seed: 5,
        };
        let model = fit_flow(&groups, DatasetKind::CacheRandom, &cfg).unwrap();
        let entropy = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()
            + 0.5 * (1.0 - rho * rho).ln();
        let final_nll = *model.train_nll.last().unwrap();
        assert!(
            (final_nll - entropy).abs() <= 0.05 * entropy.abs(),
            "final NLL {final_nll} vs entropy {entropy}"
        );
    }

    #[test]
    fn sampling_is_deterministic_and_positive() {
        let groups = synthetic_groups(6, 15, 4);
        let cfg = FlowTrainConfig { epochs: 2, n_layers: 4, batch_size: 32, ..Default::default() };
        let model = fit_flow(&groups, DatasetKind::CacheRandom, &cfg).unwrap();
        let f = encode_features(&groups[0].spec, DatasetKind::CacheRandom);
        let a = sample_flow(&model, &f, 20, 9).unwrap();
        let b = sample_flow(&model, &f, 20, 9).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(p.iops > 0.0 && p.latency > 0.0);
        }
    }

    #[test]
    fn serialization_round_trips() {
        let model = random_model(3, 4, 31);
        let back = FlowModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn logdensity_integrates_to_one_for_trained_model() {
        let groups = synthetic_groups(4, 200, 6);
        let cfg = FlowTrainConfig { epochs: 10, n_layers: 6, batch_size: 100, ..Default::default() };
        let model = fit_flow(&groups, DatasetKind::CacheRandom, &cfg).unwrap();
        let f = encode_features(&groups[1].spec, DatasetKind::CacheRandom);
        // quadrature over a wide log-space grid around the standardizer
        let (m, s) = (&model.target_scaler.mean, &model.target_scaler.std);
        let half = 8.0;
        let steps = 160;
        let (w0, w1) = (2.0 * half * s[0] / steps as f64, 2.0 * half * s[1] / steps as f64);
        let mut integral = 0.0;
        for i in 0..steps {
            let y0 = m[0] + (-half + (i as f64 + 0.5) / steps as f64 * 2.0 * half) * s[0];
            for j in 0..steps {
                let y1 = m[1] + (-half + (j as f64 + 0.5) / steps as f64 * 2.0 * half) * s[1];
                integral += flow_logdensity(&model, [y0, y1], &f).unwrap().exp() * w0 * w1;
            }
        }
        assert!((integral - 1.0).abs() < 0.02, "integral {integral}");
    }
}
