//! Learned configuration recommender.
//!
//! Each workload extent indexes its own embedding table; the three embedding
//! vectors concatenate into a ReLU hidden layer and a softmax over
//! configuration classes. Training is plain minibatch Adam on cross-entropy
//! against oracle labels, single-threaded on purpose: identical seed and
//! data give bit-identical parameters on every run and machine.
//!
//! The math lives in precision-generic helpers (`T: Float`) so the gradient
//! check can run the exact same code path in f64 against central finite
//! differences instead of trusting a hand-duplicated mirror.

mod io;

pub use io::ModelIoError;

use crate::domain::{ConfigSpace, GemmWorkload};
use crate::oracle::{Dataset, LabeledSample};
use crate::partition;
use crate::rng::Xoshiro256StarStar;
use num_traits::Float;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Shape {
    vocab: usize,
    d: usize,
    hidden: usize,
    classes: usize,
}

impl Shape {
    fn input(&self) -> usize {
        3 * self.d
    }

    fn param_count(&self) -> usize {
        3 * self.vocab * self.d
            + self.hidden * self.input()
            + self.hidden
            + self.classes * self.hidden
            + self.classes
    }
}

/// All trainable parameters. Field order here is the canonical parameter
/// order for serialization, optimizer state and gradient layout.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tensors<T> {
    pub(crate) emb_m: Vec<T>,
    pub(crate) emb_n: Vec<T>,
    pub(crate) emb_k: Vec<T>,
    pub(crate) w1: Vec<T>,
    pub(crate) b1: Vec<T>,
    pub(crate) w2: Vec<T>,
    pub(crate) b2: Vec<T>,
}

impl<T: Float> Tensors<T> {
    fn zeros(s: &Shape) -> Self {
        let z = T::zero();
        Tensors {
            emb_m: vec![z; s.vocab * s.d],
            emb_n: vec![z; s.vocab * s.d],
            emb_k: vec![z; s.vocab * s.d],
            w1: vec![z; s.hidden * s.input()],
            b1: vec![z; s.hidden],
            w2: vec![z; s.classes * s.hidden],
            b2: vec![z; s.classes],
        }
    }

    fn fields(&self) -> [&[T]; 7] {
        [
            &self.emb_m,
            &self.emb_n,
            &self.emb_k,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
        ]
    }

    fn fields_mut(&mut self) -> [&mut Vec<T>; 7] {
        let Tensors {
            emb_m,
            emb_n,
            emb_k,
            w1,
            b1,
            w2,
            b2,
        } = self;
        [emb_m, emb_n, emb_k, w1, b1, w2, b2]
    }

    pub(crate) fn zero_out(&mut self) {
        for f in self.fields_mut() {
            f.fill(T::zero());
        }
    }
}

fn to_f64(t: &Tensors<f32>) -> Tensors<f64> {
    let cvt = |v: &Vec<f32>| v.iter().map(|&x| x as f64).collect();
    Tensors {
        emb_m: cvt(&t.emb_m),
        emb_n: cvt(&t.emb_n),
        emb_k: cvt(&t.emb_k),
        w1: cvt(&t.w1),
        b1: cvt(&t.b1),
        w2: cvt(&t.w2),
        b2: cvt(&t.b2),
    }
}

/// Per-sample scratch; reused across the whole training run.
struct Workspace<T> {
    x: Vec<T>,
    pre: Vec<T>,
    h: Vec<T>,
    probs: Vec<T>,
    dlogits: Vec<T>,
    dh: Vec<T>,
    dx: Vec<T>,
}

impl<T: Float> Workspace<T> {
    fn new(s: &Shape) -> Self {
        let z = T::zero();
        Workspace {
            x: vec![z; s.input()],
            pre: vec![z; s.hidden],
            h: vec![z; s.hidden],
            probs: vec![z; s.classes],
            dlogits: vec![z; s.classes],
            dh: vec![z; s.hidden],
            dx: vec![z; s.input()],
        }
    }
}

fn softmax_in_place<T: Float>(z: &mut [T]) {
    let mut mx = z[0];
    for &v in z.iter() {
        if v > mx {
            mx = v;
        }
    }
    let mut sum = T::zero();
    for v in z.iter_mut() {
        *v = (*v - mx).exp();
        sum = sum + *v;
    }
    for v in z.iter_mut() {
        *v = *v / sum;
    }
}

/// Lowest index among the maxima.
fn argmax<T: Float>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fills `ws.x`, `ws.pre`, `ws.h` and leaves softmax probabilities in
/// `ws.probs`.
fn forward<T: Float>(s: &Shape, t: &Tensors<T>, idx: [usize; 3], ws: &mut Workspace<T>) {
    let d = s.d;
    ws.x[..d].copy_from_slice(&t.emb_m[idx[0] * d..(idx[0] + 1) * d]);
    ws.x[d..2 * d].copy_from_slice(&t.emb_n[idx[1] * d..(idx[1] + 1) * d]);
    ws.x[2 * d..].copy_from_slice(&t.emb_k[idx[2] * d..(idx[2] + 1) * d]);

    let input = s.input();
    for j in 0..s.hidden {
        let row = &t.w1[j * input..(j + 1) * input];
        let mut acc = t.b1[j];
        for (&w, &x) in row.iter().zip(ws.x.iter()) {
            acc = acc + w * x;
        }
        ws.pre[j] = acc;
        ws.h[j] = if acc > T::zero() { acc } else { T::zero() };
    }
    for c in 0..s.classes {
        let row = &t.w2[c * s.hidden..(c + 1) * s.hidden];
        let mut acc = t.b2[c];
        for (&w, &h) in row.iter().zip(ws.h.iter()) {
            acc = acc + w * h;
        }
        ws.probs[c] = acc;
    }
    softmax_in_place(&mut ws.probs);
}

/// Accumulates cross-entropy gradients for one sample into `g`, scaled by
/// `scale` (the caller passes 1/batch so `g` ends up holding the mean).
/// Must run directly after `forward` on the same workspace.
fn backward<T: Float>(
    s: &Shape,
    t: &Tensors<T>,
    idx: [usize; 3],
    label: usize,
    scale: T,
    ws: &mut Workspace<T>,
    g: &mut Tensors<T>,
) {
    for c in 0..s.classes {
        let onehot = if c == label { T::one() } else { T::zero() };
        ws.dlogits[c] = (ws.probs[c] - onehot) * scale;
    }

    ws.dh.fill(T::zero());
    for c in 0..s.classes {
        let dz = ws.dlogits[c];
        let row = &t.w2[c * s.hidden..(c + 1) * s.hidden];
        let grow = &mut g.w2[c * s.hidden..(c + 1) * s.hidden];
        for j in 0..s.hidden {
            grow[j] = grow[j] + dz * ws.h[j];
            ws.dh[j] = ws.dh[j] + dz * row[j];
        }
        g.b2[c] = g.b2[c] + dz;
    }

    // ReLU: units at exactly zero pre-activation get zero gradient.
    for j in 0..s.hidden {
        if !(ws.pre[j] > T::zero()) {
            ws.dh[j] = T::zero();
        }
    }

    let input = s.input();
    ws.dx.fill(T::zero());
    for j in 0..s.hidden {
        let dp = ws.dh[j];
        if dp == T::zero() {
            continue;
        }
        let row = &t.w1[j * input..(j + 1) * input];
        let grow = &mut g.w1[j * input..(j + 1) * input];
        for i in 0..input {
            grow[i] = grow[i] + dp * ws.x[i];
            ws.dx[i] = ws.dx[i] + dp * row[i];
        }
        g.b1[j] = g.b1[j] + dp;
    }

    let d = s.d;
    for a in 0..d {
        let r = idx[0] * d + a;
        g.emb_m[r] = g.emb_m[r] + ws.dx[a];
        let r = idx[1] * d + a;
        g.emb_n[r] = g.emb_n[r] + ws.dx[d + a];
        let r = idx[2] * d + a;
        g.emb_k[r] = g.emb_k[r] + ws.dx[2 * d + a];
    }
}

/// One optimizer step's worth of work: zeroes `g`, runs forward/backward
/// over the batch, returns (mean loss, correct predictions).
fn batch_pass<T: Float>(
    s: &Shape,
    t: &Tensors<T>,
    batch: &[([usize; 3], usize)],
    ws: &mut Workspace<T>,
    g: &mut Tensors<T>,
) -> (f64, usize) {
    g.zero_out();
    let scale = T::from(1.0 / batch.len() as f64).expect("scale fits");
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for &(idx, y) in batch {
        forward(s, t, idx, ws);
        loss_sum += -ws.probs[y].ln().to_f64().expect("loss fits");
        if argmax(&ws.probs) == y {
            correct += 1;
        }
        backward(s, t, idx, y, scale, ws, g);
    }
    (loss_sum / batch.len() as f64, correct)
}

/// Forward-only pass; the returned mask records which ReLU units fired for
/// each sample so finite differencing can detect a crossed kink.
fn batch_loss<T: Float>(
    s: &Shape,
    t: &Tensors<T>,
    batch: &[([usize; 3], usize)],
    ws: &mut Workspace<T>,
) -> (f64, Vec<bool>) {
    let mut loss_sum = 0.0;
    let mut mask = Vec::with_capacity(batch.len() * s.hidden);
    for &(idx, y) in batch {
        forward(s, t, idx, ws);
        loss_sum += -ws.probs[y].ln().to_f64().expect("loss fits");
        mask.extend(ws.pre.iter().map(|&p| p > T::zero()));
    }
    (loss_sum / batch.len() as f64, mask)
}

struct Adam {
    m: Tensors<f32>,
    v: Tensors<f32>,
    step: u64,
}

impl Adam {
    fn new(s: &Shape) -> Self {
        Adam {
            m: Tensors::zeros(s),
            v: Tensors::zeros(s),
            step: 0,
        }
    }

    fn apply(&mut self, cfg: &TrainConfig, params: &mut Tensors<f32>, grads: &Tensors<f32>) {
        self.step += 1;
        let b1 = cfg.beta1 as f32;
        let b2 = cfg.beta2 as f32;
        let bc1 = (1.0 - cfg.beta1.powi(self.step as i32)) as f32;
        let bc2 = (1.0 - cfg.beta2.powi(self.step as i32)) as f32;
        let lr = cfg.learning_rate as f32;
        let eps = cfg.eps as f32;

        let ps = params.fields_mut();
        let gs = grads.fields();
        let ms = self.m.fields_mut();
        let vs = self.v.fields_mut();
        for t in 0..7 {
            let (p, g, m, v) = (&mut *ps[t], gs[t], &mut *ms[t], &mut *vs[t]);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

pub struct RecModel {
    vocab: usize,
    embed_dim: usize,
    hidden: usize,
    classes: usize,
    space_hash: String,
    pub(crate) t: Tensors<f32>,
}

impl RecModel {
    /// Fresh model. Initialization draw order is fixed: the three embedding
    /// tables row-major (Gaussian, sigma 0.01), then the two dense layers
    /// (uniform Glorot); biases start at zero and consume no draws.
    pub fn init(
        vocab: usize,
        embed_dim: usize,
        hidden: usize,
        classes: usize,
        space_hash: String,
        rng: &mut Xoshiro256StarStar,
    ) -> Self {
        assert!(vocab > 0 && embed_dim > 0 && hidden > 0 && classes > 0);
        let s = Shape {
            vocab,
            d: embed_dim,
            hidden,
            classes,
        };
        let mut t = Tensors::zeros(&s);
        for table in [&mut t.emb_m, &mut t.emb_n, &mut t.emb_k] {
            for v in table.iter_mut() {
                *v = (rng.next_gaussian() * 0.01) as f32;
            }
        }
        let lim1 = (6.0 / (s.input() + hidden) as f64).sqrt();
        for v in t.w1.iter_mut() {
            *v = ((rng.next_f64() * 2.0 - 1.0) * lim1) as f32;
        }
        let lim2 = (6.0 / (hidden + classes) as f64).sqrt();
        for v in t.w2.iter_mut() {
            *v = ((rng.next_f64() * 2.0 - 1.0) * lim2) as f32;
        }
        RecModel {
            vocab,
            embed_dim,
            hidden,
            classes,
            space_hash,
            t,
        }
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Hash of the configuration space the class ids refer to.
    pub fn space_hash(&self) -> &str {
        &self.space_hash
    }

    pub fn param_count(&self) -> usize {
        self.shape().param_count()
    }

    fn shape(&self) -> Shape {
        Shape {
            vocab: self.vocab,
            d: self.embed_dim,
            hidden: self.hidden,
            classes: self.classes,
        }
    }

    /// Embedding indices for a workload; extents beyond the trained range
    /// clamp to the last table row.
    pub fn features(&self, w: &GemmWorkload) -> [usize; 3] {
        let cap = (self.vocab - 1) as u64;
        [
            w.m.min(cap) as usize,
            w.n.min(cap) as usize,
            w.k.min(cap) as usize,
        ]
    }

    pub fn class_probs(&self, w: &GemmWorkload) -> Vec<f32> {
        let s = self.shape();
        let mut ws = Workspace::new(&s);
        forward(&s, &self.t, self.features(w), &mut ws);
        ws.probs
    }

    /// Recommended class id; ties resolve to the lowest id.
    pub fn predict(&self, w: &GemmWorkload) -> usize {
        argmax(&self.class_probs(w))
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Leading fraction of the dataset (in draw order) used for updates;
    /// the tail is held out for validation.
    pub train_fraction: f64,
    pub embed_dim: usize,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 42,
            train_fraction: 0.9,
            embed_dim: 16,
            hidden: 128,
        }
    }
}

/// Loss and accuracy per epoch. Training numbers are running averages over
/// the epoch's minibatches (the parameters move under them); validation
/// numbers come from a dedicated pass after the epoch. With no held-out
/// samples the validation columns are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset has no samples")]
    Empty,
    #[error("train fraction {0} outside (0, 1]")]
    Fraction(f64),
    #[error("epochs and batch size must be >= 1")]
    Degenerate,
    #[error("labels were made for space {dataset}, not {space}")]
    SpaceMismatch { dataset: String, space: String },
    #[error(transparent)]
    Config(#[from] crate::domain::ConfigError),
}

pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<(RecModel, Vec<EpochMetrics>), TrainError> {
    if ds.samples.is_empty() {
        return Err(TrainError::Empty);
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0) {
        return Err(TrainError::Fraction(cfg.train_fraction));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(TrainError::Degenerate);
    }
    let space = crate::domain::enumerate_configs(ds.spec.geometry()?);
    if space.space_hash() != ds.space_hash {
        return Err(TrainError::SpaceMismatch {
            dataset: ds.space_hash.clone(),
            space: space.space_hash(),
        });
    }

    let vocab = ds.spec.dim_max as usize + 1;
    let mut rng = Xoshiro256StarStar::seed_from_u64(cfg.seed);
    let mut model = RecModel::init(
        vocab,
        cfg.embed_dim,
        cfg.hidden,
        space.len(),
        space.space_hash(),
        &mut rng,
    );
    let s = model.shape();

    let data: Vec<([usize; 3], usize)> = ds
        .samples
        .iter()
        .map(|smp| (model.features(&smp.workload), smp.class_id))
        .collect();
    let n = data.len();
    let n_train = ((n as f64 * cfg.train_fraction).floor() as usize).clamp(1, n);
    let (train_set, val_set) = data.split_at(n_train);

    let mut ws = Workspace::new(&s);
    let mut grads = Tensors::zeros(&s);
    let mut adam = Adam::new(&s);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i]));
            let (mean_loss, ok) = batch_pass(&s, &model.t, &batch, &mut ws, &mut grads);
            adam.apply(cfg, &mut model.t, &grads);
            loss_sum += mean_loss * batch.len() as f64;
            correct += ok;
        }

        let (val_loss, val_acc) = if val_set.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let mut vl = 0.0;
            let mut vc = 0usize;
            for &(idx, y) in val_set {
                forward(&s, &model.t, idx, &mut ws);
                vl += -(ws.probs[y].ln()) as f64;
                if argmax(&ws.probs) == y {
                    vc += 1;
                }
            }
            (vl / val_set.len() as f64, vc as f64 / val_set.len() as f64)
        };

        history.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            val_loss,
            val_acc,
        });
    }
    Ok((model, history))
}

/// Recommendation quality against oracle labels.
#[derive(Debug, Clone, Copy)]
pub struct EvalSummary {
    pub samples: usize,
    /// Fraction predicting exactly the labeled class.
    pub top1: f64,
    /// Fraction whose recommended configuration matches oracle cycles
    /// (counts optimal ties the label missed).
    pub optimal_frac: f64,
    /// Geometric mean of oracle_cycles / recommended_cycles, in (0, 1].
    pub geomean_ratio: f64,
    /// Fraction of recommendations slower than twice the oracle.
    pub tail_frac: f64,
}

pub fn evaluate(
    model: &RecModel,
    samples: &[LabeledSample],
    space: &ConfigSpace,
    fill_latency: u64,
) -> Result<EvalSummary, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::Empty);
    }
    if model.space_hash() != space.space_hash() {
        return Err(TrainError::SpaceMismatch {
            dataset: space.space_hash(),
            space: model.space_hash().to_string(),
        });
    }
    let mut top1 = 0usize;
    let mut optimal = 0usize;
    let mut tail = 0usize;
    let mut ln_sum = 0.0;
    for smp in samples {
        let pred = model.predict(&smp.workload);
        let cfg = space.config(pred)?;
        let cycles = partition::config_cycles(&smp.workload, cfg, fill_latency);
        debug_assert!(cycles >= smp.oracle_cycles);
        let ratio = smp.oracle_cycles as f64 / cycles as f64;
        if pred == smp.class_id {
            top1 += 1;
        }
        if cycles == smp.oracle_cycles {
            optimal += 1;
        }
        if ratio < 0.5 {
            tail += 1;
        }
        ln_sum += ratio.ln();
    }
    let n = samples.len() as f64;
    Ok(EvalSummary {
        samples: samples.len(),
        top1: top1 as f64 / n,
        optimal_frac: optimal as f64 / n,
        geomean_ratio: (ln_sum / n).exp(),
        tail_frac: tail as f64 / n,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckStats {
    pub checked: usize,
    pub failures: usize,
    /// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    pub worst_rel: f64,
}

/// Central-difference check of the analytic gradients, run in f64 through
/// the same generic forward/backward code the f32 trainer uses.
///
/// A perturbed evaluation whose ReLU firing pattern differs between the two
/// sides straddles a kink where the loss is not differentiable; such probe
/// points are discarded and redrawn rather than compared against a
/// meaningless difference quotient.
pub fn gradient_check(
    model: &RecModel,
    batch: &[([usize; 3], usize)],
    per_tensor: usize,
    rng: &mut Xoshiro256StarStar,
) -> GradCheckStats {
    assert!(!batch.is_empty());
    let s = model.shape();
    let mut t64 = to_f64(&model.t);
    let mut ws = Workspace::new(&s);
    let mut analytic = Tensors::zeros(&s);
    batch_pass(&s, &t64, batch, &mut ws, &mut analytic);

    let eps = 1e-5;
    let mut checked = 0;
    let mut failures = 0;
    let mut worst_rel: f64 = 0.0;
    for tensor in 0..7 {
        let len = analytic.fields()[tensor].len();
        for _ in 0..per_tensor {
            let mut probe = None;
            for _attempt in 0..64 {
                let i = rng.next_range(0, len as u64 - 1) as usize;
                let orig = t64.fields()[tensor][i];
                t64.fields_mut()[tensor][i] = orig + eps;
                let (lp, mask_p) = batch_loss(&s, &t64, batch, &mut ws);
                t64.fields_mut()[tensor][i] = orig - eps;
                let (lm, mask_m) = batch_loss(&s, &t64, batch, &mut ws);
                t64.fields_mut()[tensor][i] = orig;
                if mask_p == mask_m {
                    probe = Some((i, (lp - lm) / (2.0 * eps)));
                    break;
                }
            }
            let Some((i, numeric)) = probe else { continue };
            let a = analytic.fields()[tensor][i];
            let diff = (a - numeric).abs();
            checked += 1;
            worst_rel = worst_rel.max(diff / a.abs().max(numeric.abs()).max(1e-8));
            if diff > 1e-4 * a.abs().max(numeric.abs()) + 1e-8 {
                failures += 1;
            }
        }
    }
    GradCheckStats {
        checked,
        failures,
        worst_rel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{enumerate_configs, ArrayGeometry};
    use crate::oracle::{gen_dataset, DatasetSpec};

    fn toy_spec() -> DatasetSpec {
        DatasetSpec {
            samples: 60,
            dim_max: 40,
            seed: 11,
            rows: 16,
            cols: 16,
            cell: 4,
            fill_latency: 0,
        }
    }

    fn toy_model(seed: u64) -> RecModel {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        RecModel::init(20, 5, 16, 9, "h".repeat(64), &mut rng)
    }

    #[test]
    fn softmax_normalizes_and_ignores_shift() {
        let mut a = vec![1.0f64, 2.0, 3.0, -1.0];
        let mut b: Vec<f64> = a.iter().map(|x| x + 100.0).collect();
        softmax_in_place(&mut a);
        softmax_in_place(&mut b);
        let sum: f64 = a.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(a[2] > a[1] && a[1] > a[0] && a[0] > a[3]);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.25f32, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1f32, 0.4, 0.4, 0.1]), 1);
        assert_eq!(argmax(&[1.0f32]), 0);
    }

    #[test]
    fn zero_model_recommends_class_zero() {
        let mut model = toy_model(3);
        model.t.zero_out();
        for m in [1, 7, 19, 5000] {
            assert_eq!(model.predict(&GemmWorkload::new(m, 3, 9).unwrap()), 0);
        }
    }

    #[test]
    fn out_of_range_extents_clamp_to_last_row() {
        let model = toy_model(4);
        let inside = GemmWorkload::new(19, 19, 19).unwrap();
        let outside = GemmWorkload::new(5000, 19, 19).unwrap();
        assert_eq!(model.features(&outside), [19, 19, 19]);
        assert_eq!(model.class_probs(&inside), model.class_probs(&outside));
    }

    #[test]
    fn probabilities_are_a_distribution() {
        let model = toy_model(5);
        let p = model.class_probs(&GemmWorkload::new(3, 4, 5).unwrap());
        assert_eq!(p.len(), 9);
        let sum: f32 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-5);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let ds = gen_dataset(&toy_spec()).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let (m1, h1) = train(&ds, &cfg).unwrap();
        let (m2, h2) = train(&ds, &cfg).unwrap();
        assert_eq!(m1.t, m2.t);
        assert_eq!(h1, h2);

        let different = TrainConfig { seed: 43, ..cfg };
        let (m3, _) = train(&ds, &different).unwrap();
        assert_ne!(m1.t, m3.t);
    }

    #[test]
    fn small_dataset_is_memorized() {
        let ds = gen_dataset(&toy_spec()).unwrap();
        let cfg = TrainConfig {
            epochs: 120,
            batch_size: 8,
            learning_rate: 3e-3,
            train_fraction: 1.0,
            embed_dim: 8,
            hidden: 48,
            ..TrainConfig::default()
        };
        let (model, history) = train(&ds, &cfg).unwrap();
        let last = history.last().unwrap();
        assert_eq!(last.train_acc, 1.0, "loss {}", last.train_loss);
        assert!(last.val_loss.is_nan());

        let space = enumerate_configs(ds.spec.geometry().unwrap());
        let summary = evaluate(&model, &ds.samples, &space, 0).unwrap();
        assert_eq!(summary.top1, 1.0);
        assert_eq!(summary.geomean_ratio, 1.0);
        assert_eq!(summary.tail_frac, 0.0);
        assert_eq!(summary.optimal_frac, 1.0);
    }

    #[test]
    fn loss_decreases_on_real_labels() {
        let ds = gen_dataset(&toy_spec()).unwrap();
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let (_, history) = train(&ds, &cfg).unwrap();
        assert!(history.last().unwrap().train_loss < history[0].train_loss / 1.5);
    }

    #[test]
    fn train_rejects_mismatched_space() {
        let mut ds = gen_dataset(&toy_spec()).unwrap();
        ds.space_hash = "0".repeat(64);
        assert!(matches!(
            train(&ds, &TrainConfig::default()),
            Err(TrainError::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn train_rejects_bad_hyperparameters() {
        let ds = gen_dataset(&toy_spec()).unwrap();
        let bad = TrainConfig {
            train_fraction: 0.0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&ds, &bad), Err(TrainError::Fraction(_))));
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&ds, &bad), Err(TrainError::Degenerate)));
    }

    #[test]
    fn evaluate_checks_space_identity() {
        let ds = gen_dataset(&toy_spec()).unwrap();
        let (model, _) = train(
            &ds,
            &TrainConfig {
                epochs: 1,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let wrong = enumerate_configs(ArrayGeometry::new(8, 8, 4).unwrap());
        assert!(matches!(
            evaluate(&model, &ds.samples, &wrong, 0),
            Err(TrainError::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let model = toy_model(21);
        let mut rng = Xoshiro256StarStar::seed_from_u64(77);
        let mut batch = Vec::new();
        for _ in 0..6 {
            batch.push((
                [
                    rng.next_range(0, 19) as usize,
                    rng.next_range(0, 19) as usize,
                    rng.next_range(0, 19) as usize,
                ],
                rng.next_range(0, 8) as usize,
            ));
        }
        let stats = gradient_check(&model, &batch, 6, &mut rng);
        assert!(stats.checked >= 35, "only {} probes compared", stats.checked);
        assert_eq!(stats.failures, 0, "worst rel err {}", stats.worst_rel);
        // Near-cancelled gradients legitimately carry larger relative noise;
        // the tolerance above is the real gate.
        assert!(stats.worst_rel < 1e-2);
    }

    #[test]
    fn gradients_match_after_some_training_too() {
        // Check at a non-random point in parameter space as well.
        let ds = gen_dataset(&toy_spec()).unwrap();
        let (model, _) = train(
            &ds,
            &TrainConfig {
                epochs: 2,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(78);
        let batch: Vec<_> = ds.samples[..8]
            .iter()
            .map(|smp| (model.features(&smp.workload), smp.class_id))
            .collect();
        let stats = gradient_check(&model, &batch, 4, &mut rng);
        assert_eq!(stats.failures, 0, "worst rel err {}", stats.worst_rel);
    }

    #[test]
    fn untouched_embedding_rows_get_zero_gradient() {
        let model = toy_model(30);
        let s = model.shape();
        let t64 = to_f64(&model.t);
        let mut ws = Workspace::new(&s);
        let mut g = Tensors::zeros(&s);
        // Batch touches only row 3 of each table.
        batch_pass(&s, &t64, &[([3, 3, 3], 1)], &mut ws, &mut g);
        let d = s.d;
        assert!(g.emb_m[3 * d..4 * d].iter().any(|&x| x != 0.0));
        for row in [0usize, 1, 2, 4, 10, 19] {
            assert!(g.emb_m[row * d..(row + 1) * d].iter().all(|&x| x == 0.0));
            assert!(g.emb_k[row * d..(row + 1) * d].iter().all(|&x| x == 0.0));
        }
    }
}
