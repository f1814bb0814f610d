//! Anisotropic GNN noise predictor.
//!
//! The network alternates an edge refinement and a gated node refinement
//! for `L` layers, then reads a scalar noise estimate off every edge:
//!
//! ```text
//! h0_i    = Emb[id_i]                      e0_ij = win * x_t[i,j] + bin
//! ehat_ij = P e_ij + Q h_i + R h_j
//! e_ij'   = e_ij + MLP_e(BN(ehat_ij)) + MLP_t(t)
//! h_i'    = h_i + ReLU(BN(U h_i + sum_{j != i} sigmoid(ehat_ij) ⊙ V h_j))
//! out_ij  = MLP_head(ReLU(e_ij^(L)))       eps_hat = (out + out^T) / 2
//! ```
//!
//! `BN` normalizes each feature channel over all edges (respectively
//! nodes) of the minibatch during training and uses frozen running
//! statistics in eval mode. All parameters live in one flat `f64` buffer
//! in a fixed documented order (see [`Layout`]), which makes checkpoint
//! serialization, the optimizer, and finite-difference checks uniform.
//!
//! Every reduction over graph neighborhoods and batch statistics sorts its
//! summands first ([`crate::mat::stable_sum`]), so the forward pass is
//! permutation-equivariant bit-for-bit, not just up to rounding.

mod backward;
mod forward;

pub use backward::backward_batch;
pub use forward::{forward_batch, predict_noise, BatchCache, BatchInput, DenoiserEval, Mode};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::corpus::FINGERPRINT_BITS;
use crate::{Error, Result};

/// Epsilon inside the batch-norm denominator.
pub(crate) const BN_EPS: f64 = 1e-5;
/// Running-statistics momentum: `new = (1 - M) * old + M * batch`.
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenoiserConfig {
    /// Number of refinement layers `L`.
    pub layers: usize,
    /// Node feature width `d`.
    pub node_dim: usize,
    /// Edge feature width `d_e`.
    pub edge_dim: usize,
    /// Embedding table rows; node ids must stay below this.
    pub vocab_size: usize,
    /// Sinusoidal timestep feature width (even).
    pub time_dim: usize,
    /// Fingerprint width of the optional chemical-structure head;
    /// 0 disables the head.
    pub csp_bits: usize,
}

impl DenoiserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0
            || self.node_dim == 0
            || self.edge_dim == 0
            || self.vocab_size == 0
            || self.time_dim == 0
        {
            return Err(Error::invalid("denoiser config fields must be >= 1"));
        }
        if self.time_dim % 2 != 0 {
            return Err(Error::invalid("time_dim must be even"));
        }
        if self.node_dim != self.edge_dim {
            // The gate sigmoid(ehat_ij) ⊙ V h_j multiplies an edge-width
            // vector into a node-width one; the architecture only
            // type-checks with equal widths.
            return Err(Error::invalid(
                "node_dim and edge_dim must be equal for the edge-gated node update",
            ));
        }
        Ok(())
    }

    pub fn with_csp(mut self) -> Self {
        self.csp_bits = FINGERPRINT_BITS;
        self
    }
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        DenoiserConfig {
            layers: 2,
            node_dim: 64,
            edge_dim: 64,
            vocab_size: 1,
            time_dim: 16,
            csp_bits: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    RunningStat,
}

/// Half-open range of one named tensor inside the flat parameter buffer.
#[derive(Clone, Copy, Debug)]
pub struct Span {
    pub offset: usize,
    pub len: usize,
}

impl Span {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Clone, Debug)]
pub struct LayerSpans {
    pub p: Span,
    pub q: Span,
    pub r: Span,
    pub u: Span,
    pub v: Span,
    pub mlp_e_w1: Span,
    pub mlp_e_b1: Span,
    pub mlp_e_w2: Span,
    pub mlp_e_b2: Span,
    pub mlp_t_w: Span,
    pub mlp_t_b: Span,
    pub bn_e_gamma: Span,
    pub bn_e_beta: Span,
    pub bn_e_mean: Span,
    pub bn_e_var: Span,
    pub bn_h_gamma: Span,
    pub bn_h_beta: Span,
    pub bn_h_mean: Span,
    pub bn_h_var: Span,
}

/// Canonical parameter order:
///
/// `emb`, `edge_in_w`, `edge_in_b`, then per layer
/// `p, q, r, u, v, mlp_e_w1, mlp_e_b1, mlp_e_w2, mlp_e_b2, mlp_t_w,
/// mlp_t_b, bn_e_gamma, bn_e_beta, bn_e_mean, bn_e_var, bn_h_gamma,
/// bn_h_beta, bn_h_mean, bn_h_var`, then `head_w1, head_b1, head_w2,
/// head_b2`, then (with a CSP head) `csp_w, csp_b`. Matrices are
/// row-major. Checkpoints persist exactly this buffer.
#[derive(Clone, Debug)]
pub struct Layout {
    pub emb: Span,
    pub edge_in_w: Span,
    pub edge_in_b: Span,
    pub layers: Vec<LayerSpans>,
    pub head_w1: Span,
    pub head_b1: Span,
    pub head_w2: Span,
    pub head_b2: Span,
    pub csp_w: Option<Span>,
    pub csp_b: Option<Span>,
    pub total: usize,
    named: Vec<(String, Span, ParamKind)>,
}

impl Layout {
    pub fn new(cfg: &DenoiserConfig) -> Layout {
        let (d, de, td) = (cfg.node_dim, cfg.edge_dim, cfg.time_dim);
        let mut named: Vec<(String, Span, ParamKind)> = Vec::new();
        let mut cursor = 0usize;
        let mut push = |name: String, len: usize, kind: ParamKind| -> Span {
            let span = Span {
                offset: cursor,
                len,
            };
            cursor += len;
            named.push((name, span, kind));
            span
        };

        use ParamKind::*;
        let emb = push("emb".into(), cfg.vocab_size * d, Trainable);
        let edge_in_w = push("edge_in_w".into(), de, Trainable);
        let edge_in_b = push("edge_in_b".into(), de, Trainable);
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let n = |s: &str| format!("layer{l}.{s}");
            layers.push(LayerSpans {
                p: push(n("p"), de * de, Trainable),
                q: push(n("q"), de * d, Trainable),
                r: push(n("r"), de * d, Trainable),
                u: push(n("u"), d * d, Trainable),
                v: push(n("v"), d * d, Trainable),
                mlp_e_w1: push(n("mlp_e_w1"), de * de, Trainable),
                mlp_e_b1: push(n("mlp_e_b1"), de, Trainable),
                mlp_e_w2: push(n("mlp_e_w2"), de * de, Trainable),
                mlp_e_b2: push(n("mlp_e_b2"), de, Trainable),
                mlp_t_w: push(n("mlp_t_w"), de * td, Trainable),
                mlp_t_b: push(n("mlp_t_b"), de, Trainable),
                bn_e_gamma: push(n("bn_e_gamma"), de, Trainable),
                bn_e_beta: push(n("bn_e_beta"), de, Trainable),
                bn_e_mean: push(n("bn_e_mean"), de, RunningStat),
                bn_e_var: push(n("bn_e_var"), de, RunningStat),
                bn_h_gamma: push(n("bn_h_gamma"), d, Trainable),
                bn_h_beta: push(n("bn_h_beta"), d, Trainable),
                bn_h_mean: push(n("bn_h_mean"), d, RunningStat),
                bn_h_var: push(n("bn_h_var"), d, RunningStat),
            });
        }
        let head_w1 = push("head_w1".into(), de * de, Trainable);
        let head_b1 = push("head_b1".into(), de, Trainable);
        let head_w2 = push("head_w2".into(), de, Trainable);
        let head_b2 = push("head_b2".into(), 1, Trainable);
        let (csp_w, csp_b) = if cfg.csp_bits > 0 {
            (
                Some(push("csp_w".into(), cfg.csp_bits * d, Trainable)),
                Some(push("csp_b".into(), cfg.csp_bits, Trainable)),
            )
        } else {
            (None, None)
        };

        Layout {
            emb,
            edge_in_w,
            edge_in_b,
            layers,
            head_w1,
            head_b1,
            head_w2,
            head_b2,
            csp_w,
            csp_b,
            total: cursor,
            named,
        }
    }

    /// Name of the tensor containing flat index `i` (for diagnostics).
    pub fn name_of(&self, i: usize) -> &str {
        for (name, span, _) in &self.named {
            if span.range().contains(&i) {
                return name;
            }
        }
        "<out of range>"
    }

    pub fn named_spans(&self) -> impl Iterator<Item = (&str, Span, ParamKind)> {
        self.named.iter().map(|(n, s, k)| (n.as_str(), *s, *k))
    }

    pub fn trainable_spans(&self) -> impl Iterator<Item = Span> + '_ {
        self.named
            .iter()
            .filter(|(_, _, k)| *k == ParamKind::Trainable)
            .map(|(_, s, _)| *s)
    }
}

/// All learnable tensors plus normalization running statistics, stored in
/// one flat buffer in the canonical [`Layout`] order.
#[derive(Clone, Debug)]
pub struct DenoiserParams {
    pub config: DenoiserConfig,
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl DenoiserParams {
    /// Wraps an existing flat buffer (checkpoint loading).
    pub fn from_flat(config: DenoiserConfig, data: Vec<f64>) -> Result<DenoiserParams> {
        config.validate()?;
        let layout = Layout::new(&config);
        if data.len() != layout.total {
            return Err(Error::invalid(format!(
                "parameter buffer has {} values, layout requires {}",
                data.len(),
                layout.total
            )));
        }
        Ok(DenoiserParams {
            config,
            layout,
            data,
        })
    }

    pub fn get(&self, span: Span) -> &[f64] {
        &self.data[span.range()]
    }

    pub fn get_mut(&mut self, span: Span) -> &mut [f64] {
        &mut self.data[span.range()]
    }

    pub fn emb_row(&self, id: usize) -> &[f64] {
        let d = self.config.node_dim;
        &self.data[self.layout.emb.offset + id * d..self.layout.emb.offset + (id + 1) * d]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Folds fresh batch statistics into the running statistics.
    pub fn apply_bn_updates(&mut self, cache: &BatchCache, momentum: f64) {
        let stats = cache.bn_stats();
        for (l, s) in stats.iter().enumerate() {
            let spans = self.layout.layers[l].clone();
            for (span, batch) in [
                (spans.bn_e_mean, &s.e_mean),
                (spans.bn_e_var, &s.e_var),
                (spans.bn_h_mean, &s.h_mean),
                (spans.bn_h_var, &s.h_var),
            ] {
                let dst = self.get_mut(span);
                for (old, &new) in dst.iter_mut().zip(batch) {
                    *old = (1.0 - momentum) * *old + momentum * new;
                }
            }
        }
    }
}

/// Deterministic initialization: weight matrices draw `N(0, 1/fan_in)`
/// entries (fan_in = input width), the embedding draws `N(0, 1/d)`, biases
/// start at zero, normalization scales at one with zeroed running means
/// and unit running variances.
pub fn init_params(config: &DenoiserConfig, seed: u64) -> Result<DenoiserParams> {
    config.validate()?;
    let layout = Layout::new(config);
    let mut data = vec![0.0; layout.total];
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (d, de, td) = (config.node_dim, config.edge_dim, config.time_dim);

    let mut fill_normal = |span: Span, data: &mut Vec<f64>, std: f64| {
        for v in &mut data[span.range()] {
            *v = rng.sample::<f64, _>(StandardNormal) * std;
        }
    };
    let inv_sqrt = |fan_in: usize| 1.0 / (fan_in as f64).sqrt();

    fill_normal(layout.emb, &mut data, inv_sqrt(d));
    fill_normal(layout.edge_in_w, &mut data, 1.0);
    for l in &layout.layers {
        fill_normal(l.p, &mut data, inv_sqrt(de));
        fill_normal(l.q, &mut data, inv_sqrt(d));
        fill_normal(l.r, &mut data, inv_sqrt(d));
        fill_normal(l.u, &mut data, inv_sqrt(d));
        fill_normal(l.v, &mut data, inv_sqrt(d));
        fill_normal(l.mlp_e_w1, &mut data, inv_sqrt(de));
        fill_normal(l.mlp_e_w2, &mut data, inv_sqrt(de));
        fill_normal(l.mlp_t_w, &mut data, inv_sqrt(td));
        for span in [l.bn_e_gamma, l.bn_h_gamma, l.bn_e_var, l.bn_h_var] {
            data[span.range()].fill(1.0);
        }
    }
    fill_normal(layout.head_w1, &mut data, inv_sqrt(de));
    fill_normal(layout.head_w2, &mut data, inv_sqrt(de));
    if let Some(span) = layout.csp_w {
        fill_normal(span, &mut data, inv_sqrt(d));
    }

    Ok(DenoiserParams {
        config: *config,
        layout,
        data,
    })
}

/// Standard interleaved sinusoidal features of a timestep: frequencies are
/// geometrically spaced from 1 down to 1/10000 (inclusive endpoints), and
/// each frequency contributes a `sin`/`cos` pair.
pub fn timestep_features(t: usize, time_dim: usize) -> Result<Vec<f64>> {
    if time_dim == 0 || time_dim % 2 != 0 {
        return Err(Error::invalid("time_dim must be a positive even number"));
    }
    let half = time_dim / 2;
    let mut out = Vec::with_capacity(time_dim);
    let t = t as f64;
    for k in 0..half {
        let freq = if half == 1 {
            1.0
        } else {
            (-(10000f64.ln()) * k as f64 / (half - 1) as f64).exp()
        };
        out.push((t * freq).sin());
        out.push((t * freq).cos());
    }
    Ok(out)
}

pub(crate) fn matvec_into(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for c in 0..cols {
            acc += row[c] * x[c];
        }
        out[r] = acc;
    }
}

pub(crate) fn matvec_acc(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for c in 0..cols {
            acc += row[c] * x[c];
        }
        out[r] += acc;
    }
}

/// `out += w^T y` (transpose matvec accumulate).
pub(crate) fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let yr = y[r];
        for c in 0..cols {
            out[c] += row[c] * yr;
        }
    }
}

/// `dw += y ⊗ x` (outer-product accumulate into a rows×cols gradient).
pub(crate) fn outer_acc(dw: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &yr) in y.iter().enumerate() {
        let drow = &mut dw[r * cols..(r + 1) * cols];
        for c in 0..cols {
            drow[c] += yr * x[c];
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_config() -> DenoiserConfig {
        DenoiserConfig {
            layers: 2,
            node_dim: 8,
            edge_dim: 8,
            vocab_size: 12,
            time_dim: 6,
            csp_bits: 0,
        }
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let cfg = small_config();
        let a = init_params(&cfg, 4).unwrap();
        let b = init_params(&cfg, 4).unwrap();
        assert_eq!(a.data, b.data);
        let c = init_params(&cfg, 5).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn init_weight_variance_matches_fan_in() {
        let cfg = DenoiserConfig {
            layers: 1,
            node_dim: 64,
            edge_dim: 64,
            vocab_size: 64,
            time_dim: 16,
            csp_bits: 0,
        };
        let p = init_params(&cfg, 0).unwrap();
        // Pool all P entries (64*64 draws of std 1/8).
        let vals = p.get(p.layout.layers[0].p);
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        // 3-sigma band around 1/64: sd(sample var) ~ var * sqrt(2/n).
        let expect = 1.0 / 64.0;
        assert!(
            (var - expect).abs() < 3.0 * expect * (2.0 / n).sqrt(),
            "sample variance {var} too far from {expect}"
        );
        // Normalization starts as identity.
        assert!(p.get(p.layout.layers[0].bn_e_gamma).iter().all(|&v| v == 1.0));
        assert!(p.get(p.layout.layers[0].bn_e_beta).iter().all(|&v| v == 0.0));
        assert!(p.get(p.layout.layers[0].bn_e_var).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config();
        cfg.time_dim = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.node_dim = 4;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.layers = 0;
        assert!(cfg.validate().is_err());
        assert!(small_config().validate().is_ok());
    }

    #[test]
    fn layout_is_contiguous_and_named() {
        let cfg = small_config().with_csp();
        let layout = Layout::new(&cfg);
        let mut cursor = 0;
        for (_, span, _) in layout.named_spans() {
            assert_eq!(span.offset, cursor);
            cursor += span.len;
        }
        assert_eq!(cursor, layout.total);
        assert_eq!(layout.name_of(0), "emb");
        assert_eq!(layout.name_of(layout.total - 1), "csp_b");
    }

    #[test]
    fn timestep_features_at_zero() {
        let f = timestep_features(0, 8).unwrap();
        for (k, v) in f.iter().enumerate() {
            if k % 2 == 0 {
                assert_eq!(*v, 0.0);
            } else {
                assert_eq!(*v, 1.0);
            }
        }
    }

    #[test]
    fn timestep_features_are_bounded() {
        for t in [0usize, 1, 7, 50, 10_000] {
            for dim in [2usize, 4, 16] {
                let f = timestep_features(t, dim).unwrap();
                assert_eq!(f.len(), dim);
                assert!(f.iter().all(|v| (-1.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn timestep_features_match_independent_transcription() {
        // Frozen from an independent evaluation of the standard formula.
        let f = timestep_features(1, 4).unwrap();
        assert_relative_eq!(f[0], 0.8414709848078965, epsilon = 1e-15);
        assert_relative_eq!(f[1], 0.5403023058681398, epsilon = 1e-15);
        assert_relative_eq!(f[2], 9.999999983333325e-05, epsilon = 1e-18);
        assert_relative_eq!(f[3], 0.999999995, epsilon = 1e-15);

        let f = timestep_features(7, 6).unwrap();
        for (got, want) in f.iter().zip([
            0.6569865987187891,
            0.7539022543433046,
            0.06994284733753273,
            0.9975510002532796,
            0.0006999999428333341,
            0.99999975500001,
        ]) {
            assert_relative_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn timestep_features_reject_odd_dims() {
        assert!(timestep_features(3, 3).is_err());
        assert!(timestep_features(3, 0).is_err());
    }
}
