//! Forward pass of the denoiser, staged layer-by-layer across the whole
//! minibatch because batch normalization couples all samples.
//!
//! Everything the backward pass needs is cached: per-layer node and edge
//! states, pre-normalization edge embeddings, normalized values, hidden
//! pre-activations, and the batch statistics themselves.

use super::{
    matvec_acc, matvec_into, sigmoid, timestep_features, DenoiserParams, LayerSpans, BN_EPS,
};
use crate::mat::stable_sum;
use crate::{Error, Result, SymMat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One sample of a forward batch. `x_t` is the noised matrix in model
/// space; `t` is its schedule timestep.
#[derive(Clone, Copy)]
pub struct BatchInput<'a> {
    pub node_ids: &'a [usize],
    pub x_t: &'a SymMat,
    pub t: usize,
}

pub(crate) struct SampleCache {
    pub m: usize,
    pub ids: Vec<usize>,
    pub x: SymMat,
    pub tf: Vec<f64>,
    /// Node states per layer boundary: `layers + 1` buffers of `m * d`.
    pub h: Vec<Vec<f64>>,
    /// Edge states per layer boundary: `layers + 1` buffers of `m * m * de`
    /// (diagonal entries stay zero and are never read).
    pub e: Vec<Vec<f64>>,
    /// Pre-normalization edge embeddings per layer.
    pub ehat: Vec<Vec<f64>>,
    /// Normalized edge embeddings per layer.
    pub xhat_e: Vec<Vec<f64>>,
    /// Edge-MLP hidden pre-activations per layer.
    pub z1e: Vec<Vec<f64>>,
    /// `V h_j` per layer, `m * d`.
    pub vh: Vec<Vec<f64>>,
    /// Normalized node aggregates per layer.
    pub xhat_h: Vec<Vec<f64>>,
    /// Timestep projection per layer, `de`.
    pub tproj: Vec<Vec<f64>>,
    /// Head hidden pre-activations, `m * m * de`.
    pub hz1: Vec<f64>,
    /// Raw per-direction head outputs, `m * m`.
    pub y: Vec<f64>,
}

/// Per-layer batch statistics (taken over the minibatch in train mode,
/// copied from running statistics in eval mode).
pub(crate) struct BnLayerStats {
    pub e_mean: Vec<f64>,
    pub e_var: Vec<f64>,
    pub e_inv_std: Vec<f64>,
    pub h_mean: Vec<f64>,
    pub h_var: Vec<f64>,
    pub h_inv_std: Vec<f64>,
}

pub struct BatchCache {
    pub(crate) samples: Vec<SampleCache>,
    pub(crate) bn: Vec<BnLayerStats>,
    pub(crate) mode: Mode,
}

impl BatchCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub(crate) fn bn_stats(&self) -> &[BnLayerStats] {
        &self.bn
    }
}

#[inline]
pub(crate) fn eidx(i: usize, j: usize, m: usize, de: usize) -> usize {
    (i * m + j) * de
}

/// Mean and biased variance per channel over all off-diagonal edge slots
/// of all samples, computed with order-independent sums.
fn edge_channel_stats(
    tensors: &[(&[f64], usize)], // (buffer, m) per sample
    de: usize,
) -> (Vec<f64>, Vec<f64>) {
    let count: usize = tensors.iter().map(|&(_, m)| m * (m - 1)).sum();
    let mut mean = vec![0.0; de];
    let mut var = vec![0.0; de];
    let mut scratch = Vec::with_capacity(count);
    for c in 0..de {
        scratch.clear();
        for &(buf, m) in tensors {
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        scratch.push(buf[eidx(i, j, m, de) + c]);
                    }
                }
            }
        }
        mean[c] = stable_sum(&mut scratch) / count as f64;
        let mu = mean[c];
        for v in scratch.iter_mut() {
            *v = (*v - mu) * (*v - mu);
        }
        var[c] = stable_sum(&mut scratch) / count as f64;
    }
    (mean, var)
}

/// Same, over all node slots.
fn node_channel_stats(tensors: &[(&[f64], usize)], d: usize) -> (Vec<f64>, Vec<f64>) {
    let count: usize = tensors.iter().map(|&(_, m)| m).sum();
    let mut mean = vec![0.0; d];
    let mut var = vec![0.0; d];
    let mut scratch = Vec::with_capacity(count);
    for c in 0..d {
        scratch.clear();
        for &(buf, m) in tensors {
            for i in 0..m {
                scratch.push(buf[i * d + c]);
            }
        }
        mean[c] = stable_sum(&mut scratch) / count as f64;
        let mu = mean[c];
        for v in scratch.iter_mut() {
            *v = (*v - mu) * (*v - mu);
        }
        var[c] = stable_sum(&mut scratch) / count as f64;
    }
    (mean, var)
}

/// Runs the network over a batch, returning the symmetrized noise
/// predictions and the cache required for the backward pass.
pub fn forward_batch(
    params: &DenoiserParams,
    inputs: &[BatchInput],
    mode: Mode,
) -> Result<(Vec<SymMat>, BatchCache)> {
    if inputs.is_empty() {
        return Err(Error::invalid("forward batch is empty"));
    }
    let cfg = &params.config;
    let (d, de) = (cfg.node_dim, cfg.edge_dim);
    let layout = &params.layout;

    // Stage 0: embeddings, input edge projection, timestep features.
    let mut samples = Vec::with_capacity(inputs.len());
    for input in inputs {
        let m = input.node_ids.len();
        if m != input.x_t.dim() {
            return Err(Error::invalid("node id count and matrix size differ"));
        }
        if m < 2 {
            return Err(Error::invalid("samples need at least 2 nodes"));
        }
        for &id in input.node_ids {
            if id >= cfg.vocab_size {
                return Err(Error::invalid(format!(
                    "node id {id} outside embedding vocabulary of {}",
                    cfg.vocab_size
                )));
            }
        }
        let mut h0 = vec![0.0; m * d];
        for (i, &id) in input.node_ids.iter().enumerate() {
            h0[i * d..(i + 1) * d].copy_from_slice(params.emb_row(id));
        }
        let win = params.get(layout.edge_in_w);
        let bin = params.get(layout.edge_in_b);
        let mut e0 = vec![0.0; m * m * de];
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let x = input.x_t.get(i, j);
                let slot = &mut e0[eidx(i, j, m, de)..eidx(i, j, m, de) + de];
                for c in 0..de {
                    slot[c] = win[c] * x + bin[c];
                }
            }
        }
        samples.push(SampleCache {
            m,
            ids: input.node_ids.to_vec(),
            x: input.x_t.clone(),
            tf: timestep_features(input.t, cfg.time_dim)?,
            h: vec![h0],
            e: vec![e0],
            ehat: Vec::new(),
            xhat_e: Vec::new(),
            z1e: Vec::new(),
            vh: Vec::new(),
            xhat_h: Vec::new(),
            tproj: Vec::new(),
            hz1: Vec::new(),
            y: Vec::new(),
        });
    }

    // Layer loop.
    let mut bn_all = Vec::with_capacity(cfg.layers);
    for spans in &layout.layers {
        // ehat_ij = P e_ij + Q h_i + R h_j for every ordered pair.
        let p = params.get(spans.p);
        let q = params.get(spans.q);
        let r = params.get(spans.r);
        for s in samples.iter_mut() {
            let m = s.m;
            let e = s.e.last().unwrap();
            let h = s.h.last().unwrap();
            let mut ehat = vec![0.0; m * m * de];
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let o = eidx(i, j, m, de);
                    let out = &mut ehat[o..o + de];
                    matvec_into(p, de, de, &e[o..o + de], out);
                    matvec_acc(q, de, d, &h[i * d..(i + 1) * d], out);
                    matvec_acc(r, de, d, &h[j * d..(j + 1) * d], out);
                }
            }
            s.ehat.push(ehat);
        }

        // Edge batch normalization.
        let (e_mean, e_var) = match mode {
            Mode::Train => {
                let tensors: Vec<(&[f64], usize)> = samples
                    .iter()
                    .map(|s| (s.ehat.last().unwrap().as_slice(), s.m))
                    .collect();
                edge_channel_stats(&tensors, de)
            }
            Mode::Eval => (
                params.get(spans.bn_e_mean).to_vec(),
                params.get(spans.bn_e_var).to_vec(),
            ),
        };
        let e_inv_std: Vec<f64> = e_var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();

        let gamma_e = params.get(spans.bn_e_gamma).to_vec();
        let beta_e = params.get(spans.bn_e_beta).to_vec();
        let w1 = params.get(spans.mlp_e_w1);
        let b1 = params.get(spans.mlp_e_b1);
        let w2 = params.get(spans.mlp_e_w2);
        let b2 = params.get(spans.mlp_e_b2);
        let wt = params.get(spans.mlp_t_w);
        let bt = params.get(spans.mlp_t_b);

        for s in samples.iter_mut() {
            let m = s.m;
            let ehat = s.ehat.last().unwrap();
            let mut xhat = vec![0.0; m * m * de];
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let o = eidx(i, j, m, de);
                    for c in 0..de {
                        xhat[o + c] = (ehat[o + c] - e_mean[c]) * e_inv_std[c];
                    }
                }
            }

            // Timestep projection, shared by all edges of the sample.
            let mut tproj = bt.to_vec();
            matvec_acc(wt, de, cfg.time_dim, &s.tf, &mut tproj);

            // e' = e + W2 relu(W1 (gamma xhat + beta) + b1) + b2 + tproj
            let e = s.e.last().unwrap().clone();
            let mut e_next = vec![0.0; m * m * de];
            let mut z1 = vec![0.0; m * m * de];
            let mut u = vec![0.0; de];
            let mut a1 = vec![0.0; de];
            let mut out2 = vec![0.0; de];
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let o = eidx(i, j, m, de);
                    for c in 0..de {
                        u[c] = gamma_e[c] * xhat[o + c] + beta_e[c];
                    }
                    matvec_into(w1, de, de, &u, &mut z1[o..o + de]);
                    for c in 0..de {
                        z1[o + c] += b1[c];
                        a1[c] = z1[o + c].max(0.0);
                    }
                    matvec_into(w2, de, de, &a1, &mut out2);
                    for c in 0..de {
                        e_next[o + c] = e[o + c] + out2[c] + b2[c] + tproj[c];
                    }
                }
            }
            s.xhat_e.push(xhat);
            s.z1e.push(z1);
            s.tproj.push(tproj);
            s.e.push(e_next);
        }

        // Node aggregation: agg_i = U h_i + sum_j sigmoid(ehat_ij) ⊙ V h_j.
        let u_mat = params.get(spans.u);
        let v_mat = params.get(spans.v);
        for s in samples.iter_mut() {
            let m = s.m;
            let h = s.h.last().unwrap();
            let ehat = s.ehat.last().unwrap();
            let mut vh = vec![0.0; m * d];
            for j in 0..m {
                matvec_into(v_mat, d, d, &h[j * d..(j + 1) * d], &mut vh[j * d..(j + 1) * d]);
            }
            let mut agg = vec![0.0; m * d];
            let mut scratch = Vec::with_capacity(m - 1);
            for i in 0..m {
                matvec_into(u_mat, d, d, &h[i * d..(i + 1) * d], &mut agg[i * d..(i + 1) * d]);
                for c in 0..d {
                    scratch.clear();
                    for j in 0..m {
                        if j != i {
                            let g = sigmoid(ehat[eidx(i, j, m, de) + c]);
                            scratch.push(g * vh[j * d + c]);
                        }
                    }
                    agg[i * d + c] += stable_sum(&mut scratch);
                }
            }
            s.vh.push(vh);
            // Stash agg temporarily in xhat_h; normalized in place below.
            s.xhat_h.push(agg);
        }

        // Node batch normalization.
        let (h_mean, h_var) = match mode {
            Mode::Train => {
                let tensors: Vec<(&[f64], usize)> = samples
                    .iter()
                    .map(|s| (s.xhat_h.last().unwrap().as_slice(), s.m))
                    .collect();
                node_channel_stats(&tensors, d)
            }
            Mode::Eval => (
                params.get(spans.bn_h_mean).to_vec(),
                params.get(spans.bn_h_var).to_vec(),
            ),
        };
        let h_inv_std: Vec<f64> = h_var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let gamma_h = params.get(spans.bn_h_gamma);
        let beta_h = params.get(spans.bn_h_beta);
        for s in samples.iter_mut() {
            let m = s.m;
            let agg = s.xhat_h.last_mut().unwrap();
            for i in 0..m {
                for c in 0..d {
                    agg[i * d + c] = (agg[i * d + c] - h_mean[c]) * h_inv_std[c];
                }
            }
            let xhat = s.xhat_h.last().unwrap();
            let h = s.h.last().unwrap();
            let mut h_next = vec![0.0; m * d];
            for i in 0..m {
                for c in 0..d {
                    let bn_out = gamma_h[c] * xhat[i * d + c] + beta_h[c];
                    h_next[i * d + c] = h[i * d + c] + bn_out.max(0.0);
                }
            }
            s.h.push(h_next);
        }

        bn_all.push(BnLayerStats {
            e_mean,
            e_var,
            e_inv_std,
            h_mean,
            h_var,
            h_inv_std,
        });
    }

    // Head: scalar per ordered pair, then transpose-symmetrized.
    let wh1 = params.get(layout.head_w1);
    let bh1 = params.get(layout.head_b1);
    let wh2 = params.get(layout.head_w2);
    let bh2 = params.get(layout.head_b2)[0];
    let mut outputs = Vec::with_capacity(samples.len());
    for s in samples.iter_mut() {
        let m = s.m;
        let e_last = s.e.last().unwrap();
        let mut hz1 = vec![0.0; m * m * de];
        let mut y = vec![0.0; m * m];
        let mut relu_e = vec![0.0; de];
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let o = eidx(i, j, m, de);
                for c in 0..de {
                    relu_e[c] = e_last[o + c].max(0.0);
                }
                matvec_into(wh1, de, de, &relu_e, &mut hz1[o..o + de]);
                let mut acc = bh2;
                for c in 0..de {
                    hz1[o + c] += bh1[c];
                    acc += wh2[c] * hz1[o + c].max(0.0);
                }
                y[i * m + j] = acc;
            }
        }
        let eps_hat = SymMat::from_fn(m, |i, j| (y[i * m + j] + y[j * m + i]) / 2.0);
        s.hz1 = hz1;
        s.y = y;
        outputs.push(eps_hat);
    }

    Ok((
        outputs,
        BatchCache {
            samples,
            bn: bn_all,
            mode,
        },
    ))
}

/// Single-sample prediction. Train mode computes batch statistics from this
/// sample alone; eval mode uses the frozen running statistics.
pub fn predict_noise(
    x_t: &SymMat,
    t: usize,
    node_ids: &[usize],
    params: &DenoiserParams,
    mode: Mode,
) -> Result<SymMat> {
    let (mut out, _) = forward_batch(
        params,
        &[BatchInput {
            node_ids,
            x_t,
            t,
        }],
        mode,
    )?;
    Ok(out.pop().unwrap())
}

/// Eval-mode adapter so a trained parameter set plugs into the diffusion
/// layer's [`crate::diffusion::NoisePredictor`] seam.
pub struct DenoiserEval<'a>(pub &'a DenoiserParams);

impl crate::diffusion::NoisePredictor for DenoiserEval<'_> {
    fn predict_noise(&self, x_t: &SymMat, t: usize, node_ids: &[usize]) -> Result<SymMat> {
        predict_noise(x_t, t, node_ids, self.0, Mode::Eval)
    }
}
