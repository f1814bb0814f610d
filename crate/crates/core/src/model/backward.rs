//! Reverse-mode gradients for the denoiser, derived by hand for this fixed
//! architecture. The contract is exactness: every entry must agree with
//! central finite differences of the train-mode loss.
//!
//! Batch normalization is differentiated through its batch statistics, so
//! the two batch-wide stages (node and edge normalization) run once per
//! layer across all samples; everything else is per-sample loop nests that
//! mirror the forward pass in reverse.

use super::forward::{eidx, BatchCache, Mode};
use super::{matvec_t_acc, outer_acc, sigmoid, DenoiserParams};
use crate::{Error, Result, SymMat};

/// Gradient of the loss with respect to every parameter, given the
/// gradient with respect to each sample's symmetrized output.
///
/// `d_eps_hat[s].get(i, j)` must hold `dL/d eps_hat_s[i][j]`. Running
/// statistics receive zero gradient (the train-mode loss does not read
/// them). Embedding rows of nodes absent from the batch stay exactly zero.
pub fn backward_batch(
    params: &DenoiserParams,
    cache: &BatchCache,
    d_eps_hat: &[SymMat],
) -> Result<Vec<f64>> {
    if cache.mode() != Mode::Train {
        return Err(Error::invalid(
            "gradients are defined for the train-mode forward pass",
        ));
    }
    if d_eps_hat.len() != cache.samples.len() {
        return Err(Error::invalid("output gradient count mismatch"));
    }
    let cfg = &params.config;
    let (d, de, td) = (cfg.node_dim, cfg.edge_dim, cfg.time_dim);
    let layout = &params.layout;
    let mut grads = vec![0.0; layout.total];

    // Per-sample carry buffers: gradient wrt the current layer-boundary
    // node and edge states.
    let mut dh: Vec<Vec<f64>> = cache.samples.iter().map(|s| vec![0.0; s.m * d]).collect();
    let mut de_buf: Vec<Vec<f64>> = cache
        .samples
        .iter()
        .map(|s| vec![0.0; s.m * s.m * de])
        .collect();

    // Head backward: y_ij = wh2 . relu(wh1 relu(e_L) + bh1) + bh2,
    // eps_hat = (y + y^T)/2.
    {
        let wh1 = params.get(layout.head_w1);
        let wh2 = params.get(layout.head_w2);
        let mut dhz1 = vec![0.0; de];
        let mut relu_e = vec![0.0; de];
        let mut dre = vec![0.0; de];
        for (s_idx, s) in cache.samples.iter().enumerate() {
            let m = s.m;
            let e_last = s.e.last().unwrap();
            let de_out = &mut de_buf[s_idx];
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let dy = d_eps_hat[s_idx].get(i, j) / 2.0;
                    if dy == 0.0 {
                        continue;
                    }
                    let o = eidx(i, j, m, de);
                    for c in 0..de {
                        relu_e[c] = e_last[o + c].max(0.0);
                        let ha1 = s.hz1[o + c].max(0.0);
                        grads[layout.head_w2.offset + c] += dy * ha1;
                        dhz1[c] = if s.hz1[o + c] > 0.0 { wh2[c] * dy } else { 0.0 };
                    }
                    grads[layout.head_b2.offset] += dy;
                    outer_acc(
                        &mut grads[layout.head_w1.range()],
                        &dhz1,
                        &relu_e,
                    );
                    for c in 0..de {
                        grads[layout.head_b1.offset + c] += dhz1[c];
                    }
                    dre.fill(0.0);
                    matvec_t_acc(wh1, de, de, &dhz1, &mut dre);
                    for c in 0..de {
                        if e_last[o + c] > 0.0 {
                            de_out[o + c] += dre[c];
                        }
                    }
                }
            }
        }
    }

    let n_edges_total: usize = cache.samples.iter().map(|s| s.m * (s.m - 1)).sum();
    let n_nodes_total: usize = cache.samples.iter().map(|s| s.m).sum();

    for l in (0..cfg.layers).rev() {
        let spans = &layout.layers[l];
        let stats = &cache.bn[l];
        let gamma_h = params.get(spans.bn_h_gamma).to_vec();
        let beta_h = params.get(spans.bn_h_beta).to_vec();
        let gamma_e = params.get(spans.bn_e_gamma).to_vec();
        let beta_e = params.get(spans.bn_e_beta).to_vec();

        // --- Node stream ---------------------------------------------
        // h_{l+1} = h_l + relu(gamma xhat + beta); residual passthrough
        // happens implicitly (dh keeps its value), the relu branch feeds
        // the normalization backward.
        let mut dr_all: Vec<Vec<f64>> = Vec::with_capacity(cache.samples.len());
        for (s_idx, s) in cache.samples.iter().enumerate() {
            let m = s.m;
            let xhat = &s.xhat_h[l];
            let mut dr = vec![0.0; m * d];
            for i in 0..m {
                for c in 0..d {
                    let bn_out = gamma_h[c] * xhat[i * d + c] + beta_h[c];
                    if bn_out > 0.0 {
                        dr[i * d + c] = dh[s_idx][i * d + c];
                    }
                }
            }
            dr_all.push(dr);
        }
        // Batch-wide normalization backward (node side).
        let mut s1 = vec![0.0; d];
        let mut s2 = vec![0.0; d];
        for (s_idx, s) in cache.samples.iter().enumerate() {
            let xhat = &s.xhat_h[l];
            for i in 0..s.m {
                for c in 0..d {
                    let g = dr_all[s_idx][i * d + c];
                    s1[c] += g;
                    s2[c] += g * xhat[i * d + c];
                }
            }
        }
        for c in 0..d {
            grads[spans.bn_h_beta.offset + c] += s1[c];
            grads[spans.bn_h_gamma.offset + c] += s2[c];
        }
        let n_h = n_nodes_total as f64;
        let mut dagg_all: Vec<Vec<f64>> = Vec::with_capacity(cache.samples.len());
        for (s_idx, s) in cache.samples.iter().enumerate() {
            let xhat = &s.xhat_h[l];
            let mut dagg = vec![0.0; s.m * d];
            for i in 0..s.m {
                for c in 0..d {
                    let g = dr_all[s_idx][i * d + c];
                    dagg[i * d + c] = gamma_h[c]
                        * stats.h_inv_std[c]
                        * (g - s1[c] / n_h - xhat[i * d + c] * s2[c] / n_h);
                }
            }
            dagg_all.push(dagg);
        }

        // agg_i = U h_i + sum_{j != i} sigmoid(ehat_ij) ⊙ V h_j.
        let u_mat = params.get(spans.u).to_vec();
        let v_mat = params.get(spans.v).to_vec();
        let mut dehat_all: Vec<Vec<f64>> = cache
            .samples
            .iter()
            .map(|s| vec![0.0; s.m * s.m * de])
            .collect();
        for (s_idx, s) in cache.samples.iter().enumerate() {
            let m = s.m;
            let h = &s.h[l];
            let ehat = &s.ehat[l];
            let vh = &s.vh[l];
            let dagg = &dagg_all[s_idx];
            let dehat = &mut dehat_all[s_idx];
            let mut dvh = vec![0.0; m * d];
            for i in 0..m {
                let dai = &dagg[i * d..(i + 1) * d];
                outer_acc(&mut grads[spans.u.range()], dai, &h[i * d..(i + 1) * d]);
                matvec_t_acc(&u_mat, d, d, dai, &mut dh[s_idx][i * d..(i + 1) * d]);
                for j in 0..m {
                    if j == i {
                        continue;
                    }
                    let o = eidx(i, j, m, de);
                    for c in 0..d {
                        let g = sigmoid(ehat[o + c]);
                        dehat[o + c] += dai[c] * vh[j * d + c] * g * (1.0 - g);
                        dvh[j * d + c] += dai[c] * g;
                    }
                }
            }
            for j in 0..m {
                let dvj = &dvh[j * d..(j + 1) * d];
                outer_acc(&mut grads[spans.v.range()], dvj, &h[j * d..(j + 1) * d]);
                matvec_t_acc(&v_mat, d, d, dvj, &mut dh[s_idx][j * d..(j + 1) * d]);
            }
        }

        // --- Edge stream ----------------------------------------------
        // e_{l+1} = e_l + W2 relu(W1 u + b1) + b2 + tproj, with
        // u = gamma xhat + beta. The residual passthrough keeps de_buf;
        // the MLP branch produces du for the normalization backward.
        let w1 = params.get(spans.mlp_e_w1).to_vec();
        let w2 = params.get(spans.mlp_e_w2).to_vec();
        let mut du_all: Vec<Vec<f64>> = cache
            .samples
            .iter()
            .map(|s| vec![0.0; s.m * s.m * de])
            .collect();
        for (s_idx, s) in cache.samples.iter().enumerate() {
            let m = s.m;
            let z1 = &s.z1e[l];
            let xhat = &s.xhat_e[l];
            let de_next = &de_buf[s_idx];
            let du = &mut du_all[s_idx];
            let mut sum_de = vec![0.0; de];
            let mut a1 = vec![0.0; de];
            let mut da1 = vec![0.0; de];
            let mut dz1 = vec![0.0; de];
            let mut u_in = vec![0.0; de];
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let o = eidx(i, j, m, de);
                    let dz2 = &de_next[o..o + de];
                    for c in 0..de {
                        sum_de[c] += dz2[c];
                        a1[c] = z1[o + c].max(0.0);
                        u_in[c] = gamma_e[c] * xhat[o + c] + beta_e[c];
                    }
                    outer_acc(&mut grads[spans.mlp_e_w2.range()], dz2, &a1);
                    da1.fill(0.0);
                    matvec_t_acc(&w2, de, de, dz2, &mut da1);
                    for c in 0..de {
                        dz1[c] = if z1[o + c] > 0.0 { da1[c] } else { 0.0 };
                        grads[spans.mlp_e_b1.offset + c] += dz1[c];
                    }
                    outer_acc(&mut grads[spans.mlp_e_w1.range()], &dz1, &u_in);
                    matvec_t_acc(&w1, de, de, &dz1, &mut du[o..o + de]);
                }
            }
            // b2 and the timestep projection both receive the per-sample
            // edge sum; the projection weights see the outer product with
            // the sample's timestep features.
            for c in 0..de {
                grads[spans.mlp_e_b2.offset + c] += sum_de[c];
                grads[spans.mlp_t_b.offset + c] += sum_de[c];
            }
            outer_acc(&mut grads[spans.mlp_t_w.range()], &sum_de, &s.tf);
            let _ = td;
        }

        // Batch-wide normalization backward (edge side), feeding dehat.
        let mut s1 = vec![0.0; de];
        let mut s2 = vec![0.0; de];
        for (s_idx, s) in cache.samples.iter().enumerate() {
            let m = s.m;
            let xhat = &s.xhat_e[l];
            let du = &du_all[s_idx];
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let o = eidx(i, j, m, de);
                    for c in 0..de {
                        s1[c] += du[o + c];
                        s2[c] += du[o + c] * xhat[o + c];
                    }
                }
            }
        }
        for c in 0..de {
            grads[spans.bn_e_beta.offset + c] += s1[c];
            grads[spans.bn_e_gamma.offset + c] += s2[c];
        }
        let n_e = n_edges_total as f64;
        for (s_idx, s) in cache.samples.iter().enumerate() {
            let m = s.m;
            let xhat = &s.xhat_e[l];
            let du = &du_all[s_idx];
            let dehat = &mut dehat_all[s_idx];
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let o = eidx(i, j, m, de);
                    for c in 0..de {
                        dehat[o + c] += gamma_e[c]
                            * stats.e_inv_std[c]
                            * (du[o + c] - s1[c] / n_e - xhat[o + c] * s2[c] / n_e);
                    }
                }
            }
        }

        // ehat_ij = P e_ij + Q h_i + R h_j.
        let p = params.get(spans.p).to_vec();
        let q = params.get(spans.q).to_vec();
        let r = params.get(spans.r).to_vec();
        for (s_idx, s) in cache.samples.iter().enumerate() {
            let m = s.m;
            let e_l = &s.e[l];
            let h = &s.h[l];
            let dehat = &dehat_all[s_idx];
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let o = eidx(i, j, m, de);
                    let dg = &dehat[o..o + de];
                    outer_acc(&mut grads[spans.p.range()], dg, &e_l[o..o + de]);
                    matvec_t_acc(&p, de, de, dg, &mut de_buf[s_idx][o..o + de]);
                    outer_acc(&mut grads[spans.q.range()], dg, &h[i * d..(i + 1) * d]);
                    matvec_t_acc(&q, de, d, dg, &mut dh[s_idx][i * d..(i + 1) * d]);
                    outer_acc(&mut grads[spans.r.range()], dg, &h[j * d..(j + 1) * d]);
                    matvec_t_acc(&r, de, d, dg, &mut dh[s_idx][j * d..(j + 1) * d]);
                }
            }
        }
    }

    // Input projections: e0_ij = win * x[i,j] + bin; h0_i = Emb[id_i].
    for (s_idx, s) in cache.samples.iter().enumerate() {
        let m = s.m;
        let de0 = &de_buf[s_idx];
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let o = eidx(i, j, m, de);
                let x = s.x.get(i, j);
                for c in 0..de {
                    grads[layout.edge_in_w.offset + c] += de0[o + c] * x;
                    grads[layout.edge_in_b.offset + c] += de0[o + c];
                }
            }
        }
        for (i, &id) in s.ids.iter().enumerate() {
            let dst = layout.emb.offset + id * d;
            for c in 0..d {
                grads[dst + c] += dh[s_idx][i * d + c];
            }
        }
    }

    Ok(grads)
}
