//! Chemical-structure-prediction head: an auxiliary multi-label objective
//! that ties hub-ingredient embeddings to the fingerprints of their
//! compound neighbors.
//!
//! The per-ingredient target is the bitwise OR over the fingerprints of
//! all compound neighbors; the loss is the negated Bernoulli
//! log-likelihood summed over all bits, with predictions clamped away
//! from 0 and 1 before the logs.

use std::collections::BTreeMap;

use crate::corpus::Fingerprint;
use crate::graph::{hub_partition, HeteroGraph, NodeKind};
use crate::model::sigmoid;
use crate::{Error, Result};

/// Clamp bound for predicted bit probabilities.
pub const PROB_CLAMP: f64 = 1e-7;

/// OR-aggregated fingerprint target for one hub ingredient.
pub fn aggregate_target_fingerprint(
    g: &HeteroGraph,
    fingerprints: &BTreeMap<String, Fingerprint>,
    hub_id: usize,
) -> Result<Fingerprint> {
    let node = g
        .nodes
        .get(hub_id)
        .ok_or_else(|| Error::invalid(format!("node id {hub_id} out of range")))?;
    if node.kind != NodeKind::HubIngredient {
        return Err(Error::invalid(format!(
            "node `{}` is not a hub ingredient",
            node.name
        )));
    }
    let mut out: Option<Fingerprint> = None;
    for &(j, _) in g.neighbors(hub_id) {
        if !g.nodes[j].kind.is_compound() {
            continue;
        }
        if let Some(fp) = fingerprints.get(&g.nodes[j].name) {
            match &mut out {
                Some(acc) => acc.or_with(fp),
                None => out = Some(fp.clone()),
            }
        }
    }
    out.ok_or_else(|| {
        Error::invalid(format!(
            "hub `{}` has no compound neighbor with a fingerprint",
            node.name
        ))
    })
}

/// Targets for every hub that has at least one fingerprinted compound
/// neighbor; returns the map plus the number of hubs skipped for lack of
/// fingerprint coverage.
pub fn build_csp_targets(
    g: &HeteroGraph,
    fingerprints: &BTreeMap<String, Fingerprint>,
) -> (BTreeMap<usize, Fingerprint>, usize) {
    let (hubs, _) = hub_partition(g);
    let mut targets = BTreeMap::new();
    let mut skipped = 0;
    for hub in hubs {
        match aggregate_target_fingerprint(g, fingerprints, hub) {
            Ok(fp) => {
                targets.insert(hub, fp);
            }
            Err(_) => skipped += 1,
        }
    }
    (targets, skipped)
}

/// Supervision attached to a training run.
#[derive(Clone, Debug)]
pub struct CspObjective {
    pub targets: BTreeMap<usize, Fingerprint>,
    /// Mixing weight of the auxiliary term in the total loss.
    pub lambda: f64,
}

/// `-sum_d [y_d ln f_d + (1-y_d) ln(1-f_d)]` with
/// `f = clamp(sigmoid(W emb + b))`.
pub fn csp_loss(embedding: &[f64], w: &[f64], b: &[f64], target: &Fingerprint) -> f64 {
    let d = embedding.len();
    let mut loss = 0.0;
    for (bit, &y) in target.bits().iter().enumerate() {
        let mut z = b[bit];
        let row = &w[bit * d..(bit + 1) * d];
        for c in 0..d {
            z += row[c] * embedding[c];
        }
        let f = sigmoid(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= if y == 1 { f.ln() } else { (1.0 - f).ln() };
    }
    loss
}

/// Loss plus exact gradients, scaled by `scale` and accumulated into the
/// provided buffers. The clamp is part of the loss, so a clamped bit
/// contributes zero gradient.
#[allow(clippy::too_many_arguments)]
pub fn csp_loss_and_grads(
    embedding: &[f64],
    w: &[f64],
    b: &[f64],
    target: &Fingerprint,
    scale: f64,
    d_emb: &mut [f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> f64 {
    let d = embedding.len();
    let mut loss = 0.0;
    for (bit, &y) in target.bits().iter().enumerate() {
        let mut z = b[bit];
        let row = &w[bit * d..(bit + 1) * d];
        for c in 0..d {
            z += row[c] * embedding[c];
        }
        let f_raw = sigmoid(z);
        let f = f_raw.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= if y == 1 { f.ln() } else { (1.0 - f).ln() };
        if f_raw < PROB_CLAMP || f_raw > 1.0 - PROB_CLAMP {
            continue;
        }
        // d loss / dz = f - y on the unclamped branch.
        let dz = scale * (f_raw - y as f64);
        db[bit] += dz;
        let drow = &mut dw[bit * d..(bit + 1) * d];
        for c in 0..d {
            drow[c] += dz * embedding[c];
            d_emb[c] += dz * row[c];
        }
    }
    loss
}
