//! Balanced subgraph sampling and dataset assembly.
//!
//! A subgraph holds `m` ingredient nodes — exactly `ceil(m/2)` hubs and
//! `floor(m/2)` non-hubs, drawn uniformly without replacement within each
//! class — plus the symmetric `m x m` matrix of ingredient-ingredient edge
//! scores, which is the clean state the diffusion process corrupts.
//! Subgraphs may overlap across a dataset; nodes never repeat within one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::graph::{hub_partition, HeteroGraph};
use crate::seed;
use crate::{Error, Result, SymMat};

#[derive(Clone, Debug, PartialEq)]
pub struct Subgraph {
    pub node_ids: Vec<usize>,
    pub x0: SymMat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubgraphDataset {
    pub m: usize,
    pub train: Vec<Subgraph>,
    pub validation: Vec<Subgraph>,
    pub seed: u64,
}

fn sample_from_pools(
    g: &HeteroGraph,
    hubs: &[usize],
    non_hubs: &[usize],
    m: usize,
    rng: &mut impl Rng,
) -> Result<Subgraph> {
    if m < 2 {
        return Err(Error::invalid("subgraph size m must be at least 2"));
    }
    let n_hub = m.div_ceil(2);
    let n_non = m / 2;
    if hubs.len() < n_hub {
        return Err(Error::invalid(format!(
            "insufficient hub ingredients: need {n_hub}, graph has {}",
            hubs.len()
        )));
    }
    if non_hubs.len() < n_non {
        return Err(Error::invalid(format!(
            "insufficient non-hub ingredients: need {n_non}, graph has {}",
            non_hubs.len()
        )));
    }
    let mut node_ids: Vec<usize> = rand::seq::index::sample(rng, hubs.len(), n_hub)
        .iter()
        .map(|i| hubs[i])
        .collect();
    node_ids.extend(
        rand::seq::index::sample(rng, non_hubs.len(), n_non)
            .iter()
            .map(|i| non_hubs[i]),
    );
    let x0 = SymMat::from_fn(m, |i, j| g.ii_weight(node_ids[i], node_ids[j]));
    Ok(Subgraph { node_ids, x0 })
}

/// Samples one balanced subgraph. Odd `m` gives the extra slot to hubs.
pub fn sample_balanced_subgraph(
    g: &HeteroGraph,
    m: usize,
    rng: &mut impl Rng,
) -> Result<Subgraph> {
    let (hubs, non_hubs) = hub_partition(g);
    let hubs: Vec<usize> = hubs.into_iter().collect();
    let non_hubs: Vec<usize> = non_hubs.into_iter().collect();
    sample_from_pools(g, &hubs, &non_hubs, m, rng)
}

/// Builds a train/validation dataset of balanced subgraphs.
///
/// Subgraph `k` (train indices first, then validation) is drawn from a
/// generator seeded with `mix(seed, k)`, so the result does not depend on
/// the number of worker threads.
pub fn build_dataset(
    g: &HeteroGraph,
    m: usize,
    n_train: usize,
    n_val: usize,
    dataset_seed: u64,
) -> Result<SubgraphDataset> {
    if n_train == 0 || n_val == 0 {
        return Err(Error::invalid("dataset split sizes must be at least 1"));
    }
    let (hubs, non_hubs) = hub_partition(g);
    let hubs: Vec<usize> = hubs.into_iter().collect();
    let non_hubs: Vec<usize> = non_hubs.into_iter().collect();

    let total = n_train + n_val;
    let mut all: Vec<Subgraph> = (0..total)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed::mix(dataset_seed, k as u64));
            sample_from_pools(g, &hubs, &non_hubs, m, &mut rng)
        })
        .collect::<Result<_>>()?;

    let validation = all.split_off(n_train);
    Ok(SubgraphDataset {
        m,
        train: all,
        validation,
        seed: dataset_seed,
    })
}
