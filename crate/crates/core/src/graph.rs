//! Heterogeneous food–compound graph: NPMI edge scoring, graph assembly,
//! and hub/non-hub partitioning.
//!
//! Ingredient–ingredient edges carry co-occurrence strength: the NPMI of the
//! pair, rescaled from `[-1, 1]` into `[0, 1]` by `(npmi + 1) / 2` after
//! thresholding. Ingredient–compound edges are binary presence and carry
//! weight `1.0`. Compound–compound edges do not exist.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::corpus::CorpusStats;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    HubIngredient,
    NonHubIngredient,
    FlavorCompound,
    DrugCompound,
}

impl NodeKind {
    pub fn is_ingredient(self) -> bool {
        matches!(self, NodeKind::HubIngredient | NodeKind::NonHubIngredient)
    }

    pub fn is_compound(self) -> bool {
        !self.is_ingredient()
    }

    pub fn token(self) -> &'static str {
        match self {
            NodeKind::HubIngredient => "hub_ingredient",
            NodeKind::NonHubIngredient => "non_hub_ingredient",
            NodeKind::FlavorCompound => "flavor_compound",
            NodeKind::DrugCompound => "drug_compound",
        }
    }

    pub fn from_token(s: &str) -> Result<Self> {
        match s {
            "hub_ingredient" => Ok(NodeKind::HubIngredient),
            "non_hub_ingredient" => Ok(NodeKind::NonHubIngredient),
            "flavor_compound" => Ok(NodeKind::FlavorCompound),
            "drug_compound" => Ok(NodeKind::DrugCompound),
            other => Err(Error::invalid(format!("unknown node kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: usize,
    pub name: String,
    pub kind: NodeKind,
    pub category: Option<String>,
}

/// Undirected weighted edge, stored with `a < b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GraphMeta {
    /// Duplicate association rows dropped during construction.
    pub dedup_warnings: usize,
    pub npmi_threshold: f64,
    pub min_cooccur: u64,
}

#[derive(Clone, Debug)]
pub struct HeteroGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub meta: GraphMeta,
    adjacency: Vec<Vec<(usize, f64)>>,
    ii_index: HashMap<(u32, u32), f64>,
    name_index: HashMap<String, usize>,
}

impl PartialEq for HeteroGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.meta == other.meta
    }
}

/// Normalized pointwise mutual information of a co-occurrence pair.
///
/// `npmi = pmi / (-ln p_ij)` with `p_ij = count_ij / n`, `p_i = count_i / n`,
/// `p_j = count_j / n`, computed in natural log. Defined as `-1` in the
/// `count_ij = 0` limit and exactly `1` when `count_ij = count_i = count_j`.
pub fn compute_npmi(count_ij: u64, count_i: u64, count_j: u64, n_recipes: u64) -> Result<f64> {
    if n_recipes == 0 {
        return Err(Error::invalid("n_recipes must be positive"));
    }
    if count_i == 0 || count_j == 0 {
        return Err(Error::invalid("marginal counts must be at least 1"));
    }
    if count_ij > count_i || count_ij > count_j {
        return Err(Error::invalid(format!(
            "inconsistent counts: count_ij={count_ij} exceeds a marginal ({count_i}, {count_j})"
        )));
    }
    if count_i > n_recipes || count_j > n_recipes {
        return Err(Error::invalid(
            "marginal count exceeds total number of recipes",
        ));
    }
    if count_ij == 0 {
        return Ok(-1.0);
    }
    if count_ij == count_i && count_ij == count_j {
        return Ok(1.0);
    }
    let (cij, ci, cj, n) = (
        count_ij as f64,
        count_i as f64,
        count_j as f64,
        n_recipes as f64,
    );
    // Grouped so the expression is symmetric in (i, j) bit-for-bit.
    let pmi = (cij.ln() + n.ln()) - (ci.ln() + cj.ln());
    let denom = n.ln() - cij.ln();
    Ok(pmi / denom)
}

/// Builds the heterogeneous graph from corpus statistics plus flavor/drug
/// association tables.
///
/// Ingredient ids follow the corpus interning order; compound ids are
/// appended in first-appearance order (flavor table first). `categories`
/// may be empty; entries for unknown ingredients are ignored.
pub fn build_hetero_graph(
    corpus: &CorpusStats,
    flavor_assoc: &[(String, String)],
    drug_assoc: &[(String, String)],
    categories: &BTreeMap<String, String>,
    npmi_threshold: f64,
    min_cooccur: u64,
) -> Result<HeteroGraph> {
    if corpus.n_recipes == 0 || corpus.n_ingredients() == 0 {
        return Err(Error::invalid("empty corpus"));
    }
    if !(-1.0..=1.0).contains(&npmi_threshold) {
        return Err(Error::invalid("npmi threshold must lie in [-1, 1]"));
    }

    let n_ing = corpus.n_ingredients();
    let mut nodes: Vec<Node> = (0..n_ing)
        .map(|id| {
            let name = corpus.name(id).to_string();
            let category = categories.get(&name).cloned();
            Node {
                id,
                name,
                kind: NodeKind::NonHubIngredient,
                category,
            }
        })
        .collect();

    let mut name_index: HashMap<String, usize> = nodes
        .iter()
        .map(|n| (n.name.clone(), n.id))
        .collect();

    // Intern compounds and collect deduplicated ingredient-compound links.
    let mut dedup_warnings = 0usize;
    let mut ic_links: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut compound_kind: HashMap<usize, NodeKind> = HashMap::new();
    for (rows, kind) in [
        (flavor_assoc, NodeKind::FlavorCompound),
        (drug_assoc, NodeKind::DrugCompound),
    ] {
        for (ing, comp) in rows {
            let ing_id = *name_index.get(ing).ok_or_else(|| {
                Error::invalid(format!("association references unknown ingredient `{ing}`"))
            })?;
            if nodes[ing_id].kind.is_compound() {
                return Err(Error::invalid(format!(
                    "`{ing}` is a compound, not an ingredient"
                )));
            }
            let comp_id = match name_index.get(comp) {
                Some(&id) if id < n_ing => {
                    return Err(Error::invalid(format!(
                        "compound name `{comp}` collides with an ingredient name"
                    )));
                }
                Some(&id) => {
                    if compound_kind[&id] != kind {
                        return Err(Error::invalid(format!(
                            "compound `{comp}` appears in both flavor and drug tables"
                        )));
                    }
                    id
                }
                None => {
                    let id = nodes.len();
                    nodes.push(Node {
                        id,
                        name: comp.clone(),
                        kind,
                        category: None,
                    });
                    name_index.insert(comp.clone(), id);
                    compound_kind.insert(id, kind);
                    id
                }
            };
            if !ic_links.insert((ing_id, comp_id)) {
                dedup_warnings += 1;
            }
        }
    }

    // Ingredient-ingredient edges from thresholded NPMI.
    let mut edges = Vec::new();
    for ((a, b), count) in corpus.iter_pairs() {
        if count < min_cooccur {
            continue;
        }
        let npmi = compute_npmi(count, corpus.count(a), corpus.count(b), corpus.n_recipes)?;
        if npmi < npmi_threshold {
            continue;
        }
        edges.push(Edge {
            a,
            b,
            weight: (npmi + 1.0) / 2.0,
        });
    }

    // Ingredient-compound edges carry fixed weight 1.0; the link set is
    // ordered (ingredient, compound) and compounds always have larger ids.
    for &(ing, comp) in &ic_links {
        nodes[ing].kind = NodeKind::HubIngredient;
        edges.push(Edge {
            a: ing,
            b: comp,
            weight: 1.0,
        });
    }

    let meta = GraphMeta {
        dedup_warnings,
        npmi_threshold,
        min_cooccur,
    };
    HeteroGraph::assemble(nodes, edges, meta)
}

impl HeteroGraph {
    /// Builds adjacency/lookup indexes and checks the structural invariants.
    pub fn assemble(nodes: Vec<Node>, edges: Vec<Edge>, meta: GraphMeta) -> Result<HeteroGraph> {
        let n = nodes.len();
        let mut name_index = HashMap::with_capacity(n);
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::invalid(format!(
                    "node ids must be contiguous: found {} at position {i}",
                    node.id
                )));
            }
            if name_index.insert(node.name.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate node name `{}`", node.name)));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut ii_index = HashMap::new();
        let mut seen = BTreeSet::new();
        for e in &edges {
            if e.a >= n || e.b >= n {
                return Err(Error::invalid("edge endpoint out of range"));
            }
            if e.a >= e.b {
                return Err(Error::invalid(format!(
                    "edges must be stored with a < b, found ({}, {})",
                    e.a, e.b
                )));
            }
            if !(0.0..=1.0).contains(&e.weight) {
                return Err(Error::invalid(format!(
                    "edge weight {} outside [0, 1]",
                    e.weight
                )));
            }
            if !seen.insert((e.a, e.b)) {
                return Err(Error::invalid(format!("duplicate edge ({}, {})", e.a, e.b)));
            }
            if nodes[e.a].kind.is_compound() && nodes[e.b].kind.is_compound() {
                return Err(Error::invalid(format!(
                    "compound-compound edge ({}, {}) is not allowed",
                    e.a, e.b
                )));
            }
            adjacency[e.a].push((e.b, e.weight));
            adjacency[e.b].push((e.a, e.weight));
            if nodes[e.a].kind.is_ingredient() && nodes[e.b].kind.is_ingredient() {
                ii_index.insert((e.a as u32, e.b as u32), e.weight);
            }
        }
        let graph = HeteroGraph {
            nodes,
            edges,
            meta,
            adjacency,
            ii_index,
            name_index,
        };
        graph.check_hub_kinds()?;
        Ok(graph)
    }

    fn check_hub_kinds(&self) -> Result<()> {
        for node in &self.nodes {
            if !node.kind.is_ingredient() {
                continue;
            }
            let has_compound = self.adjacency[node.id]
                .iter()
                .any(|&(j, _)| self.nodes[j].kind.is_compound());
            let expected = if has_compound {
                NodeKind::HubIngredient
            } else {
                NodeKind::NonHubIngredient
            };
            if node.kind != expected {
                return Err(Error::invalid(format!(
                    "node `{}` marked {:?} but adjacency implies {:?}",
                    node.name, node.kind, expected
                )));
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_by_name(&self, name: &str) -> Option<&Node> {
        self.name_index.get(name).map(|&i| &self.nodes[i])
    }

    pub fn neighbors(&self, id: usize) -> &[(usize, f64)] {
        &self.adjacency[id]
    }

    pub fn ingredient_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.kind.is_ingredient())
            .map(|n| n.id)
    }

    /// Weight of the ingredient-ingredient edge, or 0.0 when absent.
    pub fn ii_weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let key = (i.min(j) as u32, i.max(j) as u32);
        self.ii_index.get(&key).copied().unwrap_or(0.0)
    }

    /// Number of compound neighbors of a node.
    pub fn compound_degree(&self, id: usize) -> usize {
        self.adjacency[id]
            .iter()
            .filter(|&&(j, _)| self.nodes[j].kind.is_compound())
            .count()
    }
}

/// Splits the ingredient nodes into (hub, non-hub) id sets.
///
/// An ingredient is a hub iff it has at least one compound neighbor. The two
/// sets partition the ingredient nodes exactly.
pub fn hub_partition(g: &HeteroGraph) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let mut hubs = BTreeSet::new();
    let mut non_hubs = BTreeSet::new();
    for id in g.ingredient_ids() {
        if g.compound_degree(id) > 0 {
            hubs.insert(id);
        } else {
            non_hubs.insert(id);
        }
    }
    (hubs, non_hubs)
}
