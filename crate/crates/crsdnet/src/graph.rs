//! User-user clique graph: co-reviewers of a product form a clique.
//!
//! Parallel edges from different shared products are merged, keeping the
//! union of shared products and the minimum time gap between the two users'
//! reviews of any shared product. Sparsification keeps only bursty edges
//! (co-reviews within T days), trusted edges (predicted same-class
//! probability near 0 or 1), or the oracle's k1/k2 per-class neighbor
//! sample.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::{ClassLabel, Dataset};
use crate::error::{CrsdError, Result};

/// Undirected edge between user indices `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Product indices both endpoints reviewed.
    pub shared_products: BTreeSet<usize>,
    /// Min over shared products of the day gap between the two users' reviews.
    pub min_gap_days: i64,
    /// Predicted probability that both endpoints share a class.
    pub prob: Option<f64>,
}

/// Undirected user graph over the dataset's dense user indices.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGraph {
    n_nodes: usize,
    edges: Vec<Edge>,
}

/// Sparsification parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparsifyParams {
    pub k1: usize,
    pub k2: usize,
    pub lo: f64,
    pub hi: f64,
    /// Bursty window in days; `None` disables the bursty filter.
    pub t_days: Option<i64>,
}

impl Default for SparsifyParams {
    fn default() -> Self {
        SparsifyParams {
            k1: 5,
            k2: 5,
            lo: 0.05,
            hi: 0.95,
            t_days: Some(7),
        }
    }
}

impl UserGraph {
    pub fn new(n_nodes: usize, mut edges: Vec<Edge>) -> Self {
        edges.sort_by_key(|e| (e.i, e.j));
        UserGraph { n_nodes, edges }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn set_edge_probs(&mut self, probs: &[f64]) {
        assert_eq!(probs.len(), self.edges.len());
        for (e, &p) in self.edges.iter_mut().zip(probs) {
            e.prob = Some(p);
        }
    }

    /// Adjacency as (neighbor, edge index) lists.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for (idx, e) in self.edges.iter().enumerate() {
            adj[e.i].push((e.j, idx));
            adj[e.j].push((e.i, idx));
        }
        adj
    }

    /// Audit dump: `i<TAB>j<TAB>p_ij<TAB>min_gap_days`.
    pub fn write_edge_list(&self, w: &mut impl Write) -> Result<()> {
        for e in &self.edges {
            let p = e.prob.map(|p| format!("{p}")).unwrap_or_else(|| "-".into());
            writeln!(w, "{}\t{}\t{}\t{}", e.i, e.j, p, e.min_gap_days)?;
        }
        Ok(())
    }
}

/// Build the clique graph: for every product, connect all pairs of its
/// distinct reviewers.
pub fn build_clique_graph(ds: &Dataset) -> UserGraph {
    let mut map: HashMap<(usize, usize), Edge> = HashMap::new();
    for p in 0..ds.n_products() {
        // distinct reviewers with their review dates for this product
        let mut by_user: HashMap<usize, Vec<chrono::NaiveDate>> = HashMap::new();
        for &ri in ds.product_reviews(p) {
            let r = &ds.reviews()[ri];
            let u = ds.user_index(&r.user_id).unwrap();
            by_user.entry(u).or_default().push(r.date);
        }
        let users: Vec<(usize, &Vec<chrono::NaiveDate>)> =
            by_user.iter().map(|(&u, d)| (u, d)).collect();
        for a in 0..users.len() {
            for b in (a + 1)..users.len() {
                let (ua, da) = users[a];
                let (ub, db) = users[b];
                let (i, j) = if ua < ub { (ua, ub) } else { (ub, ua) };
                let gap = da
                    .iter()
                    .flat_map(|x| db.iter().map(move |y| (*x - *y).num_days().abs()))
                    .min()
                    .unwrap();
                let e = map.entry((i, j)).or_insert_with(|| Edge {
                    i,
                    j,
                    shared_products: BTreeSet::new(),
                    min_gap_days: i64::MAX,
                    prob: None,
                });
                e.shared_products.insert(p);
                e.min_gap_days = e.min_gap_days.min(gap);
            }
        }
    }
    UserGraph::new(ds.n_users(), map.into_values().collect())
}

/// Keep only edges whose closest pair of co-reviews is within `t_days`.
/// `None` keeps the graph unchanged.
pub fn bursty_filter(g: &UserGraph, t_days: Option<i64>) -> UserGraph {
    match t_days {
        None => g.clone(),
        Some(t) => UserGraph::new(
            g.n_nodes,
            g.edges
                .iter()
                .filter(|e| e.min_gap_days <= t)
                .cloned()
                .collect(),
        ),
    }
}

/// Ground-truth-guided sparsification: each node keeps up to `k1` uniformly
/// sampled same-class neighbors and `k2` opposite-class neighbors; the
/// result is the union of the selected edges.
pub fn oracle_sparsify(
    g: &UserGraph,
    labels: &[ClassLabel],
    k1: usize,
    k2: usize,
    seed: u64,
) -> UserGraph {
    assert_eq!(labels.len(), g.n_nodes);
    let adj = g.adjacency();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; g.edges.len()];
    for i in 0..g.n_nodes {
        let mut same: Vec<usize> = Vec::new();
        let mut diff: Vec<usize> = Vec::new();
        for &(nb, eidx) in &adj[i] {
            if labels[nb] == labels[i] {
                same.push(eidx);
            } else {
                diff.push(eidx);
            }
        }
        same.shuffle(&mut rng);
        diff.shuffle(&mut rng);
        for &e in same.iter().take(k1) {
            keep[e] = true;
        }
        for &e in diff.iter().take(k2) {
            keep[e] = true;
        }
    }
    UserGraph::new(
        g.n_nodes,
        g.edges
            .iter()
            .enumerate()
            .filter(|(idx, _)| keep[*idx])
            .map(|(_, e)| e.clone())
            .collect(),
    )
}

/// Keep only trusted edges: predicted same-class probability in
/// [0, lo] or [hi, 1]. Every edge must carry a probability.
pub fn trusted_sparsify(g: &UserGraph, lo: f64, hi: f64) -> Result<UserGraph> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(CrsdError::InvalidParam(format!(
            "trusted bands require 0 <= lo < hi <= 1, got lo={lo} hi={hi}"
        )));
    }
    let mut kept = Vec::new();
    for e in &g.edges {
        let p = e.prob.ok_or(CrsdError::MissingEdgeProb(e.i, e.j))?;
        if p <= lo || p >= hi {
            kept.push(e.clone());
        }
    }
    Ok(UserGraph::new(g.n_nodes, kept))
}
