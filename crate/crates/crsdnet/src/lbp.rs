//! Pairwise MRF over the user graph and sum-product loopy belief
//! propagation, plus an exact enumeration oracle for small graphs.
//!
//! The joint distribution factorizes into per-node potentials
//! phi_i = (a_i, 1 - a_i) and per-edge potentials psi_ij that put mass
//! p_ij on agreeing classes. Messages use a synchronous schedule with
//! damping; products are accumulated in log space so high-degree nodes
//! cannot underflow. Isolated nodes keep their node potential as belief.

use serde::{Deserialize, Serialize};

use crate::data_model::ClassLabel;
use crate::error::{CrsdError, Result};
use crate::graph::UserGraph;
use crate::potentials::{EdgeProbs, NodePotentials, EPS};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pairwise MRF: graph topology plus node and edge parameters.
#[derive(Debug, Clone)]
pub struct Pmrf {
    pub graph: UserGraph,
    pub nodes: NodePotentials,
    pub edges: EdgeProbs,
}

impl Pmrf {
    pub fn new(graph: UserGraph, nodes: NodePotentials, edges: EdgeProbs) -> Result<Self> {
        if nodes.a.len() != graph.n_nodes() {
            return Err(CrsdError::Dimension {
                expected: graph.n_nodes(),
                got: nodes.a.len(),
            });
        }
        if edges.0.len() != graph.n_edges() {
            return Err(CrsdError::Dimension {
                expected: graph.n_edges(),
                got: edges.0.len(),
            });
        }
        let ok = |p: f64| (EPS..=1.0 - EPS).contains(&p);
        if let Some(a) = nodes.a.iter().find(|&&a| !ok(a)) {
            return Err(CrsdError::InvalidParam(format!(
                "node potential {a} outside [{EPS}, {}]",
                1.0 - EPS
            )));
        }
        if let Some(p) = edges.0.iter().find(|&&p| !ok(p)) {
            return Err(CrsdError::InvalidParam(format!(
                "edge probability {p} outside [{EPS}, {}]",
                1.0 - EPS
            )));
        }
        Ok(Pmrf {
            graph,
            nodes,
            edges,
        })
    }
}

/// Message initialization rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum MessageInit {
    Uniform,
    /// Uniform plus a small random tilt per directed message; breaks the
    /// global class-swap symmetry when no node is informative.
    RandomPerturb {
        magnitude: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LbpParams {
    pub max_iters: usize,
    /// Damping weight on the previous message.
    pub damping: f64,
    /// Convergence threshold on the max absolute message change.
    pub tol: f64,
    pub init: MessageInit,
}

impl Default for LbpParams {
    fn default() -> Self {
        LbpParams {
            max_iters: 30,
            damping: 0.1,
            tol: 1e-4,
            init: MessageInit::Uniform,
        }
    }
}

/// Normalized per-node marginal estimates (b_spam, b_benign).
#[derive(Debug, Clone, PartialEq)]
pub struct Beliefs(pub Vec<[f64; 2]>);

#[derive(Debug, Clone)]
pub struct LbpOutcome {
    pub beliefs: Beliefs,
    pub iterations: usize,
    pub converged: bool,
    /// (iteration, max message delta) per iteration.
    pub trace: Vec<(usize, f64)>,
}

/// Run synchronous sum-product LBP.
pub fn run_lbp(m: &Pmrf, params: &LbpParams) -> LbpOutcome {
    let n = m.graph.n_nodes();
    let edges = m.graph.edges();
    let n_edges = edges.len();
    let adj = m.graph.adjacency();

    // directed message storage: 2*e is i->j, 2*e+1 is j->i
    let mut msgs: Vec<[f64; 2]> = vec![[0.5, 0.5]; 2 * n_edges];
    if let MessageInit::RandomPerturb { magnitude, seed } = params.init {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for msg in &mut msgs {
            let tilt = rng.gen_range(-magnitude..=magnitude);
            let s = (0.5 + tilt).clamp(EPS, 1.0 - EPS);
            *msg = [s, 1.0 - s];
        }
    }

    let phi = |i: usize| [m.nodes.a[i], 1.0 - m.nodes.a[i]];
    let psi = |e: usize| {
        let p = m.edges.0[e];
        // [vi][vj], index 0 = spam
        [[p, 1.0 - p], [1.0 - p, p]]
    };

    let mut next = msgs.clone();
    let mut trace = Vec::with_capacity(params.max_iters);
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..params.max_iters {
        // log-sum of incoming messages per node (both states)
        let mut node_sum: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let p = phi(i);
                [p[0].ln(), p[1].ln()]
            })
            .collect();
        for (e, edge) in edges.iter().enumerate() {
            let m_ij = msgs[2 * e];
            let m_ji = msgs[2 * e + 1];
            for v in 0..2 {
                node_sum[edge.j][v] += m_ij[v].ln();
                node_sum[edge.i][v] += m_ji[v].ln();
            }
        }

        let mut max_delta: f64 = 0.0;
        for (e, edge) in edges.iter().enumerate() {
            let psi_e = psi(e);
            for (dir, (src, _dst)) in [(0, (edge.i, edge.j)), (1, (edge.j, edge.i))] {
                let incoming = if dir == 0 {
                    msgs[2 * e + 1]
                } else {
                    msgs[2 * e]
                };
                // cavity: all incoming to src except from dst
                let l = [
                    node_sum[src][0] - incoming[0].ln(),
                    node_sum[src][1] - incoming[1].ln(),
                ];
                let shift = l[0].max(l[1]);
                let w = [(l[0] - shift).exp(), (l[1] - shift).exp()];
                let mut out = [0.0f64; 2];
                for vj in 0..2 {
                    out[vj] = w[0] * psi_e[0][vj] + w[1] * psi_e[1][vj];
                }
                let z = out[0] + out[1];
                out = [out[0] / z, out[1] / z];
                let old = msgs[2 * e + dir];
                let damped = [
                    params.damping * old[0] + (1.0 - params.damping) * out[0],
                    params.damping * old[1] + (1.0 - params.damping) * out[1],
                ];
                max_delta = max_delta
                    .max((damped[0] - old[0]).abs())
                    .max((damped[1] - old[1]).abs());
                next[2 * e + dir] = damped;
            }
        }

        std::mem::swap(&mut msgs, &mut next);
        iterations = it + 1;
        trace.push((iterations, max_delta));
        if max_delta < params.tol {
            converged = true;
            break;
        }
    }

    // beliefs: phi times all incoming messages, normalized in log space
    let mut logs: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let p = phi(i);
            [p[0].ln(), p[1].ln()]
        })
        .collect();
    for (e, edge) in edges.iter().enumerate() {
        for v in 0..2 {
            logs[edge.j][v] += msgs[2 * e][v].ln();
            logs[edge.i][v] += msgs[2 * e + 1][v].ln();
        }
    }
    let mut beliefs = Vec::with_capacity(n);
    for (i, l) in logs.iter().enumerate() {
        if adj[i].is_empty() {
            beliefs.push([m.nodes.a[i], 1.0 - m.nodes.a[i]]);
            continue;
        }
        let shift = l[0].max(l[1]);
        let w = [(l[0] - shift).exp(), (l[1] - shift).exp()];
        let z = w[0] + w[1];
        beliefs.push([w[0] / z, w[1] / z]);
    }

    LbpOutcome {
        beliefs: Beliefs(beliefs),
        iterations,
        converged,
        trace,
    }
}

/// Exact marginals by enumerating all 2^|V| assignments. Limited to 20 nodes.
pub fn brute_force_marginals(m: &Pmrf) -> Result<Beliefs> {
    let n = m.graph.n_nodes();
    if n > 20 {
        return Err(CrsdError::GraphTooLarge(n));
    }
    let edges = m.graph.edges();
    let mut spam_mass = vec![0.0f64; n];
    let mut z = 0.0f64;
    for assign in 0u32..(1u32 << n) {
        // bit set = spammer
        let mut w = 1.0f64;
        for (i, &a) in m.nodes.a.iter().enumerate() {
            w *= if assign >> i & 1 == 1 { a } else { 1.0 - a };
        }
        for (e, edge) in edges.iter().enumerate() {
            let same = (assign >> edge.i & 1) == (assign >> edge.j & 1);
            let p = m.edges.0[e];
            w *= if same { p } else { 1.0 - p };
        }
        z += w;
        for (i, mass) in spam_mass.iter_mut().enumerate() {
            if assign >> i & 1 == 1 {
                *mass += w;
            }
        }
    }
    Ok(Beliefs(
        spam_mass.iter().map(|&s| [s / z, 1.0 - s / z]).collect(),
    ))
}

/// Threshold beliefs into labels and produce the spam-belief ranking.
/// Spammer iff b_spam > tau (strict); ranking ties break by node index.
pub fn classify(b: &Beliefs, tau: f64) -> (Vec<ClassLabel>, Vec<usize>) {
    let labels =
        b.0.iter()
            .map(|&[s, _]| {
                if s > tau {
                    ClassLabel::Spammer
                } else {
                    ClassLabel::Benign
                }
            })
            .collect();
    let mut ranking: Vec<usize> = (0..b.0.len()).collect();
    ranking.sort_by(|&x, &y| b.0[y][0].partial_cmp(&b.0[x][0]).unwrap().then(x.cmp(&y)));
    (labels, ranking)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use crate::potentials::NodePotentials;
    use approx::assert_abs_diff_eq;
    use std::collections::{BTreeSet, HashMap};

    fn graph(n: usize, pairs: &[(usize, usize)]) -> UserGraph {
        UserGraph::new(
            n,
            pairs
                .iter()
                .map(|&(i, j)| Edge {
                    i,
                    j,
                    shared_products: BTreeSet::new(),
                    min_gap_days: 0,
                    prob: None,
                })
                .collect(),
        )
    }

    fn pmrf(n: usize, pairs: &[(usize, usize)], a: Vec<f64>, p: Vec<f64>) -> Pmrf {
        Pmrf::new(
            graph(n, pairs),
            NodePotentials {
                a,
                clamped: HashMap::new(),
            },
            EdgeProbs(p),
        )
        .unwrap()
    }

    fn exact_params() -> LbpParams {
        LbpParams {
            max_iters: 500,
            damping: 0.0,
            tol: 1e-14,
            init: MessageInit::Uniform,
        }
    }

    #[test]
    fn isolated_node_keeps_potential() {
        let m = pmrf(1, &[], vec![0.7], vec![]);
        let out = run_lbp(&m, &LbpParams::default());
        assert_abs_diff_eq!(out.beliefs.0[0][0], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(out.beliefs.0[0][1], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_pair_stays_uniform() {
        let m = pmrf(2, &[(0, 1)], vec![0.5, 0.5], vec![0.999]);
        let out = run_lbp(&m, &LbpParams::default());
        for b in &out.beliefs.0 {
            assert_abs_diff_eq!(b[0], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_node_exact_marginals_hand_computed() {
        // phi1 = (0.9, 0.1), phi2 = (0.5, 0.5), p = 0.8
        // weights: ss .36, sb .09, bs .01, bb .04; Z = 0.5
        let m = pmrf(2, &[(0, 1)], vec![0.9, 0.5], vec![0.8]);
        let b = brute_force_marginals(&m).unwrap();
        assert_abs_diff_eq!(b.0[0][0], 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(b.0[1][0], 0.74, epsilon = 1e-12);
    }

    #[test]
    fn lbp_exact_on_path_with_clamped_endpoint() {
        let m = pmrf(
            4,
            &[(0, 1), (1, 2), (2, 3)],
            vec![0.999, 0.5, 0.5, 0.5],
            vec![0.9, 0.9, 0.9],
        );
        let lbp = run_lbp(&m, &exact_params());
        let exact = brute_force_marginals(&m).unwrap();
        assert!(lbp.converged);
        for (a, b) in lbp.beliefs.0.iter().zip(&exact.0) {
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-8);
        }
    }

    #[test]
    fn beliefs_normalized() {
        let m = pmrf(
            5,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)],
            vec![0.9, 0.2, 0.6, 0.5, 0.3],
            vec![0.8, 0.3, 0.7, 0.6, 0.9, 0.4],
        );
        let out = run_lbp(&m, &LbpParams::default());
        for b in &out.beliefs.0 {
            assert_abs_diff_eq!(b[0] + b[1], 1.0, epsilon = 1e-9);
            assert!(b[0] >= 0.0 && b[1] >= 0.0);
        }
    }

    #[test]
    fn class_swap_symmetry_exact() {
        let a = vec![0.9, 0.2, 0.6, 0.5];
        let m1 = pmrf(
            4,
            &[(0, 1), (1, 2), (2, 3), (3, 0)],
            a.clone(),
            vec![0.8, 0.3, 0.7, 0.6],
        );
        let m2 = pmrf(
            4,
            &[(0, 1), (1, 2), (2, 3), (3, 0)],
            a.iter().map(|&x| 1.0 - x).collect(),
            vec![0.8, 0.3, 0.7, 0.6],
        );
        let b1 = run_lbp(&m1, &LbpParams::default());
        let b2 = run_lbp(&m2, &LbpParams::default());
        for (x, y) in b1.beliefs.0.iter().zip(&b2.beliefs.0) {
            assert_eq!(x[0], y[1]);
            assert_eq!(x[1], y[0]);
        }
    }

    #[test]
    fn single_round_star_matches_hand_computation() {
        // star: center 0 with leaves 1, 2; all phi = (0.8, 0.2), p = 0.9
        // round 1 from uniform messages: leaf -> center message
        //   m(v0) prop sum_vl phi_l(vl) psi(vl, v0)
        //   m(spam) = 0.8*0.9 + 0.2*0.1 = 0.74; m(benign) = 0.8*0.1 + 0.2*0.9 = 0.26
        // center belief prop phi_0 * m1 * m2:
        //   spam = 0.8 * 0.74^2, benign = 0.2 * 0.26^2
        let m = pmrf(3, &[(0, 1), (0, 2)], vec![0.8, 0.8, 0.8], vec![0.9, 0.9]);
        let params = LbpParams {
            max_iters: 1,
            damping: 0.0,
            tol: 0.0,
            init: MessageInit::Uniform,
        };
        let out = run_lbp(&m, &params);
        let spam = 0.8 * 0.74f64.powi(2);
        let benign = 0.2 * 0.26f64.powi(2);
        assert_abs_diff_eq!(out.beliefs.0[0][0], spam / (spam + benign), epsilon = 1e-12);
    }

    #[test]
    fn monotone_influence_of_edge_strength() {
        let mut last = 0.0;
        for k in 0..11 {
            let p = 0.05 + 0.9 * k as f64 / 10.0;
            let m = pmrf(2, &[(0, 1)], vec![0.999, 0.5], vec![p]);
            let out = run_lbp(&m, &exact_params());
            let b = out.beliefs.0[1][0];
            if k > 0 {
                assert!(b >= last - 1e-12, "p={p} b={b} last={last}");
            }
            last = b;
        }
    }

    #[test]
    fn classify_threshold_and_ranking() {
        let b = Beliefs(vec![[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]]);
        let (labels, ranking) = classify(&b, 0.5);
        assert_eq!(labels[0], ClassLabel::Spammer);
        assert_eq!(labels[1], ClassLabel::Benign);
        assert_eq!(ranking, vec![0, 2, 1]);
        // strict inequality at the boundary
        let b2 = Beliefs(vec![[0.5, 0.5]]);
        let (labels2, _) = classify(&b2, 0.5);
        assert_eq!(labels2[0], ClassLabel::Benign);
    }

    #[test]
    fn brute_force_rejects_large_graphs() {
        let m = Pmrf::new(
            graph(21, &[]),
            NodePotentials {
                a: vec![0.5; 21],
                clamped: HashMap::new(),
            },
            EdgeProbs(vec![]),
        )
        .unwrap();
        assert!(matches!(
            brute_force_marginals(&m),
            Err(CrsdError::GraphTooLarge(21))
        ));
    }

    #[test]
    fn pmrf_rejects_unclipped_potentials() {
        let g = graph(2, &[(0, 1)]);
        let bad = Pmrf::new(
            g,
            NodePotentials {
                a: vec![0.0, 0.5],
                clamped: HashMap::new(),
            },
            EdgeProbs(vec![0.5]),
        );
        assert!(bad.is_err());
    }
}
