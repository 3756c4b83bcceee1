//! Node potentials and edge same-class probabilities.
//!
//! Two routes produce them: trained forests (ML mode) or the unsupervised
//! empirical-CDF spam score (threshold mode). Labeled users are soft-clamped
//! to 1-eps / eps, and every emitted probability is clipped away from 0 and
//! 1 so belief propagation never sees a zero-probability message.

use std::collections::HashMap;

use crate::data_model::ClassLabel;
use crate::error::{CrsdError, Result};
use crate::features::FeatureMatrix;
use crate::forest::{Forest, ForestParams};
use crate::graph::UserGraph;

/// Global probability floor; also the clamp strength for labeled users.
pub const EPS: f64 = 0.001;

pub fn clip(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Per-node spam priors `a_i`, with labeled users clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePotentials {
    /// user index -> a_i in [EPS, 1-EPS].
    pub a: Vec<f64>,
    /// labeled users and their ground-truth classes.
    pub clamped: HashMap<usize, ClassLabel>,
}

/// Same-class probabilities, parallel to the graph's edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProbs(pub Vec<f64>);

fn clamp_value(label: ClassLabel) -> f64 {
    match label {
        ClassLabel::Spammer => 1.0 - EPS,
        ClassLabel::Benign => EPS,
    }
}

/// Node potentials from a trained user-feature forest; labeled users are
/// clamped to their ground truth.
pub fn ml_node_potentials(
    forest: &Forest,
    fm: &FeatureMatrix,
    labeled: &HashMap<usize, ClassLabel>,
) -> Result<NodePotentials> {
    let mut a = Vec::with_capacity(fm.n_rows);
    for u in 0..fm.n_rows {
        let v = match labeled.get(&u) {
            Some(&lab) => clamp_value(lab),
            None => clip(forest.predict_proba(fm.row(u))?),
        };
        a.push(v);
    }
    Ok(NodePotentials {
        a,
        clamped: labeled.clone(),
    })
}

/// Symmetric pair representation: elementwise |f_i - f_j| followed by
/// elementwise means.
pub fn edge_features(f_i: &[f64], f_j: &[f64]) -> Result<Vec<f64>> {
    if f_i.len() != f_j.len() {
        return Err(CrsdError::Dimension {
            expected: f_i.len(),
            got: f_j.len(),
        });
    }
    let mut out = Vec::with_capacity(2 * f_i.len());
    out.extend(f_i.iter().zip(f_j).map(|(a, b)| (a - b).abs()));
    out.extend(f_i.iter().zip(f_j).map(|(a, b)| (a + b) / 2.0));
    Ok(out)
}

/// Minimum number of labeled graph-edge pairs before training falls back to
/// all labeled pairs.
const MIN_EDGE_PAIRS: usize = 50;

/// Train the same-class forest on pairs of labeled users. Pairs come from
/// graph edges between labeled users; when those number fewer than
/// `MIN_EDGE_PAIRS` the training set is augmented with every labeled pair.
pub fn train_edge_forest(
    fm: &FeatureMatrix,
    labeled: &HashMap<usize, ClassLabel>,
    graph: &UserGraph,
    params: &ForestParams,
) -> Result<Forest> {
    if labeled.len() < 2 {
        return Err(CrsdError::InvalidParam(
            "need at least 2 labeled users to train the edge forest".into(),
        ));
    }
    let mut pairs: Vec<(usize, usize)> = graph
        .edges()
        .iter()
        .filter(|e| labeled.contains_key(&e.i) && labeled.contains_key(&e.j))
        .map(|e| (e.i, e.j))
        .collect();
    if pairs.len() < MIN_EDGE_PAIRS {
        let mut users: Vec<usize> = labeled.keys().copied().collect();
        users.sort_unstable();
        for a in 0..users.len() {
            for b in (a + 1)..users.len() {
                pairs.push((users[a], users[b]));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(pairs.len());
    let mut y: Vec<ClassLabel> = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        rows.push(edge_features(fm.row(i), fm.row(j))?);
        // "same class" plays the positive role for the pair classifier
        y.push(if labeled[&i] == labeled[&j] {
            ClassLabel::Spammer
        } else {
            ClassLabel::Benign
        });
    }
    let row_refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    Forest::train(&row_refs, &y, params)
}

/// Predict p_ij for every edge. Edges between two labeled users get the
/// ground-truth-implied value instead of a prediction.
pub fn ml_edge_probs(
    edge_forest: &Forest,
    fm: &FeatureMatrix,
    graph: &UserGraph,
    labeled: &HashMap<usize, ClassLabel>,
) -> Result<EdgeProbs> {
    let mut probs = Vec::with_capacity(graph.n_edges());
    for e in graph.edges() {
        let p = match (labeled.get(&e.i), labeled.get(&e.j)) {
            (Some(a), Some(b)) => {
                if a == b {
                    1.0 - EPS
                } else {
                    EPS
                }
            }
            _ => clip(edge_forest.predict_proba(&edge_features(fm.row(e.i), fm.row(e.j))?)?),
        };
        probs.push(p);
    }
    Ok(EdgeProbs(probs))
}

/// Unsupervised spam score per user: S_u = 1 - sqrt(mean_i Pr[F_i < f_u,i]),
/// with the empirical CDF taken over all users and strict less-than.
pub fn threshold_spam_scores(fm: &FeatureMatrix) -> Vec<f64> {
    let n = fm.n_rows;
    if n == 0 {
        return Vec::new();
    }
    // column-sorted copies for O(log n) strict-rank lookups
    let mut sorted_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); fm.n_cols];
    for row in fm.rows() {
        for (c, &v) in row.iter().enumerate() {
            sorted_cols[c].push(v);
        }
    }
    for col in &mut sorted_cols {
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    (0..n)
        .map(|u| {
            let row = fm.row(u);
            let mean_p: f64 = row
                .iter()
                .enumerate()
                .map(|(c, &v)| {
                    let below = sorted_cols[c].partition_point(|&x| x < v);
                    below as f64 / n as f64
                })
                .sum::<f64>()
                / fm.n_cols as f64;
            1.0 - mean_p.sqrt()
        })
        .collect()
}

/// Node potentials from spam scores; labeled users clamped, others clipped.
pub fn threshold_node_potentials(
    scores: &[f64],
    labeled: &HashMap<usize, ClassLabel>,
) -> NodePotentials {
    let a = scores
        .iter()
        .enumerate()
        .map(|(u, &s)| match labeled.get(&u) {
            Some(&lab) => clamp_value(lab),
            None => clip(s),
        })
        .collect();
    NodePotentials {
        a,
        clamped: labeled.clone(),
    }
}

/// Edge probabilities from spam scores: similar scores imply same class.
/// Labeled pairs keep their ground-truth-implied value.
pub fn threshold_edge_probs(
    scores: &[f64],
    graph: &UserGraph,
    labeled: &HashMap<usize, ClassLabel>,
) -> EdgeProbs {
    EdgeProbs(
        graph
            .edges()
            .iter()
            .map(|e| match (labeled.get(&e.i), labeled.get(&e.j)) {
                (Some(a), Some(b)) => {
                    if a == b {
                        1.0 - EPS
                    } else {
                        EPS
                    }
                }
                _ => clip(1.0 - (scores[e.i] - scores[e.j]).abs()),
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Dataset, Review};
    use crate::features::feature_matrix;
    use crate::graph::{build_clique_graph, Edge, UserGraph};
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;
    use std::collections::BTreeSet;

    fn fm_from_rows(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let n_cols = rows.first().map_or(0, |r| r.len());
        let columns = (0..n_cols).map(|c| format!("f{c}")).collect();
        FeatureMatrix::from_rows(columns, rows)
    }

    fn chain_graph(n: usize) -> UserGraph {
        let edges = (0..n - 1)
            .map(|i| Edge {
                i,
                j: i + 1,
                shared_products: BTreeSet::new(),
                min_gap_days: 0,
                prob: None,
            })
            .collect();
        UserGraph::new(n, edges)
    }

    #[test]
    fn edge_features_hand_example() {
        let v = edge_features(&[1.0, 0.0], &[0.0, 2.0]).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 0.5, 1.0]);
    }

    #[test]
    fn edge_features_symmetric() {
        let a = [0.3, 1.5, -2.0];
        let b = [1.1, 0.0, 4.0];
        assert_eq!(
            edge_features(&a, &b).unwrap(),
            edge_features(&b, &a).unwrap()
        );
    }

    #[test]
    fn edge_features_identical_users_zero_diff() {
        let f = [0.5, 2.0];
        let v = edge_features(&f, &f).unwrap();
        assert_eq!(&v[..2], &[0.0, 0.0]);
    }

    #[test]
    fn edge_features_length_mismatch() {
        assert!(edge_features(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spam_score_extremes_and_hand_value() {
        // 4 users, one feature column [1,2,3,4]
        let fm = fm_from_rows(vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let s = threshold_spam_scores(&fm);
        // minimal user: p = 0 -> S = 1
        assert_abs_diff_eq!(s[0], 1.0, epsilon = 1e-12);
        // value 3: p = 2/4 -> S = 1 - sqrt(0.5)
        assert_abs_diff_eq!(s[2], 1.0 - 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn spam_score_mean_quarter() {
        // two columns engineered so user 0 has p = (0.5, 0.0) -> mean 0.25
        let fm = fm_from_rows(vec![
            vec![2.0, 1.0],
            vec![1.0, 2.0],
            vec![3.0, 3.0],
            vec![4.0, 4.0],
        ]);
        let s = threshold_spam_scores(&fm);
        // user 0: col0 value 2 has 1 of 4 below -> 0.25; col1 value 1 -> 0.0
        // mean = 0.125; engineered check of the formula instead:
        let expected = 1.0 - (0.125f64).sqrt();
        assert_abs_diff_eq!(s[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn spam_score_invariant_under_monotone_transform() {
        let base: Vec<Vec<f64>> = vec![vec![0.1], vec![0.7], vec![0.3], vec![0.9], vec![0.5]];
        let transformed: Vec<Vec<f64>> = base.iter().map(|r| vec![(r[0] * 3.0).exp()]).collect();
        let s1 = threshold_spam_scores(&fm_from_rows(base));
        let s2 = threshold_spam_scores(&fm_from_rows(transformed));
        for (a, b) in s1.iter().zip(&s2) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn threshold_potentials_clamp_and_clip() {
        let scores = vec![0.5, 1.0, 0.2];
        let mut labeled = HashMap::new();
        labeled.insert(2usize, ClassLabel::Benign);
        let np = threshold_node_potentials(&scores, &labeled);
        assert_abs_diff_eq!(np.a[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(np.a[1], 0.999, epsilon = 1e-12); // clipped
        assert_abs_diff_eq!(np.a[2], 0.001, epsilon = 1e-12); // clamped benign
    }

    #[test]
    fn threshold_edge_rule() {
        let g = chain_graph(3);
        let scores = vec![0.7, 0.5, 0.5];
        let p = threshold_edge_probs(&scores, &g, &HashMap::new());
        assert_abs_diff_eq!(p.0[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(p.0[1], 1.0 - EPS, epsilon = 1e-12); // identical scores
    }

    #[test]
    fn threshold_edge_rule_maximal_disagreement() {
        let g = chain_graph(2);
        let p = threshold_edge_probs(&[1.0, 0.0], &g, &HashMap::new());
        assert_abs_diff_eq!(p.0[0], EPS, epsilon = 1e-12);
    }

    #[test]
    fn ml_node_potentials_clamp_and_constant_forest() {
        let ds = Dataset::from_reviews(
            (0..6)
                .map(|k| Review {
                    review_id: format!("r{k}"),
                    user_id: format!("u{k}"),
                    product_id: "p".into(),
                    rating: 3,
                    date: NaiveDate::from_ymd_opt(2015, 1, 1 + k as u32).unwrap(),
                    filtered: k == 0,
                    text: String::new(),
                })
                .collect(),
        )
        .unwrap();
        let fm = feature_matrix(&ds);
        // constant forest: single-class training set
        let rows: Vec<&[f64]> = vec![fm.row(0), fm.row(1)];
        let y = vec![ClassLabel::Spammer, ClassLabel::Spammer];
        let f = Forest::train(
            &rows,
            &y,
            &ForestParams {
                n_trees: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let mut labeled = HashMap::new();
        labeled.insert(0usize, ClassLabel::Spammer);
        labeled.insert(1usize, ClassLabel::Benign);
        let np = ml_node_potentials(&f, &fm, &labeled).unwrap();
        assert_abs_diff_eq!(np.a[0], 0.999, epsilon = 1e-12);
        assert_abs_diff_eq!(np.a[1], 0.001, epsilon = 1e-12);
        // constant forest predicts 1.0, clipped to 0.999 for unlabeled
        assert_abs_diff_eq!(np.a[2], 0.999, epsilon = 1e-12);
    }

    #[test]
    fn edge_forest_augments_small_pair_sets() {
        let ds = Dataset::from_reviews(
            (0..5)
                .map(|k| Review {
                    review_id: format!("r{k}"),
                    user_id: format!("u{k}"),
                    product_id: "p".into(),
                    rating: if k < 2 { 5 } else { 1 },
                    date: NaiveDate::from_ymd_opt(2015, 1, 1 + k as u32).unwrap(),
                    filtered: k < 2,
                    text: String::new(),
                })
                .collect(),
        )
        .unwrap();
        let fm = feature_matrix(&ds);
        let g = build_clique_graph(&ds);
        let mut labeled = HashMap::new();
        for u in 0..4 {
            labeled.insert(u, ds.user_label(u));
        }
        // 4 labeled users, clique edges < 50 -> C(4,2) = 6 pairs
        let f = train_edge_forest(
            &fm,
            &labeled,
            &g,
            &ForestParams {
                n_trees: 10,
                ..Default::default()
            },
        )
        .unwrap();
        let probs = ml_edge_probs(&f, &fm, &g, &labeled).unwrap();
        assert_eq!(probs.0.len(), g.n_edges());
        for &p in &probs.0 {
            assert!((EPS..=1.0 - EPS).contains(&p));
        }
        // labeled same-class pair forced to 1 - EPS
        let e0 = g.edges().iter().position(|e| e.i == 0 && e.j == 1).unwrap();
        assert_abs_diff_eq!(probs.0[e0], 1.0 - EPS, epsilon = 1e-12);
    }

    #[test]
    fn edge_forest_needs_two_labeled() {
        let fm = fm_from_rows(vec![vec![0.0], vec![1.0]]);
        let g = chain_graph(2);
        let mut labeled = HashMap::new();
        labeled.insert(0usize, ClassLabel::Spammer);
        assert!(train_edge_forest(&fm, &labeled, &g, &ForestParams::default()).is_err());
    }
}
