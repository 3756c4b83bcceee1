//! Random forest of axis-aligned Gini decision trees with class-count
//! leaves. Used both for per-user spam probabilities and for same-class
//! probabilities of user pairs.
//!
//! Training is deterministic given (data order, seed): each tree gets its
//! own seeded RNG stream for the bootstrap sample and per-split feature
//! subsets. Impurity ties break toward the lowest feature index, then the
//! lowest threshold.

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::ClassLabel;
use crate::error::{CrsdError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Fraction of features considered per split (ceil(fraction * d)).
    pub feature_fraction: f64,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 950,
            max_depth: 16,
            feature_fraction: 0.65,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        pos: u32,
        neg: u32,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut cur = 0usize;
        loop {
            match &self.nodes[cur] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    cur = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf { pos, neg } => {
                    let total = pos + neg;
                    return if total == 0 {
                        0.5
                    } else {
                        *pos as f64 / total as f64
                    };
                }
            }
        }
    }
}

const FOREST_FORMAT_VERSION: u32 = 1;

/// A trained ensemble. A single-class training set yields a constant
/// forest that predicts the observed class probability for every input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forest {
    version: u32,
    pub params: ForestParams,
    pub n_features: usize,
    trees: Vec<Tree>,
    constant: Option<f64>,
}

impl Forest {
    /// Train on feature rows and class labels (+1 spammer / -1 benign).
    pub fn train(rows: &[&[f64]], labels: &[ClassLabel], params: &ForestParams) -> Result<Forest> {
        if rows.len() != labels.len() {
            return Err(CrsdError::Dimension {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        if rows.len() < 2 {
            return Err(CrsdError::InvalidParam(
                "need at least 2 training rows".into(),
            ));
        }
        if params.n_trees == 0 || params.max_depth == 0 {
            return Err(CrsdError::InvalidParam(
                "n_trees and max_depth must be >= 1".into(),
            ));
        }
        if !(params.feature_fraction > 0.0 && params.feature_fraction <= 1.0) {
            return Err(CrsdError::InvalidParam(
                "feature_fraction must be in (0, 1]".into(),
            ));
        }
        let n_features = rows[0].len();
        for r in rows {
            if r.len() != n_features {
                return Err(CrsdError::Dimension {
                    expected: n_features,
                    got: r.len(),
                });
            }
        }

        let y: Vec<bool> = labels.iter().map(|l| l.is_spammer()).collect();
        let n_pos = y.iter().filter(|&&b| b).count();
        if n_pos == 0 || n_pos == y.len() {
            log::warn!(
                "single-class training set ({} rows, all {}); forest is constant",
                y.len(),
                labels[0]
            );
            return Ok(Forest {
                version: FOREST_FORMAT_VERSION,
                params: params.clone(),
                n_features,
                trees: Vec::new(),
                constant: Some(if n_pos == 0 { 0.0 } else { 1.0 }),
            });
        }

        let n = rows.len();
        let trees: Vec<Tree> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(t as u64));
                let indices: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut builder = TreeBuilder {
                    rows,
                    y: &y,
                    params,
                    n_features,
                    nodes: Vec::new(),
                    rng,
                };
                builder.build(indices, 0);
                Tree {
                    nodes: builder.nodes,
                }
            })
            .collect();

        Ok(Forest {
            version: FOREST_FORMAT_VERSION,
            params: params.clone(),
            n_features,
            trees,
            constant: None,
        })
    }

    /// Mean over trees of the leaf positive-class frequency.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(CrsdError::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        if let Some(c) = self.constant {
            return Ok(c);
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Forest> {
        let f: Forest = serde_json::from_str(s)?;
        if f.version != FOREST_FORMAT_VERSION {
            return Err(CrsdError::InvalidParam(format!(
                "unsupported forest format version {}",
                f.version
            )));
        }
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Forest> {
        Forest::from_json(&std::fs::read_to_string(path)?)
    }
}

struct TreeBuilder<'a> {
    rows: &'a [&'a [f64]],
    y: &'a [bool],
    params: &'a ForestParams,
    n_features: usize,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, indices: &[usize]) -> usize {
        let pos = indices.iter().filter(|&&i| self.y[i]).count() as u32;
        let neg = indices.len() as u32 - pos;
        self.nodes.push(Node::Leaf { pos, neg });
        self.nodes.len() - 1
    }

    fn build(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let pos = indices.iter().filter(|&&i| self.y[i]).count();
        let pure = pos == 0 || pos == indices.len();
        if depth >= self.params.max_depth
            || pure
            || indices.len() < 2 * self.params.min_leaf
            || indices.len() < 2
        {
            return self.leaf(&indices);
        }

        let m = ((self.params.feature_fraction * self.n_features as f64).ceil() as usize)
            .clamp(1, self.n_features);
        let mut feats: Vec<usize> = sample(&mut self.rng, self.n_features, m).into_vec();
        feats.sort_unstable();

        let mut best: Option<(f64, usize, f64)> = None; // (impurity, feature, threshold)
        for &f in &feats {
            if let Some((imp, thr)) = self.best_split_on(&indices, f) {
                let better = match best {
                    None => true,
                    Some((bi, _, _)) => imp < bi - 1e-15,
                };
                if better {
                    best = Some((imp, f, thr));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return self.leaf(&indices);
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.rows[i][feature] <= threshold);
        if left_idx.len() < self.params.min_leaf || right_idx.len() < self.params.min_leaf {
            return self.leaf(&indices);
        }

        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { pos: 0, neg: 0 }); // placeholder
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    /// Best weighted-Gini split on one feature; thresholds are midpoints
    /// between consecutive distinct values. Returns (impurity, threshold).
    fn best_split_on(&self, indices: &[usize], feature: usize) -> Option<(f64, f64)> {
        let mut vals: Vec<(f64, bool)> = indices
            .iter()
            .map(|&i| (self.rows[i][feature], self.y[i]))
            .collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let total = vals.len() as f64;
        let total_pos = vals.iter().filter(|(_, y)| *y).count() as f64;
        let min_leaf = self.params.min_leaf;

        let mut best: Option<(f64, f64)> = None;
        let mut left_n = 0.0;
        let mut left_pos = 0.0;
        for k in 0..vals.len() - 1 {
            left_n += 1.0;
            if vals[k].1 {
                left_pos += 1.0;
            }
            if vals[k].0 == vals[k + 1].0 {
                continue;
            }
            let right_n = total - left_n;
            if (left_n as usize) < min_leaf || (right_n as usize) < min_leaf {
                continue;
            }
            let gini = |n: f64, p: f64| {
                if n == 0.0 {
                    0.0
                } else {
                    let q = p / n;
                    2.0 * q * (1.0 - q)
                }
            };
            let imp = (left_n * gini(left_n, left_pos)
                + right_n * gini(right_n, total_pos - left_pos))
                / total;
            let thr = 0.5 * (vals[k].0 + vals[k + 1].0);
            let better = match best {
                None => true,
                Some((bi, bt)) => imp < bi - 1e-15 || (imp < bi + 1e-15 && thr < bt),
            };
            if better {
                best = Some((imp, thr));
            }
        }
        best
    }
}
