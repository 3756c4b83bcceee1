//! Synthetic review ecosystems with planted spammer behavior.
//!
//! Spammers post extreme ratings in short time bursts, duplicate their own
//! text, and concentrate on designated campaign products, so the behavioral
//! features separate the classes to a configurable degree. Campaign
//! products accumulate large mixed cliques, which is what makes
//! largest-clique label sampling meaningful. All of a spammer's reviews
//! carry the filtered flag, so derived labels equal planted labels exactly.

use chrono::NaiveDate;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::active::sample_random;
use crate::data_model::{Dataset, Review};
use crate::error::{CrsdError, Result};
use crate::graph::{build_clique_graph, oracle_sparsify};
use crate::lbp::{run_lbp, LbpParams, Pmrf};
use crate::metrics::auc;
use crate::potentials::{EdgeProbs, NodePotentials};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_users: usize,
    pub n_products: usize,
    pub spam_fraction: f64,
    /// Mean of the geometric reviews-per-user distribution (min 1 review).
    pub mean_reviews_per_user: f64,
    /// Probability a spammer review gets a 1- or 5-star rating.
    pub rating_extremity_bias: f64,
    /// Width in days of a spammer's posting burst.
    pub burst_window_days: i64,
    /// Probability a spammer reuses their own review text.
    pub text_duplication_prob: f64,
    /// Probability a spammer review lands in the product's early window.
    pub early_review_bias: f64,
    /// Probability a spammer review targets a campaign product.
    pub campaign_prob: f64,
    /// Number of designated campaign products.
    pub n_campaign_products: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_users: 1000,
            n_products: 100,
            spam_fraction: 0.2,
            mean_reviews_per_user: 3.0,
            rating_extremity_bias: 0.85,
            burst_window_days: 5,
            text_duplication_prob: 0.7,
            early_review_bias: 0.6,
            campaign_prob: 0.5,
            n_campaign_products: 5,
            seed: 0,
        }
    }
}

const BENIGN_PHRASES: [&str; 8] = [
    "the food was decent and the staff were friendly enough",
    "we waited a while but the meal turned out fine",
    "solid neighborhood spot with reasonable prices",
    "portions were generous though the room was noisy",
    "service was slow on a busy night but the pasta was good",
    "nothing special but nothing wrong either",
    "nice atmosphere and a fair wine list",
    "came here with family and everyone found something to like",
];

const SPAM_PHRASES: [&str; 6] = [
    "BEST place EVER! I loved it! My new favorite!",
    "AMAZING! I will come back every week! Trust me!",
    "Absolutely TERRIBLE! I want my money back! Avoid!",
    "WOW! Incredible food! I am telling all my friends!",
    "Worst experience of my life! I am never returning!",
    "PERFECT! I cannot recommend it enough! Go now!",
];

fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 1).unwrap()
}

fn geometric_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    let cont = 1.0 - 1.0 / mean.max(1.0);
    let mut k = 1;
    while k < 25 && rng.gen::<f64>() < cont {
        k += 1;
    }
    k
}

/// Generate a dataset with planted labels. Deterministic given params.
pub fn generate(p: &SynthParams) -> Result<Dataset> {
    if !(0.0 < p.spam_fraction && p.spam_fraction < 1.0) {
        return Err(CrsdError::InvalidParam(format!(
            "spam_fraction must be in (0,1), got {}",
            p.spam_fraction
        )));
    }
    if p.n_users == 0 || p.n_products == 0 {
        return Err(CrsdError::InvalidParam(
            "n_users and n_products must be >= 1".into(),
        ));
    }
    if p.mean_reviews_per_user < 1.0 {
        return Err(CrsdError::InvalidParam(
            "mean_reviews_per_user must be >= 1".into(),
        ));
    }
    let n_campaign = p.n_campaign_products.min(p.n_products);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n_spammers =
        ((p.spam_fraction * p.n_users as f64).round() as usize).clamp(1, p.n_users - 1);

    // Campaign products share one global burst period placed at the start
    // of their timelines (spam lands first); other products open at a
    // random day and collect benign reviews over ~6 months.
    let campaign_day: i64 = 150;
    let product_start: Vec<i64> = (0..p.n_products)
        .map(|i| {
            if i < n_campaign {
                campaign_day
            } else {
                rng.gen_range(0..365)
            }
        })
        .collect();

    let mut reviews = Vec::new();
    let mut next_review = 0usize;
    for u in 0..p.n_users {
        let spammer = u < n_spammers;
        let user_id = if spammer {
            format!("s{u:05}")
        } else {
            format!("b{u:05}")
        };
        let n_reviews = geometric_count(&mut rng, p.mean_reviews_per_user);
        // Spammer accounts are short-lived: all their activity sits in a
        // narrow window around the shared campaign period.
        let burst_start = if spammer {
            campaign_day + rng.gen_range(0..=p.burst_window_days)
        } else {
            rng.gen_range(0..300i64)
        };
        let mut own_text: Option<&str> = None;
        for _ in 0..n_reviews {
            let (product, date_day, rating, text) = if spammer {
                let campaign = rng.gen::<f64>() < p.campaign_prob && n_campaign > 0;
                let product = if campaign {
                    rng.gen_range(0..n_campaign)
                } else {
                    rng.gen_range(0..p.n_products)
                };
                // early bias pushes the review to the opening of the window
                let offset = if rng.gen::<f64>() < p.early_review_bias {
                    0
                } else {
                    rng.gen_range(0..=p.burst_window_days)
                };
                let day = if campaign {
                    product_start[product] + offset
                } else {
                    burst_start + offset
                };
                let rating = if rng.gen::<f64>() < p.rating_extremity_bias {
                    if rng.gen::<f64>() < 0.8 {
                        5
                    } else {
                        1
                    }
                } else {
                    rng.gen_range(2..=4)
                };
                let text = match own_text {
                    Some(t) if rng.gen::<f64>() < p.text_duplication_prob => t,
                    _ => {
                        let t = SPAM_PHRASES[rng.gen_range(0..SPAM_PHRASES.len())];
                        own_text = Some(t);
                        t
                    }
                };
                (product, day, rating, text)
            } else {
                let product = rng.gen_range(0..p.n_products);
                let day = product_start[product] + rng.gen_range(0..180);
                let rating = *[3u8, 3, 4, 4, 4, 5, 2].get(rng.gen_range(0..7)).unwrap();
                let text = BENIGN_PHRASES[rng.gen_range(0..BENIGN_PHRASES.len())];
                (product, day, rating, text)
            };
            reviews.push(Review {
                review_id: format!("r{next_review:07}"),
                user_id: user_id.clone(),
                product_id: format!("q{product:05}"),
                rating,
                date: base_date() + chrono::Duration::days(date_day),
                filtered: spammer,
                text: text.to_string(),
            });
            next_review += 1;
        }
    }
    Dataset::from_reviews(reviews)
}

/// Parameters for the ground-truth sparsification sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fig3Params {
    pub epsilon: f64,
    /// Fraction of nodes whose potential is anchored to the truth. The MRF
    /// built from agreement-only potentials is exactly symmetric under a
    /// global class swap, so beliefs stay uniform without a reference
    /// signal; anchored nodes provide it and are excluded from scoring.
    pub anchor_fraction: f64,
    pub seed: u64,
}

impl Default for Fig3Params {
    fn default() -> Self {
        Fig3Params {
            epsilon: 0.001,
            anchor_fraction: 0.02,
            seed: 0,
        }
    }
}

/// One cell of the (k1, k2) AUC grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub k1: usize,
    pub k2: usize,
    pub auc: f64,
}

/// Sweep (k1, k2): sparsify with ground-truth classes, set edge potentials
/// from the true agreement relationship, leave node potentials uniform
/// (except anchors) and measure the AUC of the LBP spam beliefs on
/// non-anchored nodes.
pub fn fig3_experiment(
    ds: &Dataset,
    k1_range: &[usize],
    k2_range: &[usize],
    params: &Fig3Params,
    lbp_params: &LbpParams,
) -> Result<Vec<GridCell>> {
    let labels = ds.labels().to_vec();
    let graph = build_clique_graph(ds);
    let n = graph.n_nodes();
    let n_anchors = ((params.anchor_fraction * n as f64).round() as usize).clamp(1, n);
    let anchors = sample_random(n, n_anchors, params.seed)?;
    let mut is_anchor = vec![false; n];
    for &a in &anchors {
        is_anchor[a] = true;
    }
    let eps = params.epsilon;

    let mut grid = Vec::with_capacity(k1_range.len() * k2_range.len());
    for &k1 in k1_range {
        for &k2 in k2_range {
            let cell_seed = params
                .seed
                .wrapping_mul(1_000_003)
                .wrapping_add((k1 * 1000 + k2) as u64);
            let sparse = oracle_sparsify(&graph, &labels, k1, k2, cell_seed);
            let a: Vec<f64> = (0..n)
                .map(|i| {
                    if is_anchor[i] {
                        if labels[i].is_spammer() {
                            1.0 - eps
                        } else {
                            eps
                        }
                    } else {
                        0.5
                    }
                })
                .collect();
            let probs: Vec<f64> = sparse
                .edges()
                .iter()
                .map(|e| {
                    if labels[e.i] == labels[e.j] {
                        1.0 - eps
                    } else {
                        eps
                    }
                })
                .collect();
            let m = Pmrf::new(
                sparse,
                NodePotentials {
                    a,
                    clamped: Default::default(),
                },
                EdgeProbs(probs),
            )?;
            let out = run_lbp(&m, lbp_params);
            let mut scores = Vec::new();
            let mut truth = Vec::new();
            for i in 0..n {
                if !is_anchor[i] {
                    scores.push(out.beliefs.0[i][0]);
                    truth.push(labels[i]);
                }
            }
            grid.push(GridCell {
                k1,
                k2,
                auc: auc(&scores, &truth)?,
            });
        }
    }
    Ok(grid)
}
