//! Behavioral features computed from review metadata and text.
//!
//! Nine user-level features (max reviews per day, positive/negative ratios,
//! rating deviations, burstiness, review length, content similarity) and
//! eleven review-level features (rank, deviation, extremity, early time
//! frame, sole-review flag, capitalization and pronoun statistics). The
//! per-user feature vector is the user features concatenated with the mean
//! of the user's review features, 20 columns total.

use std::collections::HashMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::Dataset;
use crate::error::{CrsdError, Result};

/// Constants for the features whose exact formulas come from the cited
/// behavioral-analysis literature rather than being pinned here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Account-lifetime window (days) for the burstiness feature.
    pub bst_window_days: f64,
    /// Normalized rating-deviation threshold for the DEV indicator.
    pub dev_threshold: f64,
    /// Fraction of a product's date span counted as the early time frame.
    pub etf_fraction: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            bst_window_days: 28.0,
            dev_threshold: 0.63,
            etf_fraction: 0.2,
        }
    }
}

/// Per-user features.
#[derive(Debug, Clone, PartialEq)]
pub struct UserFeatures {
    /// Max number of reviews written in a single day.
    pub mnr: f64,
    /// Ratio of positive (4-5 star) reviews.
    pub pr: f64,
    /// Ratio of negative (1-2 star) reviews.
    pub nr: f64,
    /// Average absolute rating deviation from product means.
    pub avg_rd: f64,
    /// Rating deviation weighted by inverse review rank within the product.
    pub wrd: f64,
    /// Burstiness: high when the account's review history is short-lived.
    pub bst: f64,
    /// Average review length in words.
    pub rl: f64,
    /// Average pairwise cosine similarity of the user's reviews (bag of bigrams).
    pub acs: f64,
    /// Maximum pairwise cosine similarity.
    pub mcs: f64,
}

impl UserFeatures {
    pub fn as_array(&self) -> [f64; 9] {
        [
            self.mnr,
            self.pr,
            self.nr,
            self.avg_rd,
            self.wrd,
            self.bst,
            self.rl,
            self.acs,
            self.mcs,
        ]
    }
}

/// Per-review features.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewFeatures {
    /// 1-based position among the product's reviews ordered by date.
    pub rank: f64,
    /// Absolute rating deviation from the product's average rating.
    pub rd: f64,
    /// 1 if the rating is 1 or 5 stars.
    pub ext: f64,
    /// Thresholded rating deviation indicator.
    pub dev: f64,
    /// 1 if the review falls in the product's early time frame.
    pub etf: f64,
    /// 1 if this is the user's sole review.
    pub isr: f64,
    /// Fraction of ALL-capitals words.
    pub pcw: f64,
    /// Fraction of capital letters among letters.
    pub pc: f64,
    /// Review length in words.
    pub l: f64,
    /// Fraction of first-person pronouns among words.
    pub pp1: f64,
    /// Fraction of sentences containing '!'.
    pub res: f64,
}

impl ReviewFeatures {
    pub fn as_array(&self) -> [f64; 11] {
        [
            self.rank, self.rd, self.ext, self.dev, self.etf, self.isr, self.pcw, self.pc, self.l,
            self.pp1, self.res,
        ]
    }
}

pub const COLUMN_NAMES: [&str; 20] = [
    "MNR", "PR", "NR", "avgRD", "WRD", "BST", "RL", "ACS", "MCS", "Rank", "RD", "EXT", "DEV",
    "ETF", "ISR", "PCW", "PC", "L", "PP1", "RES",
];

/// Dense per-user feature matrix, row order matching the dataset's user index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub n_rows: usize,
    pub n_cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Build a matrix from explicit rows; all rows must share one width.
    pub fn from_rows(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(columns.len(), |r| r.len());
        assert!(rows.iter().all(|r| r.len() == n_cols));
        FeatureMatrix {
            columns,
            n_rows,
            n_cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols)
    }

    pub fn write_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Per-product aggregates shared by several review features.
struct ProductContext {
    mean_rating: Vec<f64>,
    /// review index -> 1-based rank within its product (ordered by date, then id).
    rank: Vec<usize>,
    first_date: Vec<NaiveDate>,
    last_date: Vec<NaiveDate>,
}

impl ProductContext {
    fn build(ds: &Dataset) -> Self {
        let n_reviews = ds.reviews().len();
        let n_products = ds.n_products();
        let mut mean_rating = vec![0.0; n_products];
        let mut rank = vec![0usize; n_reviews];
        let mut first_date = vec![NaiveDate::MIN; n_products];
        let mut last_date = vec![NaiveDate::MIN; n_products];
        for p in 0..n_products {
            let idxs = ds.product_reviews(p);
            let sum: f64 = idxs.iter().map(|&i| ds.reviews()[i].rating as f64).sum();
            mean_rating[p] = sum / idxs.len() as f64;
            let mut ordered: Vec<usize> = idxs.to_vec();
            ordered.sort_by(|&a, &b| {
                let ra = &ds.reviews()[a];
                let rb = &ds.reviews()[b];
                ra.date
                    .cmp(&rb.date)
                    .then_with(|| ra.review_id.cmp(&rb.review_id))
            });
            for (pos, &i) in ordered.iter().enumerate() {
                rank[i] = pos + 1;
            }
            first_date[p] = ordered.iter().map(|&i| ds.reviews()[i].date).min().unwrap();
            last_date[p] = ordered.iter().map(|&i| ds.reviews()[i].date).max().unwrap();
        }
        ProductContext {
            mean_rating,
            rank,
            first_date,
            last_date,
        }
    }
}

fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Bag-of-bigrams with raw counts.
fn bigram_bag(text: &str) -> HashMap<(String, String), f64> {
    let tokens = tokenize(text);
    let mut bag = HashMap::new();
    for pair in tokens.windows(2) {
        *bag.entry((pair[0].clone(), pair[1].clone())).or_insert(0.0) += 1.0;
    }
    bag
}

fn cosine(a: &HashMap<(String, String), f64>, b: &HashMap<(String, String), f64>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let dot: f64 = a
        .iter()
        .filter_map(|(k, va)| b.get(k).map(|vb| va * vb))
        .sum();
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    let c = dot / (na * nb);
    c.clamp(0.0, 1.0)
}

fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

const FIRST_PERSON: [&str; 10] = [
    "i",
    "me",
    "my",
    "mine",
    "myself",
    "we",
    "us",
    "our",
    "ours",
    "ourselves",
];

fn review_features_inner(
    ds: &Dataset,
    ctx: &ProductContext,
    cfg: &FeatureConfig,
    review: usize,
) -> ReviewFeatures {
    let r = &ds.reviews()[review];
    let p = ds.product_index(&r.product_id).unwrap();
    let u = ds.user_index(&r.user_id).unwrap();

    let rd = (r.rating as f64 - ctx.mean_rating[p]).abs();
    let ext = if r.rating == 1 || r.rating == 5 {
        1.0
    } else {
        0.0
    };
    // Deviation threshold is stated on the 0-1 normalized rating scale; the
    // star range is 4.
    let dev = if rd / 4.0 > cfg.dev_threshold {
        1.0
    } else {
        0.0
    };
    let span = (ctx.last_date[p] - ctx.first_date[p]).num_days() as f64;
    let offset = (r.date - ctx.first_date[p]).num_days() as f64;
    let etf = if offset <= cfg.etf_fraction * span {
        1.0
    } else {
        0.0
    };
    let isr = if ds.user_reviews(u).len() == 1 {
        1.0
    } else {
        0.0
    };

    let ws = words(&r.text);
    let n_words = ws.len() as f64;
    let all_caps = ws
        .iter()
        .filter(|w| {
            let mut has_alpha = false;
            for c in w.chars() {
                if c.is_alphabetic() {
                    has_alpha = true;
                    if !c.is_uppercase() {
                        return false;
                    }
                }
            }
            has_alpha
        })
        .count() as f64;
    let pcw = if n_words > 0.0 {
        all_caps / n_words
    } else {
        0.0
    };

    let n_letters = r.text.chars().filter(|c| c.is_alphabetic()).count() as f64;
    let n_caps = r
        .text
        .chars()
        .filter(|c| c.is_alphabetic() && c.is_uppercase())
        .count() as f64;
    let pc = if n_letters > 0.0 {
        n_caps / n_letters
    } else {
        0.0
    };

    let pron = ws
        .iter()
        .filter(|w| {
            let cleaned: String = w
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(|c| c.to_lowercase())
                .collect();
            FIRST_PERSON.contains(&cleaned.as_str())
        })
        .count() as f64;
    let pp1 = if n_words > 0.0 { pron / n_words } else { 0.0 };

    let sentences = split_sentences(&r.text);
    let n_sent = sentences.len() as f64;
    let excl = sentences.iter().filter(|s| s.contains('!')).count() as f64;
    let res = if n_sent > 0.0 { excl / n_sent } else { 0.0 };

    ReviewFeatures {
        rank: ctx.rank[review] as f64,
        rd,
        ext,
        dev,
        etf,
        isr,
        pcw,
        pc,
        l: n_words,
        pp1,
        res,
    }
}

/// Split into sentences at runs of '.', '!', '?'; terminators stay with the
/// sentence they end.
fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_terminator = false;
    for c in text.chars() {
        let term = matches!(c, '.' | '!' | '?');
        if in_terminator && !term {
            if cur.chars().any(|c| !c.is_whitespace()) {
                out.push(std::mem::take(&mut cur));
            } else {
                cur.clear();
            }
        }
        in_terminator = term;
        cur.push(c);
    }
    if cur.chars().any(|c| !c.is_whitespace()) {
        out.push(cur);
    }
    out
}

fn user_features_inner(
    ds: &Dataset,
    ctx: &ProductContext,
    cfg: &FeatureConfig,
    user: usize,
) -> UserFeatures {
    let idxs = ds.user_reviews(user);
    let n = idxs.len() as f64;

    let mut per_day: HashMap<NaiveDate, usize> = HashMap::new();
    for &i in idxs {
        *per_day.entry(ds.reviews()[i].date).or_insert(0) += 1;
    }
    let mnr = per_day.values().copied().max().unwrap_or(0) as f64;

    let pos = idxs
        .iter()
        .filter(|&&i| ds.reviews()[i].rating >= 4)
        .count() as f64;
    let neg = idxs
        .iter()
        .filter(|&&i| ds.reviews()[i].rating <= 2)
        .count() as f64;

    let mut rd_sum = 0.0;
    let mut wrd_num = 0.0;
    let mut wrd_den = 0.0;
    for &i in idxs {
        let r = &ds.reviews()[i];
        let p = ds.product_index(&r.product_id).unwrap();
        let rd = (r.rating as f64 - ctx.mean_rating[p]).abs();
        rd_sum += rd;
        let w = 1.0 / ctx.rank[i] as f64;
        wrd_num += w * rd;
        wrd_den += w;
    }

    let first = idxs.iter().map(|&i| ds.reviews()[i].date).min().unwrap();
    let last = idxs.iter().map(|&i| ds.reviews()[i].date).max().unwrap();
    let span = (last - first).num_days() as f64;
    let bst = (1.0 - span / cfg.bst_window_days).max(0.0);

    let rl = idxs
        .iter()
        .map(|&i| words(&ds.reviews()[i].text).len() as f64)
        .sum::<f64>()
        / n;

    let (acs, mcs) = if idxs.len() < 2 {
        (0.0, 0.0)
    } else {
        let bags: Vec<_> = idxs
            .iter()
            .map(|&i| bigram_bag(&ds.reviews()[i].text))
            .collect();
        let mut sum = 0.0;
        let mut max = 0.0f64;
        let mut pairs = 0.0;
        for a in 0..bags.len() {
            for b in (a + 1)..bags.len() {
                let c = cosine(&bags[a], &bags[b]);
                sum += c;
                max = max.max(c);
                pairs += 1.0;
            }
        }
        (sum / pairs, max)
    };

    UserFeatures {
        mnr,
        pr: pos / n,
        nr: neg / n,
        avg_rd: rd_sum / n,
        wrd: if wrd_den > 0.0 {
            wrd_num / wrd_den
        } else {
            0.0
        },
        bst,
        rl,
        acs,
        mcs,
    }
}

pub fn user_features(ds: &Dataset, user_id: &str) -> Result<UserFeatures> {
    let user = ds
        .user_index(user_id)
        .ok_or_else(|| CrsdError::UnknownId(user_id.to_string()))?;
    let ctx = ProductContext::build(ds);
    Ok(user_features_inner(
        ds,
        &ctx,
        &FeatureConfig::default(),
        user,
    ))
}

pub fn review_features(ds: &Dataset, review_id: &str) -> Result<ReviewFeatures> {
    let review = ds
        .review_index(review_id)
        .ok_or_else(|| CrsdError::UnknownId(review_id.to_string()))?;
    let ctx = ProductContext::build(ds);
    Ok(review_features_inner(
        ds,
        &ctx,
        &FeatureConfig::default(),
        review,
    ))
}

/// Assemble the |users| x 20 feature matrix: user features followed by the
/// per-user mean of review features.
pub fn feature_matrix(ds: &Dataset) -> FeatureMatrix {
    feature_matrix_with(ds, &FeatureConfig::default())
}

pub fn feature_matrix_with(ds: &Dataset, cfg: &FeatureConfig) -> FeatureMatrix {
    let ctx = ProductContext::build(ds);
    let n_users = ds.n_users();
    let rows: Vec<[f64; 20]> = (0..n_users)
        .into_par_iter()
        .map(|u| {
            let uf = user_features_inner(ds, &ctx, cfg, u);
            let idxs = ds.user_reviews(u);
            let mut mean = [0.0f64; 11];
            for &i in idxs {
                let rf = review_features_inner(ds, &ctx, cfg, i);
                for (m, v) in mean.iter_mut().zip(rf.as_array()) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= idxs.len() as f64;
            }
            let mut row = [0.0f64; 20];
            row[..9].copy_from_slice(&uf.as_array());
            row[9..].copy_from_slice(&mean);
            row
        })
        .collect();

    let mut data = Vec::with_capacity(n_users * 20);
    for row in rows {
        data.extend_from_slice(&row);
    }
    FeatureMatrix {
        columns: COLUMN_NAMES.iter().map(|s| s.to_string()).collect(),
        n_rows: n_users,
        n_cols: 20,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::Review;
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;

    fn review(id: &str, user: &str, product: &str, rating: u8, date: &str, text: &str) -> Review {
        Review {
            review_id: id.to_string(),
            user_id: user.to_string(),
            product_id: product.to_string(),
            rating,
            date: NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap(),
            filtered: false,
            text: text.to_string(),
        }
    }

    #[test]
    fn positive_negative_ratios() {
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 4, "2015-01-01", ""),
            review("r2", "u1", "p2", 5, "2015-01-02", ""),
            review("r3", "u1", "p3", 5, "2015-01-03", ""),
        ])
        .unwrap();
        let f = user_features(&ds, "u1").unwrap();
        assert_eq!(f.pr, 1.0);
        assert_eq!(f.nr, 0.0);
    }

    #[test]
    fn max_reviews_per_day() {
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 4, "2015-01-01", ""),
            review("r2", "u1", "p2", 3, "2015-01-01", ""),
            review("r3", "u1", "p3", 2, "2015-01-05", ""),
        ])
        .unwrap();
        assert_eq!(user_features(&ds, "u1").unwrap().mnr, 2.0);
    }

    #[test]
    fn identical_texts_have_max_similarity_one() {
        let text = "the food was great and the service was great";
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 4, "2015-01-01", text),
            review("r2", "u1", "p2", 5, "2015-01-02", text),
        ])
        .unwrap();
        let f = user_features(&ds, "u1").unwrap();
        assert_abs_diff_eq!(f.mcs, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.acs, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sole_review_flag() {
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 4, "2015-01-01", "ok"),
            review("r2", "u2", "p1", 5, "2015-01-02", "fine"),
            review("r3", "u2", "p2", 5, "2015-01-03", "fine"),
        ])
        .unwrap();
        assert_eq!(review_features(&ds, "r1").unwrap().isr, 1.0);
        assert_eq!(review_features(&ds, "r2").unwrap().isr, 0.0);
    }

    #[test]
    fn caps_and_exclamation_features() {
        let ds = Dataset::from_reviews(vec![review(
            "r1",
            "u1",
            "p1",
            4,
            "2015-01-01",
            "GREAT food!",
        )])
        .unwrap();
        let f = review_features(&ds, "r1").unwrap();
        assert_abs_diff_eq!(f.pcw, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.res, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn extremity_indicator() {
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 5, "2015-01-01", ""),
            review("r2", "u2", "p1", 3, "2015-01-02", ""),
        ])
        .unwrap();
        assert_eq!(review_features(&ds, "r1").unwrap().ext, 1.0);
        assert_eq!(review_features(&ds, "r2").unwrap().ext, 0.0);
    }

    #[test]
    fn matrix_shape_and_degenerate_similarity() {
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 4, "2015-01-01", "nice"),
            review("r2", "u2", "p1", 5, "2015-01-02", "nice nice"),
        ])
        .unwrap();
        let fm = feature_matrix(&ds);
        assert_eq!(fm.n_rows, 2);
        assert_eq!(fm.n_cols, 20);
        // single-review users get ACS = MCS = 0
        let u1 = ds.user_index("u1").unwrap();
        assert_eq!(fm.row(u1)[7], 0.0);
        assert_eq!(fm.row(u1)[8], 0.0);
    }

    #[test]
    fn matrix_invariant_to_insertion_order() {
        let rows = vec![
            review("r1", "u1", "p1", 4, "2015-01-01", "good I liked it!"),
            review("r2", "u2", "p1", 2, "2015-01-04", "BAD. really bad"),
            review("r3", "u1", "p2", 5, "2015-01-07", "good I liked it!"),
        ];
        let ds1 = Dataset::from_reviews(rows.clone()).unwrap();
        let mut rev = rows;
        rev.reverse();
        let ds2 = Dataset::from_reviews(rev).unwrap();
        assert_eq!(feature_matrix(&ds1), feature_matrix(&ds2));
    }

    #[test]
    fn no_nan_or_inf_on_empty_text() {
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 4, "2015-01-01", ""),
            review("r2", "u1", "p1", 4, "2015-01-01", ""),
        ])
        .unwrap();
        let fm = feature_matrix(&ds);
        for row in fm.rows() {
            for v in row {
                assert!(v.is_finite());
            }
        }
    }

    #[test]
    fn acs_never_exceeds_mcs() {
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 4, "2015-01-01", "one two three"),
            review("r2", "u1", "p2", 5, "2015-01-02", "one two four"),
            review("r3", "u1", "p3", 3, "2015-01-03", "something else entirely"),
        ])
        .unwrap();
        let f = user_features(&ds, "u1").unwrap();
        assert!(f.acs <= f.mcs + 1e-12);
        assert!((0.0..=1.0).contains(&f.acs));
        assert!((0.0..=1.0).contains(&f.mcs));
    }

    #[test]
    fn unknown_ids_error() {
        let ds =
            Dataset::from_reviews(vec![review("r1", "u1", "p1", 4, "2015-01-01", "")]).unwrap();
        assert!(user_features(&ds, "nope").is_err());
        assert!(review_features(&ds, "nope").is_err());
    }

    #[test]
    fn rank_orders_by_date() {
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 4, "2015-03-01", ""),
            review("r2", "u2", "p1", 5, "2015-01-01", ""),
            review("r3", "u3", "p1", 2, "2015-02-01", ""),
        ])
        .unwrap();
        assert_eq!(review_features(&ds, "r2").unwrap().rank, 1.0);
        assert_eq!(review_features(&ds, "r3").unwrap().rank, 2.0);
        assert_eq!(review_features(&ds, "r1").unwrap().rank, 3.0);
    }
}
