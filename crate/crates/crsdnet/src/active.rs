//! Label-budget selection: uniform random sampling, or sampling from the
//! largest product cliques (collusive spammers tend to concentrate there).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::Dataset;
use crate::error::{CrsdError, Result};

/// Labeling budget as a fraction of all users.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Budget {
    pub fraction: f64,
}

impl Budget {
    pub fn new(fraction: f64) -> Result<Self> {
        if !(0.0 < fraction && fraction < 1.0) {
            return Err(CrsdError::InvalidParam(format!(
                "budget fraction must be in (0,1), got {fraction}"
            )));
        }
        Ok(Budget { fraction })
    }

    /// Resolved label count: round(fraction * n), at least 2, at most n.
    pub fn resolve(&self, n_users: usize) -> usize {
        ((self.fraction * n_users as f64).round() as usize).clamp(2, n_users)
    }
}

/// Sampler choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Random,
    Clique,
}

/// Pick k distinct users uniformly at random.
pub fn sample_random(n_users: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > n_users {
        return Err(CrsdError::InvalidParam(format!(
            "cannot sample {k} of {n_users} users"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut users: Vec<usize> = (0..n_users).collect();
    users.shuffle(&mut rng);
    users.truncate(k);
    users.sort_unstable();
    Ok(users)
}

/// Spend the budget on reviewers of the largest cliques: products ordered
/// by distinct-reviewer count (descending, ties by product id), sampling
/// uniformly inside each clique and skipping users already selected.
pub fn sample_largest_clique(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > ds.n_users() {
        return Err(CrsdError::InvalidParam(format!(
            "cannot sample {k} of {} users",
            ds.n_users()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut products: Vec<(usize, Vec<usize>)> = (0..ds.n_products())
        .map(|p| {
            let mut reviewers: Vec<usize> = ds
                .product_reviews(p)
                .iter()
                .map(|&ri| ds.user_index(&ds.reviews()[ri].user_id).unwrap())
                .collect();
            reviewers.sort_unstable();
            reviewers.dedup();
            (p, reviewers)
        })
        .collect();
    // product index order is lexicographic by id, so ties resolve by id
    products.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));

    let mut chosen = vec![false; ds.n_users()];
    let mut out = Vec::with_capacity(k);
    for (_, mut reviewers) in products {
        if out.len() == k {
            break;
        }
        reviewers.shuffle(&mut rng);
        for u in reviewers {
            if out.len() == k {
                break;
            }
            if !chosen[u] {
                chosen[u] = true;
                out.push(u);
            }
        }
    }
    if out.len() < k {
        return Err(CrsdError::InvalidParam(format!(
            "budget {k} exceeds the union of all product reviewers ({})",
            out.len()
        )));
    }
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::Review;
    use chrono::NaiveDate;
    use std::collections::HashSet;

    fn review(id: &str, user: &str, product: &str) -> Review {
        Review {
            review_id: id.to_string(),
            user_id: user.to_string(),
            product_id: product.to_string(),
            rating: 3,
            date: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
            filtered: false,
            text: String::new(),
        }
    }

    /// 5 reviewers on product A, 3 more (plus one overlap) on product B.
    fn toy_dataset() -> Dataset {
        let mut reviews = Vec::new();
        for u in 0..5 {
            reviews.push(review(&format!("ra{u}"), &format!("u{u}"), "pA"));
        }
        for u in [4, 5, 6, 7] {
            reviews.push(review(&format!("rb{u}"), &format!("u{u}"), "pB"));
        }
        Dataset::from_reviews(reviews).unwrap()
    }

    #[test]
    fn random_full_budget_returns_everyone() {
        let s = sample_random(10, 10, 1).unwrap();
        assert_eq!(s, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn random_deterministic_given_seed() {
        assert_eq!(
            sample_random(100, 10, 7).unwrap(),
            sample_random(100, 10, 7).unwrap()
        );
    }

    #[test]
    fn random_k_too_large_errors() {
        assert!(sample_random(5, 6, 0).is_err());
    }

    #[test]
    fn random_is_roughly_uniform() {
        let mut counts = [0usize; 10];
        for t in 0..10_000 {
            let s = sample_random(10, 1, t).unwrap();
            counts[s[0]] += 1;
        }
        for &c in &counts {
            assert!((900..=1100).contains(&c), "count {c} outside 1000 +- 100");
        }
    }

    #[test]
    fn clique_exact_fit_takes_whole_largest_clique() {
        let ds = toy_dataset();
        let s = sample_largest_clique(&ds, 5, 3).unwrap();
        let expected: HashSet<usize> = (0..5)
            .map(|u| ds.user_index(&format!("u{u}")).unwrap())
            .collect();
        assert_eq!(s.iter().copied().collect::<HashSet<_>>(), expected);
    }

    #[test]
    fn clique_overflow_continues_to_next_clique() {
        let ds = toy_dataset();
        let s = sample_largest_clique(&ds, 7, 3).unwrap();
        assert_eq!(s.len(), 7);
        let a_users: HashSet<usize> = (0..5)
            .map(|u| ds.user_index(&format!("u{u}")).unwrap())
            .collect();
        // prefix property: the full largest clique is included
        assert!(a_users.iter().all(|u| s.contains(u)));
        // remaining 2 come from pB's non-overlapping reviewers
        let b_extra: HashSet<usize> = [5, 6, 7]
            .iter()
            .map(|u| ds.user_index(&format!("u{u}")).unwrap())
            .collect();
        assert_eq!(s.iter().filter(|u| b_extra.contains(u)).count(), 2);
    }

    #[test]
    fn clique_distinct_and_existing() {
        let ds = toy_dataset();
        for seed in 0..20 {
            let s = sample_largest_clique(&ds, 6, seed).unwrap();
            let set: HashSet<usize> = s.iter().copied().collect();
            assert_eq!(set.len(), 6);
            assert!(set.iter().all(|&u| u < ds.n_users()));
        }
    }

    #[test]
    fn clique_k_too_large_errors() {
        let ds = toy_dataset();
        assert!(sample_largest_clique(&ds, 9, 0).is_err());
    }

    #[test]
    fn budget_resolution() {
        let b = Budget::new(0.025).unwrap();
        assert_eq!(b.resolve(2000), 50);
        assert_eq!(b.resolve(10), 2); // min 2
        assert!(Budget::new(0.0).is_err());
        assert!(Budget::new(1.0).is_err());
    }
}
