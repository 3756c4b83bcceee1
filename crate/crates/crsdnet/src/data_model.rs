//! Review dataset representation, TSV ingestion and user-level label derivation.
//!
//! A user is labeled a spammer iff they authored at least one platform-filtered
//! review; everyone else is benign. Users and products are indexed by dense
//! ids sorted lexicographically, so the index layout does not depend on the
//! order in which reviews appear in the input file.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{CrsdError, Result};

/// Binary user class: spammer (+1) or benign (-1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    Spammer,
    Benign,
}

impl ClassLabel {
    pub fn sign(self) -> i8 {
        match self {
            ClassLabel::Spammer => 1,
            ClassLabel::Benign => -1,
        }
    }

    pub fn is_spammer(self) -> bool {
        matches!(self, ClassLabel::Spammer)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::Spammer => write!(f, "spammer"),
            ClassLabel::Benign => write!(f, "benign"),
        }
    }
}

/// A single product review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub user_id: String,
    pub product_id: String,
    /// Star rating in 1..=5.
    pub rating: u8,
    pub date: NaiveDate,
    /// Platform-filtered flag; filtered reviews are treated as fake.
    pub filtered: bool,
    pub text: String,
}

/// Immutable review dataset with user/product indices and derived user labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    reviews: Vec<Review>,
    /// user id -> indices into `reviews`, keys sorted lexicographically.
    users: IndexMap<String, Vec<usize>>,
    /// product id -> indices into `reviews`, keys sorted lexicographically.
    products: IndexMap<String, Vec<usize>>,
    /// Parallel to `users`: derived class labels.
    labels: Vec<ClassLabel>,
}

/// Summary counts for a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_reviews: usize,
    pub n_users: usize,
    pub n_products: usize,
    pub fake_review_pct: f64,
    pub spammer_pct: f64,
}

fn date_in_range(d: NaiveDate) -> bool {
    let lo = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
    let hi = NaiveDate::from_ymd_opt(2100, 1, 1).unwrap();
    d >= lo && d <= hi
}

impl Dataset {
    /// Build a dataset from raw reviews, constructing indices and labels.
    pub fn from_reviews(reviews: Vec<Review>) -> Result<Self> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, r) in reviews.iter().enumerate() {
            if !(1..=5).contains(&r.rating) {
                return Err(CrsdError::Parse {
                    line: i + 2,
                    reason: format!("rating {} out of range 1..5", r.rating),
                });
            }
            if !date_in_range(r.date) {
                return Err(CrsdError::Parse {
                    line: i + 2,
                    reason: format!("date {} outside 1990-01-01..2100-01-01", r.date),
                });
            }
            if let Some(_prev) = seen.insert(&r.review_id, i) {
                return Err(CrsdError::DuplicateReview {
                    id: r.review_id.clone(),
                    line: i + 2,
                });
            }
        }

        let mut users: IndexMap<String, Vec<usize>> = IndexMap::new();
        let mut products: IndexMap<String, Vec<usize>> = IndexMap::new();
        for (i, r) in reviews.iter().enumerate() {
            users.entry(r.user_id.clone()).or_default().push(i);
            products.entry(r.product_id.clone()).or_default().push(i);
        }
        users.sort_keys();
        products.sort_keys();

        let labels = users
            .values()
            .map(|idxs| {
                if idxs.iter().any(|&i| reviews[i].filtered) {
                    ClassLabel::Spammer
                } else {
                    ClassLabel::Benign
                }
            })
            .collect();

        Ok(Dataset {
            reviews,
            users,
            products,
            labels,
        })
    }

    /// Load the canonical TSV format (header row required, 7 fields per row).
    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut reviews = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                // header
                continue;
            }
            if line.is_empty() {
                continue;
            }
            reviews.push(parse_row(&line, lineno + 1)?);
        }
        Self::from_reviews(reviews)
    }

    /// Write the canonical TSV format. Round-trips exactly through `load_tsv`.
    pub fn write_tsv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "review_id\tuser_id\tproduct_id\trating\tdate\tfiltered\ttext"
        )?;
        for r in &self.reviews {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.review_id,
                r.user_id,
                r.product_id,
                r.rating,
                r.date.format("%Y-%m-%d"),
                if r.filtered { 1 } else { 0 },
                escape_text(&r.text)
            )?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_tsv(&mut f)
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    /// User ids in index order.
    pub fn user_ids(&self) -> impl Iterator<Item = &str> {
        self.users.keys().map(String::as_str)
    }

    pub fn user_id(&self, user: usize) -> &str {
        self.users.get_index(user).unwrap().0
    }

    pub fn product_id(&self, product: usize) -> &str {
        self.products.get_index(product).unwrap().0
    }

    pub fn user_index(&self, user_id: &str) -> Option<usize> {
        self.users.get_index_of(user_id)
    }

    pub fn product_index(&self, product_id: &str) -> Option<usize> {
        self.products.get_index_of(product_id)
    }

    /// Review indices authored by the given user.
    pub fn user_reviews(&self, user: usize) -> &[usize] {
        self.users.get_index(user).unwrap().1
    }

    /// Review indices for the given product.
    pub fn product_reviews(&self, product: usize) -> &[usize] {
        self.products.get_index(product).unwrap().1
    }

    pub fn user_label(&self, user: usize) -> ClassLabel {
        self.labels[user]
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn review_index(&self, review_id: &str) -> Option<usize> {
        self.reviews.iter().position(|r| r.review_id == review_id)
    }

    pub fn stats(&self) -> DatasetStats {
        let n_reviews = self.reviews.len();
        let n_fake = self.reviews.iter().filter(|r| r.filtered).count();
        let n_spammers = self.labels.iter().filter(|l| l.is_spammer()).count();
        DatasetStats {
            n_reviews,
            n_users: self.users.len(),
            n_products: self.products.len(),
            fake_review_pct: if n_reviews == 0 {
                0.0
            } else {
                100.0 * n_fake as f64 / n_reviews as f64
            },
            spammer_pct: if self.users.is_empty() {
                0.0
            } else {
                100.0 * n_spammers as f64 / self.users.len() as f64
            },
        }
    }
}

fn parse_row(line: &str, lineno: usize) -> Result<Review> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 7 {
        return Err(CrsdError::Parse {
            line: lineno,
            reason: format!("expected 7 tab-separated fields, got {}", fields.len()),
        });
    }
    let rating: u8 = fields[3].parse().map_err(|_| CrsdError::Parse {
        line: lineno,
        reason: format!("bad rating `{}`", fields[3]),
    })?;
    let date = NaiveDate::parse_from_str(fields[4], "%Y-%m-%d").map_err(|_| CrsdError::Parse {
        line: lineno,
        reason: format!("bad date `{}`", fields[4]),
    })?;
    let filtered = match fields[5] {
        "0" => false,
        "1" => true,
        other => {
            return Err(CrsdError::Parse {
                line: lineno,
                reason: format!("bad filtered flag `{other}` (expected 0 or 1)"),
            })
        }
    };
    Ok(Review {
        review_id: fields[0].to_string(),
        user_id: fields[1].to_string(),
        product_id: fields[2].to_string(),
        rating,
        date,
        filtered,
        text: unescape_text(fields[6]),
    })
}

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn review(
        id: &str,
        user: &str,
        product: &str,
        rating: u8,
        date: &str,
        filtered: bool,
    ) -> Review {
        Review {
            review_id: id.to_string(),
            user_id: user.to_string(),
            product_id: product.to_string(),
            rating,
            date: NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap(),
            filtered,
            text: String::new(),
        }
    }

    #[test]
    fn indices_and_counts() {
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 5, "2015-01-01", false),
            review("r2", "u1", "p1", 4, "2015-01-02", false),
            review("r3", "u2", "p1", 1, "2015-01-03", false),
        ])
        .unwrap();
        assert_eq!(ds.n_users(), 2);
        assert_eq!(ds.n_products(), 1);
        assert_eq!(ds.reviews().len(), 3);
    }

    #[test]
    fn spammer_iff_any_filtered() {
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 5, "2015-01-01", true),
            review("r2", "u1", "p2", 4, "2015-01-02", false),
            review("r3", "u2", "p1", 1, "2015-01-03", false),
        ])
        .unwrap();
        let u1 = ds.user_index("u1").unwrap();
        let u2 = ds.user_index("u2").unwrap();
        assert_eq!(ds.user_label(u1), ClassLabel::Spammer);
        assert_eq!(ds.user_label(u2), ClassLabel::Benign);
    }

    #[test]
    fn empty_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.tsv");
        std::fs::write(
            &path,
            "review_id\tuser_id\tproduct_id\trating\tdate\tfiltered\ttext\n",
        )
        .unwrap();
        let ds = Dataset::load_tsv(&path).unwrap();
        assert_eq!(ds.reviews().len(), 0);
        assert_eq!(ds.n_users(), 0);
    }

    #[test]
    fn duplicate_review_id_rejected() {
        let err = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 5, "2015-01-01", false),
            review("r1", "u2", "p1", 4, "2015-01-02", false),
        ])
        .unwrap_err();
        assert!(matches!(err, CrsdError::DuplicateReview { .. }));
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(
            &path,
            "review_id\tuser_id\tproduct_id\trating\tdate\tfiltered\ttext\nr1\tu1\tp1\t5\t2015-01-01\t0\n",
        )
        .unwrap();
        let err = Dataset::load_tsv(&path).unwrap_err();
        match err {
            CrsdError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rating_out_of_range_rejected() {
        let err = Dataset::from_reviews(vec![review("r1", "u1", "p1", 6, "2015-01-01", false)])
            .unwrap_err();
        assert!(matches!(err, CrsdError::Parse { .. }));
    }

    #[test]
    fn stats_all_filtered() {
        let ds = Dataset::from_reviews(vec![
            review("r1", "u1", "p1", 5, "2015-01-01", true),
            review("r2", "u2", "p1", 4, "2015-01-02", true),
        ])
        .unwrap();
        let s = ds.stats();
        assert_eq!(s.spammer_pct, 100.0);
        assert_eq!(s.fake_review_pct, 100.0);
    }

    #[test]
    fn tsv_round_trip_with_escapes() {
        let mut r = review("r1", "u1", "p1", 3, "2015-06-01", false);
        r.text = "line one\nwith\ttab and \\ backslash".to_string();
        let ds = Dataset::from_reviews(vec![r, review("r2", "u2", "p1", 4, "2015-06-02", true)])
            .unwrap();
        let mut buf = Vec::new();
        ds.write_tsv(&mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.tsv");
        std::fs::write(&path, &buf).unwrap();
        let ds2 = Dataset::load_tsv(&path).unwrap();
        assert_eq!(ds, ds2);
    }

    #[test]
    fn label_is_function_of_own_filtered_flags() {
        let base = vec![
            review("r1", "u1", "p1", 5, "2015-01-01", false),
            review("r2", "u2", "p1", 4, "2015-01-02", false),
            review("r3", "u3", "p2", 2, "2015-01-03", false),
        ];
        let ds = Dataset::from_reviews(base.clone()).unwrap();
        let mut flipped = base;
        flipped[0].filtered = true;
        let ds2 = Dataset::from_reviews(flipped).unwrap();
        for uid in ["u2", "u3"] {
            let a = ds.user_label(ds.user_index(uid).unwrap());
            let b = ds2.user_label(ds2.user_index(uid).unwrap());
            assert_eq!(a, b, "label of {uid} changed");
        }
        assert_eq!(
            ds2.user_label(ds2.user_index("u1").unwrap()),
            ClassLabel::Spammer
        );
    }
}
