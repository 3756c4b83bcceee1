//! End-to-end orchestration: sample a label budget, compute potentials,
//! sparsify, run belief propagation and score the spammer ranking.
//!
//! The seven run settings differ in how node and edge potentials are
//! produced (ML forest vs. unsupervised threshold scores), which sampler
//! spends the budget, and whether the bursty time filter is applied.
//! Setting 1 ranks users by the node forest's probability alone, without
//! any graph work. Metrics are computed over the unlabeled users.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::active::{sample_largest_clique, sample_random, Budget, Sampling};
use crate::data_model::{ClassLabel, Dataset};
use crate::error::{CrsdError, Result};
use crate::features::{feature_matrix, FeatureMatrix};
use crate::forest::{Forest, ForestParams};
use crate::graph::{
    build_clique_graph, bursty_filter, trusted_sparsify, SparsifyParams, UserGraph,
};
use crate::lbp::{run_lbp, LbpParams, Pmrf};
use crate::metrics::{auc, average_precision, ndcg_at_k, precision_at_k, RankedResult};
use crate::potentials::{
    ml_edge_probs, ml_node_potentials, threshold_edge_probs, threshold_node_potentials,
    threshold_spam_scores, train_edge_forest, EdgeProbs, NodePotentials,
};
use crate::synth::{generate, SynthParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeMode {
    Ml,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    Ml,
    Threshold,
    None,
}

/// One row of the run-configuration table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Setting {
    pub id: u8,
    pub node_mode: NodeMode,
    pub edge_mode: EdgeMode,
    pub sampling: Sampling,
    pub bursty: bool,
}

impl Setting {
    pub fn from_id(id: u8) -> Result<Setting> {
        use EdgeMode as E;
        use NodeMode as N;
        use Sampling as S;
        let (node_mode, edge_mode, sampling, bursty) = match id {
            1 => (N::Ml, E::None, S::Random, false),
            2 => (N::Ml, E::Threshold, S::Random, false),
            3 => (N::Threshold, E::Ml, S::Random, false),
            4 => (N::Ml, E::Ml, S::Random, false),
            5 => (N::Ml, E::Ml, S::Clique, false),
            6 => (N::Ml, E::Ml, S::Random, true),
            7 => (N::Ml, E::Ml, S::Clique, true),
            other => {
                return Err(CrsdError::InvalidConfig(format!(
                    "setting must be 1..=7, got {other}"
                )))
            }
        };
        Ok(Setting {
            id,
            node_mode,
            edge_mode,
            sampling,
            bursty,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DataSource {
    Path(PathBuf),
    Synth(SynthParams),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSource,
    pub setting: u8,
    pub budget_fraction: f64,
    pub seeds: Vec<u64>,
    pub forest: ForestParams,
    pub lbp: LbpParams,
    pub sparsify: SparsifyParams,
    /// Classification threshold on the spam belief.
    pub tau: f64,
}

impl RunConfig {
    pub fn defaults(data: DataSource, setting: u8) -> RunConfig {
        RunConfig {
            data,
            setting,
            budget_fraction: 0.025,
            seeds: (0..10).collect(),
            forest: ForestParams::default(),
            lbp: LbpParams::default(),
            sparsify: SparsifyParams::default(),
            tau: 0.5,
        }
    }
}

/// Metrics for one seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub n_labeled: usize,
    pub n_evaluated: usize,
    pub auc: f64,
    pub average_precision: f64,
    pub precision_at: BTreeMap<usize, f64>,
    pub ndcg_at: BTreeMap<usize, f64>,
    /// NDCG@k for k = 1..=min(1000, n_evaluated); index i holds k = i + 1.
    pub ndcg_curve: Vec<f64>,
    pub lbp_iterations: usize,
    pub lbp_converged: bool,
    /// labeled user ids, for reproducibility audits.
    pub labeled_users: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_auc: f64,
    pub std_auc: f64,
    pub mean_ap: f64,
    pub std_ap: f64,
}

/// Full result of one configuration: resolved config plus per-seed records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub setting: Setting,
    pub records: Vec<SeedRecord>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Precomputed per-dataset artifacts shared across seeds and settings.
pub struct Prepared {
    pub dataset: Dataset,
    pub features: FeatureMatrix,
    pub graph: UserGraph,
    pub spam_scores: Vec<f64>,
}

impl Prepared {
    pub fn from_source(data: &DataSource) -> Result<Prepared> {
        let dataset = match data {
            DataSource::Path(p) => Dataset::load_tsv(p)?,
            DataSource::Synth(sp) => generate(sp)?,
        };
        Ok(Self::from_dataset(dataset))
    }

    pub fn from_dataset(dataset: Dataset) -> Prepared {
        let features = feature_matrix(&dataset);
        let graph = build_clique_graph(&dataset);
        let spam_scores = threshold_spam_scores(&features);
        Prepared {
            dataset,
            features,
            graph,
            spam_scores,
        }
    }
}

/// Run one (setting, budget) configuration across all seeds.
pub fn run_setting(cfg: &RunConfig) -> Result<RunReport> {
    let prepared = Prepared::from_source(&cfg.data)?;
    run_setting_prepared(cfg, &prepared)
}

pub fn run_setting_prepared(cfg: &RunConfig, prepared: &Prepared) -> Result<RunReport> {
    let setting = Setting::from_id(cfg.setting)?;
    if cfg.seeds.is_empty() {
        return Err(CrsdError::InvalidConfig(
            "at least one seed required".into(),
        ));
    }
    if !(0.0 < cfg.tau && cfg.tau < 1.0) {
        return Err(CrsdError::InvalidConfig(format!(
            "tau must be in (0,1), got {}",
            cfg.tau
        )));
    }
    let budget = Budget::new(cfg.budget_fraction)?;

    let mut records = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        records.push(run_one_seed(cfg, &setting, prepared, budget, seed)?);
    }

    let aucs: Vec<f64> = records.iter().map(|r| r.auc).collect();
    let aps: Vec<f64> = records.iter().map(|r| r.average_precision).collect();
    let (mean_auc, std_auc) = mean_std(&aucs);
    let (mean_ap, std_ap) = mean_std(&aps);

    Ok(RunReport {
        config: cfg.clone(),
        setting,
        records,
        aggregate: Aggregate {
            mean_auc,
            std_auc,
            mean_ap,
            std_ap,
        },
    })
}

fn run_one_seed(
    cfg: &RunConfig,
    setting: &Setting,
    prepared: &Prepared,
    budget: Budget,
    seed: u64,
) -> Result<SeedRecord> {
    let ds = &prepared.dataset;
    let fm = &prepared.features;
    let n = ds.n_users();
    let k = budget.resolve(n);

    let labeled_idx = match setting.sampling {
        Sampling::Random => sample_random(n, k, seed)?,
        Sampling::Clique => sample_largest_clique(ds, k, seed)?,
    };
    let labeled: HashMap<usize, ClassLabel> =
        labeled_idx.iter().map(|&u| (u, ds.user_label(u))).collect();

    let forest_params = ForestParams {
        seed: cfg.forest.seed.wrapping_add(seed.wrapping_mul(0x9e37_79b9)),
        ..cfg.forest.clone()
    };

    // node potentials
    let node_potentials: NodePotentials = match setting.node_mode {
        NodeMode::Ml => {
            let rows: Vec<&[f64]> = labeled_idx.iter().map(|&u| fm.row(u)).collect();
            let y: Vec<ClassLabel> = labeled_idx.iter().map(|&u| ds.user_label(u)).collect();
            let forest = Forest::train(&rows, &y, &forest_params)?;
            ml_node_potentials(&forest, fm, &labeled)?
        }
        NodeMode::Threshold => threshold_node_potentials(&prepared.spam_scores, &labeled),
    };

    // setting 1: rank by node probability alone
    let (scores, truth, lbp_iterations, lbp_converged) = if setting.edge_mode == EdgeMode::None {
        let mut scores = Vec::new();
        let mut truth = Vec::new();
        for u in 0..n {
            if !labeled.contains_key(&u) {
                scores.push(node_potentials.a[u]);
                truth.push(ds.user_label(u));
            }
        }
        (scores, truth, 0, true)
    } else {
        let graph = if setting.bursty {
            bursty_filter(&prepared.graph, cfg.sparsify.t_days)
        } else {
            prepared.graph.clone()
        };

        let edge_probs: EdgeProbs = match setting.edge_mode {
            EdgeMode::Ml => {
                let edge_forest = train_edge_forest(fm, &labeled, &graph, &forest_params)?;
                ml_edge_probs(&edge_forest, fm, &graph, &labeled)?
            }
            EdgeMode::Threshold => threshold_edge_probs(&prepared.spam_scores, &graph, &labeled),
            EdgeMode::None => unreachable!(),
        };

        let mut graph = graph;
        graph.set_edge_probs(&edge_probs.0);
        let trusted = trusted_sparsify(&graph, cfg.sparsify.lo, cfg.sparsify.hi)?;
        let kept_probs: Vec<f64> = trusted.edges().iter().map(|e| e.prob.unwrap()).collect();

        let m = Pmrf::new(trusted, node_potentials, EdgeProbs(kept_probs))?;
        let out = run_lbp(&m, &cfg.lbp);

        let mut scores = Vec::new();
        let mut truth = Vec::new();
        for u in 0..n {
            if !labeled.contains_key(&u) {
                scores.push(out.beliefs.0[u][0]);
                truth.push(ds.user_label(u));
            }
        }
        (scores, truth, out.iterations, out.converged)
    };

    let ranked = RankedResult::new(&scores, &truth)?;
    let mut precision_at = BTreeMap::new();
    let mut ndcg_at = BTreeMap::new();
    for k in (100..=1000).step_by(100) {
        if k <= ranked.labels.len() {
            precision_at.insert(k, precision_at_k(&ranked, k)?);
            ndcg_at.insert(k, ndcg_at_k(&ranked, k)?);
        }
    }
    let mut ndcg_curve = Vec::new();
    for k in 1..=ranked.labels.len().min(1000) {
        ndcg_curve.push(ndcg_at_k(&ranked, k)?);
    }

    Ok(SeedRecord {
        seed,
        n_labeled: k,
        n_evaluated: scores.len(),
        auc: auc(&scores, &truth)?,
        average_precision: average_precision(&scores, &truth)?,
        precision_at,
        ndcg_at,
        ndcg_curve,
        lbp_iterations,
        lbp_converged,
        labeled_users: labeled_idx
            .iter()
            .map(|&u| ds.user_id(u).to_string())
            .collect(),
    })
}

/// Consolidated tables from a directory of run reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportTables {
    /// (setting, budget) -> aggregate.
    pub summary: Vec<SummaryRow>,
    /// per-k curves averaged over seeds.
    pub curves: Vec<CurveRow>,
    /// dense NDCG curve (k = 1..=1000) averaged over seeds.
    pub ndcg_curves: Vec<NdcgCurveRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NdcgCurveRow {
    pub setting: u8,
    pub budget_fraction: f64,
    pub k: usize,
    pub mean_ndcg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: u8,
    pub budget_fraction: f64,
    pub n_seeds: usize,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub mean_ap: f64,
    pub std_ap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRow {
    pub setting: u8,
    pub budget_fraction: f64,
    pub k: usize,
    pub mean_precision: f64,
    pub mean_ndcg: f64,
}

/// Read every `*.json` run report in a directory and consolidate.
pub fn report(results_dir: &std::path::Path) -> Result<ReportTables> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(results_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut reports = Vec::new();
    for p in &paths {
        let text = std::fs::read_to_string(p)?;
        if let Ok(r) = serde_json::from_str::<RunReport>(&text) {
            reports.push(r);
        }
    }
    if reports.is_empty() {
        return Err(CrsdError::InvalidConfig(format!(
            "no run reports found in {}",
            results_dir.display()
        )));
    }

    let mut summary = Vec::new();
    let mut curves = Vec::new();
    let mut ndcg_curves = Vec::new();
    for r in &reports {
        let max_len = r
            .records
            .iter()
            .map(|rec| rec.ndcg_curve.len())
            .max()
            .unwrap_or(0);
        for k in 1..=max_len {
            let vals: Vec<f64> = r
                .records
                .iter()
                .filter_map(|rec| rec.ndcg_curve.get(k - 1))
                .copied()
                .collect();
            ndcg_curves.push(NdcgCurveRow {
                setting: r.setting.id,
                budget_fraction: r.config.budget_fraction,
                k,
                mean_ndcg: vals.iter().sum::<f64>() / vals.len() as f64,
            });
        }
        summary.push(SummaryRow {
            setting: r.setting.id,
            budget_fraction: r.config.budget_fraction,
            n_seeds: r.records.len(),
            mean_auc: r.aggregate.mean_auc,
            std_auc: r.aggregate.std_auc,
            mean_ap: r.aggregate.mean_ap,
            std_ap: r.aggregate.std_ap,
        });
        let mut ks: Vec<usize> = r
            .records
            .first()
            .map(|rec| rec.precision_at.keys().copied().collect())
            .unwrap_or_default();
        ks.sort_unstable();
        for k in ks {
            let ps: Vec<f64> = r
                .records
                .iter()
                .filter_map(|rec| rec.precision_at.get(&k))
                .copied()
                .collect();
            let ns: Vec<f64> = r
                .records
                .iter()
                .filter_map(|rec| rec.ndcg_at.get(&k))
                .copied()
                .collect();
            if ps.is_empty() {
                continue;
            }
            curves.push(CurveRow {
                setting: r.setting.id,
                budget_fraction: r.config.budget_fraction,
                k,
                mean_precision: ps.iter().sum::<f64>() / ps.len() as f64,
                mean_ndcg: ns.iter().sum::<f64>() / ns.len() as f64,
            });
        }
    }
    summary.sort_by(|a, b| {
        (a.setting, a.budget_fraction)
            .partial_cmp(&(b.setting, b.budget_fraction))
            .unwrap()
    });
    Ok(ReportTables {
        summary,
        curves,
        ndcg_curves,
    })
}

pub fn write_report_csv(tables: &ReportTables, w: &mut impl std::io::Write) -> Result<()> {
    writeln!(w, "setting,budget,n_seeds,mean_auc,std_auc,mean_ap,std_ap")?;
    for r in &tables.summary {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.setting, r.budget_fraction, r.n_seeds, r.mean_auc, r.std_auc, r.mean_ap, r.std_ap
        )?;
    }
    Ok(())
}

pub fn write_ndcg_curve_csv(tables: &ReportTables, w: &mut impl std::io::Write) -> Result<()> {
    writeln!(w, "setting,budget,k,mean_ndcg")?;
    for r in &tables.ndcg_curves {
        writeln!(
            w,
            "{},{},{},{}",
            r.setting, r.budget_fraction, r.k, r.mean_ndcg
        )?;
    }
    Ok(())
}

pub fn write_curves_csv(tables: &ReportTables, w: &mut impl std::io::Write) -> Result<()> {
    writeln!(w, "setting,budget,k,mean_precision,mean_ndcg")?;
    for r in &tables.curves {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.setting, r.budget_fraction, r.k, r.mean_precision, r.mean_ndcg
        )?;
    }
    Ok(())
}
