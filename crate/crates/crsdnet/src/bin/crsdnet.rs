//! Command-line frontend for the detection pipeline.
//!
//! `ingest` validates a review TSV and prints dataset stats, `synth`
//! writes a synthetic corpus, `features` dumps the feature matrix,
//! `run` executes one run configuration, `fig3` runs the oracle
//! sparsification grid, and `report` consolidates run outputs.
//!
//! A `--config` file holds `key = value` lines that override the
//! corresponding command-line flags.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crsdnet::data_model::Dataset;
use crsdnet::error::{CrsdError, Result};
use crsdnet::features::feature_matrix;
use crsdnet::forest::ForestParams;
use crsdnet::lbp::LbpParams;
use crsdnet::pipeline::{
    report as consolidate, run_setting, write_curves_csv, write_ndcg_curve_csv, write_report_csv,
    DataSource, RunConfig,
};
use crsdnet::synth::{fig3_experiment, generate, Fig3Params, SynthParams};

#[derive(Parser)]
#[command(
    name = "crsdnet",
    version,
    about = "Opinion-spammer detection pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a review TSV and print dataset statistics.
    Ingest {
        /// Review TSV path.
        #[arg(long)]
        data: PathBuf,
    },
    /// Generate a synthetic review corpus.
    Synth {
        /// Output TSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n_users: usize,
        #[arg(long, default_value_t = 100)]
        n_products: usize,
        #[arg(long, default_value_t = 0.2)]
        spam_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the per-user feature matrix as CSV.
    Features {
        #[arg(long)]
        data: PathBuf,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one configuration over a set of seeds and write a JSON report.
    Run {
        /// Review TSV path; omit to run on a synthetic corpus.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Run setting, 1..=7.
        #[arg(long, default_value_t = 4)]
        setting: u8,
        /// Label budget as a fraction of users.
        #[arg(long, default_value_t = 0.025)]
        budget: f64,
        /// Comma-separated seed list.
        #[arg(long, default_value = "0,1,2,3,4,5,6,7,8,9", value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Output JSON path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// `key = value` overrides file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 950)]
        n_trees: usize,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
    },
    /// Oracle-sparsification sensitivity grid on synthetic data.
    Fig3 {
        #[arg(long, default_value_t = 2000)]
        n_users: usize,
        #[arg(long, default_value_t = 0.2)]
        spam_fraction: f64,
        #[arg(long, default_value_t = 5)]
        k_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Consolidate run reports in a directory into summary/curve tables.
    Report {
        /// Directory of run JSON files.
        #[arg(long)]
        results: PathBuf,
        /// Output directory for summary.csv, curves.csv, report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CrsdError::InvalidConfig(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_override<T: std::str::FromStr>(
    map: &HashMap<String, String>,
    key: &str,
    current: T,
) -> Result<T> {
    match map.get(key) {
        None => Ok(current),
        Some(v) => v.parse().map_err(|_| {
            CrsdError::InvalidConfig(format!("config key `{key}`: cannot parse `{v}`"))
        }),
    }
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(p, content)?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { data } => {
            let ds = Dataset::load_tsv(&data)?;
            let stats = ds.stats();
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::Synth {
            out,
            n_users,
            n_products,
            spam_fraction,
            seed,
        } => {
            let params = SynthParams {
                n_users,
                n_products,
                spam_fraction,
                seed,
                ..Default::default()
            };
            let ds = generate(&params)?;
            ds.save_tsv(&out)?;
            eprintln!(
                "wrote {} reviews for {} users to {}",
                ds.reviews().len(),
                ds.n_users(),
                out.display()
            );
        }
        Command::Features { data, out } => {
            let ds = Dataset::load_tsv(&data)?;
            let fm = feature_matrix(&ds);
            let mut buf = Vec::new();
            fm.write_csv(&mut buf)?;
            write_or_print(&out, &String::from_utf8_lossy(&buf))?;
        }
        Command::Run {
            data,
            setting,
            budget,
            seeds,
            out,
            config,
            n_trees,
            tau,
        } => {
            let overrides = match &config {
                Some(p) => parse_config_file(p)?,
                None => HashMap::new(),
            };
            let setting = parse_override(&overrides, "setting", setting)?;
            let budget = parse_override(&overrides, "budget", budget)?;
            let n_trees = parse_override(&overrides, "n_trees", n_trees)?;
            let tau = parse_override(&overrides, "tau", tau)?;
            let seeds = match overrides.get("seeds") {
                Some(v) => v
                    .split(',')
                    .map(|s| s.trim().parse::<u64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| {
                        CrsdError::InvalidConfig(format!("config key `seeds`: cannot parse `{v}`"))
                    })?,
                None => seeds,
            };
            let data = match overrides.get("data") {
                Some(v) => Some(PathBuf::from(v)),
                None => data,
            };

            let source = match data {
                Some(p) => DataSource::Path(p),
                None => DataSource::Synth(SynthParams {
                    seed: parse_override(&overrides, "synth_seed", 0u64)?,
                    ..Default::default()
                }),
            };
            let cfg = RunConfig {
                data: source,
                setting,
                budget_fraction: budget,
                seeds,
                forest: ForestParams {
                    n_trees,
                    ..Default::default()
                },
                lbp: LbpParams::default(),
                sparsify: Default::default(),
                tau,
            };
            let report = run_setting(&cfg)?;
            eprintln!(
                "setting {} budget {}: mean AUC {:.4} (+-{:.4}), mean AP {:.4}",
                report.setting.id,
                report.config.budget_fraction,
                report.aggregate.mean_auc,
                report.aggregate.std_auc,
                report.aggregate.mean_ap
            );
            write_or_print(&out, &report.to_json()?)?;
        }
        Command::Fig3 {
            n_users,
            spam_fraction,
            k_max,
            seed,
            out,
        } => {
            let synth = SynthParams {
                n_users,
                spam_fraction,
                seed,
                ..Default::default()
            };
            let ds = generate(&synth)?;
            let params = Fig3Params {
                seed,
                ..Default::default()
            };
            let ks: Vec<usize> = (0..=k_max).collect();
            let grid = fig3_experiment(&ds, &ks, &ks, &params, &LbpParams::default())?;
            let mut csv = String::from("k1,k2,auc\n");
            for cell in &grid {
                csv.push_str(&format!("{},{},{}\n", cell.k1, cell.k2, cell.auc));
            }
            write_or_print(&out, &csv)?;
        }
        Command::Report { results, out } => {
            let tables = consolidate(&results)?;
            let mut summary = Vec::new();
            write_report_csv(&tables, &mut summary)?;
            let mut curves = Vec::new();
            write_curves_csv(&tables, &mut curves)?;
            let mut ndcg_curve = Vec::new();
            write_ndcg_curve_csv(&tables, &mut ndcg_curve)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("summary.csv"), &summary)?;
                    std::fs::write(dir.join("curves.csv"), &curves)?;
                    std::fs::write(dir.join("ndcg_curve.csv"), &ndcg_curve)?;
                    std::fs::write(
                        dir.join("report.json"),
                        serde_json::to_string_pretty(&tables)?,
                    )?;
                    eprintln!(
                        "wrote summary.csv, curves.csv, ndcg_curve.csv, report.json to {}",
                        dir.display()
                    );
                }
                None => {
                    print!("{}", String::from_utf8_lossy(&summary));
                    print!("{}", String::from_utf8_lossy(&curves));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
