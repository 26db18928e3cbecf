//! The `sample`, `evaluate`, `bench-estimators` and `oracle-check` commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::LoadedConfig;
use crate::checks::{run_suite, zo_config, CheckResult, EstimatorProblem, OracleSuite};
use crate::error::{Error, Result};
use crate::graphs::io::{read_graphs, write_records, GraphRecord};
use crate::graphs::rewards::constraint_reward;
use crate::guidance::ControllerKind;
use crate::metrics::{evaluate as evaluate_samples, EvalContext, EvalReport};
use crate::sampler::batch_sample;
use crate::state::GraphState;

pub const GRAPHS_FILE: &str = "graphs.jsonl";
pub const BASELINE_FILE: &str = "baseline.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const RESULT_FILE: &str = "result.json";

/// Everything needed to rerun a `sample` invocation exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub version: String,
    pub config_digest: String,
    pub config: String,
    pub seed: u64,
    pub n_chains: usize,
    pub controller: String,
    pub reward_evals_total: usize,
    pub wall_clock_secs: f64,
    pub final_denoised: bool,
    pub chain_errors: Vec<String>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Default)]
pub struct SampleArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub out: Option<PathBuf>,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Samples graphs under the configured constraint and writes the graphs, the
/// metrics and a [`ResultRecord`] to the output directory. Chains that fail
/// are logged and recorded; if any failed, the first error is returned after
/// the outputs are written.
pub fn sample(args: &SampleArgs) -> Result<ResultRecord> {
    let started = Instant::now();
    let loaded = LoadedConfig::load(&args.config)?;
    let seed = args.seed.unwrap_or(loaded.config.seed);
    let n_chains = args.chains.unwrap_or(loaded.config.n_chains);
    let out = args
        .out
        .clone()
        .or_else(|| loaded.config.output.as_ref().map(|p| loaded.resolve(p)))
        .ok_or_else(|| Error::Config("no output directory: pass --out or set `output`".into()))?;

    let exp = loaded.build()?;
    let reward = constraint_reward(&exp.constraint)?;
    let cfg = loaded.sampler_config(seed)?;
    log::info!(
        "sampling {n_chains} chains with {} (k = {})",
        cfg.controller.kind.name(),
        cfg.controller.k
    );
    let batch = batch_sample(exp.model.as_ref(), Some(reward.as_ref()), &cfg, n_chains, seed)?;
    let finals = batch.finals();
    let reward_evals_total = batch.reward_evals_total();
    let errors: Vec<String> = batch.errors().map(|(i, e)| format!("chain {i}: {e}")).collect();

    create_dir(&out)?;
    let z = exp.sensitive();
    let records: Vec<GraphRecord> = finals.iter().map(|g| GraphRecord::from_state(g, z)).collect();
    write_records(&out.join(GRAPHS_FILE), &records)?;

    let baseline = if loaded.config.baseline {
        let plain = batch_sample(exp.model.as_ref(), None, &cfg, n_chains, seed)?;
        let graphs = plain.finals();
        let records: Vec<GraphRecord> = graphs.iter().map(|g| GraphRecord::from_state(g, z)).collect();
        write_records(&out.join(BASELINE_FILE), &records)?;
        Some(graphs)
    } else {
        None
    };

    let first_error = batch.chains.into_iter().find_map(|c| c.err());
    if finals.is_empty() {
        return Err(first_error.unwrap_or_else(|| Error::Numerical("no chain finished".into())));
    }
    let report = evaluate_samples(
        &finals,
        &exp.constraint,
        EvalContext {
            reference: exp.dataset.as_deref(),
            unconstrained: baseline.as_deref(),
            communities: exp.communities.as_ref(),
        },
    )?;
    write_json(&out.join(METRICS_FILE), &report)?;

    let record = ResultRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: loaded.digest(),
        config: loaded.text.clone(),
        seed,
        n_chains,
        controller: cfg.controller.kind.name().to_string(),
        reward_evals_total,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        final_denoised: cfg.final_denoise,
        chain_errors: errors,
        report,
    };
    write_json(&out.join(RESULT_FILE), &record)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(record),
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateArgs {
    pub config: PathBuf,
    pub samples: PathBuf,
    /// Defaults to the atoms of an empirical prior.
    pub reference: Option<PathBuf>,
    pub unconstrained: Option<PathBuf>,
}

fn load_states(path: &Path) -> Result<Vec<GraphState>> {
    Ok(read_graphs(path)?.into_iter().map(|(g, _)| g).collect())
}

/// Scores a sample file against the constraint of a config.
pub fn evaluate(args: &EvaluateArgs) -> Result<EvalReport> {
    let loaded = LoadedConfig::load(&args.config)?;
    let exp = loaded.build()?;
    let samples = load_states(&args.samples)?;
    let reference = match &args.reference {
        Some(p) => Some(load_states(p)?),
        None => exp.dataset.clone(),
    };
    let unconstrained = args.unconstrained.as_deref().map(load_states).transpose()?;
    evaluate_samples(
        &samples,
        &exp.constraint,
        EvalContext {
            reference: reference.as_deref(),
            unconstrained: unconstrained.as_deref(),
            communities: exp.communities.as_ref(),
        },
    )
}

/// One `metric<TAB>value` line per reported number, in a fixed order.
pub fn report_table(report: &EvalReport) -> String {
    let mut rows: Vec<(String, f64)> = vec![
        ("n_samples".into(), report.n_samples as f64),
        ("val_c".into(), report.val_c),
    ];
    if let Some(d) = report.delta_mmd {
        rows.push(("delta_mmd".into(), d));
    }
    for (k, v) in &report.delta_mmd_by_stat {
        rows.push((format!("delta_mmd.{k}"), *v));
    }
    if let Some(a) = report.accuracy {
        rows.push(("accuracy".into(), a));
    }
    if let Some(u) = report.pct_unique {
        rows.push(("pct_unique".into(), u));
    }
    if let Some(f) = &report.fairness_summary {
        rows.push(("delta_dp.mean".into(), f.delta_dp.mean));
        rows.push(("delta_dp.std".into(), f.delta_dp.std));
        rows.push(("delta_dp_node.mean".into(), f.delta_dp_node.mean));
        rows.push(("delta_dp_node.std".into(), f.delta_dp_node.std));
    }
    for (k, v) in &report.aux_counts {
        rows.push((k.clone(), *v));
    }
    let mut s = String::from("metric\tvalue\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k}\t{v}");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub controller: String,
    pub n_candidates: usize,
    pub reward_evals: usize,
    pub cosine: f64,
    pub variance: f64,
}

/// Directional accuracy and variance of every zeroth-order controller on the
/// built-in smooth problem, with the smoothing radius held at `mu`.
pub fn bench_estimators(samples: usize, mu: f64, seed: u64) -> Result<Vec<BenchRow>> {
    let problem = EstimatorProblem::new(seed)?;
    let setups = [
        (ControllerKind::OnePoint, 1),
        (ControllerKind::TwoPoint, 1),
        (ControllerKind::MultiPoint, 4),
        (ControllerKind::MultiPoint, 16),
        (ControllerKind::BestOfN, 4),
        (ControllerKind::BestOfN, 16),
    ];
    let mut rows = Vec::new();
    for (kind, n) in setups {
        let cfg = zo_config(kind, mu).with_candidates(n);
        cfg.validate()?;
        let s = problem.stats(&cfg, samples, seed.wrapping_add(1))?;
        rows.push(BenchRow {
            controller: kind.name().to_string(),
            n_candidates: n,
            reward_evals: cfg.evals_per_step(),
            cosine: s.cosine_to_reference,
            variance: s.empirical_variance,
        });
    }
    Ok(rows)
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut s = String::from("controller\tn\tevals\tcosine\tvariance\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:.6}\t{:.6e}",
            r.controller, r.n_candidates, r.reward_evals, r.cosine, r.variance
        );
    }
    s
}

/// Runs the named suites in order.
pub fn oracle_check(suites: &[OracleSuite], seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for &s in suites {
        out.extend(run_suite(s, seed)?);
    }
    Ok(out)
}
