//! Command implementations: ingest -> simulate -> renumber -> summarize ->
//! diagnose, wired to the on-disk run layout.
//!
//! A run directory contains `plans_long.csv`, `plans_wide.csv`,
//! `weights.json`, `stats.csv`, `diagnostics.json`, and `diagnostics.txt`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use districter_core::diagnostics::{build_report, DiagnosticsReport};
use districter_core::elections::ElectionSet;
use districter_core::export;
use districter_core::ingest::{load_map, RedistMap};
use districter_core::metrics::{build_stats, StatsOptions, StatsTable};
use districter_core::sampler::{match_numbers, smc_sample, PlanEnsemble};

use crate::config::RunConfig;

pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(dir: &Path) -> RunPaths {
        RunPaths { dir: dir.to_path_buf() }
    }

    pub fn plans_long(&self) -> PathBuf {
        self.dir.join("plans_long.csv")
    }

    pub fn plans_wide(&self) -> PathBuf {
        self.dir.join("plans_wide.csv")
    }

    pub fn weights(&self) -> PathBuf {
        self.dir.join("weights.json")
    }

    pub fn stats(&self) -> PathBuf {
        self.dir.join("stats.csv")
    }

    pub fn diagnostics_json(&self) -> PathBuf {
        self.dir.join("diagnostics.json")
    }

    pub fn diagnostics_txt(&self) -> PathBuf {
        self.dir.join("diagnostics.txt")
    }
}

pub fn load_configured_map(config: &RunConfig) -> Result<RedistMap> {
    load_map(
        &config.data.attributes,
        config.data.adjacency.as_deref(),
        config.data.geometry.as_deref(),
        &config.map_params(),
    )
    .context("loading map")
}

/// Runs the full pipeline and writes every artifact. Nothing is written
/// until sampling, statistics, and diagnostics have all succeeded.
pub fn simulate(
    config: &RunConfig,
    out_override: Option<&Path>,
    seed: Option<u64>,
    chains: Option<usize>,
) -> Result<DiagnosticsReport> {
    let map = load_configured_map(config)?;
    let spec = config.constraint_spec()?;
    let params = config.sampler_params(seed, chains);

    let mut ensemble = smc_sample(&map, &spec, &params).context("sampling")?;

    let mut reference_columns: Vec<String> = Vec::new();
    if let Some(column) = &config.reference.column {
        reference_columns.push(column.clone());
    }
    reference_columns.extend(config.reference.extra.iter().cloned());
    for column in &reference_columns {
        let plan = map
            .reference_plan(column)
            .with_context(|| format!("reference plan column {column:?}"))?;
        ensemble.add_reference(&map, &plan, column)?;
    }
    if let Some(column) = &config.reference.column {
        let reference = map.reference_plan(column)?;
        match_numbers(&mut ensemble, &map, &reference).context("renumbering")?;
    }

    let elections = ElectionSet::discover(&map)?;
    let stats = build_stats(
        &map,
        &ensemble,
        &elections,
        &StatsOptions { per_year: config.elections.per_year },
    )?;
    let report = build_report(
        &ensemble,
        &stats,
        map.pops(),
        &config.diagnostics_config(params.seed),
    )?;

    let paths = RunPaths::new(out_override.unwrap_or(&config.output.dir));
    export::write_plans_long(&paths.plans_long(), &map, &ensemble)?;
    export::write_plans_wide(&paths.plans_wide(), &map, &ensemble)?;
    export::write_weights(&paths.weights(), &ensemble)?;
    export::write_stats(&paths.stats(), &stats)?;
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    export::atomic_write(&paths.diagnostics_json(), &json)?;
    export::atomic_write(&paths.diagnostics_txt(), report.text_summary().as_bytes())?;
    Ok(report)
}

/// Re-loads the stored plans and recomputes the stats file in place.
pub fn summarize(config: &RunConfig, out_override: Option<&Path>) -> Result<StatsTable> {
    let map = load_configured_map(config)?;
    let paths = RunPaths::new(out_override.unwrap_or(&config.output.dir));
    let ensemble = read_run_ensemble(&paths, &map)?;
    let elections = ElectionSet::discover(&map)?;
    let stats = build_stats(
        &map,
        &ensemble,
        &elections,
        &StatsOptions { per_year: config.elections.per_year },
    )?;
    export::write_stats(&paths.stats(), &stats)?;
    Ok(stats)
}

fn read_run_ensemble(paths: &RunPaths, map: &RedistMap) -> Result<PlanEnsemble> {
    let wide = paths.plans_wide();
    let weights = paths.weights();
    if !wide.exists() || !weights.exists() {
        bail!("run artifacts missing in {}", paths.dir.display());
    }
    Ok(export::read_ensemble(&wide, &weights, map)?)
}

pub struct DiagnoseOutcome {
    pub report: DiagnosticsReport,
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Re-verifies every stored plan against the hard constraints and re-runs
/// the convergence gate from the stored artifacts.
pub fn diagnose(config: &RunConfig, out_override: Option<&Path>, strict: bool) -> Result<DiagnoseOutcome> {
    let map = load_configured_map(config)?;
    let paths = RunPaths::new(out_override.unwrap_or(&config.output.dir));
    let ensemble = read_run_ensemble(&paths, &map)?;
    let stats_path = paths.stats();
    if !stats_path.exists() {
        bail!("run artifacts missing: {}", stats_path.display());
    }
    let stats = export::read_stats(&stats_path)?;
    let report = build_report(
        &ensemble,
        &stats,
        map.pops(),
        &config.diagnostics_config(ensemble.seed),
    )?;
    let violations = export::verify_hard_constraints(
        &map,
        &ensemble,
        config.problem.pop_tol,
        config.problem.split_cap_unit.as_deref(),
    )?;
    let rhat_ok = report
        .flags
        .iter()
        .filter(|f| f.check.starts_with("rhat"))
        .all(|f| f.pass);
    let multi_chain = ensemble.chain_ids().len() >= 2;
    let pass = violations.is_empty() && rhat_ok && (!strict || multi_chain);
    Ok(DiagnoseOutcome { report, violations, pass })
}
