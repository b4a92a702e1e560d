//! Run configuration: one TOML document describing data paths, problem
//! parameters, constraints, sampler settings, and outputs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use districter_core::constraints::{ConstraintSpec, SoftTerm};
use districter_core::diagnostics::DiagnosticsConfig;
use districter_core::ingest::MapParams;
use districter_core::sampler::SamplerParams;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub problem: ProblemSection,
    pub sampler: SamplerSection,
    #[serde(default)]
    pub constraints: Vec<ConstraintSection>,
    #[serde(default)]
    pub elections: ElectionsSection,
    #[serde(default)]
    pub reference: ReferenceSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub attributes: PathBuf,
    pub adjacency: Option<PathBuf>,
    pub geometry: Option<PathBuf>,
    /// Snapping tolerance for shared-segment detection, in input units.
    #[serde(default)]
    pub snap_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub ndists: u16,
    pub pop_tol: f64,
    /// Admin-unit vector whose splits are hard-capped at ndists - 1
    /// ("county", "muni", or "county_muni"). Omit for no cap.
    #[serde(default)]
    pub split_cap_unit: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub nsims: usize,
    pub nchains: usize,
    pub seed: u64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_resample_rule")]
    pub resample_rule: f64,
    #[serde(default = "default_max_retry")]
    pub max_retry: usize,
}

fn default_rho() -> f64 {
    1.0
}

fn default_resample_rule() -> f64 {
    0.5
}

fn default_max_retry() -> usize {
    32
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSection {
    /// Penalize shortfall of a group share against a target in the
    /// `ndistricts` highest-share districts.
    GroupHinge {
        group: String,
        target: f64,
        #[serde(default = "default_exponent")]
        exponent: f64,
        ndistricts: usize,
        strength: f64,
    },
    /// Penalize the total number of admin-unit splits.
    SplitsPenalty { units: String, strength: f64 },
    /// Reserved for programmatic use; rejected in config files.
    Custom,
}

fn default_exponent() -> f64 {
    2.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectionsSection {
    /// Emit per-year adv_{yy}/arv_{yy} columns in the stats table.
    #[serde(default)]
    pub per_year: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    /// Attribute column holding the renumbering target and main reference
    /// plan ("cd_2010" or "cd_2020").
    pub column: Option<String>,
    /// Additional reference plan columns.
    #[serde(default)]
    pub extra: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default = "default_rhat_max")]
    pub rhat_max: f64,
    #[serde(default = "default_ess_min")]
    pub ess_min_fraction: f64,
    #[serde(default = "default_acceptance_min")]
    pub acceptance_min: f64,
    #[serde(default = "default_vi_floor")]
    pub vi_floor: f64,
    #[serde(default = "default_vi_pairs")]
    pub vi_pairs: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            rhat_max: default_rhat_max(),
            ess_min_fraction: default_ess_min(),
            acceptance_min: default_acceptance_min(),
            vi_floor: default_vi_floor(),
            vi_pairs: default_vi_pairs(),
        }
    }
}

fn default_rhat_max() -> f64 {
    1.05
}

fn default_ess_min() -> f64 {
    0.05
}

fn default_acceptance_min() -> f64 {
    0.01
}

fn default_vi_floor() -> f64 {
    0.1
}

fn default_vi_pairs() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl RunConfig {
    /// Parses and validates a config file. Relative data and output paths
    /// are resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("config schema error in {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut config.data.attributes);
        if let Some(p) = config.data.adjacency.as_mut() {
            resolve(p);
        }
        if let Some(p) = config.data.geometry.as_mut() {
            resolve(p);
        }
        resolve(&mut config.output.dir);
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if !self.data.attributes.exists() {
            bail!("data.attributes: file {} does not exist", self.data.attributes.display());
        }
        for (name, path) in
            [("data.adjacency", &self.data.adjacency), ("data.geometry", &self.data.geometry)]
        {
            if let Some(p) = path {
                if !p.exists() {
                    bail!("{name}: file {} does not exist", p.display());
                }
            }
        }
        if self.data.adjacency.is_none() && self.data.geometry.is_none() {
            bail!("data: either adjacency or geometry is required");
        }
        if !(self.problem.pop_tol > 0.0 && self.problem.pop_tol < 1.0) {
            bail!("problem.pop_tol: {} outside (0, 1)", self.problem.pop_tol);
        }
        for c in &self.constraints {
            if matches!(c, ConstraintSection::Custom) {
                bail!("constraints: kind \"custom\" is only available programmatically");
            }
        }
        Ok(())
    }

    pub fn map_params(&self) -> MapParams {
        let mut params = MapParams::new(self.problem.ndists, self.problem.pop_tol);
        if let Some(tol) = self.data.snap_tolerance {
            params.snap_tolerance = tol;
        }
        params
    }

    pub fn constraint_spec(&self) -> Result<ConstraintSpec> {
        let mut spec = ConstraintSpec::new(self.problem.pop_tol)?.with_rho(self.sampler.rho)?;
        if let Some(unit) = &self.problem.split_cap_unit {
            spec = spec.with_split_cap(unit);
        }
        for c in &self.constraints {
            let term = match c {
                ConstraintSection::GroupHinge { group, target, exponent, ndistricts, strength } => {
                    SoftTerm::GroupHinge {
                        group: group.clone(),
                        target: *target,
                        exponent: *exponent,
                        ndistricts: *ndistricts,
                        beta: *strength,
                    }
                }
                ConstraintSection::SplitsPenalty { units, strength } => {
                    SoftTerm::SplitsPenalty { units: units.clone(), beta: *strength }
                }
                ConstraintSection::Custom => unreachable!("rejected in validate"),
            };
            spec = spec.with_term(term)?;
        }
        Ok(spec)
    }

    pub fn sampler_params(&self, seed: Option<u64>, chains: Option<usize>) -> SamplerParams {
        let mut params =
            SamplerParams::new(self.sampler.nsims, self.sampler.nchains, self.sampler.seed);
        params.resample_rule = self.sampler.resample_rule;
        params.max_retry = self.sampler.max_retry;
        if let Some(s) = seed {
            params.seed = s;
        }
        if let Some(c) = chains {
            params.nchains = c;
        }
        params
    }

    pub fn diagnostics_config(&self, seed: u64) -> DiagnosticsConfig {
        DiagnosticsConfig {
            rhat_max: self.diagnostics.rhat_max,
            ess_min_fraction: self.diagnostics.ess_min_fraction,
            acceptance_min: self.diagnostics.acceptance_min,
            vi_floor: self.diagnostics.vi_floor,
            vi_pairs: self.diagnostics.vi_pairs,
            seed,
        }
    }
}
