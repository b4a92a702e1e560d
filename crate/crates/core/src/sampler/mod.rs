//! Sequential Monte Carlo sampling of district plans.
//!
//! Plans grow district by district: each stage cuts one district off every
//! particle's remaining region by drawing a uniform spanning tree (Wilson)
//! and removing one tree edge chosen uniformly among all `|region| - 1`
//! edges. A cut is accepted when both sides satisfy the population windows
//! and the running admin-split count stays within the cap; otherwise the
//! particle retries with a fresh tree up to `max_retry` times and then
//! drops out with weight zero.
//!
//! The proposal density of a cut has the closed form
//! `tau(D) * tau(R \ D) * c(D) / (tau(R) * (|R| - 1))`, which telescopes
//! across stages, so the incremental log weight needs only
//! `(rho - 1) * log tau(D) + log(|R| - 1) - log c(D)` minus the
//! soft-energy increment. With all soft terms off and `rho = 1` the
//! weighted plans target the distribution proportional to the product of
//! district spanning-tree counts over hard-feasible plans.

mod ensemble;
pub mod relabel;
pub mod resample;

pub use ensemble::{DrawId, EnsembleEntry, PlanEnsemble};
pub use relabel::match_numbers;

use std::collections::BTreeMap;

use rand::Rng;

use crate::constraints::{group_hinge_energy, ConstraintSpec, SoftTerm};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{NodeMask, Plan};
use crate::ingest::RedistMap;
use crate::rng::{derive_rng, stream};
use crate::tree::{log_spanning_tree_count, random_spanning_tree};

/// Run-shape parameters of the sampler.
#[derive(Debug, Clone)]
pub struct SamplerParams {
    /// Plans per chain.
    pub nsims: usize,
    /// Independent runs; diagnostics need at least 2.
    pub nchains: usize,
    pub seed: u64,
    /// Resample when ESS/N drops below this fraction, in (0, 1].
    pub resample_rule: f64,
    /// Tree draws per particle per stage before the particle is
    /// zero-weighted.
    pub max_retry: usize,
}

impl SamplerParams {
    pub fn new(nsims: usize, nchains: usize, seed: u64) -> SamplerParams {
        SamplerParams { nsims, nchains, seed, resample_rule: 0.5, max_retry: 32 }
    }

    fn validate(&self) -> Result<()> {
        if self.nsims == 0 {
            return Err(Error::Domain("nsims must be at least 1".into()));
        }
        if self.nchains == 0 {
            return Err(Error::Domain("nchains must be at least 1".into()));
        }
        if !(self.resample_rule > 0.0 && self.resample_rule <= 1.0) {
            return Err(Error::Domain(format!(
                "resample_rule {} outside (0, 1]",
                self.resample_rule
            )));
        }
        if self.max_retry == 0 {
            return Err(Error::Domain("max_retry must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of one splitting stage for one particle.
#[derive(Debug, Clone)]
pub enum SplitOutcome {
    Split {
        district: NodeMask,
        remainder: NodeMask,
        log_weight: f64,
    },
    /// No valid cut found within the retry budget.
    Dead,
}

const OUTSIDE: u16 = u16::MAX;

/// Interned admin-unit id vectors for the unit names a spec references.
struct UnitCaches {
    by_name: BTreeMap<String, (Vec<u32>, usize)>,
}

impl UnitCaches {
    fn build(map: &RedistMap, spec: &ConstraintSpec) -> Result<UnitCaches> {
        let mut by_name = BTreeMap::new();
        let mut want = Vec::new();
        if let Some(name) = &spec.admin_split_units {
            want.push(name.clone());
        }
        for term in &spec.soft_terms {
            if let SoftTerm::SplitsPenalty { units, .. } = term {
                want.push(units.clone());
            }
        }
        for name in want {
            if by_name.contains_key(&name) {
                continue;
            }
            let ids = map
                .unit_ids(&name)
                .ok_or_else(|| Error::Config(format!("unknown admin unit {name:?}")))?;
            by_name.insert(name, ids);
        }
        Ok(UnitCaches { by_name })
    }

    fn get(&self, name: &str) -> &(Vec<u32>, usize) {
        &self.by_name[name]
    }
}

/// Soft Gibbs energy of a partial plan. Labels `1..=n_completed` are
/// finished districts; label 0 is the open region (one block in split
/// counting); `OUTSIDE` nodes are ignored entirely.
fn partial_energy(
    map: &RedistMap,
    spec: &ConstraintSpec,
    caches: &UnitCaches,
    assignment: &[u16],
    n_completed: u16,
    complete_plan: Option<&Plan>,
) -> Result<f64> {
    let mut total = 0.0;
    for term in &spec.soft_terms {
        total += match term {
            SoftTerm::GroupHinge { group, target, exponent, ndistricts, beta } => {
                let group_col = map
                    .subgroup_column(group)
                    .ok_or_else(|| Error::Config(format!("unknown vap subgroup {group:?}")))?;
                let vap = map.vap();
                let k = n_completed as usize;
                let mut group_sum = vec![0.0; k];
                let mut vap_sum = vec![0.0; k];
                for (i, &d) in assignment.iter().enumerate() {
                    if d >= 1 && d != OUTSIDE && d <= n_completed {
                        group_sum[d as usize - 1] += group_col[i];
                        vap_sum[d as usize - 1] += vap[i];
                    }
                }
                let mut shares: Vec<f64> = group_sum
                    .iter()
                    .zip(&vap_sum)
                    .map(|(&g, &v)| if v > 0.0 { g / v } else { 0.0 })
                    .collect();
                shares.sort_by(|a, b| b.total_cmp(a));
                let mut e = 0.0;
                for &s in shares.iter().take(*ndistricts) {
                    e += group_hinge_energy(s, *target, *exponent)?;
                }
                beta * e
            }
            SoftTerm::SplitsPenalty { units, beta } => {
                let (ids, n_units) = self::UnitCaches::get(caches, units);
                beta * partition_splits(ids, *n_units, assignment) as f64
            }
            SoftTerm::Custom { beta, eval, .. } => match complete_plan {
                Some(plan) => beta * eval(plan, map),
                None => 0.0,
            },
        };
    }
    Ok(total)
}

/// Split count of a partial partition: per unit, the number of distinct
/// parts (completed districts and the open region block) minus one.
fn partition_splits(unit_ids: &[u32], n_units: usize, assignment: &[u16]) -> u64 {
    let mut pairs: Vec<(u32, u16)> = assignment
        .iter()
        .enumerate()
        .filter(|(_, &d)| d != OUTSIDE)
        .map(|(i, &d)| (unit_ids[i], d))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let mut counts = vec![0u64; n_units];
    for (u, _) in pairs {
        counts[u as usize] += 1;
    }
    counts.iter().map(|&c| c.saturating_sub(1)).sum()
}

/// Population windows for a split: the district side must land within
/// parity +/- tol; the remainder must stay feasible for the districts left.
struct PopWindows {
    district_lo: f64,
    district_hi: f64,
    remainder_lo: f64,
    remainder_hi: f64,
}

impl PopWindows {
    fn new(parity: f64, pop_tol: f64, remaining: u16) -> PopWindows {
        let k = (remaining - 1) as f64;
        PopWindows {
            district_lo: parity * (1.0 - pop_tol),
            district_hi: parity * (1.0 + pop_tol),
            remainder_lo: k * parity * (1.0 - pop_tol),
            remainder_hi: k * parity * (1.0 + pop_tol),
        }
    }

    fn admits(&self, district_pop: f64, remainder_pop: f64) -> bool {
        district_pop >= self.district_lo
            && district_pop <= self.district_hi
            && remainder_pop >= self.remainder_lo
            && remainder_pop <= self.remainder_hi
    }
}

/// Per-stage state of the admin-split cap: split counts contributed by
/// completed districts, so candidate cuts only need the region-touching
/// units.
struct CapState {
    /// Sum over units of max(completed districts touching - 1, 0).
    base_splits: u64,
    /// Per unit: does any completed district touch it?
    touched_by_completed: Vec<bool>,
    max_splits: u64,
}

impl CapState {
    fn build(unit_ids: &[u32], n_units: usize, assignment: &[u16], max_splits: u64) -> CapState {
        let mut pairs: Vec<(u32, u16)> = assignment
            .iter()
            .enumerate()
            .filter(|(_, &d)| d >= 1 && d != OUTSIDE)
            .map(|(i, &d)| (unit_ids[i], d))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut counts = vec![0u64; n_units];
        for (u, _) in &pairs {
            counts[*u as usize] += 1;
        }
        CapState {
            base_splits: counts.iter().map(|&c| c.saturating_sub(1)).sum(),
            touched_by_completed: counts.iter().map(|&c| c > 0).collect(),
            max_splits,
        }
    }

    /// Split count of the partition with the region divided into (a, b).
    fn splits_with(&self, unit_ids: &[u32], a: &NodeMask, b: &NodeMask) -> u64 {
        let n_units = self.touched_by_completed.len();
        let mut touch_a = vec![false; n_units];
        let mut touch_b = vec![false; n_units];
        let mut touched: Vec<u32> = Vec::new();
        for i in a.iter() {
            let u = unit_ids[i] as usize;
            if !touch_a[u] {
                touch_a[u] = true;
                if !touch_b[u] {
                    touched.push(u as u32);
                }
            }
        }
        for i in b.iter() {
            let u = unit_ids[i] as usize;
            if !touch_b[u] {
                touch_b[u] = true;
                if !touch_a[u] {
                    touched.push(u as u32);
                }
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let mut splits = self.base_splits;
        for &u in &touched {
            let u = u as usize;
            let parts = touch_a[u] as u64 + touch_b[u] as u64;
            splits += parts - 1 + self.touched_by_completed[u] as u64;
        }
        splits
    }

    fn admits(&self, unit_ids: &[u32], a: &NodeMask, b: &NodeMask) -> bool {
        self.splits_with(unit_ids, a, b) <= self.max_splits
    }
}

struct SplitEnv<'a> {
    map: &'a RedistMap,
    rho: f64,
    windows: PopWindows,
    cap_unit_ids: Option<&'a [u32]>,
    max_retry: usize,
}

/// Attempts to cut one district off `region`, retrying with fresh trees.
/// Returns the accepted split and its base log weight (tree-count and cut
/// terms; the soft-energy increment is the caller's).
fn attempt_split<R: Rng + ?Sized>(
    env: &SplitEnv,
    cap: Option<&CapState>,
    region: &NodeMask,
    rng: &mut R,
) -> Result<Option<(NodeMask, NodeMask, f64)>> {
    let graph = env.map.graph();
    let pops = env.map.pops();
    let n_region = region.count();
    if n_region < 2 {
        return Ok(None);
    }
    for _ in 0..env.max_retry {
        let tree = random_spanning_tree(graph, region, rng)?;
        let non_root: Vec<usize> =
            tree.nodes().iter().copied().filter(|&u| u != tree.root()).collect();
        let cut_node = non_root[rng.gen_range(0..non_root.len())];
        let side = tree.subtree_mask(cut_node);
        let other = region.difference(&side);
        let side_pop: f64 = side.iter().map(|i| pops[i]).sum();
        let other_pop: f64 = other.iter().map(|i| pops[i]).sum();

        // The district is whichever side fits the one-district window while
        // the other side stays feasible for the remaining districts.
        let oriented = if env.windows.admits(side_pop, other_pop) {
            Some((side, other))
        } else if env.windows.admits(other_pop, side_pop) {
            Some((other, side))
        } else {
            None
        };
        let (district, remainder) = match oriented {
            Some(pair) => pair,
            None => continue,
        };
        if let (Some(cap), Some(ids)) = (cap, env.cap_unit_ids) {
            if !cap.admits(ids, &district, &remainder) {
                continue;
            }
        }
        let cut_edges = graph.edges_between(&district, &remainder);
        let mut log_weight = ((n_region - 1) as f64).ln() - (cut_edges as f64).ln();
        if env.rho != 1.0 {
            log_weight += (env.rho - 1.0) * log_spanning_tree_count(graph, &district)?;
        }
        return Ok(Some((district, remainder, log_weight)));
    }
    Ok(None)
}

/// Cuts one district off a connected region: draws a uniform spanning tree,
/// removes a uniformly chosen tree edge, and accepts when both sides
/// satisfy the population windows (and the admin-split cap, when the spec
/// names one). The returned log weight is
/// `(rho - 1) * log tau(district) + log(|region| - 1) - log c(district,
/// remainder)` minus the soft-energy increment.
pub fn split_stage<R: Rng + ?Sized>(
    map: &RedistMap,
    spec: &ConstraintSpec,
    region: &NodeMask,
    remaining_districts: u16,
    max_retry: usize,
    rng: &mut R,
) -> Result<SplitOutcome> {
    if remaining_districts < 2 {
        return Err(Error::Domain("remaining_districts must be at least 2".into()));
    }
    if !map.graph().connected_within(region) {
        return Err(Error::NotConnected(Some("split region".into())));
    }
    let caches = UnitCaches::build(map, spec)?;
    let parity = map.parity_population();
    let env = SplitEnv {
        map,
        rho: spec.rho,
        windows: PopWindows::new(parity, spec.pop_tol, remaining_districts),
        cap_unit_ids: spec.admin_split_units.as_deref().map(|n| caches.get(n).0.as_slice()),
        max_retry,
    };
    // Standalone view: the region is the whole problem so far.
    let mut assignment = vec![OUTSIDE; map.node_count()];
    for i in region.iter() {
        assignment[i] = 0;
    }
    let cap = spec.admin_split_units.as_deref().map(|name| {
        let (ids, n_units) = caches.get(name);
        CapState::build(ids, *n_units, &assignment, map.ndists() as u64 - 1)
    });
    match attempt_split(&env, cap.as_ref(), region, rng)? {
        None => Ok(SplitOutcome::Dead),
        Some((district, remainder, base_weight)) => {
            let energy_before =
                partial_energy(map, spec, &caches, &assignment, 0, None)?;
            for i in district.iter() {
                assignment[i] = 1;
            }
            let complete = remaining_districts == 2 && region.count() == map.node_count();
            let (n_completed, plan) = if complete {
                for i in remainder.iter() {
                    assignment[i] = 2;
                }
                (2, Some(Plan::new(assignment.clone(), 2)?))
            } else {
                (1, None)
            };
            let energy_after =
                partial_energy(map, spec, &caches, &assignment, n_completed, plan.as_ref())?;
            Ok(SplitOutcome::Split {
                district,
                remainder,
                log_weight: base_weight - (energy_after - energy_before),
            })
        }
    }
}

#[derive(Clone)]
struct Particle {
    assignment: Vec<u16>,
    region: NodeMask,
    energy: f64,
    log_weight: f64,
    dead: bool,
}

/// Draws `nchains x nsims` plans satisfying contiguity, the parity window,
/// and the admin-split cap, weighted toward the spanning-forest target
/// `prod_d tau(d)^rho * exp(-energy)`. Final-stage weights are retained
/// (normalized per chain) for diagnostics.
pub fn smc_sample(
    map: &RedistMap,
    spec: &ConstraintSpec,
    params: &SamplerParams,
) -> Result<PlanEnsemble> {
    params.validate()?;
    if !map.graph().is_connected() {
        return Err(Error::NotConnected(Some("precinct adjacency graph".into())));
    }
    let caches = UnitCaches::build(map, spec)?;
    // fail fast on unknown hinge subgroups
    for term in &spec.soft_terms {
        if let SoftTerm::GroupHinge { group, .. } = term {
            if map.subgroup_column(group).is_none() {
                return Err(Error::Config(format!("unknown vap subgroup {group:?}")));
            }
        }
    }
    let ndists = map.ndists();
    let n = map.node_count();
    let parity = map.parity_population();

    let mut out = PlanEnsemble::new(n, ndists);
    out.seed = params.seed;

    for chain in 0..params.nchains {
        let chain_id = chain as u32 + 1;
        let mut acceptance = Vec::new();
        let mut resampled = Vec::new();
        let mut particles = vec![
            Particle {
                assignment: vec![0; n],
                region: NodeMask::full(n),
                energy: 0.0,
                log_weight: 0.0,
                dead: false,
            };
            params.nsims
        ];

        for stage in 1..ndists {
            let remaining = ndists - stage + 1;
            let env = SplitEnv {
                map,
                rho: spec.rho,
                windows: PopWindows::new(parity, spec.pop_tol, remaining),
                cap_unit_ids: spec
                    .admin_split_units
                    .as_deref()
                    .map(|name| caches.get(name).0.as_slice()),
                max_retry: params.max_retry,
            };
            let cap_cfg = spec.admin_split_units.as_deref().map(|name| caches.get(name));

            let stepped: Vec<Result<Particle>> = exec::map_indexed(&particles, |idx, p| {
                if p.dead {
                    return Ok(p.clone());
                }
                let mut rng = derive_rng(
                    params.seed,
                    &[stream::SPLIT, chain as u64, idx as u64, stage as u64],
                );
                let cap = cap_cfg.map(|(ids, n_units)| {
                    CapState::build(ids, *n_units, &p.assignment, ndists as u64 - 1)
                });
                let mut next = p.clone();
                match attempt_split(&env, cap.as_ref(), &p.region, &mut rng)? {
                    None => {
                        next.dead = true;
                        next.log_weight = f64::NEG_INFINITY;
                    }
                    Some((district, remainder, base_weight)) => {
                        for i in district.iter() {
                            next.assignment[i] = stage;
                        }
                        let complete = remaining == 2;
                        let (n_completed, plan) = if complete {
                            for i in remainder.iter() {
                                next.assignment[i] = ndists;
                            }
                            (ndists, Some(Plan::new(next.assignment.clone(), ndists)?))
                        } else {
                            (stage, None)
                        };
                        let energy = partial_energy(
                            map,
                            spec,
                            &caches,
                            &next.assignment,
                            n_completed,
                            plan.as_ref(),
                        )?;
                        let mut log_weight = base_weight - (energy - p.energy);
                        if complete && spec.rho != 1.0 {
                            log_weight +=
                                (spec.rho - 1.0) * log_spanning_tree_count(map.graph(), &remainder)?;
                        }
                        next.energy = energy;
                        next.log_weight += log_weight;
                        next.region = remainder;
                    }
                }
                Ok(next)
            });
            particles = stepped.into_iter().collect::<Result<Vec<_>>>()?;

            let live = particles.iter().filter(|p| !p.dead).count();
            acceptance.push(live as f64 / params.nsims as f64);
            if live == 0 {
                return Err(Error::SamplerCollapse {
                    stage: stage as usize,
                    reason: format!(
                        "all {} particles failed to find a valid cut within {} retries",
                        params.nsims, params.max_retry
                    ),
                });
            }

            let weights = normalized_weights(&particles);
            let ess = crate::diagnostics::ess(&weights)?;
            let any_dead = live < params.nsims;
            let last_stage = stage == ndists - 1;
            let low_ess = !last_stage && ess < params.resample_rule * params.nsims as f64;
            if any_dead || low_ess {
                let mut rng = derive_rng(
                    params.seed,
                    &[stream::RESAMPLE, chain as u64, stage as u64],
                );
                let ancestors =
                    resample::systematic_resample(&weights, &mut rng).map_err(|_| {
                        Error::SamplerCollapse {
                            stage: stage as usize,
                            reason: "resampling found no live particles".into(),
                        }
                    })?;
                particles = ancestors
                    .into_iter()
                    .map(|a| {
                        let mut p = particles[a].clone();
                        p.log_weight = 0.0;
                        p
                    })
                    .collect();
                resampled.push(stage as usize);
            }
        }

        if ndists == 1 {
            for p in &mut particles {
                p.assignment = vec![1; n];
            }
        }

        let weights = normalized_weights(&particles);
        let total: f64 = weights.iter().sum();
        for (p, w) in particles.into_iter().zip(weights) {
            out.push_sim(p.assignment, w / total, chain_id);
        }
        out.stage_acceptance.push(acceptance);
        out.resampled_stages.push(resampled);
    }
    Ok(out)
}

fn normalized_weights(particles: &[Particle]) -> Vec<f64> {
    let max = particles
        .iter()
        .filter(|p| !p.dead)
        .map(|p| p.log_weight)
        .fold(f64::NEG_INFINITY, f64::max);
    particles
        .iter()
        .map(|p| if p.dead { 0.0 } else { (p.log_weight - max).exp() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConstraintSpec;
    use crate::graph::{is_contiguous, tally, Graph};
    use crate::ingest::{MapParams, PrecinctRecord};
    use crate::rng::derive_rng;
    use crate::synth;
    use std::collections::BTreeMap;

    /// Map over an arbitrary graph with unit pops and no extras.
    fn bare_map(graph: Graph, ndists: u16, pop_tol: f64) -> RedistMap {
        let records = (0..graph.node_count())
            .map(|i| {
                let mut vap_subgroups = BTreeMap::new();
                for name in crate::ingest::VAP_SUBGROUPS {
                    vap_subgroups.insert(name.to_string(), 0.0);
                }
                vap_subgroups.insert("vap_white".to_string(), 1.0);
                PrecinctRecord {
                    geoid: format!("n{i}"),
                    county: "C".into(),
                    muni: None,
                    county_muni: "C".into(),
                    pop: 1.0,
                    vap: 1.0,
                    vap_subgroups,
                    votes: BTreeMap::new(),
                    cd_2010: None,
                    cd_2020: None,
                    area: None,
                    perimeter: None,
                    shared_edge_lengths: BTreeMap::new(),
                }
            })
            .collect();
        RedistMap::from_parts(graph, records, &MapParams::new(ndists, pop_tol)).unwrap()
    }

    fn cycle4_map() -> RedistMap {
        bare_map(Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap(), 2, 1e-6)
    }

    #[test]
    fn split_cycle4_exact_parity() {
        // all 4 adjacent pairs appear; c = 2 and |R|-1 = 3 for every
        // outcome, so all weights are equal
        let map = cycle4_map();
        let spec = ConstraintSpec::new(1e-6).unwrap();
        let region = NodeMask::full(4);
        let mut rng = derive_rng(11, &[0]);
        let mut seen = std::collections::HashSet::new();
        let expected_weight = (3.0f64).ln() - (2.0f64).ln();
        for _ in 0..200 {
            match split_stage(&map, &spec, &region, 2, 32, &mut rng).unwrap() {
                SplitOutcome::Split { district, log_weight, .. } => {
                    let nodes: Vec<usize> = district.iter().collect();
                    assert_eq!(nodes.len(), 2);
                    assert!((log_weight - expected_weight).abs() < 1e-12);
                    seen.insert(nodes);
                }
                SplitOutcome::Dead => panic!("no dead splits expected"),
            }
        }
        let pairs: std::collections::HashSet<Vec<usize>> =
            [vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]].into_iter().collect();
        assert_eq!(seen, pairs);
    }

    #[test]
    fn split_path4_forced_middle_edge() {
        // the path's unique spanning tree has one valid cut: the middle edge
        let map = bare_map(Graph::new(4, &[(0, 1), (1, 2), (2, 3)]).unwrap(), 2, 1e-6);
        let spec = ConstraintSpec::new(1e-6).unwrap();
        let region = NodeMask::full(4);
        let mut rng = derive_rng(12, &[0]);
        for _ in 0..50 {
            match split_stage(&map, &spec, &region, 2, 64, &mut rng).unwrap() {
                SplitOutcome::Split { district, log_weight, .. } => {
                    let nodes: Vec<usize> = district.iter().collect();
                    assert!(nodes == vec![0, 1] || nodes == vec![2, 3]);
                    // c = 1 crossing edge, |R|-1 = 3
                    assert!((log_weight - (3.0f64).ln()).abs() < 1e-12);
                }
                SplitOutcome::Dead => panic!("middle cut should always be found"),
            }
        }
    }

    #[test]
    fn infeasible_window_is_dead() {
        // 3 unit-pop nodes into 2 districts at near-exact parity: parity is
        // 1.5, so no cut is feasible
        let map = bare_map(Graph::new(3, &[(0, 1), (1, 2)]).unwrap(), 2, 1e-6);
        let spec = ConstraintSpec::new(1e-6).unwrap();
        let region = NodeMask::full(3);
        let mut rng = derive_rng(13, &[0]);
        assert!(matches!(
            split_stage(&map, &spec, &region, 2, 8, &mut rng).unwrap(),
            SplitOutcome::Dead
        ));
    }

    #[test]
    fn smc_collapse_on_infeasible_instance() {
        let map = bare_map(Graph::new(3, &[(0, 1), (1, 2)]).unwrap(), 2, 1e-6);
        let spec = ConstraintSpec::new(1e-6).unwrap();
        let params = SamplerParams::new(20, 1, 5);
        match smc_sample(&map, &spec, &params) {
            Err(Error::SamplerCollapse { stage: 1, .. }) => {}
            other => panic!("expected collapse at stage 1, got {other:?}"),
        }
    }

    #[test]
    fn cycle4_frequencies_and_validity() {
        // only two contiguous equal-population 2-partitions exist; each
        // should appear with frequency 0.5 +/- 0.02 over 10,000 draws
        let map = cycle4_map();
        let spec = ConstraintSpec::new(1e-6).unwrap();
        let params = SamplerParams::new(10_000, 1, 2024);
        let ensemble = smc_sample(&map, &spec, &params).unwrap();
        assert_eq!(ensemble.n_sims(), 10_000);
        let mut count_01 = 0usize;
        for entry in ensemble.entries() {
            let plan = Plan::new(entry.assignment.clone(), 2).unwrap();
            assert!(is_contiguous(map.graph(), &plan).unwrap());
            let pops = tally(&plan, map.pops()).unwrap();
            assert_eq!(pops, vec![2.0, 2.0]);
            // partition is {01|23} or {12|30}
            if entry.assignment[0] == entry.assignment[1] {
                count_01 += 1;
            } else {
                assert_eq!(entry.assignment[1], entry.assignment[2]);
            }
        }
        let freq = count_01 as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "frequency {freq}");
    }

    #[test]
    fn split_cap_enforced_during_sampling() {
        // 4x4 grid, 4 districts, three horizontal county bands: every plan
        // must keep admin splits <= 3
        let map = synth::grid_map(4, 4, 4, 0.05).counties(3).build().unwrap();
        let spec = ConstraintSpec::new(0.05).unwrap().with_split_cap("county");
        let params = SamplerParams::new(200, 1, 9);
        let ensemble = smc_sample(&map, &spec, &params).unwrap();
        let counties = map.admin_unit("county").unwrap();
        for entry in ensemble.entries() {
            let plan = Plan::new(entry.assignment.clone(), 4).unwrap();
            let splits = crate::constraints::splits_energy(&plan, counties).unwrap();
            assert!(splits <= 3.0, "split cap violated: {splits}");
        }
    }

    #[test]
    fn determinism_across_worker_counts_is_seed_only() {
        // the parallel schedule never enters the math: same seed, same plans
        let map = synth::grid_map(4, 4, 2, 0.05).build().unwrap();
        let spec = ConstraintSpec::new(0.05).unwrap();
        let params = SamplerParams::new(50, 2, 31);
        let a = smc_sample(&map, &spec, &params).unwrap();
        let b = smc_sample(&map, &spec, &params).unwrap();
        assert_eq!(a.entries().len(), b.entries().len());
        for (x, y) in a.entries().iter().zip(b.entries()) {
            assert_eq!(x.assignment, y.assignment);
            assert_eq!(x.weight.to_bits(), y.weight.to_bits());
        }
    }

    #[test]
    fn single_district_instance() {
        let map = synth::grid_map(2, 2, 1, 0.05).build().unwrap();
        let spec = ConstraintSpec::new(0.05).unwrap();
        let params = SamplerParams::new(5, 1, 1);
        let ensemble = smc_sample(&map, &spec, &params).unwrap();
        assert_eq!(ensemble.n_sims(), 5);
        for e in ensemble.entries() {
            assert!(e.assignment.iter().all(|&d| d == 1));
        }
    }
}
