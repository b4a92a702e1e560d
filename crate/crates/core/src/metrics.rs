//! District-level and plan-level summary statistics.
//!
//! Stats tables are long format: one row per (draw, district), with
//! plan-level columns (deviation, compactness, splits, partisan summaries)
//! repeated on each of the plan's rows. Sign conventions for `pbias` and
//! `egap`: positive means pro-Republican.

use std::f64::consts::PI;

use crate::constraints::count_splits;
use crate::elections::{aggregate_elections, district_votes, DistrictVotes, ElectionSet};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{tally, Graph, Plan};
use crate::ingest::{RedistMap, MISSING_MUNI, VAP_SUBGROUPS};
use crate::sampler::{DrawId, PlanEnsemble};

/// Polsby-Popper compactness of one district: `4 pi A / P^2`; 1 for a disk.
pub fn comp_polsby(area: f64, perimeter: f64) -> Result<f64> {
    if !(area > 0.0) || !(perimeter > 0.0) {
        return Err(Error::GeometryUnavailable(format!(
            "need positive area and perimeter, got A={area}, P={perimeter}"
        )));
    }
    Ok(4.0 * PI * area / (perimeter * perimeter))
}

/// Fraction of graph edges with both endpoints in the same district.
pub fn comp_edge(plan: &Plan, graph: &Graph) -> Result<f64> {
    if plan.node_count() != graph.node_count() {
        return Err(Error::Shape("plan length != graph node count".into()));
    }
    let kept = graph
        .edges()
        .iter()
        .filter(|&&(a, b)| plan.assignment()[a] == plan.assignment()[b])
        .count();
    Ok(kept as f64 / graph.edge_count() as f64)
}

/// Maximum relative deviation of district populations from parity.
pub fn plan_dev(plan: &Plan, pops: &[f64]) -> Result<f64> {
    let district_pops = tally(plan, pops)?;
    let parity: f64 = district_pops.iter().sum::<f64>() / plan.ndists() as f64;
    Ok(district_pops.iter().map(|&p| (p - parity).abs() / parity).fold(0.0, f64::max))
}

/// Total admin splits: per unit, districts intersecting it minus one.
pub fn splits_count(plan: &Plan, units: &[String]) -> Result<u64> {
    count_splits(plan.assignment(), units, None)
}

/// Per-district Polsby-Popper scores via inclusion-exclusion: district
/// perimeter is the sum of precinct perimeters minus twice the internal
/// shared boundary. `None` per district when geometry is incomplete.
pub fn district_polsby(plan: &Plan, map: &RedistMap) -> Result<Vec<Option<f64>>> {
    let k = plan.ndists() as usize;
    if !map.geometry_complete() {
        return Ok(vec![None; k]);
    }
    let mut area = vec![0.0; k];
    let mut perimeter = vec![0.0; k];
    for (i, r) in map.records().iter().enumerate() {
        let d = plan.assignment()[i] as usize - 1;
        area[d] += r.area.expect("geometry checked complete");
        perimeter[d] += r.perimeter.expect("geometry checked complete");
    }
    for &(a, b) in map.graph().edges() {
        if plan.assignment()[a] == plan.assignment()[b] {
            let d = plan.assignment()[a] as usize - 1;
            perimeter[d] -= 2.0 * map.records()[a].shared_edge_lengths[&b];
        }
    }
    (0..k).map(|d| comp_polsby(area[d], perimeter[d]).map(Some)).collect()
}

/// Per-district `e_dvs` (mean two-party Democratic share over elections)
/// and `pr_dem` (fraction of elections won by the Democrat; ties count as
/// not won). A district-election with no two-party votes is skipped; a
/// district with no usable elections gets `None`.
pub fn partisan_district_stats(
    plan: &Plan,
    elections: &ElectionSet,
) -> Result<(Vec<Option<f64>>, Vec<Option<f64>>)> {
    let votes = district_votes(plan, elections)?;
    Ok(partisan_from_votes(&votes, plan.ndists() as usize))
}

fn partisan_from_votes(votes: &DistrictVotes, ndists: usize) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let mut e_dvs = Vec::with_capacity(ndists);
    let mut pr_dem = Vec::with_capacity(ndists);
    for d in 0..ndists {
        let mut share_sum = 0.0;
        let mut wins = 0usize;
        let mut usable = 0usize;
        for (dem_e, rep_e) in votes.dem.iter().zip(&votes.rep) {
            let (dem, rep) = (dem_e[d], rep_e[d]);
            if dem + rep <= 0.0 {
                continue;
            }
            usable += 1;
            share_sum += dem / (dem + rep);
            if dem > rep {
                wins += 1;
            }
        }
        if usable == 0 {
            e_dvs.push(None);
            pr_dem.push(None);
        } else {
            e_dvs.push(Some(share_sum / usable as f64));
            pr_dem.push(Some(wins as f64 / usable as f64));
        }
    }
    (e_dvs, pr_dem)
}

/// Expected Democratic seats: mean over elections of the count of
/// districts where the Democrat outpolls the Republican (ties lose).
pub fn e_dem(plan: &Plan, elections: &ElectionSet) -> Result<f64> {
    let votes = district_votes(plan, elections)?;
    Ok(e_dem_from_votes(&votes, plan.ndists() as usize))
}

fn e_dem_from_votes(votes: &DistrictVotes, ndists: usize) -> f64 {
    let mut total = 0usize;
    for (dem_e, rep_e) in votes.dem.iter().zip(&votes.rep) {
        total += (0..ndists).filter(|&d| dem_e[d] > rep_e[d]).count();
    }
    total as f64 / votes.dem.len() as f64
}

/// Partisan-symmetry deviation: per election, shift every district's
/// Democratic share uniformly until the turnout-weighted statewide share
/// is exactly one half, then measure how far the Democratic seat share
/// falls from one half. Positive means pro-Republican.
pub fn pbias(plan: &Plan, elections: &ElectionSet) -> Result<Option<f64>> {
    let votes = district_votes(plan, elections)?;
    Ok(pbias_from_votes(&votes, plan.ndists() as usize))
}

fn pbias_from_votes(votes: &DistrictVotes, ndists: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut usable = 0usize;
    for (dem_e, rep_e) in votes.dem.iter().zip(&votes.rep) {
        let statewide_dem: f64 = dem_e.iter().sum();
        let statewide_total: f64 =
            dem_e.iter().sum::<f64>() + rep_e.iter().sum::<f64>();
        if statewide_total <= 0.0 {
            continue;
        }
        usable += 1;
        let swing = 0.5 - statewide_dem / statewide_total;
        let seats = (0..ndists)
            .filter(|&d| {
                let t = dem_e[d] + rep_e[d];
                t > 0.0 && dem_e[d] / t + swing > 0.5
            })
            .count();
        sum += 0.5 - seats as f64 / ndists as f64;
    }
    (usable > 0).then(|| sum / usable as f64)
}

/// Efficiency gap: difference in wasted votes (losing party wastes all its
/// votes; the winner wastes its surplus over half the two-party total),
/// over the statewide two-party total, averaged across elections.
/// Positive means pro-Republican.
pub fn egap(plan: &Plan, elections: &ElectionSet) -> Result<Option<f64>> {
    let votes = district_votes(plan, elections)?;
    Ok(egap_from_votes(&votes, plan.ndists() as usize))
}

fn egap_from_votes(votes: &DistrictVotes, ndists: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut usable = 0usize;
    for (dem_e, rep_e) in votes.dem.iter().zip(&votes.rep) {
        let mut wasted_dem = 0.0;
        let mut wasted_rep = 0.0;
        let mut statewide = 0.0;
        for d in 0..ndists {
            let (dem, rep) = (dem_e[d], rep_e[d]);
            let t = dem + rep;
            if t <= 0.0 {
                continue;
            }
            statewide += t;
            if dem > rep {
                wasted_dem += dem - t / 2.0;
                wasted_rep += rep;
            } else {
                wasted_dem += dem;
                wasted_rep += rep - t / 2.0;
            }
        }
        if statewide <= 0.0 {
            continue;
        }
        usable += 1;
        sum += (wasted_dem - wasted_rep) / statewide;
    }
    (usable > 0).then(|| sum / usable as f64)
}

/// Counts minority opportunity districts: the mean two-party Democratic
/// share exceeds one half and the group's voting-age population outweighs
/// the non-Hispanic-white voting-age population.
pub fn opportunity_districts(
    plan: &Plan,
    map: &RedistMap,
    group: &str,
    elections: &ElectionSet,
) -> Result<usize> {
    let group_col = map
        .subgroup_column(group)
        .ok_or_else(|| Error::Config(format!("unknown vap subgroup {group:?}")))?;
    let white_col = map.subgroup_column("vap_white").expect("vap_white always present");
    let group_tally = tally(plan, group_col)?;
    let white_tally = tally(plan, white_col)?;
    let (e_dvs, _) = partisan_district_stats(plan, elections)?;
    Ok((0..plan.ndists() as usize)
        .filter(|&d| {
            matches!(e_dvs[d], Some(share) if share > 0.5) && group_tally[d] > white_tally[d]
        })
        .count())
}

/// One (draw, district) row of the stats table. `None` fields are emitted
/// as empty cells: absent, not zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub draw: DrawId,
    pub chain: Option<u32>,
    pub district: u16,
    pub total_pop: f64,
    pub plan_dev: f64,
    pub comp_edge: f64,
    pub comp_polsby: Option<f64>,
    pub county_splits: u64,
    pub muni_splits: u64,
    pub vap: f64,
    /// Aligned with [`VAP_SUBGROUPS`].
    pub vap_subgroups: [f64; 8],
    pub ndv: Option<f64>,
    pub nrv: Option<f64>,
    pub ndshare: Option<f64>,
    pub e_dvs: Option<f64>,
    pub pr_dem: Option<f64>,
    pub e_dem: Option<f64>,
    pub pbias: Option<f64>,
    pub egap: Option<f64>,
    /// Per-year (adv, arv) pairs aligned with `StatsTable::years`.
    pub per_year: Vec<(f64, f64)>,
}

/// Long-format statistics for a whole ensemble, ordered by draw then
/// district.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatsTable {
    pub rows: Vec<StatsRow>,
    /// Two-digit years with per-year `adv_*`/`arv_*` columns; empty unless
    /// requested.
    pub years: Vec<String>,
}

impl StatsTable {
    /// The export header. The base columns are fixed; per-year columns are
    /// appended when configured.
    pub fn header(&self) -> Vec<String> {
        let mut cols: Vec<String> = [
            "draw",
            "chain",
            "district",
            "total_pop",
            "plan_dev",
            "comp_edge",
            "comp_polsby",
            "county_splits",
            "muni_splits",
            "vap",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        cols.extend(VAP_SUBGROUPS.iter().map(|s| s.to_string()));
        cols.extend(
            ["ndv", "nrv", "ndshare", "e_dvs", "pr_dem", "e_dem", "pbias", "egap"]
                .iter()
                .map(|s| s.to_string()),
        );
        for y in &self.years {
            cols.push(format!("adv_{y}"));
            cols.push(format!("arv_{y}"));
        }
        cols
    }

    /// Values of one plan-level column for non-reference draws, grouped by
    /// chain (ascending chain id, draw order within each chain).
    pub fn plan_level_by_chain(&self, column: &str) -> Vec<Vec<f64>> {
        let mut chains: std::collections::BTreeMap<u32, Vec<f64>> = Default::default();
        for row in &self.rows {
            if row.district != 1 || row.draw.is_reference() {
                continue;
            }
            let chain = match row.chain {
                Some(c) => c,
                None => continue,
            };
            let value = match column {
                "plan_dev" => Some(row.plan_dev),
                "comp_edge" => Some(row.comp_edge),
                "comp_polsby" => row.comp_polsby,
                "e_dem" => row.e_dem,
                "pbias" => row.pbias,
                "egap" => row.egap,
                _ => None,
            };
            if let Some(v) = value {
                chains.entry(chain).or_default().push(v);
            }
        }
        chains.into_values().collect()
    }
}

/// Options for stats computation.
#[derive(Debug, Clone, Default)]
pub struct StatsOptions {
    /// Emit per-year `adv_{yy}`/`arv_{yy}` columns.
    pub per_year: bool,
}

/// Computes the full stats table for an ensemble. Plans are processed in
/// parallel; output order is by (draw, district).
pub fn build_stats(
    map: &RedistMap,
    ensemble: &PlanEnsemble,
    elections: &ElectionSet,
    options: &StatsOptions,
) -> Result<StatsTable> {
    let years = if options.per_year && !elections.is_empty() { elections.years() } else { vec![] };
    let counties = map
        .admin_unit("county")
        .ok_or_else(|| Error::Config("map lacks a county admin unit".into()))?;
    let munis =
        map.admin_unit("muni").ok_or_else(|| Error::Config("map lacks a muni admin unit".into()))?;

    let per_entry: Vec<Result<Vec<StatsRow>>> = exec::map_indexed(ensemble.entries(), |_, entry| {
        let plan = Plan::new(entry.assignment.clone(), ensemble.ndists())?;
        let ndists = plan.ndists() as usize;
        let district_pops = tally(&plan, map.pops())?;
        let parity: f64 = district_pops.iter().sum::<f64>() / ndists as f64;
        let dev = district_pops.iter().map(|&p| (p - parity).abs() / parity).fold(0.0, f64::max);
        let edge = comp_edge(&plan, map.graph())?;
        let polsby = district_polsby(&plan, map)?;
        let polsby_plan = if polsby.iter().all(Option::is_some) {
            Some(polsby.iter().map(|p| p.unwrap()).sum::<f64>() / ndists as f64)
        } else {
            None
        };
        let county_splits = count_splits(plan.assignment(), counties, None)?;
        let muni_splits = count_splits(plan.assignment(), munis, Some(MISSING_MUNI))?;
        let vap_tally = tally(&plan, map.vap())?;
        let mut subgroup_tallies = Vec::with_capacity(8);
        for name in VAP_SUBGROUPS {
            subgroup_tallies.push(tally(&plan, map.subgroup_column(name).unwrap())?);
        }

        let (averages, e_dvs, pr_dem, e_dem_v, pbias_v, egap_v) = if elections.is_empty() {
            (None, vec![None; ndists], vec![None; ndists], None, None, None)
        } else {
            let votes = district_votes(&plan, elections)?;
            let averages = aggregate_elections(&plan, elections)?;
            let (e_dvs, pr_dem) = partisan_from_votes(&votes, ndists);
            let e_dem_v = Some(e_dem_from_votes(&votes, ndists));
            let pbias_v = pbias_from_votes(&votes, ndists);
            let egap_v = egap_from_votes(&votes, ndists);
            (Some(averages), e_dvs, pr_dem, e_dem_v, pbias_v, egap_v)
        };

        let mut rows = Vec::with_capacity(ndists);
        for d in 0..ndists {
            let (ndv, nrv, ndshare) = match &averages {
                Some(a) => {
                    let (ndv, nrv) = (a.ndv[d], a.nrv[d]);
                    let share = if ndv + nrv > 0.0 { Some(ndv / (ndv + nrv)) } else { None };
                    (Some(ndv), Some(nrv), share)
                }
                None => (None, None, None),
            };
            let per_year = match &averages {
                Some(a) if !years.is_empty() => years
                    .iter()
                    .map(|y| {
                        let (adv, arv) = &a.by_year[y];
                        (adv[d], arv[d])
                    })
                    .collect(),
                _ => vec![],
            };
            let mut vap_subgroups = [0.0; 8];
            for (slot, t) in vap_subgroups.iter_mut().zip(&subgroup_tallies) {
                *slot = t[d];
            }
            rows.push(StatsRow {
                draw: entry.draw.clone(),
                chain: entry.chain,
                district: d as u16 + 1,
                total_pop: district_pops[d],
                plan_dev: dev,
                comp_edge: edge,
                comp_polsby: polsby_plan,
                county_splits,
                muni_splits,
                vap: vap_tally[d],
                vap_subgroups,
                ndv,
                nrv,
                ndshare,
                e_dvs: e_dvs[d],
                pr_dem: pr_dem[d],
                e_dem: e_dem_v,
                pbias: pbias_v,
                egap: egap_v,
                per_year,
            });
        }
        Ok(rows)
    });

    let mut rows = Vec::with_capacity(ensemble.entries().len() * ensemble.ndists() as usize);
    for r in per_entry {
        rows.extend(r?);
    }
    Ok(StatsTable { rows, years })
}
