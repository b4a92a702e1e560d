//! Election discovery and district-level vote aggregation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{tally, Plan};
use crate::ingest::{parse_vote_column, RedistMap};

/// One statewide election with its two-party precinct vote counts.
#[derive(Debug, Clone)]
pub struct Election {
    pub office: String,
    /// Two-digit year string from the column naming convention.
    pub year: String,
    pub dem_column: String,
    pub rep_column: String,
    pub dem: Vec<f64>,
    pub rep: Vec<f64>,
}

impl Election {
    /// Short name `{office}_{year}`.
    pub fn name(&self) -> String {
        format!("{}_{}", self.office, self.year)
    }
}

/// All elections discovered on a map, ordered by (year, office).
#[derive(Debug, Clone, Default)]
pub struct ElectionSet {
    pub elections: Vec<Election>,
}

impl ElectionSet {
    /// Discovers elections from vote columns named
    /// `{office}_{year}_{party}_{candidate}`. Every election must carry
    /// both a Democratic and a Republican column; multiple candidates of
    /// one party in the same race are summed.
    pub fn discover(map: &RedistMap) -> Result<ElectionSet> {
        struct Partial {
            dem: Option<(String, Vec<f64>)>,
            rep: Option<(String, Vec<f64>)>,
        }
        let mut races: BTreeMap<(String, String), Partial> = BTreeMap::new();
        for col in map.vote_column_names().map(str::to_string).collect::<Vec<_>>() {
            let (office, year, party, _) = match parse_vote_column(&col) {
                Some(parts) => parts,
                None => continue,
            };
            let counts = map.vote_column(&col).unwrap().to_vec();
            let entry = races
                .entry((year.to_string(), office.to_string()))
                .or_insert(Partial { dem: None, rep: None });
            let slot = if party == "dem" { &mut entry.dem } else { &mut entry.rep };
            match slot {
                None => *slot = Some((col.clone(), counts)),
                Some((_, existing)) => {
                    for (e, c) in existing.iter_mut().zip(&counts) {
                        *e += c;
                    }
                }
            }
        }
        let mut elections = Vec::new();
        for ((year, office), partial) in races {
            let (dem_column, dem) = partial.dem.ok_or_else(|| {
                Error::Schema(format!("election {office}_{year} has no Democratic column"))
            })?;
            let (rep_column, rep) = partial.rep.ok_or_else(|| {
                Error::Schema(format!("election {office}_{year} has no Republican column"))
            })?;
            elections.push(Election { office, year, dem_column, rep_column, dem, rep });
        }
        Ok(ElectionSet { elections })
    }

    pub fn is_empty(&self) -> bool {
        self.elections.is_empty()
    }

    pub fn len(&self) -> usize {
        self.elections.len()
    }

    /// Distinct two-digit years in ascending order.
    pub fn years(&self) -> Vec<String> {
        let mut years: Vec<String> = self.elections.iter().map(|e| e.year.clone()).collect();
        years.sort();
        years.dedup();
        years
    }
}

/// Per-district two-party vote totals for every election under a plan.
#[derive(Debug, Clone)]
pub struct DistrictVotes {
    /// `[election][district]` Democratic totals.
    pub dem: Vec<Vec<f64>>,
    /// `[election][district]` Republican totals.
    pub rep: Vec<Vec<f64>>,
}

/// Tallies each election's party counts into districts.
pub fn district_votes(plan: &Plan, elections: &ElectionSet) -> Result<DistrictVotes> {
    if elections.is_empty() {
        return Err(Error::Config("election set is empty".into()));
    }
    let mut dem = Vec::with_capacity(elections.len());
    let mut rep = Vec::with_capacity(elections.len());
    for e in &elections.elections {
        dem.push(tally(plan, &e.dem)?);
        rep.push(tally(plan, &e.rep)?);
    }
    Ok(DistrictVotes { dem, rep })
}

/// District-level vote-count averages: `adv_{yy}`/`arv_{yy}` per year and
/// the all-year `ndv`/`nrv` averages.
#[derive(Debug, Clone)]
pub struct VoteAverages {
    /// Year -> (adv, arv) per district.
    pub by_year: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
    pub ndv: Vec<f64>,
    pub nrv: Vec<f64>,
}

/// Averages district vote counts over elections: per year and overall.
pub fn aggregate_elections(
    plan: &Plan,
    elections: &ElectionSet,
) -> Result<VoteAverages> {
    let votes = district_votes(plan, elections)?;
    let ndists = plan.ndists() as usize;
    let mut by_year: BTreeMap<String, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    let mut ndv = vec![0.0; ndists];
    let mut nrv = vec![0.0; ndists];
    for (i, e) in elections.elections.iter().enumerate() {
        let entry = by_year
            .entry(e.year.clone())
            .or_insert_with(|| (vec![0.0; ndists], vec![0.0; ndists], 0));
        for d in 0..ndists {
            entry.0[d] += votes.dem[i][d];
            entry.1[d] += votes.rep[i][d];
            ndv[d] += votes.dem[i][d];
            nrv[d] += votes.rep[i][d];
        }
        entry.2 += 1;
    }
    let n = elections.len() as f64;
    for v in ndv.iter_mut().chain(nrv.iter_mut()) {
        *v /= n;
    }
    let by_year = by_year
        .into_iter()
        .map(|(year, (mut adv, mut arv, count))| {
            for v in adv.iter_mut().chain(arv.iter_mut()) {
                *v /= count as f64;
            }
            (year, (adv, arv))
        })
        .collect();
    Ok(VoteAverages { by_year, ndv, nrv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn two_election_map() -> RedistMap {
        synth::grid_map(2, 2, 2, 0.5).build().unwrap()
    }

    #[test]
    fn discovery_finds_both_parties() {
        let map = two_election_map();
        let set = ElectionSet::discover(&map).unwrap();
        assert_eq!(set.len(), 2);
        for e in &set.elections {
            assert!(!e.dem.is_empty() && !e.rep.is_empty());
        }
    }

    #[test]
    fn single_election_ndv_is_district_total() {
        let mut plan_labels = vec![1u16, 1, 2, 2];
        let map = two_election_map();
        let plan = Plan::new(std::mem::take(&mut plan_labels), 2).unwrap();
        let set = ElectionSet::discover(&map).unwrap();
        let one = ElectionSet { elections: vec![set.elections[0].clone()] };
        let avg = aggregate_elections(&plan, &one).unwrap();
        let direct = tally(&plan, &one.elections[0].dem).unwrap();
        assert_eq!(avg.ndv, direct);
    }

    #[test]
    fn mean_over_two_elections() {
        // synthetic pair of single-node elections: dem totals 100 and 200
        let e1 = Election {
            office: "pre".into(),
            year: "16".into(),
            dem_column: "pre_16_dem_aaa".into(),
            rep_column: "pre_16_rep_bbb".into(),
            dem: vec![100.0],
            rep: vec![50.0],
        };
        let e2 = Election {
            office: "uss".into(),
            year: "16".into(),
            dem_column: "uss_16_dem_ccc".into(),
            rep_column: "uss_16_rep_ddd".into(),
            dem: vec![200.0],
            rep: vec![70.0],
        };
        let set = ElectionSet { elections: vec![e1, e2] };
        let plan = Plan::new(vec![1], 1).unwrap();
        let avg = aggregate_elections(&plan, &set).unwrap();
        assert_eq!(avg.ndv, vec![150.0]);
        assert_eq!(avg.nrv, vec![60.0]);
        // same-year average
        let (adv, arv) = &avg.by_year["16"];
        assert_eq!(adv, &vec![150.0]);
        assert_eq!(arv, &vec![60.0]);
    }

    #[test]
    fn empty_set_is_config_error() {
        let plan = Plan::new(vec![1], 1).unwrap();
        let set = ElectionSet::default();
        assert!(matches!(district_votes(&plan, &set), Err(Error::Config(_))));
    }
}
