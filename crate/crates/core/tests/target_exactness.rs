//! Distribution-level checks of the sampler against enumeration oracles.
//!
//! The oracles enumerate feasible partitions by subset search with their
//! own connectivity checks, and weight them by spanning-tree counts from
//! the matrix-tree determinant (itself verified against exhaustive tree
//! enumeration in unit tests). Single-split instances make the sampler's
//! importance weights exact, so total-variation comparisons are valid for
//! any two-district instance; multi-district checks use symmetric
//! instances where every ordering is equivalent.

use std::collections::HashMap;

use districter_core::constraints::{ConstraintSpec, SoftTerm};
use districter_core::graph::{is_contiguous, tally, Graph, NodeMask, Plan};
use districter_core::ingest::{MapParams, PrecinctRecord, RedistMap};
use districter_core::sampler::{smc_sample, PlanEnsemble, SamplerParams};
use districter_core::synth;
use districter_core::tree::log_spanning_tree_count;

fn bare_map(graph: Graph, ndists: u16, pop_tol: f64) -> RedistMap {
    let records = (0..graph.node_count())
        .map(|i| {
            let mut vap_subgroups = std::collections::BTreeMap::new();
            for name in districter_core::ingest::VAP_SUBGROUPS {
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
                votes: Default::default(),
                cd_2010: None,
                cd_2020: None,
                area: None,
                perimeter: None,
                shared_edge_lengths: Default::default(),
            }
        })
        .collect();
    RedistMap::from_parts(graph, records, &MapParams::new(ndists, pop_tol)).unwrap()
}

/// Independent connectivity check over a bitmask subset (iterative DFS on
/// the raw edge list; no engine graph helpers).
fn mask_connected(n: usize, edges: &[(usize, usize)], mask: u32) -> bool {
    if mask == 0 {
        return false;
    }
    let start = mask.trailing_zeros() as usize;
    let mut seen = 1u32 << start;
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            let v = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if mask >> v & 1 == 1 && seen >> v & 1 == 0 {
                seen |= 1 << v;
                stack.push(v);
            }
        }
    }
    seen == mask && (mask & !((1u32 << n) - 1)) == 0
}

/// Enumerates all feasible 2-district partitions (canonical form: node 0
/// in district 1) with unnormalized target weights
/// `tau(D)^rho * tau(D')^rho * exp(-energy)`.
fn enumerate_two_district(
    map: &RedistMap,
    pop_tol: f64,
    rho: f64,
    energy: impl Fn(&[u16]) -> f64,
) -> HashMap<Vec<u16>, f64> {
    let n = map.node_count();
    assert!(n <= 20, "oracle is exponential in node count");
    let edges = map.graph().edges().to_vec();
    let pops = map.pops();
    let parity = map.parity_population();
    let (lo, hi) = (parity * (1.0 - pop_tol), parity * (1.0 + pop_tol));
    let mut out = HashMap::new();
    for mask in 1u32..((1u32 << n) - 1) {
        if mask & 1 == 0 {
            continue; // canonical: node 0 belongs to district 1
        }
        let comp = !mask & ((1u32 << n) - 1);
        let pop_a: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| pops[i]).sum();
        let pop_b: f64 = (0..n).filter(|&i| comp >> i & 1 == 1).map(|i| pops[i]).sum();
        if pop_a < lo || pop_a > hi || pop_b < lo || pop_b > hi {
            continue;
        }
        if !mask_connected(n, &edges, mask) || !mask_connected(n, &edges, comp) {
            continue;
        }
        let assignment: Vec<u16> =
            (0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { 2 }).collect();
        let mask_a = NodeMask::from_indices(n, &(0..n).filter(|&i| mask >> i & 1 == 1).collect::<Vec<_>>());
        let mask_b = NodeMask::from_indices(n, &(0..n).filter(|&i| comp >> i & 1 == 1).collect::<Vec<_>>());
        let log_tau = log_spanning_tree_count(map.graph(), &mask_a).unwrap()
            + log_spanning_tree_count(map.graph(), &mask_b).unwrap();
        let weight = (rho * log_tau - energy(&assignment)).exp();
        out.insert(assignment, weight);
    }
    out
}

/// Canonical form of a 2-district assignment: node 0 gets label 1.
fn canonical2(assignment: &[u16]) -> Vec<u16> {
    if assignment[0] == 1 {
        assignment.to_vec()
    } else {
        assignment.iter().map(|&d| 3 - d).collect()
    }
}

fn weighted_empirical(ensemble: &PlanEnsemble) -> HashMap<Vec<u16>, f64> {
    let mut acc: HashMap<Vec<u16>, f64> = HashMap::new();
    let nchains = ensemble.chain_ids().len().max(1) as f64;
    for e in ensemble.entries() {
        if e.draw.is_reference() {
            continue;
        }
        *acc.entry(canonical2(&e.assignment)).or_insert(0.0) += e.weight / nchains;
    }
    acc
}

fn total_variation(oracle: &HashMap<Vec<u16>, f64>, empirical: &HashMap<Vec<u16>, f64>) -> f64 {
    let z: f64 = oracle.values().sum();
    let mut tv = 0.0;
    for (key, &w) in oracle {
        tv += (w / z - empirical.get(key).copied().unwrap_or(0.0)).abs();
    }
    for key in empirical.keys() {
        assert!(oracle.contains_key(key), "sampled an infeasible plan: {key:?}");
    }
    tv / 2.0
}

#[test]
fn two_by_three_grid_matches_tree_count_target() {
    let map = bare_map(synth::grid_graph(2, 3), 2, 1e-6);
    let spec = ConstraintSpec::new(1e-6).unwrap();
    let oracle = enumerate_two_district(&map, 1e-6, 1.0, |_| 0.0);
    assert!(!oracle.is_empty());
    let params = SamplerParams::new(20_000, 1, 11);
    let ensemble = smc_sample(&map, &spec, &params).unwrap();
    let tv = total_variation(&oracle, &weighted_empirical(&ensemble));
    assert!(tv < 0.05, "tv = {tv}");
}

#[test]
fn rho_reweights_the_target() {
    // wide tolerance admits 2+4 splits whose districts have tau > 1, so
    // rho = 0 (uniform over feasible plans) and rho = 2 are distinct
    // targets; both must match their oracles
    let map = bare_map(synth::grid_graph(2, 3), 2, 0.34);
    for &rho in &[0.0, 2.0] {
        let spec = ConstraintSpec::new(0.34).unwrap().with_rho(rho).unwrap();
        let oracle = enumerate_two_district(&map, 0.34, rho, |_| 0.0);
        let params = SamplerParams::new(20_000, 1, 13);
        let ensemble = smc_sample(&map, &spec, &params).unwrap();
        let tv = total_variation(&oracle, &weighted_empirical(&ensemble));
        assert!(tv < 0.05, "rho={rho}: tv = {tv}");
    }
    // sanity: the two oracles genuinely differ
    let o0 = enumerate_two_district(&map, 0.34, 0.0, |_| 0.0);
    let o2 = enumerate_two_district(&map, 0.34, 2.0, |_| 0.0);
    let z0: f64 = o0.values().sum();
    let z2: f64 = o2.values().sum();
    let max_gap = o0
        .iter()
        .map(|(k, &w)| (w / z0 - o2[k] / z2).abs())
        .fold(0.0, f64::max);
    assert!(max_gap > 0.01, "targets should differ, gap {max_gap}");
}

#[test]
fn soft_splits_term_tilts_the_target() {
    // counties are the two grid rows; a splits penalty downweights plans
    // that cut across rows. Oracle energy counted with independent code.
    let map = synth::grid_map(2, 3, 2, 0.34).elections(false).counties(2).build().unwrap();
    let beta = 0.8;
    let counties: Vec<String> = map.admin_unit("county").unwrap().to_vec();
    let oracle_energy = |assignment: &[u16]| -> f64 {
        let mut parts: HashMap<&str, std::collections::HashSet<u16>> = HashMap::new();
        for (label, &d) in counties.iter().zip(assignment) {
            parts.entry(label.as_str()).or_default().insert(d);
        }
        beta * parts.values().map(|s| (s.len() - 1) as f64).sum::<f64>()
    };
    let oracle = enumerate_two_district(&map, 0.34, 1.0, oracle_energy);
    let spec = ConstraintSpec::new(0.34)
        .unwrap()
        .with_term(SoftTerm::SplitsPenalty { units: "county".into(), beta })
        .unwrap();
    let params = SamplerParams::new(20_000, 1, 17);
    let ensemble = smc_sample(&map, &spec, &params).unwrap();
    let tv = total_variation(&oracle, &weighted_empirical(&ensemble));
    assert!(tv < 0.05, "tv = {tv}");
}

#[test]
fn six_cycle_three_districts_uniform_by_symmetry() {
    // C6 into three adjacent pairs: exactly two partitions, symmetric in
    // every respect, so each should appear half the time
    let graph = Graph::new(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]).unwrap();
    let map = bare_map(graph, 3, 1e-6);
    let spec = ConstraintSpec::new(1e-6).unwrap();
    let params = SamplerParams::new(10_000, 1, 19);
    let ensemble = smc_sample(&map, &spec, &params).unwrap();
    let mut freq: HashMap<bool, f64> = HashMap::new();
    for e in ensemble.entries() {
        let plan = Plan::new(e.assignment.clone(), 3).unwrap();
        assert!(is_contiguous(map.graph(), &plan).unwrap());
        let pops = tally(&plan, map.pops()).unwrap();
        assert_eq!(pops, vec![2.0, 2.0, 2.0]);
        // partition identified by whether nodes 0 and 1 share a district
        *freq.entry(e.assignment[0] == e.assignment[1]).or_insert(0.0) += e.weight;
    }
    let total: f64 = freq.values().sum();
    let p01 = freq.get(&true).copied().unwrap_or(0.0) / total;
    assert!((p01 - 0.5).abs() < 0.02, "partition frequency {p01}");
}

#[test]
fn path_six_three_districts_is_forced() {
    let graph = Graph::new(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
    let map = bare_map(graph, 3, 1e-6);
    let spec = ConstraintSpec::new(1e-6).unwrap();
    let params = SamplerParams::new(500, 1, 23);
    let ensemble = smc_sample(&map, &spec, &params).unwrap();
    for e in ensemble.entries() {
        assert_eq!(e.assignment[0], e.assignment[1]);
        assert_eq!(e.assignment[2], e.assignment[3]);
        assert_eq!(e.assignment[4], e.assignment[5]);
    }
}

#[cfg(feature = "parallel")]
#[test]
fn identical_output_across_thread_counts() {
    let map = synth::grid_map(6, 6, 3, 0.1).build().unwrap();
    let spec = ConstraintSpec::new(0.1).unwrap().with_split_cap("county");
    let params = SamplerParams::new(64, 2, 97);
    let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = pool1.install(|| smc_sample(&map, &spec, &params)).unwrap();
    let b = pool4.install(|| smc_sample(&map, &spec, &params)).unwrap();
    assert_eq!(a.entries().len(), b.entries().len());
    for (x, y) in a.entries().iter().zip(b.entries()) {
        assert_eq!(x.assignment, y.assignment);
        assert_eq!(x.weight.to_bits(), y.weight.to_bits());
        assert_eq!(x.draw, y.draw);
    }
    assert_eq!(a.stage_acceptance, b.stage_acceptance);
}
