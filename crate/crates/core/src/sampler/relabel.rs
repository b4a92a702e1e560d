//! District renumbering against a reference plan.

use crate::error::{Error, Result};
use crate::exec;
use crate::graph::Plan;
use crate::ingest::RedistMap;
use crate::sampler::PlanEnsemble;

/// Minimum-cost assignment on a square matrix via the Hungarian algorithm
/// with row/column potentials, O(n^3). Returns the column assigned to each
/// row.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based internal arrays; index 0 is the virtual unmatched column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Population overlap matrix: `overlap[d][r]` is the population shared by
/// district `d+1` of `plan` and district `r+1` of `reference`.
pub fn overlap_matrix(plan: &[u16], reference: &Plan, pops: &[f64]) -> Result<Vec<Vec<f64>>> {
    if plan.len() != reference.node_count() || plan.len() != pops.len() {
        return Err(Error::Shape("plan, reference, and weights must align".into()));
    }
    let k = reference.ndists() as usize;
    let mut overlap = vec![vec![0.0; k]; k];
    for ((&d, &r), &pop) in plan.iter().zip(reference.assignment()).zip(pops) {
        let (d, r) = (d as usize - 1, r as usize - 1);
        if d >= k {
            return Err(Error::Shape("plan label exceeds reference district count".into()));
        }
        overlap[d][r] += pop;
    }
    Ok(overlap)
}

/// The label permutation maximizing total overlap population with the
/// reference: district `d+1` should be renamed `perm[d]`.
pub fn best_relabeling(plan: &[u16], reference: &Plan, pops: &[f64]) -> Result<Vec<u16>> {
    let overlap = overlap_matrix(plan, reference, pops)?;
    let cost: Vec<Vec<f64>> =
        overlap.iter().map(|row| row.iter().map(|&o| -o).collect()).collect();
    Ok(min_cost_assignment(&cost).into_iter().map(|c| c as u16 + 1).collect())
}

/// Renumbers every plan in the ensemble so its labels best match the
/// reference plan by overlap population. District statistics are label
/// permutations only; nothing else changes.
pub fn match_numbers(
    ensemble: &mut PlanEnsemble,
    map: &RedistMap,
    reference: &Plan,
) -> Result<()> {
    if reference.node_count() != ensemble.node_count() {
        return Err(Error::Shape(format!(
            "reference plan length {} != ensemble node count {}",
            reference.node_count(),
            ensemble.node_count()
        )));
    }
    if reference.ndists() != ensemble.ndists() {
        return Err(Error::Shape(format!(
            "reference has {} districts, ensemble has {}",
            reference.ndists(),
            ensemble.ndists()
        )));
    }
    let pops = map.pops();
    let relabeled: Vec<Vec<u16>> = {
        let entries = ensemble.entries();
        exec::map_indexed(entries, |_, entry| {
            let perm = best_relabeling(&entry.assignment, reference, pops)?;
            Ok(entry.assignment.iter().map(|&d| perm[d as usize - 1]).collect())
        })
        .into_iter()
        .collect::<Result<_>>()?
    };
    for (entry, assignment) in ensemble.entries_mut().iter_mut().zip(relabeled) {
        entry.assignment = assignment;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tally;
    use crate::synth;

    fn brute_force_best(overlap: &[Vec<f64>]) -> f64 {
        fn permutations(k: usize) -> Vec<Vec<usize>> {
            if k == 1 {
                return vec![vec![0]];
            }
            let mut out = Vec::new();
            for p in permutations(k - 1) {
                for slot in 0..k {
                    let mut q: Vec<usize> = p.iter().map(|&x| if x >= slot { x + 1 } else { x }).collect();
                    q.push(slot);
                    out.push(q);
                }
            }
            out
        }
        let k = overlap.len();
        permutations(k)
            .into_iter()
            .map(|p| (0..k).map(|d| overlap[d][p[d]]).sum())
            .fold(f64::MIN, f64::max)
    }

    #[test]
    fn identity_for_identical_plan() {
        let reference = synth::column_plan(2, 4, 2);
        let pops = vec![1.0; 8];
        let perm = best_relabeling(reference.assignment(), &reference, &pops).unwrap();
        assert_eq!(perm, vec![1, 2]);
    }

    #[test]
    fn swapped_labels_swap_back() {
        let reference = synth::column_plan(2, 4, 2);
        let swapped = reference.relabeled(&[2, 1]).unwrap();
        let pops = vec![1.0; 8];
        let perm = best_relabeling(swapped.assignment(), &reference, &pops).unwrap();
        assert_eq!(perm, vec![2, 1]);
        let restored = swapped.relabeled(&perm).unwrap();
        assert_eq!(restored.assignment(), reference.assignment());
    }

    #[test]
    fn three_district_overlap_example() {
        // overlap [[5,0,1],[0,6,0],[2,0,4]]: identity assignment, total 15
        let overlap = vec![vec![5.0, 0.0, 1.0], vec![0.0, 6.0, 0.0], vec![2.0, 0.0, 4.0]];
        let cost: Vec<Vec<f64>> =
            overlap.iter().map(|r| r.iter().map(|&o| -o).collect()).collect();
        let assignment = min_cost_assignment(&cost);
        assert_eq!(assignment, vec![0, 1, 2]);
        let total: f64 = (0..3).map(|d| overlap[d][assignment[d]]).sum();
        assert_eq!(total, 15.0);
        assert_eq!(total, brute_force_best(&overlap));
    }

    #[test]
    fn hungarian_matches_brute_force_on_random_matrices() {
        use rand::Rng;
        let mut rng = crate::rng::derive_rng(31, &[7]);
        for k in 2..=4usize {
            for _ in 0..200 {
                let overlap: Vec<Vec<f64>> = (0..k)
                    .map(|_| (0..k).map(|_| rng.gen_range(0..100) as f64).collect())
                    .collect();
                let cost: Vec<Vec<f64>> =
                    overlap.iter().map(|r| r.iter().map(|&o| -o).collect()).collect();
                let assignment = min_cost_assignment(&cost);
                let total: f64 = (0..k).map(|d| overlap[d][assignment[d]]).sum();
                let best = brute_force_best(&overlap);
                assert!(
                    (total - best).abs() < 1e-9,
                    "k={k}: hungarian {total} vs brute force {best} on {overlap:?}"
                );
            }
        }
    }

    #[test]
    fn match_numbers_preserves_statistics_as_multisets() {
        let map = synth::grid_map(4, 4, 2, 0.05).build().unwrap();
        let reference = synth::column_plan(4, 4, 2);
        let mut ensemble = PlanEnsemble::new(16, 2);
        let shuffled = reference.relabeled(&[2, 1]).unwrap();
        ensemble.push_sim(shuffled.assignment().to_vec(), 1.0, 1);
        let before = {
            let plan = ensemble.plan(0).unwrap();
            let mut t = tally(&plan, map.pops()).unwrap();
            t.sort_by(f64::total_cmp);
            t
        };
        match_numbers(&mut ensemble, &map, &reference).unwrap();
        let after_plan = ensemble.plan(0).unwrap();
        assert_eq!(after_plan.assignment(), reference.assignment());
        let mut after = tally(&after_plan, map.pops()).unwrap();
        after.sort_by(f64::total_cmp);
        assert_eq!(before, after);
    }
}
