//! Ensembles of sampled plans with weights, chain ids, and reference plans.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{is_contiguous, Plan};
use crate::ingest::RedistMap;

/// Identifies one row group of an ensemble: a numbered simulated draw or a
/// named reference plan.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DrawId {
    Sim(u32),
    Reference(String),
}

impl DrawId {
    /// Export label: the draw number for simulations, the name for
    /// references.
    pub fn label(&self) -> String {
        match self {
            DrawId::Sim(k) => k.to_string(),
            DrawId::Reference(name) => name.clone(),
        }
    }

    pub fn is_reference(&self) -> bool {
        matches!(self, DrawId::Reference(_))
    }
}

/// One plan in an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleEntry {
    pub draw: DrawId,
    /// Chain the plan was sampled in (1-based); `None` for references.
    pub chain: Option<u32>,
    /// Final importance weight, normalized to sum to 1 within each chain.
    /// References carry weight 0.
    pub weight: f64,
    pub assignment: Vec<u16>,
}

/// A matrix of sampled plans plus per-plan weights, chain ids, and flagged
/// reference plans, with the sampler's per-stage diagnostics alongside.
#[derive(Debug, Clone, Default)]
pub struct PlanEnsemble {
    node_count: usize,
    ndists: u16,
    entries: Vec<EnsembleEntry>,
    /// Per chain, per stage: fraction of particles that split successfully.
    pub stage_acceptance: Vec<Vec<f64>>,
    /// Per chain: stages after which resampling fired.
    pub resampled_stages: Vec<Vec<usize>>,
    /// Seed the ensemble was sampled with (metadata for exports).
    pub seed: u64,
}

impl PlanEnsemble {
    pub fn new(node_count: usize, ndists: u16) -> PlanEnsemble {
        PlanEnsemble {
            node_count,
            ndists,
            entries: Vec::new(),
            stage_acceptance: Vec::new(),
            resampled_stages: Vec::new(),
            seed: 0,
        }
    }

    /// Builds an ensemble from already-validated rows (e.g. re-loaded from
    /// disk). Every assignment must have the right length and in-range,
    /// fully used labels.
    pub fn from_entries(
        node_count: usize,
        ndists: u16,
        entries: Vec<EnsembleEntry>,
    ) -> Result<PlanEnsemble> {
        for e in &entries {
            if e.assignment.len() != node_count {
                return Err(Error::Shape(format!(
                    "draw {}: assignment length {} != node count {node_count}",
                    e.draw.label(),
                    e.assignment.len()
                )));
            }
            Plan::new(e.assignment.clone(), ndists)?;
        }
        Ok(PlanEnsemble {
            node_count,
            ndists,
            entries,
            stage_acceptance: Vec::new(),
            resampled_stages: Vec::new(),
            seed: 0,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn ndists(&self) -> u16 {
        self.ndists
    }

    pub fn entries(&self) -> &[EnsembleEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [EnsembleEntry] {
        &mut self.entries
    }

    /// Number of non-reference plans.
    pub fn n_sims(&self) -> usize {
        self.entries.iter().filter(|e| !e.draw.is_reference()).count()
    }

    pub fn n_references(&self) -> usize {
        self.entries.len() - self.n_sims()
    }

    /// Distinct chain ids in ascending order.
    pub fn chain_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.entries.iter().filter_map(|e| e.chain).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn plan(&self, index: usize) -> Result<Plan> {
        Plan::new(self.entries[index].assignment.clone(), self.ndists)
    }

    /// Appends a simulated plan; the draw number continues the sequence.
    pub fn push_sim(&mut self, assignment: Vec<u16>, weight: f64, chain: u32) {
        let next = self.n_sims() as u32 + 1;
        self.entries.push(EnsembleEntry {
            draw: DrawId::Sim(next),
            chain: Some(chain),
            weight,
            assignment,
        });
    }

    /// Adds a named reference plan. Contiguity is enforced; population
    /// parity is not, since enacted plans may sit outside the simulation
    /// tolerance. The reference carries weight 0 and no chain id.
    pub fn add_reference(&mut self, map: &RedistMap, plan: &Plan, name: &str) -> Result<()> {
        if plan.node_count() != self.node_count {
            return Err(Error::Shape(format!(
                "reference plan length {} != ensemble node count {}",
                plan.node_count(),
                self.node_count
            )));
        }
        if plan.ndists() != self.ndists {
            return Err(Error::Shape(format!(
                "reference plan has {} districts, ensemble has {}",
                plan.ndists(),
                self.ndists
            )));
        }
        if self
            .entries
            .iter()
            .any(|e| matches!(&e.draw, DrawId::Reference(n) if n == name))
        {
            return Err(Error::Name(format!("reference plan {name:?} already exists")));
        }
        if !is_contiguous(map.graph(), plan)? {
            return Err(Error::NotContiguous(format!("reference plan {name:?}")));
        }
        self.entries.push(EnsembleEntry {
            draw: DrawId::Reference(name.to_string()),
            chain: None,
            weight: 0.0,
            assignment: plan.assignment().to_vec(),
        });
        Ok(())
    }

    /// Thins to `m` non-reference plans by uniform subsampling without
    /// replacement, preserving entry order, chain labels, weights, and all
    /// reference plans.
    pub fn thin<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<PlanEnsemble> {
        let sim_indices: Vec<usize> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.draw.is_reference())
            .map(|(i, _)| i)
            .collect();
        if m > sim_indices.len() {
            return Err(Error::Domain(format!(
                "cannot thin {} plans to {m}",
                sim_indices.len()
            )));
        }
        let mut picked: Vec<usize> =
            rand::seq::index::sample(rng, sim_indices.len(), m).into_iter().collect();
        picked.sort_unstable();
        let mut keep = vec![false; self.entries.len()];
        for p in picked {
            keep[sim_indices[p]] = true;
        }
        let entries = self
            .entries
            .iter()
            .enumerate()
            .filter(|(i, e)| e.draw.is_reference() || keep[*i])
            .map(|(_, e)| e.clone())
            .collect();
        Ok(PlanEnsemble { entries, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use crate::synth;

    fn toy_ensemble(n_sims: usize) -> (RedistMap, PlanEnsemble) {
        let map = synth::grid_map(2, 4, 2, 0.05).build().unwrap();
        let mut e = PlanEnsemble::new(8, 2);
        for k in 0..n_sims {
            let chain = (k % 2) as u32 + 1;
            let plan = synth::column_plan(2, 4, 2);
            e.push_sim(plan.assignment().to_vec(), 1.0, chain);
        }
        (map, e)
    }

    #[test]
    fn thin_counts_and_stability() {
        let (_, e) = toy_ensemble(100);
        let mut rng = derive_rng(9, &[1]);
        let thinned = e.thin(40, &mut rng).unwrap();
        assert_eq!(thinned.n_sims(), 40);
        // order-stable: draw numbers strictly increasing
        let draws: Vec<u32> = thinned
            .entries()
            .iter()
            .filter_map(|x| match x.draw {
                DrawId::Sim(k) => Some(k),
                _ => None,
            })
            .collect();
        assert!(draws.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn thin_to_current_size_is_identity() {
        let (_, e) = toy_ensemble(10);
        let mut rng = derive_rng(9, &[2]);
        let thinned = e.thin(10, &mut rng).unwrap();
        assert_eq!(thinned.entries().len(), e.entries().len());
        for (a, b) in thinned.entries().iter().zip(e.entries()) {
            assert_eq!(a.draw, b.draw);
            assert_eq!(a.assignment, b.assignment);
        }
    }

    #[test]
    fn thin_to_zero_keeps_references() {
        let (map, mut e) = toy_ensemble(5);
        let reference = synth::column_plan(2, 4, 2);
        e.add_reference(&map, &reference, "enacted").unwrap();
        let mut rng = derive_rng(9, &[3]);
        let thinned = e.thin(0, &mut rng).unwrap();
        assert_eq!(thinned.n_sims(), 0);
        assert_eq!(thinned.n_references(), 1);
    }

    #[test]
    fn thin_too_large_is_domain_error() {
        let (_, e) = toy_ensemble(5);
        let mut rng = derive_rng(9, &[4]);
        assert!(matches!(e.thin(6, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn duplicate_reference_name_rejected() {
        let (map, mut e) = toy_ensemble(2);
        let reference = synth::column_plan(2, 4, 2);
        e.add_reference(&map, &reference, "cd_2010").unwrap();
        let err = e.add_reference(&map, &reference, "cd_2010");
        assert!(matches!(err, Err(Error::Name(_))));
    }

    #[test]
    fn non_contiguous_reference_rejected() {
        let (map, mut e) = toy_ensemble(2);
        // alternate columns: disconnected districts on a 2x4 grid
        let bad = Plan::new(vec![1, 2, 1, 2, 1, 2, 1, 2], 2).unwrap();
        let err = e.add_reference(&map, &bad, "bad");
        assert!(matches!(err, Err(Error::NotContiguous(_))));
    }

    #[test]
    fn references_carry_zero_weight_and_no_chain() {
        let (map, mut e) = toy_ensemble(2);
        let reference = synth::column_plan(2, 4, 2);
        e.add_reference(&map, &reference, "enacted").unwrap();
        let r = e.entries().last().unwrap();
        assert_eq!(r.weight, 0.0);
        assert_eq!(r.chain, None);
        assert!(r.draw.is_reference());
    }
}
