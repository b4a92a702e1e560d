//! Hard-constraint parameters and soft Gibbs energy terms.
//!
//! Hard constraints (parity window, admin-split cap) are enforced by the
//! sampler itself; soft terms only reweight: a plan's sampling weight is
//! multiplied by `exp(-total_energy)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::Plan;
use crate::ingest::RedistMap;

/// A soft Gibbs energy term with strength `beta >= 0`.
#[derive(Clone)]
pub enum SoftTerm {
    /// Penalizes shortfall of a demographic group share against a target in
    /// the `ndistricts` districts with the highest group share:
    /// `beta * max(0, target - share)^exponent` per penalized district.
    GroupHinge {
        /// `vap_*` subgroup column name.
        group: String,
        target: f64,
        exponent: f64,
        /// Number of opportunity districts the hinge applies to.
        ndistricts: usize,
        beta: f64,
    },
    /// Penalizes the total number of admin-unit splits:
    /// `beta * sum_unit (districts intersecting unit - 1)`.
    SplitsPenalty { units: String, beta: f64 },
    /// Caller-supplied plan energy, scaled by `beta`. Only available
    /// programmatically; run configs cannot declare it.
    Custom {
        name: String,
        beta: f64,
        eval: Arc<dyn Fn(&Plan, &RedistMap) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for SoftTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SoftTerm::GroupHinge { group, target, exponent, ndistricts, beta } => f
                .debug_struct("GroupHinge")
                .field("group", group)
                .field("target", target)
                .field("exponent", exponent)
                .field("ndistricts", ndistricts)
                .field("beta", beta)
                .finish(),
            SoftTerm::SplitsPenalty { units, beta } => {
                f.debug_struct("SplitsPenalty").field("units", units).field("beta", beta).finish()
            }
            SoftTerm::Custom { name, beta, .. } => {
                f.debug_struct("Custom").field("name", name).field("beta", beta).finish()
            }
        }
    }
}

impl SoftTerm {
    pub fn beta(&self) -> f64 {
        match self {
            SoftTerm::GroupHinge { beta, .. }
            | SoftTerm::SplitsPenalty { beta, .. }
            | SoftTerm::Custom { beta, .. } => *beta,
        }
    }
}

/// Hard-constraint parameters plus the soft term list.
#[derive(Debug, Clone)]
pub struct ConstraintSpec {
    /// Maximum relative deviation from population parity, in (0, 1).
    pub pop_tol: f64,
    /// Name of the admin-unit vector whose splits are capped at
    /// `ndists - 1`, or `None` for no cap.
    pub admin_split_units: Option<String>,
    /// Compactness exponent: plans are weighted by the product of district
    /// spanning-tree counts raised to `rho`.
    pub rho: f64,
    pub soft_terms: Vec<SoftTerm>,
}

impl ConstraintSpec {
    pub fn new(pop_tol: f64) -> Result<ConstraintSpec> {
        if !(pop_tol > 0.0 && pop_tol < 1.0) {
            return Err(Error::Domain(format!("pop_tol {pop_tol} outside (0, 1)")));
        }
        Ok(ConstraintSpec { pop_tol, admin_split_units: None, rho: 1.0, soft_terms: Vec::new() })
    }

    pub fn with_split_cap(mut self, units: &str) -> ConstraintSpec {
        self.admin_split_units = Some(units.to_string());
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Result<ConstraintSpec> {
        if rho < 0.0 {
            return Err(Error::Domain(format!("rho {rho} must be >= 0")));
        }
        self.rho = rho;
        Ok(self)
    }

    pub fn with_term(mut self, term: SoftTerm) -> Result<ConstraintSpec> {
        if term.beta() < 0.0 {
            return Err(Error::Domain("soft term strength must be >= 0".into()));
        }
        if let SoftTerm::GroupHinge { target, exponent, .. } = &term {
            if !(0.0..=1.0).contains(target) {
                return Err(Error::Domain(format!("hinge target {target} outside [0, 1]")));
            }
            if *exponent <= 0.0 {
                return Err(Error::Domain("hinge exponent must be positive".into()));
            }
        }
        self.soft_terms.push(term);
        Ok(self)
    }
}

/// Hinge penalty for one district: `max(0, target - share)^exponent`.
/// Zero exactly when the share meets the target.
pub fn group_hinge_energy(share: f64, target: f64, exponent: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&share) {
        return Err(Error::Domain(format!("share {share} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Domain(format!("target {target} outside [0, 1]")));
    }
    if exponent <= 0.0 {
        return Err(Error::Domain(format!("exponent {exponent} must be positive")));
    }
    Ok((target - share).max(0.0).powf(exponent))
}

/// Total split count: for each unit, the number of districts it intersects
/// minus one, summed over units.
pub fn splits_energy(plan: &Plan, units: &[String]) -> Result<f64> {
    Ok(count_splits(plan.assignment(), units, None)? as f64)
}

/// Split count over a label vector, optionally ignoring one sentinel label.
/// `assignment` entries of 0 (used by partial plans) are treated as one
/// extra shared part.
pub(crate) fn count_splits(
    assignment: &[u16],
    units: &[String],
    ignore: Option<&str>,
) -> Result<u64> {
    if units.len() != assignment.len() {
        return Err(Error::Shape(format!(
            "unit vector length {} != assignment length {}",
            units.len(),
            assignment.len()
        )));
    }
    let mut parts: std::collections::HashMap<&str, std::collections::HashSet<u16>> =
        std::collections::HashMap::new();
    for (label, &d) in units.iter().zip(assignment) {
        if ignore == Some(label.as_str()) {
            continue;
        }
        parts.entry(label.as_str()).or_default().insert(d);
    }
    Ok(parts.values().map(|s| (s.len() as u64).saturating_sub(1)).sum())
}

/// Evaluates the hinge term on a complete plan: the `ndistricts` districts
/// with the highest group share are penalized for any shortfall below the
/// target; all other districts contribute nothing.
fn hinge_plan_energy(
    plan: &Plan,
    map: &RedistMap,
    group: &str,
    target: f64,
    exponent: f64,
    ndistricts: usize,
) -> Result<f64> {
    let group_col = map
        .subgroup_column(group)
        .ok_or_else(|| Error::Config(format!("unknown vap subgroup {group:?}")))?;
    let group_tally = crate::graph::tally(plan, group_col)?;
    let vap_tally = crate::graph::tally(plan, map.vap())?;
    let mut shares: Vec<f64> = group_tally
        .iter()
        .zip(&vap_tally)
        .map(|(&g, &v)| if v > 0.0 { g / v } else { 0.0 })
        .collect();
    shares.sort_by(|a, b| b.total_cmp(a));
    let mut energy = 0.0;
    for &share in shares.iter().take(ndistricts) {
        energy += group_hinge_energy(share, target, exponent)?;
    }
    Ok(energy)
}

/// Total Gibbs energy of a plan: the sum of `beta * psi` over soft terms.
/// The sampler weights plans by `exp(-total_energy)`.
pub fn total_energy(plan: &Plan, map: &RedistMap, spec: &ConstraintSpec) -> Result<f64> {
    let mut total = 0.0;
    for term in &spec.soft_terms {
        total += match term {
            SoftTerm::GroupHinge { group, target, exponent, ndistricts, beta } => {
                beta * hinge_plan_energy(plan, map, group, *target, *exponent, *ndistricts)?
            }
            SoftTerm::SplitsPenalty { units, beta } => {
                let labels = map
                    .admin_unit(units)
                    .ok_or_else(|| Error::Config(format!("unknown admin unit {units:?}")))?;
                beta * splits_energy(plan, labels)?
            }
            SoftTerm::Custom { beta, eval, .. } => beta * eval(plan, map),
        };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn hinge_examples() {
        assert_eq!(group_hinge_energy(0.55, 0.52, 2.0).unwrap(), 0.0);
        assert_eq!(group_hinge_energy(0.52, 0.52, 2.0).unwrap(), 0.0);
        let e = group_hinge_energy(0.40, 0.52, 2.0).unwrap();
        assert!((e - 0.0144).abs() < 1e-12);
        assert!(group_hinge_energy(1.5, 0.52, 2.0).is_err());
    }

    #[test]
    fn hinge_monotone_and_continuous_at_target() {
        let mut prev = f64::MAX;
        for i in 0..=100 {
            let share = i as f64 / 100.0;
            let e = group_hinge_energy(share, 0.52, 2.0).unwrap();
            assert!(e <= prev + 1e-15);
            prev = e;
        }
        let eps = 1e-9;
        let below = group_hinge_energy(0.52 - eps, 0.52, 2.0).unwrap();
        assert!(below < 1e-15);
    }

    #[test]
    fn splits_examples() {
        let units = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let p = Plan::new(vec![1, 1, 2, 2], 2).unwrap();
        assert_eq!(splits_energy(&p, &units(&["A", "A", "B", "B"])).unwrap(), 0.0);
        let q = Plan::new(vec![1, 2, 1, 2], 2).unwrap();
        assert_eq!(splits_energy(&q, &units(&["A", "A", "B", "B"])).unwrap(), 2.0);
        let r = Plan::new(vec![1, 2, 3], 3).unwrap();
        assert_eq!(splits_energy(&r, &units(&["A", "A", "A"])).unwrap(), 2.0);
    }

    #[test]
    fn splits_shape_error() {
        let p = Plan::new(vec![1, 2], 2).unwrap();
        assert!(matches!(splits_energy(&p, &["A".to_string()]), Err(Error::Shape(_))));
    }

    #[test]
    fn empty_terms_zero_energy() {
        let map = synth::grid_map(2, 2, 2, 0.5).build().unwrap();
        let plan = Plan::new(vec![1, 1, 2, 2], 2).unwrap();
        let spec = ConstraintSpec::new(0.05).unwrap();
        assert_eq!(total_energy(&plan, &map, &spec).unwrap(), 0.0);
    }

    #[test]
    fn inactive_hinge_zero_energy() {
        let map = synth::grid_map(2, 2, 2, 0.5).build().unwrap();
        let plan = Plan::new(vec![1, 1, 2, 2], 2).unwrap();
        let spec = ConstraintSpec::new(0.05)
            .unwrap()
            .with_term(SoftTerm::GroupHinge {
                group: "vap_black".into(),
                target: 0.0,
                exponent: 2.0,
                ndistricts: 2,
                beta: 5.0,
            })
            .unwrap();
        assert_eq!(total_energy(&plan, &map, &spec).unwrap(), 0.0);
    }

    #[test]
    fn energy_is_additive_and_linear_in_beta() {
        let map = synth::grid_map(4, 4, 2, 0.5).build().unwrap();
        let plan = Plan::new(
            (0..16).map(|i| if i % 4 < 2 { 1 } else { 2 }).collect::<Vec<u16>>(),
            2,
        )
        .unwrap();
        let hinge = SoftTerm::GroupHinge {
            group: "vap_black".into(),
            target: 0.9,
            exponent: 2.0,
            ndistricts: 1,
            beta: 3.0,
        };
        let splits = SoftTerm::SplitsPenalty { units: "county".into(), beta: 2.0 };
        let spec_a = ConstraintSpec::new(0.05).unwrap().with_term(hinge.clone()).unwrap();
        let spec_b = ConstraintSpec::new(0.05).unwrap().with_term(splits.clone()).unwrap();
        let spec_ab = ConstraintSpec::new(0.05)
            .unwrap()
            .with_term(hinge.clone())
            .unwrap()
            .with_term(splits.clone())
            .unwrap();
        let (ea, eb, eab) = (
            total_energy(&plan, &map, &spec_a).unwrap(),
            total_energy(&plan, &map, &spec_b).unwrap(),
            total_energy(&plan, &map, &spec_ab).unwrap(),
        );
        assert!((eab - (ea + eb)).abs() < 1e-12);
        assert!(eab > 0.0);

        // doubling every beta doubles the energy exactly
        let doubled = ConstraintSpec::new(0.05)
            .unwrap()
            .with_term(SoftTerm::GroupHinge {
                group: "vap_black".into(),
                target: 0.9,
                exponent: 2.0,
                ndistricts: 1,
                beta: 6.0,
            })
            .unwrap()
            .with_term(SoftTerm::SplitsPenalty { units: "county".into(), beta: 4.0 })
            .unwrap();
        let e2 = total_energy(&plan, &map, &doubled).unwrap();
        assert!((e2 - 2.0 * eab).abs() < 1e-12);
    }

    #[test]
    fn energy_invariant_under_relabeling() {
        let map = synth::grid_map(4, 4, 2, 0.5).build().unwrap();
        let plan = Plan::new(
            (0..16).map(|i| if i % 4 < 2 { 1 } else { 2 }).collect::<Vec<u16>>(),
            2,
        )
        .unwrap();
        let spec = ConstraintSpec::new(0.05)
            .unwrap()
            .with_term(SoftTerm::GroupHinge {
                group: "vap_black".into(),
                target: 0.9,
                exponent: 2.0,
                ndistricts: 1,
                beta: 3.0,
            })
            .unwrap()
            .with_term(SoftTerm::SplitsPenalty { units: "county".into(), beta: 2.0 })
            .unwrap();
        let swapped = plan.relabeled(&[2, 1]).unwrap();
        let e1 = total_energy(&plan, &map, &spec).unwrap();
        let e2 = total_energy(&swapped, &map, &spec).unwrap();
        assert!((e1 - e2).abs() < 1e-12);
    }

    #[test]
    fn custom_term_evaluates() {
        let map = synth::grid_map(2, 2, 2, 0.5).build().unwrap();
        let plan = Plan::new(vec![1, 1, 2, 2], 2).unwrap();
        let spec = ConstraintSpec::new(0.05)
            .unwrap()
            .with_term(SoftTerm::Custom {
                name: "fixed".into(),
                beta: 2.5,
                eval: Arc::new(|_, _| 2.0),
            })
            .unwrap();
        assert_eq!(total_energy(&plan, &map, &spec).unwrap(), 5.0);
    }
}
