//! Systematic resampling of weighted particles.

use rand::Rng;

use crate::error::{Error, Result};

/// Draws `weights.len()` ancestor indices by systematic resampling: one
/// uniform offset, then equally spaced strata through the cumulative
/// weights. The expected copy count of particle `i` is `N * w_i / sum(w)`,
/// and every realized count differs from its expectation by less than 1.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::Domain("cannot resample zero particles".into()));
    }
    let mut total = 0.0;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Domain(format!("invalid resampling weight {w}")));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::Domain("all resampling weights are zero".into()));
    }
    let step = total / n as f64;
    let offset = rng.gen::<f64>() * step;
    let mut ancestors = Vec::with_capacity(n);
    let mut i = 0;
    let mut cum = weights[0];
    for k in 0..n {
        let pos = offset + k as f64 * step;
        // advance past exhausted strata and zero-weight particles
        while (cum < pos || weights[i] == 0.0) && i + 1 < n {
            i += 1;
            cum += weights[i];
        }
        ancestors.push(i);
    }
    Ok(ancestors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn counts(ancestors: &[usize], n: usize) -> Vec<usize> {
        let mut c = vec![0; n];
        for &a in ancestors {
            c[a] += 1;
        }
        c
    }

    #[test]
    fn equal_weights_are_identity_multiset() {
        let mut rng = derive_rng(1, &[1]);
        for _ in 0..50 {
            let anc = systematic_resample(&[1.0; 8], &mut rng).unwrap();
            assert_eq!(counts(&anc, 8), vec![1; 8]);
        }
    }

    #[test]
    fn degenerate_weight_takes_all_slots() {
        let mut rng = derive_rng(2, &[1]);
        let anc = systematic_resample(&[1.0, 0.0, 0.0, 0.0], &mut rng).unwrap();
        assert_eq!(anc, vec![0, 0, 0, 0]);
    }

    #[test]
    fn three_one_split_is_exact() {
        // strata at 1/4 spacing make the {3,1} copy counts deterministic
        let mut rng = derive_rng(3, &[1]);
        for _ in 0..50 {
            let anc = systematic_resample(&[3.0, 1.0], &mut rng).unwrap();
            assert_eq!(anc.len(), 2);
        }
        let mut rng = derive_rng(3, &[2]);
        for _ in 0..50 {
            let w = [3.0, 1.0, 0.0, 0.0];
            // embed in N=4 to match the 4-slot example
            let anc = systematic_resample(&[3.0, 1.0, 0.0, 0.0], &mut rng).unwrap();
            let c = counts(&anc, w.len());
            assert_eq!(c, vec![3, 1, 0, 0]);
        }
    }

    #[test]
    fn zero_weights_rejected() {
        let mut rng = derive_rng(4, &[1]);
        assert!(matches!(
            systematic_resample(&[0.0, 0.0], &mut rng),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn copy_counts_within_one_of_expectation() {
        let mut rng = derive_rng(5, &[1]);
        let weights = [0.5, 2.5, 1.0, 4.0];
        let total: f64 = weights.iter().sum();
        let n = weights.len();
        for _ in 0..200 {
            let anc = systematic_resample(&weights, &mut rng).unwrap();
            let c = counts(&anc, n);
            for i in 0..n {
                let expected = n as f64 * weights[i] / total;
                assert!(
                    (c[i] as f64 - expected).abs() < 1.0,
                    "count {} vs expectation {expected}",
                    c[i]
                );
            }
        }
    }
}
