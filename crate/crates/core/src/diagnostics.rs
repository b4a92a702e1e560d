//! Convergence and diversity diagnostics for sampled ensembles.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::graph::Plan;
use crate::metrics::StatsTable;
use crate::rng::{derive_rng, stream};
use crate::sampler::PlanEnsemble;

/// Effective sample size of importance weights: `(sum w)^2 / sum w^2`.
/// Scale-invariant; `N` for uniform weights, 1 for a degenerate weight.
pub fn ess(weights: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Domain(format!("invalid weight {w}")));
        }
        sum += w;
        sum_sq += w * w;
    }
    if sum_sq <= 0.0 {
        return Err(Error::Domain("all weights are zero".into()));
    }
    Ok(sum * sum / sum_sq)
}

/// Variation-of-information distance between two plans viewed as
/// population-weighted partitions: `2 H(joint) - H(p) - H(q)` with
/// natural-log entropies. Zero iff the partitions agree up to relabeling.
pub fn vi_distance(p: &Plan, q: &Plan, pops: &[f64]) -> Result<f64> {
    if p.node_count() != q.node_count() || p.node_count() != pops.len() {
        return Err(Error::Shape("plans and population vector must align".into()));
    }
    let total: f64 = pops.iter().sum();
    if total <= 0.0 {
        return Err(Error::Domain("total population must be positive".into()));
    }
    let (kp, kq) = (p.ndists() as usize, q.ndists() as usize);
    let mut joint = vec![0.0f64; kp * kq];
    for ((&a, &b), &w) in p.assignment().iter().zip(q.assignment()).zip(pops) {
        joint[(a as usize - 1) * kq + (b as usize - 1)] += w;
    }
    let h = |x: f64| if x > 0.0 { -(x / total) * (x / total).ln() } else { 0.0 };
    let h_joint: f64 = joint.iter().map(|&x| h(x)).sum();
    let mut rows = vec![0.0; kp];
    let mut cols = vec![0.0; kq];
    for i in 0..kp {
        for j in 0..kq {
            rows[i] += joint[i * kq + j];
            cols[j] += joint[i * kq + j];
        }
    }
    let h_rows: f64 = rows.iter().map(|&x| h(x)).sum();
    let h_cols: f64 = cols.iter().map(|&x| h(x)).sum();
    Ok((2.0 * h_joint - h_rows - h_cols).max(0.0))
}

/// Mean VI distance over `pairs` distinct plan pairs sampled uniformly
/// without replacement (all pairs when `pairs` covers them). References
/// are excluded. Deterministic given the RNG stream.
pub fn mean_pairwise_vi<R: Rng + ?Sized>(
    ensemble: &PlanEnsemble,
    pops: &[f64],
    pairs: usize,
    rng: &mut R,
) -> Result<f64> {
    let sims: Vec<usize> = ensemble
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.draw.is_reference())
        .map(|(i, _)| i)
        .collect();
    let n = sims.len();
    if n < 2 {
        return Err(Error::Domain("need at least 2 non-reference plans for pairwise VI".into()));
    }
    let all_pairs = n * (n - 1) / 2;
    let take = pairs.max(1).min(all_pairs);
    let chosen: Vec<usize> = if take == all_pairs {
        (0..all_pairs).collect()
    } else {
        let mut idx: Vec<usize> =
            rand::seq::index::sample(rng, all_pairs, take).into_iter().collect();
        idx.sort_unstable();
        idx
    };
    // unrank pair index t -> (i, j), i < j, rows in increasing i
    let unrank = |t: usize| -> (usize, usize) {
        let mut i = 0;
        let mut base = 0;
        loop {
            let row = n - 1 - i;
            if t < base + row {
                return (i, i + 1 + (t - base));
            }
            base += row;
            i += 1;
        }
    };
    let distances = exec::map_indexed(&chosen, |_, &t| -> Result<f64> {
        let (a, b) = unrank(t);
        let pa = ensemble.plan(sims[a])?;
        let pb = ensemble.plan(sims[b])?;
        vi_distance(&pa, &pb, pops)
    });
    let mut sum = 0.0;
    for d in distances {
        sum += d?;
    }
    Ok(sum / take as f64)
}

/// Inverse standard normal CDF (Acklam's rational approximation,
/// |relative error| < 1.2e-9). Plenty for rank normalization.
fn inv_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inv_normal_cdf(1.0 - p)
    }
}

/// Split-chain rank-normalized Gelman-Rubin statistic.
///
/// Chains are trimmed to a common length and split in half (the middle
/// draw of an odd-length chain is dropped). All values are jointly rank
/// normalized (average ranks on ties, then the normal quantile of
/// `(r - 3/8) / (S + 1/4)`), and the classic potential scale reduction is
/// computed on the transformed half-chains. Returns exactly 1 when the
/// total variance is zero, and infinity when chains are internally
/// constant but disagree.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Domain("rhat needs at least 2 chains".into()));
    }
    let min_len = chains.iter().map(Vec::len).min().unwrap();
    if min_len < 4 {
        return Err(Error::Domain("rhat needs at least 4 draws per chain".into()));
    }
    let half = min_len / 2;
    let mut split: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        split.push(&c[..half]);
        split.push(&c[min_len - half..min_len]);
    }

    // joint rank normalization
    let total: usize = split.iter().map(|s| s.len()).sum();
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(total);
    let mut offsets = Vec::with_capacity(split.len());
    let mut off = 0;
    for s in &split {
        offsets.push(off);
        for (k, &v) in s.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Domain("rhat values must be finite".into()));
            }
            order.push((v, off + k));
        }
        off += s.len();
    }
    if order.iter().all(|(v, _)| *v == order[0].0) {
        return Ok(1.0); // zero total variance by convention
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut z = vec![0.0; total];
    let s_count = total as f64;
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && order[j + 1].0 == order[i].0 {
            j += 1;
        }
        // average rank for the tie run, 1-based
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let q = (avg_rank - 0.375) / (s_count + 0.25);
        let zv = inv_normal_cdf(q);
        for item in order.iter().take(j + 1).skip(i) {
            z[item.1] = zv;
        }
        i = j + 1;
    }

    // classic potential scale reduction over the transformed half-chains
    let m = split.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = offsets
        .iter()
        .map(|&o| z[o..o + half].iter().sum::<f64>() / n)
        .collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = means.iter().map(|&mu| (mu - grand).powi(2)).sum::<f64>() * n / (m - 1.0);
    let w = offsets
        .iter()
        .zip(&means)
        .map(|(&o, &mu)| z[o..o + half].iter().map(|&v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w <= 0.0 {
        return Ok(if b <= 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok((var_plus / w).sqrt())
}

/// One diagnostic check with its threshold and measured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFlag {
    pub check: String,
    pub pass: bool,
    pub threshold: f64,
    pub value: f64,
}

/// Flags every stage whose live-particle fraction fell below `threshold`.
/// This is a stand-in heuristic for sampling bottlenecks: a stage where
/// most particles died concentrates the sample on few ancestries.
pub fn bottleneck_check(stage_acceptance: &[f64], threshold: f64) -> Vec<CheckFlag> {
    stage_acceptance
        .iter()
        .enumerate()
        .filter(|(_, &frac)| frac < threshold)
        .map(|(i, &frac)| CheckFlag {
            check: format!("stage_acceptance[{}]", i + 1),
            pass: false,
            threshold,
            value: frac,
        })
        .collect()
}

/// Thresholds for the diagnostic report. Only `rhat_max` is prescriptive;
/// the rest are advisory defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub rhat_max: f64,
    pub ess_min_fraction: f64,
    pub acceptance_min: f64,
    pub vi_floor: f64,
    pub vi_pairs: usize,
    pub seed: u64,
}

impl Default for DiagnosticsConfig {
    fn default() -> DiagnosticsConfig {
        DiagnosticsConfig {
            rhat_max: 1.05,
            ess_min_fraction: 0.05,
            acceptance_min: 0.01,
            vi_floor: 0.1,
            vi_pairs: 1000,
            seed: 0,
        }
    }
}

/// Summary of every diagnostic over one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// ESS of the final weights over all non-reference plans, as a
    /// fraction of the plan count.
    pub ess_fraction: f64,
    pub mean_pairwise_vi: f64,
    /// Split-chain rank-normalized R-hat per plan-level statistic
    /// (omitted entirely for single-chain runs). Capped at 1e6.
    pub rhat: BTreeMap<String, f64>,
    /// Per stage: the worst live-particle fraction across chains.
    pub stage_acceptance: Vec<f64>,
    pub flags: Vec<CheckFlag>,
}

impl DiagnosticsReport {
    /// True when every prescriptive check (the R-hat gate) passed and no
    /// single-chain warning was raised.
    pub fn converged(&self) -> bool {
        self.flags.iter().filter(|f| f.check.starts_with("rhat")).all(|f| f.pass)
            && !self.flags.iter().any(|f| f.check == "multiple_chains" && !f.pass)
    }

    /// Human-readable text block, one line per check.
    pub fn text_summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("ess_fraction: {:.6}\n", self.ess_fraction));
        out.push_str(&format!("mean_pairwise_vi: {:.6}\n", self.mean_pairwise_vi));
        for (stat, r) in &self.rhat {
            out.push_str(&format!("rhat[{stat}]: {r:.6}\n"));
        }
        for (i, a) in self.stage_acceptance.iter().enumerate() {
            out.push_str(&format!("stage_acceptance[{}]: {a:.6}\n", i + 1));
        }
        for f in &self.flags {
            out.push_str(&format!(
                "{}: {} (value {:.6}, threshold {:.6})\n",
                f.check,
                if f.pass { "pass" } else { "FAIL" },
                f.value,
                f.threshold
            ));
        }
        out
    }
}

/// Plan-level statistic columns tracked by the R-hat gate.
pub const RHAT_COLUMNS: [&str; 6] =
    ["comp_edge", "comp_polsby", "plan_dev", "e_dem", "pbias", "egap"];

/// Computes the full diagnostic report for an ensemble: weight ESS, sample
/// diversity, per-statistic R-hat across chains, and stage bottleneck
/// flags, each compared against its threshold.
pub fn build_report(
    ensemble: &PlanEnsemble,
    stats: &StatsTable,
    pops: &[f64],
    config: &DiagnosticsConfig,
) -> Result<DiagnosticsReport> {
    let weights: Vec<f64> = ensemble
        .entries()
        .iter()
        .filter(|e| !e.draw.is_reference())
        .map(|e| e.weight)
        .collect();
    if weights.is_empty() {
        return Err(Error::Domain("ensemble has no non-reference plans".into()));
    }
    let ess_fraction = ess(&weights)? / weights.len() as f64;

    let mut vi_rng = derive_rng(config.seed, &[stream::VI_PAIRS]);
    let mean_vi = if weights.len() >= 2 {
        mean_pairwise_vi(ensemble, pops, config.vi_pairs, &mut vi_rng)?
    } else {
        0.0
    };

    let mut flags = Vec::new();
    let chains = ensemble.chain_ids();
    let mut rhat_map = BTreeMap::new();
    if chains.len() >= 2 {
        for column in RHAT_COLUMNS {
            let grouped = stats.plan_level_by_chain(column);
            // skip statistics that are absent (e.g. no geometry, no votes)
            let usable = grouped.iter().all(|c| c.len() >= 4)
                && grouped.len() >= 2
                && grouped.iter().flatten().all(|v| v.is_finite());
            if !usable {
                continue;
            }
            let r = rhat(&grouped)?.min(1e6);
            flags.push(CheckFlag {
                check: format!("rhat_{column}"),
                pass: r <= config.rhat_max,
                threshold: config.rhat_max,
                value: r,
            });
            rhat_map.insert(column.to_string(), r);
        }
    } else {
        flags.push(CheckFlag {
            check: "multiple_chains".into(),
            pass: false,
            threshold: 2.0,
            value: chains.len() as f64,
        });
    }

    let n_stages = ensemble.stage_acceptance.iter().map(Vec::len).max().unwrap_or(0);
    let stage_acceptance: Vec<f64> = (0..n_stages)
        .map(|s| {
            ensemble
                .stage_acceptance
                .iter()
                .filter_map(|chain| chain.get(s).copied())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    flags.extend(bottleneck_check(&stage_acceptance, config.acceptance_min));
    flags.push(CheckFlag {
        check: "ess_fraction".into(),
        pass: ess_fraction >= config.ess_min_fraction,
        threshold: config.ess_min_fraction,
        value: ess_fraction,
    });
    flags.push(CheckFlag {
        check: "mean_pairwise_vi".into(),
        pass: mean_vi >= config.vi_floor,
        threshold: config.vi_floor,
        value: mean_vi,
    });

    Ok(DiagnosticsReport {
        ess_fraction,
        mean_pairwise_vi: mean_vi,
        rhat: rhat_map,
        stage_acceptance,
        flags,
    })
}
