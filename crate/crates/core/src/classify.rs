//! Class posteriors, marginal mastery bounds, three-way classification,
//! and marginal identifiability rates.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{
    check_x, class_log_prior, log_profile_prior, log_sum_exp, pattern_string, ItemKernel,
    ModelSpec, PriorSpec, ResponseMatrix,
};
use crate::qspace::{Partition, Profile};
use crate::quadrature::NormalQuadrature;

/// Lower and upper bounds on `P(alpha_k = 1 | x)` over all within-class
/// allocations of the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct MasteryBounds {
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    NotMastered,
    Mastered,
    Unclassified,
}

impl Decision {
    pub fn symbol(self) -> char {
        match self {
            Decision::NotMastered => '0',
            Decision::Mastered => '1',
            Decision::Unclassified => '*',
        }
    }

    /// Strict on both sides: a bound equal to the cutoff leaves the attribute unclassified.
    pub fn from_bounds(p_min: f64, p_max: f64, cutoff: f64) -> Decision {
        if p_min > cutoff {
            Decision::Mastered
        } else if p_max < cutoff {
            Decision::NotMastered
        } else {
            Decision::Unclassified
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

pub fn decision_string(decisions: &[Decision]) -> String {
    decisions.iter().map(|d| d.symbol()).collect()
}

/// Marginal identifiability rate per attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaReport {
    pub zeta: Vec<f64>,
}

impl ZetaReport {
    /// JSON form keyed by 1-based attribute index.
    pub fn to_map(&self) -> BTreeMap<usize, f64> {
        self.zeta.iter().enumerate().map(|(k, &z)| (k + 1, z)).collect()
    }
}

/// `p([alpha] | x)` for every class.
pub fn class_posterior(x: &[u8], spec: &ModelSpec) -> Result<Vec<f64>> {
    check_x(x, spec.q.n_items())?;
    let log_nu = class_log_prior(spec)?;
    let kernel = ItemKernel::new(&spec.items);
    posterior_from(x, &spec.class_ideals(), &kernel, &log_nu)
}

fn posterior_from(x: &[u8], ideals: &[Vec<u8>], kernel: &ItemKernel, log_nu: &[f64]) -> Result<Vec<f64>> {
    let joint: Vec<f64> = ideals
        .iter()
        .zip(log_nu)
        .map(|(xi, ln)| kernel.log_prob(x, xi) + ln)
        .collect();
    let lse = log_sum_exp(&joint);
    if !lse.is_finite() {
        return Err(Error::Underflow(pattern_string(x)));
    }
    Ok(joint.iter().map(|v| (v - lse).exp()).collect())
}

/// Class posteriors for every respondent, evaluated once per distinct pattern.
pub fn class_posteriors(data: &ResponseMatrix, spec: &ModelSpec, exec: Exec) -> Result<Vec<Vec<f64>>> {
    if data.n_items() != spec.q.n_items() {
        return Err(Error::Dimension(format!(
            "data has {} items, model has {}",
            data.n_items(),
            spec.q.n_items()
        )));
    }
    let pooled = data.pooled();
    let log_nu = class_log_prior(spec)?;
    let kernel = ItemKernel::new(&spec.items);
    let ideals = spec.class_ideals();
    let per_pattern = exec
        .map_slice(&pooled.patterns, |x| posterior_from(x, &ideals, &kernel, &log_nu))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(pooled
        .respondent_pattern
        .iter()
        .map(|&u| per_pattern[u].clone())
        .collect())
}

/// Bounds from a class posterior.
pub fn bounds_from_posterior(posterior: &[f64], partition: &Partition) -> MasteryBounds {
    let k = partition.n_attributes();
    let mut p_min = vec![0.0; k];
    let mut slack = vec![0.0; k];
    for (c, &p) in partition.classes.iter().zip(posterior) {
        for a in 0..k {
            match c.common_bit(a) {
                Some(true) => p_min[a] += p,
                Some(false) => {}
                None => slack[a] += p,
            }
        }
    }
    let p_max = p_min
        .iter()
        .zip(&slack)
        .map(|(lo, s)| (lo + s).min(1.0))
        .collect();
    MasteryBounds { p_min, p_max }
}

pub fn mastery_bounds(x: &[u8], spec: &ModelSpec) -> Result<MasteryBounds> {
    Ok(bounds_from_posterior(&class_posterior(x, spec)?, &spec.partition))
}

pub fn decide(bounds: &MasteryBounds, cutoff: f64) -> Vec<Decision> {
    bounds
        .p_min
        .iter()
        .zip(&bounds.p_max)
        .map(|(&lo, &hi)| Decision::from_bounds(lo, hi, cutoff))
        .collect()
}

/// Three-way per-attribute classification of one response vector.
pub fn niad_classify(x: &[u8], spec: &ModelSpec, cutoff: f64) -> Result<Vec<Decision>> {
    check_cutoff(cutoff)?;
    Ok(decide(&mastery_bounds(x, spec)?, cutoff))
}

pub(crate) fn check_cutoff(cutoff: f64) -> Result<()> {
    if cutoff > 0.0 && cutoff < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("cutoff {cutoff} must lie in (0, 1)")))
    }
}

/// `zeta_k = sum of nu over classes where attribute k is marginally identifiable`.
pub fn zeta_rates(partition: &Partition, nu_class: &[f64]) -> Result<ZetaReport> {
    if nu_class.len() != partition.len() {
        return Err(Error::Dimension(format!(
            "{} class proportions for {} classes",
            nu_class.len(),
            partition.len()
        )));
    }
    let k = partition.n_attributes();
    let total: f64 = nu_class.iter().sum();
    let zeta = (0..k)
        .map(|a| {
            let identified: f64 = partition
                .classes
                .iter()
                .zip(nu_class)
                .filter(|(c, _)| c.delta[a])
                .map(|(_, &v)| v)
                .sum();
            identified / total
        })
        .collect();
    Ok(ZetaReport { zeta })
}

/// Attributes that are not marginally identifiable in some class carrying
/// more than `min_mass` of the population.
pub fn unidentifiable_attributes(partition: &Partition, nu_class: &[f64], min_mass: f64) -> Vec<usize> {
    (0..partition.n_attributes())
        .filter(|&a| {
            partition
                .classes
                .iter()
                .zip(nu_class)
                .any(|(c, &v)| !c.delta[a] && v > min_mass)
        })
        .collect()
}

/// A marginal posterior together with the allocation-free bounds it must respect.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalPosterior {
    pub marginal: Vec<f64>,
    pub bounds: MasteryBounds,
}

/// `P(alpha_k = 1 | x)`.
///
/// Profile-resolving priors determine the within-class split themselves. A
/// saturated prior does not, so `allocation` must give, for every profile, its
/// share of its class (shares within each class summing to 1).
pub fn marginal_posterior(x: &[u8], spec: &ModelSpec, allocation: Option<&[f64]>) -> Result<MarginalPosterior> {
    let posterior = class_posterior(x, spec)?;
    let bounds = bounds_from_posterior(&posterior, &spec.partition);
    let k = spec.q.n_attributes();
    let share: Vec<f64> = match (&spec.prior, allocation) {
        (PriorSpec::Saturated { .. }, None) => return Err(Error::AllocationRequired),
        (PriorSpec::Saturated { .. }, Some(alloc)) => {
            check_allocation(alloc, &spec.partition)?;
            alloc.to_vec()
        }
        (_, Some(_)) => {
            return Err(Error::InvalidParameter(
                "a within-class allocation applies only to saturated priors".into(),
            ))
        }
        (prior, None) => {
            let log_profile = log_profile_prior(prior, k, &NormalQuadrature::default())?;
            let log_class = crate::model::aggregate_log_profiles(&log_profile, &spec.partition);
            let index = spec.partition.profile_classes();
            log_profile
                .iter()
                .enumerate()
                .map(|(p, lp)| {
                    let lc = log_class[index[p] as usize];
                    if lc.is_finite() {
                        (lp - lc).exp()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    };
    let mut marginal = vec![0.0; k];
    for (c, &pc) in spec.partition.classes.iter().zip(&posterior) {
        for m in &c.members {
            let w = pc * share[m.bits() as usize];
            for (a, acc) in marginal.iter_mut().enumerate() {
                if m.get(a) {
                    *acc += w;
                }
            }
        }
    }
    Ok(MarginalPosterior { marginal, bounds })
}

fn check_allocation(alloc: &[f64], partition: &Partition) -> Result<()> {
    let expected = 1usize << partition.n_attributes();
    if alloc.len() != expected {
        return Err(Error::Dimension(format!(
            "allocation has {} entries for {expected} profiles",
            alloc.len()
        )));
    }
    if alloc.iter().any(|&w| w.is_nan() || w < 0.0) {
        return Err(Error::InvalidParameter("allocation shares must be nonnegative".into()));
    }
    for c in &partition.classes {
        let total: f64 = c.members.iter().map(|m| alloc[m.bits() as usize]).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "allocation shares of class [{}] sum to {total}",
                c.minimal_representative
            )));
        }
    }
    Ok(())
}

/// Per-attribute error and unclassified rates over all respondents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisclassificationReport {
    /// Wrong definite decisions over `N`; unclassified never count as errors.
    pub misclassification_rate: Vec<f64>,
    pub unclassified_rate: Vec<f64>,
}

pub fn misclassification_report(truth: &[Profile], decisions: &[Vec<Decision>]) -> Result<MisclassificationReport> {
    if truth.len() != decisions.len() || truth.is_empty() {
        return Err(Error::Dimension(format!(
            "{} true profiles for {} decision records",
            truth.len(),
            decisions.len()
        )));
    }
    let k = truth[0].len();
    if decisions.iter().any(|d| d.len() != k) || truth.iter().any(|t| t.len() != k) {
        return Err(Error::Dimension("attribute counts differ between truth and decisions".into()));
    }
    let n = truth.len() as f64;
    let mut wrong = vec![0usize; k];
    let mut open = vec![0usize; k];
    for (t, d) in truth.iter().zip(decisions) {
        for a in 0..k {
            match d[a] {
                Decision::Unclassified => open[a] += 1,
                Decision::Mastered if !t.get(a) => wrong[a] += 1,
                Decision::NotMastered if t.get(a) => wrong[a] += 1,
                _ => {}
            }
        }
    }
    Ok(MisclassificationReport {
        misclassification_rate: wrong.iter().map(|&w| w as f64 / n).collect(),
        unclassified_rate: open.iter().map(|&u| u as f64 / n).collect(),
    })
}
