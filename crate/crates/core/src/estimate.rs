//! Marginal maximum likelihood by EM for the saturated class mixture and the
//! restricted prior families, plus parameter counting for AIC/BIC.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{
    aggregate_log_profiles, class_ideal_bytes, class_log_likelihoods, clamp_prob,
    log_profile_prior, log_sigmoid, log_sum_exp, ItemKernel, ItemParams, ModelSpec,
    PooledResponses, PriorSpec, ResponseMatrix,
};
use crate::qspace::{partition_with, Link, Partition, QMatrix};
use crate::quadrature::NormalQuadrature;

/// Bounds on logistic prior parameters during estimation.
pub const DIFFICULTY_BOUND: f64 = 15.0;
pub const SLOPE_MIN: f64 = 0.01;
pub const SLOPE_MAX: f64 = 10.0;

const NEWTON_SWEEPS: usize = 50;
const MAX_HALVINGS: usize = 40;

/// Model variant to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Saturated mixture over equivalence classes (NIAD).
    Niad,
    /// Independent attributes.
    Ind,
    /// Higher-order with per-attribute slopes.
    Ho,
    /// Higher-order with one shared slope.
    Rho,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Niad, Variant::Ho, Variant::Rho, Variant::Ind];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Niad => "niad",
            Variant::Ind => "ind",
            Variant::Ho => "ho",
            Variant::Rho => "rho",
        }
    }

    /// Display name for comparison tables.
    pub fn label(self, link: Link) -> String {
        let base = match link {
            Link::Dina => "DINA",
            Link::Dino => "DINO",
        };
        match self {
            Variant::Niad => format!("NIAD-{base}"),
            Variant::Ind => format!("ind-{base}"),
            Variant::Ho => format!("HO-{base}"),
            Variant::Rho => format!("RHO-{base}"),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "niad" | "saturated" => Ok(Variant::Niad),
            "ind" | "independent" => Ok(Variant::Ind),
            "ho" | "higher_order" => Ok(Variant::Ho),
            "rho" | "restricted_higher_order" => Ok(Variant::Rho),
            other => Err(Error::InvalidParameter(format!("unknown variant `{other}`"))),
        }
    }
}

/// Free parameters with the identifiability-reduced saturated count `2J + L`.
pub fn parameter_count(variant: Variant, q: &QMatrix, partition: &Partition) -> usize {
    let j = q.n_items();
    let k = q.n_attributes();
    match variant {
        Variant::Niad => 2 * j + partition.len(),
        Variant::Ind => 2 * j + k,
        Variant::Rho => 2 * j + k + 1,
        Variant::Ho => 2 * j + 2 * k,
    }
}

/// Saturated count over raw profiles, `2J + 2^K`; reported for comparison only.
pub fn unreduced_parameter_count(q: &QMatrix) -> usize {
    2 * q.n_items() + q.n_profiles()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    pub max_iterations: usize,
    /// Stop when `|l_new - l_old| <= tolerance * |l_old|`.
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub estimate_items: bool,
    /// Held fixed when `estimate_items` is false.
    pub items: Option<ItemParams>,
    pub link: Link,
    pub exec: Exec,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iterations: 2000,
            tolerance: 1e-8,
            restarts: 10,
            seed: 0,
            estimate_items: true,
            items: None,
            link: Link::Dina,
            exec: Exec::default(),
        }
    }
}

impl EmOptions {
    pub fn validate(&self, n_items: usize) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        match (&self.items, self.estimate_items) {
            (None, false) => Err(Error::InvalidParameter(
                "fixed item parameters are required when items are not estimated".into(),
            )),
            (Some(items), _) if items.len() != n_items => Err(Error::Dimension(format!(
                "{} fixed item parameters for {n_items} items",
                items.len()
            ))),
            (Some(items), _) => items.validate(),
            _ => Ok(()),
        }
    }
}

/// Outcome of [`em_fit`].
#[derive(Debug, Clone)]
pub struct FitResult {
    pub variant: Variant,
    pub spec: ModelSpec,
    /// `nu_[alpha]` in partition order.
    pub nu_class: Vec<f64>,
    pub loglik: f64,
    pub n_params: usize,
    pub aic: f64,
    pub bic: f64,
    pub n_respondents: usize,
    /// `N x L` class posteriors `p([alpha] | x^i)`.
    pub posteriors: Vec<Vec<f64>>,
    pub converged: bool,
    pub n_iterations: usize,
    pub restart_logliks: Vec<f64>,
    /// Per-iteration log-likelihood of the returned start.
    pub trace: Vec<f64>,
    /// Largest single-iteration log-likelihood drop over every start (0 if none).
    pub max_loglik_decrease: f64,
    /// Responsibility collapsed onto one class, or some item has no support
    /// in one ideal state, while item parameters were estimated.
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn zeta(&self) -> Vec<f64> {
        crate::classify::zeta_rates(&self.spec.partition, &self.nu_class)
            .map(|z| z.zeta)
            .unwrap_or_default()
    }

    pub fn report(&self) -> FitReport {
        let nu_by_class = self
            .spec
            .partition
            .classes
            .iter()
            .zip(&self.nu_class)
            .map(|(c, &v)| (c.minimal_representative.to_string(), v))
            .collect();
        FitReport {
            variant: self.variant,
            link: self.spec.link,
            q: (0..self.spec.q.n_items()).map(|j| self.spec.q.row(j).to_string()).collect(),
            n_respondents: self.n_respondents,
            loglik: self.loglik,
            n_params: self.n_params,
            n_params_unreduced: (self.variant == Variant::Niad)
                .then(|| unreduced_parameter_count(&self.spec.q)),
            aic: self.aic,
            bic: self.bic,
            nu_by_class,
            slip: self.spec.items.slip.clone(),
            guess: self.spec.items.guess.clone(),
            prior: self.spec.prior.clone(),
            converged: self.converged,
            n_iterations: self.n_iterations,
            restart_logliks: self.restart_logliks.clone(),
            degenerate: self.degenerate,
            warnings: self.warnings.clone(),
        }
    }
}

/// JSON report of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub variant: Variant,
    pub link: Link,
    pub q: Vec<String>,
    pub n_respondents: usize,
    pub loglik: f64,
    pub n_params: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_params_unreduced: Option<usize>,
    pub aic: f64,
    pub bic: f64,
    pub nu_by_class: BTreeMap<String, f64>,
    pub slip: Vec<f64>,
    pub guess: Vec<f64>,
    pub prior: PriorSpec,
    pub converged: bool,
    pub n_iterations: usize,
    pub restart_logliks: Vec<f64>,
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

impl FitReport {
    /// Rebuilds the fitted model.
    pub fn to_spec(&self) -> Result<ModelSpec> {
        let q = QMatrix::from_bit_strings(&self.q)?;
        let items = ItemParams::new(self.slip.clone(), self.guess.clone())?;
        ModelSpec::new(q, items, self.prior.clone(), self.link)
    }
}

struct Workspace<'a> {
    pooled: PooledResponses,
    ideals: Vec<Vec<u8>>,
    partition: &'a Partition,
    quad: NormalQuadrature,
    n: f64,
    n_attributes: usize,
    exec: Exec,
}

struct EStep {
    loglik: f64,
    pattern_post: Vec<Vec<f64>>,
    class_counts: Vec<f64>,
    /// Per item: expected count with `xi = 1`, successes among them,
    /// expected count with `xi = 0`, successes among them.
    item_stats: Vec<[f64; 4]>,
}

struct Run {
    items: ItemParams,
    prior: PriorSpec,
    estep: EStep,
    log_nu: Vec<f64>,
    trace: Vec<f64>,
    converged: bool,
    iterations: usize,
    max_decrease: f64,
}

impl Workspace<'_> {
    fn log_class_prior(&self, prior: &PriorSpec) -> Vec<f64> {
        match prior {
            PriorSpec::Saturated { nu } => nu.iter().map(|p| p.ln()).collect(),
            other => {
                let profile = log_profile_prior(other, self.n_attributes, &self.quad)
                    .expect("profile-resolving prior");
                aggregate_log_profiles(&profile, self.partition)
            }
        }
    }

    fn e_step(&self, items: &ItemParams, log_nu: &[f64]) -> EStep {
        let kernel = ItemKernel::new(items);
        let ll = class_log_likelihoods(&self.pooled.patterns, &self.ideals, &kernel, self.exec);
        let per_pattern = self.exec.map_range(ll.len(), |u| {
            let joint: Vec<f64> = ll[u].iter().zip(log_nu).map(|(a, b)| a + b).collect();
            let lse = log_sum_exp(&joint);
            let post: Vec<f64> = joint.iter().map(|v| (v - lse).exp()).collect();
            (lse, post)
        });

        let n_items = self.pooled.n_items;
        let mut loglik = 0.0;
        let mut class_counts = vec![0.0; log_nu.len()];
        let mut item_stats = vec![[0.0; 4]; n_items];
        let mut pattern_post = Vec::with_capacity(per_pattern.len());
        for (u, (lse, post)) in per_pattern.into_iter().enumerate() {
            let count = self.pooled.counts[u];
            loglik += count * lse;
            for (acc, p) in class_counts.iter_mut().zip(&post) {
                *acc += count * p;
            }
            let x = &self.pooled.patterns[u];
            for (j, stats) in item_stats.iter_mut().enumerate() {
                let mass_one: f64 = post
                    .iter()
                    .zip(&self.ideals)
                    .filter(|(_, xi)| xi[j] == 1)
                    .map(|(p, _)| p)
                    .sum();
                let mass_one = mass_one.min(1.0);
                let xj = x[j] as f64;
                stats[0] += count * mass_one;
                stats[1] += count * xj * mass_one;
                stats[2] += count * (1.0 - mass_one);
                stats[3] += count * xj * (1.0 - mass_one);
            }
            pattern_post.push(post);
        }
        EStep {
            loglik,
            pattern_post,
            class_counts,
            item_stats,
        }
    }

    fn m_step_items(&self, items: &ItemParams, stats: &[[f64; 4]]) -> ItemParams {
        let mut next = items.clone();
        for (j, st) in stats.iter().enumerate() {
            if st[0] > 0.0 {
                next.slip[j] = clamp_prob((st[0] - st[1]) / st[0]);
            }
            if st[2] > 0.0 {
                next.guess[j] = clamp_prob(st[3] / st[2]);
            }
        }
        next
    }

    fn m_step_prior(&self, prior: &PriorSpec, estep: &EStep, log_nu: &[f64]) -> PriorSpec {
        match prior {
            PriorSpec::Saturated { .. } => PriorSpec::Saturated {
                nu: estep.class_counts.iter().map(|c| c / self.n).collect(),
            },
            PriorSpec::Independent { .. } => {
                let counts = self.profile_counts(prior, estep, log_nu);
                let k = self.n_attributes;
                let b = (0..k)
                    .map(|a| {
                        let shift = k - 1 - a;
                        let m: f64 = counts
                            .iter()
                            .enumerate()
                            .filter(|(p, _)| (p >> shift) & 1 == 1)
                            .map(|(_, c)| c)
                            .sum();
                        let p = (m / self.n).clamp(1e-12, 1.0 - 1e-12);
                        (p / (1.0 - p)).ln().clamp(-DIFFICULTY_BOUND, DIFFICULTY_BOUND)
                    })
                    .collect::<Vec<_>>();
                PriorSpec::Independent { b }
            }
            PriorSpec::HigherOrder { a, b } => {
                let stats = self.node_stats(prior, estep, log_nu);
                let mut a = a.clone();
                let mut b = b.clone();
                newton_higher_order(&stats, &self.quad.nodes, &mut a, &mut b, false);
                PriorSpec::HigherOrder { a, b }
            }
            PriorSpec::RestrictedHigherOrder { a, b } => {
                let stats = self.node_stats(prior, estep, log_nu);
                let mut a = vec![*a; self.n_attributes];
                let mut b = b.clone();
                newton_higher_order(&stats, &self.quad.nodes, &mut a, &mut b, true);
                PriorSpec::RestrictedHigherOrder { a: a[0], b }
            }
        }
    }

    /// Expected profile counts: within a class, posterior splits like the prior.
    fn profile_counts(&self, prior: &PriorSpec, estep: &EStep, log_nu: &[f64]) -> Vec<f64> {
        let profile = log_profile_prior(prior, self.n_attributes, &self.quad)
            .expect("profile-resolving prior");
        let index = self.partition.profile_classes();
        profile
            .iter()
            .enumerate()
            .map(|(p, lp)| {
                let c = index[p] as usize;
                if estep.class_counts[c] > 0.0 {
                    estep.class_counts[c] * (lp - log_nu[c]).exp()
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Per quadrature node: total expected mass and mass with each attribute set.
    fn node_stats(&self, prior: &PriorSpec, estep: &EStep, log_nu: &[f64]) -> NodeStats {
        let counts = self.profile_counts(prior, estep, log_nu);
        let (a, b) = match prior {
            PriorSpec::HigherOrder { a, b } => (a.clone(), b.clone()),
            PriorSpec::RestrictedHigherOrder { a, b } => (vec![*a; b.len()], b.clone()),
            _ => unreachable!("node statistics only apply to higher-order priors"),
        };
        let profile_log = log_profile_prior(prior, self.n_attributes, &self.quad)
            .expect("profile-resolving prior");
        let k = self.n_attributes;
        let mut total = vec![0.0; self.quad.len()];
        let mut ones = vec![vec![0.0; self.quad.len()]; k];
        for (t, (&theta, &w)) in self.quad.nodes.iter().zip(&self.quad.weights).enumerate() {
            let z: Vec<f64> = a.iter().zip(&b).map(|(ak, bk)| bk + ak * theta).collect();
            let lw = w.ln();
            for (p, &count) in counts.iter().enumerate() {
                if count == 0.0 {
                    continue;
                }
                let mut lp = lw;
                for (kk, &zk) in z.iter().enumerate() {
                    lp += if (p >> (k - 1 - kk)) & 1 == 1 {
                        log_sigmoid(zk)
                    } else {
                        log_sigmoid(-zk)
                    };
                }
                let r = count * (lp - profile_log[p]).exp();
                total[t] += r;
                for (kk, row) in ones.iter_mut().enumerate() {
                    if (p >> (k - 1 - kk)) & 1 == 1 {
                        row[t] += r;
                    }
                }
            }
        }
        NodeStats { total, ones }
    }
}

struct NodeStats {
    total: Vec<f64>,
    /// `ones[k][t]`.
    ones: Vec<Vec<f64>>,
}

/// Expected complete-data objective for attribute `k`.
fn attribute_objective(stats: &NodeStats, nodes: &[f64], k: usize, a: f64, b: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .map(|(t, &theta)| {
            let z = b + a * theta;
            let m1 = stats.ones[k][t];
            let m0 = stats.total[t] - m1;
            m1 * log_sigmoid(z) + m0 * log_sigmoid(-z)
        })
        .sum()
}

/// Gradient and Hessian of the attribute objective along `b` (`wrt_slope = false`)
/// or along `a`.
fn attribute_derivs(stats: &NodeStats, nodes: &[f64], k: usize, a: f64, b: f64, wrt_slope: bool) -> (f64, f64) {
    let mut g = 0.0;
    let mut h = 0.0;
    for (t, &theta) in nodes.iter().enumerate() {
        let z = b + a * theta;
        let p = 1.0 / (1.0 + (-z).exp());
        let x = if wrt_slope { theta } else { 1.0 };
        g += x * (stats.ones[k][t] - stats.total[t] * p);
        h -= x * x * stats.total[t] * p * (1.0 - p);
    }
    (g, h)
}

/// One bounded Newton step with step halving; never decreases `objective`.
fn newton_1d<F: Fn(f64) -> f64>(x: f64, g: f64, h: f64, lo: f64, hi: f64, objective: F) -> f64 {
    if g == 0.0 {
        return x;
    }
    let mut step = if h < -1e-12 { -g / h } else { g.signum() * 0.5 };
    let base = objective(x);
    for _ in 0..MAX_HALVINGS {
        let cand = (x + step).clamp(lo, hi);
        if cand != x && objective(cand) > base {
            return cand;
        }
        step *= 0.5;
    }
    x
}

/// Coordinate-wise Newton ascent on the higher-order M-step objective.
/// With `shared_slope`, all entries of `a` move together.
fn newton_higher_order(stats: &NodeStats, nodes: &[f64], a: &mut [f64], b: &mut [f64], shared_slope: bool) {
    let k = b.len();
    let total = |a: &[f64], b: &[f64]| -> f64 {
        (0..k).map(|kk| attribute_objective(stats, nodes, kk, a[kk], b[kk])).sum()
    };
    let mut current = total(a, b);
    for _ in 0..NEWTON_SWEEPS {
        for kk in 0..k {
            let (g, h) = attribute_derivs(stats, nodes, kk, a[kk], b[kk], false);
            let ak = a[kk];
            b[kk] = newton_1d(b[kk], g, h, -DIFFICULTY_BOUND, DIFFICULTY_BOUND, |x| {
                attribute_objective(stats, nodes, kk, ak, x)
            });
            if !shared_slope {
                let (g, h) = attribute_derivs(stats, nodes, kk, a[kk], b[kk], true);
                let bk = b[kk];
                a[kk] = newton_1d(a[kk], g, h, SLOPE_MIN, SLOPE_MAX, |x| {
                    attribute_objective(stats, nodes, kk, x, bk)
                });
            }
        }
        if shared_slope {
            let (mut g, mut h) = (0.0, 0.0);
            for kk in 0..k {
                let (gk, hk) = attribute_derivs(stats, nodes, kk, a[kk], b[kk], true);
                g += gk;
                h += hk;
            }
            let bs = b.to_vec();
            let s = newton_1d(a[0], g, h, SLOPE_MIN, SLOPE_MAX, |x| {
                (0..k).map(|kk| attribute_objective(stats, nodes, kk, x, bs[kk])).sum()
            });
            a.iter_mut().for_each(|v| *v = s);
        }
        let next = total(a, b);
        let gain = next - current;
        current = next;
        if gain <= 1e-12 * (1.0 + current.abs()) {
            break;
        }
    }
}

fn initial_prior(variant: Variant, n_classes: usize, k: usize, rng: &mut ChaCha8Rng) -> PriorSpec {
    fn jitter(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        sd * z
    }
    match variant {
        Variant::Niad => {
            let draws: Vec<f64> = (0..n_classes).map(|_| Exp1.sample(&mut *rng)).collect();
            let total: f64 = draws.iter().sum();
            PriorSpec::Saturated {
                nu: draws.iter().map(|d| d / total).collect(),
            }
        }
        Variant::Ind => PriorSpec::Independent {
            b: (0..k).map(|_| jitter(rng, 0.5)).collect(),
        },
        Variant::Ho => {
            let b = (0..k).map(|_| jitter(rng, 0.5)).collect();
            let a = (0..k)
                .map(|_| (1.0 + jitter(rng, 0.2)).clamp(SLOPE_MIN, SLOPE_MAX))
                .collect();
            PriorSpec::HigherOrder { a, b }
        }
        Variant::Rho => {
            let b = (0..k).map(|_| jitter(rng, 0.5)).collect();
            let a = (1.0 + jitter(rng, 0.2)).clamp(SLOPE_MIN, SLOPE_MAX);
            PriorSpec::RestrictedHigherOrder { a, b }
        }
    }
}

fn run_once(ws: &Workspace, variant: Variant, opts: &EmOptions, restart: usize) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(restart as u64);
    let j = ws.pooled.n_items;
    let mut items = match (&opts.items, opts.estimate_items) {
        (Some(fixed), false) => fixed.clone(),
        _ => ItemParams {
            slip: (0..j).map(|_| rng.random_range(0.1..0.3)).collect(),
            guess: (0..j).map(|_| rng.random_range(0.1..0.3)).collect(),
        },
    };
    let mut prior = initial_prior(variant, ws.partition.len(), ws.n_attributes, &mut rng);

    let mut trace: Vec<f64> = Vec::new();
    let mut max_decrease: f64 = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let log_nu = ws.log_class_prior(&prior);
        let estep = ws.e_step(&items, &log_nu);
        if let Some(&prev) = trace.last() {
            max_decrease = max_decrease.max(prev - estep.loglik);
            if (estep.loglik - prev).abs() <= opts.tolerance * f64::abs(prev) {
                converged = true;
            }
        }
        trace.push(estep.loglik);
        if converged || iterations == opts.max_iterations {
            return Run {
                items,
                prior,
                estep,
                log_nu,
                trace,
                converged,
                iterations,
                max_decrease,
            };
        }
        if opts.estimate_items {
            items = ws.m_step_items(&items, &estep.item_stats);
        }
        prior = ws.m_step_prior(&prior, &estep, &log_nu);
        iterations += 1;
    }
}

/// Fits `variant` to `data` by EM from `opts.restarts` random starts and
/// returns the start with the highest final log-likelihood.
pub fn em_fit(data: &ResponseMatrix, q: &QMatrix, variant: Variant, opts: &EmOptions) -> Result<FitResult> {
    if data.n_items() != q.n_items() {
        return Err(Error::Dimension(format!(
            "data has {} items, Q-matrix has {}",
            data.n_items(),
            q.n_items()
        )));
    }
    opts.validate(q.n_items())?;
    let partition = partition_with(q, opts.link, true)?;
    let pooled = data.pooled();
    let ws = Workspace {
        n: pooled.total(),
        ideals: class_ideal_bytes(&partition.classes),
        partition: &partition,
        quad: NormalQuadrature::default(),
        n_attributes: q.n_attributes(),
        exec: opts.exec,
        pooled,
    };

    let runs = opts
        .exec
        .map_range(opts.restarts, |r| run_once(&ws, variant, opts, r));
    let restart_logliks: Vec<f64> = runs.iter().map(|r| r.estep.loglik).collect();
    let max_loglik_decrease = runs.iter().map(|r| r.max_decrease).fold(0.0, f64::max);
    let best = restart_logliks
        .iter()
        .enumerate()
        .fold(0, |best, (i, &ll)| if ll > restart_logliks[best] { i } else { best });
    let run = runs.into_iter().nth(best).expect("at least one restart");

    let nu_class: Vec<f64> = run.log_nu.iter().map(|l| l.exp()).collect();
    let n_respondents = data.n_respondents();
    let n_params = parameter_count(variant, q, &partition);
    let loglik = run.estep.loglik;
    let posteriors = ws
        .pooled
        .respondent_pattern
        .iter()
        .map(|&u| run.estep.pattern_post[u].clone())
        .collect();

    let mut warnings = Vec::new();
    let flat = run.items.flat_items();
    for &j in &flat {
        warnings.push(format!(
            "item {} has 1 - s close to g and carries almost no information",
            j + 1
        ));
    }
    let unsupported = run
        .estep
        .item_stats
        .iter()
        .any(|st| st[0] < 1e-6 * ws.n || st[2] < 1e-6 * ws.n);
    let collapsed = nu_class.iter().any(|&v| v >= 1.0 - 1e-3);
    // With every item flat the responses say nothing about the classes.
    let uninformative = flat.len() == run.items.len();
    let degenerate = opts.estimate_items && (unsupported || collapsed || uninformative);
    if degenerate {
        warnings.push("degenerate M-step: responsibility concentrated on one class".into());
    }
    if !run.converged {
        warnings.push(format!(
            "EM did not converge within {} iterations",
            opts.max_iterations
        ));
    }

    let spec = ModelSpec::with_partition(q.clone(), partition.clone(), run.items, run.prior, opts.link)?;
    Ok(FitResult {
        variant,
        nu_class,
        loglik,
        n_params,
        aic: 2.0 * n_params as f64 - 2.0 * loglik,
        bic: n_params as f64 * (n_respondents as f64).ln() - 2.0 * loglik,
        n_respondents,
        posteriors,
        converged: run.converged,
        n_iterations: run.iterations,
        restart_logliks,
        trace: run.trace,
        max_loglik_decrease,
        degenerate,
        warnings,
        spec,
    })
}
