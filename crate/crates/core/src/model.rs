//! Response-probability kernels and the prior families over attribute profiles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::qspace::{
    bools_to_string, partition_with, EquivalenceClass, IdealResponse, Link, Partition, Profile,
    QMatrix,
};
use crate::quadrature::NormalQuadrature;

/// Slip and guess probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`
/// whenever they enter a likelihood.
pub const PROB_FLOOR: f64 = 1e-6;

/// Items with `|1 - s - g|` below this carry (almost) no information.
pub const FLAT_ITEM_TOLERANCE: f64 = 1e-3;

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Per-item slip `s_j = P(X_j = 0 | xi_j = 1)` and guess `g_j = P(X_j = 1 | xi_j = 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub slip: Vec<f64>,
    pub guess: Vec<f64>,
}

impl ItemParams {
    /// Values must lie in `[0, 1]`; likelihood code clamps them away from the ends.
    pub fn new(slip: Vec<f64>, guess: Vec<f64>) -> Result<Self> {
        let items = ItemParams { slip, guess };
        items.validate()?;
        Ok(items)
    }

    pub fn uniform(n_items: usize, slip: f64, guess: f64) -> Result<Self> {
        ItemParams::new(vec![slip; n_items], vec![guess; n_items])
    }

    pub fn validate(&self) -> Result<()> {
        if self.slip.len() != self.guess.len() {
            return Err(Error::Dimension(format!(
                "{} slip values but {} guess values",
                self.slip.len(),
                self.guess.len()
            )));
        }
        for (j, (&s, &g)) in self.slip.iter().zip(&self.guess).enumerate() {
            if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidParameter(format!(
                    "item {}: slip {s} and guess {g} must lie in [0, 1]",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.slip.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slip.is_empty()
    }

    /// Items whose success probability barely depends on the ideal response.
    pub fn flat_items(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| (1.0 - self.slip[j] - self.guess[j]).abs() < FLAT_ITEM_TOLERANCE)
            .collect()
    }

    /// `P(X_j = 1 | xi_j)` after clamping.
    pub fn success_prob(&self, j: usize, ideal: bool) -> f64 {
        if ideal {
            1.0 - clamp_prob(self.slip[j])
        } else {
            clamp_prob(self.guess[j])
        }
    }

    pub fn permute(&self, order: &[usize]) -> ItemParams {
        ItemParams {
            slip: order.iter().map(|&j| self.slip[j]).collect(),
            guess: order.iter().map(|&j| self.guess[j]).collect(),
        }
    }

    /// Roles under response reversal: `s -> g`, `g -> s`.
    pub fn swapped(&self) -> ItemParams {
        ItemParams {
            slip: self.guess.clone(),
            guess: self.slip.clone(),
        }
    }
}

/// Log-probability table per item, indexed by `2 * xi + x`.
#[derive(Debug, Clone)]
pub(crate) struct ItemKernel {
    table: Vec<[f64; 4]>,
}

impl ItemKernel {
    pub(crate) fn new(items: &ItemParams) -> Self {
        let table = (0..items.len())
            .map(|j| {
                let s = clamp_prob(items.slip[j]);
                let g = clamp_prob(items.guess[j]);
                [(1.0 - g).ln(), g.ln(), s.ln(), (1.0 - s).ln()]
            })
            .collect();
        ItemKernel { table }
    }

    #[inline]
    pub(crate) fn log_prob(&self, x: &[u8], ideal: &[u8]) -> f64 {
        x.iter()
            .zip(ideal)
            .zip(&self.table)
            .map(|((&x, &xi), t)| t[(2 * xi + x) as usize])
            .sum()
    }
}

/// Prior family over attribute profiles (or, when saturated, over classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Free class proportions `nu_[alpha]`, one per equivalence class.
    Saturated { nu: Vec<f64> },
    /// Independent attributes with `P(alpha_k = 1) = logistic(b_k)`.
    Independent { b: Vec<f64> },
    /// `P(alpha_k = 1 | theta) = logistic(b_k + a_k theta)`, `theta ~ N(0, 1)`.
    HigherOrder { a: Vec<f64>, b: Vec<f64> },
    /// Higher-order prior with one shared discrimination.
    RestrictedHigherOrder { a: f64, b: Vec<f64> },
}

impl PriorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PriorSpec::Saturated { .. } => "saturated",
            PriorSpec::Independent { .. } => "independent",
            PriorSpec::HigherOrder { .. } => "higher_order",
            PriorSpec::RestrictedHigherOrder { .. } => "restricted_higher_order",
        }
    }

    pub fn is_saturated(&self) -> bool {
        matches!(self, PriorSpec::Saturated { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64], what: &str| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be finite")))
            }
        };
        match self {
            PriorSpec::Saturated { nu } => {
                if nu.iter().any(|&p| !p.is_finite() || p < 0.0) {
                    return Err(Error::InvalidParameter("nu entries must be nonnegative".into()));
                }
                let total: f64 = nu.iter().sum();
                if (total - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidParameter(format!("nu sums to {total}, not 1")));
                }
                Ok(())
            }
            PriorSpec::Independent { b } => finite(b, "b"),
            PriorSpec::HigherOrder { a, b } => {
                finite(b, "b")?;
                finite(a, "a")?;
                if a.len() != b.len() {
                    return Err(Error::Dimension(format!(
                        "{} discriminations but {} difficulties",
                        a.len(),
                        b.len()
                    )));
                }
                if a.iter().any(|&x| x < 0.0) {
                    return Err(Error::InvalidParameter("discriminations must be nonnegative".into()));
                }
                Ok(())
            }
            PriorSpec::RestrictedHigherOrder { a, b } => {
                finite(b, "b")?;
                finite(&[*a], "a")
            }
        }
    }

    fn check_dims(&self, partition: &Partition) -> Result<()> {
        let (got, want, what) = match self {
            PriorSpec::Saturated { nu } => (nu.len(), partition.len(), "classes"),
            PriorSpec::Independent { b }
            | PriorSpec::HigherOrder { b, .. }
            | PriorSpec::RestrictedHigherOrder { b, .. } => {
                (b.len(), partition.n_attributes(), "attributes")
            }
        };
        if got != want {
            return Err(Error::Dimension(format!(
                "{} prior has {got} entries for {want} {what}",
                self.name()
            )));
        }
        Ok(())
    }
}

/// Q-matrix, its partition, item parameters, prior, and link.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub q: QMatrix,
    pub partition: Partition,
    pub items: ItemParams,
    pub prior: PriorSpec,
    pub link: Link,
}

impl ModelSpec {
    pub fn new(q: QMatrix, items: ItemParams, prior: PriorSpec, link: Link) -> Result<Self> {
        let partition = partition_with(&q, link, true)?;
        ModelSpec::with_partition(q, partition, items, prior, link)
    }

    pub fn with_partition(
        q: QMatrix,
        partition: Partition,
        items: ItemParams,
        prior: PriorSpec,
        link: Link,
    ) -> Result<Self> {
        items.validate()?;
        prior.validate()?;
        if items.len() != q.n_items() {
            return Err(Error::Dimension(format!(
                "{} item parameters for {} items",
                items.len(),
                q.n_items()
            )));
        }
        if partition.link() != link || partition.n_attributes() != q.n_attributes() {
            return Err(Error::Dimension("partition does not belong to this Q-matrix".into()));
        }
        prior.check_dims(&partition)?;
        Ok(ModelSpec {
            q,
            partition,
            items,
            prior,
            link,
        })
    }

    /// Class proportions implied by the prior.
    pub fn class_probs(&self) -> Result<Vec<f64>> {
        prior_class_probs(&self.prior, &self.partition)
    }

    pub(crate) fn class_ideals(&self) -> Vec<Vec<u8>> {
        class_ideal_bytes(&self.partition.classes)
    }

    pub fn to_file(&self) -> ModelSpecFile {
        ModelSpecFile {
            link: self.link,
            q: (0..self.q.n_items()).map(|j| self.q.row(j).to_string()).collect(),
            slip: self.items.slip.clone(),
            guess: self.items.guess.clone(),
            prior: self.prior.clone(),
        }
    }

    pub fn from_file(file: &ModelSpecFile) -> Result<Self> {
        let q = QMatrix::from_bit_strings(&file.q)?;
        let items = ItemParams::new(file.slip.clone(), file.guess.clone())?;
        ModelSpec::new(q, items, file.prior.clone(), file.link)
    }
}

/// JSON form of a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpecFile {
    pub link: Link,
    pub q: Vec<String>,
    pub slip: Vec<f64>,
    pub guess: Vec<f64>,
    pub prior: PriorSpec,
}

pub(crate) fn class_ideal_bytes(classes: &[EquivalenceClass]) -> Vec<Vec<u8>> {
    classes
        .iter()
        .map(|c| c.ideal.to_bools().into_iter().map(u8::from).collect())
        .collect()
}

/// `N x J` binary response matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    cells: Vec<u8>,
    n_items: usize,
}

impl ResponseMatrix {
    pub fn new(rows: &[Vec<u8>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidData("no respondents".into()));
        }
        let n_items = rows[0].len();
        if n_items == 0 {
            return Err(Error::InvalidData("no items".into()));
        }
        let mut cells = Vec::with_capacity(rows.len() * n_items);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_items {
                return Err(Error::Dimension(format!(
                    "respondent {} has {} responses, expected {n_items}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|&v| v > 1) {
                return Err(Error::InvalidData(format!(
                    "respondent {} item {} has non-binary value {}",
                    i + 1,
                    j + 1,
                    row[j]
                )));
            }
            cells.extend_from_slice(row);
        }
        Ok(ResponseMatrix { cells, n_items })
    }

    pub(crate) fn from_cells(cells: Vec<u8>, n_items: usize) -> Self {
        debug_assert!(n_items > 0 && cells.len().is_multiple_of(n_items));
        ResponseMatrix { cells, n_items }
    }

    pub fn n_respondents(&self) -> usize {
        self.cells.len() / self.n_items
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.cells[i * self.n_items..(i + 1) * self.n_items]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.cells.chunks_exact(self.n_items)
    }

    /// `1 - X`.
    pub fn flipped(&self) -> ResponseMatrix {
        ResponseMatrix {
            cells: self.cells.iter().map(|&v| 1 - v).collect(),
            n_items: self.n_items,
        }
    }

    pub fn permute_items(&self, order: &[usize]) -> ResponseMatrix {
        let cells = self
            .rows()
            .flat_map(|r| order.iter().map(move |&j| r[j]))
            .collect();
        ResponseMatrix {
            cells,
            n_items: self.n_items,
        }
    }

    pub fn select_rows(&self, order: &[usize]) -> ResponseMatrix {
        let cells = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        ResponseMatrix {
            cells,
            n_items: self.n_items,
        }
    }

    /// Distinct response patterns in lexicographic order with their counts.
    pub fn pooled(&self) -> PooledResponses {
        let mut index: BTreeMap<&[u8], usize> = BTreeMap::new();
        for r in self.rows() {
            *index.entry(r).or_insert(0) += 1;
        }
        let patterns: Vec<Vec<u8>> = index.keys().map(|k| k.to_vec()).collect();
        let counts: Vec<f64> = index.values().map(|&c| c as f64).collect();
        let position: BTreeMap<&[u8], usize> =
            index.keys().enumerate().map(|(u, k)| (*k, u)).collect();
        let respondent_pattern = self.rows().map(|r| position[r]).collect();
        PooledResponses {
            patterns,
            counts,
            respondent_pattern,
            n_items: self.n_items,
        }
    }
}

/// Unique response patterns with multiplicities.
#[derive(Debug, Clone)]
pub struct PooledResponses {
    pub patterns: Vec<Vec<u8>>,
    pub counts: Vec<f64>,
    /// Pattern ordinal for each respondent.
    pub respondent_pattern: Vec<usize>,
    pub n_items: usize,
}

impl PooledResponses {
    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

pub(crate) fn check_x(x: &[u8], n_items: usize) -> Result<()> {
    if x.len() != n_items {
        return Err(Error::Dimension(format!(
            "response vector has {} entries, expected {n_items}",
            x.len()
        )));
    }
    if x.iter().any(|&v| v > 1) {
        return Err(Error::InvalidData(format!(
            "response vector {:?} is not binary",
            x
        )));
    }
    Ok(())
}

/// `P(x | xi, s, g)`, accumulated in log space.
pub fn response_prob(x: &[u8], xi: &IdealResponse, items: &ItemParams) -> Result<f64> {
    Ok(log_response_prob(x, xi, items)?.exp())
}

pub fn log_response_prob(x: &[u8], xi: &IdealResponse, items: &ItemParams) -> Result<f64> {
    check_x(x, xi.len())?;
    if items.len() != xi.len() {
        return Err(Error::Dimension(format!(
            "{} item parameters for an ideal response of length {}",
            items.len(),
            xi.len()
        )));
    }
    let ideal: Vec<u8> = xi.to_bools().into_iter().map(u8::from).collect();
    Ok(ItemKernel::new(items).log_prob(x, &ideal))
}

/// `P(x | [alpha])`: depends only on the class's shared ideal response.
pub fn class_conditional_prob(x: &[u8], c: &EquivalenceClass, spec: &ModelSpec) -> Result<f64> {
    response_prob(x, &c.ideal, &spec.items)
}

#[inline]
pub(crate) fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Builds `log prod_k P(alpha_k | z_k)` for all `2^K` profiles, where
/// `P(alpha_k = 1) = logistic(z_k)`. Index is `Profile::bits`.
fn log_product_table(z: &[f64]) -> Vec<f64> {
    let mut table = vec![0.0];
    for &zk in z {
        let (l0, l1) = (log_sigmoid(-zk), log_sigmoid(zk));
        let mut next = Vec::with_capacity(table.len() * 2);
        for v in table {
            next.push(v + l0);
            next.push(v + l1);
        }
        table = next;
    }
    table
}

/// `log nu_alpha` for every profile under a profile-resolving prior.
pub(crate) fn log_profile_prior(
    prior: &PriorSpec,
    n_attributes: usize,
    quad: &NormalQuadrature,
) -> Result<Vec<f64>> {
    match prior {
        PriorSpec::Saturated { .. } => Err(Error::AllocationRequired),
        PriorSpec::Independent { b } => Ok(log_product_table(b)),
        PriorSpec::HigherOrder { a, b } => Ok(mix_over_nodes(a, b, quad)),
        PriorSpec::RestrictedHigherOrder { a, b } => Ok(mix_over_nodes(&vec![*a; n_attributes], b, quad)),
    }
}

fn mix_over_nodes(a: &[f64], b: &[f64], quad: &NormalQuadrature) -> Vec<f64> {
    let n = 1usize << b.len();
    let mut max = vec![f64::NEG_INFINITY; n];
    let mut sum = vec![0.0; n];
    for (&theta, &w) in quad.nodes.iter().zip(&quad.weights) {
        let z: Vec<f64> = a.iter().zip(b).map(|(&ak, &bk)| bk + ak * theta).collect();
        let lw = w.ln();
        for (p, v) in log_product_table(&z).into_iter().enumerate() {
            let v = v + lw;
            if v > max[p] {
                sum[p] = sum[p] * (max[p] - v).exp() + 1.0;
                max[p] = v;
            } else {
                sum[p] += (v - max[p]).exp();
            }
        }
    }
    max.iter().zip(&sum).map(|(m, s)| m + s.ln()).collect()
}

/// Profile-level prior probabilities `nu_alpha` (length `2^K`).
pub fn prior_profile_probs(prior: &PriorSpec, n_attributes: usize) -> Result<Vec<f64>> {
    prior.validate()?;
    let logs = log_profile_prior(prior, n_attributes, &NormalQuadrature::default())?;
    Ok(logs.into_iter().map(f64::exp).collect())
}

/// Aggregates profile log-probabilities into class log-probabilities.
pub(crate) fn aggregate_log_profiles(log_profile: &[f64], partition: &Partition) -> Vec<f64> {
    partition
        .classes
        .iter()
        .map(|c| {
            let v: Vec<f64> = c.members.iter().map(|m| log_profile[m.bits() as usize]).collect();
            log_sum_exp(&v)
        })
        .collect()
}

/// Class proportions `nu_[alpha] = sum_{alpha' in [alpha]} nu_alpha'`.
pub fn prior_class_probs(prior: &PriorSpec, partition: &Partition) -> Result<Vec<f64>> {
    prior.validate()?;
    prior.check_dims(partition)?;
    if let PriorSpec::Saturated { nu } = prior {
        return Ok(nu.clone());
    }
    let logs = log_profile_prior(prior, partition.n_attributes(), &NormalQuadrature::default())?;
    let class = aggregate_log_profiles(&logs, partition);
    let probs: Vec<f64> = class.iter().map(|l| l.exp()).collect();
    if let Some(c) = probs.iter().position(|&p| p < 1e-300) {
        return Err(Error::QuadratureUnderflow(
            partition.classes[c].minimal_representative.to_string(),
        ));
    }
    Ok(probs)
}

/// `log P(x_u | class c)` for every pattern and class.
pub(crate) fn class_log_likelihoods(
    patterns: &[Vec<u8>],
    ideals: &[Vec<u8>],
    kernel: &ItemKernel,
    exec: Exec,
) -> Vec<Vec<f64>> {
    exec.map_slice(patterns, |x| {
        ideals.iter().map(|xi| kernel.log_prob(x, xi)).collect()
    })
}

/// Pooled log-likelihood given class log-proportions; one term per pattern,
/// summed in pattern order.
pub(crate) fn pooled_log_likelihood(
    loglik: &[Vec<f64>],
    counts: &[f64],
    log_nu: &[f64],
    exec: Exec,
) -> f64 {
    let terms = exec.map_range(loglik.len(), |u| {
        let v: Vec<f64> = loglik[u].iter().zip(log_nu).map(|(a, b)| a + b).collect();
        counts[u] * log_sum_exp(&v)
    });
    terms.iter().sum()
}

pub(crate) fn class_log_prior(spec: &ModelSpec) -> Result<Vec<f64>> {
    match &spec.prior {
        PriorSpec::Saturated { nu } => Ok(nu.iter().map(|p| p.ln()).collect()),
        prior => {
            let logs =
                log_profile_prior(prior, spec.q.n_attributes(), &NormalQuadrature::default())?;
            Ok(aggregate_log_profiles(&logs, &spec.partition))
        }
    }
}

/// `sum_i log sum_[alpha] P(x^i | [alpha]) nu_[alpha]` over pooled patterns.
pub fn log_likelihood(data: &ResponseMatrix, spec: &ModelSpec) -> Result<f64> {
    log_likelihood_with(data, spec, Exec::default())
}

pub fn log_likelihood_with(data: &ResponseMatrix, spec: &ModelSpec, exec: Exec) -> Result<f64> {
    if data.n_items() != spec.q.n_items() {
        return Err(Error::Dimension(format!(
            "data has {} items, Q-matrix has {}",
            data.n_items(),
            spec.q.n_items()
        )));
    }
    let pooled = data.pooled();
    let kernel = ItemKernel::new(&spec.items);
    let ll = class_log_likelihoods(&pooled.patterns, &spec.class_ideals(), &kernel, exec);
    Ok(pooled_log_likelihood(&ll, &pooled.counts, &class_log_prior(spec)?, exec))
}

/// Bit string for a 0/1 byte vector, item 1 leftmost.
pub fn pattern_string(x: &[u8]) -> String {
    bools_to_string(&x.iter().map(|&v| v == 1).collect::<Vec<_>>())
}

/// Profile-level response probability, bypassing the partition.
pub fn profile_response_prob(
    x: &[u8],
    q: &QMatrix,
    alpha: Profile,
    items: &ItemParams,
    link: Link,
) -> Result<f64> {
    let xi = crate::qspace::ideal_response(q, alpha, link)?;
    response_prob(x, &xi, items)
}
