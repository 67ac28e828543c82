//! Seeded populations and response data.
//!
//! Every draw uses ChaCha8 seeded from a 64-bit seed. Stream 0 feeds the
//! population and stream 1 the responses, so changing the item set never
//! perturbs which profiles are drawn.

use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{prior_profile_probs, ItemParams, PriorSpec, ResponseMatrix};
use crate::qspace::{Link, Profile, QMatrix};

pub const POPULATION_STREAM: u64 = 0;
pub const RESPONSE_STREAM: u64 = 1;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How true profiles are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    /// Probabilities over all `2^K` profiles, normalized.
    ProfileProbs(Vec<f64>),
    /// A profile-resolving prior.
    Prior(PriorSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub q: QMatrix,
    pub items: ItemParams,
    pub population: Population,
    pub n: usize,
    pub seed: u64,
    pub link: Link,
    /// Adjustments made while building the scenario.
    pub notes: Vec<String>,
}

impl Scenario {
    /// Validates dimensions and normalizes profile probabilities.
    pub fn new(
        name: impl Into<String>,
        q: QMatrix,
        items: ItemParams,
        population: Population,
        n: usize,
        seed: u64,
        link: Link,
    ) -> Result<Self> {
        items.validate()?;
        if items.len() != q.n_items() {
            return Err(Error::Dimension(format!(
                "{} item parameters for {} items",
                items.len(),
                q.n_items()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("scenario needs at least one respondent".into()));
        }
        let mut notes = Vec::new();
        let population = match population {
            Population::ProfileProbs(p) => {
                Population::ProfileProbs(normalize_profile_probs(p, q.n_attributes(), &mut notes)?)
            }
            Population::Prior(prior) => {
                if prior.is_saturated() {
                    return Err(Error::InvalidParameter(
                        "a saturated prior does not determine profile probabilities".into(),
                    ));
                }
                prior.validate()?;
                prior_profile_probs(&prior, q.n_attributes())?;
                Population::Prior(prior)
            }
        };
        Ok(Scenario {
            name: name.into(),
            q,
            items,
            population,
            n,
            seed,
            link,
            notes,
        })
    }

    pub fn profile_probs(&self) -> Result<Vec<f64>> {
        match &self.population {
            Population::ProfileProbs(p) => Ok(p.clone()),
            Population::Prior(prior) => prior_profile_probs(prior, self.q.n_attributes()),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    /// Draws profiles and responses.
    pub fn generate(&self) -> Result<(Vec<Profile>, ResponseMatrix)> {
        let profiles = draw_population(self)?;
        let data = generate_responses(&profiles, &self.q, &self.items, self.link, self.seed)?;
        Ok((profiles, data))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ScenarioFile = serde_json::from_str(&text)?;
        file.into_scenario(path.parent().unwrap_or(Path::new(".")))
    }
}

fn normalize_profile_probs(p: Vec<f64>, k: usize, notes: &mut Vec<String>) -> Result<Vec<f64>> {
    if p.len() != 1 << k {
        return Err(Error::Dimension(format!(
            "{} profile probabilities for {} attributes",
            p.len(),
            k
        )));
    }
    if p.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("profile probabilities must be finite and nonnegative".into()));
    }
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter("profile probabilities sum to zero".into()));
    }
    if (total - 1.0).abs() > 1e-10 {
        notes.push(format!("profile probabilities summed to {total}; rescaled to 1"));
    }
    Ok(p.into_iter().map(|v| v / total).collect())
}

/// Q-matrix given inline as bit strings or by CSV path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QSource {
    Inline(Vec<String>),
    Csv {
        csv: PathBuf,
        #[serde(default)]
        header: bool,
    },
}

/// JSON scenario file. Exactly one of `profile_probs` and `prior` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default = "default_name")]
    pub name: String,
    pub q: QSource,
    pub slip: Vec<f64>,
    pub guess: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub link: Link,
}

fn default_name() -> String {
    "custom".into()
}

impl ScenarioFile {
    /// Relative CSV paths resolve against `base`.
    pub fn into_scenario(self, base: &Path) -> Result<Scenario> {
        let q = match &self.q {
            QSource::Inline(rows) => QMatrix::from_bit_strings(rows)?,
            QSource::Csv { csv, header } => crate::io::read_q_csv(&base.join(csv), *header)?,
        };
        let population = match (self.profile_probs, self.prior) {
            (Some(p), None) => Population::ProfileProbs(p),
            (None, Some(prior)) => Population::Prior(prior),
            _ => {
                return Err(Error::InvalidParameter(
                    "scenario needs exactly one of profile_probs and prior".into(),
                ))
            }
        };
        let items = ItemParams::new(self.slip, self.guess)?;
        Scenario::new(self.name, q, items, population, self.n, self.seed, self.link)
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(sc: &Scenario) -> Self {
        let (profile_probs, prior) = match &sc.population {
            Population::ProfileProbs(p) => (Some(p.clone()), None),
            Population::Prior(prior) => (None, Some(prior.clone())),
        };
        ScenarioFile {
            name: sc.name.clone(),
            q: QSource::Inline((0..sc.q.n_items()).map(|j| sc.q.row(j).to_string()).collect()),
            slip: sc.items.slip.clone(),
            guess: sc.items.guess.clone(),
            profile_probs,
            prior,
            n: sc.n,
            seed: sc.seed,
            link: sc.link,
        }
    }
}

/// `n` i.i.d. profiles from the scenario's population.
pub fn draw_population(sc: &Scenario) -> Result<Vec<Profile>> {
    let probs = sc.profile_probs()?;
    let k = sc.q.n_attributes();
    let dist = WeightedIndex::new(&probs)
        .map_err(|e| Error::InvalidParameter(format!("profile probabilities: {e}")))?;
    let mut rng = stream_rng(sc.seed, POPULATION_STREAM);
    Ok((0..sc.n)
        .map(|_| Profile::new(dist.sample(&mut rng) as u32, k))
        .collect())
}

/// Bernoulli responses with success probability `1 - s_j` or `g_j` by ideal response.
pub fn generate_responses(
    profiles: &[Profile],
    q: &QMatrix,
    items: &ItemParams,
    link: Link,
    seed: u64,
) -> Result<ResponseMatrix> {
    items.validate()?;
    let j = q.n_items();
    if items.len() != j {
        return Err(Error::Dimension(format!("{} item parameters for {j} items", items.len())));
    }
    if let Some(p) = profiles.iter().find(|p| p.len() != q.n_attributes()) {
        return Err(Error::Dimension(format!(
            "profile {p} has {} attributes, Q-matrix has {}",
            p.len(),
            q.n_attributes()
        )));
    }
    let mut rng = stream_rng(seed, RESPONSE_STREAM);
    let mut cells = Vec::with_capacity(profiles.len() * j);
    for p in profiles {
        for item in 0..j {
            let prob = items.success_prob(item, q.ideal_bit(item, p.bits(), link));
            cells.push(u8::from(rng.random::<f64>() < prob));
        }
    }
    Ok(ResponseMatrix::from_cells(cells, j))
}

/// Q-matrix of the six-item simulation design.
pub fn sim_q() -> QMatrix {
    QMatrix::from_bit_strings(&["100", "110", "011", "100", "110", "011"]).expect("valid Q")
}

/// Item parameters of the six-item simulation design.
pub fn sim_items() -> ItemParams {
    ItemParams::new(
        vec![0.14, 0.12, 0.18, 0.17, 0.08, 0.05],
        vec![0.10, 0.15, 0.18, 0.18, 0.06, 0.06],
    )
    .expect("valid items")
}

/// Printed profile proportions (000 through 111); they sum to 0.99.
pub const SIM_PROFILE_PROBS: [f64; 8] = [0.27, 0.00, 0.01, 0.04, 0.10, 0.16, 0.20, 0.21];

pub const FRACTION_Q: [&str; 20] = [
    "00010110", "00010010", "00010010", "01101010", "01010011", "00000010", "11000010", "00000010",
    "01000000", "01001011", "01001010", "00000011", "01011010", "01000010", "10000010", "01000010",
    "01001010", "01001110", "11101010", "01101010",
];

pub fn fraction_q() -> QMatrix {
    QMatrix::from_bit_strings(&FRACTION_Q).expect("valid Q")
}

pub fn paper_sim() -> Scenario {
    Scenario::new(
        "paper-sim",
        sim_q(),
        sim_items(),
        Population::ProfileProbs(SIM_PROFILE_PROBS.to_vec()),
        5000,
        20_140_601,
        Link::Dina,
    )
    .expect("valid scenario")
}

/// Fraction-subtraction design with chosen noise and population prior.
pub fn fraction_scenario(items: Option<ItemParams>, prior: Option<PriorSpec>) -> Result<Scenario> {
    let items = match items {
        Some(items) => items,
        None => ItemParams::uniform(20, 0.1, 0.1)?,
    };
    let prior = prior.unwrap_or(PriorSpec::HigherOrder {
        a: vec![1.5; 8],
        b: vec![0.0; 8],
    });
    let mut sc = Scenario::new(
        "fraction-q",
        fraction_q(),
        items,
        Population::Prior(prior),
        536,
        20_140_602,
        Link::Dina,
    )?;
    sc.notes
        .push("simulated responses; no true parameters exist for this design".into());
    Ok(sc)
}

pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![paper_sim(), fraction_scenario(None, None).expect("valid scenario")]
}

pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{profile_response_prob, ResponseMatrix};
    use crate::qspace::partition;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn builtin_designs() {
        let sc = paper_sim();
        assert_eq!(sc.q.to_rows(), sim_q().to_rows());
        assert_eq!(sc.n, 5000);
        assert_eq!(sc.notes.len(), 1);
        let p = sc.profile_probs().unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((p[0] - 0.27 / 0.99).abs() < 1e-12);

        let fr = builtin_scenario("fraction-q").unwrap();
        assert_eq!((fr.q.n_items(), fr.q.n_attributes()), (20, 8));
        assert_eq!(fr.q.row(7).to_string(), "00000010");
        assert_eq!(partition(&fr.q).unwrap().len(), 58);
        assert!(builtin_scenario("nope").is_none());
    }

    #[test]
    fn determinism_and_point_mass() {
        let sc = paper_sim().with_n(300);
        assert_eq!(sc.generate().unwrap(), sc.generate().unwrap());
        let other = sc.clone().with_seed(sc.seed + 1).generate().unwrap();
        assert_ne!(other.1, sc.generate().unwrap().1);

        let mut probs = vec![0.0; 8];
        probs[5] = 1.0;
        let point = Scenario::new("p", sim_q(), sim_items(), Population::ProfileProbs(probs), 50, 3, Link::Dina).unwrap();
        assert!(draw_population(&point).unwrap().iter().all(|p| p.bits() == 5));
    }

    #[test]
    fn population_ignores_item_set() {
        let sc = paper_sim().with_n(200);
        let mut fewer = sc.clone();
        fewer.q = QMatrix::from_bit_strings(&["100", "011"]).unwrap();
        fewer.items = ItemParams::uniform(2, 0.1, 0.1).unwrap();
        assert_eq!(draw_population(&sc).unwrap(), draw_population(&fewer).unwrap());
    }

    #[test]
    fn noise_free_responses_are_ideal() {
        let profiles: Vec<Profile> = Profile::all(3).collect();
        let items = ItemParams::uniform(6, 0.0, 0.0).unwrap();
        for link in [Link::Dina, Link::Dino] {
            let data = generate_responses(&profiles, &sim_q(), &items, link, 9).unwrap();
            for (p, row) in profiles.iter().zip(data.rows()) {
                let ideal: Vec<u8> = sim_q().ideal_unchecked(p.bits(), link).to_bools().into_iter().map(u8::from).collect();
                assert_eq!(row, &ideal[..]);
            }
        }
    }

    #[test]
    fn conditional_success_rates_within_three_se() {
        let sc = paper_sim().with_n(20_000);
        let (profiles, data) = sc.generate().unwrap();
        for j in 0..6 {
            for ideal in [true, false] {
                let rows: Vec<u8> = profiles
                    .iter()
                    .zip(data.rows())
                    .filter(|(p, _)| sc.q.ideal_bit(j, p.bits(), Link::Dina) == ideal)
                    .map(|(_, r)| r[j])
                    .collect();
                let p = sc.items.success_prob(j, ideal);
                let n = rows.len() as f64;
                let freq = rows.iter().map(|&v| v as f64).sum::<f64>() / n;
                let se = (p * (1.0 - p) / n).sqrt();
                assert!((freq - p).abs() < 3.0 * se + 1e-12, "item {j} ideal {ideal}: {freq} vs {p}");
            }
        }
    }

    #[test]
    fn marginal_profile_frequencies() {
        let sc = paper_sim().with_n(50_000);
        let profiles = draw_population(&sc).unwrap();
        let probs = sc.profile_probs().unwrap();
        let mut counts = [0usize; 8];
        profiles.iter().for_each(|p| counts[p.bits() as usize] += 1);
        for (c, p) in counts.iter().zip(&probs) {
            let freq = *c as f64 / 50_000.0;
            let se = (p * (1.0 - p) / 50_000.0).sqrt();
            assert!((freq - p).abs() <= 3.0 * se + 1e-12);
        }
    }

    fn pattern_counts(data: &ResponseMatrix) -> Vec<f64> {
        let mut counts = vec![0.0; 1 << data.n_items()];
        for row in data.rows() {
            let idx = row.iter().fold(0usize, |acc, &v| (acc << 1) | v as usize);
            counts[idx] += 1.0;
        }
        counts
    }

    fn chi_square_p(observed: &[f64], expected_probs: &[f64], n: f64) -> f64 {
        let stat: f64 = observed
            .iter()
            .zip(expected_probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&o, &p)| (o - n * p).powi(2) / (n * p))
            .sum();
        let df = expected_probs.iter().filter(|&&p| p > 0.0).count() as f64 - 1.0;
        1.0 - ChiSquared::new(df).unwrap().cdf(stat)
    }

    fn analytic_pattern_probs(q: &QMatrix, items: &ItemParams, probs: &[f64], link: Link) -> Vec<f64> {
        let j = q.n_items();
        (0..1usize << j)
            .map(|x| {
                let x: Vec<u8> = (0..j).map(|i| ((x >> (j - 1 - i)) & 1) as u8).collect();
                Profile::all(q.n_attributes())
                    .map(|a| probs[a.bits() as usize] * profile_response_prob(&x, q, a, items, link).unwrap())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn pattern_frequencies_match_mixture() {
        let sc = paper_sim().with_n(50_000);
        let (_, data) = sc.generate().unwrap();
        let probs = analytic_pattern_probs(&sc.q, &sc.items, &sc.profile_probs().unwrap(), Link::Dina);
        let p = chi_square_p(&pattern_counts(&data), &probs, 50_000.0);
        assert!(p > 0.001, "chi-square p = {p}");
    }

    #[test]
    fn dino_matches_flipped_dina_of_complements() {
        let sc = paper_sim().with_n(50_000);
        let profiles = draw_population(&sc).unwrap();
        let dino = generate_responses(&profiles, &sc.q, &sc.items, Link::Dino, 11).unwrap();
        // 1 - X under DINO is DINA on complemented profiles with s and g swapped.
        let probs = sc.profile_probs().unwrap();
        let mut complemented = vec![0.0; 8];
        for (bits, p) in probs.iter().enumerate() {
            complemented[7 - bits] = *p;
        }
        let expected = analytic_pattern_probs(&sc.q, &sc.items.swapped(), &complemented, Link::Dina);
        let p = chi_square_p(&pattern_counts(&dino.flipped()), &expected, 50_000.0);
        assert!(p > 0.001, "chi-square p = {p}");
    }

    #[test]
    fn scenario_validation_and_files() {
        assert!(Scenario::new("x", sim_q(), sim_items(), Population::ProfileProbs(vec![0.5; 4]), 10, 1, Link::Dina).is_err());
        assert!(Scenario::new("x", sim_q(), sim_items(), Population::ProfileProbs(vec![0.125; 8]), 0, 1, Link::Dina).is_err());
        assert!(Scenario::new(
            "x",
            sim_q(),
            sim_items(),
            Population::Prior(PriorSpec::Saturated { nu: vec![0.2; 5] }),
            10,
            1,
            Link::Dina
        )
        .is_err());

        let sc = paper_sim();
        let json = serde_json::to_string(&ScenarioFile::from(&sc)).unwrap();
        let back: ScenarioFile = serde_json::from_str(&json).unwrap();
        let rebuilt = back.into_scenario(Path::new(".")).unwrap();
        assert_eq!(rebuilt.q, sc.q);
        assert_eq!(rebuilt.generate().unwrap(), sc.generate().unwrap());
    }
}
