//! Q-matrix algebra: ideal responses, completeness, separability, and the
//! equivalence-class partition of the attribute-profile space.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported attribute count; `2^K` profiles are enumerated.
pub const MAX_ATTRIBUTES: usize = 24;

/// Condensation rule mapping an attribute profile to an ideal response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// Conjunctive: every required attribute must be mastered.
    #[default]
    Dina,
    /// Disjunctive: any one required attribute suffices.
    Dino,
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dina" => Ok(Link::Dina),
            "dino" => Ok(Link::Dino),
            other => Err(Error::InvalidParameter(format!("unknown link `{other}`"))),
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Link::Dina => "dina",
            Link::Dino => "dino",
        })
    }
}

/// A binary attribute profile of length `K`.
///
/// Attribute 1 is stored in the most significant of the `K` low bits, so the
/// integer order of `bits` is the lexicographic order of the bit string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Profile {
    bits: u32,
    len: u8,
}

impl Profile {
    pub fn new(bits: u32, len: usize) -> Self {
        assert!(len <= MAX_ATTRIBUTES, "profile length {len} over cap");
        debug_assert!(len == 32 || bits >> len == 0);
        Profile { bits, len: len as u8 }
    }

    pub fn from_bools(values: &[bool]) -> Self {
        let bits = values.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
        Profile::new(bits, values.len())
    }

    pub fn zeros(len: usize) -> Self {
        Profile::new(0, len)
    }

    pub fn ones(len: usize) -> Self {
        Profile::new(full_mask(len), len)
    }

    /// All `2^len` profiles in lexicographic order.
    pub fn all(len: usize) -> impl Iterator<Item = Profile> {
        (0..1u32 << len).map(move |b| Profile::new(b, len))
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn len(self) -> usize {
        self.len as usize
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    /// Value of attribute `k` (0-based, attribute 1 is `k = 0`).
    pub fn get(self, k: usize) -> bool {
        debug_assert!(k < self.len());
        (self.bits >> (self.len() - 1 - k)) & 1 == 1
    }

    pub fn to_bools(self) -> Vec<bool> {
        (0..self.len()).map(|k| self.get(k)).collect()
    }

    pub fn complement(self) -> Self {
        Profile::new(!self.bits & full_mask(self.len()), self.len())
    }

    pub fn count_ones(self) -> u32 {
        self.bits.count_ones()
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.len() {
            f.write_str(if self.get(k) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bools = parse_bit_string(s)?;
        if bools.len() > MAX_ATTRIBUTES {
            return Err(Error::TooManyAttributes(bools.len()));
        }
        Ok(Profile::from_bools(&bools))
    }
}

pub(crate) fn full_mask(len: usize) -> u32 {
    if len == 32 {
        u32::MAX
    } else {
        (1u32 << len) - 1
    }
}

pub(crate) fn parse_bit_string(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::InvalidData(format!(
                "bit string `{s}` contains `{other}`"
            ))),
        })
        .collect()
}

pub(crate) fn bools_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Ideal (noise-free) response vector of length `J`.
///
/// Packed MSB-first in 64-bit words so that the derived `Ord` is the
/// lexicographic order of the bit string with item 1 leftmost.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IdealResponse {
    words: Vec<u64>,
    len: usize,
}

impl IdealResponse {
    pub fn from_bools(values: &[bool]) -> Self {
        let mut words = vec![0u64; values.len().div_ceil(64)];
        for (j, &v) in values.iter().enumerate() {
            if v {
                words[j / 64] |= 1u64 << (63 - j % 64);
            }
        }
        IdealResponse {
            words,
            len: values.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, j: usize) -> bool {
        debug_assert!(j < self.len);
        (self.words[j / 64] >> (63 - j % 64)) & 1 == 1
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|j| self.get(j)).collect()
    }

    pub fn complement(&self) -> Self {
        IdealResponse::from_bools(&self.to_bools().iter().map(|b| !b).collect::<Vec<_>>())
    }
}

impl fmt::Display for IdealResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bools_to_string(&self.to_bools()))
    }
}

/// `J x K` binary item-by-attribute requirement matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QMatrix {
    /// One requirement mask per item, in [`Profile`] bit order.
    rows: Vec<u32>,
    n_attributes: usize,
}

impl QMatrix {
    /// Builds a Q-matrix from 0/1 rows.
    pub fn new(rows: &[Vec<u8>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidQMatrix("no items".into()));
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(Error::InvalidQMatrix("no attributes".into()));
        }
        if k > MAX_ATTRIBUTES {
            return Err(Error::TooManyAttributes(k));
        }
        let mut masks = Vec::with_capacity(rows.len());
        for (j, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidQMatrix(format!(
                    "item {} has {} entries, expected {k}",
                    j + 1,
                    row.len()
                )));
            }
            let mut mask = 0u32;
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => mask |= 1 << (k - 1 - c),
                    other => {
                        return Err(Error::InvalidQMatrix(format!(
                            "item {} attribute {} has entry {other}",
                            j + 1,
                            c + 1
                        )))
                    }
                }
            }
            if mask == 0 {
                return Err(Error::InvalidQMatrix(format!(
                    "item {} requires no attribute",
                    j + 1
                )));
            }
            masks.push(mask);
        }
        Ok(QMatrix {
            rows: masks,
            n_attributes: k,
        })
    }

    /// Builds a Q-matrix from rows written as bit strings, e.g. `["100", "110"]`.
    pub fn from_bit_strings<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| {
                parse_bit_string(r.as_ref()).map(|b| b.into_iter().map(u8::from).collect())
            })
            .collect::<Result<Vec<Vec<u8>>>>()?;
        QMatrix::new(&rows)
    }

    pub fn n_items(&self) -> usize {
        self.rows.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn n_profiles(&self) -> usize {
        1usize << self.n_attributes
    }

    /// Requirement vector of item `j` as a profile-shaped mask.
    pub fn row(&self, j: usize) -> Profile {
        Profile::new(self.rows[j], self.n_attributes)
    }

    pub fn entry(&self, j: usize, k: usize) -> bool {
        self.row(j).get(k)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n_items())
            .map(|j| (0..self.n_attributes).map(|k| self.entry(j, k) as u8).collect())
            .collect()
    }

    /// Returns a copy with repeated requirement rows removed (first kept).
    pub fn dedup_rows(&self) -> QMatrix {
        let mut seen = std::collections::HashSet::new();
        let rows = self.rows.iter().copied().filter(|r| seen.insert(*r)).collect();
        QMatrix {
            rows,
            n_attributes: self.n_attributes,
        }
    }

    /// Appends one item requirement row.
    pub fn with_row(&self, row: Profile) -> Result<QMatrix> {
        if row.len() != self.n_attributes {
            return Err(Error::Dimension(format!(
                "row has {} attributes, Q-matrix has {}",
                row.len(),
                self.n_attributes
            )));
        }
        if row.bits() == 0 {
            return Err(Error::InvalidQMatrix("appended row requires no attribute".into()));
        }
        let mut rows = self.rows.clone();
        rows.push(row.bits());
        Ok(QMatrix {
            rows,
            n_attributes: self.n_attributes,
        })
    }

    /// Returns the matrix with items reordered so new item `i` is old item `order[i]`.
    pub fn permute_items(&self, order: &[usize]) -> QMatrix {
        QMatrix {
            rows: order.iter().map(|&j| self.rows[j]).collect(),
            n_attributes: self.n_attributes,
        }
    }

    #[inline]
    pub(crate) fn ideal_bit(&self, j: usize, alpha: u32, link: Link) -> bool {
        let q = self.rows[j];
        match link {
            Link::Dina => alpha & q == q,
            Link::Dino => alpha & q != 0,
        }
    }

    pub(crate) fn ideal_unchecked(&self, alpha: u32, link: Link) -> IdealResponse {
        let bits: Vec<bool> = (0..self.n_items())
            .map(|j| self.ideal_bit(j, alpha, link))
            .collect();
        IdealResponse::from_bools(&bits)
    }
}

impl fmt::Display for QMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.n_items() {
            writeln!(f, "{}", self.row(j))?;
        }
        Ok(())
    }
}

/// Ideal response of profile `a` under `q`.
pub fn ideal_response(q: &QMatrix, a: Profile, link: Link) -> Result<IdealResponse> {
    if a.len() != q.n_attributes() {
        return Err(Error::Dimension(format!(
            "profile has {} attributes, Q-matrix has {}",
            a.len(),
            q.n_attributes()
        )));
    }
    Ok(q.ideal_unchecked(a.bits(), link))
}

/// True iff every unit vector `e_k` is a row of `q`.
pub fn is_complete(q: &QMatrix) -> bool {
    let k = q.n_attributes();
    (0..k).all(|c| {
        let unit = 1u32 << (k - 1 - c);
        q.rows.contains(&unit)
    })
}

/// Whether two profiles produce different response distributions (DINA).
pub fn separable(
    q: &QMatrix,
    a1: Profile,
    a2: Profile,
    slip: &[f64],
    guess: &[f64],
) -> Result<bool> {
    let xi1 = ideal_response(q, a1, Link::Dina)?;
    let xi2 = ideal_response(q, a2, Link::Dina)?;
    if slip.len() != q.n_items() || guess.len() != q.n_items() {
        return Err(Error::Dimension(format!(
            "{} items but {} slip and {} guess values",
            q.n_items(),
            slip.len(),
            guess.len()
        )));
    }
    Ok((0..q.n_items()).any(|j| xi1.get(j) != xi2.get(j) && 1.0 - slip[j] != guess[j]))
}

/// Profiles sharing one ideal response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    pub minimal_representative: Profile,
    /// Sorted lexicographically; `members[0]` is the minimal representative.
    pub members: Vec<Profile>,
    pub ideal: IdealResponse,
    /// `delta[k]` is true iff every member agrees on attribute `k`.
    pub delta: Vec<bool>,
}

impl EquivalenceClass {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }

    /// The shared value of attribute `k` when it is marginally identifiable.
    pub fn common_bit(&self, k: usize) -> Option<bool> {
        self.delta[k].then(|| self.minimal_representative.get(k))
    }

    pub fn delta_string(&self) -> String {
        bools_to_string(&self.delta)
    }
}

/// Marginal identifiability indicators of a class: attribute `k` is
/// identifiable iff all members agree on it.
pub fn marginal_identifiability(c: &EquivalenceClass) -> Vec<bool> {
    delta_of(&c.members)
}

fn delta_of(members: &[Profile]) -> Vec<bool> {
    let len = members[0].len();
    let all = members.iter().fold(full_mask(len), |acc, p| acc & p.bits());
    let none = members.iter().fold(full_mask(len), |acc, p| acc & !p.bits());
    let agree = (all | none) & full_mask(len);
    Profile::new(agree, len).to_bools()
}

/// Partition of `{0,1}^K` induced by equality of ideal responses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Ordered by minimal representative.
    pub classes: Vec<EquivalenceClass>,
    profile_index: Vec<u32>,
    n_attributes: usize,
    link: Link,
}

impl Partition {
    /// Number of classes `L`.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn link(&self) -> Link {
        self.link
    }

    /// Ordinal of the class containing `profile`.
    pub fn class_of(&self, profile: Profile) -> usize {
        self.profile_index[profile.bits() as usize] as usize
    }

    /// Class ordinal for every profile, indexed by `Profile::bits`.
    pub fn profile_classes(&self) -> &[u32] {
        &self.profile_index
    }

    pub fn singletons(&self) -> usize {
        self.classes.iter().filter(|c| c.is_singleton()).count()
    }

    /// Position of the class labeled by `min_rep`, if any.
    pub fn find(&self, min_rep: Profile) -> Option<usize> {
        self.classes
            .binary_search_by(|c| c.minimal_representative.cmp(&min_rep))
            .ok()
    }
}

/// Partitions the profile space of `q` under the DINA link.
pub fn partition(q: &QMatrix) -> Result<Partition> {
    partition_with(q, Link::Dina, true)
}

/// Sort-based partition: enumerate profiles, compute ideal responses, sort
/// them lexicographically, and cut wherever consecutive ideals differ.
///
/// With `dedup`, repeated Q rows are dropped first; this never changes the
/// result because a repeated item repeats an ideal bit.
pub fn partition_with(q: &QMatrix, link: Link, dedup: bool) -> Result<Partition> {
    let k = q.n_attributes();
    if k > MAX_ATTRIBUTES {
        return Err(Error::TooManyAttributes(k));
    }
    let reduced;
    let key_q = if dedup {
        reduced = q.dedup_rows();
        &reduced
    } else {
        q
    };
    let n_profiles = 1usize << k;
    let j_count = key_q.n_items();
    let width = j_count.div_ceil(64);

    let mut keys = vec![0u64; n_profiles * width];
    for (p, key) in keys.chunks_exact_mut(width).enumerate() {
        for j in 0..j_count {
            if key_q.ideal_bit(j, p as u32, link) {
                key[j / 64] |= 1u64 << (63 - j % 64);
            }
        }
    }
    let key_of = |p: u32| &keys[p as usize * width..(p as usize + 1) * width];

    // Stable sort keeps members of a class in ascending profile order.
    let mut order: Vec<u32> = (0..n_profiles as u32).collect();
    order.sort_by(|&a, &b| key_of(a).cmp(key_of(b)));

    let mut groups: Vec<Vec<u32>> = Vec::new();
    for (i, &p) in order.iter().enumerate() {
        if i == 0 || key_of(order[i - 1]) != key_of(p) {
            groups.push(vec![p]);
        } else {
            groups.last_mut().expect("nonempty").push(p);
        }
    }
    groups.sort_by(|a, b| a[0].cmp(&b[0]));

    let mut profile_index = vec![0u32; n_profiles];
    let classes = groups
        .into_iter()
        .enumerate()
        .map(|(ordinal, group)| {
            let members: Vec<Profile> = group.iter().map(|&b| Profile::new(b, k)).collect();
            for &b in &group {
                profile_index[b as usize] = ordinal as u32;
            }
            EquivalenceClass {
                minimal_representative: members[0],
                ideal: q.ideal_unchecked(members[0].bits(), link),
                delta: delta_of(&members),
                members,
            }
        })
        .collect();

    Ok(Partition {
        classes,
        profile_index,
        n_attributes: k,
        link,
    })
}

impl PartialOrd for EquivalenceClass {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EquivalenceClass {
    fn cmp(&self, other: &Self) -> Ordering {
        self.minimal_representative
            .cmp(&other.minimal_representative)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q3() -> QMatrix {
        QMatrix::from_bit_strings(&["100", "110", "011"]).unwrap()
    }

    fn p(s: &str) -> Profile {
        s.parse().unwrap()
    }

    #[test]
    fn profile_order_is_lexicographic() {
        let all: Vec<String> = Profile::all(3).map(|p| p.to_string()).collect();
        assert_eq!(all, ["000", "001", "010", "011", "100", "101", "110", "111"]);
        assert!(p("011") < p("100"));
        assert_eq!(p("101").complement().to_string(), "010");
    }

    #[test]
    fn q3_ideal_responses() {
        let q = q3();
        assert_eq!(ideal_response(&q, p("010"), Link::Dina).unwrap().to_string(), "000");
        assert_eq!(ideal_response(&q, p("101"), Link::Dina).unwrap().to_string(), "100");
        assert_eq!(ideal_response(&q, p("111"), Link::Dina).unwrap().to_string(), "111");
        assert_eq!(ideal_response(&q, p("000"), Link::Dino).unwrap().to_string(), "000");
        assert!(matches!(
            ideal_response(&q, p("01"), Link::Dina),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn construction_rejects_bad_rows() {
        assert!(QMatrix::from_bit_strings(&["10", "00"]).is_err());
        assert!(QMatrix::new(&[vec![1, 2]]).is_err());
        assert!(QMatrix::new(&[vec![1, 0], vec![1]]).is_err());
        assert!(QMatrix::new(&[]).is_err());
        assert!(matches!(
            QMatrix::new(&[vec![1; 25]]),
            Err(Error::TooManyAttributes(25))
        ));
    }

    #[test]
    fn completeness() {
        assert!(is_complete(&QMatrix::from_bit_strings(&["10", "01"]).unwrap()));
        assert!(!is_complete(&QMatrix::from_bit_strings(&["10", "11"]).unwrap()));
        assert!(!is_complete(&q3()));
    }

    #[test]
    fn q3_partition_matches_worked_example() {
        let part = partition(&q3()).unwrap();
        let got: Vec<(String, Vec<String>, String)> = part
            .classes
            .iter()
            .map(|c| {
                (
                    c.minimal_representative.to_string(),
                    c.members.iter().map(|m| m.to_string()).collect(),
                    c.ideal.to_string(),
                )
            })
            .collect();
        let want = [
            ("000", vec!["000", "001", "010"], "000"),
            ("011", vec!["011"], "001"),
            ("100", vec!["100", "101"], "100"),
            ("110", vec!["110"], "110"),
            ("111", vec!["111"], "111"),
        ];
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want.iter()) {
            assert_eq!(g.0, w.0);
            assert_eq!(g.1, w.1);
            assert_eq!(g.2, w.2);
        }
        assert_eq!(part.class_of(p("010")), 0);
        assert_eq!(part.find(p("100")), Some(2));
    }

    #[test]
    fn delta_examples() {
        let part = partition(&q3()).unwrap();
        assert_eq!(part.classes[0].delta_string(), "100");
        assert_eq!(part.classes[2].delta_string(), "110");
        assert_eq!(marginal_identifiability(&part.classes[1]), vec![true; 3]);
        assert_eq!(part.classes[0].common_bit(0), Some(false));
        assert_eq!(part.classes[0].common_bit(1), None);
    }

    #[test]
    fn separability() {
        let q1 = QMatrix::from_bit_strings(&["10", "01"]).unwrap();
        let q2 = QMatrix::from_bit_strings(&["10", "11"]).unwrap();
        let s = [0.1, 0.2];
        let g = [0.2, 0.15];
        assert!(!separable(&q2, p("00"), p("01"), &s, &g).unwrap());
        assert!(separable(&q1, p("00"), p("01"), &s, &g).unwrap());
        assert!(!separable(&q1, p("00"), p("01"), &[0.1, 0.25], &[0.2, 0.75]).unwrap());
        assert!(separable(&q1, p("00"), p("01"), &[0.1], &g).is_err());
    }

    #[test]
    fn identity_q_gives_singletons() {
        let q = QMatrix::from_bit_strings(&["1000", "0100", "0010", "0001"]).unwrap();
        let part = partition(&q).unwrap();
        assert_eq!(part.len(), 16);
        assert!(part.classes.iter().all(|c| c.is_singleton()));
    }

    fn arb_q() -> impl Strategy<Value = QMatrix> {
        (1usize..=6, 1usize..=7).prop_flat_map(|(k, j)| {
            proptest::collection::vec(1u32..(1 << k), j).prop_map(move |rows| {
                let rows: Vec<Vec<u8>> = rows
                    .iter()
                    .map(|&r| Profile::new(r, k).to_bools().into_iter().map(u8::from).collect())
                    .collect();
                QMatrix::new(&rows).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn partition_is_sound(q in arb_q()) {
            let part = partition(&q).unwrap();
            let k = q.n_attributes();
            let mut seen = 0usize;
            for c in &part.classes {
                seen += c.members.len();
                prop_assert!(c.members.windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!(c.minimal_representative, c.members[0]);
                for m in &c.members {
                    prop_assert_eq!(&ideal_response(&q, *m, Link::Dina).unwrap(), &c.ideal);
                }
            }
            prop_assert_eq!(seen, 1 << k);
            for a in Profile::all(k) {
                for b in Profile::all(k) {
                    let same = ideal_response(&q, a, Link::Dina).unwrap()
                        == ideal_response(&q, b, Link::Dina).unwrap();
                    prop_assert_eq!(same, part.class_of(a) == part.class_of(b));
                }
            }
        }

        #[test]
        fn complete_iff_all_singletons(q in arb_q()) {
            let part = partition(&q).unwrap();
            prop_assert_eq!(is_complete(&q), part.len() == 1 << q.n_attributes());
        }

        #[test]
        fn dedup_leaves_partition_unchanged(q in arb_q(), dup in 0usize..7) {
            let extra = q.row(dup % q.n_items());
            let doubled = q.with_row(extra).unwrap();
            let a = partition_with(&doubled, Link::Dina, false).unwrap();
            let b = partition_with(&doubled, Link::Dina, true).unwrap();
            let members = |p: &Partition| p.classes.iter().map(|c| c.members.clone()).collect::<Vec<_>>();
            prop_assert_eq!(members(&a), members(&b));
            prop_assert_eq!(members(&a), members(&partition(&q).unwrap()));
        }

        #[test]
        fn appending_a_row_only_refines(q in arb_q(), extra in 1u32..64) {
            let k = q.n_attributes();
            let row = Profile::new(extra & full_mask(k), k);
            prop_assume!(row.bits() != 0);
            let before = partition(&q).unwrap();
            let after = partition(&q.with_row(row).unwrap()).unwrap();
            for c in &after.classes {
                let home = before.class_of(c.members[0]);
                prop_assert!(c.members.iter().all(|m| before.class_of(*m) == home));
            }
        }

        #[test]
        fn dino_is_dual_to_dina(q in arb_q(), bits in 0u32..64) {
            let k = q.n_attributes();
            let a = Profile::new(bits & full_mask(k), k);
            let dino = ideal_response(&q, a, Link::Dino).unwrap();
            let dina = ideal_response(&q, a.complement(), Link::Dina).unwrap();
            prop_assert_eq!(dino, dina.complement());
        }

        #[test]
        fn multi_member_classes_have_a_zero_delta(q in arb_q()) {
            for c in &partition(&q).unwrap().classes {
                prop_assert_eq!(c.delta.iter().all(|&d| d), c.is_singleton());
            }
        }
    }
}
