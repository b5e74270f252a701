//! Rank similarity between AP sequences, and the cosine baseline over raw
//! RSS vectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqmap::{ApId, ApSequence};

/// Similarity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    /// Clamps into `[0, 1]`.
    pub fn new(value: f64) -> Self {
        Self(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// RSS readings keyed by AP id, in dBm. Serialized as a JSON object whose
/// keys are the decimal ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>")]
pub struct RssVector(BTreeMap<ApId, f64>);

impl TryFrom<BTreeMap<String, f64>> for RssVector {
    type Error = String;

    fn try_from(raw: BTreeMap<String, f64>) -> std::result::Result<Self, String> {
        raw.into_iter()
            .map(|(k, v)| {
                let id = k
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| format!("invalid AP id `{k}`"))?;
                Ok((ApId(id), v))
            })
            .collect::<std::result::Result<_, _>>()
            .map(Self)
    }
}

impl RssVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (u32, f64)>>(pairs: I) -> Self {
        Self(pairs.into_iter().map(|(id, v)| (ApId(id), v)).collect())
    }

    pub fn insert(&mut self, id: ApId, rss: f64) {
        self.0.insert(id, rss);
    }

    pub fn get(&self, id: ApId) -> Option<f64> {
        self.0.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ApId, f64)> + '_ {
        self.0.iter().map(|(&id, &v)| (id, v))
    }
}

/// Concordant minus discordant pair count of `b` relative to `a`, plus the
/// total pair count. Both sequences must hold the same id set.
fn pair_balance(a: &ApSequence, b: &ApSequence) -> Result<(i64, i64)> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::SequenceDomain(format!(
            "length mismatch {} vs {}",
            n,
            b.len()
        )));
    }
    if n < 2 {
        return Err(Error::SequenceDomain(format!(
            "need at least 2 ids, got {n}"
        )));
    }
    // rank in b of each element of a, in a's order
    let mut rank_b = Vec::with_capacity(n);
    for &id in a.ids() {
        match b.position_of(id) {
            Some(r) => rank_b.push(r),
            None => {
                return Err(Error::SequenceDomain(format!(
                    "AP {id} missing from second sequence"
                )))
            }
        }
    }
    let mut balance = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            balance += if rank_b[i] < rank_b[j] { 1 } else { -1 };
        }
    }
    let pairs = (n * (n - 1) / 2) as i64;
    Ok((balance, pairs))
}

/// Kendall rank correlation between two permutations of the same id set.
pub fn kendall_tau(a: &ApSequence, b: &ApSequence) -> Result<f64> {
    let (balance, pairs) = pair_balance(a, b)?;
    Ok(balance as f64 / pairs as f64)
}

/// `(1 + tau) / 2`.
pub fn sim(a: &ApSequence, b: &ApSequence) -> Result<f64> {
    let tau = kendall_tau(a, b)?;
    Ok(SimilarityScore::new(0.5 * (1.0 + tau)).value())
}

/// Restricts both sequences to their common ids, keeping each one's order.
pub fn align(a: &ApSequence, b: &ApSequence) -> Result<(ApSequence, ApSequence)> {
    let keep_a: Vec<ApId> = a
        .ids()
        .iter()
        .copied()
        .filter(|&id| b.contains(id))
        .collect();
    if keep_a.len() < 2 {
        return Err(Error::InsufficientOverlap {
            common: keep_a.len(),
            required: 2,
        });
    }
    let keep_b: Vec<ApId> = b
        .ids()
        .iter()
        .copied()
        .filter(|&id| a.contains(id))
        .collect();
    Ok((ApSequence::new(keep_a)?, ApSequence::new(keep_b)?))
}

/// [`sim`] after [`align`]; the similarity used against map cells, whose
/// sequences always hold every AP while a scan may not.
pub fn aligned_sim(a: &ApSequence, b: &ApSequence) -> Result<f64> {
    if a.len() == b.len() && a.ids().iter().all(|&id| b.contains(id)) {
        return sim(a, b);
    }
    let (a, b) = align(a, b)?;
    sim(&a, &b)
}

/// Shift applied to dBm values so every component is non-negative.
pub const COSINE_SHIFT_DBM: f64 = 100.0;

/// Cosine similarity of two RSS vectors over their common APs, each value
/// shifted by [`COSINE_SHIFT_DBM`]; clamped to `[0, 1]`.
pub fn cosine_sim(a: &RssVector, b: &RssVector) -> Result<f64> {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    let mut common = 0;
    for (id, ra) in a.iter() {
        if let Some(rb) = b.get(id) {
            let (u, v) = (ra + COSINE_SHIFT_DBM, rb + COSINE_SHIFT_DBM);
            dot += u * v;
            na += u * u;
            nb += v * v;
            common += 1;
        }
    }
    if common < 2 {
        return Err(Error::InsufficientOverlap {
            common,
            required: 2,
        });
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedSimilarity(
            "zero-magnitude shifted RSS vector".into(),
        ));
    }
    Ok(SimilarityScore::new(dot / (na.sqrt() * nb.sqrt())).value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn seq(ids: &[u32]) -> ApSequence {
        ApSequence::from_ids(ids).unwrap()
    }

    /// Counts concordant and discordant id pairs directly.
    fn oracle_counts(a: &[u32], b: &[u32]) -> (usize, usize) {
        let pos = |s: &[u32], id: u32| s.iter().position(|&x| x == id).unwrap();
        let mut ids = a.to_vec();
        ids.sort_unstable();
        let (mut nc, mut nd) = (0, 0);
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                let (p, q) = (ids[i], ids[j]);
                let order_a = pos(a, p) < pos(a, q);
                let order_b = pos(b, p) < pos(b, q);
                if order_a == order_b {
                    nc += 1;
                } else {
                    nd += 1;
                }
            }
        }
        (nc, nd)
    }

    #[test]
    fn tau_identity_and_reverse() {
        let a = seq(&[4, 1, 3, 2, 5]);
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        assert_eq!(kendall_tau(&a, &a.reversed()).unwrap(), -1.0);
        assert_eq!(sim(&a, &a).unwrap(), 1.0);
        assert_eq!(sim(&a, &a.reversed()).unwrap(), 0.0);
    }

    #[test]
    fn tau_two_discordant_of_six() {
        let (nc, nd) = oracle_counts(&[2, 3, 4, 1], &[3, 4, 2, 1]);
        assert_eq!((nc, nd), (4, 2));
        let tau = kendall_tau(&seq(&[2, 3, 4, 1]), &seq(&[3, 4, 2, 1])).unwrap();
        assert_abs_diff_eq!(tau, 1.0 / 3.0, epsilon = 1e-15);
        let s = sim(&seq(&[2, 3, 4, 1]), &seq(&[3, 4, 2, 1])).unwrap();
        assert_abs_diff_eq!(s, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn tau_rejects_mismatched_sets() {
        assert!(matches!(
            kendall_tau(&seq(&[1, 2, 3]), &seq(&[1, 2, 4])),
            Err(Error::SequenceDomain(_))
        ));
        assert!(kendall_tau(&seq(&[1, 2, 3]), &seq(&[1, 2])).is_err());
        assert!(kendall_tau(&seq(&[1]), &seq(&[1])).is_err());
    }

    #[test]
    fn align_cases() {
        let (a, b) = align(&seq(&[1, 2, 3]), &seq(&[3, 2, 1])).unwrap();
        assert_eq!((a, b), (seq(&[1, 2, 3]), seq(&[3, 2, 1])));

        let (a, b) = align(&seq(&[1, 2, 3, 4]), &seq(&[4, 2, 1])).unwrap();
        assert_eq!((a, b), (seq(&[1, 2, 4]), seq(&[4, 2, 1])));

        assert!(matches!(
            align(&seq(&[5, 6]), &seq(&[7, 8])),
            Err(Error::InsufficientOverlap { common: 0, .. })
        ));
    }

    #[test]
    fn cosine_cases() {
        let a = RssVector::from_pairs([(1, -50.0), (2, -70.0)]);
        assert_abs_diff_eq!(cosine_sim(&a, &a).unwrap(), 1.0, epsilon = 1e-12);

        let x = RssVector::from_pairs([(1, -99.0), (2, -100.0)]);
        let y = RssVector::from_pairs([(1, -100.0), (2, -99.0)]);
        assert_eq!(cosine_sim(&x, &y).unwrap(), 0.0);

        let b = RssVector::from_pairs([(1, -60.0), (2, -60.0)]);
        let expected = (50.0 * 40.0 + 30.0 * 40.0) / (3400f64.sqrt() * 3200f64.sqrt());
        assert_abs_diff_eq!(cosine_sim(&a, &b).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.970, epsilon = 5e-4);
    }

    #[test]
    fn cosine_errors() {
        let a = RssVector::from_pairs([(1, -50.0), (2, -70.0)]);
        let one = RssVector::from_pairs([(1, -50.0), (3, -70.0)]);
        assert!(matches!(
            cosine_sim(&a, &one),
            Err(Error::InsufficientOverlap { common: 1, .. })
        ));
        let floor = RssVector::from_pairs([(1, -100.0), (2, -100.0)]);
        assert!(matches!(
            cosine_sim(&a, &floor),
            Err(Error::UndefinedSimilarity(_))
        ));
    }

    #[test]
    fn rss_vector_json_keys_are_strings() {
        let v = RssVector::from_pairs([(1, -55.0), (12, -70.5)]);
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"{"1":-55.0,"12":-70.5}"#);
        assert_eq!(serde_json::from_str::<RssVector>(&text).unwrap(), v);
    }

    fn permutation(n: usize) -> impl Strategy<Value = Vec<u32>> {
        Just((1..=n as u32).collect::<Vec<_>>()).prop_shuffle()
    }

    fn perm_pair() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
        (2usize..12).prop_flat_map(|n| (permutation(n), permutation(n)))
    }

    proptest! {
        #[test]
        fn tau_matches_pair_enumeration((a, b) in perm_pair()) {
            let (nc, nd) = oracle_counts(&a, &b);
            let n = a.len();
            let expected = (nc as f64 - nd as f64) / (n * (n - 1) / 2) as f64;
            prop_assert_eq!(kendall_tau(&seq(&a), &seq(&b)).unwrap(), expected);
        }

        #[test]
        fn tau_and_sim_are_symmetric((a, b) in perm_pair()) {
            let (a, b) = (seq(&a), seq(&b));
            prop_assert_eq!(kendall_tau(&a, &b).unwrap(), kendall_tau(&b, &a).unwrap());
            let s = sim(&a, &b).unwrap();
            prop_assert_eq!(s, sim(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn tau_is_relabel_invariant(
            (a, b, labels) in (2usize..10).prop_flat_map(|n| (permutation(n), permutation(n), permutation(n)))
        ) {
            let relabel = |s: &[u32]| s.iter().map(|&x| 100 + labels[(x - 1) as usize]).collect::<Vec<_>>();
            prop_assert_eq!(
                kendall_tau(&seq(&a), &seq(&b)).unwrap(),
                kendall_tau(&seq(&relabel(&a)), &seq(&relabel(&b))).unwrap()
            );
        }

        #[test]
        fn cosine_is_symmetric_and_bounded(
            xs in proptest::collection::vec(-100.0f64..-20.0, 2..10),
            ys in proptest::collection::vec(-100.0f64..-20.0, 2..10),
        ) {
            let a = RssVector::from_pairs(xs.iter().enumerate().map(|(i, &v)| (i as u32, v)));
            let b = RssVector::from_pairs(ys.iter().enumerate().map(|(i, &v)| (i as u32, v)));
            match (cosine_sim(&a, &b), cosine_sim(&b, &a)) {
                (Ok(s), Ok(t)) => {
                    prop_assert_eq!(s, t);
                    prop_assert!((0.0..=1.0).contains(&s));
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric failure"),
            }
        }
    }
}
