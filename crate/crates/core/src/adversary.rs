//! Client types and the label-flipping attack.
//!
//! A fixed fraction of clients is malicious for the whole experiment; the
//! attack shifts every label by a constant offset modulo the class count.
//! Malicious clients always play the poisoned action — the strategic
//! analysis of whether that is rational lives in [`crate::mechanism`].

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::seeding;

/// A client's private type, fixed for the whole experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientType {
    Benevolent,
    Malicious,
}

impl ClientType {
    pub fn is_malicious(self) -> bool {
        matches!(self, ClientType::Malicious)
    }

    /// Lowercase name used in CSV output.
    pub fn as_str(self) -> &'static str {
        match self {
            ClientType::Benevolent => "benevolent",
            ClientType::Malicious => "malicious",
        }
    }
}

/// A client's identity, type, data shard, and per-round participation cost.
#[derive(Debug, Clone)]
pub struct ClientProfile {
    pub id: usize,
    pub client_type: ClientType,
    pub shard: Vec<usize>,
    pub cost: f64,
}

impl ClientProfile {
    pub fn new(id: usize, client_type: ClientType, shard: Vec<usize>, cost: f64) -> Result<Self> {
        if shard.is_empty() {
            return Err(Error::invalid_argument(format!(
                "client {id} has an empty shard"
            )));
        }
        if cost.is_nan() || cost < 0.0 {
            return Err(Error::invalid_argument("cost must be >= 0"));
        }
        Ok(ClientProfile {
            id,
            client_type,
            shard,
            cost,
        })
    }
}

/// Assign exactly `round(f * n_clients)` malicious types (round half up),
/// positions chosen by a seeded shuffle.
pub fn assign_types(n_clients: usize, f: f64, seed: u64) -> Result<Vec<ClientType>> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::invalid_argument(format!(
            "malicious fraction must be in [0, 1], got {f}"
        )));
    }
    let n_malicious = (f * n_clients as f64).round() as usize;
    let mut ids: Vec<usize> = (0..n_clients).collect();
    ids.shuffle(&mut seeding::rng(seed));
    let mut types = vec![ClientType::Benevolent; n_clients];
    for &id in ids.iter().take(n_malicious) {
        types[id] = ClientType::Malicious;
    }
    Ok(types)
}

/// Replace every label `y` with `(y + k) mod n_classes`; features untouched,
/// input not mutated. `k = 0` (a no-op attack) and `k >= n_classes` are
/// rejected to surface config mistakes.
pub fn flip_labels(data: &Dataset, k: usize) -> Result<Dataset> {
    let n_classes = data.n_classes();
    if k == 0 || k >= n_classes {
        return Err(Error::invalid_argument(format!(
            "flip offset must satisfy 1 <= k < n_classes ({n_classes}), got {k}"
        )));
    }
    let labels = data
        .labels()
        .iter()
        .map(|&y| (y + k) % n_classes)
        .collect();
    Dataset::new(data.features().clone(), labels, n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::generate_synthetic;

    fn count_malicious(types: &[ClientType]) -> usize {
        types.iter().filter(|t| t.is_malicious()).count()
    }

    #[test]
    fn half_of_one_hundred_is_fifty() {
        for seed in 0..5 {
            let types = assign_types(100, 0.5, seed).unwrap();
            assert_eq!(count_malicious(&types), 50);
        }
    }

    #[test]
    fn zero_and_one_fractions() {
        assert_eq!(count_malicious(&assign_types(10, 0.0, 3).unwrap()), 0);
        assert_eq!(count_malicious(&assign_types(10, 1.0, 3).unwrap()), 10);
    }

    #[test]
    fn count_is_round_half_up_for_any_fraction() {
        use rand::Rng;
        let mut rng = seeding::rng(88);
        for _ in 0..200 {
            let n = rng.gen_range(1..200);
            let f: f64 = rng.gen_range(0.0..=1.0);
            let expected = (f * n as f64).round() as usize;
            let types = assign_types(n, f, rng.gen()).unwrap();
            assert_eq!(count_malicious(&types), expected);
        }
    }

    #[test]
    fn seed_moves_positions_not_count() {
        let a = assign_types(30, 0.4, 1).unwrap();
        let b = assign_types(30, 0.4, 2).unwrap();
        assert_eq!(count_malicious(&a), count_malicious(&b));
        assert_ne!(a, b);
        assert_eq!(a, assign_types(30, 0.4, 1).unwrap());
    }

    #[test]
    fn out_of_range_fraction_is_rejected() {
        assert!(assign_types(10, -0.1, 0).is_err());
        assert!(assign_types(10, 1.5, 0).is_err());
    }

    #[test]
    fn flip_shifts_labels_modulo() {
        let data = generate_synthetic(10, 3, 4, 5.0, 1).unwrap();
        let flipped = flip_labels(&data, 1).unwrap();
        for (&orig, &new) in data.labels().iter().zip(flipped.labels()) {
            assert_eq!(new, (orig + 1) % 10);
        }
        // Spot values promised by the attack definition.
        assert_eq!((3 + 1) % 10, 4);
        assert_eq!((9 + 1) % 10, 0);
    }

    #[test]
    fn flip_rejects_degenerate_offsets() {
        let data = generate_synthetic(10, 2, 4, 5.0, 1).unwrap();
        assert!(flip_labels(&data, 0).is_err());
        assert!(flip_labels(&data, 10).is_err());
        assert!(flip_labels(&data, 11).is_err());
    }

    #[test]
    fn flip_histogram_is_cyclic_shift() {
        let data = generate_synthetic(7, 13, 4, 5.0, 5).unwrap();
        let k = 3;
        let flipped = flip_labels(&data, k).unwrap();
        // Brute-force counting on both sides.
        let histogram = |labels: &[usize]| {
            let mut h = vec![0usize; 7];
            for &l in labels {
                h[l] += 1;
            }
            h
        };
        let before = histogram(data.labels());
        let after = histogram(flipped.labels());
        for c in 0..7 {
            assert_eq!(after[(c + k) % 7], before[c]);
        }
    }

    #[test]
    fn flips_compose_and_invert() {
        let data = generate_synthetic(10, 5, 4, 5.0, 8).unwrap();
        let twice = flip_labels(&flip_labels(&data, 3).unwrap(), 4).unwrap();
        let once = flip_labels(&data, 7).unwrap();
        assert_eq!(twice.labels(), once.labels());

        // Applying k=1 n_classes times restores the original labels.
        let mut cycled = data.clone();
        for _ in 0..10 {
            cycled = flip_labels(&cycled, 1).unwrap();
        }
        assert_eq!(cycled.labels(), data.labels());
    }

    #[test]
    fn flip_leaves_features_untouched() {
        let data = generate_synthetic(4, 6, 5, 5.0, 2).unwrap();
        let flipped = flip_labels(&data, 2).unwrap();
        assert_eq!(data.features(), flipped.features());
    }
}
