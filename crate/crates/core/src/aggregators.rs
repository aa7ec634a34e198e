//! Aggregation strategies: FedAvg, Krum selection, and the verified mean.
//!
//! FedAvg and the verified mean are uniform (unweighted) element-wise means;
//! Krum selects the single update whose summed squared distance to its
//! nearest neighbors is smallest. Ties break on the lowest client id
//! everywhere so runs are reproducible across platforms.

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Client updates collected in one round, parallel to their client ids.
///
/// May be empty (the verified set of a round can be), but FedAvg and Krum
/// require at least one update.
#[derive(Debug, Clone)]
pub struct UpdateSet {
    updates: Vec<ModelParams>,
    client_ids: Vec<usize>,
}

impl UpdateSet {
    pub fn new(updates: Vec<ModelParams>, client_ids: Vec<usize>) -> Result<Self> {
        if updates.len() != client_ids.len() {
            return Err(Error::invalid_argument(format!(
                "{} updates but {} client ids",
                updates.len(),
                client_ids.len()
            )));
        }
        if let Some(first) = updates.first() {
            if let Some(bad) = updates
                .iter()
                .find(|u| u.architecture() != first.architecture())
            {
                return Err(Error::invalid_argument(format!(
                    "mixed architectures in update set: {:?} vs {:?}",
                    first.architecture().layer_sizes(),
                    bad.architecture().layer_sizes()
                )));
            }
        }
        Ok(UpdateSet {
            updates,
            client_ids,
        })
    }

    pub fn empty() -> Self {
        UpdateSet {
            updates: Vec::new(),
            client_ids: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.updates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    pub fn updates(&self) -> &[ModelParams] {
        &self.updates
    }

    pub fn client_ids(&self) -> &[usize] {
        &self.client_ids
    }

    /// The subset at the given positions, preserving order.
    pub fn filtered(&self, positions: &[usize]) -> UpdateSet {
        UpdateSet {
            updates: positions.iter().map(|&p| self.updates[p].clone()).collect(),
            client_ids: positions.iter().map(|&p| self.client_ids[p]).collect(),
        }
    }
}

fn uniform_mean(updates: &[ModelParams]) -> ModelParams {
    let mut mean = updates[0].clone();
    mean.values_mut().iter_mut().for_each(|v| *v = 0.0);
    for update in updates {
        for (m, v) in mean.values_mut().iter_mut().zip(update.values()) {
            *m += v;
        }
    }
    let n = updates.len() as f64;
    mean.values_mut().iter_mut().for_each(|v| *v /= n);
    mean
}

/// Element-wise arithmetic mean with uniform weights.
pub fn fedavg(updates: &UpdateSet) -> Result<ModelParams> {
    if updates.is_empty() {
        return Err(Error::invalid_argument("fedavg requires at least one update"));
    }
    Ok(uniform_mean(updates.updates()))
}

/// Krum selection result: the chosen update and every candidate's score.
#[derive(Debug, Clone)]
pub struct KrumOutcome {
    pub selected: ModelParams,
    pub selected_id: usize,
    pub scores: Vec<f64>,
}

/// Krum: score each update by the sum of squared Euclidean distances to its
/// `n - byzantine_count - 2` nearest other updates; select the update with
/// the minimal score (lowest client id on ties).
#[allow(clippy::needless_range_loop)] // pairwise matrix reads best with indices
pub fn krum(updates: &UpdateSet, byzantine_count: usize) -> Result<KrumOutcome> {
    let n = updates.len();
    let required = byzantine_count + 3;
    if n < required {
        return Err(Error::invalid_argument(format!(
            "krum with byzantine_count {byzantine_count} needs at least {required} updates, got {n}"
        )));
    }
    let neighbor_count = n - byzantine_count - 2;

    // Symmetric pairwise squared distances.
    let mut dist2 = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = updates.updates()[i]
                .values()
                .iter()
                .zip(updates.updates()[j].values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dist2[i][j] = d;
            dist2[j][i] = d;
        }
    }

    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist2[i][j]).collect();
        others.sort_by(|a, b| a.partial_cmp(b).unwrap());
        scores.push(others[..neighbor_count].iter().sum());
    }

    let mut best = 0;
    for i in 1..n {
        let better = scores[i] < scores[best]
            || (scores[i] == scores[best]
                && updates.client_ids()[i] < updates.client_ids()[best]);
        if better {
            best = i;
        }
    }
    Ok(KrumOutcome {
        selected: updates.updates()[best].clone(),
        selected_id: updates.client_ids()[best],
        scores,
    })
}

/// Mean of the verified updates; an empty verified set keeps the fallback
/// (the current global model) unchanged.
pub fn mean_of_verified(verified: &UpdateSet, fallback: &ModelParams) -> Result<ModelParams> {
    if let Some(first) = verified.updates().first() {
        if first.architecture() != fallback.architecture() {
            return Err(Error::invalid_argument(
                "verified updates do not match the fallback architecture",
            ));
        }
        Ok(uniform_mean(verified.updates()))
    } else {
        Ok(fallback.clone())
    }
}
