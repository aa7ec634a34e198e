//! Data loading, synthetic data generation, and non-IID partitioning.
//!
//! Real image data comes from IDX files (the MNIST/FashionMNIST container
//! format, big-endian). Synthetic data is Gaussian blobs, one per class, for
//! desk-scale runs that need no external files. Samples are spread across
//! clients class-by-class with a Dirichlet draw, the standard way to simulate
//! heterogeneous federated data.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Dirichlet, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeding;

/// Magic number of an IDX3 image file.
pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
/// Magic number of an IDX1 label file.
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// A labeled classification dataset.
///
/// Features are row-major `n_samples x n_features`; image pixels are
/// normalized to `[0, 1]` (byte / 255, no further standardization). Labels
/// are class indices in `[0, n_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    /// Build a dataset, checking the shape/label/finiteness invariants.
    pub fn new(features: Array2<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::invalid_argument("n_classes must be positive"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::invalid_argument(format!(
                "feature rows ({}) do not match label count ({})",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(Error::LabelRange {
                index,
                value: value as u8,
                n_classes,
            });
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid_argument("features contain non-finite values"));
        }
        Ok(Dataset {
            features,
            labels,
            n_classes,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Materialize the sub-dataset at the given sample indices, in order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Array2::zeros((indices.len(), self.n_features()));
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &idx) in indices.iter().enumerate() {
            if idx >= self.len() {
                return Err(Error::invalid_argument(format!(
                    "sample index {idx} out of range for dataset of {} samples",
                    self.len()
                )));
            }
            features.row_mut(row).assign(&self.features.row(idx));
            labels.push(self.labels[idx]);
        }
        Ok(Dataset {
            features,
            labels,
            n_classes: self.n_classes,
        })
    }

    /// Sample indices grouped by class, ascending within each class.
    pub fn per_class_indices(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.n_classes];
        for (i, &label) in self.labels.iter().enumerate() {
            by_class[label].push(i);
        }
        by_class
    }
}

/// Raw images decoded from an IDX3 file; pixel bytes preserved exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    count: usize,
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Pixel bytes of image `i`, row-major.
    pub fn image(&self, i: usize) -> &[u8] {
        let px = self.rows * self.cols;
        &self.data[i * px..(i + 1) * px]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }
}

fn read_be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ])
}

/// Decode an IDX3 image file: big-endian magic `0x00000803`, three big-endian
/// 32-bit dimensions (count, rows, cols), then `count*rows*cols` pixel bytes.
pub fn parse_idx_images(raw_bytes: &[u8]) -> Result<IdxImages> {
    if raw_bytes.len() < 16 {
        return Err(Error::IdxLength {
            expected: 16,
            found: raw_bytes.len(),
        });
    }
    let magic = read_be_u32(raw_bytes, 0);
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::IdxMagic {
            expected: IDX_IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = read_be_u32(raw_bytes, 4) as usize;
    let rows = read_be_u32(raw_bytes, 8) as usize;
    let cols = read_be_u32(raw_bytes, 12) as usize;
    let expected = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::invalid_argument("IDX dimensions overflow"))?;
    let payload = &raw_bytes[16..];
    if payload.len() != expected {
        return Err(Error::IdxLength {
            expected,
            found: payload.len(),
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        data: payload.to_vec(),
    })
}

/// Decode an IDX1 label file and check every label against `n_classes`.
pub fn parse_idx_labels(raw_bytes: &[u8], n_classes: usize) -> Result<Vec<u8>> {
    if raw_bytes.len() < 8 {
        return Err(Error::IdxLength {
            expected: 8,
            found: raw_bytes.len(),
        });
    }
    let magic = read_be_u32(raw_bytes, 0);
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::IdxMagic {
            expected: IDX_LABEL_MAGIC,
            found: magic,
        });
    }
    let count = read_be_u32(raw_bytes, 4) as usize;
    let payload = &raw_bytes[8..];
    if payload.len() != count {
        return Err(Error::IdxLength {
            expected: count,
            found: payload.len(),
        });
    }
    for (index, &value) in payload.iter().enumerate() {
        if (value as usize) >= n_classes {
            return Err(Error::LabelRange {
                index,
                value,
                n_classes,
            });
        }
    }
    Ok(payload.to_vec())
}

/// Re-encode images to IDX3 bytes; inverse of [`parse_idx_images`].
pub fn write_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.data.len());
    out.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.count as u32).to_be_bytes());
    out.extend_from_slice(&(images.rows as u32).to_be_bytes());
    out.extend_from_slice(&(images.cols as u32).to_be_bytes());
    out.extend_from_slice(&images.data);
    out
}

/// Re-encode labels to IDX1 bytes; inverse of [`parse_idx_labels`].
pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Combine parsed IDX images and labels into a [`Dataset`], flattening each
/// image to a row and scaling pixels to `[0, 1]` by dividing by 255.
pub fn dataset_from_idx(images: &IdxImages, labels: &[u8], n_classes: usize) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::invalid_argument(format!(
            "image count ({}) does not match label count ({})",
            images.count,
            labels.len()
        )));
    }
    let width = images.rows * images.cols;
    let features = Array2::from_shape_fn((images.count, width), |(i, j)| {
        f64::from(images.data[i * width + j]) / 255.0
    });
    let labels = labels.iter().map(|&l| l as usize).collect();
    Dataset::new(features, labels, n_classes)
}

/// Generate Gaussian blobs: class `c` is centered at `separation` times a
/// unit direction vector derived deterministically from `c` alone, with
/// unit-variance noise. Samples are emitted class by class.
pub fn generate_synthetic(
    n_classes: usize,
    per_class: usize,
    n_features: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_classes == 0 || per_class == 0 || n_features == 0 {
        return Err(Error::invalid_argument(
            "n_classes, per_class, and n_features must be positive",
        ));
    }
    if separation.is_nan() || separation <= 0.0 {
        return Err(Error::invalid_argument("separation must be > 0"));
    }
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|c| class_center(c, n_features, separation))
        .collect();

    let n = n_classes * per_class;
    let mut rng = seeding::rng(seed);
    let mut features = Array2::zeros((n, n_features));
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for s in 0..per_class {
            let row = c * per_class + s;
            for (j, &cj) in center.iter().enumerate() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                features[[row, j]] = cj + noise;
            }
            labels.push(c);
        }
    }
    Dataset::new(features, labels, n_classes)
}

/// Deterministic class center: a unit vector from a class-keyed stream,
/// scaled by `separation`. Independent of the dataset seed so repeated
/// generations share geometry.
pub fn class_center(class: usize, n_features: usize, separation: f64) -> Vec<f64> {
    let mut rng = seeding::rng(seeding::derive(0xB10B_5EED, class as u64));
    let raw: Vec<f64> = (0..n_features)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    raw.iter().map(|v| separation * v / norm).collect()
}

/// Assignment of sample indices to clients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    client_indices: Vec<Vec<usize>>,
}

impl Partition {
    pub fn client_indices(&self) -> &[Vec<usize>] {
        &self.client_indices
    }

    pub fn n_clients(&self) -> usize {
        self.client_indices.len()
    }

    pub fn client(&self, id: usize) -> &[usize] {
        &self.client_indices[id]
    }
}

/// Split `total` samples across clients by largest-remainder rounding of the
/// given weights. Ties on the fractional remainder go to the lowest client id.
pub fn largest_remainder_counts(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // Stable sort keeps the lowest client id first among equal remainders.
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap()
    });
    for &client in order.iter().take(total - assigned) {
        counts[client] += 1;
    }
    counts
}

/// Partition samples across clients non-IID: for each class, one
/// `Dirichlet(alpha, ..., alpha)` draw over clients allocates that class's
/// samples proportionally (largest-remainder rounding). Clients left with no
/// samples are repaired by moving one sample from the largest client.
pub fn dirichlet_partition(
    per_class: &[Vec<usize>],
    n_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<Partition> {
    if n_clients == 0 {
        return Err(Error::invalid_argument("n_clients must be >= 1"));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::invalid_argument("alpha must be > 0"));
    }
    let total: usize = per_class.iter().map(|c| c.len()).sum();
    if total < n_clients {
        return Err(Error::invalid_argument(format!(
            "cannot give each of {n_clients} clients a sample from only {total}"
        )));
    }

    let mut rng = seeding::rng(seed);
    let mut client_indices = vec![Vec::new(); n_clients];
    for class_samples in per_class {
        if class_samples.is_empty() {
            continue;
        }
        let weights = sample_dirichlet(&mut rng, alpha, n_clients);
        let counts = largest_remainder_counts(&weights, class_samples.len());
        let mut cursor = 0;
        for (client, &count) in counts.iter().enumerate() {
            client_indices[client].extend_from_slice(&class_samples[cursor..cursor + count]);
            cursor += count;
        }
    }
    repair_empty_clients(&mut client_indices);
    Ok(Partition { client_indices })
}

/// One Dirichlet(alpha, ..., alpha) draw over `n` bins.
///
/// With a single bin the distribution is degenerate at 1; `rand_distr`
/// rejects that case, so it is handled directly.
pub fn sample_dirichlet(rng: &mut rand_chacha::ChaCha8Rng, alpha: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let dist = Dirichlet::new(&vec![alpha; n]).expect("alpha checked positive");
    dist.sample(rng)
}

/// Give every empty client one sample, taken from the lowest-id largest
/// client (its lowest sample index first).
fn repair_empty_clients(client_indices: &mut [Vec<usize>]) {
    for empty in 0..client_indices.len() {
        if !client_indices[empty].is_empty() {
            continue;
        }
        let donor = (0..client_indices.len())
            .max_by(|&a, &b| {
                client_indices[a]
                    .len()
                    .cmp(&client_indices[b].len())
                    // max_by keeps the later of equals; reverse the id order
                    // so the lowest-id largest client wins.
                    .then(b.cmp(&a))
            })
            .expect("at least one client");
        let (min_pos, _) = client_indices[donor]
            .iter()
            .enumerate()
            .min_by_key(|&(_, &v)| v)
            .expect("donor non-empty");
        let sample = client_indices[donor].remove(min_pos);
        client_indices[empty].push(sample);
    }
}

/// Draw `n` samples without replacement into a validation set; the remainder
/// keeps the rest. Both halves preserve ascending parent order.
pub fn split_validation(dataset: &Dataset, n: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if n == 0 || n >= dataset.len() {
        return Err(Error::invalid_argument(format!(
            "validation size must satisfy 0 < n < {} (got {n})",
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut seeding::rng(seed));
    let mut validation: Vec<usize> = order[..n].to_vec();
    let mut remainder: Vec<usize> = order[n..].to_vec();
    validation.sort_unstable();
    remainder.sort_unstable();
    Ok((dataset.subset(&validation)?, dataset.subset(&remainder)?))
}
