//! Checks against the official MNIST IDX files.
//!
//! These run only when the files are present (see `scripts/fetch_mnist.sh`);
//! point `FEDSIM_DATA_DIR` at the directory holding them. Without the files
//! the tests print a skip notice and pass, so default CI stays hermetic.

use std::path::PathBuf;

use fedsim_core::datasets::{dataset_from_idx, parse_idx_images, parse_idx_labels};

fn data_file(name: &str) -> Option<Vec<u8>> {
    let dir = std::env::var_os("FEDSIM_DATA_DIR").map(PathBuf::from)?;
    std::fs::read(dir.join(name)).ok()
}

#[test]
fn official_train_images_decode() {
    let Some(raw) = data_file("train-images-idx3-ubyte") else {
        eprintln!("skipping: set FEDSIM_DATA_DIR to a directory with the MNIST files");
        return;
    };
    let images = parse_idx_images(&raw).unwrap();
    assert_eq!(images.count(), 60_000);
    assert_eq!(images.rows(), 28);
    assert_eq!(images.cols(), 28);

    // Independent byte-level reference: image 0 occupies bytes 16..16+784 of
    // the raw file; its pixel sum must match the parsed view exactly.
    let reference_sum: u64 = raw[16..16 + 784].iter().map(|&b| u64::from(b)).sum();
    let parsed_sum: u64 = images.image(0).iter().map(|&b| u64::from(b)).sum();
    assert_eq!(parsed_sum, reference_sum);
    assert!(reference_sum > 0, "first digit is not blank");
}

#[test]
fn official_train_labels_histogram() {
    let Some(raw) = data_file("train-labels-idx1-ubyte") else {
        eprintln!("skipping: set FEDSIM_DATA_DIR to a directory with the MNIST files");
        return;
    };
    let labels = parse_idx_labels(&raw, 10).unwrap();
    assert_eq!(labels.len(), 60_000);

    // Independent reference: histogram computed straight off the raw bytes
    // (payload starts at offset 8).
    let mut reference = [0usize; 10];
    for &b in &raw[8..] {
        reference[b as usize] += 1;
    }
    let mut observed = [0usize; 10];
    for &l in &labels {
        observed[l as usize] += 1;
    }
    assert_eq!(observed, reference);
    // Every digit class is represented in the training set.
    assert!(reference.iter().all(|&count| count > 5000));
}

#[test]
fn train_set_loads_as_dataset() {
    let (Some(images_raw), Some(labels_raw)) = (
        data_file("train-images-idx3-ubyte"),
        data_file("train-labels-idx1-ubyte"),
    ) else {
        eprintln!("skipping: set FEDSIM_DATA_DIR to a directory with the MNIST files");
        return;
    };
    let images = parse_idx_images(&images_raw).unwrap();
    let labels = parse_idx_labels(&labels_raw, 10).unwrap();
    let dataset = dataset_from_idx(&images, &labels, 10).unwrap();
    assert_eq!(dataset.len(), 60_000);
    assert_eq!(dataset.n_features(), 784);
    assert!(dataset.features().iter().all(|&v| (0.0..=1.0).contains(&v)));
}
