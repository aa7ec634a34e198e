//! Round orchestration: broadcast, parallel client updates, verification and
//! payment, aggregation, and metrics capture.
//!
//! Every round, all clients train locally from the broadcast global model
//! (full participation, no sampling). The configured strategy then produces
//! the next global model: FedAvg averages everything, Krum selects one
//! update, and the mechanism verifies each update against the private
//! validation set, pays the verified ones, and averages only those — keeping
//! the current model when nothing verifies.
//!
//! Client training within a round may run on any number of worker threads;
//! per-client round seeds are derived by a stable mixing function of
//! (master seed, client id, round), so results never depend on scheduling.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{self, ClientProfile, ClientType};
use crate::aggregators::{self, UpdateSet};
use crate::datasets::{self, Dataset};
use crate::error::{Error, Result};
use crate::mechanism::{self, Ledger, MechanismParams, VerificationOutcome};
use crate::model::{self, Architecture, ModelParams};
use crate::seeding;

/// Environment variable holding the directory IDX paths resolve against.
pub const DATA_DIR_ENV: &str = "FEDSIM_DATA_DIR";

/// Aggregation strategy for the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationStrategy {
    #[serde(rename = "fedavg")]
    FedAvg,
    Krum,
    Mechanism,
}

impl AggregationStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationStrategy::FedAvg => "fedavg",
            AggregationStrategy::Krum => "krum",
            AggregationStrategy::Mechanism => "mechanism",
        }
    }
}

impl std::str::FromStr for AggregationStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fedavg" => Ok(AggregationStrategy::FedAvg),
            "krum" => Ok(AggregationStrategy::Krum),
            "mechanism" => Ok(AggregationStrategy::Mechanism),
            other => Err(Error::config(format!(
                "unknown strategy '{other}' (expected fedavg, krum, or mechanism)"
            ))),
        }
    }
}

fn default_idx_train_images() -> PathBuf {
    PathBuf::from("train-images-idx3-ubyte")
}
fn default_idx_train_labels() -> PathBuf {
    PathBuf::from("train-labels-idx1-ubyte")
}
fn default_idx_test_images() -> PathBuf {
    PathBuf::from("t10k-images-idx3-ubyte")
}
fn default_idx_test_labels() -> PathBuf {
    PathBuf::from("t10k-labels-idx1-ubyte")
}
fn default_n_classes() -> usize {
    10
}
fn default_train_per_class() -> usize {
    100
}
fn default_test_per_class() -> usize {
    50
}
fn default_n_features() -> usize {
    16
}
fn default_separation() -> f64 {
    6.0
}

/// Where samples come from: IDX files on disk or generated Gaussian blobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// IDX image/label files. Relative paths resolve against the
    /// `FEDSIM_DATA_DIR` environment variable when it is set.
    Idx {
        #[serde(default = "default_idx_train_images")]
        train_images: PathBuf,
        #[serde(default = "default_idx_train_labels")]
        train_labels: PathBuf,
        #[serde(default = "default_idx_test_images")]
        test_images: PathBuf,
        #[serde(default = "default_idx_test_labels")]
        test_labels: PathBuf,
        #[serde(default = "default_n_classes")]
        n_classes: usize,
    },
    /// Deterministic Gaussian blobs; no files needed.
    Synthetic {
        #[serde(default = "default_n_classes")]
        n_classes: usize,
        #[serde(default = "default_train_per_class")]
        train_per_class: usize,
        #[serde(default = "default_test_per_class")]
        test_per_class: usize,
        #[serde(default = "default_n_features")]
        n_features: usize,
        #[serde(default = "default_separation")]
        separation: f64,
    },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Idx {
            train_images: default_idx_train_images(),
            train_labels: default_idx_train_labels(),
            test_images: default_idx_test_images(),
            test_labels: default_idx_test_labels(),
            n_classes: default_n_classes(),
        }
    }
}

impl DatasetConfig {
    pub fn n_classes(&self) -> usize {
        match self {
            DatasetConfig::Idx { n_classes, .. } => *n_classes,
            DatasetConfig::Synthetic { n_classes, .. } => *n_classes,
        }
    }
}

fn default_n_clients() -> usize {
    100
}
fn default_rounds() -> usize {
    40
}
fn default_local_epochs() -> usize {
    3
}
fn default_batch_size() -> usize {
    32
}
fn default_learning_rate() -> f64 {
    0.01
}
fn default_partition_alpha() -> f64 {
    0.5
}
fn default_flip_offset() -> usize {
    1
}
fn default_strategy() -> AggregationStrategy {
    AggregationStrategy::Mechanism
}
fn default_validation_size() -> usize {
    200
}
fn default_hidden_layers() -> Vec<usize> {
    vec![64]
}
fn default_seed() -> u64 {
    42
}

/// Full experiment description. Unset fields take the reference defaults:
/// 100 clients, 40 rounds, 3 local epochs, batch 32, learning rate 0.01,
/// Dirichlet alpha 0.5, reward 10, cost 2, threshold 2.5, 200 validation
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default = "default_n_clients")]
    pub n_clients: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_local_epochs")]
    pub local_epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_partition_alpha")]
    pub partition_alpha: f64,
    /// Fraction of clients that poison their data.
    #[serde(default)]
    pub malicious_fraction: f64,
    /// Label-flip offset `k` in `y' = (y + k) mod n_classes`.
    #[serde(default = "default_flip_offset")]
    pub flip_offset: usize,
    #[serde(default = "default_strategy")]
    pub strategy: AggregationStrategy,
    #[serde(default)]
    pub mechanism: MechanismParams,
    /// Permits `reward <= cost` for what-if runs that break individual
    /// rationality on purpose.
    #[serde(default)]
    pub allow_reward_below_cost: bool,
    #[serde(default = "default_validation_size")]
    pub validation_size: usize,
    /// Hidden layer sizes; input and output widths come from the dataset.
    #[serde(default = "default_hidden_layers")]
    pub hidden_layers: Vec<usize>,
    /// Master seed for model init and per-client round seeds.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Seed for data generation, partitioning, type assignment, and the
    /// validation split. Defaults to `seed`; comparison grids keep it fixed
    /// so every strategy faces identical data and adversaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_seed: Option<u64>,
    /// Write the final global model in the flat checkpoint format.
    #[serde(default)]
    pub checkpoint: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetConfig::default(),
            n_clients: default_n_clients(),
            rounds: default_rounds(),
            local_epochs: default_local_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            partition_alpha: default_partition_alpha(),
            malicious_fraction: 0.0,
            flip_offset: default_flip_offset(),
            strategy: default_strategy(),
            mechanism: MechanismParams::default(),
            allow_reward_below_cost: false,
            validation_size: default_validation_size(),
            hidden_layers: default_hidden_layers(),
            seed: default_seed(),
            partition_seed: None,
            checkpoint: false,
        }
    }
}

impl ExperimentConfig {
    /// Seed governing data layout (generation, partition, types, validation
    /// split); falls back to the master seed.
    pub fn partition_seed(&self) -> u64 {
        self.partition_seed.unwrap_or(self.seed)
    }

    /// Byzantine count handed to Krum: `round(f * N)`, the same prior the
    /// mechanism's analysis uses.
    pub fn byzantine_count(&self) -> usize {
        (self.malicious_fraction * self.n_clients as f64).round() as usize
    }

    /// Check every field constraint, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let positive = |value: usize, key: &str| {
            if value == 0 {
                Err(Error::config(format!("{key} must be positive")))
            } else {
                Ok(())
            }
        };
        positive(self.n_clients, "n_clients")?;
        positive(self.rounds, "rounds")?;
        positive(self.local_epochs, "local_epochs")?;
        positive(self.batch_size, "batch_size")?;
        positive(self.validation_size, "validation_size")?;
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::config("learning_rate must be > 0"));
        }
        if self.partition_alpha.is_nan() || self.partition_alpha <= 0.0 {
            return Err(Error::config("partition_alpha must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.malicious_fraction) {
            return Err(Error::config(format!(
                "malicious_fraction must be in [0, 1], got {}",
                self.malicious_fraction
            )));
        }
        let n_classes = self.dataset.n_classes();
        if n_classes < 2 {
            return Err(Error::config("dataset.n_classes must be at least 2"));
        }
        if self.flip_offset == 0 || self.flip_offset >= n_classes {
            return Err(Error::config(format!(
                "flip_offset must satisfy 1 <= k < n_classes ({}), got {}",
                n_classes, self.flip_offset
            )));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::config("hidden_layers entries must be positive"));
        }
        if self.mechanism.reward.is_nan() || self.mechanism.reward <= 0.0 {
            return Err(Error::config("mechanism.reward must be > 0"));
        }
        if self.mechanism.cost.is_nan() || self.mechanism.cost < 0.0 {
            return Err(Error::config("mechanism.cost must be >= 0"));
        }
        if self.mechanism.threshold.is_nan() {
            return Err(Error::config("mechanism.threshold must not be NaN"));
        }
        if self.mechanism.reward <= self.mechanism.cost && !self.allow_reward_below_cost {
            return Err(Error::config(format!(
                "mechanism.reward ({}) must exceed mechanism.cost ({}) for honest \
                 participation to be rational; set allow_reward_below_cost = true \
                 to run anyway",
                self.mechanism.reward, self.mechanism.cost
            )));
        }
        match &self.dataset {
            DatasetConfig::Synthetic {
                train_per_class,
                test_per_class,
                n_features,
                separation,
                ..
            } => {
                positive(*train_per_class, "dataset.train_per_class")?;
                positive(*test_per_class, "dataset.test_per_class")?;
                positive(*n_features, "dataset.n_features")?;
                if separation.is_nan() || *separation <= 0.0 {
                    return Err(Error::config("dataset.separation must be > 0"));
                }
                let test_total = n_classes * *test_per_class;
                if self.validation_size >= test_total {
                    return Err(Error::config(format!(
                        "validation_size ({}) must be smaller than the test pool ({test_total})",
                        self.validation_size
                    )));
                }
            }
            DatasetConfig::Idx { .. } => {}
        }
        Ok(())
    }
}

/// Resolve an IDX path against `FEDSIM_DATA_DIR` when set and the path is
/// relative.
fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => PathBuf::from(dir).join(path),
        None => path.to_path_buf(),
    }
}

fn load_idx_dataset(images: &Path, labels: &Path, n_classes: usize) -> Result<Dataset> {
    let images_path = resolve_data_path(images);
    let labels_path = resolve_data_path(labels);
    let image_bytes =
        std::fs::read(&images_path).map_err(|e| Error::io(images_path.clone(), e))?;
    let label_bytes =
        std::fs::read(&labels_path).map_err(|e| Error::io(labels_path.clone(), e))?;
    let parsed_images = datasets::parse_idx_images(&image_bytes)?;
    let parsed_labels = datasets::parse_idx_labels(&label_bytes, n_classes)?;
    datasets::dataset_from_idx(&parsed_images, &parsed_labels, n_classes)
}

/// Everything a run needs, materialized once: client shards (poisoned for
/// malicious clients), the private validation set, and the held-out test
/// pool (test data minus the validation set).
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    config: ExperimentConfig,
    clients: Vec<ClientProfile>,
    client_data: Vec<Dataset>,
    validation: Dataset,
    test_pool: Dataset,
    architecture: Architecture,
}

impl PreparedExperiment {
    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn clients(&self) -> &[ClientProfile] {
        &self.clients
    }

    pub fn client_data(&self) -> &[Dataset] {
        &self.client_data
    }

    pub fn validation(&self) -> &Dataset {
        &self.validation
    }

    pub fn test_pool(&self) -> &Dataset {
        &self.test_pool
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn client_types(&self) -> Vec<ClientType> {
        self.clients.iter().map(|c| c.client_type).collect()
    }

    /// The round-0 global model.
    pub fn initial_model(&self) -> ModelParams {
        model::init_params(
            &self.architecture,
            seeding::derive(self.config.seed, seeding::STREAM_INIT),
        )
    }

    /// Train every client from the broadcast model, in parallel. The outcome
    /// is identical for any worker count: each client's seed depends only on
    /// (master seed, client id, round).
    pub fn compute_updates(&self, global: &ModelParams, round_index: usize) -> Result<UpdateSet> {
        let updates: Vec<ModelParams> = self
            .clients
            .par_iter()
            .map(|client| {
                let seed =
                    seeding::client_round_seed(self.config.seed, client.id as u64, round_index as u64);
                model::local_train(
                    global,
                    &self.client_data[client.id],
                    self.config.local_epochs,
                    self.config.batch_size,
                    self.config.learning_rate,
                    seed,
                )
            })
            .collect::<Result<_>>()?;
        let ids = self.clients.iter().map(|c| c.id).collect();
        UpdateSet::new(updates, ids)
    }
}

/// Build shards, types, the validation split, and client profiles from the
/// config. Fails before any round runs if dataset files are missing.
pub fn prepare(config: &ExperimentConfig) -> Result<PreparedExperiment> {
    config.validate()?;
    let partition_seed = config.partition_seed();
    let (train, test) = match &config.dataset {
        DatasetConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            n_classes,
        } => {
            let train = load_idx_dataset(train_images, train_labels, *n_classes)?;
            let test = load_idx_dataset(test_images, test_labels, *n_classes)?;
            (train, test)
        }
        DatasetConfig::Synthetic {
            n_classes,
            train_per_class,
            test_per_class,
            n_features,
            separation,
        } => {
            let train = datasets::generate_synthetic(
                *n_classes,
                *train_per_class,
                *n_features,
                *separation,
                seeding::derive(partition_seed, seeding::STREAM_SYNTH_TRAIN),
            )?;
            let test = datasets::generate_synthetic(
                *n_classes,
                *test_per_class,
                *n_features,
                *separation,
                seeding::derive(partition_seed, seeding::STREAM_SYNTH_TEST),
            )?;
            (train, test)
        }
    };

    // The private validation set comes out of the test pool, so it can never
    // overlap any client's training data; accuracy is reported on the rest.
    let (validation, test_pool) = datasets::split_validation(
        &test,
        config.validation_size,
        seeding::derive(partition_seed, seeding::STREAM_VALIDATION),
    )?;

    let partition = datasets::dirichlet_partition(
        &train.per_class_indices(),
        config.n_clients,
        config.partition_alpha,
        partition_seed,
    )?;
    let types = adversary::assign_types(
        config.n_clients,
        config.malicious_fraction,
        seeding::derive(partition_seed, seeding::STREAM_TYPES),
    )?;

    let mut clients = Vec::with_capacity(config.n_clients);
    let mut client_data = Vec::with_capacity(config.n_clients);
    for (id, client_type) in types.into_iter().enumerate() {
        let shard = partition.client(id).to_vec();
        let shard_data = train.subset(&shard)?;
        // Poisoning is applied once: a malicious client's whole shard view
        // is label-flipped for every round.
        let shard_data = if client_type.is_malicious() {
            adversary::flip_labels(&shard_data, config.flip_offset)?
        } else {
            shard_data
        };
        clients.push(ClientProfile::new(
            id,
            client_type,
            shard,
            config.mechanism.cost,
        )?);
        client_data.push(shard_data);
    }

    let mut layer_sizes = Vec::with_capacity(config.hidden_layers.len() + 2);
    layer_sizes.push(train.n_features());
    layer_sizes.extend_from_slice(&config.hidden_layers);
    layer_sizes.push(train.n_classes());
    let architecture = Architecture::new(layer_sizes)?;

    Ok(PreparedExperiment {
        config: config.clone(),
        clients,
        client_data,
        validation,
        test_pool,
        architecture,
    })
}

/// Everything recorded about one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Global model metrics on the held-out test pool, after aggregation.
    pub test_loss: f64,
    pub test_accuracy: f64,
    /// Per-client verification outcomes; empty for FedAvg/Krum rounds.
    pub outcomes: Vec<VerificationOutcome>,
    /// The client Krum selected; `None` for other strategies.
    pub selected_client: Option<usize>,
    pub n_verified_honest: usize,
    pub n_verified_malicious: usize,
    /// Mean of (payment - cost) over honest clients this round; 0 when the
    /// strategy pays nobody or no honest client exists.
    pub mean_honest_utility: f64,
    /// Cumulative server expenditure through this round.
    pub server_expenditure: f64,
}

impl RoundRecord {
    pub fn n_verified(&self) -> usize {
        self.n_verified_honest + self.n_verified_malicious
    }
}

/// One synchronous round: local training for every client, then the
/// strategy branch. Returns the next global model, the ledger advanced by
/// one round for mechanism runs, and the round record (test metrics are
/// filled in by the caller).
pub fn run_round(
    prepared: &PreparedExperiment,
    global: &ModelParams,
    ledger: Option<&Ledger>,
    round_index: usize,
) -> Result<(ModelParams, Option<Ledger>, RoundRecord)> {
    let config = prepared.config();
    let updates = prepared.compute_updates(global, round_index)?;
    let types: Vec<ClientType> = prepared.client_types();

    let mut record = RoundRecord {
        round: round_index,
        test_loss: f64::NAN,
        test_accuracy: f64::NAN,
        outcomes: Vec::new(),
        selected_client: None,
        n_verified_honest: 0,
        n_verified_malicious: 0,
        mean_honest_utility: 0.0,
        server_expenditure: ledger.map_or(0.0, Ledger::server_expenditure),
    };

    let (next_global, next_ledger) = match config.strategy {
        AggregationStrategy::FedAvg => (aggregators::fedavg(&updates)?, None),
        AggregationStrategy::Krum => {
            let outcome = aggregators::krum(&updates, config.byzantine_count())?;
            record.selected_client = Some(outcome.selected_id);
            (outcome.selected, None)
        }
        AggregationStrategy::Mechanism => {
            let ledger = ledger.ok_or_else(|| {
                Error::invalid_argument("mechanism rounds need the run's ledger")
            })?;
            let mut outcomes = Vec::with_capacity(updates.len());
            for (update, &client_id) in updates.updates().iter().zip(updates.client_ids()) {
                outcomes.push(mechanism::verify_and_pay(
                    update,
                    prepared.validation(),
                    &config.mechanism,
                    client_id,
                )?);
            }
            let verified_positions: Vec<usize> = outcomes
                .iter()
                .enumerate()
                .filter(|(_, o)| o.verified)
                .map(|(pos, _)| pos)
                .collect();
            let verified = updates.filtered(&verified_positions);
            let next_global = aggregators::mean_of_verified(&verified, global)?;

            let next_ledger =
                mechanism::ledger_append(ledger, &outcomes, &types, config.mechanism.cost)?;

            let mut honest_utility_sum = 0.0;
            let mut honest_count = 0usize;
            for outcome in &outcomes {
                let client_type = types[outcome.client_id];
                if outcome.verified {
                    match client_type {
                        ClientType::Benevolent => record.n_verified_honest += 1,
                        ClientType::Malicious => record.n_verified_malicious += 1,
                    }
                }
                if !client_type.is_malicious() {
                    honest_utility_sum += mechanism::round_utility(outcome, config.mechanism.cost);
                    honest_count += 1;
                }
            }
            if honest_count > 0 {
                record.mean_honest_utility = honest_utility_sum / honest_count as f64;
            }
            record.server_expenditure = next_ledger.server_expenditure();
            record.outcomes = outcomes;
            (next_global, Some(next_ledger))
        }
    };

    Ok((next_global, next_ledger, record))
}

/// A finished run: the per-round history, the final ledger (mechanism runs
/// only), the true client types, and the final global model.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<RoundRecord>,
    pub ledger: Option<Ledger>,
    pub client_types: Vec<ClientType>,
    pub final_model: ModelParams,
}

impl ExperimentResult {
    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("at least one round")
    }
}

/// Run the full experiment: prepare data, fold `rounds` rounds, and evaluate
/// the global model on the held-out test pool after each one.
/// Bit-reproducible for a fixed config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let prepared = prepare(config)?;
    let mut global = prepared.initial_model();
    let mut ledger = match config.strategy {
        AggregationStrategy::Mechanism => Some(Ledger::new(config.n_clients)),
        _ => None,
    };
    let mut records = Vec::with_capacity(config.rounds);
    for round_index in 0..config.rounds {
        let (next_global, next_ledger, mut record) =
            run_round(&prepared, &global, ledger.as_ref(), round_index)?;
        let test = model::evaluate(&next_global, prepared.test_pool())?;
        record.test_loss = test.mean_loss;
        record.test_accuracy = test.accuracy;
        global = next_global;
        ledger = next_ledger.or(ledger);
        records.push(record);
    }
    Ok(ExperimentResult {
        records,
        ledger,
        client_types: prepared.client_types(),
        final_model: global,
    })
}

/// One cell of the strategy/fraction comparison grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonCell {
    pub strategy: AggregationStrategy,
    pub malicious_fraction: f64,
    pub final_accuracy: f64,
}

/// Results of a comparison grid, plus per-strategy degradation
/// (accuracy at the smallest fraction minus accuracy at the largest).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub cells: Vec<ComparisonCell>,
    pub degradation: Vec<(AggregationStrategy, f64)>,
}

impl ComparisonTable {
    pub fn degradation_for(&self, strategy: AggregationStrategy) -> Option<f64> {
        self.degradation
            .iter()
            .find(|(s, _)| *s == strategy)
            .map(|(_, d)| *d)
    }

    pub fn accuracy_for(&self, strategy: AggregationStrategy, fraction: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.strategy == strategy && c.malicious_fraction == fraction)
            .map(|c| c.final_accuracy)
    }
}

/// Run the full (strategy, fraction) grid with shared data/partition/type
/// seeds, so every strategy faces identical adversaries.
pub fn compare_strategies(
    base_config: &ExperimentConfig,
    strategies: &[AggregationStrategy],
    f_values: &[f64],
) -> Result<ComparisonTable> {
    if strategies.is_empty() || f_values.is_empty() {
        return Err(Error::invalid_argument(
            "comparison needs at least one strategy and one fraction",
        ));
    }
    // Pin the data seed so a --seed override still shares layouts per run.
    let mut shared = base_config.clone();
    shared.partition_seed = Some(base_config.partition_seed());

    let mut cells = Vec::with_capacity(strategies.len() * f_values.len());
    for &strategy in strategies {
        for &fraction in f_values {
            let mut config = shared.clone();
            config.strategy = strategy;
            config.malicious_fraction = fraction;
            let result = run_experiment(&config)?;
            cells.push(ComparisonCell {
                strategy,
                malicious_fraction: fraction,
                final_accuracy: result.final_record().test_accuracy,
            });
        }
    }

    let min_f = f_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_f = f_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let degradation = strategies
        .iter()
        .map(|&strategy| {
            let at = |f: f64| {
                cells
                    .iter()
                    .find(|c| c.strategy == strategy && c.malicious_fraction == f)
                    .map(|c| c.final_accuracy)
                    .expect("cell exists for every (strategy, fraction)")
            };
            (strategy, at(min_f) - at(max_f))
        })
        .collect();

    Ok(ComparisonTable { cells, degradation })
}
