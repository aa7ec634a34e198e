//! Config parsing and CSV/JSON metric emission.
//!
//! Configs are TOML; unset fields take the reference defaults and unknown
//! keys are hard errors. Runs write four artifacts into the output
//! directory: `metrics.csv` (one row per round), `ledger.csv` (one row per
//! round and client), `summary.json` (final metrics plus the
//! rationality/deterrence analyzer results), and `manifest.json` (the fully
//! resolved config echo, artifact paths, wall-clock duration, and version).
//! Floats carry 17 significant digits so re-runs compare byte-for-byte;
//! figures are produced by external tools from these files.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::adversary::ClientType;
use crate::engine::{
    self, AggregationStrategy, ComparisonTable, ExperimentConfig, ExperimentResult, RoundRecord,
};
use crate::error::{Error, Result};
use crate::fmt;
use crate::mechanism::{self, ExpectedUtilities, IrCheck};

/// CLI-level overrides applied before validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rounds: Option<usize>,
}

const ROOT_KEYS: &[&str] = &[
    "dataset",
    "n_clients",
    "rounds",
    "local_epochs",
    "batch_size",
    "learning_rate",
    "partition_alpha",
    "malicious_fraction",
    "flip_offset",
    "strategy",
    "mechanism",
    "allow_reward_below_cost",
    "validation_size",
    "hidden_layers",
    "seed",
    "partition_seed",
    "checkpoint",
];
const MECHANISM_KEYS: &[&str] = &["reward", "cost", "threshold"];
const DATASET_IDX_KEYS: &[&str] = &[
    "kind",
    "train_images",
    "train_labels",
    "test_images",
    "test_labels",
    "n_classes",
];
const DATASET_SYNTHETIC_KEYS: &[&str] = &[
    "kind",
    "n_classes",
    "train_per_class",
    "test_per_class",
    "n_features",
    "separation",
];

fn check_keys(table: &toml::Table, allowed: &[&str], context: &str) -> Result<()> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::config(format!(
                "unknown key `{key}`{context}; allowed keys: {}",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

/// Reject unknown keys up front with messages that name the key; serde's
/// internally-tagged dataset enum cannot do this on its own.
fn check_unknown_keys(document: &toml::Table) -> Result<()> {
    check_keys(document, ROOT_KEYS, "")?;
    if let Some(value) = document.get("mechanism") {
        let table = value
            .as_table()
            .ok_or_else(|| Error::config("`mechanism` must be a table"))?;
        check_keys(table, MECHANISM_KEYS, " in [mechanism]")?;
    }
    if let Some(value) = document.get("dataset") {
        let table = value
            .as_table()
            .ok_or_else(|| Error::config("`dataset` must be a table"))?;
        let kind = table.get("kind").and_then(|k| k.as_str()).unwrap_or("idx");
        let allowed = match kind {
            "idx" => DATASET_IDX_KEYS,
            "synthetic" => DATASET_SYNTHETIC_KEYS,
            other => {
                return Err(Error::config(format!(
                    "unknown dataset kind `{other}` (expected idx or synthetic)"
                )))
            }
        };
        check_keys(table, allowed, " in [dataset]")?;
    }
    Ok(())
}

/// Parse a TOML config document; unspecified fields take the reference
/// defaults, unknown keys are hard errors. An empty document is the full
/// default config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with_overrides(text, &Overrides::default())
}

/// [`parse_config`] with CLI overrides applied before validation; the
/// partition seed is materialized so the echoed config is fully resolved.
pub fn parse_config_with_overrides(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let document: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
    check_unknown_keys(&document)?;
    let mut config: ExperimentConfig = document
        .try_into()
        .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(rounds) = overrides.rounds {
        config.rounds = rounds;
    }
    config.partition_seed = Some(config.partition_seed());
    config.validate()?;
    Ok(config)
}

/// Serialize a resolved config back to TOML; re-parsing the text yields an
/// identical config.
pub fn config_to_toml(config: &ExperimentConfig) -> Result<String> {
    toml::to_string_pretty(config).map_err(|e| Error::config(e.to_string()))
}

/// `metrics.csv`: one row per round.
pub fn write_metrics_csv<W: Write>(records: &[RoundRecord], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "round,test_loss,test_accuracy,n_verified,n_verified_honest,n_verified_malicious,\
         mean_honest_utility,server_expenditure"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.round,
            fmt::float(r.test_loss),
            fmt::float(r.test_accuracy),
            r.n_verified(),
            r.n_verified_honest,
            r.n_verified_malicious,
            fmt::float(r.mean_honest_utility),
            fmt::float(r.server_expenditure)
        )?;
    }
    Ok(())
}

/// Final metrics plus the analyzer outputs, serialized to `summary.json`.
/// Mechanism-specific fields are `null` for FedAvg/Krum runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub strategy: String,
    pub malicious_fraction: f64,
    pub rounds: usize,
    pub final_test_accuracy: f64,
    pub final_test_loss: f64,
    /// Mean honest per-round utility in the final round.
    pub final_mean_honest_utility: Option<f64>,
    /// Mean honest per-round utility over the whole run, from the ledger.
    pub realized_mean_honest_utility: Option<f64>,
    /// Total paid out by the server (the "revenue" column of the source
    /// tables is this quantity: money out, not in).
    pub server_expenditure: Option<f64>,
    pub pass_rate_honest: Option<f64>,
    pub pass_rate_malicious: Option<f64>,
    /// Individual-rationality check at the measured honest pass rate.
    pub ir: Option<IrCheck>,
    /// Closed-form expected utilities at the measured pass rates; the
    /// `poisoning_dominated` flag is the deterrence check.
    pub expected_utilities: Option<ExpectedUtilities>,
}

/// Build the run summary from a finished experiment.
pub fn summarize(config: &ExperimentConfig, result: &ExperimentResult) -> Result<RunSummary> {
    let last = result.final_record();
    let mut summary = RunSummary {
        strategy: config.strategy.as_str().to_string(),
        malicious_fraction: config.malicious_fraction,
        rounds: config.rounds,
        final_test_accuracy: last.test_accuracy,
        final_test_loss: last.test_loss,
        final_mean_honest_utility: None,
        realized_mean_honest_utility: None,
        server_expenditure: None,
        pass_rate_honest: None,
        pass_rate_malicious: None,
        ir: None,
        expected_utilities: None,
    };
    let Some(ledger) = result.ledger.as_ref() else {
        return Ok(summary);
    };

    summary.final_mean_honest_utility = Some(last.mean_honest_utility);
    summary.server_expenditure = Some(ledger.server_expenditure());

    let honest_ids: Vec<usize> = result
        .client_types
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.is_malicious())
        .map(|(id, _)| id)
        .collect();
    if !honest_ids.is_empty() && ledger.n_rounds() > 0 {
        let total: f64 = honest_ids
            .iter()
            .map(|&id| ledger.accounts()[id].utility())
            .sum();
        summary.realized_mean_honest_utility =
            Some(total / (honest_ids.len() * ledger.n_rounds()) as f64);
    }

    let rates = mechanism::empirical_pass_rates(ledger);
    summary.pass_rate_honest = rates.honest;
    summary.pass_rate_malicious = rates.malicious;
    if let Some(p_honest) = rates.honest {
        summary.ir = Some(mechanism::ir_holds(&config.mechanism, p_honest)?);
        if let Some(p_malicious) = rates.malicious {
            summary.expected_utilities = Some(mechanism::expected_utilities(
                &config.mechanism,
                p_honest,
                p_malicious,
            )?);
        }
    }
    Ok(summary)
}

/// Fully resolved run description written next to the artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub metrics_csv: PathBuf,
    pub ledger_csv: PathBuf,
    pub summary_json: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub duration_seconds: f64,
    pub version: String,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Run one experiment and write `metrics.csv`, `ledger.csv`,
/// `summary.json`, `config_resolved.toml`, and `manifest.json` into
/// `out_dir`. Re-running the same config overwrites with byte-identical
/// CSV bodies.
pub fn run_command(
    config_path: &Path,
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<RunManifest> {
    let started = Instant::now();
    let text =
        std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let config = parse_config_with_overrides(&text, overrides)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let result = engine::run_experiment(&config)?;

    let metrics_csv = out_dir.join("metrics.csv");
    let mut metrics = Vec::new();
    write_metrics_csv(&result.records, &mut metrics).expect("vec write");
    write_file(&metrics_csv, &metrics)?;

    let ledger_csv = out_dir.join("ledger.csv");
    let mut ledger_bytes = Vec::new();
    match result.ledger.as_ref() {
        Some(ledger) => ledger.write_csv(&mut ledger_bytes).expect("vec write"),
        // Baselines have no payments; the header keeps the schema stable.
        None => mechanism::Ledger::new(0)
            .write_csv(&mut ledger_bytes)
            .expect("vec write"),
    }
    write_file(&ledger_csv, &ledger_bytes)?;

    let summary_json = out_dir.join("summary.json");
    let summary = summarize(&config, &result)?;
    let summary_text =
        serde_json::to_string_pretty(&summary).map_err(|e| Error::config(e.to_string()))?;
    write_file(&summary_json, summary_text.as_bytes())?;

    write_file(
        &out_dir.join("config_resolved.toml"),
        config_to_toml(&config)?.as_bytes(),
    )?;

    let checkpoint = if config.checkpoint {
        let path = out_dir.join("model.bin");
        write_file(&path, &result.final_model.to_bytes())?;
        Some(path)
    } else {
        None
    };

    let manifest = RunManifest {
        config,
        metrics_csv,
        ledger_csv,
        summary_json,
        checkpoint,
        duration_seconds: started.elapsed().as_secs_f64(),
        version: crate::VERSION.to_string(),
    };
    let manifest_text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::config(e.to_string()))?;
    write_file(&out_dir.join("manifest.json"), manifest_text.as_bytes())?;
    Ok(manifest)
}

/// `comparison.csv`: one row per (strategy, fraction); the degradation cell
/// repeats each strategy's `accuracy@min f - accuracy@max f`.
pub fn write_comparison_csv<W: Write>(table: &ComparisonTable, mut w: W) -> std::io::Result<()> {
    writeln!(w, "strategy,malicious_fraction,final_accuracy,degradation")?;
    for cell in &table.cells {
        let degradation = table
            .degradation_for(cell.strategy)
            .expect("every strategy has a degradation entry");
        writeln!(
            w,
            "{},{},{},{}",
            cell.strategy.as_str(),
            fmt::float(cell.malicious_fraction),
            fmt::float(cell.final_accuracy),
            fmt::float(degradation)
        )?;
    }
    Ok(())
}

/// Run the (strategy, fraction) grid from a base config and write
/// `comparison.csv` into `out_dir`.
pub fn compare_command(
    config_path: &Path,
    strategies: &[AggregationStrategy],
    fractions: &[f64],
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<ComparisonTable> {
    let text =
        std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let config = parse_config_with_overrides(&text, overrides)?;
    for &fraction in fractions {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::config(format!(
                "fractions must be in [0, 1], got {fraction}"
            )));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let table = engine::compare_strategies(&config, strategies, fractions)?;
    let mut bytes = Vec::new();
    write_comparison_csv(&table, &mut bytes).expect("vec write");
    write_file(&out_dir.join("comparison.csv"), &bytes)?;
    Ok(table)
}

/// Count honest/malicious clients, for reporting.
pub fn type_counts(types: &[ClientType]) -> (usize, usize) {
    let malicious = types.iter().filter(|t| t.is_malicious()).count();
    (types.len() - malicious, malicious)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DatasetConfig;

    fn synthetic_toml() -> &'static str {
        r#"
            n_clients = 6
            rounds = 2
            local_epochs = 1
            batch_size = 16
            validation_size = 40

            [dataset]
            kind = "synthetic"
            n_classes = 4
            train_per_class = 30
            test_per_class = 25
            n_features = 6
            separation = 6.0
        "#
    }

    #[test]
    fn empty_document_is_the_reference_default() {
        let config = parse_config("").unwrap();
        assert_eq!(config.n_clients, 100);
        assert_eq!(config.rounds, 40);
        assert_eq!(config.local_epochs, 3);
        assert_eq!(config.batch_size, 32);
        assert_eq!(config.learning_rate, 0.01);
        assert_eq!(config.partition_alpha, 0.5);
        assert_eq!(config.mechanism.reward, 10.0);
        assert_eq!(config.mechanism.cost, 2.0);
        assert_eq!(config.mechanism.threshold, 2.5);
        assert_eq!(config.validation_size, 200);
        assert_eq!(config.strategy, AggregationStrategy::Mechanism);
        assert_eq!(config.flip_offset, 1);
        assert_eq!(config.hidden_layers, vec![64]);
        assert_eq!(config.dataset.n_classes(), 10);
        assert!(matches!(config.dataset, DatasetConfig::Idx { .. }));
    }

    #[test]
    fn out_of_range_fraction_is_rejected_with_range_message() {
        let err = parse_config("malicious_fraction = 1.5").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("malicious_fraction"), "{message}");
        assert!(message.contains("[0, 1]"), "{message}");
    }

    #[test]
    fn unknown_keys_are_hard_errors() {
        let err = parse_config("no_such_key = 3").unwrap_err().to_string();
        assert!(err.contains("no_such_key"), "{err}");

        let err = parse_config("[mechanism]\nrewardd = 10.0")
            .unwrap_err()
            .to_string();
        assert!(err.contains("rewardd"), "{err}");

        let err = parse_config("[dataset]\nkind = \"synthetic\"\nblobs = 3")
            .unwrap_err()
            .to_string();
        assert!(err.contains("blobs"), "{err}");

        let err = parse_config("[dataset]\nkind = \"parquet\"")
            .unwrap_err()
            .to_string();
        assert!(err.contains("parquet"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let config = parse_config(synthetic_toml()).unwrap();
        let echoed = config_to_toml(&config).unwrap();
        let reparsed = parse_config(&echoed).unwrap();
        assert_eq!(config, reparsed);
    }

    #[test]
    fn overrides_apply_before_partition_seed_resolution() {
        let overrides = Overrides {
            seed: Some(7),
            rounds: Some(5),
        };
        let config = parse_config_with_overrides("", &overrides).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.rounds, 5);
        // partition_seed follows the overridden master seed.
        assert_eq!(config.partition_seed(), 7);

        let pinned = parse_config_with_overrides("partition_seed = 3", &overrides).unwrap();
        assert_eq!(pinned.partition_seed(), 3);
    }

    #[test]
    fn run_command_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.toml");
        std::fs::write(&config_path, synthetic_toml()).unwrap();
        let out = dir.path().join("out");
        let manifest = run_command(&config_path, &out, &Overrides::default()).unwrap();

        let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
        let lines: Vec<&str> = metrics.lines().collect();
        assert_eq!(lines.len(), 1 + 2, "one header plus one row per round");
        assert!(lines[0].starts_with("round,test_loss,test_accuracy,n_verified"));
        for line in &lines[1..] {
            for (i, cell) in line.split(',').enumerate() {
                if i == 0 || (3..=5).contains(&i) {
                    cell.parse::<u64>().unwrap();
                } else {
                    assert!(cell.parse::<f64>().unwrap().is_finite());
                }
            }
        }

        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary["strategy"], "mechanism");
        // Reward 10 > cost 2 with an honest pass rate near 1: holds.
        assert_eq!(summary["ir"]["holds"], true);
        assert!(summary["pass_rate_honest"].as_f64().unwrap() > 0.0);

        // Expenditure consistency against the metrics rows.
        let n_verified_total: u64 = lines[1..]
            .iter()
            .map(|l| l.split(',').nth(3).unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(
            summary["server_expenditure"].as_f64().unwrap(),
            10.0 * n_verified_total as f64
        );

        assert!(manifest.duration_seconds >= 0.0);
        assert_eq!(manifest.version, crate::VERSION);
        assert!(out.join("manifest.json").is_file());
        assert!(out.join("ledger.csv").is_file());
        assert!(out.join("config_resolved.toml").is_file());
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.toml");
        std::fs::write(&config_path, synthetic_toml()).unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        run_command(&config_path, &out_a, &Overrides::default()).unwrap();
        run_command(&config_path, &out_b, &Overrides::default()).unwrap();
        for file in ["metrics.csv", "ledger.csv", "summary.json"] {
            let a = std::fs::read(out_a.join(file)).unwrap();
            let b = std::fs::read(out_b.join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between reruns");
        }
    }

    #[test]
    fn comparison_csv_shape() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.toml");
        std::fs::write(&config_path, synthetic_toml()).unwrap();
        let out = dir.path().join("out");
        let strategies = [
            AggregationStrategy::FedAvg,
            AggregationStrategy::Krum,
            AggregationStrategy::Mechanism,
        ];
        let table = compare_command(
            &config_path,
            &strategies,
            &[1.0 / 6.0, 2.0 / 6.0],
            &out,
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(table.cells.len(), 6);
        assert_eq!(table.degradation.len(), 3);

        let text = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 6);
        assert_eq!(lines[0], "strategy,malicious_fraction,final_accuracy,degradation");
        let distinct_degradations: std::collections::HashSet<&str> = lines[1..]
            .iter()
            .map(|l| l.split(',').nth(3).unwrap())
            .collect();
        assert!(distinct_degradations.len() <= 3);
    }

    #[test]
    fn single_cell_comparison_has_zero_degradation() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.toml");
        std::fs::write(&config_path, synthetic_toml()).unwrap();
        let table = compare_command(
            &config_path,
            &[AggregationStrategy::Mechanism],
            &[0.5],
            &dir.path().join("out"),
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(table.cells.len(), 1);
        assert_eq!(
            table.degradation_for(AggregationStrategy::Mechanism),
            Some(0.0)
        );
    }

    #[test]
    fn missing_config_is_an_io_error() {
        let err = run_command(
            Path::new("/nonexistent/config.toml"),
            Path::new("/tmp/fedsim-nonexistent-out"),
            &Overrides::default(),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
