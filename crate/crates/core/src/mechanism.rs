//! Verification, payments, utilities, the cumulative ledger, and the
//! closed-form rationality analyzers.
//!
//! The server scores each submitted update by its mean loss on a private
//! validation set. An update is verified iff that loss is strictly below the
//! threshold; a verified update is paid the full reward, anything else is
//! paid exactly zero. Clients pay their participation cost every round they
//! submit, verified or not, so per-round utility is `payment - cost`.
//!
//! The analyzers turn verification probabilities into expected utilities:
//! honest participation is rational when `reward > cost / p_verify_honest`,
//! and poisoning is economically dominated when its expected utility
//! `p_verify_malicious * reward - cost` falls below the zero payoff of
//! staying out.

use std::io::Write;

use crate::adversary::ClientType;
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::fmt;
use crate::model::{self, ModelParams};

/// Reward, cost, and verification threshold.
///
/// `reward > cost` is required for honest participation to ever be
/// profitable; it is enforced at config load (with an override flag for
/// what-if runs), not here, so the analyzers can also study bad parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismParams {
    pub reward: f64,
    pub cost: f64,
    pub threshold: f64,
}

impl MechanismParams {
    pub fn new(reward: f64, cost: f64, threshold: f64) -> Result<Self> {
        if reward.is_nan() || reward <= 0.0 {
            return Err(Error::invalid_argument("reward must be > 0"));
        }
        if cost.is_nan() || cost < 0.0 {
            return Err(Error::invalid_argument("cost must be >= 0"));
        }
        if threshold.is_nan() {
            return Err(Error::invalid_argument("threshold must not be NaN"));
        }
        Ok(MechanismParams {
            reward,
            cost,
            threshold,
        })
    }
}

impl Default for MechanismParams {
    /// Reward 10, cost 2, threshold 2.5.
    fn default() -> Self {
        MechanismParams {
            reward: 10.0,
            cost: 2.0,
            threshold: 2.5,
        }
    }
}

/// One client's verification result for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationOutcome {
    pub client_id: usize,
    pub validation_loss: f64,
    pub verified: bool,
    pub payment: f64,
}

/// Score an update on the validation set and apply the payment rule:
/// verified iff `validation_loss < threshold` (strict), payment is the full
/// reward or exactly zero. A non-finite loss (a wildly poisoned model) is
/// treated as above-threshold rejection, never an error.
pub fn verify_and_pay(
    update: &ModelParams,
    validation: &Dataset,
    params: &MechanismParams,
    client_id: usize,
) -> Result<VerificationOutcome> {
    let eval = model::evaluate(update, validation)?;
    let validation_loss = if eval.mean_loss.is_finite() {
        eval.mean_loss
    } else {
        f64::INFINITY
    };
    let verified = validation_loss < params.threshold;
    Ok(VerificationOutcome {
        client_id,
        validation_loss,
        verified,
        payment: if verified { params.reward } else { 0.0 },
    })
}

/// Per-round utility: payment minus participation cost.
pub fn round_utility(outcome: &VerificationOutcome, cost: f64) -> f64 {
    outcome.payment - cost
}

/// Result of the individual-rationality check.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IrCheck {
    pub holds: bool,
    /// Smallest reward that would make honest participation profitable at
    /// the given verification probability; infinite when that probability
    /// is zero.
    pub min_reward: f64,
}

/// Honest participation is individually rational iff
/// `reward > cost / p_verify_honest` (strict). At `p = 0` the condition is
/// unsatisfiable and `min_reward` is the infinity sentinel.
pub fn ir_holds(params: &MechanismParams, p_verify_honest: f64) -> Result<IrCheck> {
    if !(0.0..=1.0).contains(&p_verify_honest) {
        return Err(Error::invalid_argument(format!(
            "verification probability must be in [0, 1], got {p_verify_honest}"
        )));
    }
    if p_verify_honest == 0.0 {
        return Ok(IrCheck {
            holds: false,
            min_reward: f64::INFINITY,
        });
    }
    let min_reward = params.cost / p_verify_honest;
    Ok(IrCheck {
        holds: params.reward > min_reward,
        min_reward,
    })
}

/// Expected per-round utilities under the two actions, and whether poisoning
/// is strictly dominated by staying out.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExpectedUtilities {
    pub honest: f64,
    pub malicious: f64,
    pub poisoning_dominated: bool,
}

/// `honest = p_h * reward - cost`, `malicious = p_m * reward - cost`;
/// poisoning is dominated iff the malicious expectation is strictly below
/// the non-participation payoff of zero.
pub fn expected_utilities(
    params: &MechanismParams,
    p_verify_honest: f64,
    p_verify_malicious: f64,
) -> Result<ExpectedUtilities> {
    for p in [p_verify_honest, p_verify_malicious] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid_argument(format!(
                "verification probability must be in [0, 1], got {p}"
            )));
        }
    }
    let honest = p_verify_honest * params.reward - params.cost;
    let malicious = p_verify_malicious * params.reward - params.cost;
    Ok(ExpectedUtilities {
        honest,
        malicious,
        poisoning_dominated: malicious < 0.0,
    })
}

/// One (round, client) row of the ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub round: usize,
    pub client_id: usize,
    pub client_type: ClientType,
    pub validation_loss: f64,
    pub verified: bool,
    pub payment: f64,
    /// The client's cumulative utility after this round.
    pub cumulative_utility: f64,
}

/// Cumulative money flow for one client.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClientAccount {
    pub payments: f64,
    pub costs: f64,
}

impl ClientAccount {
    pub fn utility(&self) -> f64 {
        self.payments - self.costs
    }
}

/// Per-round verification counts split by true client type. Types are known
/// to the simulator, not the in-game server; they feed analysis output only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundTally {
    pub submitted_honest: usize,
    pub submitted_malicious: usize,
    pub verified_honest: usize,
    pub verified_malicious: usize,
}

/// Cumulative record of payments, costs, utilities, and server expenditure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ledger {
    accounts: Vec<ClientAccount>,
    rounds: Vec<RoundTally>,
    entries: Vec<LedgerEntry>,
    server_expenditure: f64,
}

impl Ledger {
    pub fn new(n_clients: usize) -> Self {
        Ledger {
            accounts: vec![ClientAccount::default(); n_clients],
            rounds: Vec::new(),
            entries: Vec::new(),
            server_expenditure: 0.0,
        }
    }

    pub fn n_clients(&self) -> usize {
        self.accounts.len()
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn accounts(&self) -> &[ClientAccount] {
        &self.accounts
    }

    pub fn rounds(&self) -> &[RoundTally] {
        &self.rounds
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Total paid out by the server across all rounds.
    pub fn server_expenditure(&self) -> f64 {
        self.server_expenditure
    }

    /// Count of verified outcomes across all rounds.
    pub fn total_verified(&self) -> usize {
        self.rounds
            .iter()
            .map(|r| r.verified_honest + r.verified_malicious)
            .sum()
    }

    /// CSV export: one row per (round, client); numbers carry 17 significant
    /// digits so re-runs compare byte-for-byte.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "round,client_id,true_type,validation_loss,verified,payment,cumulative_utility"
        )?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                e.round,
                e.client_id,
                e.client_type.as_str(),
                fmt::float(e.validation_loss),
                e.verified,
                fmt::float(e.payment),
                fmt::float(e.cumulative_utility)
            )?;
        }
        Ok(())
    }
}

/// Fold one round of outcomes into the ledger, debiting every submitting
/// client its cost. Returns a new ledger; the input is untouched.
///
/// `types` is indexed by client id and must cover every outcome's id;
/// duplicate ids within a round are rejected.
pub fn ledger_append(
    ledger: &Ledger,
    outcomes: &[VerificationOutcome],
    types: &[ClientType],
    cost: f64,
) -> Result<Ledger> {
    if types.len() != ledger.n_clients() {
        return Err(Error::invalid_argument(format!(
            "ledger tracks {} clients but {} types were supplied",
            ledger.n_clients(),
            types.len()
        )));
    }
    if cost.is_nan() || cost < 0.0 {
        return Err(Error::invalid_argument("cost must be >= 0"));
    }
    let mut next = ledger.clone();
    let round = next.rounds.len();
    let mut tally = RoundTally::default();
    let mut seen = vec![false; types.len()];
    for outcome in outcomes {
        let id = outcome.client_id;
        if id >= types.len() {
            return Err(Error::invalid_argument(format!(
                "outcome for client {id} does not match any of {} known clients",
                types.len()
            )));
        }
        if seen[id] {
            return Err(Error::invalid_argument(format!(
                "duplicate outcome for client {id} in one round"
            )));
        }
        seen[id] = true;
        let account = &mut next.accounts[id];
        account.payments += outcome.payment;
        account.costs += cost;
        next.server_expenditure += outcome.payment;
        match types[id] {
            ClientType::Benevolent => {
                tally.submitted_honest += 1;
                if outcome.verified {
                    tally.verified_honest += 1;
                }
            }
            ClientType::Malicious => {
                tally.submitted_malicious += 1;
                if outcome.verified {
                    tally.verified_malicious += 1;
                }
            }
        }
        next.entries.push(LedgerEntry {
            round,
            client_id: id,
            client_type: types[id],
            validation_loss: outcome.validation_loss,
            verified: outcome.verified,
            payment: outcome.payment,
            cumulative_utility: next.accounts[id].utility(),
        });
    }
    next.rounds.push(tally);
    Ok(next)
}

/// Empirical verification rates split by true type. `None` marks a type with
/// no submissions (never 0/0).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PassRates {
    pub honest: Option<f64>,
    pub malicious: Option<f64>,
}

/// Frequentist verified/submitted counts over the whole run, no smoothing.
pub fn empirical_pass_rates(ledger: &Ledger) -> PassRates {
    let mut submitted_honest = 0usize;
    let mut verified_honest = 0usize;
    let mut submitted_malicious = 0usize;
    let mut verified_malicious = 0usize;
    for round in ledger.rounds() {
        submitted_honest += round.submitted_honest;
        verified_honest += round.verified_honest;
        submitted_malicious += round.submitted_malicious;
        verified_malicious += round.verified_malicious;
    }
    let rate = |verified: usize, submitted: usize| {
        (submitted > 0).then(|| verified as f64 / submitted as f64)
    };
    PassRates {
        honest: rate(verified_honest, submitted_honest),
        malicious: rate(verified_malicious, submitted_malicious),
    }
}
