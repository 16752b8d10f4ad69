//! Misdetection, false-alarm and channel-estimation metrics.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::transmitter::UserMessage;

/// Error counts of one simulated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub ka: usize,
    /// Active users whose message is missing from the list.
    pub misdetections: usize,
    /// List entries that no active user sent.
    pub false_alarms: usize,
    pub list_len: usize,
    /// Users sharing their index bits with another active user.
    pub collisions: usize,
}

impl TrialOutcome {
    /// Compares the decoded list with the transmitted messages. Exact
    /// `B`-bit equality defines correctness; the list is taken as a set.
    pub fn evaluate(transmitted: &[UserMessage], decoded: &[Vec<u8>]) -> Self {
        let list: HashSet<&[u8]> = decoded.iter().map(Vec::as_slice).collect();
        let sent: HashSet<&[u8]> = transmitted.iter().map(UserMessage::bits).collect();
        TrialOutcome {
            ka: transmitted.len(),
            misdetections: transmitted
                .iter()
                .filter(|m| !list.contains(m.bits()))
                .count(),
            false_alarms: list.iter().filter(|m| !sent.contains(*m)).count(),
            list_len: list.len(),
            collisions: count_collisions(transmitted),
        }
    }

    pub fn misdetection_rate(&self) -> f64 {
        self.misdetections as f64 / self.ka as f64
    }

    /// False-alarm fraction of the list, zero for an empty list.
    pub fn false_alarm_rate(&self) -> f64 {
        if self.list_len == 0 {
            0.0
        } else {
            self.false_alarms as f64 / self.list_len as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pupe {
    pub pmd: f64,
    pub pfa: f64,
    pub pe: f64,
}

/// Averages the per-frame misdetection and false-alarm rates over trials.
pub fn compute_pupe(outcomes: &[TrialOutcome]) -> Result<Pupe> {
    if outcomes.is_empty() {
        return Err(Error::InvalidArgument("no trials to average".into()));
    }
    if outcomes.iter().any(|o| o.ka == 0) {
        return Err(Error::InvalidArgument("trial without active users".into()));
    }
    let t = outcomes.len() as f64;
    let pmd = outcomes
        .iter()
        .map(TrialOutcome::misdetection_rate)
        .sum::<f64>()
        / t;
    let pfa = outcomes
        .iter()
        .map(TrialOutcome::false_alarm_rate)
        .sum::<f64>()
        / t;
    Ok(Pupe {
        pmd,
        pfa,
        pe: pmd + pfa,
    })
}

/// Mean of `||h_est - h_true||^2 / M` over matched `(estimate row, true row)` pairs.
pub fn channel_mse(estimate: &CMatrix, truth: &CMatrix, pairs: &[(usize, usize)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let m = truth.ncols();
    let total: f64 = pairs
        .iter()
        .map(|&(e, t)| (estimate.row(e) - truth.row(t)).norm_squared() / m as f64)
        .sum();
    Some(total / pairs.len() as f64)
}

/// Number of users whose index bits are shared with at least one other user.
pub fn count_collisions(messages: &[UserMessage]) -> usize {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for m in messages {
        *counts.entry(m.index()).or_default() += 1;
    }
    counts.values().filter(|&&c| c > 1).sum()
}

/// Wilson score interval for a proportion `p_hat` over `n` Bernoulli
/// observations at normal quantile `z`.
pub fn wilson_interval(p_hat: f64, n: f64, z: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (0.0, 1.0);
    }
    let p = p_hat.clamp(0.0, 1.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// One-sided 95% normal quantile.
pub const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;
