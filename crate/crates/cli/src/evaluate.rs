//! Scoring estimated signed graphs against a truth file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::Estimates;
use crate::scenario::Truth;

/// Query times in the two files must agree to this tolerance.
const TAU_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMetrics {
    pub tau: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Estimated scored edges equal the true edges including signs.
    pub signed_exact: bool,
    pub conflicts: usize,
    pub true_edges: usize,
    /// Estimated edges outside the band.
    pub estimated_edges: usize,
    pub true_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_tau: Vec<TauMetrics>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    /// Fraction of query times with exact signed recovery.
    pub mean_signed_exact: f64,
    pub total_conflicts: usize,
}

/// Scores one query time. Pairs in `band` are dropped from both sides.
pub fn score(
    tau: f64,
    truth: &BTreeMap<(usize, usize), i8>,
    band: &BTreeSet<(usize, usize)>,
    estimate: &BTreeMap<(usize, usize), i8>,
    conflicts: usize,
) -> TauMetrics {
    let est: BTreeMap<_, _> = estimate
        .iter()
        .filter(|(k, _)| !band.contains(k))
        .map(|(k, s)| (*k, *s))
        .collect();
    let tp = est.keys().filter(|k| truth.contains_key(k)).count();
    let precision = if est.is_empty() { 1.0 } else { tp as f64 / est.len() as f64 };
    let recall = if truth.is_empty() { 1.0 } else { tp as f64 / truth.len() as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    TauMetrics {
        tau,
        precision,
        recall,
        f1,
        signed_exact: est == *truth,
        conflicts,
        true_edges: truth.len(),
        estimated_edges: est.len(),
        true_positives: tp,
    }
}

fn key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

pub fn evaluate(estimates: &Estimates, truth: &Truth) -> Result<EvalResult> {
    if estimates.p != truth.p {
        return Err(CliError::input(format!(
            "dimension mismatch: estimates have p = {}, truth has p = {}",
            estimates.p, truth.p
        )));
    }
    if let Some(e) = estimates.errors.first() {
        return Err(CliError::input(format!("estimates contain a failed query time {}: {}", e.tau, e.message)));
    }
    let est_taus: Vec<f64> = estimates.estimates.iter().map(|e| e.tau).collect();
    let truth_taus: Vec<f64> = truth.taus.iter().map(|t| t.tau).collect();
    let same_grid = est_taus.len() == truth_taus.len()
        && est_taus.iter().zip(&truth_taus).all(|(a, b)| (a - b).abs() <= TAU_MATCH_TOL);
    if !same_grid {
        return Err(CliError::input(format!(
            "tau grid mismatch: estimates {est_taus:?}, truth {truth_taus:?}"
        )));
    }

    let per_tau: Vec<TauMetrics> = estimates
        .estimates
        .iter()
        .zip(&truth.taus)
        .map(|(est, tp)| {
            let t: BTreeMap<_, _> = tp.edges.iter().map(|e| (key(e.u, e.v), e.sign)).collect();
            let band: BTreeSet<_> = tp.band.iter().map(|b| key(b.u, b.v)).collect();
            let e: BTreeMap<_, _> = est.edges.iter().map(|e| (key(e.u, e.v), e.sign)).collect();
            score(tp.tau, &t, &band, &e, est.conflicts)
        })
        .collect();
    let k = per_tau.len().max(1) as f64;
    let mean = |f: fn(&TauMetrics) -> f64| per_tau.iter().map(f).sum::<f64>() / k;
    Ok(EvalResult {
        mean_precision: mean(|m| m.precision),
        mean_recall: mean(|m| m.recall),
        mean_f1: mean(|m| m.f1),
        mean_signed_exact: mean(|m| if m.signed_exact { 1.0 } else { 0.0 }),
        total_conflicts: per_tau.iter().map(|m| m.conflicts).sum(),
        per_tau,
    })
}

pub fn metrics_csv(result: &EvalResult) -> String {
    let mut out = String::from("tau,precision,recall,f1,signed_exact,conflicts,true_edges,estimated_edges,true_positives\n");
    for m in &result.per_tau {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            m.tau,
            m.precision,
            m.recall,
            m.f1,
            u8::from(m.signed_exact),
            m.conflicts,
            m.true_edges,
            m.estimated_edges,
            m.true_positives
        )
        .unwrap();
    }
    out
}
