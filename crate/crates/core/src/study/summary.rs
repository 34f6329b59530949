use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ModelKind;
use crate::moments::Level;
use crate::study::{ReplicateRow, StudyDesign};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: ModelKind,
    pub convergence_rate: f64,
    /// Replicates without a usable estimate.
    pub failed: Vec<u64>,
    /// Replicates with an estimate but a failed White SE.
    pub se_failed: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub estimator: ModelKind,
    pub index: usize,
    pub coefficient: String,
    pub truth: f64,
    pub count: usize,
    pub mean: f64,
    pub bias: f64,
    /// Sample variance across replicates (denominator `count - 1`).
    pub sv: f64,
    pub ssd: f64,
    pub mean_se_white: Option<f64>,
    pub mean_se_ddw: Option<f64>,
}

/// `SV(reference) / SV(other)` over replicates where both converged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub study: String,
    pub level: Option<Level>,
    pub reference: ModelKind,
    pub other: ModelKind,
    pub index: usize,
    pub coefficient: String,
    pub ratio: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub study: String,
    pub replicates: usize,
    pub level: Option<Level>,
    pub reference: ModelKind,
    pub estimators: Vec<EstimatorSummary>,
    pub coefficients: Vec<CoefficientSummary>,
    pub ratios: Vec<RatioRow>,
}

impl StudySummary {
    pub fn coefficient(&self, estimator: ModelKind, index: usize) -> Option<&CoefficientSummary> {
        self.coefficients.iter().find(|c| c.estimator == estimator && c.index == index)
    }

    pub fn ratio(&self, other: ModelKind, index: usize) -> Option<&RatioRow> {
        self.ratios.iter().find(|r| r.other == other && r.index == index)
    }

    pub fn estimator(&self, estimator: ModelKind) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == estimator)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

fn usable(row: &ReplicateRow) -> bool {
    row.converged && row.estimate.is_some_and(f64::is_finite)
}

/// Summarizes ledger rows. Rows are keyed by (replicate, estimator,
/// coefficient), so the order and split of the input does not matter.
/// Fails when an estimator converges in fewer than half the replicates.
pub fn summarize(design: &StudyDesign, rows: &[ReplicateRow]) -> Result<StudySummary> {
    let mut table: BTreeMap<(ModelKind, usize), BTreeMap<u64, &ReplicateRow>> = BTreeMap::new();
    let mut replicates = BTreeSet::new();
    for row in rows {
        replicates.insert(row.replicate);
        table.entry((row.estimator, row.index)).or_default().insert(row.replicate, row);
    }
    let labels = design.labels();
    let empty = BTreeMap::new();
    let cell = |k: ModelKind, i: usize| table.get(&(k, i)).unwrap_or(&empty);

    let mut estimators = Vec::new();
    for &kind in &design.estimators {
        let first = cell(kind, 0);
        let failed: Vec<u64> =
            replicates.iter().copied().filter(|r| !first.get(r).is_some_and(|row| usable(row))).collect();
        let se_failed = if design.se.white {
            first.values().filter(|row| usable(row) && row.se_white.is_none()).map(|row| row.replicate).collect()
        } else {
            Vec::new()
        };
        let rate = if replicates.is_empty() { 0.0 } else { 1.0 - failed.len() as f64 / replicates.len() as f64 };
        estimators.push(EstimatorSummary { estimator: kind, convergence_rate: rate, failed, se_failed });
    }

    let mut coefficients = Vec::new();
    for &kind in &design.estimators {
        for (index, label) in labels.iter().enumerate() {
            let ok: Vec<&ReplicateRow> = cell(kind, index).values().copied().filter(|r| usable(r)).collect();
            let est: Vec<f64> = ok.iter().map(|r| r.estimate.expect("usable")).collect();
            let truth = design.sim.beta[index];
            let m = if est.is_empty() { f64::NAN } else { mean(&est) };
            let sv = sample_variance(&est);
            coefficients.push(CoefficientSummary {
                estimator: kind,
                index,
                coefficient: label.clone(),
                truth,
                count: est.len(),
                mean: m,
                bias: m - truth,
                sv,
                ssd: sv.sqrt(),
                mean_se_white: mean_of(ok.iter().map(|r| r.se_white)),
                mean_se_ddw: mean_of(ok.iter().map(|r| r.se_ddw)),
            });
        }
    }

    let mut ratios = Vec::new();
    for &other in design.estimators.iter().filter(|&&k| k != design.reference) {
        for (index, label) in labels.iter().enumerate() {
            let (a, b) = (cell(design.reference, index), cell(other, index));
            let (mut ref_est, mut other_est) = (Vec::new(), Vec::new());
            for (r, row) in a {
                if let Some(o) = b.get(r) {
                    if usable(row) && usable(o) {
                        ref_est.push(row.estimate.expect("usable"));
                        other_est.push(o.estimate.expect("usable"));
                    }
                }
            }
            ratios.push(RatioRow {
                study: design.name.clone(),
                level: design.level,
                reference: design.reference,
                other,
                index,
                coefficient: label.clone(),
                ratio: sample_variance(&ref_est) / sample_variance(&other_est),
                pairs: ref_est.len(),
            });
        }
    }

    let summary = StudySummary {
        study: design.name.clone(),
        replicates: replicates.len(),
        level: design.level,
        reference: design.reference,
        estimators,
        coefficients,
        ratios,
    };
    if let Some(low) = summary.estimators.iter().find(|e| e.convergence_rate < 0.5) {
        return Err(Error::LowConvergence { estimator: low.estimator.to_string(), rate: low.convergence_rate });
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::LatentSpec;
    use crate::simulation::{Covariate, SimConfig};
    use crate::study::SeOptions;

    fn design() -> StudyDesign {
        StudyDesign {
            name: "toy".into(),
            sim: SimConfig {
                n: 10,
                beta: vec![0.5, 1.0],
                covariates: vec![Covariate::Binary { p: 0.5 }],
                latent: LatentSpec::null(),
                seed: 1,
            },
            replicates: 4,
            estimators: vec![ModelKind::Glm, ModelKind::Hmm2],
            se: SeOptions::default(),
            reference: ModelKind::Hmm2,
            starts: 2,
            level: None,
            metadata: Default::default(),
        }
    }

    fn row(r: u64, k: ModelKind, index: usize, est: Option<f64>) -> ReplicateRow {
        ReplicateRow {
            replicate: r,
            estimator: k,
            index,
            coefficient: ["intercept", "binary"][index].into(),
            estimate: est,
            se_white: None,
            se_ddw: None,
            converged: est.is_some(),
            note: String::new(),
        }
    }

    fn rows() -> Vec<ReplicateRow> {
        let glm = [1.0, 1.2, 0.8, 1.1];
        let hmm = [Some(1.0), Some(1.1), None, Some(0.9)];
        let mut out = Vec::new();
        for r in 0..4u64 {
            for i in 0..2 {
                out.push(row(r, ModelKind::Glm, i, Some(glm[r as usize] - 0.5 * (1 - i) as f64)));
                out.push(row(r, ModelKind::Hmm2, i, hmm[r as usize].map(|v| v - 0.5 * (1 - i) as f64)));
            }
        }
        out
    }

    #[test]
    fn moments_and_pairwise_ratio() {
        let s = summarize(&design(), &rows()).unwrap();
        let g = s.coefficient(ModelKind::Glm, 1).unwrap();
        assert!((g.mean - 1.025).abs() < 1e-12);
        assert!((g.bias - 0.025).abs() < 1e-12);
        assert!((g.ssd - g.sv.sqrt()).abs() < 1e-15);
        assert_eq!(s.estimator(ModelKind::Hmm2).unwrap().failed, vec![2]);
        // Pairs drop replicate 2: GLM {1.0, 1.2, 1.1} vs HMM {1.0, 1.1, 0.9}.
        let r = s.ratio(ModelKind::Glm, 1).unwrap();
        assert_eq!(r.pairs, 3);
        assert!((r.ratio - 0.01 / 0.01).abs() < 1e-9, "{}", r.ratio);
    }

    #[test]
    fn order_and_split_do_not_matter() {
        let all = rows();
        let mut shuffled: Vec<ReplicateRow> = all[8..].to_vec();
        shuffled.extend_from_slice(&all[..8]);
        shuffled.reverse();
        assert_eq!(summarize(&design(), &all).unwrap(), summarize(&design(), &shuffled).unwrap());
    }

    #[test]
    fn low_convergence_is_an_error() {
        let mut rs = rows();
        for r in rs.iter_mut().filter(|r| r.estimator == ModelKind::Hmm2 && r.replicate < 3) {
            r.estimate = None;
            r.converged = false;
        }
        assert!(matches!(summarize(&design(), &rs), Err(Error::LowConvergence { .. })));
    }
}
