use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{fmm_fit_with, glm_fit, hmm_fit_with, FittedModel, MixtureOptions, ModelKind};
use crate::inference::{ddw_moment_se, white_se};
use crate::series::CountSeries;
use crate::simulation::simulate_stream;
use crate::study::{summarize, ReplicateRow, StudyDesign, StudySummary};

/// Runs replicates `range` of a design; `threads = None` uses every core.
/// Rows come back in replicate order whatever the thread count.
pub fn run_replicates(design: &StudyDesign, range: Range<u64>, threads: Option<usize>) -> Result<Vec<ReplicateRow>> {
    design.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
    let per_rep: Vec<Vec<ReplicateRow>> =
        pool.install(|| range.into_par_iter().map(|r| replicate(design, r)).collect());
    Ok(per_rep.into_iter().flatten().collect())
}

/// Runs every replicate and summarizes the persisted rows.
pub fn run_study(design: &StudyDesign, threads: Option<usize>) -> Result<(Vec<ReplicateRow>, StudySummary)> {
    let rows = run_replicates(design, 0..design.replicates as u64, threads)?;
    let summary = summarize(design, &rows)?;
    Ok((rows, summary))
}

fn failed_rows(design: &StudyDesign, r: u64, kind: ModelKind, note: &str) -> Vec<ReplicateRow> {
    design
        .labels()
        .into_iter()
        .enumerate()
        .map(|(index, coefficient)| ReplicateRow {
            replicate: r,
            estimator: kind,
            index,
            coefficient,
            estimate: None,
            se_white: None,
            se_ddw: None,
            converged: false,
            note: note.to_string(),
        })
        .collect()
}

fn fitted_rows(design: &StudyDesign, r: u64, fit: &FittedModel, data: &CountSeries) -> Vec<ReplicateRow> {
    let mut notes = Vec::new();
    if !fit.flags.is_empty() {
        notes.push(format!("flags {:?}", fit.flags));
    }
    let white = design.se.white.then(|| white_se(fit, data, design.se.ell));
    let ddw = (design.se.ddw && fit.kind == ModelKind::Glm).then(|| ddw_moment_se(fit, data, design.se.ddw_max_lag));
    let mut pick = |res: &Option<crate::error::Result<crate::inference::SandwichCovariance>>, tag: &str| match res {
        Some(Ok(cov)) => Some(cov.se.clone()),
        Some(Err(e)) => {
            notes.push(format!("{tag} SE: {e}"));
            None
        }
        None => None,
    };
    let white = pick(&white, "white");
    let ddw = pick(&ddw, "ddw");
    let note = notes.join("; ");
    design
        .labels()
        .into_iter()
        .enumerate()
        .map(|(index, coefficient)| ReplicateRow {
            replicate: r,
            estimator: fit.kind,
            index,
            coefficient,
            estimate: Some(fit.beta[index]),
            se_white: white.as_ref().map(|s| s[index]),
            se_ddw: ddw.as_ref().map(|s| s[index]),
            // Flagged boundary optima are genuine (degenerate) estimates.
            converged: fit.converged || !fit.flags.is_empty(),
            note: note.clone(),
        })
        .collect()
}

fn replicate(design: &StudyDesign, r: u64) -> Vec<ReplicateRow> {
    let fail_all = |note: String| design.estimators.iter().flat_map(|&k| failed_rows(design, r, k, &note)).collect();
    let data = match simulate_stream(&design.sim, r) {
        Ok(sim) => sim.series,
        Err(e) => return fail_all(format!("simulation: {e}")),
    };
    let glm = match glm_fit(&data) {
        Ok(g) => g,
        Err(e) => return fail_all(format!("glm: {e}")),
    };
    let opts = MixtureOptions { starts: design.starts, seed: r, ..Default::default() };
    let wants = |k| design.estimators.contains(&k);
    let fmm = (wants(ModelKind::Fmm2) || wants(ModelKind::Hmm2)).then(|| fmm_fit_with(&data, &glm, &opts));
    let hmm =
        wants(ModelKind::Hmm2).then(|| hmm_fit_with(&data, &glm, fmm.as_ref().and_then(|f| f.as_ref().ok()), &opts));
    let mut rows = Vec::new();
    for &kind in &design.estimators {
        let fit = match kind {
            ModelKind::Glm => Ok(&glm),
            ModelKind::Fmm2 => fmm.as_ref().expect("requested").as_ref(),
            ModelKind::Hmm2 => hmm.as_ref().expect("requested").as_ref(),
        };
        match fit {
            Ok(fit) => rows.extend(fitted_rows(design, r, fit, &data)),
            Err(e) => rows.extend(failed_rows(design, r, kind, &e.to_string())),
        }
    }
    rows
}
