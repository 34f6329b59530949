use std::collections::BTreeMap;

use serde_json::json;

use crate::error::{Error, Result};
use crate::estimators::ModelKind;
use crate::latent::LatentSpec;
use crate::moments::{Factor, Level};
use crate::simulation::{calibrate, CalibrationTarget, Covariate, Family, SimConfig};
use crate::study::{SeOptions, StudyDesign};

const REPLICATES: usize = 500;
const REFERENCE_REPLICATES: usize = 4000;
const N: usize = 1000;
const BASE_SEED: u64 = 20_240_601;

/// Coefficients of the Study-1 designs (intercept, binary slope).
const STUDY1_BETA: [f64; 2] = [0.5, 1.0];
/// Coefficients of the SE designs; the intercept sets the count scale.
const SE_BINARY_BETA: [f64; 2] = [3.0, 1.0];
const SE_TREND_BETA: [f64; 2] = [3.0, 1.0];

const LEVELS: [(&str, Level); 3] = [("low", Level::Low), ("med", Level::Medium), ("high", Level::High)];

pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    for (tag, _) in LEVELS {
        names.push(format!("study1-{tag}"));
    }
    for k in [3, 4] {
        for (tag, _) in LEVELS {
            names.push(format!("study2-hmm{k}-{tag}"));
        }
    }
    for (tag, _) in LEVELS {
        names.push(format!("study2-glmm-{tag}"));
    }
    for (tag, _) in LEVELS {
        names.push(format!("study2-glmm-binary-{tag}"));
    }
    for row in ["hmm-binary", "hmm-trend", "glmm-binary", "glmm-trend"] {
        names.push(format!("se-table2-{row}"));
    }
    names
}

fn level_of(tag: &str) -> Option<Level> {
    LEVELS.iter().find(|(t, _)| *t == tag).map(|(_, l)| *l)
}

fn binary() -> Covariate {
    Covariate::Binary { p: 0.5 }
}

fn trend() -> Covariate {
    Covariate::Trend { scale: None }
}

fn base_config(beta: &[f64], covariate: Covariate) -> SimConfig {
    SimConfig { n: N, beta: beta.to_vec(), covariates: vec![covariate], latent: LatentSpec::null(), seed: BASE_SEED }
}

/// Calibrates the latent process over the design's mean curve.
fn calibrated(mut sim: SimConfig, target: CalibrationTarget, family: Family) -> Result<SimConfig> {
    let mu = sim.mean_curve()?;
    sim.latent = calibrate(&target, &family, &mu)?;
    Ok(sim)
}

fn metadata(sim: &SimConfig, extra: &[(&str, serde_json::Value)]) -> Result<BTreeMap<String, serde_json::Value>> {
    let mut m = BTreeMap::new();
    m.insert("replicates_reference".into(), json!(REFERENCE_REPLICATES));
    m.insert(
        "replicate_scaling".into(),
        json!(format!(
            "{REPLICATES} replicates instead of {REFERENCE_REPLICATES}; Monte Carlo tolerances widen by sqrt(8)"
        )),
    );
    m.insert("profile".into(), serde_json::to_value(sim.profile()?)?);
    if sim.covariates.iter().any(|c| matches!(c, Covariate::Trend { scale: None })) {
        m.insert("trend_coding".into(), json!("t/n"));
    }
    if sim.covariates.iter().any(|c| matches!(c, Covariate::Binary { .. })) {
        m.insert("binary_coding".into(), json!("i.i.d. Bernoulli(0.5), redrawn per replicate"));
    }
    for (k, v) in extra {
        m.insert((*k).into(), v.clone());
    }
    Ok(m)
}

fn design(
    name: &str,
    sim: SimConfig,
    estimators: Vec<ModelKind>,
    reference: ModelKind,
    se: SeOptions,
    level: Option<Level>,
    extra: &[(&str, serde_json::Value)],
) -> Result<StudyDesign> {
    let metadata = metadata(&sim, extra)?;
    let d = StudyDesign {
        name: name.into(),
        sim,
        replicates: REPLICATES,
        estimators,
        se,
        reference,
        starts: 10,
        level,
        metadata,
    };
    d.validate()?;
    Ok(d)
}

const ALL: [ModelKind; 3] = [ModelKind::Glm, ModelKind::Fmm2, ModelKind::Hmm2];

fn both_se() -> SeOptions {
    SeOptions { white: true, ddw: true, ..Default::default() }
}

/// The 2-state chain with `p11 = p22 = 0.9`, gap calibrated on SP.
fn study1_chain(sim: SimConfig, level: Level) -> Result<SimConfig> {
    calibrated(sim, CalibrationTarget::only(Factor::Sp, level), Family::Hmm2 { p11: 0.9, p22: 0.9 })
}

/// The same chain with every factor high: only the OD anchor pulls AC1 and
/// SP up with it.
fn all_high_chain(sim: SimConfig) -> Result<SimConfig> {
    calibrated(sim, CalibrationTarget::only(Factor::Od, Level::High), Family::Hmm2 { p11: 0.9, p22: 0.9 })
}

fn glmm(sim: SimConfig, level: Level) -> Result<SimConfig> {
    let target = CalibrationTarget { od: Some(level), ac1: Some(level), sp: None, tolerance: 0.05 };
    calibrated(sim, target, Family::Ar1)
}

/// Full design for a documented preset name.
pub fn preset(name: &str) -> Result<StudyDesign> {
    let unknown = || Error::UnknownPreset(name.to_string());
    if let Some(tag) = name.strip_prefix("study1-") {
        let level = level_of(tag).ok_or_else(unknown)?;
        let sim = study1_chain(base_config(&STUDY1_BETA, binary()), level)?;
        let extra = [("calibration", json!("p11 = p22 = 0.9; S1 solved for the SP anchor; OD and AC1 follow"))];
        return design(name, sim, ALL.to_vec(), ModelKind::Hmm2, SeOptions::default(), Some(level), &extra);
    }
    if let Some(rest) = name.strip_prefix("study2-hmm") {
        let (k, tag) = rest.split_once('-').ok_or_else(unknown)?;
        let k: usize = k.parse().map_err(|_| unknown())?;
        if !(k == 3 || k == 4) {
            return Err(unknown());
        }
        let level = level_of(tag).ok_or_else(unknown)?;
        let family = Family::HmmK { k, stay: 0.9 };
        // Mean adjacent-pair SP is not monotone in the state spacing once
        // the lowest states collapse towards zero, and never reaches the high
        // anchor; OD is monotone and reachable at every level.
        let sim = calibrated(base_config(&STUDY1_BETA, binary()), CalibrationTarget::only(Factor::Od, level), family)?;
        let extra = [(
            "calibration",
            json!(format!("p_ii = 0.9, p_ij = 0.1/{}; equally spaced log-states scaled for the OD anchor", k - 1)),
        )];
        return design(name, sim, ALL.to_vec(), ModelKind::Glm, SeOptions::default(), Some(level), &extra);
    }
    if let Some(rest) = name.strip_prefix("study2-glmm-") {
        let (covariate, tag) = match rest.strip_prefix("binary-") {
            Some(tag) => (binary(), tag),
            None => (trend(), rest),
        };
        let level = level_of(tag).ok_or_else(unknown)?;
        let sim = glmm(base_config(&STUDY1_BETA, covariate), level)?;
        let extra = [("calibration", json!("AR(1) latent; sigma_alpha^2 from the OD anchor, phi from the AC1 anchor"))];
        return design(name, sim, ALL.to_vec(), ModelKind::Glm, SeOptions::default(), Some(level), &extra);
    }
    let two = vec![ModelKind::Glm, ModelKind::Hmm2];
    let extra = [("calibration", json!("high factor levels"))];
    match name {
        "se-table2-hmm-binary" => {
            let sim = all_high_chain(base_config(&SE_BINARY_BETA, binary()))?;
            design(name, sim, two, ModelKind::Hmm2, both_se(), Some(Level::High), &extra)
        }
        "se-table2-hmm-trend" => {
            let sim = all_high_chain(base_config(&SE_TREND_BETA, trend()))?;
            design(name, sim, two, ModelKind::Hmm2, both_se(), Some(Level::High), &extra)
        }
        "se-table2-glmm-binary" => {
            let sim = glmm(base_config(&SE_BINARY_BETA, binary()), Level::High)?;
            design(name, sim, two, ModelKind::Glm, both_se(), Some(Level::High), &extra)
        }
        "se-table2-glmm-trend" => {
            let sim = glmm(base_config(&SE_TREND_BETA, trend()), Level::High)?;
            design(name, sim, two, ModelKind::Glm, both_se(), Some(Level::High), &extra)
        }
        _ => Err(unknown()),
    }
}
