use anyhow::{bail, Context, Result};
use pdmcount::diagnostics::{estimate_factors, recommend, standardized_residuals, Recommendation};
use pdmcount::estimators::{fit_all, glm_fit, MixtureOptions};
use pdmcount::inference::{ddw_moment_se, white_se, SandwichCovariance};
use pdmcount::io::ingest_csv;
use pdmcount::{CountSeries, FittedModel, ModelKind};
use serde::Serialize;

use crate::output::{num, table, OutDir};
use crate::{expand_models, DiagnoseArgs, FitArgs, SeArg};

#[derive(Debug, Clone, Serialize)]
pub struct SeReport {
    pub model: ModelKind,
    pub white: Option<SandwichCovariance>,
    pub ddw: Option<SandwichCovariance>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub labels: Vec<String>,
    pub fits: Vec<FittedModel>,
    /// Models that could not be fitted, with the reason.
    pub failures: Vec<(ModelKind, String)>,
    #[serde(skip)]
    pub se: Vec<SeReport>,
}

impl FitReport {
    pub fn se(&self, kind: ModelKind) -> Option<&SeReport> {
        self.se.iter().find(|s| s.model == kind)
    }

    /// Problems that make the run unsuccessful.
    pub fn problems(&self) -> Vec<String> {
        let mut p: Vec<String> = self.failures.iter().map(|(k, e)| format!("{k}: {e}")).collect();
        p.extend(self.fits.iter().filter(|f| !f.converged).map(|f| format!("{}: did not converge", f.kind)));
        for s in &self.se {
            p.extend(s.errors.iter().map(|e| format!("{}: {e}", s.model)));
        }
        p
    }

    /// Estimates and SEs to three decimals, one block of columns per model.
    pub fn text_table(&self) -> String {
        let mut header = vec!["coefficient".to_string()];
        let mut cols: Vec<Box<dyn Fn(usize) -> Option<f64> + '_>> = Vec::new();
        for fit in &self.fits {
            let se = self.se(fit.kind);
            header.push(format!("{} est", fit.kind));
            cols.push(Box::new(move |i| Some(fit.beta[i])));
            if let Some(c) = se.and_then(|s| s.ddw.as_ref()) {
                header.push(format!("{} SE(DDW)", fit.kind));
                cols.push(Box::new(move |i| Some(c.se[i])));
            }
            if let Some(c) = se.and_then(|s| s.white.as_ref()) {
                header.push(format!("{} SE(White)", fit.kind));
                cols.push(Box::new(move |i| Some(c.se[i])));
            }
        }
        let rows: Vec<Vec<String>> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| std::iter::once(l.clone()).chain(cols.iter().map(|c| num(c(i)))).collect())
            .collect();
        table(&header, &rows)
    }
}

pub struct FitSettings {
    pub kinds: Vec<ModelKind>,
    pub se: SeArg,
    pub ell: usize,
    pub ddw_max_lag: Option<usize>,
    pub seed: u64,
    pub starts: usize,
}

pub fn fit_series(data: &CountSeries, s: &FitSettings) -> Result<FitReport> {
    let opts = MixtureOptions { starts: s.starts, seed: s.seed, ..Default::default() };
    let mut set = fit_all(data, &s.kinds, &opts).context("fitting the Poisson GLM")?;
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for kind in &s.kinds {
        let fit = match kind {
            ModelKind::Glm => Ok(set.glm.clone()),
            ModelKind::Fmm2 => set.fmm.take().expect("requested"),
            ModelKind::Hmm2 => set.hmm.take().expect("requested"),
        };
        match fit {
            Ok(f) => fits.push(f),
            Err(e) => failures.push((*kind, e.to_string())),
        }
    }
    let mut se = Vec::new();
    for fit in &fits {
        let mut report = SeReport { model: fit.kind, white: None, ddw: None, errors: Vec::new() };
        if s.se.white() {
            match white_se(fit, data, s.ell) {
                Ok(c) => report.white = Some(c),
                Err(e) => report.errors.push(format!("White SE: {e}")),
            }
        }
        if s.se.ddw() && fit.kind == ModelKind::Glm {
            match ddw_moment_se(fit, data, s.ddw_max_lag) {
                Ok(c) => report.ddw = Some(c),
                Err(e) => report.errors.push(format!("DDW SE: {e}")),
            }
        }
        se.push(report);
    }
    Ok(FitReport { labels: data.labels().to_vec(), fits, failures, se })
}

/// Writes `fit.json`, `se.json` and `table.txt`.
pub fn write_fit(out: &mut OutDir, report: &FitReport) -> Result<()> {
    out.json("fit.json", report)?;
    out.json("se.json", &report.se)?;
    out.text("table.txt", &report.text_table())
}

pub fn run(args: &FitArgs) -> Result<()> {
    let data = ingest_csv(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let settings = FitSettings {
        kinds: expand_models(&args.model),
        se: args.se,
        ell: args.ell,
        ddw_max_lag: args.ddw_max_lag,
        seed: args.seed,
        starts: args.starts,
    };
    let report = fit_series(&data, &settings)?;
    let mut out = OutDir::create(&args.out)?;
    write_fit(&mut out, &report)?;
    out.manifest("fit", args, Some(args.seed))?;
    print!("{}", report.text_table());
    let problems = report.problems();
    if !problems.is_empty() {
        bail!("outputs written, but: {}", problems.join("; "));
    }
    Ok(())
}

pub fn diagnosis(data: &CountSeries) -> Result<(Recommendation, Vec<f64>)> {
    let fit = glm_fit(data)?;
    let r = standardized_residuals(&fit, data)?;
    let profile = estimate_factors(&r, &fit, data)?;
    Ok((recommend(&profile, data.d()), r))
}

pub fn recommendation_text(rec: &Recommendation) -> String {
    let p = &rec.profile;
    format!(
        "OD  {:.3} ({})\nAC1 {:.3} ({})\nSP  {:.3} ({})\nd   {}\nrecommended: {}\nrule: {}\n",
        p.od,
        p.levels.od,
        p.ac1,
        p.levels.ac1,
        p.sp_value(),
        p.levels.sp,
        rec.d,
        rec.chosen,
        rec.rule
    )
}

#[derive(Serialize)]
struct ResidualRow {
    t: usize,
    residual: f64,
}

pub fn write_diagnosis(out: &mut OutDir, rec: &Recommendation, residuals: &[f64]) -> Result<()> {
    out.json("recommendation.json", rec)?;
    let rows: Vec<ResidualRow> =
        residuals.iter().enumerate().map(|(t, &r)| ResidualRow { t: t + 1, residual: r }).collect();
    out.csv("residuals.csv", &rows)
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let data = ingest_csv(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let (rec, r) = diagnosis(&data)?;
    let mut out = OutDir::create(&args.out)?;
    write_diagnosis(&mut out, &rec, &r)?;
    out.manifest("diagnose", args, None)?;
    print!("{}", recommendation_text(&rec));
    Ok(())
}
