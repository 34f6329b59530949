use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use pdmcount::applications::{polio_series, seizure_series, DayCoding, POLIO_MONTHS, SEIZURE_DAYS};
use pdmcount::io::ingest_csv;
use pdmcount::{CountSeries, ModelKind};

use crate::fit::{diagnosis, fit_series, recommendation_text, write_diagnosis, write_fit, FitSettings};
use crate::output::OutDir;
use crate::{ReproduceArgs, SeArg};

const POLIO_SCHEMA: &str = "a CSV with header `y` and 168 monthly counts (Jan 1970 - Dec 1983), \
optionally followed by the covariate columns trend,cos12,sin12,cos6,sin6";
const SEIZURE_SCHEMA: &str = "a CSV with header `y` and 204 daily counts, optionally with a `day` covariate column";

fn load(input: &Option<PathBuf>, default: &str, what: &str, schema: &str) -> Result<CountSeries> {
    let path = input.clone().unwrap_or_else(|| PathBuf::from(default));
    if !path.exists() {
        bail!("{what} dataset not found at {}: expected {schema}", path.display());
    }
    ingest_csv(&path).with_context(|| format!("reading {} (expected {schema})", path.display()))
}

fn settings(kinds: Vec<ModelKind>, seed: Option<u64>) -> FitSettings {
    FitSettings { kinds, se: SeArg::Both, ell: 1, ddw_max_lag: None, seed: seed.unwrap_or(0), starts: 10 }
}

fn counts_only(data: &CountSeries) -> Option<Vec<u64>> {
    (data.d() == 1).then(|| data.y().to_vec())
}

pub fn polio(args: &ReproduceArgs) -> Result<()> {
    let raw = load(&args.input, "data/polio.csv", "polio", POLIO_SCHEMA)?;
    let data = match counts_only(&raw) {
        Some(y) => polio_series(y)?,
        None if raw.d() == 6 && raw.n() == POLIO_MONTHS => raw,
        None => bail!("polio input has n = {}, d = {}: expected {POLIO_SCHEMA}", raw.n(), raw.d()),
    };
    let report = fit_series(&data, &settings(vec![ModelKind::Glm], args.seed))?;
    let (rec, residuals) = diagnosis(&data)?;
    let mut out = OutDir::create(&args.out)?;
    write_fit(&mut out, &report)?;
    write_diagnosis(&mut out, &rec, &residuals)?;
    out.manifest("reproduce polio", args, args.seed)?;
    print!("{}{}", report.text_table(), recommendation_text(&rec));
    finish(report.problems())
}

fn seizure_fit(data: &CountSeries, args: &ReproduceArgs, dir: &Path, coding: Option<DayCoding>) -> Result<Vec<String>> {
    let report = fit_series(data, &settings(vec![ModelKind::Glm, ModelKind::Hmm2], args.seed))?;
    let (rec, residuals) = diagnosis(data)?;
    let mut out = OutDir::create(dir)?;
    write_fit(&mut out, &report)?;
    write_diagnosis(&mut out, &rec, &residuals)?;
    let coding = coding.map(DayCoding::describe).unwrap_or("day column as supplied");
    out.manifest("reproduce seizure", &serde_json::json!({ "args": args, "day_coding": coding }), args.seed)?;
    println!("[{coding}]");
    print!("{}{}", report.text_table(), recommendation_text(&rec));
    Ok(report.problems())
}

pub fn seizure(args: &ReproduceArgs) -> Result<()> {
    let raw = load(&args.input, "data/seizure.csv", "seizure", SEIZURE_SCHEMA)?;
    let problems = match counts_only(&raw) {
        // Which day coding the reference fit used is unknown: fit both.
        Some(y) => {
            if y.len() != SEIZURE_DAYS {
                eprintln!("note: {} days instead of {SEIZURE_DAYS}", y.len());
            }
            let mut problems = Vec::new();
            for coding in DayCoding::ALL {
                let data = seizure_series(y.clone(), coding)?;
                let dir = args.out.join(serde_json::to_value(coding)?.as_str().ok_or_else(|| anyhow!("coding name"))?);
                problems.extend(seizure_fit(&data, args, &dir, Some(coding))?);
            }
            problems
        }
        None if raw.d() == 2 => seizure_fit(&raw, args, &args.out, None)?,
        None => bail!("seizure input has d = {}: expected {SEIZURE_SCHEMA}", raw.d()),
    };
    finish(problems)
}

fn finish(problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        bail!("outputs written, but: {}", problems.join("; "))
    }
}
