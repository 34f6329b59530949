use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pdmcount::io::write_count_csv;
use pdmcount::simulation::{simulate_stream, SimConfig, SimSidecar};
use pdmcount::study::{preset, run_study, write_ledger, StudyDesign, StudySummary};
use pdmcount::ModelKind;

use crate::output::{num, table, OutDir};
use crate::{ReproduceArgs, SimulateArgs, StudyArgs, Target};

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut config: SimConfig = match (&args.preset, &args.config) {
        (Some(name), _) => preset(name)?.sim,
        (None, Some(path)) => {
            serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, None) => bail!("either --preset or --config is required"),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let sim = simulate_stream(&config, args.replicate)?;
    let mut out = OutDir::create(&args.out)?;
    let file = fs::File::create(out.path("series.csv"))?;
    write_count_csv(&sim.series, file)?;
    out.record("series.csv");
    out.json("truth.json", &SimSidecar::new(&config, args.replicate)?)?;
    out.manifest("simulate", args, Some(config.seed))?;
    println!("wrote {} observations to {}", sim.series.n(), args.out.display());
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn configure(mut design: StudyDesign, reps: Option<usize>, seed: Option<u64>) -> StudyDesign {
    if let Some(r) = reps {
        design.replicates = r;
    }
    if let Some(s) = seed {
        design.sim.seed = s;
    }
    design
}

/// Per-coefficient summary lines, three decimals.
pub fn summary_text(s: &StudySummary) -> String {
    let header: Vec<String> = ["estimator", "coefficient", "truth", "mean", "bias", "SSD", "SE(White)", "SE(DDW)", "n"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = s
        .coefficients
        .iter()
        .map(|c| {
            vec![
                c.estimator.to_string(),
                c.coefficient.clone(),
                num(Some(c.truth)),
                num(Some(c.mean)),
                num(Some(c.bias)),
                num(Some(c.ssd)),
                num(c.mean_se_white),
                num(c.mean_se_ddw),
                c.count.to_string(),
            ]
        })
        .collect();
    let mut text = format!("study {} ({} replicates)\n", s.study, s.replicates);
    text.push_str(&table(&header, &rows));
    for e in &s.estimators {
        text.push_str(&format!("{} convergence {:.3}", e.estimator, e.convergence_rate));
        if !e.failed.is_empty() {
            text.push_str(&format!(", failed replicates {:?}", e.failed));
        }
        text.push('\n');
    }
    for r in &s.ratios {
        text.push_str(&format!(
            "SV({}) / SV({}) for {}: {:.3} over {} pairs\n",
            r.reference, r.other, r.coefficient, r.ratio, r.pairs
        ));
    }
    text
}

/// Runs a design and writes its ledger, summary and ratios.
fn run_design(design: &StudyDesign, threads: Option<usize>, out: &mut OutDir, prefix: &str) -> Result<StudySummary> {
    let (rows, summary) = run_study(design, threads).with_context(|| format!("study {}", design.name))?;
    let name = format!("{prefix}replicates.csv");
    write_ledger(&rows, fs::File::create(out.path(&name))?)?;
    out.record(&name);
    out.json(&format!("{prefix}summary.json"), &summary)?;
    out.csv(&format!("{prefix}ratios.csv"), &summary.ratios)?;
    out.text(&format!("{prefix}summary.txt"), &summary_text(&summary))?;
    Ok(summary)
}

pub fn study(args: &StudyArgs) -> Result<()> {
    let design = match (&args.preset, &args.design) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => {
            StudyDesign::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, None) => bail!("either --preset or --design is required"),
    };
    let design = configure(design, args.reps, args.seed);
    let mut out = OutDir::create(&args.out)?;
    out.json("design.json", &design)?;
    let summary = run_design(&design, args.threads, &mut out, "")?;
    out.manifest("study", args, Some(design.sim.seed))?;
    print!("{}", summary_text(&summary));
    Ok(())
}

fn presets_for(target: Target) -> Vec<&'static str> {
    match target {
        Target::Table2 => {
            vec!["se-table2-hmm-binary", "se-table2-hmm-trend", "se-table2-glmm-binary", "se-table2-glmm-trend"]
        }
        Target::Fig2 => vec!["study1-low", "study1-med", "study1-high"],
        Target::Fig3 => vec!["study2-hmm4-low", "study2-hmm4-med", "study2-hmm4-high"],
        Target::Fig4 => vec![
            "study2-glmm-low",
            "study2-glmm-med",
            "study2-glmm-high",
            "study2-glmm-binary-low",
            "study2-glmm-binary-med",
            "study2-glmm-binary-high",
        ],
        Target::Polio | Target::Seizure => Vec::new(),
    }
}

/// Slope SSDs and mean SEs in the layout of the SE table.
pub fn table2_text(rows: &[(&str, StudySummary)]) -> String {
    let header: Vec<String> =
        ["true model", "covariate", "HMM SSD", "HMM SE(White)", "GLM SSD", "GLM SE(DDW)", "GLM SE(White)"]
            .map(String::from)
            .to_vec();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, s)| {
            let model = if name.contains("-hmm-") { "Poisson 2-state HMM" } else { "Poisson GLMM" };
            let covariate = if name.ends_with("binary") { "binary" } else { "trend" };
            let hmm = s.coefficient(ModelKind::Hmm2, 1);
            let glm = s.coefficient(ModelKind::Glm, 1);
            vec![
                model.into(),
                covariate.into(),
                num(hmm.map(|c| c.ssd)),
                num(hmm.and_then(|c| c.mean_se_white)),
                num(glm.map(|c| c.ssd)),
                num(glm.and_then(|c| c.mean_se_ddw)),
                num(glm.and_then(|c| c.mean_se_white)),
            ]
        })
        .collect();
    table(&header, &body)
}

pub fn reproduce(args: &ReproduceArgs) -> Result<()> {
    let mut out = OutDir::create(&args.out)?;
    let mut summaries = Vec::new();
    for name in presets_for(args.target) {
        let design = configure(preset(name)?, args.reps, args.seed);
        let summary = run_design(&design, args.threads, &mut out, &format!("{name}."))?;
        summaries.push((name, summary));
    }
    let ratios: Vec<_> = summaries.iter().flat_map(|(_, s)| s.ratios.iter().cloned()).collect();
    out.csv("ratios.csv", &ratios)?;
    if args.target == Target::Table2 {
        let text = table2_text(&summaries);
        out.text("table2.txt", &text)?;
        print!("{text}");
    } else {
        for (_, s) in &summaries {
            for r in s.ratios.iter().filter(|r| r.index == 1) {
                println!(
                    "{:<24} {:<6} SV({}) / SV({}) = {:.3}",
                    r.study,
                    r.level.map(|l| l.to_string()).unwrap_or_default(),
                    r.reference,
                    r.other,
                    r.ratio
                );
            }
        }
    }
    out.manifest("reproduce", args, args.seed)?;
    Ok(())
}
