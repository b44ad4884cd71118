use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use slowave_core::edf::{read_csv, read_edf};
use slowave_core::eval::{run_cv, CvMode, CvPlan, SiteRole};
use slowave_core::model_io::{self, StoredModel};
use slowave_core::synth::{generate_cohort, read_cohort, write_cohort};
use slowave_core::system::{CohortRunner, SubjectData, TrainedSystem};
use slowave_core::Recording;

use crate::config::{require, RunConfig};
use crate::error::CliError;

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn read_input(path: &Path, csv_fs: f64) -> Result<Recording, CliError> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    Ok(if is_csv { read_csv(path, csv_fs)? } else { read_edf(path)? })
}

fn load_system(path: &Path) -> Result<TrainedSystem, CliError> {
    Ok(model_io::load(path)?.into_system()?)
}

/// Banks every subject of a cohort directory with the run's preprocessing.
fn load_subjects(cfg: &RunConfig) -> Result<Vec<SubjectData>, CliError> {
    let dir = require(&cfg.data, "cohort directory (--data)")?;
    let pre = cfg.system_config()?.preprocess;
    let cohort = read_cohort(dir)?;
    log::info!("banking {} recordings from {}", cohort.len(), dir.display());
    let subjects = cohort
        .par_iter()
        .map(|(rec, truth)| SubjectData::from_truth(rec, truth, &pre))
        .collect::<slowave_core::Result<Vec<_>>>()?;
    Ok(subjects)
}

pub fn synth(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let cohorts = if cfg.cohorts.is_empty() { vec![Default::default()] } else { cfg.cohorts.clone() };
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut total = 0;
    for (k, site) in cohorts.iter().enumerate() {
        let mut site = site.clone();
        site.seed = site.seed.wrapping_add(cfg.seed.wrapping_mul(1_000).wrapping_add(k as u64));
        let cohort = generate_cohort(&site)?;
        total = write_cohort(out, &cohort)?.entries.len();
    }
    log::info!("{total} recordings listed in {}", out.join(slowave_core::synth::MANIFEST).display());
    Ok(())
}

pub fn train(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let sys_cfg = cfg.system_config()?;
    let subjects = load_subjects(cfg)?;
    let channel_pool: Vec<&SubjectData> =
        subjects.iter().filter(|s| matches!(cfg.role(&s.id.site), SiteRole::Full | SiteRole::ChannelOnly)).collect();
    let eeg_pool: Vec<&SubjectData> = subjects.iter().filter(|s| cfg.role(&s.id.site) == SiteRole::Full).collect();
    let system = TrainedSystem::fit(&sys_cfg, cfg.level, &channel_pool, &eeg_pool)?;
    model_io::save(out, &StoredModel::System(Box::new(system)))?;
    Ok(())
}

pub fn predict(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let system = load_system(require(&cfg.model, "model (--model)")?)?;
    let input = require(&cfg.input, "input recording (--input)")?;
    let t = Instant::now();
    let rec = read_input(input, cfg.csv_fs)?;
    let prediction = system.predict(&rec)?;
    let elapsed = t.elapsed().as_secs_f64();
    write_or_print(out, &serde_json::to_string_pretty(&prediction)?)?;
    eprintln!("wall-time {elapsed:.3} s");
    Ok(())
}

pub fn report(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let system = load_system(require(&cfg.model, "model (--model)")?)?;
    let rec = read_input(require(&cfg.input, "input recording (--input)")?, cfg.csv_fs)?;
    let degrees = system.predict(&rec)?.degrees;
    let json = serde_json::to_string_pretty(&degrees)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            let path = dir.join("degrees.json");
            std::fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
            let path = dir.join("scalp.csv");
            std::fs::write(&path, degrees.to_csv()).map_err(|e| CliError::io(&path, e))
        }
        None => write_or_print(None, &json),
    }
}

pub fn eval(cfg: &RunConfig, out: Option<&Path>, jobs: usize) -> Result<(), CliError> {
    let sys_cfg = cfg.system_config()?;
    let subjects = load_subjects(cfg)?;
    let roles: BTreeMap<String, SiteRole> = subjects.iter().map(|s| (s.id.site.clone(), cfg.role(&s.id.site))).collect();
    let runner = CohortRunner::new(&subjects, sys_cfg)?;
    let ids = runner.ids();
    let plan = match cfg.mode {
        CvMode::Loso => CvPlan::loso(&ids, &roles, cfg.level)?,
        CvMode::Loio => CvPlan::loio(&ids, &roles, cfg.level)?,
    };
    log::info!("{} {} folds", plan.folds.len(), cfg.mode);
    let report = run_cv(&plan, &runner, jobs > 1)?;
    let as_json = out.is_some_and(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")));
    let text = if as_json { serde_json::to_string_pretty(&report)? } else { report.to_csv(cfg.system.name()) };
    write_or_print(out, &text)
}
