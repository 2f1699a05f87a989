use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use unlearn_core::{
    calibrate, file_hash, fim_diag_set, forget_and_report, load_checkpoint, load_dataset,
    load_fim, relative_strength, report, rng, save_fim, Calibration, CalibrationOptions, Error,
    FimDiagonal, FimDumpMeta, FimSource, ForgettingReport, GoldenRecord, Hypothesis, NoiseLevel,
    NoiseLevelSpec, PatientDataset, PatientId, PerturbMethod, PerturbSpec, Result, RowStats,
    WeightVector,
};

use crate::config::FileConfig;

use super::CommonArgs;

#[derive(Debug, clap::Args)]
pub struct ForgetArgs {
    /// Dataset file (jsonl).
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint of the trained model to forget from.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Run report output path (json).
    #[arg(long)]
    pub out: PathBuf,
    /// Patients to forget: comma-separated ids, or "auto" to pick the most
    /// edge-like and the most cluster-like patient from the golden sweep.
    #[arg(long, value_delimiter = ',')]
    pub patients: Option<Vec<String>>,
    /// Methods to run (scrub, targeted).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Noise levels to run (low, medium, high).
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<String>>,
    /// Trials per cell; each varies the applied noise seed.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Noise draws averaged per calibration probe.
    #[arg(long)]
    pub eval_draws: Option<usize>,
    /// Fraction of weights perturbed by targeted forgetting.
    #[arg(long)]
    pub topk_fraction: Option<f64>,
    /// Curvature floor used by scrubbing.
    #[arg(long)]
    pub fim_floor: Option<f64>,
    /// Base seed; all cell randomness derives from it.
    #[arg(long)]
    pub base_seed: Option<u64>,
    /// Explicit strength, skipping calibration (runs the named levels as
    /// labels only when combined with --levels).
    #[arg(long)]
    pub strength: Option<f64>,
    /// Calibrate High only and derive Medium and Low as fixed fractions of
    /// the High strength.
    #[arg(long)]
    pub relative_from_high: bool,
    /// Golden sweep report used for auto patient selection and the
    /// golden-standard comparison columns.
    #[arg(long)]
    pub golden: Option<PathBuf>,
    /// Directory for cached curvature dumps.
    #[arg(long)]
    pub fim_cache: Option<PathBuf>,
    /// Worker threads across (patient, method) pairs.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

fn parse_method(s: &str) -> Result<PerturbMethod> {
    match s {
        "scrub" => Ok(PerturbMethod::Scrub),
        "targeted" => Ok(PerturbMethod::Targeted),
        other => Err(Error::InvalidConfig(format!(
            "unknown method {other:?} (scrub or targeted)"
        ))),
    }
}

fn parse_level(s: &str) -> Result<NoiseLevel> {
    match s {
        "low" => Ok(NoiseLevel::Low),
        "medium" => Ok(NoiseLevel::Medium),
        "high" => Ok(NoiseLevel::High),
        other => Err(Error::InvalidConfig(format!(
            "unknown level {other:?} (low, medium or high)"
        ))),
    }
}

/// Most edge-like plus most cluster-like patient from a sweep report.
fn auto_patients(sweep: &report::SweepReportFile) -> Result<Vec<String>> {
    let mut best_edge: Option<(&str, f64)> = None;
    let mut best_cluster: Option<(&str, f64)> = None;
    for rec in &sweep.records {
        let id = rec.golden.forget_patient.as_str();
        let err = rec.golden.golden_df_error;
        match rec.hypothesis {
            Hypothesis::Edge => {
                let better = best_edge.is_none_or(|(bid, berr)| {
                    err > berr || (err == berr && id < bid)
                });
                if better {
                    best_edge = Some((id, err));
                }
            }
            Hypothesis::Cluster => {
                let better = best_cluster.is_none_or(|(bid, berr)| {
                    err < berr || (err == berr && id < bid)
                });
                if better {
                    best_cluster = Some((id, err));
                }
            }
        }
    }
    let mut picked = Vec::new();
    if let Some((id, _)) = best_edge {
        picked.push(id.to_string());
    }
    if let Some((id, _)) = best_cluster {
        picked.push(id.to_string());
    }
    if picked.is_empty() {
        return Err(Error::InvalidConfig(
            "auto patient selection found no sweep records".into(),
        ));
    }
    Ok(picked)
}

/// Compute the dataset curvature diagonal for one patient split, reusing a
/// cached dump when its fingerprint, checkpoint hash and split key match.
fn fim_for(
    weights: &WeightVector,
    dataset: &PatientDataset,
    patient: &PatientId,
    source: FimSource,
    cache: Option<&Path>,
    ckpt_hash: u64,
) -> Result<FimDiagonal> {
    let split_key = format!("{}:{}", match source {
        FimSource::RetainSet => "retain",
        FimSource::ForgetSet => "forget",
        FimSource::SinglePatient => "single",
    }, patient);
    let fingerprint = weights.arch.fingerprint();
    let cache_path = cache.map(|dir| {
        dir.join(format!(
            "fim-{fingerprint:016x}-{ckpt_hash:016x}-{}.bin",
            split_key.replace(':', "-")
        ))
    });
    if let Some(path) = &cache_path {
        if path.exists() {
            if let Ok((fim, meta)) = load_fim(path) {
                if fim.arch_fingerprint == fingerprint
                    && meta.checkpoint_hash == ckpt_hash
                    && meta.split_key == split_key
                    && fim.source == source
                {
                    return Ok(fim);
                }
            }
            // Stale or mismatched dump: fall through and recompute.
        }
    }
    let split = dataset.make_forget_split(patient)?;
    let view = match source {
        FimSource::RetainSet => &split.d_r,
        _ => &split.d_f,
    };
    let fim = fim_diag_set(weights, view, source)?;
    if let Some(path) = &cache_path {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        save_fim(
            path,
            &fim,
            &FimDumpMeta {
                checkpoint_hash: ckpt_hash,
                split_key,
            },
        )?;
    }
    Ok(fim)
}

#[allow(clippy::too_many_arguments)]
fn run_pair(
    weights: &WeightVector,
    dataset: &PatientDataset,
    patient: &PatientId,
    method: PerturbMethod,
    levels: &[NoiseLevel],
    golden: Option<&GoldenRecord>,
    args: &Resolved,
    ckpt_hash: u64,
) -> Vec<report::RunRow> {
    let mut rows = Vec::new();
    let source = match method {
        PerturbMethod::Scrub => FimSource::RetainSet,
        PerturbMethod::Targeted => FimSource::ForgetSet,
    };
    let fim = match fim_for(
        weights,
        dataset,
        patient,
        source,
        args.fim_cache.as_deref(),
        ckpt_hash,
    ) {
        Ok(fim) => fim,
        Err(e) => {
            for &level in levels {
                rows.push(error_row(patient, method, Some(level), format!("curvature: {e}")));
            }
            return rows;
        }
    };
    let split = match dataset.make_forget_split(patient) {
        Ok(s) => s,
        Err(e) => {
            for &level in levels {
                rows.push(error_row(patient, method, Some(level), e.to_string()));
            }
            return rows;
        }
    };
    let test = dataset.test_view();
    let cell_seed = |level: NoiseLevel| {
        rng::mix_str(
            rng::mix_str(rng::mix_str(args.base_seed, patient.as_str()), method.as_str()),
            level.as_str(),
        )
    };
    let template = |level: NoiseLevel| {
        let mut t = match method {
            PerturbMethod::Scrub => PerturbSpec::scrub(0.0, cell_seed(level)),
            PerturbMethod::Targeted => PerturbSpec::targeted(0.0, cell_seed(level)),
        };
        t.topk_fraction = args.topk_fraction;
        t.fim_floor = args.fim_floor;
        t
    };
    let opts = CalibrationOptions {
        eval_draws: args.eval_draws,
        ..CalibrationOptions::default()
    };

    // Resolve a strength per level: explicit, relative to calibrated High,
    // or calibrated per level.
    let mut strengths: BTreeMap<NoiseLevel, (f64, Option<Calibration>)> = BTreeMap::new();
    if let Some(s) = args.strength {
        for &level in levels {
            strengths.insert(level, (s, None));
        }
    } else if args.relative_from_high {
        let spec = NoiseLevelSpec::high();
        match calibrate(weights, &fim, &template(NoiseLevel::High), &spec, &split, &opts) {
            Ok(cal) => {
                for &level in levels {
                    strengths.insert(level, (relative_strength(level, cal.strength), None));
                }
                strengths.insert(NoiseLevel::High, (cal.strength, Some(cal)));
            }
            Err(e) => {
                for &level in levels {
                    rows.push(error_row(
                        patient,
                        method,
                        Some(level),
                        format!("high calibration: {e}"),
                    ));
                }
                return rows;
            }
        }
    } else {
        for &level in levels {
            match calibrate(
                weights,
                &fim,
                &template(level),
                &NoiseLevelSpec::of(level),
                &split,
                &opts,
            ) {
                Ok(cal) => {
                    strengths.insert(level, (cal.strength, Some(cal)));
                }
                Err(e) => {
                    rows.push(error_row(patient, method, Some(level), e.to_string()));
                }
            }
        }
    }

    for &level in levels {
        let Some((strength, cal)) = strengths.get(&level) else {
            continue; // the calibration failure row is already recorded
        };
        let mut trials: Vec<ForgettingReport> = Vec::with_capacity(args.trials);
        let mut failure: Option<String> = None;
        for t in 0..args.trials {
            let spec = template(level)
                .with_strength(*strength)
                .with_noise_seed(rng::mix_u64(rng::mix_str(cell_seed(level), "trial"), t as u64));
            match forget_and_report(weights, &split, &test, &fim, &spec, Some(level), golden) {
                Ok(rep) => trials.push(rep),
                Err(e) => {
                    failure = Some(format!("trial {t}: {e}"));
                    break;
                }
            }
        }
        let mean = RowStats::mean_of(&trials);
        let std_dev = RowStats::std_of(&trials);
        rows.push(report::RunRow {
            patient: patient.to_string(),
            method,
            level: Some(level),
            calibration: cal.as_ref().map(|c| report::CalibrationSummary {
                strength: c.strength,
                mean_df_error: c.mean_df_error,
                trace: c.trace.clone(),
            }),
            trials,
            mean,
            std_dev,
            error: failure,
        });
    }
    rows
}

fn error_row(
    patient: &PatientId,
    method: PerturbMethod,
    level: Option<NoiseLevel>,
    message: String,
) -> report::RunRow {
    report::RunRow {
        patient: patient.to_string(),
        method,
        level,
        calibration: None,
        trials: Vec::new(),
        mean: None,
        std_dev: None,
        error: Some(message),
    }
}

struct Resolved {
    trials: usize,
    eval_draws: usize,
    topk_fraction: f64,
    fim_floor: f64,
    base_seed: u64,
    strength: Option<f64>,
    relative_from_high: bool,
    fim_cache: Option<PathBuf>,
    workers: usize,
}

pub fn run(args: ForgetArgs) -> Result<bool> {
    let total = Instant::now();
    let file = FileConfig::load(args.common.config.as_deref())?;
    let fd = file.forget.unwrap_or_default();
    let dataset = load_dataset(&args.data)?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let ckpt_hash = file_hash(&args.checkpoint)?;

    let methods: Vec<PerturbMethod> = args
        .methods
        .or(fd.methods)
        .unwrap_or_else(|| vec!["scrub".into(), "targeted".into()])
        .iter()
        .map(|s| parse_method(s))
        .collect::<Result<_>>()?;
    let levels: Vec<NoiseLevel> = args
        .levels
        .or(fd.levels)
        .unwrap_or_else(|| vec!["low".into(), "medium".into(), "high".into()])
        .iter()
        .map(|s| parse_level(s))
        .collect::<Result<_>>()?;

    let golden_report: Option<report::SweepReportFile> = match &args.golden {
        Some(path) => Some(report::load_json(path)?),
        None => None,
    };
    let patient_names = match args.patients.or(fd.patients) {
        Some(names) if names.len() == 1 && names[0] == "auto" => {
            let sweep = golden_report.as_ref().ok_or_else(|| {
                Error::InvalidConfig("--patients auto needs --golden <sweep report>".into())
            })?;
            auto_patients(sweep)?
        }
        Some(names) => names,
        None => {
            return Err(Error::InvalidConfig(
                "no patients requested: pass --patients <ids> or --patients auto".into(),
            ))
        }
    };
    let patients: Vec<PatientId> = patient_names
        .iter()
        .map(|n| PatientId::new(n.clone()))
        .collect();

    let resolved = Resolved {
        trials: args.trials.or(fd.trials).unwrap_or(3),
        eval_draws: args.eval_draws.or(fd.eval_draws).unwrap_or(5),
        topk_fraction: args
            .topk_fraction
            .or(fd.topk_fraction)
            .unwrap_or(unlearn_core::forget::DEFAULT_TOPK_FRACTION),
        fim_floor: args
            .fim_floor
            .or(fd.fim_floor)
            .unwrap_or(unlearn_core::forget::DEFAULT_FIM_FLOOR),
        base_seed: args.base_seed.or(fd.base_seed).unwrap_or(0),
        strength: args.strength,
        relative_from_high: args.relative_from_high || fd.relative_from_high.unwrap_or(false),
        fim_cache: args.fim_cache,
        workers: args.workers.or(fd.workers).unwrap_or(1),
    };

    let golden_by_patient: BTreeMap<&str, &GoldenRecord> = golden_report
        .as_ref()
        .map(|s| {
            s.records
                .iter()
                .map(|r| (r.golden.forget_patient.as_str(), &r.golden))
                .collect()
        })
        .unwrap_or_default();

    // One work unit per (patient, method): levels inside a unit share the
    // curvature diagonal and, in relative mode, the High calibration.
    let pairs: Vec<(PatientId, PerturbMethod)> = patients
        .iter()
        .flat_map(|p| methods.iter().map(move |m| (p.clone(), *m)))
        .collect();
    let work = Instant::now();
    let results = unlearn_core::parallel::run_indexed(pairs.len(), resolved.workers, |i| {
        let (patient, method) = &pairs[i];
        run_pair(
            &ckpt.weights,
            &dataset,
            patient,
            *method,
            &levels,
            golden_by_patient.get(patient.as_str()).copied(),
            &resolved,
            ckpt_hash,
        )
    });
    let work_secs = work.elapsed().as_secs_f64();

    let mut rows: Vec<report::RunRow> = results.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (&a.patient, a.method.as_str(), a.level.map(|l| l.as_str()))
            .cmp(&(&b.patient, b.method.as_str(), b.level.map(|l| l.as_str())))
    });
    let partial = rows.iter().any(|r| r.error.is_some());

    let config_echo = serde_json::json!({
        "data": args.data.display().to_string(),
        "checkpoint": args.checkpoint.display().to_string(),
        "checkpoint_hash": format!("{ckpt_hash:016x}"),
        "patients": patient_names,
        "methods": methods.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        "levels": levels.iter().map(|l| l.as_str()).collect::<Vec<_>>(),
        "trials": resolved.trials,
        "eval_draws": resolved.eval_draws,
        "topk_fraction": resolved.topk_fraction,
        "fim_floor": resolved.fim_floor,
        "base_seed": resolved.base_seed,
        "strength": resolved.strength,
        "relative_from_high": resolved.relative_from_high,
        "golden": args.golden.as_ref().map(|p| p.display().to_string()),
    });
    let mut timings = BTreeMap::new();
    timings.insert("cells_seconds".to_string(), work_secs);
    timings.insert("total_seconds".to_string(), total.elapsed().as_secs_f64());
    let out = report::RunReportFile {
        schema_version: report::SCHEMA_VERSION,
        kind: report::FORGET_KIND.to_string(),
        tool_version: report::tool_version(),
        config: config_echo,
        rows,
        timings,
    };
    report::save_json(&args.out, &out)?;
    println!(
        "forget: {} rows ({} with errors) -> {}",
        out.rows.len(),
        out.rows.iter().filter(|r| r.error.is_some()).count(),
        args.out.display()
    );
    Ok(partial)
}
