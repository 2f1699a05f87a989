use std::fmt::Write as _;
use std::path::PathBuf;

use unlearn_core::{report, Error, NoiseLevel, PerturbMethod, Result};

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// Sweep or forgetting report file (json).
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for plain columnar plot data (histogram bins,
    /// error-vs-strength curves).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(serde::Deserialize)]
struct KindProbe {
    kind: String,
}

pub fn run(args: ReportArgs) -> Result<bool> {
    let probe: KindProbe = report::load_json(&args.input)?;
    match probe.kind.as_str() {
        report::SWEEP_KIND => render_sweep(&args),
        report::FORGET_KIND => render_forget(&args),
        other => Err(Error::CorruptFile(format!("unknown report kind {other:?}"))),
    }
}

fn render_sweep(args: &ReportArgs) -> Result<bool> {
    let sweep: report::SweepReportFile = report::load_json(&args.input)?;
    println!(
        "golden retrain sweep: {} patients, {} failures, epochs {}",
        sweep.records.len(),
        sweep.failures.len(),
        sweep.epochs
    );
    println!(
        "edge proportion at threshold {:.2}: {:.3}",
        sweep.threshold, sweep.edge_proportion
    );
    println!();
    println!("{:>8} {:>8} {:>6}", "error%", "", "count");
    let max = sweep.histogram.counts.iter().copied().max().unwrap_or(1).max(1);
    for (i, &count) in sweep.histogram.counts.iter().enumerate() {
        let lo = sweep.histogram.bin_edges[i];
        let hi = sweep.histogram.bin_edges[i + 1];
        let bar = "#".repeat(count * 40 / max);
        println!("{lo:>4.0}-{hi:<4.0}{count:>9} {bar}");
    }
    if !sweep.failures.is_empty() {
        println!();
        println!("failures:");
        for f in &sweep.failures {
            println!("  {}: {}", f.patient, f.error);
        }
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let mut hist = String::from("bin_lo\tbin_hi\tcount\n");
        for (i, &count) in sweep.histogram.counts.iter().enumerate() {
            writeln!(
                hist,
                "{}\t{}\t{}",
                sweep.histogram.bin_edges[i],
                sweep.histogram.bin_edges[i + 1],
                count
            )
            .expect("write to string");
        }
        std::fs::write(dir.join("histogram.tsv"), hist)?;
        let mut recs = String::from("patient\tgolden_df_error\tgolden_test_error\thypothesis\n");
        for r in &sweep.records {
            writeln!(
                recs,
                "{}\t{}\t{}\t{:?}",
                r.golden.forget_patient, r.golden.golden_df_error, r.golden.golden_test_error,
                r.hypothesis
            )
            .expect("write to string");
        }
        std::fs::write(dir.join("golden_records.tsv"), recs)?;
        println!();
        println!("plot data -> {}", dir.display());
    }
    Ok(false)
}

fn fmt_cell(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.3}±{s:.3}"),
        (Some(m), None) => format!("{m:.3}"),
        _ => "-".to_string(),
    }
}

fn render_forget(args: &ReportArgs) -> Result<bool> {
    let run: report::RunReportFile = report::load_json(&args.input)?;
    if run.rows.is_empty() {
        println!("no rows");
        return Ok(false);
    }
    let levels = [NoiseLevel::Low, NoiseLevel::Medium, NoiseLevel::High];
    let methods = [PerturbMethod::Scrub, PerturbMethod::Targeted];
    let mut patients: Vec<&str> = run.rows.iter().map(|r| r.patient.as_str()).collect();
    patients.dedup();

    // One row group per patient: the forget-set error line, then the test
    // error line, with golden-standard values first when present.
    let width = 16;
    print!("{:<10} {:<7} {:>9}", "patient", "set", "golden");
    for level in levels {
        for method in methods {
            print!(" {:>width$}", format!("{}/{}", level.as_str(), method.as_str()));
        }
    }
    println!();
    for patient in patients {
        let find = |m: PerturbMethod, l: NoiseLevel| {
            run.rows
                .iter()
                .find(|r| r.patient == patient && r.method == m && r.level == Some(l))
        };
        let golden = run
            .rows
            .iter()
            .filter(|r| r.patient == patient)
            .find_map(|r| r.trials.first().and_then(|t| t.golden.as_ref()));
        for (set, pick_mean, pick_std, golden_value) in [
            (
                "df",
                (|s: &report::RowStats| s.df_error) as fn(&report::RowStats) -> f64,
                (|s: &report::RowStats| s.df_error) as fn(&report::RowStats) -> f64,
                golden.map(|g| g.golden_df_error),
            ),
            (
                "test",
                (|s: &report::RowStats| s.test_error) as fn(&report::RowStats) -> f64,
                (|s: &report::RowStats| s.test_error) as fn(&report::RowStats) -> f64,
                golden.map(|g| g.golden_test_error),
            ),
        ] {
            print!(
                "{:<10} {:<7} {:>9}",
                patient,
                set,
                golden_value.map_or("-".to_string(), |g| format!("{g:.3}"))
            );
            for level in levels {
                for method in methods {
                    let cell = match find(method, level) {
                        Some(row) if row.error.is_some() => "error".to_string(),
                        Some(row) => fmt_cell(
                            row.mean.as_ref().map(pick_mean),
                            row.std_dev.as_ref().map(pick_std),
                        ),
                        None => "-".to_string(),
                    };
                    print!(" {cell:>width$}");
                }
            }
            println!();
        }
    }
    let errors: Vec<&report::RunRow> = run.rows.iter().filter(|r| r.error.is_some()).collect();
    if !errors.is_empty() {
        println!();
        println!("failed cells:");
        for row in errors {
            println!(
                "  {} {} {}: {}",
                row.patient,
                row.method.as_str(),
                row.level.map(|l| l.as_str()).unwrap_or("-"),
                row.error.as_deref().unwrap_or("")
            );
        }
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        for row in &run.rows {
            if let Some(cal) = &row.calibration {
                let mut curve = String::from("strength\tmean_df_error\n");
                for probe in &cal.trace {
                    writeln!(curve, "{}\t{}", probe.strength, probe.mean_df_error)
                        .expect("write to string");
                }
                let name = format!(
                    "error_vs_strength-{}-{}-{}.tsv",
                    row.patient,
                    row.method.as_str(),
                    row.level.map(|l| l.as_str()).unwrap_or("none")
                );
                std::fs::write(dir.join(name), curve)?;
            }
        }
        println!();
        println!("plot data -> {}", dir.display());
    }
    Ok(false)
}
