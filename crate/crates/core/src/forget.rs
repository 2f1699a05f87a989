//! Weight-perturbation forgetting operators and noise calibration.
//!
//! Two operators share one shape: add zero-mean Gaussian noise to the
//! weights, with a per-weight scale set by a fourth root of a Fisher
//! diagonal and a single combined strength scalar.
//!
//! * Scrubbing scales noise by the *inverse* fourth root of the retain-set
//!   diagonal: weights the retained patients rely on receive the least
//!   noise, everything else is degraded.
//! * Targeted forgetting scales noise by the *positive* fourth root of the
//!   forget-set diagonal and touches only the top fraction of weights most
//!   informative about the forgotten patient.
//!
//! Calibration searches the strength scalar until the mean post-noise
//! error on the forget set lands in a named band (Low / Medium / High).

use serde::{Deserialize, Serialize};

use crate::data::{DatasetView, ForgetSplit, PatientId};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::fisher::FimDiagonal;
use crate::model::WeightVector;
use crate::oracle::GoldenRecord;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMethod {
    Scrub,
    Targeted,
}

impl PerturbMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbMethod::Scrub => "scrub",
            PerturbMethod::Targeted => "targeted",
        }
    }
}

/// The written operators carry a normally distributed error term; the
/// default draws it per weight. The deterministic offset replaces every
/// draw with 1.0, for ablations and hand-checkable tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Gaussian,
    DeterministicOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub method: PerturbMethod,
    /// Combined strength scalar (the lambda-sigma-squared product, tuned as
    /// one knob). The per-weight noise scale is `strength^(1/4)` times the
    /// Fisher factor.
    pub strength: f64,
    /// Targeted only: fraction of weights to perturb.
    pub topk_fraction: f64,
    /// Scrub only: curvature entries are clamped here before inversion so
    /// the noise scale stays bounded.
    pub fim_floor: f64,
    pub noise_seed: u64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
}

pub const DEFAULT_TOPK_FRACTION: f64 = 0.01;
pub const DEFAULT_FIM_FLOOR: f64 = 1e-8;

impl PerturbSpec {
    pub fn scrub(strength: f64, noise_seed: u64) -> Self {
        Self {
            method: PerturbMethod::Scrub,
            strength,
            topk_fraction: DEFAULT_TOPK_FRACTION,
            fim_floor: DEFAULT_FIM_FLOOR,
            noise_seed,
            noise_mode: NoiseMode::Gaussian,
        }
    }

    pub fn targeted(strength: f64, noise_seed: u64) -> Self {
        Self {
            method: PerturbMethod::Targeted,
            strength,
            topk_fraction: DEFAULT_TOPK_FRACTION,
            fim_floor: DEFAULT_FIM_FLOOR,
            noise_seed,
            noise_mode: NoiseMode::Gaussian,
        }
    }

    pub fn with_strength(mut self, strength: f64) -> Self {
        self.strength = strength;
        self
    }

    pub fn with_noise_seed(mut self, seed: u64) -> Self {
        self.noise_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::InvalidConfig("strength must be >= 0 and finite".into()));
        }
        match self.method {
            PerturbMethod::Targeted => {
                if !(self.topk_fraction > 0.0 && self.topk_fraction <= 1.0) {
                    return Err(Error::InvalidConfig(
                        "topk_fraction must be in (0, 1]".into(),
                    ));
                }
            }
            PerturbMethod::Scrub => {
                if !(self.fim_floor > 0.0 && self.fim_floor.is_finite()) {
                    return Err(Error::InvalidConfig("fim_floor must be > 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Added-noise accounting. The mean over all weights and the mean over the
/// perturbed subset are both reported because the published averages do not
/// say which convention they use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbReport {
    pub mean_abs_noise_all_weights: f64,
    pub mean_abs_noise_perturbed_weights: f64,
    pub n_perturbed: usize,
    pub strength_used: f64,
}

/// Indices of the `ceil(fraction * len)` largest entries; ties broken by
/// the lower index.
pub fn topk_indices(values: &[f64], fraction: f64) -> Vec<usize> {
    let k = ((fraction * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("finite curvature entries")
            .then(a.cmp(&b))
    });
    let mut top: Vec<usize> = order.into_iter().take(k).collect();
    top.sort_unstable();
    top
}

/// Per-weight noise scales before any noise is drawn. For scrubbing the
/// scale is non-increasing in the curvature entry; for targeted forgetting
/// non-decreasing (and zero off the top-k mask).
pub fn noise_scales(fim: &FimDiagonal, spec: &PerturbSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let root_strength = spec.strength.powf(0.25);
    match spec.method {
        PerturbMethod::Scrub => Ok(fim
            .values
            .iter()
            .map(|&f| root_strength * f.max(spec.fim_floor).powf(-0.25))
            .collect()),
        PerturbMethod::Targeted => {
            let mut scales = vec![0.0; fim.values.len()];
            for &i in &topk_indices(&fim.values, spec.topk_fraction) {
                scales[i] = root_strength * fim.values[i].powf(0.25);
            }
            Ok(scales)
        }
    }
}

fn draw_noise(spec: &PerturbSpec, n: usize) -> Vec<f64> {
    match spec.noise_mode {
        NoiseMode::Gaussian => {
            let mut stream = rng::substream(spec.noise_seed, "perturb");
            let mut noise = vec![0.0; n];
            rng::fill_standard_normal(&mut stream, &mut noise);
            noise
        }
        NoiseMode::DeterministicOffset => vec![1.0; n],
    }
}

fn apply(
    w: &WeightVector,
    fim: &FimDiagonal,
    spec: &PerturbSpec,
) -> Result<(WeightVector, PerturbReport)> {
    fim.check_matches(w)?;
    let scales = noise_scales(fim, spec)?;
    let noise = draw_noise(spec, w.len());
    let mut out = w.clone();
    let mut total_abs = 0.0;
    for i in 0..out.values.len() {
        let delta = noise[i] * scales[i];
        out.values[i] += delta;
        total_abs += delta.abs();
    }
    let n_perturbed = match spec.method {
        PerturbMethod::Scrub => out.values.len(),
        PerturbMethod::Targeted => {
            let k = (spec.topk_fraction * fim.values.len() as f64).ceil() as usize;
            k.clamp(1, fim.values.len())
        }
    };
    out.check_finite("perturbed weights")?;
    let report = PerturbReport {
        mean_abs_noise_all_weights: total_abs / out.values.len() as f64,
        mean_abs_noise_perturbed_weights: total_abs / n_perturbed as f64,
        n_perturbed,
        strength_used: spec.strength,
    };
    Ok((out, report))
}

/// Scrubbing: noise scaled by the inverse fourth root of the retain-set
/// diagonal, every weight perturbed.
pub fn scrub(
    w: &WeightVector,
    fim_retain: &FimDiagonal,
    spec: &PerturbSpec,
) -> Result<(WeightVector, PerturbReport)> {
    debug_assert_eq!(spec.method, PerturbMethod::Scrub);
    apply(w, fim_retain, spec)
}

/// Targeted forgetting: noise scaled by the positive fourth root of the
/// forget-set diagonal, restricted to the top-k most informative weights.
pub fn targeted_forget(
    w: &WeightVector,
    fim_forget: &FimDiagonal,
    spec: &PerturbSpec,
) -> Result<(WeightVector, PerturbReport)> {
    debug_assert_eq!(spec.method, PerturbMethod::Targeted);
    apply(w, fim_forget, spec)
}

pub fn perturb(
    w: &WeightVector,
    fim: &FimDiagonal,
    spec: &PerturbSpec,
) -> Result<(WeightVector, PerturbReport)> {
    apply(w, fim, spec)
}

/// Named forgetting levels: target error on the forget set after the
/// operator runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLevel {
    Low,
    Medium,
    High,
}

impl NoiseLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseLevel::Low => "low",
            NoiseLevel::Medium => "medium",
            NoiseLevel::High => "high",
        }
    }
}

/// A level plus its target band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevelSpec {
    pub name: NoiseLevel,
    pub target_df_error: f64,
    pub tolerance: f64,
}

impl NoiseLevelSpec {
    pub fn low() -> Self {
        Self {
            name: NoiseLevel::Low,
            target_df_error: 0.14,
            tolerance: 0.05,
        }
    }

    pub fn medium() -> Self {
        Self {
            name: NoiseLevel::Medium,
            target_df_error: 0.85,
            tolerance: 0.05,
        }
    }

    /// High means every forget sample misclassified; the only slack is one
    /// sample's worth of error.
    pub fn high() -> Self {
        Self {
            name: NoiseLevel::High,
            target_df_error: 1.0,
            tolerance: 0.0,
        }
    }

    pub fn of(level: NoiseLevel) -> Self {
        match level {
            NoiseLevel::Low => Self::low(),
            NoiseLevel::Medium => Self::medium(),
            NoiseLevel::High => Self::high(),
        }
    }

    /// Acceptance band given the forget-set size.
    pub fn band(&self, n_forget_samples: usize) -> (f64, f64) {
        if self.tolerance == 0.0 {
            let slack = 1.0 / n_forget_samples.max(1) as f64;
            (self.target_df_error - slack, self.target_df_error)
        } else {
            (
                self.target_df_error - self.tolerance,
                (self.target_df_error + self.tolerance).min(1.0),
            )
        }
    }
}

/// Alternative protocol: derive Medium and Low directly from a calibrated
/// High strength instead of searching for each band.
pub fn relative_strength(level: NoiseLevel, high_strength: f64) -> f64 {
    match level {
        NoiseLevel::High => high_strength,
        NoiseLevel::Medium => 0.667 * high_strength,
        NoiseLevel::Low => 0.300 * high_strength,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Noise draws averaged per probed strength.
    pub eval_draws: usize,
    /// Geometric bracket expansions before giving up.
    pub max_bracket: usize,
    /// Bisection steps before giving up.
    pub max_bisect: usize,
    pub initial_strength: f64,
    /// Expansion step. The usable strength window of an operator can span
    /// less than a decade, so the expansion must sample densely enough not
    /// to step over it.
    pub expand_factor: f64,
    /// Expansion stops past this strength; by then every operator has long
    /// saturated.
    pub max_strength: f64,
    /// After a first in-band strength is found, bisect downward this many
    /// steps toward the smallest strength that still reaches the band. The
    /// level names the strength at which the operator *reaches* the target
    /// error, so the calibrated value is the entry threshold, not an
    /// arbitrary point past it.
    pub refine_steps: usize,
    /// Probes per expansion step. The probe means are noisy near the band
    /// entry, and a single miss would push the search far past it.
    pub attempts_per_step: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            eval_draws: 5,
            max_bracket: 256,
            max_bisect: 64,
            initial_strength: 1e-12,
            expand_factor: 2.0,
            max_strength: 1e32,
            refine_steps: 24,
            attempts_per_step: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProbe {
    pub strength: f64,
    pub mean_df_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub level: NoiseLevel,
    pub strength: f64,
    pub mean_df_error: f64,
    pub report: PerturbReport,
    /// Every probed (strength, error) pair, in probe order.
    pub trace: Vec<CalibrationProbe>,
}

/// Mean forget-set error over `eval_draws` noise seeds at one strength.
/// Draw seeds are derived from the probe index, so each probe is an
/// independent estimate of the mean; at high strengths the post-noise
/// argmax is scale-invariant per realization, and reusing one realization
/// across probes would freeze the search onto a single outcome.
fn probe(
    w: &WeightVector,
    fim: &FimDiagonal,
    template: &PerturbSpec,
    strength: f64,
    probe_index: usize,
    d_f: &DatasetView<'_>,
    opts: &CalibrationOptions,
) -> Result<(f64, PerturbReport)> {
    let mut err_sum = 0.0;
    let mut noise_all = 0.0;
    let mut noise_masked = 0.0;
    let mut n_perturbed = 0;
    let probe_seed = rng::mix_u64(template.noise_seed, probe_index as u64);
    for draw in 0..opts.eval_draws {
        let spec = template
            .clone()
            .with_strength(strength)
            .with_noise_seed(rng::mix_u64(probe_seed, draw as u64));
        let (perturbed, report) = apply(w, fim, &spec)?;
        err_sum += evaluate(&perturbed, d_f)?.error;
        noise_all += report.mean_abs_noise_all_weights;
        noise_masked += report.mean_abs_noise_perturbed_weights;
        n_perturbed = report.n_perturbed;
    }
    let draws = opts.eval_draws as f64;
    Ok((
        err_sum / draws,
        PerturbReport {
            mean_abs_noise_all_weights: noise_all / draws,
            mean_abs_noise_perturbed_weights: noise_masked / draws,
            n_perturbed,
            strength_used: strength,
        },
    ))
}

/// Search the strength scalar until the mean forget-set error lands in the
/// level's band: geometric expansion to bracket the band, then bisection on
/// log-strength. Errors out explicitly when the band cannot be reached
/// (saturation below the band) or the search does not converge.
pub fn calibrate(
    w: &WeightVector,
    fim: &FimDiagonal,
    template: &PerturbSpec,
    level: &NoiseLevelSpec,
    split: &ForgetSplit<'_>,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    if opts.eval_draws == 0 {
        return Err(Error::InvalidConfig("eval_draws must be >= 1".into()));
    }
    let d_f = &split.d_f;
    let (band_lo, band_hi) = level.band(d_f.n_samples());
    let mut trace = Vec::new();
    let mut run_probe = |strength: f64| -> Result<(f64, PerturbReport)> {
        let (err, report) = probe(w, fim, template, strength, trace.len(), d_f, opts)?;
        trace.push(CalibrationProbe {
            strength,
            mean_df_error: err,
        });
        Ok((err, report))
    };

    // Expand upward from a negligible strength until the error reaches the
    // band (or provably saturates below it).
    let mut below_s = opts.initial_strength;
    let (below_err, _) = run_probe(below_s)?;
    if below_err > band_hi {
        // Already past the band with almost no noise: the model's base
        // forget error sits above the target; no strength can get under it.
        return Err(Error::BandUnreachable {
            band_lo,
            band_hi,
            saturation: below_err,
        });
    }
    let mut hit: Option<(f64, f64, PerturbReport)> = None;
    if below_err >= band_lo {
        // In band at the smallest strength; nothing below it to refine.
        below_s = 0.0;
    }
    let mut max_seen = below_err;
    let mut above: Option<f64> = None;
    if hit.is_none() && below_err < band_lo {
        let mut s = below_s;
        'expand: for _ in 0..opts.max_bracket {
            if s > opts.max_strength {
                break;
            }
            s *= opts.expand_factor;
            for _ in 0..opts.attempts_per_step.max(1) {
                let (err, report) = run_probe(s)?;
                max_seen = max_seen.max(err);
                if err >= band_lo {
                    if err <= band_hi {
                        hit = Some((s, err, report));
                    } else {
                        above = Some(s);
                    }
                    break 'expand;
                }
            }
            below_s = s;
        }
    }

    // Bisection on log strength between the last below-band strength and
    // the first above-band strength.
    if hit.is_none() {
        let mut above_s = above.ok_or(Error::BandUnreachable {
            band_lo,
            band_hi,
            saturation: max_seen,
        })?;
        let mut last_err = max_seen;
        for _ in 0..opts.max_bisect {
            let mid = (below_s.ln() * 0.5 + above_s.ln() * 0.5).exp();
            if !(mid > below_s && mid < above_s) {
                break; // interval exhausted at float resolution
            }
            let (err, report) = run_probe(mid)?;
            last_err = err;
            if err >= band_lo && err <= band_hi {
                hit = Some((mid, err, report));
                break;
            }
            if err < band_lo {
                below_s = mid;
            } else {
                above_s = mid;
            }
        }
        if hit.is_none() {
            return Err(Error::CalibrationNoConverge {
                iterations: trace.len(),
                band_lo,
                band_hi,
                last_error: last_err,
            });
        }
    }

    // Refine downward toward the band-entry threshold. Probes are noisy
    // estimates, so a single miss at a midpoint is weak evidence that the
    // band is out of reach there; only two misses in a row raise the floor.
    let (mut best_s, mut best_err, mut best_report) = hit.expect("set above");
    if below_s > 0.0 {
        let mut misses_at_mid = 0;
        for _ in 0..opts.refine_steps {
            let mid = (below_s.ln() * 0.5 + best_s.ln() * 0.5).exp();
            if !(mid > below_s && mid < best_s) {
                break;
            }
            let (err, report) = run_probe(mid)?;
            if err >= band_lo && err <= band_hi {
                best_s = mid;
                best_err = err;
                best_report = report;
                misses_at_mid = 0;
            } else {
                misses_at_mid += 1;
                if misses_at_mid >= 2 {
                    below_s = mid;
                    misses_at_mid = 0;
                }
            }
        }
    }
    Ok(Calibration {
        level: level.name,
        strength: best_s,
        mean_df_error: best_err,
        report: best_report,
        trace,
    })
}

/// Errors on the three evaluation sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitErrors {
    pub forget: f64,
    pub retain: f64,
    pub test: f64,
}

/// Signed distance to the golden standard (method minus golden); closer to
/// zero is better on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldenComparison {
    pub golden_df_error: f64,
    pub golden_test_error: f64,
    pub df_delta: f64,
    pub test_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgettingReport {
    pub patient: PatientId,
    pub method: PerturbMethod,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub level: Option<NoiseLevel>,
    pub strength: f64,
    pub pre: SplitErrors,
    pub post: SplitErrors,
    pub noise: PerturbReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub golden: Option<GoldenComparison>,
    /// Post error on the forget set exceeds random guessing
    /// (`1 - 1/num_classes`): the patient is completely forgotten.
    pub complete_forgetting: bool,
}

/// Apply a configured operator once and report errors before and after,
/// with golden-standard deltas when a golden record is available.
pub fn forget_and_report(
    w: &WeightVector,
    split: &ForgetSplit<'_>,
    test: &DatasetView<'_>,
    fim: &FimDiagonal,
    spec: &PerturbSpec,
    level: Option<NoiseLevel>,
    golden: Option<&GoldenRecord>,
) -> Result<ForgettingReport> {
    let pre = SplitErrors {
        forget: evaluate(w, &split.d_f)?.error,
        retain: evaluate(w, &split.d_r)?.error,
        test: evaluate(w, test)?.error,
    };
    let (perturbed, noise) = apply(w, fim, spec)?;
    let post = SplitErrors {
        forget: evaluate(&perturbed, &split.d_f)?.error,
        retain: evaluate(&perturbed, &split.d_r)?.error,
        test: evaluate(&perturbed, test)?.error,
    };
    let golden = golden.map(|g| GoldenComparison {
        golden_df_error: g.golden_df_error,
        golden_test_error: g.golden_test_error,
        df_delta: post.forget - g.golden_df_error,
        test_delta: post.test - g.golden_test_error,
    });
    let random_guess = 1.0 - 1.0 / w.arch.num_classes as f64;
    Ok(ForgettingReport {
        patient: split.forget_patient.clone(),
        method: spec.method,
        level,
        strength: spec.strength,
        pre,
        post,
        noise,
        golden,
        complete_forgetting: post.forget > random_guess,
    })
}
