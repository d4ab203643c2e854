//! Monte Carlo harness: simulation designs, competing estimators, coverage,
//! bias/variance and rolling-window prediction comparisons.
//!
//! Every replication draws from its own ChaCha stream selected by
//! `(master_seed, rep_index)`, and results are reduced in replication order,
//! so reports are bit-identical under either execution mode.

mod baselines;
mod dgp;

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

pub use baselines::{fit, Estimator, Fit};
pub use dgp::{rep_rng, simulate_a, simulate_b, Dgp, ExperimentA, ExperimentAConfig, ExperimentAPath, ExperimentB, ExperimentBConfig, ExperimentBPath, SvarDgp, SvarPath};

use crate::error::{Error, Result};
use crate::exec::{pairwise_mean, pairwise_sum, Execution};
use crate::flp::{lp_irf, EstimateOptions, HacSpec, LpData};
use crate::hilbert::ProductElement;
use crate::ingest::fmt_sig;

/// Failure budget for a Monte Carlo run.
pub const MAX_FAILURE_RATE: f64 = 0.01;

fn check_failures(failed: usize, reps: usize) -> Result<()> {
    if failed as f64 > MAX_FAILURE_RATE * reps as f64 {
        return Err(Error::TooManyFailures { failed, reps });
    }
    Ok(())
}

/// Shared Monte Carlo settings.
#[derive(Debug, Clone, Copy)]
pub struct McSettings {
    pub reps: usize,
    pub master_seed: u64,
    pub exec: Execution,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageCell {
    pub t: usize,
    pub horizon: usize,
    pub level: f64,
    pub coverage: f64,
    pub mean_length: f64,
    pub reps: usize,
    pub failures: usize,
}

enum Outcome {
    Interval { covered: bool, length: f64 },
    Failed,
}

/// Fraction of replications whose interval covers `<theta_h, zeta>`.
///
/// A degenerate variance whose point estimate equals the truth (a noiseless
/// design) counts as covered with zero length.
#[allow(clippy::too_many_arguments)]
pub fn run_coverage<D: Dgp>(
    dgp: &D,
    t: usize,
    horizons: &[usize],
    zeta: &ProductElement,
    level: f64,
    opts: &EstimateOptions,
    hac: &HacSpec,
    mc: McSettings,
) -> Result<Vec<CoverageCell>> {
    if mc.reps == 0 {
        return Err(Error::InvalidArgument("reps must be positive".into()));
    }
    let truths: Vec<f64> = horizons.iter().map(|&h| dgp.truth(h)?.inner(zeta)).collect::<Result<_>>()?;
    let per_rep: Vec<Vec<Outcome>> = mc.exec.map(mc.reps, |r| {
        let mut rng = rep_rng(mc.master_seed, r as u64);
        let path = match dgp.simulate(&mut rng) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("rep {r} (seed {}) failed to simulate: {e}", mc.master_seed);
                return horizons.iter().map(|_| Outcome::Failed).collect();
            }
        };
        horizons
            .iter()
            .zip(&truths)
            .map(|(&h, &truth)| {
                let res = dgp.lp_data(&path, h).and_then(|d| lp_irf(&d, h, zeta, level, opts, hac));
                match res {
                    Ok((_, inf)) => Outcome::Interval { covered: inf.covers(truth), length: inf.ci_high - inf.ci_low },
                    Err(Error::DegenerateVariance { point, .. }) if (point - truth).abs() <= 1e-8 * (1.0 + truth.abs()) => {
                        Outcome::Interval { covered: true, length: 0.0 }
                    }
                    Err(e) => {
                        log::warn!("rep {r} (seed {}) horizon {h} failed: {e}", mc.master_seed);
                        Outcome::Failed
                    }
                }
            })
            .collect()
    });
    horizons
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let mut hits = Vec::new();
            let mut lengths = Vec::new();
            let mut failures = 0;
            for rep in &per_rep {
                match rep[i] {
                    Outcome::Interval { covered, length } => {
                        hits.push(if covered { 1.0 } else { 0.0 });
                        lengths.push(length);
                    }
                    Outcome::Failed => failures += 1,
                }
            }
            check_failures(failures, mc.reps)?;
            Ok(CoverageCell {
                t,
                horizon: h,
                level,
                coverage: pairwise_mean(&hits),
                mean_length: pairwise_mean(&lengths),
                reps: mc.reps,
                failures,
            })
        })
        .collect()
}

/// `||theta_hat - theta||` for each successful replication.
pub fn run_errors<D: Dgp>(dgp: &D, h: usize, estimator: Estimator, opts: &EstimateOptions, mc: McSettings) -> Result<Vec<f64>> {
    let truth = dgp.truth(h)?;
    let out: Vec<Option<f64>> = mc.exec.map(mc.reps, |r| {
        let mut rng = rep_rng(mc.master_seed, r as u64);
        let res = dgp
            .simulate(&mut rng)
            .and_then(|p| dgp.lp_data(&p, h))
            .and_then(|d| fit(estimator, &d, h, opts))
            .map(|f| (f.theta.coords() - truth.coords()).norm());
        res.map_err(|e| log::warn!("rep {r} (seed {}) failed: {e}", mc.master_seed)).ok()
    });
    let failed = out.iter().filter(|o| o.is_none()).count();
    check_failures(failed, mc.reps)?;
    Ok(out.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct McRow {
    pub estimator: String,
    pub t: usize,
    pub horizon: usize,
    pub bias: f64,
    pub variance: f64,
    pub bias_ratio: f64,
    pub variance_ratio: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub reps: usize,
    pub master_seed: u64,
    pub runtime_secs: f64,
    pub synthetic_defaults: bool,
}

/// Bias `||mean(beta_hat) - beta||` and variance `mean ||beta_hat - mean||^2`
/// of the functional coefficient, with ratios relative to `ScInv`.
pub fn run_bias_variance<D: Dgp>(
    dgp: &D,
    t: usize,
    horizons: &[usize],
    estimators: &[Estimator],
    opts: &EstimateOptions,
    mc: McSettings,
) -> Result<McReport> {
    let numeraire = estimators
        .iter()
        .position(|e| *e == Estimator::ScInv)
        .ok_or_else(|| Error::InvalidArgument("ScInv must be among the estimators".into()))?;
    let start = Instant::now();
    let ne = estimators.len();
    // per rep: [horizon][estimator] -> beta coordinates
    let draws: Vec<Vec<Vec<Option<DVector<f64>>>>> = mc.exec.map(mc.reps, |r| {
        let mut rng = rep_rng(mc.master_seed, r as u64);
        let path = dgp.simulate(&mut rng);
        horizons
            .iter()
            .map(|&h| {
                estimators
                    .iter()
                    .map(|&e| {
                        let path = path.as_ref().map_err(|e| Error::Data(e.to_string()));
                        path.and_then(|p| dgp.lp_data(p, h))
                            .and_then(|d| fit(e, &d, h, opts))
                            .map(|f| f.theta.x.coords())
                            .map_err(|err| log::warn!("rep {r} (seed {}) {} h={h}: {err}", mc.master_seed, e.label()))
                            .ok()
                    })
                    .collect()
            })
            .collect()
    });
    let mut rows = Vec::new();
    for (hi, &h) in horizons.iter().enumerate() {
        let beta = dgp.truth(h)?.x.coords();
        let mut stats = Vec::with_capacity(ne);
        for ei in 0..ne {
            let ok: Vec<&DVector<f64>> = draws.iter().filter_map(|d| d[hi][ei].as_ref()).collect();
            let failures = mc.reps - ok.len();
            check_failures(failures, mc.reps)?;
            let dim = beta.len();
            let mean = DVector::from_fn(dim, |j, _| pairwise_mean(&ok.iter().map(|b| b[j]).collect::<Vec<_>>()));
            let bias = (&mean - &beta).norm();
            let sq: Vec<f64> = ok.iter().map(|b| (*b - &mean).norm_squared()).collect();
            stats.push((bias, pairwise_sum(&sq) / ok.len() as f64, failures));
        }
        let (b0, v0, _) = stats[numeraire];
        for (ei, (bias, variance, failures)) in stats.into_iter().enumerate() {
            let ratio = |a: f64, b: f64| if ei == numeraire { 1.0 } else { a / b };
            rows.push(McRow {
                estimator: estimators[ei].label(),
                t,
                horizon: h,
                bias,
                variance,
                bias_ratio: ratio(bias, b0),
                variance_ratio: ratio(variance, v0),
                failures,
            });
        }
    }
    Ok(McReport {
        rows,
        reps: mc.reps,
        master_seed: mc.master_seed,
        runtime_secs: start.elapsed().as_secs_f64(),
        synthetic_defaults: true,
    })
}

impl McReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["estimator", "T", "h", "bias", "variance", "bias_ratio", "variance_ratio", "failures", "reps", "master_seed"])?;
        for r in &self.rows {
            w.write_record([
                r.estimator.clone(),
                r.t.to_string(),
                r.horizon.to_string(),
                fmt_sig(r.bias),
                fmt_sig(r.variance),
                fmt_sig(r.bias_ratio),
                fmt_sig(r.variance_ratio),
                r.failures.to_string(),
                self.reps.to_string(),
                self.master_seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_coverage_csv<W: Write>(cells: &[CoverageCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "h", "level", "coverage", "mean_length", "reps", "failures"])?;
    for c in cells {
        w.write_record([
            c.t.to_string(),
            c.horizon.to_string(),
            fmt_sig(c.level),
            fmt_sig(c.coverage),
            fmt_sig(c.mean_length),
            c.reps.to_string(),
            c.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct MapeRow {
    pub estimator: String,
    pub test_fraction: f64,
    pub horizon: usize,
    pub mape: f64,
    pub origins: usize,
}

/// Minimum number of training observations in each rolling window.
pub const MIN_TRAINING: usize = 50;

/// Median absolute `h`-step prediction error over rolling origins. The
/// window holds the most recent `(1 - test_fraction) T` observations.
pub fn run_mape(
    data: &LpData,
    estimators: &[Estimator],
    test_fractions: &[f64],
    horizons: &[usize],
    opts: &EstimateOptions,
    exec: Execution,
) -> Result<Vec<MapeRow>> {
    let t = data.len();
    let mut rows = Vec::new();
    for &frac in test_fractions {
        if !(frac > 0.0 && frac < 1.0) {
            return Err(Error::InvalidArgument(format!("test fraction must lie in (0, 1), got {frac}")));
        }
        let window = t - (frac * t as f64).round() as usize;
        for &h in horizons {
            if window < MIN_TRAINING + h {
                return Err(Error::InsufficientData { needed: MIN_TRAINING + h, got: window });
            }
            // origins t0 = window-1 .. t-1-h, training rows t0-window+1 ..= t0
            let origins: Vec<usize> = (window - 1..t.saturating_sub(h)).collect();
            for &est in estimators {
                let errs: Vec<Option<f64>> = exec.map(origins.len(), |i| {
                    let t0 = origins[i];
                    let train = data.slice(t0 + 1 - window, window);
                    fit(est, &train, h, opts)
                        .and_then(|f| f.predict(&data.upsilon.element(t0), data.y[t0]))
                        .map(|p| (p - data.y[t0 + h]).abs())
                        .map_err(|e| log::warn!("{} origin {t0} h={h}: {e}", est.label()))
                        .ok()
                });
                let failed = errs.iter().filter(|e| e.is_none()).count();
                check_failures(failed, origins.len())?;
                let mut ok: Vec<f64> = errs.into_iter().flatten().collect();
                rows.push(MapeRow {
                    estimator: est.label(),
                    test_fraction: frac,
                    horizon: h,
                    mape: median(&mut ok),
                    origins: ok.len(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_mape_csv<W: Write>(rows: &[MapeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["estimator", "test_fraction", "h", "mape", "origins"])?;
    for r in rows {
        w.write_record([r.estimator.clone(), fmt_sig(r.test_fraction), r.horizon.to_string(), fmt_sig(r.mape), r.origins.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
