//! Quantitative extraction of the small-bath signatures: decay-rate fits,
//! the γ_z/γ_x enhancement, asymptotic correlations, correlation
//! equilibration, and recurrence detection.

use serde::Serialize;

use crate::lindblad::{evolve, EvolutionSpec};
use crate::register::{DensityMatrix, SpinSystem};
use crate::series::ObservableSeries;
use crate::{Error, Result};

/// Decay model fitted by [`fit_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecayModel {
    /// y = offset + A e^{−γt}
    ExpToOffset,
    /// y = A e^{−γt}
    PureExp,
}

/// Least-squares fit result. The residual is always reported.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub rate: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub rms_residual: f64,
    pub window: (f64, f64),
}

/// Residual of the best linear (offset, amplitude) solve at fixed rate.
/// Returns (ss_residual, offset, amplitude) in the t-shifted frame.
fn linear_solve(ts: &[f64], ys: &[f64], t0: f64, rate: f64, with_offset: bool) -> (f64, f64, f64) {
    let n = ts.len() as f64;
    let mut se = 0.0;
    let mut see = 0.0;
    let mut sy = 0.0;
    let mut sye = 0.0;
    for (&t, &y) in ts.iter().zip(ys) {
        let e = (-rate * (t - t0)).exp();
        se += e;
        see += e * e;
        sy += y;
        sye += y * e;
    }
    let (c, a) = if with_offset {
        let det = n * see - se * se;
        if det.abs() < 1e-300 {
            return (f64::INFINITY, 0.0, 0.0);
        }
        ((sy * see - sye * se) / det, (n * sye - se * sy) / det)
    } else {
        if see < 1e-300 {
            return (f64::INFINITY, 0.0, 0.0);
        }
        (0.0, sye / see)
    };
    let mut ss = 0.0;
    for (&t, &y) in ts.iter().zip(ys) {
        let r = y - c - a * (-rate * (t - t0)).exp();
        ss += r * r;
    }
    (ss, c, a)
}

/// Deterministic exponential fit: the amplitude and offset are projected out
/// exactly at each trial rate and the rate is found by golden-section search
/// on the log scale.
pub fn fit_decay(
    times: &[f64],
    values: &[f64],
    model: DecayModel,
    window: (f64, f64),
) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (&t, &y) in times.iter().zip(values) {
        if t >= window.0 && t <= window.1 {
            ts.push(t);
            ys.push(y);
        }
    }
    if ts.len() < 10 {
        return Err(Error::FitFailure(format!(
            "only {} samples in window [{}, {}], need >= 10",
            ts.len(),
            window.0,
            window.1
        )));
    }
    let ymin = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let ymax = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if ymax - ymin < 1e-14 * ymax.abs().max(1.0) {
        return Err(Error::FitFailure("data is constant over the window".into()));
    }
    let t0 = ts[0];
    let with_offset = model == DecayModel::ExpToOffset;

    // crude rate scale: time for |y - tail| to fall by e
    let tail = if with_offset {
        let k = ts.len().saturating_sub(ts.len() / 10).min(ts.len() - 1);
        ys[k..].iter().sum::<f64>() / (ys.len() - k) as f64
    } else {
        0.0
    };
    let a0 = ys[0] - tail;
    let mut g0 = 1.0 / (ts[ts.len() - 1] - t0);
    if a0.abs() > 0.0 {
        for (&t, &y) in ts.iter().zip(&ys) {
            if (y - tail).abs() <= a0.abs() / std::f64::consts::E && t > t0 {
                g0 = 1.0 / (t - t0);
                break;
            }
        }
    }

    let obj = |ln_g: f64| linear_solve(&ts, &ys, t0, ln_g.exp(), with_offset).0;
    let mut lo = (g0 / 64.0).ln();
    let mut hi = (g0 * 64.0).ln();
    let mut best = None;
    for _expand in 0..4 {
        let (x, f) = golden_min(&obj, lo, hi, 1e-13);
        // interior check: stay away from the bracket edges
        let margin = 1e-6 * (hi - lo);
        if x - lo > margin && hi - x > margin {
            best = Some((x, f));
            break;
        }
        if x - lo <= margin {
            hi = lo + (hi - lo) * 0.5;
            lo -= 4.0f64.ln() * 3.0;
        } else {
            lo = hi - (hi - lo) * 0.5;
            hi += 4.0f64.ln() * 3.0;
        }
    }
    let (ln_rate, _) = best.ok_or_else(|| {
        Error::FitFailure("no interior optimum for the decay rate".into())
    })?;
    let rate = ln_rate.exp();
    let (ss, c, a_shift) = linear_solve(&ts, &ys, t0, rate, with_offset);
    if !ss.is_finite() {
        return Err(Error::FitFailure("degenerate normal equations".into()));
    }
    Ok(DecayFit {
        model,
        rate,
        offset: c,
        amplitude: a_shift * (rate * t0).exp(),
        rms_residual: (ss / ts.len() as f64).sqrt(),
        window,
    })
}

/// Golden-section minimum of f on [lo, hi] to absolute tolerance tol.
fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Result of the γ_z/γ_x comparison.
#[derive(Debug, Clone, Serialize)]
pub struct GammaRatio {
    pub gamma_z: DecayFit,
    pub gamma_x: DecayFit,
    pub ratio: f64,
    /// 2(N+1)/N, the small-bath enhancement bound.
    pub bound: f64,
}

impl GammaRatio {
    pub fn within_bound(&self, tolerance_factor: f64) -> bool {
        self.ratio <= self.bound * tolerance_factor
    }
}

/// Run one polarization-offset evolution and one coherence evolution, fit
/// both decay rates, and return their ratio. The fit windows exclude the
/// initial transient [0, 5/α].
pub fn gamma_ratio(
    sys: &SpinSystem,
    rho_z_test: &DensityMatrix,
    rho_x_test: &DensityMatrix,
    spec: &EvolutionSpec,
) -> Result<GammaRatio> {
    let alpha = sys.max_alpha();
    if alpha <= 0.0 {
        return Err(Error::InvalidParameter(
            "gamma_ratio needs dephasing (alpha > 0)".into(),
        ));
    }
    let window = (5.0 / alpha, spec.t_max);
    let oz = evolve(sys, rho_z_test, spec)?;
    let ox = evolve(sys, rho_x_test, spec)?;
    let gamma_z = fit_decay(oz.times(), oz.z_system(), DecayModel::ExpToOffset, window)?;
    let gamma_x = fit_decay(ox.times(), ox.x_system(), DecayModel::PureExp, window)?;
    let n = sys.n_bath() as f64;
    Ok(GammaRatio {
        ratio: gamma_z.rate / gamma_x.rate,
        gamma_z,
        gamma_x,
        bound: 2.0 * (n + 1.0) / n,
    })
}

/// Normalization of the pair-correlator sum in the general corr_∞ formula.
/// The sum runs over ordered pairs of all N+1 spins, so `OverAllPairs`
/// ((N+1)N) is the consistent choice; `OverBathPairs` ((N−1)N) is retained
/// for the resolution test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairSumNormalization {
    OverAllPairs,
    OverBathPairs,
}

/// Asymptotic system-bath correlation for an uncorrelated preparation with a
/// uniformly polarized bath:
///
///   corr_∞ = −[(z_T − z_s(0))² / (N+1)²] / (1/4 − z_∞²).
pub fn corr_infinity_uniform(n_bath: usize, z_t: f64, z_s0: f64) -> Result<f64> {
    if n_bath == 0 {
        return Err(Error::InvalidParameter("need at least one bath spin".into()));
    }
    if z_t.abs() > 0.5 || z_s0.abs() > 0.5 {
        return Err(Error::InvalidParameter(
            "polarizations must lie in [-1/2, 1/2]".into(),
        ));
    }
    let n = n_bath as f64;
    let z_inf = (n * z_t + z_s0) / (n + 1.0);
    let var = 0.25 - z_inf * z_inf;
    if var < 1e-14 {
        return Err(Error::InvalidParameter(
            "saturated variance: |z_inf| = 1/2".into(),
        ));
    }
    Ok(-((z_t - z_s0) * (z_t - z_s0) / ((n + 1.0) * (n + 1.0))) / var)
}

/// General conserved-quantity form: corr_∞ = [S₀/D − z_∞²] / (1/4 − z_∞²)
/// where S₀ = Σ_{i≠j} ⟨σᶻᵢσᶻⱼ⟩ at t = 0 and D is set by `norm`.
pub fn corr_infinity_general(
    pair_sum0: f64,
    z_inf: f64,
    n_bath: usize,
    norm: PairSumNormalization,
) -> Result<f64> {
    if n_bath < 2 && norm == PairSumNormalization::OverBathPairs {
        return Err(Error::InvalidParameter(
            "bath-pair normalization needs N >= 2".into(),
        ));
    }
    let n = n_bath as f64;
    let denom = match norm {
        PairSumNormalization::OverAllPairs => (n + 1.0) * n,
        PairSumNormalization::OverBathPairs => (n - 1.0) * n,
    };
    let var = 0.25 - z_inf * z_inf;
    if var < 1e-14 {
        return Err(Error::InvalidParameter(
            "saturated variance: |z_inf| = 1/2".into(),
        ));
    }
    Ok((pair_sum0 / denom - z_inf * z_inf) / var)
}

/// Revival detection on |z_s(t) − z_∞|: the amplitude of the largest local
/// extremum after the first local minimum, and the time of the first revival.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RecurrenceMetric {
    pub revival_amplitude: f64,
    pub first_revival_time: Option<f64>,
}

/// Zero amplitude for monotone series. z_∞ is inferred from the conserved
/// total polarization of the series. The series should cover at least one
/// expected oscillation period π/ξ_SB.
pub fn recurrence_metric(series: &ObservableSeries) -> RecurrenceMetric {
    let z_inf = series.sum_z()[0] / series.n_sites() as f64;
    let d: Vec<f64> = series
        .z_system()
        .iter()
        .map(|&z| (z - z_inf).abs())
        .collect();
    let n = d.len();
    let mut first_min = None;
    for k in 1..n.saturating_sub(1) {
        if d[k] < d[k - 1] && d[k] <= d[k + 1] {
            first_min = Some(k);
            break;
        }
    }
    let Some(k0) = first_min else {
        return RecurrenceMetric {
            revival_amplitude: 0.0,
            first_revival_time: None,
        };
    };
    let mut amplitude: f64 = 0.0;
    let mut first_time = None;
    for k in (k0 + 1)..n.saturating_sub(1) {
        if d[k] >= d[k - 1] && d[k] > d[k + 1] {
            if first_time.is_none() {
                first_time = Some(series.times()[k]);
            }
            amplitude = amplitude.max(d[k]);
        }
    }
    RecurrenceMetric {
        revival_amplitude: amplitude,
        first_revival_time: first_time,
    }
}

/// Per-bath-spin correlation equilibration: the first time after which
/// corr(s,k) stays within `tolerance` of its final value. `None` marks a
/// spin that never settles within the series.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationEquilibration {
    pub per_spin: Vec<Option<f64>>,
    pub final_values: Vec<f64>,
}

pub fn correlation_equilibration_time(
    series: &ObservableSeries,
    tolerance: f64,
) -> Result<CorrelationEquilibration> {
    if tolerance <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let sys_site = series.n_sites() - 1;
    let mut per_spin = Vec::new();
    let mut final_values = Vec::new();
    for k in 0..sys_site {
        let corr = series.pearson(sys_site, k)?;
        let last_defined = corr
            .iter()
            .rev()
            .find_map(|c| *c)
            .ok_or_else(|| Error::InvalidParameter(format!(
                "correlation with bath spin {k} is undefined everywhere"
            )))?;
        // walk backward to the last violation among defined samples
        let mut settle_idx = 0usize;
        for (i, c) in corr.iter().enumerate() {
            if let Some(v) = c {
                if (v - last_defined).abs() > tolerance {
                    settle_idx = i + 1;
                }
            }
        }
        per_spin.push(if settle_idx >= series.n_samples() {
            None
        } else {
            Some(series.times()[settle_idx])
        });
        final_values.push(last_defined);
    }
    Ok(CorrelationEquilibration {
        per_spin,
        final_values,
    })
}

/// JSON report bundling the analysis outputs of a scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct CorrInfinityReport {
    pub formula: f64,
    pub simulated: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct AnalysisReport {
    pub fits: Vec<DecayFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_ratio: Option<GammaRatio>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corr_infinity: Option<CorrInfinityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recurrence: Option<RecurrenceMetric>,
}
