//! Exact propagation of the joint density matrix in the interaction picture.
//!
//! dρ/dt = −i[V, ρ] + Σ_k α_k (2σᶻ_kρσᶻ_k − (σᶻ_k)²ρ − ρ(σᶻ_k)²).
//!
//! Since every σᶻ_k is diagonal, the dissipator is an elementwise damping:
//! each matrix element ρ_ab decays at Σ_k α_k over the sites k where the
//! basis strings a and b differ. H₀ = h₀Σσᶻ commutes with V and with the
//! dissipator and is dropped (it enters only through thermal preparation).

use ndarray::prelude::*;

use crate::linalg::{hermiticity_error, min_eigenvalue};
use crate::register::{z_weight, DensityMatrix, SpinSystem};
use crate::series::ObservableSeries;
use crate::{C64, Error, Result};

const TRACE_ERR_TOL: f64 = 1e-8;
const HERMITICITY_ERR_TOL: f64 = 1e-8;
const MIN_EIGENVALUE_TOL: f64 = -1e-7;

/// Time stepper selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// Classic fixed-step 4th-order Runge-Kutta.
    FixedRk4 { dt: f64 },
    /// Embedded Dormand-Prince 5(4) with per-element error control.
    Adaptive { rel_tol: f64, abs_tol: f64 },
}

impl Integrator {
    /// Spec default: dt = min(0.02/α_max, 0.1/ξ_max); the stiffness scale is α.
    pub fn default_fixed(sys: &SpinSystem) -> Self {
        let a = sys.max_alpha();
        let x = sys.coupling().max_coupling();
        let mut dt = f64::INFINITY;
        if a > 0.0 {
            dt = dt.min(0.02 / a);
        }
        if x > 0.0 {
            dt = dt.min(0.1 / x);
        }
        if !dt.is_finite() {
            dt = 0.1;
        }
        Integrator::FixedRk4 { dt }
    }
}

/// What to run and how to sample it.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionSpec {
    pub t_max: f64,
    pub dt_out: f64,
    pub integrator: Integrator,
    /// Full eigendecomposition (positivity check) every this many samples;
    /// 0 disables the check.
    pub positivity_check_interval: usize,
}

impl EvolutionSpec {
    pub fn new(t_max: f64, dt_out: f64, integrator: Integrator) -> Result<Self> {
        if !(t_max > 0.0 && dt_out > 0.0) {
            return Err(Error::InvalidParameter(
                "t_max and dt_out must be positive".into(),
            ));
        }
        if dt_out > t_max * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "dt_out = {dt_out} exceeds t_max = {t_max}"
            )));
        }
        match integrator {
            Integrator::FixedRk4 { dt } => {
                if !(dt > 0.0) {
                    return Err(Error::InvalidParameter("fixed dt must be positive".into()));
                }
                if dt > dt_out * (1.0 + 1e-12) {
                    return Err(Error::InvalidParameter(format!(
                        "fixed dt = {dt} exceeds dt_out = {dt_out}"
                    )));
                }
            }
            Integrator::Adaptive { rel_tol, abs_tol } => {
                if !(rel_tol > 0.0 && abs_tol > 0.0) {
                    return Err(Error::InvalidParameter(
                        "adaptive tolerances must be positive".into(),
                    ));
                }
            }
        }
        Ok(Self {
            t_max,
            dt_out,
            integrator,
            positivity_check_interval: 50,
        })
    }

    /// Spec-default fixed step, clamped to dt_out.
    pub fn with_default_step(sys: &SpinSystem, t_max: f64, dt_out: f64) -> Result<Self> {
        let dt = match Integrator::default_fixed(sys) {
            Integrator::FixedRk4 { dt } => dt.min(dt_out),
            _ => unreachable!(),
        };
        Self::new(t_max, dt_out, Integrator::FixedRk4 { dt })
    }

    pub fn positivity_check_interval(mut self, every: usize) -> Self {
        self.positivity_check_interval = every;
        self
    }
}

/// Precomputed propagation context.
struct Engine {
    v: Array2<C64>,
    /// damp[a, b] = Σ_k α_k over sites where strings a, b differ
    damp: Array2<f64>,
    /// zw[site][b] = ±1/2
    zw: Vec<Vec<f64>>,
    n_sites: usize,
    dim: usize,
}

impl Engine {
    fn new(sys: &SpinSystem) -> Self {
        let n_sites = sys.n_sites();
        let dim = sys.dim();
        let zw: Vec<Vec<f64>> = (0..n_sites)
            .map(|s| (0..dim).map(|b| z_weight(b, s, n_sites)).collect())
            .collect();
        let alphas = sys.alphas();
        let mut damp = Array2::<f64>::zeros((dim, dim));
        for a in 0..dim {
            for b in 0..dim {
                let mut g = 0.0;
                for (k, &alpha) in alphas.iter().enumerate() {
                    if alpha > 0.0 && zw[k][a] != zw[k][b] {
                        g += alpha;
                    }
                }
                damp[[a, b]] = g;
            }
        }
        Self {
            v: sys.interaction(),
            damp,
            zw,
            n_sites,
            dim,
        }
    }

    fn rhs(&self, rho: &Array2<C64>) -> Array2<C64> {
        let comm = self.v.dot(rho) - rho.dot(&self.v);
        let mut out = comm.mapv(|c| C64::new(c.im, -c.re)); // -i * comm
        azip!((o in &mut out, &g in &self.damp, &r in rho) *o -= C64::new(g, 0.0) * r);
        out
    }

    fn rk4_step(&self, rho: &Array2<C64>, h: f64) -> Array2<C64> {
        let k1 = self.rhs(rho);
        let k2 = self.rhs(&(rho + &(&k1 * C64::new(0.5 * h, 0.0))));
        let k3 = self.rhs(&(rho + &(&k2 * C64::new(0.5 * h, 0.0))));
        let k4 = self.rhs(&(rho + &(&k3 * C64::new(h, 0.0))));
        rho + &((k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4)
            * C64::new(h / 6.0, 0.0))
    }

    fn observables(&self, rho: &Array2<C64>) -> (Vec<f64>, f64, Vec<f64>, f64) {
        let dim = self.dim;
        let diag: Vec<f64> = (0..dim).map(|b| rho[[b, b]].re).collect();
        let z: Vec<f64> = (0..self.n_sites)
            .map(|s| (0..dim).map(|b| self.zw[s][b] * diag[b]).sum())
            .collect();
        let mut zz = Vec::with_capacity(self.n_sites * (self.n_sites - 1) / 2);
        for i in 0..self.n_sites {
            for j in (i + 1)..self.n_sites {
                zz.push(
                    (0..dim)
                        .map(|b| self.zw[i][b] * self.zw[j][b] * diag[b])
                        .sum(),
                );
            }
        }
        // system = last site = least significant bit
        let mut x_s = 0.0;
        let mut b = 0;
        while b < dim {
            x_s += rho[[b + 1, b]].re;
            b += 2;
        }
        let trace_err = (diag.iter().sum::<f64>() - 1.0).abs();
        (z, x_s, zz, trace_err)
    }
}

/// Right-hand side of the master equation; trace of the result is 0 and
/// Hermiticity is preserved.
pub fn rhs(sys: &SpinSystem, rho: &DensityMatrix) -> Result<Array2<C64>> {
    if rho.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: rho.dim(),
        });
    }
    Ok(Engine::new(sys).rhs(rho.as_array()))
}

/// Dormand-Prince 5(4) coefficients.
mod dp {
    pub const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    /// 5th-order weights (same as the last A row).
    pub const B: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    /// B − B*(4th order): error estimator weights.
    pub const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
}

struct AdaptiveStepper {
    rel_tol: f64,
    abs_tol: f64,
    h: f64,
}

impl AdaptiveStepper {
    fn new(rel_tol: f64, abs_tol: f64, h0: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            h: h0,
        }
    }

    /// Advance rho from t to t_target.
    fn advance(&mut self, eng: &Engine, rho: &mut Array2<C64>, t: f64, t_target: f64) -> Result<()> {
        let mut t = t;
        while t < t_target - 1e-14 * t_target.max(1.0) {
            let h = self.h.min(t_target - t);
            let mut k: Vec<Array2<C64>> = Vec::with_capacity(7);
            k.push(eng.rhs(rho));
            for stage in 0..6 {
                let mut y = rho.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = dp::A[stage][j];
                    if a != 0.0 {
                        y.scaled_add(C64::new(a * h, 0.0), kj);
                    }
                }
                k.push(eng.rhs(&y));
            }
            let mut y5 = rho.clone();
            let mut err = Array2::<C64>::zeros(rho.raw_dim());
            for (j, kj) in k.iter().enumerate() {
                if dp::B[j] != 0.0 {
                    y5.scaled_add(C64::new(dp::B[j] * h, 0.0), kj);
                }
                if dp::E[j] != 0.0 {
                    err.scaled_add(C64::new(dp::E[j] * h, 0.0), kj);
                }
            }
            let mut ratio = 0.0f64;
            azip!((&e in &err, &y in &y5) {
                let scale = self.abs_tol + self.rel_tol * y.norm();
                ratio = ratio.max(e.norm() / scale);
            });
            if ratio <= 1.0 {
                t += h;
                *rho = y5;
                let grow = if ratio > 0.0 {
                    0.9 * ratio.powf(-0.2)
                } else {
                    5.0
                };
                self.h = h * grow.clamp(0.2, 5.0);
            } else {
                self.h = h * (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
            }
            if self.h < 1e-14 * t.max(1.0) {
                return Err(Error::StepSizeUnderflow { t, dt: self.h });
            }
        }
        Ok(())
    }
}

fn run_evolution(
    sys: &SpinSystem,
    rho0: &DensityMatrix,
    spec: &EvolutionSpec,
    mut snapshot: Option<&mut Vec<DensityMatrix>>,
) -> Result<ObservableSeries> {
    if rho0.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: rho0.dim(),
        });
    }
    let eng = Engine::new(sys);
    let n_out = (spec.t_max / spec.dt_out + 1e-9).floor() as usize;
    let mut series = ObservableSeries::with_capacity(sys.n_sites(), n_out + 1);
    let mut rho = rho0.as_array().clone();

    let mut adaptive = match spec.integrator {
        Integrator::Adaptive { rel_tol, abs_tol } => {
            Some(AdaptiveStepper::new(rel_tol, abs_tol, spec.dt_out / 10.0))
        }
        Integrator::FixedRk4 { .. } => None,
    };

    for sample in 0..=n_out {
        let t = sample as f64 * spec.dt_out;
        if sample > 0 {
            let t_prev = (sample - 1) as f64 * spec.dt_out;
            match spec.integrator {
                Integrator::FixedRk4 { dt } => {
                    let n_steps = (spec.dt_out / dt - 1e-9).ceil().max(1.0) as usize;
                    let h = spec.dt_out / n_steps as f64;
                    for _ in 0..n_steps {
                        rho = eng.rk4_step(&rho, h);
                    }
                }
                Integrator::Adaptive { .. } => {
                    adaptive
                        .as_mut()
                        .expect("stepper present")
                        .advance(&eng, &mut rho, t_prev, t)?;
                }
            }
        }
        let (z, x_s, zz, trace_err) = eng.observables(&rho);
        if trace_err > TRACE_ERR_TOL {
            return Err(Error::InvariantViolation(format!(
                "trace error {trace_err:.3e} at t = {t}"
            )));
        }
        let herm = hermiticity_error(&rho);
        if herm > HERMITICITY_ERR_TOL {
            return Err(Error::InvariantViolation(format!(
                "hermiticity error {herm:.3e} at t = {t}"
            )));
        }
        let every = spec.positivity_check_interval;
        if every > 0 && sample % every == 0 {
            let lo = min_eigenvalue(&rho)?;
            if lo < MIN_EIGENVALUE_TOL {
                return Err(Error::InvariantViolation(format!(
                    "negative eigenvalue {lo:.3e} at t = {t}"
                )));
            }
        }
        series.push_sample(if sample == 0 { 0.0 } else { t }, &z, x_s, &zz, trace_err)?;
        if let Some(snaps) = snapshot.as_deref_mut() {
            snaps.push(DensityMatrix::new(rho.clone()).map_err(|e| {
                Error::InvariantViolation(format!("state invalid at t = {t}: {e}"))
            })?);
        }
    }
    Ok(series)
}

/// Integrate the master equation, sampling observables every `dt_out`.
///
/// Aborts with a diagnostic if the trace, Hermiticity, or (periodically)
/// positivity of the state drifts beyond tolerance. Deterministic for fixed
/// inputs.
pub fn evolve(sys: &SpinSystem, rho0: &DensityMatrix, spec: &EvolutionSpec) -> Result<ObservableSeries> {
    run_evolution(sys, rho0, spec, None)
}

/// Like [`evolve`], additionally returning the state at every sample time.
pub fn evolve_with_states(
    sys: &SpinSystem,
    rho0: &DensityMatrix,
    spec: &EvolutionSpec,
) -> Result<(ObservableSeries, Vec<DensityMatrix>)> {
    let mut snaps = Vec::new();
    let series = run_evolution(sys, rho0, spec, Some(&mut snaps))?;
    Ok((series, snaps))
}

/// Pearson correlation between sites i and j along a series; see
/// [`ObservableSeries::pearson`].
pub fn pearson_corr(series: &ObservableSeries, i: usize, j: usize) -> Result<Vec<Option<f64>>> {
    series.pearson(i, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::register::{
        prepare_initial_state, BathPreparation, CouplingGraph, SpinOpKind,
    };
    use approx::assert_abs_diff_eq;

    fn ata_system(n_bath: usize, xi: f64, alpha: f64) -> SpinSystem {
        let g = CouplingGraph::all_to_all(n_bath, xi).unwrap();
        SpinSystem::with_bath_dephasing(g, alpha, 1.0).unwrap()
    }

    #[test]
    fn diagonal_states_are_dephasing_fixed_points() {
        // V = 0: any diagonal state has zero derivative
        let sys = ata_system(2, 0.0, 3.0);
        let rho = prepare_initial_state(
            &sys,
            &BathPreparation::ExplicitPolarizations(vec![0.3, -0.1]),
            0.2,
            0.0,
        )
        .unwrap();
        let d = rhs(&sys, &rho).unwrap();
        assert!(d.iter().map(|c| c.norm()).sum::<f64>() < 1e-14);
    }

    #[test]
    fn single_spin_coherence_decays_at_alpha() {
        // N=1, xi=0, dephasing alpha on the bath spin; coherence on that spin
        let alpha = 3.7;
        let g = CouplingGraph::all_to_all(1, 0.0).unwrap();
        let sys = SpinSystem::new(g, vec![alpha, 0.0], 1.0).unwrap();
        let mut m = Array2::<C64>::zeros((4, 4));
        // bath spin in (|up>+|down>)/sqrt2, system spin up:
        // basis (b_bath b_sys): 00, 01, 10, 11
        m[[0, 0]] = C64::new(0.5, 0.0);
        m[[2, 2]] = C64::new(0.5, 0.0);
        m[[0, 2]] = C64::new(0.4, 0.1);
        m[[2, 0]] = C64::new(0.4, -0.1);
        let rho = DensityMatrix::new(m).unwrap();
        let d = rhs(&sys, &rho).unwrap();
        // d rho_{02} / dt = -alpha * rho_{02}
        assert_abs_diff_eq!(d[[0, 2]].re, -alpha * 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(d[[0, 2]].im, -alpha * 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(d[[0, 0]].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cross_coherence_decays_at_alpha_with_single_jump_op() {
        // element |01><10| differs on both sites; only site 0 is dephased,
        // so the rate is alpha (paper's two-spin example)
        let alpha = 2.5;
        let g = CouplingGraph::all_to_all(1, 0.0).unwrap();
        let sys = SpinSystem::new(g, vec![alpha, 0.0], 1.0).unwrap();
        let mut m = Array2::<C64>::zeros((4, 4));
        m[[1, 1]] = C64::new(0.5, 0.0);
        m[[2, 2]] = C64::new(0.5, 0.0);
        m[[1, 2]] = C64::new(0.25, 0.0);
        m[[2, 1]] = C64::new(0.25, 0.0);
        let rho = DensityMatrix::new(m).unwrap();
        let d = rhs(&sys, &rho).unwrap();
        assert_abs_diff_eq!(d[[1, 2]].re, -alpha * 0.25, epsilon = 1e-12);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let sys = ata_system(2, 0.8, 2.0);
        let rho = prepare_initial_state(
            &sys,
            &BathPreparation::ExplicitPolarizations(vec![0.1, -0.3]),
            0.2,
            0.3,
        )
        .unwrap();
        let d = rhs(&sys, &rho).unwrap();
        let tr: C64 = d.diag().sum();
        assert!(tr.norm() < 1e-12);
        assert!(hermiticity_error(&d) < 1e-12);
    }

    #[test]
    fn thermal_product_state_is_a_fixed_point() {
        let sys = ata_system(2, 1.0, 6.0);
        let z_t = crate::register::thermal_polarization(1.0, 1.0).unwrap();
        let rho = prepare_initial_state(
            &sys,
            &BathPreparation::Thermal { temperature: 1.0 },
            z_t,
            0.0,
        )
        .unwrap();
        let spec = EvolutionSpec::with_default_step(&sys, 2.0, 0.1).unwrap();
        let out = evolve(&sys, &rho, &spec).unwrap();
        let z0 = out.z_system()[0];
        for &z in out.z_system() {
            assert!((z - z0).abs() < 1e-10);
        }
    }

    #[test]
    fn decoupled_register_conserves_all_observables() {
        // V = 0 with dephasing: every z_i and x_s stay constant
        let g = CouplingGraph::all_to_all(2, 0.0).unwrap();
        let sys = SpinSystem::with_bath_dephasing(g, 4.0, 1.0).unwrap();
        let rho = prepare_initial_state(
            &sys,
            &BathPreparation::ExplicitPolarizations(vec![0.25, -0.15]),
            0.0,
            0.5,
        )
        .unwrap();
        let spec = EvolutionSpec::with_default_step(&sys, 1.0, 0.05).unwrap();
        let out = evolve(&sys, &rho, &spec).unwrap();
        for site in 0..3 {
            let col = out.z(site);
            for &z in col {
                assert_abs_diff_eq!(z, col[0], epsilon = 1e-12);
            }
        }
        for &x in out.x_system() {
            assert_abs_diff_eq!(x, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn conservation_laws_hold_along_evolution() {
        let sys = ata_system(3, 1.0, 6.0);
        let rho = prepare_initial_state(
            &sys,
            &BathPreparation::UniformPolarization { z: -0.5 },
            0.5,
            0.0,
        )
        .unwrap();
        let spec = EvolutionSpec::with_default_step(&sys, 5.0, 0.05).unwrap();
        let out = evolve(&sys, &rho, &spec).unwrap();
        let s0 = out.sum_z()[0];
        let p0 = out.pair_sum()[0];
        for k in 0..out.n_samples() {
            assert!((out.sum_z()[k] - s0).abs() <= 1e-8);
            assert!((out.pair_sum()[k] - p0).abs() <= 1e-8);
        }
        // uncorrelated product start: pair_sum(0) = sum_{i != j} z_i z_j
        let zs = [-0.5, -0.5, -0.5, 0.5];
        let mut direct = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    direct += zs[i] * zs[j];
                }
            }
        }
        assert_abs_diff_eq!(p0, direct, epsilon = 1e-12);
    }

    #[test]
    fn permuted_explicit_preparations_give_identical_system_dynamics() {
        // ATA is permutation symmetric over the bath: permuting the explicit
        // polarizations cannot change z_s(t) (exact symmetry).
        let sys = ata_system(3, 1.0, 6.0);
        let spec = EvolutionSpec::with_default_step(&sys, 3.0, 0.05).unwrap();
        let za = vec![0.1, -0.3, 0.45];
        let zb = vec![0.45, 0.1, -0.3];
        let run = |zs: Vec<f64>| {
            let rho = prepare_initial_state(
                &sys,
                &BathPreparation::ExplicitPolarizations(zs),
                0.5,
                0.0,
            )
            .unwrap();
            evolve(&sys, &rho, &spec).unwrap()
        };
        let oa = run(za);
        let ob = run(zb);
        for k in 0..oa.n_samples() {
            assert!((oa.z_system()[k] - ob.z_system()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_matches_fixed_step() {
        let sys = ata_system(2, 1.0, 6.0);
        let rho = prepare_initial_state(
            &sys,
            &BathPreparation::UniformPolarization { z: -0.4 },
            0.5,
            0.0,
        )
        .unwrap();
        let fixed = EvolutionSpec::new(2.0, 0.1, Integrator::FixedRk4 { dt: 1e-3 }).unwrap();
        let adapt = EvolutionSpec::new(
            2.0,
            0.1,
            Integrator::Adaptive {
                rel_tol: 1e-10,
                abs_tol: 1e-12,
            },
        )
        .unwrap();
        let of = evolve(&sys, &rho, &fixed).unwrap();
        let oa = evolve(&sys, &rho, &adapt).unwrap();
        for k in 0..of.n_samples() {
            assert!((of.z_system()[k] - oa.z_system()[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn evolution_spec_validation() {
        let sys = ata_system(1, 1.0, 1.0);
        assert!(EvolutionSpec::new(1.0, 2.0, Integrator::default_fixed(&sys)).is_err());
        assert!(EvolutionSpec::new(1.0, 0.1, Integrator::FixedRk4 { dt: 0.5 }).is_err());
        assert!(EvolutionSpec::new(
            1.0,
            0.1,
            Integrator::Adaptive {
                rel_tol: 0.0,
                abs_tol: 1e-9
            }
        )
        .is_err());
    }

    #[test]
    fn product_state_starts_uncorrelated() {
        let sys = ata_system(2, 1.0, 6.0);
        let rho = prepare_initial_state(
            &sys,
            &BathPreparation::UniformPolarization { z: -0.25 },
            0.25,
            0.0,
        )
        .unwrap();
        let spec = EvolutionSpec::with_default_step(&sys, 1.0, 0.1).unwrap();
        let out = evolve(&sys, &rho, &spec).unwrap();
        let corr = pearson_corr(&out, 2, 0).unwrap();
        assert_abs_diff_eq!(corr[0].unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn interaction_matches_spin_op_product() {
        // V assembled from spin_op products equals the engine's V
        let sys = ata_system(2, 0.7, 0.0);
        let v = sys.interaction();
        let n = sys.n_sites();
        let mut direct = Array2::<C64>::zeros((sys.dim(), sys.dim()));
        for i in 0..n {
            for j in (i + 1)..n {
                let mi = sys.spin_op(i, SpinOpKind::Minus).unwrap();
                let pj = sys.spin_op(j, SpinOpKind::Plus).unwrap();
                let pi = sys.spin_op(i, SpinOpKind::Plus).unwrap();
                let mj = sys.spin_op(j, SpinOpKind::Minus).unwrap();
                direct = direct
                    + (mi.dot(&pj) + pi.dot(&mj)).mapv(|c| c * C64::new(0.7, 0.0));
            }
        }
        let diff: f64 = (&v - &direct).iter().map(|c| c.norm()).sum();
        assert!(diff < 1e-14);
    }
}
