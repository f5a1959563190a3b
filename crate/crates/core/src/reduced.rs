//! Reduced-order models of the system dynamics.
//!
//! The closed second-order equation for the system polarization,
//!
//!   z̈_s = 2 ξ²_SB (N+1)/N (z_∞ − z_s) − α ż_s,     z_∞ = Σᵢ zᵢ(0)/(N+1),
//!
//! its Markovian (first-order) limit, the analogous damped equation for the
//! coherence ẍ_s = −ξ²_SB x_s − α ẋ_s, and a coupled per-spin truncation for
//! arbitrary graphs. The coherence equation is implemented with the decaying
//! sign (the printed equation grows, but the stated Markovian solution and
//! the γ_z/γ_x relation both require decay).

use crate::register::SpinSystem;
use crate::series::ObservableSeries;
use crate::{C64, Error, Result};

/// Inputs of the closed-form models.
#[derive(Debug, Clone, Copy)]
pub struct ReducedModelParams {
    pub n_bath: usize,
    /// ξ²_SB = Σ_k ξ²_{s,k} (Nξ² for ATA, ξ²_{N,N+1} for the chain).
    pub xi_sb_sq: f64,
    pub alpha: f64,
    pub z_inf: f64,
    pub z_s0: f64,
    pub x_s0: f64,
    /// Initial slope ż_s(0); 0 without initial system-bath coherence.
    pub dz0: f64,
}

impl ReducedModelParams {
    pub fn new(
        n_bath: usize,
        xi_sb_sq: f64,
        alpha: f64,
        z_inf: f64,
        z_s0: f64,
        x_s0: f64,
        dz0: f64,
    ) -> Result<Self> {
        if n_bath == 0 {
            return Err(Error::InvalidParameter("need at least one bath spin".into()));
        }
        if xi_sb_sq < 0.0 || alpha < 0.0 {
            return Err(Error::InvalidParameter(
                "xi_sb_sq and alpha must be >= 0".into(),
            ));
        }
        if z_s0.abs() > 0.5 || z_inf.abs() > 0.5 {
            return Err(Error::InvalidParameter(
                "polarizations must lie in [-1/2, 1/2]".into(),
            ));
        }
        Ok(Self {
            n_bath,
            xi_sb_sq,
            alpha,
            z_inf,
            z_s0,
            x_s0,
            dz0,
        })
    }

    /// Derive the parameters from a register and its initial polarizations.
    pub fn from_preparation(
        sys: &SpinSystem,
        bath_z: &[f64],
        z_s0: f64,
        x_s0: f64,
    ) -> Result<Self> {
        if bath_z.len() != sys.n_bath() {
            return Err(Error::DimensionMismatch {
                expected: sys.n_bath(),
                got: bath_z.len(),
            });
        }
        let alpha = sys.alphas()[..sys.n_bath()]
            .iter()
            .fold(0.0f64, |a, &x| a.max(x));
        Self::new(
            sys.n_bath(),
            sys.coupling().system_coupling_sq(),
            alpha,
            z_infinity(bath_z, z_s0)?,
            z_s0,
            x_s0,
            0.0,
        )
    }

    /// ω² of the polarization equation: 2 ξ²_SB (N+1)/N.
    pub fn omega_sq_z(&self) -> f64 {
        2.0 * self.xi_sb_sq * (self.n_bath + 1) as f64 / self.n_bath as f64
    }
}

/// Equal-sharing asymptote z_∞ = (Σ bath z + z_s(0)) / (N+1).
pub fn z_infinity(bath_z: &[f64], z_s0: f64) -> Result<f64> {
    if bath_z.is_empty() {
        return Err(Error::InvalidParameter("empty bath polarization list".into()));
    }
    let n = bath_z.len() as f64;
    Ok((bath_z.iter().sum::<f64>() + z_s0) / (n + 1.0))
}

/// Markovian polarization decay rate 2 ξ²_SB (N+1) / (N α).
pub fn markovian_z_rate(p: &ReducedModelParams) -> Result<f64> {
    if p.alpha <= 0.0 {
        return Err(Error::InvalidParameter(
            "the Markovian limit needs alpha > 0".into(),
        ));
    }
    Ok(p.omega_sq_z() / p.alpha)
}

/// Markovian coherence decay rate ξ²_SB / α.
pub fn markovian_x_rate(p: &ReducedModelParams) -> Result<f64> {
    if p.alpha <= 0.0 {
        return Err(Error::InvalidParameter(
            "the Markovian limit needs alpha > 0".into(),
        ));
    }
    Ok(p.xi_sb_sq / p.alpha)
}

/// z_s(t) = z_∞ + (z_s(0) − z_∞) exp[−2ξ²_SB (N+1)/(Nα) t].
pub fn markovian_z(p: &ReducedModelParams, t: f64) -> Result<f64> {
    let rate = markovian_z_rate(p)?;
    Ok(p.z_inf + (p.z_s0 - p.z_inf) * (-rate * t).exp())
}

/// x_s(t) = x_s(0) exp[−ξ²_SB t / α].
pub fn markovian_x(p: &ReducedModelParams, t: f64) -> Result<f64> {
    let rate = markovian_x_rate(p)?;
    Ok(p.x_s0 * (-rate * t).exp())
}

/// Closed-form solution of ÿ = −ω²(y − offset) − α ẏ.
#[derive(Debug, Clone, Copy)]
pub struct SecondOrderSolution {
    offset: f64,
    alpha: f64,
    branch: Branch,
}

#[derive(Debug, Clone, Copy)]
enum Branch {
    /// y = offset + c₊ e^{λ₊ t} + c₋ e^{λ₋ t}
    Overdamped { lp: f64, lm: f64, cp: f64, cm: f64 },
    /// y = offset + (a + b t) e^{−αt/2}
    Critical { a: f64, b: f64 },
    /// y = offset + e^{−αt/2} (a cos Ωt + b sin Ωt)
    Underdamped { omega: f64, a: f64, b: f64 },
}

impl SecondOrderSolution {
    fn build(offset: f64, alpha: f64, omega_sq: f64, y0: f64, dy0: f64) -> Self {
        let a0 = y0 - offset;
        let disc = alpha * alpha - 4.0 * omega_sq;
        // relative threshold for the critically-damped branch
        let scale = (alpha * alpha).max(4.0 * omega_sq).max(f64::MIN_POSITIVE);
        let branch = if disc > 1e-12 * scale {
            let s = disc.sqrt();
            let lp = (-alpha + s) / 2.0;
            let lm = (-alpha - s) / 2.0;
            let cp = (dy0 - lm * a0) / (lp - lm);
            Branch::Overdamped {
                lp,
                lm,
                cp,
                cm: a0 - cp,
            }
        } else if disc < -1e-12 * scale {
            let omega = (-disc).sqrt() / 2.0;
            Branch::Underdamped {
                omega,
                a: a0,
                b: (dy0 + 0.5 * alpha * a0) / omega,
            }
        } else {
            Branch::Critical {
                a: a0,
                b: dy0 + 0.5 * alpha * a0,
            }
        };
        Self {
            offset,
            alpha,
            branch,
        }
    }

    /// Polarization solution: ω² = 2ξ²_SB(N+1)/N, y(0) = z_s0, y′(0) = dz0.
    pub fn polarization(p: &ReducedModelParams) -> Self {
        Self::build(p.z_inf, p.alpha, p.omega_sq_z(), p.z_s0, p.dz0)
    }

    /// Coherence solution: ω² = ξ²_SB, y(0) = x_s0, y′(0) = 0, decays to 0.
    pub fn coherence(p: &ReducedModelParams) -> Self {
        Self::build(0.0, p.alpha, p.xi_sb_sq, p.x_s0, 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.offset
            + match self.branch {
                Branch::Overdamped { lp, lm, cp, cm } => {
                    cp * (lp * t).exp() + cm * (lm * t).exp()
                }
                Branch::Critical { a, b } => (a + b * t) * (-0.5 * self.alpha * t).exp(),
                Branch::Underdamped { omega, a, b } => {
                    (-0.5 * self.alpha * t).exp()
                        * (a * (omega * t).cos() + b * (omega * t).sin())
                }
            }
    }

    /// Characteristic roots as a complex pair (λ₊, λ₋).
    pub fn roots(&self) -> (C64, C64) {
        match self.branch {
            Branch::Overdamped { lp, lm, .. } => (C64::new(lp, 0.0), C64::new(lm, 0.0)),
            Branch::Critical { .. } => {
                let l = -0.5 * self.alpha;
                (C64::new(l, 0.0), C64::new(l, 0.0))
            }
            Branch::Underdamped { omega, .. } => (
                C64::new(-0.5 * self.alpha, omega),
                C64::new(-0.5 * self.alpha, -omega),
            ),
        }
    }
}

/// Convenience: second-order polarization model at time t.
pub fn second_order_z(p: &ReducedModelParams, t: f64) -> f64 {
    SecondOrderSolution::polarization(p).eval(t)
}

/// Convenience: second-order coherence model at time t.
pub fn second_order_x(p: &ReducedModelParams, t: f64) -> f64 {
    SecondOrderSolution::coherence(p).eval(t)
}

/// Markovianity measure α/ξ_SB with the size of the neglected second
/// derivative, O[(ξ_SB/α)²]. A decoupled system (ξ_SB = 0) reports ∞.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MarkovianityDiagnostic {
    pub alpha_over_xi_sb: f64,
    pub neglected_term_estimate: f64,
}

pub fn markovianity_diagnostic(p: &ReducedModelParams) -> MarkovianityDiagnostic {
    let xi_sb = p.xi_sb_sq.sqrt();
    if xi_sb == 0.0 {
        return MarkovianityDiagnostic {
            alpha_over_xi_sb: f64::INFINITY,
            neglected_term_estimate: 0.0,
        };
    }
    let r = p.alpha / xi_sb;
    MarkovianityDiagnostic {
        alpha_over_xi_sb: r,
        neglected_term_estimate: (xi_sb / p.alpha).powi(2),
    }
}

/// Coupled per-spin truncation for arbitrary graphs.
///
/// The derivation behind the closed system-spin equation is label symmetric;
/// applying the same truncation to every spin yields the pair-flow system
///
///   ż_i = Σ_k J_ik,   J̇_ik = −2 ξ²_ik (z_i − z_k) − (α_i + α_k) J_ik,
///
/// with J_ik = −J_ki and J_ik(0) = 0. Σz is conserved exactly and the ATA
/// case reduces algebraically to the closed second-order equation.
///
/// Returns z[site][sample] on the given output grid (ż_i(0) = 0).
pub fn coupled_second_order(
    sys: &SpinSystem,
    z_init: &[f64],
    t_grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = sys.n_sites();
    if z_init.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: z_init.len(),
        });
    }
    if t_grid.is_empty() || t_grid[0] != 0.0 {
        return Err(Error::InvalidParameter(
            "output grid must start at t = 0".into(),
        ));
    }
    for w in t_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter(
                "output grid must be strictly increasing".into(),
            ));
        }
    }
    let alphas = sys.alphas();
    let xi = sys.coupling().matrix();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();

    // state = (z_0..z_{n-1}, J_0..J_{m-1}) with J ordered like `pairs`
    let m = pairs.len();
    let deriv = |state: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = 0.0;
        }
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let jflow = state[n + p];
            out[i] += jflow;
            out[j] -= jflow;
            out[n + p] = -2.0 * xi[[i, j]] * xi[[i, j]] * (state[i] - state[j])
                - (alphas[i] + alphas[j]) * jflow;
        }
    };

    // stiffness scale: pair damping and exchange frequency
    let max_pair_alpha = pairs
        .iter()
        .map(|&(i, j)| alphas[i] + alphas[j])
        .fold(0.0f64, f64::max);
    let omega_max = (2.0 * (n as f64)).sqrt() * sys.coupling().max_coupling();
    let scale = max_pair_alpha.max(omega_max).max(1e-12);
    let dt_int = 0.02 / scale;

    let mut state = vec![0.0; n + m];
    state[..n].copy_from_slice(z_init);
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(t_grid.len()); n];
    let mut k1 = vec![0.0; n + m];
    let mut k2 = vec![0.0; n + m];
    let mut k3 = vec![0.0; n + m];
    let mut k4 = vec![0.0; n + m];
    let mut tmp = vec![0.0; n + m];

    let record = |state: &[f64], out: &mut Vec<Vec<f64>>| {
        for i in 0..n {
            out[i].push(state[i]);
        }
    };
    record(&state, &mut out);
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        let steps = (span / dt_int).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            deriv(&state, &mut k1);
            for i in 0..state.len() {
                tmp[i] = state[i] + 0.5 * h * k1[i];
            }
            deriv(&tmp, &mut k2);
            for i in 0..state.len() {
                tmp[i] = state[i] + 0.5 * h * k2[i];
            }
            deriv(&tmp, &mut k3);
            for i in 0..state.len() {
                tmp[i] = state[i] + h * k3[i];
            }
            deriv(&tmp, &mut k4);
            for i in 0..state.len() {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        record(&state, &mut out);
    }
    Ok(out)
}

fn closure_bath_z(n_bath: usize, z_inf: f64, z_s: f64) -> f64 {
    ((n_bath + 1) as f64 * z_inf - z_s) / n_bath as f64
}

fn model_series(
    n_bath: usize,
    times: &[f64],
    z_s: Vec<f64>,
    x_s: Vec<f64>,
    z_inf: f64,
) -> Result<ObservableSeries> {
    let n_sites = n_bath + 1;
    let mut z = vec![Vec::with_capacity(times.len()); n_sites];
    for &zs in &z_s {
        let zb = closure_bath_z(n_bath, z_inf, zs);
        for col in z.iter_mut().take(n_bath) {
            col.push(zb);
        }
        z[n_bath].push(zs);
    }
    let n_pairs = n_sites * (n_sites - 1) / 2;
    let zz = vec![vec![f64::NAN; times.len()]; n_pairs];
    let trace_err = vec![0.0; times.len()];
    ObservableSeries::from_parts(times.to_vec(), z, x_s, zz, trace_err)
}

/// Markovian model evaluated on a grid, as a series in the common CSV layout.
/// Bath columns carry the uniform-closure average; pair correlators are NaN.
pub fn markovian_series(p: &ReducedModelParams, times: &[f64]) -> Result<ObservableSeries> {
    let z_s: Vec<f64> = times
        .iter()
        .map(|&t| markovian_z(p, t))
        .collect::<Result<_>>()?;
    let x_s: Vec<f64> = times
        .iter()
        .map(|&t| markovian_x(p, t))
        .collect::<Result<_>>()?;
    model_series(p.n_bath, times, z_s, x_s, p.z_inf)
}

/// Second-order model evaluated on a grid; same layout as [`markovian_series`].
pub fn second_order_series(p: &ReducedModelParams, times: &[f64]) -> Result<ObservableSeries> {
    let zsol = SecondOrderSolution::polarization(p);
    let xsol = SecondOrderSolution::coherence(p);
    let z_s: Vec<f64> = times.iter().map(|&t| zsol.eval(t)).collect();
    let x_s: Vec<f64> = times.iter().map(|&t| xsol.eval(t)).collect();
    model_series(p.n_bath, times, z_s, x_s, p.z_inf)
}

/// Coupled per-spin model as a series; the coherence is not modeled (NaN).
pub fn coupled_series(
    sys: &SpinSystem,
    z_init: &[f64],
    times: &[f64],
) -> Result<ObservableSeries> {
    let z = coupled_second_order(sys, z_init, times)?;
    let n_sites = sys.n_sites();
    let n_pairs = n_sites * (n_sites - 1) / 2;
    let x_s = vec![f64::NAN; times.len()];
    let zz = vec![vec![f64::NAN; times.len()]; n_pairs];
    let trace_err = vec![0.0; times.len()];
    ObservableSeries::from_parts(times.to_vec(), z, x_s, zz, trace_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::register::CouplingGraph;
    use approx::assert_abs_diff_eq;

    fn fig1_params() -> ReducedModelParams {
        // N=3 ATA xi=1 alpha=6: xi_sb_sq = 3, omega^2 = 8, roots -2 and -4
        ReducedModelParams::new(3, 3.0, 6.0, -0.25, 0.5, 0.0, 0.0).unwrap()
    }

    #[test]
    fn z_infinity_examples() {
        assert_abs_diff_eq!(
            z_infinity(&[-0.5, -0.5, -0.5], 0.5).unwrap(),
            -0.25,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(z_infinity(&[0.3, 0.3], 0.3).unwrap(), 0.3, epsilon = 1e-15);
        // |z_inf - z_T| = |z_s0 - z_T| / (N+1)
        for n in [1usize, 3, 7, 20] {
            let z_t = -0.4;
            let z_s0 = 0.2;
            let zi = z_infinity(&vec![z_t; n], z_s0).unwrap();
            assert_abs_diff_eq!(
                (zi - z_t).abs(),
                (z_s0 - z_t).abs() / (n + 1) as f64,
                epsilon = 1e-15
            );
        }
        assert!(z_infinity(&[], 0.0).is_err());
    }

    #[test]
    fn markovian_endpoints_and_rate() {
        let p = fig1_params();
        assert_abs_diff_eq!(markovian_z(&p, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(markovian_z(&p, 1e4).unwrap(), -0.25, epsilon = 1e-12);
        // rate 2*3/6 * 4/3 = 4/3 at fig-1 parameters
        assert_abs_diff_eq!(markovian_z_rate(&p).unwrap(), 4.0 / 3.0, epsilon = 1e-15);
        let mut p0 = p;
        p0.alpha = 0.0;
        assert!(markovian_z(&p0, 1.0).is_err());
        assert!(markovian_x(&p0, 1.0).is_err());
    }

    #[test]
    fn rate_ratio_is_twice_np1_over_n() {
        for n in [1usize, 2, 3, 8] {
            let p = ReducedModelParams::new(n, 2.0, 25.0, 0.0, 0.1, 0.2, 0.0).unwrap();
            let gz = markovian_z_rate(&p).unwrap();
            let gx = markovian_x_rate(&p).unwrap();
            assert_abs_diff_eq!(
                gz / gx,
                2.0 * (n + 1) as f64 / n as f64,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn second_order_matches_hand_solution() {
        // lambda^2 + 6 lambda + 8 = 0 -> -2, -4;
        // z - z_inf = (z0 - z_inf)(2 e^{-2t} - e^{-4t})
        let p = fig1_params();
        let sol = SecondOrderSolution::polarization(&p);
        let (lp, lm) = sol.roots();
        assert_abs_diff_eq!(lp.re, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lm.re, -4.0, epsilon = 1e-12);
        for &t in &[0.0f64, 0.1, 0.5, 1.0, 3.0] {
            let reference = -0.25 + 0.75 * (2.0 * (-2.0 * t).exp() - (-4.0 * t).exp());
            assert_abs_diff_eq!(sol.eval(t), reference, epsilon = 1e-12);
        }
    }

    #[test]
    fn equilibrium_start_stays_constant() {
        let p = ReducedModelParams::new(3, 3.0, 6.0, 0.1, 0.1, 0.0, 0.0).unwrap();
        for &t in &[0.0, 0.7, 5.0] {
            assert_abs_diff_eq!(second_order_z(&p, t), 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn short_time_taylor_expansion() {
        // z(t) - z0 = 1/2 omega^2 (z_inf - z0) t^2 + O(t^3)
        let p = fig1_params();
        let om2 = p.omega_sq_z();
        for &t in &[1e-4, 3e-4, 1e-3] {
            let lead = 0.5 * om2 * (p.z_inf - p.z_s0) * t * t;
            let got = second_order_z(&p, t) - p.z_s0;
            assert!((got - lead).abs() < 10.0 * om2 * t * t * t);
        }
    }

    #[test]
    fn zero_initial_slope_and_curvature() {
        // dz0 = 0: central difference slope vanishes to O(h^2 z''')
        let p = fig1_params();
        let sol = SecondOrderSolution::polarization(&p);
        let h = 1e-4;
        let slope = (sol.eval(h) - sol.eval(-h)) / (2.0 * h);
        assert!(slope.abs() < 1e-6, "slope = {slope}");
        // z''(0) = omega^2 (z_inf - z0) - alpha dz0
        let d2 = (sol.eval(h) - 2.0 * sol.eval(0.0) + sol.eval(-h)) / (h * h);
        let want = p.omega_sq_z() * (p.z_inf - p.z_s0) - p.alpha * p.dz0;
        assert_abs_diff_eq!(d2, want, epsilon = 1e-4);
    }

    #[test]
    fn coherence_roots_at_fig1_parameters() {
        // lambda^2 + 6 lambda + 3 = 0 -> -3 ± sqrt(6)
        let p = fig1_params();
        let sol = SecondOrderSolution::coherence(&p);
        let (lp, lm) = sol.roots();
        assert_abs_diff_eq!(lp.re, -3.0 + 6.0f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(lm.re, -3.0 - 6.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn coherence_slow_root_approaches_markovian_rate() {
        // alpha >> xi_sb: slow root -> xi_sb^2/alpha within O((xi_sb/alpha)^2)
        let p = ReducedModelParams::new(3, 3.0, 40.0 * 3.0f64.sqrt(), 0.0, 0.0, 0.5, 0.0)
            .unwrap();
        let sol = SecondOrderSolution::coherence(&p);
        let (lp, _) = sol.roots();
        let mark = markovian_x_rate(&p).unwrap();
        let rel = ((-lp.re) - mark).abs() / mark;
        let small = (p.xi_sb_sq.sqrt() / p.alpha).powi(2);
        assert!(rel < 2.0 * small, "rel = {rel}, small = {small}");
    }

    #[test]
    fn zero_coherence_stays_zero() {
        let p = fig1_params();
        for &t in &[0.0, 0.5, 2.0] {
            assert_abs_diff_eq!(second_order_x(&p, t), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(markovian_x(&p, t).unwrap(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn critically_damped_branch_is_continuous() {
        // alpha^2 = 4 omega^2 exactly, and nearby values agree
        let om2 = 4.0;
        let alpha = 4.0; // disc = 0
        let mk = |a: f64| {
            let mut p = ReducedModelParams::new(1, om2 / 4.0, a, 0.0, 0.4, 0.0, 0.0).unwrap();
            // omega_sq_z = 2 * xi^2 * 2 = om2 with n_bath = 1 and xi_sb_sq = om2/4
            p.dz0 = 0.0;
            p
        };
        let exact = SecondOrderSolution::polarization(&mk(alpha));
        let above = SecondOrderSolution::polarization(&mk(alpha + 1e-7));
        let below = SecondOrderSolution::polarization(&mk(alpha - 1e-7));
        for &t in &[0.0, 0.3, 1.0, 4.0] {
            assert!((exact.eval(t) - above.eval(t)).abs() < 1e-6);
            assert!((exact.eval(t) - below.eval(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn undamped_oscillation_when_alpha_is_zero() {
        let p = ReducedModelParams::new(3, 3.0, 0.0, -0.25, 0.5, 0.0, 0.0).unwrap();
        let sol = SecondOrderSolution::polarization(&p);
        let om = p.omega_sq_z().sqrt();
        let period = 2.0 * std::f64::consts::PI / om;
        assert_abs_diff_eq!(sol.eval(period), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.eval(period / 2.0), -0.25 - 0.75, epsilon = 1e-9);
    }

    #[test]
    fn coupled_reduces_to_closed_form_for_ata() {
        let g = CouplingGraph::all_to_all(3, 1.0).unwrap();
        let sys = SpinSystem::with_bath_dephasing(g, 6.0, 1.0).unwrap();
        let z_init = vec![-0.5, -0.5, -0.5, 0.5];
        let grid: Vec<f64> = (0..=60).map(|k| k as f64 * 0.05).collect();
        let z = coupled_second_order(&sys, &z_init, &grid).unwrap();
        let p = fig1_params();
        let sol = SecondOrderSolution::polarization(&p);
        for (k, &t) in grid.iter().enumerate() {
            assert!(
                (z[3][k] - sol.eval(t)).abs() <= 1e-8,
                "t = {t}: {} vs {}",
                z[3][k],
                sol.eval(t)
            );
        }
    }

    #[test]
    fn coupled_conserves_total_polarization() {
        let g = CouplingGraph::nearest_neighbor(3, 1.0, 0.05).unwrap();
        let sys = SpinSystem::with_bath_dephasing(g, 6.0, 1.0).unwrap();
        let z_init = vec![-0.4, 0.2, -0.1, 0.5];
        let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25).collect();
        let z = coupled_second_order(&sys, &z_init, &grid).unwrap();
        let s0: f64 = z_init.iter().sum();
        for k in 0..grid.len() {
            let s: f64 = (0..4).map(|i| z[i][k]).sum();
            assert!((s - s0).abs() <= 1e-8);
        }
    }

    #[test]
    fn coupled_constant_when_all_equal() {
        let g = CouplingGraph::all_to_all(2, 0.7).unwrap();
        let sys = SpinSystem::with_bath_dephasing(g, 2.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.3).collect();
        let z = coupled_second_order(&sys, &[0.2, 0.2, 0.2], &grid).unwrap();
        for col in &z {
            for &v in col {
                assert_abs_diff_eq!(v, 0.2, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn markovianity_diagnostic_values() {
        let p = fig1_params();
        let d = markovianity_diagnostic(&p);
        assert_abs_diff_eq!(d.alpha_over_xi_sb, 6.0 / 3.0f64.sqrt(), epsilon = 1e-12);
        let p10 = ReducedModelParams::new(3, 3.0, 10.0 * 3.0f64.sqrt(), 0.0, 0.0, 0.0, 0.0)
            .unwrap();
        let d10 = markovianity_diagnostic(&p10);
        assert_abs_diff_eq!(d10.neglected_term_estimate, 0.01, epsilon = 1e-12);
        let p0 = ReducedModelParams::new(3, 0.0, 6.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(markovianity_diagnostic(&p0).alpha_over_xi_sb.is_infinite());
    }
}
