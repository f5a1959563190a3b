//! Spin register: operator conventions, coupling-graph families, and initial
//! state preparation.
//!
//! Half-spin convention: σᶻ = diag(1/2, −1/2) and σ⁺ = [[0,1],[0,0]], so that
//! σᶻσ±σᶻ = −¼σ± holds and polarizations lie in [−1/2, 1/2]. `Z`/`Plus`/
//! `Minus` return these; `X` returns S_x = (σ⁺+σ⁻)/2 with eigenvalues ±1/2.
//!
//! Basis ordering: site-major tensor product with the system spin last, i.e.
//! basis index b = b_0 b_1 … b_{N} in binary with b_0 the most significant
//! bit; bit value 0 is spin up (+1/2). Sites are indexed 0..=N with bath
//! spins 0..N and the system at index N.

use std::io::Write;

use ndarray::prelude::*;
use ndarray::linalg::kron;

use crate::{C64, Error, Result};
use crate::linalg::{hermiticity_error, min_eigenvalue, trace};

/// Hard cap on the bath size; the joint dimension 2^(N+1) stays ≤ 8192.
pub const MAX_BATH_SPINS: usize = 12;

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;

/// Single-site operator kind for [`spin_op`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinOpKind {
    /// σᶻ = diag(1/2, −1/2)
    Z,
    /// σ⁺ = |↑⟩⟨↓|
    Plus,
    /// σ⁻ = |↓⟩⟨↑|
    Minus,
    /// S_x = (σ⁺ + σ⁻)/2, eigenvalues ±1/2
    X,
}

fn single_site(kind: SpinOpKind) -> Array2<C64> {
    let mut m = Array2::<C64>::zeros((2, 2));
    match kind {
        SpinOpKind::Z => {
            m[[0, 0]] = C64::new(0.5, 0.0);
            m[[1, 1]] = C64::new(-0.5, 0.0);
        }
        SpinOpKind::Plus => m[[0, 1]] = C64::new(1.0, 0.0),
        SpinOpKind::Minus => m[[1, 0]] = C64::new(1.0, 0.0),
        SpinOpKind::X => {
            m[[0, 1]] = C64::new(0.5, 0.0);
            m[[1, 0]] = C64::new(0.5, 0.0);
        }
    }
    m
}

/// Embed a single-site operator at `site` (0-based) into the 2^n_sites space,
/// identities elsewhere, site-major ordering.
pub fn spin_op(n_sites: usize, site: usize, kind: SpinOpKind) -> Result<Array2<C64>> {
    if site >= n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    let eye = Array2::<C64>::eye(2);
    let mut out = Array2::<C64>::eye(1);
    for k in 0..n_sites {
        let factor = if k == site { single_site(kind) } else { eye.clone() };
        out = kron(&out, &factor);
    }
    Ok(out)
}

/// Per-site ±1/2 weight of σᶻ_site on basis index `b` (site-major, bit 0 = up).
#[inline]
pub(crate) fn z_weight(b: usize, site: usize, n_sites: usize) -> f64 {
    let bit = (b >> (n_sites - 1 - site)) & 1;
    if bit == 0 { 0.5 } else { -0.5 }
}

/// Symmetric coupling matrix ξ_ij over the N+1 sites (zero diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGraph {
    xi: Array2<f64>,
}

impl CouplingGraph {
    /// Validate and wrap an explicit coupling matrix.
    pub fn from_matrix(xi: Array2<f64>) -> Result<Self> {
        let n = xi.nrows();
        if xi.ncols() != n {
            return Err(Error::InvalidGraph(format!(
                "coupling matrix must be square, got {}x{}",
                n,
                xi.ncols()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidGraph(
                "need at least one bath spin plus the system".into(),
            ));
        }
        if n - 1 > MAX_BATH_SPINS {
            return Err(Error::InvalidGraph(format!(
                "bath size {} exceeds cap {MAX_BATH_SPINS}",
                n - 1
            )));
        }
        for i in 0..n {
            if xi[[i, i]] != 0.0 {
                return Err(Error::InvalidGraph(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if xi[[i, j]] != xi[[j, i]] {
                    return Err(Error::InvalidGraph(format!(
                        "asymmetric entry at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { xi })
    }

    /// All-to-all coupling: every pair at strength `xi`; ξ²_SB = N ξ².
    pub fn all_to_all(n_bath: usize, xi: f64) -> Result<Self> {
        let n = n_bath + 1;
        let mut m = Array2::from_elem((n, n), xi);
        m.diag_mut().fill(0.0);
        Self::from_matrix(m)
    }

    /// Linear chain: bath links at `xi_bath`, final bath-system link at
    /// `xi_sb`; ξ²_SB = ξ²_sb.
    pub fn nearest_neighbor(n_bath: usize, xi_bath: f64, xi_sb: f64) -> Result<Self> {
        let n = n_bath + 1;
        let mut m = Array2::zeros((n, n));
        for i in 0..n_bath.saturating_sub(1) {
            m[[i, i + 1]] = xi_bath;
            m[[i + 1, i]] = xi_bath;
        }
        m[[n_bath - 1, n_bath]] = xi_sb;
        m[[n_bath, n_bath - 1]] = xi_sb;
        Self::from_matrix(m)
    }

    /// Power-law chain ξ_ij = ξ₀ / |i−j|^δ (ion-trap family). δ = 0 gives the
    /// all-to-all graph. Values of δ outside [0, 3] are accepted; callers that
    /// care should warn.
    pub fn power_law(n_bath: usize, xi0: f64, delta: f64) -> Result<Self> {
        let n = n_bath + 1;
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m[[i, j]] = xi0 / ((i as f64 - j as f64).abs()).powf(delta);
                }
            }
        }
        Self::from_matrix(m)
    }

    pub fn n_sites(&self) -> usize {
        self.xi.nrows()
    }

    pub fn n_bath(&self) -> usize {
        self.n_sites() - 1
    }

    pub fn xi(&self, i: usize, j: usize) -> f64 {
        self.xi[[i, j]]
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.xi
    }

    /// Effective squared system-bath coupling ξ²_SB = Σ_k ξ²_{s,k}.
    pub fn system_coupling_sq(&self) -> f64 {
        let s = self.n_bath();
        (0..s).map(|k| self.xi[[s, k]].powi(2)).sum()
    }

    /// True when no coupling touches the system site. Allowed, but most
    /// scenarios want to flag it.
    pub fn is_system_decoupled(&self) -> bool {
        self.system_coupling_sq() == 0.0
    }

    pub fn max_coupling(&self) -> f64 {
        self.xi.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }
}

/// The full register: coupling graph, per-site dephasing rates, and the level
/// splitting h₀ (used only for thermal preparation; the dynamics runs in the
/// interaction picture).
#[derive(Debug, Clone)]
pub struct SpinSystem {
    coupling: CouplingGraph,
    alpha: Vec<f64>,
    h0: f64,
}

impl SpinSystem {
    /// Per-site dephasing rates, length N+1 with the system last.
    pub fn new(coupling: CouplingGraph, alpha: Vec<f64>, h0: f64) -> Result<Self> {
        if alpha.len() != coupling.n_sites() {
            return Err(Error::DimensionMismatch {
                expected: coupling.n_sites(),
                got: alpha.len(),
            });
        }
        if alpha.iter().any(|&a| a < 0.0 || !a.is_finite()) {
            return Err(Error::InvalidParameter(
                "dephasing rates must be finite and >= 0".into(),
            ));
        }
        Ok(Self { coupling, alpha, h0 })
    }

    /// Uniform dephasing `alpha` on the bath spins, none on the system.
    pub fn with_bath_dephasing(coupling: CouplingGraph, alpha: f64, h0: f64) -> Result<Self> {
        let n_bath = coupling.n_bath();
        let mut rates = vec![alpha; n_bath];
        rates.push(0.0);
        Self::new(coupling, rates, h0)
    }

    pub fn n_bath(&self) -> usize {
        self.coupling.n_bath()
    }

    pub fn n_sites(&self) -> usize {
        self.coupling.n_sites()
    }

    /// Joint Hilbert-space dimension 2^(N+1).
    pub fn dim(&self) -> usize {
        1 << self.n_sites()
    }

    /// Index of the system spin (last site).
    pub fn system_site(&self) -> usize {
        self.n_bath()
    }

    pub fn coupling(&self) -> &CouplingGraph {
        &self.coupling
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn max_alpha(&self) -> f64 {
        self.alpha.iter().fold(0.0f64, |a, &x| a.max(x))
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn spin_op(&self, site: usize, kind: SpinOpKind) -> Result<Array2<C64>> {
        spin_op(self.n_sites(), site, kind)
    }

    /// Interaction V = Σ_{i<j} ξ_ij (σᵢ⁻σⱼ⁺ + σᵢ⁺σⱼ⁻).
    pub fn interaction(&self) -> Array2<C64> {
        let n = self.n_sites();
        let dim = self.dim();
        let mut v = Array2::<C64>::zeros((dim, dim));
        for i in 0..n {
            for j in (i + 1)..n {
                let x = self.coupling.xi(i, j);
                if x == 0.0 {
                    continue;
                }
                let mi = spin_op(n, i, SpinOpKind::Minus).expect("site in range");
                let pj = spin_op(n, j, SpinOpKind::Plus).expect("site in range");
                let hop = mi.dot(&pj);
                let hop_dag = hop.t().mapv(|c| c.conj());
                v.scaled_add(C64::new(x, 0.0), &(&hop + &hop_dag));
            }
        }
        v
    }
}

/// Joint density matrix, validated Hermitian and trace-one on construction.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    m: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(m: Array2<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidState(format!(
                "density matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let herm = hermiticity_error(&m);
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian: max deviation {herm:.3e}"
            )));
        }
        let tr = trace(&m);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace = {tr} (must be 1)")));
        }
        Ok(Self { m })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.m
    }

    pub fn into_array(self) -> Array2<C64> {
        self.m
    }

    /// Smallest eigenvalue; ≥ −1e−10 for a valid state.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(&self.m)
    }
}

/// Initial bath preparations. All variants except `ExplicitDensity` are
/// diagonal in the σᶻ product basis.
#[derive(Debug, Clone)]
pub enum BathPreparation {
    /// Gibbs state of H = h₀σᶻ per spin; `f64::INFINITY` gives z_T = 0.
    Thermal { temperature: f64 },
    /// Every bath spin at polarization z ∈ [−1/2, 1/2].
    UniformPolarization { z: f64 },
    /// Per-spin polarizations, length N.
    ExplicitPolarizations(Vec<f64>),
    /// p |↑…↑⟩⟨↑…↑| + (1−p) |↓…↓⟩⟨↓…↓| on the bath.
    ClassicalMixture { p_all_up: f64 },
    /// Arbitrary density matrix on the 2^N bath subspace.
    ExplicitDensity(Array2<C64>),
}

/// Gibbs-state polarization ⟨σᶻ⟩ = −(1/2)·tanh(h₀/(2T)) for H = h₀σᶻ.
///
/// Note the 1/2 factor: the paper quotes z_T = −tanh[h₀/(2T)], which is
/// inconsistent with the half-spin range [−1/2, 1/2] its correlation formula
/// relies on; the half-spin value is used everywhere here.
pub fn thermal_polarization(h0: f64, temperature: f64) -> Result<f64> {
    if temperature.is_infinite() && temperature > 0.0 {
        return Ok(0.0);
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    Ok(-0.5 * (h0 / (2.0 * temperature)).tanh())
}

fn check_polarization(z: f64) -> Result<()> {
    if !(z.is_finite() && (-0.5..=0.5).contains(&z)) {
        return Err(Error::InvalidParameter(format!(
            "polarization {z} outside [-1/2, 1/2]"
        )));
    }
    Ok(())
}

fn diag_spin(z: f64) -> Array2<C64> {
    let mut m = Array2::<C64>::zeros((2, 2));
    m[[0, 0]] = C64::new(0.5 + z, 0.0);
    m[[1, 1]] = C64::new(0.5 - z, 0.0);
    m
}

fn bath_density(sys: &SpinSystem, bath: &BathPreparation) -> Result<Array2<C64>> {
    let n_bath = sys.n_bath();
    let pols: Vec<f64> = match bath {
        BathPreparation::Thermal { temperature } => {
            vec![thermal_polarization(sys.h0(), *temperature)?; n_bath]
        }
        BathPreparation::UniformPolarization { z } => {
            check_polarization(*z)?;
            vec![*z; n_bath]
        }
        BathPreparation::ExplicitPolarizations(zs) => {
            if zs.len() != n_bath {
                return Err(Error::DimensionMismatch {
                    expected: n_bath,
                    got: zs.len(),
                });
            }
            for &z in zs {
                check_polarization(z)?;
            }
            zs.clone()
        }
        BathPreparation::ClassicalMixture { p_all_up } => {
            let p = *p_all_up;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "mixture weight {p} outside [0, 1]"
                )));
            }
            let dim = 1usize << n_bath;
            let mut m = Array2::<C64>::zeros((dim, dim));
            m[[0, 0]] = C64::new(p, 0.0); // all up
            m[[dim - 1, dim - 1]] = C64::new(1.0 - p, 0.0); // all down
            return Ok(m);
        }
        BathPreparation::ExplicitDensity(m) => {
            let dim = 1usize << n_bath;
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.nrows(),
                });
            }
            // run the full state checks on the bath factor
            let checked = DensityMatrix::new(m.clone())?;
            if checked.min_eigenvalue()? < -1e-10 {
                return Err(Error::InvalidState(
                    "explicit bath density is not positive semidefinite".into(),
                ));
            }
            return Ok(m.clone());
        }
    };
    let mut rho = Array2::<C64>::eye(1);
    for &z in &pols {
        rho = kron(&rho, &diag_spin(z));
    }
    Ok(rho)
}

/// Product state bath ⊗ system. The system spin is the Bloch state with
/// ⟨σᶻ⟩ = system_z, ⟨S_x⟩ = system_x, ⟨S_y⟩ = 0 (requires 4z² + 4x² ≤ 1).
pub fn prepare_initial_state(
    sys: &SpinSystem,
    bath: &BathPreparation,
    system_z: f64,
    system_x: f64,
) -> Result<DensityMatrix> {
    check_polarization(system_z)?;
    let bloch_sq = 4.0 * system_z * system_z + 4.0 * system_x * system_x;
    if bloch_sq > 1.0 + 1e-12 {
        return Err(Error::InvalidState(format!(
            "invalid Bloch vector: 4z^2 + 4x^2 = {bloch_sq:.6} > 1"
        )));
    }
    let rho_b = bath_density(sys, bath)?;
    let mut rho_s = diag_spin(system_z);
    rho_s[[0, 1]] = C64::new(system_x, 0.0);
    rho_s[[1, 0]] = C64::new(system_x, 0.0);
    DensityMatrix::new(kron(&rho_b, &rho_s))
}

/// Dump an operator as `row,col,re,im` CSV (debugging aid).
pub fn write_operator_csv<W: Write>(op: &Array2<C64>, mut w: W) -> Result<()> {
    writeln!(w, "row,col,re,im")?;
    for ((i, j), c) in op.indexed_iter() {
        if c.norm() > 0.0 {
            writeln!(w, "{i},{j},{:.12e},{:.12e}", c.re, c.im)?;
        }
    }
    Ok(())
}
