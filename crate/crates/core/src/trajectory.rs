//! Monte-Carlo unraveling of dephasing as repeated projective σᶻ measurements.
//!
//! Each trajectory is a pure state evolving unitarily under V between
//! measurement events. Events arrive as independent Poisson processes of
//! rate μ_k = α_k per dephased spin; at an event the spin is projected onto
//! a σᶻ eigenstate with Born probabilities. A projective measurement zeroes
//! the spin's mean coherence, so Poisson averaging gives mean-coherence
//! decay e^{−μt}, matching the Lindblad channel with A = √α σᶻ; hence μ = α.
//! (The measurement times could also be read as periodic at interval 1/α;
//! the memoryless choice is used here.)

use ndarray::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::hermitian_eigen;
use crate::lindblad::EvolutionSpec;
use crate::register::{z_weight, DensityMatrix, SpinSystem};
use crate::series::{fmt12, ObservableSeries};
use crate::{C64, Error, Result};

const NORM_TOL: f64 = 1e-8;

/// Ensemble means and standard errors on the output grid.
///
/// Bit-identical across reruns with the same `master_seed` (per-trajectory
/// ChaCha streams are derived from the seed and trajectory index, and the
/// reduction is an index-ordered pairwise sum).
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub n_traj: usize,
    pub master_seed: u64,
    pub runtime_seconds: f64,
    n_sites: usize,
    times: Vec<f64>,
    /// [site][sample]
    z_mean: Vec<Vec<f64>>,
    z_stderr: Vec<Vec<f64>>,
    x_mean: Vec<f64>,
    x_stderr: Vec<f64>,
    sum_z_mean: Vec<f64>,
    sum_z_stderr: Vec<f64>,
}

impl TrajectoryEnsemble {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn z_mean(&self, site: usize) -> &[f64] {
        &self.z_mean[site]
    }

    pub fn z_stderr(&self, site: usize) -> &[f64] {
        &self.z_stderr[site]
    }

    pub fn z_system_mean(&self) -> &[f64] {
        &self.z_mean[self.n_sites - 1]
    }

    pub fn z_system_stderr(&self) -> &[f64] {
        &self.z_stderr[self.n_sites - 1]
    }

    pub fn x_system_mean(&self) -> &[f64] {
        &self.x_mean
    }

    pub fn x_system_stderr(&self) -> &[f64] {
        &self.x_stderr
    }

    pub fn sum_z_mean(&self) -> &[f64] {
        &self.sum_z_mean
    }

    pub fn sum_z_stderr(&self) -> &[f64] {
        &self.sum_z_stderr
    }

    /// CSV columns: `t,<obs>_mean,<obs>_stderr` per observable, with the
    /// observables ordered z_s, x_s, z_1..z_N, sum_z.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let n_bath = self.n_sites - 1;
        let mut header = String::from("t,z_s_mean,z_s_stderr,x_s_mean,x_s_stderr");
        for k in 1..=n_bath {
            header.push_str(&format!(",z_{k}_mean,z_{k}_stderr"));
        }
        header.push_str(",sum_z_mean,sum_z_stderr");
        writeln!(w, "{header}")?;
        for s in 0..self.times.len() {
            let mut line = format!(
                "{},{},{},{},{}",
                fmt12(self.times[s]),
                fmt12(self.z_mean[n_bath][s]),
                fmt12(self.z_stderr[n_bath][s]),
                fmt12(self.x_mean[s]),
                fmt12(self.x_stderr[s])
            );
            for k in 0..n_bath {
                line.push(',');
                line.push_str(&fmt12(self.z_mean[k][s]));
                line.push(',');
                line.push_str(&fmt12(self.z_stderr[k][s]));
            }
            line.push(',');
            line.push_str(&fmt12(self.sum_z_mean[s]));
            line.push(',');
            line.push_str(&fmt12(self.sum_z_stderr[s]));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

struct TrajectoryRecord {
    /// [site][sample]
    z: Vec<Vec<f64>>,
    x: Vec<f64>,
}

struct Unraveling {
    dim: usize,
    n_sites: usize,
    /// eigenbasis of V: U diag(e^{-i lambda dt}) U^H
    evals: Vec<f64>,
    u: Array2<C64>,
    u_dag: Array2<C64>,
    /// (site, rate) for every dephased spin
    channels: Vec<(usize, f64)>,
    total_rate: f64,
    /// initial pure states with Born weights
    initial: Vec<(f64, Array1<C64>)>,
    zw: Vec<Vec<f64>>,
}

impl Unraveling {
    fn propagate(&self, psi: &Array1<C64>, dt: f64) -> Array1<C64> {
        let mut phi = self.u_dag.dot(psi);
        for (k, p) in phi.iter_mut().enumerate() {
            let phase = -self.evals[k] * dt;
            *p *= C64::new(phase.cos(), phase.sin());
        }
        self.u.dot(&phi)
    }

    fn measure(&self, psi: &mut Array1<C64>, site: usize, u: f64) {
        let mut p_up = 0.0;
        for b in 0..self.dim {
            if self.zw[site][b] > 0.0 {
                p_up += psi[b].norm_sqr();
            }
        }
        let up = u < p_up;
        let keep_up = if up { 1.0 } else { -1.0 };
        let norm = if up { p_up } else { 1.0 - p_up };
        let scale = 1.0 / norm.sqrt();
        for b in 0..self.dim {
            if self.zw[site][b] * keep_up > 0.0 {
                psi[b] *= C64::new(scale, 0.0);
            } else {
                psi[b] = C64::new(0.0, 0.0);
            }
        }
    }

    fn observables(&self, psi: &Array1<C64>, z_out: &mut [f64]) -> (f64, f64) {
        let probs: Vec<f64> = psi.iter().map(|c| c.norm_sqr()).collect();
        for s in 0..self.n_sites {
            z_out[s] = (0..self.dim).map(|b| self.zw[s][b] * probs[b]).sum();
        }
        let mut x_s = 0.0;
        let mut b = 0;
        while b < self.dim {
            x_s += (psi[b].conj() * psi[b + 1]).re;
            b += 2;
        }
        let norm: f64 = probs.iter().sum();
        (x_s, norm)
    }

    fn run_one(&self, times: &[f64], mut rng: ChaCha8Rng) -> Result<TrajectoryRecord> {
        // sample the initial pure state from the eigendecomposition
        let mut psi = {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = &self.initial[self.initial.len() - 1].1;
            for (w, v) in &self.initial {
                acc += w;
                if u < acc {
                    chosen = v;
                    break;
                }
            }
            chosen.clone()
        };
        let mut t = 0.0;
        let mut next_event = if self.total_rate > 0.0 {
            let u: f64 = rng.random();
            -(1.0 - u).ln() / self.total_rate
        } else {
            f64::INFINITY
        };
        let mut z = vec![vec![0.0; times.len()]; self.n_sites];
        let mut x = vec![0.0; times.len()];
        let mut zbuf = vec![0.0; self.n_sites];
        for (s, &ts) in times.iter().enumerate() {
            while next_event < ts {
                psi = self.propagate(&psi, next_event - t);
                t = next_event;
                // choose the measured spin weighted by its rate
                let mut pick: f64 = rng.random::<f64>() * self.total_rate;
                let mut site = self.channels[self.channels.len() - 1].0;
                for &(k, r) in &self.channels {
                    pick -= r;
                    if pick < 0.0 {
                        site = k;
                        break;
                    }
                }
                let u: f64 = rng.random();
                self.measure(&mut psi, site, u);
                let du: f64 = rng.random();
                next_event = t - (1.0 - du).ln() / self.total_rate;
            }
            if ts > t {
                psi = self.propagate(&psi, ts - t);
                t = ts;
            }
            let (x_s, norm) = self.observables(&psi, &mut zbuf);
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::InvariantViolation(format!(
                    "trajectory norm drifted to {norm} at t = {ts}"
                )));
            }
            for site in 0..self.n_sites {
                z[site][s] = zbuf[site];
            }
            x[s] = x_s;
        }
        Ok(TrajectoryRecord { z, x })
    }
}

/// Pairwise sum of f(i) for i in [lo, hi).
fn pairwise_index_sum(lo: usize, hi: usize, f: &dyn Fn(usize) -> f64) -> f64 {
    match hi - lo {
        0 => 0.0,
        1 => f(lo),
        2 => f(lo) + f(lo + 1),
        n => {
            let mid = lo + n / 2;
            pairwise_index_sum(lo, mid, f) + pairwise_index_sum(mid, hi, f)
        }
    }
}

/// Run `n_traj` measurement-unraveled trajectories and reduce to ensemble
/// means and standard errors on the `spec` output grid.
///
/// Mixed initial states are sampled per trajectory from their
/// eigendecomposition. The `spec` integrator field is ignored: between-event
/// propagation is the exact matrix exponential of −iVΔt in the eigenbasis.
pub fn run_trajectories(
    sys: &SpinSystem,
    rho0: &DensityMatrix,
    spec: &EvolutionSpec,
    n_traj: usize,
    master_seed: u64,
) -> Result<TrajectoryEnsemble> {
    let started = std::time::Instant::now();
    if n_traj < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 trajectories".into(),
        ));
    }
    if rho0.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: rho0.dim(),
        });
    }
    let n_sites = sys.n_sites();
    let dim = sys.dim();
    let (evals, u) = hermitian_eigen(&sys.interaction())?;
    let u_dag = u.t().mapv(|c| c.conj());

    let (rvals, rvecs) = hermitian_eigen(rho0.as_array())?;
    let mut initial: Vec<(f64, Array1<C64>)> = Vec::new();
    let mut wsum = 0.0;
    for (k, &w) in rvals.iter().enumerate() {
        if w > 1e-12 {
            initial.push((w, rvecs.column(k).to_owned()));
            wsum += w;
        }
    }
    if initial.is_empty() {
        return Err(Error::InvalidState("initial state has no support".into()));
    }
    for e in initial.iter_mut() {
        e.0 /= wsum;
    }

    let channels: Vec<(usize, f64)> = sys
        .alphas()
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(k, &a)| (k, a))
        .collect();
    let total_rate = channels.iter().map(|&(_, r)| r).sum();

    let zw: Vec<Vec<f64>> = (0..n_sites)
        .map(|s| (0..dim).map(|b| z_weight(b, s, n_sites)).collect())
        .collect();

    let unr = Unraveling {
        dim,
        n_sites,
        evals: evals.to_vec(),
        u,
        u_dag,
        channels,
        total_rate,
        initial,
        zw,
    };

    let n_out = (spec.t_max / spec.dt_out + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=n_out).map(|k| k as f64 * spec.dt_out).collect();

    let records: Vec<TrajectoryRecord> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
            rng.set_stream(i as u64);
            unr.run_one(&times, rng)
        })
        .collect::<Result<_>>()?;

    let n = n_traj as f64;
    let n_samples = times.len();
    let mean_of = |get: &dyn Fn(usize) -> f64| pairwise_index_sum(0, n_traj, get) / n;
    let stderr_of = |get: &dyn Fn(usize) -> f64, mean: f64| {
        let var = pairwise_index_sum(0, n_traj, &|i| {
            let d = get(i) - mean;
            d * d
        }) / (n - 1.0);
        (var / n).sqrt()
    };

    let mut z_mean = vec![vec![0.0; n_samples]; n_sites];
    let mut z_stderr = vec![vec![0.0; n_samples]; n_sites];
    let mut x_mean = vec![0.0; n_samples];
    let mut x_stderr = vec![0.0; n_samples];
    let mut sum_z_mean = vec![0.0; n_samples];
    let mut sum_z_stderr = vec![0.0; n_samples];
    for s in 0..n_samples {
        for site in 0..n_sites {
            let get = |i: usize| records[i].z[site][s];
            let m = mean_of(&get);
            z_mean[site][s] = m;
            z_stderr[site][s] = stderr_of(&get, m);
        }
        let getx = |i: usize| records[i].x[s];
        let mx = mean_of(&getx);
        x_mean[s] = mx;
        x_stderr[s] = stderr_of(&getx, mx);
        let gets = |i: usize| (0..n_sites).map(|k| records[i].z[k][s]).sum::<f64>();
        let ms = mean_of(&gets);
        sum_z_mean[s] = ms;
        sum_z_stderr[s] = stderr_of(&gets, ms);
    }

    Ok(TrajectoryEnsemble {
        n_traj,
        master_seed,
        runtime_seconds: started.elapsed().as_secs_f64(),
        n_sites,
        times,
        z_mean,
        z_stderr,
        x_mean,
        x_stderr,
        sum_z_mean,
        sum_z_stderr,
    })
}

/// Agreement of an ensemble with a reference series, per observable.
#[derive(Debug, Clone, Serialize)]
pub struct ObservableConvergence {
    pub name: String,
    /// max over samples of |mean − reference| / stderr
    pub max_sigma_deviation: f64,
    /// fraction of samples within k·stderr for k = 1, 2, 3
    pub fraction_within: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub per_observable: Vec<ObservableConvergence>,
}

fn compare_column(name: &str, mean: &[f64], stderr: &[f64], reference: &[f64]) -> ObservableConvergence {
    let mut max_sigma = 0.0f64;
    let mut within = [0usize; 3];
    for s in 0..mean.len() {
        let d = (mean[s] - reference[s]).abs();
        let sig = if stderr[s] > 0.0 {
            d / stderr[s]
        } else if d <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        max_sigma = max_sigma.max(sig);
        for (k, w) in within.iter_mut().enumerate() {
            if sig <= (k + 1) as f64 {
                *w += 1;
            }
        }
    }
    let n = mean.len() as f64;
    ObservableConvergence {
        name: name.to_string(),
        max_sigma_deviation: max_sigma,
        fraction_within: [
            within[0] as f64 / n,
            within[1] as f64 / n,
            within[2] as f64 / n,
        ],
    }
}

/// Compare ensemble means against a reference series on the same grid.
pub fn convergence_report(
    ens: &TrajectoryEnsemble,
    reference: &ObservableSeries,
) -> Result<ConvergenceReport> {
    if ens.times.len() != reference.n_samples()
        || ens.n_sites != reference.n_sites()
        || ens
            .times
            .iter()
            .zip(reference.times())
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::InvalidParameter(
            "ensemble and reference grids do not match".into(),
        ));
    }
    let mut per = Vec::new();
    let sys_site = ens.n_sites - 1;
    per.push(compare_column(
        "z_s",
        &ens.z_mean[sys_site],
        &ens.z_stderr[sys_site],
        reference.z_system(),
    ));
    per.push(compare_column(
        "x_s",
        &ens.x_mean,
        &ens.x_stderr,
        reference.x_system(),
    ));
    for site in 0..sys_site {
        per.push(compare_column(
            &format!("z_{}", site + 1),
            &ens.z_mean[site],
            &ens.z_stderr[site],
            reference.z(site),
        ));
    }
    per.push(compare_column(
        "sum_z",
        &ens.sum_z_mean,
        &ens.sum_z_stderr,
        reference.sum_z(),
    ));
    Ok(ConvergenceReport { per_observable: per })
}
