//! Time series of observables extracted from an evolution.

use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

const Z_BOUND: f64 = 0.5 + 1e-9;
const ZZ_BOUND: f64 = 0.25 + 1e-9;

/// Per-sample record: per-spin polarizations z_i, system coherence x_s, pair
/// correlators ⟨σᶻᵢσᶻⱼ⟩, the conserved monitors Σz and Σ_{i≠j}⟨σᶻᵢσᶻⱼ⟩, and
/// the trace error.
///
/// Sites are indexed 0..n_sites with the system last. Model-generated series
/// may carry NaN in columns the model does not track (e.g. pair correlators).
#[derive(Debug, Clone)]
pub struct ObservableSeries {
    n_sites: usize,
    times: Vec<f64>,
    /// z[site][sample]
    z: Vec<Vec<f64>>,
    x_s: Vec<f64>,
    /// zz[pair][sample] with pairs (i, j), i < j, in lexicographic order
    zz: Vec<Vec<f64>>,
    sum_z: Vec<f64>,
    pair_sum: Vec<f64>,
    trace_err: Vec<f64>,
}

impl ObservableSeries {
    pub(crate) fn with_capacity(n_sites: usize, cap: usize) -> Self {
        let n_pairs = n_sites * (n_sites - 1) / 2;
        Self {
            n_sites,
            times: Vec::with_capacity(cap),
            z: vec![Vec::with_capacity(cap); n_sites],
            x_s: Vec::with_capacity(cap),
            zz: vec![Vec::with_capacity(cap); n_pairs],
            sum_z: Vec::with_capacity(cap),
            pair_sum: Vec::with_capacity(cap),
            trace_err: Vec::with_capacity(cap),
        }
    }

    #[inline]
    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n_sites);
        // offset of row i in the upper-triangle enumeration
        i * self.n_sites - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Append one sample; enforces the series invariants.
    pub(crate) fn push_sample(
        &mut self,
        t: f64,
        z: &[f64],
        x_s: f64,
        zz_upper: &[f64],
        trace_err: f64,
    ) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::InvariantViolation(format!(
                    "non-increasing sample time {t} after {last}"
                )));
            }
        }
        for (site, &v) in z.iter().enumerate() {
            if v.abs() > Z_BOUND {
                return Err(Error::InvariantViolation(format!(
                    "|z_{site}| = {v} exceeds 1/2 at t = {t}"
                )));
            }
        }
        for (p, &v) in zz_upper.iter().enumerate() {
            if v.abs() > ZZ_BOUND {
                return Err(Error::InvariantViolation(format!(
                    "|zz| = {v} exceeds 1/4 at t = {t} (pair {p})"
                )));
            }
        }
        self.times.push(t);
        for (site, &v) in z.iter().enumerate() {
            self.z[site].push(v);
        }
        self.x_s.push(x_s);
        for (p, &v) in zz_upper.iter().enumerate() {
            self.zz[p].push(v);
        }
        self.sum_z.push(z.iter().sum());
        // the pair sum runs over ordered pairs i != j
        self.pair_sum.push(2.0 * zz_upper.iter().sum::<f64>());
        self.trace_err.push(trace_err);
        Ok(())
    }

    /// Assemble a series from raw columns (used by the reduced-model adapters
    /// and by tests). `zz_upper[pair][sample]` follows the (i<j) pair order;
    /// NaN entries mark untracked observables.
    pub fn from_parts(
        times: Vec<f64>,
        z: Vec<Vec<f64>>,
        x_s: Vec<f64>,
        zz_upper: Vec<Vec<f64>>,
        trace_err: Vec<f64>,
    ) -> Result<Self> {
        let n_sites = z.len();
        if n_sites < 2 {
            return Err(Error::InvalidParameter("need at least 2 sites".into()));
        }
        let n_pairs = n_sites * (n_sites - 1) / 2;
        if zz_upper.len() != n_pairs {
            return Err(Error::DimensionMismatch {
                expected: n_pairs,
                got: zz_upper.len(),
            });
        }
        let n = times.len();
        for col in z.iter().chain(zz_upper.iter()) {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: col.len(),
                });
            }
        }
        if x_s.len() != n || trace_err.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x_s.len().min(trace_err.len()),
            });
        }
        let mut out = Self::with_capacity(n_sites, n);
        for k in 0..n {
            let zk: Vec<f64> = z.iter().map(|col| col[k]).collect();
            let zzk: Vec<f64> = zz_upper.iter().map(|col| col[k]).collect();
            out.push_sample(times[k], &zk, x_s[k], &zzk, trace_err[k])?;
        }
        Ok(out)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_samples(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Polarization series of `site` (system = n_sites - 1).
    pub fn z(&self, site: usize) -> &[f64] {
        &self.z[site]
    }

    /// System polarization series.
    pub fn z_system(&self) -> &[f64] {
        &self.z[self.n_sites - 1]
    }

    pub fn x_system(&self) -> &[f64] {
        &self.x_s
    }

    /// Pair correlator ⟨σᶻᵢσᶻⱼ⟩ series, i ≠ j.
    pub fn zz(&self, i: usize, j: usize) -> Result<&[f64]> {
        if i == j || i >= self.n_sites || j >= self.n_sites {
            return Err(Error::SiteOutOfRange {
                site: i.max(j),
                n_sites: self.n_sites,
            });
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        Ok(&self.zz[self.pair_index(a, b)])
    }

    pub fn sum_z(&self) -> &[f64] {
        &self.sum_z
    }

    pub fn pair_sum(&self) -> &[f64] {
        &self.pair_sum
    }

    pub fn trace_err(&self) -> &[f64] {
        &self.trace_err
    }

    /// Pearson correlation corr(i,j) = cov/√(var·var) with var = 1/4 − z².
    /// Samples where either variance falls below 1e−14 are undefined (`None`).
    pub fn pearson(&self, i: usize, j: usize) -> Result<Vec<Option<f64>>> {
        if i == j {
            return Err(Error::InvalidParameter(
                "correlation needs two distinct sites".into(),
            ));
        }
        let zz = self.zz(i, j)?;
        let zi = &self.z[i];
        let zj = &self.z[j];
        Ok((0..self.n_samples())
            .map(|k| {
                let var_i = 0.25 - zi[k] * zi[k];
                let var_j = 0.25 - zj[k] * zj[k];
                if var_i < 1e-14 || var_j < 1e-14 {
                    None
                } else {
                    Some((zz[k] - zi[k] * zj[k]) / (var_i * var_j).sqrt())
                }
            })
            .collect())
    }

    /// CSV columns: `t,z_s,x_s,z_1..z_N,corr_s1..corr_sN,sum_z,pair_sum,trace_err`,
    /// 12 significant digits. Undefined correlations print as NaN.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n_bath = self.n_sites - 1;
        let sys = self.n_sites - 1;
        let mut header = String::from("t,z_s,x_s");
        for k in 1..=n_bath {
            header.push_str(&format!(",z_{k}"));
        }
        for k in 1..=n_bath {
            header.push_str(&format!(",corr_s{k}"));
        }
        header.push_str(",sum_z,pair_sum,trace_err");
        writeln!(w, "{header}")?;

        let corr: Vec<Vec<Option<f64>>> = (0..n_bath)
            .map(|k| self.pearson(sys, k))
            .collect::<Result<_>>()?;
        for s in 0..self.n_samples() {
            let mut line = format!(
                "{},{},{}",
                fmt12(self.times[s]),
                fmt12(self.z[sys][s]),
                fmt12(self.x_s[s])
            );
            for k in 0..n_bath {
                line.push(',');
                line.push_str(&fmt12(self.z[k][s]));
            }
            for col in corr.iter() {
                line.push(',');
                line.push_str(&fmt12(col[s].unwrap_or(f64::NAN)));
            }
            line.push(',');
            line.push_str(&fmt12(self.sum_z[s]));
            line.push(',');
            line.push_str(&fmt12(self.pair_sum[s]));
            line.push(',');
            line.push_str(&fmt12(self.trace_err[s]));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn write_csv_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// 12 significant digits, scientific.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}
