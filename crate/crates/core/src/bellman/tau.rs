//! Constructive search for the convexity weight `tau` and tabulation of it.
//!
//! For a symmetric `H` on `R x R^n` the quantity
//! `lambda_min(H - delta * blockdiag(tau, I/tau))` is concave in `tau`, so it
//! is unimodal in `log tau` and a golden-section search finds its maximum.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{
    assemble_hessian, classify, BellmanParams, BellmanPoint, RegionTag, SingularTolerances,
};
use crate::error::{Error, Result};
use crate::quadrature::golden_section_max;

/// Bracket and resolution of the search over `log tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauSearch {
    pub log_lo: f64,
    pub log_hi: f64,
    pub rel_width: f64,
}

impl Default for TauSearch {
    fn default() -> Self {
        Self {
            log_lo: -40.0,
            log_hi: 40.0,
            rel_width: 1e-6,
        }
    }
}

/// Outcome of the search at a single Hessian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauCertificate {
    pub tau: f64,
    /// Smallest eigenvalue of `H - delta * blockdiag(tau, I/tau)` at the best `tau`.
    pub min_eig: f64,
}

/// A certified `tau` at a point `(u, v)` of the quadrant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauSample {
    pub u: f64,
    pub v: f64,
    pub tau: f64,
    pub min_eig: f64,
}

pub fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

fn shifted_min_eig(h: &DMatrix<f64>, delta: f64, tau: f64) -> f64 {
    let mut m = h.clone();
    m[(0, 0)] -= delta * tau;
    for i in 1..m.nrows() {
        m[(i, i)] -= delta / tau;
    }
    min_eigenvalue(m)
}

/// Maximises the smallest eigenvalue of `h - delta * blockdiag(tau, I/tau)`
/// over `log tau` in the search bracket.
pub fn certify_tau(h: &DMatrix<f64>, delta: f64, search: &TauSearch) -> TauCertificate {
    let (x, fx) = golden_section_max(
        |x| shifted_min_eig(h, delta, x.exp()),
        search.log_lo,
        search.log_hi,
        search.rel_width,
    );
    TauCertificate {
        tau: x.exp(),
        min_eig: fx,
    }
}

/// `tau` at `(u, v)` certified for the Hessian of `Q` at `(u, v e_1)`.
///
/// On the boundary curve both one-sided Hessians are checked and the worse
/// certificate is kept, with `tau` taken from the side that produced it.
pub fn tau_at(
    u: f64,
    v: f64,
    params: &BellmanParams<f64>,
    n: usize,
    search: &TauSearch,
) -> Result<TauSample> {
    let tol = SingularTolerances::default();
    let mut eta = vec![0.0; n];
    eta[0] = v;
    let pt = BellmanPoint::from_slice(u, &eta);
    let cert = match classify(u, v, params, &tol) {
        RegionTag::Axis => {
            return Err(Error::SingularSet {
                u,
                v,
                tag: RegionTag::Axis,
            })
        }
        RegionTag::Lower => {
            certify_tau(&assemble_hessian(&pt, params, true), params.delta(), search)
        }
        RegionTag::Upper => certify_tau(
            &assemble_hessian(&pt, params, false),
            params.delta(),
            search,
        ),
        RegionTag::Boundary => {
            let lo = certify_tau(&assemble_hessian(&pt, params, true), params.delta(), search);
            let hi = certify_tau(
                &assemble_hessian(&pt, params, false),
                params.delta(),
                search,
            );
            if lo.min_eig <= hi.min_eig {
                lo
            } else {
                hi
            }
        }
    };
    Ok(TauSample {
        u,
        v,
        tau: cert.tau,
        min_eig: cert.min_eig,
    })
}

/// Cell-centred table of `tau` on `[0, u_max] x [0, v_max]`, interpolated
/// bilinearly in `log tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct TauTable {
    pub u_max: f64,
    pub v_max: f64,
    pub nu: usize,
    pub nv: usize,
    /// Row-major by `u` index: `tau[i * nv + j]` at `(u_i, v_j)`.
    pub tau: Vec<f64>,
}

impl TauTable {
    /// Certifies `tau` at every cell centre.
    pub fn build(
        params: &BellmanParams<f64>,
        u_max: f64,
        v_max: f64,
        nu: usize,
        nv: usize,
        search: &TauSearch,
    ) -> Result<Self> {
        use rayon::prelude::*;
        let cells: Vec<(usize, usize)> =
            (0..nu).flat_map(|i| (0..nv).map(move |j| (i, j))).collect();
        let du = u_max / nu as f64;
        let dv = v_max / nv as f64;
        let tau = cells
            .par_iter()
            .map(|&(i, j)| {
                let u = (i as f64 + 0.5) * du;
                let v = (j as f64 + 0.5) * dv;
                tau_at(u, v, params, 1, search).map(|s| s.tau)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            u_max,
            v_max,
            nu,
            nv,
            tau,
        })
    }

    pub fn u_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.u_max / self.nu as f64
    }

    pub fn v_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.v_max / self.nv as f64
    }

    /// Bilinear interpolation of `log tau`; constant beyond the outermost
    /// centres, error outside the table box.
    pub fn eval(&self, u: f64, v: f64) -> Result<f64> {
        if !(0.0..=self.u_max).contains(&u) || !(0.0..=self.v_max).contains(&v) {
            return Err(Error::TableCoverage {
                u,
                v,
                u_max: self.u_max,
                v_max: self.v_max,
            });
        }
        let locate = |x: f64, max: f64, n: usize| -> (usize, usize, f64) {
            let s = (x / max * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (s.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, s - i0 as f64)
        };
        let (i0, i1, a) = locate(u, self.u_max, self.nu);
        let (j0, j1, b) = locate(v, self.v_max, self.nv);
        let l = |i: usize, j: usize| self.tau[i * self.nv + j].ln();
        let log_tau = (1.0 - a) * ((1.0 - b) * l(i0, j0) + b * l(i0, j1))
            + a * ((1.0 - b) * l(i1, j0) + b * l(i1, j1));
        Ok(log_tau.exp())
    }

    /// Columns `u, v, tau`, one row per cell centre.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["u", "v", "tau"])?;
        for i in 0..self.nu {
            for j in 0..self.nv {
                w.write_record([
                    crate::report::fmt_f64(self.u_center(i)),
                    crate::report::fmt_f64(self.v_center(j)),
                    crate::report::fmt_f64(self.tau[i * self.nv + j]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`TauTable::write_csv`]; the rows must form a
    /// complete cell-centred grid.
    pub fn read_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            u: f64,
            v: f64,
            tau: f64,
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let rows = rdr
            .deserialize::<Row>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let distinct = |xs: Vec<f64>| {
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            xs
        };
        let us = distinct(rows.iter().map(|r| r.u).collect());
        let vs = distinct(rows.iter().map(|r| r.v).collect());
        let (nu, nv) = (us.len(), vs.len());
        if nu == 0 || nv == 0 || rows.len() != nu * nv {
            return Err(Error::Config(format!(
                "tau table is not a full grid ({} rows, {nu} x {nv})",
                rows.len()
            )));
        }
        let u_max = us[0] * 2.0 * nu as f64;
        let v_max = vs[0] * 2.0 * nv as f64;
        let mut tau = vec![f64::NAN; nu * nv];
        for r in &rows {
            if !(r.tau > 0.0) {
                return Err(Error::Config(format!(
                    "non-positive tau {} at ({}, {})",
                    r.tau, r.u, r.v
                )));
            }
            let i = us
                .iter()
                .position(|&x| x == r.u)
                .expect("value from the same rows");
            let j = vs
                .iter()
                .position(|&x| x == r.v)
                .expect("value from the same rows");
            tau[i * nv + j] = r.tau;
        }
        if tau.iter().any(|t| t.is_nan()) {
            return Err(Error::Config("tau table has duplicate cells".into()));
        }
        Ok(Self {
            u_max,
            v_max,
            nu,
            nv,
            tau,
        })
    }
}
