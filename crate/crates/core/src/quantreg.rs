//! Linear quantile regression.
//!
//! The check-loss problem is solved as a linear program: a primal-dual
//! interior-point method (Frisch–Newton with a Mehrotra corrector) brings the
//! solution close to the optimal face, the nearest basic solution is picked,
//! and simplex pivots on the residual directional derivatives finish at an
//! exactly optimal vertex. Inference uses an (x, y)-pairs bootstrap.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};
use crate::statcore::{normal_p_value, DesignMatrix, PivotedQr, Stars, RANK_TOLERANCE};

/// Two-sided 90% normal quantile.
pub const Z90: f64 = 1.645;

pub const DEFAULT_TAUS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

const IP_MAX_ITER: usize = 100;
const IP_STEP: f64 = 0.99995;
const IP_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-9;

/// `rho_tau(u) = u (tau - 1{u < 0})`.
pub fn check_loss(residuals: impl IntoIterator<Item = f64>, tau: f64) -> f64 {
    residuals
        .into_iter()
        .map(|u| if u < 0.0 { (tau - 1.0) * u } else { tau * u })
        .sum()
}

/// One-sided derivative of the check loss at `r` in direction `delta`.
fn rho_slope(r: f64, delta: f64, tau: f64, ztol: f64) -> f64 {
    if r > ztol || (r.abs() <= ztol && delta > 0.0) {
        tau * delta
    } else {
        (tau - 1.0) * delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileFit {
    pub tau: f64,
    pub names: Vec<String>,
    #[serde(serialize_with = "ser_vector")]
    pub coefficients: DVector<f64>,
    /// Bootstrap covariance, once computed.
    #[serde(skip)]
    pub vcov: Option<DMatrix<f64>>,
    pub loss: f64,
    /// Observations interpolated by the solution, in increasing order.
    pub basis: Vec<usize>,
    pub ip_iterations: usize,
    pub simplex_pivots: usize,
}

fn ser_vector<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

impl QuantileFit {
    pub fn coef(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }

    pub fn se(&self, i: usize) -> Option<f64> {
        self.vcov.as_ref().map(|v| v[(i, i)].sqrt())
    }

    pub fn p_value(&self, i: usize) -> Option<f64> {
        self.se(i).map(|se| normal_p_value(self.coefficients[i] / se))
    }

    pub fn stars(&self, i: usize) -> Stars {
        self.p_value(i).map_or(Stars::None, Stars::from_p)
    }
}

struct InteriorPoint {
    beta: DVector<f64>,
    iterations: usize,
    gap: f64,
}

fn step_bound(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1e20, f64::min)
}

fn weighted_solve(x: &DMatrix<f64>, q: &DVector<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let mut xq = x.clone();
    for (mut row, w) in xq.row_iter_mut().zip(q.iter()) {
        row *= w.sqrt();
    }
    let m = xq.transpose() * &xq;
    let b = x.transpose() * rhs;
    m.cholesky().map(|c| c.solve(&b))
}

/// Frisch–Newton iterations on the dual problem
/// `max y'a  s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1`.
fn frisch_newton(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> InteriorPoint {
    let n = x.nrows();
    let c = -y;
    let b = x.transpose() * DVector::from_element(n, 1.0 - tau);
    let mut xp = DVector::from_element(n, 1.0 - tau);
    let mut s = DVector::from_element(n, tau);
    let ones = DVector::from_element(n, 1.0);
    let Some(mut yd) = weighted_solve(x, &ones, &c) else {
        return InteriorPoint {
            beta: DVector::zeros(x.ncols()),
            iterations: 0,
            gap: f64::INFINITY,
        };
    };
    let mut r = &c - x * &yd;
    r.apply(|v| {
        if *v == 0.0 {
            *v = 0.001;
        }
    });
    let mut z = r.map(|v| v.max(0.0));
    let mut w = &z - &r;
    let gap_of = |xp: &DVector<f64>, yd: &DVector<f64>, w: &DVector<f64>| c.dot(xp) - yd.dot(&b) + w.sum();
    let mut gap = gap_of(&xp, &yd, &w);
    let mut it = 0;
    while gap > IP_TOL * (1.0 + c.dot(&xp).abs()) && it < IP_MAX_ITER {
        it += 1;
        let q = DVector::from_fn(n, |i, _| 1.0 / (z[i] / xp[i] + w[i] / s[i]));
        let r = &z - &w;
        let Some(mut dy) = weighted_solve(x, &q, &q.component_mul(&r)) else {
            break;
        };
        let mut dx = q.component_mul(&(x * &dy - &r));
        let mut ds = -&dx;
        let mut dz = DVector::from_fn(n, |i, _| -z[i] * (dx[i] / xp[i] + 1.0));
        let mut dw = DVector::from_fn(n, |i, _| -w[i] * (ds[i] / s[i] + 1.0));
        let mut fp = (IP_STEP * step_bound(&xp, &dx).min(step_bound(&s, &ds))).min(1.0);
        let mut fd = (IP_STEP * step_bound(&w, &dw).min(step_bound(&z, &dz))).min(1.0);
        if fp.min(fd) < 1.0 {
            let mu0 = z.dot(&xp) + w.dot(&s);
            let g = (&z + &dz * fd).dot(&(&xp + &dx * fp)) + (&w + &dw * fd).dot(&(&s + &ds * fp));
            let mu = mu0 * (g / mu0).powi(3) / (2.0 * n as f64);
            let dxdz = dx.component_mul(&dz);
            let dsdw = ds.component_mul(&dw);
            let xinv = xp.map(|v| 1.0 / v);
            let sinv = s.map(|v| 1.0 / v);
            let xi = (&xinv - &sinv) * mu;
            let adj = &r + &dxdz - &dsdw - &xi;
            let Some(dy2) = weighted_solve(x, &q, &q.component_mul(&adj)) else {
                break;
            };
            dy = dy2;
            dx = q.component_mul(&(x * &dy + &xi - &r - &dxdz + &dsdw));
            ds = -&dx;
            dz = DVector::from_fn(n, |i, _| mu * xinv[i] - z[i] - xinv[i] * z[i] * dx[i] - dxdz[i]);
            dw = DVector::from_fn(n, |i, _| mu * sinv[i] - w[i] - sinv[i] * w[i] * ds[i] - dsdw[i]);
            fp = (IP_STEP * step_bound(&xp, &dx).min(step_bound(&s, &ds))).min(1.0);
            fd = (IP_STEP * step_bound(&w, &dw).min(step_bound(&z, &dz))).min(1.0);
        }
        xp += &dx * fp;
        s += &ds * fp;
        yd += &dy * fd;
        w += &dw * fd;
        z += &dz * fd;
        gap = gap_of(&xp, &yd, &w);
    }
    InteriorPoint {
        beta: -yd,
        iterations: it,
        gap,
    }
}

fn basis_solution(x: &DMatrix<f64>, y: &DVector<f64>, h: &[usize]) -> Option<DVector<f64>> {
    let p = x.ncols();
    let xh = DMatrix::from_fn(p, p, |i, j| x[(h[i], j)]);
    let yh = DVector::from_fn(p, |i, _| y[h[i]]);
    let lu = xh.lu();
    if lu.determinant() == 0.0 {
        return None;
    }
    let beta = lu.solve(&yh)?;
    beta.iter().all(|v| v.is_finite()).then_some(beta)
}

/// Greedily picks rows in `order` that keep the selection linearly
/// independent, up to `count` rows.
fn independent_rows(x: &DMatrix<f64>, order: &[usize], count: usize, skip: &[usize]) -> Vec<usize> {
    let p = x.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut chosen = Vec::with_capacity(count);
    let scale = x.amax().max(1.0);
    for &i in order {
        if chosen.len() == count {
            break;
        }
        if skip.contains(&i) {
            continue;
        }
        let mut v = x.row(i).transpose();
        let norm0 = v.norm();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        if v.norm() > 1e-10 * norm0.max(scale * 1e-6) {
            if basis.len() < p {
                let nv = v.norm();
                basis.push(v / nv);
            }
            chosen.push(i);
        }
    }
    chosen
}

fn sorted(mut h: Vec<usize>) -> Vec<usize> {
    h.sort_unstable();
    h
}

/// Chooses a basic solution near `beta`: the nearest independent rows, or a
/// drop-one subset of them with one more row, whichever has lowest loss.
/// Ties within tolerance go to the lexicographically smallest index set.
fn snap_to_vertex(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64, beta: &DVector<f64>) -> Option<Vec<usize>> {
    let p = x.ncols();
    let r = y - x * beta;
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()).then(a.cmp(&b)));
    let first = independent_rows(x, &order, p, &[]);
    if first.len() < p {
        return None;
    }
    let mut candidates = vec![sorted(first.clone())];
    if let Some(&extra) = order.iter().find(|i| !first.contains(i)) {
        for drop in 0..p {
            let mut h = first.clone();
            h[drop] = extra;
            candidates.push(sorted(h));
        }
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for h in candidates {
        let Some(b) = basis_solution(x, y, &h) else { continue };
        let loss = check_loss((y - x * &b).iter().copied(), tau);
        let better = match &best {
            None => true,
            Some((bl, bh)) => {
                let tol = TIE_TOL * (1.0 + bl.abs());
                loss < bl - tol || ((loss - bl).abs() <= tol && h < *bh)
            }
        };
        if better {
            best = Some((loss, h));
        }
    }
    best.map(|(_, h)| h)
}

struct Vertex {
    basis: Vec<usize>,
    beta: DVector<f64>,
    pivots: usize,
}

/// Simplex pivots from basis `h` until no edge direction decreases the loss.
fn simplex_polish(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    mut h: Vec<usize>,
    max_pivots: usize,
) -> Option<Vertex> {
    let (n, p) = x.shape();
    let scale = y.amax().max(1.0);
    let mut pivots = 0;
    loop {
        let beta = basis_solution(x, y, &h)?;
        let fitted = x * &beta;
        let ztol = 1e-11 * (scale + fitted.amax());
        let mut r = y - &fitted;
        for &i in &h {
            r[i] = 0.0;
        }
        let xh = DMatrix::from_fn(p, p, |i, j| x[(h[i], j)]);
        let inv = xh.try_inverse()?;
        // Column j: change of fitted values when the j-th basic residual
        // moves while the other basic residuals stay at zero.
        let a = x * inv;
        let mut best: Option<(f64, usize, f64)> = None;
        for j in 0..p {
            for sgn in [1.0, -1.0] {
                let mut slope = 0.0;
                let mut mass = 0.0;
                for i in 0..n {
                    let delta = -sgn * a[(i, j)];
                    slope += rho_slope(r[i], delta, tau, ztol);
                    mass += delta.abs();
                }
                if slope < -1e-10 * mass && best.is_none_or(|(b, _, _)| slope < b) {
                    best = Some((slope, j, sgn));
                }
            }
        }
        let Some((slope0, j, sgn)) = best else {
            return Some(Vertex {
                basis: sorted(h),
                beta,
                pivots,
            });
        };
        if pivots >= max_pivots {
            return None;
        }
        let mut breaks: Vec<(f64, usize, f64)> = (0..n)
            .filter_map(|i| {
                let delta = -sgn * a[(i, j)];
                let crosses = (r[i] > ztol && delta < 0.0) || (r[i] < -ztol && delta > 0.0);
                crosses.then(|| (-r[i] / delta, i, delta.abs()))
            })
            .collect();
        breaks.sort_by(|u, v| u.0.total_cmp(&v.0).then(u.1.cmp(&v.1)));
        let mut slope = slope0;
        let mut entering = None;
        for (_, i, gain) in breaks {
            slope += gain;
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        h[j] = entering?;
        pivots += 1;
    }
}

fn check_design(design: &DesignMatrix, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Validation(format!("tau must lie in (0, 1), got {tau}")));
    }
    let qr = PivotedQr::new(design.x(), RANK_TOLERANCE);
    if !qr.is_full_rank() {
        let names = qr
            .dependent_columns()
            .into_iter()
            .map(|j| design.names()[j].clone())
            .collect();
        return Err(Error::RankDeficient(names));
    }
    Ok(())
}

fn solve(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> Result<(Vertex, InteriorPoint)> {
    // The interior-point phase runs on an orthonormal basis of the column
    // space; quantile regression is equivariant under reparametrisation.
    let qr = x.clone().qr();
    let q = qr.q();
    let ip = frisch_newton(&q, y, tau);
    let beta_q = &ip.beta;
    let r = qr.r();
    let start = r
        .solve_upper_triangular(beta_q)
        .filter(|b| b.iter().all(|v| v.is_finite()))
        .unwrap_or_else(|| DVector::zeros(x.ncols()));
    let no_vertex = |ip: &InteriorPoint| Error::NoConvergence {
        iterations: ip.iterations,
        gap: ip.gap,
    };
    let Some(h) = snap_to_vertex(x, y, tau, &start) else {
        return Err(no_vertex(&ip));
    };
    let max_pivots = 50 * x.nrows().max(10);
    match simplex_polish(x, y, tau, h, max_pivots) {
        Some(v) => Ok((v, ip)),
        None => Err(no_vertex(&ip)),
    }
}

/// Check-loss minimiser at quantile `tau`.
pub fn qr_fit(design: &DesignMatrix, tau: f64) -> Result<QuantileFit> {
    check_design(design, tau)?;
    let (vertex, ip) = solve(design.x(), design.y(), tau)?;
    let loss = check_loss((design.y() - design.x() * &vertex.beta).iter().copied(), tau);
    Ok(QuantileFit {
        tau,
        names: design.names().to_vec(),
        coefficients: vertex.beta,
        vcov: None,
        loss,
        basis: vertex.basis,
        ip_iterations: ip.iterations,
        simplex_pivots: vertex.pivots,
    })
}

/// Pairs-bootstrap covariance of the quantile coefficients.
///
/// Replicate `b` draws from a generator seeded by `(seed, tau, b, attempt)`;
/// rank-deficient resamples are redrawn with the next attempt number.
pub fn qr_vcov(design: &DesignMatrix, tau: f64, replications: usize, seed: u64) -> Result<DMatrix<f64>> {
    use rand::Rng as _;
    if replications < 100 {
        return Err(Error::Validation(format!(
            "bootstrap needs at least 100 replications, got {replications}"
        )));
    }
    check_design(design, tau)?;
    let n = design.nrows();
    let cap = 10 * replications;
    let x = design.x();
    let y = design.y();
    let draws: Vec<Result<(DVector<f64>, usize)>> = (0..replications)
        .into_par_iter()
        .map(|b| {
            for attempt in 0..cap {
                let mut g = rng(derive_seed(seed, &[tau.to_bits(), b as u64, attempt as u64]));
                let idx: Vec<usize> = (0..n).map(|_| g.random_range(0..n)).collect();
                let xb = x.select_rows(idx.iter());
                let yb = DVector::from_iterator(n, idx.iter().map(|&i| y[i]));
                if !PivotedQr::new(&xb, RANK_TOLERANCE).is_full_rank() {
                    continue;
                }
                let (v, _) = solve(&xb, &yb, tau)?;
                return Ok((v.beta, attempt + 1));
            }
            Err(Error::Numerical(format!(
                "bootstrap replicate {b} stayed rank deficient"
            )))
        })
        .collect();
    let mut betas = Vec::with_capacity(replications);
    let mut attempts = 0;
    for d in draws {
        let (beta, a) = d?;
        attempts += a;
        betas.push(beta);
    }
    if attempts > cap {
        return Err(Error::Numerical(format!(
            "bootstrap needed {attempts} draws, cap is {cap}"
        )));
    }
    let k = design.ncols();
    let mean = betas.iter().fold(DVector::zeros(k), |acc, b| acc + b) / replications as f64;
    let mut v = DMatrix::zeros(k, k);
    for b in &betas {
        let d = b - &mean;
        v += &d * d.transpose();
    }
    v /= (replications - 1) as f64;
    Ok((&v + v.transpose()) * 0.5)
}

/// Point estimate and 90% band for one coefficient or coefficient sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Band {
    pub tau: f64,
    pub coef: String,
    pub estimate: f64,
    pub se: f64,
    pub lo90: f64,
    pub hi90: f64,
}

impl Band {
    fn new(tau: f64, coef: &str, estimate: f64, var: f64) -> Self {
        let se = var.max(0.0).sqrt();
        Band {
            tau,
            coef: coef.into(),
            estimate,
            se,
            lo90: estimate - Z90 * se,
            hi90: estimate + Z90 * se,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantilePath {
    pub fits: Vec<QuantileFit>,
    /// Bands for beta0, beta1, beta2 and beta1+beta2 at every tau, in order.
    pub bands: Vec<Band>,
}

/// Bands from a fit with a bootstrap covariance. The band for
/// `beta1+beta2` uses `Var1 + Var2 + 2 Cov12`.
pub fn bands(fit: &QuantileFit) -> Result<Vec<Band>> {
    let v = fit
        .vcov
        .as_ref()
        .ok_or_else(|| Error::Validation("quantile fit has no covariance".into()))?;
    let idx = |n: &str| {
        fit.names
            .iter()
            .position(|m| m == n)
            .ok_or_else(|| Error::Validation(format!("quantile fit has no `{n}` coefficient")))
    };
    let (i0, i1, i2) = (idx("beta0")?, idx("beta1")?, idx("beta2")?);
    let b = &fit.coefficients;
    Ok(vec![
        Band::new(fit.tau, "beta0", b[i0], v[(i0, i0)]),
        Band::new(fit.tau, "beta1", b[i1], v[(i1, i1)]),
        Band::new(fit.tau, "beta2", b[i2], v[(i2, i2)]),
        Band::new(
            fit.tau,
            "beta1+beta2",
            b[i1] + b[i2],
            v[(i1, i1)] + v[(i2, i2)] + 2.0 * v[(i1, i2)],
        ),
    ])
}

/// Fits and bootstraps every tau of a sorted grid.
pub fn qr_path(design: &DesignMatrix, taus: &[f64], replications: usize, seed: u64) -> Result<QuantilePath> {
    if taus.is_empty() {
        return Err(Error::Validation("empty tau grid".into()));
    }
    if taus.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("tau grid must be strictly increasing".into()));
    }
    let fits: Vec<QuantileFit> = taus
        .par_iter()
        .map(|&tau| {
            let mut fit = qr_fit(design, tau)?;
            fit.vcov = Some(qr_vcov(design, tau, replications, seed)?);
            Ok(fit)
        })
        .collect::<Result<_>>()?;
    let mut all = Vec::with_capacity(4 * fits.len());
    for f in &fits {
        all.extend(bands(f)?);
    }
    Ok(QuantilePath { fits, bands: all })
}
