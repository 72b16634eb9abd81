//! Penalised cubic regression spline in log demand alongside the linear
//! pass-through terms.
//!
//! The smooth uses a cubic B-spline basis with knots at quantiles of the
//! distinct sample values, an exact integrated squared second-derivative
//! penalty, and a sum-to-zero constraint absorbed through a Householder
//! null-space basis. The smoothing parameter is chosen by GCV over a grid.
//!
//! For a fixed `lambda` the fit is computed from `X = QR` and the symmetric
//! eigendecomposition `R^{-T} S R^{-1} = U D U^T`; with `L = (I + lambda D)^{-1}`
//! the coefficients are `R^{-1} U L U^T Q^T y` and the influence matrix is
//! `F = R^{-1} U L U^T R`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::construct::DailySeries;
use crate::cptr::{build_design, CptrSpec};
use crate::error::{Error, Result};
use crate::statcore::{normal_p_value, DesignMatrix, PivotedQr, Stars, RANK_TOLERANCE};

pub const DEGREE: usize = 3;
pub const DEFAULT_K: usize = 10;

/// 41 points, log-spaced over `[1e-4, 1e8]`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=40).map(|i| 10f64.powf(-4.0 + 0.3 * f64::from(i))).collect()
}

/// Type-7 sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Clamped knot vector with `k - 4` interior knots at quantiles of the
/// distinct values of `x`.
pub fn quantile_knots(x: &[f64], k: usize) -> Result<Vec<f64>> {
    if k < DEGREE + 1 {
        return Err(Error::Validation(format!(
            "basis dimension must be at least 4, got {k}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("spline input contains non-finite values".into()));
    }
    let mut distinct = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::Insufficient(format!(
            "{} distinct values for a basis of dimension {k}",
            distinct.len()
        )));
    }
    let (a, b) = (distinct[0], distinct[distinct.len() - 1]);
    let interior = k - DEGREE - 1;
    let mut knots = vec![a; DEGREE + 1];
    for j in 1..=interior {
        knots.push(quantile_sorted(&distinct, j as f64 / (interior + 1) as f64));
    }
    knots.extend(std::iter::repeat_n(b, DEGREE + 1));
    Ok(knots)
}

/// Non-zero cubic B-spline values at `x` (triangular de Boor scheme) and the
/// index of the first of them.
pub fn basis_funs(knots: &[f64], x: f64) -> (usize, [f64; DEGREE + 1]) {
    let k = knots.len() - DEGREE - 1;
    // Knot span i with t_i <= x < t_{i+1}; the right end uses the last span.
    let span = if x >= knots[k] {
        k - 1
    } else {
        let mut i = DEGREE;
        while i < k - 1 && x >= knots[i + 1] {
            i += 1;
        }
        i
    };
    let mut n = [0.0; DEGREE + 1];
    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=DEGREE {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    (span - DEGREE, n)
}

/// Full `len(x) x k` basis matrix.
pub fn basis_matrix(knots: &[f64], x: &[f64]) -> DMatrix<f64> {
    let k = knots.len() - DEGREE - 1;
    let mut m = DMatrix::zeros(x.len(), k);
    for (row, &v) in x.iter().enumerate() {
        let (first, vals) = basis_funs(knots, v);
        for (j, val) in vals.iter().enumerate() {
            m[(row, first + j)] = *val;
        }
    }
    m
}

/// `S_ij = integral of B_i'' B_j''` over the knot range.
///
/// Second derivatives of cubic B-splines are combinations of degree-one
/// B-splines, whose Gram matrix is tridiagonal.
pub fn curvature_penalty(knots: &[f64]) -> DMatrix<f64> {
    let k = knots.len() - DEGREE - 1;
    let t = knots;
    // First derivative: degree-2 coefficients i = 1..k-1.
    let mut d1 = DMatrix::zeros(k - 1, k);
    for i in 1..k {
        let w = 3.0 / (t[i + 3] - t[i]);
        d1[(i - 1, i)] = w;
        d1[(i - 1, i - 1)] = -w;
    }
    // Second derivative: degree-1 coefficients i = 2..k-1.
    let mut d2 = DMatrix::zeros(k - 2, k - 1);
    for i in 2..k {
        let w = 2.0 / (t[i + 2] - t[i]);
        d2[(i - 2, i - 1)] = w;
        d2[(i - 2, i - 2)] = -w;
    }
    let d = d2 * d1;
    let mut gram = DMatrix::zeros(k - 2, k - 2);
    for i in 2..k {
        let a = i - 2;
        gram[(a, a)] = (t[i + 2] - t[i]) / 3.0;
        if i + 1 < k {
            let h = (t[i + 2] - t[i + 1]) / 6.0;
            gram[(a, a + 1)] = h;
            gram[(a + 1, a)] = h;
        }
    }
    let s = d.transpose() * gram * d;
    (&s + s.transpose()) * 0.5
}

/// Orthonormal basis of the null space of the row vector `c`.
fn null_space_basis(c: &DVector<f64>) -> DMatrix<f64> {
    let k = c.len();
    let mut v = c.clone();
    let alpha = -c[0].signum() * c.norm();
    v[0] -= alpha;
    let vnorm2 = v.norm_squared();
    let mut h = DMatrix::identity(k, k);
    if vnorm2 > 0.0 {
        h -= (&v * v.transpose()) * (2.0 / vnorm2);
    }
    h.columns(1, k - 1).into_owned()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    pub knots: Vec<f64>,
    pub k: usize,
    /// Constrained evaluation matrix, `T x (k - 1)`.
    pub psi: DMatrix<f64>,
    /// Penalty on the constrained coefficients.
    pub penalty: DMatrix<f64>,
    /// Maps constrained coefficients to B-spline coefficients.
    pub constraint: DMatrix<f64>,
}

/// Constrained cubic spline basis on the sample `x`.
pub fn spline_basis(x: &[f64], k: usize) -> Result<SplineBasis> {
    let knots = quantile_knots(x, k)?;
    let raw = basis_matrix(&knots, x);
    let colsum = DVector::from_iterator(k, raw.column_iter().map(|c| c.sum()));
    let z = null_space_basis(&colsum);
    let psi = &raw * &z;
    let mut penalty = z.transpose() * curvature_penalty(&knots) * &z;
    penalty = (&penalty + penalty.transpose()) * 0.5;
    let scale = (psi.transpose() * &psi).norm() / penalty.norm();
    if scale.is_finite() && scale > 0.0 {
        penalty *= scale;
    }
    Ok(SplineBasis {
        knots,
        k,
        psi,
        penalty,
        constraint: z,
    })
}

/// Parametric pass-through columns plus the constrained smooth of log demand.
#[derive(Debug, Clone)]
pub struct GamDesign {
    pub names: Vec<String>,
    /// Number of parametric columns; the smooth block follows.
    pub parametric: usize,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub log_demand: Vec<f64>,
    pub basis: SplineBasis,
    /// Linear baseline design on the same rows.
    pub linear: DesignMatrix,
}

impl GamDesign {
    pub fn penalty(&self) -> DMatrix<f64> {
        let p = self.x.ncols();
        let mut s = DMatrix::zeros(p, p);
        s.view_mut((self.parametric, self.parametric), (self.basis.k - 1, self.basis.k - 1))
            .copy_from(&self.basis.penalty);
        s
    }
}

pub fn gam_design(data: &DailySeries, spec: &CptrSpec, k: usize) -> Result<GamDesign> {
    let linear_spec = CptrSpec {
        demand_order: 1,
        ..spec.clone()
    };
    let linear = build_design(data, &linear_spec)?;
    let demand_col = linear.column_index("beta3").expect("linear design has a demand column");
    let keep: Vec<usize> = (0..linear.ncols()).filter(|&j| j != demand_col).collect();
    let log_demand: Vec<f64> = linear.x().column(demand_col).iter().copied().collect();
    let basis = spline_basis(&log_demand, k)?;
    let t = linear.nrows();
    let q = keep.len();
    let mut x = DMatrix::zeros(t, q + k - 1);
    for (c, &j) in keep.iter().enumerate() {
        x.set_column(c, &linear.x().column(j));
    }
    x.view_mut((0, q), (t, k - 1)).copy_from(&basis.psi);
    let mut names: Vec<String> = keep.iter().map(|&j| linear.names()[j].clone()).collect();
    names.extend((1..k).map(|j| format!("s{j}")));
    let qr = PivotedQr::new(&x, RANK_TOLERANCE);
    if !qr.is_full_rank() {
        return Err(Error::RankDeficient(
            qr.dependent_columns().into_iter().map(|j| names[j].clone()).collect(),
        ));
    }
    Ok(GamDesign {
        names,
        parametric: q,
        y: linear.y().clone(),
        x,
        log_demand,
        basis,
        linear,
    })
}

/// Reusable factorisation for fits at many smoothing parameters.
pub struct PenalizedSolver<'a> {
    design: &'a GamDesign,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    u: DMatrix<f64>,
    d: DVector<f64>,
    f: DVector<f64>,
}

/// Penalised least-squares fit at one smoothing parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedFit {
    pub lambda: f64,
    pub coefficients: DVector<f64>,
    pub fitted: DVector<f64>,
    pub rss: f64,
    /// Trace of the influence matrix.
    pub edf_total: f64,
    /// Trace of the smooth block of the influence matrix.
    pub edf_smooth: f64,
    pub gcv: f64,
}

impl<'a> PenalizedSolver<'a> {
    pub fn new(design: &'a GamDesign) -> Result<Self> {
        let qr = design.x.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let r_inv = r
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular smooth design".into()))?;
        let m = r_inv.transpose() * design.penalty() * &r_inv;
        let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5);
        // The constrained curvature penalty has rank k - 2; the remaining
        // eigenvalues are zero up to rounding and are set to zero exactly.
        let rank = design.basis.k - 2;
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut d = DVector::zeros(eig.eigenvalues.len());
        for &i in order.iter().take(rank) {
            d[i] = eig.eigenvalues[i].max(0.0);
        }
        let f = q.transpose() * &design.y;
        Ok(PenalizedSolver {
            design,
            q,
            r,
            r_inv,
            u: eig.eigenvectors,
            d,
            f,
        })
    }

    fn shrink(&self, lambda: f64) -> DVector<f64> {
        self.d.map(|v| 1.0 / (1.0 + lambda * v))
    }

    pub fn fit(&self, lambda: f64) -> Result<PenalizedFit> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Validation(format!(
                "smoothing parameter must be finite and non-negative, got {lambda}"
            )));
        }
        let l = self.shrink(lambda);
        let g = (self.u.transpose() * &self.f).component_mul(&l);
        let ug = &self.u * g;
        let coefficients = &self.r_inv * &ug;
        let fitted = &self.q * ug;
        let rss = (&self.design.y - &fitted).norm_squared();
        let edf_total = l.sum();
        let p0 = self.design.parametric;
        // diag(F)_j = sum_m (R^{-1} U)_{jm} L_m (U^T R)_{mj}
        let a = &self.r_inv * &self.u;
        let b = self.u.transpose() * &self.r;
        let edf_smooth: f64 = (p0..self.design.x.ncols())
            .map(|j| (0..l.len()).map(|m| a[(j, m)] * l[m] * b[(m, j)]).sum::<f64>())
            .sum();
        let t = self.design.y.len() as f64;
        let gcv = t * rss / (t - edf_total).powi(2);
        Ok(PenalizedFit {
            lambda,
            coefficients,
            fitted,
            rss,
            edf_total,
            edf_smooth,
            gcv,
        })
    }

    /// Negative twice the restricted log-likelihood, up to a constant, with
    /// the scale profiled out.
    pub fn reml(&self, lambda: f64) -> f64 {
        let t = self.design.y.len() as f64;
        let rank = self.design.basis.k - 2;
        let null_dim = (self.d.len() - rank) as f64;
        let g = self.u.transpose() * &self.f;
        let outside = self.design.y.norm_squared() - self.f.norm_squared();
        let prss = outside.max(0.0)
            + g.iter()
                .zip(self.d.iter())
                .map(|(gi, di)| gi * gi * lambda * di / (1.0 + lambda * di))
                .sum::<f64>();
        let logdet: f64 = self.d.iter().map(|di| (lambda * di).ln_1p()).sum();
        (t - null_dim) * prss.ln() + logdet - rank as f64 * lambda.ln()
    }

    /// `(X^T X + lambda S)^{-1}`.
    pub fn precision_inverse(&self, lambda: f64) -> DMatrix<f64> {
        let l = self.shrink(lambda);
        let a = &self.r_inv * &self.u;
        let mut al = a.clone();
        for (mut col, w) in al.column_iter_mut().zip(l.iter()) {
            col *= *w;
        }
        al * a.transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub gcv: f64,
    pub edf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GamRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub p_value: f64,
    pub stars: Stars,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GamFit {
    /// Parametric coefficients (intercept, lags, pass-through terms).
    pub parametric: Vec<GamRow>,
    pub smooth: Vec<f64>,
    pub lambda: f64,
    pub edf: f64,
    pub edf_total: f64,
    /// Wald test of the smooth with `max(1, round(edf))` degrees of freedom.
    pub smooth_p_value: f64,
    pub smooth_stars: Stars,
    pub r2_adj: f64,
    pub gcv: f64,
    pub nobs: usize,
    pub grid: Vec<GridPoint>,
}

impl GamFit {
    pub fn coef(&self, name: &str) -> Option<f64> {
        self.parametric.iter().find(|r| r.name == name).map(|r| r.estimate)
    }
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 20 {
        return Err(Error::Validation(format!(
            "smoothing grid needs at least 20 values, got {}",
            grid.len()
        )));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Validation(
            "smoothing grid values must be positive and finite".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("smoothing grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Inference summary of a penalised fit at `lambda`.
pub fn summarize(
    design: &GamDesign,
    solver: &PenalizedSolver<'_>,
    pen: &PenalizedFit,
    grid: Vec<GridPoint>,
) -> Result<GamFit> {
    let t = design.y.len();
    let resid_df = t as f64 - pen.edf_total;
    if !(resid_df > 0.0) {
        return Err(Error::Numerical("no residual degrees of freedom".into()));
    }
    let sigma2 = pen.rss / resid_df;
    let vcov = solver.precision_inverse(pen.lambda) * sigma2;
    let p0 = design.parametric;
    let parametric = (0..p0)
        .map(|j| {
            let se = vcov[(j, j)].max(0.0).sqrt();
            let p = normal_p_value(pen.coefficients[j] / se);
            GamRow {
                name: design.names[j].clone(),
                estimate: pen.coefficients[j],
                se,
                p_value: p,
                stars: Stars::from_p(p),
            }
        })
        .collect();
    let ks = design.basis.k - 1;
    let beta_s = pen.coefficients.rows(p0, ks).into_owned();
    let v_s = vcov.view((p0, p0), (ks, ks)).into_owned();
    let rank = (pen.edf_smooth.round() as usize).clamp(1, ks);
    let eig = SymmetricEigen::new((&v_s + v_s.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..ks).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut wald = 0.0;
    for &m in order.iter().take(rank) {
        let ev = eig.eigenvalues[m];
        if ev > 0.0 {
            let proj = eig.eigenvectors.column(m).dot(&beta_s);
            wald += proj * proj / ev;
        }
    }
    let smooth_p_value = statrs::function::gamma::gamma_ur(rank as f64 / 2.0, wald / 2.0);
    let mean = design.y.mean();
    let tss: f64 = design.y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2_adj = 100.0 * (1.0 - sigma2 / (tss / (t - 1) as f64));
    Ok(GamFit {
        parametric,
        smooth: beta_s.iter().copied().collect(),
        lambda: pen.lambda,
        edf: pen.edf_smooth,
        edf_total: pen.edf_total,
        smooth_p_value,
        smooth_stars: Stars::from_p(smooth_p_value),
        r2_adj,
        gcv: pen.gcv,
        nobs: t,
        grid,
    })
}

/// Smoothing-parameter selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Generalised cross-validation, `T RSS / (T - tr F)^2`.
    #[default]
    Gcv,
    /// Restricted marginal likelihood.
    Reml,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcv" => Ok(Criterion::Gcv),
            "reml" => Ok(Criterion::Reml),
            other => Err(Error::Validation(format!("unknown smoothing criterion `{other}`"))),
        }
    }
}

/// Penalised fit over `grid` with the smoothing parameter picked by
/// `criterion`; ties go to the smaller value.
pub fn gam_fit_design(design: &GamDesign, grid: &[f64], criterion: Criterion) -> Result<GamFit> {
    validate_grid(grid)?;
    let solver = PenalizedSolver::new(design)?;
    let fits: Vec<PenalizedFit> = grid.iter().map(|&l| solver.fit(l)).collect::<Result<_>>()?;
    let scores: Vec<f64> = fits
        .iter()
        .map(|f| match criterion {
            Criterion::Gcv => f.gcv,
            Criterion::Reml => solver.reml(f.lambda),
        })
        .collect();
    let mut best = 0;
    for (i, (f, score)) in fits.iter().zip(&scores).enumerate() {
        if !score.is_finite() {
            return Err(Error::Numerical(format!(
                "selection score is not finite at lambda = {}",
                f.lambda
            )));
        }
        if *score < scores[best] {
            best = i;
        }
    }
    let points = fits
        .iter()
        .map(|f| GridPoint {
            lambda: f.lambda,
            gcv: f.gcv,
            edf: f.edf_smooth,
        })
        .collect();
    summarize(design, &solver, &fits[best], points)
}

pub fn gam_fit(data: &DailySeries, spec: &CptrSpec, k: usize, grid: &[f64], criterion: Criterion) -> Result<GamFit> {
    gam_fit_design(&gam_design(data, spec, k)?, grid, criterion)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 37 % 101) as f64 / 100.0).powi(2) + 10.0).collect()
    }

    #[test]
    fn partition_of_unity_and_constraint() {
        let x = sample(200);
        let knots = quantile_knots(&x, 10).unwrap();
        let raw = basis_matrix(&knots, &x);
        for row in raw.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-13);
        }
        let basis = spline_basis(&x, 10).unwrap();
        for col in basis.psi.column_iter() {
            assert!(col.sum().abs() < 1e-10);
        }
        assert_eq!(basis.psi.ncols(), 9);
    }

    #[test]
    fn penalty_integrates_quadratic_exactly() {
        let x: Vec<f64> = sample(150).iter().map(|v| v - 10.0).collect();
        let t = quantile_knots(&x, 8).unwrap();
        // Blossom coefficients reproduce f(x) = x^2, whose f'' = 2.
        let c = DVector::from_fn(8, |i, _| {
            (t[i + 1] * t[i + 2] + t[i + 1] * t[i + 3] + t[i + 2] * t[i + 3]) / 3.0
        });
        let s = curvature_penalty(&t);
        let integral = (c.transpose() * &s * &c)[(0, 0)];
        let (a, b) = (t[0], t[t.len() - 1]);
        assert!((integral - 4.0 * (b - a)).abs() < 1e-10 * integral);
        let lin = DVector::from_fn(8, |i, _| (t[i + 1] + t[i + 2] + t[i + 3]) / 3.0);
        assert!((lin.transpose() * &s * &lin)[(0, 0)].abs() < 1e-8);
    }

    #[test]
    fn too_few_distinct_values() {
        assert!(spline_basis(&[1.0, 2.0, 3.0, 1.0, 2.0], 4).is_err());
        assert!(spline_basis(&sample(50), 3).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[1.0; 5]).is_err());
        assert!(validate_grid(&default_lambda_grid()).is_ok());
    }
}
