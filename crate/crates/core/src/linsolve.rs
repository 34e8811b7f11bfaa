//! Symmetric sparse solves and Newton's method.
//!
//! The default linear solver is conjugate gradients with a Jacobi
//! preconditioner. A banded `LDLᵀ` factorisation is available as the direct
//! method and as the fallback when CG meets non-positive curvature.

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMethod {
    ConjugateGradient,
    DirectCholesky,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: LinearMethod,
    /// relative residual target `‖Ax - b‖ ≤ tol·‖b‖`
    pub rel_tolerance: f64,
    /// CG iteration cap; `None` means `10 × unknowns`
    pub max_iterations: Option<usize>,
    /// bound on the discrete L² norm of a Newton update
    pub newton_tolerance: f64,
    pub newton_max_iter: usize,
    /// scale turning Euclidean norms into discrete L² norms (`h` in 2D)
    pub norm_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: LinearMethod::ConjugateGradient,
            rel_tolerance: 1e-12,
            max_iterations: None,
            newton_tolerance: 1e-10,
            newton_max_iter: 25,
            norm_scale: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn with_norm_scale(mut self, scale: f64) -> Self {
        self.norm_scale = scale;
        self
    }

    pub fn with_method(mut self, method: LinearMethod) -> Self {
        self.method = method;
        self
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.rel_tolerance) {
            return Err(Error::InvalidArgument(
                "rel_tolerance must be positive".into(),
            ));
        }
        if !positive(self.newton_tolerance) {
            return Err(Error::InvalidArgument(
                "newton_tolerance must be positive".into(),
            ));
        }
        if self.newton_max_iter == 0 || self.max_iterations == Some(0) {
            return Err(Error::InvalidArgument(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// final residual norm (linear) or final update norm (Newton)
    pub residual: f64,
    pub converged: bool,
    /// CG: energy `½xᵀAx - bᵀx` after each iteration.
    /// Newton: discrete L² norm of each update.
    pub history: Vec<f64>,
    /// set when CG failed and the direct factorisation took over
    pub used_fallback: bool,
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    if a.rows() != a.cols() || a.rows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: b.len(),
        });
    }
    match cfg.method {
        LinearMethod::DirectCholesky => direct_solve(a, b),
        LinearMethod::ConjugateGradient => match conjugate_gradient(a, b, None, cfg) {
            Err(Error::NotPositiveDefinite { .. }) => {
                let (x, mut report) = direct_solve(a, b)?;
                report.used_fallback = true;
                Ok((x, report))
            }
            other => other,
        },
    }
}

/// Jacobi-preconditioned conjugate gradients.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    let max_iter = cfg.max_iterations.unwrap_or(10 * n.max(1));
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut report = SolveReport::default();
    if bnorm == 0.0 {
        report.converged = true;
        return Ok((vec![0.0; n], report));
    }
    let target = cfg.rel_tolerance * bnorm;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = b.to_vec();
    let ax = a.mul_vec(&x);
    r.iter_mut().zip(&ax).for_each(|(ri, axi)| *ri -= axi);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rnorm = norm2(&r);

    while rnorm > target {
        if report.iterations >= max_iter {
            report.residual = rnorm;
            return Err(Error::LinearNotConverged { report });
        }
        a.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 || !curvature.is_finite() {
            return Err(Error::NotPositiveDefinite {
                curvature,
                iteration: report.iterations,
            });
        }
        let step = rz / curvature;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        report.iterations += 1;
        // energy ½xᵀAx - bᵀx = -½ xᵀ(b + r) since Ax = b - r
        report.history.push(
            -0.5 * x
                .iter()
                .zip(b.iter().zip(&r))
                .map(|(xi, (bi, ri))| xi * (bi + ri))
                .sum::<f64>(),
        );
        rnorm = norm2(&r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    report.residual = rnorm;
    report.converged = true;
    Ok((x, report))
}

/// Banded `LDLᵀ` factorisation of a symmetric matrix (no pivoting).
#[derive(Debug, Clone)]
pub struct BandedLdlt {
    n: usize,
    band: usize,
    /// `lower[i][k]` holds `L[i][i - band + k]`, unit diagonal implied
    lower: Vec<Vec<f64>>,
    diag: Vec<f64>,
}

impl BandedLdlt {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.rows();
        let band = a.bandwidth();
        let mut lower = vec![vec![0.0; band]; n];
        let mut diag = vec![0.0; n];
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..n {
            let lo = i.saturating_sub(band);
            for j in lo..i {
                let mut s = a.get(i, j);
                let jlo = j.saturating_sub(band).max(lo);
                for k in jlo..j {
                    s -= lower[i][k + band - i] * lower[j][k + band - j] * diag[k];
                }
                lower[i][j + band - i] = s / diag[j];
            }
            let mut d = a.get(i, i);
            for k in lo..i {
                let l = lower[i][k + band - i];
                d -= l * l * diag[k];
            }
            if d.abs() <= 1e-14 * scale || !d.is_finite() {
                return Err(Error::SingularPivot { row: i });
            }
            diag[i] = d;
        }
        Ok(Self {
            n,
            band,
            lower,
            diag,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, band) = (self.n, self.band);
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(band);
            for k in lo..i {
                y[i] -= self.lower[i][k + band - i] * y[k];
            }
        }
        for (yi, d) in y.iter_mut().zip(&self.diag) {
            *yi /= d;
        }
        for i in (0..n).rev() {
            let hi = (i + band).min(n - 1);
            for k in (i + 1)..=hi {
                y[i] -= self.lower[k][i + band - k] * y[k];
            }
        }
        y
    }

    /// Pivots `D` of the factorisation; all positive iff the matrix is SPD.
    pub fn pivots(&self) -> &[f64] {
        &self.diag
    }
}

fn direct_solve(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    let x = BandedLdlt::factor(a)?.solve(b);
    let mut r = a.mul_vec(&x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let report = SolveReport {
        iterations: 1,
        residual: norm2(&r),
        converged: true,
        ..SolveReport::default()
    };
    Ok((x, report))
}

/// Newton's method for `R(x) = 0` with Jacobian `J(x) = ∂R/∂x`.
///
/// Stops once the discrete L² norm of the update or of the residual falls
/// below `cfg.newton_tolerance`. Fails on
/// the iteration cap or after 5 consecutive residual increases.
pub fn newton_solve<R, J>(
    residual: R,
    jacobian: J,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    J: Fn(&[f64]) -> Result<CsrMatrix>,
{
    cfg.validate()?;
    let mut x = x0.to_vec();
    let mut report = SolveReport::default();
    let mut r = residual(&x)?;
    let mut rnorm = norm2(&r) * cfg.norm_scale;
    let mut growth = 0usize;
    if rnorm <= cfg.newton_tolerance {
        report.converged = true;
        return Ok((x, report));
    }
    loop {
        if report.iterations >= cfg.newton_max_iter {
            return Err(Error::NewtonFailed {
                reason: "hit the iteration cap",
                iterations: report.iterations,
                trajectory: report.history,
            });
        }
        let jac = jacobian(&x)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let (delta, _) = solve_spd(&jac, &rhs, cfg)?;
        x.iter_mut().zip(&delta).for_each(|(xi, di)| *xi += di);
        report.iterations += 1;
        let dnorm = norm2(&delta) * cfg.norm_scale;
        report.history.push(dnorm);
        report.residual = dnorm;
        if dnorm <= cfg.newton_tolerance {
            report.converged = true;
            return Ok((x, report));
        }
        r = residual(&x)?;
        let next = norm2(&r) * cfg.norm_scale;
        if !next.is_finite() {
            return Err(Error::NewtonFailed {
                reason: "produced a non-finite residual",
                iterations: report.iterations,
                trajectory: report.history,
            });
        }
        if next <= cfg.newton_tolerance {
            report.converged = true;
            return Ok((x, report));
        }
        growth = if next > rnorm { growth + 1 } else { 0 };
        if growth >= 5 {
            return Err(Error::NewtonFailed {
                reason: "diverged",
                iterations: report.iterations,
                trajectory: report.history,
            });
        }
        rnorm = next;
    }
}
