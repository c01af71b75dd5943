//! Least absolute deviation autoregression without intercept.
//!
//! An IRLS pass supplies a starting point; an exact vertex descent then
//! walks edges of the piecewise-linear objective until no edge descends.
//! Recursive fits warm-start from the previous optimal vertex, since
//! appending one equation keeps the old basis feasible.

use crate::error::{Error, Result};
use crate::linalg::{solve_general, solve_spd, SquareMatrix};
use crate::scalar::Scalar;
use crate::series::{EstimateSequence, TimeSeries};

pub const IRLS_TOL: f64 = 1e-9;
pub const IRLS_MAX_ITER: usize = 200;
pub const RESIDUAL_FLOOR: f64 = 1e-8;
/// Observations beyond the order before the first recursive fit.
pub const LAD_WARMUP: usize = 10;

/// Regression rows `(X_{s-1}, .., X_{s-p})` with response `X_s`, `s = p+1..`.
struct Design<'a> {
    x: &'a [f64],
    p: usize,
}

impl Design<'_> {
    fn row(&self, i: usize) -> &[f64] {
        // equation i has response x[p + i] and regressors x[p+i-1] down to x[i]
        &self.x[i..i + self.p]
    }

    fn regressor(&self, i: usize, j: usize) -> f64 {
        self.row(i)[self.p - 1 - j]
    }

    fn response(&self, i: usize) -> f64 {
        self.x[self.p + i]
    }

    fn fitted(&self, i: usize, theta: &[f64]) -> f64 {
        (0..self.p).map(|j| theta[j] * self.regressor(i, j)).sum()
    }

    fn residual(&self, i: usize, theta: &[f64]) -> f64 {
        self.response(i) - self.fitted(i, theta)
    }

    fn dot(&self, i: usize, d: &[f64]) -> f64 {
        self.fitted(i, d)
    }

    fn objective(&self, m: usize, theta: &[f64]) -> f64 {
        (0..m).map(|i| self.residual(i, theta).abs()).sum()
    }

    fn regressor_vec(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.regressor(i, j)).collect()
    }
}

/// Weighted least squares iterations with weights `1 / max(|r|, 1e-8)`.
/// Returns the last iterate and whether the parameter change fell below
/// the tolerance.
fn irls(d: &Design, m: usize) -> (Vec<f64>, bool) {
    let p = d.p;
    let mut theta = vec![0.0; p];
    let mut weights = vec![1.0; m];
    for iter in 0..=IRLS_MAX_ITER {
        let mut a = SquareMatrix::<f64>::zeros(p);
        let mut b = vec![0.0; p];
        for (i, &w) in weights.iter().enumerate() {
            let xi = d.regressor_vec(i);
            a.add_outer(&xi, w);
            for j in 0..p {
                b[j] += w * xi[j] * d.response(i);
            }
        }
        let Ok(next) = solve_spd(&a, &b) else {
            return (theta, false);
        };
        let change = next
            .iter()
            .zip(&theta)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        theta = next;
        if iter > 0 && change <= IRLS_TOL {
            return (theta, true);
        }
        for (i, w) in weights.iter_mut().enumerate() {
            *w = 1.0 / d.residual(i, &theta).abs().max(RESIDUAL_FLOOR);
        }
    }
    (theta, false)
}

fn basis_matrix(d: &Design, basis: &[usize]) -> Vec<Vec<f64>> {
    basis.iter().map(|&i| d.regressor_vec(i)).collect()
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = a.len();
    (0..p).map(|j| (0..p).map(|i| a[i][j]).collect()).collect()
}

const SINGULAR_TOL: f64 = 1e-12;

/// Picks `p` linearly independent equations, preferring small residuals at
/// `theta`, and returns them with the vertex they interpolate.
fn initial_vertex(d: &Design, m: usize, theta: &[f64]) -> Option<(Vec<usize>, Vec<f64>)> {
    let p = d.p;
    let mut order: Vec<usize> = (0..m).collect();
    let resid: Vec<f64> = (0..m).map(|i| d.residual(i, theta).abs()).collect();
    order.sort_by(|&a, &b| resid[a].total_cmp(&resid[b]));
    let mut basis = Vec::with_capacity(p);
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
    for &i in &order {
        let mut v = d.regressor_vec(i);
        let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        for u in &ortho {
            let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (vj, uj) in v.iter_mut().zip(u) {
                *vj -= c * uj;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-10 * norm0 {
            v.iter_mut().for_each(|a| *a /= norm);
            ortho.push(v);
            basis.push(i);
            if basis.len() == p {
                break;
            }
        }
    }
    if basis.len() < p {
        return None;
    }
    let rhs: Vec<f64> = basis.iter().map(|&i| d.response(i)).collect();
    let vertex = solve_general(&basis_matrix(d, &basis), &rhs, SINGULAR_TOL)?;
    Some((basis, vertex))
}

/// Exact descent over vertices of the LAD objective on the first `m`
/// equations. `basis` rows are interpolated by `theta` on entry.
fn vertex_descent(
    d: &Design,
    m: usize,
    mut basis: Vec<usize>,
    mut theta: Vec<f64>,
) -> Option<(Vec<usize>, Vec<f64>)> {
    let p = d.p;
    let scale = (0..m).fold(0.0f64, |a, i| a.max(d.response(i).abs())).max(1.0);
    let zero_tol = 1e-12 * scale;
    let max_steps = 50 * (m + p) + 100;
    let mut in_basis = vec![false; m];
    for _ in 0..max_steps {
        in_basis.iter_mut().for_each(|b| *b = false);
        basis.iter().for_each(|&i| in_basis[i] = true);
        let resid: Vec<f64> = (0..m).map(|i| d.residual(i, &theta)).collect();

        let mut g = vec![0.0; p];
        for i in (0..m).filter(|&i| !in_basis[i] && resid[i].abs() > zero_tol) {
            let s = resid[i].signum();
            for (j, gj) in g.iter_mut().enumerate() {
                *gj += s * d.regressor(i, j);
            }
        }
        let xb = basis_matrix(d, &basis);
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let u = solve_general(&transpose(&xb), &neg_g, SINGULAR_TOL)?;

        let mut candidates: Vec<usize> = (0..p).filter(|&i| u[i].abs() > 1.0 + 1e-10).collect();
        candidates.sort_by(|&a, &b| u[b].abs().total_cmp(&u[a].abs()));
        let mut moved = false;
        for &leave in &candidates {
            let delta = -u[leave].signum();
            let mut e = vec![0.0; p];
            e[leave] = delta;
            let dir = solve_general(&xb, &e, SINGULAR_TOL)?;
            let mut slope = 1.0 - u[leave].abs();
            let mut breaks: Vec<(f64, usize, f64)> = Vec::new();
            for i in (0..m).filter(|&i| !in_basis[i]) {
                let a = d.dot(i, &dir);
                if resid[i].abs() <= zero_tol {
                    slope += a.abs();
                } else if a != 0.0 {
                    let tau = resid[i] / a;
                    if tau > 0.0 {
                        breaks.push((tau, i, 2.0 * a.abs()));
                    }
                }
            }
            if slope >= 0.0 {
                continue;
            }
            breaks.sort_by(|a, b| a.0.total_cmp(&b.0));
            let Some(&(tau, enter, _)) = breaks.iter().find(|&&(_, _, inc)| {
                slope += inc;
                slope >= 0.0
            }) else {
                continue;
            };
            let before = d.objective(m, &theta);
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, v)| t + tau * v).collect();
            let mut trial_basis = basis.clone();
            trial_basis[leave] = enter;
            let rhs: Vec<f64> = trial_basis.iter().map(|&i| d.response(i)).collect();
            let exact = solve_general(&basis_matrix(d, &trial_basis), &rhs, SINGULAR_TOL)
                .unwrap_or(trial);
            if d.objective(m, &exact) > before * (1.0 + 1e-12) + 1e-300 {
                continue;
            }
            theta = exact;
            basis = trial_basis;
            moved = true;
            break;
        }
        if !moved {
            return Some((basis, theta));
        }
    }
    None
}

fn cold_fit(d: &Design, m: usize) -> Option<(Vec<usize>, Vec<f64>, bool)> {
    let (start, converged) = irls(d, m);
    match initial_vertex(d, m, &start).and_then(|(b, v)| vertex_descent(d, m, b, v)) {
        Some((b, v)) => Some((b, v, true)),
        None if converged => Some((Vec::new(), start, false)),
        None => None,
    }
}

fn check_order(p: usize, n: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidArgument("LAD order must be >= 1".into()));
    }
    if n < p + LAD_WARMUP {
        return Err(Error::TooShort {
            n,
            min: p + LAD_WARMUP,
        });
    }
    Ok(())
}

fn to_f64<T: Scalar>(ts: &TimeSeries<T>) -> Vec<f64> {
    ts.iter().map(|v| v.as_f64()).collect()
}

/// LAD autoregression coefficients `(phi_1, .., phi_p)` on the full sample.
pub fn lad_ar<T: Scalar>(ts: &TimeSeries<T>, p: usize) -> Result<Vec<T>> {
    let n = ts.len();
    check_order(p, n)?;
    let x = to_f64(ts);
    let d = Design { x: &x, p };
    let (_, theta, _) = cold_fit(&d, n - p).ok_or(Error::SolverFailed(n))?;
    Ok(theta.into_iter().map(T::lit).collect())
}

/// Recursive LAD autoregression fits on prefixes `t = p+10..n`.
pub fn prefix_lad_ar<T: Scalar>(ts: &TimeSeries<T>, p: usize) -> Result<EstimateSequence<T>> {
    let n = ts.len();
    check_order(p, n)?;
    let first = p + LAD_WARMUP;
    let x = to_f64(ts);
    let d = Design { x: &x, p };
    let mut out = Vec::with_capacity((n - first + 1) * p);
    let mut state: Option<(Vec<usize>, Vec<f64>)> = None;
    for t in first..=n {
        let m = t - p;
        let warm = state
            .take()
            .and_then(|(b, v)| vertex_descent(&d, m, b, v));
        let (basis, theta) = match warm {
            Some(bv) => bv,
            None => {
                let (b, v, exact) = cold_fit(&d, m).ok_or(Error::SolverFailed(t))?;
                if !exact {
                    out.extend(v.iter().map(|&c| T::lit(c)));
                    continue;
                }
                (b, v)
            }
        };
        out.extend(theta.iter().map(|&c| T::lit(c)));
        state = Some((basis, theta));
    }
    EstimateSequence::new(p, n, first, out)
}
