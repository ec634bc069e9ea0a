//! Reference minimizers for desk-scale problems, written independently of the
//! production solver and objective code.
//!
//! * logistic (mean cross-entropy + λ‖β‖₁): cyclic coordinate descent with
//!   each 1-D subproblem solved to machine precision by safeguarded Newton;
//! * hinge (summed hinge + λ‖β‖₁): the equivalent linear program
//!   `min Σξ + λΣ(u+v)  s.t.  ỹᵢ(b⁺ - b⁻ + xᵢᵀ(u - v)) + ξᵢ - σᵢ = 1`, all
//!   variables nonnegative, solved by dense simplex from the slack basis ξ.
//!
//! A plain subgradient method runs alongside as a cross-check: its best
//! objective must never beat the reference.

use nalgebra::DMatrix;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::simplex::{self, LpError};
use crate::dataset::Dataset;
use crate::objectives::ObjectiveSpec;

pub const MAX_ORACLE_SAMPLES: usize = 200;
pub const MAX_ORACLE_FEATURES: usize = 8;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle is limited to m ≤ {MAX_ORACLE_SAMPLES}, n ≤ {MAX_ORACLE_FEATURES}; got m = {m}, n = {n}")]
    TooLarge { m: usize, n: usize },
    #[error("objective is unbounded below or has no minimizer")]
    Unbounded,
    #[error("oracle did not converge: {0}")]
    Budget(String),
    #[error("subgradient cross-check reached {cross_check}, below the reference {reference}")]
    Disagreement { reference: f64, cross_check: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Iterations of the subgradient cross-check; 0 disables it.
    pub cross_check_iterations: usize,
    /// Coordinate descent stops when the optimality residual drops below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            cross_check_iterations: 1_000_000,
            tolerance: 1e-11,
            max_sweeps: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub objective: f64,
    /// Best objective seen by the subgradient cross-check, if it ran.
    pub cross_check_objective: Option<f64>,
}

pub fn oracle_minimize(
    objective: &ObjectiveSpec,
    d: &Dataset,
    opts: &OracleOptions,
) -> Result<OracleSolution, OracleError> {
    let x = d.features().view();
    let (m, n) = x.dim();
    if m > MAX_ORACLE_SAMPLES || n > MAX_ORACLE_FEATURES {
        return Err(OracleError::TooLarge { m, n });
    }
    let y: Vec<f64> = d.labels().iter().map(|&v| f64::from(v)).collect();
    let lambda = objective.lambda();
    let logistic = objective.kind().is_logistic();
    let (intercept, weights) = if logistic {
        coordinate_descent(x, &y, lambda, opts)?
    } else {
        hinge_lp(x, &y, lambda)?
    };
    let value = |b: f64, w: &[f64]| {
        if logistic {
            logistic_objective(x, &y, lambda, b, w)
        } else {
            hinge_objective(x, &y, lambda, b, w)
        }
    };
    let reference = value(intercept, &weights);
    let cross_check_objective = if opts.cross_check_iterations > 0 {
        let best = subgradient(x, &y, lambda, logistic, opts.cross_check_iterations);
        let slack = 1e-9 * reference.abs().max(1.0);
        if best < reference - slack {
            return Err(OracleError::Disagreement { reference, cross_check: best });
        }
        Some(best)
    } else {
        None
    };
    Ok(OracleSolution {
        intercept,
        weights,
        objective: reference,
        cross_check_objective,
    })
}

fn logistic_fn(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn dot_row(x: ArrayView2<f64>, i: usize, b: f64, w: &[f64]) -> f64 {
    b + w.iter().enumerate().map(|(j, wj)| wj * x[[i, j]]).sum::<f64>()
}

pub(crate) fn logistic_objective(x: ArrayView2<f64>, y: &[f64], lambda: f64, b: f64, w: &[f64]) -> f64 {
    const FLOOR: f64 = 1e-12;
    let m = y.len();
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let s = dot_row(x, i, b, w);
        let p1 = logistic_fn(s).clamp(FLOOR, 1.0 - FLOOR);
        let p0 = logistic_fn(-s).clamp(FLOOR, 1.0 - FLOOR);
        loss -= yi * p1.ln() + (1.0 - yi) * p0.ln();
    }
    loss / m as f64 + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

pub(crate) fn hinge_objective(x: ArrayView2<f64>, y: &[f64], lambda: f64, b: f64, w: &[f64]) -> f64 {
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let sign = 2.0 * yi - 1.0;
        loss += (1.0 - sign * dot_row(x, i, b, w)).max(0.0);
    }
    loss + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Root of an increasing function on `(lo, hi)` with `f(lo) < 0 < f(hi)`,
/// by Newton steps kept inside the bracket.
fn bracketed_root(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64, start: f64) -> f64 {
    let mut v = if start > lo && start < hi { start } else { 0.5 * (lo + hi) };
    for _ in 0..400 {
        let (fv, dv) = f(v);
        if fv == 0.0 {
            return v;
        }
        if fv < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        if hi - lo <= 4.0 * f64::EPSILON * v.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let newton = if dv > 0.0 { v - fv / dv } else { f64::NAN };
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if next == v {
            break;
        }
        v = next;
    }
    v
}

/// Expands from `from` in direction `dir` until `f` is nonnegative there
/// (for `dir > 0`) or nonpositive (for `dir < 0`).
fn expand(f: &impl Fn(f64) -> (f64, f64), from: f64, dir: f64) -> Result<f64, OracleError> {
    let mut width = 1.0f64.max(from.abs());
    for _ in 0..80 {
        let at = from + dir * width;
        let v = f(at).0;
        if (dir > 0.0 && v > 0.0) || (dir < 0.0 && v < 0.0) {
            return Ok(at);
        }
        width *= 2.0;
    }
    Err(OracleError::Unbounded)
}

fn coordinate_descent(
    x: ArrayView2<f64>,
    y: &[f64],
    lambda: f64,
    opts: &OracleOptions,
) -> Result<(f64, Vec<f64>), OracleError> {
    let (m, n) = x.dim();
    let mf = m as f64;
    let mut b = 0.0;
    let mut w = vec![0.0; n];
    let mut s = vec![0.0; m];

    // Mean derivative along column `col` (None = intercept) after shifting
    // the current scores by `t` times that column, and its second derivative.
    let directional = |s: &[f64], col: Option<usize>, t: f64| -> (f64, f64) {
        let (mut g, mut h) = (0.0, 0.0);
        for i in 0..m {
            let xi = col.map_or(1.0, |j| x[[i, j]]);
            let p = logistic_fn(s[i] + t * xi);
            g += xi * (p - y[i]);
            h += xi * xi * p * (1.0 - p);
        }
        (g / mf, h / mf)
    };

    for _ in 0..opts.max_sweeps {
        // Intercept: unpenalized, solve the mean residual to zero.
        let f = |t: f64| directional(&s, None, t);
        let g0 = f(0.0).0;
        let t = if g0 == 0.0 {
            0.0
        } else if g0 < 0.0 {
            bracketed_root(f, 0.0, expand(&f, 0.0, 1.0)?, 0.0)
        } else {
            bracketed_root(f, expand(&f, 0.0, -1.0)?, 0.0, 0.0)
        };
        b += t;
        s.iter_mut().for_each(|v| *v += t);

        for j in 0..n {
            let old = w[j];
            // φ(v): loss derivative with β_j = v.
            let phi = |v: f64| directional(&s, Some(j), v - old);
            let at_zero = phi(0.0).0;
            let new = if at_zero.abs() <= lambda {
                0.0
            } else if at_zero < -lambda {
                let f = |v: f64| {
                    let (g, h) = phi(v);
                    (g + lambda, h)
                };
                bracketed_root(&f, 0.0, expand(&f, 0.0, 1.0)?, old)
            } else {
                let f = |v: f64| {
                    let (g, h) = phi(v);
                    (g - lambda, h)
                };
                bracketed_root(&f, expand(&f, 0.0, -1.0)?, 0.0, old)
            };
            let delta = new - old;
            if delta != 0.0 {
                for i in 0..m {
                    s[i] += delta * x[[i, j]];
                }
                w[j] = new;
            }
        }

        // Rebuild scores against drift, then test optimality.
        for (i, si) in s.iter_mut().enumerate() {
            *si = dot_row(x, i, b, &w);
        }
        let mut resid = directional(&s, None, 0.0).0.abs();
        for j in 0..n {
            let g = directional(&s, Some(j), 0.0).0;
            let r = if w[j] != 0.0 {
                (g + lambda * w[j].signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            resid = resid.max(r);
        }
        if resid <= opts.tolerance {
            return Ok((b, w));
        }
    }
    Err(OracleError::Budget(format!("coordinate descent exceeded {} sweeps", opts.max_sweeps)))
}

fn hinge_lp(x: ArrayView2<f64>, y: &[f64], lambda: f64) -> Result<(f64, Vec<f64>), OracleError> {
    let (m, n) = x.dim();
    // Columns: b⁺, b⁻, u (n), v (n), ξ (m), σ (m).
    let cols = 2 + 2 * n + 2 * m;
    let xi0 = 2 + 2 * n;
    let sg0 = xi0 + m;
    let mut a = DMatrix::zeros(m, cols);
    for i in 0..m {
        let yi = 2.0 * y[i] - 1.0;
        a[(i, 0)] = yi;
        a[(i, 1)] = -yi;
        for j in 0..n {
            a[(i, 2 + j)] = yi * x[[i, j]];
            a[(i, 2 + n + j)] = -yi * x[[i, j]];
        }
        a[(i, xi0 + i)] = 1.0;
        a[(i, sg0 + i)] = -1.0;
    }
    let mut c = vec![0.0; cols];
    c[2..2 + 2 * n].iter_mut().for_each(|v| *v = lambda);
    c[xi0..sg0].iter_mut().for_each(|v| *v = 1.0);
    let rhs = vec![1.0; m];
    let basis: Vec<usize> = (xi0..sg0).collect();
    let sol = simplex::solve(&a, &rhs, &c, basis, 100 * cols).map_err(|e| match e {
        LpError::Unbounded => OracleError::Unbounded,
        LpError::PivotLimit => OracleError::Budget("simplex pivot limit".into()),
        LpError::Singular => OracleError::Budget("singular simplex basis".into()),
    })?;
    let b = sol.x[0] - sol.x[1];
    let w = (0..n).map(|j| sol.x[2 + j] - sol.x[2 + n + j]).collect();
    Ok((b, w))
}

/// Best objective reached by a normalized subgradient method with step
/// `1/√(k+1)`, started from zero.
fn subgradient(x: ArrayView2<f64>, y: &[f64], lambda: f64, logistic: bool, iterations: usize) -> f64 {
    let (m, n) = x.dim();
    let mut b = 0.0;
    let mut w = vec![0.0; n];
    let value = |b: f64, w: &[f64]| {
        if logistic {
            logistic_objective(x, y, lambda, b, w)
        } else {
            hinge_objective(x, y, lambda, b, w)
        }
    };
    let mut best = value(b, &w);
    let mut g = vec![0.0; n + 1];
    for k in 0..iterations {
        g.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let s = dot_row(x, i, b, &w);
            let coef = if logistic {
                (logistic_fn(s) - y[i]) / m as f64
            } else {
                let sign = 2.0 * y[i] - 1.0;
                if sign * s < 1.0 {
                    -sign
                } else {
                    0.0
                }
            };
            if coef != 0.0 {
                g[0] += coef;
                for j in 0..n {
                    g[j + 1] += coef * x[[i, j]];
                }
            }
        }
        for j in 0..n {
            g[j + 1] += lambda * w[j].signum();
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let step = 1.0 / ((k + 1) as f64).sqrt() / norm;
        b -= step * g[0];
        for j in 0..n {
            w[j] -= step * g[j + 1];
        }
        best = best.min(value(b, &w));
    }
    best
}
