//! Dense primal simplex for `min cᵀx  s.t.  Ax = b, x ≥ 0`, started from a
//! basis whose columns form the identity and with `b ≥ 0`.
//!
//! Dantzig pricing, switching to Bland's rule after a run of degenerate
//! pivots. The tableau is rebuilt from the original data every
//! `REINVERT_INTERVAL` pivots and at termination, so reported solutions do
//! not carry accumulated pivoting error.

use nalgebra::{DMatrix, DVector};

const PRICE_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-11;
const REINVERT_INTERVAL: usize = 50;
const DEGENERATE_RUN: usize = 30;

#[derive(Debug, PartialEq)]
pub(crate) enum LpError {
    Unbounded,
    PivotLimit,
    Singular,
}

pub(crate) struct LpSolution {
    pub x: Vec<f64>,
}

struct Tableau<'a> {
    a: &'a DMatrix<f64>,
    b: &'a [f64],
    c: &'a [f64],
    basis: Vec<usize>,
    t: DMatrix<f64>,
    rhs: Vec<f64>,
    reduced: Vec<f64>,
}

impl<'a> Tableau<'a> {
    fn reinvert(&mut self) -> Result<(), LpError> {
        let m = self.a.nrows();
        let bmat = DMatrix::from_fn(m, m, |r, k| self.a[(r, self.basis[k])]);
        let lu = bmat.clone().lu();
        let t = lu.solve(self.a).ok_or(LpError::Singular)?;
        let rhs = lu
            .solve(&DVector::from_column_slice(self.b))
            .ok_or(LpError::Singular)?;
        let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| self.c[j]));
        let y = bmat.transpose().lu().solve(&cb).ok_or(LpError::Singular)?;
        let reduced = (0..self.a.ncols())
            .map(|j| self.c[j] - self.a.column(j).dot(&y))
            .collect();
        self.t = t;
        // Tiny negative values are round-off on degenerate rows.
        self.rhs = rhs.iter().map(|&v| if v < 0.0 && v > -1e-9 { 0.0 } else { v }).collect();
        self.reduced = reduced;
        for &j in &self.basis {
            self.reduced[j] = 0.0;
        }
        Ok(())
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let (m, n) = self.t.shape();
        let p = self.t[(row, col)];
        for k in 0..n {
            self.t[(row, k)] /= p;
        }
        self.rhs[row] /= p;
        for r in 0..m {
            if r == row {
                continue;
            }
            let f = self.t[(r, col)];
            if f != 0.0 {
                for k in 0..n {
                    let v = self.t[(row, k)];
                    if v != 0.0 {
                        self.t[(r, k)] -= f * v;
                    }
                }
                self.rhs[r] -= f * self.rhs[row];
            }
        }
        let f = self.reduced[col];
        for k in 0..n {
            self.reduced[k] -= f * self.t[(row, k)];
        }
        self.basis[row] = col;
    }
}

pub(crate) fn solve(
    a: &DMatrix<f64>,
    b: &[f64],
    c: &[f64],
    basis: Vec<usize>,
    max_pivots: usize,
) -> Result<LpSolution, LpError> {
    let (m, n) = a.shape();
    debug_assert_eq!(basis.len(), m);
    debug_assert!(b.iter().all(|&v| v >= 0.0));
    let mut tab = Tableau {
        a,
        b,
        c,
        basis,
        t: DMatrix::zeros(m, n),
        rhs: Vec::new(),
        reduced: Vec::new(),
    };
    tab.reinvert()?;
    let mut degenerate = 0usize;
    let mut since_reinvert = 0usize;
    for _ in 0..max_pivots {
        let bland = degenerate >= DEGENERATE_RUN;
        let entering = if bland {
            (0..n).find(|&j| tab.reduced[j] < -PRICE_TOL)
        } else {
            (0..n)
                .filter(|&j| tab.reduced[j] < -PRICE_TOL)
                .min_by(|&i, &j| tab.reduced[i].total_cmp(&tab.reduced[j]))
        };
        let Some(col) = entering else {
            if since_reinvert == 0 {
                break;
            }
            // Confirm optimality on a freshly rebuilt tableau.
            tab.reinvert()?;
            since_reinvert = 0;
            if (0..n).all(|j| tab.reduced[j] >= -PRICE_TOL) {
                break;
            }
            continue;
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let v = tab.t[(r, col)];
            if v > PIVOT_TOL {
                let ratio = tab.rhs[r] / v;
                let better = match leave {
                    None => true,
                    Some((lr, best)) => {
                        ratio < best - 1e-14 || (ratio <= best + 1e-14 && tab.basis[r] < tab.basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let (row, ratio) = leave.ok_or(LpError::Unbounded)?;
        degenerate = if ratio <= 1e-14 { degenerate + 1 } else { 0 };
        tab.pivot(row, col);
        since_reinvert += 1;
        if since_reinvert >= REINVERT_INTERVAL {
            tab.reinvert()?;
            since_reinvert = 0;
        }
    }
    if since_reinvert != 0 {
        tab.reinvert()?;
    }
    if (0..n).any(|j| tab.reduced[j] < -PRICE_TOL) {
        return Err(LpError::PivotLimit);
    }
    let mut x = vec![0.0; n];
    for (k, &j) in tab.basis.iter().enumerate() {
        x[j] = tab.rhs[k].max(0.0);
    }
    Ok(LpSolution { x })
}
