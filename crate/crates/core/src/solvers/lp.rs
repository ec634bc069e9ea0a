//! Exact minimizer of the hinge objectives as a linear program.
//!
//! With `b = b⁺ - b⁻`, `β = u - v` and per-sample slacks the problem reads
//! `min Σξ + λΣ(u + v)` subject to `ỹᵢ(b + xᵢᵀβ) + ξᵢ - σᵢ = 1`, all
//! variables nonnegative. It is solved by a revised primal simplex over a
//! dense basis inverse with rank-one updates. At an optimal basis the
//! simplex duals are hinge multipliers `aᵢ ∈ [0, 1]`.

use nalgebra::DMatrix;
use ndarray::{Array1, ArrayView2};

use crate::objectives::{score_rows, WeightVector};

/// Reduced costs below `-PRICE_TOL` are improving.
const PRICE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_INTERVAL: usize = 100;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;
/// Basic values this small are exact zeros in the returned solution.
const ZERO_TOL: f64 = 1e-12;
/// Margins this close to 1 count as on the margin when crashing a basis.
const CRASH_MARGIN_TOL: f64 = 1e-9;

pub(crate) struct LpOutcome {
    pub weights: WeightVector,
    pub multipliers: Vec<f64>,
    pub pivots: usize,
    pub optimal: bool,
}

#[derive(Clone, Copy)]
enum Col {
    BPlus,
    BMinus,
    U(usize),
    V(usize),
    Xi(usize),
    Sigma(usize),
}

struct Lp<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    lambda: f64,
    m: usize,
    n: usize,
}

impl Lp<'_> {
    fn column_count(&self) -> usize {
        2 + 2 * self.n + 2 * self.m
    }

    fn kind(&self, c: usize) -> Col {
        let (n, m) = (self.n, self.m);
        match c {
            0 => Col::BPlus,
            1 => Col::BMinus,
            c if c < 2 + n => Col::U(c - 2),
            c if c < 2 + 2 * n => Col::V(c - 2 - n),
            c if c < 2 + 2 * n + m => Col::Xi(c - 2 - 2 * n),
            c => Col::Sigma(c - 2 - 2 * n - m),
        }
    }

    fn index(&self, col: Col) -> usize {
        let (n, m) = (self.n, self.m);
        match col {
            Col::BPlus => 0,
            Col::BMinus => 1,
            Col::U(j) => 2 + j,
            Col::V(j) => 2 + n + j,
            Col::Xi(i) => 2 + 2 * n + i,
            Col::Sigma(i) => 2 + 2 * n + m + i,
        }
    }

    /// The column with the opposite constraint coefficients.
    fn mirror(&self, c: usize) -> usize {
        self.index(match self.kind(c) {
            Col::BPlus => Col::BMinus,
            Col::BMinus => Col::BPlus,
            Col::U(j) => Col::V(j),
            Col::V(j) => Col::U(j),
            Col::Xi(i) => Col::Sigma(i),
            Col::Sigma(i) => Col::Xi(i),
        })
    }

    fn cost(&self, c: usize) -> f64 {
        match self.kind(c) {
            Col::U(_) | Col::V(_) => self.lambda,
            Col::Xi(_) => 1.0,
            Col::BPlus | Col::BMinus | Col::Sigma(_) => 0.0,
        }
    }

    fn dense(&self, c: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.m];
        match self.kind(c) {
            Col::BPlus => a.copy_from_slice(self.y),
            Col::BMinus => a.iter_mut().zip(self.y).for_each(|(a, y)| *a = -y),
            Col::U(j) => a.iter_mut().enumerate().for_each(|(i, a)| *a = self.y[i] * self.x[[i, j]]),
            Col::V(j) => a.iter_mut().enumerate().for_each(|(i, a)| *a = -self.y[i] * self.x[[i, j]]),
            Col::Xi(i) => a[i] = 1.0,
            Col::Sigma(i) => a[i] = -1.0,
        }
        a
    }
}

struct Basis {
    m: usize,
    cols: Vec<usize>,
    is_basic: Vec<bool>,
    /// Row-major `B⁻¹`.
    inv: Vec<f64>,
    values: Vec<f64>,
}

impl Basis {
    fn slack(lp: &Lp) -> Self {
        let m = lp.m;
        let cols: Vec<usize> = (0..m).map(|i| lp.index(Col::Xi(i))).collect();
        let mut inv = vec![0.0; m * m];
        (0..m).for_each(|i| inv[i * m + i] = 1.0);
        let mut is_basic = vec![false; lp.column_count()];
        cols.iter().for_each(|&c| is_basic[c] = true);
        Self { m, cols, is_basic, inv, values: vec![1.0; m] }
    }

    /// Basis whose vertex is the point `w`, if `w` is a feasible vertex.
    /// Samples strictly inside or outside the margin keep their slack basic;
    /// margin samples fill the remaining rows.
    fn crash(lp: &Lp, w: &WeightVector) -> Option<Self> {
        let m = lp.m;
        let mut cols = Vec::with_capacity(m);
        if w.intercept > 0.0 {
            cols.push(lp.index(Col::BPlus));
        } else if w.intercept < 0.0 {
            cols.push(lp.index(Col::BMinus));
        }
        for (j, &b) in w.weights.iter().enumerate() {
            if b > 0.0 {
                cols.push(lp.index(Col::U(j)));
            } else if b < 0.0 {
                cols.push(lp.index(Col::V(j)));
            }
        }
        let scores = score_rows(w, lp.x);
        let mut margin = Vec::new();
        for (i, (&s, &y)) in scores.iter().zip(lp.y).enumerate() {
            let t = y * s;
            if t < 1.0 - CRASH_MARGIN_TOL {
                cols.push(lp.index(Col::Xi(i)));
            } else if t > 1.0 + CRASH_MARGIN_TOL {
                cols.push(lp.index(Col::Sigma(i)));
            } else {
                margin.push(i);
            }
        }
        if cols.len() > m {
            return None;
        }
        let fill = m - cols.len();
        cols.extend(margin.iter().take(fill).map(|&i| lp.index(Col::Xi(i))));
        if cols.len() < m {
            return None;
        }
        let mut is_basic = vec![false; lp.column_count()];
        cols.iter().for_each(|&c| is_basic[c] = true);
        let mut basis = Self { m, cols, is_basic, inv: Vec::new(), values: Vec::new() };
        if !basis.refactor(lp) || basis.values.iter().any(|&v| v < -1e-9) {
            return None;
        }
        Some(basis)
    }

    /// Recomputes `B⁻¹` and the basic values from scratch.
    fn refactor(&mut self, lp: &Lp) -> bool {
        let m = self.m;
        let mut b = DMatrix::zeros(m, m);
        for (r, &c) in self.cols.iter().enumerate() {
            for (i, v) in lp.dense(c).into_iter().enumerate() {
                b[(i, r)] = v;
            }
        }
        let Some(inv) = b.try_inverse() else {
            return false;
        };
        if inv.iter().any(|v| !v.is_finite()) {
            return false;
        }
        self.inv = (0..m * m).map(|k| inv[(k / m, k % m)]).collect();
        self.values = (0..m).map(|r| self.inv[r * m..(r + 1) * m].iter().sum()).collect();
        true
    }

    /// `B⁻ᵀ c_B`.
    fn duals(&self, lp: &Lp) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &c) in self.cols.iter().enumerate() {
            let cost = lp.cost(c);
            if cost != 0.0 {
                let row = &self.inv[r * m..(r + 1) * m];
                y.iter_mut().zip(row).for_each(|(y, b)| *y += cost * b);
            }
        }
        y
    }

    /// `B⁻¹ a_c`.
    fn direction(&self, lp: &Lp, c: usize) -> Vec<f64> {
        let m = self.m;
        match lp.kind(c) {
            Col::Xi(i) => (0..m).map(|r| self.inv[r * m + i]).collect(),
            Col::Sigma(i) => (0..m).map(|r| -self.inv[r * m + i]).collect(),
            _ => {
                let a = lp.dense(c);
                (0..m)
                    .map(|r| self.inv[r * m..(r + 1) * m].iter().zip(&a).map(|(b, a)| b * a).sum())
                    .collect()
            }
        }
    }

    fn pivot(&mut self, row: usize, entering: usize, d: &[f64], step: f64) {
        let m = self.m;
        for (v, di) in self.values.iter_mut().zip(d) {
            *v -= step * di;
        }
        self.values[row] = step;
        let p = d[row];
        let pivot_row: Vec<f64> = self.inv[row * m..(row + 1) * m].iter().map(|v| v / p).collect();
        for r in 0..m {
            if r == row || d[r] == 0.0 {
                continue;
            }
            let f = d[r];
            self.inv[r * m..(r + 1) * m]
                .iter_mut()
                .zip(&pivot_row)
                .for_each(|(v, pr)| *v -= f * pr);
        }
        self.inv[row * m..(row + 1) * m].copy_from_slice(&pivot_row);
        self.is_basic[self.cols[row]] = false;
        self.is_basic[entering] = true;
        self.cols[row] = entering;
    }
}

/// Entering column: most negative reduced cost, or the lowest-index
/// improving column under Bland's rule.
fn price(lp: &Lp, basis: &Basis, duals: &[f64], bland: bool) -> Option<usize> {
    let q: Array1<f64> = duals.iter().zip(lp.y).map(|(d, y)| d * y).collect();
    let s = q.sum();
    let g = lp.x.t().dot(&q);
    let reduced = |c: usize| match lp.kind(c) {
        Col::BPlus => -s,
        Col::BMinus => s,
        Col::U(j) => lp.lambda - g[j],
        Col::V(j) => lp.lambda + g[j],
        Col::Xi(i) => 1.0 - duals[i],
        Col::Sigma(i) => duals[i],
    };
    let mut best: Option<(usize, f64)> = None;
    // A column whose mirror is basic has reduced cost exactly zero up to
    // round-off, and entering it would follow a zero-cost ray.
    for c in (0..lp.column_count()).filter(|&c| !basis.is_basic[c] && !basis.is_basic[lp.mirror(c)]) {
        let r = reduced(c);
        if r >= -PRICE_TOL {
            continue;
        }
        if bland {
            return Some(c);
        }
        if best.map_or(true, |(_, b)| r < b) {
            best = Some((c, r));
        }
    }
    best.map(|(c, _)| c)
}

/// Minimizes `Σ max(0, 1 - ỹᵢ(b + xᵢᵀβ)) + λ‖β‖₁` with `y` in ±1, within
/// `max_pivots` simplex pivots. A warm start that is a feasible vertex seeds
/// the basis; otherwise the all-slack basis is used.
pub(crate) fn solve_hinge(
    x: ArrayView2<f64>,
    y: &[f64],
    lambda: f64,
    warm: Option<&WeightVector>,
    max_pivots: usize,
) -> LpOutcome {
    let (m, n) = x.dim();
    let lp = Lp { x, y, lambda, m, n };
    let mut basis = warm.and_then(|w| Basis::crash(&lp, w)).unwrap_or_else(|| Basis::slack(&lp));
    let mut pivots = 0;
    let mut since_refactor = 0;
    let mut degenerate = 0;
    let mut optimal = false;
    loop {
        let duals = basis.duals(&lp);
        let Some(entering) = price(&lp, &basis, &duals, degenerate >= DEGENERATE_RUN) else {
            if since_refactor > 0 && basis.refactor(&lp) {
                since_refactor = 0;
                continue;
            }
            optimal = true;
            break;
        };
        if pivots >= max_pivots {
            break;
        }
        let d = basis.direction(&lp, entering);
        let mut leave: Option<(usize, f64)> = None;
        for (r, &dr) in d.iter().enumerate() {
            if dr <= PIVOT_TOL {
                continue;
            }
            let ratio = basis.values[r].max(0.0) / dr;
            let better = match leave {
                None => true,
                Some((l, best)) => {
                    ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis.cols[r] < basis.cols[l])
                }
            };
            if better {
                leave = Some((r, ratio));
            }
        }
        let Some((row, step)) = leave else {
            // An unbounded ray cannot exist for a nonnegative objective;
            // only round-off produces one.
            if since_refactor > 0 && basis.refactor(&lp) {
                since_refactor = 0;
                continue;
            }
            break;
        };
        basis.pivot(row, entering, &d, step);
        pivots += 1;
        since_refactor += 1;
        degenerate = if step <= 1e-14 { degenerate + 1 } else { 0 };
        if since_refactor >= REFACTOR_INTERVAL && basis.refactor(&lp) {
            since_refactor = 0;
        }
    }

    let mut primal = vec![0.0; lp.column_count()];
    for (&c, &v) in basis.cols.iter().zip(&basis.values) {
        primal[c] = if v.abs() <= ZERO_TOL { 0.0 } else { v.max(0.0) };
    }
    let weights = WeightVector {
        intercept: primal[lp.index(Col::BPlus)] - primal[lp.index(Col::BMinus)],
        weights: (0..n).map(|j| primal[lp.index(Col::U(j))] - primal[lp.index(Col::V(j))]).collect(),
    };
    let multipliers = basis.duals(&lp).into_iter().map(|a| a.clamp(0.0, 1.0)).collect();
    LpOutcome { weights, multipliers, pivots, optimal }
}
