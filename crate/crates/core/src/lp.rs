//! Small dense linear programming: two-phase primal simplex with dual
//! extraction, plus a column-generation driver for programs whose columns
//! are enumerated lazily by a pricing callback.
//!
//! The programs in this crate have few rows (at most a few dozen) and
//! potentially millions of candidate columns (hidden-direction grids ×
//! answer strategies), which is exactly the shape column generation
//! handles well: keep a small restricted master problem, ask the pricer
//! for the best off-master column under the current duals, repeat.

use crate::error::{Result, SteerError};

/// Solution of `max cᵀx  s.t.  A x = b, x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    /// Dual values, one per constraint row.
    pub duals: Vec<f64>,
    /// Basic column indices (length = number of rows).
    pub basis: Vec<usize>,
    /// Phase-1 residual: how far from feasible the problem is (0 when
    /// feasible). Only meaningful when `feasible` is false.
    pub infeasibility: f64,
    pub feasible: bool,
}

const EPS: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-11;

/// Dense equality-form LP, columns stored column-major.
pub struct DenseLp {
    rows: usize,
    cols: Vec<Vec<f64>>,
    costs: Vec<f64>,
    rhs: Vec<f64>,
}

impl DenseLp {
    pub fn new(rhs: Vec<f64>) -> Self {
        Self { rows: rhs.len(), cols: Vec::new(), costs: Vec::new(), rhs }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn push_column(&mut self, col: Vec<f64>, cost: f64) -> usize {
        assert_eq!(col.len(), self.rows, "column length must match row count");
        self.cols.push(col);
        self.costs.push(cost);
        self.cols.len() - 1
    }

    /// Two-phase tableau simplex, maximizing. Bland's rule everywhere; the
    /// problems solved here are small and degenerate, so anti-cycling
    /// matters more than pivot counts.
    pub fn solve(&self) -> Result<LpSolution> {
        let m = self.rows;
        let n = self.cols.len();
        if n == 0 {
            return Err(SteerError::Solver("LP has no columns".into()));
        }

        // Tableau layout: columns [0, n) = structural, [n, n+m) = artificial,
        // last column = rhs. Row `m` is the phase objective row.
        let width = n + m + 1;
        let mut t = vec![vec![0.0_f64; width]; m + 1];
        for i in 0..m {
            let sign = if self.rhs[i] < 0.0 { -1.0 } else { 1.0 };
            for (j, col) in self.cols.iter().enumerate() {
                t[i][j] = sign * col[i];
            }
            t[i][n + i] = 1.0;
            t[i][width - 1] = sign * self.rhs[i];
        }
        let mut basis: Vec<usize> = (n..n + m).collect();

        // Phase 1: maximize −Σ artificials. Objective row holds z_j − c_j;
        // with the artificials basic at cost −1 this is −Σ_i t[i][j] for
        // structural columns and 0 under the artificials themselves.
        for j in 0..width {
            let mut v = 0.0;
            for i in 0..m {
                v -= t[i][j];
            }
            t[m][j] = v;
        }
        for i in 0..m {
            t[m][n + i] = 0.0;
        }
        self.run_simplex(&mut t, &mut basis, n, true)?;
        let infeasibility = (-t[m][width - 1]).max(0.0);
        if infeasibility > 1e-7 {
            return Ok(LpSolution {
                objective: f64::NEG_INFINITY,
                x: vec![0.0; n],
                duals: vec![0.0; m],
                basis,
                infeasibility,
                feasible: false,
            });
        }

        // Phase 2: original costs. Rebuild the objective row from the
        // current basis: c̄_j = c_B B⁻¹ a_j − c_j, stored negated so the
        // entering rule stays "most any negative".
        for j in 0..width {
            let mut v = if j < n { -self.costs[j] } else { 0.0 };
            for i in 0..m {
                let cb = if basis[i] < n { self.costs[basis[i]] } else { 0.0 };
                v += cb * t[i][j];
            }
            t[m][j] = v;
        }
        self.run_simplex(&mut t, &mut basis, n, false)?;

        let mut x = vec![0.0; n];
        for i in 0..m {
            if basis[i] < n {
                x[basis[i]] = t[i][width - 1];
            } else if t[i][width - 1] > 1e-7 {
                return Err(SteerError::Solver(
                    "artificial variable stuck at positive level".into(),
                ));
            }
        }
        // Duals read off the artificial columns: y_i = (objective row under
        // artificial i), since those columns started as the identity.
        let mut duals = vec![0.0; m];
        for i in 0..m {
            let sign = if self.rhs[i] < 0.0 { -1.0 } else { 1.0 };
            duals[i] = sign * t[m][n + i];
        }
        let mut objective = 0.0;
        for j in 0..n {
            objective += self.costs[j] * x[j];
        }
        Ok(LpSolution { objective, x, duals, basis, infeasibility: 0.0, feasible: true })
    }

    fn run_simplex(
        &self,
        t: &mut [Vec<f64>],
        basis: &mut [usize],
        n: usize,
        phase1: bool,
    ) -> Result<()> {
        let m = self.rows;
        let width = t[0].len();
        let allowed = if phase1 { n + m } else { n };
        let max_iters = 50_000 + 200 * (n + m);
        for _ in 0..max_iters {
            // Bland: first improving column.
            let mut enter = None;
            for j in 0..allowed {
                if !phase1 && j >= n {
                    break;
                }
                if t[m][j] < -EPS {
                    enter = Some(j);
                    break;
                }
            }
            let Some(enter) = enter else { return Ok(()) };

            // Ratio test, Bland ties by smallest basis index.
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            for i in 0..m {
                if t[i][enter] > PIVOT_EPS {
                    let ratio = t[i][width - 1] / t[i][enter];
                    if ratio < best - 1e-12
                        || (ratio < best + 1e-12
                            && leave.map_or(true, |l| basis[i] < basis[l]))
                    {
                        best = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(leave) = leave else {
                return Err(SteerError::Solver("LP is unbounded".into()));
            };

            // Pivot.
            let piv = t[leave][enter];
            for j in 0..width {
                t[leave][j] /= piv;
            }
            for i in 0..=m {
                if i != leave {
                    let factor = t[i][enter];
                    if factor != 0.0 {
                        for j in 0..width {
                            t[i][j] -= factor * t[leave][j];
                        }
                    }
                }
            }
            basis[leave] = enter;
        }
        Err(SteerError::Solver("simplex iteration limit exceeded".into()))
    }
}

/// A column proposed by a pricing callback.
pub struct PricedColumn {
    pub col: Vec<f64>,
    pub cost: f64,
    /// Caller-defined tag identifying the generating object (grid index,
    /// strategy encoding, ...).
    pub tag: u64,
}

/// Column-generation driver.
///
/// `pricer(duals)` must return a column with positive reduced cost
/// `cost − duals·col` if one exists (the best one, ideally), or `None` when
/// the master solution is optimal over the full column universe. Tags keep
/// duplicate columns out of the master.
pub fn column_generation<P>(
    master: &mut DenseLp,
    tags: &mut Vec<u64>,
    mut pricer: P,
    max_rounds: usize,
) -> Result<LpSolution>
where
    P: FnMut(&[f64]) -> Option<PricedColumn>,
{
    let mut solution = master.solve()?;
    for _ in 0..max_rounds {
        if !solution.feasible {
            return Ok(solution);
        }
        let Some(cand) = pricer(&solution.duals) else {
            return Ok(solution);
        };
        let reduced = cand.cost
            - cand
                .col
                .iter()
                .zip(&solution.duals)
                .map(|(a, y)| a * y)
                .sum::<f64>();
        if reduced <= 1e-10 || tags.contains(&cand.tag) {
            return Ok(solution);
        }
        master.push_column(cand.col, cand.cost);
        tags.push(cand.tag);
        solution = master.solve()?;
    }
    Err(SteerError::Solver(format!(
        "column generation did not converge in {max_rounds} rounds"
    )))
}
