//! The n-setting steering test: measurement presets, the steering
//! parameter, the detection-efficiency-dependent cheating bound, and a
//! hidden-state-model feasibility check.
//!
//! In the test, the untrusted party announces an outcome `a_k ∈ {±1}` for
//! each round where the trusted party measured along `u_k`; the steering
//! parameter is the average of the announced-outcome/trusted-outcome
//! correlators over the `n` settings. A dishonest announcer holding only a
//! local hidden state can reach a ceiling that depends on how often she
//! must answer (her heralding efficiency), and that ceiling is computed
//! here as a linear program over mixtures of pure cheating strategies.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteerError};
use crate::lp::{column_generation, DenseLp, PricedColumn};
use crate::qstate::BlochForm;
use crate::sphere;

/// A set of measurement directions on the Bloch sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    dirs: Vec<Vector3<f64>>,
}

impl MeasurementSet {
    /// Validate unit norm and pairwise non-collinearity.
    pub fn new(dirs: Vec<Vector3<f64>>) -> Result<Self> {
        if dirs.is_empty() {
            return Err(SteerError::Domain("measurement set must be nonempty".into()));
        }
        for (k, u) in dirs.iter().enumerate() {
            if (u.norm() - 1.0).abs() > 1e-12 {
                return Err(SteerError::Validation(format!(
                    "direction {k} has norm {}, expected 1",
                    u.norm()
                )));
            }
        }
        for i in 0..dirs.len() {
            for j in (i + 1)..dirs.len() {
                if dirs[i].dot(&dirs[j]).abs() >= 1.0 - 1e-9 {
                    return Err(SteerError::Validation(format!(
                        "directions {i} and {j} are collinear"
                    )));
                }
            }
        }
        Ok(Self { dirs })
    }

    pub fn dirs(&self) -> &[Vector3<f64>] {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// JSON as an array of 3-vectors.
    pub fn to_json(&self) -> String {
        let raw: Vec<[f64; 3]> = self.dirs.iter().map(|u| [u.x, u.y, u.z]).collect();
        serde_json::to_string_pretty(&raw).expect("vector serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<[f64; 3]> = serde_json::from_str(text)?;
        Self::new(raw.into_iter().map(Vector3::from).collect())
    }
}

/// Axis sets through opposite vertices of platonic solids.
///
/// `n = 6` (icosahedron) is the primary scheme; 2, 3 (octahedron),
/// 4 (cube) and 10 (dodecahedron) are the companion presets.
pub fn platonic_settings(n: usize) -> Result<MeasurementSet> {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let dirs: Vec<Vector3<f64>> = match n {
        2 => vec![Vector3::x(), Vector3::z()],
        3 => vec![Vector3::x(), Vector3::y(), Vector3::z()],
        4 => vec![
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(1.0, 1.0, -1.0),
            Vector3::new(1.0, -1.0, 1.0),
            Vector3::new(-1.0, 1.0, 1.0),
        ],
        6 => vec![
            Vector3::new(0.0, 1.0, phi),
            Vector3::new(0.0, 1.0, -phi),
            Vector3::new(1.0, phi, 0.0),
            Vector3::new(1.0, -phi, 0.0),
            Vector3::new(phi, 0.0, 1.0),
            Vector3::new(-phi, 0.0, 1.0),
        ],
        10 => vec![
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(1.0, 1.0, -1.0),
            Vector3::new(1.0, -1.0, 1.0),
            Vector3::new(-1.0, 1.0, 1.0),
            Vector3::new(0.0, 1.0 / phi, phi),
            Vector3::new(0.0, 1.0 / phi, -phi),
            Vector3::new(1.0 / phi, phi, 0.0),
            Vector3::new(1.0 / phi, -phi, 0.0),
            Vector3::new(phi, 0.0, 1.0 / phi),
            Vector3::new(phi, 0.0, -1.0 / phi),
        ],
        _ => {
            return Err(SteerError::Domain(format!(
                "unsupported setting count {n}; presets exist for n in {{2, 3, 4, 6, 10}}"
            )))
        }
    };
    MeasurementSet::new(dirs.into_iter().map(|u| u.normalize()).collect())
}

/// Announced-outcome/trusted-outcome coincidence counts per setting.
///
/// Cell order per setting: `(a, b)` = `(+,+), (+,−), (−,+), (−,−)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringData {
    pub counts: Vec<[u64; 4]>,
}

pub(crate) fn cell_index(a: i8, b: i8) -> usize {
    let ai = if a > 0 { 0 } else { 1 };
    let bi = if b > 0 { 0 } else { 1 };
    2 * ai + bi
}

impl SteeringData {
    pub fn n_settings(&self) -> usize {
        self.counts.len()
    }

    /// Conditional correlator `⟨a_k σ_k⟩` for one setting.
    pub fn correlator(&self, k: usize) -> Result<f64> {
        let c = self.counts[k];
        let total: u64 = c.iter().sum();
        if total == 0 {
            return Err(SteerError::InsufficientData(format!(
                "setting {k} has no coincidence counts"
            )));
        }
        let same = c[0] + c[3];
        let diff = c[1] + c[2];
        Ok((same as f64 - diff as f64) / total as f64)
    }

    /// CSV with header `setting,a,b,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,a,b,count\n");
        for (k, cells) in self.counts.iter().enumerate() {
            for (a, b, idx) in [(1, 1, 0), (1, -1, 1), (-1, 1, 2), (-1, -1, 3)] {
                out.push_str(&format!("{k},{a},{b},{}\n", cells[idx]));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        {
            let headers = rdr.headers()?;
            let expect = ["setting", "a", "b", "count"];
            if headers.iter().map(str::trim).ne(expect.iter().copied()) {
                return Err(SteerError::Validation(format!(
                    "steering CSV header must be `setting,a,b,count`, got {headers:?}"
                )));
            }
        }
        let mut counts: Vec<[u64; 4]> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let parse = |i: usize| -> Result<i64> {
                record
                    .get(i)
                    .ok_or_else(|| SteerError::Validation("short CSV record".into()))?
                    .trim()
                    .parse()
                    .map_err(|e| SteerError::Validation(format!("bad CSV field: {e}")))
            };
            let k = parse(0)? as usize;
            let a = parse(1)?;
            let b = parse(2)?;
            let count = parse(3)?;
            if !(a == 1 || a == -1) || !(b == 1 || b == -1) {
                return Err(SteerError::Validation(format!(
                    "outcomes must be ±1, got a={a}, b={b}"
                )));
            }
            if count < 0 {
                return Err(SteerError::Validation(format!("negative count {count}")));
            }
            if k >= counts.len() {
                counts.resize(k + 1, [0; 4]);
            }
            counts[k][cell_index(a as i8, b as i8)] += count as u64;
        }
        if counts.is_empty() {
            return Err(SteerError::InsufficientData("steering CSV has no rows".into()));
        }
        Ok(Self { counts })
    }
}

/// Steering parameter `S = (1/n) Σ_k ⟨a_k σ_k⟩` with its statistical
/// uncertainty from per-setting binomial errors combined in quadrature.
pub fn steering_parameter(data: &SteeringData) -> Result<(f64, f64)> {
    let n = data.n_settings();
    if n == 0 {
        return Err(SteerError::InsufficientData("no settings in steering data".into()));
    }
    let mut s = 0.0;
    let mut var = 0.0;
    for k in 0..n {
        let e = data.correlator(k)?;
        let total: u64 = data.counts[k].iter().sum();
        s += e;
        // Var(Ê) = (1 − Ê²)/N for a ±1-valued empirical mean.
        var += (1.0 - e * e) / total as f64;
    }
    let nf = n as f64;
    Ok((s / nf, var.sqrt() / nf))
}

/// One pure cheating strategy in the bound's optimal mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PureStrategy {
    /// Hidden-state Bloch direction sent to the trusted party.
    pub dir: [f64; 3],
    /// Settings the announcer answers on (bitmask over `0..n`).
    pub answered: u32,
    pub weight: f64,
}

/// The cheating bound together with the mixture achieving it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundResult {
    pub bound: f64,
    pub epsilon_a: f64,
    pub support: Vec<PureStrategy>,
}

const BOUND_GRID: usize = 20_000;

/// Maximum steering parameter reachable by an announcer who holds only
/// local hidden states and must answer each setting with probability
/// exactly `epsilon_a`.
///
/// A pure strategy is a hidden Bloch direction `r̂` plus an answer subset
/// `A`; on answered settings the announcer declares `sign(u_k·r̂)`, giving
/// conditional correlator `|u_k·r̂|`. The optimal mixture is found by
/// column generation over (direction grid × subsets) with local refinement
/// of candidate directions; the per-setting constraint makes the bound
/// conservative (an average-efficiency cheat is weaker). Accuracy target
/// 1e-4 on the value.
pub fn steering_bound(settings: &MeasurementSet, epsilon_a: f64) -> Result<BoundResult> {
    if !(epsilon_a > 0.0 && epsilon_a <= 1.0) {
        return Err(SteerError::Domain(format!(
            "epsilon_a must lie in (0, 1], got {epsilon_a}"
        )));
    }
    let n = settings.len();
    let us = settings.dirs().to_vec();
    let scale = 1.0 / (n as f64 * epsilon_a);

    // Candidate hidden directions: the setting axes first (so dedicated
    // single-setting strategies are exactly representable), then the grid.
    let mut pool: Vec<Vector3<f64>> = us.clone();
    pool.extend(sphere::fibonacci_sphere(BOUND_GRID));

    let strat_cost = |pool: &[Vector3<f64>], idx: usize, mask: u32| -> f64 {
        (0..n)
            .filter(|k| mask & (1 << k) != 0)
            .map(|k| us[k].dot(&pool[idx]).abs() * scale)
            .sum()
    };
    let strat_col = |mask: u32| -> Vec<f64> {
        let mut col = vec![0.0; n + 1];
        col[0] = 1.0;
        for k in 0..n {
            if mask & (1 << k) != 0 {
                col[k + 1] = 1.0;
            }
        }
        col
    };
    let tag_of = |pool_idx: usize, mask: u32| -> u64 { ((pool_idx as u64) << 32) | mask as u64 };

    // Rows: [0] total weight = 1; [1..=n] per-setting answer probability.
    let mut rhs = vec![epsilon_a; n + 1];
    rhs[0] = 1.0;
    let mut master = DenseLp::new(rhs);
    let mut tags: Vec<u64> = Vec::new();
    // Master column j ↦ generating strategy (pool index, answer mask).
    let mut strategies: Vec<(usize, u32)> = Vec::new();
    let full: u32 = (1u32 << n) - 1;
    {
        let mut add = |idx: usize, mask: u32| {
            let tag = tag_of(idx, mask);
            if !tags.contains(&tag) {
                master.push_column(strat_col(mask), strat_cost(&pool, idx, mask));
                tags.push(tag);
                strategies.push((idx, mask));
            }
        };
        // Feasible start: declining everything plus answering everything.
        add(0, 0);
        for k in 0..n {
            add(k, 1 << k);
            add(k, full);
        }
    }

    // Pricing: for fixed r̂ the best subset answers exactly the settings
    // with positive per-setting gain c_k(r̂) − y_k.
    let gain = |r: &Vector3<f64>, duals: &[f64]| -> (f64, u32) {
        let mut total = 0.0;
        let mut mask = 0u32;
        for (k, u) in us.iter().enumerate() {
            let g = u.dot(r).abs() * scale - duals[k + 1];
            if g > 0.0 {
                total += g;
                mask |= 1 << k;
            }
        }
        (total, mask)
    };

    let pool_cell = sphere::fibonacci_cell_radius(BOUND_GRID);
    let solution = column_generation(
        &mut master,
        &mut tags,
        |duals| {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (i, r) in pool.iter().enumerate() {
                let (g, _) = gain(r, duals);
                if g > best.1 {
                    best = (i, g);
                }
            }
            // Local polish of the best direction; the gain has |·| kinks,
            // so use compass search rather than gradients.
            let fgain = |r: &Vector3<f64>| gain(r, duals).0;
            let (refined, refined_gain) =
                sphere::pattern_search(&fgain, pool[best.0], pool_cell, 1e-9);
            let (idx, g) = if refined_gain > best.1 + 1e-13 {
                pool.push(refined);
                (pool.len() - 1, refined_gain)
            } else {
                best
            };
            if g - duals[0] <= 1e-10 {
                return None;
            }
            let (_, mask) = gain(&pool[idx], duals);
            strategies.push((idx, mask));
            Some(PricedColumn {
                col: strat_col(mask),
                cost: strat_cost(&pool, idx, mask),
                tag: tag_of(idx, mask),
            })
        },
        2_000,
    )?;
    if !solution.feasible {
        return Err(SteerError::Solver(format!(
            "cheating-bound master infeasible (residual {:.3e})",
            solution.infeasibility
        )));
    }

    let mut support: Vec<PureStrategy> = solution
        .x
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 1e-9)
        .map(|(j, w)| {
            let (idx, mask) = strategies[j];
            let d = pool[idx];
            PureStrategy { dir: [d.x, d.y, d.z], answered: mask, weight: *w }
        })
        .collect();
    support.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap());
    Ok(BoundResult { bound: solution.objective, epsilon_a, support })
}

/// Outcome of the hidden-state feasibility LP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LhsReport {
    /// Whether the assemblage is reproducible from hidden states at this
    /// grid (feasible ⇒ a hidden-state model exists within grid tolerance;
    /// infeasible is *not* a steering proof, the grid is a relaxation).
    pub feasible: bool,
    /// Final L1 residual of the matching constraints.
    pub residual: f64,
    pub grid: usize,
}

const LHS_FEASIBLE_TOL: f64 = 1e-7;

/// Linear-program feasibility of reproducing the exact assemblage that
/// `settings`, measured by the untrusted party, induce on `state`.
///
/// Hidden states are pure Bloch directions from a golden-angle grid of the
/// given size (locally refined during pricing); responses are deterministic
/// outcome assignments. Minimizes the L1 mismatch of the trace and Bloch
/// components of every conditional state.
pub fn lhs_grid_check(
    state: &BlochForm,
    settings: &MeasurementSet,
    grid: usize,
) -> Result<LhsReport> {
    if grid < 100 {
        return Err(SteerError::Domain(format!("grid must be at least 100, got {grid}")));
    }
    let n = settings.len();
    if n > 20 {
        return Err(SteerError::Domain(
            "hidden-state check supports at most 20 settings (2^n responses)".into(),
        ));
    }
    let us = settings.dirs().to_vec();
    let ttrans = state.t.transpose();

    // Assemblage: conditional trace and unnormalized Bloch vector for the
    // (+) outcome of each setting, plus the ensemble totals. With
    // σ_{a|k} = ½(t_{a|k} I + s_{a|k}·σ):  t = (1 + a·𝐚·u_k)/2,
    // s = (b + a·Tᵀu_k)/2; the (−) constraints are implied by the totals.
    let mut rhs = vec![0.0; 4 + 4 * n];
    rhs[0] = 1.0;
    rhs[1] = state.b.x;
    rhs[2] = state.b.y;
    rhs[3] = state.b.z;
    for k in 0..n {
        let t_plus = 0.5 * (1.0 + state.a.dot(&us[k]));
        let s_plus = (state.b + ttrans * us[k]) * 0.5;
        rhs[4 + 4 * k] = t_plus;
        rhs[4 + 4 * k + 1] = s_plus.x;
        rhs[4 + 4 * k + 2] = s_plus.y;
        rhs[4 + 4 * k + 3] = s_plus.z;
    }
    let rows = rhs.len();

    let col_for = |r: &Vector3<f64>, mask: u32| -> Vec<f64> {
        let mut col = vec![0.0; rows];
        col[0] = 1.0;
        col[1] = r.x;
        col[2] = r.y;
        col[3] = r.z;
        for k in 0..n {
            if mask & (1 << k) != 0 {
                col[4 + 4 * k] = 1.0;
                col[4 + 4 * k + 1] = r.x;
                col[4 + 4 * k + 2] = r.y;
                col[4 + 4 * k + 3] = r.z;
            }
        }
        col
    };

    // Master: minimize Σ(p + q) over  Σ w_λ A_λ + p − q = rhs.  Residual
    // variables keep the master feasible from the start; hidden-state
    // columns have zero cost so the optimum is −(L1 residual).
    let mut master = DenseLp::new(rhs.clone());
    let mut tags: Vec<u64> = Vec::new();
    for i in 0..rows {
        let mut p = vec![0.0; rows];
        p[i] = 1.0;
        master.push_column(p, -1.0);
        tags.push(u64::MAX - (2 * i) as u64);
        let mut q = vec![0.0; rows];
        q[i] = -1.0;
        master.push_column(q, -1.0);
        tags.push(u64::MAX - (2 * i + 1) as u64);
    }

    let mut pool: Vec<Vector3<f64>> = sphere::fibonacci_sphere(grid);
    let tag_of = |pool_idx: usize, mask: u32| -> u64 { ((pool_idx as u64) << 32) | mask as u64 };
    // Reduced cost of a zero-cost column is −y·col; separable over settings
    // for fixed r̂: include setting k's (+)-response block iff its dual
    // contribution is negative.
    let score = |r: &Vector3<f64>, duals: &[f64]| -> (f64, u32) {
        let base = duals[0] + duals[1] * r.x + duals[2] * r.y + duals[3] * r.z;
        let mut total = base;
        let mut mask = 0u32;
        for k in 0..n {
            let c = duals[4 + 4 * k]
                + duals[4 + 4 * k + 1] * r.x
                + duals[4 + 4 * k + 2] * r.y
                + duals[4 + 4 * k + 3] * r.z;
            if c < 0.0 {
                total += c;
                mask |= 1 << k;
            }
        }
        (-total, mask)
    };

    let pool_cell = sphere::fibonacci_cell_radius(grid);
    let solution = column_generation(
        &mut master,
        &mut tags,
        |duals| {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (i, r) in pool.iter().enumerate() {
                let (s, _) = score(r, duals);
                if s > best.1 {
                    best = (i, s);
                }
            }
            let fscore = |r: &Vector3<f64>| score(r, duals).0;
            let (refined, refined_score) =
                sphere::pattern_search(&fscore, pool[best.0], pool_cell, 1e-9);
            let (idx, s) = if refined_score > best.1 + 1e-13 {
                pool.push(refined);
                (pool.len() - 1, refined_score)
            } else {
                best
            };
            if s <= 1e-10 {
                return None;
            }
            let (_, mask) = score(&pool[idx], duals);
            Some(PricedColumn {
                col: col_for(&pool[idx], mask),
                cost: 0.0,
                tag: tag_of(idx, mask),
            })
        },
        4_000,
    )?;
    if !solution.feasible {
        return Err(SteerError::Solver(
            "hidden-state master LP unexpectedly infeasible".into(),
        ));
    }
    let residual = (-solution.objective).max(0.0);
    Ok(LhsReport { feasible: residual <= LHS_FEASIBLE_TOL, residual, grid })
}
