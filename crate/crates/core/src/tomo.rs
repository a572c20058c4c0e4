//! Two-qubit state reconstruction from coincidence counts and Monte Carlo
//! uncertainty propagation.
//!
//! The measurement design is the 36-projector set built from the three
//! Pauli axes on each side (3 × 3 axis pairs × 4 outcome combinations).
//! Reconstruction is linear inversion of the Pauli correlators followed by
//! projection onto the physical cone: the projected matrix is the *closest*
//! unit-trace positive matrix in Frobenius norm (eigenvalue simplex
//! projection), so the repair never moves further than necessary.

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteerError};
use crate::expsim::{sub_seed, CountTable};
use crate::qstate::{bloch_reassemble, BlochForm, DensityMatrix4, C64};

/// Tolerance for recognizing the three Cartesian axes in a count table.
const AXIS_TOL: f64 = 1e-9;

fn require_cartesian(settings: &[[f64; 3]], side: &str) -> Result<()> {
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    if settings.len() != 3 {
        return Err(SteerError::InsufficientData(format!(
            "tomography needs the 3 Pauli axes on {side}, got {} settings",
            settings.len()
        )));
    }
    for (k, s) in settings.iter().enumerate() {
        let v = Vector3::new(s[0], s[1], s[2]);
        if (v - axes[k]).norm() > AXIS_TOL {
            return Err(SteerError::Validation(format!(
                "tomography setting {k} on {side} is {s:?}, expected the {:?} axis",
                ["x", "y", "z"][k]
            )));
        }
    }
    Ok(())
}

/// Validated tomography input: a count table over the 36 projector pairs.
#[derive(Debug, Clone)]
pub struct TomoInput {
    table: CountTable,
}

impl TomoInput {
    pub fn new(table: CountTable) -> Result<Self> {
        require_cartesian(&table.settings_a, "Alice's side")?;
        require_cartesian(&table.settings_b, "Bob's side")?;
        if table.coincidences.len() != 9 {
            return Err(SteerError::InsufficientData(format!(
                "tomography needs 9 setting pairs (36 projector pairs), got {}",
                table.coincidences.len()
            )));
        }
        for i in 0..3 {
            for j in 0..3 {
                let total: u64 = table.pair(i, j).iter().sum();
                if total == 0 {
                    return Err(SteerError::InsufficientData(format!(
                        "setting pair ({i},{j}) has no counts"
                    )));
                }
            }
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &CountTable {
        &self.table
    }
}

/// Project a Hermitian matrix onto the unit-trace positive cone in
/// Frobenius norm: eigendecompose and project the spectrum onto the
/// probability simplex.
pub fn project_physical(m: &Matrix4<C64>) -> Result<DensityMatrix4> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut se = SymmetricEigen::new(herm);
    let mut sorted: Vec<f64> = se.eigenvalues.iter().cloned().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // Largest k with λ_(k) − (Σ_{i≤k} λ_(i) − 1)/k > 0 fixes the shift.
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, lam) in sorted.iter().enumerate() {
        cumsum += lam;
        let cand = (cumsum - 1.0) / (k + 1) as f64;
        if lam - cand > 0.0 {
            theta = cand;
        }
    }
    for ev in se.eigenvalues.iter_mut() {
        *ev = (*ev - theta).max(0.0);
    }
    DensityMatrix4::new(se.recompose())
}

/// Linear-inversion estimates of the local Bloch vectors and correlation
/// matrix from the count table's conditional frequencies.
fn invert_correlators(input: &TomoInput) -> BlochForm {
    let table = input.table();
    let mut t = Matrix3::zeros();
    let mut a_num = Vector3::<f64>::zeros();
    let mut a_den = Vector3::<f64>::zeros();
    let mut b_num = Vector3::<f64>::zeros();
    let mut b_den = Vector3::<f64>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let cells = table.pair(i, j);
            let n = cells.iter().sum::<u64>() as f64;
            let same = (cells[0] + cells[3]) as f64;
            let diff = (cells[1] + cells[2]) as f64;
            t[(i, j)] = (same - diff) / n;
            let a_marg = (cells[0] + cells[1]) as f64 - (cells[2] + cells[3]) as f64;
            let b_marg = (cells[0] + cells[2]) as f64 - (cells[1] + cells[3]) as f64;
            a_num[i] += a_marg;
            a_den[i] += n;
            b_num[j] += b_marg;
            b_den[j] += n;
        }
    }
    let a = Vector3::new(a_num[0] / a_den[0], a_num[1] / a_den[1], a_num[2] / a_den[2]);
    let b = Vector3::new(b_num[0] / b_den[0], b_num[1] / b_den[1], b_num[2] / b_den[2]);
    BlochForm {
        a,
        b,
        t,
        canonical: false,
        rot_a: Matrix3::identity(),
        rot_b: Matrix3::identity(),
    }
}

/// Reconstruct a physical state from a 36-pair count table.
pub fn reconstruct(input: &TomoInput) -> Result<DensityMatrix4> {
    let bf = invert_correlators(input);
    // Assemble without validation (linear inversion may be unphysical),
    // then project.
    match bloch_reassemble(&bf) {
        Ok(rho) => Ok(rho),
        Err(_) => {
            let p = crate::qstate::pauli();
            let id = nalgebra::Matrix2::identity();
            let mut m = Matrix4::identity();
            for i in 0..3 {
                m += crate::qstate::kron2(&p[i], &id) * C64::new(bf.a[i], 0.0);
                m += crate::qstate::kron2(&id, &p[i]) * C64::new(bf.b[i], 0.0);
                for j in 0..3 {
                    m += crate::qstate::kron2(&p[i], &p[j]) * C64::new(bf.t[(i, j)], 0.0);
                }
            }
            project_physical(&(m * C64::new(0.25, 0.0)))
        }
    }
}

/// Summary of a Monte Carlo uncertainty run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McSummary {
    pub estimator: String,
    pub mean: f64,
    pub sd: f64,
    pub n_samples: usize,
    pub n_failed: usize,
    pub seed: u64,
}

/// Default number of Monte Carlo resamples.
pub const MC_DEFAULT_SAMPLES: usize = 200;

/// Parametric bootstrap: resample every coincidence count as Poisson with
/// mean equal to the observed count, re-run reconstruction plus the
/// estimator, and summarize.
///
/// Samples are embarrassingly parallel with per-sample sub-seeds;
/// aggregation is index-ordered and compensated, so the summary does not
/// depend on thread scheduling. Individual estimator failures are recorded;
/// more than 5% failures aborts with a diagnostic.
pub fn mc_uncertainty<F>(
    input: &TomoInput,
    estimator_name: &str,
    estimator: F,
    n_samples: usize,
    seed: u64,
) -> Result<McSummary>
where
    F: Fn(&DensityMatrix4) -> Result<f64> + Sync,
{
    if n_samples < 2 {
        return Err(SteerError::Domain(format!(
            "n_samples must be at least 2, got {n_samples}"
        )));
    }
    let base = input.table();
    let outcomes: Vec<Option<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(sub_seed(
                seed,
                &[0x3C5A, s as u64],
            ));
            let mut table = base.clone();
            for cells in table.coincidences.iter_mut() {
                for c in cells.iter_mut() {
                    *c = resample_poisson(&mut rng, *c);
                }
            }
            let input = TomoInput::new(table).ok()?;
            let rho = reconstruct(&input).ok()?;
            estimator(&rho).ok()
        })
        .collect();

    let n_failed = outcomes.iter().filter(|o| o.is_none()).count();
    if (n_failed as f64) > 0.05 * n_samples as f64 {
        return Err(SteerError::Solver(format!(
            "{n_failed}/{n_samples} Monte Carlo samples failed for estimator {estimator_name}"
        )));
    }
    // Compensated, index-ordered accumulation.
    let values: Vec<f64> = outcomes.into_iter().flatten().collect();
    let mean = kahan_sum(values.iter().cloned()) / values.len() as f64;
    let ss = kahan_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let sd = (ss / (values.len() - 1) as f64).sqrt();
    Ok(McSummary {
        estimator: estimator_name.to_string(),
        mean,
        sd,
        n_samples,
        n_failed,
        seed,
    })
}

use rand::SeedableRng;

fn resample_poisson(rng: &mut rand_chacha::ChaCha12Rng, observed: u64) -> u64 {
    if observed == 0 {
        return 0;
    }
    use rand_distr::{Distribution, Poisson};
    let p = Poisson::new(observed as f64).expect("positive mean");
    let x: f64 = p.sample(rng);
    x.max(0.0) as u64
}

fn kahan_sum<I: Iterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}
