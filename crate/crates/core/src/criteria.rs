//! Sufficient nonsteerability conditions and the one-way verdict.
//!
//! The central object is the sphere maximum
//!
//! ```text
//! N = max_{x̂} (1 − cε)|v·x̂| + (cε/2)(1 + (v·x̂)²) + ‖Tx̂‖
//! ```
//!
//! with `v` the steering party's Bloch vector in the canonical frame and
//! `T` the canonical correlation matrix. `c = 1` gives the condition for
//! restricted projective measurements; `c = 3` gives the condition valid
//! for arbitrary POVMs (derived by mixing in vacuum noise, see
//! [`povm_noise_construct`]). `N ≤ 1` certifies that the lossy state cannot
//! be steered by the designated party.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteerError};
use crate::qstate::{BlochForm, Party, TwoPartyState, C64};
use crate::sphere;

/// Which sufficient condition was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionVariant {
    RestrictedPVM,
    POVM,
}

/// Result of evaluating a nonsteerability criterion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonsteerReport {
    /// Left-hand side of the criterion; the state is certified nonsteerable
    /// (for the variant's measurement class) iff `n_value ≤ 1`.
    pub n_value: f64,
    /// Unit vector achieving the maximum.
    pub argmax_x: [f64; 3],
    /// Heralding efficiency the criterion was evaluated at.
    pub epsilon: f64,
    pub variant: CriterionVariant,
    /// Steering party the condition refers to.
    pub party: Party,
    /// `(1 − n_value) / ΔN` when an uncertainty has been attached.
    pub margin_sd: Option<f64>,
}

impl NonsteerReport {
    pub fn satisfied(&self) -> bool {
        self.n_value <= 1.0
    }

    /// Attach a Monte Carlo uncertainty, filling in the margin in standard
    /// deviations.
    pub fn with_uncertainty(mut self, delta_n: f64) -> Result<Self> {
        if !(delta_n > 0.0) {
            return Err(SteerError::Domain(format!(
                "delta_n must be positive, got {delta_n}"
            )));
        }
        self.margin_sd = Some((1.0 - self.n_value) / delta_n);
        Ok(self)
    }
}

/// Criterion objective at a fixed direction. `c_eps` is `ε` for the
/// restricted-PVM form and `3ε` for the POVM form.
pub(crate) fn objective(v: &Vector3<f64>, t: &Matrix3<f64>, c_eps: f64, x: &Vector3<f64>) -> f64 {
    let p = v.dot(x);
    (1.0 - c_eps) * p.abs() + 0.5 * c_eps * (1.0 + p * p) + (t * x).norm()
}

/// Maximize the criterion objective over the unit sphere.
///
/// Coarse golden-angle grid, projected-ascent refinement of the best grid
/// candidates, plus closed-form candidates for the two places ascent cannot
/// certify: the great circle `v·x̂ = 0` (the `|v·x̂|` kink) and the singular
/// directions of `T`.
fn maximize_objective(v: &Vector3<f64>, t: &Matrix3<f64>, c_eps: f64) -> (Vector3<f64>, f64) {
    const GRID: usize = 8192;
    const TOP: usize = 32;
    let f = |x: &Vector3<f64>| objective(v, t, c_eps, x);

    let grid = sphere::fibonacci_sphere(GRID);
    let values: Vec<f64> = grid.iter().map(&f).collect();
    let mut best: (Vector3<f64>, f64) = (Vector3::z(), f64::NEG_INFINITY);
    let mut consider = |x: Vector3<f64>, val: f64| {
        if val > best.1 {
            best = (x, val);
        }
    };

    for idx in sphere::top_k_indices(&values, TOP) {
        let (x, val) = sphere::refine_ascent(&f, grid[idx], 300);
        consider(x, val);
    }

    // Singular directions of T are stationary for the ‖Tx̂‖ term; together
    // with ±v̂ they cover the aligned extremes exactly.
    let svd = t.svd(false, true);
    if let Some(vt) = svd.v_t {
        for k in 0..3 {
            let x: Vector3<f64> = vt.row(k).transpose();
            let n = x.norm();
            if n > 0.5 {
                let x = x / n;
                consider(x, f(&x));
            }
        }
    }
    let vn = v.norm();
    if vn > 1e-14 {
        let vhat = v / vn;
        consider(vhat, f(&vhat));

        // On the great circle v·x̂ = 0 the objective is cε/2 + ‖Tx̂‖, whose
        // maximum is the top eigenvalue of a 2×2 quadratic form.
        let helper = if vhat.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        let e1 = vhat.cross(&helper).normalize();
        let e2 = vhat.cross(&e1).normalize();
        let (t1, t2) = (t * e1, t * e2);
        let (alpha, beta, gamma) = (t1.dot(&t1), t2.dot(&t2), t1.dot(&t2));
        let half_tr = 0.5 * (alpha + beta);
        let disc = (0.25 * (alpha - beta).powi(2) + gamma * gamma).max(0.0).sqrt();
        let lam = half_tr + disc;
        let theta = 0.5 * (2.0 * gamma).atan2(alpha - beta);
        let xc = e1 * theta.cos() + e2 * theta.sin();
        consider(xc, 0.5 * c_eps + lam.max(0.0).sqrt());
        // Polish in case the true maximum sits just off the circle.
        let (xr, fr) = sphere::refine_ascent(&f, xc, 300);
        consider(xr, fr);
    }

    best
}

fn check_canonical(bf: &BlochForm) -> Result<()> {
    if !bf.is_canonical() {
        return Err(SteerError::Contract(
            "criterion requires a canonical Bloch form (diagonal correlation matrix)".into(),
        ));
    }
    Ok(())
}

/// Sufficient condition for nonsteerability with restricted projective
/// measurements: `max_x̂ (1−ε)|v·x̂| + (ε/2)(1+(v·x̂)²) + ‖Tx̂‖ ≤ 1`,
/// where `v` is the steering party's canonical-frame Bloch vector.
pub fn n_restricted_pvm(bf: &BlochForm, epsilon: f64, party: Party) -> Result<NonsteerReport> {
    check_canonical(bf)?;
    if !(0.0..=1.0).contains(&epsilon) || !epsilon.is_finite() {
        return Err(SteerError::Domain(format!(
            "epsilon must lie in [0,1], got {epsilon}"
        )));
    }
    let v = bf.steering_vector(party);
    let (x, val) = maximize_objective(&v, &bf.t, epsilon);
    Ok(NonsteerReport {
        n_value: val,
        argmax_x: [x.x, x.y, x.z],
        epsilon,
        variant: CriterionVariant::RestrictedPVM,
        party,
        margin_sd: None,
    })
}

/// Sufficient condition for nonsteerability with arbitrary POVMs:
/// `max_x̂ (1−3ε)|v·x̂| + (3ε/2)(1+(v·x̂)²) + ‖Tx̂‖ ≤ 1`.
///
/// The derivation trades a factor of 3 in efficiency for full measurement
/// generality, so it is only valid for `ε ≤ 1/3`; larger values are
/// refused rather than silently evaluated.
pub fn n_povm(bf: &BlochForm, epsilon: f64, party: Party) -> Result<NonsteerReport> {
    check_canonical(bf)?;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(SteerError::Domain(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    if epsilon > 1.0 / 3.0 {
        return Err(SteerError::OutOfRegime(format!(
            "the POVM condition is derived for epsilon <= 1/3; got {epsilon}"
        )));
    }
    let v = bf.steering_vector(party);
    let (x, val) = maximize_objective(&v, &bf.t, 3.0 * epsilon);
    Ok(NonsteerReport {
        n_value: val,
        argmax_x: [x.x, x.y, x.z],
        epsilon,
        variant: CriterionVariant::POVM,
        party,
        margin_sd: None,
    })
}

/// The noise construction `ρ̃ = (1/d) ρ + ((d−1)/d) σ_A ⊗ ρ_B`.
///
/// If `ρ` is nonsteerable for two-outcome measurements with a rank-1
/// projection component, `ρ̃` is nonsteerable for arbitrary POVMs; this is
/// the mixing step that turns the restricted-PVM condition into the POVM
/// one. `d` must equal the dimension of Alice's space in `rho`.
pub fn povm_noise_construct(
    rho: &TwoPartyState,
    sigma_a: &DMatrix<C64>,
    d: usize,
) -> Result<TwoPartyState> {
    if d < 2 {
        return Err(SteerError::Domain(format!("d must be at least 2, got {d}")));
    }
    if d != rho.dim_a {
        return Err(SteerError::Domain(format!(
            "d = {d} does not match Alice's dimension {}",
            rho.dim_a
        )));
    }
    if sigma_a.nrows() != d || sigma_a.ncols() != d {
        return Err(SteerError::Validation(format!(
            "sigma_a is {}x{}, expected {d}x{d}",
            sigma_a.nrows(),
            sigma_a.ncols()
        )));
    }
    let tr = sigma_a.diagonal().sum();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(SteerError::Validation(format!(
            "sigma_a has trace {tr}, expected 1"
        )));
    }
    let rho_b = rho.reduce_bob();
    let db = rho.dim_b;
    let mut noise = DMatrix::zeros(d * db, d * db);
    for i in 0..d {
        for j in 0..d {
            for k in 0..db {
                for l in 0..db {
                    noise[(i * db + k, j * db + l)] = sigma_a[(i, j)] * rho_b[(k, l)];
                }
            }
        }
    }
    let w = 1.0 / d as f64;
    let mat = &rho.mat * C64::new(w, 0.0) + noise * C64::new(1.0 - w, 0.0);
    TwoPartyState::new(d, db, mat)
}

/// One `(v·x̂, ‖Tx̂‖)` sample of the criterion ensemble.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnsemblePoint {
    pub b_dot_x: f64,
    pub t_norm: f64,
    pub is_argmax: bool,
}

/// Ensemble of criterion coordinates over a direction sample, for plotting
/// against the bound curve `(1−3ε)|p| + (3ε/2)(1+p²) + q = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleData {
    /// Exactly `n_dirs` sample points; the one attaining the largest
    /// objective value within the sample carries the `is_argmax` flag.
    pub points: Vec<EnsemblePoint>,
    /// Coordinates of the true sphere maximizer (generally off-grid).
    pub argmax: (f64, f64),
    pub n_value: f64,
    pub epsilon: f64,
}

/// Sample `(v·x̂, ‖Tx̂‖)` over `n_dirs` golden-angle directions.
pub fn ensemble_points(
    bf: &BlochForm,
    epsilon: f64,
    n_dirs: usize,
    party: Party,
) -> Result<EnsembleData> {
    check_canonical(bf)?;
    if n_dirs < 1 {
        return Err(SteerError::Domain("n_dirs must be at least 1".into()));
    }
    let report = n_povm(bf, epsilon, party)?;
    let v = bf.steering_vector(party);
    let c_eps = 3.0 * epsilon;
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut points: Vec<EnsemblePoint> = sphere::fibonacci_sphere(n_dirs)
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let val = objective(&v, &bf.t, c_eps, x);
            if val > best.1 {
                best = (i, val);
            }
            EnsemblePoint {
                b_dot_x: v.dot(x),
                t_norm: (bf.t * x).norm(),
                is_argmax: false,
            }
        })
        .collect();
    points[best.0].is_argmax = true;
    let xstar = Vector3::new(report.argmax_x[0], report.argmax_x[1], report.argmax_x[2]);
    Ok(EnsembleData {
        points,
        argmax: (v.dot(&xstar), (bf.t * xstar).norm()),
        n_value: report.n_value,
        epsilon,
    })
}

/// Serialize ensemble points as CSV with header `b_dot_x,t_norm,is_argmax`.
pub fn ensemble_to_csv(data: &EnsembleData) -> String {
    let mut out = String::from("b_dot_x,t_norm,is_argmax\n");
    for p in &data.points {
        out.push_str(&format!("{},{},{}\n", p.b_dot_x, p.t_norm, p.is_argmax));
    }
    out
}

/// Steering-side numbers entering the one-way verdict.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SteeringOutcome {
    /// Measured steering parameter.
    pub s: f64,
    /// Cheating bound at the steering party's heralding efficiency.
    pub bound: f64,
    /// One-standard-deviation uncertainty of `s`.
    pub delta_s: f64,
    /// `(s − bound) / delta_s`, filled by [`one_way_verdict`].
    pub sd_margin: f64,
}

/// Combined verdict: steering demonstrated one way, nonsteerability
/// certified the other way, both by at least `sd_threshold` standard
/// deviations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OneWayVerdict {
    pub steer_ab: SteeringOutcome,
    pub nonsteer_ba: NonsteerReport,
    pub delta_n: f64,
    pub conclusive: bool,
    pub sd_threshold: f64,
}

/// Combine a steering-test result with a nonsteerability report.
pub fn one_way_verdict(
    steer: SteeringOutcome,
    nonsteer: &NonsteerReport,
    delta_n: f64,
    sd_threshold: f64,
) -> Result<OneWayVerdict> {
    if !(steer.delta_s > 0.0) {
        return Err(SteerError::Domain(format!(
            "delta_s must be positive, got {}",
            steer.delta_s
        )));
    }
    if !(delta_n > 0.0) {
        return Err(SteerError::Domain(format!(
            "delta_n must be positive, got {delta_n}"
        )));
    }
    let steer_margin = (steer.s - steer.bound) / steer.delta_s;
    let nonsteer = nonsteer.clone().with_uncertainty(delta_n)?;
    let nonsteer_margin = nonsteer.margin_sd.expect("uncertainty attached above");
    Ok(OneWayVerdict {
        steer_ab: SteeringOutcome { sd_margin: steer_margin, ..steer },
        nonsteer_ba: nonsteer,
        delta_n,
        conclusive: steer_margin >= sd_threshold && nonsteer_margin >= sd_threshold,
        sd_threshold,
    })
}
