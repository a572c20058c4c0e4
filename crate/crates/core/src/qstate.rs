//! Two-qubit state representation and Werner-family utilities.
//!
//! States live on the polarization basis `{HH, HV, VH, VV}` with `H ≡ 0`,
//! `V ≡ 1`. The module provides the Werner family, the Bloch/correlation
//! decomposition and its canonical (diagonal-correlation) frame, Uhlmann
//! fidelity, and the vacuum-extended embedding used to describe a state
//! whose photon reaches one party only with probability `ε`.

use nalgebra::{Complex, DMatrix, Matrix2, Matrix3, Matrix4, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteerError};

pub type C64 = Complex<f64>;

/// Guard string stored in state files; fixes the basis convention on disk.
pub const BASIS_LABEL: &str = "HH,HV,VH,VV";

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// The Pauli matrices σ₁, σ₂, σ₃.
pub fn pauli() -> [Matrix2<C64>; 3] {
    let i = C64::new(0.0, 1.0);
    [
        Matrix2::new(c(0.0), c(1.0), c(1.0), c(0.0)),
        Matrix2::new(c(0.0), -i, i, c(0.0)),
        Matrix2::new(c(1.0), c(0.0), c(0.0), c(-1.0)),
    ]
}

/// Kronecker product of two 2×2 matrices in the fixed basis order.
pub fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    let mut out = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Which party's photon is subject to loss (equivalently, which party is
/// doing the steering in a given direction of the task).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

/// A validated 4×4 two-qubit density matrix.
///
/// Construction checks Hermiticity, unit trace and positivity; every value
/// of this type satisfies those invariants, so downstream code can consume
/// it without re-validating.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix4 {
    m: Matrix4<C64>,
}

impl DensityMatrix4 {
    /// Validate and wrap a raw matrix.
    pub fn new(m: Matrix4<C64>) -> Result<Self> {
        for i in 0..4 {
            for j in 0..4 {
                let d = m[(i, j)] - m[(j, i)].conj();
                if d.norm() > HERMITICITY_TOL {
                    return Err(SteerError::Validation(format!(
                        "matrix is not Hermitian at ({i},{j}): asymmetry {:.3e}",
                        d.norm()
                    )));
                }
            }
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(SteerError::Validation(format!(
                "trace is {tr}, expected 1"
            )));
        }
        let min_ev = SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_ev < PSD_TOL {
            return Err(SteerError::Validation(format!(
                "matrix is not positive semidefinite: smallest eigenvalue {min_ev:.3e}"
            )));
        }
        Ok(Self { m })
    }

    /// Repair a nearly-physical matrix: symmetrize, clip eigenvalues below
    /// zero (only small violations down to the validation tolerance are
    /// accepted) and renormalize the trace. Deterministic repair rule for
    /// states assembled from noisy data.
    pub fn new_clipped(m: Matrix4<C64>) -> Result<Self> {
        let herm = (m + m.adjoint()) * c(0.5);
        let mut se = SymmetricEigen::new(herm);
        let min_ev = se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_ev < PSD_TOL {
            return Err(SteerError::Validation(format!(
                "matrix too far from positive: smallest eigenvalue {min_ev:.3e}"
            )));
        }
        for ev in se.eigenvalues.iter_mut() {
            if *ev < 0.0 {
                *ev = 0.0;
            }
        }
        let total: f64 = se.eigenvalues.iter().sum();
        if total <= 0.0 {
            return Err(SteerError::Validation("matrix has zero trace after clipping".into()));
        }
        for ev in se.eigenvalues.iter_mut() {
            *ev /= total;
        }
        Self::new(se.recompose())
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    /// Bob's reduced state (partial trace over Alice).
    pub fn reduce_bob(&self) -> Matrix2<C64> {
        let m = &self.m;
        Matrix2::new(
            m[(0, 0)] + m[(2, 2)],
            m[(0, 1)] + m[(2, 3)],
            m[(1, 0)] + m[(3, 2)],
            m[(1, 1)] + m[(3, 3)],
        )
    }

    /// Alice's reduced state (partial trace over Bob).
    pub fn reduce_alice(&self) -> Matrix2<C64> {
        let m = &self.m;
        Matrix2::new(
            m[(0, 0)] + m[(1, 1)],
            m[(0, 2)] + m[(1, 3)],
            m[(2, 0)] + m[(3, 1)],
            m[(2, 2)] + m[(3, 3)],
        )
    }

    /// Conjugate by a pair of local unitaries: `(Ua ⊗ Ub) ρ (Ua ⊗ Ub)†`.
    pub fn conjugate_local(&self, ua: &Matrix2<C64>, ub: &Matrix2<C64>) -> Result<Self> {
        let u = kron2(ua, ub);
        Self::new(u * self.m * u.adjoint())
    }
}

/// Werner mixing parameter μ ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WernerSpec {
    pub mu: f64,
}

impl WernerSpec {
    pub fn new(mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) || !mu.is_finite() {
            return Err(SteerError::Domain(format!("mu must lie in [0,1], got {mu}")));
        }
        Ok(Self { mu })
    }
}

/// `μ |Ψ⁻⟩⟨Ψ⁻| + (1−μ)/4 · I₄`, the Werner family interpolating between the
/// singlet and the maximally mixed state.
pub fn werner_state(spec: WernerSpec) -> DensityMatrix4 {
    let mu = spec.mu;
    let mut m = Matrix4::from_diagonal_element(c((1.0 - mu) / 4.0));
    // |Ψ⁻⟩ = (|01⟩ − |10⟩)/√2 lives on the {HV, VH} block.
    m[(1, 1)] += c(mu / 2.0);
    m[(2, 2)] += c(mu / 2.0);
    m[(1, 2)] += c(-mu / 2.0);
    m[(2, 1)] += c(-mu / 2.0);
    DensityMatrix4::new(m).expect("werner state is physical by construction")
}

/// The pure singlet state.
pub fn singlet() -> DensityMatrix4 {
    werner_state(WernerSpec { mu: 1.0 })
}

/// Local Bloch vectors and correlation matrix of a two-qubit state.
///
/// `rot_a`/`rot_b` record the frame rotation applied to each side relative
/// to the frame the decomposition started from (identity until
/// [`canonical_form`] is applied). With `a`, `b`, `t` the state is
/// `ρ = ¼ (I⊗I + a·σ⊗I + I⊗b·σ + Σᵢⱼ Tᵢⱼ σᵢ⊗σⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochForm {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub t: Matrix3<f64>,
    pub canonical: bool,
    pub rot_a: Matrix3<f64>,
    pub rot_b: Matrix3<f64>,
}

impl BlochForm {
    /// The steering party's Bloch vector.
    pub fn steering_vector(&self, party: Party) -> Vector3<f64> {
        match party {
            Party::Alice => self.a,
            Party::Bob => self.b,
        }
    }

    /// Check the canonical-frame invariants (diagonal `t`, sorted by
    /// magnitude).
    pub fn is_canonical(&self) -> bool {
        if !self.canonical {
            return false;
        }
        let t = &self.t;
        let mut off = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    off = off.max(t[(i, j)].abs());
                }
            }
        }
        off <= 1e-10
            && t[(0, 0)].abs() + 1e-12 >= t[(1, 1)].abs()
            && t[(1, 1)].abs() + 1e-12 >= t[(2, 2)].abs()
    }
}

/// Extract local Bloch vectors and the correlation matrix:
/// `aᵢ = Tr[ρ (σᵢ⊗I)]`, `bⱼ = Tr[ρ (I⊗σⱼ)]`, `Tᵢⱼ = Tr[ρ (σᵢ⊗σⱼ)]`.
pub fn bloch_decompose(rho: &DensityMatrix4) -> BlochForm {
    let p = pauli();
    let id = Matrix2::identity();
    let tr = |op: Matrix4<C64>| (op * rho.matrix()).trace().re;
    let mut a = Vector3::zeros();
    let mut b = Vector3::zeros();
    let mut t = Matrix3::zeros();
    for i in 0..3 {
        a[i] = tr(kron2(&p[i], &id));
        b[i] = tr(kron2(&id, &p[i]));
        for j in 0..3 {
            t[(i, j)] = tr(kron2(&p[i], &p[j]));
        }
    }
    BlochForm {
        a,
        b,
        t,
        canonical: false,
        rot_a: Matrix3::identity(),
        rot_b: Matrix3::identity(),
    }
}

/// Rebuild the density matrix from a Bloch form.
pub fn bloch_reassemble(bf: &BlochForm) -> Result<DensityMatrix4> {
    let p = pauli();
    let id = Matrix2::identity();
    let mut m = Matrix4::identity();
    for i in 0..3 {
        m += kron2(&p[i], &id) * c(bf.a[i]);
        m += kron2(&id, &p[i]) * c(bf.b[i]);
        for j in 0..3 {
            m += kron2(&p[i], &p[j]) * c(bf.t[(i, j)]);
        }
    }
    DensityMatrix4::new(m * c(0.25))
}

/// Rotate into the canonical frame: proper rotations `R_A`, `R_B` such that
/// `T' = R_A T R_Bᵀ` is diagonal with `|T'₁₁| ≥ |T'₂₂| ≥ |T'₃₃|`.
///
/// Any reflection left over from the singular value decomposition is pushed
/// into the sign of the third diagonal entry, so both recorded rotations
/// stay proper (realizable by local unitaries). Accumulates onto any
/// rotations already present in the input.
pub fn canonical_form(bf: &BlochForm) -> BlochForm {
    let svd = bf.t.svd(true, true);
    let u = svd.u.expect("3x3 svd with u requested");
    let vt = svd.v_t.expect("3x3 svd with v_t requested");
    let su = u.determinant().signum();
    let sv = vt.determinant().signum();
    let du = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, su));
    let dv = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sv));
    // T = U Σ Vᵀ  ⇒  (Du Uᵀ) T (Vᵀᵀ Dv)ᵀ... with R_A = Du·Uᵀ, R_B = Dv·Vᵀ:
    // R_A T R_Bᵀ = Du Σ Dv = diag(σ₁, σ₂, su·sv·σ₃).
    let rot_a = du * u.transpose();
    let rot_b = dv * vt;
    let sv3 = svd.singular_values;
    let t = Matrix3::from_diagonal(&Vector3::new(sv3[0], sv3[1], su * sv * sv3[2]));
    BlochForm {
        a: rot_a * bf.a,
        b: rot_b * bf.b,
        t,
        canonical: true,
        rot_a: rot_a * bf.rot_a,
        rot_b: rot_b * bf.rot_b,
    }
}

/// Hermitian square root via eigendecomposition; small negative eigenvalues
/// (within the validation tolerance) are clipped to zero.
fn psd_sqrt(m: &Matrix4<C64>) -> Matrix4<C64> {
    let mut se = SymmetricEigen::new(*m);
    for ev in se.eigenvalues.iter_mut() {
        *ev = ev.max(0.0).sqrt();
    }
    se.recompose()
}

/// Uhlmann fidelity `[Tr √(√ρ σ √ρ)]²`, clipped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix4, sigma: &DensityMatrix4) -> f64 {
    let sr = psd_sqrt(rho.matrix());
    let inner = sr * sigma.matrix() * sr;
    let herm = (inner + inner.adjoint()) * c(0.5);
    let se = SymmetricEigen::new(herm);
    let tr_sqrt: f64 = se.eigenvalues.iter().map(|ev| ev.max(0.0).sqrt()).sum();
    (tr_sqrt * tr_sqrt).clamp(0.0, 1.0)
}

/// Find the Werner state closest in fidelity to `rho`.
///
/// Golden-section search over μ ∈ [0, 1], refined to an absolute μ
/// tolerance of 1e-6 (unimodality of the fidelity profile is checked
/// empirically by the grid oracle in the test suite). Returns `(μ*, F*)`.
pub fn closest_werner(rho: &DensityMatrix4) -> (f64, f64) {
    let f = |mu: f64| fidelity(rho, &werner_state(WernerSpec { mu }));
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-8 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mu_star = 0.5 * (lo + hi);
    (mu_star, f(mu_star))
}

/// A two-qubit state together with the heralding efficiency of one party.
///
/// The designated party receives its photon with probability `epsilon`;
/// with probability `1 − epsilon` it holds the vacuum flag instead. The
/// extended matrix on the (qubit ⊕ vacuum) ⊗ qubit space is only
/// materialized on demand via [`LossyState::expand`].
#[derive(Debug, Clone)]
pub struct LossyState {
    pub rho: DensityMatrix4,
    pub epsilon: f64,
    pub lossy_party: Party,
}

/// A state on a `dim_a ⊗ dim_b` composite space, used for the
/// vacuum-extended matrices where one side is three-dimensional.
#[derive(Debug, Clone)]
pub struct TwoPartyState {
    pub dim_a: usize,
    pub dim_b: usize,
    pub mat: DMatrix<C64>,
}

impl TwoPartyState {
    pub fn new(dim_a: usize, dim_b: usize, mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != dim_a * dim_b || mat.ncols() != dim_a * dim_b {
            return Err(SteerError::Validation(format!(
                "matrix is {}x{}, expected {n}x{n}",
                mat.nrows(),
                mat.ncols(),
                n = dim_a * dim_b
            )));
        }
        Ok(Self { dim_a, dim_b, mat })
    }

    pub fn from_qubits(rho: &DensityMatrix4) -> Self {
        let mut mat = DMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                mat[(i, j)] = rho.entry(i, j);
            }
        }
        Self { dim_a: 2, dim_b: 2, mat }
    }

    pub fn trace(&self) -> C64 {
        self.mat.diagonal().sum()
    }

    /// Partial trace over Alice's space.
    pub fn reduce_bob(&self) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.dim_b, self.dim_b);
        for k in 0..self.dim_a {
            for i in 0..self.dim_b {
                for j in 0..self.dim_b {
                    out[(i, j)] += self.mat[(k * self.dim_b + i, k * self.dim_b + j)];
                }
            }
        }
        out
    }

    /// Partial trace over Bob's space.
    pub fn reduce_alice(&self) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.dim_a, self.dim_a);
        for k in 0..self.dim_b {
            for i in 0..self.dim_a {
                for j in 0..self.dim_a {
                    out[(i, j)] += self.mat[(i * self.dim_b + k, j * self.dim_b + k)];
                }
            }
        }
        out
    }
}

/// Package a state with a heralding efficiency for one party.
pub fn lossy_embed(rho: &DensityMatrix4, epsilon: f64, party: Party) -> Result<LossyState> {
    if !(0.0..=1.0).contains(&epsilon) || !epsilon.is_finite() {
        return Err(SteerError::Domain(format!(
            "epsilon must lie in [0,1], got {epsilon}"
        )));
    }
    Ok(LossyState { rho: rho.clone(), epsilon, lossy_party: party })
}

impl LossyState {
    /// Materialize `ε ρ + (1−ε) |ν⟩⟨ν| ⊗ ρ_partner` on the extended space.
    ///
    /// The lossy side's space is ordered `{|0⟩, |1⟩, |ν⟩}` with the vacuum
    /// flag last, so at `ε = 1` the expansion is the original matrix padded
    /// with zero vacuum rows and columns.
    pub fn expand(&self) -> TwoPartyState {
        match self.lossy_party {
            Party::Alice => {
                let mut mat = DMatrix::zeros(6, 6);
                for i in 0..4 {
                    for j in 0..4 {
                        mat[(i, j)] = self.rho.entry(i, j) * c(self.epsilon);
                    }
                }
                let rb = self.rho.reduce_bob();
                for i in 0..2 {
                    for j in 0..2 {
                        mat[(4 + i, 4 + j)] += rb[(i, j)] * c(1.0 - self.epsilon);
                    }
                }
                TwoPartyState { dim_a: 3, dim_b: 2, mat }
            }
            Party::Bob => {
                // Bob's index is the fast one: |a⟩|b⟩ ↦ 3a + b with b ∈ {0,1,ν}.
                let mut mat = DMatrix::zeros(6, 6);
                for i in 0..4 {
                    for j in 0..4 {
                        let (ia, ib) = (i / 2, i % 2);
                        let (ja, jb) = (j / 2, j % 2);
                        mat[(3 * ia + ib, 3 * ja + jb)] = self.rho.entry(i, j) * c(self.epsilon);
                    }
                }
                let ra = self.rho.reduce_alice();
                for i in 0..2 {
                    for j in 0..2 {
                        mat[(3 * i + 2, 3 * j + 2)] += ra[(i, j)] * c(1.0 - self.epsilon);
                    }
                }
                TwoPartyState { dim_a: 2, dim_b: 3, mat }
            }
        }
    }
}

/// Sample a random density matrix `G G† / Tr(G G†)` with complex Gaussian
/// `G` (normalized Wishart construction). Used for randomized checks.
pub fn random_state<R: rand::Rng>(rng: &mut R) -> DensityMatrix4 {
    use rand_distr::{Distribution, StandardNormal};
    let mut g = Matrix4::<C64>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            g[(i, j)] = C64::new(re, im);
        }
    }
    let w = g * g.adjoint();
    let tr = w.trace().re;
    DensityMatrix4::new(w * c(1.0 / tr)).expect("wishart construction is physical")
}

/// SU(2) rotation by `angle` about `axis` on the Bloch sphere.
pub fn su2_rotation(axis: &Vector3<f64>, angle: f64) -> Matrix2<C64> {
    let n = axis.normalize();
    let (s, co) = ((angle / 2.0).sin(), (angle / 2.0).cos());
    let p = pauli();
    let mut u = Matrix2::identity() * c(co);
    let mi = C64::new(0.0, -s);
    for k in 0..3 {
        u += p[k] * (mi * c(n[k]));
    }
    u
}

// ---------------------------------------------------------------------------
// State file format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ComplexEntry {
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    basis: String,
    matrix: Vec<Vec<ComplexEntry>>,
}

/// Serialize a state to the JSON interchange format.
pub fn state_to_json(rho: &DensityMatrix4) -> String {
    let matrix = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| {
                    let z = rho.entry(i, j);
                    ComplexEntry { re: z.re, im: z.im }
                })
                .collect()
        })
        .collect();
    serde_json::to_string_pretty(&StateFile { basis: BASIS_LABEL.to_string(), matrix })
        .expect("state file serialization cannot fail")
}

/// Parse a state from the JSON interchange format, validating the basis
/// guard string and all density-matrix invariants.
pub fn state_from_json(text: &str) -> Result<DensityMatrix4> {
    let file: StateFile = serde_json::from_str(text)?;
    if file.basis != BASIS_LABEL {
        return Err(SteerError::Validation(format!(
            "unexpected basis label {:?}, expected {BASIS_LABEL:?}",
            file.basis
        )));
    }
    if file.matrix.len() != 4 || file.matrix.iter().any(|row| row.len() != 4) {
        return Err(SteerError::Validation("state matrix must be 4x4".into()));
    }
    let mut m = Matrix4::zeros();
    for (i, row) in file.matrix.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            m[(i, j)] = C64::new(e.re, e.im);
        }
    }
    DensityMatrix4::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn max_entry_diff(a: &Matrix4<C64>, b: &Matrix4<C64>) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        worst
    }

    #[test]
    fn werner_endpoints() {
        let s = werner_state(WernerSpec::new(1.0).unwrap());
        for (i, want) in [0.0, 0.5, 0.5, 0.0].iter().enumerate() {
            assert_abs_diff_eq!(s.entry(i, i).re, want, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(s.entry(1, 2).re, -0.5, epsilon = 1e-15);

        let mixed = werner_state(WernerSpec::new(0.0).unwrap());
        assert!(max_entry_diff(mixed.matrix(), &(Matrix4::identity() * c(0.25))) < 1e-15);
    }

    #[test]
    fn werner_half() {
        // Direct evaluation of the convex combination at μ = 0.5.
        let s = werner_state(WernerSpec::new(0.5).unwrap());
        let diag = [0.125, 0.375, 0.375, 0.125];
        for (i, want) in diag.iter().enumerate() {
            assert_abs_diff_eq!(s.entry(i, i).re, want, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(s.entry(1, 2).re, -0.25, epsilon = 1e-15);
        for i in 0..4 {
            for j in 0..4 {
                if i != j && !((i, j) == (1, 2) || (i, j) == (2, 1)) {
                    assert!(s.entry(i, j).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn werner_out_of_range_rejected() {
        assert!(WernerSpec::new(-0.01).is_err());
        assert!(WernerSpec::new(1.01).is_err());
        assert!(WernerSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn bloch_of_singlet_and_products() {
        let bf = bloch_decompose(&singlet());
        assert!(bf.a.norm() < 1e-14 && bf.b.norm() < 1e-14);
        assert!((bf.t - Matrix3::from_diagonal_element(-1.0)).norm() < 1e-14);

        // Werner: T = −μ I by linearity.
        let bf = bloch_decompose(&werner_state(WernerSpec::new(0.37).unwrap()));
        assert!((bf.t - Matrix3::from_diagonal_element(-0.37)).norm() < 1e-14);

        // |HH⟩⟨HH|: product state along +z on both sides.
        let mut m = Matrix4::zeros();
        m[(0, 0)] = c(1.0);
        let hh = DensityMatrix4::new(m).unwrap();
        let bf = bloch_decompose(&hh);
        assert!((bf.a - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-14);
        assert!((bf.b - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-14);
        assert!((bf.t - Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, 1.0))).norm() < 1e-14);
    }

    #[test]
    fn bloch_round_trip_random() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let rho = random_state(&mut rng);
            let bf = bloch_decompose(&rho);
            let back = bloch_reassemble(&bf).unwrap();
            assert!(max_entry_diff(rho.matrix(), back.matrix()) < 1e-12);
        }
    }

    #[test]
    fn canonical_recovers_rotated_werner() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mu = 0.7;
            let bf0 = bloch_decompose(&werner_state(WernerSpec::new(mu).unwrap()));
            let ra = random_rotation(&mut rng);
            let rb = random_rotation(&mut rng);
            let rotated = BlochForm {
                a: ra * bf0.a,
                b: rb * bf0.b,
                t: ra * bf0.t * rb.transpose(),
                canonical: false,
                rot_a: Matrix3::identity(),
                rot_b: Matrix3::identity(),
            };
            let canon = canonical_form(&rotated);
            assert!(canon.is_canonical());
            for i in 0..3 {
                assert_abs_diff_eq!(canon.t[(i, i)].abs(), mu, epsilon = 1e-10);
            }
            // Proper rotations recorded.
            assert_abs_diff_eq!(canon.rot_a.determinant(), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(canon.rot_b.determinant(), 1.0, epsilon = 1e-10);
            assert!((canon.rot_a * canon.rot_a.transpose() - Matrix3::identity()).norm() < 1e-10);
            assert!((canon.rot_b * canon.rot_b.transpose() - Matrix3::identity()).norm() < 1e-10);
        }
    }

    #[test]
    fn canonical_preserves_singular_values_and_is_idempotent() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..200 {
            let rho = random_state(&mut rng);
            let bf = bloch_decompose(&rho);
            let canon = canonical_form(&bf);
            let sv_in = bf.t.svd(false, false).singular_values;
            let sv_out = canon.t.svd(false, false).singular_values;
            for i in 0..3 {
                assert_abs_diff_eq!(sv_in[i], sv_out[i], epsilon = 1e-12);
            }
            let twice = canonical_form(&canon);
            assert!((twice.a - canon.a).norm() < 1e-12);
            assert!((twice.b - canon.b).norm() < 1e-12);
            assert!((twice.t - canon.t).norm() < 1e-12);
        }
    }

    #[test]
    fn canonical_werner_sign_convention() {
        let bf = bloch_decompose(&werner_state(WernerSpec::new(0.6).unwrap()));
        let canon = canonical_form(&bf);
        // det T = −μ³ is preserved, so exactly one or three entries are negative.
        let d = canon.t.determinant();
        assert!(d < 0.0);
        assert_abs_diff_eq!(canon.t[(0, 0)].abs(), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(canon.t[(2, 2)].abs(), 0.6, epsilon = 1e-12);
        assert!(canon.a.norm() < 1e-12 && canon.b.norm() < 1e-12);
    }

    #[test]
    fn fidelity_identity_orthogonal_closed_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..20 {
            let rho = random_state(&mut rng);
            assert_abs_diff_eq!(fidelity(&rho, &rho), 1.0, epsilon = 1e-10);
        }

        let mut hh = Matrix4::zeros();
        hh[(0, 0)] = c(1.0);
        let mut hv = Matrix4::zeros();
        hv[(1, 1)] = c(1.0);
        let hh = DensityMatrix4::new(hh).unwrap();
        let hv = DensityMatrix4::new(hv).unwrap();
        assert_abs_diff_eq!(fidelity(&hh, &hv), 0.0, epsilon = 1e-12);

        // Commuting pair: closed form from the Werner spectrum at μ = 0.6.
        let mu = 0.6;
        let id4 = DensityMatrix4::new(Matrix4::identity() * c(0.25)).unwrap();
        let w = werner_state(WernerSpec::new(mu).unwrap());
        let expected = 0.25
            * (((1.0 + 3.0 * mu) / 4.0).sqrt() + 3.0 * ((1.0 - mu) / 4.0).sqrt()).powi(2);
        assert_abs_diff_eq!(fidelity(&id4, &w), expected, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_symmetric_and_unitarily_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        for _ in 0..20 {
            let rho = random_state(&mut rng);
            let sig = random_state(&mut rng);
            let f1 = fidelity(&rho, &sig);
            let f2 = fidelity(&sig, &rho);
            assert_abs_diff_eq!(f1, f2, epsilon = 1e-12);

            let ua = random_su2(&mut rng);
            let ub = random_su2(&mut rng);
            let rho_u = rho.conjugate_local(&ua, &ub).unwrap();
            let sig_u = sig.conjugate_local(&ua, &ub).unwrap();
            assert_abs_diff_eq!(f1, fidelity(&rho_u, &sig_u), epsilon = 1e-10);
        }
    }

    #[test]
    fn closest_werner_self_match() {
        let (mu, fid) = closest_werner(&werner_state(WernerSpec::new(0.8).unwrap()));
        assert_abs_diff_eq!(mu, 0.8, epsilon = 1e-6);
        assert_abs_diff_eq!(fid, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn closest_werner_matches_grid_oracle() {
        // 0.99 werner(0.8) + 0.01 |HH⟩⟨HH|.
        let w = werner_state(WernerSpec::new(0.8).unwrap());
        let mut hh = Matrix4::zeros();
        hh[(0, 0)] = c(1.0);
        let m = w.matrix() * c(0.99) + hh * c(0.01);
        let rho = DensityMatrix4::new(m).unwrap();
        let (mu, fid) = closest_werner(&rho);

        // Coarse-to-fine grid scan oracle, final step 1e-7.
        let mut best = (0.0, f64::NEG_INFINITY);
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        for _ in 0..4 {
            let steps = 1000;
            for k in 0..=steps {
                let m = lo + (hi - lo) * k as f64 / steps as f64;
                let f = fidelity(&rho, &werner_state(WernerSpec { mu: m }));
                if f > best.1 {
                    best = (m, f);
                }
            }
            let w = (hi - lo) / steps as f64 * 2.0;
            lo = (best.0 - w).max(0.0);
            hi = (best.0 + w).min(1.0);
        }
        assert!((mu - best.0).abs() < 1e-6, "mu {mu} vs oracle {}", best.0);
        assert!((fid - best.1).abs() < 1e-6);
    }

    #[test]
    fn werner_isotropy_under_common_rotation() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let w = werner_state(WernerSpec::new(0.77).unwrap());
        for _ in 0..20 {
            let u = random_su2(&mut rng);
            let rotated = w.conjugate_local(&u, &u).unwrap();
            assert!(max_entry_diff(w.matrix(), rotated.matrix()) < 1e-12);
        }
    }

    #[test]
    fn lossy_embedding_edge_cases() {
        let w = werner_state(WernerSpec::new(0.4).unwrap());
        let full = lossy_embed(&w, 1.0, Party::Alice).unwrap().expand();
        for i in 0..4 {
            for j in 0..4 {
                assert!((full.mat[(i, j)] - w.entry(i, j)).norm() < 1e-15);
            }
        }
        for i in 4..6 {
            for j in 0..6 {
                assert!(full.mat[(i, j)].norm() < 1e-15);
                assert!(full.mat[(j, i)].norm() < 1e-15);
            }
        }

        let none = lossy_embed(&w, 0.0, Party::Alice).unwrap().expand();
        let rb = w.reduce_bob();
        for i in 0..4 {
            for j in 0..4 {
                assert!(none.mat[(i, j)].norm() < 1e-15);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((none.mat[(4 + i, 4 + j)] - rb[(i, j)]).norm() < 1e-15);
            }
        }

        for eps in [0.0, 0.3, 0.777, 1.0] {
            let e = lossy_embed(&w, eps, Party::Alice).unwrap().expand();
            assert_abs_diff_eq!(e.trace().re, 1.0, epsilon = 1e-14);
            // Trusted-side marginal is exactly ρ_B.
            let marg = e.reduce_bob();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((marg[(i, j)] - rb[(i, j)]).norm() < 1e-14);
                }
            }
            let eb = lossy_embed(&w, eps, Party::Bob).unwrap().expand();
            assert_abs_diff_eq!(eb.trace().re, 1.0, epsilon = 1e-14);
            let ra = w.reduce_alice();
            let marg_a = eb.reduce_alice();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((marg_a[(i, j)] - ra[(i, j)]).norm() < 1e-14);
                }
            }
        }

        assert!(lossy_embed(&w, -0.1, Party::Alice).is_err());
        assert!(lossy_embed(&w, 1.1, Party::Bob).is_err());
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let mut m = Matrix4::identity() * c(0.25);
        m[(0, 1)] = c(0.1); // not Hermitian
        assert!(DensityMatrix4::new(m).is_err());

        let m = Matrix4::identity() * c(0.3); // trace 1.2
        assert!(DensityMatrix4::new(m).is_err());

        let mut m = Matrix4::zeros(); // negative eigenvalue
        m[(0, 0)] = c(1.5);
        m[(1, 1)] = c(-0.5);
        assert!(DensityMatrix4::new(m).is_err());
    }

    #[test]
    fn state_json_round_trip() {
        let w = werner_state(WernerSpec::new(0.31).unwrap());
        let text = state_to_json(&w);
        let back = state_from_json(&text).unwrap();
        assert!(max_entry_diff(w.matrix(), back.matrix()) == 0.0);

        let bad = text.replace("HH,HV,VH,VV", "HH,HV,VH,VW");
        assert!(state_from_json(&bad).is_err());
    }

    pub(crate) fn random_rotation<R: rand::Rng>(rng: &mut R) -> Matrix3<f64> {
        use rand_distr::{Distribution, StandardNormal};
        // QR of a Gaussian matrix, sign-fixed to a proper rotation.
        let mut m = Matrix3::<f64>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = StandardNormal.sample(rng);
            }
        }
        let qr = m.qr();
        let mut q = qr.q();
        if q.determinant() < 0.0 {
            let col = q.column(2) * -1.0;
            q.set_column(2, &col);
        }
        q
    }

    pub(crate) fn random_su2<R: rand::Rng>(rng: &mut R) -> Matrix2<C64> {
        use rand_distr::{Distribution, StandardNormal};
        let axis = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        su2_rotation(&axis, angle)
    }
}
