//! Count-level simulation of a tunable two-qubit source with per-arm loss,
//! dark counts, and Poisson statistics.
//!
//! All counts are drawn from Poisson distributions around analytically
//! computed means (thinning a Poisson pair stream by the heralding
//! efficiencies is again Poisson, so no per-event sampling is needed).
//! Every acquisition gets its own sub-seeded stream, so results are
//! independent of evaluation order and bit-reproducible for a fixed seed.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteerError};
use crate::qstate::{bloch_decompose, werner_state, DensityMatrix4, WernerSpec, C64};
use crate::steering_game::{cell_index, MeasurementSet, PureStrategy, SteeringData};

/// Coincidence gating window, seconds.
pub const COINCIDENCE_WINDOW: f64 = 3e-9;

/// Source and detection parameters for one simulated acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Pump fraction sent to the singlet sub-source.
    pub mix_weight: f64,
    /// Residual-decoherence knob of the singlet sub-source.
    pub singlet_visibility: f64,
    /// Generated pairs per second (before any loss).
    pub pair_rate: f64,
    /// Seconds per acquisition (per setting pair for full tables, per
    /// setting for steering runs).
    pub integration_time: f64,
    pub eps_a: f64,
    pub eps_b: f64,
    /// Dark counts per second entering each arm's singles.
    pub dark_rate_a: f64,
    pub dark_rate_b: f64,
    pub seed: u64,
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mix_weight", self.mix_weight),
            ("singlet_visibility", self.singlet_visibility),
            ("eps_a", self.eps_a),
            ("eps_b", self.eps_b),
        ] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(SteerError::Domain(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        for (name, v) in [
            ("pair_rate", self.pair_rate),
            ("integration_time", self.integration_time),
            ("dark_rate_a", self.dark_rate_a),
            ("dark_rate_b", self.dark_rate_b),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(SteerError::Domain(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            mix_weight: 1.0,
            singlet_visibility: 1.0,
            pair_rate: 1e6,
            integration_time: 1.0,
            eps_a: 1.0,
            eps_b: 1.0,
            dark_rate_a: 0.0,
            dark_rate_b: 0.0,
            seed: 0,
        }
    }
}

/// Incoherent mixture of a singlet sub-source and a maximally mixed
/// sub-source: `w ρ_singlet(v) + (1−w) I₄/4`, where the singlet source at
/// visibility `v` is `v |Ψ⁻⟩⟨Ψ⁻| + (1−v)(|HV⟩⟨HV| + |VH⟩⟨VH|)/2`.
///
/// At `visibility = 1` the output is exactly the Werner state with μ = w.
pub fn mix_sources(w: f64, visibility: f64) -> Result<DensityMatrix4> {
    if !(0.0..=1.0).contains(&w) || !w.is_finite() {
        return Err(SteerError::Domain(format!("mix weight must lie in [0,1], got {w}")));
    }
    if !(0.0..=1.0).contains(&visibility) || !visibility.is_finite() {
        return Err(SteerError::Domain(format!(
            "visibility must lie in [0,1], got {visibility}"
        )));
    }
    let singlet = werner_state(WernerSpec { mu: 1.0 });
    let mut m = singlet.matrix() * C64::new(w * visibility, 0.0);
    // Dephased singlet: equal HV/VH populations without coherence.
    let dep = w * (1.0 - visibility) / 2.0;
    m[(1, 1)] += C64::new(dep, 0.0);
    m[(2, 2)] += C64::new(dep, 0.0);
    for i in 0..4 {
        m[(i, i)] += C64::new((1.0 - w) / 4.0, 0.0);
    }
    DensityMatrix4::new(m)
}

/// Joint outcome probability `P(a, b | u_a, u_b)` from the Born rule:
/// `¼ (1 + a·𝐚·u_a + b·𝐛·u_b + ab·u_aᵀ T u_b)`.
pub fn born_probability(
    rho: &DensityMatrix4,
    u_a: &Vector3<f64>,
    a: i8,
    u_b: &Vector3<f64>,
    b: i8,
) -> f64 {
    let bf = bloch_decompose(rho);
    born_from_bloch(&bf.a, &bf.b, &bf.t, u_a, a, u_b, b)
}

fn born_from_bloch(
    av: &Vector3<f64>,
    bv: &Vector3<f64>,
    t: &nalgebra::Matrix3<f64>,
    u_a: &Vector3<f64>,
    a: i8,
    u_b: &Vector3<f64>,
    b: i8,
) -> f64 {
    let (af, bf_) = (a as f64, b as f64);
    0.25 * (1.0 + af * av.dot(u_a) + bf_ * bv.dot(u_b) + af * bf_ * (u_a.transpose() * t * u_b)[0])
}

/// Per-setting-pair coincidence and per-setting singles counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    /// Alice and Bob measurement axes.
    pub settings_a: Vec<[f64; 3]>,
    pub settings_b: Vec<[f64; 3]>,
    /// Coincidences for pair `(i, j)` at index `i * settings_b.len() + j`,
    /// cells ordered `(+,+), (+,−), (−,+), (−,−)`.
    pub coincidences: Vec<[u64; 4]>,
    /// Singles per Alice setting, summed over Bob settings (and vice versa).
    pub singles_a: Vec<u64>,
    pub singles_b: Vec<u64>,
    pub config: Option<SourceConfig>,
    pub seed: u64,
}

impl CountTable {
    pub fn n_a(&self) -> usize {
        self.settings_a.len()
    }

    pub fn n_b(&self) -> usize {
        self.settings_b.len()
    }

    pub fn pair(&self, i: usize, j: usize) -> &[u64; 4] {
        &self.coincidences[i * self.n_b() + j]
    }

    pub fn total_coincidences(&self) -> u64 {
        self.coincidences.iter().flat_map(|c| c.iter()).sum()
    }

    /// CSV with header `setting_a,setting_b,a,b,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting_a,setting_b,a,b,count\n");
        for i in 0..self.n_a() {
            for j in 0..self.n_b() {
                let cells = self.pair(i, j);
                for (a, b, idx) in [(1, 1, 0), (1, -1, 1), (-1, 1, 2), (-1, -1, 3)] {
                    out.push_str(&format!("{i},{j},{a},{b},{}\n", cells[idx]));
                }
            }
        }
        out
    }

    /// Parse the coincidence CSV; the measurement axes are supplied by the
    /// caller (they are carried by the JSON sidecar, not the CSV).
    pub fn from_csv(
        text: &str,
        settings_a: Vec<[f64; 3]>,
        settings_b: Vec<[f64; 3]>,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        {
            let headers = rdr.headers()?;
            let expect = ["setting_a", "setting_b", "a", "b", "count"];
            if headers.iter().map(str::trim).ne(expect.iter().copied()) {
                return Err(SteerError::Validation(format!(
                    "count CSV header must be `setting_a,setting_b,a,b,count`, got {headers:?}"
                )));
            }
        }
        let (na, nb) = (settings_a.len(), settings_b.len());
        let mut coincidences = vec![[0u64; 4]; na * nb];
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
            let i = parse(0)? as usize;
            let j = parse(1)? as usize;
            let a = parse(2)?;
            let b = parse(3)?;
            let count = parse(4)?;
            if i >= na || j >= nb {
                return Err(SteerError::Validation(format!(
                    "setting pair ({i},{j}) outside {na}x{nb} table"
                )));
            }
            if !(a == 1 || a == -1) || !(b == 1 || b == -1) || count < 0 {
                return Err(SteerError::Validation(format!(
                    "bad record ({i},{j},{a},{b},{count})"
                )));
            }
            coincidences[i * nb + j][cell_index(a as i8, b as i8)] += count as u64;
        }
        Ok(Self {
            settings_a,
            settings_b,
            coincidences,
            singles_a: vec![0; na],
            singles_b: vec![0; nb],
            config: None,
            seed: 0,
        })
    }

    /// JSON sidecar carrying everything the CSV does not: axes, singles,
    /// configuration snapshot and seed.
    pub fn sidecar_json(&self) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            settings_a: &'a [[f64; 3]],
            settings_b: &'a [[f64; 3]],
            singles_a: &'a [u64],
            singles_b: &'a [u64],
            config: &'a Option<SourceConfig>,
            seed: u64,
        }
        serde_json::to_string_pretty(&Sidecar {
            settings_a: &self.settings_a,
            settings_b: &self.settings_b,
            singles_a: &self.singles_a,
            singles_b: &self.singles_b,
            config: &self.config,
            seed: self.seed,
        })
        .expect("sidecar serialization cannot fail")
    }

    /// Rebuild a full table from CSV plus sidecar.
    pub fn from_csv_with_sidecar(csv_text: &str, sidecar_text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Sidecar {
            settings_a: Vec<[f64; 3]>,
            settings_b: Vec<[f64; 3]>,
            singles_a: Vec<u64>,
            singles_b: Vec<u64>,
            config: Option<SourceConfig>,
            seed: u64,
        }
        let side: Sidecar = serde_json::from_str(sidecar_text)?;
        let mut table = Self::from_csv(csv_text, side.settings_a, side.settings_b)?;
        if side.singles_a.len() != table.n_a() || side.singles_b.len() != table.n_b() {
            return Err(SteerError::Validation("sidecar singles length mismatch".into()));
        }
        table.singles_a = side.singles_a;
        table.singles_b = side.singles_b;
        table.config = side.config;
        table.seed = side.seed;
        Ok(table)
    }
}

/// splitmix64 step, used to derive independent per-acquisition streams.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

pub(crate) fn sub_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &p in parts {
        state ^= p.wrapping_mul(0xD1342543DE82EF95).wrapping_add(0x632BE59BD9B4E019);
        out ^= splitmix64(&mut state);
    }
    out
}

fn draw_poisson(rng: &mut ChaCha12Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let p = Poisson::new(mean).expect("positive finite mean");
    let x: f64 = p.sample(rng);
    x.max(0.0) as u64
}

/// Expected per-cell coincidence mean and the accidental floor for one
/// acquisition window.
fn acquisition_means(cfg: &SourceConfig) -> (f64, f64, f64, f64) {
    let tau = cfg.integration_time;
    let rate_a = cfg.pair_rate * cfg.eps_a + cfg.dark_rate_a;
    let rate_b = cfg.pair_rate * cfg.eps_b + cfg.dark_rate_b;
    // Accidental coincidences: dark events in one arm falling inside the
    // gate window of the other arm's singles, split evenly over outcomes.
    let accidental =
        (cfg.dark_rate_a * rate_b + cfg.dark_rate_b * rate_a) * COINCIDENCE_WINDOW * tau;
    let pair_scale = cfg.pair_rate * tau * cfg.eps_a * cfg.eps_b;
    (pair_scale, accidental, rate_a * tau, rate_b * tau)
}

/// Simulate a full coincidence table over all setting pairs.
///
/// Expected coincidences are `pair_rate · time · ε_A ε_B · P(a,b)` plus the
/// accidental floor; singles carry one efficiency factor plus dark counts.
/// Deterministic for a fixed seed regardless of evaluation order.
pub fn simulate_counts(
    rho: &DensityMatrix4,
    settings_a: &MeasurementSet,
    settings_b: &MeasurementSet,
    cfg: &SourceConfig,
) -> Result<CountTable> {
    cfg.validate()?;
    let bf = bloch_decompose(rho);
    let (na, nb) = (settings_a.len(), settings_b.len());
    let (pair_scale, accidental, singles_mean_a, singles_mean_b) = acquisition_means(cfg);

    let mut coincidences = vec![[0u64; 4]; na * nb];
    let mut singles_a = vec![0u64; na];
    let mut singles_b = vec![0u64; nb];
    for (i, ua) in settings_a.dirs().iter().enumerate() {
        for (j, ub) in settings_b.dirs().iter().enumerate() {
            let mut rng =
                ChaCha12Rng::seed_from_u64(sub_seed(cfg.seed, &[0xC01C, i as u64, j as u64]));
            let cells = &mut coincidences[i * nb + j];
            for (a, b, idx) in [(1i8, 1i8, 0usize), (1, -1, 1), (-1, 1, 2), (-1, -1, 3)] {
                let p = born_from_bloch(&bf.a, &bf.b, &bf.t, ua, a, ub, b);
                let mean = pair_scale * p.max(0.0) + accidental / 4.0;
                cells[idx] = draw_poisson(&mut rng, mean);
            }
            singles_a[i] += draw_poisson(&mut rng, singles_mean_a);
            singles_b[j] += draw_poisson(&mut rng, singles_mean_b);
        }
    }
    Ok(CountTable {
        settings_a: settings_a.dirs().iter().map(|u| [u.x, u.y, u.z]).collect(),
        settings_b: settings_b.dirs().iter().map(|u| [u.x, u.y, u.z]).collect(),
        coincidences,
        singles_a,
        singles_b,
        config: Some(cfg.clone()),
        seed: cfg.seed,
    })
}

/// Noise-free expected-count table (rounded means), for oracle tests and
/// reconstruction checks. Uses unit efficiencies and no dark counts; the
/// scale is pairs per setting pair.
pub fn expected_count_table(
    rho: &DensityMatrix4,
    settings_a: &MeasurementSet,
    settings_b: &MeasurementSet,
    pairs_per_setting: f64,
) -> CountTable {
    let bf = bloch_decompose(rho);
    let (na, nb) = (settings_a.len(), settings_b.len());
    let mut coincidences = vec![[0u64; 4]; na * nb];
    for (i, ua) in settings_a.dirs().iter().enumerate() {
        for (j, ub) in settings_b.dirs().iter().enumerate() {
            let cells = &mut coincidences[i * nb + j];
            for (a, b, idx) in [(1i8, 1i8, 0usize), (1, -1, 1), (-1, 1, 2), (-1, -1, 3)] {
                let p = born_from_bloch(&bf.a, &bf.b, &bf.t, ua, a, ub, b);
                cells[idx] = (pairs_per_setting * p.max(0.0)).round() as u64;
            }
        }
    }
    CountTable {
        settings_a: settings_a.dirs().iter().map(|u| [u.x, u.y, u.z]).collect(),
        settings_b: settings_b.dirs().iter().map(|u| [u.x, u.y, u.z]).collect(),
        coincidences,
        singles_a: vec![pairs_per_setting.round() as u64 * nb as u64; na],
        singles_b: vec![pairs_per_setting.round() as u64 * na as u64; nb],
        config: None,
        seed: 0,
    }
}

/// A steering acquisition: announced-outcome coincidences per setting plus
/// the singles needed for heralding estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteeringRun {
    pub data: SteeringData,
    pub singles_a: Vec<u64>,
    pub singles_b: Vec<u64>,
}

/// Simulate an honest steering run: both parties measure along the same
/// axis `u_k` per setting, and the announcer reports the flip of her
/// outcome (so anticorrelated states yield positive correlators).
pub fn simulate_steering(
    rho: &DensityMatrix4,
    settings: &MeasurementSet,
    cfg: &SourceConfig,
) -> Result<SteeringRun> {
    cfg.validate()?;
    let bf = bloch_decompose(rho);
    let (pair_scale, accidental, singles_mean_a, singles_mean_b) = acquisition_means(cfg);
    let mut counts = Vec::with_capacity(settings.len());
    let mut singles_a = Vec::with_capacity(settings.len());
    let mut singles_b = Vec::with_capacity(settings.len());
    for (k, u) in settings.dirs().iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(sub_seed(cfg.seed, &[0x57EE, k as u64]));
        let mut cells = [0u64; 4];
        for (a, b, idx) in [(1i8, 1i8, 0usize), (1, -1, 1), (-1, 1, 2), (-1, -1, 3)] {
            // Announcement a corresponds to measured outcome −a.
            let p = born_from_bloch(&bf.a, &bf.b, &bf.t, u, -a, u, b);
            let mean = pair_scale * p.max(0.0) + accidental / 4.0;
            cells[idx] = draw_poisson(&mut rng, mean);
        }
        counts.push(cells);
        singles_a.push(draw_poisson(&mut rng, singles_mean_a));
        singles_b.push(draw_poisson(&mut rng, singles_mean_b));
    }
    Ok(SteeringRun { data: SteeringData { counts }, singles_a, singles_b })
}

/// Simulate a dishonest steering run where the announcer holds no photon
/// and plays a mixture of pure hidden-state strategies (direction plus
/// answer subset), as produced by the cheating-bound solver. Used to
/// validate the bound end to end.
pub fn simulate_steering_lhs(
    strategies: &[PureStrategy],
    settings: &MeasurementSet,
    cfg: &SourceConfig,
) -> Result<SteeringRun> {
    cfg.validate()?;
    if strategies.is_empty() {
        return Err(SteerError::Domain("strategy mixture is empty".into()));
    }
    let tau = cfg.integration_time;
    let n = settings.len();
    let mut counts = vec![[0u64; 4]; n];
    let mut singles_a = vec![0u64; n];
    let mut singles_b = vec![0u64; n];
    for (si, strat) in strategies.iter().enumerate() {
        let r = Vector3::new(strat.dir[0], strat.dir[1], strat.dir[2]);
        for (k, u) in settings.dirs().iter().enumerate() {
            if strat.answered & (1 << k) == 0 {
                continue;
            }
            let mut rng =
                ChaCha12Rng::seed_from_u64(sub_seed(cfg.seed, &[0x1A5, si as u64, k as u64]));
            let announce: i8 = if u.dot(&r) >= 0.0 { 1 } else { -1 };
            let rounds = cfg.pair_rate * tau * strat.weight * cfg.eps_b;
            for b in [1i8, -1i8] {
                let p = 0.5 * (1.0 + (b as f64) * u.dot(&r));
                let mean = rounds * p.max(0.0);
                counts[k][cell_index(announce, b)] += draw_poisson(&mut rng, mean);
            }
            singles_a[k] += (cfg.pair_rate * tau * strat.weight).round() as u64;
            singles_b[k] += rounds.round() as u64;
        }
    }
    Ok(SteeringRun { data: SteeringData { counts }, singles_a, singles_b })
}

/// Klyshko heralding estimates with binomial standard errors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HeraldingEstimate {
    pub eps_a: f64,
    pub eps_b: f64,
    pub se_a: f64,
    pub se_b: f64,
}

/// Heralding efficiency: detected coincidences divided by the detected
/// singles of the opposite arm.
pub fn heralding_efficiency(counts: &CountTable) -> Result<HeraldingEstimate> {
    let total_c = counts.total_coincidences() as f64;
    let sa: u64 = counts.singles_a.iter().sum();
    let sb: u64 = counts.singles_b.iter().sum();
    if sa == 0 || sb == 0 {
        return Err(SteerError::InsufficientData(
            "heralding estimate needs nonzero singles in both arms".into(),
        ));
    }
    let eps_a = total_c / sb as f64;
    let eps_b = total_c / sa as f64;
    let se = |eps: f64, n: f64| (eps * (1.0 - eps).max(0.0) / n).sqrt();
    Ok(HeraldingEstimate {
        eps_a,
        eps_b,
        se_a: se(eps_a, sb as f64),
        se_b: se(eps_b, sa as f64),
    })
}

/// Heralding estimate from a steering run (same Klyshko convention).
pub fn heralding_from_steering(run: &SteeringRun) -> Result<HeraldingEstimate> {
    let total_c: u64 = run.data.counts.iter().flat_map(|c| c.iter()).sum();
    let sa: u64 = run.singles_a.iter().sum();
    let sb: u64 = run.singles_b.iter().sum();
    if sa == 0 || sb == 0 {
        return Err(SteerError::InsufficientData(
            "heralding estimate needs nonzero singles in both arms".into(),
        ));
    }
    let eps_a = total_c as f64 / sb as f64;
    let eps_b = total_c as f64 / sa as f64;
    let se = |eps: f64, n: f64| (eps * (1.0 - eps).max(0.0) / n).sqrt();
    Ok(HeraldingEstimate {
        eps_a,
        eps_b,
        se_a: se(eps_a, sb as f64),
        se_b: se(eps_b, sa as f64),
    })
}
