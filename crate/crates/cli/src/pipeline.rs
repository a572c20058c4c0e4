//! The full one-way analysis pipeline: simulate both measurement stages,
//! test steering in one direction and nonsteerability in the other, and
//! combine the margins into a verdict.

use std::path::Path;

use serde::{Deserialize, Serialize};
use steerkit::criteria::{n_povm, one_way_verdict, OneWayVerdict, SteeringOutcome};
use steerkit::expsim::{
    heralding_efficiency, heralding_from_steering, simulate_counts, simulate_steering,
};
use steerkit::qstate::{bloch_decompose, canonical_form, closest_werner, DensityMatrix4, Party};
use steerkit::steering_game::{platonic_settings, steering_bound, steering_parameter};
use steerkit::tomo::{mc_uncertainty, reconstruct, TomoInput};
use steerkit::Result;

use crate::scenario::ScenarioConfig;

/// Everything the verdict pipeline measures along the way.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineResult {
    pub scenario: String,
    /// Klyshko estimate of the announcer's heralding efficiency, from the
    /// steering run.
    pub eps_a_hat: f64,
    /// Klyshko estimate of the lossy party's heralding efficiency, from
    /// the tomography run.
    pub eps_b_hat: f64,
    /// Closest-Werner summary of the reconstructed state.
    pub mu_star: f64,
    pub fid_star: f64,
    pub delta_mu: f64,
    pub verdict: OneWayVerdict,
}

/// Run the whole protocol for one scenario.
///
/// Stage 1 (steering): an honest announcer and the six-axis scheme; the
/// steering parameter is compared against the cheating bound at the
/// *measured* heralding efficiency. Stage 2 (nonsteerability): tomography
/// of the same source, reconstruction, and the POVM criterion at the
/// measured lossy-side efficiency, with its uncertainty from a parametric
/// bootstrap over the tomography counts.
pub fn run_verdict(sc: &ScenarioConfig, base: &Path) -> Result<PipelineResult> {
    sc.validate()?;
    let rho_true = sc.resolve_state(base)?;

    // Stage 1: detection-aware steering test.
    let six = platonic_settings(6)?;
    let steer_cfg = sc.source_config(sc.steering_time, 1);
    let run = simulate_steering(&rho_true, &six, &steer_cfg)?;
    let (s, delta_s) = steering_parameter(&run.data)?;
    let herald_steer = heralding_from_steering(&run)?;
    let bound = steering_bound(&six, herald_steer.eps_a)?;

    // Stage 2: tomography and the nonsteerability criterion.
    let cart = platonic_settings(3)?;
    let tomo_cfg = sc.source_config(sc.tomo_time, 2);
    let table = simulate_counts(&rho_true, &cart, &cart, &tomo_cfg)?;
    let herald_tomo = heralding_efficiency(&table)?;
    let eps_b_hat = herald_tomo.eps_b;
    let input = TomoInput::new(table)?;
    let rho_hat = reconstruct(&input)?;
    let (mu_star, fid_star) = closest_werner(&rho_hat);
    let report = n_povm(
        &canonical_form(&bloch_decompose(&rho_hat)),
        eps_b_hat,
        Party::Bob,
    )?;

    let n_estimator = move |rho: &DensityMatrix4| {
        n_povm(&canonical_form(&bloch_decompose(rho)), eps_b_hat, Party::Bob)
            .map(|r| r.n_value)
    };
    let mc_n = mc_uncertainty(&input, "n_povm", n_estimator, sc.n_samples, sc.seed ^ 0xA11CE)?;
    let mc_mu = mc_uncertainty(
        &input,
        "mu",
        |rho| Ok(closest_werner(rho).0),
        sc.n_samples,
        sc.seed ^ 0xB0B,
    )?;

    let verdict = one_way_verdict(
        SteeringOutcome { s, bound: bound.bound, delta_s, sd_margin: 0.0 },
        &report,
        mc_n.sd,
        sc.sd_threshold,
    )?;

    Ok(PipelineResult {
        scenario: sc.name.clone(),
        eps_a_hat: herald_steer.eps_a,
        eps_b_hat,
        mu_star,
        fid_star,
        delta_mu: mc_mu.sd,
        verdict,
    })
}

/// Rows of the two sweep-figure panels.
pub fn figure3_rows(results: &[PipelineResult]) -> (String, String) {
    let mut steering = String::from("scenario,eps_a,s,delta_s,bound\n");
    let mut nonsteer = String::from("scenario,mu_star,eps_b,n_value,delta_n\n");
    for r in results {
        steering.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scenario, r.eps_a_hat, r.verdict.steer_ab.s, r.verdict.steer_ab.delta_s,
            r.verdict.steer_ab.bound
        ));
        nonsteer.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scenario, r.mu_star, r.eps_b_hat, r.verdict.nonsteer_ba.n_value, r.verdict.delta_n
        ));
    }
    (steering, nonsteer)
}
