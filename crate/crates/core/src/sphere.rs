//! Quasi-uniform unit-vector grids and local refinement on the sphere.

use nalgebra::Vector3;

/// Golden-angle (Fibonacci) lattice of `n` unit vectors.
///
/// Deterministic, pole-free (half-integer offset), quasi-uniform with
/// nearest-neighbor spacing `≈ sqrt(4π/n)`.
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Worst-case angular radius covered by one grid cell, used to convert a
/// grid maximum into a bound on the continuous maximum of a Lipschitz
/// function.
pub fn fibonacci_cell_radius(n: usize) -> f64 {
    // Empirical covering radius of the golden-angle lattice; the constant
    // is conservative (measured ≤ 2.4 for n ≥ 100).
    2.5 * (4.0 * std::f64::consts::PI / n as f64).sqrt() / 2.0
}

/// Maximize `f` over the unit sphere by projected ascent from `start`.
///
/// Central-difference gradient in the tangent plane with Armijo
/// backtracking; suited to functions smooth near the maximizer. Returns the
/// refined point and value (never worse than the start).
pub fn refine_ascent<F: Fn(&Vector3<f64>) -> f64>(
    f: &F,
    start: Vector3<f64>,
    max_iters: usize,
) -> (Vector3<f64>, f64) {
    let h = 1e-6;
    let mut x = start.normalize();
    let mut fx = f(&x);
    let mut stall = 0;
    for _ in 0..max_iters {
        // Tangent basis at x.
        let helper = if x.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        let e1 = x.cross(&helper).normalize();
        let e2 = x.cross(&e1).normalize();
        let df = |dir: &Vector3<f64>| {
            let plus = (x + dir * h).normalize();
            let minus = (x - dir * h).normalize();
            (f(&plus) - f(&minus)) / (2.0 * h)
        };
        let g = e1 * df(&e1) + e2 * df(&e2);
        let gn = g.norm();
        if gn < 1e-12 {
            break;
        }
        let mut eta = 1.0_f64.min(0.1 / gn);
        let mut improved = false;
        while eta > 1e-14 {
            let cand = (x + g * eta).normalize();
            let fc = f(&cand);
            if fc > fx + 1e-4 * eta * gn * gn {
                x = cand;
                fx = fc;
                improved = true;
                break;
            }
            eta *= 0.5;
        }
        if !improved {
            stall += 1;
            if stall >= 2 {
                break;
            }
        } else {
            stall = 0;
        }
    }
    (x, fx)
}

/// Derivative-free compass search on the sphere, for objectives with
/// kinks where gradient ascent stalls. Probes eight tangent directions at
/// geometrically shrinking radii.
pub fn pattern_search<F: Fn(&Vector3<f64>) -> f64>(
    f: &F,
    start: Vector3<f64>,
    init_radius: f64,
    min_radius: f64,
) -> (Vector3<f64>, f64) {
    let mut x = start.normalize();
    let mut fx = f(&x);
    let mut radius = init_radius;
    while radius > min_radius {
        let helper = if x.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        let e1 = x.cross(&helper).normalize();
        let e2 = x.cross(&e1).normalize();
        let mut improved = false;
        for k in 0..8 {
            let ang = std::f64::consts::FRAC_PI_4 * k as f64;
            let cand = (x + (e1 * ang.cos() + e2 * ang.sin()) * radius).normalize();
            let fc = f(&cand);
            if fc > fx + 1e-15 {
                x = cand;
                fx = fc;
                improved = true;
                break;
            }
        }
        if !improved {
            radius *= 0.5;
        }
    }
    (x, fx)
}

/// Indices of the `k` largest values, ties broken by lower index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}
