//! Scalar measurements shared by the CLI suites and the acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeoError, Result};
use crate::geodesic::shoot;
use crate::metric::{DomainBall, MetricField, Point};
use crate::ray::{kinetic_residual, RayData};
use crate::source::SourceField;
use crate::spectral::{
    characteristic_deta_q, deta_q_finite_difference, transform_direct, transform_grid, transport_residual,
    Taper, XiWindow,
};

/// Base points uniform in the ball scaled by `shrink`, unit directions uniform on the sphere.
pub fn random_rays<const N: usize>(
    domain: &DomainBall<N>,
    count: usize,
    shrink: f64,
    seed: u64,
) -> Vec<(Point<N>, Point<N>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_ball = |rng: &mut ChaCha8Rng| loop {
        let p = Point::<N>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let r = p.norm();
        if r < 1.0 && r > 1e-3 {
            return p;
        }
    };
    (0..count)
        .map(|_| {
            let x = domain.center + in_ball(&mut rng) * (shrink * domain.radius);
            let d = in_ball(&mut rng);
            (x, d / d.norm())
        })
        .collect()
}

/// Random `(x, ξ')` probes with `x` in the ball scaled by `shrink` and `|ξ'|` in `[0.3, 1]`.
pub fn random_probes<const N: usize>(
    domain: &DomainBall<N>,
    count: usize,
    shrink: f64,
    seed: u64,
) -> Vec<(Point<N>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_rays(domain, count, shrink, seed ^ 0x5eed)
        .into_iter()
        .map(|(x, _)| {
            let xp: Vec<f64> = loop {
                let v: Vec<f64> = (1..N).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if (0.3..=1.0).contains(&r) {
                    break v;
                }
            };
            (x, xp)
        })
        .collect()
}

/// Largest distance of the traced path and velocity from `x + tξ`, `ξ`.
pub fn straight_line_deviation<const N: usize>(
    m: &MetricField<N>,
    rays: &[(Point<N>, Point<N>)],
    step: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, xi) in rays {
        let path = shoot(m, x, xi, step, 100.0 * m.domain.outer_radius())?;
        for s in &path.samples {
            worst = worst.max((s.z - (x + xi * s.t)).amax()).max((s.v - xi).amax());
        }
    }
    Ok(worst)
}

/// Largest relative discrepancy between `γ(x, cξ, t)` and `γ(x, ξ, ct)`
/// (and between the velocities, divided by `c`) over rays and scales.
pub fn homogeneity_deviation<const N: usize>(
    m: &MetricField<N>,
    rays: &[(Point<N>, Point<N>)],
    scales: &[f64],
    step: f64,
) -> Result<f64> {
    let budget = 100.0 * m.domain.outer_radius();
    let mut worst: f64 = 0.0;
    for (x, xi) in rays {
        let base = shoot(m, x, xi, step, budget)?;
        let zscale = base.samples.iter().map(|s| s.z.norm()).fold(0.0, f64::max).max(1e-12);
        let vscale = base.samples.iter().map(|s| s.v.norm()).fold(0.0, f64::max);
        for &c in scales {
            let scaled = shoot(m, x, &(xi * c), step, budget / c)?;
            if scaled.samples.len() != base.samples.len() {
                return Ok(f64::INFINITY);
            }
            for (a, b) in scaled.samples.iter().zip(&base.samples) {
                worst = worst
                    .max((a.t * c - b.t).abs() / base.exit_time.max(1e-12))
                    .max((a.z - b.z).norm() / zscale)
                    .max((a.v / c - b.v).norm() / vscale);
            }
        }
    }
    Ok(worst)
}

/// `|residual|` of the kinetic equation for each difference step.
pub fn kinetic_residuals<const N: usize>(
    m: &MetricField<N>,
    a: &SourceField<N>,
    data: &dyn RayData<N>,
    x: &Point<N>,
    xi: &Point<N>,
    steps: &[f64],
) -> Result<Vec<f64>> {
    steps
        .iter()
        .map(|&h| Ok(kinetic_residual(m, a, data, x, xi, h)?.residual.abs()))
        .collect()
}

/// Observed order `log₂(r_k / r_{k+1})` of a halving sequence, averaged over the pairs.
pub fn halving_order(residuals: &[f64]) -> f64 {
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    orders.iter().sum::<f64>() / orders.len().max(1) as f64
}

/// Relative Parseval defect `|Σ|û|²Δη − 2π Σ u²Δξ| / (2π Σ u²Δξ)` for an off-center Gaussian.
pub fn parseval_defect(window: &XiWindow) -> Result<f64> {
    let u: Vec<f64> = window.samples().iter().map(|s| (-(s - 1.0).powi(2) / 3.0).exp()).collect();
    let t = transform_grid(&u, window, Taper::None)?;
    let lhs: f64 = t.iter().map(|z| z.norm_sqr()).sum::<f64>() * window.deta();
    let rhs: f64 = 2.0 * std::f64::consts::PI * u.iter().map(|v| v * v).sum::<f64>() * window.dxi();
    Ok(((lhs - rhs) / rhs).abs())
}

/// Largest gap between the FFT and direct summation for an indicator and a
/// Gaussian, and of the Gaussian from its closed-form transform.
pub fn closed_form_defect(window: &XiWindow) -> Result<f64> {
    let xs = window.samples();
    let gauss: Vec<f64> = xs.iter().map(|s| (-s * s).exp()).collect();
    let ind: Vec<f64> = xs
        .iter()
        .map(|s| if s.abs() < 1.0 { 1.0 } else if s.abs() == 1.0 { 0.5 } else { 0.0 })
        .collect();
    let mut worst: f64 = 0.0;
    for u in [&gauss, &ind] {
        let fast = transform_grid(u, window, Taper::None)?;
        for (z, eta) in fast.iter().zip(window.eta_grid()) {
            worst = worst.max((z - transform_direct(u, window, Taper::None, eta)).norm());
        }
    }
    let fast = transform_grid(&gauss, window, Taper::None)?;
    for (z, eta) in fast.iter().zip(window.eta_grid()) {
        let exact = std::f64::consts::PI.sqrt() * (-eta * eta / 4.0).exp();
        worst = worst.max((z.re - exact).abs()).max(z.im.abs());
    }
    Ok(worst)
}

/// Transport residual at grid frequency nearest `eta` for each difference step.
pub fn transport_residuals<const N: usize>(
    m: &MetricField<N>,
    data: &dyn RayData<N>,
    x: &Point<N>,
    xi_prime: &[f64],
    eta: f64,
    steps: &[f64],
    window: &XiWindow,
) -> Result<Vec<f64>> {
    steps
        .iter()
        .map(|&h| Ok(transport_residual(m, data, x, xi_prime, eta, h, window)?.residual))
        .collect()
}

/// Settings of a characteristic-versus-difference comparison.
#[derive(Clone, Debug)]
pub struct CharacteristicProbe {
    pub window: XiWindow,
    /// `η` in units of the lattice spacing.
    pub eta_cells: Vec<f64>,
    pub h: f64,
    pub delta: f64,
    pub intervals: usize,
}

/// Largest `|∂_η q|` mismatch between the characteristic solution and a
/// difference quotient in `η`, over the probes.
pub fn characteristic_mismatch<const N: usize>(
    m: &MetricField<N>,
    data: &dyn RayData<N>,
    probes: &[(Point<N>, Vec<f64>)],
    settings: &CharacteristicProbe,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (i, (x, xp)) in probes.iter().enumerate() {
        let cells = settings.eta_cells[i % settings.eta_cells.len()];
        let eta = cells * settings.window.deta();
        let c = characteristic_deta_q(m, data, x, xp, eta, settings.h, &settings.window, settings.intervals)?;
        let fd = deta_q_finite_difference(data, x, xp, c.eta, settings.delta, &settings.window)?;
        worst = worst.max((c.value - fd).abs());
    }
    Ok(worst)
}

/// Jumps recovered from synthetic steps `v(η) = s(η) + J·H(η)` with a smooth
/// background of unit size; returns the largest error relative to `max(|J|, 1)`.
pub fn synthetic_jump_error(jumps: &[f64]) -> Result<f64> {
    let window = XiWindow::default();
    let eta = window.eta_grid();
    let d = window.deta();
    let mut worst: f64 = 0.0;
    for &j in jumps {
        let values: Vec<f64> = eta
            .iter()
            .map(|e| (0.3 * e).sin() + 0.7 * (-(e * e) / 4.0).exp() + if *e > 0.0 { j } else { 0.0 })
            .collect();
        let lim = crate::spectral::one_sided_limits(&eta, &values, 2.0 * d, 20.0 * d)?;
        let err = (lim.plus - lim.minus - j).abs() / j.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// `ρ_max · 10^{-k/2}` down to `ρ_min`.
pub fn rho_schedule(rho_min: f64, rho_max: f64) -> Result<Vec<f64>> {
    if !(rho_min > 0.0 && rho_min <= rho_max) {
        return Err(GeoError::Range(format!("need 0 < rho_min <= rho_max, got {rho_min}, {rho_max}")));
    }
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let r = rho_max * 10f64.powf(-0.5 * k as f64);
        if r < rho_min * (1.0 - 1e-9) {
            break;
        }
        out.push(r);
        k += 1;
    }
    Ok(out)
}

/// Composite 5-point Gauss-Legendre rule on `panels` equal panels.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        0.538_469_310_105_683,
        -0.538_469_310_105_683,
        0.906_179_845_938_664,
        -0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
        0.236_926_885_056_189,
    ];
    let w = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * w;
        for (x, wt) in NODES.iter().zip(WEIGHTS) {
            s += wt * f(mid + 0.5 * w * x) * 0.5 * w;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rays_are_seeded_and_inside() {
        let d = DomainBall::<2>::unit(0.1);
        let a = random_rays(&d, 20, 0.9, 3);
        assert_eq!(a, random_rays(&d, 20, 0.9, 3));
        assert_ne!(a, random_rays(&d, 20, 0.9, 4));
        for (x, xi) in a {
            assert!(x.norm() < 0.9 && (xi.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rho_schedule_half_decades() {
        let r = rho_schedule(0.01, 1.0).unwrap();
        assert_eq!(r.len(), 5);
        assert!((r[4] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn synthetic_steps_recovered() {
        assert!(synthetic_jump_error(&[1.0, -0.25, 1e-3]).unwrap() < 1e-3);
    }

    #[test]
    fn gauss_legendre_polynomial_line() {
        let q = gauss_legendre(|t| (1.0 - t * t).powi(6), 0.0, 1.0, 400);
        assert!((q - 1024.0 / 3003.0).abs() < 1e-12);
    }

    #[test]
    fn halving_order_of_pure_power() {
        assert!((halving_order(&[1.0, 0.25, 0.0625]) - 2.0).abs() < 1e-12);
    }
}
