//! Geodesic integration with exit detection, and two-point shooting.

use nalgebra::DVector;

use crate::error::{GeoError, Result};
use crate::metric::{MetricField, Point};
use crate::numerics::{gauss_newton, NewtonOptions};

const BISECTION_ITERS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseState<const N: usize> {
    pub t: f64,
    pub z: Point<N>,
    pub v: Point<N>,
}

#[derive(Clone, Debug)]
pub struct GeodesicPath<const N: usize> {
    pub start: Point<N>,
    pub direction: Point<N>,
    /// Time step between consecutive uniform samples.
    pub dt: f64,
    /// Uniform samples at `k * dt` followed by the exit sample.
    pub samples: Vec<PhaseState<N>>,
    pub exit_time: f64,
}

impl<const N: usize> GeodesicPath<N> {
    pub fn exit_state(&self) -> &PhaseState<N> {
        self.samples.last().expect("path always holds its start")
    }

    pub fn exit_point(&self) -> Point<N> {
        self.exit_state().z
    }
}

/// One classical Runge-Kutta step of `z'' = -Γ(z)(z', z')`.
pub fn rk4_step<const N: usize>(
    m: &MetricField<N>,
    s: &PhaseState<N>,
    dt: f64,
) -> Result<PhaseState<N>> {
    let (z, v) = (s.z, s.v);
    let a1 = m.acceleration(&z, &v)?;
    let z2 = z + v * (0.5 * dt);
    let v2 = v + a1 * (0.5 * dt);
    let a2 = m.acceleration(&z2, &v2)?;
    let z3 = z + v2 * (0.5 * dt);
    let v3 = v + a2 * (0.5 * dt);
    let a3 = m.acceleration(&z3, &v3)?;
    let z4 = z + v3 * dt;
    let v4 = v + a3 * dt;
    let a4 = m.acceleration(&z4, &v4)?;
    Ok(PhaseState {
        t: s.t + dt,
        z: z + (v + v2 * 2.0 + v3 * 2.0 + v4) * (dt / 6.0),
        v: v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0),
    })
}

/// Integrates `steps` fixed steps up to time `t_end` without exit detection.
pub fn evolve<const N: usize>(
    m: &MetricField<N>,
    x: &Point<N>,
    v: &Point<N>,
    t_end: f64,
    steps: usize,
) -> Result<PhaseState<N>> {
    let dt = t_end / steps as f64;
    let mut s = PhaseState { t: 0.0, z: *x, v: *v };
    for k in 0..steps {
        s = rk4_step(m, &s, dt)?;
        s.t = (k + 1) as f64 * dt;
    }
    Ok(s)
}

/// Default arclength step: `1e-3` of the domain radius.
pub fn default_step<const N: usize>(m: &MetricField<N>) -> f64 {
    1e-3 * m.domain.radius
}

/// Time step that advances `step` units of metric arclength for initial data `(x, ξ)`.
pub fn time_step<const N: usize>(
    m: &MetricField<N>,
    x: &Point<N>,
    xi: &Point<N>,
    step: f64,
) -> Result<f64> {
    if xi.iter().all(|c| *c == 0.0) {
        return Err(GeoError::ZeroDirection);
    }
    if !(step > 0.0) {
        return Err(GeoError::Range(format!("step must be positive, got {step}")));
    }
    Ok(step / m.norm(x, xi)?)
}

/// Time budget covering ten outer diameters of arclength.
pub fn default_budget<const N: usize>(m: &MetricField<N>, x: &Point<N>, xi: &Point<N>) -> Result<f64> {
    Ok(20.0 * m.domain.outer_radius() / m.norm(x, xi)?)
}

/// Walks the geodesic from `(x, ξ)` with time step `dt`, calling `visit` on
/// every uniform sample and finally on the exit sample, which is returned.
pub(crate) fn trace<const N: usize, F>(
    m: &MetricField<N>,
    x: &Point<N>,
    xi: &Point<N>,
    dt: f64,
    budget: f64,
    mut visit: F,
) -> Result<PhaseState<N>>
where
    F: FnMut(&PhaseState<N>),
{
    let dom = &m.domain;
    let radial = |s: &PhaseState<N>| (s.z - dom.center).dot(&s.v);
    let mut s = PhaseState { t: 0.0, z: *x, v: *xi };
    visit(&s);
    let mut inside = dom.boundary_fn(x) <= 0.0;
    if !inside && radial(&s) >= 0.0 {
        return Ok(s);
    }
    let mut k = 0usize;
    loop {
        if s.t > budget {
            return Err(GeoError::NonExit { budget });
        }
        let mut next = rk4_step(m, &s, dt)?;
        k += 1;
        next.t = k as f64 * dt;
        let phi = dom.boundary_fn(&next.z);
        if inside && phi > 0.0 {
            let exit = bisect_exit(m, &s, dt)?;
            visit(&exit);
            return Ok(exit);
        }
        if !inside {
            if phi <= 0.0 {
                inside = true;
            } else if radial(&next) >= 0.0 {
                visit(&next);
                return Ok(next);
            }
        }
        visit(&next);
        s = next;
    }
}

fn bisect_exit<const N: usize>(
    m: &MetricField<N>,
    s: &PhaseState<N>,
    dt: f64,
) -> Result<PhaseState<N>> {
    let (mut lo, mut hi) = (0.0, dt);
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let trial = rk4_step(m, s, mid)?;
        if m.domain.boundary_fn(&trial.z) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut exit = rk4_step(m, s, tau)?;
    exit.t = s.t + tau;
    Ok(exit)
}

/// Integrates the geodesic with initial data `(x, ξ)` until it leaves `D`.
///
/// `step` is an arclength; the time step is `step / |ξ|_g`, so shooting with
/// `cξ` reproduces the same points at times divided by `c`. `budget` is in time units.
pub fn shoot<const N: usize>(
    m: &MetricField<N>,
    x: &Point<N>,
    xi: &Point<N>,
    step: f64,
    budget: f64,
) -> Result<GeodesicPath<N>> {
    let dt = time_step(m, x, xi, step)?;
    let mut samples = Vec::new();
    let exit = trace(m, x, xi, dt, budget, |s| samples.push(*s))?;
    Ok(GeodesicPath {
        start: *x,
        direction: *xi,
        dt,
        samples,
        exit_time: exit.t,
    })
}

/// Euclidean orthonormal basis of the complement of `d`.
fn transverse_basis<const N: usize>(d: &Point<N>) -> Vec<Point<N>> {
    let u = d.normalize();
    let mut basis: Vec<Point<N>> = Vec::with_capacity(N - 1);
    for k in 0..N {
        let mut e = Point::<N>::zeros();
        e[k] = 1.0;
        let mut w = e - u * u.dot(&e);
        for b in &basis {
            w -= b * b.dot(&w);
        }
        if w.norm() > 1e-6 && basis.len() < N - 1 {
            basis.push(w.normalize());
        }
    }
    basis
}

/// Finds the geodesic from `x` whose exit point is `y`, parameterized by arclength.
pub fn connect<const N: usize>(
    m: &MetricField<N>,
    x: &Point<N>,
    y: &Point<N>,
    step: f64,
) -> Result<GeodesicPath<N>> {
    let chord = y - x;
    if chord.norm() == 0.0 {
        return Err(GeoError::ZeroDirection);
    }
    let d0 = chord.normalize();
    let basis = transverse_basis(&d0);
    let budget = 20.0 * m.domain.outer_radius();
    let direction = |alpha: &DVector<f64>| -> Result<Point<N>> {
        let mut d = d0;
        for (b, a) in basis.iter().zip(alpha.iter()) {
            d += b * *a;
        }
        Ok(d / m.norm(x, &d)?)
    };
    let miss = |alpha: &DVector<f64>| -> Result<DVector<f64>> {
        let nu = direction(alpha)?;
        let dt = time_step(m, x, &nu, step)?;
        let exit = trace(m, x, &nu, dt, budget, |_| {})?;
        Ok(DVector::from_iterator(N, (exit.z - y).iter().copied()))
    };
    let opts = NewtonOptions {
        tol: 1e-9,
        ..NewtonOptions::default()
    };
    let alpha = gauss_newton(miss, DVector::zeros(N - 1), &opts)?;
    shoot(m, x, &direction(&alpha)?, step, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    #[allow(unused_imports)]
    use nalgebra::{Vector2, Vector3};
    use crate::metric::DomainBall;
    use proptest::prelude::*;

    fn euclid() -> MetricField<2> {
        MetricField::euclidean(DomainBall::unit(0.1))
    }

    fn m1() -> MetricField<2> {
        MetricField::bump(DomainBall::unit(0.1), 0.3, 7)
    }

    #[test]
    fn euclidean_straight_line() {
        let m = euclid();
        let p = shoot(&m, &Point::zeros(), &Vector2::new(1.0, 0.0), 1e-3, 10.0).unwrap();
        let s = p.samples[500];
        assert!((s.t - 0.5).abs() < 1e-15);
        assert!((s.z - Vector2::new(0.5, 0.0)).amax() < 1e-15);
        assert_eq!(s.v, Vector2::new(1.0, 0.0));
        assert!((p.exit_time - 1.0).abs() < 1e-12);
        assert!(m.domain.boundary_fn(&p.exit_point()).abs() < 1e-12);
    }

    #[test]
    fn m1_path_matches_step_halved_reference() {
        let m = m1();
        let x = Vector2::new(0.0, -0.9);
        let xi = Vector2::new(0.0, 1.0);
        // tilt a little so the path bends
        let xi = xi + Vector2::new(0.3, 0.0);
        let coarse = shoot(&m, &x, &xi, 1e-3, 10.0).unwrap();
        let fine = shoot(&m, &x, &xi, 5e-4, 10.0).unwrap();
        let n = coarse.samples.len() - 1;
        for k in 0..n {
            let d = (coarse.samples[k].z - fine.samples[2 * k].z).amax();
            assert!(d < 1e-8, "k={k} d={d:e}");
        }
        assert!((coarse.exit_time - fine.exit_time).abs() < 1e-8);
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let m = m1();
        let x = Vector2::new(-0.2, -0.3);
        let v = Vector2::new(0.6, 0.9);
        let t = 1.0;
        let e = |steps| evolve(&m, &x, &v, t, steps).unwrap().z;
        let (a, b, c) = (e(20), e(40), e(80));
        let order = ((a - b).norm() / (b - c).norm()).log2();
        assert!((order - 4.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn speed_is_conserved() {
        let m = m1();
        let p = shoot(&m, &Vector2::new(-0.5, -0.5), &Vector2::new(0.4, 1.0), 1e-3, 10.0).unwrap();
        let v0 = m.norm(&p.start, &p.direction).unwrap();
        for s in &p.samples {
            let v = m.norm(&s.z, &s.v).unwrap();
            assert!(((v - v0) / v0).abs() < 1e-8);
        }
    }

    #[test]
    fn axis_parallel_rays_stay_straight() {
        let m = m1();
        for x2 in [-0.6, -0.1, 0.0, 0.35] {
            let p = shoot(&m, &Vector2::new(-0.3, x2), &Vector2::new(2.0, 0.0), 1e-3, 10.0).unwrap();
            for s in &p.samples {
                assert!(s.v[1].abs() < 1e-9 && (s.z[1] - x2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn outward_start_outside_exits_immediately() {
        let p = shoot(&euclid(), &Vector2::new(1.02, 0.0), &Vector2::new(1.0, 0.0), 1e-3, 10.0).unwrap();
        assert_eq!(p.exit_time, 0.0);
        assert_eq!(p.samples.len(), 1);
    }

    #[test]
    fn zero_direction_rejected() {
        assert!(matches!(
            shoot(&euclid(), &Point::zeros(), &Point::zeros(), 1e-3, 10.0),
            Err(GeoError::ZeroDirection)
        ));
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        assert!(matches!(
            shoot(&euclid(), &Point::zeros(), &Vector2::new(1.0, 0.0), 1e-3, 0.5),
            Err(GeoError::NonExit { .. })
        ));
    }

    #[test]
    fn connect_diameter() {
        let p = connect(&euclid(), &Vector2::new(-1.0, 0.0), &Vector2::new(1.0, 0.0), 1e-3).unwrap();
        assert!((p.exit_time - 2.0).abs() < 1e-9);
        assert!((p.exit_point() - Vector2::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn connect_m1_against_direction_scan() {
        let m = m1();
        let x = Vector2::new(-1.0, 0.0);
        let y = Vector2::new(0.0, 1.0);
        let p = connect(&m, &x, &y, 1e-3).unwrap();
        assert!((p.exit_point() - y).norm() < 1e-8);
        assert!(p.exit_time > 2f64.sqrt());
        // dense scan of unit-speed directions brackets the angle of the solution
        let angle = |th: f64| {
            let d = Vector2::new(th.cos(), th.sin());
            let d = d / m.norm(&x, &d).unwrap();
            let e = shoot(&m, &x, &d, 1e-3, 20.0).unwrap().exit_point();
            e[1].atan2(e[0]) - std::f64::consts::FRAC_PI_2
        };
        let mut best = (f64::INFINITY, 0.0);
        let k = 200;
        for i in 1..k {
            let th = -1.5 + 3.0 * i as f64 / k as f64;
            let r = angle(th).abs();
            if r < best.0 {
                best = (r, th);
            }
        }
        let got = p.direction[1].atan2(p.direction[0]);
        assert!((got - best.1).abs() <= 3.0 / k as f64);
        // round trip
        let again = shoot(&m, &x, &p.direction, 1e-3, 20.0).unwrap();
        assert!((again.exit_point() - y).norm() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn homogeneity_of_paths(
            r in 0.0f64..0.9, th in 0.0f64..std::f64::consts::TAU, phi in 0.0f64..std::f64::consts::TAU,
            ci in 0usize..3,
        ) {
            let c = [0.5, 2.0, 10.0][ci];
            let m = m1();
            let x = Vector2::new(r * th.cos(), r * th.sin());
            let xi = Vector2::new(phi.cos(), phi.sin());
            let a = shoot(&m, &x, &(xi * c), 1e-3, 100.0).unwrap();
            let b = shoot(&m, &x, &xi, 1e-3, 100.0).unwrap();
            prop_assert_eq!(a.samples.len(), b.samples.len());
            for (sa, sb) in a.samples.iter().zip(&b.samples) {
                prop_assert!((sa.t * c - sb.t).abs() < 1e-9);
                prop_assert!((sa.z - sb.z).amax() < 1e-7);
                prop_assert!((sa.v - sb.v * c).amax() < 1e-7 * c);
            }
        }
    }
}
