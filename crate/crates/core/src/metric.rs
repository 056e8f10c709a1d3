//! Riemannian metrics on a ball, Christoffel symbols and metric norms.

use std::sync::Arc;

use nalgebra::{SMatrix, SVector};

use crate::error::{GeoError, Result};
use crate::numerics::halton;

pub type Point<const N: usize> = SVector<f64, N>;
pub type Mat<const N: usize> = SMatrix<f64, N, N>;

const PD_TOL: f64 = 1e-12;

/// Ball `D` with a padding shell; the metric is Euclidean beyond `radius + padding`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainBall<const N: usize> {
    pub center: Point<N>,
    pub radius: f64,
    pub padding: f64,
}

impl<const N: usize> DomainBall<N> {
    pub fn new(center: Point<N>, radius: f64, padding: f64) -> Result<Self> {
        if !(radius > 0.0) || !(padding > 0.0) {
            return Err(GeoError::Range(format!(
                "domain needs radius > 0 and padding > 0, got {radius}, {padding}"
            )));
        }
        Ok(DomainBall {
            center,
            radius,
            padding,
        })
    }

    pub fn unit(padding: f64) -> Self {
        DomainBall {
            center: Point::zeros(),
            radius: 1.0,
            padding,
        }
    }

    pub fn outer_radius(&self) -> f64 {
        self.radius + self.padding
    }

    /// `|x - c|^2 - r^2`: negative inside, zero on the boundary.
    pub fn boundary_fn(&self, x: &Point<N>) -> f64 {
        (x - self.center).norm_squared() - self.radius * self.radius
    }

    pub fn contains(&self, x: &Point<N>) -> bool {
        self.boundary_fn(x) <= 0.0
    }

    pub fn distance_to_boundary(&self, x: &Point<N>) -> f64 {
        self.radius - (x - self.center).norm()
    }
}

/// `gamma[i][(j, k)] = Γ^i_jk`.
#[derive(Clone, Copy, Debug)]
pub struct Christoffel<const N: usize> {
    pub gamma: [Mat<N>; N],
}

impl<const N: usize> Christoffel<N> {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.gamma[i][(j, k)]
    }

    pub fn max_abs(&self) -> f64 {
        self.gamma.iter().map(|m| m.amax()).fold(0.0, f64::max)
    }

    /// `Γ^i_jk v^j w^k` for each `i`.
    pub fn contract(&self, v: &Point<N>, w: &Point<N>) -> Point<N> {
        Point::from_fn(|i, _| v.dot(&(self.gamma[i] * w)))
    }

    fn from_metric(ginv: &Mat<N>, dg: &[Mat<N>; N]) -> Self {
        // lowered symbols Γ_{l,jk} = ½(∂_j g_lk + ∂_k g_lj − ∂_l g_jk)
        let mut gamma = [Mat::<N>::zeros(); N];
        for j in 0..N {
            for k in j..N {
                let lowered =
                    Point::<N>::from_fn(|l, _| 0.5 * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]));
                let raised = ginv * lowered;
                for i in 0..N {
                    gamma[i][(j, k)] = raised[i];
                    gamma[i][(k, j)] = raised[i];
                }
            }
        }
        Christoffel { gamma }
    }
}

/// Evaluator for metric components. Analytic first derivatives are optional;
/// without them central differences are used.
pub trait MetricModel<const N: usize>: Send + Sync {
    fn components(&self, x: &Point<N>) -> Mat<N>;

    /// `[∂_1 g, ..., ∂_n g]`.
    fn derivatives(&self, _x: &Point<N>) -> Option<[Mat<N>; N]> {
        None
    }

    fn label(&self) -> String {
        "custom".to_string()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Euclidean;

impl<const N: usize> MetricModel<N> for Euclidean {
    fn components(&self, _x: &Point<N>) -> Mat<N> {
        Mat::identity()
    }

    fn derivatives(&self, _x: &Point<N>) -> Option<[Mat<N>; N]> {
        Some([Mat::zeros(); N])
    }

    fn label(&self) -> String {
        "euclidean".to_string()
    }
}

/// `g = diag(1, 1+b, ..., 1+b)` with `b = A (1 - |x-c|²/R²)^p` inside the
/// support ball and `b = 0` outside. With `p = 7` the metric is C⁶.
#[derive(Clone, Copy, Debug)]
pub struct BumpMetric<const N: usize> {
    pub amplitude: f64,
    pub exponent: i32,
    pub center: Point<N>,
    pub support: f64,
}

impl<const N: usize> BumpMetric<N> {
    fn profile(&self, x: &Point<N>) -> Option<(f64, f64, Point<N>)> {
        let d = x - self.center;
        let s = d.norm_squared() / (self.support * self.support);
        if s >= 1.0 {
            return None;
        }
        let base = 1.0 - s;
        let value = self.amplitude * base.powi(self.exponent);
        // d b / d x = A p (1-s)^(p-1) (-2 d / R²)
        let slope = -2.0 * self.amplitude * self.exponent as f64 * base.powi(self.exponent - 1)
            / (self.support * self.support);
        Some((value, slope, d))
    }
}

impl<const N: usize> MetricModel<N> for BumpMetric<N> {
    fn components(&self, x: &Point<N>) -> Mat<N> {
        let mut g = Mat::identity();
        if let Some((b, _, _)) = self.profile(x) {
            for k in 1..N {
                g[(k, k)] += b;
            }
        }
        g
    }

    fn derivatives(&self, x: &Point<N>) -> Option<[Mat<N>; N]> {
        let mut dg = [Mat::zeros(); N];
        if let Some((_, slope, d)) = self.profile(x) {
            for (m, dm) in dg.iter_mut().enumerate() {
                for k in 1..N {
                    dm[(k, k)] = slope * d[m];
                }
            }
        }
        Some(dg)
    }

    fn label(&self) -> String {
        format!("bump(A={}, p={})", self.amplitude, self.exponent)
    }
}

/// Metric given only by a component closure; derivatives by central differences.
pub struct FnMetric<F> {
    pub f: F,
    pub name: String,
}

impl<const N: usize, F> MetricModel<N> for FnMetric<F>
where
    F: Fn(&Point<N>) -> Mat<N> + Send + Sync,
{
    fn components(&self, x: &Point<N>) -> Mat<N> {
        (self.f)(x)
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

#[derive(Clone)]
pub struct MetricField<const N: usize> {
    model: Arc<dyn MetricModel<N>>,
    pub domain: DomainBall<N>,
}

impl<const N: usize> std::fmt::Debug for MetricField<N> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricField")
            .field("model", &self.model.label())
            .field("domain", &self.domain)
            .finish()
    }
}

impl<const N: usize> MetricField<N> {
    pub fn new(model: Arc<dyn MetricModel<N>>, domain: DomainBall<N>) -> Self {
        MetricField { model, domain }
    }

    pub fn euclidean(domain: DomainBall<N>) -> Self {
        Self::new(Arc::new(Euclidean), domain)
    }

    /// Bump perturbation supported on the domain ball itself.
    pub fn bump(domain: DomainBall<N>, amplitude: f64, exponent: i32) -> Self {
        Self::new(
            Arc::new(BumpMetric {
                amplitude,
                exponent,
                center: domain.center,
                support: domain.radius,
            }),
            domain,
        )
    }

    pub fn dim(&self) -> usize {
        N
    }

    pub fn label(&self) -> String {
        self.model.label()
    }

    fn outside(&self, x: &Point<N>) -> bool {
        (x - self.domain.center).norm() >= self.domain.outer_radius()
    }

    /// Raw components without validation, identity beyond the padded ball.
    pub fn components(&self, x: &Point<N>) -> Mat<N> {
        if self.outside(x) {
            Mat::identity()
        } else {
            self.model.components(x)
        }
    }

    pub fn derivatives(&self, x: &Point<N>) -> [Mat<N>; N] {
        if self.outside(x) {
            return [Mat::zeros(); N];
        }
        if let Some(d) = self.model.derivatives(x) {
            return d;
        }
        let h = 1e-6 * x.norm().max(1.0);
        let mut out = [Mat::zeros(); N];
        for (k, dk) in out.iter_mut().enumerate() {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            *dk = (self.model.components(&xp) - self.model.components(&xm)) / (2.0 * h);
        }
        out
    }

    /// `(g(x), g(x)^{-1})`, rejecting non-positive-definite evaluations.
    pub fn metric_at(&self, x: &Point<N>) -> Result<(Mat<N>, Mat<N>)> {
        let g = self.components(x);
        check_spd(&g, x)?;
        let ginv = g.try_inverse().ok_or_else(|| invalid(x, "singular"))?;
        Ok((g, ginv))
    }

    pub fn christoffel_at(&self, x: &Point<N>) -> Result<Christoffel<N>> {
        let (_, ginv) = self.metric_at(x)?;
        Ok(Christoffel::from_metric(&ginv, &self.derivatives(x)))
    }

    /// Geodesic acceleration `-Γ^i_jk v^j v^k`.
    pub fn acceleration(&self, x: &Point<N>, v: &Point<N>) -> Result<Point<N>> {
        if self.outside(x) {
            return Ok(Point::zeros());
        }
        let dg = self.derivatives(x);
        if dg.iter().all(|m| m.amax() == 0.0) {
            return Ok(Point::zeros());
        }
        // w_l = 2 v^j (∂_j g v)_l - v·∂_l g v  is twice the lowered contraction
        let mut w = Point::<N>::zeros();
        for j in 0..N {
            w += (dg[j] * v) * (2.0 * v[j]);
        }
        for l in 0..N {
            w[l] -= v.dot(&(dg[l] * v));
        }
        let g = self.model.components(x);
        let chol = g.cholesky().ok_or_else(|| invalid(x, "not positive definite"))?;
        Ok(chol.solve(&w) * -0.5)
    }

    /// `|ξ|_g = sqrt(g_ij ξ^i ξ^j)`.
    pub fn norm(&self, x: &Point<N>, xi: &Point<N>) -> Result<f64> {
        let (g, _) = self.metric_at(x)?;
        Ok(xi.dot(&(g * xi)).sqrt())
    }
}

fn invalid<const N: usize>(x: &Point<N>, reason: &str) -> GeoError {
    GeoError::InvalidMetric {
        at: format!("{:?}", x.as_slice()),
        reason: reason.to_string(),
    }
}

fn check_spd<const N: usize>(g: &Mat<N>, x: &Point<N>) -> Result<()> {
    let asym = (g - g.transpose()).amax();
    if asym > PD_TOL * g.amax().max(1.0) {
        return Err(invalid(x, "not symmetric"));
    }
    for k in 1..=N {
        let minor = g.view((0, 0), (k, k)).determinant();
        if minor <= PD_TOL {
            return Err(invalid(x, &format!("leading minor {k} is {minor:e}")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SemiGeodesicReport {
    pub pass: bool,
    pub max_violation: f64,
    pub samples: usize,
}

/// Checks `g_11 = 1`, `g_1i = 0` on a quasi-random sample of the padded ball
/// plus its center.
pub fn validate_semi_geodesic<const N: usize>(
    m: &MetricField<N>,
    samples: usize,
    tol: f64,
) -> Result<SemiGeodesicReport> {
    let mut worst: f64 = 0.0;
    let outer = m.domain.outer_radius();
    let mut points = vec![m.domain.center];
    let mut i = 0;
    while points.len() < samples.max(1) {
        let u = halton(i, N);
        i += 1;
        let p = Point::<N>::from_fn(|k, _| 2.0 * u[k] - 1.0);
        if p.norm() < 1.0 {
            points.push(m.domain.center + p * outer);
        }
    }
    for x in &points {
        let (g, _) = m.metric_at(x)?;
        worst = worst.max((g[(0, 0)] - 1.0).abs());
        for k in 1..N {
            worst = worst.max(g[(0, k)].abs()).max(g[(k, 0)].abs());
        }
    }
    Ok(SemiGeodesicReport {
        pass: worst <= tol,
        max_violation: worst,
        samples: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    #[allow(unused_imports)]
    use nalgebra::{Vector2, Vector3};
    use proptest::prelude::*;

    fn m1() -> MetricField<2> {
        MetricField::bump(DomainBall::unit(0.1), 0.3, 7)
    }

    #[test]
    fn euclidean_metric_is_identity() {
        let m = MetricField::<2>::euclidean(DomainBall::unit(0.1));
        let (g, gi) = m.metric_at(&Vector2::new(0.3, -0.2)).unwrap();
        assert_eq!(g, Mat::<2>::identity());
        assert_eq!(gi, Mat::<2>::identity());
        assert_eq!(m.christoffel_at(&Vector2::new(0.3, 0.1)).unwrap().max_abs(), 0.0);
        assert_eq!(m.norm(&Point::zeros(), &Vector2::new(3.0, 4.0)).unwrap(), 5.0);
    }

    #[test]
    fn m1_at_origin() {
        let m = m1();
        let (g, gi) = m.metric_at(&Point::zeros()).unwrap();
        assert_eq!(g, Mat::from_diagonal(&Vector2::new(1.0, 1.3)));
        assert!((gi[(1, 1)] - 1.0 / 1.3).abs() < 1e-15);
        assert!((g * gi - Mat::identity()).amax() < 1e-12);
        assert_eq!(m.christoffel_at(&Point::zeros()).unwrap().max_abs(), 0.0);
        let n = m.norm(&Point::zeros(), &Vector2::new(0.0, 1.0)).unwrap();
        assert!((n - 1.3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn m1_component_matches_polynomial_oracle() {
        // (1 - 0.25)^7 expanded by the binomial theorem
        let s: f64 = 0.25;
        let mut oracle = 0.0;
        let binom = [1.0, 7.0, 21.0, 35.0, 35.0, 21.0, 7.0, 1.0];
        for (k, c) in binom.iter().enumerate() {
            oracle += c * (-s).powi(k as i32);
        }
        let (g, _) = m1().metric_at(&Vector2::new(0.0, 0.5)).unwrap();
        assert!((g[(1, 1)] - (1.0 + 0.3 * oracle)).abs() < 1e-15);
        assert!((oracle - 0.133_483_886_718_75).abs() < 1e-15);
    }

    #[test]
    fn christoffel_matches_finite_difference_oracle() {
        let m = m1();
        let x = Vector2::new(0.0, 0.5);
        let gamma = m.christoffel_at(&x).unwrap();
        let h = 1e-5;
        let g = |p: &Point<2>| m.components(p);
        let mut dg = [Mat::<2>::zeros(); 2];
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            dg[k] = (g(&xp) - g(&xm)) / (2.0 * h);
        }
        let ginv = g(&x).try_inverse().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut s = 0.0;
                    for l in 0..2 {
                        s += 0.5 * ginv[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                    }
                    assert!((gamma.get(i, j, k) - s).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn fd_fallback_agrees_with_analytic() {
        let bump = BumpMetric::<3> {
            amplitude: 0.3,
            exponent: 7,
            center: Point::zeros(),
            support: 1.0,
        };
        let analytic = MetricField::new(Arc::new(bump), DomainBall::unit(0.1));
        let fd = MetricField::new(
            Arc::new(FnMetric {
                f: move |x: &Point<3>| bump.components(x),
                name: "fd".into(),
            }),
            DomainBall::unit(0.1),
        );
        let x = Vector3::new(0.2, -0.3, 0.4);
        let a = analytic.christoffel_at(&x).unwrap();
        let b = fd.christoffel_at(&x).unwrap();
        for i in 0..3 {
            assert!((a.gamma[i] - b.gamma[i]).amax() < 1e-8);
        }
    }

    #[test]
    fn semi_geodesic_validation() {
        let e = MetricField::<2>::euclidean(DomainBall::unit(0.1));
        let r = validate_semi_geodesic(&e, 64, 1e-12).unwrap();
        assert!(r.pass && r.max_violation == 0.0);
        assert!(validate_semi_geodesic(&m1(), 64, 1e-12).unwrap().pass);
        let bad = MetricField::new(
            Arc::new(FnMetric {
                f: |_x: &Point<2>| nalgebra::Matrix2::new(1.0, 0.1, 0.1, 1.0),
                name: "tilted".into(),
            }),
            DomainBall::unit(0.1),
        );
        let r = validate_semi_geodesic(&bad, 16, 1e-12).unwrap();
        assert!(!r.pass);
        assert!((r.max_violation - 0.1).abs() < 1e-15);
    }

    #[test]
    fn non_positive_definite_is_rejected() {
        let bad = MetricField::new(
            Arc::new(FnMetric {
                f: |_x: &Point<2>| nalgebra::Matrix2::new(1.0, 0.0, 0.0, -1.0),
                name: "lorentz".into(),
            }),
            DomainBall::unit(0.1),
        );
        assert!(matches!(
            bad.metric_at(&Point::zeros()),
            Err(GeoError::InvalidMetric { .. })
        ));
    }

    #[test]
    fn acceleration_matches_christoffel_contraction() {
        let m = m1();
        let x = Vector2::new(0.3, -0.4);
        let v = Vector2::new(0.7, 1.1);
        let a = m.acceleration(&x, &v).unwrap();
        let b = -m.christoffel_at(&x).unwrap().contract(&v, &v);
        assert!((a - b).amax() < 1e-14);
    }

    proptest! {
        #[test]
        fn christoffel_symmetric_and_semi_geodesic(
            x0 in -1.05f64..1.05, x1 in -1.05f64..1.05,
        ) {
            let m = m1();
            let g = m.christoffel_at(&Vector2::new(x0, x1)).unwrap();
            for i in 0..2 {
                prop_assert!((g.gamma[i] - g.gamma[i].transpose()).amax() == 0.0);
            }
            for k in 0..2 {
                prop_assert!(g.get(0, 0, k).abs() < 1e-10);
                prop_assert!(g.get(k, 0, 0).abs() < 1e-10);
            }
        }

        #[test]
        fn zero_christoffel_outside_outer_ball(angle in 0.0f64..std::f64::consts::TAU, r in 1.1f64..3.0) {
            let m = m1();
            let x = Vector2::new(r * angle.cos(), r * angle.sin());
            prop_assert!(m.christoffel_at(&x).unwrap().max_abs() < 1e-12);
        }

        #[test]
        fn norm_is_homogeneous(
            x0 in -0.9f64..0.9, x1 in -0.4f64..0.4,
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -5.0f64..5.0,
        ) {
            let m = m1();
            let x = Vector2::new(x0, x1);
            let xi = Vector2::new(a, b);
            let lhs = m.norm(&x, &(xi * c)).unwrap();
            let rhs = c.abs() * m.norm(&x, &xi).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }
    }
}
