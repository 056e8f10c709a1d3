//! Symmetric tensor sources `a_ij`, `2 <= i,j <= n`, compactly supported in `D`.

use std::sync::Arc;

use crate::error::{GeoError, Result};
use crate::metric::{Mat, Point};

/// User evaluator; the returned matrix is symmetrized and its first row and
/// column are cleared before use.
pub type SourceFn<const N: usize> = Arc<dyn Fn(&Point<N>) -> Mat<N> + Send + Sync>;

#[derive(Clone)]
pub enum SourceKind<const N: usize> {
    Zero,
    /// `c (1 - |x-c0|²/r²)^p`.
    Bump { coefficients: Mat<N>, exponent: u32 },
    Custom(SourceFn<N>),
}

#[derive(Clone)]
pub struct SourceField<const N: usize> {
    pub kind: SourceKind<N>,
    pub center: Point<N>,
    pub support_radius: f64,
}

impl<const N: usize> std::fmt::Debug for SourceField<N> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            SourceKind::Zero => "zero".to_string(),
            SourceKind::Bump { coefficients, exponent } => {
                format!("bump(p={exponent}, c={:?})", coefficients.as_slice())
            }
            SourceKind::Custom(_) => "custom".to_string(),
        };
        write!(f, "SourceField({kind}, r={})", self.support_radius)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceSample<const N: usize> {
    /// Full `n x n` matrix with vanishing first row and column.
    pub matrix: Mat<N>,
    /// `Σ_{i,j>=2} a_ij ξ^i ξ^j`.
    pub quadratic: f64,
}

impl<const N: usize> SourceField<N> {
    pub fn zero() -> Self {
        SourceField {
            kind: SourceKind::Zero,
            center: Point::zeros(),
            support_radius: 0.0,
        }
    }

    /// `coefficients` is the `(n-1) x (n-1)` block in row-major order.
    pub fn bump(coefficients: &[f64], support_radius: f64, exponent: u32) -> Result<Self> {
        Self::bump_at(Point::zeros(), coefficients, support_radius, exponent)
    }

    pub fn bump_at(
        center: Point<N>,
        coefficients: &[f64],
        support_radius: f64,
        exponent: u32,
    ) -> Result<Self> {
        if exponent < 6 {
            return Err(GeoError::Smoothness { exponent });
        }
        let k = N - 1;
        if coefficients.len() != k * k {
            return Err(GeoError::Range(format!(
                "expected {} coefficients, got {}",
                k * k,
                coefficients.len()
            )));
        }
        if !(support_radius > 0.0) {
            return Err(GeoError::Range("support radius must be positive".into()));
        }
        let mut c = Mat::<N>::zeros();
        for i in 0..k {
            for j in 0..k {
                c[(i + 1, j + 1)] = coefficients[i * k + j];
            }
        }
        if c != c.transpose() {
            return Err(GeoError::Range("coefficient block is not symmetric".into()));
        }
        Ok(SourceField {
            kind: SourceKind::Bump {
                coefficients: c,
                exponent,
            },
            center,
            support_radius,
        })
    }

    /// Wraps a user evaluator that declares its own support ball.
    pub fn custom(f: SourceFn<N>, center: Point<N>, support_radius: f64) -> Self {
        SourceField {
            kind: SourceKind::Custom(f),
            center,
            support_radius,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, SourceKind::Zero)
    }

    /// True when `x` is outside the closed support ball.
    pub fn outside_support(&self, x: &Point<N>) -> bool {
        self.is_zero() || (x - self.center).norm_squared() >= self.support_radius * self.support_radius
    }

    pub fn matrix(&self, x: &Point<N>) -> Mat<N> {
        if self.outside_support(x) {
            return Mat::zeros();
        }
        match &self.kind {
            SourceKind::Zero => Mat::zeros(),
            SourceKind::Bump {
                coefficients,
                exponent,
            } => {
                let s = (x - self.center).norm_squared() / (self.support_radius * self.support_radius);
                coefficients * (1.0 - s).powi(*exponent as i32)
            }
            SourceKind::Custom(f) => {
                let raw = f(x);
                let mut a = (raw + raw.transpose()) * 0.5;
                for k in 0..N {
                    a[(0, k)] = 0.0;
                    a[(k, 0)] = 0.0;
                }
                a
            }
        }
    }

    /// `Σ_{i,j>=2} a_ij(x) v^i v^j`; the first component of `v` is ignored.
    pub fn quadratic(&self, x: &Point<N>, v: &Point<N>) -> f64 {
        if self.outside_support(x) {
            return 0.0;
        }
        v.dot(&(self.matrix(x) * v))
    }

    /// Matrix and quadratic form for the transverse direction `ξ' = (ξ^2..ξ^n)`.
    pub fn eval(&self, x: &Point<N>, xi_prime: &[f64]) -> SourceSample<N> {
        assert_eq!(xi_prime.len(), N - 1);
        let mut v = Point::<N>::zeros();
        for k in 1..N {
            v[k] = xi_prime[k - 1];
        }
        let matrix = self.matrix(x);
        SourceSample {
            matrix,
            quadratic: v.dot(&(matrix * v)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    #[allow(unused_imports)]
    use nalgebra::{Vector2, Vector3};
    use proptest::prelude::*;

    fn unit_bump() -> SourceField<2> {
        SourceField::bump(&[1.0], 1.0, 6).unwrap()
    }

    #[test]
    fn bump_center_and_boundary() {
        let a = unit_bump();
        assert_eq!(a.matrix(&Point::zeros())[(1, 1)], 1.0);
        assert_eq!(a.matrix(&Vector2::new(0.6, 0.8)), Mat::<2>::zeros());
        // independent evaluation of (1 - 0.25)^6
        let v = a.matrix(&Vector2::new(0.0, 0.5))[(1, 1)];
        assert!((v - 0.177978515625).abs() < 1e-15);
    }

    #[test]
    fn derivatives_vanish_through_support_boundary() {
        // radial profile f(r) = (1 - r²)^6 for r < 1, 0 beyond
        let a = unit_bump();
        let f = |r: f64| a.matrix(&Vector2::new(r, 0.0))[(1, 1)];
        let h = 1e-12;
        for order in 1..=5u32 {
            // forward difference of the given order centered on r = 1
            let mut d = 0.0;
            for k in 0..=order {
                let binom = (0..k).fold(1.0, |acc, j| acc * (order - j) as f64 / (j + 1) as f64);
                let sign = if (order - k) % 2 == 0 { 1.0 } else { -1.0 };
                d += sign * binom * f(1.0 + (k as f64 - order as f64 / 2.0) * h);
            }
            let deriv = d / h.powi(order as i32);
            assert!(deriv.abs() < 1e-6, "order {order}: {deriv:e}");
        }
    }

    #[test]
    fn exponent_below_six_rejected() {
        assert!(matches!(
            SourceField::<2>::bump(&[1.0], 1.0, 5),
            Err(GeoError::Smoothness { exponent: 5 })
        ));
    }

    #[test]
    fn asymmetric_coefficients_rejected() {
        assert!(SourceField::<3>::bump(&[1.0, 0.5, 0.4, 1.0], 1.0, 6).is_err());
    }

    #[test]
    fn quadratic_forms() {
        assert_eq!(SourceField::<2>::zero().eval(&Point::zeros(), &[0.3]).quadratic, 0.0);
        let eps = 0.1;
        let q = unit_bump().eval(&Point::zeros(), &[eps]).quadratic;
        assert!((q - eps * eps).abs() < 1e-16);
        let off = SourceField::<3>::bump(&[0.0, 1.0, 1.0, 0.0], 1.0, 6).unwrap();
        let q = off.eval(&Point::zeros(), &[eps, eps]).quadratic;
        assert!((q - 2.0 * eps * eps).abs() < 1e-16);
    }

    #[test]
    fn custom_sources_are_cleaned() {
        let f: SourceFn<2> = Arc::new(|_x| nalgebra::Matrix2::new(5.0, 1.0, 2.0, 3.0));
        let a = SourceField::custom(f, Point::zeros(), 0.5);
        let m = a.matrix(&Vector2::new(0.1, 0.0));
        assert_eq!(m, nalgebra::Matrix2::new(0.0, 0.0, 0.0, 3.0));
        assert_eq!(a.matrix(&Vector2::new(0.5, 0.0)), Mat::<2>::zeros());
    }

    proptest! {
        #[test]
        fn symmetric_supported_and_quadratic(
            x0 in -1.5f64..1.5, x1 in -1.5f64..1.5, x2 in -1.5f64..1.5,
            e0 in -2.0f64..2.0, e1 in -2.0f64..2.0, c in -4.0f64..4.0,
        ) {
            let a = SourceField::<3>::bump(&[1.0, 0.3, 0.3, -0.7], 0.9, 6).unwrap();
            let x = Vector3::new(x0, x1, x2);
            let m = a.matrix(&x);
            prop_assert_eq!(m, m.transpose());
            if x.norm() >= 0.9 {
                prop_assert_eq!(m, Mat::<3>::zeros());
            }
            let q1 = a.eval(&x, &[e0, e1]).quadratic;
            let qc = a.eval(&x, &[c * e0, c * e1]).quadratic;
            prop_assert!((qc - c * c * q1).abs() <= 1e-12 * (1.0 + qc.abs()));
        }
    }
}
