//! Riemannian normal coordinates `x(y) = exp_c(y)` around a center point.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{GeoError, Result};
use crate::geodesic::evolve;
use crate::metric::{Christoffel, Mat, MetricField, Point};
use crate::numerics::{gauss_newton, NewtonOptions};
use crate::ray::{with_xi1, RayData};
use crate::source::SourceField;

/// Fixed step count for the exponential map, so `x(y)` is smooth in `y`.
const EXP_STEPS: usize = 256;
const JAC_STEP: f64 = 1e-5;
const CHRISTOFFEL_STEP: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct NormalChart<const N: usize> {
    pub metric: MetricField<N>,
    pub center: Point<N>,
    /// Largest `|y|` for which the chart is used.
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartDirection {
    ToNormal,
    FromNormal,
}

/// Builds the normal chart at `center` and checks its defining properties
/// (`x(0) = center`, nonsingular Jacobian, `Γ̃(0) = 0`) to within `tol`.
pub fn build_chart<const N: usize>(
    m: &MetricField<N>,
    center: &Point<N>,
    tol: f64,
) -> Result<NormalChart<N>> {
    let dist = m.domain.distance_to_boundary(center);
    let radius = 0.5 * dist;
    if !(radius > 1e-3 * m.domain.radius) {
        return Err(GeoError::ChartRadius { radius });
    }
    let chart = NormalChart {
        metric: m.clone(),
        center: *center,
        radius,
    };
    let det = det_of(&chart.jacobian(&Point::zeros())?);
    if !(det.abs() > 1e-8) {
        return Err(GeoError::Chart(format!("Jacobian determinant {det:e} at the center")));
    }
    let gamma = chart.pulled_back_christoffel(&Point::zeros())?.max_abs();
    if gamma > tol {
        return Err(GeoError::Chart(format!("Christoffel symbols {gamma:e} at the center")));
    }
    Ok(chart)
}

impl<const N: usize> NormalChart<N> {
    /// `x(y)`.
    pub fn from_normal(&self, y: &Point<N>) -> Result<Point<N>> {
        if y.iter().all(|c| *c == 0.0) {
            return Ok(self.center);
        }
        Ok(evolve(&self.metric, &self.center, y, 1.0, EXP_STEPS)?.z)
    }

    /// `y(x)` by damped Newton on the exponential map.
    pub fn to_normal(&self, p: &Point<N>) -> Result<Point<N>> {
        if *p == self.center {
            return Ok(Point::zeros());
        }
        let f = |y: &DVector<f64>| -> Result<DVector<f64>> {
            let yy = Point::<N>::from_column_slice(y.as_slice());
            let x = self.from_normal(&yy)?;
            Ok(DVector::from_column_slice((x - p).as_slice()))
        };
        let y0 = DVector::from_column_slice((p - self.center).as_slice());
        let opts = NewtonOptions {
            tol: 1e-12,
            fd_step: 1e-7,
            ..NewtonOptions::default()
        };
        let y = gauss_newton(f, y0, &opts)?;
        Ok(Point::from_column_slice(y.as_slice()))
    }

    pub fn map_point(&self, p: &Point<N>, dir: ChartDirection) -> Result<Point<N>> {
        match dir {
            ChartDirection::ToNormal => self.to_normal(p),
            ChartDirection::FromNormal => self.from_normal(p),
        }
    }

    /// `∂x^i/∂y^k` by central differences of the forward map.
    pub fn jacobian(&self, y: &Point<N>) -> Result<Mat<N>> {
        let mut jac = Mat::<N>::zeros();
        for k in 0..N {
            let mut e = Point::<N>::zeros();
            e[k] = JAC_STEP;
            let col = (self.from_normal(&(y + e))? - self.from_normal(&(y - e))?) / (2.0 * JAC_STEP);
            jac.set_column(k, &col);
        }
        Ok(jac)
    }

    /// `g̃(y) = Jᵀ g(x(y)) J`.
    pub fn pulled_back_metric(&self, y: &Point<N>) -> Result<Mat<N>> {
        let x = self.from_normal(y)?;
        let jac = self.jacobian(y)?;
        let (g, _) = self.metric.metric_at(&x)?;
        Ok(jac.transpose() * g * jac)
    }

    /// Christoffel symbols of `g̃`, from central differences of `g̃`.
    pub fn pulled_back_christoffel(&self, y: &Point<N>) -> Result<Christoffel<N>> {
        let g = self.pulled_back_metric(y)?;
        let ginv = g
            .try_inverse()
            .ok_or_else(|| GeoError::Chart("pulled-back metric is singular".into()))?;
        let mut dg = [Mat::<N>::zeros(); N];
        for (k, dk) in dg.iter_mut().enumerate() {
            let mut e = Point::<N>::zeros();
            e[k] = CHRISTOFFEL_STEP;
            *dk = (self.pulled_back_metric(&(y + e))? - self.pulled_back_metric(&(y - e))?)
                / (2.0 * CHRISTOFFEL_STEP);
        }
        let mut gamma = [Mat::<N>::zeros(); N];
        for i in 0..N {
            for j in 0..N {
                for k in 0..N {
                    let mut s = 0.0;
                    for l in 0..N {
                        s += 0.5 * ginv[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                    }
                    gamma[i][(j, k)] = s;
                }
            }
        }
        Ok(Christoffel { gamma })
    }

    /// `ã_ks(y) = a_ij(x(y)) ∂x^i/∂y^k ∂x^j/∂y^s`.
    pub fn pullback_source(&self, a: &SourceField<N>, y: &Point<N>) -> Result<Mat<N>> {
        if a.is_zero() {
            return Ok(Mat::zeros());
        }
        let x = self.from_normal(y)?;
        let jac = self.jacobian(y)?;
        Ok(jac.transpose() * a.matrix(&x) * jac)
    }
}

pub fn det_of<const N: usize>(m: &Mat<N>) -> f64 {
    nalgebra::DMatrix::from_column_slice(N, N, m.as_slice()).determinant()
}

/// Recovers `a_ij(x(y))`, `i, j >= 2`, from the chart components `ã` using the
/// transverse block of the Jacobian: `a' = J'^{-T} ã' J'^{-1}`.
pub fn push_forward_block<const N: usize>(tilde: &Mat<N>, jac: &Mat<N>) -> Result<Mat<N>> {
    let k = N - 1;
    let jb = jac.view((1, 1), (k, k)).clone_owned();
    let jinv = jb
        .try_inverse()
        .ok_or_else(|| GeoError::Chart("transverse Jacobian block is singular".into()))?;
    let tb = tilde.view((1, 1), (k, k)).clone_owned();
    let ab = jinv.transpose() * tb * jinv;
    let mut out = Mat::<N>::zeros();
    for i in 0..k {
        for j in 0..k {
            // exact symmetry by averaging
            out[(i + 1, j + 1)] = 0.5 * (ab[(i, j)] + ab[(j, i)]);
        }
    }
    Ok(out)
}

/// Data expressed in a normal chart: `ũ(y, ζ) = u(x(y), J(y) ζ)`.
///
/// Geodesics of the pulled-back metric are images of geodesics of `g`, so the
/// ray transform of the pulled-back source in the chart equals the original
/// transform at the mapped phase point.
pub struct ChartRays<const N: usize> {
    pub chart: NormalChart<N>,
    pub inner: Arc<dyn RayData<N>>,
}

impl<const N: usize> RayData<N> for ChartRays<N> {
    fn value(&self, y: &Point<N>, zeta: &Point<N>) -> Result<f64> {
        let x = self.chart.from_normal(y)?;
        let jac = self.chart.jacobian(y)?;
        self.inner.value(&x, &(jac * zeta))
    }

    fn sweep_xi1(&self, y: &Point<N>, xi_prime: &[f64], xi1: &[f64]) -> Result<Vec<f64>> {
        let x = self.chart.from_normal(y)?;
        let jac = self.chart.jacobian(y)?;
        xi1.par_iter()
            .map(|&s| self.inner.value(&x, &(jac * with_xi1::<N>(s, xi_prime))))
            .collect()
    }
}
