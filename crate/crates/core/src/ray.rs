//! Ray transform of the source along geodesics, boundary data and the
//! kinetic-equation check.

use rayon::prelude::*;

use crate::error::{GeoError, Result};
use crate::geodesic::{connect, default_budget, time_step, trace, PhaseState};
use crate::metric::{MetricField, Point};
use crate::numerics::simpson_tail;
use crate::source::SourceField;

/// `∫_0^{t_exit} f(z(t), ż(t)) dt` along the geodesic from `(x, ξ)`.
pub fn ray_integral<const N: usize, F>(
    m: &MetricField<N>,
    x: &Point<N>,
    xi: &Point<N>,
    step: f64,
    integrand: F,
) -> Result<f64>
where
    F: Fn(&PhaseState<N>) -> f64,
{
    let dt = time_step(m, x, xi, step)?;
    let budget = default_budget(m, x, xi)?;
    let mut ts = Vec::new();
    let mut fs = Vec::new();
    trace(m, x, xi, dt, budget, |s| {
        ts.push(s.t);
        fs.push(integrand(s));
    })?;
    Ok(simpson_tail(&ts, &fs))
}

/// `u(x, ξ) = ∫ a_ij(z) ż^i ż^j dt` over the geodesic leaving `x` in direction `ξ`.
pub fn forward_ray<const N: usize>(
    m: &MetricField<N>,
    a: &SourceField<N>,
    x: &Point<N>,
    xi: &Point<N>,
    step: f64,
) -> Result<f64> {
    if a.is_zero() {
        time_step(m, x, xi, step)?;
        return Ok(0.0);
    }
    ray_integral(m, x, xi, step, |s| a.quadratic(&s.z, &s.v))
}

/// Integral of the source along the arclength geodesic joining two boundary points.
pub fn boundary_data<const N: usize>(
    m: &MetricField<N>,
    a: &SourceField<N>,
    x: &Point<N>,
    y: &Point<N>,
    step: f64,
) -> Result<f64> {
    if a.is_zero() {
        return Ok(0.0);
    }
    let path = connect(m, x, y, step)?;
    let ts: Vec<f64> = path.samples.iter().map(|s| s.t).collect();
    let fs: Vec<f64> = path.samples.iter().map(|s| a.quadratic(&s.z, &s.v)).collect();
    Ok(simpson_tail(&ts, &fs))
}

/// Which way the geodesic runs from the base point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Integrate forward from `x` along `ξ` to the exit.
    Outgoing,
    /// Integrate over the geodesic arriving at `x` with velocity `ξ`,
    /// i.e. `u_out(x, -ξ)`. This is the orientation for which the kinetic
    /// equation carries the source with a plus sign.
    Incoming,
}

/// Anything that can supply `u(x, ξ)`.
pub trait RayData<const N: usize>: Send + Sync {
    fn value(&self, x: &Point<N>, xi: &Point<N>) -> Result<f64>;

    /// `u(x, (ξ¹_k, ξ'))` for each `ξ¹_k`.
    fn sweep_xi1(&self, x: &Point<N>, xi_prime: &[f64], xi1: &[f64]) -> Result<Vec<f64>> {
        xi1.par_iter()
            .map(|&s| self.value(x, &with_xi1(s, xi_prime)))
            .collect()
    }
}

/// Assembles `(ξ¹, ξ')` into a full vector.
pub fn with_xi1<const N: usize>(xi1: f64, xi_prime: &[f64]) -> Point<N> {
    assert_eq!(xi_prime.len(), N - 1);
    Point::from_fn(|k, _| if k == 0 { xi1 } else { xi_prime[k - 1] })
}

/// Ray transform of a source, computed on demand.
#[derive(Clone, Debug)]
pub struct SourceRays<const N: usize> {
    pub metric: MetricField<N>,
    pub source: SourceField<N>,
    pub step: f64,
    pub orientation: Orientation,
}

impl<const N: usize> SourceRays<N> {
    pub fn incoming(metric: MetricField<N>, source: SourceField<N>, step: f64) -> Self {
        SourceRays {
            metric,
            source,
            step,
            orientation: Orientation::Incoming,
        }
    }
}

impl<const N: usize> RayData<N> for SourceRays<N> {
    fn value(&self, x: &Point<N>, xi: &Point<N>) -> Result<f64> {
        let dir = match self.orientation {
            Orientation::Outgoing => *xi,
            Orientation::Incoming => -xi,
        };
        forward_ray(&self.metric, &self.source, x, &dir, self.step)
    }
}

/// Identically zero data.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroData;

impl<const N: usize> RayData<N> for ZeroData {
    fn value(&self, _x: &Point<N>, xi: &Point<N>) -> Result<f64> {
        if xi.iter().all(|c| *c == 0.0) {
            return Err(GeoError::ZeroDirection);
        }
        Ok(0.0)
    }
}

/// Pointwise difference of two data sets.
pub struct DataDifference<'a, const N: usize> {
    pub lhs: &'a dyn RayData<N>,
    pub rhs: &'a dyn RayData<N>,
}

impl<const N: usize> RayData<N> for DataDifference<'_, N> {
    fn value(&self, x: &Point<N>, xi: &Point<N>) -> Result<f64> {
        Ok(self.lhs.value(x, xi)? - self.rhs.value(x, xi)?)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KineticResidual {
    /// `ξ^i ∂_{x^i} u − Γ^i_jk ξ^j ξ^k ∂_{ξ^i} u − a_ij ξ^i ξ^j`.
    pub residual: f64,
    pub transport: f64,
    pub source_term: f64,
    /// Set when rounding in the difference quotients could account for the residual.
    pub noise_limited: bool,
}

/// Evaluates the kinetic equation at `(x, ξ)` with central differences of step `h`.
pub fn kinetic_residual<const N: usize>(
    m: &MetricField<N>,
    a: &SourceField<N>,
    data: &dyn RayData<N>,
    x: &Point<N>,
    xi: &Point<N>,
    h: f64,
) -> Result<KineticResidual> {
    if !(h > 0.0) {
        return Err(GeoError::Range(format!("difference step must be positive, got {h}")));
    }
    let gamma = m.christoffel_at(x)?;
    let stencil: Vec<(Point<N>, Point<N>)> = (0..N)
        .flat_map(|k| {
            let mut e = Point::<N>::zeros();
            e[k] = h;
            [(x + e, *xi), (x - e, *xi), (*x, xi + e), (*x, xi - e)]
        })
        .collect();
    let vals: Vec<f64> = stencil
        .par_iter()
        .map(|(p, d)| data.value(p, d))
        .collect::<Result<_>>()?;
    let dx = Point::<N>::from_fn(|k, _| (vals[4 * k] - vals[4 * k + 1]) / (2.0 * h));
    let dxi = Point::<N>::from_fn(|k, _| (vals[4 * k + 2] - vals[4 * k + 3]) / (2.0 * h));
    let transport = xi.dot(&dx) - gamma.contract(xi, xi).dot(&dxi);
    let source_term = a.quadratic(x, xi);
    let residual = transport - source_term;
    let scale = vals.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let rounding = 1e-13 * scale * xi.norm().max(1.0) / h;
    Ok(KineticResidual {
        residual,
        transport,
        source_term,
        noise_limited: residual.abs() < 10.0 * rounding,
    })
}

/// Closed direction set `ρ_min <= |ξ'| <= ρ_max`, excluding the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionAnnulus {
    pub rho_min: f64,
    pub rho_max: f64,
}

impl Default for DirectionAnnulus {
    fn default() -> Self {
        DirectionAnnulus {
            rho_min: 0.01,
            rho_max: 1.0,
        }
    }
}

impl DirectionAnnulus {
    pub fn new(rho_min: f64, rho_max: f64) -> Result<Self> {
        if !(rho_min > 0.0 && rho_min <= rho_max) {
            return Err(GeoError::Range(format!(
                "annulus needs 0 < rho_min <= rho_max, got [{rho_min}, {rho_max}]"
            )));
        }
        Ok(DirectionAnnulus { rho_min, rho_max })
    }

    pub fn contains(&self, xi_prime: &[f64]) -> bool {
        let r = xi_prime.iter().map(|v| v * v).sum::<f64>().sqrt();
        r >= self.rho_min && r <= self.rho_max
    }
}

/// Samples of `u` on a lattice of base points times directions.
#[derive(Clone, Debug)]
pub struct DataGrid<const N: usize> {
    pub points: Vec<Point<N>>,
    pub directions: Vec<Point<N>>,
    /// Row-major: `values[i * directions.len() + j]`.
    pub values: Vec<f64>,
    pub step: f64,
}

impl<const N: usize> DataGrid<N> {
    pub fn sample(
        data: &dyn RayData<N>,
        points: Vec<Point<N>>,
        directions: Vec<Point<N>>,
        step: f64,
    ) -> Result<Self> {
        let nd = directions.len();
        let values = (0..points.len() * nd)
            .into_par_iter()
            .map(|k| data.value(&points[k / nd], &directions[k % nd]))
            .collect::<Result<Vec<f64>>>()?;
        Ok(DataGrid {
            points,
            directions,
            values,
            step,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.directions.len() + j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let head: Vec<String> = (1..=N)
            .map(|k| format!("x{k}"))
            .chain((1..=N).map(|k| format!("xi{k}")))
            .chain(std::iter::once("u".to_string()))
            .collect();
        out.push_str(&head.join(","));
        out.push('\n');
        for (i, p) in self.points.iter().enumerate() {
            for (j, d) in self.directions.iter().enumerate() {
                let row: Vec<String> = p
                    .iter()
                    .chain(d.iter())
                    .map(|v| v.to_string())
                    .chain(std::iter::once(self.get(i, j).to_string()))
                    .collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        out
    }
}
