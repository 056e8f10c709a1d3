//! Fourier transform of ray data in the first direction component `ξ¹`,
//! the transported kinetic equation, characteristic integration and
//! asymptotic probes.
//!
//! Convention: `û(η) = ∫ u(ξ¹) e^{-i ξ¹ η} dξ¹`, realized on `[-Ξ, Ξ]` by
//! trapezoid weights. On the grid `η_m = m π / Ξ` the endpoint samples fold
//! together and the sum is exactly a length-`N` DFT.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{GeoError, Result};
use crate::geodesic::shoot;
use crate::metric::{MetricField, Point};
use crate::numerics::{loglog_slope, polyfit, simpson_uniform};
use crate::ray::{with_xi1, RayData};

const TAIL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Taper {
    None,
    /// Raised-cosine roll-off on the outer `fraction` of the window.
    Cosine { fraction: f64 },
}

impl Taper {
    pub fn standard() -> Self {
        Taper::Cosine { fraction: 0.1 }
    }

    fn factor(&self, xi: f64, half_width: f64) -> f64 {
        match *self {
            Taper::None => 1.0,
            Taper::Cosine { fraction } => {
                let inner = (1.0 - fraction) * half_width;
                let r = xi.abs();
                if r <= inner {
                    1.0
                } else {
                    let t = ((r - inner) / (fraction * half_width)).min(1.0);
                    0.5 * (1.0 + (std::f64::consts::PI * t).cos())
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Taper::None => "none".into(),
            Taper::Cosine { fraction } => format!("cosine({fraction})"),
        }
    }
}

/// Symmetric window `[-Ξ, Ξ]` split into `intervals` equal pieces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiWindow {
    pub half_width: f64,
    pub intervals: usize,
}

impl Default for XiWindow {
    fn default() -> Self {
        XiWindow {
            half_width: 64.0,
            intervals: 4096,
        }
    }
}

impl XiWindow {
    pub fn new(half_width: f64, intervals: usize) -> Result<Self> {
        if !(half_width > 0.0) || intervals < 4 || !intervals.is_multiple_of(2) {
            return Err(GeoError::Range(format!(
                "window needs positive half-width and an even interval count >= 4, got {half_width}, {intervals}"
            )));
        }
        Ok(XiWindow {
            half_width,
            intervals,
        })
    }

    pub fn dxi(&self) -> f64 {
        2.0 * self.half_width / self.intervals as f64
    }

    pub fn deta(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    /// The `intervals + 1` sample abscissae.
    pub fn samples(&self) -> Vec<f64> {
        let d = self.dxi();
        (0..=self.intervals)
            .map(|k| -self.half_width + k as f64 * d)
            .collect()
    }

    /// `η_m = m Δη` for `m = -N/2 .. N/2 - 1`.
    pub fn eta_grid(&self) -> Vec<f64> {
        let half = (self.intervals / 2) as i64;
        (-half..half).map(|m| m as f64 * self.deta()).collect()
    }

    /// Quadrature weights including the taper.
    pub fn weights(&self, taper: Taper) -> Vec<f64> {
        let d = self.dxi();
        self.samples()
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let end = if k == 0 || k == self.intervals { 0.5 } else { 1.0 };
                d * end * taper.factor(s, self.half_width)
            })
            .collect()
    }
}

/// `û = p + i q` on the `η` lattice for fixed `(x, ξ')`.
#[derive(Clone, Debug)]
pub struct SpectralGrid {
    pub eta: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub x: Vec<f64>,
    pub xi_prime: Vec<f64>,
    pub window: XiWindow,
    pub taper: Taper,
}

impl SpectralGrid {
    /// Index of the grid point `η = 0`.
    pub fn zero_index(&self) -> usize {
        self.window.intervals / 2
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta,p,q\n");
        for i in 0..self.eta.len() {
            out.push_str(&format!("{},{},{}\n", self.eta[i], self.p[i], self.q[i]));
        }
        out
    }
}

/// Transform on the `η` lattice without the tail check.
pub fn transform_grid(samples: &[f64], window: &XiWindow, taper: Taper) -> Result<Vec<Complex64>> {
    let n = window.intervals;
    if samples.len() != n + 1 {
        return Err(GeoError::Range(format!(
            "expected {} samples, got {}",
            n + 1,
            samples.len()
        )));
    }
    let w = window.weights(taper);
    let mut v: Vec<Complex64> = (0..n).map(|k| Complex64::new(w[k] * samples[k], 0.0)).collect();
    v[0] += w[n] * samples[n];
    FftPlanner::new().plan_fft_forward(n).process(&mut v);
    let half = (n / 2) as i64;
    Ok((-half..half)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            v[m.rem_euclid(n as i64) as usize] * sign
        })
        .collect())
}

/// Direct summation of the same quadrature at an arbitrary `η`.
pub fn transform_direct(samples: &[f64], window: &XiWindow, taper: Taper, eta: f64) -> Complex64 {
    let w = window.weights(taper);
    window
        .samples()
        .iter()
        .zip(&w)
        .zip(samples)
        .map(|((&s, &wk), &u)| Complex64::from_polar(wk * u, -s * eta))
        .sum()
}

/// Transform with the window-adequacy check `|w(±Ξ) u(±Ξ)| < 1e-6`, where `w`
/// is the taper factor.
pub fn fourier_xi1(samples: &[f64], window: &XiWindow, taper: Taper) -> Result<SpectralGrid> {
    let n = window.intervals;
    if samples.len() == n + 1 {
        let edge = taper.factor(window.half_width, window.half_width);
        let tail = (samples[0] * edge).abs().max((samples[n] * edge).abs());
        if tail >= TAIL_TOL {
            return Err(GeoError::WindowTooSmall { tail });
        }
    }
    let c = transform_grid(samples, window, taper)?;
    Ok(SpectralGrid {
        eta: window.eta_grid(),
        p: c.iter().map(|z| z.re).collect(),
        q: c.iter().map(|z| z.im).collect(),
        x: Vec::new(),
        xi_prime: Vec::new(),
        window: *window,
        taper,
    })
}

/// Differential operator applied to `u` before transforming; indices are
/// 0-based components of the full vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    Value,
    X(usize),
    Xi(usize),
    /// `∂_{ξ^k} ∂_{ξ¹}`.
    XiXi1(usize),
}

/// Samples of `D u(x, (ξ¹_k, ξ'))` over the window, `D` by central differences of step `h`.
pub fn sweep_stencil<const N: usize>(
    data: &dyn RayData<N>,
    x: &Point<N>,
    xi_prime: &[f64],
    xi1: &[f64],
    stencil: Stencil,
    h: f64,
) -> Result<Vec<f64>> {
    let shift = |d: f64| -> Vec<f64> { xi1.iter().map(|s| s + d).collect() };
    let moved = |k: usize, d: f64| -> Vec<f64> {
        let mut p = xi_prime.to_vec();
        p[k - 1] += d;
        p
    };
    let diff = |a: Vec<f64>, b: Vec<f64>, scale: f64| -> Vec<f64> {
        a.iter().zip(&b).map(|(u, v)| (u - v) * scale).collect()
    };
    match stencil {
        Stencil::Value => data.sweep_xi1(x, xi_prime, xi1),
        Stencil::X(j) => {
            let mut e = Point::<N>::zeros();
            e[j] = h;
            Ok(diff(
                data.sweep_xi1(&(x + e), xi_prime, xi1)?,
                data.sweep_xi1(&(x - e), xi_prime, xi1)?,
                0.5 / h,
            ))
        }
        Stencil::Xi(0) => Ok(diff(
            data.sweep_xi1(x, xi_prime, &shift(h))?,
            data.sweep_xi1(x, xi_prime, &shift(-h))?,
            0.5 / h,
        )),
        Stencil::Xi(k) => Ok(diff(
            data.sweep_xi1(x, &moved(k, h), xi1)?,
            data.sweep_xi1(x, &moved(k, -h), xi1)?,
            0.5 / h,
        )),
        Stencil::XiXi1(0) => {
            let p = data.sweep_xi1(x, xi_prime, &shift(h))?;
            let c = data.sweep_xi1(x, xi_prime, xi1)?;
            let m = data.sweep_xi1(x, xi_prime, &shift(-h))?;
            Ok((0..xi1.len())
                .map(|i| (p[i] - 2.0 * c[i] + m[i]) / (h * h))
                .collect())
        }
        Stencil::XiXi1(k) => {
            let pp = data.sweep_xi1(x, &moved(k, h), &shift(h))?;
            let pm = data.sweep_xi1(x, &moved(k, -h), &shift(h))?;
            let mp = data.sweep_xi1(x, &moved(k, h), &shift(-h))?;
            let mm = data.sweep_xi1(x, &moved(k, -h), &shift(-h))?;
            Ok((0..xi1.len())
                .map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h))
                .collect())
        }
    }
}

/// Spectrum of `D u` at `(x, ξ')`, with the tail check.
pub fn spectrum<const N: usize>(
    data: &dyn RayData<N>,
    x: &Point<N>,
    xi_prime: &[f64],
    window: &XiWindow,
    taper: Taper,
    stencil: Stencil,
    h: f64,
) -> Result<SpectralGrid> {
    let samples = sweep_stencil(data, x, xi_prime, &window.samples(), stencil, h)?;
    let mut g = fourier_xi1(&samples, window, taper)?;
    g.x = x.iter().copied().collect();
    g.xi_prime = xi_prime.to_vec();
    Ok(g)
}

/// Multiplies samples by `-i ξ¹`, which realizes `∂_η` after transforming.
fn transform_deta(samples: &[f64], window: &XiWindow, taper: Taper, eta: f64) -> Complex64 {
    let weighted: Vec<f64> = window
        .samples()
        .iter()
        .zip(samples)
        .map(|(s, u)| s * u)
        .collect();
    transform_direct(&weighted, window, taper, eta) * Complex64::new(0.0, -1.0)
}

fn grid_eta(window: &XiWindow, eta: f64) -> Result<f64> {
    let m = (eta / window.deta()).round();
    if m == 0.0 {
        return Err(GeoError::ExcludedPoint { eta });
    }
    Ok(m * window.deta())
}

#[derive(Clone, Copy, Debug)]
pub struct TransportResidual {
    /// Grid frequency actually used (nearest lattice point to the request).
    pub eta: f64,
    /// Left side of the transformed complex equation.
    pub lhs: Complex64,
    pub residual: f64,
    /// Residual of the real-part equation (for `p`).
    pub residual_p: f64,
    /// Residual of the imaginary-part equation (for `q`).
    pub residual_q: f64,
}

/// Transformed kinetic equation at `(x, η, ξ')`.
///
/// All transforms are untapered trapezoid sums on the window, evaluated at
/// the lattice frequency nearest `eta`. There the transform of a function
/// constant in `ξ¹` vanishes exactly, matching the continuum fact that the
/// source contributes only at `η = 0`.
pub fn transport_residual<const N: usize>(
    m: &MetricField<N>,
    data: &dyn RayData<N>,
    x: &Point<N>,
    xi_prime: &[f64],
    eta: f64,
    h: f64,
    window: &XiWindow,
) -> Result<TransportResidual> {
    let eta = grid_eta(window, eta)?;
    let taper = Taper::None;
    let xs = window.samples();
    let gamma = m.christoffel_at(x)?;
    let xi = with_xi1::<N>(0.0, xi_prime);
    let mut a_x = vec![Complex64::default(); N];
    let mut b_xi = vec![Complex64::default(); N];
    let mut e_xi = vec![Complex64::default(); N];
    let mut c1 = Complex64::default();
    for j in 0..N {
        let dx = sweep_stencil(data, x, xi_prime, &xs, Stencil::X(j), h)?;
        a_x[j] = transform_direct(&dx, window, taper, eta);
        if j == 0 {
            c1 = transform_deta(&dx, window, taper, eta);
        }
        let dxi = sweep_stencil(data, x, xi_prime, &xs, Stencil::Xi(j), h)?;
        b_xi[j] = transform_direct(&dxi, window, taper, eta);
        e_xi[j] = transform_deta(&dxi, window, taper, eta);
    }
    // η û = -i F{∂_{ξ¹} u}
    let eta_u = Complex64::new(0.0, -1.0) * b_xi[0];
    let (mut drift_p, mut drift_q) = (0.0, 0.0);
    let (mut g1, mut flux_p, mut flux_q, mut curv_p, mut curv_q) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for j in 1..N {
        flux_p += xi[j] * a_x[j].re;
        flux_q += xi[j] * a_x[j].im;
        for k in 1..N {
            drift_p += 2.0 * gamma.get(j, 0, k) * xi[k] * e_xi[j].re;
            drift_q += 2.0 * gamma.get(j, 0, k) * xi[k] * e_xi[j].im;
            g1 += gamma.get(0, j, k) * xi[j] * xi[k];
            for s in 1..N {
                curv_p += gamma.get(s, j, k) * xi[j] * xi[k] * b_xi[s].re;
                curv_q += gamma.get(s, j, k) * xi[j] * xi[k] * b_xi[s].im;
            }
        }
    }
    let f1 = g1 * eta_u.re - flux_q + curv_q;
    let f2 = g1 * eta_u.im + flux_p - curv_p;
    let residual_p = c1.re - drift_p - f1;
    let residual_q = c1.im - drift_q - f2;
    let i = Complex64::new(0.0, 1.0);
    let drift = Complex64::new(drift_p, drift_q);
    let lhs = i * c1 - i * drift + Complex64::new(flux_p, flux_q)
        - i * g1 * eta_u
        - Complex64::new(curv_p, curv_q);
    Ok(TransportResidual {
        eta,
        lhs,
        residual: lhs.norm(),
        residual_p,
        residual_q,
    })
}

/// Solution of `dζ'/dτ = -2 Γ_1(τ, x') ζ'` along the `x¹` line through `x`,
/// sampled at `nodes`, with `ζ'(x¹) = ξ'`.
fn transverse_flow<const N: usize>(
    m: &MetricField<N>,
    x: &Point<N>,
    xi_prime: &[f64],
    nodes: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let rhs = |tau: f64, z: &[f64]| -> Result<Vec<f64>> {
        let mut p = *x;
        p[0] = tau;
        let g = m.christoffel_at(&p)?;
        Ok((1..N)
            .map(|k| -2.0 * (1..N).map(|j| g.get(k, 0, j) * z[j - 1]).sum::<f64>())
            .collect())
    };
    let substeps = 8;
    let mut out = vec![Vec::new(); nodes.len()];
    let last = nodes.len() - 1;
    out[last] = xi_prime.to_vec();
    let mut z = xi_prime.to_vec();
    for i in (0..last).rev() {
        let (t0, t1) = (nodes[i + 1], nodes[i]);
        let dt = (t1 - t0) / substeps as f64;
        for s in 0..substeps {
            let t = t0 + s as f64 * dt;
            let k1 = rhs(t, &z)?;
            let z2: Vec<f64> = z.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
            let k2 = rhs(t + 0.5 * dt, &z2)?;
            let z3: Vec<f64> = z.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
            let k3 = rhs(t + 0.5 * dt, &z3)?;
            let z4: Vec<f64> = z.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
            let k4 = rhs(t + dt, &z4)?;
            for c in 0..z.len() {
                z[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        out[i] = z.clone();
    }
    Ok(out)
}

/// First coordinate where the `x¹` line through `x` enters `D`.
pub fn inflow_coordinate<const N: usize>(m: &MetricField<N>, x: &Point<N>) -> Result<f64> {
    let d = &m.domain;
    let perp: f64 = (1..N).map(|k| (x[k] - d.center[k]).powi(2)).sum();
    let r2 = d.radius * d.radius - perp;
    if r2 < 0.0 {
        return Err(GeoError::Range("the first-axis line through x misses the domain".into()));
    }
    Ok(d.center[0] - r2.sqrt())
}

/// `∫ F₂ dτ` along the characteristic through `(x, ξ')`, from the inflow
/// boundary coordinate to `x¹`, by composite Simpson with `intervals` pieces.
///
/// `f2(p, ζ')` evaluates the right-hand side at a point of the line.
pub fn characteristic_solve<const N: usize, F>(
    m: &MetricField<N>,
    f2: F,
    x: &Point<N>,
    xi_prime: &[f64],
    intervals: usize,
) -> Result<f64>
where
    F: Fn(&Point<N>, &[f64]) -> Result<f64> + Sync,
{
    if xi_prime.iter().all(|c| *c == 0.0) {
        return Err(GeoError::ZeroDirection);
    }
    let start = inflow_coordinate(m, x)?;
    let len = x[0] - start;
    if len <= 0.0 {
        return Ok(0.0);
    }
    let nodes: Vec<f64> = (0..=intervals)
        .map(|i| start + len * i as f64 / intervals as f64)
        .collect();
    let zetas = transverse_flow(m, x, xi_prime, &nodes)?;
    let vals = nodes
        .par_iter()
        .zip(&zetas)
        .map(|(&t, z)| {
            let mut p = *x;
            p[0] = t;
            f2(&p, z)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(simpson_uniform(len / intervals as f64, &vals))
}

/// `F₂ = ζ^j ∂_{x^j} p + Γ¹_jk ζ^j ζ^k η q − Γ^s_jk ζ^j ζ^k ∂_{ξ^s} p`
/// (indices `>= 2`), assembled from transformed difference stencils of the data.
pub fn f2_from_data<const N: usize>(
    m: &MetricField<N>,
    data: &dyn RayData<N>,
    p: &Point<N>,
    zeta: &[f64],
    eta: f64,
    h: f64,
    window: &XiWindow,
) -> Result<f64> {
    let xs = window.samples();
    let tr = |st: Stencil| -> Result<Complex64> {
        Ok(transform_direct(&sweep_stencil(data, p, zeta, &xs, st, h)?, window, Taper::None, eta))
    };
    let gamma = m.christoffel_at(p)?;
    let xi = with_xi1::<N>(0.0, zeta);
    let eta_q = -tr(Stencil::Xi(0))?.re;
    let mut out = 0.0;
    for j in 1..N {
        out += xi[j] * tr(Stencil::X(j))?.re;
    }
    let mut g1 = 0.0;
    let mut gs = vec![0.0; N];
    for j in 1..N {
        for k in 1..N {
            g1 += gamma.get(0, j, k) * xi[j] * xi[k];
            for (s, g) in gs.iter_mut().enumerate().skip(1) {
                *g += gamma.get(s, j, k) * xi[j] * xi[k];
            }
        }
    }
    out += g1 * eta_q;
    for (s, g) in gs.iter().enumerate().skip(1) {
        if *g != 0.0 {
            out -= g * tr(Stencil::Xi(s))?.re;
        }
    }
    Ok(out)
}

/// `∂_η q(x, η, ξ') = Im F{-i ξ¹ u}` directly from the data.
pub fn deta_q_from_data<const N: usize>(
    data: &dyn RayData<N>,
    x: &Point<N>,
    xi_prime: &[f64],
    eta: f64,
    window: &XiWindow,
) -> Result<f64> {
    let u = data.sweep_xi1(x, xi_prime, &window.samples())?;
    Ok(transform_deta(&u, window, Taper::None, eta).im)
}

#[derive(Clone, Copy, Debug)]
pub struct CharacteristicValue {
    pub eta: f64,
    /// Boundary term at the inflow point.
    pub boundary: f64,
    pub integral: f64,
    pub value: f64,
}

/// `∂_η q` at `(x, η, ξ')` from its inflow boundary value plus the
/// characteristic integral of `F₂`.
#[allow(clippy::too_many_arguments)]
pub fn characteristic_deta_q<const N: usize>(
    m: &MetricField<N>,
    data: &dyn RayData<N>,
    x: &Point<N>,
    xi_prime: &[f64],
    eta: f64,
    h: f64,
    window: &XiWindow,
    intervals: usize,
) -> Result<CharacteristicValue> {
    let eta = grid_eta(window, eta)?;
    let start = inflow_coordinate(m, x)?;
    let f2 = |p: &Point<N>, z: &[f64]| f2_from_data(m, data, p, z, eta, h, window);
    let integral = characteristic_solve(m, f2, x, xi_prime, intervals)?;
    let mut x0 = *x;
    x0[0] = start;
    let len = x[0] - start;
    let zeta0 = if len > 0.0 {
        transverse_flow(m, x, xi_prime, &[start, x[0]])?[0].clone()
    } else {
        xi_prime.to_vec()
    };
    let boundary = deta_q_from_data(data, &x0, &zeta0, eta, window)?;
    Ok(CharacteristicValue {
        eta,
        boundary,
        integral,
        value: boundary + integral,
    })
}

/// Central difference in `η` of `q` computed by direct summation.
pub fn deta_q_finite_difference<const N: usize>(
    data: &dyn RayData<N>,
    x: &Point<N>,
    xi_prime: &[f64],
    eta: f64,
    delta: f64,
    window: &XiWindow,
) -> Result<f64> {
    let u = data.sweep_xi1(x, xi_prime, &window.samples())?;
    let qp = transform_direct(&u, window, Taper::None, eta + delta).im;
    let qm = transform_direct(&u, window, Taper::None, eta - delta).im;
    Ok((qp - qm) / (2.0 * delta))
}

#[derive(Clone, Debug)]
pub struct ProbeSeries {
    pub name: String,
    pub values: Vec<f64>,
    pub slope: f64,
    pub bounded: bool,
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub schedule: Vec<f64>,
    pub series: Vec<ProbeSeries>,
}

impl ProbeReport {
    pub fn get(&self, name: &str) -> Option<&ProbeSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi1");
        for s in &self.series {
            out.push(',');
            out.push_str(&s.name);
        }
        out.push('\n');
        for (i, x) in self.schedule.iter().enumerate() {
            out.push_str(&x.to_string());
            for s in &self.series {
                out.push(',');
                out.push_str(&s.values[i].to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// `ξ¹ = 10^{0, 0.5, ..., 4}`.
pub fn default_schedule() -> Vec<f64> {
    (0..=8).map(|k| 10f64.powf(0.5 * k as f64)).collect()
}

const PROBE_STEP: f64 = 1e-3;
const PROBE_ARCLENGTH_STEPS: usize = 2000;
const BOUND_FACTOR: f64 = 10.0;

/// `|ξ| ż(x, ν, τ)` on a fixed arclength grid, `ν = ξ / |ξ|_g`.
fn scaled_velocity<const N: usize>(m: &MetricField<N>, x: &Point<N>, xi: &Point<N>) -> Result<Vec<Point<N>>> {
    let norm = m.norm(x, xi)?;
    let nu = xi / norm;
    let path = shoot(m, x, &nu, PROBE_STEP, 20.0 * m.domain.outer_radius())?;
    Ok(path
        .samples
        .iter()
        .take(PROBE_ARCLENGTH_STEPS.min(path.samples.len() - 1))
        .map(|s| s.v * norm)
        .collect())
}

/// Tabulates `sup_τ |ξ| |ż^k|` for `k >= 2`, its scaled first and second
/// `ξ`-derivatives, and the index-one quantity `sup_τ ξ¹ ż¹`, along the schedule.
pub fn asymptotic_probe<const N: usize>(
    m: &MetricField<N>,
    x: &Point<N>,
    xi_prime: &[f64],
    schedule: &[f64],
) -> Result<ProbeReport> {
    if xi_prime.iter().all(|c| *c == 0.0) {
        return Err(GeoError::ZeroDirection);
    }
    let rows = schedule
        .par_iter()
        .map(|&s| probe_row(m, x, xi_prime, s))
        .collect::<Result<Vec<Vec<(String, f64)>>>>()?;
    let names: Vec<String> = rows[0].iter().map(|(n, _)| n.clone()).collect();
    let series = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let values: Vec<f64> = rows.iter().map(|r| r[i].1).collect();
            let slope = if values.iter().all(|v| *v > 0.0) {
                loglog_slope(schedule, &values)
            } else {
                0.0
            };
            let max = values.iter().cloned().fold(0.0, f64::max);
            let bounded = max <= BOUND_FACTOR * values[0] + 1e-9;
            ProbeSeries {
                name: name.clone(),
                values,
                slope,
                bounded,
            }
        })
        .collect();
    Ok(ProbeReport {
        schedule: schedule.to_vec(),
        series,
    })
}

fn probe_row<const N: usize>(
    m: &MetricField<N>,
    x: &Point<N>,
    xi_prime: &[f64],
    xi1: f64,
) -> Result<Vec<(String, f64)>> {
    let xi = with_xi1::<N>(xi1, xi_prime);
    let scale = xi.norm();
    let d = 1e-3 * scale;
    let base = scaled_velocity(m, x, &xi)?;
    let at = |dv: &Point<N>| scaled_velocity(m, x, &(xi + dv));
    let unit = |k: usize| {
        let mut e = Point::<N>::zeros();
        e[k] = d;
        e
    };
    let sup = |f: &dyn Fn(usize) -> f64, len: usize| (0..len).map(f).fold(0.0, |a: f64, b| a.max(b.abs()));
    let mut row = Vec::new();
    for k in 1..N {
        row.push((format!("xi_zdot{}", k + 1), sup(&|i| base[i][k], base.len())));
    }
    let gnorm = m.norm(x, &xi)?;
    row.push(("xi1_zdot1".to_string(), sup(&|i| xi1 * base[i][0] / gnorm, base.len())));
    // first derivatives scaled by |ξ|^0 and second by |ξ|^1
    for a in 0..N {
        let p = at(&unit(a))?;
        let mm = at(&(-unit(a)))?;
        let len = base.len().min(p.len()).min(mm.len());
        for k in 1..N {
            row.push((
                format!("d{}_xi_zdot{}", a + 1, k + 1),
                sup(&|i| (p[i][k] - mm[i][k]) / (2.0 * d), len),
            ));
            row.push((
                format!("d{}d{}_xi_zdot{}", a + 1, a + 1, k + 1),
                sup(&|i| scale * (p[i][k] - 2.0 * base[i][k] + mm[i][k]) / (d * d), len),
            ));
        }
    }
    Ok(row)
}

/// One-sided quadratic fits of `values` over `lo <= |η| <= hi`, extrapolated to `η = 0±`.
#[derive(Clone, Copy, Debug)]
pub struct OneSidedLimits {
    pub plus: f64,
    pub minus: f64,
    pub rms_plus: f64,
    pub rms_minus: f64,
    pub points_per_side: usize,
}

pub fn one_sided_limits(eta: &[f64], values: &[f64], lo: f64, hi: f64) -> Result<OneSidedLimits> {
    let side = |sign: f64| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = eta
            .iter()
            .zip(values)
            .filter(|(e, _)| {
                let s = **e * sign;
                s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12)
            })
            .map(|(e, v)| (*e, *v))
            .unzip();
        (xs, ys)
    };
    let (xp, yp) = side(1.0);
    let (xm, ym) = side(-1.0);
    let found = xp.len().min(xm.len());
    if found < 8 {
        return Err(GeoError::Window { found, needed: 8 });
    }
    let (cp, rp) = polyfit(&xp, &yp, 2);
    let (cm, rm) = polyfit(&xm, &ym, 2);
    Ok(OneSidedLimits {
        plus: cp[0],
        minus: cm[0],
        rms_plus: rp,
        rms_minus: rm,
        points_per_side: found,
    })
}

/// Result of a small-`|ξ'|` limit probe.
#[derive(Clone, Debug)]
pub struct LimitSeries {
    pub name: String,
    pub values: Vec<f64>,
    /// `values / values[0]`.
    pub ratios: Vec<f64>,
    pub monotone: bool,
}

#[derive(Clone, Debug)]
pub struct LimitReport {
    pub rhos: Vec<f64>,
    pub series: Vec<LimitSeries>,
}

impl LimitReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity");
        for r in &self.rhos {
            out.push_str(&format!(",rho={r}"));
        }
        out.push('\n');
        for s in &self.series {
            out.push_str(&s.name);
            for v in &s.ratios {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn l2(window: &XiWindow, v: &[f64]) -> f64 {
    let w = window.weights(Taper::None);
    v.iter().zip(&w).map(|(a, b)| a * a * b).sum::<f64>().sqrt()
}

fn l1_eta(window: &XiWindow, v: &[f64]) -> f64 {
    v.iter().map(|a| a.abs()).sum::<f64>() * window.deta()
}

/// Norms of `u`, `∂_{ξ^i} u` and `∂_{ξ^i} ∂_{ξ¹} u` in `L2(ξ¹)` over the window,
/// and of `p`, `∂_{x^j} p`, `∂_{ξ^k} p` (`k >= 2`) and `η q` in `L1(η)`, at
/// `ξ' = ρ · direction` for each `ρ`.
pub fn limit_probe<const N: usize>(
    data: &dyn RayData<N>,
    x: &Point<N>,
    direction: &[f64],
    rhos: &[f64],
    window: &XiWindow,
    taper: Taper,
    h: f64,
) -> Result<LimitReport> {
    let xs = window.samples();
    let mut table: Vec<(String, Vec<f64>)> = Vec::new();
    let mut push = |name: String, v: f64| {
        if let Some(e) = table.iter_mut().find(|(n, _)| *n == name) {
            e.1.push(v);
        } else {
            table.push((name, vec![v]));
        }
    };
    for &rho in rhos {
        let xp: Vec<f64> = direction.iter().map(|d| d * rho).collect();
        let hx = h * rho.min(1.0);
        let u = sweep_stencil(data, x, &xp, &xs, Stencil::Value, h)?;
        push("u".into(), l2(window, &u));
        for i in 0..N {
            let hi = if i == 0 { h } else { hx };
            let d = sweep_stencil(data, x, &xp, &xs, Stencil::Xi(i), hi)?;
            push(format!("d_xi{}_u", i + 1), l2(window, &d));
            let dd = sweep_stencil(data, x, &xp, &xs, Stencil::XiXi1(i), hi)?;
            push(format!("d_xi{}_d_xi1_u", i + 1), l2(window, &dd));
        }
        let spec = transform_grid(&u, window, taper)?;
        push("p".into(), l1_eta(window, &spec.iter().map(|z| z.re).collect::<Vec<_>>()));
        for j in 0..N {
            let d = sweep_stencil(data, x, &xp, &xs, Stencil::X(j), h)?;
            let s = transform_grid(&d, window, taper)?;
            push(format!("d_x{}_p", j + 1), l1_eta(window, &s.iter().map(|z| z.re).collect::<Vec<_>>()));
        }
        for k in 1..N {
            let d = sweep_stencil(data, x, &xp, &xs, Stencil::Xi(k), hx)?;
            let s = transform_grid(&d, window, taper)?;
            push(format!("d_xi{}_p", k + 1), l1_eta(window, &s.iter().map(|z| z.re).collect::<Vec<_>>()));
        }
        let eta = window.eta_grid();
        let eq: Vec<f64> = spec.iter().zip(&eta).map(|(z, e)| e * z.im).collect();
        push("eta_q".into(), l1_eta(window, &eq));
    }
    let series = table
        .into_iter()
        .map(|(name, values)| {
            let ratios: Vec<f64> = values.iter().map(|v| v / values[0]).collect();
            let monotone = values.windows(2).all(|w| w[1] <= w[0]);
            LimitSeries {
                name,
                values,
                ratios,
                monotone,
            }
        })
        .collect();
    Ok(LimitReport {
        rhos: rhos.to_vec(),
        series,
    })
}
