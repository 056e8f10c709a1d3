//! Pointwise recovery of the source from ray data: jump extraction at
//! `η = 0`, the kinetic estimator at a chart center, field sweeps and the
//! uniqueness check.

use std::sync::Arc;

use rayon::prelude::*;

use crate::chart::{build_chart, push_forward_block, ChartRays, NormalChart};
use crate::error::{GeoError, Result};
use crate::metric::{Mat, MetricField, Point};
use crate::ray::{boundary_data, DataDifference, RayData, SourceRays, ZeroData};
use crate::source::SourceField;
use crate::spectral::{one_sided_limits, sweep_stencil, transform_grid, Stencil, Taper, XiWindow};

use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    Spectral,
    Kinetic,
    Both,
}

impl std::str::FromStr for Estimator {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Estimator::Spectral),
            "kinetic" => Ok(Estimator::Kinetic),
            "both" => Ok(Estimator::Both),
            other => Err(GeoError::Range(format!("unknown estimator {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct JumpEstimate {
    pub plus: f64,
    pub minus: f64,
    /// `U₊ − U₋`.
    pub delta: f64,
    pub rms_plus: f64,
    pub rms_minus: f64,
    pub window: (f64, f64),
    pub points_per_side: usize,
}

impl JumpEstimate {
    /// Fit residuals below 10% of the jump, or the jump is below `floor`.
    pub fn fit_ok(&self, floor: f64) -> bool {
        self.delta.abs() <= floor || self.rms_plus.max(self.rms_minus) < 0.1 * self.delta.abs()
    }
}

/// Quadratic one-sided fits over `lo <= |η| <= hi`, extrapolated to `0±`.
pub fn jump_extract(eta: &[f64], values: &[f64], fit_window: (f64, f64)) -> Result<JumpEstimate> {
    let lim = one_sided_limits(eta, values, fit_window.0, fit_window.1)?;
    Ok(JumpEstimate {
        plus: lim.plus,
        minus: lim.minus,
        delta: lim.plus - lim.minus,
        rms_plus: lim.rms_plus,
        rms_minus: lim.rms_minus,
        window: fit_window,
        points_per_side: lim.points_per_side,
    })
}

#[derive(Clone, Debug)]
pub struct RecoverySettings {
    /// Transverse probe size; `None` means `0.05 ×` chart radius.
    pub eps: Option<f64>,
    pub estimator: Estimator,
    pub window: XiWindow,
    pub taper: Taper,
    /// Difference step for `∂_{y¹}` in the spectral estimator and for the kinetic estimator.
    pub h: f64,
    /// Jump fit window in units of the `η` spacing.
    pub fit_cells: (f64, f64),
    pub chart_tol: f64,
    /// Add back the `δ(η)` part of `Σ ξ^j ∂_j p`, estimated from the limits
    /// of `Σ ξ^j ∂_j ũ` at the window edges. Zero on flat metrics.
    pub tail_correction: bool,
}

impl Default for RecoverySettings {
    fn default() -> Self {
        RecoverySettings {
            eps: None,
            estimator: Estimator::Kinetic,
            window: XiWindow::default(),
            taper: Taper::standard(),
            h: 1e-3,
            fit_cells: (2.0, 20.0),
            chart_tol: 1e-5,
            tail_correction: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PointEstimate<const N: usize> {
    pub center: Point<N>,
    /// Recovered `a_ij(center)`, `i, j >= 2`, in original coordinates.
    pub matrix: Mat<N>,
    /// Chart components at the center.
    pub tilde: Mat<N>,
    pub spectral: Option<Mat<N>>,
    pub kinetic: Option<Mat<N>>,
    pub eps: f64,
    /// Both estimators ran and differ by more than 20%.
    pub disagreement: bool,
    /// Diagonal jumps in order `i = 2..n`, then off-diagonal pairs.
    pub jumps: Vec<JumpEstimate>,
}

fn unit_pair<const N: usize>(i: usize, j: usize, eps: f64) -> Vec<f64> {
    let mut v = vec![0.0; N - 1];
    v[i - 1] += eps;
    v[j - 1] += eps;
    if i == j {
        v[i - 1] = eps;
    }
    v
}

/// Upper-triangle index pairs `(i, j)`, `1 <= i <= j < N`, diagonal first.
fn pairs<const N: usize>() -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (1..N).map(|i| (i, i)).collect();
    for i in 1..N {
        for j in i + 1..N {
            out.push((i, j));
        }
    }
    out
}

fn spectral_block<const N: usize>(
    data: &dyn RayData<N>,
    eps: f64,
    s: &RecoverySettings,
) -> Result<(Mat<N>, Vec<JumpEstimate>)> {
    let xs = s.window.samples();
    let eta = s.window.eta_grid();
    let deta = s.window.deta();
    let fit = (s.fit_cells.0 * deta, s.fit_cells.1 * deta);
    let mut out = Mat::<N>::zeros();
    let mut jumps = Vec::new();
    for (i, j) in pairs::<N>() {
        let xp = unit_pair::<N>(i, j, eps);
        let d1 = sweep_stencil(data, &Point::zeros(), &xp, &xs, Stencil::X(0), s.h)?;
        let spec = transform_grid(&d1, &s.window, s.taper)?;
        let q: Vec<f64> = spec.iter().map(|z| z.im).collect();
        let jump = jump_extract(&eta, &q, fit)?;
        // jump = -2π Q(ξ') + π (G₊ + G₋), G± = lim_{ξ¹→±∞} Σ_k ξ^k ∂_k ũ
        let mut quad = -jump.delta / (2.0 * PI);
        if s.tail_correction {
            let edges = [-s.window.half_width, s.window.half_width];
            for k in 1..N {
                if xp[k - 1] != 0.0 {
                    let g = sweep_stencil(data, &Point::zeros(), &xp, &edges, Stencil::X(k), s.h)?;
                    quad += 0.5 * xp[k - 1] * (g[0] + g[1]);
                }
            }
        }
        let quad = quad / (eps * eps);
        if i == j {
            out[(i, i)] = quad;
        } else {
            let v = 0.5 * quad - 0.5 * (out[(i, i)] + out[(j, j)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
        jumps.push(jump);
    }
    Ok((out, jumps))
}

fn kinetic_block<const N: usize>(data: &dyn RayData<N>, eps: f64, h: f64) -> Result<Mat<N>> {
    let mut out = Mat::<N>::zeros();
    for (i, j) in pairs::<N>() {
        let mut zeta = Point::<N>::zeros();
        zeta[i] = eps;
        zeta[j] = eps;
        let deriv = |k: usize| -> Result<f64> {
            let mut e = Point::<N>::zeros();
            e[k] = h;
            Ok((data.value(&e, &zeta)? - data.value(&(-e), &zeta)?) / (2.0 * h))
        };
        if i == j {
            out[(i, i)] = deriv(i)? / eps;
        } else {
            let v = (deriv(i)? + deriv(j)?) / (2.0 * eps) - 0.5 * (out[(i, i)] + out[(j, j)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

fn relative_gap<const N: usize>(a: &Mat<N>, b: &Mat<N>) -> f64 {
    let scale = a.amax().max(b.amax());
    if scale < 1e-6 {
        0.0
    } else {
        (a - b).amax() / scale
    }
}

/// Estimates `a_ij(center)` from ray data in the normal chart at `center`.
pub fn recover_point<const N: usize>(
    m: &MetricField<N>,
    data: Arc<dyn RayData<N>>,
    center: &Point<N>,
    settings: &RecoverySettings,
) -> Result<PointEstimate<N>> {
    let chart = build_chart(m, center, settings.chart_tol)?;
    let eps = settings.eps.unwrap_or(0.05 * chart.radius);
    if !(eps > 0.0 && eps <= chart.radius) {
        return Err(GeoError::Range(format!(
            "eps {eps} must lie in (0, chart radius {}]",
            chart.radius
        )));
    }
    recover_in_chart(chart, data, eps, settings)
}

fn recover_in_chart<const N: usize>(
    chart: NormalChart<N>,
    data: Arc<dyn RayData<N>>,
    eps: f64,
    s: &RecoverySettings,
) -> Result<PointEstimate<N>> {
    let center = chart.center;
    let jac = chart.jacobian(&Point::zeros())?;
    let local = ChartRays { chart, inner: data };
    let (spectral, jumps) = match s.estimator {
        Estimator::Kinetic => (None, Vec::new()),
        _ => {
            let (m, j) = spectral_block(&local, eps, s)?;
            (Some(m), j)
        }
    };
    let kinetic = match s.estimator {
        Estimator::Spectral => None,
        _ => Some(kinetic_block(&local, eps, s.h)?),
    };
    let tilde = spectral.or(kinetic).expect("one estimator always runs");
    let disagreement = match (&spectral, &kinetic) {
        (Some(a), Some(b)) => relative_gap(a, b) > 0.2,
        _ => false,
    };
    Ok(PointEstimate {
        center,
        matrix: push_forward_block(&tilde, &jac)?,
        tilde,
        spectral,
        kinetic,
        eps,
        disagreement,
        jumps,
    })
}

#[derive(Clone, Debug)]
pub struct CenterResult<const N: usize> {
    pub center: Point<N>,
    pub estimate: Option<PointEstimate<N>>,
    pub error: Option<String>,
}

impl<const N: usize> CenterResult<N> {
    pub fn matrix(&self) -> Mat<N> {
        self.estimate.as_ref().map(|e| e.matrix).unwrap_or_else(Mat::zeros)
    }
}

#[derive(Clone, Debug)]
pub struct RecoveredField<const N: usize> {
    pub centers: Vec<CenterResult<N>>,
}

impl<const N: usize> RecoveredField<N> {
    pub fn max_abs(&self) -> f64 {
        self.centers.iter().map(|c| c.matrix().amax()).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> usize {
        self.centers.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut head: Vec<String> = (1..=N).map(|k| format!("x{k}")).collect();
        for i in 2..=N {
            for j in i..=N {
                head.push(format!("a{i}{j}"));
            }
        }
        head.extend(["eps", "spectral_a22", "kinetic_a22", "disagreement", "error"].map(String::from));
        let mut out = head.join(",");
        out.push('\n');
        for c in &self.centers {
            let mut row: Vec<String> = c.center.iter().map(|v| v.to_string()).collect();
            let m = c.matrix();
            for i in 1..N {
                for j in i..N {
                    row.push(m[(i, j)].to_string());
                }
            }
            let e = c.estimate.as_ref();
            row.push(e.map(|e| e.eps.to_string()).unwrap_or_default());
            row.push(e.and_then(|e| e.spectral).map(|s| s[(1, 1)].to_string()).unwrap_or_default());
            row.push(e.and_then(|e| e.kinetic).map(|s| s[(1, 1)].to_string()).unwrap_or_default());
            row.push(e.map(|e| e.disagreement.to_string()).unwrap_or_default());
            row.push(c.error.clone().unwrap_or_default().replace(',', ";"));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Runs `recover_point` at every center. Centers outside `D` get `â = 0`;
/// per-center failures are recorded, not propagated.
pub fn recover_field<const N: usize>(
    m: &MetricField<N>,
    data: Arc<dyn RayData<N>>,
    centers: &[Point<N>],
    settings: &RecoverySettings,
) -> Result<RecoveredField<N>> {
    if let Some(eps) = settings.eps {
        for (a, pa) in centers.iter().enumerate() {
            for pb in &centers[a + 1..] {
                if (pa - pb).norm() < eps {
                    return Err(GeoError::Range(format!(
                        "centers closer than eps = {eps}"
                    )));
                }
            }
        }
    }
    let centers = centers
        .par_iter()
        .map(|c| {
            if !m.domain.contains(c) {
                return CenterResult {
                    center: *c,
                    estimate: None,
                    error: None,
                };
            }
            match recover_point(m, data.clone(), c, settings) {
                Ok(e) => CenterResult {
                    center: *c,
                    estimate: Some(e),
                    error: None,
                },
                Err(e) => CenterResult {
                    center: *c,
                    estimate: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(RecoveredField { centers })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    UniqueConsistent,
    Inconsistent,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::UniqueConsistent => "unique-consistent",
            Verdict::Inconsistent => "inconsistent",
        })
    }
}

#[derive(Clone, Debug)]
pub struct UniquenessReport<const N: usize> {
    pub verdict: Verdict,
    /// Largest `|I(x, y)|` of the difference data over the boundary sample.
    pub boundary_max: f64,
    pub noise_floor: f64,
    pub field: RecoveredField<N>,
    /// Per center: recovered and true difference matrices.
    pub comparisons: Vec<(Point<N>, Mat<N>, Mat<N>)>,
    /// Worst per-center relative error of the recovered difference.
    pub worst_relative: f64,
}

/// Boundary points at equally spaced angles in the `x¹x²` plane.
pub fn boundary_sample<const N: usize>(m: &MetricField<N>, count: usize) -> Vec<Point<N>> {
    (0..count)
        .map(|k| {
            let th = 2.0 * PI * (k as f64 + 0.25) / count as f64;
            let mut p = m.domain.center;
            p[0] += m.domain.radius * th.cos();
            p[1] += m.domain.radius * th.sin();
            p
        })
        .collect()
}

/// Checks that boundary data of `lhs − rhs` determine `lhs − rhs` at the centers.
///
/// With identical sources the data vanish and every recovered entry must stay
/// below the noise floor. Otherwise the recovered difference must match the
/// true difference within 10% at each center where the latter is nonzero.
pub fn uniqueness_check<const N: usize>(
    m: &MetricField<N>,
    lhs: &SourceField<N>,
    rhs: &SourceField<N>,
    step: f64,
    centers: &[Point<N>],
    settings: &RecoverySettings,
) -> Result<UniquenessReport<N>> {
    let pts = boundary_sample(m, 6);
    let mut boundary_max: f64 = 0.0;
    for (i, x) in pts.iter().enumerate() {
        for y in &pts[i + 1..] {
            let d = boundary_data(m, lhs, x, y, step)? - boundary_data(m, rhs, x, y, step)?;
            boundary_max = boundary_max.max(d.abs());
        }
    }
    let zero = recover_field(m, Arc::new(ZeroData), centers, settings)?;
    let noise_floor = (3.0 * zero.max_abs()).max(1e-6);
    let a: Arc<dyn RayData<N>> = Arc::new(SourceRays::incoming(m.clone(), lhs.clone(), step));
    let b: Arc<dyn RayData<N>> = Arc::new(SourceRays::incoming(m.clone(), rhs.clone(), step));
    let diff: Arc<dyn RayData<N>> = Arc::new(OwnedDifference { lhs: a, rhs: b });
    let field = recover_field(m, diff, centers, settings)?;
    let mut worst: f64 = 0.0;
    let mut comparisons = Vec::new();
    for c in &field.centers {
        let truth = lhs.matrix(&c.center) - rhs.matrix(&c.center);
        let got = c.matrix();
        let scale = truth.amax();
        let err = (got - truth).amax();
        if scale > noise_floor {
            worst = worst.max(err / scale);
        } else {
            worst = worst.max(if err > noise_floor { f64::INFINITY } else { 0.0 });
        }
        comparisons.push((c.center, got, truth));
    }
    let verdict = if field.failures() == 0 && worst <= 0.1 {
        Verdict::UniqueConsistent
    } else {
        Verdict::Inconsistent
    };
    Ok(UniquenessReport {
        verdict,
        boundary_max,
        noise_floor,
        field,
        comparisons,
        worst_relative: worst,
    })
}

/// Difference of two shared data sets.
struct OwnedDifference<const N: usize> {
    lhs: Arc<dyn RayData<N>>,
    rhs: Arc<dyn RayData<N>>,
}

impl<const N: usize> RayData<N> for OwnedDifference<N> {
    fn value(&self, x: &Point<N>, xi: &Point<N>) -> Result<f64> {
        DataDifference {
            lhs: self.lhs.as_ref(),
            rhs: self.rhs.as_ref(),
        }
        .value(x, xi)
    }
}
