//! Experiment orchestration: builds the metric and source from a config and
//! runs the selected suites, writing one CSV per suite plus the report.

use std::path::PathBuf;
use std::time::Instant;

use crate::error::{GeoError, Result};
use crate::geodesic::{connect, shoot};
use crate::metric::{validate_semi_geodesic, DomainBall, MetricField, Point};
use crate::numerics::halton;
use crate::ray::{boundary_data, forward_ray, DataGrid, Orientation, RayData, SourceRays};
use crate::source::SourceField;
use crate::spectral::{
    asymptotic_probe, default_schedule, fourier_xi1, limit_probe, one_sided_limits, spectrum, Stencil, Taper,
    XiWindow,
};

use super::config::{ExperimentConfig, MetricKind, SourceKindCfg, Suite, TaperCfg};
use super::measure::{self, CharacteristicProbe};
use super::report::{write_file, Check, ReportFormat, SuiteReport, Threshold};

/// Everything a suite needs, built once per run.
struct Context<'a, const N: usize> {
    cfg: &'a ExperimentConfig,
    metric: MetricField<N>,
    source: SourceField<N>,
    out: PathBuf,
}

impl<const N: usize> Context<'_, N> {
    fn point(&self, coords: &[f64]) -> Point<N> {
        let d = &self.metric.domain;
        Point::<N>::from_fn(|k, _| d.center[k] + d.radius * coords.get(k).copied().unwrap_or(0.0))
    }

    /// Interior probe point used by the single-point checks.
    fn probe_point(&self) -> Point<N> {
        self.point(&[0.15, -0.1, 0.05])
    }

    fn probe_direction(&self) -> Point<N> {
        Point::<N>::from_fn(|k, _| [0.8, 0.6, 0.3][k])
    }

    fn xi_prime(&self) -> Vec<f64> {
        let v: Vec<f64> = (1..N).map(|k| [0.7, 0.4][k - 1]).collect();
        let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        v.iter().map(|c| 0.7 * c / r).collect()
    }

    fn taper(&self) -> Taper {
        match self.cfg.grid.taper {
            TaperCfg::None => Taper::None,
            TaperCfg::Cosine => Taper::standard(),
        }
    }

    fn window(&self) -> Result<XiWindow> {
        XiWindow::new(self.cfg.grid.xi_window, self.cfg.grid.xi_intervals)
    }

    fn check_window(&self) -> Result<XiWindow> {
        XiWindow::new(self.cfg.grid.check_window, self.cfg.grid.check_intervals)
    }

    fn data(&self, step: f64) -> SourceRays<N> {
        SourceRays::incoming(self.metric.clone(), self.source.clone(), step)
    }

    fn seed(&self, suite: u64) -> u64 {
        self.cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(suite)
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        write_file(&self.out, name, contents)
    }
}

/// Collects checks for one suite; a failing measurement becomes a failed check.
struct Recorder {
    suite: &'static str,
    report: SuiteReport,
}

impl Recorder {
    fn new(suite: &'static str) -> Self {
        Recorder {
            suite,
            report: SuiteReport::default(),
        }
    }

    fn check<F>(&mut self, name: &str, tag: &str, threshold: Threshold, measure: F)
    where
        F: FnOnce() -> Result<(f64, String)>,
    {
        let start = Instant::now();
        let (value, note, pass) = match measure() {
            Ok((v, note)) => (v, note, threshold.accepts(v)),
            Err(e) => (f64::NAN, e.to_string(), false),
        };
        self.report.push(Check {
            suite: self.suite.to_string(),
            name: name.to_string(),
            tag: tag.to_string(),
            value,
            threshold,
            pass,
            note,
            wall: start.elapsed(),
        });
    }
}

fn sci_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn holds(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn build_metric<const N: usize>(cfg: &ExperimentConfig) -> Result<MetricField<N>> {
    let domain = DomainBall::new(Point::<N>::zeros(), cfg.domain.radius, cfg.domain.padding)?;
    Ok(match cfg.metric {
        MetricKind::Euclidean => MetricField::euclidean(domain),
        MetricKind::Bump => MetricField::bump(domain, cfg.bump.amplitude, cfg.bump.exponent),
    })
}

fn build_source<const N: usize>(cfg: &ExperimentConfig, scale: f64, extra_exponent: u32) -> Result<SourceField<N>> {
    match cfg.source.kind {
        SourceKindCfg::Zero => Ok(SourceField::zero()),
        SourceKindCfg::Bump => {
            let c: Vec<f64> = cfg.source.coefficients.iter().map(|v| v * scale).collect();
            SourceField::bump(&c, cfg.source.radius * cfg.domain.radius, cfg.source.exponent + extra_exponent)
        }
    }
}

/// Runs the configured suites, writes `report.csv`, `report.txt` and the
/// per-suite CSVs into `cfg.output`, and returns the aggregate report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    match cfg.dimension {
        2 => run::<2>(cfg),
        3 => run::<3>(cfg),
        d => Err(GeoError::Config {
            line: 0,
            message: format!("dimension must be 2 or 3, got {d}"),
        }),
    }
}

fn run<const N: usize>(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let ctx = Context::<N> {
        cfg,
        metric: build_metric(cfg)?,
        source: build_source(cfg, 1.0, 0)?,
        out: cfg.output.clone(),
    };
    let mut report = SuiteReport::default();
    for suite in cfg.suite.expand() {
        let start = Instant::now();
        let r = match suite {
            Suite::Geodesic => geodesic_suite(&ctx)?,
            Suite::Forward => forward_suite(&ctx)?,
            Suite::Kinetic => kinetic_suite(&ctx)?,
            Suite::Spectrum => spectrum_suite(&ctx)?,
            Suite::Lemmas => lemma_suite(&ctx)?,
            #[cfg(feature = "recovery")]
            Suite::Recover => recover_suite(&ctx)?,
            #[cfg(feature = "recovery")]
            Suite::Uniqueness => uniqueness_suite(&ctx)?,
            #[cfg(not(feature = "recovery"))]
            Suite::Recover | Suite::Uniqueness => {
                if cfg.suite != Suite::All {
                    return Err(GeoError::Config {
                        line: 0,
                        message: format!("suite {} needs the recovery feature", suite.name()),
                    });
                }
                continue;
            }
            Suite::All => unreachable!("expanded above"),
        };
        eprintln!("[{}] {:.2?}", suite.name(), start.elapsed());
        report.extend(r);
    }
    eprint!("{}", report.timing_summary());
    ctx.write("report.csv", &report.emit(ReportFormat::Csv))?;
    ctx.write("report.txt", &report.emit(ReportFormat::Text))?;
    Ok(report)
}

fn geodesic_suite<const N: usize>(ctx: &Context<N>) -> Result<SuiteReport> {
    let m = &ctx.metric;
    let g = &ctx.cfg.grid;
    let mut rec = Recorder::new("geodesic");
    let rays = measure::random_rays(&m.domain, g.rays, 1.0, ctx.seed(1));
    rec.check("semi_geodesic_form", "semi-geodesic coordinates", Threshold::Below(1e-12), || {
        let r = validate_semi_geodesic(m, 256, 0.0)?;
        Ok((r.max_violation, format!("{} samples", r.samples)))
    });
    if m.label() == "euclidean" {
        rec.check("straight_lines", "euclidean closed form", Threshold::Below(1e-10), || {
            Ok((measure::straight_line_deviation(m, &rays, g.step)?, format!("{} rays", rays.len())))
        });
    } else {
        rec.check("axis_lines", "first-axis lines are geodesics", Threshold::Below(1e-10), || {
            let axis: Vec<_> = rays
                .iter()
                .map(|(x, _)| {
                    let mut e = Point::<N>::zeros();
                    e[0] = 1.0;
                    (*x, e)
                })
                .collect();
            Ok((measure::straight_line_deviation(m, &axis, g.step)?, format!("{} rays", axis.len())))
        });
    }
    rec.check("homogeneity", "homogeneity of geodesics", Threshold::Below(1e-7), || {
        let v = measure::homogeneity_deviation(m, &rays, &[0.5, 2.0, 10.0], g.step)?;
        Ok((v, "c in {0.5, 2, 10}".into()))
    });
    rec.check("speed_conservation", "metric speed along geodesics", Threshold::Below(1e-8), || {
        let mut worst: f64 = 0.0;
        for (x, xi) in &rays {
            let path = shoot(m, x, xi, g.step, 100.0 * m.domain.outer_radius())?;
            let s0 = m.norm(x, xi)?;
            for s in &path.samples {
                worst = worst.max((m.norm(&s.z, &s.v)? - s0).abs() / s0);
            }
        }
        Ok((worst, String::new()))
    });
    let boundary: Vec<Point<N>> = (0..6)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / 6.0;
            ctx.point(&[th.cos(), th.sin()])
        })
        .collect();
    rec.check("connect", "two-point shooting", Threshold::Below(1e-8), || {
        let mut worst: f64 = 0.0;
        for (i, x) in boundary.iter().enumerate() {
            for y in &boundary[i + 1..] {
                let p = connect(m, x, y, g.step)?;
                worst = worst.max((p.exit_point() - y).norm());
            }
        }
        Ok((worst, "boundary pairs".into()))
    });
    let mut csv = String::new();
    let head: Vec<String> = ["x", "xi", "exit"]
        .iter()
        .flat_map(|p| (1..=N).map(move |k| format!("{p}{k}")))
        .collect();
    csv.push_str(&format!("ray,{},exit_time\n", head.join(",")));
    for (i, (x, xi)) in rays.iter().enumerate() {
        let p = shoot(m, x, xi, g.step, 100.0 * m.domain.outer_radius())?;
        let cols: Vec<String> = x.iter().chain(xi.iter()).chain(p.exit_point().iter()).map(|v| v.to_string()).collect();
        csv.push_str(&format!("{},{},{}\n", i, cols.join(","), p.exit_time));
    }
    ctx.write("geodesic.csv", &csv)?;
    Ok(rec.report)
}

fn forward_suite<const N: usize>(ctx: &Context<N>) -> Result<SuiteReport> {
    let m = &ctx.metric;
    let a = &ctx.source;
    let g = &ctx.cfg.grid;
    let mut rec = Recorder::new("forward");
    if m.label() == "euclidean" {
        rec.check("line_oracle", "ray transform quadrature", Threshold::Below(1e-8), || {
            let x = m.domain.center;
            let mut xi = Point::<N>::zeros();
            xi[1] = 1.0;
            let u = forward_ray(m, a, &x, &xi, g.step)?;
            let r = m.domain.radius;
            let oracle = measure::gauss_legendre(|t| a.quadratic(&(x + xi * t), &xi), 0.0, r, 400);
            Ok(((u - oracle).abs(), format!("u = {u:.10}, oracle = {oracle:.10}")))
        });
    } else {
        rec.check("step_refinement", "ray transform quadrature", Threshold::Below(1e-8), || {
            let x = ctx.probe_point();
            let xi = ctx.probe_direction();
            let coarse = forward_ray(m, a, &x, &xi, g.step)?;
            let fine = forward_ray(m, a, &x, &xi, g.step / 4.0)?;
            Ok(((coarse - fine).abs(), format!("u = {fine:.10}")))
        });
    }
    let rays = measure::random_rays(&m.domain, 10, 0.9, ctx.seed(2));
    rec.check("ray_homogeneity", "homogeneity of the ray transform", Threshold::Below(1e-8), || {
        let mut worst: f64 = 0.0;
        for (x, xi) in &rays {
            let u = forward_ray(m, a, x, xi, g.step)?;
            for c in [0.5, 2.0, 10.0] {
                let uc = forward_ray(m, a, x, &(xi * c), g.step)?;
                worst = worst.max((uc - c * u).abs() / u.abs().max(1.0));
            }
        }
        Ok((worst, String::new()))
    });
    rec.check("reciprocity", "boundary data symmetry", Threshold::Below(1e-8), || {
        let pts: Vec<Point<N>> = (0..4)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.3) / 4.0;
                ctx.point(&[th.cos(), th.sin()])
            })
            .collect();
        let mut worst: f64 = 0.0;
        for (i, x) in pts.iter().enumerate() {
            for y in &pts[i + 1..] {
                let a1 = boundary_data(m, a, x, y, g.step)?;
                let a2 = boundary_data(m, a, y, x, g.step)?;
                worst = worst.max((a1 - a2).abs() / a1.abs().max(1.0));
            }
        }
        Ok((worst, String::new()))
    });
    let points: Vec<Point<N>> = (0..8)
        .map(|i| {
            let u = halton(i + 1, N);
            ctx.point(&u.iter().map(|v| 0.8 * (2.0 * v - 1.0) / (N as f64).sqrt()).collect::<Vec<_>>())
        })
        .collect();
    let directions: Vec<Point<N>> = (0..8)
        .map(|k| {
            let th = std::f64::consts::PI * k as f64 / 4.0;
            let mut d = Point::<N>::zeros();
            d[0] = th.cos();
            d[1] = th.sin();
            d
        })
        .collect();
    let outgoing = SourceRays {
        orientation: Orientation::Outgoing,
        ..ctx.data(g.step)
    };
    let grid = DataGrid::sample(&outgoing, points, directions, g.step)?;
    ctx.write("forward.csv", &grid.to_csv())?;
    Ok(rec.report)
}

const KINETIC_STEPS: [f64; 3] = [4e-2, 2e-2, 1e-2];

fn kinetic_suite<const N: usize>(ctx: &Context<N>) -> Result<SuiteReport> {
    let m = &ctx.metric;
    let a = &ctx.source;
    let g = &ctx.cfg.grid;
    let data = ctx.data(g.step);
    let x = ctx.probe_point();
    let xi = ctx.probe_direction();
    let mut rec = Recorder::new("kinetic");
    let mut table = Vec::new();
    rec.check("residual", "kinetic equation", Threshold::Below(1e-4), || {
        let r = measure::kinetic_residuals(m, a, &data, &x, &xi, &[g.fd_step])?[0];
        table.push((g.fd_step, r));
        Ok((r, format!("h = {}", g.fd_step)))
    });
    rec.check("residual_order", "kinetic equation", Threshold::Within(1.7, 2.3), || {
        let r = measure::kinetic_residuals(m, a, &data, &x, &xi, &KINETIC_STEPS)?;
        table.extend(KINETIC_STEPS.iter().copied().zip(r.iter().copied()));
        Ok((measure::halving_order(&r), sci_list(&r)))
    });
    let mut csv = String::from("h,residual\n");
    for (h, r) in table {
        csv.push_str(&format!("{h},{r}\n"));
    }
    ctx.write("kinetic.csv", &csv)?;
    Ok(rec.report)
}

const TRANSPORT_STEPS: [f64; 3] = [4e-2, 2e-2, 1e-2];

fn spectrum_suite<const N: usize>(ctx: &Context<N>) -> Result<SuiteReport> {
    let m = &ctx.metric;
    let g = &ctx.cfg.grid;
    let mut rec = Recorder::new("spectrum");
    let window = ctx.window()?;
    let small = ctx.check_window()?;
    rec.check("parseval", "Fourier transform in the first direction", Threshold::Below(1e-6), || {
        Ok((measure::parseval_defect(&window)?, String::new()))
    });
    rec.check("closed_forms", "Fourier transform in the first direction", Threshold::Below(1e-10), || {
        Ok((measure::closed_form_defect(&window)?, "indicator, gaussian".into()))
    });
    let data = ctx.data(g.check_step);
    let x = ctx.probe_point();
    let xp = ctx.xi_prime();
    rec.check("transport_order", "transformed kinetic equation", Threshold::Within(1.7, 2.3), || {
        let eta = 3.0 * small.deta();
        let r = measure::transport_residuals(m, &data, &x, &xp, eta, &TRANSPORT_STEPS, &small)?;
        Ok((measure::halving_order(&r), sci_list(&r)))
    });
    rec.check("characteristic", "characteristic solution", Threshold::Below(5e-4), || {
        let probes = measure::random_probes(&m.domain, g.probes, 0.6, ctx.seed(4));
        let settings = CharacteristicProbe {
            window: small,
            eta_cells: vec![3.0, 5.0, 8.0, 2.0],
            h: g.fd_step,
            delta: 1e-4,
            intervals: 16,
        };
        Ok((measure::characteristic_mismatch(m, &data, &probes, &settings)?, format!("{} probes", probes.len())))
    });
    let full = ctx.data(g.step);
    let s = spectrum(&full, &x, &xp, &window, ctx.taper(), Stencil::Value, g.fd_step)?;
    ctx.write("spectrum.csv", &s.to_csv())?;
    Ok(rec.report)
}

fn lemma_suite<const N: usize>(ctx: &Context<N>) -> Result<SuiteReport> {
    let m = &ctx.metric;
    let a = &ctx.source;
    let g = &ctx.cfg.grid;
    let mut rec = Recorder::new("lemmas");
    let x = ctx.probe_point();
    let unit_prime: Vec<f64> = (1..N).map(|k| if k == 1 { 1.0 } else { 0.0 }).collect();
    let schedule = default_schedule();
    let probe = asymptotic_probe(m, &x, &unit_prime, &schedule);
    if let Ok(p) = &probe {
        ctx.write("probe.csv", &p.to_csv())?;
    }
    let probe = probe.as_ref().map_err(|e| e.to_string());
    rec.check("bounded_velocity", "bounded transverse velocity", Threshold::Within(-0.1, 0.1), || {
        let p = probe.clone().map_err(GeoError::Range)?;
        let worst = (2..=N)
            .filter_map(|k| p.get(&format!("xi_zdot{k}")))
            .map(|s| s.slope)
            .fold(0.0f64, |acc, s| if s.abs() > acc.abs() { s } else { acc });
        Ok((worst, "log-log slope of |xi| zdot^k".into()))
    });
    rec.check("bounded_derivatives", "bounded transverse velocity", Threshold::Holds, || {
        let p = probe.clone().map_err(GeoError::Range)?;
        let bad: Vec<&str> = p
            .series
            .iter()
            .filter(|s| s.name.starts_with('d') && !s.bounded)
            .map(|s| s.name.as_str())
            .collect();
        Ok((holds(bad.is_empty()), bad.join(" ")))
    });
    rec.check("index_one_growth", "growth of the first component", Threshold::Within(0.8, 1.2), || {
        let p = probe.clone().map_err(GeoError::Range)?;
        let s = p
            .get("xi1_zdot1")
            .ok_or_else(|| GeoError::Range("missing xi1_zdot1 series".into()))?;
        Ok((s.slope, "log-log slope of xi1 zdot1".into()))
    });
    let window = ctx.window()?;
    let data = ctx.data(g.step);
    let xp = ctx.xi_prime();
    rec.check("one_sided_continuity", "one-sided continuity at zero frequency", Threshold::Below(5e-2), || {
        let u = data.sweep_xi1(&x, &xp, &window.samples())?;
        let s = fourier_xi1(&u, &window, ctx.taper())?;
        let d = window.deta();
        let scale = s.p.iter().chain(&s.q).fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
        let lp = one_sided_limits(&s.eta, &s.p, 2.0 * d, 20.0 * d)?;
        let lq = one_sided_limits(&s.eta, &s.q, 2.0 * d, 20.0 * d)?;
        let rms = lp.rms_plus.max(lp.rms_minus).max(lq.rms_plus).max(lq.rms_minus);
        Ok((rms / scale, format!("p(0+) = {:.6e}, p(0-) = {:.6e}", lp.plus, lp.minus)))
    });
    rec.check("jump_extraction", "jump of a piecewise smooth function", Threshold::Below(1e-3), || {
        Ok((measure::synthetic_jump_error(&[1.0, -0.25, 0.05])?, "synthetic steps".into()))
    });
    let rays = measure::random_rays(&m.domain, 10, 1.0, ctx.seed(5));
    rec.check("homogeneity", "homogeneity of geodesics", Threshold::Below(1e-7), || {
        Ok((measure::homogeneity_deviation(m, &rays, &[0.5, 2.0, 10.0], g.step)?, String::new()))
    });
    rec.check("kinetic_equation", "kinetic equation", Threshold::Below(1e-4), || {
        let r = measure::kinetic_residuals(m, a, &data, &x, &ctx.probe_direction(), &[g.fd_step])?[0];
        Ok((r, String::new()))
    });
    let rhos = measure::rho_schedule(g.rho_min, g.rho_max)?;
    let direction: Vec<f64> = (1..N).map(|k| if k == 1 { 1.0 } else { 0.0 }).collect();
    let limits = limit_probe(&data, &x, &direction, &rhos, &window, ctx.taper(), g.fd_step);
    if let Ok(l) = &limits {
        ctx.write("limits.csv", &l.to_csv())?;
    }
    let limits = limits.as_ref().map_err(|e| e.to_string());
    let spectral_names = |n: &str| n == "p" || n == "eta_q" || n.ends_with("_p");
    for (name, tag, spectral_side) in [
        ("xi_prime_vanishing", "vanishing as the transverse direction shrinks", false),
        ("spectral_vanishing", "spectral vanishing as the transverse direction shrinks", true),
    ] {
        rec.check(name, tag, Threshold::Below(1e-3), || {
            let l = limits.clone().map_err(GeoError::Range)?;
            let mut worst = 0.0f64;
            let mut notes = Vec::new();
            for s in l.series.iter().filter(|s| spectral_names(&s.name) == spectral_side) {
                let last = *s.ratios.last().unwrap_or(&f64::INFINITY);
                let v = if s.monotone { last } else { last.max(1.0) };
                if v >= 1e-3 {
                    notes.push(format!("{}={:.3e}{}", s.name, last, if s.monotone { "" } else { " non-monotone" }));
                }
                worst = worst.max(v);
            }
            Ok((worst, notes.join(" ")))
        });
    }
    Ok(rec.report)
}

#[cfg(feature = "recovery")]
fn settings<const N: usize>(ctx: &Context<N>) -> Result<crate::recovery::RecoverySettings> {
    use super::config::EstimatorCfg;
    use crate::recovery::{Estimator, RecoverySettings};
    Ok(RecoverySettings {
        eps: (ctx.cfg.grid.eps > 0.0).then_some(ctx.cfg.grid.eps),
        estimator: match ctx.cfg.estimator {
            EstimatorCfg::Spectral => Estimator::Spectral,
            EstimatorCfg::Kinetic => Estimator::Kinetic,
            EstimatorCfg::Both => Estimator::Both,
        },
        window: ctx.window()?,
        taper: ctx.taper(),
        h: ctx.cfg.grid.fd_step,
        ..RecoverySettings::default()
    })
}

#[cfg(feature = "recovery")]
fn lattice<const N: usize>(ctx: &Context<N>) -> Vec<Point<N>> {
    let n = ctx.cfg.grid.lattice;
    let e = ctx.cfg.grid.lattice_extent;
    let coord = |i: usize| if n == 1 { 0.0 } else { -e + 2.0 * e * i as f64 / (n - 1) as f64 };
    (0..n * n).map(|k| ctx.point(&[coord(k / n), coord(k % n)])).collect()
}

#[cfg(feature = "recovery")]
fn recover_suite<const N: usize>(ctx: &Context<N>) -> Result<SuiteReport> {
    use crate::recovery::{recover_field, Estimator};
    use std::sync::Arc;
    let m = &ctx.metric;
    let mut rec = Recorder::new("recover");
    let settings = settings(ctx)?;
    let centers = lattice(ctx);
    let data: Arc<dyn RayData<N>> = Arc::new(ctx.data(ctx.cfg.grid.step));
    let field = recover_field(m, data, &centers, &settings);
    if let Ok(f) = &field {
        ctx.write("recover.csv", &f.to_csv())?;
    }
    let field = field.as_ref().map_err(|e| e.to_string());
    let limit = if settings.estimator == Estimator::Spectral { 0.15 } else { 0.05 };
    rec.check("field_error", "pointwise recovery", Threshold::Below(limit), || {
        let f = field.clone().map_err(GeoError::Range)?;
        let scale = f
            .centers
            .iter()
            .map(|c| ctx.source.matrix(&c.center).amax())
            .fold(0.0, f64::max);
        let err = f
            .centers
            .iter()
            .map(|c| (c.matrix() - ctx.source.matrix(&c.center)).amax())
            .fold(0.0, f64::max);
        Ok((if scale > 0.0 { err / scale } else { err }, format!("{} centers", f.centers.len())))
    });
    rec.check("center_failures", "pointwise recovery", Threshold::Below(0.5), || {
        let f = field.clone().map_err(GeoError::Range)?;
        Ok((f.failures() as f64, String::new()))
    });
    Ok(rec.report)
}

#[cfg(feature = "recovery")]
fn uniqueness_suite<const N: usize>(ctx: &Context<N>) -> Result<SuiteReport> {
    use crate::ray::ZeroData;
    use crate::recovery::{recover_field, uniqueness_check, Verdict};
    use std::sync::Arc;
    let m = &ctx.metric;
    let mut rec = Recorder::new("uniqueness");
    let settings = settings(ctx)?;
    let centers = lattice(ctx);
    rec.check("zero_data", "uniqueness", Threshold::Below(1e-6), || {
        let f = recover_field(m, Arc::new(ZeroData), &centers, &settings)?;
        Ok((f.max_abs(), String::new()))
    });
    let other = build_source::<N>(ctx.cfg, 0.5, 2)?;
    let report = uniqueness_check(m, &ctx.source, &other, ctx.cfg.grid.step, &centers, &settings);
    if let Ok(r) = &report {
        let mut csv = String::from("x1,x2,recovered_a22,true_a22\n");
        for (c, got, truth) in &r.comparisons {
            csv.push_str(&format!("{},{},{},{}\n", c[0], c[1], got[(1, 1)], truth[(1, 1)]));
        }
        ctx.write("uniqueness.csv", &csv)?;
    }
    let report = report.as_ref().map_err(|e| e.to_string());
    rec.check("verdict", "uniqueness", Threshold::Holds, || {
        let r = report.clone().map_err(GeoError::Range)?;
        Ok((
            holds(r.verdict == Verdict::UniqueConsistent),
            format!("{}, worst relative {:.3e}, boundary max {:.3e}", r.verdict, r.worst_relative, r.boundary_max),
        ))
    });
    Ok(rec.report)
}
