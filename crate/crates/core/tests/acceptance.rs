//! Acceptance criteria 1–10. Each test prints one `criterion N: PASS|FAIL` line
//! with the measured values, then asserts. Tests share a lock so wall-clock
//! budgets are measured without competing test threads.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use geokinetic::harness::measure::{self, CharacteristicProbe};
use geokinetic::metric::{DomainBall, MetricField, Point};
use geokinetic::ray::{forward_ray, SourceRays};
use geokinetic::source::SourceField;
use geokinetic::spectral::{asymptotic_probe, default_schedule, limit_probe, Taper, XiWindow};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn euclid() -> MetricField<2> {
    MetricField::euclidean(DomainBall::unit(0.1))
}

/// `g_22 = 1 + 0.3 (1 - |x|²)^7` inside the unit disc.
fn m1() -> MetricField<2> {
    MetricField::bump(DomainBall::unit(0.1), 0.3, 7)
}

/// `a_22 = (1 - |x|²)^6`.
fn unit_bump() -> SourceField<2> {
    SourceField::bump(&[1.0], 1.0, 6).unwrap()
}

fn report(criterion: u32, pass: bool, detail: &str) {
    println!("criterion {criterion}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(" ")
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

#[test]
fn criterion_01_euclidean_geodesics() {
    const TOL: f64 = 1e-10;
    const BUDGET: Duration = Duration::from_secs(5);
    let _g = serial();
    let start = Instant::now();
    let m = euclid();
    let rays = measure::random_rays(&m.domain, 100, 1.0, 1);
    let dev = measure::straight_line_deviation(&m, &rays, 1e-3).unwrap();
    let wall = start.elapsed();
    let pass = dev < TOL && wall < BUDGET;
    report(1, pass, &format!("max deviation {dev:.3e} (< {TOL:e}), {wall:.2?} (< {BUDGET:?})"));
    assert!(pass);
}

#[test]
fn criterion_02_homogeneity() {
    const TOL: f64 = 1e-7;
    const BUDGET: Duration = Duration::from_secs(30);
    let _g = serial();
    let start = Instant::now();
    let m = m1();
    let rays = measure::random_rays(&m.domain, 50, 1.0, 2);
    let dev = measure::homogeneity_deviation(&m, &rays, &[0.5, 2.0, 10.0], 1e-3).unwrap();
    let wall = start.elapsed();
    let pass = dev < TOL && wall < BUDGET;
    report(2, pass, &format!("relative deviation {dev:.3e} (< {TOL:e}), {wall:.2?} (< {BUDGET:?})"));
    assert!(pass);
}

#[test]
fn criterion_03_forward_oracle() {
    const TOL: f64 = 1e-8;
    const BUDGET: Duration = Duration::from_secs(1);
    let _g = serial();
    let start = Instant::now();
    let m = euclid();
    let a = unit_bump();
    let xi = Point::<2>::new(0.0, 1.0);
    let u = forward_ray(&m, &a, &Point::zeros(), &xi, 1e-3).unwrap();
    let oracle = measure::gauss_legendre(|t| (1.0 - t * t).powi(6), 0.0, 1.0, 400);
    let wall = start.elapsed();
    let pass = (u - oracle).abs() < TOL && (oracle - 0.3410).abs() < 5e-5 && wall < BUDGET;
    report(
        3,
        pass,
        &format!("u = {u:.12}, oracle = {oracle:.12}, gap {:.3e} (< {TOL:e}), {wall:.2?}", (u - oracle).abs()),
    );
    assert!(pass);
}

#[test]
fn criterion_04_kinetic_residual() {
    const ORDER: (f64, f64) = (1.7, 2.3);
    const ABS_TOL: f64 = 1e-4;
    const BUDGET: Duration = Duration::from_secs(120);
    const STEPS: [f64; 3] = [4e-2, 2e-2, 1e-2];
    let _g = serial();
    let start = Instant::now();
    let a = unit_bump();
    let x = Point::<2>::new(0.15, -0.1);
    let xi = Point::<2>::new(0.8, 0.6);
    let mut pass = true;
    let mut detail = String::new();
    for (name, m) in [("euclidean", euclid()), ("M1", m1())] {
        let data = SourceRays::incoming(m.clone(), a.clone(), 1e-3);
        let r = measure::kinetic_residuals(&m, &a, &data, &x, &xi, &STEPS).unwrap();
        let orders: Vec<f64> = r.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        pass &= orders.iter().all(|o| within(*o, ORDER.0, ORDER.1));
        detail.push_str(&format!("{name} orders {orders:.3?}; "));
        if name == "euclidean" {
            let r0 = measure::kinetic_residuals(&m, &a, &data, &x, &xi, &[1e-3]).unwrap()[0];
            pass &= r0 < ABS_TOL;
            detail.push_str(&format!("|residual| at h=1e-3 {r0:.3e} (< {ABS_TOL:e}); "));
        }
    }
    let wall = start.elapsed();
    pass &= wall < BUDGET;
    report(4, pass, &format!("{detail}{wall:.2?}"));
    assert!(pass);
}

#[test]
fn criterion_05_growth_contrast() {
    const BOUNDED: (f64, f64) = (-0.1, 0.1);
    const LINEAR: (f64, f64) = (0.8, 1.2);
    const BUDGET: Duration = Duration::from_secs(60);
    let _g = serial();
    let start = Instant::now();
    let x = Point::<2>::new(0.15, -0.1);
    let schedule = default_schedule();
    assert_eq!(schedule.first().copied(), Some(1.0));
    assert!((schedule.last().unwrap() - 1e4).abs() < 1e-9);
    let mut pass = true;
    let mut detail = String::new();
    for (name, m) in [("euclidean", euclid()), ("M1", m1())] {
        let p = asymptotic_probe(&m, &x, &[1.0], &schedule).unwrap();
        let bounded = p.get("xi_zdot2").unwrap().slope;
        let linear = p.get("xi1_zdot1").unwrap().slope;
        pass &= within(bounded, BOUNDED.0, BOUNDED.1) && within(linear, LINEAR.0, LINEAR.1);
        detail.push_str(&format!("{name}: |xi| zdot2 slope {bounded:.4}, index-1 slope {linear:.4}; "));
    }
    let wall = start.elapsed();
    pass &= wall < BUDGET;
    report(5, pass, &format!("{detail}{wall:.2?}"));
    assert!(pass);
}

#[test]
fn criterion_06_spectral_identities() {
    const PARSEVAL: f64 = 1e-6;
    const CLOSED: f64 = 1e-10;
    const ORDER: (f64, f64) = (1.7, 2.3);
    const BUDGET: Duration = Duration::from_secs(120);
    const STEPS: [f64; 3] = [4e-2, 2e-2, 1e-2];
    let _g = serial();
    let start = Instant::now();
    let window = XiWindow::default();
    let parseval = measure::parseval_defect(&window).unwrap();
    let closed = measure::closed_form_defect(&window).unwrap();
    let mut pass = parseval < PARSEVAL && closed < CLOSED;
    let mut detail = format!("parseval {parseval:.3e}, closed forms {closed:.3e}; ");
    let small = XiWindow::new(8.0, 128).unwrap();
    let x = Point::<2>::new(0.15, -0.1);
    for (name, m) in [("euclidean", euclid()), ("M1", m1())] {
        let data = SourceRays::incoming(m.clone(), unit_bump(), 4e-3);
        let r = measure::transport_residuals(&m, &data, &x, &[0.7], 3.0 * small.deta(), &STEPS, &small).unwrap();
        let orders: Vec<f64> = r.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        pass &= orders.iter().all(|o| within(*o, ORDER.0, ORDER.1));
        detail.push_str(&format!("{name} transport orders {orders:.3?}; "));
    }
    let wall = start.elapsed();
    pass &= wall < BUDGET;
    report(6, pass, &format!("{detail}{wall:.2?}"));
    assert!(pass);
}

#[test]
fn criterion_07_characteristic_consistency() {
    const TOL: f64 = 5e-4;
    const BUDGET: Duration = Duration::from_secs(120);
    let _g = serial();
    let start = Instant::now();
    let settings = CharacteristicProbe {
        window: XiWindow::new(8.0, 128).unwrap(),
        eta_cells: vec![2.0, 3.0, 5.0, 8.0],
        h: 1e-3,
        delta: 1e-4,
        intervals: 16,
    };
    let mut pass = true;
    let mut detail = String::new();
    for (name, m) in [("euclidean", euclid()), ("M1", m1())] {
        let probes = measure::random_probes(&m.domain, 20, 0.6, 7);
        let data = SourceRays::incoming(m.clone(), unit_bump(), 4e-3);
        let worst = measure::characteristic_mismatch(&m, &data, &probes, &settings).unwrap();
        pass &= worst < TOL;
        detail.push_str(&format!("{name} worst |mismatch| {worst:.3e} over {} probes; ", probes.len()));
    }
    let wall = start.elapsed();
    pass &= wall < BUDGET;
    report(7, pass, &format!("{detail}(< {TOL:e}), {wall:.2?}"));
    assert!(pass);
}

#[cfg(feature = "recovery")]
#[test]
fn criterion_08_jump_scaling() {
    use geokinetic::recovery::{recover_point, Estimator, RecoverySettings};
    use std::sync::Arc;
    const EXPONENT: (f64, f64) = (1.8, 2.2);
    const KINETIC_TOL: f64 = 0.05;
    const SPECTRAL_TOL: f64 = 0.15;
    const BUDGET: Duration = Duration::from_secs(300);
    let _g = serial();
    let start = Instant::now();
    let m = euclid();
    let data: Arc<dyn geokinetic::ray::RayData<2>> = Arc::new(SourceRays::incoming(m.clone(), unit_bump(), 1e-3));
    let eps = [0.2, 0.1, 0.05];
    let mut deltas = Vec::new();
    let mut spectral = Vec::new();
    let mut kinetic = Vec::new();
    for &e in &eps {
        let s = RecoverySettings {
            eps: Some(e),
            estimator: Estimator::Both,
            ..RecoverySettings::default()
        };
        let est = recover_point(&m, data.clone(), &Point::zeros(), &s).unwrap();
        deltas.push(est.jumps[0].delta.abs());
        spectral.push(est.spectral.unwrap()[(1, 1)]);
        kinetic.push(est.kinetic.unwrap()[(1, 1)]);
    }
    let exponent = geokinetic::numerics::loglog_slope(&eps, &deltas);
    let k = *kinetic.last().unwrap();
    let sp = *spectral.last().unwrap();
    let wall = start.elapsed();
    let pass = within(exponent, EXPONENT.0, EXPONENT.1)
        && (k - 1.0).abs() < KINETIC_TOL
        && (sp - 1.0).abs() < SPECTRAL_TOL
        && wall < BUDGET;
    report(
        8,
        pass,
        &format!(
            "exponent {exponent:.4} from |delta| [{}]; a22 kinetic {k:.6}, spectral {sp:.6} (spectral by eps {spectral:.5?}), {wall:.2?}",
            sci(&deltas)
        ),
    );
    assert!(pass);
}

#[cfg(feature = "recovery")]
#[test]
fn criterion_09_uniqueness() {
    use geokinetic::ray::ZeroData;
    use geokinetic::recovery::{recover_field, uniqueness_check, RecoverySettings, Verdict};
    use std::sync::Arc;
    const ZERO_TOL: f64 = 1e-6;
    const REL_TOL: f64 = 0.1;
    const BUDGET: Duration = Duration::from_secs(300);
    let _g = serial();
    let start = Instant::now();
    let m = m1();
    let centers: Vec<Point<2>> = (0..9)
        .map(|k| Point::<2>::new(-0.3 + 0.3 * (k / 3) as f64, -0.3 + 0.3 * (k % 3) as f64))
        .collect();
    let s = RecoverySettings::default();
    let zero = recover_field(&m, Arc::new(ZeroData), &centers, &s).unwrap();
    let zero_max = zero.max_abs();
    let lhs = unit_bump();
    let rhs = SourceField::bump_at(Point::<2>::new(0.1, -0.05), &[0.5], 0.8, 8).unwrap();
    let r = uniqueness_check(&m, &lhs, &rhs, 1e-3, &centers, &s).unwrap();
    let wall = start.elapsed();
    let pass = zero_max < ZERO_TOL
        && zero.failures() == 0
        && r.verdict == Verdict::UniqueConsistent
        && r.worst_relative < REL_TOL
        && wall < BUDGET;
    report(
        9,
        pass,
        &format!(
            "zero data max |a| {zero_max:.3e} (< {ZERO_TOL:e}); distinct sources: {}, worst relative {:.3e} (< {REL_TOL}), {wall:.2?}",
            r.verdict, r.worst_relative
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_small_transverse_limits() {
    const RATIO: f64 = 1e-3;
    const BUDGET: Duration = Duration::from_secs(180);
    let _g = serial();
    let start = Instant::now();
    let m = euclid();
    let data = SourceRays::incoming(m.clone(), unit_bump(), 1e-3);
    let rhos = [1.0, 0.3, 0.1, 0.03, 0.01];
    let report10 = limit_probe(
        &data,
        &Point::<2>::new(0.15, -0.1),
        &[1.0],
        &rhos,
        &XiWindow::default(),
        Taper::standard(),
        1e-3,
    )
    .unwrap();
    let wall = start.elapsed();
    let mut failing = Vec::new();
    for s in &report10.series {
        let last = *s.ratios.last().unwrap();
        println!("  {:<16} ratios {} monotone {}", s.name, sci(&s.ratios), s.monotone);
        if !(s.monotone && last < RATIO) {
            failing.push(format!("{} ({last:.3e})", s.name));
        }
    }
    let pass = failing.is_empty() && wall < BUDGET;
    report(
        10,
        pass,
        &format!("ratio at |xi'| = 0.01 must be < {RATIO:e} with monotone decrease; failing: [{}], {wall:.2?}", failing.join(", ")),
    );
    assert!(pass);
}
