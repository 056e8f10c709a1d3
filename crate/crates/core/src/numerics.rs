//! Small numerical kernels shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};

/// Integrates samples `f` taken at `t[0] < t[1] < ... < t[m]` where every
/// interval except possibly the last has the same width.
///
/// Composite Simpson is used on the uniform part. A leftover odd interval and
/// the final partial interval are closed with the three-point end rule, which
/// stays well conditioned when the last interval shrinks to zero.
pub fn simpson_tail(t: &[f64], f: &[f64]) -> f64 {
    assert_eq!(t.len(), f.len());
    let m = t.len();
    if m < 2 {
        return 0.0;
    }
    if m == 2 {
        return 0.5 * (t[1] - t[0]) * (f[0] + f[1]);
    }
    // uniform samples are 0..=k, the last sample m-1 may sit off-grid
    let h = t[1] - t[0];
    let last_off_grid = {
        let gap = t[m - 1] - t[m - 2];
        (gap - h).abs() > 1e-9 * h
    };
    let k = if last_off_grid { m - 2 } else { m - 1 };
    let mut total = 0.0;
    let even = k - k % 2;
    let mut i = 0;
    while i + 2 <= even {
        total += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
        i += 2;
    }
    if k % 2 == 1 {
        total += if k >= 2 {
            end_rule(t, f, k)
        } else {
            0.5 * h * (f[0] + f[1])
        };
    }
    if last_off_grid {
        total += end_rule(t, f, m - 1);
    }
    total
}

/// Integral over `[t[j-1], t[j]]` of the parabola through samples `j-2..=j`.
fn end_rule(t: &[f64], f: &[f64], j: usize) -> f64 {
    if j < 2 {
        return 0.5 * (t[j] - t[j - 1]) * (f[j] + f[j - 1]);
    }
    let h0 = t[j - 1] - t[j - 2];
    let h1 = t[j] - t[j - 1];
    if h1 <= 0.0 {
        return 0.0;
    }
    let alpha = (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
    let beta = (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0);
    let eta = h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    alpha * f[j] + beta * f[j - 1] - eta * f[j - 2]
}

/// Composite Simpson on an evenly spaced grid with an even number of intervals.
pub fn simpson_uniform(h: f64, f: &[f64]) -> f64 {
    let n = f.len() - 1;
    assert!(n >= 2 && n.is_multiple_of(2), "simpson needs an even interval count");
    let mut s = f[0] + f[n];
    for (i, v) in f.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Least-squares polynomial fit, coefficients in increasing degree.
/// Returns the coefficients and the root-mean-square residual.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> (Vec<f64>, f64) {
    let rows = x.len();
    let cols = degree + 1;
    let a = DMatrix::from_fn(rows, cols, |i, j| x[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let c = svd.solve(&b, 1e-14).expect("svd with both factors");
    let r = &a * &c - &b;
    let rms = (r.norm_squared() / rows as f64).sqrt();
    (c.iter().copied().collect(), rms)
}

pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 50,
            fd_step: 1e-7,
            max_halvings: 30,
        }
    }
}

/// Damped Gauss-Newton for `f(p) = 0`, with a forward-difference Jacobian.
/// The step is halved until the residual norm decreases.
pub fn gauss_newton<F>(f: F, p0: DVector<f64>, opts: &NewtonOptions) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut p = p0;
    let mut r = f(&p)?;
    let mut rn = r.norm();
    for _ in 0..opts.max_iter {
        if rn < opts.tol {
            return Ok(p);
        }
        let m = r.len();
        let k = p.len();
        let mut jac = DMatrix::zeros(m, k);
        for j in 0..k {
            let mut q = p.clone();
            q[j] += opts.fd_step;
            let rq = f(&q)?;
            jac.set_column(j, &((rq - &r) / opts.fd_step));
        }
        let delta = jac
            .svd(true, true)
            .solve(&(-&r), 1e-13)
            .map_err(|e| GeoError::Range(e.to_string()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..opts.max_halvings {
            let trial = &p + &delta * lambda;
            if let Ok(rt) = f(&trial) {
                let tn = rt.norm();
                if tn < rn {
                    p = trial;
                    r = rt;
                    rn = tn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn < opts.tol {
        Ok(p)
    } else {
        Err(GeoError::Connectivity {
            iterations: opts.max_iter,
            miss: rn,
        })
    }
}

/// Radical-inverse Halton point in `[0,1)^d` for the first `d` primes.
pub fn halton(index: usize, d: usize) -> Vec<f64> {
    const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    (0..d)
        .map(|k| {
            let b = PRIMES[k];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index + 1;
            while i > 0 {
                f /= b as f64;
                r += f * (i % b) as f64;
                i /= b;
            }
            r
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    polyfit(&lx, &ly, 1).0[1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubics_with_partial_tail() {
        let f = |t: f64| 1.0 + t - 2.0 * t * t + 0.5 * t * t * t;
        let exact = |t: f64| t + t * t / 2.0 - 2.0 * t * t * t / 3.0 + t.powi(4) / 8.0;
        for k in 2..9 {
            for tail in [0.0, 1e-15, 0.3, 0.999] {
                let h = 0.1;
                let mut t: Vec<f64> = (0..=k).map(|i| i as f64 * h).collect();
                if tail > 0.0 {
                    t.push((k as f64 + tail) * h);
                }
                let v: Vec<f64> = t.iter().map(|&s| f(s)).collect();
                let end = *t.last().unwrap();
                // end rule is exact for quadratics only; cubic term gives O(h^4)
                assert!((simpson_tail(&t, &v) - exact(end)).abs() < 1e-4, "k={k} tail={tail}");
            }
        }
    }

    #[test]
    fn simpson_tail_exact_for_quadratics() {
        let f = |t: f64| 2.0 - t + 3.0 * t * t;
        let exact = |t: f64| 2.0 * t - t * t / 2.0 + t * t * t;
        for k in 2..7 {
            let mut t: Vec<f64> = (0..=k).map(|i| i as f64 * 0.25).collect();
            t.push(k as f64 * 0.25 + 0.07);
            let v: Vec<f64> = t.iter().map(|&s| f(s)).collect();
            assert!((simpson_tail(&t, &v) - exact(*t.last().unwrap())).abs() < 1e-13);
        }
    }

    #[test]
    fn polyfit_recovers_quadratic() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 2.0 * v + 0.25 * v * v).collect();
        let (c, rms) = polyfit(&x, &y, 2);
        assert!((c[0] - 1.5).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-11);
        assert!((c[2] - 0.25).abs() < 1e-10 && rms < 1e-13);
    }

    #[test]
    fn newton_solves_nonlinear_system() {
        let f = |p: &DVector<f64>| {
            Ok(DVector::from_vec(vec![
                p[0] * p[0] + p[1] * p[1] - 5.0,
                p[0] * p[1] - 2.0,
            ]))
        };
        let p = gauss_newton(f, DVector::from_vec(vec![1.2, 1.8]), &NewtonOptions::default()).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9 && (p[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(0, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(1, 1), vec![0.25]);
    }
}
