use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of `t^2, t^4, ..., t^10` in the degree-10 Kuhn–Grün surrogate.
pub const P10_COEFFS: [f64; 5] = [3.0 / 2.0, 9.0 / 20.0, 9.0 / 350.0, 81.0 / 7000.0, 243.0 / 673750.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KgMode {
    Exact,
    P10,
}

/// Langevin function `coth t - 1/t`.
pub fn langevin(t: f64) -> f64 {
    let a = t.abs();
    if a < 0.1 {
        let t2 = t * t;
        // odd series: t/3 - t^3/45 + 2t^5/945 - t^7/4725 + 2t^9/93555
        t * (1.0 / 3.0 + t2 * (-1.0 / 45.0 + t2 * (2.0 / 945.0 + t2 * (-1.0 / 4725.0 + t2 * 2.0 / 93555.0))))
    } else {
        1.0 / t.tanh() - 1.0 / t
    }
}

/// Derivative of the Langevin function, `1/t^2 - 1/sinh(t)^2`.
pub fn langevin_derivative(t: f64) -> f64 {
    let a = t.abs();
    if a < 0.1 {
        let t2 = t * t;
        1.0 / 3.0 + t2 * (-1.0 / 15.0 + t2 * (2.0 / 189.0 + t2 * (-1.0 / 675.0 + t2 * 2.0 / 10395.0)))
    } else if a > 40.0 {
        1.0 / (t * t)
    } else {
        let s = t.sinh();
        1.0 / (t * t) - 1.0 / (s * s)
    }
}

/// Inverse of the Langevin function on `(-1, 1)`.
pub fn inverse_langevin(x: f64) -> Result<f64> {
    if !(x.abs() < 1.0) {
        return Err(Error::OutOfRange(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let (sign, y) = (x.signum(), x.abs());
    let mut th = y * (3.0 - y * y) / (1.0 - y * y);
    let tol = 1e-15 * y.max(1e-300);
    for _ in 0..60 {
        let r = langevin(th) - y;
        if r.abs() <= tol {
            break;
        }
        let step = r / langevin_derivative(th);
        let next = th - step;
        if !(next > 0.0) || !next.is_finite() {
            break;
        }
        th = next;
        if step.abs() <= 1e-16 * th {
            break;
        }
    }
    if !((langevin(th) - y).abs() <= 1e-13 * (1.0 + y)) || !(th > 0.0) {
        let (mut lo, mut hi) = (0.0f64, 1e3 / (1.0 - y));
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if langevin(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        th = 0.5 * (lo + hi);
    }
    Ok(sign * th)
}

/// `log(sinh(t) / t)` for `t >= 0`.
fn log_sinhc(t: f64) -> f64 {
    if t < 0.5 {
        let t2 = t * t;
        (t2 / 6.0 * (1.0 + t2 / 20.0 * (1.0 + t2 / 42.0 * (1.0 + t2 / 72.0 * (1.0 + t2 / 110.0))))).ln_1p()
    } else if t > 20.0 {
        t - std::f64::consts::LN_2 - t.ln() + (-(-2.0 * t).exp()).ln_1p()
    } else {
        (t.sinh() / t).ln()
    }
}

fn p10(t: f64) -> f64 {
    let t2 = t * t;
    let c = &P10_COEFFS;
    t2 * (c[0] + t2 * (c[1] + t2 * (c[2] + t2 * (c[3] + t2 * c[4]))))
}

/// `f'(t) / t` for the surrogate, an even polynomial.
fn p10_slope_ratio(t: f64) -> f64 {
    let t2 = t * t;
    let c = &P10_COEFFS;
    2.0 * c[0] + t2 * (4.0 * c[1] + t2 * (6.0 * c[2] + t2 * (8.0 * c[3] + t2 * 10.0 * c[4])))
}

fn p10_second(t: f64) -> f64 {
    let t2 = t * t;
    let c = &P10_COEFFS;
    2.0 * c[0] + t2 * (12.0 * c[1] + t2 * (30.0 * c[2] + t2 * (56.0 * c[3] + t2 * 90.0 * c[4])))
}

/// Free energy per monomer of a chain at relative extension `t`.
pub fn kuhn_grun(t: f64, mode: KgMode) -> Result<f64> {
    let t = t.abs();
    match mode {
        KgMode::P10 => Ok(p10(t)),
        KgMode::Exact => {
            if t >= 1.0 {
                return Err(Error::OutOfRange(t));
            }
            if t == 0.0 {
                return Ok(0.0);
            }
            let th = inverse_langevin(t)?;
            Ok(t * th - log_sinhc(th))
        }
    }
}

/// `f'(t) / t`, finite at `t = 0` (the value there is 3).
pub fn kuhn_grun_slope_ratio(t: f64, mode: KgMode) -> Result<f64> {
    let t = t.abs();
    match mode {
        KgMode::P10 => Ok(p10_slope_ratio(t)),
        KgMode::Exact => {
            if t >= 1.0 {
                return Err(Error::OutOfRange(t));
            }
            if t < 1e-8 {
                return Ok(3.0 + 1.8 * t * t);
            }
            Ok(inverse_langevin(t)? / t)
        }
    }
}

/// `f''(t)`.
pub fn kuhn_grun_second(t: f64, mode: KgMode) -> Result<f64> {
    let t = t.abs();
    match mode {
        KgMode::P10 => Ok(p10_second(t)),
        KgMode::Exact => {
            if t >= 1.0 {
                return Err(Error::OutOfRange(t));
            }
            Ok(1.0 / langevin_derivative(inverse_langevin(t)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn langevin_series_matches_closed_form_at_switch() {
        for t in [0.099, 0.1, 0.101] {
            let direct = 1.0 / f64::tanh(t) - 1.0 / t;
            assert!((langevin(t) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse_langevin(0.0).unwrap(), 0.0);
        let x = 1.0 / 3.0f64.tanh() - 1.0 / 3.0;
        assert!((x - 0.671636).abs() < 1e-6);
        assert!((inverse_langevin(x).unwrap() - 3.0).abs() < 1e-9);
        let big = inverse_langevin(0.999).unwrap();
        assert!(big.is_finite() && big > 100.0);
        assert!(matches!(inverse_langevin(1.0), Err(Error::OutOfRange(_))));
        assert!(matches!(inverse_langevin(-1.5), Err(Error::OutOfRange(_))));
        assert_eq!(inverse_langevin(-0.3).unwrap(), -inverse_langevin(0.3).unwrap());
        assert!((inverse_langevin(1e-6).unwrap() / 1e-6 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn inverse_round_trip_near_pole() {
        for x in [0.9, 0.99, 0.999, 0.999999, 1e-12, 0.05, 0.5] {
            let th = inverse_langevin(x).unwrap();
            assert!((langevin(th) - x).abs() <= 1e-12, "x = {x}");
        }
    }

    #[test]
    fn kuhn_grun_values() {
        assert_eq!(kuhn_grun(0.0, KgMode::P10).unwrap(), 0.0);
        assert_eq!(kuhn_grun(0.0, KgMode::Exact).unwrap(), 0.0);
        assert!(matches!(kuhn_grun(1.0, KgMode::Exact), Err(Error::OutOfRange(_))));
        let t = 0.1;
        let want = 1.5 * 0.01 + 0.45 * 1e-4 + 9.0 / 350.0 * 1e-6 + 81.0 / 7000.0 * 1e-8 + 243.0 / 673750.0 * 1e-10;
        assert!((kuhn_grun(t, KgMode::P10).unwrap() - want).abs() < 1e-17);
    }

    #[test]
    fn exact_against_bisection_oracle() {
        // theta by plain bisection on coth - 1/t, then f = t theta - log(sinh theta / theta)
        let t = 0.3f64;
        let (mut lo, mut hi) = (0.0f64, 50.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if 1.0 / m.tanh() - 1.0 / m < t {
                lo = m
            } else {
                hi = m
            }
        }
        let th = 0.5 * (lo + hi);
        let oracle = t * th - (th.sinh() / th).ln();
        let exact = kuhn_grun(t, KgMode::Exact).unwrap();
        assert!((exact - oracle).abs() < 1e-13);
        // 50-digit reference values at t = 0.3
        assert!((exact - 0.138_866_829_317_749_56).abs() < 1e-15);
        let p10 = kuhn_grun(t, KgMode::P10).unwrap();
        assert!((p10 - 0.138_664_507_045_422_19).abs() < 1e-16);
        assert!((exact - p10 - 2.023_222_723_273_670_8e-4).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_differences() {
        for mode in [KgMode::P10, KgMode::Exact] {
            for t in [0.05, 0.3, 0.7, 0.9] {
                let h = 1e-6;
                let fd = (kuhn_grun(t + h, mode).unwrap() - kuhn_grun(t - h, mode).unwrap()) / (2.0 * h);
                let an = kuhn_grun_slope_ratio(t, mode).unwrap() * t;
                assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "{mode:?} {t}: {fd} vs {an}");
                let fd2 = (kuhn_grun_slope_ratio(t + h, mode).unwrap() * (t + h)
                    - kuhn_grun_slope_ratio(t - h, mode).unwrap() * (t - h))
                    / (2.0 * h);
                let an2 = kuhn_grun_second(t, mode).unwrap();
                assert!((fd2 - an2).abs() < 1e-6 * (1.0 + an2.abs()), "{mode:?} {t}: {fd2} vs {an2}");
            }
        }
    }

    #[test]
    fn convex_and_increasing() {
        for mode in [KgMode::P10, KgMode::Exact] {
            let vals: Vec<f64> = (0..100).map(|k| kuhn_grun(k as f64 / 101.0, mode).unwrap()).collect();
            for w in vals.windows(3) {
                assert!(w[1] > w[0] || w[0] == 0.0 && w[1] > 0.0);
                assert!(w[2] - 2.0 * w[1] + w[0] > -1e-15);
            }
        }
    }
}
