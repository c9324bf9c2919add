//! Closed-form Black-Scholes prices and greeks, and the zero-hazard-volatility
//! CVA used as the base price of the meta-adjustment.
//!
//! Calls are on a driftless stock with zero rates: `C(S, K, v)` depends only
//! on the total variance `v`.

use alloc::vec;

use crate::error::{domain, Result};
use crate::linalg::Matrix;
use crate::model::GreekBundle;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF, `Φ(z) = ½ erfc(-z/√2)`.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * core::f64::consts::FRAC_1_SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * z * z)
}

/// A European call on a lognormal stock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallSpec {
    pub strike: f64,
    pub maturity: f64,
    /// Lognormal volatility of the stock.
    pub sigma_s: f64,
}

impl CallSpec {
    pub fn new(strike: f64, maturity: f64, sigma_s: f64) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(domain!("strike must be positive, got {strike}"));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(domain!("maturity must be positive, got {maturity}"));
        }
        if !(sigma_s >= 0.0 && sigma_s.is_finite()) {
            return Err(domain!("volatility must be non-negative, got {sigma_s}"));
        }
        Ok(Self {
            strike,
            maturity,
            sigma_s,
        })
    }

    /// Total variance `σ²(T - t)` left at time `t`.
    pub fn variance_at(&self, t: f64) -> f64 {
        self.sigma_s * self.sigma_s * (self.maturity - t).max(0.0)
    }
}

fn check_spot_strike(s: f64, k: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(domain!("spot must be positive, got {s}"));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(domain!("strike must be positive, got {k}"));
    }
    Ok(())
}

fn d_plus_minus(s: f64, k: f64, sqrt_v: f64) -> (f64, f64) {
    let d_plus = libm::log(s / k) / sqrt_v + 0.5 * sqrt_v;
    (d_plus, d_plus - sqrt_v)
}

/// `C(S, K, v) = S Φ(d₊) - K Φ(d₋)`, intrinsic value at `v = 0`.
pub fn bs_call(s: f64, k: f64, v: f64) -> Result<f64> {
    check_spot_strike(s, k)?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(domain!("total variance must be non-negative, got {v}"));
    }
    if v == 0.0 {
        return Ok((s - k).max(0.0));
    }
    let (dp, dm) = d_plus_minus(s, k, libm::sqrt(v));
    Ok(s * norm_cdf(dp) - k * norm_cdf(dm))
}

/// Price and spot/variance sensitivities of `C(S, K, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallGreeks {
    pub price: f64,
    pub delta: f64,
    pub gamma: f64,
    /// `∂C/∂v`
    pub dv: f64,
}

/// Greeks of `C(S, K, v)`; at `v = 0` the limits away from the strike are
/// returned (gamma and `∂C/∂v` vanish, delta is a step).
pub fn bs_call_greeks(s: f64, k: f64, v: f64) -> Result<CallGreeks> {
    let price = bs_call(s, k, v)?;
    if v == 0.0 {
        if s == k {
            return Err(domain!("gamma is singular at the strike at zero variance"));
        }
        return Ok(CallGreeks {
            price,
            delta: if s > k { 1.0 } else { 0.0 },
            gamma: 0.0,
            dv: 0.0,
        });
    }
    let sqrt_v = libm::sqrt(v);
    let (dp, _) = d_plus_minus(s, k, sqrt_v);
    let pdf = norm_pdf(dp);
    Ok(CallGreeks {
        price,
        delta: norm_cdf(dp),
        gamma: pdf / (s * sqrt_v),
        dv: 0.5 * s * pdf / sqrt_v,
    })
}

/// Volatility sensitivities of `C(S, K, α²τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolGreeks {
    /// `∂_α C`
    pub vega: f64,
    /// `∂_{Sα} C`
    pub vanna: f64,
    /// `∂_{αα} C`
    pub volga: f64,
}

pub fn bs_greeks_sv(s: f64, alpha: f64, tau: f64, k: f64) -> Result<VolGreeks> {
    check_spot_strike(s, k)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(domain!("volatility must be positive, got {alpha}"));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(domain!("time to maturity must be positive, got {tau}"));
    }
    let sqrt_tau = libm::sqrt(tau);
    let (dp, dm) = d_plus_minus(s, k, alpha * sqrt_tau);
    let pdf = norm_pdf(dp);
    let vega = s * pdf * sqrt_tau;
    Ok(VolGreeks {
        vega,
        vanna: -pdf * dm / alpha,
        volga: vega * dp * dm / alpha,
    })
}

/// CVA of a call when the hazard rate is frozen:
/// `U = -(1 - e^{-λ(T-t)}) C(S, K, σ²(T-t))`.
pub fn boundary_cva(t: f64, lambda: f64, s: f64, spec: &CallSpec) -> Result<f64> {
    if t > spec.maturity {
        return Err(domain!("t = {t} is after maturity {}", spec.maturity));
    }
    let tau = spec.maturity - t;
    let v = bs_call(s, spec.strike, spec.sigma_s * spec.sigma_s * tau)?;
    // +0.0 turns a signed zero at λ = 0 or t = T into a plain zero
    Ok(libm::expm1(-lambda * tau) * v + 0.0)
}

/// Value and `(λ, S)` greeks of [`boundary_cva`], state ordered `(λ, S)`.
pub fn boundary_cva_greeks(t: f64, lambda: f64, s: f64, spec: &CallSpec) -> Result<GreekBundle> {
    if t >= spec.maturity {
        return Err(domain!("greeks are undefined at or after maturity (t = {t})"));
    }
    if spec.sigma_s == 0.0 {
        return Err(domain!("greeks are singular for zero stock volatility"));
    }
    let mut g = GreekBundle::zeros(2);
    boundary_cva_greeks_into(t, lambda, s, spec, &mut g)?;
    Ok(g)
}

/// In-place variant of [`boundary_cva_greeks`]. Past maturity every entry is
/// zero, which is the limit as `t → T` away from the strike.
pub fn boundary_cva_greeks_into(t: f64, lambda: f64, s: f64, spec: &CallSpec, out: &mut GreekBundle) -> Result<()> {
    let tau = spec.maturity - t;
    if tau <= 0.0 {
        out.clear();
        return Ok(());
    }
    let c = bs_call_greeks(s, spec.strike, spec.sigma_s * spec.sigma_s * tau)?;
    let survival = libm::exp(-lambda * tau);
    let loss = -libm::expm1(-lambda * tau);
    out.value = -loss * c.price + 0.0;
    out.grad[0] = -tau * survival * c.price;
    out.grad[1] = -loss * c.delta;
    let cross = -tau * survival * c.delta;
    out.hess[(0, 0)] = tau * tau * survival * c.price;
    out.hess[(0, 1)] = cross;
    out.hess[(1, 0)] = cross;
    out.hess[(1, 1)] = -loss * c.gamma;
    Ok(())
}

/// `(S, α)` greeks of `C(S, K, α²(T - t))` laid out as a [`GreekBundle`].
pub fn call_greeks_spot_vol(t: f64, s: f64, alpha: f64, spec: &CallSpec) -> Result<GreekBundle> {
    let tau = spec.maturity - t;
    let c = bs_call_greeks(s, spec.strike, alpha * alpha * tau.max(0.0))?;
    let mut g = GreekBundle::new(c.price, vec![c.delta, 0.0], Matrix::zeros(2, 2))?;
    g.hess[(0, 0)] = c.gamma;
    if tau > 0.0 {
        let sv = bs_greeks_sv(s, alpha, tau, spec.strike)?;
        g.grad[1] = sv.vega;
        g.hess[(0, 1)] = sv.vanna;
        g.hess[(1, 0)] = sv.vanna;
        g.hess[(1, 1)] = sv.volga;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    /// Composite Simpson rule, independent of the erfc-based CDF.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn density(z: f64) -> f64 {
        (-0.5 * z * z).exp() / (2.0 * core::f64::consts::PI).sqrt()
    }

    fn cdf_by_quadrature(z: f64) -> f64 {
        0.5 + simpson(density, 0.0, z, 40_000)
    }

    /// `E[(S e^{-v/2 + √v Z} - K)⁺]` by quadrature over the Gaussian.
    fn call_by_quadrature(s: f64, k: f64, v: f64) -> f64 {
        let sv = v.sqrt();
        let z_star = ((k / s).ln() + 0.5 * v) / sv;
        simpson(
            |z| (s * (-0.5 * v + sv * z).exp() - k) * density(z),
            z_star,
            z_star.max(0.0) + 12.0,
            200_000,
        )
    }

    fn step(x: f64) -> f64 {
        1e-5 * x.abs().max(1.0)
    }

    /// `|fd - an| ≤ tol·|an|` up to the rounding floor of a difference
    /// quotient of a function of magnitude `scale` taken with step `h`
    /// (three times the plain central-difference floor, which covers
    /// [`central`]).
    fn fd_close(fd: f64, an: f64, tol: f64, scale: f64, h: f64) -> bool {
        (fd - an).abs() <= tol * an.abs() + 48.0 * f64::EPSILON * scale.abs().max(1.0) / h
    }

    /// Central difference at `h` and `h/2`, Richardson-extrapolated to
    /// fourth order so that truncation stays negligible where `h` is
    /// coarse relative to the curvature (deep in or out of the money).
    fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h;
        (4.0 * d2 - d1) / 3.0
    }

    #[test]
    fn cdf_reference_points() {
        assert_eq!(norm_cdf(0.0), 0.5);
        for z in [-6.0, -2.5, -1.0, -0.3, 0.7, 1.96, 3.1, 5.0] {
            let q = cdf_by_quadrature(z);
            assert!((norm_cdf(z) - q).abs() < 1e-12, "z={z}: {} vs {q}", norm_cdf(z));
        }
        assert!((norm_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-12);
    }

    #[test]
    fn call_reference_values() {
        let c = bs_call(100.0, 100.0, 0.12).unwrap();
        assert!((c - 13.75).abs() < 0.005, "{c}");
        assert_eq!(bs_call(100.0, 100.0, 0.0).unwrap(), 0.0);
        assert_eq!(bs_call(120.0, 100.0, 0.0).unwrap(), 20.0);
        let deep = bs_call(100.0, 50.0, 0.12).unwrap();
        assert!(deep > 50.0 && deep < 100.0);
        assert!((deep - call_by_quadrature(100.0, 50.0, 0.12)).abs() < 1e-8);
        assert!((c - call_by_quadrature(100.0, 100.0, 0.12)).abs() < 1e-8);
    }

    #[test]
    fn call_domain_errors() {
        assert!(matches!(bs_call(0.0, 100.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(bs_call(100.0, -1.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(bs_call(100.0, 100.0, -0.1), Err(Error::Domain(_))));
        assert!(bs_greeks_sv(100.0, 0.2, 0.0, 100.0).is_err());
        assert!(CallSpec::new(100.0, 0.0, 0.2).is_err());
    }

    #[test]
    fn boundary_cva_reference_values() {
        let spec = CallSpec::new(100.0, 3.0, 0.2).unwrap();
        let u = boundary_cva(0.0, 0.05, 100.0, &spec).unwrap();
        assert!((u + 1.92).abs() < 0.005, "{u}");
        let v = bs_call(100.0, 100.0, 0.12).unwrap();
        assert!((u + (1.0 - (-0.15f64).exp()) * v).abs() < 1e-12);
        assert_eq!(boundary_cva(0.0, 0.0, 100.0, &spec).unwrap(), 0.0);
        assert_eq!(boundary_cva(3.0, 0.05, 100.0, &spec).unwrap(), 0.0);
        assert!(boundary_cva(3.5, 0.05, 100.0, &spec).is_err());
        assert!(boundary_cva_greeks(3.0, 0.05, 100.0, &spec).is_err());
    }

    #[test]
    fn boundary_greeks_limits() {
        let spec = CallSpec::new(100.0, 3.0, 0.2).unwrap();
        let g = boundary_cva_greeks(0.0, 400.0, 100.0, &spec).unwrap();
        assert!(g.grad[0].abs() < 1e-100);
        // far out of the money with little variance left: V ≈ 0
        let spec = CallSpec::new(200.0, 0.01, 0.05).unwrap();
        let g = boundary_cva_greeks(0.0, 0.05, 100.0, &spec).unwrap();
        assert!(g.value.abs() < 1e-100);
        assert!(g.grad[0].abs() < 1e-100 && g.hess[(0, 0)].abs() < 1e-100 && g.hess[(0, 1)].abs() < 1e-100);
    }

    #[test]
    fn vega_vanishes_deep_in_the_money() {
        let g = bs_greeks_sv(1000.0, 0.2, 1.0, 100.0).unwrap();
        assert!(g.vega < 1e-20);
    }

    #[test]
    fn vanna_at_forward_strike() {
        // S = K gives d₊ = -d₋
        let (s, a, tau) = (100.0, 0.25, 2.0);
        let g = bs_greeks_sv(s, a, tau, s).unwrap();
        let hs = step(s);
        let up = bs_greeks_sv(s + hs, a, tau, s).unwrap().vega;
        let dn = bs_greeks_sv(s - hs, a, tau, s).unwrap().vega;
        assert!(fd_close((up - dn) / (2.0 * hs), g.vanna, 1e-6, up, hs));
        let dp = 0.5 * a * tau.sqrt();
        assert!((g.vanna - norm_pdf(dp) * dp / a).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn call_bounds_and_monotonicity(
            s in 1.0..300.0f64, k in 1.0..300.0f64, v in 0.0..2.0f64, dv in 1e-3..0.5f64, ds in 1e-2..10.0f64,
        ) {
            let c = bs_call(s, k, v).unwrap();
            prop_assert!(c >= (s - k).max(0.0) - 1e-12 * s);
            prop_assert!(c <= s);
            prop_assert!(bs_call(s, k, v + dv).unwrap() >= c);
            prop_assert!(bs_call(s + ds, k, v).unwrap() >= c);
        }

        #[test]
        fn cdf_reflection(z in -8.0..8.0f64) {
            prop_assert!((norm_cdf(z) - (1.0 - norm_cdf(-z))).abs() < 1e-15);
        }

        #[test]
        fn vol_greeks_match_finite_differences(
            s in 50.0..200.0f64, k in 50.0..200.0f64, a in 0.1..0.5f64, tau in 0.25..5.0f64,
        ) {
            let g = bs_greeks_sv(s, a, tau, k).unwrap();
            let price = |s: f64, a: f64| bs_call(s, k, a * a * tau).unwrap();
            let vega = |s: f64, a: f64| bs_greeks_sv(s, a, tau, k).unwrap().vega;
            let (hs, ha) = (step(s), step(a));
            let fd_vega = central(|a| price(s, a), a, ha);
            prop_assert!(fd_close(fd_vega, g.vega, 1e-6, price(s, a), ha), "vega {} vs {}", fd_vega, g.vega);
            // second order: central differences of the (checked) analytic vega
            let fd_vanna = central(|s| vega(s, a), s, hs);
            prop_assert!(fd_close(fd_vanna, g.vanna, 1e-6, g.vega, hs), "vanna {} vs {}", fd_vanna, g.vanna);
            let fd_volga = central(|a| vega(s, a), a, ha);
            prop_assert!(fd_close(fd_volga, g.volga, 1e-6, g.vega, ha), "volga {} vs {}", fd_volga, g.volga);
        }

        #[test]
        fn spot_greeks_match_finite_differences(s in 50.0..200.0f64, k in 50.0..200.0f64, v in 0.01..1.0f64) {
            let g = bs_call_greeks(s, k, v).unwrap();
            let h = step(s);
            let p = |s: f64| bs_call(s, k, v).unwrap();
            let delta = |s: f64| bs_call_greeks(s, k, v).unwrap().delta;
            let fd_delta = central(p, s, h);
            let fd_gamma = central(delta, s, h);
            let hv = step(v);
            let fd_dv = central(|v| bs_call(s, k, v).unwrap(), v, hv);
            prop_assert!(fd_close(fd_delta, g.delta, 1e-6, s, h));
            prop_assert!(fd_close(fd_gamma, g.gamma, 1e-6, 1.0, h), "gamma {} vs {}", fd_gamma, g.gamma);
            prop_assert!(fd_close(fd_dv, g.dv, 1e-6, s, hv));
        }

        #[test]
        fn boundary_greeks_match_finite_differences(
            t in 0.0..2.5f64, lambda in -0.05..0.3f64, s in 60.0..160.0f64,
        ) {
            let spec = CallSpec::new(100.0, 3.0, 0.2).unwrap();
            let g = boundary_cva_greeks(t, lambda, s, &spec).unwrap();
            let u = |l: f64, s: f64| boundary_cva(t, l, s, &spec).unwrap();
            let (hl, hs) = (step(lambda), step(s));
            prop_assert_eq!(g.value, u(lambda, s));
            let d_l = central(|l| u(l, s), lambda, hl);
            let d_s = central(|s| u(lambda, s), s, hs);
            prop_assert!(fd_close(d_l, g.grad[0], 1e-6, g.value, hl), "dλ {} vs {}", d_l, g.grad[0]);
            prop_assert!(fd_close(d_s, g.grad[1], 1e-6, g.value, hs), "dS {} vs {}", d_s, g.grad[1]);
            // second order: central differences of the (checked) analytic gradient
            let grad = |l: f64, s: f64| boundary_cva_greeks(t, l, s, &spec).unwrap().grad;
            let d_ll = central(|l| grad(l, s)[0], lambda, hl);
            let d_ss = central(|s| grad(lambda, s)[1], s, hs);
            let d_ls = central(|l| grad(l, s)[1], lambda, hl);
            let d_sl = central(|s| grad(lambda, s)[0], s, hs);
            prop_assert!(fd_close(d_ll, g.hess[(0, 0)], 1e-6, g.grad[0], hl), "dλλ {} vs {}", d_ll, g.hess[(0, 0)]);
            prop_assert!(fd_close(d_ss, g.hess[(1, 1)], 1e-6, g.grad[1], hs), "dSS {} vs {}", d_ss, g.hess[(1, 1)]);
            prop_assert!(fd_close(d_ls, g.hess[(0, 1)], 1e-6, g.grad[1], hl), "dλS {} vs {}", d_ls, g.hess[(0, 1)]);
            prop_assert!(fd_close(d_sl, g.hess[(0, 1)], 1e-6, g.grad[0], hs), "dSλ {} vs {}", d_sl, g.hess[(0, 1)]);
        }

        #[test]
        fn boundary_cva_sign(t in 0.0..3.0f64, lambda in 0.0..1.0f64, s in 1.0..300.0f64) {
            let spec = CallSpec::new(100.0, 3.0, 0.2).unwrap();
            let u = boundary_cva(t, lambda, s, &spec).unwrap();
            prop_assert!(u <= 0.0);
            let v = bs_call(s, 100.0, spec.variance_at(t)).unwrap();
            prop_assert_eq!(u, libm::expm1(-lambda * (3.0 - t)) * v + 0.0);
        }
    }
}
