//! The Calabi profile of the Ricci-flat family `ω_E(t) = t ω_FS + √-1∂∂̄u(ρ)`.
//!
//! Ricci-flatness reduces to the cubic `2(u')³ + 3t(u')² = 3e^{2ρ}` for the
//! radial derivative `u'`. Differentiating it once in `ρ` gives
//! `(t + u')u'u'' = e^{2ρ}`, which is how `u''` is obtained. The potential `u`
//! itself is never formed: every metric quantity downstream only needs `u'`
//! and `u''`.
//!
//! The root is found for the rescaled unknown `q = u' e^{-ρ}`, which solves
//! `2e^ρ q³ + 3t q² - 3 = 0`. All three terms stay of order one across the
//! whole clamped `ρ` range, so neither `e^{2ρ}` nor `(u')³` ever has to be
//! formed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ρ` is clamped to this range before exponentiation.
pub const RHO_MIN: f64 = -700.0;
pub const RHO_MAX: f64 = 300.0;

/// `(3/2)^{1/3}`, the cone profile coefficient of `u'`.
pub fn cone_uprime_coefficient() -> f64 {
    1.5f64.cbrt()
}

/// `(2/3)^{2/3}`, the cone profile coefficient of `u''`.
pub fn cone_usecond_coefficient() -> f64 {
    (2.0f64 / 3.0).powf(2.0 / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    t: f64,
}

impl ProfileParams {
    pub fn new(t: f64) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Kähler class parameter must be finite and >= 0, got {t}"
            )));
        }
        Ok(Self { t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEval {
    /// The (possibly clamped) `ρ` at which the profile was evaluated.
    pub rho: f64,
    pub uprime: f64,
    pub usecond: f64,
    /// Set when the requested `ρ` was outside `[RHO_MIN, RHO_MAX]`.
    pub clamped: bool,
}

impl ProfileEval {
    /// `|2u'³ + 3t u'² - 3e^{2ρ}|`.
    pub fn cubic_residual(&self, t: f64) -> f64 {
        let x = self.uprime;
        (2.0 * x * x * x + 3.0 * t * x * x - 3.0 * (2.0 * self.rho).exp()).abs()
    }

    /// Bound the cubic residual must satisfy: `1e-10 · max(1, 3e^{2ρ})`.
    pub fn cubic_residual_bound(&self) -> f64 {
        1e-10 * (3.0 * (2.0 * self.rho).exp()).max(1.0)
    }

    /// `log((t + u')u'u'') - 2ρ`, which vanishes for the Ricci-flat profile.
    pub fn ricci_potential(&self, t: f64) -> f64 {
        (t + self.uprime).ln() + self.uprime.ln() + self.usecond.ln() - 2.0 * self.rho
    }
}

fn clamp_rho(rho: f64) -> Result<(f64, bool)> {
    if !rho.is_finite() {
        return Err(Error::NonFinite("rho"));
    }
    let clamped = rho.clamp(RHO_MIN, RHO_MAX);
    Ok((clamped, clamped != rho))
}

fn warn_clamped(rho: f64) {
    log::warn!("RangeClamped: rho = {rho} clamped to [{RHO_MIN}, {RHO_MAX}]");
}

/// Positive root `q` of `2e^ρ q³ + 3t q² - 3 = 0` for an already clamped `ρ`.
///
/// The left side is increasing and convex in `q > 0`, so Newton started to
/// the right of the root decreases monotonically onto it. The bracket is kept
/// anyway and a bisection step replaces any Newton step that leaves it.
fn solve_scaled(t: f64, rho: f64) -> f64 {
    let e = rho.exp();
    let g = |q: f64| (2.0 * e * q + 3.0 * t) * q * q - 3.0;
    let dg = |q: f64| (6.0 * e * q + 6.0 * t) * q;

    // Either term alone reaching 3 bounds the root from above.
    let cone_bound = (1.5 / e).cbrt();
    let upper = if t > 0.0 {
        cone_bound.min(t.sqrt().recip())
    } else {
        cone_bound
    };
    let mut lo = 0.0;
    let mut hi = 2.0 * upper;
    let mut q = hi;

    for _ in 0..200 {
        let gq = g(q);
        if gq == 0.0 {
            return q;
        }
        if gq > 0.0 {
            hi = q;
        } else {
            lo = q;
        }
        let mut next = q - gq / dg(q);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - q).abs() <= 2.0 * f64::EPSILON * q {
            return next;
        }
        q = next;
    }
    q
}

/// The unique positive root `u'` of `2x³ + 3tx² = 3e^{2ρ}`.
pub fn solve_uprime(params: ProfileParams, rho: f64) -> Result<f64> {
    let (r, clamped) = clamp_rho(rho)?;
    if clamped {
        warn_clamped(rho);
    }
    Ok(r.exp() * solve_scaled(params.t, r))
}

fn eval_clamped(t: f64, rho: f64, clamped: bool) -> ProfileEval {
    let e = rho.exp();
    let q = solve_scaled(t, rho);
    let uprime = e * q;
    // u'' = e^{2ρ} / ((t + u')u') = e^ρ / ((t + u') q)
    let usecond = e / ((t + uprime) * q);
    ProfileEval {
        rho,
        uprime,
        usecond,
        clamped,
    }
}

pub fn eval_profile(params: ProfileParams, rho: f64) -> Result<ProfileEval> {
    let (r, clamped) = clamp_rho(rho)?;
    if clamped {
        warn_clamped(rho);
    }
    Ok(eval_clamped(params.t, r, clamped))
}

/// Same as [`eval_profile`] without the clamp warning, for quadrature and
/// stencil loops that deliberately probe far tails.
pub(crate) fn eval_profile_quiet(t: f64, rho: f64) -> Result<ProfileEval> {
    let (r, clamped) = clamp_rho(rho)?;
    Ok(eval_clamped(t, r, clamped))
}

/// Closed-form `t = 0` profile: `u' = (3/2)^{1/3}e^{2ρ/3}`,
/// `u'' = (2/3)^{2/3}e^{2ρ/3}`.
pub fn cone_profile(rho: f64) -> ProfileEval {
    let ev = cone_profile_quiet(rho);
    if ev.clamped {
        warn_clamped(rho);
    }
    ev
}

pub(crate) fn cone_profile_quiet(rho: f64) -> ProfileEval {
    let clamped_rho = rho.clamp(RHO_MIN, RHO_MAX);
    let clamped = rho.is_finite() && clamped_rho != rho;
    let s = (2.0 * clamped_rho / 3.0).exp();
    ProfileEval {
        rho: clamped_rho,
        uprime: cone_uprime_coefficient() * s,
        usecond: cone_usecond_coefficient() * s,
        clamped,
    }
}

/// Outcome of checking Calabi's Kähler criterion on a sample of `ρ` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KahlerReport {
    /// Condition (a): the coefficient `a = t` of `ω_FS` is positive.
    pub a_positive: bool,
    pub min_uprime: f64,
    pub min_usecond: f64,
    pub uprime_positive: bool,
    pub usecond_positive: bool,
}

impl KahlerReport {
    pub fn passes(&self) -> bool {
        self.a_positive && self.uprime_positive && self.usecond_positive
    }
}

/// Checks conditions (a) and (b) of the criterion; the smoothness condition
/// on `u` at the zero section is not tested numerically.
pub fn kahler_criterion(params: ProfileParams, rho_samples: &[f64]) -> Result<KahlerReport> {
    if rho_samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut min_uprime = f64::INFINITY;
    let mut min_usecond = f64::INFINITY;
    for &rho in rho_samples {
        let ev = eval_profile(params, rho)?;
        min_uprime = min_uprime.min(ev.uprime);
        min_usecond = min_usecond.min(ev.usecond);
    }
    Ok(KahlerReport {
        a_positive: params.t > 0.0,
        min_uprime,
        min_usecond,
        uprime_positive: min_uprime > 0.0,
        usecond_positive: min_usecond > 0.0,
    })
}
