//! Finite-difference complex Hessians and Ricci forms.
//!
//! The Ricci form is computed as `-√-1∂∂̄ log det g` of the full coordinate
//! matrix. [`ricci_potential_residual`] checks the same tensor through the
//! scalar route `log((t+u')u'u'') - 2ρ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chart::ResolvedPoint;
use crate::error::{Error, Result};
use crate::forms::{eval_form, FormKind, HermitianForm, Mat3};
use crate::profile;

/// Accuracy order of the centred stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StencilOrder {
    Second,
    Fourth,
}

impl StencilOrder {
    pub fn as_u32(self) -> u32 {
        match self {
            StencilOrder::Second => 2,
            StencilOrder::Fourth => 4,
        }
    }

    /// Offsets and weights of the first-derivative stencil (times `h`).
    fn first_derivative(self) -> &'static [(f64, f64)] {
        match self {
            StencilOrder::Second => &[(-1.0, -0.5), (1.0, 0.5)],
            StencilOrder::Fourth => &[
                (-2.0, 1.0 / 12.0),
                (-1.0, -8.0 / 12.0),
                (1.0, 8.0 / 12.0),
                (2.0, -1.0 / 12.0),
            ],
        }
    }

    /// Offsets and weights of the second-derivative stencil (times `h²`).
    fn second_derivative(self) -> &'static [(f64, f64)] {
        match self {
            StencilOrder::Second => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
            StencilOrder::Fourth => &[
                (-2.0, -1.0 / 12.0),
                (-1.0, 16.0 / 12.0),
                (0.0, -30.0 / 12.0),
                (1.0, 16.0 / 12.0),
                (2.0, -1.0 / 12.0),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StencilSpec {
    h: f64,
    order: StencilOrder,
}

impl StencilSpec {
    pub const MIN_STEP: f64 = 1e-6;
    pub const MAX_STEP: f64 = 1e-2;

    pub fn new(h: f64, order: StencilOrder) -> Result<Self> {
        if !(Self::MIN_STEP..=Self::MAX_STEP).contains(&h) {
            return Err(Error::InvalidParameter(format!(
                "stencil step must lie in [1e-6, 1e-2], got {h}"
            )));
        }
        Ok(Self { h, order })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn order(&self) -> StencilOrder {
        self.order
    }
}

impl Default for StencilSpec {
    fn default() -> Self {
        Self {
            h: 1e-3,
            order: StencilOrder::Fourth,
        }
    }
}

/// Shift the `k`-th real coordinate of `(Re z, Im z, Re ξ₁, Im ξ₁, Re ξ₂, Im ξ₂)`.
fn shifted(p: &ResolvedPoint, k: usize, d: f64) -> ResolvedPoint {
    let mut c = [p.z, p.xi1, p.xi2];
    c[k / 2] += if k.is_multiple_of(2) {
        Complex64::new(d, 0.0)
    } else {
        Complex64::new(0.0, d)
    };
    ResolvedPoint::new(c[0], c[1], c[2])
}

/// Matrix of `∂²f/∂c_i∂c̄_j`, `c = (z, ξ₁, ξ₂)`, from centred differences in
/// the real and imaginary parts.
#[allow(clippy::needless_range_loop)]
pub fn complex_hessian<F>(f: F, p: &ResolvedPoint, s: &StencilSpec) -> Result<HermitianForm>
where
    F: Fn(&ResolvedPoint) -> Result<f64>,
{
    let h = s.h;
    let eval = |q: &ResolvedPoint| -> Result<f64> {
        match f(q) {
            Ok(v) if v.is_finite() => Ok(v),
            Err(Error::SingularMetric) => Err(Error::SingularMetric),
            _ => Err(Error::StencilOutOfDomain),
        }
    };

    let mut real = [[0.0f64; 6]; 6];
    for a in 0..6 {
        let mut acc = 0.0;
        for &(off, w) in s.order.second_derivative() {
            acc += w * eval(&shifted(p, a, off * h))?;
        }
        real[a][a] = acc / (h * h);
    }
    let d1 = s.order.first_derivative();
    for a in 0..6 {
        for b in (a + 1)..6 {
            let mut acc = 0.0;
            for &(oa, wa) in d1 {
                let pa = shifted(p, a, oa * h);
                for &(ob, wb) in d1 {
                    acc += wa * wb * eval(&shifted(&pa, b, ob * h))?;
                }
            }
            real[a][b] = acc / (h * h);
            real[b][a] = real[a][b];
        }
    }

    // ∂_c ∂_c̄' = ¼[(∂x∂x' + ∂y∂y') + i(∂x∂y' - ∂y∂x')]
    let mut m = Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
            m[(i, j)] = Complex64::new(
                0.25 * (real[xi][xj] + real[yi][yj]),
                0.25 * (real[xi][yj] - real[yi][xj]),
            );
        }
    }
    Ok(HermitianForm::new(*p, m))
}

fn ricci_with(kind: FormKind, p: &ResolvedPoint, s: &StencilSpec) -> Result<HermitianForm> {
    let log_det = |q: &ResolvedPoint| -> Result<f64> { eval_form(kind, q)?.log_det() };
    Ok(complex_hessian(log_det, p, s)?.scaled(-1.0))
}

/// Ricci form `-∂∂̄ log det g` of `kind` at `p`.
///
/// When the stencil would leave the domain of the metric (e.g. it crosses the
/// zero section) the step is reduced tenfold, down to [`StencilSpec::MIN_STEP`].
pub fn ricci_form(kind: FormKind, p: &ResolvedPoint, s: &StencilSpec) -> Result<HermitianForm> {
    if p.is_on_zero_section() {
        return Err(Error::OnZeroSection);
    }
    let mut spec = *s;
    loop {
        match ricci_with(kind, p, &spec) {
            Err(Error::StencilOutOfDomain | Error::SingularMetric)
                if spec.h / 10.0 >= StencilSpec::MIN_STEP =>
            {
                spec.h /= 10.0;
            }
            other => return other,
        }
    }
}

/// `max |log((t+u')u'u'') - 2ρ|` over the samples; `NaN` if a sample is not
/// finite.
pub fn ricci_potential_residual(t: f64, rho_samples: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for &rho in rho_samples {
        let ev = if t == 0.0 {
            profile::cone_profile(rho)
        } else {
            match profile::ProfileParams::new(t).and_then(|pp| profile::eval_profile(pp, rho)) {
                Ok(ev) => ev,
                Err(_) => return f64::NAN,
            }
        };
        let r = ev.ricci_potential(t).abs();
        if !r.is_finite() {
            return f64::NAN;
        }
        worst = worst.max(r);
    }
    worst
}

/// Largest entry modulus of a form's matrix.
pub fn max_entry(f: &HermitianForm) -> f64 {
    f.m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}
