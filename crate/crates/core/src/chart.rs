//! Local coordinates on the resolved conifold `E = O(-1) ⊕ O(-1) → P¹`.
//!
//! A point is written `(z, ξ₁, ξ₂)` with `z` the inhomogeneous coordinate on
//! the base and `ξ` the fibre coordinates of the standard trivialization. The
//! chart `|z| ≤ 1` is canonical; points near `z = ∞` are still stored in this
//! chart, and the second chart `(z', ξ') = (1/z, z ξ)` is only used as a
//! transition map.
//!
//! All identities here are checked at relative tolerance [`IDENTITY_TOL`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the algebraic identities of the chart.
pub const IDENTITY_TOL: f64 = 1e-12;

/// `ρ = log e^ρ`, with the zero section represented exactly.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub enum LogRadius {
    /// `ρ = -∞`, i.e. the point lies on `P₀`.
    ZeroSection,
    Finite(f64),
}

impl LogRadius {
    pub fn from_exp(value: f64) -> Self {
        if value > 0.0 {
            LogRadius::Finite(value.ln())
        } else {
            LogRadius::ZeroSection
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            LogRadius::Finite(r) => Some(r),
            LogRadius::ZeroSection => None,
        }
    }

    pub fn is_zero_section(self) -> bool {
        matches!(self, LogRadius::ZeroSection)
    }

    /// `e^ρ`, which is exactly zero on the zero section.
    pub fn exp(self) -> f64 {
        match self {
            LogRadius::Finite(r) => r.exp(),
            LogRadius::ZeroSection => 0.0,
        }
    }
}

/// Which line-bundle summand of `E` a radius refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Summand {
    First,
    Second,
}

/// The fibre `L_w = {ξ₂ = w ξ₁}` through a point off `P₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FibreCoord {
    Finite(Complex64),
    /// `ξ₁ = 0`: the point lies on `L_∞ = {ξ₁ = 0}`.
    Infinity,
}

impl FibreCoord {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            FibreCoord::Finite(w) => Some(w),
            FibreCoord::Infinity => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPoint {
    pub z: Complex64,
    pub xi1: Complex64,
    pub xi2: Complex64,
}

/// The same point in the trivialization `(w, η₁, η₂)` of the flopped side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopPoint {
    pub w: Complex64,
    pub eta1: Complex64,
    pub eta2: Complex64,
}

/// A point of the quadric cone `{y₁y₄ = y₂y₃} ⊂ C⁴`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub y: [Complex64; 4],
}

impl ConePoint {
    /// `y₁y₄ - y₂y₃`, zero on the cone.
    pub fn quadric_defect(&self) -> Complex64 {
        let [y1, y2, y3, y4] = self.y;
        y1 * y4 - y2 * y3
    }

    pub fn norm_sqr(&self) -> f64 {
        self.y.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Neighbourhoods of the zero section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainSpec {
    /// `Ω = {ρ < 0}`.
    Omega,
    /// `Ω_r = {e^ρ ≤ r²}`.
    OmegaR(f64),
}

impl DomainSpec {
    pub fn omega_r(r: f64) -> Result<Self> {
        if r.is_finite() && r > 0.0 {
            Ok(DomainSpec::OmegaR(r))
        } else {
            Err(Error::InvalidParameter(format!(
                "domain radius must be positive, got {r}"
            )))
        }
    }

    /// Upper end of the `ρ` range covered by the domain.
    pub fn rho_max(&self) -> f64 {
        match *self {
            DomainSpec::Omega => 0.0,
            DomainSpec::OmegaR(r) => 2.0 * r.ln(),
        }
    }

    fn contains_exp_rho(&self, exp_rho: f64) -> bool {
        match *self {
            DomainSpec::Omega => exp_rho < 1.0,
            DomainSpec::OmegaR(r) => exp_rho <= r * r,
        }
    }
}

impl ResolvedPoint {
    pub fn new(z: Complex64, xi1: Complex64, xi2: Complex64) -> Self {
        Self { z, xi1, xi2 }
    }

    /// Convenience constructor from real parts only.
    pub fn real(z: f64, xi1: f64, xi2: f64) -> Self {
        Self::new(z.into(), xi1.into(), xi2.into())
    }

    /// The point of `P₀` over `z`.
    pub fn on_zero_section(z: Complex64) -> Self {
        Self::new(z, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
    }

    /// `h_ξ(z) = 1 + |z|²`, the fibre metric of `O(-1)` in this trivialization.
    pub fn fibre_weight(&self) -> f64 {
        1.0 + self.z.norm_sqr()
    }

    pub fn xi_norm_sqr(&self) -> f64 {
        self.xi1.norm_sqr() + self.xi2.norm_sqr()
    }

    pub fn is_on_zero_section(&self) -> bool {
        self.xi1 == Complex64::new(0.0, 0.0) && self.xi2 == Complex64::new(0.0, 0.0)
    }

    /// `e^ρ = (1+|z|²)(|ξ₁|²+|ξ₂|²)`, computed without taking logarithms.
    pub fn exp_rho(&self) -> f64 {
        self.fibre_weight() * self.xi_norm_sqr()
    }

    pub fn rho(&self) -> LogRadius {
        if self.is_on_zero_section() {
            LogRadius::ZeroSection
        } else {
            LogRadius::from_exp(self.exp_rho())
        }
    }

    pub fn exp_rho_alpha(&self, alpha: Summand) -> f64 {
        let xi = match alpha {
            Summand::First => self.xi1,
            Summand::Second => self.xi2,
        };
        self.fibre_weight() * xi.norm_sqr()
    }

    /// `ρ_α = log((1+|z|²)|ξ_α|²)`.
    pub fn rho_alpha(&self, alpha: Summand) -> LogRadius {
        LogRadius::from_exp(self.exp_rho_alpha(alpha))
    }

    /// Flat coordinates `(ν₁, ν₂) = (z ξ₁, ξ₁)`, in which `e^{ρ₁} = |ν|²`.
    pub fn nu_coords(&self) -> (Complex64, Complex64) {
        (self.z * self.xi1, self.xi1)
    }

    pub fn flop_forward(&self) -> Result<FlopPoint> {
        if self.xi1 == Complex64::new(0.0, 0.0) {
            return Err(Error::IndeterminateFlop("xi1"));
        }
        Ok(FlopPoint {
            w: self.xi2 / self.xi1,
            eta1: self.xi1,
            eta2: self.z * self.xi1,
        })
    }

    /// The contraction `E → Ê ⊂ C⁴`, collapsing `P₀` to the cone tip.
    pub fn contract(&self) -> ConePoint {
        ConePoint {
            y: [self.xi1, self.xi2, self.z * self.xi1, self.z * self.xi2],
        }
    }

    /// Zero-section points belong to every domain.
    pub fn in_domain(&self, domain: &DomainSpec) -> bool {
        self.is_on_zero_section() || domain.contains_exp_rho(self.exp_rho())
    }

    pub fn fibre_coordinate(&self) -> Result<FibreCoord> {
        if self.is_on_zero_section() {
            return Err(Error::OnZeroSection);
        }
        if self.xi1 == Complex64::new(0.0, 0.0) {
            return Ok(FibreCoord::Infinity);
        }
        Ok(FibreCoord::Finite(self.xi2 / self.xi1))
    }

    /// Coordinates `(1/z, z ξ₁, z ξ₂)` in the chart around `z = ∞`.
    pub fn to_second_chart(&self) -> Option<ResolvedPoint> {
        if self.z == Complex64::new(0.0, 0.0) {
            return None;
        }
        Some(ResolvedPoint::new(
            self.z.inv(),
            self.z * self.xi1,
            self.z * self.xi2,
        ))
    }

    /// Inverse of [`ResolvedPoint::to_second_chart`]; the transition map is an
    /// involution.
    pub fn from_second_chart(p: &ResolvedPoint) -> Option<ResolvedPoint> {
        p.to_second_chart()
    }

    /// The same point in whichever chart has `|z| ≤ 1`.
    pub fn in_unit_chart(&self) -> ResolvedPoint {
        if self.z.norm() > 1.0 {
            self.to_second_chart().unwrap_or(*self)
        } else {
            *self
        }
    }

    /// Multiply `ξ` by a unitary matrix, the `U(2)` action on the fibres.
    pub fn rotate_fibre(&self, u: [[Complex64; 2]; 2]) -> ResolvedPoint {
        ResolvedPoint::new(
            self.z,
            u[0][0] * self.xi1 + u[0][1] * self.xi2,
            u[1][0] * self.xi1 + u[1][1] * self.xi2,
        )
    }

    /// Radial rescaling `(z, s ξ)`.
    pub fn scale_fibre(&self, s: f64) -> ResolvedPoint {
        ResolvedPoint::new(self.z, self.xi1 * s, self.xi2 * s)
    }
}

impl FlopPoint {
    pub fn exp_rho(&self) -> f64 {
        (1.0 + self.w.norm_sqr()) * (self.eta1.norm_sqr() + self.eta2.norm_sqr())
    }

    pub fn flop_backward(&self) -> Result<ResolvedPoint> {
        if self.eta1 == Complex64::new(0.0, 0.0) {
            return Err(Error::IndeterminateFlop("eta1"));
        }
        Ok(ResolvedPoint::new(
            self.eta2 / self.eta1,
            self.eta1,
            self.w * self.eta1,
        ))
    }
}

/// Free-function form of [`ResolvedPoint::rho`].
pub fn rho(p: &ResolvedPoint) -> LogRadius {
    p.rho()
}

pub fn rho_alpha(p: &ResolvedPoint, alpha: Summand) -> LogRadius {
    p.rho_alpha(alpha)
}

pub fn flop_forward(p: &ResolvedPoint) -> Result<FlopPoint> {
    p.flop_forward()
}

pub fn flop_backward(q: &FlopPoint) -> Result<ResolvedPoint> {
    q.flop_backward()
}

pub fn contract(p: &ResolvedPoint) -> ConePoint {
    p.contract()
}

pub fn in_domain(p: &ResolvedPoint, d: &DomainSpec) -> bool {
    p.in_domain(d)
}

pub fn fibre_coordinate(p: &ResolvedPoint) -> Result<FibreCoord> {
    p.fibre_coordinate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    fn c_close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
    }

    #[test]
    fn rho_examples() {
        assert_eq!(
            ResolvedPoint::real(0.0, 1.0, 0.0).rho(),
            LogRadius::Finite(0.0)
        );
        assert_eq!(
            ResolvedPoint::real(0.0, 0.0, 0.0).rho(),
            LogRadius::ZeroSection
        );
        let r = ResolvedPoint::real(1.0, 1.0, 1.0).rho().finite().unwrap();
        assert!((r - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_section_sentinel_orders_below_everything() {
        assert!(LogRadius::ZeroSection < LogRadius::Finite(-1e300));
        assert_eq!(LogRadius::ZeroSection.exp(), 0.0);
    }

    #[test]
    fn rho_alpha_examples() {
        let p = ResolvedPoint::real(0.0, 1.0, 1.0);
        assert_eq!(p.rho_alpha(Summand::First), LogRadius::Finite(0.0));
        let q = ResolvedPoint::real(2.0, 0.1, 0.0);
        let r1 = q.rho_alpha(Summand::First).finite().unwrap();
        assert!((r1 - 0.05f64.ln()).abs() < 1e-12);
        assert_eq!(q.rho_alpha(Summand::Second), LogRadius::ZeroSection);
    }

    #[test]
    fn nu_examples() {
        assert_eq!(
            ResolvedPoint::real(0.0, 1.0, 0.0).nu_coords(),
            (c(0.0, 0.0), c(1.0, 0.0))
        );
        let p = ResolvedPoint::new(c(1.0, 1.0), c(2.0, 0.0), c(5.0, 0.0));
        assert_eq!(p.nu_coords(), (c(2.0, 2.0), c(2.0, 0.0)));
    }

    #[test]
    fn flop_examples() {
        let q = ResolvedPoint::real(0.0, 1.0, 0.0).flop_forward().unwrap();
        assert_eq!(
            q,
            FlopPoint {
                w: c(0.0, 0.0),
                eta1: c(1.0, 0.0),
                eta2: c(0.0, 0.0)
            }
        );
        let back = FlopPoint {
            w: c(0.0, 0.0),
            eta1: c(1.0, 0.0),
            eta2: c(0.0, 0.0),
        }
        .flop_backward()
        .unwrap();
        assert_eq!(back, ResolvedPoint::real(0.0, 1.0, 0.0));
        let p = FlopPoint {
            w: c(1.0, 0.0),
            eta1: c(2.0, 0.0),
            eta2: c(2.0, 0.0),
        }
        .flop_backward()
        .unwrap();
        assert_eq!(p, ResolvedPoint::real(1.0, 2.0, 2.0));
    }

    #[test]
    fn flop_indeterminate() {
        assert_eq!(
            ResolvedPoint::real(1.0, 0.0, 1.0).flop_forward(),
            Err(Error::IndeterminateFlop("xi1"))
        );
        let q = FlopPoint {
            w: c(1.0, 0.0),
            eta1: c(0.0, 0.0),
            eta2: c(1.0, 0.0),
        };
        assert_eq!(q.flop_backward(), Err(Error::IndeterminateFlop("eta1")));
    }

    #[test]
    fn contract_examples() {
        let tip = ResolvedPoint::on_zero_section(c(3.0, -2.0)).contract();
        assert!(tip.y.iter().all(|y| *y == c(0.0, 0.0)));
        let y = ResolvedPoint::new(c(0.0, 1.0), c(1.0, 0.0), c(2.0, 0.0)).contract();
        assert_eq!(y.y, [c(1.0, 0.0), c(2.0, 0.0), c(0.0, 1.0), c(0.0, 2.0)]);
        assert_eq!(y.quadric_defect(), c(0.0, 0.0));
    }

    #[test]
    fn domain_examples() {
        assert!(!ResolvedPoint::real(0.0, 1.0, 0.0).in_domain(&DomainSpec::Omega));
        assert!(ResolvedPoint::real(0.0, 0.5, 0.0).in_domain(&DomainSpec::Omega));
        let p = ResolvedPoint::real(0.0, 0.05, 0.0);
        assert!(p.in_domain(&DomainSpec::OmegaR(0.1)));
        assert!(!p.in_domain(&DomainSpec::OmegaR(0.01)));
        let p0 = ResolvedPoint::on_zero_section(c(5.0, 5.0));
        assert!(p0.in_domain(&DomainSpec::Omega));
        assert!(p0.in_domain(&DomainSpec::OmegaR(1e-9)));
        assert!(DomainSpec::omega_r(-1.0).is_err());
    }

    #[test]
    fn fibre_coordinate_examples() {
        let w = ResolvedPoint::real(3.0, 2.0, 4.0)
            .fibre_coordinate()
            .unwrap();
        assert_eq!(w, FibreCoord::Finite(c(2.0, 0.0)));
        assert_eq!(
            ResolvedPoint::real(0.0, 0.0, 1.0)
                .fibre_coordinate()
                .unwrap(),
            FibreCoord::Infinity
        );
        assert_eq!(
            ResolvedPoint::real(0.0, 0.0, 0.0).fibre_coordinate(),
            Err(Error::OnZeroSection)
        );
        let w = c(0.3, -1.2);
        for xi1 in [c(1.0, 0.0), c(-0.2, 0.7)] {
            let p = ResolvedPoint::new(c(0.5, 0.5), xi1, w * xi1);
            let got = p.fibre_coordinate().unwrap().finite().unwrap();
            assert!((p.xi2 - got * p.xi1).norm() < 1e-15);
        }
    }

    #[test]
    fn second_chart_is_an_involution_and_preserves_rho() {
        let p = ResolvedPoint::new(c(2.0, -3.0), c(0.1, 0.2), c(-0.3, 0.05));
        let q = p.to_second_chart().unwrap();
        assert!(rel_close(p.exp_rho(), q.exp_rho(), IDENTITY_TOL));
        let back = ResolvedPoint::from_second_chart(&q).unwrap();
        assert!(c_close(back.z, p.z, IDENTITY_TOL));
        assert!(c_close(back.xi1, p.xi1, IDENTITY_TOL));
        assert!(ResolvedPoint::real(0.0, 1.0, 1.0)
            .to_second_chart()
            .is_none());
    }

    fn arb_c(scale: f64) -> impl Strategy<Value = Complex64> {
        (-scale..scale, -scale..scale).prop_map(|(a, b)| Complex64::new(a, b))
    }

    fn nonzero_c(scale: f64) -> impl Strategy<Value = Complex64> {
        arb_c(scale).prop_filter("nonzero", |c| c.norm() > 1e-3)
    }

    proptest! {
        #[test]
        fn additivity(z in arb_c(3.0), x1 in nonzero_c(2.0), x2 in nonzero_c(2.0)) {
            let p = ResolvedPoint::new(z, x1, x2);
            let sum = p.rho_alpha(Summand::First).exp() + p.rho_alpha(Summand::Second).exp();
            prop_assert!(rel_close(p.rho().exp(), sum, IDENTITY_TOL));
        }

        #[test]
        fn nu_norm_is_first_radius(z in arb_c(3.0), x1 in arb_c(2.0), x2 in arb_c(2.0)) {
            let p = ResolvedPoint::new(z, x1, x2);
            let (n1, n2) = p.nu_coords();
            let e1 = p.exp_rho_alpha(Summand::First);
            prop_assert!((n1.norm_sqr() + n2.norm_sqr() - e1).abs() <= IDENTITY_TOL * e1.max(1e-300));
        }

        #[test]
        fn flop_preserves_exp_rho(z in arb_c(3.0), x1 in nonzero_c(2.0), x2 in arb_c(2.0)) {
            let p = ResolvedPoint::new(z, x1, x2);
            let q = p.flop_forward().unwrap();
            prop_assert!(rel_close(p.exp_rho(), q.exp_rho(), IDENTITY_TOL));
        }

        #[test]
        fn flop_roundtrips(z in nonzero_c(3.0), x1 in nonzero_c(2.0), x2 in arb_c(2.0)) {
            let p = ResolvedPoint::new(z, x1, x2);
            let back = p.flop_forward().unwrap().flop_backward().unwrap();
            prop_assert!(c_close(back.z, p.z, IDENTITY_TOL));
            prop_assert!(c_close(back.xi1, p.xi1, IDENTITY_TOL));
            prop_assert!(c_close(back.xi2, p.xi2, IDENTITY_TOL));

            let q = FlopPoint { w: x2, eta1: x1, eta2: z };
            let fwd = q.flop_backward().unwrap().flop_forward().unwrap();
            prop_assert!(c_close(fwd.w, q.w, IDENTITY_TOL));
            prop_assert!(c_close(fwd.eta1, q.eta1, IDENTITY_TOL));
            prop_assert!(c_close(fwd.eta2, q.eta2, IDENTITY_TOL));
        }

        #[test]
        fn contraction_lands_on_quadric(z in arb_c(5.0), x1 in arb_c(2.0), x2 in arb_c(2.0)) {
            let y = ResolvedPoint::new(z, x1, x2).contract();
            prop_assert!(y.quadric_defect().norm() <= IDENTITY_TOL * (1.0 + y.norm_sqr()));
        }

        #[test]
        fn distinct_fibres_meet_only_on_zero_section(
            w1 in arb_c(3.0), w2 in arb_c(3.0), z in arb_c(3.0), x1 in nonzero_c(2.0)
        ) {
            prop_assume!((w1 - w2).norm() > 1e-6);
            // Off P₀, a point of L_{w₁} violates the defining equation of L_{w₂}.
            let p = ResolvedPoint::new(z, x1, w1 * x1);
            prop_assert!(!p.is_on_zero_section());
            prop_assert!((p.xi2 - w2 * p.xi1).norm() > 0.0);
            let w = p.fibre_coordinate().unwrap().finite().unwrap();
            prop_assert!(c_close(w, w1, 1e-12));
        }
    }
}
