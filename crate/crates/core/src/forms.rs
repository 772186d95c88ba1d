//! (1,1)-forms on `E` as Hermitian matrices.
//!
//! Every form is written in the coordinate frame `(∂_z, ∂_{ξ₁}, ∂_{ξ₂})`: the
//! matrix `m` of `√-1 Σ m_{ij} dc_i ∧ dc̄_j` has `m_{ij} = ∂²f/∂c_i∂c̄_j` when
//! the form is `√-1∂∂̄f`, and a holomorphic vector `v` has squared length
//! `Σ m_{ij} v_i v̄_j`.
//!
//! The Calabi family is expanded as
//!
//! ```text
//! ω_E(t) = t ω_FS + u'(ρ) √-1∂∂̄ρ + u''(ρ) √-1∂ρ ∧ ∂̄ρ,
//! ```
//!
//! which is `√-1∂∂̄(t log(1+|z|²) + u(ρ))` with the chain rule applied once.

use nalgebra::{Cholesky, Matrix2, Matrix3, Matrix3x2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chart::{FibreCoord, ResolvedPoint, Summand};
use crate::error::{Error, Result};
use crate::profile::{self, ProfileEval, ProfileParams};

pub type Mat3 = Matrix3<Complex64>;
pub type Mat2 = Matrix2<Complex64>;

/// Below this `ρ` the profile-based kinds report [`Error::OnZeroSection`]
/// instead of returning denormal entries.
pub const PROFILE_RHO_FLOOR: f64 = -650.0;

/// Smallest eigenvalue a reference form must exceed in [`compare_forms`].
pub const MIN_REFERENCE_EIGENVALUE: f64 = 1e-13;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FormKind {
    /// `ω_FS = √-1∂∂̄ log(1+|z|²)`, pulled back from the base.
    FubiniStudy,
    /// The reference Kähler form `ω̂ = ω_FS + √-1∂∂̄e^ρ`.
    OmegaHat,
    /// `τ = √-1∂∂̄e^{ρ₁}`, flat and of rank two.
    Tau,
    /// `ω_Ê = √-1∂∂̄e^ρ`, the pullback of the flat metric of `C⁴`.
    ConifoldFlat,
    /// The Ricci-flat member `ω_E(t)`, `t ∈ (0, 1]`.
    CalabiFamily(f64),
    /// The cone metric `ω_{CY,Ê}`, the `t = 0` member.
    ConeMetric,
}

impl FormKind {
    pub fn calabi(t: f64) -> Result<Self> {
        let kind = FormKind::CalabiFamily(t);
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FormKind::CalabiFamily(t) if !(t > 0.0 && t <= 1.0) => Err(Error::InvalidParameter(
                format!("CalabiFamily needs t in (0, 1], got {t}"),
            )),
            _ => Ok(()),
        }
    }

    /// The restriction of the form to `P₀` is this multiple of `ω_FS`.
    pub fn zero_section_coefficient(&self) -> f64 {
        match *self {
            FormKind::FubiniStudy | FormKind::OmegaHat => 1.0,
            FormKind::CalabiFamily(t) => t,
            FormKind::Tau | FormKind::ConifoldFlat | FormKind::ConeMetric => 0.0,
        }
    }

    /// Kinds that are positive definite away from `P₀`.
    pub fn is_positive_off_zero_section(&self) -> bool {
        !matches!(self, FormKind::FubiniStudy | FormKind::Tau)
    }

    /// `|V|²` as a function of `ρ` alone, for the kinds where it is one.
    pub fn radial_speed_sqr(&self, rho: f64) -> Result<Option<f64>> {
        Ok(match *self {
            FormKind::OmegaHat | FormKind::ConifoldFlat => Some(rho.exp()),
            FormKind::CalabiFamily(t) => Some(profile::eval_profile_quiet(t, rho)?.usecond),
            FormKind::ConeMetric => Some(profile::cone_profile_quiet(rho).usecond),
            FormKind::FubiniStudy | FormKind::Tau => None,
        })
    }

    pub fn eval(&self, p: &ResolvedPoint) -> Result<HermitianForm> {
        eval_form(*self, p)
    }

    pub fn name(&self) -> String {
        match *self {
            FormKind::FubiniStudy => "fubini-study".into(),
            FormKind::OmegaHat => "omega-hat".into(),
            FormKind::Tau => "tau".into(),
            FormKind::ConifoldFlat => "conifold-flat".into(),
            FormKind::CalabiFamily(t) => format!("calabi({t})"),
            FormKind::ConeMetric => "cone".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianForm {
    pub base: ResolvedPoint,
    pub m: Mat3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FibreForm {
    pub w: Complex64,
    pub base: ResolvedPoint,
    /// Matrix in the flat fibre coordinates `(ν₁, ν₂) = (z ξ₁, ξ₁)`.
    pub m2: Mat2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VectorField {
    /// The Euler field `ξ₁∂_{ξ₁} + ξ₂∂_{ξ₂}`.
    V,
    /// `ξ₁∂_{ξ₁}`.
    V1,
    /// `V / |V|_ω̂ = e^{-ρ/2} V`.
    W,
}

impl VectorField {
    pub fn components(&self, p: &ResolvedPoint) -> Result<Vector3<Complex64>> {
        if p.is_on_zero_section() {
            return Err(Error::OnZeroSection);
        }
        Ok(match self {
            VectorField::V => Vector3::new(ZERO, p.xi1, p.xi2),
            VectorField::V1 => Vector3::new(ZERO, p.xi1, ZERO),
            VectorField::W => {
                let s = p.exp_rho().sqrt().recip();
                Vector3::new(ZERO, p.xi1 * s, p.xi2 * s)
            }
        })
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues3(m: &Mat3) -> [f64; 3] {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let ev = sym.symmetric_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(f64::total_cmp);
    out
}

/// Eigenvalues of a 2×2 Hermitian matrix, ascending, in closed form.
pub fn hermitian_eigenvalues2(m: &Mat2) -> [f64; 2] {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    [mean - radius, mean + radius]
}

/// `Σ m_{ij} u_i v̄_j`.
pub fn sesquilinear(m: &Mat3, u: &Vector3<Complex64>, v: &Vector3<Complex64>) -> Complex64 {
    (u.transpose() * m * v.conjugate())[(0, 0)]
}

impl HermitianForm {
    pub fn new(base: ResolvedPoint, m: Mat3) -> Self {
        Self { base, m }
    }

    /// `Σ m_{ij} v_i v̄_j`.
    pub fn norm_sqr(&self, v: &Vector3<Complex64>) -> f64 {
        sesquilinear(&self.m, v, v).re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (self.m - self.m.adjoint()).map(|c| c.norm()).max()
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        hermitian_eigenvalues3(&self.m)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn scaled(&self, s: f64) -> HermitianForm {
        HermitianForm::new(self.base, self.m * Complex64::new(s, 0.0))
    }

    pub fn sum(&self, other: &HermitianForm) -> Result<HermitianForm> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        Ok(HermitianForm::new(self.base, self.m + other.m))
    }

    /// `log det m`, via Cholesky so that loss of positivity is detected.
    pub fn log_det(&self) -> Result<f64> {
        let chol = Cholesky::new(self.m).ok_or(Error::SingularMetric)?;
        let l = chol.l();
        let mut acc = 0.0;
        for i in 0..3 {
            let d = l[(i, i)].re;
            if d.is_nan() || d <= 0.0 {
                return Err(Error::SingularMetric);
            }
            acc += 2.0 * d.ln();
        }
        Ok(acc)
    }

    /// Pull back to the fibre `L_w` through the base point.
    pub fn restrict_to_fibre(&self) -> Result<FibreForm> {
        let w = finite_fibre(&self.base)?;
        let j = fibre_jacobian(&self.base, w);
        let m2 = j.transpose() * self.m * j.conjugate();
        Ok(FibreForm {
            w,
            base: self.base,
            m2,
        })
    }
}

impl FibreForm {
    pub fn trace(&self) -> f64 {
        self.m2[(0, 0)].re + self.m2[(1, 1)].re
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        hermitian_eigenvalues2(&self.m2)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (self.m2 - self.m2.adjoint()).map(|c| c.norm()).max()
    }
}

fn finite_fibre(p: &ResolvedPoint) -> Result<Complex64> {
    match p.fibre_coordinate()? {
        FibreCoord::Finite(w) => Ok(w),
        FibreCoord::Infinity => Err(Error::InfiniteFibre),
    }
}

/// Holomorphic Jacobian of `(ν₁, ν₂) ↦ (z, ξ₁, ξ₂) = (ν₁/ν₂, ν₂, w ν₂)`.
fn fibre_jacobian(p: &ResolvedPoint, w: Complex64) -> Matrix3x2<Complex64> {
    let (nu1, nu2) = p.nu_coords();
    let one = Complex64::new(1.0, 0.0);
    Matrix3x2::new(nu2.inv(), -nu1 / (nu2 * nu2), ZERO, one, ZERO, w)
}

fn fubini_study(p: &ResolvedPoint) -> Mat3 {
    let h = p.fibre_weight();
    let mut m = Mat3::zeros();
    m[(0, 0)] = Complex64::new(1.0 / (h * h), 0.0);
    m
}

/// `∂∂̄` of `(1+|z|²)|ξ|²`.
fn hessian_exp_rho(p: &ResolvedPoint) -> Mat3 {
    let h = Complex64::new(p.fibre_weight(), 0.0);
    let zc = p.z.conj();
    Mat3::new(
        Complex64::new(p.xi_norm_sqr(), 0.0),
        zc * p.xi1,
        zc * p.xi2,
        p.z * p.xi1.conj(),
        h,
        ZERO,
        p.z * p.xi2.conj(),
        ZERO,
        h,
    )
}

/// `∂∂̄` of `(1+|z|²)|ξ₁|²`.
fn hessian_exp_rho1(p: &ResolvedPoint) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(0, 0)] = Complex64::new(p.xi1.norm_sqr(), 0.0);
    m[(0, 1)] = p.z.conj() * p.xi1;
    m[(1, 0)] = p.z * p.xi1.conj();
    m[(1, 1)] = Complex64::new(p.fibre_weight(), 0.0);
    m
}

/// `a ω_FS + u' ∂∂̄ρ + u'' ∂ρ ⊗ ∂̄ρ`.
fn calabi_matrix(p: &ResolvedPoint, a: f64, ev: &ProfileEval) -> Mat3 {
    let h = p.fibre_weight();
    let r2 = p.xi_norm_sqr();
    let mut m = fubini_study(p) * Complex64::new(a + ev.uprime, 0.0);

    // fibre block of ∂∂̄ log|ξ|²: δ/|ξ|² - ξ̄_α ξ_β/|ξ|⁴
    let xi = [p.xi1, p.xi2];
    for a_idx in 0..2 {
        for b_idx in 0..2 {
            let delta = if a_idx == b_idx { 1.0 / r2 } else { 0.0 };
            let v = Complex64::new(delta, 0.0) - xi[a_idx].conj() * xi[b_idx] / (r2 * r2);
            m[(a_idx + 1, b_idx + 1)] += v * ev.uprime;
        }
    }

    let drho = Vector3::new(p.z.conj() / h, p.xi1.conj() / r2, p.xi2.conj() / r2);
    m += drho * drho.adjoint() * Complex64::new(ev.usecond, 0.0);
    m
}

fn profile_rho(p: &ResolvedPoint) -> Result<f64> {
    match p.rho().finite() {
        Some(r) if r >= PROFILE_RHO_FLOOR => Ok(r),
        _ => Err(Error::OnZeroSection),
    }
}

/// The matrix of `kind` at `p`.
pub fn eval_form(kind: FormKind, p: &ResolvedPoint) -> Result<HermitianForm> {
    kind.validate()?;
    let m = match kind {
        FormKind::FubiniStudy => fubini_study(p),
        FormKind::OmegaHat => fubini_study(p) + hessian_exp_rho(p),
        FormKind::Tau => hessian_exp_rho1(p),
        FormKind::ConifoldFlat => {
            if p.is_on_zero_section() {
                return Err(Error::OnZeroSection);
            }
            hessian_exp_rho(p)
        }
        FormKind::CalabiFamily(t) => {
            let rho = profile_rho(p)?;
            let ev = profile::eval_profile(ProfileParams::new(t)?, rho)?;
            calabi_matrix(p, t, &ev)
        }
        FormKind::ConeMetric => {
            let rho = profile_rho(p)?;
            calabi_matrix(p, 0.0, &profile::cone_profile(rho))
        }
    };
    Ok(HermitianForm::new(*p, m))
}

/// Restriction of `kind` to the fibre `L_w` through `p`, in `(ν₁, ν₂)`.
///
/// `τ` restricts to the identity matrix, which is returned exactly.
pub fn restrict_to_fibre(kind: FormKind, p: &ResolvedPoint) -> Result<FibreForm> {
    if kind == FormKind::Tau {
        let w = finite_fibre(p)?;
        return Ok(FibreForm {
            w,
            base: *p,
            m2: Mat2::identity(),
        });
    }
    eval_form(kind, p)?.restrict_to_fibre()
}

/// Fibrewise trace `H = tr_{τ|L_w}(ω|L_w)`.
pub fn fibrewise_trace_h(kind: FormKind, p: &ResolvedPoint) -> Result<f64> {
    Ok(restrict_to_fibre(kind, p)?.trace())
}

pub fn vector_norm_sq(kind: FormKind, v: VectorField, p: &ResolvedPoint) -> Result<f64> {
    let comps = v.components(p)?;
    Ok(eval_form(kind, p)?.norm_sqr(&comps))
}

/// Extreme generalized eigenvalues `(λ_min, λ_max)` of `(a, b)`, so that
/// `λ_min b ≤ a ≤ λ_max b`.
pub fn compare_forms(a: &HermitianForm, b: &HermitianForm) -> Result<(f64, f64)> {
    if a.base != b.base {
        return Err(Error::BaseMismatch);
    }
    let b_min = b.min_eigenvalue();
    if b_min.is_nan() || b_min <= MIN_REFERENCE_EIGENVALUE {
        return Err(Error::NotPositiveDefinite(b_min));
    }
    let b_sym = (b.m + b.m.adjoint()) * Complex64::new(0.5, 0.0);
    let chol = Cholesky::new(b_sym).ok_or(Error::NotPositiveDefinite(b_min))?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᴴ
    let y = l
        .solve_lower_triangular(&a.m)
        .ok_or(Error::NotPositiveDefinite(b_min))?;
    let c = l
        .solve_lower_triangular(&y.adjoint())
        .ok_or(Error::NotPositiveDefinite(b_min))?;
    let ev = hermitian_eigenvalues3(&c);
    Ok((ev[0], ev[2]))
}

/// Smallest eigenvalues of `ω̂|_{L_w} - τ|_{L_w}` and
/// `2e^{-ρ₁}τ|_{L_w} - ω̂|_{L_w}`; both are nonnegative on `Ω`.
pub fn fibre_sandwich_margins(p: &ResolvedPoint) -> Result<(f64, f64)> {
    let hat = restrict_to_fibre(FormKind::OmegaHat, p)?;
    let scale = 2.0 / p.exp_rho_alpha(Summand::First);
    let id = Mat2::identity();
    let lower = hermitian_eigenvalues2(&(hat.m2 - id))[0];
    let upper = hermitian_eigenvalues2(&(id * Complex64::new(scale, 0.0) - hat.m2))[0];
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::DomainSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    /// A point with `|z| ≤ 1`, given `ρ`, and a fibre direction on `S³`.
    fn sample_point(rng: &mut ChaCha8Rng, rho_lo: f64, rho_hi: f64) -> ResolvedPoint {
        let rho = rng.random_range(rho_lo..rho_hi);
        let r = rng.random::<f64>().sqrt();
        let z = Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU));
        let frac: f64 = rng.random_range(0.01..0.99);
        let norm = (rho.exp() / (1.0 + r * r)).sqrt();
        let xi1 = Complex64::from_polar(
            norm * frac.sqrt(),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let xi2 = Complex64::from_polar(
            norm * (1.0 - frac).sqrt(),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        ResolvedPoint::new(z, xi1, xi2)
    }

    /// Finite-difference `∂∂̄` of a potential, used as an oracle for the
    /// closed-form matrices. Second-order central differences with step `h`.
    #[allow(clippy::needless_range_loop)]
    fn fd_hessian(f: impl Fn(&ResolvedPoint) -> f64, p: &ResolvedPoint, h: f64) -> Mat3 {
        let shift = |q: &ResolvedPoint, k: usize, d: f64| {
            let mut arr = [q.z, q.xi1, q.xi2];
            let idx = k / 2;
            arr[idx] += if k.is_multiple_of(2) {
                c(d, 0.0)
            } else {
                c(0.0, d)
            };
            ResolvedPoint::new(arr[0], arr[1], arr[2])
        };
        let mut real = [[0.0; 6]; 6];
        for a in 0..6 {
            for b in 0..6 {
                let fpp = f(&shift(&shift(p, a, h), b, h));
                let fpm = f(&shift(&shift(p, a, h), b, -h));
                let fmp = f(&shift(&shift(p, a, -h), b, h));
                let fmm = f(&shift(&shift(p, a, -h), b, -h));
                real[a][b] = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            }
        }
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
                m[(i, j)] = c(
                    0.25 * (real[xi][xj] + real[yi][yj]),
                    0.25 * (real[xi][yj] - real[yi][xj]),
                );
            }
        }
        m
    }

    #[test]
    fn fubini_study_at_origin() {
        let m = eval_form(FormKind::FubiniStudy, &ResolvedPoint::real(0.0, 0.3, -0.2))
            .unwrap()
            .m;
        let mut expect = Mat3::zeros();
        expect[(0, 0)] = c(1.0, 0.0);
        assert_eq!(m, expect);
    }

    #[test]
    fn omega_hat_is_fs_plus_hessian_of_exp_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = sample_point(&mut rng, -3.0, 0.0);
            let hat = eval_form(FormKind::OmegaHat, &p).unwrap().m;
            let fs = eval_form(FormKind::FubiniStudy, &p).unwrap().m;
            let fd = fd_hessian(|q| q.exp_rho(), &p, 1e-4);
            assert!((hat - fs - fd).map(|c| c.norm()).max() < 1e-8);
        }
    }

    #[test]
    fn fubini_study_matches_its_potential() {
        let p = ResolvedPoint::new(c(0.4, -0.7), c(0.1, 0.0), c(0.0, 0.1));
        let fs = eval_form(FormKind::FubiniStudy, &p).unwrap().m;
        let fd = fd_hessian(|q| (1.0 + q.z.norm_sqr()).ln(), &p, 1e-4);
        assert!((fs - fd).map(|c| c.norm()).max() < 1e-8);
    }

    /// The metric written in the mixed frame `(dz, ∇ξ^α)` with
    /// `∇ξ^α = dξ^α + ξ^α z̄ dz/(1+|z|²)`, converted to the coordinate frame.
    /// Independent from `calabi_matrix`.
    fn connection_frame_matrix(p: &ResolvedPoint, a: f64, up: f64, upp: f64) -> Mat3 {
        let h = p.fibre_weight();
        let he = h / p.exp_rho(); // h_ξ e^{-ρ} = 1/|ξ|²
        let xi = [p.xi1, p.xi2];
        let mut n = Matrix2::<Complex64>::zeros();
        for al in 0..2 {
            for be in 0..2 {
                let d = if al == be { up } else { 0.0 };
                n[(al, be)] = c(he * d, 0.0) + xi[al].conj() * xi[be] * (he * he * (upp - up));
            }
        }
        // Row i of `frame` expresses the coframe (dz, ∇ξ¹, ∇ξ²) in (dz, dξ¹, dξ²).
        let conn = p.z.conj() / h;
        let mut frame = Mat3::identity();
        frame[(1, 0)] = conn * p.xi1;
        frame[(2, 0)] = conn * p.xi2;
        let mut core = Mat3::zeros();
        core[(0, 0)] = c((a + up) / (h * h), 0.0);
        for al in 0..2 {
            for be in 0..2 {
                core[(al + 1, be + 1)] = n[(al, be)];
            }
        }
        frame.transpose() * core * frame.conjugate()
    }

    #[test]
    fn calabi_matrix_matches_connection_frame_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for t in [1.0, 0.3, 0.01] {
            for _ in 0..50 {
                let p = sample_point(&mut rng, -15.0, 0.0);
                let ev = profile::eval_profile(
                    ProfileParams::new(t).unwrap(),
                    p.rho().finite().unwrap(),
                )
                .unwrap();
                let ours = eval_form(FormKind::CalabiFamily(t), &p).unwrap().m;
                let theirs = connection_frame_matrix(&p, t, ev.uprime, ev.usecond);
                let scale = ours.map(|c| c.norm()).max();
                assert!((ours - theirs).map(|c| c.norm()).max() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn calabi_contracted_with_euler_field_is_usecond() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in [1.0, 0.1, 0.001] {
            for _ in 0..200 {
                let p = sample_point(&mut rng, -20.0, 0.0);
                let rho = p.rho().finite().unwrap();
                let ev = profile::eval_profile(ProfileParams::new(t).unwrap(), rho).unwrap();
                let v = vector_norm_sq(FormKind::CalabiFamily(t), VectorField::V, &p).unwrap();
                assert!(rel(v, ev.usecond) < 1e-8);
                let w = vector_norm_sq(FormKind::CalabiFamily(t), VectorField::W, &p).unwrap();
                assert!(rel(w, (-rho).exp() * ev.usecond) < 1e-8);
            }
        }
    }

    #[test]
    fn cone_w_norm_is_bounded_by_the_vertical_estimate() {
        for rho in [-20.0, -5.0, -1.0, -1e-3] {
            let p = ResolvedPoint::real(0.0, (rho / 2.0f64).exp(), 0.0);
            let w = vector_norm_sq(FormKind::ConeMetric, VectorField::W, &p).unwrap();
            let closed = profile::cone_usecond_coefficient() * (-rho / 3.0f64).exp();
            assert!(rel(w, closed) < 1e-10);
            assert!(w <= (-rho / 2.0f64).exp());
        }
    }

    #[test]
    fn euler_field_has_exp_rho_length_for_omega_hat() {
        let p = ResolvedPoint::real(0.5, (-1.0f64).exp().sqrt() / 1.25f64.sqrt(), 0.0);
        let v = vector_norm_sq(FormKind::OmegaHat, VectorField::V, &p).unwrap();
        assert!(rel(v, (-1.0f64).exp()) < 1e-10);
    }

    #[test]
    fn tau_restricts_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let p = sample_point(&mut rng, -10.0, 0.0);
            let exact = restrict_to_fibre(FormKind::Tau, &p).unwrap();
            assert_eq!(exact.m2, Mat2::identity());
            assert_eq!(fibrewise_trace_h(FormKind::Tau, &p).unwrap(), 2.0);
            // The generic pullback agrees.
            let generic = eval_form(FormKind::Tau, &p)
                .unwrap()
                .restrict_to_fibre()
                .unwrap();
            assert!((generic.m2 - Mat2::identity()).map(|c| c.norm()).max() < 1e-12);
        }
    }

    #[test]
    fn omega_hat_on_the_zero_fibre() {
        for r in [0.9, 0.5, 0.1] {
            let p = ResolvedPoint::real(0.0, r, 0.0);
            let f = restrict_to_fibre(FormKind::OmegaHat, &p).unwrap();
            let expect = Mat2::new(
                c(1.0 + 1.0 / (r * r), 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
            );
            assert!((f.m2 - expect).map(|c| c.norm()).max() < 1e-12);
            let h = fibrewise_trace_h(FormKind::OmegaHat, &p).unwrap();
            assert!(rel(h, 2.0 + 1.0 / (r * r)) < 1e-12);
        }
    }

    #[test]
    fn restriction_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = sample_point(&mut rng, -8.0, 0.0);
            let a = eval_form(FormKind::OmegaHat, &p).unwrap();
            let b = eval_form(FormKind::CalabiFamily(0.2), &p).unwrap();
            let lhs = a.restrict_to_fibre().unwrap().m2 + b.restrict_to_fibre().unwrap().m2;
            let rhs = a.sum(&b).unwrap().restrict_to_fibre().unwrap().m2;
            assert!((lhs - rhs).map(|c| c.norm()).max() <= 1e-12 * lhs.map(|c| c.norm()).max());
        }
    }

    #[test]
    fn restriction_errors() {
        assert_eq!(
            restrict_to_fibre(FormKind::OmegaHat, &ResolvedPoint::real(1.0, 0.0, 0.0)),
            Err(Error::OnZeroSection)
        );
        assert_eq!(
            restrict_to_fibre(FormKind::Tau, &ResolvedPoint::real(1.0, 0.0, 0.3)),
            Err(Error::InfiniteFibre)
        );
    }

    #[test]
    fn omega_hat_h_bound_on_omega() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10_000 {
            let p = sample_point(&mut rng, -20.0, 0.0);
            let h = fibrewise_trace_h(FormKind::OmegaHat, &p).unwrap();
            assert!(p.exp_rho_alpha(Summand::First) * h <= 4.0 + 1e-12);
        }
    }

    #[test]
    fn compare_forms_examples() {
        let p = ResolvedPoint::real(0.2, 0.3, 0.1);
        let b = eval_form(FormKind::OmegaHat, &p).unwrap();
        let (lo, hi) = compare_forms(&b, &b).unwrap();
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
        let (lo, hi) = compare_forms(&b.scaled(2.0), &b).unwrap();
        assert!((lo - 2.0).abs() < 1e-10 && (hi - 2.0).abs() < 1e-10);

        let other = eval_form(FormKind::OmegaHat, &ResolvedPoint::real(0.2, 0.3, 0.2)).unwrap();
        assert_eq!(compare_forms(&b, &other), Err(Error::BaseMismatch));
        let tau = eval_form(FormKind::Tau, &p).unwrap();
        assert!(matches!(
            compare_forms(&b, &tau),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn calabi_against_flat_generalized_eigenvalues() {
        // In the frame (∇_z, fibre-transverse, V) both forms are diagonal, so
        // the generalized eigenvalues are {t+u', u', u''}·e^{-ρ}.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for t in [1.0, 0.01] {
            for _ in 0..50 {
                let p = sample_point(&mut rng, -15.0, 0.0);
                let rho = p.rho().finite().unwrap();
                let ev = profile::eval_profile(ProfileParams::new(t).unwrap(), rho).unwrap();
                let a = eval_form(FormKind::CalabiFamily(t), &p).unwrap();
                let b = eval_form(FormKind::ConifoldFlat, &p).unwrap();
                let (lo, hi) = compare_forms(&a, &b).unwrap();
                let e = (-rho).exp();
                let vals = [(t + ev.uprime) * e, ev.uprime * e, ev.usecond * e];
                let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = vals.iter().cloned().fold(0.0, f64::max);
                assert!(rel(lo, min) < 1e-6, "{lo} {min}");
                assert!(rel(hi, max) < 1e-6, "{hi} {max}");
            }
        }
    }

    #[test]
    fn kahler_kinds_are_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let kinds = [
            FormKind::OmegaHat,
            FormKind::ConifoldFlat,
            FormKind::CalabiFamily(1.0),
            FormKind::CalabiFamily(0.001),
            FormKind::ConeMetric,
        ];
        for _ in 0..2_000 {
            let p = sample_point(&mut rng, -20.0, 0.0);
            assert!(p.in_domain(&DomainSpec::Omega));
            for kind in kinds {
                let f = eval_form(kind, &p).unwrap();
                assert!(f.hermiticity_defect() <= 1e-12 * f.m.map(|c| c.norm()).max());
                assert!(f.min_eigenvalue() > 0.0, "{kind:?} at {p:?}");
            }
            let tau = eval_form(FormKind::Tau, &p).unwrap();
            let ev = tau.eigenvalues();
            assert!(ev[0].abs() <= 1e-12 * ev[2]);
            assert!(ev[1] > 0.0);
        }
    }

    #[test]
    fn profile_kinds_refuse_the_zero_section() {
        let p0 = ResolvedPoint::on_zero_section(c(0.3, 0.1));
        assert_eq!(
            eval_form(FormKind::CalabiFamily(0.5), &p0),
            Err(Error::OnZeroSection)
        );
        assert_eq!(
            eval_form(FormKind::ConeMetric, &p0),
            Err(Error::OnZeroSection)
        );
        assert_eq!(
            eval_form(FormKind::ConifoldFlat, &p0),
            Err(Error::OnZeroSection)
        );
        let deep = ResolvedPoint::real(0.0, (-660.0f64 / 2.0).exp(), 0.0);
        assert_eq!(
            eval_form(FormKind::ConeMetric, &deep),
            Err(Error::OnZeroSection)
        );
        assert!(eval_form(FormKind::OmegaHat, &p0).is_ok());
        assert!(eval_form(FormKind::Tau, &p0).is_ok());
        assert!(eval_form(
            FormKind::CalabiFamily(0.0),
            &ResolvedPoint::real(0.0, 0.5, 0.0)
        )
        .is_err());
    }

    #[test]
    fn u2_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let p = sample_point(&mut rng, -12.0, 0.0);
            // random unitary from a normalized complex 2-vector (SU(2) element)
            let a = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let b = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let (a, b) = (a / n, b / n);
            let phase = Complex64::from_polar(1.0, rng.random_range(0.0..6.0));
            let u = [
                [a * phase, -b.conj() * phase],
                [b * phase, a.conj() * phase],
            ];
            let q = p.rotate_fibre(u);
            assert!(rel(q.exp_rho(), p.exp_rho()) < 1e-12);
            for kind in [FormKind::CalabiFamily(0.1), FormKind::OmegaHat] {
                let vp = vector_norm_sq(kind, VectorField::V, &p).unwrap();
                let vq = vector_norm_sq(kind, VectorField::V, &q).unwrap();
                assert!(rel(vq, vp) < 1e-8);
            }
            let cmp = |x: &ResolvedPoint| {
                compare_forms(
                    &eval_form(FormKind::CalabiFamily(0.1), x).unwrap(),
                    &eval_form(FormKind::ConifoldFlat, x).unwrap(),
                )
                .unwrap()
            };
            let (l1, h1) = cmp(&p);
            let (l2, h2) = cmp(&q);
            assert!(rel(l2, l1) < 1e-8 && rel(h2, h1) < 1e-8);
        }
    }

    #[test]
    fn comparison_is_chart_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let p = sample_point(&mut rng, -8.0, 0.0);
            let Some(q) = p.to_second_chart() else {
                continue;
            };
            for kind in [
                FormKind::CalabiFamily(0.3),
                FormKind::ConeMetric,
                FormKind::OmegaHat,
            ] {
                let cmp = |x: &ResolvedPoint| {
                    compare_forms(
                        &eval_form(kind, x).unwrap(),
                        &eval_form(FormKind::ConifoldFlat, x).unwrap(),
                    )
                    .unwrap()
                };
                let (l1, h1) = cmp(&p);
                let (l2, h2) = cmp(&q);
                assert!(rel(l2, l1) < 1e-8 && rel(h2, h1) < 1e-8, "{kind:?}");
            }
        }
    }
}
