//! Seeded low-discrepancy sampling of domains in `E`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::{DomainSpec, ResolvedPoint};

const BASES: [u8; 6] = [2, 3, 5, 7, 11, 13];

/// Lowest log-radius of the bulk sample.
pub(crate) const RHO_FLOOR: f64 = -20.0;

/// Width of the ring sampled just inside the outer boundary.
const BOUNDARY_BAND: f64 = 0.05;

/// Halton sequence with a seeded Cranley-Patterson rotation.
pub(crate) struct ShiftedHalton {
    shift: [f64; 6],
    index: usize,
}

impl ShiftedHalton {
    pub(crate) fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut shift = [0.0; 6];
        for s in shift.iter_mut() {
            *s = rng.random::<f64>();
        }
        Self { shift, index: 0 }
    }

    pub(crate) fn next_point(&mut self) -> [f64; 6] {
        self.index += 1;
        let mut u = [0.0; 6];
        for (d, out) in u.iter_mut().enumerate() {
            *out = (halton::number(BASES[d], self.index) + self.shift[d]).fract();
        }
        u
    }
}

/// Affine coordinate of the point of `S²` with `cos θ = 1 - 2u`, azimuth `2πv`.
/// Uniform `(u, v)` gives the Fubini-Study area measure.
pub(crate) fn sphere_coordinate(u: f64, v: f64) -> Complex64 {
    let u = u.clamp(0.0, 1.0 - 1e-12);
    Complex64::from_polar((u / (1.0 - u)).sqrt(), 2.0 * PI * v)
}

/// Unit vector in `R³` of the affine coordinate `z` (stereographic).
pub(crate) fn sphere_vector(z: Complex64) -> [f64; 3] {
    let n = z.norm_sqr();
    let d = 1.0 + n;
    [2.0 * z.re / d, 2.0 * z.im / d, (n - 1.0) / d]
}

/// Fubini-Study distance, half the round angle between the images in `S²`.
pub(crate) fn fs_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let mut dm = 0.0;
    let mut dp = 0.0;
    for i in 0..3 {
        dm += (a[i] - b[i]).powi(2);
        dp += (a[i] + b[i]).powi(2);
    }
    dm.sqrt().atan2(dp.sqrt())
}

/// Sampled cloud points. The first `anchors` points lie on the zero section.
pub(crate) struct Sample {
    pub points: Vec<ResolvedPoint>,
    pub anchors: usize,
}

/// Stratified quasi-random sample of `d`: about a tenth of the points on the
/// zero section, a ring at the lowest log-radius, a ring at the outer boundary
/// and the rest uniform in `ρ`.
pub(crate) fn sample_domain(d: &DomainSpec, n: usize, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seq = ShiftedHalton::new(&mut rng);

    let rho_hi = d.rho_max();
    let rho_lo = RHO_FLOOR.min(rho_hi - 1.0);
    let anchors = (n / 10).max(1);
    let bulk = n - anchors;
    let inner = (bulk / 10).max(1);
    let outer = (bulk / 10).max(1);

    let mut points = Vec::with_capacity(n);
    for _ in 0..anchors {
        let u = seq.next_point();
        points.push(ResolvedPoint::on_zero_section(sphere_coordinate(
            u[1], u[2],
        )));
    }
    for i in 0..bulk {
        let u = seq.next_point();
        let rho = if i < inner {
            rho_lo
        } else if i < inner + outer {
            rho_hi - BOUNDARY_BAND * (1.0 - u[0])
        } else {
            rho_lo + (rho_hi - rho_lo) * u[0]
        };
        points.push(point_at(&u, rho));
    }
    Sample { points, anchors }
}

/// The point at log-radius `rho` whose base and fibre direction are read off
/// `u[1..6]`: base uniform for `ω_FS`, fibre direction uniform on `S³`.
fn point_at(u: &[f64; 6], rho: f64) -> ResolvedPoint {
    let z = sphere_coordinate(u[1], u[2]);
    let xi_sq = rho.exp() / (1.0 + z.norm_sqr());
    let f = u[3];
    let xi1 = Complex64::from_polar((f * xi_sq).sqrt(), 2.0 * PI * u[4]);
    let xi2 = Complex64::from_polar(((1.0 - f) * xi_sq).sqrt(), 2.0 * PI * u[5]);
    ResolvedPoint::new(z, xi1, xi2)
}

/// Points off the zero section with `ρ` uniform in `[rho_lo, rho_hi)` and the
/// base and fibre direction distributed as in [`sample_domain`].
pub(crate) fn sample_shell(rho_lo: f64, rho_hi: f64, n: usize, seed: u64) -> Vec<ResolvedPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seq = ShiftedHalton::new(&mut rng);
    (0..n)
        .map(|_| {
            let u = seq.next_point();
            point_at(&u, rho_lo + (rho_hi - rho_lo) * u[0])
        })
        .collect()
}
