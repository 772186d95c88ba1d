//! Radial lengths, zero-section scaling, sampled distance matrices and
//! Gromov-Hausdorff upper bounds.
//!
//! Distances on a cloud are shortest paths in a graph whose edges are either
//! straight coordinate segments (measured with the metric at the midpoint) or
//! explicit paths through the zero section: a radial path down to `P₀`
//! followed by a Fubini-Study geodesic of `P₀` scaled by the restricted
//! Kähler class.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{DomainSpec, LogRadius, ResolvedPoint};
use crate::error::{Error, Result};
use crate::forms::{eval_form, FormKind, HermitianForm};
use crate::profile::RHO_MIN;
use crate::sampling::{self, fs_distance, sphere_vector};

/// Absolute error requested from the double-exponential quadrature.
const QUADRATURE_TOL: f64 = 1e-13;

/// Points used for the dense sample of `P¹` behind [`fs_diameter`].
const FS_SAMPLE: usize = 4000;

/// Neighbour count used by [`gh_upper_bound`].
pub const DEFAULT_GRAPH_K: usize = 12;

/// `(3/2)^{2/3}`, the radial length from the cone tip to `ρ = 0`.
pub fn cone_radial_coefficient() -> f64 {
    1.5f64.powf(2.0 / 3.0)
}

/// `½∫_{-∞}^{ρ} √(|V|²) dρ`, the length of the radial path from `P₀` to
/// log-radius `rho` under `kind`.
///
/// With `x = e^{ρ/6}` the integrand becomes `3√(|V|²)/x` on `(0, e^{ρ/6}]`,
/// which is smooth at both ends for every kind with a radial speed.
pub fn radial_length_for(kind: FormKind, rho: f64) -> Result<f64> {
    kind.validate()?;
    if !rho.is_finite() {
        return Err(Error::NonFinite("rho"));
    }
    if kind.radial_speed_sqr(0.0)?.is_none() {
        return Err(Error::DegenerateMetric(format!(
            "{} has no radial speed",
            kind.name()
        )));
    }
    let upper = (rho / 6.0).exp();
    let integrand = |x: f64| -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let r = 6.0 * x.ln();
        if r < RHO_MIN + 100.0 {
            return 0.0;
        }
        match kind.radial_speed_sqr(r) {
            Ok(Some(v)) => 3.0 * v.max(0.0).sqrt() / x,
            _ => f64::NAN,
        }
    };
    let out = quadrature::double_exponential::integrate(integrand, 0.0, upper, QUADRATURE_TOL);
    if !out.integral.is_finite() {
        return Err(Error::NonFinite("radial length"));
    }
    Ok(out.integral)
}

/// Radial length of `p` under `ω_E(t)`; `t = 0` is the cone metric.
pub fn radial_length(p: &ResolvedPoint, t: f64) -> Result<f64> {
    let rho = match p.rho() {
        LogRadius::ZeroSection => return Err(Error::OnZeroSection),
        LogRadius::Finite(r) => r,
    };
    radial_length_for(kind_for(t)?, rho)
}

fn kind_for(t: f64) -> Result<FormKind> {
    if t == 0.0 {
        Ok(FormKind::ConeMetric)
    } else {
        FormKind::calabi(t)
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "t must lie in (0, 1], got {t}"
        )))
    }
}

/// `ω_FS`-area of `P¹`, by quadrature over the polar angle of the sphere.
pub fn fs_area() -> f64 {
    // z = tan(θ) e^{iφ}, θ ∈ [0, π/2): the area element is sinθ cosθ dθ dφ.
    let f = |th: f64| 2.0 * PI * th.sin() * th.cos();
    quadrature::double_exponential::integrate(f, 0.0, PI / 2.0, QUADRATURE_TOL).integral
}

/// Area of `P₀` under `ω_E(t)`, whose restriction is `t·ω_FS`.
pub fn zero_section_area(t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(FormKind::CalabiFamily(t).zero_section_coefficient() * fs_area())
}

/// Diameter of `(P¹, ω_FS)`, the largest distance over a dense Fibonacci
/// sample of the sphere. Computed once.
pub fn fs_diameter() -> f64 {
    static D: OnceLock<f64> = OnceLock::new();
    *D.get_or_init(|| {
        let golden = PI * (3.0 - 5f64.sqrt());
        let pts: Vec<[f64; 3]> = (0..FS_SAMPLE)
            .map(|i| {
                let h = 1.0 - (2 * i + 1) as f64 / FS_SAMPLE as f64;
                let r = (1.0 - h * h).sqrt();
                let a = golden * i as f64;
                [r * a.cos(), r * a.sin(), h]
            })
            .collect();
        (0..FS_SAMPLE)
            .into_par_iter()
            .map(|i| {
                pts[i + 1..]
                    .iter()
                    .map(|q| fs_distance(&pts[i], q))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    })
}

/// Diameter of `P₀` under `ω_E(t)`, `√t` times [`fs_diameter`].
pub fn zero_section_diameter(t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(FormKind::CalabiFamily(t).zero_section_coefficient().sqrt() * fs_diameter())
}

/// A sampled domain with graph shortest-path distances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricCloud {
    pub points: Vec<ResolvedPoint>,
    pub kind: FormKind,
    pub domain: DomainSpec,
    /// Row-major `n × n` distance matrix.
    dist: Vec<f64>,
    pub graph_k: usize,
    pub seed: u64,
    /// The first `anchors` points lie on `P₀`.
    pub anchors: usize,
}

impl MetricCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.len() + j]
    }

    pub fn dist_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.len(), &self.dist)
    }

    /// Largest violation of `d(i,k) ≤ d(i,j) + d(j,k)` over all triples.
    pub fn triangle_defect(&self) -> f64 {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut worst = 0.0f64;
                for j in 0..n {
                    let dij = self.dist(i, j);
                    for k in 0..n {
                        worst = worst.max(self.dist(i, k) - dij - self.dist(j, k));
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Embedding used only to choose graph neighbours: the cone image scaled to
/// its radial length, together with the base point on a sphere of radius ½.
fn neighbour_embedding(p: &ResolvedPoint) -> [f64; 11] {
    let mut e = [0.0; 11];
    let s = sphere_vector(p.z);
    for i in 0..3 {
        e[8 + i] = 0.5 * s[i];
    }
    let er = p.exp_rho();
    if er > 0.0 {
        let scale = cone_radial_coefficient() * er.powf(1.0 / 3.0) / er.sqrt();
        for (i, c) in p.contract().y.iter().enumerate() {
            e[2 * i] = scale * c.re;
            e[2 * i + 1] = scale * c.im;
        }
    }
    e
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Indices of the `k` smallest entries, ties broken by index.
fn k_smallest(mut cand: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Coordinates of `a`, `b` in whichever chart keeps `max |z|` smaller.
fn common_chart(a: &ResolvedPoint, b: &ResolvedPoint) -> (ResolvedPoint, ResolvedPoint) {
    let m1 = a.z.norm().max(b.z.norm());
    if m1 > 1.0 {
        if let (Some(a2), Some(b2)) = (a.to_second_chart(), b.to_second_chart()) {
            if a2.z.norm().max(b2.z.norm()) < m1 {
                return (a2, b2);
            }
        }
    }
    (*a, *b)
}

/// Length of the straight coordinate segment under the midpoint metric.
fn segment_length(kind: FormKind, a: &ResolvedPoint, b: &ResolvedPoint) -> Result<f64> {
    let (a, b) = common_chart(a, b);
    let mid = ResolvedPoint::new(
        (a.z + b.z) * 0.5,
        (a.xi1 + b.xi1) * 0.5,
        (a.xi2 + b.xi2) * 0.5,
    );
    let form = match eval_form(kind, &mid) {
        Ok(f) => f,
        Err(Error::OnZeroSection) => average_form(kind, &a, &b, &mid)?,
        Err(e) => return Err(e),
    };
    let d = Vector3::new(b.z - a.z, b.xi1 - a.xi1, b.xi2 - a.xi2);
    Ok(form.norm_sqr(&d).max(0.0).sqrt())
}

fn average_form(
    kind: FormKind,
    a: &ResolvedPoint,
    b: &ResolvedPoint,
    mid: &ResolvedPoint,
) -> Result<HermitianForm> {
    let fa = eval_form(kind, a)?;
    let fb = eval_form(kind, b)?;
    Ok(HermitianForm::new(
        *mid,
        (fa.m + fb.m) * Complex64::new(0.5, 0.0),
    ))
}

/// Single-source shortest paths.
fn dijkstra(adj: &[Vec<(usize, f64)>], src: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Reverse((OrderedFloat(0.0), src)));
    while let Some(Reverse((OrderedFloat(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((OrderedFloat(nd), v)));
            }
        }
    }
    dist
}

/// Sample `n` points of `d` and compute graph distances under `kind`.
pub fn build_cloud(
    d: DomainSpec,
    kind: FormKind,
    n: usize,
    graph_k: usize,
    seed: u64,
) -> Result<MetricCloud> {
    if n < 10 {
        return Err(Error::InvalidParameter(format!(
            "cloud needs n >= 10, got {n}"
        )));
    }
    let s = sampling::sample_domain(&d, n, seed);
    cloud_from_points(d, kind, s.points, s.anchors, graph_k, seed)
}

/// Graph distances on explicit points; the first `anchors` must lie on `P₀`
/// and the rest off it.
pub fn cloud_from_points(
    domain: DomainSpec,
    kind: FormKind,
    points: Vec<ResolvedPoint>,
    anchors: usize,
    graph_k: usize,
    seed: u64,
) -> Result<MetricCloud> {
    kind.validate()?;
    if graph_k < 4 {
        return Err(Error::InvalidParameter(format!(
            "graph_k must be >= 4, got {graph_k}"
        )));
    }
    if !kind.is_positive_off_zero_section() {
        return Err(Error::DegenerateMetric(format!(
            "{} is not positive definite off the zero section",
            kind.name()
        )));
    }
    if anchors > points.len()
        || points[..anchors].iter().any(|p| !p.is_on_zero_section())
        || points[anchors..].iter().any(|p| p.is_on_zero_section())
    {
        return Err(Error::InvalidParameter(
            "anchor points must come first".into(),
        ));
    }
    let n = points.len();
    let a_coef = kind.zero_section_coefficient().sqrt();
    let spheres: Vec<[f64; 3]> = points.iter().map(|p| sphere_vector(p.z)).collect();
    let emb: Vec<[f64; 11]> = points.iter().map(neighbour_embedding).collect();

    let mut pairs = BTreeSet::new();
    let bulk_nbrs: Vec<Vec<usize>> = (anchors..n)
        .into_par_iter()
        .map(|i| {
            let cand = (anchors..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(&emb[i], &emb[j]), j))
                .collect();
            k_smallest(cand, graph_k)
        })
        .collect();
    for (off, nb) in bulk_nbrs.iter().enumerate() {
        let i = anchors + off;
        for &j in nb {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let mut segments: Vec<(usize, usize)> = pairs.into_iter().collect();
    segments.sort_unstable();
    let seg_weights: Vec<f64> = segments
        .par_iter()
        .map(|&(i, j)| segment_length(kind, &points[i], &points[j]).unwrap_or(f64::NAN))
        .collect();

    // Paths through the zero section.
    let radial: Vec<f64> = points[anchors..]
        .par_iter()
        .map(|p| {
            let rho = p.rho().finite().unwrap_or(f64::NEG_INFINITY);
            radial_length_for(kind, rho).unwrap_or(f64::NAN)
        })
        .collect();
    let anchor_nbrs: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let cand = (0..anchors)
                .filter(|&j| j != i)
                .map(|j| (fs_distance(&spheres[i], &spheres[j]), j))
                .collect();
            k_smallest(cand, graph_k)
        })
        .collect();

    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut add = |i: usize, j: usize, w: f64| -> Result<()> {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::DegenerateMetric(format!(
                "edge ({i}, {j}) has weight {w} under {}",
                kind.name()
            )));
        }
        adj[i].push((j, w));
        adj[j].push((i, w));
        Ok(())
    };
    for (&(i, j), &w) in segments.iter().zip(&seg_weights) {
        add(i, j, w)?;
    }
    let mut anchor_pairs = BTreeSet::new();
    for (i, nb) in anchor_nbrs.iter().enumerate() {
        for &j in nb {
            let w = a_coef * fs_distance(&spheres[i], &spheres[j]);
            if i < anchors {
                if anchor_pairs.insert((i.min(j), i.max(j))) {
                    add(i, j, w)?;
                }
            } else {
                add(i, j, radial[i - anchors] + w)?;
            }
        }
    }

    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            dist[i * n + j] = rows[i][j].min(rows[j][i]);
        }
    }
    Ok(MetricCloud {
        points,
        kind,
        domain,
        dist,
        graph_k,
        seed,
        anchors,
    })
}

/// Largest sampled distance; `0` for a single point.
pub fn cloud_diameter(c: &MetricCloud) -> f64 {
    c.dist.iter().copied().fold(0.0, f64::max)
}

/// Upper bound on the Gromov-Hausdorff distance at parameter `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GHEstimate {
    pub t: f64,
    pub bound: f64,
}

/// Half the distortion of the identity correspondence between two clouds on
/// the same points.
pub fn correspondence_distortion(a: &MetricCloud, b: &MetricCloud) -> Result<f64> {
    if a.points != b.points {
        return Err(Error::InvalidParameter(
            "clouds must share their points".into(),
        ));
    }
    let worst = a
        .dist
        .iter()
        .zip(&b.dist)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(0.5 * worst)
}

/// [`gh_upper_bound_with_k`] with `k = 12`.
pub fn gh_upper_bound(t: f64, n: usize, seed: u64) -> Result<GHEstimate> {
    gh_upper_bound_with_k(t, n, DEFAULT_GRAPH_K, seed)
}

/// Compare `ω_E(t)` on `Ω` with the cone metric on the same sample, where `P₀`
/// collapses to the tip.
pub fn gh_upper_bound_with_k(t: f64, n: usize, graph_k: usize, seed: u64) -> Result<GHEstimate> {
    check_t(t)?;
    let cone = build_cloud(DomainSpec::Omega, FormKind::ConeMetric, n, graph_k, seed)?;
    gh_against(t, &cone)
}

/// GH bound of `ω_E(t)` against an already built cone cloud.
pub fn gh_against(t: f64, cone: &MetricCloud) -> Result<GHEstimate> {
    check_t(t)?;
    let calabi = cloud_from_points(
        cone.domain,
        FormKind::CalabiFamily(t),
        cone.points.clone(),
        cone.anchors,
        cone.graph_k,
        cone.seed,
    )?;
    Ok(GHEstimate {
        t,
        bound: correspondence_distortion(&calabi, cone)?,
    })
}

/// Cone-metric radial length at `ρ`, `(3/2)^{2/3} e^{ρ/3}`.
pub fn cone_radial_length(rho: f64) -> f64 {
    cone_radial_coefficient() * (rho / 3.0).exp()
}
