//! The generalized k-quasi-hyperbolic infinitesimal metric.
//!
//! `δ^(k)(p; v)` is a sup of boundary distances over k-dimensional K-linear
//! slices containing `v`, and `q^(k)(p; v) = ‖v‖ / δ^(k)(p; v)`. Neither the
//! outer sup nor the inner min is convex, so the optimizer runs deterministic
//! multi-start Givens-rotation ascent over frames with a brute-force fallback
//! oracle living in the tests. Also here: quasi-normal vectors, the
//! quasi-normal/tangential decomposition audits, and the minimal-metric
//! closed form and sandwich bounds.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Tolerances;
use crate::domains::{ConvexBody, ScalarField};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::linalg;

/// Value of `q^(k)(p; v)` with the achieving frame and an optimizer bracket.
#[derive(Clone, Debug)]
pub struct MetricValue {
    /// `‖v‖ / δ^(k)` with the stored `δ^(k)`.
    pub value: f64,
    /// The slice distance `δ^(k)(p; v)` found (possibly `+∞`).
    pub delta: f64,
    /// Frame achieving `delta`.
    pub frame: Frame,
    /// `[lower, upper]` bracket: `upper` is rigorous (any frame certifies a
    /// lower bound on the sup), `lower` reflects optimizer tolerance and
    /// restart spread.
    pub lower: f64,
    pub upper: f64,
}

/// An `(r, δ)`-quasi-normal vector at a boundary point.
#[derive(Clone, Debug)]
pub struct QuasiNormal {
    pub boundary_point: DVector<f64>,
    pub normal: DVector<f64>,
    pub r: f64,
    pub delta: f64,
}

/// Options for the frame optimizer.
#[derive(Clone, Debug)]
pub struct DeltaKOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
}

impl Default for DeltaKOptions {
    fn default() -> Self {
        DeltaKOptions {
            restarts: 32,
            seed: 0x5EED,
            max_sweeps: 60,
        }
    }
}

/// Threshold beyond which a slice distance is reported as unbounded
/// (relative to body scale).
const UNBOUNDED_FACTOR: f64 = 1e9;

/// `δ^(k)(p; v)`: maximal plane-slice distance over K-frames containing `v`.
///
/// Shortcuts: `k = d` is the boundary distance, `k = 1` the line distance.
/// On the real half-space the closed form `p_1 ‖v‖ / |v_1|` is used.
pub fn delta_k(
    body: &ConvexBody,
    tol: &Tolerances,
    p: &DVector<f64>,
    v: &DVector<f64>,
    k: usize,
) -> Result<(f64, Frame)> {
    check_inputs(body, p, v, k)?;
    if k == body.dim_k() {
        let d = body.boundary_distance(p)?;
        return Ok((d, Frame::full(body.field(), body.dim_k())?));
    }
    if k == 1 {
        let d = body.line_distance(p, v)?;
        return Ok((d, Frame::line(body.field(), v)?));
    }
    if matches!(body.shape(), crate::domains::BodyShape::HalfSpace)
        && body.field() == ScalarField::Real
    {
        return half_space_delta_k(body, p, v, k);
    }
    delta_k_via_optimizer(body, tol, p, v, k, &DeltaKOptions::default())
}

/// Closed form on the half-space `{x_1 > 0}`: the optimal slice through `v`
/// minimizes the projection of `e_1`, giving `p_1 ‖v‖ / |v_1|` for any k < d.
fn half_space_delta_k(
    body: &ConvexBody,
    p: &DVector<f64>,
    v: &DVector<f64>,
    k: usize,
) -> Result<(f64, Frame)> {
    let vhat = v.normalize();
    let d = body.real_dim();
    let value = if vhat[0].abs() < 1e-300 {
        f64::INFINITY
    } else {
        p[0] / vhat[0].abs()
    };
    // Achieving frame: v plus completion orthogonal to e_1.
    let mut completion = Vec::new();
    for i in 1..d {
        let e = DVector::from_fn(d, |j, _| if j == i { 1.0 } else { 0.0 });
        completion.push(e);
    }
    let frame = Frame::containing(body.field(), v, k, &completion)?;
    Ok((value, frame))
}

/// Multi-start Givens-rotation ascent over frames containing `v`. The
/// restarts are the coordinate completions, the frame orthogonal to the
/// quasi-normal at `p`'s radial boundary projection, and seeded random
/// completions; all run independently and reduce by max.
pub fn delta_k_via_optimizer(
    body: &ConvexBody,
    tol: &Tolerances,
    p: &DVector<f64>,
    v: &DVector<f64>,
    k: usize,
    opts: &DeltaKOptions,
) -> Result<(f64, Frame)> {
    check_inputs(body, p, v, k)?;
    let mut starts: Vec<Frame> = Vec::new();
    // Coordinate completions (a few axis permutations).
    let d = body.real_dim();
    for shift in 0..d.min(4) {
        let completion: Vec<DVector<f64>> = (0..d)
            .map(|i| {
                let idx = (i + shift) % d;
                DVector::from_fn(d, |j, _| if j == idx { 1.0 } else { 0.0 })
            })
            .collect();
        if let Ok(f) = Frame::containing(body.field(), v, k, &completion) {
            starts.push(f);
        }
    }
    // Frame completed inside the orthogonal complement of the quasi-normal.
    if let Ok(qn) = quasi_normal_through(body, p) {
        let completion = linalg::orthogonal_complement(std::slice::from_ref(&qn.normal), d);
        if let Ok(f) = Frame::containing(body.field(), v, k, &completion) {
            starts.push(f);
        }
    }
    // Seeded random restarts.
    for i in 0..opts.restarts {
        let mut rng = linalg::stream_rng(opts.seed, i as u64);
        if let Ok(f) = Frame::random_containing(body.field(), v, k, &mut rng) {
            starts.push(f);
        }
    }

    let results: Vec<(f64, Frame)> = starts
        .into_par_iter()
        .map(|f| ascend(body, tol, p, f, opts.max_sweeps))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, Frame)> = None;
    for (val, f) in results {
        let better = match &best {
            None => true,
            Some((bv, bf)) => val > *bv || (val == *bv && f.hash() < bf.hash()),
        };
        if better {
            best = Some((val, f));
        }
    }
    let (val, frame) = best.ok_or_else(|| Error::Degenerate("no valid starting frame".into()))?;
    if val > UNBOUNDED_FACTOR * body.scale() {
        return Ok((f64::INFINITY, frame));
    }
    Ok((val, frame))
}

/// Greedy ascent by small rotations of the non-fixed generators inside the
/// orthogonal complement, with backtracking step control.
fn ascend(
    body: &ConvexBody,
    tol: &Tolerances,
    p: &DVector<f64>,
    frame: Frame,
    max_sweeps: usize,
) -> Result<(f64, Frame)> {
    let field = body.field();
    let objective = |f: &Frame| -> Result<f64> { Ok(body.plane_slice_distance(p, f)?.value) };
    let mut generators = frame.generators();
    let mut current = frame;
    let mut val = objective(&current)?;
    if !val.is_finite() {
        return Ok((val, current));
    }
    let mut step: f64 = 0.4;
    for _ in 0..max_sweeps {
        let mut improved = false;
        for gi in 1..generators.len() {
            let complement = linalg::orthogonal_complement(current.columns(), body.real_dim());
            for w in &complement {
                for sign in [1.0, -1.0] {
                    let theta: f64 = sign * step;
                    let mut cand = generators.clone();
                    cand[gi] = (&generators[gi] * theta.cos()) + w * theta.sin();
                    let Ok(f) = Frame::from_generators(field, &cand) else {
                        continue;
                    };
                    let fv = objective(&f)?;
                    if !fv.is_finite() {
                        return Ok((fv, f));
                    }
                    if fv > val * (1.0 + 1e-12) {
                        val = fv;
                        generators = f.generators();
                        current = f;
                        improved = true;
                    }
                    if val > UNBOUNDED_FACTOR * body.scale() {
                        return Ok((val, current));
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < tol.tol_opt {
                break;
            }
        }
    }
    Ok((val, current))
}

fn check_inputs(body: &ConvexBody, p: &DVector<f64>, v: &DVector<f64>, k: usize) -> Result<()> {
    if v.norm() == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if k == 0 || k > body.dim_k() {
        return Err(Error::KOutOfRange {
            k,
            max: body.dim_k(),
        });
    }
    if !body.contains(p)? {
        return Err(Error::NotInterior);
    }
    Ok(())
}

/// `q^(k)(p; v) = ‖v‖ / δ^(k)(p; v)` as a [`MetricValue`].
pub fn qk_norm(
    body: &ConvexBody,
    tol: &Tolerances,
    p: &DVector<f64>,
    v: &DVector<f64>,
    k: usize,
) -> Result<MetricValue> {
    let (delta, frame) = delta_k(body, tol, p, v, k)?;
    Ok(metric_value_from_delta(tol, v, delta, frame))
}

pub(crate) fn metric_value_from_delta(
    tol: &Tolerances,
    v: &DVector<f64>,
    delta: f64,
    frame: Frame,
) -> MetricValue {
    let norm_v = v.norm();
    if delta.is_infinite() {
        return MetricValue {
            value: 0.0,
            delta,
            frame,
            lower: 0.0,
            upper: 0.0,
        };
    }
    let value = norm_v / delta;
    // The found delta certifies q_true <= value; the lower side carries the
    // optimizer tolerance.
    MetricValue {
        value,
        delta,
        frame,
        lower: value / (1.0 + 4.0 * tol.tol_opt),
        upper: value,
    }
}

/// `m_H(p; v) = |v_1| / (2 |p_1|)` on the half-space `{x_1 > 0}`.
pub fn minimal_metric_halfspace(p: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    if p[0] <= 0.0 {
        return Err(Error::Precondition(
            "half-space minimal metric needs p_1 > 0".into(),
        ));
    }
    Ok(v[0].abs() / (2.0 * p[0]))
}

/// Sandwich bounds `(q^(2)/2, q^(2))` for the minimal metric on a convex body
/// in `R^d`, `d >= 3`. This is the only minimal-metric bound available for
/// general convex bodies.
pub fn minimal_sandwich(
    body: &ConvexBody,
    tol: &Tolerances,
    p: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(f64, f64)> {
    if body.field() != ScalarField::Real {
        return Err(Error::Unsupported(
            "minimal metric is a real-field notion".into(),
        ));
    }
    if body.dim_k() < 3 {
        return Err(Error::Precondition(
            "minimal metric needs ambient dimension >= 3".into(),
        ));
    }
    if v.norm() == 0.0 {
        return Ok((0.0, 0.0));
    }
    let q2 = qk_norm(body, tol, p, v, 2)?.value;
    Ok((0.5 * q2, q2))
}

/// Quasi-normal at a boundary point via the base point: `n = (p0 - x)/‖p0 - x‖`,
/// `r = ‖p0 - x‖`, `δ = δ_Ω(p0)`. The constants are independent of `x`.
pub fn quasi_normal_at(
    body: &ConvexBody,
    tol: &Tolerances,
    x: &DVector<f64>,
) -> Result<QuasiNormal> {
    let residual = body.boundary_residual(x)?;
    if residual > tol.tol_boundary {
        return Err(Error::NotOnBoundary(residual));
    }
    // Snap to the boundary along the base ray.
    let dir = (x - body.base_point()).normalize();
    let x_proj = body.boundary_point(&dir)?;
    let offset = body.base_point() - &x_proj;
    let r = offset.norm();
    if r == 0.0 {
        return Err(Error::Degenerate(
            "boundary point coincides with base point".into(),
        ));
    }
    let delta = body.boundary_distance(body.base_point())?;
    Ok(QuasiNormal {
        boundary_point: x_proj,
        normal: offset / r,
        r,
        delta,
    })
}

/// Quasi-normal data for the boundary projection of an interior point along
/// the base ray.
pub fn quasi_normal_through(body: &ConvexBody, p: &DVector<f64>) -> Result<QuasiNormal> {
    let dir = p - body.base_point();
    if dir.norm() < 1e-14 {
        return Err(Error::Degenerate("point coincides with base point".into()));
    }
    let x = body.boundary_point(&dir.normalize())?;
    let offset = body.base_point() - &x;
    let r = offset.norm();
    let delta = body.boundary_distance(body.base_point())?;
    Ok(QuasiNormal {
        boundary_point: x,
        normal: offset / r,
        r,
        delta,
    })
}

/// Realized two-sided ratios for the quasi-normal/tangential decomposition
/// at one sample: both the directional-distance estimate and the metric
/// splitting.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub t: f64,
    pub s: f64,
    /// `δ(p; n)`.
    pub delta_normal: f64,
    /// `δ(p; v0)`.
    pub delta_tangential: f64,
    /// `δ(p; v)`.
    pub delta_v: f64,
    /// `‖v‖ / (|s|/δ1 + ‖v0‖/δ2)`, the harmonic-decomposition estimate.
    pub harmonic_bound: f64,
    /// `δ(p; v) / harmonic_bound`; convexity forces `1 <= ratio <= C`.
    pub ratio_harmonic: f64,
    /// `δ(p; v) / min{(‖v‖/|s|) δ1, (‖v‖/‖v0‖) δ2}`, bounded by `C`.
    pub ratio_min: f64,
    /// `(q^(k)(p; s n) + q^(k)(p; v0)) / q^(k)(p; v)` for the splitting bound.
    pub splitting_ratio: f64,
}

/// Evaluate the decomposition ratios for `p = x + t n`, `v = s n + v0` with
/// `(x + R v0)` disjoint from the body (checked by sampling the line).
pub fn decomposition_audit(
    body: &ConvexBody,
    tol: &Tolerances,
    qn: &QuasiNormal,
    t: f64,
    s: f64,
    v0: &DVector<f64>,
    k: usize,
) -> Result<DecompositionReport> {
    if !(t > 0.0 && t <= qn.r) {
        return Err(Error::Precondition(format!(
            "t = {t} must lie in (0, r = {}]",
            qn.r
        )));
    }
    if v0.norm() == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let x = &qn.boundary_point;
    // Tangency precondition: the line x + R v0 misses the body.
    let samples = 41;
    let reach = 2.0 * body.scale();
    for i in 0..samples {
        let lam = -reach + 2.0 * reach * (i as f64) / (samples - 1) as f64;
        if body.contains(&(x + v0 * (lam / v0.norm())))? {
            return Err(Error::Precondition(
                "tangency failed: (x + R v0) meets the body".into(),
            ));
        }
    }
    let p = x + &qn.normal * t;
    if !body.contains(&p)? {
        return Err(Error::Precondition("p = x + t n is not interior".into()));
    }
    let v = &qn.normal * s + v0;

    let delta_normal = body.line_distance(&p, &qn.normal)?;
    let delta_tangential = body.line_distance(&p, v0)?;
    let delta_v = body.line_distance(&p, &v)?;
    let denom = s.abs() / delta_normal + v0.norm() / delta_tangential;
    let harmonic_bound = v.norm() / denom;
    let ratio_harmonic = delta_v / harmonic_bound;
    let min_bound = ((v.norm() / s.abs().max(1e-300)) * delta_normal)
        .min((v.norm() / v0.norm()) * delta_tangential);
    let ratio_min = delta_v / min_bound;

    let q_v = qk_norm(body, tol, &p, &v, k)?.value;
    let q_sn = if s == 0.0 {
        0.0
    } else {
        qk_norm(body, tol, &p, &(&qn.normal * s), k)?.value
    };
    let q_v0 = qk_norm(body, tol, &p, v0, k)?.value;
    let splitting_ratio = (q_sn + q_v0) / q_v;

    Ok(DecompositionReport {
        t,
        s,
        delta_normal,
        delta_tangential,
        delta_v,
        harmonic_bound,
        ratio_harmonic,
        ratio_min,
        splitting_ratio,
    })
}

/// Summary of a decomposition audit over a sample set: the realized empirical
/// constants (existence, not specific values, is the claim being tested).
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionSummary {
    pub samples: usize,
    pub max_ratio_harmonic: f64,
    pub min_ratio_harmonic: f64,
    pub max_ratio_min: f64,
    /// Body-wide splitting constant `C*`: ratios lie in `[1/C*, C*]`.
    pub splitting_c: f64,
}

/// Sample boundary points, depths, and tangential decompositions, and reduce
/// the realized ratios. Deterministic for a fixed seed.
pub fn decomposition_audit_sweep(
    body: &ConvexBody,
    tol: &Tolerances,
    k: usize,
    n_samples: usize,
    seed: u64,
) -> Result<DecompositionSummary> {
    body.require_bounded()?;
    let dim = body.real_dim();
    let reports: Vec<DecompositionReport> = (0..n_samples)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = linalg::stream_rng(seed, i as u64);
            let u = linalg::random_unit_vector(dim, &mut rng);
            let x = body.boundary_point(&u).ok()?;
            let qn = quasi_normal_at(body, tol, &x).ok()?;
            let normals = body.supporting_normals_at(&x).ok()?;
            let nu = &normals[rng.gen_range(0..normals.len())];
            let v0 = linalg::orthonormal_complement_step(
                &linalg::random_unit_vector(dim, &mut rng),
                std::slice::from_ref(nu),
            )?;
            let t = qn.r * (0.02 + 0.7 * rng.gen::<f64>());
            let s = -1.5 + 3.0 * rng.gen::<f64>();
            decomposition_audit(body, tol, &qn, t, s, &v0, k).ok()
        })
        .collect();
    if reports.len() < n_samples / 4 {
        return Err(Error::Degenerate(format!(
            "only {} / {n_samples} decomposition samples were admissible",
            reports.len()
        )));
    }
    let mut max_h = f64::NEG_INFINITY;
    let mut min_h = f64::INFINITY;
    let mut max_m = f64::NEG_INFINITY;
    let mut max_split: f64 = 1.0;
    for r in &reports {
        max_h = max_h.max(r.ratio_harmonic);
        min_h = min_h.min(r.ratio_harmonic);
        max_m = max_m.max(r.ratio_min);
        max_split = max_split
            .max(r.splitting_ratio)
            .max(1.0 / r.splitting_ratio);
    }
    Ok(DecompositionSummary {
        samples: reports.len(),
        max_ratio_harmonic: max_h,
        min_ratio_harmonic: min_h,
        max_ratio_min: max_m,
        splitting_c: max_split,
    })
}

use rand::Rng;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::PExponent;

    fn vecd(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn ball_delta_k_is_one_at_center() {
        let ball = ConvexBody::unit_ball(3);
        let p = vecd(&[0.0, 0.0, 0.0]);
        for k in 1..=3 {
            let (d, _) = delta_k(&ball, &tols(), &p, &vecd(&[0.3, 0.2, -0.1]), k).unwrap();
            assert!((d - 1.0).abs() < 1e-6, "k={k} d={d}");
        }
    }

    #[test]
    fn halfspace_closed_forms() {
        let hs = ConvexBody::half_space(3, ScalarField::Real, vecd(&[1.0, 0.0, 0.0])).unwrap();
        let p = vecd(&[1.0, 0.0, 0.0]);
        let (d, _) = delta_k(&hs, &tols(), &p, &vecd(&[1.0, 0.0, 0.0]), 2).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let q = qk_norm(&hs, &tols(), &p, &vecd(&[1.0, 0.0, 0.0]), 2).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
        // direction orthogonal to e1: unbounded slice, q = 0
        let q = qk_norm(&hs, &tols(), &p, &vecd(&[0.0, 1.0, 0.0]), 2).unwrap();
        assert!(q.delta.is_infinite());
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn square_k_d_shortcut() {
        let sq = ConvexBody::cube(2, 1.0);
        let (d, _) = delta_k(&sq, &tols(), &vecd(&[0.5, 0.0]), &vecd(&[0.0, 1.0]), 2).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn optimizer_matches_halfspace_analytic() {
        let hs = ConvexBody::half_space(3, ScalarField::Real, vecd(&[1.0, 0.0, 0.0])).unwrap();
        let p = vecd(&[1.0, 0.0, 0.0]);
        let (d, _) = delta_k_via_optimizer(
            &hs,
            &tols(),
            &p,
            &vecd(&[1.0, 0.0, 0.0]),
            2,
            &DeltaKOptions {
                restarts: 16,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((d - 1.0).abs() < 0.02, "optimizer delta = {d}");
    }

    #[test]
    fn optimizer_reports_unbounded_slice() {
        // v = e2 on the half-space: the frame {e2, e3} never exits, and the
        // optimizer has to find it and report infinity.
        let hs = ConvexBody::half_space(3, ScalarField::Real, vecd(&[1.0, 0.0, 0.0])).unwrap();
        let p = vecd(&[1.0, 0.0, 0.0]);
        let (d, _) = delta_k_via_optimizer(
            &hs,
            &tols(),
            &p,
            &vecd(&[0.0, 1.0, 0.0]),
            2,
            &DeltaKOptions::default(),
        )
        .unwrap();
        assert!(d.is_infinite(), "optimizer delta = {d}");
    }

    #[test]
    fn complex_ball_delta_k() {
        // unit ball of C^2 ~ R^4 at the center: every K-slice hits the
        // boundary at distance 1
        let ball = ConvexBody::pball(
            PExponent::Finite(2.0),
            1.0,
            DVector::zeros(4),
            DVector::zeros(4),
            ScalarField::Complex,
        )
        .unwrap();
        let p = DVector::zeros(4);
        let v = vecd(&[0.3, -0.1, 0.7, 0.2]);
        let t = tols();
        for k in 1..=2 {
            let (d, frame) = delta_k(&ball, &t, &p, &v, k).unwrap();
            assert!((d - 1.0).abs() < 1e-6, "k={k}: {d}");
            frame.validate().unwrap();
            assert_eq!(frame.dim_real(), 2 * k);
        }
    }

    #[test]
    fn qk_homogeneity() {
        let ball = ConvexBody::unit_ball(3);
        let p = vecd(&[0.2, -0.1, 0.3]);
        let v = vecd(&[0.4, 1.0, -0.2]);
        let base = qk_norm(&ball, &tols(), &p, &v, 2).unwrap();
        for c in [-2.0, 0.5, 10.0] {
            let scaled = qk_norm(&ball, &tols(), &p, &(&v * c), 2).unwrap();
            // same line => same delta and exactly homogeneous value
            assert!(
                (scaled.value - c.abs() * base.value).abs() <= 1e-9 * base.value.max(1.0),
                "c={c}: {} vs {}",
                scaled.value,
                c.abs() * base.value
            );
        }
        // c = 0 gives the zero vector: rejected
        assert!(qk_norm(&ball, &tols(), &p, &(&v * 0.0), 2).is_err());
    }

    #[test]
    fn monotone_in_k() {
        // Larger slices see the boundary sooner: delta^(k) is non-increasing
        // in k (delta^(d) is the plain boundary distance, the smallest), so
        // q^(k) is non-decreasing.
        let ell = ConvexBody::ellipsoid(
            vecd(&[0.0, 0.0, 0.0]),
            nalgebra::DMatrix::from_row_slice(
                3,
                3,
                &[0.25, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 4.0],
            ),
            vecd(&[0.0, 0.0, 0.0]),
            ScalarField::Real,
        )
        .unwrap();
        let p = vecd(&[0.3, 0.1, 0.05]);
        let v = vecd(&[0.2, -0.5, 1.0]);
        let t = tols();
        let mut prev = f64::INFINITY;
        for k in 1..=3 {
            let (d, _) = delta_k(&ell, &t, &p, &v, k).unwrap();
            assert!(d <= prev + 1e-6, "k={k}: delta {d} > {prev}");
            prev = d;
        }
        // the square example pins the direction: delta^(1) = 1 > delta^(2) = 0.5
        let sq = ConvexBody::cube(2, 1.0);
        let p = vecd(&[0.5, 0.0]);
        let v = vecd(&[0.0, 1.0]);
        let (d1, _) = delta_k(&sq, &t, &p, &v, 1).unwrap();
        let (d2, _) = delta_k(&sq, &t, &p, &v, 2).unwrap();
        assert!((d1 - 1.0).abs() < 1e-12 && (d2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn minimal_metric_halfspace_examples() {
        assert!(
            (minimal_metric_halfspace(&vecd(&[1.0, 0.0, 0.0]), &vecd(&[1.0, 0.0, 0.0])).unwrap()
                - 0.5)
                .abs()
                < 1e-15
        );
        assert_eq!(
            minimal_metric_halfspace(&vecd(&[1.0, 0.0, 0.0]), &vecd(&[0.0, 1.0, 0.0])).unwrap(),
            0.0
        );
        assert!(
            (minimal_metric_halfspace(&vecd(&[0.25, 3.0, -1.0]), &vecd(&[1.0, 1.0, 1.0])).unwrap()
                - 2.0)
                .abs()
                < 1e-15
        );
        assert!(
            minimal_metric_halfspace(&vecd(&[-1.0, 0.0, 0.0]), &vecd(&[1.0, 0.0, 0.0])).is_err()
        );
    }

    #[test]
    fn minimal_sandwich_ball() {
        let ball = ConvexBody::unit_ball(3);
        let (lo, hi) = minimal_sandwich(
            &ball,
            &tols(),
            &vecd(&[0.0, 0.0, 0.0]),
            &vecd(&[1.0, 0.0, 0.0]),
        )
        .unwrap();
        assert!((lo - 0.5).abs() < 1e-6 && (hi - 1.0).abs() < 1e-6);
        let (lo, hi) =
            minimal_sandwich(&ball, &tols(), &vecd(&[0.1, 0.0, 0.0]), &vecd(&[0.0; 3])).unwrap();
        assert_eq!((lo, hi), (0.0, 0.0));
        // dimension restriction
        let disk = ConvexBody::unit_ball(2);
        assert!(minimal_sandwich(&disk, &tols(), &vecd(&[0.0, 0.0]), &vecd(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn quasi_normal_examples() {
        let t = tols();
        let ball = ConvexBody::unit_ball(2);
        let qn = quasi_normal_at(&ball, &t, &vecd(&[1.0, 0.0])).unwrap();
        assert!((qn.normal[0] + 1.0).abs() < 1e-12);
        assert!((qn.r - 1.0).abs() < 1e-12);
        assert!((qn.delta - 1.0).abs() < 1e-12);
        assert!(qn.delta <= qn.r + 1e-12);

        let sq = ConvexBody::cube(2, 1.0);
        let qn = quasi_normal_at(&sq, &t, &vecd(&[1.0, 1.0])).unwrap();
        let s = -(0.5_f64.sqrt());
        assert!((qn.normal[0] - s).abs() < 1e-12 && (qn.normal[1] - s).abs() < 1e-12);
        assert!((qn.r - 2.0_f64.sqrt()).abs() < 1e-12);

        // ellipsoid x^2/4 + y^2 < 1 at (2, 0)
        let ell = ConvexBody::ellipsoid(
            vecd(&[0.0, 0.0]),
            nalgebra::DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 1.0]),
            vecd(&[0.0, 0.0]),
            ScalarField::Real,
        )
        .unwrap();
        let qn = quasi_normal_at(&ell, &t, &vecd(&[2.0, 0.0])).unwrap();
        assert!((qn.normal[0] + 1.0).abs() < 1e-12);
        assert!((qn.r - 2.0).abs() < 1e-12);
        assert!((qn.delta - 1.0).abs() < 1e-10);

        // interior point is rejected
        assert!(quasi_normal_at(&ball, &t, &vecd(&[0.5, 0.0])).is_err());
    }

    #[test]
    fn decomposition_ball_example() {
        // x = (-1, 0), n = e1, t = 0.1, v = n + e2
        let t = tols();
        let ball = ConvexBody::unit_ball(2);
        let qn = quasi_normal_at(&ball, &t, &vecd(&[-1.0, 0.0])).unwrap();
        let rep = decomposition_audit(&ball, &t, &qn, 0.1, 1.0, &vecd(&[0.0, 1.0]), 1).unwrap();
        assert!(
            (rep.delta_normal - 0.1).abs() < 1e-10,
            "delta1 = {}",
            rep.delta_normal
        );
        let expected = (2.0 * 0.1_f64 - 0.01).sqrt();
        assert!(
            (rep.delta_tangential - expected).abs() < 1e-10,
            "delta2 = {}",
            rep.delta_tangential
        );
        // the harmonic bound brackets delta(p; v) from below
        assert!(rep.ratio_harmonic >= 1.0 - 1e-9);
        assert!(rep.ratio_min <= 3.0);
    }

    #[test]
    fn decomposition_rejects_non_tangent_direction() {
        let t = tols();
        let ball = ConvexBody::unit_ball(2);
        let qn = quasi_normal_at(&ball, &t, &vecd(&[-1.0, 0.0])).unwrap();
        // v0 = e1 points straight into the ball from x
        let err = decomposition_audit(&ball, &t, &qn, 0.1, 1.0, &vecd(&[1.0, 0.0]), 1);
        assert!(err.is_err());
    }

    #[test]
    fn pball_p3_delta_k_monotone_and_finite() {
        let b = ConvexBody::pball(
            PExponent::Finite(3.0),
            1.0,
            vecd(&[0.0, 0.0, 0.0]),
            vecd(&[0.0, 0.0, 0.0]),
            ScalarField::Real,
        )
        .unwrap();
        let (d, _) = delta_k(
            &b,
            &tols(),
            &vecd(&[0.2, 0.1, 0.0]),
            &vecd(&[1.0, 1.0, 0.3]),
            2,
        )
        .unwrap();
        assert!(d.is_finite() && d > 0.0);
    }
}
