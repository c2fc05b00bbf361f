//! Executable hyperbolicity tests: boundary expansion profiles and exponent
//! fits, flat-direction detection, four-point delta estimation, and the
//! non-slimness witness rectangle.
//!
//! The central object is the decay of tangential slice distances along the
//! segment from a boundary point to an interior point: geometrically
//! expanding boundaries (fitted exponent bounded away from zero on every
//! tangential slice) signal Gromov hyperbolicity of `dist^(k)`; flat
//! directions produce witness rectangles whose opposite-side separation
//! grows without bound.

pub mod polynomial;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Tolerances;
use crate::domains::ConvexBody;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geodesy::{supporting_hyperplanes_near, SupportingHyperplane};
use crate::linalg;
use crate::metrics::quasi_normal_at;

/// Dyadic grid `t_j = 2^{-j}`, `j` in `[j_min, j_max]`. The default range
/// keeps slice evaluations well above the ray-oracle tolerance.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DyadicGrid {
    pub j_min: u32,
    pub j_max: u32,
}

impl Default for DyadicGrid {
    fn default() -> Self {
        DyadicGrid {
            j_min: 4,
            j_max: 14,
        }
    }
}

impl DyadicGrid {
    pub fn values(&self) -> Vec<f64> {
        (self.j_min..=self.j_max)
            .map(|j| 0.5_f64.powi(j as i32))
            .collect()
    }
}

/// Sampled decay data `g(t_j) = dist(x_t, (x_t + V) ∩ ∂Ω)` along
/// `x_t = (1 - t) x + t p`.
#[derive(Clone, Debug)]
pub struct ExpansionProfile {
    pub boundary_point: DVector<f64>,
    pub interior_point: DVector<f64>,
    pub frame: Frame,
    /// `(t, g(t))` pairs, `t` increasing.
    pub entries: Vec<(f64, f64)>,
    /// Grid points rejected because the segment point was not interior.
    pub rejected: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Expanding,
    Flat,
    Inconclusive,
}

/// Fitted decay law `g(s) <= C (s/t)^lambda g(t)`.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionFit {
    pub lambda: f64,
    /// Exact max over ordered grid pairs, clamped to at least 1.
    pub c: f64,
    pub residual_rms: f64,
    pub verdict: Verdict,
    pub points: usize,
}

/// Evaluate the slice distance along the dyadic grid.
pub fn expansion_profile(
    body: &ConvexBody,
    tol: &Tolerances,
    x: &DVector<f64>,
    p: &DVector<f64>,
    frame: &Frame,
    grid: &DyadicGrid,
) -> Result<ExpansionProfile> {
    let residual = body.boundary_residual(x)?;
    if residual > tol.tol_boundary {
        return Err(Error::NotOnBoundary(residual));
    }
    if !body.contains(p)? {
        return Err(Error::NotInterior);
    }
    let mut entries = Vec::new();
    let mut rejected = Vec::new();
    let mut ts = grid.values();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for t in ts {
        let xt = x * (1.0 - t) + p * t;
        if !body.contains(&xt)? {
            rejected.push(t);
            continue;
        }
        let hit = body.plane_slice_distance(&xt, frame)?;
        if hit.value.is_finite() && hit.value > 0.0 {
            entries.push((t, hit.value));
        } else {
            rejected.push(t);
        }
    }
    Ok(ExpansionProfile {
        boundary_point: x.clone(),
        interior_point: p.clone(),
        frame: frame.clone(),
        entries,
        rejected,
    })
}

/// Least-squares exponent on `(log t, log g)` with the exact pairwise
/// constant. Fewer than 4 valid points is inconclusive.
pub fn fit_expansion(profile: &ExpansionProfile, tol: &Tolerances) -> ExpansionFit {
    let n = profile.entries.len();
    if n < 4 {
        return ExpansionFit {
            lambda: f64::NAN,
            c: f64::NAN,
            residual_rms: f64::NAN,
            verdict: Verdict::Inconclusive,
            points: n,
        };
    }
    let xs: Vec<f64> = profile.entries.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = profile.entries.iter().map(|(_, g)| g.ln()).collect();
    let (lambda, intercept) = linalg::linear_fit(&xs, &ys);
    let mut sq = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let e = y - (lambda * x + intercept);
        sq += e * e;
    }
    let residual_rms = (sq / n as f64).sqrt();
    // C: exact max over ordered pairs s < t of g(s) / ((s/t)^lambda g(t)).
    let mut c: f64 = 1.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (s, gs) = profile.entries[i];
            let (t, gt) = profile.entries[j];
            c = c.max(gs / ((s / t).powf(lambda) * gt));
        }
    }
    let verdict = if lambda < tol.lambda_min {
        Verdict::Flat
    } else if residual_rms < tol.residual_cap {
        Verdict::Expanding
    } else {
        Verdict::Inconclusive
    };
    ExpansionFit {
        lambda,
        c,
        residual_rms,
        verdict,
        points: n,
    }
}

/// One audited `(x, V)` sample.
#[derive(Clone, Debug, Serialize)]
pub struct AuditRow {
    pub x: Vec<f64>,
    pub frame_hash: u64,
    pub lambda: f64,
    pub c: f64,
    pub residual: f64,
    pub verdict: Verdict,
    /// Whether `(x + V) ∩ Ω = ∅` was enforced (tangential family).
    pub tangential: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionAudit {
    pub rows: Vec<AuditRow>,
    /// Min lambda over the tangential family.
    pub min_lambda: f64,
    pub max_c: f64,
    pub flat_count: usize,
    pub verdict: String,
    #[serde(skip)]
    pub flat_witnesses: Vec<(DVector<f64>, Frame)>,
}

/// Sample boundary points and tangential frames, fit each profile, and
/// reduce. Random non-tangential frames are sampled separately and reported
/// but do not enter the verdict (the sufficient-condition family is the
/// tangential one).
#[allow(clippy::too_many_arguments)]
pub fn expansion_audit(
    body: &ConvexBody,
    tol: &Tolerances,
    k: usize,
    n_boundary: usize,
    n_frames: usize,
    grid: &DyadicGrid,
    seed: u64,
) -> Result<ExpansionAudit> {
    body.require_bounded()?;
    let dim = body.real_dim();
    let factor = body.field().real_dim_factor();
    let p = body.base_point().clone();
    let tangential_possible = k * factor <= dim - factor;

    type RowAndWitness = (AuditRow, Option<(DVector<f64>, Frame)>);
    let tasks: Vec<(usize, usize)> = (0..n_boundary)
        .flat_map(|i| (0..n_frames).map(move |f| (i, f)))
        .collect();
    let rows: Vec<RowAndWitness> = tasks
        .into_par_iter()
        .filter_map(|(i, fi)| {
            let mut rng = linalg::stream_rng(seed, (i * 1000 + fi) as u64);
            let u = linalg::random_unit_vector(dim, &mut rng);
            let x = body.boundary_point(&u).ok()?;
            let tangential = tangential_possible && fi % 4 != 3;
            let frame = if tangential {
                let normals = body.supporting_normals_at(&x).ok()?;
                let nu = normals[rng.gen_range(0..normals.len())].clone();
                tangential_frame(body, &nu, k, &mut rng).ok()?
            } else {
                let v = linalg::random_unit_vector(dim, &mut rng);
                Frame::random_containing(body.field(), &v, k, &mut rng).ok()?
            };
            let profile = expansion_profile(body, tol, &x, &p, &frame, grid).ok()?;
            let fit = fit_expansion(&profile, tol);
            let witness = if tangential && fit.verdict == Verdict::Flat {
                Some((x.clone(), frame.clone()))
            } else {
                None
            };
            Some((
                AuditRow {
                    x: x.iter().copied().collect(),
                    frame_hash: frame.hash(),
                    lambda: fit.lambda,
                    c: fit.c,
                    residual: fit.residual_rms,
                    verdict: fit.verdict,
                    tangential,
                },
                witness,
            ))
        })
        .collect();

    let mut min_lambda = f64::INFINITY;
    let mut max_c: f64 = 0.0;
    let mut flat_witnesses = Vec::new();
    let mut flat_count = 0;
    for (row, witness) in &rows {
        if row.tangential && row.verdict != Verdict::Inconclusive {
            min_lambda = min_lambda.min(row.lambda);
            max_c = max_c.max(row.c);
            if row.verdict == Verdict::Flat {
                flat_count += 1;
            }
        }
        if let Some(w) = witness {
            flat_witnesses.push(w.clone());
        }
    }
    let verdict = if !tangential_possible {
        "no tangential frames at this k (k = d)".to_string()
    } else if flat_count > 0 {
        "flat witnesses found".to_string()
    } else if min_lambda >= tol.lambda_min {
        "expansion holds (empirical)".to_string()
    } else {
        "inconclusive".to_string()
    };
    Ok(ExpansionAudit {
        rows: rows.into_iter().map(|(r, _)| r).collect(),
        min_lambda,
        max_c,
        flat_count,
        verdict,
        flat_witnesses,
    })
}

/// K-frame inside a supporting hyperplane's direction space. For complex
/// bodies the frame lives in the maximal complex subspace of the hyperplane.
fn tangential_frame(
    body: &ConvexBody,
    outward_normal: &DVector<f64>,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Frame> {
    let dim = body.real_dim();
    let mut blocked = vec![outward_normal.clone()];
    if body.field() == crate::domains::ScalarField::Complex {
        blocked.push(body.field().complex_structure(outward_normal)?);
    }
    let mut generators = Vec::with_capacity(k);
    let mut all_cols = blocked.clone();
    for _ in 0..k {
        let mut found = None;
        for _ in 0..32 {
            let cand = linalg::random_unit_vector(dim, rng);
            if let Some(w) = linalg::orthonormal_complement_step(&cand, &all_cols) {
                found = Some(w);
                break;
            }
        }
        let w =
            found.ok_or_else(|| Error::Degenerate("tangential frame sampling failed".into()))?;
        all_cols.push(w.clone());
        if body.field() == crate::domains::ScalarField::Complex {
            all_cols.push(body.field().complex_structure(&w)?);
        }
        generators.push(w);
    }
    Frame::from_generators(body.field(), &generators)
}

/// Four-point hyperbolicity estimate of a distance matrix: the max over
/// quadruples of half the gap between the two largest pair-sums, which is
/// the Gromov-product deficiency maximized over labelings. Exhaustive for
/// up to 40 points, seeded random quadruples beyond.
pub fn four_point_delta(matrix: &DMatrix<f64>, seed: u64) -> Result<f64> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::InvalidInput("distance matrix must be square".into()));
    }
    for i in 0..n {
        if matrix[(i, i)].abs() > 1e-12 {
            return Err(Error::InvalidInput(
                "distance matrix diagonal must be zero".into(),
            ));
        }
        for j in 0..n {
            if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-9 * (1.0 + matrix[(i, j)].abs()) {
                return Err(Error::InvalidInput(
                    "distance matrix must be symmetric".into(),
                ));
            }
            if matrix[(i, j)] < 0.0 {
                return Err(Error::InvalidInput("distances must be nonnegative".into()));
            }
        }
    }
    if n < 4 {
        return Ok(0.0);
    }
    let quad_delta = |a: usize, b: usize, c: usize, d: usize| -> f64 {
        let s1 = matrix[(a, b)] + matrix[(c, d)];
        let s2 = matrix[(a, c)] + matrix[(b, d)];
        let s3 = matrix[(a, d)] + matrix[(b, c)];
        let mut s = [s1, s2, s3];
        s.sort_by(|x, y| y.partial_cmp(x).unwrap());
        0.5 * (s[0] - s[1])
    };
    let mut delta: f64 = 0.0;
    if n <= 40 {
        for a in 0..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    for d in (c + 1)..n {
                        delta = delta.max(quad_delta(a, b, c, d));
                    }
                }
            }
        }
    } else {
        let mut rng = linalg::stream_rng(seed, 4242);
        for _ in 0..100_000 {
            let mut idx = [0usize; 4];
            loop {
                for v in idx.iter_mut() {
                    *v = rng.gen_range(0..n);
                }
                idx.sort_unstable();
                if idx[0] != idx[1] && idx[1] != idx[2] && idx[2] != idx[3] {
                    break;
                }
            }
            delta = delta.max(quad_delta(idx[0], idx[1], idx[2], idx[3]));
        }
    }
    Ok(delta)
}

/// Parameters of the witness rectangle: normal depths `e^{-a}`, `e^{-b}` and
/// the tangential retreat factor `1 - 2/n`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WitnessParams {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

/// Measured quasi-geodesic rectangle built from a (possibly flat) boundary
/// direction. All distances are hyperplane-sweep lower bounds from the probe
/// point placed at the log-scale midpoint of the near tangential side.
///
/// `growth` (the opposite-side separation) is the quantity driven by the
/// depth gap `b - a` for genuinely flat directions; `gap` (the min over all
/// three other sides) is the honest slimness gap at the probe, which
/// hyperbolicity keeps bounded. The two coincide in regimes where the
/// opposite side is nearest.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub params: WitnessParams,
    pub rectangle: Vec<Vec<f64>>,
    pub probe: Vec<f64>,
    /// Slice distances at the two depths and their ratio; a ratio well below
    /// `1 - 1/n` means the flat hypothesis collapsed (diagnostic, not error).
    pub slice_near: f64,
    pub slice_far: f64,
    pub collapse_ratio: f64,
    pub collapsed: bool,
    pub dist_opposite_side: f64,
    pub dist_normal_side: f64,
    pub dist_tangential_side: f64,
    pub gap: f64,
    pub growth: f64,
}

/// Build and measure the four-sided witness figure for a flat direction.
pub fn nonhyperbolicity_witness(
    body: &ConvexBody,
    tol: &Tolerances,
    witness: (&DVector<f64>, &Frame),
    params: WitnessParams,
) -> Result<WitnessReport> {
    body.require_bounded()?;
    if params.n <= 2 {
        return Err(Error::Degenerate(
            "witness construction requires n > 2 (retreat factor degenerates)".into(),
        ));
    }
    if !(params.a > 0.0 && params.b > params.a) {
        return Err(Error::InvalidInput("need 0 < a < b".into()));
    }
    let (x, frame) = witness;
    let qn = quasi_normal_at(body, tol, x)?;
    let x0 = &qn.boundary_point;
    let depth = |t: f64| -> DVector<f64> { x0 + &qn.normal * (qn.r * (-t).exp()) };
    let xa = depth(params.a);
    let xb = depth(params.b);

    // Slice hit at the shallow depth fixes the tangential direction.
    let hit = body.plane_slice_distance(&xa, frame)?;
    let g_a = hit.value;
    if !g_a.is_finite() || g_a <= 1e3 * tol.tol_ray * body.scale() {
        return Err(Error::Degenerate(
            "flat direction collapses: y_n too close to x_a".into(),
        ));
    }
    let u = hit.direction.normalize();
    let g_b = body.ray_hit_unchecked(&xb, &u)?;
    let collapse_ratio = g_b / g_a;
    let collapsed = collapse_ratio < 1.0 - 1.0 / params.n as f64;

    let retreat = 1.0 - 2.0 / params.n as f64;
    let ell_near = retreat * g_a;
    // Keep the deep corner inside the body even when the slice collapsed.
    let ell_far = retreat * g_a.min(g_b);
    let p_n = &xa + &u * ell_near;
    let p_far = &xb + &u * ell_far;
    // Probe at the log-scale midpoint of [x_a, p_n], where the two
    // lower-bound regimes (hyperplane ratio vs. reverse triangle) cross.
    let mu = 1.0 - (2.0 / params.n as f64).sqrt();
    let probe = &xa + &u * (mu * g_a);

    // Hyperplane pool: faces / normals sampled along both diagonals plus the
    // supporting planes at the witness base point and the slice hits.
    let mut planes = supporting_hyperplanes_near(body, &probe, &xb, 64)?;
    planes.extend(supporting_hyperplanes_near(body, &probe, &p_far, 64)?);
    for anchor in [x0.clone(), &xa + &u * g_a] {
        if let Ok(normals) = body.supporting_normals_at(&anchor) {
            for nu in normals {
                planes.push(SupportingHyperplane {
                    offset: nu.dot(&anchor),
                    normal: nu,
                });
            }
        }
    }

    let side_points = |a: &DVector<f64>, b: &DVector<f64>| -> Vec<DVector<f64>> {
        (0..33)
            .map(|i| a * (1.0 - i as f64 / 32.0) + b * (i as f64 / 32.0))
            .collect()
    };
    // The normal side is sampled log-uniformly in depth.
    let normal_side: Vec<DVector<f64>> = (0..33)
        .map(|i| depth(params.a + (params.b - params.a) * (i as f64 / 32.0)))
        .collect();
    let opposite_side = side_points(&xb, &p_far);
    let tangential_side = side_points(&p_n, &p_far);

    let pair_lb = |z: &DVector<f64>, q: &DVector<f64>| -> f64 {
        let mut best: f64 = 0.0;
        for plane in &planes {
            let dz = plane.distance(z);
            let dq = plane.distance(q);
            if dz > 0.0 && dq > 0.0 {
                best = best.max((dq / dz).ln().abs());
            }
        }
        best
    };
    let side_lb = |side: &[DVector<f64>]| -> f64 {
        side.iter()
            .map(|q| pair_lb(&probe, q))
            .fold(f64::INFINITY, f64::min)
    };

    let dist_opposite_side = side_lb(&opposite_side);
    let dist_normal_side = side_lb(&normal_side);
    let dist_tangential_side = side_lb(&tangential_side);
    let gap = dist_opposite_side
        .min(dist_normal_side)
        .min(dist_tangential_side);

    Ok(WitnessReport {
        params,
        rectangle: vec![
            xa.iter().copied().collect(),
            xb.iter().copied().collect(),
            p_far.iter().copied().collect(),
            p_n.iter().copied().collect(),
        ],
        probe: probe.iter().copied().collect(),
        slice_near: g_a,
        slice_far: g_b,
        collapse_ratio,
        collapsed,
        dist_opposite_side,
        dist_normal_side,
        dist_tangential_side,
        gap,
        growth: dist_opposite_side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::ScalarField;

    fn vecd(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn disk_profile_matches_chord_formula() {
        let disk = ConvexBody::unit_ball(2);
        let x = vecd(&[-1.0, 0.0]);
        let p = vecd(&[0.0, 0.0]);
        let frame = Frame::line(ScalarField::Real, &vecd(&[0.0, 1.0])).unwrap();
        let grid = DyadicGrid::default();
        let profile = expansion_profile(&disk, &tols(), &x, &p, &frame, &grid).unwrap();
        assert!(profile.rejected.is_empty());
        for &(t, g) in &profile.entries {
            let expected = (2.0 * t - t * t).sqrt();
            assert!((g - expected).abs() < 1e-8, "t={t}: {g} vs {expected}");
        }
        // explicit spot value from the chord formula
        let g02 = (2.0 * 0.02 - 0.02 * 0.02_f64).sqrt();
        assert!((g02 - 0.198_997_487_421_323_97).abs() < 1e-15);
        let fit = fit_expansion(&profile, &tols());
        assert!(
            fit.lambda > 0.45 && fit.lambda < 0.55,
            "lambda = {}",
            fit.lambda
        );
        assert_eq!(fit.verdict, Verdict::Expanding);
        assert!(fit.c >= 1.0);
    }

    #[test]
    fn square_face_profile_is_flat() {
        let sq = ConvexBody::cube(2, 1.0);
        let x = vecd(&[0.0, -1.0]);
        let p = vecd(&[0.0, 0.0]);
        let frame = Frame::line(ScalarField::Real, &vecd(&[1.0, 0.0])).unwrap();
        let profile =
            expansion_profile(&sq, &tols(), &x, &p, &frame, &DyadicGrid::default()).unwrap();
        for &(_, g) in &profile.entries {
            assert!((g - 1.0).abs() < 1e-9);
        }
        let fit = fit_expansion(&profile, &tols());
        assert!(fit.lambda.abs() < 0.02, "lambda = {}", fit.lambda);
        assert_eq!(fit.verdict, Verdict::Flat);
    }

    #[test]
    fn quartic_profile_quarter_exponent() {
        let q = ConvexBody::quartic_graph(2.0, 1.1);
        let x = vecd(&[0.0, 0.0]);
        let p = vecd(&[1.0, 0.0]);
        let frame = Frame::line(ScalarField::Real, &vecd(&[0.0, 1.0])).unwrap();
        let profile =
            expansion_profile(&q, &tols(), &x, &p, &frame, &DyadicGrid::default()).unwrap();
        for &(t, g) in &profile.entries {
            assert!((g - t.powf(0.25)).abs() < 1e-6, "t={t}: g={g}");
        }
        let fit = fit_expansion(&profile, &tols());
        assert!(
            fit.lambda > 0.23 && fit.lambda < 0.27,
            "lambda = {}",
            fit.lambda
        );
    }

    #[test]
    fn fit_recovers_exact_power_law() {
        // synthetic profile g = c t^mu
        let frame = Frame::line(ScalarField::Real, &vecd(&[0.0, 1.0])).unwrap();
        let entries: Vec<(f64, f64)> = DyadicGrid::default()
            .values()
            .into_iter()
            .map(|t| (t, 0.7 * t.powf(0.37)))
            .collect();
        let profile = ExpansionProfile {
            boundary_point: vecd(&[-1.0, 0.0]),
            interior_point: vecd(&[0.0, 0.0]),
            frame,
            entries,
            rejected: vec![],
        };
        let fit = fit_expansion(&profile, &tols());
        assert!((fit.lambda - 0.37).abs() < 1e-6);
        assert!(fit.residual_rms < 1e-9);
        assert!((fit.c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_needs_four_points() {
        let frame = Frame::line(ScalarField::Real, &vecd(&[0.0, 1.0])).unwrap();
        let profile = ExpansionProfile {
            boundary_point: vecd(&[-1.0, 0.0]),
            interior_point: vecd(&[0.0, 0.0]),
            frame,
            entries: vec![(0.1, 0.3), (0.2, 0.4), (0.4, 0.55)],
            rejected: vec![],
        };
        assert_eq!(
            fit_expansion(&profile, &tols()).verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn four_point_tree_is_zero() {
        // path metric on a star tree with center 0 and leaves 1, 2, 3
        // (edge lengths 1, 2, 3)
        let lengths = [1.0, 2.0, 3.0];
        let mut m = DMatrix::zeros(4, 4);
        for i in 1..4 {
            m[(0, i)] = lengths[i - 1];
            m[(i, 0)] = lengths[i - 1];
            for j in 1..4 {
                if i != j {
                    m[(i, j)] = lengths[i - 1] + lengths[j - 1];
                }
            }
        }
        let d = four_point_delta(&m, 1).unwrap();
        assert!(d.abs() < 1e-12, "tree delta = {d}");
    }

    #[test]
    fn four_point_invariances() {
        // random-ish small metric from points on a circle with chord distances
        let pts: Vec<(f64, f64)> = (0..7)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / 7.0;
                (0.8 * th.cos(), 0.8 * th.sin())
            })
            .collect();
        let dist =
            |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        let m = linalg::symmetric_matrix(7, |i, j| dist(pts[i], pts[j]));
        let d0 = four_point_delta(&m, 1).unwrap();
        // duplicating a sample point leaves the estimate unchanged
        let mut pts2 = pts.clone();
        pts2.push(pts[3]);
        let m2 = linalg::symmetric_matrix(8, |i, j| dist(pts2[i], pts2[j]));
        let d1 = four_point_delta(&m2, 1).unwrap();
        assert!((d0 - d1).abs() < 1e-12);
        // permutation invariance
        let perm = [4usize, 2, 6, 0, 3, 1, 5];
        let m3 = linalg::symmetric_matrix(7, |i, j| dist(pts[perm[i]], pts[perm[j]]));
        let d2 = four_point_delta(&m3, 1).unwrap();
        assert!((d0 - d2).abs() < 1e-12);
    }

    #[test]
    fn four_point_rejects_asymmetric() {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 2.0;
        assert!(four_point_delta(&m, 1).is_err());
    }

    #[test]
    fn audit_finds_cube_flats_and_ball_expansion() {
        let t = tols();
        let cube = ConvexBody::cube(3, 1.0);
        let audit = expansion_audit(&cube, &t, 1, 12, 2, &DyadicGrid::default(), 5).unwrap();
        assert!(audit.flat_count > 0, "cube should show flat witnesses");
        assert_eq!(audit.verdict, "flat witnesses found");

        let ball = ConvexBody::unit_ball(3);
        let audit = expansion_audit(&ball, &t, 1, 12, 2, &DyadicGrid::default(), 5).unwrap();
        assert_eq!(audit.verdict, "expansion holds (empirical)");
        assert!(
            (audit.min_lambda - 0.5).abs() < 0.05,
            "min lambda = {}",
            audit.min_lambda
        );
    }

    #[test]
    fn witness_square_growth_and_degeneracies() {
        let t = tols();
        let sq = ConvexBody::cube(2, 1.0);
        let x = vecd(&[0.0, -1.0]);
        let frame = Frame::line(ScalarField::Real, &vecd(&[1.0, 0.0])).unwrap();
        let mut prev = 0.0;
        for ba in [2.0, 4.0, 6.0] {
            let rep = nonhyperbolicity_witness(
                &sq,
                &t,
                (&x, &frame),
                WitnessParams {
                    a: 1.0,
                    b: 1.0 + ba,
                    n: 8,
                },
            )
            .unwrap();
            assert!(!rep.collapsed, "flat face must not collapse");
            assert!(
                rep.growth > prev,
                "growth must increase: {} after {prev}",
                rep.growth
            );
            prev = rep.growth;
        }
        // n = 2 is rejected
        assert!(nonhyperbolicity_witness(
            &sq,
            &t,
            (&x, &frame),
            WitnessParams {
                a: 1.0,
                b: 3.0,
                n: 2
            }
        )
        .is_err());
    }

    #[test]
    fn witness_disk_gap_stays_bounded() {
        let t = tols();
        let disk = ConvexBody::unit_ball(2);
        let x = vecd(&[-1.0, 0.0]);
        let frame = Frame::line(ScalarField::Real, &vecd(&[0.0, 1.0])).unwrap();
        let mut gaps = Vec::new();
        for ba in [2.0, 4.0, 6.0] {
            let rep = nonhyperbolicity_witness(
                &disk,
                &t,
                (&x, &frame),
                WitnessParams {
                    a: 1.0,
                    b: 1.0 + ba,
                    n: 8,
                },
            )
            .unwrap();
            assert!(rep.collapsed, "round slices must collapse");
            gaps.push(rep.gap);
        }
        let max = gaps.iter().cloned().fold(f64::MIN, f64::max);
        let min = gaps.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max <= 2.0 * min, "disk gaps {gaps:?} not within 2x");
    }
}
