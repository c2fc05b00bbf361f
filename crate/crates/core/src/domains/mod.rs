//! Convex domains with exact or bisection-based geometric oracles.
//!
//! A [`ConvexBody`] carries a shape variant, an interior base point, and a
//! scalar field tag. All other modules consume only the oracles defined here:
//! membership, ray-boundary intersection, Euclidean boundary distance,
//! directional (line) distance, and plane-slice distance over a [`Frame`].
//!
//! Closed forms are used wherever the variant admits one (polytopes,
//! ellipsoids, p-balls with p in {1, 2, inf}, the half-space); everything
//! else runs a high-precision bisection on the membership oracle.

mod spec;

pub use spec::{body_from_json, body_from_json_str};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::linalg;

/// Scalar field of the ambient space. For `Complex`, the ambient real
/// dimension is `2d` and the complex structure J maps coordinate pairs
/// `(x_i, y_i) -> (-y_i, x_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarField {
    Real,
    Complex,
}

impl ScalarField {
    /// Real dimensions per K-dimension (1 or 2).
    pub fn real_dim_factor(self) -> usize {
        match self {
            ScalarField::Real => 1,
            ScalarField::Complex => 2,
        }
    }

    /// Apply the complex structure J. Errors on real fields and odd lengths.
    pub fn complex_structure(self, v: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            ScalarField::Real => Err(Error::Unsupported(
                "complex structure requested on a real field".into(),
            )),
            ScalarField::Complex => {
                if !v.len().is_multiple_of(2) {
                    return Err(Error::DimensionMismatch {
                        expected: v.len() + 1,
                        got: v.len(),
                    });
                }
                let mut out = DVector::zeros(v.len());
                for i in 0..v.len() / 2 {
                    out[2 * i] = -v[2 * i + 1];
                    out[2 * i + 1] = v[2 * i];
                }
                Ok(out)
            }
        }
    }
}

/// Closed half-space constraint `normal . x < offset`.
#[derive(Clone, Debug)]
pub struct Halfspace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

/// Exponent of a p-ball; `Infinity` is the sup-norm box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PExponent {
    Finite(f64),
    Infinity,
}

type SublevelFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum BodyShape {
    /// Intersection of half-spaces `a_i . x < b_i`.
    Polytope { halfspaces: Vec<Halfspace> },
    /// `{x : (x-c)^T A (x-c) < 1}` with `A` symmetric positive definite.
    Ellipsoid {
        center: DVector<f64>,
        shape: DMatrix<f64>,
    },
    /// `{x : ||x - c||_p < scale}`.
    PBall {
        exponent: PExponent,
        scale: f64,
        center: DVector<f64>,
    },
    /// `{x : g(x) < 0}` with convex `g`; `bounding_radius` is a radius around
    /// the base point certified by the caller to contain the body.
    Sublevel { g: SublevelFn, bounding_radius: f64 },
    /// `{x : x_1 > 0}`. Unbounded; accepted only by closed-form operations.
    HalfSpace,
}

impl std::fmt::Debug for BodyShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BodyShape::Polytope { halfspaces } => {
                write!(f, "Polytope({} halfspaces)", halfspaces.len())
            }
            BodyShape::Ellipsoid { .. } => write!(f, "Ellipsoid"),
            BodyShape::PBall {
                exponent, scale, ..
            } => {
                write!(f, "PBall(p={exponent:?}, scale={scale})")
            }
            BodyShape::Sublevel {
                bounding_radius, ..
            } => {
                write!(f, "Sublevel(R={bounding_radius})")
            }
            BodyShape::HalfSpace => write!(f, "HalfSpace"),
        }
    }
}

/// Ray from an interior origin along a unit direction.
#[derive(Clone, Debug)]
pub struct Ray {
    pub origin: DVector<f64>,
    pub direction: DVector<f64>,
}

impl Ray {
    pub fn new(origin: DVector<f64>, direction: DVector<f64>) -> Result<Ray> {
        let n = direction.norm();
        if n == 0.0 {
            return Err(Error::ZeroDirection);
        }
        if (n - 1.0).abs() > 1e-12 {
            return Ok(Ray {
                origin,
                direction: direction / n,
            });
        }
        Ok(Ray { origin, direction })
    }
}

/// Result of a plane-slice distance query: the minimal boundary distance
/// within the slice and a direction achieving it.
#[derive(Clone, Debug)]
pub struct SliceHit {
    pub value: f64,
    pub direction: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct ConvexBody {
    shape: BodyShape,
    base_point: DVector<f64>,
    field: ScalarField,
    /// Ambient dimension over K.
    kdim: usize,
    bounded: bool,
    /// Cached scale (diameter bound) used for relative tolerances.
    scale: f64,
}

const BISECT_ITER_CAP: usize = 200;

impl ConvexBody {
    // ------------------------------------------------------------------
    // Constructors
    // ------------------------------------------------------------------

    pub fn polytope(
        halfspaces: Vec<Halfspace>,
        base_point: DVector<f64>,
        field: ScalarField,
    ) -> Result<ConvexBody> {
        if halfspaces.is_empty() {
            return Err(Error::InvalidBody(
                "polytope needs at least one halfspace".into(),
            ));
        }
        let dim = base_point.len();
        for hs in &halfspaces {
            if hs.normal.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: hs.normal.len(),
                });
            }
            if hs.normal.norm() < 1e-14 {
                return Err(Error::InvalidBody(
                    "polytope halfspace normal is zero".into(),
                ));
            }
        }
        Self::finish(BodyShape::Polytope { halfspaces }, base_point, field, true)
    }

    pub fn ellipsoid(
        center: DVector<f64>,
        shape: DMatrix<f64>,
        base_point: DVector<f64>,
        field: ScalarField,
    ) -> Result<ConvexBody> {
        let dim = center.len();
        if shape.nrows() != dim || shape.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: shape.nrows(),
            });
        }
        if (&shape - shape.transpose()).norm() > 1e-10 * (1.0 + shape.norm()) {
            return Err(Error::InvalidBody(
                "ellipsoid shape matrix is not symmetric".into(),
            ));
        }
        let eig = shape.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidBody(
                "ellipsoid shape matrix is not positive definite".into(),
            ));
        }
        Self::finish(
            BodyShape::Ellipsoid { center, shape },
            base_point,
            field,
            true,
        )
    }

    pub fn pball(
        exponent: PExponent,
        scale: f64,
        center: DVector<f64>,
        base_point: DVector<f64>,
        field: ScalarField,
    ) -> Result<ConvexBody> {
        if let PExponent::Finite(p) = exponent {
            // also rejects NaN
            if p.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) && p != 1.0 {
                return Err(Error::InvalidBody(format!("p-ball exponent {p} < 1")));
            }
        }
        if scale.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidBody("p-ball scale must be positive".into()));
        }
        Self::finish(
            BodyShape::PBall {
                exponent,
                scale,
                center,
            },
            base_point,
            field,
            true,
        )
    }

    /// Sublevel-set body `{g < 0}`. The caller must supply a bounding radius
    /// around the base point; bisection needs an outside point.
    pub fn sublevel(
        g: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        bounding_radius: f64,
        base_point: DVector<f64>,
        field: ScalarField,
    ) -> Result<ConvexBody> {
        if bounding_radius.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidBody(
                "sublevel body needs a positive bounding radius".into(),
            ));
        }
        Self::finish(
            BodyShape::Sublevel {
                g: Arc::new(g),
                bounding_radius,
            },
            base_point,
            field,
            true,
        )
    }

    /// The unbounded model half-space `{x_1 > 0}`.
    pub fn half_space(
        kdim: usize,
        field: ScalarField,
        base_point: DVector<f64>,
    ) -> Result<ConvexBody> {
        let real_dim = kdim * field.real_dim_factor();
        if base_point.len() != real_dim {
            return Err(Error::DimensionMismatch {
                expected: real_dim,
                got: base_point.len(),
            });
        }
        if base_point[0] <= 0.0 {
            return Err(Error::NotInterior);
        }
        let scale = 2.0 * (1.0 + base_point.norm());
        Ok(ConvexBody {
            shape: BodyShape::HalfSpace,
            base_point,
            field,
            kdim,
            bounded: false,
            scale,
        })
    }

    /// Euclidean unit ball in `R^d` centered at the origin.
    pub fn unit_ball(dim: usize) -> ConvexBody {
        ConvexBody::pball(
            PExponent::Finite(2.0),
            1.0,
            DVector::zeros(dim),
            DVector::zeros(dim),
            ScalarField::Real,
        )
        .expect("unit ball construction")
    }

    /// Axis-aligned cube `(-h, h)^d` centered at the origin.
    pub fn cube(dim: usize, half_width: f64) -> ConvexBody {
        ConvexBody::pball(
            PExponent::Infinity,
            half_width,
            DVector::zeros(dim),
            DVector::zeros(dim),
            ScalarField::Real,
        )
        .expect("cube construction")
    }

    /// Graph-type quartic fixture `{(x, y) : y^4 < x < x_max, |y| < y_max}`.
    pub fn quartic_graph(x_max: f64, y_max: f64) -> ConvexBody {
        let base = DVector::from_vec(vec![x_max / 2.0, 0.0]);
        let r = 2.0 * (x_max + y_max);
        ConvexBody::sublevel(
            move |z: &DVector<f64>| {
                let (x, y) = (z[0], z[1]);
                (y.powi(4) - x).max(x - x_max).max(y.abs() - y_max)
            },
            r,
            base,
            ScalarField::Real,
        )
        .expect("quartic fixture")
    }

    fn finish(
        shape: BodyShape,
        base_point: DVector<f64>,
        field: ScalarField,
        bounded: bool,
    ) -> Result<ConvexBody> {
        let real_dim = base_point.len();
        if real_dim == 0 || !real_dim.is_multiple_of(field.real_dim_factor()) {
            return Err(Error::InvalidBody(format!(
                "real dimension {real_dim} incompatible with field"
            )));
        }
        let kdim = real_dim / field.real_dim_factor();
        let mut body = ConvexBody {
            shape,
            base_point,
            field,
            kdim,
            bounded,
            scale: 1.0,
        };
        if !body.contains(&body.base_point.clone())? {
            return Err(Error::InvalidBody(
                "base point is not strictly interior".into(),
            ));
        }
        body.scale = body.compute_scale();
        Ok(body)
    }

    fn compute_scale(&self) -> f64 {
        let r = match &self.shape {
            BodyShape::Polytope { .. } => {
                // Bounding estimate from sampled ray hits; used only for
                // relative tolerances, with a safety factor.
                let dirs =
                    linalg::unit_sphere_samples(self.real_dim(), 64.max(4 * self.real_dim()), 11);
                let mut r: f64 = 0.0;
                for u in dirs {
                    if let Ok(t) = self.ray_hit_closed(&self.base_point, &u) {
                        if t.is_finite() {
                            r = r.max(t);
                        }
                    }
                }
                1.5 * r
            }
            BodyShape::Ellipsoid { center, shape } => {
                let eig = shape.clone().symmetric_eigen();
                let lmin = eig
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                (center - &self.base_point).norm() + 1.0 / lmin.sqrt()
            }
            BodyShape::PBall { scale, center, .. } => {
                (center - &self.base_point).norm() + scale * (self.real_dim() as f64).sqrt()
            }
            BodyShape::Sublevel {
                bounding_radius, ..
            } => *bounding_radius,
            BodyShape::HalfSpace => 1.0 + self.base_point.norm(),
        };
        2.0 * r.max(1e-9)
    }

    // ------------------------------------------------------------------
    // Accessors
    // ------------------------------------------------------------------

    pub fn shape(&self) -> &BodyShape {
        &self.shape
    }

    pub fn base_point(&self) -> &DVector<f64> {
        &self.base_point
    }

    pub fn field(&self) -> ScalarField {
        self.field
    }

    /// Ambient dimension over K.
    pub fn dim_k(&self) -> usize {
        self.kdim
    }

    /// Ambient real dimension.
    pub fn real_dim(&self) -> usize {
        self.base_point.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    /// Diameter bound used for relative tolerances.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn require_bounded(&self) -> Result<()> {
        if self.bounded {
            Ok(())
        } else {
            Err(Error::Unbounded)
        }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.real_dim() {
            Err(Error::DimensionMismatch {
                expected: self.real_dim(),
                got: x.len(),
            })
        } else {
            Ok(())
        }
    }

    // ------------------------------------------------------------------
    // Membership
    // ------------------------------------------------------------------

    /// Strict interior membership.
    pub fn contains(&self, x: &DVector<f64>) -> Result<bool> {
        self.check_dim(x)?;
        Ok(match &self.shape {
            BodyShape::Polytope { halfspaces } => {
                halfspaces.iter().all(|hs| hs.normal.dot(x) < hs.offset)
            }
            BodyShape::Ellipsoid { center, shape } => {
                let z = x - center;
                (shape * &z).dot(&z) < 1.0
            }
            BodyShape::PBall {
                exponent,
                scale,
                center,
            } => {
                let z = x - center;
                p_norm(&z, *exponent) < *scale
            }
            BodyShape::Sublevel { g, .. } => g(x) < 0.0,
            BodyShape::HalfSpace => x[0] > 0.0,
        })
    }

    fn require_interior(&self, x: &DVector<f64>) -> Result<()> {
        if self.contains(x)? {
            Ok(())
        } else {
            Err(Error::NotInterior)
        }
    }

    // ------------------------------------------------------------------
    // Ray-boundary intersection
    // ------------------------------------------------------------------

    /// `sup{t > 0 : origin + t u ∈ Ω}`. Returns `+∞` only on the half-space.
    pub fn ray_hit(&self, ray: &Ray) -> Result<f64> {
        self.check_dim(&ray.origin)?;
        self.require_interior(&ray.origin)?;
        self.ray_hit_unchecked(&ray.origin, &ray.direction)
    }

    /// Ray hit without the interiority re-check; `u` must be unit.
    pub(crate) fn ray_hit_unchecked(&self, p: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        match &self.shape {
            BodyShape::PBall {
                exponent: PExponent::Finite(pe),
                scale,
                center,
            } if *pe != 1.0 && *pe != 2.0 => {
                let s = *scale;
                let c = center.clone();
                let pe = *pe;
                self.bisect_ray(p, u, move |x| p_norm(&(x - &c), PExponent::Finite(pe)) - s)
            }
            BodyShape::Sublevel { g, .. } => {
                let g = g.clone();
                self.bisect_ray(p, u, move |x| g(x))
            }
            _ => self.ray_hit_closed(p, u),
        }
    }

    fn ray_hit_closed(&self, p: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        match &self.shape {
            BodyShape::Polytope { halfspaces } => {
                let mut best = f64::INFINITY;
                for hs in halfspaces {
                    let denom = hs.normal.dot(u);
                    if denom > 0.0 {
                        best = best.min((hs.offset - hs.normal.dot(p)) / denom);
                    }
                }
                if best.is_finite() {
                    Ok(best)
                } else {
                    Err(Error::InvalidBody(
                        "polytope is unbounded along a ray".into(),
                    ))
                }
            }
            BodyShape::Ellipsoid { center, shape } => {
                let z = p - center;
                let au = shape * u;
                let alpha = au.dot(u);
                let beta = au.dot(&z);
                let gamma = (shape * &z).dot(&z) - 1.0;
                // alpha > 0 (positive definite); gamma < 0 (interior).
                let disc = beta * beta - alpha * gamma;
                Ok((-beta + disc.sqrt()) / alpha)
            }
            BodyShape::PBall {
                exponent,
                scale,
                center,
            } => match exponent {
                PExponent::Finite(pe) if *pe == 2.0 => {
                    let z = p - center;
                    let beta = u.dot(&z);
                    let gamma = z.dot(&z) - scale * scale;
                    let disc = beta * beta - gamma;
                    Ok(-beta + disc.sqrt())
                }
                PExponent::Finite(pe) if *pe == 1.0 => Ok(l1_ray_hit(&(p - center), u, *scale)),
                PExponent::Infinity => {
                    let mut best = f64::INFINITY;
                    for i in 0..p.len() {
                        let zi = p[i] - center[i];
                        if u[i] > 0.0 {
                            best = best.min((scale - zi) / u[i]);
                        } else if u[i] < 0.0 {
                            best = best.min((-scale - zi) / u[i]);
                        }
                    }
                    Ok(best)
                }
                PExponent::Finite(_) => unreachable!("general p handled by bisection"),
            },
            BodyShape::Sublevel { .. } => unreachable!("sublevel handled by bisection"),
            BodyShape::HalfSpace => {
                if u[0] < 0.0 {
                    Ok(p[0] / (-u[0]))
                } else {
                    Ok(f64::INFINITY)
                }
            }
        }
    }

    fn bisect_ray(
        &self,
        p: &DVector<f64>,
        u: &DVector<f64>,
        outside_fn: impl Fn(&DVector<f64>) -> f64,
    ) -> Result<f64> {
        let r_out = match &self.shape {
            BodyShape::Sublevel {
                bounding_radius, ..
            } => (p - &self.base_point).norm() + bounding_radius + 1.0,
            _ => self.scale + 1.0,
        };
        let eval = |t: f64| outside_fn(&(p + u * t));
        if eval(r_out) < 0.0 {
            return Err(Error::InvalidBody(
                "membership oracle still inside at the declared bounding radius".into(),
            ));
        }
        let (mut lo, mut hi) = (0.0_f64, r_out);
        for _ in 0..BISECT_ITER_CAP {
            let mid = 0.5 * (lo + hi);
            if eval(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= (1e-13 * self.scale).max(1e-12 * lo) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    // ------------------------------------------------------------------
    // Boundary distance
    // ------------------------------------------------------------------

    /// Euclidean distance from an interior point to the boundary.
    pub fn boundary_distance(&self, p: &DVector<f64>) -> Result<f64> {
        Ok(self.boundary_distance_bracket(p)?.1)
    }

    /// Boundary distance with a two-sided bracket `(lower, value)`.
    /// Closed-form variants return a degenerate bracket.
    pub fn boundary_distance_bracket(&self, p: &DVector<f64>) -> Result<(f64, f64)> {
        self.check_dim(p)?;
        self.require_interior(p)?;
        match &self.shape {
            BodyShape::Polytope { halfspaces } => {
                let d = halfspaces
                    .iter()
                    .map(|hs| (hs.offset - hs.normal.dot(p)) / hs.normal.norm())
                    .fold(f64::INFINITY, f64::min);
                Ok((d, d))
            }
            BodyShape::Ellipsoid { center, shape } => {
                let d = ellipsoid_boundary_distance(p, center, shape);
                Ok((d, d))
            }
            BodyShape::PBall {
                exponent,
                scale,
                center,
            } => {
                let z = p - center;
                match exponent {
                    PExponent::Finite(pe) if *pe == 2.0 => {
                        let d = scale - z.norm();
                        Ok((d, d))
                    }
                    PExponent::Finite(pe) if *pe == 1.0 => {
                        let d = (scale - z.abs().sum()) / (p.len() as f64).sqrt();
                        Ok((d, d))
                    }
                    PExponent::Infinity => {
                        let d = z
                            .iter()
                            .map(|v| scale - v.abs())
                            .fold(f64::INFINITY, f64::min);
                        Ok((d, d))
                    }
                    PExponent::Finite(_) => self.boundary_distance_sampled(p),
                }
            }
            BodyShape::Sublevel { .. } => self.boundary_distance_sampled(p),
            BodyShape::HalfSpace => Ok((p[0], p[0])),
        }
    }

    /// General variant: minimize ray hits over a deterministic direction net,
    /// refine locally, and certify a lower bound from the net resolution (the
    /// convex hull of the sampled hit points contains a ball of radius
    /// `min_hit * cos(phi)`).
    fn boundary_distance_sampled(&self, p: &DVector<f64>) -> Result<(f64, f64)> {
        let dim = self.real_dim();
        let n = 256 * dim.max(2);
        let dirs = linalg::unit_sphere_samples(dim, n, 23);
        let mut best = f64::INFINITY;
        let mut best_dir = dirs[0].clone();
        for u in &dirs {
            let t = self.ray_hit_unchecked(p, u)?;
            if t < best {
                best = t;
                best_dir = u.clone();
            }
        }
        let net_min = best;
        let refined = self.refine_direction_min(p, &best_dir, best, 4)?;
        let phi = net_resolution(dim, n);
        Ok(((net_min * phi.cos()).min(refined.0), refined.0))
    }

    /// Local descent of `u -> ray_hit(p, u)` on the sphere by golden-section
    /// rotations toward complement directions. Returns `(value, direction)`.
    fn refine_direction_min(
        &self,
        p: &DVector<f64>,
        u0: &DVector<f64>,
        v0: f64,
        rounds: usize,
    ) -> Result<(f64, DVector<f64>)> {
        let mut u = u0.clone();
        let mut val = v0;
        let dim = self.real_dim();
        let mut width = net_resolution(dim, 256 * dim.max(2)) * 2.0;
        for _ in 0..rounds {
            let complement = linalg::orthogonal_complement(&[u.clone()], dim);
            for w in &complement {
                let objective = |theta: f64| -> f64 {
                    let dir = (&u * theta.cos()) + w * theta.sin();
                    self.ray_hit_unchecked(p, &dir.normalize())
                        .unwrap_or(f64::INFINITY)
                };
                let (theta, fv) = linalg::golden_section_min(-width, width, 40, objective);
                if fv < val {
                    val = fv;
                    u = ((&u * theta.cos()) + w * theta.sin()).normalize();
                }
            }
            width *= 0.5;
        }
        Ok((val, u))
    }

    // ------------------------------------------------------------------
    // Line distance
    // ------------------------------------------------------------------

    /// `δ(p; v) = dist(p, (p + K·v) ∩ ∂Ω)`.
    pub fn line_distance(&self, p: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        self.check_dim(p)?;
        self.check_dim(v)?;
        if v.norm() == 0.0 {
            return Err(Error::ZeroDirection);
        }
        self.require_interior(p)?;
        let u = v.normalize();
        match self.field {
            ScalarField::Real => self.real_line_distance(p, &u),
            ScalarField::Complex => {
                let ju = self.field.complex_structure(&u)?;
                let eval = |theta: f64| -> f64 {
                    let w = (&u * theta.cos()) + &ju * theta.sin();
                    self.real_line_distance(p, &w.normalize())
                        .unwrap_or(f64::INFINITY)
                };
                let grid = 64;
                let mut best = f64::INFINITY;
                let mut best_theta = 0.0;
                for i in 0..grid {
                    let theta = std::f64::consts::PI * (i as f64) / (grid as f64);
                    let val = eval(theta);
                    if val < best {
                        best = val;
                        best_theta = theta;
                    }
                }
                let h = std::f64::consts::PI / grid as f64;
                let (_, refined) =
                    linalg::golden_section_min(best_theta - h, best_theta + h, 50, eval);
                Ok(refined.min(best))
            }
        }
    }

    fn real_line_distance(&self, p: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        let fwd = self.ray_hit_unchecked(p, u)?;
        let bwd = self.ray_hit_unchecked(p, &(-u))?;
        Ok(fwd.min(bwd))
    }

    // ------------------------------------------------------------------
    // Plane-slice distance
    // ------------------------------------------------------------------

    /// `dist(p, (p + span V) ∩ ∂Ω)`: minimum ray hit over unit vectors of the
    /// span, via a deterministic low-discrepancy net plus local descent.
    pub fn plane_slice_distance(&self, p: &DVector<f64>, frame: &Frame) -> Result<SliceHit> {
        self.check_dim(p)?;
        if frame.ambient_real_dim() != self.real_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.real_dim(),
                got: frame.ambient_real_dim(),
            });
        }
        self.require_interior(p)?;
        let m = frame.dim_real();
        if m == self.real_dim() {
            // Whole-space slice: the boundary distance, achieved radially.
            let (_, d) = self.boundary_distance_bracket(p)?;
            let dir = frame.columns()[0].clone();
            return Ok(SliceHit {
                value: d,
                direction: dir,
            });
        }
        let n = 256 * frame.dim_k();
        let samples = frame.span_sphere_samples(n);
        let mut best = f64::INFINITY;
        let mut best_dir: Option<DVector<f64>> = None;
        for w in &samples {
            let t = self.ray_hit_unchecked(p, w)?;
            if t < best {
                best = t;
                best_dir = Some(w.clone());
            }
        }
        let Some(dir0) = best_dir else {
            // Every sample escaped to infinity (half-space slices parallel to
            // the boundary).
            return Ok(SliceHit {
                value: f64::INFINITY,
                direction: samples[0].clone(),
            });
        };
        if !best.is_finite() {
            return Ok(SliceHit {
                value: f64::INFINITY,
                direction: dir0,
            });
        }
        let (value, direction) = self.refine_in_span(p, frame, &dir0, best)?;
        Ok(SliceHit { value, direction })
    }

    fn refine_in_span(
        &self,
        p: &DVector<f64>,
        frame: &Frame,
        u0: &DVector<f64>,
        v0: f64,
    ) -> Result<(f64, DVector<f64>)> {
        let m = frame.dim_real();
        if m == 1 {
            return Ok((v0, u0.clone()));
        }
        let mut u = u0.clone();
        let mut val = v0;
        let mut width = net_resolution(m, 256 * frame.dim_k()) * 2.0;
        for _ in 0..4 {
            // In-span complement of u.
            let mut basis = vec![u.clone()];
            let mut dirs = Vec::new();
            for c in frame.columns() {
                if let Some(w) = linalg::orthonormal_complement_step(c, &basis) {
                    basis.push(w.clone());
                    dirs.push(w);
                }
            }
            for w in &dirs {
                let objective = |theta: f64| -> f64 {
                    let dir = ((&u * theta.cos()) + w * theta.sin()).normalize();
                    self.ray_hit_unchecked(p, &dir).unwrap_or(f64::INFINITY)
                };
                let (theta, fv) = linalg::golden_section_min(-width, width, 40, objective);
                if fv < val {
                    val = fv;
                    u = ((&u * theta.cos()) + w * theta.sin()).normalize();
                }
            }
            width *= 0.5;
        }
        Ok((val, u))
    }

    // ------------------------------------------------------------------
    // Boundary structure helpers
    // ------------------------------------------------------------------

    /// Boundary point hit by the ray from the base point along `u`.
    pub fn boundary_point(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let un = u.normalize();
        let t = self.ray_hit_unchecked(&self.base_point, &un)?;
        if !t.is_finite() {
            return Err(Error::Unbounded);
        }
        Ok(&self.base_point + un * t)
    }

    /// Residual of the claim "x is on the boundary" (0 on the boundary,
    /// positive otherwise), measured along the base ray through x.
    pub fn boundary_residual(&self, x: &DVector<f64>) -> Result<f64> {
        let dir = x - &self.base_point;
        let n = dir.norm();
        if n == 0.0 {
            return Ok(f64::INFINITY);
        }
        let t = self.ray_hit_unchecked(&self.base_point, &(dir.clone() / n))?;
        if !t.is_finite() {
            return Ok(f64::INFINITY);
        }
        Ok((t - n).abs() / self.scale)
    }

    /// Sampled midpoint-convexity diagnostic for user-supplied sublevel
    /// oracles: counts sampled interior pairs whose midpoint escapes. The
    /// closed-form variants are convex by construction and report zero.
    /// Nothing is rejected; violations are reported for the caller to judge.
    pub fn convexity_violations(&self, samples: usize, seed: u64) -> Result<usize> {
        if !matches!(self.shape, BodyShape::Sublevel { .. }) {
            return Ok(0);
        }
        let mut rng = linalg::stream_rng(seed, 17);
        let dim = self.real_dim();
        let radius = 0.5 * self.scale;
        let mut violations = 0;
        let mut found = 0;
        let mut attempts = 0;
        while found < samples && attempts < 200 * samples {
            attempts += 1;
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                &self.base_point
                    + linalg::random_unit_vector(dim, rng) * (radius * rand::Rng::gen::<f64>(rng))
            };
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            if !(self.contains(&a)? && self.contains(&b)?) {
                continue;
            }
            found += 1;
            if !self.contains(&((&a + &b) * 0.5))? {
                violations += 1;
            }
        }
        Ok(violations)
    }

    /// Outward unit normals of supporting hyperplanes at a boundary point.
    /// Polytopes enumerate all active faces; smooth variants return the
    /// gradient normal; the sup-norm box enumerates active coordinates.
    pub fn supporting_normals_at(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        self.check_dim(x)?;
        let tol = 1e-7 * self.scale;
        let mut normals: Vec<DVector<f64>> = Vec::new();
        match &self.shape {
            BodyShape::Polytope { halfspaces } => {
                for hs in halfspaces {
                    let slack = hs.offset - hs.normal.dot(x);
                    if slack.abs() <= tol * hs.normal.norm() {
                        normals.push(hs.normal.normalize());
                    }
                }
            }
            BodyShape::Ellipsoid { center, shape } => {
                let g = shape * (x - center) * 2.0;
                normals.push(g.normalize());
            }
            BodyShape::PBall {
                exponent,
                scale,
                center,
            } => {
                let z = x - center;
                match exponent {
                    PExponent::Finite(pe) if *pe == 1.0 => {
                        // Active facets: sign choices on near-zero coordinates.
                        let mut zero_idx = Vec::new();
                        let mut sign = z.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
                        for i in 0..z.len() {
                            if z[i].abs() <= tol {
                                zero_idx.push(i);
                            }
                        }
                        let combos = 1usize << zero_idx.len().min(3);
                        for mask in 0..combos {
                            for (b, &i) in zero_idx.iter().enumerate().take(3) {
                                sign[i] = if mask & (1 << b) != 0 { 1.0 } else { -1.0 };
                            }
                            normals.push(sign.normalize());
                        }
                    }
                    PExponent::Finite(pe) => {
                        let g = DVector::from_fn(z.len(), |i, _| {
                            pe * z[i].abs().powf(pe - 1.0) * z[i].signum()
                        });
                        normals.push(g.normalize());
                    }
                    PExponent::Infinity => {
                        for i in 0..z.len() {
                            if (z[i].abs() - scale).abs() <= tol {
                                let mut e = DVector::zeros(z.len());
                                e[i] = z[i].signum();
                                normals.push(e);
                            }
                        }
                    }
                }
            }
            BodyShape::Sublevel { g, .. } => {
                let h = 1e-6 * self.scale;
                let mut grad = DVector::zeros(x.len());
                for i in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    grad[i] = (g(&xp) - g(&xm)) / (2.0 * h);
                }
                let n = grad.norm();
                if n < 1e-12 {
                    return Err(Error::Degenerate(
                        "vanishing subgradient at boundary point".into(),
                    ));
                }
                normals.push(grad / n);
            }
            BodyShape::HalfSpace => {
                let mut e = DVector::zeros(x.len());
                e[0] = -1.0;
                normals.push(e);
            }
        }
        if normals.is_empty() {
            return Err(Error::NotOnBoundary(self.boundary_residual(x)?));
        }
        Ok(normals)
    }
}

/// p-norm with the Infinity case.
fn p_norm(z: &DVector<f64>, exponent: PExponent) -> f64 {
    match exponent {
        PExponent::Finite(p) => {
            if p == 1.0 {
                z.abs().sum()
            } else if p == 2.0 {
                z.norm()
            } else {
                z.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
            }
        }
        PExponent::Infinity => z.abs().max(),
    }
}

/// Exact ray hit for the l1 ball: the map `t -> ||z + t u||_1` is piecewise
/// linear and convex; walk its breakpoints.
fn l1_ray_hit(z: &DVector<f64>, u: &DVector<f64>, scale: f64) -> f64 {
    let f = |t: f64| -> f64 { (0..z.len()).map(|i| (z[i] + t * u[i]).abs()).sum::<f64>() - scale };
    let mut breaks: Vec<f64> = (0..z.len())
        .filter(|&i| u[i] != 0.0)
        .map(|i| -z[i] / u[i])
        .filter(|&t| t > 0.0)
        .collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut prev = 0.0;
    let mut f_prev = f(0.0);
    for t in breaks.into_iter().chain(std::iter::once(f64::INFINITY)) {
        // Slope on this linear segment.
        let slope: f64 = (0..z.len())
            .map(|i| {
                let mid_sign = (z[i] + (prev + 1e-300) * u[i] + u[i] * 1e-12).signum();
                mid_sign * u[i]
            })
            .sum();
        if t.is_finite() {
            let f_t = f(t);
            if f_t >= 0.0 {
                return prev + (0.0 - f_prev) * (t - prev) / (f_t - f_prev);
            }
            prev = t;
            f_prev = f_t;
        } else {
            // Final unbounded segment: slope must be positive on a bounded body.
            return prev + (0.0 - f_prev) / slope;
        }
    }
    unreachable!()
}

/// Interior-point distance to an ellipsoid surface via the secular equation
/// in the eigenbasis, with the degenerate-axis branches included.
fn ellipsoid_boundary_distance(
    p: &DVector<f64>,
    center: &DVector<f64>,
    shape: &DMatrix<f64>,
) -> f64 {
    let eig = shape.clone().symmetric_eigen();
    // Semi-axes a_i = 1/sqrt(lambda_i); coordinates in the eigenbasis.
    let q = &eig.eigenvectors;
    let z = q.transpose() * (p - center);
    let a2: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / l).collect();
    let d = z.len();
    let eps = 1e-13 * a2.iter().cloned().fold(0.0, f64::max).sqrt();

    let mut best = f64::INFINITY;

    // Generic branch: solve h(mu) = sum z_i^2 a_i^2 / (a_i^2 - mu)^2 = 1 on
    // (0, min over active axes of a_i^2).
    let active: Vec<usize> = (0..d).filter(|&i| z[i].abs() > eps).collect();
    if !active.is_empty() {
        let mu_max = active.iter().map(|&i| a2[i]).fold(f64::INFINITY, f64::min);
        let h = |mu: f64| -> f64 {
            active
                .iter()
                .map(|&i| z[i] * z[i] * a2[i] / ((a2[i] - mu) * (a2[i] - mu)))
                .sum::<f64>()
        };
        if h(0.0) < 1.0 {
            let (mut lo, mut hi) = (0.0, mu_max * (1.0 - 1e-14));
            if h(hi) >= 1.0 {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if h(mid) < 1.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-16 * mu_max {
                        break;
                    }
                }
                let mu = 0.5 * (lo + hi);
                let dist2: f64 = active
                    .iter()
                    .map(|&i| (z[i] * mu / (a2[i] - mu)).powi(2))
                    .sum::<f64>();
                best = best.min(dist2.sqrt());
            }
        } else {
            // On or outside: distance 0 guard (callers require interior).
            best = 0.0;
        }
    }

    // Degenerate branches: mu = a_j^2 for axes with z_j ~ 0.
    for j in 0..d {
        if z[j].abs() > eps {
            continue;
        }
        let mu = a2[j];
        let mut sum = 0.0;
        let mut ok = true;
        let mut dist2 = 0.0;
        for &i in &active {
            if (a2[i] - mu).abs() < 1e-15 * a2[i] {
                ok = false;
                break;
            }
            let yi = z[i] * a2[i] / (a2[i] - mu);
            sum += yi * yi / a2[i];
            dist2 += (yi - z[i]) * (yi - z[i]);
        }
        if !ok || sum > 1.0 {
            continue;
        }
        let yj2 = a2[j] * (1.0 - sum);
        best = best.min((dist2 + yj2).sqrt());
    }
    best
}

/// Rough angular resolution of the deterministic sphere net; used to certify
/// lower bounds from sampled minima.
fn net_resolution(dim: usize, n: usize) -> f64 {
    match dim {
        1 => 0.0,
        2 => std::f64::consts::PI / n as f64,
        3 => 2.6 / (n as f64).sqrt(),
        _ => 2.0 * (1.0 / n as f64).powf(1.0 / (dim as f64 - 1.0)),
    }
}
