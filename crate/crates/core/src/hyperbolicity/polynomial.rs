//! Polynomial contact-order machinery: vanishing orders, the coefficient-sum
//! norm with its ball-max comparison bounds, and contact orders of graph
//! domains `{x > f(y)}`.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::config::Tolerances;
use crate::domains::{ConvexBody, ScalarField};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::linalg;

const COEFF_TOL: f64 = 1e-12;

/// Real polynomial in several variables, stored as a multi-index
/// coefficient map.
#[derive(Clone, Debug)]
pub struct PolynomialR {
    dim: usize,
    degree_bound: u32,
    coeffs: BTreeMap<Vec<u32>, f64>,
}

impl PolynomialR {
    pub fn new(
        dim: usize,
        terms: impl IntoIterator<Item = (Vec<u32>, f64)>,
    ) -> Result<PolynomialR> {
        let mut coeffs = BTreeMap::new();
        let mut degree_bound = 0;
        for (alpha, c) in terms {
            if alpha.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: alpha.len(),
                });
            }
            let deg: u32 = alpha.iter().sum();
            degree_bound = degree_bound.max(deg);
            *coeffs.entry(alpha).or_insert(0.0) += c;
        }
        coeffs.retain(|_, c| c.abs() > 0.0);
        Ok(PolynomialR {
            dim,
            degree_bound,
            coeffs,
        })
    }

    /// Parse from the fixture format `{"coeffs": {"(i,j)": value, ...}}`.
    pub fn from_json(dim: usize, value: &serde_json::Value) -> Result<PolynomialR> {
        let map = value
            .get("coeffs")
            .and_then(|v| v.as_object())
            .ok_or_else(|| Error::Parse("polynomial JSON needs a `coeffs` object".into()))?;
        let mut terms = Vec::new();
        for (key, val) in map {
            let inner = key.trim().trim_start_matches('(').trim_end_matches(')');
            let alpha: Vec<u32> = inner
                .split(',')
                .map(|s| s.trim().parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("bad multi-index `{key}`: {e}")))?;
            let c = val
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("non-numeric coefficient for `{key}`")))?;
            terms.push((alpha, c));
        }
        PolynomialR::new(dim, terms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.coeffs
            .keys()
            .map(|a| a.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn degree_bound(&self) -> u32 {
        self.degree_bound
    }

    /// `‖P‖ = Σ |c_α|`.
    pub fn norm_l1(&self) -> f64 {
        self.coeffs.values().map(|c| c.abs()).sum()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for (alpha, c) in &self.coeffs {
            let mut term = *c;
            for (i, &a) in alpha.iter().enumerate() {
                term *= x[i].powi(a as i32);
            }
            total += term;
        }
        total
    }

    pub fn eval_at(&self, x: &[f64]) -> f64 {
        self.eval(&DVector::from_vec(x.to_vec()))
    }

    pub fn constant_term(&self) -> f64 {
        self.coeffs.get(&vec![0; self.dim]).copied().unwrap_or(0.0)
    }

    /// Smallest total degree with a nonzero coefficient (tolerance 1e-12);
    /// `None` for the zero polynomial (order `+∞`).
    pub fn vanishing_order(&self) -> Option<u32> {
        self.coeffs
            .iter()
            .filter(|(_, c)| c.abs() > COEFF_TOL)
            .map(|(a, _)| a.iter().sum())
            .min()
    }

    /// Homogeneous part of total degree `m`, evaluated at `u`.
    pub fn homogeneous_part_at(&self, m: u32, u: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for (alpha, c) in &self.coeffs {
            if alpha.iter().sum::<u32>() == m {
                let mut term = *c;
                for (i, &a) in alpha.iter().enumerate() {
                    term *= u[i].powi(a as i32);
                }
                total += term;
            }
        }
        total
    }

    /// Order of vanishing of the restriction `t -> P(t u)` (`None` when the
    /// restriction vanishes identically): the smallest `m` with a nonzero
    /// homogeneous part at `u`.
    pub fn directional_order(&self, u: &DVector<f64>) -> Option<u32> {
        let scale = self.norm_l1().max(1.0);
        (0..=self.degree()).find(|&m| self.homogeneous_part_at(m, u).abs() > 1e-10 * scale)
    }

    /// Max |P| over the closed ball of radius `r`, by dense direction
    /// sampling, a radius grid, and golden-section polish.
    pub fn max_abs_on_ball(&self, r: f64) -> f64 {
        if r == 0.0 {
            return self.constant_term().abs();
        }
        let dirs = linalg::unit_sphere_samples(self.dim, 256 * self.dim, 97);
        let mut best = self.constant_term().abs();
        let mut best_dir: Option<DVector<f64>> = None;
        for u in &dirs {
            for i in 1..=32 {
                let t = r * (i as f64) / 32.0;
                let v = self.eval(&(u * t)).abs();
                if v > best {
                    best = v;
                    best_dir = Some(u.clone());
                }
            }
        }
        if let Some(u0) = best_dir {
            // polish the radius, then the direction
            let (_, neg) = linalg::golden_section_min(0.0, r, 50, |t| -self.eval(&(&u0 * t)).abs());
            best = best.max(-neg);
            let mut u = u0;
            let mut width = 0.3;
            for _ in 0..3 {
                for w in linalg::orthogonal_complement(&[u.clone()], self.dim) {
                    let obj = |theta: f64| -> f64 {
                        let dir = ((&u * theta.cos()) + &w * theta.sin()).normalize();
                        let (_, m) = linalg::golden_section_min(0.0, r, 35, |t| {
                            -self.eval(&(&dir * t)).abs()
                        });
                        m
                    };
                    let (theta, m) = linalg::golden_section_min(-width, width, 30, obj);
                    if -m > best {
                        best = -m;
                        u = ((&u * theta.cos()) + &w * theta.sin()).normalize();
                    }
                }
                width *= 0.5;
            }
        }
        best
    }
}

/// Instance report for the two comparison bounds
/// `A^{-1} (r/R)^L max_R ≤ max_r ≤ A (r/R) max_R` and
/// `A^{-1} r^L ‖P‖ ≤ max_r ≤ A r ‖P‖`: the smallest `A` making all four
/// inequalities hold for this polynomial.
#[derive(Clone, Debug, Serialize)]
pub struct PolyBoundsReport {
    pub max_on_r: f64,
    pub max_on_big_r: f64,
    pub norm: f64,
    pub required_a: f64,
}

pub fn polynomial_bounds_check(p: &PolynomialR, r: f64, big_r: f64) -> Result<PolyBoundsReport> {
    if p.constant_term().abs() > COEFF_TOL {
        return Err(Error::Precondition(
            "polynomial must vanish at the origin".into(),
        ));
    }
    if !(r > 0.0 && r <= big_r && big_r <= 1.0) {
        return Err(Error::Precondition("need 0 < r <= R <= 1".into()));
    }
    let l = p.degree().max(1) as f64;
    let max_r = p.max_abs_on_ball(r);
    let max_big = p.max_abs_on_ball(big_r);
    let norm = p.norm_l1();
    if max_r == 0.0 || max_big == 0.0 || norm == 0.0 {
        return Err(Error::Degenerate(
            "zero polynomial has no finite comparison constant".into(),
        ));
    }
    let ratio = r / big_r;
    let a1 = ratio.powf(l) * max_big / max_r; // lower side of bound (1)
    let a2 = max_r / (ratio * max_big); // upper side of bound (1)
    let a3 = r.powf(l) * norm / max_r; // lower side of bound (2)
    let a4 = max_r / (r * norm); // upper side of bound (2)
    let required_a = a1.max(a2).max(a3).max(a4).max(1.0);
    Ok(PolyBoundsReport {
        max_on_r: max_r,
        max_on_big_r: max_big,
        norm,
        required_a,
    })
}

/// Audit: max required constant over seeded random polynomials of bounded
/// degree with zero constant term, together with a deterministic stress set
/// of Chebyshev-type cancelling instances (empirical `A(d, L)`). The stress
/// set anchors the max: random coefficient draws almost never realize the
/// cancellation extremes.
pub fn polynomial_bounds_audit(
    dim: usize,
    degree: u32,
    n_polys: usize,
    r: f64,
    big_r: f64,
    seed: u64,
) -> Result<f64> {
    let mut worst: f64 = 1.0;
    for p in stress_polynomials(dim, degree, r)? {
        worst = worst.max(polynomial_bounds_check(&p, r, big_r)?.required_a);
    }
    for i in 0..n_polys {
        let mut rng = linalg::stream_rng(seed, i as u64);
        let mut terms = Vec::new();
        collect_multi_indices(dim, degree, &mut vec![0; dim], 0, &mut |alpha| {
            if alpha.iter().sum::<u32>() > 0 {
                terms.push((alpha.to_vec(), 2.0 * rng.gen::<f64>() - 1.0));
            }
        });
        let p = PolynomialR::new(dim, terms)?;
        worst = worst.max(polynomial_bounds_check(&p, r, big_r)?.required_a);
    }
    Ok(worst)
}

/// Chebyshev polynomials scaled to `[-r, r]` per axis (constant term
/// dropped), plus plain monomials: deterministic near-extremal instances for
/// the comparison constants.
fn stress_polynomials(dim: usize, degree: u32, r: f64) -> Result<Vec<PolynomialR>> {
    // coefficients of T_n via the recurrence
    let mut cheb: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 1.0]];
    for n in 2..=degree as usize {
        let mut next = vec![0.0; n + 1];
        for (j, c) in cheb[n - 1].iter().enumerate() {
            next[j + 1] += 2.0 * c;
        }
        for (j, c) in cheb[n - 2].iter().enumerate() {
            next[j] -= c;
        }
        cheb.push(next);
    }
    let mut out = Vec::new();
    for axis in 0..dim {
        for coeffs in cheb.iter().take(degree as usize + 1).skip(2) {
            let mut terms = Vec::new();
            for (j, c) in coeffs.iter().enumerate().skip(1) {
                if *c != 0.0 {
                    let mut alpha = vec![0u32; dim];
                    alpha[axis] = j as u32;
                    terms.push((alpha, c / r.powi(j as i32)));
                }
            }
            out.push(PolynomialR::new(dim, terms)?);
        }
        for deg in 1..=degree {
            let mut alpha = vec![0u32; dim];
            alpha[axis] = deg;
            out.push(PolynomialR::new(dim, vec![(alpha, 1.0)])?);
        }
    }
    Ok(out)
}

fn collect_multi_indices(
    dim: usize,
    degree: u32,
    current: &mut Vec<u32>,
    pos: usize,
    f: &mut impl FnMut(&[u32]),
) {
    if pos == dim {
        f(current);
        return;
    }
    let used: u32 = current[..pos].iter().sum();
    for a in 0..=(degree - used.min(degree)) {
        current[pos] = a;
        collect_multi_indices(dim, degree, current, pos + 1, f);
    }
    current[pos] = 0;
}

/// Contact order of the graph domain `{x > f(y)}` at the origin for k-planes:
/// the largest vanishing order of `f` along a direction inside some k-plane
/// (every direction lies in a k-plane, so this is the directional maximum),
/// found by killing successive homogeneous parts. `None` means a direction
/// of infinite contact exists.
#[derive(Clone, Debug)]
pub struct ContactOrder {
    pub order: Option<u32>,
    pub worst_direction: DVector<f64>,
    /// `1 / order` (0 when the order is infinite).
    pub predicted_lambda: f64,
}

pub fn contact_order_graph_domain(f: &PolynomialR, k: usize) -> Result<ContactOrder> {
    if k == 0 || k > f.dim() {
        return Err(Error::KOutOfRange { k, max: f.dim() });
    }
    if f.constant_term().abs() > COEFF_TOL {
        return Err(Error::Precondition(
            "graph function must vanish at the origin".into(),
        ));
    }
    // Sampled nonnegativity and midpoint convexity on the reference box.
    let mut rng = linalg::stream_rng(0xC0C0, 9);
    for _ in 0..400 {
        let a = DVector::from_fn(f.dim(), |_, _| 2.0 * rng.gen::<f64>() - 1.0);
        let b = DVector::from_fn(f.dim(), |_, _| 2.0 * rng.gen::<f64>() - 1.0);
        let fa = f.eval(&a);
        let fb = f.eval(&b);
        if fa < -1e-12 * f.norm_l1() {
            return Err(Error::Precondition(
                "graph function is negative on the box".into(),
            ));
        }
        let mid = f.eval(&((&a + &b) * 0.5));
        if mid > 0.5 * (fa + fb) + 1e-9 * f.norm_l1() {
            return Err(Error::Precondition(
                "graph function fails sampled midpoint convexity".into(),
            ));
        }
    }

    let deg = f.degree();
    let scale = f.norm_l1().max(1.0);
    // Start from the best direction among axes and samples.
    let mut candidates: Vec<DVector<f64>> = Vec::new();
    for i in 0..f.dim() {
        candidates.push(DVector::from_fn(
            f.dim(),
            |j, _| if j == i { 1.0 } else { 0.0 },
        ));
    }
    candidates.extend(linalg::unit_sphere_samples(f.dim(), 128, 41));
    let mut best_dir = candidates[0].clone();
    let mut best_order = 0u32;
    let mut infinite = false;
    for c in &candidates {
        match f.directional_order(c) {
            Some(m) if m > best_order => {
                best_order = m;
                best_dir = c.clone();
            }
            None => {
                infinite = true;
                best_dir = c.clone();
            }
            _ => {}
        }
    }
    // Try to push the order higher by zeroing all homogeneous parts up to m.
    while !infinite && best_order < deg {
        let m = best_order;
        let obj = |u: &DVector<f64>| -> f64 {
            (1..=m)
                .map(|j| f.homogeneous_part_at(j, u).powi(2))
                .sum::<f64>()
        };
        let mut found = None;
        for s in 0..24 {
            let mut rng = linalg::stream_rng(0xD1A6, s);
            let mut u = linalg::random_unit_vector(f.dim(), &mut rng);
            let mut val = obj(&u);
            let mut width = 0.6;
            for _ in 0..60 {
                let mut improved = false;
                for w in linalg::orthogonal_complement(&[u.clone()], f.dim()) {
                    let g = |theta: f64| obj(&((&u * theta.cos()) + &w * theta.sin()).normalize());
                    let (theta, fv) = linalg::golden_section_min(-width, width, 35, g);
                    if fv < val {
                        val = fv;
                        u = ((&u * theta.cos()) + &w * theta.sin()).normalize();
                        improved = true;
                    }
                }
                if !improved {
                    width *= 0.5;
                    if width < 1e-9 {
                        break;
                    }
                }
            }
            if val < 1e-16 * scale * scale {
                found = Some(u);
                break;
            }
        }
        match found {
            Some(u) => match f.directional_order(&u) {
                Some(mm) if mm > best_order => {
                    best_order = mm;
                    best_dir = u;
                }
                None => {
                    infinite = true;
                    best_dir = u;
                }
                _ => break,
            },
            None => break,
        }
    }

    let order = if infinite { None } else { Some(best_order) };
    let predicted_lambda = match order {
        Some(m) if m > 0 => 1.0 / m as f64,
        _ => 0.0,
    };
    Ok(ContactOrder {
        order,
        worst_direction: best_dir,
        predicted_lambda,
    })
}

/// Bounded graph domain `{(x, y) : f(y) < x < x_max, ‖y‖_∞ < y_max}` with the
/// graph function captured by the membership oracle. Ambient dimension is
/// `1 + f.dim()`.
pub fn graph_domain(f: &PolynomialR, x_max: f64, y_max: f64) -> Result<ConvexBody> {
    let g = f.clone();
    let dy = f.dim();
    let mut base = vec![x_max / 2.0];
    base.extend(std::iter::repeat_n(0.0, dy));
    let r = 2.0 * (x_max + y_max * (dy as f64).sqrt());
    ConvexBody::sublevel(
        move |z: &DVector<f64>| {
            let x = z[0];
            let y = DVector::from_fn(dy, |i, _| z[i + 1]);
            let mut v = g.eval(&y) - x;
            v = v.max(x - x_max);
            for i in 0..dy {
                v = v.max(y[i].abs() - y_max);
            }
            v
        },
        r,
        DVector::from_vec(base),
        ScalarField::Real,
    )
}

/// Fit the measured decay exponent along a 1-dimensional slice through the
/// worst direction of a graph domain, for cross-checking `1/L`.
pub fn measure_graph_lambda(
    f: &PolynomialR,
    direction: &DVector<f64>,
    tol: &Tolerances,
) -> Result<f64> {
    let body = graph_domain(f, 2.0, 1.2)?;
    let dy = f.dim();
    let x = DVector::zeros(1 + dy);
    let p = {
        let mut v = vec![1.0];
        v.extend(std::iter::repeat_n(0.0, dy));
        DVector::from_vec(v)
    };
    let mut dir = vec![0.0];
    dir.extend(direction.iter().copied());
    let frame = Frame::line(ScalarField::Real, &DVector::from_vec(dir))?;
    let grid = super::DyadicGrid::default();
    let profile = super::expansion_profile(&body, tol, &x, &p, &frame, &grid)?;
    Ok(super::fit_expansion(&profile, tol).lambda)
}
