//! Isoperimetric curve surgery on model metrics over `M × (0,1]`.
//!
//! `M` is the circle of circumference 1. A model metric assigns a norm
//! `‖(v, w)‖_(x,t)` to horizontal/vertical velocity pairs and must satisfy
//! three sampled conditions: vertical segments cost like `|w|/t`, the two
//! directions are uniformly transverse, and horizontal cost expands as
//! `(t/s)^λ` toward the boundary. From the constants `(C1, C2, C3, λ)` the
//! machinery derives `(T0, L, R)`, normalizes closed curves into words of
//! vertical and short horizontal segments at the levels `e^{-k T0}`, and
//! reduces such words by the recursive surgery whose case analysis certifies
//! `Area_R(σ) ≤ N(σ)`, one logged region at a time.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Circle position wrap.
fn wrap(x: f64) -> f64 {
    x.rem_euclid(1.0)
}

/// Shortest-arc distance on the circle.
fn wrap_dist(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Signed shortest-arc step from `x` to `y` (in `[-1/2, 1/2]`).
fn wrap_step(x: f64, y: f64) -> f64 {
    let d = (y - x).rem_euclid(1.0);
    if d <= 0.5 {
        d
    } else {
        d - 1.0
    }
}

type MetricFn = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;

/// Model metric on `T(M × (0,1])` with its structure constants.
#[derive(Clone)]
pub struct ModelMetric {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub lambda: f64,
    rule: MetricFn,
}

impl std::fmt::Debug for ModelMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ModelMetric(C1={}, C2={}, C3={}, lambda={})",
            self.c1, self.c2, self.c3, self.lambda
        )
    }
}

impl ModelMetric {
    /// The built-in instance `‖(v, w)‖ = |v|/t + |w|/t` with all constants 1.
    pub fn built_in() -> ModelMetric {
        ModelMetric {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            lambda: 1.0,
            rule: Arc::new(|_x, t, v, w| (v.abs() + w.abs()) / t),
        }
    }

    pub fn custom(
        c1: f64,
        c2: f64,
        c3: f64,
        lambda: f64,
        rule: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> ModelMetric {
        ModelMetric {
            c1,
            c2,
            c3,
            lambda,
            rule: Arc::new(rule),
        }
    }

    pub fn eval(&self, x: f64, t: f64, v: f64, w: f64) -> f64 {
        (self.rule)(x, t, v, w)
    }

    /// Sampled verification of conditions (a), (b), (c). Returns the largest
    /// relative violation per condition (zero for the built-in metric).
    pub fn condition_residuals(&self, samples: usize, seed: u64) -> (f64, f64, f64) {
        let mut rng = linalg::stream_rng(seed, 3);
        let mut worst_a: f64 = 0.0;
        let mut worst_b: f64 = 0.0;
        let mut worst_c: f64 = 0.0;
        for _ in 0..samples {
            let x = rng.gen::<f64>();
            let t = (rng.gen::<f64>() * 6.0).exp().recip().clamp(1e-4, 1.0);
            let v = 2.0 * rng.gen::<f64>() - 1.0;
            let w = 2.0 * rng.gen::<f64>() - 1.0;
            // (a): (1/C1)|w|/t <= ||(0,w)|| <= C1 |w|/t
            let vert = self.eval(x, t, 0.0, w);
            let ideal = w.abs() / t;
            if ideal > 0.0 {
                worst_a = worst_a.max(vert / (self.c1 * ideal) - 1.0);
                worst_a = worst_a.max(ideal / (self.c1 * vert.max(1e-300)) - 1.0);
            }
            // (b): ||(v,0)|| + ||(0,w)|| <= C2 ||(v,w)||
            let split = self.eval(x, t, v, 0.0) + vert;
            let joint = self.eval(x, t, v, w);
            if joint > 0.0 {
                worst_b = worst_b.max(split / (self.c2 * joint) - 1.0);
            }
            // (c): ||(v,0)||_(x,s) >= C3 (t/s)^lambda ||(v,0)||_(x,t), s <= t
            let s = t * rng.gen::<f64>().max(1e-3);
            let deep = self.eval(x, s, v, 0.0);
            let shallow = self.eval(x, t, v, 0.0);
            let needed = self.c3 * (t / s).powf(self.lambda) * shallow;
            if needed > 0.0 {
                worst_c = worst_c.max(needed / deep.max(1e-300) - 1.0);
            }
        }
        (worst_a.max(0.0), worst_b.max(0.0), worst_c.max(0.0))
    }
}

/// The derived surgery constants.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FillingConstants {
    pub t0: f64,
    pub l: f64,
    pub r: f64,
    /// Numerical diameter bound of `M × [e^{-T0}, 1]` entering `R`.
    pub diam_band: f64,
}

/// `T0` with margin 0.1 over `C3 e^{λ T0} > 2`; `L = max{C1 T0, C2/C3}`;
/// `R = max{2, 2 C1 (C1 C2 + T0), diam(M × [e^{-T0}, 1]), 9L/2}` with the
/// diameter term computed from distance upper bounds over a 64-point net.
pub fn derive_constants(metric: &ModelMetric) -> FillingConstants {
    let raw = (2.0 / metric.c3).ln() / metric.lambda;
    let mut t0 = raw + 0.1;
    if t0 <= 0.0 {
        t0 = 0.1;
    }
    let l = (metric.c1 * t0).max(metric.c2 / metric.c3);

    // Net diameter of the band via distance upper bounds (safe direction).
    let mut net = Vec::new();
    for i in 0..8 {
        for j in 0..8 {
            let x = i as f64 / 8.0;
            let t = (-t0 * (j as f64) / 7.0).exp();
            net.push((x, t));
        }
    }
    let mut diam_band: f64 = 0.0;
    for a in &net {
        for b in &net {
            let (_, ub) = model_distance(metric, *a, *b);
            diam_band = diam_band.max(ub);
        }
    }
    let r = 2.0_f64
        .max(2.0 * metric.c1 * (metric.c1 * metric.c2 + t0))
        .max(diam_band)
        .max(4.5 * l);
    FillingConstants {
        t0,
        l,
        r,
        diam_band,
    }
}

// ----------------------------------------------------------------------
// Lengths and distances in the model
// ----------------------------------------------------------------------

/// Integrated length of the vertical segment `{x} × [t_lo, t_hi]`.
pub fn vertical_length(metric: &ModelMetric, x: f64, t_lo: f64, t_hi: f64) -> f64 {
    let (lo, hi) = if t_lo <= t_hi {
        (t_lo, t_hi)
    } else {
        (t_hi, t_lo)
    };
    if lo == hi {
        return 0.0;
    }
    // Integrate in log scale where the integrand is tame.
    let steps = ((hi / lo).ln() / 0.05).ceil().max(1.0) as usize;
    let mut total = 0.0;
    let log_lo = lo.ln();
    let dh = (hi.ln() - log_lo) / steps as f64;
    for i in 0..steps {
        let a = log_lo + i as f64 * dh;
        for (node, weight) in GL4 {
            let s = a + 0.5 * dh * (node + 1.0);
            let t = s.exp();
            // dt = t ds
            total += 0.5 * dh * weight * metric.eval(x, t, 0.0, 1.0) * t;
        }
    }
    total
}

/// Integrated length of the shortest-arc horizontal path from `x` to `y` at
/// level `t`.
pub fn horizontal_length(metric: &ModelMetric, x: f64, y: f64, t: f64) -> f64 {
    let arc = wrap_dist(x, y);
    if arc == 0.0 {
        return 0.0;
    }
    let step = wrap_step(x, y);
    let steps = (arc / 0.05).ceil().max(1.0) as usize;
    let mut total = 0.0;
    for i in 0..steps {
        let a = i as f64 / steps as f64;
        for (node, weight) in GL4 {
            let s = a + 0.5 * (node + 1.0) / steps as f64;
            let pos = wrap(x + step * s);
            total += 0.5 * weight / steps as f64 * metric.eval(pos, t, 1.0, 0.0) * arc;
        }
    }
    total
}

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

/// Two-sided distance estimate between points of `M × (0,1]`: the lower
/// bound is the vertical estimate `|log(s/t)| / (C1 C2)`; the upper bound
/// minimizes over descend/traverse/ascend composite paths, refined by
/// golden section on the traversal level.
pub fn model_distance(metric: &ModelMetric, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (x, t) = a;
    let (y, s) = b;
    let lower = (s / t).ln().abs() / (metric.c1 * metric.c2);
    if x == y && t == s {
        return (0.0, 0.0);
    }
    let cost = |u: f64| -> f64 {
        vertical_length(metric, x, t.min(u), t.max(u))
            + horizontal_length(metric, x, y, u)
            + vertical_length(metric, y, s.min(u), s.max(u))
    };
    if wrap_dist(x, y) == 0.0 {
        // pure vertical
        return (lower, vertical_length(metric, x, t.min(s), t.max(s)));
    }
    let mut best = f64::INFINITY;
    let mut best_u = t.max(s);
    let u_lo = t.min(s).min(1e-3);
    for i in 0..48 {
        let frac = i as f64 / 47.0;
        let u = (u_lo.ln() * (1.0 - frac)).exp(); // log-spaced in [u_lo, 1]
        let c = cost(u);
        if c < best {
            best = c;
            best_u = u;
        }
    }
    let (lo, hi) = ((best_u * 0.5).max(u_lo), (best_u * 2.0).min(1.0));
    let (_, refined) = linalg::golden_section_min(lo.ln(), hi.ln(), 45, |lu| cost(lu.exp()));
    (lower, best.min(refined))
}

// ----------------------------------------------------------------------
// Star curves
// ----------------------------------------------------------------------

/// One segment of a property-star word.
#[derive(Clone, Debug, PartialEq)]
pub enum Piece {
    /// `{x} × [e^{-(level+1) T0}, e^{-level T0}]`; `up` runs toward t = 1.
    Vertical { x: f64, level: u32, up: bool },
    /// Path on M at level `e^{-level T0}`.
    Horizontal { level: u32, path: Vec<f64> },
}

impl Piece {
    /// `(x, depth)` endpoints, depth in level units (vertical deep end is
    /// `level + 1`).
    fn start(&self) -> (f64, u32) {
        match self {
            Piece::Vertical { x, level, up } => (*x, if *up { level + 1 } else { *level }),
            Piece::Horizontal { level, path } => (path[0], *level),
        }
    }

    fn end(&self) -> (f64, u32) {
        match self {
            Piece::Vertical { x, level, up } => (*x, if *up { *level } else { level + 1 }),
            Piece::Horizontal { level, path } => (*path.last().unwrap(), *level),
        }
    }

    /// Deepest level index reached.
    fn depth(&self) -> u32 {
        match self {
            Piece::Vertical { level, .. } => level + 1,
            Piece::Horizontal { level, .. } => *level,
        }
    }

    pub fn length(&self, metric: &ModelMetric, constants: &FillingConstants) -> f64 {
        match self {
            Piece::Vertical { x, level, .. } => {
                let hi = (-constants.t0 * *level as f64).exp();
                let lo = (-constants.t0 * (*level + 1) as f64).exp();
                vertical_length(metric, *x, lo, hi)
            }
            Piece::Horizontal { level, path } => {
                let t = (-constants.t0 * *level as f64).exp();
                path.windows(2)
                    .map(|w| horizontal_length(metric, w[0], w[1], t))
                    .sum()
            }
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Piece::Vertical { x, level, up } => serde_json::json!({
                "type": "V", "x": x, "level": level, "dir": if *up { "up" } else { "down" },
            }),
            Piece::Horizontal { level, path } => serde_json::json!({
                "type": "H", "level": level, "path": path,
            }),
        }
    }

    fn approx_eq(&self, other: &Piece) -> bool {
        match (self, other) {
            (
                Piece::Vertical {
                    x: a,
                    level: la,
                    up: ua,
                },
                Piece::Vertical {
                    x: b,
                    level: lb,
                    up: ub,
                },
            ) => la == lb && ua == ub && wrap_dist(*a, *b) < 1e-9,
            (
                Piece::Horizontal {
                    level: la,
                    path: pa,
                },
                Piece::Horizontal {
                    level: lb,
                    path: pb,
                },
            ) => {
                la == lb
                    && pa.len() == pb.len()
                    && pa.iter().zip(pb).all(|(a, b)| wrap_dist(*a, *b) < 1e-9)
            }
            _ => false,
        }
    }
}

/// Closed cyclic word of vertical and horizontal segments.
#[derive(Clone, Debug, Default)]
pub struct StarCurve {
    pub pieces: Vec<Piece>,
}

impl StarCurve {
    pub fn word_length(&self) -> usize {
        self.pieces.len()
    }

    /// Deepest level index `h(σ)`.
    pub fn depth(&self) -> u32 {
        self.pieces.iter().map(|p| p.depth()).max().unwrap_or(0)
    }

    pub fn total_length(&self, metric: &ModelMetric, constants: &FillingConstants) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.length(metric, constants))
            .sum()
    }

    /// Closure and per-piece invariants.
    pub fn validate(&self, metric: &ModelMetric, constants: &FillingConstants) -> Result<()> {
        let n = self.pieces.len();
        if n == 0 {
            return Ok(());
        }
        for i in 0..n {
            let (xe, de) = self.pieces[i].end();
            let (xs, ds) = self.pieces[(i + 1) % n].start();
            if de != ds || wrap_dist(xe, xs) > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "star word is not closed at piece {i}: ({xe}, {de}) -> ({xs}, {ds})"
                )));
            }
            if let Piece::Horizontal { .. } = &self.pieces[i] {
                let len = self.pieces[i].length(metric, constants);
                if len > constants.l + 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "horizontal piece {i} has length {len} > L = {}",
                        constants.l
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn reversed(&self) -> StarCurve {
        let pieces = self
            .pieces
            .iter()
            .rev()
            .map(|p| match p {
                Piece::Vertical { x, level, up } => Piece::Vertical {
                    x: *x,
                    level: *level,
                    up: !*up,
                },
                Piece::Horizontal { level, path } => {
                    let mut q = path.clone();
                    q.reverse();
                    Piece::Horizontal {
                        level: *level,
                        path: q,
                    }
                }
            })
            .collect();
        StarCurve { pieces }
    }

    /// Vertex trace on `M × (0,1]` (for feeding back into normalization).
    pub fn to_polyline(&self, constants: &FillingConstants) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for p in &self.pieces {
            let (x, d) = p.start();
            out.push((x, (-constants.t0 * d as f64).exp()));
            if let Piece::Horizontal { level, path } = p {
                let t = (-constants.t0 * *level as f64).exp();
                for q in path.iter().skip(1) {
                    out.push((*q, t));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.pieces.iter().map(|p| p.to_json()).collect())
    }
}

// ----------------------------------------------------------------------
// Normalization
// ----------------------------------------------------------------------

/// Closed polyline on `M × (0,1]`: vertices `(x, t)`, implicitly closed.
pub type ModelPolyline = Vec<(f64, f64)>;

fn edge_length(metric: &ModelMetric, a: (f64, f64), b: (f64, f64), depth: usize) -> f64 {
    let (x0, t0) = a;
    let (x1, t1) = b;
    let dx = wrap_step(x0, x1);
    let dt = t1 - t0;
    if dx == 0.0 && dt == 0.0 {
        return 0.0;
    }
    if depth < 30 && (t0 / t1 > 1.5 || t1 / t0 > 1.5 || dx.abs() > 0.05) {
        let mid = (wrap(x0 + 0.5 * dx), 0.5 * (t0 + t1));
        return edge_length(metric, a, mid, depth + 1) + edge_length(metric, mid, b, depth + 1);
    }
    let mut total = 0.0;
    for (node, weight) in GL4 {
        let s = 0.5 * (node + 1.0);
        let pos = wrap(x0 + dx * s);
        let t = t0 + dt * s;
        total += 0.5 * weight * metric.eval(pos, t, dx, dt);
    }
    total
}

/// Integrated length of a closed model polyline.
pub fn polyline_length(metric: &ModelMetric, poly: &ModelPolyline) -> f64 {
    if poly.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..poly.len() {
        total += edge_length(metric, poly[i], poly[(i + 1) % poly.len()], 0);
    }
    total
}

/// Report of the two-step normalization with the instance checks of the
/// displayed bounds.
#[derive(Clone, Debug)]
pub struct NormalizeReport {
    pub star: StarCurve,
    pub input_length: f64,
    /// Length after the reconnect step; bounded by `input_length + 1`.
    pub intermediate_length: f64,
    pub length_bound_ok: bool,
    /// Word-length bound `(1 + L_I)(2 + 2 C1 C2 / T0)`.
    pub word_bound: f64,
    pub word_bound_ok: bool,
}

/// Cut points at equal integrated length along a closed polyline.
fn cut_points(metric: &ModelMetric, poly: &ModelPolyline, n_cuts: usize) -> Vec<(f64, f64)> {
    let m = poly.len();
    let mut cum = vec![0.0];
    for i in 0..m {
        cum.push(cum[i] + edge_length(metric, poly[i], poly[(i + 1) % m], 0));
    }
    let total = *cum.last().unwrap();
    let mut cuts = Vec::with_capacity(n_cuts);
    for c in 0..n_cuts {
        let target = total * c as f64 / n_cuts as f64;
        let j = cum
            .iter()
            .rposition(|&v| v <= target + 1e-15)
            .unwrap_or(0)
            .min(m - 1);
        let seg = cum[j + 1] - cum[j];
        let frac = if seg > 0.0 {
            (target - cum[j]) / seg
        } else {
            0.0
        };
        let (x0, t0) = poly[j];
        let (x1, t1) = poly[(j + 1) % m];
        cuts.push((wrap(x0 + wrap_step(x0, x1) * frac), t0 + (t1 - t0) * frac));
    }
    cuts
}

/// Max `t` along the arc between consecutive cuts (approximated on the
/// straight reconnecting path, which is exact for H/V arcs).
fn arc_max_t(arc: &[(f64, f64)]) -> f64 {
    arc.iter().map(|(_, t)| *t).fold(0.0, f64::max)
}

/// Split a closed polyline into `n` arcs of equal integrated length at
/// exactly interpolated cut points. Each arc carries its cut endpoints and
/// the intermediate vertices.
fn split_at_lengths(metric: &ModelMetric, poly: &ModelPolyline, n: usize) -> Vec<Vec<(f64, f64)>> {
    let m = poly.len();
    let mut cum = vec![0.0];
    for i in 0..m {
        cum.push(cum[i] + edge_length(metric, poly[i], poly[(i + 1) % m], 0));
    }
    let total = *cum.last().unwrap();
    let locate = |target: f64| -> (usize, (f64, f64)) {
        let mut j = cum.iter().rposition(|&v| v <= target + 1e-15).unwrap_or(0);
        if j >= m {
            j = m - 1;
        }
        let seg = cum[j + 1] - cum[j];
        let frac = if seg > 0.0 {
            ((target - cum[j]) / seg).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (x0, t0) = poly[j];
        let (x1, t1) = poly[(j + 1) % m];
        (
            j,
            (wrap(x0 + wrap_step(x0, x1) * frac), t0 + (t1 - t0) * frac),
        )
    };
    let cuts: Vec<(usize, (f64, f64))> = (0..n)
        .map(|c| locate(total * c as f64 / n as f64))
        .collect();
    // cut 0 sits exactly at poly[0]; targets are increasing, so edge indices
    // are nondecreasing and the last arc walks through the end of the list.
    let mut arcs = Vec::with_capacity(n);
    for c in 0..n {
        let (j0, p0) = cuts[c];
        let (j1, p1) = if c + 1 < n { cuts[c + 1] } else { (m, poly[0]) };
        let mut arc = vec![p0];
        for j in (j0 + 1)..=j1.min(m) {
            if j < m {
                arc.push(poly[j]);
            } else {
                arc.push(poly[0]);
            }
        }
        if (arc.last().unwrap().0 - p1.0).abs() > 1e-15
            || (arc.last().unwrap().1 - p1.1).abs() > 1e-15
        {
            arc.push(p1);
        }
        arcs.push(arc);
    }
    arcs
}

/// Two-step normalization: (i) subdivide into sub-unit arcs and reconnect by
/// near-geodesic descend/traverse/ascend paths; (ii) snap horizontals to the
/// levels `e^{-k T0}` and join by vertical stacks.
pub fn normalize_to_star(
    metric: &ModelMetric,
    constants: &FillingConstants,
    poly: &ModelPolyline,
) -> Result<NormalizeReport> {
    for &(_, t) in poly {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidInput("curve leaves M x (0, 1]".into()));
        }
    }
    let input_length = polyline_length(metric, poly);
    // Degenerate curve: nothing to fill.
    if poly.len() < 2 || input_length < 1e-12 {
        return Ok(NormalizeReport {
            star: StarCurve::default(),
            input_length,
            intermediate_length: 0.0,
            length_bound_ok: true,
            word_bound: 2.0 + 2.0 * metric.c1 * metric.c2 / constants.t0,
            word_bound_ok: true,
        });
    }

    // Fast path: the curve is already a star word.
    if let Some(star) = try_star_form(metric, constants, poly) {
        let len = star.total_length(metric, constants);
        return Ok(NormalizeReport {
            star,
            input_length,
            intermediate_length: len,
            length_bound_ok: true,
            word_bound: (1.0 + len) * (2.0 + 2.0 * metric.c1 * metric.c2 / constants.t0),
            word_bound_ok: true,
        });
    }

    // Step (i): reconnect N0 sub-unit arcs by near-geodesic H/V paths.
    let n0 = input_length.floor() as usize + 1;
    let cuts = cut_points(metric, poly, n0.max(2));
    let mut hv: ModelPolyline = Vec::new();
    for i in 0..cuts.len() {
        let a = cuts[i];
        let b = cuts[(i + 1) % cuts.len()];
        // Composite path through the cheapest traversal level.
        let cost = |u: f64| -> f64 {
            vertical_length(metric, a.0, a.1.min(u), a.1.max(u))
                + horizontal_length(metric, a.0, b.0, u)
                + vertical_length(metric, b.0, b.1.min(u), b.1.max(u))
        };
        let mut best_u = a.1.max(b.1);
        let mut best = cost(best_u);
        for j in 0..24 {
            let u = (a.1.min(b.1).ln() * (1.0 - j as f64 / 23.0)).exp();
            let c = cost(u);
            if c < best {
                best = c;
                best_u = u;
            }
        }
        hv.push(a);
        hv.push((a.0, best_u));
        hv.push((b.0, best_u));
    }
    let intermediate_length = polyline_length(metric, &hv);
    let length_bound_ok = intermediate_length <= input_length + 1.0 + 1e-9;

    // Step (ii): snap to levels. Cut the H/V curve into sub-unit arcs again,
    // at exact equal-length parameters so every arc has length < 1.
    let n1 = intermediate_length.floor() as usize + 1;
    let arcs = split_at_lengths(metric, &hv, n1.max(1));
    let n_arcs = arcs.len();

    let mut levels = Vec::with_capacity(n_arcs);
    let mut traces: Vec<Vec<f64>> = Vec::with_capacity(n_arcs);
    for arc in &arcs {
        let tmax = arc_max_t(arc);
        // largest integer with the arc below e^{-h T0}
        let h = ((-(tmax.ln()) / constants.t0).floor().max(0.0)) as u32;
        levels.push(h);
        let mut trace: Vec<f64> = Vec::new();
        for &(x, _) in arc {
            if trace.last().is_none_or(|&last| wrap_dist(last, x) > 1e-12) {
                trace.push(x);
            }
        }
        traces.push(trace);
    }

    let mut pieces = Vec::new();
    for ai in 0..n_arcs {
        let h = levels[ai];
        let trace = &traces[ai];
        if trace.len() >= 2 {
            let piece = Piece::Horizontal {
                level: h,
                path: trace.clone(),
            };
            let len = piece.length(metric, constants);
            if len > constants.l + 1e-9 {
                return Err(Error::InternalCheck(format!(
                    "projected horizontal has length {len} > L = {} (metric constants \
                     inconsistent with conditions (b)(c))",
                    constants.l
                )));
            }
            pieces.push(piece);
        }
        // vertical stack joining level h to the next arc's level
        let h_next = levels[(ai + 1) % n_arcs];
        let x_join = *trace.last().unwrap();
        if h < h_next {
            for lev in h..h_next {
                pieces.push(Piece::Vertical {
                    x: x_join,
                    level: lev,
                    up: false,
                });
            }
        } else {
            for lev in (h_next..h).rev() {
                pieces.push(Piece::Vertical {
                    x: x_join,
                    level: lev,
                    up: true,
                });
            }
        }
    }
    let star = StarCurve { pieces };
    star.validate(metric, constants)?;
    let word_bound =
        (1.0 + intermediate_length) * (2.0 + 2.0 * metric.c1 * metric.c2 / constants.t0);
    let word_bound_ok = star.word_length() as f64 <= word_bound + 1e-9;
    Ok(NormalizeReport {
        star,
        input_length,
        intermediate_length,
        length_bound_ok,
        word_bound,
        word_bound_ok,
    })
}

/// Detect curves already in star form: every edge horizontal at an exact
/// level or vertical between adjacent levels.
fn try_star_form(
    metric: &ModelMetric,
    constants: &FillingConstants,
    poly: &ModelPolyline,
) -> Option<StarCurve> {
    let level_index = |t: f64| -> Option<u32> {
        let h = -t.ln() / constants.t0;
        let k = h.round();
        if k >= -0.1 && (h - k).abs() < 1e-9 {
            Some(k as u32)
        } else {
            None
        }
    };
    let n = poly.len();
    let mut pieces: Vec<Piece> = Vec::new();
    for i in 0..n {
        let (x0, t0) = poly[i];
        let (x1, t1) = poly[(i + 1) % n];
        let l0 = level_index(t0)?;
        let l1 = level_index(t1)?;
        if l0 == l1 && wrap_dist(x0, x1) > 0.0 {
            let piece = Piece::Horizontal {
                level: l0,
                path: vec![x0, x1],
            };
            if piece.length(metric, constants) > constants.l + 1e-9 {
                return None;
            }
            pieces.push(piece);
        } else if wrap_dist(x0, x1) < 1e-12 && l0 != l1 {
            if l0 + 1 == l1 {
                pieces.push(Piece::Vertical {
                    x: x0,
                    level: l0,
                    up: false,
                });
            } else if l1 + 1 == l0 {
                pieces.push(Piece::Vertical {
                    x: x0,
                    level: l1,
                    up: true,
                });
            } else {
                return None;
            }
        } else if wrap_dist(x0, x1) < 1e-12 && l0 == l1 {
            // zero-length edge, skip
        } else {
            return None;
        }
    }
    let star = StarCurve { pieces };
    star.validate(metric, constants).ok()?;
    Some(star)
}

// ----------------------------------------------------------------------
// Surgery
// ----------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SurgeryCase {
    /// Cancel adjacent opposite verticals at the lowest level.
    Case1,
    /// All-horizontal curve lifted two levels, runs of four merged.
    Case2,
    /// Valley `V down / H / V up` replaced by the lifted horizontal.
    Case3a,
    /// Corner `V down / H / H` lifted, adding one vertical.
    Case3b,
    /// Terminal disk.
    Base,
}

#[derive(Clone, Debug, Serialize)]
pub struct SurgeryStep {
    pub case: SurgeryCase,
    /// Index of the first removed piece in the word before this step.
    pub position: usize,
    #[serde(serialize_with = "serialize_pieces")]
    pub removed: Vec<Piece>,
    #[serde(serialize_with = "serialize_pieces")]
    pub added: Vec<Piece>,
    /// Certified diameter bound of the surgered region.
    pub region_diameter: f64,
    pub triangles: usize,
    pub word_before: usize,
    pub word_after: usize,
    pub depth_before: u32,
}

fn serialize_pieces<S: serde::Serializer>(
    pieces: &[Piece],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(pieces.len()))?;
    for p in pieces {
        seq.serialize_element(&p.to_json())?;
    }
    seq.end()
}

/// Certificate that the input word bounds a disk of at most `N(σ)` triangles
/// of diameter at most `R`.
#[derive(Clone, Debug, Serialize)]
pub struct FillingCertificate {
    pub input_word_length: usize,
    pub triangles: usize,
    pub log: Vec<SurgeryStep>,
    pub final_diameter: f64,
    pub r_used: f64,
}

/// Recursive surgery over the word's case analysis. Every region's
/// diameter is certified with length/distance upper bounds before the step
/// is accepted; a failed certification aborts (it indicates inconsistent
/// metric constants, not a property of the curve).
pub fn reduce_and_fill(
    metric: &ModelMetric,
    constants: &FillingConstants,
    star: &StarCurve,
) -> Result<FillingCertificate> {
    star.validate(metric, constants)?;
    let mut word = star.pieces.clone();
    let n_input = word.len();
    let mut log: Vec<SurgeryStep> = Vec::new();
    let mut triangles = 0usize;
    let mut final_diameter = 0.0;
    // every step strictly decreases the (h, N) measure; 2N bounds the total
    let step_cap = (2 * n_input).max(4);

    let piece_len = |p: &Piece| p.length(metric, constants);
    let depth_of = |w: &[Piece]| w.iter().map(|p| p.depth()).max().unwrap_or(0);

    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > step_cap {
            return Err(Error::InternalCheck("surgery step cap exceeded".into()));
        }
        let n = word.len();
        if n == 0 {
            break;
        }
        let h = depth_of(&word);
        let total_len: f64 = word.iter().map(piece_len).sum();

        // Base cases.
        if h <= 1 || n <= 3 {
            let diam = if h <= 1 {
                constants.diam_band
            } else {
                0.5 * total_len
            };
            if diam > constants.r + 1e-9 {
                return Err(Error::InternalCheck(format!(
                    "base-case diameter {diam} exceeds R = {}",
                    constants.r
                )));
            }
            triangles += 1;
            final_diameter = diam;
            log.push(SurgeryStep {
                case: SurgeryCase::Base,
                position: 0,
                removed: word.clone(),
                added: vec![],
                region_diameter: diam,
                triangles: 1,
                word_before: n,
                word_after: 0,
                depth_before: h,
            });
            break;
        }

        let deepest_horizontal = word
            .iter()
            .any(|p| matches!(p, Piece::Horizontal { level, .. } if *level == h));
        let all_horizontal_at_h = word
            .iter()
            .all(|p| matches!(p, Piece::Horizontal { level, .. } if *level == h));

        if !deepest_horizontal {
            // Case 1: adjacent opposite verticals at the lowest level.
            let mut found = None;
            for i in 0..n {
                let j = (i + 1) % n;
                if let (
                    Piece::Vertical {
                        x: xa,
                        level: la,
                        up: false,
                    },
                    Piece::Vertical {
                        x: xb,
                        level: lb,
                        up: true,
                    },
                ) = (&word[i], &word[j])
                {
                    if *la == h - 1 && *lb == h - 1 && wrap_dist(*xa, *xb) < 1e-9 {
                        found = Some(i);
                        break;
                    }
                }
            }
            let i = found.ok_or_else(|| {
                Error::InternalCheck("case 1: no cancelling vertical pair at depth".into())
            })?;
            let removed = remove_cyclic(&mut word, i, 2);
            let region_len: f64 = removed.iter().map(piece_len).sum();
            let diam = 0.5 * region_len;
            check_diam(diam, constants)?;
            triangles += 1;
            log.push(SurgeryStep {
                case: SurgeryCase::Case1,
                position: i,
                removed,
                added: vec![],
                region_diameter: diam,
                triangles: 1,
                word_before: n,
                word_after: word.len(),
                depth_before: h,
            });
            continue;
        }

        if all_horizontal_at_h {
            // Case 2: lift everything two levels (h >= 2 guaranteed here),
            // merging greedy left-to-right groups of four.
            debug_assert!(h >= 2, "case 2 requires h >= 2");
            let mut new_word: Vec<Piece> = Vec::new();
            let mut group_count = 0usize;
            let mut max_region: f64 = 0.0;
            let mut idx = 0usize;
            while idx < n {
                let hi = (idx + 4).min(n);
                let group = &word[idx..hi];
                let mut path: Vec<f64> = Vec::new();
                let mut group_len = 0.0;
                for p in group {
                    group_len += piece_len(p);
                    if let Piece::Horizontal { path: q, .. } = p {
                        for v in q {
                            if path.last().is_none_or(|&last| wrap_dist(last, *v) > 1e-12) {
                                path.push(*v);
                            }
                        }
                    }
                }
                let lifted = Piece::Horizontal { level: h - 2, path };
                let lifted_len = piece_len(&lifted);
                if lifted_len > constants.l + 1e-9 {
                    return Err(Error::InternalCheck(format!(
                        "case 2: lifted group length {lifted_len} > L (expansion constants \
                         inconsistent)"
                    )));
                }
                // Region boundary: two vertical stacks of two levels plus the
                // group and its lift.
                let x_start = group[0].start().0;
                let x_end = group[group.len() - 1].end().0;
                let vert_stack = |x: f64| {
                    vertical_length(
                        metric,
                        x,
                        (-constants.t0 * h as f64).exp(),
                        (-constants.t0 * (h - 2) as f64).exp(),
                    )
                };
                let region =
                    0.5 * (vert_stack(x_start) + group_len + vert_stack(x_end) + lifted_len);
                check_diam(region, constants)?;
                max_region = max_region.max(region);
                new_word.push(lifted);
                group_count += 1;
                idx = hi;
            }
            triangles += group_count;
            let removed = word.clone();
            word = new_word;
            log.push(SurgeryStep {
                case: SurgeryCase::Case2,
                position: 0,
                removed,
                added: word.clone(),
                region_diameter: max_region,
                triangles: group_count,
                word_before: n,
                word_after: word.len(),
                depth_before: h,
            });
            continue;
        }

        // Case 3: a maximal run of horizontals at depth h with its flanking
        // verticals. Scan deterministically from index 0.
        let run_start = (0..n)
            .find(|&i| {
                matches!(&word[i], Piece::Horizontal { level, .. } if *level == h)
                    && !matches!(&word[(i + n - 1) % n], Piece::Horizontal { level, .. } if *level == h)
            })
            .ok_or_else(|| Error::InternalCheck("case 3: no horizontal run at depth".into()))?;
        let mut run_len = 1;
        while run_len < n
            && matches!(&word[(run_start + run_len) % n], Piece::Horizontal { level, .. } if *level == h)
        {
            run_len += 1;
        }
        let before_idx = (run_start + n - 1) % n;
        // Flanking pieces are necessarily verticals into/out of depth h.
        let v_in_ok = matches!(&word[before_idx], Piece::Vertical { level, up: false, .. } if *level == h - 1);
        if !v_in_ok {
            return Err(Error::InternalCheck(
                "case 3: run not preceded by a descending vertical".into(),
            ));
        }

        if run_len == 1 {
            // Case 3a: V down, H, V up -> lifted H.
            let after_idx = (run_start + 1) % n;
            let v_out_ok = matches!(&word[after_idx], Piece::Vertical { level, up: true, .. } if *level == h - 1);
            if !v_out_ok {
                return Err(Error::InternalCheck(
                    "case 3a: run not followed by an ascending vertical".into(),
                ));
            }
            let removed = remove_cyclic(&mut word, before_idx, 3);
            let Piece::Horizontal { path, .. } = &removed[1] else {
                unreachable!()
            };
            let lifted = Piece::Horizontal {
                level: h - 1,
                path: path.clone(),
            };
            let h_len = piece_len(&removed[1]);
            let lifted_len = piece_len(&lifted);
            if lifted_len > 0.5 * h_len + 1e-9 {
                return Err(Error::InternalCheck(format!(
                    "case 3a: lift did not halve the length ({lifted_len} vs {h_len})"
                )));
            }
            let region = 0.5 * (removed.iter().map(piece_len).sum::<f64>() + lifted_len);
            check_diam(region, constants)?;
            let pos = insert_cyclic(&mut word, before_idx, vec![lifted.clone()]);
            triangles += 1;
            log.push(SurgeryStep {
                case: SurgeryCase::Case3a,
                position: pos,
                removed,
                added: vec![lifted],
                region_diameter: region,
                triangles: 1,
                word_before: n,
                word_after: word.len(),
                depth_before: h,
            });
        } else {
            // Case 3b: V down, H1, H2 -> merged lifted H, new descending V.
            let removed = remove_cyclic(&mut word, before_idx, 3);
            let (Piece::Horizontal { path: p1, .. }, Piece::Horizontal { path: p2, .. }) =
                (&removed[1], &removed[2])
            else {
                unreachable!()
            };
            let mut path = p1.clone();
            for v in p2 {
                if path.last().is_none_or(|&last| wrap_dist(last, *v) > 1e-12) {
                    path.push(*v);
                }
            }
            let x_end = *path.last().unwrap();
            let lifted = Piece::Horizontal { level: h - 1, path };
            let pair_len = piece_len(&removed[1]) + piece_len(&removed[2]);
            let lifted_len = piece_len(&lifted);
            if lifted_len > 0.5 * pair_len + 1e-9 || lifted_len > constants.l + 1e-9 {
                return Err(Error::InternalCheck(format!(
                    "case 3b: lift bound violated ({lifted_len} vs {pair_len})"
                )));
            }
            let new_v = Piece::Vertical {
                x: x_end,
                level: h - 1,
                up: false,
            };
            let region =
                0.5 * (removed.iter().map(piece_len).sum::<f64>() + lifted_len + piece_len(&new_v));
            check_diam(region, constants)?;
            let added = vec![lifted, new_v];
            let pos = insert_cyclic(&mut word, before_idx, added.clone());
            triangles += 1;
            log.push(SurgeryStep {
                case: SurgeryCase::Case3b,
                position: pos,
                removed,
                added,
                region_diameter: region,
                triangles: 1,
                word_before: n,
                word_after: word.len(),
                depth_before: h,
            });
        }
        // Per-step termination measure: (h, N) must decrease
        // lexicographically.
        let last = log.last().unwrap();
        let h_after = depth_of(&word);
        if !(h_after < last.depth_before
            || (h_after == last.depth_before && last.word_after < last.word_before))
        {
            return Err(Error::InternalCheck(
                "surgery did not decrease the (h, N) measure".into(),
            ));
        }
    }

    if triangles > n_input.max(1) {
        return Err(Error::InternalCheck(format!(
            "certificate has {triangles} triangles > N = {n_input}"
        )));
    }
    Ok(FillingCertificate {
        input_word_length: n_input,
        triangles,
        log,
        final_diameter,
        r_used: constants.r,
    })
}

fn check_diam(diam: f64, constants: &FillingConstants) -> Result<()> {
    if diam > constants.r + 1e-9 {
        Err(Error::InternalCheck(format!(
            "surgery region diameter {diam} exceeds R = {}",
            constants.r
        )))
    } else {
        Ok(())
    }
}

/// Remove `count` pieces starting at cyclic index `i`; returns them in order.
fn remove_cyclic(word: &mut Vec<Piece>, i: usize, count: usize) -> Vec<Piece> {
    let n = word.len();
    let idx: Vec<usize> = (0..count).map(|k| (i + k) % n).collect();
    let removed: Vec<Piece> = idx.iter().map(|&j| word[j].clone()).collect();
    let mut sorted = idx.clone();
    sorted.sort_unstable();
    for &j in sorted.iter().rev() {
        word.remove(j);
    }
    removed
}

/// Insert pieces where cyclic index `i` used to be; returns the insert
/// position actually used.
fn insert_cyclic(word: &mut Vec<Piece>, i: usize, pieces: Vec<Piece>) -> usize {
    let pos = i.min(word.len());
    for (k, p) in pieces.into_iter().enumerate() {
        word.insert(pos + k, p);
    }
    pos
}

/// Re-walk a surgery log: starting from the input word, each step's removed
/// pieces must match in place, and the final word must be empty (fully
/// filled). This reconstructs the triangulated disk symbolically.
pub fn verify_certificate(star: &StarCurve, cert: &FillingCertificate) -> Result<()> {
    let mut word = star.pieces.clone();
    for (si, step) in cert.log.iter().enumerate() {
        if word.len() != step.word_before {
            return Err(Error::InternalCheck(format!(
                "step {si}: word length {} != recorded {}",
                word.len(),
                step.word_before
            )));
        }
        match step.case {
            SurgeryCase::Base | SurgeryCase::Case2 => {
                // whole-word steps
                if word.len() != step.removed.len()
                    || !word.iter().zip(&step.removed).all(|(a, b)| a.approx_eq(b))
                {
                    return Err(Error::InternalCheck(format!("step {si}: word mismatch")));
                }
                word = step.added.clone();
            }
            _ => {
                let n = word.len();
                let count = step.removed.len();
                // find the match at the recorded position (modulo rotation
                // introduced by cyclic removal)
                let start = (0..n)
                    .find(|&off| {
                        (0..count).all(|k| word[(off + k) % n].approx_eq(&step.removed[k]))
                    })
                    .ok_or_else(|| {
                        Error::InternalCheck(format!("step {si}: removed pieces not found"))
                    })?;
                let removed = remove_cyclic(&mut word, start, count);
                debug_assert_eq!(removed.len(), count);
                let pos = start.min(word.len());
                insert_cyclic(&mut word, pos, step.added.clone());
            }
        }
        if word.len() != step.word_after {
            return Err(Error::InternalCheck(format!(
                "step {si}: word length {} after != recorded {}",
                word.len(),
                step.word_after
            )));
        }
    }
    if !word.is_empty() {
        return Err(Error::InternalCheck("log does not close the curve".into()));
    }
    let total: usize = cert.log.iter().map(|s| s.triangles).sum();
    if total != cert.triangles {
        return Err(Error::InternalCheck("triangle count mismatch".into()));
    }
    Ok(())
}

// ----------------------------------------------------------------------
// Audit
// ----------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct IsoperimetricAudit {
    pub trials: usize,
    /// `(input length, triangles)` per trial.
    pub points: Vec<(f64, f64)>,
    /// Envelope line `triangles <= A * length + B`.
    pub a: f64,
    pub b: f64,
    /// Correlation of least-squares residuals with `length^2`.
    pub residual_corr: f64,
    pub all_triangles_within_n: bool,
    pub all_diameters_within_r: bool,
}

/// Seeded random closed curves through the full pipeline; fits the envelope
/// `(A, B)` and reports residual linearity.
pub fn isoperimetric_audit(
    metric: &ModelMetric,
    constants: &FillingConstants,
    n_trials: usize,
    max_length: f64,
    seed: u64,
) -> Result<IsoperimetricAudit> {
    let outcomes: Vec<Result<(f64, f64, bool, bool)>> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = linalg::stream_rng(seed, trial as u64);
            let poly = random_closed_polyline(&mut rng, constants, max_length);
            let report = normalize_to_star(metric, constants, &poly)?;
            let cert = reduce_and_fill(metric, constants, &report.star)?;
            verify_certificate(&report.star, &cert)?;
            let within_n = cert.triangles <= report.star.word_length().max(1);
            let within_r = cert
                .log
                .iter()
                .all(|s| s.region_diameter <= constants.r + 1e-9);
            Ok((
                report.input_length,
                cert.triangles as f64,
                within_n,
                within_r,
            ))
        })
        .collect();
    let mut points = Vec::with_capacity(n_trials);
    let mut all_n = true;
    let mut all_r = true;
    for o in outcomes {
        let (len, tri, wn, wr) = o?;
        points.push((len, tri));
        all_n &= wn;
        all_r &= wr;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (slope, intercept) = linalg::linear_fit(&xs, &ys);
    let a = slope.max(0.0);
    let b = points
        .iter()
        .map(|(l, t)| t - a * l)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (slope * x + intercept))
        .collect();
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let residual_corr = linalg::correlation(&residuals, &sq).abs();
    Ok(IsoperimetricAudit {
        trials: n_trials,
        points,
        a,
        b,
        residual_corr,
        all_triangles_within_n: all_n,
        all_diameters_within_r: all_r,
    })
}

fn random_closed_polyline(
    rng: &mut impl Rng,
    constants: &FillingConstants,
    max_length: f64,
) -> ModelPolyline {
    let m = rng.gen_range(3..10);
    // depth budget chosen so typical lengths land well under max_length
    let max_depth = (max_length / 8.0).clamp(2.0, 9.0) * constants.t0;
    (0..m)
        .map(|_| {
            let x = rng.gen::<f64>();
            let t = (-(rng.gen::<f64>() * max_depth)).exp();
            (x, t)
        })
        .collect()
}

/// Seeded random star curve with word length at most `max_n`, for direct
/// surgery audits.
pub fn random_star_curve(
    metric: &ModelMetric,
    constants: &FillingConstants,
    seed: u64,
    max_n: usize,
) -> Result<StarCurve> {
    let mut rng = linalg::stream_rng(seed, 13);
    for _ in 0..64 {
        let poly = random_closed_polyline(&mut rng, constants, 40.0);
        let report = normalize_to_star(metric, constants, &poly)?;
        if report.star.word_length() > 0 && report.star.word_length() <= max_n {
            return Ok(report.star);
        }
    }
    Err(Error::Degenerate(
        "could not sample a star curve within the word budget".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ModelMetric, FillingConstants) {
        let m = ModelMetric::built_in();
        let c = derive_constants(&m);
        (m, c)
    }

    #[test]
    fn builtin_conditions_hold_exactly() {
        let (m, _) = setup();
        let (a, b, c) = m.condition_residuals(1000, 7);
        assert!(a < 1e-12 && b < 1e-12 && c < 1e-12, "residuals {a} {b} {c}");
    }

    #[test]
    fn derived_constants_match_formulas() {
        let (_, c) = setup();
        assert!((c.t0 - (2.0_f64.ln() + 0.1)).abs() < 1e-12, "T0 = {}", c.t0);
        assert!((c.l - 1.0).abs() < 1e-12, "L = {}", c.l);
        // R includes 2 C1 (C1 C2 + T0) = 3.586294 and 9L/2 = 4.5
        assert!((2.0 * (1.0 + c.t0) - 3.586_294_361_119_890_6).abs() < 1e-12);
        assert!(c.r >= 4.5 && c.r >= c.diam_band);
    }

    #[test]
    fn constants_monotone_in_c2() {
        let m1 = ModelMetric::custom(1.0, 1.0, 1.0, 1.0, |_x, t, v, w| (v.abs() + w.abs()) / t);
        let m2 = ModelMetric::custom(1.0, 2.0, 1.0, 1.0, |_x, t, v, w| (v.abs() + w.abs()) / t);
        let c1 = derive_constants(&m1);
        let c2 = derive_constants(&m2);
        assert!(c2.l >= c1.l && c2.r >= c1.r);
    }

    #[test]
    fn model_distance_vertical_exact() {
        let (m, _) = setup();
        let (lo, hi) = model_distance(&m, (0.3, 0.5), (0.3, 0.25));
        assert!((lo - 2.0_f64.ln()).abs() < 1e-12);
        assert!((hi - 2.0_f64.ln()).abs() < 1e-6, "upper = {hi}");
        let (lo, hi) = model_distance(&m, (0.3, 0.5), (0.3, 0.5));
        assert_eq!((lo, hi), (0.0, 0.0));
    }

    #[test]
    fn model_distance_symmetric_upper() {
        let (m, _) = setup();
        let (_, ab) = model_distance(&m, (0.1, 0.7), (0.6, 0.2));
        let (_, ba) = model_distance(&m, (0.6, 0.2), (0.1, 0.7));
        assert!((ab - ba).abs() < 1e-9, "{ab} vs {ba}");
    }

    #[test]
    fn star_curve_idempotent_normalization() {
        let (m, c) = setup();
        let t_level = |k: u32| (-c.t0 * k as f64).exp();
        // rectangle word: V down, H(level 1), V up, H(level 0)
        let star = StarCurve {
            pieces: vec![
                Piece::Vertical {
                    x: 0.0,
                    level: 0,
                    up: false,
                },
                Piece::Horizontal {
                    level: 1,
                    path: vec![0.0, 0.2],
                },
                Piece::Vertical {
                    x: 0.2,
                    level: 0,
                    up: true,
                },
                Piece::Horizontal {
                    level: 0,
                    path: vec![0.2, 0.0],
                },
            ],
        };
        star.validate(&m, &c).unwrap();
        let poly = star.to_polyline(&c);
        assert!((poly[0].1 - t_level(0)).abs() < 1e-12);
        let report = normalize_to_star(&m, &c, &poly).unwrap();
        assert_eq!(
            report.star.word_length(),
            star.word_length(),
            "idempotence on star words"
        );
        for (a, b) in report.star.pieces.iter().zip(&star.pieces) {
            assert!(a.approx_eq(b), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn normalization_reversal_same_word_length() {
        let (m, c) = setup();
        let poly: ModelPolyline = vec![
            (0.0, 0.9),
            (0.3, 0.2),
            (0.55, 0.05),
            (0.8, 0.4),
            (0.2, 0.65),
        ];
        let fwd = normalize_to_star(&m, &c, &poly).unwrap();
        // closed-curve reversal keeping the basepoint
        let mut rev = vec![poly[0]];
        rev.extend(poly[1..].iter().rev().copied());
        let bwd = normalize_to_star(&m, &c, &rev).unwrap();
        assert_eq!(fwd.star.word_length(), bwd.star.word_length());
    }

    #[test]
    fn circle_at_depth_word_bound() {
        let (m, c) = setup();
        // circle traversing M once at level e^{-1.5 T0}
        let t = (-1.5 * c.t0).exp();
        let poly: ModelPolyline = (0..16).map(|i| (i as f64 / 16.0, t)).collect();
        let report = normalize_to_star(&m, &c, &poly).unwrap();
        assert!(report.length_bound_ok);
        assert!(
            report.word_bound_ok,
            "N = {} bound = {}",
            report.star.word_length(),
            report.word_bound
        );
        let n_max = (1.0 + 1.0 / t) * (2.0 + 2.0 / c.t0);
        assert!((report.star.word_length() as f64) <= n_max);
    }

    #[test]
    fn rectangle_word_fills_within_n() {
        let (m, c) = setup();
        let star = StarCurve {
            pieces: vec![
                Piece::Vertical {
                    x: 0.0,
                    level: 0,
                    up: false,
                },
                Piece::Horizontal {
                    level: 1,
                    path: vec![0.0, 0.2],
                },
                Piece::Vertical {
                    x: 0.2,
                    level: 0,
                    up: true,
                },
                Piece::Horizontal {
                    level: 0,
                    path: vec![0.2, 0.0],
                },
            ],
        };
        let cert = reduce_and_fill(&m, &c, &star).unwrap();
        assert!(cert.triangles <= 4, "triangles = {}", cert.triangles);
        verify_certificate(&star, &cert).unwrap();
    }

    #[test]
    fn level_zero_curve_is_one_triangle() {
        let (m, c) = setup();
        let star = StarCurve {
            pieces: vec![
                Piece::Horizontal {
                    level: 0,
                    path: vec![0.0, 0.3],
                },
                Piece::Horizontal {
                    level: 0,
                    path: vec![0.3, 0.0],
                },
            ],
        };
        let cert = reduce_and_fill(&m, &c, &star).unwrap();
        assert_eq!(cert.triangles, 1);
    }

    #[test]
    fn empty_curve_zero_triangles() {
        let (m, c) = setup();
        let cert = reduce_and_fill(&m, &c, &StarCurve::default()).unwrap();
        assert_eq!(cert.triangles, 0);
        let report = normalize_to_star(&m, &c, &vec![(0.2, 0.5)]).unwrap();
        assert_eq!(report.star.word_length(), 0);
    }

    #[test]
    fn deep_valley_uses_case_1_or_3() {
        let (m, c) = setup();
        // V-down three levels and back up, with a short horizontal at depth
        let star = StarCurve {
            pieces: vec![
                Piece::Vertical {
                    x: 0.0,
                    level: 0,
                    up: false,
                },
                Piece::Vertical {
                    x: 0.0,
                    level: 1,
                    up: false,
                },
                Piece::Horizontal {
                    level: 2,
                    path: vec![0.0, 0.1],
                },
                Piece::Vertical {
                    x: 0.1,
                    level: 1,
                    up: true,
                },
                Piece::Vertical {
                    x: 0.1,
                    level: 0,
                    up: true,
                },
                Piece::Horizontal {
                    level: 0,
                    path: vec![0.1, 0.0],
                },
            ],
        };
        star.validate(&m, &c).unwrap();
        let cert = reduce_and_fill(&m, &c, &star).unwrap();
        assert!(cert.triangles <= star.word_length());
        assert!(cert.log.iter().any(|s| s.case == SurgeryCase::Case3a));
        verify_certificate(&star, &cert).unwrap();
    }

    #[test]
    fn random_star_curves_all_fill() {
        let (m, c) = setup();
        for seed in 0..25 {
            let star = random_star_curve(&m, &c, seed, 60).unwrap();
            let cert = reduce_and_fill(&m, &c, &star).unwrap();
            assert!(
                cert.triangles <= star.word_length(),
                "seed {seed}: {} > {}",
                cert.triangles,
                star.word_length()
            );
            for s in &cert.log {
                assert!(s.region_diameter <= c.r + 1e-9);
            }
            verify_certificate(&star, &cert).unwrap();
        }
    }

    #[test]
    fn audit_produces_linear_envelope() {
        let (m, c) = setup();
        let audit = isoperimetric_audit(&m, &c, 60, 60.0, 99).unwrap();
        assert!(audit.all_triangles_within_n);
        assert!(audit.all_diameters_within_r);
        assert!(audit.a.is_finite() && audit.b.is_finite());
        for (l, t) in &audit.points {
            assert!(*t <= audit.a * l + audit.b + 1e-9);
        }
    }

    #[test]
    fn doubling_a_curve_roughly_doubles_triangles() {
        let (m, c) = setup();
        let poly: ModelPolyline = vec![(0.0, 0.8), (0.35, 0.15), (0.7, 0.5), (0.1, 0.25)];
        let single = normalize_to_star(&m, &c, &poly).unwrap();
        let n1 = reduce_and_fill(&m, &c, &single.star).unwrap().triangles;
        let mut doubled = poly.clone();
        doubled.extend(poly.iter().copied());
        let twice = normalize_to_star(&m, &c, &doubled).unwrap();
        let n2 = reduce_and_fill(&m, &c, &twice.star).unwrap().triangles;
        assert!(n2 <= 2 * n1 + 4, "doubling: {n2} vs 2 * {n1}");
    }
}
