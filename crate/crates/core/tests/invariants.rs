//! Deterministic cross-module invariants: optimizer soundness against brute
//! force, distance triangle inequalities, expansion scale invariance, and
//! recorded regression fixtures.

use nalgebra::{DMatrix, DVector};

use qhm_core::domains::{ConvexBody, ScalarField};
use qhm_core::frame::Frame;
use qhm_core::geodesy;
use qhm_core::hyperbolicity::{self, DyadicGrid};
use qhm_core::linalg;
use qhm_core::metrics;
use qhm_core::Tolerances;

fn vecd(v: &[f64]) -> DVector<f64> {
    DVector::from_vec(v.to_vec())
}

/// Optimizer soundness: delta_k dominates a 10^4-frame brute-force sweep
/// (max of slice minima over random frames containing v), minus tolerance.
#[test]
fn delta_k_dominates_brute_force_sweep() {
    let t = Tolerances::default();
    let ell = ConvexBody::ellipsoid(
        vecd(&[0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[0.25, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.25]),
        vecd(&[0.0, 0.0, 0.0]),
        ScalarField::Real,
    )
    .unwrap();
    let p = vecd(&[0.4, 0.1, -0.2]);
    let v = vecd(&[0.3, 1.0, 0.5]);
    let (found, _) = metrics::delta_k(&ell, &t, &p, &v, 2).unwrap();

    let mut rng = linalg::stream_rng(7, 7);
    let mut brute: f64 = 0.0;
    for _ in 0..10_000 {
        let frame = Frame::random_containing(ScalarField::Real, &v, 2, &mut rng).unwrap();
        // inner minimum over a modest direction sample of the slice sphere
        let mut slice = f64::INFINITY;
        for w in frame.span_sphere_samples(64) {
            let hit = ell
                .ray_hit(&qhm_core::Ray::new(p.clone(), w).unwrap())
                .unwrap();
            slice = slice.min(hit);
        }
        brute = brute.max(slice);
    }
    assert!(
        found >= brute * (1.0 - 1e-4) - t.tol_opt,
        "optimizer {found} below brute force {brute}"
    );
}

/// dist^(k) triangle inequality up to optimizer tolerance on random triples.
#[test]
fn distance_triangle_inequality() {
    let t = Tolerances::default();
    let bodies = [ConvexBody::unit_ball(2), ConvexBody::cube(2, 1.0)];
    for body in &bodies {
        let mut rng = linalg::stream_rng(31, 3);
        for _ in 0..6 {
            let mut sample = || loop {
                let p = vecd(&[
                    2.0 * rand::Rng::gen::<f64>(&mut rng) - 1.0,
                    2.0 * rand::Rng::gen::<f64>(&mut rng) - 1.0,
                ]);
                if body.contains(&p).unwrap() && body.boundary_distance(&p).unwrap() > 0.1 {
                    break p;
                }
            };
            let (a, b, c) = (sample(), sample(), sample());
            let dab = geodesy::distance_qk(body, &t, &a, &b, 1).unwrap().upper;
            let dbc = geodesy::distance_qk(body, &t, &b, &c, 1).unwrap().upper;
            let dac = geodesy::distance_qk(body, &t, &a, &c, 1).unwrap().upper;
            let scale = dac.max(dab + dbc);
            assert!(
                dac <= dab + dbc + 3e-4 * scale.max(1.0),
                "triangle violated: {dac} > {dab} + {dbc}"
            );
        }
    }
}

/// Sampled directional minimum of line distances reproduces the boundary
/// distance on bounded bodies.
#[test]
fn boundary_distance_is_min_line_distance() {
    let bodies = [ConvexBody::unit_ball(2), ConvexBody::cube(2, 1.0)];
    for body in &bodies {
        let p = vecd(&[0.35, -0.2]);
        let bd = body.boundary_distance(&p).unwrap();
        let mut min_line = f64::INFINITY;
        for u in linalg::unit_sphere_samples(2, 512, 3) {
            min_line = min_line.min(body.line_distance(&p, &u).unwrap());
        }
        assert!(
            (min_line - bd).abs() <= 1e-4 * bd.max(1.0),
            "{min_line} vs {bd}"
        );
    }
}

/// Expansion profiles are scale-invariant: scaling body and points by c
/// scales g pointwise by c and leaves the exponent unchanged.
#[test]
fn expansion_scale_invariance() {
    let t = Tolerances::default();
    let grid = DyadicGrid::default();
    let frame = Frame::line(ScalarField::Real, &vecd(&[0.0, 1.0])).unwrap();
    let c = 3.0;
    let small = ConvexBody::unit_ball(2);
    let big = ConvexBody::pball(
        qhm_core::domains::PExponent::Finite(2.0),
        c,
        vecd(&[0.0, 0.0]),
        vecd(&[0.0, 0.0]),
        ScalarField::Real,
    )
    .unwrap();
    let p1 = hyperbolicity::expansion_profile(
        &small,
        &t,
        &vecd(&[-1.0, 0.0]),
        &vecd(&[0.0, 0.0]),
        &frame,
        &grid,
    )
    .unwrap();
    let p2 = hyperbolicity::expansion_profile(
        &big,
        &t,
        &vecd(&[-c, 0.0]),
        &vecd(&[0.0, 0.0]),
        &frame,
        &grid,
    )
    .unwrap();
    assert_eq!(p1.entries.len(), p2.entries.len());
    for ((t1, g1), (t2, g2)) in p1.entries.iter().zip(&p2.entries) {
        assert_eq!(t1, t2);
        assert!(
            (g2 - c * g1).abs() <= 1e-9 * g2.max(1.0),
            "{g2} vs {}",
            c * g1
        );
    }
    let f1 = hyperbolicity::fit_expansion(&p1, &t);
    let f2 = hyperbolicity::fit_expansion(&p2, &t);
    assert!((f1.lambda - f2.lambda).abs() < 1e-9);
}

/// Profiles are nondecreasing toward the interior on the convex fixtures.
#[test]
fn profiles_monotone_on_fixtures() {
    let t = Tolerances::default();
    let grid = DyadicGrid::default();
    let cases: Vec<(ConvexBody, DVector<f64>, DVector<f64>, DVector<f64>)> = vec![
        (
            ConvexBody::unit_ball(2),
            vecd(&[-1.0, 0.0]),
            vecd(&[0.0, 0.0]),
            vecd(&[0.0, 1.0]),
        ),
        (
            ConvexBody::cube(2, 1.0),
            vecd(&[0.0, -1.0]),
            vecd(&[0.0, 0.0]),
            vecd(&[1.0, 0.0]),
        ),
        (
            ConvexBody::quartic_graph(2.0, 1.1),
            vecd(&[0.0, 0.0]),
            vecd(&[1.0, 0.0]),
            vecd(&[0.0, 1.0]),
        ),
    ];
    for (body, x, p, dir) in cases {
        let frame = Frame::line(ScalarField::Real, &dir).unwrap();
        let profile = hyperbolicity::expansion_profile(&body, &t, &x, &p, &frame, &grid).unwrap();
        for w in profile.entries.windows(2) {
            assert!(
                w[1].1 >= w[0].1 - 1e-9,
                "profile dipped: {:?} after {:?}",
                w[1],
                w[0]
            );
        }
    }
}

/// The Hilbert sandwich holds at the distance level on a polytope too:
/// d_H <= dist^(1) <= 2 d_H, with the solver's headroom.
#[test]
fn hilbert_sandwich_on_polytope() {
    let t = Tolerances::default();
    // seeded hexagon
    let mut rng = linalg::stream_rng(61, 1);
    let halfspaces: Vec<qhm_core::domains::Halfspace> = (0..6)
        .map(|i| {
            let angle =
                2.0 * std::f64::consts::PI * (i as f64 + 0.3 * rand::Rng::gen::<f64>(&mut rng))
                    / 6.0;
            qhm_core::domains::Halfspace {
                normal: vecd(&[angle.cos(), angle.sin()]),
                offset: 0.8 + 0.4 * rand::Rng::gen::<f64>(&mut rng),
            }
        })
        .collect();
    let poly = ConvexBody::polytope(halfspaces, vecd(&[0.0, 0.0]), ScalarField::Real).unwrap();
    let mut pairs = 0;
    let mut rng = linalg::stream_rng(61, 2);
    while pairs < 25 {
        let mut sample = || loop {
            let u = linalg::random_unit_vector(2, &mut rng);
            let hit = (poly.boundary_point(&u).unwrap() - poly.base_point()).norm();
            let p = poly.base_point() + u * (hit * 0.9 * rand::Rng::gen::<f64>(&mut rng));
            if poly.contains(&p).unwrap() {
                break p;
            }
        };
        let p = sample();
        let q = sample();
        if (&p - &q).norm() < 1e-3 {
            continue;
        }
        pairs += 1;
        let dh = geodesy::hilbert_distance(&poly, &p, &q).unwrap();
        let ub = geodesy::distance_qk(&poly, &t, &p, &q, 1).unwrap().upper;
        assert!(
            dh <= ub * (1.0 + 1e-3),
            "Hilbert {dh} above dist^(1) ub {ub}"
        );
        assert!(
            ub <= 2.0 * dh * (1.0 + 2e-2),
            "dist^(1) ub {ub} above 2 d_H {dh}"
        );
    }
}

/// Recorded regression fixture: the straight chord at depth 0.5 in the
/// square, parametrized by Euclidean arc length, is NOT a (2, 0)
/// quasi-geodesic for dist^(1) - the upper side fails near the endpoints.
#[test]
fn square_chord_quasi_geodesic_fixture() {
    let t = Tolerances::default();
    let square = ConvexBody::cube(2, 1.0);
    let curve = |s: f64| vecd(&[s, -0.5]);
    let report =
        geodesy::quasi_geodesic_check(&square, &t, &curve, (-0.9, 0.9), 1, 2.0, 0.0, 60, 9)
            .unwrap();
    assert!(
        !report.pass,
        "recorded outcome is FAIL, got pass with {report:?}"
    );
    assert!(report.failures > 0);
}

/// Independent second route for dist^(1): Dijkstra over a dense grid graph
/// with quadrature edge weights. Both are upper bounds of the true infimum;
/// they must agree with each other within discretization error and dominate
/// the hyperplane lower bound.
#[test]
fn distance_matches_grid_dijkstra() {
    let t = Tolerances::default();
    let disk = ConvexBody::unit_ball(2);
    let p = vecd(&[-0.55, 0.2]);
    let q = vecd(&[0.62, -0.35]);
    let res = geodesy::distance_qk(&disk, &t, &p, &q, 1).unwrap();

    // grid nodes inside the disk plus the endpoints
    let n = 41;
    let mut nodes: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let x = -0.95 + 1.9 * i as f64 / (n - 1) as f64;
            let y = -0.95 + 1.9 * j as f64 / (n - 1) as f64;
            let v = vecd(&[x, y]);
            if v.norm() < 0.97 {
                nodes.push(v);
            }
        }
    }
    nodes.push(p.clone());
    nodes.push(q.clone());
    let idx_p = nodes.len() - 2;
    let idx_q = nodes.len() - 1;
    let h = 1.9 / (n - 1) as f64;
    // neighbor radius allows diagonal and knight-style moves
    let reach = 2.3 * h;
    let edge = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        let path = geodesy::PolylinePath::new(&disk, vec![a.clone(), b.clone()]).unwrap();
        geodesy::path_length_qk(&disk, &t, &path, 1).unwrap()
    };
    // Dijkstra with lazy edge evaluation
    let mut dist = vec![f64::INFINITY; nodes.len()];
    let mut done = vec![false; nodes.len()];
    dist[idx_p] = 0.0;
    for _ in 0..nodes.len() {
        let mut u = usize::MAX;
        let mut best = f64::INFINITY;
        for (i, d) in dist.iter().enumerate() {
            if !done[i] && *d < best {
                best = *d;
                u = i;
            }
        }
        if u == usize::MAX || u == idx_q {
            break;
        }
        done[u] = true;
        for v in 0..nodes.len() {
            if !done[v] && (&nodes[u] - &nodes[v]).norm() <= reach {
                let w = edge(&nodes[u], &nodes[v]);
                if dist[u] + w < dist[v] {
                    dist[v] = dist[u] + w;
                }
            }
        }
    }
    let sp = dist[idx_q];
    assert!(sp.is_finite());
    // both are upper bounds; the grid path is coarser, so it sits above the
    // polyline result but within discretization error
    assert!(
        res.upper <= sp * (1.0 + 1e-6),
        "solver {} above grid {}",
        res.upper,
        sp
    );
    assert!(
        sp <= res.upper * 1.05,
        "grid {} more than 5% above solver {}",
        sp,
        res.upper
    );
    assert!(res.lower <= sp * (1.0 + 1e-9));
}

/// The complex line distance (theta-grid plus golden refinement over the
/// J-span) matches dense brute force on an anisotropic body in C^2.
#[test]
fn complex_line_distance_matches_brute_force() {
    // ellipsoid in R^4 with distinct axes, viewed as a complex body
    let shape = DMatrix::from_diagonal(&vecd(&[1.0, 0.25, 4.0, 0.5]));
    let body = ConvexBody::ellipsoid(
        DVector::zeros(4),
        shape,
        DVector::zeros(4),
        ScalarField::Complex,
    )
    .unwrap();
    let p = vecd(&[0.1, -0.2, 0.05, 0.15]);
    let v = vecd(&[0.4, 0.3, -0.2, 0.6]);
    let fast = body.line_distance(&p, &v).unwrap();
    // brute force over the real directions of the complex line
    let u = v.normalize();
    let ju = ScalarField::Complex.complex_structure(&u).unwrap();
    let mut brute = f64::INFINITY;
    for i in 0..4096 {
        let theta = std::f64::consts::PI * i as f64 / 4096.0;
        let w = (&u * theta.cos() + &ju * theta.sin()).normalize();
        for dir in [w.clone(), -w] {
            let hit = body
                .ray_hit(&qhm_core::Ray::new(p.clone(), dir).unwrap())
                .unwrap();
            brute = brute.min(hit);
        }
    }
    assert!(
        (fast - brute).abs() <= 1e-6 * brute.max(1.0),
        "fast {fast} vs brute {brute}"
    );
}

/// Regression bound recorded from the oracle run: on the square's flat face
/// the witness growth gains at least 0.5 per unit of depth gap beyond 4.
#[test]
fn witness_growth_rate_regression() {
    let t = Tolerances::default();
    let sq = ConvexBody::cube(2, 1.0);
    let x = vecd(&[0.0, -1.0]);
    let frame = Frame::line(ScalarField::Real, &vecd(&[1.0, 0.0])).unwrap();
    let growth = |ba: f64| {
        hyperbolicity::nonhyperbolicity_witness(
            &sq,
            &t,
            (&x, &frame),
            hyperbolicity::WitnessParams {
                a: 1.0,
                b: 1.0 + ba,
                n: 8,
            },
        )
        .unwrap()
        .growth
    };
    let g4 = growth(4.0);
    let g6 = growth(6.0);
    assert!(g6 - g4 >= 0.5 * 2.0, "growth rate too small: {g4} -> {g6}");
}

/// DistanceResult JSON carries both bounds and the witness path.
#[test]
fn distance_result_serialization() {
    let t = Tolerances::default();
    let ball = ConvexBody::unit_ball(2);
    let res = geodesy::distance_qk(&ball, &t, &vecd(&[0.0, 0.0]), &vecd(&[0.5, 0.0]), 1).unwrap();
    let json = res.to_json();
    assert!(json["upper"].as_f64().unwrap() >= json["lower"].as_f64().unwrap());
    assert!(json["witness"].as_array().unwrap().len() >= 2);
    // path JSON round-trip
    let path = geodesy::PolylinePath::from_json(&ball, &json["witness"]).unwrap();
    assert_eq!(
        path.vertices().len(),
        json["witness"].as_array().unwrap().len()
    );
}

/// Star-curve and certificate serialization shapes.
#[test]
fn filling_serialization_shapes() {
    use qhm_core::filling::{self, ModelMetric};
    let m = ModelMetric::built_in();
    let c = filling::derive_constants(&m);
    let star = filling::random_star_curve(&m, &c, 3, 40).unwrap();
    let json = star.to_json();
    let first = &json.as_array().unwrap()[0];
    assert!(first.get("type").is_some());
    let cert = filling::reduce_and_fill(&m, &c, &star).unwrap();
    let cert_json = serde_json::to_value(&cert).unwrap();
    assert!(cert_json["triangles"].as_u64().unwrap() <= star.word_length() as u64);
    assert!(cert_json["log"].as_array().unwrap().len() >= 1);
}
