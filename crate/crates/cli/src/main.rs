//! `qhm` — command-line front end for the convex-domain metric toolkit.
//!
//! Subcommands compute metric values, distances, expansion audits, four-point
//! delta tables, witness rectangles, and filling certificates from domain
//! JSON files. Every output embeds the run configuration and toolkit version
//! and is byte-identical for a fixed seed, regardless of worker count.
//!
//! Exit codes: 0 ok, 2 input error, 3 precondition failure, 4 internal check
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use qhm_core::domains::body_from_json_str;
use qhm_core::filling::{self, ModelMetric};
use qhm_core::geodesy;
use qhm_core::hyperbolicity::{self, DyadicGrid, WitnessParams};
use qhm_core::metrics;
use qhm_core::{ConvexBody, Error, Frame, Tolerances};

#[derive(Parser)]
#[command(
    name = "qhm",
    version,
    about = "Generalized quasi-hyperbolic metric toolkit"
)]
struct Cli {
    #[command(flatten)]
    run: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunConfig {
    /// Seed for all sampled computations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory; results and inputs are persisted there.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format for tabular results.
    #[arg(long, global = true, default_value = "json",
          value_parser = ["json", "csv", "gnuplot"])]
    format: String,
    /// Worker threads (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Tolerance overrides, NAME=VAL (repeatable).
    #[arg(long = "tol", global = true, value_name = "NAME=VAL")]
    tolerances: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// q^(k)(p; v) with bracket and achieving frame.
    Metric {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, value_name = "X1,X2,..")]
        p: String,
        #[arg(long, value_name = "V1,V2,..")]
        v: String,
        #[arg(long)]
        k: usize,
    },
    /// dist^(k)(p, q) two-sided bracket with witness path.
    Dist {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        k: usize,
    },
    /// Hilbert cross-ratio distance.
    Hilbert {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
    },
    /// Boundary expansion audit: per-sample exponent fits and a verdict.
    Expansion {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 24)]
        boundary_samples: usize,
        #[arg(long, default_value_t = 2)]
        frame_samples: usize,
        #[arg(long, default_value_t = 4)]
        jmin: u32,
        #[arg(long, default_value_t = 14)]
        jmax: u32,
    },
    /// Four-point delta table across sample depths.
    Delta4 {
        #[arg(long)]
        domain: PathBuf,
        /// Use dist^(k) bounds instead of the Hilbert metric.
        #[arg(long)]
        k: Option<usize>,
        /// Depth exponents: points reach depth 2^-j per table row.
        #[arg(long, default_value = "6,8,10", value_name = "J1,J2,..")]
        depths: String,
        #[arg(long, default_value_t = 30)]
        points: usize,
    },
    /// Non-slimness witness rectangle from a flat (or forced) direction.
    Witness {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 5.0)]
        b: f64,
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
    /// Curve-surgery audit on the model metric.
    Filling {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 100.0)]
        max_length: f64,
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long, default_value_t = 1.0)]
        c3: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.run.workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.run.workers)
            .build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Parse(_))
        | Some(Error::InvalidBody(_))
        | Some(Error::InvalidInput(_))
        | Some(Error::DimensionMismatch { .. }) => 2,
        Some(Error::InternalCheck(_)) => 4,
        Some(_) => 3,
        None => 2,
    }
}

fn tolerances(run: &RunConfig) -> anyhow::Result<Tolerances> {
    let mut tol = Tolerances::default();
    for spec in &run.tolerances {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("bad --tol `{spec}`, expected NAME=VAL")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| Error::InvalidInput(format!("non-numeric tolerance value in `{spec}`")))?;
        tol.set(name, value)?;
    }
    Ok(tol)
}

fn parse_vector(text: &str) -> anyhow::Result<DVector<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::Parse(format!("bad vector `{text}`")))?;
    if values.is_empty() {
        return Err(Error::Parse("empty vector".into()).into());
    }
    Ok(DVector::from_vec(values))
}

fn load_body(path: &PathBuf) -> anyhow::Result<(ConvexBody, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    let body = body_from_json_str(&text)?;
    Ok((body, text))
}

// The worker count is deliberately not embedded: outputs are byte-identical
// across worker counts and recording one would break that.
fn config_json(run: &RunConfig) -> serde_json::Value {
    json!({
        "version": qhm_core::VERSION,
        "seed": run.seed,
        "format": run.format,
        "tol": run.tolerances,
    })
}

/// Print the payload and persist it (with inputs) under --out if given.
fn emit(
    run: &RunConfig,
    name: &str,
    payload: &serde_json::Value,
    table: Option<(&[String], &str)>,
    domain_text: Option<&str>,
) -> anyhow::Result<()> {
    let wrapped = json!({ "config": config_json(run), "result": payload });
    let body = match (run.format.as_str(), table) {
        ("csv", Some((rows, header))) | ("gnuplot", Some((rows, header))) => {
            let gnuplot = run.format == "gnuplot";
            let mut out = String::new();
            out.push_str(&format!(
                "# version={} seed={}\n",
                qhm_core::VERSION,
                run.seed
            ));
            if gnuplot {
                out.push_str(&format!("# {}\n", header.replace(',', " ")));
            } else {
                out.push_str(&format!("{header}\n"));
            }
            for r in rows {
                let row = if gnuplot {
                    r.replace(',', " ")
                } else {
                    r.clone()
                };
                out.push_str(&row);
                out.push('\n');
            }
            out
        }
        _ => serde_json::to_string_pretty(&wrapped)? + "\n",
    };
    print!("{body}");
    if let Some(dir) = &run.out {
        std::fs::create_dir_all(dir)?;
        let ext = if run.format == "json" || table.is_none() {
            "json"
        } else {
            run.format.as_str()
        };
        std::fs::write(dir.join(format!("{name}.{ext}")), &body)?;
        // persist inputs alongside outputs
        std::fs::write(
            dir.join(format!("{name}.config.json")),
            serde_json::to_string_pretty(&config_json(run))? + "\n",
        )?;
        if let Some(text) = domain_text {
            std::fs::write(dir.join(format!("{name}.domain.json")), text)?;
        }
    }
    Ok(())
}

fn frame_json(frame: &Frame) -> serde_json::Value {
    json!({
        "k": frame.dim_k(),
        "hash": format!("{:016x}", frame.hash()),
        "columns": frame
            .columns()
            .iter()
            .map(|c| c.iter().copied().collect::<Vec<f64>>())
            .collect::<Vec<_>>(),
    })
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let tol = tolerances(&cli.run)?;
    match &cli.command {
        Command::Metric { domain, p, v, k } => {
            let (body, text) = load_body(domain)?;
            let p = parse_vector(p)?;
            let v = parse_vector(v)?;
            let m = metrics::qk_norm(&body, &tol, &p, &v, *k)?;
            let payload = json!({
                "p": p.iter().copied().collect::<Vec<f64>>(),
                "v": v.iter().copied().collect::<Vec<f64>>(),
                "k": k,
                "value": m.value,
                "delta": if m.delta.is_finite() { json!(m.delta) } else { json!("inf") },
                "bracket": [m.lower, m.upper],
                "frame": frame_json(&m.frame),
            });
            emit(&cli.run, "metric", &payload, None, Some(&text))
        }
        Command::Dist { domain, p, q, k } => {
            let (body, text) = load_body(domain)?;
            let p = parse_vector(p)?;
            let q = parse_vector(q)?;
            let res = geodesy::distance_qk(&body, &tol, &p, &q, *k)?;
            emit(&cli.run, "dist", &res.to_json(), None, Some(&text))
        }
        Command::Hilbert { domain, p, q } => {
            let (body, text) = load_body(domain)?;
            let p = parse_vector(p)?;
            let q = parse_vector(q)?;
            let d = geodesy::hilbert_distance(&body, &p, &q)?;
            emit(
                &cli.run,
                "hilbert",
                &json!({ "value": d }),
                None,
                Some(&text),
            )
        }
        Command::Expansion {
            domain,
            k,
            boundary_samples,
            frame_samples,
            jmin,
            jmax,
        } => {
            let (body, text) = load_body(domain)?;
            let grid = DyadicGrid {
                j_min: *jmin,
                j_max: *jmax,
            };
            let audit = hyperbolicity::expansion_audit(
                &body,
                &tol,
                *k,
                *boundary_samples,
                *frame_samples,
                &grid,
                cli.run.seed,
            )?;
            let rows: Vec<String> = audit
                .rows
                .iter()
                .map(|r| {
                    format!(
                        "\"{}\",{:016x},{:.6},{:.6},{:.6},{:?},{}",
                        r.x.iter()
                            .map(|v| format!("{v:.6}"))
                            .collect::<Vec<_>>()
                            .join(" "),
                        r.frame_hash,
                        r.lambda,
                        r.c,
                        r.residual,
                        r.verdict,
                        r.tangential,
                    )
                })
                .collect();
            let payload = json!({
                "verdict": audit.verdict,
                "min_lambda": audit.min_lambda,
                "max_c": audit.max_c,
                "flat_count": audit.flat_count,
                "rows": audit.rows,
            });
            emit(
                &cli.run,
                "expansion",
                &payload,
                Some((&rows, "x,V-hash,lambda,C,residual,verdict,tangential")),
                Some(&text),
            )
        }
        Command::Delta4 {
            domain,
            k,
            depths,
            points,
        } => {
            let (body, text) = load_body(domain)?;
            let depth_list: Vec<u32> = depths
                .split(',')
                .map(|s| s.trim().parse::<u32>())
                .collect::<Result<_, _>>()
                .map_err(|_| Error::Parse(format!("bad --depths `{depths}`")))?;
            let mut rows = Vec::new();
            let mut table = Vec::new();
            for &j in &depth_list {
                let delta = delta4_at_depth(&body, &tol, *k, j, *points, cli.run.seed)?;
                table.push(format!("{j},{delta:.6}"));
                rows.push(json!({ "depth_exponent": j, "delta": delta }));
            }
            emit(
                &cli.run,
                "delta4",
                &json!({ "rows": rows }),
                Some((&table, "depth_exponent,delta")),
                Some(&text),
            )
        }
        Command::Witness { domain, k, a, b, n } => {
            let (body, text) = load_body(domain)?;
            // pick a flat witness from the audit, or force the weakest
            // tangential direction
            let audit = hyperbolicity::expansion_audit(
                &body,
                &tol,
                *k,
                16,
                2,
                &DyadicGrid::default(),
                cli.run.seed,
            )?;
            let (x, frame, forced) = if let Some((x, f)) = audit.flat_witnesses.first() {
                (x.clone(), f.clone(), false)
            } else {
                weakest_tangential_direction(&body, &tol, *k, cli.run.seed)?
            };
            let report = hyperbolicity::nonhyperbolicity_witness(
                &body,
                &tol,
                (&x, &frame),
                WitnessParams {
                    a: *a,
                    b: *b,
                    n: *n,
                },
            )?;
            let payload = json!({
                "forced": forced,
                "witness_x": x.iter().copied().collect::<Vec<f64>>(),
                "report": report,
            });
            emit(&cli.run, "witness", &payload, None, Some(&text))
        }
        Command::Filling {
            trials,
            max_length,
            c1,
            c2,
            c3,
            lambda,
        } => {
            let metric = if (*c1, *c2, *c3, *lambda) == (1.0, 1.0, 1.0, 1.0) {
                ModelMetric::built_in()
            } else {
                // the declared constants hold for |v|/t^lambda + |w|/t when
                // C1, C2 >= 1 >= C3; the residual check below reports any
                // inconsistency before surgery starts
                let l = *lambda;
                ModelMetric::custom(*c1, *c2, *c3, l, move |_x, t, v, w| {
                    v.abs() / t.powf(l) + w.abs() / t
                })
            };
            let (ra, rb, rc) = metric.condition_residuals(1000, cli.run.seed);
            if ra.max(rb).max(rc) > 1e-9 {
                return Err(Error::Precondition(format!(
                    "metric violates conditions (a)/(b)/(c): residuals {ra:.2e} {rb:.2e} {rc:.2e}"
                ))
                .into());
            }
            let constants = filling::derive_constants(&metric);
            let audit = filling::isoperimetric_audit(
                &metric,
                &constants,
                *trials,
                *max_length,
                cli.run.seed,
            )?;
            let summary = if audit.all_triangles_within_n {
                "all certificates <= N(sigma)"
            } else {
                "certificate exceeded N(sigma)"
            };
            let payload = json!({
                "constants": constants,
                "summary": summary,
                "envelope": { "A": audit.a, "B": audit.b },
                "residual_corr": audit.residual_corr,
                "all_diameters_within_r": audit.all_diameters_within_r,
                "trials": audit.trials,
                "points": audit.points,
            });
            emit(&cli.run, "filling", &payload, None, None)
        }
    }
}

/// Distance matrix at a depth schedule and its four-point delta.
fn delta4_at_depth(
    body: &ConvexBody,
    tol: &Tolerances,
    k: Option<usize>,
    depth_exp: u32,
    n_points: usize,
    seed: u64,
) -> anyhow::Result<f64> {
    let pts = depth_sample_points(body, depth_exp, n_points, seed)?;
    let n = pts.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = match k {
                None => geodesy::hilbert_distance(body, &pts[i], &pts[j])?,
                Some(k) => geodesy::distance_qk(body, tol, &pts[i], &pts[j], k)?.upper,
            };
            m[(i, j)] = d;
            m[(j, i)] = d;
        }
    }
    Ok(hyperbolicity::four_point_delta(&m, seed)?)
}

/// Deterministic point cloud with boundary depths log-spaced down to
/// `2^-depth_exp`.
fn depth_sample_points(
    body: &ConvexBody,
    depth_exp: u32,
    n_points: usize,
    seed: u64,
) -> anyhow::Result<Vec<DVector<f64>>> {
    use rand::Rng;
    let mut rng = qhm_core::linalg::stream_rng(seed, 1234);
    let mut pts = Vec::with_capacity(n_points);
    let d_min = 0.5_f64.powi(depth_exp as i32);
    for i in 0..n_points {
        let u = qhm_core::linalg::random_unit_vector(body.real_dim(), &mut rng);
        let hit = (body.boundary_point(&u)? - body.base_point()).norm();
        // log-spaced depth in [d_min, 1/2] of the ray length
        let f = i as f64 / (n_points - 1).max(1) as f64;
        let depth = 0.5 * (2.0 * d_min).powf(f);
        let jitter = 0.9 + 0.2 * rng.gen::<f64>();
        pts.push(body.base_point() + u * (hit * (1.0 - depth * jitter).max(0.0)));
    }
    Ok(pts)
}

/// Tangential direction with the smallest fitted exponent (forced witness).
fn weakest_tangential_direction(
    body: &ConvexBody,
    tol: &Tolerances,
    k: usize,
    seed: u64,
) -> anyhow::Result<(DVector<f64>, Frame, bool)> {
    let audit = hyperbolicity::expansion_audit(body, tol, k, 16, 2, &DyadicGrid::default(), seed)?;
    let best = audit
        .rows
        .iter()
        .filter(|r| r.tangential && r.lambda.is_finite())
        .min_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap())
        .ok_or_else(|| Error::Degenerate("no tangential sample available".into()))?;
    // rebuild the frame at that boundary point deterministically
    let x = DVector::from_vec(best.x.clone());
    let normals = body.supporting_normals_at(&x)?;
    let completion =
        qhm_core::linalg::orthogonal_complement(&[normals[0].clone()], body.real_dim());
    let v0 = completion
        .first()
        .cloned()
        .ok_or_else(|| Error::Degenerate("no tangential direction".into()))?;
    let frame = Frame::containing(body.field(), &v0, k, &completion)?;
    Ok((x, frame, true))
}
