//! Domain specification files.
//!
//! JSON schema (one object per file, unknown keys rejected):
//!
//! ```json
//! {"type": "polytope",  "field": "real", "dim": 2, "base_point": [0, 0],
//!  "halfspaces": [{"normal": [1, 0], "offset": 1}, ...]}
//! {"type": "ellipsoid", "field": "real", "dim": 2, "base_point": [0, 0],
//!  "center": [0, 0], "shape": [[0.25, 0], [0, 1]]}
//! {"type": "pball",     "field": "real", "dim": 2, "base_point": [0, 0],
//!  "center": [0, 0], "exponent": 2, "scale": 1}        // exponent may be "inf"
//! {"type": "halfspace", "field": "real", "dim": 3, "base_point": [1, 0, 0]}
//! ```
//!
//! `dim` is the K-dimension; for `"field": "complex"` all coordinate arrays
//! have `2 * dim` real entries.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use super::{ConvexBody, Halfspace, PExponent, ScalarField};
use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum FieldTag {
    Real,
    Complex,
}

impl From<FieldTag> for ScalarField {
    fn from(t: FieldTag) -> ScalarField {
        match t {
            FieldTag::Real => ScalarField::Real,
            FieldTag::Complex => ScalarField::Complex,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfspaceSpec {
    normal: Vec<f64>,
    offset: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolytopeSpec {
    #[serde(rename = "type")]
    _type: String,
    field: FieldTag,
    dim: usize,
    base_point: Vec<f64>,
    halfspaces: Vec<HalfspaceSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EllipsoidSpec {
    #[serde(rename = "type")]
    _type: String,
    field: FieldTag,
    dim: usize,
    base_point: Vec<f64>,
    center: Vec<f64>,
    shape: Vec<Vec<f64>>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(untagged)]
enum ExponentSpec {
    Number(f64),
    Word(#[allow(dead_code)] InfWord),
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum InfWord {
    Inf,
    Infinity,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PBallSpec {
    #[serde(rename = "type")]
    _type: String,
    field: FieldTag,
    dim: usize,
    base_point: Vec<f64>,
    center: Vec<f64>,
    exponent: ExponentSpec,
    scale: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfSpaceSpec {
    #[serde(rename = "type")]
    _type: String,
    field: FieldTag,
    dim: usize,
    base_point: Vec<f64>,
}

fn check_len(name: &str, v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Parse(format!(
            "`{name}` has {} entries, expected {expected}",
            v.len()
        )));
    }
    Ok(())
}

/// Parse a domain from JSON text. Unknown keys are rejected with a message
/// naming the offending key (via serde's unknown-field error).
pub fn body_from_json_str(text: &str) -> Result<ConvexBody> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    body_from_json(&value)
}

pub fn body_from_json(value: &serde_json::Value) -> Result<ConvexBody> {
    let ty = value
        .get("type")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Parse("missing or non-string `type` key".into()))?;
    match ty {
        "polytope" => {
            let s: PolytopeSpec = serde_json::from_value(value.clone())?;
            let field: ScalarField = s.field.into();
            let real_dim = s.dim * field.real_dim_factor();
            check_len("base_point", &s.base_point, real_dim)?;
            let mut hs = Vec::with_capacity(s.halfspaces.len());
            for (i, h) in s.halfspaces.into_iter().enumerate() {
                check_len(&format!("halfspaces[{i}].normal"), &h.normal, real_dim)?;
                hs.push(Halfspace {
                    normal: DVector::from_vec(h.normal),
                    offset: h.offset,
                });
            }
            ConvexBody::polytope(hs, DVector::from_vec(s.base_point), field)
        }
        "ellipsoid" => {
            let s: EllipsoidSpec = serde_json::from_value(value.clone())?;
            let field: ScalarField = s.field.into();
            let real_dim = s.dim * field.real_dim_factor();
            check_len("base_point", &s.base_point, real_dim)?;
            check_len("center", &s.center, real_dim)?;
            if s.shape.len() != real_dim {
                return Err(Error::Parse(format!(
                    "`shape` has {} rows, expected {real_dim}",
                    s.shape.len()
                )));
            }
            let mut m = DMatrix::zeros(real_dim, real_dim);
            for (i, row) in s.shape.iter().enumerate() {
                check_len(&format!("shape[{i}]"), row, real_dim)?;
                for (j, v) in row.iter().enumerate() {
                    m[(i, j)] = *v;
                }
            }
            ConvexBody::ellipsoid(
                DVector::from_vec(s.center),
                m,
                DVector::from_vec(s.base_point),
                field,
            )
        }
        "pball" => {
            let s: PBallSpec = serde_json::from_value(value.clone())?;
            let field: ScalarField = s.field.into();
            let real_dim = s.dim * field.real_dim_factor();
            check_len("base_point", &s.base_point, real_dim)?;
            check_len("center", &s.center, real_dim)?;
            let exponent = match s.exponent {
                ExponentSpec::Number(p) => PExponent::Finite(p),
                ExponentSpec::Word(_) => PExponent::Infinity,
            };
            ConvexBody::pball(
                exponent,
                s.scale,
                DVector::from_vec(s.center),
                DVector::from_vec(s.base_point),
                field,
            )
        }
        "halfspace" => {
            let s: HalfSpaceSpec = serde_json::from_value(value.clone())?;
            let field: ScalarField = s.field.into();
            let real_dim = s.dim * field.real_dim_factor();
            check_len("base_point", &s.base_point, real_dim)?;
            ConvexBody::half_space(s.dim, field, DVector::from_vec(s.base_point))
        }
        other => Err(Error::Parse(format!(
            "unknown domain type `{other}` (expected polytope|ellipsoid|pball|halfspace)"
        ))),
    }
}
