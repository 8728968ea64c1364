//! JSON problem configuration and the expression form of the presets.

use std::path::Path;
use std::sync::Arc;

use mfd_core::assembly::{Field, ProblemKind, ProblemSpec, RotTreatment};
use mfd_core::dualmesh::DualMesh;
use mfd_core::io::read_mesh_json;
use mfd_core::presets::{preset, MeshFamily, PRESET_NAMES};
use mfd_core::solve::{SolveMethod, SolveOptions};
use serde::{Deserialize, Serialize};

use crate::expr::{parse_expr, Expr};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    Hex,
    Square,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub family: MeshSource,
    /// Uniform refinements applied to the base (or file) mesh.
    #[serde(default)]
    pub levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl MeshConfig {
    pub fn build(&self, base_dir: Option<&Path>) -> Result<DualMesh, CliError> {
        let mesh = match self.family {
            MeshSource::Hex => MeshFamily::Hex.build(self.levels)?,
            MeshSource::Square => MeshFamily::Square.build(self.levels)?,
            MeshSource::File => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| CliError::Validation("mesh.family = \"file\" needs mesh.path".into()))?;
                let path = match base_dir {
                    Some(dir) if Path::new(path).is_relative() => dir.join(path),
                    _ => Path::new(path).to_path_buf(),
                };
                read_mesh_json(&path)?.refined(self.levels)?
            }
        };
        Ok(mesh)
    }
}

/// A constant or an expression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Number(f64),
    Expr(String),
}

impl Coefficient {
    pub fn as_expr_string(&self) -> String {
        match self {
            Coefficient::Number(v) => format!("{v:?}"),
            Coefficient::Expr(s) => s.clone(),
        }
    }
}

/// Scalar or two-component field given by expressions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldExpr {
    Scalar(String),
    Vector([String; 2]),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    #[default]
    Direct,
    /// Conjugate gradients when the system has a diagonal symmetrizer,
    /// BiCGSTAB otherwise.
    Iterative,
    Cg,
    Bicgstab,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: SolverMethod,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    10_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Direct,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl SolverConfig {
    /// Solver options; `symmetrizable` says whether the assembled operator is
    /// a diagonal scaling of a symmetric matrix.
    pub fn options(&self, symmetrizable: bool) -> Result<SolveOptions, CliError> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(CliError::Validation(format!(
                "solver.tol must lie in (0, 1), got {}",
                self.tol
            )));
        }
        let method = match self.method {
            SolverMethod::Direct => SolveMethod::Direct,
            SolverMethod::Cg => SolveMethod::Cg,
            SolverMethod::Bicgstab => SolveMethod::Bicgstab,
            SolverMethod::Iterative if symmetrizable => SolveMethod::Cg,
            SolverMethod::Iterative => SolveMethod::Bicgstab,
        };
        Ok(SolveOptions {
            method,
            tol: self.tol,
            max_iter: self.max_iter,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vtk: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
}

/// A problem: a preset (optionally with overridden fields) or a full set of
/// coefficient expressions. With a preset, a numeric `alpha` is the preset's
/// diffusion parameter, so its source and potential stay consistent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub mesh: MeshConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ProblemKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Coefficient>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FieldExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rot_part: Option<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rot_treatment: Option<RotTreatment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<FieldExpr>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Whether any coefficient is overridden on top of a preset.
    pub fn has_overrides(&self) -> bool {
        matches!(self.alpha, Some(Coefficient::Expr(_)))
            || self.beta.is_some()
            || self.gamma.is_some()
            || self.f.is_some()
            || self.phi.is_some()
            || self.rot_part.is_some()
            || self.dirichlet.is_some()
    }

    /// Resolve to a complete set of expressions.
    pub fn expressions(&self) -> Result<ProblemExpressions, CliError> {
        let mut ex = match &self.preset {
            Some(name) => {
                let alpha = match &self.alpha {
                    Some(Coefficient::Number(a)) => Some(*a),
                    _ => None,
                };
                preset_expressions(name, alpha)?
            }
            None => {
                let missing = |what: &str| CliError::Validation(format!("config without a preset needs '{what}'"));
                let kind = self.kind.ok_or_else(|| missing("kind"))?;
                ProblemExpressions {
                    kind,
                    alpha: self.alpha.as_ref().ok_or_else(|| missing("alpha"))?.as_expr_string(),
                    beta: self.beta.clone().ok_or_else(|| missing("beta"))?,
                    gamma: self.gamma.clone().ok_or_else(|| missing("gamma"))?,
                    f: self.f.clone().ok_or_else(|| missing("f"))?,
                    phi: self.phi.clone().ok_or_else(|| missing("phi"))?,
                    rot_part: None,
                    dirichlet: match kind {
                        ProblemKind::ScalarGrad => FieldExpr::Scalar("0".into()),
                        ProblemKind::VectorCurl => FieldExpr::Vector(["0".into(), "0".into()]),
                    },
                }
            }
        };
        if let Some(kind) = self.kind {
            if kind != ex.kind {
                return Err(CliError::Validation(format!(
                    "kind {} does not match preset kind {}",
                    kind.as_str(),
                    ex.kind.as_str()
                )));
            }
        }
        if let Some(Coefficient::Expr(a)) = &self.alpha {
            ex.alpha = a.clone();
        }
        if let Some(b) = &self.beta {
            ex.beta = b.clone();
        }
        if let Some(g) = &self.gamma {
            ex.gamma = g.clone();
        }
        if let Some(f) = &self.f {
            ex.f = f.clone();
        }
        if let Some(p) = &self.phi {
            ex.phi = p.clone();
        }
        if let Some(r) = &self.rot_part {
            ex.rot_part = Some(r.clone());
        }
        if let Some(d) = &self.dirichlet {
            ex.dirichlet = d.clone();
        }
        Ok(ex)
    }
}

/// Coefficients of one problem as expression strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemExpressions {
    pub kind: ProblemKind,
    pub alpha: String,
    pub beta: [String; 2],
    pub gamma: String,
    pub f: FieldExpr,
    pub phi: String,
    pub rot_part: Option<[String; 2]>,
    pub dirichlet: FieldExpr,
}

fn parse(what: &str, text: &str) -> Result<Arc<Expr>, CliError> {
    parse_expr(text)
        .map(Arc::new)
        .map_err(|e| CliError::Validation(format!("{what} = {text:?}: {e}")))
}

fn scalar_fn(e: Arc<Expr>) -> impl Fn([f64; 2]) -> f64 + Send + Sync + 'static {
    move |p| e.eval_or_nan(p)
}

fn vector_fn(e: [Arc<Expr>; 2]) -> impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static {
    move |p| [e[0].eval_or_nan(p), e[1].eval_or_nan(p)]
}

fn parse_pair(what: &str, pair: &[String; 2]) -> Result<[Arc<Expr>; 2], CliError> {
    Ok([
        parse(&format!("{what}[0]"), &pair[0])?,
        parse(&format!("{what}[1]"), &pair[1])?,
    ])
}

fn parse_field(what: &str, field: &FieldExpr, kind: ProblemKind) -> Result<Field, CliError> {
    match (field, kind) {
        (FieldExpr::Scalar(s), ProblemKind::ScalarGrad) => Ok(Field::scalar(scalar_fn(parse(what, s)?))),
        (FieldExpr::Vector(v), ProblemKind::VectorCurl) => Ok(Field::vector(vector_fn(parse_pair(what, v)?))),
        (_, ProblemKind::ScalarGrad) => Err(CliError::Validation(format!(
            "{what} must be a single expression for a scalar problem"
        ))),
        (_, ProblemKind::VectorCurl) => Err(CliError::Validation(format!(
            "{what} must be a pair of expressions for a vector problem"
        ))),
    }
}

impl ProblemExpressions {
    /// Parse every expression and assemble a problem specification.
    pub fn to_spec(&self) -> Result<ProblemSpec, CliError> {
        let alpha = parse("alpha", &self.alpha)?;
        let beta = parse_pair("beta", &self.beta)?;
        let gamma = parse("gamma", &self.gamma)?;
        let phi = parse("phi", &self.phi)?;
        let source = parse_field("f", &self.f, self.kind)?;
        let dirichlet = parse_field("dirichlet", &self.dirichlet, self.kind)?;
        let mut spec = match self.kind {
            ProblemKind::ScalarGrad => ProblemSpec::scalar(
                scalar_fn(alpha),
                vector_fn(beta),
                scalar_fn(gamma),
                |_| 0.0,
                scalar_fn(phi),
            ),
            ProblemKind::VectorCurl => ProblemSpec::vector(
                scalar_fn(alpha),
                vector_fn(beta),
                scalar_fn(gamma),
                |_| [0.0, 0.0],
                scalar_fn(phi),
            ),
        };
        spec.source = source;
        spec = spec.with_dirichlet(dirichlet);
        if let Some(r) = &self.rot_part {
            spec = spec.with_rot_part(vector_fn(parse_pair("rot_part", r)?));
        }
        Ok(spec)
    }
}

const SIN_SIN: &str = "sin(pi*x)*sin(pi*y)";
const COS_COS: &str = "cos(pi*x)*cos(pi*y)";
const ROT: [&str; 2] = ["0.1*x*cos(x*y)", "-0.1*y*cos(x*y)"];
const LAYER_POTENTIAL: &str = "((2+x)^2+(1+y)^2)/2";

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// The presets written in the expression language. They evaluate to the same
/// coefficients as the built-in closures.
pub fn preset_expressions(name: &str, alpha: Option<f64>) -> Result<ProblemExpressions, CliError> {
    let p = preset(name, alpha)?;
    let a = num(p.alpha);
    let pair = |v: [&str; 2]| [v[0].to_string(), v[1].to_string()];
    let smooth_beta = pair(["cos(x)+4", "4-sin(y)"]);
    let layer_beta = pair(["2+x", "1+y"]);
    let ex = match name {
        "hex-scalar" | "helmholtz-scalar" => {
            let helm = name == "helmholtz-scalar";
            let mut f = format!(
                "2*{a}*pi^2*{SIN_SIN} + (sin(x)+cos(y))*{SIN_SIN} \
                 - ((cos(x)+4)*pi*cos(pi*x)*sin(pi*y) + (4-sin(y))*pi*sin(pi*x)*cos(pi*y))"
            );
            if helm {
                f.push_str(&format!(
                    " - ({}*pi*cos(pi*x)*sin(pi*y) + ({})*pi*sin(pi*x)*cos(pi*y))",
                    ROT[0], ROT[1]
                ));
            }
            ProblemExpressions {
                kind: ProblemKind::ScalarGrad,
                alpha: a.clone(),
                beta: smooth_beta,
                gamma: "0".into(),
                f: FieldExpr::Scalar(f),
                phi: format!("(sin(x)+4*x+cos(y)+4*y)/{a}"),
                rot_part: helm.then(|| pair(ROT)),
                dirichlet: FieldExpr::Scalar(SIN_SIN.into()),
            }
        }
        "hex-vector" => ProblemExpressions {
            kind: ProblemKind::VectorCurl,
            alpha: a.clone(),
            beta: smooth_beta,
            gamma: "1".into(),
            f: FieldExpr::Vector([
                format!(
                    "{a}*2*pi^2*{SIN_SIN} + (cos(x)+4)*(-pi*cos(pi*x)*sin(pi*y)) \
                     - (-cos(y)*{SIN_SIN} + (4-sin(y))*pi*sin(pi*x)*cos(pi*y)) + {SIN_SIN}"
                ),
                format!(
                    "-({a}*(-2*pi^2*{COS_COS}) - sin(x)*{COS_COS} + (cos(x)+4)*(-pi*sin(pi*x)*cos(pi*y)) \
                     - (4-sin(y))*pi*cos(pi*x)*sin(pi*y)) + {COS_COS}"
                ),
            ]),
            phi: format!("(sin(x)+4*x+cos(y)+4*y)/{a}"),
            rot_part: None,
            dirichlet: FieldExpr::Vector([SIN_SIN.into(), COS_COS.into()]),
        },
        "square-boundary-layer" | "helmholtz-boundary-layer" => ProblemExpressions {
            kind: ProblemKind::ScalarGrad,
            alpha: a.clone(),
            beta: layer_beta,
            gamma: "0".into(),
            f: FieldExpr::Scalar("1".into()),
            phi: format!("{LAYER_POTENTIAL}/{a}"),
            rot_part: (name == "helmholtz-boundary-layer").then(|| pair(ROT)),
            dirichlet: FieldExpr::Scalar("0".into()),
        },
        "square-internal-layer" | "helmholtz-internal-layer" => ProblemExpressions {
            kind: ProblemKind::ScalarGrad,
            alpha: format!("iflt(x,0.5,1,{a})"),
            beta: layer_beta,
            gamma: "0".into(),
            f: FieldExpr::Scalar("1".into()),
            // right piece shifted to agree with the left one at (1/2, 1/2)
            phi: format!("iflt(x,0.5,{LAYER_POTENTIAL},{LAYER_POTENTIAL}/{a} + 4.25*(1-1/{a}))"),
            rot_part: (name == "helmholtz-internal-layer").then(|| pair(ROT)),
            dirichlet: FieldExpr::Scalar("0".into()),
        },
        "square-curl-layer" => ProblemExpressions {
            kind: ProblemKind::VectorCurl,
            alpha: a.clone(),
            beta: layer_beta,
            gamma: "1".into(),
            f: FieldExpr::Vector(["1".into(), "1".into()]),
            phi: format!("{LAYER_POTENTIAL}/{a}"),
            rot_part: None,
            dirichlet: FieldExpr::Vector(["0".into(), "0".into()]),
        },
        other => {
            return Err(CliError::Validation(format!(
                "unknown preset '{other}' (available: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(ex)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "mesh": {"family": "hex", "levels": 2},
        "kind": "scalar_grad",
        "alpha": 1,
        "beta": ["0", "0"],
        "gamma": "0",
        "f": "1",
        "phi": "0"
    }"#;

    #[test]
    fn minimal_config_parses_and_round_trips() {
        let c = ProblemConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        let once = c.to_json();
        let twice = ProblemConfig::from_json(&once).unwrap().to_json();
        assert_eq!(once, twice);
        let spec = c.expressions().unwrap().to_spec().unwrap();
        assert_eq!(spec.kind, ProblemKind::ScalarGrad);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"gamma\": \"0\",", "\"gamma\": \"0\", \"colour\": \"red\",");
        assert!(matches!(ProblemConfig::from_json(&text), Err(CliError::Validation(_))));
        let text = MINIMAL.replace("\"levels\": 2", "\"levels\": 2, \"extra\": true");
        assert!(ProblemConfig::from_json(&text).is_err());
        let text = MINIMAL.replace(
            "\"phi\": \"0\"",
            "\"phi\": \"0\", \"solver\": {\"method\": \"direct\", \"speed\": 1}",
        );
        assert!(ProblemConfig::from_json(&text).is_err());
    }

    #[test]
    fn missing_fields_and_bad_expressions_are_validation_errors() {
        let text = MINIMAL.replace("\"phi\": \"0\"", "\"phi\": \"2+*x\"");
        let err = ProblemConfig::from_json(&text)
            .unwrap()
            .expressions()
            .unwrap()
            .to_spec()
            .unwrap_err();
        assert!(err.to_string().contains("offset 2"), "{err}");
        let text = MINIMAL.replace(",\n        \"phi\": \"0\"", "");
        let err = ProblemConfig::from_json(&text).unwrap().expressions().unwrap_err();
        assert!(err.to_string().contains("phi"));
        let text = MINIMAL.replace("\"f\": \"1\"", "\"f\": [\"1\", \"2\"]");
        assert!(ProblemConfig::from_json(&text)
            .unwrap()
            .expressions()
            .unwrap()
            .to_spec()
            .is_err());
    }

    #[test]
    fn preset_config_with_overrides() {
        let c = ProblemConfig::from_json(
            r#"{"mesh": {"family": "square", "levels": 2}, "preset": "square-boundary-layer", "alpha": 0.01, "f": "2"}"#,
        )
        .unwrap();
        assert!(c.has_overrides());
        let ex = c.expressions().unwrap();
        assert_eq!(ex.alpha, "0.01");
        assert_eq!(ex.f, FieldExpr::Scalar("2".into()));
        assert!(ex.phi.ends_with("/0.01"));
        let bad =
            ProblemConfig::from_json(r#"{"mesh": {"family": "hex"}, "preset": "hex-scalar", "kind": "vector_curl"}"#)
                .unwrap();
        assert!(bad.expressions().is_err());
    }

    #[test]
    fn file_meshes_need_a_path() {
        let m = MeshConfig {
            family: MeshSource::File,
            levels: 0,
            path: None,
        };
        assert!(matches!(m.build(None), Err(CliError::Validation(_))));
    }
}
