//! Benchmark problems: smooth manufactured solutions on the hexagon and layer
//! problems on the unit square, with optional divergence-free additions to the
//! convection field.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{Field, ProblemKind, ProblemSpec};
use crate::dualmesh::{build_hexagon_mesh, build_square_mesh, DualMesh, Point};
use crate::{MfdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFamily {
    Hex,
    Square,
}

impl MeshFamily {
    pub fn build(self, levels: usize) -> Result<DualMesh> {
        match self {
            MeshFamily::Hex => Ok(build_hexagon_mesh(levels)),
            MeshFamily::Square => build_square_mesh(levels),
        }
    }
}

/// Closed-form solution used to measure errors, with the derivative its
/// energy norm needs.
#[derive(Clone)]
pub enum Exact {
    Scalar {
        u: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
        grad: Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>,
    },
    Vector {
        u: Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>,
        curl: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for Exact {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Exact::Scalar { .. } => "Exact::Scalar",
            Exact::Vector { .. } => "Exact::Vector",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub family: MeshFamily,
    pub alpha: f64,
    pub default_level: usize,
    pub spec: ProblemSpec,
    pub exact: Option<Exact>,
    /// Bounds any monotone solution must respect (`f >= 0`, zero data).
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub description: &'static str,
}

/// Catalog entry: name, default diffusion and one-line description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PresetInfo {
    pub name: String,
    pub kind: ProblemKind,
    pub family: MeshFamily,
    pub default_alpha: f64,
    pub default_level: usize,
    pub has_exact_solution: bool,
    pub description: String,
}

pub const PRESET_NAMES: [&str; 8] = [
    "hex-scalar",
    "hex-vector",
    "square-boundary-layer",
    "square-internal-layer",
    "square-curl-layer",
    "helmholtz-scalar",
    "helmholtz-boundary-layer",
    "helmholtz-internal-layer",
];

pub fn preset_catalog() -> Vec<PresetInfo> {
    PRESET_NAMES
        .iter()
        .map(|n| {
            let p = preset(n, None).expect("catalog names are valid");
            PresetInfo {
                name: p.name.to_string(),
                kind: p.spec.kind,
                family: p.family,
                default_alpha: p.alpha,
                default_level: p.default_level,
                has_exact_solution: p.exact.is_some(),
                description: p.description.to_string(),
            }
        })
        .collect()
}

/// Build a preset; `alpha` overrides the default diffusion (for the internal
/// layer it is the value on `x >= 1/2`).
pub fn preset(name: &str, alpha: Option<f64>) -> Result<Preset> {
    if let Some(a) = alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(MfdError::NonpositiveDiffusion {
                value: a,
                at: [f64::NAN, f64::NAN],
            });
        }
    }
    let p = match name {
        "hex-scalar" => hex_scalar(alpha.unwrap_or(1.0), false),
        "helmholtz-scalar" => hex_scalar(alpha.unwrap_or(1.0), true),
        "hex-vector" => hex_vector(alpha.unwrap_or(1.0)),
        "square-boundary-layer" => boundary_layer(alpha.unwrap_or(1e-6), false),
        "helmholtz-boundary-layer" => boundary_layer(alpha.unwrap_or(1e-6), true),
        "square-internal-layer" => internal_layer(alpha.unwrap_or(1e-6), false),
        "helmholtz-internal-layer" => internal_layer(alpha.unwrap_or(1e-6), true),
        "square-curl-layer" => curl_layer(alpha.unwrap_or(1e-6)),
        other => {
            return Err(MfdError::Format(format!(
                "unknown preset '{other}' (available: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}

/// `beta = (cos x + 4, 4 - sin y)`.
pub fn smooth_beta(p: Point) -> [f64; 2] {
    [p[0].cos() + 4.0, 4.0 - p[1].sin()]
}

/// Potential of `smooth_beta / alpha`.
pub fn smooth_phi(p: Point, alpha: f64) -> f64 {
    (p[0].sin() + 4.0 * p[0] + p[1].cos() + 4.0 * p[1]) / alpha
}

/// `rot(0.1 sin(xy)) = (0.1 x cos(xy), -0.1 y cos(xy))`, divergence free.
pub fn helmholtz_rot(p: Point) -> [f64; 2] {
    let c = (p[0] * p[1]).cos();
    [0.1 * p[0] * c, -0.1 * p[1] * c]
}

/// `beta = (2 + x, 1 + y) = grad(((2 + x)^2 + (1 + y)^2) / 2)`.
pub fn layer_beta(p: Point) -> [f64; 2] {
    [2.0 + p[0], 1.0 + p[1]]
}

fn layer_potential(p: Point) -> f64 {
    0.5 * ((2.0 + p[0]).powi(2) + (1.0 + p[1]).powi(2))
}

fn hex_scalar(alpha: f64, helmholtz: bool) -> Preset {
    let u = |p: Point| (PI * p[0]).sin() * (PI * p[1]).sin();
    let source = move |p: Point| {
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        let u = sx * sy;
        let grad = [PI * cx * sy, PI * sx * cy];
        let mut b = smooth_beta(p);
        if helmholtz {
            let r = helmholtz_rot(p);
            b = [b[0] + r[0], b[1] + r[1]];
        }
        // -div(alpha grad u + beta u) with div beta = -sin x - cos y
        2.0 * alpha * PI * PI * u + (p[0].sin() + p[1].cos()) * u - (b[0] * grad[0] + b[1] * grad[1])
    };
    let mut spec = ProblemSpec::scalar(
        move |_| alpha,
        smooth_beta,
        |_| 0.0,
        source,
        move |p| smooth_phi(p, alpha),
    )
    .with_dirichlet(Field::scalar(u));
    if helmholtz {
        spec = spec.with_rot_part(helmholtz_rot);
    }
    Preset {
        name: if helmholtz { "helmholtz-scalar" } else { "hex-scalar" },
        family: MeshFamily::Hex,
        alpha,
        default_level: 4,
        spec,
        exact: Some(Exact::Scalar {
            u: Arc::new(u),
            grad: Arc::new(|p: Point| {
                let (sx, cx) = (PI * p[0]).sin_cos();
                let (sy, cy) = (PI * p[1]).sin_cos();
                [PI * cx * sy, PI * sx * cy]
            }),
        }),
        lower_bound: None,
        upper_bound: None,
        description: if helmholtz {
            "hexagon, u = sin(pi x) sin(pi y), beta = (cos x + 4, 4 - sin y) + rot(0.1 sin(xy)), gamma = 0"
        } else {
            "hexagon, u = sin(pi x) sin(pi y), beta = (cos x + 4, 4 - sin y), gamma = 0"
        },
    }
}

fn hex_vector(alpha: f64) -> Preset {
    let u = |p: Point| {
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        [sx * sy, cx * cy]
    };
    let source = move |p: Point| {
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        let (u1, u2) = (sx * sy, cx * cy);
        let [b1, b2] = smooth_beta(p);
        let (db1_dx, db2_dy) = (-p[0].sin(), -p[1].cos());
        // w = alpha curl u + beta x u, curl u = -2 pi sin(pi x) cos(pi y)
        let dcurl_dx = -2.0 * PI * PI * cx * cy;
        let dcurl_dy = 2.0 * PI * PI * sx * sy;
        let (du1_dx, du1_dy) = (PI * cx * sy, PI * sx * cy);
        let (du2_dx, du2_dy) = (-PI * sx * cy, -PI * cx * sy);
        let dcross_dx = db1_dx * u2 + b1 * du2_dx - b2 * du1_dx;
        let dcross_dy = b1 * du2_dy - (db2_dy * u1 + b2 * du1_dy);
        let dw_dx = alpha * dcurl_dx + dcross_dx;
        let dw_dy = alpha * dcurl_dy + dcross_dy;
        // rot w + gamma u with gamma = 1
        [dw_dy + u1, -dw_dx + u2]
    };
    let spec = ProblemSpec::vector(
        move |_| alpha,
        smooth_beta,
        |_| 1.0,
        source,
        move |p| smooth_phi(p, alpha),
    )
    .with_dirichlet(Field::vector(u));
    Preset {
        name: "hex-vector",
        family: MeshFamily::Hex,
        alpha,
        default_level: 4,
        spec,
        exact: Some(Exact::Vector {
            u: Arc::new(u),
            curl: Arc::new(|p: Point| -2.0 * PI * (PI * p[0]).sin() * (PI * p[1]).cos()),
        }),
        lower_bound: None,
        upper_bound: None,
        description:
            "hexagon, u = (sin(pi x) sin(pi y), cos(pi x) cos(pi y)), beta = (cos x + 4, 4 - sin y), gamma = 1",
    }
}

fn boundary_layer(alpha: f64, helmholtz: bool) -> Preset {
    let mut spec = ProblemSpec::scalar(
        move |_| alpha,
        layer_beta,
        |_| 0.0,
        |_| 1.0,
        move |p| layer_potential(p) / alpha,
    );
    if helmholtz {
        spec = spec.with_rot_part(helmholtz_rot);
    }
    Preset {
        name: if helmholtz {
            "helmholtz-boundary-layer"
        } else {
            "square-boundary-layer"
        },
        family: MeshFamily::Square,
        alpha,
        default_level: 6,
        spec,
        exact: None,
        lower_bound: Some(0.0),
        upper_bound: None,
        description: if helmholtz {
            "unit square, beta = (2 + x, 1 + y) + rot(0.1 sin(xy)), gamma = 0, f = 1, zero data: outflow boundary layer"
        } else {
            "unit square, beta = (2 + x, 1 + y), gamma = 0, f = 1, zero data: outflow boundary layer"
        },
    }
}

/// Diffusion of the internal-layer problem: 1 for `x < 1/2`, `alpha_right` beyond.
pub fn internal_alpha(p: Point, alpha_right: f64) -> f64 {
    if p[0] < 0.5 {
        1.0
    } else {
        alpha_right
    }
}

/// Piecewise potential of `beta / alpha` for the internal layer, with the
/// right-hand constant chosen so that both pieces agree at `(1/2, 1/2)`.
pub fn internal_phi(p: Point, alpha_right: f64) -> f64 {
    let a = internal_alpha(p, alpha_right);
    let anchor = layer_potential([0.5, 0.5]);
    layer_potential(p) / a + anchor * (1.0 - 1.0 / a)
}

fn internal_layer(alpha_right: f64, helmholtz: bool) -> Preset {
    let mut spec = ProblemSpec::scalar(
        move |p| internal_alpha(p, alpha_right),
        layer_beta,
        |_| 0.0,
        |_| 1.0,
        move |p| internal_phi(p, alpha_right),
    );
    if helmholtz {
        spec = spec.with_rot_part(helmholtz_rot);
    }
    Preset {
        name: if helmholtz {
            "helmholtz-internal-layer"
        } else {
            "square-internal-layer"
        },
        family: MeshFamily::Square,
        alpha: alpha_right,
        default_level: 6,
        spec,
        exact: None,
        lower_bound: Some(0.0),
        upper_bound: None,
        description: if helmholtz {
            "unit square, alpha = 1 for x < 1/2 and small beyond, beta = (2 + x, 1 + y) + rot(0.1 sin(xy)), f = 1: internal layer"
        } else {
            "unit square, alpha = 1 for x < 1/2 and small beyond, beta = (2 + x, 1 + y), f = 1: internal layer"
        },
    }
}

fn curl_layer(alpha: f64) -> Preset {
    let spec = ProblemSpec::vector(
        move |_| alpha,
        layer_beta,
        |_| 1.0,
        |_| [1.0, 1.0],
        move |p| layer_potential(p) / alpha,
    );
    Preset {
        name: "square-curl-layer",
        family: MeshFamily::Square,
        alpha,
        default_level: 6,
        spec,
        exact: None,
        lower_bound: None,
        upper_bound: None,
        description: "unit square, vector problem, beta = (2 + x, 1 + y), gamma = 1, f = (1, 1): boundary layer",
    }
}
