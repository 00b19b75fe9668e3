//! Built-in example definitions with their expected outcomes.
//!
//! The catalog covers the classical test cases for the constant-flag-
//! curvature metrizability conditions: the hyperbolic half-plane and
//! its projective deformations, the Finslerian disk of curvature
//! -1/4, a Randers metric that is Einstein but not Ricci constant, a
//! Randers metric whose isotropy 1-form has d_J alpha != 0, and an
//! affine spray metrizable only by a conic pseudo-Finsler energy.

use crate::checks::{SampleSpec, VerdictStatus, DEFAULT_MARGIN};
use crate::dsl::{evaluate, parse_expression, Definition, Expression, FinslerDefinition, SprayDefinition};
use crate::geom::ExpressionSpray;
use crate::Error;

/// Relative tolerance for the 1-homogeneity validation of a
/// projective factor.
pub const DEFORMATION_TOL: f64 = 1e-6;

/// Expected analysis outcome of a gallery entry, with closed forms
/// evaluated pointwise by the tests rather than frozen scalars.
#[derive(Clone, Debug)]
pub struct Expectations {
    pub status: VerdictStatus,
    /// Sign of the curvature when the verdict is metrizable.
    pub kappa_sign: Option<i8>,
    /// Constant flag curvature when the example has one.
    pub flag_curvature: Option<f64>,
    /// Closed form of the Ricci scalar R(x, y).
    pub ricci_closed: Option<Expression>,
    /// Closed form of the energy F^2 the pipeline should reconstruct.
    pub energy_closed: Option<Expression>,
    /// Closed form of a non-constant flag curvature kappa(x) or
    /// kappa(x, y).
    pub flag_curvature_closed: Option<Expression>,
    /// Whether reconstruction should land on a conic pseudo-Finsler
    /// energy (indefinite metric tensor on the constraint cone).
    pub conic: bool,
}

impl Expectations {
    fn new(status: VerdictStatus) -> Expectations {
        Expectations {
            status,
            kappa_sign: None,
            flag_curvature: None,
            ricci_closed: None,
            energy_closed: None,
            flag_curvature_closed: None,
            conic: false,
        }
    }
}

/// A named example: its definition, what the pipeline should conclude
/// about it, and where the numbers were cross-checked.
#[derive(Clone, Debug)]
pub struct GalleryEntry {
    pub name: String,
    pub definition: Definition,
    pub expected: Expectations,
    /// One-line description of the example and of the independent
    /// checks its expectations were verified against.
    pub provenance: &'static str,
    /// Constraint margin the sampler should use; wide enough to keep
    /// the definition well conditioned near its domain boundary.
    pub margin: f64,
}

impl GalleryEntry {
    pub fn kind(&self) -> &'static str {
        match self.definition {
            Definition::Spray(_) => "spray",
            Definition::Finsler(_) => "finsler",
        }
    }

    /// Sampler honoring the entry's recommended margin.
    pub fn sample_spec(&self) -> SampleSpec {
        SampleSpec { margin: self.margin, ..SampleSpec::default_for(self.definition.dim()) }
    }
}

const NAMES: [&str; 6] = [
    "poincare_half_plane",
    "finsler_poincare_disk",
    "bao_robles_paraboloid",
    "shen_randers_11_2",
    "conic_affine",
    "deformed_half_plane",
];

/// Names of the built-in examples, in catalog order.
pub fn list_examples() -> Vec<&'static str> {
    NAMES.to_vec()
}

/// Instantiates a catalog entry. `params` are `key=value` settings;
/// `deformed_half_plane` takes `lambda` (default 2) and
/// `shen_randers_11_2` takes `a1`, `a2` (default 0.1, 0).
pub fn get_example(name: &str, params: &[(String, f64)]) -> Result<GalleryEntry, Error> {
    let lookup = |key: &str, default: f64| -> f64 {
        params.iter().rev().find(|(k, _)| k == key).map(|&(_, v)| v).unwrap_or(default)
    };
    let allow = |keys: &[&str]| -> Result<(), Error> {
        for (k, _) in params {
            if !keys.contains(&k.as_str()) {
                return Err(Error::BadParam {
                    name: name.to_string(),
                    detail: format!("unknown parameter `{k}`"),
                });
            }
        }
        Ok(())
    };
    match name {
        "poincare_half_plane" => {
            allow(&[])?;
            Ok(poincare_half_plane())
        }
        "finsler_poincare_disk" => {
            allow(&[])?;
            Ok(finsler_poincare_disk())
        }
        "bao_robles_paraboloid" => {
            allow(&[])?;
            Ok(bao_robles_paraboloid())
        }
        "shen_randers_11_2" => {
            allow(&["a1", "a2"])?;
            shen_randers(lookup("a1", 0.1), lookup("a2", 0.0))
        }
        "conic_affine" => {
            allow(&[])?;
            Ok(conic_affine())
        }
        "deformed_half_plane" => {
            allow(&["lambda"])?;
            deformed_half_plane(lookup("lambda", 2.0))
        }
        _ => Err(Error::UnknownExample { name: name.to_string() }),
    }
}

/// Replaces a spray by its projectively equivalent deformation
/// G'^i = G^i + P y^i, after checking numerically that the factor P
/// is 1-homogeneous in y.
pub fn projective_deform(
    spray: &SprayDefinition,
    factor: &Expression,
) -> Result<SprayDefinition, Error> {
    let n = spray.dim;
    let probe = ExpressionSpray::new(spray.clone());
    let spec = SampleSpec {
        count: 8,
        seed: 7,
        margin: 0.05,
        ..SampleSpec::default_for(n)
    };
    for point in spec.generate(&probe)? {
        let value = evaluate::<f64>(factor, &point)?;
        let mut scaled = point.clone();
        for y in &mut scaled[n..] {
            *y *= 2.0;
        }
        let scaled_value = evaluate::<f64>(factor, &scaled)?;
        let residual = (scaled_value - 2.0 * value).abs() / (1.0 + 2.0 * value.abs());
        if residual > DEFORMATION_TOL {
            return Err(Error::InhomogeneousDeformation {
                name: spray.name.clone(),
                residual,
                point,
            });
        }
    }
    let g = spray
        .g
        .iter()
        .enumerate()
        .map(|(i, g_i)| {
            Expression::Add(
                Box::new(g_i.clone()),
                Box::new(Expression::Mul(
                    Box::new(factor.clone()),
                    Box::new(Expression::Var(n + i)),
                )),
            )
        })
        .collect();
    Ok(SprayDefinition {
        name: spray.name.clone(),
        dim: n,
        g,
        constraints: spray.constraints.clone(),
    })
}

/// The affine family G^1 = phi (y^1)^2 / 2, G^2 = psi (y^2)^2 / 2 for
/// base functions phi, psi of x alone; metrizable exactly when
/// phi_x2 = psi_x1 and both satisfy their Riccati equation
/// phi_x1x2 = phi phi_x2, psi_x1x2 = psi psi_x1.
pub fn conic_family(name: &str, phi: Expression, psi: Expression) -> SprayDefinition {
    let half = |f: Expression, slot: usize| {
        Expression::Mul(
            Box::new(Expression::Const(0.5)),
            Box::new(Expression::Mul(
                Box::new(f),
                Box::new(Expression::Pow(
                    Box::new(Expression::Var(slot)),
                    crate::dsl::Exponent::integer(2),
                )),
            )),
        )
    };
    SprayDefinition {
        name: name.to_string(),
        dim: 2,
        g: vec![half(phi, 2), half(psi, 3)],
        constraints: vec![parse_expression("y1*y2", 2).expect("cone constraint parses")],
    }
}

fn parse2(text: &str) -> Expression {
    parse_expression(text, 2).expect("gallery expression parses")
}

fn poincare_half_plane() -> GalleryEntry {
    let definition = Definition::Spray(SprayDefinition {
        name: "poincare_half_plane".to_string(),
        dim: 2,
        g: vec![parse2("-y1*y2/x2"), parse2("((y1)^2 - (y2)^2)/(2*x2)")],
        constraints: vec![parse2("x2")],
    });
    let mut expected = Expectations::new(VerdictStatus::MetrizableConstantCurvature);
    expected.kappa_sign = Some(-1);
    expected.flag_curvature = Some(-1.0);
    expected.ricci_closed = Some(parse2("-((y1)^2 + (y2)^2)/(x2)^2"));
    expected.energy_closed = Some(parse2("((y1)^2 + (y2)^2)/(x2)^2"));
    GalleryEntry {
        name: "poincare_half_plane".to_string(),
        definition,
        expected,
        provenance: "Geodesic spray of the hyperbolic upper half-plane; the \
                     closed-form Jacobi endomorphism, Ricci scalar, and \
                     reconstructed energy were cross-checked by automatic \
                     differentiation and finite differences",
        margin: DEFAULT_MARGIN,
    }
}

fn finsler_poincare_disk() -> GalleryEntry {
    let r2 = "((x1)^2 + (x2)^2)";
    let f = format!(
        "4*sqrt((y1)^2 + (y2)^2)/(4 - {r2}) \
         + 16*(x1*y1 + x2*y2)/((4 - {r2})*(4 + {r2}))"
    );
    let definition = Definition::Finsler(FinslerDefinition {
        name: "finsler_poincare_disk".to_string(),
        dim: 2,
        f: parse2(&f),
        constraints: vec![parse2(&format!("4 - {r2}"))],
    });
    let mut expected = Expectations::new(VerdictStatus::MetrizableConstantCurvature);
    expected.kappa_sign = Some(-1);
    expected.flag_curvature = Some(-0.25);
    GalleryEntry {
        name: "finsler_poincare_disk".to_string(),
        definition,
        expected,
        provenance: "Projectively flat Finsler function of constant flag \
                     curvature -1/4 on the disk of radius 2; the drift term \
                     is the radial form x.y, which the numerical \
                     constant-curvature check confirms and the cross form \
                     x1 y2 + x2 y1 fails",
        margin: 0.5,
    }
}

fn bao_robles_paraboloid() -> GalleryEntry {
    let delta = "(1 - (x1)^2 - (x2)^2)";
    let quad = "((1 + 4*(x1)^2)*(y1)^2 + 8*x1*x2*y1*y2 + (1 + 4*(x2)^2)*(y2)^2)";
    let f = format!(
        "(sqrt((x1*y2 - x2*y1)^2 + {quad}*{delta}) + x2*y1 - x1*y2)/{delta}"
    );
    let definition = Definition::Finsler(FinslerDefinition {
        name: "bao_robles_paraboloid".to_string(),
        dim: 2,
        f: parse2(&f),
        constraints: vec![parse2(delta)],
    });
    let mut expected = Expectations::new(VerdictStatus::NotMetrizableD2Fails);
    expected.flag_curvature_closed = Some(parse2("4/((1 + 4*(x1)^2 + 4*(x2)^2)^2)"));
    GalleryEntry {
        name: "bao_robles_paraboloid".to_string(),
        definition,
        expected,
        provenance: "Randers metric on an elliptic paraboloid patch whose \
                     flag curvature depends on position only; Einstein with \
                     non-constant factor, so the isotropy 1-form closes but \
                     the Ricci scalar is not horizontally constant",
        margin: 0.1,
    }
}

fn shen_randers(a1: f64, a2: f64) -> Result<GalleryEntry, Error> {
    if !(a1.is_finite() && a2.is_finite()) {
        return Err(Error::BadParam {
            name: "shen_randers_11_2".to_string(),
            detail: format!("parameters must be finite, got a = ({a1}, {a2})"),
        });
    }
    let asq = a1 * a1 + a2 * a2;
    let ax = format!("(({a1})*x1 + ({a2})*x2)");
    let ay = format!("(({a1})*y1 + ({a2})*y2)");
    let xs = "((x1)^2 + (x2)^2)";
    let delta = format!("(1 - ({asq})*{xs}^2)");
    let beta = format!("(2*{ax}*(x1*y1 + x2*y2) - {xs}*{ay})");
    let f = format!("(sqrt({beta}^2 + {delta}*((y1)^2 + (y2)^2)) + {beta})/{delta}");
    let definition = Definition::Finsler(FinslerDefinition {
        name: "shen_randers_11_2".to_string(),
        dim: 2,
        f: parse2(&f),
        constraints: vec![parse2(&delta)],
    });
    let mut expected = Expectations::new(VerdictStatus::InconclusiveMixedSign);
    expected.flag_curvature_closed =
        Some(parse2(&format!("3*{ay}/({f}) + 3*{ax}^2 - 2*({asq})*{xs}")));
    Ok(GalleryEntry {
        name: "shen_randers_11_2".to_string(),
        definition,
        expected,
        provenance: "Randers metric whose flag curvature depends on the \
                     flagpole; its geodesic spray is isotropic yet d_J alpha \
                     does not vanish, so no constant-curvature conclusion is \
                     available and the sampled Ricci sign is mixed",
        margin: DEFAULT_MARGIN,
    })
}

fn conic_affine() -> GalleryEntry {
    let phi = parse2("-2/(x1 + x2)");
    let mut spray = conic_family("conic_affine", phi.clone(), phi);
    spray.constraints.insert(0, parse2("x1 + x2"));
    let mut expected = Expectations::new(VerdictStatus::MetrizableConstantCurvature);
    expected.kappa_sign = Some(-1);
    expected.flag_curvature = Some(-1.0);
    expected.ricci_closed = Some(parse2("-4*y1*y2/((x1 + x2)^2)"));
    expected.energy_closed = Some(parse2("4*y1*y2/((x1 + x2)^2)"));
    expected.conic = true;
    GalleryEntry {
        name: "conic_affine".to_string(),
        definition: Definition::Spray(spray),
        expected,
        provenance: "Affine spray whose base functions solve the coupled \
                     Riccati system; metrizable only by a conic \
                     pseudo-Finsler energy with indefinite metric tensor on \
                     the cone y1 y2 > 0",
        margin: DEFAULT_MARGIN,
    }
}

fn deformed_half_plane(lambda: f64) -> Result<GalleryEntry, Error> {
    if !lambda.is_finite() {
        return Err(Error::BadParam {
            name: "deformed_half_plane".to_string(),
            detail: format!("lambda must be finite, got {lambda}"),
        });
    }
    let base = match poincare_half_plane().definition {
        Definition::Spray(s) => s,
        Definition::Finsler(_) => unreachable!(),
    };
    let factor = Expression::Mul(
        Box::new(Expression::Const(lambda)),
        Box::new(parse2("sqrt((y1)^2 + (y2)^2)/x2")),
    );
    let mut spray = projective_deform(&base, &factor)?;
    spray.name = "deformed_half_plane".to_string();
    let status = if lambda == 0.0 {
        VerdictStatus::MetrizableConstantCurvature
    } else if lambda.abs() == 1.0 {
        VerdictStatus::RicciVanishesOutOfScope
    } else {
        VerdictStatus::NotMetrizableD2Fails
    };
    let mut expected = Expectations::new(status);
    if lambda == 0.0 {
        expected.kappa_sign = Some(-1);
        expected.flag_curvature = Some(-1.0);
        expected.energy_closed = Some(parse2("((y1)^2 + (y2)^2)/(x2)^2"));
    }
    expected.ricci_closed = Some(parse2(&format!(
        "({})*((y1)^2 + (y2)^2)/(x2)^2",
        lambda * lambda - 1.0
    )));
    Ok(GalleryEntry {
        name: "deformed_half_plane".to_string(),
        definition: Definition::Spray(spray),
        expected,
        provenance: "Projective deformation of the half-plane spray by \
                     lambda times the hyperbolic norm; the deformation keeps \
                     d_J alpha = 0 but breaks Ricci constancy unless lambda \
                     is 0 (undeformed) or +-1 (Ricci scalar vanishes)",
        margin: DEFAULT_MARGIN,
    })
}
