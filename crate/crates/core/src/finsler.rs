//! Finsler energies: reconstruction from a passing spray, verification
//! of the defining identities, and the converse direction from a given
//! Finsler function to its geodesic spray.
//!
//! The reconstruction uses F² = sign(R)·R, the candidate energy of a
//! spray whose Ricci scalar has constant sign. Verification checks the
//! Euler-Lagrange identity E_i = S(∂F²/∂y^i) − ∂F²/∂x^i = 0, the flag
//! curvature identity Φ = κ(F²·J − F d_JF ⊗ C), and positive
//! definiteness of the metric tensor g_ij = ½ ∂²F²/∂y^i∂y^j. The
//! converse direction solves 2 g G = ½(y^k ∂²F²/∂x^k∂y − ∂F²/∂x) for
//! the spray coefficients in jet arithmetic, so the derived spray is
//! exact to the order of the underlying expansion.

use nalgebra::{DMatrix, DVector};

use crate::dsl::{Expression, FinslerDefinition};
use crate::geom::{build_frame, check_point, GeometryFrame, Spray};
use crate::jet::jet_evaluate;
use crate::{Error, Jet64};

/// Condition number of the metric tensor above which the geodesic
/// spray solve refuses the point.
pub const METRIC_COND_LIMIT: f64 = 1e10;

/// Jet of the energy F² about `point`, from the definition's F.
pub fn energy_jet(def: &FinslerDefinition, point: &[f64], order: usize) -> Result<Jet64, Error> {
    check_point(def.dim, point)?;
    let f = jet_evaluate(&def.f, point, order)?;
    Ok(f.mul(&f))
}

/// Metric tensor g_ij = ½ ∂²F²/∂y^i∂y^j and its smallest eigenvalue,
/// from an energy jet of order at least 2.
pub fn metric_from_energy(f2: &Jet64, dim: usize) -> (DMatrix<f64>, f64) {
    let g = DMatrix::from_fn(dim, dim, |i, j| 0.5 * f2.d2(dim + i, dim + j));
    let eigen_min = g
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    (g, eigen_min)
}

/// Metric tensor of a Finsler definition at a point.
pub fn metric_tensor(def: &FinslerDefinition, point: &[f64]) -> Result<(DMatrix<f64>, f64), Error> {
    let f2 = energy_jet(def, point, 2)?;
    Ok(metric_from_energy(&f2, def.dim))
}

/// The geodesic spray of a Finsler definition, usable wherever a
/// closed-form spray is.
///
/// Coefficient jets come from a jet-valued linear solve of
/// 2 g_il G^l = ½(y^k ∂²F²/∂x^k∂y^l − ∂F²/∂x^l), so requesting order m
/// expands F² to order m + 2.
pub struct GeodesicSpray {
    def: FinslerDefinition,
}

impl GeodesicSpray {
    pub fn new(def: FinslerDefinition) -> GeodesicSpray {
        GeodesicSpray { def }
    }

    pub fn definition(&self) -> &FinslerDefinition {
        &self.def
    }
}

impl Spray for GeodesicSpray {
    fn dim(&self) -> usize {
        self.def.dim
    }

    fn name(&self) -> &str {
        &self.def.name
    }

    fn constraints(&self) -> &[Expression] {
        &self.def.constraints
    }

    fn coefficient_jets(&self, point: &[f64], order: usize) -> Result<Vec<Jet64>, Error> {
        let n = self.def.dim;
        check_point(n, point)?;
        let f2 = energy_jet(&self.def, point, order + 2)?;

        let mut g_rows: Vec<Vec<Jet64>> = Vec::with_capacity(n);
        for i in 0..n {
            g_rows.push(
                (0..n)
                    .map(|j| f2.derivative(n + i).derivative(n + j).scale(0.5))
                    .collect(),
            );
        }
        let g_values = DMatrix::from_fn(n, n, |i, j| g_rows[i][j].value());
        let sv = g_values.singular_values();
        let (top, bottom) = (sv.max(), sv.min());
        let cond = if bottom > 0.0 { top / bottom } else { f64::INFINITY };
        if !cond.is_finite() || cond > METRIC_COND_LIMIT {
            return Err(Error::SingularMetric { point: point.to_vec(), cond });
        }

        let mut rhs: Vec<Jet64> = Vec::with_capacity(n);
        for l in 0..n {
            let mut v = Jet64::constant(2 * n, order, 0.0);
            for k in 0..n {
                let y_k = Jet64::variable(2 * n, order, n + k, point[n + k]);
                v = v.add(&y_k.mul(&f2.derivative(k).derivative(n + l)));
            }
            v = v.sub(&f2.derivative(l));
            rhs.push(v.scale(0.25));
        }
        solve_jet_system(g_rows, rhs)
    }
}

/// Spray coefficient values G^i of the geodesic spray at one point.
pub fn geodesic_spray_values(def: &FinslerDefinition, point: &[f64]) -> Result<Vec<f64>, Error> {
    let spray = GeodesicSpray::new(def.clone());
    let jets = spray.coefficient_jets(point, 0)?;
    Ok(jets.iter().map(|j| j.value()).collect())
}

/// Gaussian elimination with partial pivoting over jet entries.
fn solve_jet_system(mut a: Vec<Vec<Jet64>>, mut b: Vec<Jet64>) -> Result<Vec<Jet64>, Error> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| {
                let v1 = a[r1][col].value().abs();
                let v2 = a[r2][col].value().abs();
                v1.total_cmp(&v2)
            })
            .expect("nonempty pivot range");
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col].div(&a[col][col])?;
            for k in col..n {
                a[row][k] = a[row][k].sub(&factor.mul(&a[col][k]));
            }
            b[row] = b[row].sub(&factor.mul(&b[col]));
        }
    }
    let mut x: Vec<Jet64> = Vec::with_capacity(n);
    for row in (0..n).rev() {
        let mut rhs = b[row].clone();
        for (offset, solved) in x.iter().enumerate() {
            let k = n - 1 - offset;
            rhs = rhs.sub(&a[row][k].mul(solved));
        }
        x.push(rhs.div(&a[row][row])?);
    }
    x.reverse();
    Ok(x)
}

/// Raw Euler-Lagrange components E_i = S(∂F²/∂y^i) − ∂F²/∂x^i for a
/// spray against an energy jet, with a scale-free aggregate.
pub fn euler_lagrange_parts(frame: &GeometryFrame, f2: &Jet64) -> (DVector<f64>, f64) {
    let n = frame.dim;
    let mut raw = DVector::zeros(n);
    let mut rel = 0.0f64;
    for i in 0..n {
        let transported = frame.spray_derivative(&f2.derivative(n + i)).value();
        let dx = f2.d1(i);
        raw[i] = transported - dx;
        rel = rel.max(raw[i].abs() / (1.0 + transported.abs() + dx.abs()));
    }
    (raw, rel)
}

/// E_i = S(∂F²/∂y^i) − ∂F²/∂x^i; zero exactly when the spray is the
/// geodesic spray of the definition at the point.
pub fn euler_lagrange_residual(
    spray: &dyn Spray,
    def: &FinslerDefinition,
    point: &[f64],
) -> Result<DVector<f64>, Error> {
    let frame = build_frame(spray, point)?;
    let f2 = energy_jet(def, point, 2)?;
    Ok(euler_lagrange_parts(&frame, &f2).0)
}

fn flag_residual_from(frame: &GeometryFrame, f2: &Jet64, kappa: f64) -> f64 {
    let n = frame.dim;
    let f2_value = f2.value();
    let mut residual_sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            let kronecker = if i == j { f2_value } else { 0.0 };
            let expected = kappa * (kronecker - 0.5 * f2.d1(n + j) * frame.point[n + i]);
            let diff = frame.phi[(i, j)] - expected;
            residual_sq += diff * diff;
        }
    }
    residual_sq.sqrt() / (1.0 + frame.phi.norm())
}

/// Deviation of Φ from κ(F²·J − F d_JF ⊗ C) as a relative Frobenius
/// norm. `kappa` is the flag curvature value at the point, so callers
/// may feed a constant or any pointwise-evaluated curvature function.
pub fn flag_curvature_residual(
    spray: &dyn Spray,
    def: &FinslerDefinition,
    kappa: f64,
    point: &[f64],
) -> Result<f64, Error> {
    let frame = build_frame(spray, point)?;
    let f2 = energy_jet(def, point, 1)?;
    Ok(flag_residual_from(&frame, &f2, kappa))
}

/// One verified point of a reconstructed energy.
#[derive(Clone, Debug)]
pub struct FinslerSample {
    pub point: Vec<f64>,
    pub f2: f64,
    pub g: DMatrix<f64>,
    pub g_eigen_min: f64,
    /// Raw Euler-Lagrange components.
    pub el_residual: DVector<f64>,
    /// Scale-free maximum of the Euler-Lagrange components.
    pub el_residual_rel: f64,
    /// Relative deviation from the constant flag curvature identity.
    pub flag_residual: f64,
    pub kappa: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReconstructionOutcome {
    /// Metric tensor positive definite at every sampled point.
    Finsler,
    /// Identities hold but the metric tensor is indefinite, so the
    /// energy defines a conic pseudo-Finsler structure only.
    ConicPseudoFinsler,
}

/// Reconstruction of F² = sign(R)·R over a sample, with the verified
/// identities aggregated.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub outcome: ReconstructionOutcome,
    pub kappa: f64,
    pub samples: Vec<FinslerSample>,
    pub max_el: f64,
    pub max_flag: f64,
    pub min_g_eigen: f64,
    pub f2_min: f64,
    pub f2_max: f64,
}

/// Builds and verifies the candidate energy of a spray whose Ricci
/// scalar keeps one sign on the sample.
pub fn reconstruct_finsler(spray: &dyn Spray, points: &[Vec<f64>]) -> Result<Reconstruction, Error> {
    assert!(!points.is_empty(), "reconstruction needs at least one point");
    let n = spray.dim();
    let mut kappa = 0.0;
    let mut samples = Vec::with_capacity(points.len());
    let mut max_el = 0.0f64;
    let mut max_flag = 0.0f64;
    let mut min_g_eigen = f64::INFINITY;
    let mut f2_min = f64::INFINITY;
    let mut f2_max = f64::NEG_INFINITY;

    for point in points {
        let frame = build_frame(spray, point)?;
        let sign = if frame.r >= 0.0 { 1.0 } else { -1.0 };
        if kappa == 0.0 {
            kappa = sign;
        } else if sign != kappa {
            return Err(Error::SignChange { name: spray.name().to_string() });
        }
        let f2 = frame.r_jet.scale(kappa);
        let (g, g_eigen_min) = metric_from_energy(&f2, n);
        let (el_residual, el_residual_rel) = euler_lagrange_parts(&frame, &f2);
        let flag_residual = flag_residual_from(&frame, &f2, kappa);

        max_el = max_el.max(el_residual_rel);
        max_flag = max_flag.max(flag_residual);
        min_g_eigen = min_g_eigen.min(g_eigen_min);
        f2_min = f2_min.min(f2.value());
        f2_max = f2_max.max(f2.value());
        samples.push(FinslerSample {
            point: point.clone(),
            f2: f2.value(),
            g,
            g_eigen_min,
            el_residual,
            el_residual_rel,
            flag_residual,
            kappa,
        });
    }

    let outcome = if min_g_eigen > 0.0 {
        ReconstructionOutcome::Finsler
    } else {
        ReconstructionOutcome::ConicPseudoFinsler
    };
    Ok(Reconstruction {
        outcome,
        kappa,
        samples,
        max_el,
        max_flag,
        min_g_eigen,
        f2_min,
        f2_max,
    })
}

/// Einstein test over a sample: λ = R/F² with the verdict that λ does
/// not depend on the fiber coordinate.
#[derive(Clone, Debug)]
pub struct EinsteinCheck {
    pub pass: bool,
    pub max_residual: f64,
    /// λ value at each sampled point, in sample order.
    pub lambda: Vec<f64>,
}

pub fn check_einstein(
    spray: &dyn Spray,
    def: &FinslerDefinition,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<EinsteinCheck, Error> {
    let n = spray.dim();
    let mut max_residual = 0.0f64;
    let mut lambda = Vec::with_capacity(points.len());
    for point in points {
        let frame = build_frame(spray, point)?;
        let f2 = energy_jet(def, point, 2)?;
        if f2.value().abs() < 1e-12 {
            return Err(Error::DegenerateEnergy {
                name: def.name.clone(),
                value: f2.value(),
                point: point.clone(),
            });
        }
        let quotient = frame.r_jet.div(&f2)?;
        lambda.push(quotient.value());
        let y_norm = point[n..].iter().map(|y| y * y).sum::<f64>().sqrt();
        let grad_norm = (0..n)
            .map(|i| quotient.d1(n + i).powi(2))
            .sum::<f64>()
            .sqrt();
        max_residual = max_residual.max(grad_norm * y_norm / (1.0 + quotient.value().abs()));
    }
    Ok(EinsteinCheck { pass: max_residual <= tol, max_residual, lambda })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    use super::*;
    use crate::dsl::{parse_expression, SprayDefinition};
    use crate::geom::ExpressionSpray;

    fn finsler_from(dim: usize, f: &str, constraints: &[&str]) -> FinslerDefinition {
        FinslerDefinition {
            name: "test".into(),
            dim,
            f: parse_expression(f, dim).unwrap(),
            constraints: constraints
                .iter()
                .map(|c| parse_expression(c, dim).unwrap())
                .collect(),
        }
    }

    fn spray_from(dim: usize, coefficients: &[&str]) -> ExpressionSpray {
        ExpressionSpray::new(SprayDefinition {
            name: "test".into(),
            dim,
            g: coefficients
                .iter()
                .map(|text| parse_expression(text, dim).unwrap())
                .collect(),
            constraints: Vec::new(),
        })
    }

    fn half_plane_spray() -> ExpressionSpray {
        spray_from(2, &["-y1*y2/x2", "((y1)^2 - (y2)^2)/(2*x2)"])
    }

    fn half_plane_finsler() -> FinslerDefinition {
        finsler_from(2, "sqrt((y1)^2 + (y2)^2)/x2", &["x2"])
    }

    #[test]
    fn euclidean_metric_is_identity() {
        let def = finsler_from(2, "sqrt((y1)^2 + (y2)^2)", &[]);
        let (g, eigen_min) = metric_tensor(&def, &[0.0, 0.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(g, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_relative_eq!(eigen_min, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn half_plane_metric_is_conformal() {
        let (g, eigen_min) = metric_tensor(&half_plane_finsler(), &[0.3, 2.0, 0.7, -0.4]).unwrap();
        assert_relative_eq!(g, dmatrix![0.25, 0.0; 0.0, 0.25], epsilon = 1e-12);
        assert_relative_eq!(eigen_min, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn conic_energy_metric_is_indefinite() {
        let def = finsler_from(2, "2*sqrt(y1*y2)/(x1 + x2)", &["y1*y2"]);
        let (g, eigen_min) = metric_tensor(&def, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(g, dmatrix![0.0, 0.5; 0.5, 0.0], epsilon = 1e-12);
        assert_relative_eq!(eigen_min, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn euclidean_geodesic_spray_vanishes() {
        let def = finsler_from(2, "sqrt((y1)^2 + (y2)^2)", &[]);
        let g = geodesic_spray_values(&def, &[0.5, -1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(g[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(g[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn half_plane_geodesic_spray_matches_closed_form() {
        let def = half_plane_finsler();
        let reference = half_plane_spray();
        for point in [
            [0.3, 1.7, 0.8, -0.4],
            [-1.2, 0.5, 0.3, 0.9],
            [2.0, 3.0, -1.0, 1.0],
        ] {
            let got = geodesic_spray_values(&def, &point).unwrap();
            let want = reference.coefficient_jets(&point, 0).unwrap();
            for i in 0..2 {
                assert_relative_eq!(got[i], want[i].value(), epsilon = 1e-11, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn geodesic_spray_jets_match_closed_form_jets() {
        let spray = GeodesicSpray::new(half_plane_finsler());
        let reference = half_plane_spray();
        let point = [0.4, 1.3, 0.9, -0.6];
        let got = spray.coefficient_jets(&point, 4).unwrap();
        let want = reference.coefficient_jets(&point, 4).unwrap();
        let probes: [&[u8]; 5] = [
            &[0, 0, 0, 0],
            &[0, 1, 0, 0],
            &[0, 0, 1, 1],
            &[0, 2, 1, 0],
            &[1, 1, 1, 1],
        ];
        for i in 0..2 {
            for m in probes {
                let m = crate::jet::MultiIndex(m.to_vec());
                assert_relative_eq!(
                    got[i].partial(&m).unwrap(),
                    want[i].partial(&m).unwrap(),
                    epsilon = 1e-9,
                    max_relative = 1e-9
                );
            }
        }
    }

    #[test]
    fn geodesic_frame_reproduces_curvature() {
        let spray = GeodesicSpray::new(half_plane_finsler());
        let frame = build_frame(&spray, &[0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(frame.r, -2.0, epsilon = 1e-10);
        assert_relative_eq!(frame.alpha[0], -1.0, epsilon = 1e-10);
        assert_relative_eq!(frame.alpha[1], -1.0, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_metric_is_refused() {
        let def = finsler_from(2, "y1", &[]);
        let err = geodesic_spray_values(&def, &[0.0, 0.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::SingularMetric { .. }));
    }

    #[test]
    fn euler_lagrange_vanishes_for_the_matching_spray() {
        let residual =
            euler_lagrange_residual(&half_plane_spray(), &half_plane_finsler(), &[0.3, 1.4, 0.9, -0.7])
                .unwrap();
        assert!(residual.norm() < 1e-9, "residual {residual:?}");
    }

    #[test]
    fn euler_lagrange_rejects_the_wrong_spray() {
        let flat = spray_from(2, &["0", "0"]);
        let residual =
            euler_lagrange_residual(&flat, &half_plane_finsler(), &[0.3, 1.4, 0.9, -0.7]).unwrap();
        assert!(residual.norm() > 1e-2, "residual {residual:?}");
    }

    #[test]
    fn flag_curvature_residual_accepts_the_right_kappa() {
        let spray = half_plane_spray();
        let def = half_plane_finsler();
        let point = [0.2, 1.1, 0.8, 0.5];
        let at_minus_one = flag_curvature_residual(&spray, &def, -1.0, &point).unwrap();
        assert!(at_minus_one < 1e-11, "residual {at_minus_one}");
        let at_plus_one = flag_curvature_residual(&spray, &def, 1.0, &point).unwrap();
        assert!(at_plus_one > 0.1, "residual {at_plus_one}");
    }

    #[test]
    fn reconstructs_the_half_plane_energy() {
        let spray = half_plane_spray();
        let points = vec![
            vec![0.0, 1.0, 1.0, 1.0],
            vec![0.5, 2.0, -0.3, 0.8],
            vec![-1.0, 0.7, 0.4, -0.9],
        ];
        let rec = reconstruct_finsler(&spray, &points).unwrap();
        assert_eq!(rec.outcome, ReconstructionOutcome::Finsler);
        assert_eq!(rec.kappa, -1.0);
        assert!(rec.max_el < 1e-11);
        assert!(rec.max_flag < 1e-11);
        assert!(rec.min_g_eigen > 0.0);
        for sample in &rec.samples {
            let closed = (sample.point[2].powi(2) + sample.point[3].powi(2))
                / sample.point[1].powi(2);
            assert_relative_eq!(sample.f2, closed, max_relative = 1e-12);
        }
    }

    #[test]
    fn reconstructs_the_conic_energy_as_pseudo_finsler() {
        let spray = spray_from(2, &["-(y1)^2/(x1+x2)", "-(y2)^2/(x1+x2)"]);
        let points = vec![vec![1.0, 1.0, 1.0, 1.0], vec![0.5, 1.5, 0.8, 0.6]];
        let rec = reconstruct_finsler(&spray, &points).unwrap();
        assert_eq!(rec.outcome, ReconstructionOutcome::ConicPseudoFinsler);
        assert_eq!(rec.kappa, -1.0);
        assert!(rec.max_el < 1e-11);
        assert!(rec.max_flag < 1e-11);
        assert!(rec.min_g_eigen < 0.0);
        for sample in &rec.samples {
            let closed = 4.0 * sample.point[2] * sample.point[3]
                / (sample.point[0] + sample.point[1]).powi(2);
            assert_relative_eq!(sample.f2, closed, max_relative = 1e-12);
        }
    }

    #[test]
    fn sign_change_across_sample_is_an_error() {
        let spray = spray_from(2, &["x2*(y1)^2/2", "0"]);
        let points = vec![vec![0.0, 1.0, 1.0, 1.0], vec![0.0, 1.0, 1.0, -1.0]];
        let err = reconstruct_finsler(&spray, &points).unwrap_err();
        assert!(matches!(err, Error::SignChange { .. }));
    }

    #[test]
    fn half_plane_is_einstein_with_constant_lambda() {
        let spray = half_plane_spray();
        let def = half_plane_finsler();
        let points = vec![
            vec![0.0, 1.0, 1.0, 1.0],
            vec![0.5, 2.0, -0.3, 0.8],
            vec![-1.0, 0.7, 0.4, -0.9],
        ];
        let check = check_einstein(&spray, &def, &points, 1e-8).unwrap();
        assert!(check.pass, "max residual {}", check.max_residual);
        for lambda in check.lambda {
            assert_relative_eq!(lambda, -1.0, max_relative = 1e-11);
        }
    }

    #[test]
    fn flat_spray_is_einstein_with_zero_lambda() {
        let spray = spray_from(2, &["0", "0"]);
        let def = finsler_from(2, "sqrt((y1)^2 + (y2)^2)", &[]);
        let points = vec![vec![0.2, -0.3, 1.0, 2.0]];
        let check = check_einstein(&spray, &def, &points, 1e-10).unwrap();
        assert!(check.pass);
        assert_eq!(check.lambda, vec![0.0]);
    }
}
