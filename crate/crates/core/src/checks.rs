//! Metrizability conditions evaluated over a point sample, and the
//! verdict assembled from them.
//!
//! A spray is metrizable by a Finsler function of nonzero constant flag
//! curvature exactly when, on the sampled domain, the Ricci scalar
//! keeps one sign away from zero, the 2-form d(d_J TrΦ) has full rank
//! 2n, the curvature condition 2(n−1)Φ − 2(TrΦ)J + d_J(TrΦ)⊗C = 0
//! holds, and d_h(TrΦ) = 0. For n = 2 the curvature condition is
//! replaced by the equivalent d_Jα = 0 test on the isotropy 1-form.
//! Every residual is normalized by the magnitude of its ingredients so
//! pass/fail is invariant under rescaling of the fiber coordinate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsl::evaluate;
use crate::geom::{alpha_2d_jets, build_frame, numeric_rank, Spray};
use crate::Error;

/// Default number of sample points.
pub const DEFAULT_COUNT: usize = 64;
/// Default RNG seed.
pub const DEFAULT_SEED: u64 = 42;
/// Default half-width of the sampling box in every coordinate.
pub const DEFAULT_BOX: (f64, f64) = (-2.0, 2.0);
/// Default margin by which every constraint expression must clear 0.
pub const DEFAULT_MARGIN: f64 = 1e-3;
/// Smallest admissible fiber norm; keeps samples off the zero section.
pub const Y_MIN_NORM: f64 = 0.1;
/// Rejection-sampling attempt budget.
pub const MAX_SAMPLE_ATTEMPTS: usize = 100_000;
/// Coefficients failing 2-homogeneity beyond this are not a spray.
pub const HOMOGENEITY_TOL: f64 = 1e-6;

/// Deterministic rejection sampler over the constrained box.
#[derive(Clone, Debug)]
pub struct SampleSpec {
    pub count: usize,
    /// Closed interval per coordinate, x parts then y parts, length 2n.
    pub intervals: Vec<(f64, f64)>,
    pub seed: u64,
    pub margin: f64,
}

impl SampleSpec {
    pub fn default_for(dim: usize) -> SampleSpec {
        SampleSpec {
            count: DEFAULT_COUNT,
            intervals: vec![DEFAULT_BOX; 2 * dim],
            seed: DEFAULT_SEED,
            margin: DEFAULT_MARGIN,
        }
    }

    /// Draws `count` points satisfying every constraint of the spray
    /// with margin, rejecting until the budget runs out.
    pub fn generate(&self, spray: &dyn Spray) -> Result<Vec<Vec<f64>>, Error> {
        let n = spray.dim();
        if self.count == 0 {
            return Err(Error::BadParam {
                name: spray.name().to_string(),
                detail: "sample count must be at least 1".to_string(),
            });
        }
        if self.intervals.len() != 2 * n {
            return Err(Error::BadParam {
                name: spray.name().to_string(),
                detail: format!(
                    "sampling box has {} intervals, need {}",
                    self.intervals.len(),
                    2 * n
                ),
            });
        }
        for &(lo, hi) in &self.intervals {
            if !(lo < hi) {
                return Err(Error::BadParam {
                    name: spray.name().to_string(),
                    detail: format!("degenerate sampling interval {lo}:{hi}"),
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut points = Vec::with_capacity(self.count);
        for _ in 0..MAX_SAMPLE_ATTEMPTS {
            if points.len() == self.count {
                break;
            }
            let point: Vec<f64> = self
                .intervals
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect();
            let y_norm_sq: f64 = point[n..].iter().map(|y| y * y).sum();
            if y_norm_sq < Y_MIN_NORM * Y_MIN_NORM {
                continue;
            }
            let admissible = spray.constraints().iter().all(|c| {
                evaluate::<f64>(c, &point).map(|v| v > self.margin).unwrap_or(false)
            });
            if admissible {
                points.push(point);
            }
        }
        if points.len() < self.count {
            return Err(Error::SamplingExhausted {
                name: spray.name().to_string(),
                attempts: MAX_SAMPLE_ATTEMPTS,
            });
        }
        Ok(points)
    }
}

/// Residuals and curvature data of one sampled point.
#[derive(Clone, Debug)]
pub struct PointRecord {
    pub point: Vec<f64>,
    /// Numeric rank of the 2-form d(d_J TrΦ).
    pub rank: usize,
    /// 2n minus the rank; 0 means condition A holds.
    pub rank_deficiency: usize,
    pub residual_d1: f64,
    pub residual_d2: f64,
    pub residual_iso: f64,
    /// Worse of the two equivalent closedness forms ‖d_Jα‖ and ‖d_JR − 2α‖.
    pub residual_dj_alpha: f64,
    pub residual_homogeneity: f64,
    pub residual_weak_ricci: f64,
    pub r_value: f64,
    /// |R| against the curvature scale, the out-of-scope gate value.
    pub r_normalized: f64,
    pub s_r: f64,
}

/// Per-point records with their deterministic fold.
#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub dim: usize,
    pub points: Vec<PointRecord>,
    pub max_rank_deficiency: usize,
    pub max_residual_d1: f64,
    pub max_residual_d2: f64,
    pub max_residual_iso: f64,
    pub max_residual_dj_alpha: f64,
    pub max_residual_homogeneity: f64,
    pub max_residual_weak_ricci: f64,
    pub min_abs_r: f64,
    pub min_r_normalized: f64,
    pub sign_positive: usize,
    pub sign_negative: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerdictStatus {
    MetrizableConstantCurvature,
    NotMetrizableD1Fails,
    NotMetrizableD2Fails,
    NotMetrizableRankFails,
    RicciVanishesOutOfScope,
    InconclusiveMixedSign,
}

impl VerdictStatus {
    /// Stable machine name, also the JSON encoding.
    pub fn key(self) -> &'static str {
        match self {
            VerdictStatus::MetrizableConstantCurvature => "metrizable_constant_curvature",
            VerdictStatus::NotMetrizableD1Fails => "not_metrizable_D1_fails",
            VerdictStatus::NotMetrizableD2Fails => "not_metrizable_D2_fails",
            VerdictStatus::NotMetrizableRankFails => "not_metrizable_rank_fails",
            VerdictStatus::RicciVanishesOutOfScope => "ricci_vanishes_out_of_scope",
            VerdictStatus::InconclusiveMixedSign => "inconclusive_mixed_sign",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetrizabilityVerdict {
    pub status: VerdictStatus,
    /// sign(R), present exactly when the status is metrizable.
    pub kappa: Option<i8>,
    pub witness: ConditionReport,
}

/// Evaluates every condition at one point from a single curvature
/// frame plus one extra coefficient evaluation at (x, 2y).
pub fn evaluate_point(spray: &dyn Spray, point: &[f64]) -> Result<PointRecord, Error> {
    let n = spray.dim();
    let frame = build_frame(spray, point)?;
    let phi_norm = frame.phi.norm();
    let conn_norm = frame.conn.norm();
    let y_norm = point[n..].iter().map(|y| y * y).sum::<f64>().sqrt();

    let mut scaled_point = point.to_vec();
    for y in &mut scaled_point[n..] {
        *y *= 2.0;
    }
    let scaled_g = spray.coefficient_jets(&scaled_point, 0)?;
    let mut residual_homogeneity = 0.0f64;
    for i in 0..n {
        let g_i = frame.g_jets[i].value();
        let euler: f64 =
            (0..n).map(|j| frame.conn[(i, j)] * point[n + j]).sum::<f64>() - 2.0 * g_i;
        let scaling = scaled_g[i].value() - 4.0 * g_i;
        residual_homogeneity = residual_homogeneity
            .max(euler.abs() / (1.0 + 2.0 * g_i.abs()))
            .max(scaling.abs() / (1.0 + 4.0 * g_i.abs()));
    }

    let rank = numeric_rank(&frame.ddj_ric);
    let rank_deficiency = 2 * n - rank;

    let mut d1_sq = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let kronecker = if i == j { 2.0 * frame.ric } else { 0.0 };
            let entry = 2.0 * (n as f64 - 1.0) * frame.phi[(i, j)] - kronecker
                + frame.ric_jet.d1(n + j) * point[n + i];
            d1_sq += entry * entry;
        }
    }
    let residual_d1 = d1_sq.sqrt() / (1.0 + phi_norm);

    let mut d2_num = 0.0f64;
    let mut d2_scale = 0.0f64;
    for i in 0..n {
        let direct = frame.ric_jet.d1(i);
        let transported: f64 =
            (0..n).map(|j| frame.conn[(j, i)] * frame.ric_jet.d1(n + j)).sum();
        d2_num = d2_num.max((direct - transported).abs());
        d2_scale = d2_scale.max(direct.abs() + transported.abs());
    }
    let residual_d2 = d2_num / (1.0 + d2_scale);

    let residual_iso = frame.iso_residual / (1.0 + phi_norm);

    let alpha_jets = if n == 2 { alpha_2d_jets(&frame)? } else { frame.alpha_jets.clone() };
    let mut dj_alpha_sq = 0.0f64;
    let mut jacobian_sq = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let entry = alpha_jets[j].d1(n + i) - alpha_jets[i].d1(n + j);
            dj_alpha_sq += entry * entry;
            jacobian_sq += alpha_jets[j].d1(n + i) * alpha_jets[j].d1(n + i);
        }
    }
    let two_form_term = dj_alpha_sq.sqrt() / (1.0 + jacobian_sq.sqrt());
    let mut gap_sq = 0.0f64;
    let mut dj_r_norm_sq = 0.0f64;
    let mut alpha_norm_sq = 0.0f64;
    for j in 0..n {
        let diff = frame.dj_r[j] - 2.0 * alpha_jets[j].value();
        gap_sq += diff * diff;
        dj_r_norm_sq += frame.dj_r[j] * frame.dj_r[j];
        alpha_norm_sq += alpha_jets[j].value() * alpha_jets[j].value();
    }
    let gap_term =
        gap_sq.sqrt() / (1.0 + dj_r_norm_sq.sqrt() + 2.0 * alpha_norm_sq.sqrt());
    let residual_dj_alpha = two_form_term.max(gap_term);

    let residual_weak_ricci = frame.s_r.abs() / (1.0 + frame.r.abs() * y_norm);
    let r_normalized = frame.r.abs() / (1.0 + phi_norm + conn_norm * conn_norm);

    Ok(PointRecord {
        point: point.to_vec(),
        rank,
        rank_deficiency,
        residual_d1,
        residual_d2,
        residual_iso,
        residual_dj_alpha,
        residual_homogeneity,
        residual_weak_ricci,
        r_value: frame.r,
        r_normalized,
        s_r: frame.s_r,
    })
}

/// Evaluates the whole sample and folds the aggregates.
pub fn condition_report(spray: &dyn Spray, points: &[Vec<f64>]) -> Result<ConditionReport, Error> {
    let mut report = ConditionReport {
        dim: spray.dim(),
        points: Vec::with_capacity(points.len()),
        max_rank_deficiency: 0,
        max_residual_d1: 0.0,
        max_residual_d2: 0.0,
        max_residual_iso: 0.0,
        max_residual_dj_alpha: 0.0,
        max_residual_homogeneity: 0.0,
        max_residual_weak_ricci: 0.0,
        min_abs_r: f64::INFINITY,
        min_r_normalized: f64::INFINITY,
        sign_positive: 0,
        sign_negative: 0,
    };
    for point in points {
        let record = evaluate_point(spray, point)?;
        report.max_rank_deficiency = report.max_rank_deficiency.max(record.rank_deficiency);
        report.max_residual_d1 = report.max_residual_d1.max(record.residual_d1);
        report.max_residual_d2 = report.max_residual_d2.max(record.residual_d2);
        report.max_residual_iso = report.max_residual_iso.max(record.residual_iso);
        report.max_residual_dj_alpha =
            report.max_residual_dj_alpha.max(record.residual_dj_alpha);
        report.max_residual_homogeneity =
            report.max_residual_homogeneity.max(record.residual_homogeneity);
        report.max_residual_weak_ricci =
            report.max_residual_weak_ricci.max(record.residual_weak_ricci);
        report.min_abs_r = report.min_abs_r.min(record.r_value.abs());
        report.min_r_normalized = report.min_r_normalized.min(record.r_normalized);
        if record.r_value > 0.0 {
            report.sign_positive += 1;
        } else if record.r_value < 0.0 {
            report.sign_negative += 1;
        }
        report.points.push(record);
    }
    Ok(report)
}

/// Per-point 2-homogeneity residuals (Euler identity and the λ = 2
/// scaling test combined).
pub fn check_homogeneity(spray: &dyn Spray, points: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
    points
        .iter()
        .map(|p| evaluate_point(spray, p).map(|rec| rec.residual_homogeneity))
        .collect()
}

/// Per-point numeric rank of d(d_J TrΦ); condition A asks for 2n.
pub fn check_condition_a(spray: &dyn Spray, points: &[Vec<f64>]) -> Result<Vec<usize>, Error> {
    points
        .iter()
        .map(|p| evaluate_point(spray, p).map(|rec| rec.rank))
        .collect()
}

/// Per-point relative residual of 2(n−1)Φ − 2(TrΦ)J + d_J(TrΦ)⊗C = 0.
pub fn check_condition_d1(spray: &dyn Spray, points: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
    points
        .iter()
        .map(|p| evaluate_point(spray, p).map(|rec| rec.residual_d1))
        .collect()
}

/// Per-point relative residual of d_h(TrΦ) = 0.
pub fn check_condition_d2(spray: &dyn Spray, points: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
    points
        .iter()
        .map(|p| evaluate_point(spray, p).map(|rec| rec.residual_d2))
        .collect()
}

/// Per-point residuals of the two equivalent formulations
/// (‖d_Jα‖ first, ‖d_JR − 2α‖ second).
pub fn check_dj_alpha(spray: &dyn Spray, points: &[Vec<f64>]) -> Result<Vec<(f64, f64)>, Error> {
    let n = spray.dim();
    points
        .iter()
        .map(|p| {
            let frame = build_frame(spray, p)?;
            let alpha_jets = if n == 2 { alpha_2d_jets(&frame)? } else { frame.alpha_jets.clone() };
            let mut dj_alpha_sq = 0.0;
            let mut jacobian_sq = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let entry = alpha_jets[j].d1(n + i) - alpha_jets[i].d1(n + j);
                    dj_alpha_sq += entry * entry;
                    jacobian_sq += alpha_jets[j].d1(n + i) * alpha_jets[j].d1(n + i);
                }
            }
            let mut gap_sq = 0.0;
            let mut dj_r_sq = 0.0;
            let mut alpha_sq = 0.0;
            for j in 0..n {
                let diff = frame.dj_r[j] - 2.0 * alpha_jets[j].value();
                gap_sq += diff * diff;
                dj_r_sq += frame.dj_r[j] * frame.dj_r[j];
                alpha_sq += alpha_jets[j].value() * alpha_jets[j].value();
            }
            Ok((
                f64::sqrt(dj_alpha_sq) / (1.0 + f64::sqrt(jacobian_sq)),
                f64::sqrt(gap_sq) / (1.0 + f64::sqrt(dj_r_sq) + 2.0 * f64::sqrt(alpha_sq)),
            ))
        })
        .collect()
}

/// Per-point |S(R)| normalized by 1 + |R|·‖y‖.
pub fn check_weak_ricci_constant(
    spray: &dyn Spray,
    points: &[Vec<f64>],
) -> Result<Vec<f64>, Error> {
    points
        .iter()
        .map(|p| evaluate_point(spray, p).map(|rec| rec.residual_weak_ricci))
        .collect()
}

/// Applies the decision tree to a finished report.
pub fn verdict_from_report(report: ConditionReport, tol: f64) -> MetrizabilityVerdict {
    let n = report.dim;
    let status = if report.min_r_normalized < tol {
        VerdictStatus::RicciVanishesOutOfScope
    } else if report.sign_positive > 0 && report.sign_negative > 0 {
        VerdictStatus::InconclusiveMixedSign
    } else if report.max_rank_deficiency > 0 {
        VerdictStatus::NotMetrizableRankFails
    } else if n == 2 && report.max_residual_dj_alpha > tol {
        VerdictStatus::NotMetrizableD1Fails
    } else if n >= 3 && report.max_residual_d1 > tol {
        VerdictStatus::NotMetrizableD1Fails
    } else if report.max_residual_d2 > tol {
        VerdictStatus::NotMetrizableD2Fails
    } else {
        VerdictStatus::MetrizableConstantCurvature
    };
    let kappa = if status == VerdictStatus::MetrizableConstantCurvature {
        Some(if report.sign_positive > 0 { 1 } else { -1 })
    } else {
        None
    };
    MetrizabilityVerdict { status, kappa, witness: report }
}

/// Full decision for a sample: out-of-scope and mixed-sign gates, then
/// rank, then the curvature condition (d_Jα for n = 2, D1 for n ≥ 3),
/// then D2.
pub fn verdict(
    spray: &dyn Spray,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<MetrizabilityVerdict, Error> {
    Ok(verdict_from_report(condition_report(spray, points)?, tol))
}

/// Samples the domain, validates 2-homogeneity, and decides.
///
/// Returns the points alongside the verdict so reconstruction can run
/// on the same sample.
pub fn analyze(
    spray: &dyn Spray,
    spec: &SampleSpec,
    tol: f64,
) -> Result<(Vec<Vec<f64>>, MetrizabilityVerdict), Error> {
    let points = spec.generate(spray)?;
    let report = condition_report(spray, &points)?;
    if report.max_residual_homogeneity > HOMOGENEITY_TOL {
        let worst = report
            .points
            .iter()
            .max_by(|a, b| a.residual_homogeneity.total_cmp(&b.residual_homogeneity))
            .expect("nonempty sample");
        return Err(Error::Inhomogeneous {
            name: spray.name().to_string(),
            residual: worst.residual_homogeneity,
            point: worst.point.clone(),
        });
    }
    Ok((points, verdict_from_report(report, tol)))
}
