//! Structured run reports: the JSON schema and the plain-text renderer
//! shared by the command-line front end and the integration tests.

use serde::{Deserialize, Serialize};

use crate::checks::{ConditionReport, MetrizabilityVerdict, SampleSpec, VerdictStatus, HOMOGENEITY_TOL};
use crate::finsler::{Reconstruction, ReconstructionOutcome};

/// Echo of the configuration a report was produced under.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub name: String,
    pub kind: String,
    pub mode: String,
    pub dim: usize,
    pub points: usize,
    pub seed: u64,
    pub tol: f64,
    #[serde(rename = "box")]
    pub intervals: Vec<(f64, f64)>,
    pub margin: f64,
}

/// One residual-style check: worst value over the sample and whether
/// it stayed under its tolerance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckSummary {
    pub max_residual: f64,
    pub pass: bool,
}

/// The rank condition on the 2-form d(d_J Ric).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankSummary {
    pub required: usize,
    pub min_rank: usize,
    pub max_deficiency: usize,
    pub pass: bool,
}

/// Sign and size of the Ricci scalar over the sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RicciSummary {
    pub min_abs_r: f64,
    pub min_normalized: f64,
    pub sign_positive: usize,
    pub sign_negative: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChecksBlock {
    pub homogeneity: CheckSummary,
    pub rank: RankSummary,
    pub dj_alpha: CheckSummary,
    pub d1: CheckSummary,
    pub d2: CheckSummary,
    pub isotropy: CheckSummary,
    pub weak_ricci: CheckSummary,
    pub ricci: RicciSummary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerdictBlock {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<i8>,
    pub explanation: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionBlock {
    pub outcome: String,
    pub kappa: f64,
    pub max_el_residual: f64,
    pub max_flag_residual: f64,
    pub min_metric_eigenvalue: f64,
    pub energy_min: f64,
    pub energy_max: f64,
}

/// One row of the optional per-point table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointRow {
    pub point: Vec<f64>,
    pub r: f64,
    pub s_r: f64,
    pub rank: usize,
    pub residual_d1: f64,
    pub residual_d2: f64,
    pub residual_dj_alpha: f64,
    pub residual_iso: f64,
    pub residual_homogeneity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
}

/// Full run report; serializes to the stable JSON schema with
/// top-level keys `config`, `checks`, `verdict`, `reconstruction`,
/// `points`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub config: ConfigEcho,
    pub checks: ChecksBlock,
    pub verdict: VerdictBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconstructionBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<PointRow>>,
}

/// Maps a verdict status to its process exit code.
pub fn exit_code(status: VerdictStatus) -> i32 {
    match status {
        VerdictStatus::MetrizableConstantCurvature => 0,
        VerdictStatus::NotMetrizableD1Fails
        | VerdictStatus::NotMetrizableD2Fails
        | VerdictStatus::NotMetrizableRankFails => 1,
        VerdictStatus::RicciVanishesOutOfScope | VerdictStatus::InconclusiveMixedSign => 2,
    }
}

/// Self-contained justification of a verdict in terms of the
/// conditions that decided it.
pub fn explain(status: VerdictStatus, dim: usize) -> String {
    match status {
        VerdictStatus::MetrizableConstantCurvature => "The Ricci scalar R keeps one sign and \
            stays away from zero, the 2-form d(d_J Ric) is nondegenerate, the isotropy 1-form \
            alpha is closed along the fibers (equivalently d_J R = 2 alpha), and R is \
            horizontally constant. Under these conditions F^2 = sign(R) R is a constant-flag-\
            curvature energy for the spray, with kappa = sign(R)."
            .to_string(),
        VerdictStatus::NotMetrizableD1Fails => {
            if dim == 2 {
                "The isotropy 1-form alpha of the spray is not closed along the fibers \
                 (d_J alpha != 0, equivalently d_J R != 2 alpha). A two-dimensional spray is \
                 metrizable by a Finsler function of nonzero constant flag curvature exactly \
                 when this condition and horizontal constancy of R both hold, so this spray \
                 is not."
                    .to_string()
            } else {
                "The curvature tensor fails the constant-curvature shape: 2(n-1) Phi differs \
                 from 2 Ric J - d_J Ric (x) C. An isotropic spray with nondegenerate d(d_J Ric) \
                 must satisfy this identity to carry a constant-curvature energy, so this spray \
                 is not metrizable at constant flag curvature."
                    .to_string()
            }
        }
        VerdictStatus::NotMetrizableD2Fails => "The Ricci scalar is not horizontally constant \
            (d_h Ric != 0). For an isotropic spray with closed isotropy form and nondegenerate \
            d(d_J Ric), horizontal constancy of the Ricci scalar is necessary for Finsler \
            metrizability, so this spray is not metrizable."
            .to_string(),
        VerdictStatus::NotMetrizableRankFails => "The 2-form d(d_J Ric) is degenerate: its \
            rank falls short of 2n at sampled points. The candidate energy F^2 = sign(R) R \
            then has a singular metric tensor, and no constant-flag-curvature Finsler function \
            can metrize the spray."
            .to_string(),
        VerdictStatus::RicciVanishesOutOfScope => "The Ricci scalar vanishes (to working \
            precision) somewhere on the sample. The decision procedure assumes non-vanishing \
            Ricci curvature, because the candidate energy F^2 = sign(R) R degenerates where R \
            is zero; no conclusion is drawn for this spray."
            .to_string(),
        VerdictStatus::InconclusiveMixedSign => "The Ricci scalar takes both signs across the \
            sample, so sign(R) does not select a candidate curvature and the reconstruction \
            F^2 = sign(R) R is undefined on this domain. A constant-curvature energy would \
            force one sign everywhere; the verdict is inconclusive."
            .to_string(),
    }
}

/// Assembles the report for one finished analysis.
pub fn build_report(
    name: &str,
    kind: &str,
    mode: &str,
    spec: &SampleSpec,
    tol: f64,
    verdict: &MetrizabilityVerdict,
    reconstruction: Option<&Reconstruction>,
    per_point: bool,
) -> Report {
    let witness = &verdict.witness;
    let config = ConfigEcho {
        name: name.to_string(),
        kind: kind.to_string(),
        mode: mode.to_string(),
        dim: witness.dim,
        points: spec.count,
        seed: spec.seed,
        tol,
        intervals: spec.intervals.clone(),
        margin: spec.margin,
    };
    let checks = checks_block(witness, tol);
    let explanation = explain(verdict.status, witness.dim);
    let verdict_block = VerdictBlock {
        status: verdict.status.key().to_string(),
        kappa: verdict.kappa,
        explanation,
    };
    let reconstruction_block = reconstruction.map(|rec| ReconstructionBlock {
        outcome: match rec.outcome {
            ReconstructionOutcome::Finsler => "finsler".to_string(),
            ReconstructionOutcome::ConicPseudoFinsler => "conic_pseudo_finsler".to_string(),
        },
        kappa: rec.kappa,
        max_el_residual: rec.max_el,
        max_flag_residual: rec.max_flag,
        min_metric_eigenvalue: rec.min_g_eigen,
        energy_min: rec.f2_min,
        energy_max: rec.f2_max,
    });
    let points = per_point.then(|| {
        witness
            .points
            .iter()
            .enumerate()
            .map(|(i, record)| PointRow {
                point: record.point.clone(),
                r: record.r_value,
                s_r: record.s_r,
                rank: record.rank,
                residual_d1: record.residual_d1,
                residual_d2: record.residual_d2,
                residual_dj_alpha: record.residual_dj_alpha,
                residual_iso: record.residual_iso,
                residual_homogeneity: record.residual_homogeneity,
                energy: reconstruction.map(|rec| rec.samples[i].f2),
            })
            .collect()
    });
    Report {
        config,
        checks,
        verdict: verdict_block,
        reconstruction: reconstruction_block,
        points,
    }
}

fn checks_block(witness: &ConditionReport, tol: f64) -> ChecksBlock {
    ChecksBlock {
        homogeneity: CheckSummary {
            max_residual: witness.max_residual_homogeneity,
            pass: witness.max_residual_homogeneity <= HOMOGENEITY_TOL,
        },
        rank: RankSummary {
            required: 2 * witness.dim,
            min_rank: witness
                .points
                .iter()
                .map(|r| r.rank)
                .min()
                .unwrap_or(0),
            max_deficiency: witness.max_rank_deficiency,
            pass: witness.max_rank_deficiency == 0,
        },
        dj_alpha: CheckSummary {
            max_residual: witness.max_residual_dj_alpha,
            pass: witness.max_residual_dj_alpha <= tol,
        },
        d1: CheckSummary {
            max_residual: witness.max_residual_d1,
            pass: witness.max_residual_d1 <= tol,
        },
        d2: CheckSummary {
            max_residual: witness.max_residual_d2,
            pass: witness.max_residual_d2 <= tol,
        },
        isotropy: CheckSummary {
            max_residual: witness.max_residual_iso,
            pass: witness.max_residual_iso <= tol,
        },
        weak_ricci: CheckSummary {
            max_residual: witness.max_residual_weak_ricci,
            pass: witness.max_residual_weak_ricci <= tol,
        },
        ricci: RicciSummary {
            min_abs_r: witness.min_abs_r,
            min_normalized: witness.min_r_normalized,
            sign_positive: witness.sign_positive,
            sign_negative: witness.sign_negative,
        },
    }
}

/// Renders the report as aligned human-readable text.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let c = &report.config;
    out.push_str(&format!("name: {} ({}, n = {})\n", c.name, c.kind, c.dim));
    let box_desc = if c.intervals.iter().all(|iv| *iv == c.intervals[0]) {
        format!("[{}, {}]^{}", c.intervals[0].0, c.intervals[0].1, c.intervals.len())
    } else {
        c.intervals
            .iter()
            .map(|(lo, hi)| format!("[{lo}, {hi}]"))
            .collect::<Vec<_>>()
            .join(" x ")
    };
    out.push_str(&format!(
        "sample: {} points, seed {}, box {}, margin {}, tol {:.1e}\n",
        c.points, c.seed, box_desc, c.margin, c.tol
    ));
    let line = |label: &str, s: &CheckSummary| {
        format!(
            "  {label:<22} max residual {:>10.3e}   {}\n",
            s.max_residual,
            if s.pass { "pass" } else { "FAIL" }
        )
    };
    out.push_str("checks:\n");
    out.push_str(&line("homogeneity", &report.checks.homogeneity));
    let rank = &report.checks.rank;
    out.push_str(&format!(
        "  {:<22} min rank {}/{}          {}\n",
        "rank d(dJ Ric)",
        rank.min_rank,
        rank.required,
        if rank.pass { "pass" } else { "FAIL" }
    ));
    out.push_str(&line("d_J alpha", &report.checks.dj_alpha));
    out.push_str(&line("D1 curvature shape", &report.checks.d1));
    out.push_str(&line("D2 (d_h Ric)", &report.checks.d2));
    out.push_str(&line("isotropy", &report.checks.isotropy));
    out.push_str(&line("weak Ricci S(R)", &report.checks.weak_ricci));
    let ricci = &report.checks.ricci;
    out.push_str(&format!(
        "  {:<22} min |R| {:.3e}, sign +{}/-{}\n",
        "Ricci scalar", ricci.min_abs_r, ricci.sign_positive, ricci.sign_negative
    ));
    match report.verdict.kappa {
        Some(kappa) => out.push_str(&format!(
            "verdict: {} (kappa = {kappa})\n",
            report.verdict.status
        )),
        None => out.push_str(&format!("verdict: {}\n", report.verdict.status)),
    }
    out.push_str(&format!("  {}\n", report.verdict.explanation));
    if let Some(rec) = &report.reconstruction {
        out.push_str(&format!(
            "reconstruction: {} energy, kappa = {}\n",
            rec.outcome, rec.kappa
        ));
        out.push_str(&format!(
            "  max EL residual {:.3e}, max flag residual {:.3e}, min metric eigenvalue {:.3e}\n",
            rec.max_el_residual, rec.max_flag_residual, rec.min_metric_eigenvalue
        ));
        out.push_str(&format!(
            "  F^2 over sample: [{:.6e}, {:.6e}]\n",
            rec.energy_min, rec.energy_max
        ));
    }
    if let Some(rows) = &report.points {
        out.push_str("points:\n");
        for row in rows {
            let coords = row
                .point
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(", ");
            out.push_str(&format!(
                "  ({coords})  R {:+.6e}  rank {}  D1 {:.2e}  D2 {:.2e}  dJa {:.2e}\n",
                row.r, row.rank, row.residual_d1, row.residual_d2, row.residual_dj_alpha
            ));
        }
    }
    out
}
