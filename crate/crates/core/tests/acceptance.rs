//! End-to-end acceptance checks. Each test exercises one headline
//! scenario of the pipeline at its stated tolerance, so the test list
//! doubles as the release gate.

mod common;

use std::time::Instant;

use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use sprayck::checks::{self, SampleSpec, VerdictStatus};
use sprayck::dsl::{evaluate, parse_expression, Definition, Expression, SprayDefinition};
use sprayck::finsler::{
    check_einstein, energy_jet, euler_lagrange_parts, flag_curvature_residual,
    reconstruct_finsler, ReconstructionOutcome,
};
use sprayck::gallery::get_example;
use sprayck::geom::{build_frame, ExpressionSpray, Spray};
use sprayck::jet::{jet_evaluate, MultiIndex};

fn rel_close(found: f64, expected: f64, tol: f64) -> bool {
    (found - expected).abs() <= tol * (1.0 + expected.abs())
}

#[test]
fn criterion_1_poincare_half_plane() {
    let entry = get_example("poincare_half_plane", &[]).unwrap();
    let spray = common::spray_of(&entry.definition);
    let spec = entry.sample_spec();

    let start = Instant::now();
    let (points, verdict) = checks::analyze(&*spray, &spec, 1e-8).unwrap();
    let rec = reconstruct_finsler(&*spray, &points).unwrap();
    let elapsed = start.elapsed();

    assert_eq!(verdict.status, VerdictStatus::MetrizableConstantCurvature);
    assert_eq!(verdict.kappa, Some(-1));
    assert_eq!(points.len(), 64);

    for record in &verdict.witness.points {
        let (x2, y1, y2) = (record.point[1], record.point[2], record.point[3]);
        let r_expected = -(y1 * y1 + y2 * y2) / (x2 * x2);
        assert!(
            rel_close(record.r_value, r_expected, 1e-9),
            "Ricci scalar off at {:?}: found {}, expected {}",
            record.point,
            record.r_value,
            r_expected
        );
    }

    assert_eq!(rec.outcome, ReconstructionOutcome::Finsler);
    assert_eq!(rec.kappa, -1.0);
    for sample in &rec.samples {
        let (x2, y1, y2) = (sample.point[1], sample.point[2], sample.point[3]);
        let f2_expected = (y1 * y1 + y2 * y2) / (x2 * x2);
        assert!(
            rel_close(sample.f2, f2_expected, 1e-9),
            "reconstructed energy off at {:?}: found {}, expected {}",
            sample.point,
            sample.f2,
            f2_expected
        );
    }
    assert!(rec.max_el <= 1e-8, "Euler-Lagrange residual {}", rec.max_el);
    assert!(rec.max_flag <= 1e-8, "flag curvature residual {}", rec.max_flag);

    assert!(elapsed.as_secs_f64() < 1.0, "pipeline took {:?}", elapsed);
}

#[test]
fn criterion_2_poincare_disk_geodesic_spray() {
    let entry = get_example("finsler_poincare_disk", &[]).unwrap();
    let def = match &entry.definition {
        Definition::Finsler(f) => f.clone(),
        Definition::Spray(_) => panic!("disk entry should be a Finsler definition"),
    };
    let spray = common::spray_of(&entry.definition);
    let spec = entry.sample_spec();
    let points = spec.generate(&*spray).unwrap();
    assert_eq!(points.len(), 64);

    for point in &points {
        let residual = flag_curvature_residual(&*spray, &def, -0.25, point).unwrap();
        assert!(residual <= 1e-6, "flag residual {} at {:?}", residual, point);
    }

    let verdict = checks::verdict(&*spray, &points, 1e-8).unwrap();
    assert_eq!(verdict.status, VerdictStatus::MetrizableConstantCurvature);
    assert_eq!(verdict.kappa, Some(-1));

    let rec = reconstruct_finsler(&*spray, &points).unwrap();
    assert_eq!(rec.outcome, ReconstructionOutcome::Finsler);
    for sample in &rec.samples {
        let f2_input = energy_jet(&def, &sample.point, 0).unwrap().value();
        let ratio = sample.f2 / f2_input;
        assert!(
            (ratio - 0.25).abs() <= 1e-6,
            "energy ratio {} at {:?}",
            ratio,
            sample.point
        );
    }
}

#[test]
fn criterion_3_bao_robles_einstein_not_metrizable() {
    let entry = get_example("bao_robles_paraboloid", &[]).unwrap();
    let def = match &entry.definition {
        Definition::Finsler(f) => f.clone(),
        Definition::Spray(_) => panic!("paraboloid entry should be a Finsler definition"),
    };
    let spray = common::spray_of(&entry.definition);
    let points = entry.sample_spec().generate(&*spray).unwrap();

    let pairs = checks::check_dj_alpha(&*spray, &points).unwrap();
    for (point, (a, b)) in points.iter().zip(&pairs) {
        assert!(a.max(*b) <= 1e-7, "d_J alpha residual {} at {:?}", a.max(*b), point);
        let frame = build_frame(&*spray, point).unwrap();
        assert!(
            frame.dh_r.amax() >= 1e-3,
            "horizontal derivative of R only {} at {:?}",
            frame.dh_r.amax(),
            point
        );
    }

    let verdict = checks::verdict(&*spray, &points, 1e-8).unwrap();
    assert_eq!(verdict.status, VerdictStatus::NotMetrizableD2Fails);
    assert!(verdict.kappa.is_none());

    let einstein = check_einstein(&*spray, &def, &points, 1e-6).unwrap();
    assert!(einstein.pass, "Einstein residual {}", einstein.max_residual);
    for (point, lambda) in points.iter().zip(&einstein.lambda) {
        let (x1, x2) = (point[0], point[1]);
        let u = 1.0 + 4.0 * x1 * x1 + 4.0 * x2 * x2;
        let kappa_expected = 4.0 / (u * u);
        assert!(
            rel_close(*lambda, kappa_expected, 1e-6),
            "Einstein factor {} vs curvature {} at {:?}",
            lambda,
            kappa_expected,
            point
        );
    }
}

#[test]
fn criterion_4_shen_randers_d1_fails() {
    let entry = get_example("shen_randers_11_2", &[]).unwrap();
    let def = match &entry.definition {
        Definition::Finsler(f) => f.clone(),
        Definition::Spray(_) => panic!("Randers entry should be a Finsler definition"),
    };
    let spray = common::spray_of(&entry.definition);
    let points = entry.sample_spec().generate(&*spray).unwrap();

    let pairs = checks::check_dj_alpha(&*spray, &points).unwrap();
    let failing = pairs.iter().filter(|(a, b)| a.max(*b) >= 1e-4).count();
    assert!(
        10 * failing >= 9 * points.len(),
        "d_J alpha residual reaches 1e-4 at only {} of {} points",
        failing,
        points.len()
    );

    let report = checks::condition_report(&*spray, &points).unwrap();
    assert!(report.max_residual_dj_alpha > 1e-8);
    assert!(report.max_residual_d1 > 1e-8);

    let verdict = checks::verdict(&*spray, &points, 1e-8).unwrap();
    assert_ne!(verdict.status, VerdictStatus::MetrizableConstantCurvature);
    assert!(verdict.kappa.is_none());

    for point in &points {
        let frame = build_frame(&*spray, point).unwrap();
        let f2 = energy_jet(&def, point, 2).unwrap();
        let (_, residual) = euler_lagrange_parts(&frame, &f2);
        assert!(
            residual <= 1e-8,
            "geodesic spray Euler-Lagrange residual {} at {:?}",
            residual,
            point
        );
    }
}

#[test]
fn criterion_5_conic_affine_pseudo_finsler() {
    let entry = get_example("conic_affine", &[]).unwrap();
    let spray = common::spray_of(&entry.definition);
    let points = entry.sample_spec().generate(&*spray).unwrap();

    let report = checks::condition_report(&*spray, &points).unwrap();
    for record in &report.points {
        assert_eq!(record.rank_deficiency, 0, "rank drop at {:?}", record.point);
        assert!(record.residual_dj_alpha <= 1e-8);
        assert!(record.residual_d2 <= 1e-8);
        let (x1, x2, y1, y2) =
            (record.point[0], record.point[1], record.point[2], record.point[3]);
        let s = x1 + x2;
        let r_expected = -4.0 * y1 * y2 / (s * s);
        assert!(
            rel_close(record.r_value, r_expected, 1e-9),
            "Ricci scalar off at {:?}: found {}, expected {}",
            record.point,
            record.r_value,
            r_expected
        );
    }

    let verdict = checks::verdict_from_report(report, 1e-8);
    assert_eq!(verdict.status, VerdictStatus::MetrizableConstantCurvature);
    assert_eq!(verdict.kappa, Some(-1));

    let rec = reconstruct_finsler(&*spray, &points).unwrap();
    assert_eq!(rec.outcome, ReconstructionOutcome::ConicPseudoFinsler);
    assert_eq!(rec.kappa, -1.0);
    assert!(rec.min_g_eigen < 0.0, "metric should be indefinite on the cone");
    assert!(rec.max_el <= 1e-8);
    assert!(rec.max_flag <= 1e-8);
}

#[test]
fn criterion_6_projective_deformation_family() {
    for &(lambda, expected_status) in &[
        (0.0, VerdictStatus::MetrizableConstantCurvature),
        (0.5, VerdictStatus::NotMetrizableD2Fails),
        (1.0, VerdictStatus::RicciVanishesOutOfScope),
        (2.0, VerdictStatus::NotMetrizableD2Fails),
    ] {
        let entry =
            get_example("deformed_half_plane", &[("lambda".to_string(), lambda)]).unwrap();
        let spray = common::spray_of(&entry.definition);
        let spec = entry.sample_spec();
        let (points, verdict) = checks::analyze(&*spray, &spec, 1e-8).unwrap();
        assert_eq!(verdict.status, expected_status, "lambda = {}", lambda);

        let factor = lambda * lambda - 1.0;
        for point in &points {
            let frame = build_frame(&*spray, point).unwrap();
            let (x2, y1, y2) = (point[1], point[2], point[3]);
            let y_norm = (y1 * y1 + y2 * y2).sqrt();

            for i in 0..2 {
                for j in 0..2 {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    let phi_expected = factor
                        * (y_norm * y_norm * delta - point[2 + i] * point[2 + j])
                        / (x2 * x2);
                    assert!(
                        (frame.phi[(i, j)] - phi_expected).abs()
                            <= 1e-8 * (1.0 + frame.phi.norm()),
                        "Jacobi endomorphism entry ({}, {}) at {:?}, lambda = {}",
                        i,
                        j,
                        point,
                        lambda
                    );
                }
            }

            if lambda == 0.5 || lambda == 2.0 {
                let scale = -4.0 * lambda * factor * y_norm / (x2 * x2 * x2);
                for j in 0..2 {
                    let expected = scale * point[2 + j];
                    assert!(
                        (frame.dh_r[j] - expected).abs() <= 1e-6 * (1.0 + expected.abs()),
                        "d_h R component {} at {:?}, lambda = {}: found {}, expected {}",
                        j,
                        point,
                        lambda,
                        frame.dh_r[j],
                        expected
                    );
                }
            }
        }
    }

    let entry = get_example("deformed_half_plane", &[("lambda".to_string(), 2.0)]).unwrap();
    let spray = common::spray_of(&entry.definition);
    let frame = build_frame(&*spray, &[0.3, 1.2, 0.7, -0.4]).unwrap();
    let root = 65.0f64.sqrt();
    assert!(rel_close(frame.dh_r[0], -35.0 * root / 36.0, 1e-12));
    assert!(rel_close(frame.dh_r[1], 5.0 * root / 9.0, 1e-12));
}

fn shear_fixture() -> SprayDefinition {
    SprayDefinition {
        name: "shear".to_string(),
        dim: 2,
        g: vec![
            parse_expression("x2*(y1)^2/2", 2).unwrap(),
            Expression::Const(0.0),
        ],
        constraints: vec![
            parse_expression("x2", 2).unwrap(),
            parse_expression("y1*y2", 2).unwrap(),
        ],
    }
}

#[test]
fn criterion_7_property_suites() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(2026);
    let tol = 1e-8;

    let mut cases_vertical = 0usize;
    let mut cases_trace = 0usize;
    let mut cases_closedness = 0usize;
    let mut cases_d1 = 0usize;

    for k in 0..600 {
        let dim = if k % 6 == 5 { 3 } else { 2 };
        let def = common::random_quadratic_spray(&mut rng, dim);
        let spray = ExpressionSpray::new(def);
        let point = common::random_point(&mut rng, dim);
        let frame = build_frame(&spray, &point).unwrap();

        let y = DVector::from_column_slice(&point[dim..]);
        let annihilated = &frame.phi * &y;
        assert!(
            annihilated.amax() <= 1e-9 * (1.0 + frame.phi.norm() * y.norm()),
            "Phi applied to y is {} at {:?}",
            annihilated.amax(),
            point
        );
        cases_vertical += 1;

        assert!(
            (frame.phi.trace() - frame.ric).abs() <= 1e-12 * (1.0 + frame.ric.abs()),
            "trace of Phi disagrees with the Ricci curvature at {:?}",
            point
        );
        let mut scaled = point.clone();
        for y_coord in scaled[dim..].iter_mut() {
            *y_coord *= 1.7;
        }
        let frame_scaled = build_frame(&spray, &scaled).unwrap();
        let ric_expected = 1.7 * 1.7 * frame.ric;
        assert!(
            (frame_scaled.ric - ric_expected).abs() <= 1e-9 * (1.0 + ric_expected.abs()),
            "Ricci curvature not quadratic in y at {:?}",
            point
        );
        cases_trace += 1;

        let (a, b) = checks::check_dj_alpha(&spray, std::slice::from_ref(&point)).unwrap()[0];
        assert!(
            !(a < tol / 10.0 && b > tol * 10.0) && !(b < tol / 10.0 && a > tol * 10.0),
            "closedness of alpha ({}) and d_J R = 2 alpha ({}) disagree at {:?}",
            a,
            b,
            point
        );
        cases_closedness += 1;

        if dim == 2 {
            let record = checks::evaluate_point(&spray, &point).unwrap();
            let (d1, dja) = (record.residual_d1, record.residual_dj_alpha);
            assert!(
                !(d1 < tol / 10.0 && dja > tol * 10.0)
                    && !(dja < tol / 10.0 && d1 > tol * 10.0),
                "first metrizability condition ({}) and d_J alpha ({}) disagree at {:?}",
                d1,
                dja,
                point
            );
            cases_d1 += 1;
        }
    }

    let half_plane = get_example("poincare_half_plane", &[]).unwrap();
    let hp_spray = common::spray_of(&half_plane.definition);
    let hp_points = half_plane.sample_spec().generate(&*hp_spray).unwrap();
    for (point, (a, b)) in
        hp_points.iter().zip(checks::check_dj_alpha(&*hp_spray, &hp_points).unwrap())
    {
        assert!(a <= 1e-9 && b <= 1e-9, "half-plane control at {:?}", point);
        let record = checks::evaluate_point(&*hp_spray, point).unwrap();
        assert!(record.residual_d1 <= 1e-9 && record.residual_dj_alpha <= 1e-9);
    }
    let shear = ExpressionSpray::new(shear_fixture());
    let shear_points = SampleSpec::default_for(2).generate(&shear).unwrap();
    for (point, (a, b)) in
        shear_points.iter().zip(checks::check_dj_alpha(&shear, &shear_points).unwrap())
    {
        assert!(a > 1e-6 && b > 1e-6, "shear control at {:?}", point);
        let record = checks::evaluate_point(&shear, point).unwrap();
        assert!(record.residual_d1 > 1e-6 && record.residual_dj_alpha > 1e-6);
    }

    let mut cases_homogeneity = 0usize;
    for k in 0..500 {
        let dim = if k % 5 == 4 { 3 } else { 2 };
        let def = common::random_quadratic_spray(&mut rng, dim);
        let spray = ExpressionSpray::new(def);
        let point = common::random_point(&mut rng, dim);
        let lambda = [0.5, 2.0, 3.0][k % 3];

        let jets = spray.coefficient_jets(&point, 1).unwrap();
        let mut scaled = point.clone();
        for y_coord in scaled[dim..].iter_mut() {
            *y_coord *= lambda;
        }
        let scaled_values = spray.coefficient_jets(&scaled, 0).unwrap();
        for i in 0..dim {
            let expected = lambda * lambda * jets[i].value();
            assert!(
                (scaled_values[i].value() - expected).abs() <= 1e-9 * (1.0 + expected.abs()),
                "coefficient {} not quadratic under y scaling at {:?}",
                i,
                point
            );
            let euler: f64 =
                (0..dim).map(|j| point[dim + j] * jets[i].d1(dim + j)).sum();
            let twice = 2.0 * jets[i].value();
            assert!(
                (euler - twice).abs() <= 1e-9 * (1.0 + twice.abs()),
                "Euler relation fails for coefficient {} at {:?}",
                i,
                point
            );
        }
        cases_homogeneity += 1;
    }

    let mut cases_fd = 0usize;
    for _ in 0..500 {
        let expr = common::random_smooth_expression(&mut rng, 2, 3);
        let point: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let total = rng.random_range(1..=3u8);
        let mut index = vec![0u8; 4];
        for _ in 0..total {
            index[rng.random_range(0..4)] += 1;
        }

        let jet = jet_evaluate(&expr, &point, 3).unwrap();
        let ad = jet.partial(&MultiIndex(index.clone())).unwrap();
        let fd = common::finite_difference_partial2(
            &|p: &[f64]| evaluate::<f64>(&expr, p).unwrap(),
            &point,
            &index,
            0.05,
        );
        assert!(
            (ad - fd).abs() <= 1e-5 * (1.0 + ad.abs()),
            "derivative order {:?} of {:?}: jet {}, finite differences {}",
            index,
            point,
            ad,
            fd
        );
        cases_fd += 1;
    }

    assert!(cases_vertical >= 500);
    assert!(cases_trace >= 500);
    assert!(cases_closedness >= 500);
    assert!(cases_d1 >= 500);
    assert!(cases_homogeneity >= 500);
    assert!(cases_fd >= 500);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "property suites took {:?}", elapsed);
}
