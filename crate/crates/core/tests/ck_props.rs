use curvreal::ck::{ck_solve, constant_scalar_conformal, constant_tau_taustar, QuasilinearSystem};
use curvreal::geometry::{constancy_degree, point_model, Curvature, MetricJet, StructureField, StructureFields};
use curvreal::realization::{realize, realize_structured};
use curvreal::scalar::{frac, int, QMatrix};
use curvreal::series::Series;
use curvreal::tensor::{random_model, BilinearForm, HermitianStructure, ModelKind, Rho};
use curvreal::Error;
use proptest::prelude::*;

fn rhs(order: usize) -> impl Strategy<Value = Series> {
    proptest::collection::vec((0u8..=3, 0u8..=3, -5i64..=5, 1i64..=4), 0..6).prop_map(move |t| {
        Series::from_terms(2, order, t.into_iter().map(|(a, b, p, q)| (vec![a, b], frac(p, q))))
    })
}

fn low_normal_free(u: &Series) -> bool {
    u.terms().all(|(e, _)| e[e.len() - 1] >= 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn second_normal_derivative_is_integrated(f in rhs(6), c in 1i64..=3) {
        let fc = f.clone();
        let sys = QuasilinearSystem::new(1, 2, move |u: &[Series]| {
            Ok(vec![&u[0].derive(1).derive(1).scale(&int(c)) - &fc])
        });
        let sol = ck_solve(&sys, 6).unwrap();
        let u = &sol.unknowns[0];
        prop_assert!(low_normal_free(u));
        let lhs = u.derive(1).derive(1).scale(&int(c)).truncate(4);
        prop_assert_eq!(lhs, f.truncate(4));
        prop_assert_eq!(sol.achieved, 4);
        prop_assert_eq!(&sol.leading_block()[(0, 0)], &int(2 * c));
    }

    #[test]
    fn solution_is_deterministic(f in rhs(5)) {
        let fc = f.clone();
        let sys = QuasilinearSystem::new(1, 2, move |u: &[Series]| {
            Ok(vec![&(&u[0].derive(1).derive(1) + &(&u[0] * &u[0])) - &fc])
        });
        prop_assert_eq!(ck_solve(&sys, 5).unwrap(), ck_solve(&sys, 5).unwrap());
    }
}

#[test]
fn coupled_pair() {
    // u'' = v + x₀, v'' = 2u − x₁² with zero Cauchy data on x₁ = 0
    let order = 7;
    let sys = QuasilinearSystem::new(2, 2, move |u: &[Series]| {
        let x0 = Series::var(2, order, 0);
        let x1 = Series::var(2, order, 1);
        let r0 = &(&u[0].derive(1).derive(1) - &u[1]) - &x0;
        let r1 = &(&u[1].derive(1).derive(1) - &u[0].scale(&int(2))) + &(&x1 * &x1);
        Ok(vec![r0, r1])
    });
    let sol = ck_solve(&sys, order).unwrap();
    let r = sys.residual(&sol.unknowns).unwrap();
    for s in &r {
        assert!(s.terms().all(|(e, _)| e.iter().map(|&x| x as usize).sum::<usize>() > order - 2));
    }
    // u = x₀x₁²/2 + …, v = −x₁⁴/12 + …
    assert_eq!(sol.unknowns[0].coeff(&[1, 2]), frac(1, 2));
    assert_eq!(sol.unknowns[1].coeff(&[0, 4]), frac(-1, 12));
    assert_eq!(sol.unknowns[1].coeff(&[1, 4]), frac(1, 12));
    assert!(sol.unknowns.iter().all(low_normal_free));
}

#[test]
fn degenerate_systems_are_rejected() {
    let no_normal = QuasilinearSystem::new(1, 2, |u: &[Series]| Ok(vec![u[0].derive(0).derive(0)]));
    assert!(matches!(ck_solve(&no_normal, 4), Err(Error::SingularStep { .. })));
    let wrong = QuasilinearSystem::new(2, 2, |u: &[Series]| Ok(vec![u[0].clone()]));
    assert!(ck_solve(&wrong, 4).is_err());
    let one = QuasilinearSystem::new(1, 1, |u: &[Series]| Ok(vec![u[0].derive(0).derive(0)]));
    assert!(matches!(ck_solve(&one, 1), Err(Error::OrderTooSmall { .. })));
}

#[test]
fn flat_pipelines_are_trivial() {
    let g = MetricJet::constant(BilinearForm::standard(2, 2).eps(), 4).unwrap();
    let s = StructureField::constant(&HermitianStructure::standard(4, Rho::Para), Rho::Para, 4);
    let sol = constant_tau_taustar(&g, &s, 4).unwrap();
    assert!(sol.xi.is_zero() && sol.eta.is_zero());
    assert_eq!(sol.metric, g);
    let c = constant_scalar_conformal(&g, 4).unwrap();
    assert!(c.phi.is_zero());
}

#[test]
fn conformal_pipeline_in_sheared_frame() {
    let (model, _) = random_model(3, 0, 3, 21, ModelKind::Plain).unwrap();
    let g = realize(&model, 5).unwrap().metric;
    let shear = QMatrix::from_i64(&[&[1, 2, 0], &[0, 1, -1], &[0, 0, 2]]);
    let moved = g.pullback_linear(&shear).unwrap();
    assert!(!BilinearForm::new(moved.at_origin()).unwrap().is_orthonormal());
    let sol = constant_scalar_conformal(&moved, 5).unwrap();
    let tau = Curvature::new(&sol.metric).unwrap().scalar();
    assert_eq!(constancy_degree(&tau), 3);
    assert_eq!(sol.metric.at_origin(), moved.at_origin());
    assert!(sol.phi.terms().all(|(e, _)| e.iter().map(|&x| x as usize).sum::<usize>() > 2));
}

#[test]
fn hermitian_pipeline_in_sheared_frame() {
    let (model, structure) = random_model(4, 2, 2, 9, ModelKind::Hermitian).unwrap();
    let r = realize_structured(&model, &structure, 4).unwrap();
    let StructureFields::Hermitian(s) = &r.fields else { unreachable!() };
    let l = QMatrix::from_i64(&[&[1, 1, 0, 0], &[0, 1, 0, 1], &[0, 0, 1, 0], &[2, 0, 0, 1]]);
    let li = l.inverse().unwrap();
    let g = r.metric.pullback_linear(&l).unwrap();
    let sm = s.pullback_linear(&l, &li);
    let sol = constant_tau_taustar(&g, &sm, 4).unwrap();
    let c = Curvature::new(&sol.metric).unwrap();
    assert_eq!(constancy_degree(&c.scalar()), 2);
    assert_eq!(constancy_degree(&c.star_scalar(&sm)), 2);
    let (pm, _) = point_model(&sol.metric, &StructureFields::None).unwrap();
    assert_eq!(pm.tensor(), &model.tensor().pullback(&l));
    assert_eq!(sol.metric.at_origin(), g.at_origin());
}
