use curvreal::geometry::{point_model, Curvature, MetricJet, StructureField, StructureFields};
use curvreal::realization::{
    extend_structure, hermitian_variation, hyper_variation, realize, realize_conformally_flat, realize_structured,
    structure_root, Provenance,
};
use curvreal::scalar::{frac, int, QMatrix};
use curvreal::series::{Series, SeriesMatrix};
use curvreal::tensor::{
    random_conformally_flat, random_model, ricci, HermitianStructure, ModelKind, Rho, Structure,
};
use proptest::prelude::*;

/// Random series vanishing at the origin.
fn centered(m: usize, order: usize) -> impl Strategy<Value = Series> {
    proptest::collection::vec((0..m, 0..m, -3i64..=3, 1i64..=2), 0..5).prop_map(move |t| {
        let terms = t.into_iter().map(|(i, j, p, q)| {
            let mut e = vec![0u8; m];
            e[i] += 1;
            e[j] += 1;
            (e, frac(p, q))
        });
        let lin = (0..m).map(|i| Series::var(m, order, i).scale(&int(i as i64 - 1)));
        let mut s = Series::from_terms(m, order, terms);
        for l in lin {
            s = &s + &l;
        }
        s
    })
}

fn compatible(j: &SeriesMatrix, h: &MetricJet, rho: Rho) -> bool {
    let n = j.order().min(h.order());
    let j = j.truncate(n);
    let g = h.matrix().truncate(n);
    j.transpose().mul(&g).mul(&j) == g.scale(&-rho.scalar())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn realization_reproduces_model(m in 2usize..=5, seed in 0u64..10_000, p_frac in 0usize..=5) {
        let p = p_frac.min(m);
        let (model, _) = random_model(m, p, m - p, seed, ModelKind::Plain).unwrap();
        let r = realize(&model, 3).unwrap();
        prop_assert_eq!(r.provenance, Provenance::Quadratic);
        let (pm, _) = point_model(&r.metric, &r.fields).unwrap();
        prop_assert_eq!(pm, model);
    }

    #[test]
    fn conformally_flat_realization(m in 3usize..=5, seed in 0u64..10_000, p_frac in 0usize..=5) {
        let p = p_frac.min(m);
        let model = random_conformally_flat(m, p, seed).unwrap();
        let r = realize_conformally_flat(&model, 3).unwrap();
        let c = Curvature::new(&r.metric).unwrap();
        prop_assert_eq!(c.ricci().eval_at_origin(), ricci(&model));
        prop_assert_eq!(&c.riemann.eval_at_origin(), model.tensor());
        prop_assert!(c.weyl().unwrap().is_zero());
    }

    #[test]
    fn hermitian_variation_stays_compatible(
        kind in prop::sample::select(vec![ModelKind::Hermitian, ModelKind::Para]),
        seed in 0u64..10_000,
        xi in centered(4, 3),
        eta in centered(4, 3),
    ) {
        let p = if kind == ModelKind::Para { 2 } else { 2 * (seed as usize % 3) };
        let (model, structure) = random_model(4, p, 4 - p, seed, kind).unwrap();
        let r = realize_structured(&model, &structure, 3).unwrap();
        let StructureFields::Hermitian(s) = &r.fields else { unreachable!() };
        let h = hermitian_variation(&r.metric, s, &xi, &eta).unwrap();
        prop_assert!(h.matrix().is_symmetric());
        prop_assert_eq!(h.at_origin(), r.metric.at_origin());
        prop_assert!(compatible(&s.j, &h, s.rho));
    }

    #[test]
    fn hyper_variation_stays_compatible(
        kind in prop::sample::select(vec![ModelKind::HyperPseudo, ModelKind::HyperPara]),
        xi in centered(8, 2),
        eta in centered(8, 2),
    ) {
        let (p, q) = if kind == ModelKind::HyperPara { (4, 4) } else { (0, 8) };
        let (model, structure) = random_model(8, p, q, 3, kind).unwrap();
        let r = realize_structured(&model, &structure, 2).unwrap();
        let StructureFields::Hyper(t) = &r.fields else { unreachable!() };
        let h = hyper_variation(&r.metric, t, &xi, &eta).unwrap();
        for f in &t.fields {
            prop_assert!(compatible(&f.j, &h, f.rho));
        }
    }
}

#[test]
fn extension_identities_hold_through_order() {
    for (kind, p, q) in [(ModelKind::Hermitian, 0, 4), (ModelKind::Hermitian, 2, 2), (ModelKind::Para, 2, 2)] {
        let (model, structure) = random_model(4, p, q, 77, kind).unwrap();
        let Structure::Hermitian(hs) = &structure else { unreachable!() };
        let g = realize(&model, 4).unwrap().metric;
        let f = extend_structure(&model, hs, &g).unwrap();
        assert!(f.violations(&g).is_empty(), "{kind:?}: {:?}", f.violations(&g));
        assert_eq!(f.at_origin(), *hs.j());
        let psi = structure_root(&model, &g).unwrap();
        let eps = model.form().eps();
        assert_eq!(psi.transpose().right_mul_constant(eps), psi.left_mul_constant(eps));
        assert_eq!(psi.mul(&psi), g.matrix().left_mul_constant(model.form().eps_inv()));
    }
}

#[test]
fn hyper_extension_algebra() {
    for (kind, p, q) in [(ModelKind::HyperPseudo, 4, 4), (ModelKind::HyperPara, 4, 4)] {
        let (model, structure) = random_model(8, p, q, 5, kind).unwrap();
        let r = realize_structured(&model, &structure, 3).unwrap();
        let StructureFields::Hyper(t) = &r.fields else { unreachable!() };
        assert!(t.violations(&r.metric).is_empty());
        let [j1, j2, j3] = [0, 1, 2].map(|a| t.fields[a].j.clone());
        let id = SeriesMatrix::identity(8, 3, 8);
        let signs = kind_signs(kind);
        for (j, s) in [(&j1, signs[0]), (&j2, signs[1]), (&j3, signs[2])] {
            assert_eq!(j.mul(j), id.scale(&int(s)));
        }
        assert_eq!(j1.mul(&j2), j3);
        assert_eq!(j2.mul(&j1), j3.scale(&int(-1)));
    }
}

fn kind_signs(kind: ModelKind) -> [i64; 3] {
    if kind == ModelKind::HyperPara {
        [-1, 1, 1]
    } else {
        [-1, -1, -1]
    }
}

#[test]
fn variation_rejects_unadapted_frames() {
    let (model, structure) = random_model(4, 0, 4, 8, ModelKind::Hermitian).unwrap();
    let Structure::Hermitian(hs) = &structure else { unreachable!() };
    let g = MetricJet::constant(model.form().eps(), 3).unwrap();
    let flipped = StructureField::constant(&hs.j().scale(&int(-1)), Rho::Pseudo, 3);
    let x = Series::var(4, 3, 3);
    let xi = &x * &x;
    assert!(hermitian_variation(&g, &flipped, &xi, &xi).is_err());
    let ok = StructureField::constant(&HermitianStructure::standard(4, Rho::Pseudo), Rho::Pseudo, 3);
    assert!(hermitian_variation(&g, &ok, &xi, &xi).is_ok());
    let shear = QMatrix::from_i64(&[&[1, 1, 0, 0], &[0, 1, 0, 0], &[0, 0, 1, 0], &[0, 0, 0, 1]]);
    let skew = g.pullback_linear(&shear).unwrap();
    assert!(hermitian_variation(&skew, &ok, &xi, &xi).is_err());
}

#[test]
fn variation_preserves_point_model() {
    let (model, structure) = random_model(8, 0, 8, 4, ModelKind::HyperPseudo).unwrap();
    let r = realize_structured(&model, &structure, 3).unwrap();
    let StructureFields::Hyper(t) = &r.fields else { unreachable!() };
    let x = Series::var(8, 3, 7);
    let y = Series::var(8, 3, 0);
    let xi = &(&x * &x) * &y;
    let eta = &(&y * &y) * &x;
    let h = hyper_variation(&r.metric, t, &xi, &eta).unwrap();
    let (pm, ps) = point_model(&h, &StructureFields::Hyper(t.clone())).unwrap();
    assert_eq!(pm, model);
    assert_eq!(ps, structure);
}
