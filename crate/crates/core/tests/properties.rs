//! Property tests spanning several modules.

use liftbmf::boolmat::BoolMatrix;
use liftbmf::experiment::gen_synthetic;
use liftbmf::factorize::{asso_factorize, exact_boolean_rank, AssoParams, ExactOptions};
use liftbmf::mln::{exact_marginals, exact_query, EvidenceSet, GroundAtom, InferenceOptions, Literal, Model};
use liftbmf::reduction::{encode_evidence, symmetry_signature_classes};
use liftbmf::sampler::{estimate_marginals, ChainConfig};
use proptest::prelude::*;

fn labelled(bits: &[bool], m: usize) -> BoolMatrix {
    let names: Vec<String> = (0..m).map(|i| format!("k{i}")).collect();
    BoolMatrix::from_fn(m, m, |i, j| bits[i * m + j])
        .with_labels(names.clone(), names)
        .unwrap()
}

fn matrix_strategy() -> impl Strategy<Value = BoolMatrix> {
    (1usize..7).prop_flat_map(|m| proptest::collection::vec(any::<bool>(), m * m).prop_map(move |b| labelled(&b, m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unary_evidence_encodes_the_reconstruction(p in matrix_strategy(), n in 0usize..4) {
        let (_, exact) = exact_boolean_rank(&p, ExactOptions::default()).unwrap();
        let r = encode_evidence("p", &exact, None).unwrap();
        prop_assert_eq!(r.implied_relation(), p.clone());
        prop_assert_eq!(r.unary_evidence.len(), 2 * p.rows() * exact.rank());

        let mut approx = asso_factorize(&p, AssoParams::with_rank(n)).unwrap();
        approx.set_labels(p.row_labels().unwrap().to_vec(), p.col_labels().unwrap().to_vec()).unwrap();
        let r = encode_evidence("p", &approx, None).unwrap();
        let implied = r.implied_relation();
        for i in 0..p.rows() {
            for j in 0..p.cols() {
                prop_assert_eq!(implied.get(i, j), approx.reconstruct().get(i, j));
            }
        }
    }

    #[test]
    fn signature_classes_are_bounded(p in matrix_strategy(), n in 0usize..5) {
        let mut f = asso_factorize(&p, AssoParams::with_rank(n)).unwrap();
        f.set_labels(p.row_labels().unwrap().to_vec(), p.col_labels().unwrap().to_vec()).unwrap();
        let r = encode_evidence("p", &f, None).unwrap();
        let bound = p.rows().min(1 << r.rank_used);
        let (rows, cols) = symmetry_signature_classes(&r);
        prop_assert!(rows <= bound && cols <= bound);
    }

    #[test]
    fn noise_free_synthetic_rank_is_at_most_planted(m in 2usize..9, planted in 0usize..4, seed in 0u64..1000) {
        let syn = gen_synthetic(m, planted, 0.0, seed).unwrap();
        let (rank, _) = exact_boolean_rank(&syn.matrix, ExactOptions::default()).unwrap();
        prop_assert!(rank <= planted);
        prop_assert_eq!(syn.flips, 0);
    }

    #[test]
    fn complementary_queries_sum_to_one(w1 in -2.0f64..2.0, w2 in -2.0f64..2.0, ev in proptest::collection::vec(0u8..3, 3)) {
        let model = Model::parse(&format!(
            "domain = a, b, c\npred s/1\npred t/1\n{w1} s(X) => t(X)\n{w2} s(X) ^ t(Y)\n"
        )).unwrap();
        let mut evidence = EvidenceSet::new();
        for (c, e) in ["a", "b", "c"].iter().zip(&ev) {
            if *e < 2 {
                evidence.insert(GroundAtom::new("s", &[c]), *e == 1).unwrap();
            }
        }
        let opts = InferenceOptions::default();
        for q in ["s(a)", "t(b)", "t(c)"] {
            let pos: Literal = q.parse().unwrap();
            let neg: Literal = format!("!{q}").parse().unwrap();
            let a = exact_query(&model, &evidence, &pos, &opts).unwrap();
            let b = exact_query(&model, &evidence, &neg, &opts).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a + b - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn renaming_interchangeable_constants_preserves_marginals() {
    let model = Model::parse(
        "domain = a, b, c\npred l/2\npred s/1\n1.1 s(X) ^ l(X,Y) => s(Y)\n-0.4 s(X)\n0.8 l(X,Y) => l(Y,X)\n",
    )
    .unwrap();
    // b and c have identical evidence signatures
    let evidence = EvidenceSet::parse("s(a)\n!s(b)\n!s(c)\nl(a,b)\nl(a,c)\n!l(b,c)\n!l(c,b)\n", &model).unwrap();
    let opts = InferenceOptions::default();
    let swap = |s: &str| s.replace('b', "#").replace('c', "b").replace('#', "c");
    let atoms: Vec<GroundAtom> = ["l(b,a)", "l(c,a)", "l(b,b)", "l(c,c)", "l(a,a)"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let swapped: Vec<GroundAtom> = atoms.iter().map(|a| swap(&a.to_string()).parse().unwrap()).collect();
    let p = exact_marginals(&model, &evidence, &atoms, &opts).unwrap();
    let q = exact_marginals(&model, &evidence, &swapped, &opts).unwrap();
    for (x, y) in p.iter().zip(&q) {
        assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
    }
}

#[test]
fn sampler_is_deterministic_and_tracks_exact() {
    let model = Model::parse("domain = a, b, c\npred s/1\npred t/1\n0.9 s(X) => t(X)\n-0.3 t(X) ^ s(Y)\n").unwrap();
    let evidence = EvidenceSet::parse("s(a)\n", &model).unwrap();
    let atoms: Vec<GroundAtom> = ["s(b)", "t(a)", "t(c)"].iter().map(|s| s.parse().unwrap()).collect();
    let opts = InferenceOptions::default();
    let cfg = ChainConfig::new(60_000, 17).orbital(0.1);
    let a = estimate_marginals(&model, &evidence, &atoms, &cfg, &opts).unwrap();
    let b = estimate_marginals(&model, &evidence, &atoms, &cfg, &opts).unwrap();
    assert_eq!(a, b);
    let exact = exact_marginals(&model, &evidence, &atoms, &opts).unwrap();
    for (e, x) in a.estimates.iter().zip(&exact) {
        assert!((e - x).abs() < 0.02, "{e} vs {x}");
    }
}
