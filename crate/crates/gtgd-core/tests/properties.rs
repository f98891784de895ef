//! Property tests: text round trips, cores, treewidth bounds and chase
//! monotonicity on generated inputs.

use gtgd_core::chase::{chase, ChaseBudget};
use gtgd_core::hom::{core, cq_equivalent};
use gtgd_core::textio::{parse_database, parse_query, serialize_database, serialize_ucq};
use gtgd_core::treewidth::{decide_tw, treewidth, treewidth_bounds};
use gtgd_core::{Atom, Cq, Graph, Instance, Term, Tgd, Ucq};
use proptest::prelude::*;

const PREDS: [(&str, usize); 4] = [("A", 1), ("B", 1), ("R", 2), ("T", 3)];

fn atom(term: fn(usize) -> Term, n_terms: usize) -> impl Strategy<Value = Atom> {
    (0..PREDS.len(), prop::collection::vec(0..n_terms, 3)).prop_map(move |(p, args)| {
        let (pred, ar) = PREDS[p];
        Atom::new(pred, args[..ar].iter().map(|&i| term(i)).collect())
    })
}

fn constant(i: usize) -> Term {
    Term::constant(&format!("c{i}"))
}

fn variable(i: usize) -> Term {
    Term::var(&format!("x{i}"))
}

fn instance() -> impl Strategy<Value = Instance> {
    prop::collection::vec(atom(constant, 5), 0..10).prop_map(|atoms| Instance::from_atoms(atoms).unwrap())
}

fn boolean_cq() -> impl Strategy<Value = Cq> {
    prop::collection::vec(atom(variable, 5), 1..7).prop_map(|atoms| Cq::new(vec![], atoms).unwrap())
}

fn graph() -> impl Strategy<Value = Graph> {
    (1usize..9, prop::collection::vec((0usize..9, 0usize..9), 0..20)).prop_map(|(n, edges)| {
        let mut g = Graph::new();
        let v = |i: usize| gtgd_core::name(&format!("v{}", i % n));
        for i in 0..n {
            g.add_vertex(v(i));
        }
        for (a, b) in edges {
            if a % n != b % n {
                g.add_edge(v(a), v(b));
            }
        }
        g
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn database_text_round_trip(d in instance()) {
        let back = parse_database(&serialize_database(&d)).unwrap();
        prop_assert_eq!(back.atoms(), d.atoms());
    }

    #[test]
    fn query_text_round_trip(q in boolean_cq()) {
        let u = Ucq::single(q);
        let back = parse_query(&serialize_ucq(&u)).unwrap();
        prop_assert_eq!(back.disjuncts(), u.disjuncts());
    }

    #[test]
    fn core_is_equivalent_and_no_larger(q in boolean_cq()) {
        let c = core(&q);
        prop_assert!(c.len() <= q.len());
        prop_assert!(cq_equivalent(&c, &q));
        prop_assert_eq!(core(&c).len(), c.len());
    }

    #[test]
    fn treewidth_within_bounds_and_tight(g in graph()) {
        let tw = treewidth(&g).unwrap();
        let (lower, upper) = treewidth_bounds(&g);
        prop_assert!(lower <= tw && tw <= upper.max(1));
        let td = decide_tw(&g, tw).unwrap().unwrap();
        prop_assert_eq!(td.validate(&g), Ok(()));
        if tw > 1 {
            prop_assert!(decide_tw(&g, tw - 1).unwrap().is_none());
        }
    }

    #[test]
    fn chase_levels_are_monotone(d in instance(), levels in 0usize..4) {
        let sigma = vec![
            Tgd::build(&[("R", &["x", "y"])], &[("R", &["y", "z"])]),
            Tgd::build(&[("A", &["x"])], &[("B", &["x"])]),
        ];
        let short = chase(&d, &sigma, ChaseBudget::Levels(levels)).instance;
        let long = chase(&d, &sigma, ChaseBudget::Levels(levels + 1)).instance;
        prop_assert!(d.is_subset(&short));
        prop_assert!(short.is_subset(&long));
    }
}
