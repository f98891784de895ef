//! Workloads shared by the benchmarks in `benches/`.

use gtgd_core::textio::{parse_cq, parse_cqs, parse_graph, parse_omq, parse_tgds};
use gtgd_core::{Atom, Cq, Cqs, Graph, Instance, Omq, Term, Tgd};

pub const EXAMPLE_Q1: &str = include_str!("../../../fixtures/fold_q1.omq");
pub const EXAMPLE_Q2: &str = include_str!("../../../fixtures/fold_q2.omq");
pub const LASSO: &str = include_str!("../../../fixtures/lasso.tgd");
pub const CONSTRAINED: &str = include_str!("../../../fixtures/constrained.cqs");
pub const CONSTRAINED_P: &str = include_str!("../../../fixtures/constrained_p.cq");
pub const CONSTRAINED_PPRIME: &str = include_str!("../../../fixtures/constrained_pprime.cq");
pub const K6: &str = include_str!("../../../fixtures/k6.edges");

pub fn example_q1() -> Omq {
    parse_omq(EXAMPLE_Q1).expect("bundled fixture parses")
}

pub fn example_q2() -> Omq {
    parse_omq(EXAMPLE_Q2).expect("bundled fixture parses")
}

pub fn lasso() -> Vec<Tgd> {
    parse_tgds(LASSO).expect("bundled fixture parses")
}

pub fn constrained() -> Cqs {
    parse_cqs(CONSTRAINED).expect("bundled fixture parses")
}

/// The constrained fixture with its CQs `p` and `p′`.
pub fn constrained_with_p() -> (Cqs, Cq, Cq) {
    let p = parse_cq(CONSTRAINED_P).expect("bundled fixture parses");
    let pp = parse_cq(CONSTRAINED_PPRIME).expect("bundled fixture parses");
    (constrained(), p, pp)
}

pub fn k6() -> Graph {
    parse_graph(K6).expect("bundled fixture parses")
}

/// A directed path `R(c0,c1), …, R(c{n-1},c{n})` with `A` on every node.
pub fn path_db(n: usize) -> Instance {
    let c = |i: usize| Term::constant(&format!("c{i}"));
    let mut atoms = Vec::new();
    for i in 0..n {
        atoms.push(Atom::new("R", vec![c(i), c(i + 1)]));
        atoms.push(Atom::new("A", vec![c(i)]));
    }
    Instance::from_atoms(atoms).expect("consistent arities")
}

/// Guarded TGDs with existentials: every `A`-node gets an `S`-successor
/// marked `B`, and `R` edges propagate `A` forward.
pub fn guarded_sigma() -> Vec<Tgd> {
    vec![
        Tgd::build(&[("A", &["x"])], &[("S", &["x", "y"]), ("B", &["y"])]),
        Tgd::build(&[("R", &["x", "y"]), ("A", &["x"])], &[("A", &["y"])]),
        Tgd::build(&[("S", &["x", "y"]), ("B", &["y"])], &[("C", &["x"])]),
    ]
}

/// The `n × n` grid graph.
pub fn grid(n: usize) -> Graph {
    Graph::grid(n, n)
}
