//! Linear UCQ rewriting against level-bounded chases on random databases.
mod common;

use common::*;
use gtgd_core::chase::{chase, ChaseBudget};
use gtgd_core::hom::eval;
use gtgd_core::rewrite::rewrite;
use gtgd_core::Ucq;

#[test]
fn rewriting_matches_chase_on_random_databases() {
    let mut checked = 0;
    for seed in 0..60u64 {
        let mut r = rng(1000 + seed);
        let sigma: Vec<_> = (0..3).map(|_| random_linear_tgd(&mut r, SIG, 1)).collect();
        for qi in 0..3 {
            let q = Ucq::single(random_cq(&mut r, SIG, 2, 3, qi % 2));
            let rw = rewrite(&sigma, &q, 5000).expect("linear rewriting saturates");
            for _ in 0..20 {
                let d = random_db(&mut r, SIG, &["a", "b"], 3);
                // Each rewriting step mirrors one trigger, so the chase up to
                // the maximal depth (+1 for safety) contains every witness.
                let c = chase(&d, &sigma, ChaseBudget::Levels(rw.max_depth() + 1));
                let adom = d.adom();
                let expected: std::collections::BTreeSet<_> =
                    eval(&q, &c.instance).into_iter().filter(|t| t.iter().all(|x| adom.contains(x))).collect();
                assert_eq!(eval(&rw.ucq, &d), expected, "seed {seed}: {q:?} on {d:?}");
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 60 * 3 * 20);
}
