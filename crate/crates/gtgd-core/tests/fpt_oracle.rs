//! Fixed-parameter OMQ evaluation through the linearization against a
//! depth-escalated chase and the guarded closure engine.
mod common;

use common::*;
use gtgd_core::guarded::certain_answers;
use gtgd_core::linearize::{fpt_answers, FptOptions};
use gtgd_core::{Omq, Schema, Ucq};

#[test]
fn fpt_matches_escalated_chase() {
    let schema = Schema::from_pairs(SIG.iter().copied()).unwrap();
    let (mut nonempty, mut infinite) = (0, 0);
    for seed in 0..100u64 {
        let mut r = rng(1000 + seed);
        let sigma = random_existential_guarded_sigma(&mut r, SIG, 3);
        let d = random_db(&mut r, SIG, &["a", "b", "c", "d"], 4);
        let n_atoms = 1 + (seed as usize % 3);
        let q = Ucq::single(random_cq(&mut r, SIG, n_atoms, 3, (seed % 2) as usize));
        let omq = Omq::new(schema.clone(), sigma.clone(), q.clone());
        let fpt = fpt_answers(&omq, &d, FptOptions::default()).unwrap();
        let oracle = escalated_chase_answers(&d, &sigma, &q, 3, 50_000);
        assert_eq!(fpt.answers, oracle, "seed {seed}: Σ={sigma:?} D={d:?} q={q}");
        assert_eq!(fpt.answers, certain_answers(&d, &sigma, &q).unwrap(), "seed {seed}");
        nonempty += usize::from(!fpt.answers.is_empty());
        infinite += usize::from(!gtgd_core::chase::chase(&d, &sigma, gtgd_core::chase::ChaseBudget::AtomCap(2000)).terminated);
    }
    // The sample must exercise both answers and infinite chases.
    assert!(nonempty >= 10 && infinite >= 10, "nonempty={nonempty} infinite={infinite}");
}
