//! Seeded random generators shared by the integration tests.
#![allow(dead_code)]

pub mod oracles;

use gtgd_core::{Atom, Cq, Instance, Term, Tgd};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Signature used by the generators: (predicate, arity).
pub const SIG: &[(&str, usize)] = &[("A", 1), ("B", 1), ("R", 2), ("S", 2)];
pub const SIG3: &[(&str, usize)] = &[("A", 1), ("R", 2), ("S", 2), ("T", 3)];

fn var_atom(r: &mut Rng8, sig: &[(&str, usize)], pool: &[&str]) -> Atom {
    let (p, ar) = *sig.choose(r).unwrap();
    Atom::new(p, (0..ar).map(|_| Term::var(pool.choose(r).unwrap())).collect())
}

/// Random database over `consts` with `n` atoms.
pub fn random_db(r: &mut Rng8, sig: &[(&str, usize)], consts: &[&str], n: usize) -> Instance {
    let mut d = Instance::new();
    for _ in 0..n {
        let (p, ar) = *sig.choose(r).unwrap();
        d.insert(Atom::new(p, (0..ar).map(|_| Term::constant(consts.choose(r).unwrap())).collect()));
    }
    d
}

/// Random guarded TGD: a guard over all body variables, optional side atoms
/// over guard variables, and a head over some frontier plus existentials.
pub fn random_guarded_tgd(r: &mut Rng8, sig: &[(&str, usize)], max_exist: usize) -> Tgd {
    loop {
        let (gp, gar) = *sig.iter().filter(|(_, a)| *a >= 1).collect::<Vec<_>>().choose(r).unwrap().to_owned();
        let bvars = ["x", "y", "z"];
        let guard_args: Vec<&str> = (0..gar).map(|_| *bvars[..gar].choose(r).unwrap()).collect();
        let guard = Atom::new(gp, guard_args.iter().map(|v| Term::var(v)).collect());
        let mut body = vec![guard];
        if r.gen_bool(0.3) {
            body.push(var_atom(r, sig, &guard_args));
        }
        let ne = r.gen_range(0..=max_exist);
        let mut hpool: Vec<&str> = guard_args.clone();
        for z in ["u", "w"].iter().take(ne) {
            hpool.push(z);
        }
        let nh = r.gen_range(1..=2);
        let head: Vec<Atom> = (0..nh).map(|_| var_atom(r, sig, &hpool)).collect();
        if let Ok(t) = Tgd::new(body, head) {
            if t.body().iter().any(|a| t.body_vars().iter().all(|v| a.vars().contains(v))) {
                return t;
            }
        }
    }
}

pub fn random_guarded_sigma(r: &mut Rng8, sig: &[(&str, usize)], n: usize, max_exist: usize) -> Vec<Tgd> {
    (0..n).map(|_| random_guarded_tgd(r, sig, max_exist)).collect()
}

/// Random linear TGD (single body atom).
pub fn random_linear_tgd(r: &mut Rng8, sig: &[(&str, usize)], max_exist: usize) -> Tgd {
    loop {
        let body = var_atom(r, sig, &["x", "y"]);
        let bv: Vec<String> = body.vars().iter().map(|v| v.to_string()).collect();
        let mut hpool: Vec<&str> = bv.iter().map(|s| s.as_str()).collect();
        for z in ["u", "w"].iter().take(r.gen_range(0..=max_exist)) {
            hpool.push(z);
        }
        let nh = r.gen_range(1..=2);
        let head: Vec<Atom> = (0..nh).map(|_| var_atom(r, sig, &hpool)).collect();
        if let Ok(t) = Tgd::new(vec![body], head) {
            return t;
        }
    }
}

/// Random connected-ish CQ with `n` atoms over variables `v0..v{nv-1}`.
pub fn random_cq(r: &mut Rng8, sig: &[(&str, usize)], n: usize, nv: usize, arity: usize) -> Cq {
    loop {
        let names: Vec<String> = (0..nv).map(|i| format!("v{i}")).collect();
        let pool: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let atoms: Vec<Atom> = (0..n).map(|_| var_atom(r, sig, &pool)).collect();
        let vars: std::collections::BTreeSet<_> = atoms.iter().flat_map(|a| a.vars()).collect();
        if vars.len() < arity {
            continue;
        }
        let answer: Vec<_> = vars.into_iter().take(arity).collect();
        if let Ok(q) = Cq::new(answer, atoms) {
            return q;
        }
    }
}

/// Depth-escalated chase oracle for certain answers: chase level by level
/// and stop once the answers have been stable for `stable` consecutive
/// levels, the chase terminates, or `max_atoms` is reached.
pub fn escalated_chase_answers(
    d: &Instance,
    sigma: &[Tgd],
    q: &gtgd_core::Ucq,
    stable: usize,
    max_atoms: usize,
) -> std::collections::BTreeSet<gtgd_core::Tuple> {
    use gtgd_core::chase::{chase, ChaseBudget};
    let adom = d.adom();
    let mut last = None;
    let mut streak = 0;
    for l in 1.. {
        let run = chase(d, sigma, ChaseBudget::LevelsWithCap(l, max_atoms));
        let ans: std::collections::BTreeSet<_> = gtgd_core::hom::eval(q, &run.instance)
            .into_iter()
            .filter(|t| t.iter().all(|c| adom.contains(c)))
            .collect();
        let capped = !run.terminated && run.max_level() < l;
        if run.terminated || capped {
            return ans;
        }
        if last.as_ref() == Some(&ans) {
            streak += 1;
            if streak >= stable {
                return ans;
            }
        } else {
            streak = 0;
        }
        last = Some(ans);
    }
    unreachable!()
}

/// Random guarded TGD set with at least one existential rule.
pub fn random_existential_guarded_sigma(r: &mut Rng8, sig: &[(&str, usize)], n: usize) -> Vec<Tgd> {
    loop {
        let s = random_guarded_sigma(r, sig, n, 1);
        if s.iter().any(|t| !t.is_full()) {
            return s;
        }
    }
}

/// Random frontier-guarded TGD with one head atom: one or two body atoms,
/// a frontier inside the first body atom, and at most one existential.
pub fn random_fg1_tgd(r: &mut Rng8, sig: &[(&str, usize)]) -> Tgd {
    loop {
        let pool = ["x", "y", "z"];
        let mut body = vec![var_atom(r, sig, &pool)];
        if r.gen_bool(0.5) {
            body.push(var_atom(r, sig, &pool));
        }
        let guard_vars: Vec<String> = body[0].vars().iter().map(|v| v.to_string()).collect();
        let mut hpool: Vec<&str> = guard_vars.iter().map(|s| s.as_str()).filter(|_| r.gen_bool(0.8)).collect();
        if hpool.is_empty() || r.gen_bool(0.3) {
            hpool.push("w");
        }
        let head = var_atom(r, sig, &hpool);
        if let Ok(t) = Tgd::new(body, vec![head]) {
            return t;
        }
    }
}
