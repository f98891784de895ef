//! Homomorphisms, (U)CQ evaluation, injective-only semantics, contractions
//! and cores.

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::{self, Interner, Pat, Slot, Store, Sym};
use crate::error::{Error, Result};
use crate::model::{Atom, Cq, Instance, Name, Term, Tuple, Ucq};

/// A homomorphism as a finite map from source terms to target constants.
pub type Homomorphism = BTreeMap<Term, Term>;

/// What [`find_homomorphisms`] should produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HomMode {
    First,
    All,
    Count,
}

/// Result of a homomorphism search. In `Count` mode `homs` is empty.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct HomResult {
    pub homs: Vec<Homomorphism>,
    pub count: usize,
}

impl HomResult {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// An instance with per-position indices, for repeated queries against it.
#[derive(Clone, Debug, Default)]
pub struct IndexedInstance {
    pub(crate) interner: Interner,
    pub(crate) store: Store,
}

/// A compiled source: patterns plus the source term of every search variable.
pub(crate) struct Compiled {
    pub pats: Vec<Pat>,
    pub vars: Vec<Term>,
    pub init: Vec<Option<Sym>>,
}

impl IndexedInstance {
    pub fn new(instance: &Instance) -> Self {
        let mut me = IndexedInstance::default();
        for a in instance.iter() {
            me.insert(a);
        }
        me
    }

    /// Insert a ground atom; returns true when new.
    pub fn insert(&mut self, a: &Atom) -> bool {
        let p = self.interner.intern(&a.pred);
        let row = a.args.iter().map(|t| self.interner.intern(t.name())).collect();
        self.store.insert(p, row)
    }

    pub fn contains(&self, a: &Atom) -> bool {
        let Some(p) = self.interner.get(&a.pred) else { return false };
        let mut row = Vec::with_capacity(a.arity());
        for t in &a.args {
            match self.interner.get(t.name()) {
                Some(s) => row.push(s),
                None => return false,
            }
        }
        self.store.contains(p, &row)
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.len() == 0
    }

    /// Compile source atoms; every term not fixed becomes a search variable.
    /// Returns `None` when a fixed image or a predicate is unknown to the
    /// target, in which case no homomorphism exists.
    pub(crate) fn compile(&self, source: &[Atom], fixed: &Homomorphism) -> Option<Compiled> {
        let mut index: BTreeMap<&Term, usize> = BTreeMap::new();
        let mut vars: Vec<Term> = Vec::new();
        let mut pats = Vec::with_capacity(source.len());
        for a in source {
            let pred = self.interner.get(&a.pred)?;
            let mut args = Vec::with_capacity(a.arity());
            for t in &a.args {
                if let Some(img) = fixed.get(t) {
                    args.push(Slot::Fixed(self.interner.get(img.name())?));
                } else {
                    let i = *index.entry(t).or_insert_with(|| {
                        vars.push(t.clone());
                        vars.len() - 1
                    });
                    args.push(Slot::Var(i));
                }
            }
            pats.push(Pat { pred, args });
        }
        let init = vec![None; vars.len()];
        Some(Compiled { pats, vars, init })
    }

    fn decode(&self, c: &Compiled, fixed: &Homomorphism, assign: &[Sym]) -> Homomorphism {
        let mut h = fixed.clone();
        for (t, &s) in c.vars.iter().zip(assign) {
            h.insert(t.clone(), Term::Const(self.interner.name(s).clone()));
        }
        h
    }

    /// Homomorphisms from `source` into this instance extending `fixed`.
    pub fn homs(&self, source: &[Atom], fixed: &Homomorphism, mode: HomMode) -> HomResult {
        let mut out = HomResult::default();
        let Some(c) = self.compile(source, fixed) else { return out };
        engine::search(&c.pats, &c.init, &self.store, &[], |a| {
            out.count += 1;
            if mode != HomMode::Count {
                out.homs.push(self.decode(&c, fixed, a));
            }
            mode != HomMode::First
        });
        out.homs.sort();
        out
    }

    /// True iff some homomorphism from `source` extends `fixed`.
    pub fn has_hom(&self, source: &[Atom], fixed: &Homomorphism) -> bool {
        match self.compile(source, fixed) {
            Some(c) => engine::exists(&c.pats, &c.init, &self.store),
            None => false,
        }
    }

    /// Answers of a CQ.
    pub fn eval_cq(&self, q: &Cq) -> BTreeSet<Tuple> {
        let atoms: Vec<Atom> = q.atoms().iter().cloned().collect();
        let mut out = BTreeSet::new();
        if atoms.is_empty() {
            // Safety forces a Boolean query; the empty body is `true`.
            out.insert(Vec::new());
            return out;
        }
        let Some(c) = self.compile(&atoms, &Homomorphism::new()) else { return out };
        let pos: Vec<usize> = q
            .answer()
            .iter()
            .map(|x| c.vars.iter().position(|t| t.name() == x && t.is_var()).expect("safe CQ"))
            .collect();
        let mut project: Vec<usize> = pos.clone();
        project.sort_unstable();
        project.dedup();
        if project.is_empty() {
            if engine::exists(&c.pats, &c.init, &self.store) {
                out.insert(Vec::new());
            }
            return out;
        }
        engine::search(&c.pats, &c.init, &self.store, &project, |a| {
            out.insert(pos.iter().map(|&i| self.interner.name(a[i]).clone()).collect());
            true
        });
        out
    }

    /// Answers of a UCQ: the union of the disjunct answers.
    pub fn eval(&self, q: &Ucq) -> BTreeSet<Tuple> {
        let mut out = BTreeSet::new();
        for d in q.disjuncts() {
            out.extend(self.eval_cq(d));
        }
        out
    }

    /// Does the instance satisfy `q(tuple)`?
    pub fn holds(&self, q: &Cq, tuple: &[Name]) -> bool {
        let Some(fixed) = answer_binding(q, tuple) else { return false };
        if q.is_empty() {
            return true;
        }
        let atoms: Vec<Atom> = q.atoms().iter().cloned().collect();
        self.has_hom(&atoms, &fixed)
    }

    pub fn holds_ucq(&self, q: &Ucq, tuple: &[Name]) -> bool {
        q.disjuncts().iter().any(|d| self.holds(d, tuple))
    }
}

/// The partial map sending answer variables to the given constants; `None`
/// when the arity differs or a repeated answer variable gets two values.
pub fn answer_binding(q: &Cq, tuple: &[Name]) -> Option<Homomorphism> {
    if q.arity() != tuple.len() {
        return None;
    }
    let mut h = Homomorphism::new();
    for (x, c) in q.answer().iter().zip(tuple) {
        let img = Term::Const(c.clone());
        if let Some(old) = h.insert(Term::Var(x.clone()), img.clone()) {
            if old != img {
                return None;
            }
        }
    }
    Some(h)
}

/// All (or the first, or the number of) homomorphisms from `source` to
/// `target` extending `fixed`. Every source term not in `fixed` may move,
/// including constants; pass constants in `fixed` to keep them in place.
pub fn find_homomorphisms(source: &[Atom], target: &Instance, fixed: &Homomorphism, mode: HomMode) -> HomResult {
    IndexedInstance::new(target).homs(source, fixed, mode)
}

/// Homomorphism between instances that is the identity on `keep`.
pub fn instance_hom(source: &Instance, target: &Instance, keep: &BTreeSet<Name>) -> Option<Homomorphism> {
    let fixed: Homomorphism = source
        .adom()
        .into_iter()
        .filter(|c| keep.contains(c))
        .map(|c| (Term::Const(c.clone()), Term::Const(c)))
        .collect();
    let atoms: Vec<Atom> = source.iter().cloned().collect();
    IndexedInstance::new(target).homs(&atoms, &fixed, HomMode::First).homs.into_iter().next()
}

/// Answers of a UCQ over an instance.
pub fn eval(q: &Ucq, instance: &Instance) -> BTreeSet<Tuple> {
    IndexedInstance::new(instance).eval(q)
}

/// Answers of a single CQ over an instance.
pub fn eval_cq(q: &Cq, instance: &Instance) -> BTreeSet<Tuple> {
    IndexedInstance::new(instance).eval_cq(q)
}

fn check_tuple(q: &Cq, tuple: &[Name]) -> Result<()> {
    if q.arity() != tuple.len() {
        return Err(Error::ArityMismatch { expected: q.arity(), got: tuple.len() });
    }
    let distinct: BTreeSet<&Name> = tuple.iter().collect();
    if distinct.len() != tuple.len() {
        return Err(Error::PreconditionViolated("answer constants must be distinct".into()));
    }
    Ok(())
}

/// A homomorphism witnessing `q(tuple)` that is not injective, if any.
fn non_injective_witness(ix: &IndexedInstance, q: &Cq, tuple: &[Name]) -> Option<Homomorphism> {
    let fixed = answer_binding(q, tuple)?;
    let atoms: Vec<Atom> = q.atoms().iter().cloned().collect();
    let c = ix.compile(&atoms, &fixed)?;
    let mut found = None;
    engine::search(&c.pats, &c.init, &ix.store, &[], |a| {
        let h = ix.decode(&c, &fixed, a);
        let images: BTreeSet<&Term> = h.values().collect();
        if images.len() < h.len() {
            found = Some(h);
            return false;
        }
        true
    });
    found
}

/// Injective-only semantics: `q(tuple)` holds and every witnessing
/// homomorphism is injective.
pub fn holds_io(instance: &Instance, q: &Cq, tuple: &[Name]) -> Result<bool> {
    check_tuple(q, tuple)?;
    let ix = IndexedInstance::new(instance);
    Ok(ix.holds(q, tuple) && non_injective_witness(&ix, q, tuple).is_none())
}

/// A CQ obtained by identifying variables, with the quotient map.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Contraction {
    pub cq: Cq,
    pub quotient: BTreeMap<Name, Name>,
}

/// Apply a variable identification given as a map onto representatives.
pub fn apply_quotient(q: &Cq, quotient: &BTreeMap<Name, Name>) -> Cq {
    q.rename(|v| quotient.get(v).cloned().unwrap_or_else(|| v.clone()))
}

/// Representative of a block: its answer variable if any, else the least name.
fn representative(block: &[Name], answer: &BTreeSet<Name>) -> Name {
    block.iter().find(|v| answer.contains(*v)).unwrap_or_else(|| block.iter().min().unwrap()).clone()
}

/// Quotient map for the partition induced by a kernel `var -> key`.
fn kernel_quotient<K: Ord>(kernel: &BTreeMap<Name, K>, answer: &BTreeSet<Name>) -> BTreeMap<Name, Name> {
    let mut blocks: BTreeMap<&K, Vec<Name>> = BTreeMap::new();
    for (v, k) in kernel {
        blocks.entry(k).or_default().push(v.clone());
    }
    let mut out = BTreeMap::new();
    for block in blocks.values() {
        let r = representative(block, answer);
        for v in block {
            out.insert(v.clone(), r.clone());
        }
    }
    out
}

/// A contraction `q_c` of `q` with `I ⊨io q_c(tuple)`.
pub fn io_witness_contraction(instance: &Instance, q: &Cq, tuple: &[Name]) -> Result<Contraction> {
    check_tuple(q, tuple)?;
    let ix = IndexedInstance::new(instance);
    if !ix.holds(q, tuple) {
        return Err(Error::PreconditionViolated("the instance does not satisfy q on the tuple".into()));
    }
    let answer: BTreeSet<Name> = q.answer().iter().cloned().collect();
    let mut quotient: BTreeMap<Name, Name> = q.vars().into_iter().map(|v| (v.clone(), v)).collect();
    let mut current = q.clone();
    while let Some(h) = non_injective_witness(&ix, &current, tuple) {
        // Identify variables with the same image; distinct answer constants
        // keep answer variables apart.
        let kernel: BTreeMap<Name, Term> =
            h.into_iter().filter(|(t, _)| t.is_var()).map(|(t, img)| (t.name().clone(), img)).collect();
        let step = kernel_quotient(&kernel, &answer);
        current = apply_quotient(&current, &step);
        for r in quotient.values_mut() {
            *r = step[r].clone();
        }
    }
    Ok(Contraction { cq: current, quotient })
}

/// Every set partition of `items` as a block-index vector (restricted growth
/// strings), in lexicographic order.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max.min(n) {
            if i == 0 && b > 0 {
                break;
            }
            cur.push(b);
            rec(i + 1, n, if b == max { max + 1 } else { max }, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, 0, &mut Vec::new(), &mut out);
    out
}

/// All contractions of `q` (identity included); two answer variables are never
/// identified, and a block containing an answer variable is named after it.
pub fn contractions(q: &Cq) -> Vec<Contraction> {
    let vars: Vec<Name> = q.vars().into_iter().collect();
    let answer: BTreeSet<Name> = q.answer().iter().cloned().collect();
    let mut out = Vec::new();
    'outer: for rgs in set_partitions(vars.len()) {
        let mut blocks: Vec<Vec<Name>> = Vec::new();
        for (v, &b) in vars.iter().zip(&rgs) {
            if b == blocks.len() {
                blocks.push(Vec::new());
            }
            blocks[b].push(v.clone());
        }
        let mut quotient = BTreeMap::new();
        for block in &blocks {
            if block.iter().filter(|v| answer.contains(*v)).count() > 1 {
                continue 'outer;
            }
            let r = representative(block, &answer);
            for v in block {
                quotient.insert(v.clone(), r.clone());
            }
        }
        out.push(Contraction { cq: apply_quotient(q, &quotient), quotient });
    }
    out
}

/// Is there a homomorphism from `from` to `to` mapping answer positions onto
/// answer positions? This is containment `to ⊆ from`.
pub fn maps_to(from: &Cq, to: &Cq) -> bool {
    if from.arity() != to.arity() {
        return false;
    }
    let target = to.canonical_database();
    let Some(fixed) = answer_binding(from, to.answer()) else { return false };
    if from.is_empty() {
        return true;
    }
    let atoms: Vec<Atom> = from.atoms().iter().cloned().collect();
    IndexedInstance::new(&target).has_hom(&atoms, &fixed)
}

/// CQ containment `q1 ⊆ q2` (every answer of q1 is one of q2 on every database).
pub fn cq_contained(q1: &Cq, q2: &Cq) -> bool {
    maps_to(q2, q1)
}

pub fn cq_equivalent(q1: &Cq, q2: &Cq) -> bool {
    cq_contained(q1, q2) && cq_contained(q2, q1)
}

/// UCQ containment: each disjunct of `q1` is contained in a disjunct of `q2`.
pub fn ucq_contained(q1: &Ucq, q2: &Ucq) -> bool {
    q1.arity() == q2.arity() && q1.disjuncts().iter().all(|p| q2.disjuncts().iter().any(|r| cq_contained(p, r)))
}

/// Drop disjuncts contained in another disjunct (keeping the first of
/// equivalent ones).
pub fn prune_subsumed(cqs: Vec<Cq>) -> Vec<Cq> {
    let mut kept: Vec<Cq> = Vec::new();
    for q in cqs {
        if kept.iter().any(|k| cq_contained(&q, k)) {
            continue;
        }
        kept.retain(|k| !cq_contained(k, &q));
        kept.push(q);
    }
    kept
}

/// The core of a CQ: a minimal equivalent subquery. Atoms are tried for
/// removal in descending atom order, so the representative is deterministic
/// and keeps the smallest atoms (e.g. `P(x,z)` folds into `P(x,y)`).
pub fn core(q: &Cq) -> Cq {
    let mut current = q.clone();
    for a in q.atoms().iter().rev() {
        let mut body = current.atoms().clone();
        body.remove(a);
        let Some(candidate) = current.with_body(body) else { continue };
        if maps_to(&current, &candidate) {
            current = candidate;
        }
    }
    debug_assert!(current.len() > 8 || is_minimal_exhaustive(&current));
    current
}

/// No proper subquery is equivalent (checked over all subsets).
pub fn is_minimal_exhaustive(q: &Cq) -> bool {
    let atoms: Vec<&Atom> = q.atoms().iter().collect();
    let n = atoms.len();
    for mask in 0u64..(1u64 << n) - 1 {
        let body: BTreeSet<Atom> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| atoms[i].clone()).collect();
        if let Some(sub) = q.with_body(body) {
            if maps_to(q, &sub) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::name;

    fn square_labelled_q() -> Cq {
        Cq::build(
            &[],
            &[
                ("R1", &["x1"]),
                ("P", &["x2", "x1"]),
                ("R2", &["x2"]),
                ("P", &["x2", "x3"]),
                ("R3", &["x3"]),
                ("P", &["x4", "x1"]),
                ("P", &["x4", "x3"]),
                ("R4", &["x4"]),
            ],
        )
    }

    fn d1() -> Instance {
        Instance::from_facts(&[("R1", &["a"]), ("R2", &["b"]), ("R3", &["c"]), ("P", &["b", "a"]), ("P", &["b", "c"])])
    }

    #[test]
    fn all_homs_in_order() {
        let q = Cq::build(&["x"], &[("R", &["x", "y"])]);
        let i = Instance::from_facts(&[("R", &["a", "b"]), ("R", &["b", "c"])]);
        let atoms: Vec<Atom> = q.atoms().iter().cloned().collect();
        let r = find_homomorphisms(&atoms, &i, &Homomorphism::new(), HomMode::All);
        assert_eq!(r.count, 2);
        assert_eq!(r.homs[0][&Term::var("x")], Term::constant("a"));
        assert_eq!(r.homs[1][&Term::var("y")], Term::constant("c"));
        let tuples: Vec<Tuple> = eval_cq(&q, &i).into_iter().collect();
        assert_eq!(tuples, vec![vec![name("a")], vec![name("b")]]);
    }

    #[test]
    fn example_q_needs_r4() {
        let q = square_labelled_q();
        let atoms: Vec<Atom> = q.atoms().iter().cloned().collect();
        assert!(find_homomorphisms(&atoms, &d1(), &Homomorphism::new(), HomMode::First).is_empty());
        let mut chased = d1();
        chased.insert(Atom::fact("R4", &["b"]));
        let r = find_homomorphisms(&atoms, &chased, &Homomorphism::new(), HomMode::All);
        assert_eq!(r.count, 1);
        assert_eq!(r.homs[0][&Term::var("x4")], Term::constant("b"));
    }

    #[test]
    fn io_semantics() {
        let q = Cq::build(&[], &[("P", &["x", "y"])]);
        assert!(!holds_io(&Instance::from_facts(&[("P", &["a", "a"])]), &q, &[]).unwrap());
        assert!(holds_io(&Instance::from_facts(&[("P", &["a", "b"])]), &q, &[]).unwrap());
        let path = Cq::build(&[], &[("E", &["x", "y"]), ("E", &["y", "z"])]);
        assert!(holds_io(&Instance::from_facts(&[("E", &["a", "b"]), ("E", &["b", "c"])]), &path, &[]).unwrap());
        let c = io_witness_contraction(&Instance::from_facts(&[("P", &["a", "a"])]), &q, &[]).unwrap();
        assert_eq!(c.cq, Cq::build(&[], &[("P", &["x", "x"])]));
        let cyc = Cq::build(&[], &[("E", &["x1", "x2"]), ("E", &["x2", "x3"]), ("E", &["x3", "x4"]), ("E", &["x4", "x1"])]);
        let c = io_witness_contraction(&Instance::from_facts(&[("E", &["a", "a"])]), &cyc, &[]).unwrap();
        assert_eq!(c.cq, Cq::build(&[], &[("E", &["x1", "x1"])]));
    }

    #[test]
    fn contraction_counts() {
        assert_eq!(contractions(&Cq::build(&[], &[("P", &["x", "y"])])).len(), 2);
        let c = contractions(&Cq::build(&["x"], &[("P", &["x", "y"])]));
        assert_eq!(c.len(), 2);
        assert!(c.iter().any(|c| c.cq == Cq::build(&["x"], &[("P", &["x", "x"])])));
        assert_eq!(contractions(&Cq::build(&["x", "z"], &[("P", &["x", "z"])])).len(), 1);
    }

    #[test]
    fn cores() {
        let q = Cq::build(&[], &[("P", &["x", "y"]), ("P", &["x", "z"])]);
        assert_eq!(core(&q), Cq::build(&[], &[("P", &["x", "y"])]));
        assert_eq!(core(&square_labelled_q()), square_labelled_q());
        let q = Cq::build(&[], &[("E", &["x", "y"]), ("E", &["y", "z"]), ("E", &["z", "x"]), ("E", &["u", "v"])]);
        assert_eq!(core(&q), Cq::build(&[], &[("E", &["x", "y"]), ("E", &["y", "z"]), ("E", &["z", "x"])]));
    }

    #[test]
    fn containment_basics() {
        let pxy = Cq::build(&[], &[("P", &["x", "y"])]);
        let pxx = Cq::build(&[], &[("P", &["x", "x"])]);
        assert!(cq_contained(&pxx, &pxy));
        assert!(!cq_contained(&pxy, &pxx));
    }
}
