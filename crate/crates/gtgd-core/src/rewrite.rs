//! Backward-chaining UCQ rewriting with piece unifiers.
//!
//! A rewriting step picks a TGD σ and a *piece* of the CQ — a set of atoms
//! that must be unified together with head atoms of σ because they share
//! variables that get unified with existential variables of σ — and replaces
//! the piece with the instantiated body of σ. Repeating this breadth-first
//! with subsumption pruning yields a UCQ whose direct evaluation equals
//! evaluation over the chase whenever the process saturates; for linear TGDs
//! it always does (up to the configured cap).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::ControlFlow;

use crate::classify::require_linear;
use crate::error::{Error, Result};
use crate::hom::{core, cq_contained, maps_to};
use crate::model::{name, Atom, Cq, Name, Term, Tgd, Ucq};

/// Default cap on the number of disjuncts kept during rewriting.
pub const DEFAULT_REWRITE_CAP: usize = 10_000;

/// Outcome of a (possibly truncated) rewriting run.
#[derive(Clone, Debug)]
pub struct Rewriting {
    pub ucq: Ucq,
    /// Number of rewriting steps that produced each disjunct.
    pub depths: Vec<usize>,
    /// True when no further non-subsumed CQ can be produced.
    pub saturated: bool,
}

impl Rewriting {
    pub fn max_depth(&self) -> usize {
        self.depths.iter().copied().max().unwrap_or(0)
    }
}

/// Term identity during unification: query variables and (renamed-apart)
/// TGD variables live in disjoint namespaces.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum UTerm {
    Q(Name),
    S(Name),
}

struct UnionFind {
    parent: HashMap<UTerm, UTerm>,
}

impl UnionFind {
    fn find(&mut self, t: &UTerm) -> UTerm {
        let p = match self.parent.get(t) {
            None => return t.clone(),
            Some(p) => p.clone(),
        };
        if &p == t {
            return p;
        }
        let r = self.find(&p);
        self.parent.insert(t.clone(), r.clone());
        r
    }

    fn union(&mut self, a: &UTerm, b: &UTerm) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent.insert(ra, rb);
        }
    }
}

/// A partial piece unifier: which query atoms are unified with which head atoms.
struct PieceSearch<'a> {
    q_atoms: Vec<&'a Atom>,
    answer: BTreeSet<Name>,
    tgd: &'a Tgd,
    existentials: BTreeSet<Name>,
    frontier: BTreeSet<Name>,
}

impl PieceSearch<'_> {
    /// Union-find for the given assignment; `None` if atoms clash.
    fn unify(&self, assign: &BTreeMap<usize, usize>) -> Option<UnionFind> {
        let mut uf = UnionFind { parent: HashMap::new() };
        for (&qi, &hi) in assign {
            let (a, h) = (self.q_atoms[qi], &self.tgd.head()[hi]);
            if a.pred != h.pred || a.args.len() != h.args.len() {
                return None;
            }
            for (x, y) in a.args.iter().zip(&h.args) {
                uf.union(&UTerm::Q(x.name().clone()), &UTerm::S(y.name().clone()));
            }
        }
        Some(uf)
    }

    /// Check the existential-class conditions; return the query variables
    /// that are unified with existentials (they must not escape the piece).
    fn existential_vars(&self, uf: &mut UnionFind, assign: &BTreeMap<usize, usize>) -> Option<BTreeSet<Name>> {
        let mut classes: BTreeMap<UTerm, Vec<UTerm>> = BTreeMap::new();
        let mut terms: BTreeSet<UTerm> = BTreeSet::new();
        for (&qi, &hi) in assign {
            for t in &self.q_atoms[qi].args {
                terms.insert(UTerm::Q(t.name().clone()));
            }
            for t in &self.tgd.head()[hi].args {
                terms.insert(UTerm::S(t.name().clone()));
            }
        }
        for t in terms {
            let r = uf.find(&t);
            classes.entry(r).or_default().push(t);
        }
        let mut sticky = BTreeSet::new();
        for members in classes.values() {
            let ex = members.iter().filter(|t| matches!(t, UTerm::S(n) if self.existentials.contains(n))).count();
            if ex == 0 {
                continue;
            }
            if ex > 1 {
                return None;
            }
            for t in members {
                match t {
                    UTerm::S(n) if self.frontier.contains(n) => return None,
                    UTerm::Q(n) if self.answer.contains(n) => return None,
                    UTerm::Q(n) => {
                        sticky.insert(n.clone());
                    }
                    UTerm::S(_) => {}
                }
            }
        }
        Some(sticky)
    }

    /// Extend `assign` until it is closed under the piece condition, then
    /// report it and every closed extension by further query atoms (several
    /// query atoms may unify with the same head atom).
    fn extend(
        &self,
        assign: &mut BTreeMap<usize, usize>,
        seen: &mut BTreeSet<BTreeMap<usize, usize>>,
        out: &mut Vec<(BTreeMap<usize, usize>, UnionFind)>,
    ) {
        if out.len() >= UNIFIER_CAP {
            return;
        }
        let Some(mut uf) = self.unify(assign) else { return };
        let Some(sticky) = self.existential_vars(&mut uf, assign) else { return };
        let missing = (0..self.q_atoms.len())
            .find(|i| !assign.contains_key(i) && self.q_atoms[*i].args.iter().any(|t| sticky.contains(t.name())));
        match missing {
            None => {
                if !seen.insert(assign.clone()) {
                    return;
                }
                out.push((assign.clone(), uf));
                for j in 0..self.q_atoms.len() {
                    if assign.contains_key(&j) {
                        continue;
                    }
                    for h in 0..self.tgd.head().len() {
                        if self.tgd.head()[h].pred == self.q_atoms[j].pred {
                            assign.insert(j, h);
                            self.extend(assign, seen, out);
                            assign.remove(&j);
                        }
                    }
                }
            }
            Some(i) => {
                for h in 0..self.tgd.head().len() {
                    assign.insert(i, h);
                    self.extend(assign, seen, out);
                    assign.remove(&i);
                }
            }
        }
    }
}

/// Cap on the piece unifiers explored for one CQ and one TGD.
const UNIFIER_CAP: usize = 4096;

/// All one-step rewritings of `q` with `sigma`, one per piece unifier.
pub fn one_step(q: &Cq, sigma: &Tgd) -> Vec<Cq> {
    one_step_bounded(q, sigma).0
}

/// One-step rewritings, and whether the unifier search was exhaustive.
fn one_step_bounded(q: &Cq, sigma: &Tgd) -> (Vec<Cq>, bool) {
    let search = PieceSearch {
        q_atoms: q.atoms().iter().collect(),
        answer: q.answer().iter().cloned().collect(),
        tgd: sigma,
        existentials: sigma.existentials().clone(),
        frontier: sigma.frontier(),
    };
    let mut unifiers = Vec::new();
    let mut seen = BTreeSet::new();
    for qi in 0..search.q_atoms.len() {
        for hi in 0..sigma.head().len() {
            let mut assign = BTreeMap::from([(qi, hi)]);
            search.extend(&mut assign, &mut seen, &mut unifiers);
        }
    }
    let complete = unifiers.len() < UNIFIER_CAP;
    let mut out: Vec<Cq> = Vec::new();
    for (assign, mut uf) in unifiers {
        // Representative names: prefer answer variables, then query variables.
        let mut rep: BTreeMap<UTerm, Name> = BTreeMap::new();
        let mut classes: BTreeMap<UTerm, Vec<UTerm>> = BTreeMap::new();
        let all_terms = q
            .vars()
            .into_iter()
            .map(UTerm::Q)
            .chain(sigma.body_vars().into_iter().chain(sigma.head_vars()).map(UTerm::S));
        for t in all_terms {
            let r = uf.find(&t);
            classes.entry(r).or_default().push(t);
        }
        for (r, members) in &classes {
            let chosen = members
                .iter()
                .find_map(|t| match t {
                    UTerm::Q(n) if q.answer().contains(n) => Some(n.clone()),
                    _ => None,
                })
                .or_else(|| members.iter().find_map(|t| if let UTerm::Q(n) = t { Some(n.clone()) } else { None }))
                .unwrap_or_else(|| match &members[0] {
                    UTerm::S(n) => name(&format!("{n}'")),
                    UTerm::Q(n) => n.clone(),
                });
            rep.insert(r.clone(), chosen);
        }
        let mut image = |t: UTerm| -> Name {
            let r = uf.find(&t);
            rep[&r].clone()
        };
        let mut atoms: BTreeSet<Atom> = BTreeSet::new();
        for (i, a) in q.atoms().iter().enumerate() {
            if !assign.contains_key(&i) {
                atoms.insert(Atom { pred: a.pred.clone(), args: a.args.iter().map(|t| Term::Var(image(UTerm::Q(t.name().clone())))).collect() });
            }
        }
        for a in sigma.body() {
            atoms.insert(Atom { pred: a.pred.clone(), args: a.args.iter().map(|t| Term::Var(image(UTerm::S(t.name().clone())))).collect() });
        }
        let answer: Vec<Name> = q.answer().iter().map(|x| image(UTerm::Q(x.clone()))).collect();
        if let Ok(cq) = Cq::new(answer, atoms) {
            // Working with cores keeps single-piece unifiers complete.
            out.push(canonical_names(&core(&cq)));
        }
    }
    (out, complete)
}

/// Rename non-answer variables to `_v0, _v1, …` in order of first occurrence.
fn canonical_names(q: &Cq) -> Cq {
    let answer: BTreeSet<Name> = q.answer().iter().cloned().collect();
    let mut map: BTreeMap<Name, Name> = BTreeMap::new();
    for a in q.atoms() {
        for t in &a.args {
            if !answer.contains(t.name()) && !map.contains_key(t.name()) {
                let fresh = name(&format!("_v{}", map.len()));
                map.insert(t.name().clone(), fresh);
            }
        }
    }
    // Renaming may collide with original names that look like `_vN`; a
    // two-phase rename through a unique prefix avoids capture.
    let tmp: BTreeMap<Name, Name> = map.keys().map(|k| (k.clone(), name(&format!("\u{1}{}", map[k])))).collect();
    let staged = q.rename(|n| tmp.get(n).cloned().unwrap_or_else(|| n.clone()));
    staged.rename(|n| if let Some(s) = n.strip_prefix('\u{1}') { name(s) } else { n.clone() })
}

/// Breadth-first rewriting, calling `visit` on every newly kept CQ with its
/// depth. Stops early when `visit` breaks; stops with `saturated = false`
/// when more than `cap` CQs would be kept.
pub fn rewrite_visit(
    sigma: &[Tgd],
    q: &Ucq,
    cap: usize,
    mut visit: impl FnMut(&Cq, usize) -> ControlFlow<()>,
) -> Rewriting {
    let mut kept: Vec<(Cq, usize, bool)> = Vec::new(); // (cq, depth, alive)
    let mut saturated = true;
    let mut queue: std::collections::VecDeque<usize> = Default::default();
    let mut stopped = false;
    let admit = |cq: Cq, depth: usize, kept: &mut Vec<(Cq, usize, bool)>, queue: &mut std::collections::VecDeque<usize>| -> Option<bool> {
        if kept.iter().any(|(k, _, alive)| *alive && cq_contained(&cq, k)) {
            return Some(false);
        }
        if kept.iter().filter(|k| k.2).count() >= cap {
            return None;
        }
        for k in kept.iter_mut() {
            if k.2 && maps_to(&cq, &k.0) {
                k.2 = false;
            }
        }
        kept.push((cq, depth, true));
        queue.push_back(kept.len() - 1);
        Some(true)
    };
    for p in q.disjuncts() {
        let cq = canonical_names(&core(p));
        match admit(cq.clone(), 0, &mut kept, &mut queue) {
            Some(true) => {
                if visit(&cq, 0).is_break() {
                    stopped = true;
                    break;
                }
            }
            Some(false) => {}
            None => {
                saturated = false;
                break;
            }
        }
    }
    'outer: while !stopped && saturated {
        let Some(i) = queue.pop_front() else { break };
        if !kept[i].2 {
            continue;
        }
        let (cq, depth) = (kept[i].0.clone(), kept[i].1);
        for t in sigma {
            let (step, complete) = one_step_bounded(&cq, t);
            if !complete {
                saturated = false;
                break 'outer;
            }
            for r in step {
                match admit(r.clone(), depth + 1, &mut kept, &mut queue) {
                    Some(true) => {
                        if visit(&r, depth + 1).is_break() {
                            stopped = true;
                            break 'outer;
                        }
                    }
                    Some(false) => {}
                    None => {
                        saturated = false;
                        break 'outer;
                    }
                }
            }
        }
    }
    if stopped {
        saturated = false;
    }
    let alive: Vec<&(Cq, usize, bool)> = kept.iter().filter(|k| k.2).collect();
    Rewriting {
        ucq: Ucq::new(q.arity(), alive.iter().map(|k| k.0.clone()).collect()).expect("arity preserved"),
        depths: alive.iter().map(|k| k.1).collect(),
        saturated,
    }
}

/// Full rewriting; errors when the cap is exceeded.
pub fn rewrite(sigma: &[Tgd], q: &Ucq, cap: usize) -> Result<Rewriting> {
    let r = rewrite_visit(sigma, q, cap, |_, _| ControlFlow::Continue(()));
    if !r.saturated {
        return Err(Error::CapExceeded { what: "rewriting disjuncts".into(), cap });
    }
    Ok(r)
}

/// UCQ rewriting for linear TGDs: `q′(D) = q(chase(D, Σ))` for every D.
pub fn ucq_rewrite_linear(sigma: &[Tgd], q: &Ucq) -> Result<Ucq> {
    require_linear(sigma)?;
    Ok(rewrite(sigma, q, DEFAULT_REWRITE_CAP)?.ucq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hom::ucq_contained;

    fn equiv(a: &Ucq, b: &Ucq) -> bool {
        ucq_contained(a, b) && ucq_contained(b, a)
    }

    #[test]
    fn spec_examples() {
        let s = vec![Tgd::build(&[("R2", &["x"])], &[("R4", &["x"])])];
        let q = Ucq::single(Cq::build(&[], &[("R4", &["x"])]));
        let r = ucq_rewrite_linear(&s, &q).unwrap();
        let expect = Ucq::from_cqs(vec![Cq::build(&[], &[("R4", &["x"])]), Cq::build(&[], &[("R2", &["x"])])]).unwrap();
        assert!(equiv(&r, &expect));
        assert!(equiv(&ucq_rewrite_linear(&[], &q).unwrap(), &q));
        let chain = vec![Tgd::build(&[("A", &["x"])], &[("B", &["x"])]), Tgd::build(&[("B", &["x"])], &[("C", &["x"])])];
        let q = Ucq::single(Cq::build(&[], &[("C", &["x"])]));
        let r = ucq_rewrite_linear(&chain, &q).unwrap();
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn existential_piece_conditions() {
        // A(x) -> ∃y R(x,y): R(u,v),B(v) cannot be rewritten (v escapes);
        // R(u,v) alone rewrites to A(u); q(v) :- R(u,v) cannot.
        let s = [Tgd::build(&[("A", &["x"])], &[("R", &["x", "y"])])];
        assert!(one_step(&Cq::build(&[], &[("R", &["u", "v"]), ("B", &["v"])]), &s[0]).is_empty());
        let r = one_step(&Cq::build(&["u"], &[("R", &["u", "v"])]), &s[0]);
        assert_eq!(r, vec![Cq::build(&["u"], &[("A", &["u"])])]);
        assert!(one_step(&Cq::build(&["v"], &[("R", &["u", "v"])]), &s[0]).is_empty());
        // Two atoms sharing the existential must go together.
        let s2 = Tgd::build(&[("A", &["x"])], &[("R", &["x", "y"]), ("S", &["y"])]);
        let r = one_step(&Cq::build(&[], &[("R", &["u", "v"]), ("S", &["v"])]), &s2);
        assert!(r.iter().any(|c| c.len() == 1));
    }

    #[test]
    fn answer_variables_may_merge() {
        let s = vec![Tgd::build(&[("A", &["x"])], &[("R", &["x", "x"])])];
        let q = Ucq::single(Cq::build(&["u", "v"], &[("R", &["u", "v"])]));
        let r = ucq_rewrite_linear(&s, &q).unwrap();
        assert!(r.disjuncts().iter().any(|c| c.answer()[0] == c.answer()[1]));
    }

    #[test]
    fn cap_is_reported() {
        // Non-linear transitive closure does not saturate.
        let s = vec![Tgd::build(&[("R", &["x", "y"]), ("R", &["y", "z"])], &[("R", &["x", "z"])])];
        let q = Ucq::single(Cq::build(&["a", "b"], &[("R", &["a", "b"])]));
        assert!(matches!(rewrite(&s, &q, 20), Err(Error::CapExceeded { .. })));
    }
}
