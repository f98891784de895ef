//! UCQ_k-approximations.
//!
//! For guarded OMQs, a disjunct is replaced by all low-treewidth groundings
//! of its specializations: a specialization fixes a contraction and the set
//! V of variables that land on database constants, and a grounding replaces
//! every [V]-connected component by a guarded full CQ over V-variables and a
//! bounded pool of fresh variables whose chase entails the component. The
//! compact variant keeps the contraction itself and marks non-V variables
//! with a fresh unary predicate that the ontology attaches to existential
//! witnesses. For frontier-guarded CQSs the approximation is simply the set
//! of low-treewidth contractions.

use std::collections::{BTreeMap, BTreeSet};

use crate::classify::{classify_set, require_guarded};
use crate::error::{Error, Result};
use crate::guarded::GuardedClosure;
use crate::hom::{contractions, core, prune_subsumed};
use crate::model::{name, Atom, Cq, Cqs, Instance, Name, Omq, Schema, Term, Tgd, Ucq};
use crate::sets::minimal_true_sets;
use crate::treewidth::cq_has_treewidth_at_most;

/// Default cap on the groundings enumerated per specialization.
pub const DEFAULT_GROUNDING_CAP: usize = 100_000;

/// A contraction together with the variables meant to map to constants.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Specialization {
    pub contraction: Cq,
    pub v: BTreeSet<Name>,
}

/// A Σ-grounding of a specialization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grounding {
    /// Atoms of the contraction over V-variables only.
    pub g0: Vec<Atom>,
    /// One guarded full CQ (as atoms) per [V]-connected component.
    pub parts: Vec<Vec<Atom>>,
    /// The assembled CQ with the contraction's answer variables.
    pub cq: Cq,
}

/// All specializations of `q`: every contraction paired with every V
/// between the answer variables and all variables.
pub fn specializations(q: &Cq) -> Vec<Specialization> {
    let mut out = Vec::new();
    for c in contractions(q) {
        let answer: BTreeSet<Name> = c.cq.answer().iter().cloned().collect();
        let free: Vec<Name> = c.cq.vars().into_iter().filter(|v| !answer.contains(v)).collect();
        for mask in 0u64..(1u64 << free.len()) {
            let mut v = answer.clone();
            v.extend((0..free.len()).filter(|i| mask >> i & 1 == 1).map(|i| free[i].clone()));
            out.push(Specialization { contraction: c.cq.clone(), v });
        }
    }
    out
}

/// The maximally [V]-connected components of `p[V]`: atoms with a variable
/// outside V, grouped by connectivity through variables outside V.
pub fn v_components(p: &Cq, v: &BTreeSet<Name>) -> Vec<Vec<Atom>> {
    let atoms: Vec<&Atom> = p.atoms().iter().filter(|a| a.args.iter().any(|t| !v.contains(t.name()))).collect();
    let mut parent: Vec<usize> = (0..atoms.len()).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    let mut owner: BTreeMap<&Name, usize> = BTreeMap::new();
    for (i, a) in atoms.iter().enumerate() {
        for t in &a.args {
            if v.contains(t.name()) {
                continue;
            }
            match owner.get(t.name()) {
                Some(&j) => {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri] = rj;
                }
                None => {
                    owner.insert(t.name(), i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<Atom>> = BTreeMap::new();
    for (i, a) in atoms.iter().enumerate() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push((*a).clone());
    }
    let mut out: Vec<Vec<Atom>> = groups.into_values().collect();
    out.sort();
    out
}

/// What a grounding may use: predicates allowed as guards and as side atoms.
struct GroundingContext<'a> {
    sigma: &'a [Tgd],
    /// Predicates that can occur in the ground chase of a database: the
    /// data schema and TGD head predicates.
    guard_preds: Vec<(Name, usize)>,
    body_preds: BTreeSet<Name>,
    max_arity: usize,
    cap: usize,
}

impl<'a> GroundingContext<'a> {
    fn new(data_schema: &Schema, sigma: &'a [Tgd], t_arity: usize, cap: usize) -> Result<Self> {
        let mut guards = data_schema.clone();
        for t in sigma {
            for a in t.head() {
                guards.declare(&a.pred, a.args.len())?;
            }
        }
        Ok(GroundingContext {
            sigma,
            guard_preds: guards.iter().map(|(p, a)| (p.clone(), a)).collect(),
            body_preds: sigma.iter().flat_map(|t| t.body().iter().map(|a| a.pred.clone())).collect(),
            max_arity: t_arity,
            cap,
        })
    }

    /// Guarded full CQs for one component (up to renaming of the fresh pool)
    /// whose chase entails the component, fixing its V-variables. Only
    /// inclusion-minimal side sets are produced: adding atoms to a grounding
    /// only makes it more specific.
    fn component_groundings(&self, comp: &[Atom], v: &BTreeSet<Name>, pool: &[Name]) -> Result<Vec<Vec<Atom>>> {
        let vpart: Vec<Name> = comp
            .iter()
            .flat_map(|a| a.args.iter().map(|t| t.name().clone()))
            .filter(|n| v.contains(n))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let m = vpart.len();
        if m > self.max_arity {
            return Ok(Vec::new());
        }
        let pool = &pool[..self.max_arity - m];
        let comp_preds: BTreeSet<&Name> = comp.iter().map(|a| &a.pred).collect();
        let side_preds: Vec<(Name, usize)> = self
            .guard_preds
            .iter()
            .filter(|(p, _)| self.body_preds.contains(p) || comp_preds.contains(p))
            .cloned()
            .collect();
        let fixed: BTreeMap<Name, Name> = vpart.iter().map(|x| (x.clone(), x.clone())).collect();
        let mut out = Vec::new();
        for (gp, ar) in &self.guard_preds {
            for guard_args in guard_tuples(*ar, &vpart, pool) {
                let guard = Atom { pred: gp.clone(), args: guard_args.iter().map(|n| Term::Var(n.clone())).collect() };
                let gvars: Vec<Name> = guard_args.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
                let cands: Vec<Atom> = all_atoms(&side_preds, &gvars).into_iter().filter(|a| *a != guard).collect();
                let mut err = None;
                let minimal = minimal_true_sets(cands.len(), self.cap, |s| {
                    let mut inst: Instance = s.iter().map(|&i| cands[i].freeze()).collect();
                    inst.insert(guard.freeze());
                    match GuardedClosure::new(&inst, self.sigma) {
                        Ok(gc) => gc.entails_atoms(comp, &fixed),
                        Err(e) => {
                            err = Some(e);
                            false
                        }
                    }
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
                for s in minimal {
                    let mut g = vec![guard.clone()];
                    g.extend(s.iter().map(|&i| cands[i].clone()));
                    out.push(g);
                    if out.len() > self.cap {
                        return Err(Error::CapExceeded { what: "grounding candidates".into(), cap: self.cap });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Argument tuples of length `ar` over `vpart ∪ pool` that contain every
/// V-variable, with pool variables introduced in order (one representative
/// per renaming of the pool).
fn guard_tuples(ar: usize, vpart: &[Name], pool: &[Name]) -> Vec<Vec<Name>> {
    let mut out = Vec::new();
    let mut cur: Vec<Name> = Vec::new();
    fn rec(ar: usize, vpart: &[Name], pool: &[Name], used_pool: usize, cur: &mut Vec<Name>, out: &mut Vec<Vec<Name>>) {
        if cur.len() == ar {
            if vpart.iter().all(|x| cur.contains(x)) {
                out.push(cur.clone());
            }
            return;
        }
        for x in vpart {
            cur.push(x.clone());
            rec(ar, vpart, pool, used_pool, cur, out);
            cur.pop();
        }
        for (j, y) in pool.iter().enumerate().take((used_pool + 1).min(pool.len())) {
            cur.push(y.clone());
            rec(ar, vpart, pool, used_pool.max(j + 1), cur, out);
            cur.pop();
        }
    }
    rec(ar, vpart, pool, 0, &mut cur, &mut out);
    out
}

/// All atoms with the given predicates over the given variables.
fn all_atoms(preds: &[(Name, usize)], vars: &[Name]) -> Vec<Atom> {
    let mut out = Vec::new();
    for (p, ar) in preds {
        if vars.is_empty() && *ar > 0 {
            continue;
        }
        let total = vars.len().pow(*ar as u32);
        for mut code in 0..total {
            let mut args = Vec::with_capacity(*ar);
            for _ in 0..*ar {
                args.push(Term::Var(vars[code % vars.len()].clone()));
                code /= vars.len();
            }
            out.push(Atom { pred: p.clone(), args });
        }
    }
    out
}

/// A prefix no variable of `q` starts with.
fn fresh_prefix(q: &Cq, base: &str) -> String {
    let mut prefix = base.to_string();
    while q.vars().iter().any(|v| v.starts_with(&prefix)) {
        prefix.insert(0, '_');
    }
    prefix
}

/// All Σ-groundings of a specialization over a schema of arity `t_arity`,
/// with guards from the data schema and TGD heads.
pub fn groundings(s: &Specialization, sigma: &[Tgd], data_schema: &Schema, t_arity: usize) -> Result<Vec<Grounding>> {
    groundings_capped(s, sigma, data_schema, t_arity, DEFAULT_GROUNDING_CAP)
}

fn groundings_capped(
    s: &Specialization,
    sigma: &[Tgd],
    data_schema: &Schema,
    t_arity: usize,
    cap: usize,
) -> Result<Vec<Grounding>> {
    require_guarded(sigma)?;
    let ctx = GroundingContext::new(data_schema, sigma, t_arity, cap)?;
    grounding_enum(&ctx, s)
}

fn grounding_enum(ctx: &GroundingContext<'_>, s: &Specialization) -> Result<Vec<Grounding>> {
    let p = &s.contraction;
    let g0: Vec<Atom> = p.atoms().iter().filter(|a| a.args.iter().all(|t| s.v.contains(t.name()))).cloned().collect();
    let prefix = fresh_prefix(p, "_y");
    let comps = v_components(p, &s.v);
    let mut per_comp = Vec::with_capacity(comps.len());
    for (i, comp) in comps.iter().enumerate() {
        let pool: Vec<Name> = (0..ctx.max_arity).map(|j| name(&format!("{prefix}{i}_{j}"))).collect();
        let gs = ctx.component_groundings(comp, &s.v, &pool)?;
        if gs.is_empty() {
            return Ok(Vec::new());
        }
        per_comp.push(gs);
    }
    let total: usize = per_comp.iter().map(Vec::len).try_fold(1usize, |acc, n| acc.checked_mul(n)).unwrap_or(usize::MAX);
    if total > ctx.cap {
        return Err(Error::CapExceeded { what: "groundings per specialization".into(), cap: ctx.cap });
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; per_comp.len()];
    loop {
        let parts: Vec<Vec<Atom>> = idx.iter().zip(&per_comp).map(|(&i, gs)| gs[i].clone()).collect();
        let mut atoms: BTreeSet<Atom> = g0.iter().cloned().collect();
        atoms.extend(parts.iter().flatten().cloned());
        let cq = Cq::new(p.answer().to_vec(), atoms)?;
        out.push(Grounding { g0: g0.clone(), parts, cq });
        let mut pos = 0;
        while pos < idx.len() {
            idx[pos] += 1;
            if idx[pos] < per_comp[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == idx.len() {
            return Ok(out);
        }
    }
}

/// Refuse widths below `ar(T) − 1`: there, approximations can require
/// exponentially large CQs and the grounding construction is not exact.
pub fn require_arity_threshold(k: usize, t_arity: usize) -> Result<()> {
    let required = t_arity.saturating_sub(1);
    if k < required {
        return Err(Error::BelowArityThreshold { k, required });
    }
    Ok(())
}

/// The UCQ_k-approximation `Q_k^a`: same data schema and ontology, and the
/// groundings of treewidth ≤ k of all specializations of all disjuncts
/// (normalized to cores, subsumed disjuncts removed).
pub fn ucq_k_approx(q: &Omq, k: usize) -> Result<Omq> {
    require_guarded(&q.sigma)?;
    let t_arity = q.schema()?.max_arity();
    require_arity_threshold(k, t_arity)?;
    let ctx = GroundingContext::new(&q.data_schema, &q.sigma, t_arity, DEFAULT_GROUNDING_CAP)?;
    let mut cqs = Vec::new();
    for p in q.query.disjuncts() {
        for s in specializations(p) {
            for g in grounding_enum(&ctx, &s)? {
                if cq_has_treewidth_at_most(&g.cq, k)? {
                    cqs.push(core(&g.cq));
                }
            }
        }
    }
    let query = Ucq::new(q.query.arity(), normalize(cqs))?;
    Ok(Omq::new(q.data_schema.clone(), q.sigma.clone(), query))
}

/// Sort, deduplicate up to equality and drop subsumed disjuncts.
fn normalize(cqs: Vec<Cq>) -> Vec<Cq> {
    let mut v = prune_subsumed(cqs);
    v.sort_by_key(|c| c.to_string());
    v
}

/// A unary predicate name not used in `schema`.
fn fresh_marker(schema: &Schema) -> Name {
    if !schema.contains("A") {
        return name("A");
    }
    (1..).map(|i| format!("A_{i}")).find(|c| !schema.contains(c)).map(|c| name(&c)).unwrap()
}

/// The compact approximation `Q′_k`: the ontology marks existential
/// witnesses with a fresh unary predicate `A`, and the query keeps each
/// contraction admitting a grounding of treewidth ≤ k, marking its
/// variables outside V with `A`. Equivalent to `Q_k^a` for k ≥ ar(T) − 1.
pub fn compact_approx(q: &Omq, k: usize) -> Result<Omq> {
    require_guarded(&q.sigma)?;
    let schema = q.schema()?;
    let t_arity = schema.max_arity();
    require_arity_threshold(k, t_arity)?;
    let marker = fresh_marker(&schema);
    let ctx = GroundingContext::new(&q.data_schema, &q.sigma, t_arity, DEFAULT_GROUNDING_CAP)?;
    let mut cqs = Vec::new();
    for p in q.query.disjuncts() {
        for s in specializations(p) {
            // All groundings of a specialization share the width bound, so
            // one witness suffices; still, search for any.
            let gs = grounding_enum(&ctx, &s)?;
            let mut admits = false;
            for g in &gs {
                if cq_has_treewidth_at_most(&g.cq, k)? {
                    admits = true;
                    break;
                }
            }
            if admits {
                let marks = s
                    .contraction
                    .vars()
                    .into_iter()
                    .filter(|x| !s.v.contains(x))
                    .map(|x| Atom { pred: marker.clone(), args: vec![Term::Var(x)] });
                cqs.push(core(&s.contraction.with_atoms(marks)));
            }
        }
    }
    let sigma = mark_existentials(&q.sigma, &marker);
    let query = Ucq::new(q.query.arity(), normalize(cqs))?;
    Ok(Omq::new(q.data_schema.clone(), sigma, query))
}

/// Extend every TGD head with `marker(z)` for each existential variable z.
pub fn mark_existentials(sigma: &[Tgd], marker: &Name) -> Vec<Tgd> {
    sigma
        .iter()
        .map(|t| t.with_head_atoms(t.existentials().iter().map(|z| Atom { pred: marker.clone(), args: vec![Term::Var(z.clone())] })))
        .collect()
}

/// The contraction approximation of a frontier-guarded CQS: all
/// contractions of treewidth ≤ k. Requires k ≥ r·m − 1 with r the schema
/// arity and m the maximal number of head atoms.
pub fn cqs_k_approx(s: &Cqs, k: usize) -> Result<Cqs> {
    let cls = classify_set(&s.sigma);
    if !cls.frontier_guarded {
        let bad = s.sigma.iter().find(|t| !crate::classify::classify(t).frontier_guarded).unwrap();
        return Err(Error::NotFrontierGuarded { m: cls.m, reason: format!("{bad} has an unguarded frontier") });
    }
    let r = s.schema()?.max_arity();
    let m = cls.m.max(1);
    let required = (r * m).saturating_sub(1);
    if k < required {
        return Err(Error::BelowArityThreshold { k, required });
    }
    let mut cqs = Vec::new();
    for p in s.query.disjuncts() {
        for c in contractions(p) {
            if cq_has_treewidth_at_most(&c.cq, k)? {
                cqs.push(core(&c.cq));
            }
        }
    }
    Ok(Cqs::new(s.sigma.clone(), Ucq::new(s.query.arity(), normalize(cqs))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hom::cq_equivalent;

    #[test]
    fn specialization_counts() {
        assert_eq!(specializations(&Cq::build(&[], &[("P", &["x", "y"])])).len(), 6);
        assert_eq!(specializations(&Cq::build(&["x"], &[("P", &["x", "y"])])).len(), 3);
        assert_eq!(specializations(&Cq::build(&[], &[("A", &["x"])])).len(), 2);
    }

    #[test]
    fn components() {
        let p = Cq::build(&[], &[("P", &["x", "y"]), ("P", &["y", "z"])]);
        let y: BTreeSet<Name> = [name("y")].into();
        assert_eq!(v_components(&p, &y).len(), 2);
        assert!(v_components(&p, &p.vars()).is_empty());
        assert_eq!(v_components(&p, &BTreeSet::new()), vec![p.atoms().iter().cloned().collect::<Vec<_>>()]);
    }

    #[test]
    fn guard_tuples_cover_v_part() {
        let v = [name("x")];
        let pool = [name("p0"), name("p1")];
        let ts = guard_tuples(2, &v, &pool);
        // (x,x), (x,p0), (p0,x)
        assert_eq!(ts.len(), 3);
    }

    #[test]
    fn groundings_without_constraints() {
        let s = Specialization { contraction: Cq::build(&[], &[("R", &["u", "v"])]), v: BTreeSet::new() };
        let schema = Schema::from_pairs([("R", 2)]).unwrap();
        let gs = groundings(&s, &[], &schema, 2).unwrap();
        // Guards R(p0,p0) and R(p0,p1) both entail R(u,v): the
        // homomorphism into the chase need not be injective.
        assert_eq!(gs.len(), 2);
        for g in &gs {
            assert_eq!(g.parts.len(), 1);
            assert_eq!(g.parts[0].len(), 1);
        }
    }

    #[test]
    fn independent_components_multiply() {
        let s = Specialization {
            contraction: Cq::build(&["y"], &[("R", &["x", "y"]), ("R", &["y", "z"])]),
            v: [name("y")].into(),
        };
        let schema = Schema::from_pairs([("R", 2)]).unwrap();
        let single = |atoms: &[(&str, &[&str])]| {
            let s1 = Specialization { contraction: Cq::build(&["y"], atoms), v: [name("y")].into() };
            groundings(&s1, &[], &schema, 2).unwrap().len()
        };
        let n1 = single(&[("R", &["x", "y"])]);
        let n2 = single(&[("R", &["y", "z"])]);
        assert_eq!(groundings(&s, &[], &schema, 2).unwrap().len(), n1 * n2);
    }

    #[test]
    fn refusal_below_threshold() {
        let schema = Schema::from_pairs([("T", 3)]).unwrap();
        let q = Omq::new(schema, vec![], Ucq::single(Cq::build(&[], &[("T", &["x", "y", "z"])])));
        assert!(matches!(ucq_k_approx(&q, 1), Err(Error::BelowArityThreshold { k: 1, required: 2 })));
        assert!(matches!(compact_approx(&q, 0), Err(Error::BelowArityThreshold { .. })));
        assert!(ucq_k_approx(&q, 2).is_ok());
    }

    #[test]
    fn constraint_free_low_width_query_survives() {
        let schema = Schema::from_pairs([("R", 2)]).unwrap();
        let p = Cq::build(&["x"], &[("R", &["x", "y"]), ("R", &["y", "z"])]);
        let q = Omq::new(schema, vec![], Ucq::single(p.clone()));
        let a = ucq_k_approx(&q, 1).unwrap();
        assert!(a.query.disjuncts().iter().any(|d| cq_equivalent(d, &p)));
    }

    #[test]
    fn compact_without_existentials_has_no_markers() {
        let schema = Schema::from_pairs([("R", 2), ("S", 2)]).unwrap();
        let sigma = vec![Tgd::build(&[("R", &["x", "y"])], &[("S", &["y", "x"])])];
        let q = Omq::new(schema, sigma, Ucq::single(Cq::build(&[], &[("S", &["x", "y"]), ("S", &["y", "z"])])));
        let c = compact_approx(&q, 1).unwrap();
        assert!(c.query.disjuncts().iter().all(|d| d.atoms().iter().all(|a| a.pred.as_ref() != "A")));
    }

    #[test]
    fn four_clique_contractions() {
        let mut atoms = Vec::new();
        let vs = ["a", "b", "c", "d"];
        for i in 0..4 {
            for j in i + 1..4 {
                atoms.push(("E", vec![vs[i], vs[j]]));
            }
        }
        let atoms: Vec<(&str, &[&str])> = atoms.iter().map(|(p, a)| (*p, a.as_slice())).collect();
        let q = Cq::build(&[], &atoms);
        let s = Cqs::new(vec![], Ucq::single(q));
        let a = cqs_k_approx(&s, 1).unwrap();
        for d in a.query.disjuncts() {
            assert!(cq_has_treewidth_at_most(d, 1).unwrap());
        }
        assert!(!a.query.is_empty());
    }
}
