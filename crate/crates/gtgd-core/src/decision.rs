//! Containment and UCQ_k-equivalence deciders.
//!
//! CQS containment follows the chase criterion: `(Σ,q1) ⊆ (Σ,q2)` iff for
//! every disjunct `p1` of `q1`, the frozen answer tuple of `p1` is an answer
//! of `q2` on the chase of `p1`'s canonical database. For guarded Σ this is
//! decided exactly by the guarded closure; for frontier-guarded Σ a
//! depth-escalated chase certifies "yes" and a finite-model search certifies
//! "no". OMQ containment with a restricted data schema is decided through
//! the UCQ rewriting of the left OMQ when that rewriting saturates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::ControlFlow;

use crate::approx::{cqs_k_approx, ucq_k_approx};
use crate::chase::{chase, ChaseBudget};
use crate::classify::{classify, classify_set, require_guarded};
use crate::error::{Error, Result};
use crate::finite::{find_finite_model, FiniteModelOptions, FiniteSearch};
use crate::guarded::GuardedClosure;
use crate::hom::{core, IndexedInstance};
use crate::model::{name, Atom, Cq, Cqs, Instance, Name, Omq, Tgd, Tuple, Ucq};
use crate::rewrite::{rewrite_visit, DEFAULT_REWRITE_CAP};
use crate::treewidth::cq_has_treewidth_at_most;

/// Three-valued outcome of a decision procedure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    Yes,
    No,
    /// The budget ran out before either answer could be certified.
    Unknown,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Unknown => "unknown",
        })
    }
}

/// Evidence backing a verdict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// A database on which `tuple` is an answer on the left but not on the
    /// right. For CQS containment the database satisfies Σ.
    Counterexample { database: Instance, tuple: Tuple },
    /// An equivalent OMQ whose query has bounded treewidth.
    Omq(Omq),
    /// An equivalent CQS whose query has bounded treewidth.
    Cqs(Cqs),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub answer: Answer,
    pub witness: Option<Witness>,
    /// How the verdict was obtained.
    pub note: String,
}

impl Verdict {
    fn yes(note: &str) -> Verdict {
        Verdict { answer: Answer::Yes, witness: None, note: note.into() }
    }

    fn unknown(note: &str) -> Verdict {
        Verdict { answer: Answer::Unknown, witness: None, note: note.into() }
    }

    fn no(witness: Option<Witness>, note: &str) -> Verdict {
        Verdict { answer: Answer::No, witness, note: note.into() }
    }
}

/// Budgets for the deciders.
#[derive(Clone, Copy, Debug)]
pub struct DecisionOptions {
    /// Atom cap for chase runs.
    pub chase_atoms: usize,
    /// Maximal chase depth for depth escalation.
    pub max_depth: usize,
    /// Finite-model refutation search.
    pub finite: FiniteModelOptions,
    /// Cap on rewriting disjuncts.
    pub rewrite_cap: usize,
}

impl Default for DecisionOptions {
    fn default() -> Self {
        DecisionOptions {
            chase_atoms: 20_000,
            max_depth: 12,
            finite: FiniteModelOptions::default(),
            rewrite_cap: DEFAULT_REWRITE_CAP,
        }
    }
}

fn same_sigma(a: &[Tgd], b: &[Tgd]) -> bool {
    a.iter().collect::<BTreeSet<_>>() == b.iter().collect::<BTreeSet<_>>()
}

fn frozen(p: &Cq) -> (Instance, Tuple) {
    (p.canonical_database(), p.answer().to_vec())
}

/// Does the chase of `d` under frontier-guarded Σ satisfy `q(tuple)`?
/// `Some` when certified (by the guarded closure, a hit in a chase prefix,
/// or a terminating chase), `None` when the budget ran out.
pub(crate) fn chase_entails(d: &Instance, sigma: &[Tgd], q: &Ucq, tuple: &[Name], opts: &DecisionOptions) -> Result<Option<bool>> {
    if sigma.iter().all(|t| classify(t).guarded) {
        return Ok(Some(GuardedClosure::new(d, sigma)?.entails_ucq(q, tuple)));
    }
    for l in 1..=opts.max_depth {
        let run = chase(d, sigma, ChaseBudget::LevelsWithCap(l, opts.chase_atoms));
        if IndexedInstance::new(&run.instance).holds_ucq(q, tuple) {
            return Ok(Some(true));
        }
        if run.terminated {
            return Ok(Some(false));
        }
        if run.max_level() < l {
            break;
        }
    }
    Ok(None)
}

/// A model of Σ containing `d` on which `q(tuple)` fails: the chase when it
/// terminates, otherwise a bounded finite-model search.
fn refuting_model(d: &Instance, sigma: &[Tgd], q: &Ucq, tuple: &[Name], opts: &DecisionOptions) -> Result<Option<Instance>> {
    let run = chase(d, sigma, ChaseBudget::FixpointWithCap(opts.chase_atoms));
    if run.terminated {
        let inst = run.instance.without_levels();
        return Ok((!IndexedInstance::new(&inst).holds_ucq(q, tuple)).then_some(inst));
    }
    Ok(match find_finite_model(d, sigma, Some((q, tuple)), opts.finite)? {
        FiniteSearch::Found(m) => Some(m),
        _ => None,
    })
}

/// Containment of CQSs with the same frontier-guarded ontology.
pub fn cqs_contains(s1: &Cqs, s2: &Cqs, opts: &DecisionOptions) -> Result<Verdict> {
    if s1.query.arity() != s2.query.arity() {
        return Err(Error::ArityMismatch { expected: s1.query.arity(), got: s2.query.arity() });
    }
    if !same_sigma(&s1.sigma, &s2.sigma) {
        return Err(Error::DifferingSigma);
    }
    let cls = classify_set(&s1.sigma);
    if !cls.frontier_guarded {
        return Err(Error::NotFrontierGuarded { m: cls.m, reason: "the ontology is not frontier-guarded".into() });
    }
    let sigma = &s1.sigma;
    let mut undecided = false;
    for p1 in s1.query.disjuncts() {
        let (d, tuple) = frozen(p1);
        match chase_entails(&d, sigma, &s2.query, &tuple, opts)? {
            Some(true) => {}
            Some(false) => {
                let witness = refuting_model(&d, sigma, &s2.query, &tuple, opts)?
                    .map(|database| Witness::Counterexample { database, tuple: tuple.clone() });
                let note = if witness.is_some() {
                    "a model of Σ separates the queries"
                } else {
                    "certified by the chase criterion; no finite model found within budget"
                };
                return Ok(Verdict::no(witness, note));
            }
            None => match refuting_model(&d, sigma, &s2.query, &tuple, opts)? {
                Some(database) => {
                    return Ok(Verdict::no(
                        Some(Witness::Counterexample { database, tuple }),
                        "a finite model of Σ separates the queries",
                    ))
                }
                None => undecided = true,
            },
        }
    }
    Ok(if undecided {
        Verdict::unknown("chase depth and finite-model budgets exhausted")
    } else {
        Verdict::yes("every left disjunct is entailed by the right query on its chase")
    })
}

/// Certain answer check for a guarded OMQ on a database.
pub fn omq_holds(q: &Omq, d: &Instance, tuple: &[Name]) -> Result<bool> {
    Ok(GuardedClosure::new(d, &q.sigma)?.entails_ucq(&q.query, tuple))
}

fn over_schema(p: &Cq, q: &Omq) -> bool {
    p.atoms().iter().all(|a| q.data_schema.arity(&a.pred) == Some(a.args.len()))
}

/// Containment of guarded OMQs over the same data schema.
///
/// With equal ontologies, each left disjunct whose chase entails the right
/// query is settled; a left disjunct over the data schema that fails is a
/// counterexample database by itself. Otherwise the left OMQ is rewritten
/// into a UCQ and each disjunct over the data schema is tested as a
/// database: a failing one is a counterexample, and a saturated rewriting
/// with no failure proves containment.
pub fn omq_contains(q1: &Omq, q2: &Omq, opts: &DecisionOptions) -> Result<Verdict> {
    if q1.data_schema != q2.data_schema {
        return Err(Error::SchemaMismatch("the OMQs have different data schemas".into()));
    }
    if q1.query.arity() != q2.query.arity() {
        return Err(Error::ArityMismatch { expected: q1.query.arity(), got: q2.query.arity() });
    }
    require_guarded(&q1.sigma)?;
    require_guarded(&q2.sigma)?;
    if same_sigma(&q1.sigma, &q2.sigma) {
        let mut all = true;
        for p1 in q1.query.disjuncts() {
            let (d, tuple) = frozen(p1);
            if omq_holds(q2, &d, &tuple)? {
                continue;
            }
            if over_schema(p1, q1) {
                return Ok(Verdict::no(
                    Some(Witness::Counterexample { database: d, tuple }),
                    "the canonical database of a left disjunct separates the OMQs",
                ));
            }
            all = false;
            break;
        }
        if all {
            return Ok(Verdict::yes("every left disjunct is entailed by the right query on its chase"));
        }
    }
    let mut failure: Option<Result<Witness>> = None;
    let rw = rewrite_visit(&q1.sigma, &q1.query, opts.rewrite_cap, |p, _| {
        if !over_schema(p, q1) {
            return ControlFlow::Continue(());
        }
        let (d, tuple) = frozen(p);
        match omq_holds(q2, &d, &tuple) {
            Ok(true) => ControlFlow::Continue(()),
            Ok(false) => {
                failure = Some(Ok(Witness::Counterexample { database: d, tuple }));
                ControlFlow::Break(())
            }
            Err(e) => {
                failure = Some(Err(e));
                ControlFlow::Break(())
            }
        }
    });
    match failure {
        Some(Err(e)) => Err(e),
        Some(Ok(w)) => Ok(Verdict::no(Some(w), "a disjunct of the left rewriting separates the OMQs")),
        None if rw.saturated => Ok(Verdict::yes("every disjunct of the saturated left rewriting is entailed")),
        None => Ok(Verdict::unknown("the left rewriting did not saturate within the cap")),
    }
}

/// Uniform UCQ_k-equivalence of a guarded OMQ: decide `Q ⊆ Q_k^a` (the
/// converse always holds). A "yes" ships `Q_k^a` as the witness.
pub fn omq_equiv_k(q: &Omq, k: usize, opts: &DecisionOptions) -> Result<Verdict> {
    let approx = ucq_k_approx(q, k)?;
    let mut v = omq_contains(q, &approx, opts)?;
    if v.answer == Answer::Yes {
        v.witness = Some(Witness::Omq(approx));
    }
    Ok(v)
}

/// Uniform UCQ_k-equivalence of a frontier-guarded CQS: decide
/// `S ⊆ S_k^a` (the converse always holds). A "yes" ships `S_k^a`.
pub fn cqs_equiv_k(s: &Cqs, k: usize, opts: &DecisionOptions) -> Result<Verdict> {
    let approx = cqs_k_approx(s, k)?;
    let mut v = cqs_contains(s, &approx, opts)?;
    if v.answer == Answer::Yes {
        v.witness = Some(Witness::Cqs(approx));
    }
    Ok(v)
}

/// Constraint-free baseline: a CQ is equivalent to one of treewidth ≤ k
/// iff its core has treewidth ≤ k.
pub fn cq_k_equiv_baseline(q: &Cq, k: usize) -> Result<bool> {
    cq_has_treewidth_at_most(&core(q), k)
}

/// Maximal number of chase terms considered by [`sigma_minimal_cq`].
pub const MINIMAL_CQ_TERM_CAP: usize = 24;

/// A CQ with the fewest variables that is equivalent to `q` under Σ.
///
/// Any Σ-equivalent CQ maps into the chase of q, and its image there is
/// again Σ-equivalent; enlarging that image to all chase atoms over its
/// terms keeps it equivalent. So it suffices to try, by increasing size,
/// sets X of chase terms containing the answer variables, taking all chase
/// atoms over X, and testing whether q maps into their chase. The chase of
/// q is explored up to `opts.max_depth` levels.
pub fn sigma_minimal_cq(q: &Cq, sigma: &[Tgd], opts: &DecisionOptions) -> Result<Cq> {
    let (d, tuple) = frozen(q);
    let run = chase(&d, sigma, ChaseBudget::LevelsWithCap(opts.max_depth, opts.chase_atoms));
    let inst = run.instance.without_levels();
    let answer: BTreeSet<Name> = tuple.iter().cloned().collect();
    // Query variables first, so that ties prefer the original names.
    let mut terms: Vec<Name> = q.vars().into_iter().filter(|v| !answer.contains(v)).collect();
    let qvars = q.vars();
    terms.extend(inst.adom().into_iter().filter(|t| !qvars.contains(t)));
    if terms.len() > MINIMAL_CQ_TERM_CAP {
        return Err(Error::BudgetExceeded(format!(
            "{} chase terms exceed the cap of {MINIMAL_CQ_TERM_CAP} for the minimal-CQ search",
            terms.len()
        )));
    }
    let target = Ucq::single(q.clone());
    let n_exist = q.vars().len() - answer.len();
    for size in 0..n_exist {
        let mut found: Option<Cq> = None;
        for_each_subset(terms.len(), size, &mut |idx| {
            let mut keep = answer.clone();
            keep.extend(idx.iter().map(|&i| terms[i].clone()));
            let sub = inst.restrict(&keep);
            let sub_terms = sub.adom();
            if !keep.iter().all(|t| sub_terms.contains(t)) {
                return Ok(false);
            }
            let p = Cq::new(q.answer().to_vec(), sub.iter().map(Atom::thaw))?;
            let (pd, ptuple) = frozen(&p);
            if chase_entails(&pd, sigma, &target, &ptuple, opts)? == Some(true) {
                found = Some(p);
                return Ok(true);
            }
            Ok(false)
        })?;
        if let Some(p) = found {
            return Ok(rename_nulls(&p));
        }
    }
    Ok(q.clone())
}

/// Visit the `size`-subsets of `0..n` in lexicographic order until `f`
/// returns true.
fn for_each_subset(n: usize, size: usize, f: &mut dyn FnMut(&[usize]) -> Result<bool>) -> Result<bool> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> Result<bool>) -> Result<bool> {
        if cur.len() == size {
            return f(cur);
        }
        for i in start..n {
            cur.push(i);
            if rec(i + 1, n, size, cur, f)? {
                return Ok(true);
            }
            cur.pop();
        }
        Ok(false)
    }
    rec(0, n, size, &mut Vec::new(), f)
}

/// Rename chase nulls that became variables to `z0, z1, …` (avoiding the
/// CQ's other variable names).
fn rename_nulls(p: &Cq) -> Cq {
    let vars = p.vars();
    let nulls: Vec<&Name> = vars.iter().filter(|v| v.starts_with(crate::model::NULL_PREFIX)).collect();
    let mut map = BTreeMap::new();
    let mut i = 0;
    for n in nulls {
        let fresh = loop {
            let c = name(&format!("z{i}"));
            i += 1;
            if !vars.contains(&c) {
                break c;
            }
        };
        map.insert(n.clone(), fresh);
    }
    p.rename(|v| map.get(v).cloned().unwrap_or_else(|| v.clone()))
}
