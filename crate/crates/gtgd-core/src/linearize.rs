//! Compilation of guarded TGDs into linear TGDs over Σ-types, and its uses:
//! the typed base database D*, fixed-parameter OMQ evaluation, and the
//! elimination of existential quantifiers from guarded OMQs.
//!
//! A Σ-type records the shape of a guard atom (its argument pattern over
//! `1..n`) together with the atoms derivable over the guard's terms. Typed
//! predicates `[τ]` carry such a type; the *type generator* fires a TGD on a
//! type when the TGD body maps into the type with the guard landing on the
//! type's guard, producing the types of the head atoms; the *expander*
//! turns `[τ](x̄)` back into the guard atom of τ.
//!
//! Side atoms are projected onto the predicates occurring in TGD bodies: no
//! other atom can influence a derivation, and the query only ever matches
//! expanded guard atoms.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::chase::{chase, ChaseBudget};
use crate::classify::{classify, require_guarded};
use crate::error::{Error, Result};
use crate::guarded::GuardedClosure;
use crate::hom::{core, eval, prune_subsumed, set_partitions};
use crate::model::{name, Atom, Cq, Instance, Name, Omq, Schema, Term, Tgd, Tuple, Ucq};
use crate::rewrite::{rewrite, DEFAULT_REWRITE_CAP};
use crate::sets::minimal_true_sets;

/// Default cap on the number of Σ-types.
pub const DEFAULT_TYPE_CAP: usize = 20_000;

/// An atom over the integers `1..=ar(τ)`.
pub type IntAtom = (Name, Vec<u32>);

/// A Σ-type: a normalized guard pattern plus side atoms over its integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SigmaType {
    pub pred: Name,
    /// Normalized: starts at 1, each entry repeats an earlier one or is the
    /// next unused integer.
    pub guard: Vec<u32>,
    pub side: BTreeSet<IntAtom>,
}

impl SigmaType {
    /// Largest integer in the guard.
    pub fn arity(&self) -> usize {
        self.guard.iter().copied().max().unwrap_or(0) as usize
    }

    pub fn guard_atom(&self) -> IntAtom {
        (self.pred.clone(), self.guard.clone())
    }

    /// Guard plus side atoms.
    pub fn atoms(&self) -> BTreeSet<IntAtom> {
        let mut s = self.side.clone();
        s.insert(self.guard_atom());
        s
    }

    /// Instantiate with `terms[i-1]` for integer `i`.
    pub fn instantiate(&self, terms: &[Term]) -> Vec<Atom> {
        self.atoms()
            .into_iter()
            .map(|(p, args)| Atom { pred: p, args: args.iter().map(|&i| terms[i as usize - 1].clone()).collect() })
            .collect()
    }

    /// Instantiate from a tuple laid out like the guard (one entry per guard
    /// position); `None` when the tuple does not follow the guard pattern.
    pub fn instantiate_guard_tuple(&self, tuple: &[Term]) -> Option<Vec<Atom>> {
        if tuple.len() != self.guard.len() {
            return None;
        }
        let mut terms: Vec<Option<Term>> = vec![None; self.arity()];
        for (&i, t) in self.guard.iter().zip(tuple) {
            match &terms[i as usize - 1] {
                Some(old) if old != t => return None,
                _ => terms[i as usize - 1] = Some(t.clone()),
            }
        }
        let terms: Vec<Term> = terms.into_iter().collect::<Option<_>>()?;
        // Distinct integers must get distinct terms (tuple ≃ guard).
        let distinct: BTreeSet<&Term> = terms.iter().collect();
        if distinct.len() != terms.len() {
            return None;
        }
        Some(self.instantiate(&terms))
    }
}

fn fmt_int_atom(f: &mut fmt::Formatter<'_>, (p, args): &IntAtom) -> fmt::Result {
    write!(f, "{p}(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

impl fmt::Display for SigmaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        fmt_int_atom(f, &self.guard_atom())?;
        f.write_str(",{")?;
        for (i, a) in self.side.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            fmt_int_atom(f, a)?;
        }
        f.write_str("}]")
    }
}

/// Normalize an argument list: the pattern over `1..` and the distinct
/// terms in order of first occurrence.
pub fn normalize_guard(args: &[Name]) -> (Vec<u32>, Vec<Name>) {
    let mut distinct: Vec<Name> = Vec::new();
    let pattern = args
        .iter()
        .map(|a| match distinct.iter().position(|d| d == a) {
            Some(i) => i as u32 + 1,
            None => {
                distinct.push(a.clone());
                distinct.len() as u32
            }
        })
        .collect();
    (pattern, distinct)
}

/// All atoms over the integers `1..=n` with the given predicates.
fn base_atoms(schema: &[(Name, usize)], n: u32) -> Vec<IntAtom> {
    let mut out = Vec::new();
    for (p, ar) in schema {
        let mut idx = vec![1u32; *ar];
        if n == 0 && *ar > 0 {
            continue;
        }
        loop {
            out.push((p.clone(), idx.clone()));
            let mut pos = 0;
            loop {
                if pos == *ar {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] <= n {
                    break;
                }
                idx[pos] = 1;
                pos += 1;
            }
            if pos == *ar {
                break;
            }
        }
    }
    out
}

/// Normalized guard patterns for a predicate of arity `n`.
fn patterns(n: usize) -> Vec<Vec<u32>> {
    set_partitions(n).into_iter().map(|rgs| rgs.into_iter().map(|b| b as u32 + 1).collect()).collect()
}

/// Every Σ-type over the schema (guard from the schema, any side set).
pub fn enumerate_types(schema: &Schema, cap: usize) -> Result<Vec<SigmaType>> {
    let preds: Vec<(Name, usize)> = schema.iter().map(|(p, a)| (p.clone(), a)).collect();
    let mut out = Vec::new();
    for (p, ar) in &preds {
        for pat in patterns(*ar) {
            let n = pat.iter().copied().max().unwrap_or(0);
            let guard = (p.clone(), pat.clone());
            let cands: Vec<IntAtom> = base_atoms(&preds, n).into_iter().filter(|a| *a != guard).collect();
            if cands.len() >= 63 || out.len() + (1usize << cands.len()) > cap {
                return Err(Error::CapExceeded { what: "Σ-types".into(), cap });
            }
            for mask in 0u64..(1u64 << cands.len()) {
                let side = (0..cands.len()).filter(|i| mask >> i & 1 == 1).map(|i| cands[i].clone()).collect();
                out.push(SigmaType { pred: p.clone(), guard: pat.clone(), side });
            }
        }
    }
    Ok(out)
}

/// The type of `alpha` within `closure` (a set of ground atoms), optionally
/// projected onto `relevant` predicates.
fn type_within(alpha: &Atom, closure: &Instance, relevant: Option<&BTreeSet<Name>>) -> (SigmaType, Vec<Name>) {
    let args: Vec<Name> = alpha.args.iter().map(|t| t.name().clone()).collect();
    let (guard, distinct) = normalize_guard(&args);
    let pos: HashMap<&Name, u32> = distinct.iter().enumerate().map(|(i, n)| (n, i as u32 + 1)).collect();
    let side = closure
        .iter()
        .filter(|b| *b != alpha && relevant.is_none_or(|r| r.contains(&b.pred)))
        .filter_map(|b| {
            let ints: Option<Vec<u32>> = b.args.iter().map(|t| pos.get(t.name()).copied()).collect();
            ints.map(|i| (b.pred.clone(), i))
        })
        .collect();
    (SigmaType { pred: alpha.pred.clone(), guard, side }, distinct)
}

/// The type of a database atom: all chase atoms over its terms, normalized,
/// with the instantiation tuple (distinct terms in guard order).
pub fn type_of_atom(alpha: &Atom, d: &Instance, sigma: &[Tgd]) -> Result<(SigmaType, Vec<Name>)> {
    let gc = GuardedClosure::new(d, sigma)?;
    Ok(type_within(alpha, &gc.ground(), None))
}

/// Completion of a set of integer atoms: its ground chase.
fn complete_ints(atoms: &BTreeSet<IntAtom>, sigma: &[Tgd]) -> Result<Instance> {
    let inst: Instance = atoms
        .iter()
        .map(|(p, a)| Atom { pred: p.clone(), args: a.iter().map(|i| Term::Const(name(&i.to_string()))).collect() })
        .collect();
    Ok(GuardedClosure::new(&inst, sigma)?.ground())
}

fn int_atom_to_atom((p, args): &IntAtom) -> Atom {
    Atom { pred: p.clone(), args: args.iter().map(|i| Term::Const(name(&i.to_string()))).collect() }
}

/// Σ-types, the type generator and the expander for a guarded TGD set.
#[derive(Clone, Debug)]
pub struct Linearization {
    sigma: Vec<Tgd>,
    relevant: BTreeSet<Name>,
    prefix: String,
    types: Vec<SigmaType>,
    index: HashMap<SigmaType, usize>,
    generator: Vec<Tgd>,
    /// Types produced by the generator (as opposed to seeds only).
    generated: BTreeSet<usize>,
    processed: BTreeSet<usize>,
    cap: usize,
}

impl Linearization {
    /// An empty type system; `reserved` predicates are avoided when naming
    /// typed predicates.
    pub fn new(sigma: &[Tgd], reserved: &BTreeSet<Name>, cap: usize) -> Result<Linearization> {
        require_guarded(sigma)?;
        let relevant = sigma.iter().flat_map(|t| t.body().iter().map(|a| a.pred.clone())).collect();
        let mut prefix = String::from("tau_");
        while reserved.iter().any(|p| p.starts_with(&prefix)) {
            prefix.insert(prefix.len() - 1, '_');
        }
        Ok(Linearization {
            sigma: sigma.to_vec(),
            relevant,
            prefix,
            types: Vec::new(),
            index: HashMap::new(),
            generator: Vec::new(),
            generated: BTreeSet::new(),
            processed: BTreeSet::new(),
            cap,
        })
    }

    /// Predicates occurring in TGD bodies (the ones side atoms keep).
    pub fn relevant(&self) -> &BTreeSet<Name> {
        &self.relevant
    }

    pub fn types(&self) -> &[SigmaType] {
        &self.types
    }

    pub fn typed_pred(&self, i: usize) -> Name {
        name(&format!("{}{i}", self.prefix))
    }

    /// The type denoted by a typed predicate, if it is one.
    pub fn type_of_pred(&self, p: &str) -> Option<&SigmaType> {
        let i: usize = p.strip_prefix(&self.prefix)?.parse().ok()?;
        self.types.get(i)
    }

    fn intern(&mut self, t: SigmaType) -> Result<usize> {
        if let Some(&i) = self.index.get(&t) {
            return Ok(i);
        }
        if self.types.len() >= self.cap {
            return Err(Error::CapExceeded { what: "Σ-types".into(), cap: self.cap });
        }
        self.types.push(t.clone());
        self.index.insert(t, self.types.len() - 1);
        Ok(self.types.len() - 1)
    }

    /// Register a seed type (e.g. from D*).
    pub fn add_seed(&mut self, t: SigmaType) -> Result<usize> {
        self.intern(t)
    }

    /// Close the registered types under the generator.
    pub fn close(&mut self) -> Result<()> {
        let mut queue: VecDeque<usize> = (0..self.types.len()).filter(|i| !self.processed.contains(i)).collect();
        while let Some(ti) = queue.pop_front() {
            if !self.processed.insert(ti) {
                continue;
            }
            for si in 0..self.sigma.len() {
                if let Some((rule, children)) = self.generate(ti, si)? {
                    self.generator.push(rule);
                    for c in children {
                        self.generated.insert(c);
                        if !self.processed.contains(&c) {
                            queue.push_back(c);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The generator rule for type `ti` and TGD `si`, if the TGD fires on it.
    fn generate(&mut self, ti: usize, si: usize) -> Result<Option<(Tgd, Vec<usize>)>> {
        let sigma = self.sigma[si].clone();
        let sigma = &sigma;
        let Some(g) = classify(sigma).guard else { return Ok(None) };
        let tau = self.types[ti].clone();
        if g.pred != tau.pred || g.args.len() != tau.guard.len() {
            return Ok(None);
        }
        let mut h: BTreeMap<Name, u32> = BTreeMap::new();
        for (v, &i) in g.args.iter().zip(&tau.guard) {
            if *h.entry(v.name().clone()).or_insert(i) != i {
                return Ok(None);
            }
        }
        let atoms = tau.atoms();
        for b in sigma.body() {
            let img = (b.pred.clone(), b.args.iter().map(|v| h[v.name()]).collect());
            if !atoms.contains(&img) {
                return Ok(None);
            }
        }
        let ar = tau.arity() as u32;
        let exist: Vec<Name> = sigma.existentials().iter().cloned().collect();
        let f = |v: &Name| h.get(v).copied().unwrap_or_else(|| ar + 1 + exist.iter().position(|z| z == v).unwrap() as u32);
        let head: Vec<IntAtom> =
            sigma.head().iter().map(|a| (a.pred.clone(), a.args.iter().map(|v| f(v.name())).collect())).collect();
        let frontier: BTreeSet<u32> = sigma.frontier().iter().map(|v| h[v]).collect();
        let mut i_atoms: BTreeSet<IntAtom> = head.iter().cloned().collect();
        i_atoms.extend(atoms.into_iter().filter(|(_, a)| a.iter().all(|x| frontier.contains(x))));
        let completion = complete_ints(&i_atoms, &self.sigma)?;
        let mut children = Vec::new();
        let mut head_typed = Vec::new();
        for (ia, orig) in head.iter().zip(sigma.head()) {
            let (child, _) = type_within(&int_atom_to_atom(ia), &completion, Some(&self.relevant));
            let c = self.intern(child)?;
            children.push(c);
            head_typed.push(Atom { pred: self.typed_pred(c), args: orig.args.clone() });
        }
        let body = vec![Atom { pred: self.typed_pred(ti), args: g.args.clone() }];
        let rule = Tgd::new(body, head_typed)?;
        Ok(Some((rule, children)))
    }

    fn expander(&self, i: usize) -> Tgd {
        let t = &self.types[i];
        let args: Vec<Term> = t.guard.iter().map(|k| Term::var(&format!("x{k}"))).collect();
        Tgd::new(vec![Atom { pred: self.typed_pred(i), args: args.clone() }], vec![Atom { pred: t.pred.clone(), args }])
            .expect("expander is a valid TGD")
    }

    /// The type generator rules.
    pub fn generator(&self) -> &[Tgd] {
        &self.generator
    }

    /// Σ* = generator ∪ expanders of every type.
    pub fn sigma_star(&self) -> Vec<Tgd> {
        let mut out = self.generator.clone();
        out.extend((0..self.types.len()).map(|i| self.expander(i)));
        out
    }

    /// Generator plus the expanders of generated types only: the rules
    /// needed to explain atoms that are not database atoms.
    fn sigma_star_generated(&self) -> Vec<Tgd> {
        let mut out = self.generator.clone();
        out.extend(self.generated.iter().map(|&i| self.expander(i)));
        out
    }

    /// Replace every typed atom by the instantiation of its type.
    pub fn unfold(&self, q: &Cq) -> Cq {
        let mut atoms: BTreeSet<Atom> = BTreeSet::new();
        for a in q.atoms() {
            match self.type_of_pred(&a.pred).and_then(|t| t.instantiate_guard_tuple(&a.args)) {
                Some(inst) => atoms.extend(inst),
                None if self.type_of_pred(&a.pred).is_some() => {
                    // A typed atom whose tuple merges distinct positions can
                    // never hold; keep the (unsatisfiable) typed atom.
                    atoms.insert(a.clone());
                }
                None => {
                    atoms.insert(a.clone());
                }
            }
        }
        Cq::new(q.answer().to_vec(), atoms).expect("unfolding keeps answer variables")
    }
}

/// Linearize Σ on its own: seeds are all complete (projected) types whose
/// guard predicate occurs in Σ.
pub fn linearize(sigma: &[Tgd]) -> Result<Linearization> {
    let schema = crate::model::sigma_schema(sigma)?;
    let preds: BTreeSet<Name> = schema.preds().cloned().collect();
    let mut lin = Linearization::new(sigma, &preds, DEFAULT_TYPE_CAP)?;
    for t in complete_types(&lin, &schema)? {
        lin.add_seed(t)?;
    }
    lin.close()?;
    Ok(lin)
}

/// All types with a guard from `guards` whose (relevant) side set is closed
/// under completion.
fn complete_types(lin: &Linearization, guards: &Schema) -> Result<Vec<SigmaType>> {
    let relevant_schema: Vec<(Name, usize)> = {
        let mut s = crate::model::sigma_schema(&lin.sigma)?;
        s = s.union(guards)?;
        s.iter().filter(|(p, _)| lin.relevant.contains(*p)).map(|(p, a)| (p.clone(), a)).collect()
    };
    let mut out = BTreeSet::new();
    for (p, ar) in guards.iter() {
        for pat in patterns(ar) {
            let n = pat.iter().copied().max().unwrap_or(0);
            let guard = (p.clone(), pat.clone());
            let cands: Vec<IntAtom> = base_atoms(&relevant_schema, n).into_iter().filter(|a| *a != guard).collect();
            if cands.len() > 16 {
                return Err(Error::CapExceeded { what: "Σ-type side candidates".into(), cap: 16 });
            }
            for mask in 0u32..(1u32 << cands.len()) {
                let mut atoms: BTreeSet<IntAtom> =
                    (0..cands.len()).filter(|i| mask >> i & 1 == 1).map(|i| cands[i].clone()).collect();
                atoms.insert(guard.clone());
                let comp = complete_ints(&atoms, &lin.sigma)?;
                let (t, _) = type_within(&int_atom_to_atom(&guard), &comp, Some(&lin.relevant));
                if t.atoms() == atoms {
                    out.insert(t);
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// The typed base database: one typed atom per database atom, carrying the
/// atom's complete (projected) type. Returns D* and the closed type system.
pub fn base_db(d: &Instance, sigma: &[Tgd]) -> Result<(Instance, Linearization)> {
    base_db_reserving(d, sigma, &BTreeSet::new())
}

fn base_db_reserving(d: &Instance, sigma: &[Tgd], extra: &BTreeSet<Name>) -> Result<(Instance, Linearization)> {
    let mut reserved: BTreeSet<Name> = d.iter().map(|a| a.pred.clone()).collect();
    reserved.extend(sigma.iter().flat_map(|t| t.body().iter().chain(t.head()).map(|a| a.pred.clone())));
    reserved.extend(extra.iter().cloned());
    let mut lin = Linearization::new(sigma, &reserved, DEFAULT_TYPE_CAP)?;
    let ground = GuardedClosure::new(d, sigma)?.ground();
    let mut d_star = Instance::new();
    for alpha in d.iter() {
        let (t, _) = type_within(alpha, &ground, Some(&lin.relevant));
        let i = lin.add_seed(t)?;
        d_star.insert(Atom { pred: lin.typed_pred(i), args: alpha.args.clone() });
    }
    lin.close()?;
    Ok((d_star, lin))
}

/// Apply the empty-body TGDs once (they have no guard to hang types on).
fn preapply_empty_bodies(d: &Instance, sigma: &[Tgd]) -> Instance {
    let empties: Vec<Tgd> = sigma.iter().filter(|t| t.body().is_empty()).cloned().collect();
    if empties.is_empty() {
        return d.clone();
    }
    chase(d, &empties, ChaseBudget::Levels(1)).instance.without_levels()
}

/// Budgets for the fixed-parameter pipeline.
#[derive(Clone, Copy, Debug)]
pub struct FptOptions {
    pub atom_cap: usize,
    pub rewrite_cap: usize,
    /// Override for the chase level bound.
    pub level_bound: Option<usize>,
}

impl Default for FptOptions {
    fn default() -> Self {
        FptOptions { atom_cap: 200_000, rewrite_cap: DEFAULT_REWRITE_CAP, level_bound: None }
    }
}

/// How the answers were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FptMethod {
    /// Level-bounded chase of D* under Σ*.
    Chase,
    /// The chase hit its atom cap; the unfolded rewriting was evaluated on
    /// the ground chase instead.
    RewritingFallback,
}

#[derive(Clone, Debug)]
pub struct FptOutcome {
    pub answers: BTreeSet<Tuple>,
    pub level_bound: usize,
    pub method: FptMethod,
    pub d_star: Instance,
    pub sigma_star_len: usize,
    pub type_count: usize,
}

/// Certain answers of a guarded OMQ through the linearization: build D* and
/// Σ*, chase D* level-wise up to a bound, and evaluate the query.
///
/// The level bound is `L0 + j`, where `L0` is the first level at which the
/// chase of D* contains the whole ground chase of D, and `j` is the depth of
/// the (saturated) rewriting of the query under the generator and the
/// expanders of generated types.
pub fn fpt_answers(omq: &Omq, d: &Instance, opts: FptOptions) -> Result<FptOutcome> {
    require_guarded(&omq.sigma)?;
    let q = &omq.query;
    let d1 = preapply_empty_bodies(d, &omq.sigma);
    let qpreds: BTreeSet<Name> = q.disjuncts().iter().flat_map(|c| c.atoms().iter().map(|a| a.pred.clone())).collect();
    let (d_star, lin) = base_db_reserving(&d1, &omq.sigma, &qpreds)?;
    let sigma_star = lin.sigma_star();
    let ground = GuardedClosure::new(&d1, &omq.sigma)?.ground();
    let adom = d.adom();
    let restrict = |ans: BTreeSet<Tuple>| -> BTreeSet<Tuple> {
        ans.into_iter().filter(|t| t.iter().all(|c| adom.contains(c))).collect()
    };
    let rw = rewrite(&lin.sigma_star_generated(), q, opts.rewrite_cap);
    let level_bound = match opts.level_bound {
        Some(l) => l,
        None => {
            let l0 = ground_level(&d_star, &sigma_star, &ground, opts.atom_cap);
            match (&rw, l0) {
                (Ok(r), Some(l0)) => l0 + r.max_depth(),
                // Heuristic fallback: number of types times the query size.
                _ => lin.types().len() * q.disjuncts().iter().map(|c| c.len()).max().unwrap_or(1).max(1),
            }
        }
    };
    let run = chase(&d_star, &sigma_star, ChaseBudget::LevelsWithCap(level_bound, opts.atom_cap));
    let cap_hit = !run.terminated && run.max_level() < level_bound;
    let (answers, method) = if !cap_hit {
        (restrict(eval(q, &run.instance)), FptMethod::Chase)
    } else {
        let r = rw.map_err(|_| {
            Error::BudgetExceeded("chase atom cap hit and the rewriting did not saturate".into())
        })?;
        let unfolded = Ucq::new(q.arity(), r.ucq.disjuncts().iter().map(|c| lin.unfold(c)).collect())?;
        (restrict(eval(&unfolded, &ground)), FptMethod::RewritingFallback)
    };
    Ok(FptOutcome {
        answers,
        level_bound,
        method,
        sigma_star_len: sigma_star.len(),
        type_count: lin.types().len(),
        d_star,
    })
}

/// First chase level at which all ground-chase atoms are present.
fn ground_level(d_star: &Instance, sigma_star: &[Tgd], ground: &Instance, cap: usize) -> Option<usize> {
    for l in 0..=64 {
        let run = chase(d_star, sigma_star, ChaseBudget::LevelsWithCap(l, cap));
        if ground.iter().all(|a| run.instance.contains(a)) {
            return Some(l);
        }
        if run.terminated || run.max_level() < l {
            return None;
        }
    }
    None
}

/// Is `tuple` a certain answer of the guarded OMQ on `d`?
pub fn fpt_eval_omq(omq: &Omq, d: &Instance, tuple: &[Name]) -> Result<bool> {
    if tuple.len() != omq.query.arity() {
        return Err(Error::ArityMismatch { expected: omq.query.arity(), got: tuple.len() });
    }
    Ok(fpt_answers(omq, d, FptOptions::default())?.answers.contains(tuple))
}

/// Rules `guard ∧ S → β` deriving, for every guard shape, each relevant atom
/// over the guard's terms from a minimal relevant side set entailing it.
/// Their chase on any database is the relevant part of the ground chase.
fn ground_completion_rules(sigma: &[Tgd], guards: &Schema, relevant: &BTreeSet<Name>) -> Result<Vec<Tgd>> {
    let rel_schema: Vec<(Name, usize)> = {
        let s = crate::model::sigma_schema(sigma)?.union(guards)?;
        s.iter().filter(|(p, _)| relevant.contains(*p)).map(|(p, a)| (p.clone(), a)).collect()
    };
    let var = |i: &u32| Term::var(&format!("x{i}"));
    let to_atom = |(p, a): &IntAtom| Atom { pred: p.clone(), args: a.iter().map(var).collect() };
    let mut rules = BTreeSet::new();
    for (p, ar) in guards.iter() {
        for pat in patterns(ar) {
            let n = pat.iter().copied().max().unwrap_or(0);
            let guard: IntAtom = (p.clone(), pat.clone());
            let cands: Vec<IntAtom> = base_atoms(&rel_schema, n).into_iter().filter(|a| *a != guard).collect();
            for (bi, beta) in cands.iter().enumerate() {
                let others: Vec<&IntAtom> = cands.iter().enumerate().filter(|(i, _)| *i != bi).map(|(_, a)| a).collect();
                let mut err = None;
                let minimal = minimal_true_sets(others.len(), 10_000, |s| {
                    let mut atoms: BTreeSet<IntAtom> = s.iter().map(|&i| others[i].clone()).collect();
                    atoms.insert(guard.clone());
                    match complete_ints(&atoms, sigma) {
                        Ok(c) => c.contains(&int_atom_to_atom(beta)),
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
                    let mut body = vec![to_atom(&guard)];
                    body.extend(s.iter().map(|&i| to_atom(others[i])));
                    rules.insert(Tgd::new(body, vec![to_atom(beta)])?);
                }
            }
        }
    }
    Ok(rules.into_iter().collect())
}

/// An equivalent OMQ whose ontology is guarded and full.
///
/// The query is rewritten backward through the type generator (and the
/// expanders of generated types), typed atoms are unfolded into their type
/// instantiations, and the ontology becomes a set of guarded full rules
/// that compute the relevant part of the ground chase.
pub fn eliminate_existentials(omq: &Omq) -> Result<Omq> {
    require_guarded(&omq.sigma)?;
    if omq.sigma.iter().any(|t| t.body().is_empty() && !t.is_full()) {
        return Err(Error::Invalid("existential elimination does not support empty-body TGDs with existentials".into()));
    }
    let mut reserved: BTreeSet<Name> = omq.data_schema.preds().cloned().collect();
    reserved.extend(omq.schema()?.preds().cloned());
    let mut lin = Linearization::new(&omq.sigma, &reserved, DEFAULT_TYPE_CAP)?;
    for t in complete_types(&lin, &omq.data_schema)? {
        lin.add_seed(t)?;
    }
    lin.close()?;
    let rw = rewrite(&lin.sigma_star_generated(), &omq.query, DEFAULT_REWRITE_CAP)?;
    let unfolded: Vec<Cq> = rw
        .ucq
        .disjuncts()
        .iter()
        .map(|c| lin.unfold(c))
        .filter(|c| c.atoms().iter().all(|a| lin.type_of_pred(&a.pred).is_none()))
        .map(|c| core(&c))
        .collect();
    let query = Ucq::new(omq.query.arity(), prune_subsumed(unfolded))?;
    let mut guard_schema = omq.data_schema.clone();
    for (p, a) in crate::model::sigma_schema(&omq.sigma)?.iter() {
        if lin.relevant().contains(p) {
            guard_schema.declare(p, a)?;
        }
    }
    let mut sigma = ground_completion_rules(&omq.sigma, &guard_schema, lin.relevant())?;
    sigma.extend(omq.sigma.iter().filter(|t| t.body().is_empty()).cloned());
    Ok(Omq::new(omq.data_schema.clone(), sigma, query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::classify_set;
    use crate::guarded::certain_answers;

    #[test]
    fn type_counts() {
        let s = Schema::from_pairs([("R", 1)]).unwrap();
        assert_eq!(enumerate_types(&s, 100).unwrap().len(), 1);
        let s = Schema::from_pairs([("R", 2), ("S", 1)]).unwrap();
        assert_eq!(enumerate_types(&s, 1000).unwrap().len(), 32 + 2 + 2);
        assert!(enumerate_types(&Schema::new(), 10).unwrap().is_empty());
    }

    #[test]
    fn type_of_atom_examples() {
        let d = Instance::from_facts(&[("R", &["a", "b"])]);
        let sigma = vec![Tgd::build(&[("R", &["x", "y"])], &[("S", &["y"])])];
        let (t, inst) = type_of_atom(&Atom::fact("R", &["a", "b"]), &d, &sigma).unwrap();
        assert_eq!(t.to_string(), "[R(1,2),{S(2)}]");
        assert_eq!(inst, vec![name("a"), name("b")]);
        let (t, _) = type_of_atom(&Atom::fact("R", &["a", "b"]), &d, &[]).unwrap();
        assert!(t.side.is_empty());
    }

    #[test]
    fn worked_type_round_trips() {
        let t = SigmaType {
            pred: name("R"),
            guard: vec![1, 2],
            side: [(name("S"), vec![2, 1]), (name("T"), vec![1]), (name("T"), vec![2])].into_iter().collect(),
        };
        let atoms = t.instantiate(&[Term::constant("a"), Term::constant("b")]);
        let inst: Instance = atoms.into_iter().collect();
        let (back, _) = type_within(&Atom::fact("R", &["a", "b"]), &inst, None);
        assert_eq!(back, t);
        assert_eq!(t.to_string(), "[R(1,2),{S(2,1),T(1),T(2)}]");
    }

    #[test]
    fn linearization_is_linear() {
        let sigma = vec![
            Tgd::build(&[("A", &["x"])], &[("R", &["x", "y"]), ("A", &["y"])]),
            Tgd::build(&[("R", &["x", "y"]), ("A", &["y"])], &[("B", &["x"])]),
        ];
        let lin = linearize(&sigma).unwrap();
        assert!(classify_set(&lin.sigma_star()).linear);
        assert!(!lin.generator().is_empty());
    }

    fn example_q1() -> Omq {
        let schema = Schema::from_pairs([("R1", 1), ("R2", 1), ("R3", 1), ("R4", 1), ("P", 2)]).unwrap();
        let sigma = vec![Tgd::build(&[("R2", &["x"])], &[("R4", &["x"])])];
        let q = Cq::build(
            &[],
            &[
                ("P", &["x2", "x1"]),
                ("P", &["x4", "x1"]),
                ("P", &["x2", "x3"]),
                ("P", &["x4", "x3"]),
                ("R1", &["x1"]),
                ("R2", &["x2"]),
                ("R3", &["x3"]),
                ("R4", &["x4"]),
            ],
        );
        Omq::new(schema, sigma, Ucq::single(q))
    }

    #[test]
    fn fpt_examples() {
        let q1 = example_q1();
        let d1 = Instance::from_facts(&[("R1", &["a"]), ("R2", &["b"]), ("R3", &["c"]), ("P", &["b", "a"]), ("P", &["b", "c"])]);
        assert!(fpt_eval_omq(&q1, &d1, &[]).unwrap());
        let d2 = Instance::from_facts(&[("R1", &["a"]), ("R3", &["c"]), ("P", &["b", "a"]), ("P", &["b", "c"])]);
        assert!(!fpt_eval_omq(&q1, &d2, &[]).unwrap());
        let plain = Omq::new(q1.data_schema.clone(), vec![], q1.query.clone());
        assert_eq!(fpt_eval_omq(&plain, &d1, &[]).unwrap(), !eval(&plain.query, &d1).is_empty());
    }

    #[test]
    fn fpt_with_existentials_matches_closure() {
        let sigma = vec![
            Tgd::build(&[("A", &["x"])], &[("R", &["x", "y"]), ("A", &["y"])]),
            Tgd::build(&[("R", &["x", "y"]), ("A", &["y"])], &[("B", &["x"])]),
        ];
        let schema = Schema::from_pairs([("A", 1), ("R", 2), ("B", 1)]).unwrap();
        let q = Ucq::single(Cq::build(&["x"], &[("R", &["x", "y"]), ("R", &["y", "z"]), ("B", &["z"])]));
        let omq = Omq::new(schema, sigma.clone(), q.clone());
        let d = Instance::from_facts(&[("A", &["a"]), ("R", &["c", "a"])]);
        let out = fpt_answers(&omq, &d, FptOptions::default()).unwrap();
        assert_eq!(out.answers, certain_answers(&d, &sigma, &q).unwrap());
        assert!(out.answers.contains(&vec![name("a")]));
    }

    #[test]
    fn eliminate_existentials_example() {
        let schema = Schema::from_pairs([("A", 1), ("R", 2)]).unwrap();
        let sigma = vec![Tgd::build(&[("A", &["x"])], &[("R", &["x", "y"])])];
        let q = Ucq::single(Cq::build(&[], &[("R", &["x", "y"])]));
        let omq = Omq::new(schema, sigma, q);
        let out = eliminate_existentials(&omq).unwrap();
        assert!(out.sigma.iter().all(|t| t.is_full()));
        let expect = Ucq::from_cqs(vec![Cq::build(&[], &[("R", &["x", "y"])]), Cq::build(&[], &[("A", &["x"])])]).unwrap();
        assert!(crate::hom::ucq_contained(&out.query, &expect) && crate::hom::ucq_contained(&expect, &out.query));
    }
}
