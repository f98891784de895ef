//! The oblivious, level-wise chase with budgets, the terminating chase for
//! full TGDs, level-bound certificates, and model checking.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::engine::{self, Interner, Pat, Slot, Store, Sym};
use crate::error::{Error, Result};
use crate::hom::{HomMode, Homomorphism, IndexedInstance};
use crate::model::{name, sigma_schema, Atom, Instance, Name, Schema, Term, Tgd, NULL_PREFIX};

/// How far a chase run may go.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChaseBudget {
    /// Produce atoms up to this level.
    Levels(usize),
    /// Stop before the instance would exceed this many atoms.
    AtomCap(usize),
    /// Run to the fixpoint, with an atom cap as a safety net.
    FixpointWithCap(usize),
    /// Produce atoms up to a level, stopping early at an atom cap.
    LevelsWithCap(usize, usize),
}

impl ChaseBudget {
    /// Unbounded fixpoint (only for inputs known to terminate).
    pub fn fixpoint() -> ChaseBudget {
        ChaseBudget::FixpointWithCap(usize::MAX)
    }
}

/// Outcome of a chase run. The instance carries level annotations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChaseResult {
    pub instance: Instance,
    pub terminated: bool,
    pub budget_exhausted: bool,
    /// Number of triggers fired.
    pub steps: usize,
}

impl ChaseResult {
    /// Highest level present.
    pub fn max_level(&self) -> usize {
        self.instance.levels().and_then(|l| l.values().max().copied()).unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug)]
enum HeadSlot {
    Body(usize),
    Exist(usize),
}

struct CompiledTgd {
    body: Vec<Pat>,
    nvars: usize,
    head: Vec<(Sym, Vec<HeadSlot>)>,
    nexist: usize,
}

/// Incremental chase state over interned symbols.
pub(crate) struct Chaser {
    pub(crate) interner: Interner,
    pub(crate) store: Store,
    /// Atoms in insertion order with their level.
    pub(crate) atoms: Vec<(Sym, Vec<Sym>, usize)>,
    tgds: Vec<CompiledTgd>,
    fired: HashSet<(usize, Vec<Sym>)>,
    next_null: usize,
}

impl Chaser {
    pub(crate) fn new(d: &Instance, sigma: &[Tgd]) -> Chaser {
        let mut interner = Interner::default();
        let mut store = Store::new();
        let mut atoms = Vec::new();
        for a in d.iter() {
            let p = interner.intern(&a.pred);
            let row: Vec<Sym> = a.args.iter().map(|t| interner.intern(t.name())).collect();
            if store.insert(p, row.clone()) {
                atoms.push((p, row, 0));
            }
        }
        let tgds = sigma.iter().map(|t| compile_tgd(t, &mut interner)).collect();
        Chaser { interner, store, atoms, tgds, fired: HashSet::new(), next_null: 0 }
    }

    fn fresh_null(&mut self) -> Sym {
        loop {
            self.next_null += 1;
            let n = format!("{NULL_PREFIX}{}", self.next_null);
            if self.interner.get(&n).is_none() {
                return self.interner.intern(&name(&n));
            }
        }
    }

    /// Unfired triggers whose body uses an atom from `delta` (or, when
    /// `initial`, empty-body TGDs), sorted by TGD index then image names.
    fn triggers(&self, delta: std::ops::Range<usize>, initial: bool) -> Vec<(usize, Vec<Sym>)> {
        let mut found: HashSet<(usize, Vec<Sym>)> = HashSet::new();
        for (ti, t) in self.tgds.iter().enumerate() {
            if t.body.is_empty() {
                if initial && !self.fired.contains(&(ti, Vec::new())) {
                    found.insert((ti, Vec::new()));
                }
                continue;
            }
            for pat in &t.body {
                for (p, row, _) in &self.atoms[delta.clone()] {
                    if *p != pat.pred || row.len() != pat.args.len() {
                        continue;
                    }
                    let mut init = vec![None; t.nvars];
                    let ok = pat.args.iter().zip(row).all(|(s, &c)| match *s {
                        Slot::Var(v) => match init[v] {
                            Some(x) => x == c,
                            None => {
                                init[v] = Some(c);
                                true
                            }
                        },
                        Slot::Fixed(x) => x == c,
                    });
                    if !ok {
                        continue;
                    }
                    engine::search(&t.body, &init, &self.store, &[], |a| {
                        let key = (ti, a.to_vec());
                        if !self.fired.contains(&key) {
                            found.insert(key);
                        }
                        true
                    });
                }
            }
        }
        let mut out: Vec<(usize, Vec<Sym>)> = found.into_iter().collect();
        out.sort_by(|a, b| {
            a.0.cmp(&b.0).then_with(|| {
                let na = a.1.iter().map(|s| self.interner.name(*s));
                let nb = b.1.iter().map(|s| self.interner.name(*s));
                na.cmp(nb)
            })
        });
        out
    }

    /// Head atoms a trigger would add that are not yet present (nulls not
    /// yet allocated count as new).
    fn new_atom_count(&self, ti: usize, image: &[Sym]) -> usize {
        let t = &self.tgds[ti];
        if t.nexist > 0 {
            return t.head.len();
        }
        t.head
            .iter()
            .filter(|(p, args)| {
                let row: Vec<Sym> = args
                    .iter()
                    .map(|s| match s {
                        HeadSlot::Body(v) => image[*v],
                        HeadSlot::Exist(_) => unreachable!(),
                    })
                    .collect();
                !self.store.contains(*p, &row)
            })
            .count()
    }

    fn fire(&mut self, ti: usize, image: Vec<Sym>, level: usize) {
        let nexist = self.tgds[ti].nexist;
        let nulls: Vec<Sym> = (0..nexist).map(|_| self.fresh_null()).collect();
        let head = self.tgds[ti].head.clone();
        for (p, args) in head {
            let row: Vec<Sym> = args
                .iter()
                .map(|s| match s {
                    HeadSlot::Body(v) => image[*v],
                    HeadSlot::Exist(z) => nulls[*z],
                })
                .collect();
            if self.store.insert(p, row.clone()) {
                self.atoms.push((p, row, level));
            }
        }
        self.fired.insert((ti, image));
    }

    /// Run the level-wise chase until the budget or the fixpoint.
    pub(crate) fn run(&mut self, budget: ChaseBudget) -> (bool, bool, usize) {
        let mut steps = 0;
        let mut level = 0;
        let mut delta = 0..self.atoms.len();
        let mut initial = true;
        loop {
            let triggers = self.triggers(delta.clone(), initial);
            initial = false;
            if triggers.is_empty() {
                return (true, false, steps);
            }
            if let ChaseBudget::Levels(l) | ChaseBudget::LevelsWithCap(l, _) = budget {
                if level >= l {
                    return (false, true, steps);
                }
            }
            let start = self.atoms.len();
            for (ti, image) in triggers {
                if let ChaseBudget::AtomCap(cap) | ChaseBudget::FixpointWithCap(cap) | ChaseBudget::LevelsWithCap(_, cap) =
                    budget
                {
                    if self.atoms.len().saturating_add(self.new_atom_count(ti, &image)) > cap {
                        return (false, true, steps);
                    }
                }
                self.fire(ti, image, level + 1);
                steps += 1;
            }
            delta = start..self.atoms.len();
            level += 1;
        }
    }

    pub(crate) fn to_atom(&self, p: Sym, row: &[Sym]) -> Atom {
        Atom {
            pred: self.interner.name(p).clone(),
            args: row.iter().map(|s| Term::Const(self.interner.name(*s).clone())).collect(),
        }
    }

    pub(crate) fn instance(&self) -> Instance {
        let mut out = Instance::new().with_zero_levels();
        for (p, row, l) in &self.atoms {
            out.insert_at(self.to_atom(*p, row), *l);
        }
        out
    }
}

fn compile_tgd(t: &Tgd, interner: &mut Interner) -> CompiledTgd {
    let vars: Vec<Name> = t.body_vars().into_iter().collect();
    let exist: Vec<Name> = t.existentials().iter().cloned().collect();
    let body = t
        .body()
        .iter()
        .map(|a| Pat {
            pred: interner.intern(&a.pred),
            args: a.args.iter().map(|x| Slot::Var(vars.iter().position(|v| v == x.name()).unwrap())).collect(),
        })
        .collect();
    let head = t
        .head()
        .iter()
        .map(|a| {
            let args = a
                .args
                .iter()
                .map(|x| match vars.iter().position(|v| v == x.name()) {
                    Some(i) => HeadSlot::Body(i),
                    None => HeadSlot::Exist(exist.iter().position(|z| z == x.name()).expect("declared existential")),
                })
                .collect();
            (interner.intern(&a.pred), args)
        })
        .collect();
    CompiledTgd { body, nvars: vars.len(), head, nexist: exist.len() }
}

/// Level-wise oblivious chase. Triggers are fired at most once per
/// (TGD, body image), in order of level, TGD index and image; nulls are
/// `_n1, _n2, ...`, skipping names already used by the input.
pub fn chase(d: &Instance, sigma: &[Tgd], budget: ChaseBudget) -> ChaseResult {
    let mut c = Chaser::new(d, sigma);
    let (terminated, budget_exhausted, steps) = c.run(budget);
    ChaseResult { instance: c.instance(), terminated, budget_exhausted, steps }
}

/// Apply one TGD with the given trigger (a map from body variables to
/// constants of `i`), inventing fresh nulls for the existential variables.
pub fn chase_step(i: &Instance, sigma: &Tgd, trigger: &Homomorphism) -> Result<Instance> {
    let ix = IndexedInstance::new(i);
    let body_ok = sigma.body_vars().iter().all(|v| trigger.get(&Term::Var(v.clone())).is_some_and(Term::is_const))
        && sigma.body().iter().all(|a| {
            let img = a.map_terms(|t| trigger.get(t).cloned().unwrap_or_else(|| t.clone()));
            img.is_ground() && ix.contains(&img)
        });
    if !body_ok {
        return Err(Error::TriggerNotHomomorphism);
    }
    let used = i.adom();
    let mut counter = 0;
    let mut h = trigger.clone();
    for z in sigma.existentials() {
        let n = loop {
            counter += 1;
            let n = name(&format!("{NULL_PREFIX}{counter}"));
            if !used.contains(&n) {
                break n;
            }
        };
        h.insert(Term::Var(z.clone()), Term::Const(n));
    }
    let mut out = i.clone();
    for a in sigma.head() {
        out.insert(a.map_terms(|t| h[t].clone()));
    }
    Ok(out)
}

/// The schema `T` of an input database together with Σ.
pub fn joint_schema(d: &Instance, sigma: &[Tgd]) -> Result<Schema> {
    d.schema()?.union(&sigma_schema(sigma)?)
}

/// `|D|·|T|·ar(T)^ar(T)`: the size bound for chasing with guarded full TGDs.
pub fn full_chase_bound(d: &Instance, sigma: &[Tgd]) -> Result<u128> {
    let t = joint_schema(d, sigma)?;
    let ar = t.max_arity() as u32;
    Ok((d.len() as u128).saturating_mul(t.len() as u128).saturating_mul((ar as u128).saturating_pow(ar)))
}

/// Terminating chase for full TGDs.
pub fn chase_full(d: &Instance, sigma: &[Tgd]) -> Result<Instance> {
    if let Some(t) = sigma.iter().find(|t| !t.is_full()) {
        return Err(Error::NotFull(t.to_string()));
    }
    let r = chase(d, sigma, ChaseBudget::fixpoint());
    debug_assert!(r.terminated);
    if sigma.iter().all(|t| !t.body().is_empty() && crate::classify::classify(t).guarded) {
        debug_assert!(r.instance.len() as u128 <= full_chase_bound(d, sigma)?);
    }
    Ok(r.instance)
}

/// `|D|·(|Σ|·H_Σ+1)^i` evaluated without overflow.
pub fn linear_level_bound(d_size: usize, sigma: &[Tgd], level: usize) -> u128 {
    let h = sigma.iter().map(|t| t.head().len()).max().unwrap_or(0) as u128;
    let base = (sigma.len() as u128).saturating_mul(h).saturating_add(1);
    (d_size as u128).saturating_mul(base.saturating_pow(level.min(u32::MAX as usize) as u32))
}

/// Does every level-i prefix of a linear chase run obey the linear bound?
pub fn check_level_bound(run: &ChaseResult, sigma: &[Tgd]) -> Result<bool> {
    if let Some(t) = sigma.iter().find(|t| t.body().len() != 1) {
        return Err(Error::NotLinear(t.to_string()));
    }
    let Some(levels) = run.instance.levels() else {
        return Err(Error::PreconditionViolated("run has no level annotations".into()));
    };
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for l in levels.values() {
        *counts.entry(*l).or_default() += 1;
    }
    let d_size = counts.get(&0).copied().unwrap_or(0);
    let max = counts.keys().max().copied().unwrap_or(0);
    let mut prefix = 0usize;
    for i in 0..=max {
        prefix += counts.get(&i).copied().unwrap_or(0);
        if prefix as u128 > linear_level_bound(d_size, sigma, i) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Does `i` satisfy every TGD (each body match extends to a head match)?
pub fn satisfies(i: &Instance, sigma: &[Tgd]) -> bool {
    violated_trigger(i, sigma).is_none()
}

/// A TGD index and body match whose head is not satisfied, if any.
pub fn violated_trigger(i: &Instance, sigma: &[Tgd]) -> Option<(usize, Homomorphism)> {
    let ix = IndexedInstance::new(i);
    for (ti, t) in sigma.iter().enumerate() {
        let triggers = if t.body().is_empty() {
            vec![Homomorphism::new()]
        } else {
            ix.homs(t.body(), &Homomorphism::new(), HomMode::All).homs
        };
        for h in triggers {
            let fixed: Homomorphism = h.iter().filter(|(v, _)| t.frontier().contains(v.name())).map(|(a, b)| (a.clone(), b.clone())).collect();
            if !ix.has_hom(t.head(), &fixed) {
                return Some((ti, h));
            }
        }
    }
    None
}

/// Atoms of an instance whose terms all come from `keep`.
pub fn ground_part(i: &Instance, keep: &BTreeSet<Name>) -> Instance {
    i.restrict(keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1() -> Instance {
        Instance::from_facts(&[("R1", &["a"]), ("R2", &["b"]), ("R3", &["c"]), ("P", &["b", "a"]), ("P", &["b", "c"])])
    }

    #[test]
    fn single_steps() {
        let r24 = Tgd::build(&[("R2", &["x"])], &[("R4", &["x"])]);
        let mut h = Homomorphism::new();
        h.insert(Term::var("x"), Term::constant("b"));
        let out = chase_step(&Instance::from_facts(&[("R2", &["b"])]), &r24, &h).unwrap();
        assert_eq!(out, Instance::from_facts(&[("R2", &["b"]), ("R4", &["b"])]));
        let e = Tgd::build(&[("E", &["x", "y"])], &[("E", &["y", "z"])]);
        let mut h = Homomorphism::new();
        h.insert(Term::var("x"), Term::constant("a"));
        h.insert(Term::var("y"), Term::constant("b"));
        let out = chase_step(&Instance::from_facts(&[("E", &["a", "b"])]), &e, &h).unwrap();
        assert!(out.contains(&Atom::fact("E", &["b", "_n1"])));
        let start = Tgd::build(&[], &[("Start", &["z"])]);
        let out = chase_step(&Instance::new(), &start, &Homomorphism::new()).unwrap();
        assert_eq!(out, Instance::from_facts(&[("Start", &["_n1"])]));
        h.insert(Term::var("y"), Term::constant("c"));
        assert_eq!(chase_step(&Instance::from_facts(&[("E", &["a", "b"])]), &e, &h), Err(Error::TriggerNotHomomorphism));
    }

    #[test]
    fn chase_runs() {
        let r = chase(&d1(), &[], ChaseBudget::fixpoint());
        assert!(r.terminated);
        assert_eq!(r.instance.without_levels(), d1());
        let e = Tgd::build(&[("E", &["x", "y"])], &[("E", &["y", "z"])]);
        let r = chase(&Instance::from_facts(&[("E", &["a", "b"])]), &[e], ChaseBudget::Levels(2));
        assert!(!r.terminated && r.budget_exhausted);
        assert_eq!(
            r.instance.without_levels(),
            Instance::from_facts(&[("E", &["a", "b"]), ("E", &["b", "_n1"]), ("E", &["_n1", "_n2"])])
        );
        assert_eq!(r.instance.level(&Atom::fact("E", &["_n1", "_n2"])), Some(2));
        let r24 = Tgd::build(&[("R2", &["x"])], &[("R4", &["x"])]);
        let r = chase(&d1(), &[r24], ChaseBudget::fixpoint());
        assert!(r.terminated);
        let mut expect = d1();
        expect.insert(Atom::fact("R4", &["b"]));
        assert_eq!(r.instance.without_levels(), expect);
    }

    #[test]
    fn null_names_avoid_input() {
        let e = Tgd::build(&[("A", &["x"])], &[("R", &["x", "z"])]);
        let r = chase(&Instance::from_facts(&[("A", &["_n1"])]), &[e], ChaseBudget::fixpoint());
        assert!(r.instance.contains(&Atom::fact("R", &["_n1", "_n2"])));
    }

    #[test]
    fn full_chase_and_bounds() {
        let tc = Tgd::build(&[("E", &["x", "y"]), ("E", &["y", "z"])], &[("E", &["x", "z"])]);
        let out = chase_full(&Instance::from_facts(&[("E", &["a", "b"]), ("E", &["b", "c"])]), &[tc]).unwrap();
        assert!(out.contains(&Atom::fact("E", &["a", "c"])));
        let e = Tgd::build(&[("E", &["x", "y"])], &[("E", &["y", "z"])]);
        assert!(chase_full(&Instance::new(), std::slice::from_ref(&e)).is_err());
        let r = chase(&Instance::from_facts(&[("E", &["a", "b"])]), std::slice::from_ref(&e), ChaseBudget::Levels(5));
        assert!(check_level_bound(&r, std::slice::from_ref(&e)).unwrap());
        let mut corrupted = r.clone();
        let mut levels = corrupted.instance.levels().unwrap().clone();
        for l in levels.values_mut() {
            *l = 0;
        }
        levels.insert(Atom::fact("E", &["a", "b"]), 0);
        // Claim that only one atom is in the database but all others sit at level 1.
        for (i, l) in levels.values_mut().enumerate() {
            *l = if i == 0 { 0 } else { 1 };
        }
        corrupted.instance.set_levels(Some(levels));
        assert!(!check_level_bound(&corrupted, &[e]).unwrap());
    }

    #[test]
    fn atom_cap_stops() {
        let e = Tgd::build(&[("E", &["x", "y"])], &[("E", &["y", "z"])]);
        let r = chase(&Instance::from_facts(&[("E", &["a", "b"])]), &[e], ChaseBudget::AtomCap(4));
        assert_eq!(r.instance.len(), 4);
        assert!(r.budget_exhausted && !r.terminated);
    }

    #[test]
    fn model_check() {
        let e = Tgd::build(&[("E", &["x", "y"])], &[("E", &["y", "z"])]);
        assert!(satisfies(&Instance::from_facts(&[("E", &["a", "a"])]), std::slice::from_ref(&e)));
        assert!(!satisfies(&Instance::from_facts(&[("E", &["a", "b"])]), &[e]));
    }
}
