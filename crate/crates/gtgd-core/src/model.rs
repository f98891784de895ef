//! Immutable domain types: terms, atoms, schemas, instances, TGDs and queries.
//!
//! Everything here is plain data with value semantics. Sets of atoms are kept
//! deduplicated in sorted order, so iteration is deterministic and two values
//! built from the same atoms compare equal regardless of construction order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Shared, cheaply clonable identifier.
pub type Name = Arc<str>;

/// A tuple of constants, e.g. an answer to a query.
pub type Tuple = Vec<Name>;

/// Build a [`Name`] from a string slice.
pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// Reserved prefix of nulls invented by the chase.
pub const NULL_PREFIX: &str = "_n";

/// Returns true when `s` is a syntactically valid identifier
/// (`[A-Za-z_][A-Za-z0-9_]*`).
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A constant or a variable.
///
/// The derived order puts every constant before every variable and compares
/// names lexicographically within a kind; downstream enumeration relies on it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Name),
    Var(Name),
}

impl Term {
    pub fn constant(s: &str) -> Term {
        Term::Const(name(s))
    }

    pub fn var(s: &str) -> Term {
        Term::Var(name(s))
    }

    pub fn name(&self) -> &Name {
        match self {
            Term::Const(n) | Term::Var(n) => n,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A predicate applied to a sequence of terms. Argument order is semantic.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: Name,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Atom {
        Atom { pred: name(pred), args }
    }

    /// Atom whose arguments are all constants with the given names.
    pub fn fact(pred: &str, args: &[&str]) -> Atom {
        Atom::new(pred, args.iter().map(|a| Term::constant(a)).collect())
    }

    /// Atom whose arguments are all variables with the given names.
    pub fn pattern(pred: &str, args: &[&str]) -> Atom {
        Atom::new(pred, args.iter().map(|a| Term::var(a)).collect())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_const)
    }

    /// Names of the variables occurring in the atom, in first-occurrence order.
    pub fn vars(&self) -> Vec<Name> {
        let mut out: Vec<Name> = Vec::new();
        for t in &self.args {
            if let Term::Var(v) = t {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    /// Distinct argument names (constants and variables alike).
    pub fn term_names(&self) -> BTreeSet<Name> {
        self.args.iter().map(|t| t.name().clone()).collect()
    }

    /// Apply a renaming of term names; unmapped terms are kept.
    pub fn map_terms(&self, f: impl Fn(&Term) -> Term) -> Atom {
        Atom { pred: self.pred.clone(), args: self.args.iter().map(f).collect() }
    }

    /// Turn every variable into the constant of the same name.
    pub fn freeze(&self) -> Atom {
        self.map_terms(|t| Term::Const(t.name().clone()))
    }

    /// Turn every constant into the variable of the same name.
    pub fn thaw(&self) -> Atom {
        self.map_terms(|t| Term::Var(t.name().clone()))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

/// Finite mapping from predicate names to arities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Schema {
    arities: BTreeMap<Name, usize>,
}

impl Schema {
    pub fn new() -> Schema {
        Schema::default()
    }

    /// Build a schema from `(name, arity)` pairs; conflicting arities are an error.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, usize)>) -> Result<Schema> {
        let mut s = Schema::new();
        for (p, a) in pairs {
            s.declare(&name(p), a)?;
        }
        Ok(s)
    }

    /// Schema of all predicates used by the given atoms.
    pub fn from_atoms<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Result<Schema> {
        let mut s = Schema::new();
        for a in atoms {
            s.declare(&a.pred, a.arity())?;
        }
        Ok(s)
    }

    /// Record `pred/arity`; fails if the predicate is already known with another arity.
    pub fn declare(&mut self, pred: &Name, arity: usize) -> Result<()> {
        match self.arities.get(pred) {
            Some(&a) if a != arity => Err(Error::ArityConflict {
                pred: pred.to_string(),
                first: a,
                second: arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.arities.insert(pred.clone(), arity);
                Ok(())
            }
        }
    }

    pub fn arity(&self, pred: &str) -> Option<usize> {
        self.arities.get(pred).copied()
    }

    pub fn contains(&self, pred: &str) -> bool {
        self.arities.contains_key(pred)
    }

    /// ar(S): the maximum arity, 0 for the empty schema.
    pub fn max_arity(&self) -> usize {
        self.arities.values().copied().max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.arities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arities.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, usize)> {
        self.arities.iter().map(|(n, a)| (n, *a))
    }

    pub fn preds(&self) -> impl Iterator<Item = &Name> {
        self.arities.keys()
    }

    /// Union of two schemas; conflicting arities are an error.
    pub fn union(&self, other: &Schema) -> Result<Schema> {
        let mut s = self.clone();
        for (p, a) in other.iter() {
            s.declare(p, a)?;
        }
        Ok(s)
    }

    pub fn is_subset(&self, other: &Schema) -> bool {
        self.iter().all(|(p, a)| other.arity(p) == Some(a))
    }

    pub fn remove(&mut self, pred: &str) {
        self.arities.remove(pred);
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (p, a)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}/{a}")?;
        }
        Ok(())
    }
}

/// A finite set of constant-only atoms, optionally annotated with chase levels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Instance {
    atoms: BTreeSet<Atom>,
    levels: Option<BTreeMap<Atom, usize>>,
}

impl Instance {
    pub fn new() -> Instance {
        Instance::default()
    }

    /// Build an instance; any variable occurrence is an error.
    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Result<Instance> {
        let mut inst = Instance::new();
        for a in atoms {
            if !a.is_ground() {
                return Err(Error::Invalid(format!("instance atom {a} contains a variable")));
            }
            inst.atoms.insert(a);
        }
        Ok(inst)
    }

    /// Build an instance from `(pred, [constants])` shorthand.
    pub fn from_facts(facts: &[(&str, &[&str])]) -> Instance {
        let mut inst = Instance::new();
        for (p, args) in facts {
            inst.atoms.insert(Atom::fact(p, args));
        }
        inst
    }

    /// Insert a ground atom (level 0 when levels are tracked). Returns true when new.
    pub fn insert(&mut self, atom: Atom) -> bool {
        debug_assert!(atom.is_ground(), "instances are constant-only");
        if self.atoms.contains(&atom) {
            return false;
        }
        if let Some(levels) = &mut self.levels {
            levels.insert(atom.clone(), 0);
        }
        self.atoms.insert(atom)
    }

    /// Insert a ground atom with an explicit level; keeps the smaller level if present.
    pub fn insert_at(&mut self, atom: Atom, level: usize) -> bool {
        debug_assert!(atom.is_ground(), "instances are constant-only");
        let levels = self.levels.get_or_insert_with(BTreeMap::new);
        if self.atoms.contains(&atom) {
            let e = levels.entry(atom).or_insert(level);
            *e = (*e).min(level);
            return false;
        }
        levels.insert(atom.clone(), level);
        self.atoms.insert(atom)
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.atoms
    }

    /// Active domain: every constant occurring in some atom.
    pub fn adom(&self) -> BTreeSet<Name> {
        self.atoms.iter().flat_map(|a| a.args.iter().map(|t| t.name().clone())).collect()
    }

    pub fn schema(&self) -> Result<Schema> {
        Schema::from_atoms(self.atoms.iter())
    }

    pub fn levels(&self) -> Option<&BTreeMap<Atom, usize>> {
        self.levels.as_ref()
    }

    pub fn level(&self, atom: &Atom) -> Option<usize> {
        self.levels.as_ref().and_then(|l| l.get(atom).copied())
    }

    /// Annotate every atom with level 0 (the originating database).
    pub fn with_zero_levels(mut self) -> Instance {
        self.levels = Some(self.atoms.iter().map(|a| (a.clone(), 0)).collect());
        self
    }

    /// Replace the level annotation wholesale (used by negative controls in tests).
    pub fn set_levels(&mut self, levels: Option<BTreeMap<Atom, usize>>) {
        self.levels = levels;
    }

    /// Drop level annotations.
    pub fn without_levels(&self) -> Instance {
        Instance { atoms: self.atoms.clone(), levels: None }
    }

    /// Atoms whose constants all lie in `keep`.
    pub fn restrict(&self, keep: &BTreeSet<Name>) -> Instance {
        let atoms: BTreeSet<Atom> = self
            .atoms
            .iter()
            .filter(|a| a.args.iter().all(|t| keep.contains(t.name())))
            .cloned()
            .collect();
        let levels = self
            .levels
            .as_ref()
            .map(|l| l.iter().filter(|(a, _)| atoms.contains(*a)).map(|(a, v)| (a.clone(), *v)).collect());
        Instance { atoms, levels }
    }

    /// Atoms whose predicate belongs to the schema.
    pub fn restrict_schema(&self, schema: &Schema) -> Instance {
        Instance {
            atoms: self.atoms.iter().filter(|a| schema.contains(&a.pred)).cloned().collect(),
            levels: None,
        }
    }

    /// Set union; level annotations are dropped.
    pub fn union(&self, other: &Instance) -> Instance {
        Instance { atoms: self.atoms.union(&other.atoms).cloned().collect(), levels: None }
    }

    pub fn is_subset(&self, other: &Instance) -> bool {
        self.atoms.is_subset(&other.atoms)
    }

    /// View the instance as a CQ: constants become variables, answer
    /// variables are the given constants.
    pub fn to_cq(&self, answer: &[Name]) -> Cq {
        Cq {
            answer: answer.to_vec(),
            atoms: self.atoms.iter().map(Atom::thaw).collect(),
        }
    }
}

impl FromIterator<Atom> for Instance {
    /// Collect ground atoms; panics in debug builds on variables.
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Instance {
        let mut inst = Instance::new();
        for a in iter {
            inst.insert(a);
        }
        inst
    }
}

/// `restrict(I, keep)`: the atoms of `I` that mention only constants of `keep`.
pub fn restrict(instance: &Instance, keep: &BTreeSet<Name>) -> Instance {
    instance.restrict(keep)
}

/// Conjunctive query `q(x̄) :- body`.
///
/// Body atoms are variable-only and stored sorted and deduplicated. Answer
/// variables are given positionally; every answer variable must occur in the
/// body. A Boolean CQ may have an empty body, which denotes `true`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cq {
    answer: Vec<Name>,
    atoms: BTreeSet<Atom>,
}

impl Cq {
    /// Build a CQ, checking that it is variable-only and safe.
    pub fn new(answer: Vec<Name>, atoms: impl IntoIterator<Item = Atom>) -> Result<Cq> {
        let atoms: BTreeSet<Atom> = atoms.into_iter().collect();
        for a in &atoms {
            if let Some(t) = a.args.iter().find(|t| t.is_const()) {
                return Err(Error::Invalid(format!("query atom {a} contains constant {t}")));
            }
        }
        let cq = Cq { answer, atoms };
        let vars = cq.vars();
        if let Some(x) = cq.answer.iter().find(|x| !vars.contains(*x)) {
            return Err(Error::Invalid(format!("answer variable {x} does not occur in the body")));
        }
        Ok(cq)
    }

    /// Convenience constructor from string shorthand; panics on invalid input.
    pub fn build(answer: &[&str], atoms: &[(&str, &[&str])]) -> Cq {
        Cq::new(
            answer.iter().map(|x| name(x)).collect(),
            atoms.iter().map(|(p, args)| Atom::pattern(p, args)),
        )
        .expect("valid CQ")
    }

    /// Internal constructor for CQs produced by algorithms that preserve the invariants.
    pub(crate) fn from_parts(answer: Vec<Name>, atoms: BTreeSet<Atom>) -> Cq {
        debug_assert!(atoms.iter().all(|a| a.args.iter().all(Term::is_var)));
        Cq { answer, atoms }
    }

    pub fn answer(&self) -> &[Name] {
        &self.answer
    }

    pub fn arity(&self) -> usize {
        self.answer.len()
    }

    pub fn is_boolean(&self) -> bool {
        self.answer.is_empty()
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// All variables of the body.
    pub fn vars(&self) -> BTreeSet<Name> {
        self.atoms.iter().flat_map(|a| a.vars()).collect()
    }

    /// Body variables that are not answer variables.
    pub fn existential_vars(&self) -> BTreeSet<Name> {
        let mut v = self.vars();
        for x in &self.answer {
            v.remove(x);
        }
        v
    }

    pub fn schema(&self) -> Result<Schema> {
        Schema::from_atoms(self.atoms.iter())
    }

    /// The canonical database D[q]: variables become constants of the same name.
    pub fn canonical_database(&self) -> Instance {
        self.atoms.iter().map(Atom::freeze).collect()
    }

    /// Apply a variable renaming to body and answer tuple.
    pub fn rename(&self, f: impl Fn(&Name) -> Name) -> Cq {
        Cq {
            answer: self.answer.iter().map(&f).collect(),
            atoms: self.atoms.iter().map(|a| a.map_terms(|t| Term::Var(f(t.name())))).collect(),
        }
    }

    /// The same CQ with additional body atoms.
    pub fn with_atoms(&self, extra: impl IntoIterator<Item = Atom>) -> Cq {
        let mut atoms = self.atoms.clone();
        atoms.extend(extra);
        Cq { answer: self.answer.clone(), atoms }
    }

    /// The same body with a different subset of atoms; `None` when unsafe.
    pub fn with_body(&self, atoms: BTreeSet<Atom>) -> Option<Cq> {
        Cq::new(self.answer.clone(), atoms).ok()
    }
}

impl fmt::Display for Cq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q({}) :- ", self.answer.join(","))?;
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Canonical database of a CQ (free-function form).
pub fn canonical_database(q: &Cq) -> Instance {
    q.canonical_database()
}

/// Union of CQs with positionally aligned answer tuples. An empty union of a
/// given arity denotes the query that is always false.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ucq {
    arity: usize,
    disjuncts: Vec<Cq>,
}

impl Ucq {
    /// Build a UCQ; all disjuncts must share the arity.
    pub fn new(arity: usize, disjuncts: Vec<Cq>) -> Result<Ucq> {
        if let Some(d) = disjuncts.iter().find(|d| d.arity() != arity) {
            return Err(Error::Invalid(format!(
                "disjunct has arity {} but the union has arity {arity}",
                d.arity()
            )));
        }
        Ok(Ucq { arity, disjuncts })
    }

    /// Build from a nonempty list of disjuncts.
    pub fn from_cqs(disjuncts: Vec<Cq>) -> Result<Ucq> {
        let arity = disjuncts
            .first()
            .map(Cq::arity)
            .ok_or_else(|| Error::Invalid("a union needs at least one disjunct".into()))?;
        Ucq::new(arity, disjuncts)
    }

    pub fn single(q: Cq) -> Ucq {
        Ucq { arity: q.arity(), disjuncts: vec![q] }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn disjuncts(&self) -> &[Cq] {
        &self.disjuncts
    }

    pub fn len(&self) -> usize {
        self.disjuncts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disjuncts.is_empty()
    }

    pub fn schema(&self) -> Result<Schema> {
        Schema::from_atoms(self.disjuncts.iter().flat_map(|d| d.atoms().iter()))
    }

    /// Maximum number of variables over all disjuncts.
    pub fn max_vars(&self) -> usize {
        self.disjuncts.iter().map(|d| d.vars().len()).max().unwrap_or(0)
    }
}

impl fmt::Display for Ucq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Tuple-generating dependency `body -> exists z̄ . head`.
///
/// The declared existential variables are kept as written so that validation
/// can report undeclared head variables; [`Tgd::new`] derives them.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tgd {
    body: Vec<Atom>,
    head: Vec<Atom>,
    existentials: BTreeSet<Name>,
}

impl Tgd {
    /// Build a TGD whose existential variables are exactly the head
    /// variables not occurring in the body.
    pub fn new(body: Vec<Atom>, head: Vec<Atom>) -> Result<Tgd> {
        let t = Tgd::with_declared(body, head, BTreeSet::new());
        let ex: BTreeSet<Name> = t.head_vars().difference(&t.body_vars()).cloned().collect();
        let t = Tgd { existentials: ex, ..t };
        let report = t.violations();
        if report.is_empty() {
            Ok(t)
        } else {
            Err(Error::Invalid(report.join("; ")))
        }
    }

    /// Shorthand constructor; panics on invalid input.
    pub fn build(body: &[(&str, &[&str])], head: &[(&str, &[&str])]) -> Tgd {
        Tgd::new(
            body.iter().map(|(p, a)| Atom::pattern(p, a)).collect(),
            head.iter().map(|(p, a)| Atom::pattern(p, a)).collect(),
        )
        .expect("valid TGD")
    }

    /// Build a TGD with explicitly declared existential variables (no checks).
    pub fn with_declared(body: Vec<Atom>, head: Vec<Atom>, existentials: BTreeSet<Name>) -> Tgd {
        let mut body_dedup: Vec<Atom> = Vec::new();
        for a in body {
            if !body_dedup.contains(&a) {
                body_dedup.push(a);
            }
        }
        let mut head_dedup: Vec<Atom> = Vec::new();
        for a in head {
            if !head_dedup.contains(&a) {
                head_dedup.push(a);
            }
        }
        Tgd { body: body_dedup, head: head_dedup, existentials }
    }

    pub fn body(&self) -> &[Atom] {
        &self.body
    }

    pub fn head(&self) -> &[Atom] {
        &self.head
    }

    pub fn existentials(&self) -> &BTreeSet<Name> {
        &self.existentials
    }

    pub fn body_vars(&self) -> BTreeSet<Name> {
        self.body.iter().flat_map(|a| a.vars()).collect()
    }

    pub fn head_vars(&self) -> BTreeSet<Name> {
        self.head.iter().flat_map(|a| a.vars()).collect()
    }

    /// fr(σ): variables shared by body and head.
    pub fn frontier(&self) -> BTreeSet<Name> {
        self.body_vars().intersection(&self.head_vars()).cloned().collect()
    }

    pub fn is_full(&self) -> bool {
        self.existentials.is_empty()
    }

    /// Invariant violations of this TGD, as human-readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.head.is_empty() {
            out.push("empty head".to_string());
        }
        for a in self.body.iter().chain(self.head.iter()) {
            if let Some(t) = a.args.iter().find(|t| t.is_const()) {
                out.push(format!("atom {a} contains constant {t}"));
            }
        }
        let body_vars = self.body_vars();
        for v in self.head_vars() {
            if !body_vars.contains(&v) && !self.existentials.contains(&v) {
                out.push(format!("head variable {v} neither frontier nor declared existential"));
            }
        }
        for z in &self.existentials {
            if body_vars.contains(z) {
                out.push(format!("existential variable {z} occurs in the body"));
            } else if !self.head_vars().contains(z) {
                out.push(format!("existential variable {z} does not occur in the head"));
            }
        }
        out
    }

    pub fn schema(&self) -> Result<Schema> {
        Schema::from_atoms(self.body.iter().chain(self.head.iter()))
    }

    /// Rename all variables with `f`.
    pub fn rename(&self, f: impl Fn(&Name) -> Name) -> Tgd {
        let m = |a: &Atom| a.map_terms(|t| Term::Var(f(t.name())));
        Tgd {
            body: self.body.iter().map(m).collect(),
            head: self.head.iter().map(m).collect(),
            existentials: self.existentials.iter().map(&f).collect(),
        }
    }

    /// The same TGD with additional head atoms (existentials recomputed).
    pub fn with_head_atoms(&self, extra: impl IntoIterator<Item = Atom>) -> Tgd {
        let mut head = self.head.clone();
        for a in extra {
            if !head.contains(&a) {
                head.push(a);
            }
        }
        Tgd { body: self.body.clone(), head, existentials: self.existentials.clone() }
    }
}

impl fmt::Display for Tgd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.body.is_empty() {
            f.write_str("true")?;
        }
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(" -> ")?;
        if !self.existentials.is_empty() {
            let zs: Vec<&str> = self.existentials.iter().map(|z| &**z).collect();
            write!(f, "exists {} . ", zs.join(","))?;
        }
        for (i, a) in self.head.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Schema of a set of TGDs.
pub fn sigma_schema(sigma: &[Tgd]) -> Result<Schema> {
    let mut s = Schema::new();
    for t in sigma {
        s = s.union(&t.schema()?)?;
    }
    Ok(s)
}

/// Ontology-mediated query `(S, Σ, q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Omq {
    pub data_schema: Schema,
    pub sigma: Vec<Tgd>,
    pub query: Ucq,
}

impl Omq {
    pub fn new(data_schema: Schema, sigma: Vec<Tgd>, query: Ucq) -> Omq {
        Omq { data_schema, sigma, query }
    }

    /// The extended schema T = S ∪ sch(Σ) ∪ sch(q).
    pub fn schema(&self) -> Result<Schema> {
        self.data_schema.union(&sigma_schema(&self.sigma)?)?.union(&self.query.schema()?)
    }

    /// True iff the data schema equals the extended schema.
    pub fn has_full_data_schema(&self) -> bool {
        self.schema().map(|t| t == self.data_schema).unwrap_or(false)
    }
}

/// Constraint-query specification `(Σ, q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cqs {
    pub sigma: Vec<Tgd>,
    pub query: Ucq,
}

impl Cqs {
    pub fn new(sigma: Vec<Tgd>, query: Ucq) -> Cqs {
        Cqs { sigma, query }
    }

    pub fn schema(&self) -> Result<Schema> {
        sigma_schema(&self.sigma)?.union(&self.query.schema()?)
    }

    /// The OMQ over the full data schema with the same ontology and query.
    pub fn to_omq(&self) -> Result<Omq> {
        Ok(Omq::new(self.schema()?, self.sigma.clone(), self.query.clone()))
    }
}

/// Undirected simple graph over named vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    vertices: BTreeSet<Name>,
    edges: BTreeSet<(Name, Name)>,
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    pub fn add_vertex(&mut self, v: Name) {
        self.vertices.insert(v);
    }

    /// Add an undirected edge; self-loops are ignored.
    pub fn add_edge(&mut self, u: Name, v: Name) {
        if u == v {
            self.vertices.insert(u);
            return;
        }
        self.vertices.insert(u.clone());
        self.vertices.insert(v.clone());
        let e = if u < v { (u, v) } else { (v, u) };
        self.edges.insert(e);
    }

    pub fn from_edges(edges: &[(&str, &str)]) -> Graph {
        let mut g = Graph::new();
        for (u, v) in edges {
            g.add_edge(name(u), name(v));
        }
        g
    }

    pub fn vertices(&self) -> &BTreeSet<Name> {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeSet<(Name, Name)> {
        &self.edges
    }

    pub fn has_edge(&self, u: &Name, v: &Name) -> bool {
        let e = if u < v { (u.clone(), v.clone()) } else { (v.clone(), u.clone()) };
        self.edges.contains(&e)
    }

    pub fn neighbors(&self, v: &Name) -> BTreeSet<Name> {
        self.edges
            .iter()
            .filter_map(|(a, b)| {
                if a == v {
                    Some(b.clone())
                } else if b == v {
                    Some(a.clone())
                } else {
                    None
                }
            })
            .collect()
    }

    /// Induced subgraph on `keep`.
    pub fn induced(&self, keep: &BTreeSet<Name>) -> Graph {
        Graph {
            vertices: self.vertices.intersection(keep).cloned().collect(),
            edges: self.edges.iter().filter(|(a, b)| keep.contains(a) && keep.contains(b)).cloned().collect(),
        }
    }

    /// The `rows × cols` grid with vertices named `g<row>_<col>` (1-based).
    pub fn grid(rows: usize, cols: usize) -> Graph {
        let mut g = Graph::new();
        for r in 1..=rows {
            for c in 1..=cols {
                g.add_vertex(grid_vertex(r, c));
                if r < rows {
                    g.add_edge(grid_vertex(r, c), grid_vertex(r + 1, c));
                }
                if c < cols {
                    g.add_edge(grid_vertex(r, c), grid_vertex(r, c + 1));
                }
            }
        }
        g
    }

    /// Complete graph on vertices `v1..vn`.
    pub fn complete(n: usize) -> Graph {
        let mut g = Graph::new();
        for i in 1..=n {
            g.add_vertex(name(&format!("v{i}")));
            for j in i + 1..=n {
                g.add_edge(name(&format!("v{i}")), name(&format!("v{j}")));
            }
        }
        g
    }
}

/// Name of grid vertex `(r, c)` in [`Graph::grid`].
pub fn grid_vertex(r: usize, c: usize) -> Name {
    name(&format!("g{r}_{c}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn term_order_puts_constants_first() {
        let mut ts = vec![Term::var("a"), Term::constant("z"), Term::constant("b"), Term::var("A")];
        ts.sort();
        assert_eq!(ts, vec![Term::constant("b"), Term::constant("z"), Term::var("A"), Term::var("a")]);
    }

    #[test]
    fn restrict_examples() {
        let i = Instance::from_facts(&[("R", &["a", "b"]), ("S", &["a"])]);
        let keep: BTreeSet<Name> = [name("a")].into_iter().collect();
        assert_eq!(i.restrict(&keep), Instance::from_facts(&[("S", &["a"])]));
        assert_eq!(i.restrict(&i.adom()), i);

        let d = Instance::from_facts(&[("P", &["b", "a"]), ("P", &["b", "c"]), ("R1", &["a"]), ("R2", &["b"])]);
        let keep: BTreeSet<Name> = [name("a"), name("b")].into_iter().collect();
        // Independent filter oracle.
        let expected: Instance = d
            .iter()
            .filter(|a| a.args.iter().all(|t| t.name().as_ref() == "a" || t.name().as_ref() == "b"))
            .cloned()
            .collect();
        assert_eq!(d.restrict(&keep), expected);
        assert_eq!(d.restrict(&keep).len(), 3);
    }

    #[test]
    fn canonical_database_is_name_preserving() {
        let q = Cq::build(&[], &[("R", &["x", "y"])]);
        assert_eq!(q.canonical_database(), Instance::from_facts(&[("R", &["x", "y"])]));
        let vars: BTreeSet<Name> = q.vars();
        assert_eq!(q.canonical_database().adom(), vars);
    }

    #[test]
    fn unsafe_cq_rejected() {
        let r = Cq::new(vec![name("z")], vec![Atom::pattern("R", &["x"])]);
        assert!(r.is_err());
    }

    #[test]
    fn tgd_frontier_and_existentials() {
        let t = Tgd::build(&[("E", &["x", "y"])], &[("E", &["y", "z"])]);
        assert_eq!(t.frontier(), [name("y")].into_iter().collect());
        assert_eq!(t.existentials(), &[name("z")].into_iter().collect());
        let bad = Tgd::with_declared(vec![Atom::pattern("R", &["x", "y"])], vec![Atom::pattern("S", &["z"])], BTreeSet::new());
        assert_eq!(bad.violations(), vec!["head variable z neither frontier nor declared existential".to_string()]);
    }

    #[test]
    fn schema_conflicts_are_errors() {
        let mut s = Schema::new();
        s.declare(&name("R"), 2).unwrap();
        assert!(s.declare(&name("R"), 1).is_err());
        assert_eq!(s.max_arity(), 2);
        assert_eq!(Schema::new().max_arity(), 0);
    }

    #[test]
    fn grid_shape() {
        let g = Graph::grid(3, 3);
        assert_eq!(g.vertices().len(), 9);
        assert_eq!(g.edges().len(), 12);
    }
}
