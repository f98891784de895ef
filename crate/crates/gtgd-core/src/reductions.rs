//! Reductions from the clique problem and databases that satisfy a set of
//! TGDs.
//!
//! The clique reduction builds, from a graph `G`, an integer `k` and
//! databases `D ⊆ D′` whose Gaifman graph on a set `A` carries a minor of
//! the `k × K` grid (`K = k(k−1)/2`), a database `D*` in which every element
//! of `A` is replaced by copies labelled with clique data of `G`. Copies
//! only appear together in a fact when their labels come from one labelled
//! clique, so a homomorphism `D → D*` that projects back to the identity on
//! `A` exists exactly when `G` has a `k`-clique.
//!
//! The satisfying database turns an OMQ instance over guarded TGDs into a
//! plain database that is a model of the TGDs: the ground consequences are
//! added, and a finite model that agrees with the chase on small queries is
//! glued onto every maximal guarded tuple.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::chase::{satisfies, violated_trigger};
use crate::classify::{classify_set, require_guarded};
use crate::decision::{chase_entails, cqs_contains, Answer, DecisionOptions};
use crate::error::{Error, Result};
use crate::finite::{find_finite_model_rejecting, FiniteModelOptions, FiniteSearch};
use crate::guarded::{ground_chase, GuardedClosure};
use crate::hom::{core, HomMode, Homomorphism, IndexedInstance};
use crate::model::{grid_vertex, name, Atom, Cq, Cqs, Graph, Instance, Name, Term, Tgd, Ucq};
use crate::treewidth::{components, gaifman_cq, gaifman_instance, grid_minor, MinorMap};

/// A partial map from `[k]` to graph vertices whose images are pairwise
/// distinct and adjacent.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct LabelledClique {
    pub eta: BTreeMap<usize, Name>,
}

impl LabelledClique {
    /// Domain within `[k]`, images graph vertices, distinct images adjacent.
    pub fn is_valid(&self, g: &Graph, k: usize) -> bool {
        let images: Vec<&Name> = self.eta.values().collect();
        self.eta.keys().all(|&i| (1..=k).contains(&i))
            && images.iter().all(|v| g.vertices().contains(*v))
            && images
                .iter()
                .enumerate()
                .all(|(a, u)| images[a + 1..].iter().all(|v| g.has_edge(u, v)))
    }
}

/// All labelled cliques whose domain is exactly `dom`.
pub fn labelled_cliques_on(g: &Graph, dom: &[usize]) -> Vec<LabelledClique> {
    fn go(g: &Graph, dom: &[usize], chosen: &mut Vec<Name>, out: &mut Vec<LabelledClique>) {
        if chosen.len() == dom.len() {
            out.push(LabelledClique { eta: dom.iter().copied().zip(chosen.iter().cloned()).collect() });
            return;
        }
        for v in g.vertices() {
            if chosen.iter().all(|u| g.has_edge(u, v)) {
                chosen.push(v.clone());
                go(g, dom, chosen, out);
                chosen.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(g, dom, &mut Vec::new(), &mut out);
    out
}

/// All labelled cliques over `[k]` with at most `max_size` indices.
pub fn labelled_cliques(g: &Graph, k: usize, max_size: usize) -> Vec<LabelledClique> {
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << k) {
        if mask.count_ones() as usize <= max_size {
            let dom: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
            out.extend(labelled_cliques_on(g, &dom));
        }
    }
    out.sort();
    out
}

/// Does `g` contain a clique with `size` vertices?
pub fn has_clique(g: &Graph, size: usize) -> bool {
    extends_to_clique(g, &[], size)
}

/// Can the clique `base` be extended to a clique with `size` vertices?
fn extends_to_clique(g: &Graph, base: &[Name], size: usize) -> bool {
    fn go(g: &Graph, verts: &[Name], from: usize, chosen: &mut Vec<Name>, size: usize) -> bool {
        if chosen.len() >= size {
            return true;
        }
        if verts.len() - from < size - chosen.len() {
            return false;
        }
        for idx in from..verts.len() {
            let v = &verts[idx];
            if chosen.iter().all(|u| g.has_edge(u, v)) {
                chosen.push(v.clone());
                if go(g, verts, idx + 1, chosen, size) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    let verts: Vec<Name> = g.vertices().iter().filter(|v| !base.contains(v)).cloned().collect();
    go(g, &verts, 0, &mut base.to_vec(), size)
}

/// Is every clique of `g` with at most `3r` vertices contained in a clique
/// with `3rm` vertices? Checked by enumeration.
pub fn clique_extension_condition(g: &Graph, r: usize, m: usize) -> bool {
    let (small, big) = (3 * r, 3 * r * m);
    let verts: Vec<Name> = g.vertices().iter().cloned().collect();
    fn go(g: &Graph, verts: &[Name], from: usize, chosen: &mut Vec<Name>, small: usize, big: usize) -> bool {
        if !extends_to_clique(g, chosen, big) {
            return false;
        }
        if chosen.len() == small {
            return true;
        }
        for idx in from..verts.len() {
            let v = &verts[idx];
            if chosen.iter().all(|u| g.has_edge(u, v)) {
                chosen.push(v.clone());
                let ok = go(g, verts, idx + 1, chosen, small, big);
                chosen.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    go(g, &verts, 0, &mut Vec::new(), small, big)
}

/// `K = k(k−1)/2`, the number of 2-subsets of `[k]`.
pub fn pair_count(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// The colexicographic bijection from 2-subsets `{j < l}` of `[k]` to
/// `[K]`: `{1,2} ↦ 1, {1,3} ↦ 2, {2,3} ↦ 3, {1,4} ↦ 4, …`.
pub fn colex_chi(k: usize) -> BTreeMap<(usize, usize), usize> {
    let mut out = BTreeMap::new();
    for l in 2..=k {
        for j in 1..l {
            out.insert((j, l), pair_count(l - 1) + j);
        }
    }
    out
}

/// The database `D*` with its projection `h0` and the data it was built
/// from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroheDb {
    pub dstar: Instance,
    /// Projection `adom(D*) → adom(D′)`: tuple constants go to their last
    /// component, all other constants to themselves.
    pub h0: BTreeMap<Name, Name>,
    /// The bijection from 2-subsets of `[k]` to grid columns.
    pub chi: BTreeMap<(usize, usize), usize>,
    pub k: usize,
    pub d: Instance,
    pub dprime: Instance,
    pub a: BTreeSet<Name>,
}

/// Components `(v, e1, e2, i, {j,l}, z)` of a tuple constant.
type TupleParts = (Name, Name, Name, usize, (usize, usize), Name);

/// A pattern (facts over elements) with its fixed answer elements.
type Pattern = (Vec<Atom>, Vec<Name>);

/// The tuple constant `(v, {e1,e2}, i, {j,l}, z)`, written with `__`
/// between components.
fn tuple_constant(v: &Name, e: (&Name, &Name), i: usize, p: (usize, usize), z: &Name) -> Name {
    let (e1, e2) = if e.0 <= e.1 { e } else { (e.1, e.0) };
    name(&format!("{v}__{e1}__{e2}__{i}__{}_{}__{z}", p.0, p.1))
}

/// Build `D*` from the graph `g`, `k ≥ 2`, `D ⊆ D′`, `A ⊆ adom(D)` and a
/// minor map of the `k × K` grid onto the Gaifman graph of `D` restricted
/// to `A` (grid row `i`, column `c` in the naming of [`Graph::grid`]).
///
/// A fact `R(z̄)` of `D′` produces one fact per labelled clique whose domain
/// is exactly the set of indices `{i, j, l}` needed by the elements of `z̄`
/// in `A`; larger cliques produce the same facts.
pub fn grohe_db(
    g: &Graph,
    k: usize,
    d: &Instance,
    dprime: &Instance,
    a: &BTreeSet<Name>,
    mu: &MinorMap,
) -> Result<GroheDb> {
    if k < 2 {
        return Err(Error::Invalid(format!("clique size must be at least 2, got {k}")));
    }
    let big_k = pair_count(k);
    if !d.is_subset(dprime) {
        let missing = d.iter().find(|f| !dprime.contains(f)).expect("not a subset");
        return Err(Error::NotSubset(format!("fact {missing} of D is not in D′")));
    }
    let adom_d = d.adom();
    if let Some(z) = a.iter().find(|z| !adom_d.contains(*z)) {
        return Err(Error::NotSubset(format!("{z} is in A but not in adom(D)")));
    }
    if mu.rows != k || mu.cols != big_k {
        return Err(Error::InvalidMinorMap(format!(
            "expected a map of the {k}x{big_k} grid, got {}x{}",
            mu.rows, mu.cols
        )));
    }
    let host = gaifman_instance(d).induced(a);
    mu.validate(&host)?;
    let chi = colex_chi(k);
    let chi_inv: BTreeMap<usize, (usize, usize)> = chi.iter().map(|(&p, &c)| (c, p)).collect();
    let mut place: BTreeMap<Name, (usize, (usize, usize))> = BTreeMap::new();
    for i in 1..=k {
        for c in 1..=big_k {
            for z in &mu.map[&grid_vertex(i, c)] {
                place.insert(z.clone(), (i, chi_inv[&c]));
            }
        }
    }
    if let Some(z) = a.iter().find(|z| !place.contains_key(*z)) {
        return Err(Error::InvalidMinorMap(format!("the map is not onto: {z} is in no branch set")));
    }

    let plain: BTreeSet<Name> = dprime.adom().into_iter().filter(|z| !a.contains(z)).collect();
    let mut dstar = Instance::new();
    let mut h0: BTreeMap<Name, Name> = BTreeMap::new();
    let mut decoded: HashMap<Name, TupleParts> = HashMap::new();
    let mut cliques: HashMap<Vec<usize>, Vec<LabelledClique>> = HashMap::new();
    for fact in dprime.iter() {
        let needed: BTreeSet<usize> = fact
            .term_names()
            .iter()
            .filter_map(|z| place.get(z))
            .flat_map(|&(i, (j, l))| [i, j, l])
            .collect();
        let needed: Vec<usize> = needed.into_iter().collect();
        let etas = cliques.entry(needed.clone()).or_insert_with(|| labelled_cliques_on(g, &needed));
        for eta in etas.iter() {
            let mut args = Vec::with_capacity(fact.args.len());
            for t in &fact.args {
                let z = t.name();
                let Some(&(i, (j, l))) = place.get(z) else {
                    h0.insert(z.clone(), z.clone());
                    args.push(Term::Const(z.clone()));
                    continue;
                };
                let (v, e1, e2) = (&eta.eta[&i], &eta.eta[&j], &eta.eta[&l]);
                let c = tuple_constant(v, (e1, e2), i, (j, l), z);
                let key = (v.clone(), e1.min(e2).clone(), e1.max(e2).clone(), i, (j, l), z.clone());
                if plain.contains(&c) || decoded.get(&c).is_some_and(|prev| *prev != key) {
                    return Err(Error::Invalid(format!("tuple constant {c} is ambiguous; rename the inputs")));
                }
                decoded.insert(c.clone(), key);
                h0.insert(c.clone(), z.clone());
                args.push(Term::Const(c));
            }
            dstar.insert(Atom { pred: fact.pred.clone(), args });
        }
    }
    Ok(GroheDb { dstar, h0, chi, k, d: d.clone(), dprime: dprime.clone(), a: a.clone() })
}

/// Outcome of [`check_reduction_properties`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionReport {
    /// `h0` is defined on `adom(D*)` and maps every fact into `D′`.
    pub h0_homomorphism: bool,
    /// `h0` reaches every element of `adom(D′)`.
    pub h0_surjective: bool,
    pub dprime_models_sigma: bool,
    /// Every clique of at most `3r` vertices lies in one of `3rm` vertices.
    pub clique_condition: bool,
    pub dstar_models_sigma: bool,
    /// `G` has a `k`-clique (brute force).
    pub has_k_clique: bool,
    /// There is a homomorphism `h: D → D*` with `h0 ∘ h` the identity on `A`.
    pub pinned_hom: bool,
}

impl ReductionReport {
    /// `G` has a `k`-clique iff the pinned homomorphism exists.
    pub fn biconditional_holds(&self) -> bool {
        self.has_k_clique == self.pinned_hom
    }

    /// `D′ ⊨ Σ` and the clique condition imply `D* ⊨ Σ`.
    pub fn sigma_transfer_holds(&self) -> bool {
        !(self.dprime_models_sigma && self.clique_condition) || self.dstar_models_sigma
    }

    /// Every checked property holds.
    pub fn all_hold(&self) -> bool {
        self.h0_homomorphism && self.h0_surjective && self.biconditional_holds() && self.sigma_transfer_holds()
    }
}

impl fmt::Display for ReductionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "h0_homomorphism={}", self.h0_homomorphism)?;
        writeln!(f, "h0_surjective={}", self.h0_surjective)?;
        writeln!(f, "dprime_models_sigma={}", self.dprime_models_sigma)?;
        writeln!(f, "clique_condition={}", self.clique_condition)?;
        writeln!(f, "dstar_models_sigma={}", self.dstar_models_sigma)?;
        writeln!(f, "has_k_clique={}", self.has_k_clique)?;
        write!(f, "pinned_hom={}", self.pinned_hom)
    }
}

/// Is `h0` a homomorphism from `D*` to `D′`?
pub fn h0_is_homomorphism(gdb: &GroheDb) -> bool {
    gdb.dstar.iter().all(|f| {
        let mapped: Option<Vec<Term>> =
            f.args.iter().map(|t| gdb.h0.get(t.name()).map(|z| Term::Const(z.clone()))).collect();
        mapped.is_some_and(|args| gdb.dprime.contains(&Atom { pred: f.pred.clone(), args }))
    })
}

/// Is `h0` onto `adom(D′)`?
pub fn h0_is_surjective(gdb: &GroheDb) -> bool {
    let image: BTreeSet<&Name> = gdb.dstar.adom().iter().filter_map(|c| gdb.h0.get(c)).collect::<BTreeSet<_>>();
    gdb.dprime.adom().iter().all(|z| image.contains(z))
}

/// A homomorphism `h: D → D*` with `h0(h(z)) = z` for every `z ∈ A`,
/// keyed by the elements of `D`. Found by pinning every `z ∈ A` and its
/// copies with a fresh unary predicate.
pub fn pinned_homomorphism(gdb: &GroheDb) -> Option<BTreeMap<Name, Name>> {
    let pin = |z: &Name| format!("__pin__{z}");
    let mut target = gdb.dstar.clone();
    for (c, z) in &gdb.h0 {
        if gdb.a.contains(z) {
            target.insert(Atom::fact(&pin(z), &[c.as_ref()]));
        }
    }
    let mut source: Vec<Atom> = gdb.d.iter().map(Atom::thaw).collect();
    for z in &gdb.a {
        source.push(Atom::pattern(&pin(z), &[z.as_ref()]));
    }
    let h = IndexedInstance::new(&target).homs(&source, &Homomorphism::new(), HomMode::First).homs.into_iter().next()?;
    Some(h.into_iter().map(|(x, y)| (x.name().clone(), y.name().clone())).collect())
}

/// Check the properties of a constructed `D*` against `Σ`, the graph and
/// the parameters `r` (maximal arity) and `m` (maximal head size).
pub fn check_reduction_properties(gdb: &GroheDb, sigma: &[Tgd], g: &Graph, r: usize, m: usize) -> ReductionReport {
    ReductionReport {
        h0_homomorphism: h0_is_homomorphism(gdb),
        h0_surjective: h0_is_surjective(gdb),
        dprime_models_sigma: satisfies(&gdb.dprime, sigma),
        clique_condition: clique_extension_condition(g, r, m),
        dstar_models_sigma: satisfies(&gdb.dstar, sigma),
        has_k_clique: has_clique(g, gdb.k),
        pinned_hom: pinned_homomorphism(gdb).is_some(),
    }
}

/// Without constraints: from a Boolean connected CQ `q`, build `D*` with
/// `D = D′ = D[core(q)]` and `A` all variables, so that `D* ⊨ q` iff `g`
/// has a `k`-clique. Returns the database and the core that was used.
pub fn clique_reduction_constraint_free(g: &Graph, k: usize, q: &Cq) -> Result<(GroheDb, Cq)> {
    if !q.is_boolean() {
        return Err(Error::Invalid("the query must be Boolean".into()));
    }
    let c = core(q);
    let gq = gaifman_cq(&c, true);
    if components(&gq).len() != 1 {
        return Err(Error::Invalid("the query must be connected".into()));
    }
    let d = c.canonical_database();
    let a: BTreeSet<Name> = c.existential_vars();
    let big_k = pair_count(k);
    let Some(mu) = grid_minor(&gq, k, big_k, true)? else {
        return Err(Error::NoGridMinor(format!("the core of the query has no {k}x{big_k} grid minor")));
    };
    Ok((grohe_db(g, k, &d, &d, &a, &mu)?, c))
}

/// Bound on homomorphisms enumerated when checking that `p → p′` fixes `X`.
const HOM_CHECK_CAP: usize = 100_000;

/// With constraints: build `D*` from `D[p] ⊆ D[p′]` and the component of
/// `G^p|X` that carries a `k × K` grid minor, after verifying the checkable
/// conditions on `(p, p′, X)`:
/// 1. `q ≡_Σ p`;
/// 2. `D[p′] ⊨ Σ`;
/// 3. `D[p] ⊆ D[p′]`;
/// 4. every homomorphism `p → p′` fixing the answer variables maps `X`
///    onto `X`;
/// 5. some component of the Gaifman graph of `p` restricted to `X` has a
///    `k × K` grid minor.
///
/// Σ must be frontier-guarded. The property report is computed with `r`
/// the maximal arity and `m` the maximal head size.
pub fn clique_reduction_cqs(
    g: &Graph,
    k: usize,
    s: &Cqs,
    p: &Cq,
    pprime: &Cq,
    x: &BTreeSet<Name>,
    opts: &DecisionOptions,
) -> Result<(GroheDb, ReductionReport)> {
    let class = classify_set(&s.sigma);
    if !class.frontier_guarded {
        return Err(Error::NotFrontierGuarded { m: class.m, reason: "the ontology is not frontier-guarded".into() });
    }
    let fail = |item: usize, evidence: String| Err(Error::LemmaPreconditionFailed { item, evidence });
    let sp = Cqs::new(s.sigma.clone(), Ucq::single(p.clone()));
    for (l, r, dir) in [(s, &sp, "q ⊆_Σ p"), (&sp, s, "p ⊆_Σ q")] {
        let v = cqs_contains(l, r, opts)?;
        if v.answer != Answer::Yes {
            return fail(1, format!("{dir} is {}: {}", v.answer, v.note));
        }
    }
    let dp = p.canonical_database();
    let dpp = pprime.canonical_database();
    if let Some((ti, h)) = violated_trigger(&dpp, &s.sigma) {
        let binding: Vec<String> = h.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        return fail(2, format!("D[p′] violates {} under {}", s.sigma[ti], binding.join(",")));
    }
    if let Some(f) = dp.iter().find(|f| !dpp.contains(f)) {
        return fail(3, format!("{f} is in D[p] but not in D[p′]"));
    }
    let fixed: Homomorphism =
        p.answer().iter().map(|v| (Term::Var(v.clone()), Term::Const(v.clone()))).collect();
    let src: Vec<Atom> = p.atoms().iter().cloned().collect();
    let homs = IndexedInstance::new(&dpp).homs(&src, &fixed, HomMode::All);
    if homs.count > HOM_CHECK_CAP {
        return Err(Error::CapExceeded { what: "homomorphisms p → p′".into(), cap: HOM_CHECK_CAP });
    }
    for h in &homs.homs {
        let image: BTreeSet<Name> = x.iter().filter_map(|v| h.get(&Term::Var(v.clone()))).map(|t| t.name().clone()).collect();
        if image != *x {
            let shown: Vec<String> = x.iter().map(|v| format!("{v}->{}", h[&Term::Var(v.clone())])).collect();
            return fail(4, format!("homomorphism p → p′ moves X: {}", shown.join(",")));
        }
    }
    let existential = p.existential_vars();
    if let Some(v) = x.iter().find(|v| !existential.contains(*v)) {
        return fail(5, format!("{v} is not an existential variable of p"));
    }
    let big_k = pair_count(k);
    let gx = gaifman_cq(p, true).induced(x);
    let mut found = None;
    for comp in components(&gx) {
        if let Some(mu) = grid_minor(&gx.induced(&comp), k, big_k, true)? {
            found = Some((comp, mu));
            break;
        }
    }
    let Some((a, mu)) = found else {
        return fail(5, format!("no component of the Gaifman graph of p on X has a {k}x{big_k} grid minor"));
    };
    let gdb = grohe_db(g, k, &dp, &dpp, &a, &mu)?;
    let schema = crate::chase::joint_schema(&dpp, &s.sigma)?;
    let report = check_reduction_properties(&gdb, &s.sigma, g, schema.max_arity(), class.m.max(1));
    Ok((gdb, report))
}

/// Bounds for [`finite_witness_search_with`].
#[derive(Clone, Copy, Debug)]
pub struct WitnessOptions {
    /// Search nodes for the model search.
    pub node_budget: usize,
    /// Budgets for deciding chase entailment of the small patterns.
    pub decision: DecisionOptions,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions { node_budget: 200_000, decision: DecisionOptions::default() }
    }
}

/// Search for a finite model `M ⊇ D` of Σ with at most `dom_cap` elements
/// such that every CQ with at most `n` variables has the same answers over
/// `adom(D)` on `M` as on the chase.
pub fn finite_witness_search(d: &Instance, sigma: &[Tgd], n: usize, dom_cap: usize) -> Result<FiniteSearch> {
    finite_witness_search_with(d, sigma, n, dom_cap, &WitnessOptions::default())
}

/// [`finite_witness_search`] with explicit budgets.
///
/// Every model contains a homomorphic image of the chase, so only one
/// direction needs checking: no CQ with at most `n` variables may hold in
/// `M` without holding in the chase. It suffices to test, for every set `S`
/// of at most `n` elements of `M`, the CQ formed by the facts of `M` over
/// `S` with the database constants as answer variables; this property is
/// monotone, so it prunes the model search. Patterns whose entailment the
/// budget cannot certify are treated as distinguishing.
pub fn finite_witness_search_with(
    d: &Instance,
    sigma: &[Tgd],
    n: usize,
    dom_cap: usize,
    opts: &WitnessOptions,
) -> Result<FiniteSearch> {
    let base = d.adom();
    if dom_cap < base.len() {
        return Ok(FiniteSearch::Exhausted);
    }
    let closure = if classify_set(sigma).guarded { Some(GuardedClosure::new(d, sigma)?) } else { None };
    let cache: RefCell<HashMap<Pattern, bool>> = RefCell::new(HashMap::new());
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let entailed = |facts: Vec<Atom>, answer: Vec<Name>| -> bool {
        if let Some(&hit) = cache.borrow().get(&(facts.clone(), answer.clone())) {
            return hit;
        }
        let atoms: Vec<Atom> = facts.iter().map(Atom::thaw).collect();
        let result = match &closure {
            Some(gc) => {
                let fixed: BTreeMap<Name, Name> = answer.iter().map(|c| (c.clone(), c.clone())).collect();
                gc.entails_atoms(&atoms, &fixed)
            }
            None => {
                let q = Cq::new(answer.clone(), atoms).expect("pattern query is well formed");
                match chase_entails(d, sigma, &Ucq::single(q), &answer, &opts.decision) {
                    Ok(v) => v == Some(true),
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        false
                    }
                }
            }
        };
        cache.borrow_mut().insert((facts, answer), result);
        result
    };
    let distinguishes = |m: &Instance| -> bool {
        let elems: Vec<Name> = m.adom().into_iter().collect();
        let mut chosen: Vec<Name> = Vec::new();
        fn subsets(
            elems: &[Name],
            from: usize,
            n: usize,
            chosen: &mut Vec<Name>,
            f: &mut dyn FnMut(&[Name]) -> bool,
        ) -> bool {
            if !chosen.is_empty() && f(chosen) {
                return true;
            }
            if chosen.len() == n {
                return false;
            }
            for idx in from..elems.len() {
                chosen.push(elems[idx].clone());
                let hit = subsets(elems, idx + 1, n, chosen, f);
                chosen.pop();
                if hit {
                    return true;
                }
            }
            false
        }
        let mut check = |s: &[Name]| -> bool {
            let keep: BTreeSet<Name> = s.iter().cloned().collect();
            let part = m.restrict(&keep);
            if part.is_empty() {
                return false;
            }
            let answer: Vec<Name> = part.adom().into_iter().filter(|c| base.contains(c)).collect();
            !entailed(part.iter().cloned().collect(), answer)
        };
        subsets(&elems, 0, n, &mut chosen, &mut check)
    };
    let fm = FiniteModelOptions { max_new: dom_cap - base.len(), node_budget: opts.node_budget };
    let out = find_finite_model_rejecting(d, sigma, &distinguishes, fm)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(out)
}

/// Bounds for [`satisfying_db_from_omq`].
#[derive(Clone, Copy, Debug)]
pub struct SatisfyingDbOptions {
    /// Maximal number of elements added to each guarded tuple.
    pub max_extra: usize,
    pub witness: WitnessOptions,
}

impl Default for SatisfyingDbOptions {
    fn default() -> Self {
        SatisfyingDbOptions { max_extra: 4, witness: WitnessOptions::default() }
    }
}

/// Maximal sets of constants that occur together in a fact.
fn maximal_guarded_sets(i: &Instance) -> Vec<BTreeSet<Name>> {
    let sets: BTreeSet<BTreeSet<Name>> = i.iter().map(|a| a.term_names()).collect();
    sets.iter().filter(|s| !sets.iter().any(|t| t != *s && s.is_subset(t))).cloned().collect()
}

/// A database `D* ⊇ D` with `D* ⊨ Σ` on which `q` has the certain answers
/// of `q` over `D` under guarded Σ, for `q` with at most `n` variables.
///
/// `D⁺` adds the ground chase atoms; onto every maximal guarded set of
/// `D⁺` a finite witness for its restriction is glued, with fresh elements
/// kept apart. Witnesses are searched for patterns of at most
/// `max(n, r)` elements, `r` the maximal arity, so that no new facts over
/// database constants appear.
pub fn satisfying_db_from_omq(d: &Instance, sigma: &[Tgd], q: &Ucq, n: usize) -> Result<Instance> {
    satisfying_db_from_omq_with(d, sigma, q, n, &SatisfyingDbOptions::default())
}

/// [`satisfying_db_from_omq`] with explicit budgets.
pub fn satisfying_db_from_omq_with(
    d: &Instance,
    sigma: &[Tgd],
    q: &Ucq,
    n: usize,
    opts: &SatisfyingDbOptions,
) -> Result<Instance> {
    require_guarded(sigma)?;
    let q_vars = q.disjuncts().iter().map(|c| c.vars().len()).max().unwrap_or(0);
    if n < q_vars {
        return Err(Error::Invalid(format!("n = {n} is below the {q_vars} variables of the query")));
    }
    let r = crate::chase::joint_schema(d, sigma)?.max_arity();
    let n_eff = n.max(r);
    let dplus = d.without_levels().union(&ground_chase(d, sigma)?);
    let adom = dplus.adom();
    let mut prefix = String::from("_w");
    while adom.iter().any(|c| c.starts_with(&prefix)) {
        prefix.insert(0, '_');
    }
    let mut out = dplus.clone();
    for (idx, abar) in maximal_guarded_sets(&dplus).iter().enumerate() {
        let part = dplus.restrict(abar);
        let cap = abar.len() + opts.max_extra;
        let FiniteSearch::Found(m) = finite_witness_search_with(&part, sigma, n_eff, cap, &opts.witness)? else {
            return Err(Error::FiniteWitnessNotFound { cap });
        };
        for f in m.iter() {
            out.insert(f.map_terms(|t| {
                if adom.contains(t.name()) {
                    t.clone()
                } else {
                    Term::Const(name(&format!("{prefix}{idx}{}", t.name())))
                }
            }));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hom::eval;

    fn set(xs: &[&str]) -> BTreeSet<Name> {
        xs.iter().map(|x| name(x)).collect()
    }

    fn edge_minor(x: &str, y: &str) -> MinorMap {
        let map = [(grid_vertex(1, 1), set(&[x])), (grid_vertex(2, 1), set(&[y]))].into_iter().collect();
        MinorMap { rows: 2, cols: 1, map, onto: true }
    }

    #[test]
    fn colex_order() {
        let chi = colex_chi(4);
        assert_eq!(chi[&(1, 2)], 1);
        assert_eq!(chi[&(1, 3)], 2);
        assert_eq!(chi[&(2, 3)], 3);
        assert_eq!(chi[&(1, 4)], 4);
        assert_eq!(chi[&(3, 4)], 6);
        assert_eq!(chi.len(), pair_count(4));
    }

    #[test]
    fn labelled_cliques_of_a_triangle() {
        let g = Graph::complete(3);
        assert_eq!(labelled_cliques_on(&g, &[1, 2]).len(), 6);
        assert_eq!(labelled_cliques_on(&g, &[1, 2, 3, 4]).len(), 0);
        let all = labelled_cliques(&g, 2, 2);
        // Empty map, 3 + 3 singletons, 6 ordered edges.
        assert_eq!(all.len(), 13);
        assert!(all.iter().all(|c| c.is_valid(&g, 2)));
    }

    #[test]
    fn edge_query_on_a_clique_and_an_edgeless_graph() {
        let d = Instance::from_facts(&[("E", &["x", "y"])]);
        let a = set(&["x", "y"]);
        let g = Graph::complete(3);
        let gdb = grohe_db(&g, 2, &d, &d, &a, &edge_minor("x", "y")).unwrap();
        assert_eq!(gdb.dstar.len(), 6);
        let rep = check_reduction_properties(&gdb, &[], &g, 2, 1);
        assert!(rep.h0_homomorphism && rep.h0_surjective && rep.has_k_clique && rep.pinned_hom);

        let mut empty = Graph::new();
        for v in ["u", "v", "w"] {
            empty.add_vertex(name(v));
        }
        let gdb = grohe_db(&empty, 2, &d, &d, &a, &edge_minor("x", "y")).unwrap();
        assert!(gdb.dstar.is_empty());
        let rep = check_reduction_properties(&gdb, &[], &empty, 2, 1);
        assert!(!rep.has_k_clique && !rep.pinned_hom && rep.biconditional_holds());
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let d = Instance::from_facts(&[("E", &["x", "y"])]);
        let g = Graph::complete(3);
        let bad = MinorMap { rows: 1, cols: 2, ..edge_minor("x", "y") };
        assert!(matches!(grohe_db(&g, 2, &d, &d, &set(&["x", "y"]), &bad), Err(Error::InvalidMinorMap(_))));
        assert!(matches!(grohe_db(&g, 2, &d, &d, &set(&["x", "q"]), &edge_minor("x", "q")), Err(Error::NotSubset(_))));
        let bigger = Instance::from_facts(&[("E", &["x", "y"]), ("F", &["y"])]);
        assert!(matches!(grohe_db(&g, 2, &bigger, &d, &set(&["x", "y"]), &edge_minor("x", "y")), Err(Error::NotSubset(_))));
    }

    #[test]
    fn corrupted_projection_is_detected() {
        let d = Instance::from_facts(&[("E", &["x", "y"])]);
        let g = Graph::complete(3);
        let mut gdb = grohe_db(&g, 2, &d, &d, &set(&["x", "y"]), &edge_minor("x", "y")).unwrap();
        assert!(h0_is_homomorphism(&gdb));
        let some = gdb.h0.keys().find(|c| gdb.h0[*c].as_ref() == "x").unwrap().clone();
        gdb.h0.insert(some, name("y"));
        assert!(!h0_is_homomorphism(&gdb));
    }

    #[test]
    fn constraint_free_edge_query() {
        let q = Cq::build(&[], &[("E", &["x", "y"])]);
        let (gdb, c) = clique_reduction_constraint_free(&Graph::from_edges(&[("a", "b")]), 2, &q).unwrap();
        assert!(!eval(&Ucq::single(c.clone()), &gdb.dstar).is_empty());
        let mut lonely = Graph::new();
        lonely.add_vertex(name("a"));
        lonely.add_vertex(name("b"));
        let (gdb, _) = clique_reduction_constraint_free(&lonely, 2, &q).unwrap();
        assert!(eval(&Ucq::single(c), &gdb.dstar).is_empty());
        let unary = Cq::build(&[], &[("A", &["x"])]);
        assert!(matches!(clique_reduction_constraint_free(&lonely, 2, &unary), Err(Error::NoGridMinor(_))));
    }

    #[test]
    fn constrained_fixture_on_k6() {
        let sigma = vec![
            Tgd::build(&[("E", &["x", "y"])], &[("E", &["y", "x"])]),
            Tgd::build(&[("L1", &["x"])], &[("E", &["x", "y"])]),
        ];
        let p = Cq::build(&[], &[("E", &["x", "y"]), ("L1", &["x"]), ("L2", &["y"])]);
        let pp = Cq::build(&[], &[("E", &["x", "y"]), ("E", &["y", "x"]), ("L1", &["x"]), ("L2", &["y"])]);
        let s = Cqs::new(sigma.clone(), Ucq::single(p.clone()));
        let opts = DecisionOptions::default();
        let (gdb, rep) = clique_reduction_cqs(&Graph::complete(6), 2, &s, &p, &pp, &set(&["x", "y"]), &opts).unwrap();
        assert!(rep.all_hold(), "{rep}");
        assert!(rep.dstar_models_sigma && rep.clique_condition);
        assert!(!eval(&s.query, &gdb.dstar).is_empty());

        let err = clique_reduction_cqs(&Graph::complete(6), 2, &s, &p, &p, &set(&["x", "y"]), &opts).unwrap_err();
        assert!(matches!(err, Error::LemmaPreconditionFailed { item: 2, .. }), "{err}");
    }

    #[test]
    fn satisfying_db_forced_shape() {
        let sigma = vec![Tgd::build(&[("A", &["x"])], &[("R", &["x", "y"])])];
        let d = Instance::from_facts(&[("A", &["a"])]);
        let q = Ucq::single(Cq::build(&[], &[("R", &["x", "x"])]));
        let out = satisfying_db_from_omq(&d, &sigma, &q, 1).unwrap();
        assert!(satisfies(&out, &sigma));
        assert_eq!(out.len(), 2);
        let r = out.iter().find(|f| f.pred.as_ref() == "R").unwrap();
        assert_eq!(r.args[0], Term::constant("a"));
        assert_ne!(r.args[1], Term::constant("a"));
        assert!(eval(&q, &out).is_empty());
    }

    #[test]
    fn lasso_witnesses() {
        let sigma = vec![Tgd::build(&[("R", &["x", "y"])], &[("R", &["y", "z"])])];
        let d = Instance::from_facts(&[("R", &["a", "b"])]);
        let loop_q = Ucq::single(Cq::build(&[], &[("R", &["x", "x"])]));
        for n in 1..=3 {
            let FiniteSearch::Found(m) = finite_witness_search(&d, &sigma, n, 6).unwrap() else { panic!("n={n}") };
            assert!(satisfies(&m, &sigma));
            assert!(eval(&loop_q, &m).is_empty(), "n={n}: {m:?}");
            // The only cycle is longer than n.
            assert!(m.adom().len() > n + 1 || n == 1, "n={n}: {m:?}");
        }
        assert_eq!(finite_witness_search(&d, &sigma, 2, 2).unwrap(), FiniteSearch::Exhausted);
    }
}
