//! Exact reasoning with guarded TGDs over finite representations of the
//! (possibly infinite) chase.
//!
//! The chase of a database under guarded TGDs is tree-shaped: every
//! existential trigger creates a bag holding the frontier image and the
//! fresh nulls, and every later atom lives inside one bag. The atoms a bag
//! eventually holds depend only on the atoms it starts with, up to renaming.
//! We therefore name bags by a canonical *key* (their initial atoms over
//! integer terms, frontier images first) and compute, as a least fixpoint,
//! the closure of each key: saturation under the full triggers of the bag,
//! plus everything its children entail about the shared terms. The closure
//! of the root (the database itself) is exactly the ground part of the chase.
//!
//! Query entailment runs over the unfolding of this finite bag graph: each
//! query variable maps to a term of the current bag or lies strictly below
//! it, and the parts below are delegated to children through their
//! interfaces, again as a least fixpoint.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::classify::require_guarded;
use crate::engine::{Interner, Sym};
use crate::error::{Error, Result};
use crate::model::{Atom, Cq, Instance, Name, Term, Tgd, Tuple, Ucq};

/// An atom over integer terms local to a bag.
type BAtom = (Sym, Vec<u32>);
/// A child bag: its key index and the parent terms it is attached to.
type ChildLink = (usize, Vec<u32>);

/// Default cap on the number of distinct bag keys.
pub const DEFAULT_KEY_CAP: usize = 200_000;

#[derive(Clone, Copy, Debug)]
enum HeadArg {
    Var(usize),
    Ex(usize),
}

#[derive(Clone, Debug)]
struct Rule {
    body: Vec<(Sym, Vec<usize>)>,
    nvars: usize,
    /// Frontier variable indices in ascending order.
    frontier: Vec<usize>,
    head: Vec<(Sym, Vec<HeadArg>)>,
    nexist: usize,
}

#[derive(Clone, Debug)]
struct Node {
    nterms: usize,
    closure: BTreeSet<BAtom>,
    /// Child node id and, for each frontier term of the child, the parent term.
    children: Vec<(usize, Vec<u32>)>,
}

/// The saturated bag graph of `(D, Σ)` for guarded Σ.
#[derive(Clone, Debug)]
pub struct GuardedClosure {
    preds: Interner,
    root_names: Vec<Name>,
    root_index: HashMap<Name, u32>,
    /// Node 0 is the root.
    nodes: Vec<Node>,
}

const ROOT: usize = 0;

fn matches(body: &[(Sym, Vec<usize>)], nvars: usize, atoms: &BTreeSet<BAtom>) -> Vec<Vec<u32>> {
    let mut by_pred: HashMap<Sym, Vec<&Vec<u32>>> = HashMap::new();
    for (p, args) in atoms {
        by_pred.entry(*p).or_default().push(args);
    }
    let mut out = Vec::new();
    let mut assign: Vec<Option<u32>> = vec![None; nvars];
    fn rec(
        i: usize,
        body: &[(Sym, Vec<usize>)],
        by_pred: &HashMap<Sym, Vec<&Vec<u32>>>,
        assign: &mut Vec<Option<u32>>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if i == body.len() {
            out.push(assign.iter().map(|a| a.unwrap_or(u32::MAX)).collect());
            return;
        }
        let (p, vars) = &body[i];
        let Some(rows) = by_pred.get(p) else { return };
        for row in rows {
            if row.len() != vars.len() {
                continue;
            }
            let mut newly = Vec::new();
            let mut ok = true;
            for (v, &c) in vars.iter().zip(row.iter()) {
                match assign[*v] {
                    Some(x) if x != c => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        assign[*v] = Some(c);
                        newly.push(*v);
                    }
                }
            }
            if ok {
                rec(i + 1, body, by_pred, assign, out);
            }
            for v in newly {
                assign[v] = None;
            }
        }
    }
    rec(0, body, &by_pred, &mut assign, &mut out);
    out
}

struct Builder {
    rules: Vec<Rule>,
    key_index: HashMap<Vec<BAtom>, usize>,
    keys: Vec<(usize, Vec<BAtom>)>,
    nodes: Vec<Node>,
    cap: usize,
}

impl Builder {
    /// Saturate node `id` once against the current table. Returns the new
    /// closure and children; may register new keys.
    fn saturate(&mut self, id: usize) -> Result<(BTreeSet<BAtom>, Vec<ChildLink>)> {
        let mut s = self.nodes[id].closure.clone();
        let is_root = id == ROOT;
        loop {
            let mut added = false;
            let mut children: Vec<(usize, Vec<u32>)> = Vec::new();
            for ri in 0..self.rules.len() {
                let rule = self.rules[ri].clone();
                if rule.body.is_empty() && !is_root {
                    continue;
                }
                let triggers =
                    if rule.body.is_empty() { vec![Vec::new()] } else { matches(&rule.body, rule.nvars, &s) };
                for img in triggers {
                    if rule.nexist == 0 {
                        for (p, args) in &rule.head {
                            let row = args
                                .iter()
                                .map(|a| match a {
                                    HeadArg::Var(v) => img[*v],
                                    HeadArg::Ex(_) => unreachable!(),
                                })
                                .collect();
                            added |= s.insert((*p, row));
                        }
                        continue;
                    }
                    // Child key: distinct frontier images, then existentials.
                    let mut iface: Vec<u32> = Vec::new();
                    for &v in &rule.frontier {
                        if !iface.contains(&img[v]) {
                            iface.push(img[v]);
                        }
                    }
                    let f = iface.len() as u32;
                    let local = |c: u32| iface.iter().position(|&x| x == c).map(|i| i as u32);
                    let mut key: BTreeSet<BAtom> = BTreeSet::new();
                    for (p, args) in &rule.head {
                        let row = args
                            .iter()
                            .map(|a| match a {
                                HeadArg::Var(v) => local(img[*v]).unwrap(),
                                HeadArg::Ex(z) => f + *z as u32,
                            })
                            .collect();
                        key.insert((*p, row));
                    }
                    for (p, args) in &s {
                        if let Some(row) = args.iter().map(|&c| local(c)).collect::<Option<Vec<u32>>>() {
                            key.insert((*p, row));
                        }
                    }
                    let nterms = f as usize + rule.nexist;
                    let child = self.intern(nterms, key)?;
                    // Pull back what the child knows about the shared terms.
                    for (p, args) in &self.nodes[child].closure {
                        if args.iter().all(|&c| c < f) {
                            added |= s.insert((*p, args.iter().map(|&c| iface[c as usize]).collect()));
                        }
                    }
                    children.push((child, iface));
                }
            }
            if !added {
                children.sort();
                children.dedup();
                return Ok((s, children));
            }
        }
    }

    fn intern(&mut self, nterms: usize, key: BTreeSet<BAtom>) -> Result<usize> {
        let key: Vec<BAtom> = key.into_iter().collect();
        let mut full_key = key.clone();
        full_key.push((Sym::MAX, vec![nterms as u32]));
        if let Some(&id) = self.key_index.get(&full_key) {
            return Ok(id);
        }
        if self.keys.len() >= self.cap {
            return Err(Error::CapExceeded { what: "guarded bag key".into(), cap: self.cap });
        }
        let id = self.nodes.len();
        self.key_index.insert(full_key, id);
        self.keys.push((nterms, key.clone()));
        self.nodes.push(Node { nterms, closure: key.into_iter().collect(), children: Vec::new() });
        Ok(id)
    }
}

impl GuardedClosure {
    /// Build the saturated bag graph; Σ must be guarded.
    pub fn new(d: &Instance, sigma: &[Tgd]) -> Result<GuardedClosure> {
        GuardedClosure::with_cap(d, sigma, DEFAULT_KEY_CAP)
    }

    pub fn with_cap(d: &Instance, sigma: &[Tgd], cap: usize) -> Result<GuardedClosure> {
        require_guarded(sigma)?;
        let mut preds = Interner::default();
        let root_names: Vec<Name> = d.adom().into_iter().collect();
        let root_index: HashMap<Name, u32> = root_names.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect();
        let root_atoms: BTreeSet<BAtom> = d
            .iter()
            .map(|a| (preds.intern(&a.pred), a.args.iter().map(|t| root_index[t.name()]).collect()))
            .collect();
        let rules = sigma.iter().map(|t| compile_rule(t, &mut preds)).collect();
        let mut b = Builder {
            rules,
            key_index: HashMap::new(),
            keys: Vec::new(),
            nodes: vec![Node { nterms: root_names.len(), closure: root_atoms, children: Vec::new() }],
            cap,
        };
        loop {
            let mut changed = false;
            let mut id = 0;
            while id < b.nodes.len() {
                let (closure, children) = b.saturate(id)?;
                if closure != b.nodes[id].closure {
                    changed = true;
                    b.nodes[id].closure = closure;
                }
                if children != b.nodes[id].children {
                    changed = true;
                    b.nodes[id].children = children;
                }
                id += 1;
            }
            if !changed {
                break;
            }
        }
        Ok(GuardedClosure { preds, root_names, root_index, nodes: b.nodes })
    }

    /// Number of distinct bag keys (excluding the root).
    pub fn key_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// The ground part of the chase: all chase atoms over `adom(D)`.
    pub fn ground(&self) -> Instance {
        self.nodes[ROOT]
            .closure
            .iter()
            .map(|(p, args)| Atom {
                pred: self.preds.name(*p).clone(),
                args: args.iter().map(|&c| Term::Const(self.root_names[c as usize].clone())).collect(),
            })
            .collect()
    }

    /// Does `q(tuple)` hold in the chase?
    pub fn entails(&self, q: &Cq, tuple: &[Name]) -> bool {
        let Some(fixed) = crate::hom::answer_binding(q, tuple) else { return false };
        let fixed: BTreeMap<Name, Name> = fixed.into_iter().map(|(v, c)| (v.name().clone(), c.name().clone())).collect();
        let atoms: Vec<Atom> = q.atoms().iter().cloned().collect();
        self.entails_atoms(&atoms, &fixed)
    }

    pub fn entails_ucq(&self, q: &Ucq, tuple: &[Name]) -> bool {
        q.disjuncts().iter().any(|d| self.entails(d, tuple))
    }

    /// Is there a homomorphism from the variable-only `atoms` into the chase
    /// extending `fixed` (variables to database constants)?
    pub fn entails_atoms(&self, atoms: &[Atom], fixed: &BTreeMap<Name, Name>) -> bool {
        let mut var_index: BTreeMap<Name, usize> = BTreeMap::new();
        let mut qatoms = Vec::new();
        for a in atoms {
            let vars: Vec<usize> = a
                .args
                .iter()
                .map(|t| {
                    let n = var_index.len();
                    *var_index.entry(t.name().clone()).or_insert(n)
                })
                .collect();
            let Some(p) = self.preds.get(&a.pred) else { return false };
            qatoms.push((p, vars));
        }
        let mut theta = Vec::new();
        for (v, c) in fixed {
            if let Some(&i) = var_index.get(v) {
                let Some(&t) = self.root_index.get(c) else { return false };
                theta.push((i, t));
            }
        }
        theta.sort();
        let mut m = Matcher { gc: self, q: qatoms, memo: HashMap::new(), order: Vec::new() };
        let top = State { node: ROOT, atoms: (0..atoms.len()).collect(), theta };
        m.solve(top)
    }

    /// Certain answers of a UCQ: tuples over `adom(D)`.
    pub fn certain_answers(&self, q: &Ucq) -> BTreeSet<Tuple> {
        let mut out = BTreeSet::new();
        let n = self.root_names.len();
        let k = q.arity();
        if k > 0 && n == 0 {
            return out;
        }
        let mut idx = vec![0usize; k];
        loop {
            let tuple: Tuple = idx.iter().map(|&i| self.root_names[i].clone()).collect();
            if self.entails_ucq(q, &tuple) {
                out.insert(tuple);
            }
            let mut pos = 0;
            loop {
                if pos == k {
                    return out;
                }
                idx[pos] += 1;
                if idx[pos] < n {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }
}

fn compile_rule(t: &Tgd, preds: &mut Interner) -> Rule {
    let vars: Vec<Name> = t.body_vars().into_iter().collect();
    let exist: Vec<Name> = t.existentials().iter().cloned().collect();
    let vi = |n: &Name| vars.iter().position(|v| v == n);
    let body = t.body().iter().map(|a| (preds.intern(&a.pred), a.args.iter().map(|x| vi(x.name()).unwrap()).collect())).collect();
    let frontier: Vec<usize> = t.frontier().iter().map(|v| vi(v).unwrap()).collect();
    let head = t
        .head()
        .iter()
        .map(|a| {
            let args = a
                .args
                .iter()
                .map(|x| match vi(x.name()) {
                    Some(i) => HeadArg::Var(i),
                    None => HeadArg::Ex(exist.iter().position(|z| z == x.name()).unwrap()),
                })
                .collect();
            (preds.intern(&a.pred), args)
        })
        .collect();
    Rule { body, nvars: vars.len(), frontier, head, nexist: exist.len() }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct State {
    node: usize,
    atoms: Vec<usize>,
    theta: Vec<(usize, u32)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Choice {
    Term(u32),
    Below,
}

struct Matcher<'a> {
    gc: &'a GuardedClosure,
    q: Vec<(Sym, Vec<usize>)>,
    memo: HashMap<State, bool>,
    order: Vec<State>,
}

impl Matcher<'_> {
    fn lookup(&mut self, s: State) -> bool {
        if let Some(&v) = self.memo.get(&s) {
            return v;
        }
        self.memo.insert(s.clone(), false);
        self.order.push(s);
        false
    }

    fn solve(&mut self, top: State) -> bool {
        self.lookup(top.clone());
        loop {
            let mut changed = false;
            let mut i = 0;
            while i < self.order.len() {
                let s = self.order[i].clone();
                if !self.memo[&s] && self.eval(&s) {
                    self.memo.insert(s.clone(), true);
                    changed = true;
                    if s == top {
                        return true;
                    }
                }
                i += 1;
            }
            if !changed {
                return self.memo[&top];
            }
        }
    }

    /// One evaluation of a state against the current approximation.
    fn eval(&mut self, s: &State) -> bool {
        let node = &self.gc.nodes[s.node];
        let mut vars: BTreeSet<usize> = BTreeSet::new();
        for &ai in &s.atoms {
            vars.extend(self.q[ai].1.iter().copied());
        }
        let mut assign: BTreeMap<usize, Choice> = s.theta.iter().map(|&(v, t)| (v, Choice::Term(t))).collect();
        let free: Vec<usize> = vars.iter().copied().filter(|v| !assign.contains_key(v)).collect();
        // Any bag term, or (when the bag has children) somewhere below it;
        // atoms are checked as soon as all their variables are placed.
        let mut base: Vec<Choice> = (0..node.nterms as u32).map(Choice::Term).collect();
        if !node.children.is_empty() {
            base.push(Choice::Below);
        }
        let cands = vec![base; free.len()];
        self.search(s, 0, &free, &cands, &mut assign)
    }

    fn atom_ok(&self, node: usize, ai: usize, assign: &BTreeMap<usize, Choice>) -> Option<bool> {
        let (p, args) = &self.q[ai];
        let mut row = Vec::with_capacity(args.len());
        for v in args {
            match assign.get(v) {
                Some(Choice::Term(t)) => row.push(*t),
                Some(Choice::Below) => return Some(true),
                None => return None,
            }
        }
        Some(self.gc.nodes[node].closure.contains(&(*p, row)))
    }

    fn search(
        &mut self,
        s: &State,
        i: usize,
        free: &[usize],
        cands: &[Vec<Choice>],
        assign: &mut BTreeMap<usize, Choice>,
    ) -> bool {
        if i == free.len() {
            if s.atoms.iter().any(|&ai| self.atom_ok(s.node, ai, assign) == Some(false)) {
                return false;
            }
            return self.check_below(s, assign);
        }
        let v = free[i];
        for &c in &cands[i] {
            assign.insert(v, c);
            let ok = s.atoms.iter().all(|&ai| !self.q[ai].1.contains(&v) || self.atom_ok(s.node, ai, assign) != Some(false));
            if ok && self.search(s, i + 1, free, cands, assign) {
                assign.remove(&v);
                return true;
            }
        }
        assign.remove(&v);
        false
    }

    /// Delegate every connected group of below-atoms to some child.
    fn check_below(&mut self, s: &State, assign: &BTreeMap<usize, Choice>) -> bool {
        let below: Vec<usize> = s
            .atoms
            .iter()
            .copied()
            .filter(|&ai| self.q[ai].1.iter().any(|v| assign.get(v) == Some(&Choice::Below)))
            .collect();
        if below.is_empty() {
            return true;
        }
        // Group atoms sharing below-variables.
        let mut group: Vec<usize> = (0..below.len()).collect();
        fn find(g: &mut Vec<usize>, x: usize) -> usize {
            if g[x] != x {
                let r = find(g, g[x]);
                g[x] = r;
            }
            g[x]
        }
        for i in 0..below.len() {
            for j in i + 1..below.len() {
                let shares = self.q[below[i]]
                    .1
                    .iter()
                    .any(|v| assign.get(v) == Some(&Choice::Below) && self.q[below[j]].1.contains(v));
                if shares {
                    let (a, b) = (find(&mut group, i), find(&mut group, j));
                    group[a] = b;
                }
            }
        }
        let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &b) in below.iter().enumerate() {
            let r = find(&mut group, i);
            comps.entry(r).or_default().push(b);
        }
        let children = self.gc.nodes[s.node].children.clone();
        'comp: for comp in comps.values() {
            let mut used: BTreeMap<usize, u32> = BTreeMap::new();
            for &ai in comp {
                for v in &self.q[ai].1 {
                    if let Some(Choice::Term(t)) = assign.get(v) {
                        used.insert(*v, *t);
                    }
                }
            }
            for (child, iface) in &children {
                let theta: Option<Vec<(usize, u32)>> = used
                    .iter()
                    .map(|(&v, &t)| iface.iter().position(|&x| x == t).map(|i| (v, i as u32)))
                    .collect();
                let Some(theta) = theta else { continue };
                let mut atoms = comp.clone();
                atoms.sort_unstable();
                if self.lookup(State { node: *child, atoms, theta }) {
                    continue 'comp;
                }
            }
            return false;
        }
        true
    }
}

/// Ground part of `chase(D, Σ)` for guarded Σ: all atoms over `adom(D)`.
pub fn ground_chase(d: &Instance, sigma: &[Tgd]) -> Result<Instance> {
    Ok(GuardedClosure::new(d, sigma)?.ground())
}

/// Certain answers `q(chase(D, Σ))` restricted to tuples over `adom(D)`.
pub fn certain_answers(d: &Instance, sigma: &[Tgd], q: &Ucq) -> Result<BTreeSet<Tuple>> {
    Ok(GuardedClosure::new(d, sigma)?.certain_answers(q))
}

/// Atoms of the chase over the constants of `alpha` (its type, unnormalized).
pub fn atom_type(alpha: &Atom, gc: &GuardedClosure) -> Instance {
    gc.ground().restrict(&alpha.term_names())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chase::{chase, ChaseBudget};
    use crate::model::name;

    #[test]
    fn ground_chase_examples() {
        let d = Instance::from_facts(&[("A", &["a"])]);
        let s1 = vec![
            Tgd::build(&[("A", &["x"])], &[("R", &["x", "y"])]),
            Tgd::build(&[("R", &["x", "y"])], &[("B", &["x"])]),
        ];
        assert_eq!(ground_chase(&d, &s1).unwrap(), Instance::from_facts(&[("A", &["a"]), ("B", &["a"])]));
        let s2 = vec![Tgd::build(&[("A", &["x"])], &[("R", &["x", "y"])])];
        assert_eq!(ground_chase(&d, &s2).unwrap(), d);
    }

    #[test]
    fn deep_entailment_through_recursion() {
        // A(x) -> ∃y R(x,y), A(y); R(x,y), B(y) -> B(x) is not derivable here,
        // but R(x,y),A(y) -> C(x) is, via the child.
        let sigma = vec![
            Tgd::build(&[("A", &["x"])], &[("R", &["x", "y"]), ("A", &["y"])]),
            Tgd::build(&[("R", &["x", "y"]), ("A", &["y"])], &[("C", &["x"])]),
        ];
        let d = Instance::from_facts(&[("A", &["a"])]);
        let gc = GuardedClosure::new(&d, &sigma).unwrap();
        assert!(gc.ground().contains(&Atom::fact("C", &["a"])));
        let q = Cq::build(&["x"], &[("R", &["x", "y"]), ("R", &["y", "z"]), ("C", &["z"])]);
        assert!(gc.entails(&q, &[name("a")]));
        let q = Cq::build(&[], &[("R", &["x", "x"])]);
        assert!(!gc.entails(&q, &[]));
    }

    #[test]
    fn zero_ary_atoms_flow_up() {
        let sigma = vec![
            Tgd::build(&[("A", &["x"])], &[("R", &["x", "y"])]),
            Tgd::build(&[("R", &["x", "y"])], &[("Done", &[])]),
        ];
        let d = Instance::from_facts(&[("A", &["a"])]);
        assert!(ground_chase(&d, &sigma).unwrap().contains(&Atom::fact("Done", &[])));
    }

    #[test]
    fn agrees_with_terminating_chase() {
        let sigma = vec![
            Tgd::build(&[("P", &["x", "y"])], &[("S", &["y", "z"])]),
            Tgd::build(&[("S", &["x", "y"])], &[("T", &["x"])]),
            Tgd::build(&[("T", &["x"]), ("P", &["y", "x"])], &[("U", &["y"])]),
        ];
        let d = Instance::from_facts(&[("P", &["a", "b"]), ("P", &["b", "c"])]);
        let c = chase(&d, &sigma, ChaseBudget::fixpoint());
        assert!(c.terminated);
        assert_eq!(ground_chase(&d, &sigma).unwrap(), c.instance.without_levels().restrict(&d.adom()));
        let q = Ucq::single(Cq::build(&["x"], &[("S", &["x", "y"]), ("T", &["x"])]));
        assert_eq!(certain_answers(&d, &sigma, &q).unwrap(), crate::hom::eval(&q, &c.instance));
    }
}
