//! Gaifman graphs, exact treewidth for small graphs, tree decompositions,
//! decomposition-guided CQ evaluation, grid minors and guarded unraveling.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::hom::{HomMode, Homomorphism, IndexedInstance};
use crate::model::{grid_vertex, name, Atom, Cq, Graph, Instance, Name, Term, Tuple};

/// Largest connected component handled by the exact treewidth search.
pub const EXACT_TW_LIMIT: usize = 16;

/// Gaifman graph of an instance: constants, adjacent iff they co-occur.
pub fn gaifman_instance(i: &Instance) -> Graph {
    let mut g = Graph::new();
    for a in i.iter() {
        add_clique(&mut g, &a.term_names().into_iter().collect::<Vec<_>>());
    }
    g
}

/// Gaifman graph of a CQ; with `modulo_answer_vars` only the existential
/// variables are vertices.
pub fn gaifman_cq(q: &Cq, modulo_answer_vars: bool) -> Graph {
    let keep: BTreeSet<Name> = if modulo_answer_vars { q.existential_vars() } else { q.vars() };
    let mut g = Graph::new();
    for v in &keep {
        g.add_vertex(v.clone());
    }
    for a in q.atoms() {
        let vs: Vec<Name> = a.vars().into_iter().filter(|v| keep.contains(v)).collect();
        add_clique(&mut g, &vs);
    }
    g
}

/// Source of a Gaifman graph.
#[derive(Clone, Copy, Debug)]
pub enum GaifmanSource<'a> {
    Instance(&'a Instance),
    Cq(&'a Cq),
}

/// Gaifman graph of an instance or CQ; the answer-variable flag is only
/// meaningful for CQs.
pub fn gaifman(src: GaifmanSource<'_>, modulo_answer_vars: bool) -> Result<Graph> {
    match src {
        GaifmanSource::Instance(_) if modulo_answer_vars => {
            Err(Error::PreconditionViolated("answer variables exist only for queries".into()))
        }
        GaifmanSource::Instance(i) => Ok(gaifman_instance(i)),
        GaifmanSource::Cq(q) => Ok(gaifman_cq(q, modulo_answer_vars)),
    }
}

fn add_clique(g: &mut Graph, vs: &[Name]) {
    for (i, u) in vs.iter().enumerate() {
        g.add_vertex(u.clone());
        for v in &vs[i + 1..] {
            g.add_edge(u.clone(), v.clone());
        }
    }
}

/// A tree decomposition: bags indexed by node, and tree edges between nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub bags: Vec<BTreeSet<Name>>,
    pub edges: Vec<(usize, usize)>,
}

impl TreeDecomposition {
    /// Largest bag size minus one (0 for an empty decomposition).
    pub fn width(&self) -> usize {
        self.bags.iter().map(|b| b.len()).max().unwrap_or(1).saturating_sub(1)
    }

    /// Check the three decomposition conditions plus tree shape.
    pub fn validate(&self, g: &Graph) -> std::result::Result<(), String> {
        let n = self.bags.len();
        if n == 0 {
            return if g.vertices().is_empty() { Ok(()) } else { Err("no bags".into()) };
        }
        if self.edges.len() != n - 1 {
            return Err(format!("{} nodes but {} tree edges", n, self.edges.len()));
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err("tree is not connected".into());
        }
        for v in g.vertices() {
            if !self.bags.iter().any(|b| b.contains(v)) {
                return Err(format!("vertex {v} is in no bag"));
            }
        }
        for (u, v) in g.edges() {
            if !self.bags.iter().any(|b| b.contains(u) && b.contains(v)) {
                return Err(format!("edge {u}-{v} is in no bag"));
            }
        }
        let all: BTreeSet<&Name> = self.bags.iter().flatten().collect();
        for v in all {
            let nodes: Vec<usize> = (0..n).filter(|&i| self.bags[i].contains(v)).collect();
            let mut seen = vec![false; n];
            let mut stack = vec![nodes[0]];
            seen[nodes[0]] = true;
            let mut count = 1;
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if !seen[y] && self.bags[y].contains(v) {
                        seen[y] = true;
                        count += 1;
                        stack.push(y);
                    }
                }
            }
            if count != nodes.len() {
                return Err(format!("bags containing {v} are not connected"));
            }
        }
        Ok(())
    }

    /// Contract tree edges whose one endpoint's bag is contained in the other's.
    pub fn simplify(&mut self) {
        loop {
            let Some(pos) = self.edges.iter().position(|&(a, b)| {
                self.bags[a].is_subset(&self.bags[b]) || self.bags[b].is_subset(&self.bags[a])
            }) else {
                return;
            };
            let (a, b) = self.edges.remove(pos);
            let (keep, gone) = if self.bags[a].is_subset(&self.bags[b]) { (b, a) } else { (a, b) };
            for e in self.edges.iter_mut() {
                if e.0 == gone {
                    e.0 = keep;
                }
                if e.1 == gone {
                    e.1 = keep;
                }
            }
            // Move the last node into the freed slot.
            let last = self.bags.len() - 1;
            self.bags.swap_remove(gone);
            if gone != last {
                for e in self.edges.iter_mut() {
                    if e.0 == last {
                        e.0 = gone;
                    }
                    if e.1 == last {
                        e.1 = gone;
                    }
                }
            }
        }
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.bags.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

impl fmt::Display for TreeDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.bags.iter().enumerate() {
            write!(f, "bag {i}:")?;
            for v in b {
                write!(f, " {v}")?;
            }
            writeln!(f)?;
        }
        for (a, b) in &self.edges {
            writeln!(f, "edge {a} {b}")?;
        }
        Ok(())
    }
}

/// Connected components of a graph as vertex sets, in vertex order.
pub fn components(g: &Graph) -> Vec<BTreeSet<Name>> {
    let mut seen: BTreeSet<Name> = BTreeSet::new();
    let mut out = Vec::new();
    let adj = adjacency_map(g);
    for v in g.vertices() {
        if seen.contains(v) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![v.clone()];
        seen.insert(v.clone());
        while let Some(x) = stack.pop() {
            for y in &adj[&x] {
                if seen.insert(y.clone()) {
                    stack.push(y.clone());
                }
            }
            comp.insert(x);
        }
        out.push(comp);
    }
    out
}

fn adjacency_map(g: &Graph) -> BTreeMap<Name, BTreeSet<Name>> {
    let mut adj: BTreeMap<Name, BTreeSet<Name>> = g.vertices().iter().map(|v| (v.clone(), BTreeSet::new())).collect();
    for (u, v) in g.edges() {
        adj.get_mut(u).unwrap().insert(v.clone());
        adj.get_mut(v).unwrap().insert(u.clone());
    }
    adj
}

/// Bitmask view of a small graph.
struct Small {
    names: Vec<Name>,
    adj: Vec<u32>,
}

impl Small {
    fn new(g: &Graph, vertices: &BTreeSet<Name>) -> Small {
        let names: Vec<Name> = vertices.iter().cloned().collect();
        let idx: HashMap<&Name, usize> = names.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut adj = vec![0u32; names.len()];
        for (u, v) in g.edges() {
            if let (Some(&a), Some(&b)) = (idx.get(u), idx.get(v)) {
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
        }
        Small { names, adj }
    }

    /// Vertices outside `s ∪ {v}` reachable from `v` through `s`: the
    /// neighbourhood of `v` after eliminating `s`.
    fn q(&self, s: u32, v: usize) -> u32 {
        let mut visited = 1u32 << v;
        let mut frontier = 1u32 << v;
        let mut out = 0u32;
        while frontier != 0 {
            let x = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let nb = self.adj[x] & !visited;
            visited |= nb;
            out |= nb & !s;
            frontier |= nb & s;
        }
        out
    }

    /// An elimination order of width ≤ k, if any.
    fn order(&self, k: usize) -> Option<Vec<usize>> {
        let n = self.names.len();
        let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        let mut failed: HashSet<u32> = HashSet::new();
        let mut order = Vec::new();
        if self.dfs(0, full, k, &mut failed, &mut order) {
            Some(order)
        } else {
            None
        }
    }

    fn dfs(&self, s: u32, full: u32, k: usize, failed: &mut HashSet<u32>, order: &mut Vec<usize>) -> bool {
        let rest = full & !s;
        if rest.count_ones() as usize <= k + 1 {
            let mut r = rest;
            while r != 0 {
                order.push(r.trailing_zeros() as usize);
                r &= r - 1;
            }
            return true;
        }
        if failed.contains(&s) {
            return false;
        }
        let mut r = rest;
        while r != 0 {
            let v = r.trailing_zeros() as usize;
            r &= r - 1;
            if self.q(s, v).count_ones() as usize <= k {
                order.push(v);
                if self.dfs(s | 1 << v, full, k, failed, order) {
                    return true;
                }
                order.pop();
            }
        }
        failed.insert(s);
        false
    }

    /// Decomposition induced by an elimination order.
    fn decomposition(&self, order: &[usize]) -> TreeDecomposition {
        let n = order.len();
        let pos: HashMap<usize, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut bags = Vec::with_capacity(n);
        let mut edges = Vec::new();
        let mut s = 0u32;
        for (i, &v) in order.iter().enumerate() {
            let q = self.q(s, v);
            let mut bag: BTreeSet<Name> = BTreeSet::new();
            bag.insert(self.names[v].clone());
            let mut parent: Option<usize> = None;
            let mut m = q;
            while m != 0 {
                let u = m.trailing_zeros() as usize;
                m &= m - 1;
                bag.insert(self.names[u].clone());
                let p = pos[&u];
                if parent.is_none_or(|x| p < x) {
                    parent = Some(p);
                }
            }
            bags.push(bag);
            match parent {
                Some(p) => edges.push((i, p)),
                None if i + 1 < n => edges.push((i, i + 1)),
                None => {}
            }
            s |= 1 << v;
        }
        TreeDecomposition { bags, edges }
    }
}

/// A decomposition of width ≤ k, or `None` when the treewidth exceeds k.
/// Exact as long as every connected component has at most
/// [`EXACT_TW_LIMIT`] vertices.
pub fn decide_tw(g: &Graph, k: usize) -> Result<Option<TreeDecomposition>> {
    if k == 0 {
        return Err(Error::PreconditionViolated("k must be at least 1".into()));
    }
    let mut td = TreeDecomposition { bags: Vec::new(), edges: Vec::new() };
    for comp in components(g) {
        if comp.len() > EXACT_TW_LIMIT {
            return Err(Error::SizeLimit(format!(
                "component with {} vertices exceeds the exact limit {EXACT_TW_LIMIT}; use treewidth_bounds",
                comp.len()
            )));
        }
        let small = Small::new(g, &comp);
        let Some(order) = small.order(k) else { return Ok(None) };
        let part = small.decomposition(&order);
        let offset = td.bags.len();
        if offset > 0 {
            td.edges.push((0, offset));
        }
        td.bags.extend(part.bags);
        td.edges.extend(part.edges.into_iter().map(|(a, b)| (a + offset, b + offset)));
    }
    if td.bags.is_empty() {
        td.bags.push(BTreeSet::new());
    }
    td.simplify();
    debug_assert_eq!(td.validate(g), Ok(()));
    Ok(Some(td))
}

/// Exact treewidth with the convention that edgeless graphs have width 1.
pub fn treewidth(g: &Graph) -> Result<usize> {
    let (lower, _) = treewidth_bounds(g);
    let mut k = lower.max(1);
    loop {
        if decide_tw(g, k)?.is_some() {
            return Ok(k);
        }
        k += 1;
    }
}

/// Interval `[degeneracy, min-degree elimination width]` containing the
/// treewidth; usable on graphs of any size.
pub fn treewidth_bounds(g: &Graph) -> (usize, usize) {
    let mut adj = adjacency_map(g);
    // Degeneracy: repeatedly delete a minimum-degree vertex.
    let mut lower = 0;
    let mut work = adj.clone();
    while let Some(v) = work.iter().min_by_key(|(v, n)| (n.len(), (*v).clone())).map(|(v, _)| v.clone()) {
        let nb = work.remove(&v).unwrap();
        lower = lower.max(nb.len());
        for u in nb {
            work.get_mut(&u).unwrap().remove(&v);
        }
    }
    // Min-degree elimination: eliminate and turn the neighbourhood into a clique.
    let mut upper = 0;
    while let Some(v) = adj.iter().min_by_key(|(v, n)| (n.len(), (*v).clone())).map(|(v, _)| v.clone()) {
        let nb = adj.remove(&v).unwrap();
        upper = upper.max(nb.len());
        for u in &nb {
            let e = adj.get_mut(u).unwrap();
            e.remove(&v);
            e.extend(nb.iter().filter(|w| *w != u).cloned());
        }
    }
    (lower.max(1), upper.max(1))
}

/// Treewidth of a CQ: that of the Gaifman graph on its existential
/// variables, and 1 when that graph has no edges.
pub fn cq_treewidth(q: &Cq) -> Result<usize> {
    treewidth(&gaifman_cq(q, true))
}

/// Is `cq_treewidth(q) ≤ k`? Cheaper than computing the width.
pub fn cq_has_treewidth_at_most(q: &Cq, k: usize) -> Result<bool> {
    Ok(decide_tw(&gaifman_cq(q, true), k.max(1))?.is_some())
}

/// Evaluate a CQ by dynamic programming over a tree decomposition of width
/// ≤ k of its existential part, with the answer variables added to every bag.
pub fn eval_bounded_tw(q: &Cq, instance: &Instance, k: usize) -> Result<BTreeSet<Tuple>> {
    let g = gaifman_cq(q, true);
    let td = decide_tw(&g, k.max(1))?.ok_or(Error::WidthExceeded { k })?;
    let mut out = BTreeSet::new();
    if q.is_empty() {
        out.insert(Vec::new());
        return Ok(out);
    }
    let answer: BTreeSet<Name> = q.answer().iter().cloned().collect();
    let bags: Vec<Vec<Name>> = td.bags.iter().map(|b| b.union(&answer).cloned().collect()).collect();
    let ix = IndexedInstance::new(instance);

    // Candidate values per variable: intersection of the matching columns.
    let mut domain: BTreeMap<Name, BTreeSet<Name>> = BTreeMap::new();
    for a in q.atoms() {
        let rows: Vec<Homomorphism> = ix.homs(std::slice::from_ref(a), &Homomorphism::new(), HomMode::All).homs;
        for v in a.vars() {
            let col: BTreeSet<Name> = rows.iter().map(|h| h[&Term::Var(v.clone())].name().clone()).collect();
            domain.entry(v).and_modify(|d| *d = d.intersection(&col).cloned().collect()).or_insert(col);
        }
    }

    // Bag relations.
    let mut rels: Vec<HashSet<Vec<Name>>> = Vec::with_capacity(bags.len());
    for bag in &bags {
        let bag_set: BTreeSet<&Name> = bag.iter().collect();
        let covered: Vec<Atom> =
            q.atoms().iter().filter(|a| a.vars().iter().all(|v| bag_set.contains(v))).cloned().collect();
        let mut partial: Vec<Homomorphism> = if covered.is_empty() {
            vec![Homomorphism::new()]
        } else {
            ix.homs(&covered, &Homomorphism::new(), HomMode::All).homs
        };
        for v in bag {
            let key = Term::Var(v.clone());
            if partial.first().is_some_and(|h| h.contains_key(&key)) {
                continue;
            }
            let dom = domain.get(v).cloned().unwrap_or_default();
            partial = partial
                .into_iter()
                .flat_map(|h| {
                    dom.iter().map(move |c| {
                        let mut h = h.clone();
                        h.insert(Term::Var(v.clone()), Term::Const(c.clone()));
                        h
                    })
                })
                .collect();
        }
        rels.push(partial.into_iter().map(|h| bag.iter().map(|v| h[&Term::Var(v.clone())].name().clone()).collect()).collect());
    }

    // Bottom-up semijoins towards node 0.
    let adj = td.adjacency();
    let mut order = Vec::new();
    let mut parent = vec![usize::MAX; bags.len()];
    let mut stack = vec![0usize];
    let mut seen = vec![false; bags.len()];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        order.push(x);
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                parent[y] = x;
                stack.push(y);
            }
        }
    }
    for &child in order.iter().rev() {
        let p = parent[child];
        if p == usize::MAX {
            continue;
        }
        let shared: Vec<(usize, usize)> = bags[p]
            .iter()
            .enumerate()
            .filter_map(|(i, v)| bags[child].iter().position(|w| w == v).map(|j| (i, j)))
            .collect();
        let keys: HashSet<Vec<Name>> = rels[child].iter().map(|r| shared.iter().map(|&(_, j)| r[j].clone()).collect()).collect();
        let kept: HashSet<Vec<Name>> = rels[p]
            .iter()
            .filter(|r| keys.contains(&shared.iter().map(|&(i, _)| r[i].clone()).collect::<Vec<_>>()))
            .cloned()
            .collect();
        rels[p] = kept;
    }
    let pos: Vec<usize> = q.answer().iter().map(|x| bags[0].iter().position(|v| v == x).unwrap()).collect();
    for r in &rels[0] {
        out.insert(pos.iter().map(|&i| r[i].clone()).collect());
    }
    Ok(out)
}

/// A minor map of the `rows × cols` grid into a graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinorMap {
    pub rows: usize,
    pub cols: usize,
    /// Grid vertex (named as in [`Graph::grid`]) to its branch set.
    pub map: BTreeMap<Name, BTreeSet<Name>>,
    pub onto: bool,
}

impl MinorMap {
    /// Check nonempty connected disjoint branch sets and the edge condition.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        let grid = Graph::grid(self.rows, self.cols);
        let bad = |m: String| Err(Error::InvalidMinorMap(m));
        let mut used: BTreeSet<&Name> = BTreeSet::new();
        for v in grid.vertices() {
            let Some(set) = self.map.get(v) else { return bad(format!("grid vertex {v} unmapped")) };
            if set.is_empty() {
                return bad(format!("branch set of {v} is empty"));
            }
            if let Some(x) = set.iter().find(|x| !g.vertices().contains(*x)) {
                return bad(format!("{x} is not a graph vertex"));
            }
            if components(&g.induced(set)).len() != 1 {
                return bad(format!("branch set of {v} is not connected"));
            }
            for x in set {
                if !used.insert(x) {
                    return bad(format!("{x} appears in two branch sets"));
                }
            }
        }
        for (u, v) in grid.edges() {
            let (a, b) = (&self.map[u], &self.map[v]);
            if !a.iter().any(|x| b.iter().any(|y| g.has_edge(x, y))) {
                return bad(format!("no graph edge between branch sets of {u} and {v}"));
            }
        }
        if self.onto && used.len() != g.vertices().len() {
            return bad("map flagged onto but misses vertices".into());
        }
        Ok(())
    }
}

/// Search for a grid minor; with `onto`, branch sets are grown to cover a
/// connected graph. Brute force, limited to `rows·cols ≤ 9`.
pub fn grid_minor(g: &Graph, rows: usize, cols: usize, onto: bool) -> Result<Option<MinorMap>> {
    if rows * cols > 9 {
        return Err(Error::SizeLimit(format!("{rows}x{cols} grid exceeds the 9-cell brute-force regime")));
    }
    if g.vertices().len() > 64 {
        return Err(Error::SizeLimit("graph has more than 64 vertices".into()));
    }
    let names: Vec<Name> = g.vertices().iter().cloned().collect();
    let idx: HashMap<&Name, usize> = names.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut adj = vec![0u64; names.len()];
    for (u, v) in g.edges() {
        adj[idx[u]] |= 1 << idx[v];
        adj[idx[v]] |= 1 << idx[u];
    }
    let cells = rows * cols;
    if cells == 0 || names.len() < cells {
        return Ok(None);
    }
    let all: u64 = if names.len() == 64 { u64::MAX } else { (1u64 << names.len()) - 1 };
    let search = MinorSearch { adj: &adj, rows, cols, all };
    let mut found = None;
    for max_size in 1..=names.len() - cells + 1 {
        let mut sets = Vec::with_capacity(cells);
        if search.place(0, 0, max_size, &mut sets) {
            found = Some(sets);
            break;
        }
    }
    let Some(mut sets) = found else { return Ok(None) };
    let mut covered = sets.iter().fold(0u64, |acc, s| acc | s);
    if onto {
        loop {
            let mut grew = false;
            for s in sets.iter_mut() {
                let nb = neighbourhood(&adj, *s) & !covered;
                if nb != 0 {
                    *s |= nb;
                    covered |= nb;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
    }
    let to_names = |m: u64| -> BTreeSet<Name> { (0..names.len()).filter(|i| m >> i & 1 == 1).map(|i| names[i].clone()).collect() };
    let mut map = BTreeMap::new();
    for r in 0..rows {
        for c in 0..cols {
            map.insert(grid_vertex(r + 1, c + 1), to_names(sets[r * cols + c]));
        }
    }
    let mm = MinorMap { rows, cols, map, onto: covered == all };
    mm.validate(g)?;
    Ok(Some(mm))
}

fn neighbourhood(adj: &[u64], s: u64) -> u64 {
    let mut out = 0;
    let mut m = s;
    while m != 0 {
        out |= adj[m.trailing_zeros() as usize];
        m &= m - 1;
    }
    out & !s
}

struct MinorSearch<'a> {
    adj: &'a [u64],
    rows: usize,
    cols: usize,
    all: u64,
}

impl MinorSearch<'_> {
    fn place(&self, cell: usize, used: u64, max_size: usize, sets: &mut Vec<u64>) -> bool {
        if cell == self.rows * self.cols {
            return true;
        }
        let (r, c) = (cell / self.cols, cell % self.cols);
        let mut must_touch: Vec<u64> = Vec::new();
        if r > 0 {
            must_touch.push(sets[cell - self.cols]);
        }
        if c > 0 {
            must_touch.push(sets[cell - 1]);
        }
        let free = self.all & !used;
        let remaining_cells = (self.rows * self.cols - cell - 1) as u32;
        let seeds = match must_touch.first() {
            Some(&s) => neighbourhood(self.adj, s) & free,
            None => free,
        };
        for set in self.connected_sets(seeds, free, max_size) {
            if (free & !set).count_ones() < remaining_cells {
                continue;
            }
            if must_touch.iter().all(|&t| neighbourhood(self.adj, t) & set != 0) {
                sets.push(set);
                if self.place(cell + 1, used | set, max_size, sets) {
                    return true;
                }
                sets.pop();
            }
        }
        false
    }

    /// Connected subsets of `free` with at most `max_size` vertices that
    /// contain a seed, smallest first.
    fn connected_sets(&self, seeds: u64, free: u64, max_size: usize) -> Vec<u64> {
        let mut seen: HashSet<u64> = HashSet::new();
        let mut layer: Vec<u64> = Vec::new();
        let mut m = seeds;
        while m != 0 {
            let v = m.trailing_zeros();
            m &= m - 1;
            let s = 1u64 << v;
            seen.insert(s);
            layer.push(s);
        }
        let mut out = layer.clone();
        for _ in 1..max_size {
            let mut next = Vec::new();
            for &s in &layer {
                let mut ext = neighbourhood(self.adj, s) & free;
                while ext != 0 {
                    let v = ext.trailing_zeros();
                    ext &= ext - 1;
                    let t = s | 1u64 << v;
                    if seen.insert(t) {
                        next.push(t);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            out.extend(&next);
            layer = next;
        }
        out
    }
}

/// Finite prefix of the guarded unraveling with the copy-to-original map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unraveling {
    pub instance: Instance,
    /// `b ↦ b↑`: every constant of the unraveling to its original.
    pub up: BTreeMap<Name, Name>,
}

/// Guarded unraveling of `d` at the guarded tuple `a`, following sequences
/// of overlapping guarded sets up to `depth` steps. Fresh copies of `c` are
/// named `c_u<n>`; identical consecutive sets add nothing and are skipped.
pub fn guarded_unravel(d: &Instance, a: &[Name], depth: usize) -> Result<Unraveling> {
    let root: BTreeSet<Name> = a.iter().cloned().collect();
    if !root.is_empty() && !d.iter().any(|at| root.is_subset(&at.term_names())) {
        return Err(Error::NotGuardedTuple(a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")));
    }
    // All nonempty guarded sets.
    let mut guarded: BTreeSet<BTreeSet<Name>> = BTreeSet::new();
    for at in d.iter() {
        let ts: Vec<Name> = at.term_names().into_iter().collect();
        for mask in 1u32..(1u32 << ts.len()) {
            guarded.insert((0..ts.len()).filter(|i| mask >> i & 1 == 1).map(|i| ts[i].clone()).collect());
        }
    }
    let used: BTreeSet<Name> = d.adom();
    let mut counter = 0usize;
    let mut fresh = |orig: &Name| -> Name {
        loop {
            counter += 1;
            let n = name(&format!("{orig}_u{counter}"));
            if !used.contains(&n) {
                return n;
            }
        }
    };
    let mut instance = d.restrict(&root).without_levels();
    let mut up: BTreeMap<Name, Name> = root.iter().map(|x| (x.clone(), x.clone())).collect();
    // Each node: its guarded set and the iso from originals to its own constants.
    let mut frontier: VecDeque<(BTreeSet<Name>, BTreeMap<Name, Name>, usize)> = VecDeque::new();
    frontier.push_back((root.clone(), root.iter().map(|x| (x.clone(), x.clone())).collect(), 0));
    while let Some((set, iso, len)) = frontier.pop_front() {
        if len == depth {
            continue;
        }
        for next in &guarded {
            if next == &set || next.is_disjoint(&set) {
                continue;
            }
            let mut child: BTreeMap<Name, Name> = BTreeMap::new();
            for x in next {
                let img = if set.contains(x) { iso[x].clone() } else { fresh(x) };
                up.insert(img.clone(), x.clone());
                child.insert(x.clone(), img);
            }
            for at in d.restrict(next).iter() {
                instance.insert(at.map_terms(|t| Term::Const(child[t.name()].clone())));
            }
            frontier.push_back((next.clone(), child, len + 1));
        }
    }
    Ok(Unraveling { instance, up })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hom::instance_hom;

    #[test]
    fn gaifman_examples() {
        let g = gaifman_instance(&Instance::from_facts(&[("R", &["a", "b", "c"])]));
        assert_eq!(g.edges().len(), 3);
        let g = gaifman_instance(&Instance::from_facts(&[("S", &["a"])]));
        assert_eq!((g.vertices().len(), g.edges().len()), (1, 0));
        assert!(gaifman(GaifmanSource::Instance(&Instance::new()), true).is_err());
    }

    #[test]
    fn small_treewidths() {
        assert_eq!(treewidth(&Graph::from_edges(&[("a", "b")])).unwrap(), 1);
        assert!(decide_tw(&Graph::complete(4), 2).unwrap().is_none());
        let td = decide_tw(&Graph::complete(4), 3).unwrap().unwrap();
        assert_eq!(td.bags.len(), 1);
        assert!(decide_tw(&Graph::grid(3, 3), 2).unwrap().is_none());
        assert_eq!(treewidth(&Graph::grid(3, 3)).unwrap(), 3);
        assert_eq!(treewidth(&Graph::new()).unwrap(), 1);
    }

    #[test]
    fn cq_widths() {
        assert_eq!(cq_treewidth(&Cq::build(&["x", "y"], &[("R", &["x", "y"])])).unwrap(), 1);
        let tri = Cq::build(&[], &[("E", &["x", "y"]), ("E", &["y", "z"]), ("E", &["z", "x"])]);
        assert_eq!(cq_treewidth(&tri).unwrap(), 2);
    }

    #[test]
    fn bounded_eval_matches_backtracking() {
        let q = Cq::build(&["x"], &[("E", &["x", "y"]), ("E", &["y", "z"]), ("E", &["z", "w"])]);
        let i = Instance::from_facts(&[("E", &["a", "b"]), ("E", &["b", "c"]), ("E", &["c", "d"]), ("E", &["d", "a"]), ("E", &["e", "a"])]);
        assert_eq!(eval_bounded_tw(&q, &i, 1).unwrap(), crate::hom::eval_cq(&q, &i));
        let tri = Cq::build(&[], &[("E", &["x", "y"]), ("E", &["y", "z"]), ("E", &["z", "x"])]);
        assert_eq!(eval_bounded_tw(&tri, &i, 1), Err(Error::WidthExceeded { k: 1 }));
    }

    #[test]
    fn grid_minors() {
        assert!(grid_minor(&Graph::complete(4), 2, 2, false).unwrap().is_some());
        let tree = Graph::from_edges(&[("a", "b"), ("b", "c"), ("b", "d"), ("d", "e")]);
        assert!(grid_minor(&tree, 2, 2, false).unwrap().is_none());
        let c4 = Graph::from_edges(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")]);
        let m = grid_minor(&c4, 2, 2, true).unwrap().unwrap();
        assert!(m.onto);
        let c6 = Graph::from_edges(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("e", "f"), ("f", "a")]);
        let m = grid_minor(&c6, 2, 2, true).unwrap().unwrap();
        assert!(m.onto && m.validate(&c6).is_ok());
        assert!(grid_minor(&Graph::grid(3, 3), 3, 3, false).unwrap().is_some());
        assert!(grid_minor(&Graph::grid(3, 4), 4, 3, false).is_err());
    }

    #[test]
    fn unraveling() {
        let d = Instance::from_facts(&[("E", &["a", "b"]), ("E", &["b", "a"])]);
        let ab = [name("a"), name("b")];
        let u0 = guarded_unravel(&d, &ab, 0).unwrap();
        assert_eq!(u0.instance, d);
        let u2 = guarded_unravel(&d, &ab, 2).unwrap();
        let back: Instance = u2.instance.iter().map(|a| a.map_terms(|t| Term::Const(u2.up[t.name()].clone()))).collect();
        assert!(back.is_subset(&d));
        assert!(u2.instance.len() > d.len());
        let path = Instance::from_facts(&[("E", &["a", "b"]), ("E", &["b", "c"])]);
        let u = guarded_unravel(&path, &ab, 3).unwrap();
        let keep: BTreeSet<Name> = ab.iter().cloned().collect();
        assert!(instance_hom(&u.instance, &path, &keep).is_some());
        assert!(instance_hom(&path, &u.instance, &keep).is_some());
        assert!(guarded_unravel(&path, &[name("a"), name("c")], 1).is_err());
    }
}
