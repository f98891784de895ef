//! Brute-force oracles, written independently of the library algorithms.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use gtgd_core::{Atom, Graph, Instance, Name, Term, Tgd};

/// Naive homomorphism search from `source` atoms (variables and constants;
/// constants listed in `pinned` must map to themselves, all other terms are
/// free) into `target`, atom by atom in the given order.
pub fn naive_hom(source: &[Atom], target: &Instance, pinned: &BTreeSet<Name>) -> Option<BTreeMap<Term, Name>> {
    fn go(
        source: &[Atom],
        idx: usize,
        by_pred: &BTreeMap<&str, Vec<&Atom>>,
        pinned: &BTreeSet<Name>,
        h: &mut BTreeMap<Term, Name>,
    ) -> bool {
        if idx == source.len() {
            return true;
        }
        let a = &source[idx];
        let Some(cands) = by_pred.get(a.pred.as_ref()) else { return false };
        for f in cands {
            if f.args.len() != a.args.len() {
                continue;
            }
            let mut added = Vec::new();
            let mut ok = true;
            for (s, t) in a.args.iter().zip(&f.args) {
                let t = t.name();
                if s.is_const() && pinned.contains(s.name()) {
                    if s.name() != t {
                        ok = false;
                        break;
                    }
                    continue;
                }
                match h.get(s) {
                    Some(prev) if prev != t => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        h.insert(s.clone(), t.clone());
                        added.push(s.clone());
                    }
                }
            }
            if ok && go(source, idx + 1, by_pred, pinned, h) {
                return true;
            }
            for s in added {
                h.remove(&s);
            }
        }
        false
    }
    let mut by_pred: BTreeMap<&str, Vec<&Atom>> = BTreeMap::new();
    for f in target.iter() {
        by_pred.entry(f.pred.as_ref()).or_default().push(f);
    }
    // Greedy order: prefer atoms sharing terms with earlier ones, then
    // atoms with few candidate facts.
    let mut rest: Vec<Atom> = source.to_vec();
    let mut order: Vec<Atom> = Vec::new();
    let mut bound: BTreeSet<Term> = BTreeSet::new();
    while !rest.is_empty() {
        let best = (0..rest.len())
            .max_by_key(|&i| {
                let a = &rest[i];
                let shared = a.args.iter().filter(|t| bound.contains(*t)).count();
                let cands = by_pred.get(a.pred.as_ref()).map_or(0, |v| v.len());
                (shared, std::cmp::Reverse(cands))
            })
            .unwrap();
        let a = rest.swap_remove(best);
        bound.extend(a.args.iter().cloned());
        order.push(a);
    }
    let mut h = BTreeMap::new();
    go(&order, 0, &by_pred, pinned, &mut h).then_some(h)
}

/// Does the Boolean pattern (variables only) map into `target`?
pub fn naive_holds(pattern: &[Atom], target: &Instance) -> bool {
    naive_hom(pattern, target, &BTreeSet::new()).is_some()
}

/// Does `g` contain a clique of `size` vertices? Subset enumeration.
pub fn brute_clique(g: &Graph, size: usize) -> bool {
    let vs: Vec<&Name> = g.vertices().iter().collect();
    let n = vs.len();
    (0u32..(1 << n)).any(|mask| {
        mask.count_ones() as usize == size
            && (0..n).all(|i| {
                mask >> i & 1 == 0 || (i + 1..n).all(|j| mask >> j & 1 == 0 || g.has_edge(vs[i], vs[j]))
            })
    })
}

/// One representative per isomorphism class of graphs on `n` vertices
/// (`v1..vn`), by minimising the edge bitmask over all permutations.
pub fn graphs_up_to_iso(n: usize) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let perms = permutations(n);
    let pair_index = |i: usize, j: usize| -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        pairs.iter().position(|&p| p == (a, b)).unwrap()
    };
    // Precompute the pair permutation induced by each vertex permutation.
    let induced: Vec<Vec<usize>> = perms.iter().map(|p| pairs.iter().map(|&(i, j)| pair_index(p[i], p[j])).collect()).collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let canon = induced
            .iter()
            .map(|ip| ip.iter().enumerate().filter(|(e, _)| mask >> e & 1 == 1).fold(0u32, |acc, (_, &t)| acc | 1 << t))
            .min()
            .unwrap();
        if seen.insert(canon) {
            let mut g = Graph::new();
            for i in 0..n {
                g.add_vertex(gtgd_core::name(&format!("v{}", i + 1)));
            }
            for (e, &(i, j)) in pairs.iter().enumerate() {
                if canon >> e & 1 == 1 {
                    g.add_edge(gtgd_core::name(&format!("v{}", i + 1)), gtgd_core::name(&format!("v{}", j + 1)));
                }
            }
            out.push(g);
        }
    }
    out
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Treewidth as the minimum over all elimination orders of the largest
/// neighbourhood at elimination time, with fill-in; edgeless graphs count
/// as width 1.
pub fn elimination_treewidth(g: &Graph) -> usize {
    let vs: Vec<&Name> = g.vertices().iter().collect();
    let n = vs.len();
    let mut adj = vec![0u32; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && g.has_edge(vs[i], vs[j]) {
                adj[i] |= 1 << j;
            }
        }
    }
    let mut best = usize::MAX;
    for order in permutations(n) {
        let mut a = adj.clone();
        let mut width = 0;
        let mut gone = 0u32;
        for &v in &order {
            let nb = a[v] & !gone;
            width = width.max(nb.count_ones() as usize);
            if width >= best {
                break;
            }
            for (u, au) in a.iter_mut().enumerate() {
                if nb >> u & 1 == 1 {
                    *au |= nb & !(1 << u);
                }
            }
            gone |= 1 << v;
        }
        best = best.min(width);
    }
    best.max(1)
}

/// Naive fixpoint of full TGDs: repeatedly add the head of every body
/// match until nothing changes.
pub fn naive_full_closure(d: &Instance, sigma: &[Tgd]) -> Instance {
    let mut cur = d.clone();
    loop {
        let mut added = Vec::new();
        for t in sigma {
            let body: Vec<Atom> = t.body().to_vec();
            for h in all_matches(&body, &cur) {
                for a in t.head() {
                    let f = a.map_terms(|x| Term::Const(h[x].clone()));
                    if !cur.contains(&f) {
                        added.push(f);
                    }
                }
            }
        }
        if added.is_empty() {
            return cur;
        }
        for f in added {
            cur.insert(f);
        }
    }
}

/// Every match of variable-only `body` atoms in `target`.
pub fn all_matches(body: &[Atom], target: &Instance) -> Vec<BTreeMap<Term, Name>> {
    let mut out = vec![BTreeMap::new()];
    for a in body {
        let mut next = Vec::new();
        for h in &out {
            for f in target.iter().filter(|f| f.pred == a.pred && f.args.len() == a.args.len()) {
                let mut h2: BTreeMap<Term, Name> = h.clone();
                let ok = a.args.iter().zip(&f.args).all(|(s, t)| match h2.get(s) {
                    Some(prev) => prev == t.name(),
                    None => {
                        h2.insert(s.clone(), t.name().clone());
                        true
                    }
                });
                if ok {
                    next.push(h2);
                }
            }
        }
        out = next;
    }
    out
}

/// Does `m` satisfy `t`: every body match extends to a head match?
pub fn naive_satisfies(m: &Instance, sigma: &[Tgd]) -> bool {
    sigma.iter().all(|t| {
        let body: Vec<Atom> = t.body().to_vec();
        all_matches(&body, m).into_iter().all(|h| {
            let pinned: BTreeSet<Name> = h.values().cloned().collect();
            let head: Vec<Atom> = t.head().iter().map(|a| a.map_terms(|x| h.get(x).map_or(x.clone(), |c| Term::Const(c.clone())))).collect();
            naive_hom(&head, m, &pinned).is_some()
        })
    })
}
