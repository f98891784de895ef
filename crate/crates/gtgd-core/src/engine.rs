//! Integer-coded homomorphism search shared by the higher-level engines.
//!
//! Atoms are stored per predicate with one hash index per argument position.
//! The search is a backtracking join that always extends the pattern atom
//! with the fewest candidate rows given the current bindings (atoms whose
//! arguments are all bound are checked immediately).

use std::collections::{HashMap, HashSet};

use crate::model::Name;

pub(crate) type Sym = u32;

/// Bidirectional map between names and dense integer symbols.
#[derive(Clone, Debug, Default)]
pub(crate) struct Interner {
    map: HashMap<Name, Sym>,
    names: Vec<Name>,
}

impl Interner {
    pub fn intern(&mut self, n: &Name) -> Sym {
        if let Some(&s) = self.map.get(n) {
            return s;
        }
        let s = self.names.len() as Sym;
        self.map.insert(n.clone(), s);
        self.names.push(n.clone());
        s
    }

    pub fn get(&self, n: &str) -> Option<Sym> {
        self.map.get(n).copied()
    }

    pub fn name(&self, s: Sym) -> &Name {
        &self.names[s as usize]
    }
}

/// A pattern argument: a search variable or a fixed symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Slot {
    Var(usize),
    Fixed(Sym),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Pat {
    pub pred: Sym,
    pub args: Vec<Slot>,
}

#[derive(Clone, Debug, Default)]
struct Table {
    rows: Vec<Vec<Sym>>,
    set: HashSet<Vec<Sym>>,
    pos: Vec<HashMap<Sym, Vec<u32>>>,
}

/// Indexed set of ground atoms over integer symbols.
#[derive(Clone, Debug, Default)]
pub(crate) struct Store {
    tables: HashMap<Sym, Table>,
    len: usize,
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    /// Insert a row; returns true when it was not present.
    pub fn insert(&mut self, pred: Sym, row: Vec<Sym>) -> bool {
        let t = self.tables.entry(pred).or_default();
        if t.set.contains(&row) {
            return false;
        }
        if t.pos.len() < row.len() {
            t.pos.resize_with(row.len(), HashMap::new);
        }
        let id = t.rows.len() as u32;
        for (i, &s) in row.iter().enumerate() {
            t.pos[i].entry(s).or_default().push(id);
        }
        t.set.insert(row.clone());
        t.rows.push(row);
        self.len += 1;
        true
    }

    pub fn contains(&self, pred: Sym, row: &[Sym]) -> bool {
        self.tables.get(&pred).is_some_and(|t| t.set.contains(row))
    }

    pub fn len(&self) -> usize {
        self.len
    }
}

struct Search<'a, F: FnMut(&[Sym]) -> bool> {
    pats: &'a [Pat],
    store: &'a Store,
    assign: Vec<Option<Sym>>,
    done: Vec<bool>,
    /// Variables to project on; when non-empty, only one extension per
    /// projected binding is reported.
    project: &'a [usize],
    f: F,
}

/// Enumerate all extensions of `init` mapping every pattern into `store`.
///
/// `f` receives the full assignment and returns `false` to stop. When
/// `project` is non-empty, each distinct binding of those variables is
/// reported once, with the remaining variables set to `Sym::MAX`. Returns
/// false iff stopped.
pub(crate) fn search<F: FnMut(&[Sym]) -> bool>(
    pats: &[Pat],
    init: &[Option<Sym>],
    store: &Store,
    project: &[usize],
    f: F,
) -> bool {
    let mut s = Search {
        pats,
        store,
        assign: init.to_vec(),
        done: vec![false; pats.len()],
        project,
        f,
    };
    s.go(false)
}

/// True iff some extension of `init` maps all patterns into `store`.
pub(crate) fn exists(pats: &[Pat], init: &[Option<Sym>], store: &Store) -> bool {
    let mut found = false;
    search(pats, init, store, &[], |_| {
        found = true;
        false
    });
    found
}

impl<'a, F: FnMut(&[Sym]) -> bool> Search<'a, F> {
    fn bound(&self, s: Slot) -> Option<Sym> {
        match s {
            Slot::Fixed(c) => Some(c),
            Slot::Var(v) => self.assign[v],
        }
    }

    /// Candidate row ids (or None = all rows) and their count for pattern `i`.
    fn candidates(&self, i: usize) -> (Option<&'a [u32]>, usize) {
        let p = &self.pats[i];
        let Some(t) = self.store.tables.get(&p.pred) else {
            return (Some(&[]), 0);
        };
        let mut best: Option<&'a [u32]> = None;
        for (k, &s) in p.args.iter().enumerate() {
            if let Some(c) = self.bound(s) {
                let list: &'a [u32] = t.pos.get(k).and_then(|m| m.get(&c)).map(|v| v.as_slice()).unwrap_or(&[]);
                if best.is_none_or(|b| list.len() < b.len()) {
                    best = Some(list);
                }
            }
        }
        match best {
            Some(b) => (Some(b), b.len()),
            None => (None, t.rows.len()),
        }
    }

    fn projection_complete(&self) -> bool {
        !self.project.is_empty() && self.project.iter().all(|&v| self.assign[v].is_some())
    }

    /// Returns false iff the callback asked to stop. In `existence` mode the
    /// return value is inverted: false means "a solution was found".
    fn go(&mut self, existence: bool) -> bool {
        if !existence && self.projection_complete() && self.done.iter().any(|d| !d) {
            // Check that the projected binding extends, then report it once.
            let saved_done = self.done.clone();
            let saved_assign = self.assign.clone();
            let found = !self.go(true);
            self.done = saved_done;
            self.assign = saved_assign;
            if found {
                let partial = self.witness_or_partial();
                return (self.f)(&partial);
            }
            return true;
        }
        // Choose the most constrained remaining pattern.
        let restrict_to_projection = !existence && !self.project.is_empty();
        let mut choice: Option<(usize, usize)> = None;
        for i in 0..self.pats.len() {
            if self.done[i] {
                continue;
            }
            if restrict_to_projection {
                let touches = self.pats[i]
                    .args
                    .iter()
                    .any(|s| matches!(s, Slot::Var(v) if self.project.contains(v) && self.assign[*v].is_none()));
                if !touches {
                    continue;
                }
            }
            let all_bound = self.pats[i].args.iter().all(|&s| self.bound(s).is_some());
            let cost = if all_bound { 0 } else { self.candidates(i).1 + 1 };
            if choice.is_none_or(|(_, c)| cost < c) {
                choice = Some((i, cost));
            }
            if cost == 0 {
                break;
            }
        }
        let Some((i, _)) = choice else {
            if self.done.iter().all(|d| *d) {
                if existence {
                    return false;
                }
                let full = self.witness_or_partial();
                return (self.f)(&full);
            }
            // Remaining patterns do not touch unbound projected variables.
            return self.go(existence);
        };
        let pat = &self.pats[i];
        if pat.args.iter().all(|&s| self.bound(s).is_some()) {
            let row: Vec<Sym> = pat.args.iter().map(|&s| self.bound(s).unwrap()).collect();
            if !self.store.contains(pat.pred, &row) {
                return true;
            }
            self.done[i] = true;
            let r = self.go(existence);
            self.done[i] = false;
            return r;
        }
        let (cands, _) = self.candidates(i);
        let Some(table) = self.store.tables.get(&pat.pred) else {
            return true;
        };
        let n = cands.map(|c| c.len()).unwrap_or(table.rows.len());
        let mut newly: Vec<usize> = Vec::with_capacity(pat.args.len());
        for k in 0..n {
            let rid = match cands {
                Some(c) => c[k] as usize,
                None => k,
            };
            let row = &table.rows[rid];
            if row.len() != pat.args.len() {
                continue;
            }
            newly.clear();
            let mut ok = true;
            for (pos, &s) in pat.args.iter().enumerate() {
                match s {
                    Slot::Fixed(c) => {
                        if c != row[pos] {
                            ok = false;
                            break;
                        }
                    }
                    Slot::Var(v) => match self.assign[v] {
                        Some(c) => {
                            if c != row[pos] {
                                ok = false;
                                break;
                            }
                        }
                        None => {
                            self.assign[v] = Some(row[pos]);
                            newly.push(v);
                        }
                    },
                }
            }
            if ok {
                self.done[i] = true;
                let cont = self.go(existence);
                self.done[i] = false;
                if !cont {
                    for &v in &newly {
                        self.assign[v] = None;
                    }
                    return false;
                }
            }
            for &v in &newly {
                self.assign[v] = None;
            }
        }
        true
    }

    fn witness_or_partial(&self) -> Vec<Sym> {
        self.assign.iter().map(|a| a.unwrap_or(Sym::MAX)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(rows: &[(Sym, &[Sym])]) -> Store {
        let mut s = Store::new();
        for (p, r) in rows {
            s.insert(*p, r.to_vec());
        }
        s
    }

    #[test]
    fn enumerates_all_matches() {
        let s = store(&[(0, &[1, 2]), (0, &[2, 3])]);
        let pats = vec![Pat { pred: 0, args: vec![Slot::Var(0), Slot::Var(1)] }];
        let mut out = Vec::new();
        search(&pats, &[None, None], &s, &[], |a| {
            out.push(a.to_vec());
            true
        });
        assert_eq!(out, vec![vec![1, 2], vec![2, 3]]);
    }

    #[test]
    fn projection_reports_each_binding_once() {
        // Path x -> y -> z with several z per y; project on x.
        let s = store(&[(0, &[1, 2]), (0, &[2, 3]), (0, &[2, 4]), (0, &[3, 4])]);
        let pats = vec![
            Pat { pred: 0, args: vec![Slot::Var(0), Slot::Var(1)] },
            Pat { pred: 0, args: vec![Slot::Var(1), Slot::Var(2)] },
        ];
        let mut xs = Vec::new();
        search(&pats, &[None, None, None], &s, &[0], |a| {
            xs.push(a[0]);
            true
        });
        xs.sort();
        assert_eq!(xs, vec![1, 2]);
    }

    #[test]
    fn fixed_and_repeated_variables() {
        let s = store(&[(0, &[1, 1]), (0, &[1, 2])]);
        let pats = vec![Pat { pred: 0, args: vec![Slot::Var(0), Slot::Var(0)] }];
        assert!(exists(&pats, &[None], &s));
        let pats = vec![Pat { pred: 0, args: vec![Slot::Fixed(2), Slot::Var(0)] }];
        assert!(!exists(&pats, &[None], &s));
    }
}
