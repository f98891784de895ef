//! Enumeration of the minimal sets satisfying a monotone predicate.
//!
//! Uses the dualization loop: given the minimal sets found so far, every
//! unseen minimal set avoids some minimal transversal of them, so it lies
//! inside the complement of that transversal. Testing each complement and
//! shrinking the true ones enumerates all minimal sets.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub(crate) type Set = BTreeSet<usize>;

fn minimize(mut family: Vec<Set>) -> Vec<Set> {
    family.sort_by_key(|s| s.len());
    family.dedup();
    let mut out: Vec<Set> = Vec::new();
    for s in family {
        if !out.iter().any(|t| t.is_subset(&s)) {
            out.push(s);
        }
    }
    out
}

/// Add one hyperedge to a family of minimal transversals (Berge step).
fn add_edge(trs: &[Set], edge: &Set) -> Vec<Set> {
    let mut next = Vec::new();
    for t in trs {
        if !t.is_disjoint(edge) {
            next.push(t.clone());
        } else {
            for &e in edge {
                let mut u = t.clone();
                u.insert(e);
                next.push(u);
            }
        }
    }
    minimize(next)
}

/// All inclusion-minimal subsets of `0..n` on which the monotone predicate
/// `holds` is true.
pub(crate) fn minimal_true_sets(n: usize, cap: usize, mut holds: impl FnMut(&Set) -> bool) -> Result<Vec<Set>> {
    let full: Set = (0..n).collect();
    if !holds(&full) {
        return Ok(Vec::new());
    }
    let shrink = |mut x: Set, holds: &mut dyn FnMut(&Set) -> bool| {
        for i in x.clone() {
            x.remove(&i);
            if !holds(&x) {
                x.insert(i);
            }
        }
        x
    };
    let first = shrink(full.clone(), &mut holds);
    let mut found = vec![first.clone()];
    let mut trs = add_edge(&[Set::new()], &first);
    loop {
        let mut advanced = false;
        for t in &trs {
            let x: Set = full.difference(t).copied().collect();
            if holds(&x) {
                let m = shrink(x, &mut holds);
                trs = add_edge(&trs, &m);
                found.push(m);
                advanced = true;
                break;
            }
        }
        if !advanced {
            return Ok(found);
        }
        if found.len() > cap || trs.len() > cap {
            return Err(Error::CapExceeded { what: "minimal set enumeration".into(), cap });
        }
    }
}
