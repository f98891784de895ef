//! Bounded search for finite models.
//!
//! A depth-first restricted chase: each violated trigger of a full TGD is
//! repaired by adding its head; a violated trigger of an existential TGD
//! branches over all ways of sending the existential variables to existing
//! elements or to fresh ones (introduced in order, up to a cap). A query,
//! or any other monotone property, that the model must avoid prunes every
//! branch on which it already holds, since further atoms cannot falsify it.

use std::collections::BTreeSet;

use crate::chase::violated_trigger;
use crate::error::Result;
use crate::hom::{Homomorphism, IndexedInstance};
use crate::model::{name, Instance, Name, Term, Tgd, Ucq};

/// Bounds for [`find_finite_model`].
#[derive(Clone, Copy, Debug)]
pub struct FiniteModelOptions {
    /// Maximal number of elements added to the starting instance.
    pub max_new: usize,
    /// Maximal number of search nodes over all rounds.
    pub node_budget: usize,
}

impl Default for FiniteModelOptions {
    fn default() -> Self {
        FiniteModelOptions { max_new: 4, node_budget: 20_000 }
    }
}

/// Outcome of a finite-model search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FiniteSearch {
    /// A model of Σ containing the start instance (and avoiding the query).
    Found(Instance),
    /// Every branch was explored within the element cap: no such model with
    /// at most `max_new` extra elements.
    Exhausted,
    /// The node budget ran out.
    OutOfBudget,
}

struct Search<'a> {
    sigma: &'a [Tgd],
    reject: &'a dyn Fn(&Instance) -> bool,
    prefix: String,
    nodes: usize,
    budget: usize,
    out_of_budget: bool,
}

impl Search<'_> {
    fn dfs(&mut self, mut i: Instance, used_new: usize, max_new: usize) -> Option<Instance> {
        loop {
            self.nodes += 1;
            if self.nodes > self.budget {
                self.out_of_budget = true;
                return None;
            }
            if (self.reject)(&i) {
                return None;
            }
            let Some((ti, h)) = violated_trigger(&i, self.sigma) else { return Some(i) };
            let t = &self.sigma[ti];
            let apply = |h: &Homomorphism, i: &mut Instance| {
                for a in t.head() {
                    i.insert(a.map_terms(|x| h.get(x).cloned().unwrap_or_else(|| x.clone())));
                }
            };
            if t.is_full() {
                apply(&h, &mut i);
                continue;
            }
            let exist: Vec<Name> = t.existentials().iter().cloned().collect();
            let dom: Vec<Name> = i.adom().into_iter().collect();
            let mut choice = vec![0usize; exist.len()];
            // Enumerate images: indices < dom.len() reuse elements, larger
            // ones are fresh elements introduced in order.
            'assign: loop {
                let mut fresh = 0;
                let mut ok = true;
                for &c in &choice {
                    if c >= dom.len() {
                        let k = c - dom.len();
                        if k > fresh {
                            ok = false;
                            break;
                        }
                        if k == fresh {
                            fresh += 1;
                        }
                    }
                }
                if ok && used_new + fresh <= max_new {
                    let mut h2 = h.clone();
                    for (z, &c) in exist.iter().zip(&choice) {
                        let target = if c < dom.len() {
                            dom[c].clone()
                        } else {
                            name(&format!("{}{}", self.prefix, used_new + c - dom.len()))
                        };
                        h2.insert(Term::Var(z.clone()), Term::Const(target));
                    }
                    let mut next = i.clone();
                    apply(&h2, &mut next);
                    if let Some(m) = self.dfs(next, used_new + fresh, max_new) {
                        return Some(m);
                    }
                    if self.out_of_budget {
                        return None;
                    }
                }
                let mut pos = 0;
                while pos < choice.len() {
                    choice[pos] += 1;
                    if choice[pos] < dom.len() + exist.len() {
                        continue 'assign;
                    }
                    choice[pos] = 0;
                    pos += 1;
                }
                return None;
            }
        }
    }
}

/// Search for a finite model of Σ containing `d` with at most
/// `opts.max_new` additional elements, on which `avoid` (a UCQ and a tuple)
/// does not hold. Smaller models are tried first.
pub fn find_finite_model(
    d: &Instance,
    sigma: &[Tgd],
    avoid: Option<(&Ucq, &[Name])>,
    opts: FiniteModelOptions,
) -> Result<FiniteSearch> {
    let reject = |i: &Instance| match avoid {
        None => false,
        Some((q, t)) => IndexedInstance::new(i).holds_ucq(q, t),
    };
    find_finite_model_rejecting(d, sigma, &reject, opts)
}

/// Search for a finite model of Σ containing `d` with at most
/// `opts.max_new` additional elements on which `reject` is false. `reject`
/// must be monotone (once true on an instance, true on every superset), as
/// it prunes whole branches.
pub fn find_finite_model_rejecting(
    d: &Instance,
    sigma: &[Tgd],
    reject: &dyn Fn(&Instance) -> bool,
    opts: FiniteModelOptions,
) -> Result<FiniteSearch> {
    let adom: BTreeSet<Name> = d.adom();
    let mut prefix = String::from("_m");
    while adom.iter().any(|c| c.starts_with(&prefix)) {
        prefix.insert(0, '_');
    }
    let start = d.without_levels();
    let mut s = Search { sigma, reject, prefix, nodes: 0, budget: opts.node_budget, out_of_budget: false };
    for max_new in 0..=opts.max_new {
        if let Some(m) = s.dfs(start.clone(), 0, max_new) {
            return Ok(FiniteSearch::Found(m));
        }
        if s.out_of_budget {
            return Ok(FiniteSearch::OutOfBudget);
        }
    }
    Ok(FiniteSearch::Exhausted)
}

/// Does `d` satisfy every TGD of Σ?
pub fn is_model(d: &Instance, sigma: &[Tgd]) -> bool {
    crate::chase::satisfies(d, sigma)
}
