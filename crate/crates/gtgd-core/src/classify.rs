//! Syntactic classification of TGDs: guarded, frontier-guarded, linear, full.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{sigma_schema, Atom, Name, Tgd};

/// Classification of a single TGD.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub guarded: bool,
    pub frontier_guarded: bool,
    pub linear: bool,
    pub full: bool,
    pub head_atoms: usize,
    /// First body atom witnessing guardedness, or frontier-guardedness when
    /// the TGD is not guarded; `None` for empty bodies and unguarded TGDs.
    pub guard: Option<Atom>,
}

fn covers(a: &Atom, vars: &std::collections::BTreeSet<Name>) -> bool {
    let own = a.term_names();
    vars.iter().all(|v| own.contains(v))
}

/// Classify one TGD.
pub fn classify(t: &Tgd) -> Classification {
    let body_vars = t.body_vars();
    let frontier = t.frontier();
    let guard_all = t.body().iter().find(|a| covers(a, &body_vars)).cloned();
    let guard_fr = t.body().iter().find(|a| covers(a, &frontier)).cloned();
    let empty = t.body().is_empty();
    let guarded = empty || guard_all.is_some();
    let frontier_guarded = empty || guard_fr.is_some();
    Classification {
        guarded,
        frontier_guarded,
        linear: t.body().len() == 1,
        full: t.is_full(),
        head_atoms: t.head().len(),
        guard: if guarded { guard_all } else { guard_fr },
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut words: Vec<String> = Vec::new();
        if self.linear {
            words.push("linear".into());
        }
        if self.guarded {
            words.push("guarded".into());
        } else if self.frontier_guarded {
            words.push("frontier-guarded".into());
        }
        if self.full {
            words.push("full".into());
        }
        if words.is_empty() {
            words.push("unrestricted".into());
        }
        write!(f, "{} m={}", words.join(" "), self.head_atoms)?;
        if let Some(g) = &self.guard {
            write!(f, " guard={g}")?;
        }
        Ok(())
    }
}

/// Classification of a TGD set: the conjunction of the per-TGD flags, the
/// maximal number of head atoms `m` and the schema arity `r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetClassification {
    pub guarded: bool,
    pub frontier_guarded: bool,
    pub linear: bool,
    pub full: bool,
    pub m: usize,
    pub r: usize,
}

impl SetClassification {
    /// The most specific class name: L, G, FG_m, FULL or TGD.
    pub fn class(&self) -> String {
        if self.linear {
            "L".into()
        } else if self.guarded {
            "G".into()
        } else if self.frontier_guarded {
            format!("FG_{}", self.m)
        } else if self.full {
            "FULL".into()
        } else {
            "TGD".into()
        }
    }
}

impl fmt::Display for SetClassification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut words: Vec<&str> = Vec::new();
        if self.linear {
            words.push("linear");
        }
        if self.guarded {
            words.push("guarded");
        } else if self.frontier_guarded {
            words.push("frontier-guarded");
        }
        if self.full {
            words.push("full");
        }
        if words.is_empty() {
            words.push("TGD");
        }
        write!(f, "{} m={} r={}", words.join(" "), self.m, self.r)
    }
}

pub fn classify_set(sigma: &[Tgd]) -> SetClassification {
    let cs: Vec<Classification> = sigma.iter().map(classify).collect();
    SetClassification {
        guarded: cs.iter().all(|c| c.guarded),
        frontier_guarded: cs.iter().all(|c| c.frontier_guarded),
        linear: cs.iter().all(|c| c.linear),
        full: cs.iter().all(|c| c.full),
        m: cs.iter().map(|c| c.head_atoms).max().unwrap_or(0),
        r: sigma_schema(sigma).map(|s| s.max_arity()).unwrap_or(0),
    }
}

pub fn require_guarded(sigma: &[Tgd]) -> Result<()> {
    match sigma.iter().find(|t| !classify(t).guarded) {
        Some(t) => Err(Error::NotGuarded(t.to_string())),
        None => Ok(()),
    }
}

pub fn require_linear(sigma: &[Tgd]) -> Result<()> {
    match sigma.iter().find(|t| !classify(t).linear) {
        Some(t) => Err(Error::NotLinear(t.to_string())),
        None => Ok(()),
    }
}

/// Frontier-guarded with at most `m` head atoms.
pub fn require_fg_m(sigma: &[Tgd], m: usize) -> Result<()> {
    for t in sigma {
        let c = classify(t);
        if !c.frontier_guarded {
            return Err(Error::NotFrontierGuarded { m, reason: format!("{t} has an unguarded frontier") });
        }
        if c.head_atoms > m {
            return Err(Error::NotFrontierGuarded { m, reason: format!("{t} has {} head atoms", c.head_atoms) });
        }
    }
    Ok(())
}
