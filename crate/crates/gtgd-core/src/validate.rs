//! Structural validation of documents against the type invariants.
//!
//! Validation never fails: every problem is reported as a [`Violation`] with a
//! location, and an empty report means the document is well-formed.

use std::collections::BTreeSet;
use std::fmt;

use crate::model::{Atom, Cq, Cqs, Graph, Instance, Name, Omq, Schema, Tgd, Ucq};

/// A parsed document of one of the supported kinds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Document {
    Tgds(Vec<Tgd>),
    Database(Instance),
    Query(Ucq),
    Omq(Omq),
    Cqs(Cqs),
    Graph(Graph),
}

/// One invariant violation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Default)]
struct Report {
    out: Vec<Violation>,
    arities: Schema,
}

impl Report {
    fn push(&mut self, location: &str, message: String) {
        self.out.push(Violation { location: location.to_string(), message });
    }

    /// Check an atom against the optional external schema and against the
    /// arities seen so far in this document.
    fn atom(&mut self, loc: &str, a: &Atom, schema: Option<&Schema>) {
        if let Some(s) = schema {
            match s.arity(&a.pred) {
                Some(ar) if ar != a.arity() => self.push(loc, format!("arity mismatch {}", a.pred)),
                None => self.push(loc, format!("predicate {} not in schema", a.pred)),
                _ => {}
            }
        }
        if self.arities.declare(&a.pred, a.arity()).is_err() {
            self.push(loc, format!("inconsistent arity for {}", a.pred));
        }
    }
}

/// Validate a document; `schema`, when given, must declare every predicate
/// with its arity.
pub fn validate(doc: &Document, schema: Option<&Schema>) -> Vec<Violation> {
    let mut r = Report::default();
    match doc {
        Document::Database(i) => instance(&mut r, i, schema),
        Document::Query(q) => ucq(&mut r, "query", q, schema),
        Document::Tgds(ts) => tgds(&mut r, ts, schema),
        Document::Omq(o) => {
            tgds(&mut r, &o.sigma, schema);
            ucq(&mut r, "query", &o.query, schema);
            for (p, a) in o.data_schema.iter() {
                if let Some(b) = r.arities.arity(p) {
                    if a != b {
                        r.push("data-schema", format!("arity mismatch {p}"));
                    }
                }
            }
        }
        Document::Cqs(c) => {
            tgds(&mut r, &c.sigma, schema);
            ucq(&mut r, "query", &c.query, schema);
        }
        Document::Graph(g) => {
            for (u, v) in g.edges() {
                if u == v {
                    r.push("graph", format!("self-loop on {u}"));
                }
            }
        }
    }
    r.out
}

fn instance(r: &mut Report, i: &Instance, schema: Option<&Schema>) {
    for a in i.iter() {
        let loc = format!("atom {a}");
        if !a.is_ground() {
            r.push(&loc, "variable in database atom".into());
        }
        r.atom(&loc, a, schema);
    }
}

fn cq(r: &mut Report, loc: &str, q: &Cq, schema: Option<&Schema>) {
    for a in q.atoms() {
        if a.args.iter().any(|t| t.is_const()) {
            r.push(loc, format!("constant in query atom {a}"));
        }
        r.atom(loc, a, schema);
    }
    let vars = q.vars();
    for x in q.answer() {
        if !vars.contains(x) {
            r.push(loc, format!("answer variable {x} does not occur in the body"));
        }
    }
}

fn ucq(r: &mut Report, loc: &str, q: &Ucq, schema: Option<&Schema>) {
    for (i, d) in q.disjuncts().iter().enumerate() {
        let l = format!("{loc} disjunct {}", i + 1);
        if d.arity() != q.arity() {
            r.push(&l, format!("answer arity {} differs from {}", d.arity(), q.arity()));
        }
        cq(r, &l, d, schema);
    }
}

fn tgds(r: &mut Report, ts: &[Tgd], schema: Option<&Schema>) {
    for (i, t) in ts.iter().enumerate() {
        let loc = format!("tgd {}", i + 1);
        for m in t.violations() {
            r.push(&loc, m);
        }
        for a in t.body().iter().chain(t.head()) {
            r.atom(&loc, a, schema);
        }
    }
}

/// Names used both as a constant and as a variable across the given atoms.
pub fn namespace_clashes<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> BTreeSet<Name> {
    let mut consts = BTreeSet::new();
    let mut vars = BTreeSet::new();
    for a in atoms {
        for t in &a.args {
            if t.is_const() {
                consts.insert(t.name().clone());
            } else {
                vars.insert(t.name().clone());
            }
        }
    }
    consts.intersection(&vars).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{name, Atom};
    use std::collections::BTreeSet;

    #[test]
    fn instance_arity_checks() {
        let s = Schema::from_pairs([("R", 2)]).unwrap();
        let ok = Document::Database(Instance::from_facts(&[("R", &["a", "b"])]));
        assert!(validate(&ok, Some(&s)).is_empty());
        let bad = Document::Database(Instance::from_facts(&[("R", &["a"])]));
        let rep = validate(&bad, Some(&s));
        assert_eq!(rep.len(), 1);
        assert_eq!(rep[0].message, "arity mismatch R");
    }

    #[test]
    fn tgd_with_undeclared_head_variable() {
        let t = Tgd::with_declared(vec![Atom::pattern("R", &["x", "y"])], vec![Atom::pattern("S", &["z"])], BTreeSet::new());
        let rep = validate(&Document::Tgds(vec![t]), None);
        assert_eq!(rep.len(), 1);
        assert_eq!(rep[0].message, "head variable z neither frontier nor declared existential");
    }

    #[test]
    fn clash_detection() {
        let atoms = [Atom::fact("R", &["a"]), Atom::pattern("S", &["a"])];
        assert_eq!(namespace_clashes(atoms.iter()), [name("a")].into_iter().collect());
    }
}
