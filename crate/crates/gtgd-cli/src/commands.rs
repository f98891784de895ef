//! Subcommand implementations. Each returns the exit code of its verdict;
//! failures are mapped to exit codes by [`exit_code`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use gtgd_core::approx::{compact_approx, cqs_k_approx, ucq_k_approx};
use gtgd_core::chase::{chase, ChaseBudget};
use gtgd_core::classify::{classify, classify_set};
use gtgd_core::decision::{cqs_contains, cqs_equiv_k, omq_contains, omq_equiv_k, sigma_minimal_cq, Answer, DecisionOptions, Verdict, Witness};
use gtgd_core::finite::{FiniteModelOptions, FiniteSearch};
use gtgd_core::guarded::ground_chase;
use gtgd_core::hom::{core, eval, prune_subsumed, IndexedInstance};
use gtgd_core::linearize::{fpt_answers, linearize, FptOptions};
use gtgd_core::reductions::{
    clique_reduction_constraint_free, clique_reduction_cqs, finite_witness_search_with, grohe_db, h0_is_homomorphism,
    h0_is_surjective, has_clique, pair_count, pinned_homomorphism, WitnessOptions,
};
use gtgd_core::rewrite::rewrite;
use gtgd_core::textio::{
    parse_cq, parse_cqs, parse_database, parse_graph, parse_omq, parse_query, parse_tgds, parse_unchecked,
    serialize_cqs, serialize_database, serialize_omq, serialize_tgds, serialize_ucq, DocKind,
};
use gtgd_core::treewidth::{decide_tw, gaifman_cq, gaifman_instance, grid_minor, treewidth, MinorMap};
use gtgd_core::{name, validate, Cqs, Error, Graph, Name, Omq, Schema, Ucq};

use crate::output::Out;
use crate::{Budget, Cli, Command, ContainsMode, EvalMode, Kind, EXIT_DATA, EXIT_NO, EXIT_UNKNOWN, EXIT_USAGE, EXIT_YES};

/// A usage error detected after argument parsing (bad `k`, bad tuple, ...).
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

/// Exit code of a failure: budget exhaustion is "unknown", a bad `k` or
/// flag combination is a usage error, everything else is a data error.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::BelowArityThreshold { .. }) => EXIT_USAGE,
        Some(Error::SizeLimit(_) | Error::CapExceeded { .. } | Error::BudgetExceeded(_) | Error::FiniteWitnessNotFound { .. }) => {
            EXIT_UNKNOWN
        }
        _ => EXIT_DATA,
    }
}

/// Run the parsed command line; returns the exit code and the standard output.
pub fn run(cli: &Cli) -> (u8, String) {
    let mut out = Out::new(cli.machine);
    match dispatch(cli, &mut out) {
        Ok(code) => (code, out.into_string()),
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {e:#}");
            if code == EXIT_UNKNOWN {
                out.section("verdict");
                out.kv("answer", Answer::Unknown);
                out.kv("reason", e);
            }
            (code, out.into_string())
        }
    }
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn load<T>(p: &Path, parse: fn(&str) -> gtgd_core::Result<T>) -> Result<T> {
    parse(&read(p)?).with_context(|| format!("in {}", p.display()))
}

enum Spec {
    Omq(Omq),
    Cqs(Cqs),
}

/// An `.omq` or `.cqs` file, by extension (other extensions: try both).
fn load_spec(p: &Path) -> Result<Spec> {
    match p.extension().and_then(|e| e.to_str()) {
        Some("omq") => Ok(Spec::Omq(load(p, parse_omq)?)),
        Some("cqs") => Ok(Spec::Cqs(load(p, parse_cqs)?)),
        _ => {
            let text = read(p)?;
            match parse_omq(&text) {
                Ok(o) => Ok(Spec::Omq(o)),
                Err(_) => Ok(Spec::Cqs(parse_cqs(&text).with_context(|| format!("in {}", p.display()))?)),
            }
        }
    }
}

fn decision_options(b: &Budget) -> DecisionOptions {
    DecisionOptions {
        chase_atoms: b.chase_atoms,
        max_depth: b.max_depth,
        finite: FiniteModelOptions { max_new: b.finite_max_new, node_budget: b.finite_nodes },
        rewrite_cap: b.rewrite_cap,
    }
}

fn names(items: &[String]) -> Vec<Name> {
    items.iter().map(|s| name(s.trim())).collect()
}

fn tuple_text(t: &[Name]) -> String {
    let parts: Vec<&str> = t.iter().map(|c| c.as_ref()).collect();
    format!("({})", parts.join(","))
}

fn answer_code(a: Answer) -> u8 {
    match a {
        Answer::Yes => EXIT_YES,
        Answer::No => EXIT_NO,
        Answer::Unknown => EXIT_UNKNOWN,
    }
}

fn yes_no(b: bool) -> u8 {
    if b {
        EXIT_YES
    } else {
        EXIT_NO
    }
}

fn dispatch(cli: &Cli, out: &mut Out) -> Result<u8> {
    let b = &cli.budget;
    match &cli.command {
        Command::Validate { file, kind } => cmd_validate(out, file, *kind),
        Command::Chase { tgds, db, levels, atoms, fixpoint_cap, ground, output } => {
            let limit = match (levels, atoms, fixpoint_cap) {
                (Some(l), _, _) => ChaseBudget::Levels(*l),
                (_, Some(n), _) => ChaseBudget::AtomCap(*n),
                (_, _, Some(n)) => ChaseBudget::FixpointWithCap(*n),
                _ => ChaseBudget::FixpointWithCap(b.chase_atoms),
            };
            cmd_chase(out, tgds, db, limit, *ground, output.as_deref())
        }
        Command::Eval { db, query, tgds, spec, mode, tuple } => {
            cmd_eval(out, b, db, query.as_deref(), tgds.as_deref(), spec.as_deref(), *mode, tuple.as_deref())
        }
        Command::Classify { tgds } => cmd_classify(out, tgds),
        Command::Linearize { tgds, output } => {
            let sigma = load(tgds, parse_tgds)?;
            let lin = linearize(&sigma)?;
            let star = lin.sigma_star();
            out.section("linearize");
            out.kv("types", lin.types().len());
            out.kv("generator_tgds", lin.generator().len());
            out.kv("linear_tgds", star.len());
            out.document(&serialize_tgds(&star), output.as_deref())?;
            Ok(EXIT_YES)
        }
        Command::Rewrite { tgds, query, output } => {
            let sigma = load(tgds, parse_tgds)?;
            let q = load(query, parse_query)?;
            let r = rewrite(&sigma, &q, b.rewrite_cap)?;
            out.section("rewrite");
            out.kv("disjuncts", r.ucq.len());
            out.kv("max_depth", r.max_depth());
            out.document(&serialize_ucq(&r.ucq), output.as_deref())?;
            Ok(EXIT_YES)
        }
        Command::Treewidth { graph, query, db } => cmd_treewidth(out, graph.as_deref(), query.as_deref(), db.as_deref()),
        Command::Core { query, tgds, output } => {
            let q = load(query, parse_query)?;
            let mut cores = Vec::new();
            match tgds {
                Some(t) => {
                    let sigma = load(t, parse_tgds)?;
                    let opts = decision_options(b);
                    for d in q.disjuncts() {
                        cores.push(sigma_minimal_cq(d, &sigma, &opts)?);
                    }
                }
                None => cores.extend(q.disjuncts().iter().map(core)),
            }
            let result = Ucq::new(q.arity(), prune_subsumed(cores))?;
            out.section("core");
            out.kv("atoms_before", q.disjuncts().iter().map(|d| d.len()).sum::<usize>());
            out.kv("atoms_after", result.disjuncts().iter().map(|d| d.len()).sum::<usize>());
            out.document(&serialize_ucq(&result), output.as_deref())?;
            Ok(EXIT_YES)
        }
        Command::Approx { spec, k, compact, output } => {
            let (doc, disjuncts) = match load_spec(spec)? {
                Spec::Omq(o) => {
                    let a = if *compact { compact_approx(&o, *k)? } else { ucq_k_approx(&o, *k)? };
                    (serialize_omq(&a), a.query.len())
                }
                Spec::Cqs(s) => {
                    if *compact {
                        return usage("--compact applies to OMQ specifications only");
                    }
                    let a = cqs_k_approx(&s, *k)?;
                    (serialize_cqs(&a), a.query.len())
                }
            };
            out.section("approx");
            out.kv("k", k);
            out.kv("disjuncts", disjuncts);
            out.document(&doc, output.as_deref())?;
            Ok(EXIT_YES)
        }
        Command::Equivk { spec, k, output } => {
            let opts = decision_options(b);
            let v = match load_spec(spec)? {
                Spec::Omq(o) => omq_equiv_k(&o, *k, &opts)?,
                Spec::Cqs(s) => cqs_equiv_k(&s, *k, &opts)?,
            };
            emit_verdict(out, &v, output.as_deref())
        }
        Command::Contains { left, right, mode, output } => {
            let opts = decision_options(b);
            let v = match mode {
                ContainsMode::Omq => omq_contains(&load(left, parse_omq)?, &load(right, parse_omq)?, &opts)?,
                ContainsMode::Cqs => cqs_contains(&load(left, parse_cqs)?, &load(right, parse_cqs)?, &opts)?,
            };
            emit_verdict(out, &v, output.as_deref())
        }
        Command::GroheDb { graph, k, db, dbprime, a, minor_map, output } => {
            cmd_grohe_db(out, graph, *k, db, dbprime, a, minor_map.as_deref(), output.as_deref())
        }
        Command::ReduceClique { graph, k, query, cqs, p, pprime, x, output } => {
            let g = load(graph, parse_graph)?;
            match (query, cqs, p, pprime, x) {
                (Some(q), _, _, _, _) => cmd_reduce_free(out, &g, *k, q, output.as_deref()),
                (None, Some(s), Some(p), Some(pp), Some(x)) => {
                    cmd_reduce_cqs(out, b, &g, *k, s, p, pp, x, output.as_deref())
                }
                _ => usage("give --query, or --cqs with --p, --pprime and --X"),
            }
        }
        Command::Witness { db, tgds, n, dom_cap, output } => {
            let d = load(db, parse_database)?;
            let sigma = load(tgds, parse_tgds)?;
            let opts = WitnessOptions { node_budget: b.witness_nodes, decision: decision_options(b) };
            let r = finite_witness_search_with(&d, &sigma, *n, *dom_cap, &opts)?;
            out.section("witness");
            match r {
                FiniteSearch::Found(m) => {
                    out.kv("answer", Answer::Yes);
                    out.kv("elements", m.adom().len());
                    out.kv("atoms", m.len());
                    out.document(&serialize_database(&m), output.as_deref())?;
                    Ok(EXIT_YES)
                }
                FiniteSearch::Exhausted => {
                    out.kv("answer", Answer::No);
                    out.kv("reason", format!("no witness with at most {dom_cap} elements"));
                    Ok(EXIT_NO)
                }
                FiniteSearch::OutOfBudget => {
                    out.kv("answer", Answer::Unknown);
                    out.kv("reason", "node budget exhausted");
                    Ok(EXIT_UNKNOWN)
                }
            }
        }
    }
}

fn cmd_validate(out: &mut Out, file: &Path, kind: Option<Kind>) -> Result<u8> {
    let kind = match kind {
        Some(k) => match k {
            Kind::Tgd => DocKind::Tgds,
            Kind::Db => DocKind::Database,
            Kind::Cq => DocKind::Query,
            Kind::Omq => DocKind::Omq,
            Kind::Cqs => DocKind::Cqs,
            Kind::Edges => DocKind::Graph,
        },
        None => match file.extension().and_then(|e| e.to_str()).and_then(DocKind::from_extension) {
            Some(k) => k,
            None => return usage(format!("cannot infer the document kind of {}; pass --kind", file.display())),
        },
    };
    let doc = parse_unchecked(&read(file)?, kind).with_context(|| format!("in {}", file.display()))?;
    let violations = validate(&doc, None);
    out.section("validate");
    out.kv("valid", violations.is_empty());
    out.kv("violations", violations.len());
    for v in &violations {
        out.kv("violation", v);
    }
    Ok(yes_no(violations.is_empty()))
}

fn cmd_chase(out: &mut Out, tgds: &Path, db: &Path, limit: ChaseBudget, ground: bool, output: Option<&Path>) -> Result<u8> {
    let sigma = load(tgds, parse_tgds)?;
    let d = load(db, parse_database)?;
    if ground {
        let g = ground_chase(&d, &sigma)?;
        out.section("chase");
        out.kv("atoms", g.len());
        out.document(&serialize_database(&g), output)?;
        return Ok(EXIT_YES);
    }
    let run = chase(&d, &sigma, limit);
    let summary = [
        ("terminated", run.terminated.to_string()),
        ("atoms", run.instance.len().to_string()),
        ("max_level", run.max_level().to_string()),
        ("steps", run.steps.to_string()),
    ];
    let doc = serialize_database(&run.instance);
    if out.machine() || output.is_some() {
        out.section("chase");
        for (k, v) in &summary {
            out.kv(k, v);
        }
        out.document(&doc, output)?;
    } else {
        // Text mode keeps standard output a valid database document.
        out.document(&doc, None)?;
        let parts: Vec<String> = summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.line(&format!("# chase: {}", parts.join(" ")));
    }
    Ok(if run.terminated { EXIT_YES } else { EXIT_UNKNOWN })
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    out: &mut Out,
    b: &Budget,
    db: &Path,
    query: Option<&Path>,
    tgds: Option<&Path>,
    spec: Option<&Path>,
    mode: EvalMode,
    tuple: Option<&str>,
) -> Result<u8> {
    let d = load(db, parse_database)?;
    let (arity, answers) = match mode {
        EvalMode::Cq => {
            if spec.is_some() || tgds.is_some() {
                return usage("--spec and --tgds need --mode omq");
            }
            let Some(q) = query else { return usage("--mode cq needs --query") };
            let q = load(q, parse_query)?;
            (q.arity(), eval(&q, &d))
        }
        EvalMode::Omq => {
            let omq = match (spec, tgds, query) {
                (Some(s), None, None) => load(s, parse_omq)?,
                (None, Some(t), Some(q)) => {
                    let sigma = load(t, parse_tgds)?;
                    let q = load(q, parse_query)?;
                    // Full data schema: every predicate may occur in the data.
                    let schema: Schema = d.schema()?.union(&gtgd_core::sigma_schema(&sigma)?)?.union(&q.schema()?)?;
                    Omq::new(schema, sigma, q)
                }
                _ => return usage("--mode omq needs --spec, or --tgds with --query"),
            };
            let opts = FptOptions { atom_cap: b.fpt_atoms, rewrite_cap: b.rewrite_cap, level_bound: b.level_bound };
            let r = fpt_answers(&omq, &d, opts)?;
            out.section("linearization");
            out.kv("level_bound", r.level_bound);
            out.kv("method", format!("{:?}", r.method).to_lowercase());
            out.kv("types", r.type_count);
            (omq.query.arity(), r.answers)
        }
    };
    out.section("answers");
    out.kv("count", answers.len());
    for t in &answers {
        out.kv("answer", tuple_text(t));
    }
    match tuple {
        Some(t) => {
            let t: Vec<Name> = if t.trim().is_empty() { vec![] } else { t.split(',').map(|c| name(c.trim())).collect() };
            if t.len() != arity {
                return usage(format!("--tuple has {} constants but the query has arity {arity}", t.len()));
            }
            let holds = answers.contains(&t);
            out.section("verdict");
            out.kv("tuple", tuple_text(&t));
            out.kv("answer", if holds { Answer::Yes } else { Answer::No });
            Ok(yes_no(holds))
        }
        None => Ok(yes_no(!answers.is_empty())),
    }
}

fn cmd_classify(out: &mut Out, tgds: &Path) -> Result<u8> {
    let sigma = load(tgds, parse_tgds)?;
    for (i, t) in sigma.iter().enumerate() {
        let c = classify(t);
        let flags = [
            ("guarded", c.guarded),
            ("frontier_guarded", c.frontier_guarded),
            ("linear", c.linear),
            ("full", c.full),
        ];
        if out.machine() {
            out.section(&format!("tgd.{}", i + 1));
            out.kv("tgd", t);
            for (k, v) in flags {
                out.kv(k, v);
            }
            out.kv("head_atoms", c.head_atoms);
        } else {
            let words: Vec<&str> = flags.iter().filter(|(_, v)| *v).map(|(k, _)| *k).collect();
            let words = if words.is_empty() { "unrestricted".to_string() } else { words.join(" ") };
            out.line(&format!("tgd {}: {t}  [{words}, head atoms {}]", i + 1, c.head_atoms));
        }
    }
    let s = classify_set(&sigma);
    if out.machine() {
        out.section("set");
        out.kv("class", s.class());
        out.kv("guarded", s.guarded);
        out.kv("frontier_guarded", s.frontier_guarded);
        out.kv("linear", s.linear);
        out.kv("full", s.full);
        out.kv("m", s.m);
        out.kv("r", s.r);
    } else {
        out.line(&format!("set: {s}"));
        out.line(&format!("class: {}", s.class()));
    }
    Ok(EXIT_YES)
}

fn print_decomposition(out: &mut Out, g: &Graph, label: &str) -> Result<usize> {
    let tw = treewidth(g)?;
    let td = decide_tw(g, tw)?.expect("a decomposition exists at the exact width");
    out.section(label);
    out.kv("treewidth", tw);
    out.kv("vertices", g.vertices().len());
    out.kv("edges", g.edges().len());
    for (i, bag) in td.bags.iter().enumerate() {
        let vs: Vec<&str> = bag.iter().map(|v| v.as_ref()).collect();
        if out.machine() {
            out.kv(&format!("bag.{i}"), vs.join(" "));
        } else {
            out.line(&format!("bag {i}: {}", vs.join(" ")));
        }
    }
    for (x, y) in &td.edges {
        if out.machine() {
            out.kv("edge", format!("{x} {y}"));
        } else {
            out.line(&format!("edge {x} {y}"));
        }
    }
    Ok(tw)
}

fn cmd_treewidth(out: &mut Out, graph: Option<&Path>, query: Option<&Path>, db: Option<&Path>) -> Result<u8> {
    match (graph, query, db) {
        (Some(g), _, _) => {
            print_decomposition(out, &load(g, parse_graph)?, "treewidth")?;
        }
        (_, Some(q), _) => {
            let q = load(q, parse_query)?;
            let mut max = 1;
            for (i, d) in q.disjuncts().iter().enumerate() {
                max = max.max(print_decomposition(out, &gaifman_cq(d, true), &format!("disjunct.{}", i + 1))?);
            }
            out.section("query");
            out.kv("treewidth", max);
        }
        (_, _, Some(d)) => {
            print_decomposition(out, &gaifman_instance(&load(d, parse_database)?), "treewidth")?;
        }
        _ => return usage("give --graph, --query or --db"),
    }
    Ok(EXIT_YES)
}

/// Minor map file: one line `g<i>_<c>: v1 v2 ...` per grid vertex.
fn parse_minor_map(text: &str, rows: usize, cols: usize) -> Result<MinorMap> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((v, set)) = line.split_once(':') else {
            return Err(Error::InvalidMinorMap(format!("line {}: expected `grid-vertex: vertices`", no + 1)).into());
        };
        let set: BTreeSet<Name> = set.split_whitespace().map(name).collect();
        if map.insert(name(v.trim()), set).is_some() {
            return Err(Error::InvalidMinorMap(format!("line {}: grid vertex {} repeated", no + 1, v.trim())).into());
        }
    }
    Ok(MinorMap { rows, cols, map, onto: true })
}

#[allow(clippy::too_many_arguments)]
fn cmd_grohe_db(
    out: &mut Out,
    graph: &Path,
    k: usize,
    db: &Path,
    dbprime: &Path,
    a: &[String],
    minor_map: Option<&Path>,
    output: Option<&Path>,
) -> Result<u8> {
    if k < 2 {
        return usage("-k must be at least 2");
    }
    let g = load(graph, parse_graph)?;
    let d = load(db, parse_database)?;
    let dp = load(dbprime, parse_database)?;
    let a: BTreeSet<Name> = names(a).into_iter().collect();
    let cols = pair_count(k);
    let mu = match minor_map {
        Some(p) => parse_minor_map(&read(p)?, k, cols).with_context(|| format!("in {}", p.display()))?,
        None => {
            let ga = gaifman_instance(&d).induced(&a);
            grid_minor(&ga, k, cols, true)?
                .ok_or_else(|| Error::NoGridMinor(format!("the {k}x{cols} grid is not a minor of the Gaifman graph of D on A")))?
        }
    };
    let gdb = grohe_db(&g, k, &d, &dp, &a, &mu)?;
    out.section("grohe-db");
    out.kv("facts", gdb.dstar.len());
    out.kv("elements", gdb.dstar.adom().len());
    out.kv("h0_homomorphism", h0_is_homomorphism(&gdb));
    out.kv("h0_surjective", h0_is_surjective(&gdb));
    out.kv("pinned_hom", pinned_homomorphism(&gdb).is_some());
    out.kv("has_k_clique", has_clique(&g, k));
    out.document(&serialize_database(&gdb.dstar), output)?;
    Ok(EXIT_YES)
}

fn cmd_reduce_free(out: &mut Out, g: &Graph, k: usize, query: &Path, output: Option<&Path>) -> Result<u8> {
    let q = load(query, parse_cq)?;
    let (gdb, core) = clique_reduction_constraint_free(g, k, &q)?;
    let holds = IndexedInstance::new(&gdb.dstar).holds(&core, &[]);
    out.section("reduce-clique");
    out.kv("core", &core);
    out.kv("facts", gdb.dstar.len());
    out.kv("dstar_models_q", holds);
    out.kv("has_k_clique", has_clique(g, k));
    out.document(&serialize_database(&gdb.dstar), output)?;
    Ok(yes_no(holds))
}

#[allow(clippy::too_many_arguments)]
fn cmd_reduce_cqs(
    out: &mut Out,
    b: &Budget,
    g: &Graph,
    k: usize,
    cqs: &Path,
    p: &Path,
    pprime: &Path,
    x: &[String],
    output: Option<&Path>,
) -> Result<u8> {
    let s = load(cqs, parse_cqs)?;
    let p = load(p, parse_cq)?;
    let pp = load(pprime, parse_cq)?;
    let x: BTreeSet<Name> = names(x).into_iter().collect();
    let (gdb, report) = clique_reduction_cqs(g, k, &s, &p, &pp, &x, &decision_options(b))?;
    out.section("reduce-clique");
    out.kv("facts", gdb.dstar.len());
    for line in report.to_string().lines() {
        if let Some((key, value)) = line.split_once('=') {
            out.kv(key, value);
        }
    }
    out.kv("all_hold", report.all_hold());
    out.document(&serialize_database(&gdb.dstar), output)?;
    Ok(yes_no(report.all_hold()))
}

fn emit_verdict(out: &mut Out, v: &Verdict, output: Option<&Path>) -> Result<u8> {
    out.section("verdict");
    out.kv("answer", v.answer);
    out.kv("note", &v.note);
    match &v.witness {
        None => {}
        Some(Witness::Counterexample { database, tuple }) => {
            out.section("counterexample");
            out.kv("tuple", tuple_text(tuple));
            out.document(&serialize_database(database), output)?;
        }
        Some(Witness::Omq(o)) => {
            out.section("witness");
            out.document(&serialize_omq(o), output)?;
        }
        Some(Witness::Cqs(c)) => {
            out.section("witness");
            out.document(&serialize_cqs(c), output)?;
        }
    }
    Ok(answer_code(v.answer))
}
