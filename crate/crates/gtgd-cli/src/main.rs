//! `gtgd`: command-line front end for the gtgd-core library.
//!
//! Exit codes: 0 definitive yes, 1 definitive no, 2 unknown at the given
//! budget, 64 usage error, 65 input data error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_YES: u8 = 0;
pub const EXIT_NO: u8 = 1;
pub const EXIT_UNKNOWN: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;

#[derive(Parser, Debug)]
#[command(name = "gtgd", version, about = "Queries under tuple-generating dependencies: chase, classification, approximation, containment and reductions")]
pub struct Cli {
    /// Print `key=value` records under `[section]` headers.
    #[arg(long, global = true)]
    pub machine: bool,

    #[command(flatten)]
    pub budget: Budget,

    #[command(subcommand)]
    pub command: Command,
}

/// Budgets shared by all subcommands; each has a `GTGD_BUDGET_*` variable.
#[derive(Args, Debug, Clone)]
pub struct Budget {
    /// Atom cap for chase runs inside the deciders (and the default fixpoint cap of `chase`).
    #[arg(long, global = true, env = "GTGD_BUDGET_CHASE_ATOMS", default_value_t = 20_000)]
    pub chase_atoms: usize,
    /// Maximal chase depth for depth escalation.
    #[arg(long, global = true, env = "GTGD_BUDGET_MAX_DEPTH", default_value_t = 12)]
    pub max_depth: usize,
    /// Extra elements allowed in finite-model refutation search.
    #[arg(long, global = true, env = "GTGD_BUDGET_FINITE_MAX_NEW", default_value_t = 4)]
    pub finite_max_new: usize,
    /// Node budget of finite-model refutation search.
    #[arg(long, global = true, env = "GTGD_BUDGET_FINITE_NODES", default_value_t = 20_000)]
    pub finite_nodes: usize,
    /// Cap on the number of rewriting disjuncts.
    #[arg(long, global = true, env = "GTGD_BUDGET_REWRITE_CAP", default_value_t = 10_000)]
    pub rewrite_cap: usize,
    /// Node budget of finite-witness search.
    #[arg(long, global = true, env = "GTGD_BUDGET_WITNESS_NODES", default_value_t = 200_000)]
    pub witness_nodes: usize,
    /// Atom cap of the linearized chase in `eval --mode omq`.
    #[arg(long, global = true, env = "GTGD_BUDGET_FPT_ATOMS", default_value_t = 200_000)]
    pub fpt_atoms: usize,
    /// Override of the linearized chase level bound.
    #[arg(long, global = true, env = "GTGD_BUDGET_LEVEL_BOUND")]
    pub level_bound: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a document against its invariants.
    Validate {
        file: PathBuf,
        /// Document kind; inferred from the extension when omitted.
        #[arg(long, value_enum)]
        kind: Option<Kind>,
    },
    /// Run the level-wise oblivious chase (or the ground chase with --ground).
    Chase {
        #[arg(long)]
        tgds: PathBuf,
        #[arg(long)]
        db: PathBuf,
        /// Stop after this many levels.
        #[arg(long, group = "limit")]
        levels: Option<usize>,
        /// Stop before exceeding this many atoms.
        #[arg(long, group = "limit")]
        atoms: Option<usize>,
        /// Run to the fixpoint with this atom cap.
        #[arg(long, group = "limit")]
        fixpoint_cap: Option<usize>,
        /// Compute the ground part of the chase (guarded TGDs).
        #[arg(long, conflicts_with = "limit")]
        ground: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a query on a database, directly or under TGDs.
    Eval {
        #[arg(long)]
        db: PathBuf,
        /// Query file (`.cq`).
        #[arg(long)]
        query: Option<PathBuf>,
        /// TGDs for `--mode omq` together with --query.
        #[arg(long)]
        tgds: Option<PathBuf>,
        /// An `.omq` specification for `--mode omq`.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = EvalMode::Cq)]
        mode: EvalMode,
        /// Check a single tuple (comma-separated constants).
        #[arg(long)]
        tuple: Option<String>,
    },
    /// Classify TGDs (guarded, frontier-guarded, linear, full).
    Classify {
        #[arg(long)]
        tgds: PathBuf,
    },
    /// Compile guarded TGDs into linear ones (type generator and expanders).
    Linearize {
        #[arg(long)]
        tgds: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// UCQ rewriting by backward chaining.
    Rewrite {
        #[arg(long)]
        tgds: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Exact treewidth and a tree decomposition.
    Treewidth {
        #[arg(long, group = "source", required = true)]
        graph: Option<PathBuf>,
        /// Gaifman graph of a query, answer variables excluded.
        #[arg(long, group = "source")]
        query: Option<PathBuf>,
        /// Gaifman graph of a database.
        #[arg(long, group = "source")]
        db: Option<PathBuf>,
    },
    /// Core of a query, or a Σ-minimal equivalent CQ with --tgds.
    Core {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        tgds: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// UCQ_k-approximation of an OMQ (`.omq`) or CQS (`.cqs`).
    Approx {
        #[arg(long)]
        spec: PathBuf,
        #[arg(short)]
        k: usize,
        /// The compact variant with a marker predicate (OMQs only).
        #[arg(long)]
        compact: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decide UCQ_k-equivalence of an OMQ or CQS.
    Equivk {
        #[arg(long)]
        spec: PathBuf,
        #[arg(short)]
        k: usize,
        /// Witness file: the equivalent specification or a counterexample database.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decide containment of two OMQs or two CQSs.
    Contains {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long, value_enum)]
        mode: ContainsMode,
        /// Counterexample database file.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build the clique-reduction database D*(G, D, D′, A, μ).
    GroheDb {
        #[arg(long)]
        graph: PathBuf,
        #[arg(short)]
        k: usize,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        dbprime: PathBuf,
        /// The set A (comma-separated constants of D).
        #[arg(long = "A", value_delimiter = ',', required = true)]
        a: Vec<String>,
        /// Minor map file, lines `g<i>_<c>: v1 v2 ...`; searched when omitted.
        #[arg(long)]
        minor_map: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Clique reduction, constraint-free (--query) or for a CQS (--cqs).
    ReduceClique {
        #[arg(long)]
        graph: PathBuf,
        #[arg(short)]
        k: usize,
        #[arg(long, group = "input", required = true)]
        query: Option<PathBuf>,
        #[arg(long, group = "input", requires_all = ["p", "pprime", "x"])]
        cqs: Option<PathBuf>,
        #[arg(long)]
        p: Option<PathBuf>,
        #[arg(long)]
        pprime: Option<PathBuf>,
        /// The variable set X (comma-separated).
        #[arg(long = "X", value_delimiter = ',')]
        x: Option<Vec<String>>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Search a finite model agreeing with the chase on queries with ≤ n variables.
    Witness {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        tgds: PathBuf,
        #[arg(short)]
        n: usize,
        #[arg(long)]
        dom_cap: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Kind {
    Tgd,
    Db,
    Cq,
    Omq,
    Cqs,
    Edges,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Cq,
    Omq,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContainsMode {
    Cqs,
    Omq,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_YES };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (code, stdout) = commands::run(&cli);
    print!("{stdout}");
    ExitCode::from(code)
}
