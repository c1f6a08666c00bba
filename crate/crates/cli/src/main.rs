//! Command-line front end: construct layered multipartite graphs, compute
//! their critical groups by any of three routes, cross-verify the routes
//! against each other, run Smith normal form on matrix files, and export
//! graphs as DOT.
//!
//! Exit codes: 0 success, 1 verification or internal-consistency failure,
//! 2 unusable input (parse or file errors), 3 a method refused the spec
//! (part size below 2, or an unsupported part count for the closed form).

use clap::{Parser, Subcommand, ValueEnum};
use critgroup::graph::layered_kpartite;
use critgroup::group::{sigma_pair_k5, sigma_pair_k6, GroupError};
use critgroup::oracles::spanning_trees_matrixtree;
use critgroup::pipeline::PipelineError;
use critgroup::{
    closed_form, critical_group, run_pipeline, smith_normal_form, spanning_trees_formula,
    AbelianGroup, IntMatrix, LayeredSpec,
};
use num_bigint::BigInt;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

const EXIT_INCONSISTENT: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_REFUSED: u8 = 3;
const GRID_LIMIT: usize = 10_000;

#[derive(Parser)]
#[command(
    name = "critgroup",
    version,
    about = "Critical groups of graphs by exact integer linear algebra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the critical group of a layered multipartite graph
    Group {
        /// Part sizes as "n1,n2,...,nk" (comma-separated, no spaces)
        spec: String,
        /// Computation route
        #[arg(long, value_enum, default_value_t = Method::Snf)]
        method: Method,
        /// Emit a JSON object instead of text
        #[arg(long)]
        json: bool,
    },
    /// Cross-check every applicable route against the others
    Verify {
        /// Single spec "n1,...,nk" (or use --grid)
        spec: Option<String>,
        /// Sweep all specs in a grid: part-count range and size range,
        /// e.g. --grid 2..6 2..4
        #[arg(long, num_args = 2, value_names = ["K_RANGE", "N_RANGE"])]
        grid: Option<Vec<String>>,
    },
    /// Smith normal form of a matrix read from a plain-text file
    Snf {
        /// File holding "rows cols" then the integer rows
        file: PathBuf,
        /// Also print the two unimodular transform matrices
        #[arg(long)]
        transforms: bool,
    },
    /// Write the layered graph as a DOT file, one cluster per part
    Export {
        /// Part sizes as "n1,n2,...,nk"
        spec: String,
        /// Output path
        #[arg(long, value_name = "FILE")]
        dot: PathBuf,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Smith normal form of the full Laplacian (always applicable)
    Snf,
    /// Staged unimodular reduction with per-stage audits
    Pipeline,
    /// Closed-form decomposition (2 to 6 parts, every part size >= 2)
    Closed,
}

impl Method {
    fn label(self) -> &'static str {
        match self {
            Method::Snf => "generic-snf",
            Method::Pipeline => "pipeline",
            Method::Closed => "closed-form",
        }
    }
}

#[derive(Serialize)]
struct RunResult {
    spec: String,
    method: &'static str,
    free_rank: usize,
    invariant_factors: Vec<String>,
    tree_count: String,
    elapsed_ms: u128,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Group { spec, method, json } => cmd_group(&spec, method, json),
        Command::Verify { spec, grid } => cmd_verify(spec.as_deref(), grid.as_deref()),
        Command::Snf { file, transforms } => cmd_snf(&file, transforms),
        Command::Export { spec, dot } => cmd_export(&spec, &dot),
    }
}

fn parse_spec(input: &str) -> Result<LayeredSpec, ExitCode> {
    input.parse::<LayeredSpec>().map_err(|e| {
        eprintln!("error: cannot parse spec {input:?}: {e}");
        ExitCode::from(EXIT_BAD_INPUT)
    })
}

/// Computes the group by the requested route, mapping "this spec is out of
/// the route's domain" to a refusal and anything else to a hard failure.
fn group_by_method(spec: &LayeredSpec, method: Method) -> Result<AbelianGroup, ExitCode> {
    match method {
        Method::Snf => Ok(critical_group(&layered_kpartite(spec))),
        Method::Pipeline => run_pipeline(spec)
            .map(|run| run.group)
            .map_err(|e| match e {
                PipelineError::PartTooSmall { .. } | PipelineError::TooFewParts { .. } => {
                    eprintln!("error: the staged route refuses {spec}: {e}; use --method snf");
                    ExitCode::from(EXIT_REFUSED)
                }
                other => {
                    eprintln!(
                        "error: staged reduction failed an internal audit on {spec}: {other}"
                    );
                    ExitCode::from(EXIT_INCONSISTENT)
                }
            }),
        Method::Closed => closed_form(spec).map_err(|e| match e {
            GroupError::PartTooSmall { .. } | GroupError::UnsupportedPartCount(_) => {
                eprintln!("error: the closed form refuses {spec}: {e}; use --method snf");
                ExitCode::from(EXIT_REFUSED)
            }
            other => {
                eprintln!("error: {other}");
                ExitCode::from(EXIT_INCONSISTENT)
            }
        }),
    }
}

fn cmd_group(spec_input: &str, method: Method, json: bool) -> ExitCode {
    let spec = match parse_spec(spec_input) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let started = Instant::now();
    let group = match group_by_method(&spec, method) {
        Ok(g) => g,
        Err(code) => return code,
    };
    let elapsed_ms = started.elapsed().as_millis();
    let tree_count = spanning_trees_formula(&spec);
    let group_order = group
        .order()
        .expect("critical groups of connected graphs are finite");
    if group_order != tree_count {
        eprintln!(
            "error: internal consistency failure on {spec}: group order {group_order} \
             but tree formula gives {tree_count}"
        );
        return ExitCode::from(EXIT_INCONSISTENT);
    }

    if json {
        let result = RunResult {
            spec: spec.to_string(),
            method: method.label(),
            free_rank: group.free_rank(),
            invariant_factors: group.torsion().iter().map(BigInt::to_string).collect(),
            tree_count: tree_count.to_string(),
            elapsed_ms,
        };
        println!(
            "{}",
            serde_json::to_string(&result).expect("result serializes")
        );
    } else {
        println!("spec: {spec}");
        println!("critical group: {group}");
        println!("spanning trees: {tree_count}");
        println!("method: {}", method.label());
    }
    ExitCode::SUCCESS
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyOutcome {
    line: String,
    pass: bool,
}

/// Runs every applicable route on one spec and renders a one-line verdict.
fn verify_spec(spec: &LayeredSpec) -> VerifyOutcome {
    let generic = critical_group(&layered_kpartite(spec));
    let formula_trees = spanning_trees_formula(spec);
    let det_trees = spanning_trees_matrixtree(&layered_kpartite(spec));
    let generic_order = generic
        .order()
        .expect("critical groups of connected graphs are finite");

    let mut methods = vec!["generic-snf"];
    let mut disagreements: Vec<String> = Vec::new();

    if generic_order != formula_trees {
        disagreements.push(format!(
            "group order {generic_order} vs tree formula {formula_trees}"
        ));
    }
    if det_trees != formula_trees {
        disagreements.push(format!(
            "tree formula {formula_trees} vs determinant {det_trees}"
        ));
    }

    let closed_applicable = spec.parts().iter().all(|&n| n >= 2) && spec.k() <= 6;
    if closed_applicable {
        match closed_form(spec) {
            Ok(g) => {
                methods.push("closed-form");
                if g != generic {
                    disagreements.push(format!("closed form {g} vs generic {generic}"));
                }
            }
            Err(e) => disagreements.push(format!("closed form errored: {e}")),
        }
    }

    let pipeline_applicable = spec.parts().iter().all(|&n| n >= 2);
    if pipeline_applicable {
        match run_pipeline(spec) {
            Ok(run) => {
                methods.push("pipeline");
                if run.group != generic {
                    disagreements.push(format!("pipeline {} vs generic {generic}", run.group));
                }
            }
            Err(e) => disagreements.push(format!("pipeline errored: {e}")),
        }
    }

    let mut extras = String::new();
    if spec.k() == 5 {
        if let Ok((s1, s2)) = sigma_pair_k5(spec) {
            extras = format!("  sigma=({s1},{s2})");
        }
    } else if spec.k() == 6 {
        if let Ok((s1, s2)) = sigma_pair_k6(spec) {
            extras = format!("  sigma=({s1},{s2})");
        }
    }
    let note = if closed_applicable && pipeline_applicable {
        String::new()
    } else {
        "  note=closed-form/pipeline need 2..6 parts, every size >= 2".to_string()
    };

    if disagreements.is_empty() {
        VerifyOutcome {
            line: format!(
                "{spec}  PASS  group={generic}  trees={formula_trees}  methods={}{extras}{note}",
                methods.join(",")
            ),
            pass: true,
        }
    } else {
        VerifyOutcome {
            line: format!("{spec}  FAIL  {}", disagreements.join("; ")),
            pass: false,
        }
    }
}

/// Parses "2..6" (inclusive), tolerating a "k=" or "n=" prefix.
fn parse_range(input: &str) -> Result<(u64, u64), String> {
    let trimmed = input.trim_start_matches("k=").trim_start_matches("n=");
    let (lo, hi) = trimmed
        .split_once("..")
        .ok_or_else(|| format!("range {input:?} is not of the form a..b"))?;
    let lo: u64 = lo
        .parse()
        .map_err(|_| format!("range {input:?}: bad lower bound"))?;
    let hi: u64 = hi
        .parse()
        .map_err(|_| format!("range {input:?}: bad upper bound"))?;
    if lo == 0 || hi < lo {
        return Err(format!("range {input:?} is empty or starts at zero"));
    }
    Ok((lo, hi))
}

/// All specs with part count in `k_range` and every size in `n_range`,
/// in sorted order.
fn grid_specs(k_range: (u64, u64), n_range: (u64, u64)) -> Result<Vec<LayeredSpec>, String> {
    let sizes: Vec<u64> = (n_range.0..=n_range.1).collect();
    let mut total: usize = 0;
    for k in k_range.0..=k_range.1 {
        total = total.saturating_add(sizes.len().saturating_pow(k as u32));
    }
    if total > GRID_LIMIT {
        return Err(format!(
            "grid holds {total} specs; the limit is {GRID_LIMIT}"
        ));
    }
    let mut specs = Vec::with_capacity(total);
    for k in k_range.0..=k_range.1 {
        let k = k as usize;
        if k < 2 {
            return Err("part counts below 2 do not define a graph here".to_string());
        }
        let mut idx = vec![0usize; k];
        loop {
            let parts: Vec<u64> = idx.iter().map(|&i| sizes[i]).collect();
            specs.push(LayeredSpec::new(parts).expect("sizes are positive"));
            // lexicographic order: advance the last position first
            let mut pos = k;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < sizes.len() {
                    break;
                }
                idx[pos] = 0;
                if pos == 0 {
                    break;
                }
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    specs.sort_by(|a, b| (a.k(), a.parts()).cmp(&(b.k(), b.parts())));
    Ok(specs)
}

fn cmd_verify(spec_input: Option<&str>, grid: Option<&[String]>) -> ExitCode {
    let specs = match (spec_input, grid) {
        (Some(_), Some(_)) => {
            eprintln!("error: give either a spec or --grid, not both");
            return ExitCode::from(EXIT_BAD_INPUT);
        }
        (None, None) => {
            eprintln!("error: give a spec like 2,3 or a --grid sweep");
            return ExitCode::from(EXIT_BAD_INPUT);
        }
        (Some(s), None) => match parse_spec(s) {
            Ok(spec) => vec![spec],
            Err(code) => return code,
        },
        (None, Some(ranges)) => {
            let parsed = parse_range(&ranges[0])
                .and_then(|k_range| parse_range(&ranges[1]).map(|n_range| (k_range, n_range)));
            match parsed.and_then(|(k, n)| grid_specs(k, n)) {
                Ok(specs) => specs,
                Err(why) => {
                    eprintln!("error: {why}");
                    return ExitCode::from(EXIT_BAD_INPUT);
                }
            }
        }
    };

    let mut failures = 0usize;
    for spec in &specs {
        let outcome = verify_spec(spec);
        println!("{}", outcome.line);
        if !outcome.pass {
            failures += 1;
        }
    }
    println!(
        "verified {} specs: {} pass, {} fail",
        specs.len(),
        specs.len() - failures,
        failures
    );
    if failures > 0 {
        ExitCode::from(EXIT_INCONSISTENT)
    } else {
        ExitCode::SUCCESS
    }
}

// ---------------------------------------------------------------------------
// snf / export
// ---------------------------------------------------------------------------

fn cmd_snf(file: &PathBuf, transforms: bool) -> ExitCode {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(EXIT_BAD_INPUT);
        }
    };
    let matrix = match IntMatrix::from_text(&text) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {} is not a valid matrix file: {e}", file.display());
            return ExitCode::from(EXIT_BAD_INPUT);
        }
    };
    let snf = smith_normal_form(&matrix);
    if !snf.verify_against(&matrix) {
        eprintln!(
            "error: internal consistency failure: transform replay did not reproduce the diagonal"
        );
        return ExitCode::from(EXIT_INCONSISTENT);
    }
    for (i, d) in snf.d().diagonal().iter().enumerate() {
        println!("{}: {d}", i + 1);
    }
    if transforms {
        println!("left transform:");
        print!("{}", snf.p().to_text());
        println!("right transform:");
        print!("{}", snf.q().to_text());
    }
    ExitCode::SUCCESS
}

fn cmd_export(spec_input: &str, dot_path: &PathBuf) -> ExitCode {
    let spec = match parse_spec(spec_input) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let graph = layered_kpartite(&spec);
    if let Err(e) = std::fs::write(dot_path, graph.to_dot()) {
        eprintln!("error: cannot write {}: {e}", dot_path.display());
        return ExitCode::from(EXIT_BAD_INPUT);
    }
    println!(
        "wrote {} ({} vertices, {} edges)",
        dot_path.display(),
        graph.vertex_count(),
        graph.edge_count()
    );
    ExitCode::SUCCESS
}
