//! Subcommands of the `optswitch` binary. Each returns the process exit code
//! and writes its human-readable output to `out`, diagnostics to `err`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use optswitch::generate::{generate, node_count, CostKind, GenConfig};
use optswitch::oracle::{oracle_value, OracleError};
use optswitch::spec::ProblemSpec;
use optswitch::switching::{
    evaluate, extract_strategy, iteration_cap, num_switches, solve, solve_n_switches, Solution, SolveError, ValueFamily,
};
use optswitch::validate::{
    check_assumption_costs, check_cost_bound, check_hypothesis_m, construct_martingale_family, Construction,
    CostViolation,
};
use optswitch::SwitchingProblem;
use serde::Serialize;

pub mod exit {
    pub const OK: i32 = 0;
    /// Violations found by `validate`, solver/oracle gaps, or unwritable output.
    pub const FAILED: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const ASSUMPTION: i32 = 3;
    pub const NON_CONVERGENCE: i32 = 4;
    pub const GUARD: i32 = 5;
}

/// Gap allowed between solver and oracle values.
pub const GAP_TOL: f64 = 1e-9;

/// Largest tree `gen` will build.
pub const GEN_NODE_LIMIT: usize = 1 << 20;

fn emit(w: &mut dyn Write, text: &str) {
    // A closed stdout is not worth failing over.
    let _ = w.write_all(text.as_bytes());
}

/// Reads and converts a problem file; the error is the message to print.
pub fn load_problem(path: &Path) -> Result<SwitchingProblem, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let spec = ProblemSpec::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    spec.to_problem().map_err(|e| format!("{}: {e}", path.display()))
}

fn cost_report(violations: &[CostViolation]) -> String {
    let mut s = String::new();
    if violations.is_empty() {
        s.push_str("cost assumptions: ok\n");
    } else {
        let _ = writeln!(s, "cost assumptions: {} violation(s)", violations.len());
        for v in violations {
            let _ = writeln!(s, "  {v}");
        }
    }
    s
}

#[derive(Serialize)]
struct SwitchReport {
    node: usize,
    time: usize,
    to: usize,
}

#[derive(Serialize)]
struct PathReport {
    leaf: usize,
    switches: Vec<SwitchReport>,
}

#[derive(Serialize)]
struct StrategyReport {
    start_mode: usize,
    value: f64,
    performance: f64,
    max_switches: usize,
    paths: Vec<PathReport>,
}

#[derive(Serialize)]
struct SolveReport {
    modes: usize,
    horizon: usize,
    dt: f64,
    nodes: usize,
    tol: f64,
    iterations: usize,
    iteration_cap: usize,
    residual: f64,
    hypothesis: String,
    /// `values[mode label - 1][node id]`.
    values: Vec<Vec<f64>>,
    strategies: Vec<StrategyReport>,
}

fn hypothesis_name(problem: &SwitchingProblem) -> String {
    match construct_martingale_family(problem) {
        Construction::Found { case, .. } => case.name().to_string(),
        Construction::Unavailable => "unavailable".to_string(),
    }
}

fn strategy_reports(problem: &SwitchingProblem, y: &ValueFamily) -> Vec<StrategyReport> {
    let tree = problem.tree();
    let root = tree.root();
    problem
        .mode_iter()
        .map(|mode| {
            let s = extract_strategy(problem, y, root, mode);
            let performance = evaluate(problem, &s).expect("extracted strategies are admissible");
            let max_switches = num_switches(tree, &s).into_iter().map(|(_, c)| c).max().unwrap_or(0);
            let paths = s
                .paths()
                .iter()
                .map(|p| PathReport {
                    leaf: p.leaf.0,
                    switches: p
                        .switches
                        .iter()
                        .map(|w| SwitchReport { node: w.node.0, time: tree.time(w.node), to: w.to.label() })
                        .collect(),
                })
                .collect();
            StrategyReport { start_mode: mode.label(), value: y.value(mode, root), performance, max_switches, paths }
        })
        .collect()
}

fn summary_text(input: &Path, report: &SolveReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12}{}", "problem", input.display());
    let _ = writeln!(s, "{:<12}{}", "modes", report.modes);
    let _ = writeln!(s, "{:<12}{} (dt {})", "horizon", report.horizon, report.dt);
    let _ = writeln!(s, "{:<12}{}", "nodes", report.nodes);
    let _ = writeln!(
        s,
        "{:<12}{} of at most {} (residual {:e})",
        "iterations", report.iterations, report.iteration_cap, report.residual
    );
    let _ = writeln!(s, "{:<12}{}", "hypothesis", report.hypothesis);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<6}{:>24}{:>24}{:>10}", "mode", "Y(root)", "J(strategy)", "switches");
    for st in &report.strategies {
        let _ = writeln!(s, "{:<6}{:>24}{:>24}{:>10}", st.start_mode, st.value, st.performance, st.max_switches);
    }
    s
}

fn values_csv(problem: &SwitchingProblem, y: &ValueFamily) -> String {
    let tree = problem.tree();
    let mut s = String::from("node,time,parent,path_prob");
    for m in problem.mode_iter() {
        let _ = write!(s, ",Y{}", m.label());
    }
    s.push('\n');
    for n in tree.node_ids() {
        let parent = tree.parent(n).map(|p| p.0.to_string()).unwrap_or_default();
        let _ = write!(s, "{},{},{},{}", n.0, tree.time(n), parent, tree.path_prob(n));
        for m in problem.mode_iter() {
            let _ = write!(s, ",{}", y.value(m, n));
        }
        s.push('\n');
    }
    s
}

fn expectations_csv(problem: &SwitchingProblem, y: &ValueFamily) -> String {
    let tree = problem.tree();
    let mut s = String::from("time,mode,expected_value\n");
    for t in 0..=tree.horizon() {
        for m in problem.mode_iter() {
            let e = tree.root_expectation(y.get(m), t).expect("time within horizon");
            let _ = writeln!(s, "{t},{},{e}", m.label());
        }
    }
    s
}

/// Solves a problem file and writes `report.json`, `summary.txt`,
/// `values.csv` and `expectations.csv` into the `output` directory.
pub fn cmd_solve(input: &Path, tol: f64, output: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let problem = match load_problem(input) {
        Ok(p) => p,
        Err(e) => {
            emit(err, &format!("error: {e}\n"));
            return exit::PARSE;
        }
    };
    let violations = check_assumption_costs(&problem);
    if !violations.is_empty() {
        emit(out, &cost_report(&violations));
        emit(err, "error: the cost assumptions do not hold; refusing to solve\n");
        return exit::ASSUMPTION;
    }
    let Solution { values, iterations, residual } = match solve(&problem, tol) {
        Ok(s) => s,
        Err(e @ SolveError::NonConvergence { .. }) => {
            emit(err, &format!("error: {e}\n"));
            return exit::NON_CONVERGENCE;
        }
    };
    let tree = problem.tree();
    let report = SolveReport {
        modes: problem.modes(),
        horizon: tree.horizon(),
        dt: tree.dt(),
        nodes: tree.len(),
        tol,
        iterations,
        iteration_cap: iteration_cap(&problem),
        residual,
        hypothesis: hypothesis_name(&problem),
        values: values.processes().iter().map(|p| p.values().to_vec()).collect(),
        strategies: strategy_reports(&problem, &values),
    };
    let summary = summary_text(input, &report);
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    let files = [
        ("report.json", json),
        ("summary.txt", summary.clone()),
        ("values.csv", values_csv(&problem, &values)),
        ("expectations.csv", expectations_csv(&problem, &values)),
    ];
    if let Err(e) = fs::create_dir_all(output) {
        emit(err, &format!("error: cannot create {}: {e}\n", output.display()));
        return exit::FAILED;
    }
    for (name, body) in files {
        let path = output.join(name);
        if let Err(e) = fs::write(&path, body) {
            emit(err, &format!("error: cannot write {}: {e}\n", path.display()));
            return exit::FAILED;
        }
    }
    emit(out, &summary);
    exit::OK
}

/// Reports the cost assumptions, the constructive case for the martingale
/// hypothesis and its checks. Exit 0 iff nothing is violated.
pub fn cmd_validate(input: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let problem = match load_problem(input) {
        Ok(p) => p,
        Err(e) => {
            emit(err, &format!("error: {e}\n"));
            return exit::PARSE;
        }
    };
    let costs = check_assumption_costs(&problem);
    let mut text = cost_report(&costs);
    let mut failed = !costs.is_empty();
    match construct_martingale_family(&problem) {
        Construction::Unavailable => {
            text.push_str("hypothesis (M): unavailable, no constructive case applies; dependent checks skipped\n");
        }
        Construction::Found { case, family } => {
            let _ = writeln!(text, "hypothesis (M): case \"{case}\"");
            let hv = check_hypothesis_m(&family, &problem);
            if hv.is_empty() {
                text.push_str("hypothesis (M) checks: ok\n");
            } else {
                failed = true;
                let _ = writeln!(text, "hypothesis (M) checks: {} violation(s)", hv.len());
                for v in &hv {
                    let _ = writeln!(text, "  {v}");
                }
            }
            if costs.is_empty() {
                match solve(&problem, optswitch::switching::DEFAULT_TOL) {
                    Ok(sol) => {
                        for mode in problem.mode_iter() {
                            let s = extract_strategy(&problem, &sol.values, problem.tree().root(), mode);
                            // Reported only: the bound is derived, not a property of the input,
                            // and the two-mode family does not guarantee it for round trips.
                            let b = check_cost_bound(&problem, &s, &family);
                            let _ = writeln!(
                                text,
                                "cost bound from mode {mode}: {} (worst gap {}, bound {})",
                                if b.holds { "ok" } else { "violated" },
                                b.gap,
                                b.rhs
                            );
                        }
                    }
                    Err(e) => {
                        failed = true;
                        let _ = writeln!(text, "solver: {e}");
                    }
                }
            }
        }
    }
    emit(out, &text);
    if failed {
        exit::FAILED
    } else {
        exit::OK
    }
}

/// Compares the brute-force oracle with the budgeted recursion at the root.
/// `max_switches` defaults to `N (m - 1)`.
pub fn cmd_oracle(input: &Path, max_switches: Option<usize>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let problem = match load_problem(input) {
        Ok(p) => p,
        Err(e) => {
            emit(err, &format!("error: {e}\n"));
            return exit::PARSE;
        }
    };
    let tree = problem.tree();
    let k = max_switches.unwrap_or(tree.horizon() * (problem.modes() - 1));
    let mut text = String::new();
    if !check_assumption_costs(&problem).is_empty() {
        text.push_str("note: cost assumptions fail; oracle equality is not guaranteed\n");
    }
    let budgeted = solve_n_switches(&problem, k);
    let full = solve(&problem, optswitch::switching::DEFAULT_TOL).ok();
    let _ = writeln!(text, "max switches per path: {k}");
    let _ = writeln!(text, "{:<6}{:>24}{:>24}{:>24}{:>12}", "mode", "oracle", "Y (budget)", "Y (fixed point)", "gap");
    let mut worst: f64 = 0.0;
    for mode in problem.mode_iter() {
        let o = match oracle_value(&problem, tree.root(), mode, k) {
            Ok(v) => v,
            Err(e @ OracleError::GuardExceeded { .. }) => {
                emit(err, &format!("error: {e}\n"));
                return exit::GUARD;
            }
            Err(e) => {
                emit(err, &format!("error: {e}\n"));
                return exit::FAILED;
            }
        };
        let y = budgeted.value(mode, tree.root());
        let gap = (o - y).abs();
        worst = worst.max(gap);
        let fixed = full.as_ref().map(|s| s.values.value(mode, tree.root()).to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(text, "{:<6}{:>24}{:>24}{:>24}{:>12.3e}", mode.label(), o, y, fixed, gap);
    }
    let _ = writeln!(text, "worst gap {worst:e} (tolerance {GAP_TOL:e})");
    emit(out, &text);
    if worst <= GAP_TOL {
        exit::OK
    } else {
        exit::FAILED
    }
}

pub fn parse_cost_kind(s: &str) -> Result<CostKind, String> {
    match s {
        "signed" => Ok(CostKind::Signed),
        "martingale" => Ok(CostKind::Martingale),
        "non-negative" => Ok(CostKind::NonNegative),
        other => Err(format!("unknown cost kind {other:?}; expected signed, martingale or non-negative")),
    }
}

/// Writes a seeded random problem file.
pub fn cmd_gen(cfg: &GenConfig, output: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if cfg.modes < 2 || cfg.branching < 1 {
        emit(err, "error: need at least two modes and branching of at least one\n");
        return exit::PARSE;
    }
    match node_count(cfg.depth, cfg.branching) {
        Some(n) if n <= GEN_NODE_LIMIT => {}
        _ => {
            emit(err, &format!("error: tree would exceed {GEN_NODE_LIMIT} nodes\n"));
            return exit::GUARD;
        }
    }
    let problem = generate(cfg);
    if let Err(e) = fs::write(output, ProblemSpec::from_problem(&problem).to_json()) {
        emit(err, &format!("error: cannot write {}: {e}\n", output.display()));
        return exit::FAILED;
    }
    emit(out, &format!("wrote {} ({} nodes, {} modes)\n", output.display(), problem.tree().len(), problem.modes()));
    exit::OK
}
