//! Command-line plumbing: one entry point for solving, relaxing,
//! verifying, kernelizing, reducing, generating and inspecting instances.
//! Exit codes: 0 success, 1 infeasible/invalid answers, 2 usage or parse
//! errors, 3 budget exhaustion.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::hardness::{
    gen_disjoint_paths_instance, gen_sat_instance, parse_digraph, parse_dimacs,
    DisjointPathsQuery,
};
use crate::instance::{
    mvtsp_to_cf, parse_cf, parse_mvtsp, parse_solution, verify_solution, write_cf, write_mvtsp,
    write_solution, ConnectedFlowInstance, Vertex,
};
use crate::kernel::kernelize;
use crate::oracle::{solve_exact_with_limit, OracleResult, SolveStatus, DEFAULT_NODE_LIMIT};
use crate::reduce::{lift_tour, mvtsp_loop_cf, reduce_to_mvtsp};
use crate::relax::solve_relaxation;
use crate::tw::{heuristic_td, parse_td, solve_tw_dp, validate_td};
use crate::vc::{compute_vertex_cover, solve_vc_fpt_threads};

pub const FORMAT_HELP: &str = "\
File formats:
  Connected Flow (.cf):   'p cf <n> <m> <d>', then 'd <v> <demand>' lines,
                          then 'e <tail> <head> <cost> <cap|inf>' lines.
  MVTSP (.mvtsp):         'p mvtsp <n>', then 'd <v> <demand>' lines,
                          then 'e <u> <v> <cost>' lines (directed pairs).
  Solution (.sol):        's <cost>' then 'f <tail> <head> <multiplicity>'
                          lines, sorted; 's infeasible' when none exists.
  Tree decomposition:     PACE 2017 .td: 's td <bags> <width+1> <n>',
                          'b <id> <v...>' lines, then bag-tree edges.
  Digraph (.dg):          'p dg <n> <m>' then 'a <u> <v>' arc lines.
  CNF:                    DIMACS 'p cnf <vars> <clauses>'; clauses are
                          0-terminated triples of literals.
  Path table sidecar:     'pt <u> <v> <cost> <len> <v1..vlen>' per pair.
  Kernel map:             'r <i> <j> <rij-id> <demand> <fixed-cost>
                          <members...>' per contracted class.
Lines starting with 'c' are comments everywhere.";

#[derive(Debug, Parser)]
#[command(name = "conflow", version, about = "Exact Connected Flow / MVTSP toolkit", after_long_help = FORMAT_HELP)]
pub struct CliConfig {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Auto,
    Oracle,
    VcFpt,
    TwDp,
    Mvtsp,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an instance exactly and print the solution format.
    Solve {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Algo::Auto)]
        algo: Algo,
        /// Vertex cover override for vc-fpt, comma-separated ids.
        #[arg(long)]
        cover: Option<String>,
        /// Tree decomposition file (PACE .td) for tw-dp.
        #[arg(long)]
        td: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Node budget for the oracle.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Solve the Flow relaxation (no connectivity constraint).
    Relax { file: PathBuf },
    /// Check a solution file against an instance.
    Verify { file: PathBuf, sol: PathBuf },
    /// Shrink an MVTSP instance to its vertex-cover kernel.
    Kernelize {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        cover: Option<String>,
    },
    /// Reductions between problem formats.
    Reduce {
        #[command(subcommand)]
        what: ReduceCmd,
    },
    /// Hardness-instance generators.
    Gen {
        #[command(subcommand)]
        what: GenCmd,
    },
    /// Print instance statistics.
    Stats { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum ReduceCmd {
    /// Unbounded-capacity Connected Flow to MVTSP on the demand vertices.
    Mvtsp {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Path-table sidecar file; printed after the instance if omitted.
        #[arg(long)]
        pt: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenCmd {
    /// 2-vertex-disjoint-paths query to a Connected Flow instance.
    DisjointPaths {
        graphfile: PathBuf,
        s1: Vertex,
        t1: Vertex,
        s2: Vertex,
        t2: Vertex,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// 3-CNF formula to an MVTSP instance of bounded pathwidth.
    Sat {
        cnffile: PathBuf,
        #[arg(long)]
        group_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        meta: Option<PathBuf>,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

/// Accept either a .cf or a .mvtsp file and return the flow instance.
fn load_cf(text: &str) -> Result<ConnectedFlowInstance> {
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('c'))
        .unwrap_or("");
    if header.starts_with("p mvtsp") {
        Ok(mvtsp_to_cf(&parse_mvtsp(text)?))
    } else {
        parse_cf(text)
    }
}

fn parse_cover(arg: &str, n: usize) -> Result<BTreeSet<Vertex>> {
    let mut out = BTreeSet::new();
    for tok in arg.split(',') {
        let v: Vertex = tok
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("bad cover vertex '{}'", tok)))?;
        if v == 0 || v > n {
            return Err(Error::Invalid(format!("cover vertex {} out of range", v)));
        }
        out.insert(v);
    }
    Ok(out)
}

fn pick_auto(i: &ConnectedFlowInstance) -> Algo {
    if i.n <= 6 && i.edges.len() <= 12 && i.max_demand() <= 4 {
        return Algo::Oracle;
    }
    if i.all_unbounded() && !i.demand.is_empty() && i.demand.len() < i.n && i.demand.len() <= 8 {
        return Algo::Mvtsp;
    }
    let cover = compute_vertex_cover(i, 8);
    if cover.exact && cover.vertices.len() <= 8 {
        return Algo::VcFpt;
    }
    Algo::TwDp
}

fn solve_with(
    i: &ConnectedFlowInstance,
    algo: Algo,
    cover: &Option<String>,
    td: &Option<PathBuf>,
    threads: usize,
    budget: Option<u64>,
) -> Result<OracleResult> {
    let algo = if algo == Algo::Auto { pick_auto(i) } else { algo };
    match algo {
        Algo::Auto => unreachable!(),
        Algo::Oracle => solve_exact_with_limit(i, None, budget.unwrap_or(DEFAULT_NODE_LIMIT)),
        Algo::VcFpt => {
            let x = match cover {
                Some(arg) => parse_cover(arg, i.n)?,
                None => compute_vertex_cover(i, i.n).vertices,
            };
            solve_vc_fpt_threads(i, &x, threads.max(1))
        }
        Algo::TwDp => {
            let decomp = match td {
                Some(path) => {
                    let t = parse_td(&read(path)?)?;
                    validate_td(i, &t)?;
                    t
                }
                None => heuristic_td(i),
            };
            solve_tw_dp(i, &decomp)
        }
        Algo::Mvtsp => {
            let (m, pt) = reduce_to_mvtsp(i)?;
            let m_cf = mvtsp_loop_cf(&m, &pt);
            let res = solve_exact_with_limit(&m_cf, None, budget.unwrap_or(DEFAULT_NODE_LIMIT))?;
            if res.status == SolveStatus::Infeasible {
                return Ok(OracleResult { flow: i.zero_flow(), ..res });
            }
            let lifted = lift_tour(i, &m, &pt, &res.flow)?;
            let cost = lifted.cost(i)?;
            Ok(OracleResult { status: SolveStatus::Optimal, cost, flow: lifted, nodes_explored: res.nodes_explored })
        }
    }
}

fn write_out(path: &Option<PathBuf>, content: &str, stdout: &mut String) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).map_err(Error::from),
        None => {
            stdout.push_str(content);
            Ok(())
        }
    }
}

fn run_inner(cfg: &CliConfig) -> Result<(i32, String)> {
    let mut out = String::new();
    match &cfg.cmd {
        Command::Solve { file, algo, cover, td, threads, budget } => {
            let i = load_cf(&read(file)?)?;
            let res = solve_with(&i, *algo, cover, td, *threads, *budget)?;
            if res.status == SolveStatus::Infeasible {
                out.push_str("s infeasible\n");
                return Ok((1, out));
            }
            out.push_str(&write_solution(&i, &res.flow)?);
            Ok((0, out))
        }
        Command::Relax { file } => {
            let i = load_cf(&read(file)?)?;
            let r = solve_relaxation(&i)?;
            if r.status == SolveStatus::Infeasible {
                out.push_str("s infeasible\n");
                return Ok((1, out));
            }
            out.push_str("c relaxed\n");
            out.push_str(&write_solution(&i, &r.flow)?);
            Ok((0, out))
        }
        Command::Verify { file, sol } => {
            let i = load_cf(&read(file)?)?;
            let (_, f) = parse_solution(&i, &read(sol)?)?;
            let rep = verify_solution(&i, &f)?;
            if rep.all_ok() {
                writeln!(out, "s valid {}", rep.cost).unwrap();
                Ok((0, out))
            } else {
                let why = rep
                    .first_violation
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "invalid".into());
                writeln!(out, "s invalid: {}", why).unwrap();
                Ok((1, out))
            }
        }
        Command::Kernelize { file, out: out_path, map, cover } => {
            let m = parse_mvtsp(&read(file)?)?;
            let cf = mvtsp_to_cf(&m);
            let x = match cover {
                Some(arg) => parse_cover(arg, m.n)?,
                None => compute_vertex_cover(&cf, m.n).vertices,
            };
            let (km, cm) = kernelize(&m, &x)?;
            fs::write(out_path, write_mvtsp(&km))?;
            fs::write(map, cm.render())?;
            let fixed: u64 = cm.entries.iter().map(|e| e.fixed_cost).sum();
            writeln!(out, "c kernel n {} fixed {}", km.n, fixed).unwrap();
            Ok((0, out))
        }
        Command::Reduce { what } => match what {
            ReduceCmd::Mvtsp { file, out: out_path, pt } => {
                let i = parse_cf(&read(file)?)?;
                let (m, table) = reduce_to_mvtsp(&i)?;
                write_out(out_path, &write_mvtsp(&m), &mut out)?;
                write_out(pt, &table.render(), &mut out)?;
                Ok((0, out))
            }
        },
        Command::Gen { what } => match what {
            GenCmd::DisjointPaths { graphfile, s1, t1, s2, t2, out: out_path } => {
                let (n, arcs) = parse_digraph(&read(graphfile)?)?;
                let q = DisjointPathsQuery::new(n, arcs, *s1, *t1, *s2, *t2)?;
                let dpi = gen_disjoint_paths_instance(&q);
                let mut text = format!(
                    "c disjoint-paths terminals s1 {} t1 {} s2 {} t2 {}\n",
                    dpi.term[&q.s1], dpi.term[&q.t1], dpi.term[&q.s2], dpi.term[&q.t2]
                );
                text.push_str(&write_cf(&dpi.inst));
                write_out(out_path, &text, &mut out)?;
                Ok((0, out))
            }
            GenCmd::Sat { cnffile, group_size, out: out_path, meta } => {
                let phi = parse_dimacs(&read(cnffile)?)?;
                let (inst, sm) = gen_sat_instance(&phi, *group_size)?;
                write_out(out_path, &write_mvtsp(&inst), &mut out)?;
                write_out(meta, &sm.render(), &mut out)?;
                Ok((0, out))
            }
        },
        Command::Stats { file } => {
            let i = load_cf(&read(file)?)?;
            let cover = compute_vertex_cover(&i, i.n);
            let td = heuristic_td(&i);
            writeln!(out, "n {}", i.n).unwrap();
            writeln!(out, "m {}", i.edges.len()).unwrap();
            writeln!(out, "d {}", i.demand.len()).unwrap();
            writeln!(out, "cover {}", cover.vertices.len()).unwrap();
            writeln!(out, "td-width {}", td.width()).unwrap();
            Ok((0, out))
        }
    }
}

/// Execute a parsed config; returns (exit code, stdout text).
pub fn run(cfg: &CliConfig) -> (i32, String) {
    match run_inner(cfg) {
        Ok(pair) => pair,
        Err(Error::Budget(msg)) => (3, format!("c budget exhausted: {}\n", msg)),
        Err(e) => (2, format!("c error: {}\n", e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str, content: &str) -> PathBuf {
        let p = std::env::temp_dir().join(format!("conflow-cli-{}-{}", std::process::id(), name));
        fs::write(&p, content).unwrap();
        p
    }

    fn run_args(args: &[&str]) -> (i32, String) {
        let cfg = CliConfig::try_parse_from(args).unwrap();
        run(&cfg)
    }

    const TRIANGLE: &str =
        "p cf 3 3 3\nd 1 1\nd 2 1\nd 3 1\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 1 1 inf\n";

    #[test]
    fn solve_oracle_triangle() {
        let f = tmp("tri.cf", TRIANGLE);
        let (code, out) = run_args(&["conflow", "solve", "--algo", "oracle", f.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(out, "s 3\nf 1 2 1\nf 2 3 1\nf 3 1 1\n");
    }

    #[test]
    fn solve_algos_agree_and_auto_picks() {
        let f = tmp("tri2.cf", TRIANGLE);
        let path = f.to_str().unwrap();
        let base = run_args(&["conflow", "solve", "--algo", "oracle", path]);
        for algo in ["vc-fpt", "tw-dp", "auto"] {
            assert_eq!(run_args(&["conflow", "solve", "--algo", algo, path]), base);
        }
        // thread count must not change the bytes
        let threaded =
            run_args(&["conflow", "solve", "--algo", "vc-fpt", "--threads", "4", path]);
        assert_eq!(threaded, base);
    }

    #[test]
    fn solve_infeasible_exits_one() {
        let f = tmp("infeas.cf", "p cf 2 1 1\nd 2 1\ne 2 1 1 inf\n");
        let (code, out) = run_args(&["conflow", "solve", f.to_str().unwrap()]);
        assert_eq!(code, 1);
        assert_eq!(out, "s infeasible\n");
    }

    #[test]
    fn solve_budget_exits_three() {
        let f = tmp("budget.cf", TRIANGLE);
        let (code, _) = run_args(&[
            "conflow", "solve", "--algo", "oracle", "--budget", "1", f.to_str().unwrap(),
        ]);
        assert_eq!(code, 3);
    }

    #[test]
    fn relax_prints_comment() {
        let f = tmp("relax.cf", TRIANGLE);
        let (code, out) = run_args(&["conflow", "relax", f.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.starts_with("c relaxed\ns 3\n"));
    }

    #[test]
    fn verify_good_and_bad() {
        let f = tmp("ver.cf", TRIANGLE);
        let good = tmp("good.sol", "s 3\nf 1 2 1\nf 2 3 1\nf 3 1 1\n");
        let (code, out) =
            run_args(&["conflow", "verify", f.to_str().unwrap(), good.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(out, "s valid 3\n");
        // conservation broken at vertex 2
        let bad = tmp("bad.sol", "s 1\nf 1 2 1\n");
        let (code, out) =
            run_args(&["conflow", "verify", f.to_str().unwrap(), bad.to_str().unwrap()]);
        assert_eq!(code, 1);
        assert!(out.contains("vertex 2"));
    }

    #[test]
    fn parse_error_exits_two() {
        let f = tmp("garbled.cf", "p cf nope\n");
        let (code, out) = run_args(&["conflow", "stats", f.to_str().unwrap()]);
        assert_eq!(code, 2);
        assert!(out.starts_with("c error:"));
    }

    #[test]
    fn stats_twin_cycles() {
        let f = tmp(
            "twin.cf",
            "p cf 4 6 4\nd 1 1\nd 2 1\nd 3 1\nd 4 1\n\
             e 1 2 1 inf\ne 2 1 1 inf\ne 3 4 1 inf\ne 4 3 1 inf\ne 2 3 5 inf\ne 4 1 5 inf\n",
        );
        let (code, out) = run_args(&["conflow", "stats", f.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.starts_with("n 4\nm 6\nd 4\n"));
    }

    #[test]
    fn reduce_and_kernelize_roundtrip() {
        // star: x=1, c=2, y=3
        let f = tmp(
            "star.cf",
            "p cf 3 4 2\nd 1 1\nd 3 1\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 2 1 inf\ne 2 1 1 inf\n",
        );
        let (code, out) = run_args(&["conflow", "reduce", "mvtsp", f.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.starts_with("p mvtsp 2\n"));
        assert!(out.contains("pt 1 3 2 3 1 2 3"));
        // kernelizing a tiny instance is the identity
        let mv = tmp("tiny.mvtsp", "p mvtsp 2\nd 1 1\nd 2 1\ne 1 2 5\ne 2 1 5\n");
        let out_p = tmp("tiny.kernel", "");
        let map_p = tmp("tiny.map", "");
        let (code, msg) = run_args(&[
            "conflow",
            "kernelize",
            mv.to_str().unwrap(),
            "--out",
            out_p.to_str().unwrap(),
            "--map",
            map_p.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        assert_eq!(msg, "c kernel n 2 fixed 0\n");
        assert!(fs::read_to_string(&out_p).unwrap().starts_with("p mvtsp 2\n"));
    }

    #[test]
    fn gen_subcommands() {
        let dg = tmp("q.dg", "p dg 6 4\na 1 5\na 5 2\na 3 6\na 6 4\n");
        let (code, out) = run_args(&[
            "conflow", "gen", "disjoint-paths", dg.to_str().unwrap(), "1", "2", "3", "4",
        ]);
        assert_eq!(code, 0);
        assert!(out.starts_with("c disjoint-paths terminals"));
        let i = parse_cf(&out).unwrap();
        assert_eq!(i.demand.len(), 2);

        let cnf = tmp("f.cnf", "p cnf 3 1\n1 2 3 0\n");
        let meta_p = tmp("f.meta", "");
        let (code, out) = run_args(&[
            "conflow",
            "gen",
            "sat",
            cnf.to_str().unwrap(),
            "--group-size",
            "1",
            "--meta",
            meta_p.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        assert!(out.starts_with("p mvtsp "));
        assert!(fs::read_to_string(&meta_p)
            .unwrap()
            .starts_with("p satmeta s 1 vars 3"));
    }

    #[test]
    fn solve_mvtsp_algo_matches_oracle() {
        let f = tmp(
            "star2.cf",
            "p cf 3 4 2\nd 1 1\nd 3 1\ne 1 2 1 inf\ne 2 3 1 inf\ne 3 2 1 inf\ne 2 1 1 inf\n",
        );
        let path = f.to_str().unwrap();
        let a = run_args(&["conflow", "solve", "--algo", "oracle", path]);
        let b = run_args(&["conflow", "solve", "--algo", "mvtsp", path]);
        assert_eq!(a.0, 0);
        assert_eq!(a.1.lines().next(), b.1.lines().next());
    }
}
