//! The `dynflat` command line: `check`, `verify` and `info`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::diffgeo::{coords, involutive_closure, is_involutive, Distribution};
use crate::error::{Error, Result};
use crate::flatalgo::cases::affine_fields;
use crate::flatalgo::report::ConfigRecord;
use crate::flatalgo::{run, select_case, verify_flat_output, Budget, CaseTag, DChain, RunConfig, RunReport, TraceNode, Verdict, VerifyReport};
use crate::reptest::{ai_test, pai_condition_solutions, pai_filter, to_ai_form, AlphaSolution};
use crate::symcore::parse::parse_expr_list_at;
use crate::symcore::{generic_rank, Expr, NumConfig, Numerics, DEFAULT_SEED};
use crate::sysdsl::{parse_hints, parse_system_with, HintSet, SystemModel};

#[derive(Parser, Debug)]
#[command(name = "dynflat", version, about = "Linearizability by endogenous dynamic feedback of dimension at most two")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the test, derive and verify a flat output.
    Check {
        file: PathBuf,
        #[command(flatten)]
        opts: Options,
    },
    /// Verify a candidate flat output given as two comma separated expressions.
    Verify {
        file: PathBuf,
        candidate: String,
        #[command(flatten)]
        opts: Options,
    },
    /// Print structural diagnostics.
    Info {
        file: PathBuf,
        #[command(flatten)]
        opts: Options,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Sample points per decision.
    #[arg(long, default_value_t = 25)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_zero: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_rank: f64,
    /// Largest #R tried by verification (default n + 4).
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Prolongation events allowed along a path.
    #[arg(long, default_value_t = 2)]
    pub max_prolong: usize,
    /// Case-1 reductions allowed along a path (default n).
    #[arg(long)]
    pub max_case1: Option<usize>,
    #[arg(long)]
    pub hints: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Explore case-3 branches on separate threads.
    #[arg(long)]
    pub parallel: bool,
}

impl Options {
    fn numerics(&self) -> Result<Numerics> {
        if !(self.samples > 0 && self.tol_zero > 0.0 && self.tol_rank > 0.0) {
            return Err(Error::Validation("samples and tolerances must be positive".into()));
        }
        Ok(Numerics::new(
            self.seed,
            NumConfig {
                samples: self.samples,
                tol_zero: self.tol_zero,
                tol_rank: self.tol_rank,
            },
        ))
    }

    fn run_config(&self, m: &SystemModel, hints: HintSet) -> RunConfig {
        RunConfig {
            budget: Budget {
                max_prolong: self.max_prolong,
                max_case1: self.max_case1.unwrap_or(m.n()),
            },
            max_order: self.max_order.unwrap_or(m.n() + 4),
            parallel: self.parallel,
            hints,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load(file: &Path, opts: &Options) -> Result<(SystemModel, HintSet, Numerics)> {
    let num = opts.numerics()?;
    let m = parse_system_with(&read(file)?, &num)?;
    let hints = match &opts.hints {
        Some(p) => {
            let h = parse_hints(&read(p)?)?;
            h.check_names(&m.all_names())?;
            h
        }
        None => HintSet::default(),
    };
    Ok((m, hints, num))
}

fn list(v: &[Expr]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
}

fn verdict_text(v: &Verdict) -> String {
    match v {
        Verdict::Flat {
            d,
            r,
            output,
            case_path,
            verification,
            ..
        } => {
            let mut s = format!("verdict: flat\nd={d}\nR={r:?}\ncase path: {case_path:?}\n");
            for (i, y) in output.iter().enumerate() {
                s.push_str(&format!("y{} = {y}\n", i + 1));
            }
            s.push_str(&residuals(verification));
            s
        }
        Verdict::NotLinearizable { reason, not_flat_at_all } => {
            let mut s = format!("verdict: not linearizable by endogenous feedback of dimension <= 2\nreason: {reason}\n");
            if *not_flat_at_all {
                s.push_str("note: the system is not flat at all\n");
            }
            s
        }
        Verdict::Inconclusive { reason } => format!("verdict: inconclusive\nreason: {reason}\n"),
    }
}

fn residuals(r: &VerifyReport) -> String {
    match (r.max_residual, r.min_singular_ratio) {
        (Some(a), Some(b)) => format!("residual: {a:.3e} (max over {} samples), min singular ratio: {b:.3e}\n", r.samples),
        _ => String::new(),
    }
}

fn trace_text(node: &TraceNode, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let case = serde_json::to_value(node.case).unwrap();
    out.push_str(&format!("{pad}[{}] case {} n={}: {}\n", node.id, case.as_str().unwrap(), node.model.n(), node.reason));
    if let Some(f) = &node.failure {
        out.push_str(&format!("{pad}  failed: {}\n", f.message));
    }
    for b in &node.branches {
        for s in &b.steps {
            if !s.is_identity() || s.prolonged.is_some() {
                out.push_str(&format!("{pad}  - {}\n", s.rationale));
            }
        }
        if let Some(f) = &b.failure {
            out.push_str(&format!("{pad}  branch failed: {}\n", f.message));
        }
        if let Some(n) = &b.node {
            trace_text(n, depth + 1, out);
        }
    }
}

fn check(file: &Path, opts: &Options, out: &mut dyn Write) -> Result<i32> {
    let (m, hints, num) = load(file, opts)?;
    let cfg = opts.run_config(&m, hints);
    let (verdict, trace) = run(&m, &cfg, &num);
    let code = verdict.exit_code();
    let text = match opts.format {
        Format::Json => RunReport::new(&m.name, &cfg, &num, verdict, trace).to_json() + "\n",
        Format::Text => {
            let mut s = format!("system: {}\n", m.name);
            s.push_str(&verdict_text(&verdict));
            s.push_str("trace:\n");
            trace_text(&trace, 1, &mut s);
            s
        }
    };
    out.write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string()))?;
    Ok(code)
}

#[derive(Serialize)]
struct VerifyDoc<'a> {
    schema: &'static str,
    system: &'a str,
    config: ConfigRecord,
    candidate: &'a [Expr],
    report: &'a VerifyReport,
}

fn verify(file: &Path, candidate: &str, opts: &Options, out: &mut dyn Write) -> Result<i32> {
    let (m, hints, num) = load(file, opts)?;
    let cand = parse_expr_list_at(candidate, 1, 1)?;
    if cand.len() != m.m() {
        return Err(Error::Validation(format!("expected {} output components, got {}", m.m(), cand.len())));
    }
    let cfg = opts.run_config(&m, hints);
    let report = verify_flat_output(&m, &cand, cfg.max_order, &num)?;
    let code = if report.verified { 0 } else { 2 };
    let text = match opts.format {
        Format::Json => {
            let doc = VerifyDoc {
                schema: "dynflat.verify/1",
                system: &m.name,
                config: ConfigRecord::new(&cfg, &num),
                candidate: &cand,
                report: &report,
            };
            serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
        }
        Format::Text => {
            let mut s = format!("system: {}\ncandidate: {}\n", m.name, list(&cand));
            if report.verified {
                s.push_str(&format!(
                    "verified: yes\nR={:?}\nd={}\n",
                    report.r.clone().unwrap(),
                    report.d.unwrap()
                ));
                s.push_str(&residuals(&report));
            } else {
                s.push_str(&format!("verified: no\nreason: {}\n", report.message));
            }
            s
        }
    };
    out.write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string()))?;
    Ok(code)
}

/// Structural diagnostics of a system.
#[derive(Clone, Debug, Serialize)]
pub struct Info {
    pub schema: &'static str,
    pub system: String,
    pub n: usize,
    pub m: usize,
    pub input_rank: usize,
    pub ai: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d1_involutive: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pai_candidates: Option<Vec<AlphaSolution>>,
    pub sfl: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controllability_indices: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseTag>,
}

pub fn info_of(m: &SystemModel, num: &Numerics) -> Result<Info> {
    let domain = m.sampling_domain();
    let input_rank = generic_rank(&m.input_fields(), &domain, num)?;
    let chain = DChain::compute(m, num)?;
    let sfl = chain.is_sfl(m);
    let ai = ai_test(m, num)?;
    let mut info = Info {
        schema: "dynflat.info/1",
        system: m.name.clone(),
        n: m.n(),
        m: m.m(),
        input_rank,
        ai,
        d1_involutive: None,
        closure_dim: None,
        pai_candidates: None,
        sfl,
        controllability_indices: sfl.then(|| chain.indices()),
        case: None,
    };
    if m.m() != 2 {
        return Ok(info);
    }
    if ai {
        let (am, _) = to_ai_form(m, num)?;
        let ad = am.sampling_domain();
        let d1 = Distribution::new(&coords(&am.states), affine_fields(&am).inputs);
        info.d1_involutive = Some(is_involutive(&d1, &ad, num)?);
        info.closure_dim = Some(involutive_closure(&d1, &ad, num)?.rank(&ad, num)?);
    } else {
        let mut sols = pai_condition_solutions(m, num).unwrap_or_default();
        for s in sols.iter_mut() {
            s.passes_filter = Some(pai_filter(m, &s.alpha, num)?);
        }
        info.pai_candidates = Some(sols);
    }
    if !sfl {
        info.case = Some(select_case(m, num)?);
    }
    Ok(info)
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn info(file: &Path, opts: &Options, out: &mut dyn Write) -> Result<i32> {
    let (m, _, num) = load(file, opts)?;
    let i = info_of(&m, &num)?;
    let text = match opts.format {
        Format::Json => serde_json::to_string_pretty(&i).expect("info serializes") + "\n",
        Format::Text => {
            let mut s = format!("system: {}\nn: {}\ninputs: {}\ninput rank: {}\nAI: {}\n", i.system, i.n, i.m, i.input_rank, yes(i.ai));
            if let Some(b) = i.d1_involutive {
                s.push_str(&format!("D1 involutive: {}\n", yes(b)));
            }
            if let Some(d) = i.closure_dim {
                s.push_str(&format!("dim of involutive closure of D1: {d}\n"));
            }
            if let Some(c) = &i.pai_candidates {
                let pass = c.iter().filter(|s| s.passes_filter == Some(true)).count();
                s.push_str(&format!("PAI candidates: {}; pass filter: {pass}\n", c.len()));
                for sol in c {
                    s.push_str(&format!(
                        "  alpha = ({}, {}){}\n",
                        sol.alpha[0],
                        sol.alpha[1],
                        if sol.passes_filter == Some(true) { "  passes" } else { "" }
                    ));
                }
            }
            s.push_str(&format!("SFL: {}\n", yes(i.sfl)));
            if let Some(k) = &i.controllability_indices {
                s.push_str(&format!("controllability indices: {k:?}\n"));
            }
            if let Some(c) = i.case {
                s.push_str(&format!("case: {}\n", serde_json::to_value(c).unwrap().as_str().unwrap()));
            }
            s
        }
    };
    out.write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string()))?;
    Ok(0)
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code: 0 flat or verified, 2 negative, 3 inconclusive, 1 usage error.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    1
                }
            };
        }
    };
    let res = match &cli.command {
        Command::Check { file, opts } => check(file, opts, out),
        Command::Verify { file, candidate, opts } => verify(file, candidate, opts, out),
        Command::Info { file, opts } => info(file, opts, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
