use serde::Serialize;

use super::cases::{build_bc, case2_step, case3_step, classify, Case3Branch, CaseTag};
use super::extract::extract_linearizing_output;
use super::pullback::{pull_back, Link};
use super::sfl::DChain;
use super::verify::{verify_flat_output, VerifyReport};
use crate::coordxform::{decompose, single_input_reduce, TransformStep};
use crate::error::Error;
use crate::symcore::{Expr, Numerics};
use crate::sysdsl::{HintSet, SystemModel};

/// Limits on the branch exploration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Budget {
    /// Prolongation events (cases 2 and 3) along a path.
    pub max_prolong: usize,
    /// Case-1 reductions along a path.
    pub max_case1: usize,
}

impl Budget {
    pub fn for_model(m: &SystemModel) -> Budget {
        Budget {
            max_prolong: 2,
            max_case1: m.n(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub budget: Budget,
    /// Largest `#R` tried when verifying.
    pub max_order: usize,
    pub parallel: bool,
    pub hints: HintSet,
}

impl RunConfig {
    pub fn for_model(m: &SystemModel) -> RunConfig {
        RunConfig {
            budget: Budget::for_model(m),
            max_order: m.n() + 4,
            parallel: false,
            hints: HintSet::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// A structural failure: no solution exists or the budget is spent.
    Definite,
    /// Blocked by a construction the implementation could not complete.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub not_flat_at_all: bool,
}

/// Output found at a terminal node, before and after pull-back.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TerminalOutput {
    /// Linearizing output in the terminal coordinates.
    pub local: Vec<Expr>,
    pub local_check: VerifyReport,
    /// The same output in the original variables.
    pub original: Vec<Expr>,
    pub verification: VerifyReport,
}

/// One node of the exploration tree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceNode {
    pub id: String,
    pub model: SystemModel,
    pub case: CaseTag,
    pub reason: String,
    /// Prolongation events on the path from the root.
    pub prolongations: usize,
    pub case1_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<TerminalOutput>,
    pub branches: Vec<Branch>,
}

/// An edge of the tree: the steps leading to a child node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Branch {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[Expr; 2]>,
    pub steps: Vec<TransformStep>,
    /// Model after each step.
    #[serde(skip)]
    pub models: Vec<SystemModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<Box<TraceNode>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Flat {
        d: i64,
        r: Vec<usize>,
        output: Vec<Expr>,
        case_path: Vec<u8>,
        prolongations: usize,
        verification: VerifyReport,
    },
    NotLinearizable {
        reason: String,
        #[serde(skip_serializing_if = "std::ops::Not::not")]
        not_flat_at_all: bool,
    },
    Inconclusive {
        reason: String,
    },
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Flat { .. } => 0,
            Verdict::NotLinearizable { .. } => 2,
            Verdict::Inconclusive { .. } => 3,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, Verdict::Flat { .. })
    }
}

fn failure_of(e: &Error) -> Failure {
    let kind = if e.is_definite() {
        FailureKind::Definite
    } else {
        FailureKind::Inconclusive
    };
    let message = match e {
        Error::Straighten(_) => format!("straightening needs a hint: {e}"),
        _ => e.to_string(),
    };
    Failure {
        kind,
        message,
        not_flat_at_all: false,
    }
}

fn definite(msg: impl Into<String>) -> Failure {
    Failure {
        kind: FailureKind::Definite,
        message: msg.into(),
        not_flat_at_all: false,
    }
}

fn inconclusive(msg: impl Into<String>) -> Failure {
    Failure {
        kind: FailureKind::Inconclusive,
        message: msg.into(),
        not_flat_at_all: false,
    }
}

#[derive(Clone, Debug)]
enum Outcome {
    Flat(Verdict),
    Failed(Failure),
}

/// Merges branch outcomes: the first success wins, then any inconclusive
/// branch, then the first definite failure.
fn merge(outcomes: Vec<Outcome>) -> Outcome {
    if let Some(f) = outcomes.iter().find(|o| matches!(o, Outcome::Flat(_))) {
        return f.clone();
    }
    let fails: Vec<Failure> = outcomes
        .into_iter()
        .map(|o| match o {
            Outcome::Failed(f) => f,
            Outcome::Flat(_) => unreachable!(),
        })
        .collect();
    if let Some(f) = fails.iter().find(|f| f.kind == FailureKind::Inconclusive) {
        return Outcome::Failed(f.clone());
    }
    let mut first = fails.first().cloned().unwrap_or_else(|| definite("no branch to explore"));
    first.not_flat_at_all = fails.iter().any(|f| f.not_flat_at_all);
    Outcome::Failed(first)
}

struct Ctx<'a> {
    root: &'a SystemModel,
    cfg: &'a RunConfig,
}

struct State {
    id: String,
    links: Vec<Link>,
    prolongations: usize,
    case1: usize,
    path: Vec<u8>,
}

impl State {
    fn child(&self, idx: usize, links: Vec<Link>, tag: CaseTag) -> State {
        let mut path = self.path.clone();
        path.extend(tag.number());
        State {
            id: format!("{}.{idx}", self.id),
            links,
            prolongations: self.prolongations + usize::from(matches!(tag, CaseTag::Case2Dim3 | CaseTag::Case2Dim4 | CaseTag::Case3)),
            case1: self.case1 + usize::from(tag == CaseTag::Case1),
            path,
        }
    }
}

fn chain_links(mut links: Vec<Link>, start: &SystemModel, steps: &[(TransformStep, SystemModel)]) -> Vec<Link> {
    let mut parent = start.clone();
    for (step, child) in steps {
        links.push(Link {
            parent: parent.clone(),
            step: step.clone(),
            child: child.clone(),
        });
        parent = child.clone();
    }
    links
}

/// Extracts, pulls back and verifies an output at a static feedback
/// linearizable node. `extra` appends fixed components (the dropped input
/// of a single-input reduction).
fn finish(ctx: &Ctx, m: &SystemModel, st: &State, extra: &[Expr], num: &Numerics) -> (Option<TerminalOutput>, Outcome) {
    let h = &ctx.cfg.hints;
    let hints: Vec<Expr> = h.linearizing_outputs.iter().flatten().chain(&h.first_integrals).cloned().collect();
    let local = match extract_linearizing_output(m, &hints, num) {
        Ok(y) => y,
        Err(e) => return (None, Outcome::Failed(failure_of(&e))),
    };
    let local_check = match verify_flat_output(m, &local, m.n() + 4, num) {
        Ok(r) => r,
        Err(e) => return (None, Outcome::Failed(failure_of(&e))),
    };
    let mut y = local.clone();
    y.extend(extra.iter().cloned());
    let original = match pull_back(&st.links, &y) {
        Ok(y) => y,
        Err(e) => return (None, Outcome::Failed(failure_of(&e))),
    };
    let verification = match verify_flat_output(ctx.root, &original, ctx.cfg.max_order, num) {
        Ok(r) => r,
        Err(e) => return (None, Outcome::Failed(failure_of(&e))),
    };
    let out = TerminalOutput {
        local,
        local_check: local_check.clone(),
        original: original.clone(),
        verification: verification.clone(),
    };
    if !local_check.verified || local_check.d != Some(0) {
        return (Some(out), Outcome::Failed(inconclusive("linearizing output fails its own check")));
    }
    if !verification.verified {
        return (
            Some(out),
            Outcome::Failed(inconclusive(format!("pulled-back output fails verification: {}", verification.message))),
        );
    }
    let verdict = Verdict::Flat {
        d: verification.d.unwrap(),
        r: verification.r.clone().unwrap(),
        output: original,
        case_path: st.path.clone(),
        prolongations: st.prolongations,
        verification,
    };
    (Some(out), Outcome::Flat(verdict))
}

fn leaf(m: &SystemModel, st: &State, case: CaseTag, reason: impl Into<String>, failure: Failure) -> (TraceNode, Outcome) {
    let node = TraceNode {
        id: st.id.clone(),
        model: m.clone(),
        case,
        reason: reason.into(),
        prolongations: st.prolongations,
        case1_steps: st.case1,
        failure: Some(failure.clone()),
        output: None,
        branches: Vec::new(),
    };
    (node, Outcome::Failed(failure))
}

fn explore(ctx: &Ctx, m: SystemModel, st: State, num: &Numerics) -> (TraceNode, Outcome) {
    assert!(st.prolongations <= ctx.cfg.budget.max_prolong, "prolongation budget exceeded");
    assert!(st.case1 <= ctx.cfg.budget.max_case1, "case-1 budget exceeded");
    let mut node = TraceNode {
        id: st.id.clone(),
        model: m.clone(),
        case: CaseTag::Inconclusive,
        reason: String::new(),
        prolongations: st.prolongations,
        case1_steps: st.case1,
        failure: None,
        output: None,
        branches: Vec::new(),
    };
    let chain = match DChain::compute(&m, num) {
        Ok(c) => c,
        Err(e) => return leaf(&m, &st, CaseTag::Inconclusive, "linearizability test failed", failure_of(&e)),
    };
    if chain.is_sfl(&m) {
        node.case = CaseTag::TerminalSfl;
        node.reason = format!("static feedback linearizable, controllability indices {:?}", chain.indices());
        let (out, outcome) = finish(ctx, &m, &st, &[], num);
        node.output = out;
        if let Outcome::Failed(f) = &outcome {
            node.failure = Some(f.clone());
        }
        return (node, outcome);
    }
    if m.m() != 2 {
        return leaf(&m, &st, CaseTag::TerminalFail, "single-input system that is not linearizable", definite("not static feedback linearizable"));
    }
    let sel = match classify(&m, num) {
        Ok(s) => s,
        Err(e) => return leaf(&m, &st, CaseTag::Inconclusive, "case selection failed", failure_of(&e)),
    };
    node.case = sel.tag;
    node.reason = sel.reason.clone();
    let budget = &ctx.cfg.budget;
    match sel.tag {
        CaseTag::TerminalFail => {
            let f = definite(format!("none of the cases applies: {}", sel.reason));
            node.failure = Some(f.clone());
            (node, Outcome::Failed(f))
        }
        CaseTag::Case1 => {
            if st.case1 >= budget.max_case1 {
                let f = definite("case-1 budget exhausted");
                node.failure = Some(f.clone());
                return (node, Outcome::Failed(f));
            }
            let (am, ai_step) = sel.affine.unwrap();
            let hints = &ctx.cfg.hints.first_integrals;
            let dec = match decompose(&am, hints, num) {
                Ok(d) => d,
                Err(e) => {
                    let f = failure_of(&e);
                    node.failure = Some(f.clone());
                    return (node, Outcome::Failed(f));
                }
            };
            let mut steps = Vec::new();
            let mut pairs = Vec::new();
            if !ai_step.is_identity() {
                steps.push(ai_step.clone());
                pairs.push((ai_step, am.clone()));
            }
            steps.push(dec.step.clone());
            pairs.push((dec.step.clone(), dec.model.clone()));
            let models = pairs.iter().map(|p| p.1.clone()).collect();
            let links = chain_links(st.links.clone(), &m, &pairs);
            let child_st = st.child(0, links, CaseTag::Case1);
            let (child, outcome) = if dec.redundant {
                reduce_single_input(ctx, dec.model, child_st, num)
            } else {
                explore(ctx, dec.model, child_st, &num.fork(0))
            };
            node.branches.push(Branch {
                alpha: None,
                steps,
                models,
                failure: None,
                node: Some(Box::new(child)),
            });
            (node, outcome)
        }
        CaseTag::Case2Dim3 | CaseTag::Case2Dim4 => {
            if st.prolongations >= budget.max_prolong {
                let f = definite("difference budget exhausted");
                node.failure = Some(f.clone());
                return (node, Outcome::Failed(f));
            }
            let (am, ai_step) = sel.affine.unwrap();
            let alpha = match build_bc(&am, sel.tag, num) {
                Ok(a) => a,
                Err(e) => {
                    let f = failure_of(&e);
                    node.failure = Some(f.clone());
                    return (node, Outcome::Failed(f));
                }
            };
            let c2 = match case2_step(&am, &alpha) {
                Ok(x) => x,
                Err(e) => {
                    let f = failure_of(&e);
                    node.failure = Some(f.clone());
                    return (node, Outcome::Failed(f));
                }
            };
            let mut steps = Vec::new();
            let mut pairs = Vec::new();
            if !ai_step.is_identity() {
                steps.push(ai_step.clone());
                pairs.push((ai_step, am.clone()));
            }
            let child = c2.last().unwrap().1.clone();
            steps.extend(c2.iter().map(|(s, _)| s.clone()));
            pairs.extend(c2);
            let models = pairs.iter().map(|p| p.1.clone()).collect();
            let links = chain_links(st.links.clone(), &m, &pairs);
            let (cnode, outcome) = explore(ctx, child, st.child(0, links, sel.tag), &num.fork(0));
            node.branches.push(Branch {
                alpha: Some(alpha),
                steps,
                models,
                failure: None,
                node: Some(Box::new(cnode)),
            });
            (node, outcome)
        }
        CaseTag::Case3 => {
            if st.prolongations >= budget.max_prolong {
                let f = definite("difference budget exhausted");
                node.failure = Some(f.clone());
                return (node, Outcome::Failed(f));
            }
            let (total, branches) = match case3_step(&m, &ctx.cfg.hints.first_integrals, num) {
                Ok(b) => b,
                Err(e) => {
                    let f = failure_of(&e);
                    node.failure = Some(f.clone());
                    return (node, Outcome::Failed(f));
                }
            };
            node.reason = format!("{}; {total} PAI candidate(s), {} pass the filter", sel.reason, branches.len());
            let nums: Vec<Numerics> = (0..branches.len()).map(|i| num.fork(i as u64)).collect();
            let jobs: Vec<(usize, Case3Branch)> = branches.into_iter().enumerate().collect();
            let run_one = |(i, b): (usize, Case3Branch), bn: &Numerics| -> (Branch, Outcome) {
                match b.result {
                    Err(e) => {
                        let f = failure_of(&e);
                        let br = Branch {
                            alpha: Some(b.alpha),
                            steps: Vec::new(),
                            models: Vec::new(),
                            failure: Some(f.clone()),
                            node: None,
                        };
                        (br, Outcome::Failed(f))
                    }
                    Ok(pairs) => {
                        let child = pairs.last().unwrap().1.clone();
                        let steps: Vec<TransformStep> = pairs.iter().map(|(s, _)| s.clone()).collect();
                        let links = chain_links(st.links.clone(), &m, &pairs);
                        let (cnode, outcome) = explore(ctx, child, st.child(i, links, CaseTag::Case3), bn);
                        let br = Branch {
                            alpha: Some(b.alpha),
                            steps,
                            models: pairs.into_iter().map(|p| p.1).collect(),
                            failure: None,
                            node: Some(Box::new(cnode)),
                        };
                        (br, outcome)
                    }
                }
            };
            let results: Vec<(Branch, Outcome)> = if ctx.cfg.parallel && jobs.len() > 1 {
                std::thread::scope(|s| {
                    let handles: Vec<_> = jobs
                        .into_iter()
                        .zip(&nums)
                        .map(|(job, bn)| s.spawn(move || run_one(job, bn)))
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("branch thread panicked")).collect()
                })
            } else {
                jobs.into_iter().zip(&nums).map(|(job, bn)| run_one(job, bn)).collect()
            };
            let mut outcomes = Vec::new();
            for (br, o) in results {
                node.branches.push(br);
                outcomes.push(o);
            }
            let outcome = merge(outcomes);
            (node, outcome)
        }
        CaseTag::TerminalSfl | CaseTag::Inconclusive => unreachable!("not produced by classify"),
    }
}

fn reduce_single_input(ctx: &Ctx, m: SystemModel, st: State, num: &Numerics) -> (TraceNode, Outcome) {
    let mut node = TraceNode {
        id: st.id.clone(),
        model: m.clone(),
        case: CaseTag::TerminalFail,
        reason: "inputs enter through one combination only".into(),
        prolongations: st.prolongations,
        case1_steps: st.case1,
        failure: None,
        output: None,
        branches: Vec::new(),
    };
    let (red, step, dropped) = match single_input_reduce(&m, &ctx.cfg.hints.first_integrals, num) {
        Ok(x) => x,
        Err(e) => {
            let f = failure_of(&e);
            node.case = CaseTag::Inconclusive;
            node.failure = Some(f.clone());
            return (node, Outcome::Failed(f));
        }
    };
    let links = chain_links(st.links.clone(), &m, &[(step.clone(), red.clone())]);
    let red_st = State {
        id: format!("{}.0", st.id),
        links,
        prolongations: st.prolongations,
        case1: st.case1,
        path: st.path.clone(),
    };
    let rnum = num.fork(0);
    let mut child = TraceNode {
        id: red_st.id.clone(),
        model: red.clone(),
        case: CaseTag::TerminalFail,
        reason: String::new(),
        prolongations: red_st.prolongations,
        case1_steps: red_st.case1,
        failure: None,
        output: None,
        branches: Vec::new(),
    };
    let outcome = match DChain::compute(&red, &rnum) {
        Ok(chain) if chain.is_sfl(&red) => {
            child.case = CaseTag::TerminalSfl;
            child.reason = "single-input reduction is static feedback linearizable".into();
            let (out, o) = finish(ctx, &red, &red_st, &[Expr::symbol(&dropped)], &rnum);
            child.output = out;
            o
        }
        Ok(_) => {
            child.reason = "single-input reduction is not static feedback linearizable".into();
            Outcome::Failed(Failure {
                kind: FailureKind::Definite,
                message: "single-input reduction is not linearizable".into(),
                not_flat_at_all: true,
            })
        }
        Err(e) => {
            child.case = CaseTag::Inconclusive;
            Outcome::Failed(failure_of(&e))
        }
    };
    if let Outcome::Failed(f) = &outcome {
        child.failure = Some(f.clone());
    }
    node.case = CaseTag::Case1;
    node.branches.push(Branch {
        alpha: None,
        steps: vec![step],
        models: vec![red],
        failure: None,
        node: Some(Box::new(child)),
    });
    (node, outcome)
}

impl TraceNode {
    /// Every transformation in the tree with the models on both sides.
    pub fn links(&self) -> Vec<Link> {
        let mut out = Vec::new();
        for b in &self.branches {
            let mut parent = &self.model;
            for (step, child) in b.steps.iter().zip(&b.models) {
                out.push(Link {
                    parent: parent.clone(),
                    step: step.clone(),
                    child: child.clone(),
                });
                parent = child;
            }
            if let Some(n) = &b.node {
                out.extend(n.links());
            }
        }
        out
    }
}

/// Runs the test on `m`: explores the case tree and returns the verdict
/// together with the trace.
pub fn run(m: &SystemModel, cfg: &RunConfig, num: &Numerics) -> (Verdict, TraceNode) {
    let ctx = Ctx { root: m, cfg };
    let st = State {
        id: "0".into(),
        links: Vec::new(),
        prolongations: 0,
        case1: 0,
        path: Vec::new(),
    };
    let (node, outcome) = explore(&ctx, m.clone(), st, num);
    let verdict = match outcome {
        Outcome::Flat(v) => v,
        Outcome::Failed(f) => match f.kind {
            FailureKind::Definite => Verdict::NotLinearizable {
                reason: f.message,
                not_flat_at_all: f.not_flat_at_all,
            },
            FailureKind::Inconclusive => Verdict::Inconclusive { reason: f.message },
        },
    };
    (verdict, node)
}
