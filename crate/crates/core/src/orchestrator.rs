//! Simulated hammer pipeline.
//!
//! Goals live in a small propositional logic with implications. A best-first
//! search expands pending rule applications ordered by the product of rule
//! weights along the path:
//!
//! * built-in rules (trivial, reflexivity, assumption, and/iff splitting,
//!   implication introduction) are applied eagerly; disjunction introduction
//!   is an alternative at weight 1,
//! * premise applications (backward chaining on a selected premise's rule)
//!   at weight 0.20, over the top `k2` selected premises,
//! * an external-prover call at weight 0.10, given the top `k1` premises.
//!
//! A prover call translates the goal, asks the prover for an unsat core, and
//! hands exactly that core to reconstruction.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::rc::Rc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

pub const BUILTIN_WEIGHT: f64 = 1.0;
pub const PREMISE_APPLICATION_WEIGHT: f64 = 0.20;
pub const PROVER_WEIGHT: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    True,
    Atom(String),
    Eq(String, String),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Imp(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(s: impl Into<String>) -> Self {
        Formula::Atom(s.into())
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn imp(a: Formula, b: Formula) -> Self {
        Formula::Imp(Box::new(a), Box::new(b))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "True"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Eq(a, b) => write!(f, "Eq ({a}) ({b})"),
            Formula::And(a, b) => write!(f, "And ({a}) ({b})"),
            Formula::Or(a, b) => write!(f, "Or ({a}) ({b})"),
            Formula::Iff(a, b) => write!(f, "Iff ({a}) ({b})"),
            Formula::Imp(a, b) => write!(f, "({a}) → ({b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Goal {
    pub hyps: BTreeSet<Formula>,
    pub target: Formula,
}

impl Goal {
    pub fn new(target: Formula) -> Self {
        Goal {
            hyps: BTreeSet::new(),
            target,
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for h in &self.hyps {
            write!(f, "{h}, ")?;
        }
        write!(f, "⊢ {}", self.target)
    }
}

/// How a premise can be applied backwards: proving `hyps` proves `concl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PremiseRule {
    pub premise: String,
    #[serde(default)]
    pub hyps: Vec<Formula>,
    pub concl: Formula,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Aesop,
    Auto,
    AesopAuto,
    Full,
    Cumul,
}

impl Variant {
    pub const SINGLE: [Variant; 4] = [Variant::Aesop, Variant::Auto, Variant::AesopAuto, Variant::Full];
    pub const ALL: [Variant; 5] = [
        Variant::Aesop,
        Variant::Auto,
        Variant::AesopAuto,
        Variant::Full,
        Variant::Cumul,
    ];

    fn uses_search(self) -> bool {
        !matches!(self, Variant::Auto)
    }

    fn uses_premise_applications(self) -> bool {
        matches!(self, Variant::Aesop | Variant::Full)
    }

    fn uses_prover_rule(self) -> bool {
        matches!(self, Variant::AesopAuto | Variant::Full)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Aesop => "aesop",
            Variant::Auto => "auto",
            Variant::AesopAuto => "aesop_auto",
            Variant::Full => "full",
            Variant::Cumul => "cumul",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    BuiltinSearch,
    PremiseApplication,
    Translation,
    ExternalProver,
    Reconstruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    None,
    TranslationFailure,
    ProverFailure,
    ReconstructionFailure,
    OtherError,
    Timeout,
}

fn default_k1() -> usize {
    16
}
fn default_k2() -> usize {
    32
}
fn default_prover_timeout() -> f64 {
    10.0
}
fn default_wall_timeout() -> f64 {
    300.0
}
fn default_step_budget() -> u64 {
    200_000
}
fn default_variant() -> Variant {
    Variant::Full
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofTask {
    pub id: String,
    pub goal: Formula,
    #[serde(default)]
    pub hyps: Vec<Formula>,
    pub accessible: Vec<String>,
    /// Backward-chaining forms of premises, used by premise applications.
    #[serde(default)]
    pub rules: Vec<PremiseRule>,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_k1")]
    pub k1: usize,
    #[serde(default = "default_k2")]
    pub k2: usize,
    #[serde(default = "default_prover_timeout")]
    pub prover_timeout_s: f64,
    #[serde(default = "default_wall_timeout")]
    pub wall_timeout_s: f64,
    #[serde(default = "default_step_budget")]
    pub step_budget: u64,
    /// `cumul` only: give each variant a fresh budget instead of sharing one
    /// wall clock.
    #[serde(default)]
    pub independent_budgets: bool,
}

impl ProofTask {
    pub fn new(id: impl Into<String>, goal: Formula, accessible: Vec<String>) -> Self {
        ProofTask {
            id: id.into(),
            goal,
            hyps: Vec::new(),
            accessible,
            rules: Vec::new(),
            variant: Variant::Full,
            k1: default_k1(),
            k2: default_k2(),
            prover_timeout_s: default_prover_timeout(),
            wall_timeout_s: default_wall_timeout(),
            step_budget: default_step_budget(),
            independent_budgets: false,
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        ProofTask {
            variant,
            ..self.clone()
        }
    }

    fn root_goal(&self) -> Goal {
        Goal {
            hyps: self.hyps.iter().cloned().collect(),
            target: self.goal.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Builtin { rule: String, goal: String },
    PremiseApplication { premise: String, goal: String, subgoals: usize },
    Translate { goal: String, premises: Vec<String>, ok: bool },
    Prove { goal: String, premises: Vec<String>, core: Option<Vec<String>> },
    Reconstruct { goal: String, core: Vec<String>, ok: bool },
    Budget { reason: String },
    VariantStart { variant: Variant },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofOutcome {
    pub variant: Variant,
    pub proved: bool,
    pub premises_used: BTreeSet<String>,
    pub phase: Phase,
    pub failure_category: FailureCategory,
    /// Seconds per phase.
    pub timings: BTreeMap<Phase, f64>,
    pub elapsed_s: f64,
    pub steps: u64,
    pub trace: Vec<TraceEvent>,
}

/// Translated problem handed to the prover.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatedProblem {
    pub goal: Goal,
    pub premises: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendFailure {
    Translation(String),
    Prover(String),
    Timeout,
    Reconstruction(String),
    Other(String),
}

/// Result of a prover call together with the time to charge for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProveResult {
    pub core: Result<Vec<String>, BackendFailure>,
    pub elapsed: Duration,
}

/// Translation, external proving, and reconstruction.
pub trait ProverBackend: Send + Sync {
    fn translate(&self, goal: &Goal, premises: &[String]) -> Result<TranslatedProblem, BackendFailure>;
    /// Returns a subset of `problem.premises` sufficient for the goal.
    fn prove(&self, problem: &TranslatedProblem, timeout: Duration) -> ProveResult;
    /// Rebuilds a proof from exactly the prover's core.
    fn reconstruct(&self, goal: &Goal, core: &[String]) -> Result<(), BackendFailure>;
}

/// One row of a mock entailment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentEntry {
    pub goal: Formula,
    /// Minimal premise sets that entail the goal.
    #[serde(default)]
    pub subsets: Vec<Vec<String>>,
    #[serde(default)]
    pub untranslatable: bool,
    #[serde(default)]
    pub reconstruction_poison: bool,
    #[serde(default)]
    pub other_error: bool,
    /// Simulated prover time.
    #[serde(default)]
    pub prove_seconds: f64,
}

impl EntailmentEntry {
    pub fn provable(goal: Formula, subsets: Vec<Vec<&str>>) -> Self {
        EntailmentEntry {
            goal,
            subsets: subsets
                .into_iter()
                .map(|s| s.into_iter().map(str::to_string).collect())
                .collect(),
            untranslatable: false,
            reconstruction_poison: false,
            other_error: false,
            prove_seconds: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendCall {
    Translate { goal: Goal, premises: Vec<String> },
    Prove { goal: Goal, premises: Vec<String> },
    Reconstruct { goal: Goal, core: Vec<String> },
}

/// Table-driven stand-in for translation, proving and reconstruction.
/// Goals are matched on their target formula.
#[derive(Debug, Default)]
pub struct MockBackend {
    table: Vec<EntailmentEntry>,
    calls: Mutex<Vec<BackendCall>>,
}

pub fn mock_backend(table: Vec<EntailmentEntry>) -> MockBackend {
    MockBackend::new(table)
}

impl MockBackend {
    pub fn new(table: Vec<EntailmentEntry>) -> Self {
        MockBackend {
            table,
            calls: Mutex::new(Vec::new()),
        }
    }

    fn entry(&self, goal: &Goal) -> Option<&EntailmentEntry> {
        self.table.iter().find(|e| e.goal == goal.target)
    }

    pub fn calls(&self) -> Vec<BackendCall> {
        self.calls.lock().clone()
    }

    pub fn clear_calls(&self) {
        self.calls.lock().clear();
    }
}

impl ProverBackend for MockBackend {
    fn translate(&self, goal: &Goal, premises: &[String]) -> Result<TranslatedProblem, BackendFailure> {
        self.calls.lock().push(BackendCall::Translate {
            goal: goal.clone(),
            premises: premises.to_vec(),
        });
        match self.entry(goal) {
            Some(e) if e.other_error => Err(BackendFailure::Other("planted error".into())),
            Some(e) if e.untranslatable => Err(BackendFailure::Translation("untranslatable goal".into())),
            _ => Ok(TranslatedProblem {
                goal: goal.clone(),
                premises: premises.to_vec(),
            }),
        }
    }

    fn prove(&self, problem: &TranslatedProblem, timeout: Duration) -> ProveResult {
        self.calls.lock().push(BackendCall::Prove {
            goal: problem.goal.clone(),
            premises: problem.premises.clone(),
        });
        let Some(e) = self.entry(&problem.goal) else {
            return ProveResult {
                core: Err(BackendFailure::Prover("saturated".into())),
                elapsed: Duration::ZERO,
            };
        };
        let elapsed = Duration::from_secs_f64(e.prove_seconds.max(0.0));
        if elapsed > timeout {
            return ProveResult {
                core: Err(BackendFailure::Timeout),
                elapsed: timeout,
            };
        }
        let supplied: BTreeSet<&str> = problem.premises.iter().map(String::as_str).collect();
        let core = e
            .subsets
            .iter()
            .filter(|s| s.iter().all(|n| supplied.contains(n.as_str())))
            .map(|s| {
                let mut s = s.clone();
                s.sort();
                s.dedup();
                s
            })
            .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        ProveResult {
            core: core.ok_or_else(|| BackendFailure::Prover("no entailing subset supplied".into())),
            elapsed,
        }
    }

    fn reconstruct(&self, goal: &Goal, core: &[String]) -> Result<(), BackendFailure> {
        self.calls.lock().push(BackendCall::Reconstruct {
            goal: goal.clone(),
            core: core.to_vec(),
        });
        match self.entry(goal) {
            Some(e) if e.reconstruction_poison => Err(BackendFailure::Reconstruction("poisoned".into())),
            _ => Ok(()),
        }
    }
}

/// Wall clock plus simulated time reported by backends.
#[derive(Debug)]
struct Clock {
    start: Instant,
    simulated: Duration,
}

impl Clock {
    fn new() -> Self {
        Clock {
            start: Instant::now(),
            simulated: Duration::ZERO,
        }
    }

    fn now(&self) -> f64 {
        (self.start.elapsed() + self.simulated).as_secs_f64()
    }
}

#[derive(Debug)]
struct Node {
    goals: Vec<Goal>,
    used: BTreeSet<String>,
    prio: f64,
    via_prover: bool,
    via_premise: bool,
}

#[derive(Debug, Clone)]
enum Rule {
    OrIntro { left: bool },
    Premise { rule: usize },
    Prover,
}

struct Pending {
    prio: f64,
    seq: u64,
    node: Rc<Node>,
    rule: Rule,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // max-heap: higher priority first, then earlier insertion
    fn cmp(&self, other: &Self) -> Ordering {
        self.prio
            .total_cmp(&other.prio)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct Failures {
    translation: usize,
    prover: usize,
    reconstruction: usize,
    other: usize,
}

struct Search<'a> {
    task: &'a ProofTask,
    variant: Variant,
    k1_premises: Vec<String>,
    k2_premises: BTreeSet<&'a str>,
    backend: &'a dyn ProverBackend,
    clock: &'a mut Clock,
    deadline: f64,
    steps: u64,
    seq: u64,
    queue: BinaryHeap<Pending>,
    trace: Vec<TraceEvent>,
    timings: BTreeMap<Phase, f64>,
    failures: Failures,
    last_phase: Phase,
}

enum Stop {
    Proved(Rc<Node>),
    Budget(String),
}

impl<'a> Search<'a> {
    fn charge(&mut self, phase: Phase, since: f64) {
        *self.timings.entry(phase).or_default() += (self.clock.now() - since).max(0.0);
        self.last_phase = phase;
    }

    fn over_budget(&self) -> Option<String> {
        if self.steps >= self.task.step_budget {
            Some(format!("step budget {} exhausted", self.task.step_budget))
        } else if self.clock.now() > self.deadline {
            Some("wall-clock timeout".to_string())
        } else {
            None
        }
    }

    /// Applies safe built-in rules to the first open goal until none applies.
    fn normalize(&mut self, mut node: Node) -> Result<Node, Stop> {
        let t0 = self.clock.now();
        while let Some(goal) = node.goals.first().cloned() {
            let rule: &str;
            let replacement: Vec<Goal> = match &goal.target {
                Formula::True => {
                    rule = "trivial";
                    vec![]
                }
                Formula::Eq(a, b) if a == b => {
                    rule = "rfl";
                    vec![]
                }
                t if goal.hyps.contains(t) => {
                    rule = "assumption";
                    vec![]
                }
                Formula::And(a, b) => {
                    rule = "and_intro";
                    vec![
                        Goal { hyps: goal.hyps.clone(), target: (**a).clone() },
                        Goal { hyps: goal.hyps.clone(), target: (**b).clone() },
                    ]
                }
                Formula::Iff(a, b) => {
                    rule = "iff_intro";
                    vec![
                        Goal { hyps: goal.hyps.clone(), target: Formula::imp((**a).clone(), (**b).clone()) },
                        Goal { hyps: goal.hyps.clone(), target: Formula::imp((**b).clone(), (**a).clone()) },
                    ]
                }
                Formula::Imp(a, b) => {
                    rule = "intro";
                    let mut hyps = goal.hyps.clone();
                    hyps.insert((**a).clone());
                    vec![Goal { hyps, target: (**b).clone() }]
                }
                _ => break,
            };
            if let Some(reason) = self.over_budget() {
                return Err(Stop::Budget(reason));
            }
            self.steps += 1;
            self.trace.push(TraceEvent::Builtin {
                rule: rule.to_string(),
                goal: goal.to_string(),
            });
            node.goals.splice(0..1, replacement);
        }
        self.charge(Phase::BuiltinSearch, t0);
        Ok(node)
    }

    fn push(&mut self, node: &Rc<Node>, rule: Rule, weight: f64) {
        self.seq += 1;
        self.queue.push(Pending {
            prio: node.prio * weight,
            seq: self.seq,
            node: Rc::clone(node),
            rule,
        });
    }

    /// Normalizes and either finishes or enqueues the next goal's rules.
    fn admit(&mut self, node: Node) -> Result<(), Stop> {
        let node = Rc::new(self.normalize(node)?);
        let Some(goal) = node.goals.first() else {
            return Err(Stop::Proved(node));
        };
        if let Formula::Or(..) = goal.target {
            self.push(&node, Rule::OrIntro { left: true }, BUILTIN_WEIGHT);
            self.push(&node, Rule::OrIntro { left: false }, BUILTIN_WEIGHT);
        }
        if self.variant.uses_premise_applications() {
            let target = goal.target.clone();
            let matches: Vec<usize> = self
                .task
                .rules
                .iter()
                .enumerate()
                .filter(|(_, r)| r.concl == target && self.k2_premises.contains(r.premise.as_str()))
                .map(|(i, _)| i)
                .collect();
            for rule in matches {
                self.push(&node, Rule::Premise { rule }, PREMISE_APPLICATION_WEIGHT);
            }
        }
        if self.variant.uses_prover_rule() {
            self.push(&node, Rule::Prover, PROVER_WEIGHT);
        }
        Ok(())
    }

    /// Translate, prove, reconstruct. Returns the core on success.
    fn call_prover(&mut self, goal: &Goal) -> Option<Vec<String>> {
        let premises = self.k1_premises.clone();
        let t0 = self.clock.now();
        let translated = self.backend.translate(goal, &premises);
        self.charge(Phase::Translation, t0);
        self.trace.push(TraceEvent::Translate {
            goal: goal.to_string(),
            premises: premises.clone(),
            ok: translated.is_ok(),
        });
        let problem = match translated {
            Ok(p) => p,
            Err(e) => {
                self.record_failure(&e);
                return None;
            }
        };

        let t0 = self.clock.now();
        let timeout = Duration::from_secs_f64(self.task.prover_timeout_s.max(0.0));
        let before = Instant::now();
        let result = self.backend.prove(&problem, timeout);
        let real = before.elapsed();
        self.clock.simulated += result.elapsed.saturating_sub(real);
        self.charge(Phase::ExternalProver, t0);
        // a backend may only report premises it was given
        let core = result.core.and_then(|core| {
            if core.iter().all(|n| premises.contains(n)) {
                Ok(core)
            } else {
                Err(BackendFailure::Other("prover reported premises it was not given".into()))
            }
        });
        self.trace.push(TraceEvent::Prove {
            goal: goal.to_string(),
            premises,
            core: core.as_ref().ok().cloned(),
        });
        let core = match core {
            Ok(c) => c,
            Err(e) => {
                self.record_failure(&e);
                return None;
            }
        };

        let t0 = self.clock.now();
        let rebuilt = self.backend.reconstruct(goal, &core);
        self.charge(Phase::Reconstruction, t0);
        self.trace.push(TraceEvent::Reconstruct {
            goal: goal.to_string(),
            core: core.clone(),
            ok: rebuilt.is_ok(),
        });
        match rebuilt {
            Ok(()) => Some(core),
            Err(e) => {
                self.record_failure(&e);
                None
            }
        }
    }

    fn record_failure(&mut self, e: &BackendFailure) {
        match e {
            BackendFailure::Translation(_) => self.failures.translation += 1,
            BackendFailure::Prover(_) | BackendFailure::Timeout => self.failures.prover += 1,
            BackendFailure::Reconstruction(_) => self.failures.reconstruction += 1,
            BackendFailure::Other(_) => self.failures.other += 1,
        }
    }

    fn expand(&mut self, item: Pending) -> Result<(), Stop> {
        let node = item.node;
        let goal = node.goals[0].clone();
        let rest = || node.goals[1..].to_vec();
        match item.rule {
            Rule::OrIntro { left } => {
                let Formula::Or(a, b) = &goal.target else { unreachable!() };
                let target = if left { (**a).clone() } else { (**b).clone() };
                self.trace.push(TraceEvent::Builtin {
                    rule: if left { "or_inl" } else { "or_inr" }.to_string(),
                    goal: goal.to_string(),
                });
                let mut goals = vec![Goal { hyps: goal.hyps.clone(), target }];
                goals.extend(rest());
                self.admit(Node {
                    goals,
                    used: node.used.clone(),
                    prio: item.prio,
                    via_prover: node.via_prover,
                    via_premise: node.via_premise,
                })
            }
            Rule::Premise { rule } => {
                let t0 = self.clock.now();
                let r = &self.task.rules[rule];
                self.trace.push(TraceEvent::PremiseApplication {
                    premise: r.premise.clone(),
                    goal: goal.to_string(),
                    subgoals: r.hyps.len(),
                });
                let mut goals: Vec<Goal> = r
                    .hyps
                    .iter()
                    .map(|h| Goal { hyps: goal.hyps.clone(), target: h.clone() })
                    .collect();
                goals.extend(rest());
                let mut used = node.used.clone();
                used.insert(r.premise.clone());
                self.charge(Phase::PremiseApplication, t0);
                self.admit(Node {
                    goals,
                    used,
                    prio: item.prio,
                    via_prover: node.via_prover,
                    via_premise: true,
                })
            }
            Rule::Prover => match self.call_prover(&goal) {
                Some(core) => {
                    if let Some(reason) = self.over_budget() {
                        return Err(Stop::Budget(reason));
                    }
                    let mut used = node.used.clone();
                    used.extend(core);
                    self.admit(Node {
                        goals: rest(),
                        used,
                        prio: item.prio,
                        via_prover: true,
                        via_premise: node.via_premise,
                    })
                }
                None => Ok(()),
            },
        }
    }

    fn run(mut self, root: Goal) -> ProofOutcome {
        self.trace.push(TraceEvent::VariantStart { variant: self.variant });
        let stop = if self.variant.uses_search() {
            let start = Node {
                goals: vec![root],
                used: BTreeSet::new(),
                prio: 1.0,
                via_prover: false,
                via_premise: false,
            };
            match self.admit(start) {
                Err(stop) => Some(stop),
                Ok(()) => loop {
                    let Some(item) = self.queue.pop() else { break None };
                    if let Some(reason) = self.over_budget() {
                        break Some(Stop::Budget(reason));
                    }
                    self.steps += 1;
                    if let Err(stop) = self.expand(item) {
                        break Some(stop);
                    }
                },
            }
        } else {
            // a single prover call on the goal as stated
            self.steps += 1;
            match self.call_prover(&root) {
                Some(core) => match self.over_budget() {
                    Some(reason) => Some(Stop::Budget(reason)),
                    None => Some(Stop::Proved(Rc::new(Node {
                        goals: vec![],
                        used: core.into_iter().collect(),
                        prio: PROVER_WEIGHT,
                        via_prover: true,
                        via_premise: false,
                    }))),
                },
                None => None,
            }
        };
        self.finish(stop)
    }

    fn finish(mut self, stop: Option<Stop>) -> ProofOutcome {
        let elapsed_s = self.clock.now();
        let (proved, used, phase, category) = match stop {
            Some(Stop::Proved(node)) => {
                let phase = if node.via_prover {
                    Phase::Reconstruction
                } else if node.via_premise {
                    Phase::PremiseApplication
                } else {
                    Phase::BuiltinSearch
                };
                (true, node.used.clone(), phase, FailureCategory::None)
            }
            Some(Stop::Budget(reason)) => {
                self.trace.push(TraceEvent::Budget { reason });
                (false, BTreeSet::new(), self.last_phase, FailureCategory::Timeout)
            }
            None => {
                let f = &self.failures;
                let (phase, cat) = if f.reconstruction > 0 {
                    (Phase::Reconstruction, FailureCategory::ReconstructionFailure)
                } else if f.prover > 0 {
                    (Phase::ExternalProver, FailureCategory::ProverFailure)
                } else if f.translation > 0 {
                    (Phase::Translation, FailureCategory::TranslationFailure)
                } else if f.other > 0 {
                    (self.last_phase, FailureCategory::OtherError)
                } else {
                    // search space exhausted without ever calling the prover
                    (self.last_phase, FailureCategory::ProverFailure)
                };
                (false, BTreeSet::new(), phase, cat)
            }
        };
        ProofOutcome {
            variant: self.variant,
            proved,
            premises_used: used,
            phase,
            failure_category: category,
            timings: self.timings,
            elapsed_s,
            steps: self.steps,
            trace: self.trace,
        }
    }
}

/// Ranked selection restricted to the task's accessible premises, without
/// duplicates.
fn restrict_ranking(task: &ProofTask, ranking: &[String]) -> Vec<String> {
    let accessible: BTreeSet<&str> = task.accessible.iter().map(String::as_str).collect();
    let mut seen = BTreeSet::new();
    ranking
        .iter()
        .filter(|n| accessible.contains(n.as_str()) && seen.insert(n.as_str()))
        .cloned()
        .collect()
}

fn run_single(
    task: &ProofTask,
    variant: Variant,
    ranking: &[String],
    backend: &dyn ProverBackend,
    clock: &mut Clock,
    deadline: f64,
) -> ProofOutcome {
    let k1_premises: Vec<String> = ranking.iter().take(task.k1).cloned().collect();
    let k2_premises = ranking.iter().take(task.k2).map(String::as_str).collect();
    Search {
        task,
        variant,
        k1_premises,
        k2_premises,
        backend,
        clock,
        deadline,
        steps: 0,
        seq: 0,
        queue: BinaryHeap::new(),
        trace: Vec::new(),
        timings: BTreeMap::new(),
        failures: Failures::default(),
        last_phase: Phase::BuiltinSearch,
    }
    .run(task.root_goal())
}

/// Runs one task under its variant. `selector` ranks candidate premises;
/// anything outside `task.accessible` is ignored.
pub fn run_task(
    task: &ProofTask,
    selector: &dyn Fn(&ProofTask) -> Vec<String>,
    backend: &dyn ProverBackend,
) -> ProofOutcome {
    let ranking = restrict_ranking(task, &selector(task));
    if task.variant != Variant::Cumul {
        let mut clock = Clock::new();
        return run_single(task, task.variant, &ranking, backend, &mut clock, task.wall_timeout_s);
    }

    let mut shared = Clock::new();
    let mut trace = Vec::new();
    let mut timings: BTreeMap<Phase, f64> = BTreeMap::new();
    let mut steps = 0;
    let mut independent_elapsed = 0.0;
    let mut last = None;
    for v in Variant::SINGLE {
        let mut fresh = Clock::new();
        let clock = if task.independent_budgets { &mut fresh } else { &mut shared };
        let out = run_single(task, v, &ranking, backend, clock, task.wall_timeout_s);
        trace.extend(out.trace.iter().cloned());
        for (p, t) in &out.timings {
            *timings.entry(*p).or_default() += t;
        }
        steps += out.steps;
        independent_elapsed += out.elapsed_s;
        let proved = out.proved;
        last = Some(out);
        if proved {
            break;
        }
    }
    let last = last.expect("at least one variant ran");
    ProofOutcome {
        variant: Variant::Cumul,
        trace,
        timings,
        steps,
        elapsed_s: if task.independent_budgets {
            independent_elapsed
        } else {
            shared.now()
        },
        ..last
    }
}

/// Every variant on the same task. The four single variants each get a
/// fresh budget; `cumul` is proved iff any of them is.
pub fn run_variant_suite(
    task: &ProofTask,
    selector: &dyn Fn(&ProofTask) -> Vec<String>,
    backend: &dyn ProverBackend,
) -> BTreeMap<Variant, ProofOutcome> {
    let mut out = BTreeMap::new();
    for v in Variant::SINGLE {
        out.insert(v, run_task(&task.with_variant(v), selector, backend));
    }
    let first = Variant::SINGLE
        .into_iter()
        .find(|v| out[v].proved)
        .unwrap_or(Variant::Full);
    let mut cumul = out[&first].clone();
    cumul.variant = Variant::Cumul;
    out.insert(Variant::Cumul, cumul);
    out
}

/// A task line in a batch file: the task, its mock entailment table, and
/// optional metadata for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    #[serde(flatten)]
    pub task: ProofTask,
    #[serde(default)]
    pub entailment: Vec<EntailmentEntry>,
    /// Fixed premise ranking; used when no selector is supplied.
    #[serde(default)]
    pub ranking: Option<Vec<String>>,
    /// Corpus theorem whose initial state the task comes from.
    #[serde(default)]
    pub theorem: Option<String>,
    #[serde(default)]
    pub proof_lines: Option<u32>,
    #[serde(default)]
    pub num_positives: Option<usize>,
}

pub fn parse_task_batch(text: &str) -> Result<Vec<TaskRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

pub fn write_trace_jsonl(trace: &[TraceEvent]) -> String {
    trace
        .iter()
        .map(|e| serde_json::to_string(e).expect("trace event serializes") + "\n")
        .collect()
}
