//! Corpus data model and JSONL ingestion.
//!
//! A corpus is a flat export of premises (theorems and definitions with their
//! normalized signatures), proof states paired with the premises used by the
//! enclosing proof, and the module import graph. Everything retrieval and
//! training needs is derived from these three record kinds.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("state of theorem `{theorem}` names unknown premise `{premise}`")]
    DanglingPremise { theorem: String, premise: String },
    #[error("import cycle through modules: {}", .0.join(" -> "))]
    ImportCycle(Vec<String>),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("duplicate premise name `{0}`")]
    DuplicatePremise(String),
    #[error("module `{module}` has two premises at decl_index {decl_index}")]
    DuplicateDeclIndex { module: String, decl_index: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PremiseKind {
    Theorem,
    Definition,
}

impl PremiseKind {
    pub fn keyword(self) -> &'static str {
        match self {
            PremiseKind::Theorem => "theorem",
            PremiseKind::Definition => "def",
        }
    }
}

/// A retrievable fact.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PremiseRecord {
    pub name: String,
    pub kind: PremiseKind,
    /// `docstring? kind name arguments* : type`, printed without notation.
    pub signature: String,
    pub docstring: Option<String>,
    pub module: String,
    pub decl_index: u32,
    pub is_blacklisted: bool,
    pub is_language_internal: bool,
}

impl PremiseRecord {
    pub fn is_eligible(&self) -> bool {
        !self.is_blacklisted && !self.is_language_internal
    }
}

/// A proof state with the premises used by the whole proof of its theorem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateRecord {
    pub state_text: String,
    pub theorem_name: String,
    /// `None` for the state at the start of the theorem.
    pub tactic_index: Option<u32>,
    pub positive_premises: BTreeSet<String>,
    pub module: String,
    pub decl_index: u32,
}

impl StateRecord {
    /// `theorem` for the initial state, `theorem:3` for the state before tactic 3.
    pub fn id(&self) -> String {
        match self.tactic_index {
            Some(i) => format!("{}:{}", self.theorem_name, i),
            None => self.theorem_name.clone(),
        }
    }
}

/// One line of the JSONL export.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CorpusLine {
    Premise {
        name: String,
        kind: PremiseKind,
        signature: String,
        docstring: Option<String>,
        module: String,
        decl_index: u32,
        blacklisted: bool,
        language_internal: bool,
    },
    State {
        state: String,
        theorem: String,
        tactic_index: Option<u32>,
        module: String,
        decl_index: u32,
        positives: Vec<String>,
    },
    Module {
        name: String,
        imports: Vec<String>,
    },
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub premises: Vec<PremiseRecord>,
    pub states: Vec<StateRecord>,
    /// Module to its direct imports.
    pub modules: BTreeMap<String, Vec<String>>,
    pub blacklist: BTreeSet<String>,
    pub snapshot_id: String,
    module_order: Vec<String>,
    module_rank: HashMap<String, usize>,
    by_name: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.premises == other.premises
            && self.states == other.states
            && self.modules == other.modules
            && self.blacklist == other.blacklist
            && self.snapshot_id == other.snapshot_id
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text)
}

/// Parses and validates a JSONL export.
pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let mut premises = Vec::new();
    let mut states = Vec::new();
    let mut modules: BTreeMap<String, Vec<String>> = BTreeMap::new();

    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = serde_json::from_str(line).map_err(|e| CorpusError::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        match parsed {
            CorpusLine::Premise {
                name,
                kind,
                signature,
                docstring,
                module,
                decl_index,
                blacklisted,
                language_internal,
            } => premises.push(PremiseRecord {
                name,
                kind,
                signature,
                docstring,
                module,
                decl_index,
                is_blacklisted: blacklisted,
                is_language_internal: language_internal,
            }),
            CorpusLine::State {
                state,
                theorem,
                tactic_index,
                module,
                decl_index,
                positives,
            } => states.push(StateRecord {
                state_text: state,
                theorem_name: theorem,
                tactic_index,
                positive_premises: positives.into_iter().collect(),
                module,
                decl_index,
            }),
            CorpusLine::Module { name, imports } => {
                if modules.insert(name.clone(), imports).is_some() {
                    return Err(CorpusError::Schema {
                        line: i + 1,
                        message: format!("module `{name}` declared twice"),
                    });
                }
            }
        }
    }
    Corpus::new(premises, states, modules)
}

impl Corpus {
    /// Builds a corpus and checks every structural invariant. Modules that are
    /// referenced by a premise or state but never declared get an empty import
    /// list; an import of an undeclared module is an error.
    pub fn new(
        premises: Vec<PremiseRecord>,
        states: Vec<StateRecord>,
        mut modules: BTreeMap<String, Vec<String>>,
    ) -> Result<Self, CorpusError> {
        for m in premises.iter().map(|p| &p.module).chain(states.iter().map(|s| &s.module)) {
            modules.entry(m.clone()).or_default();
        }
        for imports in modules.values() {
            if let Some(missing) = imports.iter().find(|m| !modules.contains_key(*m)) {
                return Err(CorpusError::UnknownModule(missing.clone()));
            }
        }
        let module_order = topological_order(&modules)?;
        let module_rank = module_order
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();

        let mut by_name = HashMap::with_capacity(premises.len());
        let mut slots = BTreeSet::new();
        for (i, p) in premises.iter().enumerate() {
            if by_name.insert(p.name.clone(), i).is_some() {
                return Err(CorpusError::DuplicatePremise(p.name.clone()));
            }
            if !slots.insert((p.module.as_str(), p.decl_index)) {
                return Err(CorpusError::DuplicateDeclIndex {
                    module: p.module.clone(),
                    decl_index: p.decl_index,
                });
            }
        }
        for s in &states {
            if let Some(missing) = s.positive_premises.iter().find(|n| !by_name.contains_key(*n)) {
                return Err(CorpusError::DanglingPremise {
                    theorem: s.theorem_name.clone(),
                    premise: missing.clone(),
                });
            }
        }

        let mut corpus = Corpus {
            premises,
            states,
            modules,
            blacklist: BTreeSet::new(),
            snapshot_id: String::new(),
            module_order,
            module_rank,
            by_name,
        };
        corpus.snapshot_id = corpus.compute_snapshot_id();
        Ok(corpus)
    }

    pub fn premise(&self, name: &str) -> Option<&PremiseRecord> {
        self.by_name.get(name).map(|&i| &self.premises[i])
    }

    /// Modules in dependency order: every module comes after its imports.
    pub fn module_order(&self) -> &[String] {
        &self.module_order
    }

    /// Marks every premise named in `names` as blacklisted and remembers the
    /// list. Names absent from the corpus are kept in the set but otherwise
    /// ignored.
    pub fn apply_blacklist<I, S>(&mut self, names: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.blacklist.extend(names.into_iter().map(Into::into));
        for p in &mut self.premises {
            if self.blacklist.contains(&p.name) {
                p.is_blacklisted = true;
            }
        }
        self.snapshot_id = self.compute_snapshot_id();
    }

    fn compute_snapshot_id(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.premises {
            let line = CorpusLine::Premise {
                name: p.name.clone(),
                kind: p.kind,
                signature: p.signature.clone(),
                docstring: p.docstring.clone(),
                module: p.module.clone(),
                decl_index: p.decl_index,
                blacklisted: p.is_blacklisted,
                language_internal: p.is_language_internal,
            };
            // serde_json output for this enum is canonical (fixed field order)
            h.update(serde_json::to_vec(&line).expect("premise serializes"));
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Writes the corpus back out in the export format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (name, imports) in &self.modules {
            push_line(
                &mut out,
                &CorpusLine::Module {
                    name: name.clone(),
                    imports: imports.clone(),
                },
            );
        }
        for p in &self.premises {
            push_line(
                &mut out,
                &CorpusLine::Premise {
                    name: p.name.clone(),
                    kind: p.kind,
                    signature: p.signature.clone(),
                    docstring: p.docstring.clone(),
                    module: p.module.clone(),
                    decl_index: p.decl_index,
                    blacklisted: p.is_blacklisted,
                    language_internal: p.is_language_internal,
                },
            );
        }
        for s in &self.states {
            push_line(
                &mut out,
                &CorpusLine::State {
                    state: s.state_text.clone(),
                    theorem: s.theorem_name.clone(),
                    tactic_index: s.tactic_index,
                    module: s.module.clone(),
                    decl_index: s.decl_index,
                    positives: s.positive_premises.iter().cloned().collect(),
                },
            );
        }
        out
    }
}

fn push_line(out: &mut String, line: &CorpusLine) {
    out.push_str(&serde_json::to_string(line).expect("corpus line serializes"));
    out.push('\n');
}

/// Kahn's algorithm with a sorted ready set so the order is deterministic.
fn topological_order(modules: &BTreeMap<String, Vec<String>>) -> Result<Vec<String>, CorpusError> {
    let mut pending: BTreeMap<&str, usize> = BTreeMap::new();
    let mut dependents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (m, imports) in modules {
        let distinct: BTreeSet<&str> = imports.iter().map(String::as_str).collect();
        pending.insert(m, distinct.len());
        for dep in distinct {
            dependents.entry(dep).or_default().push(m);
        }
    }
    let mut ready: BTreeSet<&str> = pending
        .iter()
        .filter(|(_, &n)| n == 0)
        .map(|(&m, _)| m)
        .collect();
    let mut order = Vec::with_capacity(modules.len());
    while let Some(m) = ready.pop_first() {
        order.push(m.to_string());
        for &d in dependents.get(m).map(Vec::as_slice).unwrap_or(&[]) {
            let n = pending.get_mut(d).expect("known module");
            *n -= 1;
            if *n == 0 {
                ready.insert(d);
            }
        }
    }
    if order.len() != modules.len() {
        let stuck: Vec<String> = pending
            .iter()
            .filter(|(m, _)| !order.iter().any(|o| o == *m))
            .map(|(m, _)| m.to_string())
            .collect();
        return Err(CorpusError::ImportCycle(find_cycle(modules, &stuck)));
    }
    Ok(order)
}

fn find_cycle(modules: &BTreeMap<String, Vec<String>>, stuck: &[String]) -> Vec<String> {
    // every stuck module has a stuck import, so walking them must revisit one
    let stuck_set: BTreeSet<&str> = stuck.iter().map(String::as_str).collect();
    let mut path: Vec<&str> = vec![stuck[0].as_str()];
    loop {
        let cur = *path.last().unwrap();
        let next = modules[cur]
            .iter()
            .map(String::as_str)
            .find(|m| stuck_set.contains(m))
            .expect("stuck module has a stuck import");
        if let Some(pos) = path.iter().position(|&m| m == next) {
            let mut cycle: Vec<String> = path[pos..].iter().map(|s| s.to_string()).collect();
            cycle.push(next.to_string());
            return cycle;
        }
        path.push(next);
    }
}

/// Drops blacklisted and language-internal premises and removes their names
/// from every state's positive set.
pub fn filter_premises(corpus: &Corpus) -> Corpus {
    let premises: Vec<PremiseRecord> = corpus
        .premises
        .iter()
        .filter(|p| p.is_eligible())
        .cloned()
        .collect();
    let keep: BTreeSet<&str> = premises.iter().map(|p| p.name.as_str()).collect();
    let states = corpus
        .states
        .iter()
        .map(|s| StateRecord {
            positive_premises: s
                .positive_premises
                .iter()
                .filter(|n| keep.contains(n.as_str()))
                .cloned()
                .collect(),
            ..s.clone()
        })
        .collect();
    let mut out = Corpus::new(premises, states, corpus.modules.clone())
        .expect("filtering preserves corpus invariants");
    out.blacklist = corpus.blacklist.clone();
    out
}

/// Premises visible at `decl_index` in `module`: everything in transitively
/// imported modules plus earlier declarations of the module itself, ordered
/// by (module dependency order, decl_index, name).
pub fn accessible_premises(
    corpus: &Corpus,
    module: &str,
    decl_index: u32,
) -> Result<Vec<String>, CorpusError> {
    let imported = transitive_imports(corpus, module)?;
    let mut visible: Vec<&PremiseRecord> = corpus
        .premises
        .iter()
        .filter(|p| {
            imported.contains(p.module.as_str()) || (p.module == module && p.decl_index < decl_index)
        })
        .collect();
    visible.sort_by(|a, b| {
        corpus.module_rank[&a.module]
            .cmp(&corpus.module_rank[&b.module])
            .then(a.decl_index.cmp(&b.decl_index))
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(visible.into_iter().map(|p| p.name.clone()).collect())
}

/// Accessible premises at the position of `state`.
pub fn accessible_for_state(corpus: &Corpus, state: &StateRecord) -> Result<Vec<String>, CorpusError> {
    accessible_premises(corpus, &state.module, state.decl_index)
}

fn transitive_imports<'a>(corpus: &'a Corpus, module: &str) -> Result<BTreeSet<&'a str>, CorpusError> {
    let direct = corpus
        .modules
        .get(module)
        .ok_or_else(|| CorpusError::UnknownModule(module.to_string()))?;
    let mut seen: BTreeSet<&'a str> = BTreeSet::new();
    let mut stack: Vec<&'a str> = direct.iter().map(String::as_str).collect();
    while let Some(m) = stack.pop() {
        if seen.insert(m) {
            stack.extend(corpus.modules[m].iter().map(String::as_str));
        }
    }
    Ok(seen)
}

/// Reads a blacklist file: one name per line, `#` starts a comment.
pub fn load_blacklist(path: impl AsRef<Path>) -> Result<BTreeSet<String>, CorpusError> {
    Ok(parse_blacklist(&std::fs::read_to_string(path)?))
}

pub fn parse_blacklist(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Notation shorthands that must not survive normalization.
pub const DEFAULT_SHORTHANDS: [&str; 6] = ["∃", "∧", "↔", "∣", "⤏", "ℕ"];

#[derive(Debug, Clone)]
pub struct LintConfig {
    pub shorthands: Vec<String>,
    /// Dotted constants that resolve even though no premise lives under them
    /// (types, structures, namespaces outside the export).
    pub known_constants: BTreeSet<String>,
}

impl Default for LintConfig {
    fn default() -> Self {
        LintConfig {
            shorthands: DEFAULT_SHORTHANDS.iter().map(|s| s.to_string()).collect(),
            known_constants: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LintIssue {
    Shorthand { item: String, shorthand: String },
    MissingHeader { premise: String },
    UnresolvedConstant { item: String, constant: String },
}

impl fmt::Display for LintIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LintIssue::Shorthand { item, shorthand } => {
                write!(f, "{item}: notation shorthand `{shorthand}`")
            }
            LintIssue::MissingHeader { premise } => {
                write!(f, "{premise}: signature does not start with `kind name`")
            }
            LintIssue::UnresolvedConstant { item, constant } => {
                write!(f, "{item}: unresolved constant `{constant}`")
            }
        }
    }
}

/// Checks that signatures and states look normalized: no shorthand notation,
/// a `kind name` header on every premise, and every dotted constant either
/// names a premise, a namespace containing one, a configured constant, or a
/// projection off a locally bound variable.
pub fn lint_corpus(corpus: &Corpus, config: &LintConfig) -> Vec<LintIssue> {
    let mut namespaces: BTreeSet<&str> = BTreeSet::new();
    for p in &corpus.premises {
        let mut end = 0;
        while let Some(off) = p.name[end..].find('.') {
            end += off;
            namespaces.insert(&p.name[..end]);
            end += 1;
        }
    }
    let resolves = |c: &str, bound: &BTreeSet<&str>| {
        corpus.by_name.contains_key(c)
            || namespaces.contains(c)
            || config.known_constants.contains(c)
            || c.split('.').next().is_some_and(|head| bound.contains(head))
            || namespaces.iter().any(|ns| c.starts_with(ns) && c[ns.len()..].starts_with('.'))
    };

    let mut issues = Vec::new();
    let check_text = |item: &str, text: &str, issues: &mut Vec<LintIssue>| {
        for s in &config.shorthands {
            if text.contains(s.as_str()) {
                issues.push(LintIssue::Shorthand {
                    item: item.to_string(),
                    shorthand: s.clone(),
                });
            }
        }
        let bound = bound_names(text);
        for c in identifiers(text).filter(|t| t.contains('.')) {
            if !resolves(c, &bound) {
                issues.push(LintIssue::UnresolvedConstant {
                    item: item.to_string(),
                    constant: c.to_string(),
                });
            }
        }
    };
    for p in &corpus.premises {
        let body = match &p.docstring {
            Some(d) => p.signature.strip_prefix(d.as_str()).unwrap_or(&p.signature).trim_start(),
            None => p.signature.as_str(),
        };
        let header = format!("{} {}", p.kind.keyword(), p.name);
        let header_ok = body
            .strip_prefix(&header)
            .is_some_and(|rest| rest.is_empty() || rest.starts_with([' ', ':']));
        if !header_ok {
            issues.push(LintIssue::MissingHeader {
                premise: p.name.clone(),
            });
        }
        check_text(&p.name, &p.signature, &mut issues);
    }
    for s in &corpus.states {
        check_text(&s.id(), &s.state_text, &mut issues);
    }
    issues
}

/// Identifier runs: letters, digits, `_`, `'`, and inner dots.
pub(crate) fn identifiers(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '\'' || c == '.'))
        .map(|t| t.trim_matches('.'))
        .filter(|t| !t.is_empty() && t.chars().next().is_some_and(|c| !c.is_numeric()))
}

/// Names introduced by binders `x y : T` (hypothesis lines or bracketed
/// arguments) and by `fun x =>` / `∀ x`.
fn bound_names(text: &str) -> BTreeSet<&str> {
    let mut bound = BTreeSet::new();
    let mut pieces: Vec<&str> = text.lines().collect();
    pieces.extend(text.split(['(', '{', '[', '⦃']).skip(1));
    for piece in pieces {
        if let Some((lhs, _)) = piece.split_once(" : ") {
            let lhs = lhs.trim_start_matches(['⊢', ' ']);
            if lhs.split_whitespace().all(|w| identifiers(w).count() == 1 && !w.contains('.')) {
                bound.extend(lhs.split_whitespace());
            }
        }
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    for w in words.windows(2) {
        if matches!(w[0], "fun" | "∀" | "λ") || w[0].ends_with("fun") {
            bound.extend(identifiers(w[1]));
        }
    }
    bound
}
