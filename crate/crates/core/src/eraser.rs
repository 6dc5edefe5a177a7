//! Feedback-driven error detection and guideline rendering.
//!
//! After every action the agent gathers feedback from three places: the store
//! (result, emptiness, CVT answers, engine errors), the interpreter (was the
//! call well formed) and the reasoning memory of committed steps. A
//! [`TriggerRegistry`] classifies that feedback into at most one [`ErrorKind`]
//! and renders the kind's guideline, which then replaces the step's observation.
//!
//! Triggers are independent: each one only looks at the feedback and the
//! action, so adding a trigger never changes what the others match. When
//! several match, registration order decides. The standard order puts
//! malformed calls first, then memory checks, then store emptiness.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::action::{action_list, signature, ActionParse, Arg, ArgKind, EntityLink, ParsedAction};
use crate::answer::AnswerSet;
use crate::program::Dialect;
use crate::term::Variable;

/// Placeholder replaced by the number of the step the model should regenerate.
pub const NEXT_STEP: &str = "STEPS + 1";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorKind {
    UnknownAction,
    ArityMismatch,
    InvalidFilterOperator,
    GetRelationOnUnknownTerm,
    FactBeforeGetRelation,
    TwoNewVariablesInFact,
    SetAnswerUnknownVariable,
    CvtAnswer,
    EmptyFactResult,
    EmptyFilterResult,
    /// Table-dialect analogue of `EmptyFilterResult`; not in the standard set.
    EmptyConditionResult,
    Custom(String),
}

impl ErrorKind {
    /// The ten standard kinds in priority order.
    pub const STANDARD: [ErrorKind; 10] = [
        ErrorKind::UnknownAction,
        ErrorKind::ArityMismatch,
        ErrorKind::InvalidFilterOperator,
        ErrorKind::GetRelationOnUnknownTerm,
        ErrorKind::FactBeforeGetRelation,
        ErrorKind::TwoNewVariablesInFact,
        ErrorKind::SetAnswerUnknownVariable,
        ErrorKind::CvtAnswer,
        ErrorKind::EmptyFactResult,
        ErrorKind::EmptyFilterResult,
    ];

    pub fn name(&self) -> &str {
        match self {
            ErrorKind::UnknownAction => "UnknownAction",
            ErrorKind::ArityMismatch => "ArityMismatch",
            ErrorKind::InvalidFilterOperator => "InvalidFilterOperator",
            ErrorKind::GetRelationOnUnknownTerm => "GetRelationOnUnknownTerm",
            ErrorKind::FactBeforeGetRelation => "FactBeforeGetRelation",
            ErrorKind::TwoNewVariablesInFact => "TwoNewVariablesInFact",
            ErrorKind::SetAnswerUnknownVariable => "SetAnswerUnknownVariable",
            ErrorKind::CvtAnswer => "CvtAnswer",
            ErrorKind::EmptyFactResult => "EmptyFactResult",
            ErrorKind::EmptyFilterResult => "EmptyFilterResult",
            ErrorKind::EmptyConditionResult => "EmptyConditionResult",
            ErrorKind::Custom(name) => name,
        }
    }

    /// Matcher and template for the built-in kinds.
    pub fn builtin(&self) -> Option<(MatchFn, &'static str)> {
        Some(match self {
            ErrorKind::UnknownAction => (match_unknown_action, templates::UNKNOWN_ACTION),
            ErrorKind::ArityMismatch => (match_arity_mismatch, templates::ARITY_MISMATCH),
            ErrorKind::InvalidFilterOperator => (
                match_invalid_filter_operator,
                templates::INVALID_FILTER_OPERATOR,
            ),
            ErrorKind::GetRelationOnUnknownTerm => (
                match_get_relation_unknown_term,
                templates::GET_RELATION_UNKNOWN_TERM,
            ),
            ErrorKind::FactBeforeGetRelation => (
                match_fact_before_get_relation,
                templates::FACT_BEFORE_GET_RELATION,
            ),
            ErrorKind::TwoNewVariablesInFact => {
                (match_two_new_variables, templates::TWO_NEW_VARIABLES)
            }
            ErrorKind::SetAnswerUnknownVariable => {
                (match_set_answer_unknown, templates::SET_ANSWER_UNKNOWN)
            }
            ErrorKind::CvtAnswer => (match_cvt_answer, templates::CVT_ANSWER),
            ErrorKind::EmptyFactResult => (match_empty_fact_result, templates::EMPTY_FACT_RESULT),
            ErrorKind::EmptyFilterResult => {
                (match_empty_filter_result, templates::EMPTY_FILTER_RESULT)
            }
            ErrorKind::EmptyConditionResult => (
                match_empty_condition_result,
                templates::EMPTY_CONDITION_RESULT,
            ),
            ErrorKind::Custom(_) => return None,
        })
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorKind {
    type Err = core::convert::Infallible;

    /// Unrecognized names become `Custom`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let known = ErrorKind::STANDARD
            .iter()
            .chain(core::iter::once(&ErrorKind::EmptyConditionResult))
            .find(|k| k.name() == s)
            .cloned();
        Ok(known.unwrap_or_else(|| ErrorKind::Custom(s.to_string())))
    }
}

/// Captured values substituted into a guideline template.
pub type Context = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnosis {
    pub kind: ErrorKind,
    pub context: Context,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreOutcome {
    /// The action never reached the store.
    NotExecuted,
    Relations(Vec<String>),
    Rows {
        count: usize,
    },
    Column(Vec<String>),
    Answer(AnswerSet),
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreFeedback {
    pub outcome: StoreOutcome,
    /// The answer variable is bound only to CVT nodes.
    pub cvt_answer: bool,
}

impl StoreFeedback {
    pub fn not_executed() -> Self {
        Self {
            outcome: StoreOutcome::NotExecuted,
            cvt_answer: false,
        }
    }

    pub fn empty_rows(&self) -> bool {
        matches!(self.outcome, StoreOutcome::Rows { count: 0 })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterpreterFeedback {
    Ok,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSummary {
    pub step: u32,
    pub action: String,
    pub rows: usize,
}

/// Structured record of the committed steps; never includes the step being checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemorySnapshot {
    pub dialect: Dialect,
    pub linked_entities: Vec<EntityLink>,
    pub steps_taken: Vec<String>,
    pub created_variables: Vec<Variable>,
    /// Term (entity id or variable name) to the relations get_relation returned for it.
    pub relations_seen: BTreeMap<String, Vec<String>>,
    pub prior_results: Vec<ResultSummary>,
    /// Table dialect: the bound table's columns.
    pub columns: Vec<String>,
}

impl MemorySnapshot {
    pub fn new(dialect: Dialect, linked_entities: Vec<EntityLink>) -> Self {
        Self {
            dialect,
            linked_entities,
            steps_taken: Vec::new(),
            created_variables: Vec::new(),
            relations_seen: BTreeMap::new(),
            prior_results: Vec::new(),
            columns: Vec::new(),
        }
    }

    /// Row count of the latest committed evaluation.
    pub fn last_rows(&self) -> Option<usize> {
        self.prior_results.last().map(|r| r.rows)
    }

    pub fn is_linked(&self, id: &str) -> bool {
        self.linked_entities.iter().any(|l| l.id == id)
    }

    pub fn is_created(&self, name: &str) -> bool {
        self.created_variables.iter().any(|v| v.as_str() == name)
    }

    /// A linked entity or a created variable.
    pub fn is_known(&self, arg: &Arg) -> bool {
        match arg.kind {
            ArgKind::Entity => self.is_linked(&arg.value),
            ArgKind::Variable => self.is_created(&arg.value),
            _ => false,
        }
    }

    fn created_list(&self) -> String {
        let names: Vec<&str> = self
            .created_variables
            .iter()
            .map(Variable::as_str)
            .collect();
        format!("{{{}}}", names.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvFeedback {
    pub store: StoreFeedback,
    pub interpreter: InterpreterFeedback,
    pub memory: MemorySnapshot,
}

pub type MatchFn = fn(&EnvFeedback, &ActionParse) -> Option<Context>;
pub type Matcher = Box<dyn Fn(&EnvFeedback, &ActionParse) -> Option<Context> + Send + Sync>;

pub struct Trigger {
    pub kind: ErrorKind,
    pub enabled: bool,
    pub template: String,
    matcher: Matcher,
}

impl fmt::Debug for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trigger")
            .field("kind", &self.kind)
            .field("enabled", &self.enabled)
            .field("template", &self.template)
            .finish_non_exhaustive()
    }
}

/// One configuration-file entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerSetting {
    pub kind: String,
    pub enabled: bool,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("trigger {0} is already registered")]
    DuplicateKind(ErrorKind),
    #[error("no trigger registered for {0}")]
    UnknownKind(String),
}

#[derive(Debug, Default)]
pub struct TriggerRegistry {
    triggers: Vec<Trigger>,
}

impl TriggerRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The ten standard triggers in priority order.
    pub fn standard() -> Self {
        let mut registry = Self::empty();
        for kind in ErrorKind::STANDARD {
            registry
                .register_builtin(kind)
                .expect("standard kinds are distinct");
        }
        registry
    }

    /// Standard triggers plus `EmptyConditionResult` for table questions.
    pub fn for_dialect(dialect: Dialect) -> Self {
        let mut registry = Self::standard();
        if dialect == Dialect::Table {
            registry
                .register_builtin(ErrorKind::EmptyConditionResult)
                .expect("not in the standard set");
        }
        registry
    }

    pub fn register(
        &mut self,
        kind: ErrorKind,
        matcher: Matcher,
        template: impl Into<String>,
    ) -> Result<(), RegistryError> {
        if self.get(&kind).is_some() {
            return Err(RegistryError::DuplicateKind(kind));
        }
        self.triggers.push(Trigger {
            kind,
            enabled: true,
            template: template.into(),
            matcher,
        });
        Ok(())
    }

    pub fn register_builtin(&mut self, kind: ErrorKind) -> Result<(), RegistryError> {
        let (matcher, template) = kind
            .builtin()
            .ok_or_else(|| RegistryError::UnknownKind(kind.name().to_string()))?;
        self.register(kind, Box::new(matcher), template)
    }

    pub fn len(&self) -> usize {
        self.triggers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triggers.is_empty()
    }

    pub fn triggers(&self) -> &[Trigger] {
        &self.triggers
    }

    pub fn get(&self, kind: &ErrorKind) -> Option<&Trigger> {
        self.triggers.iter().find(|t| &t.kind == kind)
    }

    fn get_mut(&mut self, kind: &ErrorKind) -> Result<&mut Trigger, RegistryError> {
        self.triggers
            .iter_mut()
            .find(|t| &t.kind == kind)
            .ok_or_else(|| RegistryError::UnknownKind(kind.name().to_string()))
    }

    pub fn set_enabled(&mut self, kind: &ErrorKind, enabled: bool) -> Result<(), RegistryError> {
        self.get_mut(kind)?.enabled = enabled;
        Ok(())
    }

    /// First enabled trigger that matches, in registration order.
    pub fn detect(&self, feedback: &EnvFeedback, action: &ActionParse) -> Option<Diagnosis> {
        self.triggers.iter().filter(|t| t.enabled).find_map(|t| {
            (t.matcher)(feedback, action).map(|context| Diagnosis {
                kind: t.kind.clone(),
                context,
            })
        })
    }

    /// Every enabled trigger that matches, ignoring priority.
    pub fn firing(&self, feedback: &EnvFeedback, action: &ActionParse) -> Vec<ErrorKind> {
        self.triggers
            .iter()
            .filter(|t| t.enabled && (t.matcher)(feedback, action).is_some())
            .map(|t| t.kind.clone())
            .collect()
    }

    /// Guideline for `diagnosis` raised at step `step`.
    pub fn render(&self, diagnosis: &Diagnosis, step: u32) -> String {
        let template = self
            .get(&diagnosis.kind)
            .map(|t| t.template.as_str())
            .or_else(|| diagnosis.kind.builtin().map(|(_, t)| t))
            .unwrap_or("Please check again and re-generate only Thought {STEPS + 1} and Action {STEPS + 1}.");
        render_guideline(template, diagnosis, step)
    }

    pub fn settings(&self) -> Vec<TriggerSetting> {
        self.triggers
            .iter()
            .map(|t| TriggerSetting {
                kind: t.kind.name().to_string(),
                enabled: t.enabled,
                template: t.template.clone(),
            })
            .collect()
    }

    /// Applies configuration entries. Built-in kinds missing from the
    /// registry are registered; unknown custom kinds are an error.
    pub fn apply_settings(&mut self, settings: &[TriggerSetting]) -> Result<(), RegistryError> {
        for s in settings {
            let kind: ErrorKind = s.kind.parse().unwrap_or_else(|e| match e {});
            if self.get(&kind).is_none() {
                self.register_builtin(kind.clone())?;
            }
            let trigger = self.get_mut(&kind)?;
            trigger.enabled = s.enabled;
            trigger.template = s.template.clone();
        }
        Ok(())
    }
}

/// Substitutes `{STEPS + 1}` with `step + 1` and `{key}` with context values in
/// one pass; unknown placeholders stay as written.
pub fn render_guideline(template: &str, diagnosis: &Diagnosis, step: u32) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let key = &after[..close];
                if key == NEXT_STEP {
                    out.push_str(&(step + 1).to_string());
                } else if let Some(v) = diagnosis.context.get(key) {
                    out.push_str(v);
                } else {
                    out.push('{');
                    out.push_str(key);
                    out.push('}');
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

pub mod templates {
    pub const UNKNOWN_ACTION: &str = "Invalid action, next time you must choose an action from {action_list}. Please re-generate only Thought {STEPS + 1} and Action {STEPS + 1}.";
    pub const ARITY_MISMATCH: &str =
        "{signature} should have {expected} parameters. You have {got} parameters. Please check again.";
    pub const INVALID_FILTER_OPERATOR: &str = "You used {operator} as operator in add_filter, which is invalid. I strongly suggest you carefully check whether a comparison step and add_filter() is needed. If not needed and the result already meets our expectation, use set_answer() to determine which variable to return as the answer. If a comparison step is indeed needed, make sure the second argument is one of [>, <, >=, <=, =, !=]. Please re-generate only Thought {STEPS + 1} and Action {STEPS + 1}.";
    pub const GET_RELATION_UNKNOWN_TERM: &str = "The parameter of \"{parameter}\" is not a linked entity or created variable. Suggestion: choose from: {suggestions} for next Action. Please check again and re-generate.";
    pub const FACT_BEFORE_GET_RELATION: &str = "You should use get_relation() first. Suggestion: choose valid options from {suggestions}. Please check again and re-generate only Thought {STEPS + 1} and Action {STEPS + 1}.";
    pub const SET_ANSWER_UNKNOWN: &str = "{parameter} is not a created variable. You must set an existing variable as the answer. Existing variables include: {variables}. Please choose the proper variable and set it again.";
    pub const TWO_NEW_VARIABLES: &str = "You introduced unexisting variable in add_fact(), which is invalid. You should find another approach to solve the question. Please re-generate only Thought {STEPS + 1} and Action {STEPS + 1}.";
    pub const CVT_ANSWER: &str = "You should not set {parameter} as the answer, because its value is \"UnName_Entity\". Please check again and re-generate only Thought {STEPS + 1} and Action {STEPS + 1}.";
    pub const EMPTY_FACT_RESULT: &str = "Got empty result after adding this triple pattern. You should carefully check whether this triple is needed. You likely add a triple pattern that can not match any graph on KB.{relation_note} Please re-generate only Thought {STEPS + 1} and Action {STEPS + 1}.";
    pub const EMPTY_FILTER_RESULT: &str = "You choose add_filter as the action in this step. However, we get an empty result. I strongly suggest you carefully check if a comparison step is needed. If not needed and the result already meets our expectations, you can use set_answer() to determine which variable to return. If there is a need for a filter constraint, please carefully check the two comparison objects and the operator. Please re-generate only Thought {STEPS + 1} and Action {STEPS + 1}.";
    pub const EMPTY_CONDITION_RESULT: &str = "You choose add_condition as the action in this step. However, we get an empty result. Check whether this condition is needed at all, and if it is, check the column name, the operator and the value against the output of get_column(). Please re-generate only Thought {STEPS + 1} and Action {STEPS + 1}.";
}

fn context<const N: usize>(pairs: [(&str, String); N]) -> Context {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// A parsed call to a tool of the current dialect with the documented arity.
fn well_formed<'a>(
    fb: &EnvFeedback,
    action: &'a ActionParse,
    name: &str,
) -> Option<&'a ParsedAction> {
    let a = action.parsed()?;
    if a.name != name {
        return None;
    }
    let sig = signature(fb.memory.dialect, &a.name)?;
    (sig.params.len() == a.args.len()).then_some(a)
}

fn match_unknown_action(fb: &EnvFeedback, action: &ActionParse) -> Option<Context> {
    let dialect = fb.memory.dialect;
    let unknown = match action {
        ActionParse::Failed { .. } => true,
        ActionParse::Parsed(a) => signature(dialect, &a.name).is_none(),
    };
    unknown.then(|| {
        context([
            ("action", action.text().to_string()),
            ("action_list", action_list(dialect)),
        ])
    })
}

fn match_arity_mismatch(fb: &EnvFeedback, action: &ActionParse) -> Option<Context> {
    let a = action.parsed()?;
    let sig = signature(fb.memory.dialect, &a.name)?;
    (sig.params.len() != a.args.len()).then(|| {
        context([
            ("signature", sig.display()),
            ("expected", sig.params.len().to_string()),
            ("got", a.args.len().to_string()),
        ])
    })
}

fn match_invalid_filter_operator(fb: &EnvFeedback, action: &ActionParse) -> Option<Context> {
    let a = well_formed(fb, action, "add_filter")?;
    (a.args[1].kind != ArgKind::Operator).then(|| context([("operator", a.args[1].raw.clone())]))
}

fn relation_suggestions(memory: &MemorySnapshot, skip: &str) -> String {
    let vars = memory.created_variables.iter().map(|v| v.as_str());
    let ents = memory.linked_entities.iter().map(|l| l.id.as_str());
    let calls: Vec<String> = vars
        .chain(ents)
        .filter(|t| *t != skip)
        .map(|t| format!("get_relation({t})"))
        .collect();
    calls.join(", ")
}

fn match_get_relation_unknown_term(fb: &EnvFeedback, action: &ActionParse) -> Option<Context> {
    let a = well_formed(fb, action, "get_relation")?;
    let arg = &a.args[0];
    let store_rejected = matches!(fb.store.outcome, StoreOutcome::Error(_));
    (!fb.memory.is_known(arg) || store_rejected).then(|| {
        context([
            ("parameter", arg.raw.clone()),
            ("suggestions", relation_suggestions(&fb.memory, &arg.value)),
        ])
    })
}

fn fact_endpoints(a: &ParsedAction) -> [&Arg; 2] {
    [&a.args[0], &a.args[2]]
}

fn match_fact_before_get_relation(fb: &EnvFeedback, action: &ActionParse) -> Option<Context> {
    let a = well_formed(fb, action, "add_fact")?;
    let known: Vec<&Arg> = fact_endpoints(a)
        .into_iter()
        .filter(|arg| fb.memory.is_known(arg))
        .collect();
    let queried = known
        .iter()
        .any(|arg| fb.memory.relations_seen.contains_key(&arg.value));
    if known.is_empty() || queried {
        return None;
    }
    let calls: Vec<String> = known
        .iter()
        .map(|arg| format!("get_relation({})", arg.value))
        .collect();
    Some(context([("suggestions", calls.join(", "))]))
}

fn match_two_new_variables(fb: &EnvFeedback, action: &ActionParse) -> Option<Context> {
    let a = well_formed(fb, action, "add_fact")?;
    let [head, tail] = fact_endpoints(a);
    let new_var = |arg: &Arg| arg.kind == ArgKind::Variable && !fb.memory.is_created(&arg.value);
    (new_var(head) && new_var(tail))
        .then(|| context([("head", head.raw.clone()), ("tail", tail.raw.clone())]))
}

fn match_set_answer_unknown(fb: &EnvFeedback, action: &ActionParse) -> Option<Context> {
    let a = well_formed(fb, action, "set_answer")?;
    let arg = &a.args[0];
    let (exists, listing) = match fb.memory.dialect {
        Dialect::Triple => (
            arg.kind == ArgKind::Variable && fb.memory.is_created(&arg.value),
            fb.memory.created_list(),
        ),
        Dialect::Table => (
            fb.memory.columns.contains(&arg.value),
            format!("{{{}}}", fb.memory.columns.join(", ")),
        ),
    };
    (!exists).then(|| context([("parameter", arg.raw.clone()), ("variables", listing)]))
}

fn match_cvt_answer(fb: &EnvFeedback, action: &ActionParse) -> Option<Context> {
    let a = well_formed(fb, action, "set_answer")?;
    (fb.memory.dialect == Dialect::Triple && fb.store.cvt_answer)
        .then(|| context([("parameter", a.args[0].raw.clone())]))
}

// Emptiness only counts when the committed result before this step was not
// already empty; a first pattern has nothing before it.
fn became_empty(fb: &EnvFeedback) -> bool {
    fb.store.empty_rows() && fb.memory.last_rows() != Some(0)
}

fn match_empty_fact_result(fb: &EnvFeedback, action: &ActionParse) -> Option<Context> {
    let a = well_formed(fb, action, "add_fact")?;
    if !became_empty(fb) {
        return None;
    }
    let relation = a.args[1].value.clone();
    let queried: Vec<(&str, &Vec<String>)> = fact_endpoints(a)
        .into_iter()
        .filter_map(|arg| {
            fb.memory
                .relations_seen
                .get_key_value(&arg.value)
                .map(|(k, v)| (k.as_str(), v))
        })
        .collect();
    let note = if !queried.is_empty() && !queried.iter().any(|(_, rels)| rels.contains(&relation)) {
        let calls: Vec<String> = queried
            .iter()
            .map(|(t, _)| format!("get_relation({t})"))
            .collect();
        format!(
            " The relation {relation} is not among the relations returned by {}, so a wrong relation was likely chosen.",
            calls.join(" or ")
        )
    } else {
        String::new()
    };
    Some(context([("relation", relation), ("relation_note", note)]))
}

fn match_empty_filter_result(fb: &EnvFeedback, action: &ActionParse) -> Option<Context> {
    well_formed(fb, action, "add_filter")?;
    became_empty(fb).then(Context::new)
}

fn match_empty_condition_result(fb: &EnvFeedback, action: &ActionParse) -> Option<Context> {
    let a = well_formed(fb, action, "add_condition")?;
    became_empty(fb).then(|| context([("column", a.args[0].value.clone())]))
}
