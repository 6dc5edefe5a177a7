#![allow(dead_code)]

use std::path::PathBuf;

use queryagent_core::eraser::{InterpreterFeedback, ResultSummary, StoreFeedback, StoreOutcome};
use queryagent_core::{
    parse_action, ActionParse, Dialect, EntityLink, EnvFeedback, ErrorKind, MemorySnapshot,
    Variable,
};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub struct TriggerCase {
    pub kind: ErrorKind,
    pub step: u32,
    pub feedback: EnvFeedback,
    pub action: ActionParse,
    /// Substrings the rendered guideline must contain.
    pub expected: Vec<&'static str>,
}

fn memory(links: &[(&str, &str)], created: &[&str]) -> MemorySnapshot {
    let mut m = MemorySnapshot::new(
        Dialect::Triple,
        links
            .iter()
            .map(|(id, name)| EntityLink::new(*id, *name))
            .collect(),
    );
    m.created_variables = created.iter().map(|v| Variable::new(*v).unwrap()).collect();
    m.prior_results.push(ResultSummary {
        step: 1,
        action: "add_fact(...)".into(),
        rows: 4,
    });
    m
}

#[allow(clippy::too_many_arguments)]
fn case(
    kind: ErrorKind,
    step: u32,
    memory: MemorySnapshot,
    outcome: StoreOutcome,
    cvt_answer: bool,
    interpreter: InterpreterFeedback,
    action: &str,
    expected: Vec<&'static str>,
) -> TriggerCase {
    let action = parse_action(&format!("Action {step}: {action}"), &memory.linked_entities);
    TriggerCase {
        kind,
        step,
        feedback: EnvFeedback {
            store: StoreFeedback {
                outcome,
                cvt_answer,
            },
            interpreter,
            memory,
        },
        action,
        expected,
    }
}

/// One crafted situation per standard trigger, with the reference guideline wording.
pub fn trigger_cases() -> Vec<TriggerCase> {
    let ok = || InterpreterFeedback::Ok;
    let err = |m: &str| InterpreterFeedback::Error(m.to_string());
    let violin = [("m.01663r", "violin")];
    let mut seen_violin = memory(&violin, &["?instrument"]);
    seen_violin
        .relations_seen
        .insert("m.01663r".into(), vec!["music.instrument.family".into()]);

    vec![
        case(
            ErrorKind::UnknownAction,
            3,
            memory(&violin, &[]),
            StoreOutcome::NotExecuted,
            false,
            err("could not read an action"),
            "None",
            vec![
                "Invalid action, next time you must choose an action from get_relation(), add_fact(), add_max(), add_min(), add_count(), add_filter(), set_answer(), execute(). Please re-generate only Thought 4 and Action 4.",
            ],
        ),
        case(
            ErrorKind::ArityMismatch,
            4,
            memory(&violin, &[]),
            StoreOutcome::NotExecuted,
            false,
            err("add_fact() takes 3 arguments but 2 were given"),
            "add_fact(?x, ?y)",
            vec!["add_fact(head,relation,tail) should have 3 parameters. You have 2 parameters. Please check again."],
        ),
        case(
            ErrorKind::InvalidFilterOperator,
            5,
            memory(&violin, &["?engine"]),
            StoreOutcome::NotExecuted,
            false,
            err("invalid operator"),
            "add_filter(?engine, aviation.aircraft_model.part_of_line, m.031vqw)",
            vec![
                "You used aviation.aircraft_model.part_of_line as operator in add_filter, which is invalid.",
                "I strongly suggest you carefully check whether a comparison step and add_filter() is needed.",
                "make sure the second argument is one of [>, <, >=, <=, =, !=]. Please re-generate only Thought 6 and Action 6.",
            ],
        ),
        case(
            ErrorKind::GetRelationOnUnknownTerm,
            2,
            memory(&violin, &["?instrument"]),
            StoreOutcome::Error("unknown term g.1233lk8r".into()),
            false,
            ok(),
            "get_relation(g.1233lk8r)",
            vec![
                "The parameter of \"g.1233lk8r\" is not a linked entity or created variable.",
                "Suggestion: choose from: get_relation(?instrument), get_relation(m.01663r) for next Action. Please check again and re-generate.",
            ],
        ),
        case(
            ErrorKind::FactBeforeGetRelation,
            1,
            memory(&[("m.0bj4p9h", "the daily")], &[]),
            StoreOutcome::Rows { count: 2 },
            false,
            ok(),
            "add_fact(m.0bj4p9h, ?relation, ?newspaper)",
            vec![
                "You should use get_relation() first. Suggestion: choose valid options from get_relation(m.0bj4p9h). Please check again and re-generate only Thought 2 and Action 2.",
            ],
        ),
        case(
            ErrorKind::TwoNewVariablesInFact,
            3,
            memory(&violin, &["?instrument"]),
            StoreOutcome::Rows { count: 7 },
            false,
            ok(),
            "add_fact(?exhibition, exhibition.exhibition_subject.subject, ?subject)",
            vec![
                "You introduced unexisting variable in add_fact(), which is invalid. You should find another approach to solve the question. Please re-generate only Thought 4 and Action 4.",
            ],
        ),
        case(
            ErrorKind::SetAnswerUnknownVariable,
            6,
            memory(&violin, &["?car", "?speed"]),
            StoreOutcome::NotExecuted,
            false,
            err("?boat is not a created variable"),
            "set_answer(?boat)",
            vec![
                "?boat is not a created variable. You must set an existing variable as the answer. Existing variables include: {?car, ?speed}. Please choose the proper variable and set it again.",
            ],
        ),
        case(
            ErrorKind::CvtAnswer,
            5,
            memory(&violin, &["?conflict"]),
            StoreOutcome::NotExecuted,
            true,
            ok(),
            "set_answer(?conflict)",
            vec![
                "You should not set ?conflict as the answer, because its value is \"UnName_Entity\". Please check again and re-generate only Thought 6 and Action 6.",
            ],
        ),
        case(
            ErrorKind::EmptyFactResult,
            4,
            seen_violin.clone(),
            StoreOutcome::Rows { count: 0 },
            false,
            ok(),
            "add_fact(?instrument, music.instrument.family, m.01663r)",
            vec![
                "Got empty result after adding this triple pattern. You should carefully check whether this triple is needed. You likely add a triple pattern that can not match any graph on KB.",
                "Please re-generate only Thought 5 and Action 5.",
            ],
        ),
        case(
            ErrorKind::EmptyFilterResult,
            7,
            seen_violin,
            StoreOutcome::Rows { count: 0 },
            false,
            ok(),
            "add_filter(?instrument, >, 3)",
            vec![
                "You choose add_filter as the action in this step. However, we get an empty result. I strongly suggest you carefully check if a comparison step is needed. If not needed and the result already meets our expectations, you can use set_answer() to determine which variable to return. If there is a need for a filter constraint, please carefully check the two comparison objects and the operator. Please re-generate only Thought 8 and Action 8.",
            ],
        ),
    ]
}
