//! The step loop: generate, parse, execute on a tentative state, check, then
//! commit or roll back.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use queryagent_core::action::{signature, tools};
use queryagent_core::eraser::{InterpreterFeedback, ResultSummary, StoreFeedback, StoreOutcome};
use queryagent_core::program::Answer;
use queryagent_core::{
    parse_action, parse_thought, ActionParse, AggregationKind, AnswerSet, ArgKind, BindingTable,
    Dialect, Embedder, EntityLink, EnvFeedback, ErrorKind, HashedNgramEmbedder, Literal,
    MemorySnapshot, ParsedAction, QueryProgram, Table, TriggerRegistry, TripleStore,
};
use thiserror::Error;

use crate::llm::{CostLedger, GenerationRequest, LanguageModel, LlmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Eraser,
    ZeroShot,
    FewShot,
    Off,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Eraser,
        Strategy::ZeroShot,
        Strategy::FewShot,
        Strategy::Off,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Eraser => "eraser",
            Strategy::ZeroShot => "zeroshot",
            Strategy::FewShot => "fewshot",
            Strategy::Off => "off",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!("unknown strategy {s:?}; expected eraser, zeroshot, fewshot or off")
            })
    }
}

pub const ZERO_SHOT_NOTE: &str = "Review the action you just took and its result. If anything about it looks wrong, fix it in your next action.";

pub const FEW_SHOT_NOTE: &str = "Before the next action, compare this step with these worked corrections.
Case A. Action: add_fact(?x, ?y) gave an error because add_fact takes a head, a relation and a tail. Fixed action: add_fact(?x, film.film.directed_by, ?y).
Case B. Action: add_fact(m.film, film.film.director, ?d) matched nothing. The relations listed for m.film contained film.film.directed_by instead. Fixed action: add_fact(m.film, film.film.directed_by, ?d).
Case C. Action: add_filter(?year, after, 1990) used a word where a comparison operator belongs. Fixed action: add_filter(?year, >, 1990).
Case D. Action: set_answer(?movie) named a variable that was never created. The created variables were ?film and ?year. Fixed action: set_answer(?film).
Case E. Action: get_relation(brad) referred to neither a linked entity nor a created variable. Fixed action: get_relation(m.brad_pitt).
Case F. Action: set_answer(?award_event) picked a variable whose values are unnamed intermediate nodes. Fixed action: add_fact(?award_event, award.award_honor.award, ?award) followed by set_answer(?award).
Case G. Action: add_condition(Team, =, bosten) returned no rows. The values listed by get_column(Team) contained boston. Fixed action: add_condition(Team, =, boston).
If your last step resembles one of these cases, correct it the same way; otherwise continue.";

const TRIPLE_INSTRUCTION: &str = "You answer questions over a knowledge graph by building a query one call at a time. \
Each turn, write one Thought line and one Action line. After every action you receive an Observation.
Tools:
get_relation(entity_or_variable): list the relations attached to a linked entity or a created variable.
add_fact(head,relation,tail): add a triple pattern. head and tail are entity ids, literals or ?variables.
add_max(max_var), add_min(min_var), add_count(count_var): aggregate a variable.
add_filter(ob1,op,ob2): compare two values with one of >, <, >=, <=, =, !=.
set_answer(ans_var): choose the variable the query returns.
execute(): run the query and finish.";

const TRIPLE_EXAMPLE: &str = "Example
Question: how many albums were released by the band that recorded yellow submarine?
Entities: [yellow submarine (m.yellow_submarine)]
Thought 1: Look at the relations of yellow submarine first.
Action 1: get_relation(m.yellow_submarine)
Observation 1: [music.recording.artist, music.recording.length]
Thought 2: The artist relation leads to the band.
Action 2: add_fact(m.yellow_submarine, music.recording.artist, ?band)
Observation 2: ?band: [m.the_beatles]
Thought 3: Now the relations of the band.
Action 3: get_relation(?band)
Observation 3: [music.artist.album, music.recording.artist]
Thought 4: Collect the band's albums.
Action 4: add_fact(?band, music.artist.album, ?album)
Observation 4: ?band: [m.the_beatles]; ?album: [m.abbey_road, m.help, m.revolver]
Thought 5: The question asks how many, so count the albums.
Action 5: add_count(?album)
Observation 5: Aggregation set: COUNT(?album)
Thought 6: The albums are the answer.
Action 6: set_answer(?album)
Observation 6: Answer set to ?album
Thought 7: The query is complete.
Action 7: execute()
Observation 7: Answer: 3";

const TABLE_INSTRUCTION: &str = "You answer questions over a single table by building a query one call at a time. \
Each turn, write one Thought line and one Action line. After every action you receive an Observation.
Tools:
get_column(column): list the distinct values of a column.
add_condition(column,op,value): keep rows where the column compares to the value with =, > or <.
set_answer(column,aggregation_type): choose the returned column and one of NONE, MAX, MIN, COUNT, SUM, AVG.
execute(): run the query and finish.";

const TABLE_EXAMPLE: &str = "Example
Question: what was the highest attendance for games played in boston?
Table: games, columns [Venue, Opponent, Attendance]
Thought 1: Check how the venue column spells boston.
Action 1: get_column(Venue)
Observation 1: [boston, chicago, denver]
Thought 2: Keep the boston rows.
Action 2: add_condition(Venue, =, boston)
Observation 2: 4 rows match
Thought 3: The largest attendance is the answer.
Action 3: set_answer(Attendance, MAX)
Observation 3: Answer set to MAX(Attendance)
Thought 4: The query is complete.
Action 4: execute()
Observation 4: Answer: 18211";

pub fn default_instruction(dialect: Dialect) -> &'static str {
    match dialect {
        Dialect::Triple => TRIPLE_INSTRUCTION,
        Dialect::Table => TABLE_INSTRUCTION,
    }
}

pub fn default_example(dialect: Dialect) -> &'static str {
    match dialect {
        Dialect::Triple => TRIPLE_EXAMPLE,
        Dialect::Table => TABLE_EXAMPLE,
    }
}

#[derive(Clone)]
pub struct AgentConfig {
    pub max_steps: u32,
    pub instruction: String,
    pub example: String,
    pub strategy: Strategy,
    pub registry: Arc<TriggerRegistry>,
    pub embedder: Arc<dyn Embedder + Send + Sync>,
    pub threshold: usize,
    pub seed: u64,
    pub max_tokens: u32,
}

impl AgentConfig {
    pub fn new(dialect: Dialect, strategy: Strategy) -> Self {
        Self {
            max_steps: 15,
            instruction: default_instruction(dialect).to_string(),
            example: default_example(dialect).to_string(),
            strategy,
            registry: Arc::new(TriggerRegistry::for_dialect(dialect)),
            embedder: Arc::new(HashedNgramEmbedder::default()),
            threshold: queryagent_core::ranker::DEFAULT_THRESHOLD,
            seed: 0,
            max_tokens: 256,
        }
    }
}

impl fmt::Debug for AgentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgentConfig")
            .field("max_steps", &self.max_steps)
            .field("strategy", &self.strategy)
            .field("triggers", &self.registry.len())
            .field("threshold", &self.threshold)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Environment<'a> {
    Kb(&'a TripleStore),
    Table(&'a Table),
}

impl Environment<'_> {
    pub fn dialect(&self) -> Dialect {
        match self {
            Environment::Kb(_) => Dialect::Triple,
            Environment::Table(_) => Dialect::Table,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub text: String,
    pub entities: Vec<EntityLink>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub index: u32,
    pub thought: String,
    pub action: String,
    pub parsed: Option<ParsedAction>,
    pub observation: String,
    pub was_correction: bool,
    pub error_kind: Option<ErrorKind>,
    /// Raw model output, kept so a trace can be replayed.
    pub generation: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub steps: u32,
    pub corrections: u32,
    pub store_queries: u64,
    pub llm_calls: u64,
    pub ledger: CostLedger,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub question: Question,
    pub dialect: Dialect,
    pub strategy: Strategy,
    pub steps: Vec<StepRecord>,
    pub final_answer: Option<AnswerSet>,
    pub query: Option<String>,
    pub counters: Counters,
    pub aborted: Option<String>,
}

/// What a step may change. Rolled back as a whole when a step is corrected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub program: QueryProgram,
    pub memory: MemorySnapshot,
    pub bindings: BindingTable,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("language model unavailable: {0}")]
    LlmUnavailable(#[from] LlmError),
    #[error("episode already finished")]
    Finished,
}

/// Effect of one action on the tentative state.
struct Execution {
    store: StoreFeedback,
    interpreter: InterpreterFeedback,
    observation: String,
    answer: Option<(AnswerSet, String)>,
    store_queries: u64,
}

impl Execution {
    fn error(message: impl Into<String>) -> Self {
        Self {
            store: StoreFeedback::not_executed(),
            interpreter: InterpreterFeedback::Error(message.into()),
            observation: String::new(),
            answer: None,
            store_queries: 0,
        }
    }

    fn ok(store: StoreFeedback, observation: String, store_queries: u64) -> Self {
        Self {
            store,
            interpreter: InterpreterFeedback::Ok,
            observation,
            answer: None,
            store_queries,
        }
    }

    fn failed(&self) -> bool {
        matches!(self.interpreter, InterpreterFeedback::Error(_))
            || matches!(self.store.outcome, StoreOutcome::Error(_))
    }

    fn raw_observation(&self) -> String {
        match (&self.interpreter, &self.store.outcome) {
            (InterpreterFeedback::Error(e), _) => format!("Error: {e}"),
            (_, StoreOutcome::Error(e)) => format!("Error: {e}"),
            _ => self.observation.clone(),
        }
    }
}

const MAX_SHOWN: usize = 10;

fn list<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    let items: Vec<&str> = items.into_iter().collect();
    let mut shown: Vec<&str> = items.iter().copied().take(MAX_SHOWN).collect();
    let more = items.len().saturating_sub(MAX_SHOWN);
    let extra = format!("... {more} more");
    if more > 0 {
        shown.push(&extra);
    }
    format!("[{}]", shown.join(", "))
}

fn describe_answer(answer: &AnswerSet, show: impl Fn(&str) -> String) -> String {
    match answer {
        AnswerSet::Scalar(s) => show(s),
        AnswerSet::Values(v) => {
            let shown: Vec<String> = v.iter().map(|s| show(s)).collect();
            list(shown.iter().map(String::as_str))
        }
    }
}

pub fn assemble_prompt(
    config: &AgentConfig,
    question: &Question,
    dialect: Dialect,
    steps: &[StepRecord],
) -> String {
    let mut prompt = String::new();
    prompt.push_str(&config.instruction);
    prompt.push_str("\n\n");
    prompt.push_str(&config.example);
    prompt.push_str("\n\nQuestion: ");
    prompt.push_str(&question.text);
    prompt.push('\n');
    let entities: Vec<String> = question
        .entities
        .iter()
        .map(|e| format!("{} ({})", e.name, e.id))
        .collect();
    match dialect {
        Dialect::Triple => prompt.push_str(&format!("Entities: [{}]\n", entities.join(", "))),
        Dialect::Table if !entities.is_empty() => {
            prompt.push_str(&format!("Entities: [{}]\n", entities.join(", ")))
        }
        Dialect::Table => {}
    }
    for s in steps {
        prompt.push_str(&format!(
            "Thought {i}: {}\nAction {i}: {}\nObservation {i}: {}\n",
            s.thought,
            s.action,
            s.observation,
            i = s.index
        ));
    }
    prompt
}

/// Observation under a non-ERASER strategy.
pub fn apply_correction_strategy(strategy: Strategy, raw_observation: &str) -> String {
    match strategy {
        Strategy::ZeroShot => format!("{raw_observation}\n{ZERO_SHOT_NOTE}"),
        Strategy::FewShot => format!("{raw_observation}\n{FEW_SHOT_NOTE}"),
        Strategy::Off | Strategy::Eraser => raw_observation.to_string(),
    }
}

pub struct Episode<'a> {
    config: &'a AgentConfig,
    question: Question,
    env: Environment<'a>,
    state: AgentState,
    steps: Vec<StepRecord>,
    counters: Counters,
    final_answer: Option<AnswerSet>,
    query: Option<String>,
    finished: bool,
    started: Instant,
}

impl<'a> Episode<'a> {
    pub fn new(config: &'a AgentConfig, question: Question, env: Environment<'a>) -> Self {
        let dialect = env.dialect();
        let mut memory = MemorySnapshot::new(dialect, question.entities.clone());
        let program = match env {
            Environment::Kb(_) => QueryProgram::new(Dialect::Triple),
            Environment::Table(t) => {
                memory.columns = t.columns().iter().map(|c| c.name.clone()).collect();
                QueryProgram::for_table(t.schema())
            }
        };
        Self {
            config,
            question,
            env,
            state: AgentState {
                program,
                memory,
                bindings: BindingTable::unit(),
            },
            steps: Vec::new(),
            counters: Counters::default(),
            final_answer: None,
            query: None,
            finished: false,
            started: Instant::now(),
        }
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn is_finished(&self) -> bool {
        self.finished || self.counters.steps >= self.config.max_steps
    }

    pub fn prompt(&self) -> String {
        assemble_prompt(self.config, &self.question, self.env.dialect(), &self.steps)
    }

    /// One generation and its consequences.
    pub fn step(&mut self, llm: &dyn LanguageModel) -> Result<&StepRecord, AgentError> {
        if self.is_finished() {
            return Err(AgentError::Finished);
        }
        let t = self.counters.steps + 1;
        let request = GenerationRequest {
            prompt: self.prompt(),
            step: t,
            max_tokens: self.config.max_tokens,
        };
        let generation = llm.complete(&request)?;
        self.counters.steps = t;
        self.counters.llm_calls += 1;
        self.counters.ledger.record(&generation);

        let action = parse_action(&generation.text, &self.question.entities);
        let thought = parse_thought(&generation.text).unwrap_or_default();

        let mut tentative = self.state.clone();
        let exec = self.execute(&mut tentative, &action, t);
        self.counters.store_queries += exec.store_queries;

        let feedback = EnvFeedback {
            store: exec.store.clone(),
            interpreter: exec.interpreter.clone(),
            memory: self.state.memory.clone(),
        };
        let diagnosis = match self.config.strategy {
            Strategy::Eraser => self.config.registry.detect(&feedback, &action),
            _ => None,
        };

        let (observation, was_correction) = match &diagnosis {
            Some(d) => (self.config.registry.render(d, t), true),
            None => {
                if !exec.failed() {
                    self.state = tentative;
                }
                let raw = exec.raw_observation();
                (apply_correction_strategy(self.config.strategy, &raw), false)
            }
        };
        if was_correction {
            self.counters.corrections += 1;
        }

        if diagnosis.is_none() && action.is("execute") {
            if let Some((answer, query)) = exec.answer {
                self.final_answer = Some(answer);
                self.query = Some(query);
            }
            self.finished = true;
        }

        self.steps.push(StepRecord {
            index: t,
            thought,
            action: action.text().to_string(),
            parsed: action.parsed().cloned(),
            observation,
            was_correction,
            error_kind: diagnosis.map(|d| d.kind),
            generation: generation.text,
        });
        Ok(self.steps.last().expect("just pushed"))
    }

    pub fn finish(mut self, aborted: Option<String>) -> EpisodeTrace {
        self.counters.wall_ms = self.started.elapsed().as_millis() as u64;
        EpisodeTrace {
            question: self.question,
            dialect: self.env.dialect(),
            strategy: self.config.strategy,
            steps: self.steps,
            final_answer: self.final_answer,
            query: self.query,
            counters: self.counters,
            aborted,
        }
    }

    fn execute(&self, state: &mut AgentState, action: &ActionParse, t: u32) -> Execution {
        let dialect = self.env.dialect();
        let a = match action {
            ActionParse::Failed { raw } => {
                return Execution::error(format!("could not read an action from {raw:?}"))
            }
            ActionParse::Parsed(a) => a,
        };
        let Some(sig) = signature(dialect, &a.name) else {
            let names: Vec<&str> = tools(dialect).iter().map(|s| s.name).collect();
            return Execution::error(format!(
                "{}() is not a tool; available: {}",
                a.name,
                names.join(", ")
            ));
        };
        if sig.params.len() != a.args.len() {
            return Execution::error(format!(
                "{}() takes {} arguments but {} were given",
                a.name,
                sig.params.len(),
                a.args.len()
            ));
        }
        let exec = match self.env {
            Environment::Kb(kb) => self.execute_triple(kb, state, a),
            Environment::Table(table) => self.execute_table(table, state, a),
        };
        if !exec.failed() {
            state.memory.steps_taken.push(action.text().to_string());
            if let StoreOutcome::Rows { count } = exec.store.outcome {
                state.memory.prior_results.push(ResultSummary {
                    step: t,
                    action: action.text().to_string(),
                    rows: count,
                });
            }
            state.memory.created_variables = state.program.created_variables().to_vec();
        }
        exec
    }

    fn execute_triple(
        &self,
        kb: &TripleStore,
        state: &mut AgentState,
        a: &ParsedAction,
    ) -> Execution {
        let program = &mut state.program;
        let built = match a.name.as_str() {
            "get_relation" => {
                let arg = &a.args[0];
                let term = arg.to_term();
                return match kb.get_relation(&term, &state.bindings) {
                    Ok(rels) => {
                        let shown = queryagent_core::rank_relations(
                            &self.question.text,
                            &rels,
                            self.config.embedder.as_ref(),
                            self.config.threshold,
                            self.config.seed,
                        );
                        let observation = list(shown.iter().map(String::as_str));
                        state
                            .memory
                            .relations_seen
                            .insert(arg.value.clone(), shown.clone());
                        let store = StoreFeedback {
                            outcome: StoreOutcome::Relations(shown),
                            cvt_answer: false,
                        };
                        Execution::ok(store, observation, 1)
                    }
                    Err(e) => Execution {
                        store: StoreFeedback {
                            outcome: StoreOutcome::Error(e.to_string()),
                            cvt_answer: false,
                        },
                        ..Execution::ok(StoreFeedback::not_executed(), String::new(), 1)
                    },
                };
            }
            "add_fact" => program.add_fact(
                a.args[0].to_term(),
                a.args[1].value.clone(),
                a.args[2].to_term(),
            ),
            "add_filter" => {
                program.add_filter(a.args[0].to_term(), &a.args[1].value, a.args[2].to_term())
            }
            "add_max" | "add_min" | "add_count" | "set_answer" => {
                let Some(var) = a.args[0].variable() else {
                    return Execution::error(format!("{} is not a variable", a.args[0].raw));
                };
                let result = match a.name.as_str() {
                    "add_max" => program.add_max(&var),
                    "add_min" => program.add_min(&var),
                    "add_count" => program.add_count(&var),
                    _ => program.set_answer(&var),
                };
                if let Err(e) = result {
                    return Execution::error(e.to_string());
                }
                if a.name == "set_answer" {
                    let store = StoreFeedback {
                        outcome: StoreOutcome::NotExecuted,
                        cvt_answer: kb.is_cvt_only(&var, &state.bindings),
                    };
                    return Execution::ok(store, format!("Answer set to {var}"), 0);
                }
                let spec = program.aggregation().expect("aggregation just set");
                return Execution::ok(
                    StoreFeedback::not_executed(),
                    format!("Aggregation set: {}({})", spec.kind.name(), spec.target),
                    0,
                );
            }
            "execute" => {
                if program.answer().is_none() {
                    return Execution::error(queryagent_core::BuildError::NoAnswerSet.to_string());
                }
                return match kb.evaluate(program) {
                    Ok(eval) => {
                        let answer = eval.answer.unwrap_or_else(AnswerSet::empty);
                        let query = program.emit_text().unwrap_or_default();
                        let shown = describe_answer(&answer, |v| kb.display_value(v).to_string());
                        Execution {
                            answer: Some((answer.clone(), query.clone())),
                            ..Execution::ok(
                                StoreFeedback {
                                    outcome: StoreOutcome::Answer(answer),
                                    cvt_answer: false,
                                },
                                format!("Query: {query}\nAnswer: {shown}"),
                                1,
                            )
                        }
                    }
                    Err(e) => Execution {
                        store: StoreFeedback {
                            outcome: StoreOutcome::Error(e.to_string()),
                            cvt_answer: false,
                        },
                        ..Execution::ok(StoreFeedback::not_executed(), String::new(), 1)
                    },
                };
            }
            other => unreachable!("{other} passed the signature check"),
        };
        if let Err(e) = built {
            return Execution::error(e.to_string());
        }
        // add_fact / add_filter: evaluate the program so far.
        match kb.evaluate(program) {
            Ok(eval) => {
                let count = eval.bindings.rows.len();
                let observation = if count == 0 {
                    "No match: the query so far returns nothing".to_string()
                } else {
                    let parts: Vec<String> = eval
                        .bindings
                        .columns
                        .iter()
                        .map(|v| {
                            let values = eval.bindings.values(v).unwrap_or_default();
                            format!(
                                "{v}: {}",
                                list(values.into_iter().map(|x| kb.display_value(x)))
                            )
                        })
                        .collect();
                    parts.join("; ")
                };
                state.bindings = eval.bindings;
                Execution::ok(
                    StoreFeedback {
                        outcome: StoreOutcome::Rows { count },
                        cvt_answer: false,
                    },
                    observation,
                    1,
                )
            }
            Err(e) => Execution {
                store: StoreFeedback {
                    outcome: StoreOutcome::Error(e.to_string()),
                    cvt_answer: false,
                },
                ..Execution::ok(StoreFeedback::not_executed(), String::new(), 1)
            },
        }
    }

    fn execute_table(&self, table: &Table, state: &mut AgentState, a: &ParsedAction) -> Execution {
        let program = &mut state.program;
        let store_error = |e: String| Execution {
            store: StoreFeedback {
                outcome: StoreOutcome::Error(e),
                cvt_answer: false,
            },
            ..Execution::ok(StoreFeedback::not_executed(), String::new(), 1)
        };
        match a.name.as_str() {
            "get_column" => match table.get_column(&a.args[0].value) {
                Ok(cells) => {
                    let mut distinct: Vec<&str> = Vec::new();
                    for c in cells {
                        if !distinct.contains(&c) {
                            distinct.push(c);
                        }
                    }
                    let observation = list(distinct.iter().copied());
                    let store = StoreFeedback {
                        outcome: StoreOutcome::Column(
                            distinct.iter().map(|s| s.to_string()).collect(),
                        ),
                        cvt_answer: false,
                    };
                    Execution::ok(store, observation, 1)
                }
                Err(e) => store_error(e.to_string()),
            },
            "add_condition" => {
                let [column, op, value] = [&a.args[0], &a.args[1], &a.args[2]];
                if let Err(e) = program.add_condition(
                    &column.value,
                    &op.value,
                    Literal::new(value.value.clone()),
                ) {
                    return Execution::error(e.to_string());
                }
                match table.matching_rows(program.conditions()) {
                    Ok(rows) => Execution::ok(
                        StoreFeedback {
                            outcome: StoreOutcome::Rows { count: rows.len() },
                            cvt_answer: false,
                        },
                        if rows.is_empty() {
                            "No match: no row satisfies the conditions so far".to_string()
                        } else {
                            format!("{} rows match", rows.len())
                        },
                        1,
                    ),
                    Err(e) => store_error(e.to_string()),
                }
            }
            "set_answer" => {
                let column = &a.args[0].value;
                let kind =
                    if a.args[1].kind == ArgKind::Literal || a.args[1].kind == ArgKind::Entity {
                        a.args[1].value.parse::<AggregationKind>()
                    } else {
                        Err(queryagent_core::BuildError::InvalidAggregation(
                            a.args[1].raw.clone(),
                        ))
                    };
                let kind = match kind {
                    Ok(k) => k,
                    Err(e) => return Execution::error(e.to_string()),
                };
                if let Err(e) = program.set_answer_column(column, kind) {
                    return Execution::error(e.to_string());
                }
                let shown = match kind {
                    AggregationKind::None => column.clone(),
                    k => format!("{}({column})", k.name()),
                };
                Execution::ok(
                    StoreFeedback::not_executed(),
                    format!("Answer set to {shown}"),
                    0,
                )
            }
            "execute" => {
                if !matches!(program.answer(), Some(Answer::Column(_))) {
                    return Execution::error(queryagent_core::BuildError::NoAnswerSet.to_string());
                }
                match table.evaluate(program) {
                    Ok(answer) => {
                        let query = program.emit_text().unwrap_or_default();
                        let shown = describe_answer(&answer, str::to_string);
                        Execution {
                            answer: Some((answer.clone(), query.clone())),
                            ..Execution::ok(
                                StoreFeedback {
                                    outcome: StoreOutcome::Answer(answer),
                                    cvt_answer: false,
                                },
                                format!("Query: {query}\nAnswer: {shown}"),
                                1,
                            )
                        }
                    }
                    Err(e) => store_error(e.to_string()),
                }
            }
            other => unreachable!("{other} passed the signature check"),
        }
    }
}

/// Runs until execute(), the step budget, or a generation failure.
pub fn run_episode(
    config: &AgentConfig,
    question: Question,
    env: Environment<'_>,
    llm: &dyn LanguageModel,
) -> EpisodeTrace {
    let mut episode = Episode::new(config, question, env);
    while !episode.is_finished() {
        if let Err(e) = episode.step(llm) {
            return episode.finish(Some(e.to_string()));
        }
    }
    episode.finish(None)
}
