//! Turn-by-turn execution of a [`Flow`] for one session.

use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;
use zeroize::Zeroize;

use super::flow::{Action, FeedbackOption, Flow, FlowNode, InputMode, RESUME_TARGET};
use crate::corpus::{EmotionContext, Persona, PoolId};
use crate::emotion::{EmotionClassifier, EmotionError};
use crate::protocols::{ProtocolCatalog, ProtocolRef};
use crate::retrieval::{RetrievalError, Retriever, ScoredUtterance, UtteranceMemory};
use crate::safety::{RiskLexicon, SafetyEvent};

/// Scored utterance pools keyed by persona and pool id.
#[derive(Debug, Clone, Default)]
pub struct PoolStore {
    pools: HashMap<Persona, HashMap<PoolId, Vec<ScoredUtterance>>>,
}

impl PoolStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, persona: Persona, pool_id: PoolId, utterances: Vec<ScoredUtterance>) {
        self.pools.entry(persona).or_default().insert(pool_id, utterances);
    }

    pub fn get(&self, persona: Persona, pool_id: &str) -> Option<&[ScoredUtterance]> {
        self.pools
            .get(&persona)?
            .get(&PoolId::new(pool_id))
            .map(Vec::as_slice)
    }

    pub fn pool_ids(&self, persona: Persona) -> Vec<&PoolId> {
        let mut ids: Vec<&PoolId> = self
            .pools
            .get(&persona)
            .map(|m| m.keys().collect())
            .unwrap_or_default();
        ids.sort();
        ids
    }

    pub fn utterance_count(&self, persona: Persona) -> usize {
        self.pools
            .get(&persona)
            .map(|m| m.values().map(Vec::len).sum())
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtteranceSource {
    Pool { pool_id: String, index: usize },
    Static,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BotUtterance {
    pub text: String,
    pub source: UtteranceSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Bot,
}

#[derive(Debug, Clone)]
pub struct TranscriptEntry {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UserInput {
    Text(String),
    Choice(String),
}

/// What the client needs to render after a turn.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Turn {
    pub node: String,
    pub utterances: Vec<BotUtterance>,
    pub input_mode: InputMode,
    pub choices: Vec<String>,
    pub suggestions: Option<Vec<ProtocolRef>>,
    pub safety: Option<SafetyEvent>,
    pub detected_emotion: Option<EmotionContext>,
    /// The classifier was unsure and the bot asked the user to elaborate.
    pub clarifying: bool,
    pub ended: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InputError {
    #[error("expected {expected} input, got {got}")]
    ModeMismatch { expected: InputMode, got: InputMode },
    #[error("choice {label:?} is not offered; options are {offered:?}")]
    UnknownChoice { label: String, offered: Vec<String> },
    #[error("empty message")]
    EmptyText,
}

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("session has ended")]
    Ended,
    #[error("{reason} ({remaining} attempts left)")]
    Input { reason: InputError, remaining: u32 },
    #[error("no utterances for persona {persona} in pool {pool_id:?} at node {node:?}")]
    MissingPool {
        persona: Persona,
        pool_id: String,
        node: String,
    },
    #[error("flow has no node {0:?}")]
    UnknownNode(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Emotion(#[from] EmotionError),
}

/// Per-session conversation state. Wiped on drop.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub session_id: String,
    pub persona: Persona,
    pub detected_emotion: Option<EmotionContext>,
    pub current_node: String,
    pub suggestions: Vec<u8>,
    pub memory: UtteranceMemory,
    pub transcript: Vec<TranscriptEntry>,
    pub feedback: Vec<FeedbackOption>,
    pub clarify_used: bool,
    pub invalid_inputs: u32,
    pub ended: bool,
    resume_node: Option<String>,
    rng: ChaCha8Rng,
}

impl SessionState {
    fn new(session_id: String, persona: Persona, start: &str, seed: u64) -> Self {
        Self {
            session_id,
            persona,
            detected_emotion: None,
            current_node: start.to_string(),
            suggestions: Vec::new(),
            memory: UtteranceMemory::default(),
            transcript: Vec::new(),
            feedback: Vec::new(),
            clarify_used: false,
            invalid_inputs: 0,
            ended: false,
            resume_node: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Overwrites and drops everything the user said or was told.
    pub fn wipe(&mut self) {
        for entry in &mut self.transcript {
            entry.text.zeroize();
        }
        self.transcript.clear();
        self.memory.wipe();
        self.detected_emotion = None;
        self.suggestions.clear();
        self.feedback.clear();
        if let Some(r) = &mut self.resume_node {
            r.zeroize();
        }
        self.resume_node = None;
    }

    fn say(&mut self, turn: &mut Turn, utterance: BotUtterance) {
        self.transcript.push(TranscriptEntry {
            speaker: Speaker::Bot,
            text: utterance.text.clone(),
        });
        turn.utterances.push(utterance);
    }
}

impl Drop for SessionState {
    fn drop(&mut self) {
        self.wipe();
    }
}

/// Shared, read-only machinery that advances sessions through a flow.
#[derive(Clone)]
pub struct DialogueEngine {
    pub flow: Arc<Flow>,
    pub catalog: Arc<ProtocolCatalog>,
    pub emotion: Arc<dyn EmotionClassifier>,
    pub risk: Arc<RiskLexicon>,
    pub pools: Arc<PoolStore>,
    pub retriever: Retriever,
}

impl std::fmt::Debug for DialogueEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DialogueEngine")
            .field("start", &self.flow.start())
            .field("retriever", &self.retriever)
            .finish_non_exhaustive()
    }
}

impl DialogueEngine {
    /// Pools the flow references that `persona` has no utterances for.
    pub fn missing_pools(&self, persona: Persona) -> Vec<String> {
        self.flow
            .pool_ids()
            .into_iter()
            .filter(|id| self.pools.get(persona, id).is_none_or(|p| p.is_empty()))
            .collect()
    }

    pub fn start(
        &self,
        session_id: impl Into<String>,
        persona: Persona,
        seed: u64,
    ) -> Result<(SessionState, Turn), DialogueError> {
        let mut state = SessionState::new(session_id.into(), persona, self.flow.start(), seed);
        let mut turn = self.empty_turn(&state);
        self.enter(&mut state, self.flow.start().to_string(), &mut turn)?;
        self.finish(&state, &mut turn);
        Ok((state, turn))
    }

    /// Applies one user input. On error the state is left as it was, except
    /// that invalid inputs are counted; reaching the flow's limit ends the
    /// session with a farewell instead of another error.
    pub fn step(&self, state: &mut SessionState, input: UserInput) -> Result<Turn, DialogueError> {
        if state.ended {
            return Err(DialogueError::Ended);
        }
        let mut work = state.clone();
        match self.advance(&mut work, input) {
            Ok(turn) => {
                work.invalid_inputs = 0;
                *state = work;
                Ok(turn)
            }
            Err(DialogueError::Input { reason, .. }) => {
                state.invalid_inputs += 1;
                let limit = self.flow.invalid_input_limit();
                if state.invalid_inputs >= limit {
                    let mut turn = self.empty_turn(state);
                    state.say(
                        &mut turn,
                        BotUtterance {
                            text: self.flow.farewell_text().to_string(),
                            source: UtteranceSource::Static,
                        },
                    );
                    state.ended = true;
                    self.finish(state, &mut turn);
                    return Ok(turn);
                }
                Err(DialogueError::Input {
                    reason,
                    remaining: limit - state.invalid_inputs,
                })
            }
            Err(e) => Err(e),
        }
    }

    /// Risk-lexicon screen applied to every free-text input before anything else.
    pub fn check_safety(&self, text: &str) -> Option<SafetyEvent> {
        self.risk.check(text)
    }

    /// Current suggestions, or the flow's default for the detected emotion
    /// when none have been collected.
    pub fn recommend(&self, state: &SessionState) -> Vec<ProtocolRef> {
        let ids: &[u8] = if state.suggestions.is_empty() {
            state
                .detected_emotion
                .map(|e| self.flow.default_protocols(e))
                .unwrap_or_default()
        } else {
            &state.suggestions
        };
        ids.iter().filter_map(|id| self.catalog.get(*id).cloned()).collect()
    }

    fn advance(&self, state: &mut SessionState, input: UserInput) -> Result<Turn, DialogueError> {
        let node = self.node(&state.current_node)?.clone();
        let mut turn = self.empty_turn(state);
        let target = match input {
            UserInput::Text(text) => {
                if let Some(event) = self.check_safety(&text) {
                    state.transcript.push(TranscriptEntry {
                        speaker: Speaker::User,
                        text,
                    });
                    if state.current_node != self.flow.safety_node() {
                        state.resume_node = Some(state.current_node.clone());
                    }
                    self.enter(state, self.flow.safety_node().to_string(), &mut turn)?;
                    turn.safety = Some(event);
                    turn.suggestions = None;
                    self.finish(state, &mut turn);
                    return Ok(turn);
                }
                if node.input_mode != InputMode::FreeText {
                    return Err(input_error(InputError::ModeMismatch {
                        expected: node.input_mode,
                        got: InputMode::FreeText,
                    }));
                }
                if text.trim().is_empty() {
                    return Err(input_error(InputError::EmptyText));
                }
                let target = match &node.classifier_branch {
                    Some(branch) => {
                        let prediction = self.emotion.classify(&text)?;
                        if prediction.low_confidence && !state.clarify_used {
                            if let Some(clarify) = self.flow.clarify() {
                                state.clarify_used = true;
                                state.transcript.push(TranscriptEntry {
                                    speaker: Speaker::User,
                                    text,
                                });
                                let u = self.utter(
                                    state,
                                    &node.id,
                                    clarify.prompt_pool.as_deref(),
                                    clarify.fallback_text.as_deref(),
                                )?;
                                if let Some(u) = u {
                                    state.say(&mut turn, u);
                                }
                                turn.clarifying = true;
                                self.finish(state, &mut turn);
                                return Ok(turn);
                            }
                        }
                        state.detected_emotion = Some(prediction.context);
                        branch[&prediction.context].clone()
                    }
                    None => node.next.clone().expect("validated free_text node has next"),
                };
                state.transcript.push(TranscriptEntry {
                    speaker: Speaker::User,
                    text,
                });
                target
            }
            UserInput::Choice(label) => {
                if node.input_mode != InputMode::Choice {
                    return Err(input_error(InputError::ModeMismatch {
                        expected: node.input_mode,
                        got: InputMode::Choice,
                    }));
                }
                let choice = node.choice(&label).ok_or_else(|| {
                    input_error(InputError::UnknownChoice {
                        label: label.clone(),
                        offered: node.choice_labels(),
                    })
                })?;
                if node.records_feedback() {
                    if let Ok(f) = choice.label.parse() {
                        state.feedback.push(f);
                    }
                }
                state.transcript.push(TranscriptEntry {
                    speaker: Speaker::User,
                    text: choice.label.clone(),
                });
                if choice.target == RESUME_TARGET {
                    state
                        .resume_node
                        .take()
                        .unwrap_or_else(|| self.flow.start().to_string())
                } else {
                    choice.target.clone()
                }
            }
        };
        self.enter(state, target, &mut turn)?;
        self.finish(state, &mut turn);
        Ok(turn)
    }

    /// Moves to `target`, speaks, runs its actions, and keeps following
    /// `next` through nodes that do not wait for input.
    fn enter(&self, state: &mut SessionState, mut target: String, turn: &mut Turn) -> Result<(), DialogueError> {
        // The validator rules out silent cycles; the bound is a second guard.
        for _ in 0..=self.flow.nodes().len() {
            let node = self.node(&target)?;
            state.current_node = node.id.clone();
            let pool = node
                .prompt_pool
                .as_ref()
                .and_then(|p| p.resolve(state.detected_emotion));
            if let Some(u) = self.utter(state, &node.id, pool, node.fallback_text.as_deref())? {
                state.say(turn, u);
            }
            for action in &node.actions {
                match action {
                    Action::AddSuggestion(id) => {
                        if !state.suggestions.contains(id) {
                            state.suggestions.push(*id);
                        }
                    }
                    Action::PresentSuggestions => turn.suggestions = Some(self.recommend(state)),
                    Action::EndSession => state.ended = true,
                    Action::RecordFeedback => {}
                }
            }
            if state.ended || node.input_mode != InputMode::None {
                return Ok(());
            }
            target = node.next.clone().expect("validated silent node has next");
        }
        Err(DialogueError::UnknownNode(target))
    }

    fn utter(
        &self,
        state: &mut SessionState,
        node: &str,
        pool_id: Option<&str>,
        fallback: Option<&str>,
    ) -> Result<Option<BotUtterance>, DialogueError> {
        if let Some(pool_id) = pool_id {
            if let Some(pool) = self.pools.get(state.persona, pool_id).filter(|p| !p.is_empty()) {
                let r = self.retriever.retrieve(pool, &mut state.memory, &mut state.rng)?;
                return Ok(Some(BotUtterance {
                    text: r.text,
                    source: UtteranceSource::Pool {
                        pool_id: pool_id.to_string(),
                        index: r.index,
                    },
                }));
            }
            if fallback.is_none() {
                return Err(DialogueError::MissingPool {
                    persona: state.persona,
                    pool_id: pool_id.to_string(),
                    node: node.to_string(),
                });
            }
        }
        Ok(fallback.map(|text| BotUtterance {
            text: text.to_string(),
            source: UtteranceSource::Static,
        }))
    }

    fn node(&self, id: &str) -> Result<&FlowNode, DialogueError> {
        self.flow
            .node(id)
            .ok_or_else(|| DialogueError::UnknownNode(id.to_string()))
    }

    fn empty_turn(&self, state: &SessionState) -> Turn {
        Turn {
            node: state.current_node.clone(),
            utterances: Vec::new(),
            input_mode: InputMode::None,
            choices: Vec::new(),
            suggestions: None,
            safety: None,
            detected_emotion: state.detected_emotion,
            clarifying: false,
            ended: false,
        }
    }

    fn finish(&self, state: &SessionState, turn: &mut Turn) {
        turn.node = state.current_node.clone();
        turn.detected_emotion = state.detected_emotion;
        turn.ended = state.ended;
        if state.ended {
            turn.input_mode = InputMode::None;
            turn.choices.clear();
        } else if let Some(node) = self.flow.node(&state.current_node) {
            turn.input_mode = node.input_mode;
            turn.choices = node.choice_labels();
        }
    }
}

fn input_error(reason: InputError) -> DialogueError {
    DialogueError::Input {
        reason,
        remaining: 0,
    }
}
