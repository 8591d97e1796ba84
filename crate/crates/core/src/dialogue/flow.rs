//! Declarative conversation graph and its validator.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::EmotionContext;
use crate::protocols::ProtocolCatalog;

const DEFAULT_FLOW: &str = include_str!("../../data/default_flow.json");

/// Choice target that returns to the node a safety preemption interrupted.
pub const RESUME_TARGET: &str = "@resume";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    FreeText,
    Choice,
    None,
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputMode::FreeText => "free_text",
            InputMode::Choice => "choice",
            InputMode::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackOption {
    Better,
    Worse,
    NoChange,
}

impl FeedbackOption {
    pub const ALL: [FeedbackOption; 3] = [
        FeedbackOption::Better,
        FeedbackOption::Worse,
        FeedbackOption::NoChange,
    ];
}

impl FromStr for FeedbackOption {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace([' ', '-'], "_").as_str() {
            "better" => Ok(FeedbackOption::Better),
            "worse" => Ok(FeedbackOption::Worse),
            "no_change" => Ok(FeedbackOption::NoChange),
            other => Err(format!("unknown feedback option {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    AddSuggestion(u8),
    PresentSuggestions,
    /// Applied when the user answers this node, not on entry.
    RecordFeedback,
    EndSession,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PromptPool {
    Fixed(String),
    ByEmotion {
        by_emotion: BTreeMap<EmotionContext, String>,
    },
}

impl PromptPool {
    /// Pool for the given emotion; `None` when the pool is emotion-keyed and
    /// no emotion has been detected yet.
    pub fn resolve(&self, emotion: Option<EmotionContext>) -> Option<&str> {
        match self {
            PromptPool::Fixed(id) => Some(id),
            PromptPool::ByEmotion { by_emotion } => {
                emotion.and_then(|e| by_emotion.get(&e)).map(String::as_str)
            }
        }
    }

    pub fn pool_ids(&self) -> Vec<&str> {
        match self {
            PromptPool::Fixed(id) => vec![id.as_str()],
            PromptPool::ByEmotion { by_emotion } => by_emotion.values().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowNode {
    pub id: String,
    #[serde(default)]
    pub prompt_pool: Option<PromptPool>,
    /// Spoken when there is no pool, or the persona has no utterances in it.
    #[serde(default)]
    pub fallback_text: Option<String>,
    pub input_mode: InputMode,
    #[serde(default)]
    pub choices: Vec<Choice>,
    #[serde(default)]
    pub classifier_branch: Option<BTreeMap<EmotionContext, String>>,
    #[serde(default)]
    pub next: Option<String>,
    #[serde(default)]
    pub actions: Vec<Action>,
}

impl FlowNode {
    pub fn ends_session(&self) -> bool {
        self.actions.contains(&Action::EndSession)
    }

    pub fn records_feedback(&self) -> bool {
        self.actions.contains(&Action::RecordFeedback)
    }

    pub fn choice(&self, label: &str) -> Option<&Choice> {
        let label = label.trim();
        self.choices.iter().find(|c| c.label == label)
    }

    pub fn choice_labels(&self) -> Vec<String> {
        self.choices.iter().map(|c| c.label.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    #[serde(default)]
    pub prompt_pool: Option<String>,
    #[serde(default)]
    pub fallback_text: Option<String>,
}

fn default_invalid_limit() -> u32 {
    3
}

fn default_farewell() -> String {
    "Let's stop here for now. Take care of yourself.".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FlowDoc {
    version: u32,
    start: String,
    safety_node: String,
    #[serde(default)]
    clarify: Option<Prompt>,
    #[serde(default = "default_invalid_limit")]
    invalid_input_limit: u32,
    #[serde(default = "default_farewell")]
    farewell_text: String,
    default_protocols: BTreeMap<EmotionContext, Vec<u8>>,
    nodes: Vec<FlowNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowIssue {
    pub node: Option<String>,
    pub message: String,
}

impl fmt::Display for FlowIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(n) => write!(f, "node {n:?}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("flow file {path}: {message}")]
    Io { path: String, message: String },
    #[error("flow does not parse: {0}")]
    Parse(String),
    #[error("invalid flow: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FlowIssue>),
}

impl FlowError {
    /// Node ids named by validation issues.
    pub fn node_ids(&self) -> Vec<&str> {
        match self {
            FlowError::Invalid(issues) => issues.iter().filter_map(|i| i.node.as_deref()).collect(),
            _ => Vec::new(),
        }
    }
}

/// A validated conversation graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct Flow {
    doc: FlowDoc,
    index: HashMap<String, usize>,
}

impl Flow {
    pub fn parse(json: &str, catalog: &ProtocolCatalog) -> Result<Self, FlowError> {
        let doc: FlowDoc = serde_json::from_str(json).map_err(|e| FlowError::Parse(e.to_string()))?;
        let index = doc
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let flow = Self { doc, index };
        let issues = flow.validate(catalog);
        if issues.is_empty() {
            Ok(flow)
        } else {
            Err(FlowError::Invalid(issues))
        }
    }

    pub fn load(path: &Path, catalog: &ProtocolCatalog) -> Result<Self, FlowError> {
        let json = std::fs::read_to_string(path).map_err(|e| FlowError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&json, catalog)
    }

    pub fn default_json() -> &'static str {
        DEFAULT_FLOW
    }

    pub fn start(&self) -> &str {
        &self.doc.start
    }

    pub fn safety_node(&self) -> &str {
        &self.doc.safety_node
    }

    pub fn clarify(&self) -> Option<&Prompt> {
        self.doc.clarify.as_ref()
    }

    pub fn invalid_input_limit(&self) -> u32 {
        self.doc.invalid_input_limit
    }

    pub fn farewell_text(&self) -> &str {
        &self.doc.farewell_text
    }

    pub fn default_protocols(&self, emotion: EmotionContext) -> &[u8] {
        self.doc
            .default_protocols
            .get(&emotion)
            .map(Vec::as_slice)
            .unwrap_or_default()
    }

    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.index.get(id).map(|&i| &self.doc.nodes[i])
    }

    pub fn nodes(&self) -> &[FlowNode] {
        &self.doc.nodes
    }

    /// Every pool id any node or the clarify prompt may draw from.
    pub fn pool_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .doc
            .nodes
            .iter()
            .filter_map(|n| n.prompt_pool.as_ref())
            .flat_map(|p| p.pool_ids())
            .chain(self.doc.clarify.iter().filter_map(|c| c.prompt_pool.as_deref()))
            .map(str::to_string)
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    fn validate(&self, catalog: &ProtocolCatalog) -> Vec<FlowIssue> {
        let mut issues = Vec::new();
        let mut issue = |node: Option<&str>, message: String| {
            issues.push(FlowIssue {
                node: node.map(str::to_string),
                message,
            })
        };

        if self.doc.version != 1 {
            issue(None, format!("unsupported flow version {}", self.doc.version));
        }
        let mut seen = HashSet::new();
        for n in &self.doc.nodes {
            if !seen.insert(n.id.as_str()) {
                issue(Some(&n.id), "duplicate node id".into());
            }
        }
        for (what, id) in [("start", &self.doc.start), ("safety_node", &self.doc.safety_node)] {
            if !self.index.contains_key(id) {
                issue(Some(id), format!("{what} refers to a missing node"));
            }
        }
        if self.doc.invalid_input_limit == 0 {
            issue(None, "invalid_input_limit must be at least 1".into());
        }
        for e in EmotionContext::ALL {
            match self.doc.default_protocols.get(&e) {
                None => issue(None, format!("default_protocols has no entry for {e}")),
                Some(ids) => {
                    for id in ids.iter().filter(|id| !catalog.contains(**id)) {
                        issue(None, format!("default_protocols for {e} names unknown protocol {id}"));
                    }
                }
            }
        }
        if let Some(c) = &self.doc.clarify {
            if c.prompt_pool.is_none() && c.fallback_text.is_none() {
                issue(None, "clarify needs a prompt_pool or fallback_text".into());
            }
        }

        let exists = |t: &str| self.index.contains_key(t);
        for n in &self.doc.nodes {
            let id = Some(n.id.as_str());
            for c in &n.choices {
                if c.target != RESUME_TARGET && !exists(&c.target) {
                    issue(id, format!("choice {:?} targets missing node {:?}", c.label, c.target));
                }
            }
            let mut labels = HashSet::new();
            for c in &n.choices {
                if !labels.insert(c.label.as_str()) {
                    issue(id, format!("duplicate choice label {:?}", c.label));
                }
            }
            if let Some(next) = &n.next {
                if !exists(next) {
                    issue(id, format!("next targets missing node {next:?}"));
                }
            }
            if let Some(branch) = &n.classifier_branch {
                if n.input_mode != InputMode::FreeText {
                    issue(id, "classifier_branch requires input_mode free_text".into());
                }
                for e in EmotionContext::ALL {
                    match branch.get(&e) {
                        None => issue(id, format!("classifier_branch is missing {e}")),
                        Some(t) if !exists(t) => {
                            issue(id, format!("classifier_branch {e} targets missing node {t:?}"))
                        }
                        _ => {}
                    }
                }
            }
            if let Some(PromptPool::ByEmotion { by_emotion }) = &n.prompt_pool {
                for e in EmotionContext::ALL {
                    if !by_emotion.contains_key(&e) {
                        issue(id, format!("prompt_pool.by_emotion is missing {e}"));
                    }
                }
            }
            match n.input_mode {
                InputMode::Choice => {
                    if n.choices.is_empty() {
                        issue(id, "choice node has no choices".into());
                    }
                }
                InputMode::FreeText => {
                    if !n.choices.is_empty() {
                        issue(id, "free_text node lists choices".into());
                    }
                    if n.classifier_branch.is_none() && n.next.is_none() {
                        issue(id, "free_text node needs classifier_branch or next".into());
                    }
                }
                InputMode::None => {
                    if !n.choices.is_empty() {
                        issue(id, "node with input_mode none lists choices".into());
                    }
                    if n.next.is_none() && !n.ends_session() {
                        issue(id, "node with input_mode none needs next or end_session".into());
                    }
                }
            }
            for a in &n.actions {
                if let Action::AddSuggestion(p) = a {
                    if !catalog.contains(*p) {
                        issue(id, format!("add_suggestion names unknown protocol {p}"));
                    }
                }
            }
            if n.records_feedback() {
                if n.input_mode != InputMode::Choice {
                    issue(id, "record_feedback requires a choice node".into());
                }
                for c in &n.choices {
                    if c.label.parse::<FeedbackOption>().is_err() {
                        issue(id, format!("choice {:?} is not a feedback option", c.label));
                    }
                }
            }
        }
        if let Some(cycle_at) = self.silent_cycle() {
            issue(
                Some(&cycle_at),
                "cycle through nodes that never wait for input".into(),
            );
        }
        issues
    }

    /// A node on a `next` cycle made only of input_mode none nodes.
    fn silent_cycle(&self) -> Option<String> {
        let silent_next = |id: &str| -> Option<&str> {
            let n = self.node(id)?;
            (n.input_mode == InputMode::None && !n.ends_session())
                .then_some(n.next.as_deref())
                .flatten()
        };
        for start in &self.doc.nodes {
            let mut visited = HashSet::new();
            let mut cur = Some(start.id.as_str());
            while let Some(id) = cur {
                if !visited.insert(id) {
                    return Some(id.to_string());
                }
                cur = silent_next(id);
            }
        }
        None
    }
}

impl Default for Flow {
    fn default() -> Self {
        Self::parse(DEFAULT_FLOW, &ProtocolCatalog::default()).expect("bundled flow is valid")
    }
}
