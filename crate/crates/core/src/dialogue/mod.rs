//! Rule-based conversation flow: a validated node graph plus the engine that
//! walks it, retrieving each bot utterance from the persona's pools.

mod engine;
mod flow;

pub use engine::{
    BotUtterance, DialogueEngine, DialogueError, InputError, PoolStore, SessionState, Speaker,
    TranscriptEntry, Turn, UserInput, UtteranceSource,
};
pub use flow::{
    Action, Choice, FeedbackOption, Flow, FlowError, FlowIssue, FlowNode, InputMode, Prompt,
    PromptPool, RESUME_TARGET,
};
