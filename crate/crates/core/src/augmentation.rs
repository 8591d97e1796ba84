//! Corpus augmentation by sentence recombination.
//!
//! Every rewriting of a base utterance is split into sentences, each sentence
//! is filed under the position it held (first, second or third), and new
//! utterances are formed from the Cartesian product of the three position
//! lists. Pools are augmented independently, so sentences never cross base
//! utterances.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Persona, PoolId, UtterancePool};
use crate::text::{canonical, tokenize};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AugmentError {
    #[error("pool {0} has no utterances")]
    EmptyPool(PoolId),
    #[error("pool {0} yields no second-position sentence")]
    NoMainSentence(PoolId),
    #[error("no sentences to assign")]
    NoSentences,
}

const TERMINATORS: [char; 3] = ['.', '?', '!'];

/// Splits after every run of `.`, `?` or `!`, keeping the terminator with its
/// sentence. Fragments without any word characters are glued onto the
/// preceding sentence.
pub fn split_sentences(utterance: &str) -> Vec<String> {
    let mut sentences: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut chars = utterance.chars().peekable();
    while let Some(ch) = chars.next() {
        current.push(ch);
        if TERMINATORS.contains(&ch) {
            while let Some(&next) = chars.peek() {
                if TERMINATORS.contains(&next) || matches!(next, '"' | '\'' | ')' | '\u{201d}') {
                    current.push(next);
                    chars.next();
                } else {
                    break;
                }
            }
            flush(&mut sentences, &mut current);
        }
    }
    flush(&mut sentences, &mut current);
    sentences
}

fn flush(sentences: &mut Vec<String>, current: &mut String) {
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        if !trimmed.chars().any(char::is_alphanumeric) {
            if let Some(last) = sentences.last_mut() {
                last.push_str(trimmed);
            }
        } else {
            sentences.push(trimmed.to_string());
        }
    }
    current.clear();
}

/// Position slots for the sentences of one rewriting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAssignment {
    pub first: Option<String>,
    pub second: String,
    pub third: Option<String>,
}

/// Files 1–3 sentences under first/second/third. Longer inputs keep their
/// first and last sentence and merge everything between into the second slot.
pub fn assign_positions(sentences: &[String]) -> Result<SlotAssignment, AugmentError> {
    match sentences {
        [] => Err(AugmentError::NoSentences),
        [only] => Ok(SlotAssignment {
            first: None,
            second: only.clone(),
            third: None,
        }),
        [a, b] => {
            if main_is_first(a, b) {
                Ok(SlotAssignment {
                    first: None,
                    second: a.clone(),
                    third: Some(b.clone()),
                })
            } else {
                Ok(SlotAssignment {
                    first: Some(a.clone()),
                    second: b.clone(),
                    third: None,
                })
            }
        }
        [a, middle @ .., c] => Ok(SlotAssignment {
            first: Some(a.clone()),
            second: middle.join(" "),
            third: Some(c.clone()),
        }),
    }
}

/// The sentence with a question mark carries the message; otherwise the one
/// with more words; ties go to the later sentence.
fn main_is_first(a: &str, b: &str) -> bool {
    match (a.contains('?'), b.contains('?')) {
        (true, false) => true,
        (false, true) => false,
        _ => tokenize(a).len() > tokenize(b).len(),
    }
}

/// Deduplicated sentence lists; `first` and `third` each carry one empty string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionLists {
    pub first: Vec<String>,
    pub second: Vec<String>,
    pub third: Vec<String>,
}

impl PositionLists {
    pub fn from_pool(pool: &UtterancePool) -> Result<Self, AugmentError> {
        let mut first = DedupList::default();
        let mut second = DedupList::default();
        let mut third = DedupList::default();
        for utterance in &pool.utterances {
            let sentences = split_sentences(utterance);
            if sentences.is_empty() {
                continue;
            }
            let slots = assign_positions(&sentences)?;
            if let Some(s) = slots.first {
                first.push(s);
            }
            second.push(slots.second);
            if let Some(s) = slots.third {
                third.push(s);
            }
        }
        if second.items.is_empty() {
            return Err(AugmentError::NoMainSentence(pool.pool_id.clone()));
        }
        first.push_empty();
        third.push_empty();
        Ok(Self {
            first: first.items,
            second: second.items,
            third: third.items,
        })
    }

    pub fn combination_count(&self) -> usize {
        self.first.len() * self.second.len() * self.third.len()
    }

    /// All combinations in first-major order, joined with single spaces.
    pub fn combine(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.combination_count());
        for a in &self.first {
            for b in &self.second {
                for c in &self.third {
                    let mut text = String::with_capacity(a.len() + b.len() + c.len() + 2);
                    for part in [a, b, c] {
                        if part.is_empty() {
                            continue;
                        }
                        if !text.is_empty() {
                            text.push(' ');
                        }
                        text.push_str(part);
                    }
                    out.push(text);
                }
            }
        }
        out
    }
}

#[derive(Default)]
struct DedupList {
    seen: HashSet<String>,
    items: Vec<String>,
}

impl DedupList {
    fn push(&mut self, sentence: String) {
        let key = canonical(&sentence);
        if !key.is_empty() && self.seen.insert(key.clone()) {
            self.items.push(key);
        }
    }

    fn push_empty(&mut self) {
        self.items.push(String::new());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedPool {
    pub pool_id: PoolId,
    pub persona: Persona,
    pub utterances: Vec<String>,
}

impl AugmentedPool {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

pub fn augment(pool: &UtterancePool) -> Result<AugmentedPool, AugmentError> {
    if pool.utterances.is_empty() {
        return Err(AugmentError::EmptyPool(pool.pool_id.clone()));
    }
    let lists = PositionLists::from_pool(pool)?;
    Ok(AugmentedPool {
        pool_id: pool.pool_id.clone(),
        persona: pool.persona,
        utterances: lists.combine(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn pool(utterances: &[&str]) -> UtterancePool {
        UtterancePool {
            pool_id: "p".into(),
            persona: Persona::Kai,
            utterances: s(utterances),
        }
    }

    #[test]
    fn split_examples() {
        assert_eq!(
            split_sentences("I'm sorry to hear that. Can you tell me more? You're not alone."),
            s(&["I'm sorry to hear that.", "Can you tell me more?", "You're not alone."])
        );
        assert_eq!(split_sentences("How are you feeling?"), s(&["How are you feeling?"]));
        assert_eq!(
            split_sentences("Stay strong! We will work on this."),
            s(&["Stay strong!", "We will work on this."])
        );
    }

    #[test]
    fn split_edge_cases() {
        assert_eq!(split_sentences("Really?! Wow..."), s(&["Really?!", "Wow..."]));
        assert_eq!(split_sentences("No terminator here"), s(&["No terminator here"]));
        assert_eq!(split_sentences("Hi . !"), s(&["Hi .!"]));
        assert_eq!(split_sentences("He said \"go.\" Then left."), s(&["He said \"go.\"", "Then left."]));
    }

    #[test]
    fn three_sentences_keep_order() {
        let a = assign_positions(&s(&["A.", "B.", "C."])).unwrap();
        assert_eq!(a.first.as_deref(), Some("A."));
        assert_eq!(a.second, "B.");
        assert_eq!(a.third.as_deref(), Some("C."));
    }

    #[test]
    fn single_sentence_goes_to_second() {
        let a = assign_positions(&s(&["How can I help?"])).unwrap();
        assert_eq!(a.first, None);
        assert_eq!(a.second, "How can I help?");
        assert_eq!(a.third, None);
    }

    #[test]
    fn two_sentences_question_is_main() {
        let a = assign_positions(&s(&["I'm sorry.", "Would you like to try a protocol?"])).unwrap();
        assert_eq!(a.first.as_deref(), Some("I'm sorry."));
        assert_eq!(a.second, "Would you like to try a protocol?");
        assert_eq!(a.third, None);

        let a = assign_positions(&s(&["What happened?", "I am here for you."])).unwrap();
        assert_eq!(a.first, None);
        assert_eq!(a.second, "What happened?");
        assert_eq!(a.third.as_deref(), Some("I am here for you."));
    }

    #[test]
    fn two_sentences_without_question_use_length_then_later() {
        let a = assign_positions(&s(&["Let us try a calming exercise now.", "Okay."])).unwrap();
        assert_eq!(a.second, "Let us try a calming exercise now.");
        assert_eq!(a.third.as_deref(), Some("Okay."));
        // equal length, both questions: later sentence wins
        let a = assign_positions(&s(&["Are you ok?", "Is it bad?"])).unwrap();
        assert_eq!(a.first.as_deref(), Some("Are you ok?"));
        assert_eq!(a.second, "Is it bad?");
    }

    #[test]
    fn more_than_three_merge_middle() {
        let a = assign_positions(&s(&["A.", "B.", "C.", "D."])).unwrap();
        assert_eq!(a.first.as_deref(), Some("A."));
        assert_eq!(a.second, "B. C.");
        assert_eq!(a.third.as_deref(), Some("D."));
        assert_eq!(assign_positions(&[]), Err(AugmentError::NoSentences));
    }

    #[test]
    fn product_formula_eighteen() {
        // first: {X1, X2, ""}, second: {M1, M2, M3}, third: {Z1, ""}
        let p = pool(&["X1. M1? Z1.", "X2. M2?", "M3?", "X1. M1?"]);
        let lists = PositionLists::from_pool(&p).unwrap();
        assert_eq!(lists.first.len(), 3);
        assert_eq!(lists.second.len(), 3);
        assert_eq!(lists.third.len(), 2);
        let aug = augment(&p).unwrap();
        assert_eq!(aug.len(), 18);
        assert!(aug.utterances.iter().all(|u| !u.is_empty()));
        assert!(aug.utterances.contains(&"X2. M1? Z1.".to_string()));
        assert!(aug.utterances.contains(&"M3?".to_string()));
    }

    #[test]
    fn single_rewriting_identity() {
        let aug = augment(&pool(&["You are not alone."])).unwrap();
        assert_eq!(aug.utterances, s(&["You are not alone."]));
    }

    #[test]
    fn lists_have_one_empty_string_each() {
        let lists = PositionLists::from_pool(&pool(&["A. B. C.", "D. E."])).unwrap();
        assert_eq!(lists.first.iter().filter(|x| x.is_empty()).count(), 1);
        assert_eq!(lists.third.iter().filter(|x| x.is_empty()).count(), 1);
        assert!(lists.second.iter().all(|x| !x.is_empty()));
    }

    #[test]
    fn empty_pool_errors() {
        assert_eq!(augment(&pool(&[])), Err(AugmentError::EmptyPool("p".into())));
        assert_eq!(
            augment(&pool(&["...", "?!"])),
            Err(AugmentError::NoMainSentence("p".into()))
        );
    }
}
