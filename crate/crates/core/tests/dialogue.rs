use std::collections::HashSet;
use std::sync::{Arc, OnceLock};

use satbot_core::assets::{augment_persona, demo_dataset, demo_store};
use satbot_core::corpus::{EmotionContext, PartitionConfig, Persona};
use satbot_core::dialogue::{
    DialogueEngine, DialogueError, FeedbackOption, Flow, FlowError, InputError, InputMode, PoolStore,
    UserInput, UtteranceSource,
};
use satbot_core::emotion::KeywordClassifier;
use satbot_core::protocols::ProtocolCatalog;
use satbot_core::retrieval::{RetrievalConfig, RetrievalWeights, Retriever};
use satbot_core::safety::RiskLexicon;

fn store() -> Arc<PoolStore> {
    static STORE: OnceLock<Arc<PoolStore>> = OnceLock::new();
    STORE.get_or_init(|| demo_store().unwrap()).clone()
}

fn engine() -> DialogueEngine {
    DialogueEngine {
        flow: Arc::new(Flow::default()),
        catalog: Arc::new(ProtocolCatalog::default()),
        emotion: Arc::new(KeywordClassifier::default()),
        risk: Arc::new(RiskLexicon::default()),
        pools: store(),
        retriever: Retriever::new(RetrievalWeights::default(), RetrievalConfig::default()).unwrap(),
    }
}

fn text(s: &str) -> UserInput {
    UserInput::Text(s.into())
}

fn choice(s: &str) -> UserInput {
    UserInput::Choice(s.into())
}

#[test]
fn default_flow_validates_and_pools_cover_it() {
    let e = engine();
    for p in Persona::ALL {
        assert!(e.missing_pools(p).is_empty(), "{p}: {:?}", e.missing_pools(p));
    }
}

#[test]
fn anger_branch_and_feedback_loop() {
    let e = engine();
    let (mut s, t) = e.start("s1", Persona::Arman, 7).unwrap();
    assert_eq!(t.node, "opening");
    assert_eq!(t.input_mode, InputMode::FreeText);
    assert_eq!(t.utterances.len(), 1);

    let t = e.step(&mut s, text("I'm furious at my brother")).unwrap();
    assert_eq!(s.detected_emotion, Some(EmotionContext::Anger));
    assert_eq!(t.node, "ask_event");
    assert_eq!(t.utterances.len(), 2, "acknowledgement then question");
    match &t.utterances[0].source {
        UtteranceSource::Pool { pool_id, .. } => assert_eq!(pool_id, "ack_anger"),
        other => panic!("{other:?}"),
    }

    e.step(&mut s, choice("yes")).unwrap();
    e.step(&mut s, choice("yes")).unwrap();
    e.step(&mut s, choice("no")).unwrap();
    let t = e.step(&mut s, choice("yes")).unwrap();
    assert_eq!(t.node, "present");
    let ids: Vec<u8> = t.suggestions.unwrap().iter().map(|p| p.id).collect();
    assert_eq!(ids, vec![7, 13, 15]);

    e.step(&mut s, choice("tried_it")).unwrap();
    let t = e.step(&mut s, choice("no_change")).unwrap();
    assert_eq!(t.node, "alternative_suggestion");
    assert_eq!(s.feedback, vec![FeedbackOption::NoChange]);
    assert!(t.suggestions.unwrap().iter().any(|p| p.id == 17));

    e.step(&mut s, choice("tried_it")).unwrap();
    let t = e.step(&mut s, choice("better")).unwrap();
    assert!(t.ended);
    assert!(matches!(e.step(&mut s, choice("better")), Err(DialogueError::Ended)));
}

#[test]
fn persona_isolation() {
    let e = engine();
    let olivia: HashSet<String> = augment_persona(&demo_dataset(), Persona::Olivia, &PartitionConfig::default())
        .unwrap()
        .into_iter()
        .flat_map(|p| p.utterances)
        .collect();
    for seed in 0..5 {
        let (mut s, t) = e.start("iso", Persona::Olivia, seed).unwrap();
        let mut said: Vec<_> = t.utterances;
        for input in [text("I feel anxious all the time"), choice("no"), choice("yes"), choice("yes"), choice("tried_it"), choice("worse")] {
            said.extend(e.step(&mut s, input).unwrap().utterances);
        }
        for u in said {
            if let UtteranceSource::Pool { .. } = u.source {
                assert!(olivia.contains(&u.text), "{:?}", u.text);
            }
        }
    }
}

#[test]
fn safety_preempts_everywhere_and_resumes() {
    let e = engine();
    let (mut s, _) = e.start("safe", Persona::Kai, 1).unwrap();
    let t = e.step(&mut s, text("I want to hurt myself")).unwrap();
    assert_eq!(t.node, "safety");
    assert_eq!(t.safety.unwrap().matched_phrase, "hurt myself");
    assert!(t.suggestions.is_none());
    assert_eq!(s.detected_emotion, None);
    let t = e.step(&mut s, choice("continue")).unwrap();
    assert_eq!(t.node, "opening");

    // free text at a choice node is still screened
    e.step(&mut s, text("I feel sad")).unwrap();
    let before = s.suggestions.clone();
    let t = e.step(&mut s, text("i want to die")).unwrap();
    assert_eq!(t.node, "safety");
    assert_eq!(s.suggestions, before);
    let t = e.step(&mut s, choice("continue")).unwrap();
    assert_eq!(t.node, "ask_event");
}

#[test]
fn non_risky_text_is_not_flagged() {
    let e = engine();
    assert!(e.check_safety("this protocol hurt my pride").is_none());
}

#[test]
fn invalid_input_reprompts_then_ends() {
    let e = engine();
    let (mut s, _) = e.start("inv", Persona::Robert, 3).unwrap();
    e.step(&mut s, text("I'm so sad")).unwrap();
    let node = s.current_node.clone();
    let err = e.step(&mut s, choice("maybe")).unwrap_err();
    assert!(matches!(
        err,
        DialogueError::Input { reason: InputError::UnknownChoice { .. }, remaining: 2 }
    ));
    assert_eq!(s.current_node, node);
    let err = e.step(&mut s, text("hello")).unwrap_err();
    assert!(matches!(err, DialogueError::Input { reason: InputError::ModeMismatch { .. }, remaining: 1 }));
    let t = e.step(&mut s, choice("")).unwrap();
    assert!(t.ended && s.ended);
}

#[test]
fn valid_input_resets_invalid_count() {
    let e = engine();
    let (mut s, _) = e.start("reset", Persona::Gabrielle, 3).unwrap();
    e.step(&mut s, text("I'm so sad")).unwrap();
    e.step(&mut s, choice("x")).unwrap_err();
    e.step(&mut s, choice("x")).unwrap_err();
    e.step(&mut s, choice("yes")).unwrap();
    assert_eq!(s.invalid_inputs, 0);
    assert!(e.step(&mut s, choice("x")).is_err());
}

#[test]
fn low_confidence_asks_once_then_falls_back() {
    let e = engine();
    let (mut s, _) = e.start("clar", Persona::Kai, 9).unwrap();
    let t = e.step(&mut s, text("the weather is mild")).unwrap();
    assert!(t.clarifying);
    assert_eq!(t.node, "opening");
    assert_eq!(s.detected_emotion, None);
    let t = e.step(&mut s, text("hmm not sure")).unwrap();
    assert!(!t.clarifying);
    assert_eq!(s.detected_emotion, Some(EmotionContext::Sadness));
}

#[test]
fn happy_path_and_default_recommendation() {
    let e = engine();
    let (mut s, _) = e.start("happy", Persona::Kai, 2).unwrap();
    let t = e.step(&mut s, text("I feel great today")).unwrap();
    assert_eq!(t.node, "present");
    assert_eq!(t.suggestions.unwrap()[0].id, 10);

    let (mut s, _) = e.start("dflt", Persona::Kai, 2).unwrap();
    e.step(&mut s, text("I feel so sad")).unwrap();
    s.suggestions.clear();
    assert_eq!(e.recommend(&s).iter().map(|p| p.id).collect::<Vec<_>>(), vec![1]);
}

#[test]
fn step_is_deterministic_under_seed() {
    let e = engine();
    let run = |seed| {
        let (mut s, t) = e.start("det", Persona::Kai, seed).unwrap();
        let mut out = vec![t];
        for input in [text("I'm worried about my exams"), choice("yes"), choice("no")] {
            out.push(e.step(&mut s, input).unwrap());
        }
        out
    };
    assert_eq!(run(11), run(11));
}

#[test]
fn wipe_clears_user_content() {
    let e = engine();
    let (mut s, _) = e.start("wipe", Persona::Kai, 2).unwrap();
    e.step(&mut s, text("I'm furious at my landlord")).unwrap();
    assert!(!s.transcript.is_empty() && !s.memory.is_empty());
    s.wipe();
    assert!(s.transcript.is_empty() && s.memory.is_empty() && s.detected_emotion.is_none());
}

fn flow_with(edit: impl FnOnce(&mut serde_json::Value)) -> Result<Flow, FlowError> {
    let mut v: serde_json::Value = serde_json::from_str(Flow::default_json()).unwrap();
    edit(&mut v);
    Flow::parse(&v.to_string(), &ProtocolCatalog::default())
}

fn node_mut<'a>(v: &'a mut serde_json::Value, id: &str) -> &'a mut serde_json::Value {
    v["nodes"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|n| n["id"] == id)
        .unwrap()
}

#[test]
fn validator_rejects_bad_flows() {
    let err = flow_with(|v| node_mut(v, "ask_event")["choices"][0]["target"] = "nowhere".into()).unwrap_err();
    assert_eq!(err.node_ids(), vec!["ask_event"]);
    assert!(err.to_string().contains("nowhere"));

    let err = flow_with(|v| {
        node_mut(v, "opening")["classifier_branch"]
            .as_object_mut()
            .unwrap()
            .remove("anger");
    })
    .unwrap_err();
    assert_eq!(err.node_ids(), vec!["opening"]);
    assert!(err.to_string().contains("anger"));

    let err = flow_with(|v| node_mut(v, "tag_recent")["actions"][0]["add_suggestion"] = 21.into()).unwrap_err();
    assert_eq!(err.node_ids(), vec!["tag_recent"]);

    let err = flow_with(|v| node_mut(v, "ask_recent")["choices"] = serde_json::json!([])).unwrap_err();
    assert_eq!(err.node_ids(), vec!["ask_recent"]);

    let err = flow_with(|v| node_mut(v, "feedback_better")["next"] = "acknowledge_happy".into());
    assert!(err.is_ok(), "passes through present, which waits for input");
    let err = flow_with(|v| {
        node_mut(v, "tag_overwhelm")["next"] = "tag_self_critical".into();
        node_mut(v, "tag_self_critical")["next"] = "tag_overwhelm".into();
    })
    .unwrap_err();
    assert!(err.to_string().contains("cycle"));
}
