//! Goal parsing through an external text-completion model.
//!
//! The model sees a system prompt describing the goal language, one line per
//! scene object, and the user's request. Its reply must be goal text, which
//! goes through the ordinary parser. A reply that does not parse is sent
//! back once with the error attached.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{parse_dsl_for_scene, GoalError, GoalSpec};
use crate::patterns::PatternDb;
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("reply is not valid goal text ({error}); raw reply: {reply:?}")]
    NonConforming { reply: String, error: GoalError },
    #[error("fixture: {0}")]
    Fixture(String),
}

/// Chat-style completion endpoint.
pub trait CompletionClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

const SYSTEM_PROMPT: &str = "\
You convert tabletop rearrangement requests into goal statements.
Answer with goal statements only, no prose and no code fences.
Grammar: clause (\";\" clause)*, where clause is PATTERN(o<ID>,o<ID>,...) \
or, for spatial relations, PATTERN(o<ID>,...|o<ANCHOR>).
Patterns: line, circle, rectangle, tower (objects listed bottom first), \
and the spatial relations left, right, front, behind, left_front, \
left_behind, right_front, right_behind, each relative to the anchor.
Use only object ids from the object list.
Example: \"put the fork left of the plate and the cups in a row\" with \
fork o4, plate o1, cups o2 o3 gives: left(o4|o1); line(o2,o3)";

/// Per-object description lines, `o<ID>: <name> (<color>)`.
pub fn describe_objects(scene: &Scene) -> String {
    scene
        .objects()
        .iter()
        .map(|o| format!("{}: {} ({})", o.id, o.name, o.color))
        .collect::<Vec<_>>()
        .join("\n")
}

/// System rules, then the object description and the user query.
pub fn build_prompt(user_text: &str, scene: &Scene) -> Vec<ChatMessage> {
    vec![
        ChatMessage::new("system", SYSTEM_PROMPT),
        ChatMessage::new(
            "user",
            format!(
                "Objects:\n{}\n\nRequest: {}",
                describe_objects(scene),
                user_text.trim()
            ),
        ),
    ]
}

fn strip_reply(reply: &str) -> &str {
    let t = reply.trim();
    let t = t.strip_prefix("```").map_or(t, |s| {
        s.trim_start_matches(|c: char| c.is_ascii_alphabetic())
            .trim_end_matches("```")
    });
    t.trim()
}

pub fn llm_parse(
    user_text: &str,
    scene: &Scene,
    db: &PatternDb,
    client: &mut dyn CompletionClient,
) -> Result<GoalSpec, LlmError> {
    let mut messages = build_prompt(user_text, scene);
    let reply = client.complete(&messages)?;
    let error = match parse_dsl_for_scene(strip_reply(&reply), db, scene) {
        Ok(goal) => return Ok(goal),
        Err(e) => e,
    };
    messages.push(ChatMessage::new("assistant", reply.clone()));
    messages.push(ChatMessage::new(
        "user",
        format!("That reply could not be parsed: {error}. Answer again using only the grammar."),
    ));
    let retry = client.complete(&messages)?;
    parse_dsl_for_scene(strip_reply(&retry), db, scene).map_err(|error| LlmError::NonConforming {
        reply: retry,
        error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: Vec<ChatMessage>,
    pub response: String,
}

/// Recorded request/response pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub exchanges: Vec<Exchange>,
}

impl Fixture {
    pub fn load(path: &Path) -> Result<Fixture, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Fixture(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| LlmError::Fixture(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        let text = serde_json::to_string_pretty(self).expect("fixture serializes");
        std::fs::write(path, text + "\n")
            .map_err(|e| LlmError::Fixture(format!("{}: {e}", path.display())))
    }
}

/// Serves a fixture's responses in order, checking each request matches.
#[derive(Debug)]
pub struct ReplayClient {
    fixture: Fixture,
    next: usize,
}

impl ReplayClient {
    pub fn new(fixture: Fixture) -> ReplayClient {
        ReplayClient { fixture, next: 0 }
    }
}

impl CompletionClient for ReplayClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let ex = self
            .fixture
            .exchanges
            .get(self.next)
            .ok_or_else(|| LlmError::Transport("fixture has no more responses".into()))?;
        if ex.request != messages {
            return Err(LlmError::Fixture(format!(
                "request {} differs from the recorded one",
                self.next
            )));
        }
        self.next += 1;
        Ok(ex.response.clone())
    }
}

/// Passes calls through to `inner` and keeps every exchange.
pub struct RecordingClient<C> {
    inner: C,
    pub fixture: Fixture,
}

impl<C: CompletionClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        RecordingClient {
            inner,
            fixture: Fixture::default(),
        }
    }
}

impl<C: CompletionClient> CompletionClient for RecordingClient<C> {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let response = self.inner.complete(messages)?;
        self.fixture.exchanges.push(Exchange {
            request: messages.to_vec(),
            response: response.clone(),
        });
        Ok(response)
    }
}
