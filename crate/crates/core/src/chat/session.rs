use std::collections::VecDeque;

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{DishId, Phase, SessionId, UserId};

pub const DEFAULT_CONTEXT_WINDOW: usize = 10;

/// Reviewer label for a logged turn. `Fallback` is set automatically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Appropriate,
    ModeratelyAppropriate,
    WrongIntent,
    Fallback,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::Appropriate,
        Outcome::ModeratelyAppropriate,
        Outcome::WrongIntent,
        Outcome::Fallback,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Appropriate => "appropriate",
            Outcome::ModeratelyAppropriate => "moderately_appropriate",
            Outcome::WrongIntent => "wrong_intent",
            Outcome::Fallback => "fallback",
        }
    }
}

/// One logged inquiry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub at: DateTime<Utc>,
    pub session_id: SessionId,
    pub user_id: UserId,
    pub dish_id: DishId,
    pub user_text: String,
    pub matched_intent: String,
    pub confidence: f64,
    pub response_text: String,
    pub responded: bool,
    #[serde(default)]
    pub outcome: Option<Outcome>,
    #[serde(default)]
    pub annotated_intent: Option<String>,
    pub phase: Phase,
}

impl ChatTurn {
    /// Record-level invariants: fallback matches carry the fallback
    /// outcome, unanswered turns carry no response text.
    pub fn check(&self, fallback_intent: &str) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0, 1]", self.confidence));
        }
        if self.matched_intent == fallback_intent && self.outcome != Some(Outcome::Fallback) {
            return Err("fallback match without fallback outcome".into());
        }
        if !self.responded && !self.response_text.is_empty() {
            return Err("unanswered turn with response text".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSession {
    pub id: SessionId,
    pub user_id: UserId,
    pub dish_id: DishId,
    pub phase: Phase,
    pub started_at: DateTime<Utc>,
    /// Seeds the per-turn rng so conversations replay identically.
    pub seed: u64,
    #[serde(default)]
    pub turns: u64,
    #[serde(default)]
    pub context: VecDeque<ChatTurn>,
}

impl ChatSession {
    pub fn new(id: SessionId, user_id: UserId, dish_id: DishId, started_at: DateTime<Utc>, seed: u64) -> Self {
        Self {
            id,
            user_id,
            dish_id,
            phase: Phase::default(),
            started_at,
            seed,
            turns: 0,
            context: VecDeque::new(),
        }
    }

    pub fn set_phase(&mut self, phase: Phase) -> Result<()> {
        if phase < self.phase {
            return Err(CoreError::PhaseRegression {
                from: self.phase.to_string(),
                to: phase.to_string(),
            });
        }
        self.phase = phase;
        Ok(())
    }

    /// Deterministic rng for the next turn.
    pub fn turn_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.turns);
        rng
    }

    /// Appends an answered turn, keeping the last `window` turns as context.
    pub fn remember(&mut self, turn: ChatTurn, window: usize) {
        self.turns += 1;
        self.context.push_back(turn);
        while self.context.len() > window {
            self.context.pop_front();
        }
    }
}
