//! Dish personas: intent matching, response rendering and session context.

mod intents;
mod normalize;
mod render;
mod session;

pub use intents::{Category, Intent, IntentMatch, IntentSet, DEFAULT_THRESHOLD, FALLBACK_SUGGESTIONS};
pub use normalize::{jaccard, normalize, token_set};
pub use render::{
    check_template, format_price, natural_list, render, FoodDay, FoodDayCalendar, RenderContext,
    PLACEHOLDERS,
};
pub use session::{ChatSession, ChatTurn, Outcome, DEFAULT_CONTEXT_WINDOW};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::analytics::TurnSink;
use crate::catalog::Catalog;
use crate::error::{CoreError, Result};
use crate::model::{AvatarGender, Dish, Restaurant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Voice {
    VoiceMale,
    VoiceFemale,
}

/// Male and female dishes speak with the matching voice; unspecified
/// dishes get one at random.
pub fn voice_for<R: Rng + ?Sized>(dish: &Dish, rng: &mut R) -> Voice {
    match dish.avatar_gender {
        AvatarGender::Male => Voice::VoiceMale,
        AvatarGender::Female => Voice::VoiceFemale,
        AvatarGender::Unspecified => {
            if rng.gen_bool(0.5) {
                Voice::VoiceMale
            } else {
                Voice::VoiceFemale
            }
        }
    }
}

/// Voice for a session, stable across requests and restarts.
pub fn session_voice(session: &ChatSession, dish: &Dish) -> Voice {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(session.seed);
    rng.set_stream(u64::MAX);
    voice_for(dish, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChatConfig {
    pub threshold: f64,
    pub context_window: usize,
}

impl Default for ChatConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            context_window: DEFAULT_CONTEXT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub turn: ChatTurn,
    /// Suggested intent names, only for fallback responses.
    pub suggestions: Vec<String>,
    /// Position of the turn in the inquiry log.
    pub position: u64,
}

#[derive(Debug, Clone)]
pub struct ChatEngine {
    pub intents: IntentSet,
    pub calendar: FoodDayCalendar,
    pub config: ChatConfig,
}

impl ChatEngine {
    pub fn new(intents: IntentSet, calendar: FoodDayCalendar, config: ChatConfig) -> Self {
        Self {
            intents,
            calendar,
            config,
        }
    }

    pub fn shipped() -> Self {
        Self::new(IntentSet::shipped(), FoodDayCalendar::shipped(), ChatConfig::default())
    }

    pub fn match_intent(&self, text: &str) -> IntentMatch {
        self.intents.match_intent(text, self.config.threshold)
    }

    pub fn render_response<R: Rng + ?Sized>(
        &self,
        intent: &Intent,
        dish: &Dish,
        restaurant: &Restaurant,
        at: DateTime<Utc>,
        suggestions: &[String],
        rng: &mut R,
    ) -> Result<String> {
        let template = intent
            .response_templates
            .choose(rng)
            .ok_or_else(|| CoreError::BadTemplate {
                intent: intent.name.clone(),
                detail: "no response templates".into(),
            })?;
        let ctx = RenderContext {
            dish,
            restaurant,
            at,
            calendar: &self.calendar,
            suggestions,
        };
        render(template, &ctx).map_err(|detail| CoreError::BadTemplate {
            intent: intent.name.clone(),
            detail,
        })
    }

    /// Fallback text plus the three suggested intent names it offers.
    pub fn fallback_response<R: Rng + ?Sized>(
        &self,
        dish: &Dish,
        restaurant: &Restaurant,
        at: DateTime<Utc>,
        rng: &mut R,
    ) -> Result<(String, Vec<String>)> {
        let picked = self.intents.pick_suggestions(rng);
        let names: Vec<String> = picked.iter().map(|i| i.name.clone()).collect();
        let prompts: Vec<String> = picked
            .iter()
            .map(|i| i.training_phrases[0].clone())
            .collect();
        let text = self.render_response(self.intents.fallback(), dish, restaurant, at, &prompts, rng)?;
        Ok((text, names))
    }

    /// Answers one inquiry in `session`, appends it to the session context
    /// and emits exactly one record to `log`.
    pub fn handle_turn<R: Rng + ?Sized>(
        &self,
        session: &mut ChatSession,
        catalog: &Catalog,
        user_text: &str,
        at: DateTime<Utc>,
        rng: &mut R,
        log: &mut dyn TurnSink,
    ) -> Result<ChatReply> {
        if user_text.trim().is_empty() {
            return Err(CoreError::EmptyInquiry);
        }
        let dish = catalog.dishes.get(&session.dish_id).ok_or_else(|| {
            CoreError::CorruptCatalog(format!("session {} has no dish {}", session.id, session.dish_id))
        })?;
        let restaurant = catalog.restaurant_of(dish)?;

        let previous = session.context.back().map(|t| t.user_text.as_str());
        let m = self
            .intents
            .match_in_context(user_text, previous, self.config.threshold);
        let fallback = m.intent == self.intents.fallback().name;
        let (response_text, suggestions) = if fallback {
            self.fallback_response(dish, restaurant, at, rng)?
        } else {
            let intent = self.intents.get(&m.intent).expect("matched intent exists");
            (self.render_response(intent, dish, restaurant, at, &[], rng)?, Vec::new())
        };

        let turn = ChatTurn {
            at,
            session_id: session.id.clone(),
            user_id: session.user_id.clone(),
            dish_id: session.dish_id.clone(),
            user_text: user_text.to_owned(),
            matched_intent: m.intent,
            confidence: m.confidence,
            response_text,
            responded: true,
            outcome: fallback.then_some(Outcome::Fallback),
            annotated_intent: None,
            phase: session.phase,
        };
        session.remember(turn.clone(), self.config.context_window);
        let position = log.record_turn(turn.clone());
        Ok(ChatReply {
            turn,
            suggestions,
            position,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::InquiryLog;
    use crate::model::fixtures::{burger, restaurant};
    use crate::model::Phase;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ChatEngine, Catalog, ChatSession) {
        let catalog = Catalog::new(vec![restaurant("r1", 50.0, 8.0)], vec![burger("d1", "r1")]);
        let session = ChatSession::new(
            "s1".into(),
            "u1".into(),
            "d1".into(),
            DateTime::from_timestamp(1_717_416_000, 0).unwrap(),
            42,
        );
        (ChatEngine::shipped(), catalog, session)
    }

    fn say(
        engine: &ChatEngine,
        catalog: &Catalog,
        session: &mut ChatSession,
        log: &mut InquiryLog,
        text: &str,
    ) -> Result<ChatReply> {
        let mut rng = session.turn_rng();
        let at = session.started_at + chrono::Duration::seconds(session.turns as i64 * 30);
        engine.handle_turn(session, catalog, text, at, &mut rng, log)
    }

    #[test]
    fn welcome_and_fallback_paths() {
        let (engine, catalog, mut session) = setup();
        let mut log = InquiryLog::default();
        let r = say(&engine, &catalog, &mut session, &mut log, "hello").unwrap();
        assert_eq!(r.turn.matched_intent, "welcome");
        assert!(r.turn.responded);
        assert_eq!(r.turn.outcome, None);
        assert!(r.suggestions.is_empty());

        let r = say(&engine, &catalog, &mut session, &mut log, "xyzzy plugh").unwrap();
        assert_eq!(r.turn.matched_intent, "fallback");
        assert_eq!(r.turn.outcome, Some(Outcome::Fallback));
        assert_eq!(r.suggestions.len(), 3);
        assert_eq!(log.len(), 2);
        assert_eq!(r.position, 1);
    }

    #[test]
    fn ingredients_response_lists_ingredients() {
        let (engine, catalog, mut session) = setup();
        let mut log = InquiryLog::default();
        let r = say(&engine, &catalog, &mut session, &mut log, "ingredients").unwrap();
        assert!(r.turn.response_text.contains(
            "French fries, beyond meat, sauteed onions, lettuce, tomatoes, pickled gherkins, ketchup and mustard"
        ));
        let r = say(&engine, &catalog, &mut session, &mut log, "I don't like mustard").unwrap();
        assert_eq!(r.turn.matched_intent, "allergens");
        assert!(r.turn.response_text.contains("I contain gluten and mustard"));
    }

    #[test]
    fn follow_up_uses_context() {
        let (engine, catalog, mut session) = setup();
        let mut log = InquiryLog::default();
        let r = say(&engine, &catalog, &mut session, &mut log, "what do you contain").unwrap();
        assert_eq!((r.turn.matched_intent.as_str(), r.turn.confidence), ("ingredients", 1.0));
        let r = say(&engine, &catalog, &mut session, &mut log, "and gluten?").unwrap();
        // {what,do,you,contain,and,gluten} vs {do,you,contain,gluten}
        assert_eq!(r.turn.matched_intent, "allergens");
        assert!((r.turn.confidence - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(r.turn.dish_id.as_str(), "d1");

        // without context the follow-up alone falls back
        let (_, _, mut fresh) = setup();
        let r = say(&engine, &catalog, &mut fresh, &mut log, "and gluten?").unwrap();
        assert_eq!(r.turn.matched_intent, "fallback");
    }

    #[test]
    fn context_is_bounded() {
        let (engine, catalog, mut session) = setup();
        let mut log = InquiryLog::default();
        for _ in 0..25 {
            say(&engine, &catalog, &mut session, &mut log, "hi").unwrap();
            assert!(session.context.len() <= DEFAULT_CONTEXT_WINDOW);
        }
        assert_eq!(session.context.len(), DEFAULT_CONTEXT_WINDOW);
        assert_eq!(log.len(), 25);
    }

    #[test]
    fn turns_carry_session_phase() {
        let (engine, catalog, mut session) = setup();
        let mut log = InquiryLog::default();
        session.set_phase(Phase::WhileDining).unwrap();
        let r = say(&engine, &catalog, &mut session, &mut log, "hello").unwrap();
        assert_eq!(r.turn.phase, Phase::WhileDining);
    }

    #[test]
    fn empty_inquiry_is_rejected_without_logging() {
        let (engine, catalog, mut session) = setup();
        let mut log = InquiryLog::default();
        assert_eq!(
            say(&engine, &catalog, &mut session, &mut log, "  ").unwrap_err(),
            CoreError::EmptyInquiry
        );
        assert_eq!(log.len(), 0);
        assert_eq!(session.turns, 0);
    }

    #[test]
    fn seeded_turns_are_deterministic() {
        let run = || {
            let (engine, catalog, mut session) = setup();
            let mut log = InquiryLog::default();
            ["hello", "blorp", "joke", "zzz"]
                .iter()
                .map(|t| serde_json::to_string(&say(&engine, &catalog, &mut session, &mut log, t).unwrap()).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn voices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = burger("d", "r");
        assert_eq!(voice_for(&d, &mut rng), Voice::VoiceMale);
        d.avatar_gender = AvatarGender::Female;
        assert_eq!(voice_for(&d, &mut rng), Voice::VoiceFemale);
        d.avatar_gender = AvatarGender::Unspecified;
        let a = voice_for(&d, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, voice_for(&d, &mut ChaCha8Rng::seed_from_u64(9)));
    }
}
