use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::normalize::{jaccard, token_set};
use super::render::check_template;
use crate::error::{CoreError, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const FALLBACK_SUGGESTIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Entertainment,
    InformationAdvice,
    Control,
    Fallback,
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Entertainment => "entertainment",
            Category::InformationAdvice => "information_advice",
            Category::Control => "control",
            Category::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub name: String,
    pub category: Category,
    #[serde(default)]
    pub training_phrases: Vec<String>,
    pub response_templates: Vec<String>,
    #[serde(default)]
    pub suggestible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentMatch {
    pub intent: String,
    pub confidence: f64,
}

#[derive(Debug, Clone)]
struct Compiled {
    intent: Intent,
    phrases: Vec<BTreeSet<String>>,
}

/// A validated intent catalog, ordered by name.
#[derive(Debug, Clone)]
pub struct IntentSet {
    intents: Vec<Compiled>,
    fallback: usize,
}

const SHIPPED_INTENTS: &str = include_str!("../../data/intents.json");

impl IntentSet {
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_INTENTS).expect("shipped intents are valid")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let intents: Vec<Intent> =
            serde_json::from_str(json).map_err(|e| CoreError::InvalidIntents(e.to_string()))?;
        Self::new(intents)
    }

    pub fn new(mut intents: Vec<Intent>) -> Result<Self> {
        intents.sort_by(|a, b| a.name.cmp(&b.name));
        if let Some(w) = intents.windows(2).find(|w| w[0].name == w[1].name) {
            return Err(CoreError::InvalidIntents(format!("duplicate intent '{}'", w[0].name)));
        }
        let fallbacks: Vec<usize> = intents
            .iter()
            .enumerate()
            .filter(|(_, i)| i.category == Category::Fallback)
            .map(|(n, _)| n)
            .collect();
        let [fallback] = fallbacks[..] else {
            return Err(CoreError::InvalidIntents(format!(
                "expected exactly one fallback intent, found {}",
                fallbacks.len()
            )));
        };
        if intents[fallback].suggestible {
            return Err(CoreError::InvalidIntents("fallback cannot be suggestible".into()));
        }

        let mut seen: BTreeMap<BTreeSet<String>, &str> = BTreeMap::new();
        let mut compiled = Vec::with_capacity(intents.len());
        for intent in &intents {
            if intent.name.trim().is_empty() {
                return Err(CoreError::InvalidIntents("empty intent name".into()));
            }
            if intent.response_templates.is_empty() {
                return Err(CoreError::BadTemplate {
                    intent: intent.name.clone(),
                    detail: "no response templates".into(),
                });
            }
            let is_fallback = intent.category == Category::Fallback;
            for t in &intent.response_templates {
                check_template(t, is_fallback).map_err(|detail| CoreError::BadTemplate {
                    intent: intent.name.clone(),
                    detail,
                })?;
            }
            if !is_fallback && intent.training_phrases.is_empty() {
                return Err(CoreError::InvalidIntents(format!(
                    "intent '{}' has no training phrases",
                    intent.name
                )));
            }
            let mut phrases = Vec::new();
            for phrase in &intent.training_phrases {
                let tokens = token_set(phrase);
                if tokens.is_empty() {
                    return Err(CoreError::InvalidIntents(format!(
                        "intent '{}' has a phrase with no tokens",
                        intent.name
                    )));
                }
                match seen.get(&tokens) {
                    Some(owner) if *owner != intent.name => {
                        return Err(CoreError::InvalidIntents(format!(
                            "phrase '{phrase}' of '{}' collides with '{owner}'",
                            intent.name
                        )));
                    }
                    _ => {
                        seen.insert(tokens.clone(), &intent.name);
                    }
                }
                phrases.push(tokens);
            }
            compiled.push(Compiled {
                intent: intent.clone(),
                phrases,
            });
        }

        let set = Self {
            intents: compiled,
            fallback,
        };
        let suggestible = set.suggestible().count();
        if suggestible < FALLBACK_SUGGESTIONS {
            return Err(CoreError::InsufficientSuggestions(suggestible));
        }
        Ok(set)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Intent> {
        self.intents.iter().map(|c| &c.intent)
    }

    pub fn get(&self, name: &str) -> Option<&Intent> {
        self.intents
            .binary_search_by(|c| c.intent.name.as_str().cmp(name))
            .ok()
            .map(|i| &self.intents[i].intent)
    }

    pub fn fallback(&self) -> &Intent {
        &self.intents[self.fallback].intent
    }

    pub fn category_of(&self, name: &str) -> Option<Category> {
        self.get(name).map(|i| i.category)
    }

    pub fn suggestible(&self) -> impl Iterator<Item = &Intent> {
        self.iter().filter(|i| i.suggestible)
    }

    /// Best Jaccard score over every phrase of every non-fallback intent.
    /// Ties go to the lexicographically smallest intent name.
    fn best(&self, query: &BTreeSet<String>, anchor: Option<&BTreeSet<String>>) -> (usize, f64) {
        let mut best = (self.fallback, 0.0);
        for (i, c) in self.intents.iter().enumerate() {
            if i == self.fallback {
                continue;
            }
            for phrase in &c.phrases {
                if anchor.is_some_and(|a| a.is_disjoint(phrase)) {
                    continue;
                }
                let score = jaccard(query, phrase);
                if score > best.1 {
                    best = (i, score);
                }
            }
        }
        best
    }

    pub fn match_intent(&self, text: &str, threshold: f64) -> IntentMatch {
        let (i, confidence) = self.best(&token_set(text), None);
        self.resolve(i, confidence, threshold)
    }

    /// Like [`match_intent`](Self::match_intent), but when the text alone
    /// stays below the threshold, retries with the previous user utterance
    /// merged in. Only phrases sharing a token with the new text qualify, so
    /// a follow-up like "and gluten?" resolves by what it adds.
    pub fn match_in_context(&self, text: &str, previous: Option<&str>, threshold: f64) -> IntentMatch {
        let tokens = token_set(text);
        let (i, confidence) = self.best(&tokens, None);
        if confidence >= threshold {
            return self.resolve(i, confidence, threshold);
        }
        if let Some(prev) = previous {
            let mut merged = token_set(prev);
            merged.extend(tokens.iter().cloned());
            let (j, c) = self.best(&merged, Some(&tokens));
            if c >= threshold {
                return self.resolve(j, c, threshold);
            }
        }
        self.resolve(i, confidence, threshold)
    }

    fn resolve(&self, index: usize, confidence: f64, threshold: f64) -> IntentMatch {
        let index = if confidence >= threshold { index } else { self.fallback };
        IntentMatch {
            intent: self.intents[index].intent.name.clone(),
            confidence,
        }
    }

    /// Three distinct suggestible intents drawn uniformly without replacement.
    pub fn pick_suggestions<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<&Intent> {
        let pool: Vec<&Intent> = self.suggestible().collect();
        pool.choose_multiple(rng, FALLBACK_SUGGESTIONS).copied().collect()
    }
}
