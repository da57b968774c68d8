//! Frequency checks for the random parts of the chat engine.

mod common;

use std::collections::BTreeMap;

use ipoi_core::chat::{voice_for, ChatEngine, IntentSet, Voice};
use ipoi_core::AvatarGender;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 10_000;

#[test]
fn unspecified_avatars_pick_voices_evenly() {
    let mut dish = common::dish("d", "r");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let male = (0..DRAWS)
        .filter(|_| voice_for(&dish, &mut rng) == Voice::VoiceMale)
        .count();
    let share = male as f64 / DRAWS as f64;
    assert!((share - 0.5).abs() <= 0.03, "male share {share}");

    dish.avatar_gender = AvatarGender::Female;
    assert!((0..100).all(|_| voice_for(&dish, &mut rng) == Voice::VoiceFemale));
    dish.avatar_gender = AvatarGender::Male;
    assert!((0..100).all(|_| voice_for(&dish, &mut rng) == Voice::VoiceMale));
}

#[test]
fn suggestions_cover_intents_uniformly() {
    let intents = IntentSet::shipped();
    let pool = intents.suggestible().count();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..DRAWS {
        let picked = intents.pick_suggestions(&mut rng);
        assert_eq!(picked.len(), 3);
        for i in picked {
            *seen.entry(i.name.clone()).or_default() += 1;
        }
    }
    assert_eq!(seen.len(), pool);
    let expected = 3.0 / pool as f64;
    for (name, n) in seen {
        let share = n as f64 / DRAWS as f64;
        assert!((share - expected).abs() <= 0.05 * expected.max(0.1) + 0.01, "{name}: {share} vs {expected}");
    }
}

#[test]
fn fallback_text_mentions_each_suggestion() {
    let engine = ChatEngine::shipped();
    let intents = IntentSet::shipped();
    let d = common::dish("d", "r");
    let r = common::restaurant("r", ipoi_core::GeoPoint::new(52.5, 13.4));
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (text, names) = engine.fallback_response(&d, &r, common::monday(), &mut rng).unwrap();
        for n in names {
            assert!(text.contains(&intents.get(&n).unwrap().training_phrases[0]), "{text}");
        }
    }
}
