use std::hint::black_box;

use chrono::{DateTime, Duration, Utc};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ipoi_core::analytics::{kpi_report, InquiryLog, TurnSink, Window};
use ipoi_core::chat::{ChatTurn, IntentSet, Outcome};
use ipoi_core::geofence::{replay_walks, GeofenceConfig, LocationUpdate, Walk};
use ipoi_core::recommender::{explore_feed, Query};
use ipoi_core::{
    AvatarGender, Catalog, DietClass, Dish, Exec, FenceOwner, GeoPoint, Geofence, Interval, OpeningHours, Phase,
    Restaurant, SeasonalEffect, UserProfile,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CENTER: GeoPoint = GeoPoint::new(52.52, 13.405);

fn start() -> DateTime<Utc> {
    DateTime::from_timestamp(1_717_416_000, 0).unwrap()
}

fn near(rng: &mut ChaCha8Rng) -> GeoPoint {
    GeoPoint::new(CENTER.lat + rng.gen_range(-0.02..0.02), CENTER.lon + rng.gen_range(-0.03..0.03))
}

fn catalog(rng: &mut ChaCha8Rng, restaurants: usize, dishes: usize) -> Catalog {
    let rs = (0..restaurants)
        .map(|i| {
            let id = format!("r{i}");
            let location = near(rng);
            Restaurant {
                id: id.as_str().into(),
                name: id.clone(),
                chain_id: None,
                location,
                hours: OpeningHours::daily(&[Interval::new(600, 1380)]),
                utc_offset_minutes: 120,
                default_fence: Geofence {
                    id: format!("{id}-fence").into(),
                    owner: FenceOwner::Restaurant(id.as_str().into()),
                    center: location,
                    radius_m: 150.0,
                    enabled: true,
                },
                enabled: true,
            }
        })
        .collect();
    let ds = (0..dishes)
        .map(|i| Dish {
            id: format!("d{i}").into(),
            restaurant_id: format!("r{}", rng.gen_range(0..restaurants)).into(),
            name: format!("Dish {i}"),
            nickname: None,
            image_ref: String::new(),
            ingredients: vec!["rice".into()],
            description: String::new(),
            price_minor: rng.gen_range(300..3000),
            avatar_gender: AvatarGender::Unspecified,
            allergens: Default::default(),
            cuisine: String::new(),
            local: false,
            organic: false,
            diet_class: DietClass::Vegan,
            seasonal_effect: SeasonalEffect::None,
            dedicated_fence: None,
            active: true,
            created_at: start(),
            avatar: None,
        })
        .collect();
    Catalog::new(rs, ds)
}

fn walks(rng: &mut ChaCha8Rng, n: usize, steps: usize) -> Vec<Walk> {
    (0..n)
        .map(|w| {
            let user = format!("u{w}");
            let trace = (0..steps)
                .map(|s| LocationUpdate {
                    user_id: user.as_str().into(),
                    point: near(rng),
                    at: start() + Duration::minutes(s as i64 * 5),
                })
                .collect();
            Walk {
                profile: UserProfile::permissive(user.as_str().into()),
                trace,
            }
        })
        .collect()
}

fn corpus(rng: &mut ChaCha8Rng, n: usize) -> InquiryLog {
    let intents = IntentSet::shipped();
    let names: Vec<String> = intents.iter().map(|i| i.name.clone()).collect();
    let mut log = InquiryLog::default();
    for i in 0..n {
        let matched = names.choose(rng).unwrap().clone();
        let fallback = matched == intents.fallback().name;
        log.record_turn(ChatTurn {
            at: start() + Duration::minutes(i as i64),
            session_id: format!("s{}", i % 500).into(),
            user_id: format!("u{}", i % 200).into(),
            dish_id: format!("d{}", rng.gen_range(0..100)).into(),
            user_text: "hello".into(),
            matched_intent: matched.into(),
            confidence: 0.7,
            response_text: "hi".into(),
            responded: true,
            outcome: if fallback { Some(Outcome::Fallback) } else { Some(Outcome::Appropriate) },
            annotated_intent: None,
            phase: *Phase::ALL.choose(rng).unwrap(),
        });
    }
    log
}

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench_walks(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cat = catalog(&mut rng, 100, 500);
    let ws = walks(&mut rng, 128, 40);
    let cfg = GeofenceConfig::default();
    let mut g = c.benchmark_group("replay_walks");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| replay_walks(black_box(&ws), &cat, &cfg, exec))
        });
    }
    g.finish();
}

fn bench_explore(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cat = catalog(&mut rng, 500, 20_000);
    let profile = UserProfile::permissive("u".into());
    let q = Query {
        location: CENTER,
        at: start(),
        radius_m: 2000.0,
    };
    let mut g = c.benchmark_group("explore_feed");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| explore_feed(black_box(&cat), Some(&profile), &q, exec))
        });
    }
    g.finish();
}

fn bench_kpis(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let log = corpus(&mut rng, 200_000);
    let cat = Catalog::default();
    let intents = IntentSet::shipped();
    let window = Window::all();
    let mut g = c.benchmark_group("kpi_report");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| kpi_report(black_box(&log), &cat, &[], &intents, window, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_walks, bench_explore, bench_kpis
}
criterion_main!(benches);
