#![allow(dead_code)]

use chrono::{DateTime, Duration, Utc};
use ipoi_core::{
    AvatarGender, Catalog, ChainId, Diet, DietClass, Dish, FenceOwner, GeoPoint, Geofence, Interval, OpeningHours,
    Restaurant, SeasonalEffect, UserProfile,
};
use proptest::prelude::*;

pub const ALLERGENS: [&str; 5] = ["gluten", "milk", "eggs", "mustard", "nuts"];

/// Monday 2024-06-03 00:00 UTC.
pub fn monday() -> DateTime<Utc> {
    DateTime::from_timestamp(1_717_372_800, 0).unwrap()
}

pub fn restaurant(id: &str, location: GeoPoint) -> Restaurant {
    Restaurant {
        id: id.into(),
        name: format!("Restaurant {id}"),
        chain_id: None,
        location,
        hours: OpeningHours::daily(&[Interval::new(0, 1440)]),
        utc_offset_minutes: 0,
        default_fence: Geofence {
            id: format!("{id}-fence").into(),
            owner: FenceOwner::Restaurant(id.into()),
            center: location,
            radius_m: 150.0,
            enabled: true,
        },
        enabled: true,
    }
}

pub fn dish(id: &str, restaurant: &str) -> Dish {
    Dish {
        id: id.into(),
        restaurant_id: restaurant.into(),
        name: format!("Dish {id}"),
        nickname: None,
        image_ref: String::new(),
        ingredients: vec!["rice".into()],
        description: String::new(),
        price_minor: 1000,
        avatar_gender: AvatarGender::Unspecified,
        allergens: Default::default(),
        cuisine: String::new(),
        local: false,
        organic: false,
        diet_class: DietClass::Vegan,
        seasonal_effect: SeasonalEffect::None,
        dedicated_fence: None,
        active: true,
        created_at: monday(),
        avatar: None,
    }
}

pub fn point() -> impl Strategy<Value = GeoPoint> {
    (52.48..52.56f64, 13.35..13.45f64).prop_map(|(lat, lon)| GeoPoint::new(lat, lon))
}

fn diet_class() -> impl Strategy<Value = DietClass> {
    prop_oneof![Just(DietClass::Vegan), Just(DietClass::Vegetarian), Just(DietClass::Meat)]
}

fn allergens() -> impl Strategy<Value = Vec<&'static str>> {
    proptest::sample::subsequence(ALLERGENS.to_vec(), 0..=3)
}

/// A catalog of up to 6 restaurants and 30 dishes around central Berlin.
pub fn catalog() -> impl Strategy<Value = Catalog> {
    let restaurants = proptest::collection::vec((point(), proptest::option::of(0..3u8), any::<bool>(), 0..24u16), 1..6);
    restaurants.prop_flat_map(|rs| {
        let n = rs.len();
        let dishes = proptest::collection::vec(
            (0..n, 1..40i64, diet_class(), allergens(), 0..5i64, any::<bool>()),
            0..30,
        );
        (Just(rs), dishes).prop_map(|(rs, ds)| {
            let restaurants = rs
                .into_iter()
                .enumerate()
                .map(|(i, (p, chain, late, open_h))| {
                    let mut r = restaurant(&format!("r{i}"), p);
                    r.chain_id = chain.map(|c| ChainId::new(format!("c{c}")));
                    if late {
                        r.hours = OpeningHours::daily(&[Interval::new(open_h * 60, 120)]);
                    }
                    r
                })
                .collect();
            let dishes = ds
                .into_iter()
                .enumerate()
                .map(|(i, (r, price, diet, allergens, age, active))| {
                    let mut d = dish(&format!("d{i:02}"), &format!("r{r}"));
                    d.price_minor = price * 100;
                    d.diet_class = diet;
                    d.allergens = allergens.into_iter().map(String::from).collect();
                    d.created_at = monday() + Duration::days(age);
                    d.active = active || i % 3 != 0;
                    d
                })
                .collect();
            Catalog::new(restaurants, dishes)
        })
    })
}

pub fn profile() -> impl Strategy<Value = UserProfile> {
    (
        prop_oneof![Just(Diet::Omnivore), Just(Diet::Vegetarian), Just(Diet::Vegan)],
        allergens(),
        proptest::option::of(1..40i64),
        proptest::option::of(0..6u8),
        proptest::option::of(0..3u8),
    )
        .prop_map(|(diet, allergens, budget, bl_r, bl_c)| {
            let mut p = UserProfile::permissive("guest".into());
            p.diet = diet;
            p.allergen_exclusions = allergens.into_iter().map(String::from).collect();
            p.budget_limit_minor = budget.map(|b| b * 100);
            if let Some(r) = bl_r {
                p.blacklist_restaurants.insert(format!("r{r}").into());
            }
            if let Some(c) = bl_c {
                p.blacklist_chains.insert(ChainId::new(format!("c{c}")));
            }
            p
        })
}

pub fn instant() -> impl Strategy<Value = DateTime<Utc>> {
    (0..7 * 1440i64).prop_map(|m| monday() + Duration::minutes(m))
}
