//! Explore feed and exploit top-3, both driven by one eligibility predicate.

use std::cmp::Ordering;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::exec::Exec;
use crate::geo::{haversine_m, GeoPoint};
use crate::hours::LocalTime;
use crate::model::{diet_accepts, Dish, DishId, Restaurant, RestaurantId, SeasonalEffect, UserProfile};

pub const DEFAULT_RADIUS_M: f64 = 2000.0;
pub const EXPLOIT_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    pub location: GeoPoint,
    pub at: DateTime<Utc>,
    pub radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDish {
    pub dish_id: DishId,
    pub restaurant_id: RestaurantId,
    pub distance_m: f64,
    pub price_minor: i64,
    pub seasonal_effect: SeasonalEffect,
    pub eligible: bool,
}

/// Every gate except distance: availability, opening hours, allergens, diet,
/// budget and blacklists. Shared with the geofence notifier.
pub fn admits(dish: &Dish, restaurant: &Restaurant, profile: &UserProfile, at: DateTime<Utc>) -> bool {
    dish.active
        && restaurant.enabled
        && restaurant
            .hours
            .is_open(LocalTime::from_utc(at, restaurant.utc_offset_minutes))
        && dish.allergens.is_disjoint(&profile.allergen_exclusions)
        && diet_accepts(profile.diet, dish.diet_class)
        && profile
            .budget_limit_minor
            .is_none_or(|budget| dish.price_minor <= budget)
        && !profile.blacklist_restaurants.contains(&restaurant.id)
        && restaurant
            .chain_id
            .as_ref()
            .is_none_or(|chain| !profile.blacklist_chains.contains(chain))
}

pub fn eligible(
    dish: &Dish,
    restaurant: &Restaurant,
    profile: &UserProfile,
    location: GeoPoint,
    at: DateTime<Utc>,
    radius_m: f64,
) -> bool {
    admits(dish, restaurant, profile, at) && haversine_m(location, restaurant.location) <= radius_m
}

fn candidates<'a>(
    catalog: &'a Catalog,
    profile: &UserProfile,
    query: &Query,
    exec: Exec,
) -> Vec<(RankedDish, &'a Dish)> {
    let dishes: Vec<&Dish> = catalog.dishes.values().filter(|d| d.active).collect();
    exec.map(&dishes, |dish| {
        let restaurant = catalog.restaurants.get(&dish.restaurant_id)?;
        if !restaurant.enabled {
            return None;
        }
        let distance_m = haversine_m(query.location, restaurant.location);
        if distance_m > query.radius_m {
            return None;
        }
        let entry = RankedDish {
            dish_id: dish.id.clone(),
            restaurant_id: restaurant.id.clone(),
            distance_m,
            price_minor: dish.price_minor,
            seasonal_effect: dish.seasonal_effect,
            eligible: admits(dish, restaurant, profile, query.at),
        };
        Some((entry, *dish))
    })
    .into_iter()
    .flatten()
    .collect()
}

/// All active dishes of enabled restaurants within the radius, nearest first.
/// Dishes the profile rules out stay in the feed with `eligible = false`.
pub fn explore_feed(
    catalog: &Catalog,
    profile: Option<&UserProfile>,
    query: &Query,
    exec: Exec,
) -> Vec<RankedDish> {
    let fallback;
    let profile = match profile {
        Some(p) => p,
        None => {
            fallback = UserProfile::permissive("anonymous".into());
            &fallback
        }
    };
    let mut entries = candidates(catalog, profile, query, exec);
    entries.sort_by(|(a, da), (b, db)| {
        a.distance_m
            .total_cmp(&b.distance_m)
            .then_with(|| db.created_at.cmp(&da.created_at))
            .then_with(|| a.dish_id.cmp(&b.dish_id))
    });
    entries.into_iter().map(|(e, _)| e).collect()
}

fn exploit_order(a: &RankedDish, b: &RankedDish) -> Ordering {
    a.distance_m
        .total_cmp(&b.distance_m)
        .then_with(|| a.price_minor.cmp(&b.price_minor))
        .then_with(|| a.dish_id.cmp(&b.dish_id))
}

/// Up to three eligible dishes, nearest first, cheaper first on ties.
pub fn exploit_top3(catalog: &Catalog, profile: &UserProfile, query: &Query, exec: Exec) -> Vec<RankedDish> {
    let mut eligible: Vec<RankedDish> = candidates(catalog, profile, query, exec)
        .into_iter()
        .map(|(e, _)| e)
        .filter(|e| e.eligible)
        .collect();
    eligible.sort_by(exploit_order);
    eligible.truncate(EXPLOIT_COUNT);
    eligible
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hours::OpeningHours;
    use crate::model::fixtures::{burger, restaurant};
    use crate::model::{ChainId, Diet, DietClass};

    fn noon() -> DateTime<Utc> {
        DateTime::parse_from_rfc3339("2024-06-03T12:00:00Z").unwrap().to_utc()
    }

    fn query(lat: f64, lon: f64) -> Query {
        Query {
            location: GeoPoint::new(lat, lon),
            at: noon(),
            radius_m: DEFAULT_RADIUS_M,
        }
    }

    fn profile() -> UserProfile {
        UserProfile::permissive("u1".into())
    }

    #[test]
    fn diet_budget_and_allergen_gates() {
        let r = restaurant("r1", 50.0, 8.0);
        let here = r.location;
        let mut d = burger("d1", "r1");
        d.diet_class = DietClass::Meat;
        let mut p = profile();
        p.diet = Diet::Vegan;
        assert!(!eligible(&d, &r, &p, here, noon(), 2000.0));

        let d = burger("d1", "r1");
        let mut p = profile();
        p.budget_limit_minor = Some(1000);
        assert!(!eligible(&d, &r, &p, here, noon(), 2000.0));
        p.budget_limit_minor = Some(1250);
        assert!(eligible(&d, &r, &p, here, noon(), 2000.0));

        let mut p = profile();
        p.allergen_exclusions.insert("mustard".into());
        assert!(!eligible(&d, &r, &p, here, noon(), 2000.0));
    }

    #[test]
    fn blacklists_and_closed_restaurants() {
        let mut r = restaurant("r1", 50.0, 8.0);
        r.chain_id = Some(ChainId::new("c1"));
        let d = burger("d1", "r1");
        let mut p = profile();
        p.blacklist_chains.insert(ChainId::new("c1"));
        assert!(!eligible(&d, &r, &p, r.location, noon(), 2000.0));
        let mut p = profile();
        p.blacklist_restaurants.insert(r.id.clone());
        assert!(!eligible(&d, &r, &p, r.location, noon(), 2000.0));
        r.hours = OpeningHours::default();
        assert!(!eligible(&d, &r, &profile(), r.location, noon(), 2000.0));
    }

    #[test]
    fn explore_orders_by_distance_and_flags() {
        // ~100 m and ~500 m north of the user
        let near = restaurant("near", 50.0 + 100.0 / 111_195.0, 8.0);
        let mut far = restaurant("far", 50.0 + 500.0 / 111_195.0, 8.0);
        far.hours = OpeningHours::default();
        let catalog = Catalog::new(
            vec![near, far],
            vec![burger("a", "far"), burger("b", "near"), burger("c", "near")],
        );
        let feed = explore_feed(&catalog, None, &query(50.0, 8.0), Exec::Sequential);
        let ids: Vec<_> = feed.iter().map(|e| e.dish_id.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a"]);
        assert!(feed[0].eligible && !feed[2].eligible);
        assert_eq!(feed[0].seasonal_effect, SeasonalEffect::Summer);
        assert!(explore_feed(&catalog, None, &query(10.0, 8.0), Exec::Sequential).is_empty());
    }

    #[test]
    fn newer_dishes_first_within_a_restaurant() {
        let r = restaurant("r", 50.0, 8.0);
        let mut old = burger("a", "r");
        let mut new = burger("b", "r");
        old.created_at = DateTime::from_timestamp(10, 0).unwrap();
        new.created_at = DateTime::from_timestamp(20, 0).unwrap();
        let catalog = Catalog::new(vec![r], vec![old, new]);
        let feed = explore_feed(&catalog, None, &query(50.0, 8.0), Exec::Sequential);
        assert_eq!(feed[0].dish_id.as_str(), "b");
    }

    #[test]
    fn exploit_returns_at_most_three() {
        let r = restaurant("r", 50.0, 8.0);
        let mut dishes: Vec<_> = (0..5).map(|i| burger(&format!("d{i}"), "r")).collect();
        for (i, d) in dishes.iter_mut().enumerate() {
            d.price_minor = 1000 - i as i64;
        }
        let catalog = Catalog::new(vec![r.clone()], dishes.clone());
        let top = exploit_top3(&catalog, &profile(), &query(50.0, 8.0), Exec::Sequential);
        let ids: Vec<_> = top.iter().map(|e| e.dish_id.as_str()).collect();
        assert_eq!(ids, ["d4", "d3", "d2"]);

        let catalog = Catalog::new(vec![r], dishes[..2].to_vec());
        assert_eq!(exploit_top3(&catalog, &profile(), &query(50.0, 8.0), Exec::Sequential).len(), 2);
    }

    #[test]
    fn disabled_dish_leaves_both_views() {
        let r = restaurant("r", 50.0, 8.0);
        let mut d = burger("d", "r");
        d.active = false;
        let catalog = Catalog::new(vec![r], vec![d]);
        assert!(explore_feed(&catalog, None, &query(50.0, 8.0), Exec::Sequential).is_empty());
        assert!(exploit_top3(&catalog, &profile(), &query(50.0, 8.0), Exec::Sequential).is_empty());
    }
}
