//! Shared domain records and their validation.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::hours::OpeningHours;

macro_rules! id_type {
    ($($(#[$meta:meta])* $name:ident),* $(,)?) => {$(
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    )*};
}

id_type!(RestaurantId, ChainId, DishId, FenceId, UserId, SessionId);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FenceOwner {
    Restaurant(RestaurantId),
    Dish(DishId),
}

/// Circular region; entering it can trigger proactive notifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geofence {
    pub id: FenceId,
    pub owner: FenceOwner,
    pub center: GeoPoint,
    pub radius_m: f64,
    #[serde(default = "yes")]
    pub enabled: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restaurant {
    pub id: RestaurantId,
    pub name: String,
    #[serde(default)]
    pub chain_id: Option<ChainId>,
    pub location: GeoPoint,
    #[serde(default)]
    pub hours: OpeningHours,
    /// Fixed offset of local time east of UTC.
    #[serde(default)]
    pub utc_offset_minutes: i32,
    pub default_fence: Geofence,
    #[serde(default = "yes")]
    pub enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvatarGender {
    Male,
    Female,
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DietClass {
    Vegan,
    Vegetarian,
    Meat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonalEffect {
    None,
    Spring,
    Easter,
    Summer,
    Fall,
    Winter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dish {
    pub id: DishId,
    pub restaurant_id: RestaurantId,
    pub name: String,
    #[serde(default)]
    pub nickname: Option<String>,
    #[serde(default)]
    pub image_ref: String,
    pub ingredients: Vec<String>,
    #[serde(default)]
    pub description: String,
    pub price_minor: i64,
    #[serde(default = "unspecified")]
    pub avatar_gender: AvatarGender,
    #[serde(default)]
    pub allergens: BTreeSet<String>,
    #[serde(default)]
    pub cuisine: String,
    #[serde(default)]
    pub local: bool,
    #[serde(default)]
    pub organic: bool,
    pub diet_class: DietClass,
    #[serde(default = "no_effect")]
    pub seasonal_effect: SeasonalEffect,
    #[serde(default)]
    pub dedicated_fence: Option<Geofence>,
    #[serde(default = "yes")]
    pub active: bool,
    #[serde(default = "epoch")]
    pub created_at: DateTime<Utc>,
    /// Opaque avatar customization blob, stored as given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avatar: Option<serde_json::Value>,
}

fn unspecified() -> AvatarGender {
    AvatarGender::Unspecified
}

fn no_effect() -> SeasonalEffect {
    SeasonalEffect::None
}

fn epoch() -> DateTime<Utc> {
    DateTime::UNIX_EPOCH
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diet {
    #[default]
    Omnivore,
    Vegetarian,
    Vegan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: UserId,
    /// `false` for guest accounts.
    #[serde(default)]
    pub registered: bool,
    #[serde(default)]
    pub allergen_exclusions: BTreeSet<String>,
    #[serde(default)]
    pub diet: Diet,
    #[serde(default)]
    pub budget_limit_minor: Option<i64>,
    #[serde(default)]
    pub blacklist_restaurants: BTreeSet<RestaurantId>,
    #[serde(default)]
    pub blacklist_chains: BTreeSet<ChainId>,
    #[serde(default)]
    pub muted_until: Option<DateTime<Utc>>,
}

impl UserProfile {
    /// Omnivore with no exclusions, budget or blacklists.
    pub fn permissive(id: UserId) -> Self {
        Self {
            id,
            registered: false,
            allergen_exclusions: BTreeSet::new(),
            diet: Diet::Omnivore,
            budget_limit_minor: None,
            blacklist_restaurants: BTreeSet::new(),
            blacklist_chains: BTreeSet::new(),
            muted_until: None,
        }
    }

    pub fn is_muted(&self, at: DateTime<Utc>) -> bool {
        self.muted_until.is_some_and(|until| until >= at)
    }
}

/// The four phases of eating out, in their natural order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Prearrival,
    PostarrivalPreprocess,
    WhileDining,
    AfterDining,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::Prearrival,
        Phase::PostarrivalPreprocess,
        Phase::WhileDining,
        Phase::AfterDining,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Prearrival => "prearrival",
            Phase::PostarrivalPreprocess => "postarrival_preprocess",
            Phase::WhileDining => "while_dining",
            Phase::AfterDining => "after_dining",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown phase '{s}'"))
    }
}

pub fn diet_accepts(diet: Diet, class: DietClass) -> bool {
    match diet {
        Diet::Omnivore => true,
        Diet::Vegetarian => matches!(class, DietClass::Vegan | DietClass::Vegetarian),
        Diet::Vegan => class == DietClass::Vegan,
    }
}

/// A single failed invariant, keyed by the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_owned(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

pub type Validation = Result<(), Vec<Violation>>;

fn finish(violations: Vec<Violation>) -> Validation {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

pub fn is_allergen_code(code: &str) -> bool {
    !code.is_empty()
        && code
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

fn check_fence(fence: &Geofence, owner: &FenceOwner, field: &str, out: &mut Vec<Violation>) {
    if fence.id.0.is_empty() {
        out.push(Violation::new(field, "empty fence id"));
    }
    if !(fence.radius_m.is_finite() && fence.radius_m > 0.0) {
        out.push(Violation::new(field, "non-positive radius"));
    }
    if !fence.center.is_valid() {
        out.push(Violation::new(field, "invalid coordinates"));
    }
    if &fence.owner != owner {
        out.push(Violation::new(field, "fence owner mismatch"));
    }
}

pub fn validate_dish(d: &Dish, known_restaurants: &BTreeSet<RestaurantId>) -> Validation {
    let mut v = Vec::new();
    if d.id.0.is_empty() {
        v.push(Violation::new("id", "empty id"));
    }
    if d.name.trim().is_empty() {
        v.push(Violation::new("name", "empty name"));
    }
    if d.price_minor < 0 {
        v.push(Violation::new("price_minor", "negative price"));
    }
    if d.active && d.ingredients.iter().all(|i| i.trim().is_empty()) {
        v.push(Violation::new("ingredients", "active dish without ingredients"));
    }
    if let Some(bad) = d.allergens.iter().find(|a| !is_allergen_code(a)) {
        v.push(Violation::new(
            "allergens",
            format!("invalid allergen code '{bad}'"),
        ));
    }
    if !known_restaurants.contains(&d.restaurant_id) {
        v.push(Violation::new("restaurant_id", "dangling restaurant"));
    }
    if let Some(f) = &d.dedicated_fence {
        check_fence(f, &FenceOwner::Dish(d.id.clone()), "dedicated_fence", &mut v);
    }
    finish(v)
}

pub fn validate_restaurant(r: &Restaurant) -> Validation {
    let mut v = Vec::new();
    if r.id.0.is_empty() {
        v.push(Violation::new("id", "empty id"));
    }
    if r.name.trim().is_empty() {
        v.push(Violation::new("name", "empty name"));
    }
    if !r.location.is_valid() {
        v.push(Violation::new("location", "invalid coordinates"));
    }
    if let Err(e) = r.hours.validate() {
        v.push(Violation::new("hours", e.to_string()));
    }
    if !(-14 * 60..=14 * 60).contains(&r.utc_offset_minutes) {
        v.push(Violation::new("utc_offset_minutes", "offset out of range"));
    }
    check_fence(
        &r.default_fence,
        &FenceOwner::Restaurant(r.id.clone()),
        "default_fence",
        &mut v,
    );
    finish(v)
}

pub fn validate_profile(p: &UserProfile) -> Validation {
    let mut v = Vec::new();
    if p.id.0.is_empty() {
        v.push(Violation::new("id", "empty id"));
    }
    if p.budget_limit_minor.is_some_and(|b| b < 0) {
        v.push(Violation::new("budget_limit_minor", "negative budget"));
    }
    if let Some(bad) = p.allergen_exclusions.iter().find(|a| !is_allergen_code(a)) {
        v.push(Violation::new(
            "allergen_exclusions",
            format!("invalid allergen code '{bad}'"),
        ));
    }
    finish(v)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::hours::Interval;

    pub fn restaurant(id: &str, lat: f64, lon: f64) -> Restaurant {
        Restaurant {
            id: RestaurantId::new(id),
            name: format!("Restaurant {id}"),
            chain_id: None,
            location: GeoPoint::new(lat, lon),
            hours: OpeningHours::daily(&[Interval::new(0, 1439)]),
            utc_offset_minutes: 0,
            default_fence: Geofence {
                id: FenceId::new(format!("{id}-fence")),
                owner: FenceOwner::Restaurant(RestaurantId::new(id)),
                center: GeoPoint::new(lat, lon),
                radius_m: 150.0,
                enabled: true,
            },
            enabled: true,
        }
    }

    /// The burger from the ingredients exchange used throughout the tests.
    pub fn burger(id: &str, restaurant: &str) -> Dish {
        Dish {
            id: DishId::new(id),
            restaurant_id: RestaurantId::new(restaurant),
            name: "Veggie Burger".into(),
            nickname: None,
            image_ref: "img://burger".into(),
            ingredients: [
                "French fries",
                "beyond meat",
                "sauteed onions",
                "lettuce",
                "tomatoes",
                "pickled gherkins",
                "ketchup",
                "mustard",
            ]
            .map(String::from)
            .to_vec(),
            description: "Fresh ingredients, top quality".into(),
            price_minor: 1250,
            avatar_gender: AvatarGender::Male,
            allergens: ["gluten", "mustard"].map(String::from).into(),
            cuisine: "american".into(),
            local: true,
            organic: false,
            diet_class: DietClass::Vegan,
            seasonal_effect: SeasonalEffect::Summer,
            dedicated_fence: None,
            active: true,
            created_at: DateTime::UNIX_EPOCH,
            avatar: None,
        }
    }
}
