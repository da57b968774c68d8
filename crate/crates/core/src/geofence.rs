//! Edge-triggered proximity notifications.
//!
//! Each `(user, fence)` pair carries an inside flag and the time it last
//! fired. A user enters when within the radius and only counts as having
//! left once farther than `radius * exit_hysteresis`, so GPS jitter at the
//! rim does not re-trigger. Entry fires one notification per admissible dish
//! behind the fence, subject to mute window and cooldown.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::{effective_fence, Catalog};
use crate::error::{CoreError, Result};
use crate::exec::Exec;
use crate::geo::{haversine_m, GeoPoint};
use crate::model::{Dish, DishId, FenceId, Geofence, Restaurant, UserId, UserProfile};
use crate::recommender::admits;

pub const DEFAULT_COOLDOWN_SECS: i64 = 6 * 60 * 60;
pub const DEFAULT_EXIT_HYSTERESIS: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeofenceConfig {
    pub cooldown_secs: i64,
    pub exit_hysteresis: f64,
}

impl Default for GeofenceConfig {
    fn default() -> Self {
        Self {
            cooldown_secs: DEFAULT_COOLDOWN_SECS,
            exit_hysteresis: DEFAULT_EXIT_HYSTERESIS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationUpdate {
    pub user_id: UserId,
    #[serde(flatten)]
    pub point: GeoPoint,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationRecord {
    pub user_id: UserId,
    pub dish_id: DishId,
    pub fence_id: FenceId,
    pub at: DateTime<Utc>,
    pub message: String,
    pub distance_m: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FenceEntry {
    pub inside: bool,
    pub last_fired_at: Option<DateTime<Utc>>,
}

/// Per-user, per-fence trigger state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FenceState {
    pub users: BTreeMap<UserId, BTreeMap<FenceId, FenceEntry>>,
}

impl FenceState {
    pub fn get(&self, user: &UserId, fence: &FenceId) -> Option<&FenceEntry> {
        self.users.get(user)?.get(fence)
    }

    pub fn user(&self, user: &UserId) -> Option<&BTreeMap<FenceId, FenceEntry>> {
        self.users.get(user)
    }
}

/// Closed-boundary containment; disabled fences contain nothing.
pub fn point_in_fence(p: GeoPoint, f: &Geofence) -> bool {
    f.enabled && haversine_m(p, f.center) <= f.radius_m
}

pub fn notification_message(dish: &Dish, restaurant: &Restaurant) -> String {
    let who = dish.nickname.as_deref().unwrap_or(&dish.name);
    format!("{who} is just around the corner at {}. Come and say hi!", restaurant.name)
}

type FenceGroup<'a> = (&'a Geofence, Vec<(&'a Dish, &'a Restaurant)>);

fn fence_groups(catalog: &Catalog) -> Result<BTreeMap<&FenceId, FenceGroup<'_>>> {
    let mut groups: BTreeMap<&FenceId, FenceGroup<'_>> = BTreeMap::new();
    for dish in catalog.dishes.values() {
        let restaurant = catalog.restaurant_of(dish)?;
        let fence = effective_fence(dish, restaurant);
        groups
            .entry(&fence.id)
            .or_insert_with(|| (fence, Vec::new()))
            .1
            .push((dish, restaurant));
    }
    Ok(groups)
}

pub fn process_location_update(
    update: &LocationUpdate,
    catalog: &Catalog,
    profile: &UserProfile,
    state: &mut FenceState,
    config: &GeofenceConfig,
) -> Result<Vec<NotificationRecord>> {
    if update.user_id != profile.id {
        return Err(CoreError::UnknownProfile(update.user_id.to_string()));
    }
    let groups = fence_groups(catalog)?;
    let muted = profile.is_muted(update.at);
    let user_state = state.users.entry(update.user_id.clone()).or_default();
    let mut out = Vec::new();

    for (fence_id, (fence, dishes)) in groups {
        let entry = user_state.entry(fence_id.clone()).or_default();
        let distance_m = haversine_m(update.point, fence.center);
        let inside_now = if !fence.enabled {
            false
        } else if entry.inside {
            distance_m <= fence.radius_m * config.exit_hysteresis
        } else {
            distance_m <= fence.radius_m
        };
        let entered = inside_now && !entry.inside;
        entry.inside = inside_now;
        if !entered || muted {
            continue;
        }
        let cooled = entry
            .last_fired_at
            .is_none_or(|last| (update.at - last).num_seconds() >= config.cooldown_secs);
        if !cooled {
            continue;
        }
        let before = out.len();
        for (dish, restaurant) in dishes {
            if admits(dish, restaurant, profile, update.at) {
                out.push(NotificationRecord {
                    user_id: update.user_id.clone(),
                    dish_id: dish.id.clone(),
                    fence_id: fence.id.clone(),
                    at: update.at,
                    message: notification_message(dish, restaurant),
                    distance_m,
                });
            }
        }
        if out.len() > before {
            entry.last_fired_at = Some(update.at);
        }
    }
    Ok(out)
}

/// Folds a timestamp-ordered trace through a fresh state.
pub fn replay_walk(
    trace: &[LocationUpdate],
    catalog: &Catalog,
    profile: &UserProfile,
    config: &GeofenceConfig,
) -> Result<Vec<NotificationRecord>> {
    if let Some(i) = trace.windows(2).position(|w| w[1].at < w[0].at) {
        return Err(CoreError::NonMonotonicTrace(i + 1));
    }
    let mut state = FenceState::default();
    let mut out = Vec::new();
    for update in trace {
        out.extend(process_location_update(update, catalog, profile, &mut state, config)?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Walk {
    pub profile: UserProfile,
    pub trace: Vec<LocationUpdate>,
}

/// Replays independent walks; users never share state, so walks can run
/// concurrently.
pub fn replay_walks(
    walks: &[Walk],
    catalog: &Catalog,
    config: &GeofenceConfig,
    exec: Exec,
) -> Vec<Result<Vec<NotificationRecord>>> {
    exec.map(walks, |w| replay_walk(&w.trace, catalog, &w.profile, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{burger, restaurant};
    use crate::model::{FenceOwner, RestaurantId};

    const DEG_PER_M: f64 = 1.0 / 111_194.93;

    fn t(secs: i64) -> DateTime<Utc> {
        // Monday 2024-06-03 12:00 UTC
        DateTime::from_timestamp(1_717_416_000 + secs, 0).unwrap()
    }

    fn at_north(m: f64, secs: i64) -> LocationUpdate {
        LocationUpdate {
            user_id: "u1".into(),
            point: GeoPoint::new(50.0 + m * DEG_PER_M, 8.0),
            at: t(secs),
        }
    }

    fn catalog() -> Catalog {
        Catalog::new(vec![restaurant("r1", 50.0, 8.0)], vec![burger("d1", "r1")])
    }

    fn profile() -> UserProfile {
        UserProfile::permissive("u1".into())
    }

    #[test]
    fn fence_containment() {
        let f = restaurant("r1", 50.0, 8.0).default_fence;
        assert!(point_in_fence(f.center, &f));
        let mut off = f.clone();
        off.enabled = false;
        assert!(!point_in_fence(f.center, &off));
        let rim = GeoPoint::new(50.0, 8.0 + 0.001);
        let mut exact = f.clone();
        exact.radius_m = haversine_m(rim, f.center);
        assert!(point_in_fence(rim, &exact));
    }

    #[test]
    fn entering_fires_once() {
        let mut state = FenceState::default();
        let cfg = GeofenceConfig::default();
        let n = process_location_update(&at_north(500.0, 0), &catalog(), &profile(), &mut state, &cfg)
            .unwrap();
        assert!(n.is_empty());
        let n = process_location_update(&at_north(10.0, 60), &catalog(), &profile(), &mut state, &cfg)
            .unwrap();
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].dish_id.as_str(), "d1");
        assert_eq!(n[0].at, t(60));
        let entry = state.get(&"u1".into(), &"r1-fence".into()).unwrap();
        assert!(entry.inside);
        assert_eq!(entry.last_fired_at, Some(t(60)));
    }

    #[test]
    fn four_point_trace_respects_cooldown() {
        let cfg = GeofenceConfig::default();
        let cooldown = cfg.cooldown_secs;
        // enter, stay, exit, re-enter
        let trace = |reenter: i64| {
            vec![
                at_north(0.0, 0),
                at_north(50.0, 60),
                at_north(400.0, 120),
                at_north(0.0, reenter),
            ]
        };
        let n = replay_walk(&trace(cooldown), &catalog(), &profile(), &cfg).unwrap();
        assert_eq!(n.len(), 2);
        let n = replay_walk(&trace(cooldown - 1), &catalog(), &profile(), &cfg).unwrap();
        assert_eq!(n.len(), 1);
    }

    #[test]
    fn hysteresis_band_does_not_exit() {
        let cfg = GeofenceConfig {
            cooldown_secs: 0,
            ..Default::default()
        };
        // radius 150 m; 160 m is inside the 165 m exit band
        let trace = vec![at_north(0.0, 0), at_north(160.0, 10), at_north(0.0, 20)];
        assert_eq!(replay_walk(&trace, &catalog(), &profile(), &cfg).unwrap().len(), 1);
        let trace = vec![at_north(0.0, 0), at_north(170.0, 10), at_north(0.0, 20)];
        assert_eq!(replay_walk(&trace, &catalog(), &profile(), &cfg).unwrap().len(), 2);
    }

    #[test]
    fn blacklist_and_mute_silence() {
        let trace = vec![at_north(500.0, 0), at_north(0.0, 60)];
        let cfg = GeofenceConfig::default();
        let mut p = profile();
        p.blacklist_restaurants.insert(RestaurantId::new("r1"));
        assert!(replay_walk(&trace, &catalog(), &p, &cfg).unwrap().is_empty());
        let mut p = profile();
        p.muted_until = Some(t(3600));
        assert!(replay_walk(&trace, &catalog(), &p, &cfg).unwrap().is_empty());
    }

    #[test]
    fn dedicated_fence_replaces_default() {
        let mut d = burger("d1", "r1");
        d.dedicated_fence = Some(Geofence {
            id: "d1-fence".into(),
            owner: FenceOwner::Dish(d.id.clone()),
            center: GeoPoint::new(50.0 + 1000.0 * DEG_PER_M, 8.0),
            radius_m: 50.0,
            enabled: true,
        });
        let catalog = Catalog::new(vec![restaurant("r1", 50.0, 8.0)], vec![d]);
        let cfg = GeofenceConfig::default();
        let trace = vec![at_north(0.0, 0), at_north(1000.0, 60)];
        let n = replay_walk(&trace, &catalog, &profile(), &cfg).unwrap();
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].fence_id.as_str(), "d1-fence");
    }

    #[test]
    fn errors() {
        let cfg = GeofenceConfig::default();
        let mut state = FenceState::default();
        let other = UserProfile::permissive("u2".into());
        assert!(matches!(
            process_location_update(&at_north(0.0, 0), &catalog(), &other, &mut state, &cfg),
            Err(CoreError::UnknownProfile(_))
        ));
        let broken = Catalog::new(vec![], vec![burger("d1", "r1")]);
        assert!(matches!(
            process_location_update(&at_north(0.0, 0), &broken, &profile(), &mut state, &cfg),
            Err(CoreError::CorruptCatalog(_))
        ));
        let trace = vec![at_north(0.0, 10), at_north(0.0, 5)];
        assert_eq!(
            replay_walk(&trace, &catalog(), &profile(), &cfg),
            Err(CoreError::NonMonotonicTrace(1))
        );
    }

    #[test]
    fn wire_format_is_flat() {
        let u: LocationUpdate = serde_json::from_str(
            r#"{"user_id":"u1","lat":50.0,"lon":8.0,"at":"2024-06-03T12:00:00Z"}"#,
        )
        .unwrap();
        assert_eq!(u.at, t(0));
        assert_eq!(u.point, GeoPoint::new(50.0, 8.0));
    }
}
