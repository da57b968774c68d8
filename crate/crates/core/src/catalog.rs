use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{Dish, DishId, FenceId, FenceOwner, Geofence, Restaurant, RestaurantId};

/// Read-only snapshot of restaurants and their dishes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub restaurants: BTreeMap<RestaurantId, Restaurant>,
    pub dishes: BTreeMap<DishId, Dish>,
}

impl Catalog {
    pub fn new(restaurants: Vec<Restaurant>, dishes: Vec<Dish>) -> Self {
        Self {
            restaurants: restaurants.into_iter().map(|r| (r.id.clone(), r)).collect(),
            dishes: dishes.into_iter().map(|d| (d.id.clone(), d)).collect(),
        }
    }

    pub fn restaurant_ids(&self) -> BTreeSet<RestaurantId> {
        self.restaurants.keys().cloned().collect()
    }

    pub fn restaurant_of(&self, dish: &Dish) -> Result<&Restaurant> {
        self.restaurants.get(&dish.restaurant_id).ok_or_else(|| {
            CoreError::CorruptCatalog(format!(
                "dish {} references missing restaurant {}",
                dish.id, dish.restaurant_id
            ))
        })
    }

    pub fn dishes_of<'a>(&'a self, restaurant: &'a RestaurantId) -> impl Iterator<Item = &'a Dish> {
        self.dishes
            .values()
            .filter(move |d| &d.restaurant_id == restaurant)
    }

    /// Every fence in the catalog: restaurant defaults and dedicated dish fences.
    pub fn fences(&self) -> impl Iterator<Item = &Geofence> {
        self.restaurants
            .values()
            .map(|r| &r.default_fence)
            .chain(self.dishes.values().filter_map(|d| d.dedicated_fence.as_ref()))
    }

    pub fn fence(&self, id: &FenceId) -> Option<&Geofence> {
        self.fences().find(|f| &f.id == id)
    }

    /// Checks that all cross references resolve.
    pub fn check(&self) -> Result<()> {
        for r in self.restaurants.values() {
            if r.default_fence.owner != FenceOwner::Restaurant(r.id.clone()) {
                return Err(CoreError::CorruptCatalog(format!(
                    "default fence {} of {} has a foreign owner",
                    r.default_fence.id, r.id
                )));
            }
        }
        for d in self.dishes.values() {
            self.restaurant_of(d)?;
            if let Some(f) = &d.dedicated_fence {
                if f.owner != FenceOwner::Dish(d.id.clone()) {
                    return Err(CoreError::CorruptCatalog(format!(
                        "fence {} of dish {} has a foreign owner",
                        f.id, d.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The fence that governs notifications for `dish`: its dedicated fence if
/// it has one, otherwise the restaurant default.
pub fn effective_fence<'a>(dish: &'a Dish, restaurant: &'a Restaurant) -> &'a Geofence {
    debug_assert_eq!(dish.restaurant_id, restaurant.id);
    dish.dedicated_fence
        .as_ref()
        .unwrap_or(&restaurant.default_fence)
}
