//! Route table and handlers. Handlers take the store lock only for the
//! synchronous part of the request; mutations funnel through `Store::commit`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use ipoi_core::analytics::{intent_matrix, kpi_report, phase_histogram, TurnSink, Window};
use ipoi_core::chat::{session_voice, ChatEngine, ChatSession, ChatTurn, Outcome, Voice};
use ipoi_core::geofence::LocationUpdate;
use ipoi_core::recommender::{explore_feed, exploit_top3, Query as FeedQuery};
use ipoi_core::{DishId, Exec, FenceId, FenceOwner, GeoPoint, Geofence, Phase, RestaurantId, UserId, UserProfile};
use parking_lot::RwLock;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::ApiError;
use crate::store::{Effect, Event, Store};

pub const DEFAULT_FENCE_RADIUS_M: f64 = 150.0;

pub struct Shared {
    pub store: RwLock<Store>,
    pub engine: ChatEngine,
    pub config: Config,
}

type AppState = State<Arc<Shared>>;
type ApiResult<T = Response> = Result<T, ApiError>;

pub fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/restaurants", get(list_restaurants).post(create_restaurant))
        .route(
            "/restaurants/{id}",
            get(get_restaurant)
                .put(put_restaurant)
                .patch(patch_restaurant)
                .delete(delete_restaurant),
        )
        .route("/restaurants/{id}/dishes", get(list_dishes).post(create_dish))
        .route(
            "/dishes/{id}",
            get(get_dish).put(put_dish).patch(patch_dish).delete(delete_dish),
        )
        .route("/dishes/{id}/avatar", put(put_avatar).get(get_avatar))
        .route("/geofences", get(list_fences).post(create_fence))
        .route(
            "/geofences/{id}",
            get(get_fence).put(put_fence).patch(patch_fence).delete(delete_fence),
        )
        .route("/profiles", get(list_profiles).post(create_profile))
        .route(
            "/profiles/{id}",
            get(get_profile).put(put_profile).patch(patch_profile),
        )
        .route("/location", post(post_location))
        .route("/explore", get(get_explore))
        .route("/exploit", get(get_exploit))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/phase", post(post_phase))
        .route("/kpis", get(get_kpis))
        .route("/analytics/matrix", get(get_matrix))
        .route("/analytics/phases", get(get_phases))
        .route("/analytics/annotations", get(list_annotations).post(post_annotation))
        .route("/analytics/corpus", get(export_corpus).post(import_corpus))
        .with_state(shared)
}

// ---- helpers ----

fn authorize(shared: &Shared, headers: &HeaderMap) -> ApiResult<()> {
    if shared.config.auth_tokens.is_empty() {
        return Ok(());
    }
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match token {
        Some(t) if shared.config.auth_tokens.iter().any(|known| known == t) => Ok(()),
        _ => Err(ApiError::Unauthorized),
    }
}

/// Malformed JSON is a bad request; well-formed JSON of the wrong shape is
/// a validation failure.
fn parse_value(body: &Bytes) -> ApiResult<Value> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(Value::Object(Default::default()));
    }
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed JSON: {e}")))
}

fn shape<T: DeserializeOwned>(value: Value) -> ApiResult<T> {
    serde_json::from_value(value)
        .map_err(|e| ApiError::Validation(vec![ipoi_core::Violation::new("body", e.to_string())]))
}

fn object(value: &mut Value) -> ApiResult<&mut serde_json::Map<String, Value>> {
    value
        .as_object_mut()
        .ok_or_else(|| ApiError::Validation(vec![ipoi_core::Violation::new("body", "expected a JSON object")]))
}

/// Forces `id` in `body` to the path id, rejecting a conflicting one.
fn pin_id(body: &mut Value, id: &str) -> ApiResult<()> {
    let obj = object(body)?;
    match obj.get("id") {
        Some(Value::String(s)) if s != id => Err(ApiError::Validation(vec![ipoi_core::Violation::new(
            "id",
            "does not match the path",
        )])),
        _ => {
            obj.insert("id".into(), Value::String(id.to_owned()));
            Ok(())
        }
    }
}

fn merged<T: Serialize + DeserializeOwned>(current: &T, patch: &Value) -> ApiResult<Value> {
    let mut doc = serde_json::to_value(current).expect("record serializes");
    json_patch::merge(&mut doc, patch);
    Ok(doc)
}

fn created<T: Serialize>(value: T) -> Response {
    (StatusCode::CREATED, Json(value)).into_response()
}

fn ok<T: Serialize>(value: T) -> Response {
    Json(value).into_response()
}

fn now_or(at: Option<DateTime<Utc>>) -> DateTime<Utc> {
    at.unwrap_or_else(Utc::now)
}

// ---- restaurants ----

async fn list_restaurants(State(s): AppState) -> Response {
    let store = s.store.read();
    ok(store.state().catalog.restaurants.values().collect::<Vec<_>>())
}

async fn get_restaurant(State(s): AppState, Path(id): Path<String>) -> ApiResult {
    let store = s.store.read();
    let r = store
        .state()
        .catalog
        .restaurants
        .get(&RestaurantId::new(&id))
        .ok_or_else(|| ApiError::NotFound(format!("restaurant {id}")))?;
    Ok(ok(r))
}

/// Fills the default fence from the location when omitted or partial.
fn complete_restaurant(body: &mut Value) -> ApiResult<()> {
    let obj = object(body)?;
    let id = obj.get("id").and_then(Value::as_str).unwrap_or_default().to_owned();
    let location = obj.get("location").cloned().unwrap_or(Value::Null);
    let fence = obj
        .entry("default_fence")
        .or_insert_with(|| Value::Object(Default::default()));
    if let Some(f) = fence.as_object_mut() {
        f.entry("id").or_insert_with(|| json!(format!("{id}-fence")));
        f.entry("owner").or_insert_with(|| json!({ "restaurant": id }));
        f.entry("center").or_insert(location);
        f.entry("radius_m").or_insert(json!(DEFAULT_FENCE_RADIUS_M));
    }
    Ok(())
}

async fn create_restaurant(State(s): AppState, headers: HeaderMap, body: Bytes) -> ApiResult {
    authorize(&s, &headers)?;
    let mut body = parse_value(&body)?;
    let mut store = s.store.write();
    let obj = object(&mut body)?;
    if !obj.contains_key("id") {
        obj.insert("id".into(), json!(format!("r{}", store.next_seq())));
    }
    let id = RestaurantId::new(obj["id"].as_str().unwrap_or_default());
    if store.state().catalog.restaurants.contains_key(&id) {
        return Err(ApiError::Conflict(format!("restaurant {id} exists")));
    }
    complete_restaurant(&mut body)?;
    let restaurant: ipoi_core::Restaurant = shape(body)?;
    store.commit(Event::RestaurantPut {
        restaurant: restaurant.clone(),
    })?;
    Ok(created(restaurant))
}

async fn put_restaurant(State(s): AppState, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    authorize(&s, &headers)?;
    let mut body = parse_value(&body)?;
    pin_id(&mut body, &id)?;
    let mut store = s.store.write();
    if !store.state().catalog.restaurants.contains_key(&RestaurantId::new(&id)) {
        return Err(ApiError::NotFound(format!("restaurant {id}")));
    }
    complete_restaurant(&mut body)?;
    let restaurant: ipoi_core::Restaurant = shape(body)?;
    store.commit(Event::RestaurantPut {
        restaurant: restaurant.clone(),
    })?;
    Ok(ok(restaurant))
}

async fn patch_restaurant(State(s): AppState, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    authorize(&s, &headers)?;
    let patch = parse_value(&body)?;
    let mut store = s.store.write();
    let current = store
        .state()
        .catalog
        .restaurants
        .get(&RestaurantId::new(&id))
        .ok_or_else(|| ApiError::NotFound(format!("restaurant {id}")))?;
    let mut doc = merged(current, &patch)?;
    pin_id(&mut doc, &id)?;
    let restaurant: ipoi_core::Restaurant = shape(doc)?;
    store.commit(Event::RestaurantPut {
        restaurant: restaurant.clone(),
    })?;
    Ok(ok(restaurant))
}

#[derive(Deserialize)]
struct CascadeParams {
    #[serde(default)]
    cascade: bool,
}

async fn delete_restaurant(
    State(s): AppState,
    headers: HeaderMap,
    Path(id): Path<String>,
    Query(p): Query<CascadeParams>,
) -> ApiResult {
    authorize(&s, &headers)?;
    s.store.write().commit(Event::RestaurantDeleted {
        id: id.into(),
        cascade: p.cascade,
    })?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

// ---- dishes ----

async fn list_dishes(State(s): AppState, Path(id): Path<String>) -> ApiResult {
    let store = s.store.read();
    let rid = RestaurantId::new(&id);
    if !store.state().catalog.restaurants.contains_key(&rid) {
        return Err(ApiError::NotFound(format!("restaurant {id}")));
    }
    Ok(ok(store.state().catalog.dishes_of(&rid).collect::<Vec<_>>()))
}

#[derive(Deserialize)]
struct AtParam {
    at: Option<DateTime<Utc>>,
}

async fn create_dish(
    State(s): AppState,
    headers: HeaderMap,
    Path(rid): Path<String>,
    Query(q): Query<AtParam>,
    body: Bytes,
) -> ApiResult {
    authorize(&s, &headers)?;
    let mut body = parse_value(&body)?;
    let mut store = s.store.write();
    if !store.state().catalog.restaurants.contains_key(&RestaurantId::new(&rid)) {
        return Err(ApiError::NotFound(format!("restaurant {rid}")));
    }
    let next = store.next_seq();
    let obj = object(&mut body)?;
    obj.insert("restaurant_id".into(), json!(rid));
    obj.entry("id").or_insert_with(|| json!(format!("d{next}")));
    obj.entry("created_at").or_insert_with(|| json!(now_or(q.at)));
    let dish: ipoi_core::Dish = shape(body)?;
    if store.state().catalog.dishes.contains_key(&dish.id) {
        return Err(ApiError::Conflict(format!("dish {} exists", dish.id)));
    }
    store.commit(Event::DishPut { dish: dish.clone() })?;
    Ok(created(dish))
}

fn current_dish<'a>(store: &'a Store, id: &str) -> ApiResult<&'a ipoi_core::Dish> {
    store
        .state()
        .catalog
        .dishes
        .get(&DishId::new(id))
        .ok_or_else(|| ApiError::NotFound(format!("dish {id}")))
}

async fn get_dish(State(s): AppState, Path(id): Path<String>) -> ApiResult {
    let store = s.store.read();
    Ok(ok(current_dish(&store, &id)?))
}

async fn put_dish(State(s): AppState, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    authorize(&s, &headers)?;
    let mut body = parse_value(&body)?;
    pin_id(&mut body, &id)?;
    let mut store = s.store.write();
    let existing = current_dish(&store, &id)?;
    let obj = object(&mut body)?;
    obj.entry("created_at").or_insert_with(|| json!(existing.created_at));
    let dish: ipoi_core::Dish = shape(body)?;
    store.commit(Event::DishPut { dish: dish.clone() })?;
    Ok(ok(dish))
}

async fn patch_dish(State(s): AppState, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    authorize(&s, &headers)?;
    let patch = parse_value(&body)?;
    let mut store = s.store.write();
    let mut doc = merged(current_dish(&store, &id)?, &patch)?;
    pin_id(&mut doc, &id)?;
    let dish: ipoi_core::Dish = shape(doc)?;
    store.commit(Event::DishPut { dish: dish.clone() })?;
    Ok(ok(dish))
}

async fn delete_dish(State(s): AppState, headers: HeaderMap, Path(id): Path<String>) -> ApiResult {
    authorize(&s, &headers)?;
    s.store.write().commit(Event::DishDeleted { id: id.into() })?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn put_avatar(State(s): AppState, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    authorize(&s, &headers)?;
    let blob = serde_json::from_slice::<Value>(&body)
        .map_err(|e| ApiError::BadRequest(format!("malformed JSON: {e}")))?;
    let mut store = s.store.write();
    let mut dish = current_dish(&store, &id)?.clone();
    dish.avatar = Some(blob.clone());
    store.commit(Event::DishPut { dish })?;
    Ok(ok(blob))
}

async fn get_avatar(State(s): AppState, Path(id): Path<String>) -> ApiResult {
    let store = s.store.read();
    let dish = current_dish(&store, &id)?;
    let blob = dish
        .avatar
        .as_ref()
        .ok_or_else(|| ApiError::NotFound(format!("avatar of dish {id}")))?;
    Ok(ok(blob))
}

// ---- geofences ----

async fn list_fences(State(s): AppState) -> Response {
    let store = s.store.read();
    ok(store.state().catalog.fences().collect::<Vec<_>>())
}

fn current_fence<'a>(store: &'a Store, id: &str) -> ApiResult<&'a Geofence> {
    store
        .state()
        .catalog
        .fence(&FenceId::new(id))
        .ok_or_else(|| ApiError::NotFound(format!("geofence {id}")))
}

async fn get_fence(State(s): AppState, Path(id): Path<String>) -> ApiResult {
    let store = s.store.read();
    Ok(ok(current_fence(&store, &id)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewFence {
    id: Option<FenceId>,
    dish_id: DishId,
    center: Option<GeoPoint>,
    radius_m: f64,
    #[serde(default = "yes")]
    enabled: bool,
}

fn yes() -> bool {
    true
}

/// Stores `fence` on its owner, emitting the owner's put event.
fn commit_fence(store: &mut Store, fence: Geofence) -> ApiResult<()> {
    let catalog = &store.state().catalog;
    let event = match &fence.owner {
        FenceOwner::Restaurant(rid) => {
            let mut r = catalog
                .restaurants
                .get(rid)
                .ok_or_else(|| ApiError::NotFound(format!("restaurant {rid}")))?
                .clone();
            r.default_fence = fence;
            Event::RestaurantPut { restaurant: r }
        }
        FenceOwner::Dish(did) => {
            let mut d = catalog
                .dishes
                .get(did)
                .ok_or_else(|| ApiError::NotFound(format!("dish {did}")))?
                .clone();
            d.dedicated_fence = Some(fence);
            Event::DishPut { dish: d }
        }
    };
    store.commit(event)?;
    Ok(())
}

async fn create_fence(State(s): AppState, headers: HeaderMap, body: Bytes) -> ApiResult {
    authorize(&s, &headers)?;
    let req: NewFence = shape(parse_value(&body)?)?;
    let mut store = s.store.write();
    let dish = current_dish(&store, req.dish_id.as_str())?;
    let center = match req.center {
        Some(c) => c,
        None => store.state().catalog.restaurant_of(dish)?.location,
    };
    let fence = Geofence {
        id: req.id.unwrap_or_else(|| FenceId::new(format!("{}-fence", req.dish_id))),
        owner: FenceOwner::Dish(req.dish_id),
        center,
        radius_m: req.radius_m,
        enabled: req.enabled,
    };
    if store.state().catalog.fence(&fence.id).is_some() {
        return Err(ApiError::Conflict(format!("geofence {} exists", fence.id)));
    }
    commit_fence(&mut store, fence.clone())?;
    Ok(created(fence))
}

async fn put_fence(State(s): AppState, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    authorize(&s, &headers)?;
    let mut body = parse_value(&body)?;
    pin_id(&mut body, &id)?;
    let mut store = s.store.write();
    let owner = current_fence(&store, &id)?.owner.clone();
    object(&mut body)?.insert("owner".into(), serde_json::to_value(&owner).expect("owner serializes"));
    let fence: Geofence = shape(body)?;
    commit_fence(&mut store, fence.clone())?;
    Ok(ok(fence))
}

async fn patch_fence(State(s): AppState, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    authorize(&s, &headers)?;
    let patch = parse_value(&body)?;
    let mut store = s.store.write();
    let current = current_fence(&store, &id)?.clone();
    let mut doc = merged(&current, &patch)?;
    pin_id(&mut doc, &id)?;
    object(&mut doc)?.insert("owner".into(), serde_json::to_value(&current.owner).expect("owner serializes"));
    let fence: Geofence = shape(doc)?;
    commit_fence(&mut store, fence.clone())?;
    Ok(ok(fence))
}

/// Removing a dedicated fence reverts the dish to its restaurant's default;
/// default fences can only be edited or disabled.
async fn delete_fence(State(s): AppState, headers: HeaderMap, Path(id): Path<String>) -> ApiResult {
    authorize(&s, &headers)?;
    let mut store = s.store.write();
    let fence = current_fence(&store, &id)?;
    let FenceOwner::Dish(did) = fence.owner.clone() else {
        return Err(ApiError::Conflict(format!(
            "geofence {id} is a restaurant default; disable it instead"
        )));
    };
    let mut dish = current_dish(&store, did.as_str())?.clone();
    dish.dedicated_fence = None;
    store.commit(Event::DishPut { dish })?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

// ---- profiles ----

async fn list_profiles(State(s): AppState) -> Response {
    let store = s.store.read();
    ok(store.state().profiles.values().collect::<Vec<_>>())
}

fn current_profile<'a>(store: &'a Store, id: &str) -> ApiResult<&'a UserProfile> {
    store
        .state()
        .profiles
        .get(&UserId::new(id))
        .ok_or_else(|| ApiError::NotFound(format!("profile {id}")))
}

async fn get_profile(State(s): AppState, Path(id): Path<String>) -> ApiResult {
    let store = s.store.read();
    Ok(ok(current_profile(&store, &id)?))
}

/// Guests get a server-issued id; no credentials are involved.
async fn create_profile(State(s): AppState, body: Bytes) -> ApiResult {
    let mut body = parse_value(&body)?;
    let mut store = s.store.write();
    let next = store.next_seq();
    object(&mut body)?
        .entry("id")
        .or_insert_with(|| json!(format!("g{next}")));
    let profile: UserProfile = shape(body)?;
    if store.state().profiles.contains_key(&profile.id) {
        return Err(ApiError::Conflict(format!("profile {} exists", profile.id)));
    }
    store.commit(Event::ProfilePut {
        profile: profile.clone(),
    })?;
    Ok(created(profile))
}

async fn put_profile(State(s): AppState, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let mut body = parse_value(&body)?;
    pin_id(&mut body, &id)?;
    let profile: UserProfile = shape(body)?;
    s.store.write().commit(Event::ProfilePut {
        profile: profile.clone(),
    })?;
    Ok(ok(profile))
}

async fn patch_profile(State(s): AppState, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let patch = parse_value(&body)?;
    let mut store = s.store.write();
    let mut doc = merged(current_profile(&store, &id)?, &patch)?;
    pin_id(&mut doc, &id)?;
    let profile: UserProfile = shape(doc)?;
    store.commit(Event::ProfilePut {
        profile: profile.clone(),
    })?;
    Ok(ok(profile))
}

// ---- guest ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LocationBody {
    user_id: UserId,
    lat: f64,
    lon: f64,
    at: Option<DateTime<Utc>>,
}

async fn post_location(State(s): AppState, body: Bytes) -> ApiResult {
    let req: LocationBody = shape(parse_value(&body)?)?;
    let update = LocationUpdate {
        user_id: req.user_id,
        point: GeoPoint::new(req.lat, req.lon),
        at: now_or(req.at),
    };
    let effect = s.store.write().commit(Event::LocationProcessed { update })?;
    let notifications = match effect {
        Effect::Notifications(n) => n,
        _ => Vec::new(),
    };
    Ok(ok(json!({ "notifications": notifications })))
}

#[derive(Deserialize)]
struct FeedParams {
    lat: f64,
    lon: f64,
    radius_m: Option<f64>,
    at: Option<DateTime<Utc>>,
    profile_id: Option<String>,
}

impl FeedParams {
    fn query(&self, default_radius: f64) -> ApiResult<FeedQuery> {
        let location = GeoPoint::new(self.lat, self.lon);
        if !location.is_valid() {
            return Err(ApiError::BadRequest("invalid coordinates".into()));
        }
        let radius_m = self.radius_m.unwrap_or(default_radius);
        if !(radius_m.is_finite() && radius_m >= 0.0) {
            return Err(ApiError::BadRequest("invalid radius".into()));
        }
        Ok(FeedQuery {
            location,
            at: now_or(self.at),
            radius_m,
        })
    }
}

async fn get_explore(State(s): AppState, Query(p): Query<FeedParams>) -> ApiResult {
    let query = p.query(s.config.radius_m)?;
    let store = s.store.read();
    let profile = match &p.profile_id {
        Some(id) => Some(current_profile(&store, id)?),
        None => None,
    };
    Ok(ok(explore_feed(&store.state().catalog, profile, &query, Exec::default())))
}

async fn get_exploit(State(s): AppState, Query(p): Query<FeedParams>) -> ApiResult {
    let query = p.query(s.config.radius_m)?;
    let id = p
        .profile_id
        .as_deref()
        .ok_or_else(|| ApiError::BadRequest("profile_id is required".into()))?;
    let store = s.store.read();
    let profile = current_profile(&store, id)?;
    Ok(ok(exploit_top3(&store.state().catalog, profile, &query, Exec::default())))
}

// ---- sessions ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    id: Option<String>,
    user_id: UserId,
    dish_id: DishId,
    seed: Option<u64>,
    at: Option<DateTime<Utc>>,
}

#[derive(Serialize)]
struct SessionView<'a> {
    id: &'a str,
    user_id: &'a UserId,
    dish_id: &'a DishId,
    phase: Phase,
    started_at: DateTime<Utc>,
    seed: u64,
    turns: u64,
    voice: Voice,
}

fn session_view<'a>(store: &'a Store, session: &'a ChatSession) -> ApiResult<Value> {
    let dish = current_dish(store, session.dish_id.as_str())?;
    Ok(serde_json::to_value(SessionView {
        id: session.id.as_str(),
        user_id: &session.user_id,
        dish_id: &session.dish_id,
        phase: session.phase,
        started_at: session.started_at,
        seed: session.seed,
        turns: session.turns,
        voice: session_voice(session, dish),
    })
    .expect("view serializes"))
}

fn current_session<'a>(store: &'a Store, id: &str) -> ApiResult<&'a ChatSession> {
    store
        .state()
        .sessions
        .get(&ipoi_core::SessionId::new(id))
        .ok_or_else(|| ApiError::NotFound(format!("session {id}")))
}

async fn create_session(State(s): AppState, body: Bytes) -> ApiResult {
    let req: NewSession = shape(parse_value(&body)?)?;
    let mut store = s.store.write();
    let next = store.next_seq();
    let session = ChatSession::new(
        req.id.unwrap_or_else(|| format!("s{next}")).into(),
        req.user_id,
        req.dish_id,
        now_or(req.at),
        req.seed.unwrap_or(next),
    );
    store.commit(Event::SessionCreated {
        session: session.clone(),
    })?;
    Ok(created(session_view(&store, &session)?))
}

async fn get_session(State(s): AppState, Path(id): Path<String>) -> ApiResult {
    let store = s.store.read();
    Ok(ok(session_view(&store, current_session(&store, &id)?)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageBody {
    text: String,
    at: Option<DateTime<Utc>>,
}

#[derive(Default)]
struct Capture(Option<ChatTurn>);

impl TurnSink for Capture {
    fn record_turn(&mut self, turn: ChatTurn) -> u64 {
        self.0 = Some(turn);
        0
    }
}

#[derive(Serialize)]
struct MessageReply {
    position: u64,
    matched_intent: String,
    confidence: f64,
    response_text: String,
    suggestions: Vec<String>,
    outcome: Option<Outcome>,
    phase: Phase,
    at: DateTime<Utc>,
}

/// The engine answers against a copy of the session; the resulting turn is
/// committed as one event, which updates the session and the inquiry log.
async fn post_message(State(s): AppState, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: MessageBody = shape(parse_value(&body)?)?;
    let mut store = s.store.write();
    let mut session = current_session(&store, &id)?.clone();
    let mut rng = session.turn_rng();
    let mut capture = Capture::default();
    let reply = s.engine.handle_turn(
        &mut session,
        &store.state().catalog,
        &req.text,
        now_or(req.at),
        &mut rng,
        &mut capture,
    )?;
    let turn = capture.0.expect("engine records every answered turn");
    let Effect::Position(position) = store.commit(Event::TurnRecorded { turn: turn.clone() })? else {
        unreachable!("turn events report a position")
    };
    Ok(ok(MessageReply {
        position,
        matched_intent: turn.matched_intent,
        confidence: turn.confidence,
        response_text: turn.response_text,
        suggestions: reply.suggestions,
        outcome: turn.outcome,
        phase: turn.phase,
        at: turn.at,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseBody {
    phase: Phase,
}

async fn post_phase(State(s): AppState, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: PhaseBody = shape(parse_value(&body)?)?;
    let mut store = s.store.write();
    store.commit(Event::PhaseSet {
        session_id: id.clone().into(),
        phase: req.phase,
    })?;
    Ok(ok(session_view(&store, current_session(&store, &id)?)?))
}

// ---- analytics ----

#[derive(Deserialize)]
struct WindowParams {
    from: Option<DateTime<Utc>>,
    to: Option<DateTime<Utc>>,
}

impl WindowParams {
    /// Open start, `now` as the default end.
    fn window(&self) -> ApiResult<Window> {
        Ok(Window::new(
            self.from.unwrap_or(DateTime::<Utc>::MIN_UTC),
            now_or(self.to),
        )?)
    }
}

async fn get_kpis(State(s): AppState, Query(p): Query<WindowParams>) -> ApiResult {
    let window = p.window()?;
    let store = s.store.read();
    let state = store.state();
    let profiles: Vec<UserProfile> = state.profiles.values().cloned().collect();
    let report = kpi_report(
        &state.inquiries,
        &state.catalog,
        &profiles,
        &s.engine.intents,
        window,
        Exec::default(),
    )?;
    Ok(ok(report))
}

async fn get_matrix(State(s): AppState, Query(p): Query<WindowParams>) -> ApiResult {
    let window = p.window()?;
    let store = s.store.read();
    Ok(ok(intent_matrix(&store.state().inquiries, window)))
}

async fn get_phases(State(s): AppState, Query(p): Query<WindowParams>) -> ApiResult {
    let window = p.window()?;
    let store = s.store.read();
    Ok(ok(phase_histogram(&store.state().inquiries, &s.engine.intents, window)))
}

#[derive(Deserialize)]
struct AnnotationFilter {
    #[serde(default)]
    unlabeled: bool,
}

async fn list_annotations(State(s): AppState, Query(f): Query<AnnotationFilter>) -> Response {
    let store = s.store.read();
    let rows: Vec<Value> = store
        .state()
        .inquiries
        .turns()
        .iter()
        .enumerate()
        .filter(|(_, t)| !f.unlabeled || t.outcome.is_none())
        .map(|(i, t)| json!({ "position": i, "turn": t }))
        .collect();
    ok(rows)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationBody {
    position: u64,
    outcome: Outcome,
    annotated_intent: Option<String>,
}

async fn post_annotation(State(s): AppState, headers: HeaderMap, body: Bytes) -> ApiResult {
    authorize(&s, &headers)?;
    let req: AnnotationBody = shape(parse_value(&body)?)?;
    if let Some(name) = &req.annotated_intent {
        if s.engine.intents.get(name).is_none() {
            return Err(ApiError::Validation(vec![ipoi_core::Violation::new(
                "annotated_intent",
                format!("unknown intent '{name}'"),
            )]));
        }
    }
    let mut store = s.store.write();
    store.commit(Event::TurnAnnotated {
        position: req.position,
        outcome: req.outcome,
        annotated_intent: req.annotated_intent,
    })?;
    let turn = store.state().inquiries.get(req.position).expect("annotated turn exists");
    Ok(ok(json!({ "position": req.position, "turn": turn })))
}

/// Parses newline-delimited turns; errors name the 1-based line.
pub fn parse_corpus(text: &str) -> Result<Vec<ChatTurn>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

async fn import_corpus(State(s): AppState, headers: HeaderMap, body: Bytes) -> ApiResult {
    authorize(&s, &headers)?;
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::BadRequest("corpus is not UTF-8".into()))?;
    let turns = parse_corpus(text).map_err(ApiError::BadRequest)?;
    let fallback = s.engine.intents.fallback().name.as_str();
    for (i, t) in turns.iter().enumerate() {
        for name in std::iter::once(&t.matched_intent).chain(t.annotated_intent.as_ref()) {
            if s.engine.intents.get(name).is_none() {
                return Err(ApiError::BadRequest(format!("record {}: unknown intent '{name}'", i + 1)));
            }
        }
        t.check(fallback)
            .map_err(|e| ApiError::BadRequest(format!("record {}: {e}", i + 1)))?;
    }
    let imported = turns.len();
    let Effect::Position(first) = s.store.write().commit(Event::CorpusImported { turns })? else {
        unreachable!("corpus events report a position")
    };
    Ok(created(json!({ "imported": imported, "first_position": first })))
}

async fn export_corpus(State(s): AppState) -> Response {
    let store = s.store.read();
    let mut out = String::new();
    for t in store.state().inquiries.turns() {
        out.push_str(&serde_json::to_string(t).expect("turn serializes"));
        out.push('\n');
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response()
}
