//! File-backed state: a JSON snapshot plus an append-only JSON-lines event
//! log. Every mutation is one event; startup folds the log over the snapshot.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use ipoi_core::analytics::{InquiryLog, TurnSink};
use ipoi_core::chat::{ChatSession, ChatTurn, Outcome};
use ipoi_core::geofence::{process_location_update, FenceState, GeofenceConfig, LocationUpdate, NotificationRecord};
use ipoi_core::{
    validate_dish, validate_profile, validate_restaurant, Catalog, Dish, DishId, FenceId, FenceOwner, Phase,
    Restaurant, RestaurantId, SessionId, UserId, UserProfile,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ApiError, StoreError};

pub const SCHEMA_VERSION: u32 = 1;
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const LOG_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub catalog: Catalog,
    pub profiles: BTreeMap<UserId, UserProfile>,
    pub sessions: BTreeMap<SessionId, ChatSession>,
    pub fence_state: FenceState,
    pub inquiries: InquiryLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSnapshot {
    pub schema_version: u32,
    pub seq: u64,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    RestaurantPut { restaurant: Restaurant },
    RestaurantDeleted { id: RestaurantId, cascade: bool },
    DishPut { dish: Dish },
    DishDeleted { id: DishId },
    ProfilePut { profile: UserProfile },
    SessionCreated { session: ChatSession },
    PhaseSet { session_id: SessionId, phase: Phase },
    TurnRecorded { turn: ChatTurn },
    TurnAnnotated {
        position: u64,
        outcome: Outcome,
        annotated_intent: Option<String>,
    },
    CorpusImported { turns: Vec<ChatTurn> },
    LocationProcessed { update: LocationUpdate },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub event: Event,
}

/// Side results of applying an event.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    None,
    /// Log position of the first appended turn.
    Position(u64),
    Notifications(Vec<NotificationRecord>),
}

/// Settings that influence how events fold into state.
#[derive(Debug, Clone, PartialEq)]
pub struct Rules {
    pub geofence: GeofenceConfig,
    pub context_window: usize,
    pub fallback_intent: String,
}

impl Default for Rules {
    fn default() -> Self {
        Self {
            geofence: GeofenceConfig::default(),
            context_window: ipoi_core::chat::DEFAULT_CONTEXT_WINDOW,
            fallback_intent: "fallback".into(),
        }
    }
}

impl State {
    /// Applies one event. Every precondition is checked before anything is
    /// mutated, so an error leaves the state untouched.
    pub fn apply(&mut self, event: &Event, rules: &Rules) -> Result<Effect, ApiError> {
        match event {
            Event::RestaurantPut { restaurant } => {
                validate_restaurant(restaurant).map_err(ApiError::from_violations)?;
                self.check_fence_ids(
                    std::iter::once(&restaurant.default_fence.id),
                    &FenceOwner::Restaurant(restaurant.id.clone()),
                )?;
                self.catalog
                    .restaurants
                    .insert(restaurant.id.clone(), restaurant.clone());
            }
            Event::RestaurantDeleted { id, cascade } => {
                if !self.catalog.restaurants.contains_key(id) {
                    return Err(ApiError::NotFound(format!("restaurant {id}")));
                }
                let dishes: Vec<DishId> = self.catalog.dishes_of(id).map(|d| d.id.clone()).collect();
                if !dishes.is_empty() && !cascade {
                    return Err(ApiError::Conflict(format!(
                        "restaurant {id} still has {} dishes; pass cascade=true to remove them",
                        dishes.len()
                    )));
                }
                for d in &dishes {
                    self.remove_dish(d);
                }
                self.catalog.restaurants.remove(id);
            }
            Event::DishPut { dish } => {
                validate_dish(dish, &self.catalog.restaurant_ids()).map_err(ApiError::from_violations)?;
                if let Some(f) = &dish.dedicated_fence {
                    self.check_fence_ids(std::iter::once(&f.id), &FenceOwner::Dish(dish.id.clone()))?;
                }
                self.catalog.dishes.insert(dish.id.clone(), dish.clone());
            }
            Event::DishDeleted { id } => {
                if !self.catalog.dishes.contains_key(id) {
                    return Err(ApiError::NotFound(format!("dish {id}")));
                }
                self.remove_dish(id);
            }
            Event::ProfilePut { profile } => {
                validate_profile(profile).map_err(ApiError::from_violations)?;
                self.profiles.insert(profile.id.clone(), profile.clone());
            }
            Event::SessionCreated { session } => {
                if !self.profiles.contains_key(&session.user_id) {
                    return Err(ApiError::NotFound(format!("profile {}", session.user_id)));
                }
                if !self.catalog.dishes.contains_key(&session.dish_id) {
                    return Err(ApiError::NotFound(format!("dish {}", session.dish_id)));
                }
                if self.sessions.contains_key(&session.id) {
                    return Err(ApiError::Conflict(format!("session {} exists", session.id)));
                }
                self.sessions.insert(session.id.clone(), session.clone());
            }
            Event::PhaseSet { session_id, phase } => {
                self.session_mut(session_id)?.set_phase(*phase)?;
            }
            Event::TurnRecorded { turn } => {
                turn.check(&rules.fallback_intent).map_err(ApiError::BadRequest)?;
                self.session_mut(&turn.session_id)?
                    .remember(turn.clone(), rules.context_window);
                return Ok(Effect::Position(self.inquiries.record_turn(turn.clone())));
            }
            Event::TurnAnnotated {
                position,
                outcome,
                annotated_intent,
            } => {
                self.inquiries
                    .annotate_turn(*position, *outcome, annotated_intent.clone())?;
            }
            Event::CorpusImported { turns } => {
                for (i, t) in turns.iter().enumerate() {
                    t.check(&rules.fallback_intent)
                        .map_err(|e| ApiError::BadRequest(format!("turn {}: {e}", i + 1)))?;
                }
                let first = self.inquiries.len() as u64;
                for t in turns {
                    self.inquiries.record_turn(t.clone());
                }
                return Ok(Effect::Position(first));
            }
            Event::LocationProcessed { update } => {
                let profile = self
                    .profiles
                    .get(&update.user_id)
                    .ok_or_else(|| ApiError::NotFound(format!("profile {}", update.user_id)))?;
                if !update.point.is_valid() {
                    return Err(ApiError::BadRequest("invalid coordinates".into()));
                }
                let fired = process_location_update(
                    update,
                    &self.catalog,
                    profile,
                    &mut self.fence_state,
                    &rules.geofence,
                )?;
                self.inquiries.record_location(update.user_id.clone(), update.at);
                return Ok(Effect::Notifications(fired));
            }
        }
        Ok(Effect::None)
    }

    fn session_mut(&mut self, id: &SessionId) -> Result<&mut ChatSession, ApiError> {
        self.sessions
            .get_mut(id)
            .ok_or_else(|| ApiError::NotFound(format!("session {id}")))
    }

    fn remove_dish(&mut self, id: &DishId) {
        self.catalog.dishes.remove(id);
        self.sessions.retain(|_, s| &s.dish_id != id);
    }

    /// Fence ids are global; a fence may only be replaced by its own owner.
    fn check_fence_ids<'a>(
        &self,
        ids: impl Iterator<Item = &'a FenceId>,
        owner: &FenceOwner,
    ) -> Result<(), ApiError> {
        for id in ids {
            if let Some(existing) = self.catalog.fence(id) {
                if &existing.owner != owner {
                    return Err(ApiError::Conflict(format!("fence id {id} is already in use")));
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Folds events over `self`, failing on the first rejected event.
    pub fn fold<'a>(
        mut self,
        events: impl IntoIterator<Item = &'a Event>,
        rules: &Rules,
    ) -> Result<Self, (usize, ApiError)> {
        for (i, e) in events.into_iter().enumerate() {
            self.apply(e, rules).map_err(|err| (i, err))?;
        }
        Ok(self)
    }
}

/// Parses an event log. Each record must be one complete JSON line; the
/// error names the byte offset where the bad record starts.
pub fn parse_log(bytes: &[u8]) -> Result<Vec<(u64, EventRecord)>, StoreError> {
    let mut out = Vec::new();
    let mut offset = 0usize;
    while offset < bytes.len() {
        let rest = &bytes[offset..];
        let Some(end) = rest.iter().position(|b| *b == b'\n') else {
            return Err(StoreError::BadRecord {
                offset: offset as u64,
                reason: "truncated record (no trailing newline)".into(),
            });
        };
        let line = &rest[..end];
        if !line.iter().all(u8::is_ascii_whitespace) {
            let record: EventRecord = serde_json::from_slice(line).map_err(|e| StoreError::BadRecord {
                offset: offset as u64,
                reason: e.to_string(),
            })?;
            out.push((offset as u64, record));
        }
        offset += end + 1;
    }
    Ok(out)
}

pub struct Store {
    dir: PathBuf,
    state: State,
    seq: u64,
    since_snapshot: u64,
    log: File,
    rules: Rules,
    compact_every: u64,
}

impl Store {
    /// Loads the snapshot (if any) and replays the log over it.
    pub fn open(dir: &Path, rules: Rules, compact_every: u64) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
        let snap_path = dir.join(SNAPSHOT_FILE);
        let snapshot = match fs::read(&snap_path) {
            Ok(bytes) => {
                let snap: StoreSnapshot = serde_json::from_slice(&bytes)
                    .map_err(|e| StoreError::CorruptSnapshot(format!("{}: {e}", snap_path.display())))?;
                if snap.schema_version != SCHEMA_VERSION {
                    return Err(StoreError::CorruptSnapshot(format!(
                        "schema version {} (expected {SCHEMA_VERSION})",
                        snap.schema_version
                    )));
                }
                snap.state
                    .catalog
                    .check()
                    .map_err(|e| StoreError::CorruptSnapshot(e.to_string()))?;
                snap
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreSnapshot {
                schema_version: SCHEMA_VERSION,
                seq: 0,
                state: State::default(),
            },
            Err(e) => return Err(StoreError::io(&snap_path, e)),
        };

        let log_path = dir.join(LOG_FILE);
        let bytes = match fs::read(&log_path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(StoreError::io(&log_path, e)),
        };
        let mut state = snapshot.state;
        let mut seq = snapshot.seq;
        let mut since_snapshot = 0;
        for (offset, record) in parse_log(&bytes)? {
            // Left over from a compaction interrupted before truncation.
            if record.seq <= snapshot.seq {
                continue;
            }
            state.apply(&record.event, &rules).map_err(|e| StoreError::BadRecord {
                offset,
                reason: format!("event {} rejected: {e}", record.seq),
            })?;
            seq = record.seq;
            since_snapshot += 1;
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| StoreError::io(&log_path, e))?;
        Ok(Self {
            dir: dir.to_owned(),
            state,
            seq,
            since_snapshot,
            log,
            rules,
            compact_every,
        })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn rules(&self) -> &Rules {
        &self.rules
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    /// Sequence number the next committed event will carry.
    pub fn next_seq(&self) -> u64 {
        self.seq + 1
    }

    /// Applies and persists one event. Rejected events leave both memory
    /// and disk untouched.
    pub fn commit(&mut self, event: Event) -> Result<Effect, ApiError> {
        let effect = self.state.apply(&event, &self.rules)?;
        let record = EventRecord {
            seq: self.seq + 1,
            event,
        };
        if let Err(e) = self.append(&record) {
            // Memory is ahead of disk; fall back to what is durable.
            let rules = self.rules.clone();
            *self = Store::open(&self.dir, rules, self.compact_every)?;
            return Err(e.into());
        }
        self.seq = record.seq;
        self.since_snapshot += 1;
        if self.since_snapshot >= self.compact_every {
            self.compact()?;
        }
        Ok(effect)
    }

    fn append(&mut self, record: &EventRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(record).expect("event serializes");
        line.push(b'\n');
        let path = self.dir.join(LOG_FILE);
        self.log
            .write_all(&line)
            .and_then(|_| self.log.sync_data())
            .map_err(|e| StoreError::io(&path, e))
    }

    /// Writes a snapshot atomically, then truncates the log.
    pub fn compact(&mut self) -> Result<(), StoreError> {
        let snap = StoreSnapshot {
            schema_version: SCHEMA_VERSION,
            seq: self.seq,
            state: self.state.clone(),
        };
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let path = self.dir.join(SNAPSHOT_FILE);
        let bytes = serde_json::to_vec(&snap).expect("snapshot serializes");
        let write = || -> std::io::Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| StoreError::io(&path, e))?;
        let log_path = self.dir.join(LOG_FILE);
        self.log.set_len(0).map_err(|e| StoreError::io(&log_path, e))?;
        self.since_snapshot = 0;
        Ok(())
    }
}
