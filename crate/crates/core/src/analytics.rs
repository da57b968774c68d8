//! Append-only inquiry log and the dashboard KPIs computed from it.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::chat::{Category, ChatTurn, IntentSet, Outcome};
use crate::error::{CoreError, Result};
use crate::exec::Exec;
use crate::model::{DishId, Phase, UserId, UserProfile};

pub const TRENDING_DAYS: i64 = 7;
pub const ACTIVE_DAYS: i64 = 30;
pub const UNLABELED: &str = "unlabeled";

/// Receives every answered or imported inquiry.
pub trait TurnSink {
    fn record_turn(&mut self, turn: ChatTurn) -> u64;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InquiryLog {
    turns: Vec<ChatTurn>,
    locations: Vec<(UserId, DateTime<Utc>)>,
}

impl TurnSink for InquiryLog {
    fn record_turn(&mut self, turn: ChatTurn) -> u64 {
        self.turns.push(turn);
        (self.turns.len() - 1) as u64
    }
}

impl InquiryLog {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn get(&self, position: u64) -> Option<&ChatTurn> {
        self.turns.get(usize::try_from(position).ok()?)
    }

    pub fn turns(&self) -> &[ChatTurn] {
        &self.turns
    }

    pub fn record_location(&mut self, user: UserId, at: DateTime<Utc>) {
        self.locations.push((user, at));
    }

    /// Sets reviewer labels. Fallback turns keep their fallback outcome and
    /// may only gain an intended intent.
    pub fn annotate_turn(
        &mut self,
        position: u64,
        outcome: Outcome,
        annotated_intent: Option<String>,
    ) -> Result<&ChatTurn> {
        let turn = usize::try_from(position)
            .ok()
            .and_then(|p| self.turns.get_mut(p))
            .ok_or(CoreError::UnknownPosition(position))?;
        let was_fallback = turn.outcome == Some(Outcome::Fallback);
        if was_fallback != (outcome == Outcome::Fallback) {
            return Err(if was_fallback {
                CoreError::FallbackImmutable(position)
            } else {
                CoreError::InvalidAnnotation("fallback outcome is assigned by the matcher".into())
            });
        }
        turn.outcome = Some(outcome);
        if annotated_intent.is_some() {
            turn.annotated_intent = annotated_intent;
        }
        Ok(turn)
    }
}

/// Inclusive time window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
}

impl Window {
    pub fn new(from: DateTime<Utc>, to: DateTime<Utc>) -> Result<Self> {
        if from > to {
            return Err(CoreError::EmptyWindow);
        }
        Ok(Self { from, to })
    }

    /// Covers every representable timestamp.
    pub fn all() -> Self {
        Self {
            from: DateTime::<Utc>::MIN_UTC,
            to: DateTime::<Utc>::MAX_UTC,
        }
    }

    pub fn contains(&self, at: DateTime<Utc>) -> bool {
        self.from <= at && at <= self.to
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTotals {
    pub entertainment: u64,
    pub information_advice: u64,
    pub control: u64,
    /// Fallback turns without an annotated intent.
    pub uncategorized: u64,
}

impl CategoryTotals {
    fn add(&mut self, category: Option<Category>) {
        match category {
            Some(Category::Entertainment) => self.entertainment += 1,
            Some(Category::InformationAdvice) => self.information_advice += 1,
            Some(Category::Control) => self.control += 1,
            Some(Category::Fallback) | None => self.uncategorized += 1,
        }
    }

    fn merge(&mut self, other: &Self) {
        self.entertainment += other.entertainment;
        self.information_advice += other.information_advice;
        self.control += other.control;
        self.uncategorized += other.uncategorized;
    }

    pub fn total(&self) -> u64 {
        self.entertainment + self.information_advice + self.control + self.uncategorized
    }
}

/// Category a turn counts under: its matched intent's category, or for
/// fallback matches the category of the reviewer-annotated intent.
pub fn turn_category(turn: &ChatTurn, intents: &IntentSet) -> Option<Category> {
    let name = if turn.matched_intent == intents.fallback().name {
        turn.annotated_intent.as_deref()?
    } else {
        &turn.matched_intent
    };
    intents
        .category_of(name)
        .filter(|c| *c != Category::Fallback)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DishCount {
    pub dish_id: DishId,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendingDish {
    pub dish_id: DishId,
    pub recent: u64,
    pub prior: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub window: Window,
    pub total_inquiries: u64,
    pub responded: u64,
    pub fallback_count: u64,
    /// Absent when the window holds no inquiries.
    pub fallback_rate_pct: Option<f64>,
    pub outcome_totals: BTreeMap<String, u64>,
    pub category_totals: CategoryTotals,
    pub phase_totals: BTreeMap<Phase, u64>,
    pub most_talked_to: Vec<DishCount>,
    pub most_popular: Vec<DishCount>,
    pub trending_local: Vec<TrendingDish>,
    pub registered_users: u64,
    pub active_users: u64,
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[derive(Default)]
struct Tally<'a> {
    total: u64,
    responded: u64,
    fallback: u64,
    outcomes: BTreeMap<Option<Outcome>, u64>,
    categories: CategoryTotals,
    phases: BTreeMap<Phase, u64>,
    dishes: HashMap<&'a DishId, (u64, HashSet<&'a UserId>)>,
    recent: HashMap<&'a DishId, u64>,
    prior: HashMap<&'a DishId, u64>,
}

impl<'a> Tally<'a> {
    fn merge(mut self, other: Tally<'a>) -> Self {
        self.total += other.total;
        self.responded += other.responded;
        self.fallback += other.fallback;
        for (k, v) in other.outcomes {
            *self.outcomes.entry(k).or_default() += v;
        }
        self.categories.merge(&other.categories);
        for (k, v) in other.phases {
            *self.phases.entry(k).or_default() += v;
        }
        for (k, (n, users)) in other.dishes {
            let e = self.dishes.entry(k).or_default();
            e.0 += n;
            e.1.extend(users);
        }
        for (k, v) in other.recent {
            *self.recent.entry(k).or_default() += v;
        }
        for (k, v) in other.prior {
            *self.prior.entry(k).or_default() += v;
        }
        self
    }
}

fn ranked(mut counts: Vec<DishCount>) -> Vec<DishCount> {
    counts.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.dish_id.cmp(&b.dish_id)));
    counts
}

pub fn kpi_report(
    log: &InquiryLog,
    catalog: &Catalog,
    profiles: &[UserProfile],
    intents: &IntentSet,
    window: Window,
    exec: Exec,
) -> Result<KpiReport> {
    if window.from > window.to {
        return Err(CoreError::EmptyWindow);
    }
    let fallback_name = intents.fallback().name.as_str();
    let trend = Duration::days(TRENDING_DAYS);
    let recent_start = window.to.checked_sub_signed(trend).unwrap_or(DateTime::<Utc>::MIN_UTC);
    let prior_start = recent_start.checked_sub_signed(trend).unwrap_or(DateTime::<Utc>::MIN_UTC);

    let tally = exec.fold(
        log.turns(),
        Tally::default,
        |mut t, turn| {
            if !window.contains(turn.at) {
                return t;
            }
            t.total += 1;
            t.responded += u64::from(turn.responded);
            t.fallback += u64::from(turn.matched_intent == fallback_name);
            *t.outcomes.entry(turn.outcome).or_default() += 1;
            t.categories.add(turn_category(turn, intents));
            *t.phases.entry(turn.phase).or_default() += 1;
            let e = t.dishes.entry(&turn.dish_id).or_default();
            e.0 += 1;
            e.1.insert(&turn.user_id);
            if turn.at > recent_start {
                *t.recent.entry(&turn.dish_id).or_default() += 1;
            } else if turn.at > prior_start {
                *t.prior.entry(&turn.dish_id).or_default() += 1;
            }
            t
        },
        Tally::merge,
    );

    let mut outcome_totals: BTreeMap<String, u64> = Outcome::ALL
        .iter()
        .map(|o| (o.as_str().to_owned(), 0))
        .collect();
    outcome_totals.insert(UNLABELED.to_owned(), 0);
    for (o, n) in &tally.outcomes {
        let key = o.map_or(UNLABELED, |o| o.as_str());
        *outcome_totals.get_mut(key).expect("all labels present") += n;
    }
    let mut phase_totals: BTreeMap<Phase, u64> = Phase::ALL.iter().map(|p| (*p, 0)).collect();
    for (p, n) in &tally.phases {
        phase_totals.insert(*p, *n);
    }

    let most_talked_to = ranked(
        tally
            .dishes
            .iter()
            .map(|(d, (n, _))| DishCount {
                dish_id: (*d).clone(),
                count: *n,
            })
            .collect(),
    );
    let most_popular = ranked(
        tally
            .dishes
            .iter()
            .map(|(d, (_, users))| DishCount {
                dish_id: (*d).clone(),
                count: users.len() as u64,
            })
            .collect(),
    );

    let mut trending_local: Vec<TrendingDish> = catalog
        .dishes
        .values()
        .filter(|d| d.local)
        .map(|d| TrendingDish {
            dish_id: d.id.clone(),
            recent: tally.recent.get(&d.id).copied().unwrap_or(0),
            prior: tally.prior.get(&d.id).copied().unwrap_or(0),
        })
        .filter(|t| t.recent + t.prior > 0)
        .collect();
    trending_local.sort_by(|a, b| {
        let delta = |t: &TrendingDish| t.recent as i64 - t.prior as i64;
        delta(b)
            .cmp(&delta(a))
            .then_with(|| b.recent.cmp(&a.recent))
            .then_with(|| a.dish_id.cmp(&b.dish_id))
    });

    let active_since = window
        .to
        .checked_sub_signed(Duration::days(ACTIVE_DAYS))
        .unwrap_or(DateTime::<Utc>::MIN_UTC);
    let active = |at: DateTime<Utc>| active_since <= at && at <= window.to;
    let active_users: BTreeSet<&UserId> = log
        .turns
        .iter()
        .filter(|t| active(t.at))
        .map(|t| &t.user_id)
        .chain(log.locations.iter().filter(|(_, at)| active(*at)).map(|(u, _)| u))
        .collect();

    Ok(KpiReport {
        window,
        total_inquiries: tally.total,
        responded: tally.responded,
        fallback_count: tally.fallback,
        fallback_rate_pct: (tally.total > 0)
            .then(|| round1(100.0 * tally.fallback as f64 / tally.total as f64)),
        outcome_totals,
        category_totals: tally.categories,
        phase_totals,
        most_talked_to,
        most_popular,
        trending_local,
        registered_users: profiles.iter().filter(|p| p.registered).count() as u64,
        active_users: active_users.len() as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub intended: String,
    pub matched: String,
    pub count: u64,
}

/// Intended (annotated) versus matched intent counts over annotated turns.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentMatrix {
    pub cells: Vec<MatrixCell>,
}

impl IntentMatrix {
    pub fn total(&self) -> u64 {
        self.cells.iter().map(|c| c.count).sum()
    }

    pub fn diagonal(&self) -> u64 {
        self.cells
            .iter()
            .filter(|c| c.intended == c.matched)
            .map(|c| c.count)
            .sum()
    }

    pub fn get(&self, intended: &str, matched: &str) -> u64 {
        self.cells
            .iter()
            .find(|c| c.intended == intended && c.matched == matched)
            .map_or(0, |c| c.count)
    }
}

pub fn intent_matrix(log: &InquiryLog, window: Window) -> IntentMatrix {
    let mut cells: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for t in log.turns.iter().filter(|t| window.contains(t.at)) {
        if let Some(intended) = &t.annotated_intent {
            *cells.entry((intended, &t.matched_intent)).or_default() += 1;
        }
    }
    IntentMatrix {
        cells: cells
            .into_iter()
            .map(|((i, m), count)| MatrixCell {
                intended: i.to_owned(),
                matched: m.to_owned(),
                count,
            })
            .collect(),
    }
}

/// In-window turns bucketed by phase and category.
pub fn phase_histogram(
    log: &InquiryLog,
    intents: &IntentSet,
    window: Window,
) -> BTreeMap<Phase, CategoryTotals> {
    let mut out: BTreeMap<Phase, CategoryTotals> =
        Phase::ALL.iter().map(|p| (*p, CategoryTotals::default())).collect();
    for t in log.turns.iter().filter(|t| window.contains(t.at)) {
        out.entry(t.phase)
            .or_default()
            .add(turn_category(t, intents));
    }
    out
}
