use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use ipoi_core::analytics::{KpiReport, UNLABELED};
use ipoi_core::chat::{ChatTurn, Outcome};
use ipoi_core::Phase;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::client::Client;
use crate::error::CliError;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn str_field<'a>(v: &'a Value, key: &str) -> &'a str {
    v[key].as_str().unwrap_or_default()
}

// ---- seed ----

/// Catalog seed. Restaurants get their default fence server-side; `fences`
/// adds dedicated dish fences.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedFile {
    pub restaurants: Vec<Value>,
    pub dishes: Vec<Value>,
    pub fences: Vec<Value>,
    pub profiles: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SeedSummary {
    pub restaurants: usize,
    pub dishes: usize,
    pub fences: usize,
    pub profiles: usize,
}

/// Checks references inside the seed before anything is sent.
pub fn check_seed(seed: &SeedFile, existing_restaurants: &BTreeSet<String>) -> Result<(), CliError> {
    let mut restaurants = existing_restaurants.clone();
    restaurants.extend(seed.restaurants.iter().map(|r| str_field(r, "id").to_owned()));
    let mut dishes = BTreeSet::new();
    for d in &seed.dishes {
        let rid = str_field(d, "restaurant_id");
        if !restaurants.contains(rid) {
            return Err(CliError::Invalid(format!(
                "dish {}: restaurant_id: dangling restaurant '{rid}'",
                str_field(d, "id")
            )));
        }
        dishes.insert(str_field(d, "id"));
    }
    for f in &seed.fences {
        let did = str_field(f, "dish_id");
        if !dishes.contains(did) {
            return Err(CliError::Invalid(format!("fence for dish '{did}': dangling dish")));
        }
    }
    Ok(())
}

pub fn cmd_seed(client: &Client, path: &Path, out: &mut dyn Write) -> Result<SeedSummary, CliError> {
    let seed: SeedFile = read_json(path)?;
    let existing: BTreeSet<String> = client
        .get("/restaurants")?
        .as_array()
        .map(|rs| rs.iter().map(|r| str_field(r, "id").to_owned()).collect())
        .unwrap_or_default();
    check_seed(&seed, &existing)?;

    let mut summary = SeedSummary::default();
    for r in &seed.restaurants {
        client.post("/restaurants", r)?;
        summary.restaurants += 1;
        summary.fences += 1;
    }
    for d in &seed.dishes {
        client.post(&format!("/restaurants/{}/dishes", str_field(d, "restaurant_id")), d)?;
        summary.dishes += 1;
    }
    for f in &seed.fences {
        client.post("/geofences", f)?;
        summary.fences += 1;
    }
    for p in &seed.profiles {
        client.put(&format!("/profiles/{}", str_field(p, "id")), p)?;
        summary.profiles += 1;
    }
    writeln!(
        out,
        "{} restaurants, {} dishes, {} fences",
        summary.restaurants, summary.dishes, summary.fences
    )?;
    if summary.profiles > 0 {
        writeln!(out, "{} profiles", summary.profiles)?;
    }
    Ok(summary)
}

// ---- walk ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WalkStep {
    Location { lat: f64, lon: f64, at: DateTime<Utc> },
    Phase { phase: Phase, at: DateTime<Utc> },
}

impl WalkStep {
    pub fn at(&self) -> DateTime<Utc> {
        match self {
            WalkStep::Location { at, .. } | WalkStep::Phase { at, .. } => *at,
        }
    }
}

/// A scripted guest walk. Phase steps apply to a chat session with
/// `session_dish`, opened at the first phase step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkScript {
    pub profile: String,
    #[serde(default)]
    pub session_dish: Option<String>,
    pub steps: Vec<WalkStep>,
}

impl WalkScript {
    pub fn check(&self) -> Result<(), CliError> {
        if let Some(i) = self.steps.windows(2).position(|w| w[1].at() <= w[0].at()) {
            return Err(CliError::Invalid(format!(
                "step {}: timestamps must be strictly increasing",
                i + 2
            )));
        }
        let has_phase = self.steps.iter().any(|s| matches!(s, WalkStep::Phase { .. }));
        if has_phase && self.session_dish.is_none() {
            return Err(CliError::Invalid("phase steps need a session_dish".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WalkOptions<'a> {
    pub profile: Option<&'a str>,
    pub mute: bool,
    pub seed: Option<u64>,
}

/// Makes sure the profile exists, creating a permissive guest if needed.
fn ensure_profile(client: &Client, id: &str) -> Result<Value, CliError> {
    match client.get(&format!("/profiles/{id}")) {
        Err(CliError::Rejected { status: 404, .. }) => client.put(&format!("/profiles/{id}"), &json!({})),
        other => other,
    }
}

pub fn cmd_walk(
    client: &Client,
    script: &WalkScript,
    opts: WalkOptions<'_>,
    out: &mut dyn Write,
) -> Result<Vec<Value>, CliError> {
    script.check()?;
    let profile_id = opts.profile.unwrap_or(&script.profile);
    let profile = ensure_profile(client, profile_id)?;
    let profile_path = format!("/profiles/{profile_id}");
    if opts.mute {
        let until = script.steps.last().map(WalkStep::at);
        client.patch(&profile_path, &json!({ "muted_until": until }))?;
    }
    let result = walk_steps(client, script, profile_id, opts.seed, out);
    if opts.mute {
        client.patch(&profile_path, &json!({ "muted_until": profile["muted_until"] }))?;
    }
    result
}

fn walk_steps(
    client: &Client,
    script: &WalkScript,
    profile_id: &str,
    seed: Option<u64>,
    out: &mut dyn Write,
) -> Result<Vec<Value>, CliError> {
    let mut names: BTreeMap<String, String> = BTreeMap::new();
    let mut session: Option<String> = None;
    let mut fired = Vec::new();
    for step in &script.steps {
        match step {
            WalkStep::Location { lat, lon, at } => {
                let resp = client.post(
                    "/location",
                    &json!({ "user_id": profile_id, "lat": lat, "lon": lon, "at": at }),
                )?;
                for n in resp["notifications"].as_array().into_iter().flatten() {
                    let dish_id = str_field(n, "dish_id").to_owned();
                    if !names.contains_key(&dish_id) {
                        let dish = client.get(&format!("/dishes/{dish_id}"))?;
                        names.insert(dish_id.clone(), str_field(&dish, "name").to_owned());
                    }
                    writeln!(
                        out,
                        "{}  notify  {} ({:.0} m): {}",
                        at.to_rfc3339(),
                        names[&dish_id],
                        n["distance_m"].as_f64().unwrap_or_default(),
                        str_field(n, "message")
                    )?;
                    fired.push(n.clone());
                }
            }
            WalkStep::Phase { phase, at } => {
                let sid = match &session {
                    Some(s) => s.clone(),
                    None => {
                        let mut body = json!({
                            "user_id": profile_id,
                            "dish_id": script.session_dish,
                            "at": at,
                        });
                        if let Some(seed) = seed {
                            body["seed"] = json!(seed);
                        }
                        let s = client.post("/sessions", &body)?;
                        session.insert(str_field(&s, "id").to_owned()).clone()
                    }
                };
                client.post(&format!("/sessions/{sid}/phase"), &json!({ "phase": phase }))?;
                writeln!(out, "{}  phase   {phase}", at.to_rfc3339())?;
            }
        }
    }
    writeln!(out, "{} notifications", fired.len())?;
    Ok(fired)
}

// ---- chat ----

#[derive(Debug, Clone, Default)]
pub struct ChatOptions<'a> {
    pub profile: Option<&'a str>,
    pub seed: Option<u64>,
}

/// Interactive chat with one dish. Lines starting with `/` are commands:
/// `/phase <name>` and `/quit`. Returns the number of messages sent.
pub fn cmd_chat(
    client: &Client,
    dish_id: &str,
    opts: ChatOptions<'_>,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<usize, CliError> {
    let dish = client.get(&format!("/dishes/{dish_id}"))?;
    let user = match opts.profile {
        Some(id) => str_field(&ensure_profile(client, id)?, "id").to_owned(),
        None => str_field(&client.post("/profiles", &json!({}))?, "id").to_owned(),
    };
    let mut body = json!({ "user_id": user, "dish_id": dish_id });
    if let Some(seed) = opts.seed {
        body["seed"] = json!(seed);
    }
    let session = client.post("/sessions", &body)?;
    let sid = str_field(&session, "id").to_owned();
    let who = dish["nickname"].as_str().unwrap_or(str_field(&dish, "name"));
    writeln!(
        out,
        "Chatting with {who} ({}). Commands: /phase <name>, /quit",
        str_field(&session, "voice")
    )?;

    let mut sent = 0;
    let mut line = String::new();
    loop {
        write!(out, "> ")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == "/quit" {
            break;
        }
        if let Some(arg) = text.strip_prefix("/phase") {
            let phase = arg.trim();
            match client.post(&format!("/sessions/{sid}/phase"), &json!({ "phase": phase })) {
                Ok(s) => writeln!(out, "phase set to {}", str_field(&s, "phase"))?,
                Err(CliError::Rejected { detail, .. }) => writeln!(out, "cannot set phase: {detail}")?,
                Err(e) => return Err(e),
            }
            continue;
        }
        if text.starts_with('/') {
            writeln!(out, "unknown command {text}")?;
            continue;
        }
        let reply = client.post(&format!("/sessions/{sid}/messages"), &json!({ "text": text }))?;
        sent += 1;
        writeln!(
            out,
            "[{}] {}",
            str_field(&reply, "matched_intent"),
            str_field(&reply, "response_text")
        )?;
        if let Some(s) = reply["suggestions"].as_array().filter(|s| !s.is_empty()) {
            let names: Vec<&str> = s.iter().filter_map(Value::as_str).collect();
            writeln!(out, "  suggestions: {}", names.join(", "))?;
        }
    }
    Ok(sent)
}

// ---- corpus replay ----

/// Parses and checks a corpus locally so a bad file never reaches the server.
pub fn read_corpus(path: &Path) -> Result<(String, Vec<ChatTurn>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let turns = ipoi_gateway::api::parse_corpus(&text).map_err(CliError::Invalid)?;
    Ok((text, turns))
}

pub fn cmd_replay_corpus(client: &Client, path: &Path, out: &mut dyn Write) -> Result<KpiReport, CliError> {
    let (text, turns) = read_corpus(path)?;
    if !turns.is_empty() {
        client.post_text("/analytics/corpus", text)?;
    }
    let query = match (turns.iter().map(|t| t.at).min(), turns.iter().map(|t| t.at).max()) {
        (Some(from), Some(to)) => format!(
            "?from={}&to={}",
            from.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            to.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        ),
        _ => String::new(),
    };
    let report: KpiReport = serde_json::from_value(client.get(&format!("/kpis{query}"))?)
        .map_err(|e| CliError::Connectivity(format!("unexpected KPI payload: {e}")))?;
    out.write_all(format_report(&report).as_bytes())?;
    Ok(report)
}

pub fn format_report(r: &KpiReport) -> String {
    let mut s = String::new();
    let rate = r
        .fallback_rate_pct
        .map_or_else(|| "n/a".to_owned(), |p| format!("{p:.1}%"));
    let _ = writeln!(s, "inquiries: {}", r.total_inquiries);
    let _ = writeln!(s, "responded: {}", r.responded);
    let _ = writeln!(s, "fallback rate: {rate}");
    let outcomes: Vec<String> = Outcome::ALL
        .iter()
        .map(|o| o.as_str())
        .chain([UNLABELED])
        .map(|k| format!("{k} {}", r.outcome_totals.get(k).copied().unwrap_or(0)))
        .collect();
    let _ = writeln!(s, "outcomes: {}", outcomes.join(", "));
    let c = &r.category_totals;
    let _ = writeln!(
        s,
        "categories: entertainment {}, information_advice {}, control {}, uncategorized {}",
        c.entertainment, c.information_advice, c.control, c.uncategorized
    );
    let phases: Vec<String> = Phase::ALL
        .iter()
        .map(|p| format!("{p} {}", r.phase_totals.get(p).copied().unwrap_or(0)))
        .collect();
    let _ = writeln!(s, "phases: {}", phases.join(", "));
    let ranked = |xs: &[ipoi_core::analytics::DishCount]| {
        if xs.is_empty() {
            return "-".to_owned();
        }
        xs.iter()
            .take(5)
            .map(|d| format!("{} ({})", d.dish_id, d.count))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let _ = writeln!(s, "most talked to: {}", ranked(&r.most_talked_to));
    let _ = writeln!(s, "most popular: {}", ranked(&r.most_popular));
    let trending: Vec<String> = r
        .trending_local
        .iter()
        .take(5)
        .map(|t| format!("{} ({} vs {})", t.dish_id, t.recent, t.prior))
        .collect();
    let _ = writeln!(
        s,
        "trending local: {}",
        if trending.is_empty() { "-".to_owned() } else { trending.join(", ") }
    );
    let _ = writeln!(s, "registered users: {}", r.registered_users);
    let _ = writeln!(s, "active users: {}", r.active_users);
    s
}
