//! Response templates and the dynamic data they draw on.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::hours::{hhmm, LocalTime};
use crate::model::{Dish, Restaurant};

pub const PLACEHOLDERS: [&str; 9] = [
    "name",
    "nickname",
    "ingredients",
    "price",
    "allergens",
    "restaurant",
    "hours_today",
    "time",
    "food_day",
];

/// Only valid in fallback templates.
pub const SUGGESTIONS: &str = "suggestions";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoodDay {
    pub month: u32,
    pub day: u32,
    pub name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FoodDayCalendar {
    days: BTreeMap<(u32, u32), String>,
}

const SHIPPED_FOOD_DAYS: &str = include_str!("../../data/food_days.json");

impl FoodDayCalendar {
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_FOOD_DAYS).expect("shipped calendar is valid")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let entries: Vec<FoodDay> =
            serde_json::from_str(json).map_err(|e| CoreError::InvalidCalendar(e.to_string()))?;
        Self::new(entries)
    }

    pub fn new(entries: Vec<FoodDay>) -> Result<Self> {
        let mut days = BTreeMap::new();
        for e in entries {
            // leap year so Feb 29 is accepted
            if NaiveDate::from_ymd_opt(2024, e.month, e.day).is_none() {
                return Err(CoreError::InvalidCalendar(format!(
                    "invalid date {}-{}",
                    e.month, e.day
                )));
            }
            if days.insert((e.month, e.day), e.name).is_some() {
                return Err(CoreError::InvalidCalendar(format!(
                    "duplicate date {}-{}",
                    e.month, e.day
                )));
            }
        }
        Ok(Self { days })
    }

    pub fn lookup(&self, month: u32, day: u32) -> Option<&str> {
        self.days.get(&(month, day)).map(String::as_str)
    }
}

/// `a`, `a and b`, `a, b and c`.
pub fn natural_list<S: AsRef<str>>(items: &[S]) -> String {
    join_list(items, "and")
}

fn join_list<S: AsRef<str>>(items: &[S], conjunction: &str) -> String {
    match items {
        [] => String::new(),
        [one] => one.as_ref().to_owned(),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{} {conjunction} {}", head.join(", "), last.as_ref())
        }
    }
}

pub fn format_price(minor: i64) -> String {
    let sign = if minor < 0 { "-" } else { "" };
    let abs = minor.unsigned_abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn parse(template: &str) -> Result<Vec<Piece<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find(['{', '}']) {
        if rest.as_bytes()[open] == b'}' {
            return Err(format!("unmatched '}}' in \"{template}\""));
        }
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| format!("unclosed '{{' in \"{template}\""))?;
        out.push(Piece::Text(&rest[..open]));
        out.push(Piece::Slot(&rest[open + 1..open + close]));
        rest = &rest[open + close + 1..];
    }
    out.push(Piece::Text(rest));
    Ok(out)
}

/// Rejects unknown placeholders and unbalanced braces.
pub fn check_template(template: &str, fallback: bool) -> Result<(), String> {
    for piece in parse(template)? {
        if let Piece::Slot(name) = piece {
            let known = PLACEHOLDERS.contains(&name) || (fallback && name == SUGGESTIONS);
            if !known {
                return Err(format!("unknown placeholder {{{name}}}"));
            }
        }
    }
    Ok(())
}

pub struct RenderContext<'a> {
    pub dish: &'a Dish,
    pub restaurant: &'a Restaurant,
    pub at: DateTime<Utc>,
    pub calendar: &'a FoodDayCalendar,
    /// Display text of fallback suggestions.
    pub suggestions: &'a [String],
}

impl RenderContext<'_> {
    fn value(&self, slot: &str) -> Option<String> {
        let local = self.at.naive_utc() + Duration::minutes(self.restaurant.utc_offset_minutes as i64);
        let d = self.dish;
        Some(match slot {
            "name" => d.name.clone(),
            "nickname" => d.nickname.clone().unwrap_or_else(|| d.name.clone()),
            "ingredients" => natural_list(&d.ingredients),
            "price" => format_price(d.price_minor),
            "allergens" if d.allergens.is_empty() => "none".to_owned(),
            "allergens" => natural_list(&d.allergens.iter().collect::<Vec<_>>()),
            "restaurant" => self.restaurant.name.clone(),
            "hours_today" => self.restaurant.hours.describe_day(local.weekday()),
            "time" => hhmm(LocalTime::from_utc(self.at, self.restaurant.utc_offset_minutes).minute),
            "food_day" => self
                .calendar
                .lookup(local.month(), local.day())
                .unwrap_or("no special day")
                .to_owned(),
            SUGGESTIONS => {
                let quoted: Vec<String> = self.suggestions.iter().map(|s| format!("\"{s}\"")).collect();
                join_list(&quoted, "or")
            }
            _ => return None,
        })
    }
}

pub fn render(template: &str, ctx: &RenderContext<'_>) -> Result<String, String> {
    let mut out = String::with_capacity(template.len() + 32);
    for piece in parse(template)? {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(name) => out.push_str(
                &ctx.value(name)
                    .ok_or_else(|| format!("unknown placeholder {{{name}}}"))?,
            ),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{burger, restaurant};

    fn ctx_render(template: &str, dish: &Dish, at: &str) -> String {
        let r = restaurant("r1", 50.0, 8.0);
        let calendar = FoodDayCalendar::shipped();
        let ctx = RenderContext {
            dish,
            restaurant: &r,
            at: DateTime::parse_from_rfc3339(at).unwrap().to_utc(),
            calendar: &calendar,
            suggestions: &[],
        };
        render(template, &ctx).unwrap()
    }

    #[test]
    fn ingredients_and_allergens() {
        let d = burger("d1", "r1");
        let s = ctx_render("Made of {ingredients}.", &d, "2024-06-03T12:00:00Z");
        assert_eq!(
            s,
            "Made of French fries, beyond meat, sauteed onions, lettuce, tomatoes, \
             pickled gherkins, ketchup and mustard."
        );
        let s = ctx_render("I contain {allergens}.", &d, "2024-06-03T12:00:00Z");
        assert_eq!(s, "I contain gluten and mustard.");
        let mut clean = d.clone();
        clean.allergens.clear();
        assert_eq!(ctx_render("{allergens}", &clean, "2024-06-03T12:00:00Z"), "none");
    }

    #[test]
    fn nickname_falls_back_to_name() {
        let mut d = burger("d1", "r1");
        assert_eq!(ctx_render("{nickname}", &d, "2024-06-03T12:00:00Z"), "Veggie Burger");
        d.nickname = Some("Burgi".into());
        assert_eq!(ctx_render("{nickname}", &d, "2024-06-03T12:00:00Z"), "Burgi");
    }

    #[test]
    fn dynamic_fields() {
        let d = burger("d1", "r1");
        let s = ctx_render("{price} {time} {hours_today} {restaurant}", &d, "2024-06-03T08:05:00Z");
        assert_eq!(s, "12.50 08:05 00:00-23:59 Restaurant r1");
        assert_eq!(
            ctx_render("{food_day}", &d, "2024-05-28T12:00:00Z"),
            "International Burger Day"
        );
        assert_eq!(ctx_render("{food_day}", &d, "2024-05-29T12:00:00Z"), "no special day");
    }

    #[test]
    fn template_checks() {
        assert!(check_template("Hi {name}", false).is_ok());
        assert!(check_template("Hi {mood}", false).is_err());
        assert!(check_template("Try {suggestions}", false).is_err());
        assert!(check_template("Try {suggestions}", true).is_ok());
        assert!(check_template("Hi {name", false).is_err());
        assert!(check_template("Hi name}", false).is_err());
    }

    #[test]
    fn helpers() {
        assert_eq!(natural_list::<&str>(&[]), "");
        assert_eq!(natural_list(&["a"]), "a");
        assert_eq!(natural_list(&["a", "b", "c"]), "a, b and c");
        assert_eq!(format_price(1250), "12.50");
        assert_eq!(format_price(5), "0.05");
    }

    #[test]
    fn calendar_validation() {
        assert!(FoodDayCalendar::from_json(r#"[{"month":2,"day":30,"name":"x"}]"#).is_err());
        assert!(FoodDayCalendar::from_json(
            r#"[{"month":2,"day":29,"name":"x"},{"month":2,"day":29,"name":"y"}]"#
        )
        .is_err());
    }
}
