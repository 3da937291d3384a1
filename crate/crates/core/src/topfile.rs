//! Document-grounded negotiation games ("topfiles").
//!
//! A topfile names countries, their actions, a canonical goal list, per-country goal
//! valuations, thresholded goal satisfaction tuples and optional mutually exclusive
//! agreement sets. Each (goal, threshold level) becomes a linear sub-goal over that
//! level's (country, action) tuples and carries an equal share of every country's
//! valuation of the goal.

use crate::error::{Error, Result};
use crate::model::{Game, GameDef, Goal, GoalKind, Provenance, Slot};
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryData {
    /// Integer valuation per goal name; missing goals are worth 0.
    #[serde(default)]
    pub goals_value: BTreeMap<String, i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountryAction {
    pub country: String,
    pub action: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatisfactionTuple {
    pub goal: String,
    pub threshold: u32,
    pub country: String,
    pub action: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub countries: Vec<String>,
    pub country_actions: BTreeMap<String, Vec<String>>,
    pub goals: Vec<String>,
    pub country_data: BTreeMap<String, CountryData>,
    pub goal_satisfaction: Vec<SatisfactionTuple>,
    #[serde(default)]
    pub mutually_exclusive_agreements: Vec<Vec<CountryAction>>,
}

fn unique<'a>(names: impl Iterator<Item = &'a String>, what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::validation(format!("duplicate {what} {n:?}")));
        }
    }
    Ok(())
}

impl Topfile {
    pub fn validate(&self) -> Result<()> {
        if self.countries.len() < 2 {
            return Err(Error::validation("a topfile needs at least 2 countries"));
        }
        unique(self.countries.iter(), "country")?;
        unique(self.goals.iter(), "goal")?;
        let countries: HashSet<&str> = self.countries.iter().map(String::as_str).collect();
        let goals: HashSet<&str> = self.goals.iter().map(String::as_str).collect();

        for c in &self.countries {
            let actions = self
                .country_actions
                .get(c)
                .ok_or_else(|| Error::validation(format!("country {c:?} has no country_actions entry")))?;
            unique(actions.iter(), &format!("action of {c:?}"))?;
        }
        for c in self.country_actions.keys() {
            if !countries.contains(c.as_str()) {
                return Err(Error::validation(format!("country_actions names undeclared country {c:?}")));
            }
        }
        for (c, data) in &self.country_data {
            if !countries.contains(c.as_str()) {
                return Err(Error::validation(format!("country_data names undeclared country {c:?}")));
            }
            for g in data.goals_value.keys() {
                if !goals.contains(g.as_str()) {
                    return Err(Error::validation(format!("goals_value of {c:?} names undeclared goal {g:?}")));
                }
            }
        }

        let resolve = |country: &str, action: &str, ctx: &str| -> Result<()> {
            let actions = self
                .country_actions
                .get(country)
                .filter(|_| countries.contains(country))
                .ok_or_else(|| Error::validation(format!("{ctx} names undeclared country {country:?}")))?;
            if !actions.iter().any(|a| a == action) {
                return Err(Error::validation(format!(
                    "{ctx} names undeclared action {action:?} of {country:?}"
                )));
            }
            Ok(())
        };

        let mut last_level: HashMap<&str, u32> = HashMap::new();
        let mut seen = HashSet::new();
        for (i, t) in self.goal_satisfaction.iter().enumerate() {
            let ctx = format!("goal_satisfaction[{i}]");
            if !goals.contains(t.goal.as_str()) {
                return Err(Error::validation(format!("{ctx} names undeclared goal {:?}", t.goal)));
            }
            resolve(&t.country, &t.action, &ctx)?;
            if t.threshold < 1 {
                return Err(Error::validation(format!("{ctx} has threshold 0; levels start at 1")));
            }
            let last = last_level.entry(t.goal.as_str()).or_insert(t.threshold);
            if t.threshold < *last {
                return Err(Error::validation(format!(
                    "{ctx}: thresholds of goal {:?} decrease ({} after {})",
                    t.goal, t.threshold, *last
                )));
            }
            *last = t.threshold;
            if !seen.insert((&t.goal, t.threshold, &t.country, &t.action)) {
                return Err(Error::validation(format!("{ctx} duplicates an earlier tuple")));
            }
        }

        for (i, set) in self.mutually_exclusive_agreements.iter().enumerate() {
            let ctx = format!("mutually_exclusive_agreements[{i}]");
            if set.len() < 2 {
                return Err(Error::validation(format!("{ctx} has fewer than 2 members")));
            }
            let mut members = HashSet::new();
            for m in set {
                resolve(&m.country, &m.action, &ctx)?;
                if !members.insert(m) {
                    return Err(Error::validation(format!("{ctx} lists {}:{} twice", m.country, m.action)));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("topfile serializes");
        s.push('\n');
        s
    }
}

/// Parses and validates a topfile document.
pub fn parse_topfile(document: &str) -> Result<Topfile> {
    let tf: Topfile = serde_json::from_str(document)?;
    tf.validate()?;
    Ok(tf)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubGoalName {
    pub id: usize,
    pub goal: String,
    pub threshold: u32,
}

/// Human-readable names for the dense indices of a converted game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameTable {
    pub players: Vec<String>,
    pub actions: Vec<Vec<String>>,
    pub goals: Vec<SubGoalName>,
    /// Exclusion sets as (country, action) names.
    pub exclusions: Vec<Vec<CountryAction>>,
    /// Goals dropped because no satisfaction tuple references them.
    pub unreferenced_goals: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Converted {
    pub game: Game,
    pub names: NameTable,
}

/// Converts a validated topfile into a game plus its name sidecar.
pub fn topfile_to_game(tf: &Topfile, id: &str) -> Result<Converted> {
    tf.validate()?;
    let player_of: HashMap<&str, usize> = tf.countries.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let actions: Vec<Vec<String>> = tf.countries.iter().map(|c| tf.country_actions[c].clone()).collect();
    let slot = |country: &str, action: &str| -> Slot {
        let p = player_of[country];
        Slot::new(p, actions[p].iter().position(|a| a == action).expect("validated action"))
    };

    // Required slots per goal and threshold level.
    let mut levels: BTreeMap<&str, BTreeMap<u32, Vec<Slot>>> = BTreeMap::new();
    for t in &tf.goal_satisfaction {
        let s = slot(&t.country, &t.action);
        let req = levels.entry(t.goal.as_str()).or_default().entry(t.threshold).or_default();
        if !req.contains(&s) {
            req.push(s);
        }
    }
    let scale = levels.values().fold(1i64, |acc, l| acc.lcm(&(l.len() as i64)));

    let mut goals = Vec::new();
    let mut utilities = Vec::new();
    let mut names = Vec::new();
    let mut unreferenced = Vec::new();
    for goal in &tf.goals {
        let Some(goal_levels) = levels.get(goal.as_str()) else {
            if tf.country_data.values().any(|d| d.goals_value.get(goal).copied().unwrap_or(0) != 0) {
                log::warn!("goal {goal:?} has valuations but no satisfaction tuples; it carries no weight");
            }
            unreferenced.push(goal.clone());
            continue;
        };
        let share = scale / goal_levels.len() as i64;
        let row: Vec<i64> = tf
            .countries
            .iter()
            .map(|c| {
                let v = tf.country_data.get(c).and_then(|d| d.goals_value.get(goal)).copied().unwrap_or(0);
                v.checked_mul(share)
                    .ok_or_else(|| Error::validation(format!("valuation of {goal:?} by {c:?} overflows")))
            })
            .collect::<Result<_>>()?;
        for (&threshold, required) in goal_levels {
            let mut required = required.clone();
            required.sort();
            names.push(SubGoalName {
                id: goals.len(),
                goal: goal.clone(),
                threshold,
            });
            goals.push(Goal {
                id: goals.len(),
                kind: GoalKind::Linear,
                required,
            });
            utilities.push(row.clone());
        }
    }
    if goals.is_empty() {
        return Err(Error::validation("topfile has no goal with satisfaction tuples"));
    }
    let exclusions = tf
        .mutually_exclusive_agreements
        .iter()
        .map(|set| set.iter().map(|m| slot(&m.country, &m.action)).collect())
        .collect();
    let game = Game::new(GameDef {
        num_players: tf.countries.len(),
        actions_per_player: actions.iter().map(Vec::len).collect(),
        goals,
        utilities,
        utility_scale: scale,
        exclusions,
        provenance: Provenance::Topfile { id: id.to_string() },
    })?;
    Ok(Converted {
        game,
        names: NameTable {
            players: tf.countries.clone(),
            actions,
            goals: names,
            exclusions: tf.mutually_exclusive_agreements.clone(),
            unreferenced_goals: unreferenced,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;

    fn minimal() -> Topfile {
        parse_topfile(
            r#"{
              "countries": ["A", "B"],
              "country_actions": {"A": ["x"], "B": ["y"]},
              "goals": ["g"],
              "country_data": {"A": {"goals_value": {"g": 9}}},
              "goal_satisfaction": [{"goal": "g", "threshold": 1, "country": "A", "action": "x"}]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn minimal_document_converts() {
        let tf = minimal();
        let c = topfile_to_game(&tf, "min").unwrap();
        assert_eq!(c.game.num_players(), 2);
        assert_eq!(c.game.num_goals(), 1);
        assert_eq!(c.game.utility(0, 0), 9);
        assert_eq!(c.game.utility_scale(), 1);
        assert_eq!(parse_topfile(&tf.to_json()).unwrap(), tf);
    }

    #[test]
    fn levels_split_value_equally() {
        let mut tf = minimal();
        tf.country_actions.insert("A".into(), vec!["x".into(), "x2".into(), "x3".into()]);
        tf.goal_satisfaction = (1..=3)
            .map(|lvl| SatisfactionTuple {
                goal: "g".into(),
                threshold: lvl,
                country: "A".into(),
                action: ["x", "x2", "x3"][lvl as usize - 1].into(),
            })
            .collect();
        let c = topfile_to_game(&tf, "lvl").unwrap();
        assert_eq!(c.game.num_goals(), 3);
        let total: Rational = (0..3)
            .map(|g| Rational::new(c.game.utility(g, 0) as i128, c.game.utility_scale() as i128))
            .sum();
        assert_eq!(total, Rational::from_integer(9));
        assert_eq!(Rational::new(c.game.utility(0, 0) as i128, c.game.utility_scale() as i128), Rational::from_integer(3));
    }

    #[test]
    fn bad_references_are_rejected() {
        let mut tf = minimal();
        tf.goal_satisfaction[0].country = "Z".into();
        let err = tf.validate().unwrap_err().to_string();
        assert!(err.contains("\"Z\""), "{err}");

        let mut tf = minimal();
        tf.country_actions.insert("B".into(), vec!["y".into(), "y".into()]);
        assert!(tf.validate().is_err());

        let mut tf = minimal();
        tf.mutually_exclusive_agreements = vec![vec![CountryAction {
            country: "A".into(),
            action: "x".into(),
        }]];
        assert!(tf.validate().is_err());
    }
}
