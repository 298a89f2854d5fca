use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Pairs (a, b) such that b immediately follows a in some trace.
pub fn directly_follows<S: AsRef<str>>(traces: &[Vec<S>]) -> BTreeSet<(String, String)> {
    traces
        .iter()
        .flat_map(|t| t.windows(2))
        .map(|w| (w[0].as_ref().to_string(), w[1].as_ref().to_string()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "->")]
    Causal,
    #[serde(rename = "<-")]
    ReverseCausal,
    #[serde(rename = "||")]
    Parallel,
    #[serde(rename = "#")]
    Unrelated,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Causal => "->",
            Relation::ReverseCausal => "<-",
            Relation::Parallel => "||",
            Relation::Unrelated => "#",
        }
    }

    pub fn inverse(self) -> Self {
        match self {
            Relation::Causal => Relation::ReverseCausal,
            Relation::ReverseCausal => Relation::Causal,
            other => other,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    /// Sorted activity names.
    pub activities: Vec<String>,
    relations: BTreeMap<(String, String), Relation>,
}

impl Footprint {
    pub fn relation(&self, a: &str, b: &str) -> Option<Relation> {
        self.relations.get(&(a.to_string(), b.to_string())).copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str, Relation)> {
        self.relations
            .iter()
            .map(|((a, b), r)| (a.as_str(), b.as_str(), *r))
    }

    pub fn is_causal(&self, a: &str, b: &str) -> bool {
        self.relation(a, b) == Some(Relation::Causal)
    }

    pub fn is_unrelated(&self, a: &str, b: &str) -> bool {
        self.relation(a, b) == Some(Relation::Unrelated)
    }

    /// Text matrix, one row per activity.
    pub fn render(&self) -> String {
        let width = self
            .activities
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(2);
        let mut out = format!("{:width$}", "");
        for b in &self.activities {
            out.push_str(&format!(" {b:>width$}"));
        }
        out.push('\n');
        for a in &self.activities {
            out.push_str(&format!("{a:width$}"));
            for b in &self.activities {
                let r = self.relation(a, b).map(Relation::symbol).unwrap_or("?");
                out.push_str(&format!(" {r:>width$}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Classifies every ordered activity pair from direct succession.
pub fn footprint<S: AsRef<str>>(traces: &[Vec<S>]) -> Footprint {
    let df = directly_follows(traces);
    let activities: Vec<String> = traces
        .iter()
        .flatten()
        .map(|a| a.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut relations = BTreeMap::new();
    for a in &activities {
        for b in &activities {
            let ab = df.contains(&(a.clone(), b.clone()));
            let ba = df.contains(&(b.clone(), a.clone()));
            let r = match (ab, ba) {
                (true, false) => Relation::Causal,
                (false, true) => Relation::ReverseCausal,
                (true, true) => Relation::Parallel,
                (false, false) => Relation::Unrelated,
            };
            relations.insert((a.clone(), b.clone()), r);
        }
    }
    Footprint {
        activities,
        relations,
    }
}
