//! Entity identifiers for the slicing orchestration system.

use std::fmt;

use serde::{Deserialize, Serialize};

/// The nine kinds of orchestration entities. The first three are global;
/// the rest exist once per administrative domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    #[serde(rename = "GO")]
    Go,
    #[serde(rename = "SAE")]
    Sae,
    #[serde(rename = "RAE")]
    Rae,
    #[serde(rename = "DSO")]
    Dso,
    #[serde(rename = "DSNFVO")]
    Dsnfvo,
    #[serde(rename = "DSVIM")]
    Dsvim,
    #[serde(rename = "DSRRO")]
    Dsrro,
    #[serde(rename = "DSeNBs")]
    Dsenbs,
    #[serde(rename = "DSSDNC")]
    Dssdnc,
}

impl EntityKind {
    pub const ALL: [EntityKind; 9] = [
        EntityKind::Go,
        EntityKind::Sae,
        EntityKind::Rae,
        EntityKind::Dso,
        EntityKind::Dsnfvo,
        EntityKind::Dsvim,
        EntityKind::Dsrro,
        EntityKind::Dsenbs,
        EntityKind::Dssdnc,
    ];

    /// Kinds deployed once per domain.
    pub const DOMAIN: [EntityKind; 6] = [
        EntityKind::Dso,
        EntityKind::Dsnfvo,
        EntityKind::Dsvim,
        EntityKind::Dsrro,
        EntityKind::Dsenbs,
        EntityKind::Dssdnc,
    ];

    pub fn is_global(self) -> bool {
        matches!(self, EntityKind::Go | EntityKind::Sae | EntityKind::Rae)
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityKind::Go => "GO",
            EntityKind::Sae => "SAE",
            EntityKind::Rae => "RAE",
            EntityKind::Dso => "DSO",
            EntityKind::Dsnfvo => "DSNFVO",
            EntityKind::Dsvim => "DSVIM",
            EntityKind::Dsrro => "DSRRO",
            EntityKind::Dsenbs => "DSeNBs",
            EntityKind::Dssdnc => "DSSDNC",
        }
    }

    fn index(self) -> usize {
        EntityKind::ALL.iter().position(|&k| k == self).unwrap()
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One logical entity: a kind, plus the 1-based domain index for
/// domain-scoped kinds (global kinds carry none).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityId {
    pub kind: EntityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<u32>,
}

impl EntityId {
    pub fn global(kind: EntityKind) -> Self {
        debug_assert!(kind.is_global());
        Self { kind, domain: None }
    }

    pub fn in_domain(kind: EntityKind, domain: u32) -> Self {
        debug_assert!(!kind.is_global());
        Self { kind, domain: Some(domain) }
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.domain {
            Some(d) => write!(f, "{}.{d}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// Enumerates all entities of a system with `domains` domains in the
/// canonical order: GO, SAE, RAE, then per domain DSO, DSNFVO, DSVIM,
/// DSRRO, DSeNBs, DSSDNC.
pub fn enumerate_entities(domains: u32) -> Vec<EntityId> {
    let mut out = Vec::with_capacity(3 + 6 * domains as usize);
    out.push(EntityId::global(EntityKind::Go));
    out.push(EntityId::global(EntityKind::Sae));
    out.push(EntityId::global(EntityKind::Rae));
    for d in 1..=domains {
        for kind in EntityKind::DOMAIN {
            out.push(EntityId::in_domain(kind, d));
        }
    }
    out
}

/// A value per entity kind. Serialized as a map keyed by the kind names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "std::collections::BTreeMap<EntityKind, T>")]
#[serde(into = "std::collections::BTreeMap<EntityKind, T>")]
pub struct KindMap<T: Copy + Clone + std::fmt::Debug> {
    values: [T; 9],
}

impl<T: Copy + Clone + std::fmt::Debug> KindMap<T> {
    /// The same value for every kind.
    pub fn uniform(value: T) -> Self {
        Self { values: [value; 9] }
    }

    pub fn get(&self, kind: EntityKind) -> T {
        self.values[kind.index()]
    }

    pub fn set(&mut self, kind: EntityKind, value: T) {
        self.values[kind.index()] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityKind, T)> + '_ {
        EntityKind::ALL.iter().map(move |&k| (k, self.get(k)))
    }
}

impl<T: Copy + Clone + std::fmt::Debug> std::ops::Index<EntityKind> for KindMap<T> {
    type Output = T;
    fn index(&self, kind: EntityKind) -> &T {
        &self.values[kind.index()]
    }
}

impl<T: Copy + Clone + std::fmt::Debug> TryFrom<std::collections::BTreeMap<EntityKind, T>>
    for KindMap<T>
{
    type Error = String;

    fn try_from(map: std::collections::BTreeMap<EntityKind, T>) -> Result<Self, String> {
        let mut missing = Vec::new();
        for kind in EntityKind::ALL {
            if !map.contains_key(&kind) {
                missing.push(kind.name());
            }
        }
        if !missing.is_empty() {
            return Err(format!("missing entity kinds: {}", missing.join(", ")));
        }
        let mut out = KindMap::uniform(map[&EntityKind::Go]);
        for (kind, value) in map {
            out.set(kind, value);
        }
        Ok(out)
    }
}

impl<T: Copy + Clone + std::fmt::Debug> From<KindMap<T>>
    for std::collections::BTreeMap<EntityKind, T>
{
    fn from(map: KindMap<T>) -> Self {
        EntityKind::ALL.iter().map(|&k| (k, map.get(k))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_order_and_size() {
        let entities = enumerate_entities(2);
        assert_eq!(entities.len(), 15);
        assert_eq!(entities[0], EntityId::global(EntityKind::Go));
        assert_eq!(entities[3], EntityId::in_domain(EntityKind::Dso, 1));
        assert_eq!(entities[9], EntityId::in_domain(EntityKind::Dso, 2));
        assert_eq!(entities[14], EntityId::in_domain(EntityKind::Dssdnc, 2));
    }

    #[test]
    fn kind_map_round_trips_as_named_map() {
        let mut map = KindMap::uniform(1.0_f64);
        map.set(EntityKind::Go, 2.5);
        let json = serde_json::to_string(&map).unwrap();
        assert!(json.contains("\"GO\":2.5"));
        assert!(json.contains("\"DSeNBs\":1.0"));
        let back: KindMap<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn kind_map_rejects_missing_keys() {
        let err = serde_json::from_str::<KindMap<f64>>("{\"GO\": 1.0}").unwrap_err();
        assert!(err.to_string().contains("missing entity kinds"));
    }

    #[test]
    fn display_includes_domain() {
        assert_eq!(EntityId::in_domain(EntityKind::Dsvim, 3).to_string(), "DSVIM.3");
        assert_eq!(EntityId::global(EntityKind::Sae).to_string(), "SAE");
    }
}
