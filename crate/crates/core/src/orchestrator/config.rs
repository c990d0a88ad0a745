use std::collections::BTreeSet;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PartyId, PartyProfile, Universe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    #[default]
    #[serde(alias = "mem")]
    Memory,
    #[serde(alias = "net")]
    Network,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyConfig {
    pub id: u32,
    pub databases: u32,
    pub set: Vec<u32>,
}

/// A session description as read from a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub universe_size: u32,
    pub parties: Vec<PartyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub transport: Transport,
    /// Interface the networked runner binds its endpoints to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub listen: Option<IpAddr>,
}

impl SessionConfig {
    pub fn universe(&self) -> Result<Universe> {
        Universe::new(self.universe_size).map_err(|_| Error::Config("universe_size must be at least 1".into()))
    }

    /// Profiles in ascending id.
    pub fn profiles(&self) -> Vec<PartyProfile> {
        let mut out: Vec<_> = self
            .parties
            .iter()
            .map(|p| PartyProfile::new(p.id, p.databases, p.set.iter().copied()))
            .collect();
        out.sort_by_key(|p| p.id);
        out
    }

    pub fn leader_override(&self) -> Option<PartyId> {
        self.leader.map(PartyId)
    }

    pub fn validate(&self) -> Result<()> {
        let universe = self.universe()?;
        if self.parties.len() < 2 {
            return Err(Error::InvalidPartyCount(self.parties.len()));
        }
        let ids: BTreeSet<u32> = self.parties.iter().map(|p| p.id).collect();
        if ids.len() != self.parties.len() {
            return Err(Error::Config("party ids must be unique".into()));
        }
        if ids != (1..=self.parties.len() as u32).collect() {
            return Err(Error::Config(format!(
                "party ids must be 1..={}, got {:?}",
                self.parties.len(),
                ids
            )));
        }
        for p in &self.parties {
            if p.databases == 0 {
                return Err(Error::Config(format!("party {} has no databases", p.id)));
            }
            let mut seen = BTreeSet::new();
            for &e in &p.set {
                if !universe.contains(e) {
                    return Err(Error::ElementOutOfUniverse {
                        element: e,
                        universe: universe.size(),
                    });
                }
                if !seen.insert(e) {
                    return Err(Error::Config(format!("party {} lists element {e} twice", p.id)));
                }
            }
        }
        if let Some(l) = self.leader {
            if !ids.contains(&l) {
                return Err(Error::Config(format!("leader {l} is not a party")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a config file.
pub fn parse_config(bytes: &[u8]) -> Result<SessionConfig> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Config(format!("config is not UTF-8: {e}")))?;
    let cfg: SessionConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
