//! Node registry: the roster of reachable nodes, from a static file or
//! collected UDP beacons.

use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use indexmap::IndexMap;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::{validate_profile, LinkModel, NodeClass, NodeId, NodeProfile};
use crate::net::beacon::discover_beacons;
use crate::net::NetError;

/// Where a node lives: a reachable socket address, or nowhere (timings come
/// from its link model).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeAddress {
    Simulated,
    Socket(String),
}

impl fmt::Display for NodeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeAddress::Simulated => f.pad("simulated"),
            NodeAddress::Socket(addr) => f.pad(addr),
        }
    }
}

impl Serialize for NodeAddress {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NodeAddress {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        if s == "simulated" {
            Ok(NodeAddress::Simulated)
        } else {
            Ok(NodeAddress::Socket(s))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub node_id: NodeId,
    pub address: NodeAddress,
    pub class: NodeClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<NodeProfile>,
}

impl RegistryEntry {
    pub fn is_simulated(&self) -> bool {
        self.address == NodeAddress::Simulated
    }
}

/// Known nodes in insertion order. The registry file is a JSON array of
/// entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Registry {
    pub entries: IndexMap<NodeId, RegistryEntry>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a registry from entry records, enforcing unique ids and
    /// addresses and the simulated-entry requirements.
    pub fn from_entries(entries: Vec<RegistryEntry>) -> Result<Self, NetError> {
        let mut map = IndexMap::new();
        for entry in entries {
            if entry.node_id.is_empty() {
                return Err(NetError::Parse("entry with empty node_id".into()));
            }
            if entry.is_simulated() {
                let link = entry.link.as_ref().ok_or_else(|| {
                    NetError::Parse(format!("simulated entry `{}` needs a link model", entry.node_id))
                })?;
                if !link.is_valid() {
                    return Err(NetError::Parse(format!(
                        "entry `{}` has an invalid link model",
                        entry.node_id
                    )));
                }
                let profile = entry.profile.as_ref().ok_or_else(|| {
                    NetError::Parse(format!("simulated entry `{}` needs a profile", entry.node_id))
                })?;
                validate_profile(profile).map_err(|e| NetError::Parse(e.to_string()))?;
                if profile.node_id != entry.node_id {
                    return Err(NetError::Parse(format!(
                        "entry `{}` carries a profile for `{}`",
                        entry.node_id, profile.node_id
                    )));
                }
            }
            if let NodeAddress::Socket(addr) = &entry.address {
                if map.values().any(|e: &RegistryEntry| match &e.address {
                    NodeAddress::Socket(other) => other == addr,
                    NodeAddress::Simulated => false,
                }) {
                    return Err(NetError::Parse(format!("duplicate address `{addr}`")));
                }
            }
            if map.contains_key(&entry.node_id) {
                return Err(NetError::Parse(format!("duplicate node_id `{}`", entry.node_id)));
            }
            map.insert(entry.node_id.clone(), entry);
        }
        Ok(Self { entries: map })
    }

    pub fn get(&self, id: &NodeId) -> Option<&RegistryEntry> {
        self.entries.get(id)
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.entries.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Serialize for Registry {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(self.entries.values())
    }
}

impl<'de> Deserialize<'de> for Registry {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let entries = Vec::<RegistryEntry>::deserialize(de)?;
        Registry::from_entries(entries).map_err(D::Error::custom)
    }
}

/// Discovery input: a static registry file, or a listen window for worker
/// beacons.
#[derive(Debug, Clone)]
pub enum RegistrySource {
    File(PathBuf),
    Beacons { listen_port: u16, window: Duration },
}

/// Static mode parses the registry file; beacon mode collects HELLO
/// datagrams for the window and merges them (last beacon per node wins).
/// An empty result is not an error.
pub fn discover(source: &RegistrySource) -> Result<Registry, NetError> {
    match source {
        RegistrySource::File(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| NetError::Parse(format!("{}: {e}", path.display())))?;
            serde_json::from_slice(&bytes).map_err(|e| NetError::Parse(e.to_string()))
        }
        RegistrySource::Beacons { listen_port, window } => discover_beacons(*listen_port, *window),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simulated_entry(id: &str) -> RegistryEntry {
        RegistryEntry {
            node_id: NodeId::new(id),
            address: NodeAddress::Simulated,
            class: NodeClass::Cloudlet,
            link: Some(LinkModel { latency_s: 0.02, bandwidth_bytes_per_s: 3e6 }),
            profile: Some(NodeProfile::fixed(id, NodeClass::Cloudlet, 2.56, 2.5, 4, 16.0)),
        }
    }

    #[test]
    fn registry_round_trips_as_array() {
        let reg = Registry::from_entries(vec![simulated_entry("a"), simulated_entry("b")]).unwrap();
        let json = serde_json::to_string(&reg).unwrap();
        assert!(json.starts_with('['));
        let back: Registry = serde_json::from_str(&json).unwrap();
        assert_eq!(reg, back);
        assert_eq!(back.node_ids(), vec![NodeId::new("a"), NodeId::new("b")]);
    }

    #[test]
    fn simulated_entry_requires_link_and_profile() {
        let mut entry = simulated_entry("a");
        entry.link = None;
        assert!(matches!(Registry::from_entries(vec![entry]), Err(NetError::Parse(_))));
        let mut entry = simulated_entry("a");
        entry.profile = None;
        assert!(matches!(Registry::from_entries(vec![entry]), Err(NetError::Parse(_))));
    }

    #[test]
    fn duplicate_ids_and_addresses_rejected() {
        let err = Registry::from_entries(vec![simulated_entry("a"), simulated_entry("a")]);
        assert!(matches!(err, Err(NetError::Parse(_))));
        let mk = |id: &str, addr: &str| RegistryEntry {
            node_id: NodeId::new(id),
            address: NodeAddress::Socket(addr.into()),
            class: NodeClass::Cloudlet,
            link: None,
            profile: None,
        };
        let err = Registry::from_entries(vec![mk("a", "h:1"), mk("b", "h:1")]);
        assert!(matches!(err, Err(NetError::Parse(_))));
    }

    #[test]
    fn mismatched_profile_id_rejected() {
        let mut entry = simulated_entry("a");
        entry.profile = Some(NodeProfile::fixed("b", NodeClass::Cloudlet, 2.56, 2.5, 4, 16.0));
        assert!(matches!(Registry::from_entries(vec![entry]), Err(NetError::Parse(_))));
    }

    #[test]
    fn file_discovery_parses_roster() {
        let dir = std::env::temp_dir().join("offkit_registry_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roster.json");
        let reg = Registry::from_entries(vec![simulated_entry("a")]).unwrap();
        std::fs::write(&path, serde_json::to_vec(&reg).unwrap()).unwrap();
        let loaded = discover(&RegistrySource::File(path.clone())).unwrap();
        assert_eq!(loaded, reg);
        std::fs::write(&path, b"not json").unwrap();
        assert!(matches!(
            discover(&RegistrySource::File(path)),
            Err(NetError::Parse(_))
        ));
    }

    #[test]
    fn missing_file_is_parse_error() {
        let err = discover(&RegistrySource::File(PathBuf::from("/no/such/file.json")));
        assert!(matches!(err, Err(NetError::Parse(_))));
    }

    #[test]
    fn address_serde_forms() {
        assert_eq!(serde_json::to_string(&NodeAddress::Simulated).unwrap(), "\"simulated\"");
        let addr: NodeAddress = serde_json::from_str("\"10.0.0.2:4747\"").unwrap();
        assert_eq!(addr, NodeAddress::Socket("10.0.0.2:4747".into()));
    }
}
