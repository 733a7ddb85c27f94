use std::collections::BTreeMap;

use crate::addr::is_valid_agency;
use crate::config::{parse_key_values, ConfigError};
use crate::crypto::PublicKey;
use crate::routing::{PathPolicy, DEFAULT_HOPS};

use super::password::PasswordParams;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerConfig {
    pub endpoint: String,
    pub pubkey: PublicKey,
}

/// Agency server configuration.
///
/// ```text
/// agency = A
/// hops = 3
/// path_policy = round_robin
/// entry = 127.0.0.1:7100
/// gateway = 127.0.0.1:8080
/// password.m_cost = 19456
/// password.t_cost = 2
/// password.p_cost = 1
/// peer.B = 127.0.0.1:7200,<64 hex chars>
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub agency: Option<String>,
    pub hops: usize,
    pub path_policy: PathPolicy,
    pub entry: Option<String>,
    pub gateway: Option<String>,
    pub password: PasswordParams,
    pub peers: BTreeMap<String, PeerConfig>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            agency: None,
            hops: DEFAULT_HOPS,
            path_policy: PathPolicy::RoundRobin,
            entry: None,
            gateway: None,
            password: PasswordParams::default(),
            peers: BTreeMap::new(),
        }
    }
}

impl ServerConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ServerConfig::default();
        for e in parse_key_values(text)? {
            let err = |reason: String| ConfigError::new(e.line, reason);
            let number = |v: &str| {
                v.parse::<u32>()
                    .map_err(|_| ConfigError::new(e.line, format!("{:?} is not a number", v)))
            };
            match e.key.as_str() {
                "agency" => {
                    if !is_valid_agency(&e.value) {
                        return Err(err(format!("invalid agency name {:?}", e.value)));
                    }
                    cfg.agency = Some(e.value.clone());
                }
                "hops" => {
                    let hops = number(&e.value)? as usize;
                    if hops == 0 {
                        return Err(err("hops must be at least 1".into()));
                    }
                    cfg.hops = hops;
                }
                "path_policy" => cfg.path_policy = e.value.parse().map_err(err)?,
                "entry" => cfg.entry = Some(e.value.clone()),
                "gateway" => cfg.gateway = Some(e.value.clone()),
                "password.m_cost" => cfg.password.m_cost = number(&e.value)?,
                "password.t_cost" => cfg.password.t_cost = number(&e.value)?,
                "password.p_cost" => cfg.password.p_cost = number(&e.value)?,
                key => {
                    let Some(name) = key.strip_prefix("peer.") else {
                        return Err(err(format!("unknown key {key:?}")));
                    };
                    if !is_valid_agency(name) {
                        return Err(err(format!("invalid peer agency {name:?}")));
                    }
                    let (endpoint, hex) = e
                        .value
                        .split_once(',')
                        .ok_or_else(|| err("peer must be `host:port,<pubkey-hex>`".into()))?;
                    let pubkey = PublicKey::from_hex(hex)
                        .map_err(|_| err("peer public key must be 64 hex characters".into()))?;
                    cfg.peers.insert(
                        name.to_string(),
                        PeerConfig {
                            endpoint: endpoint.trim().to_string(),
                            pubkey,
                        },
                    );
                }
            }
        }
        cfg.password.validate().map_err(|e| ConfigError::new(0, e))?;
        if let Some(own) = &cfg.agency {
            if cfg.peers.contains_key(own) {
                return Err(ConfigError::new(0, format!("agency {own} lists itself as a peer")));
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PK: &str = "0101010101010101010101010101010101010101010101010101010101010101";

    #[test]
    fn full_config() {
        let text = format!(
            "agency = A\nhops = 2\npath_policy = uniform_random\nentry = 127.0.0.1:7100\n\
             password.m_cost = 64\npassword.t_cost = 1\npeer.B = 10.0.0.2:7200,{PK}\n"
        );
        let cfg = ServerConfig::parse(&text).unwrap();
        assert_eq!(cfg.agency.as_deref(), Some("A"));
        assert_eq!(cfg.hops, 2);
        assert_eq!(cfg.path_policy, PathPolicy::UniformRandom);
        assert_eq!(cfg.password.m_cost, 64);
        assert_eq!(cfg.peers["B"].endpoint, "10.0.0.2:7200");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ServerConfig::parse("hops = 0").is_err());
        assert!(ServerConfig::parse("bogus = 1").is_err());
        assert!(ServerConfig::parse("peer.B = host:1").is_err());
        assert!(ServerConfig::parse("peer.B = host:1,zz").is_err());
        assert!(ServerConfig::parse("password.m_cost = 1").is_err());
        assert!(ServerConfig::parse(&format!("agency = A\npeer.A = h:1,{PK}")).is_err());
    }
}
