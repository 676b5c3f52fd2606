use std::path::{Path, PathBuf};

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::OrchestratorError;

/// Service settings. Read from a TOML file, then overridden by
/// `CROWDCELL_*` environment variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrchestratorConfig {
    pub bind: String,
    pub port: u16,
    /// Assignments per task.
    pub k: usize,
    /// Paid per approved assignment (one image pair).
    pub reward_usd: f64,
    /// Platform fee as a fraction of rewards, for cost reporting only.
    pub fee_rate: f64,
    pub claim_timeout_secs: i64,
    pub auto_approve_secs: i64,
    pub task_lifetime_secs: i64,
    /// Workers need an approval rate strictly above this.
    pub approval_threshold: f64,
    pub require_master: bool,
    /// Event log and snapshots; `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    /// Served under `/images`.
    pub image_dir: Option<PathBuf>,
    /// Events between snapshots.
    pub snapshot_every: u64,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            k: 5,
            reward_usd: 0.01,
            fee_rate: 0.0,
            claim_timeout_secs: 3600,
            auto_approve_secs: 7 * 24 * 3600,
            task_lifetime_secs: 3 * 24 * 3600,
            approval_threshold: 0.90,
            require_master: true,
            data_dir: None,
            image_dir: None,
            snapshot_every: 1000,
        }
    }
}

impl OrchestratorConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, OrchestratorError> {
        toml::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))
    }

    /// File (if given) then process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, OrchestratorError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| OrchestratorError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml_str(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), OrchestratorError> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, OrchestratorError> {
            v.trim()
                .parse()
                .map_err(|_| OrchestratorError::Config(format!("{key}={v:?} is not valid")))
        }
        if let Some(v) = get("CROWDCELL_BIND") {
            self.bind = v;
        }
        if let Some(v) = get("CROWDCELL_PORT") {
            self.port = parse("CROWDCELL_PORT", &v)?;
        }
        if let Some(v) = get("CROWDCELL_K") {
            self.k = parse("CROWDCELL_K", &v)?;
        }
        if let Some(v) = get("CROWDCELL_REWARD_USD") {
            self.reward_usd = parse("CROWDCELL_REWARD_USD", &v)?;
        }
        if let Some(v) = get("CROWDCELL_FEE_RATE") {
            self.fee_rate = parse("CROWDCELL_FEE_RATE", &v)?;
        }
        if let Some(v) = get("CROWDCELL_CLAIM_TIMEOUT_SECS") {
            self.claim_timeout_secs = parse("CROWDCELL_CLAIM_TIMEOUT_SECS", &v)?;
        }
        if let Some(v) = get("CROWDCELL_AUTO_APPROVE_SECS") {
            self.auto_approve_secs = parse("CROWDCELL_AUTO_APPROVE_SECS", &v)?;
        }
        if let Some(v) = get("CROWDCELL_TASK_LIFETIME_SECS") {
            self.task_lifetime_secs = parse("CROWDCELL_TASK_LIFETIME_SECS", &v)?;
        }
        if let Some(v) = get("CROWDCELL_DATA_DIR") {
            self.data_dir = Some(v.into());
        }
        if let Some(v) = get("CROWDCELL_IMAGE_DIR") {
            self.image_dir = Some(v.into());
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: &str| Err(OrchestratorError::Config(m.to_string()));
        if self.k == 0 {
            return bad("k must be positive");
        }
        if !(self.reward_usd > 0.0 && self.reward_usd.is_finite()) {
            return bad("reward_usd must be positive");
        }
        if !(self.fee_rate >= 0.0) {
            return bad("fee_rate must be non-negative");
        }
        if self.claim_timeout_secs <= 0 || self.auto_approve_secs <= 0 || self.task_lifetime_secs <= 0 {
            return bad("timeouts must be positive");
        }
        if !(0.0..=1.0).contains(&self.approval_threshold) {
            return bad("approval_threshold must be in [0, 1]");
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be positive");
        }
        Ok(())
    }

    pub fn policy(&self) -> Policy {
        Policy {
            k: self.k,
            reward: crate::model::micros(self.reward_usd),
            claim_timeout: Duration::seconds(self.claim_timeout_secs),
            auto_approve_after: Duration::seconds(self.auto_approve_secs),
            task_lifetime: Duration::seconds(self.task_lifetime_secs),
            approval_threshold: self.approval_threshold,
            require_master: self.require_master,
        }
    }
}

/// The parts of the configuration the state machine decides with.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub k: usize,
    pub reward: crate::model::Micros,
    pub claim_timeout: Duration,
    pub auto_approve_after: Duration,
    pub task_lifetime: Duration,
    pub approval_threshold: f64,
    pub require_master: bool,
}

impl Default for Policy {
    fn default() -> Self {
        OrchestratorConfig::default().policy()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn defaults() {
        let p = Policy::default();
        assert_eq!(p.k, 5);
        assert_eq!(p.reward, 10_000);
        assert_eq!(p.claim_timeout, Duration::hours(1));
        assert_eq!(p.auto_approve_after, Duration::days(7));
        assert_eq!(p.task_lifetime, Duration::days(3));
    }

    #[test]
    fn file_then_env() {
        let mut cfg = OrchestratorConfig::from_toml_str("port = 9000\nk = 3\n").unwrap();
        assert_eq!((cfg.port, cfg.k), (9000, 3));
        let env: HashMap<&str, &str> = [("CROWDCELL_PORT", "9100"), ("CROWDCELL_REWARD_USD", "0.02")].into();
        cfg.apply_env(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(cfg.port, 9100);
        assert_eq!(cfg.policy().reward, 20_000);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(OrchestratorConfig::from_toml_str("colour = 1").is_err());
        let mut cfg = OrchestratorConfig::default();
        assert!(cfg.apply_env(|k| (k == "CROWDCELL_K").then(|| "five".to_string())).is_err());
        cfg.k = 0;
        assert!(cfg.validate().is_err());
    }
}
