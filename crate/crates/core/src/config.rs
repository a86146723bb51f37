//! System constants and the shared pipeline config file.
//!
//! The config file is TOML. Physical and protocol constants sit at the top
//! level under the same names as the [`SystemConfig`] fields; each pipeline
//! stage has its own table (`[dataset]`, `[ddpm]`, `[train]`, `[eval]`).
//! Missing keys fall back to the defaults, which reproduce the reference
//! simulation setup (100 kHz, 100-bit packets, 1 ms MAD, 100 ms MATI, ...).
//!
//! Any key can be overridden from the environment with the `WNCS_` prefix:
//! `WNCS_BANDWIDTH_HZ=2e5` for a top-level key, `WNCS_TRAIN_EPOCHS=10` for a
//! key inside a stage table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetOptions;
use crate::ddpm::{DdpmConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::EvalOptions;

pub const ENV_PREFIX: &str = "WNCS_";

const SECTIONS: [&str; 4] = ["dataset", "ddpm", "train", "eval"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub bandwidth_hz: f64,
    pub packet_bits: u32,
    pub mad_s: f64,
    pub mati_s: f64,
    /// Probability that the MATI is met, δ.
    pub mati_confidence: f64,
    pub max_tx_power_w: f64,
    pub circuit_power_w: f64,
    pub node_count: usize,
    pub noise_psd_dbm_hz: f64,
    pub blocklength_cap_symbols: u32,
    /// Fraction of the TDMA frame available to all nodes together, β.
    pub schedulability_budget: f64,
    pub radius_m: f64,
    pub pathloss_reference_db: f64,
    pub pathloss_exponent: f64,
    pub shadowing_std_db: f64,
    /// Per-frame correlation of the Gauss-Markov small-scale fading.
    pub fading_correlation: f64,
    /// Upper bound on transmissions per MATI window.
    pub k_max: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            bandwidth_hz: 100e3,
            packet_bits: 100,
            mad_s: 1e-3,
            mati_s: 100e-3,
            mati_confidence: 0.99,
            max_tx_power_w: 0.25,
            circuit_power_w: 5e-3,
            node_count: 64,
            noise_psd_dbm_hz: -174.0,
            blocklength_cap_symbols: 200,
            schedulability_budget: 1.0,
            radius_m: 50.0,
            pathloss_reference_db: 35.3,
            pathloss_exponent: 3.76,
            shadowing_std_db: 4.0,
            fading_correlation: 0.99,
            k_max: 1_000_000,
        }
    }
}

fn invalid(key: &str, msg: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), msg: msg.into() }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("mad_s", self.mad_s),
            ("mati_s", self.mati_s),
            ("mati_confidence", self.mati_confidence),
            ("max_tx_power_w", self.max_tx_power_w),
            ("circuit_power_w", self.circuit_power_w),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("schedulability_budget", self.schedulability_budget),
            ("radius_m", self.radius_m),
            ("pathloss_reference_db", self.pathloss_reference_db),
            ("pathloss_exponent", self.pathloss_exponent),
            ("shadowing_std_db", self.shadowing_std_db),
            ("fading_correlation", self.fading_correlation),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(invalid("bandwidth_hz", "must be > 0"));
        }
        if self.packet_bits == 0 {
            return Err(invalid("packet_bits", "must be > 0"));
        }
        if self.mad_s <= 0.0 {
            return Err(invalid("mad_s", "must be > 0"));
        }
        if self.mad_s > self.mati_s {
            return Err(invalid("mad_s", "must not exceed mati_s"));
        }
        if !(self.mati_confidence > 0.0 && self.mati_confidence < 1.0) {
            return Err(invalid("mati_confidence", format!("{} is outside (0, 1)", self.mati_confidence)));
        }
        if self.max_tx_power_w <= 0.0 {
            return Err(invalid("max_tx_power_w", "must be > 0"));
        }
        if self.circuit_power_w < 0.0 {
            return Err(invalid("circuit_power_w", "must be >= 0"));
        }
        if self.blocklength_cap_symbols == 0 {
            return Err(invalid("blocklength_cap_symbols", "must be >= 1"));
        }
        if !(self.schedulability_budget > 0.0 && self.schedulability_budget <= 1.0) {
            return Err(invalid("schedulability_budget", "must lie in (0, 1]"));
        }
        if self.radius_m <= 1.0 {
            return Err(invalid("radius_m", "must exceed the 1 m reference distance"));
        }
        if self.shadowing_std_db < 0.0 {
            return Err(invalid("shadowing_std_db", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.fading_correlation) {
            return Err(invalid("fading_correlation", "must lie in [0, 1)"));
        }
        if self.k_max == 0 {
            return Err(invalid("k_max", "must be >= 1"));
        }
        Ok(())
    }

    /// Noise power over the band in watts: PSD (dBm/Hz) integrated over B.
    pub fn noise_power_w(&self) -> f64 {
        10f64.powf((self.noise_psd_dbm_hz - 30.0) / 10.0) * self.bandwidth_hz
    }

    /// `C_i1` for a link with linear power gain `gain`.
    pub fn c1_for_gain(&self, gain: f64) -> f64 {
        self.noise_power_w() / gain
    }

    /// Largest blocklength allowed by the MAD and the symbol cap.
    pub fn max_blocklength(&self) -> u32 {
        let by_delay = (self.bandwidth_hz * self.mad_s * (1.0 + 1e-12)).floor();
        let by_delay = if by_delay >= u32::MAX as f64 { u32::MAX } else { by_delay as u32 };
        self.blocklength_cap_symbols.min(by_delay)
    }

    /// Channel uses in one MATI window, `B·Ω`.
    pub fn symbols_per_window(&self) -> f64 {
        self.bandwidth_hz * self.mati_s
    }
}

/// Everything a config file can carry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub system: SystemConfig,
    pub dataset: DatasetOptions,
    pub ddpm: DdpmConfig,
    pub train: TrainConfig,
    pub eval: EvalOptions,
}

impl PipelineConfig {
    /// Load, apply `WNCS_*` environment overrides, and validate.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with_env(&text, &path.display().to_string(), std::env::vars())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_env(text, "<string>", std::iter::empty())
    }

    pub fn from_toml_with_env(
        text: &str,
        origin: &str,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::ConfigParse { path: origin.to_string(), msg: e.to_string() })?;
        apply_env(&mut table, env)?;

        let mut sections = toml::Table::new();
        for name in SECTIONS {
            if let Some(v) = table.remove(name) {
                sections.insert(name.to_string(), v);
            }
        }
        let system: SystemConfig = deserialize_table(table, origin, "")?;
        let section = |name: &str| -> toml::Table {
            match sections.get(name) {
                Some(toml::Value::Table(t)) => t.clone(),
                _ => toml::Table::new(),
            }
        };
        for (name, v) in &sections {
            if !v.is_table() {
                return Err(invalid(name, "must be a table"));
            }
        }
        let cfg = PipelineConfig {
            system,
            dataset: deserialize_table(section("dataset"), origin, "dataset.")?,
            ddpm: deserialize_table(section("ddpm"), origin, "ddpm.")?,
            train: deserialize_table(section("train"), origin, "train.")?,
            eval: deserialize_table(section("eval"), origin, "eval.")?,
        };
        cfg.system.validate()?;
        cfg.ddpm.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        let mut root = toml::Table::try_from(&self.system).expect("system config serializes");
        root.insert("dataset".into(), toml::Value::try_from(&self.dataset).expect("serializable"));
        root.insert("ddpm".into(), toml::Value::try_from(&self.ddpm).expect("serializable"));
        root.insert("train".into(), toml::Value::try_from(&self.train).expect("serializable"));
        root.insert("eval".into(), toml::Value::try_from(&self.eval).expect("serializable"));
        toml::to_string(&root).expect("toml table serializes")
    }
}

/// Parse and validate the system part of a config file.
pub fn validate_config(path: &Path) -> Result<SystemConfig> {
    Ok(PipelineConfig::load(path)?.system)
}

fn deserialize_table<T: serde::de::DeserializeOwned>(table: toml::Table, origin: &str, prefix: &str) -> Result<T> {
    T::deserialize(toml::Value::Table(table)).map_err(|e| Error::ConfigParse {
        path: origin.to_string(),
        msg: format!("{prefix}{}", e.to_string().trim()),
    })
}

fn apply_env(table: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut overrides: Vec<(String, String)> = env
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_ascii_lowercase(), v)))
        .collect();
    overrides.sort();
    for (key, raw) in overrides {
        let value = parse_env_value(&raw);
        let section = SECTIONS
            .iter()
            .find(|s| key.starts_with(&format!("{s}_")))
            .copied();
        match section {
            Some(s) => {
                let inner = key[s.len() + 1..].to_string();
                let entry = table
                    .entry(s.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                match entry {
                    toml::Value::Table(t) => {
                        t.insert(inner, value);
                    }
                    _ => return Err(invalid(s, "must be a table")),
                }
            }
            None => {
                table.insert(key, value);
            }
        }
    }
    Ok(())
}

fn parse_env_value(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    // Arrays such as `[256, 256]`.
    if let Ok(v) = format!("v = {raw}").parse::<toml::Table>() {
        if let Some(v) = v.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(raw.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.system, SystemConfig::default());
        assert_eq!(cfg.system.bandwidth_hz, 100_000.0);
        assert_eq!(cfg.system.packet_bits, 100);
        assert_eq!(cfg.system.blocklength_cap_symbols, 200);
        assert_eq!(cfg.system.node_count, 64);
    }

    #[test]
    fn bad_confidence_names_the_key() {
        let err = PipelineConfig::from_toml_str("mati_confidence = 1.5").unwrap_err();
        assert!(err.to_string().contains("mati_confidence"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = PipelineConfig::from_toml_str("bandwith_hz = 1.0").unwrap_err();
        assert!(err.to_string().contains("bandwith_hz"), "{err}");
    }

    #[test]
    fn parse_error_carries_line() {
        let err = PipelineConfig::from_toml_str("bandwidth_hz = 1\nmad_s = = 2\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn env_overrides_top_level_and_sections() {
        let env = vec![
            ("WNCS_BANDWIDTH_HZ".to_string(), "200000".to_string()),
            ("WNCS_TRAIN_EPOCHS".to_string(), "7".to_string()),
            ("WNCS_DDPM_HIDDEN".to_string(), "[16, 16]".to_string()),
            ("OTHER".to_string(), "1".to_string()),
        ];
        let cfg = PipelineConfig::from_toml_with_env("bandwidth_hz = 1e5", "<t>", env).unwrap();
        assert_eq!(cfg.system.bandwidth_hz, 200_000.0);
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.ddpm.hidden, vec![16, 16]);
    }

    #[test]
    fn toml_roundtrip() {
        let mut cfg = PipelineConfig::default();
        cfg.system.node_count = 8;
        cfg.train.epochs = 3;
        let back = PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn noise_power_matches_dbm_conversion() {
        let cfg = SystemConfig::default();
        // -174 dBm/Hz over 100 kHz = -124 dBm
        assert!((cfg.noise_power_w() / 3.981_071_705_534_972_5e-16 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delay_cap_binds_below_symbol_cap() {
        let mut cfg = SystemConfig::default();
        assert_eq!(cfg.max_blocklength(), 100);
        cfg.mad_s = 5e-3;
        assert_eq!(cfg.max_blocklength(), 200);
    }
}
