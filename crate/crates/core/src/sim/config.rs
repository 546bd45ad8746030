//! Scenario configuration and its flat `key=value` file format.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::attacks::{AttackKind, AttackProfile};
use crate::sim::SimTime;
use crate::{Error, Result};

/// Attacker ratios a scenario may use.
pub const ALLOWED_RATIOS: [f64; 6] = [0.0, 0.05, 0.10, 0.15, 0.20, 0.25];

/// Attack selector for a whole scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackType {
    None,
    Sinkhole,
    Blackhole,
    Flooding,
}

impl AttackType {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackType::None => "none",
            AttackType::Sinkhole => "sinkhole",
            AttackType::Blackhole => "blackhole",
            AttackType::Flooding => "flooding",
        }
    }

    pub fn kind(self) -> Option<AttackKind> {
        match self {
            AttackType::None => None,
            AttackType::Sinkhole => Some(AttackKind::Sinkhole),
            AttackType::Blackhole => Some(AttackKind::Blackhole),
            AttackType::Flooding => Some(AttackKind::Flooding),
        }
    }
}

impl fmt::Display for AttackType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(AttackType::None),
            "sinkhole" => Ok(AttackType::Sinkhole),
            "blackhole" => Ok(AttackType::Blackhole),
            "flooding" => Ok(AttackType::Flooding),
            other => Err(format!("unknown attack type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Mobile UAVs; the ground base station is added on top.
    pub node_count: usize,
    /// `(x_max, y_max, z_max)` in meters.
    pub area: [f64; 3],
    /// Seconds. Attack scenarios run twice this long: a dormant half then an
    /// active half.
    pub sim_duration: f64,
    pub mean_speed: f64,
    pub gm_alpha: f64,
    pub tx_range: f64,
    pub traffic_pairs: usize,
    pub packet_size: u32,
    /// Packets per second per traffic pair.
    pub packet_rate: f64,
    pub attacker_ratio: f64,
    pub attack_type: AttackType,
    pub window_len: f64,
    pub warmup: f64,
    pub seed: u64,
    pub seq_inflation: u64,
    pub flood_burst: u32,
    pub flood_period: f64,
}

impl Default for ScenarioConfig {
    /// The full-size network: 50 UAVs over 12 km x 12 km x 300 m for 1800 s.
    fn default() -> Self {
        ScenarioConfig {
            node_count: 50,
            area: [12_000.0, 12_000.0, 300.0],
            sim_duration: 1800.0,
            mean_speed: 100.0,
            gm_alpha: 0.5,
            tx_range: 250.0,
            traffic_pairs: 10,
            packet_size: 512,
            packet_rate: 1.0,
            attacker_ratio: 0.0,
            attack_type: AttackType::None,
            window_len: 5.0,
            warmup: 10.0,
            seed: 1,
            seq_inflation: 100,
            flood_burst: 10,
            flood_period: 3.0,
        }
    }
}

const KEYS: &[&str] = &[
    "node_count",
    "area",
    "sim_duration",
    "mean_speed",
    "gm_alpha",
    "tx_range",
    "traffic_pairs",
    "packet_size",
    "packet_rate",
    "attacker_ratio",
    "attack_type",
    "window_len",
    "warmup",
    "seed",
    "seq_inflation",
    "flood_burst",
    "flood_period",
];

impl ScenarioConfig {
    /// Attackers implied by the ratio, rounded to the nearest node.
    pub fn attacker_count(&self) -> usize {
        (self.attacker_ratio * self.node_count as f64).round() as usize
    }

    /// Id of the ground base station.
    pub fn gbs_id(&self) -> crate::NodeId {
        self.node_count as crate::NodeId
    }

    pub fn has_attack(&self) -> bool {
        self.attack_type != AttackType::None
    }

    /// End of the run: doubled for attack scenarios.
    pub fn total_duration(&self) -> SimTime {
        let mult = if self.has_attack() { 2.0 } else { 1.0 };
        SimTime::from_secs(self.sim_duration * mult)
    }

    /// Start of the active attack phase.
    pub fn active_from(&self) -> SimTime {
        SimTime::from_secs(self.sim_duration)
    }

    pub fn window_count(&self) -> usize {
        let span = self.total_duration().micros() - SimTime::from_secs(self.warmup).micros();
        (span / SimTime::from_secs(self.window_len).micros()) as usize
    }

    pub fn attack_profile(&self) -> Option<AttackProfile> {
        self.attack_type.kind().map(|kind| AttackProfile {
            kind,
            seq_inflation: self.seq_inflation,
            flood_burst: self.flood_burst,
            flood_period: SimTime::from_secs(self.flood_period),
            active_from: self.active_from(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count < 2 {
            return Err(Error::config("node_count", "need at least two UAVs"));
        }
        for (i, d) in self.area.iter().enumerate() {
            if !(d.is_finite() && *d > 0.0) {
                return Err(Error::config("area", format!("dimension {i} must be positive")));
            }
        }
        positive("sim_duration", self.sim_duration)?;
        positive("tx_range", self.tx_range)?;
        positive("packet_rate", self.packet_rate)?;
        positive("window_len", self.window_len)?;
        positive("flood_period", self.flood_period)?;
        if !(self.mean_speed.is_finite() && self.mean_speed >= 0.0) {
            return Err(Error::config("mean_speed", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.gm_alpha) {
            return Err(Error::config("gm_alpha", "must lie in [0, 1]"));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.sim_duration) {
            return Err(Error::config("warmup", "must satisfy 0 <= warmup < sim_duration"));
        }
        if self.traffic_pairs == 0 {
            return Err(Error::config("traffic_pairs", "need at least one pair"));
        }
        if self.packet_size == 0 {
            return Err(Error::config("packet_size", "must be positive"));
        }
        if !ALLOWED_RATIOS.iter().any(|r| (r - self.attacker_ratio).abs() < 1e-9) {
            return Err(Error::config(
                "attacker_ratio",
                format!("{} is not one of 0, 0.05, 0.10, 0.15, 0.20, 0.25", self.attacker_ratio),
            ));
        }
        if self.attack_type == AttackType::None && self.attacker_ratio > 0.0 {
            return Err(Error::config("attack_type", "nonzero attacker_ratio needs an attack type"));
        }
        if self.attack_type != AttackType::None && self.attacker_ratio == 0.0 {
            return Err(Error::config("attacker_ratio", "attack scenarios need a nonzero ratio"));
        }
        if self.attacker_ratio > 0.0 && self.attacker_count() == 0 {
            return Err(Error::config(
                "attacker_ratio",
                format!("{} of {} nodes rounds to zero attackers", self.attacker_ratio, self.node_count),
            ));
        }
        if self.node_count < 2 * self.traffic_pairs + self.attacker_count() {
            return Err(Error::config(
                "node_count",
                format!(
                    "{} nodes cannot host {} traffic pairs plus {} attackers",
                    self.node_count,
                    self.traffic_pairs,
                    self.attacker_count()
                ),
            ));
        }
        if self.seq_inflation == 0 {
            return Err(Error::config("seq_inflation", "must be at least 1"));
        }
        if self.flood_burst == 0 {
            return Err(Error::config("flood_burst", "must be at least 1"));
        }
        Ok(())
    }

    /// Parses the flat `key=value` format. Blank lines and `#` comments are
    /// ignored; keys not listed are taken from [`Default`]; unknown keys are
    /// rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config("<line>", format!("line {}: expected key=value", i + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
        }
        match key {
            "node_count" => self.node_count = num(key, value)?,
            "area" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(Error::config(key, "expected x_max,y_max,z_max"));
                }
                for (slot, p) in self.area.iter_mut().zip(parts) {
                    *slot = num(key, p)?;
                }
            }
            "sim_duration" => self.sim_duration = num(key, value)?,
            "mean_speed" => self.mean_speed = num(key, value)?,
            "gm_alpha" => self.gm_alpha = num(key, value)?,
            "tx_range" => self.tx_range = num(key, value)?,
            "traffic_pairs" => self.traffic_pairs = num(key, value)?,
            "packet_size" => self.packet_size = num(key, value)?,
            "packet_rate" => self.packet_rate = num(key, value)?,
            "attacker_ratio" => self.attacker_ratio = num(key, value)?,
            "attack_type" => {
                self.attack_type = value.parse().map_err(|e: String| Error::config(key, e))?
            }
            "window_len" => self.window_len = num(key, value)?,
            "warmup" => self.warmup = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "seq_inflation" => self.seq_inflation = num(key, value)?,
            "flood_burst" => self.flood_burst = num(key, value)?,
            "flood_period" => self.flood_period = num(key, value)?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Canonical text form; `parse(render(c)) == c` for valid configs.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = match *key {
                "node_count" => self.node_count.to_string(),
                "area" => format!("{},{},{}", self.area[0], self.area[1], self.area[2]),
                "sim_duration" => self.sim_duration.to_string(),
                "mean_speed" => self.mean_speed.to_string(),
                "gm_alpha" => self.gm_alpha.to_string(),
                "tx_range" => self.tx_range.to_string(),
                "traffic_pairs" => self.traffic_pairs.to_string(),
                "packet_size" => self.packet_size.to_string(),
                "packet_rate" => self.packet_rate.to_string(),
                "attacker_ratio" => self.attacker_ratio.to_string(),
                "attack_type" => self.attack_type.to_string(),
                "window_len" => self.window_len.to_string(),
                "warmup" => self.warmup.to_string(),
                "seed" => self.seed.to_string(),
                "seq_inflation" => self.seq_inflation.to_string(),
                "flood_burst" => self.flood_burst.to_string(),
                "flood_period" => self.flood_period.to_string(),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, "must be positive"))
    }
}
