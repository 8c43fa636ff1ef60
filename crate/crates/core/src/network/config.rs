//! System configuration, its validation and the flat key-value file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{Dims, Precoder};

/// Raw system parameters. Powers are in watts, distances in meters, SE
/// thresholds and fronthaul capacity in bit/s/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_aps: usize,
    pub antennas_per_ap: usize,
    pub n_unicast: usize,
    pub n_groups: usize,
    pub group_sizes: Vec<usize>,
    pub pilot_len: usize,
    pub coherence_len: usize,
    pub p_ul: f64,
    pub p_dl: f64,
    pub noise_power: f64,
    pub area_side: f64,
    pub se_qos_unicast: f64,
    pub se_qos_multicast: f64,
    pub w1: f64,
    pub w2: f64,
    /// Per-AP fronthaul cap; `f64::INFINITY` disables the constraint.
    pub fronthaul_cap: f64,
    pub assoc_cap: usize,
    pub rng_seed: u64,
}

/// -92 dBm in watts.
pub const DEFAULT_NOISE_POWER_W: f64 = 6.309_573_444_801_943e-13;

impl SystemConfig {
    /// Desk-scale defaults: 1 km square, L = 12, U = 3, M = 2 groups of 2,
    /// 1 W downlink, 0.1 W uplink, -92 dBm noise, 0.2 bit/s/Hz QoS.
    pub fn desk_default() -> Self {
        Self::with_users(20, 12, 3, vec![2, 2])
    }

    /// Defaults with the given sizes; `pilot_len` and `assoc_cap` are set to
    /// `U + M`.
    pub fn with_users(n_aps: usize, antennas: usize, n_unicast: usize, group_sizes: Vec<usize>) -> Self {
        let entities = n_unicast + group_sizes.len();
        SystemConfig {
            n_aps,
            antennas_per_ap: antennas,
            n_unicast,
            n_groups: group_sizes.len(),
            group_sizes,
            pilot_len: entities,
            coherence_len: 200,
            p_ul: 0.1,
            p_dl: 1.0,
            noise_power: DEFAULT_NOISE_POWER_W,
            area_side: 1000.0,
            se_qos_unicast: 0.2,
            se_qos_multicast: 0.2,
            w1: 0.5,
            w2: 0.5,
            fronthaul_cap: f64::INFINITY,
            assoc_cap: entities,
            rng_seed: 1,
        }
    }

    pub fn n_entities(&self) -> usize {
        self.n_unicast + self.n_groups
    }

    /// Checks every invariant and normalizes powers by the noise power.
    /// `precoder` adds the zero-forcing dimension check when it is `Zf`.
    pub fn validate(&self, precoder: Option<Precoder>) -> Result<ValidConfig> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_aps == 0 {
            return invalid("n_aps must be at least 1".into());
        }
        if self.antennas_per_ap == 0 {
            return invalid("antennas_per_ap must be at least 1".into());
        }
        if self.group_sizes.len() != self.n_groups {
            return invalid(format!(
                "group_sizes has {} entries but n_groups = {}",
                self.group_sizes.len(),
                self.n_groups
            ));
        }
        if self.group_sizes.iter().any(|&k| k == 0) {
            return invalid("every multicast group needs at least one user".into());
        }
        let entities = self.n_entities();
        if entities == 0 {
            return invalid("no users to serve".into());
        }
        if self.pilot_len < entities || self.pilot_len > self.coherence_len {
            return Err(Error::PilotLength {
                tau: self.pilot_len,
                needed: entities,
                coherence: self.coherence_len,
            });
        }
        if self.pilot_len == self.coherence_len {
            return invalid("pilot_len = coherence_len leaves no data symbols".into());
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) || (self.w1 + self.w2 - 1.0).abs() > 1e-12 {
            return Err(Error::WeightSum {
                w1: self.w1,
                w2: self.w2,
            });
        }
        if self.assoc_cap < 1 || self.assoc_cap > entities {
            return Err(Error::AssocCap {
                cap: self.assoc_cap,
                entities,
            });
        }
        for (name, v) in [
            ("p_ul", self.p_ul),
            ("p_dl", self.p_dl),
            ("noise_power", self.noise_power),
            ("area_side", self.area_side),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be finite and positive (got {v})"));
            }
        }
        if !(self.fronthaul_cap > 0.0) {
            return invalid(format!("fronthaul_cap must be positive (got {})", self.fronthaul_cap));
        }
        for (name, v) in [
            ("se_qos_unicast", self.se_qos_unicast),
            ("se_qos_multicast", self.se_qos_multicast),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return invalid(format!("{name} must be finite and nonnegative (got {v})"));
            }
        }
        let valid = ValidConfig {
            dims: Dims::new(self.n_aps, self.antennas_per_ap, self.n_unicast, &self.group_sizes),
            p_ul_norm: self.p_ul / self.noise_power,
            p_dl_norm: self.p_dl / self.noise_power,
            cfg: self.clone(),
        };
        if let Some(p) = precoder {
            valid.require(p)?;
        }
        Ok(valid)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse::<ConfigFile>()?.resolve()
    }
}

/// A configuration that passed [`SystemConfig::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidConfig {
    cfg: SystemConfig,
    dims: Dims,
    p_ul_norm: f64,
    p_dl_norm: f64,
}

impl ValidConfig {
    pub fn cfg(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    /// Uplink power over noise power.
    pub fn p_ul_norm(&self) -> f64 {
        self.p_ul_norm
    }

    /// Downlink power over noise power.
    pub fn p_dl_norm(&self) -> f64 {
        self.p_dl_norm
    }

    pub fn tau(&self) -> f64 {
        self.cfg.pilot_len as f64
    }

    /// Fraction of the coherence interval used for data, `(T - tau) / T`.
    pub fn prelog(&self) -> f64 {
        (self.cfg.coherence_len - self.cfg.pilot_len) as f64 / self.cfg.coherence_len as f64
    }

    pub fn require(&self, precoder: Precoder) -> Result<()> {
        if precoder == Precoder::Zf && self.dims.antennas <= self.dims.n_entities() {
            return Err(Error::ZfDimension {
                antennas: self.dims.antennas,
                entities: self.dims.n_entities(),
            });
        }
        Ok(())
    }

    /// QoS threshold of receiving user `i`.
    pub fn qos_of_user(&self, i: usize) -> f64 {
        if i < self.dims.n_unicast {
            self.cfg.se_qos_unicast
        } else {
            self.cfg.se_qos_multicast
        }
    }

    /// Objective weight of receiving user `i`.
    pub fn weight_of_user(&self, i: usize) -> f64 {
        if i < self.dims.n_unicast {
            self.cfg.w1
        } else {
            self.cfg.w2
        }
    }
}

/// Flat `key = value` configuration file. Every key is optional; missing keys
/// fall back to [`SystemConfig::desk_default`], with `pilot_len` and
/// `assoc_cap` defaulting to `U + M` of the resolved user counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_aps: Option<usize>,
    pub antennas_per_ap: Option<usize>,
    pub n_unicast: Option<usize>,
    pub n_groups: Option<usize>,
    pub group_sizes: Option<Vec<usize>>,
    pub pilot_len: Option<usize>,
    pub coherence_len: Option<usize>,
    pub p_ul: Option<f64>,
    pub p_dl: Option<f64>,
    pub noise_power: Option<f64>,
    pub area_side: Option<f64>,
    pub se_qos_unicast: Option<f64>,
    pub se_qos_multicast: Option<f64>,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub fronthaul_cap: Option<f64>,
    pub assoc_cap: Option<usize>,
    pub rng_seed: Option<u64>,
}

impl std::str::FromStr for ConfigFile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

impl ConfigFile {
    pub fn resolve(&self) -> Result<SystemConfig> {
        let d = SystemConfig::desk_default();
        let n_unicast = self.n_unicast.unwrap_or(d.n_unicast);
        let group_sizes = match (&self.group_sizes, self.n_groups) {
            (Some(g), _) => g.clone(),
            // n_groups alone: keep the default group size
            (None, Some(m)) => vec![d.group_sizes[0]; m],
            (None, None) => d.group_sizes.clone(),
        };
        let n_groups = self.n_groups.unwrap_or(group_sizes.len());
        let entities = n_unicast + n_groups;
        Ok(SystemConfig {
            n_aps: self.n_aps.unwrap_or(d.n_aps),
            antennas_per_ap: self.antennas_per_ap.unwrap_or(d.antennas_per_ap),
            n_unicast,
            n_groups,
            group_sizes,
            pilot_len: self.pilot_len.unwrap_or(entities),
            coherence_len: self.coherence_len.unwrap_or(d.coherence_len),
            p_ul: self.p_ul.unwrap_or(d.p_ul),
            p_dl: self.p_dl.unwrap_or(d.p_dl),
            noise_power: self.noise_power.unwrap_or(d.noise_power),
            area_side: self.area_side.unwrap_or(d.area_side),
            se_qos_unicast: self.se_qos_unicast.unwrap_or(d.se_qos_unicast),
            se_qos_multicast: self.se_qos_multicast.unwrap_or(d.se_qos_multicast),
            w1: self.w1.unwrap_or(d.w1),
            w2: self.w2.unwrap_or(d.w2),
            fronthaul_cap: self.fronthaul_cap.unwrap_or(d.fronthaul_cap),
            assoc_cap: self.assoc_cap.unwrap_or(entities),
            rng_seed: self.rng_seed.unwrap_or(d.rng_seed),
        })
    }
}

impl From<&SystemConfig> for ConfigFile {
    fn from(c: &SystemConfig) -> Self {
        ConfigFile {
            n_aps: Some(c.n_aps),
            antennas_per_ap: Some(c.antennas_per_ap),
            n_unicast: Some(c.n_unicast),
            n_groups: Some(c.n_groups),
            group_sizes: Some(c.group_sizes.clone()),
            pilot_len: Some(c.pilot_len),
            coherence_len: Some(c.coherence_len),
            p_ul: Some(c.p_ul),
            p_dl: Some(c.p_dl),
            noise_power: Some(c.noise_power),
            area_side: Some(c.area_side),
            se_qos_unicast: Some(c.se_qos_unicast),
            se_qos_multicast: Some(c.se_qos_multicast),
            w1: Some(c.w1),
            w2: Some(c.w2),
            fronthaul_cap: Some(c.fronthaul_cap),
            assoc_cap: Some(c.assoc_cap),
            rng_seed: Some(c.rng_seed),
        }
    }
}
