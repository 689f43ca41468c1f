//! Simulation parameters, derived constants, and reproducible RNG streams.
//!
//! A [`SimConfig`] carries everything a run needs; [`DerivedConstants`]
//! resolves the quantities that follow from it (normalized transmit SNR,
//! nominal inter-RU distance). Randomness is organized as keyed streams so
//! that any (layout, purpose, draw) triple maps to the same generator no
//! matter how work is scheduled across threads.

use crate::{Error, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How the total downlink power budget is chosen.
///
/// `Balanced` reuses the uplink SNR so that total DL power equals total UL
/// power (`sum q = K` in normalized symbol-energy units). `PerRu` fixes a
/// physical per-RU budget instead; the DL is then dimensioned through the
/// virtual uplink at [`crate::duality::virtual_ul_snr`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DlPowerMode {
    Balanced,
    PerRu,
}

impl std::fmt::Display for DlPowerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DlPowerMode::Balanced => write!(f, "balanced"),
            DlPowerMode::PerRu => write!(f, "per_ru"),
        }
    }
}

/// Full parameter set for one simulation point.
///
/// Field names double as config-file keys and CLI flag names; see
/// [`SimConfig::apply_kv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Side of the square deployment area in meters (torus topology).
    pub area_side: f64,
    /// Number of radio units L.
    pub num_rus: usize,
    /// Number of user equipments K.
    pub num_ues: usize,
    /// Antennas per RU, M.
    pub antennas_per_ru: usize,
    /// Pilot dimension per coherence block.
    pub pilot_dim: usize,
    /// Coherence block length in symbols.
    pub coherence_block: usize,
    /// Scattering angular spread in radians.
    pub angular_spread: f64,
    /// Maximum number of RUs in a UE cluster.
    pub max_cluster_size: usize,
    /// Dimensionless admission threshold eta; a UE may enroll an RU only if
    /// beta >= eta / (M * snr).
    pub snr_threshold: f64,
    /// Noise power over the signal bandwidth, in dBm.
    pub noise_psd_dbm: f64,
    /// Carrier frequency in GHz.
    pub carrier_ghz: f64,
    /// RU antenna height in meters.
    pub ru_height_m: f64,
    /// UE antenna height in meters.
    pub ue_height_m: f64,
    /// Shadow-fading standard deviation on LOS links, dB.
    pub shadow_sigma_los_db: f64,
    /// Shadow-fading standard deviation on NLOS links, dB.
    pub shadow_sigma_nlos_db: f64,
    /// Number of independent network layouts.
    pub num_layouts: usize,
    /// Small-scale fading draws per layout.
    pub fading_draws: usize,
    /// Fading draws used to estimate long-term statistics for LSFD weights.
    pub lsfd_stat_draws: usize,
    /// Master seed; all streams derive from it.
    pub master_seed: u64,
    /// Downlink power budget mode.
    pub dl_power_mode: DlPowerMode,
    /// Per-RU downlink power in dBm (used in `per_ru` mode).
    pub ru_power_dbm: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            area_side: 225.0,
            num_rus: 10,
            num_ues: 100,
            antennas_per_ru: 64,
            pilot_dim: 40,
            coherence_block: 200,
            angular_spread: std::f64::consts::PI / 8.0,
            max_cluster_size: 10,
            snr_threshold: 1.0,
            noise_psd_dbm: -96.0,
            carrier_ghz: 3.7,
            ru_height_m: 10.0,
            ue_height_m: 1.5,
            shadow_sigma_los_db: 4.0,
            shadow_sigma_nlos_db: 7.82,
            num_layouts: 50,
            fading_draws: 100,
            lsfd_stat_draws: 500,
            master_seed: 1,
            dl_power_mode: DlPowerMode::Balanced,
            ru_power_dbm: 0.0,
        }
    }
}

impl SimConfig {
    /// Checks mutual consistency of all fields.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.area_side > 0.0) {
            return fail(format!("area_side must be positive, got {}", self.area_side));
        }
        if self.num_rus == 0 || self.num_ues == 0 || self.antennas_per_ru == 0 {
            return fail("num_rus, num_ues and antennas_per_ru must be >= 1".into());
        }
        if self.pilot_dim == 0 {
            return fail("pilot_dim must be >= 1".into());
        }
        if self.pilot_dim >= self.coherence_block {
            return fail(format!(
                "pilot_dim {} must be smaller than coherence_block {}",
                self.pilot_dim, self.coherence_block
            ));
        }
        if !(self.angular_spread > 0.0 && self.angular_spread <= 2.0 * std::f64::consts::PI) {
            return fail(format!(
                "angular_spread must lie in (0, 2*pi], got {}",
                self.angular_spread
            ));
        }
        if self.max_cluster_size == 0 {
            return fail("max_cluster_size must be >= 1".into());
        }
        if !(self.snr_threshold >= 0.0) {
            return fail(format!("snr_threshold must be >= 0, got {}", self.snr_threshold));
        }
        if !(self.carrier_ghz > 0.0) {
            return fail(format!("carrier_ghz must be positive, got {}", self.carrier_ghz));
        }
        if self.ru_height_m == self.ue_height_m {
            // A zero height offset would allow a zero 3-D distance when a UE
            // lands on top of an RU, for which the pathloss is undefined.
            return fail("ru_height_m and ue_height_m must differ".into());
        }
        if !(self.shadow_sigma_los_db >= 0.0) || !(self.shadow_sigma_nlos_db >= 0.0) {
            return fail("shadow sigmas must be >= 0".into());
        }
        if self.num_layouts == 0 || self.fading_draws == 0 {
            return fail("num_layouts and fading_draws must be >= 1".into());
        }
        if self.lsfd_stat_draws == 0 {
            return fail("lsfd_stat_draws must be >= 1".into());
        }
        Ok(())
    }

    /// Noise power in linear mW.
    pub fn noise_mw(&self) -> f64 {
        10f64.powf(self.noise_psd_dbm / 10.0)
    }

    /// Per-RU downlink budget in linear mW (only meaningful in `per_ru` mode).
    pub fn ru_power_mw(&self) -> f64 {
        10f64.powf(self.ru_power_dbm / 10.0)
    }

    /// Sets one field from its config-file key. Unknown keys and malformed
    /// values are errors so that typos in config files do not pass silently.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.trim().parse::<T>().map_err(|_| {
                Error::InvalidConfig(format!("bad value {value:?} for key {key:?}"))
            })
        }
        match key {
            "area_side" => self.area_side = num(key, value)?,
            "num_rus" => self.num_rus = num(key, value)?,
            "num_ues" => self.num_ues = num(key, value)?,
            "antennas_per_ru" => self.antennas_per_ru = num(key, value)?,
            "pilot_dim" => self.pilot_dim = num(key, value)?,
            "coherence_block" => self.coherence_block = num(key, value)?,
            "angular_spread" => self.angular_spread = num(key, value)?,
            "max_cluster_size" => self.max_cluster_size = num(key, value)?,
            "snr_threshold" => self.snr_threshold = num(key, value)?,
            "noise_psd_dbm" => self.noise_psd_dbm = num(key, value)?,
            "carrier_ghz" => self.carrier_ghz = num(key, value)?,
            "ru_height_m" => self.ru_height_m = num(key, value)?,
            "ue_height_m" => self.ue_height_m = num(key, value)?,
            "shadow_sigma_los_db" => self.shadow_sigma_los_db = num(key, value)?,
            "shadow_sigma_nlos_db" => self.shadow_sigma_nlos_db = num(key, value)?,
            "num_layouts" => self.num_layouts = num(key, value)?,
            "fading_draws" => self.fading_draws = num(key, value)?,
            "lsfd_stat_draws" => self.lsfd_stat_draws = num(key, value)?,
            "master_seed" => self.master_seed = num(key, value)?,
            "ru_power_dbm" => self.ru_power_dbm = num(key, value)?,
            "dl_power_mode" => {
                self.dl_power_mode = match value.trim() {
                    "balanced" => DlPowerMode::Balanced,
                    "per_ru" => DlPowerMode::PerRu,
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "dl_power_mode must be 'balanced' or 'per_ru', got {other:?}"
                        )))
                    }
                }
            }
            _ => return Err(Error::InvalidConfig(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parses a flat `key = value` config file body. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_config_str(&mut self, body: &str) -> Result<()> {
        for (lineno, raw) in body.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "line {}: expected 'key = value', got {raw:?}",
                    lineno + 1
                )));
            };
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// The resolved config as sorted `key = value` lines, suitable for
    /// embedding in output files. Round-trips through [`apply_config_str`].
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("angular_spread", format!("{}", self.angular_spread));
        push("antennas_per_ru", format!("{}", self.antennas_per_ru));
        push("area_side", format!("{}", self.area_side));
        push("carrier_ghz", format!("{}", self.carrier_ghz));
        push("coherence_block", format!("{}", self.coherence_block));
        push("dl_power_mode", format!("{}", self.dl_power_mode));
        push("fading_draws", format!("{}", self.fading_draws));
        push("lsfd_stat_draws", format!("{}", self.lsfd_stat_draws));
        push("master_seed", format!("{}", self.master_seed));
        push("max_cluster_size", format!("{}", self.max_cluster_size));
        push("noise_psd_dbm", format!("{}", self.noise_psd_dbm));
        push("num_layouts", format!("{}", self.num_layouts));
        push("num_rus", format!("{}", self.num_rus));
        push("num_ues", format!("{}", self.num_ues));
        push("pilot_dim", format!("{}", self.pilot_dim));
        push("ru_height_m", format!("{}", self.ru_height_m));
        push("ru_power_dbm", format!("{}", self.ru_power_dbm));
        push("shadow_sigma_los_db", format!("{}", self.shadow_sigma_los_db));
        push("shadow_sigma_nlos_db", format!("{}", self.shadow_sigma_nlos_db));
        push("snr_threshold", format!("{}", self.snr_threshold));
        push("ue_height_m", format!("{}", self.ue_height_m));
        out
    }
}

/// Quantities derived from a [`SimConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// Diameter of a disk with area A/L: the nominal inter-RU distance.
    pub inter_ru_distance: f64,
    /// Mean large-scale coefficient at 3x the nominal inter-RU distance,
    /// averaged over the LOS/NLOS mixture and lognormal shadowing.
    pub mean_lsfc_ref: f64,
    /// Normalized UL transmit SNR, fixed so `mean_lsfc_ref * M * snr = 1`.
    pub snr: f64,
    /// Implied UE transmit power in mW.
    pub ue_power_mw: f64,
}

/// Resolves the derived constants for a config.
///
/// The UE transmit power is not a free parameter: it is chosen so that a UE
/// at distance `3 * inter_ru_distance` from an RU is received, on average,
/// with per-antenna SNR such that `beta * M * snr = 1` — i.e. right at the
/// default admission threshold for `eta = 1`.
pub fn derive_constants(cfg: &SimConfig) -> DerivedConstants {
    let area = cfg.area_side * cfg.area_side;
    let inter_ru_distance = 2.0 * (area / (std::f64::consts::PI * cfg.num_rus as f64)).sqrt();
    let model = crate::geometry::PathlossModel::from_config(cfg);
    let mean_lsfc_ref = model.mean_lsfc(3.0 * inter_ru_distance);
    let snr = 1.0 / (mean_lsfc_ref * cfg.antennas_per_ru as f64);
    DerivedConstants {
        inter_ru_distance,
        mean_lsfc_ref,
        snr,
        ue_power_mw: snr * cfg.noise_mw(),
    }
}

/// What a random stream is consumed for. Each purpose gets its own stream so
/// that, e.g., adding pilot noise draws never shifts the fading draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    /// Node placement for a layout.
    Placement,
    /// LOS states and shadow fading of a layout.
    LargeScale,
    /// UE processing order during cluster formation.
    UeOrder,
    /// Small-scale channel coefficients of one fading draw.
    Fading,
    /// Receiver noise in the pilot field of one fading draw.
    PilotNoise,
    /// Fading draws consumed by LSFD statistics estimation.
    LsfdFading,
    /// Pilot noise draws consumed by LSFD statistics estimation.
    LsfdPilotNoise,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Placement => 1,
            StreamPurpose::LargeScale => 2,
            StreamPurpose::UeOrder => 3,
            StreamPurpose::Fading => 4,
            StreamPurpose::PilotNoise => 5,
            StreamPurpose::LsfdFading => 6,
            StreamPurpose::LsfdPilotNoise => 7,
        }
    }
}

/// Deterministic generator for the stream identified by
/// `(layout_index, purpose, draw_index)` under a master seed.
///
/// The four ids are packed into the 32-byte ChaCha key, so distinct tuples
/// yield independent streams and the mapping is stable across platforms,
/// thread counts, and scheduling order.
pub fn stream(master_seed: u64, layout_index: u64, purpose: StreamPurpose, draw_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&layout_index.to_le_bytes());
    key[16..24].copy_from_slice(&purpose.tag().to_le_bytes());
    key[24..32].copy_from_slice(&draw_index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn default_config_is_valid() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn validate_rejects_pilot_dim_not_below_coherence_block() {
        let mut cfg = SimConfig::default();
        cfg.pilot_dim = cfg.coherence_block;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn validate_rejects_zero_sizes_and_bad_spread() {
        let mut cfg = SimConfig::default();
        cfg.num_rus = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = SimConfig::default();
        cfg.angular_spread = 0.0;
        assert!(cfg.validate().is_err());
        cfg.angular_spread = 7.0; // > 2*pi
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn inter_ru_distance_matches_frozen_value() {
        // 2*sqrt(225^2 / (10*pi)), evaluated independently.
        let cfg = SimConfig::default();
        let d = derive_constants(&cfg);
        assert!(
            (d.inter_ru_distance - 80.2855852268747).abs() < 1e-9,
            "got {}",
            d.inter_ru_distance
        );
    }

    #[test]
    fn snr_normalization_holds() {
        for m in [8usize, 64] {
            let mut cfg = SimConfig::default();
            cfg.antennas_per_ru = m;
            let d = derive_constants(&cfg);
            let product = d.mean_lsfc_ref * m as f64 * d.snr;
            assert!((product - 1.0).abs() < 1e-12, "M={m}: product {product}");
        }
    }

    #[test]
    fn mean_lsfc_ref_matches_frozen_value() {
        // Mixture of LOS/NLOS pathloss at 240.857 m with lognormal shadowing
        // correction, computed independently of the geometry module.
        let d = derive_constants(&SimConfig::default());
        let rel = (d.mean_lsfc_ref - 5.4964384109536776e-11).abs() / 5.4964384109536776e-11;
        assert!(rel < 1e-9, "mean lsfc {} (rel err {rel})", d.mean_lsfc_ref);
    }

    #[test]
    fn streams_differ_across_ids_and_repeat_within() {
        let mut a = stream(1, 0, StreamPurpose::Fading, 0);
        let mut a2 = stream(1, 0, StreamPurpose::Fading, 0);
        let mut b = stream(1, 0, StreamPurpose::Fading, 1);
        let mut c = stream(1, 1, StreamPurpose::Fading, 0);
        let mut d = stream(1, 0, StreamPurpose::PilotNoise, 0);
        let mut e = stream(2, 0, StreamPurpose::Fading, 0);
        let va: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let va2: Vec<u64> = (0..4).map(|_| a2.next_u64()).collect();
        assert_eq!(va, va2, "same ids must replay the same stream");
        for other in [&mut b, &mut c, &mut d, &mut e] {
            let vo: Vec<u64> = (0..4).map(|_| other.next_u64()).collect();
            assert_ne!(va, vo, "distinct ids must give distinct streams");
        }
    }

    #[test]
    fn config_kv_roundtrip() {
        let mut cfg = SimConfig::default();
        cfg.num_rus = 40;
        cfg.antennas_per_ru = 16;
        cfg.dl_power_mode = DlPowerMode::PerRu;
        cfg.ru_power_dbm = -3.5;
        let text = cfg.to_kv_string();
        let mut parsed = SimConfig::default();
        parsed.apply_config_str(&text).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut cfg = SimConfig::default();
        let err = cfg.apply_kv("num_ruz", "10").unwrap_err();
        assert!(err.to_string().contains("unknown config key"));
    }
}
