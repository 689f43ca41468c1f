//! Node placement, torus geometry, and large-scale fading.
//!
//! RUs and UEs are dropped uniformly on a square that wraps around at the
//! edges (a flat torus), which removes boundary artifacts without growing the
//! simulated area. Link gains follow the 3GPP urban-microcell street-canyon
//! model: distance-dependent LOS probability, separate LOS/NLOS pathloss
//! slopes on the 3-D distance, and lognormal shadowing.

use crate::scenario::SimConfig;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{BufRead, Write};

/// Positions of all nodes on the torus. Coordinates lie in `[0, side)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub side: f64,
    pub rus: Vec<[f64; 2]>,
    pub ues: Vec<[f64; 2]>,
}

/// Draws RU and UE positions i.i.d. uniform over the square.
pub fn place_nodes(cfg: &SimConfig, rng: &mut impl Rng) -> NetworkLayout {
    let side = cfg.area_side;
    let draw = |n: usize, rng: &mut dyn rand::RngCore| -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)])
            .collect()
    };
    let rus = draw(cfg.num_rus, rng);
    let ues = draw(cfg.num_ues, rng);
    NetworkLayout { side, rus, ues }
}

/// Signed displacement `b - a` wrapped per axis into `[-side/2, side/2)`.
pub fn torus_delta(a: [f64; 2], b: [f64; 2], side: f64) -> [f64; 2] {
    let wrap = |d: f64| d - side * (d / side).round();
    [wrap(b[0] - a[0]), wrap(b[1] - a[1])]
}

/// Shortest 2-D distance on the torus.
pub fn torus_distance(a: [f64; 2], b: [f64; 2], side: f64) -> f64 {
    let d = torus_delta(a, b, side);
    d[0].hypot(d[1])
}

/// Angle of the shortest path from RU `l` to UE `k`, in `(-pi, pi]`.
///
/// Uses the wrapped displacement so that the direction is consistent with the
/// distance actually used for the pathloss.
pub fn bearing(layout: &NetworkLayout, l: usize, k: usize) -> f64 {
    let d = torus_delta(layout.rus[l], layout.ues[k], layout.side);
    d[1].atan2(d[0])
}

/// Street-canyon pathloss model with LOS/NLOS mixture and shadowing.
#[derive(Debug, Clone, Copy)]
pub struct PathlossModel {
    pub carrier_ghz: f64,
    pub ru_height_m: f64,
    pub ue_height_m: f64,
    pub sigma_los_db: f64,
    pub sigma_nlos_db: f64,
}

impl PathlossModel {
    pub fn from_config(cfg: &SimConfig) -> Self {
        PathlossModel {
            carrier_ghz: cfg.carrier_ghz,
            ru_height_m: cfg.ru_height_m,
            ue_height_m: cfg.ue_height_m,
            sigma_los_db: cfg.shadow_sigma_los_db,
            sigma_nlos_db: cfg.shadow_sigma_nlos_db,
        }
    }

    /// Vertical distance between RU and UE antennas.
    pub fn height_offset(&self) -> f64 {
        (self.ru_height_m - self.ue_height_m).abs()
    }

    /// 3-D link distance for a 2-D ground distance.
    pub fn d3(&self, d2: f64) -> f64 {
        d2.hypot(self.height_offset())
    }

    /// LOS pathloss in dB at 3-D distance `d3` (meters).
    pub fn pl_los_db(&self, d3: f64) -> f64 {
        32.4 + 21.0 * d3.log10() + 20.0 * self.carrier_ghz.log10()
    }

    /// NLOS pathloss in dB at 3-D distance `d3`; never below the LOS value.
    pub fn pl_nlos_db(&self, d3: f64) -> f64 {
        let nlos = 35.3 * d3.log10() + 22.4 + 21.3 * self.carrier_ghz.log10()
            - 0.3 * (self.ue_height_m - 1.5);
        self.pl_los_db(d3).max(nlos)
    }

    /// Probability that a link of 2-D distance `d2` is line-of-sight.
    pub fn los_probability(&self, d2: f64) -> f64 {
        let e = (-d2 / 36.0).exp();
        (18.0 / d2).min(1.0) * (1.0 - e) + e
    }

    /// Linear large-scale coefficient for a link with known LOS state and
    /// shadowing realization.
    pub fn lsfc(&self, d2: f64, los: bool, shadow_db: f64) -> Result<f64> {
        let d3 = self.d3(d2);
        if d3 <= 0.0 {
            return Err(Error::Geometry(
                "zero 3-D distance between co-located nodes".into(),
            ));
        }
        let pl = if los { self.pl_los_db(d3) } else { self.pl_nlos_db(d3) };
        Ok(10f64.powf(-(pl + shadow_db) / 10.0))
    }

    /// Mean linear large-scale coefficient at 2-D distance `d2`, averaged in
    /// closed form over the LOS/NLOS mixture and the lognormal shadowing.
    ///
    /// For `X ~ N(0, sigma^2)` in dB, `E[10^(-X/10)] = exp((sigma*ln10/10)^2/2)`,
    /// so the shadowing average is a multiplicative correction per state.
    pub fn mean_lsfc(&self, d2: f64) -> f64 {
        let d3 = self.d3(d2);
        let coef = std::f64::consts::LN_10 / 10.0;
        let corr = |sigma: f64| ((coef * sigma).powi(2) / 2.0).exp();
        let p = self.los_probability(d2);
        let beta_los = 10f64.powf(-self.pl_los_db(d3) / 10.0) * corr(self.sigma_los_db);
        let beta_nlos = 10f64.powf(-self.pl_nlos_db(d3) / 10.0) * corr(self.sigma_nlos_db);
        p * beta_los + (1.0 - p) * beta_nlos
    }
}

/// Large-scale state of every RU-UE link in a layout.
#[derive(Debug, Clone)]
pub struct LargeScaleMap {
    /// Linear large-scale coefficients, `beta[l][k]`.
    pub beta: Vec<Vec<f64>>,
    /// LOS state per link.
    pub los: Vec<Vec<bool>>,
    /// Shadowing realization per link, dB.
    pub shadow_db: Vec<Vec<f64>>,
}

/// Samples LOS states and shadowing for every link and evaluates the LSFCs.
///
/// Links are visited in row-major `(l, k)` order, consuming exactly two
/// variates per link, so the output is a pure function of the rng stream.
pub fn compute_lsfc(
    layout: &NetworkLayout,
    model: &PathlossModel,
    rng: &mut impl Rng,
) -> Result<LargeScaleMap> {
    let (l_n, k_n) = (layout.rus.len(), layout.ues.len());
    let mut beta = vec![vec![0.0; k_n]; l_n];
    let mut los = vec![vec![false; k_n]; l_n];
    let mut shadow_db = vec![vec![0.0; k_n]; l_n];
    for l in 0..l_n {
        for k in 0..k_n {
            let d2 = torus_distance(layout.rus[l], layout.ues[k], layout.side);
            let p = model.los_probability(d2.max(f64::MIN_POSITIVE));
            let is_los = rng.random::<f64>() < p;
            let sigma = if is_los { model.sigma_los_db } else { model.sigma_nlos_db };
            let x: f64 = StandardNormal.sample(rng);
            let shadow = sigma * x;
            beta[l][k] = model.lsfc(d2, is_los, shadow)?;
            los[l][k] = is_los;
            shadow_db[l][k] = shadow;
        }
    }
    Ok(LargeScaleMap { beta, los, shadow_db })
}

/// Writes a layout as `node_class,index,x,y` CSV rows.
pub fn write_layout_csv(layout: &NetworkLayout, w: &mut impl Write) -> Result<()> {
    writeln!(w, "node_class,index,x,y")?;
    for (i, p) in layout.rus.iter().enumerate() {
        writeln!(w, "ru,{},{},{}", i, p[0], p[1])?;
    }
    for (i, p) in layout.ues.iter().enumerate() {
        writeln!(w, "ue,{},{},{}", i, p[0], p[1])?;
    }
    Ok(())
}

/// Reads a layout back from the CSV format produced by [`write_layout_csv`].
pub fn read_layout_csv(side: f64, r: &mut impl BufRead) -> Result<NetworkLayout> {
    let mut rus = Vec::new();
    let mut ues = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("node_class") {
            continue;
        }
        let mut parts = t.split(',');
        let bad = || Error::Geometry(format!("layout csv line {}: {t:?}", lineno + 1));
        let class = parts.next().ok_or_else(bad)?;
        let index: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let x: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let y: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let list = match class {
            "ru" => &mut rus,
            "ue" => &mut ues,
            _ => return Err(bad()),
        };
        if index != list.len() {
            return Err(Error::Geometry(format!(
                "layout csv: {class} index {index} out of order"
            )));
        }
        list.push([x, y]);
    }
    Ok(NetworkLayout { side, rus, ues })
}
