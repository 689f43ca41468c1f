//! Nominal SINRs and uplink-downlink duality.
//!
//! The cluster processor cannot evaluate exact SINRs: it only knows channel
//! estimates on its own association edges and the large-scale coefficients
//! of everyone else. The nominal SINR replaces each unknown cross term by an
//! isotropic surrogate, and it is the quantity for which an UL-DL duality
//! holds: reusing the UL receivers as DL precoders with a particular power
//! allocation reproduces the nominal UL SINRs, spending total power equal to
//! the number of active UEs.

use nalgebra::DMatrix;

use crate::association::AssociationGraph;
use crate::csi::EstimateSet;
use crate::geometry::LargeScaleMap;
use crate::{CMat, Error, Result};

/// Cross-coupling coefficients between every pair of active UEs.
///
/// `theta[(a, b)]` with `a != b` is the nominal power UE `a`'s signal leaks
/// into UE `b`'s combiner: the coherent estimate product where the clusters
/// overlap plus `beta / |C_b|` where RU `l` in `C_b` does not serve `a`.
/// The diagonal `theta[(k, k)]` is the nominal signal power of UE `k`.
/// Outage UEs keep zero rows and columns.
pub struct NominalCoefficients {
    pub theta: DMatrix<f64>,
    pub active: Vec<usize>,
}

/// Builds the coupling matrix for a set of assembled unit-norm receivers
/// `v` (`LM x K`, zero outside each UE's cluster).
///
/// The per-block receiver norms are deliberately replaced by the constant
/// `1/|C_b|` in the isotropic term; the duality solve relies on this
/// symmetric form.
pub fn nominal_coefficients(
    v: &CMat,
    est: &EstimateSet,
    lsfc: &LargeScaleMap,
    graph: &AssociationGraph,
) -> NominalCoefficients {
    let m = est.m_antennas;
    let k_total = graph.num_ues;
    let active = graph.active_ues();
    let mut theta = DMatrix::zeros(k_total, k_total);
    for &b in &active {
        let cluster = &graph.clusters[b];
        let iso_weight = 1.0 / cluster.len() as f64;
        for &a in &active {
            let mut coherent = crate::C64::new(0.0, 0.0);
            let mut isotropic = 0.0;
            for &l in cluster {
                match est.block(l, a) {
                    Some(h) => {
                        let vb = v.generic_view((l * m, b), (nalgebra::Dyn(m), nalgebra::U1));
                        coherent += vb.dotc(&h);
                    }
                    None => isotropic += lsfc.beta[l][a],
                }
            }
            theta[(a, b)] = coherent.norm_sqr() + iso_weight * isotropic;
        }
    }
    NominalCoefficients { theta, active }
}

impl NominalCoefficients {
    /// Nominal UL SINR of UE `k` at unit per-UE power: signal over noise
    /// plus the leakage of every other active UE into `k`'s combiner.
    pub fn ul_sinr(&self, snr: f64, k: usize) -> f64 {
        let signal = self.theta[(k, k)];
        if signal == 0.0 {
            return 0.0;
        }
        let mut interference = 0.0;
        for a in 0..self.theta.nrows() {
            if a != k {
                interference += self.theta[(a, k)];
            }
        }
        signal / (1.0 / snr + interference)
    }

    pub fn ul_sinrs(&self, snr: f64) -> Vec<f64> {
        (0..self.theta.nrows()).map(|k| self.ul_sinr(snr, k)).collect()
    }

    /// Nominal DL SINR of UE `k` when the UL receivers are reused as
    /// precoders with powers `q`.
    pub fn dl_sinr(&self, snr: f64, q: &[f64], k: usize) -> f64 {
        let signal = self.theta[(k, k)] * q[k];
        if signal == 0.0 {
            return 0.0;
        }
        let mut interference = 0.0;
        for j in 0..self.theta.ncols() {
            if j != k {
                interference += self.theta[(k, j)] * q[j];
            }
        }
        signal / (1.0 / snr + interference)
    }

    pub fn dl_sinrs(&self, snr: f64, q: &[f64]) -> Vec<f64> {
        (0..self.theta.nrows()).map(|k| self.dl_sinr(snr, q, k)).collect()
    }
}

/// DL powers that hit the nominal UL SINRs, plus the intermediate scaling.
pub struct PowerAllocation {
    /// Per-UE DL power (zero for outage UEs); sums to the active UE count
    /// when the targets are the nominal UL SINRs at unit power.
    pub q: Vec<f64>,
    pub mu: Vec<f64>,
}

/// Solves the duality linear system for the DL powers that achieve the
/// target nominal SINRs with the UL receivers reused as precoders.
pub fn dual_power_allocation(
    coeffs: &NominalCoefficients,
    targets: &[f64],
    snr: f64,
) -> Result<PowerAllocation> {
    let k_total = coeffs.theta.nrows();
    let n = coeffs.active.len();
    let mut mu_red = nalgebra::DVector::zeros(n);
    for (i, &k) in coeffs.active.iter().enumerate() {
        let signal = coeffs.theta[(k, k)];
        if !(signal > 0.0) {
            return Err(Error::Power(format!("UE {k} has zero nominal signal power")));
        }
        let g = targets[k];
        mu_red[i] = g / ((1.0 + g) * signal);
    }
    // A = I - diag(mu) * Theta over the active UEs; the diagonal of theta
    // already carries the signal coefficients.
    let mut a = DMatrix::identity(n, n);
    for (i, &k) in coeffs.active.iter().enumerate() {
        for (j, &l) in coeffs.active.iter().enumerate() {
            a[(i, j)] -= mu_red[i] * coeffs.theta[(k, l)];
        }
    }
    let rhs = mu_red.clone() / snr;
    let lu = a.clone().lu();
    let mut q_red = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Power("duality power system is singular".into()))?;
    // One step of iterative refinement keeps the fixed point tight when the
    // system is ill-conditioned.
    let residual = &rhs - &a * &q_red;
    if let Some(correction) = lu.solve(&residual) {
        q_red += correction;
    }

    let mut q = vec![0.0; k_total];
    let mut mu = vec![0.0; k_total];
    for (i, &k) in coeffs.active.iter().enumerate() {
        q[k] = q_red[i];
        mu[k] = mu_red[i];
    }
    Ok(PowerAllocation { q, mu })
}

/// SNR of the virtual UL that mimics a DL with per-RU power budget `p_ru`:
/// each UE virtually transmits `L*P_ru/K`, so the ratio to the noise power
/// is `L*P_ru/(K*N0)`.
pub fn virtual_ul_snr(num_rus: usize, num_ues: usize, p_ru_mw: f64, n0_mw: f64) -> f64 {
    num_rus as f64 * p_ru_mw / (num_ues as f64 * n0_mw)
}
