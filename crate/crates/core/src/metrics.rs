//! Exact SINR evaluation against the full channel, ergodic rates, spectral
//! efficiency, and distribution summaries.
//!
//! Receivers and precoders are built from partial CSI, but performance is
//! always scored against the true channel matrix with interference from
//! every active UE, in or out of cluster.

use crate::{C64, CMat};

/// Exact UL SINRs for unit-norm receivers `v` (`LM x K` columns) against
/// the true channel `h` (`LM x K`).
///
/// `active[k]` marks UEs that transmit; inactive UEs neither interfere nor
/// get a SINR (their entry is 0).
pub fn exact_ul_sinrs(v: &CMat, h: &CMat, snr: f64, active: &[bool]) -> Vec<f64> {
    let k_total = h.ncols();
    let mut cross = CMat::zeros(k_total, k_total);
    // cross[(k, j)] = v_k^H h_j
    cross.gemm(C64::new(1.0, 0.0), &v.adjoint(), h, C64::new(0.0, 0.0));
    (0..k_total)
        .map(|k| {
            if !active[k] {
                return 0.0;
            }
            let signal = cross[(k, k)].norm_sqr();
            let mut interference = 0.0;
            for j in 0..k_total {
                if j != k && active[j] {
                    interference += cross[(k, j)].norm_sqr();
                }
            }
            signal / (1.0 / snr + interference)
        })
        .collect()
}

/// Exact DL SINRs for unit-norm precoders `u` with per-UE powers `q`.
///
/// Inactive UEs carry `q = 0` and therefore do not interfere; their own
/// entry is 0.
pub fn exact_dl_sinrs(u: &CMat, q: &[f64], h: &CMat, snr: f64, active: &[bool]) -> Vec<f64> {
    let k_total = h.ncols();
    let mut cross = CMat::zeros(k_total, k_total);
    // cross[(k, j)] = h_k^H u_j
    cross.gemm(C64::new(1.0, 0.0), &h.adjoint(), u, C64::new(0.0, 0.0));
    (0..k_total)
        .map(|k| {
            if !active[k] {
                return 0.0;
            }
            let signal = cross[(k, k)].norm_sqr() * q[k];
            let mut interference = 0.0;
            for j in 0..k_total {
                if j != k {
                    interference += cross[(k, j)].norm_sqr() * q[j];
                }
            }
            signal / (1.0 / snr + interference)
        })
        .collect()
}

/// Optimistic ergodic rate: sample mean of `log2(1 + SINR)` over draws.
pub fn ergodic_rate(sinr_samples: &[f64]) -> f64 {
    if sinr_samples.is_empty() {
        return 0.0;
    }
    sinr_samples.iter().map(|s| (1.0 + s).log2()).sum::<f64>() / sinr_samples.len() as f64
}

/// Net spectral efficiency after the pilot overhead of `tau_p` symbols out
/// of a `coherence`-symbol block.
pub fn spectral_efficiency(rate: f64, tau_p: usize, coherence: usize) -> f64 {
    assert!(tau_p <= coherence, "pilot overhead beyond the block");
    (1.0 - tau_p as f64 / coherence as f64) * rate
}

/// Power ratio in decibels; zero maps to negative infinity.
pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Right-continuous empirical CDF: sorted `(value, fraction <= value)`
/// pairs, one per distinct value.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in samples"));
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => points.push((*v, frac)),
        }
    }
    points
}

/// Two-sample Kolmogorov-Smirnov distance: the largest gap between the two
/// empirical CDFs.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "KS needs samples on both sides");
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|x, y| x.partial_cmp(y).expect("no NaN"));
    xb.sort_by(|x, y| x.partial_cmp(y).expect("no NaN"));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let t = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= t {
            i += 1;
        }
        while j < xb.len() && xb[j] <= t {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// Nearest-rank percentile of an unsorted sample, `p` in `[0, 1]`.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let rank = (p * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::CVec;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn_mat(rows: usize, cols: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(rows, cols, |_, _| {
            C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        })
    }

    fn unit_columns(mut m: CMat) -> CMat {
        for mut c in m.column_iter_mut() {
            let n = c.norm();
            c /= C64::new(n, 0.0);
        }
        m
    }

    /// Scalar-by-scalar expansion of the received-signal model as an oracle
    /// for the matrix-product implementation.
    #[test]
    fn ul_sinr_matches_termwise_expansion() {
        let h = randn_mat(6, 3, 10);
        let v = unit_columns(randn_mat(6, 3, 11));
        let snr = 1.7;
        let got = exact_ul_sinrs(&v, &h, snr, &[true; 3]);
        for k in 0..3 {
            let vk = v.column(k);
            let inner = |j: usize| -> C64 {
                let mut acc = C64::new(0.0, 0.0);
                for row in 0..6 {
                    acc += vk[row].conj() * h[(row, j)];
                }
                acc
            };
            let mut interference = 0.0;
            for j in 0..3 {
                if j != k {
                    interference += inner(j).norm_sqr();
                }
            }
            let expect = inner(k).norm_sqr() / (1.0 / snr + interference);
            assert_relative_eq!(got[k], expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn ul_sinr_edge_cases() {
        let h = randn_mat(4, 1, 12);
        let v = unit_columns(h.clone());
        let snr = 2.5;
        let got = exact_ul_sinrs(&v, &h, snr, &[true]);
        assert_relative_eq!(got[0], snr * h.column(0).norm_squared(), max_relative = 1e-12);

        // Receiver orthogonal to the lone interferer: pure noise denominator.
        let mut h2 = CMat::zeros(2, 2);
        h2[(0, 0)] = C64::new(1.0, 0.0);
        h2[(1, 1)] = C64::new(3.0, 0.0);
        let v2 = CMat::identity(2, 2);
        let got2 = exact_ul_sinrs(&v2, &h2, snr, &[true, true]);
        assert_relative_eq!(got2[0], snr, max_relative = 1e-12);
        assert_relative_eq!(got2[1], 9.0 * snr, max_relative = 1e-12);
    }

    #[test]
    fn inactive_ues_neither_interfere_nor_score() {
        let h = randn_mat(4, 3, 13);
        let v = unit_columns(randn_mat(4, 3, 14));
        let snr = 1.0;
        let all = exact_ul_sinrs(&v, &h, snr, &[true, true, true]);
        let masked = exact_ul_sinrs(&v, &h, snr, &[true, false, true]);
        assert_eq!(masked[1], 0.0);
        assert!(masked[0] >= all[0]);
        assert!(masked[2] >= all[2]);
        // DL: zero power is equivalent to absence.
        let q = [0.4, 0.0, 0.6];
        let dl = exact_dl_sinrs(&v, &q, &h, snr, &[true, false, true]);
        assert_eq!(dl[1], 0.0);
        let dl_drop = exact_dl_sinrs(&v, &q, &h, snr, &[true, true, true]);
        assert_relative_eq!(dl[0], dl_drop[0], max_relative = 1e-12);
    }

    #[test]
    fn dl_sinr_trivial_cases() {
        let h = randn_mat(4, 1, 15);
        let u = unit_columns(h.clone());
        let snr = 3.0;
        let got = exact_dl_sinrs(&u, &[1.0], &h, snr, &[true]);
        assert_relative_eq!(got[0], snr * h.column(0).norm_squared(), max_relative = 1e-12);

        // Zero power on every other beam: interference-free formula.
        let h2 = randn_mat(4, 3, 16);
        let u2 = unit_columns(randn_mat(4, 3, 17));
        let q = [2.0, 0.0, 0.0];
        let got2 = exact_dl_sinrs(&u2, &q, &h2, snr, &[true; 3]);
        let expect = 2.0 * h2.column(0).dotc(&u2.column(0).into_owned()).norm_sqr() * snr;
        assert_relative_eq!(got2[0], expect, max_relative = 1e-12);
    }

    /// Swap-symmetric instance: exchanging the two antennas maps UE 1 to
    /// UE 2, so with u = v and unit powers the UL and DL SINRs coincide.
    #[test]
    fn ul_and_dl_agree_on_a_symmetric_instance() {
        let a = C64::new(1.1, -0.4);
        let b = C64::new(0.3, 0.8);
        let c = C64::new(-0.6, 0.2);
        let d = C64::new(0.9, 0.5);
        let mut h = CMat::zeros(2, 2);
        h.set_column(0, &CVec::from_vec(vec![a, b]));
        h.set_column(1, &CVec::from_vec(vec![b, a]));
        let mut v = CMat::zeros(2, 2);
        v.set_column(0, &CVec::from_vec(vec![c, d]));
        v.set_column(1, &CVec::from_vec(vec![d, c]));
        let v = unit_columns(v);
        let snr = 1.3;
        let ul = exact_ul_sinrs(&v, &h, snr, &[true, true]);
        let dl = exact_dl_sinrs(&v, &[1.0, 1.0], &h, snr, &[true, true]);
        assert_relative_eq!(ul[0], dl[0], max_relative = 1e-12);
        assert_relative_eq!(ul[1], dl[1], max_relative = 1e-12);
        assert_relative_eq!(ul[0], ul[1], max_relative = 1e-12);
    }

    #[test]
    fn rates_are_invariant_to_channel_phase_rotations() {
        let h = randn_mat(4, 3, 18);
        let v = unit_columns(randn_mat(4, 3, 19));
        let snr = 0.7;
        let base = exact_ul_sinrs(&v, &h, snr, &[true; 3]);
        let mut rotated = h.clone();
        let phase = C64::new(0.0, 1.234).exp();
        for row in 0..4 {
            rotated[(row, 1)] *= phase;
        }
        let got = exact_ul_sinrs(&v, &rotated, snr, &[true; 3]);
        for k in 0..3 {
            assert_relative_eq!(got[k], base[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn ergodic_rate_examples() {
        assert_relative_eq!(ergodic_rate(&[1.0]), 1.0, epsilon = 1e-15);
        assert_eq!(ergodic_rate(&[0.0]), 0.0);
        assert_relative_eq!(ergodic_rate(&[1.0, 3.0]), 1.5, epsilon = 1e-15);
        assert_eq!(ergodic_rate(&[]), 0.0);
    }

    #[test]
    fn spectral_efficiency_applies_the_pilot_overhead() {
        assert_relative_eq!(spectral_efficiency(2.0, 40, 200), 1.6, epsilon = 1e-15);
        assert_relative_eq!(spectral_efficiency(2.0, 0, 200), 2.0, epsilon = 1e-15);
        assert_eq!(spectral_efficiency(2.0, 200, 200), 0.0);
    }

    #[test]
    fn cdf_is_a_right_continuous_step_function() {
        let cdf = empirical_cdf(&[3.0, 1.0, 2.0]);
        assert_eq!(cdf.len(), 3);
        assert_relative_eq!(cdf[1].0, 2.0);
        assert_relative_eq!(cdf[1].1, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(cdf.last().unwrap().1, 1.0, epsilon = 1e-15);

        let flat = empirical_cdf(&[5.0, 5.0, 5.0]);
        assert_eq!(flat, vec![(5.0, 1.0)]);

        let many = empirical_cdf(&[0.3, -1.0, 0.3, 7.0, 2.0]);
        for w in many.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert!(w[0].1 <= w[1].1);
        }
    }

    #[test]
    fn ks_distance_known_values() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_relative_eq!(ks_distance(&[0.0, 1.0], &[0.5]), 0.5, epsilon = 1e-15);
        // Disjoint supports: total separation.
        assert_relative_eq!(ks_distance(&[0.0, 0.1], &[5.0, 6.0]), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn percentile_nearest_rank() {
        let xs = [3.0, 1.0, 2.0];
        assert_eq!(percentile(&xs, 0.5), Some(2.0));
        assert_eq!(percentile(&xs, 0.0), Some(1.0));
        assert_eq!(percentile(&xs, 1.0), Some(3.0));
        assert_eq!(percentile(&[], 0.5), None);
    }

    #[test]
    fn db_maps_zero_to_negative_infinity() {
        assert_relative_eq!(db(100.0), 20.0, epsilon = 1e-12);
        assert!(db(0.0).is_infinite() && db(0.0) < 0.0);
    }
}
