//! Comparison schemes: LSFD combining built from fading statistics, and
//! per-RU zero-forcing precoders (full and partial) with local power rules.
//!
//! LSFD keeps the per-RU LMMSE front end but freezes the cluster combining
//! weights at values computed from expectations over the fading, so the
//! cluster processor never needs instantaneous cross-RU CSI. The local
//! (partial) zero-forcing precoders do the opposite trade: every RU precodes
//! on its own, with no cluster coordination beyond the association itself.

use rand::Rng;

use crate::association::AssociationGraph;
use crate::channel::{draw_channel_matrix, AngularSupport};
use crate::csi::{estimate_set, synthesize_pilot_field, CsiMode, PilotBook};
use crate::geometry::LargeScaleMap;
use crate::receivers::{lmmse_receivers, LocalLmmse};
use crate::{C64, CMat, CVec, Error, Result};

/// Columns whose Gram-Schmidt residual falls below this fraction of their
/// norm are treated as linearly dependent on the already-selected set.
pub const INDEPENDENCE_TOL: f64 = 1e-6;

/// Per-UE expectations driving the LSFD weights.
pub struct LsfdStats {
    /// `E[a_k]`: expected per-RU signal gains, length `|C_k|`.
    pub expected_a: Vec<CVec>,
    /// Composed combining matrix `E[D_k] + snr * sum_j E[g_j g_j^H]`.
    pub gamma: Vec<CMat>,
    pub draws: usize,
}

/// Estimates the LSFD expectations by Monte Carlo over `num_draws` fading
/// realizations of the given layout.
///
/// Each draw re-estimates the channels exactly as the instantaneous scheme
/// would (same estimator mode, same pilot field synthesis) and accumulates
/// the per-cluster moments; nothing instantaneous leaks into the output.
#[allow(clippy::too_many_arguments)]
pub fn lsfd_statistics(
    lsfc: &LargeScaleMap,
    supports: &[Vec<AngularSupport>],
    graph: &AssociationGraph,
    mode: CsiMode,
    book: &PilotBook,
    m_antennas: usize,
    snr: f64,
    num_draws: usize,
    fading_rng: &mut impl Rng,
    noise_rng: &mut impl Rng,
) -> Result<LsfdStats> {
    if num_draws == 0 {
        return Err(Error::Estimation("LSFD needs at least one statistics draw".into()));
    }
    let m = m_antennas;

    let mut expected_a: Vec<CVec> = graph
        .clusters
        .iter()
        .map(|c| CVec::zeros(c.len()))
        .collect();
    let mut diag: Vec<Vec<f64>> = graph.clusters.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut cross: Vec<CMat> = graph
        .clusters
        .iter()
        .map(|c| CMat::zeros(c.len(), c.len()))
        .collect();

    for _ in 0..num_draws {
        let h = draw_channel_matrix(lsfc, supports, m, fading_rng);
        let field = if mode == CsiMode::Ideal {
            None
        } else {
            Some(synthesize_pilot_field(&h, graph, book, noise_rng))
        };
        let est = estimate_set(mode, &h, supports, graph, book, field.as_ref())?;
        let lmmse = lmmse_receivers(&est, lsfc, graph, snr)?;
        for k in graph.active_ues() {
            let cluster = &graph.clusters[k];
            let vs: Vec<CVec> = cluster
                .iter()
                .map(|&l| lmmse.vector(graph, l, k).expect("cluster RU serves k"))
                .collect();
            for (i, (&l, v)) in cluster.iter().zip(&vs).enumerate() {
                expected_a[k][i] += v.dotc(&est.block(l, k).expect("edge"));
                diag[k][i] += lmmse.sigma2[l] * v.norm_squared();
            }
            for j in graph.cluster_neighborhood(k) {
                if j == k {
                    continue;
                }
                let mut g = CVec::zeros(cluster.len());
                for (i, (&l, v)) in cluster.iter().zip(&vs).enumerate() {
                    if let Some(hj) = est.block(l, j) {
                        g[i] = v.dotc(&hj);
                    }
                }
                cross[k].gerc(C64::new(1.0, 0.0), &g, &g, C64::new(1.0, 0.0));
            }
        }
    }

    let scale = 1.0 / num_draws as f64;
    let mut gamma = Vec::with_capacity(graph.num_ues);
    for k in 0..graph.num_ues {
        expected_a[k] *= C64::new(scale, 0.0);
        let n = graph.clusters[k].len();
        let mut g = &cross[k] * C64::new(snr * scale, 0.0);
        for i in 0..n {
            g[(i, i)] += C64::new(diag[k][i] * scale, 0.0);
        }
        gamma.push(g);
    }
    Ok(LsfdStats { expected_a, gamma, draws: num_draws })
}

/// Fixed combining weights `w_k = Gamma_k^-1 E[a_k]`, one per UE.
pub fn lsfd_weights(stats: &LsfdStats) -> Result<Vec<CVec>> {
    stats
        .gamma
        .iter()
        .zip(&stats.expected_a)
        .map(|(g, a)| {
            if a.is_empty() {
                return Ok(CVec::zeros(0));
            }
            match nalgebra::Cholesky::new(g.clone()) {
                Some(chol) => Ok(chol.solve(a)),
                None => g
                    .clone()
                    .lu()
                    .solve(a)
                    .ok_or_else(|| Error::Receiver("singular LSFD combining matrix".into())),
            }
        })
        .collect()
}

/// Stacks the instantaneous per-RU vectors under the fixed LSFD weights into
/// unit-norm global receivers (`LM x K`, zero columns for outage UEs).
pub fn assemble_with_weights(
    lmmse: &LocalLmmse,
    graph: &AssociationGraph,
    m_antennas: usize,
    weights: &[CVec],
) -> Result<CMat> {
    let mut v = CMat::zeros(graph.num_rus * m_antennas, graph.num_ues);
    for k in graph.active_ues() {
        let mut col = CVec::zeros(graph.num_rus * m_antennas);
        for (i, &l) in graph.clusters[k].iter().enumerate() {
            let vl = lmmse
                .vector(graph, l, k)
                .ok_or_else(|| Error::Receiver(format!("RU {l} does not serve UE {k}")))?;
            col.rows_mut(l * m_antennas, m_antennas)
                .axpy(weights[k][i], &vl, C64::new(0.0, 0.0));
        }
        let norm = col.norm();
        if !(norm > 0.0) {
            return Err(Error::Receiver(format!("zero LSFD receiver for UE {k}")));
        }
        col /= C64::new(norm, 0.0);
        v.set_column(k, &col);
    }
    Ok(v)
}

/// Unnormalized zero-forcing pseudoinverse `H (H^H H)^-1`.
///
/// Requires at least as many antennas as columns and full column rank;
/// callers that cannot guarantee this use [`lpzf_precoder`] instead.
pub fn zf_pseudoinverse(h: &CMat) -> Result<CMat> {
    let (m, n) = h.shape();
    if n == 0 {
        return Ok(CMat::zeros(m, 0));
    }
    if m < n {
        return Err(Error::Receiver(format!(
            "{m} antennas cannot zero-force {n} users"
        )));
    }
    let gram = h.adjoint() * h;
    let inv = match nalgebra::Cholesky::new(gram.clone()) {
        Some(chol) => chol.inverse(),
        None => gram
            .try_inverse()
            .ok_or_else(|| Error::Receiver("rank-deficient channel matrix".into()))?,
    };
    let pinv = h * inv;
    // Rounding can push an exactly singular Gram through the factorization;
    // the defining identity is the reliable rank test.
    let mut residual = h.adjoint() * &pinv;
    for i in 0..n {
        residual[(i, i)] -= C64::new(1.0, 0.0);
    }
    if residual.norm() > 1e-8 * (n as f64).sqrt() {
        return Err(Error::Receiver("rank-deficient channel matrix".into()));
    }
    Ok(pinv)
}

/// Local zero-forcing precoder: normalized pseudoinverse columns.
pub fn lzf_precoder(h: &CMat) -> Result<CMat> {
    let mut u = zf_pseudoinverse(h)?;
    for mut col in u.column_iter_mut() {
        let norm = col.norm();
        if !(norm > 0.0) {
            return Err(Error::Receiver("zero pseudoinverse column".into()));
        }
        col /= C64::new(norm, 0.0);
    }
    Ok(u)
}

/// One RU's local precoding state.
pub struct RuPrecoder {
    /// Served UEs, aligned with the columns of `u`.
    pub ues: Vec<usize>,
    /// Unit-norm precoding columns, `M x |U_l|`.
    pub u: CMat,
    /// UEs precoded by zero forcing.
    pub zf_ues: Vec<usize>,
    /// UEs demoted to matched-filter transmission.
    pub mrt_ues: Vec<usize>,
}

/// Local partial zero forcing at one RU.
///
/// Greedily admits UEs into the ZF set by decreasing large-scale coefficient
/// as long as the antenna budget allows and the new estimated channel is
/// linearly independent of the already-admitted ones; everyone else gets
/// normalized matched-filter precoding.
pub fn lpzf_precoder(h: &CMat, served: &[usize], beta: &[f64]) -> Result<RuPrecoder> {
    let (m, n) = h.shape();
    assert_eq!(n, served.len(), "one channel column per served UE");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        beta[served[b]]
            .partial_cmp(&beta[served[a]])
            .expect("finite beta")
            .then(served[a].cmp(&served[b]))
    });

    let mut basis: Vec<CVec> = Vec::new();
    let mut zf_local: Vec<usize> = Vec::new();
    let mut mrt_local: Vec<usize> = Vec::new();
    for &i in &order {
        let col = h.column(i).into_owned();
        if zf_local.len() < m {
            let mut residual = col.clone();
            for b in &basis {
                let c = b.dotc(&residual);
                residual.axpy(-c, b, C64::new(1.0, 0.0));
            }
            let rnorm = residual.norm();
            if rnorm > INDEPENDENCE_TOL * col.norm() {
                basis.push(residual / C64::new(rnorm, 0.0));
                zf_local.push(i);
                continue;
            }
        }
        mrt_local.push(i);
    }

    let mut u = CMat::zeros(m, n);
    if !zf_local.is_empty() {
        let mut hz = CMat::zeros(m, zf_local.len());
        for (c, &i) in zf_local.iter().enumerate() {
            hz.set_column(c, &h.column(i));
        }
        let uz = lzf_precoder(&hz)?;
        for (c, &i) in zf_local.iter().enumerate() {
            u.set_column(i, &uz.column(c));
        }
    }
    for &i in &mrt_local {
        let col = h.column(i).into_owned();
        let norm = col.norm();
        if !(norm > 0.0) {
            return Err(Error::Receiver("zero channel estimate in MRT set".into()));
        }
        u.set_column(i, &(col / C64::new(norm, 0.0)));
    }

    zf_local.sort_unstable();
    mrt_local.sort_unstable();
    Ok(RuPrecoder {
        ues: served.to_vec(),
        u,
        zf_ues: zf_local.iter().map(|&i| served[i]).collect(),
        mrt_ues: mrt_local.iter().map(|&i| served[i]).collect(),
    })
}

/// Per-RU power split across the served UEs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerRule {
    /// Equal share `P_ru / |U_l|`.
    Epa,
    /// Share proportional to the large-scale coefficient.
    Ppa,
}

/// Splits the RU budget `p_ru` over the served UEs; the shares always sum
/// to the full budget.
pub fn local_power(
    served: &[usize],
    beta_row: &[f64],
    p_ru: f64,
    rule: PowerRule,
) -> Result<Vec<f64>> {
    if served.is_empty() {
        return Err(Error::Power("no served UEs to allocate power to".into()));
    }
    match rule {
        PowerRule::Epa => Ok(vec![p_ru / served.len() as f64; served.len()]),
        PowerRule::Ppa => {
            let total: f64 = served.iter().map(|&k| beta_row[k]).sum();
            if !(total > 0.0) {
                return Err(Error::Power("zero total large-scale coefficient".into()));
            }
            Ok(served.iter().map(|&k| p_ru * beta_row[k] / total).collect())
        }
    }
}

/// Globally assembled DL precoder: unit-norm stacked columns plus per-UE
/// total powers.
pub struct DlPrecoder {
    /// `LM x K`, unit columns for served UEs, zero for outage.
    pub u: CMat,
    /// `q[k] = sum_l q_{l,k}`; sums to `L * P_ru` over all UEs when every
    /// RU serves someone.
    pub q: Vec<f64>,
}

/// Stacks per-RU precoding columns weighted by the square roots of the
/// local powers into global unit-norm precoders.
pub fn assemble_dl_precoder(
    precoders: &[RuPrecoder],
    powers: &[Vec<f64>],
    graph: &AssociationGraph,
    m_antennas: usize,
) -> Result<DlPrecoder> {
    let mut u = CMat::zeros(graph.num_rus * m_antennas, graph.num_ues);
    let mut q = vec![0.0; graph.num_ues];
    for k in graph.active_ues() {
        let mut col = CVec::zeros(graph.num_rus * m_antennas);
        for &l in &graph.clusters[k] {
            let i = precoders[l]
                .ues
                .binary_search(&k)
                .map_err(|_| Error::Receiver(format!("RU {l} precoder misses UE {k}")))?;
            let amp = C64::new(powers[l][i].sqrt(), 0.0);
            col.rows_mut(l * m_antennas, m_antennas)
                .axpy(amp, &precoders[l].u.column(i).into_owned(), C64::new(0.0, 0.0));
            q[k] += powers[l][i];
        }
        let norm = col.norm();
        if norm > 0.0 {
            col /= C64::new(norm, 0.0);
        }
        u.set_column(k, &col);
    }
    Ok(DlPrecoder { u, q })
}
