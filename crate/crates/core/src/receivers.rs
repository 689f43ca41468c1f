//! Uplink receive vectors: cluster-level zero forcing and per-RU LMMSE with
//! optimal cluster combining.
//!
//! Both schemes produce one unit-norm receiver per UE, supported only on the
//! rows of that UE's cluster. Cluster-level zero forcing projects the target
//! channel onto the orthogonal complement of every other channel known
//! inside the cluster. The LMMSE path computes per-RU vectors against the
//! locally known channels plus an isotropic term for everything unknown,
//! then combines the per-RU outputs with weights that maximize the nominal
//! cluster SINR.

use crate::association::AssociationGraph;
use crate::csi::EstimateSet;
use crate::geometry::LargeScaleMap;
use crate::{C64, CMat, CVec, Error, Result};

/// Columns closer than this to perfect alignment with the target channel are
/// treated as the same direction and removed before projection.
pub const COLINEARITY_TOL: f64 = 1e-8;
/// Relative singular-value cutoff for the numerical rank of the
/// interference span.
pub const RANK_CUT_REL: f64 = 1e-10;
/// If the projected target keeps less than this fraction of its norm, the
/// target lies inside the interference span and zero forcing degenerates.
pub const DEGENERATE_REL: f64 = 1e-10;

/// Solves `A x = b` for Hermitian positive definite `A`, falling back to LU
/// if the Cholesky factorization loses definiteness to rounding.
fn hpd_solve(a: &CMat, b: &CVec) -> Result<CVec> {
    if let Some(chol) = nalgebra::Cholesky::new(a.clone()) {
        return Ok(chol.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Receiver("singular combining system".into()))
}

/// Outcome of building one cluster-level zero-forcing receiver.
pub struct ZfReceiver {
    /// Unit-norm stacked receiver, zero outside the cluster rows.
    pub v: CVec,
    /// True when the target channel was inside the interference span and the
    /// receiver fell back to the matched-filter direction.
    pub degenerate: bool,
}

/// Cluster-level zero-forcing receiver for UE `k`.
///
/// Works entirely on the compacted matrix with rows restricted to the
/// cluster and columns to the co-served UEs, so the receiver nulls exactly
/// the interference the cluster can see.
pub fn clzf_receiver(est: &EstimateSet, graph: &AssociationGraph, k: usize) -> Result<ZfReceiver> {
    let cluster = &graph.clusters[k];
    if cluster.is_empty() {
        return Err(Error::Receiver(format!("UE {k} is in outage")));
    }
    let m = est.m_antennas;
    let rows = cluster.len() * m;

    // Target channel on the cluster rows.
    let mut hbar = CVec::zeros(rows);
    for (i, &l) in cluster.iter().enumerate() {
        let block = est
            .block(l, k)
            .ok_or_else(|| Error::Receiver(format!("missing estimate ({l},{k})")))?;
        hbar.rows_mut(i * m, m).copy_from(&block);
    }
    let hbar_norm = hbar.norm();

    // Interference columns: co-served UEs, blocks present where the edge
    // exists, zero elsewhere. Columns effectively colinear with the target
    // cannot be nulled without killing the target, so they are skipped (the
    // check also discards all-zero columns).
    let neighbors: Vec<usize> = graph
        .cluster_neighborhood(k)
        .into_iter()
        .filter(|&j| j != k)
        .collect();
    let mut cols: Vec<CVec> = Vec::with_capacity(neighbors.len());
    for &j in &neighbors {
        let mut col = CVec::zeros(rows);
        for (i, &l) in cluster.iter().enumerate() {
            if let Some(block) = est.block(l, j) {
                col.rows_mut(i * m, m).copy_from(&block);
            }
        }
        let overlap = hbar.dotc(&col).norm();
        if overlap >= (1.0 - COLINEARITY_TOL) * hbar_norm * col.norm() {
            continue;
        }
        cols.push(col);
    }

    let mut v = hbar.clone();
    let mut degenerate = false;
    if !cols.is_empty() {
        let mut hmat = CMat::zeros(rows, cols.len());
        for (i, c) in cols.iter().enumerate() {
            hmat.set_column(i, c);
        }
        // Orthonormal basis of the interference span via SVD with a
        // relative rank cut.
        let svd = hmat.svd(true, false);
        let u = svd.u.as_ref().expect("svd with compute_u");
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .take_while(|&&s| s > RANK_CUT_REL * smax)
            .count();
        for r in 0..rank {
            let basis = u.column(r);
            let coef = basis.dotc(&v);
            v.axpy(-coef, &basis.into_owned(), C64::new(1.0, 0.0));
        }
        if v.norm() <= DEGENERATE_REL * hbar_norm {
            // Target fully inside the interference span: fall back to the
            // matched filter so the UE still gets a receiver.
            v = hbar;
            degenerate = true;
        }
    }

    let norm = v.norm();
    if !(norm > 0.0) {
        return Err(Error::Receiver(format!("zero channel estimate for UE {k}")));
    }
    v /= C64::new(norm, 0.0);

    // Re-expand onto the full stacked index space.
    let mut full = CVec::zeros(graph.num_rus * m);
    for (i, &l) in cluster.iter().enumerate() {
        full.rows_mut(l * m, m).copy_from(&v.rows(i * m, m));
    }
    Ok(ZfReceiver { v: full, degenerate })
}

/// Cluster-level zero-forcing receivers for all active UEs.
///
/// Returns the `LM x K` receiver matrix (zero columns for outage UEs) and
/// the number of degenerate fallbacks.
pub fn clzf_receivers(est: &EstimateSet, graph: &AssociationGraph) -> Result<(CMat, usize)> {
    let m = est.m_antennas;
    let mut v = CMat::zeros(graph.num_rus * m, graph.num_ues);
    let mut degenerate = 0;
    for k in 0..graph.num_ues {
        if graph.is_outage(k) {
            continue;
        }
        let r = clzf_receiver(est, graph, k)?;
        v.set_column(k, &r.v);
        degenerate += r.degenerate as usize;
    }
    Ok((v, degenerate))
}

/// Per-RU LMMSE receive vectors and the local noise-plus-unknown-UE powers.
pub struct LocalLmmse {
    /// `sigma2[l] = 1 + snr * sum of beta over active UEs not served by l`.
    pub sigma2: Vec<f64>,
    /// Per RU: `M x |U_l|` matrix of receive vectors, columns aligned with
    /// the served set.
    pub per_ru: Vec<CMat>,
}

impl LocalLmmse {
    /// Receive vector of RU `l` for UE `k`, if served.
    pub fn vector(&self, graph: &AssociationGraph, l: usize, k: usize) -> Option<CVec> {
        graph.served[l]
            .binary_search(&k)
            .ok()
            .map(|i| self.per_ru[l].column(i).into_owned())
    }
}

/// Computes the per-RU LMMSE receivers at transmit SNR `snr`.
///
/// RU `l` whitens against the channels it knows (its served UEs) plus an
/// isotropic term `sigma2_l * I` that accounts for receiver noise and the
/// average power of every UE it does not serve.
pub fn lmmse_receivers(
    est: &EstimateSet,
    lsfc: &LargeScaleMap,
    graph: &AssociationGraph,
    snr: f64,
) -> Result<LocalLmmse> {
    let m = est.m_antennas;
    let mut sigma2 = Vec::with_capacity(graph.num_rus);
    let mut per_ru = Vec::with_capacity(graph.num_rus);
    for l in 0..graph.num_rus {
        let mut out_power = 0.0;
        for j in 0..graph.num_ues {
            if !graph.is_outage(j) && !graph.contains(l, j) {
                out_power += lsfc.beta[l][j];
            }
        }
        let s2 = 1.0 + snr * out_power;
        sigma2.push(s2);

        let hmat = &est.per_ru[l].mat;
        if hmat.ncols() == 0 {
            per_ru.push(CMat::zeros(m, 0));
            continue;
        }
        let mut a = CMat::identity(m, m) * C64::new(s2, 0.0);
        a.gemm(C64::new(snr, 0.0), hmat, &hmat.adjoint(), C64::new(1.0, 0.0));
        let vectors = match nalgebra::Cholesky::new(a.clone()) {
            Some(chol) => chol.solve(hmat),
            None => a
                .lu()
                .solve(hmat)
                .ok_or_else(|| Error::Receiver(format!("singular whitener at RU {l}")))?,
        };
        per_ru.push(vectors);
    }
    Ok(LocalLmmse { sigma2, per_ru })
}

/// Combining weights across one UE's cluster and the resulting nominal SINR.
pub struct ClusterCombining {
    /// One complex weight per cluster RU, ordered like the cluster list.
    pub weights: CVec,
    /// `snr * a^H Gamma^-1 a`, the SINR the cluster believes it achieves
    /// based on its channel estimates and average out-of-cluster powers.
    pub nominal_sinr: f64,
}

/// Optimal combining of the per-RU LMMSE outputs for UE `k`.
///
/// Builds the cluster-local signal vector `a`, the cross-gain matrix `G`
/// toward the co-served UEs, and the per-RU noise powers `D`, then solves
/// `Gamma w = a` with `Gamma = D + snr * G G^H`.
pub fn cluster_combining(
    lmmse: &LocalLmmse,
    est: &EstimateSet,
    graph: &AssociationGraph,
    snr: f64,
    k: usize,
) -> Result<ClusterCombining> {
    let cluster = &graph.clusters[k];
    if cluster.is_empty() {
        return Err(Error::Receiver(format!("UE {k} is in outage")));
    }
    let neighbors: Vec<usize> = graph
        .cluster_neighborhood(k)
        .into_iter()
        .filter(|&j| j != k)
        .collect();
    let nc = cluster.len();
    let mut a = CVec::zeros(nc);
    let mut g = CMat::zeros(nc, neighbors.len());
    let mut gamma = CMat::zeros(nc, nc);
    for (i, &l) in cluster.iter().enumerate() {
        let v = lmmse
            .vector(graph, l, k)
            .ok_or_else(|| Error::Receiver(format!("RU {l} does not serve UE {k}")))?;
        let hk = est.block(l, k).expect("edge implies estimate");
        a[i] = v.dotc(&hk);
        gamma[(i, i)] = C64::new(lmmse.sigma2[l] * v.norm_squared(), 0.0);
        for (jj, &j) in neighbors.iter().enumerate() {
            if let Some(hj) = est.block(l, j) {
                g[(i, jj)] = v.dotc(&hj);
            }
        }
    }
    gamma.gemm(C64::new(snr, 0.0), &g, &g.adjoint(), C64::new(1.0, 0.0));
    let weights = hpd_solve(&gamma, &a)?;
    let nominal_sinr = snr * a.dotc(&weights).re;
    Ok(ClusterCombining { weights, nominal_sinr })
}

/// Assembled uplink receivers from per-RU LMMSE vectors and cluster
/// combining, one unit-norm `LM`-dim column per active UE.
pub struct LmmseClusterSet {
    /// `LM x K` receiver matrix; outage UEs keep a zero column.
    pub v: CMat,
    /// Nominal cluster SINR per UE (zero for outage UEs).
    pub nominal_sinr: Vec<f64>,
}

/// Runs LMMSE combining for every active UE and stacks the weighted per-RU
/// vectors into normalized global receivers.
pub fn lmmse_cluster_receivers(
    lmmse: &LocalLmmse,
    est: &EstimateSet,
    graph: &AssociationGraph,
    snr: f64,
) -> Result<LmmseClusterSet> {
    let m = est.m_antennas;
    let mut v = CMat::zeros(graph.num_rus * m, graph.num_ues);
    let mut nominal = vec![0.0; graph.num_ues];
    for k in 0..graph.num_ues {
        if graph.is_outage(k) {
            continue;
        }
        let comb = cluster_combining(lmmse, est, graph, snr, k)?;
        let mut col = CVec::zeros(graph.num_rus * m);
        for (i, &l) in graph.clusters[k].iter().enumerate() {
            let vl = lmmse.vector(graph, l, k).expect("cluster RU serves k");
            col.rows_mut(l * m, m).axpy(comb.weights[i], &vl, C64::new(0.0, 0.0));
        }
        let norm = col.norm();
        if !(norm > 0.0) {
            return Err(Error::Receiver(format!("zero combined receiver for UE {k}")));
        }
        col /= C64::new(norm, 0.0);
        v.set_column(k, &col);
        nominal[k] = comb.nominal_sinr;
    }
    Ok(LmmseClusterSet { v, nominal_sinr: nominal })
}
