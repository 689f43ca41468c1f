//! Uplink pilot transmission and channel estimation.
//!
//! All UEs transmit their pilots simultaneously; RU `l` observes
//! `Y_l = sum_i h_{l,i} phi_{t_i}ᴴ + Z_l` with unit-variance noise. Since
//! UEs served by the same RU hold mutually orthogonal pilots, the only
//! contamination left after pilot matching comes from co-pilot UEs served
//! elsewhere. The subspace-projection estimator additionally projects the
//! matched estimate onto the link's known beam support, which removes both
//! noise and contamination living outside that support.
//!
//! Estimates exist only on association edges: an RU estimates exactly the
//! channels of the UEs it serves.

use crate::association::AssociationGraph;
use crate::channel::{dft_column, AngularSupport, ChannelMatrix};
use crate::{C64, CMat, CVec, Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::SQRT_2;

/// Orthogonal pilot sequences of dimension `dim`, realized as scaled
/// identity columns: `phi_t = sqrt(dim * snr) * e_t`.
#[derive(Debug, Clone, Copy)]
pub struct PilotBook {
    pub dim: usize,
    pub snr: f64,
}

impl PilotBook {
    pub fn new(dim: usize, snr: f64) -> Self {
        PilotBook { dim, snr }
    }

    /// Squared norm of every sequence: the total pilot energy `tau_p * snr`.
    pub fn energy(&self) -> f64 {
        self.dim as f64 * self.snr
    }

    /// Pilot sequence `t` as a column vector.
    pub fn sequence(&self, t: usize) -> CVec {
        let mut phi = CVec::zeros(self.dim);
        phi[t] = C64::new(self.energy().sqrt(), 0.0);
        phi
    }
}

/// Received pilot-slot observations, one `M x tau_p` block per RU.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotField {
    pub y: Vec<CMat>,
}

/// Synthesizes the pilot field with noise standard deviation `noise_std`
/// per complex component (1.0 is the physical model; 0.0 isolates the
/// interference algebra in tests).
///
/// Noise is drawn per RU in column-major order, so the field is a pure
/// function of the rng stream.
pub fn synthesize_pilot_field_scaled(
    h: &ChannelMatrix,
    graph: &AssociationGraph,
    book: &PilotBook,
    noise_std: f64,
    rng: &mut impl Rng,
) -> PilotField {
    let m = h.m_antennas;
    let amp = C64::new(book.energy().sqrt(), 0.0);
    let mut y = Vec::with_capacity(h.num_rus);
    for l in 0..h.num_rus {
        let mut yl = CMat::zeros(m, book.dim);
        for t in 0..book.dim {
            for i in 0..m {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                yl[(i, t)] = C64::new(re, im) * C64::new(noise_std / SQRT_2, 0.0);
            }
        }
        // Every active UE transmits; co-pilot channels pile up in the same
        // column.
        for k in 0..h.num_ues {
            if let Some(t) = graph.pilot[k] {
                let block = h.block(l, k);
                let mut col = yl.column_mut(t);
                col.axpy(amp, &block, C64::new(1.0, 0.0));
            }
        }
        y.push(yl);
    }
    PilotField { y }
}

/// Synthesizes the pilot field with unit-variance receiver noise.
pub fn synthesize_pilot_field(
    h: &ChannelMatrix,
    graph: &AssociationGraph,
    book: &PilotBook,
    rng: &mut impl Rng,
) -> PilotField {
    synthesize_pilot_field_scaled(h, graph, book, 1.0, rng)
}

/// Pilot-matching estimate `Y_l * phi_{t_k} / (tau_p * snr)` of the channel
/// from UE `k` at RU `l`.
pub fn pilot_matching_estimate(
    field: &PilotField,
    graph: &AssociationGraph,
    book: &PilotBook,
    l: usize,
    k: usize,
) -> Result<CVec> {
    let t = graph.pilot[k]
        .ok_or_else(|| Error::Estimation(format!("UE {k} has no pilot (outage)")))?;
    let scale = C64::new(1.0 / book.energy().sqrt(), 0.0);
    Ok(field.y[l].column(t) * scale)
}

/// Projects a vector onto the span of the DFT beams in `support`.
pub fn subspace_project(x: &CVec, support: &AngularSupport, m_antennas: usize) -> CVec {
    let mut out = CVec::zeros(m_antennas);
    for &b in &support.0 {
        let f = dft_column(m_antennas, b);
        let coef = f.dotc(x); // f_bᴴ x
        out.axpy(coef, &f, C64::new(1.0, 0.0));
    }
    out
}

/// Covariance of the estimation noise after subspace projection:
/// `(1 / (tau_p * snr)) * F_S * F_Sᴴ`.
pub fn projected_noise_covariance(
    support: &AngularSupport,
    book: &PilotBook,
    m_antennas: usize,
) -> CMat {
    let mut p = CMat::zeros(m_antennas, m_antennas);
    for &b in &support.0 {
        let f = dft_column(m_antennas, b);
        p += &f * f.adjoint();
    }
    p * C64::new(1.0 / book.energy(), 0.0)
}

/// Which channel knowledge the receivers operate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    /// Genie-aided: true channels on association edges.
    Ideal,
    /// Pilot matching only.
    PilotMatching,
    /// Pilot matching followed by beam-subspace projection.
    SubspaceProjection,
}

impl CsiMode {
    pub const ALL: [CsiMode; 3] =
        [CsiMode::Ideal, CsiMode::PilotMatching, CsiMode::SubspaceProjection];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(CsiMode::Ideal),
            "pm" => Ok(CsiMode::PilotMatching),
            "sp" => Ok(CsiMode::SubspaceProjection),
            other => Err(Error::InvalidConfig(format!(
                "unknown estimator {other:?} (expected ideal, pm, or sp)"
            ))),
        }
    }
}

impl std::fmt::Display for CsiMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CsiMode::Ideal => "ideal",
            CsiMode::PilotMatching => "pm",
            CsiMode::SubspaceProjection => "sp",
        };
        write!(f, "{s}")
    }
}

/// Channel estimates available at one RU: column `i` of `mat` is the
/// estimate for `ues[i]` (sorted ascending, mirroring the served set).
#[derive(Debug, Clone, PartialEq)]
pub struct RuCsi {
    pub ues: Vec<usize>,
    pub mat: CMat,
}

impl RuCsi {
    /// Column index of UE `k` in `mat`, if served.
    pub fn index_of(&self, k: usize) -> Option<usize> {
        self.ues.binary_search(&k).ok()
    }
}

/// Channel estimates for every association edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    pub mode: CsiMode,
    pub m_antennas: usize,
    pub per_ru: Vec<RuCsi>,
}

impl EstimateSet {
    /// Estimate of the `(l, k)` link, if that edge exists.
    pub fn block(&self, l: usize, k: usize) -> Option<nalgebra::DVectorView<'_, C64>> {
        let ru = &self.per_ru[l];
        ru.index_of(k).map(|i| {
            ru.mat
                .generic_view((0, i), (nalgebra::Dyn(self.m_antennas), nalgebra::U1))
        })
    }
}

/// Builds the estimate set for one fading realization.
///
/// `field` may be `None` only in [`CsiMode::Ideal`]; the other modes read
/// the pilot observations.
pub fn estimate_set(
    mode: CsiMode,
    h: &ChannelMatrix,
    supports: &[Vec<AngularSupport>],
    graph: &AssociationGraph,
    book: &PilotBook,
    field: Option<&PilotField>,
) -> Result<EstimateSet> {
    let m = h.m_antennas;
    let mut per_ru = Vec::with_capacity(h.num_rus);
    for l in 0..h.num_rus {
        let ues = graph.served[l].clone();
        let mut mat = CMat::zeros(m, ues.len());
        for (i, &k) in ues.iter().enumerate() {
            let est = match mode {
                CsiMode::Ideal => h.block(l, k).into_owned(),
                CsiMode::PilotMatching | CsiMode::SubspaceProjection => {
                    let field = field.ok_or_else(|| {
                        Error::Estimation("pilot field required for pm/sp estimation".into())
                    })?;
                    let pm = pilot_matching_estimate(field, graph, book, l, k)?;
                    if mode == CsiMode::PilotMatching {
                        pm
                    } else {
                        subspace_project(&pm, &supports[l][k], m)
                    }
                }
            };
            mat.set_column(i, &est);
        }
        per_ru.push(RuCsi { ues, mat });
    }
    Ok(EstimateSet { mode, m_antennas: m, per_ru })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::build_association_with_order;
    use crate::channel::{angular_support, covariance, draw_channel_matrix, support_map};
    use crate::geometry::{compute_lsfc, place_nodes, PathlossModel};
    use crate::scenario::{stream, SimConfig, StreamPurpose};
    use std::f64::consts::PI;

    fn graph_from(
        num_rus: usize,
        num_ues: usize,
        pilot_dim: usize,
        edges: &[(usize, usize)],
        pilots: &[usize],
    ) -> AssociationGraph {
        AssociationGraph::from_edges(num_rus, num_ues, pilot_dim, edges, pilots, None).unwrap()
    }

    fn unit_channel_matrix(num_rus: usize, m: usize, cols: Vec<CVec>) -> ChannelMatrix {
        let num_ues = cols.len();
        let mut h = CMat::zeros(num_rus * m, num_ues);
        for (k, c) in cols.iter().enumerate() {
            h.set_column(k, c);
        }
        ChannelMatrix { num_rus, m_antennas: m, num_ues, h }
    }

    #[test]
    fn pilot_book_energy_and_orthogonality() {
        let book = PilotBook::new(5, 3.0);
        assert_eq!(book.energy(), 15.0);
        for t in 0..5 {
            let p = book.sequence(t);
            assert!((p.norm_squared() - 15.0).abs() < 1e-12);
            for s in 0..t {
                assert_eq!(book.sequence(s).dotc(&p), C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn noise_free_estimate_without_contamination_is_exact() {
        // One RU, one UE, arbitrary channel.
        let m = 4;
        let h_vec = CVec::from_iterator(
            m,
            [(1.0, 0.5), (-0.3, 2.0), (0.0, -1.0), (4.0, 0.25)]
                .into_iter()
                .map(|(r, i)| C64::new(r, i)),
        );
        let h = unit_channel_matrix(1, m, vec![h_vec.clone()]);
        let g = graph_from(1, 1, 3, &[(0, 0)], &[1]);
        let book = PilotBook::new(3, 7.0);
        let field = synthesize_pilot_field_scaled(&h, &g, &book, 0.0, &mut stream(1, 0, StreamPurpose::PilotNoise, 0));
        let est = pilot_matching_estimate(&field, &g, &book, 0, 0).unwrap();
        let err = (&est - &h_vec).norm() / h_vec.norm();
        assert!(err < 1e-12, "relative error {err}");
    }

    #[test]
    fn co_pilot_channels_alias_exactly() {
        // Two UEs share pilot 0 but are served by different RUs.
        let m = 3;
        let c0 = CVec::from_element(m, C64::new(1.0, -1.0));
        let c1 = CVec::from_element(m, C64::new(0.5, 2.0));
        // Stack the per-RU blocks: UE0 channel at RU0 is c0, UE1 channel at
        // RU0 is c1 (UE1 transmits regardless of who serves it).
        let mut hmat = CMat::zeros(2 * m, 2);
        hmat.view_mut((0, 0), (m, 1)).copy_from(&c0);
        hmat.view_mut((0, 1), (m, 1)).copy_from(&c1);
        let h = ChannelMatrix { num_rus: 2, m_antennas: m, num_ues: 2, h: hmat };
        let g = graph_from(2, 2, 2, &[(0, 0), (1, 1)], &[0, 0]);
        let book = PilotBook::new(2, 1.0);
        let field = synthesize_pilot_field_scaled(&h, &g, &book, 0.0, &mut stream(1, 0, StreamPurpose::PilotNoise, 0));
        let est = pilot_matching_estimate(&field, &g, &book, 0, 0).unwrap();
        let expect = &c0 + &c1;
        assert!((est - expect).norm() < 1e-12);
    }

    #[test]
    fn estimation_noise_variance_matches_book_energy() {
        // Zero channels isolate the noise term: per-component variance of
        // the matched estimate must be 1/(tau_p * snr).
        let m = 2;
        let tau_p = 4;
        let snr = 5.0;
        let h = unit_channel_matrix(1, m, vec![CVec::zeros(m)]);
        let g = graph_from(1, 1, tau_p, &[(0, 0)], &[2]);
        let book = PilotBook::new(tau_p, snr);
        let mut acc = 0.0;
        let n = 40_000;
        for d in 0..n {
            let mut rng = stream(77, 0, StreamPurpose::PilotNoise, d);
            let field = synthesize_pilot_field(&h, &g, &book, &mut rng);
            let est = pilot_matching_estimate(&field, &g, &book, 0, 0).unwrap();
            acc += est.norm_squared() / m as f64;
        }
        let var = acc / n as f64;
        let expect = 1.0 / book.energy();
        let rel = (var - expect).abs() / expect;
        // Chi-square with 2*m*n degrees of freedom: 3-sigma band.
        let tol = 3.0 * (1.0 / (m as f64 * n as f64)).sqrt();
        assert!(rel < tol, "var {var} vs {expect} (rel {rel})");
    }

    #[test]
    fn projector_is_idempotent_and_projection_fixed_point() {
        let m = 16;
        let s = angular_support(0.9, PI / 4.0, m);
        let mut rng = stream(5, 0, StreamPurpose::Fading, 0);
        let x = CVec::from_fn(m, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        });
        let p1 = subspace_project(&x, &s, m);
        let p2 = subspace_project(&p1, &s, m);
        assert!((p2 - &p1).norm() <= 1e-12 * p1.norm().max(1.0));
    }

    #[test]
    fn disjoint_support_contamination_is_removed_exactly() {
        // UE0 and UE1 share a pilot; their beam supports are disjoint, so
        // projecting the contaminated estimate onto UE0's support recovers
        // UE0's channel exactly in the noise-free case.
        let m = 16;
        let s0 = AngularSupport(vec![1, 2, 3]);
        let s1 = AngularSupport(vec![9, 10]);
        let mut rng = stream(6, 0, StreamPurpose::Fading, 0);
        let h0 = crate::channel::draw_channel(2.0, &s0, m, &mut rng);
        let h1 = crate::channel::draw_channel(3.0, &s1, m, &mut rng);
        // UE1 is served by RU1 (so it transmits) but its channel toward RU0
        // is what contaminates UE0's estimate there.
        let mut hmat = CMat::zeros(2 * m, 2);
        hmat.view_mut((0, 0), (m, 1)).copy_from(&h0);
        hmat.view_mut((0, 1), (m, 1)).copy_from(&h1);
        let h = ChannelMatrix { num_rus: 2, m_antennas: m, num_ues: 2, h: hmat };
        let g = graph_from(2, 2, 1, &[(0, 0), (1, 1)], &[0, 0]);
        let book = PilotBook::new(1, 4.0);
        let field = synthesize_pilot_field_scaled(&h, &g, &book, 0.0, &mut stream(6, 0, StreamPurpose::PilotNoise, 0));
        let pm = pilot_matching_estimate(&field, &g, &book, 0, 0).unwrap();
        // Matched estimate is contaminated...
        assert!((&pm - &h0).norm() > 1e-3);
        // ...projection removes every trace of it.
        let sp = subspace_project(&pm, &s0, m);
        assert!((&sp - &h0).norm() <= 1e-12 * h0.norm());
    }

    #[test]
    fn pm_error_covariance_matches_contamination_plus_noise() {
        // On an association edge, the pilot-matching error h_pm - h_k has
        // covariance sum_{co-pilot i} Sigma_i + I/(tau_p*snr).
        let m = 4;
        let tau_p = 2;
        let snr = 3.0;
        let s0 = angular_support(0.3, PI / 2.0, m);
        let s1 = angular_support(2.0, PI / 2.0, m);
        let (b0, b1) = (1.3, 0.7);
        let book = PilotBook::new(tau_p, snr);
        let g = graph_from(2, 2, tau_p, &[(0, 0), (1, 1)], &[0, 0]);
        let expect = covariance(b1, &s1, m) + CMat::identity(m, m) * C64::new(1.0 / book.energy(), 0.0);
        let n = 30_000;
        let mut acc = CMat::zeros(m, m);
        for d in 0..n {
            let mut frng = stream(8, 0, StreamPurpose::Fading, d);
            let h0 = crate::channel::draw_channel(b0, &s0, m, &mut frng);
            let h1 = crate::channel::draw_channel(b1, &s1, m, &mut frng);
            let mut hmat = CMat::zeros(2 * m, 2);
            hmat.view_mut((0, 0), (m, 1)).copy_from(&h0);
            hmat.view_mut((0, 1), (m, 1)).copy_from(&h1);
            let h = ChannelMatrix { num_rus: 2, m_antennas: m, num_ues: 2, h: hmat };
            let field = synthesize_pilot_field(&h, &g, &book, &mut stream(8, 0, StreamPurpose::PilotNoise, d));
            let pm = pilot_matching_estimate(&field, &g, &book, 0, 0).unwrap();
            let e = pm - h0;
            acc += &e * e.adjoint();
        }
        let sample = acc / C64::new(n as f64, 0.0);
        for a in 0..m {
            for b in 0..m {
                let se = (expect[(a, a)].re * expect[(b, b)].re / n as f64).sqrt();
                let dev = (sample[(a, b)] - expect[(a, b)]).norm();
                assert!(dev <= 4.0 * se, "entry ({a},{b}): dev {dev} vs se {se}");
            }
        }
    }

    #[test]
    fn estimate_set_covers_exactly_the_edges() {
        let cfg = SimConfig {
            num_rus: 3,
            num_ues: 8,
            antennas_per_ru: 8,
            pilot_dim: 4,
            ..SimConfig::default()
        };
        let d = crate::scenario::derive_constants(&cfg);
        let layout = place_nodes(&cfg, &mut stream(9, 0, StreamPurpose::Placement, 0));
        let model = PathlossModel::from_config(&cfg);
        let lsfc = compute_lsfc(&layout, &model, &mut stream(9, 0, StreamPurpose::LargeScale, 0)).unwrap();
        let g = build_association_with_order(&lsfc, &cfg, d.snr, &(0..8).collect::<Vec<_>>());
        let supports = support_map(&layout, cfg.angular_spread, cfg.antennas_per_ru);
        let h = draw_channel_matrix(&lsfc, &supports, cfg.antennas_per_ru, &mut stream(9, 0, StreamPurpose::Fading, 0));
        let book = PilotBook::new(cfg.pilot_dim, d.snr);
        let field = synthesize_pilot_field(&h, &g, &book, &mut stream(9, 0, StreamPurpose::PilotNoise, 0));
        for mode in CsiMode::ALL {
            let est = estimate_set(mode, &h, &supports, &g, &book, Some(&field)).unwrap();
            for l in 0..cfg.num_rus {
                for k in 0..cfg.num_ues {
                    assert_eq!(
                        est.block(l, k).is_some(),
                        g.contains(l, k),
                        "mode {mode}: block presence must mirror the graph"
                    );
                }
            }
            // Ideal estimates are the true channels.
            if mode == CsiMode::Ideal {
                for (l, k) in g.edges() {
                    let d = (est.block(l, k).unwrap().into_owned() - h.block(l, k).into_owned()).norm();
                    assert_eq!(d, 0.0);
                }
            }
        }
    }
}
