//! Beam-domain channel model.
//!
//! Each RU has a uniform linear array whose spatial signatures are the
//! columns of the unitary `M x M` DFT matrix. Scattering around a UE is
//! confined to an angular window of width `angular_spread` centered on the
//! RU-to-UE bearing; the window selects a subset `S` of DFT beams, and the
//! channel is an i.i.d. complex Gaussian mixture over exactly those beams:
//!
//! `h = sqrt(beta * M / |S|) * F_S * nu`, `nu ~ CN(0, I_|S|)`.
//!
//! The scaling keeps `E[||h||^2] = beta * M` regardless of how many beams the
//! window catches, so narrow scattering concentrates the same energy in fewer
//! dimensions.

use crate::association::AssociationGraph;
use crate::geometry::{bearing, LargeScaleMap, NetworkLayout};
use crate::{C64, CMat, CVec};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

/// Column `n` of the unitary DFT matrix: entries `exp(-j*2*pi*m*n/M)/sqrt(M)`.
pub fn dft_column(m_antennas: usize, n: usize) -> CVec {
    let m_f = m_antennas as f64;
    CVec::from_fn(m_antennas, |m, _| {
        let phase = -2.0 * PI * (m as f64) * (n as f64) / m_f;
        C64::new(phase.cos() / m_f.sqrt(), phase.sin() / m_f.sqrt())
    })
}

/// The full unitary DFT matrix.
pub fn dft_matrix(m_antennas: usize) -> CMat {
    let mut f = CMat::zeros(m_antennas, m_antennas);
    for n in 0..m_antennas {
        f.set_column(n, &dft_column(m_antennas, n));
    }
    f
}

/// Sorted beam indices forming the angular support of one RU-UE link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AngularSupport(pub Vec<usize>);

impl AngularSupport {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Wraps an angle difference into `(-pi, pi]`.
fn wrap_angle(mut a: f64) -> f64 {
    a = a.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Beams whose nominal angle `2*pi*m/M` falls inside the closed window
/// `[theta - spread/2, theta + spread/2]` (mod `2*pi`).
///
/// Both endpoints are included so that symmetric geometries produce symmetric
/// supports. If the window straddles no beam (possible when
/// `spread < 2*pi/M`), the nearest beam is used so the support is never
/// empty.
pub fn angular_support(theta: f64, spread: f64, m_antennas: usize) -> AngularSupport {
    let m_f = m_antennas as f64;
    let half = spread / 2.0;
    let mut idx: Vec<usize> = (0..m_antennas)
        .filter(|&m| wrap_angle(2.0 * PI * m as f64 / m_f - theta).abs() <= half)
        .collect();
    if idx.is_empty() {
        let nearest = (theta.rem_euclid(2.0 * PI) * m_f / (2.0 * PI)).round() as usize % m_antennas;
        idx.push(nearest);
    }
    AngularSupport(idx)
}

/// Angular supports for every RU-UE link of a layout.
pub fn support_map(
    layout: &NetworkLayout,
    spread: f64,
    m_antennas: usize,
) -> Vec<Vec<AngularSupport>> {
    (0..layout.rus.len())
        .map(|l| {
            (0..layout.ues.len())
                .map(|k| angular_support(bearing(layout, l, k), spread, m_antennas))
                .collect()
        })
        .collect()
}

/// One complex Gaussian channel vector for a link.
pub fn draw_channel(beta: f64, support: &AngularSupport, m_antennas: usize, rng: &mut impl Rng) -> CVec {
    draw_channel_with(beta, support, &dft_matrix(m_antennas), rng)
}

/// As [`draw_channel`] but reusing a precomputed DFT matrix.
pub fn draw_channel_with(beta: f64, support: &AngularSupport, f: &CMat, rng: &mut impl Rng) -> CVec {
    let m_antennas = f.nrows();
    let scale = (beta * m_antennas as f64 / support.len() as f64).sqrt();
    let mut h = CVec::zeros(m_antennas);
    for &b in &support.0 {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let nu = C64::new(re / SQRT_2, im / SQRT_2) * C64::new(scale, 0.0);
        h.axpy(nu, &f.column(b).into_owned(), C64::new(1.0, 0.0));
    }
    h
}

/// Exact covariance of the link: `(beta*M/|S|) * F_S * F_Sᴴ`.
pub fn covariance(beta: f64, support: &AngularSupport, m_antennas: usize) -> CMat {
    let f = dft_matrix(m_antennas);
    let mut fs = CMat::zeros(m_antennas, support.len());
    for (i, &b) in support.0.iter().enumerate() {
        fs.set_column(i, &f.column(b).into_owned());
    }
    let scale = C64::new(beta * m_antennas as f64 / support.len() as f64, 0.0);
    (&fs * fs.adjoint()) * scale
}

/// All small-scale channels of one fading draw, stacked RU-major: the block
/// of rows `l*M .. (l+1)*M` in column `k` is the channel from UE `k` to RU
/// `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub num_rus: usize,
    pub m_antennas: usize,
    pub num_ues: usize,
    pub h: CMat,
}

impl ChannelMatrix {
    /// View of the `(l, k)` block.
    pub fn block(&self, l: usize, k: usize) -> nalgebra::DVectorView<'_, C64> {
        self.h
            .generic_view((l * self.m_antennas, k), (nalgebra::Dyn(self.m_antennas), nalgebra::U1))
    }
}

/// Draws every link of a layout, visiting `(l, k)` in row-major order so the
/// result is a pure function of the rng stream.
pub fn draw_channel_matrix(
    lsfc: &LargeScaleMap,
    supports: &[Vec<AngularSupport>],
    m_antennas: usize,
    rng: &mut impl Rng,
) -> ChannelMatrix {
    let num_rus = lsfc.beta.len();
    let num_ues = if num_rus == 0 { 0 } else { lsfc.beta[0].len() };
    let f = dft_matrix(m_antennas);
    let mut h = CMat::zeros(num_rus * m_antennas, num_ues);
    for l in 0..num_rus {
        for k in 0..num_ues {
            let col = draw_channel_with(lsfc.beta[l][k], &supports[l][k], &f, rng);
            h.view_mut((l * m_antennas, k), (m_antennas, 1)).copy_from(&col);
        }
    }
    ChannelMatrix { num_rus, m_antennas, num_ues, h }
}

/// Read-only masked view of the channel matrix as one UE's cluster sees it:
/// block `(l, j)` is visible iff `l` is in the cluster of `k` and RU `l`
/// serves UE `j`. Everything else reads as zero.
pub struct PartialCsiView<'a> {
    pub h: &'a ChannelMatrix,
    pub graph: &'a AssociationGraph,
    pub k: usize,
}

impl<'a> PartialCsiView<'a> {
    pub fn new(h: &'a ChannelMatrix, graph: &'a AssociationGraph, k: usize) -> Self {
        PartialCsiView { h, graph, k }
    }

    pub fn visible(&self, l: usize, j: usize) -> bool {
        self.graph.contains(l, self.k) && self.graph.contains(l, j)
    }

    /// Block `(l, j)` if visible.
    pub fn block(&self, l: usize, j: usize) -> Option<nalgebra::DVectorView<'_, C64>> {
        self.visible(l, j).then(|| self.h.block(l, j))
    }

    /// Full stacked column `j` with invisible blocks zeroed.
    pub fn masked_column(&self, j: usize) -> CVec {
        let m = self.h.m_antennas;
        let mut col = CVec::zeros(self.h.num_rus * m);
        for &l in &self.graph.clusters[self.k] {
            if self.graph.contains(l, j) {
                col.rows_mut(l * m, m).copy_from(&self.h.block(l, j));
            }
        }
        col
    }
}

/// Writes `(beta, S, h)` fixture rows as CSV: one row per link with the
/// support as a `;`-separated list and the channel as interleaved re/im.
pub fn write_channel_fixture_csv(
    rows: &[(f64, &AngularSupport, &CVec)],
    w: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(w, "beta,support,h_re_im")?;
    for (beta, s, h) in rows {
        let supp: Vec<String> = s.0.iter().map(|b| b.to_string()).collect();
        let mut parts = Vec::with_capacity(2 * h.len());
        for c in h.iter() {
            parts.push(format!("{}", c.re));
            parts.push(format!("{}", c.im));
        }
        writeln!(w, "{},{},{}", beta, supp.join(";"), parts.join(";"))?;
    }
    Ok(())
}
