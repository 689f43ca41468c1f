//! System-level simulator for cell-free user-centric MU-MIMO networks.
//!
//! A network of `L` radio units (RUs), each with `M` antennas, serves `K`
//! single-antenna user equipments (UEs) placed on a square torus. Every UE is
//! served by its own cluster of nearby RUs, and every RU serves the set of UEs
//! that enrolled it, so service is described by a bipartite RU-UE graph rather
//! than by cells. The crate builds such networks layer by layer:
//!
//! * [`scenario`] — simulation parameters, derived constants, RNG streams
//! * [`geometry`] — node placement, torus metric, pathloss / shadowing
//! * [`channel`] — beam-domain channel vectors and their covariances
//! * [`association`] — pilot assignment and cluster formation
//! * [`csi`] — uplink pilot transmission and channel estimation
//! * [`receivers`] — per-cluster and per-RU uplink receive vectors
//! * [`duality`] — uplink-downlink duality and downlink power allocation
//! * [`baselines`] — reference schemes (LSFD, local ZF, partial ZF)
//! * [`metrics`] — SINRs, ergodic rates, spectral efficiency, CDFs
//! * [`harness`] — experiment plans, Monte Carlo driver, report files
//!
//! The usual flow is: draw a layout, compute large-scale coefficients, form
//! clusters, then repeatedly draw small-scale fading and evaluate one or more
//! receive/precoding schemes. [`harness::run_experiment`] wires the whole
//! pipeline together; the individual modules stay usable on their own.

pub mod association;
pub mod baselines;
pub mod channel;
pub mod csi;
pub mod duality;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod receivers;
pub mod scenario;

/// Complex scalar used throughout the crate.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex (column) vector.
pub type CVec = nalgebra::DVector<C64>;

/// Errors surfaced by the simulation layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("channel model error: {0}")]
    Channel(String),
    #[error("association error: {0}")]
    Association(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("receiver computation error: {0}")]
    Receiver(String),
    #[error("power allocation error: {0}")]
    Power(String),
    #[error("experiment plan error: {0}")]
    Plan(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
