//! Experiment orchestration: sweeps, Monte Carlo over layouts and fading
//! draws, and report files.
//!
//! A run is organized in three stages. Stage A builds one immutable state
//! per layout (placement, large-scale coefficients, clusters, and the LSFD
//! statistics if requested). Stage B evaluates every (layout, draw) cell
//! independently — each cell seeds its own rng streams, so the work can be
//! spread over any number of threads. Stage C reduces the cells in a fixed
//! order, which makes the emitted CSV bytes independent of the thread
//! count.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::association::{build_association, AssociationGraph};
use crate::baselines::{
    assemble_dl_precoder, assemble_with_weights, local_power, lpzf_precoder, lsfd_statistics,
    lsfd_weights, lzf_precoder, DlPrecoder, PowerRule, RuPrecoder,
};
use crate::channel::{draw_channel_matrix, support_map, AngularSupport, ChannelMatrix};
use crate::csi::{estimate_set, synthesize_pilot_field, CsiMode, EstimateSet, PilotBook};
use crate::duality::{dual_power_allocation, nominal_coefficients, virtual_ul_snr};
use crate::geometry::{compute_lsfc, place_nodes, LargeScaleMap, PathlossModel};
use crate::metrics::{db, exact_dl_sinrs, exact_ul_sinrs, percentile, spectral_efficiency};
use crate::receivers::{clzf_receivers, lmmse_cluster_receivers, lmmse_receivers, LocalLmmse};
use crate::scenario::{derive_constants, stream, DlPowerMode, SimConfig, StreamPurpose};
use crate::{CMat, CVec, Error, Result};

/// Transmission schemes the harness can evaluate.
///
/// The cluster-coordinated schemes cover both directions (DL through
/// duality); LSFD is UL-only and the local zero-forcing precoders are
/// DL-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scheme {
    Clzf,
    LmmseCluster,
    Lsfd,
    LzfEpa,
    LzfPpa,
    LpzfEpa,
    LpzfPpa,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Clzf,
        Scheme::LmmseCluster,
        Scheme::Lsfd,
        Scheme::LzfEpa,
        Scheme::LzfPpa,
        Scheme::LpzfEpa,
        Scheme::LpzfPpa,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "clzf" => Ok(Scheme::Clzf),
            "lmmse_cluster" => Ok(Scheme::LmmseCluster),
            "lsfd" => Ok(Scheme::Lsfd),
            "lzf_epa" => Ok(Scheme::LzfEpa),
            "lzf_ppa" => Ok(Scheme::LzfPpa),
            "lpzf_epa" => Ok(Scheme::LpzfEpa),
            "lpzf_ppa" => Ok(Scheme::LpzfPpa),
            other => Err(Error::InvalidConfig(format!("unknown scheme {other:?}"))),
        }
    }

    pub fn covers_ul(self) -> bool {
        matches!(self, Scheme::Clzf | Scheme::LmmseCluster | Scheme::Lsfd)
    }

    pub fn covers_dl(self) -> bool {
        !matches!(self, Scheme::Lsfd)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::Clzf => "clzf",
            Scheme::LmmseCluster => "lmmse_cluster",
            Scheme::Lsfd => "lsfd",
            Scheme::LzfEpa => "lzf_epa",
            Scheme::LzfPpa => "lzf_ppa",
            Scheme::LpzfEpa => "lpzf_epa",
            Scheme::LpzfPpa => "lpzf_ppa",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Direction {
    Ul,
    Dl,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Ul => "ul",
            Direction::Dl => "dl",
        })
    }
}

/// A full experiment: one base configuration plus sweep axes. Empty axes
/// fall back to the base value, so the default plan is a single point.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub base: SimConfig,
    /// (num_rus, antennas_per_ru) pairs.
    pub lm_pairs: Vec<(usize, usize)>,
    pub k_list: Vec<usize>,
    pub taup_list: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub estimators: Vec<CsiMode>,
    /// When set, every (L, M) pair must multiply to this antenna budget.
    pub fixed_antenna_budget: Option<usize>,
    pub out_dir: PathBuf,
    /// Worker threads for the Monte Carlo stages; 1 runs serially.
    pub parallelism: usize,
}

impl ExperimentPlan {
    /// Single-point plan with the default scheme/estimator selection.
    pub fn single_point(base: SimConfig, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentPlan {
            base,
            lm_pairs: Vec::new(),
            k_list: Vec::new(),
            taup_list: Vec::new(),
            schemes: vec![Scheme::LmmseCluster],
            estimators: vec![CsiMode::SubspaceProjection],
            fixed_antenna_budget: None,
            out_dir: out_dir.into(),
            parallelism: 1,
        }
    }

    fn axes(&self) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
        let lm = if self.lm_pairs.is_empty() {
            vec![(self.base.num_rus, self.base.antennas_per_ru)]
        } else {
            self.lm_pairs.clone()
        };
        let k = if self.k_list.is_empty() { vec![self.base.num_ues] } else { self.k_list.clone() };
        let t = if self.taup_list.is_empty() {
            vec![self.base.pilot_dim]
        } else {
            self.taup_list.clone()
        };
        (lm, k, t)
    }

    /// Resolved configuration of one sweep point.
    pub fn point_config(&self, lm: (usize, usize), k: usize, taup: usize) -> SimConfig {
        let mut cfg = self.base.clone();
        cfg.num_rus = lm.0;
        cfg.antennas_per_ru = lm.1;
        cfg.num_ues = k;
        cfg.pilot_dim = taup;
        cfg
    }
}

/// Checks a plan without running it; returns human-readable diagnostics,
/// empty when the plan is runnable.
pub fn validate_plan(plan: &ExperimentPlan) -> Vec<String> {
    let mut issues = Vec::new();
    if plan.schemes.is_empty() {
        issues.push("no schemes selected".to_string());
    }
    if plan.estimators.is_empty() {
        issues.push("no channel estimators selected".to_string());
    }
    if plan.parallelism == 0 {
        issues.push("parallelism must be at least 1".to_string());
    }
    let (lm, ks, taups) = plan.axes();
    if let Some(budget) = plan.fixed_antenna_budget {
        for &(l, m) in &lm {
            if l * m != budget {
                issues.push(format!(
                    "(L={l}, M={m}) breaks the fixed antenna budget {budget}"
                ));
            }
        }
    }
    for &pair in &lm {
        for &k in &ks {
            for &taup in &taups {
                let cfg = plan.point_config(pair, k, taup);
                if let Err(e) = cfg.validate() {
                    issues.push(format!(
                        "point (L={}, M={}, K={k}, tau_p={taup}): {e}",
                        pair.0, pair.1
                    ));
                }
            }
        }
    }
    issues
}

/// One row of the per-point CSV report.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub layout_id: usize,
    pub ue_id: usize,
    pub direction: Direction,
    pub scheme: Scheme,
    pub estimator: CsiMode,
    /// Mean SINR over the fading draws, linear scale; 0 for outage UEs.
    pub sinr_mean: f64,
    /// Optimistic ergodic rate in bit/channel use.
    pub rate: f64,
    /// Pilot-overhead-discounted spectral efficiency.
    pub se: f64,
}

/// In-memory result of one sweep point, mirrored to one CSV file.
pub struct SweepPointResult {
    pub config: SimConfig,
    pub rows: Vec<ReportRow>,
    /// Mean over layouts of the per-layout sum of SE over active UEs, keyed
    /// by "scheme/estimator/direction".
    pub sum_se: BTreeMap<String, f64>,
    pub outage_count: usize,
    pub degenerate_clzf: usize,
}

/// Result of a full experiment run.
pub struct RunOutput {
    pub csv_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub points: Vec<SweepPointResult>,
}

struct LayoutState {
    layout_id: usize,
    lsfc: LargeScaleMap,
    graph: AssociationGraph,
    supports: Vec<Vec<AngularSupport>>,
    book: PilotBook,
    active: Vec<bool>,
    /// Fixed LSFD weights per estimator, present when the plan asks for
    /// the LSFD scheme.
    lsfd: Option<BTreeMap<CsiMode, Vec<CVec>>>,
}

struct DrawOutput {
    records: Vec<(Scheme, CsiMode, Direction, Vec<f64>)>,
    degenerate_clzf: usize,
}

/// Runs the whole plan and writes one CSV per sweep point plus one summary
/// JSON for the run.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<RunOutput> {
    let issues = validate_plan(plan);
    if !issues.is_empty() {
        return Err(Error::Plan(issues.join("; ")));
    }
    fs::create_dir_all(&plan.out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism)
        .build()
        .map_err(|e| Error::Plan(format!("thread pool: {e}")))?;

    let (lm, ks, taups) = plan.axes();
    let mut csv_paths = Vec::new();
    let mut points = Vec::new();
    for &pair in &lm {
        for &k in &ks {
            for &taup in &taups {
                let cfg = plan.point_config(pair, k, taup);
                let point = pool.install(|| run_point(&cfg, plan))?;
                let path = plan.out_dir.join(format!(
                    "point_L{}_M{}_K{}_T{}.csv",
                    pair.0, pair.1, k, taup
                ));
                write_point_csv(&path, &point)?;
                csv_paths.push(path);
                points.push(point);
            }
        }
    }

    let summary_path = plan.out_dir.join("summary.json");
    write_summary(&summary_path, &points)?;
    Ok(RunOutput { csv_paths, summary_path, points })
}

fn run_point(cfg: &SimConfig, plan: &ExperimentPlan) -> Result<SweepPointResult> {
    let derived = derive_constants(cfg);
    let snr = derived.snr;
    let snr_dl = match cfg.dl_power_mode {
        DlPowerMode::Balanced => snr,
        DlPowerMode::PerRu => {
            virtual_ul_snr(cfg.num_rus, cfg.num_ues, cfg.ru_power_mw(), cfg.noise_mw())
        }
    };

    // Stage A: per-layout immutable state.
    let states: Vec<LayoutState> = (0..cfg.num_layouts)
        .into_par_iter()
        .map(|i| build_layout_state(cfg, plan, i, snr))
        .collect::<Result<Vec<_>>>()?;

    // Stage B: all (layout, draw) cells, order-preserving collect.
    let cells: Vec<(usize, usize)> = (0..cfg.num_layouts)
        .flat_map(|i| (0..cfg.fading_draws).map(move |d| (i, d)))
        .collect();
    let outputs: Vec<DrawOutput> = cells
        .par_iter()
        .map(|&(i, d)| run_draw(cfg, plan, &states[i], d, snr, snr_dl))
        .collect::<Result<Vec<_>>>()?;

    // Stage C: fixed-order reduction.
    reduce_point(cfg, &states, &cells, outputs)
}

fn build_layout_state(
    cfg: &SimConfig,
    plan: &ExperimentPlan,
    layout_id: usize,
    snr: f64,
) -> Result<LayoutState> {
    let i = layout_id as u64;
    let mut placement = stream(cfg.master_seed, i, StreamPurpose::Placement, 0);
    let layout = place_nodes(cfg, &mut placement);
    let model = PathlossModel::from_config(cfg);
    let mut shadowing = stream(cfg.master_seed, i, StreamPurpose::LargeScale, 0);
    let lsfc = compute_lsfc(&layout, &model, &mut shadowing)?;
    let mut order_rng = stream(cfg.master_seed, i, StreamPurpose::UeOrder, 0);
    let graph = build_association(&lsfc, cfg, snr, &mut order_rng);
    let supports = support_map(&layout, cfg.angular_spread, cfg.antennas_per_ru);
    let book = PilotBook::new(cfg.pilot_dim, snr);
    let active = (0..cfg.num_ues).map(|k| !graph.is_outage(k)).collect();

    let lsfd = if plan.schemes.contains(&Scheme::Lsfd) {
        let mut map = BTreeMap::new();
        for &mode in &plan.estimators {
            let mut fading = stream(cfg.master_seed, i, StreamPurpose::LsfdFading, 0);
            let mut noise = stream(cfg.master_seed, i, StreamPurpose::LsfdPilotNoise, 0);
            let stats = lsfd_statistics(
                &lsfc,
                &supports,
                &graph,
                mode,
                &book,
                cfg.antennas_per_ru,
                snr,
                cfg.lsfd_stat_draws,
                &mut fading,
                &mut noise,
            )?;
            map.insert(mode, lsfd_weights(&stats)?);
        }
        Some(map)
    } else {
        None
    };

    Ok(LayoutState { layout_id, lsfc, graph, supports, book, active, lsfd })
}

fn run_draw(
    cfg: &SimConfig,
    plan: &ExperimentPlan,
    st: &LayoutState,
    draw: usize,
    snr: f64,
    snr_dl: f64,
) -> Result<DrawOutput> {
    let i = st.layout_id as u64;
    let m = cfg.antennas_per_ru;
    let mut fading = stream(cfg.master_seed, i, StreamPurpose::Fading, draw as u64);
    let h = draw_channel_matrix(&st.lsfc, &st.supports, m, &mut fading);
    let field = if plan.estimators.iter().any(|&e| e != CsiMode::Ideal) {
        let mut noise = stream(cfg.master_seed, i, StreamPurpose::PilotNoise, draw as u64);
        Some(synthesize_pilot_field(&h, &st.graph, &st.book, &mut noise))
    } else {
        None
    };

    // Per-RU budget for the local precoding baselines, normalized so their
    // total DL power matches the duality schemes' sum of powers.
    let k_active = st.active.iter().filter(|&&a| a).count();
    let p_ru = k_active as f64 / cfg.num_rus as f64;

    let mut out = DrawOutput { records: Vec::new(), degenerate_clzf: 0 };
    for &mode in &plan.estimators {
        let est = estimate_set(mode, &h, &st.supports, &st.graph, &st.book, field.as_ref())?;
        let mut lmmse_ul: Option<LocalLmmse> = None;
        for &scheme in &plan.schemes {
            match scheme {
                Scheme::Clzf => {
                    let (v, degenerate) = clzf_receivers(&est, &st.graph)?;
                    out.degenerate_clzf += degenerate;
                    let ul = exact_ul_sinrs(&v, &h.h, snr, &st.active);
                    out.records.push((scheme, mode, Direction::Ul, ul));
                    // Zero-forcing directions do not depend on the SNR, so
                    // the same vectors serve the (possibly virtual) DL.
                    let dl = duality_dl(&v, &est, st, snr_dl, &h)?;
                    out.records.push((scheme, mode, Direction::Dl, dl));
                }
                Scheme::LmmseCluster => {
                    if lmmse_ul.is_none() {
                        lmmse_ul = Some(lmmse_receivers(&est, &st.lsfc, &st.graph, snr)?);
                    }
                    let lm = lmmse_ul.as_ref().expect("computed above");
                    let set = lmmse_cluster_receivers(lm, &est, &st.graph, snr)?;
                    let ul = exact_ul_sinrs(&set.v, &h.h, snr, &st.active);
                    out.records.push((scheme, mode, Direction::Ul, ul));
                    let v_dl = if snr_dl == snr {
                        set.v
                    } else {
                        // LMMSE vectors depend on the SNR: rebuild them for
                        // the virtual UL before applying duality.
                        let lm_virtual =
                            lmmse_receivers(&est, &st.lsfc, &st.graph, snr_dl)?;
                        lmmse_cluster_receivers(&lm_virtual, &est, &st.graph, snr_dl)?.v
                    };
                    let dl = duality_dl(&v_dl, &est, st, snr_dl, &h)?;
                    out.records.push((scheme, mode, Direction::Dl, dl));
                }
                Scheme::Lsfd => {
                    if lmmse_ul.is_none() {
                        lmmse_ul = Some(lmmse_receivers(&est, &st.lsfc, &st.graph, snr)?);
                    }
                    let lm = lmmse_ul.as_ref().expect("computed above");
                    let weights = st
                        .lsfd
                        .as_ref()
                        .and_then(|map| map.get(&mode))
                        .ok_or_else(|| Error::Plan("missing LSFD prelude".into()))?;
                    let v = assemble_with_weights(lm, &st.graph, m, weights)?;
                    let ul = exact_ul_sinrs(&v, &h.h, snr, &st.active);
                    out.records.push((scheme, mode, Direction::Ul, ul));
                }
                Scheme::LzfEpa | Scheme::LzfPpa | Scheme::LpzfEpa | Scheme::LpzfPpa => {
                    let rule = match scheme {
                        Scheme::LzfEpa | Scheme::LpzfEpa => PowerRule::Epa,
                        _ => PowerRule::Ppa,
                    };
                    let partial = matches!(scheme, Scheme::LpzfEpa | Scheme::LpzfPpa);
                    let dl_set = local_precoders(&est, &st.lsfc, &st.graph, m, p_ru, rule, partial)?;
                    let dl = exact_dl_sinrs(&dl_set.u, &dl_set.q, &h.h, snr, &st.active);
                    out.records.push((scheme, mode, Direction::Dl, dl));
                }
            }
        }
    }
    Ok(out)
}

/// DL SINRs via duality: solve for the powers that replicate the nominal
/// UL SINRs, then score the resulting precoders against the true channel.
fn duality_dl(
    v: &CMat,
    est: &EstimateSet,
    st: &LayoutState,
    snr_eff: f64,
    h: &ChannelMatrix,
) -> Result<Vec<f64>> {
    let coeffs = nominal_coefficients(v, est, &st.lsfc, &st.graph);
    let gamma = coeffs.ul_sinrs(snr_eff);
    let alloc = dual_power_allocation(&coeffs, &gamma, snr_eff)?;
    Ok(exact_dl_sinrs(v, &alloc.q, &h.h, snr_eff, &st.active))
}

/// Builds the per-RU zero-forcing precoders and power splits. Full ZF falls
/// back to partial ZF at any RU where the pseudoinverse is infeasible.
fn local_precoders(
    est: &EstimateSet,
    lsfc: &LargeScaleMap,
    graph: &AssociationGraph,
    m: usize,
    p_ru: f64,
    rule: PowerRule,
    partial: bool,
) -> Result<DlPrecoder> {
    let mut precoders = Vec::with_capacity(graph.num_rus);
    let mut powers = Vec::with_capacity(graph.num_rus);
    for l in 0..graph.num_rus {
        let served = graph.served[l].clone();
        if served.is_empty() {
            precoders.push(RuPrecoder {
                ues: Vec::new(),
                u: CMat::zeros(m, 0),
                zf_ues: Vec::new(),
                mrt_ues: Vec::new(),
            });
            powers.push(Vec::new());
            continue;
        }
        let hl = &est.per_ru[l].mat;
        let precoder = if partial {
            lpzf_precoder(hl, &served, &lsfc.beta[l])?
        } else {
            match lzf_precoder(hl) {
                Ok(u) => RuPrecoder {
                    ues: served.clone(),
                    u,
                    zf_ues: served.clone(),
                    mrt_ues: Vec::new(),
                },
                Err(_) => lpzf_precoder(hl, &served, &lsfc.beta[l])?,
            }
        };
        powers.push(local_power(&served, &lsfc.beta[l], p_ru, rule)?);
        precoders.push(precoder);
    }
    assemble_dl_precoder(&precoders, &powers, graph, m)
}

struct Accum {
    sum_log: Vec<f64>,
    sum_sinr: Vec<f64>,
    draws: usize,
}

fn reduce_point(
    cfg: &SimConfig,
    states: &[LayoutState],
    cells: &[(usize, usize)],
    outputs: Vec<DrawOutput>,
) -> Result<SweepPointResult> {
    let k_total = cfg.num_ues;
    let mut accum: BTreeMap<(usize, Scheme, CsiMode, Direction), Accum> = BTreeMap::new();
    let mut degenerate_clzf = 0;
    for (&(layout, _draw), out) in cells.iter().zip(outputs) {
        degenerate_clzf += out.degenerate_clzf;
        for (scheme, mode, dir, sinrs) in out.records {
            let acc = accum.entry((layout, scheme, mode, dir)).or_insert_with(|| Accum {
                sum_log: vec![0.0; k_total],
                sum_sinr: vec![0.0; k_total],
                draws: 0,
            });
            acc.draws += 1;
            for (k, s) in sinrs.iter().enumerate() {
                acc.sum_log[k] += (1.0 + s).log2();
                acc.sum_sinr[k] += s;
            }
        }
    }

    let mut rows = Vec::new();
    let mut layout_sum_se: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((layout, scheme, mode, dir), acc) in &accum {
        let key = format!("{scheme}/{mode}/{dir}");
        let per_layout = layout_sum_se
            .entry(key)
            .or_insert_with(|| vec![0.0; cfg.num_layouts]);
        for ue in 0..k_total {
            let active = states[*layout].active[ue];
            let (sinr_mean, rate) = if active {
                (acc.sum_sinr[ue] / acc.draws as f64, acc.sum_log[ue] / acc.draws as f64)
            } else {
                (0.0, 0.0)
            };
            let se = spectral_efficiency(rate, cfg.pilot_dim, cfg.coherence_block);
            rows.push(ReportRow {
                layout_id: *layout,
                ue_id: ue,
                direction: *dir,
                scheme: *scheme,
                estimator: *mode,
                sinr_mean,
                rate,
                se,
            });
            if active {
                per_layout[*layout] += se;
            }
        }
    }

    let sum_se: BTreeMap<String, f64> = layout_sum_se
        .into_iter()
        .map(|(key, per_layout)| {
            let mean = per_layout.iter().sum::<f64>() / per_layout.len() as f64;
            (key, mean)
        })
        .collect();
    let outage_count: usize = states
        .iter()
        .map(|st| st.active.iter().filter(|&&a| !a).count())
        .sum();

    Ok(SweepPointResult {
        config: cfg.clone(),
        rows,
        sum_se,
        outage_count,
        degenerate_clzf,
    })
}

fn write_point_csv(path: &Path, point: &SweepPointResult) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# {} {}\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    ));
    for line in point.config.to_kv_string().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("layout_id,ue_id,direction,scheme,estimator,sinr_mean_db,rate,se\n");
    for r in &point.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.layout_id,
            r.ue_id,
            r.direction,
            r.scheme,
            r.estimator,
            db(r.sinr_mean),
            r.rate,
            r.se
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize)]
struct PointSummary {
    config: BTreeMap<String, String>,
    sum_se: BTreeMap<String, f64>,
    rate_percentiles: BTreeMap<String, [f64; 3]>,
    outage_count: usize,
    degenerate_clzf: usize,
}

#[derive(Serialize)]
struct RunSummary {
    version: String,
    points: Vec<PointSummary>,
}

fn write_summary(path: &Path, points: &[SweepPointResult]) -> Result<()> {
    let summaries: Vec<PointSummary> = points
        .iter()
        .map(|p| {
            let config: BTreeMap<String, String> = p
                .config
                .to_kv_string()
                .lines()
                .filter_map(|line| {
                    line.split_once(" = ")
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                })
                .collect();
            let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in &p.rows {
                if r.sinr_mean > 0.0 {
                    samples
                        .entry(format!("{}/{}/{}", r.scheme, r.estimator, r.direction))
                        .or_default()
                        .push(r.rate);
                }
            }
            let rate_percentiles = samples
                .into_iter()
                .map(|(key, xs)| {
                    let pcts = [
                        percentile(&xs, 0.05).unwrap_or(0.0),
                        percentile(&xs, 0.50).unwrap_or(0.0),
                        percentile(&xs, 0.95).unwrap_or(0.0),
                    ];
                    (key, pcts)
                })
                .collect();
            PointSummary {
                config,
                sum_se: p.sum_se.clone(),
                rate_percentiles,
                outage_count: p.outage_count,
                degenerate_clzf: p.degenerate_clzf,
            }
        })
        .collect();
    let summary = RunSummary {
        version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        points: summaries,
    };
    let mut file = fs::File::create(path)?;
    let body = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Plan(format!("summary serialization: {e}")))?;
    file.write_all(body.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}
