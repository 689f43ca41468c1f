//! Benchmarks for the per-draw hot path: channel synthesis, estimation,
//! receiver computation, the duality power solve, and SINR evaluation.
//!
//! All benchmarks share one medium-sized layout (L=10, M=32, K=50) so the
//! numbers are comparable across stages of the pipeline.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use cellfree_core::association::{build_association, AssociationGraph};
use cellfree_core::channel::{draw_channel_matrix, support_map, AngularSupport, ChannelMatrix};
use cellfree_core::csi::{estimate_set, synthesize_pilot_field, CsiMode, EstimateSet, PilotBook};
use cellfree_core::duality::{dual_power_allocation, nominal_coefficients};
use cellfree_core::geometry::{compute_lsfc, place_nodes, LargeScaleMap, PathlossModel};
use cellfree_core::metrics::exact_ul_sinrs;
use cellfree_core::receivers::{clzf_receivers, lmmse_cluster_receivers, lmmse_receivers};
use cellfree_core::scenario::{derive_constants, stream, SimConfig, StreamPurpose};

struct Fixture {
    cfg: SimConfig,
    lsfc: LargeScaleMap,
    graph: AssociationGraph,
    supports: Vec<Vec<AngularSupport>>,
    book: PilotBook,
    snr: f64,
    h: ChannelMatrix,
    est: EstimateSet,
    active: Vec<bool>,
}

fn fixture() -> Fixture {
    let mut cfg = SimConfig::default();
    cfg.num_rus = 10;
    cfg.antennas_per_ru = 32;
    cfg.num_ues = 50;
    cfg.pilot_dim = 20;
    let snr = derive_constants(&cfg).snr;

    let mut rng = stream(cfg.master_seed, 0, StreamPurpose::Placement, 0);
    let layout = place_nodes(&cfg, &mut rng);
    let model = PathlossModel::from_config(&cfg);
    let mut ls_rng = stream(cfg.master_seed, 0, StreamPurpose::LargeScale, 0);
    let lsfc = compute_lsfc(&layout, &model, &mut ls_rng).unwrap();
    let mut order_rng = stream(cfg.master_seed, 0, StreamPurpose::UeOrder, 0);
    let graph = build_association(&lsfc, &cfg, snr, &mut order_rng);
    let supports = support_map(&layout, cfg.angular_spread, cfg.antennas_per_ru);
    let book = PilotBook::new(cfg.pilot_dim, snr);

    let mut fading = stream(cfg.master_seed, 0, StreamPurpose::Fading, 0);
    let h = draw_channel_matrix(&lsfc, &supports, cfg.antennas_per_ru, &mut fading);
    let mut noise = stream(cfg.master_seed, 0, StreamPurpose::PilotNoise, 0);
    let field = synthesize_pilot_field(&h, &graph, &book, &mut noise);
    let est = estimate_set(
        CsiMode::SubspaceProjection,
        &h,
        &supports,
        &graph,
        &book,
        Some(&field),
    )
    .unwrap();
    let active = (0..cfg.num_ues).map(|k| !graph.is_outage(k)).collect();

    Fixture { cfg, lsfc, graph, supports, book, snr, h, est, active }
}

fn bench_channel_draw(c: &mut Criterion, fx: &Fixture) {
    c.bench_function("channel_draw_L10_M32_K50", |b| {
        let mut rng = stream(fx.cfg.master_seed, 0, StreamPurpose::Fading, 1);
        b.iter(|| {
            black_box(draw_channel_matrix(
                &fx.lsfc,
                &fx.supports,
                fx.cfg.antennas_per_ru,
                &mut rng,
            ))
        })
    });
}

fn bench_estimation(c: &mut Criterion, fx: &Fixture) {
    c.bench_function("subspace_estimation", |b| {
        let mut rng = stream(fx.cfg.master_seed, 0, StreamPurpose::PilotNoise, 1);
        let field = synthesize_pilot_field(&fx.h, &fx.graph, &fx.book, &mut rng);
        b.iter(|| {
            black_box(
                estimate_set(
                    CsiMode::SubspaceProjection,
                    &fx.h,
                    &fx.supports,
                    &fx.graph,
                    &fx.book,
                    Some(&field),
                )
                .unwrap(),
            )
        })
    });
}

fn bench_receivers(c: &mut Criterion, fx: &Fixture) {
    c.bench_function("clzf_receivers", |b| {
        b.iter(|| black_box(clzf_receivers(&fx.est, &fx.graph).unwrap()))
    });
    c.bench_function("lmmse_plus_cluster_combining", |b| {
        b.iter(|| {
            let lm = lmmse_receivers(&fx.est, &fx.lsfc, &fx.graph, fx.snr).unwrap();
            black_box(lmmse_cluster_receivers(&lm, &fx.est, &fx.graph, fx.snr).unwrap())
        })
    });
}

fn bench_duality(c: &mut Criterion, fx: &Fixture) {
    let lm = lmmse_receivers(&fx.est, &fx.lsfc, &fx.graph, fx.snr).unwrap();
    let set = lmmse_cluster_receivers(&lm, &fx.est, &fx.graph, fx.snr).unwrap();
    c.bench_function("duality_power_solve", |b| {
        b.iter(|| {
            let coeffs = nominal_coefficients(&set.v, &fx.est, &fx.lsfc, &fx.graph);
            let gamma = coeffs.ul_sinrs(fx.snr);
            black_box(dual_power_allocation(&coeffs, &gamma, fx.snr).unwrap())
        })
    });
    c.bench_function("exact_ul_sinrs", |b| {
        b.iter(|| black_box(exact_ul_sinrs(&set.v, &fx.h.h, fx.snr, &fx.active)))
    });
}

fn all(c: &mut Criterion) {
    let fx = fixture();
    bench_channel_draw(c, &fx);
    bench_estimation(c, &fx);
    bench_receivers(c, &fx);
    bench_duality(c, &fx);
}

criterion_group!(benches, all);
criterion_main!(benches);
