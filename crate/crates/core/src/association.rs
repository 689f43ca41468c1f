//! Dynamic user-centric cluster formation.
//!
//! Association runs in two greedy phases over the UEs in one random order:
//!
//! 1. **Leader + pilot.** Each UE picks, among RUs that still have a free
//!    pilot and whose large-scale coefficient clears the admission threshold
//!    `eta / (M * snr)`, the RU with the largest coefficient, and receives a
//!    pilot that is free there. A UE with no such RU is in outage.
//! 2. **Cluster enrollment.** Each non-outage UE then walks the remaining
//!    RUs in decreasing coefficient order and enrolls every RU where its own
//!    pilot is still free and the threshold holds, until the cluster reaches
//!    `Q` RUs. Enrolling occupies the pilot at that RU.
//!
//! Pilot occupancy is what couples UEs: within one RU's served set all
//! pilots are distinct, so a served set can never exceed the pilot dimension.

use crate::geometry::LargeScaleMap;
use crate::scenario::SimConfig;
use rand::seq::SliceRandom;
use rand::Rng;
use std::io::Write;

/// Bipartite RU-UE association state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationGraph {
    pub num_rus: usize,
    pub num_ues: usize,
    pub pilot_dim: usize,
    /// Serving cluster per UE, sorted ascending. Empty means outage.
    pub clusters: Vec<Vec<usize>>,
    /// Served UEs per RU, sorted ascending.
    pub served: Vec<Vec<usize>>,
    /// Pilot index per UE (`None` for outage).
    pub pilot: Vec<Option<usize>>,
    /// Leader RU per UE (`None` for outage).
    pub leader: Vec<Option<usize>>,
    /// Row-major membership lookup, `member[l * num_ues + k]`.
    member: Vec<bool>,
}

impl AssociationGraph {
    /// Builds a graph from an explicit edge list, for fixtures and tests.
    ///
    /// `pilots[k]` is ignored for UEs without edges (outage); the leader of
    /// a served UE defaults to its lowest-index RU unless given. Pilot
    /// uniqueness within each served set is enforced.
    pub fn from_edges(
        num_rus: usize,
        num_ues: usize,
        pilot_dim: usize,
        edges: &[(usize, usize)],
        pilots: &[usize],
        leaders: Option<&[usize]>,
    ) -> crate::Result<Self> {
        let mut g = AssociationGraph::empty(num_rus, num_ues, pilot_dim);
        for &(l, k) in edges {
            if l >= num_rus || k >= num_ues {
                return Err(crate::Error::Association(format!("edge ({l},{k}) out of range")));
            }
            if g.contains(l, k) {
                return Err(crate::Error::Association(format!("duplicate edge ({l},{k})")));
            }
            g.link(l, k);
        }
        for k in 0..num_ues {
            if g.clusters[k].is_empty() {
                continue;
            }
            let t = pilots[k];
            if t >= pilot_dim {
                return Err(crate::Error::Association(format!("pilot {t} out of range")));
            }
            g.pilot[k] = Some(t);
            let leader = match leaders {
                Some(ls) => ls[k],
                None => *g.clusters[k].iter().min().expect("nonempty"),
            };
            if !g.clusters[k].contains(&leader) {
                return Err(crate::Error::Association(format!(
                    "leader {leader} of UE {k} is not in its cluster"
                )));
            }
            g.leader[k] = Some(leader);
        }
        for l in 0..num_rus {
            if g.served[l].len() > pilot_dim {
                return Err(crate::Error::Association(format!(
                    "RU {l} serves {} UEs > pilot_dim {pilot_dim}",
                    g.served[l].len()
                )));
            }
            let mut seen = vec![false; pilot_dim];
            for &k in &g.served[l] {
                let t = g.pilot[k].expect("served UE has a pilot");
                if seen[t] {
                    return Err(crate::Error::Association(format!(
                        "pilot {t} reused within RU {l}"
                    )));
                }
                seen[t] = true;
            }
        }
        g.sort_adjacency();
        Ok(g)
    }

    fn empty(num_rus: usize, num_ues: usize, pilot_dim: usize) -> Self {
        AssociationGraph {
            num_rus,
            num_ues,
            pilot_dim,
            clusters: vec![Vec::new(); num_ues],
            served: vec![Vec::new(); num_rus],
            pilot: vec![None; num_ues],
            leader: vec![None; num_ues],
            member: vec![false; num_rus * num_ues],
        }
    }

    fn link(&mut self, l: usize, k: usize) {
        debug_assert!(!self.contains(l, k));
        self.clusters[k].push(l);
        self.served[l].push(k);
        self.member[l * self.num_ues + k] = true;
    }

    fn sort_adjacency(&mut self) {
        for c in &mut self.clusters {
            c.sort_unstable();
        }
        for s in &mut self.served {
            s.sort_unstable();
        }
    }

    /// Whether RU `l` serves UE `k`.
    pub fn contains(&self, l: usize, k: usize) -> bool {
        self.member[l * self.num_ues + k]
    }

    pub fn is_outage(&self, k: usize) -> bool {
        self.clusters[k].is_empty()
    }

    /// UEs with a serving cluster, ascending.
    pub fn active_ues(&self) -> Vec<usize> {
        (0..self.num_ues).filter(|&k| !self.is_outage(k)).collect()
    }

    pub fn outage_count(&self) -> usize {
        (0..self.num_ues).filter(|&k| self.is_outage(k)).count()
    }

    /// Union of the served sets over UE `k`'s cluster (includes `k` itself),
    /// ascending. These are the UEs whose pilots are known inside the
    /// cluster.
    pub fn cluster_neighborhood(&self, k: usize) -> Vec<usize> {
        let mut seen = vec![false; self.num_ues];
        for &l in &self.clusters[k] {
            for &j in &self.served[l] {
                seen[j] = true;
            }
        }
        (0..self.num_ues).filter(|&j| seen[j]).collect()
    }

    /// All `(ru, ue)` edges in deterministic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.served
            .iter()
            .enumerate()
            .flat_map(|(l, ues)| ues.iter().map(move |&k| (l, k)))
    }

    /// Edge-list dump as `ue,ru,pilot,is_leader` CSV rows.
    pub fn write_edge_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "ue,ru,pilot,is_leader")?;
        for k in 0..self.num_ues {
            for &l in &self.clusters[k] {
                let pilot = self.pilot[k].expect("enrolled UE must hold a pilot");
                let is_leader = self.leader[k] == Some(l);
                writeln!(w, "{},{},{},{}", k, l, pilot, is_leader as u8)?;
            }
        }
        Ok(())
    }
}

/// Admission threshold on the large-scale coefficient.
pub fn admission_threshold(cfg: &SimConfig, snr: f64) -> f64 {
    cfg.snr_threshold / (cfg.antennas_per_ru as f64 * snr)
}

/// RU indices sorted by decreasing coefficient toward UE `k`; ties break
/// toward the lower RU index.
fn rus_by_descending_beta(lsfc: &LargeScaleMap, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lsfc.beta.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        lsfc.beta[b][k]
            .partial_cmp(&lsfc.beta[a][k])
            .expect("LSFCs are finite")
            .then(a.cmp(&b))
    });
    order
}

/// Draws the UE processing order shared by both association phases.
pub fn ue_order(num_ues: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..num_ues).collect();
    order.shuffle(rng);
    order
}

/// Pilot occupancy bookkeeping shared by the two phases.
struct PilotState {
    /// `used[l][t]`: pilot `t` taken at RU `l`.
    used: Vec<Vec<bool>>,
    /// Number of UEs holding pilot `t`, across the whole network.
    assigned: Vec<usize>,
}

impl PilotState {
    fn new(num_rus: usize, pilot_dim: usize) -> Self {
        PilotState { used: vec![vec![false; pilot_dim]; num_rus], assigned: vec![0; pilot_dim] }
    }

    fn has_free(&self, l: usize) -> bool {
        self.used[l].iter().any(|&u| !u)
    }

    /// Among pilots free at RU `l`, the one held by the fewest UEs
    /// network-wide; ties break toward the lowest index. Balancing the
    /// assignment keeps co-pilot sets small and guarantees globally distinct
    /// pilots whenever `pilot_dim >= num_ues`.
    fn pick(&self, l: usize) -> Option<usize> {
        (0..self.assigned.len())
            .filter(|&t| !self.used[l][t])
            .min_by_key(|&t| (self.assigned[t], t))
    }
}

/// Runs both association phases and returns the finished graph.
pub fn build_association(
    lsfc: &LargeScaleMap,
    cfg: &SimConfig,
    snr: f64,
    rng: &mut impl Rng,
) -> AssociationGraph {
    let order = ue_order(cfg.num_ues, rng);
    build_association_with_order(lsfc, cfg, snr, &order)
}

/// As [`build_association`] with an explicit UE order (useful for tests).
pub fn build_association_with_order(
    lsfc: &LargeScaleMap,
    cfg: &SimConfig,
    snr: f64,
    order: &[usize],
) -> AssociationGraph {
    let mut g = AssociationGraph::empty(cfg.num_rus, cfg.num_ues, cfg.pilot_dim);
    let mut pilots = PilotState::new(cfg.num_rus, cfg.pilot_dim);
    let threshold = admission_threshold(cfg, snr);

    // Phase 1: leaders and pilots.
    for &k in order {
        let mut best: Option<usize> = None;
        for l in 0..cfg.num_rus {
            if lsfc.beta[l][k] < threshold || !pilots.has_free(l) {
                continue;
            }
            // Strict improvement keeps the lowest index on ties.
            if best.map_or(true, |b| lsfc.beta[l][k] > lsfc.beta[b][k]) {
                best = Some(l);
            }
        }
        let Some(l) = best else { continue }; // outage
        let t = pilots.pick(l).expect("leader candidates have a free pilot");
        pilots.used[l][t] = true;
        pilots.assigned[t] += 1;
        g.pilot[k] = Some(t);
        g.leader[k] = Some(l);
        g.link(l, k);
    }

    // Phase 2: cluster enrollment, same UE order.
    for &k in order {
        let Some(t) = g.pilot[k] else { continue };
        for &l in &rus_by_descending_beta(lsfc, k) {
            if g.clusters[k].len() >= cfg.max_cluster_size {
                break;
            }
            if lsfc.beta[l][k] < threshold {
                break; // sorted descending: nothing further qualifies
            }
            if g.contains(l, k) || pilots.used[l][t] {
                continue;
            }
            pilots.used[l][t] = true;
            g.link(l, k);
        }
    }

    g.sort_adjacency();
    g
}
