//! Discrete-event simulation of the tiered deployment.
//!
//! Vehicles classify their own traffic with the root model, roadside units
//! (RSUs) run the category model on what vehicles flag, near-edge nodes run
//! the fine model on suspected spoofing, and the cloud receives near-edge
//! reports and periodically pushes model updates to every node. Links have no
//! latency; the simulator counts messages, bytes and classification time.
//! Time advances in integer microsecond ticks.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{cic_iov2024_mix, Dataset, LabelHierarchy, Level};
use crate::error::{Error, Result};
use crate::hierarchy::{predict_routed, HierModel, RoutingMode};
use crate::seed;

const TICKS_PER_S: f64 = 1_000_000.0;
pub const RECORD_HEADER_BYTES: u64 = 16;
pub const BYTES_PER_KB: f64 = 1024.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub road_length_km: f64,
    pub vehicle_density_per_km: f64,
    pub min_vehicle_distance_m: f64,
    pub packet_interval_s: f64,
    pub response_time_s: f64,
    pub model_size_kb: f64,
    pub model_update_period_s: f64,
    pub testing_time_s: f64,
    /// Probability of each fine class in vehicle traffic.
    pub attack_mix: Vec<f64>,
    pub duration_s: f64,
    /// Binary features per record; sets the wire size.
    pub n_features: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            road_length_km: 1.0,
            vehicle_density_per_km: 180.0,
            min_vehicle_distance_m: 2.0,
            packet_interval_s: 1.0,
            response_time_s: 1.5,
            model_size_kb: 13.0,
            model_update_period_s: 3600.0,
            testing_time_s: 0.002,
            attack_mix: cic_iov2024_mix(),
            duration_s: 3600.0,
            n_features: 152,
            seed: 0,
        }
    }
}

/// A traffic mix with total attack probability `rate`, split among attack
/// classes in CIC-IoV2024 proportions.
pub fn mix_with_attack_rate(rate: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidConfig(format!("attack rate must lie in [0, 1], got {rate}")));
    }
    let base = cic_iov2024_mix();
    let attack: f64 = base[1..].iter().sum();
    let mut mix = vec![1.0 - rate];
    mix.extend(base[1..].iter().map(|p| p / attack * rate));
    Ok(mix)
}

fn ticks(seconds: f64) -> u64 {
    (seconds * TICKS_PER_S).round() as u64
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("road_length_km", self.road_length_km),
            ("vehicle_density_per_km", self.vehicle_density_per_km),
            ("min_vehicle_distance_m", self.min_vehicle_distance_m),
            ("packet_interval_s", self.packet_interval_s),
            ("response_time_s", self.response_time_s),
            ("model_size_kb", self.model_size_kb),
            ("model_update_period_s", self.model_update_period_s),
            ("testing_time_s", self.testing_time_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidConfig("duration_s must be non-negative".into()));
        }
        if self.n_features == 0 {
            return Err(Error::InvalidConfig("n_features must be positive".into()));
        }
        if self.attack_mix.len() != 6
            || self.attack_mix.iter().any(|&p| !(0.0..=1.0).contains(&p))
            || (self.attack_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidConfig("attack_mix must be 6 probabilities summing to 1".into()));
        }
        if 1000.0 / self.vehicle_density_per_km < self.min_vehicle_distance_m {
            return Err(Error::InvalidConfig(format!(
                "{} veh/km leaves less than {} m between vehicles",
                self.vehicle_density_per_km, self.min_vehicle_distance_m
            )));
        }
        if ticks(self.packet_interval_s) == 0 || ticks(self.model_update_period_s) == 0 {
            return Err(Error::InvalidConfig("intervals must be at least one microsecond".into()));
        }
        Ok(())
    }

    /// `ceil(features / 8) + 16` bytes.
    pub fn record_bytes(&self) -> u64 {
        (self.n_features as u64).div_ceil(8) + RECORD_HEADER_BYTES
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierTopology {
    pub vehicles_per_rsu: usize,
    pub rsus_per_edge: usize,
    /// Fix the RSU count instead of deriving it from the vehicle count.
    pub rsus: Option<usize>,
}

impl Default for TierTopology {
    fn default() -> Self {
        TierTopology {
            vehicles_per_rsu: 30,
            rsus_per_edge: 5,
            rsus: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub config: SimConfig,
    pub topology: TierTopology,
    pub vehicles: usize,
    pub rsu_of: Vec<usize>,
    pub rsus: usize,
    pub edge_of: Vec<usize>,
    pub edges: usize,
}

pub fn build_topology(config: &SimConfig, topo: &TierTopology) -> Result<SimState> {
    config.validate()?;
    if topo.vehicles_per_rsu == 0 || topo.rsus_per_edge == 0 || topo.rsus == Some(0) {
        return Err(Error::InvalidConfig("topology counts must be at least 1".into()));
    }
    let vehicles = (config.vehicle_density_per_km * config.road_length_km).round() as usize;
    if vehicles == 0 {
        return Err(Error::InvalidConfig("road holds no vehicles".into()));
    }
    let rsus = topo.rsus.unwrap_or_else(|| vehicles.div_ceil(topo.vehicles_per_rsu));
    let edges = rsus.div_ceil(topo.rsus_per_edge);
    Ok(SimState {
        config: config.clone(),
        topology: *topo,
        vehicles,
        rsu_of: (0..vehicles).map(|v| v % rsus).collect(),
        rsus,
        edge_of: (0..rsus).map(|r| r % edges).collect(),
        edges,
    })
}

/// Where verdicts come from.
pub enum SimClassifier<'a> {
    /// Draw the true class from the configured mix and return perfect verdicts.
    Stub,
    /// Draw records uniformly from `records` and route them through `model`
    /// (always in routed mode).
    Model { model: &'a HierModel, records: &'a Dataset },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TierTraffic {
    /// Records classified at this tier.
    pub classified: u64,
    /// Messages received from the tier below.
    pub messages_in: u64,
    pub bytes_in: u64,
    pub messages_per_s: f64,
    pub kb_per_s: f64,
    pub compute_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub vehicles: usize,
    pub rsus: usize,
    pub edges: usize,
    pub duration_s: f64,
    pub packets: u64,
    pub record_bytes: u64,
    pub per_vehicle_memory_kb: f64,
    pub response_time_overhead_pct: f64,
    pub vehicle: TierTraffic,
    pub rsu: TierTraffic,
    pub near_edge: TierTraffic,
    pub cloud: TierTraffic,
    /// Fraction of emitted packets forwarded to an RSU.
    pub forwarded_to_rsu_rate: f64,
    pub per_rsu_forwarded: Vec<u64>,
    pub update_pushes_per_node: u64,
    pub update_bytes_total: u64,
    pub update_kb_per_s_per_vehicle: f64,
    pub update_kb_per_s_aggregate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    ModelPush,
    Emit { vehicle: usize },
    AtRsu { rsu: usize, spoofing: bool },
    AtEdge { edge: usize },
    AtCloud,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    tick: u64,
    seq: u64,
    kind: EventKind,
}

struct Queue {
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, tick: u64, kind: EventKind) {
        self.heap.push(Reverse(Event { tick, seq: self.seq, kind }));
        self.seq += 1;
    }
}

/// Verdicts for one packet: attack at the vehicle? spoofing at the RSU?
fn verdicts(
    classifier: &SimClassifier,
    picker: &WeightedIndex<f64>,
    hierarchy: &LabelHierarchy,
    rng: &mut impl Rng,
) -> Result<(bool, bool)> {
    match classifier {
        SimClassifier::Stub => {
            let fine = picker.sample(rng);
            let benign = hierarchy.class_id(Level::Fine, crate::dataset::BENIGN);
            let spoof = hierarchy.class_id(Level::Category, "SPOOFING");
            Ok((
                Some(fine) != benign,
                Some(hierarchy.coarsen(fine, Level::Category)?) == spoof,
            ))
        }
        SimClassifier::Model { model, records } => {
            let i = rng.gen_range(0..records.n_records());
            let d = predict_routed(model, records.record(i))?;
            Ok((d.level2.is_some(), d.level3.is_some()))
        }
    }
}

pub fn run_sim(state: &SimState, classifier: &SimClassifier) -> Result<OverheadReport> {
    let cfg = &state.config;
    let routed_copy;
    let classifier = match classifier {
        SimClassifier::Model { model, records } if model.routing != RoutingMode::Routed => {
            routed_copy = HierModel {
                routing: RoutingMode::Routed,
                ..(*model).clone()
            };
            &SimClassifier::Model {
                model: &routed_copy,
                records,
            }
        }
        other => other,
    };
    let hierarchy = match classifier {
        SimClassifier::Model { model, .. } => model.hierarchy.clone(),
        SimClassifier::Stub => LabelHierarchy::iov(),
    };
    let picker = WeightedIndex::new(&cfg.attack_mix)
        .map_err(|e| Error::InvalidConfig(format!("attack_mix: {e}")))?;
    let mut rng = seed::rng(cfg.seed, "deploysim", &[]);
    let duration = ticks(cfg.duration_s);
    let interval = ticks(cfg.packet_interval_s);
    let period = ticks(cfg.model_update_period_s);
    let record_bytes = cfg.record_bytes();
    let model_bytes = (cfg.model_size_kb * BYTES_PER_KB).round() as u64;

    let mut q = Queue {
        heap: BinaryHeap::new(),
        seq: 0,
    };
    let packets_per_vehicle = duration / interval;
    for k in 0..packets_per_vehicle {
        for v in 0..state.vehicles {
            q.push(k * interval, EventKind::Emit { vehicle: v });
        }
    }
    let pushes = duration / period;
    for k in 1..=pushes {
        q.push(k * period, EventKind::ModelPush);
    }

    let mut vehicle = TierTraffic::default();
    let mut rsu = TierTraffic::default();
    let mut edge = TierTraffic::default();
    let mut cloud = TierTraffic::default();
    let mut per_rsu = vec![0u64; state.rsus];
    let mut packets = 0u64;
    let nodes = (state.vehicles + state.rsus + state.edges) as u64;
    let mut update_bytes = 0u64;

    while let Some(Reverse(ev)) = q.heap.pop() {
        match ev.kind {
            EventKind::ModelPush => update_bytes += model_bytes * nodes,
            EventKind::Emit { vehicle: v } => {
                packets += 1;
                vehicle.classified += 1;
                let (attack, spoofing) = verdicts(classifier, &picker, &hierarchy, &mut rng)?;
                if attack {
                    q.push(ev.tick, EventKind::AtRsu {
                        rsu: state.rsu_of[v],
                        spoofing,
                    });
                }
            }
            EventKind::AtRsu { rsu: r, spoofing } => {
                rsu.messages_in += 1;
                rsu.bytes_in += record_bytes;
                rsu.classified += 1;
                per_rsu[r] += 1;
                if spoofing {
                    q.push(ev.tick, EventKind::AtEdge { edge: state.edge_of[r] });
                }
            }
            EventKind::AtEdge { .. } => {
                edge.messages_in += 1;
                edge.bytes_in += record_bytes;
                edge.classified += 1;
                q.push(ev.tick, EventKind::AtCloud);
            }
            EventKind::AtCloud => {
                cloud.messages_in += 1;
                cloud.bytes_in += record_bytes;
            }
        }
    }

    let secs = cfg.duration_s;
    for t in [&mut vehicle, &mut rsu, &mut edge, &mut cloud] {
        t.compute_s = t.classified as f64 * cfg.testing_time_s;
        if secs > 0.0 {
            t.messages_per_s = t.messages_in as f64 / secs;
            t.kb_per_s = t.bytes_in as f64 / BYTES_PER_KB / secs;
        }
    }
    let per_vehicle_rate = cfg.model_size_kb / cfg.model_update_period_s;
    Ok(OverheadReport {
        vehicles: state.vehicles,
        rsus: state.rsus,
        edges: state.edges,
        duration_s: secs,
        packets,
        record_bytes,
        per_vehicle_memory_kb: cfg.model_size_kb,
        response_time_overhead_pct: cfg.testing_time_s / cfg.response_time_s * 100.0,
        forwarded_to_rsu_rate: if packets == 0 { 0.0 } else { rsu.messages_in as f64 / packets as f64 },
        vehicle,
        rsu,
        near_edge: edge,
        cloud,
        per_rsu_forwarded: per_rsu,
        update_pushes_per_node: pushes,
        update_bytes_total: update_bytes,
        update_kb_per_s_per_vehicle: per_vehicle_rate,
        update_kb_per_s_aggregate: per_vehicle_rate * nodes as f64,
    })
}

impl OverheadReport {
    pub const CSV_HEADER: &'static str = "vehicles,rsus,edges,duration_s,packets,per_vehicle_memory_kb,response_time_overhead_pct,\
rsu_messages,rsu_messages_per_s,rsu_kb_per_s,edge_messages,edge_messages_per_s,edge_kb_per_s,cloud_messages,\
forwarded_to_rsu_rate,update_pushes_per_node,update_kb_per_s_per_vehicle,update_kb_per_s_aggregate";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.vehicles,
            self.rsus,
            self.edges,
            self.duration_s,
            self.packets,
            self.per_vehicle_memory_kb,
            self.response_time_overhead_pct,
            self.rsu.messages_in,
            self.rsu.messages_per_s,
            self.rsu.kb_per_s,
            self.near_edge.messages_in,
            self.near_edge.messages_per_s,
            self.near_edge.kb_per_s,
            self.cloud.messages_in,
            self.forwarded_to_rsu_rate,
            self.update_pushes_per_node,
            self.update_kb_per_s_per_vehicle,
            self.update_kb_per_s_aggregate
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRanges {
    pub densities: Vec<f64>,
    pub durations: Vec<f64>,
    /// Total attack probabilities; see [`mix_with_attack_rate`].
    pub attack_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub density: f64,
    pub duration_s: f64,
    pub attack_rate: f64,
    pub report: OverheadReport,
}

/// Cartesian sweep with the stub classifier. The RSU count is sized once from
/// the base configuration and held fixed, so denser roads load each RSU more.
pub fn sweep(base: &SimConfig, topo: &TierTopology, ranges: &SweepRanges) -> Result<Vec<SweepPoint>> {
    if ranges.densities.is_empty() || ranges.durations.is_empty() || ranges.attack_rates.is_empty() {
        return Err(Error::InvalidConfig("every sweep range needs at least one value".into()));
    }
    let fixed = TierTopology {
        rsus: Some(build_topology(base, topo)?.rsus),
        ..*topo
    };
    let mut out = Vec::new();
    for &density in &ranges.densities {
        for &duration_s in &ranges.durations {
            for &attack_rate in &ranges.attack_rates {
                let cfg = SimConfig {
                    vehicle_density_per_km: density,
                    duration_s,
                    attack_mix: mix_with_attack_rate(attack_rate)?,
                    ..base.clone()
                };
                let report = run_sim(&build_topology(&cfg, &fixed)?, &SimClassifier::Stub)?;
                out.push(SweepPoint {
                    density,
                    duration_s,
                    attack_rate,
                    report,
                });
            }
        }
    }
    Ok(out)
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = format!("density,attack_rate,{}\n", OverheadReport::CSV_HEADER);
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.density, p.attack_rate, p.report.csv_row()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_examples() {
        let s = build_topology(&SimConfig::default(), &TierTopology::default()).unwrap();
        assert_eq!(s.vehicles, 180);
        assert_eq!(s.rsus, 6);
        assert_eq!(s.rsu_of[7], 1);
        let cramped = SimConfig {
            vehicle_density_per_km: 600.0,
            ..SimConfig::default()
        };
        assert!(build_topology(&cramped, &TierTopology::default()).is_err());
        let bad_mix = SimConfig {
            attack_mix: vec![0.5; 6],
            ..SimConfig::default()
        };
        assert!(bad_mix.validate().is_err());
    }

    #[test]
    fn table_defaults_arithmetic() {
        let cfg = SimConfig {
            duration_s: 60.0,
            ..SimConfig::default()
        };
        let r = run_sim(&build_topology(&cfg, &TierTopology::default()).unwrap(), &SimClassifier::Stub).unwrap();
        assert_eq!(r.response_time_overhead_pct, 0.002 / 1.5 * 100.0);
        assert_eq!(format!("{:.2}", r.response_time_overhead_pct), "0.13");
        assert_eq!(r.per_vehicle_memory_kb, 13.0);
        assert_eq!(r.update_kb_per_s_per_vehicle, 13.0 / 3600.0);
        assert_eq!(r.record_bytes, 35);
        assert_eq!(r.packets, 180 * 60);
        // conservation
        assert_eq!(r.rsu.messages_in, r.per_rsu_forwarded.iter().sum::<u64>());
        assert!(r.near_edge.messages_in <= r.rsu.messages_in);
        assert_eq!(r.cloud.messages_in, r.near_edge.messages_in);
    }

    #[test]
    fn no_attacks_no_forwarding() {
        let cfg = SimConfig {
            attack_mix: mix_with_attack_rate(0.0).unwrap(),
            duration_s: 30.0,
            ..SimConfig::default()
        };
        let r = run_sim(&build_topology(&cfg, &TierTopology::default()).unwrap(), &SimClassifier::Stub).unwrap();
        assert_eq!((r.rsu.messages_in, r.near_edge.messages_in, r.cloud.messages_in), (0, 0, 0));
    }

    #[test]
    fn update_pushes_follow_period() {
        let cfg = SimConfig {
            duration_s: 7200.0,
            packet_interval_s: 100.0,
            ..SimConfig::default()
        };
        let s = build_topology(&cfg, &TierTopology::default()).unwrap();
        let r = run_sim(&s, &SimClassifier::Stub).unwrap();
        assert_eq!(r.update_pushes_per_node, 2);
        let nodes = (s.vehicles + s.rsus + s.edges) as u64;
        assert_eq!(r.update_bytes_total, 2 * 13 * 1024 * nodes);
    }

    #[test]
    fn zero_duration_is_empty() {
        let cfg = SimConfig {
            duration_s: 0.0,
            ..SimConfig::default()
        };
        let r = run_sim(&build_topology(&cfg, &TierTopology::default()).unwrap(), &SimClassifier::Stub).unwrap();
        assert_eq!((r.packets, r.rsu.messages_in, r.update_pushes_per_node), (0, 0, 0));
        assert_eq!(r.forwarded_to_rsu_rate, 0.0);
    }

    #[test]
    fn deterministic_and_sweepable() {
        let cfg = SimConfig {
            duration_s: 20.0,
            seed: 9,
            ..SimConfig::default()
        };
        let s = build_topology(&cfg, &TierTopology::default()).unwrap();
        assert_eq!(run_sim(&s, &SimClassifier::Stub).unwrap(), run_sim(&s, &SimClassifier::Stub).unwrap());
        let pts = sweep(
            &cfg,
            &TierTopology::default(),
            &SweepRanges {
                densities: vec![90.0, 180.0],
                durations: vec![20.0],
                attack_rates: vec![0.0, 0.15],
            },
        )
        .unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p.report.rsus == 6));
        assert_eq!(sweep_csv(&pts).lines().count(), 5);
    }
}
