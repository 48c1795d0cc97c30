//! Slotted-time end-to-end engine.
//!
//! A run executes slots sequentially: sensors periodically measure the
//! exogenous interference (ambient Poisson field plus the primary), nodes
//! periodically refresh their OP values through a configurable control-loop
//! delay (staleness is emergent), every slot each pair draws its duplex and
//! transmit outcome, SINRs are evaluated against the access threshold, and
//! the primary re-draws its on/off state on its own period. Metrics
//! aggregate throughput with LTE-style overhead, success rates (BER
//! proxies), energy, duplex-mode fractions, and Jain fairness.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duplex::DuplexOutcome;
use crate::error::{Error, Result};
use crate::geometry::{sample_ppp, FadingKind, Point, MIN_LINK_DISTANCE};
use crate::mac::{transmit_decision, MacPolicy};
use crate::op::{estimate_op, lookup_op, unconditional_coverage, OpQuery, OpTable};
use crate::rng;
use crate::scenario::{
    DuplexScheme, OpSource, PolicyKindConfig, ScenarioConfig, Topology,
};

/// Worst-case control-loop delay: the sum of the configured per-hop control
/// delays plus one sensing period. Documents staleness; does not gate runs.
pub fn latency_budget(timing: &crate::scenario::TimingConfig) -> f64 {
    timing.control_delay_total() + timing.sensing_period
}

/// Outcome of one transmitted direction in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionOutcome {
    pub sinr: f64,
    pub success: bool,
    pub tx_power: f64,
}

/// Per-pair slice of a slot record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSlot {
    pub mode: DuplexOutcome,
    /// Present when node A transmitted (direction A -> B).
    pub dir_ab: Option<DirectionOutcome>,
    /// Present when node B transmitted (direction B -> A).
    pub dir_ba: Option<DirectionOutcome>,
    /// OP values the nodes acted on this slot (possibly stale; None before
    /// the first usable reading, during which the node stays silent).
    pub op_a_used: Option<f64>,
    pub op_b_used: Option<f64>,
    /// Sensing slot that produced the OP reading, for staleness accounting.
    pub op_meas_slot: Option<u64>,
    /// Transmit energy spent by the pair this slot, joules.
    pub energy_j: f64,
}

/// Primary slice of a slot record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimarySlot {
    pub active: bool,
    pub sinr: Option<f64>,
    pub success: Option<bool>,
}

/// Everything observed in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub pairs: Vec<PairSlot>,
    pub primary: PrimarySlot,
}

/// 95% confidence half-widths for the statistical metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsCi {
    pub system_throughput_bps: f64,
    pub secondary_throughput_bps: f64,
    pub primary_throughput_bps: f64,
    pub primary_success_rate: f64,
    pub secondary_success_rate: f64,
    pub secondary_shannon_sum_se: f64,
}

/// Aggregated run metrics. Throughputs use the threshold rate model with
/// overhead accounting; the Shannon column is the overhead-free spectral
/// efficiency of the secondary sum rate, for mode comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub system_throughput_bps: f64,
    pub secondary_throughput_bps: f64,
    pub primary_throughput_bps: f64,
    /// Fraction of primary-active slots whose primary link succeeded.
    pub primary_success_rate: f64,
    /// Fraction of secondary transmissions that succeeded.
    pub secondary_success_rate: f64,
    /// Mean transmit power spent per secondary node, J/s.
    pub mean_energy_per_node_w: f64,
    pub fd_fraction: f64,
    pub hd_fraction: f64,
    pub silence_fraction: f64,
    pub jain_fairness: f64,
    /// Mean per-slot secondary sum rate, bits/s/Hz (Shannon, no overhead).
    pub secondary_shannon_sum_se: f64,
    /// OP lookups that fell back to the unconditional coverage value.
    pub op_fallback_events: u64,
    pub ci: MetricsCi,
}

/// Per-direction summary over a run, reporting the average SINR both
/// conditioned on the direction transmitting and unconditionally (silent
/// slots counted as zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionStats {
    pub pair: usize,
    /// true = A -> B, false = B -> A.
    pub a_to_b: bool,
    pub transmissions: u64,
    pub successes: u64,
    pub cond_mean_sinr: f64,
    pub uncond_mean_sinr: f64,
}

/// Result of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub slots: Vec<SlotRecord>,
    pub direction_stats: Vec<DirectionStats>,
    /// The config actually executed, with `policy.kind = auto` resolved.
    pub resolved: ScenarioConfig,
}

// ---------------------------------------------------------------------------
// Engine state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct NodeCtx {
    /// Static linear gains into this node from every other node
    /// (`gain_from[tx_node]`, None = no coupling) before fading.
    gain_from: Vec<Option<f64>>,
    /// Static gain from the primary transmitter, if any.
    gain_from_primary: Option<f64>,
    /// Static gains from each ambient field point, scaled by field power.
    ambient: Vec<f64>,
    /// Constant external interference from the scenario.
    ext_interference: f64,
    pinned_op: Option<f64>,
    /// Nearest sensor index and distance, for OP queries.
    nearest_sensor: Option<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct SensorCtx {
    ambient: Vec<f64>,
    gain_from_primary: Option<f64>,
    /// (sensing slot, measured interference), appended in slot order.
    history: Vec<(u64, f64)>,
}

/// Live slotted simulation. Construct with [`SimState::new`], then either
/// drive it slot by slot with [`SimState::step_slot`] or use [`run`].
pub struct SimState {
    cfg: ScenarioConfig,
    theta: f64,
    primary_theta: f64,
    n_pairs: usize,
    policy: MacPolicy,
    nodes: Vec<NodeCtx>,
    sensors: Vec<SensorCtx>,
    primary_rx_ambient: Vec<f64>,
    primary_rx_gain_from: Vec<Option<f64>>,
    primary_link_gain: f64,
    /// Closed-form coverage at the scenario threshold; the documented
    /// fallback for failed table lookups and the oracle source value.
    oracle_op: Option<f64>,
    table: Option<OpTable>,
    // Simulation clocks (slot counts).
    sensing_every: u64,
    op_read_every: u64,
    primary_every: u64,
    delay_slots: u64,
    // Mutable per-run state.
    slot: u64,
    primary_active: bool,
    /// True for nodes whose OP drives a transmit decision.
    governed: Vec<bool>,
    node_op: Vec<Option<f64>>,
    node_op_meas_slot: Vec<Option<u64>>,
    op_fallback_events: u64,
    rayleigh: bool,
    // Random streams.
    pair_mac: Vec<ChaCha8Rng>,
    pair_chan: Vec<ChaCha8Rng>,
    sensor_chan: Vec<ChaCha8Rng>,
    primary_mac: ChaCha8Rng,
    primary_chan: ChaCha8Rng,
    op_live: ChaCha8Rng,
}

fn period_slots(period: f64, slot: f64) -> u64 {
    (period / slot).round().max(1.0) as u64
}

impl SimState {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let mut cfg = cfg.clone();
        let topology = cfg.topology()?;
        let theta = cfg.access_threshold_linear();
        let n_pairs = cfg.pairs.len();
        let seed = cfg.run.seed;
        let alpha = cfg.channel.pathloss_exponent;
        let ref_gain = cfg.channel.reference_gain;

        // Ambient interferer positions are drawn once per run; only their
        // fading varies per slot.
        let field_points = if topology == Topology::Positional && cfg.field.density > 0.0 {
            sample_ppp(&cfg.field, &mut rng::stream(seed, "field", 0))
        } else {
            Vec::new()
        };

        let static_gain = |from: Point, to: Point| -> f64 {
            let d = from.distance_to(&to).max(MIN_LINK_DISTANCE);
            ref_gain * d.powf(-alpha)
        };

        let node_point = |idx: usize| -> Option<Point> {
            let (pair, node) = (idx / 2, idx % 2);
            let spec = &cfg.pairs[pair];
            let coords = if node == 0 { spec.node_a } else { spec.node_b };
            coords.map(|[x, y]| Point::new(x, y))
        };

        let n_nodes = 2 * n_pairs;
        let primary_point = cfg.primary.as_ref().map(|p| Point::new(p.position[0], p.position[1]));

        let sensor_points: Vec<Point> = cfg
            .sensors
            .iter()
            .map(|[x, y]| Point::new(*x, *y))
            .collect();

        let mut nodes = Vec::with_capacity(n_nodes);
        for idx in 0..n_nodes {
            let (pair, is_b) = (idx / 2, idx % 2 == 1);
            let spec = &cfg.pairs[pair];
            let mut gain_from: Vec<Option<f64>> = vec![None; n_nodes];
            match topology {
                Topology::Positional => {
                    let here = node_point(idx).expect("validated positional pair");
                    for (tx, gain) in gain_from.iter_mut().enumerate() {
                        if tx != idx {
                            *gain = Some(static_gain(node_point(tx).unwrap(), here));
                        }
                    }
                }
                Topology::ExplicitGains => {
                    // Intra-pair links.
                    let peer = 2 * pair + if is_b { 0 } else { 1 };
                    gain_from[peer] = if is_b { spec.gain_ab } else { spec.gain_ba };
                    // Declared cross links into this node.
                    for cg in &cfg.cross_gains {
                        let to_idx = 2 * cg.to.0
                            + match cg.to.1 {
                                crate::scenario::NodeId::A => 0,
                                crate::scenario::NodeId::B => 1,
                            };
                        if to_idx == idx {
                            let from_idx = 2 * cg.from.0
                                + match cg.from.1 {
                                    crate::scenario::NodeId::A => 0,
                                    crate::scenario::NodeId::B => 1,
                                };
                            gain_from[from_idx] = Some(cg.gain);
                        }
                    }
                }
            }

            let here = node_point(idx);
            let ambient: Vec<f64> = match here {
                Some(p) => field_points
                    .iter()
                    .map(|fp| cfg.field.tx_power * static_gain(*fp, p))
                    .collect(),
                None => Vec::new(),
            };
            let gain_from_primary = match (here, primary_point) {
                (Some(p), Some(pp)) => Some(static_gain(pp, p)),
                _ => None,
            };
            let nearest_sensor = here.and_then(|p| {
                sensor_points
                    .iter()
                    .enumerate()
                    .map(|(s, sp)| (s, p.distance_to(sp)))
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            });

            nodes.push(NodeCtx {
                gain_from,
                gain_from_primary,
                ambient,
                ext_interference: if is_b {
                    spec.ext_interference_b
                } else {
                    spec.ext_interference_a
                },
                pinned_op: if is_b { spec.op_b } else { spec.op_a },
                nearest_sensor,
            });
        }

        let sensors: Vec<SensorCtx> = sensor_points
            .iter()
            .map(|sp| SensorCtx {
                ambient: field_points
                    .iter()
                    .map(|fp| cfg.field.tx_power * static_gain(*fp, *sp))
                    .collect(),
                gain_from_primary: primary_point.map(|pp| static_gain(pp, *sp)),
                history: Vec::new(),
            })
            .collect();

        let (primary_rx_ambient, primary_rx_gain_from, primary_link_gain, primary_theta) =
            match &cfg.primary {
                Some(p) => {
                    let prx = p.rx_point();
                    let ambient: Vec<f64> = field_points
                        .iter()
                        .map(|fp| cfg.field.tx_power * static_gain(*fp, prx))
                        .collect();
                    let from_nodes: Vec<Option<f64>> = (0..n_nodes)
                        .map(|idx| node_point(idx).map(|np| static_gain(np, prx)))
                        .collect();
                    let link = static_gain(primary_point.unwrap(), prx);
                    (
                        ambient,
                        from_nodes,
                        link,
                        crate::scenario::db_to_linear(p.success_threshold_db),
                    )
                }
                None => (Vec::new(), Vec::new(), 0.0, 1.0),
            };

        // Nodes whose OP drives a transmit decision: both pair nodes under
        // hybrid duplex, only node A in simplex, none under the scheduled
        // TDD baseline.
        let governed: Vec<usize> = (0..n_nodes)
            .filter(|idx| {
                if cfg.duplex.enabled {
                    cfg.duplex.scheme == DuplexScheme::Hybrid
                } else {
                    idx % 2 == 0
                }
            })
            .collect();

        // The oracle OP (unconditional coverage) backs the oracle source and
        // the documented fallback for failed table lookups. Only computable
        // for interference-limited Rayleigh channels.
        let needs_engine = governed.iter().any(|&idx| nodes[idx].pinned_op.is_none());
        let oracle_op = if needs_engine || cfg.op.source == OpSource::Table {
            Some(unconditional_coverage(
                theta,
                &cfg.field,
                &cfg.channel,
                cfg.op.link_distance,
            )?)
        } else {
            None
        };

        let table = match (&cfg.op.source, needs_engine) {
            (OpSource::Table, true) => {
                let path = cfg.op.table_path.as_ref().ok_or_else(|| {
                    Error::Config("op.source=table requires op.table_path".into())
                })?;
                let table = OpTable::load(std::path::Path::new(path))?;
                check_table_metadata(&table, &cfg)?;
                Some(table)
            }
            _ => None,
        };

        // Resolve an auto policy shape from the density rule using the
        // initial OP picture: pinned values where present, the oracle
        // coverage elsewhere.
        if cfg.policy.kind == PolicyKindConfig::Auto {
            let mut sum = 0.0;
            for &idx in &governed {
                sum += nodes[idx]
                    .pinned_op
                    .or(oracle_op)
                    .ok_or_else(|| Error::Config("auto policy needs resolvable OPs".into()))?;
            }
            let mean_op = sum / governed.len().max(1) as f64;
            cfg.policy.kind =
                match crate::mac::select_policy_shape(cfg.field.density, mean_op, cfg.policy.beta)
                {
                    crate::mac::PolicyShape::Concave => PolicyKindConfig::Concave,
                    crate::mac::PolicyShape::Linear => PolicyKindConfig::Linear,
                };
        }
        let policy = cfg.policy.to_mac_policy()?;

        let slot_s = cfg.timing.slot;
        let delay_total = cfg.timing.control_delay_total();
        let delay_slots = ((delay_total / slot_s) - 1e-9).ceil().max(0.0) as u64;

        Ok(SimState {
            theta,
            primary_theta,
            n_pairs,
            policy,
            nodes,
            sensors,
            primary_rx_ambient,
            primary_rx_gain_from,
            primary_link_gain,
            oracle_op,
            table,
            sensing_every: period_slots(cfg.timing.sensing_period, slot_s),
            op_read_every: period_slots(cfg.timing.op_read_period, slot_s),
            primary_every: cfg
                .primary
                .as_ref()
                .map(|p| period_slots(p.decision_period, slot_s))
                .unwrap_or(1),
            delay_slots,
            slot: 0,
            primary_active: false,
            governed: (0..n_nodes).map(|idx| governed.contains(&idx)).collect(),
            node_op: vec![None; 2 * n_pairs],
            node_op_meas_slot: vec![None; 2 * n_pairs],
            op_fallback_events: 0,
            rayleigh: cfg.channel.fading_kind == FadingKind::Rayleigh,
            pair_mac: (0..n_pairs as u64).map(|p| rng::stream(seed, "pair-mac", p)).collect(),
            pair_chan: (0..n_pairs as u64).map(|p| rng::stream(seed, "pair-chan", p)).collect(),
            sensor_chan: (0..cfg.sensors.len() as u64)
                .map(|s| rng::stream(seed, "sensor-chan", s))
                .collect(),
            primary_mac: rng::stream(seed, "primary-mac", 0),
            primary_chan: rng::stream(seed, "primary-chan", 0),
            op_live: rng::stream(seed, "op-live", 0),
            cfg,
        })
    }

    /// The executed configuration with every deferred choice resolved.
    pub fn resolved_config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn op_fallback_events(&self) -> u64 {
        self.op_fallback_events
    }

    fn fade(rayleigh: bool, rng: &mut ChaCha8Rng) -> f64 {
        if rayleigh {
            rand_distr::Distribution::sample(&rand_distr::Exp1, rng)
        } else {
            1.0
        }
    }

    /// Ambient field interference at a node-like location for this slot.
    fn ambient_at(rayleigh: bool, gains: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        if rayleigh {
            gains.iter().map(|g| g * Self::fade(true, rng)).sum()
        } else {
            gains.iter().sum()
        }
    }

    fn refresh_node_op(&mut self, node_idx: usize) -> Result<()> {
        if self.nodes[node_idx].pinned_op.is_some() {
            self.node_op[node_idx] = self.nodes[node_idx].pinned_op;
            self.node_op_meas_slot[node_idx] = None;
            return Ok(());
        }
        if !self.governed[node_idx] {
            return Ok(());
        }
        match self.cfg.op.source {
            OpSource::OracleUncorrelated => {
                self.node_op[node_idx] = self.oracle_op;
                self.node_op_meas_slot[node_idx] = None;
            }
            OpSource::Table | OpSource::Live => {
                let Some((sensor_idx, distance)) = self.nodes[node_idx].nearest_sensor else {
                    return Err(Error::Runtime(format!(
                        "node {node_idx} has no sensor to read OP from"
                    )));
                };
                // Newest measurement old enough to have traversed the
                // control loop.
                let usable_at = self.slot.checked_sub(self.delay_slots);
                let reading = usable_at.and_then(|limit| {
                    self.sensors[sensor_idx]
                        .history
                        .iter()
                        .rev()
                        .find(|(t, _)| *t <= limit)
                        .copied()
                });
                let Some((meas_slot, measured)) = reading else {
                    // Before the first usable reading the node stays silent.
                    self.node_op[node_idx] = None;
                    self.node_op_meas_slot[node_idx] = None;
                    return Ok(());
                };
                let op = match self.cfg.op.source {
                    OpSource::Table => {
                        let table = self.table.as_ref().expect("table loaded at init");
                        match lookup_op(table, measured, distance) {
                            Ok(v) => v,
                            Err(Error::OutOfTableRange(_)) | Err(Error::MissingCell { .. }) => {
                                self.op_fallback_events += 1;
                                self.oracle_op.expect("fallback coverage precomputed")
                            }
                            Err(e) => return Err(e),
                        }
                    }
                    OpSource::Live => {
                        let query = OpQuery {
                            measured_interference: measured,
                            sensor_node_distance: distance,
                            desired_link_distance: self.cfg.op.link_distance,
                            access_threshold: self.theta,
                        };
                        match estimate_op(
                            &query,
                            &self.cfg.field,
                            &self.cfg.channel,
                            &self.cfg.op.conditioning,
                            &mut self.op_live,
                        ) {
                            Ok(est) => est.value,
                            Err(Error::ConditioningTooRare { .. }) => {
                                self.op_fallback_events += 1;
                                self.oracle_op.expect("fallback coverage precomputed")
                            }
                            Err(e) => return Err(e),
                        }
                    }
                    OpSource::OracleUncorrelated => unreachable!(),
                };
                self.node_op[node_idx] = Some(op);
                self.node_op_meas_slot[node_idx] = Some(meas_slot);
            }
        }
        Ok(())
    }

    /// Execute one slot and return its record.
    pub fn step_slot(&mut self) -> Result<SlotRecord> {
        let t = self.slot;
        let rayleigh = self.rayleigh;

        // (1) Primary on/off re-draw on its decision period.
        if let Some(primary) = &self.cfg.primary {
            if t.is_multiple_of(self.primary_every) {
                self.primary_active = self.primary_mac.random_bool(primary.transmit_probability);
            }
        }

        // (2) Sensor measurements: ambient field plus the primary. The
        // sharing network's own transmissions are calibrated out.
        if t.is_multiple_of(self.sensing_every) {
            let primary_power = self
                .cfg
                .primary
                .as_ref()
                .map(|p| p.tx_power)
                .unwrap_or(0.0);
            let primary_active = self.primary_active;
            for s in 0..self.sensors.len() {
                let rng = &mut self.sensor_chan[s];
                let mut measured = Self::ambient_at(rayleigh, &self.sensors[s].ambient, rng);
                if primary_active {
                    if let Some(g) = self.sensors[s].gain_from_primary {
                        measured += primary_power * g * Self::fade(rayleigh, rng);
                    }
                }
                self.sensors[s].history.push((t, measured));
            }
        }

        // (3) OP refresh through the delayed control loop.
        if t.is_multiple_of(self.op_read_every) {
            for idx in 0..self.nodes.len() {
                self.refresh_node_op(idx)?;
            }
        }

        // (4) MAC / duplex decisions -> per-node transmit power.
        let mut tx_power = vec![0.0f64; self.nodes.len()];
        let mut modes = Vec::with_capacity(self.n_pairs);
        for pair in 0..self.n_pairs {
            let (a, b) = (2 * pair, 2 * pair + 1);
            let mac_rng = &mut self.pair_mac[pair];
            if self.cfg.duplex.enabled {
                match self.cfg.duplex.scheme {
                    DuplexScheme::Hybrid => {
                        for idx in [a, b] {
                            if let Some(op) = self.node_op[idx] {
                                let d = transmit_decision(
                                    op,
                                    self.cfg.access_mode,
                                    &self.policy,
                                    mac_rng,
                                )?;
                                tx_power[idx] = d.power;
                            }
                        }
                    }
                    // Scheduled TDD baseline: directions alternate at full
                    // power, no OP thinning.
                    DuplexScheme::Tdd => {
                        let idx = if t.is_multiple_of(2) { a } else { b };
                        tx_power[idx] = self.policy.max_power;
                    }
                }
            } else {
                // Simplex: node A is the pair's transmitter.
                if let Some(op) = self.node_op[a] {
                    let d = transmit_decision(op, self.cfg.access_mode, &self.policy, mac_rng)?;
                    tx_power[a] = d.power;
                }
            }
            let mode = match (tx_power[a] > 0.0, tx_power[b] > 0.0) {
                (true, true) => DuplexOutcome::Fd,
                (true, false) => DuplexOutcome::HdA,
                (false, true) => DuplexOutcome::HdB,
                (false, false) => DuplexOutcome::Silence,
            };
            modes.push(mode);
        }

        let primary_power = if self.primary_active {
            self.cfg.primary.as_ref().map(|p| p.tx_power).unwrap_or(0.0)
        } else {
            0.0
        };

        // (5) Per-direction SINR evaluation at the receiving node.
        let noise = self.cfg.channel.noise_power;
        let chi = self.cfg.duplex.chi;
        let mut pair_slots = Vec::with_capacity(self.n_pairs);
        for (pair, &mode) in modes.iter().enumerate() {
            let (a, b) = (2 * pair, 2 * pair + 1);
            let mut eval = |rx: usize, tx: usize| -> Option<DirectionOutcome> {
                if tx_power[tx] == 0.0 {
                    return None;
                }
                let chan_rng = &mut self.pair_chan[pair];
                let node = &self.nodes[rx];
                let desired_gain = node.gain_from[tx].unwrap_or(0.0);
                let signal = tx_power[tx] * desired_gain * Self::fade(rayleigh, chan_rng);
                let mut denom =
                    node.ext_interference + noise + Self::ambient_at(rayleigh, &node.ambient, chan_rng);
                for (other, &p) in tx_power.iter().enumerate() {
                    if p > 0.0 && other != tx && other != rx {
                        if let Some(g) = node.gain_from[other] {
                            denom += p * g * Self::fade(rayleigh, chan_rng);
                        }
                    }
                }
                // Residual self-interference while the receiver itself
                // transmits (FD).
                if tx_power[rx] > 0.0 {
                    denom += chi * tx_power[rx];
                }
                if primary_power > 0.0 {
                    if let Some(g) = node.gain_from_primary {
                        denom += primary_power * g * Self::fade(rayleigh, chan_rng);
                    }
                }
                let success = signal > self.theta * denom;
                let sinr = if denom == 0.0 {
                    f64::INFINITY
                } else {
                    signal / denom
                };
                Some(DirectionOutcome {
                    sinr,
                    success,
                    tx_power: tx_power[tx],
                })
            };

            let dir_ab = eval(b, a);
            let dir_ba = eval(a, b);
            let energy_j = (tx_power[a] + tx_power[b]) * self.cfg.timing.slot;
            pair_slots.push(PairSlot {
                mode,
                dir_ab,
                dir_ba,
                op_a_used: self.node_op[a],
                op_b_used: self.node_op[b],
                op_meas_slot: self.node_op_meas_slot[a].or(self.node_op_meas_slot[b]),
                energy_j,
            });
        }

        // (6) Primary link evaluation at its receiver.
        let primary = if self.primary_active && self.cfg.primary.is_some() {
            let rng = &mut self.primary_chan;
            let signal =
                primary_power * self.primary_link_gain * Self::fade(rayleigh, rng);
            let mut denom = noise + Self::ambient_at(rayleigh, &self.primary_rx_ambient, rng);
            for (node, &p) in tx_power.iter().enumerate() {
                if p > 0.0 {
                    if let Some(g) = self.primary_rx_gain_from[node] {
                        denom += p * g * Self::fade(rayleigh, rng);
                    }
                }
            }
            let success = signal > self.primary_theta * denom;
            let sinr = if denom == 0.0 {
                f64::INFINITY
            } else {
                signal / denom
            };
            PrimarySlot {
                active: true,
                sinr: Some(sinr),
                success: Some(success),
            }
        } else {
            PrimarySlot {
                active: false,
                sinr: None,
                success: None,
            }
        };

        self.slot += 1;
        Ok(SlotRecord {
            slot: t,
            pairs: pair_slots,
            primary,
        })
    }
}

fn check_table_metadata(table: &OpTable, cfg: &ScenarioConfig) -> Result<()> {
    let meta = &table.metadata;
    let theta = cfg.access_threshold_linear();
    let mismatch = meta.field != cfg.field
        || meta.channel != cfg.channel
        || meta.desired_link_distance != cfg.op.link_distance
        || (meta.access_threshold - theta).abs() > 1e-12 * theta.max(1.0);
    if mismatch {
        return Err(Error::Config(
            "op table metadata does not match the scenario (field/channel/threshold/link \
             distance); rebuild the table for this scenario"
                .into(),
        ));
    }
    Ok(())
}

/// Execute a full run.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let mut state = SimState::new(cfg)?;
    let slots = cfg.run.slots;
    let mut records = Vec::with_capacity(slots as usize);
    for _ in 0..slots {
        records.push(state.step_slot()?);
    }
    let resolved = state.resolved_config().clone();
    let metrics = aggregate_metrics(&records, &resolved, state.op_fallback_events());
    let direction_stats = direction_stats(&records, resolved.pairs.len());
    Ok(RunOutput {
        metrics,
        slots: records,
        direction_stats,
        resolved,
    })
}

/// Throughput accounting parameters, taken from a scenario.
#[derive(Debug, Clone, Copy)]
pub struct ThroughputParams {
    pub bandwidth_hz: f64,
    pub slot_s: f64,
    /// Secondary access threshold, linear.
    pub theta: f64,
    /// Primary success threshold, linear.
    pub primary_theta: f64,
}

/// Per-category throughput in bits/s from a slot log: each successful
/// direction-slot carries `log2(1 + theta) * bandwidth * usable_fraction`
/// bits per second of slot time.
pub fn throughput(
    records: &[SlotRecord],
    overhead: &crate::scenario::OverheadConfig,
    params: &ThroughputParams,
) -> (f64, f64, f64) {
    if records.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let usable = overhead.usable_fraction();
    let sec_rate = (1.0 + params.theta).log2() * params.bandwidth_hz * usable;
    let prim_rate = (1.0 + params.primary_theta).log2() * params.bandwidth_hz * usable;
    let mut secondary_bits = 0.0;
    let mut primary_bits = 0.0;
    for rec in records {
        for pair in &rec.pairs {
            for dir in [&pair.dir_ab, &pair.dir_ba].into_iter().flatten() {
                if dir.success {
                    secondary_bits += sec_rate * params.slot_s;
                }
            }
        }
        if rec.primary.success == Some(true) {
            primary_bits += prim_rate * params.slot_s;
        }
    }
    let duration = records.len() as f64 * params.slot_s;
    let secondary = secondary_bits / duration;
    let primary = primary_bits / duration;
    (secondary + primary, secondary, primary)
}

fn mean_and_ci(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

fn rate_ci(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 0.0);
    }
    let p = successes as f64 / trials as f64;
    (p, 1.96 * (p * (1.0 - p) / trials as f64).sqrt())
}

/// Aggregate a slot log into [`RunMetrics`].
pub fn aggregate_metrics(
    records: &[SlotRecord],
    cfg: &ScenarioConfig,
    op_fallback_events: u64,
) -> RunMetrics {
    let n_slots = records.len();
    if n_slots == 0 {
        return RunMetrics {
            op_fallback_events,
            ..RunMetrics::default()
        };
    }
    let params = ThroughputParams {
        bandwidth_hz: cfg.bandwidth_hz,
        slot_s: cfg.timing.slot,
        theta: cfg.access_threshold_linear(),
        primary_theta: cfg
            .primary
            .as_ref()
            .map(|p| crate::scenario::db_to_linear(p.success_threshold_db))
            .unwrap_or(1.0),
    };
    let usable = cfg.overhead.usable_fraction();
    let sec_bits_per_slot = (1.0 + params.theta).log2() * params.bandwidth_hz * usable * params.slot_s;
    let prim_bits_per_slot =
        (1.0 + params.primary_theta).log2() * params.bandwidth_hz * usable * params.slot_s;

    let n_pairs = cfg.pairs.len();
    let mut sec_trials = 0u64;
    let mut sec_successes = 0u64;
    let mut prim_trials = 0u64;
    let mut prim_successes = 0u64;
    let mut energy_j = 0.0;
    let mut mode_counts = [0u64; 4];
    // Per-slot bit samples for CI estimation.
    let mut sec_bits_samples = Vec::with_capacity(n_slots);
    let mut prim_bits_samples = Vec::with_capacity(n_slots);
    let mut sys_bits_samples = Vec::with_capacity(n_slots);
    let mut shannon_samples = Vec::with_capacity(n_slots);
    // Per-direction successful bits for fairness.
    let mut dir_bits = vec![0.0f64; 2 * n_pairs];

    for rec in records {
        let mut sec_bits = 0.0;
        let mut shannon_sum = 0.0;
        for (p, pair) in rec.pairs.iter().enumerate() {
            energy_j += pair.energy_j;
            let mode_idx = match pair.mode {
                DuplexOutcome::Fd => 0,
                DuplexOutcome::HdA => 1,
                DuplexOutcome::HdB => 2,
                DuplexOutcome::Silence => 3,
            };
            mode_counts[mode_idx] += 1;
            for (d, dir) in [(0usize, &pair.dir_ab), (1usize, &pair.dir_ba)] {
                if let Some(out) = dir {
                    sec_trials += 1;
                    if out.success {
                        sec_successes += 1;
                        sec_bits += sec_bits_per_slot;
                        dir_bits[2 * p + d] += sec_bits_per_slot;
                    }
                    if out.sinr.is_finite() {
                        shannon_sum += (1.0 + out.sinr).log2();
                    }
                }
            }
        }
        let mut prim_bits = 0.0;
        if rec.primary.active {
            prim_trials += 1;
            if rec.primary.success == Some(true) {
                prim_successes += 1;
                prim_bits = prim_bits_per_slot;
            }
        }
        sec_bits_samples.push(sec_bits);
        prim_bits_samples.push(prim_bits);
        sys_bits_samples.push(sec_bits + prim_bits);
        shannon_samples.push(shannon_sum);
    }

    let duration = n_slots as f64 * params.slot_s;
    let (sec_mean_bits, sec_ci_bits) = mean_and_ci(&sec_bits_samples);
    let (prim_mean_bits, prim_ci_bits) = mean_and_ci(&prim_bits_samples);
    let (_, sys_ci_bits) = mean_and_ci(&sys_bits_samples);
    let (shannon_mean, shannon_ci) = mean_and_ci(&shannon_samples);
    let (prim_rate, prim_rate_ci) = rate_ci(prim_successes, prim_trials);
    let (sec_rate, sec_rate_ci) = rate_ci(sec_successes, sec_trials);

    let secondary_throughput_bps = sec_mean_bits / params.slot_s;
    let primary_throughput_bps = prim_mean_bits / params.slot_s;

    let pair_slots = (n_pairs * n_slots) as f64;
    let jain = {
        let active: &[f64] = &dir_bits;
        let sum: f64 = active.iter().sum();
        let sq: f64 = active.iter().map(|b| b * b).sum();
        if sq == 0.0 {
            0.0
        } else {
            sum * sum / (active.len() as f64 * sq)
        }
    };

    RunMetrics {
        system_throughput_bps: secondary_throughput_bps + primary_throughput_bps,
        secondary_throughput_bps,
        primary_throughput_bps,
        primary_success_rate: prim_rate,
        secondary_success_rate: sec_rate,
        mean_energy_per_node_w: energy_j / duration / (2 * n_pairs) as f64,
        fd_fraction: mode_counts[0] as f64 / pair_slots,
        hd_fraction: (mode_counts[1] + mode_counts[2]) as f64 / pair_slots,
        silence_fraction: mode_counts[3] as f64 / pair_slots,
        jain_fairness: jain,
        secondary_shannon_sum_se: shannon_mean,
        op_fallback_events,
        ci: MetricsCi {
            system_throughput_bps: sys_ci_bits / params.slot_s,
            secondary_throughput_bps: sec_ci_bits / params.slot_s,
            primary_throughput_bps: prim_ci_bits / params.slot_s,
            primary_success_rate: prim_rate_ci,
            secondary_success_rate: sec_rate_ci,
            secondary_shannon_sum_se: shannon_ci,
        },
    }
}

/// Per-direction SINR summaries: conditional on the direction transmitting,
/// and unconditional with silent slots counted as zero.
pub fn direction_stats(records: &[SlotRecord], n_pairs: usize) -> Vec<DirectionStats> {
    let n_slots = records.len();
    let mut stats = Vec::with_capacity(2 * n_pairs);
    for pair in 0..n_pairs {
        for a_to_b in [true, false] {
            let mut transmissions = 0u64;
            let mut successes = 0u64;
            let mut sinr_sum = 0.0;
            for rec in records {
                let dir = if a_to_b {
                    &rec.pairs[pair].dir_ab
                } else {
                    &rec.pairs[pair].dir_ba
                };
                if let Some(out) = dir {
                    transmissions += 1;
                    if out.success {
                        successes += 1;
                    }
                    if out.sinr.is_finite() {
                        sinr_sum += out.sinr;
                    }
                }
            }
            stats.push(DirectionStats {
                pair,
                a_to_b,
                transmissions,
                successes,
                cond_mean_sinr: if transmissions > 0 {
                    sinr_sum / transmissions as f64
                } else {
                    0.0
                },
                uncond_mean_sinr: if n_slots > 0 {
                    sinr_sum / n_slots as f64
                } else {
                    0.0
                },
            });
        }
    }
    stats
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Sweepable scenario axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Access threshold, values in dB.
    AccessThreshold,
    /// Deterministic-policy threshold tau; requires a deterministic policy.
    DeterministicTau,
    /// Residual self-interference chi.
    SiResidual,
    /// Multiplier on all cross-pair gains (explicit-gain scenarios).
    MutualInterference,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "access_threshold" => Ok(Self::AccessThreshold),
            "deterministic_tau" => Ok(Self::DeterministicTau),
            "si_residual" => Ok(Self::SiResidual),
            "mutual_interference" => Ok(Self::MutualInterference),
            other => Err(Error::Config(format!(
                "unknown sweep axis '{other}' (expected access_threshold, deterministic_tau, \
                 si_residual, or mutual_interference)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::AccessThreshold => "access_threshold",
            Self::DeterministicTau => "deterministic_tau",
            Self::SiResidual => "si_residual",
            Self::MutualInterference => "mutual_interference",
        }
    }
}

/// One sweep point: the axis value, the derived seed, and the run metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub seed: u64,
    pub metrics: RunMetrics,
}

fn apply_axis(cfg: &mut ScenarioConfig, axis: SweepAxis, value: f64) -> Result<()> {
    match axis {
        SweepAxis::AccessThreshold => cfg.access_threshold_db = value,
        SweepAxis::DeterministicTau => {
            if cfg.policy.kind != PolicyKindConfig::Deterministic {
                return Err(Error::Config(
                    "axis deterministic_tau requires policy.kind = deterministic".into(),
                ));
            }
            cfg.policy.tau = value;
        }
        SweepAxis::SiResidual => cfg.duplex.chi = value,
        SweepAxis::MutualInterference => {
            if cfg.topology()? != Topology::ExplicitGains {
                return Err(Error::Config(
                    "axis mutual_interference requires explicit cross gains".into(),
                ));
            }
            for cg in &mut cfg.cross_gains {
                cg.gain *= value;
            }
        }
    }
    Ok(())
}

/// Run one independent seeded run per axis value. Seeds derive from the base
/// seed and the point index; runs execute in parallel and share nothing.
pub fn sweep(base: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one axis value".into()));
    }
    values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let mut cfg = base.clone();
            apply_axis(&mut cfg, axis, value).map_err(|e| sweep_context(e, axis, value))?;
            cfg.run.seed = rng::derive_u64(base.run.seed, "sweep", i as u64);
            let output = run(&cfg).map_err(|e| sweep_context(e, axis, value))?;
            Ok(SweepPoint {
                axis_value: value,
                seed: cfg.run.seed,
                metrics: output.metrics,
            })
        })
        .collect()
}

fn sweep_context(e: Error, axis: SweepAxis, value: f64) -> Error {
    let msg = format!("sweep {}={value}: {e}", axis.name());
    if e.is_config() {
        Error::Config(msg)
    } else {
        Error::Runtime(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario_str;

    fn two_pair_scenario(cross: f64, mode: &str) -> ScenarioConfig {
        let text = format!(
            r#"
access_threshold_db = 0.0
access_mode = "{mode}"

[channel]
fading = "none"

[[pairs]]
gain_ab = 0.04
op_a = 0.8
ext_interference_b = 0.0125

[[pairs]]
gain_ab = 0.04
op_a = 0.5
ext_interference_b = 0.02

[[cross_gains]]
from = [0, "a"]
to = [1, "b"]
gain = {cross}

[[cross_gains]]
from = [1, "a"]
to = [0, "b"]
gain = {cross}

[run]
slots = 2000
seed = 77
"#
        );
        parse_scenario_str(&text, &[]).unwrap()
    }

    #[test]
    fn zero_slot_run_is_all_zero() {
        let mut cfg = two_pair_scenario(0.05, "max_power");
        cfg.run.slots = 0;
        let out = run(&cfg).unwrap();
        assert!(out.slots.is_empty());
        assert_eq!(out.metrics.system_throughput_bps, 0.0);
        assert_eq!(out.metrics.jain_fairness, 0.0);
        assert_eq!(out.metrics.fd_fraction, 0.0);
    }

    #[test]
    fn max_power_two_pair_sinrs_constant() {
        let cfg = two_pair_scenario(0.05, "max_power");
        let out = run(&cfg).unwrap();
        let stats = &out.direction_stats;
        // Directions: (pair0 AB, pair0 BA, pair1 AB, pair1 BA).
        let s1 = stats[0].cond_mean_sinr;
        let s2 = stats[2].cond_mean_sinr;
        assert!((s1 - 0.64).abs() < 1e-12, "{s1}");
        assert!((s2 - 0.04 / 0.07).abs() < 1e-12, "{s2}");
        assert_eq!(stats[0].transmissions, 2000);
        assert_eq!(stats[1].transmissions, 0); // simplex: B never transmits
    }

    #[test]
    fn reduced_power_two_pair_sinrs() {
        let cfg = two_pair_scenario(0.05, "reduced_power");
        let out = run(&cfg).unwrap();
        let s1 = out.direction_stats[0].cond_mean_sinr;
        let s2 = out.direction_stats[2].cond_mean_sinr;
        // (0.8*0.04)/(0.5*0.05 + 0.0125) and (0.5*0.04)/(0.8*0.05 + 0.02).
        assert!((s1 - 0.032 / 0.0375).abs() < 1e-12, "{s1}");
        assert!((s2 - 0.02 / 0.06).abs() < 1e-12, "{s2}");
    }

    #[test]
    fn deterministic_run_is_reproducible() {
        let cfg = two_pair_scenario(0.05, "random_access");
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.slots, b.slots);
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn accounting_identities() {
        let cfg = two_pair_scenario(0.15, "random_access");
        let out = run(&cfg).unwrap();
        let m = &out.metrics;
        assert!(
            (m.system_throughput_bps - m.secondary_throughput_bps - m.primary_throughput_bps)
                .abs()
                < 1e-9
        );
        assert!((m.fd_fraction + m.hd_fraction + m.silence_fraction - 1.0).abs() < 1e-12);
        assert!(m.jain_fairness > 0.0 && m.jain_fairness <= 1.0);
    }

    #[test]
    fn all_op_zero_means_silence() {
        let mut cfg = two_pair_scenario(0.05, "random_access");
        cfg.pairs[0].op_a = Some(0.0);
        cfg.pairs[1].op_a = Some(0.0);
        let out = run(&cfg).unwrap();
        assert_eq!(out.metrics.silence_fraction, 1.0);
        assert_eq!(out.metrics.mean_energy_per_node_w, 0.0);
        assert_eq!(out.metrics.secondary_throughput_bps, 0.0);
    }

    #[test]
    fn deterministic_policy_all_fd_when_ops_high() {
        let text = r#"
access_threshold_db = 0.0

[channel]
fading = "none"
noise_power = 1e-9

[policy]
kind = "deterministic"
tau = 0.5

[duplex]
enabled = true
chi = 0.001

[[pairs]]
gain_ab = 0.04
gain_ba = 0.04
op_a = 0.6
op_b = 0.5

[run]
slots = 100
seed = 5
"#;
        let cfg = parse_scenario_str(text, &[]).unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.metrics.fd_fraction, 1.0);
        // Both directions succeed iff g*P / (chi*P + noise) > theta.
        let sinr = 0.04 / (0.001 + 1e-9);
        assert!(sinr > 1.0);
        assert_eq!(out.metrics.secondary_success_rate, 1.0);
    }

    #[test]
    fn isolated_link_threshold_decides_success() {
        let text = r#"
access_threshold_db = 0.0

[channel]
fading = "none"
noise_power = 0.05

[duplex]
enabled = true
chi = 0.0

[[pairs]]
gain_ab = 0.04
gain_ba = 0.04
op_a = 1.0
op_b = 1.0

[run]
slots = 50
seed = 2
"#;
        let cfg = parse_scenario_str(text, &[]).unwrap();
        let out = run(&cfg).unwrap();
        // g*P/noise = 0.04/0.05 = 0.8 < theta=1: every transmission fails,
        // and an all-failure log yields zero throughput.
        assert_eq!(out.metrics.secondary_success_rate, 0.0);
        assert_eq!(out.metrics.secondary_throughput_bps, 0.0);
        assert_eq!(out.metrics.fd_fraction, 1.0);

        let easier = parse_scenario_str(text, &["access_threshold_db=-3.0".into()]).unwrap();
        let out = run(&easier).unwrap();
        // 0.8 > 10^(-0.3) = 0.501: every transmission succeeds.
        assert_eq!(out.metrics.secondary_success_rate, 1.0);
    }

    #[test]
    fn fd_fraction_matches_op_product() {
        let text = r#"
access_threshold_db = 0.0

[channel]
fading = "none"
noise_power = 1e-6

[duplex]
enabled = true

[[pairs]]
gain_ab = 0.04
gain_ba = 0.04
op_a = 0.8
op_b = 0.6

[run]
slots = 100000
seed = 31
"#;
        let cfg = parse_scenario_str(text, &[]).unwrap();
        let out = run(&cfg).unwrap();
        assert!((out.metrics.fd_fraction - 0.48).abs() < 0.005);
    }

    #[test]
    fn latency_budget_reference_vectors() {
        // Remote-server hops: feedback wait, uplink, downlink, apply.
        let mut timing = crate::scenario::TimingConfig {
            sensing_period: 1e-3,
            control_delays: vec![5e-3, 2.5e-3, 2.5e-3, 4e-3],
            ..Default::default()
        };
        assert!((latency_budget(&timing) - 15e-3).abs() < 1e-12);
        // Same-region hops.
        timing.control_delays = vec![5e-3, 1e-3, 1e-3, 2e-3];
        assert!((latency_budget(&timing) - 10e-3).abs() < 1e-12);
        // No control delays: one sensing period remains.
        timing.control_delays.clear();
        assert!((latency_budget(&timing) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn sweep_single_value_matches_run() {
        let cfg = two_pair_scenario(0.05, "random_access");
        let points = sweep(&cfg, SweepAxis::AccessThreshold, &[0.0]).unwrap();
        assert_eq!(points.len(), 1);
        let mut direct = cfg.clone();
        direct.access_threshold_db = 0.0;
        direct.run.seed = rng::derive_u64(cfg.run.seed, "sweep", 0);
        let out = run(&direct).unwrap();
        assert_eq!(points[0].metrics, out.metrics);
    }

    #[test]
    fn sweep_axis_errors_identify_value() {
        let cfg = two_pair_scenario(0.05, "random_access");
        let err = sweep(&cfg, SweepAxis::DeterministicTau, &[0.5]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("deterministic_tau=0.5"), "{msg}");
    }

    #[test]
    fn energy_orderings_across_modes() {
        let base = two_pair_scenario(0.05, "random_access");
        let random = run(&base).unwrap().metrics.mean_energy_per_node_w;
        let reduced = run(&two_pair_scenario(0.05, "reduced_power"))
            .unwrap()
            .metrics
            .mean_energy_per_node_w;
        let max = run(&two_pair_scenario(0.05, "max_power"))
            .unwrap()
            .metrics
            .mean_energy_per_node_w;
        // OPs 0.8 and 0.5: expected per-node energy (0.8+0.5)/2 * P / 2
        // nodes-per-pair... directly: reduced is exactly (0.8+0.5)*P*T per
        // slot over 4 nodes.
        let expected = (0.8 + 0.5) / 4.0;
        assert!((reduced - expected).abs() < 1e-12, "{reduced}");
        assert!((random - reduced).abs() / reduced < 0.02, "{random} vs {reduced}");
        assert!(max > reduced);
    }

    #[test]
    fn auto_policy_resolves_by_density_rule() {
        let base = r#"
access_threshold_db = 0.0

[policy]
kind = "auto"
beta = 0.004

[op]
source = "oracle_uncorrelated"
link_distance = 10.0

[[pairs]]
node_a = [0.0, 0.0]
node_b = [10.0, 0.0]
op_a = 0.9
op_b = 0.9

[run]
slots = 10
seed = 3
"#;
        // Sparse field: density * mean OP falls below beta -> concave.
        let sparse = parse_scenario_str(base, &["field.density=1e-5".into()]).unwrap();
        let out = run(&sparse).unwrap();
        assert_eq!(
            out.resolved.policy.kind,
            crate::scenario::PolicyKindConfig::Concave
        );
        // Dense field: product at or above beta -> linear.
        let dense = parse_scenario_str(base, &["field.density=0.01".into()]).unwrap();
        let out = run(&dense).unwrap();
        assert_eq!(
            out.resolved.policy.kind,
            crate::scenario::PolicyKindConfig::Linear
        );
        // The resolved snapshot no longer says auto.
        assert!(!out.resolved.to_toml().unwrap().contains("auto"));
    }

    #[test]
    fn staleness_bookkeeping() {
        // Table-free check of the delay arithmetic.
        let timing = crate::scenario::TimingConfig {
            slot: 1e-3,
            control_delays: vec![2e-3, 1.2e-3],
            ..Default::default()
        };
        let d = timing.control_delay_total();
        assert!((d - 3.2e-3).abs() < 1e-12);
        let delay_slots = ((d / timing.slot) - 1e-9).ceil().max(0.0) as u64;
        assert_eq!(delay_slots, 4);
    }
}
