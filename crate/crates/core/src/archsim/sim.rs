use std::collections::BTreeMap;

use super::config::AcceleratorConfig;
use super::engine::{ns_to_fs, seconds_to_fs, Engine, EventKind, Resource, SimEvent, SimTime, FS_PER_SECOND};
use super::metrics::Metrics;
use crate::error::{invalid, Error, Result};
use crate::mapping::{ceil_log2, ConvWorkload, Policy};
use crate::pca::{swap_integrator, PcaState};
use crate::units::dbm_to_watts;
use crate::workloads::LayerTask;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub record_trace: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub metrics: Metrics,
    pub trace: Option<Vec<SimEvent>>,
}

/// Reductions at each level of a pairwise tree over `leaves` psums.
pub fn tree_level_ops(leaves: u64) -> Vec<u64> {
    let mut ops = Vec::new();
    let mut n = leaves;
    while n > 1 {
        ops.push(n / 2);
        n = n.div_ceil(2);
    }
    ops
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Tuned,
    FetchRead(u64),
    FetchRouted(u64),
    FetchDelivered(u64),
    PassDone(u64, u64),
    ReadoutDone(u64, u64),
    StallDone(u64, u64),
    PsumRead(u64, u64),
    Reduced(u64, u64),
    Activated(u64),
    Written(u64),
    Pooled(u64),
}

/// Per-layer latencies in femtoseconds.
struct Timing {
    tau: SimTime,
    edram: SimTime,
    router: SimTime,
    bus: SimTime,
    reduction: SimTime,
    activation: SimTime,
    pooling: SimTime,
    io: SimTime,
    eo_tuning: SimTime,
    to_tuning: SimTime,
    discharge: SimTime,
}

impl Timing {
    fn new(c: &AcceleratorConfig) -> Self {
        let tau = ns_to_fs(1.0 / c.accelerator.datarate_gsps);
        let lat = |u: &super::config::UnitParams| ns_to_fs(u.latency_ns) + u.latency_cycles * tau;
        let p = &c.peripherals;
        Self {
            tau,
            edram: lat(&p.edram),
            router: lat(&p.router),
            bus: lat(&p.bus),
            reduction: lat(&p.reduction_network),
            activation: lat(&p.activation_unit),
            pooling: lat(&p.pooling_unit),
            io: lat(&p.io_interface),
            eo_tuning: lat(&p.eo_tuning),
            to_tuning: lat(&p.to_tuning),
            discharge: seconds_to_fs(c.pca.discharge_latency_s),
        }
    }
}

struct XnorLayer {
    layer: u32,
    policy: Policy,
    pairs: u64,
    x: u64,
    slices: u64,
    segment: u64,
    parts: u64,
    batches: u64,
    fetched: Vec<bool>,
    computing: bool,
    next_compute: u64,
    tuned: bool,
}

impl XnorLayer {
    fn batch_pairs(&self, b: u64) -> u64 {
        self.x.min(self.pairs - b * self.x)
    }

    fn passes(&self, b: u64) -> u64 {
        match self.policy {
            Policy::Oxbnn => self.slices,
            Policy::Baseline => (self.batch_pairs(b) * self.slices).div_ceil(self.x),
        }
    }
}

#[derive(Default)]
struct Counters {
    passes: u64,
    reduction_ops: u64,
    reduction_events: u64,
    psum_writes: u64,
    readouts: u64,
    stalls: u64,
    stall_time: SimTime,
    tunings: u64,
    xnor_ops: u64,
}

struct Sim<'a> {
    config: &'a AcceleratorConfig,
    t: Timing,
    engine: Engine<Step>,
    pca: PcaState,
    counters: Counters,
}

impl<'a> Sim<'a> {
    fn new(config: &'a AcceleratorConfig, options: SimOptions) -> Self {
        Self {
            config,
            t: Timing::new(config),
            engine: Engine::new(options.record_trace),
            pca: PcaState::default(),
            counters: Counters::default(),
        }
    }

    fn event(resource: Resource, kind: EventKind, duration: SimTime, layer: u32, batch: u64, index: u64, count: u64) -> SimEvent {
        SimEvent { start: 0, duration, resource, kind, layer, batch: batch as u32, index: index as u32, count }
    }

    /// Runs queued work to completion and moves the clock to the horizon.
    fn drain(&mut self, mut handle: impl FnMut(&mut Self, Step)) {
        while let Some(step) = self.engine.next() {
            handle(self, step);
        }
        let h = self.engine.horizon();
        self.engine.advance_to(h);
    }

    fn single(&mut self, resource: Resource, kind: EventKind, duration: SimTime, layer: u32) {
        self.engine.request(Self::event(resource, kind, duration, layer, 0, 0, 1), None);
        self.drain(|_, _| {});
    }

    fn run_xnor(&mut self, w: &ConvWorkload, layer: u32) -> Result<()> {
        w.validate()?;
        let config = self.config;
        let a = &config.accelerator;
        let cap = config.pca_capacity()?;
        let pairs = w.pairs() as u64;
        let x = a.xpe_count as u64;
        let slices = w.s().div_ceil(a.xpe_size) as u64;
        let (segment, parts) = match a.policy {
            Policy::Oxbnn => {
                let seg = slices.min(cap.alpha.max(1));
                (seg, slices.div_ceil(seg))
            }
            Policy::Baseline => (1, slices),
        };
        let batches = pairs.div_ceil(x);
        self.counters.xnor_ops += pairs * w.s() as u64;
        let mut st = XnorLayer {
            layer,
            policy: a.policy,
            pairs,
            x,
            slices,
            segment,
            parts,
            batches,
            fetched: vec![false; batches as usize],
            computing: false,
            next_compute: 0,
            tuned: false,
        };
        let eo = self.t.eo_tuning;
        self.engine.request(Self::event(Resource::EoTuning, EventKind::Tuning, eo, layer, 0, 0, 1), Some(Step::Tuned));
        self.counters.tunings += 1;
        for b in 0..batches.min(2) {
            self.fetch(&st, b);
        }
        self.drain(|sim, step| sim.on_xnor(&mut st, step));
        if st.next_compute != batches || st.computing {
            return Err(Error::Solver(format!("layer {layer} stopped after {} of {batches} batches", st.next_compute)));
        }
        Ok(())
    }

    fn fetch(&mut self, st: &XnorLayer, b: u64) {
        let e = Self::event(Resource::Edram, EventKind::MemoryRead, self.t.edram, st.layer, b, 0, st.batch_pairs(b));
        self.engine.request(e, Some(Step::FetchRead(b)));
    }

    fn pass(&mut self, st: &XnorLayer, b: u64, i: u64) {
        let count = match st.policy {
            Policy::Oxbnn => st.batch_pairs(b),
            Policy::Baseline => (st.batch_pairs(b) * st.slices - i * st.x).min(st.x),
        };
        let e = Self::event(Resource::XpeArray, EventKind::Pass, self.t.tau, st.layer, b, i, count);
        self.counters.passes += 1;
        self.engine.request(e, Some(Step::PassDone(b, i)));
    }

    fn psum_write(&mut self, st: &XnorLayer, b: u64, i: u64) {
        let e = Self::event(Resource::Edram, EventKind::MemoryWrite, self.t.edram, st.layer, b, i, st.batch_pairs(b));
        self.counters.psum_writes += 1;
        self.engine.request(e, None);
    }

    fn try_compute(&mut self, st: &mut XnorLayer) {
        let b = st.next_compute;
        if st.tuned && !st.computing && b < st.batches && st.fetched[b as usize] {
            st.computing = true;
            st.next_compute += 1;
            self.pass(st, b, 0);
        }
    }

    fn after_pass(&mut self, st: &mut XnorLayer, b: u64, i: u64) {
        if i + 1 < st.passes(b) {
            self.pass(st, b, i + 1);
            return;
        }
        st.computing = false;
        if b + 2 < st.batches {
            self.fetch(st, b + 2);
        }
        if st.parts > 1 {
            self.psum_read(st, b, 0);
        } else {
            self.activate(st, b);
        }
        self.try_compute(st);
    }

    fn psum_read(&mut self, st: &XnorLayer, b: u64, j: u64) {
        let e = Self::event(Resource::Edram, EventKind::MemoryRead, self.t.edram, st.layer, b, j, st.batch_pairs(b));
        self.engine.request(e, Some(Step::PsumRead(b, j)));
    }

    fn reduce(&mut self, st: &XnorLayer, b: u64, level: u64) {
        let ops = tree_level_ops(st.parts)[level as usize] * st.batch_pairs(b);
        let e = Self::event(Resource::Reduction, EventKind::Reduction, self.t.reduction, st.layer, b, level, ops);
        self.counters.reduction_ops += ops;
        self.counters.reduction_events += 1;
        self.engine.request(e, Some(Step::Reduced(b, level)));
    }

    fn activate(&mut self, st: &XnorLayer, b: u64) {
        let e = Self::event(Resource::Activation, EventKind::Activation, self.t.activation, st.layer, b, 0, st.batch_pairs(b));
        self.engine.request(e, Some(Step::Activated(b)));
    }

    fn on_xnor(&mut self, st: &mut XnorLayer, step: Step) {
        match step {
            Step::Tuned => {
                st.tuned = true;
                self.try_compute(st);
            }
            Step::FetchRead(b) => {
                let e = Self::event(Resource::Router, EventKind::Transfer, self.t.router, st.layer, b, 0, st.batch_pairs(b));
                self.engine.request(e, Some(Step::FetchRouted(b)));
            }
            Step::FetchRouted(b) => {
                let e = Self::event(Resource::Bus, EventKind::Transfer, self.t.bus, st.layer, b, 1, st.batch_pairs(b));
                self.engine.request(e, Some(Step::FetchDelivered(b)));
            }
            Step::FetchDelivered(b) => {
                st.fetched[b as usize] = true;
                self.try_compute(st);
            }
            Step::PassDone(b, i) => match st.policy {
                Policy::Baseline => {
                    if st.parts > 1 {
                        self.psum_write(st, b, i);
                    }
                    self.after_pass(st, b, i);
                }
                Policy::Oxbnn => {
                    if (i + 1) % st.segment == 0 || i + 1 == st.passes(b) {
                        let e = Self::event(Resource::Pca, EventKind::Readout, 0, st.layer, b, i, st.batch_pairs(b));
                        self.counters.readouts += 1;
                        self.engine.request(e, Some(Step::ReadoutDone(b, i)));
                    } else {
                        self.after_pass(st, b, i);
                    }
                }
            },
            Step::ReadoutDone(b, i) => {
                if st.parts > 1 {
                    self.psum_write(st, b, i);
                }
                let swap = swap_integrator(&self.pca, self.engine.now(), self.t.discharge);
                self.pca = swap.state;
                if swap.stall > 0 {
                    let e = Self::event(Resource::Pca, EventKind::Stall, swap.stall, st.layer, b, i, 1);
                    self.counters.stalls += 1;
                    self.counters.stall_time += swap.stall;
                    self.engine.request(e, Some(Step::StallDone(b, i)));
                } else {
                    self.after_pass(st, b, i);
                }
            }
            Step::StallDone(b, i) => self.after_pass(st, b, i),
            Step::PsumRead(b, j) => {
                if j + 1 < st.parts {
                    self.psum_read(st, b, j + 1);
                } else {
                    self.reduce(st, b, 0);
                }
            }
            Step::Reduced(b, level) => {
                if level + 1 < ceil_log2(st.parts) {
                    self.reduce(st, b, level + 1);
                } else {
                    self.activate(st, b);
                }
            }
            Step::Activated(b) => {
                let e = Self::event(Resource::Edram, EventKind::MemoryWrite, self.t.edram, st.layer, b, 0, st.batch_pairs(b));
                self.engine.request(e, Some(Step::Written(b)));
            }
            Step::Written(_) | Step::Pooled(_) => {}
        }
    }

    fn run_pool(&mut self, output_elements: u64, layer: u32) {
        let x = self.config.accelerator.xpe_count as u64;
        let events = output_elements.div_ceil(x);
        if events == 0 {
            return;
        }
        let dur = self.t.pooling;
        let ev = move |j: u64| Self::event(Resource::Pooling, EventKind::Pooling, dur, layer, 0, j, x.min(output_elements - j * x));
        self.engine.request(ev(0), Some(Step::Pooled(0)));
        self.drain(|sim, step| {
            if let Step::Pooled(j) = step {
                if j + 1 < events {
                    sim.engine.request(ev(j + 1), Some(Step::Pooled(j + 1)));
                }
            }
        });
    }

    fn finish(mut self, start: SimTime) -> Result<SimOutput> {
        let end = self.engine.horizon();
        if end <= start {
            return Err(Error::Solver("simulation produced no work".into()));
        }
        let latency_s = (end - start) as f64 / FS_PER_SECOND;
        let energy = self.energy(latency_s)?;
        let m = Metrics::from_energy(self.config.name(), latency_s, energy, self.engine.event_count())
            .with_counts(
                self.counters.passes,
                self.counters.reduction_ops,
                self.counters.reduction_events,
                self.counters.psum_writes,
                self.counters.readouts,
                self.counters.stalls,
                self.counters.stall_time as f64 / FS_PER_SECOND,
                self.engine.overlaps(),
            );
        Ok(SimOutput { metrics: m, trace: self.engine.take_trace() })
    }

    fn energy(&self, latency_s: f64) -> Result<BTreeMap<String, f64>> {
        let c = self.config;
        let a = &c.accelerator;
        let p = &c.peripherals;
        let w = |mw: f64| mw * 1e-3;
        let tiles = c.tile_count() as f64;
        let xpcs = c.xpc_count() as f64;
        let laser_w = xpcs * a.xpe_size as f64 * dbm_to_watts(c.laser_power_dbm()?);
        let rings = (a.xpe_count * a.xpe_size) as f64;
        let eo_s = self.t.eo_tuning as f64 / FS_PER_SECOND;
        let reduction = match a.policy {
            Policy::Baseline => w(p.reduction_network.power_mw) * xpcs * latency_s,
            Policy::Oxbnn => {
                w(p.reduction_network.power_mw) * xpcs * self.engine.busy_time(Resource::Reduction) as f64 / FS_PER_SECOND
            }
        };
        let mut e = BTreeMap::new();
        e.insert("oxg".to_string(), a.oxg_energy_per_op_j * self.counters.xnor_ops as f64);
        e.insert("laser".to_string(), laser_w * latency_s);
        e.insert("edram".to_string(), w(p.edram.power_mw) * tiles * latency_s);
        e.insert("bus".to_string(), w(p.bus.power_mw) * tiles * latency_s);
        e.insert("router".to_string(), w(p.router.power_mw) * tiles * latency_s);
        e.insert("pooling_unit".to_string(), w(p.pooling_unit.power_mw) * tiles * latency_s);
        e.insert("activation_unit".to_string(), w(p.activation_unit.power_mw) * xpcs * latency_s);
        e.insert("reduction_network".to_string(), reduction);
        e.insert("io_interface".to_string(), w(p.io_interface.power_mw) * latency_s);
        e.insert("eo_tuning".to_string(), w(p.eo_tuning.power_mw) * rings * eo_s * self.counters.tunings as f64);
        Ok(e)
    }
}

/// One XNOR layer on its own: no IO and no model-load tuning.
pub fn simulate_layer(workload: &ConvWorkload, config: &AcceleratorConfig, options: SimOptions) -> Result<SimOutput> {
    config.validate()?;
    let mut sim = Sim::new(config, options);
    sim.run_xnor(workload, 0)?;
    sim.finish(0)
}

/// A whole network for one inference. Thermo-optic tuning is a model-load
/// event before the inference window and is excluded from its latency and
/// energy.
pub fn simulate_network(tasks: &[LayerTask], config: &AcceleratorConfig, options: SimOptions) -> Result<SimOutput> {
    if tasks.is_empty() {
        return Err(invalid("network has no layers"));
    }
    config.validate()?;
    let mut sim = Sim::new(config, options);
    let to = sim.t.to_tuning;
    sim.single(Resource::ToTuning, EventKind::Tuning, to, 0);
    let start = sim.engine.now();
    let io = sim.t.io;
    sim.single(Resource::Io, EventKind::Io, io, 0);
    for (i, task) in tasks.iter().enumerate() {
        let layer = i as u32;
        match *task {
            LayerTask::Xnor(w) => sim.run_xnor(&w, layer)?,
            LayerTask::Pool { output_elements } => sim.run_pool(output_elements, layer),
        }
    }
    sim.single(Resource::Io, EventKind::Io, io, tasks.len() as u32);
    sim.finish(start)
}

pub fn simulate_convs(layers: &[ConvWorkload], config: &AcceleratorConfig, options: SimOptions) -> Result<SimOutput> {
    let tasks: Vec<LayerTask> = layers.iter().copied().map(LayerTask::Xnor).collect();
    simulate_network(&tasks, config, options)
}
