//! Discrete-time (1 ms quantum) integrate-and-fire simulation with
//! threshold subtraction and current-based delta synapses.
//!
//! Per quantum a neuron's potential decays by (1 - 1/tau), receives the
//! summed weights of arriving spikes, and fires at most once when it crosses
//! threshold — the threshold is subtracted, not reset, so excess charge
//! carries over. Spikes from internal neurons propagate with a one-quantum
//! delay; scheduled input spikes are delivered in their own quantum.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::preprocess::{GrayImage, PATCH_SIDE};

/// Stimulus window per image, in quanta.
pub const PRESENTATION_MS: u32 = 10;
/// Silent gap after each image, draining residual potentials.
pub const SILENCE_MS: u32 = 10;
/// Full image cycle.
pub const CYCLE_MS: u32 = PRESENTATION_MS + SILENCE_MS;

pub type NeuronId = usize;

/// What a neuron is for; the simulator special-cases only `PoolMaxWta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Spike source driven by the schedule; no dynamics.
    Input,
    /// Convolution-layer integrator.
    Conv,
    /// Pass-through pooling neuron.
    PoolAvg,
    /// First-spike winner-take-all pooling neuron: the first child to
    /// deliver a spike in a presentation owns the window; siblings are
    /// blocked until the next cycle.
    PoolMaxWta,
}

impl Role {
    fn tag(self) -> &'static str {
        match self {
            Role::Input => "input",
            Role::Conv => "conv",
            Role::PoolAvg => "pool_avg",
            Role::PoolMaxWta => "pool_max_wta",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NeuronSpec {
    pub threshold: f64,
    /// Membrane decay constant in quanta; tau = 1 means full decay per step.
    pub tau: f64,
    pub role: Role,
}

impl NeuronSpec {
    pub fn input() -> Self {
        Self {
            threshold: 1.0,
            tau: 1.0,
            role: Role::Input,
        }
    }
}

/// Instantaneous neuron state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeuronState {
    pub potential: f64,
    pub fired_this_step: bool,
}

/// Advance one neuron by one quantum: decay, integrate, fire-and-subtract
/// (at most once).
#[inline]
pub fn step_neuron(state: NeuronState, spec: &NeuronSpec, input_sum: f64) -> (NeuronState, bool) {
    let mut u = state.potential * (1.0 - 1.0 / spec.tau) + input_sum;
    let fired = u >= spec.threshold;
    if fired {
        u -= spec.threshold;
    }
    (
        NeuronState {
            potential: u,
            fired_this_step: fired,
        },
        fired,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synapse {
    pub pre: NeuronId,
    pub post: NeuronId,
    pub weight: f64,
}

/// One timestamped input spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SpikeEvent {
    pub time_ms: u32,
    pub node: NeuronId,
}

/// Input spikes over one or more presentation cycles, sorted by time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpikeSchedule {
    pub n_nodes: usize,
    pub events: Vec<SpikeEvent>,
}

impl SpikeSchedule {
    pub fn new(n_nodes: usize, mut events: Vec<SpikeEvent>) -> Self {
        events.sort();
        Self { n_nodes, events }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_time(&self) -> Option<u32> {
        self.events.last().map(|e| e.time_ms)
    }
}

/// Rate-code a 31×31 patch: node (r, c) emits round(p·10/255) spikes,
/// evenly spaced over the 10 ms presentation window; the silence window
/// stays empty.
pub fn encode_rate(patch: &GrayImage) -> Result<SpikeSchedule> {
    if !patch.is_patch() {
        return Err(Error::InvalidImage(format!(
            "rate encoding expects a {PATCH_SIDE}x{PATCH_SIDE} patch, got {}x{}",
            patch.width(),
            patch.height()
        )));
    }
    let mut events = Vec::new();
    for (node, &p) in patch.pixels().iter().enumerate() {
        let n = (p as f64 * PRESENTATION_MS as f64 / 255.0).round() as u32;
        for m in 0..n {
            events.push(SpikeEvent {
                time_ms: m * PRESENTATION_MS / n,
                node,
            });
        }
    }
    Ok(SpikeSchedule::new(
        (PATCH_SIDE * PATCH_SIDE) as usize,
        events,
    ))
}

/// A fixed network of neurons and synapses.
#[derive(Debug, Clone)]
pub struct Network {
    specs: Vec<NeuronSpec>,
    synapses: Vec<Synapse>,
    /// Outgoing synapse indices per neuron.
    outgoing: Vec<Vec<u32>>,
    /// WTA ownership resets at multiples of this period (quanta).
    wta_period: u32,
}

impl Network {
    /// Assemble and validate: every synapse endpoint must exist.
    pub fn new(specs: Vec<NeuronSpec>, synapses: Vec<Synapse>, wta_period: u32) -> Result<Self> {
        let n = specs.len();
        let mut outgoing = vec![Vec::new(); n];
        for (i, syn) in synapses.iter().enumerate() {
            if syn.pre >= n {
                return Err(Error::DanglingNeuron(syn.pre));
            }
            if syn.post >= n {
                return Err(Error::DanglingNeuron(syn.post));
            }
            outgoing[syn.pre].push(i as u32);
        }
        Ok(Self {
            specs,
            synapses,
            outgoing,
            wta_period: if wta_period == 0 { CYCLE_MS } else { wta_period },
        })
    }

    pub fn neuron_count(&self) -> usize {
        self.specs.len()
    }

    pub fn synapse_count(&self) -> usize {
        self.synapses.len()
    }

    pub fn spec(&self, id: NeuronId) -> &NeuronSpec {
        &self.specs[id]
    }

    pub fn synapses(&self) -> &[Synapse] {
        &self.synapses
    }

    /// Versioned text dump of the whole structure, for inspection.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "SNNNET 1 {} {} {}",
            self.specs.len(),
            self.synapses.len(),
            self.wta_period
        );
        for (i, s) in self.specs.iter().enumerate() {
            let _ = writeln!(out, "N {} {} {} {}", i, s.role.tag(), s.threshold, s.tau);
        }
        for s in &self.synapses {
            let _ = writeln!(out, "S {} {} {}", s.pre, s.post, s.weight);
        }
        out
    }
}

/// Stepped simulation state over a [`Network`].
///
/// Within one quantum all neurons read the same delivery buffer (scheduled
/// inputs for this quantum plus internal fires from the previous one), so
/// update order cannot matter.
pub struct Simulation<'a> {
    net: &'a Network,
    potentials: Vec<f64>,
    fired_prev: Vec<NeuronId>,
    input_sum: Vec<f64>,
    /// Pending arrivals per WTA neuron this quantum: (child, weight).
    wta_arrivals: Vec<Vec<(NeuronId, f64)>>,
    wta_owner: Vec<Option<NeuronId>>,
    now: u32,
}

impl<'a> Simulation<'a> {
    pub fn new(net: &'a Network) -> Self {
        let n = net.neuron_count();
        Self {
            net,
            potentials: vec![0.0; n],
            fired_prev: Vec::new(),
            input_sum: vec![0.0; n],
            wta_arrivals: vec![Vec::new(); n],
            wta_owner: vec![None; n],
            now: 0,
        }
    }

    pub fn time(&self) -> u32 {
        self.now
    }

    pub fn potential(&self, id: NeuronId) -> f64 {
        self.potentials[id]
    }

    /// Advance one quantum. `scheduled` lists the input nodes spiking now;
    /// returns every neuron that fires this quantum (inputs included).
    ///
    /// Every spike — scheduled or internal — is delivered through its
    /// outgoing synapses in the following quantum.
    pub fn step(&mut self, scheduled: &[NeuronId]) -> Vec<NeuronId> {
        let net = self.net;
        if self.now % net.wta_period == 0 {
            for owner in &mut self.wta_owner {
                *owner = None;
            }
        }
        for v in &mut self.input_sum {
            *v = 0.0;
        }

        // Deliver last quantum's fires.
        for idx in 0..self.fired_prev.len() {
            let pre = self.fired_prev[idx];
            for &si in &net.outgoing[pre] {
                let syn = &net.synapses[si as usize];
                if net.specs[syn.post].role == Role::PoolMaxWta {
                    self.wta_arrivals[syn.post].push((pre, syn.weight));
                } else {
                    self.input_sum[syn.post] += syn.weight;
                }
            }
        }

        // WTA gating: the first child to arrive in a window owns it; only
        // the owner's spikes pass for the rest of the period. Simultaneous
        // first arrivals resolve to the lowest child id.
        for post in 0..net.neuron_count() {
            if self.wta_arrivals[post].is_empty() {
                continue;
            }
            if self.wta_owner[post].is_none() {
                let winner = self.wta_arrivals[post]
                    .iter()
                    .map(|&(pre, _)| pre)
                    .min()
                    .unwrap();
                self.wta_owner[post] = Some(winner);
            }
            let owner = self.wta_owner[post].unwrap();
            for i in 0..self.wta_arrivals[post].len() {
                let (pre, weight) = self.wta_arrivals[post][i];
                if pre == owner {
                    self.input_sum[post] += weight;
                }
            }
            self.wta_arrivals[post].clear();
        }

        let mut fired_all: Vec<NeuronId> = scheduled.to_vec();
        for id in 0..net.neuron_count() {
            let spec = &net.specs[id];
            if spec.role == Role::Input {
                continue;
            }
            let (state, fired) = step_neuron(
                NeuronState {
                    potential: self.potentials[id],
                    fired_this_step: false,
                },
                spec,
                self.input_sum[id],
            );
            self.potentials[id] = state.potential;
            if fired {
                fired_all.push(id);
            }
        }
        fired_all.sort_unstable();
        self.fired_prev.clear();
        self.fired_prev.extend_from_slice(&fired_all);
        self.now += 1;
        fired_all
    }
}

/// Per-neuron spike times recorded over a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrace {
    pub per_neuron: Vec<Vec<u32>>,
}

impl SpikeTrace {
    pub fn spike_count(&self, id: NeuronId) -> usize {
        self.per_neuron[id].len()
    }

    pub fn total_spikes(&self) -> usize {
        self.per_neuron.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.per_neuron.iter().all(Vec::is_empty)
    }

    /// All events as (time, neuron), time-major — the `time_ms,neuron_id`
    /// CSV export order.
    pub fn events(&self) -> Vec<(u32, NeuronId)> {
        let mut ev: Vec<(u32, NeuronId)> = self
            .per_neuron
            .iter()
            .enumerate()
            .flat_map(|(id, ts)| ts.iter().map(move |&t| (t, id)))
            .collect();
        ev.sort_unstable();
        ev
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_ms,neuron_id\n");
        for (t, id) in self.events() {
            let _ = writeln!(out, "{t},{id}");
        }
        out
    }
}

/// Run the network for `duration_ms` quanta against an input schedule.
pub fn simulate(net: &Network, schedule: &SpikeSchedule, duration_ms: u32) -> Result<SpikeTrace> {
    if let Some(t) = schedule.last_time() {
        if t >= duration_ms {
            return Err(Error::EventOutOfRange {
                time: t,
                duration: duration_ms,
            });
        }
    }
    let mut sim = Simulation::new(net);
    let mut per_neuron = vec![Vec::new(); net.neuron_count()];
    let mut cursor = 0usize;
    let mut scheduled = Vec::new();
    for t in 0..duration_ms {
        scheduled.clear();
        while cursor < schedule.events.len() && schedule.events[cursor].time_ms == t {
            scheduled.push(schedule.events[cursor].node);
            cursor += 1;
        }
        for id in sim.step(&scheduled) {
            per_neuron[id].push(t);
        }
    }
    Ok(SpikeTrace { per_neuron })
}
