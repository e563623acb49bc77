//! Port a learned kernel bank into a fixed-weight spiking network:
//! an input grid, one convolution map per kernel, and a 2×2 pooling layer,
//! plus the calibration loop that picks the weight scale hitting a target
//! mean pooling rate.

use crate::error::{Error, Result};
use crate::kernel::KernelBank;
use crate::preprocess::{GrayImage, PATCH_SIDE};
use crate::snn::{
    encode_rate, NeuronSpec, Network, Role, Simulation, SpikeEvent, SpikeSchedule, CYCLE_MS,
};

/// Layout of the convolution layer.
#[derive(Debug, Clone)]
pub struct ConvLayerPlan {
    /// Feature maps, one per kernel.
    pub maps: usize,
    /// Input grid side (31).
    pub in_side: usize,
    pub kernel_size: usize,
    pub stride: usize,
    /// Multiplier applied to every kernel weight.
    pub scale: f64,
    pub tau: f64,
    pub threshold: f64,
}

impl ConvLayerPlan {
    /// Plan matching a bank; thresholds stay at 1 and the scale absorbs all
    /// magnitude tuning.
    pub fn from_bank(bank: &KernelBank, scale: f64) -> Self {
        Self {
            maps: bank.kernel_count(),
            in_side: PATCH_SIDE as usize,
            kernel_size: bank.kernel_size(),
            stride: bank.params().stride,
            scale,
            tau: 10.0,
            threshold: 1.0,
        }
    }

    pub fn out_side(&self) -> usize {
        (self.in_side - self.kernel_size) / self.stride + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Average,
    MaxWta,
}

impl std::fmt::Display for PoolMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PoolMode::Average => "average",
            PoolMode::MaxWta => "max_wta",
        })
    }
}

/// Layout of the 2×2 pooling layer.
#[derive(Debug, Clone)]
pub struct PoolLayerPlan {
    pub mode: PoolMode,
    pub tau: f64,
    pub threshold: f64,
    /// Pass-through weight; must sit in (threshold, 2·threshold).
    pub weight: f64,
}

impl PoolLayerPlan {
    pub fn average() -> Self {
        Self {
            mode: PoolMode::Average,
            tau: 1.0,
            threshold: 1.0,
            weight: 1.01,
        }
    }

    pub fn max_wta() -> Self {
        Self {
            mode: PoolMode::MaxWta,
            ..Self::average()
        }
    }

    pub fn with_mode(mode: PoolMode) -> Self {
        match mode {
            PoolMode::Average => Self::average(),
            PoolMode::MaxWta => Self::max_wta(),
        }
    }
}

/// Incremental assembly of neurons and synapses.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    specs: Vec<NeuronSpec>,
    synapses: Vec<crate::snn::Synapse>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_neuron(&mut self, spec: NeuronSpec) -> usize {
        self.specs.push(spec);
        self.specs.len() - 1
    }

    fn add_synapse(&mut self, pre: usize, post: usize, weight: f64) {
        self.synapses.push(crate::snn::Synapse { pre, post, weight });
    }

    pub fn finish(self, wta_period: u32) -> Result<Network> {
        Network::new(self.specs, self.synapses, wta_period)
    }
}

/// Id ranges of one built layer, map-major then row then column.
#[derive(Debug, Clone)]
pub struct LayerIds {
    pub first: usize,
    pub maps: usize,
    pub side: usize,
}

impl LayerIds {
    pub fn count(&self) -> usize {
        self.maps * self.side * self.side
    }

    pub fn id(&self, map: usize, row: usize, col: usize) -> usize {
        self.first + (map * self.side + row) * self.side + col
    }

    pub fn contains(&self, id: usize) -> bool {
        id >= self.first && id < self.first + self.count()
    }

    /// Flat index of a neuron id inside this layer.
    pub fn index_of(&self, id: usize) -> usize {
        id - self.first
    }
}

/// The 31×31 input grid.
pub fn build_input_grid(builder: &mut NetworkBuilder, side: usize) -> LayerIds {
    let first = builder.specs.len();
    for _ in 0..side * side {
        builder.add_neuron(NeuronSpec::input());
    }
    LayerIds {
        first,
        maps: 1,
        side,
    }
}

/// Convolution layer: each map shares one weight matrix, `scale` times the
/// kernel weights.
pub fn build_conv_layer(
    builder: &mut NetworkBuilder,
    inputs: &LayerIds,
    bank: &KernelBank,
    plan: &ConvLayerPlan,
) -> Result<LayerIds> {
    if plan.kernel_size != bank.kernel_size() {
        return Err(Error::ShapeMismatch(format!(
            "plan kernel size {} vs bank {}",
            plan.kernel_size,
            bank.kernel_size()
        )));
    }
    if plan.maps != bank.kernel_count() {
        return Err(Error::ShapeMismatch(format!(
            "plan maps {} vs bank kernels {}",
            plan.maps,
            bank.kernel_count()
        )));
    }
    if plan.in_side != inputs.side {
        return Err(Error::ShapeMismatch(format!(
            "plan input side {} vs grid {}",
            plan.in_side, inputs.side
        )));
    }
    if plan.in_side < plan.kernel_size {
        return Err(Error::ShapeMismatch(format!(
            "input side {} smaller than kernel {}",
            plan.in_side, plan.kernel_size
        )));
    }
    let os = plan.out_side();
    let k = plan.kernel_size;
    let first = builder.specs.len();
    for _ in 0..plan.maps * os * os {
        builder.add_neuron(NeuronSpec {
            threshold: plan.threshold,
            tau: plan.tau,
            role: Role::Conv,
        });
    }
    let layer = LayerIds {
        first,
        maps: plan.maps,
        side: os,
    };
    for a in 0..plan.maps {
        let weights = bank.kernel_weights(a);
        for p in 0..os {
            for q in 0..os {
                let post = layer.id(a, p, q);
                for i in 0..k {
                    for j in 0..k {
                        let pre = inputs.id(0, p * plan.stride + i, q * plan.stride + j);
                        builder.add_synapse(pre, post, plan.scale * weights[i * k + j]);
                    }
                }
            }
        }
    }
    Ok(layer)
}

fn build_pool(
    builder: &mut NetworkBuilder,
    conv: &LayerIds,
    plan: &PoolLayerPlan,
    role: Role,
) -> Result<LayerIds> {
    if conv.side % 2 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "2x2 pooling needs an even layer side, got {}",
            conv.side
        )));
    }
    let ps = conv.side / 2;
    let first = builder.specs.len();
    for _ in 0..conv.maps * ps * ps {
        builder.add_neuron(NeuronSpec {
            threshold: plan.threshold,
            tau: plan.tau,
            role,
        });
    }
    let layer = LayerIds {
        first,
        maps: conv.maps,
        side: ps,
    };
    for a in 0..conv.maps {
        for r in 0..ps {
            for c in 0..ps {
                let post = layer.id(a, r, c);
                for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let pre = conv.id(a, 2 * r + dr, 2 * c + dc);
                    builder.add_synapse(pre, post, plan.weight);
                }
            }
        }
    }
    Ok(layer)
}

/// Average pooling: a pass-through neuron per 2×2 window.
pub fn build_avg_pool(
    builder: &mut NetworkBuilder,
    conv: &LayerIds,
    plan: &PoolLayerPlan,
) -> Result<LayerIds> {
    build_pool(builder, conv, plan, Role::PoolAvg)
}

/// Approximate max pooling: per window, the first-firing child blocks its
/// siblings for the rest of the presentation while its own spikes pass.
pub fn build_max_pool_wta(
    builder: &mut NetworkBuilder,
    conv: &LayerIds,
    plan: &PoolLayerPlan,
) -> Result<LayerIds> {
    build_pool(builder, conv, plan, Role::PoolMaxWta)
}

/// A complete input → conv → pool network with its layer geometry.
#[derive(Debug, Clone)]
pub struct BuiltNetwork {
    pub network: Network,
    pub inputs: LayerIds,
    pub conv: LayerIds,
    pub pool: LayerIds,
    pub scale: f64,
}

impl BuiltNetwork {
    /// Number of flattened pooling outputs.
    pub fn output_len(&self) -> usize {
        self.pool.count()
    }
}

/// Assemble the full feature extractor for a bank at the given scale.
pub fn build_network(bank: &KernelBank, scale: f64, pool_plan: &PoolLayerPlan) -> Result<BuiltNetwork> {
    let conv_plan = ConvLayerPlan::from_bank(bank, scale);
    let mut builder = NetworkBuilder::new();
    let inputs = build_input_grid(&mut builder, conv_plan.in_side);
    let conv = build_conv_layer(&mut builder, &inputs, bank, &conv_plan)?;
    let pool = match pool_plan.mode {
        PoolMode::Average => build_avg_pool(&mut builder, &conv, pool_plan)?,
        PoolMode::MaxWta => build_max_pool_wta(&mut builder, &conv, pool_plan)?,
    };
    Ok(BuiltNetwork {
        network: builder.finish(CYCLE_MS)?,
        inputs,
        conv,
        pool,
        scale,
    })
}

/// Pooling-layer spike trains per presented patch, re-based to each image's
/// own 20 ms cycle. Node ids are flat pooling indices (map-major).
pub fn transform_stream(net: &BuiltNetwork, patches: &[GrayImage]) -> Result<Vec<SpikeSchedule>> {
    let mut out: Vec<SpikeSchedule> = (0..patches.len())
        .map(|_| SpikeSchedule {
            n_nodes: net.output_len(),
            events: Vec::new(),
        })
        .collect();
    let mut sim = Simulation::new(&net.network);
    let mut scheduled: Vec<usize> = Vec::new();
    for (img_idx, patch) in patches.iter().enumerate() {
        let sched = encode_rate(patch)?;
        let mut cursor = 0usize;
        for t in 0..CYCLE_MS {
            scheduled.clear();
            while cursor < sched.events.len() && sched.events[cursor].time_ms == t {
                scheduled.push(sched.events[cursor].node + net.inputs.first);
                cursor += 1;
            }
            for id in sim.step(&scheduled) {
                if net.pool.contains(id) {
                    out[img_idx].events.push(SpikeEvent {
                        time_ms: t,
                        node: net.pool.index_of(id),
                    });
                }
            }
        }
    }
    for s in &mut out {
        s.events.sort();
    }
    Ok(out)
}

/// Mean pooling firing rate in Hz over a sample: total pool spikes divided
/// by (pool neurons × images × 20 ms).
pub fn mean_pool_rate_hz(net: &BuiltNetwork, sample: &[GrayImage]) -> Result<f64> {
    let streams = transform_stream(net, sample)?;
    let total: usize = streams.iter().map(|s| s.events.len()).sum();
    let seconds = sample.len() as f64 * CYCLE_MS as f64 / 1000.0;
    Ok(total as f64 / (net.output_len() as f64 * seconds))
}

/// One calibration probe.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationProbe {
    pub scale: f64,
    pub rate_hz: f64,
}

/// Result of a successful calibration.
#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub scale: f64,
    pub achieved_hz: f64,
    pub history: Vec<CalibrationProbe>,
    pub evaluations: usize,
}

impl CalibrationOutcome {
    /// Text report: bracket history, final scale, achieved rate.
    pub fn report(&self, target_hz: f64) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "calibration target: {target_hz} Hz");
        let _ = writeln!(out, "evaluations: {}", self.evaluations);
        for p in &self.history {
            let _ = writeln!(out, "probe scale={} rate={} Hz", p.scale, p.rate_hz);
        }
        let _ = writeln!(out, "final scale: {}", self.scale);
        let _ = writeln!(out, "achieved rate: {} Hz", self.achieved_hz);
        out
    }
}

const SCALE_MIN: f64 = 9.5367431640625e-7; // 2^-20
const SCALE_MAX: f64 = 1048576.0; // 2^20
const MAX_BISECTIONS: usize = 39;

/// Find the weight scale whose mean pooling rate is within `tol` (as a
/// fraction) of `target_hz` on the sample.
///
/// The rate is monotone and near-linear in the scale, so the search brackets
/// the target by doubling or halving from 1 and then bisects. Fails when
/// even the bracket edge (2^±20) cannot reach the target.
pub fn calibrate(
    bank: &KernelBank,
    pool_plan: &PoolLayerPlan,
    sample: &[GrayImage],
    target_hz: f64,
    tol: f64,
) -> Result<CalibrationOutcome> {
    if sample.is_empty() {
        return Err(Error::InvalidParams("calibration sample is empty".into()));
    }
    if !(target_hz > 0.0) {
        return Err(Error::InvalidParams(format!(
            "target rate must be positive, got {target_hz}"
        )));
    }
    let mut history: Vec<CalibrationProbe> = Vec::new();
    let measure = |scale: f64, history: &mut Vec<CalibrationProbe>| -> Result<f64> {
        let net = build_network(bank, scale, pool_plan)?;
        let rate = mean_pool_rate_hz(&net, sample)?;
        history.push(CalibrationProbe {
            scale,
            rate_hz: rate,
        });
        Ok(rate)
    };
    let within =
        |rate: f64| -> bool { (rate - target_hz).abs() <= tol * target_hz };
    let done = |scale: f64, rate: f64, history: Vec<CalibrationProbe>| CalibrationOutcome {
        scale,
        achieved_hz: rate,
        evaluations: history.len(),
        history,
    };

    let mut scale = 1.0;
    let mut rate = measure(scale, &mut history)?;
    if within(rate) {
        return Ok(done(scale, rate, history));
    }

    // Exponential bracketing away from scale 1.
    let (mut lo, mut lo_rate, mut hi, mut hi_rate);
    if rate < target_hz {
        lo = scale;
        lo_rate = rate;
        loop {
            scale *= 2.0;
            if scale > SCALE_MAX {
                return Err(Error::CalibrationUnreachable {
                    target_hz,
                    achieved_hz: lo_rate,
                    scale: lo,
                });
            }
            rate = measure(scale, &mut history)?;
            if within(rate) {
                return Ok(done(scale, rate, history));
            }
            if rate >= target_hz {
                hi = scale;
                hi_rate = rate;
                break;
            }
            lo = scale;
            lo_rate = rate;
        }
    } else {
        hi = scale;
        hi_rate = rate;
        loop {
            scale /= 2.0;
            if scale < SCALE_MIN {
                return Err(Error::CalibrationUnreachable {
                    target_hz,
                    achieved_hz: hi_rate,
                    scale: hi,
                });
            }
            rate = measure(scale, &mut history)?;
            if within(rate) {
                return Ok(done(scale, rate, history));
            }
            if rate <= target_hz {
                lo = scale;
                lo_rate = rate;
                break;
            }
            hi = scale;
            hi_rate = rate;
        }
    }

    // Bisection inside [lo, hi].
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let rate = measure(mid, &mut history)?;
        if within(rate) {
            return Ok(done(mid, rate, history));
        }
        if rate < target_hz {
            lo = mid;
            lo_rate = rate;
        } else {
            hi = mid;
            hi_rate = rate;
        }
    }
    // Ran out of bisections: report the closer edge.
    let (scale, rate) = if (lo_rate - target_hz).abs() <= (hi_rate - target_hz).abs() {
        (lo, lo_rate)
    } else {
        (hi, hi_rate)
    };
    Err(Error::CalibrationUnreachable {
        target_hz,
        achieved_hz: rate,
        scale,
    })
}
