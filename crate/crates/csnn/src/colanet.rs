//! Columnar layered classifier head.
//!
//! One column per class; each column holds a set of microcolumns whose L
//! (learning) neurons integrate the pooled feature spikes through plastic
//! synapses. A WTA layer of mutually blocking neurons lets at most one L
//! fire propagate to its column's OUT neuron per quantum. Training combines
//! anti-Hebbian depression (every L fire weakens the synapses that were
//! active so far in the presentation) with a reward spike routed through the
//! REWGATE layer at the end of the presentation window, which
//! over-compensates the depression on the true column's fired L neurons.
//! BIASGATE neurons feed a column extra current when its class keeps failing
//! to fire, and drop back to zero at the first fire.
//!
//! Only what this crate needs is modeled: L neurons follow the usual
//! decay/integrate/fire-and-subtract rule; WTA, REWGATE, BIASGATE and OUT
//! are realized functionally (their edges are still materialized for
//! inspection via [`Colanet::structure`]).

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::snn::{SpikeSchedule, CYCLE_MS, PRESENTATION_MS};

const L_TAU: f64 = 10.0;
const L_THRESHOLD: f64 = 1.0;
/// Reward potentiation per eligible synapse, as a multiple of the
/// anti-Hebbian decrement; 2 makes a single rewarded fire net-positive.
const REWARD_FACTOR: f64 = 2.0;
/// Fresh plastic weights are drawn uniformly from [0, this × weight_max].
const INIT_WEIGHT_FRACTION: f64 = 0.1;

/// Classifier head configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ColanetParams {
    pub num_classes: usize,
    pub microcolumns_per_column: usize,
    /// Pooled feature nodes feeding every microcolumn.
    pub inputs: usize,
    pub learning_rate: f64,
    pub weight_min: f64,
    pub weight_max: f64,
    /// Per-presentation growth of a silent true column's bias current.
    pub bias_increment: f64,
    pub seed: u64,
}

impl ColanetParams {
    /// The reference configuration: 5 classes × 22 microcolumns over 1008
    /// inputs, learning rate 0.0035, weights in [-0.0628, 0.152].
    pub fn reference(num_classes: usize, inputs: usize) -> Self {
        Self {
            num_classes,
            microcolumns_per_column: 22,
            inputs,
            learning_rate: 0.0035,
            weight_min: -0.0628,
            weight_max: 0.152,
            bias_increment: 0.02,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 1 {
            return Err(Error::InvalidParams("num_classes must be >= 1".into()));
        }
        if self.microcolumns_per_column < 1 {
            return Err(Error::InvalidParams(
                "microcolumns_per_column must be >= 1".into(),
            ));
        }
        if self.inputs < 1 {
            return Err(Error::InvalidParams("inputs must be >= 1".into()));
        }
        if !(self.weight_min < 0.0 && 0.0 < self.weight_max) {
            return Err(Error::InvalidParams(format!(
                "weight bounds must straddle zero, got [{}, {}]",
                self.weight_min, self.weight_max
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParams(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.bias_increment >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "bias_increment must be >= 0, got {}",
                self.bias_increment
            )));
        }
        Ok(())
    }
}

/// Structural census of the built head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColanetStructure {
    pub columns: usize,
    pub microcolumns: usize,
    pub l_neurons: usize,
    pub wta_neurons: usize,
    pub rewgate_neurons: usize,
    pub biasgate_neurons: usize,
    pub out_neurons: usize,
    /// Directed cross-microcolumn WTA blocking edges.
    pub wta_inhibition_edges: usize,
    pub plastic_synapses: usize,
}

impl ColanetStructure {
    pub fn total_neurons(&self) -> usize {
        self.l_neurons
            + self.wta_neurons
            + self.rewgate_neurons
            + self.biasgate_neurons
            + self.out_neurons
    }
}

/// Outcome of presenting one image.
#[derive(Debug, Clone)]
pub struct Presentation {
    pub predicted: usize,
    pub out_counts: Vec<u32>,
    /// No OUT neuron fired; prediction fell back to class 0.
    pub no_decision: bool,
    /// The top OUT count was shared; the lowest class index won.
    pub tie: bool,
    /// L neurons that received a reward spike (training only).
    pub reward_spikes: usize,
}

/// Per-image record emitted by [`Colanet::train_epoch`].
#[derive(Debug, Clone)]
pub struct TrainRecord {
    pub image_index: usize,
    pub true_label: usize,
    pub predicted: usize,
    pub reward_spikes: usize,
    pub running_accuracy: f64,
}

/// Epoch summary.
#[derive(Debug, Clone)]
pub struct EpochStats {
    pub records: Vec<TrainRecord>,
}

impl EpochStats {
    pub fn final_accuracy(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.running_accuracy)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("image_index,true_label,predicted,reward_spikes,running_accuracy\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.image_index, r.true_label, r.predicted, r.reward_spikes, r.running_accuracy
            );
        }
        out
    }
}

/// The classifier head: plastic input weights plus training state.
#[derive(Debug, Clone)]
pub struct Colanet {
    params: ColanetParams,
    /// Plastic weights, microcolumn-major: `weights[mc * inputs + node]`.
    weights: Vec<f64>,
    /// Per-column auxiliary stimulation current.
    bias: Vec<f64>,
    /// L membrane potentials; persist across a training stream and drain
    /// through the silence gaps.
    potentials: Vec<f64>,
}

impl Colanet {
    pub fn new(params: ColanetParams) -> Result<Self> {
        params.validate()?;
        let mcs = params.num_classes * params.microcolumns_per_column;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let cap = INIT_WEIGHT_FRACTION * params.weight_max;
        let weights = (0..mcs * params.inputs)
            .map(|_| rng.random_range(0.0..cap))
            .collect();
        Ok(Self {
            bias: vec![0.0; params.num_classes],
            potentials: vec![0.0; mcs],
            params,
            weights,
        })
    }

    pub fn params(&self) -> &ColanetParams {
        &self.params
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn microcolumn_count(&self) -> usize {
        self.params.num_classes * self.params.microcolumns_per_column
    }

    /// Structural counts, including the materializable edge sets.
    pub fn structure(&self) -> ColanetStructure {
        let mcs = self.microcolumn_count();
        ColanetStructure {
            columns: self.params.num_classes,
            microcolumns: mcs,
            l_neurons: mcs,
            wta_neurons: mcs,
            rewgate_neurons: mcs,
            biasgate_neurons: self.params.num_classes,
            out_neurons: self.params.num_classes,
            wta_inhibition_edges: mcs * (mcs - 1),
            plastic_synapses: mcs * self.params.inputs,
        }
    }

    /// The directed WTA blocking pairs (every microcolumn inhibits every
    /// other one).
    pub fn wta_inhibition_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mcs = self.microcolumn_count();
        (0..mcs).flat_map(move |a| (0..mcs).filter(move |&b| b != a).map(move |b| (a, b)))
    }

    fn check_stream(&self, stream: &SpikeSchedule) -> Result<()> {
        if stream.n_nodes != self.params.inputs {
            return Err(Error::ShapeMismatch(format!(
                "stream has {} nodes, head expects {}",
                stream.n_nodes, self.params.inputs
            )));
        }
        if let Some(t) = stream.last_time() {
            if t >= CYCLE_MS {
                return Err(Error::EventOutOfRange {
                    time: t,
                    duration: CYCLE_MS,
                });
            }
        }
        Ok(())
    }

    /// Core 20-quanta presentation loop shared by training and inference.
    ///
    /// `label` switches plasticity on: anti-Hebbian depression on every L
    /// fire inside the presentation window, reward potentiation at its last
    /// quantum, bias bookkeeping at cycle end. Inference runs the same
    /// dynamics against `potentials`/`bias` snapshots supplied by the caller.
    fn run_cycle(
        weights: &mut [f64],
        potentials: &mut [f64],
        bias: &mut [f64],
        params: &ColanetParams,
        stream: &SpikeSchedule,
        label: Option<usize>,
    ) -> Presentation {
        let mcs = params.num_classes * params.microcolumns_per_column;
        let per_col = params.microcolumns_per_column;
        let inputs = params.inputs;
        let lr = params.learning_rate;
        let training = label.is_some();

        let mut active = vec![false; inputs];
        let mut active_list: Vec<usize> = Vec::new();
        let mut fired_presentation = vec![false; mcs];
        let mut fired_cycle = vec![false; mcs];
        let mut out_counts = vec![0u32; params.num_classes];
        let mut reward_spikes = 0usize;

        let mut cursor = 0usize;
        for t in 0..CYCLE_MS {
            // Decay.
            for u in potentials.iter_mut() {
                *u *= 1.0 - 1.0 / L_TAU;
            }
            // Deliver this quantum's pooled spikes to every microcolumn.
            while cursor < stream.events.len() && stream.events[cursor].time_ms == t {
                let node = stream.events[cursor].node;
                cursor += 1;
                if t < PRESENTATION_MS && !active[node] {
                    active[node] = true;
                    active_list.push(node);
                }
                for mc in 0..mcs {
                    potentials[mc] += weights[mc * inputs + node];
                }
            }
            // Auxiliary bias current while the stimulus is on (training
            // scaffolding; inference is pure feedforward).
            if training && t < PRESENTATION_MS {
                for mc in 0..mcs {
                    potentials[mc] += bias[mc / per_col];
                }
            }
            // Fire check; the strongest firing L wins the WTA this quantum.
            let mut winner: Option<(f64, usize)> = None;
            for mc in 0..mcs {
                if potentials[mc] >= L_THRESHOLD {
                    let u_pre = potentials[mc];
                    fired_cycle[mc] = true;
                    if t < PRESENTATION_MS {
                        fired_presentation[mc] = true;
                        if training {
                            for &node in &active_list {
                                let w = &mut weights[mc * inputs + node];
                                *w = (*w - lr).max(params.weight_min);
                            }
                        }
                    }
                    match winner {
                        Some((best, _)) if best >= u_pre => {}
                        _ => winner = Some((u_pre, mc)),
                    }
                    potentials[mc] -= L_THRESHOLD;
                }
            }
            if let Some((_, mc)) = winner {
                out_counts[mc / per_col] += 1;
            }
            // Reward spike through REWGATE at the end of the presentation
            // window: over-compensate the depression on the true column's
            // fired L neurons.
            if let Some(lbl) = label {
                if t == PRESENTATION_MS - 1 {
                    for mc in lbl * per_col..(lbl + 1) * per_col {
                        if fired_presentation[mc] {
                            reward_spikes += 1;
                            for &node in &active_list {
                                let w = &mut weights[mc * inputs + node];
                                *w = (*w + REWARD_FACTOR * lr)
                                    .clamp(params.weight_min, params.weight_max);
                            }
                        }
                    }
                }
            }
        }

        // Bias bookkeeping at cycle end.
        if let Some(lbl) = label {
            for col in 0..params.num_classes {
                let fired = (col * per_col..(col + 1) * per_col).any(|mc| fired_cycle[mc]);
                if fired {
                    bias[col] = 0.0;
                }
            }
            let true_fired =
                (lbl * per_col..(lbl + 1) * per_col).any(|mc| fired_presentation[mc]);
            if !true_fired {
                bias[lbl] += params.bias_increment;
            }
        }

        let max = *out_counts.iter().max().unwrap();
        let predicted = out_counts.iter().position(|&c| c == max).unwrap();
        let no_decision = max == 0;
        let tie = !no_decision && out_counts.iter().filter(|&&c| c == max).count() > 1;
        Presentation {
            predicted: if no_decision { 0 } else { predicted },
            out_counts,
            no_decision,
            tie,
            reward_spikes,
        }
    }

    /// Present one labeled image and apply plasticity.
    pub fn train_step(&mut self, stream: &SpikeSchedule, label: usize) -> Result<Presentation> {
        if label >= self.params.num_classes {
            return Err(Error::LabelOutOfRange {
                label,
                num_classes: self.params.num_classes,
            });
        }
        self.check_stream(stream)?;
        let mut weights = std::mem::take(&mut self.weights);
        let mut potentials = std::mem::take(&mut self.potentials);
        let mut bias = std::mem::take(&mut self.bias);
        let outcome = Self::run_cycle(
            &mut weights,
            &mut potentials,
            &mut bias,
            &self.params,
            stream,
            Some(label),
        );
        self.weights = weights;
        self.potentials = potentials;
        self.bias = bias;
        Ok(outcome)
    }

    /// Classify one image with plasticity frozen. State is local to the
    /// call: weights are read-only and the membrane starts drained, so
    /// classification is independent per image.
    pub fn classify(&self, stream: &SpikeSchedule) -> Result<Presentation> {
        self.check_stream(stream)?;
        let mut weights = self.weights.clone();
        let mut potentials = vec![0.0; self.microcolumn_count()];
        let mut bias = vec![0.0; self.params.num_classes];
        let outcome = Self::run_cycle(
            &mut weights,
            &mut potentials,
            &mut bias,
            &self.params,
            stream,
            None,
        );
        debug_assert_eq!(weights, self.weights);
        Ok(outcome)
    }

    /// One pass over a labeled stream, in order, interleaving presentations
    /// and silence. Returns the per-image training log.
    pub fn train_epoch(&mut self, items: &[(SpikeSchedule, usize)]) -> Result<EpochStats> {
        if items.is_empty() {
            return Err(Error::InvalidParams("empty training stream".into()));
        }
        let mut records = Vec::with_capacity(items.len());
        let mut correct = 0usize;
        for (i, (stream, label)) in items.iter().enumerate() {
            let outcome = self.train_step(stream, *label)?;
            if outcome.predicted == *label {
                correct += 1;
            }
            records.push(TrainRecord {
                image_index: i,
                true_label: *label,
                predicted: outcome.predicted,
                reward_spikes: outcome.reward_spikes,
                running_accuracy: correct as f64 / (i + 1) as f64,
            });
        }
        Ok(EpochStats { records })
    }

    /// Versioned text format: `COLANET 1 <classes> <microcolumns>` then one
    /// line of plastic weights per microcolumn.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "COLANET 1 {} {}",
            self.params.num_classes, self.params.microcolumns_per_column
        );
        for mc in 0..self.microcolumn_count() {
            let row: Vec<String> = self.weights[mc * self.params.inputs..][..self.params.inputs]
                .iter()
                .map(|w| format!("{w}"))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Load a trained head. Plasticity hyperparameters are not persisted;
    /// the returned head carries reference values and is meant for
    /// inference.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, path)
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "COLANET" || fields[1] != "1" {
            return Err(err(1, format!("bad header {header:?}")));
        }
        let num_classes: usize = fields[2]
            .parse()
            .map_err(|e| err(1, format!("classes: {e}")))?;
        let per_col: usize = fields[3]
            .parse()
            .map_err(|e| err(1, format!("microcolumns: {e}")))?;
        let mcs = num_classes * per_col;
        let mut weights: Vec<f64> = Vec::new();
        let mut inputs = None;
        let mut rows = 0usize;
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse).collect();
            let row = row.map_err(|e| err(idx + 1, format!("{e}")))?;
            match inputs {
                None => inputs = Some(row.len()),
                Some(n) if n != row.len() => {
                    return Err(err(
                        idx + 1,
                        format!("row has {} values, expected {n}", row.len()),
                    ))
                }
                _ => {}
            }
            weights.extend(row);
            rows += 1;
        }
        if rows != mcs {
            return Err(err(1, format!("expected {mcs} weight rows, got {rows}")));
        }
        let inputs = inputs.ok_or_else(|| err(1, "no weight rows".into()))?;
        let params = ColanetParams {
            num_classes,
            microcolumns_per_column: per_col,
            inputs,
            ..ColanetParams::reference(num_classes, inputs)
        };
        Ok(Self {
            bias: vec![0.0; num_classes],
            potentials: vec![0.0; mcs],
            params,
            weights,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::SpikeEvent;

    fn tiny_params() -> ColanetParams {
        ColanetParams {
            num_classes: 2,
            microcolumns_per_column: 3,
            inputs: 8,
            learning_rate: 0.01,
            weight_min: -0.5,
            weight_max: 0.5,
            bias_increment: 0.02,
            seed: 11,
        }
    }

    fn stream(inputs: usize, events: Vec<(u32, usize)>) -> SpikeSchedule {
        SpikeSchedule::new(
            inputs,
            events
                .into_iter()
                .map(|(time_ms, node)| SpikeEvent { time_ms, node })
                .collect(),
        )
    }

    /// Repeated spikes on a node set, enough to drive L neurons over
    /// threshold quickly.
    fn dense_stream(inputs: usize, nodes: &[usize]) -> SpikeSchedule {
        let mut ev = Vec::new();
        for t in 0..PRESENTATION_MS {
            for &n in nodes {
                ev.push((t, n));
            }
        }
        stream(inputs, ev)
    }

    #[test]
    fn reference_structure_counts() {
        let head = Colanet::new(ColanetParams::reference(5, 1008)).unwrap();
        let s = head.structure();
        assert_eq!(s.columns, 5);
        assert_eq!(s.microcolumns, 110);
        assert_eq!(s.l_neurons, 110);
        assert_eq!(s.out_neurons, 5);
        assert_eq!(s.wta_inhibition_edges, 110 * 109);
        assert_eq!(s.plastic_synapses, 110 * 1008);
        assert_eq!(head.wta_inhibition_pairs().count(), 110 * 109);
    }

    #[test]
    fn minimal_structure_is_valid() {
        let p = ColanetParams {
            num_classes: 1,
            microcolumns_per_column: 1,
            inputs: 4,
            ..tiny_params()
        };
        let head = Colanet::new(p).unwrap();
        let s = head.structure();
        assert_eq!(s.microcolumns, 1);
        assert_eq!(s.wta_inhibition_edges, 0);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = ColanetParams {
            weight_min: 0.1,
            ..tiny_params()
        };
        assert!(Colanet::new(p).is_err());
        let p = ColanetParams {
            num_classes: 0,
            ..tiny_params()
        };
        assert!(Colanet::new(p).is_err());
    }

    #[test]
    fn initial_weights_sit_in_the_weak_band() {
        let head = Colanet::new(tiny_params()).unwrap();
        let cap = 0.1 * head.params().weight_max;
        assert!(head.weights().iter().all(|&w| (0.0..cap).contains(&w)));
    }

    #[test]
    fn correct_class_single_fire_nets_positive() {
        // Force exactly one L fire during a true-class presentation: the
        // reward doubles the single depression, so contributing synapses
        // end strictly above where they started.
        let mut head = Colanet::new(tiny_params()).unwrap();
        // Make one microcolumn of column 0 fire once: three nodes at 0.35
        // cross threshold on the first delivery (1.05 >= 1) and the residual
        // decays away.
        let inputs = head.params().inputs;
        head.weights.iter_mut().for_each(|w| *w = 0.0);
        for node in 0..3 {
            head.weights[node] = 0.35;
        }
        let before = head.weights.clone();
        let s = stream(inputs, vec![(2, 0), (2, 1), (2, 2)]);
        let outcome = head.train_step(&s, 0).unwrap();
        assert_eq!(outcome.reward_spikes, 1);
        // Depressed once (-lr), rewarded once (+2lr): net +lr.
        let lr = head.params().learning_rate;
        for node in 0..3 {
            assert!((head.weights[node] - (before[node] + lr)).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_class_fire_is_strictly_depressed() {
        let mut head = Colanet::new(tiny_params()).unwrap();
        let inputs = head.params().inputs;
        head.weights.iter_mut().for_each(|w| *w = 0.0);
        for node in 0..3 {
            head.weights[node] = 0.35;
        }
        let before = head.weights.clone();
        let s = stream(inputs, vec![(2, 0), (2, 1), (2, 2)]);
        // Microcolumn 0 belongs to column 0; train with label 1.
        let outcome = head.train_step(&s, 1).unwrap();
        assert_eq!(outcome.reward_spikes, 0);
        for node in 0..3 {
            assert!(head.weights[node] < before[node]);
        }
    }

    #[test]
    fn silent_presentation_grows_true_bias_only() {
        let mut head = Colanet::new(tiny_params()).unwrap();
        // Zero weights: nothing can fire.
        head.weights.iter_mut().for_each(|w| *w = 0.0);
        let before = head.weights.clone();
        let s = stream(head.params().inputs, vec![(0, 3), (4, 5)]);
        let outcome = head.train_step(&s, 1).unwrap();
        assert!(outcome.no_decision);
        assert_eq!(head.bias, vec![0.0, head.params().bias_increment]);
        assert_eq!(head.weights, before);
    }

    #[test]
    fn bias_resets_once_the_column_fires() {
        let mut head = Colanet::new(tiny_params()).unwrap();
        head.weights.iter_mut().for_each(|w| *w = 0.0);
        let inputs = head.params().inputs;
        let s = dense_stream(inputs, &[0, 1, 2, 3]);
        // Bias for class 0 climbs until its L neurons fire off pure bias,
        // then resets to zero.
        let mut saw_positive = false;
        for _ in 0..60 {
            head.train_step(&s, 0).unwrap();
            if head.bias[0] > 0.0 {
                saw_positive = true;
            }
            if saw_positive && head.bias[0] == 0.0 {
                return;
            }
        }
        panic!("bias never reset; bias = {:?}", head.bias);
    }

    #[test]
    fn classify_leaves_weights_bit_identical() {
        let head = Colanet::new(tiny_params()).unwrap();
        let before = head.weights.clone();
        let s = dense_stream(head.params().inputs, &[0, 2, 4]);
        let _ = head.classify(&s).unwrap();
        assert_eq!(head.weights, before);
    }

    #[test]
    fn classify_zero_output_falls_back_flagged() {
        let mut head = Colanet::new(tiny_params()).unwrap();
        head.weights.iter_mut().for_each(|w| *w = 0.0);
        let s = stream(head.params().inputs, vec![(1, 1)]);
        let c = head.classify(&s).unwrap();
        assert_eq!(c.predicted, 0);
        assert!(c.no_decision);
        assert!(!c.tie);
    }

    #[test]
    fn classify_tie_takes_lowest_class_and_flags() {
        let mut head = Colanet::new(tiny_params()).unwrap();
        let inputs = head.params().inputs;
        head.weights.iter_mut().for_each(|w| *w = 0.0);
        // One microcolumn per column, each tuned to its own node, symmetric.
        head.weights[0] = 0.4; // microcolumn 0 (column 0), node 0
        let mc1 = head.params().microcolumns_per_column; // first mc of column 1
        head.weights[mc1 * inputs + 1] = 0.4; // column 1, node 1
        // Each node spikes three quanta in a row, driving its microcolumn
        // over threshold exactly once; the columns end tied at one OUT each.
        let s = stream(inputs, vec![(1, 0), (2, 0), (3, 0), (5, 1), (6, 1), (7, 1)]);
        let c = head.classify(&s).unwrap();
        assert_eq!(c.out_counts.iter().sum::<u32>(), 2);
        assert_eq!(c.out_counts[0], c.out_counts[1]);
        assert_eq!(c.predicted, 0);
        assert!(c.tie);
    }

    #[test]
    fn wta_passes_one_fire_per_quantum() {
        let mut head = Colanet::new(tiny_params()).unwrap();
        let inputs = head.params().inputs;
        head.weights.iter_mut().for_each(|w| *w = 0.0);
        // Two L neurons in different columns fire in the same quantum; the
        // more stimulated one (column 1) takes the OUT count.
        let mc1 = head.params().microcolumns_per_column;
        for node in 0..3 {
            head.weights[node] = 0.4;
            head.weights[mc1 * inputs + node] = 0.45;
        }
        let s = stream(inputs, vec![(3, 0), (3, 1), (3, 2)]);
        let c = head.classify(&s).unwrap();
        assert_eq!(c.out_counts.iter().sum::<u32>(), 1);
        assert_eq!(c.predicted, 1);
    }

    #[test]
    fn train_step_rejects_bad_label_and_shape() {
        let mut head = Colanet::new(tiny_params()).unwrap();
        let s = stream(head.params().inputs, vec![]);
        assert!(head.train_step(&s, 9).is_err());
        let bad = stream(3, vec![]);
        assert!(head.train_step(&bad, 0).is_err());
    }

    #[test]
    fn reward_only_touches_true_columns_fired_neurons() {
        let mut head = Colanet::new(tiny_params()).unwrap();
        let inputs = head.params().inputs;
        head.weights.iter_mut().for_each(|w| *w = 0.0);
        head.weights[0] = 0.4; // col 0, mc 0, node 0: fires
        let mc1 = head.params().microcolumns_per_column;
        head.weights[mc1 * inputs + 1] = 0.4; // col 1, mc1: fires
        let before = head.weights.clone();
        let s = stream(
            inputs,
            vec![(1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (3, 1)],
        );
        head.train_step(&s, 0).unwrap();
        // Column 0's firing microcolumn: depressed then over-compensated.
        assert!(head.weights[0] > before[0]);
        // Column 1's firing microcolumn: depression only.
        assert!(head.weights[mc1 * inputs + 1] < before[mc1 * inputs + 1]);
        // A microcolumn that never fired keeps its weights.
        assert_eq!(head.weights[inputs..2 * inputs], before[inputs..2 * inputs]);
    }

    #[test]
    fn epoch_visits_each_item_once_and_is_deterministic() {
        let p = tiny_params();
        let inputs = p.inputs;
        let items: Vec<(SpikeSchedule, usize)> = (0..10)
            .map(|i| {
                let nodes = if i % 2 == 0 { vec![0, 1] } else { vec![4, 5] };
                (dense_stream(inputs, &nodes), i % 2)
            })
            .collect();
        let mut a = Colanet::new(p.clone()).unwrap();
        let stats_a = a.train_epoch(&items).unwrap();
        assert_eq!(stats_a.records.len(), 10);
        for (i, r) in stats_a.records.iter().enumerate() {
            assert_eq!(r.image_index, i);
        }
        let mut b = Colanet::new(p).unwrap();
        let stats_b = b.train_epoch(&items).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(stats_a.to_csv(), stats_b.to_csv());
    }

    #[test]
    fn weights_stay_clipped_through_an_epoch() {
        let p = ColanetParams {
            learning_rate: 0.2,
            ..tiny_params()
        };
        let inputs = p.inputs;
        let items: Vec<(SpikeSchedule, usize)> = (0..40)
            .map(|i| {
                let nodes: Vec<usize> = (0..inputs).collect();
                (dense_stream(inputs, &nodes), i % 2)
            })
            .collect();
        let mut head = Colanet::new(p.clone()).unwrap();
        head.train_epoch(&items).unwrap();
        assert!(head
            .weights()
            .iter()
            .all(|&w| (p.weight_min..=p.weight_max).contains(&w)));
    }

    #[test]
    fn separable_streams_learn_past_ninety_percent() {
        let p = ColanetParams {
            num_classes: 2,
            microcolumns_per_column: 4,
            inputs: 16,
            learning_rate: 0.01,
            weight_min: -0.2,
            weight_max: 0.3,
            bias_increment: 0.05,
            seed: 5,
        };
        let inputs = p.inputs;
        let items: Vec<(SpikeSchedule, usize)> = (0..120)
            .map(|i| {
                let label = i % 2;
                let nodes: Vec<usize> = if label == 0 {
                    (0..6).collect()
                } else {
                    (8..14).collect()
                };
                (dense_stream(inputs, &nodes), label)
            })
            .collect();
        let mut head = Colanet::new(p).unwrap();
        head.train_epoch(&items).unwrap();
        let mut correct = 0;
        for (s, label) in &items {
            if head.classify(s).unwrap().predicted == *label {
                correct += 1;
            }
        }
        let acc = correct as f64 / items.len() as f64;
        assert!(acc >= 0.9, "post-training accuracy {acc}");
    }

    #[test]
    fn head_file_roundtrip_is_exact() {
        let mut head = Colanet::new(tiny_params()).unwrap();
        let items: Vec<(SpikeSchedule, usize)> = (0..6)
            .map(|i| (dense_stream(8, &[i % 8]), i % 2))
            .collect();
        head.train_epoch(&items).unwrap();
        let text = head.to_text();
        let loaded = Colanet::from_text(&text, Path::new("mem")).unwrap();
        assert_eq!(loaded.weights, head.weights);
        assert_eq!(loaded.params().num_classes, 2);
        assert_eq!(loaded.params().inputs, 8);
    }

    #[test]
    fn head_file_parse_errors_carry_line_numbers() {
        let text = "COLANET 1 2 1\n0.1 0.2\nnot numbers\n";
        match Colanet::from_text(text, Path::new("f")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
