//! Four-layer sparse wiring (sensory -> inter -> command -> motor) applied as
//! binary masks over liquid-cell weights.
//!
//! Hidden neurons are ordered `[inter | command | motor]`; sensory neurons are
//! the cell inputs. Masks are stored target-major (`rows = target`), matching
//! the weight matrices they multiply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor2};

use super::liquid::{CfcParams, LtcParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NcpSizes {
    pub sensory: usize,
    pub inter: usize,
    pub command: usize,
    pub motor: usize,
}

impl NcpSizes {
    pub fn hidden(&self) -> usize {
        self.inter + self.command + self.motor
    }
}

/// Connection budget per stage.
///
/// * `sensory`: distinct inter targets per sensory neuron
/// * `inter`: distinct command targets per inter neuron
/// * `motor_fanin`: distinct command sources per motor neuron
/// * `recurrent`: number of command -> command synapses
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NcpFanouts {
    pub sensory: usize,
    pub inter: usize,
    pub motor_fanin: usize,
    pub recurrent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcpWiring {
    pub sizes: NcpSizes,
    pub fanouts: NcpFanouts,
    /// inter x sensory
    pub sensory_to_inter: Tensor2,
    /// command x inter
    pub inter_to_command: Tensor2,
    /// motor x command
    pub command_to_motor: Tensor2,
    /// command x command
    pub command_recurrent: Tensor2,
    pub stream_id: u64,
}

/// Dense masks over one liquid layer's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LiquidMasks {
    /// hidden x hidden
    pub recurrent: Tensor2,
    /// hidden x input
    pub input: Tensor2,
    /// output x hidden; `None` leaves the readout dense.
    pub output: Option<Tensor2>,
}

fn connect_fanout(rng: &mut Rng, sources: usize, targets: usize, fanout: usize) -> Tensor2 {
    let mut mask = Tensor2::zeros(targets, sources);
    for s in 0..sources {
        for t in rng.sample_distinct(targets, fanout) {
            mask.set(t, s, 1.0);
        }
    }
    // Every target needs at least one inbound synapse.
    for t in 0..targets {
        if mask.row(t).iter().all(|&v| v == 0.0) {
            let s = rng.below(sources);
            mask.set(t, s, 1.0);
        }
    }
    mask
}

pub fn build_ncp_wiring(rng: &mut Rng, sizes: NcpSizes, fanouts: NcpFanouts) -> Result<NcpWiring> {
    let NcpSizes {
        sensory,
        inter,
        command,
        motor,
    } = sizes;
    if sensory == 0 || inter == 0 || command == 0 || motor == 0 {
        return Err(Error::InvalidArgument(format!("NCP layer sizes must be >= 1, got {sizes:?}")));
    }
    if fanouts.sensory == 0 || fanouts.inter == 0 || fanouts.motor_fanin == 0 {
        return Err(Error::InvalidArgument(format!("NCP fanouts must be >= 1, got {fanouts:?}")));
    }
    let too_big = |what: &str, k: usize, limit: usize| {
        Error::InvalidArgument(format!("{what} {k} exceeds target layer size {limit}"))
    };
    if fanouts.sensory > inter {
        return Err(too_big("sensory fanout", fanouts.sensory, inter));
    }
    if fanouts.inter > command {
        return Err(too_big("inter fanout", fanouts.inter, command));
    }
    if fanouts.motor_fanin > command {
        return Err(too_big("motor fan-in", fanouts.motor_fanin, command));
    }
    if fanouts.recurrent > command * command {
        return Err(too_big("recurrent synapse count", fanouts.recurrent, command * command));
    }

    let sensory_to_inter = connect_fanout(rng, sensory, inter, fanouts.sensory);
    let inter_to_command = connect_fanout(rng, inter, command, fanouts.inter);

    let mut command_to_motor = Tensor2::zeros(motor, command);
    for m in 0..motor {
        for c in rng.sample_distinct(command, fanouts.motor_fanin) {
            command_to_motor.set(m, c, 1.0);
        }
    }

    let mut command_recurrent = Tensor2::zeros(command, command);
    for pair in rng.sample_distinct(command * command, fanouts.recurrent) {
        command_recurrent.set(pair / command, pair % command, 1.0);
    }

    Ok(NcpWiring {
        sizes,
        fanouts,
        sensory_to_inter,
        inter_to_command,
        command_to_motor,
        command_recurrent,
        stream_id: rng.stream_id(),
    })
}

fn count(m: &Tensor2) -> usize {
    m.data.iter().filter(|&&v| v != 0.0).count()
}

impl NcpWiring {
    pub fn hidden(&self) -> usize {
        self.sizes.hidden()
    }

    /// Neurons excluding the sensory layer.
    pub fn neuron_count(&self) -> usize {
        self.hidden()
    }

    pub fn synapse_count(&self) -> usize {
        count(&self.sensory_to_inter)
            + count(&self.inter_to_command)
            + count(&self.command_to_motor)
            + count(&self.command_recurrent)
    }

    fn command_offset(&self) -> usize {
        self.sizes.inter
    }

    fn motor_offset(&self) -> usize {
        self.sizes.inter + self.sizes.command
    }

    /// Hidden-to-hidden mask (`target x source`).
    pub fn recurrent_mask(&self) -> Tensor2 {
        let n = self.hidden();
        let (co, mo) = (self.command_offset(), self.motor_offset());
        let mut mask = Tensor2::zeros(n, n);
        for c in 0..self.sizes.command {
            for i in 0..self.sizes.inter {
                mask.set(co + c, i, self.inter_to_command.get(c, i));
            }
            for c2 in 0..self.sizes.command {
                mask.set(co + c, co + c2, self.command_recurrent.get(c, c2));
            }
        }
        for m in 0..self.sizes.motor {
            for c in 0..self.sizes.command {
                mask.set(mo + m, co + c, self.command_to_motor.get(m, c));
            }
        }
        mask
    }

    /// Input-to-hidden mask (`hidden x sensory`): only inter neurons see inputs.
    pub fn input_mask(&self) -> Tensor2 {
        let mut mask = Tensor2::zeros(self.hidden(), self.sizes.sensory);
        for i in 0..self.sizes.inter {
            for s in 0..self.sizes.sensory {
                mask.set(i, s, self.sensory_to_inter.get(i, s));
            }
        }
        mask
    }

    /// Readout mask (`outputs x hidden`): outputs read the motor layer only.
    pub fn output_mask(&self, outputs: usize) -> Tensor2 {
        let mut mask = Tensor2::zeros(outputs, self.hidden());
        for o in 0..outputs {
            for m in 0..self.sizes.motor {
                mask.set(o, self.motor_offset() + m, 1.0);
            }
        }
        mask
    }

    pub fn masks(&self, outputs: usize) -> LiquidMasks {
        LiquidMasks {
            recurrent: self.recurrent_mask(),
            input: self.input_mask(),
            output: Some(self.output_mask(outputs)),
        }
    }

    /// Every non-sensory neuron is reachable from some sensory neuron.
    pub fn all_reachable(&self) -> bool {
        let n = self.hidden();
        let rec = self.recurrent_mask();
        let inp = self.input_mask();
        let mut reached: Vec<bool> = (0..n).map(|t| inp.row(t).iter().any(|&v| v != 0.0)).collect();
        let mut frontier: Vec<usize> = (0..n).filter(|&t| reached[t]).collect();
        while let Some(src) = frontier.pop() {
            for t in 0..n {
                if !reached[t] && rec.get(t, src) != 0.0 {
                    reached[t] = true;
                    frontier.push(t);
                }
            }
        }
        reached.into_iter().all(|r| r)
    }
}

/// Masked copy of a liquid cell's parameters.
pub trait ApplyWiring: Sized {
    fn apply_masks(&self, masks: &LiquidMasks) -> Result<Self>;

    fn apply_wiring(&self, wiring: &NcpWiring) -> Result<Self>
    where
        Self: HasOutputs,
    {
        self.apply_masks(&wiring.masks(self.outputs()))
    }
}

pub trait HasOutputs {
    fn outputs(&self) -> usize;
}

impl HasOutputs for LtcParams {
    fn outputs(&self) -> usize {
        self.w_out.rows
    }
}

impl HasOutputs for CfcParams {
    fn outputs(&self) -> usize {
        self.w_out.rows
    }
}

fn hcat(a: &Tensor2, b: &Tensor2) -> Tensor2 {
    let mut out = Tensor2::zeros(a.rows, a.cols + b.cols);
    for r in 0..a.rows {
        out.data[r * out.cols..r * out.cols + a.cols].copy_from_slice(a.row(r));
        out.data[r * out.cols + a.cols..(r + 1) * out.cols].copy_from_slice(b.row(r));
    }
    out
}

/// Mask over `[state, input]` columns, as used by CfC heads.
pub fn state_input_mask(masks: &LiquidMasks) -> Tensor2 {
    hcat(&masks.recurrent, &masks.input)
}

impl ApplyWiring for LtcParams {
    fn apply_masks(&self, masks: &LiquidMasks) -> Result<Self> {
        let mut p = self.clone();
        p.w_gx = self.w_gx.hadamard(&masks.recurrent)?;
        p.w_gi = self.w_gi.hadamard(&masks.input)?;
        if let Some(out) = &masks.output {
            p.w_out = self.w_out.hadamard(out)?;
        }
        Ok(p)
    }
}

impl ApplyWiring for CfcParams {
    fn apply_masks(&self, masks: &LiquidMasks) -> Result<Self> {
        if masks.recurrent.rows != masks.input.rows {
            return Err(Error::shape("cfc masks", masks.recurrent.rows, masks.input.rows));
        }
        let joint = state_input_mask(masks);
        let mut p = self.clone();
        p.w_f = self.w_f.hadamard(&joint)?;
        p.w_g = self.w_g.hadamard(&joint)?;
        p.w_h = self.w_h.hadamard(&joint)?;
        if let Some(out) = &masks.output {
            p.w_out = self.w_out.hadamard(out)?;
        }
        Ok(p)
    }
}
