//! Photo-charge accumulator: a capacitor integrates one charge quantum per
//! detected optical '1', a comparator thresholds the result at `V_REF`, and a
//! redundant integrator takes over while the other discharges.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::link_budget::{published_row, LinkMode, PUBLISHED_TABLE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaParams {
    pub capacitance: f64,
    pub tir_gain: f64,
    pub dynamic_range_volts: f64,
    pub v_ref_volts: f64,
    pub responsivity: f64,
    pub pulse_width_s: f64,
    /// Output-voltage increment per detected '1', calibrated per datarate.
    pub charge_per_one: f64,
    pub discharge_latency_s: f64,
}

impl Default for PcaParams {
    fn default() -> Self {
        Self::for_datarate(50.0).expect("50 GS/s is a published row")
    }
}

impl PcaParams {
    /// Defaults at `datarate_gsps`, with `charge_per_one` set so that the
    /// analytic capacity reproduces the published (or interpolated) γ, and a
    /// discharge latency of one pulse.
    pub fn for_datarate(datarate_gsps: f64) -> Result<Self> {
        let gamma = interpolated_gamma(datarate_gsps)?;
        let dynamic_range_volts = 5.0;
        let pulse_width_s = 1e-9 / datarate_gsps;
        Ok(Self {
            capacitance: 10e-12,
            tir_gain: 50.0,
            dynamic_range_volts,
            v_ref_volts: dynamic_range_volts / 2.0,
            responsivity: 1.2,
            pulse_width_s,
            charge_per_one: calibrated_charge_per_one(dynamic_range_volts, gamma),
            discharge_latency_s: pulse_width_s,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("capacitance", self.capacitance),
            ("tir_gain", self.tir_gain),
            ("dynamic_range_volts", self.dynamic_range_volts),
            ("v_ref_volts", self.v_ref_volts),
            ("responsivity", self.responsivity),
            ("pulse_width_s", self.pulse_width_s),
            ("charge_per_one", self.charge_per_one),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid(format!("{name} must be strictly positive")));
        }
        if !(self.discharge_latency_s.is_finite() && self.discharge_latency_s >= 0.0) {
            return Err(invalid("discharge_latency_s must be non-negative"));
        }
        if self.v_ref_volts > self.dynamic_range_volts {
            return Err(invalid("v_ref_volts exceeds the dynamic range"));
        }
        Ok(())
    }

    /// Per-'1' output step predicted by the electrical chain at detector
    /// power `p_pd_watts`, for sensitivity studies.
    pub fn electrical_charge_per_one(&self, p_pd_watts: f64) -> Result<f64> {
        let i = photocurrent(p_pd_watts, self.responsivity)?;
        Ok(charge_step(i, self.pulse_width_s, self.capacitance)? * self.tir_gain)
    }
}

/// Step that makes `floor(dynamic_range / step) == gamma`.
pub fn calibrated_charge_per_one(dynamic_range_volts: f64, gamma: u64) -> f64 {
    dynamic_range_volts / (gamma as f64 + 0.5)
}

/// Published γ at a table datarate; elsewhere log-log interpolated between
/// neighbouring rows (end segments extrapolate).
pub fn interpolated_gamma(datarate_gsps: f64) -> Result<u64> {
    if !(datarate_gsps.is_finite() && datarate_gsps > 0.0) {
        return Err(invalid(format!("datarate must be positive, got {datarate_gsps}")));
    }
    if let Ok(row) = published_row(datarate_gsps) {
        return Ok(row.gamma);
    }
    let rows = &PUBLISHED_TABLE;
    let i = rows.iter().position(|r| r.datarate_gsps > datarate_gsps).unwrap_or(rows.len() - 1).clamp(1, rows.len() - 1);
    let (a, b) = (&rows[i - 1], &rows[i]);
    let t = (datarate_gsps.ln() - a.datarate_gsps.ln()) / (b.datarate_gsps.ln() - a.datarate_gsps.ln());
    let ln_gamma = (a.gamma as f64).ln() + t * ((b.gamma as f64).ln() - (a.gamma as f64).ln());
    Ok((ln_gamma.exp().floor() as u64).max(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcaCapacity {
    pub gamma: u64,
    pub alpha: u64,
    pub n: u64,
}

impl PcaCapacity {
    pub fn new(gamma: u64, n: u64) -> Result<Self> {
        if n == 0 || gamma == 0 {
            return Err(invalid(format!("capacity needs positive gamma and n, got gamma={gamma}, n={n}")));
        }
        Ok(Self { gamma, alpha: gamma / n, n })
    }
}

pub fn photocurrent(optical_power_watts: f64, responsivity: f64) -> Result<f64> {
    if !(optical_power_watts.is_finite() && optical_power_watts >= 0.0) {
        return Err(invalid(format!("optical power must be non-negative, got {optical_power_watts}")));
    }
    Ok(responsivity * optical_power_watts)
}

/// Capacitor voltage step `i * dt / C`.
pub fn charge_step(current_amperes: f64, pulse_width_s: f64, capacitance_farads: f64) -> Result<f64> {
    if !(current_amperes >= 0.0 && pulse_width_s > 0.0 && capacitance_farads > 0.0) {
        return Err(invalid("charge_step needs non-negative current and positive pulse width and capacitance"));
    }
    Ok(current_amperes * pulse_width_s / capacitance_farads)
}

pub fn capacity(params: &PcaParams, n: usize, datarate_gsps: f64, mode: LinkMode) -> Result<PcaCapacity> {
    if n == 0 {
        return Err(invalid("XPE size must be at least 1"));
    }
    let gamma = match mode {
        LinkMode::Table => published_row(datarate_gsps)?.gamma,
        LinkMode::Analytic => {
            let step = calibrated_charge_per_one(params.dynamic_range_volts, interpolated_gamma(datarate_gsps)?);
            (params.dynamic_range_volts / step).floor() as u64
        }
    };
    PcaCapacity::new(gamma, n as u64)
}

/// Capacity implied directly by `params.charge_per_one`.
pub fn capacity_from_params(params: &PcaParams, n: usize) -> Result<PcaCapacity> {
    params.validate()?;
    PcaCapacity::new((params.dynamic_range_volts / params.charge_per_one).floor() as u64, n as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrator {
    One,
    Two,
}

impl Integrator {
    pub fn other(self) -> Self {
        match self {
            Self::One => Self::Two,
            Self::Two => Self::One,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaState {
    pub accumulated_ones: u64,
    pub output_volts: f64,
    pub active_integrator: Integrator,
    pub saturated: bool,
    /// Time at which the standby integrator has finished discharging, in the
    /// caller's time unit.
    pub standby_ready_at: u64,
    /// Ones counted by earlier accumulation phases, now read out.
    pub retired_ones: u64,
}

impl Default for PcaState {
    fn default() -> Self {
        Self {
            accumulated_ones: 0,
            output_volts: 0.0,
            active_integrator: Integrator::One,
            saturated: false,
            standby_ready_at: 0,
            retired_ones: 0,
        }
    }
}

impl PcaState {
    pub fn total_ones(&self) -> u64 {
        self.retired_ones + self.accumulated_ones
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccumulateOutcome {
    pub state: PcaState,
    pub accepted: u64,
    /// Ones offered past the capacity and not counted.
    pub overflow: u64,
    pub end_of_accumulation: bool,
}

pub fn accumulate(
    state: &PcaState,
    ones_in_pass: u64,
    capacity: &PcaCapacity,
    params: &PcaParams,
) -> Result<AccumulateOutcome> {
    if state.saturated {
        return Err(Error::Usage("accumulating into a saturated integrator without a swap".into()));
    }
    if ones_in_pass > capacity.n {
        return Err(invalid(format!("{ones_in_pass} ones exceed the XPE size {}", capacity.n)));
    }
    let room = capacity.gamma.saturating_sub(state.accumulated_ones);
    let accepted = ones_in_pass.min(room);
    let accumulated_ones = state.accumulated_ones + accepted;
    let saturated = accumulated_ones >= capacity.gamma;
    let next = PcaState {
        accumulated_ones,
        output_volts: accumulated_ones as f64 * params.charge_per_one,
        saturated,
        ..state.clone()
    };
    Ok(AccumulateOutcome { state: next, accepted, overflow: ones_in_pass - accepted, end_of_accumulation: saturated })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwapOutcome {
    pub state: PcaState,
    /// Wait for the standby integrator to finish discharging.
    pub stall: u64,
}

/// Hands accumulation to the standby integrator at time `now`. The retiring
/// integrator starts discharging once the swap completes.
pub fn swap_integrator(state: &PcaState, now: u64, discharge_latency: u64) -> SwapOutcome {
    let stall = state.standby_ready_at.saturating_sub(now);
    let swapped_at = now + stall;
    SwapOutcome {
        state: PcaState {
            accumulated_ones: 0,
            output_volts: 0.0,
            active_integrator: state.active_integrator.other(),
            saturated: false,
            standby_ready_at: swapped_at + discharge_latency,
            retired_ones: state.total_ones(),
        },
        stall,
    }
}

/// Comparator output; a voltage exactly at `V_REF` reads as 0.
pub fn readout(state: &PcaState, params: &PcaParams) -> u8 {
    u8::from(state.output_volts > params.v_ref_volts)
}
