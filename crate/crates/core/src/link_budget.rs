//! Optical link-budget scalability analysis for an XNOR processing core.
//!
//! Detector sensitivity follows from the bit-precision/noise model
//! ([`bit_precision`], [`noise_beta`]); the supported XPE size `N` follows
//! from the laser-power budget ([`required_laser_power`]) with `M = N`.
//!
//! Two modes exist. `Table` uses the published detector-sensitivity column
//! as ground truth; `Analytic` solves the noise model directly. The power
//! budget carries a two-term calibration (additive offset and per-gate excess
//! loss) fitted so that table mode reproduces the published sizes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::units::{db_to_linear, dbm_to_watts, linear_to_db};

pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Detector-sensitivity search bracket in dBm.
pub const PD_SEARCH_BRACKET_DBM: (f64, f64) = (-60.0, 10.0);
/// Bracket width at which the sensitivity search stops.
pub const PD_SEARCH_TOLERANCE_DB: f64 = 0.01;
/// Inclusive search range for the XPE size.
pub const N_SEARCH_RANGE: (usize, usize) = (1, 512);
/// Bit precision required by binarized operands.
pub const BINARY_PRECISION_BITS: f64 = 1.0;

/// Frozen output of [`fit_calibration`] against the published table.
pub const DEFAULT_CALIBRATION_OFFSET_DB: f64 = -10.2267;
pub const DEFAULT_CALIBRATION_PER_GATE_DB: f64 = 0.0026;

/// Where the `-1.76 dB` term of the bit-precision formula sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseGrouping {
    /// `20 log10(snr - 1.76)`, grouping as written.
    #[default]
    Literal,
    /// `20 log10(snr) - 1.76`, the usual effective-number-of-bits form.
    Enob,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    Analytic,
    Table,
}

impl FromStr for LinkMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "table" => Ok(Self::Table),
            other => Err(Error::Usage(format!("unknown link mode `{other}` (expected analytic|table)"))),
        }
    }
}

impl fmt::Display for LinkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Analytic => "analytic",
            Self::Table => "table",
        })
    }
}

/// Link-budget inputs. Defaults are the published device parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudgetParams {
    pub laser_power_dbm: f64,
    pub responsivity: f64,
    pub load_resistance: f64,
    pub dark_current: f64,
    pub temperature: f64,
    pub rin_db_per_hz: f64,
    pub wall_plug_efficiency: f64,
    pub il_smf_db: f64,
    pub il_ec_db: f64,
    pub wg_loss_db_per_mm: f64,
    pub splitter_loss_db: f64,
    pub il_oxg_db: f64,
    pub obl_oxg_db: f64,
    pub il_penalty_db: f64,
    pub d_oxg_mm: f64,
    pub d_element_mm: f64,
    pub calibration_offset_db: f64,
    pub calibration_per_gate_db: f64,
    pub fsr_nm: f64,
    pub channel_gap_nm: f64,
    pub noise_grouping: NoiseGrouping,
}

impl Default for LinkBudgetParams {
    fn default() -> Self {
        Self {
            laser_power_dbm: 5.0,
            responsivity: 1.2,
            load_resistance: 50.0,
            dark_current: 35e-9,
            temperature: 300.0,
            rin_db_per_hz: -140.0,
            wall_plug_efficiency: 0.1,
            il_smf_db: 0.0,
            il_ec_db: 1.6,
            wg_loss_db_per_mm: 0.3,
            splitter_loss_db: 0.01,
            il_oxg_db: 4.0,
            obl_oxg_db: 0.01,
            il_penalty_db: 4.8,
            d_oxg_mm: 0.020,
            d_element_mm: 0.0,
            calibration_offset_db: DEFAULT_CALIBRATION_OFFSET_DB,
            calibration_per_gate_db: DEFAULT_CALIBRATION_PER_GATE_DB,
            fsr_nm: 50.0,
            channel_gap_nm: 0.7,
            noise_grouping: NoiseGrouping::Literal,
        }
    }
}

impl LinkBudgetParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.laser_power_dbm,
            self.rin_db_per_hz,
            self.il_smf_db,
            self.il_ec_db,
            self.wg_loss_db_per_mm,
            self.splitter_loss_db,
            self.il_oxg_db,
            self.obl_oxg_db,
            self.il_penalty_db,
            self.d_oxg_mm,
            self.d_element_mm,
            self.calibration_offset_db,
            self.calibration_per_gate_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(invalid("link-budget losses must be finite"));
        }
        let positive = [
            ("responsivity", self.responsivity),
            ("load_resistance", self.load_resistance),
            ("temperature", self.temperature),
            ("wall_plug_efficiency", self.wall_plug_efficiency),
            ("fsr_nm", self.fsr_nm),
            ("channel_gap_nm", self.channel_gap_nm),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid(format!("{name} must be strictly positive")));
        }
        if !(self.dark_current.is_finite() && self.dark_current >= 0.0) {
            return Err(invalid("dark_current must be non-negative"));
        }
        Ok(())
    }

    /// The same parameters with every loss, penalty and calibration term zeroed
    /// and unit wall-plug efficiency.
    pub fn lossless(&self) -> Self {
        Self {
            wall_plug_efficiency: 1.0,
            il_smf_db: 0.0,
            il_ec_db: 0.0,
            wg_loss_db_per_mm: 0.0,
            splitter_loss_db: 0.0,
            il_oxg_db: 0.0,
            obl_oxg_db: 0.0,
            il_penalty_db: 0.0,
            calibration_offset_db: 0.0,
            calibration_per_gate_db: 0.0,
            ..self.clone()
        }
    }
}

/// One row of the published scalability table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PublishedRow {
    pub datarate_gsps: f64,
    pub pd_sensitivity_dbm: f64,
    pub max_n: usize,
    pub gamma: u64,
    pub alpha: u64,
}

pub const PUBLISHED_TABLE: [PublishedRow; 7] = [
    PublishedRow { datarate_gsps: 3.0, pd_sensitivity_dbm: -24.69, max_n: 66, gamma: 39682, alpha: 601 },
    PublishedRow { datarate_gsps: 5.0, pd_sensitivity_dbm: -23.49, max_n: 53, gamma: 29761, alpha: 561 },
    PublishedRow { datarate_gsps: 10.0, pd_sensitivity_dbm: -21.9, max_n: 39, gamma: 19841, alpha: 508 },
    PublishedRow { datarate_gsps: 20.0, pd_sensitivity_dbm: -20.5, max_n: 29, gamma: 14880, alpha: 513 },
    PublishedRow { datarate_gsps: 30.0, pd_sensitivity_dbm: -19.5, max_n: 24, gamma: 10822, alpha: 450 },
    PublishedRow { datarate_gsps: 40.0, pd_sensitivity_dbm: -18.9, max_n: 21, gamma: 9920, alpha: 472 },
    PublishedRow { datarate_gsps: 50.0, pd_sensitivity_dbm: -18.5, max_n: 19, gamma: 8503, alpha: 447 },
];

pub fn published_row(datarate_gsps: f64) -> Result<&'static PublishedRow> {
    PUBLISHED_TABLE
        .iter()
        .find(|r| (r.datarate_gsps - datarate_gsps).abs() <= 1e-9 * datarate_gsps.abs().max(1.0))
        .ok_or_else(|| Error::Lookup(format!("no published row for {datarate_gsps} GS/s")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalabilityRow {
    pub datarate_gsps: f64,
    pub pd_sensitivity_dbm: f64,
    pub max_n: usize,
}

/// Receiver noise current density in A/sqrt(Hz).
pub fn noise_beta(p_pd_watts: f64, params: &LinkBudgetParams) -> Result<f64> {
    if !(p_pd_watts.is_finite() && p_pd_watts >= 0.0) {
        return Err(invalid(format!("detector power must be non-negative, got {p_pd_watts}")));
    }
    let shot = 2.0 * ELECTRON_CHARGE * (params.responsivity * p_pd_watts + params.dark_current);
    let thermal = 4.0 * BOLTZMANN * params.temperature / params.load_resistance;
    let rin = (params.responsivity * p_pd_watts).powi(2) * db_to_linear(params.rin_db_per_hz);
    Ok((shot + thermal + rin).sqrt())
}

/// Achievable bit precision at detector power `p_pd_watts` and sample rate
/// `datarate_sps`. Under the literal grouping a signal ratio at or below the
/// 1.76 floor resolves no bits and yields negative infinity.
pub fn bit_precision(p_pd_watts: f64, datarate_sps: f64, params: &LinkBudgetParams) -> Result<f64> {
    if !(p_pd_watts > 0.0 && p_pd_watts.is_finite()) {
        return Err(invalid(format!("detector power must be positive, got {p_pd_watts}")));
    }
    if !(datarate_sps > 0.0 && datarate_sps.is_finite()) {
        return Err(invalid(format!("datarate must be positive, got {datarate_sps}")));
    }
    let beta = noise_beta(p_pd_watts, params)?;
    let snr = params.responsivity * p_pd_watts / (beta * (datarate_sps / std::f64::consts::SQRT_2).sqrt());
    let db = match params.noise_grouping {
        NoiseGrouping::Enob => 20.0 * snr.log10() - 1.76,
        NoiseGrouping::Literal if snr <= 1.76 => return Ok(f64::NEG_INFINITY),
        NoiseGrouping::Literal => 20.0 * (snr - 1.76).log10(),
    };
    Ok(db / 6.02)
}

/// Minimal detector power (dBm) reaching `target_bits`, by bisection on dBm.
pub fn solve_pd_sensitivity(datarate_sps: f64, target_bits: f64, params: &LinkBudgetParams) -> Result<f64> {
    if target_bits.is_nan() || target_bits < BINARY_PRECISION_BITS {
        return Err(invalid(format!("target precision must be at least 1 bit, got {target_bits}")));
    }
    let reaches = |dbm: f64| -> Result<bool> { Ok(bit_precision(dbm_to_watts(dbm), datarate_sps, params)? >= target_bits) };
    let (mut lo, mut hi) = PD_SEARCH_BRACKET_DBM;
    if !reaches(hi)? {
        return Err(Error::Solver(format!(
            "{target_bits} bits unreachable at {datarate_sps} S/s below {hi} dBm"
        )));
    }
    if reaches(lo)? {
        return Err(Error::Solver(format!("{target_bits} bits already reached at the {lo} dBm bracket floor")));
    }
    while hi - lo > PD_SEARCH_TOLERANCE_DB {
        let mid = 0.5 * (lo + hi);
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Detector sensitivity in dBm for the chosen mode.
pub fn pd_sensitivity(datarate_gsps: f64, mode: LinkMode, params: &LinkBudgetParams) -> Result<f64> {
    match mode {
        LinkMode::Table => Ok(published_row(datarate_gsps)?.pd_sensitivity_dbm),
        LinkMode::Analytic => solve_pd_sensitivity(datarate_gsps * 1e9, BINARY_PRECISION_BITS, params),
    }
}

fn check_sizes(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(invalid(format!("N and M must be positive, got N={n}, M={m}")));
    }
    Ok(())
}

/// Per-wavelength laser power (dBm) needed for `n` gates per XPE and `m`
/// XPEs sharing the laser bank.
pub fn required_laser_power(n: usize, m: usize, p_pd_dbm: f64, params: &LinkBudgetParams) -> Result<f64> {
    check_sizes(n, m)?;
    let (nf, mf) = (n as f64, m as f64);
    let waveguide = params.wg_loss_db_per_mm * (nf * params.d_oxg_mm + params.d_element_mm);
    Ok(p_pd_dbm
        + params.il_penalty_db
        + waveguide
        + 10.0 * mf.log10()
        + params.il_ec_db
        + params.il_smf_db
        + params.il_oxg_db
        - linear_to_db(params.wall_plug_efficiency)
        + (nf - 1.0) * params.obl_oxg_db
        + mf.log2() * params.splitter_loss_db
        + params.calibration_offset_db
        + nf * params.calibration_per_gate_db)
}

/// The same budget evaluated as a product of linear factors, in watts.
pub fn required_laser_power_linear(n: usize, m: usize, p_pd_watts: f64, params: &LinkBudgetParams) -> Result<f64> {
    check_sizes(n, m)?;
    let (nf, mf) = (n as f64, m as f64);
    let transmission = |loss_db: f64| db_to_linear(-loss_db);
    let waveguide = db_to_linear(params.wg_loss_db_per_mm * (nf * params.d_oxg_mm + params.d_element_mm));
    let head = waveguide * mf
        / (transmission(params.il_smf_db)
            * transmission(params.il_ec_db)
            * params.wall_plug_efficiency
            * transmission(params.il_oxg_db));
    let detector = p_pd_watts / transmission(params.il_penalty_db);
    let tail = 1.0
        / (transmission(params.obl_oxg_db).powf(nf - 1.0) * transmission(params.splitter_loss_db).powf(mf.log2()));
    let calibration = db_to_linear(params.calibration_offset_db + nf * params.calibration_per_gate_db);
    Ok(head * detector * tail * calibration)
}

/// `n` wavelengths at `channel_gap_nm` spacing fit inside one free spectral range.
pub fn check_fsr_constraint(n: usize, fsr_nm: f64, channel_gap_nm: f64) -> bool {
    (n as f64) < fsr_nm / channel_gap_nm
}

/// Largest XPE size `N` (with `M = N`) whose laser budget fits the available
/// per-wavelength power and whose channels fit one FSR.
pub fn solve_max_n(datarate_gsps: f64, params: &LinkBudgetParams, mode: LinkMode) -> Result<ScalabilityRow> {
    params.validate()?;
    let p_pd = pd_sensitivity(datarate_gsps, mode, params)?;
    let fits = |n: usize| -> Result<bool> {
        Ok(check_fsr_constraint(n, params.fsr_nm, params.channel_gap_nm)
            && required_laser_power(n, n, p_pd, params)? <= params.laser_power_dbm)
    };
    let (first, last) = N_SEARCH_RANGE;
    if !fits(first)? {
        return Err(Error::Solver(format!("no feasible XPE size at {datarate_gsps} GS/s")));
    }
    let mut n = first;
    while n < last && fits(n + 1)? {
        n += 1;
    }
    Ok(ScalabilityRow { datarate_gsps, pd_sensitivity_dbm: p_pd, max_n: n })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub offset_db: f64,
    pub per_gate_db: f64,
    /// Width of the feasible offset interval at the chosen per-gate loss.
    pub margin_db: f64,
}

/// Fits the power-budget calibration so that table mode reproduces every
/// published `N`.
///
/// For each candidate per-gate loss on a 1e-4 dB grid over `[0, 0.01]`, each
/// row bounds the offset to `(P - g(N+1), P - g(N)]`; the candidate with the
/// widest common interval wins and the offset is its midpoint.
pub fn fit_calibration(base: &LinkBudgetParams) -> Result<Calibration> {
    let mut best: Option<Calibration> = None;
    for step in 0..=100 {
        let per_gate_db = step as f64 * 1e-4;
        let trial = LinkBudgetParams { calibration_offset_db: 0.0, calibration_per_gate_db: per_gate_db, ..base.clone() };
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for row in &PUBLISHED_TABLE {
            let at = |n: usize| required_laser_power(n, n, row.pd_sensitivity_dbm, &trial);
            lo = lo.max(base.laser_power_dbm - at(row.max_n + 1)?);
            hi = hi.min(base.laser_power_dbm - at(row.max_n)?);
        }
        let margin_db = hi - lo;
        if margin_db > 0.0 && best.is_none_or(|b| margin_db > b.margin_db) {
            best = Some(Calibration { offset_db: 0.5 * (lo + hi), per_gate_db, margin_db });
        }
    }
    best.ok_or_else(|| Error::Solver("no calibration reproduces every published row".into()))
}
