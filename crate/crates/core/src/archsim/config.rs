use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link_budget::{pd_sensitivity, required_laser_power, LinkBudgetParams, LinkMode};
use crate::mapping::Policy;
use crate::pca::{capacity, PcaCapacity, PcaParams};

/// Power, latency and area of one peripheral instance. Latency is
/// `latency_ns` plus `latency_cycles` PASS periods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitParams {
    pub power_mw: f64,
    pub latency_ns: f64,
    pub latency_cycles: u64,
    pub area_mm2: f64,
}

impl Default for UnitParams {
    fn default() -> Self {
        Self { power_mw: 0.0, latency_ns: 0.0, latency_cycles: 0, area_mm2: 0.0 }
    }
}

const fn unit(power_mw: f64, latency_ns: f64, latency_cycles: u64, area_mm2: f64) -> UnitParams {
    UnitParams { power_mw, latency_ns, latency_cycles, area_mm2 }
}

/// Peripheral table. Tuning powers are per ring per FSR of shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeripheralParams {
    pub reduction_network: UnitParams,
    pub activation_unit: UnitParams,
    pub io_interface: UnitParams,
    pub pooling_unit: UnitParams,
    pub edram: UnitParams,
    pub bus: UnitParams,
    pub router: UnitParams,
    pub eo_tuning: UnitParams,
    pub to_tuning: UnitParams,
}

impl Default for PeripheralParams {
    fn default() -> Self {
        Self {
            reduction_network: unit(0.050, 3.125, 0, 3e-5),
            activation_unit: unit(0.52, 0.78, 0, 6e-5),
            io_interface: unit(140.18, 0.78, 0, 2.44e-2),
            pooling_unit: unit(0.4, 3.125, 0, 2.4e-4),
            edram: unit(41.1, 1.56, 0, 1.66e-1),
            bus: unit(7.0, 0.0, 5, 9e-3),
            router: unit(42.0, 0.0, 2, 1.5e-2),
            eo_tuning: unit(0.080, 20.0, 0, 0.0),
            to_tuning: unit(275.0, 4000.0, 0, 0.0),
        }
    }
}

impl PeripheralParams {
    pub fn units(&self) -> [(&'static str, &UnitParams); 9] {
        [
            ("reduction_network", &self.reduction_network),
            ("activation_unit", &self.activation_unit),
            ("io_interface", &self.io_interface),
            ("pooling_unit", &self.pooling_unit),
            ("edram", &self.edram),
            ("bus", &self.bus),
            ("router", &self.router),
            ("eo_tuning", &self.eo_tuning),
            ("to_tuning", &self.to_tuning),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceleratorParams {
    pub name: String,
    pub datarate_gsps: f64,
    /// N: gates per XPE.
    pub xpe_size: usize,
    /// XPEs across the whole accelerator.
    pub xpe_count: usize,
    /// M: XPEs sharing one laser bank.
    pub xpes_per_xpc: usize,
    pub xpcs_per_tile: usize,
    pub policy: Policy,
    pub oxg_energy_per_op_j: f64,
    pub oxg_area_mm2: f64,
    pub link_mode: LinkMode,
    /// Derived from the link budget when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laser_power_per_wavelength_dbm: Option<f64>,
    /// Derived from the datarate (or `N` for bitcount-circuit baselines) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca_gamma: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceleratorConfig {
    pub accelerator: AcceleratorParams,
    #[serde(default)]
    pub peripherals: PeripheralParams,
    #[serde(default)]
    pub link: LinkBudgetParams,
    #[serde(default)]
    pub pca: PcaParams,
}

pub const BUILTIN_VARIANTS: [&str; 5] = ["OXBNN_5", "OXBNN_50", "ROBIN_PO", "ROBIN_EO", "LIGHTBULB"];

/// Energy of one XNOR operation: one ring per gate in OXBNN, two rings in
/// ROBIN, three devices in LIGHTBULB.
pub const OXG_ENERGY_PER_OP_J: f64 = 0.032e-9;

fn variant(name: &str, datarate_gsps: f64, n: usize, xpe_count: usize, policy: Policy, devices: f64) -> AcceleratorConfig {
    AcceleratorConfig {
        accelerator: AcceleratorParams {
            name: name.to_string(),
            datarate_gsps,
            xpe_size: n,
            xpe_count,
            xpes_per_xpc: n,
            xpcs_per_tile: 4,
            policy,
            oxg_energy_per_op_j: devices * OXG_ENERGY_PER_OP_J,
            oxg_area_mm2: 0.011,
            link_mode: LinkMode::Table,
            laser_power_per_wavelength_dbm: None,
            pca_gamma: None,
        },
        peripherals: PeripheralParams::default(),
        link: LinkBudgetParams::default(),
        pca: PcaParams::for_datarate(datarate_gsps).expect("built-in datarates are positive"),
    }
}

impl AcceleratorConfig {
    pub fn builtin(name: &str) -> Result<Self> {
        let upper = name.to_ascii_uppercase();
        Ok(match upper.as_str() {
            "OXBNN_5" => variant("OXBNN_5", 5.0, 53, 100, Policy::Oxbnn, 1.0),
            "OXBNN_50" => variant("OXBNN_50", 50.0, 19, 1123, Policy::Oxbnn, 1.0),
            "ROBIN_PO" => variant("ROBIN_PO", 5.0, 50, 183, Policy::Baseline, 2.0),
            "ROBIN_EO" => variant("ROBIN_EO", 5.0, 10, 916, Policy::Baseline, 2.0),
            "LIGHTBULB" => variant("LIGHTBULB", 50.0, 16, 1139, Policy::Baseline, 3.0),
            "CUSTOM" => variant("custom", 50.0, 19, 1123, Policy::Oxbnn, 1.0),
            _ => return Err(Error::Config(format!("unknown accelerator variant `{name}`"))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.accelerator;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(a.datarate_gsps.is_finite() && a.datarate_gsps > 0.0) {
            return bad(format!("datarate_gsps must be positive, got {}", a.datarate_gsps));
        }
        for (key, v) in [
            ("xpe_size", a.xpe_size),
            ("xpe_count", a.xpe_count),
            ("xpes_per_xpc", a.xpes_per_xpc),
            ("xpcs_per_tile", a.xpcs_per_tile),
        ] {
            if v == 0 {
                return bad(format!("{key} must be at least 1"));
            }
        }
        if !(a.oxg_energy_per_op_j.is_finite() && a.oxg_energy_per_op_j >= 0.0 && a.oxg_area_mm2 >= 0.0) {
            return bad("OXG energy and area must be non-negative".into());
        }
        if a.pca_gamma == Some(0) {
            return bad("pca_gamma must be at least 1".into());
        }
        for (key, u) in self.peripherals.units() {
            if [u.power_mw, u.latency_ns, u.area_mm2].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad(format!("peripheral {key} has a negative or non-finite value"));
            }
        }
        self.link.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.pca.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn name(&self) -> &str {
        &self.accelerator.name
    }

    pub fn policy(&self) -> Policy {
        self.accelerator.policy
    }

    pub fn xpc_count(&self) -> usize {
        self.accelerator.xpe_count.div_ceil(self.accelerator.xpes_per_xpc)
    }

    pub fn tile_count(&self) -> usize {
        self.xpc_count().div_ceil(self.accelerator.xpcs_per_tile)
    }

    /// Per-wavelength laser power for `N` gates and `M` XPEs per laser bank.
    pub fn laser_power_dbm(&self) -> Result<f64> {
        let a = &self.accelerator;
        if let Some(p) = a.laser_power_per_wavelength_dbm {
            return Ok(p);
        }
        let p_pd = pd_sensitivity(a.datarate_gsps, a.link_mode, &self.link)?;
        required_laser_power(a.xpe_size, a.xpes_per_xpc, p_pd, &self.link)
    }

    /// Accumulation capacity; a baseline bitcount circuit holds one slice.
    pub fn pca_capacity(&self) -> Result<PcaCapacity> {
        let a = &self.accelerator;
        match (a.pca_gamma, a.policy) {
            (Some(gamma), _) => PcaCapacity::new(gamma, a.xpe_size as u64),
            (None, Policy::Baseline) => PcaCapacity::new(a.xpe_size as u64, a.xpe_size as u64),
            (None, Policy::Oxbnn) => capacity(&self.pca, a.xpe_size, a.datarate_gsps, a.link_mode),
        }
    }

    /// Accelerator area: gates plus per-tile, per-XPC and global peripherals.
    pub fn area_mm2(&self) -> f64 {
        let a = &self.accelerator;
        let p = &self.peripherals;
        let tiles = self.tile_count() as f64;
        let xpcs = self.xpc_count() as f64;
        (a.xpe_count * a.xpe_size) as f64 * a.oxg_area_mm2
            + tiles * (p.edram.area_mm2 + p.bus.area_mm2 + p.router.area_mm2 + p.pooling_unit.area_mm2)
            + xpcs * (p.activation_unit.area_mm2 + p.reduction_network.area_mm2)
            + p.io_interface.area_mm2
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parses a config file. `accelerator.base` names the variant whose
    /// values fill in anything the file leaves out (default `custom`).
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &BTreeMap::new())
    }

    /// [`AcceleratorConfig::from_toml`] with dotted-key overrides applied on
    /// top of the file.
    pub fn from_toml_with_overrides(text: &str, extra: &BTreeMap<String, toml::Value>) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut overrides = BTreeMap::new();
        let mut base = "custom".to_string();
        flatten_table("", &toml::Value::Table(table), &mut overrides);
        if let Some(v) = overrides.remove("accelerator.base") {
            base = v.as_str().ok_or_else(|| Error::Config("accelerator.base must be a string".into()))?.to_string();
        }
        overrides.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
        build_config(&base, &overrides)
    }
}

fn flatten_table(prefix: &str, value: &toml::Value, out: &mut BTreeMap<String, toml::Value>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_table(&key, v, out);
            }
        }
        leaf => {
            out.insert(prefix.to_string(), leaf.clone());
        }
    }
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut node = root;
    for part in parents {
        let table = node.as_table_mut().ok_or_else(|| Error::Config(format!("`{path}` is not a config key")))?;
        node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| Error::Config(format!("`{path}` is not a config key")))?;
    // Integers are accepted where reals are expected.
    let value = match (table.get(*last), value) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    table.insert(last.to_string(), value);
    Ok(())
}

/// A built-in variant (or `custom`) with dotted-key overrides such as
/// `accelerator.xpe_size`. Unless a `pca.*` key is overridden, the PCA
/// parameters follow the final datarate.
pub fn build_config(variant: &str, overrides: &BTreeMap<String, toml::Value>) -> Result<AcceleratorConfig> {
    let base = AcceleratorConfig::builtin(variant)?;
    let mut value = toml::Value::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
    for (path, v) in overrides {
        if path.is_empty() || path.split('.').count() < 2 {
            return Err(Error::Config(format!("`{path}` is not a config key")));
        }
        set_path(&mut value, path, v.clone())?;
    }
    let mut config: AcceleratorConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let datarate_changed = config.accelerator.datarate_gsps != base.accelerator.datarate_gsps;
    if datarate_changed && !overrides.keys().any(|k| k.starts_with("pca.")) {
        config.pca = PcaParams::for_datarate(config.accelerator.datarate_gsps).map_err(|e| Error::Config(e.to_string()))?;
    }
    config.validate()?;
    Ok(config)
}

/// Parses `key=value` override strings; values use TOML syntax, with bare
/// words taken as strings.
pub fn parse_override(text: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = text.split_once('=').ok_or_else(|| Error::Usage(format!("override `{text}` needs key=value")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let parsed: std::result::Result<toml::Table, _> = toml::from_str(&format!("v = {raw}"));
    let value = match parsed {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key, value))
}
