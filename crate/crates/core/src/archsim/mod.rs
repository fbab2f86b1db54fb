//! Transaction-level, event-driven performance and energy model of
//! optical BNN accelerators.
//!
//! Each XNOR layer runs in batches of `xpe_count` vector pairs. A batch is
//! fetched (eDRAM read, router, bus) into one of two operand buffers, executed
//! as lockstep PASS events of one period `τ = 1/DR`, then finished by the
//! policy's tail: a PCA readout per accumulation segment for `Oxbnn`, or psum
//! writes, psum reads and reduction-tree levels for `Baseline`. Activation and
//! an output write close every batch. Layers run back to back between two IO
//! events. Bus and router cycles are PASS periods.
//!
//! Laser and peripheral power are drawn for the whole inference; OXG energy
//! is charged per XNOR bit operation.

mod config;
mod engine;
mod metrics;
mod sim;

pub use config::{
    build_config, parse_override, AcceleratorConfig, AcceleratorParams, PeripheralParams, UnitParams, BUILTIN_VARIANTS,
    OXG_ENERGY_PER_OP_J,
};
pub use engine::{audit, format_trace, ns_to_fs, AuditReport, EventKind, Resource, SimEvent, SimTime, TRACE_HEADER};
pub use metrics::{
    compare, geometric_mean, parse_csv, to_csv, BaselineComparison, ComparisonReport, Metrics, MetricsRow, RatioRow,
    COMPARISON_CSV_HEADER, CSV_HEADER,
};
pub use sim::{simulate_convs, simulate_layer, simulate_network, tree_level_ops, SimOptions, SimOutput};
