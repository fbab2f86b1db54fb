//! Command implementations behind the `xnorsim` binary.
//!
//! Every command returns an [`Outcome`] instead of printing, so the same code
//! paths serve the binary and in-process tests.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 solver or simulation failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use xnorsim::archsim::{
    build_config, compare, format_trace, parse_override, simulate_network, to_csv, AcceleratorConfig, Metrics, MetricsRow,
    SimOptions, BUILTIN_VARIANTS,
};
use xnorsim::bnn::{conv_reference, xnor_dot, BinaryTensor, BitcountResult, FilterBank};
use xnorsim::link_budget::{pd_sensitivity, solve_max_n, LinkBudgetParams, LinkMode, PUBLISHED_TABLE};
use xnorsim::mapping::{execute_schedule, lower, schedule, ConvWorkload, Policy};
use xnorsim::pca::{capacity, PcaParams};
use xnorsim::workloads::{builtin_model, builtin_models, parse_model, ModelSpec};
use xnorsim::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

/// Directory searched for config files given by bare name.
pub const CONFIG_DIR_ENV: &str = "XNORSIM_CONFIG_DIR";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { code: EXIT_OK, stdout, stderr: String::new() }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn failure(message: impl Into<String>) -> Self {
        Self { code: EXIT_FAILURE, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Usage(_)
            | Error::Config(_)
            | Error::Lookup(_)
            | Error::Parse { .. }
            | Error::ShapeChain { .. } => EXIT_USAGE,
            _ => EXIT_FAILURE,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "xnorsim", version, about = "Link budgets, functional checks and simulations of optical BNN accelerators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Datarate scalability table: DR, detector sensitivity, N, gamma, alpha.
    LinkBudget(LinkBudgetArgs),
    /// Randomized oracle-equivalence checks of both mapping policies.
    Verify(VerifyArgs),
    /// Simulate models on one or more accelerator configs and emit metrics CSV.
    Simulate(SimulateArgs),
    /// Ratios of the first config over the others, per model and as gmeans.
    Compare(CompareArgs),
    /// Execute a run manifest.
    Run(RunArgs),
    /// Print a config in file form.
    ShowConfig(ShowConfigArgs),
}

#[derive(Args, Debug, Clone)]
pub struct LinkBudgetArgs {
    #[arg(long, default_value_t = LinkMode::Table)]
    pub mode: LinkMode,
    /// Single datarate in GS/s; all table datarates when omitted.
    #[arg(long)]
    pub dr: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    /// Largest vector size drawn.
    #[arg(long, default_value_t = 128)]
    pub max_s: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Corrupts one result of the given instance (test hook).
    #[arg(long, hide = true)]
    pub inject_fault: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunSelection {
    /// `key=value` config override, repeatable (e.g. accelerator.xpe_count=64).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Shorthand for accelerator.policy.
    #[arg(long)]
    pub policy: Option<Policy>,
    /// Shorthand for accelerator.link_mode.
    #[arg(long)]
    pub link_mode: Option<LinkMode>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    /// Built-in variant, `custom`, or a config file.
    #[arg(long, value_delimiter = ',', required = true)]
    pub config: Vec<String>,
    /// Built-in model name, model file, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub model: Vec<String>,
    /// Event trace output; needs exactly one config and one model.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Metrics CSV output; stdout when omitted.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub selection: RunSelection,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    /// Configs to compare; the first is the subject.
    #[arg(long, value_delimiter = ',', required = true)]
    pub configs: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub models: Vec<String>,
    /// Comparison CSV output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Raw metrics CSV output.
    #[arg(long)]
    pub metrics_csv: Option<PathBuf>,
    #[command(flatten)]
    pub selection: RunSelection,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ShowConfigArgs {
    pub config: String,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: text }
            } else {
                Outcome::ok(text)
            };
        }
    };
    let result = match cli.command {
        Command::LinkBudget(a) => cmd_link_budget(&a).map(Outcome::ok),
        Command::Verify(a) => cmd_verify(&a),
        Command::Simulate(a) => cmd_simulate(&a, Path::new(".")),
        Command::Compare(a) => cmd_compare(&a, Path::new(".")),
        Command::Run(a) => cmd_run(&a.manifest),
        Command::ShowConfig(a) => resolve_config(&a.config, Path::new("."), &BTreeMap::new()).map(|c| Outcome::ok(c.to_toml())),
    };
    result.unwrap_or_else(|e| Outcome { code: e.code, stdout: String::new(), stderr: format!("error: {}\n", e.message) })
}

pub const LINK_BUDGET_HEADER: &str = "dr_gsps,pd_sensitivity_dbm,n,gamma,alpha";

pub fn cmd_link_budget(args: &LinkBudgetArgs) -> CliResult<String> {
    let params = LinkBudgetParams::default();
    let pca = PcaParams::default();
    let datarates: Vec<f64> = match args.dr {
        Some(dr) if !(dr.is_finite() && dr > 0.0) => return Err(CliError::usage(format!("--dr must be positive, got {dr}"))),
        Some(dr) => vec![dr],
        None => PUBLISHED_TABLE.iter().map(|r| r.datarate_gsps).collect(),
    };
    let mut out = format!("# link budget, mode={}\n{LINK_BUDGET_HEADER}\n", args.mode);
    for dr in datarates {
        let p_pd = pd_sensitivity(dr, args.mode, &params)?;
        let row = solve_max_n(dr, &params, args.mode)?;
        let cap = capacity(&pca, row.max_n, dr, args.mode)?;
        let _ = writeln!(out, "{dr},{p_pd:.2},{},{},{}", row.max_n, cap.gamma, cap.alpha);
    }
    Ok(out)
}

/// One randomized functional-equivalence instance: a small convolution
/// lowered to `h` vector pairs of size `s`, run on `m` XPEs of size `n`.
#[derive(Clone, Debug)]
pub struct VerifyInstance {
    pub workload: ConvWorkload,
    pub m: usize,
    pub n: usize,
    pub alpha: usize,
}

impl VerifyInstance {
    pub fn draw(rng: &mut ChaCha8Rng, max_s: usize) -> Self {
        let kh = rng.gen_range(1..=3.min(max_s));
        let kw = rng.gen_range(1..=3.min(max_s / kh));
        let stride = rng.gen_range(1..=2);
        let padding = rng.gen_range(0..=((kh - 1) / 2).min((kw - 1) / 2));
        let out_h = rng.gen_range(1..=2);
        let out_w = rng.gen_range(1..=2);
        let windows = out_h * out_w;
        let in_h = (out_h - 1) * stride + kh - 2 * padding;
        let in_w = (out_w - 1) * stride + kw - 2 * padding;
        let depthwise = rng.gen_bool(0.2);
        let workload = if depthwise {
            let c = rng.gen_range(1..=8 / windows);
            ConvWorkload { in_h, in_w, in_c: c, k_h: kh, k_w: kw, out_c: c, stride, padding, groups: c }
        } else {
            let in_c = rng.gen_range(1..=max_s / (kh * kw));
            let out_c = rng.gen_range(1..=8 / windows);
            ConvWorkload { in_h, in_w, in_c, k_h: kh, k_w: kw, out_c, stride, padding, groups: 1 }
        };
        let s = workload.s();
        let n = rng.gen_range(1..=s);
        let alpha = rng.gen_range(1..=s.div_ceil(n));
        Self { workload, m: rng.gen_range(1..=8), n, alpha }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyFailure {
    pub instance: usize,
    pub seed: u64,
    pub policy: Policy,
    pub s: usize,
    pub n: usize,
    pub m: usize,
    pub h: usize,
    pub alpha: usize,
    pub pair: usize,
    pub expected: usize,
    pub actual: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub instances: usize,
    pub policy_checks: usize,
    pub failures: Vec<VerifyFailure>,
}

/// Runs the randomized suite. Instance `i` draws from stream `i` of a ChaCha
/// generator seeded with `seed`, so any instance can be replayed alone.
pub fn verify(instances: usize, max_s: usize, seed: u64, inject_fault: Option<usize>) -> CliResult<VerifyReport> {
    if max_s == 0 {
        return Err(CliError::usage("--max-s must be at least 1"));
    }
    let mut report = VerifyReport { instances, ..Default::default() };
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let inst = VerifyInstance::draw(&mut rng, max_s);
        let w = inst.workload;
        let input = BinaryTensor::random(w.in_h, w.in_w, w.in_c, &mut rng);
        let filters = FilterBank::random(w.out_c, w.k_h, w.k_w, w.in_c / w.groups, &mut rng);
        let (rows_i, rows_w) = lower(&w, &input, &filters)?;
        let reference = conv_reference(&input, &filters, w.stride, w.padding)?;
        let unsliced: Vec<BitcountResult> =
            (0..w.pairs()).map(|p| xnor_dot(rows_i.row(p), rows_w.row(p))).collect::<Result<_, _>>()?;
        if unsliced != reference.values() {
            return Err(CliError::failure(format!("instance {i}: lowering disagrees with the convolution reference")));
        }
        for policy in [Policy::Oxbnn, Policy::Baseline] {
            let sch = schedule(policy, w.pairs(), w.s(), inst.m, inst.n, inst.alpha)?;
            let mut got = execute_schedule(&sch, &rows_i, &rows_w)?;
            if inject_fault == Some(i) && policy == Policy::Oxbnn {
                let r = got[0];
                got[0] = BitcountResult::new((r.z() + 1) % (r.z_max() + 1), r.z_max())?;
            }
            report.policy_checks += 1;
            if let Some(pair) = (0..got.len()).find(|&p| got[p] != unsliced[p]) {
                report.failures.push(VerifyFailure {
                    instance: i,
                    seed,
                    policy,
                    s: w.s(),
                    n: inst.n,
                    m: inst.m,
                    h: w.pairs(),
                    alpha: sch.alpha,
                    pair,
                    expected: unsliced[pair].z(),
                    actual: got[pair].z(),
                });
            }
        }
    }
    Ok(report)
}

pub fn cmd_verify(args: &VerifyArgs) -> CliResult<Outcome> {
    let report = verify(args.instances, args.max_s, args.seed, args.inject_fault)?;
    if report.failures.is_empty() {
        return Ok(Outcome::ok(format!(
            "all {} instances passed ({} policy-equivalence checks, max S {}, seed {})\n",
            report.instances, report.policy_checks, args.max_s, args.seed
        )));
    }
    let mut err = String::new();
    for f in &report.failures {
        let _ = writeln!(
            err,
            "counterexample: s={} n={} seed={} instance={} policy={} m={} h={} alpha={} pair={} expected z={} got z={}",
            f.s, f.n, f.seed, f.instance, f.policy, f.m, f.h, f.alpha, f.pair, f.expected, f.actual
        );
    }
    let _ = writeln!(err, "{} of {} instances failed", report.failures.len(), report.instances);
    Ok(Outcome { code: EXIT_VERIFY_FAILED, stdout: String::new(), stderr: err })
}

fn selection_overrides(sel: &RunSelection) -> CliResult<BTreeMap<String, toml::Value>> {
    let mut map = BTreeMap::new();
    for text in &sel.overrides {
        let (k, v) = parse_override(text)?;
        map.insert(k, v);
    }
    if let Some(p) = sel.policy {
        map.insert("accelerator.policy".into(), toml::Value::String(p.to_string()));
    }
    if let Some(m) = sel.link_mode {
        map.insert("accelerator.link_mode".into(), toml::Value::String(m.to_string()));
    }
    Ok(map)
}

/// A built-in variant name, a config file (relative to `base_dir`), or a
/// file in the `XNORSIM_CONFIG_DIR` directory (with or without `.toml`).
pub fn resolve_config(name: &str, base_dir: &Path, overrides: &BTreeMap<String, toml::Value>) -> CliResult<AcceleratorConfig> {
    if name.eq_ignore_ascii_case("custom") || BUILTIN_VARIANTS.iter().any(|v| v.eq_ignore_ascii_case(name)) {
        return Ok(build_config(name, overrides)?);
    }
    let mut candidates = vec![base_dir.join(name)];
    if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
        let dir = PathBuf::from(dir);
        candidates.push(dir.join(name));
        candidates.push(dir.join(format!("{name}.toml")));
    }
    let path = candidates
        .iter()
        .find(|p| p.is_file())
        .ok_or_else(|| CliError::usage(format!("`{name}` is neither a built-in variant nor a config file")))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    AcceleratorConfig::from_toml_with_overrides(&text, overrides)
        .map_err(|e| CliError { message: format!("{}: {}", path.display(), e), ..CliError::from(e) })
}

/// Built-in model names, `all`, or model files (relative to `base_dir`).
pub fn resolve_models(names: &[String], base_dir: &Path) -> CliResult<Vec<ModelSpec>> {
    let mut out = Vec::new();
    for name in names {
        if name.eq_ignore_ascii_case("all") {
            out.extend(builtin_models());
        } else if let Ok(m) = builtin_model(name) {
            out.push(m);
        } else {
            let path = base_dir.join(name);
            let text = std::fs::read_to_string(&path)
                .map_err(|_| CliError::usage(format!("`{name}` is neither a built-in model nor a readable file")))?;
            out.push(parse_model(&text).map_err(|e| CliError { message: format!("{}: {}", path.display(), e), ..e.into() })?);
        }
    }
    if out.is_empty() {
        return Err(CliError::usage("no models selected"));
    }
    Ok(out)
}

/// Metrics keyed by (config label, model name). Runs fan out one thread per
/// job; the map makes the merge order-independent.
fn run_matrix(
    configs: &[(String, AcceleratorConfig)],
    models: &[ModelSpec],
) -> CliResult<BTreeMap<String, BTreeMap<String, Metrics>>> {
    let jobs: Vec<(&str, &AcceleratorConfig, &ModelSpec)> =
        configs.iter().flat_map(|(label, c)| models.iter().map(move |m| (label.as_str(), c, m))).collect();
    let results: Vec<CliResult<(String, String, Metrics)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(label, config, model)| {
                scope.spawn(move || {
                    let mut m = simulate_network(&model.tasks(), config, SimOptions::default())
                        .map_err(|e| CliError::failure(format!("{label} on {}: {e}", model.name)))?
                        .metrics;
                    m.config = label.to_string();
                    Ok((label.to_string(), model.name.clone(), m))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let mut map: BTreeMap<String, BTreeMap<String, Metrics>> = BTreeMap::new();
    for r in results {
        let (label, model, m) = r?;
        map.entry(label).or_default().insert(model, m);
    }
    Ok(map)
}

/// Distinct labels for the requested configs; repeats get a `#k` suffix.
fn labelled_configs(names: &[String], base_dir: &Path, sel: &RunSelection) -> CliResult<Vec<(String, AcceleratorConfig)>> {
    let overrides = selection_overrides(sel)?;
    let mut out: Vec<(String, AcceleratorConfig)> = Vec::new();
    for name in names {
        let config = resolve_config(name, base_dir, &overrides)?;
        let base = config.name().to_string();
        let mut label = base.clone();
        let mut k = 1;
        while out.iter().any(|(l, _)| *l == label) {
            k += 1;
            label = format!("{base}#{k}");
        }
        out.push((label, config));
    }
    Ok(out)
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_simulate(args: &SimulateArgs, base_dir: &Path) -> CliResult<Outcome> {
    let configs = labelled_configs(&args.config, base_dir, &args.selection)?;
    let models = resolve_models(&args.model, base_dir)?;
    let mut stdout = String::new();
    if let Some(trace_path) = &args.trace {
        if configs.len() != 1 || models.len() != 1 {
            return Err(CliError::usage("--trace needs exactly one config and one model"));
        }
        let out = simulate_network(&models[0].tasks(), &configs[0].1, SimOptions { record_trace: true })
            .map_err(|e| CliError::failure(e.to_string()))?;
        write_file(&base_dir.join(trace_path), &format_trace(out.trace.as_deref().unwrap_or_default()))?;
    }
    let results = run_matrix(&configs, &models)?;
    let rows: Vec<MetricsRow> = configs
        .iter()
        .flat_map(|(label, _)| models.iter().map(|m| MetricsRow::new(&m.name, &results[label][&m.name])))
        .collect();
    let csv = to_csv(&rows);
    match &args.csv {
        Some(path) => {
            write_file(&base_dir.join(path), &csv)?;
            let _ = writeln!(stdout, "wrote {} rows to {}", rows.len(), path.display());
        }
        None => stdout.push_str(&csv),
    }
    Ok(Outcome::ok(stdout))
}

pub fn cmd_compare(args: &CompareArgs, base_dir: &Path) -> CliResult<Outcome> {
    if args.configs.len() < 2 {
        return Err(CliError::usage("compare needs at least two configs"));
    }
    let configs = labelled_configs(&args.configs, base_dir, &args.selection)?;
    let models = resolve_models(&args.models, base_dir)?;
    let results = run_matrix(&configs, &models)?;
    let report = compare(&configs[0].0, &results)?;
    let mut stdout = report.to_text();
    if let Some(path) = &args.csv {
        write_file(&base_dir.join(path), &report.to_csv())?;
        let _ = writeln!(stdout, "wrote comparison to {}", path.display());
    }
    if let Some(path) = &args.metrics_csv {
        let rows: Vec<MetricsRow> = configs
            .iter()
            .flat_map(|(label, _)| models.iter().map(|m| MetricsRow::new(&m.name, &results[label][&m.name])))
            .collect();
        write_file(&base_dir.join(path), &to_csv(&rows))?;
        let _ = writeln!(stdout, "wrote metrics to {}", path.display());
    }
    Ok(Outcome::ok(stdout))
}

/// Everything needed to repeat a run. Relative paths are taken from the
/// manifest's directory.
///
/// ```toml
/// command = "compare"          # link-budget | verify | simulate | compare
/// configs = ["OXBNN_50", "LIGHTBULB"]
/// models = ["all"]
/// seed = 0
/// overrides = ["peripherals.reduction_network.latency_ns=0"]
/// link_mode = "table"
///
/// [outputs]
/// csv = "compare.csv"
/// ```
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    #[serde(default)]
    pub configs: Vec<String>,
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    pub instances: Option<usize>,
    pub max_s: Option<usize>,
    pub dr: Option<f64>,
    pub link_mode: Option<LinkMode>,
    pub policy: Option<Policy>,
    #[serde(default)]
    pub overrides: Vec<String>,
    #[serde(default)]
    pub outputs: ManifestOutputs,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestOutputs {
    pub csv: Option<PathBuf>,
    pub metrics_csv: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

pub fn cmd_run(manifest_path: &Path) -> CliResult<Outcome> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| CliError::usage(format!("{}: {e}", manifest_path.display())))?;
    let manifest: RunManifest =
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", manifest_path.display())))?;
    let base_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let selection =
        RunSelection { overrides: manifest.overrides.clone(), policy: manifest.policy, link_mode: manifest.link_mode };
    let models = if manifest.models.is_empty() { vec!["all".to_string()] } else { manifest.models.clone() };
    let with_outputs = |stdout: String| -> CliResult<Outcome> {
        match &manifest.outputs.csv {
            Some(p) => {
                write_file(&base_dir.join(p), &stdout)?;
                Ok(Outcome::ok(format!("wrote {}\n", p.display())))
            }
            None => Ok(Outcome::ok(stdout)),
        }
    };
    match manifest.command.as_str() {
        "link-budget" => {
            let args = LinkBudgetArgs { mode: manifest.link_mode.unwrap_or(LinkMode::Table), dr: manifest.dr };
            with_outputs(cmd_link_budget(&args)?)
        }
        "verify" => cmd_verify(&VerifyArgs {
            instances: manifest.instances.unwrap_or(1000),
            max_s: manifest.max_s.unwrap_or(128),
            seed: manifest.seed,
            inject_fault: None,
        }),
        "simulate" => cmd_simulate(
            &SimulateArgs {
                config: manifest.configs.clone(),
                model: models,
                trace: manifest.outputs.trace.clone(),
                csv: manifest.outputs.csv.clone(),
                selection,
            },
            base_dir,
        ),
        "compare" => cmd_compare(
            &CompareArgs {
                configs: manifest.configs.clone(),
                models,
                csv: manifest.outputs.csv.clone(),
                metrics_csv: manifest.outputs.metrics_csv.clone(),
                selection,
            },
            base_dir,
        ),
        other => Err(CliError::usage(format!("unknown manifest command `{other}`"))),
    }
}
