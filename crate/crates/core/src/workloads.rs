//! BNN model descriptions: a line-oriented layer grammar, four built-in
//! networks, and seeded synthetic binary tensors.
//!
//! ```text
//! # comment
//! model <name>
//! input <H> <W> <C>
//! conv <ih> <iw> <ic> <kh> <kw> <oc> <stride> <pad> [groups=<g>] [from=<src>]
//! fc <in> <out> [from=<src>]
//! pool <ih> <iw> <ic> <k> <stride> <pad> [kind=max|avg] [from=<src>]
//! concat <h> <w> <c> from=<src>,<src>[,...]
//! add <h> <w> <c> from=<src>,<src>[,...]
//! ```
//!
//! `<src>` is `input` or a zero-based layer index, optionally followed by a
//! channel range `[c0:c1]`. Without `from=` a layer reads the previous layer
//! (or the input, for the first layer). `input` may be omitted, in which case
//! the first layer's declared input shape is used.

use std::fmt::{self, Write as _};
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bnn::{BinaryTensor, FilterBank};
use crate::error::{invalid, Error, Result};
use crate::mapping::ConvWorkload;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape {
    pub fn elements(&self) -> usize {
        self.h * self.w * self.c
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Input,
    Layer(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Source {
    pub node: Node,
    pub channels: Option<Range<usize>>,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Node::Input => f.write_str("input")?,
            Node::Layer(i) => write!(f, "{i}")?,
        }
        if let Some(r) = &self.channels {
            write!(f, "[{}:{}]", r.start, r.end)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PoolKind {
    Max,
    Avg,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv(ConvWorkload),
    FullyConnected { inputs: usize, outputs: usize },
    Pool { input: Shape, k: usize, stride: usize, padding: usize, kind: PoolKind },
    Concat(Shape),
    Add(Shape),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Layer {
    pub kind: LayerKind,
    pub sources: Vec<Source>,
    pub output: Shape,
}

impl Layer {
    /// The layer as an XNOR-bitcount workload, for conv and fc layers.
    pub fn workload(&self) -> Option<ConvWorkload> {
        match self.kind {
            LayerKind::Conv(w) => Some(w),
            LayerKind::FullyConnected { inputs, outputs } => Some(ConvWorkload::fully_connected(inputs, outputs)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub name: String,
    pub input: Shape,
    pub layers: Vec<Layer>,
}

/// Unit of work handed to the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerTask {
    Xnor(ConvWorkload),
    Pool { output_elements: u64 },
}

impl ModelSpec {
    pub fn workloads(&self) -> Vec<ConvWorkload> {
        self.layers.iter().filter_map(Layer::workload).collect()
    }

    /// Simulator tasks in layer order; concat and add carry no work.
    pub fn tasks(&self) -> Vec<LayerTask> {
        self.layers
            .iter()
            .filter_map(|l| match l.kind {
                LayerKind::Pool { .. } => Some(LayerTask::Pool { output_elements: l.output.elements() as u64 }),
                _ => l.workload().map(LayerTask::Xnor),
            })
            .collect()
    }

    pub fn max_s(&self) -> usize {
        self.workloads().iter().map(ConvWorkload::s).max().unwrap_or(0)
    }

    pub fn serialize(&self) -> String {
        let mut out = format!("model {}\ninput {} {} {}\n", self.name, self.input.h, self.input.w, self.input.c);
        for (i, l) in self.layers.iter().enumerate() {
            let default = Source { node: if i == 0 { Node::Input } else { Node::Layer(i - 1) }, channels: None };
            let from = if l.sources.len() == 1 && l.sources[0] == default {
                String::new()
            } else {
                let list: Vec<String> = l.sources.iter().map(Source::to_string).collect();
                format!(" from={}", list.join(","))
            };
            let _ = match &l.kind {
                LayerKind::Conv(w) => {
                    let groups = if w.groups == 1 { String::new() } else { format!(" groups={}", w.groups) };
                    writeln!(
                        out,
                        "conv {} {} {} {} {} {} {} {}{groups}{from}",
                        w.in_h, w.in_w, w.in_c, w.k_h, w.k_w, w.out_c, w.stride, w.padding
                    )
                }
                LayerKind::FullyConnected { inputs, outputs } => writeln!(out, "fc {inputs} {outputs}{from}"),
                LayerKind::Pool { input, k, stride, padding, kind } => {
                    let kind = match kind {
                        PoolKind::Max => "max",
                        PoolKind::Avg => "avg",
                    };
                    writeln!(out, "pool {} {} {} {k} {stride} {padding} kind={kind}{from}", input.h, input.w, input.c)
                }
                LayerKind::Concat(s) => writeln!(out, "concat {} {} {}{from}", s.h, s.w, s.c),
                LayerKind::Add(s) => writeln!(out, "add {} {} {}{from}", s.h, s.w, s.c),
            };
        }
        out
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_source(text: &str, line: usize) -> Result<Source> {
    let (node_text, channels) = match text.split_once('[') {
        Some((node, rest)) => {
            let range = rest.strip_suffix(']').ok_or_else(|| parse_err(line, format!("unterminated range in `{text}`")))?;
            let (a, b) = range.split_once(':').ok_or_else(|| parse_err(line, format!("range `{range}` needs c0:c1")))?;
            let a: usize = a.parse().map_err(|_| parse_err(line, format!("bad channel `{a}`")))?;
            let b: usize = b.parse().map_err(|_| parse_err(line, format!("bad channel `{b}`")))?;
            if a >= b {
                return Err(parse_err(line, format!("empty channel range {a}:{b}")));
            }
            (node, Some(a..b))
        }
        None => (text, None),
    };
    let node = if node_text == "input" {
        Node::Input
    } else {
        Node::Layer(node_text.parse().map_err(|_| parse_err(line, format!("bad source `{node_text}`")))?)
    };
    Ok(Source { node, channels })
}

struct Record {
    line: usize,
    kind: LayerKind,
    sources: Option<Vec<Source>>,
}

fn parse_record(tokens: &[&str], line: usize) -> Result<Record> {
    let (positional, options): (Vec<&str>, Vec<&str>) = tokens[1..].iter().partition(|t| !t.contains('='));
    let nums: Vec<usize> = positional
        .iter()
        .map(|t| t.parse().map_err(|_| parse_err(line, format!("expected a non-negative integer, got `{t}`"))))
        .collect::<Result<_>>()?;
    let mut groups = 1;
    let mut pool_kind = PoolKind::Max;
    let mut sources = None;
    for opt in options {
        let (key, value) = opt.split_once('=').expect("partitioned on '='");
        match (tokens[0], key) {
            ("conv", "groups") => {
                groups = value.parse().map_err(|_| parse_err(line, format!("bad groups `{value}`")))?;
            }
            ("pool", "kind") => {
                pool_kind = match value {
                    "max" => PoolKind::Max,
                    "avg" => PoolKind::Avg,
                    _ => return Err(parse_err(line, format!("unknown pool kind `{value}`"))),
                }
            }
            (_, "from") => {
                sources = Some(value.split(',').map(|s| parse_source(s, line)).collect::<Result<Vec<_>>>()?);
            }
            (kind, _) => return Err(parse_err(line, format!("unknown option `{key}` for {kind}"))),
        }
    }
    let arity = |n: usize| -> Result<()> {
        if nums.len() == n {
            Ok(())
        } else {
            Err(parse_err(line, format!("{} takes {n} integers, got {}", tokens[0], nums.len())))
        }
    };
    let kind = match tokens[0] {
        "conv" => {
            arity(8)?;
            LayerKind::Conv(ConvWorkload {
                in_h: nums[0],
                in_w: nums[1],
                in_c: nums[2],
                k_h: nums[3],
                k_w: nums[4],
                out_c: nums[5],
                stride: nums[6],
                padding: nums[7],
                groups,
            })
        }
        "fc" => {
            arity(2)?;
            LayerKind::FullyConnected { inputs: nums[0], outputs: nums[1] }
        }
        "pool" => {
            arity(6)?;
            LayerKind::Pool {
                input: Shape { h: nums[0], w: nums[1], c: nums[2] },
                k: nums[3],
                stride: nums[4],
                padding: nums[5],
                kind: pool_kind,
            }
        }
        "concat" | "add" => {
            arity(3)?;
            let shape = Shape { h: nums[0], w: nums[1], c: nums[2] };
            if sources.as_ref().is_none_or(|s| s.len() < 2) {
                return Err(parse_err(line, format!("{} needs at least two sources", tokens[0])));
            }
            if tokens[0] == "concat" {
                LayerKind::Concat(shape)
            } else {
                LayerKind::Add(shape)
            }
        }
        other => return Err(parse_err(line, format!("unknown record `{other}`"))),
    };
    Ok(Record { line, kind, sources })
}

fn declared_input(kind: &LayerKind) -> Option<Shape> {
    match kind {
        LayerKind::Conv(w) => Some(Shape { h: w.in_h, w: w.in_w, c: w.in_c }),
        LayerKind::FullyConnected { inputs, .. } => Some(Shape { h: 1, w: 1, c: *inputs }),
        LayerKind::Pool { input, .. } => Some(*input),
        LayerKind::Concat(_) | LayerKind::Add(_) => None,
    }
}

fn shape_err(layer: usize, msg: impl Into<String>) -> Error {
    Error::ShapeChain { layer, msg: msg.into() }
}

fn resolve(source: &Source, input: Shape, outputs: &[Shape], layer: usize) -> Result<Shape> {
    let base = match source.node {
        Node::Input => input,
        Node::Layer(i) if i < layer => outputs[i],
        Node::Layer(i) => return Err(shape_err(layer, format!("source {i} is not an earlier layer"))),
    };
    match &source.channels {
        None => Ok(base),
        Some(r) if r.end <= base.c => Ok(Shape { c: r.end - r.start, ..base }),
        Some(r) => Err(shape_err(layer, format!("channel range {}:{} exceeds {} channels", r.start, r.end, base.c))),
    }
}

fn build_layer(kind: LayerKind, sources: Vec<Source>, inputs: &[Shape], layer: usize) -> Result<Layer> {
    let output = match &kind {
        LayerKind::Conv(w) => {
            w.validate().map_err(|e| shape_err(layer, e.to_string()))?;
            expect_single(inputs, Shape { h: w.in_h, w: w.in_w, c: w.in_c }, layer)?;
            Shape { h: w.out_h(), w: w.out_w(), c: w.out_c }
        }
        LayerKind::FullyConnected { inputs: n_in, outputs } => {
            if *n_in == 0 || *outputs == 0 {
                return Err(shape_err(layer, "fc dimensions must be positive"));
            }
            if inputs.len() != 1 || inputs[0].elements() != *n_in {
                return Err(shape_err(layer, format!("fc expects {n_in} inputs, source provides {:?}", inputs)));
            }
            Shape { h: 1, w: 1, c: *outputs }
        }
        LayerKind::Pool { input, k, stride, padding, .. } => {
            if *k == 0 || *stride == 0 || input.elements() == 0 || *k > input.h + 2 * padding || *k > input.w + 2 * padding
            {
                return Err(shape_err(layer, "invalid pooling window"));
            }
            expect_single(inputs, *input, layer)?;
            Shape { h: (input.h + 2 * padding - k) / stride + 1, w: (input.w + 2 * padding - k) / stride + 1, c: input.c }
        }
        LayerKind::Concat(out) => {
            let channels: usize = inputs.iter().map(|s| s.c).sum();
            if inputs.iter().any(|s| (s.h, s.w) != (out.h, out.w)) || channels != out.c {
                return Err(shape_err(layer, format!("concat of {inputs:?} does not give {out}")));
            }
            *out
        }
        LayerKind::Add(out) => {
            if inputs.iter().any(|s| s != out) {
                return Err(shape_err(layer, format!("add operands {inputs:?} do not all match {out}")));
            }
            *out
        }
    };
    Ok(Layer { kind, sources, output })
}

fn expect_single(inputs: &[Shape], declared: Shape, layer: usize) -> Result<()> {
    match inputs {
        [only] if *only == declared => Ok(()),
        [only] => Err(shape_err(layer, format!("declared input {declared} but source provides {only}"))),
        _ => Err(shape_err(layer, "expected exactly one source")),
    }
}

pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let mut name = None;
    let mut input = None;
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[0] {
            "model" => {
                if tokens.len() != 2 || name.is_some() || !records.is_empty() {
                    return Err(parse_err(line, "`model <name>` must appear once, before any layer"));
                }
                name = Some(tokens[1].to_string());
            }
            "input" => {
                if input.is_some() || !records.is_empty() {
                    return Err(parse_err(line, "`input` must appear once, before any layer"));
                }
                let dims: Vec<usize> = tokens[1..]
                    .iter()
                    .map(|t| t.parse().map_err(|_| parse_err(line, format!("bad input dimension `{t}`"))))
                    .collect::<Result<_>>()?;
                match dims[..] {
                    [h, w, c] if h > 0 && w > 0 && c > 0 => input = Some(Shape { h, w, c }),
                    _ => return Err(parse_err(line, "`input` takes three positive integers")),
                }
            }
            _ => records.push(parse_record(&tokens, line)?),
        }
    }
    if records.is_empty() {
        return Err(invalid("model has no layers"));
    }
    let input = match input {
        Some(s) => s,
        None => declared_input(&records[0].kind)
            .ok_or_else(|| parse_err(records[0].line, "first layer cannot be a join without an `input` line"))?,
    };
    let mut layers: Vec<Layer> = Vec::with_capacity(records.len());
    let mut outputs: Vec<Shape> = Vec::with_capacity(records.len());
    for (idx, rec) in records.into_iter().enumerate() {
        let sources = rec.sources.unwrap_or_else(|| {
            vec![Source { node: if idx == 0 { Node::Input } else { Node::Layer(idx - 1) }, channels: None }]
        });
        let shapes = sources.iter().map(|s| resolve(s, input, &outputs, idx)).collect::<Result<Vec<_>>>()?;
        let layer = build_layer(rec.kind, sources, &shapes, idx)?;
        outputs.push(layer.output);
        layers.push(layer);
    }
    Ok(ModelSpec { name: name.unwrap_or_else(|| "model".into()), input, layers })
}

const BUILTIN_SOURCES: [&str; 4] = [
    include_str!("../models/vgg_small.model"),
    include_str!("../models/resnet18.model"),
    include_str!("../models/mobilenet_v2.model"),
    include_str!("../models/shufflenet_v2.model"),
];

pub fn builtin_models() -> Vec<ModelSpec> {
    BUILTIN_SOURCES.iter().map(|src| parse_model(src).expect("built-in models are valid")).collect()
}

fn normalize(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect()
}

/// Built-in model by name, ignoring case, `-` and `_`.
pub fn builtin_model(name: &str) -> Result<ModelSpec> {
    let key = normalize(name);
    builtin_models()
        .into_iter()
        .find(|m| normalize(&m.name) == key)
        .ok_or_else(|| Error::Lookup(format!("no built-in model `{name}`")))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerTensors {
    pub layer: usize,
    pub input: BinaryTensor,
    pub filters: FilterBank,
}

/// Random operands for one conv or fc layer; layer `i` draws from stream `i`
/// of a generator seeded with `seed`.
pub fn synthesize_layer(spec: &ModelSpec, layer: usize, seed: u64) -> Result<LayerTensors> {
    let w = spec
        .layers
        .get(layer)
        .and_then(Layer::workload)
        .ok_or_else(|| invalid(format!("layer {layer} is not an XNOR layer")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer as u64);
    let input = BinaryTensor::random(w.in_h, w.in_w, w.in_c, &mut rng);
    let filters = FilterBank::random(w.out_c, w.k_h, w.k_w, w.in_c / w.groups, &mut rng);
    Ok(LayerTensors { layer, input, filters })
}

pub fn synthesize_tensors(spec: &ModelSpec, seed: u64) -> Vec<LayerTensors> {
    (0..spec.layers.len())
        .filter(|&i| spec.layers[i].workload().is_some())
        .map(|i| synthesize_layer(spec, i, seed).expect("XNOR layer"))
        .collect()
}
