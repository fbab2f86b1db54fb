//! Lowering of binarized convolutions to XNOR vector pairs, slicing to the XPE
//! size, and PASS scheduling under two policies.
//!
//! `Oxbnn` keeps every slice of a vector pair on one XPE so its PCA
//! accumulates the whole bitcount in place. `Baseline` spreads slices across
//! XPEs and adds the resulting partial sums (psums) in a reduction tree.
//!
//! Vector pair `p` is `window * out_c + filter`, the same order as
//! [`ConvOutput`](crate::bnn::ConvOutput) values.

use std::fmt::{self, Write as _};
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bnn::{xnor_dot, BinaryMatrix, BinaryTensor, BinaryVector, BitcountResult, FilterBank};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvWorkload {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub out_c: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl ConvWorkload {
    pub fn new(in_h: usize, in_w: usize, in_c: usize, k: usize, out_c: usize, stride: usize, padding: usize) -> Self {
        Self { in_h, in_w, in_c, k_h: k, k_w: k, out_c, stride, padding, groups: 1 }
    }

    /// A fully connected layer as a 1x1 convolution over a 1x1 input.
    pub fn fully_connected(inputs: usize, outputs: usize) -> Self {
        Self::new(1, 1, inputs, 1, outputs, 1, 0)
    }

    pub fn with_groups(self, groups: usize) -> Self {
        Self { groups, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.in_h, self.in_w, self.in_c, self.k_h, self.k_w, self.out_c, self.stride, self.groups];
        if dims.contains(&0) {
            return Err(invalid(format!("workload dimensions must be positive: {self:?}")));
        }
        if !self.in_c.is_multiple_of(self.groups) || !self.out_c.is_multiple_of(self.groups) {
            return Err(invalid(format!(
                "{} groups must divide both {} input and {} output channels",
                self.groups, self.in_c, self.out_c
            )));
        }
        if self.k_h > self.in_h + 2 * self.padding || self.k_w > self.in_w + 2 * self.padding {
            return Err(invalid(format!(
                "{}x{} kernel larger than padded {}x{} input",
                self.k_h, self.k_w, self.in_h, self.in_w
            )));
        }
        Ok(())
    }

    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.padding - self.k_h) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.padding - self.k_w) / self.stride + 1
    }

    /// XNOR vector size.
    pub fn s(&self) -> usize {
        self.k_h * self.k_w * (self.in_c / self.groups)
    }

    /// Sliding-window count.
    pub fn windows(&self) -> usize {
        self.out_h() * self.out_w()
    }

    /// Vector pairs to evaluate: every window against every filter.
    pub fn pairs(&self) -> usize {
        self.windows() * self.out_c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixDims {
    pub rows: usize,
    pub cols: usize,
}

/// Input matrix (windows x S) and weight matrix (filters x S) dimensions.
pub fn flatten(workload: &ConvWorkload) -> Result<(MatrixDims, MatrixDims)> {
    workload.validate()?;
    let s = workload.s();
    Ok((MatrixDims { rows: workload.windows(), cols: s }, MatrixDims { rows: workload.out_c, cols: s }))
}

/// Per-pair operand matrices: row `p` of each holds the input window and the
/// filter of vector pair `p`. Padding positions read as 0.
pub fn lower(workload: &ConvWorkload, input: &BinaryTensor, filters: &FilterBank) -> Result<(BinaryMatrix, BinaryMatrix)> {
    workload.validate()?;
    let c_per_group = workload.in_c / workload.groups;
    if (input.height, input.width, input.channels) != (workload.in_h, workload.in_w, workload.in_c) {
        return Err(invalid("input tensor does not match the workload"));
    }
    if (filters.count, filters.height, filters.width, filters.channels)
        != (workload.out_c, workload.k_h, workload.k_w, c_per_group)
    {
        return Err(invalid("filter bank does not match the workload"));
    }
    let per_group = workload.out_c / workload.groups;
    let flat: Vec<BinaryVector> = (0..workload.out_c).map(|f| filters.flatten(f)).collect();
    let mut inputs = Vec::with_capacity(workload.pairs());
    let mut weights = Vec::with_capacity(workload.pairs());
    let mut bits = vec![0u8; workload.s()];
    for orow in 0..workload.out_h() {
        for ocol in 0..workload.out_w() {
            for (f, weight) in flat.iter().enumerate() {
                let ch0 = (f / per_group) * c_per_group;
                let mut i = 0;
                for kr in 0..workload.k_h {
                    for kc in 0..workload.k_w {
                        let r = (orow * workload.stride + kr) as isize - workload.padding as isize;
                        let c = (ocol * workload.stride + kc) as isize - workload.padding as isize;
                        for ch in 0..c_per_group {
                            bits[i] = input.get_padded(r, c, ch0 + ch);
                            i += 1;
                        }
                    }
                }
                inputs.push(BinaryVector::from_bits(&bits)?);
                weights.push(weight.clone());
            }
        }
    }
    Ok((BinaryMatrix::new(inputs)?, BinaryMatrix::new(weights)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VectorSlicePlan {
    pub parent_vector_id: usize,
    pub slice_index: usize,
    pub offset: usize,
    pub length: usize,
}

/// `ceil(s / n)` slice lengths, all `n` except a shorter final remainder.
pub fn slice_vector(s: usize, n: usize) -> Vec<usize> {
    assert!(s >= 1 && n >= 1, "slice_vector needs positive s and n");
    (0..s.div_ceil(n)).map(|i| n.min(s - i * n)).collect()
}

pub fn slice_plan(parent_vector_id: usize, s: usize, n: usize) -> Vec<VectorSlicePlan> {
    let mut offset = 0;
    slice_vector(s, n)
        .into_iter()
        .enumerate()
        .map(|(slice_index, length)| {
            let plan = VectorSlicePlan { parent_vector_id, slice_index, offset, length };
            offset += length;
            plan
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Oxbnn,
    Baseline,
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oxbnn" => Ok(Self::Oxbnn),
            "baseline" => Ok(Self::Baseline),
            other => Err(Error::Usage(format!("unknown policy `{other}` (expected oxbnn|baseline)"))),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Oxbnn => "oxbnn",
            Self::Baseline => "baseline",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub xpe: usize,
    pub pair: usize,
    pub slice: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pass {
    pub index: usize,
    pub assignments: Vec<Assignment>,
}

/// A partial bitcount read out of an XPE: consecutive slices of one pair,
/// available after pass `ready_after` on XPE `xpe`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Psum {
    pub pair: usize,
    pub slices: Range<usize>,
    pub xpe: usize,
    pub ready_after: usize,
}

/// Integer addition of two psums. Ids below `psums.len()` name leaf psums;
/// op `i` produces id `psums.len() + i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReductionOp {
    pub lhs: usize,
    pub rhs: usize,
    pub out: usize,
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PassSchedule {
    pub policy: Policy,
    pub h: usize,
    pub s: usize,
    pub m: usize,
    pub n: usize,
    pub alpha: usize,
    pub passes: Vec<Pass>,
    pub psums: Vec<Psum>,
    pub reduction_ops: Vec<ReductionOp>,
    /// Id holding each pair's final bitcount.
    pub finals: Vec<usize>,
}

fn check_dims(h: usize, s: usize, m: usize, n: usize, alpha: usize) -> Result<()> {
    if [h, s, m, n, alpha].contains(&0) {
        return Err(invalid(format!("schedule dimensions must be positive: h={h} s={s} m={m} n={n} alpha={alpha}")));
    }
    Ok(())
}

/// Pairwise adjacent reduction of each pair's psums, appended level by level.
fn build_reductions(leaves_by_pair: Vec<Vec<usize>>, first_id: usize) -> (Vec<ReductionOp>, Vec<usize>) {
    let mut ops = Vec::new();
    let mut finals = Vec::with_capacity(leaves_by_pair.len());
    for mut level_ids in leaves_by_pair {
        let mut level = 0;
        while level_ids.len() > 1 {
            let mut next = Vec::with_capacity(level_ids.len().div_ceil(2));
            for chunk in level_ids.chunks(2) {
                if let [lhs, rhs] = *chunk {
                    let out = first_id + ops.len();
                    ops.push(ReductionOp { lhs, rhs, out, level });
                    next.push(out);
                } else {
                    next.push(chunk[0]);
                }
            }
            level_ids = next;
            level += 1;
        }
        finals.push(level_ids[0]);
    }
    (ops, finals)
}

fn group_passes(mut assignments: Vec<(usize, Assignment)>) -> Vec<Pass> {
    assignments.sort_by_key(|(pass, a)| (*pass, a.xpe));
    let mut passes: Vec<Pass> = Vec::new();
    for (index, a) in assignments {
        match passes.last_mut() {
            Some(p) if p.index == index => p.assignments.push(a),
            _ => passes.push(Pass { index, assignments: vec![a] }),
        }
    }
    passes
}

/// Every slice of pair `p` runs on XPE `p mod m` in consecutive passes. When
/// a pair needs more than `alpha` slices, its PCA is read out every `alpha`
/// slices and the segment psums are reduced.
pub fn schedule_oxbnn(h: usize, s: usize, m: usize, n: usize, alpha: usize) -> Result<PassSchedule> {
    check_dims(h, s, m, n, alpha)?;
    let k = s.div_ceil(n);
    let mut assignments = Vec::with_capacity(h * k);
    let mut psums = Vec::new();
    let mut leaves = Vec::with_capacity(h);
    for pair in 0..h {
        let (xpe, wave) = (pair % m, pair / m);
        for slice in 0..k {
            assignments.push((wave * k + slice, Assignment { xpe, pair, slice }));
        }
        let mut ids = Vec::new();
        for start in (0..k).step_by(alpha) {
            let end = (start + alpha).min(k);
            ids.push(psums.len());
            psums.push(Psum { pair, slices: start..end, xpe, ready_after: wave * k + end - 1 });
        }
        leaves.push(ids);
    }
    let (reduction_ops, finals) = build_reductions(leaves, psums.len());
    Ok(PassSchedule {
        policy: Policy::Oxbnn,
        h,
        s,
        m,
        n,
        alpha,
        passes: group_passes(assignments),
        psums,
        reduction_ops,
        finals,
    })
}

/// Slice `t` of pair `p` is operation `j = p * k + t`, placed on XPE `j mod m`
/// in pass `j / m`; each produces a psum.
pub fn schedule_baseline(h: usize, s: usize, m: usize, n: usize) -> Result<PassSchedule> {
    check_dims(h, s, m, n, 1)?;
    let k = s.div_ceil(n);
    let mut assignments = Vec::with_capacity(h * k);
    let mut psums = Vec::with_capacity(h * k);
    let mut leaves = Vec::with_capacity(h);
    for pair in 0..h {
        let mut ids = Vec::with_capacity(k);
        for slice in 0..k {
            let j = pair * k + slice;
            let (pass, xpe) = (j / m, j % m);
            assignments.push((pass, Assignment { xpe, pair, slice }));
            ids.push(psums.len());
            psums.push(Psum { pair, slices: slice..slice + 1, xpe, ready_after: pass });
        }
        leaves.push(ids);
    }
    let (reduction_ops, finals) = build_reductions(leaves, psums.len());
    Ok(PassSchedule {
        policy: Policy::Baseline,
        h,
        s,
        m,
        n,
        alpha: 1,
        passes: group_passes(assignments),
        psums,
        reduction_ops,
        finals,
    })
}

pub fn schedule(policy: Policy, h: usize, s: usize, m: usize, n: usize, alpha: usize) -> Result<PassSchedule> {
    match policy {
        Policy::Oxbnn => schedule_oxbnn(h, s, m, n, alpha),
        Policy::Baseline => schedule_baseline(h, s, m, n),
    }
}

/// Functional evaluation of a schedule; returns one bitcount per pair.
pub fn execute_schedule(
    schedule: &PassSchedule,
    inputs: &BinaryMatrix,
    weights: &BinaryMatrix,
) -> Result<Vec<BitcountResult>> {
    for mat in [inputs, weights] {
        if mat.height() != schedule.h {
            return Err(Error::SizeMismatch { expected: schedule.h, actual: mat.height() });
        }
        if mat.width() != schedule.s {
            return Err(Error::SizeMismatch { expected: schedule.s, actual: mat.width() });
        }
    }
    let k = schedule.s.div_ceil(schedule.n);
    let mut slice_results: Vec<Option<BitcountResult>> = vec![None; schedule.h * k];
    for pass in &schedule.passes {
        let mut seen = vec![false; schedule.m];
        for a in &pass.assignments {
            if a.xpe >= schedule.m || std::mem::replace(&mut seen[a.xpe], true) {
                return Err(invalid(format!("pass {} reuses or overflows XPE {}", pass.index, a.xpe)));
            }
            let offset = a.slice * schedule.n;
            let len = schedule.n.min(schedule.s - offset);
            let r = xnor_dot(&inputs.row(a.pair).slice(offset, len)?, &weights.row(a.pair).slice(offset, len)?)?;
            let slot = &mut slice_results[a.pair * k + a.slice];
            if slot.replace(r).is_some() {
                return Err(invalid(format!("slice {} of pair {} scheduled twice", a.slice, a.pair)));
            }
        }
    }
    let mut values: Vec<BitcountResult> = Vec::with_capacity(schedule.psums.len() + schedule.reduction_ops.len());
    for p in &schedule.psums {
        let mut acc: Option<BitcountResult> = None;
        for t in p.slices.clone() {
            let r = slice_results[p.pair * k + t]
                .ok_or_else(|| invalid(format!("slice {t} of pair {} never executed", p.pair)))?;
            acc = Some(acc.map_or(r, |a| a.merge(r)));
        }
        values.push(acc.ok_or_else(|| invalid("empty psum"))?);
    }
    for op in &schedule.reduction_ops {
        if op.out != values.len() || op.lhs >= op.out || op.rhs >= op.out {
            return Err(invalid(format!("malformed reduction {op:?}")));
        }
        values.push(values[op.lhs].merge(values[op.rhs]));
    }
    schedule
        .finals
        .iter()
        .map(|&id| values.get(id).copied().ok_or_else(|| invalid(format!("final id {id} out of range"))))
        .collect()
}

/// Closed-form schedule statistics, matching the explicit schedules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ScheduleSummary {
    pub policy: Policy,
    pub pairs: u64,
    pub slices_per_vector: u64,
    /// Psums per pair: segments for `Oxbnn`, slices for `Baseline`.
    pub psums_per_pair: u64,
    pub passes: u64,
    pub psums: u64,
    pub reduction_ops: u64,
    /// Depth of each pair's reduction tree.
    pub reduction_levels: u64,
}

pub fn summarize(policy: Policy, h: usize, s: usize, m: usize, n: usize, alpha: usize) -> Result<ScheduleSummary> {
    check_dims(h, s, m, n, alpha)?;
    let (h, m) = (h as u64, m as u64);
    let k = s.div_ceil(n) as u64;
    let (psums_per_pair, passes) = match policy {
        Policy::Oxbnn => (k.div_ceil(alpha as u64), h.div_ceil(m) * k),
        Policy::Baseline => (k, (h * k).div_ceil(m)),
    };
    Ok(ScheduleSummary {
        policy,
        pairs: h,
        slices_per_vector: k,
        psums_per_pair,
        passes,
        psums: h * psums_per_pair,
        reduction_ops: h * (psums_per_pair - 1),
        reduction_levels: ceil_log2(psums_per_pair),
    })
}

pub fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        u64::from(64 - (x - 1).leading_zeros())
    }
}

impl PassSchedule {
    pub fn summary(&self) -> Result<ScheduleSummary> {
        summarize(self.policy, self.h, self.s, self.m, self.n, self.alpha)
    }

    /// Line-oriented text form: one line per pass, psum, reduction and final.
    pub fn to_trace(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# policy={} h={} s={} m={} n={} alpha={}",
            self.policy, self.h, self.s, self.m, self.n, self.alpha
        );
        for p in &self.passes {
            let _ = write!(out, "pass {}", p.index);
            for a in &p.assignments {
                let _ = write!(out, " xpe{}:I{}.{}/W{}.{}", a.xpe, a.pair, a.slice, a.pair, a.slice);
            }
            out.push('\n');
        }
        for (id, p) in self.psums.iter().enumerate() {
            let _ = writeln!(
                out,
                "psum {id} pair={} slices={}..{} xpe={} after_pass={}",
                p.pair, p.slices.start, p.slices.end, p.xpe, p.ready_after
            );
        }
        for op in &self.reduction_ops {
            let _ = writeln!(out, "reduce level={} {}+{}->{}", op.level, op.lhs, op.rhs, op.out);
        }
        for (pair, id) in self.finals.iter().enumerate() {
            let _ = writeln!(out, "final pair={pair} id={id}");
        }
        out
    }
}
