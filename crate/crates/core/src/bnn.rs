//! Bit-exact functional model of binarized inference: sign quantization,
//! XNOR dot products with bitcount, threshold activation, and a sliding-window
//! convolution oracle that every other module is checked against.
//!
//! Operands use the `{0,1}` encoding (`-1 -> 0`, `+1 -> 1`). Vectors are
//! packed 64 bits per word so the dot product is a masked XNOR + popcount.

use rand::Rng;

use crate::error::{invalid, Error, Result};

const WORD: usize = 64;

/// A `{0,1}` vector of fixed, non-zero length.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryVector {
    words: Vec<u64>,
    len: usize,
}

impl BinaryVector {
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() {
            return Err(invalid("binary vector must have at least one element"));
        }
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => v.words[i / WORD] |= 1 << (i % WORD),
                other => return Err(invalid(format!("element {i} is {other}, expected 0 or 1"))),
            }
        }
        Ok(v)
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(iter: I) -> Result<Self> {
        let bits: Vec<u8> = iter.into_iter().map(u8::from).collect();
        Self::from_bits(&bits)
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "binary vector must have at least one element");
        Self { words: vec![0; len.div_ceil(WORD)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self::zeros(len);
        v.words.iter_mut().for_each(|w| *w = u64::MAX);
        v.clear_tail();
        v
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = Self::zeros(len);
        v.words.iter_mut().for_each(|w| *w = rng.gen());
        v.clear_tail();
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize) -> u8 {
        assert!(i < self.len, "index {i} out of range for length {}", self.len);
        ((self.words[i / WORD] >> (i % WORD)) & 1) as u8
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD);
        if bit {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn bits(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.bits().collect()
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut v = Self { words: self.words.iter().map(|w| !w).collect(), len: self.len };
        v.clear_tail();
        v
    }

    /// Contiguous sub-vector `[offset, offset + len)`.
    pub fn slice(&self, offset: usize, len: usize) -> Result<Self> {
        if len == 0 || offset + len > self.len {
            return Err(invalid(format!(
                "slice [{offset}, {}) out of range for length {}",
                offset + len,
                self.len
            )));
        }
        let mut out = Self::zeros(len);
        for i in 0..len {
            if self.get(offset + i) == 1 {
                out.set(i, true);
            }
        }
        Ok(out)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }
}

/// A `{-1,+1}` vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipolarVector {
    values: Vec<i8>,
}

impl BipolarVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("bipolar vector must have at least one element"));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !matches!(v, -1 | 1)) {
            return Err(invalid(format!("element {i} is {v}, expected -1 or +1")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Outcome of a bitcount over an XNOR vector of `z_max` bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitcountResult {
    z: usize,
    z_max: usize,
}

impl BitcountResult {
    pub fn new(z: usize, z_max: usize) -> Result<Self> {
        if z_max == 0 {
            return Err(invalid("z_max must be positive"));
        }
        if z > z_max {
            return Err(invalid(format!("bitcount {z} exceeds vector size {z_max}")));
        }
        Ok(Self { z, z_max })
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn z_max(&self) -> usize {
        self.z_max
    }

    /// Sum of two partial bitcounts over disjoint slices.
    pub fn merge(self, other: Self) -> Self {
        Self { z: self.z + other.z, z_max: self.z_max + other.z_max }
    }
}

/// `Q(x) = sign(x)`, with zero mapped to `+1`.
pub fn quantize_sign(x: f64) -> Result<i8> {
    if !x.is_finite() {
        return Err(invalid(format!("cannot quantize non-finite value {x}")));
    }
    Ok(if x >= 0.0 { 1 } else { -1 })
}

pub fn bipolar_to_binary(v: &BipolarVector) -> BinaryVector {
    BinaryVector::from_bools(v.values.iter().map(|&x| x == 1)).expect("validated bipolar vector")
}

pub fn xnor_bit(a: u8, b: u8) -> u8 {
    debug_assert!(a <= 1 && b <= 1);
    u8::from(a == b)
}

/// XNOR the two vectors element-wise and count the ones.
pub fn xnor_dot(input: &BinaryVector, weight: &BinaryVector) -> Result<BitcountResult> {
    if input.len != weight.len {
        return Err(Error::SizeMismatch { expected: input.len, actual: weight.len });
    }
    let mut z = 0usize;
    let full = input.len / WORD;
    for (a, b) in input.words[..full].iter().zip(&weight.words[..full]) {
        z += (!(a ^ b)).count_ones() as usize;
    }
    let rem = input.len % WORD;
    if rem != 0 {
        let mask = (1u64 << rem) - 1;
        z += (!(input.words[full] ^ weight.words[full]) & mask).count_ones() as usize;
    }
    BitcountResult::new(z, input.len)
}

/// The `{-1,+1}` inner product recovered from a `{0,1}` bitcount.
pub fn bipolar_dot_from_bitcount(r: BitcountResult) -> i64 {
    2 * r.z as i64 - r.z_max as i64
}

/// `compare(z, 0.5 * z_max)`: strictly greater than half maps to 1.
pub fn activation_compare(r: BitcountResult) -> u8 {
    u8::from(2 * r.z > r.z_max)
}

/// Row-major `H x S` operand matrix; every row has the same size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: Vec<BinaryVector>,
    cols: usize,
}

impl BinaryMatrix {
    pub fn new(rows: Vec<BinaryVector>) -> Result<Self> {
        let cols = rows.first().map(BinaryVector::len).ok_or_else(|| invalid("matrix needs at least one row"))?;
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::SizeMismatch { expected: cols, actual: r.len() });
        }
        Ok(Self { rows, cols })
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        assert!(rows > 0);
        Self { rows: (0..rows).map(|_| BinaryVector::random(cols, rng)).collect(), cols }
    }

    pub fn rows(&self) -> &[BinaryVector] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &BinaryVector {
        &self.rows[i]
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.cols
    }
}

/// `{0,1}` activation tensor stored height x width x channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    data: Vec<u8>,
}

impl BinaryTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(invalid("tensor dimensions must be positive"));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::SizeMismatch { expected, actual: data.len() });
        }
        if data.iter().any(|&b| b > 1) {
            return Err(invalid("tensor elements must be 0 or 1"));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn random<R: Rng + ?Sized>(height: usize, width: usize, channels: usize, rng: &mut R) -> Self {
        let data = (0..height * width * channels).map(|_| rng.gen_range(0..=1u8)).collect();
        Self { height, width, channels, data }
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> u8 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    /// Element lookup in the zero-padded frame; out-of-bounds reads are 0.
    pub fn get_padded(&self, row: isize, col: isize, ch: usize) -> u8 {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            0
        } else {
            self.get(row as usize, col as usize, ch)
        }
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// `count` filters, each `height x width x channels`, stored filter-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterBank {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    data: Vec<u8>,
}

impl FilterBank {
    pub fn new(count: usize, height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if count == 0 || height == 0 || width == 0 || channels == 0 {
            return Err(invalid("filter dimensions must be positive"));
        }
        let expected = count * height * width * channels;
        if data.len() != expected {
            return Err(Error::SizeMismatch { expected, actual: data.len() });
        }
        if data.iter().any(|&b| b > 1) {
            return Err(invalid("filter elements must be 0 or 1"));
        }
        Ok(Self { count, height, width, channels, data })
    }

    pub fn random<R: Rng + ?Sized>(count: usize, height: usize, width: usize, channels: usize, rng: &mut R) -> Self {
        let data = (0..count * height * width * channels).map(|_| rng.gen_range(0..=1u8)).collect();
        Self { count, height, width, channels, data }
    }

    pub fn get(&self, filter: usize, row: usize, col: usize, ch: usize) -> u8 {
        self.data[((filter * self.height + row) * self.width + col) * self.channels + ch]
    }

    /// One filter flattened rows, then columns, then channels.
    pub fn flatten(&self, filter: usize) -> BinaryVector {
        let len = self.height * self.width * self.channels;
        let start = filter * len;
        BinaryVector::from_bits(&self.data[start..start + len]).expect("validated filter bank")
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// Bitcount outputs of a convolution, stored height x width x filters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvOutput {
    pub height: usize,
    pub width: usize,
    pub filters: usize,
    values: Vec<BitcountResult>,
}

impl ConvOutput {
    pub fn get(&self, row: usize, col: usize, filter: usize) -> BitcountResult {
        self.values[(row * self.width + col) * self.filters + filter]
    }

    pub fn values(&self) -> &[BitcountResult] {
        &self.values
    }
}

/// Sliding-window convolution oracle.
///
/// Evaluated in `{-1,+1}` integer arithmetic and mapped back to a bitcount,
/// so it shares no code path with [`xnor_dot`]. Grouped convolution is
/// inferred when the filter depth divides the input depth: filter `f` reads
/// channel group `f / (count / groups)`.
pub fn conv_reference(input: &BinaryTensor, filters: &FilterBank, stride: usize, padding: usize) -> Result<ConvOutput> {
    if stride == 0 {
        return Err(invalid("stride must be positive"));
    }
    if !input.channels.is_multiple_of(filters.channels) {
        return Err(invalid(format!(
            "filter depth {} does not divide input depth {}",
            filters.channels, input.channels
        )));
    }
    let groups = input.channels / filters.channels;
    if !filters.count.is_multiple_of(groups) {
        return Err(invalid(format!("{} filters cannot be split into {groups} groups", filters.count)));
    }
    let padded_h = input.height + 2 * padding;
    let padded_w = input.width + 2 * padding;
    if filters.height > padded_h || filters.width > padded_w {
        return Err(invalid("kernel larger than padded input"));
    }
    let out_h = (padded_h - filters.height) / stride + 1;
    let out_w = (padded_w - filters.width) / stride + 1;
    let per_group = filters.count / groups;
    let s = filters.height * filters.width * filters.channels;

    let mut values = Vec::with_capacity(out_h * out_w * filters.count);
    for orow in 0..out_h {
        for ocol in 0..out_w {
            for f in 0..filters.count {
                let ch0 = (f / per_group) * filters.channels;
                let mut dot: i64 = 0;
                for kr in 0..filters.height {
                    for kc in 0..filters.width {
                        for ch in 0..filters.channels {
                            let r = (orow * stride + kr) as isize - padding as isize;
                            let c = (ocol * stride + kc) as isize - padding as isize;
                            let x = 2 * input.get_padded(r, c, ch0 + ch) as i64 - 1;
                            let w = 2 * filters.get(f, kr, kc, ch) as i64 - 1;
                            dot += x * w;
                        }
                    }
                }
                values.push(BitcountResult::new(((dot + s as i64) / 2) as usize, s)?);
            }
        }
    }
    Ok(ConvOutput { height: out_h, width: out_w, filters: filters.count, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand::Rng;

    fn hamming(a: &BinaryVector, b: &BinaryVector) -> usize {
        a.bits().zip(b.bits()).filter(|(x, y)| x != y).count()
    }

    #[test]
    fn sign_quantization() {
        assert_eq!(quantize_sign(0.0).unwrap(), 1);
        assert_eq!(quantize_sign(-3.2).unwrap(), -1);
        assert_eq!(quantize_sign(7.0).unwrap(), 1);
        assert!(quantize_sign(f64::NAN).is_err());
        assert!(quantize_sign(f64::INFINITY).is_err());
    }

    #[test]
    fn bipolar_mapping() {
        let v = BipolarVector::new(vec![-1, 1]).unwrap();
        assert_eq!(bipolar_to_binary(&v).to_bits(), vec![0, 1]);
        let v = BipolarVector::new(vec![1, 1, 1]).unwrap();
        assert_eq!(bipolar_to_binary(&v).to_bits(), vec![1, 1, 1]);
        let v = BipolarVector::new(vec![-1, -1]).unwrap();
        assert_eq!(bipolar_to_binary(&v).to_bits(), vec![0, 0]);
        assert!(BipolarVector::new(vec![0, 1]).is_err());
    }

    #[test]
    fn xnor_truth_table() {
        assert_eq!(xnor_bit(1, 1), 1);
        assert_eq!(xnor_bit(0, 1), 0);
        assert_eq!(xnor_bit(1, 0), 0);
        assert_eq!(xnor_bit(0, 0), 1);
    }

    #[test]
    fn rejects_non_binary_bits() {
        assert!(BinaryVector::from_bits(&[0, 2]).is_err());
        assert!(BinaryVector::from_bits(&[]).is_err());
    }

    #[test]
    fn identity_and_complement_dots() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = BinaryVector::random(9, &mut rng);
        assert_eq!(xnor_dot(&w, &w).unwrap().z(), 9);
        assert_eq!(xnor_dot(&w.complement(), &w).unwrap().z(), 0);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let a = BinaryVector::zeros(4);
        let b = BinaryVector::zeros(5);
        assert_eq!(xnor_dot(&a, &b), Err(Error::SizeMismatch { expected: 4, actual: 5 }));
    }

    #[test]
    fn random_64_bit_pair_matches_position_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let a = BinaryVector::random(64, &mut rng);
        let b = BinaryVector::random(64, &mut rng);
        let oracle = a.bits().zip(b.bits()).filter(|(x, y)| x == y).count();
        assert_eq!(xnor_dot(&a, &b).unwrap().z(), oracle);
        assert_eq!(oracle, 64 - hamming(&a, &b));
    }

    #[test]
    fn bipolar_dot_examples() {
        assert_eq!(bipolar_dot_from_bitcount(BitcountResult::new(9, 9).unwrap()), 9);
        assert_eq!(bipolar_dot_from_bitcount(BitcountResult::new(0, 9).unwrap()), -9);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let u: Vec<i8> = (0..32).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let v: Vec<i8> = (0..32).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let direct: i64 = u.iter().zip(&v).map(|(a, b)| (*a as i64) * (*b as i64)).sum();
        let a = bipolar_to_binary(&BipolarVector::new(u).unwrap());
        let b = bipolar_to_binary(&BipolarVector::new(v).unwrap());
        assert_eq!(bipolar_dot_from_bitcount(xnor_dot(&a, &b).unwrap()), direct);
    }

    #[test]
    fn activation_threshold_is_strict() {
        assert_eq!(activation_compare(BitcountResult::new(9, 9).unwrap()), 1);
        assert_eq!(activation_compare(BitcountResult::new(0, 9).unwrap()), 0);
        assert_eq!(activation_compare(BitcountResult::new(5, 10).unwrap()), 0);
        assert_eq!(activation_compare(BitcountResult::new(6, 10).unwrap()), 1);
    }

    #[test]
    fn five_by_five_stride_two_has_four_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = BinaryTensor::random(5, 5, 1, &mut rng);
        let filters = FilterBank::random(1, 3, 3, 1, &mut rng);
        let out = conv_reference(&input, &filters, 2, 0).unwrap();
        assert_eq!((out.height, out.width, out.filters), (2, 2, 1));
    }

    #[test]
    fn identical_window_gives_full_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let filters = FilterBank::random(1, 3, 3, 1, &mut rng);
        let input = BinaryTensor::new(3, 3, 1, filters.data().to_vec()).unwrap();
        let out = conv_reference(&input, &filters, 1, 0).unwrap();
        assert_eq!(out.values().len(), 1);
        assert_eq!(out.get(0, 0, 0).z(), 9);
    }

    #[test]
    fn conv_shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = BinaryTensor::random(2, 2, 3, &mut rng);
        let filters = FilterBank::random(1, 3, 3, 3, &mut rng);
        assert!(conv_reference(&input, &filters, 1, 0).is_err());
        assert!(conv_reference(&input, &filters, 1, 1).is_ok());
        let filters = FilterBank::random(1, 1, 1, 2, &mut rng);
        assert!(conv_reference(&input, &filters, 1, 0).is_err());
        assert!(conv_reference(&input, &FilterBank::random(1, 1, 1, 3, &mut rng), 0, 0).is_err());
    }

    /// Flattens a zero-padded window by direct indexing (rows, columns, channels).
    fn window(input: &BinaryTensor, r0: isize, c0: isize, kh: usize, kw: usize, ch0: usize, depth: usize) -> BinaryVector {
        let mut bits = Vec::new();
        for r in 0..kh {
            for c in 0..kw {
                for ch in 0..depth {
                    bits.push(input.get_padded(r0 + r as isize, c0 + c as isize, ch0 + ch));
                }
            }
        }
        BinaryVector::from_bits(&bits).unwrap()
    }

    #[test]
    fn conv_windows_match_xnor_dot_up_to_8x8() {
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        for size in 3..=8 {
            for (stride, padding) in [(1, 0), (2, 0), (1, 1), (2, 1)] {
                let input = BinaryTensor::random(size, size, 2, &mut rng);
                let filters = FilterBank::random(3, 3, 3, 2, &mut rng);
                let out = conv_reference(&input, &filters, stride, padding).unwrap();
                for r in 0..out.height {
                    for c in 0..out.width {
                        let win = window(&input, (r * stride) as isize - padding as isize, (c * stride) as isize - padding as isize, 3, 3, 0, 2);
                        for f in 0..3 {
                            assert_eq!(xnor_dot(&win, &filters.flatten(f)).unwrap(), out.get(r, c, f));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn depthwise_conv_uses_own_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let input = BinaryTensor::random(6, 6, 4, &mut rng);
        let filters = FilterBank::random(4, 3, 3, 1, &mut rng);
        let out = conv_reference(&input, &filters, 1, 1).unwrap();
        for r in 0..out.height {
            for c in 0..out.width {
                for f in 0..4 {
                    let win = window(&input, r as isize - 1, c as isize - 1, 3, 3, f, 1);
                    assert_eq!(xnor_dot(&win, &filters.flatten(f)).unwrap(), out.get(r, c, f));
                }
            }
        }
    }

    fn bits(max: usize) -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
        (1..=max).prop_flat_map(|n| (proptest::collection::vec(0..=1u8, n), proptest::collection::vec(0..=1u8, n)))
    }

    proptest! {
        #[test]
        fn dot_is_size_minus_hamming((a, b) in bits(300)) {
            let va = BinaryVector::from_bits(&a).unwrap();
            let vb = BinaryVector::from_bits(&b).unwrap();
            let z = xnor_dot(&va, &vb).unwrap();
            prop_assert_eq!(z.z(), a.len() - hamming(&va, &vb));
            prop_assert_eq!(z, xnor_dot(&vb, &va).unwrap());
        }

        #[test]
        fn bipolar_identity((a, b) in bits(300)) {
            let u: Vec<i8> = a.iter().map(|&x| if x == 1 { 1 } else { -1 }).collect();
            let v: Vec<i8> = b.iter().map(|&x| if x == 1 { 1 } else { -1 }).collect();
            let direct: i64 = u.iter().zip(&v).map(|(x, y)| (*x as i64) * (*y as i64)).sum();
            let z = xnor_dot(&bipolar_to_binary(&BipolarVector::new(u).unwrap()), &bipolar_to_binary(&BipolarVector::new(v).unwrap())).unwrap();
            prop_assert_eq!(2 * z.z() as i64 - a.len() as i64, direct);
        }

        #[test]
        fn slices_partition_the_count((a, b) in bits(200), cut in 0.0f64..1.0) {
            let va = BinaryVector::from_bits(&a).unwrap();
            let vb = BinaryVector::from_bits(&b).unwrap();
            let k = ((a.len() as f64 * cut) as usize).clamp(1, a.len());
            let head = xnor_dot(&va.slice(0, k).unwrap(), &vb.slice(0, k).unwrap()).unwrap();
            let total = if k < a.len() {
                let tail = xnor_dot(&va.slice(k, a.len() - k).unwrap(), &vb.slice(k, a.len() - k).unwrap()).unwrap();
                head.merge(tail)
            } else {
                head
            };
            prop_assert_eq!(total, xnor_dot(&va, &vb).unwrap());
        }
    }
}
