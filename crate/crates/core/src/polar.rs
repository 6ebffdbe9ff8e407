// SPDX-License-Identifier: Apache-2.0

//! Golden-model polar encoding `x = u B_N F^{(x)n}` over GF(2).
//!
//! Everything downstream (netlist, simulator, testbench vectors) is checked
//! against [`encode_reference`], which in turn is checked against the explicit
//! generator-matrix product [`encode_via_matrix`].

use std::fmt;
use std::ops::BitXor;

use thiserror::Error;

/// Largest code length for which the explicit matrix oracle is built.
pub const MATRIX_ORACLE_MAX: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolarError {
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("index {index} out of range for {bits}-bit reversal")]
    IndexOutOfRange { index: usize, bits: u32 },
    #[error("expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("matrix oracle is limited to N <= {MATRIX_ORACLE_MAX} (got {0})")]
    OracleTooLarge(usize),
    #[error("bit value {0} is not 0 or 1")]
    NotABit(u8),
}

/// An ordered sequence of GF(2) values.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector(Vec<bool>);

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![true; len])
    }

    /// One-hot vector with a 1 at `index`.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[index] = true;
        v
    }

    /// Builds a vector from 0/1 bytes.
    pub fn from_bits(bits: &[u8]) -> Result<Self, PolarError> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(PolarError::NotABit(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }

    /// Low `len` bits of `value`, bit `i` at position `i`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        Self((0..len).map(|i| i < 64 && (value >> i) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        self.0[i] = bit;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }
}

impl From<Vec<bool>> for BitVector {
    fn from(bits: Vec<bool>) -> Self {
        Self(bits)
    }
}

impl FromIterator<bool> for BitVector {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl BitXor for &BitVector {
    type Output = BitVector;

    fn bitxor(self, rhs: &BitVector) -> BitVector {
        assert_eq!(self.len(), rhs.len(), "xor of unequal lengths");
        self.0.iter().zip(&rhs.0).map(|(a, b)| a ^ b).collect()
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector[")?;
        for &b in &self.0 {
            write!(f, "{}", b as u8)?;
        }
        write!(f, "]")
    }
}

/// Code length `N` and stage count `n = log2 N` of the golden model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeParams {
    n: usize,
}

impl CodeParams {
    /// Any power of two `N >= 2`. The hardware generator additionally
    /// requires `N >= 8`, enforced by [`crate::DesignPoint`].
    pub fn new(n: usize) -> Result<Self, PolarError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(PolarError::NotPowerOfTwo(n));
        }
        Ok(Self { n })
    }

    /// Block length; never zero.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn stages(&self) -> u32 {
        self.n.trailing_zeros()
    }
}

/// Reverses the low `bits` bits of `index`.
pub fn bitrev_index(index: usize, bits: u32) -> Result<usize, PolarError> {
    if bits < usize::BITS && index >> bits != 0 {
        return Err(PolarError::IndexOutOfRange { index, bits });
    }
    if bits == 0 {
        return Ok(0);
    }
    Ok(index.reverse_bits() >> (usize::BITS - bits))
}

/// `output[i] = v[bitrev(i)]`.
pub fn bitrev_permute(v: &BitVector) -> Result<BitVector, PolarError> {
    let len = v.len();
    if !len.is_power_of_two() {
        return Err(PolarError::NotPowerOfTwo(len));
    }
    let bits = len.trailing_zeros();
    Ok((0..len)
        .map(|i| v.get(bitrev_index(i, bits).expect("index in range")))
        .collect())
}

/// In-place `v <- v F^{(x)n}`: butterfly layers with strides `N/2, ..., 1`,
/// the low index of each pair receiving the XOR.
pub(crate) fn kronecker_butterflies(bits: &mut [bool]) {
    let len = bits.len();
    let mut stride = len / 2;
    while stride > 0 {
        for block in (0..len).step_by(2 * stride) {
            for j in block..block + stride {
                bits[j] ^= bits[j + stride];
            }
        }
        stride /= 2;
    }
}

/// Fast encoder: bit-reversal followed by `n` butterfly layers, `O(N log N)`.
pub fn encode_reference(u: &BitVector, params: CodeParams) -> Result<BitVector, PolarError> {
    check_len(u, params)?;
    let mut x = bitrev_permute(u)?.0;
    kronecker_butterflies(&mut x);
    Ok(BitVector(x))
}

/// Dense GF(2) matrix, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BitMatrix {
    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.set(i, i, true);
        }
        m
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &b) in row.iter().enumerate() {
                m.set(i, j, b != 0);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, bit: bool) {
        self.data[r * self.cols + c] = bit;
    }

    pub fn row(&self, r: usize) -> BitVector {
        self.data[r * self.cols..(r + 1) * self.cols]
            .to_vec()
            .into()
    }

    pub fn kronecker(&self, rhs: &BitMatrix) -> BitMatrix {
        let mut out = BitMatrix::zeros(self.rows * rhs.rows, self.cols * rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self.get(i, j) {
                    continue;
                }
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        out.set(i * rhs.rows + k, j * rhs.cols + l, rhs.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// Product over GF(2).
    pub fn mul(&self, rhs: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch");
        let mut out = BitMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if self.get(i, k) {
                    for j in 0..rhs.cols {
                        let v = out.get(i, j) ^ rhs.get(k, j);
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }

    /// Row vector times matrix over GF(2).
    pub fn left_mul(&self, u: &BitVector) -> BitVector {
        assert_eq!(u.len(), self.rows, "dimension mismatch");
        (0..self.cols)
            .map(|j| (0..self.rows).fold(false, |acc, i| acc ^ (u.get(i) & self.get(i, j))))
            .collect()
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            writeln!(f, "{:?}", self.row(r))?;
        }
        Ok(())
    }
}

/// The 2x2 kernel `F = [[1, 0], [1, 1]]`.
pub fn kernel() -> BitMatrix {
    BitMatrix::from_rows(&[&[1, 0], &[1, 1]])
}

/// Explicit `G_N = B_N F^{(x)n}`; refuses `N > 64`.
pub fn generator_matrix(params: CodeParams) -> Result<BitMatrix, PolarError> {
    let n = params.len();
    if n > MATRIX_ORACLE_MAX {
        return Err(PolarError::OracleTooLarge(n));
    }
    let f = kernel();
    let mut power = f.clone();
    for _ in 1..params.stages() {
        power = power.kronecker(&f);
    }
    let mut reversal = BitMatrix::zeros(n, n);
    for i in 0..n {
        reversal.set(i, bitrev_index(i, params.stages())?, true);
    }
    Ok(reversal.mul(&power))
}

/// `u G_N` from the explicit matrix. Independent oracle for [`encode_reference`].
pub fn encode_via_matrix(u: &BitVector, params: CodeParams) -> Result<BitVector, PolarError> {
    check_len(u, params)?;
    Ok(generator_matrix(params)?.left_mul(u))
}

fn check_len(u: &BitVector, params: CodeParams) -> Result<(), PolarError> {
    if u.len() != params.len() {
        return Err(PolarError::LengthMismatch {
            expected: params.len(),
            actual: u.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(n: usize) -> CodeParams {
        CodeParams::new(n).unwrap()
    }

    /// `G_N[i][j] = 1` iff the bits of `j` are a subset of the bits of
    /// `bitrev(i)`: the closed form of a Kronecker power of a lower
    /// triangular all-ones kernel, composed with the row reversal.
    fn subset_rule(n: usize, i: usize, j: usize) -> bool {
        let r = bitrev_index(i, n.trailing_zeros()).unwrap();
        r & j == j
    }

    #[test]
    fn bitrev_index_examples() {
        assert_eq!(bitrev_index(0, 3), Ok(0));
        assert_eq!(bitrev_index(1, 3), Ok(4));
        assert_eq!(bitrev_index(6, 3), Ok(3));
        assert_eq!(
            bitrev_index(8, 3),
            Err(PolarError::IndexOutOfRange { index: 8, bits: 3 })
        );
        assert_eq!(bitrev_index(0, 0), Ok(0));
        assert!(bitrev_index(1, 0).is_err());
    }

    #[test]
    fn bitrev_permute_examples() {
        let v: BitVector = (0..8).map(|i| i == 4).collect();
        // [a0..a7] -> [a0,a4,a2,a6,a1,a5,a3,a7]: a4 lands at position 1.
        assert_eq!(bitrev_permute(&v).unwrap(), BitVector::unit(8, 1));
        let two = BitVector::from_bits(&[0, 1]).unwrap();
        assert_eq!(bitrev_permute(&two).unwrap(), two);
        assert_eq!(
            bitrev_permute(&BitVector::zeros(6)),
            Err(PolarError::NotPowerOfTwo(6))
        );
    }

    #[test]
    fn bitrev_permute_positions() {
        // Track every index through the permutation by encoding it in the data.
        for i in 0..8 {
            let out = bitrev_permute(&BitVector::unit(8, i)).unwrap();
            let expected = [0, 4, 2, 6, 1, 5, 3, 7]
                .iter()
                .position(|&s| s == i)
                .unwrap();
            assert_eq!(out, BitVector::unit(8, expected));
        }
    }

    #[test]
    fn encode_examples() {
        assert_eq!(
            encode_reference(&BitVector::unit(8, 0), params(8)).unwrap(),
            BitVector::unit(8, 0)
        );
        assert_eq!(
            encode_reference(&BitVector::zeros(32), params(32)).unwrap(),
            BitVector::zeros(32)
        );
        assert_eq!(
            encode_reference(&BitVector::ones(8), params(8)).unwrap(),
            BitVector::unit(8, 7)
        );
        assert_eq!(
            encode_reference(&BitVector::zeros(7), params(8)),
            Err(PolarError::LengthMismatch {
                expected: 8,
                actual: 7
            })
        );
    }

    #[test]
    fn generator_matrix_examples() {
        assert_eq!(generator_matrix(params(2)).unwrap(), kernel());
        let g8 = generator_matrix(params(8)).unwrap();
        assert_eq!(g8.mul(&g8), BitMatrix::identity(8));
        assert_eq!(g8.row(7).weight(), 8);
        assert_eq!(
            generator_matrix(params(128)),
            Err(PolarError::OracleTooLarge(128))
        );
    }

    #[test]
    fn generator_matrix_matches_subset_rule() {
        for n in [2usize, 4, 8, 16, 32, 64] {
            let g = generator_matrix(params(n)).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(g.get(i, j), subset_rule(n, i, j), "N={n} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn encode_via_matrix_examples() {
        let g4 = generator_matrix(params(4)).unwrap();
        assert_eq!(
            encode_via_matrix(&BitVector::unit(4, 1), params(4)).unwrap(),
            g4.row(1)
        );
        assert_eq!(
            encode_via_matrix(&BitVector::unit(8, 7), params(8)).unwrap(),
            BitVector::ones(8)
        );
        for value in 0..256u64 {
            let u = BitVector::from_u64(value, 8);
            assert_eq!(
                encode_via_matrix(&u, params(8)).unwrap(),
                encode_reference(&u, params(8)).unwrap()
            );
        }
    }

    #[test]
    fn from_bits_rejects_non_binary() {
        assert_eq!(BitVector::from_bits(&[0, 2]), Err(PolarError::NotABit(2)));
        assert_eq!(
            BitVector::from_bits(&[1, 0, 1]).unwrap().to_bits(),
            vec![1, 0, 1]
        );
    }

    fn bits(len: usize) -> impl Strategy<Value = BitVector> {
        proptest::collection::vec(any::<bool>(), len).prop_map(BitVector::from)
    }

    fn sized_pair() -> impl Strategy<Value = (BitVector, BitVector)> {
        (1u32..=12).prop_flat_map(|k| (bits(1 << k), bits(1 << k)))
    }

    proptest! {
        #[test]
        fn encode_is_an_involution(u in (1u32..=12).prop_flat_map(|k| bits(1 << k))) {
            let p = params(u.len());
            let x = encode_reference(&u, p).unwrap();
            prop_assert_eq!(encode_reference(&x, p).unwrap(), u);
        }

        #[test]
        fn encode_is_linear((u, v) in sized_pair()) {
            let p = params(u.len());
            let lhs = encode_reference(&(&u ^ &v), p).unwrap();
            let rhs = &encode_reference(&u, p).unwrap() ^ &encode_reference(&v, p).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn bitrev_is_an_involution(u in (0u32..=10).prop_flat_map(|k| bits(1 << k))) {
            prop_assert_eq!(bitrev_permute(&bitrev_permute(&u).unwrap()).unwrap(), u);
        }

        #[test]
        fn matrix_oracle_agrees(u in (1u32..=6).prop_flat_map(|k| bits(1 << k))) {
            let p = params(u.len());
            prop_assert_eq!(encode_via_matrix(&u, p).unwrap(), encode_reference(&u, p).unwrap());
        }
    }
}
