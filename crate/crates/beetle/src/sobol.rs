//! Sobol low-discrepancy sequence over the unit hypercube.
//!
//! Points are produced in gray-code order starting from the origin, using the
//! Joe–Kuo primitive polynomials and initial direction numbers for the first
//! 64 dimensions. This matches the widely used unscrambled Sobol construction,
//! so the first 2-D points are (0,0), (0.5,0.5), (0.75,0.25), (0.25,0.75), …

use crate::error::{Error, Result};

/// Highest dimension the built-in direction-number table covers.
pub const SOBOL_MAX_DIMS: usize = 64;

/// Fixed-point resolution of each coordinate; 52 bits fit exactly in an f64.
const SOBOL_BITS: usize = 52;

/// (primitive polynomial, initial m-values) per dimension beyond the first.
///
/// The polynomial encoding keeps every coefficient bit, e.g. x^3 + x + 1 is
/// 0b1011 = 11. The first dimension needs no entry: all its m-values are 1.
const JOE_KUO: [(u32, &[u64]); SOBOL_MAX_DIMS - 1] = [
    (3, &[1]),
    (7, &[1, 3]),
    (11, &[1, 3, 1]),
    (13, &[1, 1, 1]),
    (19, &[1, 1, 3, 3]),
    (25, &[1, 3, 5, 13]),
    (37, &[1, 1, 5, 5, 17]),
    (41, &[1, 1, 5, 5, 5]),
    (47, &[1, 1, 7, 11, 19]),
    (55, &[1, 1, 5, 1, 1]),
    (59, &[1, 1, 1, 3, 11]),
    (61, &[1, 3, 5, 5, 31]),
    (67, &[1, 3, 3, 9, 7, 49]),
    (91, &[1, 1, 1, 15, 21, 21]),
    (97, &[1, 3, 1, 13, 27, 49]),
    (103, &[1, 1, 1, 15, 7, 5]),
    (109, &[1, 3, 1, 15, 13, 25]),
    (115, &[1, 1, 5, 5, 19, 61]),
    (131, &[1, 3, 7, 11, 23, 15, 103]),
    (137, &[1, 3, 7, 13, 13, 15, 69]),
    (143, &[1, 1, 3, 13, 7, 35, 63]),
    (145, &[1, 3, 5, 9, 1, 25, 53]),
    (157, &[1, 3, 1, 13, 9, 35, 107]),
    (167, &[1, 3, 1, 5, 27, 61, 31]),
    (171, &[1, 1, 5, 11, 19, 41, 61]),
    (185, &[1, 3, 5, 3, 3, 13, 69]),
    (191, &[1, 1, 7, 13, 1, 19, 1]),
    (193, &[1, 3, 7, 5, 13, 19, 59]),
    (203, &[1, 1, 3, 9, 25, 29, 41]),
    (211, &[1, 3, 5, 13, 23, 1, 55]),
    (213, &[1, 3, 7, 3, 13, 59, 17]),
    (229, &[1, 3, 1, 3, 5, 53, 69]),
    (239, &[1, 1, 5, 5, 23, 33, 13]),
    (241, &[1, 1, 7, 7, 1, 61, 123]),
    (247, &[1, 1, 7, 9, 13, 61, 49]),
    (253, &[1, 3, 3, 5, 3, 55, 33]),
    (285, &[1, 3, 1, 15, 31, 13, 49, 245]),
    (299, &[1, 3, 5, 15, 31, 59, 63, 97]),
    (301, &[1, 3, 1, 11, 11, 11, 77, 249]),
    (333, &[1, 3, 1, 11, 27, 43, 71, 9]),
    (351, &[1, 1, 7, 15, 21, 11, 81, 45]),
    (355, &[1, 3, 7, 3, 25, 31, 65, 79]),
    (357, &[1, 3, 1, 1, 19, 11, 3, 205]),
    (361, &[1, 1, 5, 9, 19, 21, 29, 157]),
    (369, &[1, 3, 7, 11, 1, 33, 89, 185]),
    (391, &[1, 3, 3, 3, 15, 9, 79, 71]),
    (397, &[1, 3, 7, 11, 15, 39, 119, 27]),
    (425, &[1, 1, 3, 1, 11, 31, 97, 225]),
    (451, &[1, 1, 1, 3, 23, 43, 57, 177]),
    (463, &[1, 3, 7, 7, 17, 17, 37, 71]),
    (487, &[1, 3, 1, 5, 27, 63, 123, 213]),
    (501, &[1, 1, 3, 5, 11, 43, 53, 133]),
    (529, &[1, 3, 5, 5, 29, 17, 47, 173, 479]),
    (539, &[1, 3, 3, 11, 3, 1, 109, 9, 69]),
    (545, &[1, 1, 1, 5, 17, 39, 23, 5, 343]),
    (557, &[1, 3, 1, 5, 25, 15, 31, 103, 499]),
    (563, &[1, 1, 1, 11, 11, 17, 63, 105, 183]),
    (601, &[1, 1, 5, 11, 9, 29, 97, 231, 363]),
    (607, &[1, 1, 5, 15, 19, 45, 41, 7, 383]),
    (617, &[1, 3, 7, 7, 31, 19, 83, 137, 221]),
    (623, &[1, 1, 1, 3, 23, 15, 111, 223, 83]),
    (631, &[1, 1, 5, 13, 31, 15, 55, 25, 161]),
    (637, &[1, 1, 3, 13, 25, 47, 39, 87, 257]),
];

/// Iterator-style generator for Sobol points in `dims` dimensions.
pub struct SobolSequence {
    v: Vec<[u64; SOBOL_BITS]>,
    x: Vec<u64>,
    emitted: u64,
}

impl SobolSequence {
    pub fn new(dims: usize) -> Result<Self> {
        if dims == 0 || dims > SOBOL_MAX_DIMS {
            return Err(Error::Config(format!(
                "sobol sampler supports 1..={SOBOL_MAX_DIMS} dimensions, got {dims}"
            )));
        }
        let mut v = Vec::with_capacity(dims);
        // First dimension: every m-value is 1, i.e. plain van der Corput in base 2.
        let mut first = [0u64; SOBOL_BITS];
        for (k, slot) in first.iter_mut().enumerate() {
            *slot = 1u64 << (SOBOL_BITS - 1 - k);
        }
        v.push(first);
        for &(poly, m_init) in JOE_KUO.iter().take(dims - 1) {
            v.push(direction_numbers(poly, m_init));
        }
        Ok(SobolSequence {
            v,
            x: vec![0; dims],
            emitted: 0,
        })
    }

    /// Number of dimensions per point.
    pub fn dims(&self) -> usize {
        self.x.len()
    }

    /// Next point of the sequence; the first call returns the origin.
    pub fn next_point(&mut self) -> Vec<f64> {
        if self.emitted > 0 {
            let j = self.emitted.trailing_zeros() as usize;
            for (xi, vi) in self.x.iter_mut().zip(&self.v) {
                *xi ^= vi[j];
            }
        }
        self.emitted += 1;
        let scale = 1.0 / (1u64 << SOBOL_BITS) as f64;
        self.x.iter().map(|&bits| bits as f64 * scale).collect()
    }

    /// Convenience: the first `n` points in `dims` dimensions.
    pub fn points(dims: usize, n: usize) -> Result<Vec<Vec<f64>>> {
        let mut seq = SobolSequence::new(dims)?;
        Ok((0..n).map(|_| seq.next_point()).collect())
    }
}

/// Expand one dimension's initial m-values into direction numbers for all bits.
fn direction_numbers(poly: u32, m_init: &[u64]) -> [u64; SOBOL_BITS] {
    let degree = (32 - poly.leading_zeros() - 1) as usize;
    debug_assert_eq!(m_init.len(), degree);
    let mut m = [0u64; SOBOL_BITS];
    m[..degree].copy_from_slice(m_init);
    for k in degree..SOBOL_BITS {
        // m_k = 2^s m_{k-s} XOR m_{k-s} XOR sum_i a_i 2^i m_{k-i} over the
        // polynomial's interior coefficients a_1..a_{s-1}.
        let mut mk = (m[k - degree] << degree) ^ m[k - degree];
        for i in 1..degree {
            if (poly >> (degree - i)) & 1 == 1 {
                mk ^= m[k - i] << i;
            }
        }
        m[k] = mk;
    }
    let mut v = [0u64; SOBOL_BITS];
    for k in 0..SOBOL_BITS {
        v[k] = m[k] << (SOBOL_BITS - 1 - k);
    }
    v
}
