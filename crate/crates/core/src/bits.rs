//! Bitstrings packed into `u64`: bit `i` holds qubit `i`.
//!
//! Text form puts qubit 0 in the leftmost character.

use crate::{Error, Result};

pub const MAX_QUBITS: usize = 64;

#[inline]
pub fn parity(x: u64) -> u32 {
    x.count_ones() & 1
}

/// `(-1)^{|a ∧ b|}` as a float.
#[inline]
pub fn sign(a: u64, b: u64) -> f64 {
    if parity(a & b) == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub fn hamming_weight(x: u64) -> u32 {
    x.count_ones()
}

#[inline]
pub fn hamming_distance(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

/// All-ones mask over the first `n` qubits.
#[inline]
pub fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub fn format_bits(x: u64, n: usize) -> String {
    (0..n).map(|i| if x >> i & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn parse_bits(s: &str) -> Result<u64> {
    if s.len() > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!("bitstring longer than {MAX_QUBITS}: {s:?}")));
    }
    s.chars().enumerate().try_fold(0u64, |acc, (i, ch)| match ch {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << i),
        _ => Err(Error::InvalidArgument(format!("bad character {ch:?} in bitstring {s:?}"))),
    })
}

/// Iterator over the set bit positions of a mask, lowest first.
pub fn indices(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}
