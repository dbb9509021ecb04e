//! In-place fast Walsh–Hadamard transform (unnormalized).
//!
//! `out[x] = Σ_w in[w] · (-1)^{|w ∧ x|}`. Applying it twice scales by `len`.

use std::ops::{Add, Sub};

use rayon::prelude::*;

/// Below this length the transform runs on the calling thread.
const PAR_THRESHOLD: usize = 1 << 16;

pub fn fwht<T>(data: &mut [T])
where
    T: Copy + Send + Sync + Add<Output = T> + Sub<Output = T>,
{
    let len = data.len();
    assert!(len.is_power_of_two(), "WHT length must be a power of two, got {len}");
    let mut half = 1;
    while half < len {
        if len < PAR_THRESHOLD {
            data.chunks_mut(2 * half).for_each(|c| butterfly(c, half));
        } else if half < len / 64 {
            data.par_chunks_mut(2 * half).for_each(|c| butterfly(c, half));
        } else {
            // few wide blocks: parallelize inside each block
            for c in data.chunks_mut(2 * half) {
                let (lo, hi) = c.split_at_mut(half);
                lo.par_iter_mut().zip(hi.par_iter_mut()).for_each(|(a, b)| {
                    let (x, y) = (*a, *b);
                    *a = x + y;
                    *b = x - y;
                });
            }
        }
        half *= 2;
    }
}

#[inline]
fn butterfly<T>(chunk: &mut [T], half: usize)
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    let (lo, hi) = chunk.split_at_mut(half);
    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = x + y;
        *b = x - y;
    }
}
