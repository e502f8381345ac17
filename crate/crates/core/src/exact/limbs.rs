//! Fixed-width little-endian u64 limb arithmetic for the convolution buffers.

use std::ops::Range;

use num_bigint::BigUint;

/// `out += w * inp`, with `out` at least as wide as `inp` and wide enough for the result.
#[inline]
pub(crate) fn mul_add(out: &mut [u64], inp: &[u64], w: u64) {
    let w = w as u128;
    let mut carry: u128 = 0;
    let (head, tail) = out.split_at_mut(inp.len());
    for (o, &i) in head.iter_mut().zip(inp) {
        let t = *o as u128 + w * i as u128 + carry;
        *o = t as u64;
        carry = t >> 64;
    }
    for o in tail {
        if carry == 0 {
            break;
        }
        let t = *o as u128 + carry;
        *o = t as u64;
        carry = t >> 64;
    }
    debug_assert_eq!(carry, 0, "limb buffer too narrow");
}

pub(crate) fn to_biguint(limbs: &[u64]) -> BigUint {
    let bytes: Vec<u8> = limbs.iter().flat_map(|l| l.to_le_bytes()).collect();
    BigUint::from_bytes_le(&bytes)
}

/// Sum of the entries with indices in `range`, each `width` limbs wide.
pub(crate) fn sum_entries(data: &[u64], width: usize, range: Range<usize>) -> BigUint {
    if range.is_empty() {
        return BigUint::default();
    }
    // column sums fit in u128 for far more than 2^60 entries
    let mut acc = vec![0u128; width];
    for entry in data[range.start * width..range.end * width].chunks_exact(width) {
        for (a, &l) in acc.iter_mut().zip(entry) {
            *a += l as u128;
        }
    }
    let mut out = Vec::with_capacity(width + 2);
    let mut carry: u128 = 0;
    for a in acc {
        let t = a + carry;
        out.push(t as u64);
        carry = t >> 64;
    }
    while carry > 0 {
        out.push(carry as u64);
        carry >>= 64;
    }
    to_biguint(&out)
}
