//! Binary expansions, k-binary approximation and approximation nets.
//!
//! The k-binary approximation of `c` keeps the `k` most significant binary
//! digits of `c` and zeroes the rest, so its relative error is at most
//! `2^(1-k)`. The approximation net `S_k(M)` collects the approximations of
//! every `c` in `1..=M`; it is exactly the set of integers in `1..=M` whose
//! binary expansion spans at most `k` digits below and including the leading one.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of the leading binary digit, `floor(log2 c)`, for `c >= 1`.
#[inline]
fn leading_position(c: u64) -> u32 {
    63 - c.leading_zeros()
}

/// Binary digits `a_0, a_1, ...` of a positive integer, least significant first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryDigits(Vec<u8>);

impl BinaryDigits {
    pub fn of(c: u64) -> Result<Self> {
        if c == 0 {
            return Err(Error::invalid("binary expansion needs a positive integer"));
        }
        let top = leading_position(c);
        Ok(Self((0..=top).map(|i| ((c >> i) & 1) as u8).collect()))
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn value(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &a)| u64::from(a) << i)
            .sum()
    }

    /// Most significant digit first, left-padded with zeros to `width`.
    pub fn to_padded_string(&self, width: usize) -> String {
        let s: String = self.0.iter().rev().map(|&a| char::from(b'0' + a)).collect();
        format!("{s:0>width$}")
    }
}

impl fmt::Display for BinaryDigits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_padded_string(0))
    }
}

/// Keeps the digits of `c` at positions `>= floor(log2 c) - k + 1`.
pub fn k_binary_approx(c: u64, k: u32) -> Result<u64> {
    if c == 0 {
        return Err(Error::invalid("k-binary approximation needs c >= 1"));
    }
    if k == 0 {
        return Err(Error::invalid("k-binary approximation needs k >= 1"));
    }
    let top = leading_position(c);
    if top < k {
        return Ok(c);
    }
    let dropped = top + 1 - k;
    Ok((c >> dropped) << dropped)
}

/// Sorted approximation net `S_k(M)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxNet {
    max: u64,
    k: u32,
    elements: Vec<u64>,
}

/// Direction for [`neighbor`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborMode {
    /// Largest element `<= m`.
    Below,
    /// Smallest element `> m`.
    Above,
}

impl ApproxNet {
    pub fn max(&self) -> u64 {
        self.max
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, c: u64) -> bool {
        self.elements.binary_search(&c).is_ok()
    }

    /// Rows of `(binary, decimal)` in descending order, binary padded to the
    /// width of `max`.
    pub fn table(&self) -> Vec<(String, u64)> {
        let width = leading_position(self.max) as usize + 1;
        self.elements
            .iter()
            .rev()
            .map(|&e| {
                let digits = BinaryDigits::of(e).expect("net elements are positive");
                (digits.to_padded_string(width), e)
            })
            .collect()
    }
}

/// Builds `S_k(M)` directly: for each leading position, every `k`-digit
/// prefix shifted into place, kept when `<= M`.
pub fn build_net(max: u64, k: u32) -> Result<ApproxNet> {
    if max == 0 || k == 0 {
        return Err(Error::invalid("approximation net needs M >= 1 and k >= 1"));
    }
    let mut elements = Vec::new();
    for top in 0..=leading_position(max) {
        if top < k {
            // fewer than k digits: every integer with this leading position
            let lo = 1u64 << top;
            let hi = ((lo << 1) - 1).min(max);
            elements.extend(lo..=hi);
        } else {
            let shift = top + 1 - k;
            let prefixes = (1u64 << (k - 1))..(1u64 << k);
            elements.extend(prefixes.map(|p| p << shift).take_while(|&v| v <= max));
        }
    }
    Ok(ApproxNet { max, k, elements })
}

/// `max(1, floor(log2(log2 M)))`.
pub fn default_k(max: u64) -> Result<u32> {
    if max < 2 {
        return Err(Error::invalid(format!("default k needs M >= 2, got {max}")));
    }
    let ll = (max as f64).log2().log2().floor();
    Ok((ll as u32).max(1))
}

/// Nearest net element to `m` in the given direction; `None` when nothing
/// lies strictly above `m`.
pub fn neighbor(net: &ApproxNet, m: u64, mode: NeighborMode) -> Option<u64> {
    let e = &net.elements;
    match mode {
        NeighborMode::Below => {
            let idx = e.partition_point(|&v| v <= m);
            idx.checked_sub(1).map(|i| e[i])
        }
        NeighborMode::Above => e.get(e.partition_point(|&v| v <= m)).copied(),
    }
}
