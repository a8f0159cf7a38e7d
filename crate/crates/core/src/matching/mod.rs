//! Longest common substring `M_n(x, y)` of two equal-length prefixes.
//!
//! [`lcs_exact`] builds a suffix automaton of `x` and streams `y` through
//! it, which is linear in `n` for a fixed alphabet. [`lcs_bruteforce`] is
//! the quadratic diagonal scan used as an oracle.

mod automaton;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Symbol;
use automaton::{Dense, Sparse, SuffixAutomaton, DENSE_MAX_ALPHABET};

/// Input guard for the quadratic oracle.
pub const BRUTEFORCE_MAX_LEN: usize = 4096;

/// `M_n` together with one witnessing occurrence in each sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub length: usize,
    pub x_pos: usize,
    pub y_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCurve {
    pub ladder: Vec<usize>,
    pub values: Vec<usize>,
}

fn check_pair(x: &[Symbol], y: &[Symbol]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Longest common substring of `x` and `y`.
///
/// The witness is the lexicographically smallest `(x_pos, y_pos)` among all
/// maximal matches; when nothing matches the result is `(0, 0, 0)`.
pub fn lcs_exact(x: &[Symbol], y: &[Symbol]) -> Result<MatchResult> {
    check_pair(x, y)?;
    let alphabet = x.iter().chain(y).copied().max().unwrap_or(0) as usize + 1;
    let (length, x_pos, y_pos) = if alphabet <= DENSE_MAX_ALPHABET {
        SuffixAutomaton::<Dense>::build(x, alphabet).longest_common(y, alphabet)
    } else {
        SuffixAutomaton::<Sparse>::build(x, alphabet).longest_common(y, alphabet)
    };
    if length == 0 {
        return Ok(MatchResult { length: 0, x_pos: 0, y_pos: 0 });
    }
    Ok(MatchResult { length, x_pos, y_pos })
}

/// `M_n` by scanning every diagonal `j − i` for its longest run of equal
/// symbols.
pub fn lcs_bruteforce(x: &[Symbol], y: &[Symbol]) -> Result<usize> {
    check_pair(x, y)?;
    let n = x.len();
    if n > BRUTEFORCE_MAX_LEN {
        return Err(Error::TooLarge { len: n, limit: BRUTEFORCE_MAX_LEN });
    }
    let mut best = 0;
    for shift in -(n as isize - 1)..n as isize {
        let (i0, j0) = if shift >= 0 { (0, shift as usize) } else { ((-shift) as usize, 0) };
        let diagonal = n - i0.max(j0);
        if diagonal <= best {
            continue;
        }
        let mut run = 0;
        for k in 0..diagonal {
            if x[i0 + k] == y[j0 + k] {
                run += 1;
                best = best.max(run);
            } else {
                run = 0;
            }
        }
    }
    Ok(best)
}

/// `M_n` for every prefix length `n` on the ladder, each rung evaluated
/// independently.
pub fn match_curve(x: &[Symbol], y: &[Symbol], ladder: &[usize]) -> Result<MatchCurve> {
    check_pair(x, y)?;
    if ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("ladder must be strictly increasing".into()));
    }
    if let Some(&top) = ladder.last() {
        if top > x.len() {
            return Err(Error::OutOfRange { index: top, len: x.len() });
        }
    }
    let values = ladder
        .par_iter()
        .map(|&n| lcs_exact(&x[..n], &y[..n]).map(|m| m.length))
        .collect::<Result<Vec<_>>>()?;
    Ok(MatchCurve { ladder: ladder.to_vec(), values })
}
