//! Partial Bell polynomials, their derivatives along a derivative sequence,
//! Stirling numbers of the first kind and rising factorials.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{FromPrimitive, Num, One, Zero};

use crate::{Error, Result, C64};

/// Exact binomial coefficient; panics on `u64` overflow (n well beyond 60).
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).expect("binomial overflow")
}

/// `m (m + 1) ... (m + k - 1)` in floating point; `inf` once it overflows.
pub fn rising_factorial(m: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (m + i) as f64)
}

/// `ln(m^{(k)} / k!) = ln C(m + k - 1, k)`, accumulated term by term so it
/// stays accurate for large `k`.
pub fn ln_rising_over_factorial(m: u64, k: u64) -> f64 {
    let a = m as f64 - 1.0;
    (1..=k).map(|i| (a / i as f64).ln_1p()).sum()
}

/// Table of partial Bell polynomials `B_{l,p}(x_1, x_2, ...)` for one fixed
/// argument sequence, filled by
/// `B_{l,p} = sum_{i=1}^{l-p+1} C(l-1, i-1) x_i B_{l-i,p-1}`.
///
/// Entries whose argument index `l - p + 1` runs past the supplied sequence
/// are not available.
#[derive(Debug, Clone)]
pub struct BellTable<T> {
    rows: Vec<Vec<Option<T>>>,
    len: usize,
}

impl<T> BellTable<T>
where
    T: Num + Clone + FromPrimitive,
{
    pub fn new(x: &[T], max_l: usize) -> Self {
        let mut rows: Vec<Vec<Option<T>>> = Vec::with_capacity(max_l + 1);
        for l in 0..=max_l {
            let mut row = vec![None; l + 1];
            for (p, slot) in row.iter_mut().enumerate() {
                *slot = if l == 0 {
                    Some(T::one())
                } else if p == 0 {
                    Some(T::zero())
                } else if l - p + 1 > x.len() {
                    None
                } else {
                    let mut acc = T::zero();
                    for i in 1..=(l - p + 1) {
                        let below = rows[l - i][p - 1].clone().expect("band entry");
                        let coef = T::from_u64(binomial((l - 1) as u64, (i - 1) as u64)).expect("binomial");
                        acc = acc + coef * x[i - 1].clone() * below;
                    }
                    Some(acc)
                };
            }
            rows.push(row);
        }
        BellTable { rows, len: x.len() }
    }

    /// `B_{l,p}`; zero outside `0 <= p <= l` (and for `p = 0 < l`).
    pub fn get(&self, l: i64, p: i64) -> Result<T> {
        if l < 0 || p < 0 || l < p {
            return Ok(T::zero());
        }
        let (l, p) = (l as usize, p as usize);
        if l >= self.rows.len() {
            return Err(Error::InvalidArgument(format!("Bell table built up to l = {}", self.rows.len() - 1)));
        }
        self.rows[l][p].clone().ok_or(Error::SequenceTooShort { needed: l - p + 1, got: self.len })
    }
}

/// Partial Bell polynomial `B_{l,p}(x_1, ..., x_{l-p+1})`.
pub fn bell_partial<T>(l: usize, p: usize, x: &[T]) -> Result<T>
where
    T: Num + Clone + FromPrimitive,
{
    if p > l || (p == 0 && l > 0) {
        return Ok(T::zero());
    }
    if l == 0 {
        return Ok(T::one());
    }
    let needed = l - p + 1;
    if x.len() < needed {
        return Err(Error::SequenceTooShort { needed, got: x.len() });
    }
    BellTable::new(&x[..needed], l).get(l as i64, p as i64)
}

/// A sequence `x_1, x_2, ...` whose successive entries are successive
/// derivatives at a point (entry `n + 1` is the derivative of entry `n`).
pub trait DerivSeq {
    /// Entry `n >= 1`.
    fn term(&self, n: usize) -> C64;

    fn prefix(&self, n: usize) -> Vec<C64> {
        (1..=n).map(|i| self.term(i)).collect()
    }
}

/// Memoized `q`-th derivatives of `w -> B_{l,p}(x_1(w), ..., x_{l-p+1}(w))`
/// where `x_n' = x_{n+1}`, evaluated through
/// `B^{(q)}_{l,p} = sum_r C(l, r) sum_s C(q-1, s) B^{(q-1-s)}_{l-r,p-1} x_{1+r+s}`.
///
/// The memo is owned by one evaluation context, so no locking is needed.
pub struct BellDerivs<'a, D: DerivSeq> {
    seq: &'a D,
    memo: HashMap<(i64, i64, u32), C64>,
}

impl<'a, D: DerivSeq> BellDerivs<'a, D> {
    pub fn new(seq: &'a D) -> Self {
        BellDerivs { seq, memo: HashMap::new() }
    }

    pub fn get(&mut self, l: i64, p: i64, q: u32) -> C64 {
        bell_deriv_impl(l, p, q, self.seq, &mut Some(&mut self.memo))
    }

    pub fn cached(&self) -> usize {
        self.memo.len()
    }
}

/// Same recursion as [`BellDerivs::get`] without memoization.
pub fn bell_deriv<D: DerivSeq>(l: i64, p: i64, q: u32, seq: &D) -> C64 {
    bell_deriv_impl(l, p, q, seq, &mut None)
}

fn bell_deriv_impl<D: DerivSeq>(
    l: i64,
    p: i64,
    q: u32,
    seq: &D,
    memo: &mut Option<&mut HashMap<(i64, i64, u32), C64>>,
) -> C64 {
    if l < 0 || p < 0 || (p == 0 && l > 0) || l < p {
        return C64::zero();
    }
    if let Some(m) = memo.as_deref() {
        if let Some(v) = m.get(&(l, p, q)) {
            return *v;
        }
    }
    let value = if q == 0 {
        let x = seq.prefix((l - p + 1) as usize);
        bell_partial(l as usize, p as usize, &x).expect("prefix has the required length")
    } else {
        let mut acc = C64::zero();
        for r in 1..=(l - p + 1) {
            let outer = binomial(l as u64, r as u64) as f64;
            let mut inner = C64::zero();
            for s in 0..q {
                let lower = bell_deriv_impl(l - r, p - 1, q - 1 - s, seq, memo);
                inner += binomial((q - 1) as u64, s as u64) as f64 * lower * seq.term((1 + r) as usize + s as usize);
            }
            acc += outer * inner;
        }
        acc
    };
    if let Some(m) = memo.as_deref_mut() {
        m.insert((l, p, q), value);
    }
    value
}

/// Unsigned Stirling numbers of the first kind `[n k]`, rows `0..=n_max`.
pub fn stirling1_table(n_max: usize) -> Vec<Vec<BigUint>> {
    let mut rows = vec![vec![BigUint::one()]];
    for n in 0..n_max {
        let prev = &rows[n];
        let mut next = vec![BigUint::zero(); n + 2];
        for (k, slot) in next.iter_mut().enumerate() {
            let mut v = BigUint::zero();
            if k <= n {
                v += &prev[k] * BigUint::from(n);
            }
            if k >= 1 {
                v += &prev[k - 1];
            }
            *slot = v;
        }
        rows.push(next);
    }
    rows
}

/// Unsigned Stirling number of the first kind: permutations of `n` elements
/// with exactly `k` cycles.
pub fn stirling1_unsigned(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    stirling1_table(n)[n][k].clone()
}
