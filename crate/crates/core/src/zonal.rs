//! Integer partitions, zonal polynomials at the identity, Laplace-Beltrami
//! eigenvalues, the fusion-frame-potential lower bound and dimensions of
//! polynomial spaces on (unions of) Grassmannians.
//!
//! The closed forms here are products and quotients of small integers, so
//! they are generic over [`CombScalar`]: `f64` for everyday use and
//! [`crate::Rational`] when an exact value is wanted.

use std::fmt;

use num_traits::{FromPrimitive, Num};

use crate::error::{Error, Result};

/// Arithmetic needed by the closed-form combinatorics.
pub trait CombScalar: Num + FromPrimitive + Clone + PartialOrd {}

impl<T: Num + FromPrimitive + Clone + PartialOrd> CombScalar for T {}

fn int<T: CombScalar>(n: u64) -> T {
    T::from_u64(n).expect("integer representable")
}

/// Nonincreasing sequence of positive integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct IntegerPartition {
    parts: Vec<u32>,
}

impl IntegerPartition {
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        if parts.iter().any(|&p| p == 0) {
            return Err(Error::Parameter("partition parts must be positive".into()));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Parameter("partition parts must be nonincreasing".into()));
        }
        Ok(IntegerPartition { parts })
    }

    pub fn empty() -> Self {
        IntegerPartition { parts: Vec::new() }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// `|pi|`.
    pub fn weight(&self) -> u32 {
        self.parts.iter().sum()
    }

    /// `l(pi)`, the number of parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Part `i` (zero-based), zero beyond the length.
    pub fn part(&self, i: usize) -> u32 {
        self.parts.get(i).copied().unwrap_or(0)
    }

    /// `2 pi`, every part doubled.
    pub fn doubled(&self) -> Self {
        IntegerPartition {
            parts: self.parts.iter().map(|p| 2 * p).collect(),
        }
    }
}

impl fmt::Display for IntegerPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// All partitions of `t` with at most `max_len` parts, lexicographically
/// descending.
pub fn partitions(t: u32, max_len: usize) -> Vec<IntegerPartition> {
    fn rec(rest: u32, max_part: u32, slots: usize, cur: &mut Vec<u32>, out: &mut Vec<IntegerPartition>) {
        if rest == 0 {
            out.push(IntegerPartition { parts: cur.clone() });
            return;
        }
        if slots == 0 {
            return;
        }
        for p in (1..=rest.min(max_part)).rev() {
            cur.push(p);
            rec(rest - p, p, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(t, t, max_len, &mut Vec::new(), &mut out);
    out
}

/// Rising factorial `(a)_s = a (a + 1) ... (a + s - 1)`.
pub fn rising<T: CombScalar>(a: T, s: u32) -> T {
    let mut acc = T::one();
    let mut x = a;
    for _ in 0..s {
        acc = acc * x.clone();
        x = x + T::one();
    }
    acc
}

/// Generalized hypergeometric coefficient
/// `(a)_pi = prod_i (a - (i - 1) / 2)_{pi_i}`.
pub fn pochhammer_gen<T: CombScalar>(a: T, pi: &IntegerPartition) -> T {
    let two = int::<T>(2);
    pi.parts()
        .iter()
        .enumerate()
        .fold(T::one(), |acc, (i, &p)| {
            let shift = int::<T>(i as u64) / two.clone();
            acc * rising(a.clone() - shift, p)
        })
}

/// `prod(num) / prod(den)` of positive integers, interleaving multiplications
/// and divisions so floating-point accumulators stay near one.
fn ratio_of_products<T: CombScalar>(mut num: Vec<u64>, mut den: Vec<u64>) -> T {
    num.sort_unstable();
    den.sort_unstable();
    let one = T::one();
    let mut acc = T::one();
    let (mut i, mut j) = (0, 0);
    while i < num.len() || j < den.len() {
        if j < den.len() && (i == num.len() || acc >= one) {
            acc = acc / int::<T>(den[j]);
            j += 1;
        } else {
            acc = acc * int::<T>(num[i]);
            i += 1;
        }
    }
    acc
}

/// Zonal polynomial `C_pi` evaluated at the `m x m` identity.
///
/// Normalized so that `sum_{|pi| = t} C_pi(X) = trace(X)^t`; in particular
/// `C_(1)(I_m) = m`. The power-of-two prefactor is `4^|pi|`.
pub fn zonal_at_identity<T: CombScalar>(pi: &IntegerPartition, m: usize) -> Result<T> {
    let len = pi.len();
    if len > m {
        return Err(Error::Parameter(format!(
            "partition {pi} has more than {m} parts"
        )));
    }
    let w = pi.weight() as u64;
    let mut num: Vec<u64> = Vec::new();
    let mut den: Vec<u64> = Vec::new();
    // 4^|pi| |pi|!
    num.extend(std::iter::repeat(4).take(w as usize));
    num.extend(1..=w);
    // (m/2)_pi = prod_i prod_{r < pi_i} (m - i + 1 + 2r) / 2, with i one-based
    for (i, &p) in pi.parts().iter().enumerate() {
        for r in 0..p as u64 {
            num.push(m as u64 - i as u64 + 2 * r);
            den.push(2);
        }
    }
    for i in 0..len {
        for j in (i + 1)..len {
            let v = 2 * pi.part(i) as i64 - 2 * pi.part(j) as i64 - i as i64 + j as i64;
            num.push(v as u64);
        }
    }
    for (i, &p) in pi.parts().iter().enumerate() {
        let top = 2 * p as u64 + len as u64 - 1 - i as u64;
        den.extend(1..=top);
    }
    Ok(ratio_of_products(num, den))
}

fn check_grassmann(k: usize, d: usize) -> Result<()> {
    if d < 2 || k == 0 || k >= d {
        Err(Error::Parameter(format!(
            "rank {k} must satisfy 1 <= k <= d - 1 with d = {d}"
        )))
    } else {
        Ok(())
    }
}

/// `B(t, k, d) = int int trace(P R)^t dsigma(P) dsigma(R)
///             = sum_{|pi| = t, l(pi) <= k} C_pi(I_k)^2 / C_pi(I_d)`.
///
/// This is the minimum of the `t`-fusion frame potential over weights
/// summing to one.
pub fn ffp_lower_bound<T: CombScalar>(t: u32, k: usize, d: usize) -> Result<T> {
    check_grassmann(k, d)?;
    if t == 0 {
        return Err(Error::Parameter("degree must be at least 1".into()));
    }
    partitions(t, k).iter().try_fold(T::zero(), |acc, pi| {
        let ck: T = zonal_at_identity(pi, k)?;
        let cd: T = zonal_at_identity(pi, d)?;
        Ok(acc + ck.clone() * ck / cd)
    })
}

/// Laplace-Beltrami eigenvalue `lambda_pi = 2 |pi| d + 4 sum_i pi_i (pi_i - i)`.
pub fn laplace_eigenvalue(pi: &IntegerPartition, d: usize) -> i64 {
    let w = pi.weight() as i64;
    let s: i64 = pi
        .parts()
        .iter()
        .enumerate()
        .map(|(i, &p)| p as i64 * (p as i64 - (i as i64 + 1)))
        .sum();
    2 * w * d as i64 + 4 * s
}

/// Truncated random-point constant `c^2 = sum (1 + lambda_pi)^(-s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomPointsConstant {
    /// Sum over `1 <= l(pi) <= min(k, d - k)`, `1 <= |pi| <= cutoff`.
    pub value: f64,
    /// Upper bound on the omitted tail (infinite when `cutoff = 0`).
    pub tail_bound: f64,
    pub cutoff: u32,
}

/// Squared constant of the `n^(-1/2)` worst-case error of i.i.d. uniform
/// points in the Bessel potential space of smoothness `s`.
///
/// The tail bound uses `#{pi : |pi| = n, l(pi) <= k} <= (2n)^(k-1)` and
/// `lambda_pi >= 4 n^2 / k` (valid for `k <= d / 2`), followed by an integral
/// comparison in `n`.
pub fn random_points_constant(s: f64, k: usize, d: usize, cutoff: u32) -> Result<RandomPointsConstant> {
    check_grassmann(k, d)?;
    let threshold = (k * (d - k)) as f64 / 2.0;
    if !(s > threshold) {
        return Err(Error::Parameter(format!(
            "smoothness {s} must exceed k(d-k)/2 = {threshold}"
        )));
    }
    let kk = k.min(d - k);
    let mut value = 0.0;
    for w in 1..=cutoff {
        for pi in partitions(w, kk) {
            let lambda = laplace_eigenvalue(&pi, d) as f64;
            value += (1.0 + lambda).powf(-s);
        }
    }
    let tail_bound = if cutoff == 0 {
        f64::INFINITY
    } else {
        let kf = kk as f64;
        let p = 2.0 * s - kf + 1.0;
        2f64.powf(kf - 1.0) * (kf / 4.0).powf(s) * (cutoff as f64).powf(1.0 - p) / (p - 1.0)
    };
    Ok(RandomPointsConstant {
        value,
        tail_bound,
        cutoff,
    })
}

/// `D(d, pi)` evaluated in arbitrary arithmetic, `l_i = d/2 + pi_i - i`.
pub fn rep_dimension_in<T: CombScalar>(d: usize, pi: &IntegerPartition) -> Result<T> {
    let h = d / 2;
    if pi.len() > h {
        return Err(Error::Parameter(format!(
            "partition {pi} has more than floor(d/2) = {h} parts"
        )));
    }
    let two = int::<T>(2);
    let l = |i: usize| -> T {
        // one-based i
        let twice = d as i64 + 2 * pi.part(i - 1) as i64 - 2 * i as i64;
        signed::<T>(twice) / two.clone()
    };
    let mut acc = T::one();
    for i in 1..=h {
        for j in (i + 1)..=h {
            let (li, lj) = (l(i), l(j));
            let num = (li.clone() + lj.clone()) * (li - lj);
            let den = int::<T>(((j - i) * (d - i - j)) as u64);
            acc = acc * num / den;
        }
    }
    if d % 2 == 1 {
        for i in 1..=h {
            acc = acc * two.clone() * l(i) / int::<T>((d - 2 * i) as u64);
        }
    } else if h > 0 && pi.part(h - 1) > 0 {
        acc = acc * two;
    }
    Ok(acc)
}

fn signed<T: CombScalar>(v: i64) -> T {
    if v >= 0 {
        int(v as u64)
    } else {
        T::zero() - int::<T>(v.unsigned_abs())
    }
}

/// Dimension `D(d, pi)` of the irreducible representation of `O(d)` indexed
/// by `pi`, `l(pi) <= floor(d/2)`.
pub fn rep_dimension(d: usize, pi: &IntegerPartition) -> Result<u64> {
    let v: f64 = rep_dimension_in(d, pi)?;
    let r = v.round();
    if (v - r).abs() > 1e-6 * r.abs().max(1.0) || r < 1.0 {
        return Err(Error::Internal(format!(
            "D({d}, {pi}) = {v} is not a positive integer"
        )));
    }
    Ok(r as u64)
}

/// `dim Pol_t(G(k, d)) = sum_{|pi| <= t, l(pi) <= min(k, d-k)} D(d, 2 pi)`.
pub fn dim_pol_grassmannian(t: u32, k: usize, d: usize) -> Result<u64> {
    check_grassmann(k, d)?;
    let kk = k.min(d - k);
    let mut total = 0;
    for w in 0..=t {
        for pi in partitions(w, kk) {
            total += rep_dimension(d, &pi.doubled())?;
        }
    }
    Ok(total)
}

/// Nonempty set of ranks in dimension `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrassmannSpec {
    d: usize,
    ranks: Vec<usize>,
}

impl GrassmannSpec {
    pub fn single(d: usize, k: usize) -> Result<Self> {
        Self::union(d, &[k])
    }

    /// Duplicates are dropped.
    pub fn union(d: usize, ranks: &[usize]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Parameter("rank set must be nonempty".into()));
        }
        let mut rs = ranks.to_vec();
        rs.sort_unstable();
        rs.dedup();
        for &k in &rs {
            check_grassmann(k, d)?;
        }
        Ok(GrassmannSpec { d, ranks: rs })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Ranks ordered so that `min(k, d - k)` is nonincreasing (ties by rank).
    pub fn sorted_ranks(&self) -> Vec<usize> {
        let d = self.d;
        let mut rs = self.ranks.clone();
        rs.sort_by_key(|&k| (std::cmp::Reverse(k.min(d - k)), k));
        rs
    }
}

/// `sum_{i=1}^{s} dim Pol_{t-i+1}(G(k_i, d))` for the ranks in the given
/// order, `s = min(t + 1, |K|)`. A lower bound on `dim Pol_t` of the union
/// for every order.
pub fn dim_pol_union_ordered(ranks: &[usize], d: usize, t: u32) -> Result<u64> {
    let s = (t as usize + 1).min(ranks.len());
    let mut total = 0;
    for (i, &k) in ranks.iter().take(s).enumerate() {
        total += dim_pol_grassmannian(t - i as u32, k, d)?;
    }
    Ok(total)
}

/// `dim Pol_t` on the union of Grassmannians with ranks `ranks`.
pub fn dim_pol_union(ranks: &[usize], d: usize, t: u32) -> Result<u64> {
    let spec = GrassmannSpec::union(d, ranks)?;
    dim_pol_union_ordered(&spec.sorted_ranks(), d, t)
}
