//! Slope machinery for valuations over identical items: max-forward and
//! min-backward slopes, the submodular closure and its triangle
//! decomposition, and the counting bound on steep indices.

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::rational::{rat, rat_int, Rat};
use crate::valuation::SymmetricValuation;

/// One slope query result. `value` is the extremal average slope over
/// step sizes `1..=horizon` from `k`; `realizer` is the smallest step size
/// attaining it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlopeQuery {
    pub k: usize,
    pub horizon: usize,
    pub value: Rat,
    pub realizer: usize,
}

/// Max average marginal gain from adding `1..=r` items at `k`. `r = None`
/// means the full horizon `m - k`.
pub fn max_forward_slope(v: &SymmetricValuation, k: usize, r: Option<usize>) -> Result<SlopeQuery> {
    let m = v.m();
    if k >= m {
        return Err(Error::IndexOutOfRange(format!(
            "forward slope needs k < m, got k={k}, m={m}"
        )));
    }
    let r = r.unwrap_or(m - k);
    if r < 1 || r > m - k {
        return Err(Error::IndexOutOfRange(format!(
            "forward horizon must be in 1..={}, got {r}",
            m - k
        )));
    }
    let mut best_num = v.value(k + 1) - v.value(k);
    let mut best_den = rat_int(1);
    let mut realizer = 1usize;
    for l in 2..=r {
        let num = v.value(k + l) - v.value(k);
        let den = rat_int(l as i64);
        if cmp_slope(&num, &den, &best_num, &best_den) == std::cmp::Ordering::Greater {
            best_num = num;
            best_den = den;
            realizer = l;
        }
    }
    Ok(SlopeQuery {
        k,
        horizon: r,
        value: best_num / best_den,
        realizer,
    })
}

/// Min average marginal loss from removing `1..=r` items at `k`. `r = None`
/// means the full horizon `k`.
pub fn min_backward_slope(v: &SymmetricValuation, k: usize, r: Option<usize>) -> Result<SlopeQuery> {
    let m = v.m();
    if k == 0 || k > m {
        return Err(Error::IndexOutOfRange(format!(
            "backward slope needs 0 < k <= m, got k={k}, m={m}"
        )));
    }
    let r = r.unwrap_or(k);
    if r < 1 || r > k {
        return Err(Error::IndexOutOfRange(format!(
            "backward horizon must be in 1..={k}, got {r}"
        )));
    }
    let mut best_num = v.value(k) - v.value(k - 1);
    let mut best_den = rat_int(1);
    let mut realizer = 1usize;
    for l in 2..=r {
        let num = v.value(k) - v.value(k - l);
        let den = rat_int(l as i64);
        if cmp_slope(&num, &den, &best_num, &best_den) == std::cmp::Ordering::Less {
            best_num = num;
            best_den = den;
            realizer = l;
        }
    }
    Ok(SlopeQuery {
        k,
        horizon: r,
        value: best_num / best_den,
        realizer,
    })
}

fn cmp_slope(a: &Rat, ad: &Rat, b: &Rat, bd: &Rat) -> std::cmp::Ordering {
    // All denominators here are positive integers.
    let left: BigInt = a.numer() * ad.denom() * (b.denom() * bd.numer());
    let right: BigInt = b.numer() * bd.denom() * (a.denom() * ad.numer());
    left.cmp(&right)
}

/// The submodular closure of `v` with its intersection indices and triangle
/// slopes. The closure is the least concave majorant of the points
/// `(k, v(k))`, which is the minimal submodular valuation dominating `v`.
#[derive(Debug, Clone)]
pub struct TriangleDecomposition {
    intersection_indices: Vec<usize>,
    slopes: Vec<Rat>,
    closure: SymmetricValuation,
}

impl TriangleDecomposition {
    /// Sorted indices where `v` meets its closure; always contains 0 and `m`.
    pub fn intersection_indices(&self) -> &[usize] {
        &self.intersection_indices
    }

    /// Slope of each triangle, non-increasing.
    pub fn slopes(&self) -> &[Rat] {
        &self.slopes
    }

    pub fn closure(&self) -> &SymmetricValuation {
        &self.closure
    }

    pub fn is_intersection(&self, k: usize) -> bool {
        self.intersection_indices.binary_search(&k).is_ok()
    }

    /// Triangle index `l` with `i_l <= k < i_{l+1}` (the last triangle for
    /// `k = m`).
    pub fn triangle_of(&self, k: usize) -> usize {
        match self.intersection_indices.binary_search(&k) {
            Ok(pos) => pos.min(self.slopes.len().saturating_sub(1)),
            Err(pos) => pos - 1,
        }
    }

    pub fn triangle_start(&self, l: usize) -> usize {
        self.intersection_indices[l]
    }

    pub fn triangle_end(&self, l: usize) -> usize {
        self.intersection_indices[l + 1]
    }

    pub fn triangle_count(&self) -> usize {
        self.slopes.len()
    }
}

pub fn sm_closure(v: &SymmetricValuation) -> TriangleDecomposition {
    let m = v.m();
    // Monotone-chain upper hull over (k, v(k)); pops collinear middles so the
    // vertex list is strictly concave, then interpolates exact closure values.
    let mut hull: Vec<usize> = Vec::with_capacity(m + 1);
    for k in 0..=m {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // Pop b when it is on or below the chord a -> k.
            let lhs = (v.value(b) - v.value(a)) * rat_int((k - a) as i64);
            let rhs = (v.value(k) - v.value(a)) * rat_int((b - a) as i64);
            if lhs <= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }

    let mut closure_values = Vec::with_capacity(m + 1);
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let step = (v.value(b) - v.value(a)) / rat_int((b - a) as i64);
        for k in a..b {
            closure_values.push(v.value(a) + step.clone() * rat_int((k - a) as i64));
        }
    }
    closure_values.push(v.value(m).clone());
    let closure = SymmetricValuation::new(closure_values).expect("closure of monotone is monotone");

    let intersection_indices: Vec<usize> =
        (0..=m).filter(|&k| v.value(k) == closure.value(k)).collect();
    let slopes = intersection_indices
        .windows(2)
        .map(|w| (v.value(w[1]) - v.value(w[0])) / rat_int((w[1] - w[0]) as i64))
        .collect();

    TriangleDecomposition {
        intersection_indices,
        slopes,
        closure,
    }
}

/// All default-horizon max-forward slopes; entry `k` is defined for `k < m`.
/// The scan per index stays inside its triangle (the slope past the triangle
/// end cannot exceed the in-triangle maximum).
pub fn forward_slopes(v: &SymmetricValuation) -> Vec<Rat> {
    let decomp = sm_closure(v);
    forward_slopes_with(v, &decomp)
}

pub fn forward_slopes_with(v: &SymmetricValuation, decomp: &TriangleDecomposition) -> Vec<Rat> {
    let m = v.m();
    let mut out = Vec::with_capacity(m);
    let ints = crate::rational::as_i64_vec(v.values());
    for l in 0..decomp.triangle_count() {
        let (a, b) = (decomp.triangle_start(l), decomp.triangle_end(l));
        if let Some(ints) = &ints {
            for k in a..b {
                let mut best_num = ints[k + 1] - ints[k];
                let mut best_den = 1i64;
                for j in k + 2..=b {
                    let num = ints[j] - ints[k];
                    let den = (j - k) as i64;
                    if num as i128 * best_den as i128 > best_num as i128 * den as i128 {
                        best_num = num;
                        best_den = den;
                    }
                }
                out.push(rat(best_num, best_den));
            }
            continue;
        }
        for k in a..b {
            let mut best_num = v.value(k + 1) - v.value(k);
            let mut best_den = 1i64;
            for j in k + 2..=b {
                let num = v.value(j) - v.value(k);
                let den = (j - k) as i64;
                // num/den > best_num/best_den, cross-multiplied.
                let left = num.numer() * best_num.denom() * BigInt::from(best_den);
                let right = best_num.numer() * num.denom() * BigInt::from(den);
                if left > right {
                    best_num = num;
                    best_den = den;
                }
            }
            out.push(best_num / rat_int(best_den));
        }
    }
    debug_assert_eq!(out.len(), m);
    out
}

/// All default-horizon min-backward slopes; entry `k - 1` is the slope at
/// `k`, for `k` in `1..=m`.
pub fn backward_slopes(v: &SymmetricValuation) -> Vec<Rat> {
    let decomp = sm_closure(v);
    backward_slopes_with(v, &decomp)
}

pub fn backward_slopes_with(v: &SymmetricValuation, decomp: &TriangleDecomposition) -> Vec<Rat> {
    let m = v.m();
    let mut out = Vec::with_capacity(m);
    let ints = crate::rational::as_i64_vec(v.values());
    for l in 0..decomp.triangle_count() {
        let (a, b) = (decomp.triangle_start(l), decomp.triangle_end(l));
        if let Some(ints) = &ints {
            for k in a + 1..=b {
                let mut best_num = ints[k] - ints[k - 1];
                let mut best_den = 1i64;
                for j in a..k - 1 {
                    let num = ints[k] - ints[j];
                    let den = (k - j) as i64;
                    if (num as i128 * best_den as i128) < (best_num as i128 * den as i128) {
                        best_num = num;
                        best_den = den;
                    }
                }
                out.push(rat(best_num, best_den));
            }
            continue;
        }
        for k in a + 1..=b {
            let mut best_num = v.value(k) - v.value(k - 1);
            let mut best_den = 1i64;
            for j in a..k - 1 {
                let num = v.value(k) - v.value(j);
                let den = (k - j) as i64;
                // num/den < best_num/best_den, cross-multiplied.
                let left = num.numer() * best_num.denom() * BigInt::from(best_den);
                let right = best_num.numer() * num.denom() * BigInt::from(den);
                if left < right {
                    best_num = num;
                    best_den = den;
                }
            }
            out.push(best_num / rat_int(best_den));
        }
    }
    debug_assert_eq!(out.len(), m);
    out
}

/// The max-forward slopes sorted ascending.
pub fn sorted_forward_slopes(v: &SymmetricValuation) -> Vec<Rat> {
    let mut slopes = forward_slopes(v);
    slopes.sort();
    slopes
}

/// Forward slopes of the flat benchmark function (0 below `m`, `v(m)` at
/// `m`): entry `k` is `v(m) / (m - k)`.
pub fn flat_slopes(v: &SymmetricValuation) -> Vec<Rat> {
    let m = v.m();
    (0..m)
        .map(|k| v.value(m) / rat_int((m - k) as i64))
        .collect()
}

/// Number of indices `k < m` whose max-forward slope exceeds `c * v(m) / m`.
/// Guaranteed at most `m - floor((c-1)/c * m) - 1` for every `c >= 1`.
pub fn count_c_bad(v: &SymmetricValuation, c: &Rat) -> usize {
    assert!(*c >= rat_int(1), "c must be at least 1");
    let m = v.m();
    let threshold = c * v.value(m) / rat_int(m as i64);
    let count = forward_slopes(v)
        .iter()
        .filter(|s| **s > threshold)
        .count();
    debug_assert!(count <= c_bad_bound(m, c));
    count
}

/// The counting bound `m - floor((c-1)/c * m) - 1`.
pub fn c_bad_bound(m: usize, c: &Rat) -> usize {
    let scaled = (c - rat_int(1)) * rat_int(m as i64) / c;
    let floor = scaled.floor().to_integer();
    let floor = usize::try_from(&floor).unwrap_or(0);
    m - floor - 1
}

/// Lower bound `k * min_{k' < k} forward_slope(k')` on `v(k)`, valid for
/// subadditive `v`.
pub fn lower_bound_value(v: &SymmetricValuation, k: usize) -> Result<Rat> {
    if k == 0 || k > v.m() {
        return Err(Error::IndexOutOfRange(format!("need 0 < k <= m, got {k}")));
    }
    if !crate::valuation::classify_symmetric(v).contains(&crate::valuation::ValuationClass::Subadditive)
    {
        return Err(Error::NotSubadditive);
    }
    let slopes = forward_slopes(v);
    let min = slopes[..k].iter().min().expect("k >= 1");
    Ok(min * rat_int(k as i64))
}
