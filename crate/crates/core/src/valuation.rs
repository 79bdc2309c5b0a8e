//! Valuation representations over identical and heterogeneous items, class
//! membership tests, and seeded random generation.

use std::collections::BTreeSet;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linprog;
use crate::rational::{rat_int, Rat};

/// Default cap on item count for explicit bundle tables; every general-market
/// operation enumerates `2^m` bundles. `TWOPRICE_MAX_GENERAL_M` overrides it
/// at the user's risk.
pub fn general_m_cap() -> usize {
    std::env::var("TWOPRICE_MAX_GENERAL_M")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(20)
}

/// A valuation over identical items: `value(k)` is the worth of any bundle of
/// `k` items. Normalized (`v(0) = 0`) and monotone by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricValuation {
    values: Vec<Rat>,
}

impl SymmetricValuation {
    pub fn new(values: Vec<Rat>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Malformed(
                "symmetric valuation needs at least one item".into(),
            ));
        }
        if !values[0].is_zero() {
            return Err(Error::Malformed("valuation not normalized: v(0) != 0".into()));
        }
        for k in 0..values.len() - 1 {
            if values[k] > values[k + 1] {
                return Err(Error::Malformed(format!(
                    "valuation not monotone at k={}",
                    k + 1
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn from_i64(values: &[i64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| rat_int(v)).collect())
    }

    pub fn m(&self) -> usize {
        self.values.len() - 1
    }

    pub fn value(&self, k: usize) -> &Rat {
        &self.values[k]
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }
}

/// A valuation over heterogeneous items as an explicit table over all `2^m`
/// bundles, indexed by bitmask. Normalized and monotone by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralValuation {
    m: usize,
    values: Vec<Rat>,
}

impl GeneralValuation {
    pub fn new(m: usize, values: Vec<Rat>) -> Result<Self> {
        let cap = general_m_cap();
        if m > cap {
            return Err(Error::InstanceTooLarge(format!(
                "general valuation over {m} items exceeds cap {cap}"
            )));
        }
        if m == 0 {
            return Err(Error::Malformed("general valuation needs at least one item".into()));
        }
        if values.len() != 1 << m {
            return Err(Error::DimensionMismatch(format!(
                "expected {} bundle values, got {}",
                1usize << m,
                values.len()
            )));
        }
        if !values[0].is_zero() {
            return Err(Error::Malformed("valuation not normalized: v(empty) != 0".into()));
        }
        for mask in 1..values.len() {
            let mut sub = mask;
            while sub != 0 {
                let j = sub.trailing_zeros() as usize;
                if values[mask & !(1 << j)] > values[mask] {
                    return Err(Error::Malformed(format!(
                        "valuation not monotone at bundle {mask:#b}"
                    )));
                }
                sub &= sub - 1;
            }
        }
        Ok(Self { m, values })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn value(&self, bundle: u32) -> &Rat {
        &self.values[bundle as usize]
    }

    pub fn full_mask(&self) -> u32 {
        ((1u64 << self.m) - 1) as u32
    }
}

/// Lifts a symmetric valuation to an explicit bundle table: `v(S) = v(|S|)`.
pub fn symmetric_to_general(v: &SymmetricValuation) -> Result<GeneralValuation> {
    let m = v.m();
    let cap = general_m_cap();
    if m > cap {
        return Err(Error::InstanceTooLarge(format!(
            "cannot expand {m} identical items into a bundle table (cap {cap})"
        )));
    }
    let values = (0..1usize << m)
        .map(|mask| v.value(mask.count_ones() as usize).clone())
        .collect();
    GeneralValuation::new(m, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValuationClass {
    UnitDemand,
    Additive,
    Submodular,
    Xos,
    Subadditive,
    General,
}

pub type ClassSet = BTreeSet<ValuationClass>;

/// Classes whose defining inequality holds for a symmetric valuation.
pub fn classify_symmetric(v: &SymmetricValuation) -> ClassSet {
    let m = v.m();
    let mut classes = ClassSet::new();

    if (1..=m).all(|k| v.value(k) == v.value(1)) {
        classes.insert(ValuationClass::UnitDemand);
    }
    if (1..=m).all(|k| *v.value(k) == v.value(1) * rat_int(k as i64)) {
        classes.insert(ValuationClass::Additive);
    }
    if (1..m).all(|k| v.value(k) - v.value(k - 1) >= v.value(k + 1) - v.value(k)) {
        classes.insert(ValuationClass::Submodular);
    }
    // XOS over identical items: v(k) >= (k/t) v(t) for all k < t, i.e. the
    // per-item average v(k)/k is non-increasing.
    let xos = (1..m).all(|k| {
        v.value(k) * rat_int((k + 1) as i64) >= v.value(k + 1) * rat_int(k as i64)
    });
    if xos {
        classes.insert(ValuationClass::Xos);
    }
    let subadditive = match crate::rational::as_i64_vec(v.values()) {
        Some(ints) => {
            (1..=m).all(|k| (k..=m - k).all(|t| ints[k] + ints[t] >= ints[k + t]))
        }
        None => (1..=m).all(|k| (k..=m - k).all(|t| v.value(k) + v.value(t) >= *v.value(k + t))),
    };
    if subadditive {
        classes.insert(ValuationClass::Subadditive);
    }
    classes
}

/// Classes whose defining condition holds for a general valuation. XOS
/// membership is decided exactly: for every bundle, supporting per-item
/// prices must exist (a rational linear feasibility problem).
pub fn classify_general(v: &GeneralValuation) -> ClassSet {
    let m = v.m();
    let full = v.full_mask();
    let mut classes = ClassSet::new();

    let unit_demand = (1..=full).all(|s| {
        let best = (0..m)
            .filter(|j| s >> j & 1 == 1)
            .map(|j| v.value(1 << j))
            .max()
            .unwrap();
        v.value(s) == best
    });
    if unit_demand {
        classes.insert(ValuationClass::UnitDemand);
    }

    let additive = (1..=full).all(|s| {
        let sum: Rat = (0..m)
            .filter(|j| s >> j & 1 == 1)
            .map(|j| v.value(1 << j).clone())
            .sum();
        *v.value(s) == sum
    });
    if additive {
        classes.insert(ValuationClass::Additive);
    }

    let submodular = (0..=full).all(|s| {
        (0..m).filter(|j| s >> j & 1 == 0).all(|j| {
            (j + 1..m).filter(|k| s >> k & 1 == 0).all(|k| {
                v.value(s | 1 << j) + v.value(s | 1 << k)
                    >= v.value(s | 1 << j | 1 << k) + v.value(s)
            })
        })
    });
    if submodular {
        classes.insert(ValuationClass::Submodular);
    }

    // Disjoint split check suffices for subadditivity of a monotone valuation.
    let subadditive = (1..=full).all(|u| {
        let mut s = (u - 1) & u;
        loop {
            if s == 0 {
                break true;
            }
            if v.value(s) + v.value(u & !s) < *v.value(u) {
                break false;
            }
            s = (s - 1) & u;
        }
    });
    if subadditive {
        classes.insert(ValuationClass::Subadditive);
    }

    let xos = if submodular {
        true
    } else if !subadditive {
        false
    } else {
        (1..=full).all(|s| supporting_prices(v, s).is_some())
    };
    if xos {
        classes.insert(ValuationClass::Xos);
    }

    classes
}

/// Supporting prices for bundle `x`: non-negative per-item prices summing to
/// `v(x)` with every sub-bundle priced at most its value. Exist iff `v`
/// restricted to `x` admits a maximizing additive clause (the XOS condition
/// at `x`). Returns prices indexed by the items of `x` in ascending order.
pub fn supporting_prices(v: &GeneralValuation, x: u32) -> Option<Vec<Rat>> {
    let items: Vec<usize> = (0..v.m()).filter(|j| x >> j & 1 == 1).collect();
    if items.is_empty() {
        return Some(Vec::new());
    }
    // Uniform prices work whenever v(z) >= (|z|/|x|) v(x) on sub-bundles;
    // that covers every symmetric-lifted XOS valuation without an LP.
    let n = items.len();
    let uniform = v.value(x) / rat_int(n as i64);
    let mut uniform_ok = true;
    let mut sub = (x - 1) & x;
    while sub != 0 {
        if *v.value(sub) < uniform.clone() * rat_int(sub.count_ones() as i64) {
            uniform_ok = false;
            break;
        }
        sub = (sub - 1) & x;
    }
    if uniform_ok {
        return Some(vec![uniform; n]);
    }

    let mut lp = linprog::Feasibility::new(n);
    let ones = vec![rat_int(1); n];
    lp.eq(ones, v.value(x).clone());
    let mut sub = (x - 1) & x;
    while sub != 0 {
        let row: Vec<Rat> = items
            .iter()
            .map(|&j| {
                if sub >> j & 1 == 1 {
                    rat_int(1)
                } else {
                    rat_int(0)
                }
            })
            .collect();
        lp.le(row, v.value(sub).clone());
        sub = (sub - 1) & x;
    }
    lp.solve()
}

/// An ordered list of buyers over a common item count; all buyers share one
/// representation kind.
#[derive(Debug, Clone)]
pub enum ValuationProfile {
    Symmetric(Vec<SymmetricValuation>),
    General(Vec<GeneralValuation>),
}

impl ValuationProfile {
    pub fn symmetric(buyers: Vec<SymmetricValuation>) -> Result<Self> {
        if buyers.is_empty() {
            return Err(Error::Malformed("profile needs at least one buyer".into()));
        }
        let m = buyers[0].m();
        if buyers.iter().any(|b| b.m() != m) {
            return Err(Error::DimensionMismatch(
                "buyers disagree on item count".into(),
            ));
        }
        Ok(Self::Symmetric(buyers))
    }

    pub fn general(buyers: Vec<GeneralValuation>) -> Result<Self> {
        if buyers.is_empty() {
            return Err(Error::Malformed("profile needs at least one buyer".into()));
        }
        let m = buyers[0].m();
        if buyers.iter().any(|b| b.m() != m) {
            return Err(Error::DimensionMismatch(
                "buyers disagree on item count".into(),
            ));
        }
        Ok(Self::General(buyers))
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Symmetric(b) => b.len(),
            Self::General(b) => b.len(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Self::Symmetric(b) => b[0].m(),
            Self::General(b) => b[0].m(),
        }
    }

    pub fn as_symmetric(&self) -> Option<&[SymmetricValuation]> {
        match self {
            Self::Symmetric(b) => Some(b),
            Self::General(_) => None,
        }
    }

    pub fn as_general(&self) -> Option<&[GeneralValuation]> {
        match self {
            Self::General(b) => Some(b),
            Self::Symmetric(_) => None,
        }
    }

    /// Bundle-table view of the profile, lifting symmetric buyers if needed.
    pub fn to_general(&self) -> Result<Vec<GeneralValuation>> {
        match self {
            Self::General(b) => Ok(b.clone()),
            Self::Symmetric(b) => b.iter().map(symmetric_to_general).collect(),
        }
    }
}

/// Deterministic random symmetric valuation of the requested class.
pub fn random_symmetric(m: usize, class: ValuationClass, seed: u64) -> Result<SymmetricValuation> {
    assert!(m >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match class {
        ValuationClass::Additive => {
            let slope = rat_int(rng.gen_range(1..=12)) / rat_int(rng.gen_range(1..=4));
            let values = (0..=m).map(|k| slope.clone() * rat_int(k as i64)).collect();
            SymmetricValuation::new(values)
        }
        ValuationClass::Submodular => {
            // Non-increasing marginals give submodularity directly.
            let mut marginals: Vec<i64> = (0..m).map(|_| rng.gen_range(0..=20)).collect();
            marginals.sort_unstable_by(|a, b| b.cmp(a));
            let mut values = vec![rat_int(0)];
            let mut acc = 0i64;
            for d in marginals {
                acc += d;
                values.push(rat_int(acc));
            }
            SymmetricValuation::new(values)
        }
        ValuationClass::Xos => {
            // Max of rate-capacity clauses: each term r*min(k, c) has a
            // non-increasing per-item average, so the max does too.
            let clauses: Vec<(Rat, usize)> = (0..rng.gen_range(2..=4))
                .map(|_| {
                    (
                        rat_int(rng.gen_range(1..=10)) / rat_int(rng.gen_range(1..=3)),
                        rng.gen_range(1..=m),
                    )
                })
                .collect();
            let values = (0..=m)
                .map(|k| {
                    clauses
                        .iter()
                        .map(|(r, c)| r.clone() * rat_int(k.min(*c) as i64))
                        .max()
                        .unwrap()
                })
                .collect();
            SymmetricValuation::new(values)
        }
        ValuationClass::Subadditive => {
            // Positive marginals, then repair with the subadditive lower
            // envelope v(k) <- min over s of v(s) + v(k-s); one increasing
            // pass reaches the fixpoint since smaller indices are final.
            let mut values = vec![rat_int(0)];
            let mut acc = rat_int(0);
            for _ in 0..m {
                let jump = if rng.gen_bool(0.25) {
                    rng.gen_range(5..=30)
                } else {
                    rng.gen_range(1..=4)
                };
                acc += rat_int(jump);
                values.push(acc.clone());
            }
            for k in 2..=m {
                for s in 1..=k / 2 {
                    let combined = values[s].clone() + values[k - s].clone();
                    if combined < values[k] {
                        values[k] = combined;
                    }
                }
            }
            for k in 1..=m {
                if values[k] < values[k - 1] {
                    let prev = values[k - 1].clone();
                    values[k] = prev;
                }
            }
            let v = SymmetricValuation::new(values)?;
            debug_assert!(classify_symmetric(&v).contains(&ValuationClass::Subadditive));
            Ok(v)
        }
        other => Err(Error::UnsupportedClass(other)),
    }
}

/// Deterministic random monotone normalized general valuation (no structure
/// beyond monotonicity); integer-valued. Test-data generation for the
/// heterogeneous-item bridges.
pub fn random_general(m: usize, seed: u64) -> Result<GeneralValuation> {
    assert!(m >= 1 && m <= general_m_cap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = 1usize << m;
    let mut values = vec![rat_int(0); size];
    for mask in 1..size {
        let floor = (0..m)
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| values[mask & !(1 << j)].clone())
            .max()
            .unwrap();
        values[mask] = floor + rat_int(rng.gen_range(0..=2));
    }
    GeneralValuation::new(m, values)
}
