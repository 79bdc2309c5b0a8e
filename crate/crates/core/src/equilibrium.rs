//! Equilibrium verification (two-price, Walrasian, conditional), discrepancy
//! and welfare, uniform-price machinery, discrepancy minimization, and the
//! Walrasian-existence test over identical items.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::geometry::{
    backward_slopes_with, forward_slopes_with, sm_closure, TriangleDecomposition,
};
use crate::rational::{format_rat, rat_int, Rat};
use crate::valuation::{GeneralValuation, SymmetricValuation, ValuationProfile};

/// Partition of the items among the buyers; every item is allocated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Allocation {
    /// Bundle sizes per buyer; items are identified with consecutive blocks
    /// in index order when per-item prices are involved.
    Symmetric(Vec<usize>),
    /// Explicit disjoint bundle masks per buyer.
    General(Vec<u32>),
}

impl Allocation {
    pub fn symmetric(counts: Vec<usize>, m: usize) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total != m {
            return Err(Error::CountMismatch(format!(
                "allocation covers {total} of {m} items"
            )));
        }
        Ok(Self::Symmetric(counts))
    }

    pub fn general(bundles: Vec<u32>, m: usize) -> Result<Self> {
        let full = ((1u64 << m) - 1) as u32;
        let mut seen = 0u32;
        for &b in &bundles {
            if b & !full != 0 {
                return Err(Error::IndexOutOfRange(format!(
                    "bundle {b:#b} uses items beyond {m}"
                )));
            }
            if b & seen != 0 {
                return Err(Error::CountMismatch("bundles overlap".into()));
            }
            seen |= b;
        }
        if seen != full {
            return Err(Error::CountMismatch(
                "allocation leaves items unallocated".into(),
            ));
        }
        Ok(Self::General(bundles))
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Symmetric(c) => c.len(),
            Self::General(b) => b.len(),
        }
    }

    pub fn counts(&self) -> Vec<usize> {
        match self {
            Self::Symmetric(c) => c.clone(),
            Self::General(b) => b.iter().map(|x| x.count_ones() as usize).collect(),
        }
    }

    /// Bundle masks; symmetric counts become consecutive blocks.
    pub fn bundles(&self) -> Vec<u32> {
        match self {
            Self::General(b) => b.clone(),
            Self::Symmetric(c) => blocks_from_counts(c),
        }
    }
}

pub(crate) fn blocks_from_counts(counts: &[usize]) -> Vec<u32> {
    let mut start = 0usize;
    counts
        .iter()
        .map(|&k| {
            let mask = (((1u64 << k) - 1) << start) as u32;
            start += k;
            mask
        })
        .collect()
}

/// Per-item high and low price vectors with `high >= low >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoPriceSystem {
    high: Vec<Rat>,
    low: Vec<Rat>,
}

impl TwoPriceSystem {
    pub fn new(high: Vec<Rat>, low: Vec<Rat>) -> Result<Self> {
        if high.len() != low.len() {
            return Err(Error::DimensionMismatch(
                "high and low price vectors differ in length".into(),
            ));
        }
        for (j, (h, l)) in high.iter().zip(&low).enumerate() {
            if l.is_negative() || h < l {
                return Err(Error::PriceOrderViolation {
                    item: j,
                    high: format_rat(h),
                    low: format_rat(l),
                });
            }
        }
        Ok(Self { high, low })
    }

    /// Walrasian prices: one price per item on both sides.
    pub fn walrasian(p: Vec<Rat>) -> Result<Self> {
        Self::new(p.clone(), p)
    }

    /// Conditional-equilibrium form: given prices on top, zeros below.
    pub fn with_zero_low(high: Vec<Rat>) -> Result<Self> {
        let low = vec![rat_int(0); high.len()];
        Self::new(high, low)
    }

    pub fn m(&self) -> usize {
        self.high.len()
    }

    pub fn high(&self) -> &[Rat] {
        &self.high
    }

    pub fn low(&self) -> &[Rat] {
        &self.low
    }

    pub fn gap_sum(&self) -> Rat {
        self.high
            .iter()
            .zip(&self.low)
            .map(|(h, l)| h - l)
            .sum()
    }
}

/// Per-buyer uniform price pairs; `None` exactly for empty bundles, which
/// carry no prices (the (0, m) table rows print them as n.a.).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniformPrices {
    pairs: Vec<Option<(Rat, Rat)>>,
}

impl UniformPrices {
    pub fn new(pairs: Vec<Option<(Rat, Rat)>>) -> Result<Self> {
        for (i, pair) in pairs.iter().enumerate() {
            if let Some((h, l)) = pair {
                if l.is_negative() || h < l {
                    return Err(Error::PriceOrderViolation {
                        item: i,
                        high: format_rat(h),
                        low: format_rat(l),
                    });
                }
            }
        }
        Ok(Self { pairs })
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair(&self, i: usize) -> Option<&(Rat, Rat)> {
        self.pairs[i].as_ref()
    }

    pub fn high(&self, i: usize) -> Option<&Rat> {
        self.pairs[i].as_ref().map(|(h, _)| h)
    }

    pub fn low(&self, i: usize) -> Option<&Rat> {
        self.pairs[i].as_ref().map(|(_, l)| l)
    }

    /// Expands to per-item vectors over consecutive blocks.
    pub fn expand(&self, counts: &[usize]) -> Result<TwoPriceSystem> {
        if counts.len() != self.pairs.len() {
            return Err(Error::CountMismatch(
                "price pairs and counts differ in length".into(),
            ));
        }
        let mut high = Vec::new();
        let mut low = Vec::new();
        for (i, &k) in counts.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let Some((h, l)) = &self.pairs[i] else {
                return Err(Error::CountMismatch(format!(
                    "buyer {i} holds items but has no price pair"
                )));
            };
            for _ in 0..k {
                high.push(h.clone());
                low.push(l.clone());
            }
        }
        TwoPriceSystem::new(high, low)
    }

    /// Detects per-bundle uniformity of an item-price system over blocks.
    pub fn from_item_prices(prices: &TwoPriceSystem, counts: &[usize]) -> Option<Self> {
        let mut pairs = Vec::with_capacity(counts.len());
        let mut start = 0usize;
        for &k in counts {
            if k == 0 {
                pairs.push(None);
                start += k;
                continue;
            }
            let h = &prices.high()[start];
            let l = &prices.low()[start];
            for j in start..start + k {
                if &prices.high()[j] != h || &prices.low()[j] != l {
                    return None;
                }
            }
            pairs.push(Some((h.clone(), l.clone())));
            start += k;
        }
        Some(Self { pairs })
    }

    pub fn gap_sum(&self, counts: &[usize]) -> Rat {
        self.pairs
            .iter()
            .zip(counts)
            .map(|(pair, &k)| match pair {
                Some((h, l)) => (h - l) * rat_int(k as i64),
                None => rat_int(0),
            })
            .sum()
    }
}

/// How a verification failed: the deviating buyer, the target bundle, and
/// both utility sides (the deviation side is strictly larger).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub buyer: usize,
    pub target: DeviationTarget,
    pub current_utility: Rat,
    pub deviation_utility: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeviationTarget {
    /// Explicit bundle mask.
    Bundle(u32),
    /// Count-based target: keep `own_kept` items, take `taken[i]` items
    /// from each buyer's bundle.
    Counts { own_kept: usize, taken: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumReport {
    pub holds: bool,
    pub witness: Option<Witness>,
}

impl EquilibriumReport {
    pub fn ok() -> Self {
        Self {
            holds: true,
            witness: None,
        }
    }

    pub fn fail(witness: Witness) -> Self {
        Self {
            holds: false,
            witness: Some(witness),
        }
    }
}

fn bundle_count_check(profile: &ValuationProfile, alloc: &Allocation) -> Result<()> {
    if alloc.n() != profile.n() {
        return Err(Error::CountMismatch(format!(
            "allocation has {} bundles for {} buyers",
            alloc.n(),
            profile.n()
        )));
    }
    let total: usize = alloc.counts().iter().sum();
    if total != profile.m() {
        return Err(Error::CountMismatch(format!(
            "allocation covers {total} of {} items",
            profile.m()
        )));
    }
    Ok(())
}

/// Two-price equilibrium test: every buyer weakly prefers her bundle at low
/// prices over any other bundle priced low on her items and high elsewhere.
pub fn is_2pe(
    profile: &ValuationProfile,
    alloc: &Allocation,
    prices: &TwoPriceSystem,
) -> Result<EquilibriumReport> {
    bundle_count_check(profile, alloc)?;
    if prices.m() != profile.m() {
        return Err(Error::DimensionMismatch(
            "price vectors do not match item count".into(),
        ));
    }
    if let (Some(buyers), Allocation::Symmetric(counts)) = (profile.as_symmetric(), alloc) {
        if let Some(uniform) = UniformPrices::from_item_prices(prices, counts) {
            return Ok(u2pe_check_greedy(buyers, counts, &uniform));
        }
    }
    let buyers = profile.to_general()?;
    let bundles = alloc.bundles();
    Ok(is_2pe_general(&buyers, &bundles, prices))
}

fn is_2pe_general(
    buyers: &[GeneralValuation],
    bundles: &[u32],
    prices: &TwoPriceSystem,
) -> EquilibriumReport {
    let m = buyers[0].m();
    let size = 1usize << m;
    for (i, v) in buyers.iter().enumerate() {
        let own = bundles[i];
        // cost[T] charges low on owned items and high elsewhere.
        let mut cost = vec![rat_int(0); size];
        for t in 1..size {
            let j = t.trailing_zeros() as usize;
            let item_price = if own >> j & 1 == 1 {
                prices.low()[j].clone()
            } else {
                prices.high()[j].clone()
            };
            cost[t] = cost[t & (t - 1)].clone() + item_price;
        }
        let current = v.value(own) - &cost[own as usize];
        for t in 0..size {
            let dev = v.value(t as u32) - &cost[t];
            if dev > current {
                return EquilibriumReport::fail(Witness {
                    buyer: i,
                    target: DeviationTarget::Bundle(t as u32),
                    current_utility: current,
                    deviation_utility: dev,
                });
            }
        }
    }
    EquilibriumReport::ok()
}

/// Count-based reduction for symmetric buyers with per-bundle uniform
/// prices: the optimal deviation of size `t` buys items cheapest-first,
/// treating the own bundle as a source at the low price.
fn u2pe_check_greedy(
    buyers: &[SymmetricValuation],
    counts: &[usize],
    up: &UniformPrices,
) -> EquilibriumReport {
    let m = buyers[0].m();
    for (i, v) in buyers.iter().enumerate() {
        let k = counts[i];
        let own_low = up.low(i).cloned().unwrap_or_else(|| rat_int(0));
        let current = v.value(k) - own_low.clone() * rat_int(k as i64);

        // (price, capacity, source buyer) sorted ascending; own bundle first
        // among equal prices so witnesses prefer keeping items.
        let mut sources: Vec<(Rat, usize, usize)> = vec![(own_low, k, i)];
        for (i2, &k2) in counts.iter().enumerate() {
            if i2 == i || k2 == 0 {
                continue;
            }
            sources.push((up.high(i2).expect("non-empty bundle has prices").clone(), k2, i2));
        }
        sources.sort_by(|a, b| a.0.cmp(&b.0).then(usize::from(a.2 != i).cmp(&usize::from(b.2 != i))).then(a.2.cmp(&b.2)));

        let mut acquired = 0usize;
        let mut cost = rat_int(0);
        let mut taken = vec![0usize; counts.len()];
        // t = 0 case: abandon everything.
        if *v.value(0) > current {
            return EquilibriumReport::fail(Witness {
                buyer: i,
                target: DeviationTarget::Counts {
                    own_kept: 0,
                    taken: vec![0; counts.len()],
                },
                current_utility: current,
                deviation_utility: v.value(0).clone(),
            });
        }
        let mut source_idx = 0usize;
        while acquired < m {
            let (price, cap, from) = &sources[source_idx];
            let take = (*cap).min(m - acquired);
            for _ in 0..take {
                acquired += 1;
                cost += price;
                taken[*from] += 1;
                let dev = v.value(acquired) - &cost;
                if dev > current {
                    let own_kept = taken[i];
                    let mut foreign = taken.clone();
                    foreign[i] = 0;
                    return EquilibriumReport::fail(Witness {
                        buyer: i,
                        target: DeviationTarget::Counts {
                            own_kept,
                            taken: foreign,
                        },
                        current_utility: current,
                        deviation_utility: dev,
                    });
                }
            }
            source_idx += 1;
        }
    }
    EquilibriumReport::ok()
}

/// Walrasian equilibrium test: a 2PE with both price sides equal.
pub fn is_we(
    profile: &ValuationProfile,
    alloc: &Allocation,
    prices: &[Rat],
) -> Result<EquilibriumReport> {
    let system = TwoPriceSystem::walrasian(prices.to_vec())?;
    is_2pe(profile, alloc, &system)
}

/// Conditional equilibrium test: individual rationality, outward stability,
/// and market clearance, checked directly.
pub fn is_ce(
    profile: &ValuationProfile,
    alloc: &Allocation,
    prices: &[Rat],
) -> Result<EquilibriumReport> {
    bundle_count_check(profile, alloc)?;
    if prices.len() != profile.m() {
        return Err(Error::DimensionMismatch(
            "price vector does not match item count".into(),
        ));
    }
    if prices.iter().any(|p| p.is_negative()) {
        return Err(Error::Malformed("negative price".into()));
    }
    if let (Some(buyers), Allocation::Symmetric(counts)) = (profile.as_symmetric(), alloc) {
        let system = TwoPriceSystem::with_zero_low(prices.to_vec())?;
        if let Some(uniform) = UniformPrices::from_item_prices(&system, counts) {
            return Ok(is_ce_symmetric_uniform(buyers, counts, &uniform));
        }
    }
    let buyers = profile.to_general()?;
    let bundles = alloc.bundles();
    Ok(is_ce_general(&buyers, &bundles, prices))
}

fn is_ce_general(
    buyers: &[GeneralValuation],
    bundles: &[u32],
    prices: &[Rat],
) -> EquilibriumReport {
    let m = buyers[0].m();
    let full = ((1u64 << m) - 1) as u32;
    for (i, v) in buyers.iter().enumerate() {
        let own = bundles[i];
        let own_cost: Rat = (0..m)
            .filter(|j| own >> j & 1 == 1)
            .map(|j| prices[j].clone())
            .sum();
        let current = v.value(own) - &own_cost;
        if current.is_negative() {
            return EquilibriumReport::fail(Witness {
                buyer: i,
                target: DeviationTarget::Bundle(0),
                current_utility: current,
                deviation_utility: rat_int(0),
            });
        }
        // Outward stability over additions from the complement.
        let complement = full & !own;
        let mut add = complement;
        loop {
            if add != 0 {
                let add_cost: Rat = (0..m)
                    .filter(|j| add >> j & 1 == 1)
                    .map(|j| prices[j].clone())
                    .sum();
                let dev = v.value(own | add) - &own_cost - &add_cost;
                if dev > current {
                    return EquilibriumReport::fail(Witness {
                        buyer: i,
                        target: DeviationTarget::Bundle(own | add),
                        current_utility: current,
                        deviation_utility: dev,
                    });
                }
            }
            if add == 0 {
                break;
            }
            add = (add - 1) & complement;
        }
    }
    EquilibriumReport::ok()
}

fn is_ce_symmetric_uniform(
    buyers: &[SymmetricValuation],
    counts: &[usize],
    up: &UniformPrices,
) -> EquilibriumReport {
    for (i, v) in buyers.iter().enumerate() {
        let k = counts[i];
        let own_price = up.high(i).cloned().unwrap_or_else(|| rat_int(0));
        let current = v.value(k) - own_price * rat_int(k as i64);
        if current.is_negative() {
            return EquilibriumReport::fail(Witness {
                buyer: i,
                target: DeviationTarget::Counts {
                    own_kept: 0,
                    taken: vec![0; counts.len()],
                },
                current_utility: current,
                deviation_utility: rat_int(0),
            });
        }
        let mut sources: Vec<(Rat, usize, usize)> = counts
            .iter()
            .enumerate()
            .filter(|&(i2, &k2)| i2 != i && k2 > 0)
            .map(|(i2, &k2)| (up.high(i2).expect("priced").clone(), k2, i2))
            .collect();
        sources.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut extra = 0usize;
        let mut add_cost = rat_int(0);
        let mut taken = vec![0usize; counts.len()];
        for (price, cap, from) in &sources {
            for _ in 0..*cap {
                extra += 1;
                add_cost += price;
                taken[*from] += 1;
                let dev = v.value(k + extra) - v.value(k) - &add_cost + &current;
                if dev > current {
                    return EquilibriumReport::fail(Witness {
                        buyer: i,
                        target: DeviationTarget::Counts {
                            own_kept: k,
                            taken: taken.clone(),
                        },
                        current_utility: current,
                        deviation_utility: dev,
                    });
                }
            }
        }
    }
    EquilibriumReport::ok()
}

/// Social welfare of an allocation.
pub fn welfare(profile: &ValuationProfile, alloc: &Allocation) -> Result<Rat> {
    bundle_count_check(profile, alloc)?;
    match (profile, alloc) {
        (ValuationProfile::Symmetric(buyers), _) => {
            let counts = alloc.counts();
            Ok(buyers
                .iter()
                .zip(&counts)
                .map(|(v, &k)| v.value(k).clone())
                .sum())
        }
        (ValuationProfile::General(buyers), _) => {
            let bundles = alloc.bundles();
            Ok(buyers
                .iter()
                .zip(&bundles)
                .map(|(v, &b)| v.value(b).clone())
                .sum())
        }
    }
}

/// Welfare-maximizing allocation; deterministic (lexicographically smallest
/// count vector / bundle list among maximizers).
pub fn opt_welfare(profile: &ValuationProfile) -> Result<(Rat, Allocation)> {
    match profile {
        ValuationProfile::Symmetric(buyers) => {
            let m = buyers[0].m();
            let n = buyers.len();
            // best[i][r]: max welfare splitting r items among buyers i..n.
            let mut best = vec![vec![rat_int(0); m + 1]; n + 1];
            for i in (0..n).rev() {
                for r in 0..=m {
                    let mut b = buyers[i].value(0) + &best[i + 1][r];
                    for k in 1..=r {
                        let cand = buyers[i].value(k) + &best[i + 1][r - k];
                        if cand > b {
                            b = cand;
                        }
                    }
                    best[i][r] = b;
                }
            }
            let mut counts = Vec::with_capacity(n);
            let mut r = m;
            for i in 0..n {
                // Smallest k attaining the optimum keeps the vector
                // lexicographically minimal.
                let mut chosen = r; // last buyer must absorb the rest
                if i + 1 < n {
                    for k in 0..=r {
                        if buyers[i].value(k) + &best[i + 1][r - k] == best[i][r] {
                            chosen = k;
                            break;
                        }
                    }
                }
                counts.push(chosen);
                r -= chosen;
            }
            let value = best[0][m].clone();
            Ok((value, Allocation::Symmetric(counts)))
        }
        ValuationProfile::General(buyers) => {
            let m = buyers[0].m();
            let n = buyers.len();
            let size = 1usize << m;
            // best[i][s]: max welfare allocating item set s among buyers i..n.
            let mut best = vec![vec![rat_int(0); size]; n + 1];
            for i in (0..n).rev() {
                for s in 0..size {
                    // t runs over subsets of s given to buyer i.
                    let mut b = buyers[i].value(0) + &best[i + 1][s];
                    let mut t = s;
                    while t != 0 {
                        let cand = buyers[i].value(t as u32) + &best[i + 1][s & !t];
                        if cand > b {
                            b = cand;
                        }
                        t = (t - 1) & s;
                    }
                    best[i][s] = b;
                }
            }
            let mut bundles = Vec::with_capacity(n);
            let mut s = size - 1;
            for i in 0..n {
                let chosen = if i + 1 < n {
                    // Ascending mask order keeps the bundle list minimal.
                    (0..=s)
                        .filter(|&t| t & s == t)
                        .find(|&t| buyers[i].value(t as u32) + &best[i + 1][s & !t] == best[i][s])
                        .expect("optimum is attained")
                } else {
                    s
                };
                bundles.push(chosen as u32);
                s &= !chosen;
            }
            let value = best[0][size - 1].clone();
            Ok((value, Allocation::General(bundles)))
        }
    }
}

/// Price-gap sum normalized by welfare.
pub fn discrepancy(
    profile: &ValuationProfile,
    alloc: &Allocation,
    prices: &TwoPriceSystem,
) -> Result<Rat> {
    let sw = welfare(profile, alloc)?;
    if sw.is_zero() {
        return Err(Error::ZeroWelfare);
    }
    Ok(prices.gap_sum() / sw)
}

/// Welfare guarantee of a verified 2PE: `SW >= OPT / (1 + d)`.
pub fn welfare_bound_check(
    profile: &ValuationProfile,
    alloc: &Allocation,
    prices: &TwoPriceSystem,
) -> Result<bool> {
    let report = is_2pe(profile, alloc, prices)?;
    if !report.holds {
        return Err(Error::NotAnEquilibrium(
            "welfare bound applies to 2PEs only".into(),
        ));
    }
    let sw = welfare(profile, alloc)?;
    let (opt, _) = opt_welfare(profile)?;
    let d = if sw.is_zero() {
        if prices.gap_sum().is_zero() {
            rat_int(0)
        } else {
            return Err(Error::ZeroWelfare);
        }
    } else {
        prices.gap_sum() / &sw
    };
    Ok(sw * (rat_int(1) + d) >= opt)
}

/// Averages the high and low prices within every bundle of a verified 2PE
/// over identical items; the result is again a 2PE with equal discrepancy.
pub fn uniformize(
    profile: &ValuationProfile,
    alloc: &Allocation,
    prices: &TwoPriceSystem,
) -> Result<(TwoPriceSystem, EquilibriumReport)> {
    let Some(_) = profile.as_symmetric() else {
        return Err(Error::Malformed("uniformize needs identical items".into()));
    };
    let report = is_2pe(profile, alloc, prices)?;
    if !report.holds {
        return Err(Error::NotAnEquilibrium(
            "uniformize requires a valid 2PE".into(),
        ));
    }
    let counts = alloc.counts();
    let mut high = prices.high().to_vec();
    let mut low = prices.low().to_vec();
    let mut start = 0usize;
    for &k in &counts {
        if k > 0 {
            let h_avg: Rat =
                high[start..start + k].iter().cloned().sum::<Rat>() / rat_int(k as i64);
            let l_avg: Rat =
                low[start..start + k].iter().cloned().sum::<Rat>() / rat_int(k as i64);
            for j in start..start + k {
                high[j] = h_avg.clone();
                low[j] = l_avg.clone();
            }
        }
        start += k;
    }
    let uniform = TwoPriceSystem::new(high, low)?;
    let verify = is_2pe(profile, alloc, &uniform)?;
    Ok((uniform, verify))
}

/// Necessary-and-sufficient utility-maximization conditions for a uniform
/// two-price system over identical items: the low price is capped by every
/// priced bundle's high price and by the own backward slope, and every
/// upward deviation is priced at least its marginal value.
pub fn u2pe_feasible(
    buyers: &[SymmetricValuation],
    counts: &[usize],
    up: &UniformPrices,
) -> Result<EquilibriumReport> {
    let m = buyers[0].m();
    if buyers.len() != counts.len() || up.n() != counts.len() {
        return Err(Error::CountMismatch(
            "buyers, counts, and price pairs differ in length".into(),
        ));
    }
    if counts.iter().sum::<usize>() != m {
        return Err(Error::CountMismatch(format!(
            "allocation covers {} of {m} items",
            counts.iter().sum::<usize>()
        )));
    }
    for (i, &k) in counts.iter().enumerate() {
        if k > 0 && up.pair(i).is_none() {
            return Err(Error::CountMismatch(format!(
                "buyer {i} holds items but has no price pair"
            )));
        }
    }

    let min_high = counts
        .iter()
        .enumerate()
        .filter(|&(_, &k)| k > 0)
        .map(|(i, _)| up.high(i).expect("priced"))
        .min()
        .cloned();

    for (i, v) in buyers.iter().enumerate() {
        let k = counts[i];
        if k == 0 {
            // Condition 3 still constrains buyers with nothing.
        } else {
            let low = up.low(i).expect("priced");
            // Condition 1: low price at most every priced high price.
            if let Some(mh) = &min_high {
                if low > mh {
                    let (victim, _) = counts
                        .iter()
                        .enumerate()
                        .filter(|&(i2, &k2)| k2 > 0 && up.high(i2).unwrap() == mh)
                        .next()
                        .expect("min exists");
                    let mut taken = vec![0usize; counts.len()];
                    let current = v.value(k) - low * rat_int(k as i64);
                    let deviation = if victim == i {
                        // Own high below own low cannot happen (pair order).
                        unreachable!("pair order enforced at construction")
                    } else {
                        taken[victim] = 1;
                        v.value(k) - low * rat_int((k - 1) as i64) - mh
                    };
                    return Ok(EquilibriumReport::fail(Witness {
                        buyer: i,
                        target: DeviationTarget::Counts {
                            own_kept: k - 1,
                            taken,
                        },
                        current_utility: current,
                        deviation_utility: deviation,
                    }));
                }
            }
            // Condition 2: low price at most the own min-backward slope.
            let back = crate::geometry::min_backward_slope(v, k, None)?;
            if *low > back.value {
                let current = v.value(k) - low * rat_int(k as i64);
                let kept = k - back.realizer;
                let deviation = v.value(kept) - low * rat_int(kept as i64);
                return Ok(EquilibriumReport::fail(Witness {
                    buyer: i,
                    target: DeviationTarget::Counts {
                        own_kept: kept,
                        taken: vec![0; counts.len()],
                    },
                    current_utility: current,
                    deviation_utility: deviation,
                }));
            }
        }

        // Condition 3: buying t - k extra items cheapest-first from the other
        // bundles costs at least the marginal value.
        let low_total = up
            .low(i)
            .map(|l| l * rat_int(k as i64))
            .unwrap_or_else(|| rat_int(0));
        let current = v.value(k) - &low_total;
        let mut sources: Vec<(Rat, usize, usize)> = counts
            .iter()
            .enumerate()
            .filter(|&(i2, &k2)| i2 != i && k2 > 0)
            .map(|(i2, &k2)| (up.high(i2).expect("priced").clone(), k2, i2))
            .collect();
        sources.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut extra = 0usize;
        let mut cost = rat_int(0);
        let mut taken = vec![0usize; counts.len()];
        for (price, cap, from) in &sources {
            for _ in 0..*cap {
                extra += 1;
                cost += price;
                taken[*from] += 1;
                if v.value(k + extra) - v.value(k) > cost {
                    let deviation = v.value(k + extra) - &low_total - &cost;
                    return Ok(EquilibriumReport::fail(Witness {
                        buyer: i,
                        target: DeviationTarget::Counts {
                            own_kept: k,
                            taken: taken.clone(),
                        },
                        current_utility: current.clone(),
                        deviation_utility: deviation,
                    }));
                }
            }
        }
    }
    Ok(EquilibriumReport::ok())
}

/// The canonical uniform prices for a split: each bundle's high price is the
/// largest forward slope among the other buyers, and each low price is the
/// own backward slope capped by the smallest high price.
pub fn u2pe_sufficient_prices(
    buyers: &[SymmetricValuation],
    counts: &[usize],
) -> Result<UniformPrices> {
    let m = buyers[0].m();
    if buyers.len() != counts.len() {
        return Err(Error::CountMismatch(
            "buyers and counts differ in length".into(),
        ));
    }
    if counts.iter().sum::<usize>() != m {
        return Err(Error::CountMismatch(format!(
            "allocation covers {} of {m} items",
            counts.iter().sum::<usize>()
        )));
    }
    if buyers.len() == 1 {
        return UniformPrices::new(vec![Some((rat_int(0), rat_int(0)))]);
    }
    let forward: Vec<Option<Rat>> = buyers
        .iter()
        .zip(counts)
        .map(|(v, &k)| {
            if k < m {
                Some(crate::geometry::max_forward_slope(v, k, None).unwrap().value)
            } else {
                None
            }
        })
        .collect();
    let highs: Vec<Option<Rat>> = (0..buyers.len())
        .map(|i| {
            if counts[i] == 0 {
                return None;
            }
            forward
                .iter()
                .enumerate()
                .filter(|&(i2, _)| i2 != i)
                .filter_map(|(_, f)| f.as_ref())
                .max()
                .cloned()
        })
        .collect();
    let min_high = highs.iter().flatten().min().cloned();
    let pairs = (0..buyers.len())
        .map(|i| {
            let k = counts[i];
            if k == 0 {
                return None;
            }
            let high = highs[i].clone().expect("non-empty bundle prices exist");
            let back = crate::geometry::min_backward_slope(&buyers[i], k, None)
                .unwrap()
                .value;
            let mut low = back;
            if let Some(mh) = &min_high {
                if low > *mh {
                    low = mh.clone();
                }
            }
            Some((high, low))
        })
        .collect();
    let up = UniformPrices::new(pairs)?;
    debug_assert!(u2pe_feasible(buyers, counts, &up).map(|r| r.holds).unwrap_or(false));
    Ok(up)
}

#[derive(Debug, Clone)]
pub struct MinDiscrepancy {
    pub counts: Vec<usize>,
    pub prices: UniformPrices,
    pub discrepancy: Rat,
    /// True when the enumeration certifies a global minimum (two buyers).
    pub exact: bool,
}

const COMPOSITION_BUDGET: usize = 500_000;

/// Minimum-discrepancy split under the canonical uniform prices. Exact for
/// two buyers; an upper bound for more (the price rule is then only
/// sufficient).
pub fn min_discrepancy(buyers: &[SymmetricValuation]) -> Result<MinDiscrepancy> {
    let m = buyers[0].m();
    let n = buyers.len();
    if n == 1 {
        let prices = u2pe_sufficient_prices(buyers, &[m])?;
        return Ok(MinDiscrepancy {
            counts: vec![m],
            prices,
            discrepancy: rat_int(0),
            exact: true,
        });
    }

    // Slope tables once per distinct buyer; identical buyers share.
    let mut tables: Vec<SlopeTables> = Vec::with_capacity(n);
    for (idx, v) in buyers.iter().enumerate() {
        if let Some(prev) = buyers[..idx].iter().position(|w| w == v) {
            tables.push(tables[prev].clone());
        } else {
            tables.push(SlopeTables::build(v));
        }
    }

    let mut best: Option<(Rat, Vec<usize>, UniformPrices)> = None;
    let mut consider = |counts: &[usize], result: Option<(Rat, UniformPrices)>| {
        let Some((d, prices)) = result else { return };
        let better = match &best {
            None => true,
            Some((bd, bc, _)) => d < *bd || (d == *bd && counts < &bc[..]),
        };
        if better {
            best = Some((d, counts.to_vec(), prices));
        }
    };

    if n == 2 {
        for k in 0..=m {
            let counts = [k, m - k];
            consider(&counts, split_discrepancy_exact_two(buyers, &tables, &counts));
        }
    } else {
        let mut seen = 0usize;
        let mut counts = vec![0usize; n];
        enumerate_compositions(m, n, &mut counts, 0, &mut seen, &mut |c: &[usize]| {
            consider(c, split_discrepancy(buyers, &tables, c));
            Ok(())
        })?;
    }

    let (discrepancy, counts, prices) =
        best.ok_or(Error::ZeroWelfare)?;
    Ok(MinDiscrepancy {
        counts,
        prices,
        discrepancy,
        exact: n == 2,
    })
}

#[derive(Clone)]
struct SlopeTables {
    forward: Vec<Rat>,
    backward: Vec<Rat>,
}

impl SlopeTables {
    fn build(v: &SymmetricValuation) -> Self {
        let decomp = sm_closure(v);
        Self {
            forward: forward_slopes_with(v, &decomp),
            backward: backward_slopes_with(v, &decomp),
        }
    }

    fn forward_at(&self, k: usize) -> Option<&Rat> {
        self.forward.get(k)
    }

    fn backward_at(&self, k: usize) -> Option<&Rat> {
        if k == 0 {
            None
        } else {
            self.backward.get(k - 1)
        }
    }
}

/// Canonical-price discrepancy of one split from precomputed slope tables;
/// None when the split has zero welfare.
fn split_discrepancy(
    buyers: &[SymmetricValuation],
    tables: &[SlopeTables],
    counts: &[usize],
) -> Option<(Rat, UniformPrices)> {
    let sw: Rat = buyers
        .iter()
        .zip(counts)
        .map(|(v, &k)| v.value(k).clone())
        .sum();
    if sw.is_zero() {
        return None;
    }
    let n = buyers.len();
    let highs: Vec<Option<Rat>> = (0..n)
        .map(|i| {
            if counts[i] == 0 {
                return None;
            }
            (0..n)
                .filter(|&i2| i2 != i)
                .filter_map(|i2| tables[i2].forward_at(counts[i2]))
                .max()
                .cloned()
        })
        .collect();
    let min_high = highs.iter().flatten().min().cloned();
    let mut gap = rat_int(0);
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let k = counts[i];
        if k == 0 {
            pairs.push(None);
            continue;
        }
        let high = highs[i].clone()?;
        let mut low = tables[i].backward_at(k)?.clone();
        if let Some(mh) = &min_high {
            if low > *mh {
                low = mh.clone();
            }
        }
        gap += (high.clone() - low.clone()) * rat_int(k as i64);
        pairs.push(Some((high, low)));
    }
    let prices = UniformPrices::new(pairs).ok()?;
    Some((gap / sw, prices))
}

/// Minimum price gap of one two-buyer split over all uniform supports, not
/// just the canonical assignment. With both bundles non-empty the free
/// parameter is the common price floor `s`: high prices are
/// `max(bound_i, s)`, low prices are the backward slopes capped at
/// `min` of the highs, and the gap is piecewise linear in `s` with
/// breakpoints at the bounds and backward slopes.
fn split_discrepancy_exact_two(
    buyers: &[SymmetricValuation],
    tables: &[SlopeTables],
    counts: &[usize],
) -> Option<(Rat, UniformPrices)> {
    let (k1, k2) = (counts[0], counts[1]);
    let sw = buyers[0].value(k1) + buyers[1].value(k2);
    if sw.is_zero() {
        return None;
    }

    // Single-bundle splits: raise the high price to the backward slope when
    // the deviation bound allows it.
    if k1 == 0 || k2 == 0 {
        let (owner, outsider, k) = if k1 == 0 { (1, 0, k2) } else { (0, 1, k1) };
        let bound = tables[outsider].forward_at(counts[outsider])?.clone();
        let back = tables[owner].backward_at(k)?.clone();
        let high = bound.clone().max(back.clone());
        let low = back.min(high.clone());
        let gap = (high.clone() - low.clone()) * rat_int(k as i64);
        let mut pairs = vec![None, None];
        pairs[owner] = Some((high, low));
        let prices = UniformPrices::new(pairs).ok()?;
        return Some((gap / sw, prices));
    }

    // bound1 caps what buyer 2 would pay for bundle 1 and vice versa.
    let bound1 = tables[1].forward_at(k2)?.clone();
    let bound2 = tables[0].forward_at(k1)?.clone();
    let back1 = tables[0].backward_at(k1)?.clone();
    let back2 = tables[1].backward_at(k2)?.clone();

    let floor = bound1.clone().min(bound2.clone());
    let mut candidates = vec![
        floor.clone(),
        bound1.clone().max(bound2.clone()),
        back1.clone().max(floor.clone()),
        back2.clone().max(floor.clone()),
    ];
    candidates.sort();
    candidates.dedup();

    let mut best: Option<(Rat, (Rat, Rat), (Rat, Rat))> = None;
    for s in candidates {
        let high1 = bound1.clone().max(s.clone());
        let high2 = bound2.clone().max(s.clone());
        let cap = high1.clone().min(high2.clone());
        let low1 = back1.clone().min(cap.clone());
        let low2 = back2.clone().min(cap);
        let gap = (high1.clone() - low1.clone()) * rat_int(k1 as i64)
            + (high2.clone() - low2.clone()) * rat_int(k2 as i64);
        if best.as_ref().map_or(true, |(g, _, _)| gap < *g) {
            best = Some((gap, (high1, low1), (high2, low2)));
        }
    }
    let (gap, pair1, pair2) = best.expect("non-empty candidate set");
    let prices = UniformPrices::new(vec![Some(pair1), Some(pair2)]).ok()?;
    debug_assert!(u2pe_feasible(buyers, counts, &prices)
        .map(|r| r.holds)
        .unwrap_or(false));
    Some((gap / sw, prices))
}

fn enumerate_compositions(
    remaining: usize,
    buyers_left: usize,
    counts: &mut Vec<usize>,
    pos: usize,
    seen: &mut usize,
    consider: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if buyers_left == 1 {
        counts[pos] = remaining;
        *seen += 1;
        if *seen > COMPOSITION_BUDGET {
            return Err(Error::InstanceTooLarge(format!(
                "more than {COMPOSITION_BUDGET} splits to enumerate"
            )));
        }
        return consider(counts);
    }
    for k in 0..=remaining {
        counts[pos] = k;
        enumerate_compositions(remaining - k, buyers_left - 1, counts, pos + 1, seen, consider)?;
    }
    Ok(())
}

/// Walrasian-equilibrium search over identical items: a WE exists iff some
/// split puts every buyer on an intersection index with the price between
/// everyone's forward and backward slopes. Returns the allocation and the
/// supporting price.
pub fn we_exists_symmetric(buyers: &[SymmetricValuation]) -> Option<(Allocation, Rat)> {
    let m = buyers[0].m();
    let n = buyers.len();
    let decomps: Vec<TriangleDecomposition> = buyers.iter().map(sm_closure).collect();

    // Candidate prices: every triangle slope, plus zero. If any price
    // supports a WE then the max forward slope at the chosen split does, and
    // that value is one of these.
    let mut candidates: Vec<Rat> = decomps
        .iter()
        .flat_map(|d| d.slopes().iter().cloned())
        .collect();
    candidates.push(rat_int(0));
    candidates.sort();
    candidates.dedup();

    for p in candidates {
        // feasible[i]: intersection indices usable at price p.
        let feasible: Vec<Vec<usize>> = decomps
            .iter()
            .map(|d| {
                d.intersection_indices()
                    .iter()
                    .enumerate()
                    .filter(|&(pos, &k)| {
                        let fwd_ok = k == m || d.slopes()[pos] <= p;
                        let bwd_ok = k == 0 || d.slopes()[pos - 1] >= p;
                        fwd_ok && bwd_ok
                    })
                    .map(|(_, &k)| k)
                    .collect()
            })
            .collect();
        // Subset-sum over buyers to reach exactly m.
        let mut reach = vec![false; m + 1];
        reach[0] = true;
        let mut layers: Vec<Vec<bool>> = Vec::with_capacity(n);
        for f in &feasible {
            layers.push(reach.clone());
            let mut next = vec![false; m + 1];
            for s in 0..=m {
                if !reach[s] {
                    continue;
                }
                for &k in f {
                    if s + k <= m {
                        next[s + k] = true;
                    }
                }
            }
            reach = next;
        }
        if !reach[m] {
            continue;
        }
        // Reconstruct the lexicographically smallest counts.
        let mut counts = vec![0usize; n];
        let mut need = m;
        for i in (0..n).rev() {
            let before = &layers[i];
            let k = *feasible[i]
                .iter()
                .filter(|&&k| k <= need && before[need - k])
                .min()
                .expect("reachable");
            counts[i] = k;
            need -= k;
        }
        // Supporting price: the largest forward slope actually taken.
        let price = counts
            .iter()
            .enumerate()
            .filter(|&(_, &k)| k < m)
            .map(|(i, &k)| {
                let pos = decomps[i]
                    .intersection_indices()
                    .binary_search(&k)
                    .expect("intersection");
                decomps[i].slopes()[pos].clone()
            })
            .max()
            .unwrap_or_else(|| rat_int(0));
        let alloc = Allocation::Symmetric(counts);
        debug_assert!(
            is_we(
                &ValuationProfile::Symmetric(buyers.to_vec()),
                &alloc,
                &vec![price.clone(); m]
            )
            .map(|r| r.holds)
            .unwrap_or(false)
        );
        return Some((alloc, price));
    }
    None
}

/// Supports a welfare-optimal allocation in a 2PE by pricing every item at
/// its owner's bundle value (zero low prices); the discrepancy is at most
/// the item count.
pub fn opt_discrepancy_upper_bound(
    profile: &ValuationProfile,
) -> Result<(Allocation, TwoPriceSystem, Rat)> {
    let buyers = profile.to_general()?;
    let (opt, alloc) = opt_welfare(&ValuationProfile::General(buyers.clone()))?;
    let bundles = alloc.bundles();
    let m = profile.m();
    let mut high = vec![rat_int(0); m];
    for (i, &b) in bundles.iter().enumerate() {
        let owner_value = buyers[i].value(b);
        for j in 0..m {
            if b >> j & 1 == 1 {
                high[j] = owner_value.clone();
            }
        }
    }
    let prices = TwoPriceSystem::with_zero_low(high)?;
    let report = is_2pe(&ValuationProfile::General(buyers.clone()), &alloc, &prices)?;
    if !report.holds {
        return Err(Error::NotAnEquilibrium(
            "optimal-allocation pricing failed verification".into(),
        ));
    }
    let d = if opt.is_zero() {
        rat_int(0)
    } else {
        prices.gap_sum() / &opt
    };
    debug_assert!(d <= rat_int(m as i64));
    Ok((alloc, prices, d))
}

/// Conditional-equilibrium existence over identical items, searched over
/// splits with per-bundle uniform prices (complete: averaging any CE's
/// prices within bundles preserves it).
pub fn ce_exists_symmetric(buyers: &[SymmetricValuation]) -> Result<Option<(Allocation, Vec<Rat>)>> {
    let m = buyers[0].m();
    let n = buyers.len();
    let mut found: Option<(Vec<usize>, Vec<Rat>)> = None;
    let mut consider = |counts: &[usize]| -> Result<()> {
        if found.is_some() {
            return Ok(());
        }
        if let Some(qs) = ce_feasible_uniform(buyers, counts) {
            found = Some((counts.to_vec(), qs));
        }
        Ok(())
    };
    if n == 2 {
        for k in 0..=m {
            consider(&[k, m - k])?;
        }
    } else {
        let mut seen = 0usize;
        let mut counts = vec![0usize; n];
        enumerate_compositions(m, n, &mut counts, 0, &mut seen, &mut consider)?;
    }
    let Some((counts, qs)) = found else {
        return Ok(None);
    };
    let mut prices = Vec::with_capacity(m);
    for (i, &k) in counts.iter().enumerate() {
        for _ in 0..k {
            prices.push(qs[i].clone());
        }
    }
    let alloc = Allocation::Symmetric(counts);
    debug_assert!(is_ce(
        &ValuationProfile::Symmetric(buyers.to_vec()),
        &alloc,
        &prices
    )
    .map(|r| r.holds)
    .unwrap_or(false));
    Ok(Some((alloc, prices)))
}

/// Uniform per-bundle prices supporting a CE at this split, if any. Each
/// bundle price is bounded below by what outward stability demands of every
/// OTHER buyer and above by the owner's individual rationality.
fn ce_feasible_uniform(buyers: &[SymmetricValuation], counts: &[usize]) -> Option<Vec<Rat>> {
    let n = buyers.len();
    if n == 2 {
        let mut qs = Vec::with_capacity(2);
        for i in 0..2 {
            let other = 1 - i;
            let k = counts[i];
            // With two buyers, k > 0 means the other buyer is not exhausted
            // and can add up to k items from this bundle.
            let lower = if k > 0 {
                let horizon = k.min(buyers[other].m() - counts[other]);
                crate::geometry::max_forward_slope(&buyers[other], counts[other], Some(horizon))
                    .expect("valid slope query")
                    .value
                    .max(rat_int(0))
            } else {
                rat_int(0)
            };
            if k > 0 {
                let upper = buyers[i].value(k) / rat_int(k as i64);
                if lower > upper {
                    return None;
                }
            }
            qs.push(lower);
        }
        return Some(qs);
    }
    // General n: exact feasibility over uniform bundle prices. Outward
    // stability for buyer i over every take-vector from other bundles.
    let mut lp = crate::linprog::Feasibility::new(n);
    for (i, v) in buyers.iter().enumerate() {
        let k = counts[i];
        if k > 0 {
            let mut row = vec![rat_int(0); n];
            row[i] = rat_int(k as i64);
            lp.le(row, v.value(k).clone());
        }
        let caps: Vec<usize> = (0..n).map(|i2| if i2 == i { 0 } else { counts[i2] }).collect();
        let mut take = vec![0usize; n];
        loop {
            // Advance the mixed-radix take vector.
            let mut pos = 0;
            loop {
                if pos == n {
                    break;
                }
                if take[pos] < caps[pos] {
                    take[pos] += 1;
                    break;
                }
                take[pos] = 0;
                pos += 1;
            }
            if pos == n {
                break;
            }
            let extra: usize = take.iter().sum();
            let marginal = v.value(k + extra) - v.value(k);
            if marginal.is_positive() {
                let row: Vec<Rat> = take.iter().map(|&t| rat_int(t as i64)).collect();
                lp.ge(row, marginal);
            }
        }
    }
    lp.solve()
}

/// Conditional-equilibrium existence for explicit bundle tables: exact
/// price feasibility per allocation.
pub fn ce_exists_general(buyers: &[GeneralValuation]) -> Result<Option<(Allocation, Vec<Rat>)>> {
    let m = buyers[0].m();
    let n = buyers.len();
    let assignments = (n as u64).checked_pow(m as u32).ok_or_else(|| {
        Error::InstanceTooLarge("too many allocations".into())
    })?;
    if assignments > 200_000 {
        return Err(Error::InstanceTooLarge(format!(
            "{assignments} allocations to enumerate"
        )));
    }
    for code in 0..assignments {
        let mut bundles = vec![0u32; n];
        let mut c = code;
        for j in 0..m {
            bundles[(c % n as u64) as usize] |= 1 << j;
            c /= n as u64;
        }
        let mut lp = crate::linprog::Feasibility::new(m);
        for (i, v) in buyers.iter().enumerate() {
            let own = bundles[i];
            let own_row: Vec<Rat> = (0..m)
                .map(|j| if own >> j & 1 == 1 { rat_int(1) } else { rat_int(0) })
                .collect();
            lp.le(own_row, v.value(own).clone());
            let complement = buyers[i].full_mask() & !own;
            let mut add = complement;
            while add != 0 {
                let marginal = v.value(own | add) - v.value(own);
                if marginal.is_positive() {
                    let row: Vec<Rat> = (0..m)
                        .map(|j| if add >> j & 1 == 1 { rat_int(1) } else { rat_int(0) })
                        .collect();
                    lp.ge(row, marginal);
                }
                add = (add - 1) & complement;
            }
        }
        if let Some(prices) = lp.solve() {
            let alloc = Allocation::general(bundles, m)?;
            return Ok(Some((alloc, prices)));
        }
    }
    Ok(None)
}
