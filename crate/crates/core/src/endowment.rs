//! Endowment equilibria: gain functions over owned bundles, verification as
//! a Walrasian equilibrium of the endowed profile, and the transformations
//! to and from two-price equilibria.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::equilibrium::{is_2pe, is_we, Allocation, EquilibriumReport, TwoPriceSystem};
use crate::error::{Error, Result};
use crate::rational::{rat_int, Rat};
use crate::valuation::{supporting_prices, GeneralValuation, ValuationProfile};

/// Explicit gain tables: for each endowment `X`, a value for every `Z ⊆ X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitGain {
    tables: BTreeMap<u32, BTreeMap<u32, Rat>>,
}

impl ExplicitGain {
    pub fn new(tables: BTreeMap<u32, BTreeMap<u32, Rat>>) -> Result<Self> {
        for (&x, table) in &tables {
            for (&z, g) in table {
                if z & !x != 0 {
                    return Err(Error::Malformed(format!(
                        "gain key {z:#b} is not a subset of endowment {x:#b}"
                    )));
                }
                if g.is_negative() {
                    return Err(Error::Malformed("negative gain".into()));
                }
            }
            match table.get(&0) {
                Some(g) if g.is_zero() => {}
                _ => {
                    return Err(Error::Malformed(
                        "gain of the empty set must be present and zero".into(),
                    ))
                }
            }
            // Monotone in Z.
            for (&z, g) in table {
                for j in 0..32 {
                    if z >> j & 1 == 1 {
                        let smaller = table.get(&(z & !(1 << j))).ok_or_else(|| {
                            Error::Malformed(format!("gain table for {x:#b} missing a subset"))
                        })?;
                        if smaller > g {
                            return Err(Error::Malformed("gain not monotone".into()));
                        }
                    }
                }
            }
        }
        Ok(Self { tables })
    }

    /// Additive gain from per-item increments over one endowment.
    pub fn additive(x: u32, m: usize, per_item: &[Rat]) -> Result<Self> {
        let mut table = BTreeMap::new();
        let mut z = 0u32;
        loop {
            let sum: Rat = (0..m)
                .filter(|j| z >> j & 1 == 1)
                .map(|j| per_item[j].clone())
                .sum();
            table.insert(z, sum);
            if z == x {
                break;
            }
            z = (z.wrapping_sub(x)) & x;
        }
        Self::new(BTreeMap::from([(x, table)]))
    }

    pub fn value(&self, x: u32, z: u32) -> Result<Rat> {
        self.tables
            .get(&x)
            .and_then(|t| t.get(&z))
            .cloned()
            .ok_or_else(|| {
                Error::Malformed(format!("no explicit gain for endowment {x:#b}, set {z:#b}"))
            })
    }
}

/// A buyer's gain model: how owning a bundle inflates its value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GainFunction {
    /// Gain equals the bare value of the kept part.
    Identity,
    /// Gain equals the loss from giving the part up.
    AbsoluteLoss,
    /// Gain equals the supporting-price total of the kept part.
    SupportingPrices,
    Explicit(ExplicitGain),
}

/// Evaluates `g^X(Z)` for `Z ⊆ X`.
pub fn gain_value(g: &GainFunction, v: &GeneralValuation, x: u32, z: u32) -> Result<Rat> {
    if z & !x != 0 {
        return Err(Error::Malformed(format!(
            "gain argument {z:#b} is not a subset of the endowment {x:#b}"
        )));
    }
    match g {
        GainFunction::Identity => Ok(v.value(z).clone()),
        GainFunction::AbsoluteLoss => Ok(v.value(x) - v.value(x & !z)),
        GainFunction::SupportingPrices => {
            let prices = supporting_prices(v, x).ok_or(Error::NotXos)?;
            let items: Vec<usize> = (0..v.m()).filter(|j| x >> j & 1 == 1).collect();
            Ok(items
                .iter()
                .enumerate()
                .filter(|&(_, &j)| z >> j & 1 == 1)
                .map(|(idx, _)| prices[idx].clone())
                .sum())
        }
        GainFunction::Explicit(table) => table.value(x, z),
    }
}

/// Marginal gain `g^X(Z | Y) = g^X(Z ∪ Y) - g^X(Y)`.
pub fn gain_marginal(
    g: &GainFunction,
    v: &GeneralValuation,
    x: u32,
    z: u32,
    y: u32,
) -> Result<Rat> {
    Ok(gain_value(g, v, x, z | y)? - gain_value(g, v, x, y)?)
}

/// The endowed valuation `v^X(Y) = v(Y) + g^X(X ∩ Y)`.
pub fn endowed_valuation(
    v: &GeneralValuation,
    x: u32,
    g: &GainFunction,
) -> Result<GeneralValuation> {
    let m = v.m();
    let values: Result<Vec<Rat>> = (0..1u32 << m)
        .map(|y| Ok(v.value(y) + gain_value(g, v, x, x & y)?))
        .collect();
    GeneralValuation::new(m, values?)
}

/// Endowment-equilibrium test: a Walrasian equilibrium of the profile
/// endowed with each buyer's own bundle.
pub fn is_ee(
    profile: &ValuationProfile,
    alloc: &Allocation,
    prices: &[Rat],
    gains: &[GainFunction],
) -> Result<EquilibriumReport> {
    let buyers = profile.to_general()?;
    if gains.len() != buyers.len() {
        return Err(Error::DimensionMismatch(
            "one gain function per buyer required".into(),
        ));
    }
    let bundles = alloc.bundles();
    let endowed: Result<Vec<GeneralValuation>> = buyers
        .iter()
        .zip(&bundles)
        .zip(gains)
        .map(|((v, &x), g)| endowed_valuation(v, x, g))
        .collect();
    let endowed_profile = ValuationProfile::general(endowed?)?;
    is_we(&endowed_profile, alloc, prices)
}

/// Turns a two-price equilibrium into an endowment equilibrium at the high
/// prices: each buyer's gain must cover the price gap of what she would
/// give up; the canonical additive gain per item meets every such threshold
/// with equality.
pub fn two_pe_to_ee(
    profile: &ValuationProfile,
    alloc: &Allocation,
    prices: &TwoPriceSystem,
) -> Result<(Vec<GainFunction>, EquilibriumReport)> {
    let report = is_2pe(profile, alloc, prices)?;
    if !report.holds {
        return Err(Error::NotAnEquilibrium(format!(
            "input is not a two-price equilibrium: {:?}",
            report.witness
        )));
    }
    let m = profile.m();
    let deltas: Vec<Rat> = (0..m)
        .map(|j| &prices.high()[j] - &prices.low()[j])
        .collect();
    let gains: Result<Vec<GainFunction>> = alloc
        .bundles()
        .iter()
        .map(|&x| Ok(GainFunction::Explicit(ExplicitGain::additive(x, m, &deltas)?)))
        .collect();
    let gains = gains?;
    let verify = is_ee(profile, alloc, prices.high(), &gains)?;
    Ok((gains, verify))
}

/// Turns an endowment equilibrium into a two-price equilibrium with the
/// same high prices. Zero low prices always work; per bundle, the largest
/// uniform low price allowed by the gain thresholds is used instead when
/// positive.
pub fn ee_to_2pe(
    profile: &ValuationProfile,
    alloc: &Allocation,
    high: &[Rat],
    gains: &[GainFunction],
) -> Result<(TwoPriceSystem, EquilibriumReport)> {
    let report = is_ee(profile, alloc, high, gains)?;
    if !report.holds {
        return Err(Error::NotAnEquilibrium(
            "input is not an endowment equilibrium".into(),
        ));
    }
    let buyers = profile.to_general()?;
    let bundles = alloc.bundles();
    let m = profile.m();
    let mut low = vec![rat_int(0); m];
    for (i, &x) in bundles.iter().enumerate() {
        if x == 0 {
            continue;
        }
        // Largest uniform q with |Z| * q <= max(0, p(Z) - g(Z | X\Z)) for
        // every non-empty Z ⊆ X, also capped by the high prices.
        let mut q: Option<Rat> = None;
        let mut z = x;
        loop {
            let price_sum: Rat = (0..m)
                .filter(|j| z >> j & 1 == 1)
                .map(|j| high[j].clone())
                .sum();
            let marginal = gain_marginal(&gains[i], &buyers[i], x, z, x & !z)?;
            let allowed = (price_sum - marginal).max(rat_int(0)) / rat_int(z.count_ones() as i64);
            if q.as_ref().map_or(true, |cur| allowed < *cur) {
                q = Some(allowed);
            }
            z = (z - 1) & x;
            if z == 0 {
                break;
            }
        }
        let mut q = q.expect("non-empty bundle");
        for j in 0..m {
            if x >> j & 1 == 1 && high[j] < q {
                q = high[j].clone();
            }
        }
        for j in 0..m {
            if x >> j & 1 == 1 {
                low[j] = q.clone();
            }
        }
    }
    let system = TwoPriceSystem::new(high.to_vec(), low)?;
    let verify = is_2pe(profile, alloc, &system)?;
    if !verify.holds {
        return Err(Error::NotAnEquilibrium(
            "derived two-price system failed verification".into(),
        ));
    }
    Ok((system, verify))
}

/// Verifies the weak-to-strong ordering of the three gain functions on an
/// endowment: identity, then supporting prices, then absolute loss, in
/// withdrawal marginals.
pub fn gain_order_check(v: &GeneralValuation, x: u32) -> Result<bool> {
    if v.m() > 16 {
        return Err(Error::InstanceTooLarge(
            "gain order scan enumerates all subsets".into(),
        ));
    }
    let prices = supporting_prices(v, x).ok_or(Error::NotXos)?;
    let items: Vec<usize> = (0..v.m()).filter(|j| x >> j & 1 == 1).collect();
    let mut z = x;
    loop {
        let id = v.value(x) - v.value(x & !z);
        let sp: Rat = items
            .iter()
            .enumerate()
            .filter(|&(_, &j)| z >> j & 1 == 1)
            .map(|(idx, _)| prices[idx].clone())
            .sum();
        let al = v.value(z).clone();
        if !(id <= sp && sp <= al) {
            return Ok(false);
        }
        if z == 0 {
            break;
        }
        z = (z - 1) & x;
    }
    Ok(true)
}

/// For an XOS profile: supports a welfare-optimal allocation both as a
/// two-price equilibrium (supporting prices up, zeros down) and as an
/// endowment equilibrium under supporting-price gains.
pub fn xos_ee_exists(
    profile: &ValuationProfile,
) -> Result<(Allocation, Vec<Rat>, EquilibriumReport)> {
    if profile.m() > 16 {
        return Err(Error::InstanceTooLarge(
            "supporting-price synthesis enumerates all subsets".into(),
        ));
    }
    let buyers = profile.to_general()?;
    let (_, alloc) = crate::equilibrium::opt_welfare(&ValuationProfile::General(buyers.clone()))?;
    let bundles = alloc.bundles();
    let m = profile.m();
    let mut high = vec![rat_int(0); m];
    for (i, &x) in bundles.iter().enumerate() {
        if x == 0 {
            continue;
        }
        let prices = supporting_prices(&buyers[i], x).ok_or(Error::NotXos)?;
        for (idx, j) in (0..m).filter(|j| x >> j & 1 == 1).enumerate() {
            high[j] = prices[idx].clone();
        }
    }
    let system = TwoPriceSystem::with_zero_low(high.clone())?;
    let two_pe = is_2pe(profile, &alloc, &system)?;
    if !two_pe.holds {
        return Err(Error::NotAnEquilibrium(
            "supporting-price system failed the two-price check".into(),
        ));
    }
    let gains = vec![GainFunction::SupportingPrices; buyers.len()];
    let ee = is_ee(profile, &alloc, &high, &gains)?;
    if !ee.holds {
        return Err(Error::NotAnEquilibrium(
            "supporting-price endowment check failed".into(),
        ));
    }
    Ok((alloc, high, ee))
}
