//! Simultaneous second-price auctions: outcome resolution, pure Nash
//! checking, and the correspondence with two-price equilibria.

use num_traits::Signed;

use crate::equilibrium::{is_2pe, Allocation, DeviationTarget, EquilibriumReport, TwoPriceSystem, Witness};
use crate::error::{Error, Result};
use crate::rational::{rat_int, Rat};
use crate::valuation::ValuationProfile;

/// Per-bidder, per-item bids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidProfile {
    bids: Vec<Vec<Rat>>,
}

impl BidProfile {
    pub fn new(bids: Vec<Vec<Rat>>) -> Result<Self> {
        if bids.is_empty() {
            return Err(Error::Malformed("need at least one bidder".into()));
        }
        let m = bids[0].len();
        if bids.iter().any(|row| row.len() != m) {
            return Err(Error::DimensionMismatch("ragged bid matrix".into()));
        }
        if bids.iter().flatten().any(|b| b.is_negative()) {
            return Err(Error::Malformed("negative bid".into()));
        }
        Ok(Self { bids })
    }

    pub fn n(&self) -> usize {
        self.bids.len()
    }

    pub fn m(&self) -> usize {
        self.bids[0].len()
    }

    pub fn bid(&self, i: usize, j: usize) -> &Rat {
        &self.bids[i][j]
    }

    pub fn rows(&self) -> &[Vec<Rat>] {
        &self.bids
    }
}

/// Tie resolution for equal top bids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TieBreak {
    /// Prefer the owner under the given allocation; fall back to the lowest
    /// index when the owner is not among the top bidders.
    PreferAllocation(Allocation),
    LowestIndex,
}

#[derive(Debug, Clone)]
pub struct AuctionOutcome {
    pub allocation: Allocation,
    /// Second-highest bid per item, counting multiplicity.
    pub payments: Vec<Rat>,
    pub tiebreak: String,
}

fn check_dims(profile: &ValuationProfile, bids: &BidProfile) -> Result<()> {
    if bids.n() != profile.n() || bids.m() != profile.m() {
        return Err(Error::DimensionMismatch(format!(
            "bid matrix is {}x{}, market is {}x{}",
            bids.n(),
            bids.m(),
            profile.n(),
            profile.m()
        )));
    }
    Ok(())
}

/// Column maximum and second maximum (with multiplicity) of the bids on
/// item `j`.
fn top_two(bids: &BidProfile, j: usize) -> (Rat, Rat) {
    let mut first = rat_int(-1);
    let mut second = rat_int(-1);
    for i in 0..bids.n() {
        let b = bids.bid(i, j);
        if *b > first {
            second = first;
            first = b.clone();
        } else if *b > second {
            second = b.clone();
        }
    }
    if second < rat_int(0) {
        // Single bidder: the second-highest bid defaults to zero.
        second = rat_int(0);
    }
    (first, second)
}

/// Sells every item to a highest bidder at the second-highest bid.
pub fn resolve(
    profile: &ValuationProfile,
    bids: &BidProfile,
    tiebreak: &TieBreak,
) -> Result<AuctionOutcome> {
    check_dims(profile, bids)?;
    let m = profile.m();
    let n = profile.n();
    if let TieBreak::PreferAllocation(alloc) = tiebreak {
        if alloc.n() != n || alloc.counts().iter().sum::<usize>() != m {
            return Err(Error::DimensionMismatch(
                "tie-break allocation does not match the market".into(),
            ));
        }
    }
    let preferred = match tiebreak {
        TieBreak::PreferAllocation(alloc) => Some(alloc.bundles()),
        TieBreak::LowestIndex => None,
    };
    let mut bundles = vec![0u32; n];
    let mut payments = Vec::with_capacity(m);
    for j in 0..m {
        let (top, second) = top_two(bids, j);
        let winners: Vec<usize> = (0..n).filter(|&i| *bids.bid(i, j) == top).collect();
        let winner = match &preferred {
            Some(bundles_pref) => winners
                .iter()
                .copied()
                .find(|&i| bundles_pref[i] >> j & 1 == 1)
                .unwrap_or(winners[0]),
            None => winners[0],
        };
        bundles[winner] |= 1 << j;
        payments.push(second);
    }
    Ok(AuctionOutcome {
        allocation: Allocation::general(bundles, m)?,
        payments,
        tiebreak: match tiebreak {
            TieBreak::PreferAllocation(_) => "alloc".into(),
            TieBreak::LowestIndex => "index".into(),
        },
    })
}

/// Pure Nash test. A deviator can win any target bundle by outbidding the
/// others, paying the highest competing bid per item; the check is
/// conservative in that a deviator never wins ties, which costs nothing in
/// a second-price auction.
pub fn is_pne(
    profile: &ValuationProfile,
    bids: &BidProfile,
    tiebreak: &TieBreak,
) -> Result<EquilibriumReport> {
    check_dims(profile, bids)?;
    let m = profile.m();
    if m > crate::valuation::general_m_cap() {
        return Err(Error::InstanceTooLarge(format!(
            "deviation scan enumerates 2^{m} bundles"
        )));
    }
    let outcome = resolve(profile, bids, tiebreak)?;
    let buyers = profile.to_general()?;
    let bundles = outcome.allocation.bundles();
    let size = 1usize << m;
    for (i, v) in buyers.iter().enumerate() {
        let own = bundles[i];
        let current = v.value(own)
            - (0..m)
                .filter(|j| own >> j & 1 == 1)
                .map(|j| outcome.payments[j].clone())
                .sum::<Rat>();
        // Competing top bid per item.
        let cost: Vec<Rat> = (0..m)
            .map(|j| {
                (0..profile.n())
                    .filter(|&k| k != i)
                    .map(|k| bids.bid(k, j))
                    .max()
                    .cloned()
                    .unwrap_or_else(|| rat_int(0))
            })
            .collect();
        let mut dev_cost = vec![rat_int(0); size];
        for t in 1..size {
            let j = t.trailing_zeros() as usize;
            dev_cost[t] = dev_cost[t & (t - 1)].clone() + cost[j].clone();
        }
        for t in 0..size {
            let dev = v.value(t as u32) - &dev_cost[t];
            if dev > current {
                return Ok(EquilibriumReport::fail(Witness {
                    buyer: i,
                    target: DeviationTarget::Bundle(t as u32),
                    current_utility: current,
                    deviation_utility: dev,
                }));
            }
        }
    }
    Ok(EquilibriumReport::ok())
}

/// Reads a two-price system off a pure Nash bid profile: high prices are
/// column maxima, low prices column second maxima.
pub fn pne_to_2pe(
    profile: &ValuationProfile,
    bids: &BidProfile,
    tiebreak: &TieBreak,
) -> Result<(Allocation, TwoPriceSystem)> {
    let report = is_pne(profile, bids, tiebreak)?;
    if !report.holds {
        return Err(Error::NotAnEquilibrium(format!(
            "bid profile is not a pure Nash equilibrium: {:?}",
            report.witness
        )));
    }
    let outcome = resolve(profile, bids, tiebreak)?;
    let m = profile.m();
    let mut high = Vec::with_capacity(m);
    let mut low = Vec::with_capacity(m);
    for j in 0..m {
        let (top, second) = top_two(bids, j);
        high.push(top);
        low.push(second);
    }
    let prices = TwoPriceSystem::new(high, low)?;
    let verify = is_2pe(profile, &outcome.allocation, &prices)?;
    if !verify.holds {
        return Err(Error::NotAnEquilibrium(
            "derived price system failed verification".into(),
        ));
    }
    Ok((outcome.allocation, prices))
}

/// Builds equilibrium bids from a two-price equilibrium: every buyer bids
/// the high price on her items and the low price elsewhere. The result is a
/// pure Nash equilibrium under allocation-preferring ties and resolves back
/// to the same allocation.
pub fn two_pe_to_pne(
    profile: &ValuationProfile,
    alloc: &Allocation,
    prices: &TwoPriceSystem,
) -> Result<BidProfile> {
    let report = is_2pe(profile, alloc, prices)?;
    if !report.holds {
        return Err(Error::NotAnEquilibrium(format!(
            "input is not a two-price equilibrium: {:?}",
            report.witness
        )));
    }
    let bundles = alloc.bundles();
    let m = profile.m();
    let bids = BidProfile::new(
        (0..profile.n())
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if bundles[i] >> j & 1 == 1 {
                            prices.high()[j].clone()
                        } else {
                            prices.low()[j].clone()
                        }
                    })
                    .collect()
            })
            .collect(),
    )?;
    let rule = TieBreak::PreferAllocation(Allocation::general(bundles.clone(), m)?);
    let verify = is_pne(profile, &bids, &rule)?;
    if !verify.holds {
        return Err(Error::NotAnEquilibrium(
            "constructed bids failed the Nash check".into(),
        ));
    }
    let outcome = resolve(profile, &bids, &rule)?;
    if outcome.allocation.bundles() != bundles {
        return Err(Error::NotAnEquilibrium(
            "constructed bids resolve to a different allocation".into(),
        ));
    }
    Ok(bids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::no_ce_market;
    use crate::rational::rat;
    use crate::valuation::{random_general, symmetric_to_general, SymmetricValuation};

    #[test]
    fn single_item_resolution() {
        let v = symmetric_to_general(&SymmetricValuation::from_i64(&[0, 1]).unwrap()).unwrap();
        let profile = ValuationProfile::general(vec![v.clone(), v]).unwrap();
        let bids = BidProfile::new(vec![vec![rat_int(1)], vec![rat_int(0)]]).unwrap();
        let outcome = resolve(&profile, &bids, &TieBreak::LowestIndex).unwrap();
        assert_eq!(outcome.allocation.bundles(), vec![0b1, 0]);
        assert_eq!(outcome.payments, vec![rat_int(0)]);
    }

    #[test]
    fn equal_bids_follow_the_preferred_allocation() {
        let v = symmetric_to_general(&SymmetricValuation::from_i64(&[0, 1, 1]).unwrap()).unwrap();
        let profile = ValuationProfile::general(vec![v.clone(), v]).unwrap();
        let bids = BidProfile::new(vec![vec![rat(1, 2); 2], vec![rat(1, 2); 2]]).unwrap();
        let target = Allocation::general(vec![0b10, 0b01], 2).unwrap();
        let outcome = resolve(
            &profile,
            &bids,
            &TieBreak::PreferAllocation(target.clone()),
        )
        .unwrap();
        assert_eq!(outcome.allocation.bundles(), target.bundles());
        // Payments equal the bid value: two-way tie at the top.
        assert_eq!(outcome.payments, vec![rat(1, 2), rat(1, 2)]);
    }

    #[test]
    fn no_ce_market_bid_construction_round_trip() {
        let profile = no_ce_market();
        let alloc = Allocation::general(vec![0b1111, 0], 4).unwrap();
        let prices = TwoPriceSystem::new(vec![rat(9, 10); 4], vec![rat(1, 3); 4]).unwrap();
        let bids = two_pe_to_pne(&profile, &alloc, &prices).unwrap();
        for j in 0..4 {
            assert_eq!(*bids.bid(0, j), rat(9, 10));
            assert_eq!(*bids.bid(1, j), rat(1, 3));
        }
        let rule = TieBreak::PreferAllocation(alloc.clone());
        assert!(is_pne(&profile, &bids, &rule).unwrap().holds);
        let outcome = resolve(&profile, &bids, &rule).unwrap();
        assert_eq!(outcome.allocation.bundles(), alloc.bundles());
        let paid: Rat = outcome.payments.iter().cloned().sum();
        assert_eq!(paid, rat(4, 3));

        let (back_alloc, back_prices) = pne_to_2pe(&profile, &bids, &rule).unwrap();
        assert_eq!(back_alloc.bundles(), alloc.bundles());
        assert_eq!(back_prices, prices);
    }

    #[test]
    fn zero_bids_are_not_stable_when_items_have_value() {
        let v = symmetric_to_general(&SymmetricValuation::from_i64(&[0, 1, 1]).unwrap()).unwrap();
        let profile = ValuationProfile::general(vec![v.clone(), v]).unwrap();
        let bids = BidProfile::new(vec![vec![rat_int(0); 2]; 2]).unwrap();
        let report = is_pne(&profile, &bids, &TieBreak::LowestIndex).unwrap();
        assert!(!report.holds);
        let w = report.witness.unwrap();
        // The losing bidder grabs an item for free.
        assert_eq!(w.buyer, 1);
        assert!(w.deviation_utility > w.current_utility);
    }

    #[test]
    fn unit_demand_pair_hand_enumeration() {
        // Each bidder overbids on her own item, zero elsewhere: a Nash
        // outcome with zero payments.
        let v = symmetric_to_general(&SymmetricValuation::from_i64(&[0, 1, 1]).unwrap()).unwrap();
        let profile = ValuationProfile::general(vec![v.clone(), v]).unwrap();
        let bids = BidProfile::new(vec![
            vec![rat_int(5), rat_int(0)],
            vec![rat_int(0), rat_int(5)],
        ])
        .unwrap();
        assert!(is_pne(&profile, &bids, &TieBreak::LowestIndex).unwrap().holds);
        // Overbidding with crossed competition is not stable: the winner
        // pays above value.
        let crossed = BidProfile::new(vec![
            vec![rat_int(5), rat_int(2)],
            vec![rat_int(2), rat_int(5)],
        ])
        .unwrap();
        let report = is_pne(&profile, &crossed, &TieBreak::LowestIndex).unwrap();
        assert!(!report.holds);
    }

    #[test]
    fn walrasian_prices_bid_as_themselves() {
        // A WE read as a 2PE gives everyone the same bid on every item.
        let v = symmetric_to_general(&SymmetricValuation::from_i64(&[0, 2, 4]).unwrap()).unwrap();
        let profile = ValuationProfile::general(vec![v.clone(), v]).unwrap();
        let alloc = Allocation::general(vec![0b01, 0b10], 2).unwrap();
        let prices = TwoPriceSystem::walrasian(vec![rat_int(2); 2]).unwrap();
        let bids = two_pe_to_pne(&profile, &alloc, &prices).unwrap();
        assert!(bids.rows().iter().all(|row| row.iter().all(|b| *b == rat_int(2))));
    }

    #[test]
    fn single_bidder_zero_bids_give_trivial_prices() {
        let v = symmetric_to_general(&SymmetricValuation::from_i64(&[0, 3, 5]).unwrap()).unwrap();
        let profile = ValuationProfile::general(vec![v]).unwrap();
        let bids = BidProfile::new(vec![vec![rat_int(0); 2]]).unwrap();
        let (alloc, prices) = pne_to_2pe(&profile, &bids, &TieBreak::LowestIndex).unwrap();
        assert_eq!(alloc.bundles(), vec![0b11]);
        assert!(prices.high().iter().all(|p| *p == rat_int(0)));
        assert!(prices.low().iter().all(|p| *p == rat_int(0)));
    }

    #[test]
    fn certificates_become_nash_outcomes_with_welfare_guarantees() {
        use crate::allocation::allocate_heterogeneous;
        use crate::equilibrium::{opt_welfare, welfare, Allocation};
        use crate::valuation::{random_symmetric, ValuationClass};
        for seed in 0..25u64 {
            let n = 2 + (seed as usize) % 3;
            let m = 2 + (seed as usize) % 11;
            let buyers: Vec<_> = (0..n)
                .map(|i| {
                    random_symmetric(m, ValuationClass::Subadditive, seed * 19 + i as u64).unwrap()
                })
                .collect();
            let cert = allocate_heterogeneous(m, &buyers).unwrap();
            let profile = ValuationProfile::symmetric(buyers).unwrap();
            let alloc = Allocation::symmetric(cert.counts.clone(), m).unwrap();
            let system = cert.prices.expand(&cert.counts).unwrap();
            let bids = two_pe_to_pne(&profile, &alloc, &system).unwrap();
            let rule = TieBreak::PreferAllocation(Allocation::general(alloc.bundles(), m).unwrap());
            assert!(is_pne(&profile, &bids, &rule).unwrap().holds, "seed {seed}");
            let sw = welfare(&profile, &alloc).unwrap();
            let (opt, _) = opt_welfare(&profile).unwrap();
            assert!(sw * rat_int(7) >= opt, "seed {seed}");
        }
    }

    #[test]
    fn round_trip_on_random_verified_equilibria() {
        for seed in 0..30 {
            let m = 2 + seed as usize % 4;
            let n = 2 + seed as usize % 2;
            let buyers: Vec<_> = (0..n).map(|i| random_general(m, seed * 13 + i as u64).unwrap()).collect();
            let profile = ValuationProfile::general(buyers).unwrap();
            let (_, alloc, prices, _) =
                match crate::equilibrium::opt_discrepancy_upper_bound(&profile) {
                    Ok((a, p, d)) => ((), a, p, d),
                    Err(crate::error::Error::ZeroWelfare) => continue,
                    Err(e) => panic!("unexpected: {e}"),
                };
            let bids = two_pe_to_pne(&profile, &alloc, &prices).unwrap();
            let rule = TieBreak::PreferAllocation(alloc.clone());
            let (back_alloc, back) = pne_to_2pe(&profile, &bids, &rule).unwrap();
            assert_eq!(back_alloc.bundles(), alloc.bundles(), "seed {seed}");
            // Column maxima reproduce the high prices exactly; the second
            // maxima reproduce the low prices whenever n >= 2.
            assert_eq!(back.high(), prices.high(), "seed {seed}");
            assert_eq!(back.low(), prices.low(), "seed {seed}");
        }
    }
}
