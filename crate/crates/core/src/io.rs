//! JSON file schemas: markets, equilibria, and bid profiles. Rationals
//! travel as strings (integer, `"p/q"`, or finite decimal); floats never
//! appear.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{Allocation, TwoPriceSystem};
use crate::error::{Error, Result};
use crate::rational::{format_rat, parse_rat, Rat};
use crate::valuation::{GeneralValuation, SymmetricValuation, ValuationProfile};

#[derive(Debug, Serialize, Deserialize)]
pub struct MarketFile {
    pub m: usize,
    pub buyers: Vec<BuyerSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BuyerSpec {
    Symmetric { values: Vec<String> },
    General { values: BTreeMap<String, String> },
}

/// Parses a market file. A profile mixing symmetric and general buyers is
/// homogenized by expanding the symmetric ones into bundle tables.
pub fn market_from_json(text: &str) -> Result<ValuationProfile> {
    let file: MarketFile =
        serde_json::from_str(text).map_err(|e| Error::Malformed(format!("market json: {e}")))?;
    profile_from_market(&file)
}

pub fn profile_from_market(file: &MarketFile) -> Result<ValuationProfile> {
    let m = file.m;
    if file.buyers.is_empty() {
        return Err(Error::Malformed("market needs at least one buyer".into()));
    }
    let all_symmetric = file
        .buyers
        .iter()
        .all(|b| matches!(b, BuyerSpec::Symmetric { .. }));
    if all_symmetric {
        let buyers: Result<Vec<SymmetricValuation>> = file
            .buyers
            .iter()
            .map(|b| {
                let BuyerSpec::Symmetric { values } = b else {
                    unreachable!()
                };
                if values.len() != m + 1 {
                    return Err(Error::DimensionMismatch(format!(
                        "symmetric buyer needs {} values for m={m}",
                        m + 1
                    )));
                }
                let parsed: Result<Vec<Rat>> = values.iter().map(|s| parse_rat(s)).collect();
                SymmetricValuation::new(parsed?)
            })
            .collect();
        return ValuationProfile::symmetric(buyers?);
    }
    let buyers: Result<Vec<GeneralValuation>> = file
        .buyers
        .iter()
        .map(|b| match b {
            BuyerSpec::Symmetric { values } => {
                if values.len() != m + 1 {
                    return Err(Error::DimensionMismatch(format!(
                        "symmetric buyer needs {} values for m={m}",
                        m + 1
                    )));
                }
                let parsed: Result<Vec<Rat>> = values.iter().map(|s| parse_rat(s)).collect();
                crate::valuation::symmetric_to_general(&SymmetricValuation::new(parsed?)?)
            }
            BuyerSpec::General { values } => {
                let size = 1usize
                    .checked_shl(m as u32)
                    .filter(|_| m <= 30)
                    .ok_or_else(|| Error::InstanceTooLarge(format!("2^{m} bundles")))?;
                let mut table = vec![None; size];
                for (key, value) in values {
                    let mask: usize = key
                        .parse()
                        .map_err(|_| Error::Malformed(format!("bad bundle key {key:?}")))?;
                    if mask >= size {
                        return Err(Error::IndexOutOfRange(format!(
                            "bundle key {key} exceeds 2^{m}"
                        )));
                    }
                    table[mask] = Some(parse_rat(value)?);
                }
                let complete: Result<Vec<Rat>> = table
                    .into_iter()
                    .enumerate()
                    .map(|(mask, v)| {
                        v.ok_or_else(|| Error::Malformed(format!("missing bundle {mask}")))
                    })
                    .collect();
                GeneralValuation::new(m, complete?)
            }
        })
        .collect();
    ValuationProfile::general(buyers?)
}

pub fn market_to_file(profile: &ValuationProfile) -> MarketFile {
    let buyers = match profile {
        ValuationProfile::Symmetric(buyers) => buyers
            .iter()
            .map(|v| BuyerSpec::Symmetric {
                values: v.values().iter().map(format_rat).collect(),
            })
            .collect(),
        ValuationProfile::General(buyers) => buyers
            .iter()
            .map(|v| BuyerSpec::General {
                values: (0..1u32 << v.m())
                    .map(|mask| (mask.to_string(), format_rat(v.value(mask))))
                    .collect(),
            })
            .collect(),
    };
    MarketFile {
        m: profile.m(),
        buyers,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EquilibriumFile {
    pub allocation: AllocationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<Vec<String>>,
    /// Single price vector for Walrasian / conditional checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AllocationSpec {
    /// Bundle sizes (identical items).
    Counts(Vec<usize>),
    /// Explicit bundles as lists of item indices.
    Bundles(Vec<Vec<usize>>),
}

pub fn allocation_from_spec(spec: &AllocationSpec, m: usize) -> Result<Allocation> {
    match spec {
        AllocationSpec::Counts(counts) => Allocation::symmetric(counts.clone(), m),
        AllocationSpec::Bundles(lists) => {
            let bundles: Result<Vec<u32>> = lists
                .iter()
                .map(|items| {
                    let mut mask = 0u32;
                    for &j in items {
                        if j >= m {
                            return Err(Error::IndexOutOfRange(format!(
                                "item {j} out of range for m={m}"
                            )));
                        }
                        mask |= 1 << j;
                    }
                    Ok(mask)
                })
                .collect();
            Allocation::general(bundles?, m)
        }
    }
}

pub fn allocation_to_spec(alloc: &Allocation) -> AllocationSpec {
    match alloc {
        Allocation::Symmetric(counts) => AllocationSpec::Counts(counts.clone()),
        Allocation::General(bundles) => AllocationSpec::Bundles(
            bundles
                .iter()
                .map(|&b| (0..32).filter(|j| b >> j & 1 == 1).collect())
                .collect(),
        ),
    }
}

pub fn parse_price_vector(values: &[String], m: usize) -> Result<Vec<Rat>> {
    if values.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "expected {m} prices, got {}",
            values.len()
        )));
    }
    values.iter().map(|s| parse_rat(s)).collect()
}

pub fn two_price_system_from_file(file: &EquilibriumFile, m: usize) -> Result<TwoPriceSystem> {
    let high = file
        .high
        .as_ref()
        .or(file.prices.as_ref())
        .ok_or_else(|| Error::Malformed("missing high prices".into()))?;
    let high = parse_price_vector(high, m)?;
    let low = match &file.low {
        Some(low) => parse_price_vector(low, m)?,
        None => match (&file.high, &file.prices) {
            // A bare price vector reads as Walrasian (both sides equal).
            (None, Some(_)) => high.clone(),
            _ => vec![crate::rational::rat_int(0); m],
        },
    };
    TwoPriceSystem::new(high, low)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BidsFile {
    pub bids: Vec<Vec<String>>,
}

pub fn bids_from_json(text: &str) -> Result<crate::auction::BidProfile> {
    let file: BidsFile =
        serde_json::from_str(text).map_err(|e| Error::Malformed(format!("bids json: {e}")))?;
    let rows: Result<Vec<Vec<Rat>>> = file
        .bids
        .iter()
        .map(|row| row.iter().map(|s| parse_rat(s)).collect())
        .collect();
    crate::auction::BidProfile::new(rows?)
}

pub fn format_rat_vec(values: &[Rat]) -> Vec<String> {
    values.iter().map(format_rat).collect()
}
