//! Command implementations behind the `twoprice` binary. Every command
//! returns a JSON document; rationals appear as strings, never floats,
//! except in explicitly requested `_approx` fields.

pub mod reproduce;

use serde_json::{json, Value};

use twoprice_core::allocation::{
    allocate_heterogeneous, allocate_identical, build_paper_instance, two_buyer_split, TraceStep,
};
use twoprice_core::auction::{is_pne, pne_to_2pe, resolve, TieBreak};
use twoprice_core::endowment::{ee_to_2pe, gain_value, is_ee, two_pe_to_ee, ExplicitGain, GainFunction};
use twoprice_core::equilibrium::{
    discrepancy, is_2pe, is_ce, is_we, min_discrepancy, opt_discrepancy_upper_bound, opt_welfare,
    welfare, Allocation, DeviationTarget, EquilibriumReport, UniformPrices,
};
use twoprice_core::error::{Error, Result};
use twoprice_core::geometry::{
    backward_slopes, flat_slopes, forward_slopes, sm_closure,
};
use twoprice_core::io::{
    allocation_from_spec, allocation_to_spec, bids_from_json, format_rat_vec, market_from_json,
    market_to_file, two_price_system_from_file, EquilibriumFile,
};
use twoprice_core::rational::{approx_f64, format_rat, parse_rat, Rat};
use twoprice_core::valuation::{classify_general, classify_symmetric, ValuationProfile};

/// Stable fingerprint of the input text for run reports.
pub fn digest(parts: &[&str]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for part in parts {
        for byte in part.bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        hash ^= 0xff;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

fn rat_value(r: &Rat) -> Value {
    Value::String(format_rat(r))
}

fn report_value(report: &EquilibriumReport) -> Value {
    match &report.witness {
        None => json!({ "holds": report.holds }),
        Some(w) => json!({
            "holds": report.holds,
            "witness": {
                "buyer": w.buyer,
                "target": match &w.target {
                    DeviationTarget::Bundle(mask) => json!({
                        "items": (0..32).filter(|j| mask >> j & 1 == 1).collect::<Vec<u32>>(),
                    }),
                    DeviationTarget::Counts { own_kept, taken } => json!({
                        "own_kept": own_kept,
                        "taken": taken,
                    }),
                },
                "current_utility": rat_value(&w.current_utility),
                "deviation_utility": rat_value(&w.deviation_utility),
            }
        }),
    }
}

fn uniform_prices_value(up: &UniformPrices) -> Value {
    let highs: Vec<Value> = (0..up.n())
        .map(|i| up.high(i).map(rat_value).unwrap_or(Value::Null))
        .collect();
    let lows: Vec<Value> = (0..up.n())
        .map(|i| up.low(i).map(rat_value).unwrap_or(Value::Null))
        .collect();
    json!({ "high": highs, "low": lows })
}

pub fn cmd_classify(market_json: &str) -> Result<Value> {
    let profile = market_from_json(market_json)?;
    let per_buyer: Vec<Value> = match &profile {
        ValuationProfile::Symmetric(buyers) => buyers
            .iter()
            .map(|v| json!(classify_symmetric(v).iter().map(|c| format!("{c:?}")).collect::<Vec<_>>()))
            .collect(),
        ValuationProfile::General(buyers) => buyers
            .iter()
            .map(|v| json!(classify_general(v).iter().map(|c| format!("{c:?}")).collect::<Vec<_>>()))
            .collect(),
    };
    Ok(json!({
        "m": profile.m(),
        "n": profile.n(),
        "kind": if profile.as_symmetric().is_some() { "symmetric" } else { "general" },
        "classes": per_buyer,
    }))
}

pub fn cmd_geometry(market_json: &str, buyer: usize) -> Result<Value> {
    let profile = market_from_json(market_json)?;
    let buyers = profile
        .as_symmetric()
        .ok_or_else(|| Error::Malformed("geometry needs a symmetric buyer".into()))?;
    let v = buyers
        .get(buyer)
        .ok_or_else(|| Error::IndexOutOfRange(format!("buyer {buyer}")))?;
    let decomp = sm_closure(v);
    let fwd = forward_slopes(v);
    let bwd = backward_slopes(v);
    Ok(json!({
        "m": v.m(),
        "values": format_rat_vec(v.values()),
        "closure": format_rat_vec(decomp.closure().values()),
        "intersection_indices": decomp.intersection_indices(),
        "triangle_slopes": format_rat_vec(decomp.slopes()),
        "forward_slopes": format_rat_vec(&fwd),
        "backward_slopes": format_rat_vec(&bwd),
        "flat_slopes": format_rat_vec(&flat_slopes(v)),
    }))
}

fn certificate_value(cert: &twoprice_core::allocation::AllocationCertificate) -> Value {
    let prices = uniform_prices_value(&cert.prices);
    json!({
        "counts": cert.counts,
        "high": prices["high"],
        "low": prices["low"],
        "discrepancy": rat_value(&cert.discrepancy),
        "bound": rat_value(&cert.bound),
        "trace": cert.trace.iter().map(|step| match step {
            TraceStep::Triangle { buyer, start, len, remaining } => json!({
                "step": "triangle", "buyer": buyer, "start": start,
                "len": len, "remaining": remaining,
            }),
            TraceStep::GoodPair { x, y, l_x, l_y, c } => json!({
                "step": "good_pair", "x": x, "y": y, "l_x": l_x, "l_y": l_y, "factor": c,
            }),
        }).collect::<Vec<_>>(),
    })
}

pub fn cmd_allocate(market_json: &str, force_identical: bool) -> Result<Value> {
    let profile = market_from_json(market_json)?;
    let buyers = profile
        .as_symmetric()
        .ok_or_else(|| Error::Malformed("allocation needs identical items".into()))?;
    let m = profile.m();
    let identical = force_identical || buyers.windows(2).all(|w| w[0] == w[1]);
    let (cert, mode) = if identical && buyers.len() == 2 {
        (two_buyer_split(&buyers[0])?, "two-buyer")
    } else if identical {
        (allocate_identical(m, buyers.len(), &buyers[0])?, "identical")
    } else {
        (allocate_heterogeneous(m, buyers)?, "heterogeneous")
    };
    let mut out = certificate_value(&cert);
    out["mode"] = json!(mode);
    Ok(out)
}

pub fn cmd_verify(kind: &str, market_json: &str, equilibrium_json: &str) -> Result<(Value, bool)> {
    let profile = market_from_json(market_json)?;
    let file: EquilibriumFile = serde_json::from_str(equilibrium_json)
        .map_err(|e| Error::Malformed(format!("equilibrium json: {e}")))?;
    let alloc = allocation_from_spec(&file.allocation, profile.m())?;
    let (report, extra) = match kind {
        "2pe" => {
            let prices = two_price_system_from_file(&file, profile.m())?;
            let report = is_2pe(&profile, &alloc, &prices)?;
            let d = if report.holds {
                Some(discrepancy(&profile, &alloc, &prices)?)
            } else {
                None
            };
            (report, d)
        }
        "we" => {
            let prices = two_price_system_from_file(&file, profile.m())?;
            if prices.high() != prices.low() {
                return Err(Error::Malformed(
                    "a Walrasian check takes a single price vector".into(),
                ));
            }
            (is_we(&profile, &alloc, prices.high())?, None)
        }
        "ce" => {
            let prices = two_price_system_from_file(&file, profile.m())?;
            (is_ce(&profile, &alloc, prices.high())?, None)
        }
        other => return Err(Error::Malformed(format!("unknown kind {other:?}"))),
    };
    let mut out = json!({
        "kind": kind,
        "report": report_value(&report),
        "welfare": rat_value(&welfare(&profile, &alloc)?),
    });
    if let Some(d) = extra {
        out["discrepancy"] = rat_value(&d);
    }
    Ok((out, report.holds))
}

pub fn cmd_min_discrepancy(market_json: &str) -> Result<Value> {
    let profile = market_from_json(market_json)?;
    let buyers = profile
        .as_symmetric()
        .ok_or_else(|| Error::Malformed("discrepancy scan needs identical items".into()))?;
    let result = min_discrepancy(buyers)?;
    Ok(json!({
        "split": result.counts,
        "prices": uniform_prices_value(&result.prices),
        "discrepancy": rat_value(&result.discrepancy),
        "exact": result.exact,
    }))
}

pub fn cmd_auction(
    action: &str,
    market_json: &str,
    bids_json: &str,
    tiebreak: &str,
    allocation_json: Option<&str>,
) -> Result<(Value, bool)> {
    let profile = market_from_json(market_json)?;
    let bids = bids_from_json(bids_json)?;
    let rule = match tiebreak {
        "index" => TieBreak::LowestIndex,
        "alloc" => {
            let text = allocation_json.ok_or_else(|| {
                Error::Malformed("--tiebreak alloc needs an allocation file".into())
            })?;
            let file: EquilibriumFile = serde_json::from_str(text)
                .map_err(|e| Error::Malformed(format!("allocation json: {e}")))?;
            TieBreak::PreferAllocation(allocation_from_spec(&file.allocation, profile.m())?)
        }
        other => return Err(Error::Malformed(format!("unknown tiebreak {other:?}"))),
    };
    match action {
        "resolve" => {
            let outcome = resolve(&profile, &bids, &rule)?;
            Ok((
                json!({
                    "allocation": serde_json::to_value(allocation_to_spec(&outcome.allocation))
                        .expect("serializable"),
                    "payments": format_rat_vec(&outcome.payments),
                    "tiebreak": outcome.tiebreak,
                }),
                true,
            ))
        }
        "check" => {
            let report = is_pne(&profile, &bids, &rule)?;
            let mut out = json!({ "report": report_value(&report) });
            if report.holds {
                let (alloc, prices) = pne_to_2pe(&profile, &bids, &rule)?;
                out["allocation"] =
                    serde_json::to_value(allocation_to_spec(&alloc)).expect("serializable");
                out["high"] = json!(format_rat_vec(prices.high()));
                out["low"] = json!(format_rat_vec(prices.low()));
                out["discrepancy"] = rat_value(&discrepancy(&profile, &alloc, &prices)?);
            }
            let holds = report.holds;
            Ok((out, holds))
        }
        other => Err(Error::Malformed(format!("unknown auction action {other:?}"))),
    }
}

fn parse_gain_spec(spec: &str, n: usize) -> Result<Vec<GainFunction>> {
    match spec {
        "id" => Ok(vec![GainFunction::Identity; n]),
        "al" => Ok(vec![GainFunction::AbsoluteLoss; n]),
        "sp" => Ok(vec![GainFunction::SupportingPrices; n]),
        other => {
            let path = other
                .strip_prefix("file:")
                .ok_or_else(|| Error::Malformed(format!("unknown gain {other:?}")))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Malformed(format!("gain file: {e}")))?;
            gains_from_json(&text, n)
        }
    }
}

/// Explicit gain file: one object per buyer mapping endowment masks to
/// `{subset mask: value}` tables (decimal mask keys).
pub fn gains_from_json(text: &str, n: usize) -> Result<Vec<GainFunction>> {
    let raw: Vec<std::collections::BTreeMap<String, std::collections::BTreeMap<String, String>>> =
        serde_json::from_str(text).map_err(|e| Error::Malformed(format!("gain json: {e}")))?;
    if raw.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} gain tables for {n} buyers",
            raw.len()
        )));
    }
    raw.into_iter()
        .map(|tables| {
            let mut parsed = std::collections::BTreeMap::new();
            for (x, table) in tables {
                let x: u32 = x
                    .parse()
                    .map_err(|_| Error::Malformed(format!("bad endowment key {x:?}")))?;
                let mut inner = std::collections::BTreeMap::new();
                for (z, value) in table {
                    let z: u32 = z
                        .parse()
                        .map_err(|_| Error::Malformed(format!("bad subset key {z:?}")))?;
                    inner.insert(z, parse_rat(&value)?);
                }
                parsed.insert(x, inner);
            }
            Ok(GainFunction::Explicit(ExplicitGain::new(parsed)?))
        })
        .collect()
}

pub fn cmd_endowment(
    action: &str,
    market_json: &str,
    equilibrium_json: &str,
    gain: &str,
) -> Result<(Value, bool)> {
    let profile = market_from_json(market_json)?;
    let file: EquilibriumFile = serde_json::from_str(equilibrium_json)
        .map_err(|e| Error::Malformed(format!("equilibrium json: {e}")))?;
    let alloc = allocation_from_spec(&file.allocation, profile.m())?;
    match action {
        "check" => {
            let prices = two_price_system_from_file(&file, profile.m())?;
            let gains = parse_gain_spec(gain, profile.n())?;
            let report = is_ee(&profile, &alloc, prices.high(), &gains)?;
            let holds = report.holds;
            Ok((json!({ "report": report_value(&report) }), holds))
        }
        "convert" => {
            // From a two-price equilibrium to an endowment equilibrium and
            // back to the largest uniform low prices.
            let prices = two_price_system_from_file(&file, profile.m())?;
            let (gains, ee_report) = two_pe_to_ee(&profile, &alloc, &prices)?;
            let (system, back_report) = ee_to_2pe(&profile, &alloc, prices.high(), &gains)?;
            let bundles = alloc.bundles();
            let buyers = profile.to_general()?;
            let gains_out: Vec<Value> = gains
                .iter()
                .zip(&bundles)
                .zip(&buyers)
                .map(|((g, &x), v)| {
                    let full = gain_value(g, v, x, x).expect("endowment gain");
                    json!({
                        "endowment": (0..32).filter(|j| x >> j & 1 == 1).collect::<Vec<u32>>(),
                        "full_gain": rat_value(&full),
                    })
                })
                .collect();
            let holds = ee_report.holds && back_report.holds;
            Ok((
                json!({
                    "endowment_report": report_value(&ee_report),
                    "gains": gains_out,
                    "recovered_high": format_rat_vec(system.high()),
                    "recovered_low": format_rat_vec(system.low()),
                    "recovered_report": report_value(&back_report),
                }),
                holds,
            ))
        }
        other => Err(Error::Malformed(format!("unknown endowment action {other:?}"))),
    }
}

pub fn cmd_paper_instance(name: &str) -> Result<Value> {
    let profile = build_paper_instance(name)?;
    serde_json::to_value(market_to_file(&profile))
        .map_err(|e| Error::Malformed(format!("serialize: {e}")))
}

pub fn cmd_plotdata(market_json: &str, buyer: usize, approx: bool) -> Result<String> {
    let profile = market_from_json(market_json)?;
    let buyers = profile
        .as_symmetric()
        .ok_or_else(|| Error::Malformed("plot data needs a symmetric buyer".into()))?;
    let v = buyers
        .get(buyer)
        .ok_or_else(|| Error::IndexOutOfRange(format!("buyer {buyer}")))?;
    let m = v.m();
    let decomp = sm_closure(v);
    let fwd = forward_slopes(v);
    let bwd = backward_slopes(v);
    let flat = flat_slopes(v);
    let mut out = String::from("k,value,closure,forward_slope,backward_slope,flat_slope");
    if approx {
        out.push_str(",value_approx,closure_approx");
    }
    out.push('\n');
    for k in 0..=m {
        let fwd_cell = if k < m { format_rat(&fwd[k]) } else { String::new() };
        let bwd_cell = if k > 0 { format_rat(&bwd[k - 1]) } else { String::new() };
        let flat_cell = if k < m { format_rat(&flat[k]) } else { String::new() };
        out.push_str(&format!(
            "{k},{},{},{fwd_cell},{bwd_cell},{flat_cell}",
            format_rat(v.value(k)),
            format_rat(decomp.closure().value(k)),
        ));
        if approx {
            out.push_str(&format!(
                ",{},{}",
                approx_f64(v.value(k)),
                approx_f64(decomp.closure().value(k)),
            ));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn cmd_pipeline(market_json: &str) -> Result<Value> {
    let profile = market_from_json(market_json)?;
    let mut results = json!({});
    results["classify"] = cmd_classify(market_json)?;

    match profile.as_symmetric() {
        Some(buyers) => {
            use twoprice_core::rational::rat_int;
            let m = profile.m();
            let identical = buyers.windows(2).all(|w| w[0] == w[1]);
            // A market that clears at a single price needs no price gap.
            let walrasian = twoprice_core::equilibrium::we_exists_symmetric(buyers);
            let (cert, mode) = if let Some((alloc, price)) = walrasian {
                let counts = alloc.counts();
                let prices = UniformPrices::new(
                    counts
                        .iter()
                        .map(|&k| (k > 0).then(|| (price.clone(), price.clone())))
                        .collect(),
                )?;
                (
                    twoprice_core::allocation::AllocationCertificate {
                        counts,
                        prices,
                        discrepancy: rat_int(0),
                        bound: rat_int(0),
                        trace: Vec::new(),
                    },
                    "walrasian",
                )
            } else if identical && buyers.len() == 2 {
                (two_buyer_split(&buyers[0])?, "two-buyer")
            } else if identical && buyers.len() > 2 {
                (allocate_identical(m, buyers.len(), &buyers[0])?, "identical")
            } else if buyers.len() >= 2 {
                (allocate_heterogeneous(m, buyers)?, "heterogeneous")
            } else {
                // A single buyer takes everything at zero prices.
                let prices = UniformPrices::new(vec![Some((rat_int(0), rat_int(0)))])?;
                (
                    twoprice_core::allocation::AllocationCertificate {
                        counts: vec![m],
                        prices,
                        discrepancy: rat_int(0),
                        bound: rat_int(1),
                        trace: Vec::new(),
                    },
                    "walrasian",
                )
            };
            results["allocate"] = certificate_value(&cert);
            results["allocate"]["mode"] = json!(mode);

            let alloc = Allocation::symmetric(cert.counts.clone(), m)?;
            let system = cert.prices.expand(&cert.counts)?;
            let report = is_2pe(&profile, &alloc, &system)?;
            results["verify"] = report_value(&report);
            let sw = welfare(&profile, &alloc)?;
            let (opt, _) = opt_welfare(&profile)?;
            results["welfare"] = rat_value(&sw);
            results["optimal_welfare"] = rat_value(&opt);
            let d = &cert.discrepancy;
            results["discrepancy"] = rat_value(d);
            use num_traits::One;
            let one = Rat::one();
            results["welfare_bound_holds"] =
                json!(sw.clone() * (one + d.clone()) >= opt);
            if m <= twoprice_core::valuation::general_m_cap() {
                let bids = twoprice_core::auction::two_pe_to_pne(&profile, &alloc, &system)?;
                results["equilibrium_bids"] = json!(bids
                    .rows()
                    .iter()
                    .map(|row| format_rat_vec(row))
                    .collect::<Vec<_>>());
            }
        }
        None => {
            let (alloc, prices, d) = opt_discrepancy_upper_bound(&profile)?;
            results["allocate"] = json!({
                "allocation": serde_json::to_value(allocation_to_spec(&alloc)).expect("serializable"),
                "high": format_rat_vec(prices.high()),
                "low": format_rat_vec(prices.low()),
                "discrepancy": rat_value(&d),
                "bound": profile.m(),
            });
            let report = is_2pe(&profile, &alloc, &prices)?;
            results["verify"] = report_value(&report);
            results["welfare"] = rat_value(&welfare(&profile, &alloc)?);
            if profile.m() <= twoprice_core::valuation::general_m_cap() {
                let bids = twoprice_core::auction::two_pe_to_pne(&profile, &alloc, &prices)?;
                results["equilibrium_bids"] = json!(bids
                    .rows()
                    .iter()
                    .map(|row| format_rat_vec(row))
                    .collect::<Vec<_>>());
            }
        }
    }
    Ok(results)
}

/// Wraps command results in the standard run-report envelope. The results
/// section is byte-stable across runs; timing sits outside it.
pub fn run_report(command: &str, inputs: &[&str], results: Value, elapsed_ms: u128) -> Value {
    json!({
        "command": command,
        "inputs_digest": digest(inputs),
        "results": results,
        "timing_ms": elapsed_ms,
    })
}
