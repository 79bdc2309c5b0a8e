//! Constructive allocation with discrepancy guarantees: the two-buyer split
//! scan, the greedy triangle algorithms for identical and heterogeneous
//! subadditive buyers, good-pair search, and the named benchmark instances.

use num_traits::Zero;

use crate::equilibrium::{u2pe_feasible, UniformPrices};
use crate::error::{Error, Result};
use crate::geometry::{max_forward_slope, sm_closure, TriangleDecomposition};
use crate::rational::{format_rat, rat, rat_int, Rat};
use crate::valuation::{
    classify_symmetric, GeneralValuation, SymmetricValuation, ValuationClass, ValuationProfile,
};

/// A split of leftover items between two buyers whose forward slopes stay
/// within factor `c` of their triangle slopes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoodPair {
    pub l_x: usize,
    pub l_y: usize,
    pub c: u32,
    pub k_x: usize,
    pub k_y: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceStep {
    /// Buyer took her whole current triangle.
    Triangle {
        buyer: usize,
        start: usize,
        len: usize,
        remaining: usize,
    },
    /// Leftover split between the two steepest buyers.
    GoodPair {
        x: usize,
        y: usize,
        l_x: usize,
        l_y: usize,
        c: u32,
    },
}

/// Allocation output with price support, its verified discrepancy, the
/// guarantee it was produced under, and the step trace.
#[derive(Debug, Clone)]
pub struct AllocationCertificate {
    pub counts: Vec<usize>,
    pub prices: UniformPrices,
    pub discrepancy: Rat,
    pub bound: Rat,
    pub trace: Vec<TraceStep>,
}

fn require_subadditive(v: &SymmetricValuation) -> Result<()> {
    if classify_symmetric(v).contains(&ValuationClass::Subadditive) {
        Ok(())
    } else {
        Err(Error::NotSubadditive)
    }
}

fn certificate(
    buyers: &[SymmetricValuation],
    counts: Vec<usize>,
    prices: UniformPrices,
    bound: Rat,
    trace: Vec<TraceStep>,
) -> Result<AllocationCertificate> {
    let report = u2pe_feasible(buyers, &counts, &prices)?;
    if !report.holds {
        return Err(Error::NotAnEquilibrium(format!(
            "constructed prices fail verification: {:?}",
            report.witness
        )));
    }
    let sw: Rat = buyers
        .iter()
        .zip(&counts)
        .map(|(v, &k)| v.value(k).clone())
        .sum();
    let gap = prices.gap_sum(&counts);
    let discrepancy = if sw.is_zero() {
        if gap.is_zero() {
            rat_int(0)
        } else {
            return Err(Error::ZeroWelfare);
        }
    } else {
        gap / sw
    };
    if discrepancy > bound {
        return Err(Error::NotAnEquilibrium(format!(
            "discrepancy {} exceeds bound {}",
            format_rat(&discrepancy),
            format_rat(&bound)
        )));
    }
    Ok(AllocationCertificate {
        counts,
        prices,
        discrepancy,
        bound,
        trace,
    })
}

/// Two identical subadditive buyers: scan all splits whose two forward
/// slopes are within twice the average slope (at least one exists by
/// counting), price each side at the other's forward slope with zero low
/// prices, and return the discrepancy minimizer.
pub fn two_buyer_split(v: &SymmetricValuation) -> Result<AllocationCertificate> {
    require_subadditive(v)?;
    let m = v.m();
    let fwd = crate::geometry::forward_slopes(v);
    let threshold = rat_int(2) * v.value(m) / rat_int(m as i64);
    let good = |k: usize| k == m || fwd[k] <= threshold;

    let mut best: Option<(Rat, usize)> = None;
    for k1 in 0..=m {
        let k2 = m - k1;
        if !good(k1) || !good(k2) {
            continue;
        }
        let sw = v.value(k1) + v.value(k2);
        let gap = price_gap_for_split(&fwd, k1, k2);
        let d = if sw.is_zero() {
            if gap.is_zero() {
                rat_int(0)
            } else {
                continue;
            }
        } else {
            gap / sw
        };
        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
            best = Some((d, k1));
        }
    }
    let (_, k1) = best.ok_or(Error::NoPairFound(
        "no split with both slopes within twice the average".into(),
    ))?;
    let k2 = m - k1;
    let pair = |own: usize, other: usize| {
        if own == 0 {
            None
        } else {
            Some((fwd[other].clone(), rat_int(0)))
        }
    };
    let prices = UniformPrices::new(vec![pair(k1, k2), pair(k2, k1)])?;
    certificate(
        &[v.clone(), v.clone()],
        vec![k1, k2],
        prices,
        rat_int(2),
        Vec::new(),
    )
}

fn price_gap_for_split(fwd: &[Rat], k1: usize, k2: usize) -> Rat {
    let mut gap = rat_int(0);
    if k1 > 0 {
        gap += fwd[k2].clone() * rat_int(k1 as i64);
    }
    if k2 > 0 {
        gap += fwd[k1].clone() * rat_int(k2 as i64);
    }
    gap
}

/// Forward slope treating the exhausted index `m` as flat.
fn slope_or_zero(v: &SymmetricValuation, k: usize) -> Rat {
    if k >= v.m() {
        rat_int(0)
    } else {
        max_forward_slope(v, k, None).expect("k < m").value
    }
}

/// Splits `r` leftover items between buyers at triangle starts `k_x`, `k_y`
/// so both resulting forward slopes stay within factor `c` of the current
/// triangle slopes; `half_constraint` additionally demands
/// `l_x >= ceil(r/2)`. Existence is guaranteed; failure reports the scanned
/// slopes and indicates a bug.
pub fn find_good_pair(
    v_x: &SymmetricValuation,
    v_y: &SymmetricValuation,
    k_x: usize,
    k_y: usize,
    r: usize,
    c: u32,
    half_constraint: bool,
) -> Result<GoodPair> {
    assert!(c == 2 || c == 3);
    assert!(!half_constraint || c == 3);
    let theta_x = slope_or_zero(v_x, k_x);
    let theta_y = slope_or_zero(v_y, k_y);
    let cap_x = rat_int(c as i64) * &theta_x;
    let cap_y = rat_int(c as i64) * &theta_y;
    let lo = if half_constraint { r.div_ceil(2) } else { 0 };
    for l_x in lo..=r {
        let l_y = r - l_x;
        if slope_or_zero(v_x, k_x + l_x) <= cap_x && slope_or_zero(v_y, k_y + l_y) <= cap_y {
            return Ok(GoodPair {
                l_x,
                l_y,
                c,
                k_x,
                k_y,
                r,
            });
        }
    }
    let table: Vec<String> = (lo..=r)
        .map(|l| {
            format!(
                "l_x={l}: {} vs {}",
                format_rat(&slope_or_zero(v_x, k_x + l)),
                format_rat(&slope_or_zero(v_y, k_y + (r - l)))
            )
        })
        .collect();
    Err(Error::NoPairFound(format!(
        "k_x={k_x} k_y={k_y} r={r} c={c}; scanned slopes: {}",
        table.join(", ")
    )))
}

struct GreedyState {
    counts: Vec<usize>,
    tri: Vec<usize>,
    trace: Vec<TraceStep>,
    last_theta: Rat,
    leftover: Option<LeftoverInfo>,
}

struct LeftoverInfo {
    x: usize,
    y: usize,
    theta_x: Rat,
    shared_triangle: bool,
}

/// Greedy triangle loop shared by both algorithms. `pick` chooses among the
/// non-exhausted buyers by slope with the algorithm's tie rule.
fn run_triangle_greedy(
    buyers: &[SymmetricValuation],
    decomps: &[TriangleDecomposition],
    c: u32,
    half_constraint: bool,
    tie_min_items: bool,
) -> Result<GreedyState> {
    let m = buyers[0].m();
    let n = buyers.len();
    let mut st = GreedyState {
        counts: vec![0; n],
        tri: vec![0; n],
        trace: Vec::new(),
        last_theta: rat_int(0),
        leftover: None,
    };
    let mut r = m;
    while r > 0 {
        let x = pick_buyer(&st, decomps, m, None, tie_min_items).expect("items remain");
        let theta_x = decomps[x].slopes()[st.tri[x]].clone();
        let start = st.counts[x];
        let t = decomps[x].triangle_end(st.tri[x]) - start;
        if r >= t {
            st.counts[x] += t;
            st.tri[x] += 1;
            r -= t;
            st.trace.push(TraceStep::Triangle {
                buyer: x,
                start,
                len: t,
                remaining: r,
            });
            st.last_theta = theta_x;
        } else {
            let y = pick_buyer(&st, decomps, m, Some(x), tie_min_items).expect("n >= 2");
            let shared_triangle = st.tri[y] == st.tri[x] && buyers[y] == buyers[x];
            let pair = find_good_pair(
                &buyers[x],
                &buyers[y],
                st.counts[x],
                st.counts[y],
                r,
                c,
                half_constraint,
            )?;
            st.counts[x] += pair.l_x;
            st.counts[y] += pair.l_y;
            st.trace.push(TraceStep::GoodPair {
                x,
                y,
                l_x: pair.l_x,
                l_y: pair.l_y,
                c,
            });
            st.leftover = Some(LeftoverInfo {
                x,
                y,
                theta_x,
                shared_triangle,
            });
            r = 0;
        }
    }
    Ok(st)
}

fn pick_buyer(
    st: &GreedyState,
    decomps: &[TriangleDecomposition],
    m: usize,
    exclude: Option<usize>,
    tie_min_items: bool,
) -> Option<usize> {
    let mut best: Option<(usize, &Rat)> = None;
    for i in 0..st.counts.len() {
        if Some(i) == exclude || st.counts[i] == m {
            continue;
        }
        let slope = &decomps[i].slopes()[st.tri[i]];
        let better = match &best {
            None => true,
            Some((b, bs)) => {
                slope > bs
                    || (slope == *bs
                        && tie_min_items
                        && st.counts[i] < st.counts[*b])
            }
        };
        if better {
            best = Some((i, slope));
        }
    }
    best.map(|(i, _)| i)
}

/// Identical subadditive buyers: allocate whole triangles steepest-first,
/// split the leftover with a 2-good pair. Discrepancy at most
/// `max(2, (n+2)/(n-1))`; without leftover the output is a Walrasian
/// equilibrium at the last triangle's slope.
pub fn allocate_identical(m: usize, n: usize, v: &SymmetricValuation) -> Result<AllocationCertificate> {
    if v.m() != m {
        return Err(Error::DimensionMismatch(format!(
            "valuation covers {} items, market has {m}",
            v.m()
        )));
    }
    if n < 2 {
        return Err(Error::CountMismatch("need at least two buyers".into()));
    }
    require_subadditive(v)?;
    let decomp = sm_closure(v);
    let decomps: Vec<TriangleDecomposition> = vec![decomp; n];
    let buyers: Vec<SymmetricValuation> = vec![v.clone(); n];
    let st = run_triangle_greedy(&buyers, &decomps, 2, false, true)?;

    let bound = rat_int(2).max(rat(n as i64 + 2, n as i64 - 1));
    let prices = match &st.leftover {
        None => walrasian_pairs(&st.counts, &st.last_theta),
        Some(info) if info.shared_triangle => {
            let high = rat_int(2) * &info.theta_x;
            uniform_zero_low_pairs(&st.counts, &high)
        }
        Some(info) => {
            // Lone current triangle: everyone else sits at its right end, so
            // their backward slope equals theta_x and supports a positive
            // low price.
            let high = rat_int(2) * &info.theta_x;
            let pairs = st
                .counts
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    if k == 0 {
                        None
                    } else if i == info.x || i == info.y {
                        Some((high.clone(), rat_int(0)))
                    } else {
                        Some((high.clone(), info.theta_x.clone()))
                    }
                })
                .collect();
            UniformPrices::new(pairs)?
        }
    };
    certificate(&buyers, st.counts, prices, bound, st.trace)
}

/// Heterogeneous subadditive buyers: allocate whole triangles
/// steepest-first, split the leftover with a 3-good pair that gives the
/// steeper buyer at least half. Discrepancy at most 6; without leftover the
/// output is a Walrasian equilibrium.
pub fn allocate_heterogeneous(
    m: usize,
    buyers: &[SymmetricValuation],
) -> Result<AllocationCertificate> {
    let n = buyers.len();
    if n < 2 {
        return Err(Error::CountMismatch("need at least two buyers".into()));
    }
    for v in buyers {
        if v.m() != m {
            return Err(Error::DimensionMismatch(format!(
                "valuation covers {} items, market has {m}",
                v.m()
            )));
        }
        require_subadditive(v)?;
    }
    let decomps: Vec<TriangleDecomposition> = buyers.iter().map(sm_closure).collect();
    let st = run_triangle_greedy(buyers, &decomps, 3, true, false)?;

    let (prices, bound) = match &st.leftover {
        None => (walrasian_pairs(&st.counts, &st.last_theta), rat_int(1)),
        Some(_) => {
            // Each bundle priced at the largest forward slope among the
            // other buyers' final positions, zero low prices.
            let finals: Vec<Option<Rat>> = buyers
                .iter()
                .zip(&st.counts)
                .map(|(v, &k)| (k < m).then(|| max_forward_slope(v, k, None).unwrap().value))
                .collect();
            let pairs = (0..n)
                .map(|i| {
                    if st.counts[i] == 0 {
                        return None;
                    }
                    let high = finals
                        .iter()
                        .enumerate()
                        .filter(|&(i2, _)| i2 != i)
                        .filter_map(|(_, f)| f.as_ref())
                        .max()
                        .cloned()
                        .unwrap_or_else(|| rat_int(0));
                    Some((high, rat_int(0)))
                })
                .collect();
            (UniformPrices::new(pairs)?, rat_int(6))
        }
    };
    certificate(buyers, st.counts, prices, bound, st.trace)
}

fn walrasian_pairs(counts: &[usize], theta: &Rat) -> UniformPrices {
    UniformPrices::new(
        counts
            .iter()
            .map(|&k| (k > 0).then(|| (theta.clone(), theta.clone())))
            .collect(),
    )
    .expect("equal pair is ordered")
}

fn uniform_zero_low_pairs(counts: &[usize], high: &Rat) -> UniformPrices {
    UniformPrices::new(
        counts
            .iter()
            .map(|&k| (k > 0).then(|| (high.clone(), rat_int(0))))
            .collect(),
    )
    .expect("zero low is ordered")
}

/// The 27-item step valuation used by the two-buyer lower-bound market.
pub fn step_valuation_27() -> SymmetricValuation {
    let mut values = vec![0i64];
    for k in 1..=27i64 {
        values.push(match k {
            1..=4 => 1,
            5..=10 => 2,
            11..=16 => 3,
            17..=22 => 4,
            23..=26 => 5,
            _ => 6,
        });
    }
    SymmetricValuation::from_i64(&values).expect("monotone step function")
}

/// The 3461-item piecewise-plateau valuation of the two-buyer lower-bound
/// scan: jumps every 30 items, then every 50, then every 30 again, with a
/// final jump at the last item.
pub fn piecewise_valuation_3461() -> SymmetricValuation {
    let mut values = vec![rat_int(0)];
    for k in 1i64..=3461 {
        let v = if k <= 480 {
            (k - 1) / 30 + 1
        } else if k <= 2980 {
            (k - 481) / 50 + 17
        } else {
            (k - 2981) / 30 + 67
        };
        values.push(rat_int(v));
    }
    SymmetricValuation::new(values).expect("monotone piecewise function")
}

/// The geometry-demo valuation whose closure has intersection run 0..=5,
/// two long triangles, and two degenerate ones.
pub fn geometry_demo_valuation() -> SymmetricValuation {
    let mut values = vec![0i64, 5, 9, 12, 14, 15];
    values.extend(std::iter::repeat(15).take(7)); // 6..=12
    values.push(19);
    values.extend(std::iter::repeat(19).take(7)); // 14..=20
    values.extend([21, 21, 21]);
    SymmetricValuation::from_i64(&values).expect("monotone")
}

/// The four-item market with no conditional equilibrium: one subadditive
/// buyer valuing any 1..3 items at 1 and all four at 2, one unit-demand
/// buyer at 9/10.
pub fn no_ce_market() -> ValuationProfile {
    let v1 = GeneralValuation::new(
        4,
        (0..16u32)
            .map(|mask| match mask.count_ones() {
                0 => rat_int(0),
                4 => rat_int(2),
                _ => rat_int(1),
            })
            .collect(),
    )
    .expect("valid table");
    let v2 = GeneralValuation::new(
        4,
        (0..16u32)
            .map(|mask| if mask == 0 { rat_int(0) } else { rat(9, 10) })
            .collect(),
    )
    .expect("valid table");
    ValuationProfile::general(vec![v1, v2]).expect("two buyers")
}

/// The two-item crossed unit-demand market whose conditional equilibrium
/// has discrepancy exactly 1.
pub fn crossed_unit_demand_market() -> ValuationProfile {
    let table = |a: i64, b: i64| {
        GeneralValuation::new(
            2,
            vec![rat_int(0), rat_int(a), rat_int(b), rat_int(a.max(b))],
        )
        .expect("valid table")
    };
    ValuationProfile::general(vec![table(2, 1), table(1, 2)]).expect("two buyers")
}

/// Named benchmark instances, keyed by the fixture ids used in the CLI.
pub fn build_paper_instance(name: &str) -> Result<ValuationProfile> {
    match name {
        "ex3.2" => Ok(no_ce_market()),
        "prop4.3" => Ok(crossed_unit_demand_market()),
        "fig1" => ValuationProfile::symmetric(vec![geometry_demo_valuation()]),
        "appendixE" => {
            ValuationProfile::symmetric(vec![step_valuation_27(), step_valuation_27()])
        }
        "thm7.2" => ValuationProfile::symmetric(vec![
            piecewise_valuation_3461(),
            piecewise_valuation_3461(),
        ]),
        other => Err(Error::UnknownInstance(other.into())),
    }
}
