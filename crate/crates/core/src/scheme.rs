//! Closed-form machinery for the concatenated coding scheme: feasibility of
//! rate pairs, the per-redundancy communication-load breakdown, rate
//! optimization, baseline rate selection, and the map-phase latency model.
//!
//! Every load is an exact big rational; floats appear only in the latency
//! model, where a harmonic sum needs no exactness.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::FieldWidth;
use crate::ratio::{big_ratio, decimal_string, rat, rat_int, Frac, Rat, RatRepr};

/// Full problem instance: K servers of which q finish in time, storage
/// fraction mu, and the matrix dimensions m x n times n x N over GF(2^w).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemParams {
    #[serde(rename = "K")]
    pub servers: u32,
    #[serde(rename = "q")]
    pub non_stragglers: u32,
    pub mu: Frac,
    #[serde(rename = "m")]
    pub rows: u32,
    #[serde(rename = "n")]
    pub inner_dim: u32,
    #[serde(rename = "N")]
    pub cols: u32,
    #[serde(rename = "w")]
    pub width: FieldWidth,
}

impl SystemParams {
    pub fn new(
        servers: u32,
        non_stragglers: u32,
        mu: Frac,
        rows: u32,
        inner_dim: u32,
        cols: u32,
        width: FieldWidth,
    ) -> Result<Self> {
        let p = SystemParams {
            servers,
            non_stragglers,
            mu,
            rows,
            inner_dim,
            cols,
            width,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.servers == 0 || self.rows == 0 || self.inner_dim == 0 || self.cols == 0 {
            return bad("K, m, n, N must be positive".into());
        }
        // 1/K <= mu <= 1
        if self.mu.num > self.mu.den {
            return bad(format!("mu = {} exceeds 1", self.mu));
        }
        if self.mu.den > self.servers as u64 * self.mu.num {
            return bad(format!("mu = {} is below 1/K = 1/{}", self.mu, self.servers));
        }
        if self.non_stragglers < self.min_q() || self.non_stragglers > self.servers {
            return bad(format!(
                "q = {} outside [{}, {}]",
                self.non_stragglers,
                self.min_q(),
                self.servers
            ));
        }
        Ok(())
    }

    /// Smallest admissible number of non-stragglers, ceil(1/mu).
    pub fn min_q(&self) -> u32 {
        self.mu.den.div_ceil(self.mu.num) as u32
    }

    /// Same instance at a different operating point q.
    pub fn with_q(&self, q: u32) -> Result<Self> {
        let mut p = *self;
        p.non_stragglers = q;
        p.validate()?;
        Ok(p)
    }

    /// floor(q * mu).
    pub fn floor_q_mu(&self) -> u32 {
        (self.non_stragglers as u64 * self.mu.num / self.mu.den) as u32
    }

    /// floor(K * mu).
    pub fn floor_k_mu(&self) -> u32 {
        (self.servers as u64 * self.mu.num / self.mu.den) as u32
    }
}

/// Rate pair: outer MDS rate r1 = l/q with integer l, inner repetition
/// rate r2 (how many servers store each coded-row block).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatePair {
    pub l: u32,
    pub r2: u32,
}

impl RatePair {
    pub fn new(l: u32, r2: u32) -> Self {
        RatePair { l, r2 }
    }

    /// r1 = l/q as an exact fraction.
    pub fn r1(&self, p: &SystemParams) -> Frac {
        Frac::new(self.l as u64, p.non_stragglers as u64).expect("q > 0")
    }

    pub fn r1_rat(&self, p: &SystemParams) -> Rat {
        self.r1(p).to_rat()
    }
}

impl std::fmt::Display for RatePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(l={}, r2={})", self.l, self.r2)
    }
}

/// The three feasibility requirements on a rate pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// l within [q, K] and r2 within [floor(q mu), floor(K mu)].
    Domain,
    /// Storage budget: r1 * r2 <= K * mu.
    Storage,
    /// Enough blocks reach the non-stragglers to rebuild the message:
    /// C(K, r2) - C(K-q, r2) >= (q/l) * C(K, r2).
    Reconstruction,
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::Domain => "domain bounds",
            Condition::Storage => "storage budget",
            Condition::Reconstruction => "reconstruction coverage",
        }
    }
}

/// Verdict of `check_feasible`: empty violation list means feasible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    pub violations: Vec<Condition>,
}

impl Feasibility {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Infeasible(self.violations))
        }
    }
}

/// Exact binomial coefficient with the conventions C(a,b) = 0 for b < 0 or
/// b > a, and C(a,0) = 1.
pub fn binomial(a: u64, b: i64) -> BigUint {
    if b < 0 {
        return BigUint::zero();
    }
    let b = b as u64;
    if b > a {
        return BigUint::zero();
    }
    let b = b.min(a - b);
    let mut acc = BigUint::one();
    for i in 1..=b {
        acc *= a - b + i;
        acc /= i;
    }
    acc
}

/// Checks the three feasibility conditions on (r1 = l/q, r2).
pub fn check_feasible(p: &SystemParams, r: RatePair) -> Feasibility {
    let mut violations = Vec::new();
    let (k, q) = (p.servers as u64, p.non_stragglers as u64);
    let (l, r2) = (r.l as u64, r.r2 as u64);

    let domain_ok = l >= q
        && l <= k
        && r2 >= p.floor_q_mu() as u64
        && r2 <= p.floor_k_mu() as u64
        && r2 >= 1;
    if !domain_ok {
        violations.push(Condition::Domain);
    }

    // r1 * r2 <= K * mu, cross-multiplied to stay in integers.
    if l * r2 * p.mu.den > k * q * p.mu.num {
        violations.push(Condition::Storage);
    }

    // l * (C(K, r2) - C(K-q, r2)) >= q * C(K, r2)
    let total = binomial(k, r2 as i64);
    let unreachable_blocks = binomial(k - q, r2 as i64);
    if BigUint::from(l) * (&total - &unreachable_blocks) < BigUint::from(q) * &total {
        violations.push(Condition::Reconstruction);
    }

    Feasibility { violations }
}

/// The reference rate selection: r1 = K/q and r2 = floor(q mu).
pub fn baseline_rates(p: &SystemParams) -> RatePair {
    RatePair::new(p.servers, p.floor_q_mu())
}

/// All feasible rate pairs on the domain grid, in (l, r2) lexicographic order.
pub fn enumerate_feasible(p: &SystemParams) -> Vec<RatePair> {
    let mut out = Vec::new();
    for l in p.non_stragglers..=p.servers {
        for r2 in p.floor_q_mu()..=p.floor_k_mu() {
            let r = RatePair::new(l, r2);
            if check_feasible(p, r).is_ok() {
                out.push(r);
            }
        }
    }
    out
}

/// Communication-load breakdown for one feasible rate pair.
///
/// `needed_fractions[j]` is the fraction of rows a non-straggler must fetch
/// whose blocks sit on exactly j other non-stragglers; phase j delivers them
/// with multicast gain j. Gains below `gain_cutoff` are swept into a single
/// residual phase of gain `gain_cutoff - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadBreakdown {
    /// Highest multicast gain, min(q-1, r2).
    pub max_gain: u32,
    /// Lowest redundancy of any block reaching the non-stragglers,
    /// max(r2 - (K - q), 1).
    pub min_redundancy: u32,
    /// Lowest gain delivered as a full phase.
    pub gain_cutoff: u32,
    /// B_j by redundancy class j over [min_redundancy, max_gain].
    pub needed_fractions: BTreeMap<u32, Rat>,
    /// N * B_j / j for each full phase j in [gain_cutoff, max_gain].
    pub phase_loads: BTreeMap<u32, Rat>,
    /// Load of the partial phase at gain `gain_cutoff - 1` (zero when the
    /// full phases already deliver everything).
    pub residual_load: Rat,
    /// Total communication load L(q).
    pub total: Rat,
}

impl LoadBreakdown {
    /// Fraction of rows a server must fetch, 1 - r1 r2 / K.
    pub fn needed_total(p: &SystemParams, r: RatePair) -> Rat {
        rat_int(1)
            - r.r1_rat(p) * rat(r.r2 as i64, 1) / rat(p.servers as i64, 1)
    }

    pub fn has_residual(&self) -> bool {
        self.gain_cutoff > self.min_redundancy
    }

    /// Sum of B_j over the redundancy classes at or above `from`.
    pub fn needed_fractions_sum(&self, from: u32) -> Rat {
        self.needed_fractions
            .iter()
            .filter(|(j, _)| **j >= from)
            .fold(Rat::zero(), |acc, (_, v)| acc + v)
    }
}

/// Evaluates the load formula for a feasible rate pair.
pub fn load_breakdown(p: &SystemParams, r: RatePair) -> Result<LoadBreakdown> {
    check_feasible(p, r).into_result()?;
    Ok(load_breakdown_unchecked(p, r))
}

/// The load formula without the feasibility gate; callers must have
/// verified the pair, otherwise the internal consistency asserts can fire.
fn load_breakdown_unchecked(p: &SystemParams, r: RatePair) -> LoadBreakdown {
    let (k, q, r2) = (p.servers, p.non_stragglers, r.r2);
    let max_gain = (q - 1).min(r2);
    let min_redundancy = (r2 as i64 - (k - q) as i64).max(1) as u32;
    let blocks = binomial(k as u64, r2 as i64);

    // All B_j share the denominator q * C(K, r2); the numerators
    // l * C(q-1, j) * C(K-q, r2-j) are built incrementally over j so big
    // instances (K = 100) stay cheap, and the cutoff walk below compares
    // plain integers instead of reduced rationals.
    let mut numerators: BTreeMap<u32, BigUint> = BTreeMap::new();
    if min_redundancy <= max_gain {
        let mut from_peers = binomial((q - 1) as u64, min_redundancy as i64);
        let mut from_stragglers =
            binomial((k - q) as u64, r2 as i64 - min_redundancy as i64);
        for j in min_redundancy..=max_gain {
            numerators.insert(j, &from_peers * &from_stragglers * r.l);
            if j < max_gain {
                // C(q-1, j+1) = C(q-1, j) * (q-1-j) / (j+1)
                from_peers = from_peers * (q - 1 - j) / (j + 1);
                // C(K-q, r2-j-1) = C(K-q, r2-j) * (r2-j) / (K-q-(r2-j)+1)
                if r2 > j {
                    from_stragglers =
                        from_stragglers * (r2 - j) / (k - q + j + 1 - r2);
                } else {
                    from_stragglers = BigUint::zero();
                }
            }
        }
    }
    let den = BigUint::from(q) * &blocks;

    // Smallest s in [min_redundancy, max_gain + 1] whose tail sum of B_j
    // fits under 1 - r1 r2 / K, walking down from the empty tail. The
    // comparison sum_j B_j <= (qK - l r2) / (qK) cross-multiplies to
    // K * sum(numerators) <= (qK - l r2) * C(K, r2).
    let threshold_scaled =
        BigUint::from(q as u64 * k as u64 - r.l as u64 * r2 as u64) * &blocks;
    let mut gain_cutoff = max_gain + 1;
    let mut covered_num = BigUint::zero();
    while gain_cutoff > min_redundancy {
        let next = &covered_num + &numerators[&(gain_cutoff - 1)];
        if &next * k <= threshold_scaled {
            covered_num = next;
            gain_cutoff -= 1;
        } else {
            break;
        }
    }

    let needed_fractions: BTreeMap<u32, Rat> = numerators
        .iter()
        .map(|(j, num)| (*j, big_ratio(num.clone(), den.clone())))
        .collect();

    let n_cols = rat(p.cols as i64, 1);
    let mut phase_loads = BTreeMap::new();
    let mut total = Rat::zero();
    for j in gain_cutoff..=max_gain {
        let load = &n_cols * &needed_fractions[&j] / rat(j as i64, 1);
        total += &load;
        phase_loads.insert(j, load);
    }

    let threshold = LoadBreakdown::needed_total(p, r);
    let leftover = threshold - big_ratio(covered_num, den);
    let residual_load = if leftover.is_zero() {
        // Covers the 0/0 convention when gain_cutoff = 1.
        Rat::zero()
    } else {
        assert!(
            gain_cutoff > 1,
            "nonzero residual requires a positive gain: {p:?} {r:?}"
        );
        &n_cols * leftover / rat(gain_cutoff as i64 - 1, 1)
    };
    // A cutoff at the lowest redundancy means the full phases deliver
    // everything; anything else indicates a formula bug.
    assert!(
        gain_cutoff > min_redundancy || residual_load.is_zero(),
        "residual must vanish when every redundancy class has a full phase"
    );
    total += &residual_load;

    LoadBreakdown {
        max_gain,
        min_redundancy,
        gain_cutoff,
        needed_fractions,
        phase_loads,
        residual_load,
        total,
    }
}

/// Exhaustive minimization of the load over all feasible rate pairs.
/// Ties break toward smaller l, then larger r2. `None` only if the feasible
/// set is empty, which cannot happen for valid parameters.
pub fn optimize_rates(p: &SystemParams) -> Option<(RatePair, LoadBreakdown)> {
    let mut best: Option<(RatePair, LoadBreakdown)> = None;
    for l in p.non_stragglers..=p.servers {
        for r2 in p.floor_q_mu()..=p.floor_k_mu() {
            let r = RatePair::new(l, r2);
            if !check_feasible(p, r).is_ok() {
                continue;
            }
            let lb = load_breakdown_unchecked(p, r);
            let better = match &best {
                None => true,
                Some((cur, cur_lb)) => {
                    (&lb.total, r.l, std::cmp::Reverse(r.r2))
                        < (&cur_lb.total, cur.l, std::cmp::Reverse(cur.r2))
                }
            };
            if better {
                best = Some((r, lb));
            }
        }
    }
    best
}

/// Expected map-phase latency D(q) = mu N (1 + sum_{j=K-q+1}^{K} 1/j) under
/// i.i.d. shifted-exponential completion times.
pub fn latency(p: &SystemParams, q: u32) -> f64 {
    assert!(q >= 1 && q <= p.servers, "q = {q} outside [1, K]");
    let harmonic: f64 = (p.servers - q + 1..=p.servers).map(|j| 1.0 / j as f64).sum();
    p.mu.to_f64() * p.cols as f64 * (1.0 + harmonic)
}

/// One operating point of the latency-load trade-off curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRow {
    pub q: u32,
    pub latency: f64,
    pub optimized: Rat,
    pub baseline: Rat,
    pub opt_rates: RatePair,
}

impl Serialize for TradeoffRow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("TradeoffRow", 6)?;
        st.serialize_field("q", &self.q)?;
        st.serialize_field("D", &self.latency)?;
        st.serialize_field("L_opt", &RatRepr::of(&self.optimized))?;
        st.serialize_field("L_base", &RatRepr::of(&self.baseline))?;
        st.serialize_field("l_opt", &self.opt_rates.l)?;
        st.serialize_field("r2_opt", &self.opt_rates.r2)?;
        st.end()
    }
}

/// Sweeps q over [ceil(1/mu), K], optimizing rates at every point and
/// evaluating the baseline rates through the same load formula.
pub fn tradeoff_curve(p: &SystemParams) -> Vec<TradeoffRow> {
    let mut rows = Vec::new();
    for q in p.min_q()..=p.servers {
        let pq = p.with_q(q).expect("q within the validated range");
        let Some((opt_rates, opt_lb)) = optimize_rates(&pq) else {
            continue;
        };
        let base_lb =
            load_breakdown(&pq, baseline_rates(&pq)).expect("baseline rates are feasible");
        rows.push(TradeoffRow {
            q,
            latency: latency(&pq, q),
            optimized: opt_lb.total,
            baseline: base_lb.total,
            opt_rates,
        });
    }
    rows
}

/// CSV rendering of the trade-off curve; rationals as 12-significant-digit
/// decimals. Swept q values missing from `rows` (no feasible pairs, which
/// the baseline guarantee rules out in practice) become comment lines so a
/// sweep never loses its remaining rows.
pub fn tradeoff_csv(p: &SystemParams, rows: &[TradeoffRow]) -> String {
    let mut out = String::from("q,D,L_opt,L_base,l_opt,r2_opt\n");
    let mut iter = rows.iter().peekable();
    for q in p.min_q()..=p.servers {
        match iter.peek() {
            Some(r) if r.q == q => {
                let r = iter.next().expect("peeked");
                out.push_str(&format!(
                    "{},{:.6},{},{},{},{}\n",
                    r.q,
                    r.latency,
                    decimal_string(&r.optimized),
                    decimal_string(&r.baseline),
                    r.opt_rates.l,
                    r.opt_rates.r2
                ));
            }
            _ => out.push_str(&format!("# q={q}: no feasible rate pairs\n")),
        }
    }
    out
}
