//! Deterministic storage placement: the coded rows are split into equal
//! contiguous blocks, one per r2-subset of servers in colexicographic
//! order, and every server stores the union of the blocks whose subset
//! contains it.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratio::{rat, Rat};
use crate::scheme::{
    binomial, check_feasible, load_breakdown, Condition, LoadBreakdown, RatePair, SystemParams,
};
use crate::subsets::{colex_rank, colex_subsets};

/// A storage subset together with its colex rank among all r2-subsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetIndex {
    pub members: Vec<u32>,
    pub rank: u64,
}

impl SubsetIndex {
    pub fn of(members: &[u32]) -> Self {
        SubsetIndex {
            members: members.to_vec(),
            rank: colex_rank(members),
        }
    }
}

/// One block of the row partition: the rows in [row_start, row_end) live on
/// every server in `subset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementBlock {
    pub subset: Vec<u32>,
    pub row_start: u64,
    pub row_end: u64,
}

/// Assignment of all r1 m coded rows to server subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementMap {
    pub params: SystemParams,
    pub rates: RatePair,
    pub block_size: u64,
    pub blocks: Vec<PlacementBlock>,
}

impl PlacementMap {
    /// Total number of coded rows, r1 m.
    pub fn coded_rows(&self) -> u64 {
        self.block_size * self.blocks.len() as u64
    }

    /// Row range of the block at a given colex rank.
    pub fn block_range(&self, rank: u64) -> std::ops::Range<u64> {
        rank * self.block_size..(rank + 1) * self.block_size
    }

    /// Colex rank of the block stored at exactly this member set.
    pub fn block_rank(&self, members: &[u32]) -> u64 {
        debug_assert_eq!(members.len(), self.rates.r2 as usize);
        SubsetIndex::of(members).rank
    }

    /// All coded rows stored at server k, ascending.
    pub fn server_rows(&self, k: u32) -> Vec<u64> {
        let mut rows = Vec::new();
        for b in &self.blocks {
            if b.subset.contains(&k) {
                rows.extend(b.row_start..b.row_end);
            }
        }
        rows
    }

    /// Rows a server is expected to store, r1 r2 m / K.
    pub fn rows_per_server(&self) -> u64 {
        self.block_size
            * crate::subsets::choose(
                (self.params.servers - 1) as u64,
                (self.rates.r2 - 1) as u64,
            )
    }
}

/// Outcome of the divisibility preflight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Divisibility {
    Ok,
    /// Scale m by `m_multiplier` and N by `n_multiplier` to make every
    /// block, phase and residual split come out even.
    NeedsScaling {
        m_multiplier: BigUint,
        n_multiplier: BigUint,
    },
}

impl Divisibility {
    pub fn is_ok(&self) -> bool {
        matches!(self, Divisibility::Ok)
    }

    pub fn into_result(self) -> Result<()> {
        match self {
            Divisibility::Ok => Ok(()),
            Divisibility::NeedsScaling {
                m_multiplier,
                n_multiplier,
            } => Err(Error::DivisibilityFailure {
                m_multiplier: m_multiplier.to_string(),
                n_multiplier: n_multiplier.to_string(),
            }),
        }
    }
}

/// Smallest factor f such that value * f is an integer: the denominator of
/// the reduced rational.
fn denominator_factor(value: &Rat) -> BigUint {
    value
        .denom()
        .to_biguint()
        .expect("reduced rationals keep positive denominators")
}

/// Structural requirement on m alone: q * C(K, r2) must divide l * m so the
/// coded rows split into equal integer blocks.
fn block_multiplier(p: &SystemParams, r: RatePair) -> BigUint {
    let per_block = BigUint::from(p.non_stragglers) * binomial(p.servers as u64, r.r2 as i64);
    let have = BigUint::from(r.l as u64 * p.rows as u64);
    &per_block / per_block.gcd(&have)
}

/// Verifies that every split in the pipeline comes out even: integer coded
/// rows, equal blocks, q | N, per-phase sender splits, and the residual
/// per-group quota. Returns the least m multiplier (given the least N
/// multiplier) when something fails.
pub fn divisibility_check(p: &SystemParams, r: RatePair) -> Result<Divisibility> {
    let lb = load_breakdown(p, r)?;
    Ok(divisibility_with_breakdown(p, r, &lb))
}

pub(crate) fn divisibility_with_breakdown(
    p: &SystemParams,
    r: RatePair,
    lb: &LoadBreakdown,
) -> Divisibility {
    let q = p.non_stragglers as u64;
    let n_mult = {
        let g = num_integer::gcd(q, p.cols as u64);
        BigUint::from(q / g)
    };
    let mut m_mult = block_multiplier(p, r);

    let scaled_cols = rat(p.cols as i64, 1) * Rat::from(num_bigint::BigInt::from(n_mult.clone()));
    let per_col = &scaled_cols / rat(q as i64, 1);
    // Block size as a rational multiple of the m multiplier:
    // bs(c) = l * m * c / (q * C(K, r2)).
    let bs = rat(r.l as i64 * p.rows as i64, 1)
        / rat(q as i64, 1)
        / Rat::from(num_bigint::BigInt::from(binomial(p.servers as u64, r.r2 as i64)));

    // Phase i: the per-receiver, per-group IV count splits across i senders.
    for &i in lb.phase_loads.keys() {
        let straggler_sets = binomial((p.servers - p.non_stragglers) as u64, r.r2 as i64 - i as i64);
        let per_receiver = Rat::from(num_bigint::BigInt::from(straggler_sets))
            * &bs
            * &per_col
            / rat(i as i64, 1);
        m_mult = m_mult.lcm(&denominator_factor(&per_receiver));
    }

    // Residual phase: whole rows only. With gain 1 any whole-row selection
    // counts exactly; with gain >= 2 the quota must split evenly across the
    // C(q-1, gain) groups per receiver and then across the senders.
    if lb.has_residual() {
        let gain = lb.gain_cutoff - 1;
        if gain >= 2 {
            let leftover =
                LoadBreakdown::needed_total(p, r) - lb.needed_fractions_sum(lb.gain_cutoff);
            let residual_rows = rat(p.rows as i64, 1) * leftover;
            let groups_per_receiver =
                Rat::from(num_bigint::BigInt::from(binomial(q - 1, gain as i64)));
            let quota_rows = &residual_rows / &groups_per_receiver;
            m_mult = m_mult.lcm(&denominator_factor(&quota_rows));
            let per_sender = quota_rows * &per_col / rat(gain as i64, 1);
            m_mult = m_mult.lcm(&denominator_factor(&per_sender));
        }
    }

    if m_mult.is_one() && n_mult.is_one() {
        Divisibility::Ok
    } else {
        Divisibility::NeedsScaling {
            m_multiplier: m_mult,
            n_multiplier: n_mult,
        }
    }
}

/// Splits the r1 m coded rows into C(K, r2) equal contiguous blocks in
/// colex order. Requires the storage-side feasibility conditions and the
/// structural divisibility; the shuffle-phase splits are checked separately
/// so that storage layouts can be built even for pairs that cannot shuffle.
pub fn partition_rows(p: &SystemParams, r: RatePair) -> Result<PlacementMap> {
    let feas = check_feasible(p, r);
    let storage_violations: Vec<Condition> = feas
        .violations
        .iter()
        .copied()
        .filter(|c| *c != Condition::Reconstruction)
        .collect();
    if !storage_violations.is_empty() {
        return Err(Error::Infeasible(storage_violations));
    }

    let mult = block_multiplier(p, r);
    if !mult.is_one() {
        return Err(Error::DivisibilityFailure {
            m_multiplier: mult.to_string(),
            n_multiplier: BigUint::one().to_string(),
        });
    }

    let coded_rows = r.l as u64 * p.rows as u64 / p.non_stragglers as u64;
    let block_count = binomial(p.servers as u64, r.r2 as i64)
        .to_u64()
        .expect("block count divides the coded rows, so it fits");
    let block_size = coded_rows / block_count;
    let blocks = colex_subsets(p.servers, r.r2)
        .into_iter()
        .enumerate()
        .map(|(rank, subset)| PlacementBlock {
            subset,
            row_start: rank as u64 * block_size,
            row_end: (rank as u64 + 1) * block_size,
        })
        .collect();
    Ok(PlacementMap {
        params: *p,
        rates: r,
        block_size,
        blocks,
    })
}

/// True when the servers of Q jointly store at least m distinct coded rows;
/// brute-force union, used as the independent check of the reconstruction
/// condition.
pub fn reconstructible(pm: &PlacementMap, q_set: &[u32]) -> bool {
    let mut seen = vec![false; pm.coded_rows() as usize];
    for b in &pm.blocks {
        if b.subset.iter().any(|s| q_set.contains(s)) {
            for row in b.row_start..b.row_end {
                seen[row as usize] = true;
            }
        }
    }
    seen.iter().filter(|v| **v).count() >= pm.params.rows as usize
}
