//! Fixed-size subsets of the server set {1..K} in colexicographic order.
//!
//! Colex order compares the largest differing element, so the subsets of
//! any prefix {1..n} come first. Ranks are the canonical identifiers for
//! storage blocks and multicast groups; the order is fixed so runs are
//! reproducible across machines and implementations.

/// Binomial coefficient in machine integers, for ranking desk-scale sets.
/// Panics on overflow; exact big-integer binomials live in `scheme`.
pub fn choose(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc.checked_mul((n - k + i) as u128).expect("choose overflow");
        acc /= i as u128;
    }
    u64::try_from(acc).expect("choose overflow")
}

/// Colex rank of a sorted subset of {1..K}; the rank of {s_1 < ... < s_r}
/// is sum_i C(s_i - 1, i).
pub fn colex_rank(members: &[u32]) -> u64 {
    debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
    members
        .iter()
        .enumerate()
        .map(|(i, &s)| choose((s - 1) as u64, (i + 1) as u64))
        .sum()
}

/// All r-subsets of {1..n} in colex order.
pub fn colex_subsets(n: u32, r: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity(choose(n as u64, r as u64) as usize);
    if r == 0 {
        out.push(Vec::new());
        return out;
    }
    if r > n {
        return out;
    }
    let mut cur: Vec<u32> = (1..=r).collect();
    loop {
        out.push(cur.clone());
        // Advance to the colex successor: bump the smallest element that has
        // room, resetting everything below it.
        let r = r as usize;
        let mut i = 0;
        loop {
            if i == r {
                return out;
            }
            let limit = if i + 1 == r { n } else { cur[i + 1] - 1 };
            if cur[i] < limit {
                cur[i] += 1;
                for (j, slot) in cur.iter_mut().enumerate().take(i) {
                    *slot = j as u32 + 1;
                }
                break;
            }
            i += 1;
        }
    }
}
