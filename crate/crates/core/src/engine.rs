//! End-to-end pipeline: seeded data generation, encoding, straggler
//! sampling, map computation, shuffle execution with payload transcripts,
//! erasure decoding at the reducers, and exact output verification.

use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mds::{make_generator, FieldMatrix};
use crate::placement::{divisibility_with_breakdown, partition_rows};
use crate::ratio::{rat, Rat, RatRepr};
use crate::rng::DetRng;
use crate::scheme::{check_feasible, latency, load_breakdown, RatePair, SystemParams};
use crate::shuffle::{
    assign_reduce, build_plan, decode_message, encode_message, plan_load, IvStore, ShufflePlan,
};

/// How the set of non-stragglers is chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StragglerModel {
    /// i.i.d. shifted-exponential completion times with minimum mu N and
    /// mean 2 mu N; the q earliest finishers survive.
    ShiftedExponential,
    /// A fixed non-straggler set, for reproducing worked scenarios.
    FixedQ(Vec<u32>),
}

/// Outcome summary of one full run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub params: SystemParams,
    pub rates: RatePair,
    pub seed: u64,
    pub q_set: Vec<u32>,
    pub message_count: u64,
    pub counted_load: Rat,
    pub analytic_load: Rat,
    pub verified: bool,
    pub empirical_latency: Option<f64>,
}

impl Serialize for RunReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("RunReport", 9)?;
        st.serialize_field("params", &self.params)?;
        st.serialize_field("rates", &self.rates)?;
        st.serialize_field("seed", &self.seed)?;
        st.serialize_field("Q", &self.q_set)?;
        st.serialize_field("message_count", &self.message_count)?;
        st.serialize_field("counted_load", &RatRepr::of(&self.counted_load))?;
        st.serialize_field("analytic_load", &RatRepr::of(&self.analytic_load))?;
        st.serialize_field("verified", &self.verified)?;
        st.serialize_field("empirical_latency", &self.empirical_latency)?;
        st.end()
    }
}

/// Report plus the executed plan (payloads filled in), for transcript dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: RunReport,
    pub plan: ShufflePlan,
}

/// Draws completion times and picks the q earliest servers (ties by id).
/// The fixed-Q model returns the given set with no draws.
pub fn sample_stragglers(
    p: &SystemParams,
    model: &StragglerModel,
    rng: &mut DetRng,
) -> Result<(Vec<u32>, Vec<f64>)> {
    match model {
        StragglerModel::FixedQ(q_set) => {
            let mut q_set = q_set.clone();
            q_set.sort_unstable();
            q_set.dedup();
            crate::shuffle::validate_q_set(p, &q_set)?;
            Ok((q_set, Vec::new()))
        }
        StragglerModel::ShiftedExponential => {
            let times = draw_completion_times(p, rng);
            let mut order: Vec<u32> = (1..=p.servers).collect();
            order.sort_by(|&a, &b| {
                times[(a - 1) as usize]
                    .total_cmp(&times[(b - 1) as usize])
                    .then(a.cmp(&b))
            });
            let mut q_set: Vec<u32> =
                order[..p.non_stragglers as usize].to_vec();
            q_set.sort_unstable();
            Ok((q_set, times))
        }
    }
}

/// Inverse-CDF sampling of the shifted exponential: t = mu N (1 - ln u)
/// with u uniform on (0, 1].
fn draw_completion_times(p: &SystemParams, rng: &mut DetRng) -> Vec<f64> {
    let shift = p.mu.to_f64() * p.cols as f64;
    (0..p.servers)
        .map(|_| shift * (1.0 - rng.next_open01().ln()))
        .collect()
}

/// Computes every server's map-phase values: the products of its stored
/// coded rows with every input column.
pub fn map_phase(
    pm: &crate::placement::PlacementMap,
    coded: &FieldMatrix,
    x: &FieldMatrix,
) -> Result<Vec<IvStore>> {
    if coded.rows as u64 != pm.coded_rows() {
        return Err(Error::DimensionMismatch(format!(
            "coded matrix has {} rows, placement expects {}",
            coded.rows,
            pm.coded_rows()
        )));
    }
    // All products in one pass; each server's store is a view of the rows
    // it holds, which matches computing them independently.
    let products = coded.mul(x, pm.params.width)?;
    let mut stores = Vec::with_capacity(pm.params.servers as usize);
    for server in 1..=pm.params.servers {
        let mut store = IvStore::new();
        for row in pm.server_rows(server) {
            for col in 0..x.cols as u32 {
                store.insert(row, col, products.at(row as usize, col as usize))?;
            }
        }
        stores.push(store);
    }
    Ok(stores)
}

/// Runs the full map-shuffle-reduce pipeline for one instance and verifies
/// the reconstructed product entrywise.
pub fn run(
    p: &SystemParams,
    r: RatePair,
    model: &StragglerModel,
    seed: u64,
) -> Result<RunOutcome> {
    check_feasible(p, r).into_result()?;
    let lb = load_breakdown(p, r)?;
    divisibility_with_breakdown(p, r, &lb).into_result()?;

    // Draw order is fixed: A row-major, X row-major, then straggler times.
    let mut rng = DetRng::new(seed);
    let width = p.width;
    let a = FieldMatrix::random(p.rows as usize, p.inner_dim as usize, width, &mut rng);
    let x = FieldMatrix::random(p.inner_dim as usize, p.cols as usize, width, &mut rng);
    let generator = make_generator(p.rows as usize, r.r1(p), width)?;
    let coded = generator.encode(&a)?;

    let (q_set, times) = sample_stragglers(p, model, &mut rng)?;
    let empirical_latency = (!times.is_empty()).then(|| {
        let mut sorted = times.clone();
        sorted.sort_by(f64::total_cmp);
        sorted[(p.non_stragglers - 1) as usize]
    });

    let pm = partition_rows(p, r)?;
    let ra = assign_reduce(p, &q_set)?;
    let stores = map_phase(&pm, &coded, &x)?;
    let mut plan = build_plan(p, r, &pm, &q_set, &ra)?;

    // Shuffle execution: fill payloads at the senders, decode at every
    // receiver, track received values per server.
    let mut received: Vec<IvStore> = (0..p.servers).map(|_| IvStore::new()).collect();
    for phase in &mut plan.phases {
        for group in &mut phase.groups {
            for msg in &mut group.messages {
                let payload = encode_message(msg, &stores[(msg.sender - 1) as usize])
                    .map_err(|e| phase_error("shuffle send", phase.gain, msg.sender, e))?;
                msg.payload = Some(payload);
                for comp in &msg.components {
                    let (row, col, value) =
                        decode_message(msg, comp.target, &stores[(comp.target - 1) as usize])
                            .map_err(|e| {
                                phase_error("shuffle receive", phase.gain, comp.target, e)
                            })?;
                    received[(comp.target - 1) as usize]
                        .insert(row, col, value)
                        .map_err(|e| phase_error("shuffle receive", phase.gain, comp.target, e))?;
                }
            }
        }
    }

    // Reduce: every server decodes its assigned columns from exactly m
    // distinct coded rows (its own plus the received ones).
    let expected = a.mul(&x, width)?;
    let mut verified = true;
    for &server in &q_set {
        let store = &stores[(server - 1) as usize];
        let extra = &received[(server - 1) as usize];
        let cols = ra.cols(server);
        let mut row_ids = pm.server_rows(server);
        row_ids.extend(extra.rows_for_col(cols[0]));
        row_ids.sort_unstable();
        row_ids.dedup();
        if row_ids.len() != p.rows as usize {
            return Err(Error::PlanInconsistency(format!(
                "reduce at server {server}: {} rows gathered, need {}",
                row_ids.len(),
                p.rows
            )));
        }
        let mut gathered = FieldMatrix::zero(row_ids.len(), cols.len());
        for (ri, &row) in row_ids.iter().enumerate() {
            for (ci, &col) in cols.iter().enumerate() {
                let value = store
                    .get(row, col)
                    .or_else(|| extra.get(row, col))
                    .ok_or_else(|| {
                        Error::PlanInconsistency(format!(
                            "reduce at server {server}: missing value for row {row}, column {col}"
                        ))
                    })?;
                gathered.set(ri, ci, value);
            }
        }
        let ids: Vec<usize> = row_ids.iter().map(|&r| r as usize).collect();
        let decoded = generator.decode_rows(&ids, &gathered)?;
        for (ci, &col) in cols.iter().enumerate() {
            for row in 0..p.rows as usize {
                if decoded.at(row, ci) != expected.at(row, col as usize) {
                    verified = false;
                }
            }
        }
    }

    let message_count = plan.message_count();
    let report = RunReport {
        params: *p,
        rates: r,
        seed,
        q_set,
        message_count,
        counted_load: plan_load(&plan, p.rows),
        analytic_load: lb.total,
        verified,
        empirical_latency,
    };
    Ok(RunOutcome { report, plan })
}

fn phase_error(stage: &str, gain: u32, server: u32, e: Error) -> Error {
    Error::PlanInconsistency(format!("{stage} failed at gain {gain}, server {server}: {e}"))
}

/// Monte Carlo estimate of the map-phase latency against the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyEstimate {
    pub empirical_mean: f64,
    pub analytic: f64,
    pub relative_error: f64,
}

/// Mean of the q-th order statistic of K shifted-exponential draws over the
/// given number of trials, compared against the closed-form latency.
pub fn monte_carlo_latency(
    p: &SystemParams,
    q: u32,
    trials: u64,
    seed: u64,
) -> LatencyEstimate {
    assert!(trials >= 1);
    let mut rng = DetRng::new(seed);
    let mut sum = 0.0;
    for _ in 0..trials {
        let mut times = draw_completion_times(p, &mut rng);
        let (_, qth, _) = times.select_nth_unstable_by((q - 1) as usize, f64::total_cmp);
        sum += *qth;
    }
    let empirical_mean = sum / trials as f64;
    let analytic = latency(p, q);
    LatencyEstimate {
        empirical_mean,
        analytic,
        relative_error: (empirical_mean - analytic).abs() / analytic,
    }
}

/// Counted load of an executed plan as an exact rational.
pub fn counted_load(plan: &ShufflePlan, rows: u32) -> Rat {
    rat(plan.message_count() as i64, rows as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::FieldWidth;
    use crate::ratio::Frac;

    fn params(k: u32, q: u32, mu: (u64, u64), m: u32, n_cols: u32) -> SystemParams {
        SystemParams::new(
            k,
            q,
            Frac::new(mu.0, mu.1).unwrap(),
            m,
            5,
            n_cols,
            FieldWidth::W16,
        )
        .unwrap()
    }

    fn example() -> SystemParams {
        params(6, 4, (1, 2), 20, 12)
    }

    #[test]
    fn fixed_q_model_returns_the_given_set() {
        let p = example();
        let mut rng = DetRng::new(1);
        let (q_set, times) = sample_stragglers(
            &p,
            &StragglerModel::FixedQ(vec![4, 2, 1, 3]),
            &mut rng,
        )
        .unwrap();
        assert_eq!(q_set, vec![1, 2, 3, 4]);
        assert!(times.is_empty());

        assert!(sample_stragglers(&p, &StragglerModel::FixedQ(vec![1, 2, 3]), &mut rng).is_err());
        assert!(
            sample_stragglers(&p, &StragglerModel::FixedQ(vec![1, 2, 3, 9]), &mut rng).is_err()
        );
    }

    #[test]
    fn exponential_samples_respect_the_shift() {
        let p = example();
        let mut rng = DetRng::new(7);
        let shift = 0.5 * 12.0;
        for _ in 0..200 {
            let (q_set, times) =
                sample_stragglers(&p, &StragglerModel::ShiftedExponential, &mut rng).unwrap();
            assert_eq!(q_set.len(), 4);
            assert!(times.iter().all(|&t| t >= shift));
        }
    }

    #[test]
    fn map_phase_store_sizes() {
        let p = example();
        let r = RatePair::new(4, 3);
        let pm = partition_rows(&p, r).unwrap();
        let mut rng = DetRng::new(3);
        let a = FieldMatrix::random(20, 5, FieldWidth::W16, &mut rng);
        let x = FieldMatrix::random(5, 12, FieldWidth::W16, &mut rng);
        let gen = make_generator(20, r.r1(&p), FieldWidth::W16).unwrap();
        let coded = gen.encode(&a).unwrap();
        let stores = map_phase(&pm, &coded, &x).unwrap();
        assert_eq!(stores.len(), 6);
        for s in &stores {
            // |C_k| * N = 10 * 12 products per server.
            assert_eq!(s.len(), 120);
        }
    }

    #[test]
    fn worked_example_run_proposed_rates() {
        let p = example();
        let out = run(
            &p,
            RatePair::new(4, 3),
            &StragglerModel::FixedQ(vec![1, 2, 3, 4]),
            42,
        )
        .unwrap();
        assert!(out.report.verified);
        assert_eq!(out.report.message_count, 76);
        assert_eq!(out.report.counted_load, rat(19, 5));
        assert_eq!(out.report.analytic_load, rat(19, 5));
        assert!(out.report.empirical_latency.is_none());
    }

    #[test]
    fn worked_example_run_baseline_rates() {
        let p = example();
        let out = run(
            &p,
            RatePair::new(6, 2),
            &StragglerModel::FixedQ(vec![1, 2, 3, 4]),
            42,
        )
        .unwrap();
        assert!(out.report.verified);
        assert_eq!(out.report.message_count, 84);
        assert_eq!(out.report.counted_load, rat(21, 5));
        assert_eq!(out.report.analytic_load, rat(21, 5));
    }

    #[test]
    fn straggler_insensitivity_on_the_worked_example() {
        let p = example();
        for q_set in crate::subsets::colex_subsets(6, 4) {
            let out = run(
                &p,
                RatePair::new(4, 3),
                &StragglerModel::FixedQ(q_set.clone()),
                9,
            )
            .unwrap();
            assert!(out.report.verified, "Q = {q_set:?}");
            assert_eq!(out.report.message_count, 76, "Q = {q_set:?}");
        }
    }

    #[test]
    fn hand_built_pairwise_multicast_decodes_at_both_receivers() {
        // Reference scenario, group {1, 2, 3}: server 2 combines a value
        // from the block on {2,3,6} (needed by server 1) with one from the
        // block on {1,2,6} (needed by server 3). Each receiver cancels the
        // other component from its own map output.
        use crate::shuffle::{Component, MulticastMessage};
        let p = example();
        let r = RatePair::new(4, 3);
        let pm = partition_rows(&p, r).unwrap();
        let mut rng = DetRng::new(21);
        let a = FieldMatrix::random(20, 5, FieldWidth::W16, &mut rng);
        let x = FieldMatrix::random(5, 12, FieldWidth::W16, &mut rng);
        let gen = make_generator(20, r.r1(&p), FieldWidth::W16).unwrap();
        let coded = gen.encode(&a).unwrap();
        let stores = map_phase(&pm, &coded, &x).unwrap();
        let products = coded.mul(&x, FieldWidth::W16).unwrap();

        let row_for_1 = pm.block_rank(&[2, 3, 6]) * pm.block_size;
        let row_for_3 = pm.block_rank(&[1, 2, 6]) * pm.block_size;
        for t in 0..3u32 {
            let mut msg = MulticastMessage {
                sender: 2,
                group: vec![1, 2, 3],
                components: vec![
                    Component {
                        row: row_for_1,
                        col: t,
                        target: 1,
                    },
                    Component {
                        row: row_for_3,
                        col: 6 + t,
                        target: 3,
                    },
                ],
                payload: None,
            };
            msg.payload = Some(encode_message(&msg, &stores[1]).unwrap());
            let (row, col, v) = decode_message(&msg, 1, &stores[0]).unwrap();
            assert_eq!(
                (row, col, v),
                (row_for_1, t, products.at(row_for_1 as usize, t as usize))
            );
            let (row, col, v) = decode_message(&msg, 3, &stores[2]).unwrap();
            assert_eq!(
                (row, col, v),
                (
                    row_for_3,
                    6 + t,
                    products.at(row_for_3 as usize, (6 + t) as usize)
                )
            );
        }
    }

    #[test]
    fn sampled_run_reports_latency() {
        let p = example();
        let out = run(
            &p,
            RatePair::new(4, 3),
            &StragglerModel::ShiftedExponential,
            1234,
        )
        .unwrap();
        assert!(out.report.verified);
        assert!(out.report.empirical_latency.unwrap() >= 6.0);
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let p = example();
        let model = StragglerModel::ShiftedExponential;
        let a = run(&p, RatePair::new(6, 2), &model, 77).unwrap();
        let b = run(&p, RatePair::new(6, 2), &model, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a.report).unwrap(),
            serde_json::to_string(&b.report).unwrap()
        );
        assert_eq!(a.plan.transcript_jsonl(), b.plan.transcript_jsonl());
        let c = run(&p, RatePair::new(6, 2), &model, 78).unwrap();
        assert_ne!(a.plan.transcript_jsonl(), c.plan.transcript_jsonl());
    }

    #[test]
    fn no_straggler_grid_always_verifies() {
        use crate::placement::{divisibility_check, Divisibility};
        use num_traits::ToPrimitive;
        for k in [4u32, 6, 8] {
            let mu = Frac::new(1, 2).unwrap();
            let p = SystemParams::new(k, k, mu, 1, 3, k, FieldWidth::W16).unwrap();
            let r = RatePair::new(k, p.floor_k_mu());
            let p = match divisibility_check(&p, r).unwrap() {
                Divisibility::Ok => p,
                Divisibility::NeedsScaling {
                    m_multiplier,
                    n_multiplier,
                } => SystemParams::new(
                    k,
                    k,
                    mu,
                    m_multiplier.to_u64().unwrap() as u32,
                    3,
                    k * n_multiplier.to_u64().unwrap() as u32,
                    FieldWidth::W16,
                )
                .unwrap(),
            };
            let out = run(&p, r, &StragglerModel::ShiftedExponential, k as u64).unwrap();
            assert!(out.report.verified, "K = {k}");
            assert_eq!(out.report.counted_load, out.report.analytic_load);
        }
    }

    #[test]
    fn monte_carlo_latency_converges() {
        let p = example();
        let est = monte_carlo_latency(&p, 4, 20_000, 5);
        assert!(est.relative_error < 0.02, "{est:?}");
        // More trials shrink the error on the same stream family.
        let coarse = monte_carlo_latency(&p, 4, 500, 5);
        let fine = monte_carlo_latency(&p, 4, 100_000, 5);
        assert!(fine.relative_error <= coarse.relative_error + 0.01);
    }

    #[test]
    fn single_server_latency_is_twice_the_shift() {
        let mu = Frac::new(1, 1).unwrap();
        let p = SystemParams::new(1, 1, mu, 2, 2, 2, FieldWidth::W16).unwrap();
        let est = monte_carlo_latency(&p, 1, 100_000, 11);
        // D(1) = mu N (1 + 1/1) = 2 mu N = 4.
        assert!((est.analytic - 4.0).abs() < 1e-12);
        assert!(est.relative_error < 0.02);
    }
}
