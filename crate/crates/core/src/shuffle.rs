//! Construction and execution of the coded-multicast shuffle plan.
//!
//! Every phase works in multicast groups: in a phase of gain i, groups of
//! i+1 non-stragglers exchange messages, each message XOR-combining one
//! needed value per receiver. A receiver cancels the other components with
//! values it computed locally, so one transmission serves i servers.
//!
//! The plan is fully materialized before any payload is computed, which
//! makes its structure (counts, decodability, canonical ordering) testable
//! without field arithmetic.

use std::collections::{BTreeMap, HashMap};

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::FieldElement;
use crate::placement::{divisibility_with_breakdown, reconstructible, PlacementMap};
use crate::ratio::{rat, Rat};
use crate::scheme::{load_breakdown, LoadBreakdown, RatePair, SystemParams};
use crate::subsets::colex_subsets;

/// Which output columns each non-straggler reduces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReduceAssignment {
    pub columns: BTreeMap<u32, Vec<u32>>,
}

impl ReduceAssignment {
    pub fn cols(&self, server: u32) -> &[u32] {
        &self.columns[&server]
    }
}

/// Splits the N output columns into q consecutive runs, one per server of Q
/// in ascending id order.
pub fn assign_reduce(p: &SystemParams, q_set: &[u32]) -> Result<ReduceAssignment> {
    let q = q_set.len() as u32;
    if !p.cols.is_multiple_of(q) {
        return Err(Error::ColumnsNotDivisible { q, n_cols: p.cols });
    }
    let per = p.cols / q;
    let columns = q_set
        .iter()
        .enumerate()
        .map(|(a, &server)| {
            let start = a as u32 * per;
            (server, (start..start + per).collect())
        })
        .collect();
    Ok(ReduceAssignment { columns })
}

/// One receiver's slot inside a multicast message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub row: u64,
    pub col: u32,
    pub target: u32,
}

/// A single multicast: the sender XORs one needed value per other group
/// member. With gain 1 this degenerates to a unicast of a single value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MulticastMessage {
    pub sender: u32,
    pub group: Vec<u32>,
    pub components: Vec<Component>,
    pub payload: Option<FieldElement>,
}

/// All messages exchanged within one group of a phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanGroup {
    pub members: Vec<u32>,
    pub messages: Vec<MulticastMessage>,
}

/// One shuffle phase: all groups of size gain+1 with their messages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanPhase {
    pub gain: u32,
    pub residual: bool,
    pub groups: Vec<PlanGroup>,
}

impl PlanPhase {
    pub fn message_count(&self) -> u64 {
        self.groups.iter().map(|g| g.messages.len() as u64).sum()
    }
}

/// The ordered shuffle plan: full phases from the highest gain down, then
/// the optional partial phase one gain lower.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShufflePlan {
    pub phases: Vec<PlanPhase>,
}

impl ShufflePlan {
    pub fn message_count(&self) -> u64 {
        self.phases.iter().map(PlanPhase::message_count).sum()
    }

    pub fn phase_counts(&self) -> Vec<(u32, bool, u64)> {
        self.phases
            .iter()
            .map(|ph| (ph.gain, ph.residual, ph.message_count()))
            .collect()
    }

    /// Flat view over all messages.
    pub fn messages(&self) -> impl Iterator<Item = &MulticastMessage> {
        self.phases
            .iter()
            .flat_map(|ph| ph.groups.iter())
            .flat_map(|g| g.messages.iter())
    }

    /// Executed payloads in transmission order, one w-bit word per
    /// message; `None` entries mean the plan has not been executed.
    pub fn payloads(&self) -> Vec<Option<FieldElement>> {
        self.messages().map(|m| m.payload).collect()
    }

    /// One JSON object per message, in transmission order, for bit-exact
    /// replay of an executed plan.
    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for ph in &self.phases {
            for group in &ph.groups {
                for msg in &group.messages {
                    let line = serde_json::json!({
                        "phase": ph.gain,
                        "residual": ph.residual,
                        "group": msg.group,
                        "sender": msg.sender,
                        "components": msg.components,
                        "payload": msg.payload,
                    });
                    out.push_str(&line.to_string());
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// The values a server computed in the map phase (and, during execution,
/// the values it has recovered so far), keyed by (coded row, column).
#[derive(Debug, Clone, Default)]
pub struct IvStore {
    values: HashMap<(u64, u32), FieldElement>,
}

impl IvStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, row: u64, col: u32, value: FieldElement) -> Result<()> {
        if self.values.insert((row, col), value).is_some() {
            return Err(Error::PlanInconsistency(format!(
                "value for row {row}, column {col} stored twice"
            )));
        }
        Ok(())
    }

    pub fn get(&self, row: u64, col: u32) -> Option<FieldElement> {
        self.values.get(&(row, col)).copied()
    }

    pub fn contains(&self, row: u64, col: u32) -> bool {
        self.values.contains_key(&(row, col))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rows present for a given column, ascending.
    pub fn rows_for_col(&self, col: u32) -> Vec<u64> {
        let mut rows: Vec<u64> = self
            .values
            .keys()
            .filter(|(_, c)| *c == col)
            .map(|(r, _)| *r)
            .collect();
        rows.sort_unstable();
        rows
    }
}

/// Candidate rows for a receiver: all rows of blocks whose subset meets Q
/// exactly in `peers`, ordered by (colex block rank, row index).
fn candidate_rows(pm: &PlacementMap, stragglers: &[u32], peers: &[u32], overlap: u32) -> Vec<u64> {
    let take = pm.rates.r2 - overlap;
    let mut ranked: Vec<u64> = colex_subsets(stragglers.len() as u32, take)
        .into_iter()
        .map(|idx| {
            let mut members: Vec<u32> = peers.to_vec();
            members.extend(idx.iter().map(|&i| stragglers[(i - 1) as usize]));
            members.sort_unstable();
            pm.block_rank(&members)
        })
        .collect();
    ranked.sort_unstable();
    let mut rows = Vec::with_capacity(ranked.len() * pm.block_size as usize);
    for rank in ranked {
        rows.extend(pm.block_range(rank));
    }
    rows
}

/// Expands rows into the canonical per-receiver value list (row-major over
/// the receiver's assigned columns).
fn rows_to_ivs(rows: &[u64], cols: &[u32]) -> Vec<(u64, u32)> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &row in rows {
        for &col in cols {
            out.push((row, col));
        }
    }
    out
}

/// Emits the messages of one group: each receiver's value list is split
/// into equal contiguous chunks, one per sender in ascending order, and a
/// sender combines the j-th entry of each of its per-receiver queues into
/// one message.
fn group_messages(
    members: &[u32],
    per_receiver: &BTreeMap<u32, Vec<(u64, u32)>>,
    gain: u32,
) -> Result<Vec<MulticastMessage>> {
    let gain = gain as usize;
    let mut queues: BTreeMap<(u32, u32), &[(u64, u32)]> = BTreeMap::new();
    for (&receiver, list) in per_receiver {
        if !list.len().is_multiple_of(gain) {
            return Err(Error::PlanInconsistency(format!(
                "receiver {receiver} in group {members:?} has {} values, not divisible by gain {gain}",
                list.len()
            )));
        }
        let chunk = list.len() / gain;
        let senders = members.iter().filter(|s| **s != receiver);
        for (part, &sender) in senders.enumerate() {
            queues.insert(
                (sender, receiver),
                &list[part * chunk..(part + 1) * chunk],
            );
        }
    }

    let mut messages = Vec::new();
    for &sender in members {
        let mine: Vec<(u32, &[(u64, u32)])> = queues
            .range((sender, 0)..=(sender, u32::MAX))
            .map(|((_, r), q)| (*r, *q))
            .collect();
        let Some(depth) = mine.iter().map(|(_, q)| q.len()).max() else {
            continue;
        };
        if gain > 1 && mine.iter().any(|(_, q)| q.len() != depth) {
            return Err(Error::PlanInconsistency(format!(
                "unbalanced queues for sender {sender} in group {members:?}"
            )));
        }
        for j in 0..depth {
            let components: Vec<Component> = mine
                .iter()
                .filter(|(_, q)| j < q.len())
                .map(|(receiver, q)| Component {
                    row: q[j].0,
                    col: q[j].1,
                    target: *receiver,
                })
                .collect();
            if components.is_empty() {
                continue;
            }
            messages.push(MulticastMessage {
                sender,
                group: members.to_vec(),
                components,
                payload: None,
            });
        }
    }
    Ok(messages)
}

/// Builds the full shuffle plan for a feasible, divisibility-clean instance.
pub fn build_plan(
    p: &SystemParams,
    r: RatePair,
    pm: &PlacementMap,
    q_set: &[u32],
    ra: &ReduceAssignment,
) -> Result<ShufflePlan> {
    let lb = load_breakdown(p, r)?;
    divisibility_with_breakdown(p, r, &lb).into_result()?;
    validate_q_set(p, q_set)?;
    if pm.params != *p || pm.rates != r {
        return Err(Error::PlanInconsistency(
            "placement built for different parameters".into(),
        ));
    }
    if !reconstructible(pm, q_set) {
        return Err(Error::PlanInconsistency(
            "non-stragglers cannot reconstruct the task matrix".into(),
        ));
    }

    let stragglers: Vec<u32> = (1..=p.servers).filter(|s| !q_set.contains(s)).collect();
    let mut phases = Vec::new();

    // Full phases, highest gain first: groups of gain+1 servers exchange
    // every needed value whose block meets Q in exactly the gain-sized
    // complement of the receiver.
    for gain in (lb.gain_cutoff..=lb.max_gain).rev() {
        let mut groups = Vec::new();
        for idx in colex_subsets(q_set.len() as u32, gain + 1) {
            let members: Vec<u32> = idx.iter().map(|&i| q_set[(i - 1) as usize]).collect();
            let mut per_receiver = BTreeMap::new();
            for &receiver in &members {
                let peers: Vec<u32> =
                    members.iter().copied().filter(|s| *s != receiver).collect();
                let rows = candidate_rows(pm, &stragglers, &peers, gain);
                per_receiver.insert(receiver, rows_to_ivs(&rows, ra.cols(receiver)));
            }
            let messages = group_messages(&members, &per_receiver, gain)?;
            groups.push(PlanGroup { members, messages });
        }
        phases.push(PlanPhase {
            gain,
            residual: false,
            groups,
        });
    }

    if lb.has_residual() {
        if let Some(phase) = residual_phase(p, r, pm, q_set, ra, &lb, &stragglers)? {
            phases.push(phase);
        }
    }

    Ok(ShufflePlan { phases })
}

/// The partial phase at gain `gain_cutoff - 1`: after the full phases each
/// server still misses a fixed number of whole rows, which are taken in
/// canonical order from the blocks one redundancy class lower.
fn residual_phase(
    p: &SystemParams,
    r: RatePair,
    pm: &PlacementMap,
    q_set: &[u32],
    ra: &ReduceAssignment,
    lb: &LoadBreakdown,
    stragglers: &[u32],
) -> Result<Option<PlanPhase>> {
    let gain = lb.gain_cutoff - 1;
    let leftover =
        LoadBreakdown::needed_total(p, r) - lb.needed_fractions_sum(lb.gain_cutoff);
    let rows_needed = (rat(p.rows as i64, 1) * leftover)
        .to_integer()
        .to_u64()
        .ok_or_else(|| Error::PlanInconsistency("residual row count not integral".into()))?;
    if rows_needed == 0 {
        return Ok(None);
    }

    // Per (receiver, group) row quotas. With gain >= 2 the quota is the
    // same for every group (enforced by the divisibility preflight); with
    // gain 1 the rows are taken greedily in canonical order across groups,
    // which is exact because unicast counts do not depend on balance.
    let group_lists = colex_subsets(q_set.len() as u32, gain + 1);
    let mut quota: HashMap<(u32, Vec<u32>), Vec<u64>> = HashMap::new();
    for &receiver in q_set {
        let others: Vec<u32> = q_set.iter().copied().filter(|s| *s != receiver).collect();
        let mut choices: Vec<(u64, u64, Vec<u32>)> = Vec::new();
        for peer_idx in colex_subsets(others.len() as u32, gain) {
            let peers: Vec<u32> = peer_idx.iter().map(|&i| others[(i - 1) as usize]).collect();
            let rows = candidate_rows(pm, stragglers, &peers, gain);
            for row in rows {
                // One entry per candidate row, tagged with its block rank
                // for the canonical global order.
                choices.push((row / pm.block_size, row, peers.clone()));
            }
        }
        choices.sort_unstable();
        if (choices.len() as u64) < rows_needed {
            return Err(Error::PlanInconsistency(format!(
                "receiver {receiver} has only {} candidate rows for {} residual slots",
                choices.len(),
                rows_needed
            )));
        }
        if gain >= 2 {
            let groups_per_receiver =
                crate::subsets::choose(q_set.len() as u64 - 1, gain as u64);
            let per_group = rows_needed / groups_per_receiver;
            debug_assert_eq!(rows_needed % groups_per_receiver, 0);
            let mut taken: HashMap<Vec<u32>, u64> = HashMap::new();
            for (_, row, peers) in choices {
                let t = taken.entry(peers.clone()).or_default();
                if *t < per_group {
                    *t += 1;
                    let mut g = peers;
                    g.push(receiver);
                    g.sort_unstable();
                    quota.entry((receiver, g)).or_default().push(row);
                }
            }
            if taken.len() as u64 != groups_per_receiver
                || taken.values().any(|t| *t != per_group)
            {
                return Err(Error::PlanInconsistency(format!(
                    "receiver {receiver} cannot fill its residual quota evenly"
                )));
            }
        } else {
            for (_, row, peers) in choices.into_iter().take(rows_needed as usize) {
                let mut g = peers;
                g.push(receiver);
                g.sort_unstable();
                quota.entry((receiver, g)).or_default().push(row);
            }
        }
    }

    let mut groups = Vec::new();
    for idx in group_lists {
        let members: Vec<u32> = idx.iter().map(|&i| q_set[(i - 1) as usize]).collect();
        let mut per_receiver = BTreeMap::new();
        for &receiver in &members {
            let rows = quota
                .get(&(receiver, members.clone()))
                .cloned()
                .unwrap_or_default();
            per_receiver.insert(receiver, rows_to_ivs(&rows, ra.cols(receiver)));
        }
        let messages = group_messages(&members, &per_receiver, gain)?;
        groups.push(PlanGroup { members, messages });
    }
    Ok(Some(PlanPhase {
        gain,
        residual: true,
        groups,
    }))
}

pub(crate) fn validate_q_set(p: &SystemParams, q_set: &[u32]) -> Result<()> {
    let ok = q_set.len() == p.non_stragglers as usize
        && q_set.windows(2).all(|w| w[0] < w[1])
        && q_set.iter().all(|&s| (1..=p.servers).contains(&s));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "Q must be {} distinct sorted server ids in [1, {}], got {q_set:?}",
            p.non_stragglers, p.servers
        )))
    }
}

/// XOR of the component values, all of which the sender computed locally.
pub fn encode_message(msg: &MulticastMessage, sender_store: &IvStore) -> Result<FieldElement> {
    let mut payload = 0;
    for comp in &msg.components {
        let v = sender_store.get(comp.row, comp.col).ok_or_else(|| {
            Error::PlanInconsistency(format!(
                "sender {} lacks the value for row {}, column {}",
                msg.sender, comp.row, comp.col
            ))
        })?;
        payload ^= v;
    }
    Ok(payload)
}

/// Cancels every other component with the receiver's side information and
/// returns the receiver's (row, column, value).
pub fn decode_message(
    msg: &MulticastMessage,
    receiver: u32,
    receiver_store: &IvStore,
) -> Result<(u64, u32, FieldElement)> {
    if receiver == msg.sender || !msg.group.contains(&receiver) {
        return Err(Error::PlanInconsistency(format!(
            "server {receiver} is not a receiver of this message"
        )));
    }
    let payload = msg.payload.ok_or_else(|| {
        Error::PlanInconsistency("message has no payload to decode".into())
    })?;
    let mut mine = None;
    let mut value = payload;
    for comp in &msg.components {
        if comp.target == receiver {
            mine = Some(comp);
            continue;
        }
        let side = receiver_store.get(comp.row, comp.col).ok_or_else(|| {
            Error::PlanInconsistency(format!(
                "receiver {receiver} misses side information for row {}, column {}",
                comp.row, comp.col
            ))
        })?;
        value ^= side;
    }
    let mine = mine.ok_or_else(|| {
        Error::PlanInconsistency(format!(
            "message from {} carries nothing for receiver {receiver}",
            msg.sender
        ))
    })?;
    Ok((mine.row, mine.col, value))
}

/// Communication load of a plan: message count normalized by the task rows.
pub fn plan_load(plan: &ShufflePlan, rows: u32) -> Rat {
    rat(plan.message_count() as i64, rows as i64)
}
