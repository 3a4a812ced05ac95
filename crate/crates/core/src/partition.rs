//! User partitioning: greedy selection rules, unequal time allocation, and
//! the exhaustive oracle over set partitions.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{distance, slot_prefactor, ChannelRealization, GroupStrategy, NetworkScenario};
use crate::precoding::{align_group, dof, interference_as_noise, relative_leakage, IaConfig, PrecoderSet};
use crate::rate::{user_rates, GroupRate, RateReport, UserRate};
use crate::rng::derive_seed;

/// Largest network `enumerate_partitions` accepts (Bell(12) ≈ 4.2 million).
pub const MAX_ENUMERATION_USERS: usize = 12;

/// Distance given to an empty group by the `separate` geographic rule, in meters.
pub const DEFAULT_EMPTY_GROUP_DISTANCE: f64 = 1.0;

/// One orthogonal time slot and the users sharing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub members: Vec<usize>,
    /// `μ_p`: fraction of the frame given to this group.
    pub share: f64,
    pub strategy: GroupStrategy,
}

impl Group {
    pub fn new(members: Vec<usize>, share: f64, strategy: GroupStrategy) -> Self {
        Self {
            members,
            share,
            strategy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub groups: Vec<Group>,
}

impl Partition {
    pub fn new(users: usize, groups: Vec<Group>) -> Result<Self> {
        let p = Self { groups };
        p.validate(users)?;
        Ok(p)
    }

    /// Equal shares, default strategy per group size.
    pub fn from_groups(users: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let share = 1.0 / groups.len().max(1) as f64;
        Self::new(
            users,
            groups
                .into_iter()
                .map(|m| {
                    let strategy = GroupStrategy::for_size(m.len());
                    Group::new(m, share, strategy)
                })
                .collect(),
        )
    }

    /// All users aligned in one slot.
    pub fn single_group(users: usize) -> Self {
        Self::from_groups(users, vec![(0..users).collect()]).expect("single group is valid")
    }

    /// TDMA: every user alone in its own slot.
    pub fn singletons(users: usize) -> Self {
        Self::from_groups(users, (0..users).map(|k| vec![k]).collect()).expect("singletons are valid")
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.members.len()).collect()
    }

    pub fn validate(&self, users: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidPartition(msg));
        if self.groups.is_empty() {
            return fail("no groups".into());
        }
        let mut seen = vec![false; users];
        for g in &self.groups {
            for &k in &g.members {
                if k >= users {
                    return fail(format!("user {} does not exist", k + 1));
                }
                if seen[k] {
                    return fail(format!("user {} appears twice", k + 1));
                }
                seen[k] = true;
            }
            if !(g.share >= 0.0) {
                return fail(format!("negative time share {}", g.share));
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return fail(format!("user {} is not assigned", k + 1));
        }
        let total: f64 = self.groups.iter().map(|g| g.share).sum();
        if (total - 1.0).abs() > 1e-9 {
            return fail(format!("time shares sum to {total}"));
        }
        Ok(())
    }

    /// Canonical text form: 1-based members ascending, groups ordered by least
    /// member, e.g. `1,3|2,4`.
    pub fn canonical(&self) -> String {
        canonical_groups(self.groups.iter().map(|g| g.members.as_slice()))
    }
}

fn canonical_groups<'a>(groups: impl Iterator<Item = &'a [usize]>) -> String {
    let mut sorted: Vec<Vec<usize>> = groups
        .filter(|g| !g.is_empty())
        .map(|g| {
            let mut m = g.to_vec();
            m.sort_unstable();
            m
        })
        .collect();
    sorted.sort();
    sorted
        .iter()
        .map(|g| g.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("|")
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl FromStr for Partition {
    type Err = Error;

    /// Parses the canonical form with equal shares; the user count is the
    /// largest index mentioned.
    fn from_str(s: &str) -> Result<Self> {
        let groups = s
            .split('|')
            .map(|g| {
                g.split(',')
                    .map(|k| match k.trim().parse::<usize>() {
                        Ok(v) if v >= 1 => Ok(v - 1),
                        _ => Err(Error::InvalidPartition(format!("bad user index {k:?} in {s:?}"))),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let users = groups.iter().flatten().max().map_or(0, |m| m + 1);
        Self::from_groups(users, groups)
    }
}

/// `(N_t + N_r)k/(k+1)` capped at `k·min(N_t, N_r)`, without the floor used
/// for stream counts. A lone user gets `min(N_t, N_r)`.
pub fn real_dof(users: usize, tx_antennas: usize, rx_antennas: usize) -> f64 {
    let per_link = tx_antennas.min(rx_antennas) as f64;
    if users <= 1 {
        return per_link;
    }
    let k = users as f64;
    ((tx_antennas + rx_antennas) as f64 * k / (k + 1.0)).min(k * per_link)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionScore {
    pub user: usize,
    pub group: usize,
    pub score: f64,
}

/// Estimated rate of a user joining a group that currently has `group_size`
/// members: `max(0, 1/P − L(K_p+1)/T) · S · log2(1 + q/(N_t N_r))`, where `q`
/// is the direct-link quality `ρ_{k,k}‖H_{k,k}‖²_F`.
pub fn approx_rate(scenario: &NetworkScenario, group_size: usize, groups: usize, quality: f64, streams: f64) -> f64 {
    assert!(quality >= 0.0, "channel quality must be nonnegative");
    let prefactor = slot_prefactor(
        1.0 / groups as f64,
        scenario.default_overhead(group_size + 1),
        scenario.coherence_time,
    );
    let nt_nr = (scenario.tx_antennas * scenario.rx_antennas) as f64;
    prefactor * streams * (1.0 + quality / nt_nr).log2()
}

/// Stream count per user assumed when scoring a group of `size` users.
pub fn streams_per_user(scenario: &NetworkScenario, size: usize) -> f64 {
    real_dof(size, scenario.tx_antennas, scenario.rx_antennas) / size as f64
}

/// Degrees of freedom with overhead when groups hold `k` users:
/// `(1/⌈K/k⌉ − L(k)/T)·d(k)`. Not clamped.
pub fn dof_with_overhead(k: usize, scenario: &NetworkScenario) -> f64 {
    assert!(k >= 1 && k <= scenario.users, "group size must lie in 1..=K");
    let groups = scenario.users.div_ceil(k) as f64;
    let slot = 1.0 / groups - scenario.default_overhead(k) / scenario.coherence_time;
    slot * real_dof(k, scenario.tx_antennas, scenario.rx_antennas)
}

/// `(K_O, P)`: the DOF-optimal group size and the matching group count.
/// Ties go to the larger group size.
pub fn choose_group_count(scenario: &NetworkScenario) -> (usize, usize) {
    choose_group_count_within(scenario, scenario.users)
}

/// Largest group that can be aligned with at least one stream per user.
pub fn max_alignable_group(scenario: &NetworkScenario) -> usize {
    (1..=scenario.users)
        .rev()
        .find(|&k| dof(k, scenario.tx_antennas, scenario.rx_antennas) >= k)
        .unwrap_or(1)
}

/// [`choose_group_count`] with the group size limited to `max_size`.
pub fn choose_group_count_within(scenario: &NetworkScenario, max_size: usize) -> (usize, usize) {
    let mut best = (1, f64::NEG_INFINITY);
    for k in 1..=max_size.clamp(1, scenario.users) {
        let v = dof_with_overhead(k, scenario);
        if v >= best.1 {
            best = (k, v);
        }
    }
    (best.0, scenario.users.div_ceil(best.0))
}

/// Result of a greedy pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOutcome {
    pub partition: Partition,
    pub group_size: usize,
    /// Accumulated selection scores per group (`R̄_p`).
    pub group_scores: Vec<f64>,
    /// Number of selection-function evaluations.
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
enum Rule {
    MaxScore,
    MinDisparity,
}

fn greedy_pass(scenario: &NetworkScenario, qualities: &[f64], groups: usize, cap: usize, rule: Rule) -> GreedyOutcome {
    let users = scenario.users;
    assert_eq!(qualities.len(), users, "one quality per user");
    assert!(groups >= 1 && cap >= 1 && groups * cap >= users);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups];
    let mut scores = vec![0.0; groups];
    let mut available: Vec<usize> = (0..users).collect();
    let mut evaluations = 0;

    while !available.is_empty() {
        let mut pick: Option<(SelectionScore, f64)> = None;
        for &k in &available {
            for p in 0..groups {
                if members[p].len() >= cap {
                    continue;
                }
                let size = members[p].len();
                let score = approx_rate(scenario, size, groups, qualities[k], streams_per_user(scenario, size + 1));
                evaluations += 1;
                let key = match rule {
                    Rule::MaxScore => score,
                    Rule::MinDisparity => {
                        let mut hypothetical = scores.clone();
                        hypothetical[p] += score;
                        -disparity(&hypothetical)
                    }
                };
                // Users and groups are visited in ascending order, so a strict
                // comparison keeps the lowest indices on ties.
                if pick.as_ref().is_none_or(|(_, best)| key > *best) {
                    pick = Some((SelectionScore { user: k, group: p, score }, key));
                }
            }
        }
        let (choice, _) = pick.expect("a group with room exists");
        let choice = if choice.score > 0.0 || matches!(rule, Rule::MinDisparity) {
            choice
        } else {
            // Every candidate scores zero: hand the lowest remaining user to
            // the smallest group with room.
            let group = (0..groups)
                .filter(|&p| members[p].len() < cap)
                .min_by_key(|&p| members[p].len())
                .expect("a group with room exists");
            SelectionScore {
                user: available[0],
                group,
                score: 0.0,
            }
        };
        members[choice.group].push(choice.user);
        scores[choice.group] += choice.score;
        available.retain(|&k| k != choice.user);
    }

    let share = 1.0 / groups as f64;
    let partition = Partition {
        groups: members
            .into_iter()
            .map(|m| {
                let strategy = GroupStrategy::for_size(m.len());
                Group::new(m, share, strategy)
            })
            .collect(),
    };
    GreedyOutcome {
        partition,
        group_size: cap,
        group_scores: scores,
        evaluations,
    }
}

/// Greedy partitioning on estimated IA rates with `P` and `K_O` from
/// [`choose_group_count`], searched only over group sizes that can be
/// aligned. Groups never exceed `K_O` members.
pub fn greedy_balanced(scenario: &NetworkScenario, qualities: &[f64]) -> GreedyOutcome {
    let (cap, groups) = choose_group_count_within(scenario, max_alignable_group(scenario));
    greedy_pass(scenario, qualities, groups, cap, Rule::MaxScore)
}

/// [`greedy_balanced`] with the group count fixed to `groups` and groups
/// capped at `⌈K/P⌉`.
pub fn greedy_balanced_with_groups(scenario: &NetworkScenario, qualities: &[f64], groups: usize) -> GreedyOutcome {
    assert!(groups >= 1 && groups <= scenario.users, "group count must lie in 1..=K");
    greedy_pass(scenario, qualities, groups, scenario.users.div_ceil(groups), Rule::MaxScore)
}

/// Spread between the best and worst group: `max − min`, zero for fewer
/// than two groups.
pub fn disparity(group_scores: &[f64]) -> f64 {
    if group_scores.len() < 2 {
        return 0.0;
    }
    let max = group_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = group_scores.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Greedy partitioning that adds, at every step, the user and group that
/// leave the smallest disparity. Shares are equal placeholders; use
/// [`allocate_time`] to equalize net rates.
pub fn greedy_rate_fair(scenario: &NetworkScenario, qualities: &[f64]) -> GreedyOutcome {
    let (cap, groups) = choose_group_count_within(scenario, max_alignable_group(scenario));
    greedy_pass(scenario, qualities, groups, cap, Rule::MinDisparity)
}

pub fn greedy_rate_fair_with_groups(scenario: &NetworkScenario, qualities: &[f64], groups: usize) -> GreedyOutcome {
    assert!(groups >= 1 && groups <= scenario.users, "group count must lie in 1..=K");
    greedy_pass(scenario, qualities, groups, scenario.users.div_ceil(groups), Rule::MinDisparity)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeAllocation {
    pub shares: Vec<f64>,
    /// Common net rate `R*` of every group.
    pub common_rate: f64,
    /// False when some share came out negative: equal net rates are not
    /// achievable with these overheads.
    pub feasible: bool,
}

/// Solves `Σμ_p = 1`, `R_p μ_p − R* = α_p R_p` for the shares that equalize
/// the net group rates `(μ_p − α_p)R_p`.
pub fn allocate_time(rates: &[f64], overhead_fractions: &[f64]) -> Result<TimeAllocation> {
    let p = rates.len();
    if p == 0 || overhead_fractions.len() != p {
        return Err(Error::InvalidArgument("one overhead fraction per group rate is required".into()));
    }
    if let Some((group, &rate)) = rates.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::SingularTimeAllocation { group, rate });
    }
    let n = p + 1;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for j in 0..p {
        a[(0, j)] = 1.0;
    }
    b[0] = 1.0;
    for i in 0..p {
        a[(i + 1, i)] = rates[i];
        a[(i + 1, p)] = -1.0;
        b[i + 1] = overhead_fractions[i] * rates[i];
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or(Error::SingularTimeAllocation { group: 0, rate: rates[0] })?;
    let shares: Vec<f64> = x.iter().take(p).copied().collect();
    let common_rate = x[p];
    let feasible = shares.iter().all(|&m| m >= 0.0) && common_rate >= 0.0;
    Ok(TimeAllocation {
        shares,
        common_rate,
        feasible,
    })
}

/// `min_{ℓ∈group} ‖δ_k − π_ℓ‖`: distance from receiver `k` to the nearest
/// transmitter in `group`, or `empty_distance` when the group is empty.
pub fn geo_distance(scenario: &NetworkScenario, k: usize, group: &[usize], empty_distance: f64) -> Result<f64> {
    let pos = scenario.positions()?;
    if group.is_empty() {
        return Ok(empty_distance);
    }
    Ok(group
        .iter()
        .map(|&l| distance(pos.receivers[k], pos.transmitters[l]))
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeoVariant {
    /// Group users far apart and transmit as if there were no interference.
    Separate,
    /// Group nearby users and align them.
    Cluster,
}

impl GeoVariant {
    pub fn strategy(self, size: usize) -> GroupStrategy {
        match (self, size) {
            (_, 0 | 1) => GroupStrategy::SingleUser,
            (GeoVariant::Separate, _) => GroupStrategy::InterferenceAsNoise,
            (GeoVariant::Cluster, _) => GroupStrategy::Alignment,
        }
    }

    /// Distance given to an empty group. Clustering treats empty groups as
    /// infinitely far, otherwise every user would prefer to start a new group.
    pub fn empty_distance(self) -> f64 {
        match self {
            GeoVariant::Separate => DEFAULT_EMPTY_GROUP_DISTANCE,
            GeoVariant::Cluster => f64::INFINITY,
        }
    }
}

/// Greedy geographic grouping with `P` and `K_O` from [`choose_group_count`].
/// Aligned (`cluster`) groups are limited to sizes that can be aligned.
pub fn greedy_geographic(scenario: &NetworkScenario, variant: GeoVariant) -> Result<GreedyOutcome> {
    let (cap, groups) = match variant {
        GeoVariant::Separate => choose_group_count(scenario),
        GeoVariant::Cluster => choose_group_count_within(scenario, max_alignable_group(scenario)),
    };
    greedy_geographic_with(scenario, variant, groups, cap, variant.empty_distance())
}

/// Greedy geographic grouping into `groups` slots of at most `cap` users.
/// `separate` picks the pair with the largest distance, `cluster` the smallest;
/// ties go to the lowest user, then the lowest group.
pub fn greedy_geographic_with(
    scenario: &NetworkScenario,
    variant: GeoVariant,
    groups: usize,
    cap: usize,
    empty_distance: f64,
) -> Result<GreedyOutcome> {
    let users = scenario.users;
    scenario.positions()?;
    if groups == 0 || cap == 0 || groups * cap < users {
        return Err(Error::InvalidArgument(format!("{groups} groups of {cap} cannot hold {users} users")));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups];
    let mut available: Vec<usize> = (0..users).collect();
    let mut evaluations = 0;
    while !available.is_empty() {
        let mut pick: Option<(usize, usize, f64)> = None;
        for &k in &available {
            for (p, group) in members.iter().enumerate() {
                if group.len() >= cap {
                    continue;
                }
                let d = geo_distance(scenario, k, group, empty_distance)?;
                evaluations += 1;
                let key = match variant {
                    GeoVariant::Separate => d,
                    GeoVariant::Cluster => -d,
                };
                if pick.is_none_or(|(_, _, best)| key > best) {
                    pick = Some((k, p, key));
                }
            }
        }
        let (k, p, _) = pick.expect("a group with room exists");
        members[p].push(k);
        available.retain(|&u| u != k);
    }
    let share = 1.0 / groups as f64;
    let partition = Partition {
        groups: members
            .into_iter()
            .map(|m| {
                let strategy = variant.strategy(m.len());
                Group::new(m, share, strategy)
            })
            .collect(),
    };
    Ok(GreedyOutcome {
        partition,
        group_size: cap,
        group_scores: vec![0.0; groups],
        evaluations,
    })
}

/// Iterator over every set partition of `{0, …, n−1}` in restricted-growth
/// order. Groups come out ordered by least member.
pub struct SetPartitions {
    codes: Vec<usize>,
    maxima: Vec<usize>,
    done: bool,
}

impl SetPartitions {
    fn new(n: usize) -> Self {
        Self {
            codes: vec![0; n],
            maxima: vec![0; n],
            done: n == 0,
        }
    }

    fn advance(&mut self) {
        let n = self.codes.len();
        for i in (1..n).rev() {
            if self.codes[i] <= self.maxima[i - 1] {
                self.codes[i] += 1;
                self.maxima[i] = self.maxima[i - 1].max(self.codes[i]);
                for j in i + 1..n {
                    self.codes[j] = 0;
                    self.maxima[j] = self.maxima[i];
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for SetPartitions {
    type Item = Vec<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let count = self.maxima.last().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); count];
        for (k, &c) in self.codes.iter().enumerate() {
            groups[c].push(k);
        }
        self.advance();
        Some(groups)
    }
}

/// True when group sizes differ by at most one.
pub fn is_balanced(groups: &[Vec<usize>]) -> bool {
    let max = groups.iter().map(Vec::len).max().unwrap_or(0);
    let min = groups.iter().map(Vec::len).min().unwrap_or(0);
    max - min <= 1
}

/// Every set partition of `users` users, optionally only the balanced ones.
pub fn enumerate_partitions(users: usize, balanced_only: bool) -> Result<impl Iterator<Item = Vec<Vec<usize>>>> {
    if users > MAX_ENUMERATION_USERS {
        return Err(Error::EnumerationTooLarge {
            users,
            limit: MAX_ENUMERATION_USERS,
        });
    }
    Ok(SetPartitions::new(users).filter(move |g| !balanced_only || is_balanced(g)))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Number of partitions of `users` users into `groups` groups of near-equal
/// size. When `groups` divides `users` this is
/// `(1/P!)·Π_{i=0}^{P−1} C(K − iK/P, K/P)`.
pub fn count_balanced(users: usize, groups: usize) -> u128 {
    assert!(groups >= 1 && groups <= users, "group count must lie in 1..=K");
    let small = users / groups;
    let large_groups = users % groups;
    let small_groups = groups - large_groups;
    let mut remaining = users;
    let mut ways = 1u128;
    for size in std::iter::repeat_n(small + 1, large_groups).chain(std::iter::repeat_n(small, small_groups)) {
        ways *= binomial(remaining, size);
        remaining -= size;
    }
    ways / (factorial(large_groups) * factorial(small_groups))
}

/// Balanced partitions summed over every group count that divides `users`.
pub fn count_balanced_searches(users: usize) -> u128 {
    (1..=users).filter(|&p| users.is_multiple_of(p)).map(|p| count_balanced(users, p)).sum()
}

/// Bell number via the Bell triangle.
pub fn bell_number(n: usize) -> u128 {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().expect("row is nonempty"));
        for &v in &row {
            let last = *next.last().expect("next is nonempty");
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

/// Precoders and full-frame rates of one group.
#[derive(Debug, Clone)]
pub struct GroupDesign {
    pub precoders: Option<PrecoderSet>,
    pub user_rates: Vec<(usize, f64)>,
    pub gross_rate: f64,
    pub leakage: f64,
    pub warning: Option<String>,
}

/// Designs and rates groups on one channel realization, caching by
/// membership and strategy. A group's design depends only on its members, so
/// it is shared by every partition containing it and by every `T`.
pub struct GroupEvaluator<'r, 's> {
    pub realization: &'r ChannelRealization<'s>,
    pub config: IaConfig,
    pub seed: u64,
    cache: HashMap<(u64, GroupStrategy), GroupDesign>,
}

impl<'r, 's> GroupEvaluator<'r, 's> {
    pub fn new(realization: &'r ChannelRealization<'s>, config: IaConfig, seed: u64) -> Self {
        assert!(realization.scenario.users <= 64, "membership masks hold at most 64 users");
        Self {
            realization,
            config,
            seed,
            cache: HashMap::new(),
        }
    }

    pub fn design(&mut self, members: &[usize], strategy: GroupStrategy) -> &GroupDesign {
        let mask = members.iter().fold(0u64, |m, &k| m | 1 << k);
        let realization = self.realization;
        let config = self.config;
        let seed = derive_seed(self.seed, &[mask]);
        self.cache
            .entry((mask, strategy))
            .or_insert_with(|| build_design(realization, members, strategy, config, seed))
    }

    /// Net rate report of `partition` with coherence time `coherence_time`.
    pub fn evaluate(&mut self, partition: &Partition, coherence_time: f64) -> RateReport {
        let scenario = self.realization.scenario;
        let mut report = RateReport::default();
        let mut leakage = 0.0;
        for (p, group) in partition.groups.iter().enumerate() {
            if group.members.is_empty() {
                report.warnings.push(format!("group {p} is empty and contributes no rate"));
                continue;
            }
            let design = self.design(&group.members, group.strategy).clone();
            let overhead = scenario.group_overhead(group.members.len(), group.strategy);
            let prefactor = slot_prefactor(group.share, overhead, coherence_time);
            for &(user, rate) in &design.user_rates {
                report.users.push(UserRate {
                    user,
                    rate: prefactor * rate,
                });
            }
            leakage += design.leakage;
            if let Some(w) = design.warning {
                report.warnings.push(w);
            }
            let net = prefactor * design.gross_rate;
            report.total += net;
            report.groups.push(GroupRate {
                members: group.members.clone(),
                overhead_fraction: (overhead / coherence_time).min(1.0),
                prefactor,
                gross_rate: design.gross_rate,
                net_rate: net,
            });
        }
        report.leakage = Some(leakage);
        report
    }
}

fn build_design(
    realization: &ChannelRealization<'_>,
    members: &[usize],
    strategy: GroupStrategy,
    config: IaConfig,
    seed: u64,
) -> GroupDesign {
    let set = match strategy {
        GroupStrategy::InterferenceAsNoise => Ok(interference_as_noise(realization, members)),
        GroupStrategy::Alignment | GroupStrategy::SingleUser => {
            align_group(realization, members, config, seed).map(|o| o.precoders)
        }
    };
    match set {
        Ok(set) => {
            let rates = user_rates(realization, &set);
            let leakage = if set.len() > 1 { relative_leakage(realization, &set) } else { 0.0 };
            GroupDesign {
                gross_rate: rates.iter().map(|(_, r)| r).sum(),
                user_rates: rates,
                leakage,
                precoders: Some(set),
                warning: None,
            }
        }
        Err(e) => GroupDesign {
            precoders: None,
            user_rates: members.iter().map(|&k| (k, 0.0)).collect(),
            gross_rate: 0.0,
            leakage: 0.0,
            warning: Some(format!("group {}: {e}; counted as zero rate", canonical_groups(std::iter::once(members)))),
        },
    }
}

/// Best partition by actual net sum rate, over every set partition with one
/// IA design per group. Ties keep the earliest partition in enumeration order.
pub fn exhaustive_best(realization: &ChannelRealization<'_>, config: IaConfig, seed: u64) -> Result<(Partition, RateReport)> {
    let mut evaluator = GroupEvaluator::new(realization, config, seed);
    exhaustive_best_with(&mut evaluator, realization.scenario.coherence_time)
}

/// [`exhaustive_best`] on a shared evaluator, at coherence time `coherence_time`.
pub fn exhaustive_best_with(
    evaluator: &mut GroupEvaluator<'_, '_>,
    coherence_time: f64,
) -> Result<(Partition, RateReport)> {
    let users = evaluator.realization.scenario.users;
    let mut best: Option<(Partition, RateReport)> = None;
    for groups in enumerate_partitions(users, false)? {
        let partition = Partition::from_groups(users, groups)?;
        let report = evaluator.evaluate(&partition, coherence_time);
        if best.as_ref().is_none_or(|(_, b)| report.total > b.total) {
            best = Some((partition, report));
        }
    }
    Ok(best.expect("at least one partition"))
}

/// Sum of selection scores when every member is scored at its final group
/// size. Used as the estimated-rate objective over whole partitions.
pub fn estimated_partition_score(scenario: &NetworkScenario, qualities: &[f64], groups: &[Vec<usize>]) -> f64 {
    let p = groups.len();
    groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            let s = streams_per_user(scenario, g.len());
            g.iter().map(|&k| approx_rate(scenario, g.len() - 1, p, qualities[k], s)).sum::<f64>()
        })
        .sum()
}
