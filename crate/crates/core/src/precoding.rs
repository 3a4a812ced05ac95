//! Linear precoder and combiner design.
//!
//! Stream counts follow the conjectured linear-IA degrees of freedom
//! `d(K, N_t, N_r) = ⌊(N_t + N_r)K/(K + 1)⌋`. Groups of two or more users are
//! aligned by alternating leakage minimization between the forward and the
//! reciprocal network; lone users fall back to eigenbeamforming.

use std::io::Write;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::linalg::{
    complex_gaussian, frobenius_sq, least_dominant_eigenvectors, most_dominant_eigenvectors,
    orthonormalize, ComplexMatrix,
};
use crate::model::ChannelRealization;
use crate::rate::sum_rate_perfect;
use crate::rng::{derive_seed, derived_rng, rng_from_seed, stream, SimRng};

/// Relative leakage below which a design counts as aligned. Reporting only.
pub const ALIGNED_LEAKAGE: f64 = 1e-6;

/// Total streams a `users`-user group can carry with linear alignment.
pub fn dof(users: usize, tx_antennas: usize, rx_antennas: usize) -> usize {
    assert!(users >= 1, "dof needs at least one user");
    let per_link = tx_antennas.min(rx_antennas);
    if users == 1 {
        return per_link;
    }
    ((tx_antennas + rx_antennas) * users / (users + 1)).min(users * per_link)
}

/// Streams per user, in the order of the group it was built for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamAllocation(pub Vec<usize>);

impl StreamAllocation {
    pub fn uniform(users: usize, streams: usize) -> Self {
        Self(vec![streams; users])
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> usize {
        self.0[index]
    }
}

/// Splits `d(users, N_t, N_r)` streams as evenly as possible; the `d mod users`
/// users receiving the extra stream are drawn uniformly from `seed`.
pub fn allocate_streams(
    users: usize,
    tx_antennas: usize,
    rx_antennas: usize,
    seed: u64,
) -> Result<StreamAllocation> {
    let d = dof(users, tx_antennas, rx_antennas);
    if d < users {
        return Err(Error::InfeasibleStreams {
            users,
            tx: tx_antennas,
            rx: rx_antennas,
            dof: d,
        });
    }
    let base = d / users;
    let extra = d % users;
    let mut streams = vec![base; users];
    let mut rng = rng_from_seed(seed);
    for i in sample(&mut rng, users, extra) {
        streams[i] += 1;
    }
    Ok(StreamAllocation(streams))
}

/// Precoders `F_k` (`N_t × S_k`) and combiners `U_k` (`N_r × S_k`) for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub users: Vec<usize>,
    pub streams: Vec<usize>,
    pub precoders: Vec<ComplexMatrix>,
    pub combiners: Vec<ComplexMatrix>,
}

impl PrecoderSet {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn position(&self, user: usize) -> Option<usize> {
        self.users.iter().position(|&u| u == user)
    }

    pub fn precoder(&self, user: usize) -> Option<&ComplexMatrix> {
        self.position(user).map(|i| &self.precoders[i])
    }

    pub fn combiner(&self, user: usize) -> Option<&ComplexMatrix> {
        self.position(user).map(|i| &self.combiners[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IaConfig {
    pub iterations: usize,
    pub restarts: usize,
}

impl Default for IaConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            restarts: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IaOutcome {
    pub precoders: PrecoderSet,
    /// Perfect-CSI group rate of the returned design, no overhead applied.
    pub sum_rate: f64,
    pub relative_leakage: f64,
    pub best_restart: usize,
    /// Weighted leakage (the minimized objective) after each iteration, one
    /// trace per restart.
    pub traces: Vec<Vec<f64>>,
}

impl IaOutcome {
    pub fn aligned(&self) -> bool {
        self.relative_leakage < ALIGNED_LEAKAGE
    }
}

/// Columns drawn uniformly from the complex Stiefel manifold.
pub fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    random_orthonormal_with(rows, cols, &mut rng_from_seed(seed))
}

pub fn random_orthonormal_with(rows: usize, cols: usize, rng: &mut SimRng) -> ComplexMatrix {
    assert!(cols <= rows, "cannot fit {cols} orthonormal columns in dimension {rows}");
    orthonormalize(&complex_gaussian(rows, cols, rng))
}

/// `Σ_k Σ_{ℓ≠k} (ρ_{k,ℓ}/S_ℓ)‖U_k* H_{k,ℓ} F_ℓ‖²_F`.
pub fn weighted_leakage(realization: &ChannelRealization<'_>, set: &PrecoderSet) -> f64 {
    let scenario = realization.scenario;
    let mut total = 0.0;
    for (i, &k) in set.users.iter().enumerate() {
        for (j, &l) in set.users.iter().enumerate() {
            if i == j {
                continue;
            }
            let w = scenario.snr(k, l) / set.streams[j] as f64;
            let leak = set.combiners[i].adjoint() * realization.channel(k, l) * &set.precoders[j];
            total += w * frobenius_sq(&leak);
        }
    }
    total
}

/// `Σ_k Σ_{ℓ≠k} ‖U_k* H_{k,ℓ} F_ℓ‖²_F / Σ_k ρ_{k,k}`. Zero exactly when the
/// group is aligned.
pub fn relative_leakage(realization: &ChannelRealization<'_>, set: &PrecoderSet) -> f64 {
    let mut leak = 0.0;
    for (i, &k) in set.users.iter().enumerate() {
        for (j, &l) in set.users.iter().enumerate() {
            if i != j {
                leak += frobenius_sq(&(set.combiners[i].adjoint() * realization.channel(k, l) * &set.precoders[j]));
            }
        }
    }
    let scale: f64 = set.users.iter().map(|&k| realization.scenario.snr(k, k)).sum();
    if scale > 0.0 {
        leak / scale
    } else {
        leak
    }
}

/// Dominant-eigenmode transmission on the direct link of `user`.
pub fn eigenbeamforming(realization: &ChannelRealization<'_>, user: usize, streams: usize) -> PrecoderSet {
    let h = realization.channel(user, user);
    let f = most_dominant_eigenvectors(&(h.adjoint() * h), streams);
    let u = most_dominant_eigenvectors(&(h * h.adjoint()), streams);
    PrecoderSet {
        users: vec![user],
        streams: vec![streams],
        precoders: vec![f],
        combiners: vec![u],
    }
}

/// Every member beamforms on its own link with `min(N_t, N_r)` streams and
/// ignores the others.
pub fn interference_as_noise(realization: &ChannelRealization<'_>, group: &[usize]) -> PrecoderSet {
    let s = realization
        .scenario
        .tx_antennas
        .min(realization.scenario.rx_antennas);
    let mut set = PrecoderSet {
        users: Vec::with_capacity(group.len()),
        streams: Vec::with_capacity(group.len()),
        precoders: Vec::with_capacity(group.len()),
        combiners: Vec::with_capacity(group.len()),
    };
    for &k in group {
        let single = eigenbeamforming(realization, k, s);
        set.users.push(k);
        set.streams.push(s);
        set.precoders.extend(single.precoders);
        set.combiners.extend(single.combiners);
    }
    set
}

fn update_combiners(realization: &ChannelRealization<'_>, set: &mut PrecoderSet) {
    let scenario = realization.scenario;
    let nr = scenario.rx_antennas;
    let mut combiners = Vec::with_capacity(set.len());
    for (i, &k) in set.users.iter().enumerate() {
        let mut q = ComplexMatrix::zeros(nr, nr);
        for (j, &l) in set.users.iter().enumerate() {
            if i == j {
                continue;
            }
            let hf = realization.channel(k, l) * &set.precoders[j];
            q += (&hf * hf.adjoint()).scale(scenario.snr(k, l) / set.streams[j] as f64);
        }
        combiners.push(least_dominant_eigenvectors(&q, set.streams[i]));
    }
    set.combiners = combiners;
}

// Reciprocal step. The weights match the forward objective exactly, so each
// half-step minimizes the same leakage and the sequence is nonincreasing.
fn update_precoders(realization: &ChannelRealization<'_>, set: &mut PrecoderSet) {
    let scenario = realization.scenario;
    let nt = scenario.tx_antennas;
    let mut precoders = Vec::with_capacity(set.len());
    for (j, &l) in set.users.iter().enumerate() {
        let mut q = ComplexMatrix::zeros(nt, nt);
        for (i, &k) in set.users.iter().enumerate() {
            if i == j {
                continue;
            }
            let hu = realization.channel(k, l).adjoint() * &set.combiners[i];
            q += (&hu * hu.adjoint()).scale(scenario.snr(k, l) / set.streams[j] as f64);
        }
        precoders.push(least_dominant_eigenvectors(&q, set.streams[j]));
    }
    set.precoders = precoders;
}

/// Iterative minimum-leakage interference alignment for `group`.
///
/// `streams[i]` belongs to `group[i]`. Each restart starts from random
/// orthonormal precoders seeded per user id, so relabeling the group does not
/// change the design. The restart with the highest perfect-CSI sum rate wins;
/// ties go to the lowest restart index.
pub fn iterative_ia(
    realization: &ChannelRealization<'_>,
    group: &[usize],
    streams: &StreamAllocation,
    config: IaConfig,
    seed: u64,
) -> IaOutcome {
    assert!(!group.is_empty(), "cannot align an empty group");
    assert_eq!(group.len(), streams.len(), "one stream count per group member");
    let scenario = realization.scenario;
    assert!(
        streams.0.iter().all(|&s| s >= 1 && s <= scenario.tx_antennas.min(scenario.rx_antennas)),
        "stream counts must lie in 1..=min(N_t, N_r)"
    );

    if group.len() == 1 {
        let set = eigenbeamforming(realization, group[0], streams.get(0));
        let sum_rate = sum_rate_perfect(realization, &set, 1.0).total;
        return IaOutcome {
            precoders: set,
            sum_rate,
            relative_leakage: 0.0,
            best_restart: 0,
            traces: vec![Vec::new()],
        };
    }

    let mut order: Vec<usize> = (0..group.len()).collect();
    order.sort_by_key(|&i| group[i]);
    let users: Vec<usize> = order.iter().map(|&i| group[i]).collect();
    let counts: Vec<usize> = order.iter().map(|&i| streams.get(i)).collect();

    let mut best: Option<(PrecoderSet, f64, usize)> = None;
    let mut traces = Vec::with_capacity(config.restarts.max(1));
    for restart in 0..config.restarts.max(1) {
        let precoders = users
            .iter()
            .zip(&counts)
            .map(|(&k, &s)| {
                let mut rng = derived_rng(seed, &[stream::PRECODER, restart as u64, k as u64]);
                random_orthonormal_with(scenario.tx_antennas, s, &mut rng)
            })
            .collect();
        let mut set = PrecoderSet {
            users: users.clone(),
            streams: counts.clone(),
            precoders,
            combiners: Vec::new(),
        };
        let mut trace = Vec::with_capacity(config.iterations);
        update_combiners(realization, &mut set);
        for _ in 0..config.iterations {
            update_precoders(realization, &mut set);
            update_combiners(realization, &mut set);
            trace.push(weighted_leakage(realization, &set));
        }
        let rate = sum_rate_perfect(realization, &set, 1.0).total;
        traces.push(trace);
        if best.as_ref().is_none_or(|(_, r, _)| rate > *r) {
            best = Some((set, rate, restart));
        }
    }
    let (sorted, sum_rate, best_restart) = best.expect("at least one restart");

    // Back to the caller's ordering.
    let mut set = PrecoderSet {
        users: group.to_vec(),
        streams: streams.0.clone(),
        precoders: vec![ComplexMatrix::zeros(0, 0); group.len()],
        combiners: vec![ComplexMatrix::zeros(0, 0); group.len()],
    };
    for (pos, &orig) in order.iter().enumerate() {
        set.precoders[orig] = sorted.precoders[pos].clone();
        set.combiners[orig] = sorted.combiners[pos].clone();
    }
    let relative_leakage = relative_leakage(realization, &set);
    IaOutcome {
        precoders: set,
        sum_rate,
        relative_leakage,
        best_restart,
        traces,
    }
}

/// Allocates streams for `group` and aligns it. Seeds for both steps derive
/// from `seed`, so the same group always gets the same design.
pub fn align_group(
    realization: &ChannelRealization<'_>,
    group: &[usize],
    config: IaConfig,
    seed: u64,
) -> Result<IaOutcome> {
    let scenario = realization.scenario;
    let streams = allocate_streams(
        group.len(),
        scenario.tx_antennas,
        scenario.rx_antennas,
        derive_seed(seed, &[stream::STREAMS]),
    )?;
    Ok(iterative_ia(realization, group, &streams, config, seed))
}

/// Writes `restart,iteration,weighted_leakage` rows.
pub fn write_leakage_trace<W: Write>(writer: W, traces: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["restart", "iteration", "weighted_leakage"])?;
    for (restart, trace) in traces.iter().enumerate() {
        for (it, leak) in trace.iter().enumerate() {
            w.write_record([restart.to_string(), (it + 1).to_string(), leak.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_error;
    use crate::model::{generate_channels, NetworkScenario};
    use std::collections::BTreeMap;

    #[test]
    fn dof_examples() {
        assert_eq!(dof(3, 4, 4), 6);
        assert_eq!(dof(3, 2, 2), 3);
        assert_eq!(dof(1, 2, 2), 2);
        assert_eq!(dof(6, 3, 4), 6);
        assert_eq!(dof(3, 4, 3), 5);
        assert_eq!(dof(2, 2, 2), 2);
        assert_eq!(dof(9, 10, 10), 18);
    }

    #[test]
    fn even_allocations() {
        assert_eq!(allocate_streams(3, 2, 2, 0).unwrap().0, vec![1, 1, 1]);
        assert_eq!(allocate_streams(6, 3, 4, 0).unwrap().0, vec![1; 6]);
    }

    #[test]
    fn uneven_allocation_is_uniform_over_recipients() {
        let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for seed in 0..3000 {
            let a = allocate_streams(3, 4, 3, seed).unwrap();
            assert_eq!(a.total(), 5);
            let mut sorted = a.0.clone();
            sorted.sort();
            assert_eq!(sorted, vec![1, 2, 2]);
            *counts.entry(a.0).or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        for &c in counts.values() {
            assert!((800..1200).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn infeasible_allocation_errors() {
        assert!(matches!(
            allocate_streams(4, 2, 2, 0),
            Err(Error::InfeasibleStreams { dof: 3, .. })
        ));
    }

    #[test]
    fn random_orthonormal_is_orthonormal() {
        for seed in 0..20 {
            let q = random_orthonormal(4, 2, seed);
            assert!(orthonormality_error(&q) < 1e-12);
            let u = random_orthonormal(4, 4, seed);
            assert!(orthonormality_error(&u) < 1e-12);
            assert!(orthonormality_error(&u.adjoint()) < 1e-12);
        }
    }

    #[test]
    fn random_projection_keeps_expected_energy() {
        // E‖Φ*HQ‖²_F = S²/(N_t N_r)·‖H‖²_F for independent isotropic Φ and Q.
        let mut rng = rng_from_seed(77);
        let h = crate::linalg::complex_gaussian(4, 4, &mut rng);
        let energy = crate::linalg::frobenius_sq(&h);
        for s in [1usize, 2] {
            let draws = 20_000;
            let mean = (0..draws)
                .map(|_| {
                    let phi = random_orthonormal_with(4, s, &mut rng);
                    let q = random_orthonormal_with(4, s, &mut rng);
                    crate::linalg::frobenius_sq(&(phi.adjoint() * &h * q))
                })
                .sum::<f64>()
                / draws as f64;
            let expected = (s * s) as f64 / 16.0 * energy;
            assert!((mean / expected - 1.0).abs() < 0.02, "S={s}: {mean} vs {expected}");
        }
        // With H = I and the same Q on both sides the projection is exactly one.
        let q = random_orthonormal(4, 1, 5);
        let v = q.adjoint() * ComplexMatrix::identity(4, 4) * &q;
        assert!((v[(0, 0)].norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_user_group_uses_eigenbeamforming() {
        let s = NetworkScenario::uniform(2, 3, 2, 100.0, 100.0).unwrap();
        let r = generate_channels(&s, 9);
        let out = iterative_ia(&r, &[1], &StreamAllocation(vec![2]), IaConfig::default(), 0);
        assert_eq!(out.relative_leakage, 0.0);
        let h = r.channel(1, 1);
        let f = out.precoders.precoder(1).unwrap();
        // The precoder spans the dominant right singular subspace: ‖HF‖² = ‖H‖².
        assert!((frobenius_sq(&(h * f)) - frobenius_sq(h)).abs() < 1e-10);
    }

    #[test]
    fn three_user_two_antenna_alignment_converges() {
        let s = NetworkScenario::uniform(3, 2, 2, 100.0, 100.0).unwrap();
        let r = generate_channels(&s, 1);
        let out = iterative_ia(&r, &[0, 1, 2], &StreamAllocation(vec![1, 1, 1]), IaConfig::default(), 5);
        assert!(out.aligned(), "leakage {}", out.relative_leakage);
        for trace in &out.traces {
            assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        }
        for (f, u) in out.precoders.precoders.iter().zip(&out.precoders.combiners) {
            assert!(orthonormality_error(f) < 1e-10);
            assert!(orthonormality_error(u) < 1e-10);
        }
    }

    #[test]
    fn overloaded_group_cannot_align() {
        let s = NetworkScenario::uniform(3, 2, 2, 100.0, 100.0).unwrap();
        let config = IaConfig::default();
        for seed in 0..20 {
            let r = generate_channels(&s, seed);
            let out = iterative_ia(&r, &[0, 1, 2], &StreamAllocation(vec![2, 2, 2]), config, seed);
            assert!(out.relative_leakage > 1e-2, "seed {seed}: {}", out.relative_leakage);
        }
    }

    #[test]
    fn relabeling_the_group_gives_the_same_design() {
        let s = NetworkScenario::uniform(4, 3, 3, 100.0, 100.0).unwrap();
        let r = generate_channels(&s, 3);
        let config = IaConfig {
            iterations: 30,
            restarts: 3,
        };
        let a = iterative_ia(&r, &[0, 2, 3], &StreamAllocation(vec![1, 2, 1]), config, 8);
        let b = iterative_ia(&r, &[3, 0, 2], &StreamAllocation(vec![1, 1, 2]), config, 8);
        for k in [0, 2, 3] {
            assert_eq!(a.precoders.precoder(k), b.precoders.precoder(k));
            assert_eq!(a.precoders.combiner(k), b.precoders.combiner(k));
        }
        assert_eq!(a.sum_rate, b.sum_rate);
    }

    #[test]
    fn trace_export_has_one_row_per_iteration() {
        let mut buf = Vec::new();
        write_leakage_trace(&mut buf, &[vec![0.5, 0.25], vec![0.1]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("restart,iteration,weighted_leakage\n0,1,0.5\n"));
    }
}
