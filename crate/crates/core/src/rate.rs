//! Sum-rate evaluation: perfect CSI, partitioned frames, and the
//! imperfect-CSI lower bounds driven by training length.
//!
//! Transmit power is split evenly over a user's streams (`ρ/S` per stream).
//! All logarithms are base 2.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, hermitian_eigen, log2_det_hpd, ComplexMatrix};
use crate::model::{slot_prefactor, ChannelRealization, NetworkScenario, OverheadModel};
use crate::partition::Partition;
use crate::precoding::{relative_leakage, PrecoderSet, StreamAllocation};
use crate::rng::{derived_rng, stream};

/// Monte Carlo trials used when a caller does not specify a count.
pub const DEFAULT_TRIALS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserRate {
    pub user: usize,
    /// Net rate after the group's overhead prefactor.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupRate {
    pub members: Vec<usize>,
    /// `α_p = L(K_p)/T`, clamped to 1.
    pub overhead_fraction: f64,
    /// `ᾱ_p = max(0, μ_p − L(K_p)/T)`.
    pub prefactor: f64,
    /// Group sum rate with the whole frame available.
    pub gross_rate: f64,
    pub net_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateReport {
    pub users: Vec<UserRate>,
    pub groups: Vec<GroupRate>,
    pub total: f64,
    pub leakage: Option<f64>,
    pub effective_snr: Vec<f64>,
    pub warnings: Vec<String>,
}

impl RateReport {
    fn push_group(&mut self, group: GroupRate, user_rates: &[(usize, f64)]) {
        for &(user, gross) in user_rates {
            self.users.push(UserRate {
                user,
                rate: group.prefactor * gross,
            });
        }
        self.total += group.net_rate;
        self.groups.push(group);
    }

    pub fn csv_header() -> [&'static str; 7] {
        ["scenario_id", "seed", "P", "group_sizes", "tau", "group_rates", "total"]
    }

    /// One CSV row. Multi-valued fields are `;`-separated in group order.
    pub fn csv_record(&self, scenario_id: &str, seed: u64, taus: &[f64]) -> Vec<String> {
        let join = |items: Vec<String>| items.join(";");
        vec![
            scenario_id.to_string(),
            seed.to_string(),
            self.groups.len().to_string(),
            join(self.groups.iter().map(|g| g.members.len().to_string()).collect()),
            join(taus.iter().map(|t| t.to_string()).collect()),
            join(self.groups.iter().map(|g| g.net_rate.to_string()).collect()),
            self.total.to_string(),
        ]
    }

    pub fn write_csv<W: Write>(&self, writer: W, scenario_id: &str, seed: u64, taus: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::csv_header())?;
        w.write_record(self.csv_record(scenario_id, seed, taus))?;
        w.flush()?;
        Ok(())
    }
}

/// Per-user rates `log2|I + (R_k + Σ_{ℓ≠k} ρ_{k,ℓ}/S_ℓ H F F* H*)⁻¹ ρ_{k,k}/S_k H F F* H*|`
/// with only the members of `set` transmitting. Computed as a difference of
/// two Hermitian positive definite log-determinants.
pub fn user_rates(realization: &ChannelRealization<'_>, set: &PrecoderSet) -> Vec<(usize, f64)> {
    let scenario = realization.scenario;
    let covariances: Vec<Vec<ComplexMatrix>> = set
        .users
        .iter()
        .map(|&k| {
            set.users
                .iter()
                .zip(&set.precoders)
                .zip(&set.streams)
                .map(|((&l, f), &s)| {
                    let hf = realization.channel(k, l) * f;
                    (&hf * hf.adjoint()).scale(scenario.snr(k, l) / s as f64)
                })
                .collect()
        })
        .collect();
    set.users
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut interference = scenario.noise_covariance[k].clone();
            for (j, c) in covariances[i].iter().enumerate() {
                if j != i {
                    interference += c;
                }
            }
            let with_signal = &interference + &covariances[i][i];
            (k, (log2_det_hpd(&with_signal) - log2_det_hpd(&interference)).max(0.0))
        })
        .collect()
}

/// Perfect-CSI sum rate of one group transmitting with data fraction `alpha_bar`.
pub fn sum_rate_perfect(realization: &ChannelRealization<'_>, set: &PrecoderSet, alpha_bar: f64) -> RateReport {
    assert!((0.0..=1.0).contains(&alpha_bar), "alpha_bar must lie in [0, 1]");
    let rates = user_rates(realization, set);
    let gross: f64 = rates.iter().map(|(_, r)| r).sum();
    let mut report = RateReport {
        leakage: (set.len() > 1).then(|| relative_leakage(realization, set)),
        ..RateReport::default()
    };
    report.push_group(
        GroupRate {
            members: set.users.clone(),
            overhead_fraction: 1.0 - alpha_bar,
            prefactor: alpha_bar,
            gross_rate: gross,
            net_rate: alpha_bar * gross,
        },
        &rates,
    );
    report
}

/// Sum rate of an orthogonally partitioned frame. `precoders[p]` serves
/// `partition.groups[p]`; each group's prefactor is `max(0, μ_p − L(K_p)/T)`.
pub fn partitioned_sum_rate(
    realization: &ChannelRealization<'_>,
    partition: &Partition,
    precoders: &[PrecoderSet],
) -> Result<RateReport> {
    let scenario = realization.scenario;
    partition.validate(scenario.users)?;
    if precoders.len() != partition.groups.len() {
        return Err(Error::InvalidArgument(format!(
            "{} precoder sets for {} groups",
            precoders.len(),
            partition.groups.len()
        )));
    }
    let mut report = RateReport::default();
    let mut leakage = 0.0;
    for (p, (group, set)) in partition.groups.iter().zip(precoders).enumerate() {
        if group.members.is_empty() {
            report.warnings.push(format!("group {p} is empty and contributes no rate"));
            continue;
        }
        let mut a = group.members.clone();
        let mut b = set.users.clone();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::InvalidArgument(format!(
                "precoder set {p} does not cover exactly group {p}"
            )));
        }
        let overhead = scenario.group_overhead(group.members.len(), group.strategy);
        let rates = user_rates(realization, set);
        let gross: f64 = rates.iter().map(|(_, r)| r).sum();
        let prefactor = slot_prefactor(group.share, overhead, scenario.coherence_time);
        if set.len() > 1 {
            leakage += relative_leakage(realization, set);
        }
        report.push_group(
            GroupRate {
                members: group.members.clone(),
                overhead_fraction: (overhead / scenario.coherence_time).min(1.0),
                prefactor,
                gross_rate: gross,
                net_rate: prefactor * gross,
            },
            &rates,
        );
    }
    report.leakage = Some(leakage);
    Ok(report)
}

/// `(σ²_H̃, σ²_Ẽ)` after `tau` symbols of orthogonal training at SNR `snr`
/// for a transmitter with `streams` streams. The two always sum to one.
pub fn error_variances(streams: usize, snr: f64, tau: f64) -> (f64, f64) {
    assert!(tau >= 0.0, "training length must be nonnegative");
    if tau == 0.0 || snr == 0.0 {
        return (0.0, 1.0);
    }
    let err = if tau.is_infinite() {
        0.0
    } else {
        streams as f64 / (streams as f64 + snr * tau)
    };
    (1.0 - err, err)
}

/// Post-estimation effective SNR `ρ_eff,k,p` of `group[index]` with training
/// length `tau`. The residual-interference sum runs over every group member,
/// the user itself included.
pub fn effective_snr(
    scenario: &NetworkScenario,
    index: usize,
    group: &[usize],
    streams: &StreamAllocation,
    tau: f64,
) -> f64 {
    assert!(tau >= 0.0, "training length must be nonnegative");
    if tau == 0.0 {
        return 0.0;
    }
    let k = group[index];
    let rho = scenario.snr(k, k);
    let own = streams.get(index) as f64;
    if tau.is_infinite() {
        return rho;
    }
    let lead = own + rho * tau;
    let residual: f64 = group
        .iter()
        .zip(&streams.0)
        .map(|(&l, &s)| {
            let cross = scenario.snr(k, l);
            if cross == 0.0 {
                0.0
            } else {
                lead / (s as f64 + cross * tau) * cross * s as f64
            }
        })
        .sum();
    rho * rho * tau / (lead + residual)
}

/// The same effective SNR assembled from the training error variances:
/// `ρ_{k,k}σ²_H̃ / (1 + Σ_ℓ ρ_{k,ℓ}σ²_Ẽ_{k,ℓ})`.
pub fn effective_snr_from_variances(
    scenario: &NetworkScenario,
    index: usize,
    group: &[usize],
    streams: &StreamAllocation,
    tau: f64,
) -> f64 {
    let k = group[index];
    let rho = scenario.snr(k, k);
    let (known, _) = error_variances(streams.get(index), rho, tau);
    let noise: f64 = 1.0
        + group
            .iter()
            .zip(&streams.0)
            .map(|(&l, &s)| {
                let cross = scenario.snr(k, l);
                cross * error_variances(s, cross, tau).1
            })
            .sum::<f64>();
    rho * known / noise
}

/// Inputs of the training-length bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingParams {
    /// `τ_p` per group, in symbols.
    pub tau: Vec<f64>,
    /// `L̂(K_p)`: overhead other than training.
    pub residual_overhead: OverheadModel,
}

impl TrainingParams {
    pub fn training_only(tau: Vec<f64>) -> Self {
        Self {
            tau,
            residual_overhead: OverheadModel::default(),
        }
    }
}

/// Eigenvalues of `H̄H̄*` for every trial and user. `H̄_{k,k}` is `S_k × S_k`
/// with i.i.d. CN(0, 1) entries. Draws depend only on `(seed, trial, user)`,
/// so bounds evaluated at different `τ` share their random numbers.
#[derive(Debug, Clone)]
pub struct TrainingDraws {
    pub trials: usize,
    pub seed: u64,
    /// `eigenvalues[trial][user]`.
    pub eigenvalues: Vec<Vec<Vec<f64>>>,
}

impl TrainingDraws {
    pub fn generate(users: usize, streams: &[usize], trials: usize, seed: u64) -> Self {
        assert_eq!(streams.len(), users);
        let eigenvalues = (0..trials)
            .into_par_iter()
            .map(|t| {
                (0..users)
                    .map(|k| {
                        let mut rng = derived_rng(seed, &[stream::TRAINING, t as u64, k as u64]);
                        let h = complex_gaussian(streams[k], streams[k], &mut rng);
                        hermitian_eigen(&(&h * h.adjoint()))
                            .values
                            .into_iter()
                            .map(|v| v.max(0.0))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            trials,
            seed,
            eigenvalues,
        }
    }
}

/// Monte Carlo mean and standard error of a lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Mean contribution of each group.
    pub group_means: Vec<f64>,
    /// `ρ_eff` per user, indexed by user id.
    pub effective_snr: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

pub(crate) fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-user effective SNRs of a partition at training lengths `tau`.
pub fn partition_effective_snrs(
    scenario: &NetworkScenario,
    partition: &Partition,
    streams: &[StreamAllocation],
    tau: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; scenario.users];
    for (p, group) in partition.groups.iter().enumerate() {
        for (i, &k) in group.members.iter().enumerate() {
            out[k] = effective_snr(scenario, i, &group.members, &streams[p], tau[p]);
        }
    }
    out
}

/// Slot prefactor `max(0, (μ_p T − τ_p − L̂(K_p))/T)` of each group.
pub fn training_prefactors(scenario: &NetworkScenario, partition: &Partition, params: &TrainingParams) -> Vec<f64> {
    partition
        .groups
        .iter()
        .zip(&params.tau)
        .map(|(g, &tau)| {
            let residual =
                params
                    .residual_overhead
                    .symbols(g.members.len(), scenario.tx_antennas, scenario.rx_antennas);
            slot_prefactor(g.share, tau + residual, scenario.coherence_time)
        })
        .collect()
}

/// Per-trial contribution `ᾱ_p Σ_{k∈p} Σ_i log2(1 + ρ_eff,k λ_i/S_k)` of one
/// group, where `λ_i` are the eigenvalues of `H̄_{k,k}H̄_{k,k}*` in `draws`.
pub fn group_bound_samples(
    members: &[usize],
    streams: &StreamAllocation,
    rho_eff: &[f64],
    prefactor: f64,
    draws: &TrainingDraws,
) -> Vec<f64> {
    draws
        .eigenvalues
        .iter()
        .map(|trial| {
            let mut g = 0.0;
            for (i, &k) in members.iter().enumerate() {
                let s = streams.get(i) as f64;
                g += trial[k].iter().map(|&l| (1.0 + rho_eff[i] * l / s).log2()).sum::<f64>();
            }
            prefactor * g
        })
        .collect()
}

/// Evaluates the partitioned training bound on precomputed draws.
pub fn training_bound_on_draws(
    scenario: &NetworkScenario,
    partition: &Partition,
    streams: &[StreamAllocation],
    params: &TrainingParams,
    draws: &TrainingDraws,
) -> BoundEstimate {
    let rho_eff = partition_effective_snrs(scenario, partition, streams, &params.tau);
    let prefactors = training_prefactors(scenario, partition, params);
    let mut samples = vec![0.0; draws.trials];
    let mut group_means = Vec::with_capacity(partition.groups.len());
    for (p, group) in partition.groups.iter().enumerate() {
        let own: Vec<f64> = group.members.iter().map(|&k| rho_eff[k]).collect();
        let g = group_bound_samples(&group.members, &streams[p], &own, prefactors[p], draws);
        group_means.push(g.iter().sum::<f64>() / draws.trials.max(1) as f64);
        for (total, v) in samples.iter_mut().zip(g) {
            *total += v;
        }
    }
    let (mean, stderr) = mean_and_stderr(&samples);
    BoundEstimate {
        mean,
        stderr,
        group_means,
        effective_snr: rho_eff,
        trials: draws.trials,
        seed: draws.seed,
    }
}

fn stream_vector(scenario: &NetworkScenario, partition: &Partition, streams: &[StreamAllocation]) -> Result<Vec<usize>> {
    if streams.len() != partition.groups.len() {
        return Err(Error::InvalidArgument("one stream allocation per group is required".into()));
    }
    let mut per_user = vec![0; scenario.users];
    for (group, alloc) in partition.groups.iter().zip(streams) {
        if alloc.len() != group.members.len() {
            return Err(Error::InvalidArgument("stream allocation does not match its group".into()));
        }
        for (&k, &s) in group.members.iter().zip(&alloc.0) {
            per_user[k] = s;
        }
    }
    Ok(per_user)
}

/// Lower bound on the partitioned sum rate with `params.tau[p]` training
/// symbols per group, averaged over `trials` normalized channel draws.
pub fn sum_rate_training_bound(
    scenario: &NetworkScenario,
    partition: &Partition,
    streams: &[StreamAllocation],
    params: &TrainingParams,
    trials: usize,
    seed: u64,
) -> Result<BoundEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    partition.validate(scenario.users)?;
    if params.tau.len() != partition.groups.len() || params.tau.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument("one nonnegative training length per group is required".into()));
    }
    let per_user = stream_vector(scenario, partition, streams)?;
    let draws = TrainingDraws::generate(scenario.users, &per_user, trials, seed);
    Ok(training_bound_on_draws(scenario, partition, streams, params, &draws))
}

/// Unpartitioned training bound built from the error-variance form of the
/// effective SNR, with prefactor `max(0, (T − τ − L̂(K))/T)`.
pub fn sum_rate_training_bound_single_group(
    scenario: &NetworkScenario,
    streams: &StreamAllocation,
    tau: f64,
    residual_overhead: &OverheadModel,
    draws: &TrainingDraws,
) -> f64 {
    let group: Vec<usize> = (0..scenario.users).collect();
    let residual = residual_overhead.symbols(scenario.users, scenario.tx_antennas, scenario.rx_antennas);
    let prefactor = ((scenario.coherence_time - tau - residual) / scenario.coherence_time).max(0.0);
    let rho_eff: Vec<f64> = (0..scenario.users)
        .map(|i| effective_snr_from_variances(scenario, i, &group, streams, tau))
        .collect();
    let total: f64 = draws
        .eigenvalues
        .iter()
        .map(|trial| {
            let mut sum = 0.0;
            for k in 0..scenario.users {
                let s = streams.get(k) as f64;
                sum += trial[k].iter().map(|&l| (1.0 + rho_eff[k] * l / s).log2()).sum::<f64>();
            }
            prefactor * sum
        })
        .sum();
    total / draws.trials as f64
}

/// Equal-estimation-error lower bound for one group: every link's estimate
/// has per-entry error variance `sigma_e2`, and `U_k* H_{k,k} F_k` stands in
/// for the estimated effective channel.
pub fn sum_rate_equal_error_bound(
    realization: &ChannelRealization<'_>,
    set: &PrecoderSet,
    sigma_e2: f64,
    alpha_bar: f64,
) -> f64 {
    assert!((0.0..=1.0).contains(&sigma_e2), "error variance must lie in [0, 1]");
    let scenario = realization.scenario;
    let mut total = 0.0;
    for (i, &k) in set.users.iter().enumerate() {
        let s = set.streams[i];
        let g_own = scenario.gain(k, k);
        let interference: f64 = set
            .users
            .iter()
            .filter(|&&l| l != k)
            .map(|&l| sigma_e2 * scenario.gain(k, l))
            .sum();
        let eff = set.combiners[i].adjoint() * realization.channel(k, k) * &set.precoders[i];
        let signal = (&eff * eff.adjoint()).scale(scenario.snr(k, k) / s as f64);
        let floor = 1.0 + sigma_e2 * g_own + interference;
        let m = ComplexMatrix::from_diagonal(&DVector::from_element(s, floor.into())) + signal;
        let scale = 1.0 / (sigma_e2 * s as f64 * g_own + 1.0);
        total += log2_det_hpd(&m) + s as f64 * scale.log2();
    }
    alpha_bar * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_channels, GroupStrategy};
    use crate::partition::{Group, Partition};
    use crate::precoding::{iterative_ia, IaConfig};
    use num_complex::Complex64;

    fn identity_link() -> NetworkScenario {
        NetworkScenario::uniform(1, 2, 2, 100.0, 1.0).unwrap()
    }

    #[test]
    fn scalar_log_det_example() {
        let s = identity_link();
        let mut r = generate_channels(&s, 0);
        r.channels[0] = ComplexMatrix::identity(2, 2);
        let mut f = ComplexMatrix::zeros(2, 1);
        f[(0, 0)] = Complex64::new(1.0, 0.0);
        let set = PrecoderSet {
            users: vec![0],
            streams: vec![1],
            precoders: vec![f.clone()],
            combiners: vec![f],
        };
        assert!((sum_rate_perfect(&r, &set, 1.0).total - 1.0).abs() < 1e-12);
        assert_eq!(sum_rate_perfect(&r, &set, 0.0).total, 0.0);
    }

    #[test]
    fn nulled_interference_gives_single_user_rates() {
        // H_{k,ℓ} maps transmitter ℓ's precoder into the null space of receiver k.
        let s = NetworkScenario::uniform(2, 2, 2, 100.0, 50.0).unwrap();
        let mut r = generate_channels(&s, 4);
        let e = |i: usize| {
            let mut v = ComplexMatrix::zeros(2, 1);
            v[(i, 0)] = Complex64::new(1.0, 0.0);
            v
        };
        let mut h = |rx: usize, tx: usize, m: ComplexMatrix| r.channels[rx * 2 + tx] = m;
        let diag = |a: f64, b: f64| {
            ComplexMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(a, 0.0), Complex64::new(b, 0.0)]))
        };
        h(0, 0, diag(1.3, 0.2));
        h(1, 1, diag(0.4, 0.9));
        h(0, 1, diag(0.0, 2.0)); // F_1 = e₀ lands in the zero column
        h(1, 0, diag(0.0, 1.5)); // F_0 = e₀ as well
        let set = PrecoderSet {
            users: vec![0, 1],
            streams: vec![1, 1],
            precoders: vec![e(0), e(0)],
            combiners: vec![e(0), e(0)],
        };
        let rates = user_rates(&r, &set);
        let single = |g: f64| (1.0 + 50.0 * g * g).log2();
        assert!((rates[0].1 - single(1.3)).abs() < 1e-12);
        assert!((rates[1].1 - single(0.4)).abs() < 1e-12);
    }

    #[test]
    fn error_variance_examples() {
        let (h, e) = error_variances(1, 10.0, 10.0);
        assert!((h - 100.0 / 101.0).abs() < 1e-15 && (e - 1.0 / 101.0).abs() < 1e-15);
        assert_eq!(error_variances(2, 1.0, 2.0), (0.5, 0.5));
        assert_eq!(error_variances(3, 5.0, 0.0), (0.0, 1.0));
        assert_eq!(error_variances(3, 5.0, f64::INFINITY), (1.0, 0.0));
        let (h, e) = error_variances(2, 3.0, 1e12);
        assert!(h > 1.0 - 1e-11 && e < 1e-11);
    }

    #[test]
    fn effective_snr_limits() {
        let s = NetworkScenario::uniform(1, 1, 1, 100.0, 7.0).unwrap();
        let one = StreamAllocation(vec![1]);
        let direct = effective_snr(&s, 0, &[0], &one, 3.0);
        assert!((direct - 49.0 * 3.0 / (1.0 + 21.0 + 7.0)).abs() < 1e-12);
        assert_eq!(effective_snr(&s, 0, &[0], &one, 0.0), 0.0);

        let s = NetworkScenario::uniform(3, 2, 2, 100.0, 1e6).unwrap();
        let streams = StreamAllocation(vec![1, 2, 1]);
        let tau = 10.0;
        let hi = effective_snr(&s, 1, &[0, 1, 2], &streams, tau);
        let approx = 1e6 * tau / (tau + 4.0);
        assert!((hi / approx - 1.0).abs() < 0.01);

        let mut grid = nalgebra::DMatrix::from_element(3, 3, 20.0);
        grid[(0, 0)] = 80.0;
        grid[(0, 2)] = 5.0;
        let s = NetworkScenario::with_link_snr(2, 2, 100.0, grid).unwrap();
        let long = effective_snr(&s, 0, &[0, 1, 2], &streams, 1e9);
        assert!((long / 80.0 - 1.0).abs() < 1e-6, "{long}");
    }

    #[test]
    fn variance_form_matches_direct_form() {
        let mut grid = nalgebra::DMatrix::from_element(3, 3, 3.0);
        grid[(1, 1)] = 40.0;
        grid[(1, 0)] = 0.5;
        let s = NetworkScenario::with_link_snr(3, 3, 100.0, grid).unwrap();
        let streams = StreamAllocation(vec![2, 1, 2]);
        for tau in [0.5, 3.0, 17.0, 250.0] {
            for i in 0..3 {
                let a = effective_snr(&s, i, &[0, 1, 2], &streams, tau);
                let b = effective_snr_from_variances(&s, i, &[0, 1, 2], &streams, tau);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn no_training_gives_zero_bound() {
        let s = NetworkScenario::uniform(2, 2, 2, 100.0, 100.0).unwrap();
        let partition = Partition::single_group(2);
        let streams = vec![StreamAllocation(vec![1, 1])];
        let b = sum_rate_training_bound(&s, &partition, &streams, &TrainingParams::training_only(vec![0.0]), 50, 1)
            .unwrap();
        assert_eq!(b.mean, 0.0);
    }

    #[test]
    fn exhausted_slot_clamps_to_zero() {
        let s = NetworkScenario::uniform(2, 2, 2, 20.0, 100.0).unwrap();
        let partition = Partition::singletons(2);
        let streams = vec![StreamAllocation(vec![2]), StreamAllocation(vec![2])];
        let params = TrainingParams::training_only(vec![12.0, 2.0]);
        let b = sum_rate_training_bound(&s, &partition, &streams, &params, 50, 1).unwrap();
        assert_eq!(b.group_means[0], 0.0);
        assert!(b.group_means[1] > 0.0);
    }

    #[test]
    fn bound_is_deterministic_given_seed() {
        let s = NetworkScenario::uniform(3, 2, 2, 100.0, 100.0).unwrap();
        let partition = Partition::single_group(3);
        let streams = vec![StreamAllocation(vec![1, 1, 1])];
        let params = TrainingParams::training_only(vec![8.0]);
        let a = sum_rate_training_bound(&s, &partition, &streams, &params, 200, 42).unwrap();
        let b = sum_rate_training_bound(&s, &partition, &streams, &params, 200, 42).unwrap();
        let c = sum_rate_training_bound(&s, &partition, &streams, &params, 200, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn unequal_shares_use_their_own_slot() {
        let s = NetworkScenario::uniform(2, 2, 2, 40.0, 100.0).unwrap();
        let r = generate_channels(&s, 2);
        let partition = Partition::new(
            2,
            vec![
                Group::new(vec![0], 0.75, GroupStrategy::SingleUser),
                Group::new(vec![1], 0.25, GroupStrategy::SingleUser),
            ],
        )
        .unwrap();
        let sets: Vec<_> = (0..2).map(|k| crate::precoding::eigenbeamforming(&r, k, 2)).collect();
        let report = partitioned_sum_rate(&r, &partition, &sets).unwrap();
        assert!((report.groups[0].prefactor - (0.75 - 1.0 / 40.0)).abs() < 1e-15);
        assert!((report.groups[1].prefactor - (0.25 - 1.0 / 40.0)).abs() < 1e-15);
    }

    #[test]
    fn equal_error_bound_limits_and_monotonicity() {
        let s = NetworkScenario::uniform(3, 2, 2, 100.0, 100.0).unwrap();
        for seed in 0..100 {
            let r = generate_channels(&s, seed);
            let out = iterative_ia(&r, &[0, 1, 2], &StreamAllocation(vec![1, 1, 1]), IaConfig { iterations: 40, restarts: 1 }, seed);
            let set = &out.precoders;

            let zero = sum_rate_equal_error_bound(&r, set, 0.0, 1.0);
            let mut expected = 0.0;
            for (i, &k) in set.users.iter().enumerate() {
                let eff = set.combiners[i].adjoint() * r.channel(k, k) * &set.precoders[i];
                let m = ComplexMatrix::identity(1, 1) + (&eff * eff.adjoint()).scale(100.0);
                expected += log2_det_hpd(&m);
            }
            assert!((zero - expected).abs() < 1e-10);

            let sweep: Vec<f64> = (0..=10)
                .map(|i| sum_rate_equal_error_bound(&r, set, i as f64 / 10.0, 1.0))
                .collect();
            assert!(sweep.windows(2).all(|w| w[1] <= w[0] + 1e-12), "seed {seed}: {sweep:?}");
            // With no channel knowledge each user is capped by log2(K + ‖U*HF‖²)
            // whatever the SNR.
            let ceiling: f64 = set
                .users
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    let eff = set.combiners[i].adjoint() * r.channel(k, k) * &set.precoders[i];
                    (3.0 + crate::linalg::frobenius_sq(&eff)).log2()
                })
                .sum();
            assert!(sweep[10] <= ceiling + 1e-9 && sweep[10] < sweep[0]);
        }
    }

    #[test]
    fn single_user_bound_approaches_perfect_rate() {
        let snr = 10.0;
        let t = 1e9;
        let tau = 1e6;
        let s = NetworkScenario::uniform(1, 2, 2, t, snr).unwrap();
        let trials = 10_000;
        let partition = Partition::single_group(1);
        let streams = vec![StreamAllocation(vec![2])];
        let bound = sum_rate_training_bound(
            &s,
            &partition,
            &streams,
            &TrainingParams::training_only(vec![tau]),
            trials,
            3,
        )
        .unwrap();
        // Oracle: full-rank eigenbeamforming on independent channel draws.
        let perfect = (0..trials as u64)
            .map(|seed| {
                let r = generate_channels(&s, seed);
                let set = crate::precoding::eigenbeamforming(&r, 0, 2);
                sum_rate_perfect(&r, &set, 1.0).total
            })
            .sum::<f64>()
            / trials as f64;
        let scaled = perfect * (t - tau) / t;
        assert!(bound.mean <= scaled * 1.01);
        assert!((bound.mean / scaled - 1.0).abs() < 0.01, "{} vs {scaled}", bound.mean);
    }

    #[test]
    fn single_group_bound_equals_partitioned_form() {
        let mut grid = nalgebra::DMatrix::from_element(4, 4, 8.0);
        for k in 0..4 {
            grid[(k, k)] = 60.0 + 10.0 * k as f64;
        }
        let s = NetworkScenario::with_link_snr(3, 3, 150.0, grid).unwrap();
        let streams = StreamAllocation(vec![2, 1, 2, 1]);
        let draws = TrainingDraws::generate(4, &streams.0, 300, 8);
        let residual = OverheadModel::polynomial(2.0, 0.0, 0.5);
        let partition = Partition::single_group(4);
        for tau in [1.0, 6.0, 20.0, 90.0] {
            let params = TrainingParams {
                tau: vec![tau],
                residual_overhead: residual,
            };
            let a = training_bound_on_draws(&s, &partition, std::slice::from_ref(&streams), &params, &draws).mean;
            let b = sum_rate_training_bound_single_group(&s, &streams, tau, &residual, &draws);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "tau {tau}: {a} vs {b}");
        }
    }

    #[test]
    fn bound_stays_below_perfect_rate_with_same_prefactor() {
        let s = NetworkScenario::uniform(1, 3, 3, 200.0, 30.0).unwrap();
        let partition = Partition::single_group(1);
        let streams = vec![StreamAllocation(vec![3])];
        let draws = TrainingDraws::generate(1, &[3], 2000, 5);
        // Perfect knowledge of the same draws with the whole frame available.
        let reference = draws
            .eigenvalues
            .iter()
            .map(|t| t[0].iter().map(|&l| (1.0 + 30.0 * l / 3.0).log2()).sum::<f64>())
            .sum::<f64>()
            / 2000.0;
        for tau in [1.0, 5.0, 20.0, 80.0] {
            let b = training_bound_on_draws(&s, &partition, &streams, &TrainingParams::training_only(vec![tau]), &draws);
            assert!(b.mean <= reference * (200.0 - tau) / 200.0 + 1e-12);
        }
    }

    #[test]
    fn csv_record_layout() {
        let report = RateReport {
            groups: vec![
                GroupRate {
                    members: vec![0, 2],
                    overhead_fraction: 0.1,
                    prefactor: 0.4,
                    gross_rate: 10.0,
                    net_rate: 4.0,
                },
                GroupRate {
                    members: vec![1],
                    overhead_fraction: 0.05,
                    prefactor: 0.45,
                    gross_rate: 4.0,
                    net_rate: 1.8,
                },
            ],
            total: 5.8,
            ..RateReport::default()
        };
        let rec = report.csv_record("demo", 7, &[4.0, 2.0]);
        assert_eq!(rec, vec!["demo", "7", "2", "2;1", "4;2", "4;1.8", "5.8"]);
    }
}
