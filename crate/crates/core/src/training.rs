//! Training-length optimization: grid search over `τ_p` on the
//! imperfect-CSI lower bound, one group at a time.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{slot_prefactor, NetworkScenario, OverheadModel};
use crate::partition::Partition;
use crate::precoding::StreamAllocation;
use crate::rate::{effective_snr, group_bound_samples, mean_and_stderr, TrainingDraws};

/// Fewest Monte Carlo trials accepted by [`optimize_training`].
pub const MIN_TRIALS: usize = 100;

/// Inclusive grid `start, start+step, …, ≤ stop`, in symbols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl TauGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start >= 0.0 && stop >= start && step > 0.0) || !stop.is_finite() {
            return Err(Error::InvalidArgument(format!("bad training grid {start}:{stop}:{step}")));
        }
        Ok(Self { start, stop, step })
    }

    /// Grid points no larger than `limit`.
    pub fn points(&self, limit: f64) -> Vec<f64> {
        let stop = self.stop.min(limit);
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let tau = self.start + f64::from(i) * self.step;
            if tau > stop + 1e-9 * self.step {
                return out;
            }
            out.push(tau);
            i += 1;
        }
    }
}

/// Default step of two symbols from one symbol up to the whole frame.
pub fn default_grid(scenario: &NetworkScenario) -> TauGrid {
    TauGrid {
        start: 1.0,
        stop: scenario.coherence_time,
        step: 2.0,
    }
}

/// Bound curve of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSweepResult {
    pub group: usize,
    pub members: Vec<usize>,
    pub grid: Vec<f64>,
    pub means: Vec<f64>,
    pub stderr: Vec<f64>,
    pub tau_star: f64,
    pub best_mean: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSweep {
    pub groups: Vec<TrainingSweepResult>,
}

impl TrainingSweep {
    pub fn tau_star(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.tau_star).collect()
    }

    /// Bound at the optimal training lengths.
    pub fn best_total(&self) -> f64 {
        self.groups.iter().map(|g| g.best_mean).sum()
    }

    /// Writes `group,tau,mean,stderr` rows, groups numbered from 1.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "tau", "mean", "stderr"])?;
        for g in &self.groups {
            for ((tau, mean), se) in g.grid.iter().zip(&g.means).zip(&g.stderr) {
                w.write_record([
                    (g.group + 1).to_string(),
                    tau.to_string(),
                    mean.to_string(),
                    se.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Maximizes the training bound over `grid` separately for every group.
///
/// Channel draws are generated once and shared by all grid points, so the
/// curve differences are not swamped by Monte Carlo noise. The grid is cut at
/// `μ_p T − L̂(K_p)` per group.
pub fn optimize_training(
    scenario: &NetworkScenario,
    partition: &Partition,
    streams: &[StreamAllocation],
    grid: TauGrid,
    residual_overhead: &OverheadModel,
    trials: usize,
    seed: u64,
) -> Result<TrainingSweep> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "training sweeps need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    partition.validate(scenario.users)?;
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
    let draws = TrainingDraws::generate(scenario.users, &per_user, trials, seed);

    let mut groups = Vec::with_capacity(partition.groups.len());
    for (p, group) in partition.groups.iter().enumerate() {
        let residual =
            residual_overhead.symbols(group.members.len(), scenario.tx_antennas, scenario.rx_antennas);
        let budget = group.share * scenario.coherence_time - residual;
        let points = grid.points(budget);
        if group.members.is_empty() || points.is_empty() {
            return Err(Error::EmptyTrainingGrid { group: p, budget });
        }
        let curve: Vec<(f64, f64)> = points
            .par_iter()
            .map(|&tau| {
                let rho: Vec<f64> = (0..group.members.len())
                    .map(|i| effective_snr(scenario, i, &group.members, &streams[p], tau))
                    .collect();
                let prefactor = slot_prefactor(group.share, tau + residual, scenario.coherence_time);
                let samples = group_bound_samples(&group.members, &streams[p], &rho, prefactor, &draws);
                mean_and_stderr(&samples)
            })
            .collect();
        let (means, stderr): (Vec<f64>, Vec<f64>) = curve.into_iter().unzip();
        let best = (0..means.len())
            .fold(0, |b, i| if means[i] > means[b] { i } else { b });
        groups.push(TrainingSweepResult {
            group: p,
            members: group.members.clone(),
            tau_star: points[best],
            best_mean: means[best],
            grid: points,
            means,
            stderr,
            trials,
            seed,
        });
    }
    Ok(TrainingSweep { groups })
}
