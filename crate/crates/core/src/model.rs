//! Network scenarios, frame overhead accounting, and channel generation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, frobenius_sq, ComplexMatrix};
use crate::rng::{derived_rng, stream};

/// Overhead in symbols as a function of group size:
/// `L(K) = a(N_t, N_r) · (c0 + c1·K + c2·K²)` with
/// `a(N_t, N_r) = scale · N_t^tx_exponent · N_r^rx_exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverheadModel {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub scale: f64,
    pub tx_exponent: f64,
    pub rx_exponent: f64,
}

impl Default for OverheadModel {
    fn default() -> Self {
        Self::polynomial(0.0, 0.0, 0.0)
    }
}

impl OverheadModel {
    pub fn polynomial(c0: f64, c1: f64, c2: f64) -> Self {
        Self {
            c0,
            c1,
            c2,
            scale: 1.0,
            tx_exponent: 0.0,
            rx_exponent: 0.0,
        }
    }

    /// `L = K`, the default for time division.
    pub fn linear() -> Self {
        Self::polynomial(0.0, 1.0, 0.0)
    }

    /// `L = K²`, the default for interference alignment.
    pub fn quadratic() -> Self {
        Self::polynomial(0.0, 0.0, 1.0)
    }

    pub fn antenna_factor(&self, tx_antennas: usize, rx_antennas: usize) -> f64 {
        self.scale
            * (tx_antennas as f64).powf(self.tx_exponent)
            * (rx_antennas as f64).powf(self.rx_exponent)
    }

    pub fn symbols(&self, users: usize, tx_antennas: usize, rx_antennas: usize) -> f64 {
        let k = users as f64;
        self.antenna_factor(tx_antennas, rx_antennas) * (self.c0 + self.c1 * k + self.c2 * k * k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.c0, self.c1, self.c2, self.scale].iter().all(|v| v.is_finite() && *v >= 0.0)
            && self.tx_exponent.is_finite()
            && self.rx_exponent.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!(
                "overhead coefficients must be finite and nonnegative: {self:?}"
            )))
        }
    }
}

/// Fraction of a `coherence_time`-symbol frame spent on overhead, `min(L/T, 1)`.
pub fn overhead_fraction(
    model: &OverheadModel,
    users: usize,
    tx_antennas: usize,
    rx_antennas: usize,
    coherence_time: f64,
) -> f64 {
    assert!(coherence_time >= 1.0, "coherence time must be at least one symbol");
    (model.symbols(users, tx_antennas, rx_antennas) / coherence_time).min(1.0)
}

/// Transmission strategy used inside one orthogonal group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupStrategy {
    /// Interference alignment among the group members.
    Alignment,
    /// A lone user with eigenbeamforming (time division slot).
    SingleUser,
    /// Every member beamforms on its own link and treats interference as noise.
    InterferenceAsNoise,
}

impl GroupStrategy {
    pub fn for_size(size: usize) -> Self {
        if size <= 1 {
            GroupStrategy::SingleUser
        } else {
            GroupStrategy::Alignment
        }
    }
}

/// Planar coordinates in meters.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub transmitters: Vec<Point>,
    pub receivers: Vec<Point>,
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Log-distance path loss: `ρ = ρ₀·(d₀/d)^η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub exponent: f64,
    pub reference_snr: f64,
    pub reference_distance: f64,
}

impl Default for PathLoss {
    /// Exponent 3.76 with 0 dB SNR at 1 km.
    fn default() -> Self {
        Self {
            exponent: 3.76,
            reference_snr: 1.0,
            reference_distance: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub positions: Positions,
    pub path_loss: PathLoss,
}

/// Link SNR grid, indexed `(receiver k, transmitter ℓ)`.
pub fn link_snr_from_positions(positions: &Positions, path_loss: &PathLoss) -> Result<DMatrix<f64>> {
    let k = positions.receivers.len();
    if positions.transmitters.len() != k {
        return Err(Error::InvalidScenario(format!(
            "{} transmitters but {} receivers",
            positions.transmitters.len(),
            k
        )));
    }
    if !(path_loss.reference_distance > 0.0 && path_loss.reference_snr >= 0.0) {
        return Err(Error::InvalidScenario(
            "path loss needs a positive reference distance and nonnegative reference SNR".into(),
        ));
    }
    let mut snr = DMatrix::zeros(k, k);
    for rx in 0..k {
        for tx in 0..k {
            let d = distance(positions.receivers[rx], positions.transmitters[tx]);
            if d <= 0.0 {
                return Err(Error::CoincidentPositions { tx, rx });
            }
            snr[(rx, tx)] =
                path_loss.reference_snr * (path_loss.reference_distance / d).powf(path_loss.exponent);
        }
    }
    Ok(snr)
}

/// Static description of the K-user network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    pub users: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    /// Symbols per frame; `f64::INFINITY` models a static channel.
    pub coherence_time: f64,
    pub overhead_ia: OverheadModel,
    pub overhead_tdma: OverheadModel,
    /// `ρ_{k,ℓ}`, indexed `(receiver k, transmitter ℓ)`, linear scale.
    pub link_snr: DMatrix<f64>,
    /// `E_ℓ` per transmitter; `γ_{k,ℓ} = ρ_{k,ℓ}/E_ℓ`.
    pub transmit_power: Vec<f64>,
    pub noise_covariance: Vec<ComplexMatrix>,
    pub geometry: Option<Geometry>,
}

impl NetworkScenario {
    /// Equal SNR on every link, unit noise, `L_IA = K²` and `L_TDMA = K`.
    pub fn uniform(
        users: usize,
        tx_antennas: usize,
        rx_antennas: usize,
        coherence_time: f64,
        snr: f64,
    ) -> Result<Self> {
        Self::with_link_snr(
            tx_antennas,
            rx_antennas,
            coherence_time,
            DMatrix::from_element(users, users, snr),
        )
    }

    pub fn with_link_snr(
        tx_antennas: usize,
        rx_antennas: usize,
        coherence_time: f64,
        link_snr: DMatrix<f64>,
    ) -> Result<Self> {
        let users = link_snr.nrows();
        let scenario = Self {
            users,
            tx_antennas,
            rx_antennas,
            coherence_time,
            overhead_ia: OverheadModel::quadratic(),
            overhead_tdma: OverheadModel::linear(),
            link_snr,
            transmit_power: vec![1.0; users],
            noise_covariance: vec![ComplexMatrix::identity(rx_antennas, rx_antennas); users],
            geometry: None,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Link SNRs derived from node positions through `path_loss`.
    pub fn from_geometry(
        tx_antennas: usize,
        rx_antennas: usize,
        coherence_time: f64,
        geometry: Geometry,
    ) -> Result<Self> {
        let snr = link_snr_from_positions(&geometry.positions, &geometry.path_loss)?;
        let mut scenario = Self::with_link_snr(tx_antennas, rx_antennas, coherence_time, snr)?;
        scenario.geometry = Some(geometry);
        Ok(scenario)
    }

    pub fn with_coherence_time(&self, coherence_time: f64) -> Self {
        Self {
            coherence_time,
            ..self.clone()
        }
    }

    pub fn with_overheads(mut self, ia: OverheadModel, tdma: OverheadModel) -> Self {
        self.overhead_ia = ia;
        self.overhead_tdma = tdma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidScenario(msg));
        if self.users == 0 || self.tx_antennas == 0 || self.rx_antennas == 0 {
            return fail("user and antenna counts must be at least 1".into());
        }
        if !(self.coherence_time >= 1.0) {
            return fail(format!("coherence time {} is below one symbol", self.coherence_time));
        }
        if self.link_snr.shape() != (self.users, self.users) {
            return fail("link SNR grid must be K×K".into());
        }
        if self.link_snr.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return fail("link SNRs must be finite and nonnegative".into());
        }
        if self.transmit_power.len() != self.users || self.transmit_power.iter().any(|p| !(*p > 0.0)) {
            return fail("transmit powers must be positive, one per transmitter".into());
        }
        if self.noise_covariance.len() != self.users {
            return fail("one noise covariance per receiver is required".into());
        }
        for (k, r) in self.noise_covariance.iter().enumerate() {
            if r.shape() != (self.rx_antennas, self.rx_antennas) {
                return fail(format!("noise covariance {k} has the wrong shape"));
            }
            let asym = (r - r.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if asym > 1e-12 * r.iter().map(|z| z.norm()).fold(1.0, f64::max) || r.clone().cholesky().is_none() {
                return fail(format!("noise covariance {k} is not Hermitian positive definite"));
            }
        }
        if let Some(geometry) = &self.geometry {
            if geometry.positions.receivers.len() != self.users
                || geometry.positions.transmitters.len() != self.users
            {
                return fail("one transmitter and receiver position per user is required".into());
            }
        }
        self.overhead_ia.validate()?;
        self.overhead_tdma.validate()
    }

    pub fn snr(&self, rx: usize, tx: usize) -> f64 {
        self.link_snr[(rx, tx)]
    }

    /// `γ_{k,ℓ}`: link SNR normalized by the transmit power.
    pub fn gain(&self, rx: usize, tx: usize) -> f64 {
        self.link_snr[(rx, tx)] / self.transmit_power[tx]
    }

    pub fn overhead_model(&self, strategy: GroupStrategy) -> &OverheadModel {
        match strategy {
            GroupStrategy::Alignment => &self.overhead_ia,
            GroupStrategy::SingleUser | GroupStrategy::InterferenceAsNoise => &self.overhead_tdma,
        }
    }

    /// Overhead symbols for a group of `size` users using `strategy`.
    pub fn group_overhead(&self, size: usize, strategy: GroupStrategy) -> f64 {
        self.overhead_model(strategy)
            .symbols(size, self.tx_antennas, self.rx_antennas)
    }

    /// Overhead symbols for a group using the default strategy for its size.
    pub fn default_overhead(&self, size: usize) -> f64 {
        self.group_overhead(size, GroupStrategy::for_size(size))
    }

    /// `α` for running the whole network as one aligned group.
    pub fn full_network_overhead_fraction(&self) -> f64 {
        overhead_fraction(
            self.overhead_model(GroupStrategy::for_size(self.users)),
            self.users,
            self.tx_antennas,
            self.rx_antennas,
            self.coherence_time,
        )
    }

    pub fn positions(&self) -> Result<&Positions> {
        self.geometry
            .as_ref()
            .map(|g| &g.positions)
            .ok_or(Error::MissingPositions)
    }
}

/// Net data fraction of a slot: `max(0, share − L/T)`.
pub fn slot_prefactor(share: f64, overhead_symbols: f64, coherence_time: f64) -> f64 {
    (share - overhead_symbols / coherence_time).max(0.0)
}

/// One block-fading frame: `channels[k·K + ℓ]` is `H_{k,ℓ}` (`N_r × N_t`).
#[derive(Debug, Clone)]
pub struct ChannelRealization<'a> {
    pub scenario: &'a NetworkScenario,
    pub channels: Vec<ComplexMatrix>,
    pub seed: u64,
}

impl<'a> ChannelRealization<'a> {
    pub fn channel(&self, rx: usize, tx: usize) -> &ComplexMatrix {
        &self.channels[rx * self.scenario.users + tx]
    }

    /// `ρ_{k,k}‖H_{k,k}‖²_F`, the only per-user input the greedy partitioners use.
    pub fn signal_quality(&self, user: usize) -> f64 {
        self.scenario.snr(user, user) * frobenius_sq(self.channel(user, user))
    }

    pub fn signal_qualities(&self) -> Vec<f64> {
        (0..self.scenario.users).map(|k| self.signal_quality(k)).collect()
    }
}

/// Draws i.i.d. CN(0, 1) channels. Each link has its own derived stream, so the
/// result does not depend on generation order.
pub fn generate_channels(scenario: &NetworkScenario, seed: u64) -> ChannelRealization<'_> {
    let k = scenario.users;
    let mut channels = Vec::with_capacity(k * k);
    for rx in 0..k {
        for tx in 0..k {
            let mut rng = derived_rng(seed, &[stream::CHANNEL, rx as u64, tx as u64]);
            channels.push(complex_gaussian(scenario.rx_antennas, scenario.tx_antennas, &mut rng));
        }
    }
    ChannelRealization {
        scenario,
        channels,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overhead_fraction_examples() {
        let quad = OverheadModel::quadratic();
        let lin = OverheadModel::linear();
        assert_eq!(overhead_fraction(&quad, 3, 2, 2, 18.0), 0.5);
        assert_eq!(overhead_fraction(&lin, 3, 2, 2, 2.0), 1.0);
        assert!((overhead_fraction(&quad, 6, 2, 2, 100.0) - 0.36).abs() < 1e-15);
    }

    #[test]
    fn overhead_fraction_is_monotone() {
        let model = OverheadModel::polynomial(1.0, 0.5, 0.25);
        for t in [5.0, 20.0, 100.0] {
            let fr: Vec<f64> = (1..10).map(|k| overhead_fraction(&model, k, 2, 2, t)).collect();
            assert!(fr.windows(2).all(|w| w[0] <= w[1]));
        }
        for k in 1..6 {
            let fr: Vec<f64> = [2.0, 4.0, 8.0, 16.0, 64.0]
                .iter()
                .map(|&t| overhead_fraction(&model, k, 2, 2, t))
                .collect();
            assert!(fr.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn antenna_factor_scales_overhead() {
        let mut model = OverheadModel::linear();
        model.tx_exponent = 1.0;
        assert_eq!(model.symbols(3, 4, 2), 12.0);
    }

    #[test]
    fn channels_are_deterministic_per_seed() {
        let s = NetworkScenario::uniform(3, 2, 2, 100.0, 100.0).unwrap();
        let a = generate_channels(&s, 11);
        let b = generate_channels(&s, 11);
        let c = generate_channels(&s, 12);
        assert_eq!(a.channels, b.channels);
        assert_ne!(a.channels, c.channels);
        assert_eq!(a.channel(2, 1).shape(), (2, 2));
    }

    #[test]
    fn channel_entries_have_unit_variance() {
        let s = NetworkScenario::uniform(1, 10, 10, 100.0, 1.0).unwrap();
        let mut sum = 0.0;
        let mut n = 0usize;
        for seed in 0..1000 {
            let r = generate_channels(&s, seed);
            sum += frobenius_sq(r.channel(0, 0));
            n += 100;
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean |h|² = {mean}");
    }

    #[test]
    fn path_loss_examples() {
        let positions = |d: f64| Positions {
            transmitters: vec![[0.0, 0.0]],
            receivers: vec![[d, 0.0]],
        };
        let pl = |eta, rho| PathLoss {
            exponent: eta,
            reference_snr: rho,
            reference_distance: 10.0,
        };
        let at_ref = link_snr_from_positions(&positions(10.0), &pl(3.7, 42.0)).unwrap();
        assert!((at_ref[(0, 0)] - 42.0).abs() < 1e-12);
        let double = link_snr_from_positions(&positions(20.0), &pl(2.0, 100.0)).unwrap();
        assert!((double[(0, 0)] - 25.0).abs() < 1e-12);
        let far = link_snr_from_positions(&positions(100.0), &pl(3.5, 1e4)).unwrap();
        assert!((far[(0, 0)] - 1e4 * 10f64.powf(-3.5)).abs() < 1e-9);
        assert!((far[(0, 0)] - 3.162).abs() < 1e-3);
    }

    #[test]
    fn coincident_nodes_are_rejected() {
        let positions = Positions {
            transmitters: vec![[1.0, 1.0], [5.0, 5.0]],
            receivers: vec![[0.0, 0.0], [1.0, 1.0]],
        };
        let pl = PathLoss {
            exponent: 3.0,
            reference_snr: 1.0,
            reference_distance: 1.0,
        };
        assert!(matches!(
            link_snr_from_positions(&positions, &pl),
            Err(Error::CoincidentPositions { tx: 0, rx: 1 })
        ));
    }

    #[test]
    fn geometry_scenario_is_reproducible_from_positions() {
        let geometry = Geometry {
            positions: Positions {
                transmitters: vec![[0.0, 0.0], [100.0, 0.0]],
                receivers: vec![[10.0, 0.0], [100.0, 30.0]],
            },
            path_loss: PathLoss {
                exponent: 3.5,
                reference_snr: 1e6,
                reference_distance: 1.0,
            },
        };
        let s = NetworkScenario::from_geometry(2, 2, 50.0, geometry.clone()).unwrap();
        let again = link_snr_from_positions(&geometry.positions, &geometry.path_loss).unwrap();
        assert_eq!(s.link_snr, again);
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        assert!(NetworkScenario::uniform(0, 2, 2, 10.0, 1.0).is_err());
        assert!(NetworkScenario::uniform(2, 2, 2, 0.5, 1.0).is_err());
        assert!(NetworkScenario::uniform(2, 2, 2, 10.0, -1.0).is_err());
        let mut s = NetworkScenario::uniform(2, 2, 2, 10.0, 1.0).unwrap();
        s.noise_covariance[1] = ComplexMatrix::zeros(2, 2);
        assert!(s.validate().is_err());
    }
}
