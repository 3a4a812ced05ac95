//! TOML experiment files.
//!
//! ```toml
//! [scenario]
//! id = "k3-2x2"
//! users = 3
//! tx_antennas = 2
//! rx_antennas = 2
//! snr_db = 20.0
//!
//! [scenario.overhead_ia]
//! c2 = 1.0
//!
//! [experiment]
//! trials = 500
//! seed = 1
//! grid = "0:1:0.05"
//! ```

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Geometry, NetworkScenario, OverheadModel, PathLoss, Point, Positions};
use crate::precoding::IaConfig;
use crate::rng::{derived_rng, stream};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Inclusive `start:stop:step` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step > 0.0 && stop >= start) {
            return Err(Error::Config(format!("bad grid {start}:{stop}:{step}")));
        }
        Ok(Self { start, stop, step })
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        // Rounded so decimal steps print as written (0.15, not 0.15000000000000002).
        (0..=n)
            .map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }
}

impl std::str::FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(Error::Config(format!("grid {s:?} is not start:stop:step")));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("grid {s:?} has a non-numeric field {v:?}")))
        };
        Self::new(num(a)?, num(b)?, num(c)?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossConfig {
    pub exponent: f64,
    pub reference_snr_db: f64,
    pub reference_distance: f64,
}

impl Default for PathLossConfig {
    /// 50 dB at the 758 m cell edge, exponent 3.76. Strong enough that
    /// cross-cell interference dominates noise; near 10 dB, ignoring
    /// interference beats alignment at every frame length.
    fn default() -> Self {
        Self {
            exponent: 3.76,
            reference_snr_db: 50.0,
            reference_distance: 758.0,
        }
    }
}

impl From<&PathLossConfig> for PathLoss {
    fn from(c: &PathLossConfig) -> Self {
        PathLoss {
            exponent: c.exponent,
            reference_snr: db_to_linear(c.reference_snr_db),
            reference_distance: c.reference_distance,
        }
    }
}

fn default_cells() -> usize {
    6
}
fn default_spacing() -> f64 {
    1520.0
}
fn default_radius() -> f64 {
    758.0
}
fn default_min_distance() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "layout", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryConfig {
    /// Explicit node positions in meters.
    Fixed {
        transmitters: Vec<Point>,
        receivers: Vec<Point>,
        #[serde(default)]
        path_loss: PathLossConfig,
    },
    /// One transmitter per cell center on a two-row hexagonal strip; each
    /// receiver is dropped uniformly in a disk around its own transmitter,
    /// fresh for every trial.
    Cellular {
        #[serde(default = "default_cells")]
        cells: usize,
        #[serde(default = "default_spacing")]
        spacing: f64,
        #[serde(default = "default_radius")]
        radius: f64,
        /// Receivers closer than this to their transmitter are redrawn.
        #[serde(default = "default_min_distance")]
        min_distance: f64,
        #[serde(default)]
        path_loss: PathLossConfig,
    },
}

/// Cell centers: `cells` sites alternating between two rows, `spacing` apart.
pub fn cell_centers(cells: usize, spacing: f64) -> Vec<Point> {
    let row_gap = spacing * 3f64.sqrt() / 2.0;
    (0..cells)
        .map(|i| {
            let col = (i / 2) as f64;
            if i % 2 == 0 {
                [col * spacing, 0.0]
            } else {
                [col * spacing + spacing / 2.0, row_gap]
            }
        })
        .collect()
}

impl GeometryConfig {
    fn path_loss(&self) -> &PathLossConfig {
        match self {
            GeometryConfig::Fixed { path_loss, .. } | GeometryConfig::Cellular { path_loss, .. } => path_loss,
        }
    }

    pub fn users(&self) -> usize {
        match self {
            GeometryConfig::Fixed { transmitters, .. } => transmitters.len(),
            GeometryConfig::Cellular { cells, .. } => *cells,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, GeometryConfig::Cellular { .. })
    }

    /// Node positions for one trial.
    pub fn draw(&self, seed: u64) -> Geometry {
        let positions = match self {
            GeometryConfig::Fixed {
                transmitters,
                receivers,
                ..
            } => Positions {
                transmitters: transmitters.clone(),
                receivers: receivers.clone(),
            },
            GeometryConfig::Cellular {
                cells,
                spacing,
                radius,
                min_distance,
                ..
            } => {
                use rand::Rng;
                let transmitters = cell_centers(*cells, *spacing);
                let receivers = transmitters
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let mut rng = derived_rng(seed, &[stream::GEOMETRY, k as u64]);
                        loop {
                            // Uniform in the disk: radius ∝ sqrt(U).
                            let r = radius * rng.random::<f64>().sqrt();
                            let theta = std::f64::consts::TAU * rng.random::<f64>();
                            if r >= *min_distance {
                                return [c[0] + r * theta.cos(), c[1] + r * theta.sin()];
                            }
                        }
                    })
                    .collect();
                Positions {
                    transmitters,
                    receivers,
                }
            }
        };
        Geometry {
            positions,
            path_loss: self.path_loss().into(),
        }
    }

    fn validate(&self) -> Result<()> {
        let pl = self.path_loss();
        if !(pl.exponent.is_finite() && pl.reference_distance > 0.0 && pl.reference_snr_db.is_finite()) {
            return Err(Error::Config("path loss parameters are invalid".into()));
        }
        match self {
            GeometryConfig::Fixed {
                transmitters,
                receivers,
                ..
            } if transmitters.len() != receivers.len() => {
                Err(Error::Config("one receiver per transmitter is required".into()))
            }
            GeometryConfig::Cellular {
                cells,
                spacing,
                radius,
                min_distance,
                ..
            } if *cells == 0 || !(*spacing > 0.0) || !(*radius > *min_distance) || !(*min_distance > 0.0) => {
                Err(Error::Config("cellular layout needs cells ≥ 1 and radius > min_distance > 0".into()))
            }
            _ => Ok(()),
        }
    }
}

fn default_id() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub users: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    /// Symbols per frame. Sweeps over the data fraction override it.
    pub coherence_time: Option<f64>,
    /// Equal SNR on every link.
    pub snr_db: Option<f64>,
    /// Per-link SNRs, `[receiver][transmitter]`.
    pub link_snr_db: Option<Vec<Vec<f64>>>,
    pub overhead_ia: Option<OverheadModel>,
    pub overhead_tdma: Option<OverheadModel>,
    /// Overhead apart from training, for the training sweeps.
    pub residual_overhead: Option<OverheadModel>,
    pub geometry: Option<GeometryConfig>,
}

impl ScenarioConfig {
    pub fn uniform(id: &str, users: usize, tx: usize, rx: usize, snr_db: f64) -> Self {
        Self {
            id: id.into(),
            users,
            tx_antennas: tx,
            rx_antennas: rx,
            coherence_time: None,
            snr_db: Some(snr_db),
            link_snr_db: None,
            overhead_ia: None,
            overhead_tdma: None,
            residual_overhead: None,
            geometry: None,
        }
    }

    pub fn residual(&self) -> OverheadModel {
        self.residual_overhead.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let sources =
            self.snr_db.is_some() as u8 + self.link_snr_db.is_some() as u8 + self.geometry.is_some() as u8;
        if sources != 1 {
            return Err(Error::Config(
                "give exactly one of snr_db, link_snr_db or geometry".into(),
            ));
        }
        if let Some(g) = &self.geometry {
            g.validate()?;
            if g.users() != self.users {
                return Err(Error::Config(format!(
                    "geometry places {} users but users = {}",
                    g.users(),
                    self.users
                )));
            }
        }
        if let Some(r) = &self.residual_overhead {
            r.validate()?;
        }
        // Validation of the remaining fields happens in the scenario itself.
        self.build(0).map(|_| ())
    }

    /// Scenario for one trial. Only random layouts depend on `trial_seed`.
    pub fn build(&self, trial_seed: u64) -> Result<NetworkScenario> {
        let t = self.coherence_time.unwrap_or(f64::INFINITY);
        let mut scenario = if let Some(db) = self.snr_db {
            NetworkScenario::uniform(self.users, self.tx_antennas, self.rx_antennas, t, db_to_linear(db))?
        } else if let Some(rows) = &self.link_snr_db {
            if rows.len() != self.users || rows.iter().any(|r| r.len() != self.users) {
                return Err(Error::Config("link_snr_db must be users × users".into()));
            }
            let grid = DMatrix::from_fn(self.users, self.users, |i, j| db_to_linear(rows[i][j]));
            NetworkScenario::with_link_snr(self.tx_antennas, self.rx_antennas, t, grid)?
        } else if let Some(g) = &self.geometry {
            NetworkScenario::from_geometry(self.tx_antennas, self.rx_antennas, t, g.draw(trial_seed))?
        } else {
            return Err(Error::Config("scenario has no SNR source".into()));
        };
        scenario = scenario.with_overheads(
            self.overhead_ia.unwrap_or_else(OverheadModel::quadratic),
            self.overhead_tdma.unwrap_or_else(OverheadModel::linear),
        );
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Where the greedy partitioners get their per-user channel quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QualitySource {
    /// The current frame's channels.
    #[default]
    Genie,
    /// An independent earlier frame with the same large-scale gains.
    PreviousFrame,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    /// `start:stop:step`: data fraction for rate sweeps, τ for training sweeps.
    pub grid: Option<String>,
    /// SNRs swept by the training experiment.
    pub snr_db_values: Option<Vec<f64>>,
    #[serde(default)]
    pub quality: QualitySource,
    #[serde(default)]
    pub ia: IaConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text)?;
        file.scenario.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}
