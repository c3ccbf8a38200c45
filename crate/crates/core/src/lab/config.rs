//! Experiment configuration, read from TOML. Every key has a default and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::KrylovConfig;
use crate::lattice::{GaugeField, GaugePreset, Grid, LatticeOperators, WaveFunction};
use crate::manybody::MemoryBudget;
use crate::potentials::{ConvolutionMethod, InteractionParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub points: usize,
    pub half_width: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            dim: 1,
            points: 24,
            half_width: 1.5,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeKind {
    #[default]
    Zero,
    ConstantB,
    LinearPlusBump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeSection {
    pub preset: GaugeKind,
    /// Field strength; in two dimensions only the third component is used.
    pub b0: [f64; 3],
    pub bump_amplitude: f64,
    pub bump_width: f64,
    pub bump_center: [f64; 3],
}

impl Default for GaugeSection {
    fn default() -> Self {
        GaugeSection {
            preset: GaugeKind::Zero,
            b0: [0.0, 0.0, 1.0],
            bump_amplitude: 0.5,
            bump_width: 1.0,
            bump_center: [0.0; 3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteractionSection {
    pub lambda: f64,
    pub alpha: f64,
}

impl Default for InteractionSection {
    fn default() -> Self {
        InteractionSection { lambda: 1.0, alpha: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Gaussian,
    RandomSmooth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub center: [f64; 3],
    pub width: f64,
    pub momentum: [f64; 3],
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            kind: InitialKind::Gaussian,
            center: [0.0; 3],
            width: 0.3,
            momentum: [0.0; 3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub t_final: f64,
    /// Steps between recorded samples.
    pub sample_stride: usize,
    pub krylov_tol: f64,
    pub krylov_max_dim: usize,
    pub krylov_max_halvings: u32,
    /// Largest accepted Hartree step; unset means no ceiling.
    pub dt_ceiling: Option<f64>,
    pub convolution: ConvolutionMethod,
    /// Krylov step for the N-body propagation; unset means one step per sample interval.
    pub nbody_dt: Option<f64>,
    /// Krylov subspace cap for the N-body propagation.
    pub nbody_krylov_max_dim: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dt: 0.01,
            t_final: 0.5,
            sample_stride: 10,
            krylov_tol: 1e-10,
            krylov_max_dim: 40,
            krylov_max_halvings: 12,
            dt_ceiling: None,
            convolution: ConvolutionMethod::Auto,
            nbody_dt: Some(0.05),
            nbody_krylov_max_dim: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    TraceK1,
    TraceK2,
    EnergyK1,
    Hs,
}

impl DistanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceKind::TraceK1 => "trace_k1",
            DistanceKind::TraceK2 => "trace_k2",
            DistanceKind::EnergyK1 => "energy_k1",
            DistanceKind::Hs => "hs",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_list: Vec<usize>,
    /// Explicit `alpha_N`, one per entry of `n_list`.
    pub alpha_list: Option<Vec<f64>>,
    /// `alpha_N = N^(-alpha_power)` when no explicit list is given.
    pub alpha_power: f64,
    /// Regularizations for the one-body gap study, strictly descending.
    pub alpha_study: Vec<f64>,
    /// Regularization of the reference flow in the gap study.
    pub reference_alpha: f64,
    /// Regularizations for the regularity sweep.
    pub regularity_alphas: Vec<f64>,
    pub distances: Vec<DistanceKind>,
    pub seed: u64,
    pub memory_budget_gib: f64,
    /// Particle number of a single `nbody` run.
    pub n_particles: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            n_list: vec![2, 3, 4, 5],
            alpha_list: None,
            alpha_power: 1.0,
            alpha_study: vec![0.4, 0.2, 0.1, 0.05],
            reference_alpha: 0.0,
            regularity_alphas: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            distances: vec![DistanceKind::TraceK1],
            seed: 7,
            memory_budget_gib: 4.0,
            n_particles: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub plots: bool,
    pub trajectory_csv: String,
    /// Write an N-body checkpoint at the end of an `nbody` run.
    pub checkpoint: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("magmf-out"),
            plots: true,
            trajectory_csv: "trajectory.csv".into(),
            checkpoint: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Gauge,
    Hermiticity,
    Diamagnetic,
    Hardy,
    Commutator,
    KpA3,
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Gauge,
        Suite::Hermiticity,
        Suite::Diamagnetic,
        Suite::Hardy,
        Suite::Commutator,
        Suite::KpA3,
        Suite::Oracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Gauge => "gauge",
            Suite::Hermiticity => "hermiticity",
            Suite::Diamagnetic => "diamagnetic",
            Suite::Hardy => "hardy",
            Suite::Commutator => "commutator",
            Suite::KpA3 => "kp_a3",
            Suite::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub suites: Vec<Suite>,
    pub n_states: usize,
    pub n_gauges: usize,
    /// Test fixture: flip the sign of one link phase in the covariant stencils.
    pub inject_link_sign_fault: bool,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            suites: Suite::ALL.to_vec(),
            n_states: 100,
            n_gauges: 20,
            inject_link_sign_fault: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub gauge: GaugeSection,
    pub interaction: InteractionSection,
    pub initial: InitialSection,
    pub solver: SolverSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
    pub check: CheckSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.interaction()?;
        let s = &self.solver;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(Error::Config(format!("solver.dt must be positive, got {}", s.dt)));
        }
        if !(s.t_final >= 0.0 && s.t_final.is_finite()) {
            return Err(Error::Config(format!("solver.t_final must be non-negative, got {}", s.t_final)));
        }
        crate::hartree::step_count(s.t_final, s.dt).map_err(|e| Error::Config(format!("solver: {e}")))?;
        if s.sample_stride == 0 {
            return Err(Error::Config("solver.sample_stride must be at least 1".into()));
        }
        if !(s.krylov_tol > 0.0) || s.krylov_max_dim < 2 || s.nbody_krylov_max_dim < 2 {
            return Err(Error::Config("krylov tolerance must be positive and subspaces at least 2".into()));
        }
        if let Some(c) = s.dt_ceiling {
            if !(c > 0.0) {
                return Err(Error::Config(format!("solver.dt_ceiling must be positive, got {c}")));
            }
        }
        if let Some(d) = s.nbody_dt {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("solver.nbody_dt must be positive, got {d}")));
            }
        }
        if self.initial.kind == InitialKind::Gaussian && !(self.initial.width > 0.0) {
            return Err(Error::Config("initial.width must be positive".into()));
        }
        let e = &self.experiment;
        if e.n_list.is_empty() {
            return Err(Error::Config("experiment.n_list must not be empty".into()));
        }
        if e.n_list[0] == 0 || e.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "experiment.n_list must be strictly ascending positive integers, got {:?}",
                e.n_list
            )));
        }
        if let Some(list) = &e.alpha_list {
            if list.len() != e.n_list.len() {
                return Err(Error::Config(format!(
                    "experiment.alpha_list has {} entries for {} particle numbers",
                    list.len(),
                    e.n_list.len()
                )));
            }
            if list.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return Err(Error::Config("experiment.alpha_list entries must be non-negative".into()));
            }
        }
        if !(e.alpha_power >= 0.0 && e.alpha_power.is_finite()) {
            return Err(Error::Config("experiment.alpha_power must be non-negative".into()));
        }
        if e.alpha_study.iter().any(|a| !(*a > 0.0)) || e.alpha_study.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!(
                "experiment.alpha_study must be positive and strictly descending, got {:?}",
                e.alpha_study
            )));
        }
        if !(e.reference_alpha >= 0.0) {
            return Err(Error::Config("experiment.reference_alpha must be non-negative".into()));
        }
        if e.regularity_alphas.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::Config("experiment.regularity_alphas must be non-negative".into()));
        }
        if e.distances.is_empty() {
            return Err(Error::Config("experiment.distances must not be empty".into()));
        }
        if !(e.memory_budget_gib > 0.0) {
            return Err(Error::Config("experiment.memory_budget_gib must be positive".into()));
        }
        if e.n_particles == 0 {
            return Err(Error::Config("experiment.n_particles must be at least 1".into()));
        }
        if self.check.n_states == 0 {
            return Err(Error::Config("check.n_states must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.points, self.grid.half_width).map_err(|e| Error::Config(format!("grid: {e}")))
    }

    pub fn gauge_preset(&self) -> GaugePreset {
        let g = &self.gauge;
        match g.preset {
            GaugeKind::Zero => GaugePreset::Zero,
            GaugeKind::ConstantB => GaugePreset::ConstantB { b0: g.b0 },
            GaugeKind::LinearPlusBump => GaugePreset::LinearPlusBump {
                b0: g.b0,
                amplitude: g.bump_amplitude,
                width: g.bump_width,
                center: g.bump_center,
            },
        }
    }

    pub fn gauge_field(&self) -> Result<GaugeField> {
        GaugeField::sample(&self.gauge_preset(), self.grid()?)
    }

    pub fn operators(&self) -> Result<LatticeOperators> {
        Ok(LatticeOperators::new(self.gauge_field()?))
    }

    pub fn interaction(&self) -> Result<InteractionParams> {
        InteractionParams::new(self.interaction.lambda, self.interaction.alpha)
            .map_err(|e| Error::Config(format!("interaction: {e}")))
    }

    pub fn krylov(&self) -> KrylovConfig {
        KrylovConfig {
            tol: self.solver.krylov_tol,
            max_dim: self.solver.krylov_max_dim,
            max_halvings: self.solver.krylov_max_halvings,
            reorthogonalize: true,
        }
    }

    pub fn nbody_krylov(&self) -> KrylovConfig {
        KrylovConfig {
            max_dim: self.solver.nbody_krylov_max_dim,
            reorthogonalize: false,
            ..self.krylov()
        }
    }

    pub fn budget(&self) -> MemoryBudget {
        MemoryBudget::from_gib(self.experiment.memory_budget_gib)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.experiment.seed)
    }

    pub fn initial_state(&self) -> Result<WaveFunction> {
        let grid = self.grid()?;
        Ok(match self.initial.kind {
            InitialKind::Gaussian => {
                WaveFunction::gaussian(grid, self.initial.center, self.initial.width, self.initial.momentum)
            }
            InitialKind::RandomSmooth => WaveFunction::random_smooth(grid, &mut self.rng()),
        })
    }

    /// `alpha_N` for every entry of `n_list`.
    pub fn alpha_schedule(&self) -> Vec<f64> {
        let e = &self.experiment;
        match &e.alpha_list {
            Some(list) => list.clone(),
            None => e.n_list.iter().map(|&n| (n as f64).powf(-e.alpha_power)).collect(),
        }
    }

    /// Sample interval `stride * dt` and the number of recorded samples after `t = 0`.
    pub fn sampling(&self) -> Result<(f64, usize)> {
        let steps = crate::hartree::step_count(self.solver.t_final, self.solver.dt)?;
        let stride = self.solver.sample_stride;
        Ok((stride as f64 * self.solver.dt, steps / stride))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let e = ExperimentConfig::from_toml_str("[grid]\npoints = 10\nponts = 3\n").unwrap_err();
        assert!(e.to_string().contains("ponts"), "{e}");
        assert!(ExperimentConfig::from_toml_str("[gird]\n").is_err());
    }

    #[test]
    fn descending_n_list_rejected() {
        let e = ExperimentConfig::from_toml_str("[experiment]\nn_list = [4, 3, 2]\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn alpha_schedule_rule() {
        let c = ExperimentConfig::from_toml_str("[experiment]\nn_list = [2, 4]\nalpha_power = 1.0\n").unwrap();
        assert_eq!(c.alpha_schedule(), vec![0.5, 0.25]);
        let c = ExperimentConfig::from_toml_str("[experiment]\nn_list = [2, 4]\nalpha_list = [0.3, 0.3]\n").unwrap();
        assert_eq!(c.alpha_schedule(), vec![0.3, 0.3]);
        assert!(ExperimentConfig::from_toml_str("[experiment]\nn_list = [2, 4]\nalpha_list = [0.3]\n").is_err());
    }

    #[test]
    fn sampling_excludes_origin() {
        let c = ExperimentConfig::default();
        let (dt, n) = c.sampling().unwrap();
        assert!((dt - 0.1).abs() < 1e-15);
        assert_eq!(n, 5);
    }

    #[test]
    fn gauge_presets_parse() {
        let c = ExperimentConfig::from_toml_str("[grid]\ndim = 2\npoints = 10\nhalf_width = 3.0\n[gauge]\npreset = \"constant_b\"\nb0 = [0.0, 0.0, 2.0]\n").unwrap();
        assert!(matches!(c.gauge_preset(), GaugePreset::ConstantB { .. }));
        assert!(c.gauge_field().is_ok());
        assert!(ExperimentConfig::from_toml_str("[gauge]\npreset = \"bogus\"\n").is_err());
    }
}
