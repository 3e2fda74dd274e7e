//! Named initial states, feedback-amplitude sweeps and figure presets.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::integrator::{evolve_master, IntegrationConfig, TimeSeries};
use crate::linalg::{CMatrix, C64};
use crate::model::{basis, DensityMatrix, FeedbackVector, MasterEquation, SystemParams};
use crate::observables::ObservableRecord;
use crate::parallel::{self, Execution};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `|+⟩|+⟩` with `|+⟩ = (|e⟩ + |g⟩)/√2`; every density-matrix entry is ¼.
    PlusPlus,
    Ge,
    Ee,
    Gg,
    Custom(Box<DensityMatrix>),
}

impl InitialState {
    pub fn name(&self) -> &'static str {
        match self {
            InitialState::PlusPlus => "plus_plus",
            InitialState::Ge => "ge",
            InitialState::Ee => "ee",
            InitialState::Gg => "gg",
            InitialState::Custom(_) => "custom",
        }
    }

    pub fn density(&self) -> DensityMatrix {
        match self {
            InitialState::PlusPlus => {
                DensityMatrix::from_matrix_unchecked(CMatrix::from_fn(4, 4, |_, _| C64::new(0.25, 0.0)))
            }
            InitialState::Ge => DensityMatrix::basis_state(basis::GE),
            InitialState::Ee => DensityMatrix::basis_state(basis::EE),
            InitialState::Gg => DensityMatrix::basis_state(basis::GG),
            InitialState::Custom(rho) => (**rho).clone(),
        }
    }

    /// Custom pure state from `[re0, im0, re1, im1, ...]`; rescaled to unit norm.
    pub fn custom_from_amplitudes(parts: &[f64]) -> Result<Self> {
        if parts.len() != 8 {
            return Err(Error::InvalidConfig(format!("custom state needs 8 reals (re,im x4), got {}", parts.len())));
        }
        let amps = [0, 1, 2, 3].map(|k| C64::new(parts[2 * k], parts[2 * k + 1]));
        Ok(InitialState::Custom(Box::new(DensityMatrix::from_pure(&amps)?)))
    }
}

impl FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus_plus" => Ok(InitialState::PlusPlus),
            "ge" => Ok(InitialState::Ge),
            "ee" => Ok(InitialState::Ee),
            "gg" => Ok(InitialState::Gg),
            "custom" => Err(Error::InvalidConfig("custom initial state requires amplitudes".into())),
            other => Err(Error::InvalidConfig(format!("unknown initial state `{other}`"))),
        }
    }
}

impl Serialize for InitialState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            name: &'a str,
            /// Row-major `[re, im]` pairs.
            density: Vec<[f64; 2]>,
        }
        let rho = self.density();
        Repr { name: self.name(), density: rho.matrix().entries().iter().map(|z| [z.re, z.im]).collect() }
            .serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Ax,
    Ay,
    Az,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Ax => "ax",
            Axis::Ay => "ay",
            Axis::Az => "az",
        }
    }

    /// `base` with this component replaced by `value`.
    pub fn apply(self, base: FeedbackVector, value: f64) -> FeedbackVector {
        match self {
            Axis::Ax => FeedbackVector { ax: value, ..base },
            Axis::Ay => FeedbackVector { ay: value, ..base },
            Axis::Az => FeedbackVector { az: value, ..base },
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ax" => Ok(Axis::Ax),
            "ay" => Ok(Axis::Ay),
            "az" => Ok(Axis::Az),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    AbsRhoEg,
    Concurrence,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::AbsRhoEg => "abs_rho_eg",
            Observable::Concurrence => "concurrence",
        }
    }

    pub fn extract(self, r: &ObservableRecord) -> f64 {
        match self {
            Observable::AbsRhoEg => r.abs_rho_eg,
            Observable::Concurrence => r.concurrence,
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs_rho_eg" => Ok(Observable::AbsRhoEg),
            "concurrence" => Ok(Observable::Concurrence),
            other => Err(Error::InvalidConfig(format!("unknown observable `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
    pub observable: Observable,
    pub params: SystemParams,
    /// Components other than `axis` are taken from here.
    pub base_feedback: FeedbackVector,
    pub init: InitialState,
    pub integration: IntegrationConfig,
}

impl SweepSpec {
    /// Sweep over `[0, π]` with 101 points and default integration settings.
    pub fn new(axis: Axis, observable: Observable, params: SystemParams, init: InitialState) -> Self {
        SweepSpec {
            axis,
            lo: 0.0,
            hi: PI,
            n_points: 101,
            observable,
            params,
            base_feedback: FeedbackVector::zero(),
            init,
            integration: IntegrationConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo >= self.hi {
            return Err(Error::InvalidConfig(format!("sweep range [{}, {}] is empty", self.lo, self.hi)));
        }
        if self.n_points < 2 {
            return Err(Error::InvalidConfig("sweep needs at least 2 points".into()));
        }
        self.params.validate()?;
        self.integration.validate()
    }

    pub fn axis_values(&self) -> Vec<f64> {
        let span = self.hi - self.lo;
        let last = (self.n_points - 1) as f64;
        (0..self.n_points).map(|i| self.lo + span * (i as f64) / last).collect()
    }
}

/// Observable values indexed by `[axis value][sample time]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub axis: Axis,
    pub observable: Observable,
    pub axis_values: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SweepGrid {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// Largest entrywise difference between any row and row 0.
    pub fn max_row_spread(&self) -> f64 {
        let first = &self.values[0];
        self.values
            .iter()
            .flat_map(|row| row.iter().zip(first).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

pub fn sweep(spec: &SweepSpec, exec: Execution) -> Result<SweepGrid> {
    spec.validate()?;
    let values = spec.axis_values();
    let rho0 = spec.init.density();
    let rows = parallel::map_indexed(values.len(), exec, |i| {
        let f = spec.axis.apply(spec.base_feedback, values[i]);
        let eq = MasterEquation::with_feedback(&spec.params, &f);
        evolve_master(&rho0, &eq, &spec.integration).map_err(|e| Error::Sweep {
            axis: spec.axis.name(),
            axis_value: values[i],
            source: Box::new(e),
        })
    });
    let mut grid = SweepGrid { axis: spec.axis, observable: spec.observable, axis_values: values, times: Vec::new(), values: Vec::new() };
    for row in rows {
        let series = row?;
        if grid.times.is_empty() {
            grid.times = series.times.clone();
        }
        grid.values.push(series.column(|r| spec.observable.extract(r)));
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig1a,
    Fig1b,
    Fig2a,
    Fig2b,
    Fig2c,
    Fig3,
    Fig4a,
    Fig4b,
    Fig5a,
    Fig5b,
}

impl FigureId {
    pub const ALL: [FigureId; 10] = [
        FigureId::Fig1a,
        FigureId::Fig1b,
        FigureId::Fig2a,
        FigureId::Fig2b,
        FigureId::Fig2c,
        FigureId::Fig3,
        FigureId::Fig4a,
        FigureId::Fig4b,
        FigureId::Fig5a,
        FigureId::Fig5b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig1a => "fig1a",
            FigureId::Fig1b => "fig1b",
            FigureId::Fig2a => "fig2a",
            FigureId::Fig2b => "fig2b",
            FigureId::Fig2c => "fig2c",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4a => "fig4a",
            FigureId::Fig4b => "fig4b",
            FigureId::Fig5a => "fig5a",
            FigureId::Fig5b => "fig5b",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL.into_iter().find(|id| id.name() == s).ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct LabeledSeries {
    pub label: String,
    pub feedback: FeedbackVector,
    pub series: TimeSeries,
}

#[derive(Debug, Clone)]
pub enum PresetData {
    Series(Vec<LabeledSeries>),
    Grid(SweepGrid),
}

#[derive(Debug, Clone)]
pub struct PresetOutput {
    pub figure: FigureId,
    pub params: SystemParams,
    pub init: InitialState,
    pub integration: IntegrationConfig,
    pub data: PresetData,
}

/// Overrides applied on top of a preset's built-in settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct PresetOverrides {
    pub integration: Option<IntegrationConfig>,
    pub n_points: Option<usize>,
}

pub fn run_preset(id: FigureId, exec: Execution) -> Result<PresetOutput> {
    run_preset_with(id, PresetOverrides::default(), exec)
}

pub fn run_preset_with(id: FigureId, overrides: PresetOverrides, exec: Execution) -> Result<PresetOutput> {
    let params = SystemParams::default();
    let integration = overrides.integration.unwrap_or_default();
    let fx = |ax| FeedbackVector::new(ax, 0.0, 0.0);
    let fy = |ay| FeedbackVector::new(0.0, ay, 0.0);
    let uncontrolled = ("uncontrolled", FeedbackVector::zero());

    let (init, data) = match id {
        FigureId::Fig1a | FigureId::Fig1b => {
            let cuts = [("controlled", fx(1.2)), uncontrolled];
            (InitialState::PlusPlus, PresetPlan::Series(cuts.to_vec()))
        }
        FigureId::Fig2a => (InitialState::PlusPlus, PresetPlan::Sweep(Axis::Ax, Observable::AbsRhoEg)),
        FigureId::Fig2b => (InitialState::PlusPlus, PresetPlan::Sweep(Axis::Ay, Observable::AbsRhoEg)),
        FigureId::Fig2c => (InitialState::PlusPlus, PresetPlan::Sweep(Axis::Az, Observable::AbsRhoEg)),
        FigureId::Fig3 => {
            let cuts = [("controlled", fx(FRAC_PI_2)), uncontrolled];
            (InitialState::PlusPlus, PresetPlan::Series(cuts.to_vec()))
        }
        FigureId::Fig4a => (InitialState::Ge, PresetPlan::Sweep(Axis::Ay, Observable::Concurrence)),
        FigureId::Fig4b => {
            let cuts = [("ay_0.5pi", fy(FRAC_PI_2)), ("ay_0.9", fy(0.9)), uncontrolled];
            (InitialState::Ge, PresetPlan::Series(cuts.to_vec()))
        }
        FigureId::Fig5a => (InitialState::Ee, PresetPlan::Sweep(Axis::Ay, Observable::Concurrence)),
        FigureId::Fig5b => {
            let cuts = [("controlled", fy(1.2)), uncontrolled];
            (InitialState::Ee, PresetPlan::Series(cuts.to_vec()))
        }
    };

    let rho0 = init.density();
    let data = match data {
        PresetPlan::Series(cuts) => {
            let runs = parallel::map_indexed(cuts.len(), exec, |i| {
                evolve_master(&rho0, &MasterEquation::with_feedback(&params, &cuts[i].1), &integration)
            });
            let mut out = Vec::with_capacity(cuts.len());
            for ((label, feedback), series) in cuts.into_iter().zip(runs) {
                out.push(LabeledSeries { label: label.to_string(), feedback, series: series? });
            }
            PresetData::Series(out)
        }
        PresetPlan::Sweep(axis, observable) => {
            let mut spec = SweepSpec::new(axis, observable, params, init.clone());
            spec.integration = integration;
            if let Some(n) = overrides.n_points {
                spec.n_points = n;
            }
            PresetData::Grid(sweep(&spec, exec)?)
        }
    };
    Ok(PresetOutput { figure: id, params, init, integration, data })
}

enum PresetPlan {
    Series(Vec<(&'static str, FeedbackVector)>),
    Sweep(Axis, Observable),
}
