use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::grid_steps;
use crate::priors::{PriorKind, StateSpacePrior};
use crate::problems::{self, IVProblem, ProblemParams};

/// Marker attached to every resolved setting the experiments do not pin down.
pub const UNSTATED_DEFAULT: &str = "default-not-paper";

/// Diffusion scale used by the filter experiments unless overridden.
pub const EXPERIMENT_SIGMA2: f64 = 100.0;
/// Mean-reversion parameter of the IOUP experiments.
pub const EXPERIMENT_THETA: f64 = -1.5;

/// Settings of one benchmark experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Preset {
    pub problem: &'static str,
    pub q: usize,
    pub h: f64,
    /// Solution components compared between the priors.
    pub components: &'static [usize],
    /// Prior expected to win before running the experiment.
    pub expected_winner: PriorKind,
    /// Settings of this preset that are not stated with the experiment.
    pub unstated: &'static [&'static str],
}

pub const PRESETS: [Preset; 5] = [
    Preset {
        problem: "exp",
        q: 2,
        h: 0.5,
        components: &[0],
        expected_winner: PriorKind::Iwp,
        unstated: &["sigma2", "T"],
    },
    Preset {
        problem: "neg_exp",
        q: 2,
        h: 0.5,
        components: &[0],
        expected_winner: PriorKind::Ioup,
        unstated: &["sigma2", "T"],
    },
    Preset {
        problem: "orbit",
        q: 1,
        h: 0.1,
        components: &[0],
        expected_winner: PriorKind::Ioup,
        unstated: &["theta", "sigma2", "h", "T"],
    },
    Preset {
        problem: "van_der_pol",
        q: 2,
        h: 0.05,
        components: &[0],
        expected_winner: PriorKind::Ioup,
        unstated: &["theta", "sigma2", "T", "mu", "vdp_dx0"],
    },
    Preset {
        problem: "decay_chain",
        q: 1,
        h: 0.1,
        components: &[7, 8],
        expected_winner: PriorKind::Ioup,
        unstated: &["theta", "sigma2", "T"],
    },
];

pub fn preset(problem: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.problem == problem)
}

/// Raw, possibly partial settings as given on the command line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigOverrides {
    pub problem: String,
    pub prior: Option<PriorKind>,
    pub q: Option<usize>,
    pub theta: Option<f64>,
    pub sigma2: Option<f64>,
    pub h: Option<f64>,
    pub r: Option<f64>,
    pub t_end: Option<f64>,
    pub h_fine: Option<f64>,
    pub eps: Option<f64>,
    pub mu: Option<f64>,
    pub vdp_dx0: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Fully resolved and validated experiment settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub problem: String,
    pub params: ProblemParams,
    pub prior: PriorKind,
    pub q: usize,
    pub theta: f64,
    pub sigma2: f64,
    pub h: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub h_fine: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Setting name → provenance tag, for values that were defaulted.
    pub provenance: BTreeMap<String, String>,
}

impl ConfigOverrides {
    pub fn for_problem(problem: &str, prior: PriorKind) -> Self {
        Self {
            problem: problem.to_string(),
            prior: Some(prior),
            ..Default::default()
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let preset =
            preset(&self.problem).ok_or_else(|| Error::UnknownProblem(self.problem.clone()))?;
        let mut provenance = BTreeMap::new();
        let mut mark = |name: &str, overridden: bool| {
            if !overridden && preset.unstated.contains(&name) {
                provenance.insert(name.to_string(), UNSTATED_DEFAULT.to_string());
            }
        };

        let prior = self.prior.unwrap_or(PriorKind::Ioup);
        let q = self.q.unwrap_or(preset.q);
        let theta = self.theta.unwrap_or(EXPERIMENT_THETA);
        if prior == PriorKind::Ioup {
            mark("theta", self.theta.is_some());
        }
        let sigma2 = self.sigma2.unwrap_or(EXPERIMENT_SIGMA2);
        mark("sigma2", self.sigma2.is_some());
        let h = self.h.unwrap_or(preset.h);
        mark("h", self.h.is_some());
        let t_end = match self.t_end {
            Some(t) => t,
            None => {
                problems::default_horizon(&self.problem).expect("preset implies registry entry")
            }
        };
        mark("T", self.t_end.is_some());
        if self.problem == "van_der_pol" {
            mark("mu", self.mu.is_some());
            mark("vdp_dx0", self.vdp_dx0.is_some());
        }

        let params = ProblemParams {
            eps: self
                .eps
                .or((self.problem == "orbit").then_some(problems::DEFAULT_ECCENTRICITY)),
            mu: self
                .mu
                .or((self.problem == "van_der_pol").then_some(problems::DEFAULT_VDP_MU)),
            vdp_dx0: self
                .vdp_dx0
                .or((self.problem == "van_der_pol").then_some(problems::DEFAULT_VDP_DX0)),
            t_end: Some(t_end),
        };

        let cfg = ExperimentConfig {
            problem: self.problem.clone(),
            params,
            prior,
            q,
            theta: if prior == PriorKind::Iwp { 0.0 } else { theta },
            sigma2,
            h,
            r: self.r.unwrap_or(0.0),
            t_end,
            h_fine: self.h_fine.unwrap_or(problems::DEFAULT_REFERENCE_STEP),
            seed: self.seed.unwrap_or(0),
            out: self.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            provenance,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    /// Checks every module precondition before any computation runs.
    pub fn validate(&self) -> Result<()> {
        self.prior_model()?;
        self.problem()?;
        grid_steps(self.t_end, self.h)?;
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::invalid("R", format!("must be >= 0, got {}", self.r)));
        }
        if !(self.h_fine > 0.0 && self.h_fine <= self.h) {
            return Err(Error::invalid(
                "h_fine",
                format!("must lie in (0, h], got {}", self.h_fine),
            ));
        }
        let ratio = self.h / self.h_fine;
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::invalid(
                "h_fine",
                format!(
                    "h = {} is not a multiple of h_fine = {}",
                    self.h, self.h_fine
                ),
            ));
        }
        Ok(())
    }

    pub fn prior_model(&self) -> Result<StateSpacePrior> {
        StateSpacePrior::new(self.prior, self.q, self.theta, self.sigma2)
    }

    pub fn problem(&self) -> Result<IVProblem> {
        problems::make_problem(&self.problem, &self.params)
    }
}
