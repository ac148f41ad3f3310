//! Run configuration files.
//!
//! A run is described by a TOML document with the sections `[case]`,
//! `[physics]`, `[mesh]`, `[spaces]`, `[lift]`, `[qoi]`, `[adjoint]`,
//! `[newton]`, `[solver]`, `[reference]` and `[output]`. Only `[case]`,
//! `[mesh]` and `[spaces]` are required; `docs/config.md` lists every key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cases::{HartmannParams, LidParams};
use crate::error::ConfigError;
use crate::fem::Degrees;
use crate::forms::{MhdConfig, QoiSpec};
use crate::linalg::DEFAULT_MEMORY_BUDGET;
use crate::mesh::MeshPattern;
use crate::solvers::NewtonOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Hartmann,
    Lid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linearization {
    /// Adjoint linearized about the discrete solution alone.
    #[default]
    Numerical,
    /// Adjoint linearized about the pair (exact solution, discrete solution).
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSection {
    pub name: String,
    pub problem: Problem,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub re: Option<f64>,
    pub re_m: Option<f64>,
    pub kappa: Option<f64>,
    /// Reynolds continuation; defaults to `[200, 500, 1000, 2000]` cut at `re`
    /// for the cavity and to a single stage for the channel.
    pub schedule: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// Grid divisions per side, one table row each.
    pub n: Vec<usize>,
    #[serde(default = "default_pattern")]
    pub pattern: MeshPattern,
}

fn default_pattern() -> MeshPattern {
    MeshPattern::Right
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacesSection {
    pub primal: [usize; 3],
    pub adjoint: Option<[usize; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSection {
    /// Degree of the velocity boundary lift; 0 imposes the data nodally.
    /// Defaults to 4 for the channel and 0 for the cavity.
    pub degree: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjointSection {
    #[serde(default)]
    pub linearization: Linearization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSection {
    fn default() -> Self {
        let d = NewtonOptions::default();
        Self { abs_tol: d.abs_tol, rel_tol: d.rel_tol, max_iter: d.max_iter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Factor bytes per job kept in memory, in MiB.
    pub memory_budget_mib: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { memory_budget_mib: DEFAULT_MEMORY_BUDGET >> 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    #[default]
    Analytic,
    Stored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(default)]
    pub source: ReferenceSource,
    pub path: Option<PathBuf>,
    /// Grid divisions of the reference solve.
    pub n: Option<usize>,
    #[serde(default = "default_reference_degrees")]
    pub degrees: [usize; 3],
    /// Coarser grid for the self-convergence check.
    pub guard_n: Option<usize>,
    #[serde(default = "default_guard_tol")]
    pub guard_tol: f64,
    /// Build the reference during `run` if the file is missing.
    #[serde(default)]
    pub generate: bool,
}

fn default_reference_degrees() -> [usize; 3] {
    [3, 2, 2]
}

fn default_guard_tol() -> f64 {
    5e-8
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            source: ReferenceSource::Analytic,
            path: None,
            n: None,
            degrees: default_reference_degrees(),
            guard_n: None,
            guard_tol: default_guard_tol(),
            generate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub case: CaseSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    pub mesh: MeshSection,
    pub spaces: SpacesSection,
    #[serde(default)]
    pub lift: LiftSection,
    pub qoi: Option<QoiSpec>,
    #[serde(default)]
    pub adjoint: AdjointSection,
    #[serde(default)]
    pub newton: NewtonSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub reference: ReferenceSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::parse(&text).map_err(|message| ConfigError::Invalid { path: path.to_owned(), message })
    }

    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if self.mesh.n.is_empty() || self.mesh.n.contains(&0) {
            return Err("mesh.n must list positive grid sizes".into());
        }
        let [u, b, p] = self.spaces.primal;
        if u < 2 || b < 1 || p < 1 || u.max(b).max(p) > 5 {
            return Err(format!("spaces.primal {:?} is outside the supported range", self.spaces.primal));
        }
        if let Some(d @ (1 | 7..)) = self.lift.degree {
            return Err(format!("lift.degree {d} must be 0 or in 2..=6"));
        }
        if let Some(s) = &self.physics.schedule {
            if s.windows(2).any(|w| w[0] >= w[1]) || s.last() != Some(&self.re()) {
                return Err("physics.schedule must increase strictly and end at re".into());
            }
        }
        match (self.case.problem, self.reference.source) {
            (Problem::Lid, ReferenceSource::Analytic) => {
                return Err("the cavity has no analytic solution; use reference.source = \"stored\"".into())
            }
            (_, ReferenceSource::Stored) if self.reference.path.is_none() || self.reference.n.is_none() => {
                return Err("a stored reference needs reference.path and reference.n".into())
            }
            _ => {}
        }
        if self.case.problem == Problem::Lid && self.adjoint.linearization == Linearization::Exact {
            return Err("exact linearization needs an analytic solution".into());
        }
        Ok(())
    }

    pub fn re(&self) -> f64 {
        self.physics.re.unwrap_or(match self.case.problem {
            Problem::Hartmann => HartmannParams::default().re,
            Problem::Lid => 1000.0,
        })
    }

    pub fn re_m(&self) -> f64 {
        self.physics.re_m.unwrap_or(match self.case.problem {
            Problem::Hartmann => HartmannParams::default().re_m,
            Problem::Lid => 0.4,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.physics.kappa.unwrap_or(1.0)
    }

    /// Degree of the velocity boundary lift, 0 for nodal boundary data.
    pub fn lift_degree(&self) -> usize {
        self.lift.degree.unwrap_or(match self.case.problem {
            Problem::Hartmann => 4,
            Problem::Lid => 0,
        })
    }

    pub fn hartmann(&self) -> HartmannParams {
        HartmannParams { re: self.re(), re_m: self.re_m(), kappa: self.kappa() }
    }

    pub fn lid(&self) -> LidParams {
        let mut p = LidParams::new(self.re(), self.re_m(), self.kappa());
        if let Some(s) = &self.physics.schedule {
            p.schedule = s.clone();
        }
        p
    }

    pub fn mhd_config(&self) -> MhdConfig {
        match self.case.problem {
            Problem::Hartmann => self.hartmann().config(),
            Problem::Lid => self.lid().config(),
        }
    }

    pub fn schedule(&self) -> Vec<f64> {
        match self.case.problem {
            Problem::Hartmann => self.physics.schedule.clone().unwrap_or_else(|| vec![self.re()]),
            Problem::Lid => self.lid().schedule,
        }
    }

    pub fn qoi(&self) -> QoiSpec {
        self.qoi.unwrap_or_else(|| match self.case.problem {
            Problem::Hartmann => HartmannParams::default_qoi(),
            Problem::Lid => LidParams::default_qoi(),
        })
    }

    pub fn primal_degrees(&self) -> Degrees {
        let [u, b, p] = self.spaces.primal;
        Degrees::new(u, b, p)
    }

    /// Adjoint degrees: one above the primal ones unless overridden.
    pub fn adjoint_degrees(&self) -> Degrees {
        let [u, b, p] = self.spaces.adjoint.unwrap_or(self.spaces.primal.map(|d| d + 1));
        Degrees::new(u, b, p)
    }

    pub fn newton_options(&self, jobs: usize) -> NewtonOptions {
        NewtonOptions {
            abs_tol: self.newton.abs_tol,
            rel_tol: self.newton.rel_tol,
            max_iter: self.newton.max_iter,
            memory_budget: self.memory_budget(jobs),
        }
    }

    /// Factor memory per concurrent job in bytes.
    pub fn memory_budget(&self, jobs: usize) -> usize {
        (self.solver.memory_budget_mib << 20) / jobs.max(1)
    }
}
