//! Gradient-flow problems `ξ ∂_t u = α ∂_xx u − f(x, u) + g` with Dirichlet data.
//!
//! The energy is `E(u) = ∫ (α/2)|∂_x u|² + F(x, u) dx − ⟨g, u⟩` and
//! `f = ∂_u F`. Presets reproduce the linear diffusion and Allen–Cahn
//! experiments used throughout the test suite and the CLI.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::mesh::Partition;
use crate::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Reaction energy density `F(x, u)` with `f = ∂_u F` and `f_u = ∂_u f`.
#[derive(Clone)]
pub enum ReactionTerm {
    Zero,
    /// `F = (1 − u²)² / (4ε)`.
    AllenCahn { epsilon: f64 },
    Custom { density: FieldFn, force: FieldFn, force_du: FieldFn },
}

impl ReactionTerm {
    #[inline]
    pub fn density(&self, x: f64, u: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::AllenCahn { epsilon } => {
                let w = 1.0 - u * u;
                w * w / (4.0 * epsilon)
            }
            Self::Custom { density, .. } => density(x, u),
        }
    }

    #[inline]
    pub fn force(&self, x: f64, u: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::AllenCahn { epsilon } => (u * u * u - u) / epsilon,
            Self::Custom { force, .. } => force(x, u),
        }
    }

    #[inline]
    pub fn force_du(&self, x: f64, u: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::AllenCahn { epsilon } => (3.0 * u * u - 1.0) / epsilon,
            Self::Custom { force_du, .. } => force_du(x, u),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }
}

impl fmt::Debug for ReactionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::AllenCahn { epsilon } => write!(f, "AllenCahn {{ epsilon: {epsilon} }}"),
            Self::Custom { .. } => write!(f, "Custom"),
        }
    }
}

pub fn reaction_allen_cahn(epsilon: f64) -> Result<ReactionTerm> {
    if !(epsilon > 0.0) {
        return Err(Error::NonpositiveEpsilon(epsilon));
    }
    Ok(ReactionTerm::AllenCahn { epsilon })
}

/// Right-hand side `g`, entering the energy as `−⟨g, u⟩`.
#[derive(Clone)]
pub enum SourceTerm {
    None,
    Smooth(ScalarFn),
    /// `weight · δ_{location}`.
    Dirac { location: f64, weight: f64 },
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => write!(f, "None"),
            Self::Smooth(_) => write!(f, "Smooth"),
            Self::Dirac { location, weight } => {
                write!(f, "Dirac {{ location: {location}, weight: {weight} }}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub xi: f64,
    pub reaction: ReactionTerm,
    pub source: SourceTerm,
    pub domain: (f64, f64),
    pub boundary: (f64, f64),
    pub lipschitz: Option<f64>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.domain;
        if !(a < b) {
            return Err(Error::InvalidBounds { a, b });
        }
        if !(self.alpha > 0.0) || !(self.xi > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "alpha and xi must be positive (alpha = {}, xi = {})",
                self.alpha, self.xi
            )));
        }
        if let SourceTerm::Dirac { location, .. } = self.source {
            if !(a < location && location < b) {
                return Err(Error::InvalidProblem(format!(
                    "dirac location {location} not strictly inside ({a}, {b})"
                )));
            }
        }
        if let Some(l0) = self.lipschitz {
            if !(l0 >= 0.0) {
                return Err(Error::InvalidProblem(format!("negative lipschitz constant {l0}")));
            }
        }
        Ok(())
    }

    /// Residual of the strong form `ξ u_t − α u_xx + f(x, u) − g` at a
    /// point where the smooth source (if any) is evaluated; a Dirac source
    /// contributes nothing away from its location.
    pub fn strong_residual(&self, u: f64, u_t: f64, u_xx: f64, x: f64) -> f64 {
        let g = match &self.source {
            SourceTerm::Smooth(g) => g(x),
            _ => 0.0,
        };
        self.xi * u_t - self.alpha * u_xx + self.reaction.force(x, u) - g
    }
}

/// Closed-form reference solution.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub x_derivative: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    /// Points where the solution is not smooth.
    pub breakpoints: Vec<f64>,
    /// Energy of the stationary profile, for stationary problems.
    pub stationary_energy: Option<f64>,
}

impl ExactSolution {
    pub fn value(&self, t: f64, x: f64) -> f64 {
        (self.value)(t, x)
    }

    pub fn x_derivative(&self, t: f64, x: f64) -> f64 {
        (self.x_derivative)(t, x)
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary_energy.is_some()
    }
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution")
            .field("breakpoints", &self.breakpoints)
            .field("stationary_energy", &self.stationary_energy)
            .finish_non_exhaustive()
    }
}

/// How the initial partition is laid out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialMesh {
    Uniform,
    /// Two large outer elements and `N−2` uniform elements on `[−c, c]`.
    Concentrated { half_width: f64 },
}

impl InitialMesh {
    pub fn build(&self, domain: (f64, f64), n: usize) -> Result<Partition> {
        match *self {
            Self::Uniform => Partition::uniform(domain.0, domain.1, n),
            Self::Concentrated { half_width } => {
                if n < 3 {
                    return Err(Error::InvalidSize(n));
                }
                let m = n - 2;
                let interior: Vec<f64> = (0..=m)
                    .map(|i| -half_width + 2.0 * half_width * i as f64 / m as f64)
                    .collect();
                Partition::new(domain.0, domain.1, &interior)
            }
        }
    }
}

/// Default solver settings attached to a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetDefaults {
    pub dt: f64,
    pub delta: f64,
    pub delta_tilde: f64,
    pub t_end: Option<f64>,
    pub stationary_tol: Option<f64>,
    pub n_list: Vec<usize>,
    pub snapshot_times: Vec<f64>,
}

/// Stable preset identifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PresetName {
    Example1,
    Example2,
    Example3,
    Example4,
    AllenCahn(f64),
    LinearDiffusion,
}

impl PresetName {
    pub const LISTED: [&'static str; 6] =
        ["example1", "example2", "example3", "example4", "allen_cahn(<eps>)", "linear_diffusion"];
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Example1 => write!(f, "example1"),
            Self::Example2 => write!(f, "example2"),
            Self::Example3 => write!(f, "example3"),
            Self::Example4 => write!(f, "example4"),
            Self::AllenCahn(eps) => write!(f, "allen_cahn({eps})"),
            Self::LinearDiffusion => write!(f, "linear_diffusion"),
        }
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "example1" => Self::Example1,
            "example2" => Self::Example2,
            "example3" => Self::Example3,
            "example4" => Self::Example4,
            "linear_diffusion" => Self::LinearDiffusion,
            _ => {
                let eps = s
                    .strip_prefix("allen_cahn(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::UnknownPreset(s.to_string()))?;
                if !(eps > 0.0) {
                    return Err(Error::NonpositiveEpsilon(eps));
                }
                Self::AllenCahn(eps)
            }
        })
    }
}

/// A fully specified experiment setup.
#[derive(Clone)]
pub struct Preset {
    pub name: PresetName,
    pub problem: ProblemSpec,
    pub initial: ScalarFn,
    pub initial_mesh: InitialMesh,
    pub exact: Option<ExactSolution>,
    pub defaults: PresetDefaults,
}

impl fmt::Debug for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Preset")
            .field("name", &self.name)
            .field("problem", &self.problem)
            .field("initial_mesh", &self.initial_mesh)
            .field("exact", &self.exact)
            .field("defaults", &self.defaults)
            .finish_non_exhaustive()
    }
}

impl Preset {
    pub fn initial_partition(&self, n: usize) -> Result<Partition> {
        self.initial_mesh.build(self.problem.domain, n)
    }

    /// File-name friendly label.
    pub fn label(&self) -> String {
        match self.name {
            PresetName::AllenCahn(eps) => format!("allen_cahn_{eps}"),
            other => other.to_string(),
        }
    }
}

fn hat_half(x: f64) -> f64 {
    if x < 0.5 {
        x
    } else {
        1.0 - x
    }
}

fn example1() -> Preset {
    let problem = ProblemSpec {
        alpha: 1.0,
        xi: 1.0,
        reaction: ReactionTerm::Zero,
        // The stationary part x χ_{x<1/2} + (1−x) χ_{x>1/2} has a slope jump
        // of −2 at 1/2, so the consistent point load carries weight 2.
        source: SourceTerm::Dirac { location: 0.5, weight: 2.0 },
        domain: (0.0, 1.0),
        boundary: (0.0, 0.0),
        lipschitz: Some(0.0),
    };
    let exact = ExactSolution {
        value: Arc::new(|t, x| (PI * x).sin() * (-PI * PI * t).exp() + hat_half(x)),
        x_derivative: Arc::new(|t, x| {
            PI * (PI * x).cos() * (-PI * PI * t).exp() + if x < 0.5 { 1.0 } else { -1.0 }
        }),
        breakpoints: vec![0.5],
        stationary_energy: None,
    };
    Preset {
        name: PresetName::Example1,
        problem,
        initial: Arc::new(|x| (PI * x).sin() + hat_half(x)),
        initial_mesh: InitialMesh::Uniform,
        exact: Some(exact),
        defaults: PresetDefaults {
            dt: 1e-5,
            delta: 1e-4,
            delta_tilde: 0.01,
            t_end: Some(0.04),
            stationary_tol: None,
            n_list: vec![5, 9, 19, 39, 79],
            snapshot_times: vec![0.0, 0.0012, 0.0024, 0.0036, 0.0048, 0.006, 0.009, 0.014, 0.04],
        },
    }
}

fn example2() -> Preset {
    let problem = ProblemSpec {
        alpha: 1.0,
        xi: 1.0,
        reaction: ReactionTerm::Zero,
        source: SourceTerm::None,
        domain: (-3.0, 3.0),
        boundary: (0.0, 0.0),
        lipschitz: Some(0.0),
    };
    let scale = 1.0 / (0.004 * PI).sqrt();
    let floor = (-9.0f64 / 0.004).exp();
    Preset {
        name: PresetName::Example2,
        problem,
        initial: Arc::new(move |x| scale * ((-x * x / 0.004).exp() - floor)),
        initial_mesh: InitialMesh::Concentrated { half_width: 0.2 },
        exact: None,
        defaults: PresetDefaults {
            dt: 1e-5,
            delta: 1e-4,
            delta_tilde: 0.01,
            t_end: Some(0.2),
            stationary_tol: None,
            n_list: vec![19],
            snapshot_times: vec![0.0, 0.001, 0.005, 0.02, 0.1, 0.2],
        },
    }
}

/// Allen–Cahn on `(0, 1)` with `α = ε`, `ξ = 1` and the `tanh` layer as
/// stationary reference.
pub fn allen_cahn(epsilon: f64) -> Result<Preset> {
    let reaction = reaction_allen_cahn(epsilon)?;
    let problem = ProblemSpec {
        alpha: epsilon,
        xi: 1.0,
        reaction,
        source: SourceTerm::None,
        domain: (0.0, 1.0),
        boundary: (-1.0, 1.0),
        lipschitz: None,
    };
    let width = SQRT_2 * epsilon;
    let exact = ExactSolution {
        value: Arc::new(move |_, x| ((x - 0.5) / width).tanh()),
        x_derivative: Arc::new(move |_, x| {
            let c = ((x - 0.5) / width).cosh();
            1.0 / (width * c * c)
        }),
        breakpoints: Vec::new(),
        stationary_energy: Some(2.0 * SQRT_2 / 3.0),
    };
    let name = if epsilon == 0.05 {
        PresetName::Example3
    } else if epsilon == 0.01 {
        PresetName::Example4
    } else {
        PresetName::AllenCahn(epsilon)
    };
    Ok(Preset {
        name,
        problem,
        initial: Arc::new(|x| 2.0 * (x - 0.5)),
        initial_mesh: InitialMesh::Uniform,
        exact: Some(exact),
        defaults: PresetDefaults {
            dt: 1e-5 * epsilon,
            delta: 1e-4,
            delta_tilde: 1e-4,
            t_end: Some(100.0),
            stationary_tol: Some(1e-10),
            n_list: vec![5, 10, 20, 40, 80],
            snapshot_times: vec![0.0],
        },
    })
}

fn linear_diffusion() -> Preset {
    let problem = ProblemSpec {
        alpha: 1.0,
        xi: 1.0,
        reaction: ReactionTerm::Zero,
        source: SourceTerm::None,
        domain: (0.0, 1.0),
        boundary: (0.0, 0.0),
        lipschitz: Some(0.0),
    };
    let exact = ExactSolution {
        value: Arc::new(|t, x| (PI * x).sin() * (-PI * PI * t).exp()),
        x_derivative: Arc::new(|t, x| PI * (PI * x).cos() * (-PI * PI * t).exp()),
        breakpoints: Vec::new(),
        stationary_energy: None,
    };
    Preset {
        name: PresetName::LinearDiffusion,
        problem,
        initial: Arc::new(|x| (PI * x).sin()),
        initial_mesh: InitialMesh::Uniform,
        exact: Some(exact),
        defaults: PresetDefaults {
            dt: 1e-5,
            delta: 1e-4,
            delta_tilde: 0.01,
            t_end: Some(0.04),
            stationary_tol: None,
            n_list: vec![5, 10, 20, 40],
            snapshot_times: vec![0.0, 0.04],
        },
    }
}

pub fn preset(name: PresetName) -> Result<Preset> {
    Ok(match name {
        PresetName::Example1 => example1(),
        PresetName::Example2 => example2(),
        PresetName::Example3 => allen_cahn(0.05)?,
        PresetName::Example4 => allen_cahn(0.01)?,
        PresetName::AllenCahn(eps) => allen_cahn(eps)?,
        PresetName::LinearDiffusion => linear_diffusion(),
    })
}

/// Look a preset up by its CLI identifier.
pub fn preset_by_name(name: &str) -> Result<Preset> {
    preset(name.parse()?)
}
