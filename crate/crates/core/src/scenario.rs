//! TOML scenario files.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::classical::{ControlPiece, ControlSignal, VectorFn};
use crate::error::{Error, Result};
use crate::obstruction::BatteryConfig;
use crate::pde::{ComplexField, Grid};
use crate::potentials::{PotentialConfig, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonMode {
    TStar,
    TDoubleStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Horizon {
    Fixed(f64),
    Mode(HorizonMode),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub b: f64,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    pub dt_ode: f64,
    pub dt_pde: f64,
    pub horizon: Horizon,
    pub tail_budget: f64,
    pub bound_slack: f64,
    pub min_points: usize,
    /// Snapshot every this many PDE steps in `propagate`; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            dt_ode: 1e-3,
            dt_pde: 2.5e-4,
            horizon: Horizon::Mode(HorizonMode::TDoubleStar),
            tail_budget: 1e-10,
            bound_slack: 1e-5,
            min_points: 0,
            snapshot_every: 0,
        }
    }
}

/// A single control: either one closed-form `field` on the whole horizon or
/// explicit `pieces` starting at 0.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<VectorFn>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pieces: Vec<ControlPiece>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    /// Two bumps at `±offset·e₁`; `offset` defaults to `4·b^{−1/2}`.
    DoubleBump {
        #[serde(default)]
        offset: Option<f64>,
    },
    Bumps {
        centers: Vec<Vec<f64>>,
    },
    /// CSV written by `ComplexField::write_csv`; relative paths resolve
    /// against the scenario file's directory.
    FieldFile {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<BatteryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetConfig>,
    /// Directory used to resolve relative paths; set by [`Scenario::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

pub const DEFAULTS_TOML: &str = r#"# Scenario defaults. Every key below may be omitted except [potential]
# and [initial].

seed = 0                 # trial i of the battery uses seed ^ i
output_dir = "out"       # overridden by --out

[potential]
# kind = "zero" (dim), "harmonic" (omega_sq) or "cosine_harmonic"
# V(x) = ½⟨x, Ω x⟩ + amplitude·cos⟨k, x⟩
kind = "cosine_harmonic"
omega_sq = [[1.0]]
amplitude = 0.1
wavevector = [2.0]

[initial]
b = 1.0
x0 = [0.0]
v0 = [0.0]

[numerics]
dt_ode = 0.001
dt_pde = 0.00025
horizon = "t_double_star"  # a number, "t_star" or "t_double_star"
tail_budget = 1e-10
bound_slack = 1e-5        # solver slack when comparing to the TCS error bound
min_points = 0            # lower bound on grid points per axis
snapshot_every = 0        # propagate: snapshot every n PDE steps, 0 = off

# [grid]                  # optional; otherwise sized from the trajectories
# lo = [-16.0]
# hi = [16.0]
# points = [512]

# [control]               # propagate: one field on the whole horizon ...
# field = { kind = "sinusoid", amplitude = [10.0], angular_freq = 1.0, phase = 0.0 }
# pieces = [              # ... or explicit pieces starting at t = 0
#   { t_start = 0.0, t_end = 0.1, kind = "constant", value = [100.0] },
#   { t_start = 0.1, t_end = 0.2, kind = "linear", value0 = [100.0], slope = [-500.0] },
# ]
# obstruct uses [control] instead of the battery when it is present.

[battery]
a_max = 100.0
size = 32
random_pieces = 8
# toward = [1.0]          # direction of the push-then-brake control

[target]
kind = "double_bump"      # or "bumps" (centers) or "field_file" (path)
# offset = 4.0            # default 4/sqrt(b)
"#;

impl Default for Scenario {
    fn default() -> Self {
        Self::parse(DEFAULTS_TOML).expect("built-in defaults parse")
    }
}

/// Scenario with every derived object built and validated.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub scenario: Scenario,
    pub potential: PotentialSpec,
    pub b: f64,
    pub x0: DVector<f64>,
    pub v0: DVector<f64>,
    pub target: Option<ResolvedTarget>,
}

#[derive(Debug, Clone)]
pub enum ResolvedTarget {
    Bumps(Vec<Vec<f64>>),
    Field(ComplexField),
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut s = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        let cfg = |m: String| Error::Config(m);
        let potential = PotentialSpec::from_config(&self.potential).map_err(|e| cfg(format!("[potential]: {e}")))?;
        let dim = potential.dim();
        let init = &self.initial;
        if !(init.b > 0.0 && init.b.is_finite()) {
            return Err(cfg(format!("[initial] b must be positive, got {}", init.b)));
        }
        for (name, v) in [("x0", &init.x0), ("v0", &init.v0)] {
            if v.len() != dim {
                return Err(cfg(format!("[initial] {name} has length {}, potential dimension is {dim}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(cfg(format!("[initial] {name} has non-finite entries")));
            }
        }
        let n = &self.numerics;
        for (name, v) in [("dt_ode", n.dt_ode), ("dt_pde", n.dt_pde), ("tail_budget", n.tail_budget)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(cfg(format!("[numerics] {name} must be positive, got {v}")));
            }
        }
        if !(n.bound_slack >= 0.0) {
            return Err(cfg(format!("[numerics] bound_slack must be >= 0, got {}", n.bound_slack)));
        }
        match n.horizon {
            Horizon::Fixed(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(cfg(format!("[numerics] horizon must be positive, got {t}")));
            }
            Horizon::Mode(HorizonMode::TDoubleStar) if self.target.is_none() => {
                return Err(cfg("[numerics] horizon = \"t_double_star\" requires a [target]".into()));
            }
            _ => {}
        }
        if let Some(g) = &self.grid {
            if g.dim() != dim {
                return Err(cfg(format!("[grid] has dimension {}, potential dimension is {dim}", g.dim())));
            }
            Grid::new(g.lo.clone(), g.hi.clone(), g.points.clone()).map_err(|e| cfg(format!("[grid]: {e}")))?;
        }
        if let Some(c) = &self.control {
            match (&c.field, c.pieces.is_empty()) {
                (Some(_), false) => return Err(cfg("[control] takes either field or pieces, not both".into())),
                (None, true) => return Err(cfg("[control] needs field or pieces".into())),
                _ => {}
            }
            let probe = match &c.field {
                Some(_) => self.control_on(1.0),
                None => ControlSignal::new(c.pieces.clone()),
            }
            .map_err(|e| cfg(format!("[control]: {e}")))?;
            if probe.dim() != dim {
                return Err(cfg(format!("[control] has dimension {}, potential dimension is {dim}", probe.dim())));
            }
        }
        if let Some(b) = &self.battery {
            if !(b.a_max >= 0.0 && b.a_max.is_finite()) {
                return Err(cfg(format!("[battery] a_max must be >= 0, got {}", b.a_max)));
            }
            if b.size == 0 {
                return Err(Error::EmptyControlSet);
            }
            if let Some(t) = &b.toward {
                if t.len() != dim {
                    return Err(cfg(format!("[battery] toward has length {}, expected {dim}", t.len())));
                }
            }
        }
        let target = match &self.target {
            None => None,
            Some(TargetConfig::DoubleBump { offset }) => {
                let o = offset.unwrap_or(4.0 / init.b.sqrt());
                let mut c = vec![0.0; dim];
                c[0] = o;
                let neg: Vec<f64> = c.iter().map(|v| -v).collect();
                Some(ResolvedTarget::Bumps(vec![neg, c]))
            }
            Some(TargetConfig::Bumps { centers }) => {
                if centers.is_empty() || centers.iter().any(|c| c.len() != dim) {
                    return Err(cfg(format!("[target] centers must be a non-empty list of length-{dim} points")));
                }
                Some(ResolvedTarget::Bumps(centers.clone()))
            }
            Some(TargetConfig::FieldFile { path }) => {
                let full = if path.is_absolute() { path.clone() } else { self.base_dir.join(path) };
                let file = std::fs::File::open(&full)
                    .map_err(|e| cfg(format!("[target] cannot open {}: {e}", full.display())))?;
                let f = ComplexField::read_csv(std::io::BufReader::new(file))
                    .map_err(|e| cfg(format!("[target] {}: {e}", full.display())))?;
                Some(ResolvedTarget::Field(f))
            }
        };
        Ok(ResolvedScenario {
            scenario: self.clone(),
            potential,
            b: init.b,
            x0: DVector::from_column_slice(&init.x0),
            v0: DVector::from_column_slice(&init.v0),
            target,
        })
    }

    /// The configured control on `[0, horizon]` (zero control when absent).
    pub fn control_on(&self, horizon: f64) -> Result<ControlSignal> {
        let dim = self.initial.x0.len();
        match &self.control {
            None => ControlSignal::zero(dim, horizon),
            Some(ControlConfig { field: Some(f), .. }) => {
                ControlSignal::new(vec![ControlPiece { t_start: 0.0, t_end: horizon, field: f.clone() }])
            }
            Some(c) => {
                let full = ControlSignal::new(c.pieces.clone())?;
                if full.horizon() < horizon * (1.0 - 1e-12) {
                    return Err(Error::HorizonNotCovered { requested: horizon, covered: full.horizon() });
                }
                full.truncated(horizon)
            }
        }
    }

    pub fn battery_config(&self) -> BatteryConfig {
        self.battery.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let d = Scenario::default();
        assert_eq!(d.numerics, NumericsConfig::default());
        assert_eq!(d.battery_config(), BatteryConfig::default());
        assert!(matches!(d.target, Some(TargetConfig::DoubleBump { offset: None })));
        let again = Scenario::parse(&d.to_toml()).unwrap();
        assert_eq!(again, d);
        d.resolve().unwrap();
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let s = Scenario::parse(
            "[potential]\nkind = \"harmonic\"\nomega_sq = [[1.0]]\n[initial]\nb = 1.0\nx0 = [0.0]\nv0 = [0.5]\n[numerics]\nhorizon = 1.0\n",
        )
        .unwrap();
        assert_eq!(s.seed, 0);
        assert_eq!(s.numerics.horizon, Horizon::Fixed(1.0));
        let r = s.resolve().unwrap();
        assert!(r.target.is_none());
        assert_eq!(s.control_on(1.0).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn errors_carry_location() {
        let e = Scenario::parse("[potential]\nkind = \"harmonic\"\nomega_sq = [[1.0]]\nbogus = 3\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("bogus") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn semantic_errors() {
        let base = Scenario::default();
        let mut s = base.clone();
        s.initial.x0 = vec![0.0, 1.0];
        assert!(matches!(s.resolve(), Err(Error::Config(_))));
        let mut s = base.clone();
        s.target = None;
        assert!(s.resolve().unwrap_err().to_string().contains("t_double_star"));
        let mut s = base.clone();
        s.target = Some(TargetConfig::FieldFile { path: "does/not/exist.csv".into() });
        assert!(matches!(s.resolve(), Err(Error::Config(_))));
        let mut s = base;
        s.control = Some(ControlConfig { field: None, pieces: vec![] });
        assert!(matches!(s.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn control_forms() {
        let s = Scenario {
            control: Some(ControlConfig {
                field: None,
                pieces: vec![
                    ControlPiece { t_start: 0.0, t_end: 0.1, field: VectorFn::Constant { value: vec![1.0] } },
                    ControlPiece { t_start: 0.1, t_end: 0.3, field: VectorFn::Constant { value: vec![-1.0] } },
                ],
            }),
            ..Default::default()
        };
        s.resolve().unwrap();
        let u = s.control_on(0.2).unwrap();
        assert_eq!(u.horizon(), 0.2);
        assert_eq!(u.pieces().len(), 2);
        assert!(matches!(s.control_on(0.5), Err(Error::HorizonNotCovered { .. })));
        let text = "[potential]\nkind = \"zero\"\ndim = 1\n[initial]\nb = 1.0\nx0 = [0.0]\nv0 = [0.0]\n\
                    [numerics]\nhorizon = \"t_star\"\n\
                    [control]\nfield = { kind = \"sinusoid\", amplitude = [2.0], angular_freq = 1.0, phase = 0.0 }\n";
        let s = Scenario::parse(text).unwrap();
        s.resolve().unwrap();
        assert_eq!(s.control_on(0.3).unwrap().sup_norm(), 2.0);
    }
}
