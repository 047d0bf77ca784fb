//! Run configuration, read from TOML.
//!
//! ```toml
//! command = "reduce"          # optional; must match the CLI command if given
//! m = 9
//! eps_ladder = [3.90625e-3, 9.765625e-4, 2.44140625e-4, 6.103515625e-5]
//! t_interval = [0.25, 4.0]    # optional
//! output_dir = "out"          # optional, --out wins
//!
//! [model]                     # or: model = "flat-weighted"
//! kind = "flat"               # flat | sphere | perturbed
//! chart_radius = 1.0
//! a0 = 1.0
//! a_curvature = 2.0           # a = a0 + (c/2)|y|^2
//! h = 1.0
//!
//! [grid]
//! kind = "radial"
//! hz = 0.005208333333333333
//! growth = 2e-4
//! max_cells = 400000
//!
//! [tolerances]
//! t_rel = 0.1
//!
//! [conventions]
//! theta = "verified"
//! lock_a = "printed"
//! fourth_moment = "printed"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bubble::Dimension;
use crate::discrete::GridSpec;
use crate::energy::identities::LockTarget;
use crate::energy::phi::ThetaConvention;
use crate::error::{BlabError, Result};
use crate::geometry::model::{flat, perturbed_flat, round_sphere, ManifoldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyIdentities,
    FitExpansion,
    Reduce,
    Continuation,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyIdentities => "verify-identities",
            Command::FitExpansion => "fit-expansion",
            Command::Reduce => "reduce",
            Command::Continuation => "continuation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Flat,
    Sphere,
    Perturbed,
}

/// Second-order model of the chart: metric jet, weight a and potential h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub chart_radius: f64,
    #[serde(default = "one")]
    pub a0: f64,
    /// isotropic D^2 a = c I
    #[serde(default)]
    pub a_curvature: f64,
    /// full D^2 a, row-major (overrides a_curvature)
    #[serde(default)]
    pub a_hess: Option<Vec<f64>>,
    #[serde(default)]
    pub h: f64,
    /// curvature radius for kind = "sphere"
    #[serde(default = "one")]
    pub sphere_radius: f64,
    /// jet amplitude for kind = "perturbed" (the jet is drawn from --seed)
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

fn default_amplitude() -> f64 {
    0.1
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            kind: ModelKind::Flat,
            chart_radius: 1.0,
            a0: 1.0,
            a_curvature: 0.0,
            a_hess: None,
            h: 0.0,
            sphere_radius: 1.0,
            amplitude: default_amplitude(),
        }
    }
}

/// Catalog names accepted in place of a [model] table.
pub const CATALOG: &[&str] = &["flat", "flat-weighted", "flat-weighted-negative", "round-sphere"];

impl ModelSpec {
    pub fn catalog(name: &str) -> Result<Self> {
        let base = ModelSpec::default();
        Ok(match name {
            "flat" => base,
            // a = 1 + |y|^2, h = 1: Theta > 0
            "flat-weighted" => ModelSpec {
                a_curvature: 2.0,
                h: 1.0,
                ..base
            },
            // a = 1 + |y|^2, h = -20: Theta < 0
            "flat-weighted-negative" => ModelSpec {
                a_curvature: 2.0,
                h: -20.0,
                ..base
            },
            "round-sphere" => ModelSpec {
                kind: ModelKind::Sphere,
                ..base
            },
            other => {
                return Err(BlabError::Config(format!(
                    "unknown model '{other}' (catalog: {})",
                    CATALOG.join(", ")
                )))
            }
        })
    }

    pub fn build(&self, m: Dimension, seed: u64) -> Result<ManifoldModel> {
        let base = match self.kind {
            ModelKind::Flat => flat(m, self.chart_radius)?,
            ModelKind::Sphere => round_sphere(m, self.sphere_radius, self.chart_radius)?,
            ModelKind::Perturbed => perturbed_flat(m, seed, self.amplitude, self.chart_radius)?,
        };
        let n = m.get();
        let model = match &self.a_hess {
            Some(h) => {
                if h.len() != n * n {
                    return Err(BlabError::Config(format!("model.a_hess needs {} entries, got {}", n * n, h.len())));
                }
                base.with_weight(self.a0, vec![0.0; n], h.clone())?
            }
            None => base.with_isotropic_weight(self.a0, self.a_curvature)?,
        };
        Ok(model.with_h(self.h))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEntry {
    Name(String),
    Spec(ModelSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FourthMomentForm {
    /// factor 1/2 in front of the delta-symmetrization
    #[default]
    Printed,
    /// factor 1/3
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Conventions {
    #[serde(default)]
    pub theta: ThetaConvention,
    #[serde(default)]
    pub lock_a: LockTarget,
    #[serde(default)]
    pub fourth_moment: FourthMomentForm,
}

/// Tolerances and their defaults. Every value must be positive.
pub const TOLERANCE_DEFAULTS: &[(&str, f64)] = &[
    ("bubble_residual", 1e-10),
    ("moment", 1e-10),
    ("recurrence", 1e-12),
    ("anchor", 1e-10),
    ("identity", 1e-9),
    ("curvature", 1e-12),
    ("a_m", 1e-6),
    ("b_over_d", 0.05),
    ("h_shift", 0.05),
    ("ls_tol", 1e-13),
    ("newton_tol", 1e-7),
    ("contraction", 1.0),
    ("phi_variation", 2.0),
    ("t_rel", 0.10),
    ("width", 0.15),
    ("grad_slope", 0.10),
    ("orthogonality", 1e-9),
    ("adjoint", 1e-9),
    ("multiplier_exponent_lo", 0.35),
    ("multiplier_exponent_hi", 0.65),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default = "default_m")]
    pub m: usize,
    /// dimensions for the bubble and moment checks of verify-identities
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub model: Option<ModelEntry>,
    #[serde(default)]
    pub eps_ladder: Option<Vec<f64>>,
    #[serde(default)]
    pub t_interval: Option<(f64, f64)>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub conventions: Conventions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// fit-expansion: base t, second t for the log t coefficient, h shift
    #[serde(default)]
    pub fit: FitSettings,
    /// reduce: number of grid levels in the refinement study (0 skips it)
    #[serde(default = "default_levels")]
    pub refinement_levels: usize,
    /// reduce: refuse runs outside the existence regime
    #[serde(default = "yes")]
    pub enforce_regime: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "two")]
    pub t2: f64,
    #[serde(default = "one")]
    pub dh: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings { t: 1.0, t2: 2.0, dh: 1.0 }
    }
}

fn two() -> f64 {
    2.0
}

fn yes() -> bool {
    true
}

fn default_m() -> usize {
    9
}

fn default_dims() -> Vec<usize> {
    vec![5, 6, 9, 12]
}

fn default_levels() -> usize {
    3
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            m: default_m(),
            dims: default_dims(),
            model: None,
            eps_ladder: None,
            t_interval: None,
            grid: None,
            tolerances: BTreeMap::new(),
            conventions: Conventions::default(),
            output_dir: None,
            fit: FitSettings::default(),
            refinement_levels: default_levels(),
            enforce_regime: true,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| BlabError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BlabError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        Dimension::new(self.m).map_err(|e| BlabError::Config(e.to_string()))?;
        for &d in &self.dims {
            Dimension::new(d).map_err(|e| BlabError::Config(format!("dims: {e}")))?;
        }
        for (k, v) in &self.tolerances {
            if !TOLERANCE_DEFAULTS.iter().any(|(n, _)| n == k) {
                return Err(BlabError::Config(format!("unknown tolerance '{k}'")));
            }
            if !(*v > 0.0) || !v.is_finite() {
                return Err(BlabError::Config(format!("tolerance '{k}' must be positive, got {v}")));
            }
        }
        if let Some(l) = &self.eps_ladder {
            validate_ladder(l)?;
        }
        if let Some((a, b)) = self.t_interval {
            if !(a > 0.0 && b > a) {
                return Err(BlabError::Config(format!("t_interval needs 0 < alpha < beta, got [{a}, {b}]")));
            }
        }
        if let Some(ModelEntry::Name(n)) = &self.model {
            ModelSpec::catalog(n)?;
        }
        let f = self.fit;
        if !(f.t > 0.0 && f.t2 > 0.0 && f.t != f.t2) {
            return Err(BlabError::Config("fit.t and fit.t2 must be positive and distinct".into()));
        }
        Ok(())
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| {
            TOLERANCE_DEFAULTS
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .expect("tolerance name is registered")
        })
    }

    pub fn dimension(&self) -> Dimension {
        Dimension::new(self.m).expect("validated")
    }

    /// The model for `command`, falling back to the command's default.
    pub fn model_spec(&self, command: Command) -> Result<ModelSpec> {
        match &self.model {
            Some(ModelEntry::Name(n)) => ModelSpec::catalog(n),
            Some(ModelEntry::Spec(s)) => Ok(s.clone()),
            None => ModelSpec::catalog(match command {
                Command::Reduce | Command::Continuation => "flat-weighted",
                _ => "flat",
            }),
        }
    }

    pub fn build_model(&self, command: Command, seed: u64) -> Result<ManifoldModel> {
        self.model_spec(command)?.build(self.dimension(), seed)
    }

    /// The eps ladder, or the command's default.
    pub fn ladder(&self, command: Command) -> Vec<f64> {
        if let Some(l) = &self.eps_ladder {
            return l.clone();
        }
        match command {
            // magnitudes; both signs are fitted
            Command::FitExpansion => (0..=16).map(|i| 2f64.powf(-6.0 - 0.5 * i as f64)).collect(),
            Command::Reduce => [8, 10, 12, 14].iter().map(|k| 2f64.powi(-k)).collect(),
            Command::Continuation => (16..=28).map(|i| 2f64.powf(-0.5 * i as f64)).collect(),
            Command::VerifyIdentities => Vec::new(),
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.unwrap_or_default()
    }
}

/// Strictly decreasing |eps|, one sign, no zeros.
pub fn validate_ladder(l: &[f64]) -> Result<()> {
    if l.is_empty() {
        return Err(BlabError::Config("eps_ladder is empty".into()));
    }
    if l.iter().any(|e| *e == 0.0 || !e.is_finite()) {
        return Err(BlabError::Config("eps_ladder entries must be finite and nonzero".into()));
    }
    if !l.iter().all(|e| (*e > 0.0) == (l[0] > 0.0)) {
        return Err(BlabError::Config("eps_ladder must not mix signs".into()));
    }
    if !l.windows(2).all(|w| w[1].abs() < w[0].abs()) {
        return Err(BlabError::Config("eps_ladder must be strictly decreasing in |eps|".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c.m, 9);
        assert_eq!(c.tol("t_rel"), 0.10);
    }

    #[test]
    fn catalog_and_table_models() {
        let c = RunConfig::from_toml("model = \"flat-weighted\"").unwrap();
        let m = c.build_model(Command::Reduce, 0).unwrap();
        assert_eq!(m.h0, 1.0);
        let c = RunConfig::from_toml("[model]\nkind = \"sphere\"\nsphere_radius = 2.0\n").unwrap();
        assert!(c.build_model(Command::Reduce, 0).unwrap().scalar_curvature() > 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_toml("eps_ladder = [0.01, 0.02]").is_err());
        assert!(RunConfig::from_toml("eps_ladder = [0.01, -0.001]").is_err());
        assert!(RunConfig::from_toml("[tolerances]\nt_rel = -1.0").is_err());
        assert!(RunConfig::from_toml("[tolerances]\nbogus = 1.0").is_err());
        assert!(RunConfig::from_toml("model = \"nowhere\"").is_err());
        assert!(RunConfig::from_toml("m = 2").is_err());
        assert!(RunConfig::from_toml("m = ").is_err());
    }

    #[test]
    fn grid_table() {
        let c = RunConfig::from_toml("[grid]\nkind = \"tensor\"\nn = 12\n").unwrap();
        assert!(matches!(c.grid_spec(), GridSpec::Tensor(t) if t.n == 12 && t.min_nodes_per_delta == 8.0));
    }
}
