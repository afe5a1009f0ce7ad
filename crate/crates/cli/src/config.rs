//! TOML run configuration. Every table rejects unknown keys; flags given on
//! the command line override file values.

use std::path::Path;

use anyhow::{bail, Context, Result};
use lensflow_core::flow::FlowConfig;
use lensflow_core::geometry::InitialLens;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    CircularArc,
    SelfSimilar,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub kind: InitKind,
    pub width: f64,
    pub center: f64,
    /// Scale of the self-similar profile.
    pub scale: f64,
    /// Bump amplitude for perturbed data.
    pub amplitude: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            kind: InitKind::CircularArc,
            width: 2.0,
            center: 0.0,
            scale: 1.0,
            amplitude: 0.1,
        }
    }
}

impl InitConfig {
    pub fn to_initial(&self) -> InitialLens {
        match self.kind {
            InitKind::CircularArc => InitialLens::CircularArc {
                width: self.width,
                center: self.center,
            },
            InitKind::SelfSimilar => InitialLens::ScaledSelfSimilar {
                scale: self.scale,
                center: self.center,
            },
            InitKind::Perturbed => InitialLens::Perturbed {
                width: self.width,
                center: self.center,
                amplitude: self.amplitude,
                require_convex: false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlowupConfig {
    pub lambdas: Vec<f64>,
    pub tau: f64,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        BlowupConfig {
            lambdas: vec![2.0, 4.0, 8.0, 16.0],
            tau: -0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelfsimConfig {
    pub tol: f64,
    pub dx: f64,
}

impl Default for SelfsimConfig {
    fn default() -> Self {
        SelfsimConfig {
            tol: 1e-10,
            dx: lensflow_core::shooting::DEFAULT_DX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolConfig {
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub init: InitConfig,
    pub flow: FlowConfig,
    pub blowup: BlowupConfig,
    pub selfsim: SelfsimConfig,
    pub energy: Option<TolConfig>,
    pub fish: Option<TolConfig>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        let tols = [
            ("selfsim.tol", Some(self.selfsim.tol)),
            ("selfsim.dx", Some(self.selfsim.dx)),
            ("energy.tol", self.energy.as_ref().map(|t| t.tol)),
            ("fish.tol", self.fish.as_ref().map(|t| t.tol)),
        ];
        for (name, v) in tols {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    bail!("{name} must be positive, got {v}");
                }
            }
        }
        if !(self.blowup.tau < 0.0) {
            bail!("blowup.tau must be negative, got {}", self.blowup.tau);
        }
        if self.blowup.lambdas.is_empty() || self.blowup.lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            bail!("blowup.lambdas must be non-empty and strictly increasing");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let c: RunConfig = toml::from_str(
            r#"
            [init]
            kind = "perturbed"
            amplitude = 0.05
            [flow]
            n = 128
            scheme = "semi_implicit"
            cfl = 2.0
            [blowup]
            lambdas = [2.0, 4.0]
            "#,
        )
        .unwrap();
        assert_eq!(c.init.kind, InitKind::Perturbed);
        assert_eq!(c.flow.n, 128);
        assert_eq!(c.blowup.lambdas, vec![2.0, 4.0]);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<RunConfig>("[flow]\nnn = 3\n").is_err());
        assert!(toml::from_str::<RunConfig>("[other]\n").is_err());
    }

    #[test]
    fn rejects_bad_tolerances() {
        let mut c = RunConfig::default();
        c.selfsim.tol = 0.0;
        assert!(c.validate().is_err());
        let c: RunConfig = toml::from_str("[fish]\ntol = -1.0\n").unwrap();
        assert!(c.validate().is_err());
    }
}
