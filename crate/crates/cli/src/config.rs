//! Run configuration: one structured JSON file per run, every field
//! overridable, all defaults documented here.
//!
//! Complex numbers are two-element arrays `[re, im]` everywhere. A minimal
//! config is `{}`: every command has a bundled default parameter regime
//! (generic for operator checks, starting-range for the integral checks,
//! theta-level regime for the theta-property checks). The resolved
//! configuration is echoed into every result record, so a record is a
//! complete, reproducible description of its run.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use qkzb_core::hyper::{QuadratureSpec, Xi};
use qkzb_core::presets;
use qkzb_core::space::{ModelParams, NumericOptions};
use qkzb_core::theta::TruncationPolicy;

/// A complex number serialized as `[re, im]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Cpx(pub [f64; 2]);

impl From<Cpx> for C64 {
    fn from(c: Cpx) -> C64 {
        C64::new(c.0[0], c.0[1])
    }
}

impl From<C64> for Cpx {
    fn from(c: C64) -> Cpx {
        Cpx([c.re, c.im])
    }
}

fn to_c(v: &[Cpx]) -> Vec<C64> {
    v.iter().map(|&c| c.into()).collect()
}

fn from_c(v: &[C64]) -> Vec<Cpx> {
    v.iter().map(|&c| c.into()).collect()
}

/// Model parameters as they appear in the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsConfig {
    pub tau: Cpx,
    pub p: Cpx,
    pub eta: Cpx,
    pub lambdas: Vec<Cpx>,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadConfig {
    pub points_per_dim: usize,
    pub n_torus: usize,
    pub min_pole_distance: f64,
    pub richardson: bool,
    pub rel_tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        QuadConfig {
            points_per_dim: q.points_per_dim,
            n_torus: q.n_torus,
            min_pole_distance: q.min_pole_distance,
            richardson: q.richardson,
            rel_tol: q.rel_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncConfig {
    pub target_rel_err: f64,
    pub max_terms: usize,
}

impl Default for TruncConfig {
    fn default() -> Self {
        let t = TruncationPolicy::default();
        TruncConfig {
            target_rel_err: t.target_rel_err,
            max_terms: t.max_terms,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiConfig {
    One,
    ThetaLevel { level: u32 },
}

/// Arguments of the `rmatrix` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RMatrixConfig {
    pub weight_a: Cpx,
    pub weight_b: Cpx,
    pub z: Cpx,
    pub lambda: Cpx,
    pub max_level: usize,
}

impl Default for RMatrixConfig {
    fn default() -> Self {
        RMatrixConfig {
            weight_a: Cpx([1.0, 0.0]),
            weight_b: Cpx([1.0, 0.0]),
            z: Cpx([0.23, 0.05]),
            lambda: Cpx([0.31, 0.21]),
            max_level: 1,
        }
    }
}

/// The raw config file: every field optional, unset fields fall back to the
/// command's bundled defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: Option<ParamsConfig>,
    pub z: Option<Vec<Cpx>>,
    pub lambda_samples: Option<Vec<Cpx>>,
    pub mu_samples: Option<Vec<Cpx>>,
    pub quad: Option<QuadConfig>,
    pub trunc: Option<TruncConfig>,
    pub xi: Option<XiConfig>,
    pub seed: Option<u64>,
    pub tol_scale: Option<f64>,
    pub rmatrix: Option<RMatrixConfig>,
    /// Linear functional contracting the second slot of u in `solve`.
    pub functional: Option<Vec<Cpx>>,
    /// s in μ = 2η(m+2s) for the theta-level checks.
    pub theta_s: Option<i64>,
}

/// Which parameter regime a command defaults to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    Generic,
    StartingRange,
    ThetaLevel,
}

/// Fully resolved configuration, echoed into every result record.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub params: ParamsConfig,
    pub z: Vec<Cpx>,
    pub lambda_samples: Vec<Cpx>,
    pub mu_samples: Vec<Cpx>,
    pub quad: QuadConfig,
    pub trunc: TruncConfig,
    pub xi: XiConfig,
    pub seed: u64,
    pub tol_scale: f64,
    pub rmatrix: RMatrixConfig,
    pub functional: Vec<Cpx>,
    pub theta_s: i64,
}

impl ResolvedConfig {
    /// Merge the raw config over the bundled defaults of a regime.
    pub fn resolve(raw: &RunConfig, regime: RegimeKind) -> Self {
        let (params, z) = match regime {
            RegimeKind::Generic => (presets::generic_n2(), default_generic_z()),
            RegimeKind::StartingRange => {
                (presets::starting_range_n2(), presets::starting_range_z())
            }
            RegimeKind::ThetaLevel => (presets::theta_level_n2(), presets::starting_range_z()),
        };
        let params_cfg = raw.params.clone().unwrap_or(ParamsConfig {
            tau: params.tau.into(),
            p: params.p.into(),
            eta: params.eta.into(),
            lambdas: from_c(&params.lambdas),
            m: params.m,
        });
        let xi_default = match regime {
            RegimeKind::ThetaLevel => XiConfig::ThetaLevel { level: 1 },
            _ => XiConfig::One,
        };
        let quad_default = match regime {
            RegimeKind::ThetaLevel => QuadConfig {
                points_per_dim: 64,
                ..QuadConfig::default()
            },
            _ => QuadConfig::default(),
        };
        ResolvedConfig {
            params: params_cfg,
            z: raw.z.clone().unwrap_or_else(|| from_c(&z)),
            lambda_samples: raw
                .lambda_samples
                .clone()
                .unwrap_or_else(|| from_c(&presets::lambda_samples())),
            mu_samples: raw
                .mu_samples
                .clone()
                .unwrap_or_else(|| from_c(&presets::mu_samples())),
            quad: raw.quad.clone().unwrap_or(quad_default),
            trunc: raw.trunc.clone().unwrap_or_default(),
            xi: raw.xi.clone().unwrap_or(xi_default),
            seed: raw.seed.unwrap_or(0x5eed),
            tol_scale: raw.tol_scale.unwrap_or(1.0),
            rmatrix: raw.rmatrix.clone().unwrap_or_default(),
            functional: raw
                .functional
                .clone()
                .unwrap_or_else(|| vec![Cpx([1.0, 0.0]), Cpx([0.7, -0.4])]),
            theta_s: raw.theta_s.unwrap_or(0),
        }
    }

    pub fn model_params(&self) -> qkzb_core::error::Result<ModelParams> {
        let trunc = TruncationPolicy::new(self.trunc.target_rel_err, self.trunc.max_terms)?;
        let opts = NumericOptions {
            seed: self.seed,
            ..NumericOptions::default()
        };
        ModelParams::new(
            self.params.tau.into(),
            self.params.p.into(),
            self.params.eta.into(),
            self.params.lambdas.iter().map(|&c| c.into()).collect(),
            self.params.m,
            trunc,
            opts,
        )
    }

    pub fn z_points(&self) -> Vec<C64> {
        to_c(&self.z)
    }

    pub fn lambdas(&self) -> Vec<C64> {
        to_c(&self.lambda_samples)
    }

    pub fn mus(&self) -> Vec<C64> {
        to_c(&self.mu_samples)
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            points_per_dim: self.quad.points_per_dim,
            n_torus: self.quad.n_torus,
            min_pole_distance: self.quad.min_pole_distance,
            richardson: self.quad.richardson,
            rel_tol: self.quad.rel_tol,
        }
    }

    pub fn xi_value(&self) -> Xi {
        match self.xi {
            XiConfig::One => Xi::one(),
            XiConfig::ThetaLevel { level } => Xi::theta_level(level),
        }
    }

    pub fn functional_values(&self) -> Vec<C64> {
        to_c(&self.functional)
    }
}

fn default_generic_z() -> Vec<C64> {
    vec![C64::new(0.13, 0.04), C64::new(-0.21, 0.07)]
}
