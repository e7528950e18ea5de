//! JSON run configuration and system resolution.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use singode::block::{reduce, PolyBlocks};
use singode::builtins::{load_example, EXAMPLE_NAMES};
use singode::hypotheses::{EquilibriumManifold, HypothesisOptions};
use singode::inline::PolySystem;
use singode::navier_stokes::{ns_equilibrium_manifold, ns_profile_ode, GasModel};
use singode::system::SystemSpec;

pub const NAVIER_STOKES: &str = "navier_stokes";

/// E = {base + D p}; `directions` are the columns of D.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineEquilibria {
    pub base: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InlineSystem {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub poly: PolySystem,
    #[serde(default)]
    pub origin: Option<Vec<f64>>,
    #[serde(default)]
    pub equilibria: Option<AffineEquilibria>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub blocks: PolyBlocks,
    pub anchor: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemConfig {
    Named(String),
    Blocks(BlockConfig),
    Inline(InlineSystem),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub tol_s: Option<f64>,
    pub tol_grad: Option<f64>,
    pub tol_h4: Option<f64>,
    pub tol_h5: Option<f64>,
    pub tol_eq: Option<f64>,
    pub tol_rank: Option<f64>,
    pub tol_center: Option<f64>,
    pub tol_mfd: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemConfig>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub u0: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub output_step: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub order: Option<usize>,
    pub half_width: Option<f64>,
    pub n_samples: Option<usize>,
    pub n_base: Option<usize>,
    pub tolerances: Tolerances,
    pub gas: Option<GasModel>,
    pub sigma: Option<f64>,
    /// (ρ, e) of the NS anchor on v = σ.
    pub anchor: Option<[f64; 2]>,
    pub left_state: Option<[f64; 3]>,
    pub amplitude: Option<f64>,
    pub length: Option<f64>,
    pub spacing: Option<f64>,
}

fn check_positive(name: &str, v: Option<f64>) -> Result<()> {
    if let Some(x) = v {
        if !(x > 0.0 && x.is_finite()) {
            bail!("{name} must be positive, got {x}");
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tol_s", t.tol_s),
            ("tol_grad", t.tol_grad),
            ("tol_h4", t.tol_h4),
            ("tol_h5", t.tol_h5),
            ("tol_eq", t.tol_eq),
            ("tol_rank", t.tol_rank),
            ("tol_center", t.tol_center),
            ("tol_mfd", t.tol_mfd),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("horizon", self.horizon),
            ("output_step", self.output_step),
            ("half_width", self.half_width),
            ("length", self.length),
            ("spacing", self.spacing),
        ] {
            check_positive(name, v)?;
        }
        if let Some(SystemConfig::Inline(s)) = &self.system {
            s.poly.validate()?;
        }
        if let Some(SystemConfig::Blocks(b)) = &self.system {
            b.blocks.validate()?;
        }
        Ok(())
    }

    pub fn hypothesis_options(&self) -> HypothesisOptions {
        let d = HypothesisOptions::default();
        let t = &self.tolerances;
        HypothesisOptions {
            tol_s: t.tol_s.unwrap_or(d.tol_s),
            tol_grad: t.tol_grad.unwrap_or(d.tol_grad),
            tol_h4: t.tol_h4.unwrap_or(d.tol_h4),
            tol_h5: t.tol_h5.unwrap_or(d.tol_h5),
            tol_eq: t.tol_eq.unwrap_or(d.tol_eq),
            tol_rank: t.tol_rank.unwrap_or(d.tol_rank),
            tol_center: t.tol_center.unwrap_or(d.tol_center),
            half_width: self.half_width.unwrap_or(d.half_width),
            n_samples: self.n_samples.unwrap_or(d.n_samples),
            seed: self.seed.unwrap_or(d.seed),
            cm_order: self.order.unwrap_or(d.cm_order),
            ..d
        }
    }

    pub fn gas(&self) -> GasModel {
        self.gas.unwrap_or_default()
    }
}

pub struct Resolved {
    pub name: String,
    pub spec: SystemSpec,
    pub eq: Option<EquilibriumManifold>,
}

pub fn resolve(cfg: &RunConfig) -> Result<Resolved> {
    let Some(system) = &cfg.system else {
        bail!("no system given (use --system or the config's \"system\" field)");
    };
    match system {
        SystemConfig::Named(name) if name == NAVIER_STOKES => {
            let [rho, e] = cfg.anchor.unwrap_or([1.0, 1.0]);
            let ode = ns_profile_ode(&cfg.gas(), cfg.sigma.unwrap_or(0.0), rho, e)?;
            Ok(Resolved {
                name: name.clone(),
                eq: Some(ns_equilibrium_manifold(&ode)),
                spec: ode.spec,
            })
        }
        SystemConfig::Named(name) => {
            let sys = load_example(name).map_err(|e| {
                anyhow::anyhow!("{e} (known: {}, {NAVIER_STOKES})", EXAMPLE_NAMES.join(", "))
            })?;
            Ok(Resolved {
                name: name.clone(),
                eq: Some(sys.equilibrium_manifold()),
                spec: sys.spec,
            })
        }
        SystemConfig::Blocks(b) => {
            let ode = reduce(b.blocks.clone(), &b.anchor)?;
            Ok(Resolved {
                name: "poly_blocks".into(),
                eq: Some(ode.constant_states()),
                spec: ode.spec,
            })
        }
        SystemConfig::Inline(s) => {
            let name = s.name.clone().unwrap_or_else(|| "inline".into());
            let origin = DVector::from_vec(s.origin.clone().unwrap_or_else(|| vec![0.0; s.poly.dim]));
            let spec = SystemSpec::with_origin(name.clone(), s.poly.clone(), origin)?;
            let eq = match &s.equilibria {
                Some(a) => {
                    let d = spec.dim();
                    if a.base.len() != d || a.directions.iter().any(|c| c.len() != d) {
                        bail!("equilibria must have base and directions of length {d}");
                    }
                    let cols: Vec<DVector<f64>> = a.directions.iter().map(|c| DVector::from_vec(c.clone())).collect();
                    let dirs = if cols.is_empty() { DMatrix::zeros(d, 0) } else { DMatrix::from_columns(&cols) };
                    Some(EquilibriumManifold::affine(DVector::from_vec(a.base.clone()), dirs))
                }
                None => EquilibriumManifold::from_kernel(&spec).ok(),
            };
            Ok(Resolved { name, spec, eq })
        }
    }
}
