//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::Span;
use crate::operator::TruncationPolicy;
use crate::profiles::{DomainSpec, ShearProfile};
use crate::resolvent::PsiSearch;
use crate::semigroup::DecayConfig;
use crate::tensor::TensorConfig;

/// Environment variable that overrides `output_dir`.
pub const OUT_DIR_ENV: &str = "SHEARLAB_OUT";

/// Profile selection; `domain` overrides the default cross-section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Couette {
        #[serde(default)]
        domain: Option<DomainSpec>,
    },
    Poiseuille {
        #[serde(default)]
        domain: Option<DomainSpec>,
    },
    Kolmogorov,
    Monomial {
        degree: u32,
        #[serde(default)]
        domain: Option<DomainSpec>,
    },
    TaylorCouette,
    Tanh,
    Polynomial {
        coeffs: Vec<f64>,
        m: usize,
        domain: DomainSpec,
        #[serde(default)]
        c0: Option<f64>,
    },
}

impl ProfileSpec {
    pub fn build(&self) -> Result<ShearProfile> {
        let with = |p: ShearProfile, d: &Option<DomainSpec>| match d {
            Some(d) => p.with_domain(*d),
            None => Ok(p),
        };
        match self {
            ProfileSpec::Couette { domain } => with(ShearProfile::couette(), domain),
            ProfileSpec::Poiseuille { domain } => with(ShearProfile::poiseuille(), domain),
            ProfileSpec::Kolmogorov => Ok(ShearProfile::kolmogorov()),
            ProfileSpec::Monomial { degree, domain } => {
                if *degree == 0 || *degree as usize > crate::profiles::MAX_ORDER {
                    return Err(Error::Config(format!("monomial degree {degree} not supported")));
                }
                with(ShearProfile::monomial(*degree), domain)
            }
            ProfileSpec::TaylorCouette => Ok(ShearProfile::taylor_couette()),
            ProfileSpec::Tanh => Ok(ShearProfile::tanh()),
            ProfileSpec::Polynomial { coeffs, m, domain, c0 } => {
                ShearProfile::polynomial("polynomial", coeffs.clone(), *m, *domain, *c0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSpec,
    /// Factors for `tensor-check`.
    #[serde(default)]
    pub tensor_factors: Vec<ProfileSpec>,
    #[serde(default)]
    pub grid: TruncationPolicy,
    /// Single parameter point for `resolvent-psi`, `semigroup-decay`, `tensor-check`, `counterexample`.
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub nu_list: Vec<f64>,
    #[serde(default)]
    pub k_list: Vec<f64>,
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    #[serde(default)]
    pub delta_grid: Vec<f64>,
    #[serde(default, rename = "L_list")]
    pub l_list: Vec<f64>,
    /// Level-set window; defaults to the profile's sample window.
    #[serde(default)]
    pub window: Option<Span>,
    /// Level-set order; defaults to the profile's `m`.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub probe_radii: Vec<f64>,
    #[serde(default)]
    pub solver: PsiSearch,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub tensor: TensorConfig,
    /// Also fit semigroup rates in `sweep-scaling`.
    #[serde(default)]
    pub sweep_semigroup: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: ProfileSpec::Couette { domain: None },
            tensor_factors: vec![],
            grid: TruncationPolicy::default(),
            nu: None,
            k: None,
            nu_list: vec![],
            k_list: vec![],
            lambda_grid: vec![],
            delta_grid: vec![],
            l_list: vec![],
            window: None,
            m: None,
            probe_radii: vec![],
            solver: PsiSearch::default(),
            decay: DecayConfig::default(),
            tensor: TensorConfig::default(),
            sweep_semigroup: false,
            output_dir: default_output_dir(),
            seed: 0,
            workers: None,
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        positive("solver.svd_tol", s.svd_tol)?;
        positive("solver.scan_tol", s.scan_tol)?;
        positive("solver.refine_tol", s.refine_tol)?;
        if s.coarse_points < 3 || s.max_iter == 0 {
            return Err(Error::Config("solver.coarse_points >= 3 and solver.max_iter >= 1 required".into()));
        }
        positive("decay.power_tol", self.decay.power_tol)?;
        positive("tensor.gmres_tol", self.tensor.gmres_tol)?;
        positive("tensor.power_tol", self.tensor.power_tol)?;
        positive("tensor.horizon", self.tensor.horizon)?;
        positive("grid.margin_factor", self.grid.margin_factor)?;
        positive("grid.n_per_layer", self.grid.n_per_layer)?;
        if self.decay.ensemble_size == 0 {
            return Err(Error::Config("decay.ensemble_size must be at least 1".into()));
        }
        if let Some(nu) = self.nu {
            positive("nu", nu)?;
        }
        for &nu in &self.nu_list {
            positive("nu_list entry", nu)?;
        }
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(Error::Config("workers must be at least 1".into()));
            }
        }
        self.profile.build()?;
        for f in &self.tensor_factors {
            f.build()?;
        }
        Ok(())
    }

    pub fn require_nu(&self) -> Result<f64> {
        self.nu.ok_or_else(|| Error::Config("missing field `nu`".into()))
    }

    pub fn require_k(&self) -> Result<f64> {
        match self.k {
            Some(k) if k != 0.0 && k.is_finite() => Ok(k),
            Some(k) => Err(Error::Config(format!("k must be nonzero, got {k}"))),
            None => Err(Error::Config("missing field `k`".into())),
        }
    }

    /// Output directory after the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }
}
