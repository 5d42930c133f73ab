//! Run configuration. JSON is canonical; CLI flags override fields.

use std::path::PathBuf;

use levelcg_core::models::{psi_rule, ImrtGenSpec, PortfolioKind};
use serde::{Deserialize, Serialize};

use crate::data::ReturnsSpec;
use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    CardFreeConvex,
    CardFreeNonconvex,
    CardConvex,
    #[serde(rename = "card-nonconvex-1")]
    CardNonconvex1,
    #[serde(rename = "card-nonconvex-2")]
    CardNonconvex2,
    ImrtConvex,
    ImrtNonconvex,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ImrtConvex => "imrt-convex",
            ModelKind::ImrtNonconvex => "imrt-nonconvex",
            other => other.portfolio().expect("portfolio kind").name(),
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "imrt-convex" => Some(ModelKind::ImrtConvex),
            "imrt-nonconvex" => Some(ModelKind::ImrtNonconvex),
            _ => PortfolioKind::from_name(s).map(Self::from),
        }
    }

    pub fn portfolio(self) -> Option<PortfolioKind> {
        match self {
            ModelKind::CardFreeConvex => Some(PortfolioKind::CardFreeConvex),
            ModelKind::CardFreeNonconvex => Some(PortfolioKind::CardFreeNonconvex),
            ModelKind::CardConvex => Some(PortfolioKind::CardConvex),
            ModelKind::CardNonconvex1 => Some(PortfolioKind::CardNonconvex1),
            ModelKind::CardNonconvex2 => Some(PortfolioKind::CardNonconvex2),
            ModelKind::ImrtConvex | ModelKind::ImrtNonconvex => None,
        }
    }

    pub fn is_convex(self) -> bool {
        match self {
            ModelKind::ImrtConvex => true,
            ModelKind::ImrtNonconvex => false,
            other => other.portfolio().expect("portfolio kind").is_convex(),
        }
    }

    /// Convex model whose solution warm-starts this one in `lcg-then-dncg`.
    pub fn convex_partner(self) -> Option<ModelKind> {
        match self {
            ModelKind::ImrtNonconvex => Some(ModelKind::ImrtConvex),
            ModelKind::CardFreeNonconvex | ModelKind::CardNonconvex2 => Some(ModelKind::CardFreeConvex),
            ModelKind::CardNonconvex1 => Some(ModelKind::CardConvex),
            _ => None,
        }
    }
}

impl From<PortfolioKind> for ModelKind {
    fn from(k: PortfolioKind) -> Self {
        match k {
            PortfolioKind::CardFreeConvex => ModelKind::CardFreeConvex,
            PortfolioKind::CardFreeNonconvex => ModelKind::CardFreeNonconvex,
            PortfolioKind::CardConvex => ModelKind::CardConvex,
            PortfolioKind::CardNonconvex1 => ModelKind::CardNonconvex1,
            PortfolioKind::CardNonconvex2 => ModelKind::CardNonconvex2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Lcg,
    Mlcg,
    IppLcg,
    Dncg,
    LcgThenDncg,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Lcg => "lcg",
            Algo::Mlcg => "mlcg",
            Algo::IppLcg => "ipp-lcg",
            Algo::Dncg => "dncg",
            Algo::LcgThenDncg => "lcg-then-dncg",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Algo::Lcg, Algo::Mlcg, Algo::IppLcg, Algo::Dncg, Algo::LcgThenDncg].into_iter().find(|a| a.name() == s)
    }
}

/// `"auto"` applies the asset-count rule; a number is used as is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Psi {
    #[default]
    Auto,
    Value(usize),
}

impl Serialize for Psi {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psi::Auto => s.serialize_str("auto"),
            Psi::Value(v) => s.serialize_u64(*v as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Psi {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) if n >= 1 => Ok(Psi::Value(n)),
            Raw::Word(w) if w == "auto" => Ok(Psi::Auto),
            _ => Err(serde::de::Error::custom("psi must be \"auto\" or a positive count")),
        }
    }
}

impl Psi {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Psi::Auto);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .map(Psi::Value)
            .ok_or_else(|| BenchError::Config(format!("--psi expects `auto` or a positive count, got `{s}`")))
    }

    pub fn resolve(self, n_assets: usize) -> usize {
        match self {
            Psi::Auto => psi_rule(n_assets),
            Psi::Value(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// Returns CSV (see `data`).
    Csv { path: PathBuf },
    SyntheticReturns {
        #[serde(default)]
        spec: ReturnsSpec,
    },
    /// IMRT instance directory (see `imrt_io`).
    ImrtDir { path: PathBuf },
    SyntheticImrt {
        #[serde(default)]
        spec: ImrtSpecConfig,
    },
}

/// Serializable mirror of the IMRT generator shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImrtSpecConfig {
    pub n_angles: usize,
    pub n_voxels: usize,
    pub n_beamlets: usize,
    pub apertures_per_angle: usize,
    pub n_structures: usize,
    pub underdose: Vec<(f64, f64)>,
    pub overdose: Vec<(f64, f64)>,
    pub mean_tumor_dose: f64,
    pub healthy_limit: f64,
}

impl Default for ImrtSpecConfig {
    fn default() -> Self {
        ImrtGenSpec::default().into()
    }
}

impl From<ImrtGenSpec> for ImrtSpecConfig {
    fn from(s: ImrtGenSpec) -> Self {
        Self {
            n_angles: s.n_angles,
            n_voxels: s.n_voxels,
            n_beamlets: s.n_beamlets,
            apertures_per_angle: s.apertures_per_angle,
            n_structures: s.n_structures,
            underdose: s.underdose,
            overdose: s.overdose,
            mean_tumor_dose: s.mean_tumor_dose,
            healthy_limit: s.healthy_limit,
        }
    }
}

impl From<&ImrtSpecConfig> for ImrtGenSpec {
    fn from(s: &ImrtSpecConfig) -> Self {
        Self {
            n_angles: s.n_angles,
            n_voxels: s.n_voxels,
            n_beamlets: s.n_beamlets,
            apertures_per_angle: s.apertures_per_angle,
            n_structures: s.n_structures,
            underdose: s.underdose.clone(),
            overdose: s.overdose.clone(),
            mean_tumor_dose: s.mean_tumor_dose,
            healthy_limit: s.healthy_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelKind,
    pub algo: Algo,
    pub data: DataSource,
    /// Seed for synthetic data.
    pub seed: u64,

    pub epsilon: f64,
    pub mu: f64,
    /// IPP-LCG subproblem accuracies; both default to `epsilon`.
    pub delta_f: Option<f64>,
    pub delta_h: Option<f64>,
    /// Outer iterations for LCG/MLCG, proximal steps for IPP-LCG.
    pub max_outer: u64,
    /// CGO iterations per outer iteration.
    pub max_inner: u64,
    /// Total CGO iterations across the run (LCG, MLCG, IPP-LCG).
    pub budget: Option<u64>,
    /// DNCG horizon K.
    pub k: u64,
    /// Fixed DNCG `(c, alpha)` instead of the horizon schedule.
    pub dncg_c: Option<f64>,
    pub dncg_alpha: Option<f64>,

    pub alpha: f64,
    pub theta: f64,
    pub psi: Psi,
    pub v_bounds: (f64, f64),
    /// Group-sparsity level; falls back to the instance manifest, then 0.5.
    pub phi: Option<f64>,

    /// Run DNCG/IPP-LCG on a convex model.
    pub force: bool,
    /// JSON report path.
    pub out: Option<PathBuf>,
    /// CSV trace path; two-stage runs add `-lcg` / `-dncg` to the stem.
    pub trace: Option<PathBuf>,
    /// Include wall time in the report (breaks byte-identical reruns).
    pub wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::CardFreeConvex,
            algo: Algo::Lcg,
            data: DataSource::SyntheticReturns { spec: ReturnsSpec::default() },
            seed: 7,
            epsilon: 1e-3,
            mu: 0.75,
            delta_f: None,
            delta_h: None,
            max_outer: 200,
            max_inner: 100_000,
            budget: None,
            k: 100,
            dncg_c: None,
            dncg_alpha: None,
            alpha: 0.05,
            theta: 1e-2,
            psi: Psi::Auto,
            v_bounds: levelcg_core::models::DEFAULT_V_BOUNDS,
            phi: None,
            force: false,
            out: None,
            trace: None,
            wall_time: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks that the algorithm fits the model and the data source fits
    /// the model family.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        let imrt = self.model.portfolio().is_none();
        match (&self.data, imrt) {
            (DataSource::Csv { .. } | DataSource::SyntheticReturns { .. }, true) => {
                return bad(format!("model {} needs IMRT data", self.model.name()))
            }
            (DataSource::ImrtDir { .. } | DataSource::SyntheticImrt { .. }, false) => {
                return bad(format!("model {} needs returns data", self.model.name()))
            }
            _ => {}
        }
        let convex = self.model.is_convex();
        match self.algo {
            Algo::Lcg | Algo::Mlcg if !convex => {
                bad(format!("{} needs a convex model, {} is nonconvex", self.algo.name(), self.model.name()))
            }
            Algo::Dncg | Algo::IppLcg if convex && !self.force => bad(format!(
                "{} targets nonconvex models; set force to run it on {}",
                self.algo.name(),
                self.model.name()
            )),
            Algo::LcgThenDncg if self.model.convex_partner().is_none() => {
                bad(format!("lcg-then-dncg needs a nonconvex model with a convex partner, got {}", self.model.name()))
            }
            _ if self.dncg_c.is_some() != self.dncg_alpha.is_some() => {
                bad("dncg_c and dncg_alpha must be given together".into())
            }
            _ => Ok(()),
        }
    }
}
