//! Application models: risk-averse sparse portfolios and IMRT planning.

mod imrt;
mod portfolio;

pub use imrt::*;
pub use portfolio::*;

use crate::level::ConstrainedProblem;
use crate::nonconvex::NonconvexProblem;

/// A built model is either convex (for LCG/MLCG) or nonconvex (for IPP-LCG/DNCG).
#[derive(Clone)]
pub enum ModelProblem {
    Convex(ConstrainedProblem),
    Nonconvex(NonconvexProblem),
}

impl ModelProblem {
    pub fn is_convex(&self) -> bool {
        matches!(self, ModelProblem::Convex(_))
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelProblem::Convex(p) => p.dim(),
            ModelProblem::Nonconvex(p) => p.dim(),
        }
    }
}
