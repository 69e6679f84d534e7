//! Analog on-tag hashing over a simulated Gen2 air interface.

pub mod bits;
pub mod error;
pub mod gen2;
pub mod sim;
pub mod tash;
pub mod analysis;
pub mod apps;
pub mod stats;
pub mod corpus;
pub mod llrp;
pub mod experiments;

pub use bits::Bits;
pub use error::{Error, Result};
pub use gen2::{Action, MemBank, Population, SelectCommand, TagRecord};
pub use sim::{InventoryLog, TimingModel};
pub use tash::{Reader, TashChainSpec, TashOp, TashTable};

/// Estimation plan in double precision.
pub type EstimationPlan = analysis::EstimationPlan<f64>;

/// Double-precision entry points of the planning analysis.
pub mod f64_analysis {
    use super::Result;

    pub fn erf(x: f64) -> f64 {
        crate::analysis::erf(x)
    }

    pub fn erf_inv(y: f64) -> f64 {
        crate::analysis::erf_inv(y)
    }

    pub fn plan_estimation(alpha: f64, beta: f64) -> Result<super::EstimationPlan> {
        crate::analysis::plan_estimation(alpha, beta)
    }

    pub fn bloom_fpr(m: usize, table_size: usize, k: usize) -> f64 {
        crate::analysis::bloom_fpr(m, table_size, k)
    }

    pub fn zero_estimate(d: usize, n0: usize) -> Result<f64> {
        crate::analysis::zero_estimate(d, n0)
    }
}
