//! Scenario-based asset-liability management for defined-benefit pension funds:
//! stochastic programming and distributionally robust formulations, a conic
//! modelling layer, scenario generation and out-of-sample evaluation.

mod error;

pub mod conic;
pub mod evaluation;
pub mod fund;
pub mod formulations;
pub mod scenario;

pub use error::{AlmError, Result};
pub use fund::{
    build_discount_scenarios, present_value, validate, DiscountScenarios, FundSpec,
    InvestmentStrategy, RegulatorySets, ReturnScenarios,
};
