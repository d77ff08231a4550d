pub mod decomposition;
pub mod error;
pub mod forms;
pub mod model;
pub mod numerics;
pub mod order_param;
pub mod pathspace;
pub mod quasilocal;
pub mod states;
pub mod thermo;
pub mod suite;

pub use decomposition::{ChiMode, ChiEstimate};
pub use error::{Error, Result};
pub use forms::FormContext;
pub use model::{GaussianTerm, LatticeModes, ModeIndex, ModelParams, TestFunction};
pub use order_param::{detect_bec, OrderParameterTrace, Verdict};
pub use pathspace::{PathSpaceSpec, RegExponents, TraceVerdict};
pub use quasilocal::ProjectiveChain;
pub use states::{ComponentLabel, FormChoice, StateOptions};
pub use suite::{run_all, CriterionResult, SuiteConfig};
