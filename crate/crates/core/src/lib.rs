//! Exact recovery of two-layer ReLU networks `f(x) = Σ wᵢ·max(⟨Aᵢ,x⟩, 0)`
//! from gradient or value queries.
//!
//! ```
//! use gradleak::{generate_random_net, learn_model, ExtractionConfig, Oracle};
//!
//! let net = generate_random_net(6, 3, 0.1, 0.1, 7).unwrap();
//! let oracle = Oracle::gradient_api(net.clone());
//! let cfg = ExtractionConfig::from_budget(3, 0.1, 0.1, 8).unwrap();
//! let report = learn_model(&oracle, &cfg).unwrap();
//! let x = [0.3, -1.0, 0.5, 2.0, -0.7, 0.1];
//! assert!((report.recovered.eval(&x).unwrap() - net.eval(&x).unwrap()).abs() < 1e-9);
//! ```

pub mod bench;
pub mod error;
pub mod extraction;
pub mod geometry;
mod lp;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod validation;

pub use error::{Error, Result};
pub use extraction::{
    binary_search_segment, learn_model, recover_s, recover_z, select_parameters, ExtractionConfig,
    ExtractionReport, GradientAccess, LineProbe,
};
pub use model::{generate_random_net, RecoveredModel, TwoLayerNet};
pub use numerics::DenseMatrix;
pub use oracle::{FiniteDiffConfig, Oracle, QueryLedger, QueryMode, SmoothGradConfig};
