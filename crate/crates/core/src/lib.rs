//! Inference over a discrete joint distribution stored as a dense
//! contingency table.
//!
//! Hard evidence is applied by exact conditioning. Soft evidence (new
//! marginal probabilities for some variables) is propagated by refitting the
//! evidence subtable with iterative proportional fitting, which changes the
//! margins while keeping every odds ratio, and then mixing the table's
//! conditionals over the refitted joint evidence distribution.
//!
//! ```
//! use oddsinfer::{posterior, Evidence, IpfConfig, JointTable, VariableSpec};
//!
//! let table = JointTable::new(
//!     vec![VariableSpec::binary("e1"), VariableSpec::binary("e2"), VariableSpec::binary("c")],
//!     vec![0.05, 0.20, 0.10, 0.10, 0.10, 0.25, 0.15, 0.05],
//! )?;
//! let ev = Evidence::new().soft("e1", vec![0.3, 0.7]).soft("e2", vec![0.2, 0.8]);
//! let result = posterior(&table, &ev, "c", &IpfConfig::default())?;
//! assert!((result.posterior[1] - 0.409775).abs() < 1e-6);
//! # Ok::<(), oddsinfer::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod inference;
pub mod ipf;
pub mod kbio;
mod odds;
pub mod table;

pub use error::{Error, NotConverged, Result};
pub use inference::{evidence_subtable, posterior, posterior_independent, Evidence, Finding, Method, QueryResult};
pub use ipf::{fit_cycle, ipf_adjust, max_residual, IpfConfig, IpfReport, MarginalTargets};
pub use kbio::{parse_kb, serialize_kb, to_table, Diagnostic, KbDocument, Severity};
pub use table::{Assignment, JointTable, VariableSpec};
