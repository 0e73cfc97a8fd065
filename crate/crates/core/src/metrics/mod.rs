//! Segmentation metrics, client-balanced scores, significance tests and
//! ensemble uncertainty maps.

mod report;
mod seg;
mod stats;
mod uncertainty;

pub use report::{global_average, CaseScores, ClientSummary, EvalReport, TTestResult};
pub use seg::{asd, boundary, dice};
pub use stats::{ln_gamma, paired_ttest, regularized_beta, student_t_two_sided};
pub use uncertainty::{uncertainty_map, UncertaintyMap};
