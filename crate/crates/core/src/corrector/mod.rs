//! Correction of integrable functions on a set of large measure.

pub mod budgets;
pub mod enumeration;
pub mod greedy;
pub mod lemma;
pub mod step;
pub mod universal;

pub use budgets::Budgets;
pub use enumeration::{pair, unpair, CoeffGrid, FixedList, PolynomialSource, RationalEnumeration};
pub use greedy::{greedy_series, GreedySeries, GreedyStep};
pub use lemma::{correct_step, BumpSummary, StepCorrection, StepMetrics, StepOptions, StepStatements};
pub use step::{step_approximate, StepFunction};
pub use universal::{
    build_universal_set, clamp_param, correct, correction_sequence, sequence_rows, Achieved,
    BundleRecord, BundleSummary, CertificateStatements, CorrectionCertificate, Provenance,
    SequenceEntry, SequenceRow, TailCheck, UniversalSetBundle, PARAM_FLOOR,
};
