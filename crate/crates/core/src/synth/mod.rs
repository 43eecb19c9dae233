//! Synthetic data with known ground truth: flat tables with planted log-odds
//! effects and longitudinal patient records with planted cases.

mod records;
mod tabular;

pub use records::{generate_records, generate_records_with_truth, GeneratedRecords, RecordsSpec};
pub use tabular::{
    bayes_auroc, expected_label_rate, generate_tabular, CorrelatedBlock, Interaction, InteractionKind, TabularSpec,
};
