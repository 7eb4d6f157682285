//! Metrics, significance testing, ablation helpers and result tables.

mod ablation;
mod metrics;
mod significance;
mod tables;

pub use ablation::{binary_relation_task, most_frequent_relations, nested_subsample, BinaryRelationTask};
pub use metrics::{confusion, macro_prf, ConfusionCounts, MacroPrf, Prf};
pub use significance::{
    bonferroni, bootstrap_compare, significance_mark, SignificanceResult, ALPHA, BONFERRONI_N, DEFAULT_RESAMPLES,
};
pub use tables::{population_std, write_curve_csv, write_table_csv, CurvePoint, TableRow};
