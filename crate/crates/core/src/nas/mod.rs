//! Multi-objective architecture search: genome encoding, NSGA-II operators
//! and the evolution driver.

pub mod evolve;
pub mod genome;
pub mod nsga;

pub use evolve::{
    evolve, EvalCache, Evaluator, Executor, GenerationRecord, SearchBudget, SearchConfig, SearchResult, SerialExecutor,
    TrainingEvaluator, FAILURE_RMSE,
};
pub use genome::{Genome, Slot, SlotKind, SLOTS};
pub use nsga::{
    crowding_distance, dominates, fast_non_dominated_sort, make_offspring, pareto_front, representatives, Individual,
    Objectives, Representatives,
};
