//! Two-stage medical-concept embeddings.
//!
//! Stage one walks the concept hierarchy and trains skip-gram vectors as
//! knowledge anchors; stage two factorizes a patient-level co-occurrence
//! matrix with a weighted least-squares objective whose target vectors are
//! pulled toward the anchors. The crate also ships the intrinsic evaluation
//! harnesses (similarity correlations against the hierarchy and the
//! co-occurrence counts, known-relationship discrimination against a random
//! null, signed-rank method ranking) and a synthetic cohort generator with
//! planted comorbidity clusters so the whole pipeline runs end to end
//! without clinical data.

pub mod adamw;
pub mod cooc;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod exec;
pub mod ontology;
pub mod sgns;
pub mod stats;
pub mod synth;
pub mod trainer;
pub mod vocab;
pub mod walks;

pub use cooc::{build_cooccurrence, phenotype, CooccurrenceMatrix, PatientRecord, UnknownConceptPolicy};
pub use embedding::{EmbeddingKind, EmbeddingMatrix};
pub use error::{Error, Result};
pub use eval::{
    cosine_similarity, impact_assessment, intrinsic_discrimination, rank_methods, CorrelationKind,
    Discrimination, EvalReport, ImpactResult, RankSummary, RelationshipSet, ScoreTable,
};
pub use exec::ExecPolicy;
pub use ontology::{InformationContentTable, Ontology, OntologyLoad, RollUpMap};
pub use sgns::{train_sgns, SgnsConfig, SgnsOutcome};
pub use stats::wilcoxon_signed_rank;
pub use synth::{generate_dataset, generate_ontology, generate_patients, SynthConfig, SynthDataset};
pub use trainer::{
    export_final, keep_gradients, keep_loss, resolve_x_max, train_keep, KeepConfig, KeepModel,
    KeepTrainOutcome, WeightingFunction,
};
pub use vocab::{ConceptId, Vocabulary};
pub use walks::{generate_walks, WalkConfig, WalkCorpus};
