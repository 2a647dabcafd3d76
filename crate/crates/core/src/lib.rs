//! Query answering over relations with missing values whose missingness is
//! described by a Bayesian network (a missingness graph).
//!
//! Pipeline: [`observed`] data and an [`mg`] graph produce a block
//! independent probabilistic database ([`bid`]); its possible [`worlds`]
//! group into classes ranked by probability or by [`compliance`] with the
//! graph; [`flow`] finds most-compliant classes without enumerating worlds;
//! [`query`] evaluates conjunctive queries per class.

pub mod bid;
pub mod compliance;
pub mod embedding;
pub mod flow;
pub mod format;
pub mod mg;
pub mod observed;
pub mod query;
pub mod random;
pub mod tolerance;
pub mod worlds;

pub use bid::{build_bid, Bid, BidError, BidRelation, BidTuple, Block};
pub use compliance::{class_distance, induced_distribution, ComplianceError, DistanceKind};
pub use embedding::{bid_equivalent, embed_bid, tid_to_observed, EmbedError, Embedding, Tid};
pub use flow::{count_mcc, enumerate_mcc, solve_mcc, EnumStats, FlowError, MccSolution};
pub use mg::{Assignment, MgBuilder, MgError, MissingnessGraph};
pub use observed::{bind_mg, load_observed, BoundDatabase, ObservedDatabase, ObservedError, RelationSchema};
pub use query::{preferred_answers, AnswerSet, AnswerValue, Query, QueryError};
pub use worlds::{all_classes, support_of, ClassInfo, ClassVector, Support, WorldError};
