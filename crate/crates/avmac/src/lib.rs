//! Analysis and coding toolkit for arbitrarily varying multiple-access
//! channels (AV-MACs) with conferencing encoders.
//!
//! An AV-MAC is a two-sender multiple-access channel whose state changes
//! arbitrarily from letter to letter; codes must be reliable for every
//! state sequence, as if an adversary who sees the channel inputs picked
//! the states. The crate provides:
//!
//! * [`channel`]: finite channel families, state priors, and n-letter
//!   product extensions, plus a JSON file format;
//! * [`infotheory`]: the conditional mutual informations that bound the
//!   rate region;
//! * [`symmetrizability`]: exact decisions of the four symmetrizability
//!   conditions by linear feasibility, with explicit certificates;
//! * [`region`]: robust rate pentagons, inner approximations of the
//!   capacity region, the deterministic-coding dichotomy, and
//!   cooperation thresholds;
//! * [`coding`]: desk-scale constructions - random conferencing
//!   codebooks for the compound channel, permutation robustification,
//!   reduction to quadratically many component codes, positive-rate
//!   prefix codes, and the elimination of correlation;
//! * [`adversary`]: exhaustive, greedy, and symmetrizer jamming attacks
//!   against concrete codes.

#![allow(clippy::needless_range_loop)]

pub mod adversary;
pub mod channel;
pub mod coding;
pub mod infotheory;
pub mod lp;
pub mod optim;
pub mod region;
pub mod symmetrizability;

pub use adversary::{
    exhaustive_attack, greedy_attack, symmetrizer_attack, AttackError, AttackOutcome,
    AttackStrategy, AttackWitness,
};
pub use channel::{builtin_channel, ChannelError, ChannelSpec, StatePrior, StateSequence};
pub use coding::{
    build_compound_code, eliminate_correlation, exact_average_error, exact_average_error_qseq,
    monte_carlo_average_error, positive_rate_prefix, random_code, randomized_error,
    reduce_randomness, robustify, worst_case_error, worst_randomized_error, CodeMeta,
    CodingError, CompoundCodeOptions, ConferencingCode, ConferencingProtocol, Decoder,
    EliminationPlan, PrefixOptions, RandomConferencingCode, RobustifyOptions, WorstCaseMode,
};
pub use infotheory::{
    entropy, joint_distribution, mi_terms, InfotheoryError, InputPolicy, JointUxyz, MiTerms,
};
pub use region::{
    capacity_region, cooperation_thresholds, deterministic_capacity, full_cooperation_input,
    min_term_over_q, mi_term_value, nonconferencing_verdict, rate_region, region_from_policies,
    robust_bounds, search_policies, BoundRecord, CooperationThresholds, DichotomyOutcome,
    HalfPlane, MiTermKind, NonconferencingCase, NonconferencingVerdict, QOptions, RatePolytope,
    RegionApproximation, RegionError, RegionOptions, RobustBounds, SearchResolution,
};
pub use symmetrizability::{
    check_symmetrizable, verify_certificate, SymmetrizabilityError, SymmetrizerCertificate,
    SymmetrizerKind,
};
