//! Bi-unitary connections on four-graph configurations.
//!
//! The crate models the four bipartite multigraphs of a configuration, their
//! Perron-Frobenius weights, complex-valued connections on cells with the
//! unitarity and bi-unitarity checks, the three renormalizations, the
//! 4-tensor normalization, fields of strings with the flatness / half
//! flatness conditions and a flat-field solver, and the 2-tensor zipper /
//! half zipper conditions, together with a verifier for the four-way
//! equivalence of those conditions.
//!
//! The numeric core is generic over the real scalar (see [`scalar::Real`]);
//! `f64` aliases are exported at the crate root.

pub mod connection;
pub mod fixtures;
pub mod error;
pub mod graphs;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod strings;
pub mod tensor4;
pub mod zipper;

pub use connection::{
    check_biunitarity, check_unitarity, direct_sum, fourier_matrix, gauge_transform,
    hadamard_connection, intertwiner_space, is_irreducible, product, renormalize,
    trivial_connection, Cell, CompositeGraph, Connection, GaugePair, ProductResult,
    Renormalization,
};
pub use error::{Error, Result};
pub use graphs::{
    builtin_example, compute_pf, validate_config, BipartiteGraph, CheckStatus, EdgeRef,
    ExampleId, FourGraphConfig, GraphId, Layer, PFData, ValidationReport, VertexId,
};
pub use scalar::{Cx, Real};
pub use strings::{
    act_flat_field, canonical_word, check_action_well_defined, check_flatness,
    check_half_flatness, field_product, open_string_space, solve_flat_fields, transport_field,
    ConnectionWord, OpenString, StringField, TransportResult,
};
pub use tensor4::{
    check_tensor_biunitarity, connection_to_tensor, tensor_conjugate, tensor_to_connection,
    FourTensor,
};
pub use zipper::{
    check_half_zipper, check_zipper, field_to_two_tensor, solve_half_zipper,
    two_tensor_to_field, verify_theorem, TheoremReport, TwoTensor,
};

/// Complex scalar used by the `f64` aliases.
pub type C64 = num_complex::Complex<f64>;
/// Weight data over `f64`.
pub type PFData64 = graphs::PFData<f64>;
/// Connection over `f64`.
pub type Connection64 = connection::Connection<f64>;
/// 4-tensor over `f64`.
pub type FourTensor64 = tensor4::FourTensor<f64>;
/// Field of strings over `f64`.
pub type StringField64 = strings::StringField<f64>;
/// 2-tensor over `f64`.
pub type TwoTensor64 = zipper::TwoTensor<f64>;
/// Word of connections over `f64`.
pub type ConnectionWord64 = strings::ConnectionWord<f64>;
/// Theorem report over `f64`.
pub type TheoremReport64 = zipper::TheoremReport<f64>;
