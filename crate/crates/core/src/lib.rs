//! Exact-arithmetic laboratory for SL2(F_p): Moebius actions, incidence
//! counting, Cayley-graph expansion, a lazy Moebius Markov chain, shifted
//! multiplicative subgroups and quadratic-residue gaps.

pub mod cayley;
pub mod error;
pub mod field;
pub mod incidence;
pub mod markov;
pub mod par;
pub mod qr;
pub mod sets;
pub mod shifts;
pub mod sl2;
pub mod words;

pub use error::{LabError, Result};
pub use field::{FieldCtx, Fp, Fq, FqCtx, GaussInt};
pub use sl2::{Mat2, ProjPoint};
