//! Two-party secure training of logistic regression over additive secret shares.
//!
//! Two computing parties (Alice and Bob) hold additive shares of fixed-point
//! data in `Z_{2^λ}`; a trusted initializer supplies correlated randomness.
//! The crate provides the arithmetic and Boolean building blocks (Beaver
//! multiplication, local truncation, bit decomposition through a carry
//! composition network, share conversion), the clipped-ReLU activation, the
//! gradient-descent training loop, plaintext reference implementations and
//! the framing and channels used between the parties.
//!
//! The protocols are generic over the ring word ([`RingWord`]: `u8` to `u64`)
//! and the plaintext oracles over the real type ([`Real`]: `f32`, `f64`).

pub mod activation;
pub mod bitops;
pub mod bits;
pub mod engine;
pub mod error;
pub mod fixedpoint;
pub mod randomness;
pub mod ring;
pub mod scalar;
pub mod sharing;
pub mod training;
pub mod transport;

pub use bits::PackedBits;
pub use engine::{run_pair, run_pair_with, PairOptions, Session, Transcript, TruncationMode};
pub use error::{Error, Result};
pub use fixedpoint::{decode, encode, FixedPointParams};
pub use randomness::{CorrelatedSource, Dealer, Request, Seed};
pub use ring::Ring;
pub use scalar::{Real, RingWord};
pub use sharing::{Role, ShareFile, ShareMatrix, ShareVector};
pub use training::{Dataset, TrainingConfig};

pub type Ring8 = Ring<u8>;
pub type Ring16 = Ring<u16>;
pub type Ring32 = Ring<u32>;
pub type Ring64 = Ring<u64>;

pub type Session16 = Session<u16>;
pub type Session32 = Session<u32>;
pub type Session64 = Session<u64>;

pub type ShareVector64 = ShareVector<u64>;
pub type ShareMatrix64 = ShareMatrix<u64>;

pub type Dataset64 = Dataset<f64>;
