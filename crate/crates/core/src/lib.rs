//! Numerical free additive convolution with analytic subordination, spectral
//! edge location, random-matrix sampling of `A + UBU* + sqrt(t) W`, and
//! Monte Carlo checks of Tracy-Widom edge statistics.
//!
//! Modules, bottom-up:
//!
//! * [`measure`]: probability measures and their Stieltjes transforms.
//! * [`subordination`]: the two-measure, time-`t` subordination solver and
//!   density recovery.
//! * [`edge`]: upper edge, square-root scale, classical locations.
//! * [`rmt`]: Haar unitaries, GUE, ensemble assembly, resolvent probes.
//! * [`tracywidom`]: Airy functions and the GUE Tracy-Widom distribution.
//! * [`harness`]: Monte Carlo experiments and Kolmogorov-Smirnov statistics.

pub mod airy;
pub mod edge;
pub mod error;
pub mod harness;
pub mod io;
pub mod measure;
pub mod quad;
pub mod rmt;
pub mod subordination;
pub mod tracywidom;

pub use error::{Error, Result};
pub use num_complex::Complex64;
