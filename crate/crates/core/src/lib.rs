//! Heat-trace asymptotics for elliptic cone operators of Fuchs type.
//!
//! The crate covers the symbol algebra of operators
//! `r^{-m} sum_k a_k(r) (-r d/dr)^k`, boundary-spectrum and
//! parameter-ellipticity checks, spectral oracles on exact cones, heat-trace
//! evaluation (eigenvalue sums and Dunford integrals), fitting of the
//! power/log expansion, and the weakly parametric symbol expansion.

pub mod bessel;
pub mod error;
pub mod expansion;
pub mod fuchs;
pub mod mellin;
pub mod oracle;
pub mod poly;
pub mod quadrature;
pub mod series;
pub mod spectral;
pub mod tridiag;
pub mod weakly_parametric;

pub use error::{ConeError, Result};
pub use fuchs::{FuchsOperator, SignConvention};
pub use series::{ModePolynomial, RadialSeries};
pub use spectral::{CrossSection, Sector};

/// CSV reader that skips `#` metadata lines.
pub(crate) fn open_csv(path: &std::path::Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?)
}
