//! Monte Carlo estimation of the sliced Wasserstein distance.
//!
//! The sliced Wasserstein distance between two measures on `R^d` is an
//! integral over the unit sphere `S^{d-1}` of one-dimensional Wasserstein
//! distances between projected measures. This crate provides
//!
//! * exact one-dimensional optimal transport and the sliced Wasserstein
//!   integrand ([`transport`]),
//! * a catalogue of quadratures on the sphere: i.i.d. sampling, randomized
//!   grids and spirals, unions of Haar orthogonal frames, importance
//!   sampling with fitted von Mises-Fisher proposals, determinantal point
//!   processes and Coulomb-repelled configurations ([`quadrature`]),
//! * estimator layers: plain means, importance weighting and least-squares
//!   control variates, including spherical-harmonics control variates
//!   ([`estimator`]),
//! * spherical harmonics built from fundamental point sets ([`harmonics`]),
//! * the spectral variance analysis of the orthogonal-frame estimator,
//!   including the Funk transform and per-degree energy profiles
//!   ([`spectral`]),
//! * a benchmark harness with replication statistics, confidence intervals
//!   and CSV/JSON reports ([`harness`]).
//!
//! All randomness flows through [`rng::Seed`], which derives independent,
//! platform-stable substreams per replication and phase, so every result is
//! reproducible bit for bit from a single integer seed.
//!
//! ```
//! use swquad::quadrature::nodes_unifortho;
//! use swquad::transport::estimate_sw;
//! use swquad::{DiscreteMeasure, Seed};
//!
//! // SW_2^2 between two point masses at distance 1 is exactly 1/d.
//! let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0, 0.0]]).unwrap();
//! let nu = DiscreteMeasure::uniform(vec![vec![1.0, 0.0, 0.0]]).unwrap();
//!
//! // The integrand (theta^T v)^2 is a quadratic polynomial, so every
//! // orthogonal frame integrates it with zero variance: the estimate is
//! // exact for any seed.
//! let nodes = nodes_unifortho(3, 999, Seed::new(7)).unwrap();
//! let est = estimate_sw(&mu, &nu, 2.0, &nodes).unwrap();
//! assert!((est.value - 1.0 / 3.0).abs() < 1e-10);
//! ```

pub mod error;
pub mod estimator;
pub mod geom;
pub mod harmonics;
pub mod harness;
pub mod numeric;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
pub use geom::{OrthogonalFrame, UnitVector};
pub use quadrature::QuadratureNodes;
pub use rng::Seed;
pub use transport::DiscreteMeasure;
