//! Random query-vector distributions and reproducible RNG streams.
//!
//! Randomness comes from ChaCha8, a counter-based stream cipher generator:
//! a `(base_seed, stream_id)` pair fully determines the sample sequence, and
//! distinct stream ids yield independent-quality streams. This makes every
//! experiment reproducible bit-for-bit across runs and across serial/parallel
//! execution.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dims::Dims;
use crate::error::Error;
use crate::field::ScalarField;
use crate::query::KronQueryVector;

/// Distribution of the i.i.d. factor entries of a random query vector.
///
/// Complex variants draw `(r + i·m)/√2` with `r`, `m` independent real
/// Rademacher or Gaussian entries, so every variant has zero mean and unit
/// variance per entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryDistribution {
    RealRademacher,
    RealGaussian,
    ComplexRademacher,
    ComplexGaussian,
}

impl QueryDistribution {
    pub const ALL: [QueryDistribution; 4] = [
        QueryDistribution::RealRademacher,
        QueryDistribution::RealGaussian,
        QueryDistribution::ComplexRademacher,
        QueryDistribution::ComplexGaussian,
    ];

    pub fn field(self) -> ScalarField {
        match self {
            QueryDistribution::RealRademacher | QueryDistribution::RealGaussian => {
                ScalarField::Real
            }
            QueryDistribution::ComplexRademacher | QueryDistribution::ComplexGaussian => {
                ScalarField::Complex
            }
        }
    }

    pub fn is_gaussian(self) -> bool {
        matches!(
            self,
            QueryDistribution::RealGaussian | QueryDistribution::ComplexGaussian
        )
    }
}

impl std::fmt::Display for QueryDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            QueryDistribution::RealRademacher => "real-rademacher",
            QueryDistribution::RealGaussian => "real-gaussian",
            QueryDistribution::ComplexRademacher => "complex-rademacher",
            QueryDistribution::ComplexGaussian => "complex-gaussian",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for QueryDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "real-rademacher" => Ok(QueryDistribution::RealRademacher),
            "real-gaussian" => Ok(QueryDistribution::RealGaussian),
            "complex-rademacher" => Ok(QueryDistribution::ComplexRademacher),
            "complex-gaussian" => Ok(QueryDistribution::ComplexGaussian),
            other => Err(Error::InvalidArgument(format!(
                "unknown distribution {other:?}; expected one of \
                 real-rademacher, real-gaussian, complex-rademacher, complex-gaussian"
            ))),
        }
    }
}

/// Address of a deterministic random stream: `(base_seed, stream_id)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub base_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        RngStream {
            base_seed,
            stream_id,
        }
    }

    /// Same base seed, different stream.
    pub fn with_stream(self, stream_id: u64) -> Self {
        RngStream {
            base_seed: self.base_seed,
            stream_id,
        }
    }

    /// Stream offset by `delta`, wrapping.
    pub fn offset(self, delta: u64) -> Self {
        RngStream {
            base_seed: self.base_seed,
            stream_id: self.stream_id.wrapping_add(delta),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn rademacher(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw one Kronecker query vector with i.i.d. factors.
///
/// Entries are drawn factor-major; complex entries draw their real component
/// before the imaginary one. The output is a pure function of
/// `(dist, dims, stream)`.
pub fn sample_query(dist: QueryDistribution, dims: Dims, stream: &RngStream) -> KronQueryVector {
    let mut rng = stream.rng();
    let d = dims.d();
    let k = dims.k();
    match dist {
        QueryDistribution::RealRademacher | QueryDistribution::RealGaussian => {
            let draw = if dist == QueryDistribution::RealRademacher {
                rademacher
            } else {
                gaussian
            };
            let factors: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..d).map(|_| draw(&mut rng)).collect())
                .collect();
            KronQueryVector::real(dims, &factors).expect("factors built to shape")
        }
        QueryDistribution::ComplexRademacher | QueryDistribution::ComplexGaussian => {
            let draw = if dist == QueryDistribution::ComplexRademacher {
                rademacher
            } else {
                gaussian
            };
            let scale = std::f64::consts::FRAC_1_SQRT_2;
            let factors: Vec<Vec<Complex64>> = (0..k)
                .map(|_| {
                    (0..d)
                        .map(|_| {
                            let re = draw(&mut rng);
                            let im = draw(&mut rng);
                            Complex64::new(re * scale, im * scale)
                        })
                        .collect()
                })
                .collect();
            KronQueryVector::complex(dims, factors).expect("factors built to shape")
        }
    }
}

/// Standard normal vector of a given length from a stream.
pub fn sample_gaussian_vector(len: usize, stream: &RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..len).map(|_| gaussian(&mut rng)).collect()
}
