use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::DenseMatrix;
use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::query::{kron_expand, KronQueryVector};

/// How the probed matrix is represented.
#[derive(Clone, Debug)]
pub enum OperatorKind {
    /// Explicit `D × D` matrix.
    ExplicitDense(DenseMatrix),
    /// `A = A_1 ⊗ ⋯ ⊗ A_k`, one `d × d` factor per subsystem.
    KronFactors(Vec<DenseMatrix>),
    /// Sum of Kronecker-factored terms.
    SumOfKron(Vec<Vec<DenseMatrix>>),
    /// `A = g gᵀ` for a real vector `g` of length `D`.
    RankOne(Vec<f64>),
    /// The all-ones matrix `⊗ e eᵀ`.
    AllOnes,
    /// `A = ⊗ G_iᵀ G_i` with `G_i` standard normal, generated from the seed.
    ///
    /// Factor `i` (0-based) uses ChaCha8 seeded with `seed` on stream `i`,
    /// entries drawn row-major, so the matrix is reproducible bit-for-bit.
    WishartKron {
        seed: u64,
        factors: Vec<DenseMatrix>,
    },
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::ExplicitDense(_) => "dense",
            OperatorKind::KronFactors(_) => "kron_factors",
            OperatorKind::SumOfKron(_) => "sum_of_kron",
            OperatorKind::RankOne(_) => "rank_one",
            OperatorKind::AllOnes => "all_ones",
            OperatorKind::WishartKron { .. } => "wishart_kron",
        }
    }
}

/// The matrix being probed, accessible only through Kronecker-structured
/// matrix-vector products, with exact query accounting.
///
/// `apply` never mutates the represented matrix and increments the query
/// counter by exactly one per call. The counter is atomic, so one operator
/// may be probed from several workers and the final count equals the number
/// of `apply` calls.
#[derive(Debug)]
pub struct KronOperator {
    dims: Dims,
    kind: OperatorKind,
    queries: AtomicU64,
}

impl Clone for KronOperator {
    /// Cloning starts a fresh query account.
    fn clone(&self) -> Self {
        KronOperator {
            dims: self.dims,
            kind: self.kind.clone(),
            queries: AtomicU64::new(0),
        }
    }
}

impl KronOperator {
    pub fn explicit_dense(dims: Dims, matrix: DenseMatrix) -> Result<Self> {
        if matrix.side() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                got: matrix.side(),
            });
        }
        Ok(Self::with_kind(dims, OperatorKind::ExplicitDense(matrix)))
    }

    pub fn kron_factors(dims: Dims, factors: Vec<DenseMatrix>) -> Result<Self> {
        check_factors(&dims, &factors)?;
        Ok(Self::with_kind(dims, OperatorKind::KronFactors(factors)))
    }

    pub fn sum_of_kron(dims: Dims, terms: Vec<Vec<DenseMatrix>>) -> Result<Self> {
        for term in &terms {
            check_factors(&dims, term)?;
        }
        Ok(Self::with_kind(dims, OperatorKind::SumOfKron(terms)))
    }

    pub fn rank_one(dims: Dims, g: Vec<f64>) -> Result<Self> {
        if g.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                got: g.len(),
            });
        }
        Ok(Self::with_kind(dims, OperatorKind::RankOne(g)))
    }

    pub fn all_ones(dims: Dims) -> Self {
        Self::with_kind(dims, OperatorKind::AllOnes)
    }

    pub fn wishart(dims: Dims, seed: u64) -> Self {
        let d = dims.d();
        let factors = (0..dims.k())
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let g: Vec<f64> = (0..d * d)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                // W = Gᵀ G
                let mut w = DenseMatrix::zeros(d, ScalarField::Real);
                for r in 0..d {
                    for c in 0..d {
                        let mut acc = 0.0;
                        for l in 0..d {
                            acc += g[l * d + r] * g[l * d + c];
                        }
                        w.set(r, c, Complex64::new(acc, 0.0));
                    }
                }
                w
            })
            .collect();
        Self::with_kind(dims, OperatorKind::WishartKron { seed, factors })
    }

    fn with_kind(dims: Dims, kind: OperatorKind) -> Self {
        KronOperator {
            dims,
            kind,
            queries: AtomicU64::new(0),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    /// Number of oracle queries consumed so far.
    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::SeqCst)
    }

    pub fn reset_query_count(&self) {
        self.queries.store(0, Ordering::SeqCst);
    }

    /// One oracle query: `A · expand(q)`.
    ///
    /// A complex query against a real operator is evaluated with complex
    /// arithmetic internally (two real applications folded together) but
    /// counted as a single oracle query, matching the complex oracle model.
    pub fn apply(&self, q: &KronQueryVector) -> Result<Vec<Complex64>> {
        if q.dims() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.total(),
                got: q.dims().total(),
            });
        }
        self.queries.fetch_add(1, Ordering::SeqCst);
        Ok(self.apply_unrecorded(q))
    }

    fn apply_unrecorded(&self, q: &KronQueryVector) -> Vec<Complex64> {
        match &self.kind {
            OperatorKind::ExplicitDense(m) => {
                m.matvec(&q.expand()).expect("side checked at construction")
            }
            OperatorKind::KronFactors(factors) | OperatorKind::WishartKron { factors, .. } => {
                apply_factors(factors, q)
            }
            OperatorKind::SumOfKron(terms) => {
                let mut acc = vec![Complex64::ZERO; self.dims.total()];
                for term in terms {
                    for (a, v) in acc.iter_mut().zip(apply_factors(term, q)) {
                        *a += v;
                    }
                }
                acc
            }
            OperatorKind::RankOne(g) => {
                let x = q.expand();
                let s: Complex64 = g.iter().zip(x.iter()).map(|(&gi, xi)| gi * xi).sum();
                g.iter().map(|&gi| gi * s).collect()
            }
            OperatorKind::AllOnes => {
                let s: Complex64 = q.expand().into_iter().sum();
                vec![s; self.dims.total()]
            }
        }
    }

    /// The explicit matrix this operator denotes.
    pub fn materialize(&self) -> Result<DenseMatrix> {
        let total = self.dims.total();
        Ok(match &self.kind {
            OperatorKind::ExplicitDense(m) => m.clone(),
            OperatorKind::KronFactors(factors) | OperatorKind::WishartKron { factors, .. } => {
                kron_of(factors)
            }
            OperatorKind::SumOfKron(terms) => {
                let mut acc = DenseMatrix::zeros(total, ScalarField::Real);
                for term in terms {
                    acc = acc.add(&kron_of(term))?;
                }
                acc
            }
            OperatorKind::RankOne(g) => DenseMatrix::outer(g),
            OperatorKind::AllOnes => DenseMatrix::ones(total),
        })
    }
}

fn check_factors(dims: &Dims, factors: &[DenseMatrix]) -> Result<()> {
    if factors.len() != dims.k() {
        return Err(Error::DimensionMismatch {
            expected: dims.k(),
            got: factors.len(),
        });
    }
    for f in factors {
        if f.side() != dims.d() {
            return Err(Error::DimensionMismatch {
                expected: dims.d(),
                got: f.side(),
            });
        }
    }
    Ok(())
}

/// `⊗(A_i x_i)` by the mixed-product property, never materializing `⊗A_i`.
fn apply_factors(factors: &[DenseMatrix], q: &KronQueryVector) -> Vec<Complex64> {
    let per_factor: Vec<Vec<Complex64>> = factors
        .iter()
        .zip(q.factors())
        .map(|(a, x)| a.matvec(x).expect("factor side checked at construction"))
        .collect();
    kron_expand(&per_factor)
}

fn kron_of(factors: &[DenseMatrix]) -> DenseMatrix {
    let mut acc = DenseMatrix::identity(1);
    for f in factors {
        acc = acc.kron(f);
    }
    acc
}

/// Mixed-Product Property: the factor list `{A_i B_i}`, so that
/// `⊗(A_i B_i) = (⊗A_i)(⊗B_i)`.
pub fn mixed_product(a: &[DenseMatrix], b: &[DenseMatrix]) -> Result<Vec<DenseMatrix>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    a.iter()
        .zip(b.iter())
        .map(|(ai, bi)| ai.matmul(bi))
        .collect()
}
