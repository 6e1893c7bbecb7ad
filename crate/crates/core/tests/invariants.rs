//! Cross-module identities checked on seeded instances: the algebraic facts
//! the estimator analysis rests on.
#![allow(clippy::needless_range_loop)] // index loops mirror the matrix algebra

use approx::assert_relative_eq;
use krontrace::dense::DenseMatrix;
use krontrace::dims::Dims;
use krontrace::estimators;
use krontrace::linalg;
use krontrace::operator::{mixed_product, KronOperator};
use krontrace::query::KronQueryVector;
use krontrace::sampling::{sample_gaussian_vector, QueryDistribution, RngStream};
use krontrace::subsystems::{
    average_partial_transposes, partial_trace, partial_transpose, pmrdm, PmrdmPrefix, SubsystemSet,
};
use krontrace::variance::moment_oracle;
use krontrace::ScalarField;

fn random_matrix(side: usize, seed: u64) -> DenseMatrix {
    let g = sample_gaussian_vector(side * side, &RngStream::new(seed, 0));
    DenseMatrix::from_real(side, &g).unwrap()
}

fn random_query(dims: Dims, seed: u64) -> KronQueryVector {
    krontrace::sampling::sample_query(
        QueryDistribution::RealGaussian,
        dims,
        &RngStream::new(seed, 1),
    )
}

#[test]
fn apply_matches_materialized_matvec_for_every_representation() {
    let dims = Dims::new(2, 2).unwrap();
    let ops: Vec<KronOperator> = vec![
        KronOperator::explicit_dense(dims, random_matrix(4, 10)).unwrap(),
        KronOperator::kron_factors(dims, vec![random_matrix(2, 11), random_matrix(2, 12)]).unwrap(),
        KronOperator::sum_of_kron(
            dims,
            vec![
                vec![random_matrix(2, 13), random_matrix(2, 14)],
                vec![random_matrix(2, 15), random_matrix(2, 16)],
            ],
        )
        .unwrap(),
        KronOperator::rank_one(dims, sample_gaussian_vector(4, &RngStream::new(17, 0))).unwrap(),
        KronOperator::all_ones(dims),
        KronOperator::wishart(dims, 18),
    ];
    for (i, op) in ops.iter().enumerate() {
        let q = random_query(dims, 20 + i as u64);
        let via_oracle = op.apply(&q).unwrap();
        let dense = op.materialize().unwrap();
        let direct = dense.matvec(&q.expand()).unwrap();
        for (a, b) in via_oracle.iter().zip(direct.iter()) {
            assert!((a - b).norm() < 1e-12, "representation {i}: {a} vs {b}");
        }
    }
}

#[test]
fn kron_extract_identity_on_concrete_vectors() {
    // x ⊗ y == (Iₙ ⊗ y-as-column)·x == (x-as-column ⊗ Iₘ)·y
    let x = [2.0, -1.0, 0.5];
    let y = [3.0, 4.0];
    let n = x.len();
    let m = y.len();

    let mut direct = Vec::new();
    for xv in x {
        for yv in y {
            direct.push(xv * yv);
        }
    }

    // (Iₙ ⊗ y)·x, with Iₙ ⊗ y an nm × n matrix
    let mut via_left = vec![0.0; n * m];
    for col in 0..n {
        for r in 0..m {
            via_left[col * m + r] += y[r] * x[col];
        }
    }
    assert_eq!(via_left, direct);

    // (x ⊗ Iₘ)·y, with x ⊗ Iₘ an nm × m matrix
    let mut via_right = vec![0.0; n * m];
    for block in 0..n {
        for r in 0..m {
            via_right[block * m + r] += x[block] * y[r];
        }
    }
    assert_eq!(via_right, direct);
}

#[test]
fn mixed_product_on_basis_factors_reproduces_digit_flattening() {
    let dims = Dims::new(3, 2).unwrap();
    let eye = vec![DenseMatrix::identity(3), DenseMatrix::identity(3)];
    for index in 0..dims.total() {
        let digits = dims.index_digits(index).unwrap();
        // basis factors as rank-one column selectors: E_i = e_{digit} e_0ᵀ
        let selectors: Vec<DenseMatrix> = digits
            .iter()
            .map(|&digit| {
                let mut m = DenseMatrix::zeros(3, ScalarField::Real);
                m.set(digit, 0, num_complex::Complex64::new(1.0, 0.0));
                m
            })
            .collect();
        let product = mixed_product(&selectors, &eye).unwrap();
        // (⊗E_i)·(e_0 ⊗ e_0) = e_{digits}; read it off through a quadratic probe
        let op = KronOperator::kron_factors(dims, product).unwrap();
        let e0 = KronQueryVector::standard_basis(dims, &[0, 0]).unwrap();
        let out = op.apply(&e0).unwrap();
        for (i, v) in out.iter().enumerate() {
            let expected = if i == index { 1.0 } else { 0.0 };
            assert_relative_eq!(v.re, expected, epsilon = 1e-12);
        }
    }
}

#[test]
fn query_count_after_many_applies() {
    let dims = Dims::new(2, 3).unwrap();
    let op = KronOperator::wishart(dims, 5);
    let q = random_query(dims, 6);
    for _ in 0..123 {
        op.apply(&q).unwrap();
    }
    assert_eq!(op.query_count(), 123);
}

#[test]
fn partial_trace_preserves_trace_for_all_subsets() {
    for (d, k, seed) in [(2usize, 2usize, 30u64), (2, 3, 31), (3, 2, 32)] {
        let dims = Dims::new(d, k).unwrap();
        let a = random_matrix(dims.total(), seed);
        for mask in 0u32..(1u32 << k) {
            let s = SubsystemSet::from_mask(k, mask).unwrap();
            let traced = partial_trace(&a, &dims, &s).unwrap();
            assert_relative_eq!(traced.trace().re, a.trace().re, max_relative = 1e-12);
        }
    }
}

#[test]
fn partial_trace_composes_over_disjoint_subsets() {
    let dims = Dims::new(2, 3).unwrap();
    let a = random_matrix(8, 33);

    // tr_{1,3}(A) == tr_{1}(tr_{3}(A)) with survivors renumbered after the
    // inner trace ({1,2} remain, so original subsystem 1 is still 1).
    let joint = partial_trace(&a, &dims, &SubsystemSet::new(3, &[1, 3]).unwrap()).unwrap();
    let inner = partial_trace(&a, &dims, &SubsystemSet::new(3, &[3]).unwrap()).unwrap();
    let dims2 = Dims::new(2, 2).unwrap();
    let outer = partial_trace(&inner, &dims2, &SubsystemSet::new(2, &[1]).unwrap()).unwrap();
    assert!(joint.sub(&outer).unwrap().max_abs() < 1e-12);

    // tr_{2,3}(A) == tr_{2}(tr_{3}(A)): after tracing {3}, the survivors
    // {1,2} keep their labels, so old subsystem 2 is still 2.
    let joint = partial_trace(&a, &dims, &SubsystemSet::new(3, &[2, 3]).unwrap()).unwrap();
    let inner = partial_trace(&a, &dims, &SubsystemSet::new(3, &[3]).unwrap()).unwrap();
    let outer = partial_trace(&inner, &dims2, &SubsystemSet::new(2, &[2]).unwrap()).unwrap();
    assert!(joint.sub(&outer).unwrap().max_abs() < 1e-12);

    // and a non-contiguous pair: tr_{1,2}(A) == tr_{1}(tr_{1}(A)) where the
    // inner trace removes subsystem 1 and old 2 is renumbered 1.
    let joint = partial_trace(&a, &dims, &SubsystemSet::new(3, &[1, 2]).unwrap()).unwrap();
    let inner = partial_trace(&a, &dims, &SubsystemSet::new(3, &[1]).unwrap()).unwrap();
    let outer = partial_trace(&inner, &dims2, &SubsystemSet::new(2, &[1]).unwrap()).unwrap();
    assert!(joint.sub(&outer).unwrap().max_abs() < 1e-12);
}

#[test]
fn trace_of_transposed_subsystem_is_unchanged() {
    for (d, k, seed) in [(2usize, 3usize, 40u64), (3, 2, 41)] {
        let dims = Dims::new(d, k).unwrap();
        let a = random_matrix(dims.total(), seed);
        for i in 1..=k {
            let s = SubsystemSet::new(k, &[i]).unwrap();
            let transposed = partial_transpose(&a, &dims, &s).unwrap();
            let lhs = partial_trace(&transposed, &dims, &s).unwrap();
            let rhs = partial_trace(&a, &dims, &s).unwrap();
            assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12);
        }
    }
}

#[test]
fn partial_transpose_preserves_frobenius_norm() {
    for (d, k, seed) in [(2usize, 3usize, 42u64), (3, 2, 43)] {
        let dims = Dims::new(d, k).unwrap();
        let a = random_matrix(dims.total(), seed);
        for mask in 0u32..(1u32 << k) {
            let v = SubsystemSet::from_mask(k, mask).unwrap();
            let t = partial_transpose(&a, &dims, &v).unwrap();
            assert_relative_eq!(t.frob_norm_sq(), a.frob_norm_sq(), max_relative = 1e-12);
        }
    }
}

/// Rectangular sandwich `(B ⊗ e_left ⊗ C)ᵀ A (B ⊗ e_right ⊗ C)` computed by
/// explicit loops, for the reorder and sum-of-frobenius identities.
fn sandwich(
    a: &DenseMatrix,
    b: &[Vec<f64>],
    e_left: usize,
    e_right: usize,
    c: &[Vec<f64>],
    d: usize,
) -> Vec<Vec<f64>> {
    let nb = b.len();
    let nc = c.len();
    let side = nb * nc;
    let mut out = vec![vec![0.0; side]; side];
    // row of A decomposes as (p, e, q) over (nb, d, nc); sandwich row index (pb, pc)
    for (row_b, col_b) in (0..nb).flat_map(|r| (0..nb).map(move |c2| (r, c2))) {
        for (row_c, col_c) in (0..nc).flat_map(|r| (0..nc).map(move |c2| (r, c2))) {
            let mut acc = 0.0;
            for p in 0..nb {
                for q in 0..nc {
                    let a_row = (p * d + e_left) * nc + q;
                    for p2 in 0..nb {
                        for q2 in 0..nc {
                            let a_col = (p2 * d + e_right) * nc + q2;
                            acc += b[p][row_b]
                                * c[q][row_c]
                                * a.get(a_row, a_col).re
                                * b[p2][col_b]
                                * c[q2][col_c];
                        }
                    }
                }
            }
            out[row_b * nc + row_c][col_b * nc + col_c] = acc;
        }
    }
    out
}

fn random_small(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let flat = sample_gaussian_vector(n * n, &RngStream::new(seed, 2));
    (0..n).map(|r| flat[r * n..(r + 1) * n].to_vec()).collect()
}

#[test]
fn reorder_partial_transpose_swaps_basis_slots() {
    // (B ⊗ e_ĵ ⊗ C)ᵀ A (B ⊗ e_î ⊗ C) == (B ⊗ e_î ⊗ C)ᵀ A^{T_i} (B ⊗ e_ĵ ⊗ C)
    let d = 2;
    let dims = Dims::new(d, 3).unwrap();
    let a = random_matrix(8, 50);
    let b = random_small(2, 51);
    let c = random_small(2, 52);
    let at = partial_transpose(&a, &dims, &SubsystemSet::new(3, &[2]).unwrap()).unwrap();
    for i_hat in 0..d {
        for j_hat in 0..d {
            let lhs = sandwich(&a, &b, j_hat, i_hat, &c, d);
            let rhs = sandwich(&at, &b, i_hat, j_hat, &c, d);
            for (lr, rr) in lhs.iter().zip(rhs.iter()) {
                for (l, r) in lr.iter().zip(rr.iter()) {
                    assert_relative_eq!(l, r, epsilon = 1e-10);
                }
            }
        }
    }
}

#[test]
fn sum_of_sandwich_norms_equals_identity_sandwich_norm() {
    // Σ_{î,ĵ} ‖(C ⊗ e_î)ᵀ D (E ⊗ e_ĵ)‖_F² == ‖(C ⊗ I)ᵀ D (E ⊗ I)‖_F²
    let d = 2; // basis slot dimension
    let dmat = random_matrix(4, 60); // 4 = 2·2: (C-slot) ⊗ (basis slot)
    let c = random_small(2, 61);
    let e = random_small(2, 62);

    let nb = 2;
    let mut lhs = 0.0;
    for i_hat in 0..d {
        for j_hat in 0..d {
            // (C ⊗ e_î)ᵀ D (E ⊗ e_ĵ) is nb × nb
            let mut block = vec![vec![0.0; nb]; nb];
            for row in 0..nb {
                for col in 0..nb {
                    let mut acc = 0.0;
                    for p in 0..nb {
                        for q in 0..nb {
                            acc +=
                                c[p][row] * dmat.get(p * d + i_hat, q * d + j_hat).re * e[q][col];
                        }
                    }
                    block[row][col] = acc;
                }
            }
            lhs += block.iter().flatten().map(|x| x * x).sum::<f64>();
        }
    }

    // (C ⊗ I)ᵀ D (E ⊗ I), a 4×4 product
    let mut rhs = 0.0;
    for row in 0..nb {
        for ei in 0..d {
            for col in 0..nb {
                for ej in 0..d {
                    let mut acc = 0.0;
                    for p in 0..nb {
                        for q in 0..nb {
                            acc += c[p][row] * dmat.get(p * d + ei, q * d + ej).re * e[q][col];
                        }
                    }
                    rhs += acc * acc;
                }
            }
        }
    }
    assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
}

#[test]
fn partial_trace_of_gram_matrix_stays_psd() {
    for (d, k, seed) in [(2usize, 2usize, 70u64), (2, 3, 71), (3, 2, 72)] {
        let dims = Dims::new(d, k).unwrap();
        let m = random_matrix(dims.total(), seed);
        let a = m.transpose().matmul(&m).unwrap();
        let floor = -1e-10 * a.frob_norm_sq().sqrt();
        for mask in 0u32..(1u32 << k) {
            let s = SubsystemSet::from_mask(k, mask).unwrap();
            let traced = partial_trace(&a, &dims, &s).unwrap();
            let min = linalg::min_symmetric_eigenvalue(&traced).unwrap();
            assert!(min >= floor, "d={d} k={k} mask={mask}: min eig {min}");
        }
    }
}

#[test]
fn pmrdm_trace_equals_partial_trace_quadratic_form() {
    // tr(M(A, x_{:i})) == x_{:i}ᵀ · tr_{i+1:}(A) · x_{:i}
    let dims = Dims::new(2, 3).unwrap();
    let a = random_matrix(8, 80);
    for i in 0..=3usize {
        let factors: Vec<Vec<f64>> = (0..i)
            .map(|j| sample_gaussian_vector(2, &RngStream::new(81, j as u64)))
            .collect();
        let reduced = pmrdm(&a, &dims, &PmrdmPrefix::real(&factors)).unwrap();

        let tail: Vec<usize> = (i + 1..=3).collect();
        let traced = partial_trace(&a, &dims, &SubsystemSet::new(3, &tail).unwrap()).unwrap();
        let mut w = vec![1.0];
        for f in &factors {
            let mut next = Vec::with_capacity(w.len() * f.len());
            for a in &w {
                for b in f {
                    next.push(a * b);
                }
            }
            w = next;
        }
        let mut quad = 0.0;
        for (r, wr) in w.iter().enumerate() {
            for (c, wc) in w.iter().enumerate() {
                quad += wr * traced.get(r, c).re * wc;
            }
        }
        assert_relative_eq!(reduced.trace().re, quad, max_relative = 1e-10);
    }
}

#[test]
fn averaging_partial_transposes_is_idempotent() {
    for (d, k, seed) in [(2usize, 3usize, 90u64), (3, 2, 91)] {
        let dims = Dims::new(d, k).unwrap();
        let a = random_matrix(dims.total(), seed);
        let once = average_partial_transposes(&a, &dims).unwrap();
        let twice = average_partial_transposes(&once, &dims).unwrap();
        assert!(twice.sub(&once).unwrap().max_abs() < 1e-12);
        // and the average is fixed by every single partial transpose
        for i in 1..=k {
            let t = partial_transpose(&once, &dims, &SubsystemSet::new(k, &[i]).unwrap()).unwrap();
            assert!(t.sub(&once).unwrap().max_abs() < 1e-12);
        }
    }
}

#[test]
fn estimator_is_unbiased_under_the_moment_oracle() {
    // analytic E[quadratic form] equals the trace for every distribution
    for (d, k, seed) in [(2usize, 2usize, 100u64), (3, 2, 101)] {
        let dims = Dims::new(d, k).unwrap();
        let a = random_matrix(dims.total(), seed);
        for dist in QueryDistribution::ALL {
            let m = moment_oracle(&a, &dims, dist).unwrap();
            assert_relative_eq!(m.mean, a.trace().re, max_relative = 1e-10);
        }
    }
}

#[test]
fn query_count_is_exact_under_concurrent_probing() {
    let dims = Dims::new(2, 2).unwrap();
    let op = KronOperator::wishart(dims, 120);
    let per_thread = 250u64;
    std::thread::scope(|scope| {
        for t in 0..4u64 {
            let op = &op;
            scope.spawn(move || {
                let q = random_query(dims, 121 + t);
                for _ in 0..per_thread {
                    op.apply(&q).unwrap();
                }
            });
        }
    });
    assert_eq!(op.query_count(), 4 * per_thread);
}

#[test]
fn estimate_value_is_mean_of_retained_samples() {
    let dims = Dims::new(2, 2).unwrap();
    let op = KronOperator::wishart(dims, 130);
    let est = estimators::kron_hutchinson(
        &op,
        QueryDistribution::ComplexGaussian,
        37,
        &RngStream::new(131, 0),
        true,
    )
    .unwrap();
    let samples = est.per_sample.as_ref().unwrap();
    let mean_re = samples.iter().map(|z| z.re).sum::<f64>() / samples.len() as f64;
    assert_relative_eq!(est.value, mean_re, max_relative = 1e-14);
    assert_eq!(est.num_samples, 37);
    assert_eq!(est.queries_used, 37);
}

#[test]
fn recovered_factor_traces_multiply_to_the_trace() {
    for (d, k, seed) in [(2usize, 2usize, 110u64), (2, 3, 111), (3, 2, 112)] {
        let dims = Dims::new(d, k).unwrap();
        let factors: Vec<DenseMatrix> = (0..k)
            .map(|i| random_matrix(d, seed + 10 * i as u64))
            .collect();
        let expected: f64 = factors.iter().map(|f| f.trace().re).product();
        let op = KronOperator::kron_factors(dims, factors).unwrap();
        let rec = estimators::exact_kron_recovery(&op, &RngStream::new(seed, 7)).unwrap();
        assert_eq!(rec.queries_used, (d * k) as u64 + 1);
        assert_relative_eq!(rec.trace(), expected, max_relative = 1e-8);
    }
}
