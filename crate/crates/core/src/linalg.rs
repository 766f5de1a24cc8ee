//! Small dense complex linear algebra helpers: numerical nullspace and
//! least squares over `Complex<T>` via SVD.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{cabs, czero, Cx, Real};

/// Hard cap on the number of unknowns of any assembled linear system.
pub const SYSTEM_CAP: usize = 20_000;

/// Orthonormal basis of the numerical nullspace of `a`.
///
/// Singular values below `tol * sigma_max` are treated as zero. The basis
/// vectors are the trailing right singular vectors, with a canonical phase:
/// the entry of largest modulus is made real positive.
pub fn nullspace<T: Real>(a: &DMatrix<Cx<T>>, tol: T) -> Vec<DVector<Cx<T>>> {
    let ncols = a.ncols();
    if ncols == 0 {
        return Vec::new();
    }
    // The SVD is thin; pad with zero rows so that V covers all of C^n.
    let m = if a.nrows() < ncols {
        let mut padded = DMatrix::from_element(ncols, ncols, czero::<T>());
        padded.view_mut((0, 0), (a.nrows(), ncols)).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("svd with v requested");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().fold(T::zero(), |acc, &s| if s > acc { s } else { acc });
    let cut = tol * sigma_max;
    let mut basis = Vec::new();
    for i in 0..v_t.nrows() {
        if sigma[i] <= cut {
            let mut v: DVector<Cx<T>> = v_t.row(i).adjoint();
            canonical_phase(&mut v);
            basis.push(v);
        }
    }
    basis
}

/// Rotates `v` by a global phase so its largest-modulus entry is real
/// positive. Keeps reported bases reproducible.
pub fn canonical_phase<T: Real>(v: &mut DVector<Cx<T>>) {
    let mut best = 0usize;
    let mut best_abs = T::zero();
    for (i, z) in v.iter().enumerate() {
        let a = cabs(*z);
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if best_abs > T::zero() {
        let z = v[best];
        let phase = Cx::new(z.re / best_abs, -z.im / best_abs);
        for entry in v.iter_mut() {
            *entry *= phase;
        }
    }
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn least_squares<T: Real>(
    a: &DMatrix<Cx<T>>,
    b: &DVector<Cx<T>>,
    tol: T,
) -> DVector<Cx<T>> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, tol).expect("svd solve")
}

/// Max absolute entry of `m - I`.
pub fn identity_defect<T: Real>(m: &DMatrix<Cx<T>>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j {
                Cx::new(T::one(), T::zero())
            } else {
                czero::<T>()
            };
            let d = cabs(m[(i, j)] - target);
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_rank_one() {
        // Rows proportional: rank 1 in C^3, nullspace dim 2.
        let a = DMatrix::from_row_slice(
            2,
            3,
            &[
                Cx::new(1.0, 0.0),
                Cx::new(0.0, 1.0),
                Cx::new(2.0, 0.0),
                Cx::new(2.0, 0.0),
                Cx::new(0.0, 2.0),
                Cx::new(4.0, 0.0),
            ],
        );
        let basis = nullspace(&a, 1e-12);
        assert_eq!(basis.len(), 2);
        for v in &basis {
            let r = &a * v;
            assert!(r.iter().all(|z| cabs(*z) < 1e-12));
            let norm: f64 = v.iter().map(|z| z.re * z.re + z.im * z.im).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nullspace_handles_wide_systems() {
        // 1 equation, 3 unknowns: nullspace dim 2.
        let a = DMatrix::from_row_slice(
            1,
            3,
            &[Cx::new(1.0, 0.0), Cx::new(1.0, 0.0), Cx::new(1.0, -1.0)],
        );
        let basis = nullspace(&a, 1e-12);
        assert_eq!(basis.len(), 2);
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Cx::new(2.0, 0.0),
                Cx::new(0.0, 0.0),
                Cx::new(0.0, 0.0),
                Cx::new(0.0, 3.0),
            ],
        );
        let b = DVector::from_vec(vec![Cx::new(4.0, 0.0), Cx::new(0.0, 3.0)]);
        let x = least_squares(&a, &b, 1e-12);
        assert!(cabs(x[0] - Cx::new(2.0, 0.0)) < 1e-12);
        assert!(cabs(x[1] - Cx::new(1.0, 0.0)) < 1e-12);
    }
}
