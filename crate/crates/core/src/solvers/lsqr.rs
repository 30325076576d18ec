//! Complex LSQR (Paige and Saunders) for matrix-free operators.

use num_complex::Complex64;

use crate::norm2;

#[derive(Debug, Clone, PartialEq)]
pub struct LsqrResult {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// `||b - A x||`, estimated by the recurrence.
    pub residual_norm: f64,
    /// False when `maxiter` was reached before either stopping test held.
    pub converged: bool,
}

fn scale(v: &mut [Complex64], s: f64) {
    v.iter_mut().for_each(|z| *z *= s);
}

/// Least-squares solution of `A x = b` started from `x = 0`.
///
/// Stops when `||r|| <= tol ||b||` (consistent systems) or when
/// `||A* r|| <= tol ||A|| ||r||` (inconsistent systems), with `||A||`
/// estimated from the bidiagonalisation. From a zero start the iterates stay
/// in the range of `A*`, so underdetermined consistent systems return the
/// minimum-norm solution.
pub fn lsqr<F, G>(mut apply: F, mut adjoint: G, b: &[Complex64], n: usize, tol: f64, maxiter: usize) -> LsqrResult
where
    F: FnMut(&[Complex64]) -> Vec<Complex64>,
    G: FnMut(&[Complex64]) -> Vec<Complex64>,
{
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let bnorm = norm2(b);
    let done = |x, iterations, residual_norm| LsqrResult { x, iterations, residual_norm, converged: true };
    if bnorm == 0.0 {
        return done(x, 0, 0.0);
    }
    let mut u = b.to_vec();
    let mut beta = bnorm;
    scale(&mut u, 1.0 / beta);
    let mut v = adjoint(&u);
    let mut alpha = norm2(&v);
    if alpha == 0.0 {
        return done(x, 0, bnorm);
    }
    scale(&mut v, 1.0 / alpha);
    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm_sq = alpha * alpha;

    for it in 1..=maxiter {
        let av = apply(&v);
        for (ui, avi) in u.iter_mut().zip(av) {
            *ui = avi - *ui * alpha;
        }
        beta = norm2(&u);
        if beta > 0.0 {
            scale(&mut u, 1.0 / beta);
        }
        anorm_sq += beta * beta;
        let atu = adjoint(&u);
        for (vi, a) in v.iter_mut().zip(atu) {
            *vi = a - *vi * beta;
        }
        alpha = norm2(&v);
        if alpha > 0.0 {
            scale(&mut v, 1.0 / alpha);
        }
        anorm_sq += alpha * alpha;

        let rho = rhobar.hypot(beta);
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;

        let t1 = phi / rho;
        let t2 = theta / rho;
        for ((xi, wi), vi) in x.iter_mut().zip(w.iter_mut()).zip(&v) {
            *xi += *wi * t1;
            *wi = *vi - *wi * t2;
        }

        let rnorm = phibar;
        let arnorm = phibar * alpha * c.abs();
        if rnorm <= tol * bnorm || arnorm <= tol * anorm_sq.sqrt() * rnorm || alpha == 0.0 {
            return done(x, it, rnorm);
        }
    }
    LsqrResult {
        x,
        iterations: maxiter,
        residual_norm: phibar,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::DMatrix;

    fn random_matrix(rows: usize, cols: usize, key: u64) -> DMatrix<Complex64> {
        let v = rng::normal_pairs(key, rows * cols);
        DMatrix::from_iterator(rows, cols, v.into_iter().map(|(a, b)| Complex64::new(a, b)))
    }

    fn solve(a: &DMatrix<Complex64>, b: &[Complex64]) -> LsqrResult {
        let ah = a.adjoint();
        lsqr(
            |x| (a * DMatrix::from_column_slice(x.len(), 1, x)).as_slice().to_vec(),
            |y| (&ah * DMatrix::from_column_slice(y.len(), 1, y)).as_slice().to_vec(),
            b,
            a.ncols(),
            1e-14,
            100,
        )
    }

    fn pinv_solution(a: &DMatrix<Complex64>, b: &[Complex64]) -> Vec<Complex64> {
        let p = a.clone().pseudo_inverse(1e-12).unwrap();
        (p * DMatrix::from_column_slice(b.len(), 1, b)).as_slice().to_vec()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_in_one_iteration() {
        let b: Vec<Complex64> = rng::normal_pairs(1, 7).into_iter().map(|(a, c)| Complex64::new(a, c)).collect();
        let r = lsqr(|x| x.to_vec(), |y| y.to_vec(), &b, 7, 1e-12, 10);
        assert_eq!(r.iterations, 1);
        assert!(max_diff(&r.x, &b) < 1e-14);
    }

    #[test]
    fn overdetermined_matches_pseudo_inverse() {
        for key in 0..5 {
            let a = random_matrix(5, 3, key);
            let b: Vec<Complex64> = random_matrix(5, 1, key + 100).as_slice().to_vec();
            let r = solve(&a, &b);
            assert!(r.converged);
            assert!(max_diff(&r.x, &pinv_solution(&a, &b)) < 1e-8);
        }
    }

    #[test]
    fn underdetermined_gives_minimum_norm() {
        for key in 0..5 {
            let a = random_matrix(3, 5, key);
            let b: Vec<Complex64> = random_matrix(3, 1, key + 100).as_slice().to_vec();
            let r = solve(&a, &b);
            assert!(r.converged);
            assert!(max_diff(&r.x, &pinv_solution(&a, &b)) < 1e-8);
        }
    }

    #[test]
    fn zero_rhs_and_flagged_exhaustion() {
        let a = random_matrix(6, 6, 3);
        let r = solve(&a, &[Complex64::new(0.0, 0.0); 6]);
        assert!(r.converged && r.iterations == 0);
        let ah = a.adjoint();
        let b: Vec<Complex64> = random_matrix(6, 1, 4).as_slice().to_vec();
        let r = lsqr(
            |x| (&a * DMatrix::from_column_slice(6, 1, x)).as_slice().to_vec(),
            |y| (&ah * DMatrix::from_column_slice(6, 1, y)).as_slice().to_vec(),
            &b,
            6,
            1e-16,
            2,
        );
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
    }
}
