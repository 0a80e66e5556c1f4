//! Small numerical kernels shared by the modules: fixed-tree summation,
//! subspace geometry and bracketed root finding.

use nalgebra::{DMatrix, DVector};

/// Sum with a fixed binary tree. The result depends only on the order of
/// `values`, never on how work was scheduled.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Orthonormal basis for the column span of `m` (thin QR).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.ncols();
    let q = m.clone().qr().q();
    q.columns(0, k).into_owned()
}

/// QR of `m` returning the thin `Q` and `log |R_ii|`.
pub fn qr_log_diag(m: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let k = m.ncols();
    let qr = m.qr();
    let r = qr.r();
    let logs = (0..k).map(|i| r[(i, i)].abs().ln()).collect();
    (qr.q().columns(0, k).into_owned(), logs)
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.norm();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |a, &s| a.max(s))
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// k-dimensional volume spanned by the columns: `sqrt(det(MᵀM))`.
pub fn gram_volume(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    g.determinant().max(0.0).sqrt()
}

/// Sine of the largest principal angle between the column spans of two
/// matrices with orthonormal columns and equal rank.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let residual = a - b * (b.transpose() * a);
    operator_norm(&residual).min(1.0)
}

/// Condition number of a square or tall matrix (ratio of extreme singular values).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Root of a scalar function on `[lo, hi]`, Newton steps safeguarded by
/// bisection. Returns `None` when the endpoints do not bracket a root.
pub fn bracketed_root(
    f: impl Fn(f64) -> Option<f64>,
    lo: f64,
    hi: f64,
    guess: f64,
    tol: f64,
) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let rising = fb > fa;
    let mut x = guess.clamp(a, b);
    let h = 1e-7 * (hi - lo).abs().max(f64::MIN_POSITIVE);
    for _ in 0..200 {
        let fx = f(x)?;
        if fx == 0.0 {
            return Some(x);
        }
        if (fx > 0.0) == rising {
            b = x;
        } else {
            a = x;
        }
        if (b - a).abs() <= tol {
            return Some(0.5 * (a + b));
        }
        let xp = (x + h).min(hi);
        let xm = (x - h).max(lo);
        let slope = match (f(xp), f(xm)) {
            (Some(p), Some(m)) if xp > xm => (p - m) / (xp - xm),
            _ => 0.0,
        };
        let newton = if slope != 0.0 { x - fx / slope } else { f64::NAN };
        let next = if newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= tol {
            return Some(next);
        }
        x = next;
    }
    Some(0.5 * (a + b))
}

/// Damped Newton for `f(x) = 0` in a box `|x_i| <= radius_i`, with a
/// finite-difference Jacobian. Returns `None` when an iterate stays outside
/// the box or the iteration stalls.
pub fn box_newton(
    f: impl Fn(&[f64]) -> Option<Vec<f64>>,
    radius: &[f64],
    guess: &[f64],
    tol: f64,
) -> Option<Vec<f64>> {
    let n = guess.len();
    let mut x: Vec<f64> = guess.to_vec();
    let mut fx = DVector::from_vec(f(&x)?);
    for _ in 0..80 {
        if fx.amax() <= tol {
            return Some(x);
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * radius[j].max(f64::MIN_POSITIVE);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fp = DVector::from_vec(f(&xp)?);
            let fm = DVector::from_vec(f(&xm)?);
            jac.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        let step = jac.lu().solve(&(-&fx))?;
        let mut t = 1.0;
        let current = fx.norm();
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let inside = trial
                .iter()
                .zip(radius)
                .all(|(v, r)| v.abs() <= r * (1.0 + 1e-9) + tol);
            if inside {
                if let Some(ft) = f(&trial) {
                    let ft = DVector::from_vec(ft);
                    if ft.norm() < current || ft.amax() <= tol {
                        x = trial;
                        fx = ft;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return None;
        }
        if step.amax() * t <= tol * 1e-3 && fx.amax() > tol {
            return None;
        }
    }
    (fx.amax() <= tol).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 55.0);
        let w: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&w), 500_500.0);
    }

    #[test]
    fn subspace_distance_of_rotated_lines() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let th = 0.3_f64;
        let b = DMatrix::from_column_slice(2, 1, &[th.cos(), th.sin()]);
        assert!((subspace_distance(&a, &b) - th.sin()).abs() < 1e-14);
        assert!(subspace_distance(&a, &a) < 1e-15);
    }

    #[test]
    fn bracketed_root_finds_cubic_root() {
        let r = bracketed_root(|x| Some(x * x * x - 2.0), 0.0, 2.0, 1.0, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
        assert!(bracketed_root(|x| Some(x * x + 1.0), -1.0, 1.0, 0.0, 1e-12).is_none());
    }

    #[test]
    fn box_newton_solves_linear_system() {
        let sol = box_newton(
            |x| Some(vec![2.0 * x[0] + x[1] - 0.1, x[0] - x[1] + 0.05]),
            &[1.0, 1.0],
            &[0.0, 0.0],
            1e-14,
        )
        .unwrap();
        assert!((sol[0] - 0.05 / 3.0).abs() < 1e-12);
        assert!((sol[1] - (0.1 - 0.1 / 3.0)).abs() < 1e-12);
    }
}
