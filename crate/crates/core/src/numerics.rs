//! Small shared numerical kernels: deterministic reductions, least-squares
//! lines, and pivoted solves for symmetric tridiagonal systems with unit
//! off-diagonals.

/// Pairwise (cascade) summation. Error grows like log(n) instead of n, and
/// the split points depend only on the slice length, so the result is
/// independent of how the values were produced (thread count included).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        3 => (xs[0] + xs[1]) + xs[2],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample standard deviation of the mean (stderr); 0 for fewer than two
/// samples.
pub fn stderr_of_mean(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Ordinary least squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    let sxy: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let sxx = pairwise_sum(&sxx);
    if sxx == 0.0 {
        return None;
    }
    let slope = pairwise_sum(&sxy) / sxx;
    let intercept = my - slope * mx;
    let ss_res: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .collect();
    let ss_tot: Vec<f64> = ys.iter().map(|y| (y - my) * (y - my)).collect();
    let ss_res = pairwise_sum(&ss_res);
    let ss_tot = pairwise_sum(&ss_tot);
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(LineFit { slope, intercept, r_squared, points: n })
}

/// LU factorization with partial pivoting of `T - shift * I`, where `T` is
/// symmetric tridiagonal with the given diagonal and unit off-diagonals.
/// Pivoting introduces one extra superdiagonal (standard banded fill-in).
pub struct TridiagFactor {
    n: usize,
    /// Main diagonal of U.
    d: Vec<f64>,
    /// First superdiagonal of U.
    u1: Vec<f64>,
    /// Second superdiagonal of U (fill-in from row swaps).
    u2: Vec<f64>,
    /// Subdiagonal multipliers of L.
    l: Vec<f64>,
    /// Row-swap flags per elimination step.
    swapped: Vec<bool>,
}

impl TridiagFactor {
    pub fn new(diag: &[f64], shift: f64) -> Self {
        let n = diag.len();
        assert!(n >= 1, "empty system");
        let mut d: Vec<f64> = diag.iter().map(|&x| x - shift).collect();
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut swapped = vec![false; n];
        // Unit off-diagonals to start with.
        for item in u1.iter_mut().take(n.saturating_sub(1)) {
            *item = 1.0;
        }
        for k in 0..n.saturating_sub(1) {
            // Row k has (d[k], u1[k], u2[k]); row k+1 has (1, d[k+1], u1[k+1]).
            if d[k].abs() < 1.0 {
                // |sub| = 1 >= |pivot|: swap rows k and k+1.
                swapped[k] = true;
                let (rk0, rk1, rk2) = (1.0, d[k + 1], u1[k + 1]);
                let (sk0, sk1, sk2) = (d[k], u1[k], u2[k]);
                d[k] = rk0;
                u1[k] = rk1;
                u2[k] = rk2;
                d[k + 1] = sk1;
                u1[k + 1] = sk2;
                let m = sk0 / rk0;
                l[k] = m;
                d[k + 1] -= m * rk1;
                u1[k + 1] -= m * rk2;
            } else {
                let m = 1.0 / d[k];
                l[k] = m;
                d[k + 1] -= m * u1[k];
                u1[k + 1] -= m * u2[k];
            }
        }
        if d[n - 1] == 0.0 {
            // Exactly singular: nudge so solves stay finite; callers that
            // care about conditioning check residuals or eigenvalue
            // distance themselves.
            d[n - 1] = f64::MIN_POSITIVE.sqrt();
        }
        TridiagFactor { n, d, u1, u2, l, swapped }
    }

    /// Solves `(T - shift I) x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "rhs length mismatch");
        let n = self.n;
        for k in 0..n.saturating_sub(1) {
            if self.swapped[k] {
                b.swap(k, k + 1);
            }
            b[k + 1] -= self.l[k] * b[k];
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            if k + 1 < n {
                s -= self.u1[k] * b[k + 1];
            }
            if k + 2 < n {
                s -= self.u2[k] * b[k + 2];
            }
            b[k] = s / self.d[k];
        }
    }
}

/// Residual `max_m |(T x)(m) - shift x(m) - b(m)|` for the same implicit
/// matrix as [`TridiagFactor`]; used by tests and eigenpair validation.
pub fn tridiag_residual(diag: &[f64], shift: f64, x: &[f64], b: &[f64]) -> f64 {
    let n = diag.len();
    let mut worst = 0.0f64;
    for m in 0..n {
        let mut s = (diag[m] - shift) * x[m];
        if m > 0 {
            s += x[m - 1];
        }
        if m + 1 < n {
            s += x[m + 1];
        }
        worst = worst.max((s - b[m]).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_is_split_invariant() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 2654435761u64 as usize) % 997) as f64 / 997.0).collect();
        let total = pairwise_sum(&xs);
        let expected: f64 = xs.iter().sum();
        assert!(
            (total - expected).abs() < 1e-9,
            "pairwise {total} vs naive {expected}"
        );
    }

    #[test]
    fn fit_line_recovers_exact_line() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.5 - 0.7 * x).collect();
        let fit = fit_line(&xs, &ys).expect("fit");
        assert!((fit.slope + 0.7).abs() < 1e-12, "slope {}", fit.slope);
        assert!((fit.intercept - 3.5).abs() < 1e-12, "intercept {}", fit.intercept);
        assert!((fit.r_squared - 1.0).abs() < 1e-12, "r2 {}", fit.r_squared);
    }

    #[test]
    fn fit_line_r2_near_zero_for_flat_noise() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let fit = fit_line(&xs, &ys).expect("fit");
        assert!(fit.slope.abs() < 0.01, "slope {}", fit.slope);
        assert!(fit.r_squared < 0.1, "r2 {}", fit.r_squared);
    }

    #[test]
    fn tridiag_solve_matches_manual_residual() {
        // Mildly indefinite system; pivoting must keep it stable.
        let diag: Vec<f64> = (0..40).map(|i| ((i * 7919) % 11) as f64 / 3.0 - 1.5).collect();
        let shift = 0.37;
        let b: Vec<f64> = (0..40).map(|i| ((i * 104729) % 13) as f64 / 13.0).collect();
        let f = TridiagFactor::new(&diag, shift);
        let mut x = b.clone();
        f.solve(&mut x);
        let r = tridiag_residual(&diag, shift, &x, &b);
        assert!(r < 1e-9, "solve residual {r:.3e}");
    }

    #[test]
    fn tridiag_solve_handles_zero_leading_pivot() {
        let diag = vec![0.3, 0.3, 0.3, 0.3]; // with shift 0.3 every pivot starts at 0
        let b = vec![1.0, 0.0, 0.0, 1.0];
        let f = TridiagFactor::new(&diag, 0.3);
        let mut x = b.clone();
        f.solve(&mut x);
        let r = tridiag_residual(&diag, 0.3, &x, &b);
        assert!(r < 1e-10, "residual {r:.3e} with zero diagonal pivots");
    }
}
