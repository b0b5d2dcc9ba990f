//! Large-deviation statistics of the characteristic determinants over the
//! phase: measure and covering structure of the deviation set, cluster
//! decomposition of box eigenvalues around a reference energy, stability
//! of the regular factor logs, and the zero-count identity.

use crate::arithmetic::beta_points;
use crate::cocycle::{det_sequence, lyapunov_finite, periodic_det, Sampling};
use crate::error::{Error, Result};
use crate::operator::BoundaryCondition;
use crate::potential::OperatorSpec;
use crate::spectral::{dirichlet_count_below, spectrum_of_diag};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Largest cluster size the default selection will assign around E.
const C2_CAP: usize = 8;

fn scale_q(spec: &OperatorSpec, k: usize) -> Result<usize> {
    if k < 1 || k >= spec.cf.depth() {
        return Err(Error::invalid(format!("scale k = {k} outside expansion depth")));
    }
    let q = spec.cf.q_at(k);
    if q > 100_000 {
        return Err(Error::Capacity(format!("box size {q} too large for phase scans")));
    }
    Ok(q as usize)
}

/// Measure and covering structure of {x : |P_q(x, E)| < exp(q (gamma - delta))}.
#[derive(Clone, Debug)]
pub struct DeviationReport {
    pub q: usize,
    pub e: f64,
    pub delta: f64,
    /// Lyapunov exponent the threshold was built from.
    pub gamma: f64,
    /// Grid fraction of below-threshold phases.
    pub measure: f64,
    /// Number of maximal below-threshold runs, merged circularly.
    pub intervals: usize,
    /// Length of the longest run, in phase measure.
    pub max_interval_len: f64,
    pub grid: usize,
}

/// Evaluates ln|P_q(x, E)| on a phase grid and reports how much of the
/// circle falls below the deviation threshold q (gamma - delta), together
/// with the interval structure of that set. `gamma` may be supplied to
/// reuse one Lyapunov estimate across scales; otherwise a deterministic
/// orbit average at n = 2000 is computed.
pub fn deviation_set(
    spec: &OperatorSpec,
    k: usize,
    e: f64,
    delta: f64,
    x_grid: usize,
    gamma: Option<f64>,
) -> Result<DeviationReport> {
    let q = scale_q(spec, k)?;
    if x_grid < 100 * q {
        return Err(Error::invalid(format!(
            "phase grid {x_grid} too coarse for q = {q} (need >= {})",
            100 * q
        )));
    }
    let gamma = match gamma {
        Some(g) => g,
        None => lyapunov_finite(spec, e, 2000, Sampling::Birkhoff { windows: 16 })?.gamma,
    };
    if !(delta > 0.0 && delta < gamma) {
        return Err(Error::invalid(format!(
            "need 0 < delta < gamma, got delta = {delta}, gamma = {gamma:.4}"
        )));
    }
    let threshold = q as f64 * (gamma - delta);
    let below: Vec<bool> = (0..x_grid)
        .into_par_iter()
        .map(|j| {
            let x = (j as f64 + 0.5) / x_grid as f64;
            let diag = spec.with_phase(x).sample_orbit(q, false);
            let ln_p = det_sequence(&diag, e)[q].ln_abs();
            ln_p < threshold
        })
        .collect();
    let total = below.iter().filter(|&&b| b).count();
    // Merge maximal runs, joining across the wrap.
    let mut runs: Vec<usize> = Vec::new();
    let mut cur = 0usize;
    for &b in &below {
        if b {
            cur += 1;
        } else if cur > 0 {
            runs.push(cur);
            cur = 0;
        }
    }
    if cur > 0 {
        if below[0] && !runs.is_empty() && below[x_grid - 1] {
            runs[0] += cur;
        } else {
            runs.push(cur);
        }
    }
    let intervals = if total == x_grid { 1 } else { runs.len() };
    let max_run = runs.iter().copied().max().unwrap_or(0);
    Ok(DeviationReport {
        q,
        e,
        delta,
        gamma,
        measure: total as f64 / x_grid as f64,
        intervals,
        max_interval_len: max_run as f64 / x_grid as f64,
        grid: x_grid,
    })
}

/// Decomposition of a box spectrum into the clusters below, around and
/// above a reference energy, with the matching factorization of the
/// characteristic determinant.
#[derive(Clone, Debug)]
pub struct ClusterSplit {
    pub q: usize,
    pub e: f64,
    pub bc: BoundaryCondition,
    /// Eigenvalues above E, nearest first.
    pub nu_plus: Vec<f64>,
    /// Eigenvalues around E (the central cluster).
    pub nu_zero: Vec<f64>,
    /// Eigenvalues below E, nearest first.
    pub nu_minus: Vec<f64>,
    pub ln_p_plus: f64,
    pub ln_p_zero: f64,
    pub ln_p_minus: f64,
    /// Largest C1 with nu_j^{+-} at distance >= j C1 / q from E.
    pub fitted_c1: f64,
    /// ln of the determinant from the independent minor recursion.
    pub ln_p_total: f64,
    /// |ln_p_total - (ln_p_plus + ln_p_zero + ln_p_minus)|.
    pub factorization_defect: f64,
}

/// Largest C1 such that the j-th eigenvalue on each side of e, after
/// excluding the c2 nearest ones, sits at distance >= j C1 / q.
fn fit_c1(mus: &[f64], e: f64, c2: usize, q: usize) -> f64 {
    let mut order: Vec<usize> = (0..mus.len()).collect();
    order.sort_by(|&a, &b| {
        (mus[a] - e)
            .abs()
            .partial_cmp(&(mus[b] - e).abs())
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });
    let excluded: std::collections::HashSet<usize> = order.iter().take(c2).copied().collect();
    let mut above: Vec<f64> = Vec::new();
    let mut below: Vec<f64> = Vec::new();
    for (i, &mu) in mus.iter().enumerate() {
        if excluded.contains(&i) {
            continue;
        }
        if mu >= e {
            above.push(mu - e);
        } else {
            below.push(e - mu);
        }
    }
    above.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    below.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mut c1 = f64::INFINITY;
    for (j, d) in above.iter().enumerate() {
        c1 = c1.min(q as f64 * d / (j + 1) as f64);
    }
    for (j, d) in below.iter().enumerate() {
        c1 = c1.min(q as f64 * d / (j + 1) as f64);
    }
    c1
}

/// Splits the spectrum of the q_k-site restriction at phase x around E and
/// factors the characteristic determinant accordingly. With
/// `window_c2 = None` the central cluster is grown to the fixed point of
/// "everything within C1/(2q) of E", capped at 8; an explicit count pins
/// it for comparisons across phases.
pub fn cluster_split(
    spec: &OperatorSpec,
    k: usize,
    x: f64,
    e: f64,
    window_c2: Option<usize>,
    bc: BoundaryCondition,
) -> Result<ClusterSplit> {
    let q = scale_q(spec, k)?;
    let diag = spec.with_phase(x).sample_orbit(q, false);
    let mus = spectrum_of_diag(&diag, bc, 1e-12)?;
    let c2 = match window_c2 {
        Some(c) => {
            if c > q {
                return Err(Error::invalid(format!("central cluster {c} exceeds box size {q}")));
            }
            c
        }
        None => {
            let mut c2 = 0usize;
            loop {
                let c1 = fit_c1(&mus, e, c2, q);
                let grown = mus.iter().filter(|&&mu| (mu - e).abs() < c1 / (2.0 * q as f64)).count();
                if grown <= c2 || c2 >= C2_CAP {
                    break;
                }
                c2 = grown.min(C2_CAP);
            }
            c2
        }
    };
    let fitted_c1 = fit_c1(&mus, e, c2, q);
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| {
        (mus[a] - e)
            .abs()
            .partial_cmp(&(mus[b] - e).abs())
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });
    let mut nu_zero: Vec<f64> = order.iter().take(c2).map(|&i| mus[i]).collect();
    nu_zero.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    let rest: Vec<f64> = order.iter().skip(c2).map(|&i| mus[i]).collect();
    let mut nu_plus: Vec<f64> = rest.iter().copied().filter(|&mu| mu >= e).collect();
    let mut nu_minus: Vec<f64> = rest.iter().copied().filter(|&mu| mu < e).collect();
    nu_plus.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    nu_minus.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));

    let ln_of = |nu: &[f64]| -> Result<f64> {
        let mut s = 0.0;
        for &mu in nu {
            let d = (mu - e).abs();
            if d < 1e-300 {
                return Err(Error::NearEigenvalue { distance: d });
            }
            s += d.ln();
        }
        Ok(s)
    };
    let ln_p_plus = ln_of(&nu_plus)?;
    let ln_p_zero = ln_of(&nu_zero)?;
    let ln_p_minus = ln_of(&nu_minus)?;
    let ln_p_total = match bc {
        BoundaryCondition::Dirichlet => det_sequence(&diag, e)[q].ln_abs(),
        BoundaryCondition::Periodic => periodic_det(&diag, e).value.ln_abs(),
    };
    let factorization_defect = (ln_p_total - (ln_p_plus + ln_p_zero + ln_p_minus)).abs();
    Ok(ClusterSplit {
        q,
        e,
        bc,
        nu_plus,
        nu_zero,
        nu_minus,
        ln_p_plus,
        ln_p_zero,
        ln_p_minus,
        fitted_c1,
        ln_p_total,
        factorization_defect,
    })
}

#[derive(Clone, Debug)]
pub struct LogStabilityReport {
    pub q: usize,
    pub e: f64,
    /// Max over pairs of |ln|P^+-(x)| - ln|P^+-(y)||.
    pub max_dev: f64,
    /// max_dev / ln(q).
    pub ratio: f64,
    pub pairs: usize,
    /// Central cluster size shared by all compared splits.
    pub c2_used: usize,
}

/// Measures how much the regular factor logs move between phases drawn
/// from breakpoints and segment midpoints. The central cluster size is
/// fixed across all evaluations so the factors are comparable.
pub fn log_stability(spec: &OperatorSpec, k: usize, pairs: usize, e: f64) -> Result<LogStabilityReport> {
    let q = scale_q(spec, k)?;
    if pairs == 0 {
        return Err(Error::invalid("need at least one pair"));
    }
    let betas = beta_points(q, spec.alpha_dd())?;
    let mut points: Vec<f64> = betas.iter().map(|b| b.value).collect();
    for i in 0..betas.len() {
        let a = betas[i].value;
        let b = if i + 1 < betas.len() { betas[i + 1].value } else { 1.0 };
        points.push(0.5 * (a + b));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d7);
    let mut chosen: Vec<(f64, f64)> = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let a = *points.choose(&mut rng).expect("nonempty point set");
        let b = *points.choose(&mut rng).expect("nonempty point set");
        chosen.push((a, b));
    }
    // Shared central cluster size: the largest default choice seen.
    let mut c2 = 0usize;
    for &(a, b) in &chosen {
        for x in [a, b] {
            let s = cluster_split(spec, k, x, e, None, BoundaryCondition::Dirichlet)?;
            c2 = c2.max(s.nu_zero.len());
        }
    }
    let devs: Vec<f64> = chosen
        .par_iter()
        .map(|&(a, b)| -> Result<f64> {
            let sa = cluster_split(spec, k, a, e, Some(c2), BoundaryCondition::Dirichlet)?;
            let sb = cluster_split(spec, k, b, e, Some(c2), BoundaryCondition::Dirichlet)?;
            Ok((sa.ln_p_plus - sb.ln_p_plus).abs().max((sa.ln_p_minus - sb.ln_p_minus).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_dev = devs.iter().copied().fold(0.0f64, f64::max);
    Ok(LogStabilityReport { q, e, max_dev, ratio: max_dev / (q as f64).ln(), pairs, c2_used: c2 })
}

/// Zeros of x -> P_q(x, E) counted two ways.
#[derive(Clone, Copy, Debug)]
pub struct ZeroCountReport {
    pub q: usize,
    pub e: f64,
    /// Sign changes of P_q(., E) inside breakpoint-free segments.
    pub poly_zeros: usize,
    /// Breakpoints where the eigenvalue count below E increases.
    pub counting_jumps: usize,
    pub consistent: bool,
    pub grid: usize,
}

/// Counts sign changes of the determinant over one phase period and
/// cross-checks them against counting jumps at the breakpoints: each zero
/// in a breakpoint-free segment is an eigenvalue curve crossing E upward,
/// matched by exactly one downward jump at some breakpoint.
pub fn zero_count(spec: &OperatorSpec, k: usize, e: f64, x_grid: usize) -> Result<ZeroCountReport> {
    let q = scale_q(spec, k)?;
    if x_grid < 1000 * q {
        return Err(Error::invalid(format!(
            "phase grid {x_grid} too coarse for sign-change detection at q = {q} (need >= {})",
            1000 * q
        )));
    }
    let betas = beta_points(q, spec.alpha_dd())?;
    // Samples on the cut circle: the left limit at beta = 0 is the limit
    // x -> 1, so it is placed at 1.0 and the segment structure is linear.
    let mut samples: Vec<(f64, bool)> = Vec::with_capacity(x_grid + 2 * q);
    for j in 0..x_grid {
        samples.push(((j as f64 + 0.5) / x_grid as f64, false));
    }
    for b in &betas {
        if b.value == 0.0 {
            samples.push((0.0, false));
            samples.push((1.0, true));
        } else {
            samples.push((b.value, true));
            samples.push((b.value, false));
        }
    }
    samples.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).expect("finite phases").then_with(|| b.1.cmp(&a.1))
    });
    let signs: Vec<f64> = samples
        .par_iter()
        .map(|&(x, left)| {
            let phase = if x == 1.0 { 0.0 } else { x };
            let diag = spec.with_phase(phase).sample_orbit(q, left);
            det_sequence(&diag, e)[q].sign()
        })
        .collect();
    let interior: Vec<f64> = betas.iter().map(|b| b.value).filter(|&b| b > 0.0).collect();
    let mut poly_zeros = 0usize;
    for w in 0..samples.len() - 1 {
        let (x0, left0) = samples[w];
        let (x1, left1) = samples[w + 1];
        let crosses =
            interior.iter().any(|&b| (b > x0 && b < x1) || (b == x0 && left0) || (b == x1 && !left1));
        if crosses {
            continue;
        }
        if signs[w] * signs[w + 1] < 0.0 {
            poly_zeros += 1;
        }
    }
    let counting_jumps = betas
        .par_iter()
        .map(|b| {
            let right = spec.with_phase(b.value).sample_orbit(q, false);
            let left = spec.with_phase(b.value).sample_orbit(q, true);
            usize::from(dirichlet_count_below(&left, e) < dirichlet_count_below(&right, e))
        })
        .sum();
    Ok(ZeroCountReport {
        q,
        e,
        poly_zeros,
        counting_jumps,
        consistent: poly_zeros == counting_jumps,
        grid: x_grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::ContinuedFraction;
    use crate::potential::MonotonePotential;

    fn golden_spec(lambda: f64) -> OperatorSpec {
        let cf = ContinuedFraction::golden(20).unwrap();
        OperatorSpec::new(cf, lambda, MonotonePotential::sawtooth(), 0.0).unwrap()
    }

    #[test]
    fn deviation_measure_decreases_with_scale() {
        let spec = golden_spec(10.0);
        let e = 5.0;
        let gamma = lyapunov_finite(&spec, e, 2000, Sampling::Birkhoff { windows: 16 })
            .unwrap()
            .gamma;
        let r13 = deviation_set(&spec, 6, e, 0.3 * gamma, 100 * 13, Some(gamma)).unwrap();
        let r34 = deviation_set(&spec, 8, e, 0.3 * gamma, 100 * 34, Some(gamma)).unwrap();
        assert!(r13.measure <= 1.0 && r34.measure >= 0.0);
        assert!(
            r34.measure < r13.measure,
            "deviation measure must shrink: q=13 gives {:.5}, q=34 gives {:.5}",
            r13.measure,
            r34.measure
        );
        assert!(r13.intervals <= 13, "covering used {} intervals", r13.intervals);
        assert!(r34.intervals <= 34, "covering used {} intervals", r34.intervals);
    }

    #[test]
    fn deviation_measure_nonincreasing_in_delta() {
        let spec = golden_spec(10.0);
        let e = 3.0;
        let gamma = lyapunov_finite(&spec, e, 2000, Sampling::Birkhoff { windows: 16 })
            .unwrap()
            .gamma;
        let weak = deviation_set(&spec, 6, e, 0.2 * gamma, 1300, Some(gamma)).unwrap();
        let strong = deviation_set(&spec, 6, e, 0.4 * gamma, 1300, Some(gamma)).unwrap();
        assert!(
            strong.measure <= weak.measure,
            "larger delta lowers the threshold: {:.5} vs {:.5}",
            strong.measure,
            weak.measure
        );
    }

    #[test]
    fn near_free_cocycle_has_empty_deviation_set() {
        let spec = OperatorSpec::new(
            ContinuedFraction::golden(20).unwrap(),
            1e-12,
            MonotonePotential::sawtooth(),
            0.0,
        )
        .unwrap();
        // At E = 3 the free transfer matrix is uniformly hyperbolic with
        // gamma = arccosh(1.5), and |P_n| grows deterministically.
        let r = deviation_set(&spec, 6, 3.0, 0.25, 1300, None).unwrap();
        assert!((r.gamma - 0.962_423_650_119_206_9).abs() < 1e-3, "free gamma, got {}", r.gamma);
        assert_eq!(r.measure, 0.0, "deterministic growth leaves no deviation set");
        assert_eq!(r.intervals, 0);
    }

    #[test]
    fn deviation_preconditions() {
        let spec = golden_spec(10.0);
        assert!(deviation_set(&spec, 6, 5.0, 0.3, 100, Some(1.0)).is_err(), "grid below 100 q");
        assert!(deviation_set(&spec, 6, 5.0, 1.2, 1300, Some(1.0)).is_err(), "delta >= gamma");
        assert!(deviation_set(&spec, 6, 5.0, -0.1, 1300, Some(1.0)).is_err(), "delta <= 0");
    }

    #[test]
    fn cluster_split_factorization_identity() {
        let spec = golden_spec(10.0);
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Periodic] {
            for &x in &[0.37, 0.111, 0.82] {
                let s = cluster_split(&spec, 6, x, 5.0, None, bc).unwrap();
                assert!(
                    s.factorization_defect < 1e-8,
                    "{bc} at x={x}: defect {:.3e}",
                    s.factorization_defect
                );
                assert_eq!(
                    s.nu_plus.len() + s.nu_zero.len() + s.nu_minus.len(),
                    s.q,
                    "clusters partition the spectrum"
                );
                assert!(s.fitted_c1 > 0.0, "fitted C1 must be positive");
            }
        }
    }

    #[test]
    fn cluster_split_below_spectrum_leaves_minus_empty() {
        let spec = golden_spec(10.0);
        let s = cluster_split(&spec, 6, 0.3, -15.0, None, BoundaryCondition::Dirichlet).unwrap();
        assert!(s.nu_minus.is_empty(), "nothing below E = -15");
        assert_eq!(s.ln_p_minus, 0.0);
        assert!(s.factorization_defect < 1e-8);
    }

    #[test]
    fn log_stability_small_against_scale() {
        let spec = golden_spec(10.0);
        let r13 = log_stability(&spec, 6, 25, 5.0).unwrap();
        let r34 = log_stability(&spec, 8, 25, 5.0).unwrap();
        assert!(r13.max_dev.is_finite() && r34.max_dev.is_finite());
        assert!(r13.ratio > 0.0, "nontrivial deviation expected at q=13");
        // Stability: the normalized deviation does not blow up with the
        // scale (allowing a factor-2 drift between consecutive scales).
        assert!(
            r34.ratio <= 2.0 * r13.ratio.max(1.0),
            "ratio grew from {:.3} to {:.3}",
            r13.ratio,
            r34.ratio
        );
    }

    #[test]
    fn log_stability_near_free_is_flat() {
        let spec = OperatorSpec::new(
            ContinuedFraction::golden(20).unwrap(),
            1e-12,
            MonotonePotential::sawtooth(),
            0.0,
        )
        .unwrap();
        let r = log_stability(&spec, 6, 10, 3.0).unwrap();
        assert!(r.max_dev < 1e-6, "phase independence at zero coupling, got {:.3e}", r.max_dev);
    }

    #[test]
    fn zero_count_identity_golden_13() {
        let spec = golden_spec(2.0);
        let r = zero_count(&spec, 6, 1.0, 13_000).unwrap();
        assert!(r.consistent, "poly zeros {} vs counting jumps {}", r.poly_zeros, r.counting_jumps);
        assert!(r.poly_zeros <= r.q, "at most one zero per breakpoint");
        assert!(r.poly_zeros > 0, "E = 1 lies inside the spectrum, expected crossings");
    }

    #[test]
    fn zero_count_below_spectrum_is_zero() {
        let spec = golden_spec(2.0);
        let r = zero_count(&spec, 6, -10.0, 13_000).unwrap();
        assert_eq!(r.poly_zeros, 0);
        assert_eq!(r.counting_jumps, 0);
        assert!(r.consistent);
    }

    #[test]
    fn zero_count_rejects_coarse_grids() {
        let spec = golden_spec(2.0);
        assert!(zero_count(&spec, 6, 1.0, 500).is_err());
    }
}
