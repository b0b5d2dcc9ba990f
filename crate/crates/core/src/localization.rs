//! Box Green functions through determinant quotients, regularity probes,
//! eigenpair extraction with decay fitting, singular-point separation and
//! the Green-function expansion identity.

use crate::cocycle::ScaledValue;
use crate::error::{Error, Result};
use crate::numerics::{fit_line, TridiagFactor};
use crate::potential::OperatorSpec;
use crate::spectral::{dirichlet_count_below, dirichlet_spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Green function of the Dirichlet restriction to the absolute site
/// interval [a, b] at energy e, held as the two one-sided minor sequences
/// so any element is a quotient of scaled determinants.
#[derive(Debug)]
pub struct GreenBox {
    a: i64,
    b: i64,
    e: f64,
    diag: Vec<f64>,
    /// theta[i] = det over sites [a, a+i-1] (theta[0] = 1).
    theta: Vec<ScaledValue>,
    /// phi[i] = det over sites [a+i, b] (phi[len] = 1).
    phi: Vec<ScaledValue>,
}

impl GreenBox {
    /// Builds the box, refusing energies within 1e-12 of a Dirichlet
    /// eigenvalue of the restriction.
    pub fn new(spec: &OperatorSpec, a: i64, b: i64, e: f64) -> Result<Self> {
        if b < a {
            return Err(Error::invalid(format!("empty box [{a}, {b}]")));
        }
        let len = (b - a + 1) as usize;
        if len > 200_000 {
            return Err(Error::Capacity(format!("box with {len} sites")));
        }
        let diag: Vec<f64> = (a..=b).map(|m| spec.site_value(m)).collect();
        Self::from_diag(diag, a, e)
    }

    /// Same construction from an explicit diagonal, for callers that
    /// already hold the sampled sites.
    pub fn from_diag(diag: Vec<f64>, a: i64, e: f64) -> Result<Self> {
        let len = diag.len();
        if len == 0 {
            return Err(Error::invalid("empty box"));
        }
        let b = a + len as i64 - 1;
        let lo = dirichlet_count_below(&diag, e - 1e-12);
        let hi = dirichlet_count_below(&diag, e + 1e-12);
        if lo != hi {
            // Locate the offending eigenvalue for an honest distance.
            let (mut el, mut eh) = (e - 1e-12, e + 1e-12);
            for _ in 0..60 {
                let mid = 0.5 * (el + eh);
                if dirichlet_count_below(&diag, mid) > lo {
                    eh = mid;
                } else {
                    el = mid;
                }
            }
            return Err(Error::NearEigenvalue { distance: (0.5 * (el + eh) - e).abs() });
        }
        let mut theta: Vec<ScaledValue> = Vec::with_capacity(len + 1);
        theta.push(ScaledValue::one());
        theta.push(ScaledValue::from_f64(diag[0] - e));
        for i in 2..=len {
            let t = diag[i - 1] - e;
            let next = theta[i - 1].mul_f64(t).sub(theta[i - 2]);
            theta.push(next);
        }
        let mut phi: Vec<ScaledValue> = vec![ScaledValue::one(); len + 1];
        phi[len - 1] = ScaledValue::from_f64(diag[len - 1] - e);
        for i in (0..len.saturating_sub(1)).rev() {
            let t = diag[i] - e;
            phi[i] = phi[i + 1].mul_f64(t).sub(phi[i + 2]);
        }
        Ok(GreenBox { a, b, e, diag, theta, phi })
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn b(&self) -> i64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    /// Determinant of the box, det(H_[a,b] - e).
    pub fn det(&self) -> ScaledValue {
        self.theta[self.len()]
    }

    /// G(m, n) as a scaled quotient: (-1)^{m+n} theta_{m-1} phi_{n+1} / det
    /// for m <= n, extended symmetrically.
    pub fn element_scaled(&self, m: i64, n: i64) -> Result<ScaledValue> {
        if m < self.a || m > self.b || n < self.a || n > self.b {
            return Err(Error::invalid(format!(
                "site pair ({m}, {n}) outside box [{}, {}]",
                self.a, self.b
            )));
        }
        let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
        let i = (lo - self.a) as usize;
        let j = (hi - self.a) as usize;
        let v = self.theta[i].mul(self.phi[j + 1]).div(self.theta[self.len()]);
        Ok(if (lo + hi) % 2 == 0 { v } else { v.neg() })
    }

    pub fn element(&self, m: i64, n: i64) -> Result<f64> {
        Ok(self.element_scaled(m, n)?.value())
    }

    /// Same element through the pivoted banded solve, as an independent
    /// route for cross-checks.
    pub fn element_direct(&self, m: i64, n: i64) -> Result<f64> {
        if m < self.a || m > self.b || n < self.a || n > self.b {
            return Err(Error::invalid(format!(
                "site pair ({m}, {n}) outside box [{}, {}]",
                self.a, self.b
            )));
        }
        let factor = TridiagFactor::new(&self.diag, self.e);
        let mut rhs = vec![0.0; self.len()];
        rhs[(n - self.a) as usize] = 1.0;
        factor.solve(&mut rhs);
        Ok(rhs[(m - self.a) as usize])
    }
}

/// G_{[a,b]}(m, n) at energy e via the determinant quotient.
pub fn green_element(spec: &OperatorSpec, a: i64, b: i64, m: i64, n: i64, e: f64) -> Result<f64> {
    GreenBox::new(spec, a, b, e)?.element(m, n)
}

#[derive(Clone, Copy, Debug)]
pub struct RegularityOutcome {
    pub regular: bool,
    /// First window [n1, n2] witnessing the decay, when regular.
    pub witness: Option<(i64, i64)>,
}

/// Tests (mu, q)-regularity of site m at energy e: looks for a window
/// [n1, n1+q-1] containing m with both edges at distance >= q/5 where the
/// Green elements from m to the edges are below exp(-mu |m - edge|).
/// Windows where e sits near a Dirichlet eigenvalue simply fail as
/// witnesses.
pub fn regularity_test(spec: &OperatorSpec, m: i64, mu: f64, q: usize, e: f64) -> Result<RegularityOutcome> {
    if q < 5 {
        return Err(Error::invalid(format!("window size q = {q} too small (need >= 5)")));
    }
    if !(mu >= 0.0) {
        return Err(Error::invalid("decay rate mu must be nonnegative"));
    }
    let min_edge = (q as f64 / 5.0).ceil() as i64;
    let qi = q as i64;
    // m - n1 ranges over [min_edge, q - 1 - min_edge].
    for off in min_edge..=(qi - 1 - min_edge) {
        let n1 = m - off;
        let n2 = n1 + qi - 1;
        let gb = match GreenBox::new(spec, n1, n2, e) {
            Ok(g) => g,
            Err(Error::NearEigenvalue { .. }) => continue,
            Err(err) => return Err(err),
        };
        let g_left = gb.element_scaled(m, n1)?.ln_abs();
        let g_right = gb.element_scaled(m, n2)?.ln_abs();
        if g_left < -mu * (m - n1) as f64 && g_right < -mu * (n2 - m) as f64 {
            return Ok(RegularityOutcome { regular: true, witness: Some((n1, n2)) });
        }
    }
    Ok(RegularityOutcome { regular: false, witness: None })
}

/// Eigenvalue and eigenvector of a Dirichlet box, normalized to value 1 at
/// the leftmost site where |psi| attains its maximum.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub e: f64,
    pub psi: Vec<f64>,
    /// Leftmost maximizer of |psi|.
    pub n0: usize,
    /// Sup-norm residual of (H - e) psi.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct EigenPairSet {
    pub pairs: Vec<EigenPair>,
    /// Spectrum indices whose inverse iteration failed to converge.
    pub skipped: Vec<usize>,
}

fn sup_residual(diag: &[f64], e: f64, psi: &[f64]) -> f64 {
    let n = diag.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut r = (diag[i] - e) * psi[i];
        if i > 0 {
            r += psi[i - 1];
        }
        if i + 1 < n {
            r += psi[i + 1];
        }
        worst = worst.max(r.abs());
    }
    worst
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rayleigh quotient v'Hv / v'v for the tridiagonal operator with the
/// given diagonal and unit off-diagonals.
fn rayleigh_quotient(diag: &[f64], v: &[f64]) -> f64 {
    let n = diag.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        num += diag[i] * v[i] * v[i];
        if i + 1 < n {
            num += 2.0 * v[i] * v[i + 1];
        }
        den += v[i] * v[i];
    }
    num / den
}

/// Computes all Dirichlet eigenpairs of the n-site box with eigenvalue in
/// the window, by bisection plus inverse iteration. Near-degenerate
/// clusters are re-orthogonalized against already-converged members.
pub fn box_eigenpairs(spec: &OperatorSpec, n: usize, window: (f64, f64)) -> Result<EigenPairSet> {
    if n == 0 || n > 10_000 {
        return Err(Error::invalid(format!("box size {n} outside the supported range 1..=10000")));
    }
    if !(window.0 < window.1) {
        return Err(Error::invalid("empty energy window"));
    }
    let diag = spec.sample_orbit(n, false);
    let eigs = dirichlet_spectrum(&diag, 1e-11)?;
    let selected: Vec<(usize, f64)> = eigs
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, e)| e >= window.0 && e <= window.1)
        .collect();

    // Eigenvectors, in parallel over the selection; clusters are tracked
    // by eigenvalue gaps so near-degenerate vectors get orthogonalized.
    let cluster_tol = 1e-7;
    let vectors: Vec<(usize, Option<(f64, Vec<f64>)>)> = selected
        .par_iter()
        .enumerate()
        .map(|(sel_idx, &(idx, e))| {
            // Members of this eigenvalue's cluster that precede it.
            let mut earlier: Vec<Vec<f64>> = Vec::new();
            let mut j = sel_idx;
            while j > 0 && (selected[j].1 - selected[j - 1].1).abs() < cluster_tol {
                j -= 1;
                if let Some((_, v)) = invert_once(&diag, selected[j].1, selected[j].0, &[]) {
                    earlier.push(v);
                }
            }
            (idx, invert_once(&diag, e, idx, &earlier))
        })
        .collect();

    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for (idx, vec) in vectors.into_iter() {
        match vec {
            Some((e, psi)) => {
                let mut n0 = 0;
                for (i, &v) in psi.iter().enumerate() {
                    if v.abs() > psi[n0].abs() {
                        n0 = i;
                    }
                }
                let scale = psi[n0];
                let psi: Vec<f64> = psi.iter().map(|&v| v / scale).collect();
                let residual = sup_residual(&diag, e, &psi);
                pairs.push(EigenPair { e, psi, n0, residual });
            }
            None => skipped.push(idx),
        }
    }
    Ok(EigenPairSet { pairs, skipped })
}

/// One inverse-iteration run: deterministic seed, up to 12 solves with a
/// Rayleigh-quotient shift refinement once the vector settles, and
/// orthogonalization against the given converged neighbors. The shift
/// refinement matters downstream: it pushes the residual to near machine
/// precision, which is what bounds how far into an eigenvector's tail the
/// entries stay meaningful. Returns the refined eigenvalue and the
/// l2-normalized vector when the relative sup residual reaches 1e-8.
fn invert_once(
    diag: &[f64],
    e0: f64,
    idx: usize,
    orthogonal_to: &[Vec<f64>],
) -> Option<(f64, Vec<f64>)> {
    let n = diag.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0xE16_0000 ^ idx as u64);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut shift = e0;
    let mut factor = TridiagFactor::new(diag, shift);
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for iter in 0..12 {
        for prev in orthogonal_to {
            let dot: f64 = v.iter().zip(prev.iter()).map(|(a, b)| a * b).sum();
            let nn: f64 = prev.iter().map(|x| x * x).sum();
            if nn > 0.0 {
                for (vi, pi) in v.iter_mut().zip(prev.iter()) {
                    *vi -= dot / nn * pi;
                }
            }
        }
        factor.solve(&mut v);
        let norm = norm2(&v);
        if !norm.is_finite() || norm == 0.0 {
            // Restart from a fresh seed direction.
            v = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            continue;
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        let rq = rayleigh_quotient(diag, &v);
        // Accept the quotient only while it stays a refinement of the
        // bisection eigenvalue; a large jump means the iteration drifted
        // toward a neighbor.
        let e_use = if (rq - e0).abs() < 1e-6 { rq } else { e0 };
        let peak = v.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
        let rel = sup_residual(diag, e_use, &v) / peak;
        if best.as_ref().map_or(true, |b| rel < b.0) {
            best = Some((rel, e_use, v.clone()));
        }
        if rel <= 1e-13 {
            break;
        }
        if iter >= 1 && e_use != shift {
            shift = e_use;
            factor = TridiagFactor::new(diag, shift);
        }
    }
    let (rel, e, v) = best?;
    if rel <= 1e-8 {
        Some((e, v))
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Localized,
    Extended,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Localized => write!(f, "localized"),
            Verdict::Extended => write!(f, "extended"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// Exponential decay fit of an eigenvector away from its peak.
#[derive(Clone, Copy, Debug)]
pub struct DecayFit {
    /// Decay rate, reported only when the fit is trustworthy (R^2 >= 0.9).
    pub rate: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    /// Distance window [lo, hi] used for the fit.
    pub window: (usize, usize),
    pub points: usize,
    pub verdict: Verdict,
}

/// Floor below which eigenvector entries are treated as numerically zero.
const PSI_FLOOR: f64 = 1e-14;

/// Estimates the numerical far-field level of a peak-normalized vector as
/// the median of |psi| over the outermost sites of the box. For a strongly
/// decaying state those entries are pure solver noise, and their level
/// marks where the tail stops carrying decay information.
fn far_field_level(psi: &[f64]) -> f64 {
    let n = psi.len();
    let band = (n / 20).clamp(5, n);
    let mut far: Vec<f64> = Vec::with_capacity(2 * band);
    far.extend(psi.iter().take(band).map(|x| x.abs()));
    far.extend(psi.iter().skip(n.saturating_sub(band)).map(|x| x.abs()));
    far.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
    far[far.len() / 2]
}

/// Fits ln|psi| against the distance from the peak over sites with
/// |n - n0| in [n/20, n/4] (widened toward the peak when decay outruns the
/// f64 floor) and compares the rate with gamma_e - delta. Sites whose
/// entries sit at the box's numerical far-field level are excluded: below
/// that level the computed tail is flat noise, not decay.
pub fn decay_fit(pair: &EigenPair, gamma_e: f64, delta: f64) -> DecayFit {
    let n = pair.psi.len();
    let quarter = n / 4;
    let mut window = (n / 20, quarter);
    if pair.n0 < quarter || pair.n0 + quarter > n - 1 {
        // Peak too close to an edge: decay is boundary-dominated.
        return DecayFit {
            rate: None,
            intercept: None,
            r_squared: None,
            window,
            points: 0,
            verdict: Verdict::Inconclusive,
        };
    }
    let far = far_field_level(&pair.psi);
    // The far-field gate only applies when the state has decisively
    // decayed by the box ends; extended profiles keep the plain floor.
    let floor = if far < 1e-6 { (10.0 * far).max(PSI_FLOOR) } else { PSI_FLOOR };
    let collect = |lo: usize, hi: usize| -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for d in lo.max(1)..=hi {
            for site in [pair.n0.checked_sub(d), Some(pair.n0 + d)].into_iter().flatten() {
                if site >= n {
                    continue;
                }
                let a = pair.psi[site].abs();
                if a >= floor {
                    xs.push(d as f64);
                    ys.push(a.ln());
                }
            }
        }
        (xs, ys)
    };
    let (mut xs, mut ys) = collect(window.0, window.1);
    if xs.len() < 8 {
        // Strong decay can push the whole primary window below the floor;
        // refit closer to the peak.
        window = ((n / 200).max(4), quarter);
        let w = collect(window.0, window.1);
        xs = w.0;
        ys = w.1;
    }
    let fit = match fit_line(&xs, &ys) {
        Some(f) => f,
        None => {
            return DecayFit {
                rate: None,
                intercept: None,
                r_squared: None,
                window,
                points: xs.len(),
                verdict: Verdict::Inconclusive,
            }
        }
    };
    let rate = -fit.slope;
    let trustworthy = fit.r_squared >= 0.9;
    let verdict = if rate < 0.02 {
        Verdict::Extended
    } else if trustworthy && rate >= gamma_e - delta {
        Verdict::Localized
    } else {
        Verdict::Inconclusive
    };
    DecayFit {
        rate: if trustworthy { Some(rate) } else { None },
        intercept: if trustworthy { Some(fit.intercept) } else { None },
        r_squared: Some(fit.r_squared),
        window,
        points: fit.points,
        verdict,
    }
}

/// Scan result for (gamma - delta, q)-singular sites.
#[derive(Clone, Debug)]
pub struct SeparationReport {
    pub q: usize,
    pub e: f64,
    pub mu: f64,
    pub singular: Vec<i64>,
    /// Smallest distance between singular sites further apart than
    /// (q+1)/2, when such a pair exists.
    pub min_far_separation: Option<i64>,
}

/// Scans the site range for (mu, q)-singular points, mu = gamma - delta,
/// and reports how far apart the distinct singular clusters sit.
pub fn singular_separation(
    spec: &OperatorSpec,
    q: usize,
    e: f64,
    gamma: f64,
    delta: f64,
    scan: (i64, i64),
) -> Result<SeparationReport> {
    if !(delta > 0.0 && delta < gamma) {
        return Err(Error::invalid(format!(
            "need 0 < delta < gamma, got delta = {delta}, gamma = {gamma}"
        )));
    }
    if scan.1 < scan.0 {
        return Err(Error::invalid("empty scan range"));
    }
    if (scan.1 - scan.0) as usize > 1_000_000 {
        return Err(Error::Capacity("scan range too large".into()));
    }
    let mu = gamma - delta;
    let flags: Vec<(i64, bool)> = (scan.0..=scan.1)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&m| regularity_test(spec, m, mu, q, e).map(|r| (m, !r.regular)))
        .collect::<Result<Vec<_>>>()?;
    let singular: Vec<i64> = flags.into_iter().filter(|&(_, s)| s).map(|(m, _)| m).collect();
    let cluster = ((q + 1) / 2) as i64;
    let mut min_far: Option<i64> = None;
    for (i, &m) in singular.iter().enumerate() {
        for &nn in &singular[i + 1..] {
            let d = nn - m;
            if d > cluster {
                min_far = Some(min_far.map_or(d, |cur| cur.min(d)));
            }
        }
    }
    Ok(SeparationReport { q, e, mu, singular, min_far_separation: min_far })
}

#[derive(Clone, Copy, Debug)]
pub struct ExpansionReport {
    /// Max over window sites of the reconstruction residual.
    pub max_residual: f64,
    /// Max over window sites of |G(m, n1)| + |G(m, n2)|, at least 1.
    pub conditioning: f64,
    pub window: (i64, i64),
}

/// Checks that the eigenvector is reconstructed inside [n1, n2] from its
/// boundary values: psi(m) = -G(m, n1) psi(n1 - 1) - G(m, n2) psi(n2 + 1).
/// The pair's box is taken to start at absolute site 0.
pub fn expansion_reconstruction(
    spec: &OperatorSpec,
    pair: &EigenPair,
    n1: i64,
    n2: i64,
) -> Result<ExpansionReport> {
    let n = pair.psi.len() as i64;
    if n1 > n2 {
        return Err(Error::invalid("empty window"));
    }
    if n1 < 1 || n2 > n - 2 {
        return Err(Error::invalid(format!(
            "window [{n1}, {n2}] touches the box boundary; psi(n1-1), psi(n2+1) must exist"
        )));
    }
    let diag: Vec<f64> = (n1..=n2).map(|m| spec.site_value(m)).collect();
    let lo = dirichlet_count_below(&diag, pair.e - 1e-10);
    let hi = dirichlet_count_below(&diag, pair.e + 1e-10);
    if lo != hi {
        return Err(Error::NearEigenvalue { distance: 1e-10 });
    }
    let gb = GreenBox::from_diag(diag, n1, pair.e)?;
    let left = pair.psi[(n1 - 1) as usize];
    let right = pair.psi[(n2 + 1) as usize];
    let mut max_residual = 0.0f64;
    let mut conditioning = 1.0f64;
    for m in n1..=n2 {
        let g1 = gb.element(m, n1)?;
        let g2 = gb.element(m, n2)?;
        let rec = -g1 * left - g2 * right;
        max_residual = max_residual.max((pair.psi[m as usize] - rec).abs());
        conditioning = conditioning.max(g1.abs() + g2.abs());
    }
    Ok(ExpansionReport { max_residual, conditioning, window: (n1, n2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::ContinuedFraction;
    use crate::cocycle::{lyapunov_finite, Sampling};
    use crate::potential::MonotonePotential;
    use std::f64::consts::PI;

    fn golden_spec(lambda: f64, x: f64) -> OperatorSpec {
        let cf = ContinuedFraction::golden(20).unwrap();
        OperatorSpec::new(cf, lambda, MonotonePotential::sawtooth(), x).unwrap()
    }

    #[test]
    fn one_site_green_is_reciprocal() {
        let spec = golden_spec(2.0, 0.3);
        let e = 0.7;
        let g = green_element(&spec, 5, 5, 5, 5, e).unwrap();
        let expect = 1.0 / (spec.site_value(5) - e);
        assert!((g - expect).abs() < 1e-12, "1x1 box: {g} vs {expect}");
    }

    #[test]
    fn quotient_and_direct_routes_agree() {
        let spec = golden_spec(2.0, 0.137);
        let e = 1.234;
        let gb = GreenBox::new(&spec, -3, 9, e).unwrap();
        for m in -3..=9i64 {
            for n in -3..=9i64 {
                let q = gb.element(m, n).unwrap();
                let d = gb.element_direct(m, n).unwrap();
                let scale = q.abs().max(d.abs()).max(1e-300);
                assert!(
                    (q - d).abs() / scale < 1e-8,
                    "G({m},{n}): quotient {q:.15e} vs direct {d:.15e}"
                );
            }
        }
    }

    #[test]
    fn green_is_symmetric() {
        let spec = golden_spec(10.0, 0.41);
        let gb = GreenBox::new(&spec, 0, 20, 3.3).unwrap();
        for m in 0..=20i64 {
            for n in m..=20i64 {
                let a = gb.element(m, n).unwrap();
                let b = gb.element(n, m).unwrap();
                assert!(
                    (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                    "symmetry at ({m},{n}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn near_eigenvalue_is_rejected_with_distance() {
        let spec = golden_spec(2.0, 0.3);
        let diag = spec.sample_orbit(13, false);
        let eigs = dirichlet_spectrum(&diag, 1e-12).unwrap();
        let err = GreenBox::new(&spec, 0, 12, eigs[6] + 1e-14).unwrap_err();
        match err {
            Error::NearEigenvalue { distance } => {
                assert!(distance < 1e-12, "reported distance {distance:.3e}");
            }
            other => panic!("expected a near-eigenvalue error, got {other:?}"),
        }
    }

    #[test]
    fn free_green_decays_at_the_hyperbolic_rate() {
        // lambda ~ 0 at E = 3 outside the spectrum: |G(0, l)| behaves like
        // exp(-arccosh(1.5) l).
        let spec = golden_spec(1e-12, 0.0);
        let rate = 1.5f64.acosh();
        let gb = GreenBox::new(&spec, 0, 9, 3.0).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for l in 0..=9i64 {
            xs.push(l as f64);
            ys.push(gb.element_scaled(0, l).unwrap().ln_abs());
        }
        let fit = fit_line(&xs, &ys).unwrap();
        assert!(
            (-fit.slope - rate).abs() < 0.02 * rate,
            "free Green decay rate {:.5} vs {:.5}",
            -fit.slope,
            rate
        );
        assert!(fit.r_squared > 0.999, "clean exponential, R^2 = {}", fit.r_squared);
    }

    #[test]
    fn off_spectrum_site_is_regular() {
        let spec = golden_spec(1e-12, 0.0);
        let mu = 0.9 * 1.5f64.acosh();
        let r = regularity_test(&spec, 100, mu, 50, 3.0).unwrap();
        assert!(r.regular, "uniform hyperbolicity off the spectrum");
        let (n1, n2) = r.witness.unwrap();
        assert!(n1 <= 100 && 100 <= n2 && (n2 - n1) == 49);
    }

    #[test]
    fn peak_site_is_singular_at_its_own_eigenvalue() {
        let spec = golden_spec(10.0, 0.213);
        let n = 610;
        let set = box_eigenpairs(&spec, n, (4.0, 6.0)).unwrap();
        let pair = set
            .pairs
            .iter()
            .find(|p| p.n0 >= n / 4 && p.n0 <= 3 * n / 4)
            .expect("an interior-peaked mid-spectrum pair");
        let gamma = lyapunov_finite(&spec, pair.e, 2000, Sampling::Birkhoff { windows: 16 })
            .unwrap()
            .gamma;
        let r = regularity_test(&spec, pair.n0 as i64, 0.7 * gamma, 13, pair.e).unwrap();
        assert!(!r.regular, "the eigenfunction peak must be singular at scale 13");
    }

    #[test]
    fn free_chain_eigenvectors_are_sine_waves() {
        let spec = golden_spec(1e-12, 0.0);
        let n = 10;
        let set = box_eigenpairs(&spec, n, (-3.0, 3.0)).unwrap();
        assert_eq!(set.pairs.len(), n);
        assert!(set.skipped.is_empty());
        for (rank, pair) in set.pairs.iter().enumerate() {
            let j = n - rank; // ascending energies are decreasing j
            let shape: Vec<f64> =
                (0..n).map(|m| (j as f64 * PI * (m as f64 + 1.0) / (n as f64 + 1.0)).sin()).collect();
            let scale = shape[pair.n0];
            for m in 0..n {
                assert!(
                    (pair.psi[m] - shape[m] / scale).abs() < 1e-8,
                    "level {j}, site {m}: {} vs {}",
                    pair.psi[m],
                    shape[m] / scale
                );
            }
            assert!(pair.residual <= 1e-8, "residual {:.3e}", pair.residual);
        }
    }

    #[test]
    fn strong_coupling_pairs_are_localized() {
        let spec = golden_spec(10.0, 0.05);
        let n = 233;
        let set = box_eigenpairs(&spec, n, (3.0, 7.0)).unwrap();
        assert!(set.pairs.len() > 10, "expected a healthy mid-spectrum batch");
        assert!(set.skipped.is_empty(), "no pathological degeneracies at this size");
        // Only pairs peaked in the middle half of the box get a verdict;
        // edge-peaked ones are boundary-dominated by construction.
        let mut interior = 0;
        let mut localized = 0;
        for pair in &set.pairs {
            assert!(pair.residual <= 1e-8, "residual {:.3e}", pair.residual);
            assert!((pair.psi[pair.n0] - 1.0).abs() < 1e-12, "normalized at the peak");
            let l2 = norm2(&pair.psi);
            assert!(
                l2 < 0.25 * (n as f64).sqrt(),
                "localized mass: l2 = {l2:.2} vs sqrt(n) = {:.2}",
                (n as f64).sqrt()
            );
            if pair.n0 < n / 4 || pair.n0 > 3 * n / 4 {
                continue;
            }
            interior += 1;
            let gamma = lyapunov_finite(&spec, pair.e, 4000, Sampling::Birkhoff { windows: 8 })
                .unwrap()
                .gamma;
            let fit = decay_fit(pair, gamma, 0.15 * gamma);
            if fit.verdict == Verdict::Localized {
                let rate = fit.rate.unwrap();
                assert!(
                    rate >= 0.85 * gamma && rate <= 1.4 * gamma,
                    "rate {rate:.3} vs gamma {gamma:.3}"
                );
                localized += 1;
            }
        }
        assert!(interior >= 15, "only {interior} interior-peaked pairs");
        assert!(
            10 * localized >= 8 * interior,
            "{localized} of {interior} interior pairs localized"
        );
    }

    #[test]
    fn synthetic_exponential_fits_exactly() {
        let n = 1000;
        let n0 = 500usize;
        let psi: Vec<f64> = (0..n).map(|m| (-0.7 * (m as i64 - n0 as i64).abs() as f64).exp()).collect();
        let pair = EigenPair { e: 0.0, psi, n0, residual: 0.0 };
        let fit = decay_fit(&pair, 0.75, 0.1);
        assert_eq!(fit.verdict, Verdict::Localized);
        assert!((fit.rate.unwrap() - 0.7).abs() < 1e-9, "rate {:?}", fit.rate);
        assert!(fit.r_squared.unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn free_state_is_extended() {
        let spec = golden_spec(1e-12, 0.0);
        let n = 200;
        let set = box_eigenpairs(&spec, n, (-2.1, 2.1)).unwrap();
        // The ground-shape level j = 1 peaks at the center.
        let pair = set.pairs.last().unwrap();
        assert!(pair.n0 >= n / 4 && pair.n0 <= 3 * n / 4, "central peak expected");
        let fit = decay_fit(pair, 0.5, 0.1);
        assert_eq!(fit.verdict, Verdict::Extended, "flat profile, got {:?}", fit);
    }

    #[test]
    fn edge_peaked_pair_is_inconclusive() {
        let psi: Vec<f64> = (0..100).map(|m| (-0.5 * m as f64).exp()).collect();
        let pair = EigenPair { e: 0.0, psi, n0: 0, residual: 0.0 };
        let fit = decay_fit(&pair, 0.5, 0.1);
        assert_eq!(fit.verdict, Verdict::Inconclusive);
        assert!(fit.rate.is_none());
    }

    #[test]
    fn expansion_identity_holds_on_interior_windows() {
        let spec = golden_spec(10.0, 0.05);
        let n = 233;
        let set = box_eigenpairs(&spec, n, (4.0, 6.0)).unwrap();
        let pair = set
            .pairs
            .iter()
            .find(|p| p.n0 >= 60 && p.n0 <= 170)
            .expect("interior pair");
        // A window holding the localization center would put E
        // exponentially close to the window's own spectrum, so probe the
        // decay region to the side of the peak, sliding past any unlucky
        // near-eigenvalue draw.
        let m0 = pair.n0 as i64;
        let mut report = None;
        for shift in 0..5 {
            match expansion_reconstruction(&spec, pair, m0 + 8 + shift, m0 + 58 + shift) {
                Ok(r) => {
                    report = Some(r);
                    break;
                }
                Err(Error::NearEigenvalue { .. }) => continue,
                Err(other) => panic!("unexpected error: {other:?}"),
            }
        }
        let rep = report.expect("a window clear of the sub-box spectrum");
        assert!(
            rep.max_residual <= 1e-6 * rep.conditioning.max(1.0),
            "residual {:.3e} vs conditioning {:.3e}",
            rep.max_residual,
            rep.conditioning
        );
    }

    #[test]
    fn single_site_window_is_the_eigenvalue_equation() {
        let spec = golden_spec(2.0, 0.3);
        let n = 89;
        let set = box_eigenpairs(&spec, n, (0.0, 4.0)).unwrap();
        let pair = &set.pairs[set.pairs.len() / 2];
        let m = (n / 2) as i64;
        let rep = expansion_reconstruction(&spec, pair, m, m).unwrap();
        // psi(m) = -G(m,m) (psi(m-1) + psi(m+1)) with G(m,m) = 1/(d_m - E)
        // is exactly the eigenvalue equation at site m.
        assert!(rep.max_residual <= 1e-8 * rep.conditioning.max(1.0), "residual {:.3e}", rep.max_residual);
    }

    #[test]
    fn window_touching_the_boundary_is_rejected() {
        let spec = golden_spec(2.0, 0.3);
        let set = box_eigenpairs(&spec, 55, (0.0, 4.0)).unwrap();
        let pair = &set.pairs[0];
        assert!(expansion_reconstruction(&spec, pair, 0, 10).is_err());
        assert!(expansion_reconstruction(&spec, pair, 40, 54).is_err());
    }

    #[test]
    fn singular_points_cluster_at_the_peak() {
        let spec = golden_spec(10.0, 0.213);
        let n = 610;
        let set = box_eigenpairs(&spec, n, (4.5, 5.5)).unwrap();
        let pair = set
            .pairs
            .iter()
            .find(|p| p.n0 >= 200 && p.n0 <= 400)
            .expect("deep interior pair");
        let gamma = lyapunov_finite(&spec, pair.e, 4000, Sampling::Birkhoff { windows: 8 })
            .unwrap()
            .gamma;
        let m0 = pair.n0 as i64;
        let rep = singular_separation(&spec, 13, pair.e, gamma, 0.3 * gamma, (m0 - 60, m0 + 60))
            .unwrap();
        assert!(rep.singular.contains(&m0), "the peak itself must be singular");
        // All singular sites sit in one cluster near the peak: far pairs,
        // if any, must be separated by much more than the box scale.
        for &s in &rep.singular {
            assert!(
                (s - m0).abs() <= 30,
                "singular site {s} unexpectedly far from peak {m0}"
            );
        }
    }

    #[test]
    fn off_spectrum_scan_finds_no_singular_points() {
        let spec = golden_spec(10.0, 0.213);
        let rep = singular_separation(&spec, 13, 25.0, 1.5, 0.3, (100, 160)).unwrap();
        assert!(rep.singular.is_empty(), "E = 25 is far outside the spectrum");
        assert!(rep.min_far_separation.is_none());
    }
}
