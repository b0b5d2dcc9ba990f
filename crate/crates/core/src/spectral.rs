//! Eigenvalue computation for finite restrictions by Sturm counting and
//! bisection, plus the two spectral phenomena that drive localization:
//! almost invariance of box spectra along the orbit and eigenvalue
//! repulsion at breakpoint phases.

use crate::arithmetic::{beta_points, torus_norm, BetaPoint};
use crate::cocycle::{det_sequence, ScaledValue};
use crate::error::{Error, Result};
use crate::operator::{BoundaryCondition, FiniteRestriction};
use crate::potential::OperatorSpec;
use rayon::prelude::*;

/// Smallest accepted bisection tolerance; below this the pivot recursion
/// itself is in the noise and the answer would be fiction.
pub const MIN_TOL: f64 = 1e-13;

/// Default bisection tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Magnitude guard for near-singular pivots: clamped to this (negative)
/// value so the recursion continues and the eigenvalue at the boundary
/// counts as below.
const PIVOT_GUARD: f64 = 1e-300;

fn check_tol(tol: f64) -> Result<f64> {
    if !(tol.is_finite()) || tol < MIN_TOL {
        return Err(Error::invalid(format!(
            "tolerance {tol:.3e} below the trustworthy floor {MIN_TOL:.0e}"
        )));
    }
    Ok(tol)
}

/// Number of Dirichlet eigenvalues strictly below e, by the signs of the
/// LDLT pivots d_k = (diag_k - e) - 1/d_{k-1}.
pub fn dirichlet_count_below(diag: &[f64], e: f64) -> usize {
    let mut count = 0;
    let mut d = f64::INFINITY;
    for &a in diag {
        d = (a - e) - 1.0 / d;
        if d.abs() < PIVOT_GUARD {
            d = -PIVOT_GUARD;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Same count through the sign variations of the characteristic minors
/// P_0, ..., P_n computed in scaled arithmetic. Slower; kept as an
/// independent route for cross-checks.
pub fn dirichlet_count_below_minors(diag: &[f64], e: f64) -> usize {
    let p = det_sequence(diag, e);
    let mut count = 0;
    let mut prev = 1.0f64;
    for v in &p[1..] {
        let s = if v.sign() == 0.0 { 1.0 } else { v.sign() };
        if s * prev < 0.0 {
            count += 1;
        }
        prev = s;
    }
    count
}

/// Number of periodic eigenvalues strictly below e, by Sturm counting on
/// the leading principal minors of the periodic matrix: the first n-1 are
/// the Dirichlet minors (pivot signs), the last is the full periodic
/// determinant, assembled from pivot products.
pub fn periodic_count_below(diag: &[f64], e: f64) -> usize {
    let n = diag.len();
    match n {
        0 => return 0,
        1 => return usize::from(diag[0] + 2.0 < e),
        2 => {
            let mid = 0.5 * (diag[0] + diag[1]);
            let half = 0.5 * (diag[0] - diag[1]);
            let r = (half * half + 4.0).sqrt();
            return usize::from(mid - r < e) + usize::from(mid + r < e);
        }
        _ => {}
    }
    // Raw three-term minor recursions with power-of-2 renormalization:
    // division-free, exact rescaling, sign variations counted on the fly.
    let big = 2f64.powi(500);
    let tiny = 2f64.powi(-500);
    let mut count = 0;
    let mut s_prev = 1.0f64; // sign of P_0
    let mut prev = 1.0f64; // P_0
    let mut cur = diag[0] - e; // P_1
    let mut exp2 = 0i64;
    let mut sign_last = 1.0f64; // sign of P_{n-1}
    for k in 1..n {
        let s = if cur == 0.0 { 1.0 } else { cur.signum() };
        if s * s_prev < 0.0 {
            count += 1;
        }
        s_prev = s;
        if k == n - 1 {
            sign_last = s;
        }
        let next = (diag[k] - e) * cur - prev;
        prev = cur;
        cur = next;
        let a = cur.abs().max(prev.abs());
        if a > big {
            cur *= tiny;
            prev *= tiny;
            exp2 += 500;
        } else if a < tiny && a > 0.0 {
            cur *= big;
            prev *= big;
            exp2 -= 500;
        }
    }
    let p_n = ScaledValue::from_parts(cur, exp2);
    // Shifted minor over sites 1..n-2.
    let mut sprev = 1.0f64;
    let mut scur = diag[1] - e;
    let mut sexp = 0i64;
    for &a in &diag[2..n - 1] {
        let next = (a - e) * scur - sprev;
        sprev = scur;
        scur = next;
        let m = scur.abs().max(sprev.abs());
        if m > big {
            scur *= tiny;
            sprev *= tiny;
            sexp += 500;
        } else if m < tiny && m > 0.0 {
            scur *= big;
            sprev *= big;
            sexp -= 500;
        }
    }
    let p_shift = ScaledValue::from_parts(scur, sexp);
    let two = ScaledValue::from_f64(if n % 2 == 0 { 2.0 } else { -2.0 });
    let w = p_n.sub(p_shift).sub(two);
    let w_sign = if w.sign() == 0.0 { 1.0 } else { w.sign() };
    if w_sign * sign_last < 0.0 {
        count += 1;
    }
    count
}

/// Sign of d/dE of the periodic determinant, from the coupled minor
/// recursion P'_k = (diag_{k-1} - e) P'_{k-1} - P_{k-1} - P'_{k-2} and its
/// shifted companion, renormalized jointly. Needs n >= 3.
fn periodic_det_prime_sign(diag: &[f64], e: f64) -> f64 {
    let n = diag.len();
    let big = 2f64.powi(500);
    let tiny = 2f64.powi(-500);
    let mut p_prev = 1.0f64;
    let mut p = diag[0] - e;
    let mut dp_prev = 0.0f64;
    let mut dp = -1.0f64;
    let mut exp2 = 0i64;
    for &a in &diag[1..] {
        let t = a - e;
        let p_next = t * p - p_prev;
        let dp_next = t * dp - p - dp_prev;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
        let m = p.abs().max(dp.abs());
        if m > big {
            p *= tiny;
            p_prev *= tiny;
            dp *= tiny;
            dp_prev *= tiny;
            exp2 += 500;
        } else if m < tiny && m > 0.0 {
            p *= big;
            p_prev *= big;
            dp *= big;
            dp_prev *= big;
            exp2 -= 500;
        }
    }
    let mut s_prev = 1.0f64;
    let mut s = diag[1] - e;
    let mut ds_prev = 0.0f64;
    let mut ds = -1.0f64;
    let mut sexp = 0i64;
    for &a in &diag[2..n - 1] {
        let t = a - e;
        let s_next = t * s - s_prev;
        let ds_next = t * ds - s - ds_prev;
        s_prev = s;
        s = s_next;
        ds_prev = ds;
        ds = ds_next;
        let m = s.abs().max(ds.abs());
        if m > big {
            s *= tiny;
            s_prev *= tiny;
            ds *= tiny;
            ds_prev *= tiny;
            sexp += 500;
        } else if m < tiny && m > 0.0 {
            s *= big;
            s_prev *= big;
            ds *= big;
            ds_prev *= big;
            sexp -= 500;
        }
    }
    ScaledValue::from_parts(dp, exp2).sub(ScaledValue::from_parts(ds, sexp)).sign()
}

/// A counting-function bisection locates a double root of the periodic
/// determinant only to about sqrt(eps), because the determinant is
/// quadratically flat there. The derivative has a simple zero at the same
/// point, so pairs that land closer than 1e-8 are re-located by bisecting
/// the derivative's sign. Pairs of simple roots below that distance are
/// indistinguishable from doubles in f64 and get reported at their
/// common center.
fn polish_double_roots(diag: &[f64], eigs: &mut [f64]) {
    if diag.len() < 3 {
        return;
    }
    let mut j = 0;
    while j + 1 < eigs.len() {
        if eigs[j + 1] - eigs[j] >= 1e-8 {
            j += 1;
            continue;
        }
        let mut lo = eigs[j] - 1e-7;
        let mut hi = eigs[j + 1] + 1e-7;
        let s_lo = periodic_det_prime_sign(diag, lo);
        let s_hi = periodic_det_prime_sign(diag, hi);
        if s_lo != 0.0 && s_hi != 0.0 && s_lo != s_hi {
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                let s = periodic_det_prime_sign(diag, mid);
                if s == 0.0 {
                    lo = mid;
                    hi = mid;
                } else if s == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let m = 0.5 * (lo + hi);
            if (m - eigs[j]).abs() < 1e-6 && (m - eigs[j + 1]).abs() < 1e-6 {
                eigs[j] = m;
                eigs[j + 1] = m;
            }
        }
        j += 2;
    }
}

pub fn count_below(diag: &[f64], e: f64, bc: BoundaryCondition) -> usize {
    match bc {
        BoundaryCondition::Dirichlet => dirichlet_count_below(diag, e),
        BoundaryCondition::Periodic => periodic_count_below(diag, e),
    }
}

fn bisect_level(diag: &[f64], bc: BoundaryCondition, j: usize, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let iters = (((hi - lo) / tol).log2().ceil() as usize).clamp(1, 220);
    for _ in 0..iters {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if count_below(diag, mid, bc) <= j {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bisection on the counting function can be poisoned: when a midpoint lands
/// inside the floating-point plateau of an eigenvalue (the determinant there
/// is complete cancellation, so its sign and hence the count are noise), one
/// side of a level's bracket gets pinned on the wrong side of a root and the
/// level collapses onto a neighbor, reporting a spuriously tight pair. The
/// plateau is at most a few 1e-12 wide even for strongly coupled long boxes,
/// so counts taken 1e-7 away from a suspect value are reliable. Every group
/// of levels tighter than 1e-8 is audited against such counts and any level
/// the counts disown is re-bisected on the clean side of the window.
fn repair_collapsed_levels(
    diag: &[f64],
    bc: BoundaryCondition,
    eigs: &mut [f64],
    lo0: f64,
    hi0: f64,
    tol: f64,
) {
    let n = eigs.len();
    let mut j0 = 0;
    while j0 + 1 < n {
        if eigs[j0 + 1] - eigs[j0] >= 1e-8 {
            j0 += 1;
            continue;
        }
        let mut j1 = j0 + 1;
        while j1 + 1 < n && eigs[j1 + 1] - eigs[j1] < 1e-8 {
            j1 += 1;
        }
        let mut delta = 1e-7;
        while delta > 2e-10
            && ((j0 > 0 && eigs[j0 - 1] > eigs[j0] - 2.0 * delta)
                || (j1 + 1 < n && eigs[j1 + 1] < eigs[j1] + 2.0 * delta))
        {
            delta /= 10.0;
        }
        let a = eigs[j0] - delta;
        let b = eigs[j1] + delta;
        let c_lo = count_below(diag, a, bc);
        let c_hi = count_below(diag, b, bc);
        // The counts place the true levels c_lo..c_hi inside (a, b); the
        // list claims levels j0..=j1 there. A claimed level below c_lo
        // really lives left of the window, one at or above c_hi lives
        // right of it.
        for j in j0..c_lo.min(j1 + 1) {
            eigs[j] = bisect_level(diag, bc, j, lo0, a, tol);
        }
        for j in c_hi.max(j0)..=j1 {
            eigs[j] = bisect_level(diag, bc, j, b, hi0, tol);
        }
        j0 = j1 + 1;
    }
}

/// All eigenvalues of the restriction, ascending, each located by
/// bisection of the counting function to within tol.
pub fn spectrum_of_diag(diag: &[f64], bc: BoundaryCondition, tol: f64) -> Result<Vec<f64>> {
    let tol = check_tol(tol)?;
    let n = diag.len();
    if n == 0 {
        return Err(Error::invalid("empty restriction"));
    }
    match (bc, n) {
        (BoundaryCondition::Periodic, 1) => return Ok(vec![diag[0] + 2.0]),
        (BoundaryCondition::Periodic, 2) => {
            let mid = 0.5 * (diag[0] + diag[1]);
            let half = 0.5 * (diag[0] - diag[1]);
            let r = (half * half + 4.0).sqrt();
            return Ok(vec![mid - r, mid + r]);
        }
        _ => {}
    }
    let lo0 = diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 - tol;
    let hi0 = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 + tol;
    let mut eigs: Vec<f64> =
        (0..n).map(|j| bisect_level(diag, bc, j, lo0, hi0, tol)).collect();
    repair_collapsed_levels(diag, bc, &mut eigs, lo0, hi0, tol);
    if bc == BoundaryCondition::Periodic {
        polish_double_roots(diag, &mut eigs);
    }
    Ok(eigs)
}

/// Spectrum of a finite restriction with its boundary flavor attached.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub bc: BoundaryCondition,
}

impl Spectrum {
    pub fn count_below(&self, e: f64) -> usize {
        self.eigenvalues.partition_point(|&mu| mu < e)
    }
}

pub fn restriction_spectrum(h: &FiniteRestriction, tol: f64) -> Result<Spectrum> {
    Ok(Spectrum { eigenvalues: spectrum_of_diag(h.diag(), h.bc(), tol)?, bc: h.bc() })
}

pub fn dirichlet_spectrum(diag: &[f64], tol: f64) -> Result<Vec<f64>> {
    spectrum_of_diag(diag, BoundaryCondition::Dirichlet, tol)
}

pub fn periodic_spectrum(diag: &[f64], tol: f64) -> Result<Vec<f64>> {
    spectrum_of_diag(diag, BoundaryCondition::Periodic, tol)
}

/// One sampled point of an eigenvalue curve over the phase circle.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub x: f64,
    pub mu: f64,
    /// Set when the restriction was built with the left-limit convention
    /// at a breakpoint phase.
    pub is_left_limit: bool,
}

#[derive(Clone, Debug)]
pub struct EigenCurve {
    pub level: usize,
    pub points: Vec<CurvePoint>,
}

#[derive(Clone, Copy, Debug)]
pub struct CurveReport {
    /// Largest decrease of any level between consecutive samples inside a
    /// breakpoint-free segment (a correct computation keeps this at
    /// bisection noise).
    pub worst_backslide: f64,
    pub monotone_ok: bool,
    pub breakpoints: usize,
}

#[derive(Clone, Debug)]
pub struct EigenCurveSet {
    pub curves: Vec<EigenCurve>,
    pub report: CurveReport,
}

/// Samples all n eigenvalue curves of the n-site restriction over one
/// period of the phase: `grid` interior points plus every breakpoint,
/// the latter from both sides.
pub fn eigencurves(
    spec: &OperatorSpec,
    n: usize,
    bc: BoundaryCondition,
    grid: usize,
    tol: f64,
) -> Result<EigenCurveSet> {
    let tol = check_tol(tol)?;
    if grid < 2 {
        return Err(Error::invalid("need at least two grid points"));
    }
    let betas = beta_points(n, spec.alpha_dd())?;
    // Sample positions: (phase, left_limit flag), sorted by phase with the
    // left-limit entry first at each breakpoint.
    let mut samples: Vec<(f64, bool)> = Vec::with_capacity(grid + 2 * n);
    for i in 0..grid {
        samples.push(((i as f64 + 0.5) / grid as f64, false));
    }
    for b in &betas {
        samples.push((b.value, true));
        samples.push((b.value, false));
    }
    samples.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite phases")
            .then_with(|| b.1.cmp(&a.1)) // left limit sorts first
    });

    let spectra: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|&(x, left)| {
            let h = FiniteRestriction::new(&spec.with_phase(x), n, bc, left)?;
            spectrum_of_diag(h.diag(), bc, tol)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curves: Vec<EigenCurve> = (0..n).map(|level| EigenCurve { level, points: Vec::new() }).collect();
    for (idx, &(x, left)) in samples.iter().enumerate() {
        for level in 0..n {
            curves[level].points.push(CurvePoint { x, mu: spectra[idx][level], is_left_limit: left });
        }
    }

    // Between breakpoints every level must be nondecreasing in the phase.
    let beta_values: Vec<f64> = betas.iter().map(|b| b.value).collect();
    let mut worst = 0.0f64;
    for w in 0..samples.len() - 1 {
        let (x0, left0) = samples[w];
        let (x1, left1) = samples[w + 1];
        // The jump at a breakpoint b sits between its left limit and its
        // value, so the segment covers it when b is strictly inside, or at
        // an endpoint sampled from the far side.
        let crosses = beta_values
            .iter()
            .any(|&b| (b > x0 && b < x1) || (b == x0 && left0) || (b == x1 && !left1));
        if crosses {
            continue;
        }
        for level in 0..n {
            let drop = spectra[w][level] - spectra[w + 1][level];
            worst = worst.max(drop);
        }
    }
    let report = CurveReport { worst_backslide: worst, monotone_ok: worst <= 10.0 * tol, breakpoints: n };
    Ok(EigenCurveSet { curves, report })
}

/// Almost invariance of periodic box spectra along the orbit.
///
/// The q_k-site periodic restriction at phase x - r alpha is, up to cyclic
/// relabeling, the restriction at x with r diagonal entries moved by
/// lambda v' * ||q_k alpha|| at most: its eigenvalues match those at x to
/// lambda gamma_plus ||q_k alpha||, provided none of the r transported
/// phases {x - j alpha} sits within ||q_k alpha|| of the wrap point
/// (admissibility).
pub struct InvarianceScan {
    q: usize,
    qnorm: f64,
    bound: f64,
    tol: f64,
    phases: Vec<f64>,
    spectra: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug)]
pub enum InvarianceOutcome {
    /// Some transported phase was too close to the wrap point.
    Inadmissible,
    Measured { deficit: f64, bound: f64, within: bool },
}

impl InvarianceScan {
    /// Precomputes periodic spectra at the orbit phases x_i = {x0 - i a},
    /// i = 0..=max_index. Scale k must index a convergent denominator
    /// with k + 1 inside the expansion depth.
    pub fn new(spec: &OperatorSpec, k: usize, max_index: usize, tol: f64) -> Result<Self> {
        let tol = check_tol(tol)?;
        if k < 1 || k + 1 > spec.cf.depth() {
            return Err(Error::invalid(format!("scale k = {k} outside expansion depth")));
        }
        let q128 = spec.cf.q_at(k);
        if q128 > 100_000 {
            return Err(Error::Capacity(format!("box size {q128} too large for a spectral scan")));
        }
        let q = q128 as usize;
        let qnorm = torus_norm(spec.cf.q_i64(k), spec.cf.alpha_dd());
        let (_, gamma_plus) = spec.potential.slope_bounds();
        let bound = spec.lambda * gamma_plus * qnorm;
        let alpha = spec.cf.alpha_dd();
        let phases: Vec<f64> =
            (0..=max_index).map(|i| crate::dd::frac_shifted(spec.x, alpha, -(i as i64))).collect();
        let spectra: Vec<Vec<f64>> = phases
            .par_iter()
            .map(|&x| {
                let diag = spec.with_phase(x).sample_orbit(q, false);
                periodic_spectrum(&diag, tol)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(InvarianceScan { q, qnorm, bound, tol, phases, spectra })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Weyl bound lambda gamma_plus ||q_k alpha|| on admissible deficits.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn max_index(&self) -> usize {
        self.phases.len() - 1
    }

    /// Compares spectra at orbit indices i and i + r.
    pub fn deficit(&self, i: usize, r: usize) -> Result<InvarianceOutcome> {
        if r == 0 || r >= self.q {
            return Err(Error::invalid(format!("shift r must lie in 1..{}", self.q)));
        }
        let j_hi = i + r;
        if j_hi > self.max_index() {
            return Err(Error::invalid(format!(
                "orbit index {j_hi} beyond precomputed range {}",
                self.max_index()
            )));
        }
        // Admissibility: the transported phases are {x_i - j alpha} for
        // j = 1..=r, which are exactly the precomputed orbit phases.
        let clearance = self.qnorm + 1e-12;
        for j in 1..=r {
            let u = self.phases[i + j];
            if u.min(1.0 - u) < clearance {
                return Ok(InvarianceOutcome::Inadmissible);
            }
        }
        let a = &self.spectra[i];
        let b = &self.spectra[i + r];
        let deficit = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        let bound = self.bound + 10.0 * self.tol;
        Ok(InvarianceOutcome::Measured { deficit, bound, within: deficit <= bound })
    }
}

/// Eigenvalue repulsion at breakpoint phases.
#[derive(Clone, Debug)]
pub struct RepulsionReport {
    /// Guaranteed spread of K+1 consecutive eigenvalues.
    pub bound: f64,
    /// Smallest observed spread mu_{m+K} - mu_m over all breakpoints.
    pub min_spread: f64,
    /// Breakpoint and level attaining it.
    pub argmin: (usize, usize),
    /// Number of (l, m) pairs violating the bound beyond 10 tol.
    pub violations: usize,
    pub pairs_checked: usize,
}

/// Checks that at every breakpoint phase (taken from the side matching the
/// parity of k) the periodic spectrum has mu_{m+K} - mu_m at least
/// lambda (K (1 - er) gamma_minus / q_k - 3 gamma_plus / q_{k+1}).
pub fn repulsion_scan(
    spec: &OperatorSpec,
    k: usize,
    big_k: usize,
    er: f64,
    tol: f64,
) -> Result<RepulsionReport> {
    let tol = check_tol(tol)?;
    if k < 1 || k + 1 > spec.cf.depth() {
        return Err(Error::invalid(format!("scale k = {k} outside expansion depth")));
    }
    if big_k == 0 {
        return Err(Error::invalid("window parameter K must be positive"));
    }
    let ratio = spec.cf.scale_ratio(k);
    if ratio > er {
        return Err(Error::invalid(format!(
            "scale q_{k} has ratio {ratio:.4} > er = {er}; repulsion needs an er-good scale"
        )));
    }
    let q = spec.cf.q_at(k);
    if q > 100_000 {
        return Err(Error::Capacity(format!("box size {q} too large for a repulsion scan")));
    }
    let q = q as usize;
    if big_k >= q {
        return Err(Error::invalid(format!("window parameter K = {big_k} must be below q = {q}")));
    }
    let (gamma_minus, gamma_plus) = spec.potential.slope_bounds();
    let qk = spec.cf.q_at(k) as f64;
    let qk1 = spec.cf.q_at(k + 1) as f64;
    let bound =
        spec.lambda * (big_k as f64 * (1.0 - er) * gamma_minus / qk - 3.0 * gamma_plus / qk1);
    if bound <= 0.0 {
        return Err(Error::invalid(format!(
            "repulsion bound {bound:.3e} not positive; K too small for this scale"
        )));
    }
    // k even: q_k alpha - p_k > 0, the breakpoint is approached from the
    // left; k odd: from the right.
    let left_limit = k % 2 == 0;
    let betas: Vec<BetaPoint> = beta_points(q, spec.alpha_dd())?;
    let spectra: Vec<(usize, Vec<f64>)> = betas
        .par_iter()
        .map(|b| {
            let diag = spec.with_phase(b.value).sample_orbit(q, left_limit);
            periodic_spectrum(&diag, tol).map(|s| (b.site, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut min_spread = f64::INFINITY;
    let mut argmin = (0, 0);
    let mut violations = 0;
    let mut pairs = 0;
    for (site, mus) in &spectra {
        for m in 0..mus.len() - big_k {
            let spread = mus[m + big_k] - mus[m];
            pairs += 1;
            if spread < min_spread {
                min_spread = spread;
                argmin = (*site, m);
            }
            if spread < bound - 10.0 * tol {
                violations += 1;
            }
        }
    }
    Ok(RepulsionReport { bound, min_spread, argmin, violations, pairs_checked: pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::ContinuedFraction;
    use crate::potential::MonotonePotential;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn golden_spec(lambda: f64, x: f64) -> OperatorSpec {
        let cf = ContinuedFraction::golden(20).unwrap();
        OperatorSpec::new(cf, lambda, MonotonePotential::sawtooth(), x).unwrap()
    }

    fn dense_restriction(diag: &[f64], bc: BoundaryCondition) -> DMatrix<f64> {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = 1.0;
                m[(i + 1, i)] = 1.0;
            }
        }
        if bc == BoundaryCondition::Periodic {
            match n {
                1 => m[(0, 0)] += 2.0,
                2 => {
                    m[(0, 1)] = 2.0;
                    m[(1, 0)] = 2.0;
                }
                _ => {
                    m[(0, n - 1)] = 1.0;
                    m[(n - 1, 0)] = 1.0;
                }
            }
        }
        m
    }

    fn dense_eigs(diag: &[f64], bc: BoundaryCondition) -> Vec<f64> {
        let mut eigs: Vec<f64> = dense_restriction(diag, bc)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eigs
    }

    #[test]
    fn free_chain_dirichlet_closed_form() {
        for n in [5usize, 200] {
            let diag = vec![0.0; n];
            let eigs = dirichlet_spectrum(&diag, 1e-12).unwrap();
            for j in 1..=n {
                let expect = 2.0 * (j as f64 * PI / (n as f64 + 1.0)).cos();
                let got = eigs[n - j];
                assert!(
                    (got - expect).abs() < 1e-10,
                    "free chain n={n}, level {j}: {got:.15} vs {expect:.15}"
                );
            }
        }
    }

    #[test]
    fn free_chain_periodic_closed_form() {
        let n = 8;
        let eigs = periodic_spectrum(&vec![0.0; n], 1e-12).unwrap();
        let mut expect: Vec<f64> = (0..n).map(|j| 2.0 * (2.0 * PI * j as f64 / n as f64).cos()).collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, x) in eigs.iter().zip(expect.iter()) {
            assert!((g - x).abs() < 1e-10, "periodic free chain: {g} vs {x}");
        }
    }

    #[test]
    fn spectra_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..30 {
            let n = rng.gen_range(1..=24);
            let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Periodic] {
                let got = spectrum_of_diag(&diag, bc, 1e-12).unwrap();
                let oracle = dense_eigs(&diag, bc);
                for (j, (g, o)) in got.iter().zip(oracle.iter()).enumerate() {
                    assert!(
                        (g - o).abs() < 1e-9,
                        "trial {trial}, {bc}, n={n}, level {j}: {g:.12} vs oracle {o:.12}"
                    );
                }
            }
        }
    }

    #[test]
    fn counting_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..60 {
            let n = rng.gen_range(1..=40);
            let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let e: f64 = rng.gen_range(-5.5..5.5);
            assert_eq!(
                dirichlet_count_below(&diag, e),
                dirichlet_count_below_minors(&diag, e),
                "pivot and minor counting must agree at generic e = {e}"
            );
        }
    }

    #[test]
    fn periodic_counting_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let n = rng.gen_range(3..=20);
            let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let e: f64 = rng.gen_range(-4.5..4.5);
            let oracle = dense_eigs(&diag, BoundaryCondition::Periodic)
                .iter()
                .filter(|&&mu| mu < e)
                .count();
            assert_eq!(
                periodic_count_below(&diag, e),
                oracle,
                "periodic count at e={e}, diag={diag:?}"
            );
        }
    }

    #[test]
    fn tolerance_floor_is_enforced() {
        let err = dirichlet_spectrum(&[0.0; 4], 1e-14).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "tol below floor must be rejected");
    }

    #[test]
    fn eigencurves_monotone_and_interlaced() {
        let spec = golden_spec(2.0, 0.0);
        let n = 13;
        let set = eigencurves(&spec, n, BoundaryCondition::Periodic, 40, 1e-11).unwrap();
        assert!(set.report.monotone_ok, "worst backslide {:.3e}", set.report.worst_backslide);
        assert_eq!(set.curves.len(), n);

        // At each breakpoint the left-limit spectrum dominates the right
        // one and the two interlace: mu_{j-1}(left) <= mu_j(right) <= mu_j(left);
        // the total trace jump is -lambda.
        let pts = &set.curves[0].points;
        for idx in 0..pts.len() - 1 {
            if !(pts[idx].is_left_limit && !pts[idx + 1].is_left_limit && pts[idx].x == pts[idx + 1].x) {
                continue;
            }
            let mut jump_sum = 0.0;
            for level in 0..n {
                let left = set.curves[level].points[idx].mu;
                let right = set.curves[level].points[idx + 1].mu;
                assert!(right <= left + 1e-9, "level {level} must not jump up: {right} vs {left}");
                if level > 0 {
                    let left_below = set.curves[level - 1].points[idx].mu;
                    assert!(
                        right >= left_below - 1e-9,
                        "interlacing at level {level}: {right} vs {left_below}"
                    );
                }
                jump_sum += right - left;
            }
            assert!(
                (jump_sum + spec.lambda).abs() < 1e-7,
                "trace jump {jump_sum} should be -lambda = {}",
                -spec.lambda
            );
        }
    }

    #[test]
    fn invariance_scan_respects_weyl_bound() {
        let spec = golden_spec(2.0, 0.123);
        let k = 6; // q_6 = 13
        let scan = InvarianceScan::new(&spec, k, 40, 1e-11).unwrap();
        assert_eq!(scan.q(), 13);
        let mut measured = 0;
        let mut max_ratio = 0.0f64;
        for i in 0..=27 {
            for r in [1usize, 5, 12] {
                match scan.deficit(i, r).unwrap() {
                    InvarianceOutcome::Inadmissible => {}
                    InvarianceOutcome::Measured { deficit, bound, within } => {
                        measured += 1;
                        assert!(within, "deficit {deficit:.3e} above bound {bound:.3e} at i={i}, r={r}");
                        max_ratio = max_ratio.max(deficit / bound);
                    }
                }
            }
        }
        assert!(measured > 40, "most pairs admissible, got {measured}");
        assert!(max_ratio > 0.05, "bound should not be vacuous, max ratio {max_ratio:.3}");
    }

    #[test]
    fn invariance_scan_rejects_out_of_range_queries() {
        let spec = golden_spec(2.0, 0.0);
        let scan = InvarianceScan::new(&spec, 6, 15, 1e-11).unwrap();
        assert!(scan.deficit(10, 13).is_err(), "13 = q is out of the shift range");
        assert!(scan.deficit(15, 1).is_err(), "index past the precomputed orbit");
    }

    #[test]
    fn repulsion_at_breakpoints_golden_13() {
        let spec = golden_spec(2.0, 0.0);
        let report = repulsion_scan(&spec, 6, 4, 0.4, 1e-11).unwrap();
        assert!(
            (report.bound - 0.083_516_483_516_483_5).abs() < 1e-12,
            "frozen bound value, got {:.16}",
            report.bound
        );
        assert_eq!(report.violations, 0, "no spread may undercut the bound");
        assert!(report.min_spread >= report.bound - 1e-10);
        assert_eq!(report.pairs_checked, 13 * (13 - 4));
    }

    #[test]
    fn repulsion_rejects_bad_scales() {
        let spec = golden_spec(2.0, 0.0);
        // k = 1 has ratio 1/2 > 0.4.
        assert!(repulsion_scan(&spec, 1, 4, 0.4, 1e-11).is_err());
        // Tiny K drives the bound negative at k = 6.
        assert!(repulsion_scan(&spec, 6, 1, 0.4, 1e-11).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn spectrum_is_sorted_and_counts_are_consistent(
            seed in 0u64..1000,
            n in 2usize..16,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Periodic] {
                let eigs = spectrum_of_diag(&diag, bc, 1e-11).unwrap();
                for w in eigs.windows(2) {
                    prop_assert!(w[0] <= w[1] + 1e-11, "sorted spectrum");
                }
                let e = rng.gen_range(-5.0..5.0);
                let direct = count_below(&diag, e, bc);
                let from_eigs = eigs.iter().filter(|&&mu| mu < e - 1e-9).count();
                let from_eigs_hi = eigs.iter().filter(|&&mu| mu < e + 1e-9).count();
                prop_assert!(
                    (from_eigs..=from_eigs_hi).contains(&direct),
                    "count {direct} outside [{from_eigs}, {from_eigs_hi}] at e={e}"
                );
            }
        }
    }
}
