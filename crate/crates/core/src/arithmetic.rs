//! Continued-fraction machinery for the rotation frequency.
//!
//! Everything downstream is organized around the convergent denominators
//! q_k of the frequency alpha: they are the only box sizes at which the
//! rotation orbit has clean structure (two gap lengths, almost-invariance
//! of spectra, eigenvalue repulsion). This module produces the convergents
//! exactly in 128-bit integers, evaluates torus norms in double-double
//! precision, and packages the derived combinatorics: gap structure,
//! good-denominator scales, Diophantine checks, breakpoint lists.

use crate::dd::{self, Dd};
use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// How a frequency is specified.
#[derive(Clone, Debug, PartialEq)]
pub enum Frequency {
    /// (sqrt(5) - 1) / 2, all partial quotients 1.
    Golden,
    /// sqrt(2) - 1, all partial quotients 2.
    Silver,
    /// Purely periodic rule: the block of partial quotients repeats forever.
    Rule(Vec<u64>),
    /// Plain numeric value in (0, 1); expansion accuracy limited by f64.
    Numeric(f64),
}

impl Frequency {
    /// Partial quotient a_j (1-based), if derivable from the source alone.
    fn coeff_at(&self, j: usize) -> Option<u64> {
        debug_assert!(j >= 1);
        match self {
            Frequency::Golden => Some(1),
            Frequency::Silver => Some(2),
            Frequency::Rule(block) => Some(block[(j - 1) % block.len()]),
            Frequency::Numeric(_) => None,
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frequency::Golden => write!(f, "golden"),
            Frequency::Silver => write!(f, "silver"),
            Frequency::Rule(block) => {
                let items: Vec<String> = block.iter().map(|a| a.to_string()).collect();
                write!(f, "cf:[{}]", items.join(","))
            }
            Frequency::Numeric(x) => write!(f, "num:{x}"),
        }
    }
}

impl FromStr for Frequency {
    type Err = Error;

    /// Accepts `golden`, `silver`, `cf:[a1,a2,...]`, `num:<decimal>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "golden" => return Ok(Frequency::Golden),
            "silver" => return Ok(Frequency::Silver),
            _ => {}
        }
        if let Some(body) = s.strip_prefix("cf:") {
            let body = body.trim();
            let inner = body
                .strip_prefix('[')
                .and_then(|b| b.strip_suffix(']'))
                .ok_or_else(|| Error::invalid(format!("cf rule must look like cf:[1,2,3], got `{s}`")))?;
            let mut block = Vec::new();
            for item in inner.split(',') {
                let item = item.trim();
                if item.is_empty() {
                    continue;
                }
                let a: u64 = item
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad partial quotient `{item}` in `{s}`")))?;
                if a == 0 {
                    return Err(Error::invalid("partial quotients must be positive"));
                }
                block.push(a);
            }
            if block.is_empty() {
                return Err(Error::invalid("cf rule needs at least one partial quotient"));
            }
            return Ok(Frequency::Rule(block));
        }
        if let Some(body) = s.strip_prefix("num:") {
            let x: f64 = body
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad numeric frequency `{body}`")))?;
            if !(0.0..1.0).contains(&x) || x == 0.0 {
                return Err(Error::invalid("numeric frequency must lie in (0, 1)"));
            }
            return Ok(Frequency::Numeric(x));
        }
        Err(Error::invalid(format!(
            "unknown frequency `{s}` (expected golden, silver, cf:[..], or num:<decimal>)"
        )))
    }
}

/// Continued-fraction expansion of a frequency with exact integer
/// convergents.
///
/// `coeffs[i]` is the partial quotient a_{i+1}; `p[k]` / `q[k]` is the k-th
/// convergent with `p[0] = 0`, `q[0] = 1`. All indices in the public API
/// are the mathematical k.
#[derive(Clone, Debug)]
pub struct ContinuedFraction {
    source: Frequency,
    coeffs: Vec<u64>,
    p: Vec<i128>,
    q: Vec<i128>,
    alpha: Dd,
}

impl ContinuedFraction {
    pub fn golden(depth: usize) -> Result<Self> {
        Self::from_source(Frequency::Golden, dd::GOLDEN, depth)
    }

    pub fn silver(depth: usize) -> Result<Self> {
        Self::from_source(Frequency::Silver, dd::SILVER, depth)
    }

    /// Builds from a purely periodic coefficient rule. The frequency value
    /// is recovered from a deep convergent pair, which pins it to full
    /// double-double accuracy.
    pub fn from_rule(block: &[u64], depth: usize) -> Result<Self> {
        if block.is_empty() || block.iter().any(|&a| a == 0) {
            return Err(Error::invalid("coefficient rule must be nonempty and positive"));
        }
        let source = Frequency::Rule(block.to_vec());
        // A deep convergent pair pins alpha to ~1/q^2 < 1e-28; a Newton
        // polish on the fixed-point quadratic of the repeating block then
        // restores full double-double accuracy.
        let mut pm1: i128 = 1;
        let mut p0: i128 = 0;
        let mut qm1: i128 = 0;
        let mut q0: i128 = 1;
        let mut j = 1usize;
        loop {
            let a = block[(j - 1) % block.len()] as i128;
            let (p1, q1) = (a * p0 + pm1, a * q0 + qm1);
            if q1 >= (1i128 << 52) || j > 600 {
                break;
            }
            pm1 = p0;
            p0 = p1;
            qm1 = q0;
            q0 = q1;
            j += 1;
        }
        let mut alpha = Dd::from_ratio(p0, q0);
        if let Some((a2, b1, c0)) = block_quadratic(block) {
            for _ in 0..2 {
                alpha = polish_quadratic_root(alpha, a2, b1, c0);
            }
        }
        Self::from_source(source, alpha, depth)
    }

    /// Expands a numeric frequency by the Euclidean algorithm in
    /// double-double arithmetic.
    pub fn expand(alpha: f64, depth: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
            return Err(Error::invalid("frequency must lie in (0, 1)"));
        }
        Self::from_source(Frequency::Numeric(alpha), Dd::from_f64(alpha), depth)
    }

    pub fn from_frequency(freq: &Frequency, depth: usize) -> Result<Self> {
        match freq {
            Frequency::Golden => Self::golden(depth),
            Frequency::Silver => Self::silver(depth),
            Frequency::Rule(block) => Self::from_rule(block, depth),
            Frequency::Numeric(x) => Self::expand(*x, depth),
        }
    }

    fn from_source(source: Frequency, alpha: Dd, depth: usize) -> Result<Self> {
        if depth < 1 {
            return Err(Error::invalid("depth must be at least 1"));
        }
        let mut coeffs = Vec::with_capacity(depth);
        match &source {
            Frequency::Numeric(_) => {
                // Euclidean expansion; x is the current remainder in (0, 1).
                let mut x = alpha;
                for _ in 0..depth {
                    let xv = x.value();
                    if xv < 1e-14 {
                        return Err(Error::precision(
                            "frequency is rational to working precision; \
                             supply a coefficient rule instead",
                        ));
                    }
                    // Reciprocal in dd: hi = 1/x, residual via fma.
                    let inv_hi = 1.0 / xv;
                    let r = {
                        // 1 - inv_hi * x in dd
                        let prod_hi = inv_hi * x.hi;
                        let prod_err = f64::mul_add(inv_hi, x.hi, -prod_hi);
                        let rest = f64::mul_add(inv_hi, x.lo, prod_err);
                        Dd::new(1.0 - prod_hi, -rest)
                    };
                    let inv = Dd::new(inv_hi, r.value() / xv);
                    let a = inv.value().floor();
                    if a < 1.0 {
                        return Err(Error::precision("expansion produced a zero partial quotient"));
                    }
                    coeffs.push(a as u64);
                    x = inv.add_f64(-a).fract();
                }
            }
            src => {
                for j in 1..=depth {
                    coeffs.push(src.coeff_at(j).expect("rule sources have all coefficients"));
                }
            }
        }

        let mut p = Vec::with_capacity(depth + 1);
        let mut q = Vec::with_capacity(depth + 1);
        p.push(0i128);
        q.push(1i128);
        let (mut pm1, mut qm1) = (1i128, 0i128);
        for (i, &a) in coeffs.iter().enumerate() {
            let a = a as i128;
            let pk = a
                .checked_mul(p[i])
                .and_then(|t| t.checked_add(pm1))
                .ok_or_else(|| Error::Capacity("convergent numerator exceeds i128".into()))?;
            let qk = a
                .checked_mul(q[i])
                .and_then(|t| t.checked_add(qm1))
                .ok_or_else(|| Error::Capacity("convergent denominator exceeds i128".into()))?;
            pm1 = p[i];
            qm1 = q[i];
            p.push(pk);
            q.push(qk);
        }
        Ok(ContinuedFraction { source, coeffs, p, q, alpha })
    }

    pub fn source(&self) -> &Frequency {
        &self.source
    }

    /// Number of expanded partial quotients.
    pub fn depth(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Convergent denominators q_0, q_1, ..., q_depth.
    pub fn q(&self) -> &[i128] {
        &self.q
    }

    pub fn p(&self) -> &[i128] {
        &self.p
    }

    pub fn q_at(&self, k: usize) -> i128 {
        self.q[k]
    }

    /// q_k as i64; callers stay well inside this range (documented dd
    /// torus-norm accuracy stops near 2^40 anyway).
    pub fn q_i64(&self, k: usize) -> i64 {
        i64::try_from(self.q[k]).expect("convergent denominator exceeds i64 range")
    }

    pub fn alpha_dd(&self) -> Dd {
        self.alpha
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.value()
    }

    /// Signed remainder q_k alpha - p_k, accurate to double-double.
    pub fn remainder(&self, k: usize) -> f64 {
        let qk = self.q_i64(k);
        self.alpha.mul_int(qk).add_f64(-(self.p[k] as f64)).value()
    }

    /// Tail value t_j = [a_j; a_{j+1}, ...] (1-based j), evaluated backward
    /// from up to 80 partial quotients. None if too few are available for
    /// full accuracy (numeric sources near the expansion horizon).
    pub fn tail(&self, j: usize) -> Option<f64> {
        let want = 80usize;
        let mut terms = Vec::with_capacity(want);
        for i in j..j + want {
            if let Some(a) = self.source.coeff_at(i) {
                terms.push(a as f64);
            } else if i <= self.coeffs.len() {
                terms.push(self.coeffs[i - 1] as f64);
            } else {
                break;
            }
        }
        if terms.len() < 25 {
            return None;
        }
        // Backward recursion contracts the seed error by at least the
        // square of each tail value, so the 0.5 seed offset is annihilated.
        let mut t = *terms.last().unwrap() + 0.5;
        for &a in terms.iter().rev().skip(1) {
            t = a + 1.0 / t;
        }
        Some(t)
    }

    /// The ratio q_{k-1} / q_{k+1} that decides whether q_k is a good
    /// scale. Defined for 1 <= k <= depth - 1.
    pub fn scale_ratio(&self, k: usize) -> f64 {
        debug_assert!(k >= 1 && k + 1 <= self.depth());
        self.q[k - 1] as f64 / self.q[k + 1] as f64
    }

    /// Index k of a given denominator value, if it is a convergent
    /// denominator with a defined scale ratio.
    pub fn scale_index(&self, qk: i128) -> Option<usize> {
        (1..self.depth()).find(|&k| self.q[k] == qk)
    }
}

/// Coefficients (A, B, C) of the fixed-point quadratic A x^2 + B x + C = 0
/// satisfied by the purely periodic expansion with the given block: with
/// (p_L, q_L) the block's own convergents, A = q_{L-1}, B = q_L - p_{L-1},
/// C = -p_L. None when an entry leaves exact f64 integer range.
fn block_quadratic(block: &[u64]) -> Option<(i64, i64, i64)> {
    let cap = 1i128 << 51;
    let (mut pm1, mut p0, mut qm1, mut q0) = (1i128, 0i128, 0i128, 1i128);
    for &a in block {
        let a = a as i128;
        let p1 = a.checked_mul(p0)?.checked_add(pm1)?;
        let q1 = a.checked_mul(q0)?.checked_add(qm1)?;
        if p1.abs() >= cap || q1.abs() >= cap {
            return None;
        }
        pm1 = p0;
        p0 = p1;
        qm1 = q0;
        q0 = q1;
    }
    Some((qm1 as i64, (q0 - pm1) as i64, -(p0 as i64)))
}

/// One double-double Newton step toward the root of A x^2 + B x + C.
fn polish_quadratic_root(x: Dd, a2: i64, b1: i64, c0: i64) -> Dd {
    let f = x.mul(x).mul_int(a2).add(x.mul_int(b1)).add_f64(c0 as f64);
    let fp = x.mul_int(2 * a2).add_f64(b1 as f64).value();
    if fp == 0.0 {
        return x;
    }
    x.add_f64(-f.value() / fp)
}

/// Torus norm ||n alpha|| = min({n alpha}, 1 - {n alpha}).
pub fn torus_norm(n: i64, alpha: Dd) -> f64 {
    dd::torus_norm_mult(alpha, n)
}

/// Circular gap statistics of the orbit prefix {j alpha}, j = 0..q_k - 1.
///
/// By the three-distance theorem this prefix splits the circle into gaps
/// of exactly two lengths: q_{k-1} large ones and q_k - q_{k-1} small
/// ones. Lengths are measured from the sorted orbit, not inferred.
#[derive(Clone, Debug)]
pub struct GapStructure {
    pub k: usize,
    pub large_count: usize,
    pub small_count: usize,
    pub large_len: f64,
    pub small_len: f64,
    /// Distinct gap lengths with multiplicities, ascending (1 entry for
    /// the degenerate single-point orbit, else 2).
    pub distinct: Vec<(f64, usize)>,
}

const GAP_CLUSTER_TOL: f64 = 1e-12;
const GAP_ENUM_CAP: i128 = 4_000_000;

pub fn gap_structure(cf: &ContinuedFraction, k: usize) -> Result<GapStructure> {
    if k < 1 || k >= cf.depth() {
        return Err(Error::invalid(format!(
            "gap structure needs 1 <= k < depth = {}, got {k}",
            cf.depth()
        )));
    }
    let qk = cf.q_at(k);
    if qk > GAP_ENUM_CAP {
        return Err(Error::Capacity(format!("orbit of {qk} points exceeds the enumeration cap")));
    }
    let qk = qk as i64;
    let alpha = cf.alpha_dd();
    let mut pts: Vec<f64> = (0..qk).map(|j| dd::frac_mult(alpha, j)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("orbit points are finite"));

    let n = pts.len();
    let mut gaps = Vec::with_capacity(n);
    for i in 0..n {
        let g = if i + 1 < n { pts[i + 1] - pts[i] } else { 1.0 - pts[n - 1] + pts[0] };
        gaps.push(g);
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).expect("gaps are finite"));
    let gap_sum = crate::numerics::pairwise_sum(&gaps);

    // Cluster with absolute tolerance, then represent each cluster by its
    // mean (the first member would bias long clusters low).
    let mut clusters: Vec<(f64, f64, usize)> = Vec::new();
    for &g in &gaps {
        match clusters.last_mut() {
            Some((first, sum, count)) if (g - *first).abs() <= GAP_CLUSTER_TOL => {
                *sum += g;
                *count += 1;
            }
            _ => clusters.push((g, g, 1)),
        }
    }
    let distinct: Vec<(f64, usize)> =
        clusters.iter().map(|&(_, sum, count)| (sum / count as f64, count)).collect();
    if distinct.len() > 2 {
        return Err(Error::precision(format!(
            "orbit prefix of {qk} points produced {} distinct gap lengths (expected at most 2)",
            distinct.len()
        )));
    }

    let (small, large) = match distinct.len() {
        1 => ((0.0, 0usize), distinct[0]),
        _ => (distinct[0], distinct[1]),
    };
    let gs = GapStructure {
        k,
        large_count: large.1,
        small_count: small.1,
        large_len: large.0,
        small_len: small.0,
        distinct: distinct.clone(),
    };

    // Structural invariants from the three-distance theorem.
    let qkm1 = cf.q_at(k - 1) as usize;
    let qk = cf.q_at(k) as usize;
    if gs.large_count != qkm1 || gs.small_count != qk - qkm1 {
        return Err(Error::validation(format!(
            "gap counts ({} large, {} small) do not match (q_{} = {}, q_{} - q_{} = {})",
            gs.large_count,
            gs.small_count,
            k - 1,
            qkm1,
            k,
            k - 1,
            qk - qkm1
        )));
    }
    if (gap_sum - 1.0).abs() > 1e-12 {
        return Err(Error::validation(format!("gap lengths sum to {gap_sum}, not 1")));
    }
    if k + 1 <= cf.depth() {
        let qkf = cf.q_at(k) as f64;
        let qk1f = cf.q_at(k + 1) as f64;
        let qkm1f = qkm1 as f64;
        let small_lower = 1.0 / qkf - qkm1f / (qkf * qk1f);
        let small_upper = 1.0 / qkf;
        let large_upper = 1.0 / qkf + 1.0 / qk1f;
        let slack = 1e-12;
        if gs.small_count > 0 && !(small_lower - slack..=small_upper + slack).contains(&gs.small_len) {
            return Err(Error::validation(format!(
                "small gap {} outside [{small_lower}, {small_upper}]",
                gs.small_len
            )));
        }
        if !(small_upper - slack..=large_upper + slack).contains(&gs.large_len) {
            return Err(Error::validation(format!(
                "large gap {} outside [{small_upper}, {large_upper}]",
                gs.large_len
            )));
        }
    }
    Ok(gs)
}

/// Finite-depth stand-in for the liminf of q_{k-1} / q_{k+1}.
#[derive(Clone, Debug)]
pub struct ErEstimate {
    /// min over 1 <= k <= depth-1; an upper-bound proxy for the liminf.
    pub min_ratio: f64,
    pub argmin_k: usize,
    /// Ratio at the deepest available k, indicating where the tail sits.
    pub tail_ratio: f64,
    /// All ratios by k (index 0 unused, stored as NaN).
    pub ratios: Vec<f64>,
}

/// Scans the ratios q_{k-1} / q_{k+1}. The returned minimum is a proxy:
/// the true liminf can only be larger on deeper tails, and it never
/// exceeds 1/2 for any frequency.
pub fn er_estimate(cf: &ContinuedFraction) -> Result<ErEstimate> {
    if cf.depth() < 4 {
        return Err(Error::invalid("er estimate needs depth >= 4"));
    }
    let mut ratios = vec![f64::NAN; cf.depth()];
    let mut min_ratio = f64::INFINITY;
    let mut argmin_k = 1;
    for k in 1..cf.depth() {
        let r = cf.scale_ratio(k);
        ratios[k] = r;
        if r < min_ratio {
            min_ratio = r;
            argmin_k = k;
        }
    }
    let tail_ratio = ratios[cf.depth() - 1];
    Ok(ErEstimate { min_ratio, argmin_k, tail_ratio, ratios })
}

/// All q_k (k >= 1) whose scale ratio q_{k-1}/q_{k+1} is at most `er`,
/// ascending. Comparison is non-strict; equality cases count as good.
pub fn good_denominators(cf: &ContinuedFraction, er: f64) -> Result<Vec<i128>> {
    if !(0.0..1.0).contains(&er) || er == 0.0 {
        return Err(Error::invalid("er must lie in (0, 1)"));
    }
    Ok((1..cf.depth())
        .filter(|&k| cf.scale_ratio(k) <= er)
        .map(|k| cf.q_at(k))
        .collect())
}

#[derive(Clone, Copy, Debug)]
pub struct DiophantineParams {
    pub c: f64,
    pub tau: f64,
    pub n_max: u64,
}

impl DiophantineParams {
    pub fn new(c: f64, tau: f64, n_max: u64) -> Result<Self> {
        if c <= 0.0 {
            return Err(Error::invalid("Diophantine constant C must be positive"));
        }
        if tau < 1.0 {
            return Err(Error::invalid("Diophantine exponent tau must be at least 1"));
        }
        if n_max < 1 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        Ok(DiophantineParams { c, tau, n_max })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DiophantineReport {
    pub holds: bool,
    pub worst_n: u64,
    /// min over n of ||n alpha|| * n^tau; the check passes iff this is
    /// at least C.
    pub worst_ratio: f64,
}

/// Checks ||n alpha|| >= C n^{-tau} for every 1 <= n <= N by direct sweep.
pub fn diophantine_check(cf: &ContinuedFraction, params: &DiophantineParams) -> Result<DiophantineReport> {
    let n_max = params.n_max;
    if (n_max as i128) > *cf.q().last().expect("nonempty convergents") {
        return Err(Error::invalid(format!(
            "horizon {n_max} exceeds the deepest convergent denominator {}; increase depth",
            cf.q().last().unwrap()
        )));
    }
    let alpha = cf.alpha_dd();
    let mut worst_ratio = f64::INFINITY;
    let mut worst_n = 1;
    for n in 1..=n_max {
        let norm = dd::torus_norm_mult(alpha, n as i64);
        let ratio = norm * (n as f64).powf(params.tau);
        if ratio < worst_ratio {
            worst_ratio = ratio;
            worst_n = n;
        }
    }
    Ok(DiophantineReport { holds: worst_ratio >= params.c, worst_n, worst_ratio })
}

/// A breakpoint of the n-site restriction: the phase where the potential
/// value at some lattice site jumps.
#[derive(Clone, Copy, Debug)]
pub struct BetaPoint {
    /// Position {-j alpha} in [0, 1).
    pub value: f64,
    /// The lattice site j whose sampled phase crosses the discontinuity.
    pub site: usize,
}

/// Sorted breakpoints beta_0 = 0 < beta_1 < ... < beta_{n-1} of the n-site
/// restriction, each tagged with its lattice site.
pub fn beta_points(n: usize, alpha: Dd) -> Result<Vec<BetaPoint>> {
    if n < 1 {
        return Err(Error::invalid("need at least one site"));
    }
    let mut pts: Vec<BetaPoint> = (0..n)
        .map(|j| BetaPoint { value: dd::frac_mult(alpha, -(j as i64)), site: j })
        .collect();
    pts.sort_by(|a, b| a.value.partial_cmp(&b.value).expect("finite breakpoints"));
    for w in pts.windows(2) {
        if (w[1].value - w[0].value).abs() < 1e-13 {
            return Err(Error::precision(format!(
                "breakpoints for sites {} and {} collide; frequency is rational to working precision",
                w[0].site, w[1].site
            )));
        }
    }
    Ok(pts)
}

/// Outcome of the scale-k phase-increment measurement at a single phase.
#[derive(Clone, Copy, Debug)]
pub enum IndifferenceOutcome {
    /// The phase sits in the excluded wrap zone; no statement is made.
    Skipped,
    /// |{x + q_k alpha} - {x}| together with the bound 1/q_{k+1}.
    Measured { difference: f64, bound: f64, within: bool },
}

/// True when {x} avoids the wrap zone of scale k: the top interval of
/// length 1/q_{k+1} for even k, the bottom one for odd k. On admissible
/// phases the rotation by q_k alpha moves the phase by less than
/// 1/q_{k+1} without wrapping.
pub fn indifference_admissible(x: f64, k: usize, cf: &ContinuedFraction) -> bool {
    let margin = 1.0 / cf.q_at(k + 1) as f64;
    let u = x.rem_euclid(1.0);
    if k % 2 == 0 {
        u <= 1.0 - margin
    } else {
        u >= margin
    }
}

pub fn indifference_check(x: f64, k: usize, cf: &ContinuedFraction) -> Result<IndifferenceOutcome> {
    if k + 1 > cf.depth() {
        return Err(Error::invalid(format!(
            "scale k = {k} needs q_{} within depth {}",
            k + 1,
            cf.depth()
        )));
    }
    if !indifference_admissible(x, k, cf) {
        return Ok(IndifferenceOutcome::Skipped);
    }
    let u = x.rem_euclid(1.0);
    let shifted = dd::frac_shifted(u, cf.alpha_dd(), cf.q_i64(k));
    let difference = (shifted - u).abs();
    let bound = 1.0 / cf.q_at(k + 1) as f64;
    Ok(IndifferenceOutcome::Measured { difference, bound, within: difference <= bound + 1e-13 })
}
