//! Transfer-matrix cocycle and determinant recursions in scaled
//! floating point.
//!
//! Products of one-step transfer matrices grow like e^(gamma n) and
//! overflow f64 near n = 350 at typical couplings, so matrices and
//! determinant minors carry an explicit base-2 exponent next to a
//! normalized mantissa. All rescalings are exact powers of two: they
//! commute with every floating-point operation and cost no accuracy.

use crate::error::{Error, Result};
use crate::numerics;
use crate::potential::OperatorSpec;
use crate::dd;
use rayon::prelude::*;
use std::f64::consts::LN_2;
use std::fmt;

/// Splits x = m * 2^e with |m| in [0.5, 1), or (0, 0) for zero.
fn frexp(x: f64) -> (f64, i64) {
    if x == 0.0 {
        return (0.0, 0);
    }
    debug_assert!(x.is_finite(), "scaled arithmetic requires finite inputs");
    let bits = x.to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    if exp_field == 0 {
        // Subnormal: renormalize through a scale-up.
        let (m, e) = frexp(x * 2f64.powi(54));
        return (m, e - 54);
    }
    let e = exp_field - 1022;
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
    (m, e)
}

/// Exact multiplication by 2^e (saturates to 0 / infinity far out of
/// range, which callers only reach through `value`).
fn ldexp(m: f64, e: i64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    if e > 1090 {
        return f64::INFINITY.copysign(m);
    }
    if e < -1140 {
        return 0.0f64.copysign(m);
    }
    // Split the shift so each factor stays a normal power of two.
    let half = (e / 2) as i32;
    m * 2f64.powi(half) * 2f64.powi((e - half as i64) as i32)
}

/// Number m * 2^exp2 with |m| in [0.5, 1) (or m = 0).
#[derive(Clone, Copy, Debug)]
pub struct ScaledValue {
    m: f64,
    exp2: i64,
}

/// Exponent gap beyond which the smaller addend cannot affect the sum.
const DROP_GAP: i64 = 1060;

impl ScaledValue {
    pub fn zero() -> Self {
        ScaledValue { m: 0.0, exp2: 0 }
    }

    pub fn one() -> Self {
        ScaledValue { m: 0.5, exp2: 1 }
    }

    pub fn from_f64(x: f64) -> Self {
        let (m, exp2) = frexp(x);
        ScaledValue { m, exp2 }
    }

    /// The value m * 2^exp2 for an unnormalized mantissa.
    pub fn from_parts(m: f64, exp2: i64) -> Self {
        let (mm, me) = frexp(m);
        if mm == 0.0 {
            return ScaledValue::zero();
        }
        ScaledValue { m: mm, exp2: me + exp2 }
    }

    pub fn is_zero(&self) -> bool {
        self.m == 0.0
    }

    pub fn sign(&self) -> f64 {
        if self.m == 0.0 {
            0.0
        } else {
            self.m.signum()
        }
    }

    /// Nearest f64, saturating to 0 or +-infinity out of range.
    pub fn value(&self) -> f64 {
        ldexp(self.m, self.exp2)
    }

    /// Natural log of the absolute value (NEG_INFINITY for zero).
    pub fn ln_abs(&self) -> f64 {
        if self.m == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.m.abs().ln() + self.exp2 as f64 * LN_2
        }
    }

    pub fn neg(self) -> Self {
        ScaledValue { m: -self.m, exp2: self.exp2 }
    }

    pub fn mul_f64(self, x: f64) -> Self {
        let (mx, ex) = frexp(x);
        let (m, e) = frexp(self.m * mx);
        if m == 0.0 {
            return ScaledValue::zero();
        }
        ScaledValue { m, exp2: self.exp2 + ex + e }
    }

    pub fn mul(self, other: ScaledValue) -> Self {
        let (m, e) = frexp(self.m * other.m);
        if m == 0.0 {
            return ScaledValue::zero();
        }
        ScaledValue { m, exp2: self.exp2 + other.exp2 + e }
    }

    pub fn div(self, other: ScaledValue) -> Self {
        assert!(!other.is_zero(), "division of scaled values by zero");
        let (m, e) = frexp(self.m / other.m);
        if m == 0.0 {
            return ScaledValue::zero();
        }
        ScaledValue { m, exp2: self.exp2 - other.exp2 + e }
    }

    pub fn add(self, other: ScaledValue) -> Self {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.exp2 >= other.exp2 { (self, other) } else { (other, self) };
        let gap = big.exp2 - small.exp2;
        if gap > DROP_GAP {
            return big;
        }
        // 2^-gap is exact and the scaled mantissa stays representable, so
        // the only rounding is in the final sum.
        let s = big.m + ldexp(small.m, -gap);
        let (m, e) = frexp(s);
        if m == 0.0 {
            return ScaledValue::zero();
        }
        ScaledValue { m, exp2: big.exp2 + e }
    }

    pub fn sub(self, other: ScaledValue) -> Self {
        self.add(other.neg())
    }
}

impl fmt::Display for ScaledValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} * 2^{}", self.m, self.exp2)
    }
}

/// 2x2 matrix with a shared base-2 exponent; the largest entry mantissa
/// sits in [0.5, 1).
#[derive(Clone, Copy, Debug)]
pub struct ScaledMatrix {
    pub m: [[f64; 2]; 2],
    pub exp2: i64,
}

impl ScaledMatrix {
    pub fn identity() -> Self {
        ScaledMatrix { m: [[0.5, 0.0], [0.0, 0.5]], exp2: 1 }
    }

    /// One-step transfer matrix [[t, -1], [1, 0]] for t = E - lambda v.
    pub fn one_step(t: f64) -> Self {
        Self::renormalized([[t, -1.0], [1.0, 0.0]], 0)
    }

    fn renormalized(m: [[f64; 2]; 2], exp2: i64) -> Self {
        let mut max = 0.0f64;
        for row in &m {
            for &x in row {
                max = max.max(x.abs());
            }
        }
        if max == 0.0 {
            return ScaledMatrix { m: [[0.0; 2]; 2], exp2: 0 };
        }
        let (_, k) = frexp(max);
        let scale = ldexp(1.0, -k);
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = m[i][j] * scale;
            }
        }
        ScaledMatrix { m: out, exp2: exp2 + k }
    }

    /// self * rhs.
    pub fn mul(&self, rhs: &ScaledMatrix) -> Self {
        let a = &self.m;
        let b = &rhs.m;
        let prod = [
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ];
        Self::renormalized(prod, self.exp2 + rhs.exp2)
    }

    pub fn entry(&self, i: usize, j: usize) -> ScaledValue {
        let (m, e) = frexp(self.m[i][j]);
        if m == 0.0 {
            return ScaledValue::zero();
        }
        ScaledValue { m, exp2: self.exp2 + e }
    }

    /// det = (ad - bc) * 2^(2 exp2).
    pub fn det(&self) -> ScaledValue {
        let d = self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0];
        let (m, e) = frexp(d);
        if m == 0.0 {
            return ScaledValue::zero();
        }
        ScaledValue { m, exp2: 2 * self.exp2 + e }
    }

    /// Natural log of the spectral norm (largest singular value).
    pub fn ln_norm(&self) -> f64 {
        let a = &self.m;
        let t = a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let disc = (t * t - 4.0 * det * det).max(0.0);
        let s1sq = 0.5 * (t + disc.sqrt());
        0.5 * s1sq.ln() + self.exp2 as f64 * LN_2
    }

    /// Entries as plain f64 (saturating); only sensible while the scale
    /// is moderate.
    pub fn to_f64(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = ldexp(self.m[i][j], self.exp2);
            }
        }
        out
    }
}

/// Characteristic minors P_0 = 1, P_1, ..., P_n of the Dirichlet
/// restriction with the given diagonal, at energy e:
/// P_k = (diag[k-1] - e) P_{k-1} - P_{k-2}, so P_k = det(H_k - e).
pub fn det_sequence(diag: &[f64], e: f64) -> Vec<ScaledValue> {
    let mut out = Vec::with_capacity(diag.len() + 1);
    let mut prev2 = ScaledValue::zero(); // P_{-1}
    let mut prev = ScaledValue::one(); // P_0
    out.push(prev);
    for &d in diag {
        let next = prev.mul_f64(d - e).sub(prev2);
        out.push(next);
        prev2 = prev;
        prev = next;
    }
    out
}

/// n-step transfer matrix over the diagonal: the product
/// A(t_{n-1}) ... A(t_0) with A(t) = [[t, -1], [1, 0]], t_j = e - diag[j].
pub fn transfer_matrix(diag: &[f64], e: f64) -> ScaledMatrix {
    let mut m = ScaledMatrix::identity();
    for &d in diag {
        m = ScaledMatrix::one_step(e - d).mul(&m);
    }
    m
}

/// All prefixes M_0 = I, M_1, ..., M_n of the transfer product.
pub fn transfer_prefixes(diag: &[f64], e: f64) -> Vec<ScaledMatrix> {
    let mut out = Vec::with_capacity(diag.len() + 1);
    let mut m = ScaledMatrix::identity();
    out.push(m);
    for &d in diag {
        m = ScaledMatrix::one_step(e - d).mul(&m);
        out.push(m);
    }
    out
}

/// Verifies det M_n = 1 by windowed telescoping.
///
/// The determinant of the stored n-step product cannot be tested directly:
/// its entries carry relative errors of order n * eps * e^(2 gamma n)
/// against a target of size 1, which is hopeless once gamma n is large.
/// Each one-step factor has determinant exactly 1, so instead the product
/// is cut into short windows that are restarted whenever their scale
/// passes 2^10; each window determinant is computable in plain f64 to
/// ~1e-13, and the telescoped sum of log-determinants equals
/// ln det M_n. Returns that absolute telescoped defect.
pub fn unimodularity_defect(diag: &[f64], e: f64) -> f64 {
    let mut w = [[1.0f64, 0.0], [0.0, 1.0]];
    let mut ln_det_total = 0.0;
    let flush = |w: &mut [[f64; 2]; 2]| {
        let d = w[0][0] * w[1][1] - w[0][1] * w[1][0];
        let ln = d.abs().ln();
        *w = [[1.0, 0.0], [0.0, 1.0]];
        ln
    };
    for &dk in diag {
        let t = e - dk;
        let next = [[t * w[0][0] - w[1][0], t * w[0][1] - w[1][1]], [w[0][0], w[0][1]]];
        w = next;
        let max = w.iter().flatten().fold(0.0f64, |acc, &x| acc.max(x.abs()));
        if max > 1024.0 {
            ln_det_total += flush(&mut w);
        }
    }
    ln_det_total += flush(&mut w);
    ln_det_total.abs()
}

/// Determinant of the periodic restriction, det(H~_n - e), together with
/// the log-scale cancellation in the final combination (large values mean
/// the three terms nearly cancelled and the result lost digits).
#[derive(Clone, Copy, Debug)]
pub struct PeriodicDet {
    pub value: ScaledValue,
    pub cancellation: f64,
}

pub fn periodic_det(diag: &[f64], e: f64) -> PeriodicDet {
    let n = diag.len();
    // det(H~_n - e) = P_n - P_{n-2}^(shifted by one site) - 2 (-1)^n,
    // where the shifted minor runs over sites 1..n-2. Degenerate sizes
    // fall out of the same formula with empty/absent minors.
    let p_full = det_sequence(diag, e);
    let p_n = p_full[n];
    let p_shift = if n >= 2 {
        det_sequence(&diag[1..n - 1], e)[n - 2]
    } else {
        ScaledValue::zero() // P_{-1}
    };
    let two = ScaledValue::from_f64(if n % 2 == 0 { 2.0 } else { -2.0 });
    let value = p_n.sub(p_shift).sub(two);
    let max_ln = p_n.ln_abs().max(p_shift.ln_abs()).max(two.ln_abs());
    let cancellation = if value.is_zero() { f64::INFINITY } else { (max_ln - value.ln_abs()).max(0.0) };
    PeriodicDet { value, cancellation }
}

/// Upper bound on every finite-volume growth rate: each one-step matrix
/// has Frobenius norm at most sqrt((|e| + lambda)^2 + 2).
pub fn step_norm_bound(lambda: f64, e: f64) -> f64 {
    0.5 * ((e.abs() + lambda).powi(2) + 2.0).ln()
}

/// How window phases are chosen for finite-volume Lyapunov averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// Consecutive length-n windows of the single orbit starting at the
    /// spec's phase.
    Birkhoff { windows: usize },
    /// Independent phases (i + 1/2) / points on a uniform grid.
    Grid { points: usize },
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampling::Birkhoff { .. } => write!(f, "birkhoff"),
            Sampling::Grid { .. } => write!(f, "grid"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LyapunovEstimate {
    pub gamma: f64,
    pub stderr: f64,
    pub n: usize,
    pub windows: usize,
}

/// Finite-volume Lyapunov exponent gamma_n(e): the average of
/// ln ||M_n|| / n over window phases.
pub fn lyapunov_finite(spec: &OperatorSpec, e: f64, n: usize, sampling: Sampling) -> Result<LyapunovEstimate> {
    if n == 0 {
        return Err(Error::invalid("window length must be positive"));
    }
    let phases: Vec<f64> = match sampling {
        Sampling::Birkhoff { windows } => {
            if windows == 0 {
                return Err(Error::invalid("need at least one window"));
            }
            if (windows as u128) * (n as u128) > 1 << 50 {
                return Err(Error::Capacity("orbit length exceeds exact phase indexing range".into()));
            }
            (0..windows).map(|w| dd::frac_shifted(spec.x, spec.cf.alpha_dd(), (w * n) as i64)).collect()
        }
        Sampling::Grid { points } => {
            if points == 0 {
                return Err(Error::invalid("need at least one grid point"));
            }
            (0..points).map(|i| (i as f64 + 0.5) / points as f64).collect()
        }
    };
    let values: Vec<f64> = phases
        .par_iter()
        .map(|&x| {
            let diag = spec.with_phase(x).sample_orbit(n, false);
            transfer_matrix(&diag, e).ln_norm() / n as f64
        })
        .collect();
    let gamma = numerics::mean(&values);
    let stderr = numerics::stderr_of_mean(&values);
    Ok(LyapunovEstimate { gamma, stderr, n, windows: values.len() })
}

/// Log-magnitude growth rate of the Dirichlet determinant,
/// ln |det(H_n - e)| / n. Errors out when e is an eigenvalue of the
/// window to working precision.
pub fn thouless_exponent(diag: &[f64], e: f64) -> Result<f64> {
    let n = diag.len();
    let p = det_sequence(diag, e);
    let ln = p[n].ln_abs();
    if !ln.is_finite() {
        return Err(Error::NearEigenvalue { distance: 0.0 });
    }
    Ok(ln / n as f64)
}

/// Phase-averaged Thouless exponent over a uniform grid (offset half a
/// step, so eigenvalue hits are measure-zero accidents).
pub fn thouless_averaged(spec: &OperatorSpec, e: f64, n: usize, points: usize) -> Result<f64> {
    if n == 0 || points == 0 {
        return Err(Error::invalid("window length and grid size must be positive"));
    }
    let values: Vec<f64> = (0..points)
        .into_par_iter()
        .map(|i| {
            let x = (i as f64 + 0.5) / points as f64;
            let diag = spec.with_phase(x).sample_orbit(n, false);
            thouless_exponent(&diag, e)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(numerics::mean(&values))
}

/// True when the phases {x} and {x + alpha} both stay at least `margin`
/// away from every sampling discontinuity (the wrap point and any
/// piecewise-linear vertex).
pub fn phase_clear_of_breakpoints(spec: &OperatorSpec, x: f64, margin: f64) -> bool {
    let mut breaks = vec![0.0];
    breaks.extend(spec.potential.vertices());
    for y in [x.rem_euclid(1.0), dd::frac_shifted(x, spec.cf.alpha_dd(), 1)] {
        for &b in &breaks {
            let d = (y - b).abs();
            if d.min(1.0 - d) < margin {
                return false;
            }
        }
    }
    true
}

/// Phase-derivative pairing of the two-step cocycle: the quadratic form
///   lambda v'(x) u_1^2 + lambda v'(x + alpha) ((lambda v(x) - e) u_1 + u_2)^2,
/// which is the phase-derivative of the rotation pairing
/// <J M_2(x) u, M_2(y) u> at y = x. Positivity for every u is what makes
/// spectral data strictly monotone in the phase.
pub fn monotonicity_form(spec: &OperatorSpec, e: f64, x: f64, u: [f64; 2]) -> f64 {
    let x0 = x.rem_euclid(1.0);
    let x1 = dd::frac_shifted(x, spec.cf.alpha_dd(), 1);
    let vp0 = spec.potential.slope_at(x0);
    let vp1 = spec.potential.slope_at(x1);
    let v0 = spec.potential.eval_unit(x0);
    let w1 = (spec.lambda * v0 - e) * u[0] + u[1];
    spec.lambda * vp0 * u[0] * u[0] + spec.lambda * vp1 * w1 * w1
}

/// Central-difference version of `monotonicity_form` through the pairing
/// phi(h) = <J M_2(x) u, M_2(x + h) u>. Callers must keep the stencil
/// clear of breakpoints (see `phase_clear_of_breakpoints`).
pub fn monotonicity_form_fd(spec: &OperatorSpec, e: f64, x: f64, u: [f64; 2], h: f64) -> f64 {
    let two_step = |y: f64| -> [[f64; 2]; 2] {
        let y0 = y.rem_euclid(1.0);
        let y1 = dd::frac_shifted(y, spec.cf.alpha_dd(), 1);
        let t0 = e - spec.lambda * spec.potential.eval_unit(y0);
        let t1 = e - spec.lambda * spec.potential.eval_unit(y1);
        // A(t1) * A(t0)
        [[t1 * t0 - 1.0, -t1], [t0, -1.0]]
    };
    let apply = |m: &[[f64; 2]; 2], v: [f64; 2]| [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
    let a = apply(&two_step(x), u);
    let pairing = |y: f64| {
        let b = apply(&two_step(y), u);
        // <J a, b> with J = [[0, -1], [1, 0]] acting as J z = (-z_2, z_1).
        -a[1] * b[0] + a[0] * b[1]
    };
    (pairing(x + h) - pairing(x - h)) / (2.0 * h)
}
