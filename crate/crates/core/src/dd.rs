//! Double-double arithmetic for phase computations on the circle.
//!
//! Orbit phases `{x + m alpha}` enter every operator assembly, and torus
//! norms of convergent denominators have to be resolved to relative
//! accuracy around 1e-10 even when the norm itself is of order 1e-7. Plain
//! f64 evaluation of `{m alpha}` loses exactly the digits we need once `m`
//! grows past a few thousand, so frequencies are carried as unevaluated
//! sums `hi + lo` of two doubles (roughly 107 significant bits) and the
//! reductions mod 1 are done on exact error-free transformations.

/// A real number represented as the unevaluated sum `hi + lo` with
/// `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Golden rotation number (sqrt(5) - 1) / 2, correctly rounded to
/// double-double.
pub const GOLDEN: Dd = Dd {
    hi: f64::from_bits(0x3fe3c6ef372fe950),   //  0x1.3c6ef372fe950p-1
    lo: f64::from_bits(0xbc8f506319fcfd19),   // -0x1.f506319fcfd19p-55
};

/// Silver rotation number sqrt(2) - 1, correctly rounded to double-double.
pub const SILVER: Dd = Dd {
    hi: f64::from_bits(0x3fda827999fcef32),   //  0x1.a827999fcef32p-2
    lo: f64::from_bits(0x3c708b2fb1366ea9),   //  0x1.08b2fb1366ea9p-56
};

/// Error-free sum: returns `(s, e)` with `s = fl(a + b)` and `a + b = s + e`
/// exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free product via fused multiply-add: `a * b = p + e` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = f64::mul_add(a, b, -p);
    (p, e)
}

impl Dd {
    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Quotient of two exactly representable integers (|p|, |q| < 2^53),
    /// accurate to double-double precision.
    pub fn from_ratio(p: i128, q: i128) -> Self {
        debug_assert!(p.unsigned_abs() < (1u128 << 53) && q.unsigned_abs() < (1u128 << 53));
        let pf = p as f64;
        let qf = q as f64;
        let hi = pf / qf;
        // Remainder pf - hi * qf is exact under fma, so one more division
        // recovers the next 53 bits of the quotient.
        let r = f64::mul_add(-hi, qf, pf);
        let lo = r / qf;
        Dd { hi, lo }
    }

    /// Rounds to the nearest f64.
    pub fn value(self) -> f64 {
        self.hi + self.lo
    }

    pub fn neg(self) -> Self {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn add(self, other: Dd) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let lo = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, lo);
        Dd { hi, lo }
    }

    pub fn add_f64(self, x: f64) -> Self {
        self.add(Dd::from_f64(x))
    }

    pub fn sub(self, other: Dd) -> Self {
        self.add(other.neg())
    }

    /// Product with an integer of magnitude at most 2^52 (exact split of
    /// `n * hi` via fma keeps the full error term).
    pub fn mul_int(self, n: i64) -> Self {
        debug_assert!(n.unsigned_abs() <= 1 << 52);
        let nf = n as f64;
        let (p, e) = two_prod(nf, self.hi);
        let lo = f64::mul_add(nf, self.lo, e);
        let (hi, lo) = two_sum(p, lo);
        Dd { hi, lo }
    }

    /// Full double-double product.
    pub fn mul(self, other: Dd) -> Self {
        let (p, e) = two_prod(self.hi, other.hi);
        let cross = f64::mul_add(self.hi, other.lo, self.lo * other.hi);
        let (hi, lo) = two_sum(p, e + cross);
        Dd { hi, lo }
    }

    /// Reduces mod 1. The subtraction `hi - floor(hi)` is exact for every
    /// f64, so only the recombination with `lo` rounds. The result
    /// represents a value in [0, 1); at the wrap point the `hi` word may
    /// round to exactly 1.0 with a compensating negative `lo`.
    pub fn fract(self) -> Self {
        let f = self.hi - self.hi.floor();
        // |self.lo| stays well below 1 for every construction in this
        // module, so a single integer fold suffices.
        let (s, e) = two_sum(f, self.lo);
        let (s, e) = if s >= 1.0 {
            let (s2, e2) = two_sum(s, -1.0);
            (s2, e + e2)
        } else if s < 0.0 {
            let (s2, e2) = two_sum(s, 1.0);
            (s2, e + e2)
        } else {
            (s, e)
        };
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }
}

/// `{n * alpha}` in [0, 1) as an f64, accurate to a few units in 2^-60 for
/// |n| up to 2^40.
pub fn frac_mult(alpha: Dd, n: i64) -> f64 {
    alpha.mul_int(n).fract().value().rem_euclid(1.0)
}

/// `{x + n * alpha}` in [0, 1).
pub fn frac_shifted(x: f64, alpha: Dd, n: i64) -> f64 {
    alpha.mul_int(n).add_f64(x).fract().value().rem_euclid(1.0)
}

/// Torus norm `|| t || = min({t}, 1 - {t})` of `n * alpha`, i.e. the
/// distance from `n * alpha` to the nearest integer.
pub fn torus_norm_mult(alpha: Dd, n: i64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let f = alpha.mul_int(n).fract();
    // f represents a value in [0, 1]; measuring the distance to the
    // rounded endpoint in dd keeps full accuracy on both ends of the
    // interval, where the norm can be many orders below 1.
    let nearest = f.value().round();
    f.add_f64(-nearest).value().abs()
}
