//! Monotone sampling functions on the circle and the operator parameter
//! bundle.
//!
//! A potential here is a function v on [0, 1) that increases strictly from
//! v(0) = 0 to a left limit of 1 at the wrap point, with two-sided slope
//! bounds 0 < gamma_minus <= (v(y) - v(x))/(x - y) <= gamma_plus. The jump
//! at the wrap point is what produces eigenvalue repulsion downstream, and
//! the slope bounds enter every quantitative estimate, so both are part of
//! the type, not just of the documentation.

use crate::arithmetic::ContinuedFraction;
use crate::dd::{self, Dd};
use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// Snap width for phases that land on a sampling discontinuity. A phase
/// within this distance of the wrap point is treated as sitting exactly on
/// the breakpoint it targets.
pub const PHASE_SNAP: f64 = 1e-13;

/// Strictly increasing sampling function on the circle.
#[derive(Clone, Debug, PartialEq)]
pub enum MonotonePotential {
    /// v(x) = {x}: slope exactly 1 on both sides.
    Sawtooth,
    /// v(x) = (1 - c) x + c x^2 on [0, 1): slopes 1 - c and 1 + c.
    Blend { c: f64 },
    /// Piecewise linear through (0, 0), ..., (1, 1) with strictly
    /// increasing knots and values.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl MonotonePotential {
    pub fn sawtooth() -> Self {
        MonotonePotential::Sawtooth
    }

    pub fn blend(c: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&c) {
            return Err(Error::invalid(format!(
                "blend parameter must lie in [0, 1) to keep the lower slope positive, got {c}"
            )));
        }
        Ok(MonotonePotential::Blend { c })
    }

    /// Knots must start at (0, 0), end at (1, 1), and increase strictly in
    /// both coordinates. The final knot is the left limit at the wrap
    /// point, not a sampled value.
    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::invalid("piecewise potential needs at least two knots"));
        }
        let first = knots[0];
        let last = *knots.last().expect("nonempty");
        if first != (0.0, 0.0) || last != (1.0, 1.0) {
            return Err(Error::invalid(format!(
                "knots must run from (0, 0) to (1, 1), got {first:?} .. {last:?}"
            )));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 + 1e-9 || w[1].1 <= w[0].1 {
                return Err(Error::invalid(format!(
                    "knots must increase strictly in both coordinates: {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(MonotonePotential::PiecewiseLinear { knots })
    }

    /// Value at the fractional part of x.
    pub fn eval(&self, x: f64) -> f64 {
        let u = x.rem_euclid(1.0);
        self.eval_unit(u)
    }

    /// Value at u assumed to lie in [0, 1).
    pub fn eval_unit(&self, u: f64) -> f64 {
        match self {
            MonotonePotential::Sawtooth => u,
            MonotonePotential::Blend { c } => (1.0 - c) * u + c * u * u,
            MonotonePotential::PiecewiseLinear { knots } => {
                let i = match knots.binary_search_by(|k| {
                    k.0.partial_cmp(&u).expect("finite knots")
                }) {
                    // u < 1 always, so an exact hit is an interior knot.
                    Ok(i) => return knots[i].1,
                    Err(i) => i,
                };
                // u lies strictly between knots[i-1] and knots[i].
                let (x0, y0) = knots[i - 1];
                let (x1, y1) = knots[i];
                y0 + (u - x0) * (y1 - y0) / (x1 - x0)
            }
        }
    }

    /// Left limit of the periodic extension at the fractional part of x;
    /// differs from eval only on the breakpoint itself, where it returns
    /// the supremum 1 instead of v(0) = 0.
    pub fn eval_left_limit(&self, x: f64) -> f64 {
        let u = x.rem_euclid(1.0);
        if u == 0.0 {
            1.0
        } else {
            self.eval_unit(u)
        }
    }

    /// Derivative at interior points; breakpoints of the derivative are
    /// excluded by callers via `vertices`.
    pub fn slope_at(&self, x: f64) -> f64 {
        let u = x.rem_euclid(1.0);
        match self {
            MonotonePotential::Sawtooth => 1.0,
            MonotonePotential::Blend { c } => (1.0 - c) + 2.0 * c * u,
            MonotonePotential::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|k| k.0 <= u).max(1).min(knots.len() - 1);
                let (x0, y0) = knots[i - 1];
                let (x1, y1) = knots[i];
                (y1 - y0) / (x1 - x0)
            }
        }
    }

    /// Two-sided slope bounds (gamma_minus, gamma_plus).
    pub fn slope_bounds(&self) -> (f64, f64) {
        match self {
            MonotonePotential::Sawtooth => (1.0, 1.0),
            MonotonePotential::Blend { c } => (1.0 - c, 1.0 + c),
            MonotonePotential::PiecewiseLinear { knots } => {
                let mut lo = f64::INFINITY;
                let mut hi = 0.0f64;
                for w in knots.windows(2) {
                    let s = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
                (lo, hi)
            }
        }
    }

    /// Interior points where the derivative jumps (none for sawtooth and
    /// blend). The wrap point 0 is always a breakpoint of v itself and is
    /// not listed here.
    pub fn vertices(&self) -> Vec<f64> {
        match self {
            MonotonePotential::PiecewiseLinear { knots } => {
                knots[1..knots.len() - 1].iter().map(|k| k.0).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Spot-checks the declared slope bounds on a grid of secant pairs.
    /// Returns the observed (min, max) secant slopes.
    pub fn validate_lipschitz(&self, grid: usize) -> Result<(f64, f64)> {
        if grid < 8 {
            return Err(Error::invalid("need at least 8 grid points"));
        }
        let (lo_decl, hi_decl) = self.slope_bounds();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        let h = 1.0 / grid as f64;
        for i in 0..grid {
            let x = i as f64 * h + 0.5 * h;
            for step in 1..=10usize {
                let y = x + step as f64 * h * 0.099;
                if y >= 1.0 {
                    break;
                }
                let s = (self.eval_unit(y) - self.eval_unit(x)) / (y - x);
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        if lo < lo_decl - 1e-9 || hi > hi_decl + 1e-9 {
            return Err(Error::validation(format!(
                "observed secant slopes [{lo}, {hi}] escape declared bounds [{lo_decl}, {hi_decl}]"
            )));
        }
        Ok((lo, hi))
    }
}

impl fmt::Display for MonotonePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonotonePotential::Sawtooth => write!(f, "sawtooth"),
            MonotonePotential::Blend { c } => write!(f, "blend:{c}"),
            MonotonePotential::PiecewiseLinear { knots } => {
                let items: Vec<String> =
                    knots.iter().map(|(x, y)| format!("({x},{y})")).collect();
                write!(f, "pwl:[{}]", items.join(","))
            }
        }
    }
}

impl FromStr for MonotonePotential {
    type Err = Error;

    /// Accepts `sawtooth`, `blend:<c>`, `pwl:[(x0,y0),(x1,y1),...]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "sawtooth" {
            return Ok(MonotonePotential::Sawtooth);
        }
        if let Some(body) = s.strip_prefix("blend:") {
            let c: f64 = body
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad blend parameter `{body}`")))?;
            return MonotonePotential::blend(c);
        }
        if let Some(body) = s.strip_prefix("pwl:") {
            let inner = body
                .trim()
                .strip_prefix('[')
                .and_then(|b| b.strip_suffix(']'))
                .ok_or_else(|| Error::invalid(format!("pwl potential must look like pwl:[(0,0),(1,1)], got `{s}`")))?;
            let mut knots = Vec::new();
            for pair in inner.split("),") {
                let pair = pair.trim().trim_start_matches('(').trim_end_matches(')');
                if pair.is_empty() {
                    continue;
                }
                let mut xy = pair.split(',');
                let x: f64 = xy
                    .next()
                    .and_then(|t| t.trim().parse().ok())
                    .ok_or_else(|| Error::invalid(format!("bad knot `{pair}`")))?;
                let y: f64 = xy
                    .next()
                    .and_then(|t| t.trim().parse().ok())
                    .ok_or_else(|| Error::invalid(format!("bad knot `{pair}`")))?;
                if xy.next().is_some() {
                    return Err(Error::invalid(format!("knot `{pair}` has more than two coordinates")));
                }
                knots.push((x, y));
            }
            return MonotonePotential::piecewise_linear(knots);
        }
        Err(Error::invalid(format!(
            "unknown potential `{s}` (expected sawtooth, blend:<c>, or pwl:[..])"
        )))
    }
}

/// Everything that determines the operator: frequency (with its expansion),
/// coupling, sampling function, and base phase.
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    pub cf: ContinuedFraction,
    pub lambda: f64,
    pub potential: MonotonePotential,
    pub x: f64,
}

impl OperatorSpec {
    pub fn new(cf: ContinuedFraction, lambda: f64, potential: MonotonePotential, x: f64) -> Result<Self> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::invalid(format!("coupling must be positive and finite, got {lambda}")));
        }
        if !x.is_finite() {
            return Err(Error::invalid("phase must be finite"));
        }
        Ok(OperatorSpec { cf, lambda, potential, x: x.rem_euclid(1.0) })
    }

    pub fn alpha_dd(&self) -> Dd {
        self.cf.alpha_dd()
    }

    /// Phase {x + m alpha} at lattice site m, in double-double.
    pub fn phase_at(&self, m: i64) -> f64 {
        dd::frac_shifted(self.x, self.cf.alpha_dd(), m)
    }

    /// Potential term lambda v({x + m alpha}) with the breakpoint snap:
    /// a phase within `PHASE_SNAP` of the wrap point (on either side) is
    /// treated as sitting exactly on the breakpoint and resolved by the
    /// right-limit convention to v(0) = 0.
    pub fn site_value(&self, m: i64) -> f64 {
        let u = self.phase_at(m);
        if u < PHASE_SNAP || u > 1.0 - PHASE_SNAP {
            0.0
        } else {
            self.lambda * self.potential.eval_unit(u)
        }
    }

    /// Same with the left-limit convention: a snapped site takes the
    /// supremum lambda instead of 0. Away from the snap zone the two
    /// conventions agree.
    pub fn site_value_left_limit(&self, m: i64) -> f64 {
        let u = self.phase_at(m);
        if u < PHASE_SNAP || u > 1.0 - PHASE_SNAP {
            self.lambda
        } else {
            self.lambda * self.potential.eval_unit(u)
        }
    }

    /// Diagonal lambda v({x + m alpha}) for m = 0..n-1 under the chosen
    /// breakpoint convention (which only matters on snapped sites).
    pub fn sample_orbit(&self, n: usize, left_limit: bool) -> Vec<f64> {
        (0..n as i64)
            .map(|m| {
                if left_limit {
                    self.site_value_left_limit(m)
                } else {
                    self.site_value(m)
                }
            })
            .collect()
    }

    /// The spec with the phase replaced (reduced mod 1).
    pub fn with_phase(&self, x: f64) -> Self {
        OperatorSpec { cf: self.cf.clone(), lambda: self.lambda, potential: self.potential.clone(), x: x.rem_euclid(1.0) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::ContinuedFraction;

    #[test]
    fn sawtooth_is_identity_on_unit_interval() {
        let v = MonotonePotential::sawtooth();
        assert_eq!(v.eval(0.25), 0.25);
        assert_eq!(v.eval(1.25), 0.25, "periodic extension");
        assert_eq!(v.eval(-0.25), 0.75, "negative arguments wrap");
        assert_eq!(v.eval(0.0), 0.0);
        assert_eq!(v.eval_left_limit(0.0), 1.0, "left limit at the wrap point is the supremum");
        assert_eq!(v.slope_bounds(), (1.0, 1.0));
    }

    #[test]
    fn blend_endpoints_and_slopes() {
        let v = MonotonePotential::blend(0.5).expect("valid blend");
        assert_eq!(v.eval(0.0), 0.0);
        let near_one = v.eval(1.0 - 1e-12);
        assert!((near_one - 1.0).abs() < 1e-11, "left limit 1 at wrap, got {near_one}");
        assert_eq!(v.slope_bounds(), (0.5, 1.5));
        assert!((v.eval(0.5) - 0.375).abs() < 1e-15, "0.5*0.5 + 0.5*0.25 = 0.375");
        assert!((v.slope_at(0.5) - 1.0).abs() < 1e-15, "slope at midpoint is 1");
        assert!(MonotonePotential::blend(1.0).is_err(), "c = 1 kills the lower slope bound");
        assert!(MonotonePotential::blend(-0.1).is_err());
    }

    #[test]
    fn piecewise_linear_interpolates() {
        let v = MonotonePotential::piecewise_linear(vec![(0.0, 0.0), (0.3, 0.5), (1.0, 1.0)])
            .expect("valid pwl");
        assert_eq!(v.eval(0.0), 0.0);
        assert!((v.eval(0.15) - 0.25).abs() < 1e-15);
        assert!((v.eval(0.3) - 0.5).abs() < 1e-15);
        assert!((v.eval(0.65) - 0.75).abs() < 1e-15);
        let (lo, hi) = v.slope_bounds();
        assert!((lo - 5.0 / 7.0).abs() < 1e-12, "shallow segment slope 0.5/0.7");
        assert!((hi - 5.0 / 3.0).abs() < 1e-12, "steep segment slope 0.5/0.3");
        assert_eq!(v.vertices(), vec![0.3], "interior vertex only");
    }

    #[test]
    fn piecewise_linear_rejects_bad_knots() {
        assert!(MonotonePotential::piecewise_linear(vec![(0.0, 0.0)]).is_err());
        assert!(
            MonotonePotential::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.6), (0.5, 0.7), (1.0, 1.0)]).is_err(),
            "repeated x knot"
        );
        assert!(
            MonotonePotential::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.7), (0.8, 0.6), (1.0, 1.0)]).is_err(),
            "decreasing value"
        );
        assert!(
            MonotonePotential::piecewise_linear(vec![(0.1, 0.0), (1.0, 1.0)]).is_err(),
            "must start at the origin"
        );
    }

    #[test]
    fn lipschitz_spot_check_agrees_with_declared_bounds() {
        for v in [
            MonotonePotential::sawtooth(),
            MonotonePotential::blend(0.5).unwrap(),
            MonotonePotential::piecewise_linear(vec![(0.0, 0.0), (0.3, 0.5), (1.0, 1.0)]).unwrap(),
        ] {
            let (lo, hi) = v.validate_lipschitz(1000).expect("bounds hold");
            let (lo_decl, hi_decl) = v.slope_bounds();
            assert!(lo >= lo_decl - 1e-9 && hi <= hi_decl + 1e-9, "{v}: [{lo}, {hi}] vs [{lo_decl}, {hi_decl}]");
        }
    }

    #[test]
    fn potential_parsing_round_trip() {
        let v: MonotonePotential = "sawtooth".parse().unwrap();
        assert_eq!(v, MonotonePotential::Sawtooth);
        let v: MonotonePotential = "blend:0.5".parse().unwrap();
        assert_eq!(v, MonotonePotential::Blend { c: 0.5 });
        let v: MonotonePotential = "pwl:[(0,0),(0.3,0.5),(1,1)]".parse().unwrap();
        assert_eq!(
            v,
            MonotonePotential::PiecewiseLinear { knots: vec![(0.0, 0.0), (0.3, 0.5), (1.0, 1.0)] }
        );
        assert!("blend:1.5".parse::<MonotonePotential>().is_err());
        assert!("pwl:[(0,0)]".parse::<MonotonePotential>().is_err());
        assert!("square".parse::<MonotonePotential>().is_err());
    }

    #[test]
    fn orbit_sampling_with_snap() {
        let cf = ContinuedFraction::golden(12).unwrap();
        let spec = OperatorSpec::new(cf, 2.0, MonotonePotential::sawtooth(), 0.0).unwrap();
        let diag = spec.sample_orbit(5, false);
        assert_eq!(diag[0], 0.0, "phase 0 snaps to the right limit");
        assert!((diag[1] - 2.0 * 0.618_033_988_749_894_8).abs() < 1e-14);
        let diag_left = spec.sample_orbit(5, true);
        assert_eq!(diag_left[0], 2.0, "left-limit convention takes the supremum at site 0");
        assert_eq!(diag[1..], diag_left[1..], "only site 0 differs");
    }

    #[test]
    fn snap_zone_resolves_by_convention_on_both_sides() {
        let cf = ContinuedFraction::golden(12).unwrap();
        let spec = OperatorSpec::new(cf, 10.0, MonotonePotential::sawtooth(), 1.0 - 5e-14).unwrap();
        assert_eq!(spec.site_value(0), 0.0, "snapped site takes v(0) under the right-limit convention");
        assert_eq!(spec.site_value_left_limit(0), 10.0, "and lambda under the left-limit convention");
        let spec2 = spec.with_phase(5e-14);
        assert_eq!(spec2.site_value(0), 0.0);
        assert_eq!(spec2.site_value_left_limit(0), 10.0);
        let generic = spec.with_phase(0.25);
        assert_eq!(generic.site_value(0), generic.site_value_left_limit(0), "conventions agree off the breakpoint");
    }

    #[test]
    fn phase_indexing_matches_direct_formula() {
        let cf = ContinuedFraction::silver(10).unwrap();
        let spec = OperatorSpec::new(cf, 1.0, MonotonePotential::sawtooth(), 0.37).unwrap();
        let alpha = spec.cf.alpha();
        for m in [-17i64, -3, 0, 5, 101] {
            let direct = (0.37 + m as f64 * alpha).rem_euclid(1.0);
            let got = spec.phase_at(m);
            assert!(
                (got - direct).abs() < 1e-10,
                "phase at m={m}: {got} vs direct {direct}"
            );
        }
    }
}
