//! Finite restrictions of the discrete Schrodinger operator.
//!
//! The operator acts on the n sites m = 0..n-1 as
//! (H psi)(m) = psi(m+1) + psi(m-1) + lambda v({x + m alpha}) psi(m),
//! with either Dirichlet (missing neighbors dropped) or periodic
//! (neighbors wrap around) boundary conditions. Only the diagonal is
//! stored; the hopping part is implicit and unit.

use crate::error::{Error, Result};
use crate::potential::OperatorSpec;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Periodic,
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet => write!(f, "dirichlet"),
            BoundaryCondition::Periodic => write!(f, "periodic"),
        }
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            "periodic" => Ok(BoundaryCondition::Periodic),
            other => Err(Error::invalid(format!("unknown boundary condition `{other}`"))),
        }
    }
}

/// n-site restriction, stored as its diagonal plus the boundary flavor.
#[derive(Clone, Debug)]
pub struct FiniteRestriction {
    diag: Vec<f64>,
    bc: BoundaryCondition,
}

impl FiniteRestriction {
    /// Builds the restriction to sites 0..n-1 at the spec's phase. The
    /// `left_limit` flag picks the breakpoint convention for sites whose
    /// phase lands on the sampling discontinuity.
    pub fn new(spec: &OperatorSpec, n: usize, bc: BoundaryCondition, left_limit: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("restriction needs at least one site"));
        }
        Ok(FiniteRestriction { diag: spec.sample_orbit(n, left_limit), bc })
    }

    /// Wraps an explicit diagonal (free chains, oracles, tests).
    pub fn from_diag(diag: Vec<f64>, bc: BoundaryCondition) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::invalid("restriction needs at least one site"));
        }
        Ok(FiniteRestriction { diag, bc })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    /// Matrix trace. The one-site periodic chain is special: both wrapped
    /// neighbors of the single site are the site itself, so the 1x1 matrix
    /// is [diag + 2].
    pub fn trace(&self) -> f64 {
        let base: f64 = self.diag.iter().sum();
        match (self.bc, self.n()) {
            (BoundaryCondition::Periodic, 1) => base + 2.0,
            _ => base,
        }
    }

    /// out = H psi.
    pub fn apply(&self, psi: &[f64], out: &mut [f64]) {
        let n = self.n();
        assert_eq!(psi.len(), n, "vector length {} does not match {} sites", psi.len(), n);
        assert_eq!(out.len(), n);
        for m in 0..n {
            let mut acc = self.diag[m] * psi[m];
            if m + 1 < n {
                acc += psi[m + 1];
            } else if self.bc == BoundaryCondition::Periodic {
                acc += psi[0];
            }
            if m > 0 {
                acc += psi[m - 1];
            } else if self.bc == BoundaryCondition::Periodic {
                acc += psi[n - 1];
            }
            out[m] = acc;
        }
    }

    /// ||(H - E) psi|| / ||psi||.
    pub fn residual_norm(&self, e: f64, psi: &[f64]) -> f64 {
        let mut hpsi = vec![0.0; self.n()];
        self.apply(psi, &mut hpsi);
        let mut num = 0.0;
        let mut den = 0.0;
        for m in 0..self.n() {
            let r = hpsi[m] - e * psi[m];
            num += r * r;
            den += psi[m] * psi[m];
        }
        (num / den).sqrt()
    }

    /// Sites where the two restrictions differ by more than `tol`.
    pub fn differing_sites(&self, other: &FiniteRestriction, tol: f64) -> Vec<usize> {
        assert_eq!(self.n(), other.n());
        (0..self.n()).filter(|&m| (self.diag[m] - other.diag[m]).abs() > tol).collect()
    }
}

/// The pair (H at x + 0, H at x - 0): the same window built under the
/// right-limit and left-limit breakpoint conventions. When x is one of the
/// window's breakpoints the difference is rank one, supported on the site
/// whose phase hits the discontinuity, with trace exactly -lambda.
pub fn jump_pair(
    spec: &OperatorSpec,
    n: usize,
    bc: BoundaryCondition,
) -> Result<(FiniteRestriction, FiniteRestriction)> {
    let right = FiniteRestriction::new(spec, n, bc, false)?;
    let left = FiniteRestriction::new(spec, n, bc, true)?;
    Ok((right, left))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{beta_points, ContinuedFraction};
    use crate::potential::MonotonePotential;
    use std::f64::consts::PI;

    fn golden_spec(lambda: f64, x: f64) -> OperatorSpec {
        let cf = ContinuedFraction::golden(16).unwrap();
        OperatorSpec::new(cf, lambda, MonotonePotential::sawtooth(), x).unwrap()
    }

    #[test]
    fn free_chain_eigenvectors_have_small_residual() {
        let n = 50;
        let h = FiniteRestriction::from_diag(vec![0.0; n], BoundaryCondition::Dirichlet).unwrap();
        for j in [1usize, 7, 25, 50] {
            let e = 2.0 * (j as f64 * PI / (n as f64 + 1.0)).cos();
            let psi: Vec<f64> =
                (0..n).map(|m| ((m as f64 + 1.0) * j as f64 * PI / (n as f64 + 1.0)).sin()).collect();
            let r = h.residual_norm(e, &psi);
            assert!(r < 1e-12, "free-chain mode j={j}: residual {r:.3e}");
        }
    }

    #[test]
    fn periodic_free_chain_plane_waves() {
        let n = 64;
        let h = FiniteRestriction::from_diag(vec![0.0; n], BoundaryCondition::Periodic).unwrap();
        for j in [0usize, 1, 13, 32] {
            let e = 2.0 * (2.0 * PI * j as f64 / n as f64).cos();
            let psi: Vec<f64> = (0..n).map(|m| (2.0 * PI * j as f64 * m as f64 / n as f64).cos()).collect();
            let r = h.residual_norm(e, &psi);
            assert!(r < 1e-12, "periodic mode j={j}: residual {r:.3e}");
        }
    }

    #[test]
    fn one_and_two_site_periodic_shapes() {
        let h1 = FiniteRestriction::from_diag(vec![3.0], BoundaryCondition::Periodic).unwrap();
        let mut out = vec![0.0];
        h1.apply(&[1.0], &mut out);
        assert_eq!(out[0], 5.0, "single periodic site sees itself twice: d + 2");
        assert_eq!(h1.trace(), 5.0);

        let h2 = FiniteRestriction::from_diag(vec![1.0, 4.0], BoundaryCondition::Periodic).unwrap();
        let mut out = vec![0.0, 0.0];
        h2.apply(&[1.0, 0.0], &mut out);
        assert_eq!(out, vec![1.0, 2.0], "both wrapped neighbors of site 1 are site 0");
        assert_eq!(h2.trace(), 5.0, "two-site trace is the plain diagonal sum");
    }

    #[test]
    fn diagonal_matches_potential_formula() {
        let spec = golden_spec(2.0, 0.37);
        let h = FiniteRestriction::new(&spec, 40, BoundaryCondition::Dirichlet, false).unwrap();
        let alpha = spec.cf.alpha();
        for m in 0..40 {
            let expect = 2.0 * (0.37 + m as f64 * alpha).rem_euclid(1.0);
            assert!(
                (h.diag()[m] - expect).abs() < 1e-10,
                "site {m}: {} vs {expect}",
                h.diag()[m]
            );
        }
    }

    #[test]
    fn shift_conjugation_moves_the_window() {
        let spec = golden_spec(2.0, 0.37);
        let h = FiniteRestriction::new(&spec, 30, BoundaryCondition::Dirichlet, false).unwrap();
        let shifted = spec.with_phase(spec.phase_at(1));
        let h_shift = FiniteRestriction::new(&shifted, 29, BoundaryCondition::Dirichlet, false).unwrap();
        for m in 0..29 {
            assert!(
                (h.diag()[m + 1] - h_shift.diag()[m]).abs() < 1e-12,
                "shift mismatch at site {m}: {} vs {}",
                h.diag()[m + 1],
                h_shift.diag()[m]
            );
        }
    }

    #[test]
    fn breakpoint_jump_is_rank_one_with_trace_minus_lambda() {
        let lambda = 2.0;
        let base = golden_spec(lambda, 0.0);
        for n in [13usize, 34] {
            let betas = beta_points(n, base.cf.alpha_dd()).unwrap();
            for b in &betas {
                let spec = base.with_phase(b.value);
                for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Periodic] {
                    let (right, left) = jump_pair(&spec, n, bc).unwrap();
                    let sites = right.differing_sites(&left, 1e-9);
                    assert_eq!(
                        sites,
                        vec![b.site],
                        "jump at beta for site {} (n={n}) must hit exactly that site",
                        b.site
                    );
                    let defect = right.trace() - left.trace();
                    assert!(
                        (defect + lambda).abs() < 1e-12,
                        "trace jump at site {} (n={n}, {bc}): {defect} vs {}",
                        b.site,
                        -lambda
                    );
                }
            }
        }
    }

    #[test]
    fn generic_phase_has_no_jump() {
        let spec = golden_spec(2.0, 0.4321);
        let (right, left) = jump_pair(&spec, 34, BoundaryCondition::Dirichlet).unwrap();
        assert!(
            right.differing_sites(&left, 0.0).is_empty(),
            "conventions must agree at a generic phase"
        );
    }
}
