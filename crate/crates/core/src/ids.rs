//! Integrated density of states: phase-averaged eigenvalue counting on a
//! uniform energy grid, the Lipschitz modulus of the resulting table, and
//! a Lebesgue-measure estimate for the spectrum.

use crate::arithmetic::er_estimate;
use crate::error::{Error, Result};
use crate::operator::BoundaryCondition;
use crate::potential::OperatorSpec;
use crate::spectral::count_below;
use rayon::prelude::*;

/// Uniform energy grid with step `de`.
#[derive(Clone, Copy, Debug)]
pub struct IdsGrid {
    pub e_min: f64,
    pub de: f64,
    pub len: usize,
}

impl IdsGrid {
    pub fn new(e_min: f64, e_max: f64, de: f64) -> Result<Self> {
        if !(de > 0.0 && de.is_finite()) {
            return Err(Error::invalid(format!("grid step {de} must be positive")));
        }
        if !(e_max > e_min) {
            return Err(Error::invalid(format!("empty energy range [{e_min}, {e_max}]")));
        }
        let len = ((e_max - e_min) / de).floor() as usize + 1;
        if len > 50_000_000 {
            return Err(Error::Capacity(format!("energy grid with {len} points")));
        }
        Ok(IdsGrid { e_min, de, len })
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.e_min + i as f64 * self.de
    }

    pub fn energies(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.energy(i)).collect()
    }
}

/// Phase-averaged counting table N(E) = mean_x #{mu < E} / n.
///
/// Counts are accumulated as integers, so the table is bit-identical for
/// any summation order and thread count.
#[derive(Clone, Debug)]
pub struct IdsTable {
    pub grid: IdsGrid,
    pub n: usize,
    pub samples: usize,
    pub bc: BoundaryCondition,
    counts: Vec<u64>,
}

impl IdsTable {
    pub fn value(&self, i: usize) -> f64 {
        self.counts[i] as f64 / (self.n as f64 * self.samples as f64)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.grid.len).map(|i| self.value(i)).collect()
    }

    /// Increment of N across grid step i -> i+1.
    pub fn bin_mass(&self, i: usize) -> f64 {
        (self.counts[i + 1] - self.counts[i]) as f64 / (self.n as f64 * self.samples as f64)
    }
}

/// Estimates the integrated density of states of the operator family by
/// counting box eigenvalues below each grid energy, averaged over
/// equidistributed phases x + (i + 1/2)/samples.
pub fn ids_estimate(
    spec: &OperatorSpec,
    n: usize,
    grid: IdsGrid,
    x_samples: usize,
    bc: BoundaryCondition,
) -> Result<IdsTable> {
    if n < 50 {
        return Err(Error::invalid(format!("box size {n} too small for a stable table (need >= 50)")));
    }
    if x_samples < 20 {
        return Err(Error::invalid(format!("{x_samples} phase samples too few (need >= 20)")));
    }
    let per_phase: Vec<Vec<u64>> = (0..x_samples)
        .into_par_iter()
        .map(|i| {
            let x = (spec.x + (i as f64 + 0.5) / x_samples as f64).fract();
            let diag = spec.with_phase(x).sample_orbit(n, false);
            (0..grid.len)
                .map(|j| count_below(&diag, grid.energy(j), bc) as u64)
                .collect()
        })
        .collect();
    let mut counts = vec![0u64; grid.len];
    for row in &per_phase {
        for (c, r) in counts.iter_mut().zip(row.iter()) {
            *c += r;
        }
    }
    Ok(IdsTable { grid, n, samples: x_samples, bc, counts })
}

#[derive(Clone, Copy, Debug)]
pub struct LipschitzReport {
    /// Largest one-step slope of the table.
    pub max_slope: f64,
    /// Left edge of the grid step attaining it.
    pub argmax_e: f64,
    /// Density bound 1/(lambda (1 - rho) gamma_minus).
    pub bound: f64,
    /// Finite-size slack 2/(n dE) added to the bound before comparing.
    pub slack: f64,
    /// The rho actually used.
    pub rho: f64,
    pub pass: bool,
}

/// Measures the steepest slope of the table against the Lipschitz bound
/// 1/(lambda (1 - rho) gamma_minus), inflated by 5 percent and a 2/(n dE)
/// finite-size allowance. With `rho = None` the frequency's tail ratio
/// q_{k-1}/q_k is used; monotone potentials of sawtooth type admit rho = 0.
pub fn lipschitz_modulus(
    ids: &IdsTable,
    spec: &OperatorSpec,
    rho: Option<f64>,
) -> Result<LipschitzReport> {
    if ids.grid.de > 0.01 {
        return Err(Error::invalid(format!(
            "grid step {} too coarse for a slope measurement (need <= 0.01)",
            ids.grid.de
        )));
    }
    let rho = match rho {
        Some(r) => {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::invalid(format!("rho = {r} outside [0, 1)")));
            }
            r
        }
        None => er_estimate(&spec.cf)?.tail_ratio,
    };
    let (gamma_minus, _) = spec.potential.slope_bounds();
    let denom = spec.lambda * (1.0 - rho) * gamma_minus;
    if denom <= 0.0 {
        return Err(Error::invalid(
            "Lipschitz bound undefined: lambda (1 - rho) gamma_minus must be positive",
        ));
    }
    let bound = 1.0 / denom;
    let slack = 2.0 / (ids.n as f64 * ids.grid.de);
    let mut max_slope = 0.0f64;
    let mut argmax = ids.grid.e_min;
    for i in 0..ids.grid.len - 1 {
        let slope = ids.bin_mass(i) / ids.grid.de;
        if slope > max_slope {
            max_slope = slope;
            argmax = ids.grid.energy(i);
        }
    }
    Ok(LipschitzReport {
        max_slope,
        argmax_e: argmax,
        bound,
        slack,
        rho,
        pass: max_slope <= bound * 1.05 + slack,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct MeasureEstimate {
    /// dE times the number of grid steps carrying counting mass.
    pub measure: f64,
    /// Inverse-slope lower bound lambda (1 - rho) gamma_minus.
    pub lower_bound: f64,
    /// Support bound 4 + lambda.
    pub upper_bound: f64,
    pub pass: bool,
}

/// Estimates the Lebesgue measure of the spectrum as the total length of
/// grid steps whose bin mass exceeds the threshold, and checks it against
/// the bounds implied by the Lipschitz estimate and the operator norm.
pub fn spectrum_measure(
    ids: &IdsTable,
    spec: &OperatorSpec,
    threshold: f64,
) -> Result<MeasureEstimate> {
    if !(threshold >= 0.0) {
        return Err(Error::invalid("threshold must be nonnegative"));
    }
    let rho = er_estimate(&spec.cf)?.tail_ratio;
    let (gamma_minus, _) = spec.potential.slope_bounds();
    let lower_bound = spec.lambda * (1.0 - rho) * gamma_minus;
    let upper_bound = 4.0 + spec.lambda;
    let occupied = (0..ids.grid.len - 1).filter(|&i| ids.bin_mass(i) > threshold).count();
    let measure = occupied as f64 * ids.grid.de;
    Ok(MeasureEstimate {
        measure,
        lower_bound,
        upper_bound,
        pass: measure >= lower_bound && measure <= upper_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::ContinuedFraction;
    use crate::potential::MonotonePotential;
    use std::f64::consts::PI;

    fn golden_spec(lambda: f64) -> OperatorSpec {
        let cf = ContinuedFraction::golden(20).unwrap();
        OperatorSpec::new(cf, lambda, MonotonePotential::sawtooth(), 0.0).unwrap()
    }

    #[test]
    fn free_chain_matches_arcsine_law() {
        // lambda plays no role at 0 coupling; the IDS is the explicit
        // arcsine law of the free Laplacian.
        let cf = ContinuedFraction::golden(20).unwrap();
        let spec = OperatorSpec::new(cf, 1e-12, MonotonePotential::sawtooth(), 0.0).unwrap();
        let n = 200;
        let grid = IdsGrid::new(-2.2, 2.2, 0.02).unwrap();
        let ids = ids_estimate(&spec, n, grid, 20, BoundaryCondition::Dirichlet).unwrap();
        for i in 0..grid.len {
            let e = grid.energy(i);
            let expect = if e <= -2.0 {
                0.0
            } else if e >= 2.0 {
                1.0
            } else {
                (-e / 2.0).acos() / PI
            };
            let got = ids.value(i);
            assert!(
                (got - expect).abs() < 1.5 / n as f64 + 0.01,
                "free IDS at E={e}: {got:.5} vs {expect:.5}"
            );
        }
        let mid = ((0.0 - grid.e_min) / grid.de).round() as usize;
        assert!((ids.value(mid) - 0.5).abs() <= 1.0 / n as f64, "N(0) = 1/2 within 1/n");
    }

    #[test]
    fn table_is_monotone_and_pinned_at_the_ends() {
        let spec = golden_spec(10.0);
        let grid = IdsGrid::new(-2.5, 12.5, 0.05).unwrap();
        let ids = ids_estimate(&spec, 89, grid, 24, BoundaryCondition::Periodic).unwrap();
        let vals = ids.values();
        for w in vals.windows(2) {
            assert!(w[0] <= w[1], "IDS must be nondecreasing");
        }
        assert_eq!(vals[0], 0.0, "no spectrum below -2");
        assert_eq!(vals[grid.len - 1], 1.0, "all spectrum below 2 + lambda + slack");
    }

    #[test]
    fn boundary_conditions_differ_by_rank_two() {
        let spec = golden_spec(2.0);
        let grid = IdsGrid::new(-2.5, 4.5, 0.05).unwrap();
        let n = 55;
        let d = ids_estimate(&spec, n, grid, 20, BoundaryCondition::Dirichlet).unwrap();
        let p = ids_estimate(&spec, n, grid, 20, BoundaryCondition::Periodic).unwrap();
        for i in 0..grid.len {
            let gap = (d.value(i) - p.value(i)).abs();
            assert!(
                gap <= 2.0 / n as f64 + 1e-12,
                "counting under the two boundary conditions differs by more than rank 2 at {}",
                grid.energy(i)
            );
        }
    }

    #[test]
    fn preconditions_are_enforced() {
        let spec = golden_spec(2.0);
        let grid = IdsGrid::new(-2.5, 4.5, 0.05).unwrap();
        assert!(ids_estimate(&spec, 20, grid, 20, BoundaryCondition::Dirichlet).is_err());
        assert!(ids_estimate(&spec, 89, grid, 5, BoundaryCondition::Dirichlet).is_err());
        assert!(IdsGrid::new(1.0, 0.0, 0.1).is_err());
        assert!(IdsGrid::new(0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn lipschitz_bound_golden_sawtooth() {
        let spec = golden_spec(10.0);
        let grid = IdsGrid::new(-2.2, 12.2, 0.005).unwrap();
        let ids = ids_estimate(&spec, 89, grid, 20, BoundaryCondition::Dirichlet).unwrap();
        let rep = lipschitz_modulus(&ids, &spec, None).unwrap();
        // Golden tail ratio is 1/phi^2 = 0.382, so the density bound is
        // 1/(10 * 0.618) = 0.1618.
        assert!(
            (rep.bound - 0.161_803_398_874_99).abs() < 1e-6,
            "bound {:.8} should be about 0.16180",
            rep.bound
        );
        assert!(rep.pass, "max slope {:.4} vs bound {:.4} + slack {:.4}", rep.max_slope, rep.bound, rep.slack);

        // The sawtooth admits rho = 0 and the stricter 1/lambda bound.
        let strict = lipschitz_modulus(&ids, &spec, Some(0.0)).unwrap();
        assert!((strict.bound - 0.1).abs() < 1e-12, "strict bound is 1/lambda");
        assert!(strict.pass, "strict variant must also pass at this size");
    }

    #[test]
    fn lipschitz_rejects_coarse_grids_and_zero_coupling() {
        let spec = golden_spec(10.0);
        let coarse = IdsGrid::new(-2.0, 12.0, 0.05).unwrap();
        let ids = ids_estimate(&spec, 89, coarse, 20, BoundaryCondition::Dirichlet).unwrap();
        assert!(lipschitz_modulus(&ids, &spec, None).is_err(), "grid step above 0.01");
        assert!(lipschitz_modulus(&ids, &spec, Some(1.5)).is_err(), "rho outside [0,1)");
    }

    #[test]
    fn measure_estimate_brackets() {
        let spec = golden_spec(10.0);
        let grid = IdsGrid::new(-2.2, 12.2, 0.01).unwrap();
        let ids = ids_estimate(&spec, 144, grid, 20, BoundaryCondition::Dirichlet).unwrap();
        let m = spectrum_measure(&ids, &spec, 1e-8).unwrap();
        assert!(
            (m.lower_bound - 6.180_339_887_5).abs() < 1e-4,
            "lower bound about 6.18, got {}",
            m.lower_bound
        );
        assert!(m.measure >= m.lower_bound, "measure {} under bound {}", m.measure, m.lower_bound);
        assert!(m.measure <= m.upper_bound, "measure {} over support bound {}", m.measure, m.upper_bound);
        assert!(m.pass);
    }

    #[test]
    fn free_chain_measure_is_the_band() {
        // The estimator sees bins hit by finite-box eigenvalues, so the
        // bin width must exceed the eigenvalue spacing (about pi^2/n at
        // mid-band) before the band fills in.
        let cf = ContinuedFraction::golden(20).unwrap();
        let spec = OperatorSpec::new(cf, 1e-12, MonotonePotential::sawtooth(), 0.0).unwrap();
        let grid = IdsGrid::new(-2.5, 2.5, 0.05).unwrap();
        let ids = ids_estimate(&spec, 500, grid, 20, BoundaryCondition::Dirichlet).unwrap();
        let m = spectrum_measure(&ids, &spec, 1e-8).unwrap();
        assert!((m.measure - 4.0).abs() < 0.15, "free spectrum is [-2,2], measured {}", m.measure);
    }
}
