//! Implementations of the data-producing subcommands. Each writes its
//! artifacts into the configured output directory and returns whether the
//! run's checks (if it has any) passed.

use crate::config::Runtime;
use crate::out::{f, gnuplot_stub, opt_f, Csv, OutDir};
use crate::{CliError, CliResult, Outcome};
use qplab_core::arithmetic::{
    diophantine_check, er_estimate, gap_structure, good_denominators, torus_norm, DiophantineParams,
};
use qplab_core::cocycle::{lyapunov_finite, thouless_averaged, thouless_exponent, transfer_matrix, Sampling};
use qplab_core::ids::{ids_estimate, lipschitz_modulus, IdsGrid};
use qplab_core::ldt::{cluster_split, deviation_set};
use qplab_core::localization::{box_eigenpairs, decay_fit, Verdict};
use qplab_core::spectral::eigencurves;
use qplab_core::{BoundaryCondition, FiniteRestriction};
use serde::Serialize;

/// Uniform inclusive grid over the configured energy window.
fn energy_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![0.5 * (min + max)];
    }
    (0..points)
        .map(|i| min + (max - min) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Finite-volume Lyapunov exponent used wherever a command needs a rate
/// reference at one energy.
fn gamma_at(spec: &qplab_core::OperatorSpec, e: f64) -> CliResult<f64> {
    Ok(lyapunov_finite(spec, e, 4000, Sampling::Birkhoff { windows: 8 })?.gamma)
}

fn bc_name(bc: BoundaryCondition) -> &'static str {
    match bc {
        BoundaryCondition::Dirichlet => "dirichlet",
        BoundaryCondition::Periodic => "periodic",
    }
}

#[derive(Serialize)]
struct SpectrumSummary {
    n: usize,
    bc: &'static str,
    #[serde(rename = "worstBackslide")]
    worst_backslide: f64,
    #[serde(rename = "monotoneOk")]
    monotone_ok: bool,
    breakpoints: usize,
}

/// Box spectrum at the base phase plus all eigenvalue curves over one
/// phase period, with the monotonicity report as the run's check.
pub fn spectrum(rt: &Runtime, out: &OutDir, plot_stub: bool) -> CliResult<Outcome> {
    let spec = rt.spec()?;
    let n = rt.cfg.run.n;
    let tol = rt.cfg.run.tol;

    let h = FiniteRestriction::new(&spec, n, rt.bc, false)?;
    let eigs = qplab_core::spectral::restriction_spectrum(&h, tol)?;
    let mut csv = Csv::new("level,mu");
    for (level, mu) in eigs.eigenvalues.iter().enumerate() {
        csv.row(&[level.to_string(), f(*mu)]);
    }
    out.write("eigenvalues.csv", &csv.finish())?;

    let set = eigencurves(&spec, n, rt.bc, rt.cfg.phases.samples, tol)?;
    let mut csv = Csv::new("level,x,mu,is_left_limit");
    for curve in &set.curves {
        for p in &curve.points {
            csv.row(&[curve.level.to_string(), f(p.x), f(p.mu), p.is_left_limit.to_string()]);
        }
    }
    out.write("curves.csv", &csv.finish())?;
    if plot_stub {
        out.write("curves.gp", &gnuplot_stub("curves.csv", 2, 3, "eigenvalue curves"))?;
    }

    let summary = SpectrumSummary {
        n,
        bc: bc_name(rt.bc),
        worst_backslide: set.report.worst_backslide,
        monotone_ok: set.report.monotone_ok,
        breakpoints: set.report.breakpoints,
    };
    out.write_json("spectrum.json", &summary)?;
    println!(
        "spectrum: n={n} bc={} levels={} worst backslide {}",
        bc_name(rt.bc),
        eigs.eigenvalues.len(),
        f(set.report.worst_backslide)
    );
    if set.report.monotone_ok {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::CheckFailed(format!(
            "eigenvalue curves backslide by {} between breakpoints",
            f(set.report.worst_backslide)
        )))
    }
}

#[derive(Serialize)]
struct IdsSummary {
    #[serde(rename = "maxSlope")]
    max_slope: f64,
    bound: f64,
    pass: bool,
}

/// Integrated density of states table with the Lipschitz-slope check.
pub fn ids(rt: &Runtime, out: &OutDir, rho: Option<f64>, plot_stub: bool) -> CliResult<Outcome> {
    if rt.cfg.phases.samples < 20 {
        return Err(CliError::Config(format!(
            "{} phase samples too few for a density table (need >= 20)",
            rt.cfg.phases.samples
        )));
    }
    if rt.cfg.run.n < 50 {
        return Err(CliError::Config(format!(
            "box size {} too small for a density table (need >= 50)",
            rt.cfg.run.n
        )));
    }
    let spec = rt.spec()?;
    let grid = IdsGrid::new(rt.cfg.energy.min, rt.cfg.energy.max, rt.cfg.energy.de)?;
    let table = ids_estimate(&spec, rt.cfg.run.n, grid, rt.cfg.phases.samples, rt.bc)?;
    let report = lipschitz_modulus(&table, &spec, rho)?;

    let mut csv = Csv::new("E,N,n,samples,bc");
    for i in 0..table.grid.len {
        csv.row(&[
            f(table.grid.energy(i)),
            f(table.value(i)),
            table.n.to_string(),
            table.samples.to_string(),
            bc_name(table.bc).to_string(),
        ]);
    }
    out.write("ids.csv", &csv.finish())?;
    if plot_stub {
        out.write("ids.gp", &gnuplot_stub("ids.csv", 1, 2, "integrated density of states"))?;
    }
    let summary =
        IdsSummary { max_slope: report.max_slope, bound: report.bound, pass: report.pass };
    out.write_json("ids.json", &summary)?;
    println!(
        "ids: maxSlope {} vs bound {} (rho {}) -> {}",
        f(report.max_slope),
        f(report.bound),
        f(report.rho),
        if report.pass { "pass" } else { "FAIL" }
    );
    if report.pass {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::CheckFailed(format!(
            "IDS slope {} exceeds the Lipschitz bound {}",
            f(report.max_slope),
            f(report.bound)
        )))
    }
}

#[derive(Serialize)]
struct LyapunovSummary {
    #[serde(rename = "minGamma")]
    min_gamma: f64,
    #[serde(rename = "argminE")]
    argmin_e: f64,
    bound: Option<f64>,
    pass: bool,
}

/// Finite-volume Lyapunov exponents over the energy grid (or a single
/// energy), with the coupling-based lower-bound check on request.
pub fn lyapunov(
    rt: &Runtime,
    out: &OutDir,
    energy: Option<f64>,
    n: usize,
    windows: usize,
    check_bound: bool,
    plot_stub: bool,
) -> CliResult<Outcome> {
    let energies = match energy {
        Some(e) => vec![e],
        None => energy_grid(rt.cfg.energy.min, rt.cfg.energy.max, rt.cfg.energy.points),
    };
    let lambda = rt.cfg.model.lambda;
    let free = lambda == 0.0;
    let spec = if free { None } else { Some(rt.spec()?) };

    let mut csv = Csv::new("E,gamma_n,n,sampling,stderr_estimate");
    let mut min_gamma = f64::INFINITY;
    let mut argmin_e = f64::NAN;
    for &e in &energies {
        let (gamma, stderr, sampling) = if free {
            // No potential: one deterministic product suffices. Telescoping
            // two prefix norms cancels the constant in ||M_n|| ~ C e^(g n),
            // removing the O(1/n) bias of a single normalized norm.
            let zeros = vec![0.0; n];
            let full = transfer_matrix(&zeros, e).ln_norm();
            let half = transfer_matrix(&zeros[..n / 2], e).ln_norm();
            let g = (full - half) / (n - n / 2) as f64;
            (g, 0.0, "free".to_string())
        } else {
            let est = lyapunov_finite(
                spec.as_ref().expect("spec built for nonzero coupling"),
                e,
                n,
                Sampling::Birkhoff { windows },
            )?;
            (est.gamma, est.stderr, "birkhoff".to_string())
        };
        if gamma < min_gamma {
            min_gamma = gamma;
            argmin_e = e;
        }
        csv.row(&[f(e), f(gamma), n.to_string(), sampling, f(stderr)]);
        if energies.len() == 1 {
            println!("gamma_n({}) = {}", f(e), f(gamma));
        }
    }
    out.write("lyapunov.csv", &csv.finish())?;
    if plot_stub {
        out.write("lyapunov.gp", &gnuplot_stub("lyapunov.csv", 1, 2, "finite-volume Lyapunov exponent"))?;
    }

    let bound = if check_bound {
        Some((lambda / (2.0 * std::f64::consts::E)).ln().max(0.0) - 0.05)
    } else {
        None
    };
    let pass = bound.map_or(true, |b| min_gamma >= b);
    let summary = LyapunovSummary { min_gamma, argmin_e, bound, pass };
    out.write_json("lyapunov.json", &summary)?;
    if energies.len() > 1 {
        println!("lyapunov: min gamma_n {} at E = {}", f(min_gamma), f(argmin_e));
    }
    if pass {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::CheckFailed(format!(
            "gamma_n dips to {} below the bound {}",
            f(min_gamma),
            f(bound.unwrap_or(f64::NAN))
        )))
    }
}

#[derive(Serialize)]
struct ThoulessSummary {
    #[serde(rename = "maxAbsDiff")]
    max_abs_diff: f64,
    tolerance: f64,
    pass: bool,
}

/// Cross-validates the logarithmic-potential route against the direct
/// transfer-product exponent on the energy grid.
pub fn thouless(
    rt: &Runtime,
    out: &OutDir,
    energy: Option<f64>,
    n: usize,
    avg_points: usize,
    tolerance: f64,
) -> CliResult<Outcome> {
    let energies = match energy {
        Some(e) => vec![e],
        None => energy_grid(rt.cfg.energy.min, rt.cfg.energy.max, rt.cfg.energy.points),
    };
    let lambda = rt.cfg.model.lambda;
    let free = lambda == 0.0;
    let spec = if free { None } else { Some(rt.spec()?) };

    let mut csv = Csv::new("E,gamma_n,thouless,absdiff");
    let mut max_abs_diff = 0.0f64;
    for &e in &energies {
        let (gamma, th) = if free {
            let zeros = vec![0.0; n];
            let full = transfer_matrix(&zeros, e).ln_norm();
            let half = transfer_matrix(&zeros[..n / 2], e).ln_norm();
            let g = (full - half) / (n - n / 2) as f64;
            (g, thouless_exponent(&zeros, e)?)
        } else {
            let s = spec.as_ref().expect("spec built for nonzero coupling");
            let g = lyapunov_finite(s, e, n, Sampling::Birkhoff { windows: 8 })?.gamma;
            (g, thouless_averaged(s, e, n, avg_points)?)
        };
        let diff = (gamma - th).abs();
        max_abs_diff = max_abs_diff.max(diff);
        csv.row(&[f(e), f(gamma), f(th), f(diff)]);
        if energies.len() == 1 {
            println!("gamma_n = {}, thouless = {}", f(gamma), f(th));
        }
    }
    out.write("thouless.csv", &csv.finish())?;
    let pass = max_abs_diff <= tolerance;
    let summary = ThoulessSummary { max_abs_diff, tolerance, pass };
    out.write_json("thouless.json", &summary)?;
    println!(
        "thouless: max |gamma_n - thouless| = {} (tolerance {}) -> {}",
        f(max_abs_diff),
        f(tolerance),
        if pass { "pass" } else { "FAIL" }
    );
    if pass {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::CheckFailed(format!(
            "estimator disagreement {} above tolerance {}",
            f(max_abs_diff),
            f(tolerance)
        )))
    }
}

#[derive(Serialize)]
struct LdtEntry {
    q: usize,
    #[serde(rename = "E")]
    e: f64,
    delta: f64,
    gamma: f64,
    measure: f64,
    intervals: usize,
    #[serde(rename = "maxIntervalLen")]
    max_interval_len: f64,
    #[serde(rename = "fittedC1")]
    fitted_c1: f64,
}

/// Deviation-set reports across the configured scales at one energy.
pub fn ldt(
    rt: &Runtime,
    out: &OutDir,
    energy: Option<f64>,
    delta_factor: f64,
    grid_mult: usize,
) -> CliResult<Outcome> {
    if !(delta_factor > 0.0 && delta_factor < 1.0) {
        return Err(CliError::Config(format!(
            "delta factor must sit in (0, 1), got {delta_factor}"
        )));
    }
    if grid_mult < 100 {
        return Err(CliError::Config(format!(
            "grid multiplier {grid_mult} too small (need >= 100 points per unit scale)"
        )));
    }
    let spec = rt.spec()?;
    let e = energy.unwrap_or(0.5 * (rt.cfg.energy.min + rt.cfg.energy.max));
    let mut entries = Vec::new();
    for &k in &rt.scale_ks {
        let q = rt.cf.q_i64(k) as usize;
        let gamma = gamma_at(&spec, e)?;
        let delta = delta_factor * gamma;
        let report = deviation_set(&spec, k, e, delta, grid_mult * q, Some(gamma))?;
        let split = cluster_split(&spec, k, spec.x, e, None, rt.bc)?;
        entries.push(LdtEntry {
            q,
            e,
            delta,
            gamma,
            measure: report.measure,
            intervals: report.intervals,
            max_interval_len: report.max_interval_len,
            fitted_c1: split.fitted_c1,
        });
        println!(
            "ldt: q={q} measure {} intervals {} fittedC1 {}",
            f(report.measure),
            report.intervals,
            f(split.fitted_c1)
        );
    }
    out.write_json("ldt.json", &entries)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct LocalizeSummary {
    pairs: usize,
    skipped: usize,
    interior: usize,
    localized: usize,
    extended: usize,
    inconclusive: usize,
    #[serde(rename = "fractionLocalized")]
    fraction_localized: f64,
}

/// Eigenpair decay suite on one box: fits every pair in the window and
/// tabulates verdicts.
pub fn localize(
    rt: &Runtime,
    out: &OutDir,
    emin: Option<f64>,
    emax: Option<f64>,
    delta_factor: f64,
) -> CliResult<Outcome> {
    if !(delta_factor > 0.0 && delta_factor < 1.0) {
        return Err(CliError::Config(format!(
            "delta factor must sit in (0, 1), got {delta_factor}"
        )));
    }
    let spec = rt.spec()?;
    let n = rt.cfg.run.n;
    let window = match (emin, emax) {
        (Some(a), Some(b)) if a < b => (a, b),
        (None, None) => {
            // Middle half of the box spectrum.
            let diag = spec.sample_orbit(n, false);
            let eigs = qplab_core::spectral::dirichlet_spectrum(&diag, rt.cfg.run.tol)?;
            let (lo, hi) = (eigs[0], eigs[eigs.len() - 1]);
            let w = hi - lo;
            (lo + 0.25 * w, hi - 0.25 * w)
        }
        _ => {
            return Err(CliError::Config(
                "pass both --emin and --emax (with emin < emax), or neither".into(),
            ))
        }
    };
    let set = box_eigenpairs(&spec, n, window)?;
    let mut csv = Csv::new("E,n0,rate,R2,verdict,gammaE");
    let mut interior = 0usize;
    let mut tallies = [0usize; 3];
    for pair in &set.pairs {
        let gamma = gamma_at(&spec, pair.e)?;
        let fit = decay_fit(pair, gamma, delta_factor * gamma);
        let is_interior = pair.n0 >= n / 4 && pair.n0 <= 3 * n / 4;
        if is_interior {
            interior += 1;
        }
        match fit.verdict {
            Verdict::Localized => tallies[0] += 1,
            Verdict::Extended => tallies[1] += 1,
            Verdict::Inconclusive => tallies[2] += 1,
        }
        csv.row(&[
            f(pair.e),
            pair.n0.to_string(),
            opt_f(fit.rate),
            opt_f(fit.r_squared),
            fit.verdict.to_string(),
            f(gamma),
        ]);
    }
    out.write("pairs.csv", &csv.finish())?;
    let fraction = if interior > 0 { tallies[0] as f64 / interior as f64 } else { 0.0 };
    let summary = LocalizeSummary {
        pairs: set.pairs.len(),
        skipped: set.skipped.len(),
        interior,
        localized: tallies[0],
        extended: tallies[1],
        inconclusive: tallies[2],
        fraction_localized: fraction,
    };
    out.write_json("localize.json", &summary)?;
    println!(
        "localize: {} pairs ({} interior), {} localized / {} extended / {} inconclusive",
        set.pairs.len(),
        interior,
        tallies[0],
        tallies[1],
        tallies[2]
    );
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct ConvergentRow {
    k: usize,
    a: u64,
    p: String,
    q: String,
    qnorm: f64,
    #[serde(rename = "scaleRatio")]
    scale_ratio: Option<f64>,
}

#[derive(Serialize)]
struct GapRow {
    q: i64,
    #[serde(rename = "largeCount")]
    large_count: usize,
    #[serde(rename = "smallCount")]
    small_count: usize,
    #[serde(rename = "largeLen")]
    large_len: f64,
    #[serde(rename = "smallLen")]
    small_len: f64,
}

#[derive(Serialize)]
struct ErSummary {
    #[serde(rename = "minRatio")]
    min_ratio: f64,
    #[serde(rename = "argminK")]
    argmin_k: usize,
    #[serde(rename = "tailRatio")]
    tail_ratio: f64,
}

#[derive(Serialize)]
struct DiophantineSummary {
    c: f64,
    tau: f64,
    #[serde(rename = "nMax")]
    n_max: u64,
    holds: bool,
    #[serde(rename = "worstN")]
    worst_n: u64,
    #[serde(rename = "worstRatio")]
    worst_ratio: f64,
}

#[derive(Serialize)]
struct ArithReport {
    frequency: String,
    depth: usize,
    alpha: f64,
    convergents: Vec<ConvergentRow>,
    gaps: Vec<GapRow>,
    er: ErSummary,
    #[serde(rename = "goodDenominators")]
    good_denominators: Vec<String>,
    diophantine: DiophantineSummary,
}

/// Continued-fraction, gap-structure, and Diophantine report for the
/// configured frequency.
pub fn arith(
    rt: &Runtime,
    out: &OutDir,
    er: f64,
    dio_c: f64,
    dio_tau: f64,
    dio_n_max: Option<u64>,
) -> CliResult<Outcome> {
    let cf = &rt.cf;
    let deepest = cf.q_i64(cf.depth()).max(1) as u64;
    let dio_n_max = dio_n_max.unwrap_or_else(|| deepest.min(10_000));
    let alpha = cf.alpha();
    let mut convergents = Vec::new();
    for k in 1..=cf.depth() {
        let ratio = if k + 1 <= cf.depth() { Some(cf.scale_ratio(k)) } else { None };
        let qnorm = if cf.q_at(k) <= i64::MAX as i128 {
            torus_norm(cf.q_i64(k), cf.alpha_dd())
        } else {
            f64::NAN
        };
        convergents.push(ConvergentRow {
            k,
            a: cf.coeffs()[k - 1],
            p: cf.p()[k].to_string(),
            q: cf.q_at(k).to_string(),
            qnorm,
            scale_ratio: ratio,
        });
    }
    let mut gaps = Vec::new();
    for &k in &rt.scale_ks {
        let g = gap_structure(cf, k)?;
        gaps.push(GapRow {
            q: cf.q_i64(k),
            large_count: g.large_count,
            small_count: g.small_count,
            large_len: g.large_len,
            small_len: g.small_len,
        });
    }
    let est = er_estimate(cf)?;
    let good: Vec<String> =
        good_denominators(cf, er)?.into_iter().map(|q| q.to_string()).collect();
    let params = DiophantineParams::new(dio_c, dio_tau, dio_n_max)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let dio = diophantine_check(cf, &params).map_err(|e| CliError::Config(e.to_string()))?;
    let report = ArithReport {
        frequency: rt.cfg.model.frequency.clone(),
        depth: cf.depth(),
        alpha,
        convergents,
        gaps,
        er: ErSummary {
            min_ratio: est.min_ratio,
            argmin_k: est.argmin_k,
            tail_ratio: est.tail_ratio,
        },
        good_denominators: good,
        diophantine: DiophantineSummary {
            c: params.c,
            tau: params.tau,
            n_max: params.n_max,
            holds: dio.holds,
            worst_n: dio.worst_n,
            worst_ratio: dio.worst_ratio,
        },
    };
    out.write_json("arith.json", &report)?;
    println!(
        "arith: {} depth {} tail ratio {} diophantine {}",
        rt.cfg.model.frequency,
        cf.depth(),
        f(est.tail_ratio),
        if dio.holds { "holds" } else { "FAILS" }
    );
    if dio.holds {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::CheckFailed(format!(
            "||n alpha|| dips to {} * n^-tau at n = {}",
            f(dio.worst_ratio),
            dio.worst_n
        )))
    }
}
