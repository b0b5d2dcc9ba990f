//! Layered experiment configuration: built-in defaults, named presets, a
//! TOML config file, and command-line overrides, in that precedence
//! order. Every run emits the fully resolved form, which re-runs to the
//! same results.

use crate::{CliError, CliResult};
use qplab_core::arithmetic::{ContinuedFraction, Frequency};
use qplab_core::{BoundaryCondition, MonotonePotential, OperatorSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

/// A config layer: only the fields present in the layer override the ones
/// below it.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    #[serde(default)]
    pub model: PartialModel,
    #[serde(default)]
    pub scales: PartialScales,
    #[serde(default)]
    pub energy: PartialEnergy,
    #[serde(default)]
    pub phases: PartialPhases,
    #[serde(default)]
    pub run: PartialRun,
    #[serde(default)]
    pub output: PartialOutput,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialModel {
    /// `golden`, `silver`, `cf:[a1,a2,...]`, or `num:<decimal>`.
    pub frequency: Option<String>,
    /// Continued-fraction expansion depth.
    pub depth: Option<usize>,
    /// `sawtooth`, `blend:<c>`, or `pwl:[(x0,y0),(x1,y1),...]`.
    pub potential: Option<String>,
    pub lambda: Option<f64>,
    pub phase: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialScales {
    /// Box sizes; each must be a convergent denominator of the frequency.
    pub q: Option<Vec<i64>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialEnergy {
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Grid points for curve-style outputs.
    pub points: Option<usize>,
    /// Bin width for integrated-density tables.
    pub de: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialPhases {
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialRun {
    /// Default box size for finite-volume commands.
    pub n: Option<usize>,
    /// `dirichlet` or `periodic`.
    pub bc: Option<String>,
    /// Bisection tolerance for eigenvalue computations.
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialOutput {
    pub dir: Option<String>,
}

impl PartialConfig {
    /// Overlays `upper` on top of this layer; `upper`'s present fields win.
    pub fn overlay(mut self, upper: PartialConfig) -> PartialConfig {
        macro_rules! take {
            ($($section:ident . $field:ident),* $(,)?) => {
                $(if upper.$section.$field.is_some() {
                    self.$section.$field = upper.$section.$field;
                })*
            };
        }
        take!(
            model.frequency,
            model.depth,
            model.potential,
            model.lambda,
            model.phase,
            scales.q,
            energy.min,
            energy.max,
            energy.points,
            energy.de,
            phases.samples,
            run.n,
            run.bc,
            run.tol,
            output.dir,
        );
        self
    }
}

/// Fully resolved configuration; serializes to a TOML file that parses
/// back into an equivalent `PartialConfig`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ResolvedConfig {
    pub model: ModelSection,
    pub scales: ScalesSection,
    pub energy: EnergySection,
    pub phases: PhasesSection,
    pub run: RunSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ModelSection {
    pub frequency: String,
    pub depth: usize,
    pub potential: String,
    pub lambda: f64,
    pub phase: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ScalesSection {
    pub q: Vec<i64>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct EnergySection {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub de: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PhasesSection {
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunSection {
    pub n: usize,
    pub bc: String,
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct OutputSection {
    pub dir: String,
}

pub const PRESET_NAMES: [&str; 3] =
    ["golden-sawtooth-lambda2", "golden-sawtooth-lambda10", "silver-blend-lambda10"];

/// Built-in parameter sets for the standard regimes.
pub fn preset(name: &str) -> CliResult<PartialConfig> {
    let mut p = PartialConfig::default();
    match name {
        "golden-sawtooth-lambda2" => {
            p.model.frequency = Some("golden".into());
            p.model.potential = Some("sawtooth".into());
            p.model.lambda = Some(2.0);
            p.scales.q = Some(vec![13, 34, 89]);
        }
        "golden-sawtooth-lambda10" => {
            p.model.frequency = Some("golden".into());
            p.model.potential = Some("sawtooth".into());
            p.model.lambda = Some(10.0);
            p.scales.q = Some(vec![13, 34, 89]);
        }
        "silver-blend-lambda10" => {
            p.model.frequency = Some("silver".into());
            p.model.potential = Some("blend:0.5".into());
            p.model.lambda = Some(10.0);
            p.scales.q = Some(vec![12, 29, 70]);
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown preset '{other}'; available: {}",
                PRESET_NAMES.join(", ")
            )));
        }
    }
    Ok(p)
}

/// Fills defaults into the merged layers. Range defaults derive from the
/// coupling so the energy window covers the spectrum with a margin.
pub fn resolve(layers: PartialConfig) -> CliResult<ResolvedConfig> {
    let lambda = layers.model.lambda.unwrap_or(10.0);
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(CliError::Config(format!("coupling must be finite and nonnegative, got {lambda}")));
    }
    let e_min = layers.energy.min.unwrap_or(-2.5);
    let e_max = layers.energy.max.unwrap_or(2.0 + lambda + 0.5);
    if !(e_min < e_max) {
        return Err(CliError::Config(format!("energy window [{e_min}, {e_max}] is empty")));
    }
    let de = layers.energy.de.unwrap_or(0.005);
    if !(de > 0.0) {
        return Err(CliError::Config(format!("energy bin width must be positive, got {de}")));
    }
    let depth = layers.model.depth.unwrap_or(30);
    let cfg = ResolvedConfig {
        model: ModelSection {
            frequency: layers.model.frequency.unwrap_or_else(|| "golden".into()),
            depth,
            potential: layers.model.potential.unwrap_or_else(|| "sawtooth".into()),
            lambda,
            phase: layers.model.phase.unwrap_or(0.0),
        },
        scales: ScalesSection { q: layers.scales.q.unwrap_or_else(|| vec![13, 34, 89]) },
        energy: EnergySection {
            min: e_min,
            max: e_max,
            points: layers.energy.points.unwrap_or(50),
            de,
        },
        phases: PhasesSection { samples: layers.phases.samples.unwrap_or(50) },
        run: RunSection {
            n: layers.run.n.unwrap_or(233),
            bc: layers.run.bc.unwrap_or_else(|| "dirichlet".into()),
            tol: layers.run.tol.unwrap_or(1e-10),
        },
        output: OutputSection { dir: layers.output.dir.unwrap_or_else(|| "out".into()) },
    };
    Ok(cfg)
}

pub fn read_config_file(path: &Path) -> CliResult<PartialConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_potential(s: &str) -> CliResult<MonotonePotential> {
    if s == "sawtooth" {
        return Ok(MonotonePotential::sawtooth());
    }
    if let Some(c) = s.strip_prefix("blend:") {
        let c: f64 = c
            .parse()
            .map_err(|_| CliError::Config(format!("bad blend weight in '{s}'")))?;
        return MonotonePotential::blend(c).map_err(|e| CliError::Config(e.to_string()));
    }
    if let Some(body) = s.strip_prefix("pwl:") {
        let body = body.trim();
        let inner = body
            .strip_prefix('[')
            .and_then(|b| b.strip_suffix(']'))
            .ok_or_else(|| CliError::Config(format!("pwl knots must be bracketed: '{s}'")))?;
        let mut knots = Vec::new();
        for part in inner.split("),") {
            let pair = part.trim().trim_start_matches('(').trim_end_matches(')');
            if pair.is_empty() {
                continue;
            }
            let mut it = pair.split(',');
            let x: f64 = it
                .next()
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| CliError::Config(format!("bad pwl knot '{pair}'")))?;
            let y: f64 = it
                .next()
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| CliError::Config(format!("bad pwl knot '{pair}'")))?;
            if it.next().is_some() {
                return Err(CliError::Config(format!("bad pwl knot '{pair}'")));
            }
            knots.push((x, y));
        }
        return MonotonePotential::piecewise_linear(knots).map_err(|e| CliError::Config(e.to_string()));
    }
    Err(CliError::Config(format!(
        "unknown potential '{s}'; use sawtooth, blend:<c>, or pwl:[(x,y),...]"
    )))
}

pub fn parse_bc(s: &str) -> CliResult<BoundaryCondition> {
    match s {
        "dirichlet" => Ok(BoundaryCondition::Dirichlet),
        "periodic" => Ok(BoundaryCondition::Periodic),
        other => Err(CliError::Config(format!("unknown boundary condition '{other}'"))),
    }
}

/// Validated, ready-to-run form of a resolved config.
#[derive(Debug)]
pub struct Runtime {
    pub cfg: ResolvedConfig,
    pub cf: ContinuedFraction,
    pub potential: MonotonePotential,
    pub bc: BoundaryCondition,
    /// Convergent indices matching cfg.scales.q, ascending.
    pub scale_ks: Vec<usize>,
    /// Preset the configuration was layered on, when one was named.
    pub preset: Option<String>,
}

impl Runtime {
    pub fn build(cfg: ResolvedConfig) -> CliResult<Runtime> {
        let freq = Frequency::from_str(&cfg.model.frequency)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let cf = ContinuedFraction::from_frequency(&freq, cfg.model.depth)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let potential = parse_potential(&cfg.model.potential)?;
        let bc = parse_bc(&cfg.run.bc)?;
        let mut scale_ks = Vec::with_capacity(cfg.scales.q.len());
        for &q in &cfg.scales.q {
            match cf.scale_index(q as i128) {
                Some(k) => scale_ks.push(k),
                None => {
                    let available: Vec<String> =
                        cf.q().iter().skip(1).map(|v| v.to_string()).collect();
                    return Err(CliError::Config(format!(
                        "scale {q} is not a convergent denominator of {}; available: [{}]",
                        cfg.model.frequency,
                        available.join(", ")
                    )));
                }
            }
        }
        Ok(Runtime { cfg, cf, potential, bc, scale_ks, preset: None })
    }

    /// The operator at the configured phase. Zero coupling has no
    /// quasiperiodic operator; commands with a free-chain path handle it
    /// before calling this.
    pub fn spec(&self) -> CliResult<OperatorSpec> {
        OperatorSpec::new(
            self.cf.clone(),
            self.cfg.model.lambda,
            self.potential.clone(),
            self.cfg.model.phase,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Serializes the resolved config as TOML for the output directory.
pub fn resolved_toml(cfg: &ResolvedConfig) -> String {
    toml::to_string(cfg).expect("resolved config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_and_roundtrip() {
        let cfg = resolve(PartialConfig::default()).unwrap();
        let text = resolved_toml(&cfg);
        let back: PartialConfig = toml::from_str(&text).unwrap();
        let cfg2 = resolve(back).unwrap();
        assert_eq!(cfg, cfg2, "resolved config must round-trip through TOML");
    }

    #[test]
    fn preset_overlay_and_flag_precedence() {
        let base = preset("golden-sawtooth-lambda2").unwrap();
        let mut flags = PartialConfig::default();
        flags.model.lambda = Some(7.5);
        let cfg = resolve(base.overlay(flags)).unwrap();
        assert_eq!(cfg.model.lambda, 7.5, "flag layer wins over preset");
        assert_eq!(cfg.model.frequency, "golden");
        assert_eq!(cfg.scales.q, vec![13, 34, 89]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<PartialConfig>("[model]\nlambda = 2.0\nlambdda = 3.0\n");
        assert!(err.is_err(), "misspelled keys must not be silently dropped");
    }

    #[test]
    fn unknown_preset_lists_options() {
        let err = preset("golden-sawtooth-lambda3").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("golden-sawtooth-lambda10"), "{msg}");
    }

    #[test]
    fn infeasible_scale_reports_available_q() {
        let mut p = preset("golden-sawtooth-lambda10").unwrap();
        p.scales.q = Some(vec![14]);
        let err = Runtime::build(resolve(p).unwrap()).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("14") && msg.contains("13") && msg.contains("21"), "{msg}");
    }

    #[test]
    fn potential_strings_parse() {
        assert!(parse_potential("sawtooth").is_ok());
        assert!(parse_potential("blend:0.5").is_ok());
        assert!(parse_potential("pwl:[(0,0),(0.3,0.5),(1,1)]").is_ok());
        assert!(parse_potential("step").is_err());
        assert!(parse_potential("blend:two").is_err());
    }
}
