//! Experiment config: a JSON document, validated on load.

use std::path::Path;

use gexpect::expectation::{LsmcConfig, Method, Mode};
use gexpect::gdsl::{parse_claim, parse_generator};
use gexpect::model::{Claim, GeneratorSpec, TimeGrid};
use gexpect::solvers::LatticeScheme;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Price,
    Recover,
    CheckProperties,
    ClassifyRisk,
    Converge,
    Equivalence,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Price,
        Command::Recover,
        Command::CheckProperties,
        Command::ClassifyRisk,
        Command::Converge,
        Command::Equivalence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Price => "price",
            Command::Recover => "recover",
            Command::CheckProperties => "check-properties",
            Command::ClassifyRisk => "classify-risk",
            Command::Converge => "converge",
            Command::Equivalence => "equivalence",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub expr: String,
    #[serde(default = "one")]
    pub d: usize,
    /// Declared Lipschitz constant.
    #[serde(rename = "K")]
    pub k: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Step count for `price`, `check-properties` and `classify-risk`.
    #[serde(rename = "N", default)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    #[default]
    Lattice,
    Lsmc,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    #[default]
    Implicit,
    Explicit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Strict,
    Raw,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsmcSection {
    #[serde(rename = "M", default = "default_paths")]
    pub paths: usize,
    #[serde(default = "three")]
    pub degree: usize,
    #[serde(default = "three")]
    pub picard_iters: usize,
}

impl Default for LsmcSection {
    fn default() -> Self {
        Self {
            paths: default_paths(),
            degree: 3,
            picard_iters: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Operator-level checks; `null` picks the method default.
    #[serde(default)]
    pub operator: Option<f64>,
    #[serde(default = "default_generator_tol")]
    pub generator: f64,
    /// Largest accepted `|recovered - g|`.
    #[serde(default = "default_recovery_tol")]
    pub recovery: f64,
    /// Largest accepted gap between slopes and local averages.
    #[serde(default = "default_equivalence_tol")]
    pub equivalence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            operator: None,
            generator: default_generator_tol(),
            recovery: default_recovery_tol(),
            equivalence: default_equivalence_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    #[serde(default)]
    pub t: f64,
    pub y: f64,
    pub z: Vec<f64>,
}

/// Uniform draws of `y` and each `z` coordinate, one set per listed time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTargets {
    pub count: usize,
    #[serde(default = "zero_times")]
    pub times: Vec<f64>,
    pub y: [f64; 2],
    pub z: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverSection {
    #[serde(default)]
    pub targets: Vec<Target>,
    #[serde(default)]
    pub random: Option<RandomTargets>,
    /// Strictly decreasing; `null` uses `2^-4 .. 2^-8` times `T`.
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    #[serde(default = "default_steps_per_eps")]
    pub steps_per_eps: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySection {
    #[serde(default)]
    pub theorems: Option<Vec<String>>,
    #[serde(default)]
    pub constants: Option<Vec<f64>>,
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskClass {
    None,
    Monetary,
    Convex,
    Coherent,
}

impl RiskClass {
    pub fn name(self) -> &'static str {
        match self {
            RiskClass::None => "none",
            RiskClass::Monetary => "monetary",
            RiskClass::Convex => "convex",
            RiskClass::Coherent => "coherent",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    #[serde(rename = "N")]
    pub steps: Vec<usize>,
    /// Exact value, when known.
    #[serde(default)]
    pub oracle: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub generator: GeneratorConfig,
    /// Claim expressions in `x`; empty means the default battery where one applies.
    #[serde(default)]
    pub claims: Vec<String>,
    pub grid: GridConfig,
    #[serde(default)]
    pub method: MethodName,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default)]
    pub lsmc: LsmcSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Output file name inside the output directory; defaults to `<command>.csv`.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub recover: Option<RecoverSection>,
    #[serde(default)]
    pub battery: Option<BatterySection>,
    /// `classify-risk` fails with a check error unless this class comes out.
    #[serde(default)]
    pub expect_class: Option<RiskClass>,
    #[serde(default)]
    pub converge: Option<ConvergeSection>,
}

fn one() -> usize {
    1
}

fn three() -> usize {
    3
}

fn default_paths() -> usize {
    100_000
}

fn default_generator_tol() -> f64 {
    1e-9
}

fn default_recovery_tol() -> f64 {
    1e-3
}

fn default_equivalence_tol() -> f64 {
    1e-6
}

fn default_steps_per_eps() -> usize {
    gexpect::representation::STEPS_PER_EPS
}

fn zero_times() -> Vec<f64> {
    vec![0.0]
}

/// `a.b[2].c` style path from serde into a JSON pointer `/a/b/2/c`.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let ptr = pointer(e.path());
            CliError::config(ptr, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that serde cannot express: parsable expressions and
    /// command-specific required fields.
    pub fn validate(&self) -> Result<()> {
        self.generator_spec()?;
        self.claim_list()?;
        if matches!(self.command, Command::Converge | Command::Recover | Command::Equivalence) {
            self.grid_with(1)?;
        } else {
            self.time_grid()?;
        }
        if self.lsmc.paths < 2 {
            return Err(CliError::config("/lsmc/M", "need at least 2 paths"));
        }
        let need_claim = matches!(self.command, Command::Price | Command::Converge);
        if need_claim && self.claims.is_empty() {
            return Err(CliError::config("/claims", format!("{} needs at least one claim", self.command.name())));
        }
        match self.command {
            Command::Converge => {
                let c = self
                    .converge
                    .as_ref()
                    .ok_or_else(|| CliError::config("/converge", "converge needs a converge section"))?;
                if c.steps.len() < 2 {
                    return Err(CliError::config("/converge/N", "need at least two grid sizes"));
                }
                if self.claims.len() != 1 {
                    return Err(CliError::config("/claims", "converge takes exactly one claim"));
                }
            }
            Command::Recover | Command::Equivalence => {
                let r = self.recover.as_ref().ok_or_else(|| {
                    CliError::config("/recover", format!("{} needs a recover section", self.command.name()))
                })?;
                if r.targets.is_empty() && r.random.as_ref().is_none_or(|x| x.count == 0) {
                    return Err(CliError::config("/recover/targets", "no recovery targets"));
                }
                for (i, t) in r.targets.iter().enumerate() {
                    if t.z.len() != self.generator.d {
                        return Err(CliError::config(
                            format!("/recover/targets/{i}/z"),
                            format!("expected {} coordinates", self.generator.d),
                        ));
                    }
                }
            }
            Command::CheckProperties => {
                if let Some(names) = self.battery.as_ref().and_then(|b| b.theorems.as_ref()) {
                    for (i, n) in names.iter().enumerate() {
                        if gexpect::properties::Theorem::from_name(n).is_none() {
                            return Err(CliError::config(format!("/battery/theorems/{i}"), format!("unknown theorem {n:?}")));
                        }
                    }
                }
            }
            Command::Price | Command::ClassifyRisk => {}
        }
        Ok(())
    }

    pub fn generator_spec(&self) -> Result<GeneratorSpec<f64>> {
        let g = parse_generator::<f64>(&self.generator.expr, self.generator.d)
            .map_err(|e| CliError::config("/generator/expr", e.to_string()))?;
        if !self.generator.k.is_finite() || self.generator.k < 0.0 {
            return Err(CliError::config("/generator/K", "must be finite and non-negative"));
        }
        Ok(g.with_lipschitz(self.generator.k))
    }

    pub fn claim_list(&self) -> Result<Vec<Claim<f64>>> {
        self.claims
            .iter()
            .enumerate()
            .map(|(i, src)| {
                parse_claim::<f64>(src, self.generator.d).map_err(|e| CliError::config(format!("/claims/{i}"), e.to_string()))
            })
            .collect()
    }

    pub fn time_grid(&self) -> Result<TimeGrid<f64>> {
        let steps = self
            .grid
            .steps
            .ok_or_else(|| CliError::config("/grid/N", format!("{} needs a step count", self.command.name())))?;
        self.grid_with(steps)
    }

    pub fn grid_with(&self, steps: usize) -> Result<TimeGrid<f64>> {
        TimeGrid::new(self.grid.horizon, steps).map_err(|e| CliError::config("/grid", e.to_string()))
    }

    pub fn core_method(&self) -> Method {
        match self.method {
            MethodName::Lattice => Method::Lattice(match self.scheme {
                SchemeName::Implicit => LatticeScheme::Implicit,
                SchemeName::Explicit => LatticeScheme::Explicit,
            }),
            MethodName::Lsmc => Method::Lsmc(self.lsmc_config()),
        }
    }

    pub fn lsmc_config(&self) -> LsmcConfig {
        LsmcConfig {
            paths: self.lsmc.paths,
            degree: self.lsmc.degree,
            picard_iters: self.lsmc.picard_iters,
            seed: self.seed,
        }
    }

    pub fn core_mode(&self) -> Mode {
        match self.mode {
            ModeName::Strict => Mode::Strict,
            ModeName::Raw => Mode::RawBsde,
        }
    }

    pub fn output_name(&self) -> String {
        self.output.clone().unwrap_or_else(|| format!("{}.csv", self.command.name()))
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PRICE: &str = r#"{"command": "price", "generator": {"expr": "0.3*abs(z1)", "K": 0.3},
        "claims": ["x"], "grid": {"T": 1, "N": 256}}"#;

    #[test]
    fn minimal_price_config() {
        let c = ExperimentConfig::from_json(PRICE).unwrap();
        assert_eq!(c.command, Command::Price);
        assert_eq!(c.generator.d, 1);
        assert_eq!(c.method, MethodName::Lattice);
        assert_eq!(c.output_name(), "price.csv");
        assert_eq!(c.hash().len(), 16);
    }

    #[test]
    fn schema_errors_carry_pointers() {
        let bad = PRICE.replace("\"N\": 256", "\"N\": -3");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().starts_with("config /grid/N:"), "{err}");
        let bad = PRICE.replace("\"claims\"", "\"claim\"");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
        let bad = PRICE.replace("abs(z1)", "abs(z2)");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().starts_with("config /generator/expr:"), "{err}");
        assert_eq!(err.exit_code(), crate::error::EXIT_VALIDATION);
        let bad = PRICE.replace("[\"x\"]", "[\"x\", \"y\"]");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().starts_with("config /claims/1:"), "{err}");
    }

    #[test]
    fn converge_needs_two_sizes() {
        let src = r#"{"command": "converge", "generator": {"expr": "0.3*abs(z1)", "K": 0.3},
            "claims": ["x"], "grid": {"T": 1, "N": 8}, "converge": {"N": [64]}}"#;
        let err = ExperimentConfig::from_json(src).unwrap_err();
        assert!(err.to_string().starts_with("config /converge/N:"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_json(PRICE).unwrap();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), ExperimentConfig::from_json(PRICE).unwrap().hash());
    }
}
