//! TOML run configuration. Every tolerance has a default; the resolved
//! configuration is echoed into each report.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuchsian::{
    build_coding, default_group, CircleArc, CodingTable, Functional, Generator, GroupPresentation, MobiusMap,
    Representation, RepresentationKind, RoofPotential,
};
use crate::potential::{Constant, GeometricIndicator, LocallyConstant, LogFirstLetter, PotentialRef};
use crate::shift::{Letter, ShiftSpec, TruncatedShift, TruncationRule};
use crate::thermo::{TailModel, TailShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Pressure,
    Delta,
    Gap,
    Count,
    Equidist,
    Manhattan,
    Intersect,
    RoofTable,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pressure => "pressure",
            Command::Delta => "delta",
            Command::Gap => "gap",
            Command::Count => "count",
            Command::Equidist => "equidist",
            Command::Manhattan => "manhattan",
            Command::Intersect => "intersect",
            Command::RoofTable => "roof-table",
        }
    }

    /// Commands whose natural output is a table.
    pub fn default_format(&self) -> Format {
        match self {
            Command::Count | Command::Manhattan | Command::RoofTable => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftConfig {
    /// Full shift on `letters` symbols.
    Full { letters: u32 },
    /// Finite shift given by a 0-1 transition matrix.
    Matrix { matrix: Vec<Vec<i64>> },
    /// Full shift on `first, first + 1, ...`, truncated to `truncation`
    /// letters.
    Countable {
        #[serde(default)]
        first: u32,
        truncation: usize,
    },
    /// Coding of the `[group]` section, keeping parabolic powers up to
    /// `max_power`.
    Coding { max_power: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialConfig {
    /// `f(x) = values[x_1]`.
    Letter { values: Vec<f64> },
    /// `f(x) = values[x_1][x_2]`.
    Pair { values: Vec<Vec<f64>> },
    Constant { value: f64 },
    /// `f(x) = scale * log(x_1 + offset)`.
    LogLetter {
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `f(x) = sum_i ratio^i [x_i = target]`.
    Geometric { target: u32, ratio: f64 },
    /// Roof function of `Sym^{dim-1}` of the `[group]` section, for the
    /// functional with the given coefficients on simple roots (`alpha`) or
    /// fundamental weights (`omega`).
    Roof {
        dim: usize,
        #[serde(default)]
        alpha: Option<Vec<f64>>,
        #[serde(default)]
        omega: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Row-major 2x2 matrix of determinant one.
    pub matrix: Vec<Vec<f64>>,
    /// Counterclockwise arcs `[start, end]` of projective angles in
    /// `[0, pi)`; the real point `x` has angle `atan2(1, x)`.
    pub repelling: [f64; 2],
    pub attracting: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    #[serde(default)]
    pub hyperbolic: Vec<GeneratorConfig>,
    #[serde(default)]
    pub parabolic: Vec<GeneratorConfig>,
    #[serde(default = "default_basepoint")]
    pub basepoint: [f64; 2],
}

fn default_basepoint() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailChoice {
    Auto,
    None,
    LogLetter,
    LogLogCorrected,
    ExpLetter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub depth: usize,
    pub tol: f64,
    pub eval_depth: usize,
    pub node_limit: u64,
    pub letter_count: usize,
    pub bracket: [f64; 2],
    pub tail: TailChoice,
    pub threads: Option<usize>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            depth: 1,
            tol: 1e-10,
            eval_depth: 12,
            node_limit: crate::counting::DEFAULT_NODE_LIMIT,
            letter_count: 100_000,
            bracket: [1e-6, 100.0],
            tail: TailChoice::Auto,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureSection {
    /// Pressure of `coefficient * f`.
    pub coefficient: f64,
    /// Truncation index of the letter used for periodic sums.
    pub reference_letter: usize,
    pub n_max: usize,
}

impl Default for PressureSection {
    fn default() -> Self {
        PressureSection {
            coefficient: 1.0,
            reference_letter: 0,
            n_max: 12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountSection {
    /// Grid `start:step:end`.
    pub t: String,
}

impl Default for CountSection {
    fn default() -> Self {
        CountSection { t: "2:2:20".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquidistSection {
    pub t: f64,
}

impl Default for EquidistSection {
    fn default() -> Self {
        EquidistSection { t: 20.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManhattanSection {
    pub rays: usize,
    pub enlarged: bool,
}

impl Default for ManhattanSection {
    fn default() -> Self {
        ManhattanSection {
            rays: 17,
            enlarged: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoofTableSection {
    /// Longest cyclic word in the table.
    pub max_length: usize,
    /// Largest parabolic power in the table.
    pub max_power: usize,
    /// Repetitions of each word used to localize its periodic point.
    pub repetitions: usize,
    /// Random words used to measure the shadow constant.
    pub shadow_samples: usize,
}

impl Default for RoofTableSection {
    fn default() -> Self {
        RoofTableSection {
            max_length: 4,
            max_power: 3,
            repetitions: 30,
            shadow_samples: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    pub shift: ShiftConfig,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub potential_g: Option<PotentialConfig>,
    #[serde(default)]
    pub group: Option<GroupConfig>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub pressure: PressureSection,
    #[serde(default)]
    pub count: CountSection,
    #[serde(default)]
    pub equidist: EquidistSection,
    #[serde(default)]
    pub manhattan: ManhattanSection,
    #[serde(default)]
    pub roof_table: RoofTableSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "document".into());
            Error::config(key, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("path", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.numerics;
        if !(n.tol > 0.0) {
            return Err(Error::config("numerics.tol", "must be positive"));
        }
        if n.depth == 0 {
            return Err(Error::config("numerics.depth", "must be at least 1"));
        }
        if !(n.bracket[0] < n.bracket[1]) {
            return Err(Error::config("numerics.bracket", "lower end must be below upper end"));
        }
        if n.threads == Some(0) {
            return Err(Error::config("numerics.threads", "must be at least 1"));
        }
        match &self.shift {
            ShiftConfig::Full { letters } if *letters == 0 => {
                return Err(Error::config("shift.letters", "must be at least 1"))
            }
            ShiftConfig::Matrix { matrix } => {
                matrix_rule(matrix)?;
            }
            ShiftConfig::Countable { truncation, .. } if *truncation == 0 => {
                return Err(Error::config("shift.truncation", "must be at least 1"))
            }
            ShiftConfig::Coding { max_power } if *max_power == 0 => {
                return Err(Error::config("shift.max_power", "must be at least 1"))
            }
            _ => {}
        }
        parse_grid(&self.count.t).map_err(|m| Error::config("count.t", m))?;
        Ok(())
    }

    /// Output format: explicit setting or the command's default.
    pub fn format(&self, command: Command) -> Format {
        self.output.format.unwrap_or(command.default_format())
    }

    pub fn tail_shape(&self) -> Option<Option<TailShape>> {
        match self.numerics.tail {
            TailChoice::None => None,
            TailChoice::Auto => Some(None),
            TailChoice::LogLetter => Some(Some(TailShape::LogLetter)),
            TailChoice::LogLogCorrected => Some(Some(TailShape::LogLogCorrected)),
            TailChoice::ExpLetter => Some(Some(TailShape::ExpLetter)),
        }
    }

    pub fn presentation(&self) -> Result<GroupPresentation> {
        match &self.group {
            None => Ok(default_group()),
            Some(g) => {
                let gens = |list: &[GeneratorConfig], key: &str| -> Result<Vec<Generator>> {
                    list.iter()
                        .enumerate()
                        .map(|(i, c)| {
                            let key = format!("group.{key}[{i}].matrix");
                            let m = &c.matrix;
                            if m.len() != 2 || m.iter().any(|r| r.len() != 2) {
                                return Err(Error::config(key, "expected a 2x2 matrix"));
                            }
                            let map = MobiusMap::new(m[0][0], m[0][1], m[1][0], m[1][1])
                                .map_err(|e| Error::config(key, e.to_string()))?;
                            Ok(Generator {
                                map,
                                repelling: CircleArc::new(c.repelling[0], c.repelling[1]),
                                attracting: CircleArc::new(c.attracting[0], c.attracting[1]),
                            })
                        })
                        .collect()
                };
                Ok(GroupPresentation {
                    hyperbolic: gens(&g.hyperbolic, "hyperbolic")?,
                    parabolic: gens(&g.parabolic, "parabolic")?,
                    basepoint: (g.basepoint[0], g.basepoint[1]),
                })
            }
        }
    }
}

fn matrix_rule(matrix: &[Vec<i64>]) -> Result<Vec<Vec<bool>>> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::config("shift.matrix", "empty matrix"));
    }
    matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != n {
                return Err(Error::config(
                    "shift.matrix",
                    format!("row {i} has {} entries, expected {n}", row.len()),
                ));
            }
            row.iter()
                .map(|&x| match x {
                    0 => Ok(false),
                    1 => Ok(true),
                    _ => Err(Error::config("shift.matrix", format!("entry {x} in row {i} is not 0 or 1"))),
                })
                .collect()
        })
        .collect()
}

/// Inclusive grid `start:step:end`.
pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:step:end, got `{s}`"));
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
    let (start, step, end) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step > 0.0) || !(end >= start) || !start.is_finite() || !end.is_finite() {
        return Err(format!("`{s}` does not describe an increasing grid"));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Shift, truncation and optional coding built from a configuration.
pub struct Setup {
    pub spec: ShiftSpec,
    pub shift: TruncatedShift,
    pub coding: Option<Arc<CodingTable>>,
}

impl Setup {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let (spec, rule, coding) = match &cfg.shift {
            ShiftConfig::Full { letters } => (ShiftSpec::full(*letters), TruncationRule::FirstK(*letters as usize), None),
            ShiftConfig::Matrix { matrix } => {
                let spec = ShiftSpec::from_matrix(matrix_rule(matrix)?)?;
                (spec, TruncationRule::FirstK(matrix.len()), None)
            }
            ShiftConfig::Countable { first, truncation } => {
                (ShiftSpec::countable_full(*first), TruncationRule::FirstK(*truncation), None)
            }
            ShiftConfig::Coding { max_power } => {
                let coding = build_coding(&cfg.presentation()?)?;
                let rule = TruncationRule::FirstK(coding.letters_up_to(*max_power));
                (coding.shift_spec(), rule, Some(Arc::new(coding)))
            }
        };
        let shift = spec.truncate(&rule)?;
        Ok(Setup { spec, shift, coding })
    }

    pub fn potential(&self, cfg: &PotentialConfig, key: &str) -> Result<PotentialRef> {
        let letters = self.shift.len();
        Ok(match cfg {
            PotentialConfig::Letter { values } => {
                if self.spec.alphabet.len() != Some(values.len()) {
                    return Err(Error::config(
                        format!("{key}.values"),
                        format!("expected one value per letter ({letters})"),
                    ));
                }
                Arc::new(LocallyConstant::per_letter(
                    values.iter().enumerate().map(|(i, &v)| (Letter(i as u32), v)),
                ))
            }
            PotentialConfig::Pair { values } => {
                if self.spec.alphabet.len() != Some(values.len()) || values.iter().any(|r| r.len() != values.len()) {
                    return Err(Error::config(
                        format!("{key}.values"),
                        format!("expected a {letters}x{letters} table"),
                    ));
                }
                Arc::new(LocallyConstant::per_pair(values.iter().enumerate().flat_map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(move |(j, &v)| ((Letter(i as u32), Letter(j as u32)), v))
                })))
            }
            PotentialConfig::Constant { value } => Arc::new(Constant(*value)),
            PotentialConfig::LogLetter { scale, offset } => Arc::new(LogFirstLetter {
                scale: *scale,
                offset: *offset,
            }),
            PotentialConfig::Geometric { target, ratio } => {
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::config(format!("{key}.ratio"), "must lie in (0, 1)"));
                }
                Arc::new(GeometricIndicator {
                    target: Letter(*target),
                    ratio: *ratio,
                })
            }
            PotentialConfig::Roof { dim, alpha, omega } => {
                Arc::new(self.roof(*dim, alpha.as_deref(), omega.as_deref(), key)?)
            }
        })
    }

    pub fn roof(&self, dim: usize, alpha: Option<&[f64]>, omega: Option<&[f64]>, key: &str) -> Result<RoofPotential> {
        let coding = self
            .coding
            .clone()
            .ok_or_else(|| Error::config("shift.kind", "roof potentials need kind = \"coding\""))?;
        let phi = roof_functional(dim, alpha, omega, key)?;
        let kind = if dim == 2 {
            RepresentationKind::Sl2
        } else {
            RepresentationKind::SymPower(dim)
        };
        RoofPotential::new(Representation::new(kind, coding)?, phi)
    }

    /// Tail model fitted to the letter uppers of `f` on a countable
    /// alphabet, or `None` when disabled or the alphabet is finite.
    pub fn tail(&self, cfg: &RunConfig, f: &dyn crate::potential::Potential) -> Result<Option<TailModel>> {
        if self.spec.alphabet.is_finite() {
            return Ok(None);
        }
        match cfg.tail_shape() {
            None => Ok(None),
            Some(shape) => {
                let sorted = crate::thermo::sorted_letter_uppers(f, &self.spec, cfg.numerics.letter_count);
                crate::thermo::fit_tail_model(&sorted, shape).map(Some)
            }
        }
    }
}

fn roof_functional(dim: usize, alpha: Option<&[f64]>, omega: Option<&[f64]>, key: &str) -> Result<Functional> {
    if dim < 2 {
        return Err(Error::config(format!("{key}.dim"), "must be at least 2"));
    }
    let check = |v: &[f64], name: &str| {
        if v.len() != dim - 1 {
            Err(Error::config(
                format!("{key}.{name}"),
                format!("expected {} coefficients", dim - 1),
            ))
        } else {
            Ok(())
        }
    };
    match (alpha, omega) {
        (Some(a), None) => {
            check(a, "alpha")?;
            Ok(Functional::from_alpha(a))
        }
        (None, Some(w)) => {
            check(w, "omega")?;
            Ok(Functional::from_omega(w))
        }
        _ => Err(Error::config(key, "give exactly one of `alpha` and `omega`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [shift]
        kind = "full"
        letters = 2

        [potential]
        kind = "letter"
        values = [1.0, 1.4142135623730951]
    "#;

    #[test]
    fn defaults_are_injected() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.numerics.tol, 1e-10);
        assert_eq!(cfg.count.t, "2:2:20");
        assert_eq!(cfg.format(Command::Count), Format::Csv);
        let setup = Setup::build(&cfg).unwrap();
        assert_eq!(setup.shift.len(), 2);
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("2:2:20").unwrap().len(), 10);
        assert_eq!(parse_grid("4:4:24").unwrap(), vec![4.0, 8.0, 12.0, 16.0, 20.0, 24.0]);
        assert_eq!(parse_grid("0.1:0.1:0.3").unwrap().len(), 3);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn malformed_matrix_names_its_key() {
        let text = "[shift]\nkind = \"matrix\"\nmatrix = [[1, 1], [1]]\n";
        match RunConfig::from_toml(text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "shift.matrix"),
            other => panic!("{other:?}"),
        }
        let text = "[shift]\nkind = \"matrix\"\nmatrix = [[1, 2], [1, 0]]\n";
        assert!(matches!(RunConfig::from_toml(text), Err(Error::Config { key, .. }) if key == "shift.matrix"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[numerics]\ntoll = 1e-3\n");
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("toll"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn roof_needs_coding() {
        let text = "[shift]\nkind = \"coding\"\nmax_power = 4\n[potential]\nkind = \"roof\"\ndim = 3\nalpha = [1.0, 1.0]\n";
        let cfg = RunConfig::from_toml(text).unwrap();
        let setup = Setup::build(&cfg).unwrap();
        assert_eq!(setup.shift.len(), 2 + 2 * 4);
        setup.potential(cfg.potential.as_ref().unwrap(), "potential").unwrap();
        let bad = PotentialConfig::Roof {
            dim: 3,
            alpha: Some(vec![1.0]),
            omega: None,
        };
        assert!(setup.potential(&bad, "potential").is_err());
    }
}
