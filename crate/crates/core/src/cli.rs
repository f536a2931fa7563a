//! Command-line front end: one command per computation, reports with a
//! provenance block, exit codes by error class.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_grid, Command, Format, PotentialConfig, RunConfig, Setup};
use crate::counting::{count_orbits, equidistribution_ratio, CountOptions};
use crate::error::{Error, Result};
use crate::fuchsian::{periodic_check, CodingLetter, RoofPotential};
use crate::manhattan::{convexity_check, intersection, trace_curve, ManhattanOptions, Rigidity};
use crate::potential::{scaled, Potential, PotentialRef};
use crate::shift::{for_each_fix, CutoffNote};
use crate::thermo::{
    critical_exponent, entropy_gap_report, pressure_periodic, solve_delta, CriticalExponent, DeltaSolution,
    GapOptions, PressureFamily, TailModel,
};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "MARKOV_THERMO_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum CliCommand {
    /// Use the `command` key of the configuration.
    Run,
    Pressure,
    Delta,
    Gap,
    Count,
    Equidist,
    Manhattan,
    Intersect,
    RoofTable,
}

#[derive(Debug, Parser)]
#[command(name = "markov-thermo", version, about = "Thermodynamic formalism for countable Markov shifts")]
struct Cli {
    #[arg(value_enum)]
    command: CliCommand,
    /// TOML configuration file.
    config: PathBuf,
    /// Output file (overrides `output.path`; default stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => x.to_string(),
            Cell::Int(x) => x.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}
impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Truncation {
    pub letters: usize,
    pub cutoff: CutoffNote,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub truncation: Truncation,
    /// The configuration with every default filled in.
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub provenance: Provenance,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub details: serde_json::Value,
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = String::new();
                let prov = serde_json::to_string(&self.provenance).expect("provenance serializes");
                writeln!(s, "# provenance {prov}").unwrap();
                if !self.details.is_null() {
                    writeln!(s, "# details {}", self.details).unwrap();
                }
                writeln!(s, "{}", self.columns.join(",")).unwrap();
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    writeln!(s, "{}", cells.join(",")).unwrap();
                }
                s
            }
        }
    }

    /// Column `name` of every row.
    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

fn thread_count(cfg: &RunConfig) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::config(THREADS_ENV, format!("`{v}` is not a positive integer")));
    }
    Ok(cfg
        .numerics
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// Runs `command` on a validated configuration.
pub fn run(cfg: &RunConfig, command: Command) -> Result<Report> {
    let threads = thread_count(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        let setup = Setup::build(cfg)?;
        let mut resolved = cfg.clone();
        resolved.command = Some(command);
        let provenance = Provenance {
            tool: "markov-thermo",
            version: env!("CARGO_PKG_VERSION"),
            command: command.name(),
            seed: cfg.seed,
            threads,
            truncation: Truncation {
                letters: setup.shift.len(),
                cutoff: setup.shift.cutoff.clone(),
            },
            config: resolved,
        };
        let (columns, rows, details) = dispatch(cfg, command, &setup)?;
        Ok(Report {
            provenance,
            columns,
            rows,
            details,
        })
    })
}

type Body = (Vec<&'static str>, Vec<Vec<Cell>>, serde_json::Value);

fn potential(cfg: &RunConfig, setup: &Setup, which: &str) -> Result<PotentialRef> {
    let section = if which == "potential" {
        cfg.potential.as_ref()
    } else {
        cfg.potential_g.as_ref()
    };
    let pc = section.ok_or_else(|| Error::config(which, "section required by this command"))?;
    setup.potential(pc, which)
}

fn count_options(cfg: &RunConfig) -> CountOptions {
    CountOptions {
        eval_depth: cfg.numerics.eval_depth,
        node_limit: cfg.numerics.node_limit,
    }
}

/// Critical exponent, tail model and Bowen root of `f`.
fn delta_of(
    cfg: &RunConfig,
    setup: &Setup,
    f: &dyn Potential,
) -> Result<(DeltaSolution, CriticalExponent, Option<TailModel>)> {
    let tail = setup.tail(cfg, f)?;
    let d_f = if setup.spec.alphabet.is_finite() {
        CriticalExponent::FiniteAlphabet
    } else {
        let b = cfg.numerics.bracket;
        critical_exponent(f, &setup.spec, cfg.numerics.letter_count, (b[0], b[1]), tail)?.d_f
    };
    let sol = solve_delta(f, &setup.shift, d_f, cfg.numerics.depth, cfg.numerics.tol, tail)?;
    Ok((sol, d_f, tail))
}

fn dispatch(cfg: &RunConfig, command: Command, setup: &Setup) -> Result<Body> {
    match command {
        Command::Pressure => pressure(cfg, setup),
        Command::Delta => {
            let f = potential(cfg, setup, "potential")?;
            let (sol, d_f, tail) = delta_of(cfg, setup, f.as_ref())?;
            Ok((
                vec!["delta", "pressure_at_delta", "d_f", "evaluations"],
                vec![vec![
                    sol.delta.into(),
                    sol.pressure_at_delta.into(),
                    d_f.value().unwrap_or(f64::NAN).into(),
                    sol.evaluations.into(),
                ]],
                json!({ "solution": sol, "d_f": d_f, "tail": tail }),
            ))
        }
        Command::Gap => {
            let f = potential(cfg, setup, "potential")?;
            let b = cfg.numerics.bracket;
            let options = GapOptions {
                letter_count: cfg.numerics.letter_count,
                bracket: (b[0], b[1]),
                depth: cfg.numerics.depth,
                tol: cfg.numerics.tol,
                tail: setup.tail(cfg, f.as_ref())?,
            };
            let r = entropy_gap_report(f.as_ref(), &setup.spec, &setup.shift, &options);
            Ok((
                vec!["d_f", "diverges_at_d", "delta", "gap"],
                vec![vec![
                    r.d_f.value().unwrap_or(f64::NAN).into(),
                    r.diverges_at_d.into(),
                    r.delta.unwrap_or(f64::NAN).into(),
                    serde_json::to_value(r.gap)
                        .ok()
                        .and_then(|v| v.as_str().map(String::from))
                        .unwrap_or_default()
                        .into(),
                ]],
                serde_json::to_value(&r).unwrap_or_default(),
            ))
        }
        Command::Count => {
            let f = potential(cfg, setup, "potential")?;
            let grid = parse_grid(&cfg.count.t).map_err(|m| Error::config("count.t", m))?;
            let (sol, _, _) = delta_of(cfg, setup, f.as_ref())?;
            let records = count_orbits(f.as_ref(), &setup.shift, &grid, sol.delta, &count_options(cfg))?;
            let rows = records
                .iter()
                .map(|r| {
                    vec![
                        r.t.into(),
                        r.m.into(),
                        r.r.into(),
                        r.predicted.into(),
                        r.ratio_m.into(),
                        r.ratio_r.into(),
                        r.nodes.into(),
                    ]
                })
                .collect();
            let sandwich = records.iter().all(|r| r.sandwich_holds());
            Ok((
                vec!["t", "M", "R", "predicted", "ratio_M", "ratio_R", "nodes"],
                rows,
                json!({ "delta": sol.delta, "sandwich_holds": sandwich }),
            ))
        }
        Command::Equidist => {
            let f = potential(cfg, setup, "potential")?;
            let g = potential(cfg, setup, "potential_g")?;
            let (sol, _, _) = delta_of(cfg, setup, f.as_ref())?;
            let t = cfg.equidist.t;
            let r = equidistribution_ratio(f.as_ref(), g.as_ref(), &setup.shift, t, sol.delta, &count_options(cfg))?;
            Ok((
                vec!["t", "lhs", "predicted", "ratio", "mean_f", "mean_g", "M"],
                vec![vec![
                    t.into(),
                    r.lhs.into(),
                    r.predicted.into(),
                    (r.lhs / r.predicted).into(),
                    r.mean_f.into(),
                    r.mean_g.into(),
                    r.m.into(),
                ]],
                json!({ "delta": sol.delta }),
            ))
        }
        Command::Manhattan => {
            let (f, g, options) = manhattan_inputs(cfg, setup)?;
            let points = trace_curve(f, g, &setup.shift, options)?;
            let convexity = convexity_check(&points, 1e-9);
            let flagged: Vec<_> = points.iter().filter_map(|p| p.flag.clone()).collect();
            let rows = points
                .iter()
                .map(|p| vec![p.theta.into(), p.a.into(), p.b.into(), p.slope.into(), p.residual.into()])
                .collect();
            Ok((
                vec!["theta", "a", "b", "slope", "residual"],
                rows,
                json!({ "convexity": convexity, "flagged_rays": flagged }),
            ))
        }
        Command::Intersect => {
            let (f, g, options) = manhattan_inputs(cfg, setup)?;
            let r = intersection(f, g, &setup.shift, &options)?;
            Ok((
                vec!["I", "J", "delta_f", "delta_g", "rigid", "proportional_periods"],
                vec![vec![
                    r.i.into(),
                    r.j.into(),
                    r.delta_f.into(),
                    r.delta_g.into(),
                    matches!(r.rigidity, Rigidity::Rigid).into(),
                    r.proportional_periods.into(),
                ]],
                serde_json::to_value(&r).unwrap_or_default(),
            ))
        }
        Command::RoofTable => roof_table(cfg, setup),
    }
}

fn manhattan_inputs(cfg: &RunConfig, setup: &Setup) -> Result<(PotentialRef, PotentialRef, ManhattanOptions)> {
    let f = potential(cfg, setup, "potential")?;
    let g = potential(cfg, setup, "potential_g")?;
    let b = cfg.numerics.bracket;
    let d = |p: &PotentialRef| -> Result<CriticalExponent> {
        if setup.spec.alphabet.is_finite() {
            Ok(CriticalExponent::FiniteAlphabet)
        } else {
            let tail = setup.tail(cfg, p.as_ref())?;
            Ok(critical_exponent(p.as_ref(), &setup.spec, cfg.numerics.letter_count, (b[0], b[1]), tail)?.d_f)
        }
    };
    let options = ManhattanOptions {
        rays: cfg.manhattan.rays,
        depth: cfg.numerics.depth,
        tol: cfg.numerics.tol,
        d_f: d(&f)?,
        d_g: d(&g)?,
        enlarged: cfg.manhattan.enlarged,
    };
    Ok((f, g, options))
}

fn pressure(cfg: &RunConfig, setup: &Setup) -> Result<Body> {
    let f = potential(cfg, setup, "potential")?;
    let c = cfg.pressure.coefficient;
    let tail = setup.tail(cfg, f.as_ref())?;
    let family = PressureFamily::new(&setup.shift, &[f.as_ref()], cfg.numerics.depth, tail, cfg.numerics.tol)?;
    let spectral = family.pressure(&[c])?;
    let a_index = cfg.pressure.reference_letter;
    if a_index >= setup.shift.len() {
        return Err(Error::config("pressure.reference_letter", "outside the truncation"));
    }
    let a = setup.shift.letter(a_index);
    // Keep the periodic enumeration affordable on large truncations.
    let n_max = (1..=cfg.pressure.n_max)
        .take_while(|&n| setup.shift.count_words(n) <= 5_000_000)
        .last()
        .unwrap_or(1);
    let g = scaled(c, f.clone());
    let depth = f.locally_constant_depth().unwrap_or(cfg.numerics.eval_depth).max(1);
    let periodic = pressure_periodic(&setup.shift, g.as_ref(), a, n_max, depth)?;
    Ok((
        vec!["spectral_pressure", "periodic_ratio", "periodic_cesaro", "n_max"],
        vec![vec![
            spectral.into(),
            periodic.ratio_estimate.into(),
            periodic.cesaro.into(),
            n_max.into(),
        ]],
        json!({ "periodic": periodic, "tail": tail }),
    ))
}

fn roof_table(cfg: &RunConfig, setup: &Setup) -> Result<Body> {
    let coding = setup
        .coding
        .clone()
        .ok_or_else(|| Error::config("shift.kind", "roof-table needs kind = \"coding\""))?;
    let (dim, alpha, omega) = match &cfg.potential {
        Some(PotentialConfig::Roof { dim, alpha, omega }) => (*dim, alpha.clone(), omega.clone()),
        _ => return Err(Error::config("potential.kind", "roof-table needs a roof potential")),
    };
    let tau: RoofPotential = setup.roof(dim, alpha.as_deref(), omega.as_deref(), "potential")?;
    let sec = &cfg.roof_table;
    let table_shift = coding.truncated(sec.max_power)?;
    let mut rows = Vec::new();
    let mut failure = None;
    for n in 1..=sec.max_length {
        for_each_fix(&table_shift, n, None, |idx| {
            if failure.is_some() {
                return;
            }
            let word: Vec<CodingLetter> = idx
                .iter()
                .map(|&i| coding.decode(table_shift.letter(i as usize)))
                .collect();
            match periodic_check(&tau, &word, sec.repetitions) {
                Ok(c) => {
                    let slack = 1e-9 * (1.0 + c.expected.abs());
                    let label: Vec<String> = word.iter().map(|c| c.to_string()).collect();
                    rows.push(vec![
                        label.join(" ").into(),
                        n.into(),
                        c.birkhoff.into(),
                        c.expected.into(),
                        c.certified_error.into(),
                        c.holds(slack).into(),
                    ]);
                }
                Err(e) => failure = Some(e),
            }
        })?;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    // Shadow constant from random admissible words.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let adj = table_shift.adjacency();
    let words: Vec<Vec<CodingLetter>> = (0..sec.shadow_samples)
        .map(|_| {
            let mut i = rng.gen_range(0..table_shift.len());
            let mut w = vec![coding.decode(table_shift.letter(i))];
            for _ in 1..12 {
                let next: Vec<usize> = adj.successors(i).collect();
                i = next[rng.gen_range(0..next.len())];
                w.push(coding.decode(table_shift.letter(i)));
            }
            w
        })
        .collect();
    let b = cfg.numerics.bracket;
    let d = critical_exponent(&tau, &setup.spec, cfg.numerics.letter_count, (b[0], b[1]), None)?;
    let alpha_sum = alpha.map(|a| a.iter().sum::<f64>());
    Ok((
        vec!["word", "length", "birkhoff", "expected", "certified_error", "holds"],
        rows,
        json!({
            "multiplicity_bound": coding.multiplicity_bound(),
            "shadow_constant": coding.shadow_constant(&words),
            "relation_defect": coding.relation_defect(sec.max_power),
            "holder": tau.holder(),
            "critical_exponent": d.d_f,
            "gap_formula": alpha_sum.map(|s| 1.0 / (2.0 * s)),
        }),
    ))
}

/// Parses arguments, runs, writes the report and returns the exit code.
pub fn main_with_args(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::load(&cli.config)?;
    let command = match cli.command {
        CliCommand::Run => cfg
            .command
            .ok_or_else(|| Error::config("command", "missing; set it or name a command on the command line"))?,
        CliCommand::Pressure => Command::Pressure,
        CliCommand::Delta => Command::Delta,
        CliCommand::Gap => Command::Gap,
        CliCommand::Count => Command::Count,
        CliCommand::Equidist => Command::Equidist,
        CliCommand::Manhattan => Command::Manhattan,
        CliCommand::Intersect => Command::Intersect,
        CliCommand::RoofTable => Command::RoofTable,
    };
    let report = run(&cfg, command)?;
    let text = report.render(cli.format.unwrap_or(cfg.format(command)));
    let path = cli.output.clone().or_else(|| cfg.output.path.clone().map(PathBuf::from));
    match path {
        Some(p) => std::fs::write(&p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
