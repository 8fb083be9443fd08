//! Command-line front end: generate statistics, certify entanglement, evaluate
//! witnesses and key fractions, and sweep the standard families into CSV.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use dimcert::certify::{certify_constrained, certify_generic, CertResult};
use dimcert::qkd::{certified_keyrate, noisy_bb84_keyrate, reference_rates, KeyRateResult};
use dimcert::stats::{generate, Family, FamilySpec, ProbTable};
use dimcert::witness::{d2_criterion, d3_criterion, CorrelationMatrix};
use dimcert::OptimOptions;

mod output;
pub mod sweep;

pub use output::{metadata, model_json};
pub use sweep::{cmd_sweep, Figure};

/// Exit status of a run.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl From<dimcert::Error> for CliError {
    fn from(e: dimcert::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "dimcert",
    version,
    about = "Entanglement and key-rate certification for two qubits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the probability table of a family as JSON.
    Gen {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lower-bound the concurrence compatible with a table.
    Certify {
        /// Table JSON written by `gen` (instead of family flags).
        #[arg(long, conflicts_with = "family")]
        input: Option<PathBuf>,
        #[command(flatten)]
        family: OptionalFamilyArgs,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[command(flatten)]
        opts: OptArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the closed-form correlator criterion.
    Witness {
        #[arg(long, conflicts_with = "family")]
        input: Option<PathBuf>,
        #[command(flatten)]
        family: OptionalFamilyArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certified secret key fraction.
    Keyrate {
        /// Protocol: bb84, sixstate or noisy-bb84.
        #[arg(long)]
        family: Family,
        #[arg(long, conflicts_with = "q")]
        w: Option<f64>,
        /// QBER; converted to the visibility of the protocol statistics.
        #[arg(long)]
        q: Option<f64>,
        /// Detector efficiency, noisy-bb84 only.
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        opts: OptArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep a figure's parameter grid into CSV.
    Sweep {
        #[arg(value_enum)]
        figure: Figure,
        /// Grid points per swept axis.
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[command(flatten)]
        opts: OptArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Constrained for bb84 and six-state statistics, generic otherwise.
    Auto,
    Constrained,
    Generic,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    #[arg(long)]
    pub family: Family,
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Detector efficiency of both parties.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub u: Option<f64>,
    #[arg(long)]
    pub v: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OptionalFamilyArgs {
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub u: Option<f64>,
    #[arg(long)]
    pub v: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OptArgs {
    #[arg(long, default_value_t = OptimOptions::default().n_starts)]
    pub starts: usize,
    #[arg(long, env = "DIMCERT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, default_value_t = OptimOptions::default().max_evals)]
    pub max_evals: usize,
}

impl OptArgs {
    pub fn options(&self) -> CliResult<OptimOptions> {
        let opts = OptimOptions::default()
            .with_starts(self.starts)
            .with_seed(self.seed)
            .with_threads(self.threads)
            .with_max_evals(self.max_evals);
        opts.validate()?;
        Ok(opts)
    }
}

impl FamilyArgs {
    pub fn spec(&self) -> CliResult<FamilySpec> {
        spec_from(self.family, self.w, self.theta, self.eps, self.u, self.v)
    }
}

impl OptionalFamilyArgs {
    fn spec(&self) -> CliResult<Option<FamilySpec>> {
        self.family
            .map(|f| spec_from(f, self.w, self.theta, self.eps, self.u, self.v))
            .transpose()
    }
}

fn spec_from(
    family: Family,
    w: Option<f64>,
    theta: Option<f64>,
    eps: Option<f64>,
    u: Option<f64>,
    v: Option<f64>,
) -> CliResult<FamilySpec> {
    let base = FamilySpec::new(family);
    let eps = eps.unwrap_or(base.eps_a);
    let spec = FamilySpec {
        w: w.unwrap_or(base.w),
        theta: theta.unwrap_or(base.theta),
        eps_a: eps,
        eps_b: eps,
        u: u.unwrap_or(base.u),
        v: v.unwrap_or(base.v),
        family,
    };
    spec.validate()?;
    Ok(spec)
}

/// A validated subcommand with its options.
#[derive(Debug, Clone)]
pub enum RunConfig {
    Gen {
        spec: FamilySpec,
        out: Option<PathBuf>,
    },
    Certify {
        source: Source,
        mode: Mode,
        opts: OptimOptions,
        out: Option<PathBuf>,
    },
    Witness {
        source: Source,
        out: Option<PathBuf>,
    },
    Keyrate {
        protocol: Family,
        w: f64,
        eps: Option<f64>,
        opts: OptimOptions,
        out: Option<PathBuf>,
    },
    Sweep {
        figure: Figure,
        points: usize,
        opts: OptimOptions,
        out: Option<PathBuf>,
    },
}

/// Where the statistics come from.
#[derive(Debug, Clone)]
pub enum Source {
    Family(FamilySpec),
    /// A table file, with the family recorded by `gen` when present.
    File {
        table: ProbTable,
        spec: Option<FamilySpec>,
    },
}

impl Source {
    fn resolve(input: Option<PathBuf>, family: &OptionalFamilyArgs) -> CliResult<Self> {
        match (input, family.spec()?) {
            (Some(path), _) => read_table(&path),
            (None, Some(spec)) => Ok(Source::Family(spec)),
            (None, None) => Err(CliError::Usage("give either --input or --family".into())),
        }
    }

    pub fn table(&self) -> CliResult<ProbTable> {
        match self {
            Source::Family(spec) => Ok(generate(spec)?),
            Source::File { table, .. } => Ok(table.clone()),
        }
    }

    pub fn spec(&self) -> Option<FamilySpec> {
        match self {
            Source::Family(spec) => Some(*spec),
            Source::File { spec, .. } => *spec,
        }
    }
}

#[derive(Deserialize)]
struct TableFile {
    #[serde(flatten)]
    table: ProbTable,
    family: Option<FamilySpec>,
}

/// Reads a table file; a recorded family is kept only if it regenerates the table.
pub fn read_table(path: &Path) -> CliResult<Source> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let file: TableFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{} is not a table file: {e}", path.display())))?;
    let spec = file.family.filter(|spec| {
        generate(spec)
            .is_ok_and(|t| t.same_shape(&file.table) && t.max_abs_diff(&file.table) == 0.0)
    });
    Ok(Source::File {
        table: file.table,
        spec,
    })
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> CliResult<Self> {
        Ok(match cli.command {
            Command::Gen { family, out } => RunConfig::Gen {
                spec: family.spec()?,
                out,
            },
            Command::Certify {
                input,
                family,
                mode,
                opts,
                out,
            } => RunConfig::Certify {
                source: Source::resolve(input, &family)?,
                mode,
                opts: opts.options()?,
                out,
            },
            Command::Witness { input, family, out } => RunConfig::Witness {
                source: Source::resolve(input, &family)?,
                out,
            },
            Command::Keyrate {
                family,
                w,
                q,
                eps,
                opts,
                out,
            } => {
                let w = keyrate_visibility(family, w, q, eps)?;
                RunConfig::Keyrate {
                    protocol: family,
                    w,
                    eps,
                    opts: opts.options()?,
                    out,
                }
            }
            Command::Sweep {
                figure,
                points,
                opts,
                out,
            } => {
                if points < 2 {
                    return Err(CliError::Usage("--points must be at least 2".into()));
                }
                RunConfig::Sweep {
                    figure,
                    points,
                    opts: opts.options()?,
                    out,
                }
            }
        })
    }
}

/// Visibility from `--w`, or from `--q` through the QBER of the protocol statistics.
fn keyrate_visibility(
    protocol: Family,
    w: Option<f64>,
    q: Option<f64>,
    eps: Option<f64>,
) -> CliResult<f64> {
    let w = match (protocol, w, q) {
        (_, Some(w), None) => w,
        (Family::Bb84 | Family::SixState, None, Some(q)) => 1.0 - 2.0 * q,
        (Family::NoisyBb84 | Family::NoisyBb84Binarized, None, Some(q)) => {
            // Q = ε²(1−W)/2 + ε(1−ε)
            let e = eps.unwrap_or(1.0);
            1.0 - 2.0 * (q - e * (1.0 - e)) / (e * e)
        }
        (_, None, None) => return Err(CliError::Usage("give --w or --q".into())),
        _ => {
            return Err(CliError::Usage(format!(
                "key rates are not defined for {protocol}"
            )))
        }
    };
    if !(0.0..=1.0).contains(&w) {
        return Err(CliError::Input(format!("visibility {w} outside [0, 1]")));
    }
    Ok(w)
}

pub fn cmd_gen(spec: &FamilySpec) -> CliResult<Value> {
    let table = generate(spec)?;
    let mut v = serde_json::to_value(&table).expect("tables serialize");
    v["family"] = serde_json::to_value(spec).expect("specs serialize");
    v["metadata"] = metadata(None);
    Ok(v)
}

fn use_constrained(mode: Mode, spec: Option<FamilySpec>) -> CliResult<Option<FamilySpec>> {
    let reduced = spec.filter(|s| matches!(s.family, Family::Bb84 | Family::SixState));
    match mode {
        Mode::Generic => Ok(None),
        Mode::Auto => Ok(reduced),
        Mode::Constrained => reduced.map(Some).ok_or_else(|| {
            CliError::Input(
                "constrained mode needs bb84 or six-state statistics from a known family".into(),
            )
        }),
    }
}

pub fn cmd_certify(source: &Source, mode: Mode, opts: &OptimOptions) -> CliResult<Value> {
    let result: CertResult = match use_constrained(mode, source.spec())? {
        Some(spec) => certify_constrained(spec.family, spec.w, opts)?,
        None => certify_generic(&source.table()?, opts)?,
    };
    Ok(json!({
        "bound": result.bound,
        "status": result.status,
        "residual": result.residual,
        "best_start": result.best_start,
        "model": model_json(&result.model),
        "metadata": metadata(Some(opts)),
    }))
}

pub fn cmd_witness(source: &Source) -> CliResult<Value> {
    let table = source.table()?;
    let d = CorrelationMatrix::from_table(&table)?;
    let (name, res) = match table.nx() {
        3 => ("d3", d3_criterion(&table)?),
        _ => ("d2", d2_criterion(&table)?),
    };
    let rows: Vec<Vec<f64>> = d
        .matrix()
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    Ok(json!({
        "criterion": name,
        "certified": res.certified,
        "margin": res.margin,
        "correlators": rows,
        "singular_values": d.singular_values(),
        "metadata": metadata(None),
    }))
}

pub fn cmd_keyrate(
    protocol: Family,
    w: f64,
    eps: Option<f64>,
    opts: &OptimOptions,
) -> CliResult<Value> {
    let result: KeyRateResult = match protocol {
        Family::Bb84 | Family::SixState => {
            if eps.is_some() {
                return Err(CliError::Usage("--eps applies to noisy-bb84 only".into()));
            }
            certified_keyrate(protocol, w, opts)?
        }
        Family::NoisyBb84 | Family::NoisyBb84Binarized => {
            noisy_bb84_keyrate(w, eps.unwrap_or(1.0), opts)?
        }
        other => {
            return Err(CliError::Input(format!(
                "key rates are not defined for {other}"
            )))
        }
    };
    let refs = reference_rates(result.q.clamp(0.0, 0.5))?;
    Ok(json!({
        "r": result.r,
        "r_raw": result.r_raw,
        "Q": result.q,
        "holevo": result.holevo,
        "status": if result.feasible { "FEASIBLE" } else { "INFEASIBLE_WITHIN_TOL" },
        "residual": result.residual,
        "best_start": result.best_start,
        "model": model_json(&result.model),
        "detector_model": result.noisy_params,
        "reference_rates": refs,
        "eve_model": result.caveat,
        "metadata": metadata(Some(opts)),
    }))
}

/// Writes `text` to `out`, or to stdout without a path.
pub fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("cannot write output: {e}"))),
    }
}

fn emit_json(v: &Value, out: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(v).expect("values serialize");
    text.push('\n');
    emit(&text, out)
}

pub fn execute(config: &RunConfig) -> CliResult<()> {
    match config {
        RunConfig::Gen { spec, out } => emit_json(&cmd_gen(spec)?, out.as_deref()),
        RunConfig::Certify {
            source,
            mode,
            opts,
            out,
        } => emit_json(&cmd_certify(source, *mode, opts)?, out.as_deref()),
        RunConfig::Witness { source, out } => emit_json(&cmd_witness(source)?, out.as_deref()),
        RunConfig::Keyrate {
            protocol,
            w,
            eps,
            opts,
            out,
        } => emit_json(&cmd_keyrate(*protocol, *w, *eps, opts)?, out.as_deref()),
        RunConfig::Sweep {
            figure,
            points,
            opts,
            out,
        } => {
            let csv = cmd_sweep(*figure, *points, opts)?;
            emit(&csv, out.as_deref())?;
            let meta =
                json!({ "figure": figure, "points": points, "metadata": metadata(Some(opts)) });
            match out {
                Some(path) => emit_json(&meta, Some(&sidecar_path(path))),
                None => {
                    eprintln!(
                        "{}",
                        serde_json::to_string(&meta).expect("values serialize")
                    );
                    Ok(())
                }
            }
        }
    }
}

/// Metadata file written next to a sweep CSV: `fig2.csv` → `fig2.csv.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Parses `args` (program name first), runs the command and maps failures to
/// exit codes: 1 for usage errors, 2 for invalid input.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match RunConfig::from_cli(cli).and_then(|config| execute(&config)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
