//! Command-line front end: network file ingestion, dispatch, report output.
//!
//! Exit codes: 0 when every reported inequality holds, 1 when one fails
//! beyond tolerance, 2 for usage, I/O and parse errors, 3 when a well-formed
//! network file describes an invalid network.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::electric::{
    dissipated_power, effective_resistance, kcl_residual, kvl_residual, thomson_flow, ResistiveNetwork,
};
use crate::gff::build_free_field;
use crate::graph::{Multigraph, VertexId};
use crate::verify::{
    appendix_check, check_concavity_segment, check_monotonicity, check_scaling, check_superadditivity,
    entropy_chain, melvin_chain, monte_carlo_variance_check, run_suite, summarize_suite, AppendixInstance,
    Relation, SuiteConfig, Unit, VerificationReport, DEFAULT_TOLERANCE,
};

/// Absolute bound on KCL/KVL residuals reported by `thomson`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Environment variable overriding the default `suite` seed.
pub const SEED_ENV: &str = "GFFRESIST_SEED";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

/// On-disk network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub u: String,
    pub v: String,
    pub r: f64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },

    #[error("{path}: invalid network: {source}")]
    Validation { path: String, source: crate::Error },

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Library(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => EXIT_INVALID,
            _ => EXIT_USAGE,
        }
    }
}

impl NetworkFile {
    pub fn parse_str(text: &str, origin: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_network(&self, origin: &str) -> Result<ResistiveNetwork, CliError> {
        let invalid = |source| CliError::Validation { path: origin.to_string(), source };
        let pairs: Vec<(&str, &str)> = self.edges.iter().map(|e| (e.u.as_str(), e.v.as_str())).collect();
        let graph = Multigraph::new(&self.vertices, &pairs).map_err(invalid)?;
        let r = self.edges.iter().map(|e| e.r).collect();
        ResistiveNetwork::new(graph, r).map_err(invalid)
    }

    /// Canonical form of a network: edges in id order, written tail to head.
    pub fn from_network(n: &ResistiveNetwork) -> Self {
        let g = n.graph();
        NetworkFile {
            vertices: g.vertex_names().to_vec(),
            edges: g
                .edges()
                .iter()
                .zip(n.resistances())
                .map(|(e, &r)| EdgeRecord {
                    u: g.vertex_name(e.tail).to_string(),
                    v: g.vertex_name(e.head).to_string(),
                    r,
                })
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("network files always serialize")
    }
}

/// Reads and validates a network file.
pub fn parse_network(path: &Path) -> Result<ResistiveNetwork, CliError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: origin.clone(), source })?;
    NetworkFile::parse_str(&text, &origin)?.to_network(&origin)
}

#[derive(Debug, Parser)]
#[command(name = "gffresist", version, about = "Effective resistance by three routes, with machine-checked concavity inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Effective resistance between two vertices.
    Reff(PairArgs),
    /// Free-field variance of the potential difference next to Reff.
    Gff(PairArgs),
    /// Thomson flow table, power and Kirchhoff residuals.
    Thomson(PairArgs),
    /// Run one verification check.
    Verify(VerifyArgs),
    /// Run the randomized property battery.
    Suite(SuiteArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Report entropies in bits instead of nats.
    #[arg(long)]
    bits: bool,
}

#[derive(Debug, Args)]
struct PairArgs {
    /// Network file (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Terminal pair as `a,b` vertex names.
    #[arg(long)]
    pair: String,
    /// Tolerance on report margins.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Superadd,
    Melvin,
    Entropy,
    Concavity,
    Scaling,
    Monotone,
    Appendix,
    Mc,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Which check to run.
    #[arg(value_enum)]
    check: Check,
    /// Network file with resistances R.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Network file with resistances Rbar on the same topology.
    #[arg(long)]
    bar_network: Option<PathBuf>,
    /// Terminal pair as `a,b` vertex names.
    #[arg(long)]
    pair: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Grid points along the concavity segment.
    #[arg(long, default_value_t = 21)]
    grid: usize,
    /// Seed for sampling and random instances.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Scale factor for `scaling`.
    #[arg(long, default_value_t = 2.0)]
    factor: f64,
    /// Edge id bumped by `monotone`.
    #[arg(long, default_value_t = 0)]
    edge: usize,
    /// Resistance increase for `monotone`.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Maximum dimension of the random `appendix` instance.
    #[arg(long, default_value_t = 6)]
    dim: usize,
    /// Run `appendix` on the fixed correlated example instead of a random one.
    #[arg(long)]
    example: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    /// Suite seed (defaults to $GFFRESIST_SEED, then a fixed value).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, default_value_t = 21)]
    grid: usize,
    #[command(flatten)]
    output: OutputArgs,
}

/// Parses `argv` (program name first), runs the command and writes the
/// report to `out`, diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok((report, output)) => {
            let report = if output.bits { report.in_bits() } else { report };
            let text = match output.format {
                Format::Text => report.render_text(),
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&report.to_json()).expect("reports serialize");
                    s.push('\n');
                    s
                }
            };
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return EXIT_USAGE;
            }
            if report.passed() {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_pair(g: &Multigraph, pair: &str) -> Result<(VertexId, VertexId), CliError> {
    let (a, b) = pair
        .split_once(',')
        .ok_or_else(|| CliError::Usage(format!("--pair expects `a,b`, got `{pair}`")))?;
    let find = |name: &str| {
        let name = name.trim();
        g.vertex_index(name)
            .ok_or_else(|| CliError::Usage(format!("unknown vertex `{name}` in --pair")))
    };
    let (a, b) = (find(a)?, find(b)?);
    if a == b {
        return Err(CliError::Usage("--pair endpoints must be distinct".into()));
    }
    Ok((a, b))
}

/// Loads the bar network and returns its resistances in the edge order of
/// `base`, rejecting any difference in topology.
fn aligned_bar_resistances(base: &ResistiveNetwork, path: &Path) -> Result<Vec<f64>, CliError> {
    let bar = parse_network(path)?;
    let map = base
        .graph()
        .align_edges(bar.graph())
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(map.iter().map(|&j| bar.resistance(j)).collect())
}

fn dispatch(command: Command) -> Result<(VerificationReport, OutputArgs), CliError> {
    match command {
        Command::Reff(args) => {
            let (n, a, b) = load_pair(&args.network, &args.pair)?;
            Ok((reff_report(&n, a, b, args.tol)?, args.output))
        }
        Command::Gff(args) => {
            let (n, a, b) = load_pair(&args.network, &args.pair)?;
            Ok((gff_report(&n, a, b, args.tol)?, args.output))
        }
        Command::Thomson(args) => {
            let (n, a, b) = load_pair(&args.network, &args.pair)?;
            Ok((thomson_report(&n, a, b, args.tol)?, args.output))
        }
        Command::Verify(args) => {
            let report = verify(&args)?;
            Ok((report, args.output))
        }
        Command::Suite(args) => {
            let seed = match args.seed {
                Some(s) => s,
                None => match std::env::var(SEED_ENV) {
                    Ok(v) => v
                        .trim()
                        .parse()
                        .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))?,
                    Err(_) => SuiteConfig::default().seed,
                },
            };
            let cfg = SuiteConfig { seed, instances: args.instances, tolerance: args.tol, grid_points: args.grid };
            let outcomes = run_suite(&cfg)?;
            Ok((summarize_suite(&cfg, &outcomes), args.output))
        }
    }
}

fn load_pair(path: &Path, pair: &str) -> Result<(ResistiveNetwork, VertexId, VertexId), CliError> {
    let n = parse_network(path)?;
    let (a, b) = resolve_pair(n.graph(), pair)?;
    Ok((n, a, b))
}

fn verify(args: &VerifyArgs) -> Result<VerificationReport, CliError> {
    if args.check == Check::Appendix {
        let inst = if args.example {
            correlated_example()
        } else {
            if args.dim == 0 {
                return Err(CliError::Usage("--dim must be at least 1".into()));
            }
            AppendixInstance::random(args.dim, args.seed)
        };
        return Ok(appendix_check(&inst, args.tol, args.seed)?);
    }
    let path = args
        .network
        .as_deref()
        .ok_or_else(|| CliError::Usage("--network is required".into()))?;
    let pair = args
        .pair
        .as_deref()
        .ok_or_else(|| CliError::Usage("--pair is required".into()))?;
    let (n, a, b) = load_pair(path, pair)?;
    let (g, r, tol) = (n.graph(), n.resistances(), args.tol);
    let bar = || -> Result<Vec<f64>, CliError> {
        let p = args
            .bar_network
            .as_deref()
            .ok_or_else(|| CliError::Usage("this check needs --bar-network".into()))?;
        aligned_bar_resistances(&n, p)
    };
    let report = match args.check {
        Check::Superadd => check_superadditivity(g, r, &bar()?, a, b, tol)?,
        Check::Melvin => melvin_chain(g, r, &bar()?, a, b, tol)?,
        Check::Entropy => entropy_chain(g, r, &bar()?, a, b, tol)?,
        Check::Concavity => check_concavity_segment(g, r, &bar()?, args.grid, a, b, tol)?,
        Check::Scaling => check_scaling(g, r, args.factor, a, b, tol)?,
        Check::Monotone => check_monotonicity(g, r, args.edge, args.delta, a, b, tol)?,
        Check::Mc => monte_carlo_variance_check(g, r, a, b, args.samples, args.seed)?,
        Check::Appendix => unreachable!("handled above"),
    };
    Ok(report)
}

/// `W ~ N(0, [[1, 1/2], [1/2, 1]])`, `Wbar ~ N(0, I)`, `Vhat = W_1 + Wbar_1`,
/// conditioning on the second coordinate.
pub fn correlated_example() -> AppendixInstance {
    use nalgebra::{DMatrix, DVector};
    AppendixInstance {
        w_covariance: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
        w_bar_covariance: DMatrix::identity(2, 2),
        v_from_w: DVector::from_column_slice(&[1.0, 0.0]),
        v_from_w_bar: DVector::from_column_slice(&[1.0, 0.0]),
        conditioning: DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
    }
}

pub fn reff_report(n: &ResistiveNetwork, a: VertexId, b: VertexId, tol: f64) -> crate::Result<VerificationReport> {
    let reff = effective_resistance(n, a, b)?;
    let power = dissipated_power(n, &thomson_flow(n, a, b)?)?;
    let mut rep = VerificationReport::new("effective_resistance", tol);
    rep.quantity("R_eff", reff, Unit::Ohm)
        .quantity("power of unit Thomson flow", power, Unit::Watt)
        .equal("power of unit Thomson flow", "R_eff", reff);
    Ok(rep)
}

pub fn gff_report(n: &ResistiveNetwork, a: VertexId, b: VertexId, tol: f64) -> crate::Result<VerificationReport> {
    let reff = effective_resistance(n, a, b)?;
    let field = build_free_field(n, 0)?;
    let var = field.potential_difference_variance(a, b)?;
    let mut rep = VerificationReport::new("gff_variance", tol);
    rep.quantity("Var(U_ab)", var, Unit::Variance)
        .quantity("R_eff", reff, Unit::Ohm)
        .quantity("rank", field.rank() as f64, Unit::Count)
        .equal("Var(U_ab)", "R_eff", reff);
    Ok(rep)
}

pub fn thomson_report(n: &ResistiveNetwork, a: VertexId, b: VertexId, tol: f64) -> crate::Result<VerificationReport> {
    let g = n.graph();
    let flow = thomson_flow(n, a, b)?;
    let reff = effective_resistance(n, a, b)?;
    let mut rep = VerificationReport::new("thomson_flow", tol);
    for (id, e) in g.edges().iter().enumerate() {
        let label = format!("I[{id}] {}->{} #{}", g.vertex_name(e.tail), g.vertex_name(e.head), e.parallel_index);
        rep.quantity(label, flow.currents[id], Unit::Ampere);
    }
    rep.quantity("power", dissipated_power(n, &flow)?, Unit::Watt)
        .quantity("R_eff", reff, Unit::Ohm)
        .quantity("KCL residual", kcl_residual(n, &flow, a, b)?, Unit::Ampere)
        .quantity("KVL residual", kvl_residual(n, &flow)?, Unit::Volt)
        .quantity("residual bound", RESIDUAL_TOLERANCE, Unit::Dimensionless)
        .equal("power", "R_eff", reff)
        .compare("KCL residual", Relation::Le, "residual bound")
        .compare("KVL residual", Relation::Le, "residual bound");
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_edge() {
        let f = NetworkFile::parse_str(r#"{"vertices":["a","b"],"edges":[{"u":"a","v":"b","r":1.0}]}"#, "t").unwrap();
        let n = f.to_network("t").unwrap();
        assert_eq!(n.graph().edge_count(), 1);
        assert_eq!(n.resistances(), &[1.0]);
    }

    #[test]
    fn zero_resistance_is_a_validation_error() {
        let f = NetworkFile::parse_str(r#"{"vertices":["a","b"],"edges":[{"u":"a","v":"b","r":0}]}"#, "t").unwrap();
        let e = f.to_network("t").unwrap_err();
        assert!(matches!(e, CliError::Validation { .. }));
        assert_eq!(e.exit_code(), EXIT_INVALID);
    }

    #[test]
    fn malformed_document_reports_position() {
        let e = NetworkFile::parse_str("{\"vertices\": [\"a\",\n  \"b\" \"c\"]}", "t").unwrap_err();
        match e {
            CliError::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reversed_parallel_edges_share_orientation() {
        let f = NetworkFile::parse_str(
            r#"{"vertices":["a","b"],"edges":[{"u":"a","v":"b","r":1},{"u":"b","v":"a","r":2}]}"#,
            "t",
        )
        .unwrap();
        let n = f.to_network("t").unwrap();
        let edges = n.graph().edges();
        assert_eq!((edges[0].tail, edges[0].parallel_index), (0, 0));
        assert_eq!((edges[1].tail, edges[1].parallel_index), (0, 1));
        let back = NetworkFile::from_network(&n);
        assert_eq!(back.edges[1].u, "a");
        let again = NetworkFile::parse_str(&back.to_json_string(), "t").unwrap().to_network("t").unwrap();
        assert_eq!(again.graph().edges(), n.graph().edges());
        assert_eq!(again.resistances(), n.resistances());
    }

    #[test]
    fn pair_resolution() {
        let g = Multigraph::new(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
        assert_eq!(resolve_pair(&g, "a,c").unwrap(), (0, 2));
        assert_eq!(resolve_pair(&g, "c, b").unwrap(), (2, 1));
        assert!(resolve_pair(&g, "a").is_err());
        assert!(resolve_pair(&g, "a,z").is_err());
        assert!(resolve_pair(&g, "b,b").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["gffresist", "frobnicate"], &mut out, &mut err), EXIT_USAGE);
        assert!(!err.is_empty());
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["gffresist", "--help"], &mut out, &mut err), EXIT_PASS);
        assert!(!out.is_empty());
    }

    #[test]
    fn appendix_example_runs_without_files() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(["gffresist", "verify", "appendix", "--example"], &mut out, &mut err);
        assert_eq!(code, EXIT_PASS, "{}", String::from_utf8_lossy(&err));
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("1.875000000"));
        assert!(text.contains("1.750000000"));
    }
}
