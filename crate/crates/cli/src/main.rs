use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use semistable::exponents::{ExponentReport, ProblemParams};
use semistable::harness::{
    check_key_lemma, check_lemma_2_5, check_prop_2_4, check_prop_2_6, check_theorem,
    default_key_test_functions, plot_rows, run_sweep, summarize_profile, ExponentChoice,
    NamedExponent, Subject, SubjectSpec, SweepConfig, Tolerances, VerificationReport,
    DEFAULT_KEY_RADII,
};
use semistable::nonlinearity::Nonlinearity;
use semistable::profile::{log_grid, Profile};
use semistable::radial_solver::{shoot, solve_gelfand_branch, RadialSolution, SolverConfig};
use semistable::spectra::StabilityProtocol;

/// Numerical checks of pointwise estimates for semi-stable radial solutions
/// of -Δu = |x|^alpha f(u) in the unit ball.
#[derive(Parser, Debug)]
#[command(name = "semistable", version)]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "SEMISTABLE_WORKERS")]
    workers: Option<usize>,

    #[command(flatten)]
    tolerances: ToleranceArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exponent table (gamma, s_alpha, Hardy constant, p_S, p_JL, regime) as CSV.
    Exponents {
        /// Comma-separated dimensions.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<f64>,
        /// Comma-separated weights.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        alpha: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual, Hardy comparison, H^1 membership and spectral verdict of a subject (JSON).
    Family {
        #[command(flatten)]
        subject: SubjectArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the radial problem for f(u) = lambda e^u; writes a CSV mesh file and a JSON sidecar.
    Solve {
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long)]
        lambda: f64,
        /// Shoot from this centre value instead of solving for u(1) = 0.
        #[arg(long)]
        center: Option<f64>,
        #[arg(long, default_value_t = 2048)]
        mesh_points: usize,
        #[arg(long, default_value_t = 1e-12)]
        abs_tol: f64,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        json: PathBuf,
    },
    /// Run estimate checks on a subject and print the reports (JSON).
    Verify {
        #[command(flatten)]
        subject: SubjectArgs,
        /// Solution CSV written by `solve`; overrides the subject flags.
        #[arg(long, requires = "solution_json")]
        solution_csv: Option<PathBuf>,
        #[arg(long, requires = "solution_csv")]
        solution_json: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
        check: Vec<CheckArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Batch run from a JSON config with keys grid, subjects, checks, tolerances, output_dir.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Per-radius CSV (u, u_r, weight, Hardy ratio, envelope, residual) for plotting.
    Plotdata {
        #[command(flatten)]
        subject: SubjectArgs,
        #[arg(long, default_value_t = 1e-4)]
        r_min: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ToleranceArgs {
    #[arg(long, global = true)]
    quad_rel_tol: Option<f64>,
    #[arg(long, global = true)]
    trend_ratio: Option<f64>,
    #[arg(long, global = true)]
    key_lemma_rel: Option<f64>,
    #[arg(long, global = true)]
    truncation_rel: Option<f64>,
    #[arg(long, global = true)]
    ladder_depth: Option<usize>,
    #[arg(long, global = true)]
    solver_rel_tol: Option<f64>,
}

impl ToleranceArgs {
    fn apply(&self, mut t: Tolerances) -> Tolerances {
        if let Some(v) = self.quad_rel_tol {
            t.quad_rel_tol = v;
        }
        if let Some(v) = self.trend_ratio {
            t.trend_ratio = v;
        }
        if let Some(v) = self.key_lemma_rel {
            t.key_lemma_rel = v;
        }
        if let Some(v) = self.truncation_rel {
            t.truncation_rel = v;
        }
        if let Some(v) = self.ladder_depth {
            t.ladder_depth = v;
        }
        if let Some(v) = self.solver_rel_tol {
            t.solver_rel_tol = v;
        }
        t
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SubjectKind {
    GelfandLog,
    WholeSpaceGelfand,
    Power,
    BrezisVazquez,
    Constant,
    GelfandBranch,
}

#[derive(Args, Debug)]
struct SubjectArgs {
    #[arg(long, value_enum, default_value = "gelfand-log")]
    kind: SubjectKind,
    #[arg(long, default_value_t = 10.0)]
    n: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Power exponent: a number, `gamma` or `half-gamma`.
    #[arg(long, default_value = "gamma", allow_hyphen_values = true)]
    g: String,
    /// Added to the power exponent.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    shift: f64,
    #[arg(long, allow_hyphen_values = true)]
    q: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    value: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

impl SubjectArgs {
    fn params(&self) -> Result<ProblemParams> {
        Ok(ProblemParams::new(self.n, self.alpha)?)
    }

    fn spec(&self) -> Result<SubjectSpec> {
        Ok(match self.kind {
            SubjectKind::GelfandLog => SubjectSpec::GelfandLog,
            SubjectKind::WholeSpaceGelfand => SubjectSpec::WholeSpaceGelfand,
            SubjectKind::Power => SubjectSpec::Power { g: parse_exponent(&self.g)?, shift: self.shift },
            SubjectKind::BrezisVazquez => {
                SubjectSpec::BrezisVazquez { q: self.q.context("--q is required for brezis-vazquez")? }
            }
            SubjectKind::Constant => SubjectSpec::Constant { value: self.value },
            SubjectKind::GelfandBranch => SubjectSpec::GelfandBranch { lambda: self.lambda },
        })
    }

    fn build(&self, tol: &Tolerances) -> Result<(Box<dyn Profile>, Vec<f64>)> {
        let solver = solver_config(tol);
        Ok(self.spec()?.build(self.params()?, &solver)?)
    }
}

fn parse_exponent(s: &str) -> Result<ExponentChoice> {
    Ok(match s {
        "gamma" => ExponentChoice::Named(NamedExponent::Gamma),
        "half-gamma" | "half_gamma" => ExponentChoice::Named(NamedExponent::HalfGamma),
        other => ExponentChoice::Value(other.parse().with_context(|| format!("bad exponent {other:?}"))?),
    })
}

fn solver_config(tol: &Tolerances) -> SolverConfig {
    let base = SolverConfig::default();
    base.with_tolerances(tol.solver_rel_tol, base.abs_tol)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    All,
    Theorem,
    #[value(name = "lemma-2-5")]
    Lemma25,
    #[value(name = "prop-2-6")]
    Prop26,
    KeyLemma,
    #[value(name = "prop-2-4")]
    Prop24,
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn exponents(n: &[f64], alpha: &[f64], out: &Option<PathBuf>) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(["n", "alpha", "gamma", "s_alpha", "hardy", "p_sobolev", "p_jl", "regime"])?;
    for &nv in n {
        for &a in alpha {
            let r = ExponentReport::new(&ProblemParams::new(nv, a)?);
            w.write_record([
                nv.to_string(),
                a.to_string(),
                r.gamma.to_string(),
                r.s_alpha.to_string(),
                r.hardy.to_string(),
                r.p_sobolev.to_string(),
                r.p_jl.to_string(),
                r.regime.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve(n: f64, alpha: f64, lambda: f64, center: Option<f64>, mesh_points: usize, abs_tol: f64, tol: &Tolerances, csv: &Path, json: &Path) -> Result<()> {
    let p = ProblemParams::new(n, alpha)?;
    let mut cfg = solver_config(tol);
    cfg.mesh_points = mesh_points;
    cfg.abs_tol = abs_tol;
    let sol = match center {
        Some(m) => shoot(&p, &Nonlinearity::gelfand(lambda), m, &cfg)?,
        None => solve_gelfand_branch(&p, lambda, &cfg)?,
    };
    sol.write(csv, json)?;
    eprintln!(
        "u(0)={} u(1)={} max midpoint residual {:e}",
        sol.center_value(),
        sol.boundary_value(),
        sol.max_midpoint_residual()
    );
    Ok(())
}

fn verify(subject: Subject, checks: &[CheckArg], tol: &Tolerances) -> Result<Vec<VerificationReport>> {
    let all = checks.contains(&CheckArg::All);
    let wants = |c| all || checks.contains(&c);
    let p = *subject.profile().params();
    let mut reports = Vec::new();
    if wants(CheckArg::Theorem) {
        reports.push(check_theorem(&subject, tol)?);
    }
    if wants(CheckArg::Lemma25) {
        reports.push(check_lemma_2_5(&subject, tol)?);
    }
    if wants(CheckArg::Prop26) {
        reports.push(check_prop_2_6(&subject, tol)?);
    }
    if wants(CheckArg::KeyLemma) {
        reports.push(check_key_lemma(&subject, &default_key_test_functions(&p)?, &DEFAULT_KEY_RADII, tol)?);
    }
    if wants(CheckArg::Prop24) {
        reports.push(check_prop_2_4(&subject, tol)?);
    }
    Ok(reports)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            bail!("worker count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
    }
    let tol = cli.tolerances.apply(Tolerances::default());
    tol.validate()?;
    match &cli.command {
        Command::Exponents { n, alpha, out } => exponents(n, alpha, out),
        Command::Family { subject, out } => {
            let (profile, _) = subject.build(&tol)?;
            let summary = summarize_profile(profile.as_ref(), &StabilityProtocol::default())?;
            emit_json(out, &serde_json::to_value(summary)?)
        }
        Command::Solve { n, alpha, lambda, center, mesh_points, abs_tol, csv, json } => {
            solve(*n, *alpha, *lambda, *center, *mesh_points, *abs_tol, &tol, csv, json)
        }
        Command::Verify { subject, solution_csv, solution_json, check, out } => {
            let (profile, mesh): (Box<dyn Profile>, Vec<f64>) = match (solution_csv, solution_json) {
                (Some(c), Some(j)) => {
                    let sol = RadialSolution::read(c, j)?;
                    let mesh = sol.mesh().to_vec();
                    (Box::new(sol), mesh)
                }
                _ => subject.build(&tol)?,
            };
            let subject = Subject::certify(profile, &StabilityProtocol::default())?.with_mesh(mesh);
            let reports = verify(subject, check, &tol)?;
            let failed = reports.iter().filter(|r| !r.verdict).count();
            emit_json(out, &serde_json::to_value(&reports)?)?;
            if failed > 0 {
                bail!("{failed} of {} checks failed", reports.len());
            }
            Ok(())
        }
        Command::Sweep { config, output_dir } => {
            let mut cfg = SweepConfig::load(config)?;
            cfg.tolerances = cli.tolerances.apply(cfg.tolerances);
            if let Some(dir) = output_dir {
                cfg.output_dir = dir.clone();
            }
            if cli.workers.is_some() {
                cfg.workers = cli.workers;
            }
            let out = run_sweep(&cfg)?;
            eprintln!(
                "{} rows written to {} and {}",
                out.report.rows.len(),
                out.csv_path.display(),
                out.json_path.display()
            );
            Ok(())
        }
        Command::Plotdata { subject, r_min, points, out } => {
            if !(*r_min > 0.0 && *r_min < 1.0) || *points < 2 {
                bail!("need 0 < r_min < 1 and at least two points");
            }
            let (profile, _) = subject.build(&tol)?;
            let mut w = csv::Writer::from_writer(sink(out)?);
            w.write_record(["r", "u", "u_r", "weight", "hardy_ratio", "envelope", "relative_residual"])?;
            for row in plot_rows(profile.as_ref(), &log_grid(*r_min, 1.0, *points)) {
                w.write_record(
                    [row.r, row.u, row.u_r, row.weight, row.hardy_ratio, row.envelope, row.relative_residual]
                        .iter()
                        .map(|x| x.to_string()),
                )?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
