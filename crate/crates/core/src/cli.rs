//! Command-line front end: solve, gen, verify, audit and bench. Every
//! subcommand is a library function returning a process exit code.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fptas::solve_bifptas;
use crate::gen::{generate_file, GenParams};
use crate::io::{Counts, InstanceFile, Parameters, PointRecord, ResultFile};
use crate::mdkp::DEFAULT_BUDGET;
use crate::mechanism::{
    audit_truthfulness, run_mechanism, AuditOptions, FptasMechanism, MdkpMechanism, OracleMechanism, RangeOptimizer,
    TruthfulPtasMechanism,
};
use crate::model::{violation_squared, welfare, Allocation, Instance};
use crate::num::{format_rational, int, parse_rational, Epsilon, Rational};
use crate::oracle::brute_force_opt;
use crate::ptas::{solve_ptas, solve_truthful_ptas, Backend, TruthfulParams, DEFAULT_GUESS_CAP};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_AUDIT: i32 = 5;

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::InvalidInput(_) | Error::PreconditionViolated(_) => EXIT_PARSE,
        Error::Infeasible(_) | Error::NoExactFit(..) | Error::EmptyRange | Error::DegenerateSlack => EXIT_INFEASIBLE,
        Error::BudgetExceeded { .. } | Error::CapExceeded { .. } | Error::Overflow(_) => EXIT_BUDGET,
    }
}

#[derive(Parser, Debug)]
#[command(name = "ckp", version, about = "Complex-demand knapsack solvers and mechanisms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve an instance and write a result file.
    Solve(SolveArgs),
    /// Generate a seeded random instance.
    Gen(GenArgs),
    /// Re-check a result file exactly against its instance.
    Verify(VerifyArgs),
    /// Run the misreport audit of a mechanism.
    Audit(AuditArgs),
    /// Compare algorithms against the exact optimum and write a CSV table.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Exact,
    Ptas,
    PtasTruthful,
    Fptas,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Exact => "exact",
            Algo::Ptas => "ptas",
            Algo::PtasTruthful => "ptas-truthful",
            Algo::Fptas => "fptas",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    BruteForce,
    RestrictedRange,
}

/// Solver settings shared by solve, audit and bench.
#[derive(Args, Clone, Debug, PartialEq)]
pub struct SolverArgs {
    /// Accuracy, written 1/q.
    #[arg(long, default_value = "1/4")]
    pub epsilon: String,
    /// Angular margin in radians (ptas-truthful).
    #[arg(long, default_value = "0.5235987755982988")]
    pub delta: String,
    /// Angle bound P for the FPTAS: a rational, or `auto` for ceil(tan theta).
    #[arg(long, default_value = "auto")]
    pub pn: String,
    #[arg(long, value_enum, default_value = "brute-force")]
    pub backend: BackendArg,
    /// DP state budget for range-based solvers.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u128,
    /// Cap on outer polygon edges (restricted-range backend and ptas-truthful).
    #[arg(long)]
    pub side_cap: Option<usize>,
    /// Cap on the guessed set size (ptas-truthful).
    #[arg(long)]
    pub max_guess: Option<usize>,
}

impl Default for SolverArgs {
    fn default() -> Self {
        SolverArgs {
            epsilon: "1/4".into(),
            delta: std::f64::consts::FRAC_PI_6.to_string(),
            pn: "auto".into(),
            backend: BackendArg::BruteForce,
            budget: DEFAULT_BUDGET,
            side_cap: None,
            max_guess: None,
        }
    }
}

impl SolverArgs {
    pub fn eps(&self) -> Result<Epsilon> {
        self.epsilon.parse()
    }

    pub fn delta_value(&self) -> Result<f64> {
        self.delta
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("delta must be a number of radians, got {:?}", self.delta)))
    }

    /// `P` for the FPTAS: explicit, or `max(1, ceil(tan theta))`.
    pub fn p_for(&self, instance: &Instance) -> Result<Rational> {
        if self.pn.trim() == "auto" {
            let t = instance.theta().tan();
            Ok(int((t - 1e-12).ceil().max(1.0) as i64))
        } else {
            let p = parse_rational(&self.pn)?;
            if p.is_negative() {
                return Err(Error::InvalidInput("P must be nonnegative".into()));
            }
            Ok(p)
        }
    }

    fn truthful_params(&self) -> Result<TruthfulParams> {
        let mut p = TruthfulParams::new(self.eps()?, self.delta_value()?);
        p.side_cap = self.side_cap;
        p.max_guess = self.max_guess;
        p.budget = self.budget;
        Ok(p)
    }

    fn backend(&self) -> Backend {
        match self.backend {
            BackendArg::BruteForce => Backend::BruteForce { cap: DEFAULT_GUESS_CAP },
            BackendArg::RestrictedRange => Backend::RestrictedRange {
                budget: self.budget,
                side_cap: self.side_cap.or(Some(4)),
            },
        }
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Instance file.
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    pub algo: Algo,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Run the truthful mechanism for the algorithm and report VCG payments.
    #[arg(long)]
    pub payments: bool,
    /// Write `runtime_ms: null` so output is byte-for-byte reproducible.
    #[arg(long)]
    pub omit_runtime: bool,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    /// Nonzero demands per user.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 90.0)]
    pub phi_max_deg: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "10")]
    pub capacity: String,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    pub result: PathBuf,
    /// Allowed capacity factor.
    #[arg(long, default_value = "1")]
    pub beta: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MechanismArg {
    Oracle,
    Fptas,
    Mdkp,
    PtasTruthful,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// Instance files.
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "fptas")]
    pub mechanism: MechanismArg,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Largest value tried in misreports (grid 0..=max).
    #[arg(long, default_value_t = 10)]
    pub max_value: i64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    /// Algorithms to run.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ptas,fptas")]
    pub algos: Vec<Algo>,
    /// Accuracies, written 1/q.
    #[arg(long, value_delimiter = ',', default_value = "1/4")]
    pub eps: Vec<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub omit_runtime: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    InstanceFile::parse(&text)?.to_instance()
}

fn write_out(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Solver output before serialization.
struct Solved {
    allocation: Allocation,
    welfare: Rational,
    payments: Option<Vec<Rational>>,
    guesses: Option<u128>,
    cells: Option<usize>,
}

fn mechanism_for(algo: Algo, instance: &Instance, solver: &SolverArgs) -> Result<Box<dyn RangeOptimizer>> {
    Ok(match algo {
        Algo::Exact => Box::new(OracleMechanism),
        Algo::Fptas => Box::new(FptasMechanism::new(
            instance.capacity(),
            instance.n(),
            &solver.eps()?,
            &solver.p_for(instance)?,
        )?),
        Algo::PtasTruthful => Box::new(TruthfulPtasMechanism::new(
            instance.capacity(),
            instance.n(),
            &instance.demand_universe(),
            &solver.truthful_params()?,
        )?),
        Algo::Ptas => return Err(Error::InvalidInput("the plain PTAS is not a mechanism; use ptas-truthful".into())),
    })
}

fn solve(instance: &Instance, algo: Algo, solver: &SolverArgs, payments: bool) -> Result<Solved> {
    if payments {
        let mech = mechanism_for(algo, instance, solver)?;
        let out = run_mechanism(mech.as_ref(), instance)?;
        let w = welfare(instance, &out.outcome.allocation);
        return Ok(Solved {
            allocation: out.outcome.allocation,
            welfare: w,
            payments: Some(out.payments),
            guesses: None,
            cells: None,
        });
    }
    match algo {
        Algo::Exact => {
            let (w, a) = brute_force_opt(instance, &int(1))?;
            Ok(Solved {
                allocation: a,
                welfare: w,
                payments: None,
                guesses: None,
                cells: None,
            })
        }
        Algo::Ptas => {
            let sol = solve_ptas(instance, &solver.eps()?, solver.backend())?;
            Ok(Solved {
                allocation: sol.allocation,
                welfare: sol.welfare,
                payments: None,
                guesses: Some(sol.guesses as u128),
                cells: None,
            })
        }
        Algo::PtasTruthful => {
            let (range, sol) = solve_truthful_ptas(instance, &solver.truthful_params()?)?;
            Ok(Solved {
                allocation: sol.allocation,
                welfare: sol.welfare,
                payments: None,
                guesses: None,
                cells: Some(range.cells().len()),
            })
        }
        Algo::Fptas => {
            let sol = solve_bifptas(instance, &solver.eps()?, &solver.p_for(instance)?)?;
            Ok(Solved {
                allocation: sol.allocation,
                welfare: sol.welfare,
                payments: None,
                guesses: Some(sol.guesses),
                cells: None,
            })
        }
    }
}

fn parameters(algo: Algo, instance: &Instance, solver: &SolverArgs) -> Result<Parameters> {
    let mut p = Parameters {
        eps: (algo != Algo::Exact).then(|| solver.epsilon.trim().to_string()),
        ..Parameters::default()
    };
    match algo {
        Algo::Exact => {}
        Algo::Ptas => {
            p.backend = Some(
                match solver.backend {
                    BackendArg::BruteForce => "brute-force",
                    BackendArg::RestrictedRange => "restricted-range",
                }
                .into(),
            );
            if solver.backend == BackendArg::RestrictedRange {
                p.budget = Some(solver.budget.to_string());
            }
        }
        Algo::PtasTruthful => {
            p.delta = Some(solver.delta.trim().to_string());
            p.budget = Some(solver.budget.to_string());
        }
        Algo::Fptas => p.pn = Some(format_rational(&solver.p_for(instance)?)),
    }
    Ok(p)
}

/// Runs one solver and builds its result file.
pub fn solve_to_result(instance: &Instance, algo: Algo, solver: &SolverArgs, payments: bool, omit_runtime: bool) -> Result<ResultFile> {
    let start = Instant::now();
    let solved = solve(instance, algo, solver, payments)?;
    let runtime = start.elapsed().as_millis() as u64;
    let (choices, total, violation) = ResultFile::describe(instance, &solved.allocation)?;
    Ok(ResultFile {
        algorithm: algo.name().into(),
        parameters: parameters(algo, instance, solver)?,
        choices,
        welfare: format_rational(&solved.welfare),
        total,
        violation_factor: violation,
        payments: solved.payments.map(|ps| ps.iter().map(format_rational).collect()),
        runtime_ms: (!omit_runtime).then_some(runtime),
        counts: Counts {
            guesses: solved.guesses.map(|g| g.to_string()),
            cells: solved.cells.map(|c| c.to_string()),
        },
    })
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

pub fn cmd_solve(args: &SolveArgs) -> i32 {
    let run = || -> Result<()> {
        let instance = read_instance(&args.instance)?;
        let result = solve_to_result(&instance, args.algo, &args.solver, args.payments, args.omit_runtime)?;
        write_out(args.output.as_deref(), &result.to_json())
    };
    run().map_or_else(|e| report(&e), |_| EXIT_OK)
}

pub fn cmd_gen(args: &GenArgs) -> i32 {
    let run = || -> Result<()> {
        let mut p = GenParams::new(args.n, args.k, args.phi_max_deg, args.seed);
        p.capacity = parse_rational(&args.capacity)?;
        write_out(args.output.as_deref(), &generate_file(&p)?.to_json())
    };
    run().map_or_else(|e| report(&e), |_| EXIT_OK)
}

/// Exact re-check of a result against its instance. Returns the first
/// mismatch found.
pub fn verify_result(instance: &Instance, result: &ResultFile, beta: &Rational) -> Result<()> {
    let a = result.allocation(instance)?;
    let fail = |what: String| Err(Error::Infeasible(what));
    if &result.total.parse()? != a.total() {
        return fail(format!("recorded total does not match the choices ({})", a.total()));
    }
    if !crate::model::within(a.total(), instance.capacity(), beta) {
        return fail(format!("|{}| exceeds {} * C", a.total(), format_rational(beta)));
    }
    if result.welfare_value()? != welfare(instance, &a) {
        return fail(format!("welfare {} does not match the choices", result.welfare));
    }
    if parse_rational(&result.violation_factor)? != violation_squared(a.total(), instance.capacity()) {
        return fail("violation factor does not match the total".into());
    }
    if let Some(ps) = &result.payments {
        if ps.len() != instance.n() {
            return fail("payment count does not match the instance".into());
        }
        for p in ps {
            if parse_rational(p)?.is_negative() {
                return fail(format!("negative payment {p}"));
            }
        }
    }
    Ok(())
}

pub fn cmd_verify(args: &VerifyArgs) -> i32 {
    let run = || -> Result<()> {
        let instance = read_instance(&args.instance)?;
        let text = fs::read_to_string(&args.result).map_err(|e| Error::Parse(format!("{}: {e}", args.result.display())))?;
        let result = ResultFile::parse(&text)?;
        verify_result(&instance, &result, &parse_rational(&args.beta)?)
    };
    match run() {
        Ok(()) => {
            println!("ok");
            EXIT_OK
        }
        Err(e) => report(&e),
    }
}

#[derive(Debug, Serialize)]
struct AuditViolation {
    user: usize,
    report: Vec<(PointRecord, String)>,
    truthful_utility: String,
    misreport_utility: String,
}

#[derive(Debug, Serialize)]
struct AuditEntry {
    instance: String,
    misreports: usize,
    violations: Vec<AuditViolation>,
    negative_payments: Vec<usize>,
    individual_rationality: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct AuditFile {
    mechanism: String,
    passed: bool,
    instances: Vec<AuditEntry>,
}

fn mechanism_by_arg(m: MechanismArg, instance: &Instance, solver: &SolverArgs) -> Result<Box<dyn RangeOptimizer>> {
    match m {
        MechanismArg::Oracle => mechanism_for(Algo::Exact, instance, solver),
        MechanismArg::Fptas => mechanism_for(Algo::Fptas, instance, solver),
        MechanismArg::PtasTruthful => mechanism_for(Algo::PtasTruthful, instance, solver),
        MechanismArg::Mdkp => Ok(Box::new(MdkpMechanism::new(
            instance.capacity(),
            instance.n(),
            &instance.demand_universe(),
            &solver.eps()?,
        )?)),
    }
}

pub fn cmd_audit(args: &AuditArgs) -> i32 {
    let run = || -> Result<bool> {
        let options = AuditOptions {
            value_grid: (0..=args.max_value).map(int).collect(),
            ..AuditOptions::default()
        };
        let mut entries = Vec::new();
        let mut name = String::new();
        for path in &args.instances {
            let instance = read_instance(path)?;
            let mech = mechanism_by_arg(args.mechanism, &instance, &args.solver)?;
            name = mech.name().to_string();
            let r = audit_truthfulness(mech.as_ref(), &instance, &options)?;
            entries.push(AuditEntry {
                instance: path.display().to_string(),
                misreports: r.misreports,
                violations: r
                    .violations
                    .iter()
                    .map(|v| AuditViolation {
                        user: v.user,
                        report: v
                            .report
                            .declared_entries()
                            .iter()
                            .map(|e| (PointRecord::of(&e.demand), format_rational(&e.value)))
                            .collect(),
                        truthful_utility: format_rational(&v.truthful_utility),
                        misreport_utility: format_rational(&v.misreport_utility),
                    })
                    .collect(),
                negative_payments: r.negative_payments,
                individual_rationality: r.individual_rationality,
            });
        }
        let passed = entries
            .iter()
            .all(|e| e.violations.is_empty() && e.negative_payments.is_empty() && e.individual_rationality.is_empty());
        let file = AuditFile {
            mechanism: name,
            passed,
            instances: entries,
        };
        write_out(args.output.as_deref(), &(serde_json::to_string_pretty(&file).expect("serializable") + "\n"))?;
        Ok(passed)
    };
    match run() {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_AUDIT,
        Err(e) => report(&e),
    }
}

/// One row of the benchmark table.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BenchRow {
    pub instance: String,
    pub algo: String,
    pub eps: String,
    pub welfare: String,
    pub opt: String,
    /// welfare / opt, exact.
    pub ratio: String,
    /// `|total|^2 / C^2`, exact.
    pub violation: String,
    pub guesses: String,
    pub runtime_ms: String,
}

pub const BENCH_HEADER: &str = "instance,algo,eps,welfare,opt,ratio,violation,guesses,runtime_ms";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        [
            &self.instance,
            &self.algo,
            &self.eps,
            &self.welfare,
            &self.opt,
            &self.ratio,
            &self.violation,
            &self.guesses,
            &self.runtime_ms,
        ]
        .map(|s| s.as_str())
        .join(",")
    }
}

/// Benchmark rows for one instance, in deterministic order.
pub fn bench_instance(name: &str, instance: &Instance, algos: &[Algo], eps: &[String], solver: &SolverArgs, omit_runtime: bool) -> Result<Vec<BenchRow>> {
    let (opt, _) = brute_force_opt(instance, &int(1))?;
    let mut rows = Vec::new();
    for &algo in algos {
        for e in eps {
            let s = SolverArgs {
                epsilon: e.clone(),
                ..solver.clone()
            };
            let r = solve_to_result(instance, algo, &s, false, omit_runtime)?;
            let w = r.welfare_value()?;
            let ratio = if opt.is_zero() { int(1) } else { &w / &opt };
            rows.push(BenchRow {
                instance: name.to_string(),
                algo: algo.name().to_string(),
                eps: e.trim().to_string(),
                welfare: r.welfare.clone(),
                opt: format_rational(&opt),
                ratio: format_rational(&ratio),
                violation: r.violation_factor.clone(),
                guesses: r.counts.guesses.clone().unwrap_or_default(),
                runtime_ms: r.runtime_ms.map(|t| t.to_string()).unwrap_or_default(),
            });
        }
    }
    Ok(rows)
}

pub fn cmd_bench(args: &BenchArgs) -> i32 {
    let run = || -> Result<()> {
        let mut rows = Vec::new();
        for path in &args.instances {
            let instance = read_instance(path)?;
            rows.extend(bench_instance(
                &path.display().to_string(),
                &instance,
                &args.algos,
                &args.eps,
                &args.solver,
                args.omit_runtime,
            )?);
        }
        rows.sort();
        let mut out = String::from(BENCH_HEADER);
        out.push('\n');
        for r in &rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        write_out(args.output.as_deref(), &out)
    };
    run().map_or_else(|e| report(&e), |_| EXIT_OK)
}

/// Parses arguments and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Bench(a) => cmd_bench(a),
    }
}
