use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use santalo_core::density::LogConcaveDensity;
use santalo_core::functionals::{self, santalo_product};
use santalo_core::maxaffine::MaxAffine;
use santalo_core::measure::DiscreteMeasure;
use santalo_core::moment::{self, DEFAULT_MAX_ITER, DEFAULT_TOL};
use santalo_core::quadrature::Quad;
use santalo_core::report::{csv_field, fmt_sig, CheckReport};
use santalo_core::spec::FunctionSpec;
use santalo_core::verify::{self, SuiteOptions};
use santalo_core::{conjugate, transport, Error, GridFunction, Symmetry};

const DEFAULT_C: f64 = 4.0;

#[derive(Parser, Debug)]
#[command(
    name = "santalo-lab",
    version,
    about = "Convex duality, moment measure and entropy-transport checks"
)]
struct Cli {
    /// Constant used by inequality checks (overrides suite presets).
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Multiplies every check tolerance.
    #[arg(long = "tol-scale", global = true, default_value_t = 1.0)]
    tol_scale: f64,
    /// Write CSV output to this file instead of stdout.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Restrict dimension-dependent work to this dimension.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Seed for randomized corpora.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate Santaló products, entropies, Fisher information and deficits.
    Eval(Inputs),
    /// Legendre transform of a sampled function on its automatic dual grid.
    Conjugate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximal-correlation transport between two discrete measures.
    Transport {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Moment measures: solve for a potential, or push a density forward.
    Moment {
        #[command(subcommand)]
        action: MomentAction,
    },
    /// Log-Sobolev deficit of one density, or the deficit inequality for two.
    Deficit(Inputs),
    /// Run a check suite: duality, transport, sequences, inequalities or all.
    Verify { suite: String },
    /// Closed-form reference constants.
    Constants,
}

#[derive(Subcommand, Debug)]
enum MomentAction {
    /// Find the potential whose moment measure is the target.
    Solve {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long = "max-iter", default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Moment measure of a density, written as a measure file.
    Push {
        #[command(flatten)]
        inputs: Inputs,
        /// A potential table as written by `moment solve`.
        #[arg(long, conflicts_with_all = ["spec", "density"])]
        potential: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct Inputs {
    /// Function spec file; every section is used unless --function is given.
    #[arg(long)]
    spec: Vec<PathBuf>,
    /// Section of the spec file(s) to use.
    #[arg(long)]
    function: Option<String>,
    /// Built-in density (gamma_1, gamma_2, tau, tau_bar, tau_s, tau_s_2).
    #[arg(long)]
    density: Vec<String>,
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(_) => Failure::Usage(e.to_string()),
            _ => Failure::Check(e.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn hash_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize()[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

struct Loaded {
    name: String,
    hash: String,
    spec: Option<FunctionSpec>,
    density: Option<LogConcaveDensity>,
}

impl Loaded {
    fn grid(&self) -> Result<GridFunction, Failure> {
        match (&self.spec, &self.density) {
            (Some(s), _) => Ok(s.to_grid()?),
            (None, Some(d)) => Ok(d.sampled()?.clone()),
            _ => unreachable!(),
        }
    }

    fn as_density(&self) -> Result<LogConcaveDensity, Failure> {
        match (&self.spec, &self.density) {
            (_, Some(d)) => Ok(d.clone()),
            (Some(s), None) => Ok(LogConcaveDensity::from_spec(s)?),
            _ => unreachable!(),
        }
    }
}

fn load(inputs: &Inputs) -> Result<Vec<Loaded>, Failure> {
    let mut out = Vec::new();
    for path in &inputs.spec {
        let text = read(path)?;
        let specs = FunctionSpec::parse_all(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let before = out.len();
        for s in specs {
            if inputs.function.as_deref().is_some_and(|f| f != s.name) {
                continue;
            }
            out.push(Loaded {
                hash: hash_hex(&[text.as_bytes(), s.name.as_bytes()]),
                name: s.name.clone(),
                spec: Some(s),
                density: None,
            });
        }
        if out.len() == before {
            return Err(usage(format!(
                "{}: no section named '{}'",
                path.display(),
                inputs.function.as_deref().unwrap_or("")
            )));
        }
    }
    for name in &inputs.density {
        let d = LogConcaveDensity::builtin(name).map_err(usage)?;
        out.push(Loaded {
            hash: hash_hex(&[b"builtin", name.as_bytes()]),
            name: name.clone(),
            spec: None,
            density: Some(d),
        });
    }
    if out.is_empty() {
        return Err(usage("no input: pass --spec <file> or --density <name>"));
    }
    Ok(out)
}

fn load_one(inputs: &Inputs) -> Result<Loaded, Failure> {
    let mut all = load(inputs)?;
    if all.len() != 1 {
        return Err(usage(format!(
            "expected one function, got {}; select one with --function",
            all.len()
        )));
    }
    Ok(all.remove(0))
}

fn read_measure(path: &Path) -> Result<DiscreteMeasure, Failure> {
    DiscreteMeasure::parse(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

struct Table {
    text: String,
}

impl Table {
    fn new() -> Self {
        Table {
            text: "name,inputs_hash,value,est_error\n".into(),
        }
    }

    fn row(&mut self, name: &str, hash: &str, value: f64, est: f64) {
        let _ = writeln!(
            self.text,
            "{},{hash},{},{}",
            csv_field(name),
            fmt_sig(value),
            fmt_sig(est)
        );
    }

    fn quad(&mut self, name: &str, hash: &str, q: santalo_core::Result<Quad>) {
        match q {
            Ok(q) => self.row(name, hash, q.value, q.est_error),
            Err(e) => {
                eprintln!("{name}: {e}");
                self.row(name, hash, f64::NAN, f64::NAN);
            }
        }
    }
}

fn eval(cli: &Cli, inputs: &Inputs) -> Outcome {
    let mut t = Table::new();
    for item in load(inputs)? {
        let (n, h) = (item.name.as_str(), item.hash.as_str());
        let sp = item.grid().and_then(|g| santalo_product(&g).map_err(Failure::from));
        match sp {
            Ok(p) => {
                t.row(&format!("{n}/santalo_product"), h, p.value, p.est_error);
                t.row(
                    &format!("{n}/log_integral"),
                    h,
                    p.primal.value.ln(),
                    p.primal.est_error / p.primal.value,
                );
                t.row(
                    &format!("{n}/log_integral_dual"),
                    h,
                    p.dual.value.ln(),
                    p.dual.est_error / p.dual.value,
                );
            }
            Err(Failure::Check(e) | Failure::Usage(e)) => {
                eprintln!("{n}/santalo_product: {e}");
                t.row(&format!("{n}/santalo_product"), h, f64::NAN, f64::NAN);
            }
        }
        let eta = match item.as_density() {
            Ok(d) => d,
            Err(Failure::Check(e) | Failure::Usage(e)) => {
                eprintln!("{n}: not a density: {e}");
                continue;
            }
        };
        use santalo_core::density::ReferenceMeasure as M;
        t.quad(
            &format!("{n}/entropy_lebesgue"),
            h,
            functionals::relative_entropy(&eta, &M::Lebesgue),
        );
        t.quad(
            &format!("{n}/entropy_gaussian"),
            h,
            functionals::relative_entropy(&eta, &M::Gaussian),
        );
        let fisher_name = if eta.essentially_continuous() {
            "fisher"
        } else {
            "fisher_tilde_only"
        };
        t.quad(
            &format!("{n}/{fisher_name}"),
            h,
            functionals::fisher_information(&eta).map(|f| f.value),
        );
        t.quad(&format!("{n}/lsi_deficit"), h, functionals::lsi_deficit(&eta));
        t.quad(&format!("{n}/entropy_power"), h, functionals::entropy_power(&eta));
    }
    emit(&t.text, cli.csv.as_deref())?;
    Ok(true)
}

fn conjugate_cmd(cli: &Cli, inputs: &Inputs, out: Option<&Path>) -> Outcome {
    let item = load_one(inputs)?;
    let g = conjugate::legendre(&item.grid()?)?;
    let mut text = String::new();
    let cols: Vec<String> = (1..=g.dim()).map(|k| format!("y{k}")).collect();
    let _ = writeln!(text, "{},value,est_error", cols.join(","));
    for k in 0..g.len() {
        for y in g.point(k) {
            let _ = write!(text, "{},", fmt_sig(y));
        }
        let _ = writeln!(text, "{},0", fmt_sig(g.values()[k]));
    }
    emit(&text, out.or(cli.csv.as_deref()))?;
    Ok(true)
}

fn transport_cmd(cli: &Cli, source: &Path, target: &Path) -> Outcome {
    let a = read_measure(source)?;
    let b = read_measure(target)?;
    if a.dim() != b.dim() {
        return Err(usage(format!(
            "measures live in dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let (t, coupling) = transport::max_correlation_cost(&a, &b)?;
    let w2 = a.second_moment() + b.second_moment() - 2.0 * t;
    let est = coupling.marginal_error() * (1.0 + t.abs());
    let mut text = String::from("quantity,i,j,value,est_error\n");
    let _ = writeln!(text, "max_correlation,,,{},{}", fmt_sig(t), fmt_sig(est));
    let _ = writeln!(text, "w2_squared,,,{},{}", fmt_sig(w2), fmt_sig(2.0 * est));
    for (i, j, m) in coupling.support() {
        let _ = writeln!(
            text,
            "coupling,{i},{j},{},{}",
            fmt_sig(m),
            fmt_sig(coupling.marginal_error())
        );
    }
    emit(&text, cli.csv.as_deref())?;
    Ok(true)
}

fn moment_solve(target: &Path, tol: f64, max_iter: usize, out: Option<&Path>) -> Outcome {
    let nu = read_measure(target)?;
    let sol = moment::solve_moment_potential(&nu, tol, max_iter)?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "# V(x) = max_j (x . y_j - b_j), normalized so that the integral of e^(-V) is 1"
    );
    let _ = writeln!(text, "# residual {}", fmt_sig(sol.residual));
    let _ = writeln!(text, "# k_value {}", fmt_sig(sol.k_value));
    let _ = writeln!(text, "# iterations {}", sol.iterations);
    let cols: Vec<String> = (1..=nu.dim()).map(|k| format!("y{k}")).collect();
    let _ = writeln!(text, "# {} b", cols.join(" "));
    for (y, b) in sol.potential.slopes().iter().zip(sol.potential.intercepts()) {
        for c in y {
            let _ = write!(text, "{} ", fmt_sig(*c));
        }
        let _ = writeln!(text, "{}", fmt_sig(*b));
    }
    emit(&text, out)?;
    Ok(true)
}

fn parse_potential(path: &Path) -> Result<MaxAffine, Failure> {
    let text = read(path)?;
    let mut slopes = Vec::new();
    let mut intercepts = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        let nums = s
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| usage(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        if !(2..=3).contains(&nums.len()) {
            return Err(usage(format!(
                "{}: line {}: expected 'y1 [y2] b'",
                path.display(),
                i + 1
            )));
        }
        intercepts.push(nums[nums.len() - 1]);
        slopes.push(nums[..nums.len() - 1].to_vec());
    }
    MaxAffine::new(slopes, intercepts).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn moment_push(inputs: &Inputs, potential: Option<&Path>, out: Option<&Path>) -> Outcome {
    let eta = match potential {
        Some(p) => LogConcaveDensity::from_max_affine("potential", parse_potential(p)?, Symmetry::None)?,
        None => load_one(inputs)?.as_density()?,
    };
    let nu = moment::moment_measure_pushforward(&eta)?;
    let mut text = format!("# moment measure of {}: weight, atom\n", eta.name());
    text.push_str(&nu.to_text());
    emit(&text, out)?;
    Ok(true)
}

fn report_csv(reports: &[CheckReport]) -> String {
    let mut text = format!("{}\n", CheckReport::CSV_HEADER);
    for r in reports {
        for row in r.csv_rows() {
            text.push_str(&row);
            text.push('\n');
        }
    }
    text
}

fn deficit(cli: &Cli, inputs: &Inputs) -> Outcome {
    let items = load(inputs)?;
    match items.as_slice() {
        [one] => {
            let eta = one.as_density()?;
            let h = &one.hash;
            let mut t = Table::new();
            t.quad(&format!("{}/lsi_deficit", one.name), h, functionals::lsi_deficit(&eta));
            t.quad(
                &format!("{}/entropy_gaussian", one.name),
                h,
                functionals::relative_entropy(&eta, &santalo_core::density::ReferenceMeasure::Gaussian),
            );
            t.quad(
                &format!("{}/fisher", one.name),
                h,
                functionals::fisher_information(&eta).map(|f| f.value),
            );
            emit(&t.text, cli.csv.as_deref())?;
            Ok(true)
        }
        [a, b] => {
            let r = verify::check_mainresult(&a.as_density()?, &b.as_density()?, cli.c.unwrap_or(DEFAULT_C))?
                .scale_tolerance(cli.tol_scale);
            emit(&report_csv(std::slice::from_ref(&r)), cli.csv.as_deref())?;
            if r.failed() {
                eprintln!("FAIL {}", r.check_id);
            }
            Ok(!r.failed())
        }
        _ => Err(usage("deficit takes one or two densities")),
    }
}

fn verify_cmd(cli: &Cli, suite: &str) -> Outcome {
    let opts = SuiteOptions {
        c: cli.c,
        tol_scale: cli.tol_scale,
        n: cli.n,
        seed: cli.seed,
    };
    let reports = verify::run_suite(suite, &opts)?;
    emit(&report_csv(&reports), cli.csv.as_deref())?;
    let failed: Vec<&CheckReport> = reports.iter().filter(|r| r.failed()).collect();
    for r in &failed {
        eprintln!("FAIL {}", r.check_id);
        for note in &r.notes {
            eprintln!("  {note}");
        }
    }
    eprintln!("{} checks, {} failed", reports.len(), failed.len());
    Ok(failed.is_empty())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn constants(cli: &Cli) -> Outcome {
    let c = cli.c.unwrap_or(DEFAULT_C);
    let dims: Vec<usize> = match cli.n {
        Some(n) if (1..=3).contains(&n) => vec![n],
        Some(n) => return Err(usage(format!("--n must be 1, 2 or 3, got {n}"))),
        None => vec![1, 2, 3],
    };
    let c_text = c.to_bits().to_le_bytes();
    let mut t = Table::new();
    for n in dims {
        let h = hash_hex(&[b"constants", &(n as u64).to_le_bytes(), &c_text]);
        let nf = n as f64;
        let pi = std::f64::consts::PI;
        t.row(
            &format!("mahler_cube[n={n}]"),
            &h,
            4f64.powi(n as i32) / factorial(n),
            0.0,
        );
        let s = verify::simplex_mahler_volume(n);
        t.row(&format!("mahler_simplex[n={n}]"), &h, s, s * 1e-14);
        t.row(&format!("santalo_gaussian[n={n}]"), &h, (2.0 * pi).powi(n as i32), 0.0);
        t.row(&format!("santalo_lower[n={n}]"), &h, c.powi(n as i32), 0.0);
        t.row(&format!("deficit_shift[n={n}]"), &h, nf * (2.0 * pi / c).ln(), 0.0);
        t.row(
            &format!("gaussian_entropy[n={n}]"),
            &h,
            0.5 * nf * (2.0 * pi * std::f64::consts::E).ln(),
            0.0,
        );
        t.row(
            &format!("k_gaussian[n={n}]"),
            &h,
            -nf + 0.5 * nf * (2.0 * pi * std::f64::consts::E).ln(),
            0.0,
        );
    }
    emit(&t.text, cli.csv.as_deref())?;
    Ok(true)
}

fn run(cli: &Cli) -> Outcome {
    if !(cli.tol_scale > 0.0 && cli.tol_scale.is_finite()) {
        return Err(usage("--tol-scale must be positive"));
    }
    if cli.c.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
        return Err(usage("--c must be positive"));
    }
    match &cli.command {
        Command::Eval(inputs) => eval(cli, inputs),
        Command::Conjugate { inputs, out } => conjugate_cmd(cli, inputs, out.as_deref()),
        Command::Transport { source, target } => transport_cmd(cli, source, target),
        Command::Moment { action } => match action {
            MomentAction::Solve {
                target,
                tol,
                max_iter,
                out,
            } => moment_solve(target, *tol, *max_iter, out.as_deref().or(cli.csv.as_deref())),
            MomentAction::Push { inputs, potential, out } => {
                moment_push(inputs, potential.as_deref(), out.as_deref().or(cli.csv.as_deref()))
            }
        },
        Command::Deficit(inputs) => deficit(cli, inputs),
        Command::Verify { suite } => verify_cmd(cli, suite),
        Command::Constants => constants(cli),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
