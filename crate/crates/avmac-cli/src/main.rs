//! Command-line surface for AV-MAC analysis: symmetrizability verdicts,
//! capacity-region approximation, the deterministic-coding dichotomy,
//! non-conferencing verdicts, the coding pipeline, and jamming attacks.
//!
//! Exit codes: 0 on success, 2 on input errors, 3 on budget or solver
//! failures. All randomness is seed-parameterized, so reruns with the
//! same flags produce byte-identical artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use avmac::{
    builtin_channel, capacity_region, check_symmetrizable, cooperation_thresholds,
    deterministic_capacity, nonconferencing_verdict, AttackOutcome, ChannelSpec, CodingError,
    CompoundCodeOptions, DichotomyOutcome, NonconferencingCase, PrefixOptions, QOptions,
    RegionApproximation, RegionError, RegionOptions, RobustifyOptions, SymmetrizerKind,
};

const EXIT_INPUT: u8 = 2;
const EXIT_COMPUTE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "avmac",
    version,
    about = "Arbitrarily varying multiple-access channels with conferencing encoders: \
             symmetrizability, capacity regions, coding experiments, attacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ChannelArg {
    /// Builtin channel name (gubner, xor, adder-noiseless) or path to a
    /// channel JSON file
    #[arg(long)]
    channel: String,
}

#[derive(Args)]
struct ConferencingArgs {
    /// Conferencing capacity of sender 1, in bits per channel use
    #[arg(long, default_value_t = 0.0)]
    c1: f64,
    /// Conferencing capacity of sender 2, in bits per channel use
    #[arg(long, default_value_t = 0.0)]
    c2: f64,
    /// Interpret --c1/--c2 in nats instead of bits
    #[arg(long)]
    nats: bool,
}

impl ConferencingArgs {
    fn bits(&self) -> (f64, f64) {
        if self.nats {
            (
                self.c1 / std::f64::consts::LN_2,
                self.c2 / std::f64::consts::LN_2,
            )
        } else {
            (self.c1, self.c2)
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Root seed for all randomized searches
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random policy restarts for the region search
    #[arg(long = "p-restarts", default_value_t = 256)]
    p_restarts: usize,
    /// Grid resolution for the prior minimization (0 = automatic)
    #[arg(long = "q-grid", default_value_t = 0)]
    q_grid: usize,
}

impl SearchArgs {
    fn region_options(&self) -> RegionOptions {
        RegionOptions {
            p_restarts: self.p_restarts,
            seed: self.seed,
            q: QOptions {
                grid: self.q_grid,
                ..QOptions::default()
            },
            ..RegionOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide all four symmetrizability conditions, with certificates
    Symm {
        #[command(flatten)]
        channel: ChannelArg,
        /// Decision tolerance on the certificate residual
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Also write the report to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inner approximation of the capacity region, written as CSV
    Region {
        #[command(flatten)]
        channel: ChannelArg,
        #[command(flatten)]
        conferencing: ConferencingArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Also compute cooperation thresholds
        #[arg(long)]
        thresholds: bool,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deterministic-coding verdict for positive conferencing capacities
    Dichotomy {
        #[command(flatten)]
        channel: ChannelArg,
        #[command(flatten)]
        conferencing: ConferencingArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Region CSV path when the region branch applies
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// What is known about the deterministic region without conferencing
    Nonconf {
        #[command(flatten)]
        channel: ChannelArg,
        #[command(flatten)]
        search: SearchArgs,
        /// Also write the report to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full coding pipeline and report per-stage worst-case errors
    Simulate {
        #[command(flatten)]
        channel: ChannelArg,
        #[command(flatten)]
        conferencing: ConferencingArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Inner blocklength of the pipeline
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Experiment CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Serialize the final deterministic code to this JSON file
        #[arg(long)]
        code_out: Option<PathBuf>,
    },
    /// Attack a random code with every applicable strategy
    Attack {
        #[command(flatten)]
        channel: ChannelArg,
        #[command(flatten)]
        search: SearchArgs,
        /// Blocklength of the attacked code
        #[arg(long, default_value_t = 6)]
        n: usize,
        /// Sender-1 message count
        #[arg(long, default_value_t = 2)]
        m1: usize,
        /// Sender-2 message count
        #[arg(long, default_value_t = 2)]
        m2: usize,
        /// Monte Carlo draws for the symmetrizer attack
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        /// Report CSV path; rows are appended when the file exists
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Input(String),
    Compute(String),
}

impl CliError {
    fn report(self) -> ExitCode {
        match self {
            CliError::Input(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(EXIT_INPUT)
            }
            CliError::Compute(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(EXIT_COMPUTE)
            }
        }
    }
}

impl From<RegionError> for CliError {
    fn from(err: RegionError) -> Self {
        match err {
            RegionError::BudgetExceeded(_) | RegionError::Symmetrizability(_) => {
                CliError::Compute(err.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<CodingError> for CliError {
    fn from(err: CodingError) -> Self {
        match err {
            CodingError::CapExceeded(_)
            | CodingError::RetriesExhausted { .. }
            | CodingError::BudgetExceeded(_)
            | CodingError::BudgetViolation(_)
            | CodingError::SymmetrizableChannel
            | CodingError::Symmetrizability(_) => CliError::Compute(err.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => err.report(),
    }
}

fn load_channel(spec: &str) -> Result<ChannelSpec, CliError> {
    match builtin_channel(spec) {
        Ok(ch) => Ok(ch),
        Err(avmac::ChannelError::UnknownName(_)) => ChannelSpec::from_path(spec)
            .map_err(|e| CliError::Input(format!("channel `{spec}`: {e}"))),
        Err(e) => Err(CliError::Input(e.to_string())),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Input(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Symm { channel, tol, out } => cmd_symm(&channel.channel, tol, out),
        Command::Region {
            channel,
            conferencing,
            search,
            thresholds,
            out,
        } => cmd_region(&channel.channel, &conferencing, &search, thresholds, out),
        Command::Dichotomy {
            channel,
            conferencing,
            search,
            out,
        } => cmd_dichotomy(&channel.channel, &conferencing, &search, out),
        Command::Nonconf {
            channel,
            search,
            out,
        } => cmd_nonconf(&channel.channel, &search, out),
        Command::Simulate {
            channel,
            conferencing,
            search,
            n,
            out,
            code_out,
        } => cmd_simulate(&channel.channel, &conferencing, &search, n, out, code_out),
        Command::Attack {
            channel,
            search,
            n,
            m1,
            m2,
            draws,
            out,
        } => cmd_attack(&channel.channel, &search, n, m1, m2, draws, out),
    }
}

fn channel_header(name: &str, ch: &ChannelSpec) -> String {
    format!(
        "channel: {name} (nx={} ny={} nz={} ns={})\n",
        ch.nx(),
        ch.ny(),
        ch.nz(),
        ch.ns()
    )
}

fn cmd_symm(name: &str, tol: f64, out: Option<PathBuf>) -> Result<(), CliError> {
    let ch = load_channel(name)?;
    let mut report = channel_header(name, &ch);
    let _ = writeln!(report, "tolerance: {tol}");
    for kind in SymmetrizerKind::ALL {
        let cert = check_symmetrizable(&ch, kind, tol).map_err(|e| match e {
            avmac::SymmetrizabilityError::InvalidTolerance(_) => CliError::Input(e.to_string()),
            other => CliError::Compute(other.to_string()),
        })?;
        let _ = writeln!(
            report,
            "{}: symmetrizable={} residual={:e}{}",
            kind.label(),
            cert.feasible,
            cert.residual,
            if cert.is_marginal() {
                "  [marginal: residual within (1e-7, 1e-4); verdict is borderline]"
            } else {
                ""
            }
        );
        if cert.feasible {
            for row in 0..cert.rows {
                let entries: Vec<String> = (0..cert.ns)
                    .map(|s| format!("{:.6}", cert.sigma_at(row, s)))
                    .collect();
                let _ = writeln!(report, "  sigma[{row}] = [{}]", entries.join(", "));
            }
        }
    }
    print!("{report}");
    if out.is_some() {
        emit(&out, &report)?;
    }
    Ok(())
}

fn region_csv(name: &str, ch: &ChannelSpec, region: &RegionApproximation, extra: &str) -> String {
    let mut csv = String::new();
    let _ = writeln!(csv, "# avmac region");
    let _ = writeln!(
        csv,
        "# channel={name} nx={} ny={} nz={} ns={}",
        ch.nx(),
        ch.ny(),
        ch.nz(),
        ch.ns()
    );
    let (c1, c2) = region.conferencing;
    let _ = writeln!(csv, "# c1={c1} c2={c2}");
    let r = &region.resolution;
    let _ = writeln!(
        csv,
        "# seed={} p_restarts={} directions={} ascent_sweeps={} nu={} q_grid={} pgd_restarts={} pgd_iters={} truncated={}",
        r.seed,
        r.p_restarts,
        r.directions,
        r.ascent_sweeps,
        r.nu,
        r.q_grid,
        r.pgd_restarts,
        r.pgd_iters,
        r.truncated
    );
    let _ = writeln!(
        csv,
        "# max_r1={} max_r2={} max_sum={}",
        region.max_r1(),
        region.max_r2(),
        region.max_sum_rate()
    );
    if !extra.is_empty() {
        csv.push_str(extra);
    }
    let _ = writeln!(csv, "# bound_record,index,b1,b2,b3a,b3b");
    for (i, rec) in region.bound_records.iter().enumerate() {
        let _ = writeln!(
            csv,
            "# bound_record,{i},{},{},{},{}",
            rec.b1, rec.b2, rec.b3a, rec.b3b
        );
    }
    csv.push_str("R1,R2\n");
    for &(r1, r2) in &region.inner_vertices {
        let _ = writeln!(csv, "{r1},{r2}");
    }
    csv
}

fn cmd_region(
    name: &str,
    conferencing: &ConferencingArgs,
    search: &SearchArgs,
    thresholds: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let ch = load_channel(name)?;
    let (c1, c2) = conferencing.bits();
    let opts = search.region_options();
    let region = capacity_region(&ch, c1, c2, &opts)?;
    let mut extra = String::new();
    if thresholds {
        let t = cooperation_thresholds(&ch, &opts)?;
        let _ = writeln!(
            extra,
            "# c_infinity={} sum_threshold={} c1_threshold={} c2_threshold={}",
            t.c_infinity, t.sum_threshold, t.c1_threshold, t.c2_threshold
        );
    }
    let csv = region_csv(name, &ch, &region, &extra);
    emit(&out, &csv)
}

fn cmd_dichotomy(
    name: &str,
    conferencing: &ConferencingArgs,
    search: &SearchArgs,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let ch = load_channel(name)?;
    let (c1, c2) = conferencing.bits();
    let opts = search.region_options();
    match deterministic_capacity(&ch, c1, c2, &opts)? {
        DichotomyOutcome::Zero { certificate } => {
            println!("{}", channel_header(name, &ch).trim_end());
            println!(
                "verdict: (X,Y)-symmetrizable (residual {:e}); deterministic region = {{(0,0)}}",
                certificate.residual
            );
            if let Some(path) = out {
                let content = "# avmac dichotomy: zero region\nR1,R2\n0,0\n";
                std::fs::write(&path, content)
                    .map_err(|e| CliError::Input(format!("writing {}: {e}", path.display())))?;
            }
        }
        DichotomyOutcome::Region {
            certificate,
            region,
        } => {
            println!("{}", channel_header(name, &ch).trim_end());
            println!(
                "verdict: not (X,Y)-symmetrizable (residual {:e}); deterministic region equals \
                 the random-coding region",
                certificate.residual
            );
            println!(
                "inner approximation: max_r1={} max_r2={} max_sum={}",
                region.max_r1(),
                region.max_r2(),
                region.max_sum_rate()
            );
            if out.is_some() {
                let csv = region_csv(name, &ch, &region, "");
                emit(&out, &csv)?;
            }
        }
    }
    Ok(())
}

fn cmd_nonconf(name: &str, search: &SearchArgs, out: Option<PathBuf>) -> Result<(), CliError> {
    let ch = load_channel(name)?;
    let opts = search.region_options();
    let verdict = nonconferencing_verdict(&ch, &opts)?;
    let mut report = channel_header(name, &ch);
    let _ = writeln!(
        report,
        "XY: {}  X: {}  Y: {}",
        verdict.xy.feasible, verdict.x.feasible, verdict.y.feasible
    );
    match &verdict.case {
        NonconferencingCase::FullRegion { region } => {
            let _ = writeln!(
                report,
                "case 1: no symmetrizability; deterministic region equals the full region \
                 (nonempty interior)"
            );
            let _ = writeln!(
                report,
                "inner approximation: max_r1={} max_r2={} max_sum={}",
                region.max_r1(),
                region.max_r2(),
                region.max_sum_rate()
            );
            let _ = writeln!(report, "R1,R2");
            for &(r1, r2) in &region.inner_vertices {
                let _ = writeln!(report, "{r1},{r2}");
            }
        }
        NonconferencingCase::Sender1AxisOnly { r1_bound } => {
            let _ = writeln!(
                report,
                "case 2: Y-symmetrizable only; region contained in [0, {r1_bound}] x {{0}} \
                 (upper bound only)"
            );
        }
        NonconferencingCase::Sender2AxisOnly { r2_bound } => {
            let _ = writeln!(
                report,
                "case 3: X-symmetrizable only; region contained in {{0}} x [0, {r2_bound}] \
                 (upper bound only)"
            );
        }
        NonconferencingCase::Zero { both_single_sided } => {
            if *both_single_sided {
                let _ = writeln!(
                    report,
                    "case: both X- and Y-symmetrizable (not (X,Y)); deterministic region = {{(0,0)}}"
                );
            } else {
                let _ = writeln!(
                    report,
                    "case 4: (X,Y)-symmetrizable; deterministic region = {{(0,0)}}"
                );
            }
        }
    }
    print!("{report}");
    if out.is_some() {
        emit(&out, &report)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn experiment_row(
    n: usize,
    m1: usize,
    m2: usize,
    c1: f64,
    c2: f64,
    worst: f64,
    mode: &str,
    seed: u64,
) -> String {
    format!("{n},{m1},{m2},{c1},{c2},{worst},{mode},{seed}\n")
}

fn cmd_simulate(
    name: &str,
    conferencing: &ConferencingArgs,
    search: &SearchArgs,
    n: usize,
    out: Option<PathBuf>,
    code_out: Option<PathBuf>,
) -> Result<(), CliError> {
    let ch = load_channel(name)?;
    let (c1, c2) = conferencing.bits();
    if c1 <= 0.0 && c2 <= 0.0 {
        return Err(CliError::Input(
            "the pipeline needs a positive conferencing capacity (--c1 or --c2)".into(),
        ));
    }
    if n < 2 {
        return Err(CliError::Input("--n must be at least 2".into()));
    }
    let seed = search.seed;
    let policy = avmac::InputPolicy::uniform_independent(ch.nx(), ch.ny());

    // Inner rates: two messages per sender when the robust pentagon
    // allows it, falling back to sender 1 only, then to a single pair.
    let copts = CompoundCodeOptions::default();
    let qopts = QOptions::default();
    let bounds = avmac::robust_bounds(&policy, &ch, c1 / 2.0, c2, &qopts)?;
    let unit = 1.0 / n as f64;
    let sum_bound = bounds.b3a.min(bounds.b3b);
    let rates = if unit <= bounds.b1 - copts.gap
        && unit <= bounds.b2 - copts.gap
        && 2.0 * unit <= sum_bound - copts.gap
    {
        (unit, unit)
    } else if unit <= bounds.b1 - copts.gap && unit <= sum_bound - copts.gap {
        (unit, 0.0)
    } else {
        (0.0, 0.0)
    };

    let mut csv = String::new();
    let _ = writeln!(csv, "# avmac simulate");
    let _ = writeln!(
        csv,
        "# channel={name} nx={} ny={} nz={} ns={}",
        ch.nx(),
        ch.ny(),
        ch.nz(),
        ch.ns()
    );
    let _ = writeln!(
        csv,
        "# c1={c1} c2={c2} n={n} seed={seed} inner_rates=({},{})",
        rates.0, rates.1
    );
    csv.push_str("n,m1,m2,c1,c2,worst_err,mode,seed\n");

    let inner = avmac::build_compound_code(&ch, &policy, n, rates, c1 / 2.0, c2, seed, &copts)?;
    let (inner_worst, _) = avmac::worst_case_error(&inner, &ch, avmac::WorstCaseMode::Exhaustive)?;
    csv.push_str(&experiment_row(
        inner.n(),
        inner.m1(),
        inner.m2(),
        c1,
        c2,
        inner_worst,
        "compound",
        seed,
    ));

    let rc = avmac::robustify(
        &inner,
        &RobustifyOptions {
            seed,
            ..RobustifyOptions::default()
        },
    )?;
    let (lambda, _) = avmac::worst_randomized_error(&rc, &ch)?;
    csv.push_str(&experiment_row(
        rc.n(),
        rc.m1(),
        rc.m2(),
        c1,
        c2,
        lambda,
        "robustified",
        seed,
    ));

    let reduced = avmac::reduce_randomness(&rc, &ch, n, lambda.max(1e-9), seed)?;
    let (reduced_err, _) = avmac::worst_randomized_error(&reduced, &ch)?;
    csv.push_str(&experiment_row(
        reduced.n(),
        reduced.m1(),
        reduced.m2(),
        c1,
        c2,
        reduced_err,
        "reduced",
        seed,
    ));

    let prefix = avmac::positive_rate_prefix(
        &ch,
        n * n,
        if c1 > 0.0 { c1 } else { c2 },
        seed,
        &PrefixOptions::default(),
    )?;
    let (prefix_err, _) = avmac::worst_case_error(&prefix, &ch, avmac::WorstCaseMode::Exhaustive)?;
    csv.push_str(&experiment_row(
        prefix.n(),
        prefix.m1(),
        prefix.m2(),
        c1,
        c2,
        prefix_err,
        "prefix",
        seed,
    ));

    let combined = avmac::eliminate_correlation(&prefix, &reduced, c1, c2)?;
    let (combined_err, _) =
        avmac::worst_case_error(&combined, &ch, avmac::WorstCaseMode::Exhaustive)?;
    csv.push_str(&experiment_row(
        combined.n(),
        combined.m1(),
        combined.m2(),
        c1,
        c2,
        combined_err,
        "eliminated",
        seed,
    ));
    let _ = writeln!(
        csv,
        "# bound_check: eliminated {} <= prefix {} + 3*lambda {} + 1e-9: {}",
        combined_err,
        prefix_err,
        3.0 * lambda,
        combined_err <= prefix_err + 3.0 * lambda + 1e-9
    );

    if let Some(path) = code_out {
        std::fs::write(&path, combined.to_json_string())
            .map_err(|e| CliError::Input(format!("writing {}: {e}", path.display())))?;
    }
    emit(&out, &csv)
}

fn attack_rows(outcomes: &[AttackOutcome], n: usize, m1: usize, m2: usize, seed: u64) -> String {
    let mut rows = String::new();
    for o in outcomes {
        rows.push_str(&experiment_row(
            n,
            m1,
            m2,
            0.0,
            0.0,
            o.achieved,
            &o.strategy.label(),
            seed,
        ));
    }
    rows
}

fn cmd_attack(
    name: &str,
    search: &SearchArgs,
    n: usize,
    m1: usize,
    m2: usize,
    draws: usize,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let ch = load_channel(name)?;
    if n == 0 || m1 == 0 || m2 == 0 {
        return Err(CliError::Input("n, m1, m2 must be positive".into()));
    }
    let seed = search.seed;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let code = avmac::random_code(&mut rng, &ch, n, m1, m2).map_err(CliError::from)?;

    let mut outcomes = Vec::new();
    match avmac::exhaustive_attack(&code, &ch) {
        Ok(o) => outcomes.push(o),
        Err(avmac::AttackError::Coding(CodingError::CapExceeded(_))) => {}
        Err(e) => return Err(CliError::Compute(e.to_string())),
    }
    outcomes.push(avmac::greedy_attack(&code, &ch).map_err(|e| CliError::Compute(e.to_string()))?);
    for kind in [SymmetrizerKind::XY, SymmetrizerKind::X, SymmetrizerKind::Y] {
        let cert =
            check_symmetrizable(&ch, kind, 1e-7).map_err(|e| CliError::Compute(e.to_string()))?;
        if cert.feasible {
            let o = avmac::symmetrizer_attack(&code, &ch, &cert, seed, draws)
                .map_err(|e| CliError::Compute(e.to_string()))?;
            outcomes.push(o);
        }
    }

    let rows = attack_rows(&outcomes, n, m1, m2, seed);
    match out {
        Some(path) => append_experiment_rows(&path, name, &ch, &rows)?,
        None => {
            print!("n,m1,m2,c1,c2,worst_err,mode,seed\n{rows}");
        }
    }
    Ok(())
}

fn append_experiment_rows(
    path: &Path,
    name: &str,
    ch: &ChannelSpec,
    rows: &str,
) -> Result<(), CliError> {
    let mut content = if path.exists() {
        std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("reading {}: {e}", path.display())))?
    } else {
        format!(
            "# avmac attack\n# channel={name} nx={} ny={} nz={} ns={}\nn,m1,m2,c1,c2,worst_err,mode,seed\n",
            ch.nx(),
            ch.ny(),
            ch.nz(),
            ch.ns()
        )
    };
    content.push_str(rows);
    std::fs::write(path, content)
        .map_err(|e| CliError::Input(format!("writing {}: {e}", path.display())))
}
