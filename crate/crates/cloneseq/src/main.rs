use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cloneseq::cloner::{
    bb84_product_ansatz, fidelity_report, fourier_dual, joint_output_state,
    joint_output_state_dual, sixstate_product_ansatz, AmplitudeMatrix, CloneSide,
};
use cloneseq::infotheory::{bb84_optimal_fe, curve_point, sixstate_optimal_fe, threshold};
use cloneseq::optimizer::{
    ansatz_point, lagrangian_residual, lagrangian_residual_at, optimize, verify_tensor_optimality,
    OptimizationProblem, Parameterization,
};
use cloneseq::output::{Format, Table};
use cloneseq::qkit::{bell_state, BasisMode, BitVector, PauliLabel, Protocol};
use cloneseq::simulator::{self, ClonerSpec, SimConfig};

#[derive(Parser)]
#[command(
    name = "cloneseq",
    version,
    about = "Cloning attacks on BB84 and six-state QKD with same-basis qubit sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Bb84,
    #[value(name = "six-state")]
    SixState,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Protocol {
        match p {
            ProtocolArg::Bb84 => Protocol::Bb84,
            ProtocolArg::SixState => Protocol::SixState,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Independent,
    Correlated,
}

impl From<ModeArg> for BasisMode {
    fn from(m: ModeArg) -> BasisMode {
        match m {
            ModeArg::Independent => BasisMode::Independent,
            ModeArg::Correlated => BasisMode::Correlated,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Security threshold: Bob's fidelity where the key-rate bound vanishes
    Threshold {
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Trade-off curve F_B -> (F_E, I_AB, I_AE, rate) under the optimal attack
    Sweep {
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Numerically optimize Eve's fidelity at fixed Bob fidelity
    Optimize {
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, value_enum, default_value = "correlated")]
        mode: ModeArg,
        #[arg(long)]
        fb: f64,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Optimize the 3-parameter tensor-power family instead of all
        /// 4^N weights
        #[arg(long)]
        tensor: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte-Carlo simulation of the attack
    Simulate {
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, value_enum, default_value = "correlated")]
        mode: ModeArg,
        #[arg(long)]
        fb: f64,
        #[arg(long, default_value_t = 100_000)]
        rounds: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Self-checks of the formalism and the optimality claims
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        /// Deliberately corrupt one quantity first; the suite must then fail
        /// (negative control for the checks themselves)
        #[arg(long, hide = true)]
        tamper: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Ansatz,
    Optimality,
    Lagrangian,
    All,
}

fn write_table(table: &Table, output: &OutputArgs) -> cloneseq::Result<()> {
    let format: Format = output.format.into();
    match &output.out {
        Some(path) => {
            let mut f = File::create(path)
                .map_err(|e| cloneseq::Error::InvalidInput(format!("cannot create file: {e}")))?;
            table.write(format, &mut f)
        }
        None => {
            let stdout = std::io::stdout();
            table.write(format, &mut stdout.lock())
        }
    }
}

fn cmd_threshold(protocol: Protocol, output: &OutputArgs) -> cloneseq::Result<()> {
    let t = threshold(protocol, 1e-12)?;
    eprintln!("{} threshold: F_B = {t:.10}", protocol.name());
    let point = curve_point(protocol, t)?;
    let mut table = Table::new("threshold")
        .param("protocol", protocol.name())
        .columns(&["F_B", "F_E", "I_AB", "I_AE", "rate"]);
    table.push_row(vec![
        point.f_b,
        point.f_e,
        point.i_ab,
        point.i_ae,
        point.rate_lower_bound,
    ])?;
    write_table(&table, output)
}

fn cmd_sweep(
    protocol: Protocol,
    from: f64,
    to: f64,
    step: f64,
    output: &OutputArgs,
) -> cloneseq::Result<()> {
    if step <= 0.0 || to < from {
        return Err(cloneseq::Error::InvalidInput(
            "need step > 0 and to >= from".into(),
        ));
    }
    let mut table = Table::new("sweep")
        .param("protocol", protocol.name())
        .param("from", from)
        .param("to", to)
        .param("step", step)
        .columns(&["F_B", "F_E", "I_AB", "I_AE", "rate"]);
    let steps = ((to - from) / step).round() as usize;
    for k in 0..=steps {
        let f_b = (from + k as f64 * step).min(to);
        let p = curve_point(protocol, f_b)?;
        table.push_row(vec![p.f_b, p.f_e, p.i_ab, p.i_ae, p.rate_lower_bound])?;
    }
    write_table(&table, output)
}

#[allow(clippy::too_many_arguments)]
fn cmd_optimize(
    protocol: Protocol,
    n: usize,
    mode: BasisMode,
    fb: f64,
    restarts: usize,
    seed: u64,
    tensor: bool,
    output: &OutputArgs,
) -> cloneseq::Result<()> {
    let mut problem = OptimizationProblem::new(protocol, n, mode, fb);
    problem.restarts = restarts;
    problem.seed = seed;
    if tensor {
        problem.parameterization = Parameterization::TensorPower;
    }
    let result = optimize(&problem)?;
    let closed = match protocol {
        Protocol::Bb84 => bb84_optimal_fe(fb)?,
        Protocol::SixState => sixstate_optimal_fe(fb)?,
    };
    let mut table = Table::new("optimize")
        .param("protocol", protocol.name())
        .param("n", n as u64)
        .param("mode", mode.name())
        .param("restarts", restarts as u64)
        .param("seed", seed)
        .param(
            "parameterization",
            if tensor { "tensor-power" } else { "general" },
        )
        .columns(&[
            "F_B",
            "F_E",
            "F_E_closed_form",
            "constraint_target",
            "constraint_spread_E",
            "constraint_spread_B",
        ]);
    table.push_row(vec![
        result.f_b_achieved,
        result.f_e,
        closed,
        result.constraint_residuals[0],
        result.constraint_residuals[1],
        result.constraint_residuals[2],
    ])?;
    write_table(&table, output)
}

fn cmd_simulate(
    protocol: Protocol,
    n: usize,
    mode: BasisMode,
    fb: f64,
    rounds: u64,
    seed: u64,
    output: &OutputArgs,
) -> cloneseq::Result<()> {
    let report = simulator::run(&SimConfig {
        protocol,
        n,
        mode,
        cloner: ClonerSpec::ClosedForm { f_b: fb },
        rounds,
        seed,
    })?;
    let mut table = Table::new("simulate")
        .param("protocol", protocol.name())
        .param("n", n as u64)
        .param("mode", mode.name())
        .param("rounds", rounds)
        .param("seed", seed)
        .columns(&[
            "side_bob",
            "F_empirical",
            "F_analytic",
            "std_error",
            "z_score",
        ]);
    for (is_bob, s) in [(1.0, &report.bob), (0.0, &report.eve)] {
        table.push_row(vec![
            is_bob,
            s.empirical_fidelity,
            s.analytic_fidelity,
            s.std_error,
            s.z_score,
        ])?;
    }
    write_table(&table, output)
}

struct Suite {
    failures: u32,
    checks: u32,
}

impl Suite {
    fn new() -> Self {
        Suite {
            failures: 0,
            checks: 0,
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: impl std::fmt::Display) {
        self.checks += 1;
        if ok {
            println!("ok   {name} ({detail})");
        } else {
            self.failures += 1;
            println!("FAIL {name} ({detail})");
        }
    }
}

fn random_cloner(rng: &mut ChaCha8Rng, n: usize) -> AmplitudeMatrix {
    let dim = 1usize << n;
    let mut entries: Vec<Complex64> = (0..dim * dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let norm: f64 = entries.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for e in &mut entries {
        *e /= norm;
    }
    AmplitudeMatrix::new(entries, n).expect("normalized")
}

fn suite_ansatz(suite: &mut Suite, tamper: bool) -> cloneseq::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    // dual-expansion equality on random cloners and states
    let mut worst = 0.0f64;
    for n in 1..=2usize {
        for _ in 0..50 {
            let a = random_cloner(&mut rng, n);
            let dim = 1usize << n;
            let mut amps: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let nrm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            for x in &mut amps {
                *x /= nrm;
            }
            let psi = cloneseq::qkit::PureState::new(amps)?;
            let e_form = joint_output_state(&a, &psi)?;
            let mut b_form = joint_output_state_dual(&a, &psi)?;
            if tamper {
                b_form = joint_output_state_dual(&random_cloner(&mut rng, n), &psi)?;
            }
            for (u, w) in e_form.amplitudes().iter().zip(b_form.amplitudes()) {
                worst = worst.max((u - w).norm());
            }
        }
    }
    suite.check("dual-expansion equality", worst < 1e-10, format!("max gap {worst:.2e}"));

    // Fourier dual is an involution
    let mut worst = 0.0f64;
    for n in 1..=2usize {
        for _ in 0..50 {
            let a = random_cloner(&mut rng, n);
            let back = fourier_dual(&fourier_dual(&a));
            for (u, w) in a.entries().iter().zip(back.entries()) {
                worst = worst.max((u - w).norm());
            }
        }
    }
    suite.check("dual involution", worst < 1e-12, format!("max gap {worst:.2e}"));

    // Bell basis orthonormality
    let mut worst = 0.0f64;
    for n in 1..=2usize {
        let dim = 1usize << n;
        let labels: Vec<PauliLabel> = (0..dim * dim)
            .map(|i| {
                PauliLabel::new(
                    BitVector::from_index(i / dim, n).unwrap(),
                    BitVector::from_index(i % dim, n).unwrap(),
                )
                .unwrap()
            })
            .collect();
        for (i, li) in labels.iter().enumerate() {
            for (j, lj) in labels.iter().enumerate() {
                let ov = bell_state(li).overlap_mag(&bell_state(lj));
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ov - expect).abs());
            }
        }
    }
    suite.check("Bell orthonormality", worst < 1e-12, format!("max gap {worst:.2e}"));

    // closed-form ansatz fidelities
    let mut worst = 0.0f64;
    for n in 1..=2usize {
        for k in 0..=5 {
            let f_b = 0.55 + 0.45 * k as f64 / 5.0;
            let a = bb84_product_ansatz(f_b, n)?;
            let ens = cloneseq::qkit::enumerate_ensemble(Protocol::Bb84, n, BasisMode::Independent)?;
            let rb = fidelity_report(&a, &ens, CloneSide::Bob)?;
            let re = fidelity_report(&a, &ens, CloneSide::Eve)?;
            worst = worst.max((rb.mean_average_fidelity - f_b).abs());
            worst = worst.max((re.mean_average_fidelity - bb84_optimal_fe(f_b)?).abs());
        }
        for k in 0..=5 {
            let f_b = 0.4 + 0.6 * k as f64 / 5.0;
            let a = sixstate_product_ansatz(f_b, n)?;
            let ens =
                cloneseq::qkit::enumerate_ensemble(Protocol::SixState, n, BasisMode::Independent)?;
            let rb = fidelity_report(&a, &ens, CloneSide::Bob)?;
            let re = fidelity_report(&a, &ens, CloneSide::Eve)?;
            worst = worst.max((rb.mean_average_fidelity - f_b).abs());
            worst = worst.max((re.mean_average_fidelity - sixstate_optimal_fe(f_b)?).abs());
        }
    }
    suite.check(
        "ansatz fidelity closed forms",
        worst < 1e-10,
        format!("max gap {worst:.2e}"),
    );
    Ok(())
}

fn suite_optimality(suite: &mut Suite, tamper: bool) -> cloneseq::Result<()> {
    for protocol in [Protocol::Bb84, Protocol::SixState] {
        let lo = match protocol {
            Protocol::Bb84 => 0.6,
            Protocol::SixState => 0.5,
        };
        let grid: Vec<f64> = (0..5).map(|k| lo + (0.95 - lo) * k as f64 / 4.0).collect();
        let report = verify_tensor_optimality(protocol, 1, &grid, 8, 7)?;
        let mut gap = report.max_gap_to_closed_form();
        if tamper {
            gap += 1e-3;
        }
        suite.check(
            &format!("{} optimum matches closed form", protocol.name()),
            gap < 1e-5,
            format!("max gap {gap:.2e}"),
        );
        suite.check(
            &format!("{} modes agree", protocol.name()),
            report.max_mode_gap() < 1e-8,
            format!("mode gap {:.2e}", report.max_mode_gap()),
        );
    }
    Ok(())
}

fn suite_lagrangian(suite: &mut Suite, tamper: bool) -> cloneseq::Result<()> {
    let mut worst = 0.0f64;
    for protocol in [Protocol::Bb84, Protocol::SixState] {
        for n in 1..=3 {
            for &f_b in &[0.75, 0.85, 0.9] {
                let mut r = lagrangian_residual(protocol, n, f_b)?;
                if tamper {
                    r += 1e-6;
                }
                worst = worst.max(r);
            }
        }
    }
    suite.check(
        "stationarity at the optimal attack",
        worst < 1e-8,
        format!("max residual {worst:.2e}"),
    );

    let mut least = f64::INFINITY;
    for protocol in [Protocol::Bb84, Protocol::SixState] {
        let (v, x, y) = ansatz_point(protocol, 0.85)?;
        least = least.min(lagrangian_residual_at(protocol, 2, v * 1.05, x * 0.95, y)?);
    }
    suite.check(
        "stationarity fails off the optimum",
        least > 1e-3,
        format!("min residual {least:.2e}"),
    );
    Ok(())
}

fn cmd_verify(suite_arg: SuiteArg, tamper: bool) -> cloneseq::Result<bool> {
    let mut suite = Suite::new();
    if matches!(suite_arg, SuiteArg::Ansatz | SuiteArg::All) {
        suite_ansatz(&mut suite, tamper)?;
    }
    if matches!(suite_arg, SuiteArg::Optimality | SuiteArg::All) {
        suite_optimality(&mut suite, tamper)?;
    }
    if matches!(suite_arg, SuiteArg::Lagrangian | SuiteArg::All) {
        suite_lagrangian(&mut suite, tamper)?;
    }
    println!(
        "{}/{} checks passed",
        suite.checks - suite.failures,
        suite.checks
    );
    Ok(suite.failures == 0)
}

fn run(cli: Cli) -> cloneseq::Result<bool> {
    match cli.command {
        Command::Threshold { protocol, output } => {
            cmd_threshold(protocol.into(), &output)?;
            Ok(true)
        }
        Command::Sweep {
            protocol,
            from,
            to,
            step,
            output,
        } => {
            cmd_sweep(protocol.into(), from, to, step, &output)?;
            Ok(true)
        }
        Command::Optimize {
            protocol,
            n,
            mode,
            fb,
            restarts,
            seed,
            tensor,
            output,
        } => {
            cmd_optimize(
                protocol.into(),
                n,
                mode.into(),
                fb,
                restarts,
                seed,
                tensor,
                &output,
            )?;
            Ok(true)
        }
        Command::Simulate {
            protocol,
            n,
            mode,
            fb,
            rounds,
            seed,
            output,
        } => {
            cmd_simulate(protocol.into(), n, mode.into(), fb, rounds, seed, &output)?;
            Ok(true)
        }
        Command::Verify { suite, tamper } => cmd_verify(suite, tamper),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::FAILURE
        }
    }
}
