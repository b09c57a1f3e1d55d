//! `symclone`: batch runner for the cloning, NOT, purification, channel and
//! tomography experiments. Every run prints a self-describing report.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use symclone::angmom::{self, CloningSpec, PairProgram};
use symclone::channels::{self, KrausChannel, SpaWeights};
use symclone::optics::{self, EstimatorMode};
use symclone::qcore::{c, fidelity_pure, CMatrix, DensityMatrix, PureState, PSD_FLOOR};
use symclone::report::ExperimentReport;
use symclone::tomography::{self, Shots, TomographyRun};
use symclone::{qcircuit, symmproto, Error};

const EXACT_TOL: f64 = 1e-12;

#[derive(Parser)]
#[command(name = "symclone", version, about = "Universal optimal cloning and NOT experiments")]
struct Cli {
    /// RNG seed for every sampled stage.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Shot count; exact evaluation when omitted.
    #[arg(long, global = true)]
    shots: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Replaces the tolerance of every targeted result.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelName {
    Identity,
    Transpose,
    Depolarizing,
    Unot,
}

impl ChannelName {
    fn channel(self) -> KrausChannel {
        match self {
            ChannelName::Identity => KrausChannel::identity(),
            ChannelName::Transpose => KrausChannel::optimal_transpose(),
            ChannelName::Depolarizing => KrausChannel::depolarizing(),
            ChannelName::Unot => KrausChannel::unot(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            ChannelName::Identity => "identity",
            ChannelName::Transpose => "transpose",
            ChannelName::Depolarizing => "depolarizing",
            ChannelName::Unot => "unot",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Program {
    Singlet,
    Triplet,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaState {
    Singlet,
    Mixed,
    Product,
    Werner,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two comma-separated numbers, got `{s}`")),
    }
}

fn parse_triple(s: &str) -> Result<(f64, f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [a, b, c] => Ok((*a, *b, *c)),
        _ => Err(format!("expected three comma-separated numbers, got `{s}`")),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

#[derive(Subcommand)]
enum Command {
    /// 1→2 cloning with a maximally mixed ancilla.
    Clone {
        /// Input Bloch angles `theta,phi` in radians.
        #[arg(long, default_value = "0,0", value_parser = parse_pair, allow_hyphen_values = true)]
        phi: (f64, f64),
    },
    /// Cloning at Alice with the NOT teleported to Bob, projector and circuit.
    TeleUnot {
        #[arg(long, default_value = "0,0", value_parser = parse_pair, allow_hyphen_values = true)]
        phi: (f64, f64),
    },
    /// Purification of two equally oriented mixed qubits.
    Purify {
        #[arg(long, default_value_t = 0.5)]
        lambda_s: f64,
        #[arg(long, default_value_t = 0.5)]
        lambda_a: f64,
        #[arg(long, default_value = "0,0", value_parser = parse_pair, allow_hyphen_values = true)]
        phi: (f64, f64),
    },
    /// Teleportation of an anti-unitary map programmed by the shared pair.
    ProgramTeleport {
        #[arg(long, default_value = "0,0", value_parser = parse_pair, allow_hyphen_values = true)]
        phi: (f64, f64),
        /// ZYZ Euler angles of the program unitary U.
        #[arg(long, default_value = "0,0,0", value_parser = parse_triple, allow_hyphen_values = true)]
        u_angles: (f64, f64, f64),
    },
    /// N→M cloning and N→(M−N) NOT.
    Nm {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value_t = Program::Singlet)]
        program: Program,
        #[arg(long, default_value = "0,0", value_parser = parse_pair, allow_hyphen_values = true)]
        phi: (f64, f64),
    },
    /// Apply a single-qubit channel, optionally by stochastic sampling.
    Channel {
        #[arg(long, value_enum, default_value_t = ChannelName::Transpose)]
        name: ChannelName,
        #[arg(long, default_value = "0,0", value_parser = parse_pair, allow_hyphen_values = true)]
        phi: (f64, f64),
    },
    /// Structural physical approximation of the partial transpose.
    Spa {
        #[arg(long, value_enum, default_value_t = SpaState::Singlet)]
        state: SpaState,
        /// Werner weight, used with `--state werner`.
        #[arg(long, default_value_t = 1.0)]
        w: f64,
        /// Convex weights `unot_dep,id_tr`.
        #[arg(long, value_parser = parse_pair)]
        weights: Option<(f64, f64)>,
    },
    /// Peres–Horodecki test on a Werner state.
    Ppt {
        #[arg(long)]
        w: f64,
    },
    /// Entanglement-assisted process tomography with a singlet probe.
    Eaqpt {
        #[arg(long, value_enum, default_value_t = ChannelName::Transpose)]
        channel: ChannelName,
        /// Monte Carlo samples for the map fidelity.
        #[arg(long, default_value_t = tomography::DEFAULT_FIDELITY_SAMPLES)]
        samples: usize,
    },
    /// Two-photon coincidence model and fidelity estimators.
    Hom {
        /// Temporal overlap; overrides `--delay`.
        #[arg(long)]
        v: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delay: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_z: f64,
        #[arg(long, default_value_t = 1.0)]
        xi: f64,
        #[arg(long, default_value = "0,0", value_parser = parse_pair, allow_hyphen_values = true)]
        phi: (f64, f64),
        /// Number of delays in a symmetric dip scan over ±scan-max.
        #[arg(long)]
        scan_points: Option<usize>,
        #[arg(long, default_value_t = 5.0)]
        scan_max: f64,
        /// Writes the scan as CSV to this path.
        #[arg(long)]
        scan_csv: Option<PathBuf>,
    },
}

/// Failures that map to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl From<Error> for UsageError {
    fn from(e: Error) -> Self {
        UsageError(e.to_string())
    }
}

type Outcome = Result<ExperimentReport, UsageError>;

struct Ctx {
    seed: u64,
    shots: Option<u64>,
    tolerance: Option<f64>,
}

impl Ctx {
    fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }

    fn no_shots(&self, cmd: &str) -> Result<(), UsageError> {
        match self.shots {
            Some(_) => Err(UsageError(format!("`{cmd}` has no sampled mode; drop --shots"))),
            None => Ok(()),
        }
    }

    fn shots_mode(&self) -> Result<Shots, UsageError> {
        match self.shots {
            None => Ok(Shots::Exact),
            Some(0) => Err(UsageError("--shots must be at least 1".into())),
            Some(n) => Ok(Shots::Sampled(n)),
        }
    }
}

fn input(angles: (f64, f64)) -> PureState {
    PureState::from_bloch_angles(angles.0, angles.1, "q")
}

fn new_report(cmd: &str, ctx: &Ctx) -> Result<ExperimentReport, UsageError> {
    let mut r = ExperimentReport::new(cmd);
    r.parameter("seed", ctx.seed)?;
    r.parameter("shots", ctx.shots.map_or("exact".to_string(), |n| n.to_string()))?;
    Ok(r)
}

fn run_clone(ctx: &Ctx, phi: (f64, f64)) -> Outcome {
    ctx.no_shots("clone")?;
    let mut r = new_report("clone", ctx)?;
    r.parameter("phi", phi)?;
    let out = symmproto::run_cloning_mixed_ancilla(&input(phi))?;
    let tol = ctx.tol(EXACT_TOL);
    r.result("success_probability", out.success_probability, Some(0.75), tol);
    r.result("clone_fidelity", out.fidelities["clone"], Some(5.0 / 6.0), tol);
    Ok(r)
}

fn run_tele_unot(ctx: &Ctx, phi: (f64, f64)) -> Outcome {
    let mut r = new_report("tele-unot", ctx)?;
    r.parameter("phi", phi)?;
    let state = input(phi);
    let out = symmproto::run_cloning_teleunot(&state)?;
    let tol = ctx.tol(EXACT_TOL);
    r.result("success_probability", out.success_probability, Some(0.75), tol);
    r.result("clone_fidelity", out.fidelities["clone"], Some(5.0 / 6.0), tol);
    r.result("unot_fidelity", out.fidelities["unot"], Some(2.0 / 3.0), tol);
    let circuit = qcircuit::run_network(&state)?;
    r.result("circuit_p_ancilla_1", circuit.outcome_1.0, Some(0.25), tol);
    let symmproto::PostState::Pure(post) = &out.post_state else {
        return Err(UsageError("unexpected mixed post-state".into()));
    };
    let distance = circuit.outcome_0.1.canonical_distance(post)?;
    r.result("circuit_state_distance", distance, Some(0.0), tol);
    let teleported = fidelity_pure(&circuit.outcome_1.1.relabel(["q"])?, &state)?;
    r.result("circuit_teleport_fidelity", teleported, Some(1.0), tol);
    if let Some(shots) = ctx.shots {
        let counts = qcircuit::sample_network(&state, shots, ctx.seed)?;
        let p_hat = counts.ones as f64 / shots as f64;
        let stderr = (0.25 * 0.75 / shots as f64).sqrt();
        r.result_with_stderr("sampled_p_ancilla_1", p_hat, Some(0.25), ctx.tol(3.0 * stderr), Some(stderr));
        r.observe("sampled_counts", counts)?;
    }
    Ok(r)
}

fn run_purify(ctx: &Ctx, lambda_s: f64, lambda_a: f64, phi: (f64, f64)) -> Outcome {
    ctx.no_shots("purify")?;
    let mut r = new_report("purify", ctx)?;
    r.parameter("lambda_s", lambda_s)?;
    r.parameter("lambda_a", lambda_a)?;
    r.parameter("phi", phi)?;
    let out = symmproto::run_purification(&symmproto::PurificationInput::new(lambda_s, lambda_a, input(phi))?)?;
    let want = symmproto::purification_closed_form(lambda_s, lambda_a);
    let tol = ctx.tol(EXACT_TOL);
    r.result("success_probability", out.success_probability, Some(want.success_probability), tol);
    r.result("f_in", out.fidelities["f_in"], Some(want.f_in), tol);
    r.result("f_out", out.fidelities["f_out"], Some(want.f_out), tol);
    r.result("lambda_out", out.fidelities["lambda_out"], Some(want.lambda_out), tol);
    Ok(r)
}

/// `R_z(a) R_y(b) R_z(c)`.
fn zyz(a: f64, b: f64, g: f64) -> CMatrix {
    let rz = |t: f64| {
        CMatrix::from_row_slice(2, 2, &[c(0.0, -t / 2.0).exp(), c(0.0, 0.0), c(0.0, 0.0), c(0.0, t / 2.0).exp()])
    };
    let (s, co) = (b / 2.0).sin_cos();
    let ry = CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]);
    rz(a) * ry * rz(g)
}

fn run_program_teleport(ctx: &Ctx, phi: (f64, f64), u: (f64, f64, f64)) -> Outcome {
    ctx.no_shots("program-teleport")?;
    let mut r = new_report("program-teleport", ctx)?;
    r.parameter("phi", phi)?;
    r.parameter("u_angles", u)?;
    let out = symmproto::programmable_teleport(&input(phi), &zyz(u.0, u.1, u.2))?;
    let tol = ctx.tol(EXACT_TOL);
    r.result("success_probability", out.success_probability, Some(0.75), tol);
    r.result("clone_fidelity", out.fidelities["clone"], Some(5.0 / 6.0), tol);
    r.result("antiunitary_fidelity", out.fidelities["antiunitary"], Some(2.0 / 3.0), tol);
    Ok(r)
}

fn run_nm(ctx: &Ctx, n: usize, m: usize, program: Program, phi: (f64, f64)) -> Outcome {
    ctx.no_shots("nm")?;
    let mut r = new_report("nm", ctx)?;
    r.parameter("n", n)?;
    r.parameter("m", m)?;
    r.parameter("program", match program {
        Program::Singlet => "singlet",
        Program::Triplet => "triplet",
    })?;
    r.parameter("phi", phi)?;
    let spec = CloningSpec::new(n, m)?;
    let figures = angmom::closed_form_fidelities(spec);
    let tol = ctx.tol(1e-10);
    r.observe("b", angmom::bk_vector(spec))?;
    r.result("beta", spec.beta(), None, 0.0);
    r.result("clone_fidelity_closed", figures.clone_closed, None, 0.0);
    r.result("clone_fidelity_summation", figures.clone_summation, Some(figures.clone_closed), tol);
    r.result("unot_fidelity_closed", figures.unot_closed, None, 0.0);
    if let Some(sum) = figures.unot_summation {
        r.result("unot_fidelity_summation", sum, Some(figures.unot_closed), tol);
    }
    r.result("success_probability_closed", figures.success_probability, None, 0.0);
    let qubits = 2 * m - n;
    if m > n && qubits <= angmom::BRUTE_FORCE_LIMIT {
        let program = match program {
            Program::Singlet => PairProgram::Singlet,
            Program::Triplet => PairProgram::Triplet,
        };
        let out = angmom::run_nm_protocol(spec, &input(phi), program)?;
        r.result("clone_fidelity", out.clone_fidelity, Some(figures.clone_closed), tol);
        r.result("unot_fidelity", out.unot_fidelity, Some(figures.unot_closed), tol);
        r.result("success_probability", out.success_probability, Some(figures.success_probability), tol);
        let agree = (out.clone_fidelity - figures.clone_closed).abs() <= tol
            && (out.unot_fidelity - figures.unot_closed).abs() <= tol
            && (out.success_probability - figures.success_probability).abs() <= tol;
        r.check("brute_force_agreement", agree);
    } else {
        r.observe("brute_force", "skipped")?;
    }
    Ok(r)
}

fn run_channel(ctx: &Ctx, name: ChannelName, phi: (f64, f64)) -> Outcome {
    let mut r = new_report("channel", ctx)?;
    r.parameter("name", name.name())?;
    r.parameter("phi", phi)?;
    let state = input(phi);
    let ch = name.channel();
    let rho = state.to_density();
    let out = channels::apply_channel(&ch, &rho)?;
    let (target, value) = match name {
        ChannelName::Identity => (1.0, fidelity_pure(&out, &state)?),
        ChannelName::Transpose => (2.0 / 3.0, fidelity_pure(&out, &state.conjugate())?),
        ChannelName::Depolarizing => (0.5, fidelity_pure(&out, &state)?),
        ChannelName::Unot => (2.0 / 3.0, fidelity_pure(&out, &state.orthogonal()?)?),
    };
    let tol = ctx.tol(EXACT_TOL);
    r.result("output_fidelity", value, Some(target), tol);
    let ptm = channels::kraus_to_ptm(&ch);
    r.observe("ptm", ptm.rows())?;
    r.observe("output_bloch", out.to_bloch()?)?;
    let via_ptm = channels::ptm_apply(&ptm, &rho)?;
    r.result("ptm_kraus_distance", via_ptm.max_distance(&out), Some(0.0), tol);
    if let Some(shots) = ctx.shots {
        let sampled = channels::sample_stochastic(&ch, &rho, shots, ctx.seed)?;
        let bound = 0.01 * (1e5 / shots as f64).sqrt();
        r.result("sampled_trace_distance", sampled.trace_distance(&out), Some(0.0), ctx.tol(bound));
    }
    Ok(r)
}

fn run_spa(ctx: &Ctx, state: SpaState, w: f64, weights: Option<(f64, f64)>) -> Outcome {
    ctx.no_shots("spa")?;
    let mut r = new_report("spa", ctx)?;
    let (rho, target, label) = match state {
        SpaState::Singlet => (symmproto::singlet("A", "B").to_density(), Some(1.0 / 12.0), "singlet"),
        SpaState::Mixed => (DensityMatrix::maximally_mixed(["A", "B"])?, Some(0.25), "mixed"),
        SpaState::Product => (PureState::basis(&[0, 0], ["A", "B"])?.to_density(), Some(1.0 / 9.0), "product"),
        SpaState::Werner => (channels::werner_state(w)?, None, "werner"),
    };
    r.parameter("state", label)?;
    if matches!(state, SpaState::Werner) {
        r.parameter("w", w)?;
    }
    let weights = weights.map_or(SpaWeights::default(), |(u, t)| SpaWeights { unot_dep: u, id_tr: t });
    r.parameter("weights", weights)?;
    let res = channels::spa_map_weighted(&rho, weights)?;
    let target = if weights == SpaWeights::default() { target } else { None };
    r.result("lambda_min", res.lambda_min, target, ctx.tol(EXACT_TOL));
    r.result("threshold", channels::SPA_THRESHOLD, None, 0.0);
    r.check("output_is_density_matrix", res.output.validate().is_ok());
    let ppt = channels::ppt_test(&rho)?;
    r.observe("syndrome", res.syndrome)?;
    r.observe("ppt_entangled", ppt.entangled)?;
    r.observe("syndrome_agrees_with_ppt", res.syndrome == ppt.entangled)?;
    r.observe("output_eigenvalues", res.output.eigenvalues())?;
    Ok(r)
}

fn run_ppt(ctx: &Ctx, w: f64) -> Outcome {
    ctx.no_shots("ppt")?;
    let mut r = new_report("ppt", ctx)?;
    r.parameter("w", w)?;
    let rep = channels::ppt_test(&channels::werner_state(w)?)?;
    let expected = (1.0 - 3.0 * w) / 4.0;
    r.result("min_eigenvalue", rep.eigenvalues[0], Some(expected), ctx.tol(EXACT_TOL));
    r.observe("eigenvalues", rep.eigenvalues)?;
    r.observe("entangled", rep.entangled)?;
    r.check("entangled_iff_negative", rep.entangled == (expected < -PSD_FLOOR));
    Ok(r)
}

fn run_eaqpt(ctx: &Ctx, channel: ChannelName, samples: usize) -> Outcome {
    let mut r = new_report("eaqpt", ctx)?;
    r.parameter("channel", channel.name())?;
    r.parameter("samples", samples)?;
    let shots = ctx.shots_mode()?;
    let ch = channel.channel();
    let run = TomographyRun::new(symmproto::singlet("A", "B").to_density(), ch.clone(), shots, ctx.seed)?;
    let res = tomography::run_eaqpt(&run, &ch, samples)?;
    let truth = channels::kraus_to_ptm(&ch).rows();
    let tol = match shots {
        Shots::Exact => ctx.tol(1e-9),
        Shots::Sampled(n) => ctx.tol(5.0 / (n as f64).sqrt()),
    };
    for (i, row) in res.ptm.rows().iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            r.result(&format!("m{i}{j}"), *v, Some(truth[i][j]), tol);
        }
    }
    r.result_with_stderr("map_fidelity", res.fidelity.mean, Some(1.0), tol, Some(res.fidelity.stderr));
    r.result("condition_number", res.condition_number, None, 0.0);
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn run_hom(
    ctx: &Ctx,
    v: Option<f64>,
    delay: f64,
    sigma_z: f64,
    xi: f64,
    phi: (f64, f64),
    scan_points: Option<usize>,
    scan_max: f64,
    scan_csv: Option<PathBuf>,
) -> Outcome {
    let shots = ctx.shots.unwrap_or(100_000);
    let mut r = new_report("hom", ctx)?;
    r.parameter("shots", shots)?;
    r.parameter("xi", xi)?;
    r.parameter("phi", phi)?;
    let config = optics::HomConfig::new(input(phi), delay, sigma_z, shots, ctx.seed, xi)?;
    let visibility = match v {
        Some(v) => v,
        None => {
            r.parameter("delay", delay)?;
            r.parameter("sigma_z", sigma_z)?;
            config.visibility()
        }
    };
    r.parameter("v", visibility)?;
    let rec = optics::estimate_r_at_visibility(visibility, shots, ctx.seed)?;
    r.observe("counts", rec)?;
    let ideal = 1.0 + visibility;
    r.result_with_stderr("R_hat", rec.r_hat, Some(ideal), ctx.tol(3.0 * rec.r_err), Some(rec.r_err));
    let corrected = optics::xi_correct(rec.r_hat, xi)?;
    let r_err = rec.r_err / xi;
    r.result_with_stderr("R_corrected", corrected, None, 0.0, Some(r_err));
    for (key, mode) in [("F_clone", EstimatorMode::Clone), ("F_unot", EstimatorMode::Unot)] {
        let f = optics::fidelity_from_r(corrected, mode)?;
        let err = optics::fidelity_error(corrected, r_err, mode)?;
        let target = (xi == 1.0).then(|| optics::fidelity_from_r(ideal, mode)).transpose()?;
        r.result_with_stderr(key, f, target, ctx.tol(3.0 * err), Some(err));
    }
    if let Some(points) = scan_points {
        if points < 2 {
            return Err(UsageError("--scan-points must be at least 2".into()));
        }
        let delays: Vec<f64> = (0..points)
            .map(|i| -scan_max + 2.0 * scan_max * i as f64 / (points - 1) as f64)
            .collect();
        let scan = optics::dip_scan(&config, &delays)?;
        if let Some(path) = scan_csv {
            std::fs::write(&path, optics::scan_to_csv(&scan)?)
                .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        }
        r.observe("scan", scan)?;
    }
    Ok(r)
}

fn dispatch(cli: Cli) -> Outcome {
    let ctx = Ctx { seed: cli.seed, shots: cli.shots, tolerance: cli.tolerance };
    match cli.command {
        Command::Clone { phi } => run_clone(&ctx, phi),
        Command::TeleUnot { phi } => run_tele_unot(&ctx, phi),
        Command::Purify { lambda_s, lambda_a, phi } => run_purify(&ctx, lambda_s, lambda_a, phi),
        Command::ProgramTeleport { phi, u_angles } => run_program_teleport(&ctx, phi, u_angles),
        Command::Nm { n, m, program, phi } => run_nm(&ctx, n, m, program, phi),
        Command::Channel { name, phi } => run_channel(&ctx, name, phi),
        Command::Spa { state, w, weights } => run_spa(&ctx, state, w, weights),
        Command::Ppt { w } => run_ppt(&ctx, w),
        Command::Eaqpt { channel, samples } => run_eaqpt(&ctx, channel, samples),
        Command::Hom { v, delay, sigma_z, xi, phi, scan_points, scan_max, scan_csv } => {
            run_hom(&ctx, v, delay, sigma_z, xi, phi, scan_points, scan_max, scan_csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    let report = match dispatch(cli) {
        Ok(r) => r,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let text = match format {
        Format::Json => report.to_json().map(|s| s + "\n"),
        Format::Csv => report.to_csv(),
    };
    match text {
        Ok(t) => print!("{t}"),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
