//! Command-line surface: constructions, property checks, cost curves and
//! oracle certification, emitting CSV/JSON for plotting and CI.
//!
//! Exit codes: 0 success, 2 usage/parse, 3 domain (rank/size), 4 verification
//! mismatch. The temperature parameter is the dimensionless βE_P everywhere;
//! with `--spectrum` files it is the inverse temperature in the file's energy
//! units. The token `inf` selects the zero-temperature limit.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::measure::{
    average_correlation, build_cnot, build_swap, build_u_d, build_unb, check_implications,
    check_properties, check_state_properties, compose_unbiased_unitary, correlation,
    implication_suite, random, PointerPartition, Probe,
};
use crate::optimal::{
    build_optimal_general, build_optimal_qubit_pointer, c_max, c_max_qubit_closed_form,
    cost_curve, delta_e_corr_analytic, delta_e_corr_numeric, format_float, OptimalConstruction,
    CSV_HEADER,
};
use crate::oracle::{brute_c_max, brute_min_energy};
use crate::states::{gibbs, qubit_pointer_spectrum, DensityMatrix, SectoredSpectrum};

#[derive(Parser, Debug)]
#[command(
    name = "finmeas",
    version,
    about = "Finite-resource projective measurements: optimal correlating channels, \
             property checks, energy costs, and brute-force certification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the correlation ceiling C_max (general and, for --N, closed form)
    Cmax(InstanceArgs),
    /// Build the optimal correlating channel and emit it as JSON
    Build(BuildArgs),
    /// Run the packaged worked-example and implication suites
    Verify(VerifyArgs),
    /// Emit the cooling/correlating cost curve over a fridge-gap grid
    CostCurve(CostCurveArgs),
    /// Certify the construction against the exhaustive oracle
    OracleCheck(InstanceArgs),
    /// End-to-end demonstration on small instances
    Demo,
}

/// Pointer/temperature selection shared by several subcommands.
#[derive(Args, Debug)]
pub struct InstanceArgs {
    /// Number of pointer qubits (single-qubit system)
    #[arg(long = "N", value_name = "N", conflicts_with = "spectrum")]
    pub n: Option<u32>,
    /// Pointer spectrum JSON file: {"energies":[...],"d_S":k}
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Outcome count override for --spectrum files
    #[arg(long)]
    pub ds: Option<usize>,
    /// Dimensionless inverse temperature βE_P, or "inf"
    #[arg(long = "beta-ep")]
    pub beta_ep: String,
    /// Pointer qubit gap E_P (with --N)
    #[arg(long = "e-p", default_value_t = 1.0)]
    pub e_p: f64,
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// System populations as a comma list (default: maximally mixed)
    #[arg(long)]
    pub rho: Option<String>,
    /// Output file (default: stdout)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Verdict tolerance override (also honoured via FINMEAS_TOL)
    #[arg(long)]
    pub tol: Option<f64>,
    /// Randomized ideal-form states for the implication suite
    #[arg(long, default_value_t = 200)]
    pub states: usize,
    /// Randomized composed unitaries for the implication suite
    #[arg(long, default_value_t = 40)]
    pub unitaries: usize,
    /// RNG seed
    #[arg(long, default_value_t = 1234)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridKind {
    Linear,
    Log,
}

#[derive(Args, Debug)]
pub struct CostCurveArgs {
    /// Number of pointer qubits
    #[arg(long = "N", value_name = "N")]
    pub n: u32,
    /// Dimensionless inverse temperature βE_P before cooling
    #[arg(long = "beta-ep")]
    pub beta_ep: String,
    /// Pointer qubit gap E_P
    #[arg(long = "e-p", default_value_t = 1.0)]
    pub e_p: f64,
    /// Smallest fridge gap, in units of E_P
    #[arg(long = "gap-min", default_value_t = 1.0)]
    pub gap_min: f64,
    /// Largest fridge gap, in units of E_P
    #[arg(long = "gap-max", default_value_t = 60.0)]
    pub gap_max: f64,
    /// Number of grid points
    #[arg(long = "gap-count", default_value_t = 100)]
    pub gap_count: usize,
    /// Grid spacing
    #[arg(long, value_enum, default_value_t = GridKind::Log)]
    pub grid: GridKind,
    /// Output CSV file (default: stdout, with the summary on stderr)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Entry point used by the binary: parse, dispatch, map errors to exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Cmax(args) => cmd_cmax(args),
        Command::Build(args) => cmd_build(args),
        Command::Verify(args) => cmd_verify(args),
        Command::CostCurve(args) => cmd_cost_curve(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
        Command::Demo => cmd_demo(),
    }
}

/// "inf" (any case) or a positive float.
pub fn parse_beta(token: &str) -> Result<f64> {
    let t = token.trim();
    if t.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    let v: f64 = t
        .parse()
        .map_err(|_| Error::Usage(format!("cannot parse inverse temperature '{token}'")))?;
    if !(v > 0.0) || v.is_nan() {
        return Err(Error::Usage(
            "inverse temperature must be positive or 'inf'".into(),
        ));
    }
    Ok(v)
}

#[derive(Debug, Deserialize)]
struct SpectrumFile {
    energies: Vec<f64>,
    #[serde(rename = "d_S")]
    d_s: usize,
}

fn load_spectrum(path: &PathBuf, ds_override: Option<usize>) -> Result<SectoredSpectrum> {
    let text = fs::read_to_string(path)?;
    let file: SpectrumFile = serde_json::from_str(&text)
        .map_err(|e| Error::Usage(format!("bad spectrum file {}: {e}", path.display())))?;
    SectoredSpectrum::new(file.energies, ds_override.unwrap_or(file.d_s))
}

/// Resolved instance: sorted pointer spectrum, outcome count, absolute β.
struct Instance {
    ptr: SectoredSpectrum,
    d_s: usize,
    beta: f64,
    beta_ep: f64,
    n: Option<u32>,
}

fn resolve_instance(args: &InstanceArgs) -> Result<Instance> {
    let beta_ep = parse_beta(&args.beta_ep)?;
    match (&args.n, &args.spectrum) {
        (Some(n), None) => {
            if !(args.e_p > 0.0) {
                return Err(Error::Usage("pointer gap must be positive".into()));
            }
            Ok(Instance {
                ptr: qubit_pointer_spectrum(*n, args.e_p)?,
                d_s: 2,
                beta: beta_ep / args.e_p,
                beta_ep,
                n: Some(*n),
            })
        }
        (None, Some(path)) => {
            let ptr = load_spectrum(path, args.ds)?;
            let d_s = ptr.d_s();
            Ok(Instance {
                ptr,
                d_s,
                beta: beta_ep,
                beta_ep,
                n: None,
            })
        }
        _ => Err(Error::Usage(
            "specify exactly one of --N or --spectrum".into(),
        )),
    }
}

fn cmd_cmax(args: &InstanceArgs) -> Result<()> {
    let inst = resolve_instance(args)?;
    let spec = SectoredSpectrum::new(inst.ptr.energies().to_vec(), inst.d_s)?;
    let general = c_max(&spec, inst.beta)?;
    println!("C_max = {}", format_float(general));
    if let Some(n) = inst.n {
        let closed = c_max_qubit_closed_form(n, inst.beta_ep)?;
        println!("closed_form = {}", format_float(closed));
        println!("closed_form_delta = {:.3e}", (general - closed).abs());
    }
    let brute = brute_c_max(&spec, inst.beta)?;
    println!("brute_force_delta = {:.3e}", (general - brute).abs());
    Ok(())
}

fn parse_rho(text: &str, d_s: usize) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|_| Error::Usage(format!("cannot parse populations '{text}'")))?;
    if vals.len() != d_s {
        return Err(Error::Usage(format!(
            "expected {d_s} populations, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn build_from_instance(inst: &Instance, rho: &[f64]) -> Result<OptimalConstruction> {
    let sys = SectoredSpectrum::new(vec![0.0; inst.d_s], inst.d_s)?;
    build_optimal_general(&sys, rho, &inst.ptr, inst.beta)
}

fn construction_json(constr: &OptimalConstruction, beta_token: &str) -> Result<serde_json::Value> {
    // All-states unbiasedness of the emitted channel, as a built-in check.
    let (tau, _) = gibbs(constr.pointer_spectrum(), constr.beta())?;
    let report = check_properties(
        constr.channel(),
        &tau,
        constr.partition(),
        &Probe::AllStates,
    )?;
    Ok(serde_json::json!({
        "d_S": constr.partition().d_s(),
        "d_P": constr.partition().d_p(),
        "beta_ep": beta_token,
        "c_max": constr.c_max(),
        "x_star": constr.x_star(),
        "blocks": constr.partition().blocks(),
        "permutation": constr.permutation().image(),
        "rho_s_diag": constr.rho_s_diag(),
        "initial_energy": constr.initial_energy(),
        "final_energy": constr.final_energy(),
        "dE_II": delta_e_corr_analytic(constr),
        "unbiased_residual": report.unbiased_residual,
    }))
}

fn cmd_build(args: &BuildArgs) -> Result<()> {
    let inst = resolve_instance(&args.instance)?;
    let rho = match &args.rho {
        Some(text) => parse_rho(text, inst.d_s)?,
        None => vec![1.0 / inst.d_s as f64; inst.d_s],
    };
    let constr = build_from_instance(&inst, &rho)?;
    let json = construction_json(&constr, args.instance.beta_ep.trim())?;
    let text = serde_json::to_string_pretty(&json).expect("JSON serialization cannot fail");
    match &args.output {
        Some(path) => fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<()> {
    if let Some(tol) = args.tol {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::Usage("tolerance must be a positive float".into()));
        }
        std::env::set_var("FINMEAS_TOL", format!("{tol}"));
    }
    let mut failures: Vec<String> = vec![];
    let mut case = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures.push(name.to_string());
        }
    };

    let part2 = PointerPartition::singletons(2);

    // Ideal measurement: CNOT with a pure ground-state pointer.
    {
        let ptr = DensityMatrix::basis_state(2, 0)?;
        let r = check_properties(&build_cnot(), &ptr, &part2, &Probe::AllStates)?;
        case(
            "cnot-pure",
            r.unbiased() && r.faithful() && r.noninvasive(),
            r.to_json().to_string(),
        );
    }

    // CNOT with a thermal pointer diag(p, 1−p): biased, and the residual is
    // |ρ00(2p−1) + 1 − p − ρ00| at each probe.
    {
        let p = 0.6;
        let ptr = DensityMatrix::from_diagonal(&[p, 1.0 - p])?;
        let mut worst = 0.0f64;
        for r0 in [0.0, 0.5, 1.0] {
            let probe = DensityMatrix::from_diagonal(&[r0, 1.0 - r0])?;
            let r = check_properties(&build_cnot(), &ptr, &part2, &Probe::Fixed(probe))?;
            let expect = (r0 * (2.0 * p - 1.0) + 1.0 - p - r0).abs();
            worst = worst.max((r.unbiased_residual - expect).abs());
        }
        case(
            "cnot-thermal-residual",
            worst <= 1e-12,
            format!("p={p}, max formula deviation {worst:.3e}"),
        );
    }

    // The unbiased-but-unfaithful example with a thermal qubit pointer at
    // β = 1: unbiased for all states, and C = 1/Z.
    {
        let spec = SectoredSpectrum::new(vec![0.0, 1.0], 2)?;
        let (tau, w) = gibbs(&spec, 1.0)?;
        let r = check_properties(&build_unb(), &tau, &part2, &Probe::AllStates)?;
        let c = average_correlation(&build_unb(), &tau, &part2)?;
        let ok = r.unbiased() && !r.faithful() && (c - 1.0 / w.z()).abs() <= 1e-12;
        case(
            "unb-thermal",
            ok,
            format!("C = {}, 1/Z = {}", format_float(c), format_float(1.0 / w.z())),
        );
    }

    // Swap copies the system index into the pointer, so it is unbiased, but
    // it dumps the pointer's thermal state onto the system: invasive and, on
    // a mixed pointer, unfaithful.
    {
        let ptr = DensityMatrix::from_diagonal(&[0.6, 0.4])?;
        let r = check_properties(&build_swap(), &ptr, &part2, &Probe::AllStates)?;
        case(
            "swap-invasive",
            r.unbiased() && !r.noninvasive() && !r.faithful(),
            r.to_json().to_string(),
        );
    }

    // Ideal d-level measurement with a pure pointer.
    {
        let ptr = DensityMatrix::basis_state(3, 0)?;
        let part3 = PointerPartition::singletons(3);
        let r = check_properties(&build_u_d(3)?, &ptr, &part3, &Probe::AllStates)?;
        case(
            "u3-ideal",
            r.unbiased() && r.faithful() && r.noninvasive(),
            r.to_json().to_string(),
        );
    }

    // The unbiased + non-invasive but unfaithful counterexample state
    // diag(5/8, 1/8, 1/8, 1/8) against ρ_S = diag(3/4, 1/4): C = 3/4.
    {
        let joint = DensityMatrix::from_diagonal(&[0.625, 0.125, 0.125, 0.125])?;
        let r = check_state_properties(&joint, &part2, &[0.75, 0.25])?;
        let c = correlation(&joint, &part2)?;
        let ok = r.unbiased() && r.noninvasive() && !r.faithful() && (c - 0.75).abs() <= 1e-15;
        case("aiii-counterexample", ok, format!("C = {c}"));
    }

    // Implications on randomized ideal-form states: faithful ∧ unbiased by
    // construction, so non-invasiveness must follow.
    {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
        let part = PointerPartition::new(4, vec![vec![0, 1], vec![2, 3]])?;
        let mut violations = 0usize;
        for _ in 0..args.states {
            let diag = random::diagonal_density(&mut rng, 2).diagonal();
            let state = random::eq1_state(&mut rng, &part, &diag)?;
            let r = check_state_properties(&state, &part, &diag)?;
            violations += check_implications(&r).len();
        }
        case(
            "implication-states",
            violations == 0,
            format!("{} states, {violations} violations", args.states),
        );
    }

    // Implications on randomized unbiased unitaries (block-swap composed
    // with per-outcome pointer unitaries) against thermal pointers.
    {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed ^ 0x9e37_79b9);
        let part = PointerPartition::new(4, vec![vec![0, 1], vec![2, 3]])?;
        let spec = SectoredSpectrum::new(vec![0.0, 0.4, 1.0, 1.3], 2)?;
        let mut violations = 0usize;
        let mut biased = 0usize;
        for _ in 0..args.unitaries {
            let per: Vec<_> = (0..2).map(|_| random::unitary(&mut rng, 4)).collect();
            let ch = compose_unbiased_unitary(&per, &part)?;
            let (tau, _) = gibbs(&spec, rng.gen_range(0.1..3.0))?;
            let suite = implication_suite(&ch, &tau, &part)?;
            violations += suite.violations.len();
            if !suite.all_states.unbiased() {
                biased += 1;
            }
        }
        case(
            "implication-unitaries",
            violations == 0 && biased == 0,
            format!("{} unitaries, {violations} violations", args.unitaries),
        );
    }

    if failures.is_empty() {
        println!("verify: all cases passed");
        Ok(())
    } else {
        Err(Error::Verification(format!(
            "failing cases: {}",
            failures.join(", ")
        )))
    }
}

fn make_grid(kind: GridKind, min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Usage("grid needs at least one point".into()));
    }
    if !(min > 0.0) || max < min {
        return Err(Error::Usage("grid bounds must satisfy 0 < min <= max".into()));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    Ok((0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            match kind {
                GridKind::Linear => min + t * (max - min),
                GridKind::Log => min * (max / min).powf(t),
            }
        })
        .collect())
}

fn cmd_cost_curve(args: &CostCurveArgs) -> Result<()> {
    let beta_ep = parse_beta(&args.beta_ep)?;
    if beta_ep.is_infinite() {
        return Err(Error::Usage(
            "cost curves need a finite initial temperature".into(),
        ));
    }
    if !(args.e_p > 0.0) {
        return Err(Error::Usage("pointer gap must be positive".into()));
    }
    let gaps = make_grid(
        args.grid,
        args.gap_min * args.e_p,
        args.gap_max * args.e_p,
        args.gap_count,
    )?;
    let beta = beta_ep / args.e_p;
    let points = cost_curve(args.n, args.e_p, beta, &gaps)?;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for p in &points {
        csv.push_str(&p.csv_row());
        csv.push('\n');
    }
    let summary_to_stdout = args.output.is_some();
    match &args.output {
        Some(path) => fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    let c_up = points.windows(2).all(|w| w[1].c_max > w[0].c_max);
    let de1_up = points.windows(2).all(|w| w[1].d_e_i >= w[0].d_e_i);
    let summary = format!(
        "rows = {}\nmax c_max = {}\ntotal cost at endpoints = {} .. {}\nc_max strictly increasing: {}\ndE_I nondecreasing: {}",
        points.len(),
        format_float(points.last().map(|p| p.c_max).unwrap_or(f64::NAN)),
        format_float(points.first().map(|p| p.d_e_total).unwrap_or(f64::NAN)),
        format_float(points.last().map(|p| p.d_e_total).unwrap_or(f64::NAN)),
        c_up,
        de1_up,
    );
    if summary_to_stdout {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn cmd_oracle_check(args: &InstanceArgs) -> Result<()> {
    let inst = resolve_instance(args)?;
    let rho = vec![1.0 / inst.d_s as f64; inst.d_s];
    let result = brute_min_energy(&rho, &inst.ptr, inst.beta)?;
    let constr = build_from_instance(&inst, &rho)?;
    let initial = constr.initial_energy();
    println!("search_space = {}", result.search_space_size);
    println!("oracle_energy       = {}", format_float(result.best_energy));
    println!(
        "construction_energy = {}",
        format_float(result.construction_energy)
    );
    println!(
        "oracle_dE_II        = {}",
        format_float(result.best_energy - initial)
    );
    println!(
        "construction_dE_II  = {}",
        format_float(delta_e_corr_analytic(&constr))
    );
    if result.matches_construction {
        println!("verdict: MATCH");
        Ok(())
    } else {
        Err(Error::Verification(format!(
            "oracle minimum {} differs from construction {}",
            result.best_energy, result.construction_energy
        )))
    }
}

fn cmd_demo() -> Result<()> {
    println!("== C_max, N = 3 pointer qubits at beta*E_P = 1 ==");
    let spec = qubit_pointer_spectrum(3, 1.0)?;
    let general = c_max(&spec, 1.0)?;
    let closed = c_max_qubit_closed_form(3, 1.0)?;
    println!("general     = {}", format_float(general));
    println!("closed form = {}", format_float(closed));

    println!("\n== optimal construction and its property report ==");
    let constr = build_optimal_qubit_pointer(3, 1.0, 1.0, (0.5, 0.5))?;
    let json = construction_json(&constr, "1.0")?;
    println!("{}", serde_json::to_string_pretty(&json).expect("JSON"));
    let numeric = delta_e_corr_numeric(&constr)?;
    println!(
        "dE_II analytic vs dense: {} vs {}",
        format_float(delta_e_corr_analytic(&constr)),
        format_float(numeric)
    );

    println!("\n== CNOT with a thermal pointer is biased ==");
    let ptr = DensityMatrix::from_diagonal(&[0.6, 0.4])?;
    let part = PointerPartition::singletons(2);
    let report = check_properties(&build_cnot(), &ptr, &part, &Probe::AllStates)?;
    println!("{}", report.to_json());

    println!("\n== oracle certification, N = 2 at beta*E_P = 1 ==");
    let ptr_spec = qubit_pointer_spectrum(2, 1.0)?;
    let result = brute_min_energy(&[0.5, 0.5], &ptr_spec, 1.0)?;
    println!(
        "oracle {} vs construction {} over {} candidates: {}",
        format_float(result.best_energy),
        format_float(result.construction_energy),
        result.search_space_size,
        if result.matches_construction {
            "MATCH"
        } else {
            "MISMATCH"
        }
    );

    println!("\n== mini cost curve, N = 3, beta*E_P = 1/30 ==");
    let gaps = make_grid(GridKind::Log, 1.0, 60.0, 5)?;
    let points = cost_curve(3, 1.0, 1.0 / 30.0, &gaps)?;
    println!("{CSV_HEADER}");
    for p in &points {
        println!("{}", p.csv_row());
    }
    Ok(())
}
