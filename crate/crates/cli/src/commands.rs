//! Subcommand implementations.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use riesz_core::estimators::{
    compensator_probe, conditional_number_histogram, free_energy_bounds_check, number_fluctuation, swap_ratio_probe, EstimateReport, RunMetadata,
    TiOptions, DEFAULT_MIN_HITS, DEFAULT_SWAP_FACTOR, MIN_HISTOGRAM_SAMPLES,
};
use riesz_core::oracle::{
    dlr_residual, exact_partition, gnz_residual, partition_bracket, perturbed_lattice_probability_mc, LatticeReference, QuadratureSpec,
};
use riesz_core::potential::eval_riesz;
use riesz_core::sampler::{detailed_balance_audit, run_chain, ChainDiagnostics, ChainState, RunPlan, Schedule};
use riesz_core::torus::{perturbed_lattice_probability_bound, stationarize, Configuration, Snapshot, TorusBox, Window};
use riesz_core::{PeriodizedPotential, RieszParams};

use crate::config::{read_config_file, resolve, ConfigFile, ExperimentConfig, OUTPUT_DIR_ENV};
use crate::output::{fmt_f64, report_row, OutputDir, REPORT_HEADER};
use crate::{CliError, Command, FreeEnergyArgs, RunArgs, Status, TableArgs, VerifyArgs};

/// Tolerance on the quadrature DLR and GNZ residuals.
pub const IDENTITY_TOLERANCE: f64 = 1e-4;
/// Starting configurations are δ-perturbed lattices with this δ.
const START_DELTA: f64 = 0.3;

pub fn dispatch(cmd: &Command) -> Result<Status, CliError> {
    match cmd {
        Command::Sample(a) => sample(&resolve_args(a, true)?),
        Command::Verify(a) => verify(a),
        Command::PotentialTable(a) => potential_table(a),
        Command::DlrTest(a) => dlr_test(&resolve_args(a, false)?),
        Command::Rigidity(a) => rigidity(&resolve_args(a, true)?),
        Command::Fluctuation(a) => fluctuation(&resolve_args(a, true)?),
        Command::Freeenergy(a) => freeenergy(a),
        Command::ProbeCompensator(a) => probe_compensator(&resolve_args(a, true)?),
    }
}

fn resolve_args(a: &RunArgs, need_seed: bool) -> Result<ExperimentConfig, CliError> {
    let (file, text) = match &a.config {
        Some(p) => {
            let (f, t) = read_config_file(p)?;
            (f, Some(t))
        }
        None => (ConfigFile::default(), None),
    };
    resolve(&file, &a.overrides(), text.as_deref(), need_seed)
}

fn output_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("riesz-out"))
}

struct Setup {
    params: RieszParams,
    pp: Arc<PeriodizedPotential>,
    tbox: TorusBox,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let m = &cfg.model;
        let params = RieszParams::new(m.d, m.s)?;
        Ok(Self { params, pp: Arc::new(PeriodizedPotential::new(params, m.n)?), tbox: TorusBox::new(m.n, m.d)? })
    }

    fn meta(&self, cfg: &ExperimentConfig, schedule: &str) -> RunMetadata {
        let m = &cfg.model;
        RunMetadata { d: m.d, s: m.s, n: m.n, beta: m.beta, seed: cfg.sampler.seed, schedule: schedule.into() }
    }
}

/// Δ from the first explicit box, else a centred window of the first volume.
fn primary_window(cfg: &ExperimentConfig, tbox: &TorusBox, default_volume: f64) -> Result<Window, CliError> {
    let w = match cfg.windows.boxes.first() {
        Some(b) => Window::new(b.lower.clone(), b.upper.clone())?,
        None => Window::centered(cfg.model.d, cfg.windows.volumes.first().copied().unwrap_or(default_volume))?,
    };
    w.check_inside(tbox).map_err(|e| CliError::Config(format!("windows: {e}")))?;
    Ok(w)
}

fn chain_window_volume(n: usize) -> f64 {
    (n as f64 / 4.0).min(2.0)
}

/// Swap shifts: the configured ones and their negatives.
fn symmetric_shifts(shifts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for u in shifts {
        let neg: Vec<f64> = u.iter().map(|v| if *v == 0.0 { 0.0 } else { -v }).collect();
        for v in [u.clone(), neg] {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

fn build_schedule(cfg: &ExperimentConfig, name: &str, window: &Window) -> Result<Schedule, CliError> {
    let s = &cfg.sampler;
    Ok(match name {
        "plain" => Schedule::Plain,
        "dlr" => Schedule::Dlr { window: window.clone(), every: s.every, sweeps: s.sweeps },
        "swap" => {
            if cfg.windows.shifts.is_empty() {
                return Err(CliError::Config("the swap schedule needs windows.shifts".into()));
            }
            Schedule::Swap { window: window.clone(), shifts: symmetric_shifts(&cfg.windows.shifts), every: s.every }
        }
        other => return Err(CliError::Config(format!("unknown schedule {other:?}"))),
    })
}

struct ChainOutput<T> {
    diagnostics: ChainDiagnostics,
    data: T,
    state: ChainState,
}

/// Runs `cfg.sampler.chains` chains on scoped threads; chain c uses RNG
/// stream c of the seed. Results come back in chain order.
fn run_chains<T, I, O>(cfg: &ExperimentConfig, setup: &Setup, plan: &RunPlan, init: I, observe: O) -> Result<Vec<ChainOutput<T>>, CliError>
where
    T: Send,
    I: Fn() -> T + Sync,
    O: Fn(&ChainState, &mut T) + Sync,
{
    let (init, observe) = (&init, &observe);
    let results: Vec<riesz_core::Result<ChainOutput<T>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.sampler.chains)
            .map(|c| {
                let pp = Arc::clone(&setup.pp);
                scope.spawn(move || {
                    let mut state = ChainState::from_perturbed_lattice(pp, cfg.model.beta, START_DELTA, cfg.sampler.seed, c as u64)?;
                    if let Some(h) = cfg.sampler.step_size {
                        state.set_step_size(h);
                    }
                    let mut data = init();
                    let diagnostics = run_chain(&mut state, plan, |s| observe(s, &mut data))?;
                    Ok(ChainOutput { diagnostics, data, state })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    results.into_iter().map(|r| r.map_err(CliError::from)).collect()
}

fn plan(cfg: &ExperimentConfig, schedule: Schedule) -> RunPlan {
    let s = &cfg.sampler;
    RunPlan { n_steps: s.steps, thin: s.thin, burn_in: s.burn_in, schedule, tune: s.step_size.is_none() }
}

fn wants(cfg: &ExperimentConfig, format: &str) -> bool {
    cfg.outputs.formats.iter().any(|f| f == format)
}

fn report_rows(reports: &[EstimateReport]) -> Vec<Vec<String>> {
    reports.iter().map(report_row).collect()
}

fn print_written(out: &OutputDir) {
    for f in out.written() {
        println!("wrote {}", f.display());
    }
}

fn sample(cfg: &ExperimentConfig) -> Result<Status, CliError> {
    let setup = Setup::new(cfg)?;
    let window = primary_window(cfg, &setup.tbox, chain_window_volume(cfg.model.n))?;
    let schedule = build_schedule(cfg, &cfg.sampler.schedule, &window)?;
    let snapshots = wants(cfg, "snapshots");
    let (s, beta, seed) = (cfg.model.s, cfg.model.beta, cfg.sampler.seed);
    let runs = run_chains(cfg, &setup, &plan(cfg, schedule), || (Vec::new(), Vec::new()), |st, (energies, lines): &mut (Vec<f64>, Vec<String>)| {
        energies.push(st.energy().total);
        if snapshots {
            lines.push(Snapshot::new(st.configuration(), s, beta, seed).to_line());
        }
    })?;
    let mut out = OutputDir::create(&cfg.outputs.directory, "sample", cfg)?;
    if wants(cfg, "csv") {
        let rows: Vec<Vec<String>> = runs
            .iter()
            .enumerate()
            .flat_map(|(c, r)| r.data.0.iter().enumerate().map(move |(i, e)| vec![c.to_string(), i.to_string(), fmt_f64(*e)]))
            .collect();
        out.write_csv("energy.csv", &["chain", "sample", "energy"], &rows)?;
    }
    if wants(cfg, "json") {
        let diag: Vec<_> = runs.iter().enumerate().map(|(c, r)| json!({ "chain": c, "diagnostics": r.diagnostics })).collect();
        out.write_json("diagnostics.json", &diag)?;
    }
    if snapshots {
        for (c, r) in runs.iter().enumerate() {
            let name = if runs.len() == 1 { "snapshots.ndjson".to_string() } else { format!("snapshots_chain{c}.ndjson") };
            out.write_lines(&name, &r.data.1)?;
        }
    }
    for (c, r) in runs.iter().enumerate() {
        let d = &r.diagnostics;
        println!(
            "chain {c}: E[H] = {:.6} ± {:.2e}, acceptance {:.3}, autocorrelation time {:.1}, {} samples",
            d.energy_mean, d.energy_stderr, d.acceptance_rate, d.autocorr_time, d.samples
        );
    }
    print_written(&out);
    Ok(Status::Success)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub test_id: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(test_id: impl Into<String>, value: f64, tolerance: f64, pass: bool) -> Self {
        Self { test_id: test_id.into(), value, tolerance, pass }
    }

    fn within(test_id: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self::new(test_id, value, tolerance, value.abs() <= tolerance)
    }

    fn cells(&self) -> Vec<String> {
        vec![self.test_id.clone(), fmt_f64(self.value), fmt_f64(self.tolerance), if self.pass { "pass" } else { "fail" }.into()]
    }
}

const CHECK_HEADER: [&str; 4] = ["test_id", "value", "tolerance", "status"];

fn print_checks(rows: &[CheckRow]) {
    println!("{}", CHECK_HEADER.join(","));
    for r in rows {
        println!("{}", r.cells().join(","));
    }
}

fn check_status(rows: &[CheckRow]) -> Status {
    if rows.iter().all(|r| r.pass) {
        Status::Success
    } else {
        Status::CheckFailed
    }
}

fn verify(a: &VerifyArgs) -> Result<Status, CliError> {
    let params = RieszParams::new(a.d, a.s).map_err(|e| CliError::Config(e.to_string()))?;
    let rows = if a.d == 1 { verify_1d(&params, a.quick, a.seed)? } else { verify_nd(&params, a.quick)? };
    print_checks(&rows);
    let dir = a.output.clone().or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from));
    if let Some(dir) = dir {
        let config = json!({ "d": a.d, "s": a.s, "quick": a.quick, "seed": a.seed });
        let mut out = OutputDir::create(&dir, "verify", &config)?;
        out.write_csv("verify.csv", &CHECK_HEADER, &rows.iter().map(CheckRow::cells).collect::<Vec<_>>())?;
    }
    Ok(check_status(&rows))
}

/// Runs one check, timing it on stderr; an error becomes a failed row.
fn run_check(rows: &mut Vec<CheckRow>, id: String, f: impl FnOnce() -> Result<(f64, f64, bool), CliError>) {
    let t = Instant::now();
    let row = match f() {
        Ok((value, tolerance, pass)) => CheckRow::new(id, value, tolerance, pass),
        Err(e) => {
            eprintln!("{id}: {e}");
            CheckRow::new(id, f64::NAN, f64::NAN, false)
        }
    };
    eprintln!("{} [{:.1} s]", row.test_id, t.elapsed().as_secs_f64());
    rows.push(row);
}

fn within(value: f64, tolerance: f64) -> Result<(f64, f64, bool), CliError> {
    Ok((value, tolerance, value.abs() <= tolerance))
}

fn verify_1d(params: &RieszParams, quick: bool, seed: u64) -> Result<Vec<CheckRow>, CliError> {
    let mut rows = Vec::new();
    let (n_ref, k_ref) = if quick { (3, 100_000) } else { (8, 1_000_000) };
    let pp = PeriodizedPotential::new(*params, n_ref)?;
    let reference = LatticeReference::new(params, n_ref, k_ref)?;
    let half = 0.5 * n_ref as f64;
    for x in [0.1, 0.37, 1.0, half - 0.05] {
        run_check(&mut rows, format!("potential_vs_reference[n={n_ref};x={x}]"), || {
            let r = reference.eval(x);
            within(pp.eval1(x) - r.value, pp.tail_bound() + r.tolerance)
        });
    }
    let p = 0.7;
    run_check(&mut rows, format!("potential_periodicity[n={n_ref};x={p}]"), || {
        within(pp.eval1(p) - pp.eval1(p + n_ref as f64), 2.0 * pp.tail_bound() + 1e-12)
    });
    run_check(&mut rows, format!("potential_even[n={n_ref};x={p}]"), || within(pp.eval1(p) - pp.eval1(-p), 1e-12 * pp.eval1(p).abs().max(1.0)));
    run_check(&mut rows, "potential_minus_riesz_is_smooth".into(), || {
        let h = 1e-3;
        let near = pp.eval1(h) - eval_riesz(params, &[h]);
        let next = pp.eval1(2.0 * h) - eval_riesz(params, &[2.0 * h]);
        within(near - next, 1e-2)
    });

    let spec = QuadratureSpec::default();
    let beta = 1.0;
    run_check(&mut rows, "partition[n=1]".into(), || within(exact_partition(params, 1, beta, &spec)?.value - 1.0, 1e-15));
    let n_max = if quick { 3 } else { 4 };
    // the bracket is wide; small s converges slowly on the grid at n = 4
    let bracket_spec = spec.with_target(1e-4);
    for n in 2..=n_max {
        run_check(&mut rows, format!("partition_bracket[n={n};beta={beta}]"), || {
            let z = exact_partition(params, n, beta, &bracket_spec)?;
            let b = partition_bracket(params, n, beta)?;
            let v = z.value.ln() / n as f64;
            let tol = z.tolerance / z.value / n as f64;
            Ok((v, tol, v >= b.log_lower - tol && v <= b.log_upper + tol))
        });
    }

    let n_id: &[usize] = if quick { &[2] } else { &[2, 3] };
    for &n in n_id {
        let l = n as f64;
        let w = Window::new(vec![-l / 6.0], vec![l / 6.0])?;
        run_check(&mut rows, format!("dlr_residual[n={n}]"), || {
            let generic = |g: &Configuration| g.points().map(|x| (std::f64::consts::TAU * x[0] / l).sin()).sum::<f64>().cos();
            within(dlr_residual(params, n, beta, &w, generic, &spec)?.value, IDENTITY_TOLERANCE)
        });
        run_check(&mut rows, format!("gnz_residual[n={n}]"), || {
            within(gnz_residual(params, n, beta, |x, g| (w.contains(x) && g.count_in(&w) == 0) as u8 as f64, &spec)?.value, IDENTITY_TOLERANCE)
        });
    }

    run_check(&mut rows, "detailed_balance[n=2]".into(), || {
        let pp2 = PeriodizedPotential::new(*params, 2)?;
        within(detailed_balance_audit(&pp2, beta, 16, 0.8)?, 1e-12)
    });

    let trials = if quick { 200_000 } else { 2_000_000 };
    let (n_pl, delta) = (3, 0.45);
    run_check(&mut rows, format!("perturbed_lattice_probability[n={n_pl};delta={delta}]"), || {
        let est = perturbed_lattice_probability_mc(&TorusBox::new(n_pl, 1)?, delta, trials, seed)?;
        let gap = est.value - perturbed_lattice_probability_bound(n_pl, delta);
        Ok((gap, 3.0 * est.stderr, gap >= -3.0 * est.stderr))
    });
    Ok(rows)
}

fn verify_nd(params: &RieszParams, quick: bool) -> Result<Vec<CheckRow>, CliError> {
    let d = params.d();
    let n = if quick { 2usize.pow(d as u32) } else { 3usize.pow(d as u32) };
    let pp = PeriodizedPotential::new(*params, n)?;
    let l = pp.side_length();
    let x: Vec<f64> = (0..d).map(|i| 0.31 + 0.17 * i as f64).collect();
    let g = pp.eval(&x);
    let scale = 1e-12 * g.abs().max(1.0);
    let mut rows = Vec::new();
    for axis in 0..d {
        let mut y = x.clone();
        y[axis] += l;
        rows.push(CheckRow::within(format!("potential_periodicity[n={n};axis={axis}]"), g - pp.eval(&y), 2.0 * pp.tail_bound() + scale));
    }
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    rows.push(CheckRow::within(format!("potential_even[n={n}]"), g - pp.eval(&neg), scale));
    let mut swapped = x.clone();
    swapped.reverse();
    rows.push(CheckRow::within(format!("potential_axis_symmetry[n={n}]"), g - pp.eval(&swapped), 1e-9 * g.abs().max(1.0)));
    rows.push(CheckRow::new(format!("self_constant_finite[n={n}]"), pp.self_constant(), 0.0, pp.self_constant().is_finite()));
    Ok(rows)
}

fn potential_table(a: &TableArgs) -> Result<Status, CliError> {
    let params = RieszParams::new(a.d, a.s).map_err(|e| CliError::Config(e.to_string()))?;
    if a.n == 0 || a.points == 0 {
        return Err(CliError::Config("n and points must be at least 1".into()));
    }
    let pp = match a.truncation {
        Some(k) => PeriodizedPotential::with_truncation(params, a.n, k)?,
        None => PeriodizedPotential::new(params, a.n)?,
    };
    let half = 0.5 * pp.side_length();
    let mut rows = Vec::with_capacity(a.points);
    let mut x = vec![0.0; a.d];
    for j in 1..=a.points {
        x[0] = half * j as f64 / a.points as f64;
        let (g, gn) = (eval_riesz(&params, &x), pp.eval(&x));
        let mut row: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
        row.extend([fmt_f64(g), fmt_f64(gn), fmt_f64((gn - g).abs())]);
        rows.push(row);
    }
    let mut header: Vec<String> = (1..=a.d).map(|i| format!("x_{i}")).collect();
    header.extend(["g", "g_n", "abs_diff"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let config = json!({ "d": a.d, "s": a.s, "n": a.n, "points": a.points, "truncation": pp.truncation_radius(), "tail_bound": pp.tail_bound() });
    let mut out = OutputDir::create(&output_dir(&a.output), "potential-table", &config)?;
    out.write_csv("potential_table.csv", &header, &rows)?;
    print_written(&out);
    Ok(Status::Success)
}

fn dlr_test(cfg: &ExperimentConfig) -> Result<Status, CliError> {
    let setup = Setup::new(cfg)?;
    let (n, beta) = (cfg.model.n, cfg.model.beta);
    let l = setup.tbox.side_length();
    let w = primary_window(cfg, &setup.tbox, l / 3.0)?;
    let spec = QuadratureSpec::new(cfg.oracle.points_per_axis)?;
    let p = &setup.params;
    let exterior = |g: &Configuration| {
        let outside: f64 = g.points().filter(|x| !w.contains(x)).map(|x| (x[0] / l).powi(2)).sum();
        g.count_in(&w) as f64 * (-outside).exp()
    };
    let generic = |g: &Configuration| g.points().map(|x| (std::f64::consts::TAU * x[0] / l).sin()).sum::<f64>().cos();
    let mut rows = vec![
        CheckRow::within("dlr[exterior_weighted_count]", dlr_residual(p, n, beta, &w, exterior, &spec)?.value, IDENTITY_TOLERANCE),
        CheckRow::within("dlr[cos_sin_sum]", dlr_residual(p, n, beta, &w, generic, &spec)?.value, IDENTITY_TOLERANCE),
    ];
    if n >= 2 {
        rows.push(CheckRow::within("gnz[one]", gnz_residual(p, n, beta, |_, _| 1.0, &spec)?.value, IDENTITY_TOLERANCE));
        rows.push(CheckRow::within("gnz[window_indicator]", gnz_residual(p, n, beta, |x, _| w.contains(x) as u8 as f64, &spec)?.value, IDENTITY_TOLERANCE));
        rows.push(CheckRow::within(
            "gnz[window_empty]",
            gnz_residual(p, n, beta, |x, g| (w.contains(x) && g.count_in(&w) == 0) as u8 as f64, &spec)?.value,
            IDENTITY_TOLERANCE,
        ));
    }
    print_checks(&rows);
    let mut out = OutputDir::create(&cfg.outputs.directory, "dlr-test", cfg)?;
    if wants(cfg, "csv") {
        out.write_csv("dlr_test.csv", &CHECK_HEADER, &rows.iter().map(CheckRow::cells).collect::<Vec<_>>())?;
    }
    Ok(check_status(&rows))
}

type PairCounts = Vec<Vec<(usize, usize)>>;

fn rigidity(cfg: &ExperimentConfig) -> Result<Status, CliError> {
    let setup = Setup::new(cfg)?;
    let w = primary_window(cfg, &setup.tbox, chain_window_volume(cfg.model.n))?;
    let shifts = &cfg.windows.shifts;
    if let Some(u) = shifts.iter().find(|u| w.shift_gap(&setup.tbox, u) <= 1.0) {
        return Err(CliError::Config(format!("windows.shifts: {u:?} leaves Δ + u within distance 1 of Δ")));
    }
    let schedule = build_schedule(cfg, "swap", &w)?;
    let tbox = setup.tbox;
    let runs = run_chains(
        cfg,
        &setup,
        &plan(cfg, schedule),
        || (Vec::new(), vec![Vec::new(); shifts.len()]),
        |st, (counts, pairs): &mut (Vec<usize>, PairCounts)| {
            let g = st.configuration();
            let k = g.count_in(&w);
            counts.push(k);
            for (u, out) in shifts.iter().zip(pairs.iter_mut()) {
                out.push((k, g.points().filter(|x| w.contains_shifted(&tbox, x, u)).count()));
            }
        },
    )?;
    let meta = setup.meta(cfg, "swap");
    let mut counts = Vec::new();
    let mut pairs = vec![Vec::new(); shifts.len()];
    for r in &runs {
        counts.extend_from_slice(&r.data.0);
        for (all, p) in pairs.iter_mut().zip(&r.data.1) {
            all.extend_from_slice(p);
        }
    }
    let vol = w.volume();
    let cap = (2.0 * vol).floor() as usize + 3;
    let hist = conditional_number_histogram(&counts, vol, cap + 2, &meta)?;
    let probe = swap_ratio_probe(&tbox, &w, shifts, &pairs, cfg.windows.swap_k, cfg.windows.swap_l, DEFAULT_MIN_HITS, DEFAULT_SWAP_FACTOR, &meta)?;
    let inconclusive = counts.len() < MIN_HISTOGRAM_SAMPLES;
    let failed = (!hist.all_observed_to_cap && !inconclusive) || probe.passed == Some(false);
    let mut out = OutputDir::create(&cfg.outputs.directory, "rigidity", cfg)?;
    if wants(cfg, "csv") {
        out.write_csv("rigidity_histogram.csv", &REPORT_HEADER, &report_rows(&hist.reports))?;
        out.write_csv("swap_ratios.csv", &REPORT_HEADER, &report_rows(&probe.reports))?;
    }
    if wants(cfg, "json") {
        let diagnostics: Vec<&ChainDiagnostics> = runs.iter().map(|r| &r.diagnostics).collect();
        let summary = json!({
            "cap": hist.cap,
            "overflow": hist.overflow,
            "all_observed_to_cap": hist.all_observed_to_cap,
            "histogram_inconclusive": inconclusive,
            "swap_factor": probe.factor,
            "swap_factor_cap": probe.factor_cap,
            "swap_passed": probe.passed,
            "chains": diagnostics,
        });
        out.write_json("rigidity.json", &summary)?;
    }
    let observed: Vec<usize> = (0..=cap).map(|k| counts.iter().filter(|&&c| c == k).count()).collect();
    println!("counts k = 0..={cap}: {observed:?}");
    println!("swap ratio factor: {:?} (cap {})", probe.factor, probe.factor_cap);
    print_written(&out);
    Ok(if failed { Status::CheckFailed } else { Status::Success })
}

/// Stationarized samples from every chain, in chain order.
fn stationarized_samples(cfg: &ExperimentConfig, setup: &Setup, window: &Window) -> Result<Vec<Configuration>, CliError> {
    let schedule = build_schedule(cfg, &cfg.sampler.schedule, window)?;
    let runs = run_chains(cfg, setup, &plan(cfg, schedule), Vec::new, |st, acc: &mut Vec<Configuration>| acc.push(st.configuration().clone()))?;
    let mut samples = Vec::new();
    for mut r in runs {
        let rng = r.state.rng();
        samples.extend(r.data.iter().map(|g| stationarize(g, rng)));
    }
    Ok(samples)
}

fn fluctuation(cfg: &ExperimentConfig) -> Result<Status, CliError> {
    let setup = Setup::new(cfg)?;
    if cfg.windows.fluctuation_sizes.is_empty() {
        return Err(CliError::Config("windows.fluctuation_sizes is empty; n must be at least 4".into()));
    }
    let w = primary_window(cfg, &setup.tbox, chain_window_volume(cfg.model.n))?;
    let samples = stationarized_samples(cfg, &setup, &w)?;
    let report = number_fluctuation(&samples, &cfg.windows.fluctuation_sizes, &setup.meta(cfg, &cfg.sampler.schedule))?;
    let mut out = OutputDir::create(&cfg.outputs.directory, "fluctuation", cfg)?;
    if wants(cfg, "csv") {
        out.write_csv("fluctuation.csv", &REPORT_HEADER, &report_rows(&report.reports))?;
    }
    if wants(cfg, "json") {
        out.write_json("fluctuation.json", &json!({ "log_variance_slope": report.slope }))?;
    }
    for r in &report.reports {
        println!("{} = {:.6} ± {:.2e}", r.name, r.value, r.stderr);
    }
    print_written(&out);
    Ok(Status::Success)
}

fn probe_compensator(cfg: &ExperimentConfig) -> Result<Status, CliError> {
    let setup = Setup::new(cfg)?;
    if cfg.windows.compensator_p.is_empty() {
        return Err(CliError::Config("windows.compensator_p is empty; n must be at least 4".into()));
    }
    let w = primary_window(cfg, &setup.tbox, chain_window_volume(cfg.model.n))?;
    let samples = stationarized_samples(cfg, &setup, &w)?;
    let meta = setup.meta(cfg, &cfg.sampler.schedule);
    let probe = compensator_probe(&samples, &setup.params, &cfg.windows.compensator_x, &cfg.windows.compensator_p, &meta)?;
    let mut out = OutputDir::create(&cfg.outputs.directory, "probe-compensator", cfg)?;
    if wants(cfg, "csv") {
        out.write_csv("compensator.csv", &REPORT_HEADER, &report_rows(&probe.reports))?;
    }
    if wants(cfg, "json") {
        out.write_json("compensator.json", &json!({ "increments_shrink": probe.increments_shrink, "guarded": probe.guarded }))?;
    }
    for r in &probe.reports {
        println!("{} = {:.6} ± {:.2e}", r.name, r.value, r.stderr);
    }
    print_written(&out);
    Ok(Status::Success)
}

fn freeenergy(a: &FreeEnergyArgs) -> Result<Status, CliError> {
    let cfg = resolve_args(&a.run, true)?;
    if cfg.model.d != 1 {
        return Err(CliError::Config("freeenergy is one-dimensional; set model.d = 1".into()));
    }
    let params = RieszParams::new(1, cfg.model.s)?;
    let n_list = if a.n_list.is_empty() { vec![cfg.model.n] } else { a.n_list.clone() };
    if n_list.contains(&0) {
        return Err(CliError::Config("--n-list entries must be at least 1".into()));
    }
    let s = &cfg.sampler;
    let ti = TiOptions { steps: s.steps.saturating_sub(s.burn_in), burn_in: s.burn_in, thin: s.thin, seed: s.seed, points: a.ti_points };
    let meta = RunMetadata { d: 1, s: cfg.model.s, n: cfg.model.n, beta: cfg.model.beta, seed: s.seed, schedule: "plain".into() };
    let checks = free_energy_bounds_check(&params, &n_list, cfg.model.beta, &ti, &meta)?;
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.n.to_string(),
                c.method.clone(),
                fmt_f64(c.report.value),
                fmt_f64(c.report.stderr),
                fmt_f64(c.bracket.log_lower),
                fmt_f64(c.bracket.log_upper),
                c.inside.to_string(),
            ]
        })
        .collect();
    let mut out = OutputDir::create(&cfg.outputs.directory, "freeenergy", &cfg)?;
    if wants(&cfg, "csv") {
        out.write_csv("freeenergy.csv", &["n", "method", "log_z_per_n", "stderr", "log_lower", "log_upper", "inside"], &rows)?;
    }
    if wants(&cfg, "json") {
        out.write_json("freeenergy.json", &checks)?;
    }
    for c in &checks {
        println!(
            "n = {}: log Z/n = {:.6} ± {:.2e} in [{:.4}, {:.4}]: {}",
            c.n,
            c.report.value,
            c.report.stderr,
            c.bracket.log_lower,
            c.bracket.log_upper,
            if c.inside { "inside" } else { "OUTSIDE" }
        );
    }
    print_written(&out);
    Ok(if checks.iter().all(|c| c.inside) { Status::Success } else { Status::CheckFailed })
}
