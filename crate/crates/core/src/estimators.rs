//! Monte Carlo probes on sample streams. Every report carries a batch-means
//! standard error; thresholds downstream are stderr multiples.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::local_field;
use crate::error::{invalid, Error, Result};
use crate::oracle::{exact_partition, partition_bracket, PartitionBracket, QuadratureSpec};
use crate::potential::{cell_mean, eval_riesz, PeriodizedPotential, RieszParams};
use crate::sampler::{run_chain, ChainState, RunPlan};
use crate::stats::{batch_means, linear_fit, mean, variance, LinearFit, DEFAULT_BATCHES, MIN_BATCHES};
use crate::torus::{perturbed_lattice, Configuration, TorusBox, Window};

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunMetadata {
    pub d: usize,
    pub s: f64,
    pub n: usize,
    pub beta: f64,
    pub seed: u64,
    pub schedule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub metadata: RunMetadata,
    /// Set when the data cannot support a verdict (too few hits).
    pub inconclusive: bool,
}

fn batches_for(len: usize) -> usize {
    DEFAULT_BATCHES.min(len).max(MIN_BATCHES)
}

fn report(name: impl Into<String>, xs: &[f64], meta: &RunMetadata) -> Result<EstimateReport> {
    let bm = batch_means(xs, batches_for(xs.len()))?;
    Ok(EstimateReport {
        name: name.into(),
        value: bm.mean,
        stderr: bm.stderr,
        n_samples: xs.len() as u64,
        metadata: meta.clone(),
        inconclusive: false,
    })
}

/// Variance with a batch-means error: the mean of per-batch sample variances.
fn variance_report(name: impl Into<String>, xs: &[f64], meta: &RunMetadata) -> Result<EstimateReport> {
    let b = batches_for(xs.len());
    if xs.len() < 2 * b {
        return Err(Error::InsufficientSamples(format!("{} samples for a batched variance", xs.len())));
    }
    let size = xs.len() / b;
    let vars: Vec<f64> = xs.chunks_exact(size).take(b).map(variance).collect();
    Ok(EstimateReport {
        name: name.into(),
        value: mean(&vars),
        stderr: (variance(&vars) / b as f64).sqrt(),
        n_samples: xs.len() as u64,
        metadata: meta.clone(),
        inconclusive: false,
    })
}

fn grid_cells(tbox: &TorusBox, per_axis: usize) -> Result<Vec<Window>> {
    let d = tbox.d();
    let l = tbox.side_length();
    let w = l / per_axis as f64;
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut flat| {
            let mut lower = Vec::with_capacity(d);
            for _ in 0..d {
                lower.push(-0.5 * l + (flat % per_axis) as f64 * w);
                flat /= per_axis;
            }
            let upper = lower.iter().map(|a| a + w).collect();
            Window::new(lower, upper)
        })
        .collect()
}

/// Empirical intensity (points per unit volume) in each cell of a regular
/// grid, followed by the whole-box intensity |γ|/n.
pub fn intensity_profile(samples: &[Configuration], cells_per_axis: usize, meta: &RunMetadata) -> Result<Vec<EstimateReport>> {
    let first = samples.first().ok_or_else(|| Error::InsufficientSamples("no samples".into()))?;
    let tbox = *first.tbox();
    let cells = grid_cells(&tbox, cells_per_axis)?;
    let mut out = Vec::with_capacity(cells.len() + 1);
    for (i, cell) in cells.iter().enumerate() {
        let v = cell.volume();
        let xs: Vec<f64> = samples.iter().map(|g| g.count_in(cell) as f64 / v).collect();
        out.push(report(format!("intensity[cell={i}]"), &xs, meta)?);
    }
    let xs: Vec<f64> = samples.iter().map(|g| g.len() as f64 / tbox.volume()).collect();
    out.push(report("intensity[box]", &xs, meta)?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationReport {
    /// E|N_{Λ_k} - k| and Var(N_{Λ_k}) for each k, in that order.
    pub reports: Vec<EstimateReport>,
    /// Slope of log Var against log k; absent with fewer than three usable k.
    pub slope: Option<LinearFit>,
}

/// Number fluctuations in centred windows of volume k ≤ n/4.
pub fn number_fluctuation(samples: &[Configuration], ks: &[f64], meta: &RunMetadata) -> Result<FluctuationReport> {
    let first = samples.first().ok_or_else(|| Error::InsufficientSamples("no samples".into()))?;
    let tbox = *first.tbox();
    let mut reports = Vec::with_capacity(2 * ks.len());
    let mut logs = (Vec::new(), Vec::new());
    for &k in ks {
        if !(k > 0.0) || k > tbox.n() as f64 / 4.0 {
            return Err(invalid(format!("window volume {k} outside (0, n/4]")));
        }
        let w = Window::centered(tbox.d(), k)?;
        let counts: Vec<f64> = samples.iter().map(|g| g.count_in(&w) as f64).collect();
        let dev: Vec<f64> = counts.iter().map(|c| (c - k).abs()).collect();
        reports.push(report(format!("abs_deviation[k={k}]"), &dev, meta)?);
        let var = variance_report(format!("variance[k={k}]"), &counts, meta)?;
        if var.value > 0.0 {
            logs.0.push(k.ln());
            logs.1.push(var.value.ln());
        }
        reports.push(var);
    }
    let slope = if logs.0.len() >= 3 { Some(linear_fit(&logs.0, &logs.1)?) } else { None };
    Ok(FluctuationReport { reports, slope })
}

/// Samples below which an unobserved count is inconclusive rather than absent.
pub const MIN_HISTOGRAM_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumberHistogram {
    /// Frequency of N_Δ = k for k = 0..=k_max.
    pub reports: Vec<EstimateReport>,
    /// Mass above k_max; zero when k_max covers every observed count.
    pub overflow: f64,
    /// The support cap ⌊2 vol(Δ)⌋ + 3.
    pub cap: usize,
    pub all_observed_to_cap: bool,
}

/// Frequencies of the window count from a recorded count stream.
pub fn conditional_number_histogram(counts: &[usize], window_volume: f64, k_max: usize, meta: &RunMetadata) -> Result<NumberHistogram> {
    if counts.len() < MIN_BATCHES {
        return Err(Error::InsufficientSamples(format!("{} counts", counts.len())));
    }
    let cap = (2.0 * window_volume).floor() as usize + 3;
    let short = counts.len() < MIN_HISTOGRAM_SAMPLES;
    let mut reports = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let xs: Vec<f64> = counts.iter().map(|&c| (c == k) as u8 as f64).collect();
        let mut r = report(format!("frequency[k={k}]"), &xs, meta)?;
        r.inconclusive = short && r.value == 0.0;
        reports.push(r);
    }
    let overflow = counts.iter().filter(|&&c| c > k_max).count() as f64 / counts.len() as f64;
    let all_observed_to_cap = (0..=cap).all(|k| counts.contains(&k));
    Ok(NumberHistogram { reports, overflow, cap, all_observed_to_cap })
}

/// E|h_n(0, γ)| over the samples. Samples with a point within 1e-12 of the
/// origin hit the +∞ guard; they are left out and counted in the name.
pub fn local_field_moment(samples: &[Configuration], pp: &PeriodizedPotential, meta: &RunMetadata) -> Result<EstimateReport> {
    let mut xs = Vec::with_capacity(samples.len());
    let mut guarded = 0usize;
    for g in samples {
        let origin = vec![0.0; g.d()];
        if g.points().any(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-12) {
            guarded += 1;
            continue;
        }
        xs.push(local_field(&origin, g, pp).abs());
    }
    let mut r = report(format!("local_field_abs[guarded={guarded}]"), &xs, meta)?;
    r.n_samples = xs.len() as u64;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapRatioProbe {
    /// r(u) for each shift, in input order.
    pub reports: Vec<EstimateReport>,
    /// max_u r(u) / min_u r(u) over conclusive shifts.
    pub factor: Option<f64>,
    pub factor_cap: f64,
    pub passed: Option<bool>,
}

pub const DEFAULT_SWAP_FACTOR: f64 = 5.0;
pub const DEFAULT_MIN_HITS: usize = 100;

/// r(u) = P(N_Δ = k, N_{Δ+u} = l) / P(N_Δ = l, N_{Δ+u} = k) from recorded
/// count pairs, one stream per shift. Each shift must keep Δ + u at torus
/// distance > 1 from Δ.
#[allow(clippy::too_many_arguments)]
pub fn swap_ratio_probe(
    tbox: &TorusBox,
    window: &Window,
    shifts: &[Vec<f64>],
    pairs: &[Vec<(usize, usize)>],
    k: usize,
    l: usize,
    min_hits: usize,
    factor_cap: f64,
    meta: &RunMetadata,
) -> Result<SwapRatioProbe> {
    if shifts.len() != pairs.len() {
        return Err(invalid("one count stream per shift"));
    }
    let mut reports = Vec::with_capacity(shifts.len());
    for (u, stream) in shifts.iter().zip(pairs) {
        if window.shift_gap(tbox, u) <= 1.0 {
            return Err(invalid(format!("shift {u:?} leaves Δ + u within distance 1 of Δ")));
        }
        let b = batches_for(stream.len());
        if stream.len() < b {
            return Err(Error::InsufficientSamples(format!("{} count pairs", stream.len())));
        }
        let a: Vec<f64> = stream.iter().map(|&(x, y)| (x == k && y == l) as u8 as f64).collect();
        let c: Vec<f64> = stream.iter().map(|&(x, y)| (x == l && y == k) as u8 as f64).collect();
        let hits_a = a.iter().filter(|&&v| v > 0.0).count();
        let hits_c = c.iter().filter(|&&v| v > 0.0).count();
        let (ma, mc) = (mean(&a), mean(&c));
        let ratio = if mc > 0.0 { ma / mc } else { f64::NAN };
        let size = stream.len() / b;
        let resid: Vec<f64> = a.chunks_exact(size).zip(c.chunks_exact(size)).take(b).map(|(x, y)| mean(x) - ratio * mean(y)).collect();
        let stderr = if mc > 0.0 { (variance(&resid) / b as f64).sqrt() / mc } else { f64::NAN };
        reports.push(EstimateReport {
            name: format!("swap_ratio[u={u:?},k={k},l={l}]"),
            value: ratio,
            stderr,
            n_samples: stream.len() as u64,
            metadata: meta.clone(),
            inconclusive: hits_a.min(hits_c) < min_hits,
        });
    }
    let conclusive: Vec<f64> = reports.iter().filter(|r| !r.inconclusive).map(|r| r.value).collect();
    let factor = (conclusive.len() >= 2).then(|| {
        let max = conclusive.iter().copied().fold(f64::MIN, f64::max);
        let min = conclusive.iter().copied().fold(f64::MAX, f64::min);
        max / min
    });
    Ok(SwapRatioProbe { reports, factor, factor_cap, passed: factor.map(|f| f <= factor_cap) })
}

/// ∫_{Λ_p} g(x - y) dy for a centred box of volume p: closed form in d = 1,
/// the cell mean at x = 0 otherwise.
pub fn box_riesz_integral(params: &RieszParams, p: f64, x: &[f64]) -> Result<f64> {
    let s = params.s();
    if params.d() == 1 {
        let e = 1.0 - s;
        let (h, a) = (0.5 * p, x[0].abs());
        return Ok(if a < h { ((h + a).powf(e) + (h - a).powf(e)) / e } else { ((a + h).powf(e) - (a - h).powf(e)) / e });
    }
    if x.iter().any(|&v| v != 0.0) {
        return Err(invalid("off-origin compensators are one-dimensional"));
    }
    if p.fract() != 0.0 || p < 1.0 {
        return Err(invalid("window volume must be a positive integer in d ≥ 2"));
    }
    Ok(p * cell_mean(params, p as usize, &vec![0; params.d()])?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompensatorProbe {
    /// For each p: mean of S_p, variance of S_p; then E|S_{p'} - S_p| for
    /// successive pairs.
    pub reports: Vec<EstimateReport>,
    pub increments_shrink: bool,
    pub guarded: usize,
}

/// S_p(x, γ) = Σ_{y ∈ γ ∩ Λ_p} g(x - y) - ∫_{Λ_p} g(x - y) dy over the samples.
pub fn compensator_probe(samples: &[Configuration], params: &RieszParams, x: &[f64], p_list: &[f64], meta: &RunMetadata) -> Result<CompensatorProbe> {
    let first = samples.first().ok_or_else(|| Error::InsufficientSamples("no samples".into()))?;
    let n = first.tbox().n() as f64;
    if p_list.windows(2).any(|w| w[1] <= w[0]) || p_list.iter().any(|&p| !(p > 0.0) || p > n / 4.0) {
        return Err(invalid("p_list must increase within (0, n/4]"));
    }
    let windows: Vec<Window> = p_list.iter().map(|&p| Window::centered(params.d(), p)).collect::<Result<_>>()?;
    let integrals: Vec<f64> = p_list.iter().map(|&p| box_riesz_integral(params, p, x)).collect::<Result<_>>()?;
    let mut series = vec![Vec::with_capacity(samples.len()); p_list.len()];
    let mut guarded = 0;
    let mut diff = vec![0.0; params.d()];
    'outer: for g in samples {
        let mut row = Vec::with_capacity(p_list.len());
        for (w, integral) in windows.iter().zip(&integrals) {
            let mut sum = crate::summation::CompensatedSum::new();
            for y in g.points().filter(|y| w.contains(y)) {
                for ((o, a), b) in diff.iter_mut().zip(x).zip(y) {
                    *o = a - b;
                }
                if diff.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-12 {
                    guarded += 1;
                    continue 'outer;
                }
                sum.add(eval_riesz(params, &diff));
            }
            row.push(sum.value() - integral);
        }
        for (s, v) in series.iter_mut().zip(row) {
            s.push(v);
        }
    }
    let mut reports = Vec::new();
    for (p, s) in p_list.iter().zip(&series) {
        reports.push(report(format!("compensator_mean[p={p}]"), s, meta)?);
        reports.push(variance_report(format!("compensator_variance[p={p}]"), s, meta)?);
    }
    let mut incs = Vec::new();
    for j in 1..p_list.len() {
        let d: Vec<f64> = series[j].iter().zip(&series[j - 1]).map(|(a, b)| (a - b).abs()).collect();
        let r = report(format!("compensator_increment[p={}->{}]", p_list[j - 1], p_list[j]), &d, meta)?;
        incs.push(r.value);
        reports.push(r);
    }
    let increments_shrink = incs.windows(2).all(|w| w[1] < w[0]);
    Ok(CompensatorProbe { reports, increments_shrink, guarded })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiOptions {
    /// Metropolis steps per β' point after burn-in.
    pub steps: u64,
    pub burn_in: u64,
    /// Energy recorded every `thin` steps.
    pub thin: u64,
    pub seed: u64,
    /// Coarse grid size; the check grid doubles the intervals.
    pub points: usize,
}

impl Default for TiOptions {
    fn default() -> Self {
        Self { steps: 200_000, burn_in: 20_000, thin: 8, seed: 1, points: 21 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiResult {
    pub log_z: f64,
    pub stderr: f64,
    pub coarse: f64,
    pub refined: f64,
    /// (β', E[H], stderr) on the refined grid.
    pub curve: Vec<(f64, f64, f64)>,
}

/// log Z^β_n = -∫_0^β E_{β'}[H_n] dβ' by the trapezoid rule over independent
/// chains, one RNG stream per grid point. The refined grid reuses the coarse
/// points and adds the midpoints; the reported stderr folds in the
/// coarse/refined discrepancy.
pub fn thermodynamic_integration(params: &RieszParams, n: usize, beta: f64, opts: &TiOptions) -> Result<TiResult> {
    if opts.points < 2 {
        return Err(invalid("thermodynamic integration needs at least two grid points"));
    }
    let pp = Arc::new(PeriodizedPotential::new(*params, n)?);
    let tbox = TorusBox::new(n, params.d())?;
    let fine = 2 * (opts.points - 1) + 1;
    let curve: Vec<(f64, f64, f64)> = (0..fine)
        .map(|j| {
            let b = beta * j as f64 / (fine - 1) as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(1000 + j as u64);
            let start = perturbed_lattice(&tbox, 0.3, &mut rng)?;
            let mut st = ChainState::new(start, pp.clone(), b, opts.seed, j as u64)?;
            let plan = RunPlan::plain(opts.burn_in + opts.steps, opts.thin, opts.burn_in);
            let diag = run_chain(&mut st, &plan, |_| {})?;
            Ok((b, diag.energy_mean, diag.energy_stderr))
        })
        .collect::<Result<_>>()?;
    let trapezoid = |stride: usize| {
        let pts: Vec<&(f64, f64, f64)> = curve.iter().step_by(stride).collect();
        let h = beta / (pts.len() - 1) as f64;
        let mut v = 0.0;
        let mut var = 0.0;
        for (i, p) in pts.iter().enumerate() {
            let w = if i == 0 || i == pts.len() - 1 { 0.5 * h } else { h };
            v -= w * p.1;
            var += (w * p.2).powi(2);
        }
        (v, var)
    };
    let (coarse, _) = trapezoid(2);
    let (refined, var) = trapezoid(1);
    // Richardson-style estimate of the remaining grid error
    let grid = (refined - coarse).abs() / 3.0;
    Ok(TiResult { log_z: refined, stderr: (var + grid * grid).sqrt(), coarse, refined, curve })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyCheck {
    pub n: usize,
    /// log Z_n / n.
    pub report: EstimateReport,
    pub bracket: PartitionBracket,
    pub method: String,
    /// Inside [log_lower, log_upper] allowing 3 stderr.
    pub inside: bool,
}

/// Checks a_β ≤ (Z^β_n)^{1/n} ≤ b_β in d = 1: grid quadrature for n ≤ 4,
/// thermodynamic integration beyond.
pub fn free_energy_bounds_check(params: &RieszParams, n_list: &[usize], beta: f64, ti: &TiOptions, meta: &RunMetadata) -> Result<Vec<FreeEnergyCheck>> {
    if params.d() != 1 {
        return Err(invalid("the free-energy check is one-dimensional"));
    }
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let bracket = partition_bracket(params, n, beta)?;
        let (value, stderr, samples, method) = if n <= 4 {
            let z = exact_partition(params, n, beta, &QuadratureSpec::default())?;
            (z.value.ln() / n as f64, z.tolerance / z.value / n as f64, z.resolution as u64, "quadrature")
        } else {
            let r = thermodynamic_integration(params, n, beta, ti)?;
            (r.log_z / n as f64, r.stderr / n as f64, ti.steps / ti.thin, "thermodynamic-integration")
        };
        let inside = value + 3.0 * stderr >= bracket.log_lower && value - 3.0 * stderr <= bracket.log_upper;
        out.push(FreeEnergyCheck {
            n,
            report: EstimateReport {
                name: format!("log_partition_per_point[n={n}]"),
                value,
                stderr,
                n_samples: samples,
                metadata: RunMetadata { n, ..meta.clone() },
                inconclusive: false,
            },
            bracket,
            method: method.into(),
            inside,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_gof;
    use crate::torus::sample_binomial;
    use statrs::distribution::{Binomial, Discrete};

    fn meta() -> RunMetadata {
        RunMetadata { d: 1, s: 0.5, n: 16, beta: 0.0, seed: 1, schedule: "iid".into() }
    }

    fn binomial_samples(n: usize, count: usize, seed: u64) -> Vec<Configuration> {
        let tbox = TorusBox::new(n, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| sample_binomial(&tbox, &tbox.full_window(), n, &mut rng)).collect()
    }

    #[test]
    fn intensity_of_binomial_samples_is_flat() {
        let samples = binomial_samples(16, 4000, 1);
        let reps = intensity_profile(&samples, 8, &meta()).unwrap();
        for r in &reps[..8] {
            assert!((r.value - 1.0).abs() < 4.0 * r.stderr, "{r:?}");
        }
        let whole = reps.last().unwrap();
        assert_eq!(whole.value, 1.0);
        assert_eq!(whole.stderr, 0.0);
    }

    #[test]
    fn binomial_number_variance() {
        let samples = binomial_samples(16, 8000, 2);
        let f = number_fluctuation(&samples, &[1.0, 2.0, 4.0], &meta()).unwrap();
        for (k, r) in [1.0, 2.0, 4.0].iter().zip(f.reports.iter().skip(1).step_by(2)) {
            let exact = k * (1.0 - k / 16.0);
            assert!((r.value - exact).abs() < 4.0 * r.stderr, "{r:?} vs {exact}");
        }
        assert!(f.slope.is_some());
        assert!(number_fluctuation(&samples, &[5.0], &meta()).is_err());
    }

    #[test]
    fn lattice_deviation_is_at_most_one() {
        let tbox = TorusBox::new(16, 1).unwrap();
        let pts: Vec<Vec<f64>> = (0..16).map(|i| vec![-8.0 + i as f64 + 0.5]).collect();
        let g = Configuration::from_points(tbox, &pts).unwrap();
        let samples = vec![g; 64];
        let f = number_fluctuation(&samples, &[1.0, 2.0, 3.0, 4.0], &meta()).unwrap();
        for r in f.reports.iter().step_by(2) {
            assert!(r.value <= 1.0);
        }
    }

    #[test]
    fn histogram_matches_binomial_law() {
        let samples = binomial_samples(16, 20_000, 3);
        let w = Window::centered(1, 2.0).unwrap();
        let counts: Vec<usize> = samples.iter().map(|g| g.count_in(&w)).collect();
        let h = conditional_number_histogram(&counts, 2.0, 16, &meta()).unwrap();
        let total: f64 = h.reports.iter().map(|r| r.value).sum();
        assert!((total + h.overflow - 1.0).abs() < 1e-12);
        let law = Binomial::new(2.0 / 16.0, 16).unwrap();
        let probs: Vec<f64> = (0..=16).map(|k| law.pmf(k)).collect();
        let mut observed = vec![0u64; 17];
        for &c in &counts {
            observed[c] += 1;
        }
        assert!(chi_square_gof(&observed, &probs).p_value > 0.01);
        assert_eq!(h.cap, 7);
    }

    #[test]
    fn short_histograms_are_inconclusive() {
        let counts = vec![1usize; 100];
        let h = conditional_number_histogram(&counts, 2.0, 3, &meta()).unwrap();
        assert!(h.reports[0].inconclusive);
        assert!(!h.reports[1].inconclusive);
        assert!(!h.all_observed_to_cap);
    }

    #[test]
    fn local_field_of_one_uniform_point() {
        let params = RieszParams::new(1, 0.5).unwrap();
        let pp = PeriodizedPotential::new(params, 2).unwrap();
        let tbox = TorusBox::new(2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples: Vec<Configuration> = (0..40_000).map(|_| sample_binomial(&tbox, &tbox.full_window(), 1, &mut rng)).collect();
        let r = local_field_moment(&samples, &pp, &meta()).unwrap();
        let exact = crate::quadrature::adaptive(|x| pp.eval1(x).abs(), 0.0, 1.0, 1e-10).unwrap().value;
        assert!((r.value - exact).abs() < 4.0 * r.stderr, "{} vs {exact}", r.value);
        let empty = vec![Configuration::empty(tbox); 32];
        assert_eq!(local_field_moment(&empty, &pp, &meta()).unwrap().value, 0.0);
    }

    #[test]
    fn swap_ratios_under_exchangeability() {
        let samples = binomial_samples(32, 40_000, 5);
        let tbox = TorusBox::new(32, 1).unwrap();
        let w = Window::centered(1, 2.0).unwrap();
        let shifts = vec![vec![8.0], vec![12.0], vec![16.0]];
        let pairs: Vec<Vec<(usize, usize)>> = shifts
            .iter()
            .map(|u| samples.iter().map(|g| (g.count_in(&w), g.points().filter(|p| w.contains_shifted(&tbox, p, u)).count())).collect())
            .collect();
        let m = meta();
        let probe = swap_ratio_probe(&tbox, &w, &shifts, &pairs, 1, 2, 100, 5.0, &m).unwrap();
        for r in &probe.reports {
            assert!((r.value - 1.0).abs() < 4.0 * r.stderr, "{r:?}");
        }
        assert_eq!(probe.passed, Some(true));
        let same = swap_ratio_probe(&tbox, &w, &shifts, &pairs, 2, 2, 100, 5.0, &m).unwrap();
        assert!(same.reports.iter().all(|r| r.value == 1.0));
        assert!(swap_ratio_probe(&tbox, &w, &[vec![2.5]], &pairs[..1], 1, 2, 100, 5.0, &m).is_err());
    }

    #[test]
    fn compensator_mean_cancels_at_zero_beta() {
        let params = RieszParams::new(1, 0.5).unwrap();
        let samples = binomial_samples(64, 20_000, 6);
        let probe = compensator_probe(&samples, &params, &[0.0], &[4.0, 8.0, 16.0], &meta()).unwrap();
        for r in probe.reports.iter().filter(|r| r.name.starts_with("compensator_mean")) {
            assert!(r.value.abs() < 4.0 * r.stderr, "{r:?}");
        }
        let tbox = TorusBox::new(64, 1).unwrap();
        let empty = vec![Configuration::empty(tbox); 64];
        let probe = compensator_probe(&empty, &params, &[0.0], &[4.0], &meta()).unwrap();
        assert!((probe.reports[0].value + 4.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_beta_free_energy() {
        let params = RieszParams::new(1, 0.5).unwrap();
        let checks = free_energy_bounds_check(&params, &[2, 3], 0.0, &TiOptions::default(), &meta()).unwrap();
        for c in checks {
            assert_eq!(c.report.value, 0.0);
            assert!(c.inside);
        }
    }
}
