//! Ground truth at desk scale: periodic-grid quadrature for Z^β_n, Gibbs
//! expectations and the finite-volume DLR and GNZ identities (d = 1, n ≤ 4),
//! plus the brute-force lattice-sum reference for g_n.
//!
//! Quadrature runs on the cell-centred grid x_a = -L/2 + (a + 1/2)h, h = L/M,
//! over the ordered product space with weight 1/M per axis. Coincident nodes
//! carry zero weight. Every result is refined by doubling M and reports the
//! difference between the last two resolutions as its tolerance.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::potential::{cell_mean_1d, riesz_r2, PeriodizedPotential, RieszParams};
use crate::special::hurwitz_zeta;
use crate::summation::CompensatedSum;
use crate::torus::{Configuration, PerturbedLattice, TorusBox, Window};

/// Identifier of the tensor rule used by every grid oracle.
pub const SCHEME: &str = "periodic-midpoint";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Starting resolution M; a positive multiple of 6 so that windows with
    /// endpoints at multiples of L/6 fall on cell boundaries.
    pub points_per_axis: usize,
    pub target_tolerance: f64,
    pub max_doublings: usize,
}

impl QuadratureSpec {
    pub fn new(points_per_axis: usize) -> Result<Self> {
        if points_per_axis == 0 || !points_per_axis.is_multiple_of(6) {
            return Err(invalid("points_per_axis must be a positive multiple of 6"));
        }
        Ok(Self { points_per_axis, target_tolerance: 1e-6, max_doublings: 7 })
    }

    pub fn with_target(mut self, tol: f64) -> Self {
        self.target_tolerance = tol;
        self
    }

    pub fn with_max_doublings(mut self, k: usize) -> Self {
        self.max_doublings = k;
        self
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { points_per_axis: 24, target_tolerance: 1e-6, max_doublings: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValue {
    pub value: f64,
    /// |value(2M) - value(M)| at the final pair of resolutions (plus
    /// accumulated rounding for lattice sums).
    pub tolerance: f64,
    /// Resolution of the reported value (or truncation for lattice sums).
    pub resolution: usize,
}

fn refine<F: FnMut(usize) -> Result<f64>>(spec: &QuadratureSpec, mut f: F) -> Result<OracleValue> {
    let mut m = spec.points_per_axis;
    let mut prev = f(m)?;
    let mut achieved = f64::INFINITY;
    for _ in 0..spec.max_doublings.max(1) {
        m *= 2;
        let next = f(m)?;
        achieved = (next - prev).abs();
        if achieved <= spec.target_tolerance {
            return Ok(OracleValue { value: next, tolerance: achieved, resolution: m });
        }
        prev = next;
    }
    Err(Error::Accuracy { target: spec.target_tolerance, achieved })
}

fn check_model(params: &RieszParams, n: usize, n_max: usize, beta: f64) -> Result<()> {
    if params.d() != 1 {
        return Err(invalid("grid oracles are one-dimensional"));
    }
    if n == 0 || n > n_max {
        return Err(invalid(format!("grid oracles need 1 ≤ n ≤ {n_max}")));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(invalid("β must be finite and non-negative"));
    }
    Ok(())
}

/// Pair energies tabulated at every grid offset.
struct Grid {
    m: usize,
    tbox: TorusBox,
    nodes: Vec<f64>,
    table: Vec<f64>,
    beta: f64,
}

impl Grid {
    fn new(pp: &PeriodizedPotential, m: usize, beta: f64) -> Result<Self> {
        let tbox = TorusBox::new(pp.n(), 1)?;
        let l = tbox.side_length();
        let h = l / m as f64;
        let nodes = (0..m).map(|a| -0.5 * l + (a as f64 + 0.5) * h).collect();
        let table = (0..m)
            .map(|k| if k == 0 { f64::INFINITY } else { pp.eval1(tbox.wrap_coord(k as f64 * h)) })
            .collect();
        Ok(Self { m, tbox, nodes, table, beta })
    }

    #[inline]
    fn pair(&self, a: usize, b: usize) -> f64 {
        self.table[(a + self.m - b) % self.m]
    }

    fn energy(&self, idx: &[usize]) -> f64 {
        let mut h = 0.0;
        for i in 0..idx.len() {
            for j in (i + 1)..idx.len() {
                h += self.pair(idx[i], idx[j]);
            }
        }
        h
    }

    /// e^{-βH}, zero on coincidences for every β.
    fn weight(&self, idx: &[usize]) -> f64 {
        let h = self.energy(idx);
        if h.is_infinite() {
            0.0
        } else if self.beta == 0.0 {
            1.0
        } else {
            (-self.beta * h).exp()
        }
    }

    fn configuration(&self, idx: &[usize]) -> Configuration {
        Configuration::from_flat_unchecked(self.tbox, idx.iter().map(|&a| self.nodes[a]).collect())
    }

    fn window_nodes(&self, window: &Window) -> Result<Vec<usize>> {
        let l = self.tbox.side_length();
        let h = l / self.m as f64;
        for &e in window.lower().iter().chain(window.upper()) {
            let t = (e + 0.5 * l) / h;
            if (t - t.round()).abs() > 1e-9 * self.m as f64 {
                return Err(invalid("window endpoints must lie on grid cell boundaries"));
            }
        }
        Ok((0..self.m).filter(|&a| window.contains(&[self.nodes[a]])).collect())
    }
}

/// Calls `f` on every tuple in {0..m}^n (or with the first index pinned to 0)
/// and returns the compensated sums of its `K` outputs.
fn grid_sum<const K: usize, F>(m: usize, n: usize, pin_first: bool, f: F) -> [f64; K]
where
    F: Fn(&[usize]) -> [f64; K] + Sync,
{
    let free = if pin_first { n - 1 } else { n };
    let zero = || [CompensatedSum::new(); K];
    let merge = |mut a: [CompensatedSum; K], b: [CompensatedSum; K]| {
        for (x, y) in a.iter_mut().zip(&b) {
            x.merge(y);
        }
        a
    };
    if free == 0 {
        return f(&vec![0; n]);
    }
    let sums = (0..m)
        .into_par_iter()
        .fold(zero, |mut acc, lead| {
            let mut idx = vec![0usize; n];
            let offset = n - free;
            idx[offset] = lead;
            loop {
                let v = f(&idx);
                for (a, x) in acc.iter_mut().zip(v) {
                    a.add(x);
                }
                // odometer over the remaining free indices
                let mut p = n;
                loop {
                    if p == offset + 1 {
                        return acc;
                    }
                    p -= 1;
                    idx[p] += 1;
                    if idx[p] < m {
                        break;
                    }
                    idx[p] = 0;
                }
            }
        })
        .reduce(zero, merge);
    sums.map(|s| s.value())
}

/// Z^β_n = ∫ e^{-βH_n} dBin_{Λ_n,n} for d = 1, n ≤ 4. Translation invariance
/// pins the first point.
pub fn exact_partition(params: &RieszParams, n: usize, beta: f64, spec: &QuadratureSpec) -> Result<OracleValue> {
    check_model(params, n, 4, beta)?;
    if n == 1 || beta == 0.0 {
        return Ok(OracleValue { value: 1.0, tolerance: 0.0, resolution: spec.points_per_axis });
    }
    let pp = PeriodizedPotential::new(*params, n)?;
    refine(spec, |m| {
        let grid = Grid::new(&pp, m, beta)?;
        let [z] = grid_sum(m, n, true, |idx| [grid.weight(idx)]);
        Ok(z / (m as f64).powi(n as i32 - 1))
    })
}

/// E^β_n[f] for d = 1, n ≤ 3 over the ordered product space.
pub fn exact_expectation<F>(f: F, params: &RieszParams, n: usize, beta: f64, spec: &QuadratureSpec) -> Result<OracleValue>
where
    F: Fn(&Configuration) -> f64 + Sync,
{
    check_model(params, n, 3, beta)?;
    let pp = PeriodizedPotential::new(*params, n)?;
    refine(spec, |m| {
        let grid = Grid::new(&pp, m, beta)?;
        let [fw, w] = grid_sum(m, n, false, |idx| {
            let w = grid.weight(idx);
            if w == 0.0 {
                [0.0, 0.0]
            } else {
                [f(&grid.configuration(idx)) * w, w]
            }
        });
        Ok(fw / w)
    })
}

/// E[f] - E[f_{n,Δ}], where f_{n,Δ}(γ) integrates f(η ∪ γ_{Δ^c}) against the
/// canonical window kernel ∝ e^{-βH_{n,Δ}(η,γ)} Bin(Δ, N_Δ(γ))(dη). The inner
/// integral runs over the outer grid restricted to Δ; Δ's endpoints must be
/// multiples of L/6.
pub fn dlr_residual<F>(params: &RieszParams, n: usize, beta: f64, window: &Window, f: F, spec: &QuadratureSpec) -> Result<OracleValue>
where
    F: Fn(&Configuration) -> f64 + Sync,
{
    check_model(params, n, 3, beta)?;
    let pp = PeriodizedPotential::new(*params, n)?;
    window.check_inside(&TorusBox::new(n, 1)?)?;
    refine(spec, |m| {
        let grid = Grid::new(&pp, m, beta)?;
        let inside_nodes = grid.window_nodes(window)?;
        let mut is_inside = vec![false; m];
        for &a in &inside_nodes {
            is_inside[a] = true;
        }
        // class of γ: sorted exterior node indices and the window count
        let key = |idx: &[usize]| {
            let mut ext: Vec<usize> = idx.iter().copied().filter(|&a| !is_inside[a]).collect();
            ext.sort_unstable();
            let k = idx.len() - ext.len();
            (ext, k)
        };
        let mut keys = HashSet::new();
        let mut idx = vec![0usize; n];
        loop {
            keys.insert(key(&idx));
            let mut p = n;
            loop {
                if p == 0 {
                    break;
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < m {
                    p = usize::MAX;
                    break;
                }
                idx[p] = 0;
            }
            if p != usize::MAX {
                break;
            }
        }
        let keys: Vec<(Vec<usize>, usize)> = keys.into_iter().collect();
        let conditional: HashMap<(Vec<usize>, usize), f64> = keys
            .into_par_iter()
            .map(|(ext, k)| {
                let mut tuple = ext.clone();
                tuple.extend(std::iter::repeat_n(0, k));
                let mut fw = CompensatedSum::new();
                let mut w = CompensatedSum::new();
                let mut pos = vec![0usize; k];
                loop {
                    for (slot, &p) in tuple[ext.len()..].iter_mut().zip(&pos) {
                        *slot = inside_nodes[p];
                    }
                    let wt = grid.weight(&tuple);
                    if wt > 0.0 {
                        fw.add(f(&grid.configuration(&tuple)) * wt);
                        w.add(wt);
                    }
                    let mut q = k;
                    let mut done = true;
                    while q > 0 {
                        q -= 1;
                        pos[q] += 1;
                        if pos[q] < inside_nodes.len() {
                            done = false;
                            break;
                        }
                        pos[q] = 0;
                    }
                    if done {
                        break;
                    }
                }
                let w = w.value();
                let v = if w > 0.0 { fw.value() / w } else { 0.0 };
                ((ext, k), v)
            })
            .collect();
        let [fw, fdw, w] = grid_sum(m, n, false, |idx| {
            let wt = grid.weight(idx);
            if wt == 0.0 {
                return [0.0; 3];
            }
            let fd = conditional[&key(idx)];
            [f(&grid.configuration(idx)) * wt, fd * wt, wt]
        });
        Ok((fw - fdw) / w)
    })
}

/// E[Σ_{x∈γ} f(x, γ \ x)] - (1/Z) ∫_{Λ_n} ∫ f(x, γ) e^{-βH_n(γ ∪ x)} dBin_{Λ_n,n-1}(dγ) dx.
pub fn gnz_residual<F>(params: &RieszParams, n: usize, beta: f64, f: F, spec: &QuadratureSpec) -> Result<OracleValue>
where
    F: Fn(&[f64], &Configuration) -> f64 + Sync,
{
    check_model(params, n, 3, beta)?;
    if n < 2 {
        return Err(invalid("the GNZ oracle needs n ≥ 2"));
    }
    let pp = PeriodizedPotential::new(*params, n)?;
    let l = pp.side_length();
    refine(spec, |m| {
        let grid = Grid::new(&pp, m, beta)?;
        let [lhs, w] = grid_sum(m, n, false, |idx| {
            let wt = grid.weight(idx);
            if wt == 0.0 {
                return [0.0, 0.0];
            }
            let gamma = grid.configuration(idx);
            let mut acc = 0.0;
            for i in 0..n {
                acc += f(gamma.point(i), &gamma.without(i));
            }
            [acc * wt, wt]
        });
        // right side: x on the first axis with Lebesgue weight h, γ on the rest
        let [rhs] = grid_sum(m, n, false, |idx| {
            let wt = grid.weight(idx);
            if wt == 0.0 {
                return [0.0];
            }
            let rest = grid.configuration(&idx[1..]);
            [f(&[grid.nodes[idx[0]]], &rest) * wt]
        });
        Ok(lhs / w - l * rhs / w)
    })
}

/// Brute-force g_n in d = 1: Σ_{|k| ≤ K} [g(x + kL) - c_k] with closed-form
/// cell means, ±k paired and accumulated with compensation. The cell means
/// do not depend on x and are tabulated once.
#[derive(Debug, Clone)]
pub struct LatticeReference {
    params: RieszParams,
    n: usize,
    side_length: f64,
    /// 2 c_k for k = 1..=K.
    doubled_means: Vec<f64>,
    central_mean: f64,
}

impl LatticeReference {
    pub fn new(params: &RieszParams, n: usize, k_big: usize) -> Result<Self> {
        if params.d() != 1 {
            return Err(invalid("the reference lattice sum is one-dimensional"));
        }
        if k_big < 100_000 {
            return Err(invalid("the reference lattice sum needs K ≥ 10^5"));
        }
        let s = params.s();
        let l = params.side_length(n);
        let doubled_means = (1..=k_big as u64).map(|k| 2.0 * cell_mean_1d(s, l, k)).collect();
        Ok(Self { params: *params, n, side_length: l, doubled_means, central_mean: cell_mean_1d(s, l, 0) })
    }

    pub fn truncation(&self) -> usize {
        self.doubled_means.len()
    }

    /// The tolerance is the paired second-order remainder bound plus
    /// accumulated rounding.
    pub fn eval(&self, x: f64) -> OracleValue {
        let k_big = self.truncation();
        if x == 0.0 {
            return OracleValue { value: f64::INFINITY, tolerance: 0.0, resolution: k_big };
        }
        let s = self.params.s();
        let l = self.side_length;
        const CHUNK: usize = 1 << 14;
        let mut acc = self
            .doubled_means
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, means)| {
                let mut acc = CompensatedSum::new();
                for (i, m2) in means.iter().enumerate() {
                    let kl = (c * CHUNK + i + 1) as f64 * l;
                    acc.add(riesz_r2(s, (x + kl) * (x + kl)) + riesz_r2(s, (x - kl) * (x - kl)) - m2);
                }
                acc
            })
            .reduce(CompensatedSum::new, |mut a, b| {
                a.merge(&b);
                a
            });
        acc.add(riesz_r2(s, x * x) - self.central_mean);
        // each paired term carries a few ulps of its largest summand
        let rounding = 8.0 * f64::EPSILON * l.powf(-s) * (1.0 + (k_big as f64).powf(1.0 - s) / (1.0 - s)) + acc.rounding_bound();
        let remainder = crate::potential::paired_tail_bound(&self.params, self.n, k_big, x.abs() / l, x * x);
        OracleValue { value: acc.value(), tolerance: remainder + rounding, resolution: k_big }
    }
}

/// One-shot [`LatticeReference`] evaluation.
pub fn reference_periodized(params: &RieszParams, n: usize, x: f64, k_big: usize) -> Result<OracleValue> {
    Ok(LatticeReference::new(params, n, k_big)?.eval(x))
}

/// g_n^*(0) = Σ_{k≠0} [g(kL) - c_k] by the same brute-force sum. The remainder
/// uses |g(kL) - c_k| ≤ s(s+1)/24 L^{-s} (k - 1/2)^{-s-2}.
pub fn reference_self_constant(params: &RieszParams, n: usize, k_big: usize) -> Result<OracleValue> {
    if params.d() != 1 {
        return Err(invalid("the reference lattice sum is one-dimensional"));
    }
    let s = params.s();
    let l = params.side_length(n);
    let mut acc = (1..=k_big)
        .into_par_iter()
        .fold(CompensatedSum::new, |mut a, k| {
            a.add(2.0 * (riesz_r2(s, (k as f64 * l).powi(2)) - cell_mean_1d(s, l, k as u64)));
            a
        })
        .reduce(CompensatedSum::new, |mut a, b| {
            a.merge(&b);
            a
        });
    let tail = hurwitz_zeta(s + 2.0, k_big as f64 + 0.5);
    let remainder = 2.0 * s * (s + 1.0) / 24.0 * l.powf(-s) * (tail.value + tail.bound);
    let rounding = 8.0 * f64::EPSILON * l.powf(-s) * (k_big as f64).powf(1.0 - s) / (1.0 - s);
    acc.add(0.0);
    Ok(OracleValue { value: acc.value(), tolerance: remainder + rounding + acc.rounding_bound(), resolution: k_big })
}

/// Law of the torus distance r ∈ [0, 1] between the two points at n = 2,
/// d = 1: density ∝ e^{-βg_2(r)} against the uniform law. Returns the mass
/// of each bin [edges[i], edges[i+1]).
pub fn pair_distance_probabilities(params: &RieszParams, beta: f64, edges: &[f64]) -> Result<Vec<OracleValue>> {
    check_model(params, 2, 2, beta)?;
    if edges.len() < 2 || edges[0] != 0.0 || *edges.last().unwrap() != 1.0 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("bin edges must increase from 0 to 1"));
    }
    let pp = PeriodizedPotential::new(*params, 2)?;
    let tol = 1e-12;
    let masses: Vec<crate::quadrature::Integral> = edges
        .windows(2)
        .map(|w| crate::quadrature::adaptive(|r| if r == 0.0 { 0.0 } else { (-beta * pp.eval1(r)).exp() }, w[0], w[1], tol))
        .collect::<Result<_>>()?;
    let z: f64 = masses.iter().map(|m| m.value).sum();
    let z_tol: f64 = masses.iter().map(|m| m.tolerance).sum();
    Ok(masses
        .iter()
        .map(|m| OracleValue { value: m.value / z, tolerance: (m.tolerance + m.value / z * z_tol) / z, resolution: 0 })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityEstimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    pub hits: u64,
}

/// Rejection estimate of Bin_{Λ_n,n}(C_{δ,n}): draws `trials` binomial
/// configurations and counts perturbed lattices. Work is split into fixed
/// blocks, each on its own stream of `seed`, so the result does not depend
/// on the thread count.
pub fn perturbed_lattice_probability_mc(tbox: &TorusBox, delta: f64, trials: u64, seed: u64) -> Result<ProbabilityEstimate> {
    let lattice = PerturbedLattice::new(*tbox, delta)?;
    const BLOCK: u64 = 1 << 16;
    let blocks = trials.div_ceil(BLOCK);
    let window = tbox.full_window();
    let n = tbox.n();
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = BLOCK.min(trials - b * BLOCK);
            let mut coords = vec![0.0; n * tbox.d()];
            let mut hits = 0u64;
            for _ in 0..count {
                for (i, v) in coords.iter_mut().enumerate() {
                    let axis = i % tbox.d();
                    *v = rng.random_range(window.lower()[axis]..window.upper()[axis]);
                }
                let gamma = Configuration::from_flat_unchecked(*tbox, coords.clone());
                if lattice.contains(&gamma) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p = hits as f64 / trials as f64;
    Ok(ProbabilityEstimate { value: p, stderr: (p * (1.0 - p) / trials as f64).sqrt(), trials, hits })
}

/// Certified sup of H_n over C_{δ,n} in d = 1 when n is an integer side
/// length: every pair offset stays within δ of j - i, and g_n is convex on
/// (0, L), so each pair is bounded by its value at an interval endpoint.
pub fn perturbed_lattice_energy_sup(pp: &PeriodizedPotential, delta: f64) -> Result<f64> {
    if pp.params().d() != 1 {
        return Err(invalid("the endpoint bound is one-dimensional"));
    }
    let n = pp.n();
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = (j - i) as f64;
            acc.add(pp.eval1(m - delta).max(pp.eval1(m + delta)));
        }
    }
    Ok(acc.value() + acc.rounding_bound())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionBracket {
    /// log of the lower bound e^{-β sup_C H} n!(δ/n)^n, divided by n.
    pub log_lower: f64,
    /// log b_β = -βA with A = -(1/2 + ∫g_2 + ε_n).
    pub log_upper: f64,
    pub delta: f64,
    pub stability_constant: f64,
}

/// Bracket for log Z^β_n / n in d = 1; the lower end is optimised over a grid
/// of δ, each candidate being a valid bound.
pub fn partition_bracket(params: &RieszParams, n: usize, beta: f64) -> Result<PartitionBracket> {
    if params.d() != 1 {
        return Err(invalid("the partition bracket is one-dimensional"));
    }
    let pp = PeriodizedPotential::new(*params, n)?;
    let g2 = crate::potential::integrate_g2(params)?;
    let a = -(0.5 + g2.value + g2.tolerance + pp.epsilon_n());
    let mut best = (f64::NEG_INFINITY, 0.0);
    for step in 1..=49 {
        let delta = step as f64 / 100.0;
        let sup = perturbed_lattice_energy_sup(&pp, delta)?;
        let log_bin = crate::torus::perturbed_lattice_probability_bound(n, delta).ln();
        let lower = (-beta * sup + log_bin) / n as f64;
        if lower > best.0 {
            best = (lower, delta);
        }
    }
    Ok(PartitionBracket { log_lower: best.0, log_upper: -beta * a, delta: best.1, stability_constant: a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::total_energy;

    fn p() -> RieszParams {
        RieszParams::new(1, 0.5).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(10).is_err());
        assert!(QuadratureSpec::new(0).is_err());
        assert!(QuadratureSpec::new(12).is_ok());
        assert!(exact_partition(&p(), 5, 1.0, &QuadratureSpec::default()).is_err());
        assert!(exact_expectation(|_| 1.0, &p(), 4, 1.0, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn trivial_partitions() {
        let spec = QuadratureSpec::default();
        assert_eq!(exact_partition(&p(), 1, 1.0, &spec).unwrap().value, 1.0);
        assert_eq!(exact_partition(&p(), 3, 0.0, &spec).unwrap().value, 1.0);
    }

    #[test]
    fn two_point_partition_is_pinned() {
        let spec = QuadratureSpec::default().with_target(1e-9);
        let z = exact_partition(&p(), 2, 1.0, &spec).unwrap();
        assert!(z.tolerance <= 1e-9);
        // 1-dim adaptive quadrature of e^{-g_2(r)} over the torus, frozen
        let pp = PeriodizedPotential::new(p(), 2).unwrap();
        let check = crate::quadrature::adaptive(|r| (-pp.eval1(r)).exp(), 0.0, 1.0, 1e-12).unwrap();
        assert!((z.value - check.value).abs() < 1e-9, "{} vs {}", z.value, check.value);
        assert!((z.value - Z2_FROZEN).abs() < 1e-9, "{:.16}", z.value);
    }

    // ∫_0^1 e^{-g_2(r)} dr with g_2 from Hurwitz zeta values at 30 digits
    const Z2_FROZEN: f64 = 1.580442354971428;
    const MEAN_H2_FROZEN: f64 = -0.6038036421876236;

    #[test]
    fn expectations() {
        let spec = QuadratureSpec::default();
        let one = exact_expectation(|_| 1.0, &p(), 2, 1.0, &spec).unwrap();
        assert!((one.value - 1.0).abs() < 1e-14);
        let w = Window::new(vec![-1.0 / 3.0], vec![1.0 / 3.0]).unwrap();
        let mean = exact_expectation(|g| g.count_in(&w) as f64, &p(), 2, 0.0, &spec).unwrap();
        assert!((mean.value - w.volume()).abs() < 1e-12);
        let pp = PeriodizedPotential::new(p(), 2).unwrap();
        let e_h = exact_expectation(|g| total_energy(g, &pp).total, &p(), 2, 1.0, &spec.with_target(1e-8)).unwrap();
        let z = crate::quadrature::adaptive(|r| (-pp.eval1(r)).exp(), 0.0, 1.0, 1e-12).unwrap().value;
        let zh = crate::quadrature::adaptive(|r| pp.eval1(r) * (-pp.eval1(r)).exp(), 0.0, 1.0, 1e-12).unwrap().value;
        assert!((e_h.value - zh / z).abs() < 1e-7, "{} vs {}", e_h.value, zh / z);
        assert!((e_h.value - MEAN_H2_FROZEN).abs() < 1e-7);
    }

    #[test]
    fn pair_distance_law_agrees_with_the_grid() {
        let edges: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        let probs = pair_distance_probabilities(&p(), 1.0, &edges).unwrap();
        assert!((probs.iter().map(|v| v.value).sum::<f64>() - 1.0).abs() < 1e-12);
        // E[cos(πr)] by the grid and by the binned density refined
        let fine: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
        let probs = pair_distance_probabilities(&p(), 1.0, &fine).unwrap();
        let binned: f64 = probs.iter().zip(fine.windows(2)).map(|(q, w)| q.value * (std::f64::consts::PI * 0.5 * (w[0] + w[1])).cos()).sum();
        let tbox = TorusBox::new(2, 1).unwrap();
        let grid = exact_expectation(
            |g| (std::f64::consts::PI * tbox.torus_diff(g.point(0), g.point(1))[0].abs()).cos(),
            &p(),
            2,
            1.0,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!((binned - grid.value).abs() < 1e-4, "{binned} vs {}", grid.value);
    }

    #[test]
    fn dlr_identity_on_the_grid() {
        let spec = QuadratureSpec::default().with_target(1e-10).with_max_doublings(1);
        let w = Window::new(vec![-1.0 / 3.0], vec![1.0 / 3.0]).unwrap();
        let sub = Window::new(vec![-1.0 / 3.0], vec![0.0]).unwrap();
        let r = dlr_residual(&p(), 2, 1.0, &w, |g| (g.count_in(&sub) == 1) as u8 as f64, &spec).unwrap();
        assert!(r.value.abs() < 1e-12, "{r:?}");
        let off = Window::new(vec![-0.3], vec![0.3]).unwrap();
        assert!(dlr_residual(&p(), 2, 1.0, &off, |_| 1.0, &spec).is_err());
    }

    #[test]
    fn gnz_identity_on_the_grid() {
        let spec = QuadratureSpec::default().with_target(1e-10).with_max_doublings(1);
        let w = Window::new(vec![-1.0 / 3.0], vec![1.0 / 3.0]).unwrap();
        let r = gnz_residual(&p(), 2, 1.0, |x, g| (w.contains(x) && g.count_in(&w) == 0) as u8 as f64, &spec).unwrap();
        assert!(r.value.abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn reference_sum_matches_closed_form_self_constant() {
        for n in [1, 2, 4, 8] {
            let r = reference_self_constant(&p(), n, 1_000_000).unwrap();
            let closed = crate::potential::self_constant_closed_form_1d(0.5, n);
            assert!((r.value - closed).abs() <= r.tolerance + 1e-13, "n={n}: {} vs {closed}", r.value);
            let g1 = reference_self_constant(&p(), 1, 1_000_000).unwrap();
            assert!((r.value * (n as f64).sqrt() - g1.value).abs() < 1e-6);
        }
        // frozen: L^{-s}(2ζ(s) + 2^s/(1-s)) at n = 1
        let r = reference_self_constant(&p(), 1, 1_000_000).unwrap();
        assert!((r.value - -0.09228189287298353).abs() < 1e-9);
    }

    #[test]
    fn reference_is_even_and_converges() {
        let a = reference_periodized(&p(), 2, 0.37, 100_000).unwrap();
        let b = reference_periodized(&p(), 2, -0.37, 100_000).unwrap();
        assert_eq!(a.value, b.value);
        let big = reference_periodized(&p(), 2, 0.37, 1_000_000).unwrap();
        assert!((a.value - big.value).abs() < crate::potential::tail_bound(&p(), 2, 100_000));
        assert!((a.value - big.value).abs() <= a.tolerance + big.tolerance);
        assert!(reference_periodized(&p(), 2, 0.37, 10).is_err());
    }

    #[test]
    fn bracket_contains_small_partitions() {
        let spec = QuadratureSpec::default();
        for n in 1..=3 {
            let b = partition_bracket(&p(), n, 1.0).unwrap();
            let z = exact_partition(&p(), n, 1.0, &spec).unwrap();
            let lz = z.value.ln() / n as f64;
            assert!(b.log_lower <= lz && lz <= b.log_upper, "n={n}: {b:?} {lz}");
        }
    }

    #[test]
    fn endpoint_sup_dominates_sampled_energies() {
        let pp = PeriodizedPotential::new(p(), 5).unwrap();
        let sup = perturbed_lattice_energy_sup(&pp, 0.3).unwrap();
        let tbox = TorusBox::new(5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let g = crate::torus::perturbed_lattice(&tbox, 0.3, &mut rng).unwrap();
            assert!(total_energy(&g, &pp).total <= sup);
        }
    }

    #[test]
    fn rejection_estimate_is_deterministic() {
        let tbox = TorusBox::new(2, 1).unwrap();
        let a = perturbed_lattice_probability_mc(&tbox, 0.4, 200_000, 5).unwrap();
        let b = perturbed_lattice_probability_mc(&tbox, 0.4, 200_000, 5).unwrap();
        assert_eq!(a, b);
        // d = 1: Bin(C) = n!(δ/n)^n exactly
        let exact = crate::torus::perturbed_lattice_probability_bound(2, 0.4);
        assert!((a.value - exact).abs() < 4.0 * a.stderr);
    }
}
