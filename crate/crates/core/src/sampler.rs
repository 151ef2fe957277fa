//! Canonical Metropolis sampler for the Gibbs measure ∝ e^{-βH_n} on
//! configurations of fixed size, with in-window resampling and window swaps.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{pair_energy, total_energy, EnergyBreakdown};
use crate::error::{invalid, Error, Result};
use crate::potential::PeriodizedPotential;
use crate::stats::{batch_means, integrated_autocorr_time, DEFAULT_BATCHES};
use crate::summation::CompensatedSum;
use crate::torus::{perturbed_lattice, Configuration, TorusBox, Window};

/// Generator used for every chain, as recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9): seed_from_u64(seed), set_stream(chain index)";

/// Accepted moves between two full energy recomputations.
pub const AUDIT_INTERVAL: u64 = 10_000;

/// Metropolis acceptance probability for an energy change; +∞ is rejected
/// before any exponential is formed.
#[inline]
pub fn acceptance_probability(beta: f64, delta_h: f64) -> f64 {
    if delta_h == f64::INFINITY {
        return 0.0;
    }
    let x = beta * delta_h;
    if x <= 0.0 {
        1.0
    } else {
        (-x).exp()
    }
}

/// Density of the symmetric proposal: uniform on the cube of side `step`.
#[inline]
pub fn proposal_density(step: f64, displacement: &[f64]) -> f64 {
    if displacement.iter().all(|v| v.abs() <= 0.5 * step) {
        step.powi(-(displacement.len() as i32))
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct ChainState {
    gamma: Configuration,
    pp: Arc<PeriodizedPotential>,
    beta: f64,
    rng: ChaCha8Rng,
    step_size: f64,
    accepted: u64,
    proposed: u64,
    /// pairs[i * m + j] = g_n(x_i - x_j), zero on the diagonal.
    pairs: Vec<f64>,
    field: Vec<f64>,
    energy: EnergyBreakdown,
    accepted_since_audit: u64,
    max_audit_drift: f64,
}

fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl ChainState {
    /// A chain started from `gamma` with RNG stream `stream` of `seed`.
    pub fn new(gamma: Configuration, pp: Arc<PeriodizedPotential>, beta: f64, seed: u64, stream: u64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(invalid("β must be finite and non-negative"));
        }
        if gamma.tbox().n() != pp.n() || gamma.d() != pp.params().d() {
            return Err(invalid("configuration box does not match the potential"));
        }
        Self::with_rng(gamma, pp, beta, chain_rng(seed, stream))
    }

    /// A chain started from a δ-perturbed lattice drawn from its own stream.
    pub fn from_perturbed_lattice(pp: Arc<PeriodizedPotential>, beta: f64, delta: f64, seed: u64, stream: u64) -> Result<Self> {
        let tbox = TorusBox::new(pp.n(), pp.params().d())?;
        let mut rng = chain_rng(seed, stream);
        let gamma = perturbed_lattice(&tbox, delta, &mut rng)?;
        Self::new(gamma, pp, beta, seed, stream).map(|mut s| {
            s.rng = rng;
            s
        })
    }

    fn with_rng(gamma: Configuration, pp: Arc<PeriodizedPotential>, beta: f64, rng: ChaCha8Rng) -> Result<Self> {
        let step_size = (0.5 * gamma.tbox().side_length()).min(1.0);
        let mut state = Self {
            gamma,
            pp,
            beta,
            rng,
            step_size,
            accepted: 0,
            proposed: 0,
            pairs: Vec::new(),
            field: Vec::new(),
            energy: EnergyBreakdown { total: 0.0, pair_count: 0, singular: false },
            accepted_since_audit: 0,
            max_audit_drift: 0.0,
        };
        state.rebuild_cache();
        if state.energy.singular {
            return Err(Error::Singular("initial configuration has coincident points"));
        }
        Ok(state)
    }

    fn rebuild_cache(&mut self) {
        let m = self.gamma.len();
        let tbox = *self.gamma.tbox();
        self.pairs = vec![0.0; m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                let v = pair_energy(&self.pp, &tbox, self.gamma.point(i), self.gamma.point(j));
                self.pairs[i * m + j] = v;
                self.pairs[j * m + i] = v;
            }
        }
        self.field = (0..m).map(|i| self.pairs[i * m..(i + 1) * m].iter().copied().collect::<CompensatedSum>().value()).collect();
        let total = 0.5 * self.field.iter().copied().collect::<CompensatedSum>().value();
        self.energy = EnergyBreakdown { total, pair_count: m * m.saturating_sub(1) / 2, singular: total.is_infinite() };
    }

    pub fn configuration(&self) -> &Configuration {
        &self.gamma
    }

    pub fn potential(&self) -> &PeriodizedPotential {
        &self.pp
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn energy(&self) -> EnergyBreakdown {
        self.energy
    }

    /// Cached h_n(x_i, γ \ x_i) for every point.
    pub fn fields(&self) -> &[f64] {
        &self.field
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn set_step_size(&mut self, step: f64) {
        self.step_size = step.clamp(1e-12, self.gamma.tbox().side_length());
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn counters(&self) -> (u64, u64) {
        (self.accepted, self.proposed)
    }

    pub fn reset_counters(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Largest relative drift between the cached and recomputed energy seen
    /// at any audit so far.
    pub fn max_audit_drift(&self) -> f64 {
        self.max_audit_drift
    }

    /// Recomputes H_n from scratch, records the drift and resynchronizes.
    pub fn audit(&mut self) -> f64 {
        let cached = self.energy.total;
        let fresh = total_energy(&self.gamma, &self.pp).total;
        let drift = (cached - fresh).abs() / fresh.abs().max(1.0);
        self.max_audit_drift = self.max_audit_drift.max(drift);
        self.rebuild_cache();
        self.accepted_since_audit = 0;
        drift
    }

    /// New pair energies of point `i` moved to `x`; None on coincidence.
    fn trial_row(&self, i: usize, x: &[f64], row: &mut Vec<f64>) -> Option<f64> {
        let m = self.gamma.len();
        let tbox = self.gamma.tbox();
        row.clear();
        let mut delta = CompensatedSum::new();
        for j in 0..m {
            if j == i {
                row.push(0.0);
                continue;
            }
            let v = pair_energy(&self.pp, tbox, x, self.gamma.point(j));
            if v.is_infinite() {
                return None;
            }
            delta.add(v - self.pairs[i * m + j]);
            row.push(v);
        }
        Some(delta.value())
    }

    fn commit_move(&mut self, i: usize, x: &[f64], row: &[f64], delta: f64) {
        let m = self.gamma.len();
        let mut fi = CompensatedSum::new();
        for (j, &r) in row.iter().enumerate().take(m) {
            if j == i {
                continue;
            }
            let old = self.pairs[i * m + j];
            self.field[j] += r - old;
            self.pairs[i * m + j] = r;
            self.pairs[j * m + i] = r;
            fi.add(r);
        }
        self.field[i] = fi.value();
        self.energy.total += delta;
        self.gamma.set_point(i, x);
        self.accepted_since_audit += 1;
        if self.accepted_since_audit >= AUDIT_INTERVAL {
            self.audit();
        }
    }

    fn metropolis_move(&mut self, i: usize, x: &[f64], row: &mut Vec<f64>) -> bool {
        let Some(delta) = self.trial_row(i, x, row) else { return false };
        let a = acceptance_probability(self.beta, delta);
        if a >= 1.0 || self.rng.random::<f64>() < a {
            self.commit_move(i, x, row, delta);
            true
        } else {
            false
        }
    }

    /// One single-particle Metropolis update with a uniform cube displacement.
    pub fn metropolis_step(&mut self) -> bool {
        let m = self.gamma.len();
        if m == 0 {
            return false;
        }
        let d = self.gamma.d();
        let i = self.rng.random_range(0..m);
        let half = 0.5 * self.step_size;
        let tbox = *self.gamma.tbox();
        let mut x = self.gamma.point(i).to_vec();
        for v in x.iter_mut().take(d) {
            *v = tbox.wrap_coord(*v + self.rng.random_range(-half..half));
        }
        let mut row = Vec::with_capacity(m);
        self.proposed += 1;
        let ok = self.metropolis_move(i, &x, &mut row);
        if ok {
            self.accepted += 1;
        }
        ok
    }

    /// Resamples the points inside Δ from their conditional law given the
    /// exterior and the count, by `sweeps` Metropolis sweeps with independent
    /// uniform proposals in Δ. Returns (accepted, proposed).
    pub fn dlr_resample_window(&mut self, window: &Window, sweeps: usize) -> Result<(u64, u64)> {
        window.check_inside(self.gamma.tbox())?;
        let inside = self.gamma.indices_in(window);
        let mut row = Vec::with_capacity(self.gamma.len());
        let mut x = vec![0.0; self.gamma.d()];
        let (mut acc, mut prop) = (0, 0);
        for _ in 0..sweeps {
            for &i in &inside {
                for (v, (a, b)) in x.iter_mut().zip(window.lower().iter().zip(window.upper())) {
                    *v = self.rng.random_range(*a..*b);
                }
                let x = self.gamma.tbox().wrapped(&x);
                prop += 1;
                if self.metropolis_move(i, &x, &mut row) {
                    acc += 1;
                }
            }
        }
        Ok((acc, prop))
    }

    /// Proposes exchanging the contents of Δ and Δ + u (torus translate) and
    /// accepts with the Metropolis ratio. Returns whether the swap was taken.
    pub fn swap_windows(&mut self, window: &Window, u: &[f64]) -> Result<bool> {
        let tbox = *self.gamma.tbox();
        window.check_inside(&tbox)?;
        if !window.disjoint_from_shift(&tbox, u) {
            return Err(Error::WindowOverlap);
        }
        let m = self.gamma.len();
        let d = self.gamma.d();
        let mut moved: Vec<(usize, Vec<f64>)> = Vec::new();
        for i in 0..m {
            let p = self.gamma.point(i);
            let target = if window.contains(p) {
                Some(p.iter().zip(u).map(|(a, b)| tbox.wrap_coord(a + b)).collect::<Vec<_>>())
            } else if window.contains_shifted(&tbox, p, u) {
                Some(p.iter().zip(u).map(|(a, b)| tbox.wrap_coord(a - b)).collect::<Vec<_>>())
            } else {
                None
            };
            if let Some(t) = target {
                moved.push((i, t));
            }
        }
        if moved.is_empty() {
            return Ok(true);
        }
        let mut coords = self.gamma.coords().to_vec();
        for (i, t) in &moved {
            coords[i * d..(i + 1) * d].copy_from_slice(t);
        }
        let is_moved: Vec<bool> = {
            let mut v = vec![false; m];
            for (i, _) in &moved {
                v[*i] = true;
            }
            v
        };
        let mut delta = CompensatedSum::new();
        let mut new_rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(moved.len());
        for (i, t) in &moved {
            let mut row = vec![0.0; m];
            for j in 0..m {
                if j == *i {
                    continue;
                }
                let v = pair_energy(&self.pp, &tbox, t, &coords[j * d..(j + 1) * d]);
                if v.is_infinite() {
                    return Ok(false);
                }
                row[j] = v;
                // pairs inside the moved set are visited twice
                let weight = if is_moved[j] { 0.5 } else { 1.0 };
                delta.add(weight * (v - self.pairs[i * m + j]));
            }
            new_rows.push((*i, row));
        }
        let delta = delta.value();
        let a = acceptance_probability(self.beta, delta);
        if !(a >= 1.0 || self.rng.random::<f64>() < a) {
            return Ok(false);
        }
        for (i, row) in &new_rows {
            for (j, &r) in row.iter().enumerate().take(m) {
                if j != *i {
                    self.pairs[i * m + j] = r;
                    self.pairs[j * m + i] = r;
                }
            }
        }
        for (i, t) in &moved {
            self.gamma.set_point(*i, t);
        }
        self.field = (0..m).map(|i| self.pairs[i * m..(i + 1) * m].iter().copied().collect::<CompensatedSum>().value()).collect();
        self.energy.total += delta;
        self.accepted_since_audit += moved.len() as u64;
        if self.accepted_since_audit >= AUDIT_INTERVAL {
            self.audit();
        }
        Ok(true)
    }
}

/// Move mixture used by [`run_chain`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Schedule {
    Plain,
    /// Window resampling after every `every` Metropolis steps.
    Dlr { window: Window, every: usize, sweeps: usize },
    /// A swap with a uniformly chosen shift after every `every` steps.
    Swap { window: Window, shifts: Vec<Vec<f64>>, every: usize },
}

impl Schedule {
    pub fn name(&self) -> &'static str {
        match self {
            Schedule::Plain => "plain",
            Schedule::Dlr { .. } => "dlr",
            Schedule::Swap { .. } => "swap",
        }
    }
}

/// Default number of inner sweeps of a window resampling.
pub const DEFAULT_DLR_SWEEPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunPlan {
    pub n_steps: u64,
    pub thin: u64,
    pub burn_in: u64,
    pub schedule: Schedule,
    /// Adapt the step size toward 30-50% acceptance during burn-in.
    pub tune: bool,
}

impl RunPlan {
    pub fn plain(n_steps: u64, thin: u64, burn_in: u64) -> Self {
        Self { n_steps, thin, burn_in, schedule: Schedule::Plain, tune: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    pub acceptance_rate: f64,
    pub autocorr_time: f64,
    pub energy_mean: f64,
    pub energy_stderr: f64,
    pub samples: u64,
    pub step_size: f64,
    pub extra_acceptance_rate: Option<f64>,
    pub max_audit_drift: f64,
}

/// Runs `n_steps` Metropolis steps (burn-in included) under the schedule,
/// calling `observer` on every `thin`-th state after burn-in.
pub fn run_chain<F: FnMut(&ChainState)>(state: &mut ChainState, plan: &RunPlan, mut observer: F) -> Result<ChainDiagnostics> {
    if plan.n_steps < plan.burn_in || plan.thin == 0 {
        return Err(invalid("need n_steps ≥ burn_in and thin ≥ 1"));
    }
    let mut energies = Vec::with_capacity(((plan.n_steps - plan.burn_in) / plan.thin) as usize);
    let (mut extra_acc, mut extra_prop) = (0u64, 0u64);
    let mut tune_window = (0u64, 0u64);
    for step in 0..plan.n_steps {
        let ok = state.metropolis_step();
        if step < plan.burn_in && plan.tune {
            tune_window.0 += ok as u64;
            tune_window.1 += 1;
            if tune_window.1 == 200 {
                let rate = tune_window.0 as f64 / 200.0;
                if rate > 0.5 {
                    state.set_step_size(state.step_size() * 1.25);
                } else if rate < 0.3 {
                    state.set_step_size(state.step_size() * 0.8);
                }
                tune_window = (0, 0);
            }
        }
        if step + 1 == plan.burn_in {
            state.reset_counters();
        }
        match &plan.schedule {
            Schedule::Plain => {}
            Schedule::Dlr { window, every, sweeps } => {
                if *every > 0 && (step + 1) % *every as u64 == 0 {
                    let (a, p) = state.dlr_resample_window(window, *sweeps)?;
                    if step >= plan.burn_in {
                        extra_acc += a;
                        extra_prop += p;
                    }
                }
            }
            Schedule::Swap { window, shifts, every } => {
                if *every > 0 && !shifts.is_empty() && (step + 1) % *every as u64 == 0 {
                    let k = state.rng.random_range(0..shifts.len());
                    let ok = state.swap_windows(window, &shifts[k])?;
                    if step >= plan.burn_in {
                        extra_acc += ok as u64;
                        extra_prop += 1;
                    }
                }
            }
        }
        if step >= plan.burn_in && (step + 1 - plan.burn_in).is_multiple_of(plan.thin) {
            energies.push(state.energy().total);
            observer(state);
        }
    }
    let (energy_mean, energy_stderr) = match batch_means(&energies, DEFAULT_BATCHES) {
        Ok(bm) => (bm.mean, bm.stderr),
        Err(_) if !energies.is_empty() => (crate::stats::mean(&energies), f64::NAN),
        Err(_) => (f64::NAN, f64::NAN),
    };
    Ok(ChainDiagnostics {
        acceptance_rate: state.acceptance_rate(),
        autocorr_time: integrated_autocorr_time(&energies),
        energy_mean,
        energy_stderr,
        samples: energies.len() as u64,
        step_size: state.step_size(),
        extra_acceptance_rate: (extra_prop > 0).then(|| extra_acc as f64 / extra_prop as f64),
        max_audit_drift: state.max_audit_drift(),
    })
}

/// Largest violation of π(a)P(a→b) = π(b)P(b→a) for the single-particle
/// Metropolis kernel on a discretized two-point system in d = 1: positions
/// on `cells` equally spaced sites, displacements uniform on the sites
/// within the proposal cube. Uses the sampler's own proposal density and
/// acceptance rule; π is normalized.
pub fn detailed_balance_audit(pp: &PeriodizedPotential, beta: f64, cells: usize, step: f64) -> Result<f64> {
    if pp.params().d() != 1 {
        return Err(invalid("the detailed-balance audit is one-dimensional"));
    }
    let l = pp.side_length();
    let h = l / cells as f64;
    let tbox = crate::torus::TorusBox::new(pp.n(), 1)?;
    let site = |k: usize| -0.5 * l + (k as f64 + 0.5) * h;
    let energy = |a: usize, b: usize| pair_energy(pp, &tbox, &[site(a)], &[site(b)]);
    let states: Vec<(usize, usize)> = (0..cells).flat_map(|a| (0..cells).map(move |b| (a, b))).filter(|(a, b)| a != b).collect();
    let weights: Vec<f64> = states.iter().map(|&(a, b)| (-beta * energy(a, b)).exp()).collect();
    let z: f64 = weights.iter().sum();
    // discrete displacement kernel: sites k·h with proposal density > 0
    let reach: Vec<i64> = (-(cells as i64)..=(cells as i64)).filter(|&k| proposal_density(step, &[k as f64 * h]) > 0.0).collect();
    let q = 1.0 / reach.len() as f64;
    let index = |a: usize, b: usize| states.iter().position(|&s| s == (a, b));
    let mut worst = 0.0f64;
    for (si, &(a, b)) in states.iter().enumerate() {
        let e_old = energy(a, b);
        for particle in 0..2 {
            for &k in &reach {
                let moved = ((if particle == 0 { a } else { b }) as i64 + k).rem_euclid(cells as i64) as usize;
                let (na, nb) = if particle == 0 { (moved, b) } else { (a, moved) };
                let Some(ti) = index(na, nb) else { continue };
                if ti == si {
                    continue;
                }
                let e_new = energy(na, nb);
                let forward = 0.5 * q * acceptance_probability(beta, e_new - e_old);
                let backward = 0.5 * q * acceptance_probability(beta, e_old - e_new);
                let flux = (weights[si] * forward - weights[ti] * backward).abs() / z;
                worst = worst.max(flux);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::RieszParams;
    use crate::torus::{perturbed_lattice, sample_binomial, TorusBox};

    fn pp(n: usize) -> Arc<PeriodizedPotential> {
        Arc::new(PeriodizedPotential::new(RieszParams::new(1, 0.5).unwrap(), n).unwrap())
    }

    fn start(n: usize, beta: f64, seed: u64) -> ChainState {
        let b = TorusBox::new(n, 1).unwrap();
        let g = perturbed_lattice(&b, 0.3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        ChainState::new(g, pp(n), beta, seed, 0).unwrap()
    }

    #[test]
    fn acceptance_rule() {
        assert_eq!(acceptance_probability(1.0, f64::INFINITY), 0.0);
        assert_eq!(acceptance_probability(0.0, f64::INFINITY), 0.0);
        assert_eq!(acceptance_probability(0.0, 5.0), 1.0);
        assert_eq!(acceptance_probability(2.0, -1.0), 1.0);
        assert!((acceptance_probability(2.0, 0.5) - (-1f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn zero_temperature_accepts_everything() {
        let mut st = start(5, 0.0, 1);
        for _ in 0..1000 {
            assert!(st.metropolis_step());
        }
        assert_eq!(st.counters(), (1000, 1000));
    }

    #[test]
    fn stream_length_and_determinism() {
        let mut a = start(4, 1.0, 7);
        let mut b = start(4, 1.0, 7);
        let mut trace_a = Vec::new();
        let mut trace_b = Vec::new();
        let plan = RunPlan::plain(500, 1, 0);
        run_chain(&mut a, &plan, |s| trace_a.push(s.configuration().coords().to_vec())).unwrap();
        run_chain(&mut b, &plan, |s| trace_b.push(s.configuration().coords().to_vec())).unwrap();
        assert_eq!(trace_a.len(), 500);
        assert_eq!(trace_a, trace_b);
        let plan = RunPlan::plain(1000, 3, 100);
        let mut count = 0;
        run_chain(&mut a, &plan, |_| count += 1).unwrap();
        assert_eq!(count, 300);
        assert!(run_chain(&mut a, &RunPlan::plain(10, 1, 20), |_| {}).is_err());
    }

    #[test]
    fn acceptance_rate_is_strictly_between_zero_and_one() {
        let mut st = start(8, 1.0, 3);
        st.set_step_size(4.0);
        let diag = run_chain(&mut st, &RunPlan { tune: false, ..RunPlan::plain(5000, 1, 0) }, |_| {}).unwrap();
        assert!(diag.acceptance_rate > 0.0 && diag.acceptance_rate < 1.0);
    }

    #[test]
    fn cached_energy_tracks_recomputation() {
        let mut st = start(12, 1.0, 5);
        run_chain(&mut st, &RunPlan::plain(30_000, 1, 1000), |_| {}).unwrap();
        let cached = st.energy().total;
        let fresh = total_energy(st.configuration(), st.potential()).total;
        assert!((cached - fresh).abs() <= 1e-8 * fresh.abs().max(1.0));
        assert!(st.max_audit_drift() <= 1e-8);
        for (i, f) in st.fields().iter().enumerate() {
            let h = crate::energy::local_field(st.configuration().point(i), &st.configuration().without(i), st.potential());
            assert!((f - h).abs() < 1e-9);
        }
    }

    #[test]
    fn count_is_conserved_and_single_particle_is_uniform() {
        let b = TorusBox::new(1, 1).unwrap();
        let g = Configuration::from_points(b, &[vec![0.1]]).unwrap();
        let mut st = ChainState::new(g, pp(1), 1.0, 9, 0).unwrap();
        let mut hist = [0u64; 10];
        run_chain(&mut st, &RunPlan::plain(200_000, 10, 1000), |s| {
            assert_eq!(s.configuration().len(), 1);
            let x = s.configuration().point(0)[0];
            hist[((x + 0.5) * 10.0) as usize] += 1;
        })
        .unwrap();
        let chi = crate::stats::chi_square_gof(&hist, &[0.1; 10]);
        assert!(chi.p_value > 1e-3, "{chi:?}");
    }

    #[test]
    fn dlr_resampling_keeps_exterior_and_count() {
        let mut st = start(8, 1.0, 11);
        let w = Window::new(vec![-1.5], vec![1.5]).unwrap();
        for _ in 0..50 {
            let before = st.configuration().clone();
            st.dlr_resample_window(&w, 3).unwrap();
            let after = st.configuration();
            assert_eq!(after.count_in(&w), before.count_in(&w));
            for (p, q) in before.points().zip(after.points()) {
                if !w.contains(p) {
                    assert_eq!(p[0].to_bits(), q[0].to_bits());
                }
            }
            for _ in 0..10 {
                st.metropolis_step();
            }
        }
        let empty = Window::new(vec![3.9], vec![3.95]).unwrap();
        let mut st2 = start(8, 1.0, 12);
        let before = st2.configuration().clone();
        if before.count_in(&empty) == 0 {
            st2.dlr_resample_window(&empty, 10).unwrap();
            assert_eq!(st2.configuration(), &before);
        }
    }

    #[test]
    fn swaps() {
        let b = TorusBox::new(8, 1).unwrap();
        let w = Window::new(vec![-1.0], vec![0.0]).unwrap();
        // both windows empty
        let g = Configuration::from_points(b, &[vec![0.5], vec![1.5], vec![-2.5]]).unwrap();
        let mut st = ChainState::new(g.clone(), pp(8), 1.0, 1, 0).unwrap();
        assert!(st.swap_windows(&w, &[3.0]).unwrap());
        assert_eq!(st.configuration(), &g);
        assert_eq!(st.swap_windows(&w, &[0.5]), Err(Error::WindowOverlap));
        // β = 0 always accepts and exchanges the contents
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = sample_binomial(&b, &b.full_window(), 8, &mut rng);
        let mut st = ChainState::new(g, pp(8), 0.0, 1, 0).unwrap();
        for _ in 0..20 {
            let n_before = st.configuration().count_in(&w);
            let shifted = st.configuration().points().filter(|p| w.contains_shifted(&b, p, &[3.0])).count();
            assert!(st.swap_windows(&w, &[3.0]).unwrap());
            assert_eq!(st.configuration().count_in(&w), shifted);
            let back = st.configuration().points().filter(|p| w.contains_shifted(&b, p, &[3.0])).count();
            assert_eq!(back, n_before);
            assert_eq!(st.configuration().len(), 8);
            for _ in 0..5 {
                st.metropolis_step();
            }
        }
        // energy bookkeeping through accepted swaps at β = 1
        let g = sample_binomial(&b, &b.full_window(), 8, &mut rng);
        let mut st = ChainState::new(g, pp(8), 1.0, 4, 0).unwrap();
        for _ in 0..200 {
            st.swap_windows(&w, &[4.0]).unwrap();
            st.metropolis_step();
        }
        let fresh = total_energy(st.configuration(), st.potential()).total;
        assert!((st.energy().total - fresh).abs() < 1e-9);
    }

    #[test]
    fn stationarization_preserves_count_and_energy() {
        let st = start(6, 1.0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = total_energy(st.configuration(), st.potential());
        for _ in 0..20 {
            let t = crate::torus::stationarize(st.configuration(), &mut rng);
            assert_eq!(t.len(), 6);
            let et = total_energy(&t, st.potential()).total;
            assert!((et - e.total).abs() <= 2.0 * e.pair_count as f64 * st.potential().tail_bound() + 1e-12);
        }
    }

    #[test]
    fn discretized_kernel_is_reversible() {
        let p = pp(2);
        let worst = detailed_balance_audit(&p, 1.0, 16, 0.8).unwrap();
        assert!(worst <= 1e-12, "{worst:e}");
    }
}
