//! Energy functionals: the torus energy H_n, local fields, window energies,
//! truncated move costs with certified error, and the backgrounded energy on
//! replicated copies of a torus configuration.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::potential::{riesz_r2, PeriodizedPotential, RieszParams};
use crate::special::hurwitz_zeta;
use crate::summation::CompensatedSum;
use crate::torus::{Configuration, TorusBox, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub pair_count: usize,
    pub singular: bool,
}

/// g_n between two points of the torus.
#[inline]
pub fn pair_energy(pp: &PeriodizedPotential, tbox: &TorusBox, x: &[f64], y: &[f64]) -> f64 {
    if x.len() == 1 {
        return pp.eval1(tbox.wrap_coord(x[0] - y[0]));
    }
    let mut diff = [0.0f64; 8];
    if x.len() <= 8 {
        let diff = &mut diff[..x.len()];
        tbox.torus_diff_into(x, y, diff);
        pp.eval(diff)
    } else {
        pp.eval(&tbox.torus_diff(x, y))
    }
}

fn check_box(gamma: &Configuration, pp: &PeriodizedPotential) {
    debug_assert_eq!(gamma.tbox().n(), pp.n(), "configuration box does not match the potential");
    debug_assert_eq!(gamma.d(), pp.params().d());
}

/// H_n(γ) = Σ_{pairs} g_n(x - y).
pub fn total_energy(gamma: &Configuration, pp: &PeriodizedPotential) -> EnergyBreakdown {
    check_box(gamma, pp);
    let tbox = gamma.tbox();
    let m = gamma.len();
    let mut acc = CompensatedSum::new();
    for i in 0..m {
        for j in (i + 1)..m {
            acc.add(pair_energy(pp, tbox, gamma.point(i), gamma.point(j)));
        }
    }
    let total = acc.value();
    EnergyBreakdown { total, pair_count: m * m.saturating_sub(1) / 2, singular: total.is_infinite() }
}

/// H_n after moving point `i` to `x_new`, minus H_n before.
pub fn delta_move(gamma: &Configuration, i: usize, x_new: &[f64], pp: &PeriodizedPotential) -> f64 {
    check_box(gamma, pp);
    let tbox = gamma.tbox();
    let old = gamma.point(i);
    let mut acc = CompensatedSum::new();
    for j in 0..gamma.len() {
        if j == i {
            continue;
        }
        let y = gamma.point(j);
        let new = pair_energy(pp, tbox, x_new, y);
        if new.is_infinite() {
            return f64::INFINITY;
        }
        acc.add(new - pair_energy(pp, tbox, old, y));
    }
    acc.value()
}

/// h_n(x, γ) = Σ_{y∈γ} g_n(x - y); +∞ when x ∈ γ.
pub fn local_field(x: &[f64], gamma: &Configuration, pp: &PeriodizedPotential) -> f64 {
    check_box(gamma, pp);
    let tbox = gamma.tbox();
    let mut acc = CompensatedSum::new();
    for y in gamma.points() {
        acc.add(pair_energy(pp, tbox, x, y));
    }
    acc.value()
}

/// H_{n,Δ}(η, γ) = H_n(η) + Σ_{x∈η} Σ_{y∈γ_{Δ^c}} g_n(x - y), for η ⊂ Δ.
pub fn local_energy_window(
    eta: &Configuration,
    gamma: &Configuration,
    window: &Window,
    pp: &PeriodizedPotential,
) -> Result<f64> {
    if eta.points().any(|p| !window.contains(p)) {
        return Err(invalid("η must lie inside the window"));
    }
    let tbox = gamma.tbox();
    let mut acc = CompensatedSum::new();
    acc.add(total_energy(eta, pp).total);
    for x in eta.points() {
        for y in gamma.points().filter(|y| !window.contains(y)) {
            acc.add(pair_energy(pp, tbox, x, y));
        }
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MoveCost {
    pub value: f64,
    pub truncation_radius: usize,
    pub certified_error: f64,
}

/// Intensity cap used for shells beyond the observed region.
pub const DEFAULT_INTENSITY_CAP: f64 = 2.0;

/// Index k of the shell Λ_{k+1} \ Λ_k holding `y`, with Λ_v the centered
/// cube of volume v.
fn shell_index(y: &[f64]) -> usize {
    let sup = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (2.0 * sup).powi(y.len() as i32).floor() as usize
}

fn inside_volume(y: &[f64], volume: f64) -> bool {
    let half = 0.5 * crate::potential::side_length(y.len(), volume);
    y.iter().all(|v| v.abs() <= half)
}

/// M_Δ^{(p)}(η, γ) = Σ_{x∈η_Δ} Σ_{y∈γ_{Λ_p \ Δ}} [g(x - y) - g(y)] with the
/// free-space kernel, and its certified truncation error.
///
/// Both configurations are read as point sets of R^d; γ is known on the box
/// it lives in (Λ_P), beyond which `kappa` bounds the expected shell counts.
pub fn move_cost_truncated(
    params: &RieszParams,
    eta: &Configuration,
    gamma: &Configuration,
    window: &Window,
    p: usize,
    kappa: f64,
) -> Result<MoveCost> {
    let s = params.s();
    let mut acc = CompensatedSum::new();
    for y in gamma.points() {
        if window.contains(y) || !inside_volume(y, p as f64) {
            continue;
        }
        let gy = riesz_r2(s, y.iter().map(|v| v * v).sum());
        if gy.is_infinite() {
            return Err(Error::Singular("origin occupied by a point outside the window"));
        }
        for x in eta.points().filter(|x| window.contains(x)) {
            let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            acc.add(riesz_r2(s, r2) - gy);
        }
    }
    let value = acc.value();
    if value.is_infinite() {
        return Err(Error::Singular("a window point coincides with an exterior point"));
    }
    let certified_error = move_tail_bound(params, eta.count_in(window), gamma, window, p, kappa)?;
    Ok(MoveCost { value, truncation_radius: p, certified_error })
}

/// s 4^{s+1} ρ_Δ N_Δ(η) [Σ_{p≤k<P} N_{Λ_{k+1}\Λ_k}(γ) k^{-(s+1)/d} + κ Σ_{k≥P} k^{-(s+1)/d}],
/// where Λ_P is the box γ is observed on. Requires ρ_Δ ≤ p^{1/d}/4 so that
/// every exterior y is at least twice as far from the origin as any x ∈ Δ.
pub fn move_tail_bound(
    params: &RieszParams,
    window_count: usize,
    gamma: &Configuration,
    window: &Window,
    p: usize,
    kappa: f64,
) -> Result<f64> {
    let (d, s) = (params.d(), params.s());
    let rho = window.radius();
    let reach = 0.25 * crate::potential::side_length(d, p as f64);
    if p == 0 || rho > reach {
        return Err(invalid(format!("move-cost bound needs ρ_Δ ≤ p^(1/d)/4; got ρ_Δ = {rho}, p = {p}")));
    }
    if window_count == 0 {
        return Ok(0.0);
    }
    let observed = gamma.tbox().n();
    let q = (s + 1.0) / d as f64;
    let mut acc = CompensatedSum::new();
    for y in gamma.points() {
        let k = shell_index(y);
        if k >= p && k < observed {
            acc.add((k as f64).powf(-q));
        }
    }
    let start = observed.max(p) as f64;
    let z = hurwitz_zeta(q, start);
    acc.add(kappa * (z.value + z.bound));
    Ok(s * 4f64.powf(s + 1.0) * rho * window_count as f64 * acc.value())
}

/// H̃_m(γ) for γ ⊂ Λ_m = [-m/2, m/2] in one dimension: pair energy, minus the
/// interaction with a uniform background, plus the background self-energy.
pub fn backgrounded_energy(params: &RieszParams, gamma: &Configuration) -> Result<f64> {
    if params.d() != 1 {
        return Err(invalid("backgrounded energy is implemented in dimension 1 only"));
    }
    let s = params.s();
    let e = 1.0 - s;
    let m = gamma.tbox().side_length();
    let half = 0.5 * m;
    let mut acc = CompensatedSum::new();
    let xs = gamma.coords();
    for (i, &x) in xs.iter().enumerate() {
        for &y in &xs[i + 1..] {
            acc.add(riesz_r2(s, (x - y) * (x - y)));
        }
        acc.add(-((x + half).powf(e) + (half - x).powf(e)) / e);
    }
    acc.add(m.powf(2.0 - s) / (e * (2.0 - s)));
    let v = acc.value();
    if v.is_infinite() {
        return Err(Error::Singular("coincident points"));
    }
    Ok(v)
}

/// H̃_{(2k+1)n}(γ + n[k]) / (2k+1): the backgrounded energy of 2k+1 adjacent
/// copies of γ, per copy.
pub fn replicated_mean_energy(params: &RieszParams, gamma: &Configuration, k: usize) -> Result<f64> {
    let n = gamma.tbox().n();
    if gamma.len() != n {
        return Err(Error::ChargeBalance { points: gamma.len(), volume: n });
    }
    if params.d() != 1 {
        return Err(invalid("replicated energy is implemented in dimension 1 only"));
    }
    let copies = 2 * k + 1;
    let big = TorusBox::new(copies * n, 1)?;
    let mut coords = Vec::with_capacity(copies * n);
    for j in -(k as i64)..=(k as i64) {
        coords.extend(gamma.coords().iter().map(|x| x + (j * n as i64) as f64));
    }
    let replicated = Configuration::from_flat(big, coords)?;
    Ok(backgrounded_energy(params, &replicated)? / copies as f64)
}

/// Limit of [`replicated_mean_energy`] as k → ∞: H_n(γ) plus, for every
/// particle, its energy with its own images and the background,
/// n (ε_n - c_0/2).
pub fn replica_limit(gamma: &Configuration, pp: &PeriodizedPotential) -> f64 {
    total_energy(gamma, pp).total + gamma.len() as f64 * pp.image_self_energy()
}
