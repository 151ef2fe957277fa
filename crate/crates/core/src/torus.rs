//! Point configurations on the torus Λ_n = [-L/2, L/2)^d with L = n^{1/d},
//! box windows, the binomial and Poisson reference processes, and perturbed
//! lattices.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::potential::side_length;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusBox {
    n: usize,
    d: usize,
    side_length: f64,
}

impl TorusBox {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(invalid("box needs n ≥ 1 and d ≥ 1"));
        }
        Ok(Self { n, d, side_length: side_length(d, n as f64) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn volume(&self) -> f64 {
        self.n as f64
    }

    /// Representative of `v` in [-L/2, L/2).
    #[inline]
    pub fn wrap_coord(&self, v: f64) -> f64 {
        let l = self.side_length;
        let half = 0.5 * l;
        let mut r = v - l * ((v + half) / l).floor();
        // floor() can leave r one ulp outside the half-open interval
        if r >= half {
            r -= l;
        }
        if r < -half {
            r += l;
        }
        if r >= half {
            r = -half;
        }
        r
    }

    pub fn wrap(&self, x: &mut [f64]) {
        for v in x.iter_mut() {
            *v = self.wrap_coord(*v);
        }
    }

    pub fn wrapped(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.wrap_coord(v)).collect()
    }

    /// wrap(x - y), written into `out`.
    #[inline]
    pub fn torus_diff_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o = self.wrap_coord(a - b);
        }
    }

    pub fn torus_diff(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.torus_diff_into(x, y, &mut out);
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let half = 0.5 * self.side_length;
        x.len() == self.d && x.iter().all(|&v| (-half..half).contains(&v))
    }

    /// The whole fundamental domain as a window.
    pub fn full_window(&self) -> Window {
        let half = 0.5 * self.side_length;
        Window { lower: vec![-half; self.d], upper: vec![half; self.d] }
    }
}

/// Axis-aligned half-open box [lower, upper).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(invalid("window corners must be non-empty and of equal dimension"));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(invalid("window needs lower < upper in every coordinate"));
        }
        Ok(Self { lower, upper })
    }

    /// Cube of the given side centered at `center`.
    pub fn cube(center: &[f64], side: f64) -> Result<Self> {
        Self::new(center.iter().map(|c| c - 0.5 * side).collect(), center.iter().map(|c| c + 0.5 * side).collect())
    }

    /// Centered cube Λ_v of volume `v` in dimension `d`.
    pub fn centered(d: usize, volume: f64) -> Result<Self> {
        Self::cube(&vec![0.0; d], side_length(d, volume))
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn d(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }

    /// Largest sup-norm distance from the origin to a point of the window.
    pub fn sup_radius(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| a.abs().max(b.abs())).fold(0.0, f64::max)
    }

    /// Largest Euclidean distance from the origin to a point of the window.
    pub fn radius(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| a.abs().max(b.abs()).powi(2)).sum::<f64>().sqrt()
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| *a <= *v && *v < *b)
    }

    /// Membership of `x` in the torus translate Δ + u.
    pub fn contains_shifted(&self, tbox: &TorusBox, x: &[f64], u: &[f64]) -> bool {
        x.iter().zip(u).zip(self.lower.iter().zip(&self.upper)).all(|((v, s), (a, b))| {
            let w = tbox.wrap_coord(v - s);
            *a <= w && w < *b
        })
    }

    /// Checks that the window lies inside the fundamental domain of `tbox`.
    pub fn check_inside(&self, tbox: &TorusBox) -> Result<()> {
        let half = 0.5 * tbox.side_length();
        if self.d() != tbox.d() {
            return Err(invalid("window dimension differs from the box dimension"));
        }
        let tol = 1e-12 * tbox.side_length();
        if self.lower.iter().any(|&a| a < -half - tol) || self.upper.iter().any(|&b| b > half + tol) {
            return Err(invalid("window must lie inside the fundamental domain"));
        }
        Ok(())
    }

    /// Whether Δ and Δ + u are disjoint on the torus.
    pub fn disjoint_from_shift(&self, tbox: &TorusBox, u: &[f64]) -> bool {
        let l = tbox.side_length();
        // boxes are disjoint when some axis separates them modulo L
        self.lower.iter().zip(&self.upper).zip(u).any(|((a, b), s)| {
            let width = b - a;
            let shift = s.rem_euclid(l);
            shift >= width && shift <= l - width
        })
    }

    /// Sup-norm distance between Δ and Δ + u on the torus (0 when they meet).
    pub fn shift_gap(&self, tbox: &TorusBox, u: &[f64]) -> f64 {
        let l = tbox.side_length();
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(u)
            .map(|((a, b), s)| {
                let width = b - a;
                let shift = s.rem_euclid(l);
                (shift - width).min(l - shift - width).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

/// A finite ordered point set in the fundamental domain of a torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    tbox: TorusBox,
    coords: Vec<f64>,
}

impl Configuration {
    pub fn empty(tbox: TorusBox) -> Self {
        Self { tbox, coords: Vec::new() }
    }

    pub fn from_points(tbox: TorusBox, points: &[Vec<f64>]) -> Result<Self> {
        let mut c = Self::empty(tbox);
        for p in points {
            c.push(p)?;
        }
        Ok(c)
    }

    /// Builds from flat coordinates, checking the domain and duplicates.
    pub fn from_flat(tbox: TorusBox, coords: Vec<f64>) -> Result<Self> {
        if !coords.len().is_multiple_of(tbox.d()) {
            return Err(invalid("coordinate count is not a multiple of d"));
        }
        let mut c = Self::empty(tbox);
        for p in coords.chunks(tbox.d()) {
            c.push(p)?;
        }
        Ok(c)
    }

    /// Builds without the domain and duplicate checks (quadrature nodes).
    pub(crate) fn from_flat_unchecked(tbox: TorusBox, coords: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len() % tbox.d(), 0);
        Self { tbox, coords }
    }

    pub fn tbox(&self) -> &TorusBox {
        &self.tbox
    }

    pub fn d(&self) -> usize {
        self.tbox.d()
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.tbox.d()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.tbox.d();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.tbox.d())
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.points().map(|p| p.to_vec()).collect()
    }

    fn index_of(&self, x: &[f64]) -> Option<usize> {
        self.points().position(|p| p.iter().zip(x).all(|(a, b)| a.to_bits() == b.to_bits()))
    }

    /// Appends a point; it must lie in the fundamental domain and differ
    /// bitwise from every stored point.
    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if !self.tbox.contains(x) {
            return Err(invalid(format!("point {x:?} outside the fundamental domain")));
        }
        if self.index_of(x).is_some() {
            return Err(invalid(format!("duplicate point {x:?}")));
        }
        self.coords.extend_from_slice(x);
        Ok(())
    }

    /// Appends after wrapping into the fundamental domain.
    pub fn push_wrapped(&mut self, x: &[f64]) -> Result<()> {
        let w = self.tbox.wrapped(x);
        self.push(&w)
    }

    /// Overwrites point `i`; the caller guarantees domain membership.
    pub(crate) fn set_point(&mut self, i: usize, x: &[f64]) {
        let d = self.tbox.d();
        self.coords[i * d..(i + 1) * d].copy_from_slice(x);
    }

    pub fn remove(&mut self, i: usize) -> Vec<f64> {
        let d = self.tbox.d();
        self.coords.drain(i * d..(i + 1) * d).collect()
    }

    /// Configuration with point `i` left out.
    pub fn without(&self, i: usize) -> Configuration {
        let mut c = self.clone();
        c.remove(i);
        c
    }

    /// N_Δ(γ).
    pub fn count_in(&self, window: &Window) -> usize {
        self.points().filter(|p| window.contains(p)).count()
    }

    pub fn indices_in(&self, window: &Window) -> Vec<usize> {
        self.points().enumerate().filter(|(_, p)| window.contains(p)).map(|(i, _)| i).collect()
    }

    /// Restriction γ_Δ.
    pub fn restrict(&self, window: &Window) -> Configuration {
        let coords = self.points().filter(|p| window.contains(p)).flatten().copied().collect();
        Configuration { tbox: self.tbox, coords }
    }

    /// Restriction to the complement γ_{Δ^c}.
    pub fn restrict_complement(&self, window: &Window) -> Configuration {
        let coords = self.points().filter(|p| !window.contains(p)).flatten().copied().collect();
        Configuration { tbox: self.tbox, coords }
    }

    /// Union with another configuration on the same torus.
    pub fn union(&self, other: &Configuration) -> Result<Configuration> {
        let mut c = self.clone();
        for p in other.points() {
            c.push(p)?;
        }
        Ok(c)
    }

    /// τ_u: every point shifted by `u` and wrapped.
    pub fn translate_torus(&self, u: &[f64]) -> Configuration {
        let d = self.tbox.d();
        let mut coords = self.coords.clone();
        for p in coords.chunks_mut(d) {
            for (v, s) in p.iter_mut().zip(u) {
                *v = self.tbox.wrap_coord(*v + s);
            }
        }
        Configuration { tbox: self.tbox, coords }
    }
}

/// Free function form of [`Configuration::count_in`].
pub fn count_in(gamma: &Configuration, window: &Window) -> usize {
    gamma.count_in(window)
}

fn uniform_point<R: Rng + ?Sized>(region: &Window, rng: &mut R, out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(region.lower()).zip(region.upper()) {
        *o = rng.random_range(*a..*b);
    }
}

/// N i.i.d. uniform points in `region` (a window of the torus `tbox`).
pub fn sample_binomial<R: Rng + ?Sized>(tbox: &TorusBox, region: &Window, count: usize, rng: &mut R) -> Configuration {
    let mut c = Configuration::empty(*tbox);
    let mut x = vec![0.0; tbox.d()];
    while c.len() < count {
        uniform_point(region, rng, &mut x);
        let w = tbox.wrapped(&x);
        // bitwise collisions have probability ~2^-52 and are simply redrawn
        let _ = c.push(&w);
    }
    c
}

/// Poisson process of the given intensity restricted to `region`.
pub fn sample_poisson<R: Rng + ?Sized>(
    tbox: &TorusBox,
    region: &Window,
    intensity: f64,
    rng: &mut R,
) -> Result<Configuration> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(invalid("intensity must be finite and non-negative"));
    }
    let mean = intensity * region.volume();
    let count = if mean == 0.0 {
        0
    } else {
        Poisson::new(mean).map_err(|e| invalid(e.to_string()))?.sample(rng) as usize
    };
    Ok(sample_binomial(tbox, region, count, rng))
}

/// Geometry of the perturbed-lattice neighbourhoods Δ_j.
///
/// Unit cubes C_j are anchored at the lower corner -L/2 of Λ_n; indices with
/// every component below r = ⌊L⌋ are interior, the others are peripheral
/// cubes cut by the boundary, of width f = L - r along the cut axes.
#[derive(Debug, Clone)]
pub struct PerturbedLattice {
    tbox: TorusBox,
    delta: f64,
    r: usize,
    fraction: f64,
}

impl PerturbedLattice {
    pub fn new(tbox: TorusBox, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(invalid("perturbation δ must lie in (0, 1/2)"));
        }
        let l = tbox.side_length();
        let mut r = l.floor() as usize;
        // guard n^{1/d} computed slightly below an integer
        if ((r + 1) as f64 - l).abs() < 1e-9 {
            r += 1;
        }
        let fraction = (l - r as f64).max(0.0);
        let fraction = if fraction < 1e-9 { 0.0 } else { fraction };
        Ok(Self { tbox, delta, r, fraction })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn interior_count(&self) -> usize {
        self.r.pow(self.tbox.d() as u32)
    }

    /// Bounds of Δ_j along one axis for cube index `j`.
    fn axis_bounds(&self, j: usize) -> (f64, f64) {
        let half_l = 0.5 * self.tbox.side_length();
        if j < self.r {
            let c = -half_l + j as f64 + 0.5;
            (c - 0.5 * self.delta, c + 0.5 * self.delta)
        } else {
            let c = -half_l + self.r as f64 + 0.5 * self.fraction;
            let w = self.delta.min(self.fraction);
            (c - 0.5 * w, c + 0.5 * w)
        }
    }

    fn peripheral_cells(&self) -> Vec<Vec<usize>> {
        if self.fraction == 0.0 {
            return Vec::new();
        }
        let d = self.tbox.d();
        let width = self.r + 1;
        (0..width.pow(d as u32))
            .map(|mut flat| {
                (0..d)
                    .map(|_| {
                        let v = flat % width;
                        flat /= width;
                        v
                    })
                    .collect::<Vec<_>>()
            })
            .filter(|j: &Vec<usize>| j.contains(&self.r))
            .collect()
    }

    fn interior_cells(&self) -> Vec<Vec<usize>> {
        let d = self.tbox.d();
        let r = self.r;
        (0..r.pow(d as u32))
            .map(|mut flat| {
                (0..d)
                    .map(|_| {
                        let v = flat % r;
                        flat /= r;
                        v
                    })
                    .collect()
            })
            .collect()
    }

    /// Cube index of a point, or None when it lies in no Δ_j.
    pub fn cell_of(&self, x: &[f64]) -> Option<Vec<usize>> {
        let half_l = 0.5 * self.tbox.side_length();
        let mut j = Vec::with_capacity(x.len());
        for &v in x {
            let idx = ((v + half_l).floor().max(0.0) as usize).min(self.r);
            let (a, b) = self.axis_bounds(idx);
            if v < a || v > b {
                return None;
            }
            j.push(idx);
        }
        Some(j)
    }

    /// Membership in C_{δ,n}.
    pub fn contains(&self, gamma: &Configuration) -> bool {
        if gamma.len() != self.tbox.n() {
            return false;
        }
        let d = self.tbox.d();
        let width = self.r + 1;
        let mut seen = vec![0u8; width.pow(d as u32)];
        for p in gamma.points() {
            let Some(j) = self.cell_of(p) else { return false };
            let flat = j.iter().rev().fold(0usize, |acc, &v| acc * width + v);
            if seen[flat] == 1 {
                return false;
            }
            seen[flat] = 1;
        }
        self.interior_cells().iter().all(|j| {
            let flat = j.iter().rev().fold(0usize, |acc, &v| acc * width + v);
            seen[flat] == 1
        })
    }

    fn place<R: Rng + ?Sized>(&self, cell: &[usize], rng: &mut R, out: &mut Configuration) {
        let x: Vec<f64> = cell
            .iter()
            .map(|&j| {
                let (a, b) = self.axis_bounds(j);
                rng.random_range(a..=b)
            })
            .collect();
        let w = self.tbox.wrapped(&x);
        out.push(&w).expect("perturbed-lattice cells are disjoint");
    }

    /// A random element of C_{δ,n}: one uniform point in each interior Δ_j,
    /// the remaining points in distinct peripheral Δ_j. When the boundary
    /// layer is thinner than δ the full-width ("good") peripheral cells, cut
    /// along a single axis, are used first.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Configuration> {
        let n = self.tbox.n();
        let mut gamma = Configuration::empty(self.tbox);
        for cell in self.interior_cells() {
            self.place(&cell, rng, &mut gamma);
        }
        let extra = n - self.interior_count();
        if extra == 0 {
            return Ok(gamma);
        }
        let mut peripheral = self.peripheral_cells();
        if self.fraction < self.delta {
            // good cells first: exactly one cut axis
            peripheral.sort_by_key(|j| j.iter().filter(|&&v| v == self.r).count() > 1);
            let good = peripheral.iter().filter(|j| j.iter().filter(|&&v| v == self.r).count() == 1).count();
            let pool = if good >= extra { good } else { peripheral.len() };
            peripheral.truncate(pool);
        }
        if peripheral.len() < extra {
            return Err(invalid("not enough peripheral cells for the remaining points"));
        }
        for idx in sample_indices(rng, peripheral.len(), extra) {
            self.place(&peripheral[idx], rng, &mut gamma);
        }
        Ok(gamma)
    }
}

/// A random perturbed lattice of `n` points (see [`PerturbedLattice::sample`]).
pub fn perturbed_lattice<R: Rng + ?Sized>(tbox: &TorusBox, delta: f64, rng: &mut R) -> Result<Configuration> {
    PerturbedLattice::new(*tbox, delta)?.sample(rng)
}

/// n!(δ/n)^n, the lower bound on Bin_{Λ_n,n}(C_{δ,n}).
pub fn perturbed_lattice_probability_bound(n: usize, delta: f64) -> f64 {
    (statrs::function::factorial::ln_factorial(n as u64) + n as f64 * (delta / n as f64).ln()).exp()
}

/// Uniform torus translation of γ (stationarization).
pub fn stationarize<R: Rng + ?Sized>(gamma: &Configuration, rng: &mut R) -> Configuration {
    let window = gamma.tbox().full_window();
    let mut u = vec![0.0; gamma.d()];
    uniform_point(&window, rng, &mut u);
    gamma.translate_torus(&u)
}

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// One line of a newline-delimited snapshot stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u32,
    pub seed: u64,
    pub d: usize,
    pub s: f64,
    pub n: usize,
    pub beta: f64,
    pub points: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn new(gamma: &Configuration, s: f64, beta: f64, seed: u64) -> Self {
        Self {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            seed,
            d: gamma.d(),
            s,
            n: gamma.tbox().n(),
            beta,
            points: gamma.to_vecs(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| invalid(format!("bad snapshot record: {e}")))
    }

    pub fn configuration(&self) -> Result<Configuration> {
        Configuration::from_points(TorusBox::new(self.n, self.d)?, &self.points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(n: usize, d: usize) -> TorusBox {
        TorusBox::new(n, d).unwrap()
    }

    #[test]
    fn wrap_examples() {
        let b = bx(2, 1);
        assert_eq!(b.wrap_coord(1.5), -0.5);
        assert_eq!(b.wrap_coord(1.0), -1.0);
        assert_eq!(b.wrap_coord(-1.0), -1.0);
        assert_eq!(b.torus_diff(&[0.3], &[0.3]), vec![0.0]);
        assert_eq!(b.wrap_coord(-1.0 - 1e-17), -1.0);
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent_and_lands_in_domain(v in -1e6f64..1e6, n in 1usize..50) {
            let b = bx(n, 1);
            let w = b.wrap_coord(v);
            prop_assert!(b.contains(&[w]));
            prop_assert_eq!(b.wrap_coord(w), w);
            let shift = (w - v) / b.side_length();
            prop_assert!((shift - shift.round()).abs() < 1e-6);
        }

        #[test]
        fn translation_preserves_count_and_inverts(
            pts in proptest::collection::vec(-2.0f64..2.0, 0..20),
            u in -10.0f64..10.0,
        ) {
            let b = bx(4, 1);
            let mut g = Configuration::empty(b);
            for p in pts { let _ = g.push(&[p]); }
            let t = g.translate_torus(&[u]);
            prop_assert_eq!(t.len(), g.len());
            let back = t.translate_torus(&[-u]);
            for (a, c) in back.points().zip(g.points()) {
                prop_assert!(b.wrap_coord(a[0] - c[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_translation_is_identity() {
        let b = bx(5, 2);
        let g = sample_binomial(&b, &b.full_window(), 7, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(g.translate_torus(&[0.0, 0.0]), g);
    }

    #[test]
    fn duplicates_and_outside_points_are_rejected() {
        let b = bx(2, 1);
        let mut g = Configuration::empty(b);
        g.push(&[0.25]).unwrap();
        assert!(g.push(&[0.25]).is_err());
        assert!(g.push(&[1.0]).is_err());
        assert!(g.push(&[-1.0]).is_ok());
    }

    #[test]
    fn counting_matches_linear_scan() {
        let b = bx(10, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = sample_binomial(&b, &b.full_window(), 100, &mut rng);
        assert_eq!(Configuration::empty(b).count_in(&b.full_window()), 0);
        assert_eq!(g.count_in(&b.full_window()), 100);
        for _ in 0..20 {
            let lo: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..0.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|v| v + rng.random_range(0.1..1.5)).collect();
            let w = Window::new(lo.clone(), hi.clone()).unwrap();
            let mut scan = 0;
            for i in 0..g.len() {
                let p = g.point(i);
                if p[0] >= lo[0] && p[0] < hi[0] && p[1] >= lo[1] && p[1] < hi[1] {
                    scan += 1;
                }
            }
            assert_eq!(g.count_in(&w), scan);
        }
    }

    #[test]
    fn binomial_window_count_has_the_right_mean() {
        let b = bx(8, 1);
        let w = Window::new(vec![-1.0], vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let counts: Vec<f64> = (0..draws)
            .map(|_| sample_binomial(&b, &b.full_window(), 10, &mut rng).count_in(&w) as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / draws as f64;
        let p = 2.0 / 8.0;
        let se = (10.0 * p * (1.0 - p) / draws as f64).sqrt();
        assert!((mean - 10.0 * p).abs() < 3.0 * se, "{mean}");
        assert!(sample_binomial(&b, &b.full_window(), 0, &mut rng).is_empty());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let b = bx(6, 2);
        let a = sample_binomial(&b, &b.full_window(), 6, &mut ChaCha8Rng::seed_from_u64(5));
        let c = sample_binomial(&b, &b.full_window(), 6, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a.coords(), c.coords());
        let line_a = Snapshot::new(&a, 1.5, 1.0, 5).to_line();
        let line_c = Snapshot::new(&c, 1.5, 1.0, 5).to_line();
        assert_eq!(line_a, line_c);
        let back = Snapshot::from_line(&line_a).unwrap().configuration().unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn poisson_counts_have_matching_mean_and_variance() {
        let b = bx(16, 1);
        let w = Window::new(vec![-2.0], vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let draws = 100_000usize;
        let counts: Vec<f64> =
            (0..draws).map(|_| sample_poisson(&b, &w, 1.5, &mut rng).unwrap().len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / draws as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let lambda: f64 = 4.5;
        assert!((mean - lambda).abs() < 3.0 * (lambda / draws as f64).sqrt());
        // Var of the sample variance of a Poisson variable: (λ + 2λ²)/N
        assert!((var - lambda).abs() < 5.0 * ((lambda + 2.0 * lambda * lambda) / draws as f64).sqrt());
        assert!(sample_poisson(&b, &w, 0.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn perturbed_lattice_on_a_perfect_power() {
        let b = bx(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let delta = 0.2;
        let g = perturbed_lattice(&b, delta, &mut rng).unwrap();
        assert_eq!(g.len(), 4);
        for p in g.points() {
            let c = (p[0] + 2.0).floor() - 2.0 + 0.5;
            assert!((p[0] - c).abs() <= 0.5 * delta);
        }
        assert!(perturbed_lattice(&b, 0.5, &mut rng).is_err());
        assert!(perturbed_lattice(&b, 0.0, &mut rng).is_err());
    }

    #[test]
    fn perturbed_lattices_pass_the_membership_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(n, d, delta) in &[(5usize, 2usize, 0.1), (7, 2, 0.3), (10, 3, 0.05), (17, 2, 0.2), (9, 2, 0.25), (3, 1, 0.1)]
        {
            let lattice = PerturbedLattice::new(bx(n, d), delta).unwrap();
            for _ in 0..50 {
                let g = lattice.sample(&mut rng).unwrap();
                assert_eq!(g.len(), n);
                assert!(lattice.contains(&g), "n={n} d={d}");
            }
        }
    }

    #[test]
    fn rejection_samples_agree_with_the_membership_test() {
        // Every binomial draw accepted by the membership test must be a
        // configuration the generator could produce: one point per interior
        // neighbourhood, at most one per peripheral neighbourhood.
        let b = bx(3, 1);
        let lattice = PerturbedLattice::new(b, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut accepted = 0;
        for _ in 0..20_000 {
            let g = sample_binomial(&b, &b.full_window(), 3, &mut rng);
            if lattice.contains(&g) {
                accepted += 1;
                let mut cells: Vec<usize> = g.points().map(|p| lattice.cell_of(p).unwrap()[0]).collect();
                cells.sort_unstable();
                assert_eq!(cells, vec![0, 1, 2]);
            }
        }
        assert!(accepted > 0);
    }

    #[test]
    fn shifted_windows_and_overlap() {
        let b = bx(8, 1);
        let w = Window::new(vec![-1.0], vec![1.0]).unwrap();
        assert!(w.disjoint_from_shift(&b, &[3.0]));
        assert!(!w.disjoint_from_shift(&b, &[1.5]));
        assert!(!w.disjoint_from_shift(&b, &[7.0]));
        assert!(w.contains_shifted(&b, &[3.5], &[3.0]));
        assert!(w.contains_shifted(&b, &[-3.5], &[5.0]));
        assert!((w.shift_gap(&b, &[4.0]) - 2.0).abs() < 1e-15);
    }
}
