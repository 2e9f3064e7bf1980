//! Finite filtered probability spaces and martingales over them.
//!
//! The model is deliberately concrete: a finite set of sample points with
//! strictly positive probabilities, and a filtration given as a refining
//! chain of partitions `P_0 = {Ω} ⊆ P_1 ⊆ … ⊆ P_N`. Conditional expectation
//! is an exact per-atom weighted average, so every identity in this crate is
//! checkable to floating-point accuracy rather than by sampling.
//!
//! Measurability is enforced structurally: adapted processes store one value
//! per atom of the matching level and expand to per-point vectors on demand.
//! Stopping times are per-point level indices with `N + 1` as the sentinel
//! for "never stops"; construction validates that `{τ ≤ n}` is a union of
//! level-`n` atoms for every `n`.
//!
//! Randomized inputs (for the empirical test harnesses) come from a fixed,
//! documented PRNG: ChaCha8 keyed by a `u64` seed, with the stream index used
//! to derive independent per-trial generators. Identical seeds reproduce
//! martingales bit for bit on every platform.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for "probabilities sum to one".
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Base tolerance for the martingale property `E_n f_{n+1} = f_n` and for
/// per-atom constancy checks; scaled by `max(1, max |value|)` internally.
pub const MARTINGALE_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Probability space
// ---------------------------------------------------------------------------

/// A finite probability space: points `0..n` with strictly positive
/// probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbSpace {
    probs: Vec<f64>,
}

impl ProbSpace {
    /// Validates and wraps a probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbabilities("empty vector".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::InvalidProbabilities(format!(
                    "entry {i} is {p}; every probability must be finite and > 0"
                )));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidProbabilities(format!(
                "sum is {total}, expected 1 within {PROB_SUM_TOL}"
            )));
        }
        Ok(Self { probs })
    }

    /// The uniform space on `n` points.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidProbabilities("empty vector".into()));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    /// Number of sample points.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    /// True when the space has no points (never, for validated spaces).
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of point `i`.
    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// The full probability vector.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of a set of points.
    pub fn measure(&self, points: &[usize]) -> f64 {
        points.iter().map(|&i| self.probs[i]).sum()
    }

    /// Expectation of a point function.
    pub fn expectation(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }
}

// ---------------------------------------------------------------------------
// Filtration
// ---------------------------------------------------------------------------

/// A refining chain of partitions `P_0 = {Ω} ⊆ P_1 ⊆ … ⊆ P_N` (`N ≥ 1`)
/// over a [`ProbSpace`], with cached atom membership, parent links, and atom
/// probabilities.
///
/// Atoms are stored as sorted lists of point indices. `levels[n][a]` is atom
/// `a` of partition `P_n`.
#[derive(Debug)]
pub struct Filtration {
    space: ProbSpace,
    levels: Vec<Vec<Vec<usize>>>,
    /// `atom_of[n][i]` = index of the level-`n` atom containing point `i`.
    atom_of: Vec<Vec<usize>>,
    /// `parent[n][a]` = index in `P_{n-1}` of the atom containing `P_n`'s atom `a` (rows start at n = 1).
    parent: Vec<Vec<usize>>,
    /// `atom_prob[n][a]` = probability of atom `a` of `P_n`.
    atom_prob: Vec<Vec<f64>>,
}

impl Filtration {
    /// Validates a partition chain and builds the lookup tables.
    ///
    /// Requirements: `P_0 = {Ω}`; each level partitions the whole point set
    /// (every point in exactly one nonempty atom); each atom of `P_{n+1}` is
    /// contained in a single atom of `P_n`; at least two levels (`N ≥ 1`).
    pub fn new(space: ProbSpace, levels: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let n_points = space.len();
        if levels.len() < 2 {
            return Err(Error::InvalidFiltration(format!(
                "need at least levels P_0 and P_1, got {} level(s)",
                levels.len()
            )));
        }

        // Normalize atoms to sorted point lists and check the partition property.
        let mut norm_levels: Vec<Vec<Vec<usize>>> = Vec::with_capacity(levels.len());
        let mut atom_of: Vec<Vec<usize>> = Vec::with_capacity(levels.len());
        for (n, level) in levels.into_iter().enumerate() {
            let mut seen = vec![usize::MAX; n_points];
            let mut atoms: Vec<Vec<usize>> = Vec::with_capacity(level.len());
            for (a, mut atom) in level.into_iter().enumerate() {
                if atom.is_empty() {
                    return Err(Error::InvalidFiltration(format!(
                        "level {n} atom {a} is empty"
                    )));
                }
                atom.sort_unstable();
                atom.dedup();
                for &i in &atom {
                    if i >= n_points {
                        return Err(Error::InvalidFiltration(format!(
                            "level {n} atom {a} references point {i}, but the space has {n_points} points"
                        )));
                    }
                    if seen[i] != usize::MAX {
                        return Err(Error::InvalidFiltration(format!(
                            "point {i} appears in two atoms of level {n}"
                        )));
                    }
                    seen[i] = a;
                }
                atoms.push(atom);
            }
            if seen.contains(&usize::MAX) {
                return Err(Error::InvalidFiltration(format!(
                    "level {n} does not cover every point"
                )));
            }
            norm_levels.push(atoms);
            atom_of.push(seen);
        }

        if norm_levels[0].len() != 1 {
            return Err(Error::InvalidFiltration(format!(
                "P_0 must be the trivial partition {{Ω}}, got {} atoms",
                norm_levels[0].len()
            )));
        }

        // Refinement: every atom of P_{n} lies inside one atom of P_{n-1}.
        let mut parent: Vec<Vec<usize>> = vec![Vec::new()];
        for n in 1..norm_levels.len() {
            let mut row = Vec::with_capacity(norm_levels[n].len());
            for (a, atom) in norm_levels[n].iter().enumerate() {
                let pa = atom_of[n - 1][atom[0]];
                if atom.iter().any(|&i| atom_of[n - 1][i] != pa) {
                    return Err(Error::InvalidFiltration(format!(
                        "level {n} atom {a} straddles two atoms of level {}",
                        n - 1
                    )));
                }
                row.push(pa);
            }
            parent.push(row);
        }

        let atom_prob: Vec<Vec<f64>> = norm_levels
            .iter()
            .map(|level| level.iter().map(|atom| space.measure(atom)).collect())
            .collect();

        Ok(Self {
            space,
            levels: norm_levels,
            atom_of,
            parent,
            atom_prob,
        })
    }

    /// The dyadic filtration of the given depth: `2^depth` equiprobable
    /// points, `P_n` splitting Ω into `2^n` equal contiguous blocks.
    pub fn dyadic(depth: usize) -> Result<Arc<Self>> {
        if depth == 0 {
            return Err(Error::InvalidParameter(
                "dyadic depth must be at least 1".into(),
            ));
        }
        if depth > 20 {
            return Err(Error::InvalidParameter(format!(
                "dyadic depth {depth} exceeds the supported maximum of 20"
            )));
        }
        let n_points = 1usize << depth;
        let space = ProbSpace::uniform(n_points)?;
        let mut levels = Vec::with_capacity(depth + 1);
        for n in 0..=depth {
            let block = n_points >> n;
            let level: Vec<Vec<usize>> = (0..(1usize << n))
                .map(|a| (a * block..(a + 1) * block).collect())
                .collect();
            levels.push(level);
        }
        Ok(Arc::new(Self::new(space, levels)?))
    }

    /// Final level index `N`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Number of sample points.
    pub fn num_points(&self) -> usize {
        self.space.len()
    }

    /// The underlying probability space.
    pub fn space(&self) -> &ProbSpace {
        &self.space
    }

    /// The atoms of partition `P_n`.
    pub fn level(&self, n: usize) -> &[Vec<usize>] {
        &self.levels[n]
    }

    /// All levels (used by the JSON exchange format).
    pub fn levels(&self) -> &[Vec<Vec<usize>>] {
        &self.levels
    }

    /// Index of the level-`n` atom containing point `i`.
    pub fn atom_of(&self, n: usize, i: usize) -> usize {
        self.atom_of[n][i]
    }

    /// Points of atom `a` of `P_n`, sorted.
    pub fn atom_points(&self, n: usize, a: usize) -> &[usize] {
        &self.levels[n][a]
    }

    /// Probability of atom `a` of `P_n`.
    pub fn atom_prob(&self, n: usize, a: usize) -> f64 {
        self.atom_prob[n][a]
    }

    /// Index in `P_{n-1}` of the parent of atom `a` of `P_n` (`n ≥ 1`).
    pub fn parent_atom(&self, n: usize, a: usize) -> usize {
        self.parent[n][a]
    }

    /// Structural equality good enough for "same filtration" preconditions:
    /// either the same allocation or identical probabilities and levels.
    pub fn same_as(&self, other: &Filtration) -> bool {
        std::ptr::eq(self, other) || (self.space == other.space && self.levels == other.levels)
    }

    /// Conditional expectation `E_n f` of a point function, as a point
    /// function (constant on each atom of `P_n`).
    pub fn conditional_expectation(&self, f: &[f64], n: usize) -> Result<Vec<f64>> {
        let atoms = self.conditional_expectation_atoms(f, n)?;
        let mut out = vec![0.0; self.num_points()];
        for (i, v) in out.iter_mut().enumerate() {
            *v = atoms[self.atom_of[n][i]];
        }
        Ok(out)
    }

    /// Conditional expectation `E_n f`, one value per atom of `P_n`.
    pub fn conditional_expectation_atoms(&self, f: &[f64], n: usize) -> Result<Vec<f64>> {
        if f.len() != self.num_points() {
            return Err(Error::InvalidParameter(format!(
                "function has {} entries, space has {} points",
                f.len(),
                self.num_points()
            )));
        }
        if n > self.depth() {
            return Err(Error::InvalidParameter(format!(
                "level {n} exceeds filtration depth {}",
                self.depth()
            )));
        }
        Ok(self.levels[n]
            .iter()
            .enumerate()
            .map(|(a, atom)| {
                let s: f64 = atom.iter().map(|&i| f[i] * self.space.prob(i)).sum();
                s / self.atom_prob[n][a]
            })
            .collect())
    }

    /// Regularity constant `R = max_{n ≥ 1, A ∈ P_n} P(parent(A)) / P(A)`.
    ///
    /// Finite for every filtration here; it measures how unevenly atoms split
    /// and equals 2 for dyadic filtrations.
    pub fn regularity_constant(&self) -> f64 {
        let mut r: f64 = 1.0;
        for n in 1..=self.depth() {
            for a in 0..self.levels[n].len() {
                let ratio = self.atom_prob[n - 1][self.parent[n][a]] / self.atom_prob[n][a];
                r = r.max(ratio);
            }
        }
        r
    }
}

// ---------------------------------------------------------------------------
// Adapted processes
// ---------------------------------------------------------------------------

/// A process adapted to a filtration: one value per atom of `P_n` at each
/// level `n`, so measurability holds by construction. Immutable after
/// construction.
#[derive(Debug, Clone)]
pub struct AdaptedProcess {
    filtration: Arc<Filtration>,
    /// `atom_values[n][a]` = value on atom `a` of `P_n`.
    atom_values: Vec<Vec<f64>>,
}

impl AdaptedProcess {
    /// Builds a process from per-atom values, checking shape and finiteness.
    pub fn from_atom_values(
        filtration: Arc<Filtration>,
        atom_values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if atom_values.len() != filtration.depth() + 1 {
            return Err(Error::InvalidParameter(format!(
                "expected {} levels of values, got {}",
                filtration.depth() + 1,
                atom_values.len()
            )));
        }
        for (n, row) in atom_values.iter().enumerate() {
            if row.len() != filtration.level(n).len() {
                return Err(Error::InvalidParameter(format!(
                    "level {n} has {} atoms but {} values were supplied",
                    filtration.level(n).len(),
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "non-finite value {v} at level {n}"
                )));
            }
        }
        Ok(Self {
            filtration,
            atom_values,
        })
    }

    /// Builds a process from per-point matrices `values[n][i]`, checking that
    /// each level is constant on its atoms (within a tolerance scaled by the
    /// value magnitude) and storing the first point's value per atom.
    pub fn from_point_values(filtration: Arc<Filtration>, values: &[Vec<f64>]) -> Result<Self> {
        if values.len() != filtration.depth() + 1 {
            return Err(Error::InvalidParameter(format!(
                "expected {} levels of values, got {}",
                filtration.depth() + 1,
                values.len()
            )));
        }
        let max_abs = values
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = MARTINGALE_TOL * max_abs.max(1.0);
        let mut atom_values = Vec::with_capacity(values.len());
        for (n, row) in values.iter().enumerate() {
            if row.len() != filtration.num_points() {
                return Err(Error::InvalidParameter(format!(
                    "level {n} has {} entries, space has {} points",
                    row.len(),
                    filtration.num_points()
                )));
            }
            let mut level_vals = Vec::with_capacity(filtration.level(n).len());
            for (a, atom) in filtration.level(n).iter().enumerate() {
                let v0 = row[atom[0]];
                if atom.iter().any(|&i| (row[i] - v0).abs() > tol) {
                    return Err(Error::NotMeasurable(format!(
                        "level {n} values are not constant on atom {a}"
                    )));
                }
                level_vals.push(v0);
            }
            atom_values.push(level_vals);
        }
        Self::from_atom_values(filtration, atom_values)
    }

    /// The zero process.
    pub fn zero(filtration: Arc<Filtration>) -> Self {
        let atom_values = (0..=filtration.depth())
            .map(|n| vec![0.0; filtration.level(n).len()])
            .collect();
        Self {
            filtration,
            atom_values,
        }
    }

    /// A random nonnegative adapted process: level 0 is 0, and each later
    /// per-atom value is `scale · |z|` with `z` standard normal from the
    /// ChaCha8 generator for `(seed, stream)`.
    pub fn random_nonnegative(
        filtration: Arc<Filtration>,
        seed: u64,
        stream: u64,
        scale: f64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut atom_values = vec![vec![0.0; 1]];
        for n in 1..=filtration.depth() {
            let row: Vec<f64> = (0..filtration.level(n).len())
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    scale * z.abs()
                })
                .collect();
            atom_values.push(row);
        }
        Self {
            filtration,
            atom_values,
        }
    }

    /// The filtration this process is adapted to.
    pub fn filtration(&self) -> &Arc<Filtration> {
        &self.filtration
    }

    /// Final level index `N`.
    pub fn depth(&self) -> usize {
        self.filtration.depth()
    }

    /// Value on atom `a` of `P_n`.
    pub fn atom_value(&self, n: usize, a: usize) -> f64 {
        self.atom_values[n][a]
    }

    /// Per-atom values at level `n`.
    pub fn atom_values(&self, n: usize) -> &[f64] {
        &self.atom_values[n]
    }

    /// Value at point `i`, level `n`.
    pub fn value(&self, n: usize, i: usize) -> f64 {
        self.atom_values[n][self.filtration.atom_of(n, i)]
    }

    /// Level `n` expanded to a per-point vector.
    pub fn point_values(&self, n: usize) -> Vec<f64> {
        (0..self.filtration.num_points())
            .map(|i| self.value(n, i))
            .collect()
    }

    /// All levels expanded to per-point matrices.
    pub fn point_matrix(&self) -> Vec<Vec<f64>> {
        (0..=self.depth()).map(|n| self.point_values(n)).collect()
    }

    /// Largest absolute value over all levels.
    pub fn max_abs(&self) -> f64 {
        self.atom_values
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

// ---------------------------------------------------------------------------
// Martingales
// ---------------------------------------------------------------------------

/// A martingale: an adapted process with `f_0 = 0` and `E_n f_{n+1} = f_n`
/// (validated to `MARTINGALE_TOL`, scaled by the value magnitude).
#[derive(Debug, Clone)]
pub struct Martingale {
    process: AdaptedProcess,
}

impl Martingale {
    /// Validates the martingale property of an adapted process.
    pub fn new(process: AdaptedProcess) -> Result<Self> {
        let tol = MARTINGALE_TOL * process.max_abs().max(1.0);
        if process.atom_value(0, 0).abs() > tol {
            return Err(Error::NotMartingale(format!(
                "f_0 = {} but a martingale must start at 0",
                process.atom_value(0, 0)
            )));
        }
        let filt = process.filtration();
        for n in 0..process.depth() {
            // E_n f_{n+1}, accumulated over the children of each level-n atom.
            let mut acc = vec![0.0; filt.level(n).len()];
            for c in 0..filt.level(n + 1).len() {
                acc[filt.parent_atom(n + 1, c)] +=
                    process.atom_value(n + 1, c) * filt.atom_prob(n + 1, c);
            }
            for (a, sum) in acc.into_iter().enumerate() {
                let mean = sum / filt.atom_prob(n, a);
                if (mean - process.atom_value(n, a)).abs() > tol {
                    return Err(Error::NotMartingale(format!(
                        "E_{n} f_{} = {mean} differs from f_{n} = {} on atom {a}",
                        n + 1,
                        process.atom_value(n, a)
                    )));
                }
            }
        }
        Ok(Self { process })
    }

    /// Builds and validates a martingale from per-point matrices.
    pub fn from_point_values(filtration: Arc<Filtration>, values: &[Vec<f64>]) -> Result<Self> {
        Self::new(AdaptedProcess::from_point_values(filtration, values)?)
    }

    /// The martingale `f_n = E_n(g - E g)` generated by a terminal point
    /// function `g`; centering makes `f_0 = 0`.
    pub fn from_terminal(filtration: Arc<Filtration>, g: &[f64]) -> Result<Self> {
        if g.len() != filtration.num_points() {
            return Err(Error::InvalidParameter(format!(
                "terminal function has {} entries, space has {} points",
                g.len(),
                filtration.num_points()
            )));
        }
        if let Some(v) = g.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite terminal value {v}"
            )));
        }
        let mean = filtration.space().expectation(g);
        let centered: Vec<f64> = g.iter().map(|v| v - mean).collect();
        let mut atom_values = Vec::with_capacity(filtration.depth() + 1);
        for n in 0..=filtration.depth() {
            atom_values.push(filtration.conditional_expectation_atoms(&centered, n)?);
        }
        Self::new(AdaptedProcess::from_atom_values(filtration, atom_values)?)
    }

    /// The zero martingale.
    pub fn zero(filtration: Arc<Filtration>) -> Self {
        Self {
            process: AdaptedProcess::zero(filtration),
        }
    }

    /// A random martingale: differences are drawn per parent atom as
    /// `scale · z` (standard normal, ChaCha8 for `(seed, stream)`) on each
    /// child and then re-centered so that the conditional mean over the
    /// parent vanishes. Deterministic in `(seed, stream)`; `scale = 0`
    /// produces the zero martingale exactly.
    pub fn random_stream(
        filtration: &Arc<Filtration>,
        seed: u64,
        stream: u64,
        scale: f64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let filt = filtration;
        let mut atom_values: Vec<Vec<f64>> = vec![vec![0.0]];
        for n in 1..=filt.depth() {
            let level = filt.level(n);
            // Raw draws per child atom.
            let raw: Vec<f64> = (0..level.len())
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    scale * z
                })
                .collect();
            // Conditional mean of the raw draws over each parent atom.
            let n_parents = filt.level(n - 1).len();
            let mut mean = vec![0.0; n_parents];
            for (c, &u) in raw.iter().enumerate() {
                mean[filt.parent_atom(n, c)] += u * filt.atom_prob(n, c);
            }
            for (pa, m) in mean.iter_mut().enumerate() {
                *m /= filt.atom_prob(n - 1, pa);
            }
            // f_n = f_{n-1} + (u - E_{n-1} u) on each child.
            let row: Vec<f64> = raw
                .iter()
                .enumerate()
                .map(|(c, &u)| {
                    let pa = filt.parent_atom(n, c);
                    atom_values[n - 1][pa] + (u - mean[pa])
                })
                .collect();
            atom_values.push(row);
        }
        Self {
            process: AdaptedProcess {
                filtration: Arc::clone(filtration),
                atom_values,
            },
        }
    }

    /// [`Martingale::random_stream`] on stream 0.
    pub fn random(filtration: &Arc<Filtration>, seed: u64, scale: f64) -> Self {
        Self::random_stream(filtration, seed, 0, scale)
    }

    /// The underlying adapted process.
    pub fn process(&self) -> &AdaptedProcess {
        &self.process
    }

    /// The filtration this martingale lives on.
    pub fn filtration(&self) -> &Arc<Filtration> {
        self.process.filtration()
    }

    /// Final level index `N`.
    pub fn depth(&self) -> usize {
        self.process.depth()
    }

    /// Value at point `i`, level `n`.
    pub fn value(&self, n: usize, i: usize) -> f64 {
        self.process.value(n, i)
    }

    /// Level `n` as a per-point vector.
    pub fn point_values(&self, n: usize) -> Vec<f64> {
        self.process.point_values(n)
    }

    /// Terminal level `f_N` as a per-point vector.
    pub fn terminal_values(&self) -> Vec<f64> {
        self.process.point_values(self.depth())
    }

    /// Martingale difference `d_n f = f_n - f_{n-1}` (`1 ≤ n ≤ N`) per point.
    pub fn difference(&self, n: usize) -> Vec<f64> {
        (0..self.filtration().num_points())
            .map(|i| self.value(n, i) - self.value(n - 1, i))
            .collect()
    }

    /// Pointwise sum; both martingales must share the filtration.
    pub fn add(&self, other: &Martingale) -> Result<Martingale> {
        self.combine(other, |a, b| a + b)
    }

    /// Pointwise difference; both martingales must share the filtration.
    pub fn sub(&self, other: &Martingale) -> Result<Martingale> {
        self.combine(other, |a, b| a - b)
    }

    fn combine(&self, other: &Martingale, op: impl Fn(f64, f64) -> f64) -> Result<Martingale> {
        if !self.filtration().same_as(other.filtration()) {
            return Err(Error::FiltrationMismatch(
                "martingales live on different filtrations".into(),
            ));
        }
        let atom_values = self
            .process
            .atom_values
            .iter()
            .zip(&other.process.atom_values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| op(*x, *y)).collect())
            .collect();
        Ok(Martingale {
            process: AdaptedProcess {
                filtration: Arc::clone(self.filtration()),
                atom_values,
            },
        })
    }

    /// Scalar multiple.
    pub fn scale(&self, c: f64) -> Martingale {
        let atom_values = self
            .process
            .atom_values
            .iter()
            .map(|row| row.iter().map(|v| c * v).collect())
            .collect();
        Martingale {
            process: AdaptedProcess {
                filtration: Arc::clone(self.filtration()),
                atom_values,
            },
        }
    }

    /// The stopped martingale `f^τ_n = f_{τ ∧ n}`.
    ///
    /// Optional stopping keeps both the martingale property and adaptedness,
    /// so the result validates exactly (values are copies of existing ones).
    pub fn stopped(&self, tau: &StoppingTime) -> Result<Martingale> {
        if !self.filtration().same_as(tau.filtration()) {
            return Err(Error::FiltrationMismatch(
                "stopping time lives on a different filtration".into(),
            ));
        }
        let filt = self.filtration();
        let n_points = filt.num_points();
        let mut values = Vec::with_capacity(self.depth() + 1);
        for n in 0..=self.depth() {
            let row: Vec<f64> = (0..n_points)
                .map(|i| {
                    let stop = (tau.value(i) as usize).min(n);
                    self.value(stop, i)
                })
                .collect();
            values.push(row);
        }
        Self::from_point_values(Arc::clone(filt), &values)
    }

    /// Largest absolute value over all levels.
    pub fn max_abs(&self) -> f64 {
        self.process.max_abs()
    }

    /// True when every level is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.process
            .atom_values
            .iter()
            .all(|row| row.iter().all(|&v| v == 0.0))
    }
}

/// A random martingale over the dyadic filtration of the given depth; see
/// [`Martingale::random_stream`] for the generator contract.
pub fn random_martingale(seed: u64, depth: usize, scale: f64) -> Result<Martingale> {
    let filt = Filtration::dyadic(depth)?;
    Ok(Martingale::random(&filt, seed, scale))
}

// ---------------------------------------------------------------------------
// Stopping times
// ---------------------------------------------------------------------------

/// A stopping time: a per-point level index in `{0, …, N} ∪ {∞}`, with `∞`
/// encoded as the sentinel `N + 1`. Construction validates that `{τ ≤ n}` is
/// a union of level-`n` atoms for every `n`.
#[derive(Debug, Clone)]
pub struct StoppingTime {
    filtration: Arc<Filtration>,
    tau: Vec<u32>,
}

impl StoppingTime {
    /// Validates and wraps per-point stopping levels.
    pub fn new(filtration: Arc<Filtration>, tau: Vec<u32>) -> Result<Self> {
        if tau.len() != filtration.num_points() {
            return Err(Error::InvalidStoppingTime(format!(
                "{} values for {} points",
                tau.len(),
                filtration.num_points()
            )));
        }
        let sentinel = filtration.depth() as u32 + 1;
        if let Some(&t) = tau.iter().find(|&&t| t > sentinel) {
            return Err(Error::InvalidStoppingTime(format!(
                "value {t} exceeds the infinity sentinel {sentinel}"
            )));
        }
        for n in 0..=filtration.depth() {
            for (a, atom) in filtration.level(n).iter().enumerate() {
                let stopped = tau[atom[0]] <= n as u32;
                if atom.iter().any(|&i| (tau[i] <= n as u32) != stopped) {
                    return Err(Error::InvalidStoppingTime(format!(
                        "{{τ ≤ {n}}} splits atom {a} of level {n}"
                    )));
                }
            }
        }
        Ok(Self { filtration, tau })
    }

    /// The constant stopping time `τ ≡ n`, or `τ ≡ ∞` when `n` is `None`.
    pub fn constant(filtration: Arc<Filtration>, n: Option<usize>) -> Result<Self> {
        let sentinel = filtration.depth() as u32 + 1;
        let v = match n {
            Some(n) => {
                if n > filtration.depth() {
                    return Err(Error::InvalidStoppingTime(format!(
                        "constant level {n} exceeds depth {}",
                        filtration.depth()
                    )));
                }
                n as u32
            }
            None => sentinel,
        };
        let tau = vec![v; filtration.num_points()];
        Ok(Self { filtration, tau })
    }

    /// A seeded random stopping time: sweeping levels `0, …, N`, each
    /// not-yet-stopped atom stops with probability `stop_prob`; points never
    /// stopped get the `∞` sentinel. Deterministic in `(seed, stream)`.
    pub fn random(
        filtration: Arc<Filtration>,
        seed: u64,
        stream: u64,
        stop_prob: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&stop_prob) {
            return Err(Error::InvalidParameter(format!(
                "stop probability must lie in [0, 1], got {stop_prob}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let sentinel = filtration.depth() as u32 + 1;
        let mut tau = vec![sentinel; filtration.num_points()];
        for n in 0..=filtration.depth() {
            for atom in filtration.level(n) {
                if tau[atom[0]] <= n as u32 {
                    continue;
                }
                if rng.random_bool(stop_prob) {
                    for &i in atom {
                        tau[i] = n as u32;
                    }
                }
            }
        }
        Ok(Self { filtration, tau })
    }

    /// The filtration this stopping time is defined on.
    pub fn filtration(&self) -> &Arc<Filtration> {
        &self.filtration
    }

    /// The sentinel value encoding `∞` (`N + 1`).
    pub fn infinity_sentinel(&self) -> u32 {
        self.filtration.depth() as u32 + 1
    }

    /// Stopping level at point `i` (possibly the sentinel).
    pub fn value(&self, i: usize) -> u32 {
        self.tau[i]
    }

    /// All per-point stopping levels.
    pub fn values(&self) -> &[u32] {
        &self.tau
    }

    /// True when the stopping time is finite at point `i`.
    pub fn is_finite_at(&self, i: usize) -> bool {
        self.tau[i] <= self.filtration.depth() as u32
    }

    /// The set `B_τ = {τ < ∞}` as a sorted point list.
    pub fn finite_support(&self) -> Vec<usize> {
        (0..self.tau.len())
            .filter(|&i| self.is_finite_at(i))
            .collect()
    }

    /// True when `τ ≤ σ` pointwise.
    pub fn le(&self, other: &StoppingTime) -> bool {
        self.tau.iter().zip(&other.tau).all(|(a, b)| a <= b)
    }
}

// ---------------------------------------------------------------------------
// JSON exchange format
// ---------------------------------------------------------------------------

/// On-disk form of a filtration plus named martingales:
/// `{"probs": [...], "levels": [[[pt,...],...],...], "martingales": {"name": [[...],...]}}`.
///
/// Martingale matrices are per-level per-point values; parsing validates
/// measurability and the martingale property.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltrationDocument {
    pub probs: Vec<f64>,
    pub levels: Vec<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub martingales: BTreeMap<String, Vec<Vec<f64>>>,
}

impl FiltrationDocument {
    /// Serializes a filtration and a set of named martingales.
    pub fn from_parts(
        filtration: &Filtration,
        martingales: &BTreeMap<String, Martingale>,
    ) -> Self {
        Self {
            probs: filtration.space().probs().to_vec(),
            levels: filtration.levels().to_vec(),
            martingales: martingales
                .iter()
                .map(|(name, m)| (name.clone(), m.process().point_matrix()))
                .collect(),
        }
    }

    /// Validates the document and rebuilds the filtration and martingales.
    pub fn to_parts(&self) -> Result<(Arc<Filtration>, BTreeMap<String, Martingale>)> {
        let space = ProbSpace::new(self.probs.clone())?;
        let filtration = Arc::new(Filtration::new(space, self.levels.clone())?);
        let mut martingales = BTreeMap::new();
        for (name, matrix) in &self.martingales {
            let m = Martingale::from_point_values(Arc::clone(&filtration), matrix)
                .map_err(|e| match e {
                    Error::NotMartingale(msg) => {
                        Error::NotMartingale(format!("martingale {name:?}: {msg}"))
                    }
                    Error::NotMeasurable(msg) => {
                        Error::NotMeasurable(format!("martingale {name:?}: {msg}"))
                    }
                    other => other,
                })?;
            martingales.insert(name.clone(), m);
        }
        Ok((filtration, martingales))
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
