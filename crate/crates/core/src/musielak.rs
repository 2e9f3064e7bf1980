//! Musielak–Orlicz functions `φ(x, t)` and the norms built from them.
//!
//! A Musielak–Orlicz function assigns to each sample point `x` an Orlicz-type
//! function `φ(x, ·)` on `[0, ∞)` with `φ(x, 0) = 0`, positive and
//! nondecreasing in `t`. Sets are measured by `φ(E, t) = Σ_{x ∈ E} φ(x, t)·P({x})`.
//!
//! Norm computations exploit finiteness everywhere:
//!
//! - the weak quasi-norm `inf{λ > 0 : sup_α φ({|f| > α}, α/λ) ≤ 1}` reduces
//!   the inner supremum *exactly* to the distinct nonzero values `v` of `|f|`
//!   paired with the closed level sets `{|f| ≥ v}` (valid whenever `φ(x, ·)`
//!   is continuous: on each interval between consecutive values the level set
//!   is constant and `φ` is nondecreasing in `t`, so the supremum is attained
//!   in the limit at the right endpoint). The outer infimum is a monotone
//!   one-dimensional bisection;
//! - the Luxemburg norm of an indicator solves `φ(B, 1/λ) = 1` by the same
//!   bisection;
//! - `L^q_φ` norms take the supremum over an explicit `t`-grid, except for
//!   separable `φ(x, t) = w(x)·Φ(t)` where the ratio is `t`-free and a single
//!   evaluation is exact.
//!
//! Bisections bracket by doubling/halving from a data-derived initial guess
//! and stop at relative width [`BISECTION_REL_TOL`], returning the feasible
//! (upper) end of the bracket.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::ProbSpace;

/// Relative bracket width at which norm bisections stop.
pub const BISECTION_REL_TOL: f64 = 1e-10;

/// Iteration cap for bracketing and bisection loops.
pub const BISECTION_MAX_ITER: usize = 200;

// ---------------------------------------------------------------------------
// t-grids
// ---------------------------------------------------------------------------

/// A finite grid of `t` values used where a supremum over `t ∈ (0, ∞)` must
/// be sampled (non-separable `φ` only; separable cases are exact).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    points: Vec<f64>,
}

impl TGrid {
    /// A log-uniform grid of `n` points on `[min, max]`.
    pub fn log_uniform(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min <= 0.0 || max < min || n < 2 {
            return Err(Error::InvalidParameter(format!(
                "bad t-grid: min={min}, max={max}, n={n}"
            )));
        }
        let (lmin, lmax) = (min.ln(), max.ln());
        let points = (0..n)
            .map(|i| (lmin + (lmax - lmin) * i as f64 / (n - 1) as f64).exp())
            .collect();
        Ok(Self { points })
    }

    /// Wraps explicit grid points (positive, finite, nonempty).
    pub fn explicit(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::InvalidParameter(
                "t-grid points must be positive and finite".into(),
            ));
        }
        Ok(Self { points })
    }

    /// Grid points.
    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

impl Default for TGrid {
    /// 64 log-uniform points on `[1e-4, 1e4]`.
    fn default() -> Self {
        Self::log_uniform(1e-4, 1e4, 64).expect("default grid parameters are valid")
    }
}

// ---------------------------------------------------------------------------
// Orlicz factors
// ---------------------------------------------------------------------------

/// A point-independent Orlicz-type factor `Φ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OrliczFn {
    /// `Φ(t) = t^p`, `p > 0`. Lower and upper type `p` with constant 1.
    Power { p: f64 },
    /// `Φ(t) = t^p_low + t^p_high`, `0 < p_low ≤ p_high`. Lower type `p_low`
    /// and upper type `p_high`, both with constant 1.
    PowerSum { p_low: f64, p_high: f64 },
}

impl OrliczFn {
    /// Parameter validation.
    pub fn validate(&self) -> Result<()> {
        match *self {
            OrliczFn::Power { p } => {
                if !p.is_finite() || p <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "power exponent must be positive and finite, got {p}"
                    )));
                }
            }
            OrliczFn::PowerSum { p_low, p_high } => {
                if !(p_low.is_finite() && p_high.is_finite()) || p_low <= 0.0 || p_high < p_low {
                    return Err(Error::InvalidParameter(format!(
                        "power-sum exponents must satisfy 0 < p_low ≤ p_high, got ({p_low}, {p_high})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Evaluates `Φ(t)` for `t ≥ 0`.
    pub fn eval(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        match *self {
            OrliczFn::Power { p } => t.powf(p),
            OrliczFn::PowerSum { p_low, p_high } => t.powf(p_low) + t.powf(p_high),
        }
    }

    /// `(lower type, upper type)`; both constants are 1 for these shapes.
    pub fn type_exponents(&self) -> (f64, f64) {
        match *self {
            OrliczFn::Power { p } => (p, p),
            OrliczFn::PowerSum { p_low, p_high } => (p_low, p_high),
        }
    }
}

// ---------------------------------------------------------------------------
// Musielak–Orlicz functions
// ---------------------------------------------------------------------------

/// Uniform scaling exponents and constants declared by a Musielak–Orlicz
/// function: `φ(x, s·t) ≤ c_minus · s^{p_minus} · φ(x, t)` for `s ∈ (0, 1)`
/// and `φ(x, s·t) ≤ c_plus · s^{p_plus} · φ(x, t)` for `s ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeIndices {
    pub p_minus: f64,
    pub p_plus: f64,
    pub c_minus: f64,
    pub c_plus: f64,
}

/// Evaluator signature for user-supplied Musielak–Orlicz functions.
pub type CustomEval = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum MOKind {
    /// `φ(x, t) = t^p`.
    Power { p: f64 },
    /// `φ(x, t) = Φ(t)`.
    Orlicz { phi: OrliczFn },
    /// `φ(x, t) = w(x) · Φ(t)` with a strictly positive weight vector.
    Weighted { w: Vec<f64>, phi: OrliczFn },
    /// `φ(x, t) = t^{p(x)}` with `p(x) > 0` per point.
    Variable { p: Vec<f64> },
    /// User-supplied evaluator with declared type indices.
    Custom {
        eval: CustomEval,
        indices: TypeIndices,
        continuous: bool,
    },
}

/// A Musielak–Orlicz function `φ(x, t)` over point indices `x`.
///
/// Built-in kinds are power `t^p`, a point-independent Orlicz factor `Φ(t)`,
/// weighted `w(x)·Φ(t)`, and variable-exponent `t^{p(x)}`; a custom evaluator
/// can be supplied with declared type indices and a continuity flag (the
/// level-set reduction inside the weak norm needs continuity in `t`; without
/// it a dense `α`-grid fallback is used).
#[derive(Clone)]
pub struct MOFunction {
    kind: MOKind,
}

impl fmt::Debug for MOFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            MOKind::Power { p } => write!(f, "MOFunction::power({p})"),
            MOKind::Orlicz { phi } => write!(f, "MOFunction::orlicz({phi:?})"),
            MOKind::Weighted { w, phi } => {
                write!(f, "MOFunction::weighted(|w|={}, {phi:?})", w.len())
            }
            MOKind::Variable { p } => write!(f, "MOFunction::variable(|p|={})", p.len()),
            MOKind::Custom { indices, .. } => write!(f, "MOFunction::custom({indices:?})"),
        }
    }
}

impl MOFunction {
    /// `φ(x, t) = t^p`, `p > 0`.
    pub fn power(p: f64) -> Result<Self> {
        OrliczFn::Power { p }.validate()?;
        Ok(Self {
            kind: MOKind::Power { p },
        })
    }

    /// `φ(x, t) = Φ(t)`.
    pub fn orlicz(phi: OrliczFn) -> Result<Self> {
        phi.validate()?;
        Ok(Self {
            kind: MOKind::Orlicz { phi },
        })
    }

    /// `φ(x, t) = w(x)·Φ(t)` with strictly positive finite weights.
    pub fn weighted(w: Vec<f64>, phi: OrliczFn) -> Result<Self> {
        phi.validate()?;
        if w.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        if let Some(v) = w.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weights must be positive and finite, got {v}"
            )));
        }
        Ok(Self {
            kind: MOKind::Weighted { w, phi },
        })
    }

    /// `φ(x, t) = t^{p(x)}` with positive finite exponents.
    pub fn variable(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidParameter("empty exponent vector".into()));
        }
        if let Some(v) = p.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "variable exponents must be positive and finite, got {v}"
            )));
        }
        Ok(Self {
            kind: MOKind::Variable { p },
        })
    }

    /// A custom evaluator. The caller declares the uniform type indices and
    /// whether `t ↦ φ(x, t)` is continuous; `t = 0` is hardwired to 0 and the
    /// evaluator must be positive, finite, and nondecreasing for `t > 0`
    /// (spot-checked by [`MOFunction::validate_on`]).
    pub fn custom(eval: CustomEval, indices: TypeIndices, continuous: bool) -> Result<Self> {
        if !(indices.p_minus.is_finite()
            && indices.p_plus.is_finite()
            && indices.c_minus.is_finite()
            && indices.c_plus.is_finite())
            || indices.p_minus <= 0.0
            || indices.p_plus < indices.p_minus
            || indices.c_minus < 1.0
            || indices.c_plus < 1.0
        {
            return Err(Error::InvalidParameter(format!(
                "bad type indices {indices:?}: need 0 < p_minus ≤ p_plus and constants ≥ 1"
            )));
        }
        Ok(Self {
            kind: MOKind::Custom {
                eval,
                indices,
                continuous,
            },
        })
    }

    /// Evaluates `φ(x, t)`; `t = 0` always yields 0.
    pub fn eval(&self, x: usize, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        match &self.kind {
            MOKind::Power { p } => t.powf(*p),
            MOKind::Orlicz { phi } => phi.eval(t),
            MOKind::Weighted { w, phi } => w[x] * phi.eval(t),
            MOKind::Variable { p } => t.powf(p[x]),
            MOKind::Custom { eval, .. } => eval(x, t),
        }
    }

    /// Declared uniform type indices. Built-in kinds derive them from their
    /// parameters (all with constants 1); custom kinds return the declaration.
    pub fn indices(&self) -> TypeIndices {
        match &self.kind {
            MOKind::Power { p } => TypeIndices {
                p_minus: *p,
                p_plus: *p,
                c_minus: 1.0,
                c_plus: 1.0,
            },
            MOKind::Orlicz { phi } | MOKind::Weighted { phi, .. } => {
                let (lo, hi) = phi.type_exponents();
                TypeIndices {
                    p_minus: lo,
                    p_plus: hi,
                    c_minus: 1.0,
                    c_plus: 1.0,
                }
            }
            MOKind::Variable { p } => {
                let lo = p.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = p.iter().cloned().fold(0.0, f64::max);
                TypeIndices {
                    p_minus: lo,
                    p_plus: hi,
                    c_minus: 1.0,
                    c_plus: 1.0,
                }
            }
            MOKind::Custom { indices, .. } => *indices,
        }
    }

    /// Whether `t ↦ φ(x, t)` is continuous (exact level-set reduction valid).
    pub fn continuous_in_t(&self) -> bool {
        match &self.kind {
            MOKind::Custom { continuous, .. } => *continuous,
            _ => true,
        }
    }

    /// For separable `φ(x, t) = w(x)·Φ(t)`: the weight vector (expanded to
    /// `n_points`) and the factor. `None` for variable and custom kinds.
    pub fn separable_parts(&self, n_points: usize) -> Option<(Vec<f64>, OrliczFn)> {
        match &self.kind {
            MOKind::Power { p } => Some((vec![1.0; n_points], OrliczFn::Power { p: *p })),
            MOKind::Orlicz { phi } => Some((vec![1.0; n_points], *phi)),
            MOKind::Weighted { w, phi } => Some((w.clone(), *phi)),
            MOKind::Variable { .. } | MOKind::Custom { .. } => None,
        }
    }

    /// The grid actually needed for `t`-suprema: a single point for separable
    /// kinds (the ratio is `t`-free), the full grid otherwise.
    pub fn effective_t_grid(&self, grid: &TGrid) -> Vec<f64> {
        if self.separable_parts(1).is_some() {
            vec![1.0]
        } else {
            grid.points().to_vec()
        }
    }

    /// Checks that per-point parameter vectors match the space and spot-checks
    /// the evaluator contract (`φ(x, 0) = 0`, positive, finite, nondecreasing
    /// on a `t`-grid). Built-in kinds only need the length check.
    pub fn validate_on(&self, space: &ProbSpace) -> Result<()> {
        let n = space.len();
        match &self.kind {
            MOKind::Weighted { w, .. } if w.len() != n => {
                return Err(Error::InvalidParameter(format!(
                    "weight vector has {} entries, space has {n} points",
                    w.len()
                )));
            }
            MOKind::Variable { p } if p.len() != n => {
                return Err(Error::InvalidParameter(format!(
                    "exponent vector has {} entries, space has {n} points",
                    p.len()
                )));
            }
            MOKind::Custom { .. } => {
                let grid = TGrid::default();
                for x in 0..n {
                    if self.eval(x, 0.0) != 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "custom φ({x}, 0) ≠ 0"
                        )));
                    }
                    let mut prev = 0.0;
                    for &t in grid.points() {
                        let v = self.eval(x, t);
                        if !v.is_finite() || v <= 0.0 {
                            return Err(Error::InvalidParameter(format!(
                                "custom φ({x}, {t}) = {v}; must be positive and finite"
                            )));
                        }
                        if v < prev {
                            return Err(Error::InvalidParameter(format!(
                                "custom φ({x}, ·) decreases at t = {t}"
                            )));
                        }
                        prev = v;
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `φ(E, t) = Σ_{x ∈ E} φ(x, t)·P({x})`, total in `t ≥ 0`.
    pub fn measure(&self, space: &ProbSpace, points: &[usize], t: f64) -> f64 {
        points
            .iter()
            .map(|&x| self.eval(x, t) * space.prob(x))
            .sum()
    }
}

/// `φ(E, t)` with the argument checks of the public operation contract
/// (`t` must be positive and finite; point indices in range).
pub fn phi_measure(phi: &MOFunction, space: &ProbSpace, points: &[usize], t: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "t must be positive and finite, got {t}"
        )));
    }
    phi.validate_on(space)?;
    if let Some(&x) = points.iter().find(|&&x| x >= space.len()) {
        return Err(Error::InvalidParameter(format!(
            "point index {x} out of range for a {}-point space",
            space.len()
        )));
    }
    Ok(phi.measure(space, points, t))
}

// ---------------------------------------------------------------------------
// Uniform type verification
// ---------------------------------------------------------------------------

/// Which scaling regime a type check covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeSide {
    /// `s ∈ (0, 1)`: lower type.
    Lower,
    /// `s ∈ [1, ∞)`: upper type.
    Upper,
}

/// Outcome of an empirical uniform-type check on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeReport {
    pub side: TypeSide,
    pub p: f64,
    /// Largest ratio `φ(x, s·t) / (s^p · φ(x, t))` found on the grid.
    pub best_constant: f64,
    /// The constant the function declares for this side.
    pub declared_constant: f64,
    /// Whether the declaration covers the tested exponent (lower side:
    /// `p ≤ p_minus`; upper side: `p ≥ p_plus`). When it does not, a failure
    /// is expected rather than a defect.
    pub declared_covers_p: bool,
    /// `best_constant` finite and within the declared constant (1e-9 slack).
    pub pass: bool,
    /// `(x, s, t)` attaining `best_constant`.
    pub witness: (usize, f64, f64),
}

/// Default `s`-grid for one side of a type check.
fn default_s_grid(side: TypeSide) -> Vec<f64> {
    match side {
        TypeSide::Lower => TGrid::log_uniform(1e-4, 0.99, 64)
            .expect("valid grid")
            .points()
            .to_vec(),
        TypeSide::Upper => TGrid::log_uniform(1.0, 1e4, 64)
            .expect("valid grid")
            .points()
            .to_vec(),
    }
}

/// Measures the best uniform-type constant of `φ` for exponent `p` on one
/// side, over grids of scale factors `s` and arguments `t`, and compares it
/// with the declared constant.
///
/// Pass `None` for the grids to use the defaults (`s`: 64 log-uniform points
/// on `[1e-4, 0.99]` or `[1, 1e4]`; `t`: [`TGrid::default`]).
pub fn verify_uniform_type(
    phi: &MOFunction,
    space: &ProbSpace,
    p: f64,
    side: TypeSide,
    s_grid: Option<&[f64]>,
    t_grid: Option<&TGrid>,
) -> Result<TypeReport> {
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "type exponent must be positive and finite, got {p}"
        )));
    }
    phi.validate_on(space)?;
    let default_s;
    let s_values: &[f64] = match s_grid {
        Some(g) => g,
        None => {
            default_s = default_s_grid(side);
            &default_s
        }
    };
    for &s in s_values {
        let ok = match side {
            TypeSide::Lower => s > 0.0 && s < 1.0,
            TypeSide::Upper => s >= 1.0,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "scale {s} outside the {side:?} regime"
            )));
        }
    }
    let default_t = TGrid::default();
    let t_values = t_grid.unwrap_or(&default_t).points();

    let mut best = 0.0_f64;
    let mut witness = (0usize, 1.0, 1.0);
    for x in 0..space.len() {
        for &t in t_values {
            let base = phi.eval(x, t);
            if base <= 0.0 {
                continue;
            }
            for &s in s_values {
                let ratio = phi.eval(x, s * t) / (s.powf(p) * base);
                if ratio > best {
                    best = ratio;
                    witness = (x, s, t);
                }
            }
        }
    }

    let indices = phi.indices();
    let (declared_constant, declared_covers_p) = match side {
        TypeSide::Lower => (indices.c_minus, p <= indices.p_minus),
        TypeSide::Upper => (indices.c_plus, p >= indices.p_plus),
    };
    let pass = best.is_finite() && best <= declared_constant * (1.0 + 1e-9);
    Ok(TypeReport {
        side,
        p,
        best_constant: best,
        declared_constant,
        declared_covers_p,
        pass,
        witness,
    })
}

// ---------------------------------------------------------------------------
// Bisection driver
// ---------------------------------------------------------------------------

/// Finds `inf{λ > 0 : feasible(λ)}` for a monotone feasibility predicate
/// (infeasible below, feasible above), starting the bracket hunt at `guess`.
/// Returns the feasible end of the final bracket.
fn bisect_threshold(guess: f64, feasible: impl Fn(f64) -> bool, what: &str) -> Result<f64> {
    debug_assert!(guess.is_finite() && guess > 0.0);
    let mut hi = guess;
    let mut iter = 0;
    while !feasible(hi) {
        hi *= 2.0;
        iter += 1;
        if iter > BISECTION_MAX_ITER || !hi.is_finite() {
            return Err(Error::Precondition(format!(
                "{what}: no feasible λ found while doubling (φ may violate its contract)"
            )));
        }
    }
    let mut lo = hi / 2.0;
    iter = 0;
    while feasible(lo) {
        hi = lo;
        lo /= 2.0;
        iter += 1;
        if iter > BISECTION_MAX_ITER || lo <= f64::MIN_POSITIVE {
            return Err(Error::Precondition(format!(
                "{what}: feasible for arbitrarily small λ (φ may violate its contract)"
            )));
        }
    }
    iter = 0;
    while (hi - lo) > BISECTION_REL_TOL * hi && iter < BISECTION_MAX_ITER {
        let mid = 0.5 * (hi + lo);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        iter += 1;
    }
    Ok(hi)
}

// ---------------------------------------------------------------------------
// Luxemburg norm of indicators
// ---------------------------------------------------------------------------

/// Luxemburg-type norm of an indicator: `‖1_B‖ = inf{λ > 0 : φ(B, 1/λ) ≤ 1}`,
/// with `‖1_∅‖ = 0`.
///
/// For `φ = t^p` this is `P(B)^{1/p}`; for `φ = w(x)·t` it is `∫_B w dP`
/// (both are used as test oracles for the bisection).
pub fn luxemburg_indicator_norm(
    phi: &MOFunction,
    space: &ProbSpace,
    points: &[usize],
) -> Result<f64> {
    phi.validate_on(space)?;
    if let Some(&x) = points.iter().find(|&&x| x >= space.len()) {
        return Err(Error::InvalidParameter(format!(
            "point index {x} out of range for a {}-point space",
            space.len()
        )));
    }
    if points.is_empty() {
        return Ok(0.0);
    }
    bisect_threshold(
        1.0,
        |lambda| phi.measure(space, points, 1.0 / lambda) <= 1.0,
        "luxemburg norm",
    )
}

// ---------------------------------------------------------------------------
// Weak quasi-norm and modular
// ---------------------------------------------------------------------------

/// Distinct nonzero values of `|f|` in descending order, each with the
/// point list of its closed level set `{|f| ≥ v}` as a prefix of `order`.
struct LevelSets {
    /// Point indices sorted by `|f|` descending.
    order: Vec<usize>,
    /// `(value, prefix_len)`: `{|f| ≥ value}` = `order[..prefix_len]`.
    cuts: Vec<(f64, usize)>,
}

impl LevelSets {
    fn build(f: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..f.len()).filter(|&i| f[i] != 0.0).collect();
        order.sort_by(|&a, &b| {
            f[b].abs()
                .partial_cmp(&f[a].abs())
                .expect("finite values compare")
        });
        let mut cuts = Vec::new();
        let mut idx = 0;
        while idx < order.len() {
            let v = f[order[idx]].abs();
            let mut end = idx + 1;
            while end < order.len() && f[order[end]].abs() == v {
                end += 1;
            }
            cuts.push((v, end));
            idx = end;
        }
        Self { order, cuts }
    }
}

/// `sup_α φ({|f| > α}, α/λ)` — the constraint functional inside the weak
/// quasi-norm, evaluated exactly via the level-set reduction (or an `α`-grid
/// fallback when `φ` is not continuous in `t`). `λ = 1` gives the modular.
pub fn weak_modular_at(
    phi: &MOFunction,
    space: &ProbSpace,
    f: &[f64],
    lambda: f64,
) -> Result<f64> {
    if f.len() != space.len() {
        return Err(Error::InvalidParameter(format!(
            "function has {} entries, space has {} points",
            f.len(),
            space.len()
        )));
    }
    if let Some(v) = f.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite value {v}")));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "λ must be positive and finite, got {lambda}"
        )));
    }
    phi.validate_on(space)?;
    let sets = LevelSets::build(f);
    Ok(weak_sup(phi, space, &sets, lambda))
}

/// Shared core of [`weak_modular_at`] / [`weak_norm`]; inputs pre-validated.
fn weak_sup(phi: &MOFunction, space: &ProbSpace, sets: &LevelSets, lambda: f64) -> f64 {
    let mut sup = 0.0_f64;
    if phi.continuous_in_t() {
        match phi.separable_parts(space.len()) {
            Some((w, factor)) => {
                // φ(S_v, v/λ) = Φ(v/λ) · Σ_{S_v} w·p, with the weighted sums
                // available as running prefixes.
                let mut acc = 0.0;
                let mut consumed = 0;
                for &(v, len) in &sets.cuts {
                    for &i in &sets.order[consumed..len] {
                        acc += w[i] * space.prob(i);
                    }
                    consumed = len;
                    sup = sup.max(factor.eval(v / lambda) * acc);
                }
            }
            None => {
                for &(v, len) in &sets.cuts {
                    let t = v / lambda;
                    let m: f64 = sets.order[..len]
                        .iter()
                        .map(|&i| phi.eval(i, t) * space.prob(i))
                        .sum();
                    sup = sup.max(m);
                }
            }
        }
    } else {
        // Without continuity the supremum need not be attained at the level
        // values; sample each constancy interval of the level sets densely
        // from the left of its right endpoint.
        for (j, &(v, len)) in sets.cuts.iter().enumerate() {
            let lower = if j + 1 < sets.cuts.len() {
                sets.cuts[j + 1].0
            } else {
                0.0
            };
            for k in 0..32 {
                // Log-spaced approach to v from above lower.
                let alpha = v - (v - lower) * (0.5_f64).powi(k) * 1e-3;
                let t = alpha / lambda;
                let m: f64 = sets.order[..len]
                    .iter()
                    .map(|&i| phi.eval(i, t) * space.prob(i))
                    .sum();
                sup = sup.max(m);
            }
        }
    }
    sup
}

/// The weak quasi-norm `inf{λ > 0 : sup_α φ({|f| > α}, α/λ) ≤ 1}`.
///
/// Exact up to the bisection tolerance: the returned value is the feasible
/// end of a bracket of relative width [`BISECTION_REL_TOL`], so the
/// constraint holds at `(1 + 1e-8)·‖f‖` and fails at `(1 - 1e-8)·‖f‖` for
/// nonzero `f`. For `φ = t^p` it equals `sup_α α·P(|f| > α)^{1/p}`.
pub fn weak_norm(phi: &MOFunction, space: &ProbSpace, f: &[f64]) -> Result<f64> {
    if f.len() != space.len() {
        return Err(Error::InvalidParameter(format!(
            "function has {} entries, space has {} points",
            f.len(),
            space.len()
        )));
    }
    if let Some(v) = f.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite value {v}")));
    }
    phi.validate_on(space)?;
    let sets = LevelSets::build(f);
    if sets.order.is_empty() {
        return Ok(0.0);
    }
    let guess = sets.cuts[0].0; // max |f|
    bisect_threshold(
        guess,
        |lambda| weak_sup(phi, space, &sets, lambda) <= 1.0,
        "weak norm",
    )
}

/// The weak modular `ρ_φ(f) = sup_α φ({|f| > α}, α)`.
///
/// For `φ = t^p` this equals `weak_norm(f)^p`, and for any nonzero `f` the
/// rescaled modular `sup_α φ({|f| > α}, α/‖f‖)` equals 1.
pub fn modular_rho(phi: &MOFunction, space: &ProbSpace, f: &[f64]) -> Result<f64> {
    weak_modular_at(phi, space, f, 1.0)
}

// ---------------------------------------------------------------------------
// L^q_φ norms
// ---------------------------------------------------------------------------

/// The `L^q_φ(B)` norm used in atom size conditions, `q ∈ (1, ∞]`:
///
/// - `q < ∞`: `sup_t [ φ(B, t)^{-1} · Σ_x |f(x)|^q φ(x, t) P({x}) ]^{1/q}`,
///   the sum running over the whole space. Exact (single `t`) for separable
///   `φ`; a supremum over `t_grid` otherwise.
/// - `q = ∞`: `max_x |f(x)|` over the whole space (no `B` dependence).
///
/// Errors on empty `B` with finite `q` (the normalization vanishes).
pub fn lq_phi_norm(
    phi: &MOFunction,
    space: &ProbSpace,
    f: &[f64],
    b: &[usize],
    q: f64,
    t_grid: &TGrid,
) -> Result<f64> {
    if f.len() != space.len() {
        return Err(Error::InvalidParameter(format!(
            "function has {} entries, space has {} points",
            f.len(),
            space.len()
        )));
    }
    if let Some(v) = f.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite value {v}")));
    }
    if q.is_nan() || q <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "exponent q must lie in (1, ∞], got {q}"
        )));
    }
    phi.validate_on(space)?;
    if q.is_infinite() {
        return Ok(f.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    if b.is_empty() {
        return Err(Error::InvalidParameter(
            "L^q_φ(B) with finite q needs a nonempty B".into(),
        ));
    }
    if let Some(&x) = b.iter().find(|&&x| x >= space.len()) {
        return Err(Error::InvalidParameter(format!(
            "point index {x} out of range for a {}-point space",
            space.len()
        )));
    }
    let mut best = 0.0_f64;
    for &t in &phi.effective_t_grid(t_grid) {
        let denom = phi.measure(space, b, t);
        let num: f64 = (0..space.len())
            .map(|x| f[x].abs().powf(q) * phi.eval(x, t) * space.prob(x))
            .sum();
        best = best.max((num / denom).powf(1.0 / q));
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Configuration schema
// ---------------------------------------------------------------------------

/// Serializable description of a built-in Musielak–Orlicz function:
///
/// ```json
/// {"kind": "power", "p": 0.8}
/// {"kind": "orlicz", "orlicz": {"type": "power_sum", "p_low": 0.8, "p_high": 1.4}}
/// {"kind": "weighted", "w": [1.0, 3.0], "orlicz": {"type": "power", "p": 1.0}}
/// {"kind": "variable", "p": [0.9, 1.1]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MOFunctionSpec {
    Power { p: f64 },
    Orlicz { orlicz: OrliczFn },
    Weighted { w: Vec<f64>, orlicz: OrliczFn },
    Variable { p: Vec<f64> },
}

impl MOFunctionSpec {
    /// Builds the function, validating parameters.
    pub fn build(&self) -> Result<MOFunction> {
        match self {
            MOFunctionSpec::Power { p } => MOFunction::power(*p),
            MOFunctionSpec::Orlicz { orlicz } => MOFunction::orlicz(*orlicz),
            MOFunctionSpec::Weighted { w, orlicz } => MOFunction::weighted(w.clone(), *orlicz),
            MOFunctionSpec::Variable { p } => MOFunction::variable(p.clone()),
        }
    }

    /// A short human-readable label for reports.
    pub fn label(&self) -> String {
        match self {
            MOFunctionSpec::Power { p } => format!("t^{p}"),
            MOFunctionSpec::Orlicz { orlicz } => match orlicz {
                OrliczFn::Power { p } => format!("t^{p}"),
                OrliczFn::PowerSum { p_low, p_high } => format!("t^{p_low}+t^{p_high}"),
            },
            MOFunctionSpec::Weighted { orlicz, .. } => match orlicz {
                OrliczFn::Power { p } => format!("w(x)*t^{p}"),
                OrliczFn::PowerSum { p_low, p_high } => format!("w(x)*(t^{p_low}+t^{p_high})"),
            },
            MOFunctionSpec::Variable { .. } => "t^p(x)".to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
