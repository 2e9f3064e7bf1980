//! Empirical verification harnesses.
//!
//! Every function here follows the same discipline: *measure the hypotheses
//! before asserting the conclusion*. Constants that a theorem takes as given
//! (regularity of the filtration, one-step weight constants, `A_q` constants,
//! type indices of `φ`) are computed from the concrete inputs and recorded in
//! the report; inequalities that hold with constant exactly 1 — or with a
//! constant computable from the measured quantities — are asserted with a
//! `1e-9` relative slack, while merely-equivalent norms are reported as
//! best/worst empirical ratios without a pass/fail judgement. Reports use
//! only ordered containers and contain no timestamps, so serializing one is
//! byte-deterministic for a fixed seed.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::atomic::{
    decompose, decomposition_norm, regular_stop_phi_ratio, size_operator, validate_atom_at,
};
use crate::error::{Error, Result};
use crate::filtration::{Filtration, Martingale, ProbSpace};
use crate::musielak::{
    modular_rho, phi_measure, weak_modular_at, weak_norm, MOFunction, TGrid,
};
use crate::operators::{
    apply_operator, check_sublinear, energy_identity, operator_process, space_norm,
    OperatorKind, SpaceKind,
};
use crate::weights::{check_aq, check_s_condition, SConditionVariant};

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

/// A deterministic family of random martingales: one batch of trials per
/// filtration, with the PRNG stream derived from `(filtration index, trial)`
/// so every martingale is reproducible in isolation.
#[derive(Debug, Clone)]
pub struct Ensemble {
    filtrations: Vec<Arc<Filtration>>,
    trials_per_filtration: usize,
    seed: u64,
    scale: f64,
}

impl Ensemble {
    /// Dyadic filtrations at the given depths.
    pub fn dyadic(depths: &[usize], trials_per_filtration: usize, seed: u64, scale: f64) -> Result<Self> {
        let filtrations = depths
            .iter()
            .map(|&d| Filtration::dyadic(d))
            .collect::<Result<Vec<_>>>()?;
        Self::custom(filtrations, trials_per_filtration, seed, scale)
    }

    /// Explicit filtrations (used to exercise non-dyadic and irregular cases).
    ///
    /// `scale = 0` is allowed and produces the all-zero ensemble, the
    /// degenerate case in which every norm vanishes.
    pub fn custom(
        filtrations: Vec<Arc<Filtration>>,
        trials_per_filtration: usize,
        seed: u64,
        scale: f64,
    ) -> Result<Self> {
        if filtrations.is_empty() || trials_per_filtration == 0 {
            return Err(Error::InvalidParameter(
                "an ensemble needs at least one filtration and one trial".into(),
            ));
        }
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "ensemble scale must be nonnegative and finite, got {scale}"
            )));
        }
        Ok(Self {
            filtrations,
            trials_per_filtration,
            seed,
            scale,
        })
    }

    /// The serializable summary embedded in reports.
    pub fn descriptor(&self) -> EnsembleDescriptor {
        EnsembleDescriptor {
            seed: self.seed,
            depths: self.filtrations.iter().map(|f| f.depth()).collect(),
            trials_per_filtration: self.trials_per_filtration,
            scale: self.scale,
        }
    }

    pub fn filtrations(&self) -> &[Arc<Filtration>] {
        &self.filtrations
    }

    pub fn trials_per_filtration(&self) -> usize {
        self.trials_per_filtration
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The trial martingale for `(filtration index, trial)`.
    pub fn martingale(&self, filt_idx: usize, trial: usize) -> Martingale {
        let stream = ((filt_idx as u64) << 32) | trial as u64;
        Martingale::random_stream(&self.filtrations[filt_idx], self.seed, stream, self.scale)
    }

    /// Worst regularity constant across the ensemble's filtrations.
    pub fn max_regularity(&self) -> f64 {
        self.filtrations
            .iter()
            .map(|f| f.regularity_constant())
            .fold(1.0, f64::max)
    }
}

/// Serializable summary of an ensemble, embedded in reports so every report
/// is reproducible from its own contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDescriptor {
    pub seed: u64,
    pub depths: Vec<usize>,
    pub trials_per_filtration: usize,
    pub scale: f64,
}

// ---------------------------------------------------------------------------
// Atomic-decomposition equivalence
// ---------------------------------------------------------------------------

/// One trial of an equivalence measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceRow {
    /// Depth of the trial's filtration.
    pub depth: usize,
    pub trial: usize,
    pub space_norm: f64,
    pub decomposition_norm: f64,
}

/// Comparison of a space norm against the quasi-norm of its canonical atomic
/// decomposition across an ensemble.
///
/// The forward direction (decomposition ≤ space norm, up to the kind's
/// constant) is a theorem and is asserted; the reverse direction is reported
/// as an empirical worst ratio per depth so growth with depth is visible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub kind: SpaceKind,
    pub phi: String,
    pub ensemble: EnsembleDescriptor,
    pub trials: usize,
    pub rows: Vec<EquivalenceRow>,
    /// Smallest `decomposition_norm / space_norm` over trials with both norms
    /// positive (empirical lower equivalence constant; 0 when no such trial).
    pub c_low: f64,
    /// Largest such ratio (empirical upper equivalence constant).
    pub c_high: f64,
    /// Forward constant per depth: 1 for the threshold-exact kinds, the
    /// measured `(C_{p⁻}·K⁻·R)^{1/p⁻}` for the lookahead kinds.
    pub forward_bound_by_depth: BTreeMap<usize, f64>,
    /// Worst `decomposition_norm / (bound · space_norm)` over all trials.
    pub forward_worst: f64,
    pub forward_pass: bool,
    /// Lookahead kinds only: worst per-scale `φ(B_{ν^k}, t)` ratio against
    /// the exceedance set, relative to the measured `K⁻·R` bound.
    pub measure_worst: Option<f64>,
    pub measure_pass: Option<bool>,
    /// Worst `space_norm / decomposition_norm` per depth (empirical).
    pub reverse_worst_by_depth: BTreeMap<usize, f64>,
    pub reverse_worst: f64,
    pub pass: bool,
}

/// Whether a kind's decomposition thresholds cut exact level sets of the
/// space-defining function (forward constant 1), as opposed to the lookahead
/// kinds whose constant involves the regularity of the filtration.
fn forward_is_exact(kind: SpaceKind) -> bool {
    matches!(
        kind,
        SpaceKind::ConditionalSquare | SpaceKind::PredictableMaximal | SpaceKind::PredictableSquare
    )
}

/// Measures space norm vs. canonical decomposition norm for one kind over an
/// ensemble, asserting the forward inequality with its per-depth constant.
pub fn verify_atomic_equivalence(
    kind: SpaceKind,
    phi: &MOFunction,
    phi_label: &str,
    ensemble: &Ensemble,
    t_grid: &TGrid,
) -> Result<EquivalenceReport> {
    let indices = phi.indices();
    let mut rows = Vec::new();
    let mut forward_bound_by_depth = BTreeMap::new();
    let mut reverse_worst_by_depth: BTreeMap<usize, f64> = BTreeMap::new();
    let mut forward_worst = 0.0_f64;
    let mut measure_worst = 0.0_f64;
    let mut c_low = f64::INFINITY;
    let mut c_high = 0.0_f64;
    let mut compared = 0usize;
    let lookahead = !forward_is_exact(kind);

    for (fi, filt) in ensemble.filtrations().iter().enumerate() {
        let depth = filt.depth();
        let bound = if lookahead {
            let k_minus = check_s_condition(phi, filt, SConditionVariant::Minus, t_grid)?.constant;
            let r = filt.regularity_constant();
            (indices.c_minus * k_minus * r).powf(1.0 / indices.p_minus)
        } else {
            1.0
        };
        forward_bound_by_depth.insert(depth, bound);
        let k_minus_r = if lookahead {
            check_s_condition(phi, filt, SConditionVariant::Minus, t_grid)?.constant
                * filt.regularity_constant()
        } else {
            0.0
        };

        for trial in 0..ensemble.trials_per_filtration() {
            let f = ensemble.martingale(fi, trial);
            let sn = space_norm(kind, phi, &f)?;
            let d = decompose(kind, &f, phi, f64::INFINITY)?;
            let dn = decomposition_norm(&d, phi, filt.space())?;
            rows.push(EquivalenceRow {
                depth,
                trial,
                space_norm: sn,
                decomposition_norm: dn,
            });
            if sn > 0.0 {
                forward_worst = forward_worst.max(dn / (bound * sn));
            }
            if sn > 0.0 && dn > 0.0 {
                let ratio = dn / sn;
                c_low = c_low.min(ratio);
                c_high = c_high.max(ratio);
                compared += 1;
            }
            if dn > 0.0 {
                let rev = sn / dn;
                let e = reverse_worst_by_depth.entry(depth).or_insert(0.0);
                *e = e.max(rev);
            }
            if lookahead {
                // Exact per-scale measure bound for the lookahead stopping
                // times: φ({ν^k < ∞}, t) ≤ K⁻·R·φ({γ_N > 2^k}, t).
                let op = size_operator(kind);
                let gamma = operator_process(op, &f)?;
                for e in d.entries() {
                    let lambda = 2.0_f64.powi(e.k);
                    let ratio = regular_stop_phi_ratio(
                        &gamma,
                        e.atom.stopping_time(),
                        lambda,
                        phi,
                        t_grid,
                    )?;
                    measure_worst = measure_worst.max(ratio / k_minus_r);
                }
            }
        }
    }

    let forward_pass = forward_worst <= 1.0 + 1e-9;
    let measure_pass = lookahead.then_some(measure_worst <= 1.0 + 1e-9);
    let reverse_worst = reverse_worst_by_depth.values().fold(0.0_f64, |a, &v| a.max(v));
    // A run with no nonzero trial (e.g. the all-zero ensemble) is trivially
    // equivalent: every norm on both sides is 0.
    if compared == 0 {
        c_low = 0.0;
        c_high = 0.0;
    }
    let two_sided_pass = compared == 0 || (c_low > 0.0 && c_high.is_finite());
    let pass = forward_pass && measure_pass.unwrap_or(true) && two_sided_pass;
    Ok(EquivalenceReport {
        kind,
        phi: phi_label.to_string(),
        ensemble: ensemble.descriptor(),
        trials: rows.len(),
        rows,
        c_low,
        c_high,
        forward_bound_by_depth,
        forward_worst,
        forward_pass,
        measure_worst: lookahead.then_some(measure_worst),
        measure_pass,
        reverse_worst_by_depth,
        reverse_worst,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Sublinear operator boundedness
// ---------------------------------------------------------------------------

/// Evidence that one sublinear operator is bounded on the atomic pieces of
/// its own space: sublinearity spot-checks, exact support confinement of
/// `T(a)` to `B_ν`, and the uniform bound `‖T(a)‖_{weak,φ} ≤ 1` for atoms
/// produced by the canonical decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub operator: OperatorKind,
    /// The space whose canonical atoms the operator is tested on.
    pub source: SpaceKind,
    pub phi: String,
    pub trials: usize,
    pub atoms_checked: usize,
    pub sublinear_pass: bool,
    /// Points where `T(a)` failed to vanish off the atom's support (exact).
    pub support_violations: usize,
    /// Worst `φ({|T(a)| > 0}, t) / φ(B_ν, t)` over atoms and grid points —
    /// the measured support-inflation constant (≤ 1 when support is confined,
    /// since `{|T(a)| > 0} ⊆ B_ν` and `φ(·, t)` is monotone in the set).
    pub support_ratio_worst: f64,
    /// Worst `‖T(a)‖_{weak,φ}` over all canonical atoms.
    pub atom_norm_worst: f64,
    /// Whether `T` is the size operator of `source`'s atoms, in which case
    /// `‖T(a)‖_{weak,φ} ≤ 1` is a theorem and is asserted; for a mismatched
    /// pair the worst norm is reported without judgement.
    pub matched_size_operator: bool,
    pub atom_norm_pass: bool,
    /// Worst atom-validity report at `q = ∞` (size margin, informational).
    pub atom_validity_failures: usize,
    /// Worst `‖T(f)‖_{weak,φ} / ‖f‖_source` over whole-martingale trials
    /// (empirical operator norm; must be finite).
    pub operator_ratio_worst: f64,
    pub pass: bool,
}

/// The space whose canonical decomposition is driven by this operator.
pub fn space_for_operator(op: OperatorKind) -> SpaceKind {
    match op {
        OperatorKind::Maximal => SpaceKind::Maximal,
        OperatorKind::Square => SpaceKind::Square,
        OperatorKind::ConditionalSquare => SpaceKind::ConditionalSquare,
    }
}

/// Verifies sublinearity and boundedness of one operator acting on the atoms
/// and martingales of one source space over an ensemble.
pub fn verify_sublinear_boundedness(
    op: OperatorKind,
    phi: &MOFunction,
    phi_label: &str,
    source: SpaceKind,
    ensemble: &Ensemble,
    t_grid: &TGrid,
) -> Result<BoundednessReport> {
    let matched = op == size_operator(source);
    let mut sublinear_pass = true;
    let mut support_violations = 0usize;
    let mut support_ratio_worst = 0.0_f64;
    let mut atom_norm_worst = 0.0_f64;
    let mut atoms_checked = 0usize;
    let mut atom_validity_failures = 0usize;
    let mut operator_ratio_worst = 0.0_f64;
    let mut trials = 0usize;

    let ts = phi.effective_t_grid(t_grid);
    for (fi, filt) in ensemble.filtrations().iter().enumerate() {
        for trial in 0..ensemble.trials_per_filtration() {
            let f = ensemble.martingale(fi, trial);
            trials += 1;
            // Sublinearity against the next trial's martingale.
            let g = ensemble.martingale(fi, trial + 1);
            let rep = check_sublinear(op, &f, &g, -1.75)?;
            sublinear_pass &= rep.pass;

            // Empirical operator norm on whole martingales.
            let tf = apply_operator(op, &f, None)?;
            let sn = space_norm(source, phi, &f)?;
            if sn > 0.0 {
                operator_ratio_worst =
                    operator_ratio_worst.max(weak_norm(phi, filt.space(), &tf)? / sn);
            }

            let d = decompose(source, &f, phi, f64::INFINITY)?;
            for e in d.entries() {
                if e.mu == 0.0 {
                    continue;
                }
                atoms_checked += 1;
                let ta = apply_operator(op, e.atom.martingale(), None)?;
                let b = e.atom.stopping_time().finite_support();
                let mut in_b = vec![false; filt.num_points()];
                for &i in &b {
                    in_b[i] = true;
                }
                for (i, &v) in ta.iter().enumerate() {
                    if !in_b[i] && v != 0.0 {
                        support_violations += 1;
                    }
                }
                let supp: Vec<usize> = (0..ta.len()).filter(|&i| ta[i] != 0.0).collect();
                if !supp.is_empty() {
                    for &t in &ts {
                        let num = phi_measure(phi, filt.space(), &supp, t)?;
                        let den = phi_measure(phi, filt.space(), &b, t)?;
                        if den > 0.0 {
                            support_ratio_worst = support_ratio_worst.max(num / den);
                        }
                    }
                }
                atom_norm_worst =
                    atom_norm_worst.max(weak_norm(phi, filt.space(), &ta)?);
                if !validate_atom_at(&e.atom, phi, f64::INFINITY, t_grid)?.pass {
                    atom_validity_failures += 1;
                }
            }
        }
    }

    let atom_norm_pass = !matched || atom_norm_worst <= 1.0 + 1e-8;
    let pass = sublinear_pass
        && support_violations == 0
        && support_ratio_worst <= 1.0 + 1e-9
        && atom_norm_pass
        && atom_validity_failures == 0
        && operator_ratio_worst.is_finite();
    Ok(BoundednessReport {
        operator: op,
        source,
        phi: phi_label.to_string(),
        trials,
        atoms_checked,
        sublinear_pass,
        support_violations,
        support_ratio_worst,
        atom_norm_worst,
        matched_size_operator: matched,
        atom_norm_pass,
        atom_validity_failures,
        operator_ratio_worst,
        pass,
    })
}

// ---------------------------------------------------------------------------
// The inequality web
// ---------------------------------------------------------------------------

/// One measured norm comparison `‖f‖_num ≤ C·‖f‖_den`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityRow {
    pub name: String,
    pub numerator: String,
    pub denominator: String,
    /// Whether the backing theorem's structural hypotheses hold here; when
    /// false the row is measured but not asserted.
    pub applicable: bool,
    pub gate_note: String,
    pub trials: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// A constant the inequality must respect exactly (when known).
    pub exact_bound: Option<f64>,
    pub pass: bool,
}

/// A strong-norm comparison in `L^p(w)` with the weight taken from `φ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrongRow {
    pub name: String,
    pub p: f64,
    pub trials: usize,
    pub max_ratio: f64,
    pub exact_bound: Option<f64>,
    pub pass: bool,
}

/// Worst pairwise ratios between the five space norms over an ensemble
/// (entry `[i][j]` bounds `norm_i / norm_j`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiveSpaceReport {
    pub labels: Vec<String>,
    pub max_ratio: Vec<Vec<f64>>,
    pub all_finite: bool,
}

/// Full report of the martingale-inequality web for one `φ` and ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityReport {
    pub phi: String,
    /// Measured hypothesis constants: regularity, A_q for the requested q,
    /// the one-step weight constants, and the type indices of `φ`.
    pub gates: BTreeMap<String, f64>,
    /// True when the hypothesis constants were measured by maximizing over a
    /// finite t-grid rather than reduced exactly (i.e. `φ` is not separable),
    /// so the gate values are grid-resolution sensitive.
    pub gates_grid_approximate: bool,
    pub regularity_budget: f64,
    pub rows: Vec<InequalityRow>,
    pub strong_rows: Vec<StrongRow>,
    /// Present when the ensemble is within the regularity budget.
    pub five_space: Option<FiveSpaceReport>,
    /// Worst relative deviation in `E[f_N²] = E[S(f)²] = E[s(f)²]`.
    pub orthogonality_worst: f64,
    pub orthogonality_pass: bool,
    pub pass: bool,
}

struct RowSpec {
    name: &'static str,
    num: SpaceKind,
    den: SpaceKind,
    /// Static statement of the structural hypothesis (for documentation).
    hypothesis: &'static str,
    /// (applicable, gate note)
    gate: fn(p_plus: f64, regularity: f64, budget: f64) -> (bool, String),
    exact_bound: Option<f64>,
}

/// Names, norm pairs, and structural hypotheses of the inequality-web rows,
/// for CLI descriptions and documentation.
pub fn inequality_row_catalog() -> Vec<(&'static str, &'static str, &'static str, &'static str)> {
    ROW_SPECS
        .iter()
        .map(|s| (s.name, s.num.label(), s.den.label(), s.hypothesis))
        .collect()
}

fn always(_: f64, _: f64, _: f64) -> (bool, String) {
    (true, "no structural hypothesis".into())
}

fn needs_upper_type_below_two(p_plus: f64, _: f64, _: f64) -> (bool, String) {
    (
        p_plus < 2.0,
        format!("requires upper type < 2, measured p_plus = {p_plus}"),
    )
}

fn needs_regularity(_: f64, regularity: f64, budget: f64) -> (bool, String) {
    (
        regularity <= budget,
        format!("requires regularity ≤ {budget}, measured {regularity}"),
    )
}

const ROW_SPECS: [RowSpec; 8] = [
    RowSpec {
        name: "square_vs_conditional_square",
        num: SpaceKind::Square,
        den: SpaceKind::ConditionalSquare,
        hypothesis: "upper type index of φ below 2",
        gate: needs_upper_type_below_two,
        exact_bound: None,
    },
    RowSpec {
        name: "maximal_vs_conditional_square",
        num: SpaceKind::Maximal,
        den: SpaceKind::ConditionalSquare,
        hypothesis: "upper type index of φ below 2",
        gate: needs_upper_type_below_two,
        exact_bound: None,
    },
    RowSpec {
        name: "maximal_vs_predictable_maximal",
        num: SpaceKind::Maximal,
        den: SpaceKind::PredictableMaximal,
        hypothesis: "none (envelope domination, constant exactly 1)",
        gate: always,
        exact_bound: Some(1.0),
    },
    RowSpec {
        name: "square_vs_predictable_square",
        num: SpaceKind::Square,
        den: SpaceKind::PredictableSquare,
        hypothesis: "none (envelope domination, constant exactly 1)",
        gate: always,
        exact_bound: Some(1.0),
    },
    RowSpec {
        name: "predictable_maximal_vs_maximal",
        num: SpaceKind::PredictableMaximal,
        den: SpaceKind::Maximal,
        hypothesis: "filtration regularity within the budget",
        gate: needs_regularity,
        exact_bound: None,
    },
    RowSpec {
        name: "predictable_square_vs_square",
        num: SpaceKind::PredictableSquare,
        den: SpaceKind::Square,
        hypothesis: "filtration regularity within the budget",
        gate: needs_regularity,
        exact_bound: None,
    },
    RowSpec {
        name: "conditional_square_vs_predictable_square",
        num: SpaceKind::ConditionalSquare,
        den: SpaceKind::PredictableSquare,
        hypothesis: "none (recorded without judgement)",
        gate: always,
        exact_bound: None,
    },
    RowSpec {
        name: "predictable_square_vs_predictable_maximal",
        num: SpaceKind::PredictableSquare,
        den: SpaceKind::PredictableMaximal,
        hypothesis: "none (recorded without judgement)",
        gate: always,
        exact_bound: None,
    },
];

/// `(Σ |g|^p w dP)^{1/p}` with the weight vector `w`.
fn strong_lp(space: &ProbSpace, w: &[f64], g: &[f64], p: f64) -> f64 {
    let total: f64 = g
        .iter()
        .enumerate()
        .map(|(i, v)| v.abs().powf(p) * w[i] * space.prob(i))
        .sum();
    total.powf(1.0 / p)
}

/// Measures the martingale-inequality web over an ensemble: the per-pair
/// weak-norm ratios with their structural gates, the `L^p(w)` strong rows,
/// the five-space pairwise matrix, and the energy identity.
///
/// `aq_gates` lists the exponents `q ≥ 1` whose `A_q` constants are measured
/// and recorded as hypothesis gates.
pub fn verify_martingale_inequalities(
    phi: &MOFunction,
    phi_label: &str,
    ensemble: &Ensemble,
    t_grid: &TGrid,
    regularity_budget: f64,
    aq_gates: &[f64],
) -> Result<InequalityReport> {
    let indices = phi.indices();
    let regularity = ensemble.max_regularity();

    // Measured hypothesis constants, maximized across the ensemble's
    // filtrations.
    let mut gates = BTreeMap::new();
    gates.insert("p_minus".to_string(), indices.p_minus);
    gates.insert("p_plus".to_string(), indices.p_plus);
    gates.insert("regularity".to_string(), regularity);
    for &q in aq_gates {
        if !q.is_finite() || q < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "A_q gates need q ≥ 1, got {q}"
            )));
        }
        let mut worst = 0.0_f64;
        for filt in ensemble.filtrations() {
            worst = worst.max(check_aq(phi, filt, q, t_grid)?.constant);
        }
        gates.insert(format!("a_{q}"), worst);
    }
    for (name, variant) in [
        ("s_minus", SConditionVariant::Minus),
        ("s_plus", SConditionVariant::Plus),
        ("s_both", SConditionVariant::Both),
    ] {
        let mut worst = 0.0_f64;
        for filt in ensemble.filtrations() {
            worst = worst.max(check_s_condition(phi, filt, variant, t_grid)?.constant);
        }
        gates.insert(name.to_string(), worst);
    }

    // All five norms for every trial, computed once.
    let mut norms: Vec<BTreeMap<&'static str, f64>> = Vec::new();
    let mut terminal_rows: Vec<(Arc<Filtration>, Martingale)> = Vec::new();
    let mut orthogonality_worst = 0.0_f64;
    for (fi, filt) in ensemble.filtrations().iter().enumerate() {
        for trial in 0..ensemble.trials_per_filtration() {
            let f = ensemble.martingale(fi, trial);
            let mut per = BTreeMap::new();
            for kind in SpaceKind::ALL {
                per.insert(kind.label(), space_norm(kind, phi, &f)?);
            }
            norms.push(per);
            let (ef, es, ecs) = energy_identity(&f)?;
            let scale = ef.abs().max(1e-30);
            orthogonality_worst = orthogonality_worst
                .max((es - ef).abs() / scale)
                .max((ecs - ef).abs() / scale);
            terminal_rows.push((filt.clone(), f));
        }
    }

    // Pairwise inequality rows.
    let mut rows = Vec::new();
    for spec in &ROW_SPECS {
        let (applicable, gate_note) = (spec.gate)(indices.p_plus, regularity, regularity_budget);
        let mut max_ratio = 0.0_f64;
        let mut sum_ratio = 0.0_f64;
        let mut counted = 0usize;
        for per in &norms {
            let num = per[spec.num.label()];
            let den = per[spec.den.label()];
            if den > 0.0 {
                let r = num / den;
                max_ratio = max_ratio.max(r);
                sum_ratio += r;
                counted += 1;
            }
        }
        let mean_ratio = if counted > 0 {
            sum_ratio / counted as f64
        } else {
            0.0
        };
        let pass = if !applicable {
            true
        } else if let Some(bound) = spec.exact_bound {
            max_ratio <= bound * (1.0 + 1e-9)
        } else {
            max_ratio.is_finite()
        };
        rows.push(InequalityRow {
            name: spec.name.to_string(),
            numerator: spec.num.label().to_string(),
            denominator: spec.den.label().to_string(),
            applicable,
            gate_note,
            trials: counted,
            max_ratio,
            mean_ratio,
            exact_bound: spec.exact_bound,
            pass,
        });
    }

    // Strong-norm rows in L^p(w), with w read off a separable φ (identically
    // one otherwise). |f_N| ≤ M(f) pointwise makes the reverse maximal row
    // exact with constant 1.
    let mut strong_rows = Vec::new();
    {
        struct StrongSpec {
            name: &'static str,
            op: OperatorKind,
            ps: &'static [f64],
            /// numerator/denominator flipped: terminal over operator.
            flipped: bool,
            exact_bound: Option<f64>,
        }
        let specs = [
            StrongSpec {
                name: "strong_maximal_vs_terminal",
                op: OperatorKind::Maximal,
                ps: &[1.0, 2.0],
                flipped: false,
                exact_bound: None,
            },
            StrongSpec {
                name: "strong_square_vs_terminal",
                op: OperatorKind::Square,
                ps: &[2.0],
                flipped: false,
                exact_bound: None,
            },
            StrongSpec {
                name: "strong_conditional_square_vs_terminal",
                op: OperatorKind::ConditionalSquare,
                ps: &[1.0, 2.0],
                flipped: false,
                exact_bound: None,
            },
            StrongSpec {
                name: "strong_terminal_vs_maximal",
                op: OperatorKind::Maximal,
                ps: &[1.0, 2.0],
                flipped: true,
                exact_bound: Some(1.0),
            },
        ];
        for spec in &specs {
            for &p in spec.ps {
                let mut max_ratio = 0.0_f64;
                let mut counted = 0usize;
                for (filt, f) in &terminal_rows {
                    let w = phi
                        .separable_parts(filt.num_points())
                        .map(|(w, _)| w)
                        .unwrap_or_else(|| vec![1.0; filt.num_points()]);
                    let tf = apply_operator(spec.op, f, None)?;
                    let term = f.terminal_values();
                    let a = strong_lp(filt.space(), &w, &tf, p);
                    let b = strong_lp(filt.space(), &w, &term, p);
                    let (num, den) = if spec.flipped { (b, a) } else { (a, b) };
                    if den > 0.0 {
                        max_ratio = max_ratio.max(num / den);
                        counted += 1;
                    }
                }
                let pass = match spec.exact_bound {
                    Some(bound) => max_ratio <= bound * (1.0 + 1e-9),
                    None => max_ratio.is_finite(),
                };
                strong_rows.push(StrongRow {
                    name: format!("{}_p{}", spec.name, p),
                    p,
                    trials: counted,
                    max_ratio,
                    exact_bound: spec.exact_bound,
                    pass,
                });
            }
        }
    }

    // Five-space matrix, only within the regularity budget (outside it the
    // five norms genuinely need not be comparable).
    let five_space = if regularity <= regularity_budget {
        let labels: Vec<String> = SpaceKind::ALL.iter().map(|k| k.label().to_string()).collect();
        let mut matrix = vec![vec![0.0_f64; 5]; 5];
        for per in &norms {
            for (i, ki) in SpaceKind::ALL.iter().enumerate() {
                for (j, kj) in SpaceKind::ALL.iter().enumerate() {
                    let (a, b) = (per[ki.label()], per[kj.label()]);
                    if b > 0.0 {
                        matrix[i][j] = matrix[i][j].max(a / b);
                    }
                }
            }
        }
        let all_finite = matrix.iter().flatten().all(|v| v.is_finite());
        Some(FiveSpaceReport {
            labels,
            max_ratio: matrix,
            all_finite,
        })
    } else {
        None
    };

    let orthogonality_pass = orthogonality_worst <= 1e-9;
    let gates_grid_approximate = ensemble
        .filtrations()
        .iter()
        .any(|f| phi.separable_parts(f.num_points()).is_none());
    let pass = rows.iter().all(|r| r.pass)
        && strong_rows.iter().all(|r| r.pass)
        && five_space.as_ref().map(|f| f.all_finite).unwrap_or(true)
        && orthogonality_pass;
    Ok(InequalityReport {
        phi: phi_label.to_string(),
        gates,
        gates_grid_approximate,
        regularity_budget,
        rows,
        strong_rows,
        five_space,
        orthogonality_worst,
        orthogonality_pass,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Convergence experiments
// ---------------------------------------------------------------------------

/// Right-endpoint discretization of `x ↦ x^{-1/p}` on `(0, 1]` over `2^depth`
/// equal cells: every level value `v_i = (2^depth/i)^{1/p}` satisfies
/// `v_i^p · P(|f| ≥ v_i) = 1` exactly, so the weak `L_p` quasi-norm is 1.
pub fn inverse_power_sample(depth: usize, p: f64) -> Result<(ProbSpace, Vec<f64>)> {
    if depth == 0 || depth > 24 {
        return Err(Error::InvalidParameter(format!(
            "depth must lie in 1..=24, got {depth}"
        )));
    }
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "exponent must be positive and finite, got {p}"
        )));
    }
    let n = 1usize << depth;
    let space = ProbSpace::uniform(n)?;
    let f = (0..n)
        .map(|i| ((i + 1) as f64 / n as f64).powf(-1.0 / p))
        .collect();
    Ok((space, f))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailRow {
    pub threshold: f64,
    pub norm: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapRow {
    pub cap: f64,
    pub norm: f64,
    /// `cap · ‖1_Ω‖`, an upper bound forced by monotonicity.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarRow {
    pub c: f64,
    pub norm: f64,
    pub expected: f64,
    /// Modular of the scaled function — recorded so the norm→0 ⟺ modular→0
    /// co-trending is visible in the report.
    pub rho: f64,
    pub pass: bool,
}

/// One step of the dominated-convergence sequence `h_j = min(f, t_j)` with
/// clip level `t_j` approaching the sample's maximum: `‖f − h_j‖` equals
/// `1 − t_j/max(f)` exactly on the inverse-power sample, for every exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClipRow {
    pub level: f64,
    pub norm: f64,
    pub expected: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizationRow {
    pub phi: String,
    pub trials: usize,
    /// Worst deviation of the rescaled constraint value from 1.
    pub worst_deviation: f64,
    pub pass: bool,
}

/// Convergence behaviour of the weak quasi-norm on the inverse-power sample:
///
/// - upper truncations `f·1_{f > c}` tend to 0 pointwise but keep norm 1 —
///   dominated convergence fails in the weak space and bounded functions are
///   not dense;
/// - capped pieces `f·1_{f ≤ c}` have norm at most `c·‖1_Ω‖`, so shrinking
///   caps do converge;
/// - on the fixed finite space, clipped pieces `min(f, t_j)` converge to `f`
///   pointwise under the dominating envelope `f` itself, and the deficit norm
///   `‖f − min(f, t_j)‖ = 1 − t_j/max(f)` halves with each level — dominated
///   convergence does hold once the space is fixed, monotonically and
///   eventually below every tolerance;
/// - scalar multiples co-trend exactly by homogeneity, and their modulars
///   shrink alongside the norms (norm→0 and modular→0 are equivalent);
/// - for every built-in `φ` kind the rescaled constraint value at the norm
///   equals 1 (the normalization identity behind the norm's exactness).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub depth: usize,
    pub p: f64,
    pub base_norm: f64,
    pub base_pass: bool,
    pub tail_rows: Vec<TailRow>,
    pub cap_rows: Vec<CapRow>,
    pub clip_rows: Vec<ClipRow>,
    pub scalar_rows: Vec<ScalarRow>,
    /// Both the norms and the modulars of the scalar rows are non-increasing
    /// and end strictly below where they started.
    pub modular_cotrend_pass: bool,
    pub normalization_rows: Vec<NormalizationRow>,
    pub pass: bool,
}

/// Runs the convergence experiments at one `(depth, p)`.
///
/// `tail_thresholds` must stay below the sample's maximum value `2^{depth/p}`
/// (above it the truncation is empty and the norm collapses to 0 — that
/// regime is excluded rather than reported as a failure). `clip_halvings`
/// sets how many times the dominated-clipping deficit is halved (1..=60).
pub fn convergence_experiments(
    depth: usize,
    p: f64,
    tail_thresholds: &[f64],
    caps: &[f64],
    clip_halvings: usize,
    normalization_trials: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let (space, f) = inverse_power_sample(depth, p)?;
    let phi = MOFunction::power(p)?;
    let max_value = (1u64 << depth) as f64;
    let max_value = max_value.powf(1.0 / p);
    let base_norm = weak_norm(&phi, &space, &f)?;
    let base_pass = (base_norm - 1.0).abs() <= 1e-9;

    let mut tail_rows = Vec::new();
    for &c in tail_thresholds {
        if !(c.is_finite() && c > 0.0 && c < max_value) {
            return Err(Error::InvalidParameter(format!(
                "tail threshold {c} must lie in (0, {max_value})"
            )));
        }
        let g: Vec<f64> = f.iter().map(|&v| if v > c { v } else { 0.0 }).collect();
        let norm = weak_norm(&phi, &space, &g)?;
        tail_rows.push(TailRow {
            threshold: c,
            norm,
            pass: (norm - 1.0).abs() <= 1e-9,
        });
    }

    let lux_omega = crate::musielak::luxemburg_indicator_norm(
        &phi,
        &space,
        &(0..space.len()).collect::<Vec<_>>(),
    )?;
    let mut cap_rows = Vec::new();
    for &c in caps {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cap {c} must be positive and finite"
            )));
        }
        let g: Vec<f64> = f.iter().map(|&v| if v <= c { v } else { 0.0 }).collect();
        let norm = weak_norm(&phi, &space, &g)?;
        let bound = c * lux_omega;
        cap_rows.push(CapRow {
            cap: c,
            norm,
            bound,
            pass: norm <= bound * (1.0 + 1e-9),
        });
    }

    if clip_halvings == 0 || clip_halvings > 60 {
        return Err(Error::InvalidParameter(format!(
            "clip halvings must lie in 1..=60, got {clip_halvings}"
        )));
    }
    let mut clip_rows = Vec::new();
    for j in 1..=clip_halvings as i32 {
        let deficit = 2.0_f64.powi(-j);
        let level = max_value * (1.0 - deficit);
        let g: Vec<f64> = f.iter().map(|&v| (v - level).max(0.0)).collect();
        let norm = weak_norm(&phi, &space, &g)?;
        clip_rows.push(ClipRow {
            level,
            norm,
            expected: deficit,
            pass: (norm - deficit).abs() <= 1e-9,
        });
    }

    let mut scalar_rows = Vec::new();
    for &c in &[0.5, 0.1, 0.01, 1e-6] {
        let g: Vec<f64> = f.iter().map(|&v| c * v).collect();
        let norm = weak_norm(&phi, &space, &g)?;
        let expected = c * base_norm;
        let rho = modular_rho(&phi, &space, &g)?;
        scalar_rows.push(ScalarRow {
            c,
            norm,
            expected,
            rho,
            pass: (norm - expected).abs() <= 1e-9 * expected.max(1e-300),
        });
    }
    let modular_cotrend_pass = scalar_rows.windows(2).all(|w| {
        w[1].norm <= w[0].norm && w[1].rho <= w[0].rho
    }) && scalar_rows
        .first()
        .zip(scalar_rows.last())
        .map(|(a, b)| b.norm < a.norm && b.rho < a.rho)
        .unwrap_or(true);

    // Normalization identity across the built-in kinds on a small space.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 64usize;
    let small = ProbSpace::uniform(m)?;
    let kinds: Vec<(String, MOFunction)> = vec![
        ("t^0.8".into(), MOFunction::power(0.8)?),
        (
            "t^0.9+t^1.7".into(),
            MOFunction::orlicz(crate::musielak::OrliczFn::PowerSum {
                p_low: 0.9,
                p_high: 1.7,
            })?,
        ),
        (
            "w(x)*t^1.2".into(),
            MOFunction::weighted(
                (0..m).map(|_| rng.random_range(0.5..2.0)).collect(),
                crate::musielak::OrliczFn::Power { p: 1.2 },
            )?,
        ),
        (
            "t^p(x)".into(),
            MOFunction::variable((0..m).map(|_| rng.random_range(0.8..1.4)).collect())?,
        ),
    ];
    let mut normalization_rows = Vec::new();
    for (label, kphi) in &kinds {
        let mut worst = 0.0_f64;
        for _ in 0..normalization_trials {
            let g: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let norm = weak_norm(kphi, &small, &g)?;
            if norm == 0.0 {
                continue;
            }
            let at = weak_modular_at(kphi, &small, &g, norm)?;
            worst = worst.max((at - 1.0).abs());
        }
        normalization_rows.push(NormalizationRow {
            phi: label.clone(),
            trials: normalization_trials,
            worst_deviation: worst,
            pass: worst <= 1e-6,
        });
    }

    let pass = base_pass
        && tail_rows.iter().all(|r| r.pass)
        && cap_rows.iter().all(|r| r.pass)
        && clip_rows.iter().all(|r| r.pass)
        && scalar_rows.iter().all(|r| r.pass)
        && modular_cotrend_pass
        && normalization_rows.iter().all(|r| r.pass);
    Ok(ConvergenceReport {
        depth,
        p,
        base_norm,
        base_pass,
        tail_rows,
        cap_rows,
        clip_rows,
        scalar_rows,
        modular_cotrend_pass,
        normalization_rows,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::DEFAULT_REGULARITY_BOUND;
    use crate::musielak::OrliczFn;

    fn small_ensemble() -> Ensemble {
        Ensemble::dyadic(&[3, 4], 5, 2024, 1.0).unwrap()
    }

    #[test]
    fn equivalence_forward_is_exact_for_threshold_kinds() {
        let phi = MOFunction::power(0.8).unwrap();
        let grid = TGrid::default();
        for kind in [
            SpaceKind::ConditionalSquare,
            SpaceKind::PredictableMaximal,
            SpaceKind::PredictableSquare,
        ] {
            let rep =
                verify_atomic_equivalence(kind, &phi, "t^0.8", &small_ensemble(), &grid).unwrap();
            assert!(rep.forward_pass, "{}: {rep:?}", kind.label());
            assert!(rep.measure_worst.is_none());
            assert!(rep.reverse_worst.is_finite() && rep.reverse_worst > 0.0);
            assert!(rep
                .forward_bound_by_depth
                .values()
                .all(|&b| (b - 1.0).abs() < 1e-12));
            assert!(
                rep.c_low > 0.0 && rep.c_low <= rep.c_high && rep.c_high.is_finite(),
                "two-sided constants: [{}, {}]",
                rep.c_low,
                rep.c_high
            );
            assert_eq!(rep.ensemble.depths, vec![3, 4]);
            assert_eq!(rep.ensemble.seed, 2024);
            assert!(rep.pass);
        }
    }

    #[test]
    fn equivalence_lookahead_kinds_respect_measured_bounds() {
        let phi = MOFunction::power(1.0).unwrap();
        let grid = TGrid::default();
        for kind in [SpaceKind::Square, SpaceKind::Maximal] {
            let rep =
                verify_atomic_equivalence(kind, &phi, "t^1", &small_ensemble(), &grid).unwrap();
            assert!(rep.forward_pass, "{}: forward {}", kind.label(), rep.forward_worst);
            assert_eq!(rep.measure_pass, Some(true), "{}", kind.label());
            // Dyadic + x-independent φ: bound = (1·1·2)^{1/1} = 2.
            for &b in rep.forward_bound_by_depth.values() {
                assert!((b - 2.0).abs() < 1e-12, "bound {b}");
            }
            assert!(rep.pass);
        }
    }

    #[test]
    fn equivalence_report_is_deterministic() {
        let phi = MOFunction::power(1.0).unwrap();
        let grid = TGrid::default();
        let a = verify_atomic_equivalence(
            SpaceKind::ConditionalSquare,
            &phi,
            "t^1",
            &small_ensemble(),
            &grid,
        )
        .unwrap();
        let b = verify_atomic_equivalence(
            SpaceKind::ConditionalSquare,
            &phi,
            "t^1",
            &small_ensemble(),
            &grid,
        )
        .unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn boundedness_of_all_operators_on_atoms() {
        let phi = MOFunction::power(0.9).unwrap();
        let grid = TGrid::default();
        for op in [
            OperatorKind::Maximal,
            OperatorKind::Square,
            OperatorKind::ConditionalSquare,
        ] {
            let source = space_for_operator(op);
            let rep = verify_sublinear_boundedness(
                op,
                &phi,
                "t^0.9",
                source,
                &small_ensemble(),
                &grid,
            )
            .unwrap();
            assert!(rep.pass, "{}: {rep:?}", op.label());
            assert!(rep.atoms_checked > 0);
            assert!(rep.matched_size_operator);
            assert!(rep.atom_norm_worst <= 1.0 + 1e-8);
            assert!(
                rep.support_ratio_worst <= 1.0 + 1e-12,
                "support never inflates: {}",
                rep.support_ratio_worst
            );
            assert!(rep.operator_ratio_worst.is_finite() && rep.operator_ratio_worst > 0.0);
        }
    }

    #[test]
    fn boundedness_across_mismatched_source_reports_without_asserting() {
        // The square operator on conditional-square atoms: support is still
        // confined, but the uniform atom bound is no theorem here, so it is
        // reported rather than judged.
        let phi = MOFunction::power(1.0).unwrap();
        let rep = verify_sublinear_boundedness(
            OperatorKind::Square,
            &phi,
            "t^1",
            SpaceKind::ConditionalSquare,
            &small_ensemble(),
            &TGrid::default(),
        )
        .unwrap();
        assert!(!rep.matched_size_operator);
        assert_eq!(rep.support_violations, 0, "support confinement is exact");
        assert!(rep.atom_norm_pass, "mismatched pair is not judged");
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn zero_ensemble_is_trivially_equivalent() {
        let ens = Ensemble::dyadic(&[3], 3, 1, 0.0).unwrap();
        let phi = MOFunction::power(1.0).unwrap();
        let rep = verify_atomic_equivalence(
            SpaceKind::ConditionalSquare,
            &phi,
            "t^1",
            &ens,
            &TGrid::default(),
        )
        .unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.c_low, 0.0);
        assert_eq!(rep.c_high, 0.0);
        assert!(rep.rows.iter().all(|r| r.space_norm == 0.0));
        assert!(rep.rows.iter().all(|r| r.decomposition_norm == 0.0));
    }

    #[test]
    fn inequality_web_on_dyadic_ensemble() {
        let phi = MOFunction::power(0.8).unwrap();
        let grid = TGrid::default();
        let rep = verify_martingale_inequalities(
            &phi,
            "t^0.8",
            &small_ensemble(),
            &grid,
            DEFAULT_REGULARITY_BOUND,
            &[1.0, 2.0, 8.0],
        )
        .unwrap();
        assert!(rep.pass, "{rep:#?}");
        assert!(rep.orthogonality_pass);
        assert!(
            !rep.gates_grid_approximate,
            "separable φ has exact gate reductions"
        );
        let exact: Vec<&InequalityRow> = rep
            .rows
            .iter()
            .filter(|r| r.exact_bound == Some(1.0))
            .collect();
        assert_eq!(exact.len(), 2);
        for row in exact {
            assert!(row.max_ratio <= 1.0 + 1e-9, "{}: {}", row.name, row.max_ratio);
        }
        let five = rep.five_space.expect("within budget");
        assert!(five.all_finite);
        for i in 0..5 {
            assert!((five.max_ratio[i][i] - 1.0).abs() <= 1e-12, "diagonal is 1");
        }
        // Gates include the measured constants.
        assert_eq!(rep.gates["regularity"], 2.0);
        assert!((rep.gates["a_2"] - 1.0).abs() <= 1e-12, "x-independent φ");
        // The flipped maximal row is exact.
        assert!(rep
            .strong_rows
            .iter()
            .filter(|r| r.exact_bound == Some(1.0))
            .all(|r| r.pass && r.max_ratio <= 1.0 + 1e-9));
    }

    #[test]
    fn inequality_web_skips_gated_rows_on_irregular_filtration() {
        let space = ProbSpace::new(vec![1.0 - 1e-3, 0.5e-3, 0.5e-3]).unwrap();
        let levels = vec![
            vec![vec![0, 1, 2]],
            vec![vec![0], vec![1, 2]],
            vec![vec![0], vec![1], vec![2]],
        ];
        let filt = Arc::new(Filtration::new(space, levels).unwrap());
        let ens = Ensemble::custom(vec![filt], 4, 7, 1.0).unwrap();
        let phi = MOFunction::power(1.0).unwrap();
        let rep = verify_martingale_inequalities(
            &phi,
            "t^1",
            &ens,
            &TGrid::default(),
            DEFAULT_REGULARITY_BOUND,
            &[1.0, 2.0, 8.0],
        )
        .unwrap();
        assert!(rep.gates["regularity"] > DEFAULT_REGULARITY_BOUND);
        assert!(rep.five_space.is_none(), "matrix skipped out of budget");
        for row in &rep.rows {
            if row.name.starts_with("predictable_") && row.name.ends_with("_vs_maximal")
                || row.name == "predictable_square_vs_square"
            {
                assert!(!row.applicable, "{} must be gated off", row.name);
                assert!(row.pass, "gated rows are measured, not asserted");
            }
        }
        // The constant-1 rows hold on any filtration.
        for row in &rep.rows {
            if row.exact_bound == Some(1.0) {
                assert!(row.applicable && row.pass, "{}", row.name);
            }
        }
        assert!(rep.pass);
    }

    #[test]
    fn inequality_web_with_weighted_phi() {
        let w: Vec<f64> = (0..16).map(|i| 1.0 + (i % 4) as f64).collect();
        let phi = MOFunction::weighted(w, OrliczFn::Power { p: 0.8 }).unwrap();
        let ens = Ensemble::dyadic(&[4], 4, 11, 1.0).unwrap();
        let rep = verify_martingale_inequalities(
            &phi,
            "w*t^0.8",
            &ens,
            &TGrid::default(),
            DEFAULT_REGULARITY_BOUND,
            &[1.0, 2.0, 8.0],
        )
        .unwrap();
        assert!(rep.pass, "{rep:#?}");
        assert!(rep.gates["a_2"] > 1.0, "nontrivial weight");
        assert!(rep.gates["s_both"] > 1.0);
    }

    #[test]
    fn inequality_web_rejects_sub_one_aq_gate() {
        let phi = MOFunction::power(1.0).unwrap();
        let err = verify_martingale_inequalities(
            &phi,
            "t^1",
            &small_ensemble(),
            &TGrid::default(),
            DEFAULT_REGULARITY_BOUND,
            &[0.5],
        )
        .unwrap_err();
        assert!(err.to_string().contains("q ≥ 1"), "{err}");
    }

    #[test]
    fn inequality_web_flags_grid_sensitivity_for_variable_phi() {
        let phi = MOFunction::variable((0..16).map(|i| 1.0 + 0.02 * i as f64).collect()).unwrap();
        let ens = Ensemble::dyadic(&[4], 3, 13, 1.0).unwrap();
        let rep = verify_martingale_inequalities(
            &phi,
            "t^p(x)",
            &ens,
            &TGrid::default(),
            DEFAULT_REGULARITY_BOUND,
            &[1.0, 2.0],
        )
        .unwrap();
        assert!(
            rep.gates_grid_approximate,
            "variable exponent has no exact separable reduction"
        );
    }

    #[test]
    fn convergence_experiments_small_case() {
        let rep =
            convergence_experiments(8, 1.0, &[1.0, 10.0], &[0.5, 0.05], 12, 10, 42).unwrap();
        assert!(rep.pass, "{rep:#?}");
        assert!((rep.base_norm - 1.0).abs() <= 1e-9);
        for row in &rep.tail_rows {
            assert!(
                (row.norm - 1.0).abs() <= 1e-9,
                "tail above {} keeps norm 1, got {}",
                row.threshold,
                row.norm
            );
        }
        for row in &rep.cap_rows {
            assert!(row.norm <= row.bound * (1.0 + 1e-9));
        }
        // Clipping halves the deficit each level: 1/2, 1/4, …, exactly.
        assert_eq!(rep.clip_rows.len(), 12);
        for (j, row) in rep.clip_rows.iter().enumerate() {
            let expected = 2.0_f64.powi(-(j as i32 + 1));
            assert!(
                (row.norm - expected).abs() <= 1e-9,
                "clip level {}: {} vs {expected}",
                row.level,
                row.norm
            );
        }
        assert!(rep.modular_cotrend_pass, "norm and modular shrink together");
        assert_eq!(rep.normalization_rows.len(), 4);
        // Determinism of the whole report.
        let again =
            convergence_experiments(8, 1.0, &[1.0, 10.0], &[0.5, 0.05], 12, 10, 42).unwrap();
        assert_eq!(
            serde_json::to_string(&rep).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn convergence_rejects_out_of_range_thresholds() {
        // Depth 8, p = 1: values reach 256; thresholds at or above are
        // rejected rather than reported as failures.
        assert!(convergence_experiments(8, 1.0, &[256.0], &[], 8, 1, 0).is_err());
        assert!(convergence_experiments(8, 1.0, &[-1.0], &[], 8, 1, 0).is_err());
        assert!(convergence_experiments(8, 1.0, &[1.0], &[], 0, 1, 0).is_err());
    }

    #[test]
    fn ensemble_streams_are_independent_and_reproducible() {
        let ens = Ensemble::dyadic(&[3], 3, 5, 1.0).unwrap();
        let a = ens.martingale(0, 0);
        let b = ens.martingale(0, 1);
        assert_ne!(a.terminal_values(), b.terminal_values());
        let again = Ensemble::dyadic(&[3], 3, 5, 1.0).unwrap().martingale(0, 0);
        assert_eq!(a.terminal_values(), again.terminal_values());
    }
}
