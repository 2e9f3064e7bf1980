//! Weight conditions on Musielak–Orlicz functions along a filtration.
//!
//! For each level `n` let `φ_n(x, t) = E_n[φ(·, t)](x)` (conditional
//! expectation in the first argument). The module measures, over all levels,
//! points, and a `t`-grid:
//!
//! - the `A_q` constant (`q ≥ 1`): the least `K` with
//!   `E_n[φ(·,t)] · (E_n[φ(·,t)^{-1/(q-1)}])^{q-1} ≤ K` (for `q = 1` the
//!   second factor degenerates to `1 / φ(·,t)` pointwise, i.e. the atom-wise
//!   essential infimum);
//! - one-step regularity of the sequence `(φ_n)`: the least `K` with
//!   `φ_{n−1} ≤ K·φ_n` (minus direction), `φ_n ≤ K·φ_{n−1}` (plus
//!   direction), or both.
//!
//! All ratios are `t`-free for separable `φ(x, t) = w(x)·Φ(t)` — conditional
//! expectation acts on `w` alone and the factor `Φ(t)` cancels — so a single
//! evaluation is exact; non-separable kinds take the maximum over the grid.
//! Measured constants are *least admissible*: they are suprema of the defining
//! ratios, so the condition holds with the returned `K` and no smaller one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::Filtration;
use crate::musielak::{MOFunction, TGrid};

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Where a measured weight constant is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightWitness {
    pub level: usize,
    pub point: usize,
    pub t: f64,
}

/// Result of an `A_q` measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AqReport {
    pub q: f64,
    /// Least admissible constant (always ≥ 1).
    pub constant: f64,
    pub witness: WeightWitness,
}

/// Which one-step comparisons of `(φ_n)` a regularity check covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SConditionVariant {
    /// `φ_{n−1} ≤ K·φ_n`.
    Minus,
    /// `φ_n ≤ K·φ_{n−1}`.
    Plus,
    /// Both directions.
    Both,
}

/// Result of a one-step regularity measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SConditionReport {
    pub variant: SConditionVariant,
    /// Least admissible constant (always ≥ 1).
    pub constant: f64,
    pub witness: WeightWitness,
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

/// Per-point values `φ(x, t)` without probability factors.
fn phi_point_values(phi: &MOFunction, n_points: usize, t: f64) -> Vec<f64> {
    (0..n_points).map(|x| phi.eval(x, t)).collect()
}

/// Measures the least `A_q` constant of `φ` along the filtration, `q ≥ 1`.
pub fn check_aq(
    phi: &MOFunction,
    filt: &Filtration,
    q: f64,
    t_grid: &TGrid,
) -> Result<AqReport> {
    if !q.is_finite() || q < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "A_q needs a finite q ≥ 1, got {q}"
        )));
    }
    phi.validate_on(filt.space())?;
    let points = filt.num_points();
    let mut best = 0.0_f64;
    let mut witness = WeightWitness {
        level: 0,
        point: 0,
        t: 1.0,
    };
    for &t in &phi.effective_t_grid(t_grid) {
        let vals = phi_point_values(phi, points, t);
        for n in 0..=filt.depth() {
            let mean = filt.conditional_expectation(&vals, n)?;
            let cand: Vec<f64> = if q == 1.0 {
                // A_1: E_n φ ≤ K·φ pointwise.
                (0..points).map(|x| mean[x] / vals[x]).collect()
            } else {
                let r = 1.0 / (q - 1.0);
                let inv: Vec<f64> = vals.iter().map(|v| v.powf(-r)).collect();
                let inv_mean = filt.conditional_expectation(&inv, n)?;
                (0..points)
                    .map(|x| mean[x] * inv_mean[x].powf(q - 1.0))
                    .collect()
            };
            for (x, &c) in cand.iter().enumerate() {
                if c > best {
                    best = c;
                    witness = WeightWitness { level: n, point: x, t };
                }
            }
        }
    }
    Ok(AqReport {
        q,
        constant: best,
        witness,
    })
}

/// Measures the least one-step regularity constant of `(φ_n)` along the
/// filtration for the requested variant.
pub fn check_s_condition(
    phi: &MOFunction,
    filt: &Filtration,
    variant: SConditionVariant,
    t_grid: &TGrid,
) -> Result<SConditionReport> {
    phi.validate_on(filt.space())?;
    let points = filt.num_points();
    let mut best = 0.0_f64;
    let mut witness = WeightWitness {
        level: 1,
        point: 0,
        t: 1.0,
    };
    for &t in &phi.effective_t_grid(t_grid) {
        let vals = phi_point_values(phi, points, t);
        let mut prev = filt.conditional_expectation(&vals, 0)?;
        for n in 1..=filt.depth() {
            let cur = filt.conditional_expectation(&vals, n)?;
            for x in 0..points {
                let ratio = match variant {
                    SConditionVariant::Minus => prev[x] / cur[x],
                    SConditionVariant::Plus => cur[x] / prev[x],
                    SConditionVariant::Both => (prev[x] / cur[x]).max(cur[x] / prev[x]),
                };
                if ratio > best {
                    best = ratio;
                    witness = WeightWitness { level: n, point: x, t };
                }
            }
            prev = cur;
        }
    }
    Ok(SConditionReport {
        variant,
        constant: best,
        witness,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{Filtration, ProbSpace};
    use crate::musielak::OrliczFn;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!(
            (a - b).abs() <= tol * b.abs().max(1.0),
            "{what}: {a} vs {b}"
        );
    }

    #[test]
    fn a2_two_point_example() {
        // Two uniform points, φ(x, t) = w(x)·t, w = (1, 3): at the root
        // E φ = 2t and E(1/φ) = (2/3)/t, so the A_2 constant is 4/3; the
        // leaf level contributes 1.
        let filt = Filtration::dyadic(1).unwrap();
        let phi = MOFunction::weighted(vec![1.0, 3.0], OrliczFn::Power { p: 1.0 }).unwrap();
        let rep = check_aq(&phi, &filt, 2.0, &TGrid::default()).unwrap();
        assert_close(rep.constant, 4.0 / 3.0, 1e-12, "A_2 of w = (1, 3)");
        assert_eq!(rep.witness.level, 0);
    }

    #[test]
    fn s_condition_two_point_example() {
        // Same weight: φ_0 = 2t, φ_1 ∈ {t, 3t}. Minus direction max is 2,
        // plus direction max is 3/2, both is 2.
        let filt = Filtration::dyadic(1).unwrap();
        let phi = MOFunction::weighted(vec![1.0, 3.0], OrliczFn::Power { p: 1.0 }).unwrap();
        let grid = TGrid::default();
        let minus = check_s_condition(&phi, &filt, SConditionVariant::Minus, &grid).unwrap();
        assert_close(minus.constant, 2.0, 1e-12, "minus direction");
        let plus = check_s_condition(&phi, &filt, SConditionVariant::Plus, &grid).unwrap();
        assert_close(plus.constant, 1.5, 1e-12, "plus direction");
        let both = check_s_condition(&phi, &filt, SConditionVariant::Both, &grid).unwrap();
        assert_close(both.constant, 2.0, 1e-12, "both directions");
    }

    #[test]
    fn point_independent_phi_has_unit_constants() {
        let filt = Filtration::dyadic(3).unwrap();
        let grid = TGrid::default();
        for phi in [
            MOFunction::power(0.8).unwrap(),
            MOFunction::orlicz(OrliczFn::PowerSum {
                p_low: 0.9,
                p_high: 2.0,
            })
            .unwrap(),
        ] {
            for q in [1.0, 2.0, 5.0] {
                let rep = check_aq(&phi, &filt, q, &grid).unwrap();
                assert_close(rep.constant, 1.0, 1e-12, "A_q of x-independent φ");
            }
            let rep =
                check_s_condition(&phi, &filt, SConditionVariant::Both, &grid).unwrap();
            assert_close(rep.constant, 1.0, 1e-12, "regularity of x-independent φ");
        }
    }

    #[test]
    fn aq_constants_decrease_in_q_and_exceed_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let filt = Filtration::dyadic(4).unwrap();
        let grid = TGrid::default();
        for _ in 0..5 {
            let w: Vec<f64> = (0..16).map(|_| rng.random_range(0.2..5.0)).collect();
            let phi = MOFunction::weighted(w, OrliczFn::Power { p: 1.0 }).unwrap();
            let mut last = f64::INFINITY;
            for q in [1.0, 2.0, 4.0, 8.0] {
                let k = check_aq(&phi, &filt, q, &grid).unwrap().constant;
                assert!(k >= 1.0 - 1e-12, "A_q constant below 1: {k}");
                assert!(
                    k <= last * (1.0 + 1e-12),
                    "A_q constants must not increase in q: {k} after {last}"
                );
                last = k;
            }
        }
    }

    #[test]
    fn aq_matches_brute_force_on_uneven_space() {
        let space = ProbSpace::new(vec![0.5, 0.25, 0.25]).unwrap();
        let levels = vec![
            vec![vec![0, 1, 2]],
            vec![vec![0], vec![1, 2]],
            vec![vec![0], vec![1], vec![2]],
        ];
        let filt = Arc::new(Filtration::new(space.clone(), levels).unwrap());
        let w = vec![0.5, 2.0, 4.0];
        let phi = MOFunction::weighted(w.clone(), OrliczFn::Power { p: 1.0 }).unwrap();
        let q = 3.0;
        let rep = check_aq(&phi, &filt, q, &TGrid::default()).unwrap();

        // Independent direct computation over atoms.
        let r = 1.0 / (q - 1.0);
        let mut expected = 0.0_f64;
        for n in 0..=2 {
            for atom in filt.level(n) {
                let mass: f64 = atom.iter().map(|&i| space.prob(i)).sum();
                let mean: f64 = atom.iter().map(|&i| w[i] * space.prob(i)).sum::<f64>() / mass;
                let inv: f64 =
                    atom.iter().map(|&i| w[i].powf(-r) * space.prob(i)).sum::<f64>() / mass;
                expected = expected.max(mean * inv.powf(q - 1.0));
            }
        }
        assert_close(rep.constant, expected, 1e-12, "brute-force A_3");
    }

    #[test]
    fn separable_shortcut_agrees_with_explicit_grid() {
        // For separable φ the ratios are t-free, so a one-point grid and a
        // wide grid must produce identical constants.
        let filt = Filtration::dyadic(2).unwrap();
        let w = vec![1.0, 0.5, 2.0, 4.0];
        let phi = MOFunction::weighted(
            w,
            OrliczFn::PowerSum {
                p_low: 0.7,
                p_high: 1.8,
            },
        )
        .unwrap();
        let wide = TGrid::log_uniform(1e-3, 1e3, 17).unwrap();
        let narrow = TGrid::explicit(vec![1.0]).unwrap();
        for q in [1.0, 2.5] {
            let a = check_aq(&phi, &filt, q, &wide).unwrap().constant;
            let b = check_aq(&phi, &filt, q, &narrow).unwrap().constant;
            assert_eq!(a, b, "separable A_q is grid-independent");
        }
        let a = check_s_condition(&phi, &filt, SConditionVariant::Both, &wide)
            .unwrap()
            .constant;
        let b = check_s_condition(&phi, &filt, SConditionVariant::Both, &narrow)
            .unwrap()
            .constant;
        assert_eq!(a, b, "separable regularity is grid-independent");
    }

    #[test]
    fn variable_exponent_uses_the_grid() {
        // For t^{p(x)} the conditional ratios genuinely depend on t; the
        // measured constant must match a direct evaluation over the same grid.
        let filt = Filtration::dyadic(1).unwrap();
        let phi = MOFunction::variable(vec![0.8, 1.4]).unwrap();
        let grid = TGrid::log_uniform(0.1, 10.0, 9).unwrap();
        let rep = check_s_condition(&phi, &filt, SConditionVariant::Both, &grid).unwrap();
        let mut expected = 0.0_f64;
        for &t in grid.points() {
            let mean = 0.5 * (t.powf(0.8) + t.powf(1.4));
            for leaf in [t.powf(0.8), t.powf(1.4)] {
                expected = expected.max((mean / leaf).max(leaf / mean));
            }
        }
        assert_close(rep.constant, expected, 1e-12, "grid supremum");
        assert!(rep.constant > 1.0, "t-dependence forces a constant above 1");
    }

    #[test]
    fn invalid_q_is_rejected() {
        let filt = Filtration::dyadic(1).unwrap();
        let phi = MOFunction::power(1.0).unwrap();
        for q in [0.5, 0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(
                check_aq(&phi, &filt, q, &TGrid::default()).is_err(),
                "q = {q} must be rejected"
            );
        }
    }
}
