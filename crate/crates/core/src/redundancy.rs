//! Redundancy of cut vectors.
//!
//! A cut vector `b` enters the model as `⟨1 − b, x⟩ ≤ ρ`, which is implied by
//! the rows of a set `A` whenever some convex combination of `A` lies
//! componentwise below `b`. Two tests decide this:
//!
//! * the separation LP `min 1ᵗx  s.t. ⟨a_i − b, x⟩ ≥ 1 ∀i, x ≥ 0`, which is
//!   infeasible exactly when `b` is redundant, and
//! * the hull LP over weights `λ ≥ 0, Σλ = 1, Σ λ_i a_i ≤ b`, which is
//!   feasible exactly when `b` is redundant.
//!
//! The two are Farkas alternatives of each other and are kept separate so each
//! can check the other.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{self, ConstraintSense, LpProblem, ObjectiveSense, Status, TOLERANCES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Separation LP; infeasibility means redundant.
    SeparationLp,
    /// Convex-combination LP; feasibility means redundant.
    Hull,
    /// A single member of the set lies componentwise below `b`.
    Dominance,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// `x ≥ 0` with `⟨a_i − b, x⟩ ≥ 1` for every `a_i`.
    Separator(Vec<f64>),
    /// Convex weights `λ` with `Σ λ_i a_i ≤ b`.
    Combination(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyVerdict {
    pub redundant: bool,
    pub witness: Option<Witness>,
    pub criterion: Criterion,
}

fn check_dims(b: &[f64], set: &[Vec<f64>]) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Instance("redundancy test needs a nonempty reference set".into()));
    }
    for a in set {
        if a.len() != b.len() {
            return Err(Error::Dimension { expected: b.len(), found: a.len() });
        }
    }
    Ok(())
}

/// Decides redundancy of `b` with respect to `set` by the separation LP.
pub fn is_redundant_lp(b: &[f64], set: &[Vec<f64>]) -> Result<RedundancyVerdict> {
    check_dims(b, set)?;
    let mut p = LpProblem::new("separation");
    let cols: Vec<usize> = (0..b.len()).map(|d| p.add_variable(format!("x{d}"), 0.0, None)).collect();
    for (i, a) in set.iter().enumerate() {
        p.add_constraint(
            format!("a{i}"),
            cols.iter().map(|&d| (d, a[d] - b[d])),
            ConstraintSense::Ge,
            1.0,
        );
    }
    p.set_objective(ObjectiveSense::Minimize, cols.iter().map(|&d| (d, 1.0)));
    let sol = lp::solve(&p)?;
    let verdict = match sol.status {
        Status::Infeasible => {
            RedundancyVerdict { redundant: true, witness: None, criterion: Criterion::SeparationLp }
        }
        Status::Optimal => RedundancyVerdict {
            redundant: false,
            witness: Some(Witness::Separator(sol.values)),
            criterion: Criterion::SeparationLp,
        },
        status => return Err(Error::SolverStatus { status, context: "separation LP" }),
    };
    check_verdict(b, set, &verdict)?;
    Ok(verdict)
}

/// Decides redundancy of `b` with respect to `set` by the convex-combination LP.
pub fn is_redundant_hull(b: &[f64], set: &[Vec<f64>]) -> Result<RedundancyVerdict> {
    check_dims(b, set)?;
    let mut p = LpProblem::new("hull");
    let lam: Vec<usize> = (0..set.len()).map(|i| p.add_variable(format!("l{i}"), 0.0, None)).collect();
    p.add_constraint("convex", lam.iter().map(|&i| (i, 1.0)), ConstraintSense::Eq, 1.0);
    for (d, &bd) in b.iter().enumerate() {
        p.add_constraint(format!("d{d}"), lam.iter().map(|&i| (i, set[i][d])), ConstraintSense::Le, bd);
    }
    let sol = lp::solve(&p)?;
    let verdict = match sol.status {
        Status::Optimal => {
            let mut w: Vec<f64> = sol.values.iter().map(|v| v.max(0.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            RedundancyVerdict { redundant: true, witness: Some(Witness::Combination(w)), criterion: Criterion::Hull }
        }
        Status::Infeasible => RedundancyVerdict { redundant: false, witness: None, criterion: Criterion::Hull },
        status => return Err(Error::SolverStatus { status, context: "hull LP" }),
    };
    check_verdict(b, set, &verdict)?;
    Ok(verdict)
}

/// Verifies the witness carried by `verdict`, if any, with absolute slack 1e-7.
pub fn check_verdict(b: &[f64], set: &[Vec<f64>], verdict: &RedundancyVerdict) -> Result<()> {
    let tol = TOLERANCES.comparison;
    match (&verdict.witness, verdict.redundant) {
        (None, _) => Ok(()),
        (Some(Witness::Separator(x)), false) => {
            if x.len() != b.len() || x.iter().any(|&v| v < -tol) {
                return Err(Error::Witness("separator must be a nonnegative vector".into()));
            }
            for (i, a) in set.iter().enumerate() {
                let s: f64 = a.iter().zip(b).zip(x).map(|((ai, bi), xi)| (ai - bi) * xi).sum();
                if s < 1.0 - tol {
                    return Err(Error::Witness(format!("separator gives {s} < 1 against member {i}")));
                }
            }
            Ok(())
        }
        (Some(Witness::Combination(lam)), true) => {
            if lam.len() != set.len() || lam.iter().any(|&v| v < -tol) {
                return Err(Error::Witness("weights must be nonnegative, one per member".into()));
            }
            let total: f64 = lam.iter().sum();
            if (total - 1.0).abs() > tol {
                return Err(Error::Witness(format!("weights sum to {total}")));
            }
            for (d, &bd) in b.iter().enumerate() {
                let v: f64 = set.iter().zip(lam).map(|(a, l)| l * a[d]).sum();
                if v > bd + tol {
                    return Err(Error::Witness(format!("combination exceeds b in component {d}: {v} > {bd}")));
                }
            }
            Ok(())
        }
        _ => Err(Error::Witness("witness kind does not match the verdict".into())),
    }
}

fn dominated(b: &[f64], a: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Indices of a minimal subset of `vectors` that yields the same minimum
/// `min_a ⟨a, x⟩` for every `x ≥ 0`, in lexicographic order of the vectors.
///
/// Exact duplicates keep their first occurrence. A vector is removed when it is
/// redundant with respect to the others. Whether that holds does not depend on
/// which other redundant members are still present, so the first pass tests all
/// candidates in parallel against a frozen snapshot; the sequential fixpoint
/// pass that follows confirms that the result is minimal.
pub fn reduce_indices(vectors: &[Vec<f64>]) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_by(|&i, &j| vectors[i].partial_cmp(&vectors[j]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    order.dedup_by(|j, i| vectors[*i] == vectors[*j]);
    if order.len() <= 1 {
        return Ok(order);
    }
    if let Some(&bad) = order.iter().find(|&&i| vectors[i].iter().any(|v| !v.is_finite() || *v < 0.0)) {
        return Err(Error::Instance(format!("vector {bad} is not finite and nonnegative")));
    }

    let redundant: Vec<bool> = order
        .par_iter()
        .map(|&i| -> Result<bool> {
            let b = &vectors[i];
            let others: Vec<Vec<f64>> = order.iter().filter(|&&j| j != i).map(|&j| vectors[j].clone()).collect();
            if others.iter().any(|a| dominated(b, a)) {
                return Ok(true);
            }
            Ok(is_redundant_lp(b, &others)?.redundant)
        })
        .collect::<Result<_>>()?;
    let mut kept: Vec<usize> = order.iter().zip(&redundant).filter(|(_, &r)| !r).map(|(&i, _)| i).collect();

    loop {
        let mut removed = false;
        let mut k = 0;
        while k < kept.len() && kept.len() > 1 {
            let others: Vec<Vec<f64>> = kept.iter().filter(|&&j| j != kept[k]).map(|&j| vectors[j].clone()).collect();
            if is_redundant_lp(&vectors[kept[k]], &others)?.redundant {
                kept.remove(k);
                removed = true;
            } else {
                k += 1;
            }
        }
        if !removed {
            break;
        }
    }
    Ok(kept)
}

/// Minimal subset of `vectors`, sorted lexicographically.
pub fn reduce_to_minimal(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    Ok(reduce_indices(vectors)?.into_iter().map(|i| vectors[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Columns A, B, C, AB, AC, BC.
    fn example() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            vec![1.0, 1.0, 0.0, 1.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.5, 0.5, 0.0, 0.0],
        )
    }

    #[test]
    fn average_of_two_cuts_is_redundant() {
        let (p1, p2, p3) = example();
        let set = vec![p1, p2];
        assert!(is_redundant_lp(&p3, &set).unwrap().redundant);
        let hull = is_redundant_hull(&p3, &set).unwrap();
        assert!(hull.redundant);
        match hull.witness {
            Some(Witness::Combination(l)) => {
                assert!((l[0] - 0.5).abs() < 1e-9 && (l[1] - 0.5).abs() < 1e-9, "{l:?}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn incomparable_pair_is_not_redundant() {
        let (p1, p2, _) = example();
        let v = is_redundant_lp(&p1, std::slice::from_ref(&p2)).unwrap();
        assert!(!v.redundant);
        // Unit mass on C separates: ⟨Π_2 − Π_1, e_C⟩ = 1.
        let e_c = Witness::Separator(vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let manual = RedundancyVerdict { redundant: false, witness: Some(e_c), criterion: Criterion::SeparationLp };
        check_verdict(&p1, &[p2.clone()], &manual).unwrap();
        assert!(!is_redundant_hull(&p1, &[p2]).unwrap().redundant);
    }

    #[test]
    fn trivial_cases() {
        let a = vec![0.3, 0.7, 0.0];
        assert!(is_redundant_lp(&a, &[a.clone()]).unwrap().redundant);
        let above: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let hull = is_redundant_hull(&above, &[a.clone()]).unwrap();
        assert_eq!(hull.witness, Some(Witness::Combination(vec![1.0])));
        assert!(is_redundant_lp(&above, &[a]).unwrap().redundant);
        assert!(!is_redundant_lp(&[1.0, 0.0], &[vec![0.0, 1.0]]).unwrap().redundant);
        assert!(!is_redundant_hull(&[1.0, 0.0], &[vec![0.0, 1.0]]).unwrap().redundant);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(is_redundant_lp(&[1.0], &[vec![1.0, 2.0]]), Err(Error::Dimension { .. })));
        assert!(is_redundant_hull(&[1.0], &[]).is_err());
    }

    #[test]
    fn two_chamber_rows_reduce() {
        let set = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], vec![0.5, 0.5, 1.0]];
        assert_eq!(reduce_to_minimal(&set).unwrap(), vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0]]);
        let minimal = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(reduce_to_minimal(&minimal).unwrap(), minimal);
    }

    #[test]
    fn duplicates_keep_one_copy() {
        let set = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(reduce_indices(&set).unwrap(), vec![2, 0]);
    }

    fn vector_set() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..=8).prop_flat_map(|d| {
            proptest::collection::vec(proptest::collection::vec((0u8..=4).prop_map(|v| v as f64 / 4.0), d), 2..9)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 200, rng_seed: proptest::test_runner::RngSeed::Fixed(3), ..ProptestConfig::default() })]

        #[test]
        fn tests_agree_and_witnesses_hold(set in vector_set()) {
            let (b, rest) = set.split_first().unwrap();
            let lp = is_redundant_lp(b, rest).unwrap();
            let hull = is_redundant_hull(b, rest).unwrap();
            prop_assert_eq!(lp.redundant, hull.redundant);
            check_verdict(b, rest, &lp).unwrap();
            check_verdict(b, rest, &hull).unwrap();
        }

        #[test]
        fn reduction_is_idempotent_and_preserves_minimum(
            set in vector_set(),
            xs in proptest::collection::vec(proptest::collection::vec(0.0f64..10.0, 8), 20),
        ) {
            let reduced = reduce_to_minimal(&set).unwrap();
            prop_assert_eq!(&reduce_to_minimal(&reduced).unwrap(), &reduced);
            let d = set[0].len();
            for x in &xs {
                let min = |s: &[Vec<f64>]| s.iter().map(|a| a.iter().zip(&x[..d]).map(|(p, q)| p * q).sum::<f64>()).fold(f64::INFINITY, f64::min);
                prop_assert!((min(&set) - min(&reduced)).abs() <= 1e-9);
            }
            for (k, b) in reduced.iter().enumerate() {
                if reduced.len() > 1 {
                    let others: Vec<Vec<f64>> = reduced.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v.clone()).collect();
                    prop_assert!(!is_redundant_hull(b, &others).unwrap().redundant);
                }
            }
        }
    }
}
