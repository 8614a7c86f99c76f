//! The per-tool parallelization problem, solved three ways.
//!
//! Given time `x_r` per recipe, the most time two load locks can overlap is
//! `max Σ ξ` over edges subject to `Σ_{e ∋ r} ξ_e ≤ x_r`. The same value is the
//! maximum `s`–`t` flow in the doubled graph with capacities `x_r / 2` on the
//! source and sink arcs, and `Σx` minus that value is the makespan
//! `max_k ⟨1 − Π_k, x⟩` over the cut matrix.

use std::collections::VecDeque;

use crate::cuts::{double_graph, CutMatrix};
use crate::error::{Error, Result};
use crate::lp::{self, ConstraintSense, LpProblem, ObjectiveSense, Status, TOLERANCES};
use crate::recipe::ParallelGraph;

/// Time per recipe for one tool, in canonical recipe order.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationVector(Vec<f64>);

impl AllocationVector {
    pub fn new(x: Vec<f64>, g: &ParallelGraph) -> Result<Self> {
        if x.len() != g.recipes().len() {
            return Err(Error::Dimension { expected: g.recipes().len(), found: x.len() });
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Instance(format!("allocation entries must be finite and nonnegative, got {v}")));
        }
        Ok(AllocationVector(x))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Overlap time `ξ` per edge of the parallelization graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelizationPlan {
    pub xi: Vec<f64>,
}

impl ParallelizationPlan {
    pub fn total(&self) -> f64 {
        self.xi.iter().sum()
    }

    /// Checks `ξ ≥ 0` and `Σ_{e ∋ r} ξ_e ≤ x_r + 1e-8` for each recipe.
    pub fn check(&self, x: &AllocationVector, g: &ParallelGraph) -> Result<()> {
        let tol = TOLERANCES.feasibility;
        if self.xi.len() != g.edges().len() {
            return Err(Error::Dimension { expected: g.edges().len(), found: self.xi.len() });
        }
        if self.xi.iter().any(|&v| v < -tol) {
            return Err(Error::Flow("negative overlap time".into()));
        }
        let mut load = vec![0.0; g.recipes().len()];
        for (&(a, b), &v) in g.edges().iter().zip(&self.xi) {
            load[a] += v;
            load[b] += v;
        }
        for (r, (&l, &cap)) in load.iter().zip(x.as_slice()).enumerate() {
            if l > cap + tol {
                return Err(Error::Flow(format!("recipe {} overlaps {l} > {cap}", g.recipe(r))));
            }
        }
        Ok(())
    }
}

/// A maximum flow in the source/sink augmented doubled graph.
///
/// Inner arcs follow the doubled-graph order: arcs `2e` and `2e + 1` are
/// `(r1, r̃2)` and `(r2, r̃1)` for edge `e = {r1, r2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub x: Vec<f64>,
    pub arcs: Vec<(usize, usize)>,
    /// Flow on `s → r`.
    pub eta_source: Vec<f64>,
    /// Flow on `r → r̃'`.
    pub eta_inner: Vec<f64>,
    /// Flow on `r̃ → t`.
    pub eta_sink: Vec<f64>,
    pub value: f64,
    /// Capacity of the cut read off the final residual graph.
    pub chi: f64,
}

impl FlowSolution {
    /// Conservation, capacities, and `value = chi`.
    pub fn check(&self) -> Result<()> {
        let feas = TOLERANCES.feasibility;
        let len = self.x.len();
        let all = self.eta_source.iter().chain(&self.eta_inner).chain(&self.eta_sink);
        if all.clone().any(|&v| v < -feas) {
            return Err(Error::Flow("negative arc flow".into()));
        }
        for r in 0..len {
            let cap = self.x[r] / 2.0;
            if self.eta_source[r] > cap + feas || self.eta_sink[r] > cap + feas {
                return Err(Error::Flow(format!("capacity exceeded at recipe {r}")));
            }
        }
        let mut out_left = vec![0.0; len];
        let mut in_right = vec![0.0; len];
        for (&(a, b), &f) in self.arcs.iter().zip(&self.eta_inner) {
            out_left[a] += f;
            in_right[b] += f;
        }
        for r in 0..len {
            if (out_left[r] - self.eta_source[r]).abs() > feas || (in_right[r] - self.eta_sink[r]).abs() > feas {
                return Err(Error::Flow(format!("conservation violated at recipe {r}")));
            }
        }
        let into_sink: f64 = self.eta_sink.iter().sum();
        if (into_sink - self.value).abs() > feas {
            return Err(Error::Flow("value differs from inflow into the sink".into()));
        }
        if (self.value - self.chi).abs() > TOLERANCES.comparison * self.value.abs().max(1.0) {
            return Err(Error::Flow(format!("flow {} differs from cut {}", self.value, self.chi)));
        }
        Ok(())
    }
}

/// Maximizes `Σξ` subject to `Σ_{e ∋ r} ξ_e ≤ x_r` with the LP solver.
pub fn solve_parallelization_lp(x: &AllocationVector, g: &ParallelGraph) -> Result<(ParallelizationPlan, f64)> {
    let mut p = LpProblem::new("parallelization");
    let xi: Vec<usize> = (0..g.edges().len()).map(|e| p.add_variable(format!("xi{e}"), 0.0, None)).collect();
    for (r, inc) in g.incidence().iter().enumerate() {
        if !inc.is_empty() {
            p.add_constraint(
                format!("r{r}"),
                inc.iter().map(|&e| (xi[e], 1.0)),
                ConstraintSense::Le,
                x.as_slice()[r],
            );
        }
    }
    p.set_objective(ObjectiveSense::Maximize, xi.iter().map(|&v| (v, 1.0)));
    let sol = lp::solve(&p)?;
    if sol.status != Status::Optimal {
        return Err(Error::SolverStatus { status: sol.status, context: "parallelization LP" });
    }
    let plan = ParallelizationPlan { xi: sol.values.iter().map(|v| v.max(0.0)).collect() };
    plan.check(x, g)?;
    Ok((plan, sol.objective))
}

struct Net {
    head: Vec<usize>,
    cap: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

impl Net {
    fn new(nodes: usize) -> Self {
        Net { head: Vec::new(), cap: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    /// Adds `u → v` and its reverse; returns the forward arc id.
    fn add(&mut self, u: usize, v: usize, c: f64) -> usize {
        let id = self.head.len();
        self.head.push(v);
        self.cap.push(c);
        self.adj[u].push(id);
        self.head.push(u);
        self.cap.push(0.0);
        self.adj[v].push(id + 1);
        id
    }

    fn reachable(&self, s: usize, eps: f64) -> (Vec<bool>, Vec<usize>) {
        let mut seen = vec![false; self.adj.len()];
        let mut via = vec![usize::MAX; self.adj.len()];
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.head[a];
                if !seen[v] && self.cap[a] > eps {
                    seen[v] = true;
                    via[v] = a;
                    queue.push_back(v);
                }
            }
        }
        (seen, via)
    }
}

/// Edmonds–Karp max flow on the doubled graph with capacities `x_r / 2` on the
/// boundary arcs and `Σx` on the inner arcs.
pub fn solve_maxflow(x: &AllocationVector, g: &ParallelGraph) -> Result<FlowSolution> {
    let dg = double_graph(g);
    let len = g.recipes().len();
    let xs = x.as_slice();
    let (s, t) = (2 * len, 2 * len + 1);
    let inner_cap = x.total();
    let eps = 1e-13 * inner_cap.max(1.0);

    let mut net = Net::new(2 * len + 2);
    let src: Vec<usize> = (0..len).map(|r| net.add(s, r, xs[r] / 2.0)).collect();
    let inner: Vec<usize> = dg.arcs().iter().map(|&(a, b)| net.add(a, len + b, inner_cap)).collect();
    let snk: Vec<usize> = (0..len).map(|r| net.add(len + r, t, xs[r] / 2.0)).collect();

    loop {
        let (seen, via) = net.reachable(s, eps);
        if !seen[t] {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = t;
        while v != s {
            let a = via[v];
            push = push.min(net.cap[a]);
            v = net.head[a ^ 1];
        }
        let mut v = t;
        while v != s {
            let a = via[v];
            net.cap[a] -= push;
            net.cap[a ^ 1] += push;
            v = net.head[a ^ 1];
        }
    }

    let flow = |ids: &[usize], net: &Net| ids.iter().map(|&a| net.cap[a ^ 1]).collect::<Vec<f64>>();
    let eta_source = flow(&src, &net);
    let eta_inner = flow(&inner, &net);
    let eta_sink = flow(&snk, &net);
    let value = eta_sink.iter().sum();

    // Cut capacity of the residual-reachable set.
    let (side, _) = net.reachable(s, eps);
    let mut chi = 0.0;
    for r in 0..len {
        if !side[r] {
            chi += xs[r] / 2.0;
        }
        if side[len + r] {
            chi += xs[r] / 2.0;
        }
    }
    for &(a, b) in dg.arcs() {
        if side[a] && !side[len + b] {
            chi += inner_cap;
        }
    }

    let sol = FlowSolution { x: xs.to_vec(), arcs: dg.arcs().to_vec(), eta_source, eta_inner, eta_sink, value, chi };
    sol.check()?;
    Ok(sol)
}

/// `ξ_{r1,r2} = η_{r1,r̃2} + η_{r2,r̃1}`; rejects infeasible flows.
pub fn flow_to_xi(f: &FlowSolution) -> Result<ParallelizationPlan> {
    f.check()?;
    if !f.eta_inner.len().is_multiple_of(2) {
        return Err(Error::Flow("inner arcs must come in mirrored pairs".into()));
    }
    let xi = f.eta_inner.chunks(2).map(|p| p[0] + p[1]).collect();
    Ok(ParallelizationPlan { xi })
}

/// `max_k ⟨1 − Π_k, x⟩`.
pub fn makespan_via_cuts(x: &[f64], m: &CutMatrix) -> Result<f64> {
    let total: f64 = x.iter().sum();
    Ok(total - m.min_cut_value(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::compute_cut_matrix;
    use crate::recipe::{build_parallel_graph, Recipe};

    fn alloc(g: &ParallelGraph, entries: &[(&str, f64)]) -> AllocationVector {
        let mut x = vec![0.0; g.recipes().len()];
        for &(label, v) in entries {
            x[g.index_of(Recipe::from_label(label, g.chambers()).unwrap()).unwrap()] = v;
        }
        AllocationVector::new(x, g).unwrap()
    }

    #[test]
    fn small_parallelization_values() {
        let g = build_parallel_graph(3).unwrap();
        let m = compute_cut_matrix(3, true).unwrap();
        for (entries, overlap, makespan) in [
            (vec![("A", 1.0), ("B", 1.0)], 1.0, 1.0),
            (vec![("AB", 2.0), ("C", 3.0)], 2.0, 3.0),
            (vec![("A", 3.0), ("B", 1.0), ("C", 1.0)], 2.0, 3.0),
            (vec![], 0.0, 0.0),
            (vec![("ABC", 4.0)], 0.0, 4.0),
        ] {
            let x = alloc(&g, &entries);
            let (_, obj) = solve_parallelization_lp(&x, &g).unwrap();
            assert!((obj - overlap).abs() < 1e-9, "{entries:?}: lp {obj}");
            let f = solve_maxflow(&x, &g).unwrap();
            assert!((f.value - overlap).abs() < 1e-9, "{entries:?}: flow {}", f.value);
            let ms = makespan_via_cuts(x.as_slice(), &m).unwrap();
            assert!((ms - makespan).abs() < 1e-9, "{entries:?}: makespan {ms}");
        }
    }

    #[test]
    fn boundary_arcs_saturate_for_ab_c() {
        let g = build_parallel_graph(3).unwrap();
        let x = alloc(&g, &[("AB", 2.0), ("C", 2.0)]);
        let f = solve_maxflow(&x, &g).unwrap();
        assert!((f.value - 2.0).abs() < 1e-12);
        let plan = flow_to_xi(&f).unwrap();
        let ab = g.index_of(Recipe::from_label("AB", 3).unwrap()).unwrap();
        let c = g.index_of(Recipe::from_label("C", 3).unwrap()).unwrap();
        let e = g.edges().iter().position(|&e| e == (c.min(ab), c.max(ab))).unwrap();
        assert!((plan.xi[e] - 2.0).abs() < 1e-12);
        assert!((plan.total() - 2.0).abs() < 1e-12);
        plan.check(&x, &g).unwrap();
    }

    #[test]
    fn zero_flow_gives_zero_plan() {
        let g = build_parallel_graph(2).unwrap();
        let x = AllocationVector::new(vec![0.0; 3], &g).unwrap();
        let plan = flow_to_xi(&solve_maxflow(&x, &g).unwrap()).unwrap();
        assert_eq!(plan.xi, vec![0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        let g = build_parallel_graph(2).unwrap();
        assert!(AllocationVector::new(vec![1.0], &g).is_err());
        assert!(AllocationVector::new(vec![1.0, -1.0, 0.0], &g).is_err());
        let x = AllocationVector::new(vec![1.0, 1.0, 0.0], &g).unwrap();
        let mut f = solve_maxflow(&x, &g).unwrap();
        f.eta_inner[0] += 0.25;
        assert!(flow_to_xi(&f).is_err());
        let m = compute_cut_matrix(3, true).unwrap();
        assert!(makespan_via_cuts(&[1.0, 2.0], &m).is_err());
    }

    use proptest::prelude::*;

    fn sparse_alloc(n: usize) -> impl Strategy<Value = Vec<f64>> {
        let len = (1usize << n) - 1;
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..10.0], len)
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 200, rng_seed: proptest::test_runner::RngSeed::Fixed(17), ..ProptestConfig::default() })]

        #[test]
        fn three_routes_agree(n in 2usize..=4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = build_parallel_graph(n).unwrap();
            let raw = crate::cuts::raw_cut_matrix(n, crate::cuts::DEFAULT_NODE_BUDGET).unwrap();
            let m = compute_cut_matrix(n, true).unwrap();
            let x: Vec<f64> = (0..g.recipes().len())
                .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(0.0..10.0) })
                .collect();
            let x = AllocationVector::new(x, &g).unwrap();
            let f = solve_maxflow(&x, &g).unwrap();
            let (plan, obj) = solve_parallelization_lp(&x, &g).unwrap();
            let ms = makespan_via_cuts(x.as_slice(), &m).unwrap();
            prop_assert!((obj - f.value).abs() <= 1e-6);
            prop_assert!((x.total() - f.value - ms).abs() <= 1e-6);
            prop_assert!((ms - makespan_via_cuts(x.as_slice(), &raw).unwrap()).abs() <= 1e-9);
            plan.check(&x, &g).unwrap();
            let from_flow = flow_to_xi(&f).unwrap();
            from_flow.check(&x, &g).unwrap();
            prop_assert!((from_flow.total() - f.value).abs() <= 1e-9);
        }

        #[test]
        fn makespan_is_monotone(x in sparse_alloc(3), r in 0usize..7, bump in 0.0f64..5.0) {
            let m = compute_cut_matrix(3, true).unwrap();
            let before = makespan_via_cuts(&x, &m).unwrap();
            let mut y = x.clone();
            y[r] += bump;
            prop_assert!(makespan_via_cuts(&y, &m).unwrap() >= before - 1e-12);
        }
    }
}
