//! Oracle cross-checks behind `clustercap verify`.

use std::sync::Arc;

use anyhow::Result;
use clustercap::cuts::{CutCache, CutMatrix};
use clustercap::flow::{makespan_via_cuts, solve_maxflow, solve_parallelization_lp, AllocationVector};
use clustercap::instance::Instance;
use clustercap::models::{build_model, solve_built, BuiltModel, ModelKind, SolveOptions};
use clustercap::recipe::{build_parallel_graph, ParallelGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Default)]
pub struct VerifyReport {
    pub lines: Vec<String>,
    pub failures: usize,
}

impl VerifyReport {
    fn check(&mut self, ok: bool, line: String) {
        if !ok {
            self.failures += 1;
        }
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Random sparse allocation over the recipes of `g`.
pub fn random_allocation(rng: &mut impl Rng, g: &ParallelGraph) -> Vec<f64> {
    let density = rng.gen_range(0.2..=1.0);
    g.recipes()
        .iter()
        .map(|_| if rng.gen_bool(density) { rng.gen_range(0.0..10.0) } else { 0.0 })
        .collect()
}

/// Largest disagreement between `Σx − maxflow`, the cut makespan and the
/// parallelization LP over `samples` random allocations.
pub fn triple_gap(n: usize, m: &CutMatrix, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let g = build_parallel_graph(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut cut_gap, mut lp_gap) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let x = AllocationVector::new(random_allocation(&mut rng, &g), &g)?;
        let flow = solve_maxflow(&x, &g)?;
        let (_, lp_value) = solve_parallelization_lp(&x, &g)?;
        let via_cuts = makespan_via_cuts(x.as_slice(), m)?;
        cut_gap = cut_gap.max(((x.total() - flow.value) - via_cuts).abs());
        lp_gap = lp_gap.max((lp_value - flow.value).abs());
    }
    Ok((cut_gap, lp_gap))
}

/// Per-tool aggregated recipe time of a solved recipe-level model.
fn tool_loads(model: &BuiltModel, values: &[f64], tools: usize, recipes: usize) -> Vec<Vec<f64>> {
    let mut y = vec![vec![0.0; recipes]; tools];
    for &(i, r, c) in &model.aggregates {
        y[i][r] = values[c];
    }
    y
}

pub fn verify_instance(inst: &Instance, samples: usize, seed: u64) -> Result<VerifyReport> {
    let n = inst.chambers;
    let m = Arc::new(CutCache::default_location().load_or_build(n)?);
    let g = build_parallel_graph(n)?;
    let mut report = VerifyReport::default();

    let (cut_gap, lp_gap) = triple_gap(n, &m, samples, seed)?;
    report.check(cut_gap <= TOLERANCE, format!("flow vs cuts on {samples} allocations: max gap {cut_gap:.3e}"));
    report.check(lp_gap <= TOLERANCE, format!("flow vs parallelization LP: max gap {lp_gap:.3e}"));

    let opts = SolveOptions { cuts: Some(m.clone()), cache: None };
    let mut rho = Vec::new();
    for kind in ModelKind::ALL {
        let model = build_model(inst, kind, opts.cuts.as_deref())?;
        let res = solve_built(inst, &model)?;
        report.lines.push(format!("     {kind}: rho = {:.9}, {} nonzeros", res.rho, model.stats.nonzeros));
        if matches!(kind, ModelKind::Generalized | ModelKind::Alternative) {
            let sol = clustercap::lp::solve(&model.problem)?;
            let loads = tool_loads(&model, &sol.values, inst.tools.len(), g.recipes().len());
            let mut worst = 0.0f64;
            for y in &loads {
                let x = AllocationVector::new(y.clone(), &g)?;
                let flow = solve_maxflow(&x, &g)?;
                worst = worst.max(x.total() - flow.value);
            }
            report.check(
                worst <= res.rho * (1.0 + TOLERANCE) + TOLERANCE,
                format!("{kind}: flow makespan of every tool {worst:.9} within rho"),
            );
        }
        rho.push((kind, res.rho));
    }
    let get = |k: ModelKind| rho.iter().find(|r| r.0 == k).map_or(f64::NAN, |r| r.1);
    let (gen, alt) = (get(ModelKind::Generalized), get(ModelKind::Alternative));
    report.check(
        relative_gap(gen, alt) <= TOLERANCE,
        format!("generalized = alternative: {gen:.9} vs {alt:.9}"),
    );
    Ok(report)
}
