//! The four capacity-planning LPs and their size formulas.
//!
//! All models minimize the common utilization bound `ρ` subject to meeting
//! every demand `λ_j`. They differ in how recipe time on a tool turns into load:
//!
//! * basic: one aggregate rate per `(job, tool)`, load `Σ_j x_ji`;
//! * serial: bottleneck rate per `(job, tool)` plus one load row per chamber;
//! * generalized: recipe variables with one row `⟨1 − Π_k, x_i⟩ ≤ ρ` per cut;
//! * alternative: recipe variables plus overlap variables `ξ` per disjoint
//!   recipe pair, load `Σ_r x_ir − Σ ξ`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::cuts::{CutCache, CutMatrix};
use crate::error::{Error, Result};
use crate::instance::{Eligibility, Instance};
use crate::lp::{self, size_stats, ConstraintSense, LpProblem, ObjectiveSense, SizeStats, Status};
use crate::recipe::{build_parallel_graph, predict_graph_counts, Recipe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Basic,
    Serial,
    Generalized,
    Alternative,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Basic, ModelKind::Serial, ModelKind::Generalized, ModelKind::Alternative];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Basic => "basic",
            ModelKind::Serial => "serial",
            ModelKind::Generalized => "generalized",
            ModelKind::Alternative => "alternative",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownName {
                what: "model",
                value: s.to_string(),
                expected: "basic, serial, generalized, alternative",
            })
    }
}

/// Rate used for the single `(job, tool)` variable of the basic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceRate {
    /// Rate of the recipe using every qualified chamber.
    FullRecipe,
    /// Rate of the slowest qualified chamber (serial processing).
    Bottleneck,
}

/// Column of a job's processing time on a tool, for one recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignmentVar {
    pub job: usize,
    pub tool: usize,
    pub recipe: Recipe,
    pub rate: f64,
    pub column: usize,
}

/// A row of the form `(load expression) − ρ ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadRow {
    pub tool: usize,
    pub kind: &'static str,
    pub row: usize,
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub kind: ModelKind,
    pub problem: LpProblem,
    pub rho: usize,
    pub assignments: Vec<AssignmentVar>,
    /// `(tool, recipe index, column)` of the aggregate `x_{i,r}`.
    pub aggregates: Vec<(usize, usize, usize)>,
    /// `(tool, edge index, column)` of `ξ`.
    pub overlaps: Vec<(usize, usize, usize)>,
    pub load_rows: Vec<LoadRow>,
    pub stats: SizeStats,
}

struct Draft {
    kind: ModelKind,
    p: LpProblem,
    rho: usize,
    assignments: Vec<AssignmentVar>,
    aggregates: Vec<(usize, usize, usize)>,
    overlaps: Vec<(usize, usize, usize)>,
    load_rows: Vec<LoadRow>,
}

impl Draft {
    fn new(kind: ModelKind, inst: &Instance) -> Self {
        let name = if inst.name.is_empty() { kind.to_string() } else { format!("{}_{kind}", inst.name) };
        let mut p = LpProblem::new(name);
        let rho = p.add_variable("rho", 0.0, None);
        p.set_objective(ObjectiveSense::Minimize, [(rho, 1.0)]);
        Draft { kind, p, rho, assignments: vec![], aggregates: vec![], overlaps: vec![], load_rows: vec![] }
    }

    fn load_row(&mut self, tool: usize, kind: &'static str, name: String, mut coeffs: Vec<(usize, f64)>) {
        coeffs.push((self.rho, -1.0));
        let row = self.p.add_constraint(name, coeffs, ConstraintSense::Le, 0.0);
        self.load_rows.push(LoadRow { tool, kind, row });
    }

    /// Demand rows `Σ rate · x = λ_j` over the assignment columns.
    fn demand_rows(&mut self, inst: &Instance) {
        let mut per_job: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.jobs.len()];
        for a in &self.assignments {
            per_job[a.job].push((a.column, a.rate));
        }
        for (j, coeffs) in per_job.into_iter().enumerate() {
            self.p.add_constraint(format!("demand_j{j}"), coeffs, ConstraintSense::Eq, inst.jobs[j].demand);
        }
    }

    /// Recipe-level columns for every `(j, i, r) ∈ C`.
    fn recipe_columns(&mut self, e: &Eligibility, recipes: &[Recipe]) {
        for j in 0..e.num_jobs() {
            for i in 0..e.num_tools() {
                if e.qualified_mask(j, i) == 0 {
                    continue;
                }
                for &r in recipes {
                    if let Some(rate) = e.recipe_rate(j, i, r) {
                        let column = self.p.add_variable(format!("x_j{j}_t{i}_{}", r.label()), 0.0, None);
                        self.assignments.push(AssignmentVar { job: j, tool: i, recipe: r, rate, column });
                    }
                }
            }
        }
    }

    /// Aggregates `x_{i,r}` and the rows `x_{i,r} − Σ_j x_{j,i,r} = 0`.
    fn aggregate_rows(&mut self, tools: usize, recipes: &[Recipe]) {
        let mut members: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); recipes.len()]; tools];
        let index_of = |r: Recipe| recipes.iter().position(|&q| q == r).expect("canonical recipe");
        for a in &self.assignments {
            members[a.tool][index_of(a.recipe)].push(a.column);
        }
        for i in 0..tools {
            for (k, r) in recipes.iter().enumerate() {
                let column = self.p.add_variable(format!("y_t{i}_{}", r.label()), 0.0, None);
                self.aggregates.push((i, k, column));
                let mut coeffs = vec![(column, 1.0)];
                coeffs.extend(members[i][k].iter().map(|&c| (c, -1.0)));
                self.p.add_constraint(format!("agg_t{i}_{}", r.label()), coeffs, ConstraintSense::Eq, 0.0);
            }
        }
    }

    fn finish(self) -> BuiltModel {
        let stats = size_stats(&self.p);
        BuiltModel {
            kind: self.kind,
            problem: self.p,
            rho: self.rho,
            assignments: self.assignments,
            aggregates: self.aggregates,
            overlaps: self.overlaps,
            load_rows: self.load_rows,
            stats,
        }
    }
}

fn prepare(inst: &Instance) -> Result<Eligibility> {
    let e = inst.eligibility()?;
    inst.check_structure(&e)?;
    Ok(e)
}

pub fn build_basic(inst: &Instance) -> Result<BuiltModel> {
    build_basic_with(inst, ServiceRate::FullRecipe)
}

/// Basic model with a chosen per-`(job, tool)` rate.
pub fn build_basic_with(inst: &Instance, rate: ServiceRate) -> Result<BuiltModel> {
    let e = prepare(inst)?;
    Ok(basic_draft(inst, &e, rate, ModelKind::Basic).finish())
}

fn basic_draft(inst: &Instance, e: &Eligibility, rate: ServiceRate, kind: ModelKind) -> Draft {
    let mut d = Draft::new(kind, inst);
    for j in 0..inst.jobs.len() {
        for i in 0..inst.tools.len() {
            let q = e.qualified_mask(j, i);
            if q == 0 {
                continue;
            }
            let recipe = Recipe::new(q, inst.chambers).expect("qualified mask is a recipe");
            let mu = match rate {
                ServiceRate::FullRecipe => e.recipe_rate(j, i, recipe).expect("qualified"),
                ServiceRate::Bottleneck => e.bottleneck_rate(j, i).expect("qualified"),
            };
            let column = d.p.add_variable(format!("x_j{j}_t{i}"), 0.0, None);
            d.assignments.push(AssignmentVar { job: j, tool: i, recipe, rate: mu, column });
        }
    }
    d.demand_rows(inst);
    for i in 0..inst.tools.len() {
        let coeffs = d.assignments.iter().filter(|a| a.tool == i).map(|a| (a.column, 1.0)).collect();
        d.load_row(i, "util", format!("util_t{i}"), coeffs);
    }
    d
}

/// Basic model at bottleneck rates plus one load row per qualified chamber.
pub fn build_serial(inst: &Instance) -> Result<BuiltModel> {
    let e = prepare(inst)?;
    let mut d = basic_draft(inst, &e, ServiceRate::Bottleneck, ModelKind::Serial);
    for i in 0..inst.tools.len() {
        for c in 0..inst.chambers {
            let coeffs: Vec<(usize, f64)> = d
                .assignments
                .iter()
                .filter(|a| a.tool == i)
                .filter_map(|a| e.chamber_rate(a.job, i, c).map(|rc| (a.column, a.rate / rc)))
                .collect();
            if !coeffs.is_empty() {
                let letter = crate::recipe::chamber_letter(c);
                d.load_row(i, "chamber", format!("util_t{i}_{letter}"), coeffs);
            }
        }
    }
    Ok(d.finish())
}

/// Cut-based model; `m` must be the reduced matrix for the instance's chamber count.
pub fn build_generalized(inst: &Instance, m: &CutMatrix) -> Result<BuiltModel> {
    if m.chambers() != inst.chambers {
        return Err(Error::CutMatrix(format!(
            "matrix is for {} chambers, instance has {}",
            m.chambers(),
            inst.chambers
        )));
    }
    if !m.is_reduced() {
        return Err(Error::CutMatrix("the generalized model expects a reduced cut matrix".into()));
    }
    let e = prepare(inst)?;
    let recipes = m.recipes().to_vec();
    let mut d = Draft::new(ModelKind::Generalized, inst);
    d.recipe_columns(&e, &recipes);
    d.demand_rows(inst);
    d.aggregate_rows(inst.tools.len(), &recipes);
    let agg: Vec<(usize, usize, usize)> = d.aggregates.clone();
    for i in 0..inst.tools.len() {
        let cols: Vec<usize> = agg.iter().filter(|a| a.0 == i).map(|a| a.2).collect();
        for k in 0..m.len() {
            let coeffs = m.b_row(k).into_iter().zip(&cols).filter(|(b, _)| *b != 0.0).map(|(b, &c)| (c, b)).collect();
            d.load_row(i, "cut", format!("cut_t{i}_k{k}"), coeffs);
        }
    }
    Ok(d.finish())
}

/// Edge-variable model over the parallelization graph.
pub fn build_alternative(inst: &Instance) -> Result<BuiltModel> {
    let e = prepare(inst)?;
    let g = build_parallel_graph(inst.chambers)?;
    let recipes = g.recipes().to_vec();
    let mut d = Draft::new(ModelKind::Alternative, inst);
    d.recipe_columns(&e, &recipes);
    d.demand_rows(inst);
    d.aggregate_rows(inst.tools.len(), &recipes);
    let agg: Vec<(usize, usize, usize)> = d.aggregates.clone();
    let incidence = g.incidence();
    for i in 0..inst.tools.len() {
        let cols: Vec<usize> = agg.iter().filter(|a| a.0 == i).map(|a| a.2).collect();
        let xi: Vec<usize> = g
            .edges()
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let c = d.p.add_variable(format!("xi_t{i}_{}_{}", recipes[a].label(), recipes[b].label()), 0.0, None);
                d.overlaps.push((i, k, c));
                c
            })
            .collect();
        for (r, inc) in incidence.iter().enumerate() {
            let mut coeffs: Vec<(usize, f64)> = inc.iter().map(|&k| (xi[k], 1.0)).collect();
            coeffs.push((cols[r], -1.0));
            d.p.add_constraint(format!("par_t{i}_{}", recipes[r].label()), coeffs, ConstraintSense::Le, 0.0);
        }
        let mut span: Vec<(usize, f64)> = cols.iter().map(|&c| (c, 1.0)).collect();
        span.extend(xi.iter().map(|&c| (c, -1.0)));
        d.load_row(i, "span", format!("span_t{i}"), span);
    }
    Ok(d.finish())
}

pub fn build_model(inst: &Instance, kind: ModelKind, cuts: Option<&CutMatrix>) -> Result<BuiltModel> {
    match kind {
        ModelKind::Basic => build_basic(inst),
        ModelKind::Serial => build_serial(inst),
        ModelKind::Alternative => build_alternative(inst),
        ModelKind::Generalized => match cuts {
            Some(m) => build_generalized(inst, m),
            None => build_generalized(inst, &CutCache::default_location().load_or_build(inst.chambers)?),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub job: String,
    pub tool: String,
    pub recipe: String,
    pub time: f64,
    pub wafers: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Utilization {
    pub tool: String,
    pub row_kind: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityResult {
    pub model: ModelKind,
    pub status: Status,
    pub rho: f64,
    pub assignments: Vec<Assignment>,
    /// Largest load per tool and row kind.
    pub utilization: Vec<Utilization>,
    #[serde(skip)]
    pub stats: SizeStats,
    #[serde(skip)]
    pub build_ms: f64,
    #[serde(skip)]
    pub solve_ms: f64,
    #[serde(skip)]
    pub iterations: usize,
}

/// Where the generalized model gets its cut matrix.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub cuts: Option<Arc<CutMatrix>>,
    pub cache: Option<CutCache>,
}

impl SolveOptions {
    fn cut_matrix(&self, n: usize) -> Result<Arc<CutMatrix>> {
        match &self.cuts {
            Some(m) if m.chambers() == n => Ok(m.clone()),
            _ => {
                let cache = self.cache.clone().unwrap_or_else(CutCache::default_location);
                Ok(Arc::new(cache.load_or_build(n)?))
            }
        }
    }
}

pub fn solve_capacity(inst: &Instance, kind: ModelKind, opts: &SolveOptions) -> Result<CapacityResult> {
    let cuts = match kind {
        ModelKind::Generalized => Some(opts.cut_matrix(inst.chambers)?),
        _ => None,
    };
    let start = Instant::now();
    let model = build_model(inst, kind, cuts.as_deref())?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut res = solve_built(inst, &model)?;
    res.build_ms = build_ms;
    Ok(res)
}

/// Solves a built model and extracts `ρ`, nonzero assignments and loads.
pub fn solve_built(inst: &Instance, model: &BuiltModel) -> Result<CapacityResult> {
    let start = Instant::now();
    let sol = lp::solve(&model.problem)?;
    let solve_ms = start.elapsed().as_secs_f64() * 1e3;
    if sol.status != Status::Optimal {
        return Err(Error::SolverStatus { status: sol.status, context: "capacity model" });
    }
    let x = &sol.values;
    let assignments = model
        .assignments
        .iter()
        .filter(|a| x[a.column] > 1e-9)
        .map(|a| Assignment {
            job: inst.jobs[a.job].id.clone(),
            tool: inst.tools[a.tool].id.clone(),
            recipe: a.recipe.label(),
            time: x[a.column],
            wafers: x[a.column] * a.rate,
        })
        .collect();

    let mut utilization: Vec<Utilization> = Vec::new();
    for lr in &model.load_rows {
        let c = &model.problem.constraints[lr.row];
        let value: f64 = c.coeffs.iter().filter(|t| t.0 != model.rho).map(|&(j, a)| a * x[j]).sum();
        let tool = &inst.tools[lr.tool].id;
        match utilization.iter_mut().find(|u| &u.tool == tool && u.row_kind == lr.kind) {
            Some(u) => u.value = u.value.max(value),
            None => utilization.push(Utilization { tool: tool.clone(), row_kind: lr.kind.into(), value }),
        }
    }
    Ok(CapacityResult {
        model: model.kind,
        status: sol.status,
        rho: x[model.rho],
        assignments,
        utilization,
        stats: model.stats,
        build_ms: 0.0,
        solve_ms,
        iterations: sol.iterations,
    })
}

/// Per-tool constant `1 + |K| + |1 − Π| − 3^n` of the nonzero difference between the models.
pub fn delta_n(n: usize, cut_rows: usize, cut_nonzeros: usize) -> i64 {
    1 + cut_rows as i64 + cut_nonzeros as i64 - 3i64.pow(n as u32)
}

/// `(3^{n+1} − 2^{n+1} + 1) / 2`.
pub fn gamma_n(n: usize) -> i64 {
    (3i64.pow(n as u32 + 1) - 2i64.pow(n as u32 + 1) + 1) / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PredictedSizes {
    pub columns: u64,
    pub rows: u64,
    /// Closed-form nonzero count.
    pub nonzeros: u64,
    /// Nonzeros via `2|C| + |I|γ_n` for the
    /// alternative model, plus `|I|δ_n` for the generalized one.
    pub nonzeros_gamma: i64,
    pub delta_n: i64,
    pub gamma_n: i64,
}

/// Closed-form size formulas for the generalized and alternative models.
///
/// `|K|` and `|1 − Π|` are taken from `cuts`, which must be the reduced matrix
/// for `n` chambers.
pub fn predict_sizes(
    kind: ModelKind,
    n: usize,
    tools: usize,
    jobs: usize,
    eligible: usize,
    cuts: &CutMatrix,
) -> Result<PredictedSizes> {
    if cuts.chambers() != n {
        return Err(Error::CutMatrix(format!("matrix is for {} chambers, not {n}", cuts.chambers())));
    }
    let (r, e) = predict_graph_counts(n);
    let (i, j, c) = (tools as u64, jobs as u64, eligible as u64);
    let (k, pi) = (cuts.len() as u64, cuts.b_nonzeros() as u64);
    let delta = delta_n(n, cuts.len(), cuts.b_nonzeros());
    let gamma = gamma_n(n);
    let columns = 1 + c + i * (3u64.pow(n as u32) - 1) / 2;
    let gamma_alt = 2 * c as i64 + i as i64 * gamma;
    let (columns, rows, nonzeros, nonzeros_gamma) = match kind {
        ModelKind::Alternative => (columns, j + i * (1 + 2 * r), 2 * c + i * (1 + 3 * r + 2 * e), gamma_alt),
        ModelKind::Generalized => {
            (columns, j + i * (r + k), 2 * c + i * (r + 1 + k + pi), gamma_alt + i as i64 * delta)
        }
        other => return Err(Error::CutMatrix(format!("no size formula for the {other} model"))),
    };
    Ok(PredictedSizes { columns, rows, nonzeros, nonzeros_gamma, delta_n: delta, gamma_n: gamma })
}
