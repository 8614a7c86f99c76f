//! Bounded primal simplex on a compact (Tucker) tableau.
//!
//! Every row `i` gets a logical variable `s_i = a_i x` whose bounds encode the
//! row sense, so the all-logical basis is always available as a start. The
//! tableau stores only the `m x n` block over nonbasic columns; a pivot swaps
//! one basic and one nonbasic variable in place. Phase 1 minimizes the sum of
//! bound violations of basic variables; a positive phase-1 optimum certifies
//! infeasibility. Dantzig pricing is used until a run of degenerate pivots,
//! after which Bland's rule takes over until progress resumes.

use super::{ConstraintSense, LpError, LpProblem, LpSolution, ObjectiveSense, Status, Tolerances};

/// Solver knobs. Tolerances come from the shared [`Tolerances`] record.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tolerances: Tolerances,
    /// Defaults to `20 * (rows + columns) + 10_000` when `None`.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_limit: usize,
    /// Basis dimension up to which the final primal point is recomputed by a
    /// direct solve against the original rows.
    pub polish_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerances: Tolerances::default(),
            max_iterations: None,
            degenerate_limit: 40,
            polish_limit: 3000,
        }
    }
}

pub fn solve(p: &LpProblem) -> Result<LpSolution, LpError> {
    solve_with(p, &SolverOptions::default())
}

pub fn solve_with(p: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    p.validate()?;
    let tol = opts.tolerances;

    // Presolve: empty rows are either trivially satisfied or certify infeasibility.
    let mut active = Vec::new();
    for (i, c) in p.constraints.iter().enumerate() {
        if c.coeffs.is_empty() {
            let ok = match c.sense {
                ConstraintSense::Le => 0.0 <= c.rhs + tol.feasibility,
                ConstraintSense::Ge => 0.0 >= c.rhs - tol.feasibility,
                ConstraintSense::Eq => c.rhs.abs() <= tol.feasibility,
            };
            if !ok {
                return Ok(infeasible(p, 0));
            }
        } else {
            active.push(i);
        }
    }

    let mut s = Tableau::new(p, active, opts);
    if !s.phase_one()? {
        return Ok(infeasible(p, s.iterations));
    }
    match s.phase_two()? {
        PhaseEnd::Unbounded => {
            let objective = match p.sense {
                ObjectiveSense::Minimize => f64::NEG_INFINITY,
                ObjectiveSense::Maximize => f64::INFINITY,
            };
            Ok(LpSolution {
                status: Status::Unbounded,
                objective,
                values: s.x[..s.n].to_vec(),
                duals: None,
                iterations: s.iterations,
            })
        }
        PhaseEnd::Optimal => s.finish(),
    }
}

fn infeasible(p: &LpProblem, iterations: usize) -> LpSolution {
    LpSolution {
        status: Status::Infeasible,
        objective: f64::NAN,
        values: p.variables.iter().map(|v| start_value(v.lower, v.upper.unwrap_or(f64::INFINITY))).collect(),
        duals: None,
        iterations,
    }
}

fn start_value(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pos {
    Basic(usize),
    NonBasic(usize),
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Entering {
    col: usize,
    dir: f64,
}

struct Step {
    t: f64,
    /// Leaving row and the bound value its variable lands on.
    leaving: Option<(usize, f64)>,
}

struct Tableau<'a> {
    p: &'a LpProblem,
    tol: Tolerances,
    n: usize,
    m: usize,
    rows: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
    pos: Vec<Pos>,
    /// Row-major `m x n`; `d x_B[i] / d x_N[j] = t[i * n + j]`.
    t: Vec<f64>,
    /// Reduced costs per nonbasic column.
    d: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
    degenerate_limit: usize,
    bland: bool,
    polish_limit: usize,
}

impl<'a> Tableau<'a> {
    fn new(p: &'a LpProblem, rows: Vec<usize>, opts: &SolverOptions) -> Self {
        let n = p.variables.len();
        let m = rows.len();
        let mut lo = Vec::with_capacity(n + m);
        let mut hi = Vec::with_capacity(n + m);
        for v in &p.variables {
            lo.push(v.lower);
            hi.push(v.upper.unwrap_or(f64::INFINITY));
        }
        for &r in &rows {
            let c = &p.constraints[r];
            let (l, h) = match c.sense {
                ConstraintSense::Le => (f64::NEG_INFINITY, c.rhs),
                ConstraintSense::Ge => (c.rhs, f64::INFINITY),
                ConstraintSense::Eq => (c.rhs, c.rhs),
            };
            lo.push(l);
            hi.push(h);
        }
        let sign = match p.sense {
            ObjectiveSense::Minimize => 1.0,
            ObjectiveSense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; n + m];
        for &(j, c) in &p.objective {
            cost[j] = sign * c;
        }
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            x[j] = start_value(lo[j], hi[j]);
        }
        let mut t = vec![0.0; m * n];
        for (i, &r) in rows.iter().enumerate() {
            let mut act = 0.0;
            for &(j, a) in &p.constraints[r].coeffs {
                t[i * n + j] = a;
                act += a * x[j];
            }
            x[n + i] = act;
        }
        let basis: Vec<usize> = (n..n + m).collect();
        let nonbasic: Vec<usize> = (0..n).collect();
        let mut pos = Vec::with_capacity(n + m);
        pos.extend((0..n).map(Pos::NonBasic));
        pos.extend((0..m).map(Pos::Basic));
        let max_iterations = opts.max_iterations.unwrap_or(20 * (m + n) + 10_000);
        Tableau {
            p,
            tol: opts.tolerances,
            n,
            m,
            rows,
            lo,
            hi,
            cost,
            x,
            basis,
            nonbasic,
            pos,
            t,
            d: vec![0.0; n],
            iterations: 0,
            max_iterations,
            degenerate_run: 0,
            degenerate_limit: opts.degenerate_limit,
            bland: false,
            polish_limit: opts.polish_limit,
        }
    }

    /// Drives basic variables into their bounds. Returns `false` when the
    /// phase-1 optimum is positive, i.e. the problem is infeasible.
    fn phase_one(&mut self) -> Result<bool, LpError> {
        let feas = self.tol.feasibility;
        let mut weights = vec![0.0; self.m];
        loop {
            let mut any = false;
            for i in 0..self.m {
                let v = self.basis[i];
                let xi = self.x[v];
                weights[i] = if xi < self.lo[v] - feas {
                    -1.0
                } else if xi > self.hi[v] + feas {
                    1.0
                } else {
                    0.0
                };
                any |= weights[i] != 0.0;
            }
            if !any {
                return Ok(true);
            }
            self.d.iter_mut().for_each(|d| *d = 0.0);
            for i in 0..self.m {
                let w = weights[i];
                if w != 0.0 {
                    let row = &self.t[i * self.n..(i + 1) * self.n];
                    for (d, &a) in self.d.iter_mut().zip(row) {
                        *d += w * a;
                    }
                }
            }
            let Some(enter) = self.choose_entering() else {
                return Ok(false);
            };
            let step = self.ratio_test(&enter, true);
            if step.t.is_infinite() {
                return Err(LpError::Numerical("phase 1 direction without breakpoint".into()));
            }
            self.apply(&enter, step, false)?;
        }
    }

    fn phase_two(&mut self) -> Result<PhaseEnd, LpError> {
        self.degenerate_run = 0;
        self.bland = false;
        self.refresh_reduced_costs();
        let mut since_refresh = 0;
        loop {
            if since_refresh >= 100 {
                self.refresh_reduced_costs();
                since_refresh = 0;
            }
            let Some(enter) = self.choose_entering() else {
                if since_refresh > 0 {
                    // Confirm optimality against freshly computed reduced costs.
                    self.refresh_reduced_costs();
                    since_refresh = 0;
                    if self.choose_entering().is_some() {
                        continue;
                    }
                }
                return Ok(PhaseEnd::Optimal);
            };
            let step = self.ratio_test(&enter, false);
            if step.t.is_infinite() {
                return Ok(PhaseEnd::Unbounded);
            }
            self.apply(&enter, step, true)?;
            since_refresh += 1;
        }
    }

    fn refresh_reduced_costs(&mut self) {
        for (c, &v) in self.nonbasic.iter().enumerate() {
            self.d[c] = self.cost[v];
        }
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.n..(i + 1) * self.n];
                for (d, &a) in self.d.iter_mut().zip(row) {
                    *d += cb * a;
                }
            }
        }
    }

    fn choose_entering(&self) -> Option<Entering> {
        let opt = self.tol.optimality;
        let mut best: Option<(Entering, f64, usize)> = None;
        for (c, &v) in self.nonbasic.iter().enumerate() {
            let dj = self.d[c];
            let xv = self.x[v];
            let dir = if dj < -opt && xv < self.hi[v] {
                1.0
            } else if dj > opt && xv > self.lo[v] {
                -1.0
            } else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((_, score, var)) => {
                    if self.bland {
                        v < *var
                    } else {
                        dj.abs() > *score
                    }
                }
            };
            if better {
                best = Some((Entering { col: c, dir }, dj.abs(), v));
            }
        }
        best.map(|(e, _, _)| e)
    }

    /// Harris two-pass ratio test; strict minimum ratio with lowest-index
    /// tie-breaking while Bland's rule is active.
    fn ratio_test(&self, enter: &Entering, phase1: bool) -> Step {
        let q = enter.col;
        let v = self.nonbasic[q];
        let feas = self.tol.feasibility;
        let piv = self.tol.pivot;
        let range = self.hi[v] - self.lo[v];

        // (row, exact limit, relaxed limit, bound value)
        let mut candidates: Vec<(usize, f64, f64, f64)> = Vec::new();
        for i in 0..self.m {
            let a = self.t[i * self.n + q];
            if a.abs() <= piv {
                continue;
            }
            let rate = a * enter.dir;
            let b = self.basis[i];
            let (xi, lo, hi) = (self.x[b], self.lo[b], self.hi[b]);
            let below = phase1 && xi < lo - feas;
            let above = phase1 && xi > hi + feas;
            let hit = if below {
                (rate > 0.0).then(|| ((lo - xi) / rate, (lo - xi + feas) / rate, lo))
            } else if above {
                (rate < 0.0).then(|| ((hi - xi) / rate, (hi - xi - feas) / rate, hi))
            } else if rate > 0.0 && hi.is_finite() {
                Some((((hi - xi) / rate).max(0.0), ((hi - xi + feas) / rate).max(0.0), hi))
            } else if rate < 0.0 && lo.is_finite() {
                Some((((lo - xi) / rate).max(0.0), ((lo - xi - feas) / rate).max(0.0), lo))
            } else {
                None
            };
            if let Some((exact, relaxed, bound)) = hit {
                candidates.push((i, exact, relaxed, bound));
            }
        }

        let pick = if self.bland {
            let mut best: Option<(usize, f64, f64)> = None;
            for &(i, exact, _, bound) in &candidates {
                let better = match best {
                    None => true,
                    Some((bi, bt, _)) => {
                        exact < bt - 1e-12 || (exact <= bt + 1e-12 && self.basis[i] < self.basis[bi])
                    }
                };
                if better {
                    best = Some((i, exact, bound));
                }
            }
            best
        } else {
            let bound_relaxed = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            let mut best: Option<(usize, f64, f64)> = None;
            let mut best_pivot = 0.0;
            for &(i, exact, _, bound) in &candidates {
                if exact <= bound_relaxed {
                    let a = self.t[i * self.n + q].abs();
                    if a > best_pivot {
                        best_pivot = a;
                        best = Some((i, exact, bound));
                    }
                }
            }
            best
        };

        match pick {
            Some((i, t, bound)) if t < range => Step { t, leaving: Some((i, bound)) },
            _ => Step { t: range, leaving: None },
        }
    }

    fn apply(&mut self, enter: &Entering, step: Step, track_costs: bool) -> Result<(), LpError> {
        self.iterations += 1;
        if self.iterations > self.max_iterations {
            return Err(LpError::IterationLimit(self.max_iterations));
        }
        if step.t <= 1e-12 {
            self.degenerate_run += 1;
            if self.degenerate_run > self.degenerate_limit {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }

        let q = enter.col;
        let v = self.nonbasic[q];
        let delta = enter.dir * step.t;
        if delta != 0.0 {
            for i in 0..self.m {
                let a = self.t[i * self.n + q];
                if a != 0.0 {
                    self.x[self.basis[i]] += a * delta;
                }
            }
            self.x[v] += delta;
        }
        match step.leaving {
            None => {
                self.x[v] = if enter.dir > 0.0 { self.hi[v] } else { self.lo[v] };
            }
            Some((row, bound)) => {
                let leaving = self.basis[row];
                self.x[leaving] = bound;
                self.pivot(row, q, track_costs)?;
            }
        }
        Ok(())
    }

    fn pivot(&mut self, p: usize, q: usize, track_costs: bool) -> Result<(), LpError> {
        let n = self.n;
        let a = self.t[p * n + q];
        if a.abs() <= self.tol.pivot {
            return Err(LpError::Numerical(format!("pivot element {a:e} below threshold")));
        }
        let scaled: Vec<f64> = self.t[p * n..(p + 1) * n].iter().map(|&v| v / a).collect();
        for i in 0..self.m {
            if i == p {
                continue;
            }
            let f = self.t[i * n + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            for (r, &s) in row.iter_mut().zip(&scaled) {
                *r -= f * s;
            }
            row[q] = f / a;
        }
        {
            let row = &mut self.t[p * n..(p + 1) * n];
            for (r, &s) in row.iter_mut().zip(&scaled) {
                *r = -s;
            }
            row[q] = 1.0 / a;
        }
        if track_costs {
            let f = self.d[q];
            if f != 0.0 {
                for (d, &s) in self.d.iter_mut().zip(&scaled) {
                    *d -= f * s;
                }
                self.d[q] = f / a;
            }
        }

        let entering = self.nonbasic[q];
        let leaving = self.basis[p];
        self.basis[p] = entering;
        self.nonbasic[q] = leaving;
        self.pos[entering] = Pos::Basic(p);
        self.pos[leaving] = Pos::NonBasic(q);
        Ok(())
    }

    fn finish(mut self) -> Result<LpSolution, LpError> {
        self.refresh_reduced_costs();
        self.polish();
        let n = self.n;
        let values: Vec<f64> = self.x[..n].to_vec();

        let feas = self.tol.feasibility;
        for (j, v) in self.p.variables.iter().enumerate() {
            let over = (v.lower - values[j]).max(values[j] - v.upper.unwrap_or(f64::INFINITY));
            if over > feas {
                return Err(LpError::Numerical(format!(
                    "variable '{}' violates its bounds by {over:e}",
                    v.name
                )));
            }
        }
        for c in &self.p.constraints {
            let viol = c.violation(&values);
            if viol > feas {
                return Err(LpError::Numerical(format!("row '{}' violated by {viol:e}", c.name)));
            }
        }

        let sign = match self.p.sense {
            ObjectiveSense::Minimize => 1.0,
            ObjectiveSense::Maximize => -1.0,
        };
        let mut duals = vec![0.0; self.p.constraints.len()];
        for (i, &r) in self.rows.iter().enumerate() {
            if let Pos::NonBasic(c) = self.pos[n + i] {
                duals[r] = sign * self.d[c];
            }
        }
        Ok(LpSolution {
            status: Status::Optimal,
            objective: self.p.objective_value(&values),
            values,
            duals: Some(duals),
            iterations: self.iterations,
        })
    }

    /// Recomputes basic structural values from the rows whose logicals sit at
    /// a bound, removing drift accumulated by tableau updates.
    fn polish(&mut self) {
        let n = self.n;
        let basic_structurals: Vec<usize> = self.basis.iter().copied().filter(|&v| v < n).collect();
        let k = basic_structurals.len();
        if k == 0 || k > self.polish_limit {
            return;
        }
        let tight_rows: Vec<usize> = (0..self.m).filter(|&i| matches!(self.pos[n + i], Pos::NonBasic(_))).collect();
        if tight_rows.len() != k {
            return;
        }
        let mut col_of = vec![usize::MAX; n];
        for (c, &v) in basic_structurals.iter().enumerate() {
            col_of[v] = c;
        }
        let mut mat = vec![0.0; k * k];
        let mut rhs = vec![0.0; k];
        for (r, &i) in tight_rows.iter().enumerate() {
            let mut b = self.x[n + i];
            for &(j, a) in &self.p.constraints[self.rows[i]].coeffs {
                match col_of[j] {
                    usize::MAX => b -= a * self.x[j],
                    c => mat[r * k + c] = a,
                }
            }
            rhs[r] = b;
        }
        let Some(sol) = gaussian_solve(&mut mat, &mut rhs, k) else {
            return;
        };
        let mut x = self.x.clone();
        for (c, &v) in basic_structurals.iter().enumerate() {
            x[v] = sol[c];
        }
        // Accept only if the polished point is at least as feasible.
        let worst = |vals: &[f64]| {
            self.p
                .constraints
                .iter()
                .map(|c| c.violation(&vals[..n]))
                .chain((0..n).map(|j| (self.lo[j] - vals[j]).max(vals[j] - self.hi[j]).max(0.0)))
                .fold(0.0, f64::max)
        };
        if worst(&x) <= worst(&self.x).max(self.tol.feasibility * 1e-3) {
            for j in 0..n {
                x[j] = x[j].clamp(self.lo[j], self.hi[j]);
            }
            self.x = x;
        }
    }
}

/// Dense Gaussian elimination with partial pivoting; `None` if singular.
fn gaussian_solve(mat: &mut [f64], rhs: &mut [f64], k: usize) -> Option<Vec<f64>> {
    for col in 0..k {
        let (piv, max) = (col..k)
            .map(|r| (r, mat[r * k + col].abs()))
            .fold((col, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if max < 1e-12 {
            return None;
        }
        if piv != col {
            for c in 0..k {
                mat.swap(piv * k + c, col * k + c);
            }
            rhs.swap(piv, col);
        }
        let diag = mat[col * k + col];
        for r in col + 1..k {
            let f = mat[r * k + col] / diag;
            if f != 0.0 {
                for c in col..k {
                    mat[r * k + c] -= f * mat[col * k + c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let mut s = rhs[r];
        for c in r + 1..k {
            s -= mat[r * k + c] * x[c];
        }
        x[r] = s / mat[r * k + r];
    }
    Some(x)
}
