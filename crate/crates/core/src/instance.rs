//! Planning instances: tools, job classes, demands and qualifications.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recipe::{chamber_index, chamber_letter, check_chambers, Recipe};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tool {
    pub id: String,
}

/// Chambers of `tool` qualified for `job`, with their base rates in wafers per time unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qualification {
    pub job: String,
    pub tool: String,
    pub chamber_rates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeRateOverride {
    pub job: String,
    pub tool: String,
    pub recipe: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(default)]
    pub name: String,
    pub chambers: usize,
    pub jobs: Vec<Job>,
    pub tools: Vec<Tool>,
    pub qualifications: Vec<Qualification>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recipe_rate_overrides: Vec<RecipeRateOverride>,
}

/// Index-based view of the qualification data.
#[derive(Debug, Clone)]
pub struct Eligibility {
    pub n: usize,
    /// Qualified chamber mask per `(job, tool)`.
    masks: Vec<Vec<u8>>,
    /// Base rate per `(job, tool, chamber)`; 0 when not qualified.
    rates: Vec<Vec<[f64; 8]>>,
    overrides: HashMap<(usize, usize, u8), f64>,
}

impl Eligibility {
    pub fn qualified_mask(&self, job: usize, tool: usize) -> u8 {
        self.masks[job][tool]
    }

    pub fn chamber_rate(&self, job: usize, tool: usize, chamber: usize) -> Option<f64> {
        let r = self.rates[job][tool][chamber];
        (r > 0.0).then_some(r)
    }

    /// `(j, i, r) ∈ C` iff every chamber of `r` is qualified for `(j, i)`.
    pub fn is_eligible(&self, job: usize, tool: usize, recipe: Recipe) -> bool {
        let q = self.masks[job][tool];
        q != 0 && recipe.mask() & !q == 0
    }

    /// Override if present, else the sum of the base rates of the chambers in `recipe`.
    pub fn recipe_rate(&self, job: usize, tool: usize, recipe: Recipe) -> Option<f64> {
        if !self.is_eligible(job, tool, recipe) {
            return None;
        }
        if let Some(&r) = self.overrides.get(&(job, tool, recipe.mask())) {
            return Some(r);
        }
        Some(recipe.chambers().map(|c| self.rates[job][tool][c]).sum())
    }

    /// Slowest qualified chamber of `(job, tool)`.
    pub fn bottleneck_rate(&self, job: usize, tool: usize) -> Option<f64> {
        let q = self.masks[job][tool];
        (q != 0).then(|| {
            (0..self.n).filter(|&c| q >> c & 1 == 1).map(|c| self.rates[job][tool][c]).fold(f64::INFINITY, f64::min)
        })
    }

    pub fn num_jobs(&self) -> usize {
        self.masks.len()
    }

    pub fn num_tools(&self) -> usize {
        self.masks.first().map_or(0, Vec::len)
    }

    /// Size of `C`: eligible `(job, tool, recipe)` triples.
    pub fn eligible_count(&self) -> usize {
        self.masks.iter().flatten().map(|&q| (1usize << q.count_ones()) - 1).sum()
    }
}

impl Instance {
    pub fn job_index(&self, id: &str) -> Option<usize> {
        self.jobs.iter().position(|j| j.id == id)
    }

    pub fn tool_index(&self, id: &str) -> Option<usize> {
        self.tools.iter().position(|t| t.id == id)
    }

    /// Checks the instance invariants and builds the index view.
    pub fn eligibility(&self) -> Result<Eligibility> {
        let n = self.chambers;
        check_chambers(n)?;
        let bad = |msg: String| Err(Error::Instance(msg));
        let mut ids = HashSet::new();
        for j in &self.jobs {
            if !ids.insert(&j.id) {
                return bad(format!("duplicate job id '{}'", j.id));
            }
            if !j.demand.is_finite() || j.demand < 0.0 {
                return bad(format!("job '{}' has invalid demand {}", j.id, j.demand));
            }
        }
        let mut ids = HashSet::new();
        for t in &self.tools {
            if !ids.insert(&t.id) {
                return bad(format!("duplicate tool id '{}'", t.id));
            }
        }
        let job_of: HashMap<&str, usize> = self.jobs.iter().enumerate().map(|(k, j)| (j.id.as_str(), k)).collect();
        let tool_of: HashMap<&str, usize> = self.tools.iter().enumerate().map(|(k, t)| (t.id.as_str(), k)).collect();
        let lookup = |q_job: &str, q_tool: &str| -> Result<(usize, usize)> {
            let j = *job_of.get(q_job).ok_or_else(|| Error::Instance(format!("unknown job '{q_job}'")))?;
            let i = *tool_of.get(q_tool).ok_or_else(|| Error::Instance(format!("unknown tool '{q_tool}'")))?;
            Ok((j, i))
        };

        let mut masks = vec![vec![0u8; self.tools.len()]; self.jobs.len()];
        let mut rates = vec![vec![[0.0; 8]; self.tools.len()]; self.jobs.len()];
        let mut seen = HashSet::new();
        for q in &self.qualifications {
            let (j, i) = lookup(&q.job, &q.tool)?;
            if !seen.insert((j, i)) {
                return bad(format!("qualification for job '{}' on tool '{}' listed twice", q.job, q.tool));
            }
            for (label, &rate) in &q.chamber_rates {
                let c = match label.chars().collect::<Vec<_>>().as_slice() {
                    [ch] => chamber_index(*ch).filter(|&c| c < n),
                    _ => None,
                }
                .ok_or_else(|| Error::Instance(format!("'{label}' is not a chamber of a {n}-chamber tool")))?;
                if !rate.is_finite() || rate <= 0.0 {
                    return bad(format!("rate {rate} for job '{}', tool '{}', chamber {label} must be positive", q.job, q.tool));
                }
                masks[j][i] |= 1 << c;
                rates[j][i][c] = rate;
            }
        }

        let mut overrides = HashMap::new();
        for o in &self.recipe_rate_overrides {
            let (j, i) = lookup(&o.job, &o.tool)?;
            let recipe = Recipe::from_label(&o.recipe, n)?;
            if recipe.mask() & !masks[j][i] != 0 {
                return Err(Error::NotQualified { job: o.job.clone(), tool: o.tool.clone(), recipe: o.recipe.clone() });
            }
            if !o.rate.is_finite() || o.rate <= 0.0 {
                return bad(format!("override rate {} must be positive", o.rate));
            }
            if overrides.insert((j, i, recipe.mask()), o.rate).is_some() {
                return bad(format!("duplicate override for ({}, {}, {})", o.job, o.tool, o.recipe));
            }
        }
        Ok(Eligibility { n, masks, rates, overrides })
    }

    /// Fails with [`Error::StructurallyInfeasible`] for a job without any qualified chamber.
    pub fn check_structure(&self, e: &Eligibility) -> Result<()> {
        for (j, job) in self.jobs.iter().enumerate() {
            if (0..self.tools.len()).all(|i| e.qualified_mask(j, i) == 0) {
                return Err(Error::StructurallyInfeasible { job: job.id.clone() });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.eligibility()?;
        Ok(inst)
    }
}

/// Rate of `recipe` for job `j` on tool `i`; [`Error::NotQualified`] outside `C`.
pub fn derive_recipe_rate(inst: &Instance, j: usize, i: usize, recipe: Recipe) -> Result<f64> {
    let e = inst.eligibility()?;
    if j >= inst.jobs.len() || i >= inst.tools.len() {
        return Err(Error::Instance(format!("job {j} or tool {i} out of range")));
    }
    e.recipe_rate(j, i, recipe).ok_or_else(|| Error::NotQualified {
        job: inst.jobs[j].id.clone(),
        tool: inst.tools[i].id.clone(),
        recipe: recipe.label(),
    })
}

pub fn write_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, inst.to_json()?)?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    Instance::from_json(&fs::read_to_string(path)?)
}

/// Chamber-rate map keyed by chamber letter.
pub fn rate_map(rates: impl IntoIterator<Item = (usize, f64)>) -> BTreeMap<String, f64> {
    rates.into_iter().map(|(c, r)| (chamber_letter(c).to_string(), r)).collect()
}
