//! Recipes (nonempty chamber subsets) and the parallelization graph.
//!
//! Two recipes may run concurrently from the two load locks exactly when they
//! use disjoint chamber sets; the parallelization graph has one vertex per
//! recipe and one edge per such pair.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported chamber count. Chambers are named `A` through `H`.
pub const MAX_CHAMBERS: usize = 8;

/// A nonempty set of chambers, stored as a bit mask (bit `c` = chamber `c`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Recipe(u8);

impl Recipe {
    pub fn new(mask: u8, n: usize) -> Result<Self> {
        check_chambers(n)?;
        if mask == 0 {
            return Err(Error::Instance("recipe must contain at least one chamber".into()));
        }
        if n < MAX_CHAMBERS && mask >> n != 0 {
            return Err(Error::Instance(format!(
                "recipe mask {mask:#b} uses chambers beyond {n}"
            )));
        }
        Ok(Recipe(mask))
    }

    /// The recipe holding every chamber of an `n`-chamber tool.
    pub fn full(n: usize) -> Result<Self> {
        check_chambers(n)?;
        Ok(Recipe(full_mask(n)))
    }

    pub fn singleton(chamber: usize, n: usize) -> Result<Self> {
        if chamber >= n {
            return Err(Error::Instance(format!("chamber {chamber} out of range for {n} chambers")));
        }
        Recipe::new(1 << chamber, n)
    }

    /// Parses a label such as `"AC"`. Letters may appear in any order but not twice.
    pub fn from_label(label: &str, n: usize) -> Result<Self> {
        let mut mask = 0u8;
        for ch in label.chars() {
            let c = chamber_index(ch)
                .filter(|&c| c < n)
                .ok_or_else(|| Error::Instance(format!("unknown chamber '{ch}' in recipe '{label}'")))?;
            if mask & (1 << c) != 0 {
                return Err(Error::Instance(format!("chamber '{ch}' repeated in recipe '{label}'")));
            }
            mask |= 1 << c;
        }
        Recipe::new(mask, n)
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn contains(self, chamber: usize) -> bool {
        chamber < MAX_CHAMBERS && self.0 & (1 << chamber) != 0
    }

    pub fn chambers(self) -> impl Iterator<Item = usize> {
        (0..MAX_CHAMBERS).filter(move |&c| self.0 & (1 << c) != 0)
    }

    pub fn is_disjoint(self, other: Recipe) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset(self, other: Recipe) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn label(self) -> String {
        self.chambers().map(chamber_letter).collect()
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn chamber_letter(chamber: usize) -> char {
    (b'A' + chamber as u8) as char
}

pub fn chamber_index(letter: char) -> Option<usize> {
    match letter {
        'A'..='H' => Some(letter as usize - 'A' as usize),
        _ => None,
    }
}

fn full_mask(n: usize) -> u8 {
    ((1u16 << n) - 1) as u8
}

pub(crate) fn check_chambers(n: usize) -> Result<()> {
    if n == 0 || n > MAX_CHAMBERS {
        return Err(Error::ChamberCount { n, max: MAX_CHAMBERS });
    }
    Ok(())
}

/// All `2^n - 1` recipes in canonical order: by cardinality, then by label.
pub fn canonical_recipes(n: usize) -> Result<Vec<Recipe>> {
    check_chambers(n)?;
    let mut recipes: Vec<Recipe> = (1..=full_mask(n) as u16).map(|m| Recipe(m as u8)).collect();
    recipes.sort_by_cached_key(|r| (r.len(), r.label()));
    Ok(recipes)
}

/// Recipe vertices plus the disjoint-pair edges between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelGraph {
    n: usize,
    recipes: Vec<Recipe>,
    /// Canonical index of each mask; `usize::MAX` for mask 0.
    index: Vec<usize>,
    /// Pairs `(a, b)` of canonical indices with `a < b`, sorted.
    edges: Vec<(usize, usize)>,
}

impl ParallelGraph {
    pub fn chambers(&self) -> usize {
        self.n
    }

    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn recipe(&self, idx: usize) -> Recipe {
        self.recipes[idx]
    }

    pub fn index_of(&self, recipe: Recipe) -> Option<usize> {
        self.index.get(recipe.mask() as usize).copied().filter(|&i| i != usize::MAX)
    }

    pub fn labels(&self) -> Vec<String> {
        self.recipes.iter().map(|r| r.label()).collect()
    }

    /// Edge indices incident to each recipe.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.recipes.len()];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            inc[a].push(e);
            inc[b].push(e);
        }
        inc
    }
}

/// Builds the parallelization graph for `n` chambers (`1 <= n <= 8`).
pub fn build_parallel_graph(n: usize) -> Result<ParallelGraph> {
    let recipes = canonical_recipes(n)?;
    let mut index = vec![usize::MAX; 1 << n];
    for (i, r) in recipes.iter().enumerate() {
        index[r.mask() as usize] = i;
    }
    let mut edges = Vec::new();
    for a in 0..recipes.len() {
        for b in a + 1..recipes.len() {
            if recipes[a].is_disjoint(recipes[b]) {
                edges.push((a, b));
            }
        }
    }
    Ok(ParallelGraph { n, recipes, index, edges })
}

/// Closed-form `(|R|, |E|) = (2^n - 1, (3^n - 1)/2 - (2^n - 1))`.
pub fn predict_graph_counts(n: usize) -> (u64, u64) {
    let recipes = (1u64 << n) - 1;
    let pairs = (3u64.pow(n as u32) - 1) / 2;
    (recipes, pairs - recipes)
}
