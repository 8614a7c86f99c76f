//! Minimal basic cuts of the doubled recipe graph and the cut matrix.
//!
//! Every edge `{r1, r2}` of the parallelization graph becomes two arcs
//! `(r1, r̃2)` and `(r2, r̃1)` between a left copy `R` and a right copy `R̃`.
//! A minimal basic cut is a minimal vertex cover of these arcs; its
//! complement is a maximal independent set `(L, M)` with `L ⊆ R`, `M ⊆ R̃`.
//! Maximal independent sets of a bipartite graph are exactly the closed pairs
//! of the Galois connection `L ↦ {b : no arc from L to b}`, so they are
//! enumerated with Ganter's NextClosure algorithm in lectic order.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{debug, info, warn};

use crate::error::{Error, Result};
use crate::recipe::{build_parallel_graph, check_chambers, ParallelGraph, Recipe};
use crate::redundancy;

/// Default limit on closure computations during enumeration.
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Fixed-width bit set over at most 256 recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub(crate) struct Bits([u64; 4]);

impl Bits {
    fn full(len: usize) -> Self {
        let mut b = Bits::default();
        for i in 0..len {
            b.set(i);
        }
        b
    }

    /// Elements `0..i`.
    fn below(i: usize) -> Self {
        Bits::full(i)
    }

    pub(crate) fn contains(&self, i: usize) -> bool {
        self.0[i >> 6] >> (i & 63) & 1 == 1
    }

    fn set(&mut self, i: usize) {
        self.0[i >> 6] |= 1 << (i & 63);
    }

    fn and(self, o: Bits) -> Bits {
        Bits([self.0[0] & o.0[0], self.0[1] & o.0[1], self.0[2] & o.0[2], self.0[3] & o.0[3]])
    }

    fn or(self, o: Bits) -> Bits {
        Bits([self.0[0] | o.0[0], self.0[1] | o.0[1], self.0[2] | o.0[2], self.0[3] | o.0[3]])
    }

    fn minus(self, o: Bits) -> Bits {
        Bits([self.0[0] & !o.0[0], self.0[1] & !o.0[1], self.0[2] & !o.0[2], self.0[3] & !o.0[3]])
    }

    fn ones(self) -> impl Iterator<Item = usize> {
        (0..4).flat_map(move |w| {
            let mut word = self.0[w];
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let t = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + t)
            })
        })
    }
}

/// A vertex of the doubled graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left(usize),
    Right(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoubledGraph {
    n: usize,
    recipes: Vec<Recipe>,
    /// `(left index, right index)` pairs.
    arcs: Vec<(usize, usize)>,
}

impl DoubledGraph {
    pub fn chambers(&self) -> usize {
        self.n
    }

    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    /// True when `cover` touches every arc.
    pub fn is_cover(&self, cut: &BasicCut) -> bool {
        self.arcs.iter().all(|&(a, b)| cut.pi(a) || cut.pi_tilde(b))
    }

    /// True when `cut` is a cover and no single vertex can be dropped.
    pub fn is_minimal_cover(&self, cut: &BasicCut) -> bool {
        if !self.is_cover(cut) {
            return false;
        }
        cut.selected().into_iter().all(|v| {
            self.arcs.iter().any(|&(a, b)| match v {
                Side::Left(r) => a == r && !cut.pi_tilde(b),
                Side::Right(r) => b == r && !cut.pi(a),
            })
        })
    }
}

pub fn double_graph(g: &ParallelGraph) -> DoubledGraph {
    let mut arcs = Vec::with_capacity(2 * g.edges().len());
    for &(a, b) in g.edges() {
        arcs.push((a, b));
        arcs.push((b, a));
    }
    DoubledGraph { n: g.chambers(), recipes: g.recipes().to_vec(), arcs }
}

/// A minimal vertex cover, given by its left part (`π`) and right part (`π̃`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasicCut {
    left: Bits,
    right: Bits,
}

impl BasicCut {
    pub fn from_sides(left: &[usize], right: &[usize]) -> Self {
        let mut cut = BasicCut { left: Bits::default(), right: Bits::default() };
        left.iter().for_each(|&r| cut.left.set(r));
        right.iter().for_each(|&r| cut.right.set(r));
        cut
    }

    pub fn pi(&self, r: usize) -> bool {
        self.left.contains(r)
    }

    pub fn pi_tilde(&self, r: usize) -> bool {
        self.right.contains(r)
    }

    pub fn selected(&self) -> Vec<Side> {
        self.left.ones().map(Side::Left).chain(self.right.ones().map(Side::Right)).collect()
    }

    /// `2Π_r = π_r + π̃_r` for each of the `len` recipes.
    pub fn twice_pi(&self, len: usize) -> Vec<u8> {
        (0..len).map(|r| self.pi(r) as u8 + self.pi_tilde(r) as u8).collect()
    }
}

/// Enumerates all minimal vertex covers with the default node budget.
pub fn enumerate_minimal_cuts(dg: &DoubledGraph) -> Result<Vec<BasicCut>> {
    enumerate_minimal_cuts_with_budget(dg, DEFAULT_NODE_BUDGET)
}

/// Enumerates all minimal vertex covers, counting each closure computation
/// against `budget`.
pub fn enumerate_minimal_cuts_with_budget(dg: &DoubledGraph, budget: u64) -> Result<Vec<BasicCut>> {
    let len = dg.recipes.len();
    if len > 256 {
        return Err(Error::ChamberCount { n: dg.n, max: 8 });
    }
    let all = Bits::full(len);
    // Right vertices not adjacent to a left vertex, and vice versa.
    let mut free_of_left = vec![all; len];
    let mut free_of_right = vec![all; len];
    for &(a, b) in &dg.arcs {
        free_of_left[a] = free_of_left[a].minus(single(b));
        free_of_right[b] = free_of_right[b].minus(single(a));
    }

    let mut nodes = 0u64;
    let mut closure = |l: Bits| -> Result<(Bits, Bits)> {
        nodes += 1;
        if nodes > budget {
            return Err(Error::NodeBudget { budget });
        }
        let m = l.ones().fold(all, |acc, a| acc.and(free_of_left[a]));
        let l = m.ones().fold(all, |acc, b| acc.and(free_of_right[b]));
        Ok((l, m))
    };

    let mut out = Vec::new();
    let (mut l, mut m) = closure(Bits::default())?;
    loop {
        out.push(BasicCut { left: all.minus(l), right: all.minus(m) });
        let mut advanced = false;
        for i in (0..len).rev() {
            if l.contains(i) {
                continue;
            }
            let low = Bits::below(i);
            let (cl, cm) = closure(l.and(low).or(single(i)))?;
            if cl.and(low) == l.and(low) {
                l = cl;
                m = cm;
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }
    debug!("enumerated {} minimal covers with {} closures", out.len(), nodes);
    Ok(out)
}

fn single(i: usize) -> Bits {
    let mut b = Bits::default();
    b.set(i);
    b
}

/// The set of cut vectors `Π_k` for one chamber count.
///
/// Entries are stored doubled (`2Π ∈ {0, 1, 2}`) so that they stay exact.
/// Rows are kept sorted lexicographically by `1 − Π`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutMatrix {
    n: usize,
    recipes: Vec<Recipe>,
    twice_pi: Vec<Vec<u8>>,
    reduced: bool,
}

impl CutMatrix {
    /// Builds a matrix from doubled `Π` rows, deduplicating and sorting them.
    pub fn from_twice_pi(n: usize, rows: impl IntoIterator<Item = Vec<u8>>, reduced: bool) -> Result<Self> {
        let g = build_parallel_graph(n)?;
        let width = g.recipes().len();
        let mut set = BTreeSet::new();
        for row in rows {
            if row.len() != width {
                return Err(Error::Dimension { expected: width, found: row.len() });
            }
            if row.iter().any(|&v| v > 2) {
                return Err(Error::CutMatrix("entries must lie in {0, 1/2, 1}".into()));
            }
            // Key on 2 − 2Π so that iteration order is lexicographic in 1 − Π.
            set.insert(row.iter().map(|&v| 2 - v).collect::<Vec<u8>>());
        }
        let twice_pi = set.into_iter().map(|b| b.into_iter().map(|v| 2 - v).collect()).collect();
        Ok(CutMatrix { n, recipes: g.recipes().to_vec(), twice_pi, reduced })
    }

    pub fn chambers(&self) -> usize {
        self.n
    }

    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    pub fn labels(&self) -> Vec<String> {
        self.recipes.iter().map(|r| r.label()).collect()
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn len(&self) -> usize {
        self.twice_pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.twice_pi.is_empty()
    }

    pub fn twice_pi_rows(&self) -> &[Vec<u8>] {
        &self.twice_pi
    }

    pub fn pi(&self, k: usize) -> Vec<f64> {
        self.twice_pi[k].iter().map(|&v| v as f64 / 2.0).collect()
    }

    /// Row `k` of `B = 1 − Π`.
    pub fn b_row(&self, k: usize) -> Vec<f64> {
        self.twice_pi[k].iter().map(|&v| 1.0 - v as f64 / 2.0).collect()
    }

    pub fn b_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.b_row(k)).collect()
    }

    /// Number of nonzero entries of `1 − Π`.
    pub fn b_nonzeros(&self) -> usize {
        self.twice_pi.iter().flatten().filter(|&&v| v != 2).count()
    }

    /// Renders the `1 − Π` rows as CSV with a header of recipe labels.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(self.labels());
        for row in &self.twice_pi {
            let _ = w.write_record(row.iter().map(|&v| match v {
                0 => "1",
                1 => "0.5",
                _ => "0",
            }));
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }

    /// Parses CSV written by [`CutMatrix::to_csv`]. Columns may come in any order.
    pub fn from_csv(text: &str, n: usize, reduced: bool) -> Result<Self> {
        check_chambers(n)?;
        let g = build_parallel_graph(n)?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::CutMatrix(e.to_string()))?.clone();
        let mut column_of = Vec::with_capacity(header.len());
        for label in header.iter() {
            let r = Recipe::from_label(label, n).map_err(|e| Error::CutMatrix(e.to_string()))?;
            column_of.push(g.index_of(r).expect("recipe of n chambers"));
        }
        let mut seen = column_of.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != g.recipes().len() || column_of.len() != g.recipes().len() {
            return Err(Error::CutMatrix(format!(
                "header must list each of the {} recipes once",
                g.recipes().len()
            )));
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::CutMatrix(e.to_string()))?;
            let mut row = vec![0u8; column_of.len()];
            for (c, field) in rec.iter().enumerate() {
                let v = match field {
                    "" | "0" => 2,
                    "0.5" | ".5" | "1/2" => 1,
                    "1" => 0,
                    other => {
                        return Err(Error::CutMatrix(format!("row {}: entry '{other}' is not 0, 0.5 or 1", k + 1)))
                    }
                };
                *row.get_mut(*column_of.get(c).unwrap_or(&usize::MAX)).ok_or_else(|| {
                    Error::CutMatrix(format!("row {} has too many fields", k + 1))
                })? = v;
            }
            if rec.len() != column_of.len() {
                return Err(Error::CutMatrix(format!("row {} has {} fields", k + 1, rec.len())));
            }
            rows.push(row);
        }
        CutMatrix::from_twice_pi(n, rows, reduced)
    }

    /// `min_k ⟨Π_k, x⟩`, the minimum cut value for allocation `x`.
    pub fn min_cut_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.recipes.len() {
            return Err(Error::Dimension { expected: self.recipes.len(), found: x.len() });
        }
        Ok(self
            .twice_pi
            .iter()
            .map(|row| row.iter().zip(x).map(|(&p, &v)| p as f64 * v).sum::<f64>() / 2.0)
            .fold(f64::INFINITY, f64::min))
    }
}

/// Collapses covers to distinct `Π` vectors.
pub fn cuts_to_pi(dg: &DoubledGraph, cuts: &[BasicCut]) -> CutMatrix {
    let len = dg.recipes.len();
    CutMatrix::from_twice_pi(dg.n, cuts.iter().map(|c| c.twice_pi(len)), false)
        .expect("rows come from a valid doubled graph")
}

/// Raw `Π` matrix for `n` chambers, straight from enumeration.
pub fn raw_cut_matrix(n: usize, budget: u64) -> Result<CutMatrix> {
    let g = build_parallel_graph(n)?;
    let dg = double_graph(&g);
    let cuts = enumerate_minimal_cuts_with_budget(&dg, budget)?;
    Ok(cuts_to_pi(&dg, &cuts))
}

/// Removes redundant rows from `m`.
pub fn reduce_cut_matrix(m: &CutMatrix) -> Result<CutMatrix> {
    let vectors: Vec<Vec<f64>> = (0..m.len()).map(|k| m.pi(k)).collect();
    let keep = redundancy::reduce_indices(&vectors)?;
    let rows = keep.into_iter().map(|k| m.twice_pi[k].clone());
    CutMatrix::from_twice_pi(m.n, rows, true)
}

/// Computes the cut matrix without touching the disk cache.
pub fn compute_cut_matrix(n: usize, reduce: bool) -> Result<CutMatrix> {
    let raw = raw_cut_matrix(n, DEFAULT_NODE_BUDGET)?;
    if reduce {
        reduce_cut_matrix(&raw)
    } else {
        Ok(raw)
    }
}

/// Full pipeline; reduced matrices are served from and stored in the default cache.
pub fn build_cut_matrix(n: usize, reduce: bool) -> Result<CutMatrix> {
    if reduce {
        CutCache::default_location().load_or_build(n)
    } else {
        compute_cut_matrix(n, false)
    }
}

/// On-disk cache of reduced matrices, one `cuts_n<k>.csv` per chamber count.
#[derive(Debug, Clone)]
pub struct CutCache {
    dir: PathBuf,
}

impl CutCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CutCache { dir: dir.into() }
    }

    /// `$CLUSTERCAP_CACHE`, else the user cache directory, else the temp directory.
    pub fn default_location() -> Self {
        let dir = std::env::var_os("CLUSTERCAP_CACHE")
            .map(PathBuf::from)
            .or_else(|| std::env::var_os("XDG_CACHE_HOME").map(|d| PathBuf::from(d).join("clustercap")))
            .or_else(|| std::env::var_os("HOME").map(|d| PathBuf::from(d).join(".cache").join("clustercap")))
            .unwrap_or_else(|| std::env::temp_dir().join("clustercap"));
        CutCache { dir }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, n: usize) -> PathBuf {
        self.dir.join(format!("cuts_n{n}.csv"))
    }

    /// Reads the cached matrix for `n`, if present and well formed.
    pub fn load(&self, n: usize) -> Option<CutMatrix> {
        let path = self.path_for(n);
        let text = fs::read_to_string(&path).ok()?;
        match CutMatrix::from_csv(&text, n, true) {
            Ok(m) => Some(m),
            Err(e) => {
                warn!("ignoring unreadable cache file {}: {e}", path.display());
                None
            }
        }
    }

    /// Writes atomically: temp file in the same directory, then rename.
    pub fn store(&self, m: &CutMatrix) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(m.chambers());
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(m.to_csv().as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
        Ok(path)
    }

    pub fn load_or_build(&self, n: usize) -> Result<CutMatrix> {
        check_chambers(n)?;
        if let Some(m) = self.load(n) {
            return Ok(m);
        }
        info!("building reduced cut matrix for n={n}");
        let m = compute_cut_matrix(n, true)?;
        if let Err(e) = self.store(&m) {
            warn!("could not write cut cache in {}: {e}", self.dir.display());
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label_side(dg: &DoubledGraph, v: Side) -> String {
        match v {
            Side::Left(r) => dg.recipes()[r].label(),
            Side::Right(r) => format!("~{}", dg.recipes()[r].label()),
        }
    }

    /// All minimal covers by checking every subset of the `2|R|` vertices.
    fn brute_force_covers(dg: &DoubledGraph) -> BTreeSet<BasicCut> {
        let len = dg.recipes().len();
        let mut out = BTreeSet::new();
        for mask in 0u32..(1 << (2 * len)) {
            let left: Vec<usize> = (0..len).filter(|&r| mask >> r & 1 == 1).collect();
            let right: Vec<usize> = (0..len).filter(|&r| mask >> (len + r) & 1 == 1).collect();
            let cut = BasicCut::from_sides(&left, &right);
            if dg.is_minimal_cover(&cut) {
                out.insert(cut);
            }
        }
        out
    }

    fn doubled(n: usize) -> DoubledGraph {
        double_graph(&build_parallel_graph(n).unwrap())
    }

    #[test]
    fn doubling_arcs() {
        assert!(doubled(1).arcs().is_empty());
        assert_eq!(doubled(2).arcs(), &[(0, 1), (1, 0)]);
        assert_eq!(doubled(3).arcs().len(), 12);
    }

    #[test]
    fn two_chamber_covers() {
        let dg = doubled(2);
        let cuts = enumerate_minimal_cuts(&dg).unwrap();
        let got: BTreeSet<Vec<String>> = cuts
            .iter()
            .map(|c| c.selected().into_iter().map(|v| label_side(&dg, v)).collect())
            .collect();
        let expected: BTreeSet<Vec<String>> = [["A", "B"], ["~A", "~B"], ["A", "~A"], ["B", "~B"]]
            .iter()
            .map(|p| p.iter().map(|s| s.to_string()).collect())
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn single_chamber_empty_cover() {
        let cuts = enumerate_minimal_cuts(&doubled(1)).unwrap();
        assert_eq!(cuts.len(), 1);
        assert!(cuts[0].selected().is_empty());
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for n in 1..=3 {
            let dg = doubled(n);
            let cuts = enumerate_minimal_cuts(&dg).unwrap();
            let set: BTreeSet<BasicCut> = cuts.iter().cloned().collect();
            assert_eq!(set.len(), cuts.len(), "duplicates for n={n}");
            assert_eq!(set, brute_force_covers(&dg), "n={n}");
        }
    }

    #[test]
    fn enumerated_cuts_are_minimal_covers() {
        let dg = doubled(4);
        let cuts = enumerate_minimal_cuts(&dg).unwrap();
        assert_eq!(cuts.len(), 166);
        let full = dg.recipes().len() - 1;
        for c in &cuts {
            assert!(dg.is_minimal_cover(c));
            assert!(!c.pi(full) && !c.pi_tilde(full));
        }
    }

    #[test]
    fn budget_is_enforced() {
        let dg = doubled(4);
        assert!(matches!(
            enumerate_minimal_cuts_with_budget(&dg, 50),
            Err(Error::NodeBudget { budget: 50 })
        ));
    }

    #[test]
    fn raw_pi_rows() {
        let m = raw_cut_matrix(2, DEFAULT_NODE_BUDGET).unwrap();
        let rows: BTreeSet<Vec<u8>> = m.twice_pi_rows().iter().cloned().collect();
        let expected: BTreeSet<Vec<u8>> = [vec![1, 1, 0], vec![2, 0, 0], vec![0, 2, 0]].into_iter().collect();
        assert_eq!(rows, expected);

        let m1 = raw_cut_matrix(1, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(m1.twice_pi_rows(), &[vec![0]]);

        let m3 = raw_cut_matrix(3, DEFAULT_NODE_BUDGET).unwrap();
        assert!(m3.twice_pi_rows().contains(&vec![2, 2, 1, 1, 0, 0, 0]));
        assert_eq!(m3.len(), 11);
    }

    #[test]
    fn rows_sorted_by_one_minus_pi() {
        let m = raw_cut_matrix(3, DEFAULT_NODE_BUDGET).unwrap();
        let b = m.b_rows();
        assert!(b.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn reduced_small_counts() {
        let expected = [1, 2, 5, 23];
        for n in 1..=4 {
            let m = compute_cut_matrix(n, true).unwrap();
            assert_eq!(m.len(), expected[n - 1], "n={n}");
            assert!(m.is_reduced());
        }
    }

    #[test]
    fn csv_round_trip_and_cache() {
        let m = compute_cut_matrix(3, true).unwrap();
        let text = m.to_csv();
        assert!(text.starts_with("A,B,C,AB,AC,BC,ABC\n"));
        assert_eq!(CutMatrix::from_csv(&text, 3, true).unwrap(), m);

        let dir = tempfile::tempdir().unwrap();
        let cache = CutCache::new(dir.path());
        assert!(cache.load(3).is_none());
        let built = cache.load_or_build(3).unwrap();
        assert_eq!(built, m);
        assert!(cache.path_for(3).exists());
        assert_eq!(cache.load(3).unwrap(), m);

        fs::write(cache.path_for(3), "A,B\n1,2\n").unwrap();
        assert!(cache.load(3).is_none());
        assert_eq!(cache.load_or_build(3).unwrap(), m);
    }

    #[test]
    fn csv_rejects_bad_entries() {
        assert!(CutMatrix::from_csv("A,B,AB\n1,0.3,0\n", 2, true).is_err());
        assert!(CutMatrix::from_csv("A,B\n1,0\n", 2, true).is_err());
        assert!(CutMatrix::from_csv("A,B,AB\n1,0\n", 2, true).is_err());
    }
}
