//! Reproducible benchmark instances from the four design factors
//! (size category, shape, locked chambers, density).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{rate_map, Instance, Job, Qualification, Tool};
use crate::recipe::check_chambers;

/// Tool-to-job proportion `|I| : |J|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    OneToFour,
    OneToOne,
    FourToOne,
    SixteenToOne,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::OneToOne, Shape::OneToFour, Shape::SixteenToOne, Shape::FourToOne];

    pub fn ratio(self) -> f64 {
        match self {
            Shape::OneToFour => 0.25,
            Shape::OneToOne => 1.0,
            Shape::FourToOne => 4.0,
            Shape::SixteenToOne => 16.0,
        }
    }

    fn parts(self) -> (u32, u32) {
        match self {
            Shape::OneToFour => (1, 4),
            Shape::OneToOne => (1, 1),
            Shape::FourToOne => (4, 1),
            Shape::SixteenToOne => (16, 1),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.parts();
        write!(f, "{a}:{b}")
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace(['x', '/'], ":");
        Shape::ALL
            .into_iter()
            .find(|sh| sh.to_string() == norm)
            .ok_or_else(|| Error::UnknownName { what: "shape", value: s.to_string(), expected: "1:4, 1:1, 4:1, 16:1" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GenParams {
    pub sizecat: u8,
    pub shape: Shape,
    pub locked: u8,
    pub density: u8,
    pub chambers: usize,
    pub seed: u64,
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        if self.sizecat > 3 {
            return Err(Error::Instance(format!("sizecat {} not in 0..=3", self.sizecat)));
        }
        if ![0, 3, 6, 9].contains(&self.locked) {
            return Err(Error::Instance(format!("locked {} not in {{0, 3, 6, 9}}", self.locked)));
        }
        if !(1..=3).contains(&self.density) {
            return Err(Error::Instance(format!("density {} not in 1..=3", self.density)));
        }
        if !(3..=5).contains(&self.chambers) {
            return Err(Error::Instance(format!("chambers {} not in 3..=5", self.chambers)));
        }
        check_chambers(self.chambers)
    }

    /// `(|I|, |J|)` with `|I| = round(sqrt(S · shape))`, `|J| = round(S / |I|)`, `S = 100 · 4^sizecat`.
    pub fn dimensions(&self) -> (usize, usize) {
        let s = 100.0 * 4f64.powi(self.sizecat as i32);
        let tools = (s * self.shape.ratio()).sqrt().round().max(1.0);
        let jobs = (s / tools).round().max(1.0);
        (tools as usize, jobs as usize)
    }

    pub fn pair_probability(&self) -> f64 {
        [0.25, 0.5, 0.75][self.density as usize - 1]
    }

    /// Instance name encoding every parameter, e.g. `sc0-sh1x1-l0-d2-n3-s7`.
    pub fn name(&self) -> String {
        let (a, b) = self.shape.parts();
        format!(
            "sc{}-sh{a}x{b}-l{}-d{}-n{}-s{}",
            self.sizecat, self.locked, self.density, self.chambers, self.seed
        )
    }

    /// Inverse of [`GenParams::name`].
    pub fn from_name(name: &str) -> Option<GenParams> {
        let mut p = GenParams {
            sizecat: 0,
            shape: Shape::OneToOne,
            locked: 0,
            density: 1,
            chambers: 3,
            seed: 0,
        };
        let parts: Vec<&str> = name.split('-').collect();
        if parts.len() != 6 {
            return None;
        }
        p.sizecat = parts[0].strip_prefix("sc")?.parse().ok()?;
        p.shape = parts[1].strip_prefix("sh")?.parse().ok()?;
        p.locked = parts[2].strip_prefix('l')?.parse().ok()?;
        p.density = parts[3].strip_prefix('d')?.parse().ok()?;
        p.chambers = parts[4].strip_prefix('n')?.parse().ok()?;
        p.seed = parts[5].strip_prefix('s')?.parse().ok()?;
        p.validate().ok()?;
        Some(p)
    }
}

fn draw_rate(rng: &mut ChaCha8Rng) -> f64 {
    // Log-uniform on [0.1, 1].
    10f64.powf(rng.gen_range(-1.0..=0.0))
}

pub fn generate(p: &GenParams) -> Result<Instance> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (num_tools, num_jobs) = p.dimensions();
    let n = p.chambers;
    let lock_prob = p.locked as f64 / 10.0;
    let pair_prob = p.pair_probability();

    let jobs: Vec<Job> =
        (0..num_jobs).map(|j| Job { id: format!("j{}", j + 1), demand: rng.gen_range(10..=100) as f64 }).collect();
    let tools: Vec<Tool> = (0..num_tools).map(|i| Tool { id: format!("t{}", i + 1) }).collect();

    // rates[j][i][c] > 0 marks a qualified chamber.
    let mut rates = vec![vec![vec![0.0; n]; num_tools]; num_jobs];
    for row in rates.iter_mut() {
        for pair in row.iter_mut() {
            if !rng.gen_bool(pair_prob) {
                continue;
            }
            for rate in pair.iter_mut() {
                let locked = rng.gen_bool(lock_prob);
                let r = draw_rate(&mut rng);
                if !locked {
                    *rate = r;
                }
            }
        }
    }

    // Repair: every job and every tool gets at least one qualified chamber.
    let qualified = |rates: &Vec<Vec<Vec<f64>>>, j: usize, i: usize| rates[j][i].iter().any(|&r| r > 0.0);
    for j in 0..num_jobs {
        if !(0..num_tools).any(|i| qualified(&rates, j, i)) {
            let i = rng.gen_range(0..num_tools);
            let c = rng.gen_range(0..n);
            rates[j][i][c] = draw_rate(&mut rng);
        }
    }
    for i in 0..num_tools {
        if !(0..num_jobs).any(|j| qualified(&rates, j, i)) {
            let j = rng.gen_range(0..num_jobs);
            let c = rng.gen_range(0..n);
            rates[j][i][c] = draw_rate(&mut rng);
        }
    }

    let mut qualifications = Vec::new();
    for (j, row) in rates.iter().enumerate() {
        for (i, pair) in row.iter().enumerate() {
            if pair.iter().any(|&r| r > 0.0) {
                qualifications.push(Qualification {
                    job: jobs[j].id.clone(),
                    tool: tools[i].id.clone(),
                    chamber_rates: rate_map(pair.iter().copied().enumerate().filter(|&(_, r)| r > 0.0)),
                });
            }
        }
    }

    Ok(Instance {
        name: p.name(),
        chambers: n,
        jobs,
        tools,
        qualifications,
        recipe_rate_overrides: Vec::new(),
    })
}
