//! Instance generation and loading.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::model::{BitVector, ProblemInstance};

const MAX_GRAPH_RETRIES: usize = 16;
const TARGET_AVERAGE_DEGREE: f64 = 3.0;
const EDGE_WEIGHT_RANGE: (f64, f64) = (1.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    RandomGaussian,
    GridLaplacian,
    FromFiles,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaRange {
    pub low: f64,
    pub high: f64,
}

impl Default for KappaRange {
    fn default() -> Self {
        Self { low: 0.8, high: 1.2 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstancePaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensing_matrix: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_covariance: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<PathBuf>,
    /// Per-channel dynamic ranges `Rᵢ`, converted with `κᵢ = 12/Rᵢ²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamic_ranges: Option<PathBuf>,
}

/// Declarative description of one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub kind: InstanceKind,
    /// Ignored for file-backed instances, as is `m`.
    #[serde(default)]
    pub d: usize,
    /// Ignored for grid Laplacians, which always have `m = d`.
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub kappa: KappaRange,
    /// `c` in `B = c·m`.
    #[serde(default = "default_budget_per_sensor")]
    pub budget_per_sensor: f64,
    /// Absolute budget; takes precedence over `budget_per_sensor`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paths: InstancePaths,
}

fn default_budget_per_sensor() -> f64 {
    2.0
}

impl InstanceSpec {
    pub fn new(kind: InstanceKind, d: usize, m: usize) -> Self {
        Self {
            kind,
            d,
            m,
            kappa: KappaRange::default(),
            budget_per_sensor: default_budget_per_sensor(),
            budget: None,
            seed: 0,
            paths: InstancePaths::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != InstanceKind::FromFiles && (self.d == 0 || self.m == 0) {
            return Err(Error::Config("d and m must be at least 1".into()));
        }
        let KappaRange { low, high } = self.kappa;
        if !(low > 0.0 && low <= high && high.is_finite()) {
            return Err(Error::Config(format!(
                "kappa range must satisfy 0 < low <= high, got [{low}, {high}]"
            )));
        }
        if !(self.budget_per_sensor >= 0.0 && self.budget_per_sensor.is_finite()) {
            return Err(Error::Config("budget_per_sensor must be nonnegative".into()));
        }
        if let Some(b) = self.budget {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::Config("budget must be nonnegative".into()));
            }
        }
        if self.kind == InstanceKind::FromFiles && self.paths.sensing_matrix.is_none() {
            return Err(Error::Config("from-files instances need paths.sensing_matrix".into()));
        }
        Ok(())
    }

    /// Reads a spec from TOML; relative paths resolve against the file's directory.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        if let Some(dir) = path.parent() {
            spec.paths.resolve_against(dir);
        }
        Ok(spec)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

impl InstancePaths {
    pub fn resolve_against(&mut self, dir: &Path) {
        for p in [
            &mut self.sensing_matrix,
            &mut self.prior_covariance,
            &mut self.kappa,
            &mut self.dynamic_ranges,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

pub fn generate(spec: &InstanceSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (sensing, prior) = match spec.kind {
        InstanceKind::RandomGaussian => {
            let h = DMatrix::from_fn(spec.m, spec.d, |_, _| rng.sample::<f64, _>(StandardNormal));
            (h, None)
        }
        InstanceKind::GridLaplacian => (grounded_laplacian(spec.d, &mut rng)?, None),
        InstanceKind::FromFiles => {
            let h = io::load_matrix(spec.paths.sensing_matrix.as_ref().expect("validated"))?;
            let prior = spec
                .paths
                .prior_covariance
                .as_ref()
                .map(io::load_matrix)
                .transpose()?;
            (h, prior)
        }
    };
    let m = sensing.nrows();
    let kappa = if let Some(p) = &spec.paths.kappa {
        io::load_vector(p)?
    } else if let Some(p) = &spec.paths.dynamic_ranges {
        ProblemInstance::kappa_from_ranges(&io::load_vector(p)?)?
    } else {
        sample_kappa(m, spec.kappa, &mut rng)
    };
    let budget = spec.budget.unwrap_or(spec.budget_per_sensor * m as f64);
    match prior {
        Some(p) => ProblemInstance::new(sensing, p, kappa, budget),
        None => ProblemInstance::with_identity_prior(sensing, kappa, budget),
    }
}

fn sample_kappa(m: usize, range: KappaRange, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(m, |_, _| {
        if range.high > range.low {
            rng.random_range(range.low..range.high)
        } else {
            range.low
        }
    })
}

/// Random connected weighted graph on `d + 1` nodes with average degree about
/// three and weights uniform on `[1, 10]`; node 0 is the slack and is removed.
pub fn grounded_laplacian(d: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let n = d + 1;
    for _ in 0..MAX_GRAPH_RETRIES {
        let edges = random_graph(n, rng);
        if !is_connected(n, &edges) {
            continue;
        }
        let mut lap = DMatrix::zeros(n, n);
        for &(a, b, w) in &edges {
            lap[(a, a)] += w;
            lap[(b, b)] += w;
            lap[(a, b)] -= w;
            lap[(b, a)] -= w;
        }
        return Ok(lap.view((1, 1), (d, d)).into_owned());
    }
    Err(Error::InvalidInstance(format!(
        "could not generate a connected graph on {n} nodes"
    )))
}

fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize, f64)> {
    let (lo, hi) = EDGE_WEIGHT_RANGE;
    let mut set = BTreeSet::new();
    // random spanning tree
    for v in 1..n {
        let u = rng.random_range(0..v);
        set.insert((u, v));
    }
    let target = ((TARGET_AVERAGE_DEGREE * n as f64) / 2.0).round() as usize;
    let max_edges = n * (n - 1) / 2;
    let target = target.min(max_edges);
    while set.len() < target {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            set.insert((a.min(b), a.max(b)));
        }
    }
    set.into_iter()
        .map(|(a, b)| (a, b, rng.random_range(lo..hi)))
        .collect()
}

fn is_connected(n: usize, edges: &[(usize, usize, f64)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b, _) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// `bᵢ = ⌊B/m⌋` for every channel.
pub fn uniform_allocation(instance: &ProblemInstance) -> BitVector {
    let m = instance.sensors();
    let per = (instance.budget() / m as f64 + 1e-12).floor().max(0.0) as u64;
    BitVector::from_integers(&vec![per; m])
}
