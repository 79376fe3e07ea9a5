//! Config-driven sweeps over measurement counts, states and noise seeds.
//!
//! Every run is a list of independent solves fanned out to a rayon pool and
//! collected in job order, so outputs do not depend on the thread count.

use std::fs;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{
    gell_mann_observables, mub, observables_to_projectors, BasisMetadata, ProjectorSet,
};
use crate::error::{Error, Result};
use crate::io::{format_float, write_json};
use crate::linalg::DensityMatrix;
use crate::sdp::{SolverSettings, SEARCH_DIRECTION};
use crate::states::{
    exact_probabilities, noisy_frequencies, random_density, random_pure, werner_state,
    MeasurementRecord, NoiseModel, RNG_ALGORITHM,
};
use crate::tomography::{
    default_cut, reconstruct_with_threshold, TomographyProblem, TomographyResult,
};
use crate::witness;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    /// Two parties of dimension `local_dim` each.
    Werner {
        beta: f64,
        local_dim: usize,
    },
    RandomPure {
        dim: usize,
    },
    RandomDensity {
        dim: usize,
        rank: usize,
    },
}

impl StateSpec {
    pub fn dim(&self) -> usize {
        match *self {
            StateSpec::Werner { local_dim, .. } => local_dim * local_dim,
            StateSpec::RandomPure { dim } | StateSpec::RandomDensity { dim, .. } => dim,
        }
    }

    pub fn build(&self, seed: u64) -> Result<DensityMatrix> {
        match *self {
            StateSpec::Werner { beta, local_dim } => werner_state(beta, local_dim),
            StateSpec::RandomPure { dim } => random_pure(dim, seed),
            StateSpec::RandomDensity { dim, rank } => random_density(dim, rank, seed),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Mub,
    GellMann,
}

impl BasisKind {
    pub fn build(&self, d: usize) -> Result<ProjectorSet> {
        match self {
            BasisKind::Mub => mub(d),
            BasisKind::GellMann => observables_to_projectors(&gell_mann_observables(d)?),
        }
    }
}

/// Experiment parameters. Unset fields take per-experiment defaults in
/// [`ExperimentConfig::resolve`]; manifests store the resolved form.
///
/// `counts` is the sweep grid: measured projectors for fig1 and custom,
/// measured classes for fig2, measured observables for fig4; unused by fig3.
/// `samples` is the number of noise seeds (fig1, custom), random states
/// (fig2, fig4) or random states per rank (fig3).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub counts: Option<Vec<usize>>,
    #[serde(default)]
    pub ranks: Option<Vec<usize>>,
    #[serde(default)]
    pub noise_level: Option<f64>,
    #[serde(default)]
    pub state: Option<StateSpec>,
    /// Werner parameter of the data injected in fig1 panels 2 and 3.
    #[serde(default)]
    pub inject_beta: Option<f64>,
    #[serde(default)]
    pub basis: Option<BasisKind>,
    #[serde(default)]
    pub witness_dims: Option<(usize, usize)>,
    #[serde(default)]
    pub threshold_factor: Option<f64>,
    #[serde(default)]
    pub epsilon_floor: Option<f64>,
    #[serde(default)]
    pub solver: Option<SolverSettings>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seed: None,
            samples: None,
            counts: None,
            ranks: None,
            noise_level: None,
            state: None,
            inject_beta: None,
            basis: None,
            witness_dims: None,
            threshold_factor: None,
            epsilon_floor: None,
            solver: None,
            output_dir: None,
        }
    }

    /// Fills unset fields with the defaults of the experiment and validates.
    pub fn resolve(&self) -> Result<Self> {
        let mut c = self.clone();
        let tight = SolverSettings {
            gap_tol: 1e-10,
            feas_tol: 1e-10,
            ..SolverSettings::default()
        };
        let (state, basis, samples, counts, noise, solver) = match c.experiment {
            ExperimentKind::Fig1 => (
                StateSpec::Werner {
                    beta: -0.8,
                    local_dim: 3,
                },
                BasisKind::Mub,
                20,
                (1..=30).map(|k| 3 * k).collect(),
                0.5,
                SolverSettings::default(),
            ),
            ExperimentKind::Fig2 => (
                StateSpec::RandomPure { dim: 32 },
                BasisKind::Mub,
                1,
                vec![1, 2, 3, 4, 5, 6, 9, 17, 33],
                0.0,
                tight,
            ),
            ExperimentKind::Fig3 => (
                StateSpec::RandomDensity { dim: 16, rank: 1 },
                BasisKind::Mub,
                10,
                vec![],
                0.0,
                tight,
            ),
            ExperimentKind::Fig4 => (
                StateSpec::RandomDensity { dim: 6, rank: 6 },
                BasisKind::GellMann,
                50,
                (1..=36).collect(),
                0.0,
                tight,
            ),
            ExperimentKind::Custom => {
                let state = c.state.ok_or_else(|| {
                    Error::InvalidInput("custom experiments need a `state`".into())
                })?;
                let basis = c.basis.unwrap_or(BasisKind::Mub);
                let total = basis.build(state.dim())?.len();
                (
                    state,
                    basis,
                    1,
                    (1..=total).collect(),
                    0.0,
                    SolverSettings::default(),
                )
            }
        };
        c.state.get_or_insert(state);
        c.basis.get_or_insert(basis);
        c.seed.get_or_insert(1);
        c.samples.get_or_insert(samples);
        c.counts.get_or_insert(counts);
        c.noise_level.get_or_insert(noise);
        c.threshold_factor
            .get_or_insert(crate::tomography::DEFAULT_THRESHOLD_FACTOR);
        c.epsilon_floor.get_or_insert(0.0);
        c.solver.get_or_insert(solver);
        if c.experiment == ExperimentKind::Fig1 {
            c.inject_beta.get_or_insert(0.8);
        }
        if c.experiment == ExperimentKind::Fig3 {
            c.ranks.get_or_insert(vec![1, 2, 4, 8, 16]);
        }
        if c.witness_dims.is_none()
            && matches!(
                c.experiment,
                ExperimentKind::Fig1 | ExperimentKind::Fig4 | ExperimentKind::Custom
            )
        {
            c.witness_dims = default_cut(c.state().dim());
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.samples() == 0 {
            return bad("samples must be at least 1".into());
        }
        let counts = self.counts();
        if counts.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("sweep grid {counts:?} is not strictly increasing"));
        }
        if counts.first() == Some(&0) {
            return bad("sweep grid entries must be positive".into());
        }
        NoiseModel::uniform(self.noise_level(), 0).validate()?;
        self.solver().validate()?;
        let (t, f) = (self.threshold_factor(), self.epsilon_floor());
        if t.is_nan() || t <= 0.0 || f.is_nan() || f < 0.0 {
            return bad("threshold factor must be positive and epsilon floor nonnegative".into());
        }
        let state = self.state();
        let d = state.dim();
        let expected = match self.experiment {
            ExperimentKind::Fig1 => Some(9),
            ExperimentKind::Fig2 => Some(32),
            ExperimentKind::Fig3 => Some(16),
            ExperimentKind::Fig4 => Some(6),
            ExperimentKind::Custom => None,
        };
        if let Some(e) = expected {
            if d != e {
                return bad(format!(
                    "{:?} runs in dimension {e}, got a state of dimension {d}",
                    self.experiment
                ));
            }
        }
        if let Some((a, b)) = self.witness_dims {
            if a * b != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: a * b,
                });
            }
        }
        if self.experiment == ExperimentKind::Fig1 {
            if !matches!(state, StateSpec::Werner { .. }) {
                return bad("fig1 needs a Werner state".into());
            }
            if !(-1.0..=1.0).contains(&self.inject_beta.unwrap_or(0.0)) {
                return bad("inject_beta outside [-1, 1]".into());
            }
        }
        if self.experiment == ExperimentKind::Fig3 {
            let ranks = self.ranks.as_deref().unwrap_or(&[]);
            if ranks.is_empty()
                || ranks.iter().any(|&r| r == 0 || r > d)
                || ranks.windows(2).any(|w| w[0] >= w[1])
            {
                return bad(format!(
                    "ranks {ranks:?} must be strictly increasing within 1..={d}"
                ));
            }
        }
        let basis = self.basis();
        let total = match self.experiment {
            ExperimentKind::Fig2 | ExperimentKind::Fig4 => basis.build(d)?.num_classes(),
            ExperimentKind::Fig3 => usize::MAX,
            _ => basis.build(d)?.len(),
        };
        if counts.last().is_some_and(|&c| c > total) {
            return bad(format!(
                "sweep grid exceeds the {total} available measurements"
            ));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(1)
    }

    pub fn counts(&self) -> &[usize] {
        self.counts.as_deref().unwrap_or(&[])
    }

    pub fn noise_level(&self) -> f64 {
        self.noise_level.unwrap_or(0.0)
    }

    pub fn state(&self) -> StateSpec {
        self.state.unwrap_or(StateSpec::RandomPure { dim: 2 })
    }

    pub fn basis(&self) -> BasisKind {
        self.basis.unwrap_or(BasisKind::Mub)
    }

    pub fn threshold_factor(&self) -> f64 {
        self.threshold_factor
            .unwrap_or(crate::tomography::DEFAULT_THRESHOLD_FACTOR)
    }

    pub fn epsilon_floor(&self) -> f64 {
        self.epsilon_floor.unwrap_or(0.0)
    }

    pub fn solver(&self) -> SolverSettings {
        self.solver.unwrap_or_default()
    }

    /// Noise model for sample `s`; sample seeds are consecutive from `seed`.
    pub fn noise(&self, s: usize) -> NoiseModel {
        if self.noise_level() == 0.0 {
            NoiseModel::none()
        } else {
            NoiseModel::uniform(self.noise_level(), self.seed() + s as u64)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }
}

/// One CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(file_name: &str, header: &[&str]) -> Self {
        Self {
            file_name: file_name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Numeric values of a column, `None` for a missing name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r[j].as_f64()).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(&self.header).map_err(to_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))
                .map_err(to_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub tables: Vec<Table>,
    pub summary: serde_json::Value,
    pub construction: BasisMetadata,
    /// State and noise seeds used, in job order.
    pub seeds: Vec<u64>,
    pub notes: Vec<String>,
}

impl ExperimentOutput {
    pub fn table(&self, file_name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.file_name == file_name)
    }
}

#[derive(Serialize)]
struct Environment {
    package: &'static str,
    version: &'static str,
    rng: &'static str,
    search_direction: &'static str,
    os: &'static str,
    arch: &'static str,
}

#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub solver: SolverSettings,
    pub construction: BasisMetadata,
    pub environment: serde_json::Value,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

/// Runs the experiment named by the config on a pool of `threads` workers
/// (0 lets rayon choose).
pub fn run(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    let c = config.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| match c.experiment {
        ExperimentKind::Fig1 => run_fig1(&c),
        ExperimentKind::Fig2 => run_fig2(&c),
        ExperimentKind::Fig3 => run_fig3(&c),
        ExperimentKind::Fig4 => run_fig4(&c),
        ExperimentKind::Custom => run_custom(&c),
    })
}

/// Writes the CSVs, `summary.json` and `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    for t in &out.tables {
        fs::write(dir.join(&t.file_name), t.to_csv()?)?;
    }
    write_json(&dir.join("summary.json"), &out.summary)?;
    let env = Environment {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        rng: RNG_ALGORITHM,
        search_direction: SEARCH_DIRECTION,
        os: std::env::consts::OS,
        arch: std::env::consts::ARCH,
    };
    let mut outputs: Vec<String> = out.tables.iter().map(|t| t.file_name.clone()).collect();
    outputs.push("summary.json".into());
    let manifest = Manifest {
        config: out.config.clone(),
        seeds: out.seeds.clone(),
        solver: out.config.solver(),
        construction: out.construction.clone(),
        environment: serde_json::to_value(env)?,
        outputs,
        notes: out.notes.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

/// Solves one problem built from the first `count` records of `records`
/// (or the given record subset) and returns the result with diagnostics.
fn solve_records(
    c: &ExperimentConfig,
    ps: &ProjectorSet,
    records: Vec<MeasurementRecord>,
    truth: &DensityMatrix,
) -> Result<TomographyResult> {
    let tp = TomographyProblem::new(ps.clone(), records)?
        .with_epsilon_floor(c.epsilon_floor())?
        .with_witness_dims(c.witness_dims)?;
    reconstruct_with_threshold(&tp, &c.solver(), Some(truth), c.threshold_factor())
}

struct SweepRun {
    purity: f64,
    fidelity: f64,
    trace_distance: f64,
    entanglement: f64,
    flagged: Vec<usize>,
}

impl SweepRun {
    fn from_result(r: &TomographyResult) -> Self {
        let d = r.diagnostics.expect("reference is always given");
        Self {
            purity: d.purity,
            fidelity: d.fidelity,
            trace_distance: d.trace_distance,
            entanglement: d.witnessed_entanglement.unwrap_or(0.0),
            flagged: r.incompatible.clone(),
        }
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Sample mean and its standard error.
fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs.iter().copied());
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, (var / xs.len() as f64).sqrt())
}

/// Runs per sweep point, keyed by count.
type SweepGroups = Vec<(usize, Vec<SweepRun>)>;

const SWEEP_HEADER: [&str; 6] = [
    "count",
    "purity",
    "fidelity",
    "trace_distance",
    "entanglement",
    "n_flagged",
];

/// Projector-count sweep of one state against several noise seeds, with an
/// optional range of records replaced by data from `injected`.
fn projector_sweep(
    c: &ExperimentConfig,
    ps: &ProjectorSet,
    truth: &DensityMatrix,
    injected: Option<(&DensityMatrix, Range<usize>)>,
) -> Result<(SweepGroups, Vec<u64>)> {
    let mut probs = exact_probabilities(truth, ps)?;
    if let Some((other, range)) = &injected {
        let q = exact_probabilities(other, ps)?;
        probs[range.clone()].copy_from_slice(&q[range.clone()]);
    }
    let samples = c.samples();
    let streams: Vec<Vec<MeasurementRecord>> = (0..samples)
        .map(|s| noisy_frequencies(&probs, &c.noise(s)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = c
        .counts()
        .iter()
        .flat_map(|&n| (0..samples).map(move |s| (n, s)))
        .collect();
    let runs: Vec<SweepRun> = jobs
        .par_iter()
        .map(|&(n, s)| {
            solve_records(c, ps, streams[s][..n].to_vec(), truth).map(|r| SweepRun::from_result(&r))
        })
        .collect::<Result<_>>()?;
    let mut grouped = Vec::new();
    let mut it = runs.into_iter();
    for &n in c.counts() {
        grouped.push((n, it.by_ref().take(samples).collect()));
    }
    let seeds = (0..samples).map(|s| c.noise(s).seed).collect();
    Ok((grouped, seeds))
}

fn sweep_table(file_name: &str, grouped: &[(usize, Vec<SweepRun>)]) -> Table {
    let mut t = Table::new(file_name, &SWEEP_HEADER);
    for (n, runs) in grouped {
        t.rows.push(vec![
            Cell::Int(*n),
            Cell::Float(mean(runs.iter().map(|r| r.purity))),
            Cell::Float(mean(runs.iter().map(|r| r.fidelity))),
            Cell::Float(mean(runs.iter().map(|r| r.trace_distance))),
            Cell::Float(mean(runs.iter().map(|r| r.entanglement))),
            Cell::Float(mean(runs.iter().map(|r| r.flagged.len() as f64))),
        ]);
    }
    t
}

/// Two-qutrit Werner sweep: a clean panel and two panels whose class 2 or
/// class 9 carries data from a second Werner state.
pub fn run_fig1(c: &ExperimentConfig) -> Result<ExperimentOutput> {
    let state = c.state();
    let ps = c.basis().build(state.dim())?;
    let truth = state.build(c.seed())?;
    let local_dim = match state {
        StateSpec::Werner { local_dim, .. } => local_dim,
        _ => return Err(Error::InvalidInput("fig1 needs a Werner state".into())),
    };
    let other = werner_state(c.inject_beta.unwrap_or(0.8), local_dim)?;
    let last = ps.num_classes() - 1;
    let panels: [(&str, Option<Range<usize>>); 3] = [
        ("clean", None),
        ("inject_class_2", Some(ps.class_range(2))),
        ("inject_class_last", Some(ps.class_range(last))),
    ];

    let mut tables = Vec::new();
    let mut runs_table = Table::new(
        "fig1_runs.csv",
        &[
            "panel",
            "count",
            "seed",
            "purity",
            "fidelity",
            "trace_distance",
            "entanglement",
            "n_flagged",
            "n_flagged_in_range",
        ],
    );
    let mut panel_summaries = serde_json::Map::new();
    let mut seeds = Vec::new();
    for (name, range) in panels {
        let (grouped, s) = projector_sweep(c, &ps, &truth, range.clone().map(|r| (&other, r)))?;
        seeds = s;
        let in_range = |l: &usize| range.as_ref().is_some_and(|r| r.contains(l));
        let (mut flags, mut flags_in_range) = (0usize, 0usize);
        for (n, runs) in &grouped {
            for (k, r) in runs.iter().enumerate() {
                let hits = r.flagged.iter().filter(|l| in_range(l)).count();
                // flags are attributed once the injected class is fully measured
                if range.as_ref().is_none_or(|rg| *n >= rg.end) {
                    flags += r.flagged.len();
                    flags_in_range += hits;
                }
                runs_table.rows.push(vec![
                    Cell::Text(name.into()),
                    Cell::Int(*n),
                    Cell::Int(seeds[k] as usize),
                    Cell::Float(r.purity),
                    Cell::Float(r.fidelity),
                    Cell::Float(r.trace_distance),
                    Cell::Float(r.entanglement),
                    Cell::Int(r.flagged.len()),
                    Cell::Int(hits),
                ]);
            }
        }
        let table = sweep_table(&format!("fig1_{name}.csv"), &grouped);
        let final_row = table.rows.last().cloned().unwrap_or_default();
        panel_summaries.insert(
            name.into(),
            serde_json::json!({
                "injected_range": range.as_ref().map(|r| [r.start, r.end - 1]),
                "final_count": final_row.first().and_then(Cell::as_f64),
                "final_fidelity": final_row.get(2).and_then(Cell::as_f64),
                "final_entanglement": final_row.get(4).and_then(Cell::as_f64),
                "flags": flags,
                "flags_in_range": flags_in_range,
                "fraction_in_range": if flags > 0 { Some(flags_in_range as f64 / flags as f64) } else { None },
            }),
        );
        tables.push(table);
    }
    tables.push(runs_table);
    let truth_entanglement = match c.witness_dims {
        Some(dims) => Some(witness::entanglement_value(&truth, dims)?),
        None => None,
    };
    Ok(ExperimentOutput {
        config: c.clone(),
        tables,
        summary: serde_json::json!({
            "experiment": "fig1",
            "truth_purity": crate::linalg::purity(&truth),
            "truth_entanglement": truth_entanglement,
            "panels": panel_summaries,
        }),
        construction: ps.metadata().clone(),
        seeds,
        notes: vec!["lambda is 0-based; injected ranges are whole MUB classes".into()],
    })
}

/// Sweep over complete classes for random pure states; reports fidelity and
/// trace distance only.
pub fn run_fig2(c: &ExperimentConfig) -> Result<ExperimentOutput> {
    let state = c.state();
    let d = state.dim();
    let ps = c.basis().build(d)?;
    let samples = c.samples();
    let seeds: Vec<u64> = (0..samples).map(|s| c.seed() + s as u64).collect();
    let truths: Vec<DensityMatrix> = seeds
        .iter()
        .map(|&s| state.build(s))
        .collect::<Result<_>>()?;
    let streams: Vec<Vec<MeasurementRecord>> = truths
        .iter()
        .enumerate()
        .map(|(s, t)| noisy_frequencies(&exact_probabilities(t, &ps)?, &c.noise(s)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = c
        .counts()
        .iter()
        .flat_map(|&k| (0..samples).map(move |s| (k, s)))
        .collect();
    let no_witness = ExperimentConfig {
        witness_dims: None,
        ..c.clone()
    };
    let runs: Vec<SweepRun> = jobs
        .par_iter()
        .map(|&(k, s)| {
            let n = ps.class_range(k - 1).end;
            solve_records(&no_witness, &ps, streams[s][..n].to_vec(), &truths[s])
                .map(|r| SweepRun::from_result(&r))
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        "fig2.csv",
        &["count", "classes", "purity", "fidelity", "trace_distance"],
    );
    for (i, &k) in c.counts().iter().enumerate() {
        let group = &runs[i * samples..(i + 1) * samples];
        t.rows.push(vec![
            Cell::Int(ps.class_range(k - 1).end),
            Cell::Int(k),
            Cell::Float(mean(group.iter().map(|r| r.purity))),
            Cell::Float(mean(group.iter().map(|r| r.fidelity))),
            Cell::Float(mean(group.iter().map(|r| r.trace_distance))),
        ]);
    }
    let td = t.column("trace_distance").unwrap_or_default();
    Ok(ExperimentOutput {
        config: c.clone(),
        summary: serde_json::json!({
            "experiment": "fig2",
            "classes": c.counts(),
            "trace_distance": td,
        }),
        tables: vec![t],
        construction: ps.metadata().clone(),
        seeds,
        notes: vec![
            "multipartite entanglement is not witnessed; fidelity and trace distance replace it"
                .into(),
        ],
    })
}

/// `Tr|rho - e| < 1e-6` counts as a faithful reconstruction.
pub const FIG3_THRESHOLD: f64 = 1e-6;

/// Smallest number of leading classes reconstructing `truth` to the threshold.
fn classes_to_reconstruct(
    c: &ExperimentConfig,
    ps: &ProjectorSet,
    truth: &DensityMatrix,
) -> Result<usize> {
    let probs = exact_probabilities(truth, ps)?;
    let records = noisy_frequencies(&probs, &NoiseModel::none())?;
    let ok = |k: usize| -> Result<bool> {
        let n = ps.class_range(k - 1).end;
        let r = solve_records(c, ps, records[..n].to_vec(), truth)?;
        Ok(2.0 * r.diagnostics.expect("reference given").trace_distance < FIG3_THRESHOLD)
    };
    let total = ps.num_classes();
    if !ok(total)? {
        return Err(Error::Numerical(
            "complete noiseless data missed the reconstruction threshold".into(),
        ));
    }
    let (mut lo, mut hi) = (1, total);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Classes needed for a faithful reconstruction of random states, per rank.
pub fn run_fig3(c: &ExperimentConfig) -> Result<ExperimentOutput> {
    let d = c.state().dim();
    let ps = c.basis().build(d)?;
    let ranks = c.ranks.clone().unwrap_or_default();
    let samples = c.samples();
    let no_witness = ExperimentConfig {
        witness_dims: None,
        ..c.clone()
    };
    let jobs: Vec<(usize, u64)> = ranks
        .iter()
        .enumerate()
        .flat_map(|(i, &r)| (0..samples).map(move |s| (r, c.seed() + (i * samples + s) as u64)))
        .collect();
    let found: Vec<usize> = jobs
        .par_iter()
        .map(|&(rank, seed)| {
            classes_to_reconstruct(&no_witness, &ps, &random_density(d, rank, seed)?)
        })
        .collect::<Result<_>>()?;
    let mut summary_rows = Table::new("fig3.csv", &["rank", "mean", "min", "max"]);
    let mut raw = Table::new(
        "fig3_samples.csv",
        &["rank", "seed", "classes", "measurements"],
    );
    for (i, &rank) in ranks.iter().enumerate() {
        let group: Vec<usize> = found[i * samples..(i + 1) * samples]
            .iter()
            .map(|&k| k * d)
            .collect();
        for (s, &m) in group.iter().enumerate() {
            raw.rows.push(vec![
                Cell::Int(rank),
                Cell::Int(jobs[i * samples + s].1 as usize),
                Cell::Int(m / d),
                Cell::Int(m),
            ]);
        }
        summary_rows.rows.push(vec![
            Cell::Int(rank),
            Cell::Float(mean(group.iter().map(|&m| m as f64))),
            Cell::Int(*group.iter().min().unwrap_or(&0)),
            Cell::Int(*group.iter().max().unwrap_or(&0)),
        ]);
    }
    let means = summary_rows.column("mean").unwrap_or_default();
    Ok(ExperimentOutput {
        config: c.clone(),
        summary: serde_json::json!({
            "experiment": "fig3",
            "ranks": ranks,
            "mean_measurements": means,
            "spearman": spearman(&ranks.iter().map(|&r| r as f64).collect::<Vec<_>>(), &means),
            "threshold": FIG3_THRESHOLD,
        }),
        tables: vec![summary_rows, raw],
        construction: ps.metadata().clone(),
        seeds: jobs.iter().map(|j| j.1).collect(),
        notes: vec![
            "classes are added in construction order; counts found by binary search".into(),
        ],
    })
}

/// Average ranks with ties sharing the mean position.
fn ranks_of(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of the ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks_of(x), ranks_of(y));
    let (mx, my) = (mean(rx.iter().copied()), mean(ry.iter().copied()));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Qubit-qutrit states measured on the eigenprojectors of the first `N`
/// SU(6) observables.
pub fn run_fig4(c: &ExperimentConfig) -> Result<ExperimentOutput> {
    let state = c.state();
    let d = state.dim();
    let ps = c.basis().build(d)?;
    let dims = c
        .witness_dims
        .ok_or_else(|| Error::InvalidInput("fig4 needs witness dims".into()))?;
    let samples = c.samples();
    let seeds: Vec<u64> = (0..samples).map(|s| c.seed() + s as u64).collect();
    let truths: Vec<DensityMatrix> = seeds
        .iter()
        .map(|&s| state.build(s))
        .collect::<Result<_>>()?;
    let truth_e: Vec<f64> = truths
        .par_iter()
        .map(|t| witness::entanglement_value(t, dims))
        .collect::<Result<_>>()?;
    let streams: Vec<Vec<MeasurementRecord>> = truths
        .iter()
        .enumerate()
        .map(|(s, t)| noisy_frequencies(&exact_probabilities(t, &ps)?, &c.noise(s)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = c
        .counts()
        .iter()
        .flat_map(|&n| (0..samples).map(move |s| (n, s)))
        .collect();
    let runs: Vec<SweepRun> = jobs
        .par_iter()
        .map(|&(n, s)| {
            let end = ps.class_range(n - 1).end;
            solve_records(c, &ps, streams[s][..end].to_vec(), &truths[s])
                .map(|r| SweepRun::from_result(&r))
        })
        .collect::<Result<_>>()?;
    let entangled: Vec<usize> = (0..samples).filter(|&s| truth_e[s] < 0.0).collect();
    let mut t = Table::new(
        "fig4.csv",
        &[
            "n",
            "entanglement_fraction",
            "fraction_stderr",
            "trace_distance",
            "n_entangled",
        ],
    );
    for (i, &n) in c.counts().iter().enumerate() {
        let group = &runs[i * samples..(i + 1) * samples];
        let fractions: Vec<f64> = entangled
            .iter()
            .map(|&s| group[s].entanglement / truth_e[s])
            .collect();
        let (m, se) = mean_stderr(&fractions);
        t.rows.push(vec![
            Cell::Int(n),
            Cell::Float(m),
            Cell::Float(se),
            Cell::Float(mean(group.iter().map(|r| r.trace_distance))),
            Cell::Int(entangled.len()),
        ]);
    }
    Ok(ExperimentOutput {
        config: c.clone(),
        summary: serde_json::json!({
            "experiment": "fig4",
            "states": samples,
            "entangled_states": entangled.len(),
            "observables": c.counts(),
            "entanglement_fraction": t.column("entanglement_fraction"),
            "trace_distance": t.column("trace_distance"),
        }),
        tables: vec![t],
        construction: ps.metadata().clone(),
        seeds,
        notes: vec![
            "states with no witnessed entanglement are excluded from the fraction mean".into(),
        ],
    })
}

/// Projector-count sweep of any supported state and basis.
pub fn run_custom(c: &ExperimentConfig) -> Result<ExperimentOutput> {
    let state = c.state();
    let ps = c.basis().build(state.dim())?;
    let truth = state.build(c.seed())?;
    let (grouped, seeds) = projector_sweep(c, &ps, &truth, None)?;
    let table = sweep_table("custom.csv", &grouped);
    Ok(ExperimentOutput {
        config: c.clone(),
        summary: serde_json::json!({
            "experiment": "custom",
            "counts": c.counts(),
            "fidelity": table.column("fidelity"),
            "trace_distance": table.column("trace_distance"),
        }),
        tables: vec![table],
        construction: ps.metadata().clone(),
        seeds,
        notes: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        let err =
            serde_json::from_str::<ExperimentConfig>(r#"{"experiment": "fig1", "colour": 1}"#);
        assert!(err.is_err());
        let ok: ExperimentConfig =
            serde_json::from_str(r#"{"experiment": "fig3", "samples": 2}"#).unwrap();
        assert_eq!(ok.samples, Some(2));
    }

    #[test]
    fn resolve_fills_defaults_and_validates() {
        let c = ExperimentConfig::new(ExperimentKind::Fig1)
            .resolve()
            .unwrap();
        assert_eq!(c.samples(), 20);
        assert_eq!(c.witness_dims, Some((3, 3)));
        assert_eq!(c.counts().last(), Some(&90));
        assert_eq!(c.resolve().unwrap(), c);

        let mut bad = ExperimentConfig::new(ExperimentKind::Fig1);
        bad.counts = Some(vec![3, 3]);
        assert!(bad.resolve().is_err());
        bad.counts = Some(vec![91]);
        assert!(bad.resolve().is_err());
        bad.counts = None;
        bad.samples = Some(0);
        assert!(bad.resolve().is_err());
        let mut wrong_dim = ExperimentConfig::new(ExperimentKind::Fig2);
        wrong_dim.state = Some(StateSpec::RandomPure { dim: 16 });
        assert!(wrong_dim.resolve().is_err());
        assert!(ExperimentConfig::new(ExperimentKind::Custom)
            .resolve()
            .is_err());
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(ranks_of(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn custom_sweep_recovers_a_qubit() {
        let mut c = ExperimentConfig::new(ExperimentKind::Custom);
        c.state = Some(StateSpec::RandomDensity { dim: 2, rank: 2 });
        let out = run(&c, 1).unwrap();
        let td = out
            .table("custom.csv")
            .unwrap()
            .column("trace_distance")
            .unwrap();
        assert_eq!(td.len(), 6);
        assert!(td[5] < 1e-6);
        let csv = out.tables[0].to_csv().unwrap();
        assert!(csv.starts_with("count,purity,fidelity,trace_distance,entanglement,n_flagged\n1,"));
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let mut c = ExperimentConfig::new(ExperimentKind::Fig1);
        c.counts = Some(vec![9, 27]);
        c.samples = Some(3);
        let a = run(&c, 1).unwrap();
        let b = run(&c, 3).unwrap();
        assert_eq!(a.tables, b.tables);
        assert_eq!(a.summary, b.summary);
    }
}
