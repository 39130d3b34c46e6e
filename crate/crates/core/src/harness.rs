//! Baseline-versus-GA experiment: configuration, the two training arms,
//! feature classification and report files.
//!
//! The baseline arm trains `baseline_restarts` independent stacks by plain
//! backpropagation and keeps the one with the lowest top-layer RMSE. The GA
//! arm trains a single stack with the population trainer under the same
//! total number of SGD updates. Fitness evaluations are not counted against
//! the budget.
//!
//! Random streams fork from the master seed as `"eval-subset"`,
//! `"baseline"`, `"ga"` and `"classifier"`, so the arms never share draws.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::backprop::{history_to_csv, BackpropConfig, GenerationRecord};
use crate::classifier::{train_classifier, ClassifierConfig};
use crate::data::{load_labeled, LabeledDataset};
use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::numerics::{RandomStream, Vector};
use crate::stack::{train_stack, DeepStack, LayerTrainer, StackResult};

pub const DESK_TRAIN_SUBSET: usize = 5_000;
pub const DESK_TEST_SUBSET: usize = 1_000;
pub const DESK_ARCHITECTURE: [usize; 3] = [784, 64, 32];
pub const DESK_BUDGET: u64 = 40_000;
/// Loss is averaged over components, so step sizes are ~d times larger than
/// for a summed loss; 60 on 784 inputs is ~0.077 per component.
pub const DESK_LEARNING_RATE: f64 = 60.0;

pub const CLASSIFIER_NOTE: &str = "classifier: multinomial logistic regression (softmax) stands in for an \
RBF-kernel SVM, whose hyperparameters are unknown; the identical configuration is applied to both arms, \
so only the relative errors are meaningful";
pub const BUDGET_NOTE: &str = "budget: both arms receive the same number of SGD updates; fitness \
evaluations in the GA arm are uncounted overhead, so equal updates do not mean equal wall-clock";

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    /// Input width first.
    pub architecture: Vec<usize>,
    pub baseline_restarts: usize,
    /// SGD updates per arm, summed over all layers (and restarts).
    pub budget_total_updates: u64,
    pub population_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub updates_per_survivor_per_generation: Option<u64>,
    /// SGD step size for both arms. `None` picks the scale's default.
    pub learning_rate: Option<f64>,
    pub batch_size: usize,
    pub fitness_eval_sample_count: usize,
    /// Use only the first N training samples.
    pub train_subset: Option<usize>,
    /// Use only the first N test samples.
    pub test_subset: Option<usize>,
    /// Replace subsets, architecture and budget with the desk preset.
    pub desk_scale: bool,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub classifier_epochs: usize,
    pub classifier_learning_rate: f64,
    pub classifier_batch_size: usize,
    pub classifier_standardize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ga = GaConfig::default();
        let clf = ClassifierConfig::default();
        let mnist = PathBuf::from("data/mnist");
        ExperimentConfig {
            train_images: mnist.join("train-images-idx3-ubyte"),
            train_labels: mnist.join("train-labels-idx1-ubyte"),
            test_images: mnist.join("t10k-images-idx3-ubyte"),
            test_labels: mnist.join("t10k-labels-idx1-ubyte"),
            architecture: vec![784, 500, 250, 100, 50],
            baseline_restarts: 10,
            budget_total_updates: 1_200_000,
            population_size: ga.population_size,
            crossover_rate: ga.crossover_rate,
            mutation_rate: ga.mutation_rate,
            updates_per_survivor_per_generation: ga.updates_per_survivor_per_generation,
            learning_rate: None,
            batch_size: ga.batch_size,
            fitness_eval_sample_count: ga.fitness_eval_sample_count,
            train_subset: None,
            test_subset: None,
            desk_scale: false,
            output_dir: PathBuf::from("out"),
            seed: 0,
            classifier_epochs: clf.epochs,
            classifier_learning_rate: clf.learning_rate,
            classifier_batch_size: clf.batch_size,
            classifier_standardize: clf.standardize,
        }
    }
}

const KEYS: &[&str] = &[
    "train_images",
    "train_labels",
    "test_images",
    "test_labels",
    "architecture",
    "baseline_restarts",
    "budget_total_updates",
    "population_size",
    "crossover_rate",
    "mutation_rate",
    "updates_per_survivor_per_generation",
    "learning_rate",
    "batch_size",
    "fitness_eval_sample_count",
    "train_subset",
    "test_subset",
    "desk_scale",
    "output_dir",
    "seed",
    "classifier_epochs",
    "classifier_learning_rate",
    "classifier_batch_size",
    "classifier_standardize",
];

impl ExperimentConfig {
    /// Parses `key = value` lines. `#` starts a comment; blank lines are
    /// ignored; unset keys keep their defaults. Optional values accept
    /// `none` (subsets) or `auto` (updates per survivor, learning rate).
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(first) = seen.insert(key.to_string(), n + 1) {
                return Err(Error::InvalidConfig(format!(
                    "line {}: `{key}` already set on line {first}",
                    n + 1
                )));
            }
            cfg.set(key, value)
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ExperimentConfig::parse(&fs::read_to_string(path)?)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("`{key}`: cannot parse `{v}`"))
        }
        fn flag(key: &str, v: &str) -> std::result::Result<bool, String> {
            match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(format!("`{key}`: expected true or false, got `{v}`")),
            }
        }
        fn optional<T: std::str::FromStr>(
            key: &str,
            v: &str,
            none: &str,
        ) -> std::result::Result<Option<T>, String> {
            if v == none {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        match key {
            "train_images" => self.train_images = PathBuf::from(value),
            "train_labels" => self.train_labels = PathBuf::from(value),
            "test_images" => self.test_images = PathBuf::from(value),
            "test_labels" => self.test_labels = PathBuf::from(value),
            "architecture" => {
                self.architecture = value
                    .split(',')
                    .map(|w| num::<usize>(key, w.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "baseline_restarts" => self.baseline_restarts = num(key, value)?,
            "budget_total_updates" => self.budget_total_updates = num(key, value)?,
            "population_size" => self.population_size = num(key, value)?,
            "crossover_rate" => self.crossover_rate = num(key, value)?,
            "mutation_rate" => self.mutation_rate = num(key, value)?,
            "updates_per_survivor_per_generation" => {
                self.updates_per_survivor_per_generation = optional(key, value, "auto")?
            }
            "learning_rate" => self.learning_rate = optional(key, value, "auto")?,
            "batch_size" => self.batch_size = num(key, value)?,
            "fitness_eval_sample_count" => self.fitness_eval_sample_count = num(key, value)?,
            "train_subset" => self.train_subset = optional(key, value, "none")?,
            "test_subset" => self.test_subset = optional(key, value, "none")?,
            "desk_scale" => self.desk_scale = flag(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "classifier_epochs" => self.classifier_epochs = num(key, value)?,
            "classifier_learning_rate" => self.classifier_learning_rate = num(key, value)?,
            "classifier_batch_size" => self.classifier_batch_size = num(key, value)?,
            "classifier_standardize" => self.classifier_standardize = flag(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Every key with its current value, in a form `parse` accepts.
    pub fn render(&self) -> String {
        let opt = |v: Option<usize>| v.map_or("none".to_string(), |n| n.to_string());
        let arch: Vec<String> = self.architecture.iter().map(usize::to_string).collect();
        let values = [
            self.train_images.display().to_string(),
            self.train_labels.display().to_string(),
            self.test_images.display().to_string(),
            self.test_labels.display().to_string(),
            arch.join(","),
            self.baseline_restarts.to_string(),
            self.budget_total_updates.to_string(),
            self.population_size.to_string(),
            self.crossover_rate.to_string(),
            self.mutation_rate.to_string(),
            self.updates_per_survivor_per_generation
                .map_or("auto".to_string(), |n| n.to_string()),
            self.learning_rate
                .map_or("auto".to_string(), |v| v.to_string()),
            self.batch_size.to_string(),
            self.fitness_eval_sample_count.to_string(),
            opt(self.train_subset),
            opt(self.test_subset),
            self.desk_scale.to_string(),
            self.output_dir.display().to_string(),
            self.seed.to_string(),
            self.classifier_epochs.to_string(),
            self.classifier_learning_rate.to_string(),
            self.classifier_batch_size.to_string(),
            self.classifier_standardize.to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// The configuration actually run: the desk preset applied if enabled.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut c = self.clone();
        if c.desk_scale {
            c.train_subset = Some(DESK_TRAIN_SUBSET);
            c.test_subset = Some(DESK_TEST_SUBSET);
            c.architecture = DESK_ARCHITECTURE.to_vec();
            c.budget_total_updates = DESK_BUDGET;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.baseline_restarts == 0 {
            return Err(Error::InvalidConfig(
                "baseline_restarts must be at least 1".into(),
            ));
        }
        if self.architecture.len() < 2 || self.architecture.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "architecture needs at least 2 positive widths, got {:?}",
                self.architecture
            )));
        }
        if self.train_subset == Some(0) || self.test_subset == Some(0) {
            return Err(Error::InvalidConfig(
                "subsets must be at least 1 sample".into(),
            ));
        }
        self.ga_config()?.validate()?;
        self.backprop_config(1).validate()?;
        self.classifier_config(0).validate()
    }

    /// Explicit learning rate, else the desk or full-scale default.
    pub fn effective_learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or(if self.desk_scale {
            DESK_LEARNING_RATE
        } else {
            GaConfig::default().learning_rate
        })
    }

    pub fn layer_count(&self) -> u64 {
        self.architecture.len() as u64 - 1
    }

    /// Updates each baseline restart gets, rounded down to a multiple of the
    /// layer count.
    pub fn baseline_updates_per_restart(&self) -> u64 {
        let layers = self.layer_count().max(1);
        self.budget_total_updates / self.baseline_restarts as u64 / layers * layers
    }

    /// Total updates the baseline arm spends; the GA arm gets the same.
    pub fn arm_budget(&self) -> u64 {
        self.baseline_updates_per_restart() * self.baseline_restarts as u64
    }

    pub fn ga_config(&self) -> Result<GaConfig> {
        Ok(GaConfig {
            population_size: self.population_size,
            crossover_rate: self.crossover_rate,
            mutation_rate: self.mutation_rate,
            updates_per_survivor_per_generation: self.updates_per_survivor_per_generation,
            learning_rate: self.effective_learning_rate(),
            batch_size: self.batch_size,
            fitness_eval_sample_count: self.fitness_eval_sample_count,
            budget_total_updates: self.arm_budget().max(1),
            seed: self.seed,
        })
    }

    pub fn backprop_config(&self, budget: u64) -> BackpropConfig {
        BackpropConfig {
            learning_rate: self.effective_learning_rate(),
            batch_size: self.batch_size,
            budget_total_updates: budget,
        }
    }

    pub fn classifier_config(&self, seed: u64) -> ClassifierConfig {
        ClassifierConfig {
            classes: crate::data::NUM_CLASSES,
            epochs: self.classifier_epochs,
            learning_rate: self.classifier_learning_rate,
            batch_size: self.classifier_batch_size,
            standardize: self.classifier_standardize,
            seed,
        }
    }
}

/// Loaded and subset data plus the fixed evaluation indices.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Training-set indices used to score layers in both arms.
    pub eval_indices: Vec<usize>,
}

impl ExperimentData {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let train = load_labeled(&cfg.train_images, &cfg.train_labels)?;
        let test = load_labeled(&cfg.test_images, &cfg.test_labels)?;
        ExperimentData::from_sets(cfg, train, test)
    }

    /// Applies subsets and draws the evaluation indices.
    pub fn from_sets(
        cfg: &ExperimentConfig,
        train: LabeledDataset,
        test: LabeledDataset,
    ) -> Result<Self> {
        let train = match cfg.train_subset {
            Some(n) => train.head(n),
            None => train,
        };
        let test = match cfg.test_subset {
            Some(n) => test.head(n),
            None => test,
        };
        if train.is_empty() || test.is_empty() {
            return Err(Error::EmptyInput("experiment data"));
        }
        if train.base.dim() != cfg.architecture[0] || test.base.dim() != cfg.architecture[0] {
            return Err(Error::dim(
                "experiment input width",
                cfg.architecture[0],
                train.base.dim(),
            ));
        }
        let eval_indices = RandomStream::new(cfg.seed)
            .fork("eval-subset")
            .sample_indices(train.len(), cfg.fitness_eval_sample_count);
        Ok(ExperimentData {
            train,
            test,
            eval_indices,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arm {
    Baseline,
    Ga,
}

impl Arm {
    pub fn tag(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Ga => "ga",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerReport {
    pub visible: usize,
    pub hidden: usize,
    /// Reconstruction RMSE on the evaluation samples' features.
    pub rmse: f64,
    /// Fraction of weights exactly zero.
    pub sparsity_exact: f64,
    pub updates_consumed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmReport {
    pub arm: Arm,
    pub layers: Vec<LayerReport>,
    pub updates_consumed: u64,
    pub budget: u64,
    pub classification_error: Option<f64>,
    pub wall_clock_secs: f64,
    pub seed: u64,
    /// Top-layer RMSE of every baseline restart, in restart order.
    pub restart_rmses: Vec<f64>,
    pub selected_restart: Option<usize>,
}

impl ArmReport {
    pub fn final_rmse(&self) -> f64 {
        self.layers.last().map_or(0.0, |l| l.rmse)
    }

    /// Exact-zero fraction over all weights of the stack.
    pub fn overall_sparsity(&self) -> f64 {
        let (zeros, total) = self.layers.iter().fold((0.0, 0.0), |(z, t), l| {
            let n = (l.visible * l.hidden) as f64;
            (z + l.sparsity_exact * n, t + n)
        });
        if total == 0.0 {
            0.0
        } else {
            zeros / total
        }
    }
}

#[derive(Clone, Debug)]
pub struct ArmOutcome {
    pub report: ArmReport,
    pub stack: DeepStack,
    /// Per-layer training histories; for the baseline, of the kept restart.
    pub histories: Vec<Vec<GenerationRecord>>,
}

fn layer_reports(result: &StackResult) -> Vec<LayerReport> {
    result
        .stack
        .layers()
        .iter()
        .zip(&result.layers)
        .map(|(frozen, trained)| LayerReport {
            visible: frozen.weights().cols(),
            hidden: frozen.width(),
            rmse: trained.best_rmse,
            sparsity_exact: frozen.sparsity(0.0),
            updates_consumed: trained.updates_consumed,
        })
        .collect()
}

fn train_samples(data: &ExperimentData) -> &[Vector] {
    data.train.base.samples()
}

/// Trains `baseline_restarts` stacks by backpropagation, each from its own
/// substream, and keeps the lowest top-layer RMSE (ties to the earlier run).
pub fn run_baseline(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<ArmOutcome> {
    cfg.validate()?;
    let per_restart = cfg.baseline_updates_per_restart();
    if per_restart == 0 {
        return Err(Error::BudgetTooSmall {
            budget: cfg.budget_total_updates,
            per_generation: cfg.baseline_restarts as u64 * cfg.layer_count(),
        });
    }
    let started = Instant::now();
    let arm = RandomStream::new(cfg.seed).fork("baseline");
    let trainer = LayerTrainer::Backprop(cfg.backprop_config(per_restart));
    let mut best: Option<(usize, StackResult)> = None;
    let mut restart_rmses = Vec::with_capacity(cfg.baseline_restarts);
    let mut consumed = 0;
    for r in 0..cfg.baseline_restarts {
        let result = train_stack(
            &cfg.architecture,
            train_samples(data),
            &data.eval_indices,
            &trainer,
            &arm.fork_indexed("restart", r as u64),
        )?;
        consumed += result.updates_consumed();
        restart_rmses.push(result.final_rmse());
        if best
            .as_ref()
            .is_none_or(|(_, b)| result.final_rmse() < b.final_rmse())
        {
            best = Some((r, result));
        }
    }
    let (selected, result) = best.expect("at least one restart");
    Ok(ArmOutcome {
        report: ArmReport {
            arm: Arm::Baseline,
            layers: layer_reports(&result),
            updates_consumed: consumed,
            budget: cfg.arm_budget(),
            classification_error: None,
            wall_clock_secs: started.elapsed().as_secs_f64(),
            seed: arm.seed(),
            restart_rmses,
            selected_restart: Some(selected),
        },
        histories: result.layers.iter().map(|l| l.history.clone()).collect(),
        stack: result.stack,
    })
}

/// Trains one stack with the population trainer under the baseline arm's
/// total update count.
pub fn run_ga(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<ArmOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let arm = RandomStream::new(cfg.seed).fork("ga");
    let ga = cfg.ga_config()?;
    let result = train_stack(
        &cfg.architecture,
        train_samples(data),
        &data.eval_indices,
        &LayerTrainer::Ga(ga),
        &arm,
    )?;
    Ok(ArmOutcome {
        report: ArmReport {
            arm: Arm::Ga,
            layers: layer_reports(&result),
            updates_consumed: result.updates_consumed(),
            budget: cfg.arm_budget(),
            classification_error: None,
            wall_clock_secs: started.elapsed().as_secs_f64(),
            seed: arm.seed(),
            restart_rmses: Vec::new(),
            selected_restart: None,
        },
        histories: result.layers.iter().map(|l| l.history.clone()).collect(),
        stack: result.stack,
    })
}

/// Fits the configured classifier on the stack's training features and
/// returns its error on the test features.
pub fn classification_error(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    stack: &DeepStack,
) -> Result<f64> {
    let train_f = stack.extract_all(data.train.base.samples())?;
    let test_f = stack.extract_all(data.test.base.samples())?;
    let clf_seed = RandomStream::new(cfg.seed).fork("classifier").seed();
    let clf = train_classifier(
        &train_f,
        &data.train.labels,
        &cfg.classifier_config(clf_seed),
    )?;
    clf.error_rate(&test_f, &data.test.labels)
}

/// Largest shortfall of the GA arm's updates below the baseline's that
/// whole-generation granularity allows: one generation per layer.
pub fn parity_tolerance(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<u64> {
    Ok(cfg.ga_config()?.generation_cost(data.train.len()) * cfg.layer_count())
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub baseline: ArmOutcome,
    pub ga: ArmOutcome,
    pub parity_tolerance: u64,
}

impl Comparison {
    pub fn budget_parity_holds(&self) -> bool {
        let b = self.baseline.report.updates_consumed;
        let g = self.ga.report.updates_consumed;
        g <= b && b - g < self.parity_tolerance.max(1)
    }
}

/// Runs both arms and classifies the test set through each stack.
pub fn compare(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<Comparison> {
    let mut baseline = run_baseline(cfg, data)?;
    let mut ga = run_ga(cfg, data)?;
    baseline.report.classification_error = Some(classification_error(cfg, data, &baseline.stack)?);
    ga.report.classification_error = Some(classification_error(cfg, data, &ga.stack)?);
    let cmp = Comparison {
        baseline,
        ga,
        parity_tolerance: parity_tolerance(cfg, data)?,
    };
    if !cmp.budget_parity_holds() {
        return Err(Error::InvalidConfig(format!(
            "budget parity violated: baseline {} updates, GA {} updates",
            cmp.baseline.report.updates_consumed, cmp.ga.report.updates_consumed
        )));
    }
    Ok(cmp)
}

pub const METRICS_HEADER: &str =
    "arm,layer,visible,hidden,rmse,sparsity_exact,updates_consumed,classification_error";

/// One row per arm per layer, then one `total` row per arm. Contains no
/// timing, so identical runs give identical bytes.
pub fn metrics_csv(reports: &[&ArmReport]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in reports {
        for (k, l) in r.layers.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},",
                r.arm.tag(),
                k + 1,
                l.visible,
                l.hidden,
                l.rmse,
                l.sparsity_exact,
                l.updates_consumed
            );
        }
    }
    for r in reports {
        let (visible, hidden) = match (r.layers.first(), r.layers.last()) {
            (Some(f), Some(l)) => (f.visible, l.hidden),
            _ => (0, 0),
        };
        let _ = writeln!(
            out,
            "{},total,{},{},{},{},{},{}",
            r.arm.tag(),
            visible,
            hidden,
            r.final_rmse(),
            r.overall_sparsity(),
            r.updates_consumed,
            r.classification_error
                .map_or(String::new(), |e| e.to_string())
        );
    }
    out
}

pub fn summary_text(
    cfg: &ExperimentConfig,
    reports: &[&ArmReport],
    parity: Option<bool>,
) -> String {
    let mut s = String::new();
    let arch: Vec<String> = cfg.architecture.iter().map(usize::to_string).collect();
    let _ = writeln!(s, "experiment summary");
    let _ = writeln!(s, "architecture: {}", arch.join("-"));
    let _ = writeln!(s, "master seed: {}", cfg.seed);
    let _ = writeln!(s, "learning rate: {}", cfg.effective_learning_rate());
    let _ = writeln!(
        s,
        "budget per arm: {} SGD updates ({} restarts x {} for the baseline)",
        cfg.arm_budget(),
        cfg.baseline_restarts,
        cfg.baseline_updates_per_restart()
    );
    for r in reports {
        let _ = writeln!(s);
        let _ = writeln!(s, "[{}]", r.arm.tag());
        let _ = writeln!(s, "  stream seed: {}", r.seed);
        for (k, l) in r.layers.iter().enumerate() {
            let _ = writeln!(
                s,
                "  layer {} ({}->{}): rmse {:.6}, exact-zero weights {:.4}%, updates {}",
                k + 1,
                l.visible,
                l.hidden,
                l.rmse,
                100.0 * l.sparsity_exact,
                l.updates_consumed
            );
        }
        let _ = writeln!(s, "  final-layer rmse: {:.6}", r.final_rmse());
        let _ = writeln!(
            s,
            "  exact-zero weights overall: {:.4}%",
            100.0 * r.overall_sparsity()
        );
        if let Some(e) = r.classification_error {
            let _ = writeln!(s, "  classification error: {:.2}%", 100.0 * e);
        }
        let _ = writeln!(
            s,
            "  updates consumed: {} of {}",
            r.updates_consumed, r.budget
        );
        let _ = writeln!(s, "  wall-clock: {:.1} s", r.wall_clock_secs);
        if let Some(sel) = r.selected_restart {
            let rm: Vec<String> = r.restart_rmses.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(s, "  restart rmses: {}", rm.join(", "));
            let _ = writeln!(s, "  selected restart: {}", sel + 1);
        }
    }
    let _ = writeln!(s);
    if let Some(ok) = parity {
        let _ = writeln!(
            s,
            "budget parity: {}",
            if ok { "holds" } else { "VIOLATED" }
        );
    }
    let _ = writeln!(s, "note: {CLASSIFIER_NOTE}");
    let _ = writeln!(s, "note: {BUDGET_NOTE}");
    s
}

/// Writes the stack, per-layer histories, `metrics.csv` and `summary.txt`
/// for each outcome into `dir`.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    dir: &Path,
    outcomes: &[&ArmOutcome],
    parity: Option<bool>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    for o in outcomes {
        let tag = o.report.arm.tag();
        o.stack.save(dir.join(format!("stack_{tag}.gadl")))?;
        for (k, h) in o.histories.iter().enumerate() {
            fs::write(
                dir.join(format!("history_{tag}_layer{}.csv", k + 1)),
                history_to_csv(h),
            )?;
        }
    }
    let reports: Vec<&ArmReport> = outcomes.iter().map(|o| &o.report).collect();
    fs::write(dir.join("metrics.csv"), metrics_csv(&reports))?;
    fs::write(dir.join("summary.txt"), summary_text(cfg, &reports, parity))?;
    fs::write(dir.join("config.txt"), cfg.render())?;
    Ok(())
}

/// `compare` plus report files in `cfg.output_dir`.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<Comparison> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let data = ExperimentData::load(&cfg)?;
    let cmp = compare(&cfg, &data)?;
    write_outputs(
        &cfg,
        &cfg.output_dir,
        &[&cmp.baseline, &cmp.ga],
        Some(cmp.budget_parity_holds()),
    )?;
    Ok(cmp)
}
