//! Round-robin federated learning over a [`Link`].
//!
//! Each learner turn: the global model goes down, the learner trains on its
//! shard, and the difference against the copy it holds goes back up and is
//! applied as `w_G + l_r · d̂`. Failed transmissions are recorded and change
//! nothing.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::model::{
    blobs, validate_hyper, build_model, evaluate, local_train, partition_dataset, BlobSpec, DataShard, ModelArch,
    ParameterVector, TrainConfig,
};
use crate::phy::ChannelConfig;
use crate::scalar::{lit, Scalar};
use crate::schemes::{transmit, SchemeConfig, SchemeKind, Transmission};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Init,
    Down,
    Up,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Init => "init",
            Direction::Down => "down",
            Direction::Up => "up",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    /// 1-based round; 0 for the initial evaluation.
    pub round: usize,
    pub learner: Option<usize>,
    pub direction: Direction,
    pub scheme: SchemeKind,
    pub success: bool,
    pub symbols_used: usize,
    pub mse: Option<f64>,
    pub acc_global: f64,
    pub acc_local_mean: f64,
}

/// Carries parameter vectors between aggregator and learners.
pub trait Link<T> {
    fn kind(&self) -> SchemeKind;

    /// `stream` is unique per transmission within one experiment.
    fn send(
        &mut self,
        v: &ParameterVector<T>,
        direction: Direction,
        stream: u64,
    ) -> Result<Transmission<T>>;
}

/// The same scheme and channel in both directions.
#[derive(Clone, Copy, Debug)]
pub struct SchemeLink {
    pub scheme: SchemeConfig,
    pub channel: ChannelConfig,
}

impl<T: Scalar> Link<T> for SchemeLink {
    fn kind(&self) -> SchemeKind {
        self.scheme.kind
    }

    fn send(
        &mut self,
        v: &ParameterVector<T>,
        _direction: Direction,
        stream: u64,
    ) -> Result<Transmission<T>> {
        transmit(v, &self.scheme, &self.channel.with_stream(stream))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FederationConfig {
    pub learners: usize,
    pub rounds: usize,
    pub epochs: usize,
    /// Aggregation rate `l_r`, in (0, 1].
    pub aggregation_lr: f64,
    pub train: TrainConfig,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            learners: 10,
            rounds: 10,
            epochs: 10,
            aggregation_lr: 1.0,
            train: TrainConfig::default(),
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learners == 0 {
            return Err(invalid("learners", "must be at least 1"));
        }
        if !(self.aggregation_lr > 0.0 && self.aggregation_lr <= 1.0) {
            return Err(invalid("aggregation_lr", "must lie in (0, 1]"));
        }
        validate_hyper(&self.train)
    }
}

/// `w_G + l_r · d̂`, elementwise.
pub fn aggregate<T: Scalar>(
    w_g: &ParameterVector<T>,
    d_hat: &ParameterVector<T>,
    l_r: T,
) -> Result<ParameterVector<T>> {
    if !(l_r > T::zero() && l_r <= T::one()) {
        return Err(invalid("l_r", "must lie in (0, 1]"));
    }
    if w_g.len() != d_hat.len() {
        return Err(Error::LengthMismatch {
            expected: w_g.len(),
            actual: d_hat.len(),
        });
    }
    w_g.with_values(
        w_g.values()
            .iter()
            .zip(d_hat.values())
            .map(|(&w, &d)| w + l_r * d)
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct Learner<T> {
    /// Last successfully received global model.
    pub synced: ParameterVector<T>,
    /// Result of the most recent local training, if any.
    pub trained: Option<ParameterVector<T>>,
    pub shard: DataShard<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FederationState<T> {
    pub arch: ModelArch,
    pub global: ParameterVector<T>,
    pub learners: Vec<Learner<T>>,
    pub test: DataShard<T>,
    pub cfg: FederationConfig,
    /// Completed learner turns.
    pub turns: usize,
    acc_global: f64,
    acc_local: Vec<f64>,
}

impl<T: Scalar> FederationState<T> {
    /// Every learner starts from a copy of `initial`.
    pub fn new(
        arch: ModelArch,
        initial: ParameterVector<T>,
        shards: Vec<DataShard<T>>,
        test: DataShard<T>,
        cfg: FederationConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if shards.len() != cfg.learners {
            return Err(Error::LengthMismatch {
                expected: cfg.learners,
                actual: shards.len(),
            });
        }
        if initial.manifest() != &arch.manifest() {
            return Err(Error::ManifestMismatch(
                "initial model does not match the architecture".into(),
            ));
        }
        let acc = evaluate(&arch, &initial, &test)?;
        let learners = shards
            .into_iter()
            .map(|shard| Learner {
                synced: initial.clone(),
                trained: None,
                shard,
            })
            .collect();
        Ok(Self {
            arch,
            global: initial,
            learners,
            test,
            turns: 0,
            acc_global: acc,
            acc_local: vec![acc; cfg.learners],
            cfg,
        })
    }

    /// Current round, 1-based once the first turn has started.
    pub fn round(&self) -> usize {
        self.turns / self.cfg.learners + 1
    }

    pub fn acc_global(&self) -> f64 {
        self.acc_global
    }

    pub fn acc_local_mean(&self) -> f64 {
        self.acc_local.iter().sum::<f64>() / self.acc_local.len() as f64
    }

    fn record(&self, learner: Option<usize>, direction: Direction, kind: SchemeKind) -> RoundRecord {
        RoundRecord {
            round: if direction == Direction::Init { 0 } else { self.round() },
            learner,
            direction,
            scheme: kind,
            success: true,
            symbols_used: 0,
            mse: None,
            acc_global: self.acc_global,
            acc_local_mean: self.acc_local_mean(),
        }
    }

    pub fn initial_record(&self, kind: SchemeKind) -> RoundRecord {
        self.record(None, Direction::Init, kind)
    }

    /// One learner turn: download, local training, difference upload and
    /// aggregation.
    pub fn run_round<L: Link<T> + ?Sized>(
        &mut self,
        learner: usize,
        link: &mut L,
    ) -> Result<[RoundRecord; 2]> {
        if learner >= self.learners.len() {
            return Err(invalid(
                "learner_idx",
                format!("{learner} out of range for {} learners", self.learners.len()),
            ));
        }
        let kind = link.kind();
        let stream = 2 * self.turns as u64;

        let down = link.send(&self.global, Direction::Down, stream)?;
        if let Ok(received) = down.outcome {
            self.learners[learner].synced = received;
            self.acc_local[learner] = evaluate(&self.arch, &self.learners[learner].synced, &self.test)?;
        }
        let mut down_rec = self.record(Some(learner), Direction::Down, kind);
        down_rec.success = down.report.success;
        down_rec.symbols_used = down.report.symbols_used;
        down_rec.mse = down.report.mse;

        let train = TrainConfig {
            seed: self.cfg.train.seed.wrapping_add(self.turns as u64),
            ..self.cfg.train
        };
        let state = &self.learners[learner];
        let trained = local_train(&self.arch, &state.synced, &state.shard, self.cfg.epochs, &train)?;
        let diff = trained.sub(&state.synced)?;
        self.acc_local[learner] = evaluate(&self.arch, &trained, &self.test)?;
        self.learners[learner].trained = Some(trained);

        let up = link.send(&diff, Direction::Up, stream + 1)?;
        if let Ok(d_hat) = up.outcome {
            self.global = aggregate(&self.global, &d_hat, lit(self.cfg.aggregation_lr))?;
            self.acc_global = evaluate(&self.arch, &self.global, &self.test)?;
        }
        let mut up_rec = self.record(Some(learner), Direction::Up, kind);
        up_rec.success = up.report.success;
        up_rec.symbols_used = up.report.symbols_used;
        up_rec.mse = up.report.mse;

        self.turns += 1;
        Ok([down_rec, up_rec])
    }

    /// `rounds` passes over all learners in index order, after the initial
    /// evaluation record.
    pub fn run<L: Link<T> + ?Sized>(&mut self, rounds: usize, link: &mut L) -> Result<Vec<RoundRecord>> {
        let mut records = vec![self.initial_record(link.kind())];
        for _ in 0..rounds {
            for l in 0..self.learners.len() {
                records.extend(self.run_round(l, link)?);
            }
        }
        Ok(records)
    }
}

/// Synthetic classification task shared by train and test splits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetSpec {
    pub train_samples: usize,
    pub test_samples: usize,
    pub dim: usize,
    pub classes: usize,
    pub center_spread: f64,
    pub noise: f64,
    pub offset: f64,
}

impl DatasetSpec {
    fn blob(&self, samples: usize) -> BlobSpec {
        BlobSpec {
            samples,
            dim: self.dim,
            classes: self.classes,
            center_spread: self.center_spread,
            noise: self.noise,
            offset: self.offset,
        }
    }
}

/// Everything one federated run depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub arch: ModelArch,
    pub data: DatasetSpec,
    pub federation: FederationConfig,
    pub scheme: SchemeConfig,
    pub snr_db: f64,
    pub fading_db: Option<f64>,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.federation.validate()?;
        self.scheme.validate()?;
        if self.data.dim != self.arch.input_dim() {
            return Err(invalid(
                "dim",
                format!("dataset dim {} but model input {}", self.data.dim, self.arch.input_dim()),
            ));
        }
        if self.data.classes != self.arch.num_classes() {
            return Err(invalid(
                "classes",
                format!(
                    "dataset has {} classes but model emits {}",
                    self.data.classes,
                    self.arch.num_classes()
                ),
            ));
        }
        if self.data.train_samples < self.federation.learners {
            return Err(invalid("train_samples", "fewer samples than learners"));
        }
        if self.data.test_samples == 0 {
            return Err(invalid("test_samples", "must be positive"));
        }
        self.channel().validate()
    }

    pub fn channel(&self) -> ChannelConfig {
        ChannelConfig {
            fading_db: self.fading_db,
            ..ChannelConfig::new(self.snr_db, derive_seed(self.seed, 5))
        }
    }

    /// Initial state: data, shards and model all drawn from `seed`.
    pub fn build<T: Scalar>(&self) -> Result<FederationState<T>> {
        self.validate()?;
        let centers = derive_seed(self.seed, 0);
        let train = blobs(&self.data.blob(self.data.train_samples), centers, derive_seed(self.seed, 1))?;
        let test = blobs(&self.data.blob(self.data.test_samples), centers, derive_seed(self.seed, 2))?;
        let shards = partition_dataset(&train, self.federation.learners, derive_seed(self.seed, 3))?;
        let initial = build_model(&self.arch, derive_seed(self.seed, 4));
        let cfg = FederationConfig {
            train: TrainConfig {
                seed: derive_seed(self.seed, 6),
                ..self.federation.train
            },
            ..self.federation
        };
        FederationState::new(self.arch.clone(), initial, shards, test, cfg)
    }
}

/// Builds the state for `spec` and runs all its rounds over the configured
/// scheme and channel.
pub fn run_experiment<T: Scalar>(spec: &ExperimentSpec) -> Result<Vec<RoundRecord>> {
    let mut state = spec.build::<T>()?;
    let mut link = SchemeLink {
        scheme: spec.scheme,
        channel: spec.channel(),
    };
    state.run(spec.federation.rounds, &mut link)
}

/// Independent sub-seed for component `index` of an experiment.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
