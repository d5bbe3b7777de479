use std::collections::BTreeMap;

use super::config::{ClassSeeds, DebiasKind, ExperimentConfig, ResolvedSeeds, Scope, Strategy};
use super::corpus::{load_corpus, Access, AccessAudit, Corpus, Phase};
use crate::bias::{fit_lda_direction, BiasDirection, DirectionScope};
use crate::classifier::{cv_select_c, predict_scores, train_logreg, ClassifierModel};
use crate::data::sampling::eligible;
use crate::data::{balanced_subsample, LabelState, Split};
use crate::debias::{apply_debias, projector_from_direction, projector_from_subspace, DebiasOperator};
use crate::error::{Error, Result};
use crate::evaluation::{build_report, roc_auc, CellKey, CorrelationKey, ExperimentReport, GenreCounts, RawResults};
use crate::kernel::{apply_standardizer, fit_rff, fit_standardizer, transform_rff, KernelMap, Standardizer};
use crate::linalg::{cosine, vstack, Matrix, Vector};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    /// Sample reads per `strategy/scope/class`; empty unless instrumented.
    pub audit: BTreeMap<String, AccessAudit>,
}

/// Input-space or kernelized features.
#[derive(Debug, Clone)]
pub enum FeatureMap {
    Identity,
    Kernel { standardizer: Standardizer, map: KernelMap },
}

impl FeatureMap {
    /// Standardizer and kernel map fit on `sample` (training rows only).
    pub fn fit_kernel(sample: &Matrix, config: &ExperimentConfig, seed: u64) -> Result<Self> {
        let standardizer = fit_standardizer(sample)?;
        let z = apply_standardizer(&standardizer, sample)?;
        let dim = sample.ncols();
        let map = fit_rff(dim, Some(config.kernel.dprime_factor * dim), config.kernel.gamma, seed, Some(&z))?;
        Ok(FeatureMap::Kernel { standardizer, map })
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            FeatureMap::Identity => Ok(x.clone()),
            FeatureMap::Kernel { standardizer, map } => transform_rff(map, &apply_standardizer(standardizer, x)?),
        }
    }
}

/// A fitted projection with the directions it was built from.
#[derive(Debug, Clone)]
pub struct FittedDebias {
    pub operator: DebiasOperator,
    pub directions: Vec<BiasDirection>,
}

impl FittedDebias {
    /// `c_k` of a classifier against this fit: the signed cosine for a single
    /// direction, `‖Bᵀ v̂‖` for a subspace.
    pub fn correlation(&self, v: &[f64]) -> Result<f64> {
        if self.directions.len() == 1 {
            return cosine(&self.directions[0].vector, v);
        }
        let n = crate::linalg::norm(v);
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        let v = Vector::from_column_slice(v) / n;
        Ok(self.operator.basis().tr_mul(&v).norm())
    }
}

/// Train-split records used to fit a bias direction: every record for the
/// global scope, the class positives for the class-wise scope.
pub fn bias_samples(corpus: &Corpus, scope: Scope, class: &str) -> [Vec<usize>; 2] {
    [0, 1].map(|d| {
        let m = &corpus.domains[d].manifest;
        match scope {
            Scope::Global => (0..m.len()).filter(|&i| m.records()[i].split == Split::Train).collect(),
            Scope::Classwise => eligible(m, class, LabelState::Positive),
        }
    })
}

fn direction_scope(scope: Scope, class: &str) -> DirectionScope {
    match scope {
        Scope::Global => DirectionScope::Global,
        Scope::Classwise => DirectionScope::Classwise { class: class.to_string() },
    }
}

fn fit_direction(
    access: &mut Access,
    fmap: &FeatureMap,
    samples: &[Vec<usize>; 2],
    shrinkage: f64,
) -> Result<BiasDirection> {
    let xa = fmap.apply(&access.rows(0, &samples[0], Phase::Fit)?)?;
    let xb = fmap.apply(&access.rows(1, &samples[1], Phase::Fit)?)?;
    fit_lda_direction(&xa, &xb, shrinkage)
}

/// Fits the projection for `kind` from the given per-domain sample sets.
/// Genre-wise fits partition the samples by reduced genre and skip genres
/// with fewer than `min_genre_samples` records on either side.
pub fn fit_debias(
    access: &mut Access,
    fmap: &FeatureMap,
    config: &ExperimentConfig,
    kind: DebiasKind,
    scope: Scope,
    class: &str,
    samples: &[Vec<usize>; 2],
) -> Result<Option<FittedDebias>> {
    match kind {
        DebiasKind::Off => Ok(None),
        DebiasKind::Single => {
            let w = fit_direction(access, fmap, samples, config.lda_shrinkage)?.with_scope(direction_scope(scope, class));
            Ok(Some(FittedDebias {
                operator: projector_from_direction(&w),
                directions: vec![w],
            }))
        }
        DebiasKind::Genre => {
            let corpus = access.corpus();
            let map = corpus
                .genre_map
                .as_ref()
                .ok_or_else(|| Error::Config("genre-wise debiasing needs a genre map".into()))?;
            let mut directions = Vec::new();
            for genre in &map.targets {
                let part = [0, 1].map(|d| {
                    samples[d]
                        .iter()
                        .copied()
                        .filter(|&i| corpus.domains[d].genres[i] == *genre)
                        .collect::<Vec<_>>()
                });
                let (na, nb) = (part[0].len(), part[1].len());
                if na < config.min_genre_samples.max(2) || nb < config.min_genre_samples.max(2) {
                    log::info!("class {class}: skipping genre {genre} ({na} vs {nb} samples)");
                    continue;
                }
                match fit_direction(access, fmap, &part, config.lda_shrinkage) {
                    Ok(w) => directions.push(w.with_scope(direction_scope(scope, class)).with_genre(genre.clone())),
                    Err(Error::DegenerateMeans { gap }) => {
                        log::warn!("class {class}: genre {genre} has indistinguishable domain means ({gap:e}); skipped")
                    }
                    Err(e) => return Err(e.context(format!("genre={genre}"))),
                }
            }
            if directions.is_empty() {
                return Err(Error::InsufficientSamples {
                    needed: config.min_genre_samples,
                    found: 0,
                }
                .context("no genre has enough samples in both datasets"));
            }
            let operator = projector_from_subspace(&directions, config.rel_tol)?;
            Ok(Some(FittedDebias { operator, directions }))
        }
    }
}

fn project(op: Option<&FittedDebias>, x: Matrix) -> Result<Matrix> {
    match op {
        Some(f) => apply_debias(&f.operator, &x),
        None => Ok(x),
    }
}

fn union_sorted(mut a: Vec<usize>, b: Vec<usize>) -> Vec<usize> {
    a.extend(b);
    a.sort_unstable();
    a
}

struct ClassOutcome {
    aucs: Vec<(CellKey, f64)>,
    correlations: Vec<(CorrelationKey, f64)>,
}

/// Per-class training sets: balanced positives and negatives from each
/// dataset's train split, with labels.
pub fn training_sets(corpus: &Corpus, class: &str, seeds: &ClassSeeds) -> Result<[(Vec<usize>, Vec<bool>); 2]> {
    let [ma, mb] = [&corpus.domains[0].manifest, &corpus.domains[1].manifest];
    let (pa, pb) = balanced_subsample(ma, mb, class, LabelState::Positive, seeds.positives)?;
    let (na, nb) = balanced_subsample(ma, mb, class, LabelState::Negative, seeds.negatives)?;
    let idx = [union_sorted(pa, na), union_sorted(pb, nb)];
    Ok([0, 1].map(|d| {
        let m = &corpus.domains[d].manifest;
        let y = idx[d].iter().map(|&i| m.records()[i].label(class) == LabelState::Positive).collect();
        (idx[d].clone(), y)
    }))
}

/// Test-split records with a known label for `class`.
pub fn test_set(corpus: &Corpus, domain: usize, class: &str) -> (Vec<usize>, Vec<bool>) {
    let m = &corpus.domains[domain].manifest;
    m.records()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.split == Split::Test)
        .filter_map(|(i, r)| r.label(class).as_binary().map(|y| (i, y)))
        .unzip()
}

/// CV-selected C, then a final fit on the whole training set.
pub fn fit_classifier(x: &Matrix, y: &[bool], config: &ExperimentConfig, cv_seed: u64, class: &str) -> Result<ClassifierModel> {
    let c = cv_select_c(x, y, &config.c_grid, config.cv_folds, cv_seed)?;
    Ok(train_logreg(x, y, c, cv_seed)?.with_class(class))
}

fn correlation_or_zero(value: Result<f64>, what: &str) -> Result<f64> {
    match value {
        Err(Error::ZeroVector) => {
            log::warn!("{what}: classifier weights are all zero; correlation recorded as 0");
            Ok(0.0)
        }
        other => other,
    }
}

fn run_class(access: &mut Access, config: &ExperimentConfig, class: &str, seeds: &ResolvedSeeds) -> Result<ClassOutcome> {
    let corpus = access.corpus();
    let names = corpus.names();
    let strategy = config.strategy;
    let cs = ClassSeeds::new(seeds, class);

    let sets = training_sets(corpus, class, &cs)?;
    let raw_train = [
        access.rows(0, &sets[0].0, Phase::Fit)?,
        access.rows(1, &sets[1].0, Phase::Fit)?,
    ];
    let fmap = if strategy.kernelized() {
        FeatureMap::fit_kernel(&vstack(&raw_train[0], &raw_train[1])?, config, cs.rff)?
    } else {
        FeatureMap::Identity
    };

    let samples = bias_samples(corpus, config.scope, class);
    let fitted = fit_debias(access, &fmap, config, strategy.debias(), config.scope, class, &samples)?;

    let mut models = Vec::with_capacity(2);
    for d in 0..2 {
        let x = project(fitted.as_ref(), fmap.apply(&raw_train[d])?)?;
        let model = fit_classifier(&x, &sets[d].1, config, cs.cv_for(names[d]), class)
            .map_err(|e| e.context(format!("training on {}", names[d])))?;
        models.push(model);
    }

    let mut correlations = Vec::new();
    let key = |d: usize, scope: Scope, stage: &str| CorrelationKey {
        domain: names[d].to_string(),
        strategy: strategy.as_str().to_string(),
        space: strategy.space().to_string(),
        scope: scope.as_str().to_string(),
        stage: stage.to_string(),
    };
    match &fitted {
        Some(f) => {
            for (d, m) in models.iter().enumerate() {
                let c = correlation_or_zero(f.correlation(&m.weights), class)?;
                correlations.push((key(d, config.scope, "post"), c));
            }
        }
        None => {
            // No projection: probe both scopes for the sensitivity of the
            // undebiased classifiers.
            for scope in [Scope::Global, Scope::Classwise] {
                let probe_samples = bias_samples(corpus, scope, class);
                match fit_direction(access, &fmap, &probe_samples, config.lda_shrinkage) {
                    Ok(w) => {
                        for (d, m) in models.iter().enumerate() {
                            let c = correlation_or_zero(cosine(&w.vector, &m.weights), class)?;
                            correlations.push((key(d, scope, "pre"), c));
                        }
                    }
                    Err(e) => log::warn!("class {class}: {scope} probe direction unavailable: {e}"),
                }
            }
        }
    }

    let mut aucs = Vec::with_capacity(4);
    for s in 0..2 {
        let (idx, y) = test_set(corpus, s, class);
        let x = project(fitted.as_ref(), fmap.apply(&access.rows(s, &idx, Phase::Evaluate)?)?)?;
        for (t, model) in models.iter().enumerate() {
            let cell = CellKey::new(names[t], names[s], strategy.as_str(), config.scope.as_str());
            let auc = predict_scores(model, &x)
                .and_then(|p| roc_auc(&p, &y))
                .map_err(|e| e.context(format!("cell={}->{}", names[t], names[s])))?;
            aucs.push((cell, auc));
        }
    }
    Ok(ClassOutcome { aucs, correlations })
}

/// Positive train-split records per reduced genre, for each (dataset, class).
pub fn genre_histogram(corpus: &Corpus) -> Vec<GenreCounts> {
    let mut out = Vec::new();
    for d in &corpus.domains {
        for class in &corpus.classes {
            let mut counts = BTreeMap::new();
            for i in eligible(&d.manifest, class, LabelState::Positive) {
                *counts.entry(d.genres[i].clone()).or_insert(0) += 1;
            }
            out.push(GenreCounts {
                dataset: d.name.clone(),
                class: class.clone(),
                counts,
            });
        }
    }
    out
}

/// Declared cells of one run: every (train, test) pair.
pub fn declared_cells(corpus: &Corpus, strategy: Strategy, scope: Scope) -> Vec<CellKey> {
    let names = corpus.names();
    let mut out = Vec::with_capacity(4);
    for t in names {
        for s in names {
            out.push(CellKey::new(t, s, strategy.as_str(), scope.as_str()));
        }
    }
    out
}

/// Runs one strategy and scope on an already loaded corpus.
pub fn run_strategy_on(corpus: &Corpus, config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let strategy = config.strategy;
    if strategy.debias() == DebiasKind::Off && config.scope == Scope::Classwise {
        log::warn!("strategy {strategy} fits no bias direction; scope {} has no effect", config.scope);
    }
    let seeds = config.resolved_seeds();
    let mut access = Access::new(corpus, config.instrument);
    let mut raw = RawResults {
        classes: corpus.classes.clone(),
        declared: declared_cells(corpus, strategy, config.scope),
        genre_histogram: genre_histogram(corpus),
        config_fingerprint: config.fingerprint(&[]),
        ..Default::default()
    };
    let mut corr: Vec<(CorrelationKey, BTreeMap<String, f64>)> = Vec::new();
    for class in &corpus.classes {
        access.set_label(format!("{strategy}/{}/{class}", config.scope));
        let out = run_class(&mut access, config, class, &seeds)
            .map_err(|e| e.context(format!("class={class} strategy={strategy} scope={}", config.scope)))?;
        for (cell, auc) in out.aucs {
            raw.cells.entry(cell).or_default().insert(class.clone(), auc);
        }
        for (key, c) in out.correlations {
            match corr.iter_mut().find(|(k, _)| *k == key) {
                Some((_, m)) => {
                    m.insert(class.clone(), c);
                }
                None => corr.push((key, BTreeMap::from([(class.clone(), c)]))),
            }
        }
    }
    raw.correlations = corr;
    Ok(RunOutput {
        report: build_report(raw)?,
        audit: access.into_log(),
    })
}

/// Loads the configured corpus and runs the configured strategy.
pub fn run_strategy(config: &ExperimentConfig) -> Result<RunOutput> {
    let corpus = load_corpus(config)?;
    run_strategy_on(&corpus, config)
}

/// Bias correlations only: the undebiased classifiers in input space and in
/// kernel space, probed with global and class-wise directions.
pub fn probe_on(corpus: &Corpus, config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut reports = Vec::new();
    for strategy in [Strategy::None, Strategy::K] {
        let cfg = ExperimentConfig {
            strategy,
            scope: Scope::Global,
            ..config.clone()
        };
        reports.push(run_strategy_on(corpus, &cfg)?.report);
    }
    let mut merged = ExperimentReport::merge(&reports)?;
    merged.cells.clear();
    merged.config_fingerprint = config.fingerprint(&["probe"]);
    Ok(merged)
}

pub fn probe(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let corpus = load_corpus(config)?;
    probe_on(&corpus, config)
}
