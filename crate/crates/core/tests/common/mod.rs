#![allow(dead_code)]

use embdebias::linalg::Matrix;
use embdebias::pipeline::{corpus_from_parts, Corpus, DatasetConfig, ExperimentConfig};
use embdebias::seed::{rng, Rng};
use embdebias::synth::{generate_biased_corpus, SynthCorpus, SynthSpec};
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(r: &mut Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_fn(n, d, |_, _| StandardNormal.sample(r))
}

pub fn gaussian_vec(r: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(r)).collect()
}

pub fn seeded(seed: u64) -> Rng {
    rng(seed)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a) * norm(b))
}

/// Generates a synthetic corpus and joins it in memory.
pub fn synth_corpus(spec: &SynthSpec) -> (SynthCorpus, Corpus) {
    let sc = generate_biased_corpus(spec).unwrap();
    let corpus = corpus_from_parts(
        [
            (&sc.domains[0].name, &sc.domains[0].table, &sc.domains[0].manifest),
            (&sc.domains[1].name, &sc.domains[1].table, &sc.domains[1].manifest),
        ],
        Some(sc.genre_map.clone()),
        &[],
    )
    .unwrap();
    (sc, corpus)
}

/// Config for in-memory runs; the file paths are placeholders.
pub fn config(out: &std::path::Path) -> ExperimentConfig {
    let datasets = ["A", "B"]
        .map(|n| DatasetConfig {
            name: n.into(),
            embeddings: format!("{n}.emb").into(),
            format: None,
            manifest: format!("{n}.manifest.jsonl").into(),
        })
        .to_vec();
    let mut c = ExperimentConfig::new(datasets, out);
    c.genre_map = Some("genre_map.json".into());
    c
}

/// Writes a synthetic corpus under `dir` and returns a config pointing at it.
pub fn synth_on_disk(spec: &SynthSpec, dir: &std::path::Path) -> ExperimentConfig {
    let sc = generate_biased_corpus(spec).unwrap();
    let files = embdebias::synth::write_corpus(&sc, spec, dir.join("data")).unwrap();
    let datasets = files
        .domains
        .iter()
        .map(|(name, emb, man)| DatasetConfig {
            name: name.clone(),
            embeddings: emb.clone(),
            format: None,
            manifest: man.clone(),
        })
        .collect();
    let mut c = ExperimentConfig::new(datasets, dir.join("results"));
    c.genre_map = Some(files.genre_map);
    c.seed = spec.seed;
    c
}
