//! Shared setup for the benchmarks: a small generated corpus, its splits and
//! a model trained on the seed part.

use confbin::am::{estimate_lm, flat_start, train_supervised, Labeled};
use confbin::corpus::{sample_corpus, split_corpus};
use confbin::{AcousticModel, DataSplits, GeneratorConfig, LanguageModel, Lexicon, SplitRatios, TrainConfig};

pub struct Setup {
    pub generator: GeneratorConfig,
    pub lexicon: Lexicon,
    pub splits: DataSplits,
    pub lm: LanguageModel,
    pub am: AcousticModel,
}

pub fn setup(num_utterances: usize) -> Setup {
    let generator = GeneratorConfig {
        num_utterances,
        master_seed: 42,
        ..GeneratorConfig::default()
    };
    let (corpus, lexicon, _) = sample_corpus(&generator).expect("valid generator config");
    let (splits, _) = split_corpus(&corpus, SplitRatios::default(), 42).expect("valid ratios");
    let lm = estimate_lm(
        splits.d_seed.iter().filter_map(|u| u.reference.as_deref()),
        lexicon.len(),
        2,
        0.5,
    )
    .expect("valid LM config");
    let am = train_supervised(
        &seed_labels(&splits),
        &lexicon,
        &TrainConfig::default(),
        &flat(&generator),
    )
    .expect("seed training");
    Setup {
        generator,
        lexicon,
        splits,
        lm,
        am,
    }
}

pub fn seed_labels(splits: &DataSplits) -> Vec<Labeled<'_>> {
    splits
        .d_seed
        .iter()
        .map(|u| Labeled::ground_truth(u).expect("seed utterances carry references"))
        .collect()
}

pub fn flat(generator: &GeneratorConfig) -> AcousticModel {
    flat_start(generator.num_phones, generator.alphabet_size, generator.states_per_phone).expect("valid topology")
}
