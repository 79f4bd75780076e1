mod support;

use legalret_core::lm::{select_indomain, train_lm, LmConfig, SelectionConfig};
use rand::Rng;
use support::{markov_sentences, random_sentences, rng, shuffled, BruteLm};

fn vocab(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

#[test]
fn normalization_and_perplexity_match_brute_force() {
    for seed in 0..25 {
        let mut r = rng(seed);
        let v = vocab("w", r.random_range(2..12));
        let n = r.random_range(1..25);
        let sentences = random_sentences(&mut r, n, &v, 8);
        let cfg = LmConfig {
            order: r.random_range(1..=4),
            discount: r.random_range(0.05..0.95),
            unk_threshold: r.random_range(1..=2),
        };
        let lm = train_lm(&sentences, cfg).unwrap();
        let brute = BruteLm::train(&sentences, cfg.order, cfg.discount, cfg.unk_threshold);

        let predictable: Vec<&str> = lm.predictable().collect();
        assert_eq!(predictable.len(), brute.predictable().len());
        for ctx in lm.observed_contexts() {
            let sum: f64 = predictable.iter().map(|w| lm.prob(w, &ctx)).sum();
            assert!(
                (sum - 1.0).abs() <= 1e-9,
                "seed {seed} ctx {ctx:?} sum {sum}"
            );
        }

        let mut probes = random_sentences(&mut r, 10, &v, 10);
        probes.push(vec!["never-seen".into(), v[0].clone()]);
        probes.push(vec![]);
        for s in probes.iter().chain(&sentences) {
            let got = lm.perplexity(s).ln();
            let want = brute.ln_perplexity(s);
            assert!(
                (got - want).abs() <= 1e-9,
                "seed {seed} {s:?}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn training_sentences_beat_their_shuffles_on_average() {
    let mut r = rng(11);
    let v = vocab("m", 40);
    let train = markov_sentences(&mut r, 2000, &v, 6..14);
    let lm = train_lm(
        &train,
        LmConfig {
            unk_threshold: 1,
            ..LmConfig::default()
        },
    )
    .unwrap();
    let sample = &train[..200];
    let original: f64 = sample.iter().map(|s| lm.perplexity(s)).sum::<f64>() / 200.0;
    let scrambled: f64 = sample
        .iter()
        .map(|s| lm.perplexity(&shuffled(&mut r, s)))
        .sum::<f64>()
        / 200.0;
    assert!(original <= scrambled, "{original} vs {scrambled}");
}

#[test]
fn held_out_in_domain_scores_lower() {
    let mut r = rng(3);
    let a = vocab("a", 100);
    let b = vocab("b", 100);
    let in_domain = markov_sentences(&mut r, 1000, &a, 5..15);
    let out_domain = markov_sentences(&mut r, 1000, &b, 5..15);
    let lm = train_lm(&in_domain[..800], LmConfig::default()).unwrap();
    let median = |xs: &[Vec<String>]| {
        let mut pp: Vec<f64> = xs.iter().map(|s| lm.perplexity(s)).collect();
        pp.sort_by(f64::total_cmp);
        pp[pp.len() / 2]
    };
    assert!(median(&in_domain[800..]) < median(&out_domain));
}

#[test]
fn selection_is_the_predicate_filter_and_idempotent() {
    let mut r = rng(8);
    let v = vocab("s", 20);
    let train = markov_sentences(&mut r, 300, &v, 3..9);
    let lm = train_lm(&train, LmConfig::default()).unwrap();
    let mut candidates = markov_sentences(&mut r, 100, &v, 3..9);
    candidates.extend(random_sentences(&mut r, 100, &vocab("x", 5), 6));
    let cfg = SelectionConfig::keep_below(25.0).unwrap();

    let kept = select_indomain(&lm, candidates.clone(), &cfg);
    let expected: Vec<&Vec<String>> = candidates
        .iter()
        .filter(|s| lm.perplexity(s) <= 25.0)
        .collect();
    assert_eq!(kept.iter().map(|k| &k.0).collect::<Vec<_>>(), expected);
    assert!(!kept.is_empty() && kept.len() < candidates.len());

    let again = select_indomain(&lm, kept.iter().map(|k| k.0.clone()).collect(), &cfg);
    assert_eq!(again, kept);
}
