//! Synthetic inputs for the benchmarks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Zipf-ish vocabulary draw: low ids are much more frequent.
fn word(rng: &mut ChaCha8Rng, vocab: usize) -> String {
    let u: f64 = rng.random_range(0.0..1.0);
    format!("w{}", ((vocab as f64).powf(u) as usize).saturating_sub(1))
}

pub fn documents(seed: u64, n_docs: usize, len: usize, vocab: usize) -> Vec<(String, Vec<String>)> {
    let mut r = rng(seed);
    (0..n_docs)
        .map(|i| {
            let n = r.random_range(len / 2..=len * 3 / 2);
            (
                format!("d{i:06}"),
                (0..n).map(|_| word(&mut r, vocab)).collect(),
            )
        })
        .collect()
}

pub fn queries(seed: u64, n: usize, vocab: usize) -> Vec<Vec<String>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            (0..r.random_range(4..16))
                .map(|_| word(&mut r, vocab))
                .collect()
        })
        .collect()
}

pub fn sentences(seed: u64, n: usize, vocab: usize) -> Vec<Vec<String>> {
    let mut r = rng(seed);
    let words: Vec<String> = (0..vocab).map(|i| format!("w{i}")).collect();
    (0..n)
        .map(|_| {
            (0..r.random_range(5..30))
                .map(|_| words.choose(&mut r).unwrap().clone())
                .collect()
        })
        .collect()
}

/// Vietnamese-looking article text of roughly `n_words` syllables.
pub fn article_text(seed: u64, n_words: usize) -> String {
    const SYLLABLES: &[&str] = &[
        "người",
        "nộp",
        "thuế",
        "bị",
        "cáo",
        "hội",
        "đồng",
        "xét",
        "xử",
        "cơ",
        "quan",
        "điều",
        "tra",
        "hợp",
        "đồng",
        "công",
        "chứng",
        "bồi",
        "thường",
        "thiệt",
        "hại",
        "tòa",
        "án",
        "nhân",
        "dân",
        "khoản",
        "quy",
        "định",
        "này",
        "và",
        "của",
        "các",
        "được",
        "HĐXX",
        "UBND",
    ];
    let mut r = rng(seed);
    let mut out = String::new();
    for i in 0..n_words {
        if i > 0 {
            out.push_str(if i % 17 == 0 { ". " } else { " " });
        }
        out.push_str(SYLLABLES.choose(&mut r).unwrap());
    }
    out
}
