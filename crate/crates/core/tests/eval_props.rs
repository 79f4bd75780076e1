mod support;

use std::collections::BTreeSet;

use legalret_core::dataset::parse_questions;
use legalret_core::eval::{answer_f1, evaluate_run, f_beta, prf};
use legalret_core::pipeline::{vote, Predictions, SelectionPolicy};
use legalret_core::{Analyzer, ArticleKey};
use proptest::prelude::*;
use serde_json::json;
use support::{random_run, rng};

fn set(xs: &[u8]) -> BTreeSet<u8> {
    xs.iter().copied().collect()
}

#[test]
fn worked_f2_examples() {
    // 1 of 1 predicted correct, 1 of 2 gold found... and the converse
    let (p, r) = prf(&set(&[1]), &set(&[1, 2]));
    assert!((f_beta(p, r, 2.0).unwrap() - 0.555556).abs() <= 1e-6);
    let (p, r) = prf(&set(&[1, 2]), &set(&[1]));
    assert!((f_beta(p, r, 2.0).unwrap() - 0.833333).abs() <= 1e-6);
}

#[test]
fn prf_edge_cases() {
    assert_eq!(prf(&set(&[]), &set(&[1])), (0.0, 0.0));
    assert_eq!(prf(&set(&[1]), &set(&[])), (0.0, 0.0));
    assert_eq!(prf(&set(&[]), &set(&[])), (1.0, 1.0));
    assert_eq!(f_beta(0.0, 0.0, 2.0).unwrap(), 0.0);
    assert!(f_beta(0.5, 0.5, 0.0).is_err());
    assert!(f_beta(0.5, 0.5, -1.0).is_err());
}

proptest! {
    #[test]
    fn f_beta_is_bounded_and_symmetric_at_one(p in 0.0f64..=1.0, r in 0.0f64..=1.0) {
        let f1 = f_beta(p, r, 1.0).unwrap();
        prop_assert!((f1 - f_beta(r, p, 1.0).unwrap()).abs() <= 1e-12);
        for beta in [0.5, 1.0, 2.0] {
            let f = f_beta(p, r, beta).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
            prop_assert!(f <= p.max(r) + 1e-12 && f >= p.min(r) - 1e-12);
        }
    }

    #[test]
    fn f_beta_monotone_in_each_argument(p in 0.01f64..=1.0, r in 0.01f64..=1.0, dp in 0.0f64..0.5, beta in 0.1f64..4.0) {
        let base = f_beta(p, r, beta).unwrap();
        prop_assert!(f_beta((p + dp).min(1.0), r, beta).unwrap() >= base - 1e-12);
        prop_assert!(f_beta(p, (r + dp).min(1.0), beta).unwrap() >= base - 1e-12);
    }

    #[test]
    fn f2_weights_recall_over_precision(a in 0.01f64..=1.0, b in 0.01f64..=1.0) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(f_beta(lo, hi, 2.0).unwrap() > f_beta(hi, lo, 2.0).unwrap());
    }

    #[test]
    fn prf_matches_counting(pred in prop::collection::btree_set(0u8..10, 0..6), gold in prop::collection::btree_set(0u8..10, 1..6)) {
        let (p, r) = prf(&pred, &gold);
        let hit = pred.intersection(&gold).count() as f64;
        let want_p = if pred.is_empty() { 0.0 } else { hit / pred.len() as f64 };
        prop_assert_eq!(p, want_p);
        prop_assert_eq!(r, hit / gold.len() as f64);
    }
}

fn gold() -> Vec<legalret_core::Question> {
    parse_questions(&json!([
        {"question_id": "a", "text": "x", "relevant_articles": [{"law_id": "L", "article_id": "1"}]},
        {"question_id": "b", "text": "y", "relevant_articles": [
            {"law_id": "L", "article_id": "1"}, {"law_id": "M", "article_id": "2"}]},
        {"question_id": "c", "text": "z", "relevant_articles": [{"law_id": "M", "article_id": "9"}]}
    ]))
    .unwrap()
}

fn as_run(questions: &[legalret_core::Question]) -> Predictions {
    questions
        .iter()
        .map(|q| (q.question_id.clone(), q.relevant.iter().cloned().collect()))
        .collect()
}

#[test]
fn gold_as_run_scores_one() {
    let g = gold();
    let report = evaluate_run(&as_run(&g), &g).unwrap();
    assert_eq!(report.macro_avg.f2, 1.0);
    assert_eq!(report.macro_avg.precision, 1.0);
    assert_eq!(report.n_questions, 3);
}

#[test]
fn missing_and_unknown_predictions() {
    let g = gold();
    let mut run = as_run(&g);
    run.remove("c");
    let report = evaluate_run(&run, &g).unwrap();
    assert_eq!(report.empty_predictions, 1);
    assert!((report.macro_avg.f2 - 2.0 / 3.0).abs() <= 1e-12);

    run.insert("zz".into(), BTreeSet::from([ArticleKey::new("L", "1")]));
    assert!(evaluate_run(&run, &g).is_err());
}

#[test]
fn macro_average_independent_of_question_order() {
    let mut g = gold();
    let mut run = as_run(&g);
    run.insert("b".into(), BTreeSet::from([ArticleKey::new("L", "1")]));
    let a = evaluate_run(&run, &g).unwrap();
    g.reverse();
    let b = evaluate_run(&run, &g).unwrap();
    assert_eq!(a.macro_avg, b.macro_avg);
    assert_eq!(a.per_query, b.per_query);
}

#[test]
fn vote_of_one_run_is_identity() {
    let mut r = rng(21);
    for i in 0..50 {
        let policy = if i % 2 == 0 {
            SelectionPolicy::Top1
        } else {
            SelectionPolicy::Threshold(0.5)
        };
        let run = random_run(&mut r, 10, policy);
        let voted = vote(std::slice::from_ref(&run), &[1.0], policy).unwrap();
        assert_eq!(voted.predictions(), run.predictions());
        assert_eq!(voted.questions, run.questions);
    }
}

#[test]
fn vote_rejects_bad_weights() {
    let mut r = rng(2);
    let run = random_run(&mut r, 3, SelectionPolicy::Top1);
    let runs = [run.clone(), run];
    assert!(vote(&runs, &[1.0], SelectionPolicy::Top1).is_err());
    assert!(vote(&runs, &[0.0, 0.0], SelectionPolicy::Top1).is_err());
    assert!(vote(&runs, &[1.0, -1.0], SelectionPolicy::Top1).is_err());
    assert!(vote(&[], &[], SelectionPolicy::Top1).is_err());
}

#[test]
fn answer_f1_overlap() {
    let an = Analyzer::plain(Default::default());
    assert_eq!(answer_f1("", "", &an), 1.0);
    assert_eq!(answer_f1("a b", "", &an), 0.0);
    assert_eq!(answer_f1("Phạt tiền", "phạt tiền!", &an), 1.0);
    // pred {a, a, b}, gold {a, c}: overlap 1, p = 1/3, r = 1/2
    let f = answer_f1("a a b", "a c", &an);
    assert!((f - 0.4).abs() <= 1e-12);
}
