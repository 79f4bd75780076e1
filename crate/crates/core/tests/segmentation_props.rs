use legalret_core::bm25::Bm25Params;
use legalret_core::segment::{
    passage_scores, representative_passage, segment, Passage, SegmentationConfig,
};
use legalret_core::text::TokenSeq;
use proptest::prelude::*;

fn window_stride() -> impl Strategy<Value = (usize, usize)> {
    (1usize..40).prop_flat_map(|w| (Just(w), 1..=w))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn passages_cover_every_token(len in 0usize..300, (window, stride) in window_stride()) {
        let tokens = TokenSeq::from_tokens((0..len).map(|i| format!("t{i}")));
        let cfg = SegmentationConfig::new(window, stride).unwrap();
        let ps = segment("a", &tokens, cfg);
        if len == 0 {
            prop_assert!(ps.is_empty());
            return Ok(());
        }
        let mut covered = vec![false; len];
        for (i, p) in ps.iter().enumerate() {
            prop_assert_eq!(p.passage_index, i);
            prop_assert_eq!(p.token_offset, i * stride);
            prop_assert_eq!(p.len(), window.min(len - p.token_offset));
            for c in &mut covered[p.token_offset..p.token_offset + p.len()] {
                *c = true;
            }
            let expect: Vec<String> = (p.token_offset..p.token_offset + p.len()).map(|j| format!("t{j}")).collect();
            prop_assert_eq!(p.tokens.tokens(), expect.as_slice());
        }
        prop_assert!(covered.iter().all(|&c| c));
        let last = ps.last().unwrap();
        prop_assert_eq!(last.token_offset + last.len(), len);
        // only the final passage reaches the end
        prop_assert!(ps[..ps.len() - 1].iter().all(|p| p.token_offset + p.len() < len));
        if len <= window {
            prop_assert_eq!(ps.len(), 1);
        }
    }

    #[test]
    fn representative_is_a_member_and_order_independent(
        texts in prop::collection::vec(prop::collection::vec(0u8..8, 0..10), 1..8),
        question in prop::collection::vec(0u8..8, 0..5),
        rotate in 0usize..8,
    ) {
        let passages: Vec<Passage> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Passage {
                article_id: "a".into(),
                passage_index: i,
                token_offset: i,
                tokens: TokenSeq::from_tokens(t.iter().map(|x| format!("w{x}"))),
            })
            .collect();
        let q: Vec<String> = question.iter().map(|x| format!("w{x}")).collect();
        let params = Bm25Params::default();
        let best = representative_passage(&q, &passages, params).unwrap();
        prop_assert!(passages.contains(best));

        // brute force: argmax of per-passage scores, lowest index on ties
        let scores = passage_scores(&q, &passages, params).unwrap();
        let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let want = scores.iter().position(|&s| s == top).unwrap();
        prop_assert_eq!(best.passage_index, want);

        let mut permuted = passages.clone();
        permuted.rotate_left(rotate % passages.len());
        let again = representative_passage(&q, &permuted, params).unwrap();
        prop_assert_eq!(again.passage_index, best.passage_index);
    }
}

#[test]
fn question_inside_one_passage_selects_it() {
    let article = TokenSeq::from_tokens("a b c d e f g h i j k l".split(' '));
    let ps = segment("x", &article, SegmentationConfig::new(4, 4).unwrap());
    let best = representative_passage(&["i", "j"], &ps, Bm25Params::default()).unwrap();
    assert_eq!(best.passage_index, 2);
}
