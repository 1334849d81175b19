use debatetree::corpus::{segment_paper, split_sentences, Dataset, PaperRecord, Segment, DATASET_COLUMNS};
use debatetree::retrieval::{cosine, top_delta, EmbeddingVector};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,8}"
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..8).prop_map(|w| {
        let mut s = w.join(" ");
        s[..1].make_ascii_uppercase();
        s + "."
    })
}

fn text(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(sentence(), 1..max).prop_map(|s| s.join(" "))
}

fn paper(abstract_text: String, introduction: String) -> PaperRecord {
    PaperRecord {
        paper_id: "p".into(),
        title: "T".into(),
        abstract_text,
        introduction,
        body: None,
        source_link: None,
    }
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

proptest! {
    #[test]
    fn segment_sentence_counts_sum(a in text(12), i in text(12), target in 1usize..6) {
        let p = paper(a.clone(), i.clone());
        let segments = segment_paper(&p, target);
        let total = split_sentences(&format!("{a} {i}")).len();
        prop_assert_eq!(segments.iter().map(|s| s.sentence_count).sum::<usize>(), total);
        prop_assert!(segments.iter().all(|s| s.sentence_count >= 1 && s.sentence_count <= target));
        prop_assert!(segments.iter().rev().skip(1).all(|s| s.sentence_count == target));
        prop_assert!(segments.iter().enumerate().all(|(n, s)| s.segment_id == n));
    }

    #[test]
    fn dataset_round_trip(rows in prop::collection::vec((text(3), text(3), text(3), any::<bool>(), any::<bool>()), 1..6)) {
        let mut tsv = DATASET_COLUMNS.join("\t") + "\n";
        for (n, (topic, a, b, m, c)) in rows.iter().enumerate() {
            let cells = [
                topic.clone(), format!("https://x/{n}"), format!("A{n}"), a.clone(), String::new(),
                String::new(), format!("B{n}"), b.clone(), a.clone(),
                (*m as u8).to_string(), (*c as u8).to_string(),
            ];
            tsv.push_str(&cells.join("\t"));
            tsv.push('\n');
        }
        let parsed = Dataset::parse(&tsv).unwrap();
        prop_assert_eq!(parsed.to_tsv(), tsv.clone());
        prop_assert_eq!(Dataset::parse(&parsed.to_tsv()).unwrap(), parsed);
    }

    #[test]
    fn cosine_symmetric_and_scale_invariant(a in vector(16), b in vector(16), s in 0.01f64..100.0) {
        let (va, vb) = (EmbeddingVector::new(a).unwrap(), EmbeddingVector::new(b).unwrap());
        let ab = cosine(&va, &vb).unwrap();
        prop_assert!((ab - cosine(&vb, &va).unwrap()).abs() < 1e-12);
        prop_assert!((ab - cosine(&va.scaled(s).unwrap(), &vb).unwrap()).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert!((cosine(&va, &va).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranking_ignores_pool_order_and_query_scale(
        q in vector(8),
        vs in prop::collection::vec(vector(8), 1..30),
        delta in 1usize..10,
        s in 0.1f64..10.0,
        rot in 0usize..30,
    ) {
        let pool: Vec<(Segment, EmbeddingVector)> = vs.into_iter().enumerate().map(|(i, v)| (
            Segment { segment_id: i, paper_id: "p".into(), text: format!("s{i}"), sentence_count: 1 },
            EmbeddingVector::new(v).unwrap(),
        )).collect();
        let q = EmbeddingVector::new(q).unwrap();
        let ids = |r: Vec<debatetree::retrieval::RankedSegment>| r.into_iter().map(|r| r.segment.segment_id).collect::<Vec<_>>();
        let base = ids(top_delta(&q, &pool, delta).unwrap());
        let mut shuffled = pool.clone();
        shuffled.rotate_left(rot % pool.len());
        shuffled.reverse();
        prop_assert_eq!(&base, &ids(top_delta(&q, &shuffled, delta).unwrap()));
        prop_assert_eq!(&base, &ids(top_delta(&q.scaled(s).unwrap(), &pool, delta).unwrap()));
        prop_assert_eq!(base.len(), delta.min(pool.len()));
    }
}
