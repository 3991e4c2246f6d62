use hyperprobe::data::{decode_pemb, encode_pemb, parse_conllu, read_pemb, tree_metrics, write_pemb, Pemb, PunctuationSet};
use hyperprobe::eval::{mst_decode, predicted_sq_distances};
use hyperprobe::geometry::Curvature;
use hyperprobe::probes::{Model, PoincareProbe, Probe};
use hyperprobe::viz::{render_svg, syntax_scene, RenderConfig};
use ndarray::{array, Array2};
use std::path::PathBuf;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn three_sentence_treebank_parses() {
    let tb = parse_conllu(fixture("three.conllu")).unwrap();
    assert!(tb.dropped.is_empty());
    let s = &tb.sentences;
    assert_eq!(s.len(), 3);
    assert_eq!(s[0].tokens, ["The", "cat", "sat", "."]);
    // the multiword range line is skipped, its parts kept
    assert_eq!(s[1].tokens, ["Il", "parle", "de", "le", "chat"]);
    // the empty node is skipped
    assert_eq!(s[2].tokens, ["Dogs", "bark", ",", "cats", "meow"]);
    assert_eq!(s[2].head, [2, 0, 5, 5, 2]);
    assert_eq!(s[0].upos[3], "PUNCT");
    assert_eq!(s[0].xpos[3], ".");
    assert_eq!(s[1].deprel[4], "obl");
}

#[test]
fn tree_distances_and_depths() {
    let tb = parse_conllu(fixture("three.conllu")).unwrap();
    let g = tree_metrics(&tb.sentences[0]);
    assert_eq!(g.depth, [2, 1, 0, 1]);
    assert_eq!(g.dist, array![[0, 1, 2, 3], [1, 0, 1, 2], [2, 1, 0, 1], [3, 2, 1, 0]]);

    let g = tree_metrics(&tb.sentences[1]);
    assert_eq!(g.depth, [1, 0, 2, 2, 1]);
    assert_eq!(g.dist[[2, 0]], 3);
    assert_eq!(g.dist[[2, 3]], 2);

    let g = tree_metrics(&tb.sentences[2]);
    assert_eq!(g.depth, [1, 0, 2, 2, 1]);
    assert_eq!(g.dist[[0, 2]], 3);
    for s in &tb.sentences {
        let g = tree_metrics(s);
        assert_eq!(g.dist, g.dist.t());
    }
}

#[test]
fn punctuation_filtering_of_gold_edges() {
    let tb = parse_conllu(fixture("three.conllu")).unwrap();
    let s = &tb.sentences[2];
    let mask = s.punct_mask(&PunctuationSet::default());
    assert_eq!(mask, [false, false, true, false, false]);
    let all = s.gold_edges(None);
    let kept = s.gold_edges(Some(&mask));
    assert_eq!(all.len(), 4);
    assert_eq!(kept.into_iter().collect::<Vec<_>>(), [(0, 1), (1, 4), (3, 4)]);
    assert!(!s.punct_mask(&PunctuationSet::none()).contains(&true));
}

fn fixture_pemb() -> Pemb {
    let tb = parse_conllu(fixture("three.conllu")).unwrap();
    let dim = 3;
    let sentences = tb
        .sentences
        .iter()
        .enumerate()
        .map(|(k, s)| {
            Array2::from_shape_fn((s.len(), dim), |(i, j)| {
                // awkward values: subnormal, negative zero, non-dyadic fractions
                match (k + i + j) % 4 {
                    0 => f32::MIN_POSITIVE / 8.0,
                    1 => -0.0,
                    2 => 1.0 / 3.0 + i as f32,
                    _ => -(j as f32 + 0.1),
                }
            })
        })
        .collect();
    Pemb { dim, sentences }
}

#[test]
fn pemb_round_trip_is_bit_exact() {
    let pemb = fixture_pemb();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("three.pemb");
    write_pemb(&path, &pemb).unwrap();
    let back = read_pemb(&path).unwrap();
    assert_eq!(back.dim, pemb.dim);
    for (a, b) in pemb.sentences.iter().zip(&back.sentences) {
        assert_eq!(a.shape(), b.shape());
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(encode_pemb(&decode_pemb(&encode_pemb(&pemb)).unwrap()), encode_pemb(&pemb));

    let mut tb = parse_conllu(fixture("three.conllu")).unwrap();
    tb.attach(&back).unwrap();
    assert_eq!(tb.sentences[1].embedding.as_ref().unwrap().dim(), (5, 3));
}

/// Set `HYPERPROBE_BLESS=1` to rewrite the golden file after an intended
/// rendering change.
#[test]
fn golden_svg() {
    let tb = parse_conllu(fixture("three.conllu")).unwrap();
    let s = &tb.sentences[0];
    let emb = array![[0.5, 0.1, 0.0], [0.3, 0.2, 0.1], [0.0, 0.0, 0.05], [-0.2, 0.3, -0.1]];
    let model = Model::new(Probe::Poincare(PoincareProbe {
        p: Array2::eye(3),
        q: Array2::eye(3),
        c: Curvature::new(1.0).unwrap(),
        use_q: false,
    }));
    let q = model.project_sentence(emb.view());
    let predicted = mst_decode(predicted_sq_distances(&model, &q).view(), None);
    let scene = syntax_scene(&model, &s.tokens, emb.view(), &s.gold_edges(None), &predicted).unwrap();
    let svg = render_svg(&scene, &RenderConfig::default());
    let path = fixture("scene.svg");
    if std::env::var_os("HYPERPROBE_BLESS").is_some() {
        std::fs::write(&path, &svg).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden file missing; run with HYPERPROBE_BLESS=1");
    assert_eq!(svg, golden);
}
