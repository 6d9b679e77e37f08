use super::*;
use crate::corpus::{BigramVocab, EntryFlags, Sentence, Vocabulary};
use crate::lattice::{build_lattice, Automaton};
use crate::numeric::{init_uniform, sigmoid, Tensor};

fn vocab(words: &[&str]) -> Vocabulary {
    let mut v = Vocabulary::new();
    for w in words {
        for c in w.chars() {
            v.insert(&c.to_string(), EntryFlags::TRAIN).unwrap();
        }
        v.insert(w, EntryFlags::TRAIN).unwrap();
    }
    v
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

fn setup(variant: Variant, v: &Vocabulary, d: usize, l_max: usize, seed: u64) -> (ParamStore, EncoderParams) {
    let mut store = ParamStore::new();
    let params = EncoderParams::register(
        &mut store,
        variant,
        EncoderDims {
            embed: d,
            hidden: d,
            word_rows: v.embedding_rows(),
            bigram_rows: 1,
            l_max,
        },
    )
    .unwrap();
    init_uniform(&mut store, -0.5, 0.5, seed).unwrap();
    (store, params)
}

fn values(g: &Graph<'_>, nodes: &[NodeId]) -> Vec<Vec<f64>> {
    nodes.iter().map(|&n| g.value(n).to_vec()).collect()
}

fn bits(rows: &[Vec<f64>]) -> Vec<Vec<u64>> {
    rows.iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect()
}

#[test]
fn variant_names_parse_back() {
    for v in Variant::ALL {
        assert_eq!(v.name().parse::<Variant>().unwrap(), v);
    }
    assert!("lstm".parse::<Variant>().is_err());
}

#[test]
fn zero_parameters_give_zero_states() {
    let v = vocab(&["ab", "abc"]);
    let a = Automaton::from_vocab(&v);
    let x = chars("abcab");
    let lattice = build_lattice(&x, &a, None);
    for variant in [Variant::Unigram, Variant::WsDag, Variant::WiDag] {
        let (mut store, p) = setup(variant, &v, 3, 3, 1);
        for (_, param) in store.iter_mut() {
            if !param.name.starts_with("emb") {
                param.value.fill(0.0);
            }
        }
        let mut g = Graph::new(&store);
        let states = if variant.is_dag() {
            let inputs = embed_lattice(&mut g, &lattice, &v, p.word_emb).unwrap();
            encode(
                &mut g,
                &p,
                &EncoderInput::Lattice {
                    lattice: &lattice,
                    inputs,
                },
            )
            .unwrap()
        } else {
            let z = embed_unigram(&mut g, &x, &v, p.word_emb).unwrap();
            encode(&mut g, &p, &EncoderInput::Sequence(z)).unwrap()
        };
        for h in values(&g, &states.h) {
            assert!(h.iter().all(|&c| c == 0.0), "{variant}");
        }
    }
}

#[test]
fn one_step_matches_hand_computation() {
    let mut store = ParamStore::new();
    let cell = CellParams::register(&mut store, "cell", 1, 1, 1).unwrap();
    // per gate: (w, u, b)
    let set = [(0.3, 0.1, -0.2), (-0.4, 0.2, 0.5), (0.7, -0.3, 0.1), (0.9, 0.6, -0.8)];
    for (gate, &(w, u, b)) in cell.gates.iter().zip(&set) {
        *store.value_mut(gate.w[0]) = Tensor::from_vec(&[1, 1], vec![w]).unwrap();
        *store.value_mut(gate.u[0]) = Tensor::from_vec(&[1, 1], vec![u]).unwrap();
        *store.value_mut(gate.b) = Tensor::vector(vec![b]);
    }
    let z = 0.5;
    let mut g = Graph::new(&store);
    let zn = g.input(vec![z]).unwrap();
    let out = lstm_forward(&mut g, &[zn], &cell, Direction::Forward).unwrap();

    let i = sigmoid(0.3 * z - 0.2);
    let o = sigmoid(-0.4 * z + 0.5);
    let cand = (0.9 * z - 0.8f64).tanh();
    let c = cand * i;
    let h = o * c.tanh();
    assert!((g.value(out.c[0])[0] - c).abs() < 1e-15);
    assert!((g.value(out.h[0])[0] - h).abs() < 1e-15);
}

#[test]
fn single_character_lattices_reduce_to_lstm() {
    let v = vocab(&["ab", "bca", "abcd"]);
    let a = Automaton::from_vocab(&v);
    let x = chars("abcdxab");
    let lattice = build_lattice(&x, &a, Some(1));
    assert_eq!(lattice.edge_count(), x.len());
    for (variant, l_max) in [(Variant::WsDag, 1), (Variant::WiDag, 4)] {
        let (store, p) = setup(variant, &v, 3, l_max, 11);
        let mut g = Graph::new(&store);
        let z = embed_unigram(&mut g, &x, &v, p.word_emb).unwrap();
        let inputs = embed_lattice(&mut g, &lattice, &v, p.word_emb).unwrap();
        for dir in [Direction::Forward, Direction::Backward] {
            let cell = if dir == Direction::Forward { &p.fwd } else { &p.bwd };
            let plain = lstm_forward(&mut g, &z, cell, dir).unwrap();
            let dag = if variant == Variant::WsDag {
                ws_dag_lstm_forward(&mut g, &lattice, &inputs, cell, dir).unwrap()
            } else {
                wi_dag_lstm_forward(&mut g, &lattice, &inputs, cell, dir).unwrap()
            };
            assert_eq!(
                bits(&values(&g, &plain.h)),
                bits(&values(&g, &dag.h)),
                "{variant} {dir:?}"
            );
            assert_eq!(bits(&values(&g, &plain.c)), bits(&values(&g, &dag.c)));
        }
    }
}

#[test]
fn forget_gates_follow_edge_count() {
    let v = vocab(&["ab", "bc", "abc"]);
    let a = Automaton::from_vocab(&v);
    let x = chars("abcab");
    let lattice = build_lattice(&x, &a, None);
    let (store, p) = setup(Variant::WiDag, &v, 2, 2, 3);
    let mut g = Graph::new(&store);
    let inputs = embed_lattice(&mut g, &lattice, &v, p.word_emb).unwrap();
    let f = wi_dag_lstm_forward(&mut g, &lattice, &inputs, &p.fwd, Direction::Forward).unwrap();
    let b = ws_dag_lstm_forward(&mut g, &lattice, &inputs, &p.bwd, Direction::Backward).unwrap();
    assert_eq!(f.forget_gates, lattice.edge_count());
    assert_eq!(b.forget_gates, lattice.edge_count());
    assert!(lattice.edge_count() > x.len());
}

#[test]
fn long_words_use_the_last_weight_family() {
    let mut store = ParamStore::new();
    let cell = CellParams::register(&mut store, "c", 2, 2, 3).unwrap();
    let gate = &cell.gates[Gate::Input as usize];
    assert_eq!(gate.weights_for(5), (gate.w[2], gate.u[2]));
    assert_eq!(gate.weights_for(3), (gate.w[2], gate.u[2]));
    assert_eq!(gate.weights_for(2), (gate.w[1], gate.u[1]));

    // A WI encoder with three families must agree with one whose families
    // four and five copy family three.
    let v = vocab(&["abcde", "ab"]);
    let a = Automaton::from_vocab(&v);
    let x = chars("abcdeab");
    let lattice = build_lattice(&x, &a, None);
    assert!(lattice.forward(5).iter().any(|e| e.len == 5));
    let (small, ps) = setup(Variant::WiDag, &v, 2, 3, 21);
    let (mut big, pb) = setup(Variant::WiDag, &v, 2, 5, 99);
    for (_, param) in big.iter_mut() {
        let source = param.name.replace(".l4", ".l3").replace(".l5", ".l3");
        param.value = small.value(small.id(&source).unwrap()).clone();
    }
    let run = |store: &ParamStore, p: &EncoderParams| {
        let mut g = Graph::new(store);
        let inputs = embed_lattice(&mut g, &lattice, &v, p.word_emb).unwrap();
        let s = encode(
            &mut g,
            p,
            &EncoderInput::Lattice {
                lattice: &lattice,
                inputs,
            },
        )
        .unwrap();
        bits(&values(&g, &s.h))
    };
    assert_eq!(run(&small, &ps), run(&big, &pb));
}

#[test]
fn weight_names_carry_length_suffix() {
    let v = vocab(&["ab"]);
    let (store, _) = setup(Variant::WiDag, &v, 2, 2, 1);
    assert!(store.id("enc.fwd.W_i.l1").is_some());
    assert!(store.id("enc.bwd.U_f.l2").is_some());
    assert!(store.id("enc.bwd.b_c").is_some());
    let (store, _) = setup(Variant::Unigram, &v, 2, 2, 1);
    assert!(store.id("enc.fwd.W_i").is_some());
    assert!(store.id("enc.fwd.W_i.l1").is_none());
}

#[test]
fn concat_doubles_width_and_checks_lengths() {
    let v = vocab(&["ab"]);
    let (store, p) = setup(Variant::Unigram, &v, 2, 1, 5);
    let mut g = Graph::new(&store);
    let z = embed_unigram(&mut g, &chars("abz"), &v, p.word_emb).unwrap();
    assert_eq!(g.value(z[2]), store.value(p.word_emb).row(Vocabulary::OOV));
    let again = embed_unigram(&mut g, &['a'], &v, p.word_emb).unwrap();
    assert_eq!(g.value(z[0]), g.value(again[0]));
    let f = lstm_forward(&mut g, &z, &p.fwd, Direction::Forward).unwrap();
    let b = lstm_forward(&mut g, &z, &p.bwd, Direction::Backward).unwrap();
    let state = bilstm_concat(&mut g, f.clone(), b.clone()).unwrap();
    assert_eq!(g.value(state.h[0]).len(), 4);
    assert_eq!(&g.value(state.h[1])[..2], g.value(f.h[1]));
    assert_eq!(&g.value(state.h[1])[2..], g.value(b.h[1]));
    let swapped = bilstm_concat(&mut g, b.clone(), f.clone()).unwrap();
    assert_eq!(&g.value(swapped.h[1])[..2], g.value(b.h[1]));
    let mut short = b;
    short.h.pop();
    assert!(bilstm_concat(&mut g, f, short).is_err());
}

#[test]
fn bigram_inputs_include_boundary_pairs() {
    let corpus = [Sentence::from_words(&["ab", "c"])];
    let v = vocab(&["ab", "c"]);
    let bigrams = BigramVocab::build(&corpus);
    let mut store = ParamStore::new();
    let p = EncoderParams::register(
        &mut store,
        Variant::Bigram,
        EncoderDims {
            embed: 2,
            hidden: 2,
            word_rows: v.embedding_rows(),
            bigram_rows: bigrams.len(),
            l_max: 1,
        },
    )
    .unwrap();
    init_uniform(&mut store, -0.5, 0.5, 2).unwrap();
    let table = store.value(p.bigram_emb.unwrap()).clone();
    let mut g = Graph::new(&store);
    let x = chars("q");
    let z = embed_bigram(&mut g, &x, &v, &bigrams, p.word_emb, p.bigram_emb.unwrap()).unwrap();
    assert_eq!(g.value(z[0]).len(), 6);
    // (<BOS>, q) and (q, <EOS>) are unseen
    assert_eq!(&g.value(z[0])[2..4], table.row(BigramVocab::OOV));
    let x = chars("abc");
    let z = embed_bigram(&mut g, &x, &v, &bigrams, p.word_emb, p.bigram_emb.unwrap()).unwrap();
    let bos = bigrams.id(crate::corpus::BigramUnit::Bos, crate::corpus::BigramUnit::Char('a'));
    assert_ne!(bos, BigramVocab::OOV);
    assert_eq!(&g.value(z[0])[2..4], table.row(bos));
    assert_eq!(&g.value(z[0])[4..6], &g.value(z[1])[2..4]);
}

#[test]
fn dropout_scales_survivors() {
    use rand::SeedableRng;
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.input(vec![1.0; 1000]).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let y = dropout(&mut g, x, 0.25, &mut rng).unwrap();
    let vals = g.value(y);
    assert!(vals.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-15));
    let kept = vals.iter().filter(|&&v| v != 0.0).count();
    assert!((650..850).contains(&kept));
    assert_eq!(dropout(&mut g, x, 0.0, &mut rng).unwrap(), x);
}

/// sum_i <c_i, h_i> for fixed random c.
fn probe_loss(g: &mut Graph<'_>, h: &[NodeId]) -> NodeId {
    let mut terms = Vec::new();
    for (i, &hi) in h.iter().enumerate() {
        let n = g.value(hi).len();
        let c: Vec<f64> = (0..n).map(|k| ((i * 7 + k * 3) % 5) as f64 / 5.0 - 0.4).collect();
        let cn = g.input(c).unwrap();
        let prod = g.mul(hi, cn).unwrap();
        for k in 0..n {
            terms.push(g.pick(prod, k).unwrap());
        }
    }
    g.sum(&terms).unwrap()
}

#[test]
fn encoder_gradients_match_finite_differences() {
    let v = vocab(&["ab", "bc", "abc"]);
    let a = Automaton::from_vocab(&v);
    let x = chars("abcab");
    let lattice = build_lattice(&x, &a, None);
    for variant in [Variant::Unigram, Variant::WsDag, Variant::WiDag] {
        let (store, p) = setup(variant, &v, 3, 2, 8);
        let eval = |s: &ParamStore| {
            let mut g = Graph::new(s);
            let input = if variant.is_dag() {
                let inputs = embed_lattice(&mut g, &lattice, &v, p.word_emb).unwrap();
                EncoderInput::Lattice {
                    lattice: &lattice,
                    inputs,
                }
            } else {
                EncoderInput::Sequence(embed_unigram(&mut g, &x, &v, p.word_emb).unwrap())
            };
            let st = encode(&mut g, &p, &input).unwrap();
            let l = probe_loss(&mut g, &st.h);
            (g.scalar(l), g.backward(l).unwrap())
        };
        let (_, grads) = eval(&store);
        let (mut total, mut bad) = (0, 0);
        for (id, param) in store.iter() {
            let analytic = grads.dense(id, &store).unwrap_or_else(|| vec![0.0; param.value.len()]);
            for k in 0..param.value.len() {
                let mut plus = store.clone();
                plus.value_mut(id).data_mut()[k] += 1e-5;
                let mut minus = store.clone();
                minus.value_mut(id).data_mut()[k] -= 1e-5;
                let fd = (eval(&plus).0 - eval(&minus).0) / 2e-5;
                let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-6);
                total += 1;
                bad += usize::from(rel >= 1e-4);
            }
        }
        assert!(bad * 100 <= total, "{variant}: {bad}/{total}");
    }
}
