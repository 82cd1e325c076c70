mod common;

use proptest::prelude::*;
use wcfg::grammar::normalize;
use wcfg::oracle::enumerate_min_weights;
use wcfg::soft::{edit_encoding, Distance, SoftSpec};
use wcfg::wcyk::propagate;
use wcfg::{NonTerminal, Production, Rhs, Terminal, WeightedGrammar};

use common::soft_checks::{soft_vs_oracle, triple};

const G0: &str = include_str!("../data/g0.gr");

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn hamming_matches_oracle(seed in any::<u64>()) {
        let (base, d, z) = triple(seed, Distance::Hamming);
        prop_assert_eq!(soft_vs_oracle(&base, &d, z, Distance::Hamming), Ok(()));
    }

    #[test]
    fn edit_matches_oracle(seed in any::<u64>()) {
        let (base, d, z) = triple(seed, Distance::Edit);
        prop_assert_eq!(soft_vs_oracle(&base, &d, z, Distance::Edit), Ok(()));
    }

    #[test]
    fn zero_distance_is_hard(seed in any::<u64>()) {
        let (base, d, _) = triple(seed, Distance::Hamming);
        let hard = propagate(&base, 0, &d).unwrap();
        for distance in [Distance::Hamming, Distance::Edit] {
            let soft = SoftSpec::new(base.clone(), distance, 0).unwrap().propagate(&d).unwrap();
            prop_assert_eq!(soft.domains(), hard.domains());
        }
    }
}

/// The edit encoding of G0 before normalization, built independently.
fn raw_edit_g0(g0: &WeightedGrammar) -> WeightedGrammar {
    let mut ps = g0.productions.clone();
    let (a, b) = (NonTerminal(1), NonTerminal(2));
    ps.push(Production::new(a, Rhs::Terminal(Terminal(1)), 1));
    ps.push(Production::new(b, Rhs::Terminal(Terminal(0)), 1));
    for x in [a, b] {
        ps.push(Production::new(x, Rhs::Epsilon, 1));
        for t in [Terminal(0), Terminal(1)] {
            ps.push(Production::new(x, Rhs::ExtLeftRec(x, t), 1));
            ps.push(Production::new(x, Rhs::ExtRightRec(t, x), 1));
        }
    }
    WeightedGrammar::new(g0.symbols.clone(), ps)
}

#[test]
fn edit_encoded_g0_golden() {
    let g0 = WeightedGrammar::parse(G0).unwrap();
    let encoded = edit_encoding(&g0).unwrap();
    assert_eq!(encoded.to_string(), include_str!("golden/g0_edit.gr"));
    assert_eq!(WeightedGrammar::parse(&encoded.to_string()).unwrap(), encoded);
}

#[test]
fn edit_encoded_g0_keeps_string_weights() {
    let g0 = WeightedGrammar::parse(G0).unwrap();
    let raw = raw_edit_g0(&g0);
    let encoded = edit_encoding(&g0).unwrap();
    let a: Vec<_> = enumerate_min_weights(&raw, 4).unwrap().iter().map(|(w, c)| (w.clone(), c)).collect();
    let b: Vec<_> = enumerate_min_weights(&encoded, 4).unwrap().iter().map(|(w, c)| (w.clone(), c)).collect();
    assert_eq!(a, b);
    assert_eq!(normalize(&raw).unwrap().productions.len(), encoded.productions.len());
    // "ab" costs its base weight, "" deletes both symbols.
    let t = enumerate_min_weights(&encoded, 4).unwrap();
    assert_eq!(t.get(&[Terminal(0), Terminal(1)]), Some(3));
    assert_eq!(t.get(&[]), Some(2));
}
