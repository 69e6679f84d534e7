use proptest::prelude::*;
use tash_core::corpus::sgtin_corpus;
use tash_core::llrp::{
    ReaderProfile, encode_provisioning, encode_table_build, parse_aospec, parse_rospec,
    render_aospec, render_rospec,
};
use tash_core::tash::{TashChainSpec, TashOp, compute_digest, entry_inventory_chain};
use tash_core::Bits;

const GOLDEN: &str = include_str!("golden/rospec_l2_seed5.xml");

#[test]
fn golden_rospec_is_byte_exact() {
    let docs = encode_table_build(2, &TashChainSpec::single(5), &ReaderProfile::default(), true).unwrap();
    assert_eq!(docs.len(), 1);
    let xml = render_rospec(&docs[0]).unwrap();
    assert_eq!(xml.as_bytes(), GOLDEN.as_bytes());
    assert!(!xml.contains('\r'));
}

#[test]
fn golden_rospec_decodes_to_the_entry_chains() {
    let doc = parse_rospec(GOLDEN).unwrap();
    assert_eq!(doc.aispecs.len(), 4);
    for a in &doc.aispecs {
        assert_eq!(a.filters.len(), 2);
        assert_eq!(a.filters, entry_inventory_chain(a.entry, 2, &TashChainSpec::single(5)).unwrap());
    }
}

#[test]
fn provisioning_of_a_single_epc() {
    let epc = sgtin_corpus(1, 3).remove(0);
    let doc = encode_provisioning([&epc]);
    assert_eq!(doc.jobs.len(), 1);
    assert_eq!(doc.jobs[0].data.len(), 8);
    assert_eq!(doc.jobs[0].word_offset, 0);
    assert_eq!(Bits::from_words(&doc.jobs[0].data, 128).unwrap(), compute_digest(&epc));
    let xml = render_aospec(&doc).unwrap();
    assert_eq!(parse_aospec(&xml).unwrap(), doc);
}

fn chain_strategy() -> impl Strategy<Value = TashChainSpec> {
    (0usize..120, proptest::collection::vec((0usize..3, 0usize..120), 0..3)).prop_map(|(first, rest)| {
        rest.into_iter()
            .fold(TashChainSpec::single(first), |c, (op, r)| c.then(TashOp::ALL[op], r))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn documents_round_trip(l in 0u32..7, chain in chain_strategy(), truncate in any::<bool>()) {
        let docs = encode_table_build(l, &chain, &ReaderProfile::default(), truncate).unwrap();
        prop_assert_eq!(docs.len(), (1usize << l).div_ceil(16));
        for doc in &docs {
            prop_assert!(doc.aispecs.len() <= 16);
            let xml = render_rospec(doc).unwrap();
            let back = parse_rospec(&xml).unwrap();
            prop_assert_eq!(&back, doc);
            for a in &back.aispecs {
                prop_assert!(a.filters.len() <= 4);
                let expected = if truncate {
                    entry_inventory_chain(a.entry, l, &chain).unwrap()
                } else {
                    tash_core::tash::entry_selects(a.entry, l, &chain).unwrap()
                };
                prop_assert_eq!(&a.filters, &expected);
            }
        }
    }

    #[test]
    fn aospecs_round_trip(n in 0usize..40, seed in any::<u64>()) {
        let epcs = sgtin_corpus(n, seed);
        let doc = encode_provisioning(&epcs);
        let xml = render_aospec(&doc).unwrap();
        prop_assert_eq!(render_aospec(&doc).unwrap(), xml.clone());
        prop_assert_eq!(parse_aospec(&xml).unwrap(), doc);
    }
}
