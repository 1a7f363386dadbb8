use std::collections::BTreeSet;

use credible_sdp::annotator::Keyword;
use credible_sdp::monitor::catalog::{init_ids, loop_ids};
use credible_sdp::synth::random_feasible;
use credible_sdp::{emit_annotated_listing, running_example, Flavor, SolverOptions};

const GOLDEN: &str = include_str!("fixtures/running_example.listing.m");

fn listing(flavor: Flavor) -> credible_sdp::AnnotatedListing {
    let prob = running_example::<f64>();
    let opts = SolverOptions::for_problem(&prob).unwrap();
    emit_annotated_listing(&prob, &opts, flavor)
}

#[test]
fn matches_golden_file() {
    assert_eq!(listing(Flavor::PseudoMatlab).text(), GOLDEN);
}

#[test]
fn output_is_deterministic() {
    assert_eq!(listing(Flavor::PseudoMatlab), listing(Flavor::PseudoMatlab));
    assert_eq!(listing(Flavor::CLike), listing(Flavor::CLike));
}

#[test]
fn every_contract_is_placed() {
    let l = listing(Flavor::PseudoMatlab);
    let got: BTreeSet<&str> = l.contract_ids().into_iter().collect();
    let mut want: BTreeSet<String> = init_ids(3).into_iter().collect();
    want.extend(loop_ids());
    let want: BTreeSet<&str> = want.iter().map(String::as_str).collect();
    assert_eq!(got, want);
    assert_eq!(got.len(), 32);
}

#[test]
fn locations_point_at_contract_lines() {
    for flavor in [Flavor::PseudoMatlab, Flavor::CLike] {
        let l = listing(flavor);
        for locs in l.contract_index.values() {
            for loc in locs {
                assert!(loc.first_line >= 1 && loc.first_line <= loc.last_line);
                let block = l.lines[loc.first_line - 1..loc.last_line].join("\n");
                let kw = match loc.keyword {
                    Keyword::Requires => "requires",
                    Keyword::Ensures => "ensures",
                };
                assert!(block.contains(kw), "{block}");
                assert!(block.contains(&loc.text), "{block} lacks {}", loc.text);
            }
        }
    }
}

#[test]
fn literal_contracts_appear() {
    let text = listing(Flavor::PseudoMatlab).text();
    assert!(text.contains("%@ requires trace(X*Z)<=0.1;"));
    assert!(text.contains("%@ ensures phi-0.76*phim<0;"));
    assert!(text.contains("%@ ensures F0>0;"));
}

#[test]
fn c_like_flavor_uses_block_comments() {
    let l = listing(Flavor::CLike);
    let text = l.text();
    assert!(text.contains("/*@ ensures F0>0; */"));
    assert!(!text.contains("%@"));
    assert_eq!(
        l.contract_ids(),
        listing(Flavor::PseudoMatlab).contract_ids()
    );
}

#[test]
fn options_flow_into_clauses() {
    let prob = running_example::<f64>();
    let mut opts = SolverOptions::for_problem(&prob).unwrap();
    opts.gap_ceiling = 0.32;
    let text = emit_annotated_listing(&prob, &opts, Flavor::PseudoMatlab).text();
    assert!(text.contains("trace(X*Z)<=0.32;"));
    assert_ne!(text, GOLDEN);
}

#[test]
fn larger_problem_lists_each_constraint() {
    let prob = random_feasible::<f64>(3, 2).unwrap();
    let opts = SolverOptions::for_problem(&prob).unwrap();
    let l = emit_annotated_listing(&prob, &opts, Flavor::PseudoMatlab);
    let got: BTreeSet<&str> = l.contract_ids().into_iter().collect();
    for id in init_ids(6) {
        assert!(got.contains(id.as_str()), "{id}");
    }
    assert!(l.text().contains("transpose(F6)==F6"));
}

#[test]
fn flavor_names_round_trip() {
    for f in [Flavor::PseudoMatlab, Flavor::CLike] {
        assert_eq!(f.to_string().parse::<Flavor>().unwrap(), f);
    }
    assert!("latex".parse::<Flavor>().is_err());
}
