//! Canonical formula text parses back to the same model.

use prior_forge::formula::{parse_formula, ModelSpec, RandomExpr, RandomTerm};
use prior_forge::Family;
use proptest::prelude::*;

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}".prop_filter("reserved", |s| s != "y")
}

fn spec() -> impl Strategy<Value = ModelSpec> {
    (
        prop::collection::btree_set(ident(), 0..4),
        any::<bool>(),
        prop::collection::vec((prop::option::of(ident()), ident()), 0..3),
    )
        .prop_filter_map("needs a term", |(fixed, has_intercept, random)| {
            let fixed_terms: Vec<String> = fixed.into_iter().collect();
            if !has_intercept && fixed_terms.is_empty() {
                return None;
            }
            let mut random_terms: Vec<RandomTerm> = Vec::new();
            for (expr, group) in random {
                let expr = expr.map_or(RandomExpr::Intercept, RandomExpr::Column);
                let t = RandomTerm { expr, group };
                if !random_terms.contains(&t) {
                    random_terms.push(t);
                }
            }
            Some(ModelSpec {
                response: "y".into(),
                fixed_terms,
                has_intercept,
                random_terms,
                family: Family::Gaussian,
            })
        })
}

proptest! {
    #[test]
    fn display_parse_round_trip(s in spec()) {
        let text = s.to_string();
        let back = parse_formula(&text).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn whitespace_is_insignificant(s in spec()) {
        let text = s.to_string();
        let spaced = text.replace('+', "  +\t").replace('|', " | ").replace('~', " ~  ");
        prop_assert_eq!(parse_formula(&spaced).unwrap(), parse_formula(&text).unwrap());
    }

    #[test]
    fn errors_point_inside_the_text(s in "[a-z~+() |0-9*-]{0,20}") {
        if let Err(prior_forge::Error::Syntax { offset, .. }) = parse_formula(&s) {
            prop_assert!(offset <= s.len());
        }
    }
}
