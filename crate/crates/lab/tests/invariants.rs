use halfspace_lab::config::{parse_real, Config};
use halfspace_lab::output::{fmt_f64, Check};
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

proptest! {
    #[test]
    fn written_floats_read_back_exactly(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        prop_assert_eq!(parse_real(&fmt_f64(v)), Some(v));
    }

    #[test]
    fn pi_multiples(c in -1e6f64..1e6, den in 1u32..100) {
        prop_assert_eq!(parse_real(&format!("{c}pi")), Some(c * PI));
        prop_assert_eq!(parse_real(&format!("{c} * pi / {den}")), Some(c * PI / den as f64));
    }

    #[test]
    fn ini_sections_flatten_and_every_key_must_be_read(
        entries in prop::collection::btree_map(("[a-c]", "[a-z]{1,6}"), -1e9f64..1e9, 1..12),
        skip in 0usize..12,
    ) {
        let mut sections: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
        for ((s, k), v) in &entries {
            sections.entry(s.as_str()).or_default().push((k.as_str(), *v));
        }
        let mut text = String::new();
        for (s, kv) in &sections {
            text.push_str(&format!("[{s}]\n"));
            for (k, v) in kv {
                text.push_str(&format!("{k} = {}\n", fmt_f64(*v)));
            }
        }
        let cfg = Config::parse(&text).unwrap();
        let skipped = skip % entries.len();
        for (i, ((s, k), v)) in entries.iter().enumerate() {
            if i != skipped {
                prop_assert_eq!(cfg.real(&format!("{s}.{k}"), f64::NAN).unwrap(), *v);
            }
        }
        let err = cfg.finish().unwrap_err().to_string();
        let ((s, k), _) = entries.iter().nth(skipped).unwrap();
        let expected = format!("{s}.{k}");
        prop_assert!(err.contains(&expected), "{}", err);
    }

    #[test]
    fn upper_brackets_are_strict(v in -10f64..10.0, hi in -10f64..10.0) {
        prop_assert_eq!(Check::below("x", v, hi).pass, v < hi);
        prop_assert_eq!(Check::above("x", v, hi).pass, v >= hi);
    }
}
