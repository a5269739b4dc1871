use koppelman::algebra::{parse_poly, Universe};
use koppelman::hefer::hefer_decompose;
use proptest::prelude::*;

fn homogeneous(n: usize, d: u32, coeffs: &[i64]) -> String {
    let mut exps = vec![];
    let mut stack = vec![(vec![], d)];
    while let Some((e, left)) = stack.pop() {
        if e.len() == n {
            exps.push([e, vec![left]].concat());
            continue;
        }
        for k in 0..=left {
            let mut e2: Vec<u32> = e.clone();
            e2.push(k);
            stack.push((e2, left - k));
        }
    }
    let terms: Vec<String> = exps
        .iter()
        .zip(coeffs.iter().cycle())
        .filter(|(_, c)| **c != 0)
        .map(|(e, c)| {
            let mono: Vec<String> = e.iter().enumerate().map(|(j, k)| format!("zeta{j}^{k}")).collect();
            format!("({c})*{}", mono.join("*"))
        })
        .collect();
    if terms.is_empty() { "0".into() } else { terms.join(" + ") }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposition_satisfies_identity(
        n in 1usize..=3,
        d in 1u32..=4,
        coeffs in prop::collection::vec(-5i64..=5, 1..12),
    ) {
        prop_assume!(coeffs.iter().any(|c| *c != 0));
        let f = parse_poly(&homogeneous(n, d, &coeffs), Universe::new(n)).unwrap();
        let h = hefer_decompose(&f, n).unwrap();
        prop_assert!(h.identity_residual().is_zero());
        prop_assert_eq!(h.h.len(), n + 1);
    }
}
