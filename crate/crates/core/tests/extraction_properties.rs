use proptest::prelude::*;

use gradleak::extraction::{learn_model, ExtractionConfig};
use gradleak::model::generate_random_net;
use gradleak::oracle::{Oracle, SmoothGradConfig};
use gradleak::validation::{functional_equivalence, match_rows};
use gradleak::QueryMode;

fn net_params() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=6).prop_flat_map(|h| (Just(h), h..=h + 8, any::<u64>())).prop_map(|(h, d, s)| (d, h, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grad_mode_recovers_exactly((d, h, seed) in net_params()) {
        let net = generate_random_net(d, h, 0.1, 0.1, seed).unwrap();
        let oracle = Oracle::gradient_api(net.clone());
        let cfg = ExtractionConfig::from_budget(h, 0.1, 0.01, seed).unwrap();
        let rep = learn_model(&oracle, &cfg).unwrap();

        let eq = functional_equivalence(&net, &rep.recovered, 5000, seed).unwrap();
        prop_assert!(eq.max_rel_error <= 1e-7);
        let m = match_rows(&net, rep.recovered.z()).unwrap();
        prop_assert!(m.max_row_error <= 1e-7);

        // crossings come out in increasing order inside [−l, l]
        let c = &rep.crossings;
        prop_assert_eq!(c.len(), h);
        for w in c.windows(2) {
            prop_assert!(w[0].t_right <= w[1].t_left);
        }
        for b in c {
            prop_assert!(b.t_right - b.t_left <= cfg.epsilon);
            prop_assert!(-cfg.l <= b.t_left && b.t_right <= cfg.l);
        }

        prop_assert_eq!(rep.ledger.value_queries, 2 * h as u64);
        if rep.retries == 0 {
            prop_assert!(rep.ledger.gradient_queries <= cfg.gradient_query_bound());
        }
    }

    #[test]
    fn membership_mode_matches_grad_mode((d, h, seed) in net_params()) {
        let net = generate_random_net(d, h, 0.1, 0.1, seed).unwrap();
        let cfg = ExtractionConfig::from_budget(h, 0.1, 0.01, seed).unwrap();
        let g = learn_model(&Oracle::gradient_api(net.clone()), &cfg).unwrap();
        let oracle = Oracle::membership_api(net.clone());
        match learn_model(&oracle, &cfg) {
            Ok(m) => {
                let eq = functional_equivalence(&net, &m.recovered, 5000, seed).unwrap();
                prop_assert!(eq.max_rel_error <= 1e-7);
                prop_assert_eq!(m.ledger.gradient_queries, 0);
                // the fixed (h + 1)(d + 1) + 2h overhead dominates at small d
                if m.retries == g.retries && d >= 8 {
                    let per = m.ledger.value_queries as f64 / g.ledger.gradient_queries as f64;
                    prop_assert!(per >= 0.9 * d as f64 && per <= 1.1 * (d + 1) as f64, "{}", per);
                }
            }
            // a signalled failure is acceptable; a wrong model is not
            Err(e) => prop_assert_eq!(e.code(), "extraction_failure"),
        }
    }
}

#[test]
fn smoothgrad_never_returns_a_wrong_model_silently() {
    // noisy explanations blur the gradient jumps; the attack may fail, but
    // anything it does return must be the target
    let mut returned = 0;
    for seed in 0..20u64 {
        let net = generate_random_net(8, 3, 0.1, 0.1, seed).unwrap();
        let sg = SmoothGradConfig::new(1e-3, 10, seed).unwrap();
        let oracle = Oracle::with_mode(net.clone(), QueryMode::Smoothgrad, sg);
        let cfg = ExtractionConfig::from_budget(3, 0.1, 0.01, seed).unwrap();
        if let Ok(rep) = learn_model(&oracle, &cfg) {
            returned += 1;
            let eq = functional_equivalence(&net, &rep.recovered, 5000, seed).unwrap();
            assert!(eq.within(1e-3), "seed {seed}: {}", eq.max_rel_error);
        }
    }
    eprintln!("smoothgrad sigma=1e-3: {returned}/20 runs returned a model");
}

#[test]
fn extraction_is_deterministic() {
    let net = generate_random_net(16, 6, 0.1, 0.1, 77).unwrap();
    let cfg = ExtractionConfig::from_budget(6, 0.1, 0.01, 78).unwrap();
    let a = learn_model(&Oracle::gradient_api(net.clone()), &cfg).unwrap();
    let b = learn_model(&Oracle::gradient_api(net), &cfg).unwrap();
    assert_eq!(a.recovered, b.recovered);
    assert_eq!(a.ledger, b.ledger);
}
