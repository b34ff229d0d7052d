use gbdp::model::{desk_instance, DPInstance};
use proptest::prelude::*;

fn instance(n: usize, lambda: f64, beta_d: f64, cap: u32) -> DPInstance {
    let mut inst = desk_instance(n);
    inst.lambda = lambda;
    inst.beta_d = beta_d;
    inst.x_max = vec![cap; n];
    inst.big_m = inst.default_big_m();
    inst
}

fn arb_case() -> impl Strategy<Value = (DPInstance, Vec<u32>, Vec<f64>)> {
    (1usize..5, 0.0f64..=1.0, -2.0f64..-0.01, 1u32..4).prop_flat_map(|(n, lambda, beta_d, cap)| {
        let inst = instance(n, lambda, beta_d, cap);
        (
            Just(inst),
            proptest::collection::vec(0..=cap, n),
            proptest::collection::vec(0.0f64..=10.0, n),
        )
    })
}

proptest! {
    #[test]
    fn probabilities_form_a_distribution((inst, x, d) in arb_case()) {
        let p = inst.transition_probs(&x, &d).unwrap();
        let total = p.stay + p.step.iter().sum::<f64>();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&p.stay));
        for (s, &q) in p.step.iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(&q));
            if x[s] == inst.x_max[s] {
                prop_assert_eq!(q, 0.0);
            }
        }
        prop_assert!(p.stay >= 1.0 - inst.lambda - 1e-15);
    }

    #[test]
    fn raising_a_price_lowers_its_purchase_probability(
        (inst, x, d) in arb_case(),
        slot in 0usize..4,
        bump in 0.01f64..5.0,
    ) {
        let s = slot % inst.n;
        prop_assume!(inst.lambda > 0.0 && x[s] < inst.x_max[s] && d[s] + bump <= inst.price_hi);
        let before = inst.transition_probs(&x, &d).unwrap().step[s];
        let mut raised = d.clone();
        raised[s] += bump;
        let after = inst.transition_probs(&x, &raised).unwrap().step[s];
        prop_assert!(after < before);
    }

    #[test]
    fn stage_revenue_is_nonnegative((inst, x, d) in arb_case(), slot in 0usize..5) {
        let mut y = x.clone();
        if slot < inst.n {
            y[slot] += 1;
        }
        prop_assert!(inst.stage_revenue(&x, &y, &d).unwrap() >= 0.0);
    }
}

#[test]
fn big_m_dominates_attainable_profit() {
    let inst = desk_instance(17);
    let cap = inst.total_capacity() as f64;
    assert!(inst.big_m > (inst.price_hi + inst.revenue) * cap);
    let mut over = vec![6; 17];
    over[3] = 7;
    assert_eq!(inst.terminal_cost(&over), inst.big_m);
}

#[test]
fn default_profile_hits_target_stay_probability() {
    for n in [1, 5, 17] {
        let inst = desk_instance(n);
        assert!((inst.stay_prob_at_floor() - 0.9951).abs() < 1e-12, "n = {n}");
    }
}

#[test]
fn state_count_follows_capacity_product() {
    let inst = desk_instance(17);
    assert_eq!(inst.state_count(), Some(7u128.pow(17)));
}
