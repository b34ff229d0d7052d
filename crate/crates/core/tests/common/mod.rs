#![allow(dead_code)]

use gbdp::cuts::CutStack;
use gbdp::model::DPInstance;
use gbdp::oracle::ExactValueTable;

/// Two slots of capacity two, ten epochs, prices on {0, 2.5, ..., 10}.
pub fn oracle_instance() -> DPInstance {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/small.toml"))
        .expect("configs/small.toml");
    DPInstance::from_toml_str(&text).expect("valid small config")
}

/// Two unit-capacity slots over three epochs.
pub fn tiny_instance(lambda: f64) -> DPInstance {
    let mut inst = oracle_instance();
    inst.x_max = vec![1, 1];
    inst.horizon = 3;
    inst.lambda = lambda;
    inst.big_m = inst.default_big_m();
    inst
}

/// `min over (x, t) of Q_t(x) - V_t(x)` and the same maximum.
pub fn gap_range(table: &ExactValueTable, cuts: &CutStack) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for t in 1..=table.horizon() + 1 {
        for (i, x) in table.space.states().enumerate() {
            let g = cuts.evaluate(t, &x).unwrap() - table.stage(t)[i];
            lo = lo.min(g);
            hi = hi.max(g);
        }
    }
    (lo, hi)
}

/// Reduced desk-scale variant used for criterion 10 in CI.
pub fn desk_reduced_instance() -> DPInstance {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk_n5.toml"))
        .expect("configs/desk_n5.toml");
    DPInstance::from_toml_str(&text).expect("valid n=5 config")
}
