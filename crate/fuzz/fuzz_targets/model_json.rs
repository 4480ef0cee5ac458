#![no_main]

use libfuzzer_sys::fuzz_target;
use meanfield::lqmodel::LQModelSpec;
use meanfield::mfg_lq::{solve_mfg, MfgOptions};
use meanfield::mkv_lq::solve_mkv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = LQModelSpec::from_json_str(text) else {
        return;
    };
    let Ok(model) = spec.build() else {
        return;
    };
    if model.grid().n_steps() > 4096 {
        return;
    }
    // Errors are fine; panics and non-finite successes are not.
    if let Ok(sol) = solve_mfg(&model, MfgOptions::short_horizon()) {
        assert!(sol.mean_flow.values().iter().all(|v| v.is_finite()));
    }
    if let Ok(sol) = solve_mkv(&model) {
        assert!(sol.xbar.values().iter().all(|v| v.is_finite()));
    }
});
