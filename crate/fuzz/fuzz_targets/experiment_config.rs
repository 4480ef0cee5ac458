#![no_main]

use libfuzzer_sys::fuzz_target;
use meanfield_lab::{parse_config, Command};

const COMMANDS: [Command; 7] = [
    Command::SolveMfg,
    Command::SolveMkv,
    Command::Compare,
    Command::Examples,
    Command::Emissions,
    Command::Simulate,
    Command::Oracle,
];

fuzz_target!(|data: &[u8]| {
    let Ok(cfg) = parse_config(data) else {
        return;
    };
    for c in COMMANDS {
        let _ = cfg.validate(c);
    }
    if let Some(spec) = &cfg.model {
        let _ = spec.build();
    }
    if let Some(e) = &cfg.emissions {
        let _ = e.validate();
    }
    let round_trip = serde_json::to_string(&cfg).expect("config serializes");
    if let Ok(again) = parse_config(round_trip.as_bytes()) {
        assert_eq!(serde_json::to_string(&again).unwrap(), round_trip);
    }
});
