#![no_main]
use libfuzzer_sys::fuzz_target;

use hidden_rewards::model::Preset;
use hidden_rewards::output::parse_reward_model;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = parse_reward_model(text) {
        let cfg = Preset::Table1N5.config();
        let _ = model.validate(&cfg);
    }
});
