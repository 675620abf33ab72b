//! Generate a synthetic instance, write it in the text format and read it
//! back.

use spcap::instance::{generate_instance, load_instance, save_instance, validate_instance};
use spcap::GenConfig;

pub fn run_example() -> String {
    let mut config = GenConfig::new(12, 4, 3, 42);
    config.area_side = 500.0;
    let inst = generate_instance(&config).expect("valid settings");
    assert!(validate_instance(&inst).is_empty());
    let text = save_instance(&inst);
    let back = load_instance(&text).expect("round trip");
    assert_eq!(back, inst);
    format!(
        "{} terminals, {} bases, {} power levels; {} lines of instance text",
        inst.num_terminals(),
        inst.num_bases(),
        inst.num_levels(),
        text.lines().count()
    )
}

#[allow(dead_code)]
fn main() {
    println!("{}", run_example());
}
