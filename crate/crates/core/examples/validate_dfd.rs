//! Load a data flow diagram, validate it and print the process order.
//!
//! cargo run --example validate_dfd -- fixtures/bio/dfd.json

use std::path::PathBuf;

use structind::dfd::{process_ordering, validate_background};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/bio/dfd.json"));
    let background = match structind::cli::read_dfd(&path) {
        Ok(bg) => bg,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };

    let report = validate_background(&background);
    if !report.is_valid() {
        for f in &report.findings {
            println!("invalid: {f}");
        }
        std::process::exit(1);
    }
    let order = process_ordering(&background.dfd).expect("valid diagrams are acyclic");
    let task: String = background.task_description.chars().take(72).collect();
    println!("task: {task}...");
    for (i, id) in order.iter().enumerate() {
        println!("{:>2}. {id}", i + 1);
    }
}
