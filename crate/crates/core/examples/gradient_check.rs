// Finite-difference check of every layer's backward pass.

use roitrack::nn::layer_suite;

fn run_example(cases: usize) -> roitrack::Result<bool> {
    let checks = layer_suite(cases, 7, 1e-5, 1e-4)?;
    for c in &checks {
        println!(
            "{:<18} {:>3} cases {:>6} entries  max rel err {:.2e}  {}",
            c.layer,
            c.cases,
            c.checked,
            c.max_rel_error,
            if c.passed() { "ok" } else { "FAILED" }
        );
    }
    Ok(checks.iter().all(|c| c.passed()))
}

fn main() {
    let cases = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    if !run_example(cases).expect("suite runs") {
        std::process::exit(1);
    }
}
