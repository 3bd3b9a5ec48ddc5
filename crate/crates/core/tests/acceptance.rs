//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! `cargo test -p aleph-lab --test acceptance -- [number or name…]` runs a subset.

use aleph_lab::acceptance;

fn main() {
    let names: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = match acceptance::select(&names) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    let mut failed = 0;
    for c in &selected {
        let r = acceptance::run(c);
        println!("{}", r.line(c.title));
        if !r.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
