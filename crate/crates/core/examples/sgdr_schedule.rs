//! The warm-restart cosine schedule used for the 31-epoch initial training.

use widthsearch::tensor::SgdrSchedule;

fn main() {
    let s = SgdrSchedule::new(0.05, 1.0, 2.0);
    println!("restarts: {:?}", s.restart_boundaries(31.0));
    for step in 0..=62 {
        let epoch = step as f64 / 2.0;
        let rate = s.rate_at(epoch);
        println!("{epoch:>5.1} {rate:.5} {}", "#".repeat((rate * 1000.0) as usize));
    }
}
