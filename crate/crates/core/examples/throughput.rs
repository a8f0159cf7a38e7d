//! Times `lcs_exact` on a pair of random sequences.
//!
//! `cargo run --release --example throughput -- [log2 n] [alphabet]`

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subshift_lcs::lcs_exact;

fn main() {
    let mut args = std::env::args().skip(1);
    let log_n: u32 = args.next().map_or(20, |a| a.parse().expect("log2 n"));
    let sigma: u32 = args.next().map_or(4, |a| a.parse().expect("alphabet size"));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1usize << log_n;
    let x: Vec<u32> = (0..n).map(|_| rng.gen_range(0..sigma)).collect();
    let y: Vec<u32> = (0..n).map(|_| rng.gen_range(0..sigma)).collect();
    let start = Instant::now();
    let m = lcs_exact(&x, &y).expect("equal lengths");
    println!("n = 2^{log_n}, sigma = {sigma}: M_n = {} in {:?}", m.length, start.elapsed());
}
