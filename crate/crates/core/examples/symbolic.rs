//! Symbolic types, word counts and the metric on left-infinite words.

use stable_cantor::scalar::Scalar;
use stable_cantor::symbolic::{theta_metric, LeftWord, SymbolicType};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let golden = SymbolicType::from_pairs(2, &[(0, 0), (0, 1), (1, 0)])?;
    println!("golden mean shift: {:?}", (1..=8).map(|n| golden.count_words(n)).collect::<Vec<_>>());
    let six = SymbolicType::full_shift(6);
    println!("full 6-shift squared has {} letters, {} words of length 3", six.power(2).letters(), six.power(2).count_words(3));
    let a = LeftWord::eventually_periodic(vec![0], vec![1, 0, 1])?;
    let b = LeftWord::eventually_periodic(vec![1], vec![1, 0, 1])?;
    println!("d(a, b) = {}", theta_metric(&a, &b, &Scalar::ratio(1, 2))?);
    Ok(())
}
