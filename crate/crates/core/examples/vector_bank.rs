//! Archives domain vectors into a bounded bank and shows which entry the
//! redundancy rule evicts.

use pace::bank::{mean_similarities, VectorBank};

pub fn run_example() -> pace::Result<Vec<Vec<f64>>> {
    let mut bank = VectorBank::new(3, 3)?;
    bank.archive(vec![1.0, 0.0, 0.0])?;
    bank.archive(vec![0.0, 1.0, 0.0])?;
    bank.archive(vec![0.99, 0.05, 0.0])?;
    println!("mean similarities {:?}", mean_similarities(bank.vectors()));

    let evicted = bank.archive(vec![0.0, 0.0, 1.0])?;
    println!("evicted {evicted:?}");
    println!("kept    {:?}", bank.vectors());
    println!("{}", bank.to_json()?);
    Ok(bank.vectors().to_vec())
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
