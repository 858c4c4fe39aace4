//! Walsh-Hadamard transform and the Fastfood projector that expands a
//! low-dimensional search vector into normalization offsets.

use pace::projection::{fwht, FastfoodProjector};

pub struct FastfoodSummary {
    pub blocks: usize,
    pub stored_bytes: usize,
    pub dense_bytes: usize,
    pub offsets: Vec<f64>,
}

pub fn run_example() -> pace::Result<FastfoodSummary> {
    let h = fwht(&[1.0, 0.0, 1.0, 0.0])?;
    println!("fwht([1, 0, 1, 0]) = {h:?}");

    let projector = FastfoodProjector::new(32, 256, 7)?;
    let v: Vec<f64> = (0..32)
        .map(|i| if i % 2 == 0 { 0.1 } else { -0.1 })
        .collect();
    let offsets = projector.project(&v)?;
    println!(
        "d={} -> D={} in {} block(s) of {}",
        projector.input_dim(),
        projector.output_dim(),
        projector.blocks().len(),
        projector.padded_dim()
    );

    let large = FastfoodProjector::new(2304, 34800, 0)?;
    println!(
        "d=2304 D=34800: {:.3} MiB stored, {:.1} MiB as a dense f32 matrix",
        large.stored_bytes() as f64 / (1 << 20) as f64,
        large.dense_f32_bytes() as f64 / (1 << 20) as f64
    );
    Ok(FastfoodSummary {
        blocks: large.blocks().len(),
        stored_bytes: large.stored_bytes(),
        dense_bytes: large.dense_f32_bytes(),
        offsets,
    })
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
