//! Pre-trains the source classifier, collects its activation statistics and
//! round-trips it through a checkpoint.

use pace::bench::{BaseTask, SourceBundle, SourceConfig};
use pace::model::{ArchKind, ModelCheckpoint};

pub fn run_example() -> pace::Result<f64> {
    let config = SourceConfig {
        arch: ArchKind::Residual,
        ..SourceConfig::default()
    };
    let bundle = SourceBundle::train(BaseTask::Blobs8, 0, &config)?;
    let model = &bundle.model;
    println!(
        "{} blocks of width {}, {} adaptable normalization parameters",
        model.block_count(),
        model.arch().width,
        model.offset_dim()
    );
    println!(
        "clean training accuracy {:.2}%",
        bundle.train_report.accuracy
    );
    println!("stem mean[..4] {:?}", &bundle.source.stem_mean[..4]);

    let path = std::env::temp_dir().join(format!("pace-example-{}.ckpt", std::process::id()));
    ModelCheckpoint::new(model, Some(bundle.source.clone())).save(&path)?;
    let (restored, stats) = ModelCheckpoint::load(&path)?.into_parts()?;
    std::fs::remove_file(&path)?;
    assert_eq!(restored.flat_weights(), model.flat_weights());
    assert_eq!(stats.as_ref(), Some(&bundle.source));
    println!("checkpoint round trip ok");
    Ok(bundle.train_report.accuracy)
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
