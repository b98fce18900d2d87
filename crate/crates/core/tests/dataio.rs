use std::path::PathBuf;

use bitwise_nn::dataio::{encode, load_idx, load_split, split_paths, write_idx, Encoding, Split};
use bitwise_nn::Error;

fn mnist_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    split_paths(&dir, Split::Test).0.exists().then_some(dir)
}

#[test]
fn idx_files_on_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("img");
    let labels = tmp.path().join("lbl");
    std::fs::write(&images, write_idx(&[2, 2, 2], &[0, 255, 128, 64, 1, 2, 3, 4])).unwrap();
    std::fs::write(&labels, write_idx(&[2], &[7, 1])).unwrap();
    let raw = load_idx(&images, &labels, Split::Train).unwrap();
    assert_eq!((raw.len(), raw.rows, raw.cols), (2, 2, 2));
    assert_eq!(raw.intensities(0), vec![0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    assert_eq!(raw.labels(), &[7, 1]);

    // swapped files: the images path now holds a labels header
    assert!(matches!(load_idx(&labels, &images, Split::Train), Err(Error::WrongMagic { .. })));

    std::fs::write(&labels, write_idx(&[3], &[7, 1, 2])).unwrap();
    assert!(matches!(
        load_idx(&images, &labels, Split::Train),
        Err(Error::CountMismatch { images: 2, labels: 3 })
    ));

    let bytes = write_idx(&[2, 2, 2], &[0; 8]);
    std::fs::write(&images, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(load_idx(&images, &labels, Split::Train), Err(Error::Truncated { .. })));

    assert!(matches!(
        load_idx(&tmp.path().join("missing"), &labels, Split::Train),
        Err(Error::Io { .. })
    ));
}

#[test]
fn mnist_splits() {
    let Some(dir) = mnist_dir() else {
        eprintln!("MNIST not found; skipping");
        return;
    };
    let train = load_split(&dir, Split::Train).unwrap();
    assert_eq!((train.len(), train.rows, train.cols), (60_000, 28, 28));
    let test = load_split(&dir, Split::Test).unwrap();
    assert_eq!(test.len(), 10_000);

    // always predicting the most common test label
    let mut counts = [0usize; 10];
    test.labels().iter().for_each(|&l| counts[l as usize] += 1);
    let majority = *counts.iter().max().unwrap();
    assert_eq!(1.0 - majority as f64 / 10_000.0, 0.8865);

    let fixed = encode(&test, Encoding::Fixed2);
    assert_eq!(fixed.width(), 1568);
    assert_eq!(fixed.bits(0).len(), 1568);
}
