//! IDX loading, synthetic data, and mini-batching.
//!
//! IDX layout (all header integers big-endian):
//!
//! ```text
//! images: 0x00000803, count u32, rows u32, cols u32, count*rows*cols u8
//! labels: 0x00000801, count u32, count u8
//! ```
//!
//! Pixels are scaled to `[0, 1]` by dividing by 255.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dims::{CLASS_SIZE, IMAGE_COLS, IMAGE_ROWS};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// `count` images of `rows x cols` pixels in `[0, 1]`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
}

impl ImageSet {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        let len = rows * cols;
        if len == 0 || !pixels.len().is_multiple_of(len) {
            return Err(Error::shape(
                "ImageSet::new",
                format!("a multiple of {rows}x{cols}"),
                format!("{} pixels", pixels.len()),
            ));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::shape("ImageSet::new", "pixels in [0, 1]", bad));
        }
        Ok(ImageSet { rows, cols, pixels })
    }

    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn image(&self, index: usize) -> &[f64] {
        let len = self.rows * self.cols;
        &self.pixels[index * len..(index + 1) * len]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    classes: usize,
    labels: Vec<u8>,
}

impl LabelSet {
    pub fn new(classes: usize, labels: Vec<u8>) -> Result<Self> {
        if let Some((i, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= classes)
        {
            return Err(Error::BadLabel {
                label,
                offset: 8 + i,
                classes,
            });
        }
        Ok(LabelSet { classes, labels })
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.offset;
        if available < n {
            return Err(Error::Truncated {
                offset: self.offset,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    fn u32_be(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn finish(&self) -> Result<()> {
        let extra = self.bytes.len() - self.offset;
        if extra > 0 {
            return Err(Error::TrailingBytes {
                offset: self.offset,
                extra,
            });
        }
        Ok(())
    }
}

fn read_magic(reader: &mut Reader<'_>, expected: u32) -> Result<()> {
    let found = reader.u32_be()?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

/// Parse an IDX3 image file, requiring `rows x cols` images.
pub fn parse_idx_images(bytes: &[u8], rows: usize, cols: usize) -> Result<ImageSet> {
    let mut r = Reader { bytes, offset: 0 };
    read_magic(&mut r, IMAGE_MAGIC)?;
    let count = r.u32_be()? as usize;
    let (file_rows, file_cols) = (r.u32_be()? as usize, r.u32_be()? as usize);
    if (file_rows, file_cols) != (rows, cols) {
        return Err(Error::ImageDims {
            rows: file_rows,
            cols: file_cols,
            expected_rows: rows,
            expected_cols: cols,
        });
    }
    let raw = r.take(count * rows * cols)?;
    r.finish()?;
    let pixels = raw.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(ImageSet { rows, cols, pixels })
}

/// Parse an IDX1 label file; every label must be below `classes`.
pub fn parse_idx_labels(bytes: &[u8], classes: usize) -> Result<LabelSet> {
    let mut r = Reader { bytes, offset: 0 };
    read_magic(&mut r, LABEL_MAGIC)?;
    let count = r.u32_be()? as usize;
    let raw = r.take(count)?;
    r.finish()?;
    LabelSet::new(classes, raw.to_vec())
}

pub fn load_idx_images(path: &Path) -> Result<ImageSet> {
    load_idx_images_sized(path, IMAGE_ROWS, IMAGE_COLS)
}

pub fn load_idx_images_sized(path: &Path, rows: usize, cols: usize) -> Result<ImageSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx_images(&bytes, rows, cols).map_err(|e| with_path(path, e))
}

pub fn load_idx_labels(path: &Path) -> Result<LabelSet> {
    load_idx_labels_sized(path, CLASS_SIZE)
}

pub fn load_idx_labels_sized(path: &Path, classes: usize) -> Result<LabelSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx_labels(&bytes, classes).map_err(|e| with_path(path, e))
}

fn with_path(path: &Path, err: Error) -> Error {
    Error::InFile {
        path: path.to_path_buf(),
        source: Box::new(err),
    }
}

/// Encode images as IDX3. Pixels are rounded to the nearest `k/255`.
pub fn write_idx_images(images: &ImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.count() as u32).to_be_bytes());
    out.extend_from_slice(&(images.rows as u32).to_be_bytes());
    out.extend_from_slice(&(images.cols as u32).to_be_bytes());
    out.extend(images.pixels.iter().map(|&p| (p * 255.0).round() as u8));
    out
}

pub fn write_idx_labels(labels: &LabelSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.count() as u32).to_be_bytes());
    out.extend_from_slice(&labels.labels);
    out
}

/// Deterministic 28x28 ten-class data set. Every class has one random
/// template shared by all seeds, so sets drawn with different seeds come from
/// the same distribution. Images are the template blended with per-image
/// noise and quantized to multiples of 1/255 so they survive an IDX round
/// trip.
pub fn synthetic_dataset(seed: u64, n: usize) -> (ImageSet, LabelSet) {
    let len = IMAGE_ROWS * IMAGE_COLS;
    let mut template_rng = ChaCha8Rng::seed_from_u64(0x5eed_7e3a);
    let templates: Vec<Vec<f64>> = (0..CLASS_SIZE)
        .map(|_| {
            (0..len)
                .map(|_| {
                    if template_rng.random_bool(0.3) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pixels = Vec::with_capacity(n * len);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.random_range(0..CLASS_SIZE);
        labels.push(label as u8);
        for &t in &templates[label] {
            let noise: f64 = rng.random();
            let value = 0.7 * t + 0.3 * noise;
            pixels.push((value * 255.0).round() / 255.0);
        }
    }
    (
        ImageSet {
            rows: IMAGE_ROWS,
            cols: IMAGE_COLS,
            pixels,
        },
        LabelSet {
            classes: CLASS_SIZE,
            labels,
        },
    )
}

/// One mini-batch: raw images and one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    /// `batch x (rows*cols)` raw pixels, one image per row.
    pub v_raw: Matrix,
    /// `batch x classes` one-hot targets.
    pub out_actual: Matrix,
    pub index: usize,
    pub image_rows: usize,
    pub image_cols: usize,
}

impl MiniBatch {
    pub fn batch_size(&self) -> usize {
        self.v_raw.rows()
    }
}

pub fn one_hot(label: u8, classes: usize) -> Vec<f64> {
    let mut row = vec![0.0; classes];
    row[label as usize] = 1.0;
    row
}

/// Lazily assembled mini-batches in data set order; a trailing partial batch
/// is dropped.
#[derive(Debug, Clone)]
pub struct MiniBatches<'a> {
    images: &'a ImageSet,
    labels: &'a LabelSet,
    batch_size: usize,
    next: usize,
    total: usize,
}

impl Iterator for MiniBatches<'_> {
    type Item = MiniBatch;

    fn next(&mut self) -> Option<MiniBatch> {
        if self.next >= self.total {
            return None;
        }
        let index = self.next;
        self.next += 1;

        let start = index * self.batch_size;
        let len = self.images.rows * self.images.cols;
        let pixels = self.images.pixels[start * len..(start + self.batch_size) * len].to_vec();
        let classes = self.labels.classes;
        let mut targets = Vec::with_capacity(self.batch_size * classes);
        for &label in &self.labels.labels[start..start + self.batch_size] {
            targets.extend(one_hot(label, classes));
        }
        Some(MiniBatch {
            v_raw: Matrix::from_vec(self.batch_size, len, pixels).expect("sized above"),
            out_actual: Matrix::from_vec(self.batch_size, classes, targets).expect("sized above"),
            index,
            image_rows: self.images.rows,
            image_cols: self.images.cols,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.total - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for MiniBatches<'_> {}

pub fn make_batches<'a>(
    images: &'a ImageSet,
    labels: &'a LabelSet,
    batch_size: usize,
) -> Result<MiniBatches<'a>> {
    if images.count() != labels.count() {
        return Err(Error::CountMismatch {
            images: images.count(),
            labels: labels.count(),
        });
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    Ok(MiniBatches {
        images,
        labels,
        batch_size,
        next: 0,
        total: images.count() / batch_size,
    })
}
