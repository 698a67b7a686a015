//! Host side of the split: fixed-kernel valid convolution, 2x2 max-pooling,
//! and row-major flattening.

use crate::dataio::MiniBatch;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// 3x3 sharpening filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel([[f64; 3]; 3]);

pub const SHARPEN: Kernel = Kernel([[0.0, -1.0, 0.0], [-1.0, 5.0, -1.0], [0.0, -1.0, 0.0]]);

impl Kernel {
    pub fn values(&self) -> &[[f64; 3]; 3] {
        &self.0
    }
}

impl Default for Kernel {
    fn default() -> Self {
        SHARPEN
    }
}

/// Stride-1, zero-padding cross-correlation (no kernel flip).
pub fn conv2d_valid(image: &Matrix, kernel: &Kernel) -> Result<Matrix> {
    let (rows, cols) = image.shape();
    if rows < 3 || cols < 3 {
        return Err(Error::shape(
            "conv2d_valid",
            "image of at least 3x3",
            format!("{rows}x{cols}"),
        ));
    }
    let k = kernel.values();
    Ok(Matrix::from_fn(rows - 2, cols - 2, |r, c| {
        let mut acc = 0.0;
        for (a, krow) in k.iter().enumerate() {
            for (b, &kv) in krow.iter().enumerate() {
                acc += image.get(r + a, c + b) * kv;
            }
        }
        acc
    }))
}

/// Non-overlapping 2x2 max-pooling.
pub fn maxpool2x2(feature: &Matrix) -> Result<Matrix> {
    let (rows, cols) = feature.shape();
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::shape(
            "maxpool2x2",
            "even dimensions",
            format!("{rows}x{cols}"),
        ));
    }
    Ok(Matrix::from_fn(rows / 2, cols / 2, |i, j| {
        let (r, c) = (2 * i, 2 * j);
        feature
            .get(r, c)
            .max(feature.get(r, c + 1))
            .max(feature.get(r + 1, c))
            .max(feature.get(r + 1, c + 1))
    }))
}

/// Output of the host stage, ready to hand to the accelerator.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBatch {
    /// `batch x pool_map_length` pooled features.
    pub v: Matrix,
    pub out_actual: Matrix,
    pub index: usize,
}

pub fn host_stage(batch: &MiniBatch) -> Result<ConvBatch> {
    let (rows, cols) = (batch.image_rows, batch.image_cols);
    batch
        .v_raw
        .expect_shape("host_stage", batch.batch_size(), rows * cols)?;

    let mut flat = Vec::new();
    let mut width = 0;
    for i in 0..batch.batch_size() {
        let image = Matrix::from_vec(rows, cols, batch.v_raw.row(i).to_vec())?;
        let pooled = maxpool2x2(&conv2d_valid(&image, &SHARPEN)?)?;
        width = pooled.rows() * pooled.cols();
        flat.extend(pooled.into_vec());
    }
    Ok(ConvBatch {
        v: Matrix::from_vec(batch.batch_size(), width, flat)?,
        out_actual: batch.out_actual.clone(),
        index: batch.index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{make_batches, synthetic_dataset, ImageSet, LabelSet};
    use proptest::prelude::*;

    fn brute_correlate(image: &Matrix, k: &[[f64; 3]; 3]) -> Matrix {
        let mut out = Matrix::zeros(image.rows() - 2, image.cols() - 2);
        for r in 0..out.rows() {
            for c in 0..out.cols() {
                let mut s = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        s += image.get(r + a, c + b) * k[a][b];
                    }
                }
                out.set(r, c, s);
            }
        }
        out
    }

    #[test]
    fn kernel_sums_to_one() {
        let sum: f64 = SHARPEN.values().iter().flatten().sum();
        assert_eq!(sum, 1.0);
    }

    #[test]
    fn constant_images() {
        let ones = Matrix::from_fn(28, 28, |_, _| 1.0);
        let out = conv2d_valid(&ones, &SHARPEN).unwrap();
        assert_eq!(out.shape(), (26, 26));
        assert!(out.as_slice().iter().all(|&x| x == 1.0));

        let zeros = conv2d_valid(&Matrix::zeros(28, 28), &SHARPEN).unwrap();
        assert!(zeros.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn impulse_reproduces_kernel() {
        let mut image = Matrix::zeros(28, 28);
        image.set(13, 13, 1.0);
        let out = conv2d_valid(&image, &SHARPEN).unwrap();
        assert_eq!(out, brute_correlate(&image, SHARPEN.values()));
        assert_eq!(out.get(12, 12), 5.0);
        for (r, c) in [(11, 12), (13, 12), (12, 11), (12, 13)] {
            assert_eq!(out.get(r, c), -1.0);
        }
        let nonzero = out.as_slice().iter().filter(|&&x| x != 0.0).count();
        assert_eq!(nonzero, 5);
    }

    #[test]
    fn conv_rejects_small_input() {
        assert!(conv2d_valid(&Matrix::zeros(2, 5), &SHARPEN).is_err());
    }

    #[test]
    fn maxpool_cases() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(maxpool2x2(&m).unwrap().as_slice(), &[4.0]);

        let c = Matrix::from_fn(6, 4, |_, _| 0.25);
        assert!(maxpool2x2(&c)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&x| x == 0.25));

        assert!(maxpool2x2(&Matrix::zeros(3, 4)).is_err());
    }

    #[test]
    fn maxpool_ramp_matches_window_enumeration() {
        let ramp = Matrix::from_fn(26, 26, |r, c| (26 * r + c) as f64);
        let out = maxpool2x2(&ramp).unwrap();
        for i in 0..13 {
            for j in 0..13 {
                let mut best = f64::MIN;
                for r in 2 * i..2 * i + 2 {
                    for c in 2 * j..2 * j + 2 {
                        best = best.max(ramp.get(r, c));
                    }
                }
                assert_eq!(out.get(i, j), best);
                assert_eq!(out.get(i, j), (26 * (2 * i + 1) + 2 * j + 1) as f64);
            }
        }
    }

    #[test]
    fn host_stage_shapes_and_purity() {
        let (images, labels) = synthetic_dataset(5, 32);
        let batch = make_batches(&images, &labels, 32).unwrap().next().unwrap();
        let a = host_stage(&batch).unwrap();
        assert_eq!(a.v.shape(), (32, 169));
        assert_eq!(a.out_actual, batch.out_actual);
        let b = host_stage(&batch).unwrap();
        assert_eq!(a, b);

        let zero = ImageSet::new(28, 28, vec![0.0; 32 * 784]).unwrap();
        let labels = LabelSet::new(10, vec![1; 32]).unwrap();
        let zb = make_batches(&zero, &labels, 32).unwrap().next().unwrap();
        assert!(host_stage(&zb)
            .unwrap()
            .v
            .as_slice()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn replicated_image_gives_identical_rows() {
        let (images, _) = synthetic_dataset(9, 1);
        let pixels: Vec<f64> = images.image(0).repeat(32);
        let set = ImageSet::new(28, 28, pixels).unwrap();
        let labels = LabelSet::new(10, vec![4; 32]).unwrap();
        let batch = make_batches(&set, &labels, 32).unwrap().next().unwrap();
        let conv = host_stage(&batch).unwrap();
        for r in 1..32 {
            assert_eq!(conv.v.row(r), conv.v.row(0));
        }
    }

    fn grid() -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-1.0f64..1.0, 8 * 8)
            .prop_map(|v| Matrix::from_vec(8, 8, v).unwrap())
    }

    proptest! {
        #[test]
        fn conv_is_linear(x in grid(), y in grid(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let combo = Matrix::from_fn(8, 8, |r, c| alpha * x.get(r, c) + beta * y.get(r, c));
            let lhs = conv2d_valid(&combo, &SHARPEN).unwrap();
            let cx = conv2d_valid(&x, &SHARPEN).unwrap();
            let cy = conv2d_valid(&y, &SHARPEN).unwrap();
            for r in 0..6 {
                for c in 0..6 {
                    let rhs = alpha * cx.get(r, c) + beta * cy.get(r, c);
                    let scale = lhs.get(r, c).abs().max(rhs.abs()).max(1.0);
                    prop_assert!((lhs.get(r, c) - rhs).abs() <= 1e-12 * scale);
                }
            }
        }

        #[test]
        fn maxpool_dominates_its_window(x in grid()) {
            let out = maxpool2x2(&x).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let window = [x.get(2*i, 2*j), x.get(2*i, 2*j+1), x.get(2*i+1, 2*j), x.get(2*i+1, 2*j+1)];
                    prop_assert!(window.iter().all(|&w| out.get(i, j) >= w));
                    prop_assert!(window.contains(&out.get(i, j)));
                }
            }
        }
    }
}
