//! Model size constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BATCH_SIZE: usize = 32;
pub const IMAGE_ROWS: usize = 28;
pub const IMAGE_COLS: usize = 28;
pub const KERNEL_ROWS: usize = 3;
pub const KERNEL_COLS: usize = 3;
pub const POOL_MAP_LENGTH: usize = 169;
pub const LAYER_SIZE: usize = 128;
pub const CLASS_SIZE: usize = 10;

/// Sizes of every array in the model. `pool_map_length` is derived from the
/// image and kernel sizes and is kept only so that it can be checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDims {
    pub batch_size: usize,
    pub image_rows: usize,
    pub image_cols: usize,
    pub kernel_rows: usize,
    pub kernel_cols: usize,
    pub pool_map_length: usize,
    pub layer_size: usize,
    pub class_size: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            batch_size: BATCH_SIZE,
            image_rows: IMAGE_ROWS,
            image_cols: IMAGE_COLS,
            kernel_rows: KERNEL_ROWS,
            kernel_cols: KERNEL_COLS,
            pool_map_length: POOL_MAP_LENGTH,
            layer_size: LAYER_SIZE,
            class_size: CLASS_SIZE,
        }
    }
}

impl ModelDims {
    pub fn conv_rows(&self) -> usize {
        self.image_rows + 1 - self.kernel_rows
    }

    pub fn conv_cols(&self) -> usize {
        self.image_cols + 1 - self.kernel_cols
    }

    pub fn pool_rows(&self) -> usize {
        self.conv_rows() / 2
    }

    pub fn pool_cols(&self) -> usize {
        self.conv_cols() / 2
    }

    pub fn image_len(&self) -> usize {
        self.image_rows * self.image_cols
    }

    /// Flattened pooled-map length implied by the image and kernel sizes.
    pub fn derived_pool_map_length(&self) -> usize {
        self.pool_rows() * self.pool_cols()
    }

    pub fn validate(&self) -> Result<()> {
        let nonzero = [
            ("batch_size", self.batch_size),
            ("image_rows", self.image_rows),
            ("image_cols", self.image_cols),
            ("layer_size", self.layer_size),
            ("class_size", self.class_size),
        ];
        for (name, value) in nonzero {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if (self.kernel_rows, self.kernel_cols) != (KERNEL_ROWS, KERNEL_COLS) {
            return Err(Error::Config(format!(
                "the convolution kernel is fixed at {KERNEL_ROWS}x{KERNEL_COLS}, got {}x{}",
                self.kernel_rows, self.kernel_cols
            )));
        }
        if self.image_rows < self.kernel_rows || self.image_cols < self.kernel_cols {
            return Err(Error::Config(format!(
                "image {}x{} is smaller than the kernel",
                self.image_rows, self.image_cols
            )));
        }
        if !self.conv_rows().is_multiple_of(2) || !self.conv_cols().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "convolution output {}x{} cannot be 2x2 max-pooled (odd size)",
                self.conv_rows(),
                self.conv_cols()
            )));
        }
        if self.class_size > 256 {
            return Err(Error::Config(
                "class_size must fit in an IDX label byte".into(),
            ));
        }
        let derived = self.derived_pool_map_length();
        if self.pool_map_length != derived {
            return Err(Error::Config(format!(
                "pool_map_length {} does not match {derived} derived from image and kernel sizes",
                self.pool_map_length
            )));
        }
        Ok(())
    }

    /// Copy with `pool_map_length` recomputed from the other sizes.
    pub fn with_derived_pool_map(mut self) -> Self {
        if self.image_rows >= self.kernel_rows && self.image_cols >= self.kernel_cols {
            self.pool_map_length = self.derived_pool_map_length();
        }
        self
    }
}
