//! Raster types shared by the solver and the optimisers.
//!
//! Intensities are stored as `f64` in row-major order with interleaved
//! channels, nominally in `[0, 1]`. Tonal optimisation may legitimately
//! produce values outside that range; they are only clamped on export.

use std::fmt;

use crate::error::{Error, Result};

/// Width and height of a raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

impl Dims {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    dims: Dims,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::dims(
                format!("{expected} samples"),
                format!("{} samples", data.len()),
            ));
        }
        Ok(Self {
            dims: Dims::new(width, height),
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a grey image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, 1, data)
    }

    /// Interleaves per-channel planes back into one image.
    pub fn from_planes(dims: Dims, planes: &[Vec<f64>]) -> Result<Self> {
        let channels = planes.len();
        if planes.iter().any(|p| p.len() != dims.len()) {
            return Err(Error::dims(
                format!("{} samples per plane", dims.len()),
                "a plane of different length",
            ));
        }
        let mut data = vec![0.0; dims.len() * channels];
        for (c, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                data[i * channels + c] = v;
            }
        }
        Self::new(dims.width, dims.height, channels, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.dims.index(x, y) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.dims.index(x, y) * self.channels + c;
        self.data[i] = v;
    }

    /// Copies one channel out as a contiguous row-major plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn planes(&self) -> Vec<Vec<f64>> {
        (0..self.channels).map(|c| self.plane(c)).collect()
    }

    /// Per-pixel channel mean.
    pub fn grey_plane(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.data.clone();
        }
        let k = self.channels as f64;
        self.data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / k)
            .collect()
    }

    pub fn clamped(&self) -> Image {
        Image {
            dims: self.dims,
            channels: self.channels,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Image> {
        if width == 0 || height == 0 || x0 + width > self.width() || y0 + height > self.height() {
            return Err(Error::InvalidParameter(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}",
                self.dims
            )));
        }
        let mut data = Vec::with_capacity(width * height * self.channels);
        for y in y0..y0 + height {
            let start = self.dims.index(x0, y) * self.channels;
            data.extend_from_slice(&self.data[start..start + width * self.channels]);
        }
        Image::new(width, height, self.channels, data)
    }

    /// Centre crop; when the size difference is odd the origin is rounded down.
    /// Dimensions larger than the image are capped to the image size.
    pub fn crop_center(&self, width: usize, height: usize) -> Result<Image> {
        let width = width.min(self.width());
        let height = height.min(self.height());
        self.crop(
            (self.width() - width) / 2,
            (self.height() - height) / 2,
            width,
            height,
        )
    }

    fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.dims != other.dims || self.channels != other.channels {
            return Err(Error::dims(
                format!("{} with {} channels", self.dims, self.channels),
                format!("{} with {} channels", other.dims, other.channels),
            ));
        }
        Ok(())
    }
}

/// Mean squared error over all pixels and channels, on the `[0, 1]` scale.
pub fn mse(u: &Image, f: &Image) -> Result<f64> {
    u.check_same_shape(f)?;
    Ok(mse_slices(u.data(), f.data()))
}

pub(crate) fn mse_slices(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    sum / a.len() as f64
}

/// Peak signal-to-noise ratio with peak 255, computed from a single MSE over
/// all channels. Identical images give `f64::INFINITY`.
pub fn psnr(u: &Image, f: &Image) -> Result<f64> {
    Ok(psnr_from_mse(mse(u, f)?))
}

pub fn psnr_from_mse(mse_unit: f64) -> f64 {
    let mse255 = mse_unit * 255.0 * 255.0;
    if mse255 == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse255).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Binary,
    Confidence,
}

/// Per-pixel confidence in `[0, 1]`. Binary masks hold only 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    dims: Dims,
    values: Vec<f64>,
    kind: MaskKind,
}

impl Mask {
    pub fn empty(dims: Dims) -> Self {
        Self {
            dims,
            values: vec![0.0; dims.len()],
            kind: MaskKind::Binary,
        }
    }

    pub fn full(dims: Dims) -> Self {
        Self {
            dims,
            values: vec![1.0; dims.len()],
            kind: MaskKind::Binary,
        }
    }

    pub fn from_bools(dims: Dims, bits: &[bool]) -> Result<Self> {
        if bits.len() != dims.len() {
            return Err(Error::dims(dims.len(), bits.len()));
        }
        Ok(Self {
            dims,
            values: bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            kind: MaskKind::Binary,
        })
    }

    pub fn from_indices(dims: Dims, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = Self::empty(dims);
        for i in indices {
            if i >= dims.len() {
                return Err(Error::InvalidParameter(format!(
                    "mask index {i} outside {dims}"
                )));
            }
            mask.values[i] = 1.0;
        }
        Ok(mask)
    }

    /// Confidence mask; values must lie in `[0, 1]`.
    pub fn confidence(dims: Dims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::dims(dims.len(), values.len()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "confidence {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            dims,
            values,
            kind: MaskKind::Confidence,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_binary(&self) -> bool {
        self.kind == MaskKind::Binary
    }

    #[inline]
    pub fn is_set(&self, idx: usize) -> bool {
        self.values[idx] == 1.0
    }

    /// Sets a pixel of a binary mask.
    #[inline]
    pub fn set(&mut self, idx: usize, on: bool) {
        debug_assert!(self.is_binary());
        self.values[idx] = if on { 1.0 } else { 0.0 };
    }

    /// The 1-norm of the mask.
    pub fn l1(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Number of pixels with value 1.
    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn density(&self) -> f64 {
        self.l1() / self.dims.len() as f64
    }

    /// Row-major indices of the set pixels.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.is_set(i)).collect()
    }

    pub fn as_bools(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v == 1.0).collect()
    }

    /// Promotes a confidence mask whose values happen to be 0/1 to binary.
    pub fn to_binary(&self) -> Result<Mask> {
        if self.values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinaryMask);
        }
        Ok(Mask {
            dims: self.dims,
            values: self.values.clone(),
            kind: MaskKind::Binary,
        })
    }

    pub(crate) fn require_binary(&self) -> Result<()> {
        if self.is_binary() {
            Ok(())
        } else {
            Err(Error::NonBinaryMask)
        }
    }
}

/// A binary mask together with the tonal values stored at its pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownData {
    dims: Dims,
    channels: usize,
    /// Sorted row-major pixel indices.
    positions: Vec<usize>,
    /// `positions.len() * channels` values, interleaved.
    values: Vec<f64>,
}

impl KnownData {
    pub fn new(dims: Dims, channels: usize, positions: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "known data has 1 or 3 channels, got {channels}"
            )));
        }
        if values.len() != positions.len() * channels {
            return Err(Error::dims(
                format!("{} values", positions.len() * channels),
                format!("{} values", values.len()),
            ));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "known positions must be strictly increasing".into(),
            ));
        }
        if positions.last().is_some_and(|&p| p >= dims.len()) {
            return Err(Error::InvalidParameter(format!(
                "known position outside {dims}"
            )));
        }
        Ok(Self {
            dims,
            channels,
            positions,
            values,
        })
    }

    /// Takes the values of `img` at the pixels of a binary `mask`.
    pub fn from_image(img: &Image, mask: &Mask) -> Result<Self> {
        mask.require_binary()?;
        if img.dims() != mask.dims() {
            return Err(Error::dims(img.dims(), mask.dims()));
        }
        let positions = mask.indices();
        let ch = img.channels();
        let mut values = Vec::with_capacity(positions.len() * ch);
        for &p in &positions {
            values.extend_from_slice(&img.data()[p * ch..(p + 1) * ch]);
        }
        Self::new(img.dims(), ch, positions, values)
    }

    /// Builds known data from per-channel value vectors aligned with `mask.indices()`.
    pub fn from_channel_values(mask: &Mask, channel_values: &[Vec<f64>]) -> Result<Self> {
        mask.require_binary()?;
        let positions = mask.indices();
        let ch = channel_values.len();
        if channel_values.iter().any(|v| v.len() != positions.len()) {
            return Err(Error::dims(positions.len(), "a channel of different length"));
        }
        let mut values = vec![0.0; positions.len() * ch];
        for (c, vals) in channel_values.iter().enumerate() {
            for (k, &v) in vals.iter().enumerate() {
                values[k * ch + c] = v;
            }
        }
        Self::new(mask.dims(), ch, positions, values)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn value(&self, k: usize, c: usize) -> f64 {
        self.values[k * self.channels + c]
    }

    /// Values of one channel, aligned with `positions()`.
    pub fn channel_values(&self, c: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn mask(&self) -> Mask {
        Mask::from_indices(self.dims, self.positions.iter().copied())
            .expect("positions validated on construction")
    }

    pub fn clamped(&self) -> KnownData {
        KnownData {
            values: self.values.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            ..self.clone()
        }
    }
}
