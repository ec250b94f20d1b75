//! Greyscale pixel container and synthetic test images.

use crate::error::{Error, Result};

/// Row-major greyscale image with real-valued samples.
///
/// Samples are nominally in `[0, 255]`; quantisation to 8 bits only happens
/// when the image is written to disk (see [`GrayImage::to_bytes`]).
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "sample count {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_size(&self, other: &GrayImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// 8-bit samples: rounded to nearest and clamped to `[0, 255]`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_u8(v)).collect()
    }

    /// Copy with every sample rounded and clamped as it would be on disk.
    pub fn rounded(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| to_u8(v) as f64).collect(),
        }
    }

    pub fn clamped(mut self) -> GrayImage {
        for v in &mut self.data {
            *v = v.clamp(0.0, 255.0);
        }
        self
    }

    /// Halve both dimensions by 2x2 box averaging. Odd trailing rows and
    /// columns are dropped.
    pub fn downsample2(&self) -> GrayImage {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        GrayImage::from_fn(w, h, |x, y| {
            let x0 = (2 * x).min(self.width - 1);
            let y0 = (2 * y).min(self.height - 1);
            let x1 = (x0 + 1).min(self.width - 1);
            let y1 = (y0 + 1).min(self.height - 1);
            (self.get(x0, y0) + self.get(x1, y0) + self.get(x0, y1) + self.get(x1, y1)) / 4.0
        })
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Parameters of the synthetic disk image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiskShape {
    pub size: usize,
    pub radius: f64,
    pub inside: f64,
    pub outside: f64,
}

impl DiskShape {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius < self.size as f64 / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "disk radius {} must lie in (0, {})",
                self.radius,
                self.size as f64 / 2.0
            )));
        }
        Ok(())
    }
}

/// Disk centred at `((size-1)/2, (size-1)/2)`; a pixel is inside iff its
/// squared distance to the centre is at most `radius²`.
pub fn make_disk(shape: &DiskShape) -> Result<GrayImage> {
    shape.validate()?;
    let c = (shape.size as f64 - 1.0) / 2.0;
    let r2 = shape.radius * shape.radius;
    Ok(GrayImage::from_fn(shape.size, shape.size, |x, y| {
        let dx = x as f64 - c;
        let dy = y as f64 - c;
        if dx * dx + dy * dy <= r2 {
            shape.inside
        } else {
            shape.outside
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(size: usize, radius: f64) -> GrayImage {
        make_disk(&DiskShape {
            size,
            radius,
            inside: 255.0,
            outside: 0.0,
        })
        .unwrap()
    }

    #[test]
    fn disk_radius_one_is_a_plus() {
        let img = disk(3, 1.0);
        let expect = [0.0, 255.0, 0.0, 255.0, 255.0, 255.0, 0.0, 255.0, 0.0];
        assert_eq!(img.as_slice(), &expect);
    }

    #[test]
    fn disk_radius_half_is_centre_only() {
        let img = disk(3, 0.5);
        let inside: Vec<_> = img.as_slice().iter().map(|&v| v > 0.0).collect();
        assert_eq!(inside.iter().filter(|&&b| b).count(), 1);
        assert!(inside[4]);
    }

    #[test]
    fn disk_equal_intensities_is_constant() {
        let img = make_disk(&DiskShape {
            size: 20,
            radius: 5.0,
            inside: 90.0,
            outside: 90.0,
        })
        .unwrap();
        assert!(img.as_slice().iter().all(|&v| v == 90.0));
    }

    #[test]
    fn disk_rejects_bad_radius() {
        let shape = DiskShape {
            size: 10,
            radius: 5.0,
            inside: 1.0,
            outside: 0.0,
        };
        assert!(make_disk(&shape).is_err());
    }

    #[test]
    fn rounding_goes_to_nearest() {
        let img = GrayImage::from_vec(3, 1, vec![127.6, -3.0, 300.0]).unwrap();
        assert_eq!(img.to_bytes(), vec![128, 0, 255]);
    }

    #[test]
    fn downsample_averages_blocks() {
        let img = GrayImage::from_fn(4, 2, |x, _| x as f64);
        let d = img.downsample2();
        assert_eq!((d.width(), d.height()), (2, 1));
        assert_eq!(d.as_slice(), &[0.5, 2.5]);
    }
}
