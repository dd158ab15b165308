use std::io::Cursor;

use image::{DynamicImage, ImageEncoder, ImageReader};
use serde::{Deserialize, Serialize};

use super::{ImageBuffer, RasterError, RegionMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Png,
    Jpeg,
}

impl ImageFormat {
    pub fn mime(self) -> &'static str {
        match self {
            ImageFormat::Png => "image/png",
            ImageFormat::Jpeg => "image/jpeg",
        }
    }

    fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Some(ImageFormat::Png)
        } else if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
            Some(ImageFormat::Jpeg)
        } else {
            None
        }
    }

    fn codec(self) -> image::ImageFormat {
        match self {
            ImageFormat::Png => image::ImageFormat::Png,
            ImageFormat::Jpeg => image::ImageFormat::Jpeg,
        }
    }
}

impl std::str::FromStr for ImageFormat {
    type Err = RasterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "png" => Ok(ImageFormat::Png),
            "jpg" | "jpeg" => Ok(ImageFormat::Jpeg),
            _ => Err(RasterError::UnsupportedFormat),
        }
    }
}

fn decode(bytes: &[u8], hint: Option<ImageFormat>) -> Result<DynamicImage, RasterError> {
    let format = match ImageFormat::sniff(bytes) {
        Some(f) => f,
        None if bytes.len() < 8 && hint.is_some() => return Err(RasterError::CorruptData("stream too short".into())),
        None => return Err(RasterError::UnsupportedFormat),
    };
    let mut reader = ImageReader::new(Cursor::new(bytes));
    reader.set_format(format.codec());
    reader.decode().map_err(|e| RasterError::CorruptData(e.to_string()))
}

/// Decodes PNG or JPEG bytes into RGBA. The format is sniffed from the magic
/// bytes; `hint` only affects how a too-short stream is reported.
pub fn load_image(bytes: &[u8], hint: Option<ImageFormat>) -> Result<ImageBuffer, RasterError> {
    let rgba = decode(bytes, hint)?.into_rgba8();
    let (w, h) = rgba.dimensions();
    ImageBuffer::from_raw(w, h, rgba.into_raw())
}

pub fn save_image(img: &ImageBuffer, format: ImageFormat) -> Result<Vec<u8>, RasterError> {
    let mut out = Vec::new();
    let enc_err = |e: image::ImageError| RasterError::EncodeFailure(e.to_string());
    match format {
        ImageFormat::Png => {
            image::codecs::png::PngEncoder::new(&mut out)
                .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgba8)
                .map_err(enc_err)?;
        }
        ImageFormat::Jpeg => {
            // JPEG carries no alpha.
            let rgb: Vec<u8> = img.as_raw().chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
            image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, 92)
                .write_image(&rgb, img.width(), img.height(), image::ExtendedColorType::Rgb8)
                .map_err(enc_err)?;
        }
    }
    Ok(out)
}

/// Encodes a mask as a 1-bit grayscale PNG (white = selected).
pub fn encode_mask_png(mask: &RegionMask) -> Result<Vec<u8>, RasterError> {
    let (w, h) = mask.dimensions();
    let row_bytes = (w as usize).div_ceil(8);
    let mut packed = vec![0u8; row_bytes * h as usize];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                packed[y as usize * row_bytes + x as usize / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w, h);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::One);
        let mut writer = enc
            .write_header()
            .map_err(|e| RasterError::EncodeFailure(e.to_string()))?;
        writer
            .write_image_data(&packed)
            .map_err(|e| RasterError::EncodeFailure(e.to_string()))?;
    }
    Ok(out)
}

/// Decodes a mask PNG of any bit depth; a pixel is selected when its luma is
/// at least 128 and, if present, its alpha is at least 128.
pub fn decode_mask_png(bytes: &[u8]) -> Result<RegionMask, RasterError> {
    let img = decode(bytes, Some(ImageFormat::Png))?.into_luma_alpha8();
    let (w, h) = img.dimensions();
    let mut mask = RegionMask::new(w, h)?;
    for (x, y, p) in img.enumerate_pixels() {
        if p.0[0] >= 128 && p.0[1] >= 128 {
            mask.set(x, y, true);
        }
    }
    Ok(mask)
}

/// True when the PNG/JPEG stores colour samples (as opposed to grayscale).
pub fn is_color_image(bytes: &[u8]) -> Result<bool, RasterError> {
    Ok(decode(bytes, None)?.color().has_color())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_pixel_red_png() {
        let img = ImageBuffer::filled(1, 1, [255, 0, 0, 255]).unwrap();
        let bytes = save_image(&img, ImageFormat::Png).unwrap();
        assert!(!bytes.is_empty());
        let back = load_image(&bytes, Some(ImageFormat::Png)).unwrap();
        assert_eq!(back.as_raw(), &[255, 0, 0, 255]);
    }

    #[test]
    fn truncated_png_is_corrupt() {
        let img = ImageBuffer::filled(16, 16, [10, 20, 30, 255]).unwrap();
        let bytes = save_image(&img, ImageFormat::Png).unwrap();
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(
            load_image(cut, Some(ImageFormat::Png)),
            Err(RasterError::CorruptData(_))
        ));
    }

    #[test]
    fn unknown_bytes_are_unsupported() {
        assert_eq!(
            load_image(b"GIF89a-------", None).unwrap_err(),
            RasterError::UnsupportedFormat
        );
    }

    #[test]
    fn jpeg_gray_round_trip_within_two() {
        let img = ImageBuffer::filled(2, 2, [128, 128, 128, 255]).unwrap();
        let bytes = save_image(&img, ImageFormat::Jpeg).unwrap();
        let back = load_image(&bytes, Some(ImageFormat::Jpeg)).unwrap();
        for p in back.as_raw().chunks_exact(4) {
            for c in &p[..3] {
                assert!((*c as i32 - 128).abs() <= 2, "{p:?}");
            }
            assert_eq!(p[3], 255);
        }
    }

    #[test]
    fn jpeg_decodes_with_reference_decoder() {
        // Cross-check our JPEG output against the `image` crate's own RGB path.
        let img = ImageBuffer::filled(2, 2, [128, 128, 128, 255]).unwrap();
        let bytes = save_image(&img, ImageFormat::Jpeg).unwrap();
        let reference = image::load_from_memory_with_format(&bytes, image::ImageFormat::Jpeg)
            .unwrap()
            .into_rgb8();
        for p in reference.pixels() {
            assert!(p.0.iter().all(|c| (*c as i32 - 128).abs() <= 2));
        }
    }

    #[test]
    fn mask_png_is_one_bit_and_round_trips() {
        let mut m = RegionMask::new(13, 5).unwrap();
        for (x, y) in [(0, 0), (12, 4), (7, 2), (8, 2)] {
            m.set(x, y, true);
        }
        let bytes = encode_mask_png(&m).unwrap();
        let decoder = png::Decoder::new(Cursor::new(&bytes));
        let reader = decoder.read_info().unwrap();
        assert_eq!(reader.info().bit_depth, png::BitDepth::One);
        assert_eq!(decode_mask_png(&bytes).unwrap(), m);
    }
}
