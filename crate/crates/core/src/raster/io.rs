//! Image file I/O: PNG (through the `image` crate) and binary PGM (P5),
//! both in 8- and 16-bit flavors. Color inputs are collapsed to gray by
//! averaging the channels.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use image::DynamicImage;

use super::Image;
use crate::error::{Error, Result};

/// Loads a grayscale image from PNG or binary PGM, chosen by extension.
/// 8-bit sources get `dyn_range` 255, 16-bit sources 65535 (PGM: the
/// header's maxval). RGB(A) PNGs are averaged over the color channels.
pub fn load_image(path: &Path) -> Result<Image> {
    match extension_of(path)? {
        Format::Png => load_png(path),
        Format::Pgm => load_pgm(path),
    }
}

/// Saves an image, clamping values into `[0, dyn_range]` and rounding to
/// the nearest integer level. Containers with `dyn_range` <= 255 are written
/// 8-bit, larger ones (up to 65535) 16-bit.
pub fn save_image(path: &Path, img: &Image) -> Result<()> {
    if img.dyn_range() > 65535.0 {
        return Err(Error::UnsupportedFormat(format!(
            "dyn_range {} exceeds 16-bit storage",
            img.dyn_range()
        )));
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    match extension_of(path)? {
        Format::Png => save_png(path, img),
        Format::Pgm => save_pgm(path, img),
    }
}

enum Format {
    Png,
    Pgm,
}

fn extension_of(path: &Path) -> Result<Format> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(Format::Png),
        "pgm" => Ok(Format::Pgm),
        other => Err(Error::UnsupportedFormat(format!(
            "extension '{other}' on {} (expected png or pgm)",
            path.display()
        ))),
    }
}

fn load_png(path: &Path) -> Result<Image> {
    let decoded = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::CorruptFile {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (data, dyn_range) = match decoded {
        DynamicImage::ImageLuma8(b) => {
            (b.as_raw().iter().map(|v| *v as f64).collect::<Vec<_>>(), 255.0)
        }
        DynamicImage::ImageLumaA8(b) => (
            b.as_raw().chunks_exact(2).map(|p| p[0] as f64).collect(),
            255.0,
        ),
        DynamicImage::ImageRgb8(b) => (
            b.as_raw()
                .chunks_exact(3)
                .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0)
                .collect(),
            255.0,
        ),
        DynamicImage::ImageRgba8(b) => (
            b.as_raw()
                .chunks_exact(4)
                .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0)
                .collect(),
            255.0,
        ),
        DynamicImage::ImageLuma16(b) => {
            (b.as_raw().iter().map(|v| *v as f64).collect::<Vec<_>>(), 65535.0)
        }
        DynamicImage::ImageLumaA16(b) => (
            b.as_raw().chunks_exact(2).map(|p| p[0] as f64).collect(),
            65535.0,
        ),
        DynamicImage::ImageRgb16(b) => (
            b.as_raw()
                .chunks_exact(3)
                .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0)
                .collect(),
            65535.0,
        ),
        DynamicImage::ImageRgba16(b) => (
            b.as_raw()
                .chunks_exact(4)
                .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0)
                .collect(),
            65535.0,
        ),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG pixel layout {:?} in {}",
                other.color(),
                path.display()
            )))
        }
    };
    Image::from_vec(w, h, dyn_range, data)
}

fn save_png(path: &Path, img: &Image) -> Result<()> {
    let clamped = img.clamped();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let res = if img.dyn_range() <= 255.0 {
        let buf: Vec<u8> = clamped.data().iter().map(|v| v.round() as u8).collect();
        image::GrayImage::from_raw(w, h, buf)
            .expect("buffer sized from image dims")
            .save(path)
    } else {
        let buf: Vec<u16> = clamped.data().iter().map(|v| v.round() as u16).collect();
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w, h, buf)
            .expect("buffer sized from image dims")
            .save(path)
    };
    res.map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::CorruptFile {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })
}

fn load_pgm(path: &Path) -> Result<Image> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let corrupt = |detail: &str| Error::CorruptFile {
        path: path.to_path_buf(),
        detail: detail.into(),
    };

    let mut pos = 0usize;
    // One whitespace-delimited header token, skipping '#' comment lines.
    let mut token = |bytes: &[u8]| -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(corrupt("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token(&bytes)? != "P5" {
        return Err(corrupt("not a binary PGM (missing P5 magic)"));
    }
    let parse = |s: String, what: &str| {
        s.parse::<usize>().map_err(|_| corrupt(&format!("bad {what} '{s}'")))
    };
    let w = parse(token(&bytes)?, "width")?;
    let h = parse(token(&bytes)?, "height")?;
    let maxval = parse(token(&bytes)?, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(corrupt(&format!("maxval {maxval} out of range 1..=65535")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(corrupt("missing separator before raster data"));
    }
    pos += 1;

    let raster = &bytes[pos..];
    let data: Vec<f64> = if maxval < 256 {
        if raster.len() < w * h {
            return Err(corrupt("raster shorter than width*height"));
        }
        raster[..w * h].iter().map(|v| *v as f64).collect()
    } else {
        if raster.len() < 2 * w * h {
            return Err(corrupt("raster shorter than 2*width*height"));
        }
        raster[..2 * w * h]
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]) as f64)
            .collect()
    };
    Image::from_vec(w, h, maxval as f64, data)
}

fn save_pgm(path: &Path, img: &Image) -> Result<()> {
    let maxval = img.dyn_range().round() as u32;
    let clamped = img.clamped();
    let mut out = Vec::with_capacity(32 + 2 * clamped.data().len());
    write!(out, "P5\n{} {}\n{}\n", img.width(), img.height(), maxval)
        .expect("in-memory write");
    if maxval < 256 {
        out.extend(clamped.data().iter().map(|v| v.round() as u8));
    } else {
        for v in clamped.data() {
            out.extend_from_slice(&(v.round() as u16).to_be_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn integer_image(dyn_range: f64) -> Image {
        // Integer levels spread over the full range, never exceeding it.
        Image::from_fn(10, 9, dyn_range, |x, y| {
            ((x * 31 + y * 57) % 256) as f64 * (dyn_range / 255.0)
        })
        .unwrap()
    }

    #[test]
    fn png_8bit_roundtrip_is_lossless() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("a.png");
        let img = integer_image(255.0);
        save_image(&p, &img).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn png_16bit_roundtrip_is_lossless() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("a16.png");
        let img = integer_image(65535.0);
        save_image(&p, &img).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.dyn_range(), 65535.0);
    }

    #[test]
    fn pgm_roundtrips_both_depths() {
        let dir = TempDir::new().unwrap();
        for dyn_range in [255.0, 65535.0] {
            let p = dir.path().join(format!("d{dyn_range}.pgm"));
            let img = integer_image(dyn_range);
            save_image(&p, &img).unwrap();
            let back = load_image(&p).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn handwritten_16bit_pgm_parses() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("hand.pgm");
        let mut bytes = b"P5\n# a comment\n8 8\n65535\n".to_vec();
        for i in 0..64u32 {
            let v = if i == 0 { 65535u16 } else { (i * 100) as u16 };
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        fs::write(&p, bytes).unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.dyn_range(), 65535.0);
        assert_eq!(img.at(0, 0), 65535.0);
        assert_eq!(img.at(3, 2), (19 * 100) as f64);
    }

    #[test]
    fn rgb_png_averages_channels() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("rgb.png");
        let rgb = image::RgbImage::from_fn(8, 8, |x, _| {
            image::Rgb([x as u8 * 10, x as u8 * 10 + 3, x as u8 * 10 + 6])
        });
        rgb.save(&p).unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.at(2, 5), (20.0 + 23.0 + 26.0) / 3.0);
    }

    #[test]
    fn save_clamps_out_of_range_values() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("clamp.png");
        let mut img = Image::zeros(8, 8, 255.0).unwrap();
        img.set(0, 0, -40.0);
        img.set(1, 0, 300.0);
        img.set(2, 0, 7.4);
        save_image(&p, &img).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!(back.at(0, 0), 0.0);
        assert_eq!(back.at(1, 0), 255.0);
        assert_eq!(back.at(2, 0), 7.0);
    }

    #[test]
    fn unknown_extension_is_rejected() {
        let img = integer_image(255.0);
        let err = save_image(Path::new("/tmp/x.tiff"), &img).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)));
        assert!(matches!(
            load_image(Path::new("/tmp/x.jpeg")),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn truncated_pgm_is_corrupt() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("short.pgm");
        fs::write(&p, b"P5\n8 8\n255\n1234").unwrap();
        assert!(matches!(load_image(&p), Err(Error::CorruptFile { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_image(Path::new("/nonexistent/missing.png")),
            Err(Error::Io { .. })
        ));
    }
}
