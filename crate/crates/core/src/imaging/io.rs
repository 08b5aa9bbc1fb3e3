use std::path::Path;

use super::{Image, ImagingError, Result};

/// Read a PNG from disk as 8-bit RGB. Alpha and 16-bit channels are
/// flattened by the decoder.
pub fn load_png(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| ImagingError::Decode {
        path: path.display().to_string(),
        cause: e.to_string(),
    })?;
    decode_png(&bytes).map_err(|e| match e {
        ImagingError::Decode { cause, .. } => ImagingError::Decode {
            path: path.display().to_string(),
            cause,
        },
        other => other,
    })
}

pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(|e| {
        ImagingError::Decode {
            path: "<memory>".into(),
            cause: e.to_string(),
        }
    })?;
    let rgb = decoded.into_rgb8();
    let (w, h) = rgb.dimensions();
    Image::new(w as usize, h as usize, rgb.into_raw())
}

pub fn encode_png(image: &Image) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    image::write_buffer_with_format(
        &mut std::io::Cursor::new(&mut out),
        image.as_bytes(),
        image.width() as u32,
        image.height() as u32,
        image::ColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(|e| ImagingError::Encode {
        path: "<memory>".into(),
        cause: e.to_string(),
    })?;
    Ok(out)
}

pub fn save_png(image: &Image, path: &Path) -> Result<()> {
    let bytes = encode_png(image)?;
    let fail = |e: std::io::Error| ImagingError::Encode {
        path: path.display().to_string(),
        cause: e.to_string(),
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(fail)?;
    }
    std::fs::write(path, bytes).map_err(fail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let px: Vec<u8> = (0..6 * 5 * 3).map(|i| (i * 7) as u8).collect();
        let img = Image::new(6, 5, px).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/a.png");
        save_png(&img, &path).unwrap();
        assert_eq!(load_png(&path).unwrap(), img);
    }

    #[test]
    fn decode_failure_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.png");
        std::fs::write(&path, b"not a png").unwrap();
        let err = load_png(&path).unwrap_err().to_string();
        assert!(err.contains("broken.png"), "{err}");
    }
}
