//! 8-bit RGB PNG output.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use tsmnet_core::raster::RgbImage;

use crate::error::{Error, Result};

pub fn encode_png<W: std::io::Write>(img: &RgbImage, w: W) -> std::result::Result<(), png::EncodingError> {
    let mut enc = png::Encoder::new(w, img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(&img.data)?;
    writer.finish()
}

pub fn write_png(img: &RgbImage, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    encode_png(img, BufWriter::new(file)).map_err(|source| Error::Png { path: path.to_path_buf(), source })
}

pub fn read_png(path: &Path) -> Result<RgbImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e.to_string()))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(path, "expected 8-bit RGB"));
    }
    buf.truncate(info.buffer_size());
    Ok(RgbImage { width: info.width as usize, height: info.height as usize, data: buf })
}

/// `<scene>_<agent>_<t>.png`
pub fn chunk_file_name(scene_id: &str, agent_id: &str, t: usize) -> String {
    format!("{scene_id}_{agent_id}_{t}.png")
}
