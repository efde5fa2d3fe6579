//! 8-bit RGB rasters and their on-disk formats (PNG, binary PPM).

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    NotFound(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image file: {0}")]
    CorruptFile(String),
    #[error("invalid dimensions {width}x{height} (need at least 2x2)")]
    InvalidDimensions { width: usize, height: usize },
    #[error("sample buffer has {actual} bytes, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Row-major, interleaved R,G,B raster with 8 bits per sample.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RgbImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RgbImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width < 2 || height < 2 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        let expected = width * height * 3;
        if data.len() != expected {
            return Err(ImageError::BufferLength {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image filled with a single color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImageError> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::from_raw(width, height, data)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * 3);
        for row in 0..height {
            for col in 0..width {
                data.extend_from_slice(&f(row, col));
            }
        }
        Self::from_raw(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn coord(&self, row: usize, col: usize) -> Option<PixelCoord> {
        (row < self.height && col < self.width).then_some(PixelCoord { row, col })
    }

    pub fn pixel(&self, at: PixelCoord) -> [u8; 3] {
        let i = self.offset(at.row, at.col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn get(&self, row: usize, col: usize) -> Option<[u8; 3]> {
        self.coord(row, col).map(|c| self.pixel(c))
    }

    pub fn set_pixel(&mut self, at: PixelCoord, rgb: [u8; 3]) {
        let i = self.offset(at.row, at.col);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn channel(&self, at: PixelCoord, channel: Channel) -> u8 {
        self.data[self.offset(at.row, at.col) + channel.index()]
    }

    pub fn set_channel(&mut self, at: PixelCoord, channel: Channel, value: u8) {
        let i = self.offset(at.row, at.col) + channel.index();
        self.data[i] = value;
    }

    /// Interleaved samples of one row.
    pub fn row(&self, row: usize) -> &[u8] {
        let stride = self.width * 3;
        &self.data[row * stride..(row + 1) * stride]
    }

    pub(crate) fn row_mut(&mut self, row: usize) -> &mut [u8] {
        let stride = self.width * 3;
        &mut self.data[row * stride..(row + 1) * stride]
    }

    fn offset(&self, row: usize, col: usize) -> usize {
        (row * self.width + col) * 3
    }
}

/// In-bounds pixel address. Only obtainable through [`RgbImage::coord`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PixelCoord {
    row: usize,
    col: usize,
}

impl PixelCoord {
    pub fn row(self) -> usize {
        self.row
    }

    pub fn col(self) -> usize {
        self.col
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    Red,
    Green,
    Blue,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Red, Channel::Green, Channel::Blue];

    pub fn index(self) -> usize {
        match self {
            Channel::Red => 0,
            Channel::Green => 1,
            Channel::Blue => 2,
        }
    }
}

fn is_ppm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
}

/// Loads an 8-bit RGB PNG or a binary (P6, maxval 255) PPM. The format is
/// sniffed from the file magic, not the extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage, ImageError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ImageError::NotFound(path.display().to_string()),
        _ => ImageError::Io(e),
    })?;
    let mut reader = BufReader::new(file);
    let magic = reader.fill_buf()?;
    if magic.starts_with(b"\x89PNG") {
        decode_png(reader)
    } else if magic.starts_with(b"P6") {
        decode_ppm(reader)
    } else if magic.len() >= 2 && magic[0] == b'P' && magic[1].is_ascii_digit() {
        Err(ImageError::UnsupportedFormat(format!(
            "netpbm variant P{} (only P6 is supported)",
            magic[1] as char
        )))
    } else {
        Err(ImageError::UnsupportedFormat(format!(
            "{}: not a PNG or P6 file",
            path.display()
        )))
    }
}

/// Writes a lossless PNG, or P6 when the extension is `.ppm`. Encoder
/// settings are fixed so identical images produce identical files.
pub fn save_image(img: &RgbImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path)?);
    if is_ppm(path) {
        write!(out, "P6\n{} {}\n255\n", img.width, img.height)?;
        out.write_all(&img.data)?;
    } else {
        encode_png(img, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn encode_png<W: Write>(img: &RgbImage, out: W) -> Result<(), ImageError> {
    let to_io = |e: png::EncodingError| match e {
        png::EncodingError::IoError(e) => ImageError::Io(e),
        other => ImageError::Io(io::Error::other(other)),
    };
    let mut enc = png::Encoder::new(out, img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_compression(png::Compression::Balanced);
    enc.set_filter(png::Filter::Adaptive);
    let mut writer = enc.write_header().map_err(to_io)?;
    writer.write_image_data(&img.data).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

fn decode_png<R: BufRead + io::Seek>(reader: R) -> Result<RgbImage, ImageError> {
    let mut decoder = png::Decoder::new(reader);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_error)?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::UnsupportedFormat(format!(
            "PNG bit depth {:?} (only 8-bit is supported)",
            info.bit_depth
        )));
    }
    if info.color_type != png::ColorType::Rgb {
        return Err(ImageError::UnsupportedFormat(format!(
            "PNG color type {:?} (only RGB is supported)",
            info.color_type
        )));
    }
    if info.trns.is_some() {
        return Err(ImageError::UnsupportedFormat(
            "PNG with transparency chunk".into(),
        ));
    }
    if info.is_animated() {
        return Err(ImageError::UnsupportedFormat("animated PNG".into()));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::CorruptFile("PNG dimensions overflow".into()))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(png_error)?;
    buf.truncate(frame.buffer_size());
    RgbImage::from_raw(frame.width as usize, frame.height as usize, buf)
}

fn png_error(e: png::DecodingError) -> ImageError {
    match e {
        png::DecodingError::IoError(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
            ImageError::CorruptFile("truncated PNG".into())
        }
        png::DecodingError::IoError(e) => ImageError::Io(e),
        png::DecodingError::Format(f) => ImageError::CorruptFile(f.to_string()),
        png::DecodingError::Parameter(p) => ImageError::CorruptFile(p.to_string()),
        png::DecodingError::LimitsExceeded => ImageError::CorruptFile("PNG exceeds limits".into()),
    }
}

fn decode_ppm<R: Read>(mut reader: R) -> Result<RgbImage, ImageError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        *field = ppm_header_number(&bytes, &mut pos)?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(ImageError::UnsupportedFormat(format!(
            "PPM maxval {maxval} (only 255 is supported)"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(ImageError::CorruptFile("malformed PPM header".into())),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| ImageError::CorruptFile("PPM dimensions overflow".into()))?;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(ImageError::CorruptFile(format!(
            "PPM raster has {} bytes, expected {expected}",
            raster.len()
        )));
    }
    RgbImage::from_raw(width, height, raster[..expected].to_vec())
}

fn ppm_header_number(bytes: &[u8], pos: &mut usize) -> Result<usize, ImageError> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_digit() => break,
            _ => return Err(ImageError::CorruptFile("malformed PPM header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ImageError::CorruptFile("PPM header number out of range".into()))
}
