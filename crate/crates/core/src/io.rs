//! File formats: BSQ cubes with a JSON header, label lists, PPM class maps
//! and the binary model file.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{JpsaError, Result};
use crate::jpsa::ProjectionStack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32le,
    F64le,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32le => 4,
            Dtype::F64le => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interleave {
    Bsq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub dtype: Dtype,
    pub interleave: Interleave,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl CubeHeader {
    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn payload_bytes(&self) -> usize {
        self.n_pixels() * self.bands * self.dtype.size()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let h: CubeHeader =
            serde_json::from_str(text).map_err(|e| JpsaError::format(format!("cube header: {e}")))?;
        if let Some(s) = h.scale {
            if !(s.is_finite() && s != 0.0) {
                return Err(JpsaError::format(format!("cube header scale {s} must be finite and nonzero")));
            }
        }
        Ok(h)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("header serializes") + "\n"
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| JpsaError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| JpsaError::io(path, e))
}

/// Decode a BSQ payload. Band `b` of pixel `p` sits at element `b·n + p`.
pub fn decode_cube(header: &CubeHeader, payload: &[u8]) -> Result<FeatureMatrix> {
    let expected = header.payload_bytes();
    if payload.len() != expected {
        return Err(JpsaError::format(format!(
            "cube payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let n = header.n_pixels();
    let size = header.dtype.size();
    let mut m = DMatrix::zeros(header.bands, n);
    for (k, chunk) in payload.chunks_exact(size).enumerate() {
        let v = match header.dtype {
            Dtype::F32le => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
            Dtype::F64le => f64::from_le_bytes(chunk.try_into().unwrap()),
        };
        m[(k / n, k % n)] = match header.scale {
            Some(s) => v / s,
            None => v,
        };
    }
    FeatureMatrix::pixel(m)
}

pub fn encode_cube(cube: &FeatureMatrix, dtype: Dtype) -> Vec<u8> {
    let x = cube.values();
    let mut out = Vec::with_capacity(x.len() * dtype.size());
    for b in 0..x.nrows() {
        for p in 0..x.ncols() {
            match dtype {
                Dtype::F32le => out.extend_from_slice(&(x[(b, p)] as f32).to_le_bytes()),
                Dtype::F64le => out.extend_from_slice(&x[(b, p)].to_le_bytes()),
            }
        }
    }
    out
}

/// Returns the cube as a `bands × (width·height)` pixel matrix plus the header.
pub fn load_cube(header_path: &Path, payload_path: &Path) -> Result<(FeatureMatrix, CubeHeader)> {
    let text = fs::read_to_string(header_path).map_err(|e| JpsaError::io(header_path, e))?;
    let header = CubeHeader::parse(&text)?;
    let payload = read(payload_path)?;
    Ok((decode_cube(&header, &payload)?, header))
}

/// Writes an unscaled cube. `cube` must have `width·height` columns.
pub fn write_cube(
    header_path: &Path,
    payload_path: &Path,
    cube: &FeatureMatrix,
    width: usize,
    height: usize,
    dtype: Dtype,
) -> Result<CubeHeader> {
    if cube.n_samples() != width * height {
        return Err(JpsaError::input(format!(
            "cube has {} pixels, {width}x{height} needs {}",
            cube.n_samples(),
            width * height
        )));
    }
    let header = CubeHeader {
        width,
        height,
        bands: cube.dim(),
        dtype,
        interleave: Interleave::Bsq,
        scale: None,
    };
    write(header_path, header.to_json().as_bytes())?;
    write(payload_path, &encode_cube(cube, dtype))?;
    Ok(header)
}

pub fn parse_labels(text: &str, n_pixels: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(n_pixels);
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: i64 = t
            .parse()
            .map_err(|_| JpsaError::format(format!("label line {}: '{t}' is not an integer", i + 1)))?;
        if v < 0 {
            return Err(JpsaError::format(format!("label line {}: negative label {v}", i + 1)));
        }
        out.push(v as usize);
    }
    if out.len() != n_pixels {
        return Err(JpsaError::format(format!(
            "label file has {} entries, expected {n_pixels}",
            out.len()
        )));
    }
    Ok(out)
}

pub fn format_labels(labels: &[usize]) -> String {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    s
}

/// One non-negative integer per line; 0 marks an unlabeled pixel.
pub fn load_labels(path: &Path, n_pixels: usize) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| JpsaError::io(path, e))?;
    parse_labels(&text, n_pixels)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    write(path, format_labels(labels).as_bytes())
}

const BASE_COLORS: [[u8; 3]; 16] = [
    [255, 0, 0],
    [0, 160, 0],
    [0, 0, 255],
    [255, 200, 0],
    [0, 200, 200],
    [200, 0, 200],
    [255, 128, 64],
    [128, 64, 0],
    [128, 255, 128],
    [64, 64, 160],
    [255, 160, 200],
    [160, 160, 160],
    [0, 96, 96],
    [96, 0, 48],
    [200, 255, 0],
    [255, 255, 255],
];

/// Colors for classes `1..=n`; class 0 (unlabeled) is black.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPalette {
    colors: Vec<[u8; 3]>,
}

impl ClassPalette {
    pub fn new(n_classes: usize) -> Self {
        let mut colors: Vec<[u8; 3]> = Vec::with_capacity(n_classes);
        let mut k: u32 = 0;
        while colors.len() < n_classes {
            let c = if (k as usize) < BASE_COLORS.len() {
                BASE_COLORS[k as usize]
            } else {
                let h = k.wrapping_mul(2_654_435_761);
                [(h >> 24) as u8, (h >> 16) as u8, (h >> 8) as u8]
            };
            k += 1;
            if c != [0, 0, 0] && !colors.contains(&c) {
                colors.push(c);
            }
        }
        Self { colors }
    }

    pub fn from_colors(colors: Vec<[u8; 3]>) -> Result<Self> {
        for (i, c) in colors.iter().enumerate() {
            if *c == [0, 0, 0] || colors[..i].contains(c) {
                return Err(JpsaError::input(format!("palette color for class {} is not distinct", i + 1)));
            }
        }
        Ok(Self { colors })
    }

    pub fn n_classes(&self) -> usize {
        self.colors.len()
    }

    pub fn color(&self, class: usize) -> Option<[u8; 3]> {
        if class == 0 {
            Some([0, 0, 0])
        } else {
            self.colors.get(class - 1).copied()
        }
    }
}

/// Binary P6 image, raster order.
pub fn render_class_map(
    predictions: &[usize],
    width: usize,
    height: usize,
    palette: &ClassPalette,
) -> Result<Vec<u8>> {
    if predictions.len() != width * height {
        return Err(JpsaError::input(format!(
            "{} predictions for a {width}x{height} map",
            predictions.len()
        )));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(3 * predictions.len());
    for (i, &c) in predictions.iter().enumerate() {
        let rgb = palette
            .color(c)
            .ok_or_else(|| JpsaError::input(format!("pixel {i}: class {c} has no palette color")))?;
        out.extend_from_slice(&rgb);
    }
    Ok(out)
}

/// Inverse of [`render_class_map`]: class id per pixel plus the image size.
pub fn decode_class_map(bytes: &[u8], palette: &ClassPalette) -> Result<(Vec<usize>, usize, usize)> {
    // header: "P6", width, height, maxval, each followed by one whitespace byte
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() || start == pos {
            return Err(JpsaError::format("truncated PPM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        pos += 1;
    }
    if fields[0] != "P6" || fields[3] != "255" {
        return Err(JpsaError::format(format!("expected a P6 image with maxval 255, got {} / {}", fields[0], fields[3])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| JpsaError::format(format!("bad PPM dimension '{s}'")));
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let payload = &bytes[pos..];
    if payload.len() != 3 * w * h {
        return Err(JpsaError::format(format!(
            "PPM payload has {} bytes, expected {}",
            payload.len(),
            3 * w * h
        )));
    }
    let lookup: std::collections::HashMap<[u8; 3], usize> =
        (0..=palette.n_classes()).map(|c| (palette.color(c).unwrap(), c)).collect();
    let labels = payload
        .chunks_exact(3)
        .enumerate()
        .map(|(i, px)| {
            let rgb = [px[0], px[1], px[2]];
            lookup
                .get(&rgb)
                .copied()
                .ok_or_else(|| JpsaError::format(format!("pixel {i}: color {rgb:?} not in palette")))
        })
        .collect::<Result<_>>()?;
    Ok((labels, w, h))
}

const MODEL_MAGIC: &[u8; 8] = b"JPSAMDL\0";
pub const MODEL_VERSION: u32 = 1;

fn put_matrix(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(JpsaError::format(format!(
                "model file truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let r = self.u64()? as usize;
        let c = self.u64()? as usize;
        let len = r
            .checked_mul(c)
            .filter(|&l| l.checked_mul(8).is_some_and(|b| b <= self.buf.len() - self.pos))
            .ok_or_else(|| JpsaError::format(format!("matrix {r}x{c} exceeds model file size")))?;
        let mut vals = Vec::with_capacity(len);
        for _ in 0..len {
            vals.push(self.f64()?);
        }
        Ok(DMatrix::from_vec(r, c, vals))
    }
}

/// Layout: magic, version, layer count, input scale, each `Θ_l`, then a
/// presence byte and `P`. Matrices are `rows, cols` (u64) followed by
/// column-major f64 values, all little-endian.
pub fn encode_model(stack: &ProjectionStack) -> Result<Vec<u8>> {
    stack.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(stack.m() as u32).to_le_bytes());
    out.extend_from_slice(&stack.input_scale.to_le_bytes());
    for t in &stack.thetas {
        put_matrix(&mut out, t);
    }
    match &stack.p {
        Some(p) => {
            out.push(1);
            put_matrix(&mut out, p);
        }
        None => out.push(0),
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<ProjectionStack> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).ok() != Some(&MODEL_MAGIC[..]) {
        return Err(JpsaError::format("not a model file (bad magic)"));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(JpsaError::format(format!(
            "model version {version}, this build reads version {MODEL_VERSION}"
        )));
    }
    let m = r.u32()? as usize;
    let input_scale = r.f64()?;
    let mut thetas = Vec::with_capacity(m.min(1024));
    for _ in 0..m {
        thetas.push(r.matrix()?);
    }
    let p = match r.u8()? {
        0 => None,
        1 => Some(r.matrix()?),
        t => return Err(JpsaError::format(format!("bad P marker {t}"))),
    };
    if r.pos != bytes.len() {
        return Err(JpsaError::format(format!(
            "{} trailing bytes after model",
            bytes.len() - r.pos
        )));
    }
    let stack = ProjectionStack {
        thetas,
        p,
        input_scale,
    };
    stack.validate().map_err(|e| JpsaError::format(format!("model file: {e}")))?;
    Ok(stack)
}

pub fn save_model(path: &Path, stack: &ProjectionStack) -> Result<()> {
    write(path, &encode_model(stack)?)
}

pub fn load_model(path: &Path) -> Result<ProjectionStack> {
    decode_model(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(w: usize, h: usize, b: usize, dtype: Dtype) -> CubeHeader {
        CubeHeader {
            width: w,
            height: h,
            bands: b,
            dtype,
            interleave: Interleave::Bsq,
            scale: None,
        }
    }

    #[test]
    fn cube_single_pixel_two_bands() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        let m = decode_cube(&header(1, 1, 2, Dtype::F32le), &bytes).unwrap();
        assert_eq!(m.values(), &DMatrix::from_column_slice(2, 1, &[0.5, 1.0]));
    }

    #[test]
    fn cube_raster_order() {
        let bytes: Vec<u8> = (1..=4).flat_map(|v| (v as f32).to_le_bytes()).collect();
        let m = decode_cube(&header(2, 2, 1, Dtype::F32le), &bytes).unwrap();
        assert_eq!(m.values(), &DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn cube_scale_and_errors() {
        let mut h = header(1, 1, 1, Dtype::F64le);
        h.scale = Some(4.0);
        let m = decode_cube(&h, &2.0f64.to_le_bytes()).unwrap();
        assert_eq!(m.values()[(0, 0)], 0.5);
        let err = decode_cube(&h, &[0u8; 7]).unwrap_err().to_string();
        assert!(err.contains("7 bytes") && err.contains("8"), "{err}");
        let bad = r#"{"width":1,"height":1,"bands":1,"dtype":"i16le","interleave":"bsq"}"#;
        assert!(matches!(CubeHeader::parse(bad), Err(JpsaError::Format(_))));
    }

    #[test]
    fn cube_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = DMatrix::from_fn(6, 12, |r, c| (r * 31 + c * 7) as f64 / 13.0);
        let cube = FeatureMatrix::pixel(x).unwrap();
        let (hp, pp) = (dir.path().join("c.json"), dir.path().join("c.bin"));
        write_cube(&hp, &pp, &cube, 4, 3, Dtype::F64le).unwrap();
        let (back, h) = load_cube(&hp, &pp).unwrap();
        assert_eq!(back, cube);
        assert_eq!((h.width, h.height), (4, 3));
    }

    #[test]
    fn labels_parse() {
        assert_eq!(parse_labels("0\n2\n1\n", 3).unwrap(), vec![0, 2, 1]);
        assert!(matches!(parse_labels("0\n-1\n", 2), Err(JpsaError::Format(_))));
        assert!(matches!(parse_labels("0\n1\n", 3), Err(JpsaError::Format(_))));
    }

    #[test]
    fn ppm_examples() {
        let pal = ClassPalette::from_colors(vec![[255, 0, 0]]).unwrap();
        let img = render_class_map(&[1], 1, 1, &pal).unwrap();
        assert_eq!(img, b"P6\n1 1\n255\n\xff\x00\x00".to_vec());
        let img = render_class_map(&[0, 0], 2, 1, &pal).unwrap();
        assert_eq!(&img[img.len() - 6..], &[0u8; 6]);
        assert_eq!(img.len(), "P6\n2 1\n255\n".len() + 6);
        assert_eq!(decode_class_map(&img, &pal).unwrap(), (vec![0, 0], 2, 1));
        let err = render_class_map(&[0, 2], 2, 1, &pal).unwrap_err().to_string();
        assert!(err.contains("pixel 1"), "{err}");
    }

    #[test]
    fn palette_distinct() {
        let p = ClassPalette::new(40);
        let mut seen = vec![[0u8; 3]];
        for c in 1..=40 {
            let col = p.color(c).unwrap();
            assert!(!seen.contains(&col));
            seen.push(col);
        }
    }

    #[test]
    fn model_absent_p_and_version() {
        let stack = ProjectionStack::new(vec![DMatrix::identity(3, 3)], None).unwrap();
        let bytes = encode_model(&stack).unwrap();
        assert_eq!(decode_model(&bytes).unwrap(), stack);
        let mut bad = bytes.clone();
        bad[8] = 9;
        let err = decode_model(&bad).unwrap_err();
        assert!(matches!(err, JpsaError::Format(_)) && err.to_string().contains("version 9"));
        assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn cube_round_trip(w in 1usize..5, h in 1usize..4, b in 1usize..7, seed in any::<u64>(), f32_ in any::<bool>()) {
            let dtype = if f32_ { Dtype::F32le } else { Dtype::F64le };
            let mut s = seed;
            let x = DMatrix::from_fn(b, w * h, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = (s >> 11) as f64 / (1u64 << 53) as f64 * 200.0 - 100.0;
                if f32_ { v as f32 as f64 } else { v }
            });
            let cube = FeatureMatrix::pixel(x).unwrap();
            let back = decode_cube(&header(w, h, b, dtype), &encode_cube(&cube, dtype)).unwrap();
            prop_assert_eq!(back, cube);
        }

        #[test]
        fn labels_round_trip(v in proptest::collection::vec(0usize..20, 0..50)) {
            prop_assert_eq!(parse_labels(&format_labels(&v), v.len()).unwrap(), v);
        }

        #[test]
        fn model_round_trip(dims in proptest::collection::vec(1usize..5, 2..5), vals in proptest::collection::vec(-1e3f64..1e3, 64), with_p in any::<bool>()) {
            let mut k = 0;
            let mut next = || { k += 1; vals[k % vals.len()] * (k as f64).sqrt() };
            let thetas: Vec<_> = dims.windows(2).map(|w| DMatrix::from_fn(w[1], w[0], |_, _| next())).collect();
            let p = with_p.then(|| DMatrix::from_fn(3, *dims.last().unwrap(), |_, _| next()));
            let mut stack = ProjectionStack::new(thetas, p).unwrap();
            stack.input_scale = next();
            let back = decode_model(&encode_model(&stack).unwrap()).unwrap();
            prop_assert_eq!(back, stack);
        }
    }
}
