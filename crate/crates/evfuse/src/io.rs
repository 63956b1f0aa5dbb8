//! On-disk formats: event text, binary PGM, the tensor container, solver
//! configuration and dataset manifests.
//!
//! Formats are closed: each parser accepts exactly what its writer emits
//! and rejects everything else with a located error. All writers go through
//! [`atomic_write`], so an interrupted run never leaves a truncated file.
//!
//! * event text — one event per nonempty line, `t x y p`, timestamp in
//!   seconds (converted to integer microseconds, round half up), `p` is 0
//!   for negative and 1 for positive polarity, lines sorted by timestamp.
//! * PGM — binary `P5`, maxval 255, grayscale only; intensities map by
//!   v/255 on read and round-half-up v*255 on write.
//! * tensor container — magic `EVFT`, version 1 (u16), then h, w, d as
//!   little-endian u32, then `h*w*d` little-endian f32 values in t-major,
//!   row-major order.
//! * config — `key = value` lines with `#` comments; missing keys take
//!   defaults, out-of-range values parse with a warning record.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::event_model::{Event, EventStream, Polarity};
use crate::sensing::HighResTensor;
use crate::solver::{ConfigWarning, SolverConfig};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Parameter(format!("{} has no file name", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Event text
// ---------------------------------------------------------------------------

fn parse_event_line(line: &str, line_no: usize) -> Result<Event> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("expected 4 fields `t x y p`, got {}", fields.len()),
        });
    }
    let t_sec: f64 = fields[0].parse().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("timestamp `{}` is not a number", fields[0]),
    })?;
    if !t_sec.is_finite() || t_sec < 0.0 {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("timestamp {t_sec} must be finite and non-negative"),
        });
    }
    let t_us = (t_sec * 1e6).round();
    if t_us > u64::MAX as f64 {
        return Err(Error::Parse { line: line_no, msg: format!("timestamp {t_sec}s overflows") });
    }
    let x: u32 = fields[1].parse().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("x `{}` is not a non-negative integer", fields[1]),
    })?;
    let y: u32 = fields[2].parse().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("y `{}` is not a non-negative integer", fields[2]),
    })?;
    let polarity = match fields[3] {
        "0" => Polarity::Negative,
        "1" => Polarity::Positive,
        other => {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("polarity must be 0 or 1, got `{other}`"),
            })
        }
    };
    Ok(Event { x, y, t: t_us as u64, polarity })
}

/// Parses event text from a string; with a declared sensor size the
/// coordinates are bounds-checked, otherwise the size is inferred from the
/// largest coordinates (1x1 for no events).
pub fn parse_event_str(src: &str, sensor: Option<(u32, u32)>) -> Result<EventStream> {
    let mut events = Vec::new();
    let mut prev_t = 0u64;
    let mut max_x = 0u32;
    let mut max_y = 0u32;
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let ev = parse_event_line(raw, line_no)?;
        if let Some((w, h)) = sensor {
            if ev.x >= w || ev.y >= h {
                return Err(Error::Bounds(format!(
                    "line {line_no}: event at ({}, {}) outside sensor {w}x{h}",
                    ev.x, ev.y
                )));
            }
        }
        if !events.is_empty() && ev.t < prev_t {
            return Err(Error::Ordering(format!(
                "line {line_no}: timestamp {} before previous {}",
                ev.t, prev_t
            )));
        }
        prev_t = ev.t;
        max_x = max_x.max(ev.x);
        max_y = max_y.max(ev.y);
        events.push(ev);
    }
    let (w, h) = sensor.unwrap_or((max_x + 1, max_y + 1));
    EventStream::new(w, h, events)
}

/// Parses an event text file, inferring the sensor size from the largest
/// coordinates (1x1 for an empty file).
pub fn parse_event_text(path: &Path) -> Result<EventStream> {
    let bytes = read_file(path)?;
    let src = String::from_utf8(bytes)
        .map_err(|_| Error::Format(format!("{}: not valid UTF-8", path.display())))?;
    parse_event_str(&src, None)
}

/// Parses an event text file against a declared sensor size, rejecting
/// out-of-range coordinates.
pub fn parse_event_text_with_size(path: &Path, width: u32, height: u32) -> Result<EventStream> {
    let bytes = read_file(path)?;
    let src = String::from_utf8(bytes)
        .map_err(|_| Error::Format(format!("{}: not valid UTF-8", path.display())))?;
    parse_event_str(&src, Some((width, height)))
}

/// Formats a stream as event text; timestamps are written as seconds with
/// six decimals, which round-trips integer microseconds exactly.
pub fn format_event_text(stream: &EventStream) -> String {
    let mut out = String::new();
    for ev in stream.events() {
        let secs = ev.t / 1_000_000;
        let frac = ev.t % 1_000_000;
        let p = match ev.polarity {
            Polarity::Positive => 1,
            Polarity::Negative => 0,
        };
        out.push_str(&format!("{secs}.{frac:06} {} {} {p}\n", ev.x, ev.y));
    }
    out
}

pub fn write_event_text(stream: &EventStream, path: &Path) -> Result<()> {
    atomic_write(path, format_event_text(stream).as_bytes())
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

/// Encodes a frame as binary PGM (`P5`, maxval 255) with round-half-up
/// quantization.
pub fn encode_pgm(frame: ArrayView2<f64>) -> Result<Vec<u8>> {
    let (h, w) = frame.dim();
    if h == 0 || w == 0 {
        return Err(Error::Format("cannot encode an empty frame".into()));
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve(h * w);
    for &v in frame.iter() {
        let q = (v * 255.0).round().clamp(0.0, 255.0);
        out.push(q as u8);
    }
    Ok(out)
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn skip_whitespace(&mut self) -> Result<()> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
            return Err(Error::Format("comments are not part of the format".into()));
        }
        if self.pos == start {
            return Err(Error::Format("missing whitespace separator in header".into()));
        }
        Ok(())
    }

    fn read_number(&mut self) -> Result<u64> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Format("expected a decimal number in header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("unreadable number in header".into()))
    }
}

/// Decodes a binary PGM produced by [`encode_pgm`]; maxval must be 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Format("bad magic: expected binary PGM `P5`".into()));
    }
    let mut cur = ByteCursor { bytes, pos: 2 };
    cur.skip_whitespace()?;
    let w = cur.read_number()?;
    cur.skip_whitespace()?;
    let h = cur.read_number()?;
    cur.skip_whitespace()?;
    let maxval = cur.read_number()?;
    if maxval != 255 {
        return Err(Error::Format(format!("maxval must be 255, got {maxval}")));
    }
    if w == 0 || h == 0 {
        return Err(Error::Format("zero image dimension".into()));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::Format("missing separator before pixel data".into()));
    }
    cur.pos += 1;
    let expected = (w * h) as usize;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(Error::Length(format!(
            "pixel data truncated: expected {expected} bytes, got {}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::Length(format!(
            "trailing bytes after pixel data: expected {expected}, got {}",
            payload.len()
        )));
    }
    let mut frame = Array2::<f64>::zeros((h as usize, w as usize));
    for (o, &b) in frame.iter_mut().zip(payload.iter()) {
        *o = f64::from(b) / 255.0;
    }
    Ok(frame)
}

pub fn read_pgm(path: &Path) -> Result<Array2<f64>> {
    decode_pgm(&read_file(path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_pgm(frame: ArrayView2<f64>, path: &Path) -> Result<()> {
    atomic_write(path, &encode_pgm(frame)?)
}

// ---------------------------------------------------------------------------
// Tensor container (EVFT)
// ---------------------------------------------------------------------------

const EVFT_MAGIC: &[u8; 4] = b"EVFT";
const EVFT_VERSION: u16 = 1;
const EVFT_HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4;

/// Encodes a `(d, h, w)` array into the tensor container.
pub fn encode_evft(data: &Array3<f64>) -> Result<Vec<u8>> {
    let (d, h, w) = (data.shape()[0], data.shape()[1], data.shape()[2]);
    if d == 0 || h == 0 || w == 0 {
        return Err(Error::Format("cannot encode a tensor with a zero dimension".into()));
    }
    let mut out = Vec::with_capacity(EVFT_HEADER_LEN + d * h * w * 4);
    out.extend_from_slice(EVFT_MAGIC);
    out.extend_from_slice(&EVFT_VERSION.to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for t in 0..d {
        for y in 0..h {
            for x in 0..w {
                out.extend_from_slice(&(data[(t, y, x)] as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Decodes the tensor container into a `(d, h, w)` array.
pub fn decode_evft(bytes: &[u8]) -> Result<Array3<f64>> {
    if bytes.len() < EVFT_HEADER_LEN {
        return Err(Error::Length(format!(
            "header truncated: need {EVFT_HEADER_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != EVFT_MAGIC {
        return Err(Error::Format("bad magic: expected `EVFT`".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != EVFT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let read_u32 =
        |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let h = read_u32(6) as usize;
    let w = read_u32(10) as usize;
    let d = read_u32(14) as usize;
    if d == 0 || h == 0 || w == 0 {
        return Err(Error::Format(format!("header declares a zero dimension: {h}x{w}x{d}")));
    }
    let expected = d
        .checked_mul(h)
        .and_then(|n| n.checked_mul(w))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
    let payload = &bytes[EVFT_HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::Length(format!(
            "payload truncated: expected {expected} bytes, got {}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::Length(format!(
            "trailing bytes after payload: expected {expected}, got {}",
            payload.len()
        )));
    }
    let mut data = Array3::<f64>::zeros((d, h, w));
    let mut off = 0;
    for t in 0..d {
        for y in 0..h {
            for x in 0..w {
                let v = f32::from_le_bytes([
                    payload[off],
                    payload[off + 1],
                    payload[off + 2],
                    payload[off + 3],
                ]);
                data[(t, y, x)] = f64::from(v);
                off += 4;
            }
        }
    }
    Ok(data)
}

pub fn read_evft(path: &Path) -> Result<Array3<f64>> {
    decode_evft(&read_file(path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_evft(data: &Array3<f64>, path: &Path) -> Result<()> {
    atomic_write(path, &encode_evft(data)?)
}

/// Writes a latent video tensor to the container.
pub fn write_tensor(tensor: &HighResTensor, path: &Path) -> Result<()> {
    write_evft(tensor.data(), path)
}

/// Reads a latent video tensor; the container does not carry the frame
/// period, so the default of 1000 us applies.
pub fn read_tensor(path: &Path) -> Result<HighResTensor> {
    HighResTensor::new(read_evft(path)?, 1000)
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

/// A parsed configuration plus any out-of-range warnings.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: SolverConfig,
    pub warnings: Vec<ConfigWarning>,
}

/// Parses `key = value` configuration text. Missing keys keep their
/// defaults; values outside the recommended ranges are accepted but
/// reported in `warnings`.
pub fn parse_config_str(src: &str) -> Result<LoadedConfig> {
    let mut cfg = SolverConfig::default();
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {line_no}: expected `key = value`, got `{line}`"))
        })?;
        let key = key.trim();
        let value = value.trim();
        let as_f64 = || -> Result<f64> {
            value.parse().map_err(|_| {
                Error::Config(format!("line {line_no}: `{value}` is not a number for key `{key}`"))
            })
        };
        let as_usize = || -> Result<usize> {
            value.parse().map_err(|_| {
                Error::Config(format!(
                    "line {line_no}: `{value}` is not a positive integer for key `{key}`"
                ))
            })
        };
        match key {
            "alpha" => cfg.alpha = as_f64()?,
            "lambda_e" => cfg.lambda_e = as_f64()?,
            "lambda_xy" => cfg.lambda_xy = as_f64()?,
            "lambda_t" => cfg.lambda_t = as_f64()?,
            "lr0" => cfg.lr0 = as_f64()?,
            "lr_drop_factor" => cfg.lr_drop_factor = as_f64()?,
            "lr_drop_every" => cfg.lr_drop_every = as_usize()?,
            "beta1" => cfg.beta1 = as_f64()?,
            "beta2" => cfg.beta2 = as_f64()?,
            "adam_epsilon" => cfg.adam_epsilon = as_f64()?,
            "epochs" => cfg.epochs = as_usize()?,
            "eps_p" => cfg.thresholds.eps_p = as_f64()?,
            "eps_n" => cfg.thresholds.eps_n = as_f64()?,
            "b" => cfg.thresholds.b = as_f64()?,
            other => {
                return Err(Error::Config(format!("line {line_no}: unknown key `{other}`")));
            }
        }
    }
    cfg.validate()?;
    let warnings = cfg.table_warnings();
    Ok(LoadedConfig { config: cfg, warnings })
}

/// Renders a config as `key = value` text; parsing it back reproduces the
/// config exactly.
pub fn emit_config(cfg: &SolverConfig) -> String {
    format!(
        "alpha = {}\nlambda_e = {}\nlambda_xy = {}\nlambda_t = {}\nlr0 = {}\n\
         lr_drop_factor = {}\nlr_drop_every = {}\nbeta1 = {}\nbeta2 = {}\n\
         adam_epsilon = {}\nepochs = {}\neps_p = {}\neps_n = {}\nb = {}\n",
        cfg.alpha,
        cfg.lambda_e,
        cfg.lambda_xy,
        cfg.lambda_t,
        cfg.lr0,
        cfg.lr_drop_factor,
        cfg.lr_drop_every,
        cfg.beta1,
        cfg.beta2,
        cfg.adam_epsilon,
        cfg.epochs,
        cfg.thresholds.eps_p,
        cfg.thresholds.eps_n,
        cfg.thresholds.b,
    )
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = read_file(path)?;
    let src = String::from_utf8(bytes)
        .map_err(|_| Error::Format(format!("{}: not valid UTF-8", path.display())))?;
    parse_config_str(&src)
}

// ---------------------------------------------------------------------------
// Dataset manifest
// ---------------------------------------------------------------------------

/// One frame entry of a [`DatasetManifest`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestFrame {
    pub timestamp_us: u64,
    pub path: PathBuf,
}

/// Describes a dataset on disk: sensor geometry, the event file and the
/// ordered, timestamped intensity frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub sensor_width: u32,
    pub sensor_height: u32,
    pub event_file: PathBuf,
    pub frames: Vec<ManifestFrame>,
}

/// Parses manifest text: `key = value` lines for the sensor geometry and
/// event file, then a `frames` line followed by `timestamp_us path` rows
/// with strictly increasing timestamps.
pub fn parse_manifest_str(src: &str) -> Result<DatasetManifest> {
    let mut sensor_width = None;
    let mut sensor_height = None;
    let mut event_file = None;
    let mut frames: Vec<ManifestFrame> = Vec::new();
    let mut in_frames = false;
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if !in_frames {
            if line == "frames" {
                in_frames = true;
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "sensor_width" => {
                    sensor_width = Some(value.parse().map_err(|_| {
                        Error::Config(format!("line {line_no}: bad sensor_width `{value}`"))
                    })?)
                }
                "sensor_height" => {
                    sensor_height = Some(value.parse().map_err(|_| {
                        Error::Config(format!("line {line_no}: bad sensor_height `{value}`"))
                    })?)
                }
                "event_file" => event_file = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::Config(format!("line {line_no}: unknown key `{other}`")))
                }
            }
        } else {
            let (ts, path) = line.split_once(char::is_whitespace).ok_or_else(|| {
                Error::Config(format!("line {line_no}: expected `timestamp_us path`"))
            })?;
            let timestamp_us: u64 = ts.trim().parse().map_err(|_| {
                Error::Config(format!("line {line_no}: bad timestamp `{ts}`"))
            })?;
            if let Some(last) = frames.last() {
                if timestamp_us <= last.timestamp_us {
                    return Err(Error::Config(format!(
                        "line {line_no}: frame timestamps must be strictly increasing"
                    )));
                }
            }
            frames.push(ManifestFrame { timestamp_us, path: PathBuf::from(path.trim()) });
        }
    }
    let sensor_width =
        sensor_width.ok_or_else(|| Error::Config("missing key `sensor_width`".into()))?;
    let sensor_height =
        sensor_height.ok_or_else(|| Error::Config("missing key `sensor_height`".into()))?;
    let event_file = event_file.ok_or_else(|| Error::Config("missing key `event_file`".into()))?;
    Ok(DatasetManifest { sensor_width, sensor_height, event_file, frames })
}

pub fn emit_manifest(m: &DatasetManifest) -> String {
    let mut out = format!(
        "sensor_width = {}\nsensor_height = {}\nevent_file = {}\nframes\n",
        m.sensor_width,
        m.sensor_height,
        m.event_file.display()
    );
    for f in &m.frames {
        out.push_str(&format!("{} {}\n", f.timestamp_us, f.path.display()));
    }
    out
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let bytes = read_file(path)?;
    let src = String::from_utf8(bytes)
        .map_err(|_| Error::Format(format!("{}: not valid UTF-8", path.display())))?;
    parse_manifest_str(&src)
}

// ---------------------------------------------------------------------------
// Error map export
// ---------------------------------------------------------------------------

/// Writes an error map as an 8-bit PGM with [0, max] scaled linearly to
/// [0, 255]; the map's maximum is recorded in a `<name>.max.txt` sidecar so
/// the scaling is invertible.
pub fn write_error_map_pgm(map: ArrayView2<f64>, path: &Path) -> Result<()> {
    let max = map.iter().cloned().fold(0.0f64, f64::max);
    let scaled = if max > 0.0 { map.map(|&v| v / max) } else { map.map(|_| 0.0) };
    write_pgm(scaled.view(), path)?;
    let mut sidecar_name = path
        .file_name()
        .ok_or_else(|| Error::Parameter(format!("{} has no file name", path.display())))?
        .to_os_string();
    sidecar_name.push(".max.txt");
    atomic_write(&path.with_file_name(sidecar_name), format!("{max}\n").as_bytes())
}
