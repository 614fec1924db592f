//! Grid files, CSV reports and manifests.
//!
//! Raw grids: `SSPG`, then height, width, channels as `u32` little-endian,
//! then the channel-planar data as `f64` little-endian. Lossless.
//!
//! Graymaps: binary PGM (`P5`), 16-bit big-endian, one channel per file.
//! Values are mapped affinely from the `[min, max]` recorded in a
//! `# ssp-range <min> <max>` comment.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::ddim::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::grid::{Grid, Shape};
use crate::pipeline::SweepRow;

const MAGIC: &[u8; 4] = b"SSPG";
const HEADER_LEN: usize = 16;
const PGM_MAX: u16 = u16::MAX;
const RANGE_TAG: &str = "# ssp-range";

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::file(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

pub fn encode_raw(g: &Grid) -> Result<Vec<u8>> {
    let s = g.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * s.len());
    out.extend_from_slice(MAGIC);
    for d in [s.height, s.width, s.channels] {
        let d =
            u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in g.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_raw(bytes: &[u8]) -> Result<Grid> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "truncated header ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
    }
    let dim =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let count = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .filter(|n| n.checked_mul(8).is_some())
        .ok_or_else(|| Error::Format(format!("dimensions {h}x{w}x{c} overflow")))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * 8 {
        return Err(Error::Format(format!(
            "{h}x{w}x{c} grid needs {} data bytes, found {}",
            count * 8,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Grid::from_vec(Shape::new(h, w, c), data)
}

pub fn write_raw(path: impl AsRef<Path>, g: &Grid) -> Result<()> {
    write_file(path.as_ref(), &encode_raw(g)?)
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    decode_raw(&read_file(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Encodes a single-channel grid as 16-bit PGM.
pub fn encode_pgm(g: &Grid) -> Result<Vec<u8>> {
    if g.channels() != 1 {
        return Err(Error::ShapeMismatch {
            expected: "1 channel".into(),
            found: format!("{} channels", g.channels()),
        });
    }
    let (lo, hi) = g.min_max();
    let span = hi - lo;
    let mut out = format!(
        "P5\n{RANGE_TAG} {lo:?} {hi:?}\n{} {}\n{PGM_MAX}\n",
        g.width(),
        g.height()
    )
    .into_bytes();
    for &v in g.data() {
        let q = if span > 0.0 {
            ((v - lo) / span * PGM_MAX as f64).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

fn next_token<'a>(text: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    while *pos < text.len() && text[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < text.len() && !text[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &text[start..*pos])
}

fn parse_token<T: std::str::FromStr>(tok: Option<&[u8]>, what: &str) -> Result<T> {
    tok.and_then(|t| std::str::from_utf8(t).ok())
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad or missing PGM {what}")))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Grid> {
    if !bytes.starts_with(b"P5\n") {
        return Err(Error::Format("bad magic, expected P5".into()));
    }
    let mut pos = 3;
    let line_end = bytes[pos..]
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("truncated PGM header".into()))?;
    let line = std::str::from_utf8(&bytes[pos..pos + line_end])
        .map_err(|_| Error::Format("non-UTF-8 header".into()))?;
    let range = line
        .strip_prefix(RANGE_TAG)
        .ok_or_else(|| Error::Format(format!("missing {RANGE_TAG} comment")))?;
    let mut parts = range.split_whitespace().map(str::parse::<f64>);
    let (lo, hi) = match (parts.next(), parts.next()) {
        (Some(Ok(lo)), Some(Ok(hi))) if lo.is_finite() && hi.is_finite() && lo <= hi => (lo, hi),
        _ => return Err(Error::Format(format!("bad range comment {line:?}"))),
    };
    pos += line_end + 1;
    let w: usize = parse_token(next_token(bytes, &mut pos), "width")?;
    let h: usize = parse_token(next_token(bytes, &mut pos), "height")?;
    let maxval: u32 = parse_token(next_token(bytes, &mut pos), "maxval")?;
    if maxval != PGM_MAX as u32 {
        return Err(Error::Format(format!(
            "maxval {maxval}, expected {PGM_MAX}"
        )));
    }
    pos += 1;
    let count = h
        .checked_mul(w)
        .filter(|n| n.checked_mul(2).is_some())
        .ok_or_else(|| Error::Format(format!("dimensions {w}x{h} overflow")))?;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != 2 * count {
        return Err(Error::Format(format!(
            "{w}x{h} graymap needs {} data bytes, found {}",
            2 * count,
            body.len()
        )));
    }
    let span = hi - lo;
    let data = body
        .chunks_exact(2)
        .map(|b| match u16::from_be_bytes([b[0], b[1]]) {
            PGM_MAX => hi,
            q => lo + q as f64 / PGM_MAX as f64 * span,
        })
        .collect();
    Grid::from_vec(Shape::new(h, w, 1), data)
}

pub fn write_pgm(path: impl AsRef<Path>, g: &Grid) -> Result<()> {
    write_file(path.as_ref(), &encode_pgm(g)?)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    decode_pgm(&read_file(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// `<stem>_c<i>.pgm` for channel `i`.
pub fn channel_path(stem: impl AsRef<Path>, c: usize) -> PathBuf {
    let stem = stem.as_ref();
    let name = stem
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.with_file_name(format!("{name}_c{c}.pgm"))
}

/// Writes one graymap per channel and returns their paths.
pub fn write_pgm_channels(stem: impl AsRef<Path>, g: &Grid) -> Result<Vec<PathBuf>> {
    (0..g.channels())
        .map(|c| {
            let p = channel_path(&stem, c);
            write_pgm(&p, &g.extract_channel(c))?;
            Ok(p)
        })
        .collect()
}

pub fn read_pgm_channels(stem: impl AsRef<Path>, channels: usize) -> Result<Grid> {
    let planes = (0..channels)
        .map(|c| read_pgm(channel_path(&stem, c)))
        .collect::<Result<Vec<_>>>()?;
    Grid::stack_channels(&planes)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

/// One row per visited latent: `step,timestep,l2_norm`.
pub fn write_trajectory_csv(path: impl AsRef<Path>, t: &TrajectoryRecord) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["step", "timestep", "l2_norm"])?;
    for (i, e) in t.entries.iter().enumerate() {
        w.write_record([
            i.to_string(),
            e.timestep.to_string(),
            e.latent.norm().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_csv(path: impl AsRef<Path>, metrics: &BTreeMap<String, f64>) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["metric", "value"])?;
    for (k, v) in metrics {
        w.write_record([k.clone(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per named run, one column per metric (union of keys, sorted).
pub fn write_comparison_csv(
    path: impl AsRef<Path>,
    rows: &[(String, BTreeMap<String, f64>)],
) -> Result<()> {
    let mut keys: Vec<&String> = rows.iter().flat_map(|(_, m)| m.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(std::iter::once("kind").chain(keys.iter().map(|k| k.as_str())))?;
    for (name, m) in rows {
        let cells = keys
            .iter()
            .map(|k| m.get(*k).map(f64::to_string).unwrap_or_default());
        w.write_record(std::iter::once(name.clone()).chain(cells))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "sigma",
            "alpha",
            "content_l2",
            "low_band_ratio",
            "style_embedding_distance",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    serde_json::to_writer_pretty(&mut f, manifest).map_err(|e| Error::Format(e.to_string()))?;
    f.write_all(b"\n").map_err(|e| Error::file(path, e))
}

/// Reads a grid by extension: `.pgm` as a single graymap, anything else as raw.
pub fn read_grid(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm(path),
        _ => read_raw(path),
    }
}
