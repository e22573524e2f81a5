//! Binary image and sinogram files, metric tables and PGM previews.
//!
//! Images (`TIM1`): magic, `u32` size `M`, then `M * M` little-endian `f32`
//! values, row-major. Sinograms (`TSG1`): magic, `u32` bins, `u32` angles,
//! `f64` detector spacing, the angles in degrees as `f64`, then the data as
//! `f32`, angle-major. Values are stored in single precision, so writing an
//! in-memory image rounds it once; after that, round-trips are exact.
//!
//! Angular weights are not part of `TSG1` and are recomputed from the angle
//! list on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Image, Sinogram};

const IMAGE_MAGIC: &[u8; 4] = b"TIM1";
const SINO_MAGIC: &[u8; 4] = b"TSG1";
/// Largest accepted payload, in values.
const MAX_VALUES: u64 = 1 << 31;

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f32s<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 4];
    read_exact(r, &mut bytes, what)?;
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect())
}

fn check_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, "header")?;
    if &b != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&b),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn expect_end<R: Read>(r: &mut R) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

fn write_f32s<W: Write>(w: &mut W, data: &[f64]) -> Result<()> {
    for &v in data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn to_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("{what} {n} does not fit in 32 bits")))
}

pub fn write_image_to<W: Write>(w: &mut W, img: &Image) -> Result<()> {
    w.write_all(IMAGE_MAGIC)?;
    w.write_all(&to_u32(img.size(), "image size")?.to_le_bytes())?;
    write_f32s(w, img.data())
}

pub fn read_image_from<R: Read>(r: &mut R) -> Result<Image> {
    check_magic(r, IMAGE_MAGIC)?;
    let m = read_u32(r, "image header")? as u64;
    if m == 0 || m * m > MAX_VALUES {
        return Err(Error::Format(format!("unsupported image size {m}")));
    }
    let data = read_f32s(r, (m * m) as usize, "image payload")?;
    expect_end(r)?;
    Image::from_data(m as usize, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_sinogram_to<W: Write>(w: &mut W, sin: &Sinogram) -> Result<()> {
    let g = sin.geometry();
    w.write_all(SINO_MAGIC)?;
    w.write_all(&to_u32(g.n_bins(), "bin count")?.to_le_bytes())?;
    w.write_all(&to_u32(g.n_angles(), "angle count")?.to_le_bytes())?;
    w.write_all(&g.det_spacing().to_le_bytes())?;
    for a in g.angles_deg() {
        w.write_all(&a.to_le_bytes())?;
    }
    write_f32s(w, sin.data())
}

/// Reads a `TSG1` stream. The file does not record the image size; `None`
/// takes it equal to the number of bins.
pub fn read_sinogram_from<R: Read>(r: &mut R, image_size: Option<usize>) -> Result<Sinogram> {
    check_magic(r, SINO_MAGIC)?;
    let nb = read_u32(r, "sinogram header")? as u64;
    let na = read_u32(r, "sinogram header")? as u64;
    if nb * na > MAX_VALUES {
        return Err(Error::Format(format!("sinogram of {nb} x {na} is too large")));
    }
    let spacing = read_f64(r, "sinogram header")?;
    let angles = (0..na).map(|_| read_f64(r, "angle list")).collect::<Result<Vec<_>>>()?;
    let data = read_f32s(r, (nb * na) as usize, "sinogram payload")?;
    expect_end(r)?;
    let g = Geometry::new(image_size.unwrap_or(nb as usize), nb as usize, spacing, angles).map_err(|e| Error::Format(e.to_string()))?;
    Sinogram::from_data(g, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_image_to(&mut w, img)?;
    Ok(w.flush()?)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    read_image_from(&mut BufReader::new(File::open(path)?))
}

pub fn write_sinogram(path: impl AsRef<Path>, sin: &Sinogram) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_sinogram_to(&mut w, sin)?;
    Ok(w.flush()?)
}

pub fn read_sinogram(path: impl AsRef<Path>, image_size: Option<usize>) -> Result<Sinogram> {
    read_sinogram_from(&mut BufReader::new(File::open(path)?), image_size)
}

/// 8-bit binary PGM, linearly mapping `[min, max]` of the image to `[0, 255]`.
pub fn write_pgm_to<W: Write>(w: &mut W, img: &Image) -> Result<()> {
    let (lo, hi) = img.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    write!(w, "P5\n{m} {m}\n255\n", m = img.size())?;
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
        .collect();
    Ok(w.write_all(&bytes)?)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pgm_to(&mut w, img)?;
    Ok(w.flush()?)
}

/// One line of a metrics table.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub method: String,
    /// Canonical `key=value` list separated by `;`.
    pub params: String,
    /// `inf` for identical images.
    pub psnr_db: f64,
    pub iterations: usize,
    pub wall_seconds: f64,
}

pub const METRIC_HEADER: [&str; 5] = ["method", "params", "psnr_db", "iterations", "wall_seconds"];

/// Formats `(key, value)` pairs as a canonical parameter string.
pub fn format_params(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Writes a header and rows of arbitrary string fields.
pub fn write_table_to<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(header).map_err(csv_error)?;
    for row in rows {
        out.write_record(row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_table(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_table_to(File::create(path)?, header, rows)
}

impl MetricRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.method.clone(),
            self.params.clone(),
            self.psnr_db.to_string(),
            self.iterations.to_string(),
            self.wall_seconds.to_string(),
        ]
    }
}

pub fn write_metrics_to<W: Write>(w: W, rows: &[MetricRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows.iter().map(MetricRow::fields).collect();
    write_table_to(w, &METRIC_HEADER, &rows)
}

pub fn write_metrics(path: impl AsRef<Path>, rows: &[MetricRow]) -> Result<()> {
    write_metrics_to(File::create(path)?, rows)
}

pub fn read_metrics_from<R: Read>(r: R) -> Result<Vec<MetricRow>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let header = rdr.headers().map_err(csv_error)?;
    if header.iter().ne(METRIC_HEADER) {
        return Err(Error::Format(format!("unexpected metrics header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number '{s}'")));
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(csv_error)?;
            Ok(MetricRow {
                method: rec[0].to_string(),
                params: rec[1].to_string(),
                psnr_db: num(&rec[2])?,
                iterations: rec[3].parse().map_err(|_| Error::Format(format!("bad count '{}'", &rec[3])))?,
                wall_seconds: num(&rec[4])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_image() -> Image {
        Image::from_fn(5, |i, j| (i as f64 * 0.3 - j as f64).sin())
    }

    #[test]
    fn image_round_trip_rounds_once() {
        let img = sample_image();
        let mut buf = Vec::new();
        write_image_to(&mut buf, &img).unwrap();
        assert_eq!(buf.len(), 8 + 25 * 4);
        let back = read_image_from(&mut buf.as_slice()).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        let mut again = Vec::new();
        write_image_to(&mut again, &back).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn sinogram_keeps_angles_exactly() {
        let angles = vec![0.1, 1.0 / 3.0, 90.0, 179.999];
        let g = Geometry::new(6, 3, 0.7, angles.clone()).unwrap();
        let sin = Sinogram::from_data(g, (0..12).map(|v| v as f64 * 0.25).collect()).unwrap();
        let mut buf = Vec::new();
        write_sinogram_to(&mut buf, &sin).unwrap();
        let back = read_sinogram_from(&mut buf.as_slice(), Some(6)).unwrap();
        assert_eq!(back.geometry().angles_deg(), angles.as_slice());
        assert_eq!(back.geometry().det_spacing(), 0.7);
        assert_eq!(back, sin);
    }

    #[test]
    fn malformed_files_are_format_errors() {
        let mut buf = Vec::new();
        write_image_to(&mut buf, &sample_image()).unwrap();
        let mut wrong = buf.clone();
        wrong[3] = b'2';
        assert!(matches!(read_image_from(&mut wrong.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_image_from(&mut &buf[..buf.len() - 1]), Err(Error::Format(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_image_from(&mut long.as_slice()), Err(Error::Format(_))));
        let mut huge = b"TIM1".to_vec();
        huge.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(read_image_from(&mut huge.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_sinogram_from(&mut buf.as_slice(), None), Err(Error::Format(_))));
    }

    #[test]
    fn unsorted_angles_are_rejected_on_load() {
        let mut buf = b"TSG1".to_vec();
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&2u32.to_le_bytes());
        buf.extend_from_slice(&1.0f64.to_le_bytes());
        for a in [10.0f64, 5.0] {
            buf.extend_from_slice(&a.to_le_bytes());
        }
        buf.extend_from_slice(&[0u8; 8]);
        assert!(matches!(read_sinogram_from(&mut buf.as_slice(), Some(4)), Err(Error::Format(_))));
    }

    #[test]
    fn metrics_table_layout() {
        let rows = vec![
            MetricRow { method: "tv".into(), params: format_params(&[("lambda", "0.001".into())]), psnr_db: 28.5, iterations: 410, wall_seconds: 1.25 },
            MetricRow { method: "exact".into(), params: String::new(), psnr_db: f64::INFINITY, iterations: 0, wall_seconds: 0.0 },
        ];
        let mut buf = Vec::new();
        write_metrics_to(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "method,params,psnr_db,iterations,wall_seconds\ntv,lambda=0.001,28.5,410,1.25\nexact,,inf,0,0\n"
        );
        assert_eq!(read_metrics_from(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn pgm_maps_range_to_bytes() {
        let img = Image::from_data(2, vec![-1.0, 0.0, 0.5, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_pgm_to(&mut buf, &img).unwrap();
        assert_eq!(&buf[..11], b"P5\n2 2\n255\n");
        assert_eq!(&buf[11..], &[0, 128, 191, 255]);
    }
}
