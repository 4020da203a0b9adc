//! CSV files: `#`-prefixed `key: value` provenance lines, one header row, then
//! comma-separated records.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::SurfaceCell;
use crate::error::{Error, Result};
use crate::noise::{NoiseTrace, PsdEstimate, PsdMethod};
use crate::schedule::CurveSet;

/// Header lines identifying how a file was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(config_sha256: &str, seed: u64, command: &str) -> Self {
        Self::default()
            .with("generator", concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")))
            .with("command", command)
            .with("config_sha256", config_sha256)
            .with("seed", seed)
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing `# {key}:` header line") })
    }

    fn require_f64(&self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        v.parse().map_err(|_| Error::Parse { line: 1, message: format!("header `{key}`: invalid number `{v}`") })
    }
}

/// Shortest representation that parses back to the same value, in
/// scientific notation for very large or small magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let m = x.abs();
    if x != 0.0 && m.is_finite() && !(1e-4..1e15).contains(&m) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Decimal text of `x·10^shift`, built by moving the decimal point of the
/// shortest representation of `x`, so no rounding occurs.
fn shifted_decimal(x: f64, shift: i32) -> String {
    if x == 0.0 || !x.is_finite() {
        return fmt_f64(x);
    }
    let sci = format!("{x:e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp = exp.parse::<i32>().expect("integer exponent") + shift;
    let (sign, mantissa) = mantissa.strip_prefix('-').map_or(("", mantissa), |m| ("-", m));
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    if !(-7..=15).contains(&exp) {
        return format!("{sign}{mantissa}e{exp}");
    }
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{digits}", "0".repeat((-point) as usize))
    } else if point as usize >= digits.len() {
        format!("{digits}{}", "0".repeat(point as usize - digits.len()))
    } else {
        format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
    };
    format!("{sign}{body}")
}

/// `t` (s) written in µs such that [`parse_us`] returns `t` exactly.
pub fn fmt_us(t: f64) -> String {
    shifted_decimal(t, 6)
}

/// Seconds from a µs field, exact for text written by [`fmt_us`].
pub fn parse_us(text: &str) -> Option<f64> {
    let text = text.trim();
    let (mantissa, exp) = match text.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (text, 0),
    };
    mantissa.parse::<f64>().ok()?;
    format!("{mantissa}e{}", exp - 6).parse().ok()
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Write `provenance`, `header` and `rows` to `path` through a temporary
/// file in the same directory, renamed into place once complete.
pub fn write_table(path: &Path, provenance: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in &provenance.entries {
        text.push_str(&format!("# {k}: {v}\n"));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).map_err(csv_error)?;
    for row in rows {
        writer.write_record(row).map_err(csv_error)?;
    }
    let body = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    text.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    write_atomic(path, text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { line, message: e.to_string() }
}

/// A parsed CSV file.
#[derive(Debug, Clone)]
pub struct Table {
    pub provenance: Provenance,
    pub header: Vec<String>,
    /// Records with their 1-based line numbers.
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut provenance = Provenance::default();
        for (i, line) in text.lines().enumerate() {
            let Some(rest) = line.strip_prefix('#') else { continue };
            let (k, v) = rest.split_once(':').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "header lines must read `# key: value`".into(),
            })?;
            provenance.entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(String::from).collect();
        if header.iter().all(String::is_empty) {
            return Err(Error::Parse { line: 1, message: "missing column header row".into() });
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            rows.push((line, record.iter().map(String::from).collect()));
        }
        Ok(Self { provenance, header, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Fails unless the header row equals `expected`.
    pub fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self.header.iter().map(String::as_str).eq(expected.iter().copied()) {
            Ok(())
        } else {
            let line = self.provenance.entries.len() + 1;
            Err(Error::Parse {
                line,
                message: format!("expected columns `{}`, found `{}`", expected.join(","), self.header.join(",")),
            })
        }
    }

    fn cell(&self, line: usize, row: &[String], col: usize) -> Result<f64> {
        let raw = &row[col];
        raw.parse().map_err(|_| Error::Parse {
            line,
            message: format!("column `{}`: invalid number `{raw}`", self.header[col]),
        })
    }

    fn opt_cell(&self, line: usize, row: &[String], col: usize) -> Result<Option<f64>> {
        if row[col].is_empty() {
            Ok(None)
        } else {
            self.cell(line, row, col).map(Some)
        }
    }
}

pub const TRACE_HEADER: [&str; 2] = ["t_s", "n_g"];
pub const PSD_HEADER: [&str; 2] = ["f_hz", "power"];
pub const CURVE_HEADER: [&str; 3] = ["curve", "t_r_us", "population"];
pub const SURFACE_HEADER: [&str; 4] = ["alpha", "a", "A", "log_error"];

pub fn write_trace(path: &Path, provenance: &Provenance, trace: &NoiseTrace) -> Result<()> {
    let fs = trace.sample_rate();
    let rows: Vec<Vec<String>> = trace
        .samples()
        .iter()
        .enumerate()
        .map(|(i, x)| vec![fmt_f64(i as f64 / fs), fmt_f64(*x)])
        .collect();
    let prov = provenance.clone().with("sample_rate_hz", fmt_f64(fs));
    write_table(path, &prov, &TRACE_HEADER, &rows)
}

pub fn read_trace(table: &Table) -> Result<NoiseTrace> {
    table.expect_header(&TRACE_HEADER)?;
    let fs = table.provenance.require_f64("sample_rate_hz")?;
    let samples = table
        .rows
        .iter()
        .map(|(line, row)| table.cell(*line, row, 1))
        .collect::<Result<Vec<_>>>()?;
    NoiseTrace::new(samples, fs)
}

fn method_label(m: PsdMethod) -> &'static str {
    match m {
        PsdMethod::Periodogram => "periodogram",
        PsdMethod::SegmentAveraged => "segment-averaged",
    }
}

pub fn write_psd(path: &Path, provenance: &Provenance, psd: &PsdEstimate) -> Result<()> {
    let rows: Vec<Vec<String>> = psd
        .frequencies
        .iter()
        .zip(&psd.power)
        .map(|(f, p)| vec![fmt_f64(*f), fmt_f64(*p)])
        .collect();
    let prov = provenance.clone().with("psd_method", method_label(psd.method));
    write_table(path, &prov, &PSD_HEADER, &rows)
}

pub fn read_psd(table: &Table) -> Result<PsdEstimate> {
    table.expect_header(&PSD_HEADER)?;
    let method = match table.provenance.require("psd_method")? {
        "periodogram" => PsdMethod::Periodogram,
        "segment-averaged" => PsdMethod::SegmentAveraged,
        other => return Err(Error::Parse { line: 1, message: format!("unknown psd_method `{other}`") }),
    };
    let mut frequencies = Vec::with_capacity(table.rows.len());
    let mut power = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        frequencies.push(table.cell(*line, row, 0)?);
        power.push(table.cell(*line, row, 1)?);
    }
    Ok(PsdEstimate { frequencies, power, method })
}

/// Long format: one row per curve and free-evolution time.
pub fn write_curves(path: &Path, provenance: &Provenance, set: &CurveSet) -> Result<()> {
    let t_us: Vec<String> = set.t_r.iter().map(|t| fmt_us(*t)).collect();
    let mut rows = Vec::with_capacity(set.n_curves() * set.n_points());
    for (c, curve) in set.curves.iter().enumerate() {
        for (t, y) in t_us.iter().zip(curve) {
            rows.push(vec![c.to_string(), t.clone(), fmt_f64(*y)]);
        }
    }
    let prov = provenance
        .clone()
        .with("level", set.level)
        .with("omega_r_hz", fmt_f64(set.omega_r));
    write_table(path, &prov, &CURVE_HEADER, &rows)
}

pub fn read_curves(table: &Table) -> Result<CurveSet> {
    table.expect_header(&CURVE_HEADER)?;
    let level = table.provenance.require("level")?.parse()?;
    let omega_r = table.provenance.require_f64("omega_r_hz")?;
    let mut t_r: Vec<f64> = Vec::new();
    let mut curves: Vec<Vec<f64>> = Vec::new();
    for (line, row) in &table.rows {
        let line = *line;
        let index: usize = row[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("column `curve`: invalid index `{}`", row[0]),
        })?;
        let t = parse_us(&row[1]).ok_or_else(|| Error::Parse {
            line,
            message: format!("column `t_r_us`: invalid number `{}`", row[1]),
        })?;
        let y = table.cell(line, row, 2)?;
        if index == curves.len() {
            curves.push(Vec::with_capacity(t_r.len()));
        } else if index + 1 != curves.len() {
            return Err(Error::Parse { line, message: format!("curve {index} out of order") });
        }
        let curve = curves.last_mut().expect("pushed above");
        let k = curve.len();
        if index == 0 {
            t_r.push(t);
        } else if k >= t_r.len() || t_r[k] != t {
            return Err(Error::Parse { line, message: format!("curve {index} does not share the t_R grid of curve 0") });
        }
        curve.push(y);
    }
    if let Some(i) = curves.iter().position(|c| c.len() != t_r.len()) {
        return Err(Error::GridMismatch(format!("curve {i} has {} points, grid has {}", curves[i].len(), t_r.len())));
    }
    let set = CurveSet { t_r, curves, level, omega_r };
    set.validate()?;
    Ok(set)
}

pub fn write_surface(path: &Path, provenance: &Provenance, cells: &[SurfaceCell]) -> Result<()> {
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| vec![fmt_f64(c.alpha), fmt_f64(c.a), opt_f64(c.amplitude), opt_f64(c.log_error)])
        .collect();
    write_table(path, provenance, &SURFACE_HEADER, &rows)
}

pub fn read_surface(table: &Table) -> Result<Vec<SurfaceCell>> {
    table.expect_header(&SURFACE_HEADER)?;
    table
        .rows
        .iter()
        .map(|(line, row)| {
            Ok(SurfaceCell {
                alpha: table.cell(*line, row, 0)?,
                a: table.cell(*line, row, 1)?,
                amplitude: table.opt_cell(*line, row, 2)?,
                log_error: table.opt_cell(*line, row, 3)?,
            })
        })
        .collect()
}

/// Plot data with a leading `t_r_us` column followed by named series.
pub fn write_series(path: &Path, provenance: &Provenance, t_r: &[f64], series: &[(&str, &[f64])]) -> Result<()> {
    let mut header = vec!["t_r_us"];
    header.extend(series.iter().map(|(name, _)| *name));
    let rows: Vec<Vec<String>> = t_r
        .iter()
        .enumerate()
        .map(|(i, t)| {
            std::iter::once(fmt_us(*t))
                .chain(series.iter().map(|(_, ys)| fmt_f64(ys[i])))
                .collect()
        })
        .collect();
    write_table(path, provenance, &header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.0, -0.0, 1.0, 0.1, 1e-300, 6.02e23, -3.5e-7, 123456.789, f64::MAX, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn microseconds_recover_seconds() {
        for i in 0..=100 {
            let t = 10e-6 * f64::from(i) / 100.0;
            assert_eq!(parse_us(&fmt_us(t)), Some(t));
        }
        for t in [8.947368421052632e-8, -3.25e-6, 1.5, 123456.0, 2e-30, 7e300] {
            assert_eq!(parse_us(&fmt_us(t)), Some(t), "{t}");
        }
        assert_eq!(fmt_us(2.5e-6), "2.5");
        assert_eq!(fmt_us(1e-7), "0.1");
        assert_eq!(fmt_us(0.012), "12000");
        assert_eq!(parse_us("x"), None);
    }

    #[test]
    fn malformed_record_reports_its_line() {
        let text = "# level: 23\n# omega_r_hz: 750000\ncurve,t_r_us,population\n0,0,1\n0,0.1,oops\n";
        match read_curves(&Table::parse(text).unwrap()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 5);
                assert!(message.contains("population"));
            }
            other => panic!("{other:?}"),
        }
        let ragged = "curve,t_r_us,population\n0,0,1\n0,0.1\n";
        match Table::parse(ragged) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_columns_are_rejected() {
        let t = Table::parse("# sample_rate_hz: 1000\nt,n\n0,1\n").unwrap();
        assert!(matches!(read_trace(&t), Err(Error::Parse { line: 2, .. })));
    }
}
