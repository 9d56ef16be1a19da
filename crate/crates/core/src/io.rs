//! Text formats. Every writer emits floats in shortest round-trip form, so
//! write -> read -> write reproduces the same bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::csl::ExclusionCurve;
use crate::dynamics::campaign::RingdownRecord;
use crate::error::{Error, Result};
use crate::fit::GainPoint;
use crate::physics::Unit;
use crate::spectrum::Spectrum;

pub const SPECTRUM_HEADER: &str = "f_hz,psd,rel_err";
pub const CURVE_HEADER: &str = "r_c_m,lambda_max_per_s";
pub const GAIN_HEADER: &str = "inv_gain,inv_qa,sigma_inv_qa";
pub const WAVEFORM_HEADER: &str = "t_s,value";

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 && v.is_sign_negative() {
        return "-0".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("line {line}: bad number '{}'", s.trim())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

type Header = Vec<(String, String)>;

// Header lines look like `# key=value`. Returns them in order plus the
// remaining body lines with their 1-based line numbers.
fn split_header(text: &str) -> (Header, Vec<(usize, &str)>) {
    let mut header = Vec::new();
    let mut body = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim_start().split_once('=') {
                header.push((k.trim().to_string(), v.to_string()));
            }
        } else if !line.trim().is_empty() {
            body.push((i + 1, line));
        }
    }
    (header, body)
}

fn expect_columns(body: &[(usize, &str)], header: &str) -> Result<()> {
    match body.first() {
        Some((_, l)) if l.trim() == header => Ok(()),
        Some((n, l)) => Err(Error::Parse(format!("line {n}: expected header '{header}', found '{}'", l.trim()))),
        None => Err(Error::Parse(format!("missing header '{header}'"))),
    }
}

fn check_meta(key: &str, value: &str) -> Result<()> {
    if key.contains(['=', '\n']) || key.trim() != key || key.is_empty() || value.contains('\n') {
        return Err(Error::Invalid(format!("metadata entry '{key}' cannot be written to a CSV header")));
    }
    Ok(())
}

/// Spectrum CSV. Header lines carry the unit tag, `n_av`, `df_hz`, the
/// flagged-bin indices and any provenance entries (`meta.` prefix).
pub fn write_spectrum_csv(s: &Spectrum) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "# unit={}", s.unit.tag()).unwrap();
    writeln!(out, "# n_av={}", s.n_av).unwrap();
    writeln!(out, "# df_hz={}", fmt_f64(s.df)).unwrap();
    let flagged: Vec<String> = (0..s.len()).filter(|&i| s.excluded[i]).map(|i| i.to_string()).collect();
    writeln!(out, "# excluded={}", flagged.join(" ")).unwrap();
    for (k, v) in &s.meta {
        check_meta(k, v)?;
        writeln!(out, "# meta.{k}={v}").unwrap();
    }
    writeln!(out, "{SPECTRUM_HEADER}").unwrap();
    for i in 0..s.len() {
        writeln!(out, "{},{},{}", fmt_f64(s.f[i]), fmt_f64(s.psd[i]), fmt_f64(s.rel_err[i])).unwrap();
    }
    Ok(out)
}

pub fn read_spectrum_csv(text: &str) -> Result<Spectrum> {
    let (header, body) = split_header(text);
    expect_columns(&body, SPECTRUM_HEADER)?;
    let mut unit = None;
    let mut n_av = None;
    let mut df = None;
    let mut flagged = Vec::new();
    let mut meta = std::collections::BTreeMap::new();
    for (k, v) in header {
        match k.as_str() {
            "unit" => unit = Some(v.parse::<Unit>()?),
            "n_av" => n_av = Some(v.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad n_av '{v}'")))?),
            "df_hz" => df = Some(parse_f64(&v, 0)?),
            "excluded" => {
                for t in v.split_whitespace() {
                    flagged.push(t.parse::<usize>().map_err(|_| Error::Parse(format!("bad excluded index '{t}'")))?);
                }
            }
            other => {
                if let Some(key) = other.strip_prefix("meta.") {
                    meta.insert(key.to_string(), v);
                }
            }
        }
    }
    let unit = unit.ok_or_else(|| Error::Parse("spectrum CSV lacks a unit header".into()))?;
    let n_av = n_av.ok_or_else(|| Error::Parse("spectrum CSV lacks an n_av header".into()))?;
    let (mut f, mut psd, mut rel) = (Vec::new(), Vec::new(), Vec::new());
    for &(n, line) in &body[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Parse(format!("line {n}: expected 3 columns, found {}", cols.len())));
        }
        f.push(parse_f64(cols[0], n)?);
        psd.push(parse_f64(cols[1], n)?);
        rel.push(parse_f64(cols[2], n)?);
    }
    let mut s = Spectrum::new(f, psd, rel, n_av, unit)?;
    if let Some(df) = df {
        if (df - s.df).abs() > 1e-9 * df {
            return Err(Error::Parse(format!("df_hz header {df} disagrees with the frequency grid")));
        }
        s.df = df;
    }
    for i in flagged {
        if i >= s.len() {
            return Err(Error::Parse(format!("excluded index {i} out of range")));
        }
        s.excluded[i] = true;
    }
    s.meta = meta;
    Ok(s)
}

/// Tabulated exclusion curve as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub s_f0_n2_per_hz: f64,
    pub mass_model_id: String,
    /// `(r_C, λ_max)`; `None` where the quadrature failed.
    pub rows: Vec<(f64, Option<f64>)>,
}

impl From<&ExclusionCurve> for CurveTable {
    fn from(c: &ExclusionCurve) -> Self {
        Self {
            s_f0_n2_per_hz: c.s_f0_n2_per_hz,
            mass_model_id: c.mass_model_id.clone(),
            rows: c.points.iter().map(|p| (p.r_c_m, p.lambda_max_per_s)).collect(),
        }
    }
}

/// Failed points have an empty second column.
pub fn write_curve_csv(t: &CurveTable) -> String {
    let mut out = String::new();
    writeln!(out, "# s_f0_n2_per_hz={}", fmt_f64(t.s_f0_n2_per_hz)).unwrap();
    writeln!(out, "# mass_model_id={}", t.mass_model_id).unwrap();
    writeln!(out, "{CURVE_HEADER}").unwrap();
    for (r, l) in &t.rows {
        writeln!(out, "{},{}", fmt_f64(*r), l.map(fmt_f64).unwrap_or_default()).unwrap();
    }
    out
}

pub fn read_curve_csv(text: &str) -> Result<CurveTable> {
    let (header, body) = split_header(text);
    expect_columns(&body, CURVE_HEADER)?;
    let find = |key: &str| header.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
    let s_f0 = find("s_f0_n2_per_hz").ok_or_else(|| Error::Parse("curve CSV lacks s_f0_n2_per_hz".into()))?;
    let rows = body[1..]
        .iter()
        .map(|&(n, line)| {
            let (r, l) = line.split_once(',').ok_or_else(|| Error::Parse(format!("line {n}: expected 2 columns")))?;
            let lambda = if l.trim().is_empty() { None } else { Some(parse_f64(l, n)?) };
            Ok((parse_f64(r, n)?, lambda))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveTable { s_f0_n2_per_hz: parse_f64(&s_f0, 0)?, mass_model_id: find("mass_model_id").unwrap_or_default(), rows })
}

/// Q-vs-gain table: inverse loop gain magnitude, measured `1/Q_a` and its error.
pub fn write_gain_csv(points: &[GainPoint]) -> String {
    let mut out = String::new();
    writeln!(out, "{GAIN_HEADER}").unwrap();
    for p in points {
        writeln!(out, "{},{},{}", fmt_f64(p.inv_gain), fmt_f64(p.inv_qa), fmt_f64(p.sigma)).unwrap();
    }
    out
}

pub fn read_gain_csv(text: &str) -> Result<Vec<GainPoint>> {
    let (_, body) = split_header(text);
    expect_columns(&body, GAIN_HEADER)?;
    body[1..]
        .iter()
        .map(|&(n, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("line {n}: expected 3 columns, found {}", cols.len())));
            }
            Ok(GainPoint { inv_gain: parse_f64(cols[0], n)?, inv_qa: parse_f64(cols[1], n)?, sigma: parse_f64(cols[2], n)? })
        })
        .collect()
}

/// Ringdown waveform as `(t, value)` rows with sampling metadata.
pub fn write_waveform_csv(rec: &RingdownRecord, seed: u64, params_hash: &str) -> String {
    let mut out = String::with_capacity(rec.waveform.len() * 28);
    writeln!(out, "# fs_hz={}", fmt_f64(rec.fs)).unwrap();
    writeln!(out, "# gain={}", fmt_f64(rec.gain)).unwrap();
    writeln!(out, "# qa_true={}", fmt_f64(rec.qa_true)).unwrap();
    writeln!(out, "# seed={seed}").unwrap();
    writeln!(out, "# params_sha256={params_hash}").unwrap();
    writeln!(out, "{WAVEFORM_HEADER}").unwrap();
    for (i, v) in rec.waveform.iter().enumerate() {
        writeln!(out, "{},{}", fmt_f64(i as f64 / rec.fs), fmt_f64(*v)).unwrap();
    }
    out
}

pub fn read_waveform_csv(text: &str) -> Result<RingdownRecord> {
    let (header, body) = split_header(text);
    expect_columns(&body, WAVEFORM_HEADER)?;
    let get = |key: &str| -> Result<f64> {
        let v = header
            .iter()
            .find(|(k, _)| k == key)
            .ok_or_else(|| Error::Parse(format!("waveform CSV lacks '{key}'")))?;
        parse_f64(&v.1, 0)
    };
    let waveform = body[1..]
        .iter()
        .map(|&(n, line)| {
            let (_, v) = line.split_once(',').ok_or_else(|| Error::Parse(format!("line {n}: expected 2 columns")))?;
            parse_f64(v, n)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RingdownRecord { gain: get("gain")?, qa_true: get("qa_true")?, fs: get("fs_hz")?, waveform })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [1.87e-36, 0.1, 8174.0, 1.0 / 3.0, -2.5e20, 6.02214076e23, 1e-4, 5e-5, 0.0, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn spectrum_round_trip_is_byte_exact() {
        let f: Vec<f64> = (0..50).map(|i| 8100.0 + i as f64 * 1.52587890625).collect();
        let psd: Vec<f64> = (0..50).map(|i| 1.3e-13 * (1.0 + (i as f64).sin().abs())).collect();
        let mut s = Spectrum::averaged(f, psd, 120, Unit::Phi0SqPerHz).unwrap().with_meta("temperature_k", 0.043);
        s.excluded[3] = true;
        let a = write_spectrum_csv(&s).unwrap();
        let back = read_spectrum_csv(&a).unwrap();
        assert_eq!(back, s);
        assert_eq!(write_spectrum_csv(&back).unwrap(), a);
    }

    #[test]
    fn spectrum_reader_rejects_missing_unit() {
        let text = "# n_av=1\nf_hz,psd,rel_err\n1,1,1\n2,1,1\n";
        assert!(matches!(read_spectrum_csv(text), Err(Error::Parse(_))));
    }

    #[test]
    fn curve_round_trip_keeps_failed_points() {
        let t = CurveTable {
            s_f0_n2_per_hz: 1.87e-36,
            mass_model_id: "abc123".into(),
            rows: vec![(1e-8, Some(3.2e-7)), (1e-7, None), (1e-6, Some(1.1e-8))],
        };
        let a = write_curve_csv(&t);
        assert_eq!(read_curve_csv(&a).unwrap(), t);
    }

    #[test]
    fn gain_round_trip() {
        let pts = vec![
            GainPoint { inv_gain: 1.0 / 4000.0, inv_qa: 5.2e-6, sigma: 1.1e-8 },
            GainPoint { inv_gain: 1.0 / 1333.3, inv_qa: 1.5e-5, sigma: 3e-8 },
        ];
        let a = write_gain_csv(&pts);
        assert_eq!(write_gain_csv(&read_gain_csv(&a).unwrap()), a);
    }

    #[test]
    fn waveform_round_trip() {
        let rec = RingdownRecord { gain: 2000.0, qa_true: 48000.0, fs: 20e3, waveform: vec![1.0, -0.5, 0.25e-3] };
        let a = write_waveform_csv(&rec, 7, "abc");
        let back = read_waveform_csv(&a).unwrap();
        assert_eq!(back, rec);
        assert_eq!(write_waveform_csv(&back, 7, "abc"), a);
    }
}
