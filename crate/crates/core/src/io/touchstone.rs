//! Version-1 Touchstone (`.s2p`) writer and reader.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One frequency point of a two-port, `s[to][from]` with ports numbered
/// from zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPortPoint {
    pub f_hz: f64,
    pub s: [[Complex64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Touchstone {
    pub z_ref: f64,
    pub points: Vec<TwoPortPoint>,
    pub comments: Vec<String>,
}

/// Renders `points` as S-parameters in real/imaginary form, frequency in
/// Hz. Each comment becomes a `!` line ahead of the option line.
pub fn write_touchstone(points: &[TwoPortPoint], z_ref: f64, comments: &[String]) -> Result<String> {
    if points.is_empty() {
        return Err(Error::Precondition("touchstone: empty series".into()));
    }
    if points.windows(2).any(|w| !(w[1].f_hz > w[0].f_hz)) {
        return Err(Error::Precondition("touchstone: frequencies not strictly ascending".into()));
    }
    let finite = |c: &Complex64| c.re.is_finite() && c.im.is_finite();
    if !(z_ref > 0.0 && z_ref.is_finite())
        || points.iter().any(|p| !(p.f_hz >= 0.0 && p.f_hz.is_finite()) || !p.s.iter().flatten().all(finite))
    {
        return Err(Error::Precondition("touchstone: non-finite value".into()));
    }
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            out.push_str(&format!("! {line}\n"));
        }
    }
    out.push_str(&format!("# Hz S RI R {z_ref}\n"));
    for p in points {
        // Two-port data order is S11 S21 S12 S22.
        let order = [p.s[0][0], p.s[1][0], p.s[0][1], p.s[1][1]];
        out.push_str(&p.f_hz.to_string());
        for c in order {
            out.push_str(&format!(" {} {}", c.re, c.im));
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum Format {
    Ri,
    Ma,
    Db,
}

/// Parses a two-port version-1 Touchstone document. Accepts any frequency
/// unit, the RI/MA/DB formats and data wrapped across lines; only
/// S-parameters are supported.
pub fn parse_touchstone(text: &str, origin: &std::path::Path) -> Result<Touchstone> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        column: 0,
        message: msg,
    };
    let mut scale = 1e9;
    let mut format = Format::Ma;
    let mut z_ref = 50.0;
    let mut seen_option = false;
    let mut comments = Vec::new();
    let mut values: Vec<(usize, f64)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let (body, comment) = match raw.find('!') {
            Some(k) => (&raw[..k], Some(raw[k + 1..].trim())),
            None => (raw, None),
        };
        if let Some(c) = comment {
            comments.push(c.to_string());
        }
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        if let Some(opts) = body.strip_prefix('#') {
            if seen_option {
                continue; // later option lines are ignored
            }
            if !values.is_empty() {
                return Err(err(lineno, "option line after data".into()));
            }
            seen_option = true;
            let toks: Vec<String> = opts.split_whitespace().map(str::to_ascii_uppercase).collect();
            let mut k = 0;
            while k < toks.len() {
                match toks[k].as_str() {
                    "HZ" => scale = 1.0,
                    "KHZ" => scale = 1e3,
                    "MHZ" => scale = 1e6,
                    "GHZ" => scale = 1e9,
                    "S" => {}
                    "Y" | "Z" | "G" | "H" => {
                        return Err(err(lineno, format!("parameter type {} not supported", toks[k])))
                    }
                    "RI" => format = Format::Ri,
                    "MA" => format = Format::Ma,
                    "DB" => format = Format::Db,
                    "R" => {
                        k += 1;
                        z_ref = toks
                            .get(k)
                            .and_then(|t| t.parse().ok())
                            .filter(|r: &f64| *r > 0.0)
                            .ok_or_else(|| err(lineno, "R needs a positive reference impedance".into()))?;
                    }
                    other => return Err(err(lineno, format!("unknown option `{other}`"))),
                }
                k += 1;
            }
            continue;
        }
        if !seen_option {
            return Err(err(lineno, "data before option line".into()));
        }
        for tok in body.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| err(lineno, format!("not a number: `{tok}`")))?;
            values.push((lineno, v));
        }
    }
    if !seen_option {
        return Err(err(1, "missing option line".into()));
    }
    if values.is_empty() {
        return Err(err(1, "no data".into()));
    }
    if values.len() % 9 != 0 {
        let line = values.last().map(|v| v.0).unwrap_or(1);
        return Err(err(line, format!("{} values do not form 9-value two-port records", values.len())));
    }
    let to_c = |a: f64, b: f64| match format {
        Format::Ri => Complex64::new(a, b),
        Format::Ma => Complex64::from_polar(a, b.to_radians()),
        Format::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    };
    let mut points: Vec<TwoPortPoint> = Vec::with_capacity(values.len() / 9);
    for rec in values.chunks(9) {
        let v: Vec<f64> = rec.iter().map(|x| x.1).collect();
        let f_hz = v[0] * scale;
        if let Some(prev) = points.last() {
            if !(f_hz > prev.f_hz) {
                return Err(err(rec[0].0, "frequencies must increase".into()));
            }
        }
        let s11 = to_c(v[1], v[2]);
        let s21 = to_c(v[3], v[4]);
        let s12 = to_c(v[5], v[6]);
        let s22 = to_c(v[7], v[8]);
        points.push(TwoPortPoint {
            f_hz,
            s: [[s11, s12], [s21, s22]],
        });
    }
    Ok(Touchstone {
        z_ref,
        points,
        comments,
    })
}
