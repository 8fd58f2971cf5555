//! Parsing of signal and matrix sources given on the command line.

use std::path::Path;

use convreg_core::multichannel::MultiChannelMap;
use convreg_core::spectral::SignalVector;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CliError, Result};

/// A parsed `--w` argument. Patterns are kept separate so the patterned closed
/// form can be used.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSource {
    Explicit(SignalVector),
    Pattern { pattern: SignalVector, reps: usize },
}

impl SignalSource {
    pub fn signal(&self) -> SignalVector {
        match self {
            SignalSource::Explicit(w) => w.clone(),
            SignalSource::Pattern { pattern, reps } => {
                SignalVector::tiled(pattern.values(), *reps).expect("validated on parse")
            }
        }
    }
}

fn numbers(text: &str) -> Option<Vec<f64>> {
    let v: std::result::Result<Vec<f64>, _> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect();
    v.ok().filter(|v| !v.is_empty())
}

fn need_d(d: Option<usize>, what: &str) -> Result<usize> {
    match d {
        Some(d) if d > 0 => Ok(d),
        _ => Err(CliError::Input(format!("`{what}` needs --d"))),
    }
}

/// Random standard-normal vector of length `d` from ChaCha8 seeded with `seed`.
pub fn random_signal(d: usize, seed: u64) -> SignalVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SignalVector::new((0..d).map(|_| rng.sample(StandardNormal)).collect()).expect("d > 0")
}

/// Accepts `delta`, `ones`, `random:SEED`, `pattern:P1,P2,...xREPS`, an inline
/// list `1,0,-2`, or a path to a file of numbers.
pub fn parse_signal(spec: &str, d: Option<usize>) -> Result<SignalSource> {
    let spec = spec.trim();
    let w = match spec {
        "delta" => SignalVector::delta(need_d(d, spec)?),
        "ones" => SignalVector::ones(need_d(d, spec)?),
        _ if spec.starts_with("random:") => {
            let seed = spec["random:".len()..]
                .parse()
                .map_err(|_| CliError::Input(format!("bad seed in `{spec}`")))?;
            random_signal(need_d(d, spec)?, seed)
        }
        _ if spec.starts_with("pattern:") => {
            let body = &spec["pattern:".len()..];
            let (p, reps) = body
                .rsplit_once('x')
                .ok_or_else(|| CliError::Input(format!("`{spec}` should look like pattern:1,0x4")))?;
            let reps: usize = reps
                .parse()
                .map_err(|_| CliError::Input(format!("bad repetition count in `{spec}`")))?;
            let pattern = SignalVector::new(
                numbers(p).ok_or_else(|| CliError::Input(format!("bad pattern in `{spec}`")))?,
            )?;
            if reps == 0 {
                return Err(CliError::Input("repetition count must be positive".into()));
            }
            return check_len(SignalSource::Pattern { pattern, reps }, d);
        }
        _ => match numbers(spec) {
            Some(v) => SignalVector::new(v)?,
            None => {
                let text = std::fs::read_to_string(Path::new(spec))
                    .map_err(|e| CliError::io(spec, e))?;
                let v = numbers(&text)
                    .ok_or_else(|| CliError::Input(format!("{spec} does not contain a list of numbers")))?;
                SignalVector::new(v)?
            }
        },
    };
    check_len(SignalSource::Explicit(w), d)
}

fn check_len(s: SignalSource, d: Option<usize>) -> Result<SignalSource> {
    let n = s.signal().dim();
    match d {
        Some(d) if d != n => Err(CliError::Input(format!("signal has length {n}, --d is {d}"))),
        _ => Ok(s),
    }
}

/// Accepts `random:SEED:DxR` or a CSV file with `D` rows and `R` columns.
pub fn parse_matrix(spec: &str) -> Result<MultiChannelMap> {
    if let Some(rest) = spec.strip_prefix("random:") {
        let bad = || CliError::Input(format!("`{spec}` should look like random:SEED:DxR"));
        let (seed, shape) = rest.split_once(':').ok_or_else(bad)?;
        let (d, r) = shape.split_once('x').ok_or_else(bad)?;
        let seed: u64 = seed.parse().map_err(|_| bad())?;
        let (d, r): (usize, usize) = (d.parse().map_err(|_| bad())?, r.parse().map_err(|_| bad())?);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(d, r, |_, _| rng.sample(StandardNormal));
        return Ok(MultiChannelMap::new(m)?);
    }
    let text = std::fs::read_to_string(spec).map_err(|e| CliError::io(spec, e))?;
    parse_matrix_text(&text)
}

pub fn parse_matrix_text(text: &str) -> Result<MultiChannelMap> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| numbers(l).ok_or_else(|| CliError::Input(format!("malformed row `{l}`"))))
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(CliError::Input("matrix is empty".into()));
    }
    let r = rows[0].len();
    if rows.iter().any(|row| row.len() != r) {
        return Err(CliError::Input("rows have different lengths".into()));
    }
    let m = DMatrix::from_fn(rows.len(), r, |i, j| rows[i][j]);
    Ok(MultiChannelMap::new(m)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_sources() {
        assert_eq!(parse_signal("delta", Some(3)).unwrap().signal().values(), &[1.0, 0.0, 0.0]);
        assert_eq!(parse_signal("ones", Some(2)).unwrap().signal().values(), &[1.0, 1.0]);
        assert_eq!(parse_signal("1, 0,-2", None).unwrap().signal().values(), &[1.0, 0.0, -2.0]);
        let p = parse_signal("pattern:1,-1x3", Some(6)).unwrap();
        assert!(matches!(p, SignalSource::Pattern { reps: 3, .. }));
        assert_eq!(p.signal().values(), &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        let a = parse_signal("random:5", Some(4)).unwrap();
        assert_eq!(a, parse_signal("random:5", Some(4)).unwrap());
    }

    #[test]
    fn malformed_sources() {
        assert!(parse_signal("delta", None).is_err());
        assert!(parse_signal("1,0", Some(3)).is_err());
        assert!(parse_signal("pattern:1,0", Some(4)).is_err());
        assert!(parse_signal("pattern:1,0x0", None).is_err());
        assert!(parse_signal("random:x", Some(2)).is_err());
        assert!(matches!(parse_signal("/nonexistent/w.csv", None), Err(CliError::Io { .. })));
    }

    #[test]
    fn matrices() {
        let m = parse_matrix_text("1,2\n3,4\n\n5,6\n").unwrap();
        assert_eq!((m.d(), m.r()), (3, 2));
        assert!(parse_matrix_text("1,2\n3\n").is_err());
        assert!(parse_matrix_text("1,a\n").is_err());
        let r = parse_matrix("random:1:4x2").unwrap();
        assert_eq!((r.d(), r.r()), (4, 2));
        assert!(parse_matrix("random:1:4").is_err());
    }
}
