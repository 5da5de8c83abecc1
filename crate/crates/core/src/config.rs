//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment. Complex lists are written as
//! `re,im;re,im;...` and polynomial coefficients run lowest degree first.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::{validate_shift, Point, PolySpec, ShiftSpec};

/// Every key any command reads.
pub const KNOWN_KEYS: &[&str] = &[
    "k", "nu", "a_re", "a_im", "coeffs", "seed", "threads",
    // iterate
    "point", "steps", "direction", "radius",
    // slice
    "slice_x", "slice_y", "box", "width", "height", "green_level", "horizon",
    // degenerate
    "a_list", "count", "burn_in", "lyapunov_n", "test_set_size",
    // certify and partition
    "rho1", "n_blocks", "lambda", "search", "per_label", "cover_eps", "cover_h", "cover_half", "cloud_size",
    // hyperbolic1d
    "tol", "eta", "starts", "sequences", "start_radius", "eta_max", "bisection_steps",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    pub shift: ShiftSpec,
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::InvalidParameter(format!("{key} = {value:?}: expected {what}"))
}

pub fn parse_complex(text: &str) -> Option<Complex64> {
    let (re, im) = text.split_once(',')?;
    Some(Complex64::new(re.trim().parse().ok()?, im.trim().parse().ok()?))
}

pub fn parse_complex_list(text: &str) -> Option<Vec<Complex64>> {
    text.split(';').map(parse_complex).collect()
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut values = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("line {}: expected key = value", no + 1)))?;
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidParameter(format!("line {}: unknown key {key:?}", no + 1)));
        }
        if values.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::InvalidParameter(format!("line {}: duplicate key {key:?}", no + 1)));
        }
    }
    Ok(values)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_values(parse_pairs(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_values(values: BTreeMap<String, String>) -> Result<Self> {
        let get = |key: &str| {
            values
                .get(key)
                .ok_or_else(|| Error::InvalidParameter(format!("missing key {key:?}")))
        };
        let k: usize = get("k")?.parse().map_err(|_| bad("k", get("k").unwrap(), "an integer"))?;
        let nu: usize = get("nu")?.parse().map_err(|_| bad("nu", get("nu").unwrap(), "an integer"))?;
        let coeffs_text = get("coeffs")?;
        let coeffs = parse_complex_list(coeffs_text).ok_or_else(|| bad("coeffs", coeffs_text, "re,im;re,im;..."))?;
        let num = |key: &str| -> Result<f64> {
            match values.get(key) {
                None => Ok(0.0),
                Some(v) => v.parse().map_err(|_| bad(key, v, "a number")),
            }
        };
        let a = Complex64::new(num("a_re")?, num("a_im")?);
        let shift = ShiftSpec::new(k, nu, a, PolySpec::new(coeffs))?;
        validate_shift(&shift, false)?;
        Ok(Self { values, shift })
    }

    /// Overrides a value, as the command line does for `seed` and `threads`.
    pub fn set(&mut self, key: &str, value: String) -> Result<()> {
        let mut values = self.values.clone();
        values.insert(key.to_string(), value);
        *self = Self::from_values(values)?;
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn typed<T: std::str::FromStr>(&self, key: &str, default: T, what: &str) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| bad(key, v, what)),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.typed(key, default, "a non-negative integer")
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        self.typed(key, default, "a non-negative integer")
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.typed(key, default, "a number")?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad(key, &v.to_string(), "a finite number"))
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        self.typed(key, default, "true or false")
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|x| x.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad(key, v, "comma-separated numbers")),
        }
    }

    /// A point of `C^k`; defaults to the origin.
    pub fn point_or_origin(&self, key: &str) -> Result<Point> {
        let k = self.shift.k;
        match self.values.get(key) {
            None => Ok(Point::zeros(k)),
            Some(v) => {
                let coords = parse_complex_list(v).ok_or_else(|| bad(key, v, "re,im;re,im;..."))?;
                let z = Point(coords);
                self.shift.check_point(&z)?;
                Ok(z)
            }
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64_or("seed", 0)
    }

    pub fn threads(&self) -> Result<usize> {
        self.usize_or("threads", 0)
    }
}
