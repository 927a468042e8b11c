//! Flat run configuration: `[section]` headers followed by `key = value`
//! lines. `#` starts a comment. Keys may repeat where a list is expected
//! (Fourier terms); scalar getters reject repeats. Entry order is kept, so
//! `parse(to_text(c)) == c`.
//!
//! Material weights are selected in `[weight]`:
//!
//! ```text
//! [weight]
//! kind = fourier            # example | identity | fourier
//! a = 0 0  10 0  0 0  0 0  10 0      # m1 m2, then re/im of A11 A12 A21 A22
//! scalar = 0 0  1 0                  # m1 m2 re im
//! ```
//!
//! and perturbations in `[perturbation]` with `kind = example | zero | h`.

use std::path::Path;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::material::{eval_h, MaterialWeight, PerturbationWeight};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: Vec<Entry>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut entries = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", no + 1)))?
                    .trim();
                if !valid_name(name) {
                    return Err(Error::Config(format!("line {}: bad section name '{name}'", no + 1)));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !valid_name(k) {
                return Err(Error::Config(format!("line {}: bad key '{k}'", no + 1)));
            }
            if v.is_empty() {
                return Err(Error::Config(format!("line {}: key '{k}' has no value", no + 1)));
            }
            entries.push(Entry {
                section: section.clone(),
                key: k.to_string(),
                value: v.to_string(),
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        // Sectionless entries can only be written before the first header.
        let mut out = String::new();
        let mut current: Option<&str> = None;
        let top = self.entries.iter().filter(|e| e.section.is_empty());
        let rest = self.entries.iter().filter(|e| !e.section.is_empty());
        for e in top.chain(rest) {
            if current != Some(e.section.as_str()) {
                if !e.section.is_empty() || current.is_some() {
                    if !out.is_empty() {
                        out.push('\n');
                    }
                    out.push_str(&format!("[{}]\n", e.section));
                }
                current = Some(&e.section);
            }
            out.push_str(&format!("{} = {}\n", e.key, e.value));
        }
        out
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn sections(&self) -> Vec<&str> {
        let mut s: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !s.contains(&e.section.as_str()) {
                s.push(&e.section);
            }
        }
        s
    }

    /// Replaces the single value of `key` or appends it.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        let value = value.into();
        self.entries.retain(|e| !(e.section == section && e.key == key));
        let entry = Entry {
            section: section.to_string(),
            key: key.to_string(),
            value,
        };
        if section.is_empty() {
            let at = self.entries.iter().take_while(|e| e.section.is_empty()).count();
            self.entries.insert(at, entry);
        } else {
            self.entries.push(entry);
        }
    }

    pub fn get_all(&self, section: &str, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.section == section && e.key == key)
            .map(|e| e.value.as_str())
            .collect()
    }

    pub fn get(&self, section: &str, key: &str) -> Result<Option<&str>> {
        match self.get_all(section, key).as_slice() {
            [] => Ok(None),
            [v] => Ok(Some(v)),
            _ => Err(Error::Config(format!("[{section}] {key} is given more than once"))),
        }
    }

    pub fn string(&self, section: &str, key: &str, default: &str) -> Result<String> {
        Ok(self.get(section, key)?.unwrap_or(default).to_string())
    }

    pub fn f64_in(&self, section: &str, key: &str, default: f64, lo: f64, hi: f64) -> Result<f64> {
        let v = match self.get(section, key)? {
            None => default,
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("[{section}] {key} = '{s}' is not a number")))?,
        };
        if !(v >= lo && v <= hi) {
            return Err(Error::Config(format!("[{section}] {key} = {v} is outside [{lo}, {hi}]")));
        }
        Ok(v)
    }

    pub fn usize_in(&self, section: &str, key: &str, default: usize, lo: usize, hi: usize) -> Result<usize> {
        let v = match self.get(section, key)? {
            None => default,
            Some(s) => s
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("[{section}] {key} = '{s}' is not a non-negative integer")))?,
        };
        if v < lo || v > hi {
            return Err(Error::Config(format!("[{section}] {key} = {v} is outside [{lo}, {hi}]")));
        }
        Ok(v)
    }

    pub fn bool(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(section, key)? {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(s) => Err(Error::Config(format!("[{section}] {key} = '{s}' is not true/false"))),
        }
    }

    /// Comma-separated list with every entry in `[lo, hi]`; an absent key
    /// gives `default`, which may be empty.
    pub fn f64_list(&self, section: &str, key: &str, default: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
        let v: Vec<f64> = match self.get(section, key)? {
            None => default.to_vec(),
            Some(s) => s
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("[{section}] {key}: '{}' is not a number", t.trim())))
                })
                .collect::<Result<_>>()?,
        };
        if let Some(x) = v.iter().find(|x| !(**x >= lo && **x <= hi)) {
            return Err(Error::Config(format!("[{section}] {key} entry {x} is outside [{lo}, {hi}]")));
        }
        Ok(v)
    }

    /// Rejects keys of `section` that are not listed.
    pub fn check_keys(&self, section: &str, known: &[&str]) -> Result<()> {
        for e in self.entries.iter().filter(|e| e.section == section) {
            if !known.contains(&e.key.as_str()) {
                return Err(Error::Config(format!(
                    "unknown key '{}' in [{section}] (known: {})",
                    e.key,
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Example,
    Identity,
    Fourier {
        a_terms: Vec<([i32; 2], Matrix2<C64>)>,
        scalar_terms: Vec<([i32; 2], C64)>,
    },
}

fn numbers(section: &str, key: &str, s: &str, count: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("[{section}] {key} = '{s}' has a non-numeric field")))?;
    if v.len() != count || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("[{section}] {key} = '{s}' needs {count} finite numbers")));
    }
    Ok(v)
}

fn index(section: &str, key: &str, a: f64, b: f64) -> Result<[i32; 2]> {
    if a.fract() != 0.0 || b.fract() != 0.0 || a.abs() > 64.0 || b.abs() > 64.0 {
        return Err(Error::Config(format!("[{section}] {key}: index ({a}, {b}) must be small integers")));
    }
    Ok([a as i32, b as i32])
}

impl WeightSpec {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_keys("weight", &["kind", "a", "scalar"])?;
        match cfg.string("weight", "kind", "example")?.as_str() {
            "example" => Ok(WeightSpec::Example),
            "identity" => Ok(WeightSpec::Identity),
            "fourier" => {
                let mut a_terms = Vec::new();
                for s in cfg.get_all("weight", "a") {
                    let v = numbers("weight", "a", s, 10)?;
                    let c = |k: usize| C64::new(v[2 + 2 * k], v[3 + 2 * k]);
                    a_terms.push((index("weight", "a", v[0], v[1])?, Matrix2::new(c(0), c(1), c(2), c(3))));
                }
                let mut scalar_terms = Vec::new();
                for s in cfg.get_all("weight", "scalar") {
                    let v = numbers("weight", "scalar", s, 4)?;
                    scalar_terms.push((index("weight", "scalar", v[0], v[1])?, C64::new(v[2], v[3])));
                }
                if a_terms.is_empty() || scalar_terms.is_empty() {
                    return Err(Error::Config("[weight] fourier needs at least one 'a' and one 'scalar' term".into()));
                }
                Ok(WeightSpec::Fourier { a_terms, scalar_terms })
            }
            other => Err(Error::Config(format!("[weight] kind = '{other}' (expected example, identity or fourier)"))),
        }
    }

    pub fn build(&self) -> Result<MaterialWeight> {
        match self {
            WeightSpec::Example => Ok(MaterialWeight::example()),
            WeightSpec::Identity => Ok(MaterialWeight::identity()),
            WeightSpec::Fourier { a_terms, scalar_terms } => {
                MaterialWeight::from_fourier_series(a_terms.clone(), scalar_terms.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationSpec {
    Example,
    Zero,
    /// `h(x) I₃`.
    H,
}

impl PerturbationSpec {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_keys("perturbation", &["kind"])?;
        match cfg.string("perturbation", "kind", "example")?.as_str() {
            "example" => Ok(PerturbationSpec::Example),
            "zero" => Ok(PerturbationSpec::Zero),
            "h" => Ok(PerturbationSpec::H),
            other => Err(Error::Config(format!(
                "[perturbation] kind = '{other}' (expected example, zero or h)"
            ))),
        }
    }

    pub fn build(&self) -> PerturbationWeight {
        match self {
            PerturbationSpec::Example => PerturbationWeight::example(),
            PerturbationSpec::Zero => PerturbationWeight::zero(),
            PerturbationSpec::H => PerturbationWeight::scalar(eval_h).expect("h I is Hermitian"),
        }
    }
}
