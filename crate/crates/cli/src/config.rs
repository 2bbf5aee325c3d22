//! Plain-text configuration: one `key = value` per line, `#` comments, plus
//! the named-curve file format `curve <name>; kind circle|ellipse|fourier;
//! params ...`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use heatbem::geometry::{BoundaryCurve, FourierDisplacement, FourierSeries, ShapeMap};
use heatbem::grid::SpaceTimeGrid;
use heatbem::nonlinear_solver::{NewtonOptions, RobinNonlinearity, RobinTerm, SpaceCoeff, TimeCoeff};

/// Parsed key-value configuration with provenance for error messages.
#[derive(Debug, Clone)]
pub struct Config {
    /// Multi-valued keys in file order.
    entries: Vec<(String, String, usize)>,
    source: String,
}

impl Config {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{source}:{}: expected 'key = value'", lineno + 1))?;
            entries.push((key.trim().to_string(), value.trim().to_string(), lineno + 1));
        }
        Ok(Self { entries, source: source.to_string() })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }

    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
            .collect()
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, _, l)| *l)
            .unwrap_or(0)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                anyhow!("{}:{}: '{key}' is not a number: '{v}'", self.source, self.line_of(key))
            }),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                anyhow!("{}:{}: '{key}' is not an integer: '{v}'", self.source, self.line_of(key))
            }),
        }
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        let t = self.f64_or("grid.T", 0.5)?;
        let n_t = self.usize_or("grid.nt", 32)?;
        let m_outer = self.usize_or("grid.m_outer", 32)?;
        let m_inner = self.usize_or("grid.m_inner", 32)?;
        SpaceTimeGrid::new(t, n_t, m_outer, m_inner)
            .map_err(|e| anyhow!("{}: invalid grid: {e}", self.source))
    }

    /// Resolve the outer curve and inner shape map from inline specs or a
    /// named-curve file.
    pub fn geometry(&self, base_dir: &Path) -> Result<(BoundaryCurve, ShapeMap)> {
        let curves = match self.get("curves") {
            Some(rel) => {
                let path = base_dir.join(rel);
                parse_curve_file(
                    &std::fs::read_to_string(&path)
                        .with_context(|| format!("cannot read curve file {}", path.display()))?,
                    &path.display().to_string(),
                )?
            }
            None => HashMap::new(),
        };
        let resolve = |spec: &str, key: &str| -> Result<BoundaryCurve> {
            if let Some(name) = spec.strip_prefix("name:") {
                return curves
                    .get(name.trim())
                    .cloned()
                    .ok_or_else(|| anyhow!("{}: unknown curve name '{name}' for '{key}'", self.source));
            }
            parse_curve_spec(spec)
                .map_err(|e| anyhow!("{}:{}: bad '{key}': {e}", self.source, self.line_of(key)))
        };
        let outer = resolve(self.get("outer").unwrap_or("circle 0 0 2.0"), "outer")?;
        let inner = resolve(self.get("inner").unwrap_or("circle 0 0 0.8"), "inner")?;

        let displacement = match self.get("shape") {
            None | Some("identity") => FourierDisplacement::zero(),
            Some(spec) => {
                let toks: Vec<&str> = spec.split_whitespace().collect();
                let inner_radius = match &inner {
                    BoundaryCurve::Circle { radius, .. } => *radius,
                    _ => bail!(
                        "{}:{}: shape perturbations are defined for circular reference holes",
                        self.source,
                        self.line_of("shape")
                    ),
                };
                match toks.as_slice() {
                    ["scale", c] => {
                        let c: f64 = c.parse().context("shape scale factor")?;
                        FourierDisplacement::circle_scaling(inner_radius, c)
                    }
                    ["bump", amp, mode] => {
                        let amp: f64 = amp.parse().context("bump amplitude")?;
                        let mode: usize = mode.parse().context("bump mode")?;
                        FourierDisplacement::circle_radial_bump(amp, mode)
                    }
                    ["translate", dx, dy] => FourierDisplacement::translation([
                        dx.parse().context("translate dx")?,
                        dy.parse().context("translate dy")?,
                    ]),
                    _ => bail!(
                        "{}:{}: unknown shape spec '{spec}' (want identity | scale c | bump amp mode | translate dx dy)",
                        self.source,
                        self.line_of("shape")
                    ),
                }
            }
        };
        Ok((outer, ShapeMap::new(inner, displacement)))
    }

    /// Neumann datum `f(t, theta) = amp t^tpow (1 + c1 cos + s1 sin)`.
    pub fn neumann(&self) -> Result<impl Fn(f64, f64) -> f64 + Clone> {
        let amp = self.f64_or("f.amp", 1.0)?;
        let tpow = self.f64_or("f.tpow", 1.0)?;
        let c1 = self.f64_or("f.cos1", 0.5)?;
        let s1 = self.f64_or("f.sin1", 0.0)?;
        Ok(move |t: f64, theta: f64| amp * t.powf(tpow) * (1.0 + c1 * theta.cos() + s1 * theta.sin()))
    }

    /// Robin nonlinearity from repeated `g.term = <power> <time...> <space...>`
    /// lines; defaults to the quadratic benchmark when absent.
    pub fn nonlinearity(&self) -> Result<RobinNonlinearity> {
        let specs = self.get_all("g.term");
        if specs.is_empty() {
            return Ok(RobinNonlinearity::quadratic_benchmark());
        }
        let mut terms = Vec::new();
        for spec in specs {
            terms.push(parse_robin_term(spec).map_err(|e| {
                anyhow!("{}: bad g.term '{spec}': {e}", self.source)
            })?);
        }
        RobinNonlinearity::new(terms)
            .map_err(|e| anyhow!("{}: invalid nonlinearity: {e}", self.source))
    }

    pub fn newton_options(&self) -> Result<NewtonOptions> {
        Ok(NewtonOptions {
            tol_newton: self.f64_or("newton.tol", 1e-10)?,
            max_iter: self.usize_or("newton.max_iter", 25)?,
        })
    }

    pub fn gamma(&self) -> Result<f64> {
        self.f64_or("gamma", 1.0)
    }
}

fn parse_robin_term(spec: &str) -> Result<RobinTerm> {
    let toks: Vec<&str> = spec.split_whitespace().collect();
    if toks.len() < 3 {
        bail!("want '<power> <time spec> <space spec>'");
    }
    let power: u32 = toks[0].parse().context("term power")?;
    let mut rest = &toks[1..];
    let time = match rest[0] {
        "const" => {
            let c = rest.get(1).ok_or_else(|| anyhow!("const needs a value"))?.parse()?;
            rest = &rest[2..];
            TimeCoeff::Constant(c)
        }
        "ramp" => {
            let c = rest.get(1).ok_or_else(|| anyhow!("ramp needs a value"))?.parse()?;
            rest = &rest[2..];
            TimeCoeff::Ramp(c)
        }
        "poly" => {
            let mut cs = Vec::new();
            let mut i = 1;
            while i < rest.len() {
                match rest[i].parse::<f64>() {
                    Ok(v) => {
                        cs.push(v);
                        i += 1;
                    }
                    Err(_) => break,
                }
            }
            if cs.is_empty() {
                bail!("poly needs at least one coefficient");
            }
            rest = &rest[i..];
            TimeCoeff::Poly(cs)
        }
        other => bail!("unknown time coefficient '{other}'"),
    };
    let space = match rest.first() {
        Some(&"const") => SpaceCoeff::Constant(
            rest.get(1).ok_or_else(|| anyhow!("const needs a value"))?.parse()?,
        ),
        Some(&"bump") => {
            if rest.len() < 6 {
                bail!("bump needs cx cy width amp offset");
            }
            SpaceCoeff::GaussBump {
                center: [rest[1].parse()?, rest[2].parse()?],
                width: rest[3].parse()?,
                amplitude: rest[4].parse()?,
                offset: rest[5].parse()?,
            }
        }
        Some(other) => bail!("unknown space coefficient '{other}'"),
        None => bail!("missing space coefficient"),
    };
    Ok(RobinTerm { power, time, space })
}

/// Inline curve spec: `circle cx cy r`, `ellipse cx cy a b`, or
/// `fourier cx cy r0 a1 b1 a2 b2 ...`.
pub fn parse_curve_spec(spec: &str) -> Result<BoundaryCurve> {
    let toks: Vec<&str> = spec.split_whitespace().collect();
    let nums: Result<Vec<f64>> = toks[1..]
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| anyhow!("bad number '{t}'")))
        .collect();
    let nums = nums?;
    match toks.first() {
        Some(&"circle") if nums.len() == 3 => {
            Ok(BoundaryCurve::circle([nums[0], nums[1]], nums[2]))
        }
        Some(&"ellipse") if nums.len() == 4 => {
            Ok(BoundaryCurve::ellipse([nums[0], nums[1]], nums[2], nums[3]))
        }
        Some(&"fourier") if nums.len() >= 3 && nums.len() % 2 == 1 => {
            let mut cos = Vec::new();
            let mut sin = Vec::new();
            for pair in nums[3..].chunks(2) {
                cos.push(pair[0]);
                sin.push(pair[1]);
            }
            Ok(BoundaryCurve::radial_fourier(
                [nums[0], nums[1]],
                FourierSeries { a0: nums[2], cos, sin },
            ))
        }
        _ => bail!("want 'circle cx cy r', 'ellipse cx cy a b', or 'fourier cx cy r0 a1 b1 ...'"),
    }
}

/// Named-curve file: records `curve <name>; kind <kind>; params <numbers...>`.
pub fn parse_curve_file(text: &str, source: &str) -> Result<HashMap<String, BoundaryCurve>> {
    let mut out = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut name = None;
        let mut kind = None;
        let mut params = None;
        for field in line.split(';') {
            let field = field.trim();
            if let Some(v) = field.strip_prefix("curve ") {
                name = Some(v.trim().to_string());
            } else if let Some(v) = field.strip_prefix("kind ") {
                kind = Some(v.trim().to_string());
            } else if let Some(v) = field.strip_prefix("params ") {
                params = Some(v.trim().to_string());
            } else {
                bail!("{source}:{}: unknown field '{field}'", lineno + 1);
            }
        }
        let (name, kind, params) = match (name, kind, params) {
            (Some(n), Some(k), Some(p)) => (n, k, p),
            _ => bail!("{source}:{}: record needs 'curve', 'kind', and 'params'", lineno + 1),
        };
        let curve = parse_curve_spec(&format!("{kind} {params}"))
            .map_err(|e| anyhow!("{source}:{}: {e}", lineno + 1))?;
        out.insert(name, curve);
    }
    Ok(out)
}

/// Root directory to resolve relative paths in a config against.
pub fn base_dir_of(config_path: Option<&PathBuf>) -> PathBuf {
    config_path
        .and_then(|p| p.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."))
}
