//! Builtin scalar profiles used for `a(t)`, `f(r)`, `g(r)` and `h(t)`.
//!
//! Specs are written `name(arg, ...)`. Numeric arguments accept plain
//! decimals and multiples of pi (`pi`, `2pi`, `0.25*pi`, `pi/4`, `3*pi/4`).

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{config, HeliosError, Result};

/// A shareable real function of one variable.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    /// `c`
    Const(f64),
    /// `x^p`
    Power(f64),
    /// `sin(k x)`
    Sin(f64),
    /// Tent rising linearly from 0 at `r1` to `peak` at `r2`, back to 0 at `r3`.
    Hat { r1: f64, r2: f64, r3: f64, peak: f64 },
    /// `height` on `(r1, r2]`, 0 elsewhere.
    Box { r1: f64, r2: f64, height: f64 },
    /// Piecewise-linear interpolation through `(x, y)` knots, constant outside.
    Table { source: String, knots: Vec<(f64, f64)> },
}

impl FunctionSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FunctionSpec::Const(c) => *c,
            FunctionSpec::Power(p) => x.powf(*p),
            FunctionSpec::Sin(k) => (k * x).sin(),
            FunctionSpec::Hat { r1, r2, r3, peak } => {
                if x <= *r1 || x >= *r3 {
                    0.0
                } else if x <= *r2 {
                    peak * (x - r1) / (r2 - r1)
                } else {
                    peak * (r3 - x) / (r3 - r2)
                }
            }
            FunctionSpec::Box { r1, r2, height } => {
                if x > *r1 && x <= *r2 {
                    *height
                } else {
                    0.0
                }
            }
            FunctionSpec::Table { knots, .. } => interpolate(knots, x),
        }
    }

    pub fn to_fn(&self) -> ScalarFn {
        let spec = self.clone();
        Arc::new(move |x| spec.eval(x))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, FunctionSpec::Const(c) if *c == 0.0)
    }

    /// Parses `name(args)`; `table(file)` paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let text = text.trim();
        let open = text.find('(').ok_or_else(|| bad(text, "expected name(args)"))?;
        if !text.ends_with(')') {
            return Err(bad(text, "missing closing parenthesis"));
        }
        let name = text[..open].trim();
        let inner = &text[open + 1..text.len() - 1];
        if name == "table" {
            let file = inner.trim();
            if file.is_empty() {
                return Err(bad(text, "table needs a file name"));
            }
            let path = match base_dir {
                Some(dir) => dir.join(file),
                None => Path::new(file).to_path_buf(),
            };
            let knots = read_table(&path)?;
            return Ok(FunctionSpec::Table { source: file.to_string(), knots });
        }
        let args = inner
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(parse_number)
            .collect::<Result<Vec<f64>>>()?;
        let want = |n: &[usize]| -> Result<()> {
            if n.contains(&args.len()) {
                Ok(())
            } else {
                Err(bad(text, &format!("{name} takes {n:?} arguments, got {}", args.len())))
            }
        };
        match name {
            "const" => {
                want(&[1])?;
                Ok(FunctionSpec::Const(args[0]))
            }
            "power" => {
                want(&[1])?;
                Ok(FunctionSpec::Power(args[0]))
            }
            "sin" => {
                want(&[1])?;
                Ok(FunctionSpec::Sin(args[0]))
            }
            "hat" => {
                want(&[3, 4])?;
                let (r1, r2, r3) = (args[0], args[1], args[2]);
                if !(r1 < r2 && r2 < r3) {
                    return Err(bad(text, "hat needs r1 < r2 < r3"));
                }
                Ok(FunctionSpec::Hat { r1, r2, r3, peak: args.get(3).copied().unwrap_or(1.0) })
            }
            "box" => {
                want(&[2, 3])?;
                if args[0] >= args[1] {
                    return Err(bad(text, "box needs r1 < r2"));
                }
                Ok(FunctionSpec::Box { r1: args[0], r2: args[1], height: args.get(2).copied().unwrap_or(1.0) })
            }
            _ => Err(bad(text, &format!("unknown function '{name}'"))),
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Const(c) => write!(f, "const({c})"),
            FunctionSpec::Power(p) => write!(f, "power({p})"),
            FunctionSpec::Sin(k) => write!(f, "sin({k})"),
            FunctionSpec::Hat { r1, r2, r3, peak } => write!(f, "hat({r1},{r2},{r3},{peak})"),
            FunctionSpec::Box { r1, r2, height } => write!(f, "box({r1},{r2},{height})"),
            FunctionSpec::Table { source, .. } => write!(f, "table({source})"),
        }
    }
}

fn bad(text: &str, why: &str) -> HeliosError {
    HeliosError::Config(format!("bad function spec '{text}': {why}"))
}

/// Parses a real number, allowing `pi` factors: `2.5`, `pi`, `2pi`, `3*pi/4`.
pub fn parse_number(text: &str) -> Result<f64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let Some(pos) = t.find("pi") else {
        return config(format!("cannot parse number '{t}'"));
    };
    let head = t[..pos].trim().trim_end_matches('*').trim();
    let tail = t[pos + 2..].trim();
    let factor = if head.is_empty() {
        1.0
    } else if head == "-" {
        -1.0
    } else {
        head.parse::<f64>().map_err(|_| HeliosError::Config(format!("cannot parse number '{t}'")))?
    };
    let divisor = if tail.is_empty() {
        1.0
    } else if let Some(d) = tail.strip_prefix('/') {
        d.trim().parse::<f64>().map_err(|_| HeliosError::Config(format!("cannot parse number '{t}'")))?
    } else {
        return config(format!("cannot parse number '{t}'"));
    };
    Ok(factor * std::f64::consts::PI / divisor)
}

fn read_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HeliosError::Config(format!("cannot read table '{}': {e}", path.display())))?;
    let mut knots = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty());
        let (Some(x), Some(y)) = (parts.next(), parts.next()) else {
            return config(format!("{}:{}: expected two columns", path.display(), line_no + 1));
        };
        match (x.parse::<f64>(), y.parse::<f64>()) {
            (Ok(x), Ok(y)) => knots.push((x, y)),
            // tolerate a header row
            _ if knots.is_empty() => continue,
            _ => return config(format!("{}:{}: not a number", path.display(), line_no + 1)),
        }
    }
    if knots.len() < 2 {
        return config(format!("table '{}' needs at least two knots", path.display()));
    }
    if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
        return config(format!("table '{}' abscissae must be strictly increasing", path.display()));
    }
    Ok(knots)
}

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= x);
    let (x0, y0) = knots[i - 1];
    let (x1, y1) = knots[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn numbers_with_pi() {
        assert_eq!(parse_number("2.5").unwrap(), 2.5);
        assert_eq!(parse_number("pi").unwrap(), PI);
        assert_eq!(parse_number("2pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_number("3*pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_number(" pi/4 ").unwrap(), PI / 4.0);
        assert_eq!(parse_number("-pi").unwrap(), -PI);
        assert!(parse_number("pie").is_err());
        assert!(parse_number("x").is_err());
    }

    #[test]
    fn example_profiles() {
        let hat = FunctionSpec::parse("hat(pi/4, pi/2, 3*pi/4, pi)", None).unwrap();
        // 4r - pi on (pi/4, pi/2], 3pi - 4r on (pi/2, 3pi/4]
        for &r in &[0.1, 1.0, 1.4, 1.7, 2.2, 3.0] {
            let want = if r <= PI / 4.0 || r > 3.0 * PI / 4.0 {
                0.0
            } else if r <= PI / 2.0 {
                4.0 * r - PI
            } else {
                3.0 * PI - 4.0 * r
            };
            assert!((hat.eval(r) - want).abs() < 1e-12, "r = {r}");
        }
        let b = FunctionSpec::parse("box(pi/3, 2*pi/3)", None).unwrap();
        assert_eq!(b.eval(PI / 3.0), 0.0);
        assert_eq!(b.eval(1.5), 1.0);
        assert_eq!(b.eval(2.0 * PI / 3.0), 1.0);
        assert_eq!(b.eval(2.5), 0.0);
        assert_eq!(FunctionSpec::parse("power(2)", None).unwrap().eval(3.0), 9.0);
        assert_eq!(FunctionSpec::parse("sin(3)", None).unwrap().eval(0.5), 1.5f64.sin());
        assert!(FunctionSpec::parse("const(0)", None).unwrap().is_zero());
    }

    #[test]
    fn rejects_malformed_specs() {
        for s in ["sin", "sin(1", "cos(1)", "hat(1,2)", "hat(3,2,1)", "box(2,1)", "const()"] {
            assert!(FunctionSpec::parse(s, None).is_err(), "{s}");
        }
    }

    #[test]
    fn table_interpolates() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.csv"), "x,y\n0,0\n1,2\n3,2\n").unwrap();
        let t = FunctionSpec::parse("table(g.csv)", Some(dir.path())).unwrap();
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(2.0), 2.0);
        assert_eq!(t.eval(-1.0), 0.0);
        assert_eq!(t.eval(5.0), 2.0);
        assert_eq!(t.to_string(), "table(g.csv)");
    }
}
