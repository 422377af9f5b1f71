//! Tracy-Widom (order one) distribution from a tabulated CDF.
//!
//! The table holds `F1(x)` on an equispaced grid over `[-10, 6]` with step
//! `0.01`, computed as the Fredholm determinant `det(I - A_x)` of the Airy
//! kernel `A_x(u, v) = Ai(u + v + x)` on `L2(0, inf)`
//! (`scripts/gen_tw1_table.py`). Between grid points the CDF is evaluated with
//! monotone piecewise cubic Hermite interpolation (Fritsch-Carlson slopes).

use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const EMBEDDED: &str = include_str!("../../data/tw1_cdf.txt");

/// Quantile lookup result. `saturated` is set when the requested level lies
/// outside the tabulated range and `x` was clamped to a grid endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwQuantile {
    pub x: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tw1Table {
    x0: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Tw1Table {
    /// The table shipped with the crate.
    pub fn embedded() -> &'static Tw1Table {
        static TABLE: OnceLock<Tw1Table> = OnceLock::new();
        TABLE.get_or_init(|| Tw1Table::parse(EMBEDDED).expect("embedded table is well formed"))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Tw1Table> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Table(format!("{}: {e}", path.as_ref().display())))?;
        Tw1Table::parse(&text)
    }

    /// Parses the text format: a header line
    /// `# tw1 cdf x0=<f64> step=<f64> count=<usize>` followed by one value per line.
    pub fn parse(text: &str) -> Result<Tw1Table> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Table("empty table".into()))?;
        let field = |name: &str| -> Result<&str> {
            header
                .split_whitespace()
                .find_map(|tok| tok.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| Error::Table(format!("header lacks '{name}'")))
        };
        let num = |name: &str| -> Result<f64> {
            field(name)?
                .parse::<f64>()
                .map_err(|e| Error::Table(format!("bad '{name}': {e}")))
        };
        let x0 = num("x0")?;
        let step = num("step")?;
        let count: usize = field("count")?
            .parse()
            .map_err(|e| Error::Table(format!("bad 'count': {e}")))?;
        if !(step > 0.0) || !x0.is_finite() || count < 2 {
            return Err(Error::Table("invalid grid description".into()));
        }
        let values = lines
            .filter(|l| !l.starts_with('#'))
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Error::Table(format!("bad value '{l}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != count {
            return Err(Error::Table(format!(
                "expected {count} values, found {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Table(format!("non-finite value {v}")));
        }
        let slopes = pchip_slopes(&values, step);
        Ok(Tw1Table {
            x0,
            step,
            values,
            slopes,
        })
    }

    /// Tabulated range `[x_min, x_max]`.
    pub fn range(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.step * (self.values.len() - 1) as f64)
    }

    pub fn grid_values(&self) -> &[f64] {
        &self.values
    }

    /// CDF at `x`; 0 below and 1 above the tabulated range.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.range();
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= lo {
            return if x == lo { self.values[0] } else { 0.0 };
        }
        if x >= hi {
            return if x == hi { *self.values.last().unwrap() } else { 1.0 };
        }
        let u = (x - self.x0) / self.step;
        let k = (u.floor() as usize).min(self.values.len() - 2);
        self.hermite(k, u - k as f64)
    }

    fn hermite(&self, k: usize, t: f64) -> f64 {
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[k]
            + h10 * self.step * self.slopes[k]
            + h01 * self.values[k + 1]
            + h11 * self.step * self.slopes[k + 1]
    }

    /// Quantile of level `q`, saturating at the grid ends.
    pub fn quantile(&self, q: f64) -> Result<TwQuantile> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile level must lie in (0, 1), got {q}"
            )));
        }
        let (lo, hi) = self.range();
        let last = self.values.len() - 1;
        if q < self.values[0] {
            return Ok(TwQuantile { x: lo, saturated: true });
        }
        if q > self.values[last] {
            return Ok(TwQuantile { x: hi, saturated: true });
        }
        // first grid index with value >= q
        let k = self.values.partition_point(|&v| v < q);
        if k == 0 {
            return Ok(TwQuantile { x: lo, saturated: false });
        }
        let (mut a, mut b) = (0.0_f64, 1.0_f64);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if self.hermite(k - 1, m) < q {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(TwQuantile {
            x: self.x0 + self.step * ((k - 1) as f64 + 0.5 * (a + b)),
            saturated: false,
        })
    }

    /// Sanity checks on the table contents. Returns a list of problems,
    /// empty when the table is usable.
    pub fn check(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            issues.push("values outside [0, 1]".to_string());
        }
        if let Some(k) = self.values.windows(2).position(|w| w[1] < w[0]) {
            issues.push(format!("not monotone at grid index {}", k + 1));
        }
        // Reference points of the distribution: median -1.2686, 0.95 quantile 0.9793.
        for (level, expected) in [(0.5, -1.2686), (0.95, 0.9793)] {
            match self.quantile(level) {
                Ok(q) if !q.saturated && (q.x - expected).abs() < 0.01 => {}
                Ok(q) => issues.push(format!(
                    "quantile({level}) = {} deviates from {expected}",
                    q.x
                )),
                Err(e) => issues.push(e.to_string()),
            }
        }
        issues
    }
}

fn pchip_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let delta: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut d = vec![0.0; n];
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        d[k] = if a * b <= 0.0 { 0.0 } else { 2.0 * a * b / (a + b) };
    }
    d
}

/// CDF of the order-one Tracy-Widom law from the embedded table.
pub fn tw1_cdf(x: f64) -> f64 {
    Tw1Table::embedded().cdf(x)
}

/// Quantile of the order-one Tracy-Widom law from the embedded table.
pub fn tw1_quantile(q: f64) -> Result<TwQuantile> {
    Tw1Table::embedded().quantile(q)
}
