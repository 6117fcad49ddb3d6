use serde::{Deserialize, Serialize};

use super::Interval;
use crate::error::{Error, Result};

/// Per-event efficiency (frequency weight) `ε(m, t)`, strictly positive on its
/// support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyMap {
    /// `ε ≡ value`.
    Constant { value: f64 },
    /// `c0 + c1 m + c2 t + c3 m t`; the `m t` term breaks factorisation.
    Bilinear { coeffs: [f64; 4] },
    /// Piecewise-constant table over `(m, t)` rectangles; `values[i][j]` is
    /// the cell `m_edges[i]..m_edges[i+1]` × `t_edges[j]..t_edges[j+1]`.
    Grid {
        m_edges: Vec<f64>,
        t_edges: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl Default for EfficiencyMap {
    fn default() -> Self {
        EfficiencyMap::Constant { value: 1.0 }
    }
}

fn locate(edges: &[f64], x: f64) -> Option<usize> {
    if x < edges[0] || x > *edges.last()? {
        return None;
    }
    Some(edges.partition_point(|e| *e <= x).clamp(1, edges.len() - 1) - 1)
}

impl EfficiencyMap {
    pub fn unity() -> Self {
        Self::default()
    }

    pub fn is_unity(&self) -> bool {
        matches!(self, EfficiencyMap::Constant { value } if *value == 1.0)
    }

    pub fn eval(&self, m: f64, t: f64) -> f64 {
        match self {
            EfficiencyMap::Constant { value } => *value,
            EfficiencyMap::Bilinear { coeffs: c } => c[0] + c[1] * m + c[2] * t + c[3] * m * t,
            EfficiencyMap::Grid {
                m_edges,
                t_edges,
                values,
            } => match (locate(m_edges, m), locate(t_edges, t)) {
                (Some(i), Some(j)) => values[i][j],
                _ => f64::NAN,
            },
        }
    }

    /// Checks strict positivity and `ε ≤ 1` over the `(m, t)` rectangle.
    pub fn validate(&self, m_range: Interval, t_range: Interval) -> Result<()> {
        let bad = |v: f64| !(v > 0.0) || v > 1.0 + 1e-12;
        match self {
            EfficiencyMap::Constant { value } => {
                if bad(*value) {
                    return Err(Error::input(format!("efficiency {value} outside (0, 1]")));
                }
            }
            EfficiencyMap::Bilinear { .. } => {
                // bilinear: extrema sit at the corners
                for m in [m_range.lo, m_range.hi] {
                    for t in [t_range.lo, t_range.hi] {
                        let v = self.eval(m, t);
                        if bad(v) {
                            return Err(Error::input(format!(
                                "efficiency {v} outside (0, 1] at corner ({m}, {t})"
                            )));
                        }
                    }
                }
            }
            EfficiencyMap::Grid {
                m_edges,
                t_edges,
                values,
            } => {
                if m_edges.len() < 2
                    || t_edges.len() < 2
                    || values.len() + 1 != m_edges.len()
                    || values.iter().any(|r| r.len() + 1 != t_edges.len())
                {
                    return Err(Error::input("efficiency grid shape mismatch"));
                }
                if values.iter().flatten().any(|v| bad(*v)) {
                    return Err(Error::input("efficiency grid values must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_lookup_and_validation() {
        let e = EfficiencyMap::Grid {
            m_edges: vec![0.0, 0.5, 1.0],
            t_edges: vec![0.0, 1.0],
            values: vec![vec![0.25], vec![0.75]],
        };
        assert_eq!(e.eval(0.2, 0.5), 0.25);
        assert_eq!(e.eval(1.0, 1.0), 0.75);
        assert!(e.eval(2.0, 0.5).is_nan());
        assert!(e.validate(Interval::unit(), Interval::unit()).is_ok());
        let bad = EfficiencyMap::Bilinear {
            coeffs: [0.5, -0.6, 0.0, 0.0],
        };
        assert!(bad.validate(Interval::unit(), Interval::unit()).is_err());
    }

    #[test]
    fn json_forms() {
        let e: EfficiencyMap = serde_json::from_str(r#"{"bilinear":{"coeffs":[0.5,0.3,0.1,-0.05]}}"#).unwrap();
        assert!((e.eval(1.0, 1.0) - 0.85).abs() < 1e-15);
        let c: EfficiencyMap = serde_json::from_str(r#"{"constant":{"value":1.0}}"#).unwrap();
        assert!(c.is_unity());
    }
}
