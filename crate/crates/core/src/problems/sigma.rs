//! Piecewise-constant conductivity fields made of axis-aligned boxes.
//!
//! Text form: `background[;lo:hi,lo:hi[,lo:hi]=value]*`, for example
//! `1;10:30,5:20=0.1;0:4,0:4=3` (later boxes win where they overlap).

use super::ProblemError;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaBox {
    /// `[lo, hi]` per coordinate, 2 or 3 entries.
    pub ranges: Vec<(f64, f64)>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaField {
    pub background: f64,
    pub boxes: Vec<SigmaBox>,
}

impl SigmaField {
    pub fn constant(value: f64) -> Self {
        Self {
            background: value,
            boxes: Vec::new(),
        }
    }

    /// Value at a point; closed boxes, last match wins.
    pub fn at(&self, x: &[f64]) -> f64 {
        self.boxes
            .iter()
            .rev()
            .find(|b| b.ranges.iter().zip(x).all(|(&(lo, hi), &v)| v >= lo && v <= hi))
            .map_or(self.background, |b| b.value)
    }

    pub fn is_positive(&self) -> bool {
        self.background > 0.0 && self.boxes.iter().all(|b| b.value > 0.0)
    }
}

impl fmt::Display for SigmaField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.background)?;
        for b in &self.boxes {
            let r: Vec<String> = b.ranges.iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect();
            write!(f, ";{}={}", r.join(","), b.value)?;
        }
        Ok(())
    }
}

impl FromStr for SigmaField {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |m: String| ProblemError::Sigma(m);
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(format!("'{t}' is not a number")));
        let mut parts = s.split(';');
        let background = num(parts.next().unwrap_or(""))?;
        let mut boxes = Vec::new();
        for part in parts.filter(|p| !p.trim().is_empty()) {
            let (geom, value) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("box '{part}' lacks '=value'")))?;
            let ranges = geom
                .split(',')
                .map(|r| {
                    let (lo, hi) = r.split_once(':').ok_or_else(|| bad(format!("range '{r}' must be lo:hi")))?;
                    Ok((num(lo)?, num(hi)?))
                })
                .collect::<Result<Vec<_>, ProblemError>>()?;
            if !(2..=3).contains(&ranges.len()) {
                return Err(bad(format!("box '{part}' needs 2 or 3 ranges")));
            }
            boxes.push(SigmaBox { ranges, value: num(value)? });
        }
        let field = SigmaField { background, boxes };
        if !field.is_positive() {
            return Err(bad("sigma values must be positive".into()));
        }
        Ok(field)
    }
}
