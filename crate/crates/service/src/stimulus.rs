//! Dot-count stimuli.

use std::collections::HashMap;

use pbalign::rng::stream;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// Closest two dots may be, in unit-square coordinates.
pub const MIN_SEPARATION: f64 = 0.008;
/// Largest count accepted; random packing at this separation jams at
/// roughly twice this many dots.
pub const MAX_DOTS: u32 = 5000;
const MAX_REDRAWS: u32 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DotStimulus {
    pub points: Vec<[f64; 2]>,
    pub render_seed: u64,
}

impl DotStimulus {
    pub fn count(&self) -> usize {
        self.points.len()
    }
}

/// `count` dots uniform in the unit square, redrawing any dot that lands
/// within [`MIN_SEPARATION`] of an earlier one.
pub fn generate_stimulus(count: u32, seed: u64) -> Result<DotStimulus, ServiceError> {
    if count > MAX_DOTS {
        return Err(ServiceError::invalid("count", format!("at most {MAX_DOTS} dots, got {count}")));
    }
    let mut rng = stream(seed, 0);
    let cells = (1.0 / MIN_SEPARATION).floor() as i64;
    let cell = |x: f64| ((x * cells as f64) as i64).min(cells - 1);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut points: Vec<[f64; 2]> = Vec::with_capacity(count as usize);
    while points.len() < count as usize {
        let mut placed = false;
        for _ in 0..MAX_REDRAWS {
            let p = [rng.random::<f64>(), rng.random::<f64>()];
            let (cx, cy) = (cell(p[0]), cell(p[1]));
            let clash = (-1..=1).any(|dx| {
                (-1..=1).any(|dy| {
                    grid.get(&(cx + dx, cy + dy)).is_some_and(|ids| {
                        ids.iter().any(|&i| {
                            let q = points[i];
                            (p[0] - q[0]).hypot(p[1] - q[1]) < MIN_SEPARATION
                        })
                    })
                })
            });
            if !clash {
                grid.entry((cx, cy)).or_default().push(points.len());
                points.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(ServiceError::invalid("count", format!("could not place {count} separated dots")));
        }
    }
    Ok(DotStimulus { points, render_seed: seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_repeatable() {
        assert!(generate_stimulus(0, 1).unwrap().points.is_empty());
        let a = generate_stimulus(64, 9).unwrap();
        assert_eq!(a, generate_stimulus(64, 9).unwrap());
        assert_ne!(a.points, generate_stimulus(64, 10).unwrap().points);
    }

    #[test]
    fn dots_are_separated_and_inside() {
        for (count, seed) in [(64, 3), (2000, 4)] {
            let s = generate_stimulus(count, seed).unwrap();
            assert_eq!(s.count(), count as usize);
            for (i, p) in s.points.iter().enumerate() {
                assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
                for q in &s.points[..i] {
                    assert!((p[0] - q[0]).hypot(p[1] - q[1]) >= MIN_SEPARATION);
                }
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(generate_stimulus(MAX_DOTS, 1).is_ok());
        assert!(generate_stimulus(MAX_DOTS + 1, 1).is_err());
    }
}
