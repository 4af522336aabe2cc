use serde::{Deserialize, Serialize};

use crate::features::Projection;

const EPS: f64 = 1e-9;

/// An axis-aligned square region of one 2D projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub projection: Projection,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub depth: u32,
}

impl Window {
    /// Closed on all sides, so points on a shared edge belong to both windows.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 - EPS && x <= self.x1 + EPS && y >= self.y0 - EPS && y <= self.y1 + EPS
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        other.x0 >= self.x0 - EPS && other.x1 <= self.x1 + EPS && other.y0 >= self.y0 - EPS && other.y1 <= self.y1 + EPS
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    /// The 2x2 half-size quadrants, row-major.
    pub fn children(&self) -> [Window; 4] {
        let xm = 0.5 * (self.x0 + self.x1);
        let ym = 0.5 * (self.y0 + self.y1);
        let w = |x0, y0, x1, y1| Window {
            projection: self.projection,
            x0,
            y0,
            x1,
            y1,
            depth: self.depth + 1,
        };
        [
            w(self.x0, self.y0, xm, ym),
            w(xm, self.y0, self.x1, ym),
            w(self.x0, ym, xm, self.y1),
            w(xm, ym, self.x1, self.y1),
        ]
    }
}

/// Window origins along one axis. A final window flush with 1.0 is added when
/// the stride does not land on it exactly.
fn origins(size: f64, stride: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let p = i as f64 * stride;
        if p + size > 1.0 + EPS {
            break;
        }
        out.push(p);
        i += 1;
    }
    match out.last() {
        Some(&last) if last + size < 1.0 - EPS => out.push(1.0 - size),
        None => out.push(0.0),
        _ => {}
    }
    out
}

/// Level-0 windows of `projection`, enumerated row-major (y outer, x inner).
pub fn sliding_windows(projection: Projection, size: f64, stride: f64) -> Vec<Window> {
    assert!(size > 0.0 && size <= 1.0, "window size must be in (0, 1]");
    assert!(stride > 0.0 && stride <= size + EPS, "stride must be in (0, window size]");
    let axis = origins(size, stride);
    let mut out = Vec::with_capacity(axis.len() * axis.len());
    for &y in &axis {
        for &x in &axis {
            out.push(Window {
                projection,
                x0: x,
                y0: y,
                x1: x + size,
                y1: y + size,
                depth: 0,
            });
        }
    }
    out
}
