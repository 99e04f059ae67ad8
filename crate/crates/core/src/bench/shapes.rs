//! Primitive solids used by the benchmarks, described as unions of lattice
//! cells so that inclusion and distance-to-surface are exact.

use serde::{Deserialize, Serialize};

use crate::bench::decompose::Region;
use crate::geometry::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Box of size `w x h x d` along x, y, z.
    Cuboid { w: f64, h: f64, d: f64 },
    Cube { side: f64 },
    /// 2x2x1 block minus one 1x1x1 corner: cells (0,0), (1,0), (0,1).
    LShape,
    /// Four unit cells (0,0), (1,0), (0,1), (0,2) in one layer.
    DoubleLShape,
}

impl Primitive {
    pub fn name(&self) -> String {
        match self {
            Primitive::Cuboid { w, h, d } => format!("cuboid({w},{h},{d})"),
            Primitive::Cube { side } => format!("cube({side})"),
            Primitive::LShape => "lshape".into(),
            Primitive::DoubleLShape => "double_lshape".into(),
        }
    }

    /// Parses `cuboid(w,h,d)`, `cube(s)`, `lshape`, `double_lshape`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        let args = |prefix: &str| -> Option<Vec<f64>> {
            let inner = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            inner.split(',').map(|v| v.trim().parse().ok()).collect()
        };
        match s {
            "lshape" => return Some(Primitive::LShape),
            "double_lshape" => return Some(Primitive::DoubleLShape),
            _ => {}
        }
        if let Some(a) = args("cuboid") {
            if let [w, h, d] = a[..] {
                return Some(Primitive::Cuboid { w, h, d });
            }
        }
        if let Some(a) = args("cube") {
            if let [side] = a[..] {
                return Some(Primitive::Cube { side });
            }
        }
        None
    }

    pub fn lattice(&self) -> CellLattice {
        match *self {
            Primitive::Cuboid { w, h, d } => CellLattice::new([vec![0.0, w], vec![0.0, h], vec![0.0, d]], &[[0, 0, 0]]),
            Primitive::Cube { side } => {
                CellLattice::new([vec![0.0, side], vec![0.0, side], vec![0.0, side]], &[[0, 0, 0]])
            }
            Primitive::LShape => CellLattice::new(
                [vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0], vec![0.0, 1.0]],
                &[[0, 0, 0], [1, 0, 0], [0, 1, 0]],
            ),
            Primitive::DoubleLShape => CellLattice::new(
                [vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0]],
                &[[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 2, 0]],
            ),
        }
    }

    pub fn volume(&self) -> f64 {
        self.lattice().volume()
    }

    /// Centroid in design coordinates (the lattice frame). A body's local
    /// frame is the design frame shifted by this vector.
    pub fn centroid(&self) -> Vec3 {
        self.lattice().centroid()
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Aabb {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.lo[k] && p[k] <= self.hi[k])
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        let mut s = 0.0;
        for k in 0..3 {
            let d = (self.lo[k] - p[k]).max(0.0).max(p[k] - self.hi[k]);
            s += d * d;
        }
        s.sqrt()
    }

    pub fn volume(&self) -> f64 {
        (self.hi - self.lo).product()
    }
}

/// Union of cells of a rectilinear lattice. The complement is tracked as the
/// empty cells of the lattice padded by one cell on every side.
#[derive(Clone, Debug)]
pub struct CellLattice {
    pub filled: Vec<Aabb>,
    empty: Vec<Aabb>,
    lo: Vec3,
    hi: Vec3,
}

impl CellLattice {
    pub fn new(breaks: [Vec<f64>; 3], cells: &[[usize; 3]]) -> Self {
        let padded: Vec<Vec<f64>> = breaks
            .iter()
            .map(|b| {
                let span = b[b.len() - 1] - b[0];
                let mut v = vec![b[0] - span];
                v.extend_from_slice(b);
                v.push(b[b.len() - 1] + span);
                v
            })
            .collect();
        let cell_box = |i: usize, j: usize, k: usize| Aabb {
            lo: Vec3::new(padded[0][i], padded[1][j], padded[2][k]),
            hi: Vec3::new(padded[0][i + 1], padded[1][j + 1], padded[2][k + 1]),
        };
        let mut filled = Vec::new();
        let mut empty = Vec::new();
        for i in 0..padded[0].len() - 1 {
            for j in 0..padded[1].len() - 1 {
                for k in 0..padded[2].len() - 1 {
                    let inner = i >= 1 && j >= 1 && k >= 1 && cells.contains(&[i - 1, j - 1, k - 1]);
                    if inner {
                        filled.push(cell_box(i, j, k));
                    } else {
                        empty.push(cell_box(i, j, k));
                    }
                }
            }
        }
        let lo = Vec3::new(breaks[0][0], breaks[1][0], breaks[2][0]);
        let hi = Vec3::new(
            breaks[0][breaks[0].len() - 1],
            breaks[1][breaks[1].len() - 1],
            breaks[2][breaks[2].len() - 1],
        );
        Self { filled, empty, lo, hi }
    }

    pub fn volume(&self) -> f64 {
        self.filled.iter().map(Aabb::volume).sum()
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = Vec3::zeros();
        for b in &self.filled {
            c += (b.lo + b.hi) * (0.5 * b.volume());
        }
        c / self.volume()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.filled.iter().any(|b| b.contains(p))
    }
}

impl Region for CellLattice {
    fn bbox(&self) -> (Vec3, Vec3) {
        (self.lo, self.hi)
    }

    fn inner_distance(&self, p: &Vec3) -> f64 {
        if !self.contains(p) {
            return 0.0;
        }
        self.empty.iter().map(|b| b.distance(p)).fold(f64::INFINITY, f64::min)
    }
}
