//! Exhaustive count of grid-aligned layouts that reach a benchmark's known
//! optimum in both volume and routing length.
//!
//! Every body is a union of unit cells. A layout puts each body in one of
//! the 24 axis-aligned orientations at an integer offset so that the bodies
//! tile the optimal box exactly. The optimal box is taken in every distinct
//! axis permutation of its dimensions, anchored at the origin.
//!
//! Two layouts are the same when every body covers the same cells with its
//! ports at the same positions; bodies are labeled, and rotations or
//! reflections of the whole arrangement are not identified. A second count
//! identifies layouts related by a rotation of the whole arrangement.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bench::shapes::Primitive;
use crate::error::{Error, Result};
use crate::objectives::shape_aabb;
use crate::problem::ProblemSpec;

/// Default cap on search nodes.
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumerationReport {
    pub benchmark: String,
    pub count: u64,
    /// Layouts counted once per orbit under the 24 rotations of the whole
    /// arrangement.
    pub count_up_to_rotation: u64,
    /// Box dimensions tried, one entry per distinct axis permutation.
    pub boxes: Vec<[i32; 3]>,
    pub nodes: u64,
    /// Count stated for this benchmark in the literature, when known.
    pub reference_count: Option<u64>,
}

impl EnumerationReport {
    pub fn matches_reference(&self) -> Option<bool> {
        self.reference_count.map(|r| r == self.count)
    }
}

/// Published counts for the analytical benchmarks.
pub fn reference_count(name: &str) -> Option<u64> {
    match name {
        "cuboid2" => Some(16),
        "cuboid4" => Some(44),
        "cuboid6" => Some(136),
        "lshape2" => Some(1),
        "lshape4" => Some(8),
        "lshape6" => Some(48),
        "unique" => Some(1),
        _ => None,
    }
}

/// One orientation of a body: occupied cells (min corner at the origin) and
/// ports in doubled coordinates so that face centers stay integral.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Oriented {
    cells: Vec<[i32; 3]>,
    ports2: Vec<[i32; 3]>,
    extent: [i32; 3],
}

fn rotations() -> Vec<[[i32; 3]; 3]> {
    let mut out = Vec::with_capacity(24);
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for p in perms {
        for signs in 0..8 {
            let mut m = [[0i32; 3]; 3];
            for r in 0..3 {
                m[r][p[r]] = if signs >> r & 1 == 1 { -1 } else { 1 };
            }
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            if det == 1 {
                out.push(m);
            }
        }
    }
    out
}

fn apply(m: &[[i32; 3]; 3], v: [i32; 3]) -> [i32; 3] {
    let mut o = [0; 3];
    for r in 0..3 {
        o[r] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2];
    }
    o
}

fn as_int(v: f64) -> Option<i32> {
    let r = v.round();
    ((v - r).abs() < 1e-9).then_some(r as i32)
}

/// Unit cells of a primitive whose lattice breaks are integers.
fn unit_cells(shape: &Primitive) -> Option<Vec<[i32; 3]>> {
    let lattice = shape.lattice();
    let mut cells = BTreeSet::new();
    for b in &lattice.filled {
        let lo: Vec<i32> = (0..3).map(|k| as_int(b.lo[k])).collect::<Option<_>>()?;
        let hi: Vec<i32> = (0..3).map(|k| as_int(b.hi[k])).collect::<Option<_>>()?;
        for i in lo[0]..hi[0] {
            for j in lo[1]..hi[1] {
                for k in lo[2]..hi[2] {
                    cells.insert([i, j, k]);
                }
            }
        }
    }
    Some(cells.into_iter().collect())
}

/// Distinct orientations of a body. Cell corners `c` map to rotated cells
/// via their centers, `2c + 1`, in doubled coordinates.
fn orientations(cells: &[[i32; 3]], ports2: &[[i32; 3]]) -> Vec<Oriented> {
    let mut seen = BTreeSet::new();
    for m in rotations() {
        let centers: Vec<[i32; 3]> = cells
            .iter()
            .map(|c| apply(&m, [2 * c[0] + 1, 2 * c[1] + 1, 2 * c[2] + 1]))
            .collect();
        let ports: Vec<[i32; 3]> = ports2.iter().map(|p| apply(&m, *p)).collect();
        let mut lo = [i32::MAX; 3];
        for c in &centers {
            for k in 0..3 {
                lo[k] = lo[k].min(c[k] - 1);
            }
        }
        let mut out_cells: Vec<[i32; 3]> = centers
            .iter()
            .map(|c| [(c[0] - 1 - lo[0]) / 2, (c[1] - 1 - lo[1]) / 2, (c[2] - 1 - lo[2]) / 2])
            .collect();
        out_cells.sort();
        let out_ports: Vec<[i32; 3]> = ports.iter().map(|p| [p[0] - lo[0], p[1] - lo[1], p[2] - lo[2]]).collect();
        let mut extent = [0; 3];
        for c in &out_cells {
            for k in 0..3 {
                extent[k] = extent[k].max(c[k] + 1);
            }
        }
        seen.insert(Oriented {
            cells: out_cells,
            ports2: out_ports,
            extent,
        });
    }
    seen.into_iter().collect()
}

struct Search<'a> {
    dims: [i32; 3],
    bodies: &'a [Vec<Oriented>],
    routes: &'a [((usize, usize), (usize, usize))],
    target_routing: f64,
    occupied: Vec<bool>,
    placed: Vec<Option<(usize, [i32; 3])>>,
    count: u64,
    nodes: u64,
    budget: u64,
    found: Vec<Layout>,
}

/// Per body: sorted world cells and ports, both in doubled coordinates.
type Layout = Vec<(Vec<[i32; 3]>, Vec<[i32; 3]>)>;

/// Lexicographically smallest image of a layout under the 24 rotations,
/// translated so the cell centers start at the origin.
fn canonical(layout: &Layout, rots: &[[[i32; 3]; 3]]) -> Layout {
    let mut best: Option<Layout> = None;
    for m in rots {
        let rotated: Layout = layout
            .iter()
            .map(|(c, p)| (c.iter().map(|v| apply(m, *v)).collect(), p.iter().map(|v| apply(m, *v)).collect()))
            .collect();
        let mut lo = [i32::MAX; 3];
        for (cells, _) in &rotated {
            for c in cells {
                for k in 0..3 {
                    lo[k] = lo[k].min(c[k]);
                }
            }
        }
        let shift = |v: &[i32; 3]| [v[0] - lo[0], v[1] - lo[1], v[2] - lo[2]];
        let img: Layout = rotated
            .iter()
            .map(|(c, p)| {
                let mut c: Vec<[i32; 3]> = c.iter().map(shift).collect();
                c.sort();
                (c, p.iter().map(shift).collect())
            })
            .collect();
        if best.as_ref().is_none_or(|b| img < *b) {
            best = Some(img);
        }
    }
    best.expect("rotations")
}

impl Search<'_> {
    fn index(&self, c: [i32; 3]) -> usize {
        ((c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]) as usize
    }

    fn port2(&self, body: usize, port: usize) -> [i32; 3] {
        let (o, off) = self.placed[body].expect("placed");
        let p = self.bodies[body][o].ports2[port];
        [p[0] + 2 * off[0], p[1] + 2 * off[1], p[2] + 2 * off[2]]
    }

    fn routing(&self) -> f64 {
        self.routes
            .iter()
            .map(|&((ba, pa), (bb, pb))| {
                let a = self.port2(ba, pa);
                let b = self.port2(bb, pb);
                let d: f64 = (0..3).map(|k| ((a[k] - b[k]) as f64 / 2.0).powi(2)).sum();
                d.sqrt()
            })
            .sum()
    }

    fn run(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExceeded(self.budget));
        }
        let Some(first) = self.occupied.iter().position(|o| !o) else {
            if (self.routing() - self.target_routing).abs() <= 1e-9 {
                self.count += 1;
                let layout = (0..self.bodies.len())
                    .map(|b| {
                        let (o, off) = self.placed[b].expect("placed");
                        let or = &self.bodies[b][o];
                        let cells = or
                            .cells
                            .iter()
                            .map(|c| [2 * (c[0] + off[0]) + 1, 2 * (c[1] + off[1]) + 1, 2 * (c[2] + off[2]) + 1])
                            .collect();
                        let ports = (0..or.ports2.len()).map(|p| self.port2(b, p)).collect();
                        (cells, ports)
                    })
                    .collect();
                self.found.push(layout);
            }
            return Ok(());
        };
        let fc = [
            first as i32 / (self.dims[1] * self.dims[2]),
            (first as i32 / self.dims[2]) % self.dims[1],
            first as i32 % self.dims[2],
        ];
        for b in 0..self.bodies.len() {
            if self.placed[b].is_some() {
                continue;
            }
            for (oi, o) in self.bodies[b].iter().enumerate() {
                // The first empty cell in scan order must be the body's first cell.
                let anchor = o.cells[0];
                let off = [fc[0] - anchor[0], fc[1] - anchor[1], fc[2] - anchor[2]];
                if (0..3).any(|k| off[k] < 0 || off[k] + o.extent[k] > self.dims[k]) {
                    continue;
                }
                let idx: Vec<usize> = o
                    .cells
                    .iter()
                    .map(|c| self.index([c[0] + off[0], c[1] + off[1], c[2] + off[2]]))
                    .collect();
                if idx.iter().any(|&i| self.occupied[i]) {
                    continue;
                }
                for &i in &idx {
                    self.occupied[i] = true;
                }
                self.placed[b] = Some((oi, off));
                let r = self.run();
                self.placed[b] = None;
                for &i in &idx {
                    self.occupied[i] = false;
                }
                r?;
            }
        }
        Ok(())
    }
}

/// Counts optimal grid layouts of an analytical benchmark.
pub fn enumerate_discrete_optima(spec: &ProblemSpec, budget: u64) -> Result<EnumerationReport> {
    let opt = spec
        .known_optimum
        .ok_or_else(|| Error::Unsupported("enumeration needs a benchmark with a known optimum".into()))?;
    let cert = spec
        .certificate
        .as_ref()
        .ok_or_else(|| Error::Unsupported("enumeration needs a certificate layout".into()))?;

    let mut bodies = Vec::with_capacity(spec.bodies.len());
    let mut total_cells = 0usize;
    for (i, b) in spec.bodies.iter().enumerate() {
        let shape = b
            .shape
            .ok_or_else(|| Error::Unsupported(format!("body {i} has no primitive shape")))?;
        let cells = unit_cells(&shape)
            .ok_or_else(|| Error::Unsupported(format!("body {i} is not a union of unit cells")))?;
        let c = shape.centroid();
        let ports2 = b
            .ports
            .iter()
            .map(|p| {
                let d = (p + c) * 2.0;
                (0..3)
                    .map(|k| as_int(d[k]))
                    .collect::<Option<Vec<i32>>>()
                    .map(|v| [v[0], v[1], v[2]])
                    .ok_or_else(|| Error::Unsupported(format!("body {i} has a port off the half-unit grid")))
            })
            .collect::<Result<Vec<_>>>()?;
        total_cells += cells.len();
        bodies.push(orientations(&cells, &ports2));
    }

    let posed = spec.posed(cert)?;
    let (lo, hi) = shape_aabb(&posed);
    let ext = hi - lo;
    let dims: Vec<i32> = (0..3)
        .map(|k| as_int(ext[k]).filter(|&d| d > 0))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Unsupported("certificate box is not integral".into()))?;
    if (dims.iter().product::<i32>() as usize) != total_cells || (opt.volume - total_cells as f64).abs() > 1e-9 {
        return Err(Error::Unsupported("optimum is not an exact tiling".into()));
    }
    let mut boxes = BTreeSet::new();
    for p in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        boxes.insert([dims[p[0]], dims[p[1]], dims[p[2]]]);
    }
    let routes: Vec<_> = spec
        .routes
        .iter()
        .map(|r| ((r.from.body, r.from.port), (r.to.body, r.to.port)))
        .collect();

    let rots = rotations();
    let mut orbits = BTreeSet::new();
    let mut count = 0;
    let mut nodes = 0;
    for &dims in &boxes {
        let mut s = Search {
            dims,
            bodies: &bodies,
            routes: &routes,
            target_routing: opt.routing_length,
            occupied: vec![false; total_cells],
            placed: vec![None; bodies.len()],
            count: 0,
            nodes,
            budget,
            found: Vec::new(),
        };
        s.run()?;
        count += s.count;
        nodes = s.nodes;
        for l in &s.found {
            orbits.insert(canonical(l, &rots));
        }
    }
    Ok(EnumerationReport {
        benchmark: spec.name.clone(),
        count,
        count_up_to_rotation: orbits.len() as u64,
        boxes: boxes.into_iter().collect(),
        nodes,
        reference_count: reference_count(&spec.name),
    })
}
