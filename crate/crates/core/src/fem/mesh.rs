//! Triangulations of the planar reference domains.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, SQUARE_SIDE};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// Longest edge.
    pub h: f64,
    pub divisions: usize,
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    fn from_parts(nodes: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>, boundary: Vec<bool>, divisions: usize) -> Self {
        for t in &mut triangles {
            if signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]) < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut h = 0.0f64;
        for t in &triangles {
            for e in 0..3 {
                let (a, b) = (nodes[t[e]], nodes[t[(e + 1) % 3]]);
                h = h.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        Self {
            nodes,
            triangles,
            boundary,
            h,
            divisions,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| signed_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]))
            .sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle(&self) -> f64 {
        let mut worst = 180.0f64;
        for t in &self.triangles {
            for k in 0..3 {
                let p = self.nodes[t[k]];
                let a = self.nodes[t[(k + 1) % 3]];
                let b = self.nodes[t[(k + 2) % 3]];
                let (u, v) = ([a[0] - p[0], a[1] - p[1]], [b[0] - p[0], b[1] - p[1]]);
                let c = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                worst = worst.min(c.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        worst
    }

    /// Edges that belong to exactly one triangle, oriented counter-clockwise
    /// with respect to the mesh (interior on the left).
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let mut count: HashMap<(usize, usize), ([usize; 2], usize)> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                count.entry(key).or_insert(([a, b], 0)).1 += 1;
            }
        }
        let mut out: Vec<[usize; 2]> = count.into_values().filter(|(_, c)| *c == 1).map(|(e, _)| e).collect();
        out.sort_unstable();
        out
    }

    /// Connected components of the triangle adjacency graph (shared edges).
    pub fn triangle_components(&self) -> usize {
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (i, t) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(i);
            }
        }
        let mut adj = vec![Vec::new(); self.triangles.len()];
        for tris in by_edge.values() {
            if let [a, b] = tris[..] {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut seen = vec![false; self.triangles.len()];
        let mut comps = 0;
        for s in 0..self.triangles.len() {
            if seen[s] {
                continue;
            }
            comps += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        comps
    }

    /// Plain-text dump: `nodes N`, then `x y b` lines (b = 1 on the
    /// boundary), then `triangles T`, then `i j k` lines (0-based).
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "nodes {}", self.nodes.len())?;
        for (p, b) in self.nodes.iter().zip(&self.boundary) {
            writeln!(w, "{:.17e} {:.17e} {}", p[0], p[1], u8::from(*b))?;
        }
        writeln!(w, "triangles {}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    fn translated(&self, offset: [f64; 2]) -> Self {
        let mut m = self.clone();
        for p in &mut m.nodes {
            p[0] += offset[0];
            p[1] += offset[1];
        }
        m
    }

    fn merged(a: Mesh, b: Mesh) -> Self {
        let shift = a.nodes.len();
        let mut nodes = a.nodes;
        nodes.extend(b.nodes);
        let mut triangles = a.triangles;
        triangles.extend(b.triangles.iter().map(|t| [t[0] + shift, t[1] + shift, t[2] + shift]));
        let mut boundary = a.boundary;
        boundary.extend(b.boundary);
        Mesh::from_parts(nodes, triangles, boundary, a.divisions)
    }
}

/// Structured right-triangle grid of the square with `n` cells per side.
/// Diagonals alternate by cell parity (union-jack pattern), so for even `n`
/// the mesh keeps the full symmetry group of the square.
fn square_mesh(n: usize) -> Mesh {
    let l = SQUARE_SIDE;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = if i == n { l } else { l * i as f64 / n as f64 };
            let y = if j == n { l } else { l * j as f64 / n as f64 };
            nodes.push([x, y]);
            boundary.push(i == 0 || j == 0 || i == n || j == n);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            if (i + j) % 2 == 0 {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            } else {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
                triangles.push([idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
    }
    Mesh::from_parts(nodes, triangles, boundary, n)
}

/// Concentric-ring mesh of the unit disk: ring `i` (radius `i/n`) carries
/// `6i` nodes, and each sextant between two rings is stitched by angle.
fn disk_mesh(n: usize) -> Mesh {
    let mut nodes = vec![[0.0, 0.0]];
    let mut boundary = vec![false];
    let mut ring_start = vec![0usize];
    for i in 1..=n {
        ring_start.push(nodes.len());
        let r = i as f64 / n as f64;
        let m = 6 * i;
        for q in 0..m {
            let th = 2.0 * PI * q as f64 / m as f64;
            let (s, c) = th.sin_cos();
            nodes.push([r * c, r * s]);
            boundary.push(i == n);
        }
    }
    let node = |ring: usize, q: usize| -> usize {
        if ring == 0 {
            0
        } else {
            ring_start[ring] + q % (6 * ring)
        }
    };
    let mut triangles = Vec::with_capacity(6 * n * n);
    for q in 0..6 {
        triangles.push([0, node(1, q), node(1, q + 1)]);
    }
    for i in 2..=n {
        let (ni, no) = (i - 1, i);
        for s in 0..6 {
            let (mut a, mut b) = (0usize, 0usize);
            while a < ni || b < no {
                // advance whichever ring has the smaller next angle
                let inner_next = a < ni && (b == no || (a + 1) * no < (b + 1) * ni);
                if inner_next {
                    triangles.push([node(ni, s * ni + a), node(no, s * no + b), node(ni, s * ni + a + 1)]);
                    a += 1;
                } else {
                    triangles.push([node(ni, s * ni + a), node(no, s * no + b), node(no, s * no + b + 1)]);
                    b += 1;
                }
            }
        }
    }
    Mesh::from_parts(nodes, triangles, boundary, n)
}

/// Triangulates a planar reference domain with `divisions` cells per side
/// (square) or rings per unit radius (disk).
pub fn mesh_domain(domain: &DomainSpec, divisions: usize) -> Result<Mesh> {
    if divisions < 2 {
        return Err(Error::InvalidInput(format!("mesh needs at least 2 divisions, got {divisions}")));
    }
    match domain {
        DomainSpec::UnitDisk => Ok(disk_mesh(divisions)),
        DomainSpec::Square => Ok(square_mesh(divisions)),
        DomainSpec::DisjointPair { base, offset } => {
            let a = mesh_domain(base, divisions)?;
            let b = a.translated(*offset);
            Ok(Mesh::merged(a, b))
        }
        DomainSpec::UnitBall3d => Err(Error::InvalidInput("no finite-element mesh for the 3D ball".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_counts_and_quality() {
        for n in [2, 4, 16] {
            let m = mesh_domain(&DomainSpec::Square, n).unwrap();
            assert_eq!(m.triangles.len(), 2 * n * n);
            assert!((m.area() - PI * PI).abs() < 1e-12);
            assert!((m.min_angle() - 45.0).abs() < 1e-9);
            let areas: Vec<f64> = m.triangles.iter().map(|t| signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]])).collect();
            assert!(areas.iter().all(|a| (a - areas[0]).abs() < 1e-12));
            assert_eq!(m.boundary.iter().filter(|&&b| b).count(), 4 * n);
        }
    }

    #[test]
    fn disk_fan_and_quality() {
        for n in [2, 8, 16, 64] {
            let m = mesh_domain(&DomainSpec::UnitDisk, n).unwrap();
            assert_eq!(m.node_count(), 1 + 3 * n * (n + 1));
            assert_eq!(m.triangles.len(), 6 * n * n);
            assert!(m.min_angle() >= 20.0, "n={n}: {}", m.min_angle());
            for t in &m.triangles {
                assert!(signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]) > 0.0);
            }
            // angles around the center vertex close to 2 pi
            let mut total = 0.0;
            for t in m.triangles.iter().filter(|t| t.contains(&0)) {
                let k = t.iter().position(|&v| v == 0).unwrap();
                let (a, b) = (m.nodes[t[(k + 1) % 3]], m.nodes[t[(k + 2) % 3]]);
                total += ((a[0] * b[0] + a[1] * b[1]) / (a[0].hypot(a[1]) * b[0].hypot(b[1]))).clamp(-1.0, 1.0).acos();
            }
            assert!((total - 2.0 * PI).abs() < 1e-12);
            for (p, &b) in m.nodes.iter().zip(&m.boundary) {
                if b {
                    assert!((p[0].hypot(p[1]) - 1.0).abs() <= 1e-12);
                }
            }
            assert_eq!(m.boundary_edges().len(), 6 * n);
            assert!(m.boundary_edges().iter().all(|e| m.boundary[e[0]] && m.boundary[e[1]]));
        }
    }

    #[test]
    fn pair_has_two_components() {
        let d = DomainSpec::disjoint_pair(DomainSpec::UnitDisk, [3.0, 0.0], 0.1).unwrap();
        let m = mesh_domain(&d, 6).unwrap();
        assert_eq!(m.triangle_components(), 2);
        assert_eq!(mesh_domain(&DomainSpec::UnitDisk, 6).unwrap().triangle_components(), 1);
        assert!(mesh_domain(&DomainSpec::UnitBall3d, 4).is_err());
    }

    #[test]
    fn dump_format() {
        let m = mesh_domain(&DomainSpec::Square, 2).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "nodes 9");
        assert_eq!(lines[10], "triangles 8");
        assert_eq!(lines.len(), 1 + 9 + 1 + 8);
        assert!(lines[1].ends_with(" 1"));
    }
}
