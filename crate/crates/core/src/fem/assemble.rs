//! P1 stiffness and mass matrices on node-mapped meshes.

use rayon::prelude::*;

use super::mesh::{signed_area, Mesh};
use super::sparse::SparseSym;
use crate::error::{Error, Result};
use crate::geometry::{map_points, PerturbFamily};

/// Element matrices of the P1 triangle: signed area, stiffness, mass.
pub fn element_matrices(p: [[f64; 2]; 3]) -> (f64, [[f64; 3]; 3], [[f64; 3]; 3]) {
    let area = signed_area(p[0], p[1], p[2]);
    // hat gradients: grad phi_i = perp(p_{i+2} - p_{i+1}) / (2 area)
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)];
    }
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            m[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    (area, k, m)
}

/// Dirichlet-reduced system on a (possibly mapped) mesh.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub k: SparseSym,
    pub m: SparseSym,
    /// Mesh node of each free unknown.
    pub free: Vec<usize>,
    /// Unknown index of each mesh node, `None` on the boundary.
    pub dof: Vec<Option<usize>>,
    pub nodes: Vec<[f64; 2]>,
}

impl FemSystem {
    pub fn dofs(&self) -> usize {
        self.free.len()
    }

    /// Full nodal vector with zeros on the Dirichlet boundary.
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for (d, &node) in self.free.iter().enumerate() {
            out[node] = u[d];
        }
        out
    }
}

const ASSEMBLY_CHUNK: usize = 4096;

/// Assembles on the mesh with its nodes replaced by `nodes`.
pub fn assemble_nodes(mesh: &Mesh, nodes: Vec<[f64; 2]>) -> Result<FemSystem> {
    let mut dof = vec![None; mesh.nodes.len()];
    let mut free = Vec::new();
    for (i, &b) in mesh.boundary.iter().enumerate() {
        if !b {
            dof[i] = Some(free.len());
            free.push(i);
        }
    }
    let n = free.len();
    type Triplets = Vec<(usize, usize, f64)>;
    let parts: Vec<Result<(Triplets, Triplets)>> = mesh
        .triangles
        .par_chunks(ASSEMBLY_CHUNK)
        .enumerate()
        .map(|(c, tris)| {
            let mut kt = Vec::with_capacity(tris.len() * 9);
            let mut mt = Vec::with_capacity(tris.len() * 9);
            for (o, t) in tris.iter().enumerate() {
                let p = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
                let (area, ke, me) = element_matrices(p);
                if !(area > 0.0) {
                    return Err(Error::InvertedElement {
                        element: c * ASSEMBLY_CHUNK + o,
                        area,
                    });
                }
                for a in 0..3 {
                    let Some(i) = dof[t[a]] else { continue };
                    for b in 0..3 {
                        let Some(j) = dof[t[b]] else { continue };
                        kt.push((i, j, ke[a][b]));
                        mt.push((i, j, me[a][b]));
                    }
                }
            }
            Ok((kt, mt))
        })
        .collect();
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for p in parts {
        let (k, m) = p?;
        kt.extend(k);
        mt.extend(m);
    }
    Ok(FemSystem {
        k: SparseSym::from_triplets(n, kt),
        m: SparseSym::from_triplets(n, mt),
        free,
        dof,
        nodes,
    })
}

/// P1 system on `phi_t` applied to the mesh nodes.
pub fn assemble(mesh: &Mesh, family: &PerturbFamily, t: f64) -> Result<FemSystem> {
    if t.abs() > family.t_max {
        return Err(Error::OutOfRange(format!("t = {t} outside the admissible range ±{}", family.t_max)));
    }
    let nodes = map_points(family, t, &mesh.nodes)?;
    assemble_nodes(mesh, nodes)
}

/// Boundary flux `int ((x - c) . nu) (du/dnu)^2 ds` of a nodal field, using
/// area-averaged element gradients at the boundary nodes.
pub fn boundary_flux(mesh: &Mesh, nodes: &[[f64; 2]], u: &[f64], center: [f64; 2]) -> f64 {
    let mut grad = vec![[0.0f64; 2]; nodes.len()];
    let mut weight = vec![0.0f64; nodes.len()];
    for t in &mesh.triangles {
        let p = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
        let area = signed_area(p[0], p[1], p[2]);
        let mut g = [0.0; 2];
        for i in 0..3 {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            g[0] += u[t[i]] * (a[1] - b[1]) / (2.0 * area);
            g[1] += u[t[i]] * (b[0] - a[0]) / (2.0 * area);
        }
        for &v in t {
            if mesh.boundary[v] {
                grad[v][0] += area * g[0];
                grad[v][1] += area * g[1];
                weight[v] += area;
            }
        }
    }
    let mut total = 0.0;
    for e in mesh.boundary_edges() {
        let (a, b) = (nodes[e[0]], nodes[e[1]]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        // interior on the left, so the outward normal is the right-hand perpendicular
        let nu = [(b[1] - a[1]) / len, (a[0] - b[0]) / len];
        let mid = [0.5 * (a[0] + b[0]) - center[0], 0.5 * (a[1] + b[1]) - center[1]];
        let xn = mid[0] * nu[0] + mid[1] * nu[1];
        let dn = |v: usize| (grad[v][0] * nu[0] + grad[v][1] * nu[1]) / weight[v];
        let (da, db) = (dn(e[0]), dn(e[1]));
        total += xn * len * (da * da + db * db) / 2.0;
    }
    total
}
