//! Edge-element curl-curl operator on a staggered (Yee) tensor grid.
//!
//! Unknowns are tangential field components on primal edges. Tangential
//! components on the outer boundary are zero. The operator is returned in the
//! symmetric scaled form `A = M^{-1/2} C^T W C M^{-1/2}`, where `C` maps edge values
//! to face circulations, `W` holds dual length over face area, and `M` is the
//! diagonal of `sigma mu0` times the edge length and its dual face area.

use super::{Axis, GridSpec, ProblemError, ProblemInstance, SigmaField};
use crate::linalg::{qr_tall, BlockVector, SparseSymOperator, DEFAULT_DEFLATION_TOL};
use std::collections::BTreeMap;

/// A small square current loop on the face whose lowest corner is interior node
/// `node`, lying in the plane normal to axis `normal` (0, 1 or 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoopSource {
    pub node: [usize; 3],
    pub normal: usize,
}

/// Edge numbering and metric of the Yee grid.
#[derive(Clone, Debug)]
pub struct YeeGrid {
    axes: [Axis; 3],
    /// Unknown node counts per axis.
    nn: [usize; 3],
    offsets: [usize; 3],
    n_edges: usize,
    n_opt: usize,
}

impl YeeGrid {
    pub fn new(spec: &GridSpec) -> Result<Self, ProblemError> {
        if spec.counts.len() != 3 || spec.counts.contains(&0) {
            return Err(ProblemError::Geometry("maxwell3d needs three positive interior counts".into()));
        }
        let axes = [0, 1, 2].map(|a| Axis::new(spec.counts[a], spec));
        let nn = [0, 1, 2].map(|a| axes[a].n_unknowns());
        let per_dir = |d: usize| (0..3).map(|a| if a == d { nn[a] + 1 } else { nn[a] }).product::<usize>();
        let offsets = [0, per_dir(0), per_dir(0) + per_dir(1)];
        let n_edges = offsets[2] + per_dir(2);
        Ok(Self {
            axes,
            nn,
            offsets,
            n_edges,
            n_opt: spec.n_opt,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn n_nodes(&self) -> usize {
        self.nn.iter().product()
    }

    /// Extent along each axis of the edge array in direction `d`.
    fn dims(&self, d: usize) -> [usize; 3] {
        let mut e = self.nn;
        e[d] += 1;
        e
    }

    /// Edge in direction `d` at grid position `at`: `at[d]` is a cell index
    /// (`0..=N_d`), the other entries are unknown node indices. Returns `None`
    /// for boundary (zero) edges.
    pub fn edge(&self, d: usize, at: [isize; 3]) -> Option<usize> {
        let e = self.dims(d);
        if (0..3).any(|a| at[a] < 0 || at[a] as usize >= e[a]) {
            return None;
        }
        let [i, j, k] = at.map(|v| v as usize);
        Some(self.offsets[d] + (k * e[1] + j) * e[0] + i)
    }

    fn len(&self, a: usize, cell: isize) -> f64 {
        self.axes[a].steps()[cell as usize]
    }

    fn dual(&self, a: usize, node: isize) -> f64 {
        self.axes[a].dual(node as usize)
    }

    fn extended_positions(&self, a: usize) -> Vec<f64> {
        // node -1 .. node N (Dirichlet nodes included)
        let p = self.axes[a].positions();
        let mut x = Vec::with_capacity(p.len() + 2);
        x.push(p[0] - self.axes[a].steps()[0]);
        x.extend_from_slice(&p);
        x.push(p[p.len() - 1] + self.axes[a].steps()[p.len()]);
        x
    }

    /// Edge mass `sigma mu0 * length * dual face area` in edge order.
    pub fn edge_mass(&self, sigma: &SigmaField, mu0: f64) -> Vec<f64> {
        let xs = [0, 1, 2].map(|a| self.extended_positions(a));
        let mut mass = vec![0.0; self.n_edges];
        for d in 0..3 {
            let e = self.dims(d);
            for k in 0..e[2] {
                for j in 0..e[1] {
                    for i in 0..e[0] {
                        let at = [i as isize, j as isize, k as isize];
                        let mut w = 1.0;
                        let mut mid = [0.0; 3];
                        for a in 0..3 {
                            if a == d {
                                w *= self.len(a, at[a]);
                                mid[a] = 0.5 * (xs[a][at[a] as usize] + xs[a][at[a] as usize + 1]);
                            } else {
                                w *= self.dual(a, at[a]);
                                mid[a] = xs[a][at[a] as usize + 1];
                            }
                        }
                        mass[self.edge(d, at).unwrap()] = sigma.at(&mid) * mu0 * w;
                    }
                }
            }
        }
        mass
    }

    /// Faces with their `(edge, coefficient)` circulation stencil and weight
    /// `dual length / area`.
    fn faces(&self) -> Vec<(f64, Vec<(usize, f64)>)> {
        let mut out = Vec::new();
        for n in 0..3 {
            let (u, v) = ((n + 1) % 3, (n + 2) % 3);
            // the face normal to n sits at unknown node index along n and spans cells along u, v
            let mut ext = [0usize; 3];
            ext[n] = self.nn[n];
            ext[u] = self.nn[u] + 1;
            ext[v] = self.nn[v] + 1;
            for c2 in 0..ext[2] {
                for c1 in 0..ext[1] {
                    for c0 in 0..ext[0] {
                        let at = [c0 as isize, c1 as isize, c2 as isize];
                        let (lu, lv) = (self.len(u, at[u]), self.len(v, at[v]));
                        let w = self.dual(n, at[n]) / (lu * lv);
                        let shift = |a: usize, by: isize| {
                            let mut p = at;
                            p[a] += by;
                            p
                        };
                        // u-edges at v-nodes cell-1 and cell, v-edges at u-nodes cell-1 and cell
                        let stencil = [
                            (u, shift(v, -1), lu),
                            (u, at, -lu),
                            (v, at, lv),
                            (v, shift(u, -1), -lv),
                        ];
                        let terms: Vec<(usize, f64)> = stencil
                            .iter()
                            .filter_map(|&(d, p, c)| self.edge(d, p).map(|e| (e, c)))
                            .collect();
                        if !terms.is_empty() {
                            out.push((w, terms));
                        }
                    }
                }
            }
        }
        out
    }

    /// Scaled gradient field `M^{1/2} G phi` of node potentials `phi` (unknown nodes,
    /// x fastest; zero on the boundary).
    pub fn gradient_field(&self, phi: &[f64], mass: &[f64]) -> Vec<f64> {
        assert_eq!(phi.len(), self.n_nodes());
        let node = |p: [isize; 3]| -> f64 {
            if (0..3).any(|a| p[a] < 0 || p[a] as usize >= self.nn[a]) {
                0.0
            } else {
                phi[(p[2] as usize * self.nn[1] + p[1] as usize) * self.nn[0] + p[0] as usize]
            }
        };
        let mut e = vec![0.0; self.n_edges];
        for d in 0..3 {
            let dims = self.dims(d);
            for k in 0..dims[2] {
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        let at = [i as isize, j as isize, k as isize];
                        let mut lo = at;
                        lo[d] -= 1;
                        let idx = self.edge(d, at).unwrap();
                        e[idx] = (node(at) - node(lo)) / self.len(d, at[d]) * mass[idx].sqrt();
                    }
                }
            }
        }
        e
    }

    /// Loop stencil `(edge, signed length)` around the face above `src.node`.
    fn loop_edges(&self, src: &LoopSource) -> Vec<(usize, f64)> {
        let n = src.normal;
        let (u, v) = ((n + 1) % 3, (n + 2) % 3);
        let mut at = [0isize; 3];
        for a in 0..3 {
            at[a] = (src.node[a] + self.n_opt) as isize;
        }
        // cells just above the corner node along u and v
        at[u] += 1;
        at[v] += 1;
        let (lu, lv) = (self.len(u, at[u]), self.len(v, at[v]));
        let shift = |a: usize, by: isize| {
            let mut p = at;
            p[a] += by;
            p
        };
        [(u, shift(v, -1), lu), (u, at, -lu), (v, at, lv), (v, shift(u, -1), -lv)]
            .iter()
            .filter_map(|&(d, p, c)| self.edge(d, p).map(|e| (e, c)))
            .collect()
    }
}

/// Curl-curl operator on the Yee grid of `spec` with one `B` column per loop.
pub fn build_maxwell_yee_3d(
    spec: &GridSpec,
    sigma: &SigmaField,
    mu0: f64,
    loops: &[LoopSource],
) -> Result<(ProblemInstance, YeeGrid), ProblemError> {
    if !(mu0 > 0.0) || !sigma.is_positive() {
        return Err(ProblemError::Sigma("sigma and mu0 must be positive".into()));
    }
    if loops.is_empty() {
        return Err(ProblemError::Geometry("at least one loop source is required".into()));
    }
    let grid = YeeGrid::new(spec)?;
    for l in loops {
        let (u, v) = ((l.normal + 1) % 3, (l.normal + 2) % 3);
        let ok = l.normal < 3
            && l.node[l.normal] < spec.counts[l.normal]
            && l.node[u] + 1 < spec.counts[u]
            && l.node[v] + 1 < spec.counts[v];
        if !ok {
            return Err(ProblemError::Geometry(format!("loop {l:?} is not inside the interior region")));
        }
    }
    let mass = grid.edge_mass(sigma, mu0);
    let scale: Vec<f64> = mass.iter().map(|m| m.powf(-0.5)).collect();
    let mut trip = Vec::new();
    for (w, terms) in grid.faces() {
        for (a, &(ea, ca)) in terms.iter().enumerate() {
            for &(eb, cb) in &terms[..=a] {
                trip.push((ea, eb, w * ca * cb * scale[ea] * scale[eb]));
            }
        }
    }
    let operator = SparseSymOperator::from_triplets(grid.n_edges(), &trip)?;

    let cols: Vec<Vec<f64>> = loops
        .iter()
        .map(|l| {
            let mut c = vec![0.0; grid.n_edges()];
            for (e, coef) in grid.loop_edges(l) {
                c[e] += coef * scale[e];
            }
            c
        })
        .collect();
    let (rhs, _) = qr_tall(&BlockVector::from_columns(&cols), DEFAULT_DEFLATION_TOL)
        .map_err(|_| ProblemError::Geometry("loop sources must be linearly independent".into()))?;

    let mut meta = BTreeMap::new();
    meta.insert("problem".into(), "maxwell3d".into());
    for (a, key) in ["nx", "ny", "nz"].iter().enumerate() {
        meta.insert((*key).into(), spec.counts[a].to_string());
    }
    meta.insert("nopt".into(), spec.n_opt.to_string());
    meta.insert("h0".into(), format!("{:e}", spec.h0));
    meta.insert("factor".into(), format!("{:.17e}", spec.factor));
    meta.insert("mu0".into(), format!("{mu0:e}"));
    meta.insert("sigma".into(), sigma.to_string());
    meta.insert(
        "loops".into(),
        loops
            .iter()
            .map(|l| format!("{}:{}:{}:{}", l.node[0], l.node[1], l.node[2], ["x", "y", "z"][l.normal]))
            .collect::<Vec<_>>()
            .join(","),
    );
    Ok((ProblemInstance { operator, rhs, meta }, grid))
}
