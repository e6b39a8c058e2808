//! Quadrature meshes on the unit sphere `S^{N-1}`.

use super::GridError;
use crate::special::sphere_area;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Unit directions with positive weights summing to the sphere's area.
///
/// For `N = 3` the mesh is a refined icosahedron and keeps its triangles, so
/// values can be interpolated barycentrically. Other dimensions use a
/// midpoint rule in hyperspherical angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereMesh {
    dim: usize,
    order: usize,
    directions: Vec<Vec<f64>>,
    weights: Vec<f64>,
    triangles: Vec<[usize; 3]>,
    vertex_triangles: Vec<Vec<usize>>,
}

impl SphereMesh {
    /// Icosahedral mesh refined `order` times (`10·4^order + 2` vertices) for `N = 3`,
    /// otherwise an angular midpoint mesh with `2^{order+1}` cells per polar angle.
    pub fn new(dim: usize, order: usize) -> Result<Self, GridError> {
        if dim < 3 {
            return Err(GridError::InvalidMesh(format!("dimension {dim} below 3")));
        }
        if order > 6 {
            return Err(GridError::InvalidMesh(format!("order {order} is too fine")));
        }
        if dim == 3 {
            Ok(icosahedral(order))
        } else {
            Ok(hyperspherical(dim, order))
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the mesh direction closest to `dir`.
    pub fn nearest(&self, dir: &[f64]) -> usize {
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, d) in self.directions.iter().enumerate() {
            let dot: f64 = d.iter().zip(dir).map(|(a, b)| a * b).sum();
            if dot > best_dot {
                best_dot = dot;
                best = i;
            }
        }
        best
    }

    /// Index of the direction antipodal to direction `i`.
    pub fn antipode(&self, i: usize) -> usize {
        let neg: Vec<f64> = self.directions[i].iter().map(|v| -v).collect();
        self.nearest(&neg)
    }

    /// Interpolation stencil at an arbitrary unit vector: barycentric on the
    /// containing triangle for refined icosahedral meshes (order ≥ 3),
    /// nearest neighbour otherwise.
    pub fn stencil(&self, dir: &[f64]) -> Vec<(usize, f64)> {
        let near = self.nearest(dir);
        if self.dim != 3 || self.order < 3 {
            return vec![(near, 1.0)];
        }
        for &t in &self.vertex_triangles[near] {
            let [a, b, c] = self.triangles[t];
            if let Some(w) = barycentric(
                &self.directions[a],
                &self.directions[b],
                &self.directions[c],
                dir,
            ) {
                return vec![(a, w[0]), (b, w[1]), (c, w[2])];
            }
        }
        vec![(near, 1.0)]
    }
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn barycentric(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Option<[f64; 3]> {
    let det = dot(a, &cross(b, c));
    if det.abs() < 1e-300 {
        return None;
    }
    let wa = dot(d, &cross(b, c)) / det;
    let wb = dot(a, &cross(d, c)) / det;
    let wc = dot(a, &cross(b, d)) / det;
    let tol = -1e-12;
    if wa < tol || wb < tol || wc < tol {
        return None;
    }
    let s = wa + wb + wc;
    Some([wa / s, wb / s, wc / s])
}

fn unit(v: [f64; 3]) -> Vec<f64> {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    vec![v[0] / r, v[1] / r, v[2] / r]
}

fn icosahedral(order: usize) -> SphereMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec<f64>> = Vec::new();
    for &s1 in &[-1.0, 1.0] {
        for &s2 in &[-1.0, 1.0] {
            verts.push(unit([0.0, s1, s2 * phi]));
            verts.push(unit([s1, s2 * phi, 0.0]));
            verts.push(unit([s2 * phi, 0.0, s1]));
        }
    }
    let edge2 = {
        let mut m = f64::INFINITY;
        for i in 0..12 {
            for j in i + 1..12 {
                let d: f64 = verts[i]
                    .iter()
                    .zip(&verts[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                m = m.min(d);
            }
        }
        m
    };
    let adjacent = |v: &[Vec<f64>], i: usize, j: usize| {
        let d: f64 = v[i].iter().zip(&v[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        (d - edge2).abs() < 1e-9
    };
    let mut tris = Vec::new();
    for i in 0..12 {
        for j in i + 1..12 {
            for k in j + 1..12 {
                if adjacent(&verts, i, j) && adjacent(&verts, j, k) && adjacent(&verts, i, k) {
                    tris.push([i, j, k]);
                }
            }
        }
    }
    for _ in 0..order {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            if let Some(&i) = cache.get(&key) {
                return i;
            }
            let m = unit([
                verts[a][0] + verts[b][0],
                verts[a][1] + verts[b][1],
                verts[a][2] + verts[b][2],
            ]);
            verts.push(m);
            cache.insert(key, verts.len() - 1);
            verts.len() - 1
        };
        for &[a, b, c] in &tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    let mut weights = vec![0.0; verts.len()];
    let mut vertex_triangles = vec![Vec::new(); verts.len()];
    for (t, &[a, b, c]) in tris.iter().enumerate() {
        let (va, vb, vc) = (&verts[a], &verts[b], &verts[c]);
        let num = dot(va, &cross(vb, vc)).abs();
        let den = 1.0 + dot(va, vb) + dot(vb, vc) + dot(vc, va);
        let area = 2.0 * num.atan2(den);
        for &v in &[a, b, c] {
            weights[v] += area / 3.0;
            vertex_triangles[v].push(t);
        }
    }
    SphereMesh {
        dim: 3,
        order,
        directions: verts,
        weights,
        triangles: tris,
        vertex_triangles,
    }
}

fn hyperspherical(dim: usize, order: usize) -> SphereMesh {
    let polar = 1usize << (order + 1);
    let azimuth = 2 * polar;
    let dt = PI / polar as f64;
    let dphi = 2.0 * PI / azimuth as f64;
    let n_polar = dim - 2;
    let mut directions = Vec::new();
    let mut weights = Vec::new();
    let mut counters = vec![0usize; n_polar];
    loop {
        for k in 0..azimuth {
            let phi = (k as f64 + 0.5) * dphi;
            let mut dir = Vec::with_capacity(dim);
            let mut sin_prod = 1.0;
            let mut w = dphi;
            for (j, &c) in counters.iter().enumerate() {
                let theta = (c as f64 + 0.5) * dt;
                dir.push(sin_prod * theta.cos());
                w *= theta.sin().powi((dim - 2 - j) as i32) * dt;
                sin_prod *= theta.sin();
            }
            dir.push(sin_prod * phi.cos());
            dir.push(sin_prod * phi.sin());
            directions.push(dir);
            weights.push(w);
        }
        let mut a = n_polar;
        loop {
            if a == 0 {
                let total: f64 = weights.iter().sum();
                let scale = sphere_area(dim) / total;
                for w in weights.iter_mut() {
                    *w *= scale;
                }
                return SphereMesh {
                    dim,
                    order,
                    directions,
                    weights,
                    triangles: Vec::new(),
                    vertex_triangles: Vec::new(),
                };
            }
            a -= 1;
            counters[a] += 1;
            if counters[a] < polar {
                break;
            }
            counters[a] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedral_counts_and_weights() {
        for order in 0..4 {
            let m = SphereMesh::new(3, order).unwrap();
            assert_eq!(m.len(), 10 * 4usize.pow(order as u32) + 2);
            let total: f64 = m.weights().iter().sum();
            assert!((total - 4.0 * PI).abs() < 1e-10);
            assert!(m.weights().iter().all(|&w| w > 0.0));
            for d in m.directions() {
                assert!((dot(d, d).sqrt() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn antipodes_are_exact() {
        let m = SphereMesh::new(3, 2).unwrap();
        for i in 0..m.len() {
            let j = m.antipode(i);
            for (a, b) in m.directions()[i].iter().zip(&m.directions()[j]) {
                assert!((a + b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn barycentric_reproduces_linear_data() {
        let m = SphereMesh::new(3, 3).unwrap();
        let values: Vec<f64> = m.directions().iter().map(|d| 2.0 * d[0] - d[2]).collect();
        let dir = unit([0.3, -0.7, 0.2]);
        let interp: f64 = m.stencil(&dir).iter().map(|&(i, w)| w * values[i]).sum();
        assert!((interp - (2.0 * dir[0] - dir[2])).abs() < 2e-2);
        let exact = m.stencil(&m.directions()[17]);
        assert!(exact
            .iter()
            .any(|&(i, w)| i == 17 && (w - 1.0).abs() < 1e-9));
    }

    #[test]
    fn higher_dimensional_mesh() {
        let m = SphereMesh::new(4, 1).unwrap();
        let total: f64 = m.weights().iter().sum();
        assert!((total - 2.0 * PI * PI).abs() < 1e-10);
        for d in m.directions() {
            assert!((dot(d, d).sqrt() - 1.0).abs() < 1e-12);
        }
    }
}
