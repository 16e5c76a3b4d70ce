//! Normalized tight frames, the regular-simplex geometry, and reflections.
//!
//! A normalized tight frame is a family of unit vectors `u₁, …, u_m` with
//! `Σ uᵢ ⊗ uᵢ = (m/n) I`.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::batch::{dot, Vector};
use crate::error::{domain, Error, Result};
use crate::stats::CompensatedSum;

/// Residual above which a custom frame is rejected.
pub const CUSTOM_FRAME_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FrameLabel {
    StandardBasis,
    /// Ordered-pair edge frame of the simplex with `n + 1` vertices.
    SimplexEdges { vertices: usize },
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TightFrame {
    /// `m × n`, one frame vector per row.
    vectors: Vec<f64>,
    n: usize,
    m: usize,
    label: FrameLabel,
}

impl TightFrame {
    fn from_parts(vectors: Vec<f64>, n: usize, label: FrameLabel) -> Self {
        let m = vectors.len() / n;
        TightFrame {
            vectors,
            n,
            m,
            label,
        }
    }

    /// A user-supplied frame. Rows must already be unit vectors and the
    /// family must be tight to [`CUSTOM_FRAME_TOLERANCE`].
    pub fn custom(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if n < 2 {
            return domain("frame vectors need dimension >= 2");
        }
        let mut flat = Vec::with_capacity(rows.len() * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            let norm = dot(row, row).sqrt();
            if (norm - 1.0).abs() > CUSTOM_FRAME_TOLERANCE {
                return domain(format!("frame vector has norm {norm}, not 1"));
            }
            flat.extend_from_slice(row);
        }
        let frame = TightFrame::from_parts(flat, n, FrameLabel::Custom);
        let residual = check_tight(&frame);
        if residual > CUSTOM_FRAME_TOLERANCE {
            return domain(format!("frame is not tight (residual {residual:e})"));
        }
        Ok(frame)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn label(&self) -> &FrameLabel {
        &self.label
    }

    /// The tight-frame constant `m/n`.
    pub fn constant(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }

    pub fn vectors(&self) -> std::slice::ChunksExact<'_, f64> {
        self.vectors.chunks_exact(self.n)
    }

    /// One vector per line, comma separated, full precision.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for v in self.vectors() {
            let line: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Read a custom frame from CSV (validated as in [`TightFrame::custom`]).
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("frame line {}: {e}", lineno + 1)))?;
            rows.push(row);
        }
        TightFrame::custom(rows)
    }
}

/// `e₁, …, eₙ`.
pub fn standard_frame(n: usize) -> Result<TightFrame> {
    if n < 2 {
        return domain(format!("dimension must be >= 2, got {n}"));
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    Ok(TightFrame::from_parts(v, n, FrameLabel::StandardBasis))
}

/// Vertices of the regular simplex inscribed in the unit sphere of ℝⁿ and
/// its ordered-pair edge frame `u_ij = √(n/(2(n+1))) (vᵢ − vⱼ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexGeometry {
    n: usize,
    /// `(n + 1) × n`, one vertex per row.
    vertices: Vec<f64>,
    edges: TightFrame,
}

impl SimplexGeometry {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        self.n + 1
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i * self.n..(i + 1) * self.n]
    }

    pub fn vertices(&self) -> std::slice::ChunksExact<'_, f64> {
        self.vertices.chunks_exact(self.n)
    }

    pub fn edge_frame(&self) -> &TightFrame {
        &self.edges
    }

    /// Frame position of the ordered pair `(i, j)`, `i ≠ j`, 0-based.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        edge_index(self.n, i, j)
    }

    /// Inverse of [`SimplexGeometry::edge_index`].
    pub fn edge_pair(&self, k: usize) -> Option<(usize, usize)> {
        if k >= self.edges.len() {
            return None;
        }
        let i = k / self.n;
        let r = k % self.n;
        Some((i, if r < i { r } else { r + 1 }))
    }

    /// `⟨θ, vᵢ⟩` for every vertex.
    pub fn vertex_coeffs(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: theta.len(),
            });
        }
        Ok(self.vertices().map(|v| dot(v, theta)).collect())
    }
}

pub(crate) fn edge_index(n: usize, i: usize, j: usize) -> Option<usize> {
    if i == j || i > n || j > n {
        return None;
    }
    Some(i * n + if j < i { j } else { j - 1 })
}

/// Helmert-basis construction: `vᵢ = √((n+1)/n) H eᵢ`, where the rows of `H`
/// are an orthonormal basis of `𝟙^⊥ ⊂ ℝ^{n+1}`. This is the centered and
/// normalized projection of the standard basis of ℝ^{n+1}, written in
/// coordinates of the hyperplane.
pub fn simplex_geometry(n: usize) -> Result<SimplexGeometry> {
    if n < 2 {
        return domain(format!("dimension must be >= 2, got {n}"));
    }
    let nf = n as f64;
    let lift = ((nf + 1.0) / nf).sqrt();
    let mut vertices = vec![0.0; (n + 1) * n];
    for k in 1..=n {
        let kf = k as f64;
        let h = 1.0 / (kf * (kf + 1.0)).sqrt();
        for i in 0..k {
            vertices[i * n + (k - 1)] = lift * h;
        }
        vertices[k * n + (k - 1)] = -lift * kf * h;
    }
    let c = (nf / (2.0 * (nf + 1.0))).sqrt();
    let mut edges = Vec::with_capacity(n * (n + 1) * n);
    for i in 0..=n {
        for j in 0..=n {
            if i == j {
                continue;
            }
            for t in 0..n {
                edges.push(c * (vertices[i * n + t] - vertices[j * n + t]));
            }
        }
    }
    Ok(SimplexGeometry {
        n,
        vertices,
        edges: TightFrame::from_parts(edges, n, FrameLabel::SimplexEdges { vertices: n + 1 }),
    })
}

/// `x₍ᵢ₎ = ⟨x, uᵢ⟩` for every frame vector.
pub fn frame_coeffs(frame: &TightFrame, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != frame.n {
        return Err(Error::DimensionMismatch {
            expected: frame.n,
            got: x.len(),
        });
    }
    Ok(frame.vectors().map(|u| dot(u, x)).collect())
}

/// Reflection of `x` in the hyperplane `u^⊥`: `x − 2⟨x,u⟩u`.
pub fn reflect(x: &Vector, u: &Vector) -> Result<Vector> {
    if x.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: u.dim(),
        });
    }
    u.ensure_unit(1e-9)?;
    let c = 2.0 * dot(x, u);
    Vector::new(x.iter().zip(u.iter()).map(|(a, b)| a - c * b).collect())
}

/// `‖Σ uᵢ ⊗ uᵢ − (m/n) I‖_F`.
///
/// Partial Gram matrices over chunks of frame vectors are combined with
/// compensated sums; plain accumulation over the `n(n+1)` simplex edges
/// loses about 1e-10 near `n = 200`.
pub fn check_tight(frame: &TightFrame) -> f64 {
    const CHUNK: usize = 256;
    let n = frame.n;
    let mut gram = vec![CompensatedSum::new(); n * n];
    for rows in frame.vectors.chunks(CHUNK * n) {
        let u = DMatrix::from_row_slice(rows.len() / n, n, rows);
        let part = u.tr_mul(&u);
        for (g, x) in gram.iter_mut().zip(part.iter()) {
            g.add(*x);
        }
    }
    let c = frame.constant();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut e = gram[i * n + j].value();
            if i == j {
                e -= c;
            }
            total += e * e;
        }
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standard_frame_is_exact() {
        let f = standard_frame(3).unwrap();
        assert_eq!(check_tight(&f), 0.0);
        assert_eq!(f.constant(), 1.0);
        assert_eq!(frame_coeffs(&f, &[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn single_vector_residual() {
        let f = TightFrame::from_parts(vec![1.0, 0.0], 2, FrameLabel::Custom);
        assert!((check_tight(&f) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(TightFrame::custom(vec![vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn planar_simplex() {
        let g = simplex_geometry(2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(g.vertex(i), g.vertex(j));
                let expected = if i == j { 1.0 } else { -0.5 };
                assert!((d - expected).abs() < 1e-12);
            }
        }
        let edges = g.edge_frame();
        assert_eq!(edges.len(), 6);
        assert!((edges.constant() - 3.0).abs() < 1e-15);
        assert!(check_tight(edges) < 1e-12);

        // x = v₁: coefficients on (1,2) and (1,3) are √3/2
        let c = frame_coeffs(edges, g.vertex(0)).unwrap();
        let half_root3 = 3f64.sqrt() / 2.0;
        assert!((c[g.edge_index(0, 1).unwrap()] - half_root3).abs() < 1e-12);
        assert!((c[g.edge_index(0, 2).unwrap()] - half_root3).abs() < 1e-12);
    }

    #[test]
    fn simplex_invariants() {
        for n in [2usize, 3, 10, 50] {
            let g = simplex_geometry(n).unwrap();
            let mut sum = vec![0.0; n];
            for v in g.vertices() {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
            }
            assert!(sum.iter().all(|s| s.abs() < 1e-12));
            for i in 0..=n {
                for j in 0..i {
                    assert!((dot(g.vertex(i), g.vertex(j)) + 1.0 / n as f64).abs() < 1e-12);
                }
            }
            for u in g.edge_frame().vectors() {
                assert!((dot(u, u) - 1.0).abs() < 1e-12);
            }
            assert!(check_tight(g.edge_frame()) < 1e-10);
        }
    }

    #[test]
    fn edge_index_round_trip() {
        let g = simplex_geometry(4).unwrap();
        for k in 0..g.edge_frame().len() {
            let (i, j) = g.edge_pair(k).unwrap();
            assert_eq!(g.edge_index(i, j), Some(k));
        }
        assert_eq!(g.edge_index(2, 2), None);
    }

    #[test]
    fn edge_reflection_swaps_vertices() {
        let n = 5;
        let g = simplex_geometry(n).unwrap();
        let u = Vector::new(g.edge_frame().vector(g.edge_index(1, 3).unwrap()).to_vec()).unwrap();
        for k in 0..=n {
            let v = Vector::new(g.vertex(k).to_vec()).unwrap();
            let r = reflect(&v, &u).unwrap();
            let target = match k {
                1 => 3,
                3 => 1,
                other => other,
            };
            for (a, b) in r.iter().zip(g.vertex(target)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reflect_rejects_non_unit() {
        let x = Vector::new(vec![1.0, 2.0]).unwrap();
        let u = Vector::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(reflect(&x, &u), Err(Error::Domain(_))));
        let e1 = Vector::basis(2, 0).unwrap();
        assert_eq!(reflect(&e1, &e1).unwrap().as_slice(), &[-1.0, 0.0]);
    }

    #[test]
    fn csv_round_trip() {
        let g = simplex_geometry(3).unwrap();
        let mut buf = Vec::new();
        g.edge_frame().write_csv(&mut buf).unwrap();
        let back = TightFrame::read_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), 12);
        assert_eq!(back.label(), &FrameLabel::Custom);
        assert!(check_tight(&back) < 1e-12);
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, n)
    }

    proptest! {
        #[test]
        fn parseval(x in vec_strategy(6)) {
            let frames = [standard_frame(6).unwrap(), simplex_geometry(6).unwrap().edge_frame().clone()];
            let norm2 = dot(&x, &x);
            for f in &frames {
                let c = frame_coeffs(f, &x).unwrap();
                let s: f64 = c.iter().map(|v| v * v).sum();
                prop_assert!((s - f.constant() * norm2).abs() <= 1e-9 * (1.0 + s));
            }
        }

        #[test]
        fn reflection_is_an_involutive_isometry(x in vec_strategy(5), u in vec_strategy(5)) {
            let un = dot(&u, &u).sqrt();
            prop_assume!(un > 1e-3);
            let u = Vector::new(u.iter().map(|v| v / un).collect()).unwrap();
            let x = Vector::new(x).unwrap();
            let once = reflect(&x, &u).unwrap();
            let twice = reflect(&once, &u).unwrap();
            prop_assert!((once.norm2() - x.norm2()).abs() <= 1e-12 * (1.0 + x.norm2()));
            for (a, b) in twice.iter().zip(x.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + x.norm2()));
            }
        }
    }
}
