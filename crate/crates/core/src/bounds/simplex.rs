//! Exact moments of the uniform regular simplex and its bounds.
//!
//! With `Y` uniform on `√((n+1)(n+2)) · conv{e₁, …, e_{n+1}}`, the
//! edge-frame coefficients of the simplex sample are `X₍ᵢⱼ₎ = (Yᵢ − Yⱼ)/√2`.

use crate::batch::Vector;
use crate::error::{domain, Error, Result};
use crate::frames::SimplexGeometry;

use super::frame::{bound_frame_general, BoundInputs, PairMoments};
use super::{BoundValue, Constants, DistanceKind};

/// `E Πᵢ Yᵢ^{rᵢ} = [(n+1)(n+2)]^{r/2} n! / (n+r)! · Πᵢ rᵢ!` for a
/// multi-index over the `n + 1` barycentric coordinates.
///
/// Evaluated as the product `Π_{k=1}^{r} √((n+1)(n+2))/(n+k)` times the
/// factorials, which neither overflows nor loses digits to cancellation.
pub fn simplex_y_moment(n: usize, r: &[u32]) -> Result<f64> {
    if n < 2 {
        return domain(format!("dimension must be >= 2, got {n}"));
    }
    if r.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            got: r.len(),
        });
    }
    let total: u32 = r.iter().sum();
    let nf = n as f64;
    let root = ((nf + 1.0) * (nf + 2.0)).sqrt();
    let mut value = 1.0;
    for k in 1..=total {
        value *= root / (nf + k as f64);
    }
    for &ri in r {
        for f in 2..=ri {
            value *= f as f64;
        }
    }
    Ok(value)
}

/// `c(n) = (n+1)(n+2)/((n+3)(n+4))`.
fn pair_constant(n: usize) -> f64 {
    let nf = n as f64;
    (nf + 1.0) * (nf + 2.0) / ((nf + 3.0) * (nf + 4.0))
}

/// `E[X₍ᵢⱼ₎² X₍ₖₗ₎²] = c(n) · {1, 3, 6}` by `|{i,j} ∩ {k,l}| ∈ {0, 1, 2}`.
/// Vertex indices are 0-based, in `0..=n`.
pub fn simplex_pair_moment(n: usize, (i, j): (usize, usize), (k, l): (usize, usize)) -> Result<f64> {
    if i == j || k == l {
        return domain("simplex edges need distinct endpoints");
    }
    if [i, j, k, l].iter().any(|&v| v > n) {
        return domain(format!("vertex index out of range for n = {n}"));
    }
    let overlap = [k, l].iter().filter(|v| **v == i || **v == j).count();
    let mult = [1.0, 3.0, 6.0][overlap];
    Ok(pair_constant(n) * mult)
}

/// `3√2 √((n+1)(n+2)) / (n+3)`, an upper bound on `E|X₍ᵢⱼ₎|³`.
pub fn simplex_third_moment_bound(n: usize) -> f64 {
    let nf = n as f64;
    3.0 * 2f64.sqrt() * ((nf + 1.0) * (nf + 2.0)).sqrt() / (nf + 3.0)
}

/// `Σ_{e,f} a_e a_f E[X_e² X_f²]` over ordered edges for symmetric weights
/// `a_(ij) = a_(ji)` laid out in edge-frame order, in O(m).
///
/// Splitting by overlap class gives `c(n) [S² + 2 Σ_v R_v² + 2 Σ_e a_e²]`
/// with `S = Σ_e a_e` and `R_v` the total weight of edges touching `v`.
pub(crate) fn simplex_weighted_pair_sum(n: usize, a: &[f64]) -> f64 {
    let mut touching = vec![0.0; n + 1];
    let mut s = 0.0;
    let mut s2 = 0.0;
    for (pos, &w) in a.iter().enumerate() {
        let i = pos / n;
        let r = pos % n;
        let j = if r < i { r } else { r + 1 };
        touching[i] += w;
        touching[j] += w;
        s += w;
        s2 += w * w;
    }
    let r2: f64 = touching.iter().map(|r| r * r).sum();
    pair_constant(n) * (s * s + 2.0 * r2 + 2.0 * s2)
}

fn vertex_cubes(theta: &Vector, geometry: &SimplexGeometry) -> Result<f64> {
    theta.ensure_unit(1e-9)?;
    let coeffs = geometry.vertex_coeffs(theta)?;
    let n = geometry.dim() as f64;
    let parseval: f64 = coeffs.iter().map(|c| c * c).sum();
    if (parseval - (n + 1.0) / n).abs() > 1e-9 {
        return domain(format!(
            "Σ⟨θ,vᵢ⟩² = {parseval}, expected (n+1)/n (vertex frame not tight?)"
        ));
    }
    Ok(coeffs.iter().map(|c| c.abs().powi(3)).sum())
}

/// `c1 √(Σᵢ |⟨θ, vᵢ⟩|³)` with a configurable `c1`.
pub fn bound_simplex(
    theta: &Vector,
    geometry: &SimplexGeometry,
    constants: &Constants,
) -> Result<BoundValue> {
    let cubes = vertex_cubes(theta, geometry)?;
    let c1 = constants.resolve("c1")?;
    Ok(
        BoundValue::new("simplex", DistanceKind::Kolmogorov, c1.value * cubes.sqrt())
            .term("vertex_cubes", cubes)
            .constant(c1),
    )
}

/// The simplex bound with every constant explicit: the tight-frame bound on
/// the edge frame, fed the exact pair moments and the closed-form third
/// moment bound.
pub fn bound_simplex_assembled(theta: &Vector, geometry: &SimplexGeometry) -> Result<BoundValue> {
    let cubes = vertex_cubes(theta, geometry)?;
    let n = geometry.dim();
    let inputs = BoundInputs::new(geometry.edge_frame(), theta, PairMoments::SimplexExact)?
        .with_third_abs(simplex_third_moment_bound(n));
    let mut b = bound_frame_general(&inputs)?;
    b.bound = "simplex_assembled".into();
    Ok(b.term("vertex_cubes", cubes))
}
