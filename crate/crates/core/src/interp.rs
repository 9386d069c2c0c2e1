//! Tensor-product Lagrange interpolation on half-plane grids.
//!
//! The `ρ` direction is interpolated in `ρ²`. Axisymmetric fields are
//! smooth functions of `ρ²`, so this keeps the evenness at the axis and
//! gives `∂ρ f = 2ρ ∂f/∂(ρ²)` the correct `O(ρ)` behaviour there.

/// Index of the first node of the 4-point stencil around `x`.
fn stencil_start(nodes: &[f64], x: f64) -> usize {
    let n = nodes.len();
    let k = nodes.partition_point(|&t| t <= x).saturating_sub(1);
    k.saturating_sub(1).min(n.saturating_sub(4))
}

/// Lagrange weights for value and first derivative at `x` on four nodes.
fn weights(t: &[f64], x: f64) -> ([f64; 4], [f64; 4]) {
    let mut w = [0.0; 4];
    let mut dw = [0.0; 4];
    for i in 0..4 {
        let mut den = 1.0;
        for j in 0..4 {
            if j != i {
                den *= t[i] - t[j];
            }
        }
        let mut num = 1.0;
        let mut dnum = 0.0;
        for j in 0..4 {
            if j == i {
                continue;
            }
            // product rule for Π (x − t_j)
            dnum = dnum * (x - t[j]) + num;
            num *= x - t[j];
        }
        w[i] = num / den;
        dw[i] = dnum / den;
    }
    (w, dw)
}

/// `(f, ∂ρ f, ∂z f)` at `(rho, z)` for nodal values `f` stored row by row
/// in `z` (index `j·n_rho + i`).
pub fn eval(rho_nodes: &[f64], z_nodes: &[f64], f: &[f64], rho: f64, z: f64) -> (f64, f64, f64) {
    let nr = rho_nodes.len();
    let i0 = stencil_start(rho_nodes, rho);
    let j0 = stencil_start(z_nodes, z);
    let s: Vec<f64> = rho_nodes[i0..i0 + 4].iter().map(|r| r * r).collect();
    let (wr, mut dwr) = weights(&s, rho * rho);
    for d in &mut dwr {
        *d *= 2.0 * rho;
    }
    let (wz, dwz) = weights(&z_nodes[j0..j0 + 4], z);
    let (mut val, mut dr, mut dz) = (0.0, 0.0, 0.0);
    for (b, (&a, &da)) in wz.iter().zip(&dwz).enumerate() {
        let row = &f[(j0 + b) * nr + i0..(j0 + b) * nr + i0 + 4];
        let (mut s, mut ds) = (0.0, 0.0);
        for c in 0..4 {
            s += wr[c] * row[c];
            ds += dwr[c] * row[c];
        }
        val += a * s;
        dr += a * ds;
        dz += da * s;
    }
    (val, dr, dz)
}
