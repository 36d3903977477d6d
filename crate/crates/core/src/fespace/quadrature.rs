/// Quadrature rule on a reference simplex. Points are barycentric
/// coordinates (unused trailing entries are zero) and the weights sum to
/// one, so an integral over a physical simplex is `measure * Σ w f(x_q)`.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl SimplexRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Collapsed-coordinate (conical product) rule on the `dim`-simplex that
/// integrates polynomials of total degree `degree` exactly.
pub fn simplex_rule(dim: usize, degree: usize) -> SimplexRule {
    assert!((1..=3).contains(&dim), "simplex dimension {dim}");
    let n = (degree + dim).div_ceil(2).max(1);
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            for i in 0..n {
                points.push([1.0 - x[i], x[i], 0.0, 0.0]);
                weights.push(w[i]);
            }
        }
        2 => {
            for i in 0..n {
                for j in 0..n {
                    let (u, v) = (x[i], x[j]);
                    let (px, py) = (u * (1.0 - v), v);
                    points.push([1.0 - px - py, px, py, 0.0]);
                    // reference area 1/2
                    weights.push(2.0 * w[i] * w[j] * (1.0 - v));
                }
            }
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let (u, v, s) = (x[i], x[j], x[k]);
                        let px = u * (1.0 - v) * (1.0 - s);
                        let py = v * (1.0 - s);
                        let pz = s;
                        points.push([1.0 - px - py - pz, px, py, pz]);
                        // reference volume 1/6
                        weights.push(6.0 * w[i] * w[j] * w[k] * (1.0 - v) * (1.0 - s) * (1.0 - s));
                    }
                }
            }
        }
    }
    SimplexRule { points, weights }
}
