//! Gauss–Legendre rules mapped onto the unit interval.

use gauss_quad::legendre::GaussLegendre;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point rule on `[0,1]`, exact for polynomials of degree `2n-1`.
    pub fn unit(n: usize) -> Self {
        assert!(n > 0, "quadrature rule needs at least one node");
        let rule = GaussLegendre::new(n.try_into().expect("n > 0"));
        let mut pairs: Vec<(f64, f64)> =
            rule.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        GaussRule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over `[a,b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = b - a;
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(a + h * x)).sum::<f64>() * h
    }

    /// Nodes and weights on `[a,b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = b - a;
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (a + h * x, w * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_degree_2n_minus_1() {
        for n in 1..8 {
            let q = GaussRule::unit(n);
            let wsum: f64 = q.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for k in 0..(2 * n) {
                let v = q.integrate(0.0, 1.0, |x| x.powi(k as i32));
                assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn nodes_sorted_inside_interval() {
        let q = GaussRule::unit(10);
        assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(q.nodes[0] > 0.0 && q.nodes[9] < 1.0);
    }
}
