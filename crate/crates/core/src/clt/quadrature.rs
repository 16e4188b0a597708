//! Gauss-Legendre rules on [-1, 1] and composite integration helpers.

/// Nodes and weights of the n-point rule, by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
            x = 0.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        weights[0] = 2.0;
    }
    (nodes, weights)
}

/// Fixed rule reused across many integrals.
#[derive(Debug, Clone)]
pub struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Rule { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }

    /// Composite rule over `panels` equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels).map(|p| self.integrate(a + p as f64 * h, a + (p + 1) as f64 * h, &mut f)).sum()
    }

    /// Doubles the panel count until two successive estimates agree to
    /// `rel_tol` or `max_panels` is reached.
    pub fn adaptive(
        &self,
        a: f64,
        b: f64,
        rel_tol: f64,
        max_panels: usize,
        mut f: impl FnMut(f64) -> f64,
    ) -> f64 {
        let mut panels = 2;
        let mut prev = self.composite(a, b, panels, &mut f);
        while panels < max_panels {
            panels *= 2;
            let next = self.composite(a, b, panels, &mut f);
            if (next - prev).abs() <= rel_tol * next.abs() {
                return next;
            }
            prev = next;
        }
        prev
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_are_symmetric() {
        for n in [1usize, 2, 3, 7, 20, 40] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n = {n}");
            for i in 0..n {
                assert!((x[i] + x[n - 1 - i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let r = Rule::new(5);
        for d in 0..10 {
            let got = r.integrate(0.0, 2.0, |x| x.powi(d));
            let want = 2f64.powi(d + 1) / (d + 1) as f64;
            assert!((got - want).abs() < 1e-12 * want, "degree {d}");
        }
    }

    #[test]
    fn adaptive_handles_a_kink() {
        let r = Rule::new(16);
        let got = r.adaptive(-1.0, 2.0, 1e-12, 4096, |x: f64| x.abs().powi(3));
        assert!((got - (0.25 + 4.0)).abs() < 1e-9);
    }
}
