//! Gauss–Legendre rules on the reference interval `[0, 1]`.

/// A quadrature rule: `(node, weight)` pairs on `[0, 1]`, weights summing to 1.
#[derive(Debug, Clone, Copy)]
pub struct Rule<const P: usize> {
    pub nodes: [f64; P],
    pub weights: [f64; P],
}

impl<const P: usize> Rule<P> {
    /// Integrate `g` over `[lo, hi]`.
    #[inline]
    pub fn integrate(&self, lo: f64, hi: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let h = hi - lo;
        let mut acc = 0.0;
        for q in 0..P {
            acc += self.weights[q] * g(lo + h * self.nodes[q]);
        }
        acc * h
    }
}

const SQRT_3_5: f64 = 0.774_596_669_241_483_4;

/// 3-point rule, exact for degree ≤ 5.
pub const GAUSS3: Rule<3> = Rule {
    nodes: [0.5 * (1.0 - SQRT_3_5), 0.5, 0.5 * (1.0 + SQRT_3_5)],
    weights: [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
};

// Nodes ±sqrt(5 ∓ 2 sqrt(10/7))/3 on [-1, 1].
const G5_X1: f64 = 0.538_469_310_105_683_1;
const G5_X2: f64 = 0.906_179_845_938_664;
const G5_W0: f64 = 0.568_888_888_888_888_9;
const G5_W1: f64 = 0.478_628_670_499_366_5;
const G5_W2: f64 = 0.236_926_885_056_189_1;

/// 5-point rule, exact for degree ≤ 9.
pub const GAUSS5: Rule<5> = Rule {
    nodes: [
        0.5 * (1.0 - G5_X2),
        0.5 * (1.0 - G5_X1),
        0.5,
        0.5 * (1.0 + G5_X1),
        0.5 * (1.0 + G5_X2),
    ],
    weights: [
        0.5 * G5_W2,
        0.5 * G5_W1,
        0.5 * G5_W0,
        0.5 * G5_W1,
        0.5 * G5_W2,
    ],
};

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_error<const P: usize>(rule: &Rule<P>, degree: i32) -> f64 {
        let got = rule.integrate(0.3, 1.7, |x| x.powi(degree));
        let exact = (1.7f64.powi(degree + 1) - 0.3f64.powi(degree + 1)) / f64::from(degree + 1);
        (got - exact).abs()
    }

    #[test]
    fn weights_sum_to_one() {
        assert!((GAUSS3.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((GAUSS5.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_up_to_design_degree() {
        for d in 0..=5 {
            assert!(monomial_error(&GAUSS3, d) < 1e-13, "gauss3 degree {d}");
        }
        for d in 0..=9 {
            assert!(monomial_error(&GAUSS5, d) < 1e-12, "gauss5 degree {d}");
        }
        assert!(monomial_error(&GAUSS3, 6) > 1e-8);
    }
}
