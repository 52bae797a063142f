//! Second-order forward-mode dual numbers.
//!
//! A [`Dual`] carries a value together with an optional gradient and an
//! optional dense Hessian with respect to a fixed set of seed variables.
//! Empty derivative storage stands for "identically zero", so constants and
//! value-only evaluation never allocate.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub val: f64,
    /// Gradient, length `n` or empty.
    pub grad: Vec<f64>,
    /// Row-major `n x n` Hessian or empty.
    pub hess: Vec<f64>,
}

impl Dual {
    pub fn constant(val: f64) -> Self {
        Dual {
            val,
            grad: Vec::new(),
            hess: Vec::new(),
        }
    }

    /// Seeds variable `index` of `n` for first-order propagation.
    pub fn variable(val: f64, index: usize, n: usize) -> Self {
        let mut grad = vec![0.0; n];
        grad[index] = 1.0;
        Dual {
            val,
            grad,
            hess: Vec::new(),
        }
    }

    /// Seeds variable `index` of `n` for second-order propagation.
    pub fn variable2(val: f64, index: usize, n: usize) -> Self {
        let mut grad = vec![0.0; n];
        grad[index] = 1.0;
        Dual {
            val,
            grad,
            hess: vec![0.0; n * n],
        }
    }

    pub fn nvars(&self) -> usize {
        self.grad.len()
    }

    pub fn grad_at(&self, i: usize) -> f64 {
        self.grad.get(i).copied().unwrap_or(0.0)
    }

    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        let n = self.grad.len();
        if self.hess.is_empty() {
            0.0
        } else {
            self.hess[i * n + j]
        }
    }

    /// Applies a scalar function given its value, first and second derivative
    /// at `self.val`.
    fn chain(&self, f: f64, df: f64, d2f: f64) -> Dual {
        let grad: Vec<f64> = self.grad.iter().map(|g| df * g).collect();
        let hess = if self.hess.is_empty() {
            Vec::new()
        } else {
            let n = self.grad.len();
            let mut h = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    h.push(df * self.hess[i * n + j] + d2f * (self.grad[i] * self.grad[j]));
                }
            }
            h
        };
        Dual { val: f, grad, hess }
    }

    pub fn sqrt(&self) -> Dual {
        let s = self.val.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.val))
    }

    pub fn exp(&self) -> Dual {
        let e = self.val.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Dual {
        let x = self.val;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn sin(&self) -> Dual {
        let (s, c) = self.val.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Dual {
        let (s, c) = self.val.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn powi(&self, k: i32) -> Dual {
        let x = self.val;
        match k {
            0 => Dual::constant(1.0),
            1 => self.clone(),
            _ => {
                let kf = k as f64;
                self.chain(
                    x.powi(k),
                    kf * x.powi(k - 1),
                    kf * (kf - 1.0) * x.powi(k - 2),
                )
            }
        }
    }

    /// `|x|`; only differentiable away from zero, callers guard the domain.
    pub fn abs(&self) -> Dual {
        let s = if self.val < 0.0 { -1.0 } else { 1.0 };
        self.chain(self.val.abs(), s, 0.0)
    }

    pub fn recip(&self) -> Dual {
        let x = self.val;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn square(&self) -> Dual {
        self * self
    }
}

fn zip_sum(a: &[f64], b: &[f64], sa: f64, sb: f64) -> Vec<f64> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => a.iter().map(|x| sa * x).collect(),
        (true, false) => b.iter().map(|x| sb * x).collect(),
        (false, false) => a.iter().zip(b).map(|(x, y)| sa * x + sb * y).collect(),
    }
}

impl Add for &Dual {
    type Output = Dual;
    fn add(self, rhs: &Dual) -> Dual {
        Dual {
            val: self.val + rhs.val,
            grad: zip_sum(&self.grad, &rhs.grad, 1.0, 1.0),
            hess: zip_sum(&self.hess, &rhs.hess, 1.0, 1.0),
        }
    }
}

impl Sub for &Dual {
    type Output = Dual;
    fn sub(self, rhs: &Dual) -> Dual {
        Dual {
            val: self.val - rhs.val,
            grad: zip_sum(&self.grad, &rhs.grad, 1.0, -1.0),
            hess: zip_sum(&self.hess, &rhs.hess, 1.0, -1.0),
        }
    }
}

impl Mul for &Dual {
    type Output = Dual;
    fn mul(self, rhs: &Dual) -> Dual {
        let grad = zip_sum(&self.grad, &rhs.grad, rhs.val, self.val);
        let mut hess = zip_sum(&self.hess, &rhs.hess, rhs.val, self.val);
        let both_have_grad = !self.grad.is_empty() && !rhs.grad.is_empty();
        let second_order = !self.hess.is_empty() || !rhs.hess.is_empty();
        if second_order && both_have_grad {
            let n = self.grad.len();
            if hess.is_empty() {
                hess = vec![0.0; n * n];
            }
            for i in 0..n {
                for j in 0..n {
                    // a_i b_j + b_i a_j is symmetric in (i, j) bit for bit
                    hess[i * n + j] +=
                        self.grad[i] * rhs.grad[j] + rhs.grad[i] * self.grad[j];
                }
            }
        }
        Dual {
            val: self.val * rhs.val,
            grad,
            hess,
        }
    }
}

impl Div for &Dual {
    type Output = Dual;
    fn div(self, rhs: &Dual) -> Dual {
        self * &rhs.recip()
    }
}

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            val: -self.val,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.iter().map(|h| -h).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Dual> for Dual {
            type Output = Dual;
            fn $m(self, rhs: Dual) -> Dual {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Dual> for Dual {
            type Output = Dual;
            fn $m(self, rhs: &Dual) -> Dual {
                (&self).$m(rhs)
            }
        }
        impl $tr<Dual> for &Dual {
            type Output = Dual;
            fn $m(self, rhs: Dual) -> Dual {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        -&self
    }
}

impl Add<f64> for &Dual {
    type Output = Dual;
    fn add(self, rhs: f64) -> Dual {
        Dual {
            val: self.val + rhs,
            grad: self.grad.clone(),
            hess: self.hess.clone(),
        }
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(mut self, rhs: f64) -> Dual {
        self.val += rhs;
        self
    }
}

impl Sub<f64> for &Dual {
    type Output = Dual;
    fn sub(self, rhs: f64) -> Dual {
        self + (-rhs)
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    fn sub(self, rhs: f64) -> Dual {
        self + (-rhs)
    }
}

impl Mul<f64> for &Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        Dual {
            val: self.val * rhs,
            grad: self.grad.iter().map(|g| g * rhs).collect(),
            hess: self.hess.iter().map(|h| h * rhs).collect(),
        }
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        &self * rhs
    }
}

impl AddAssign<&Dual> for Dual {
    fn add_assign(&mut self, rhs: &Dual) {
        *self = &*self + rhs;
    }
}

impl AddAssign<Dual> for Dual {
    fn add_assign(&mut self, rhs: Dual) {
        *self = &*self + &rhs;
    }
}

impl From<f64> for Dual {
    fn from(v: f64) -> Self {
        Dual::constant(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_second_order() {
        // f(x, y) = x * y at (2, 3)
        let x = Dual::variable2(2.0, 0, 2);
        let y = Dual::variable2(3.0, 1, 2);
        let f = &x * &y;
        assert_eq!(f.val, 6.0);
        assert_eq!(f.grad, vec![3.0, 2.0]);
        assert_eq!(f.hess, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn constants_do_not_allocate_derivatives() {
        let c = Dual::constant(2.0) * Dual::constant(4.0);
        assert!(c.grad.is_empty() && c.hess.is_empty());
        assert_eq!(c.val, 8.0);
    }

    #[test]
    fn cube_second_derivative() {
        let x = Dual::variable2(2.0, 0, 1);
        let f = x.powi(3);
        assert_eq!(f.val, 8.0);
        assert_eq!(f.grad[0], 12.0);
        assert_eq!(f.hess[0], 12.0);
    }

    #[test]
    fn quotient_and_transcendentals() {
        let x = Dual::variable2(0.7, 0, 1);
        let f = x.sin() / x.exp();
        // d/dx sin(x)e^{-x} = (cos x - sin x) e^{-x}
        let expected = (0.7f64.cos() - 0.7f64.sin()) * (-0.7f64).exp();
        assert!((f.grad[0] - expected).abs() < 1e-14);
        // second derivative: -2 cos(x) e^{-x}
        let expected2 = -2.0 * 0.7f64.cos() * (-0.7f64).exp();
        assert!((f.hess[0] - expected2).abs() < 1e-14);
    }
}
