// Truncated Laurent series in a local variable `v`, with the exponent window
// tracked explicitly so products and quotients only report orders they know.

use crate::eqcore::C;

/// How `v` relates to `z`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Frame {
    /// `z = p + v`.
    Pole(C),
    /// `v = z^(-1/d)`, so `z = v^(-d)`.
    Infinity(i32),
}

#[derive(Debug, Clone)]
pub(crate) struct Ls {
    pub lo: i32,
    pub c: Vec<C>,
}

impl Ls {
    pub fn hi(&self) -> i32 {
        self.lo + self.c.len() as i32 - 1
    }

    pub fn zeros(lo: i32, hi: i32) -> Ls {
        Ls { lo, c: vec![C::new(0.0, 0.0); (hi - lo + 1).max(0) as usize] }
    }

    pub fn monomial(a: C, e: i32, hi: i32) -> Ls {
        let mut s = Ls::zeros(e, hi.max(e));
        s.c[0] = a;
        s
    }

    pub fn at(&self, e: i32) -> C {
        if e < self.lo || e > self.hi() {
            C::new(0.0, 0.0)
        } else {
            self.c[(e - self.lo) as usize]
        }
    }

    fn combine(&self, o: &Ls, sign: f64) -> Ls {
        let lo = self.lo.min(o.lo);
        let hi = self.hi().min(o.hi());
        let mut r = Ls::zeros(lo, hi);
        for e in lo..=hi {
            r.c[(e - lo) as usize] = self.at(e) + sign * o.at(e);
        }
        r
    }

    pub fn add(&self, o: &Ls) -> Ls {
        self.combine(o, 1.0)
    }

    pub fn sub(&self, o: &Ls) -> Ls {
        self.combine(o, -1.0)
    }

    pub fn scale(&self, a: C) -> Ls {
        Ls { lo: self.lo, c: self.c.iter().map(|x| x * a).collect() }
    }

    pub fn mul(&self, o: &Ls) -> Ls {
        let lo = self.lo + o.lo;
        let hi = (self.lo + o.hi()).min(self.hi() + o.lo);
        let mut r = Ls::zeros(lo, hi);
        let n = r.c.len();
        for (i, a) in self.c.iter().enumerate() {
            if *a == C::new(0.0, 0.0) {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                if i + j >= n {
                    break;
                }
                r.c[i + j] += a * b;
            }
        }
        r
    }

    pub fn powi(&self, n: u32) -> Ls {
        let mut r = self.clone();
        for _ in 1..n {
            r = r.mul(self);
        }
        r
    }

    /// Reciprocal; the lowest coefficient must be nonzero.
    pub fn inv(&self) -> Ls {
        let a0 = self.c[0];
        let n = self.c.len();
        let mut r = vec![C::new(0.0, 0.0); n];
        r[0] = 1.0 / a0;
        for k in 1..n {
            let mut s = C::new(0.0, 0.0);
            for j in 1..=k {
                s += self.c[j] * r[k - j];
            }
            r[k] = -s / a0;
        }
        Ls { lo: -self.lo, c: r }
    }

    /// `d/dz` in the given frame.
    pub fn deriv(&self, frame: Frame) -> Ls {
        match frame {
            Frame::Pole(_) => Ls {
                lo: self.lo - 1,
                c: self.c.iter().enumerate().map(|(i, a)| a * (self.lo + i as i32) as f64).collect(),
            },
            Frame::Infinity(d) => Ls {
                lo: self.lo + d,
                c: self
                    .c
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * (-((self.lo + i as i32) as f64) / d as f64))
                    .collect(),
            },
        }
    }

    pub fn truncate(&self, hi: i32) -> Ls {
        let keep = (hi - self.lo + 1).clamp(0, self.c.len() as i32) as usize;
        Ls { lo: self.lo, c: self.c[..keep].to_vec() }
    }
}

/// `z` itself as a series, known through `hi`.
pub(crate) fn z_series(frame: Frame, hi: i32) -> Ls {
    match frame {
        Frame::Pole(p) => {
            let mut s = Ls::zeros(0, hi.max(1));
            s.c[0] = p;
            s.c[1] = C::new(1.0, 0.0);
            s
        }
        Frame::Infinity(d) => Ls::monomial(C::new(1.0, 0.0), -d, hi),
    }
}

pub(crate) fn constant(a: C, hi: i32) -> Ls {
    Ls::monomial(a, 0, hi)
}

/// Order-by-order solve of `F[w] = 0` for `w = sum c_k v^(lo+k)`, `k = 0..=n`.
///
/// The coefficient `c_k` first enters the residual linearly at order
/// `F.lo + k`; `c_k` is chosen to cancel it.  At a resonance the linear factor
/// vanishes and the prescribed free value is used instead.
pub(crate) fn solve_orders<F>(lo: i32, c0: C, n: usize, resonance: Option<(usize, C)>, f: F) -> Ls
where
    F: Fn(&Ls) -> Ls,
{
    let hi = lo + n as i32;
    let mut w = Ls::zeros(lo, hi);
    w.c[0] = c0;
    for k in 1..=n {
        if let Some((kr, h)) = resonance {
            if k == kr {
                w.c[k] = h;
                continue;
            }
        }
        w.c[k] = C::new(0.0, 0.0);
        let r0 = f(&w);
        let e = r0.lo + k as i32;
        w.c[k] = C::new(1.0, 0.0);
        let r1 = f(&w);
        let jac = r1.at(e) - r0.at(e);
        w.c[k] = if jac.norm() == 0.0 { C::new(0.0, 0.0) } else { -r0.at(e) / jac };
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_of_geometric_series() {
        // 1 - v has reciprocal 1 + v + v^2 + ...
        let s = Ls { lo: 0, c: vec![C::new(1.0, 0.0), C::new(-1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)] };
        let r = s.inv();
        assert!(r.c.iter().all(|a| (a - C::new(1.0, 0.0)).norm() < 1e-15));
        let t = Ls { lo: -1, c: vec![C::new(2.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)] };
        assert_eq!(t.inv().lo, 1);
        assert_eq!(t.inv().c[0], C::new(0.5, 0.0));
    }

    #[test]
    fn product_window() {
        let a = Ls::zeros(-2, 3);
        let b = Ls::zeros(1, 4);
        let p = a.mul(&b);
        assert_eq!(p.lo, -1);
        assert_eq!(p.hi(), 2);
    }

    #[test]
    fn derivative_at_infinity() {
        // z^(1/2) = v^-1 with v = z^(-1/2); d/dz = (1/2) z^(-1/2) = v/2.
        let s = Ls::monomial(C::new(1.0, 0.0), -1, 4);
        let d = s.deriv(Frame::Infinity(2));
        assert_eq!(d.lo, 1);
        assert_eq!(d.c[0], C::new(0.5, 0.0));
    }
}
