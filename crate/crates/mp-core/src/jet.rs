//! Truncated Taylor ("jet") arithmetic.
//!
//! A jet holds the coefficients of a Taylor expansion around a point; pushing
//! one through arithmetic and `exp` yields exact derivative towers for the
//! bump-based test-function families and the mollifier, where hand-written
//! chain rules get unwieldy past the second derivative.

/// Highest derivative order a jet can carry.
pub const MAX_ORDER: usize = 11;

/// Taylor coefficients `c[k] = f^{(k)}(x0) / k!` up to `order`.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    c: [f64; MAX_ORDER + 1],
    order: usize,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order exceeds MAX_ORDER");
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = value;
        Jet { c, order }
    }

    /// The identity function `t ↦ t` expanded at `t0`.
    pub fn variable(t0: f64, order: usize) -> Self {
        let mut jet = Self::constant(t0, order);
        if order >= 1 {
            jet.c[1] = 1.0;
        }
        jet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `f^{(k)}(x0)`, recovered from the k-th coefficient.
    pub fn derivative(&self, k: usize) -> f64 {
        assert!(k <= self.order);
        let mut factorial = 1.0;
        for j in 1..=k {
            factorial *= j as f64;
        }
        self.c[k] * factorial
    }

    pub fn add(&self, rhs: &Jet) -> Jet {
        let mut out = *self;
        for k in 0..=self.order {
            out.c[k] += rhs.c[k];
        }
        out
    }

    pub fn sub(&self, rhs: &Jet) -> Jet {
        let mut out = *self;
        for k in 0..=self.order {
            out.c[k] -= rhs.c[k];
        }
        out
    }

    pub fn scale(&self, k: f64) -> Jet {
        let mut out = *self;
        for c in out.c.iter_mut().take(self.order + 1) {
            *c *= k;
        }
        out
    }

    pub fn mul(&self, rhs: &Jet) -> Jet {
        let mut out = Jet::constant(0.0, self.order);
        for k in 0..=self.order {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.c[j] * rhs.c[k - j];
            }
            out.c[k] = acc;
        }
        out
    }

    /// Division by a jet with nonzero leading coefficient.
    pub fn div(&self, rhs: &Jet) -> Jet {
        debug_assert!(rhs.c[0] != 0.0, "jet division by zero leading term");
        let mut out = Jet::constant(0.0, self.order);
        for k in 0..=self.order {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= rhs.c[j] * out.c[k - j];
            }
            out.c[k] = acc / rhs.c[0];
        }
        out
    }

    /// `exp` of the jet via the standard convolution recurrence.
    pub fn exp(&self) -> Jet {
        let mut out = Jet::constant(0.0, self.order);
        out.c[0] = crate::fm::exp(self.c[0]);
        for k in 1..=self.order {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (j as f64) * self.c[j] * out.c[k - j];
            }
            out.c[k] = acc / k as f64;
        }
        out
    }

    /// Reciprocal `1 / self`.
    pub fn recip(&self) -> Jet {
        Jet::constant(1.0, self.order).div(self)
    }
}

/// Jet of the C^∞ ramp `t ↦ e^{-1/t}` for `t > 0`, identically zero for
/// `t <= 0`. Smooth across the joint: all derivatives vanish at `t = 0+`.
pub fn ramp_jet(t: &Jet) -> Jet {
    if t.value() <= 0.0 {
        return Jet::constant(0.0, t.order());
    }
    t.recip().scale(-1.0).exp()
}

/// Jet of the smooth step: 0 for `t <= 0`, 1 for `t >= 1`, and
/// `g(t) / (g(t) + g(1-t))` with `g(t) = e^{-1/t}` in between.
pub fn smooth_step_jet(t: &Jet) -> Jet {
    if t.value() <= 0.0 {
        return Jet::constant(0.0, t.order());
    }
    if t.value() >= 1.0 {
        return Jet::constant(1.0, t.order());
    }
    let g = ramp_jet(t);
    let one_minus = Jet::constant(1.0, t.order()).sub(t);
    let g_mirror = ramp_jet(&one_minus);
    g.div(&g.add(&g_mirror))
}

/// Convenience scalar version of the smooth step.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let g = crate::fm::exp(-1.0 / t);
        let h = crate::fm::exp(-1.0 / (1.0 - t));
        g / (g + h)
    }
}
