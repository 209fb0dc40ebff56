//! Boundary-value polynomials used to connect Frenet states.

/// Quintic in time matching position, velocity and acceleration at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticPolynomial {
    c: [f64; 6],
}

impl QuinticPolynomial {
    pub fn new(x0: f64, v0: f64, a0: f64, x1: f64, v1: f64, a1: f64, duration: f64) -> Self {
        let t = duration;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let c0 = x0;
        let c1 = v0;
        let c2 = 0.5 * a0;
        // closed-form solution of the 3x3 end-condition system
        let h0 = x1 - (c0 + c1 * t + c2 * t2);
        let h1 = v1 - (c1 + 2.0 * c2 * t);
        let h2 = a1 - 2.0 * c2;
        let c3 = (10.0 * h0 - 4.0 * h1 * t + 0.5 * h2 * t2) / t3;
        let c4 = (-15.0 * h0 + 7.0 * h1 * t - h2 * t2) / t4;
        let c5 = (6.0 * h0 - 3.0 * h1 * t + 0.5 * h2 * t2) / t5;
        Self {
            c: [c0, c1, c2, c3, c4, c5],
        }
    }

    pub fn position(&self, t: f64) -> f64 {
        let c = &self.c;
        c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))))
    }

    pub fn velocity(&self, t: f64) -> f64 {
        let c = &self.c;
        c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])))
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        let c = &self.c;
        2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]))
    }

    pub fn jerk(&self, t: f64) -> f64 {
        let c = &self.c;
        6.0 * c[3] + t * (24.0 * c[4] + t * 60.0 * c[5])
    }
}

/// Quartic in time matching position, velocity, acceleration at the start and
/// velocity, acceleration at the end (velocity keeping).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticPolynomial {
    c: [f64; 5],
}

impl QuarticPolynomial {
    pub fn new(x0: f64, v0: f64, a0: f64, v1: f64, a1: f64, duration: f64) -> Self {
        let t = duration;
        let t2 = t * t;
        let c2 = 0.5 * a0;
        let h1 = v1 - (v0 + 2.0 * c2 * t);
        let h2 = a1 - 2.0 * c2;
        let c3 = (3.0 * h1 - h2 * t) / (3.0 * t2);
        let c4 = (-2.0 * h1 + h2 * t) / (4.0 * t2 * t);
        Self {
            c: [x0, v0, c2, c3, c4],
        }
    }

    pub fn position(&self, t: f64) -> f64 {
        let c = &self.c;
        c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * c[4])))
    }

    pub fn velocity(&self, t: f64) -> f64 {
        let c = &self.c;
        c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * 4.0 * c[4]))
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        let c = &self.c;
        2.0 * c[2] + t * (6.0 * c[3] + t * 12.0 * c[4])
    }

    pub fn jerk(&self, t: f64) -> f64 {
        let c = &self.c;
        6.0 * c[3] + t * 24.0 * c[4]
    }
}
