use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Totally right-skewed stable law with log-characteristic function
/// `-b |t|^alpha (1 + i sign(t) f_alpha(t))`, where
/// `f_alpha(t) = -tan(pi alpha / 2)` for `alpha != 1` and
/// `f_1(t) = (2 / pi) log |t|`.
///
/// In the Samorodnitsky-Taqqu parametrization `S_alpha(scale, skew, shift)`
/// this is `S_alpha(b^(1/alpha), 1, 0)` for `alpha != 1` and `S_1(b, 1, 0)`:
/// matching `-scale^alpha |t|^alpha (1 - i skew sign(t) tan(pi alpha / 2))`
/// term by term gives `scale^alpha = b`, `skew = 1`. At `alpha = 2` the law
/// is `N(0, 2b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableLaw {
    pub alpha: f64,
    pub b: f64,
}

impl StableLaw {
    pub fn new(alpha: f64, b: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidLaw(format!("stable index {alpha} outside (0, 2]")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidLaw(format!("stable scale {b} must be positive")));
        }
        Ok(StableLaw { alpha, b })
    }

    /// Real and imaginary parts of the log-characteristic function at `t`.
    pub fn log_cf(&self, t: f64) -> (f64, f64) {
        if t == 0.0 {
            return (0.0, 0.0);
        }
        let f = if self.alpha == 1.0 {
            2.0 / PI * t.abs().ln()
        } else {
            -(PI * self.alpha / 2.0).tan()
        };
        let m = self.b * t.abs().powf(self.alpha);
        (-m, -m * t.signum() * f)
    }

    /// Scale in the `S_alpha(scale, 1, 0)` parametrization.
    pub fn st_scale(&self) -> f64 {
        if self.alpha == 1.0 {
            self.b
        } else {
            self.b.powf(1.0 / self.alpha)
        }
    }
}

impl Distribution<f64> for StableLaw {
    /// Chambers-Mallows-Stuck with skewness 1 (Weron's form for `S_alpha(1, 1, 0)`),
    /// then scaled to `b`.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = Open01.sample(rng);
        let v = PI * (u - 0.5);
        let w: f64 = Exp1.sample(rng);
        let alpha = self.alpha;
        let scale = self.st_scale();
        if alpha == 1.0 {
            let shifted = FRAC_PI_2 + v;
            let x = 2.0 / PI * (shifted * v.tan() - (FRAC_PI_2 * w * v.cos() / shifted).ln());
            scale * x + 2.0 / PI * scale * scale.ln()
        } else {
            let zeta = (PI * alpha / 2.0).tan();
            let shift = zeta.atan() / alpha;
            let factor = (1.0 + zeta * zeta).powf(1.0 / (2.0 * alpha));
            let x = factor * (alpha * (v + shift)).sin() / v.cos().powf(1.0 / alpha)
                * ((v - alpha * (v + shift)).cos() / w).powf((1.0 - alpha) / alpha);
            scale * x
        }
    }
}
