//! Classical fixed-step fourth-order Runge–Kutta over any state that forms a
//! real vector space.

use num_complex::Complex64;

pub trait OdeState: Clone {
    /// `self += a * other`
    fn add_scaled(&mut self, other: &Self, a: f64);
}

impl OdeState for Vec<f64> {
    fn add_scaled(&mut self, other: &Self, a: f64) {
        for (s, o) in self.iter_mut().zip(other) {
            *s += a * o;
        }
    }
}

impl OdeState for Vec<Complex64> {
    fn add_scaled(&mut self, other: &Self, a: f64) {
        for (s, o) in self.iter_mut().zip(other) {
            *s += a * o;
        }
    }
}

/// One RK4 step of `dy/dt = f(t, y)`. The right-hand side may fail, in
/// which case the step is abandoned.
pub fn rk4_step<S, E>(y: &S, t: f64, h: f64, mut f: impl FnMut(f64, &S) -> Result<S, E>) -> Result<S, E>
where
    S: OdeState,
{
    let k1 = f(t, y)?;
    let mut stage = y.clone();
    stage.add_scaled(&k1, 0.5 * h);
    let k2 = f(t + 0.5 * h, &stage)?;
    let mut stage = y.clone();
    stage.add_scaled(&k2, 0.5 * h);
    let k3 = f(t + 0.5 * h, &stage)?;
    let mut stage = y.clone();
    stage.add_scaled(&k3, h);
    let k4 = f(t + h, &stage)?;
    let mut next = y.clone();
    next.add_scaled(&k1, h / 6.0);
    next.add_scaled(&k2, h / 3.0);
    next.add_scaled(&k3, h / 3.0);
    next.add_scaled(&k4, h / 6.0);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_is_fourth_order() {
        let run = |h: f64| {
            let mut y = vec![1.0];
            let steps = (1.0 / h).round() as usize;
            for n in 0..steps {
                y = rk4_step(&y, n as f64 * h, h, |_, y: &Vec<f64>| Ok::<_, ()>(y.clone())).unwrap();
            }
            (y[0] - std::f64::consts::E).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn failing_rhs_aborts_step() {
        let y = vec![1.0];
        let r = rk4_step(&y, 0.0, 0.1, |t, _y: &Vec<f64>| if t > 0.0 { Err("stop") } else { Ok(vec![1.0]) });
        assert_eq!(r, Err("stop"));
    }
}
