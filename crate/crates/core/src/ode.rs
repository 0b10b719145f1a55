//! Classical fourth-order Runge–Kutta for small fixed-size systems.

pub fn rk4_step<const D: usize, F>(f: &F, t: f64, z: [f64; D], dt: f64) -> [f64; D]
where
    F: Fn(f64, [f64; D]) -> [f64; D],
{
    let add = |a: [f64; D], b: [f64; D], s: f64| {
        let mut out = a;
        for i in 0..D {
            out[i] += s * b[i];
        }
        out
    };
    let k1 = f(t, z);
    let k2 = f(t + 0.5 * dt, add(z, k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, add(z, k2, 0.5 * dt));
    let k4 = f(t + dt, add(z, k3, dt));
    let mut out = z;
    for i in 0..D {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_on_oscillator() {
        let f = |_t: f64, z: [f64; 2]| [z[1], -z[0]];
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut z = [1.0, 0.0];
            for k in 0..n {
                z = rk4_step(&f, k as f64 * dt, z, dt);
            }
            (z[0] - 1f64.cos()).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }
}
