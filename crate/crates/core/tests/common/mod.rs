#![allow(dead_code)]

/// Adaptive Gauss-Kronrod (7, 15) quadrature.
pub fn gauss_kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const XK: [f64; 8] = [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ];
    const WK: [f64; 8] = [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ];
    const WG: [f64; 4] = [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ];
    fn rule(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WK[7] * fc;
        let mut g = WG[3] * fc;
        for j in 0..7 {
            let s = f(c - r * XK[j]) + f(c + r * XK[j]);
            k += WK[j] * s;
            if j % 2 == 1 {
                g += WG[j / 2] * s;
            }
        }
        (k * r, ((k - g) * r).abs())
    }
    // global refinement of the interval with the largest error estimate
    let mut parts = vec![(a, b, rule(f, a, b))];
    for _ in 0..4000 {
        let total: f64 = parts.iter().map(|p| p.2 .1).sum();
        if total <= tol {
            break;
        }
        let (w, _) = parts
            .iter()
            .enumerate()
            .fold((0, -1.0), |m, (k, p)| if p.2 .1 > m.1 { (k, p.2 .1) } else { m });
        let (lo, hi, _) = parts.swap_remove(w);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, rule(f, lo, mid)));
        parts.push((mid, hi, rule(f, mid, hi)));
    }
    parts.iter().map(|p| p.2 .0).sum()
}

/// `PV ∫ (u(x) - u(y)) |x - y|^{-1-2s} dy` for `u = (1 - y^2)_+^s`, `|x| < 1`.
pub fn bump_oracle(x: f64, s: f64) -> f64 {
    let u = |y: f64| (1.0 - y * y).max(0.0).powf(s);
    let ux = u(x);
    let w = 1.0 - x * x;
    let u2 = -2.0 * s * w.powf(s - 1.0) + 4.0 * s * (s - 1.0) * x * x * w.powf(s - 2.0);
    let (a, b) = (1.0 - x.abs(), 1.0 + x.abs());
    let t0: f64 = 1e-4;
    let integrand = |t: f64| (2.0 * ux - u(x + t) - u(x - t)) * t.powf(-1.0 - 2.0 * s);
    // second-order Taylor on [0, t0]; the next term is below 1e-8
    let head = -u2 * t0.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    // t = hi - (hi - lo) v^4 smooths the (hi - t)^s endpoint behaviour
    let toward = |lo: f64, hi: f64| {
        let g = move |v: f64| 4.0 * (hi - lo) * v.powi(3) * integrand(hi - (hi - lo) * v.powi(4));
        gauss_kronrod(&g, 0.0, 1.0, 1e-11)
    };
    let body = toward(t0, a) + if b > a { toward(a, b) } else { 0.0 };
    let tail = ux * b.powf(-2.0 * s) / s;
    head + body + tail
}
