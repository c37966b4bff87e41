//! Two-dimensional Nelder-Mead minimization.

/// Result of [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub point: [f64; 2],
    pub value: f64,
    pub evaluations: usize,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Counted<F> {
    f: F,
    budget: usize,
    used: usize,
    best: ([f64; 2], f64),
}

impl<F: FnMut([f64; 2]) -> f64> Counted<F> {
    fn eval(&mut self, p: [f64; 2]) -> Option<f64> {
        if self.used >= self.budget {
            return None;
        }
        self.used += 1;
        let v = (self.f)(p);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        if v < self.best.1 || self.used == 1 {
            self.best = (p, v);
        }
        Some(v)
    }
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Minimizes `f` starting from the simplex `start, start+(1,0), start+(0,1)`.
///
/// Stops when the spread of vertex values drops below `tol` or after
/// `budget` evaluations, whichever comes first, and returns the best point
/// ever evaluated. Non-finite values count as `+∞`. A `budget` below 3 is
/// raised to 3.
pub fn minimize<F: FnMut([f64; 2]) -> f64>(f: F, start: [f64; 2], budget: usize, tol: f64) -> Minimum {
    let mut c = Counted {
        f,
        budget: budget.max(3),
        used: 0,
        best: (start, f64::INFINITY),
    };
    let mut simplex: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
    for p in [start, [start[0] + 1.0, start[1]], [start[0], start[1] + 1.0]] {
        let v = c.eval(p).expect("budget covers the initial simplex");
        simplex.push((p, v));
    }

    'search: loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[2].1);
        let spread = if lo == hi { 0.0 } else { hi - lo };
        if spread < tol {
            break;
        }
        let centroid = lerp(simplex[0].0, simplex[1].0, 0.5);
        let worst = simplex[2];

        let xr = lerp(centroid, worst.0, -REFLECT);
        let Some(fr) = c.eval(xr) else { break };
        if fr < simplex[0].1 {
            let xe = lerp(centroid, worst.0, -EXPAND);
            let Some(fe) = c.eval(xe) else {
                simplex[2] = (xr, fr);
                break;
            };
            simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[1].1 {
            simplex[2] = (xr, fr);
            continue;
        }
        // Contraction: outside when the reflection beat the worst vertex.
        let (xc, outside) = if fr < worst.1 {
            (lerp(centroid, xr, CONTRACT), true)
        } else {
            (lerp(centroid, worst.0, CONTRACT), false)
        };
        let Some(fc) = c.eval(xc) else { break };
        if (outside && fc <= fr) || (!outside && fc < worst.1) {
            simplex[2] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0;
        for v in simplex.iter_mut().skip(1) {
            let p = lerp(anchor, v.0, SHRINK);
            match c.eval(p) {
                Some(fv) => *v = (p, fv),
                None => break 'search,
            }
        }
    }

    Minimum {
        point: c.best.0,
        value: c.best.1,
        evaluations: c.used,
    }
}
