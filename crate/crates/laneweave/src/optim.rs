//! Bounded derivative-free minimization (Nelder–Mead with clamping).
//!
//! Calibration objectives here are cheap, smooth almost everywhere, and
//! low-dimensional (6–9 parameters), which is squarely the regime where a
//! simplex search is the pragmatic choice: no gradients (the objective has
//! kinks where an equilibrium crosses between cases), no line searches, and
//! easy box handling by clamping every trial point into the feasible box.
//!
//! The implementation is the standard reflect/expand/contract/shrink scheme
//! (coefficients 1, 2, ½, ½). Iteration stops when the spread of objective
//! values across the simplex falls below `tolerance * (|best| + tolerance)`
//! — an absolute floor of `tolerance²` so that near-zero objectives are
//! polished down to float precision — or when the iteration budget runs out.
//!
//! Everything in this module is deterministic: no randomness, no
//! time-dependent state, identical results on every run.

/// Inclusive per-coordinate box constraints.
#[derive(Debug, Clone)]
pub(crate) struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    /// Clamp a point into the box, coordinate by coordinate.
    fn clamp(&self, x: &mut [f64]) {
        for ((value, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *value = value.clamp(*lo, *hi);
        }
    }
}

/// Result of a local search.
#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    /// The best point found (inside the box).
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub value: f64,
    /// Iterations consumed.
    pub iterations: usize,
}

/// Fraction of the box span used for the initial simplex in a cold start.
pub(crate) const COLD_START_STEP: f64 = 0.1;

/// Minimize `objective` inside `bounds`, starting from `start`.
///
/// `step_fraction` sizes the initial simplex as a fraction of the box span
/// per coordinate: use [`COLD_START_STEP`] when `start` is a guess, and
/// something small when `start` is already near a minimum (a warm start with
/// a huge simplex wastes most of the budget walking back).
///
/// `start` is clamped into the box before use. Panics if the box is empty or
/// the dimensions disagree (programmer error, not data error).
pub(crate) fn minimize<F>(
    objective: F,
    start: &[f64],
    bounds: &Bounds,
    max_iterations: usize,
    tolerance: f64,
    step_fraction: f64,
) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    assert!(n > 0, "cannot minimize over zero parameters");
    assert_eq!(bounds.lower.len(), n);
    assert_eq!(bounds.upper.len(), n);
    for (lo, hi) in bounds.lower.iter().zip(&bounds.upper) {
        assert!(lo < hi, "degenerate box [{lo}, {hi}]");
    }

    assert!(step_fraction > 0.0 && step_fraction <= 0.5, "bad step fraction {step_fraction}");

    // Initial simplex: the start plus one vertex per coordinate, stepped by
    // a fraction of the box span (stepping inward when the start sits at the
    // upper bound, so the simplex never degenerates).
    let mut base = start.to_vec();
    bounds.clamp(&mut base);
    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    vertices.push(base.clone());
    for i in 0..n {
        let mut vertex = base.clone();
        let step = step_fraction * (bounds.upper[i] - bounds.lower[i]);
        vertex[i] = if vertex[i] + step <= bounds.upper[i] {
            vertex[i] + step
        } else {
            vertex[i] - step
        };
        vertices.push(vertex);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| objective(v)).collect();

    let mut iterations = 0;
    while iterations < max_iterations {
        // Order the simplex: best first, worst last.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        permute(&mut vertices, &order);
        permute(&mut values, &order);

        let spread = values[n] - values[0];
        if spread <= tolerance * (values[0].abs() + tolerance) {
            break;
        }
        iterations += 1;

        // Centroid of all vertices except the worst.
        let mut centroid = vec![0.0; n];
        for vertex in &vertices[..n] {
            for (c, v) in centroid.iter_mut().zip(vertex) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }

        let trial = |coefficient: f64| -> Vec<f64> {
            let mut point: Vec<f64> = centroid
                .iter()
                .zip(&vertices[n])
                .map(|(c, w)| c + coefficient * (c - w))
                .collect();
            bounds.clamp(&mut point);
            point
        };

        let reflected = trial(1.0);
        let reflected_value = objective(&reflected);

        if reflected_value < values[0] {
            // The reflection is the new best; try stretching further.
            let expanded = trial(2.0);
            let expanded_value = objective(&expanded);
            if expanded_value < reflected_value {
                vertices[n] = expanded;
                values[n] = expanded_value;
            } else {
                vertices[n] = reflected;
                values[n] = reflected_value;
            }
        } else if reflected_value < values[n - 1] {
            vertices[n] = reflected;
            values[n] = reflected_value;
        } else {
            // Contract: outside if the reflection at least beat the worst,
            // inside otherwise.
            let contracted =
                if reflected_value < values[n] { trial(0.5) } else { trial(-0.5) };
            let contracted_value = objective(&contracted);
            if contracted_value < reflected_value.min(values[n]) {
                vertices[n] = contracted;
                values[n] = contracted_value;
            } else {
                // Shrink everything toward the best vertex.
                let best = vertices[0].clone();
                for (vertex, value) in vertices.iter_mut().zip(values.iter_mut()).skip(1) {
                    for (v, b) in vertex.iter_mut().zip(&best) {
                        *v = b + 0.5 * (*v - b);
                    }
                    bounds.clamp(vertex);
                    *value = objective(vertex);
                }
            }
        }
    }

    let best = values
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.total_cmp(b))
        .map(|(i, _)| i)
        .expect("simplex is never empty");
    Minimum { x: vertices[best].clone(), value: values[best], iterations }
}

/// Reorder `items` according to `order` (a permutation of indices).
fn permute<T: Clone>(items: &mut [T], order: &[usize]) {
    let snapshot: Vec<T> = items.to_vec();
    for (slot, &source) in items.iter_mut().zip(order) {
        *slot = snapshot[source].clone();
    }
}
