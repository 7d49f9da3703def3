use rand::Rng;

/// Constant hazard with the given cumulative incidence over `horizon`.
pub fn attack_rate_to_hazard(attack_rate: f64, horizon: f64) -> f64 {
    -(1.0 - attack_rate).ln() / horizon
}

/// Piece of a calendar-time hazard function. `end = None` extends to infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: Option<f64>,
    pub hazard: f64,
}

/// Cumulative hazard accrued over calendar interval `[from, to]`.
pub fn cumulative_hazard(segments: &[Segment], from: f64, to: f64) -> f64 {
    segments
        .iter()
        .map(|s| {
            let lo = s.start.max(from);
            let hi = s.end.map_or(to, |e| e.min(to));
            if hi > lo {
                s.hazard * (hi - lo)
            } else {
                0.0
            }
        })
        .sum()
}

/// Time since `enroll` at which the cumulative hazard reaches `target`; `+inf` if never.
///
/// Segments must be sorted and non-overlapping; calendar time not covered has zero hazard.
pub fn invert_cumulative_hazard(segments: &[Segment], enroll: f64, target: f64) -> f64 {
    let mut remaining = target;
    for s in segments {
        let lo = s.start.max(enroll);
        let hi = s.end.unwrap_or(f64::INFINITY);
        if hi <= lo || s.hazard <= 0.0 {
            continue;
        }
        let mass = s.hazard * (hi - lo);
        if mass >= remaining {
            return lo + remaining / s.hazard - enroll;
        }
        remaining -= mass;
    }
    f64::INFINITY
}

/// Inversion sampling: `E = -ln(1 - U)` with `U` uniform on `[0, 1)`.
pub fn sample_piecewise_exponential<R: Rng + ?Sized>(
    segments: &[Segment],
    enroll: f64,
    rng: &mut R,
) -> f64 {
    let u: f64 = rng.random();
    invert_cumulative_hazard(segments, enroll, -(1.0 - u).ln())
}
