use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Arm, Dataset, DatasetKind, ParticipantRecord, TrialDesign, WindowSet, CONTROL};
use crate::error::SimulationError;

/// Role of a source window in the resampled two-intervention platform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WindowType {
    /// Only intervention 1 randomized; 1:1 with control.
    L,
    /// Only intervention 2 randomized; 1:1 with control.
    H,
    /// Both randomized; every record kept.
    #[serde(rename = "B_all")]
    BAll,
    /// Both randomized; subsampled 1:1:1.
    #[serde(rename = "B_sub")]
    BSub,
}

impl FromStr for WindowType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "L" => Ok(WindowType::L),
            "H" => Ok(WindowType::H),
            "B_all" | "Ball" => Ok(WindowType::BAll),
            "B_sub" | "Bsub" => Ok(WindowType::BSub),
            other => Err(format!("unknown window type '{other}' (expected L, H, B_all, B_sub)")),
        }
    }
}

impl fmt::Display for WindowType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowType::L => "L",
            WindowType::H => "H",
            WindowType::BAll => "B_all",
            WindowType::BSub => "B_sub",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleTarget {
    /// Shared controls over all controls, in `[0, 1]`.
    pub share: f64,
    /// Desired totals on interventions 1 and 2. Without them the largest feasible sample is
    /// drawn.
    pub arm_totals: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct ResampleOutcome {
    pub dataset: Dataset,
    pub shared_controls: usize,
    pub total_controls: usize,
    pub achieved_share: f64,
    /// Sampled pairs in L, in H and triplets in `B_sub`.
    pub draws: (usize, usize, usize),
}

/// Indices of source records by (window type, arm).
struct Pools(BTreeMap<(WindowType, Arm), Vec<usize>>);

impl Pools {
    fn get(&self, t: WindowType, arm: Arm) -> &[usize] {
        self.0.get(&(t, arm)).map_or(&[], Vec::as_slice)
    }

    fn count(&self, t: WindowType, arm: Arm) -> usize {
        self.get(t, arm).len()
    }
}

fn infeasible(target: f64, min: f64, max: f64) -> SimulationError {
    SimulationError::InfeasibleShare { target, min, max }
}

fn share(shared: usize, rest: usize) -> f64 {
    if shared + rest == 0 {
        0.0
    } else {
        shared as f64 / (shared + rest) as f64
    }
}

/// Draws `(x_L, x_H, y)` for the target.
fn plan(p: &Pools, target: &ResampleTarget) -> Result<(usize, usize, usize), SimulationError> {
    use WindowType::*;
    let s = target.share;
    let cb = p.count(BAll, CONTROL);
    let c_l = p.count(L, 1).min(p.count(L, CONTROL));
    let c_h = p.count(H, 2).min(p.count(H, CONTROL));
    let c_b = p.count(BSub, 1).min(p.count(BSub, 2)).min(p.count(BSub, CONTROL));
    match target.arm_totals {
        None => {
            let min = share(cb, c_l + c_h);
            let max = if cb + c_b > 0 { 1.0 } else { 0.0 };
            if s < min - 1e-12 || s > max + 1e-12 {
                return Err(infeasible(s, min, max));
            }
            if s >= 1.0 {
                return Ok((0, 0, c_b));
            }
            let y = (s * (cb + c_l + c_h) as f64 - cb as f64) / (1.0 - s);
            if y <= c_b as f64 {
                return Ok((c_l, c_h, (y.round().max(0.0) as usize).min(c_b)));
            }
            // controls outside B are cut back instead
            let x = ((cb + c_b) as f64 * (1.0 - s) / s).round() as usize;
            let x_l = if c_l + c_h == 0 {
                0
            } else {
                ((x as f64 * c_l as f64 / (c_l + c_h) as f64).round() as usize).min(c_l)
            };
            Ok((x_l, (x - x_l).min(c_h), c_b))
        }
        Some((t1, t2)) => {
            let a1b = p.count(BAll, 1);
            let a2b = p.count(BAll, 2);
            let (Some(r1), Some(r2)) = (t1.checked_sub(a1b), t2.checked_sub(a2b)) else {
                return Err(infeasible(s, f64::NAN, f64::NAN));
            };
            // y triplets from B_sub leave r1 - y pairs in L and r2 - y in H
            let y_min = r1.saturating_sub(c_l).max(r2.saturating_sub(c_h));
            let y_max = c_b.min(r1).min(r2);
            let share_at = |y: usize| share(cb + y, r1 + r2 - 2 * y);
            if y_min > y_max {
                return Err(infeasible(s, f64::NAN, f64::NAN));
            }
            let (lo, hi) = (share_at(y_min), share_at(y_max));
            if s < lo - 1e-12 || s > hi + 1e-12 {
                return Err(infeasible(s, lo, hi));
            }
            let r = (r1 + r2) as f64;
            let y = ((s * r - cb as f64 * (1.0 - s)) / (1.0 + s)).round() as usize;
            let y = y.clamp(y_min, y_max);
            Ok((r1 - y, r2 - y, y))
        }
    }
}

/// Builds a two-intervention platform from `dataset` with the requested proportion of shared
/// controls.
///
/// `typing[w - 1]` is the role of source window `w`. Records of intervention 2 in L windows
/// and of intervention 1 in H windows are dropped; `B_all` windows are kept whole; L, H and
/// `B_sub` are subsampled without replacement, pooled across windows of the same type. The
/// output design gives intervention 1 the L and B windows and intervention 2 the H and B
/// windows.
pub fn resample_shared_controls<R: Rng + ?Sized>(
    dataset: &Dataset,
    typing: &[WindowType],
    target: &ResampleTarget,
    rng: &mut R,
) -> Result<ResampleOutcome, SimulationError> {
    let invalid = |m: String| SimulationError::InvalidScenario(m);
    if !(0.0..=1.0).contains(&target.share) {
        return Err(invalid(format!("target share {} outside [0, 1]", target.share)));
    }
    let q = dataset.design.q as usize;
    if typing.len() != q {
        return Err(invalid(format!("window typing has {} entries, expected {q}", typing.len())));
    }
    let mut pools = Pools(BTreeMap::new());
    for (i, r) in dataset.records.iter().enumerate() {
        if r.arm > 2 {
            return Err(invalid(format!("resampling needs arms 0, 1, 2; found arm {}", r.arm)));
        }
        let t = typing[r.window as usize - 1];
        pools.0.entry((t, r.arm)).or_default().push(i);
    }
    let (x_l, x_h, y) = plan(&pools, target)?;
    let mut keep: Vec<usize> = Vec::new();
    let mut take = |t: WindowType, arm: Arm, amount: usize, rng: &mut R| {
        let pool = pools.get(t, arm);
        keep.extend(index::sample(rng, pool.len(), amount).iter().map(|j| pool[j]));
    };
    for arm in [CONTROL, 1, 2] {
        take(WindowType::BAll, arm, pools.count(WindowType::BAll, arm), rng);
    }
    for (t, arm, amount) in [
        (WindowType::L, CONTROL, x_l),
        (WindowType::L, 1, x_l),
        (WindowType::H, CONTROL, x_h),
        (WindowType::H, 2, x_h),
        (WindowType::BSub, CONTROL, y),
        (WindowType::BSub, 1, y),
        (WindowType::BSub, 2, y),
    ] {
        take(t, arm, amount, rng);
    }
    keep.sort_unstable();
    let records: Vec<ParticipantRecord> = keep.iter().map(|&i| dataset.records[i].clone()).collect();

    let mut w1 = WindowSet::empty();
    let mut w2 = WindowSet::empty();
    for (i, t) in typing.iter().enumerate() {
        let w = i as u32 + 1;
        match t {
            WindowType::L => w1.insert(w),
            WindowType::H => w2.insert(w),
            WindowType::BAll | WindowType::BSub => {
                w1.insert(w);
                w2.insert(w);
            }
        }
    }
    if w1.is_empty() || w2.is_empty() {
        return Err(invalid("each intervention needs at least one window".into()));
    }
    let src = &dataset.design;
    let design = TrialDesign::new(
        2,
        src.q,
        src.tau,
        BTreeMap::from([(1, w1), (2, w2)]),
        src.calendar_bounds.clone(),
    )?;
    let cb = pools.count(WindowType::BAll, CONTROL);
    let shared = cb + y;
    let total = cb + y + x_l + x_h;
    Ok(ResampleOutcome {
        dataset: Dataset::new(records, design, dataset.coarsening.clone(), DatasetKind::Platform),
        shared_controls: shared,
        total_controls: total,
        achieved_share: share(shared, x_l + x_h),
        draws: (x_l, x_h, y),
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;
    use crate::data::CoarseningMap;

    /// `counts[w][arm]` records in window `w + 1`.
    fn source(counts: &[[usize; 3]]) -> Dataset {
        let q = counts.len() as u32;
        let all = WindowSet::from_windows(1..=q);
        let design = TrialDesign::new(2, q, 12.0, BTreeMap::from([(1, all), (2, all)]), vec![])
            .unwrap();
        let mut records = Vec::new();
        for (w, row) in counts.iter().enumerate() {
            for (arm, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    records.push(ParticipantRecord {
                        id: records.len() as u64 + 1,
                        x: 1.0,
                        delta: false,
                        arm: arm as Arm,
                        window: w as u32 + 1,
                        z: 0,
                        v: 0,
                    });
                }
            }
        }
        let map = CoarseningMap::identity(&["z"]).unwrap();
        Dataset::new(records, design, map, DatasetKind::Platform)
    }

    fn tally(d: &Dataset, w: u32) -> [usize; 3] {
        let mut c = [0; 3];
        for r in d.records.iter().filter(|r| r.window == w) {
            c[r.arm as usize] += 1;
        }
        c
    }

    use WindowType::*;

    #[test]
    fn no_b_windows_gives_disjoint_controls() {
        let d = source(&[[50, 50, 50], [40, 40, 40]]);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let out = resample_shared_controls(
            &d,
            &[L, H],
            &ResampleTarget { share: 0.0, arm_totals: None },
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.achieved_share, 0.0);
        assert_eq!(tally(&out.dataset, 1), [50, 50, 0]);
        assert_eq!(tally(&out.dataset, 2), [40, 0, 40]);
        assert!(out.dataset.design.windows(1).is_disjoint(out.dataset.design.windows(2)));
    }

    #[test]
    fn all_b_all_gives_full_share() {
        let d = source(&[[30, 20, 25], [10, 10, 10]]);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let out = resample_shared_controls(
            &d,
            &[BAll, BAll],
            &ResampleTarget { share: 1.0, arm_totals: None },
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.achieved_share, 1.0);
        assert_eq!(out.dataset.n(), d.n());
    }

    #[test]
    fn target_share_within_one_participant() {
        // L: 200 ctrl / 200 arm1; H: 180 / 180; B_all: 60 ctrl; B_sub: 150 each
        let d = source(&[[200, 200, 10], [180, 7, 180], [60, 50, 55], [150, 150, 150]]);
        let typing = [L, H, BAll, BSub];
        for (seed, s) in [(3u64, 0.4), (4, 0.25), (5, 0.5)] {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let out = resample_shared_controls(
                &d,
                &typing,
                &ResampleTarget { share: s, arm_totals: None },
                &mut rng,
            )
            .unwrap();
            let n = out.total_controls as f64;
            assert!((out.achieved_share - s).abs() <= 1.0 / n, "{s}: {}", out.achieved_share);
            let c = tally(&out.dataset, 4);
            assert_eq!(c[0], c[1]);
            assert_eq!(c[1], c[2]);
            assert_eq!(tally(&out.dataset, 3), [60, 50, 55]);
            let l = tally(&out.dataset, 1);
            assert_eq!((l[0], l[2]), (l[1], 0));
            let h = tally(&out.dataset, 2);
            assert_eq!((h[0], h[1]), (h[2], 0));
            // shared controls are the control records in B windows
            let shared = out.dataset.records.iter().filter(|r| r.arm == 0 && r.window >= 3).count();
            assert_eq!(shared, out.shared_controls);
        }
    }

    #[test]
    fn high_share_cuts_back_outside_b() {
        let d = source(&[[200, 200, 0], [200, 0, 200], [0, 0, 0], [50, 50, 50]]);
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let out = resample_shared_controls(
            &d,
            &[L, H, BAll, BSub],
            &ResampleTarget { share: 0.5, arm_totals: None },
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.draws.2, 50);
        assert_eq!(out.draws.0 + out.draws.1, 50);
        assert!((out.achieved_share - 0.5).abs() <= 1.0 / out.total_controls as f64);
    }

    #[test]
    fn arm_totals_are_met() {
        let d = source(&[[300, 300, 0], [300, 0, 300], [40, 40, 40], [200, 200, 200]]);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let target = ResampleTarget { share: 0.3, arm_totals: Some((240, 240)) };
        let out = resample_shared_controls(&d, &[L, H, BAll, BSub], &target, &mut rng).unwrap();
        let on = |a: Arm| out.dataset.records.iter().filter(|r| r.arm == a).count();
        assert_eq!((on(1), on(2)), (240, 240));
        assert!((out.achieved_share - 0.3).abs() <= 1.0 / out.total_controls as f64);
    }

    #[test]
    fn infeasible_share_reports_range() {
        let d = source(&[[100, 100, 0], [100, 0, 100], [100, 100, 100], [0, 0, 0]]);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let err = resample_shared_controls(
            &d,
            &[L, H, BAll, BSub],
            &ResampleTarget { share: 0.1, arm_totals: None },
            &mut rng,
        )
        .unwrap_err();
        match err {
            SimulationError::InfeasibleShare { min, max, .. } => {
                assert!((min - 1.0 / 3.0).abs() < 1e-12);
                assert_eq!(max, 1.0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn window_type_parsing() {
        assert_eq!("B_sub".parse::<WindowType>().unwrap(), BSub);
        assert_eq!(BAll.to_string(), "B_all");
        assert!("X".parse::<WindowType>().is_err());
    }
}
