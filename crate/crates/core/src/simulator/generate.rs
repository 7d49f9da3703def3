use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::sampling::invert_cumulative_hazard;
use super::{Compiled, CompiledOutcome, EnrollmentMode, Scenario};
use crate::data::{Arm, Dataset, DatasetKind, ParticipantRecord, CONTROL};
use crate::error::SimulationError;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimulationReport {
    /// Participants enrolled at or after the administrative censoring time, recorded as
    /// censored at time 0.
    pub censored_at_enrollment: usize,
}

#[derive(Clone, Debug)]
pub struct Simulated {
    pub dataset: Dataset,
    pub report: SimulationReport,
}

struct Generator<'a> {
    scenario: &'a Scenario,
    compiled: Compiled,
    records: Vec<ParticipantRecord>,
    report: SimulationReport,
}

impl<'a> Generator<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self, SimulationError> {
        Ok(Generator {
            scenario,
            compiled: scenario.compile()?,
            records: Vec::new(),
            report: SimulationReport::default(),
        })
    }

    fn draw<R: Rng>(&mut self, rng: &mut R, window: u32, arm: Arm) {
        let design = &self.scenario.design;
        let enroll = match design.calendar_bounds.get(window as usize - 1) {
            Some(&(s, e)) => s + (e - s) * rng.random::<f64>(),
            None => 0.0,
        };
        let u: f64 = rng.random();
        let law = &self.compiled.z_law[window as usize - 1];
        let z = law.iter().position(|&c| u < c).unwrap_or(law.len() - 1);
        let (x, delta) = match &self.compiled.kind {
            CompiledOutcome::Survival { segments, multiplier, loss_max, admin } => {
                let e = -(1.0 - rng.random::<f64>()).ln();
                let t = invert_cumulative_hazard(&segments[z], enroll, e / multiplier[arm as usize]);
                let loss = loss_max.map_or(f64::INFINITY, |l| l * rng.random::<f64>());
                let follow = admin - enroll;
                if follow <= 0.0 {
                    self.report.censored_at_enrollment += 1;
                    (0.0, false)
                } else {
                    let c = loss.min(follow).min(design.tau);
                    if t <= c {
                        (t, true)
                    } else {
                        (c, false)
                    }
                }
            }
            CompiledOutcome::Binary { control_risk, rr } => {
                let p = control_risk[z] * rr[arm as usize];
                if rng.random::<f64>() < p {
                    (0.0, true)
                } else {
                    (design.tau, false)
                }
            }
        };
        let id = self.records.len() as u64 + 1;
        self.records.push(ParticipantRecord { id, x, delta, arm, window, z, v: 0 });
    }

    /// Enrolls `arms` (control first) in `window`.
    fn enroll_window<R: Rng>(&mut self, rng: &mut R, window: u32, arms: &[Arm]) {
        let per_arm = self.scenario.enrollment_per_arm[window as usize - 1] as usize;
        match self.scenario.enrollment_mode {
            EnrollmentMode::Fixed => {
                for &arm in arms {
                    for _ in 0..per_arm {
                        self.draw(rng, window, arm);
                    }
                }
            }
            EnrollmentMode::Multinomial => {
                let pick = Uniform::new(0, arms.len()).expect("nonempty arm list");
                for _ in 0..per_arm * arms.len() {
                    let arm = arms[pick.sample(rng)];
                    self.draw(rng, window, arm);
                }
            }
        }
    }

    fn finish(self, kind: DatasetKind) -> Simulated {
        Simulated {
            dataset: Dataset::new(
                self.records,
                self.scenario.design.clone(),
                self.scenario.coarsening.clone(),
                kind,
            ),
            report: self.report,
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One platform trial. Uses stream 0 of the seeded generator.
pub fn simulate_platform(scenario: &Scenario, seed: u64) -> Result<Simulated, SimulationError> {
    let mut gen = Generator::new(scenario)?;
    let mut rng = stream_rng(seed, 0);
    for w in 1..=scenario.design.q {
        let active = scenario.design.arms_in_window(w);
        if active.is_empty() {
            continue;
        }
        let mut arms = vec![CONTROL];
        arms.extend(active);
        gen.enroll_window(&mut rng, w, &arms);
    }
    Ok(gen.finish(DatasetKind::Platform))
}

/// One independent 1:1 trial per active arm over that arm's windows. Trial `a` uses stream
/// `a` of the seeded generator, so it is independent of the platform draw with the same seed.
pub fn simulate_separate(scenario: &Scenario, seed: u64) -> Result<Vec<Simulated>, SimulationError> {
    let arms: Vec<Arm> = scenario.design.active_arms().collect();
    simulate_separate_arms(scenario, seed, &arms)
}

/// The separate trials of `arms` only; each equals the corresponding entry of
/// [`simulate_separate`].
pub fn simulate_separate_arms(
    scenario: &Scenario,
    seed: u64,
    arms: &[Arm],
) -> Result<Vec<Simulated>, SimulationError> {
    let design = &scenario.design;
    let mut out = Vec::with_capacity(arms.len());
    for &a in arms {
        if a == CONTROL || a > design.k {
            return Err(SimulationError::InvalidScenario(format!("no separate trial for arm {a}")));
        }
        let mut gen = Generator::new(scenario)?;
        let mut rng = stream_rng(seed, a as u64);
        for w in design.windows(a).iter() {
            gen.enroll_window(&mut rng, w, &[CONTROL, a]);
        }
        out.push(gen.finish(DatasetKind::Separate(a)));
    }
    Ok(out)
}
