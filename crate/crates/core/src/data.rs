//! Participant records, trial designs and dataset ingestion.
//!
//! A platform dataset is a CSV file with header `id,x,delta,arm,window,z` together with two
//! JSON sidecars: the trial design (`k`, `q`, `tau`, per-arm window sets and calendar bounds)
//! and the coarsening map `z -> v` used to define the strata in which relative risks are
//! reported.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Arm label. `0` is the (shared) control arm, `1..=k` are active interventions.
pub type Arm = u32;

pub const CONTROL: Arm = 0;

/// Largest number of enrollment windows a design may have.
pub const MAX_WINDOWS: u32 = 64;

const CSV_HEADER: [&str; 6] = ["id", "x", "delta", "arm", "window", "z"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed row: {reason}, line {line}")]
    MalformedRow { line: u64, reason: String },
    #[error("negative observed time, line {line}")]
    NegativeTime { line: u64 },
    #[error("unknown arm {arm}, line {line}")]
    UnknownArm { line: u64, arm: Arm },
    #[error("unknown window {window}, line {line}")]
    UnknownWindow { line: u64, window: u32 },
    #[error("unknown covariate level '{z}', line {line}")]
    UnknownCovariate { line: u64, z: String },
    #[error("unexpected CSV header {found:?}; expected id,x,delta,arm,window,z")]
    BadHeader { found: Vec<String> },
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("invalid coarsening map: {0}")]
    InvalidCoarsening(String),
    #[error("unknown stratum label '{0}'")]
    UnknownStratum(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A set of enrollment windows, stored as a bitmask over window indices `1..=64`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct WindowSet(u64);

impl WindowSet {
    pub const fn empty() -> Self {
        WindowSet(0)
    }

    /// Every window. Used for separate-trial data, where windows carry no meaning.
    pub const fn all() -> Self {
        WindowSet(u64::MAX)
    }

    pub fn from_windows<I: IntoIterator<Item = u32>>(windows: I) -> Self {
        let mut set = WindowSet::empty();
        for w in windows {
            set.insert(w);
        }
        set
    }

    pub fn insert(&mut self, window: u32) {
        assert!(
            (1..=MAX_WINDOWS).contains(&window),
            "window index {window} out of range"
        );
        self.0 |= 1u64 << (window - 1);
    }

    #[inline]
    pub fn contains(&self, window: u32) -> bool {
        (1..=MAX_WINDOWS).contains(&window) && self.0 & (1u64 << (window - 1)) != 0
    }

    pub fn union(self, other: WindowSet) -> WindowSet {
        WindowSet(self.0 | other.0)
    }

    pub fn intersection(self, other: WindowSet) -> WindowSet {
        WindowSet(self.0 & other.0)
    }

    pub fn is_disjoint(self, other: WindowSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_all(self) -> bool {
        self.0 == u64::MAX
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn iter(self) -> impl Iterator<Item = u32> {
        (1..=MAX_WINDOWS).filter(move |&w| self.contains(w))
    }

    /// Applies a relabelling `old window -> new window` to every member.
    pub fn relabel(self, map: impl Fn(u32) -> u32) -> WindowSet {
        WindowSet::from_windows(self.iter().map(map))
    }
}

impl fmt::Debug for WindowSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_all() {
            return write!(f, "{{*}}");
        }
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for WindowSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for WindowSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let windows = Vec::<u32>::deserialize(deserializer)?;
        if let Some(bad) = windows.iter().find(|w| !(1..=MAX_WINDOWS).contains(w)) {
            return Err(serde::de::Error::custom(format!(
                "window index {bad} outside 1..={MAX_WINDOWS}"
            )));
        }
        Ok(WindowSet::from_windows(windows))
    }
}

/// The coarsening `g: z -> v`. Covariate and stratum labels are interned to indices in
/// sorted label order, so index assignment is deterministic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, String>", into = "BTreeMap<String, String>")]
pub struct CoarseningMap {
    z_labels: Vec<String>,
    v_labels: Vec<String>,
    z_to_v: Vec<usize>,
}

impl CoarseningMap {
    pub fn from_pairs<I, S, T>(pairs: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let map: BTreeMap<String, String> = pairs
            .into_iter()
            .map(|(z, v)| (z.into(), v.into()))
            .collect();
        Self::try_from(map)
    }

    /// `g` = identity: every covariate level is its own stratum.
    pub fn identity<S: AsRef<str>>(z_labels: &[S]) -> Result<Self, DataError> {
        Self::from_pairs(
            z_labels
                .iter()
                .map(|z| (z.as_ref().to_string(), z.as_ref().to_string())),
        )
    }

    /// `g` = constant: a single stratum `v` (marginal relative risks).
    pub fn constant<S: AsRef<str>>(z_labels: &[S], v: &str) -> Result<Self, DataError> {
        Self::from_pairs(z_labels.iter().map(|z| (z.as_ref().to_string(), v.to_string())))
    }

    pub fn z_count(&self) -> usize {
        self.z_labels.len()
    }

    pub fn v_count(&self) -> usize {
        self.v_labels.len()
    }

    pub fn z_index(&self, z: &str) -> Option<usize> {
        self.z_labels.binary_search_by(|l| l.as_str().cmp(z)).ok()
    }

    pub fn v_index(&self, v: &str) -> Option<usize> {
        self.v_labels.binary_search_by(|l| l.as_str().cmp(v)).ok()
    }

    /// Resolves a stratum label, failing with [`DataError::UnknownStratum`].
    pub fn require_v(&self, v: &str) -> Result<usize, DataError> {
        self.v_index(v)
            .ok_or_else(|| DataError::UnknownStratum(v.to_string()))
    }

    pub fn z_label(&self, z: usize) -> &str {
        &self.z_labels[z]
    }

    pub fn v_label(&self, v: usize) -> &str {
        &self.v_labels[v]
    }

    pub fn z_labels(&self) -> &[String] {
        &self.z_labels
    }

    pub fn v_labels(&self) -> &[String] {
        &self.v_labels
    }

    /// `g(z)` on interned indices.
    #[inline]
    pub fn coarsen(&self, z: usize) -> usize {
        self.z_to_v[z]
    }

    /// Covariate levels `z` with `g(z) = v`.
    pub fn members(&self, v: usize) -> Vec<usize> {
        (0..self.z_labels.len())
            .filter(|&z| self.z_to_v[z] == v)
            .collect()
    }
}

impl TryFrom<BTreeMap<String, String>> for CoarseningMap {
    type Error = DataError;

    fn try_from(map: BTreeMap<String, String>) -> Result<Self, Self::Error> {
        if map.is_empty() {
            return Err(DataError::InvalidCoarsening(
                "map has no covariate levels".into(),
            ));
        }
        if map.keys().any(|z| z.is_empty()) || map.values().any(|v| v.is_empty()) {
            return Err(DataError::InvalidCoarsening("empty label".into()));
        }
        let z_labels: Vec<String> = map.keys().cloned().collect();
        let v_labels: Vec<String> = map
            .values()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let z_to_v = map
            .values()
            .map(|v| v_labels.binary_search(v).expect("label collected above"))
            .collect();
        Ok(CoarseningMap {
            z_labels,
            v_labels,
            z_to_v,
        })
    }
}

impl From<CoarseningMap> for BTreeMap<String, String> {
    fn from(map: CoarseningMap) -> Self {
        map.z_labels
            .iter()
            .enumerate()
            .map(|(z, label)| (label.clone(), map.v_labels[map.z_to_v[z]].clone()))
            .collect()
    }
}

/// One observation `(X, Delta, A, W, Z)` plus the derived stratum `V = g(Z)`.
///
/// `z` and `v` are indices into the owning dataset's [`CoarseningMap`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParticipantRecord {
    pub id: u64,
    /// Observed time since enrollment, `min(T, C)`, in months.
    pub x: f64,
    /// `1(T <= C)`.
    pub delta: bool,
    pub arm: Arm,
    pub window: u32,
    pub z: usize,
    pub v: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDesign", into = "RawDesign")]
pub struct TrialDesign {
    /// Number of active interventions.
    pub k: u32,
    /// Number of enrollment windows.
    pub q: u32,
    /// End of follow-up relative to enrollment (months).
    pub tau: f64,
    window_sets: BTreeMap<Arm, WindowSet>,
    /// Calendar `[start, end)` of each window, in months since trial start.
    pub calendar_bounds: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawDesign {
    k: u32,
    q: u32,
    tau: f64,
    window_sets: BTreeMap<String, WindowSet>,
    #[serde(default)]
    calendar_bounds: Vec<(f64, f64)>,
}

impl TryFrom<RawDesign> for TrialDesign {
    type Error = DataError;

    fn try_from(raw: RawDesign) -> Result<Self, Self::Error> {
        let mut window_sets = BTreeMap::new();
        for (key, set) in raw.window_sets {
            let arm: Arm = key.trim().parse().map_err(|_| {
                DataError::InvalidDesign(format!("window_sets key '{key}' is not an arm label"))
            })?;
            window_sets.insert(arm, set);
        }
        TrialDesign::new(raw.k, raw.q, raw.tau, window_sets, raw.calendar_bounds)
    }
}

impl From<TrialDesign> for RawDesign {
    fn from(d: TrialDesign) -> Self {
        RawDesign {
            k: d.k,
            q: d.q,
            tau: d.tau,
            window_sets: d
                .window_sets
                .iter()
                .map(|(a, w)| (a.to_string(), *w))
                .collect(),
            calendar_bounds: d.calendar_bounds,
        }
    }
}

impl TrialDesign {
    pub fn new(
        k: u32,
        q: u32,
        tau: f64,
        window_sets: BTreeMap<Arm, WindowSet>,
        calendar_bounds: Vec<(f64, f64)>,
    ) -> Result<Self, DataError> {
        let bad = |msg: String| Err(DataError::InvalidDesign(msg));
        if k == 0 {
            return bad("k must be at least 1".into());
        }
        if q == 0 || q > MAX_WINDOWS {
            return bad(format!("q must lie in 1..={MAX_WINDOWS}"));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return bad("tau must be positive and finite".into());
        }
        let valid = WindowSet::from_windows(1..=q);
        for a in 1..=k {
            match window_sets.get(&a) {
                None => return bad(format!("no window set for arm {a}")),
                Some(w) if w.is_empty() => return bad(format!("empty window set for arm {a}")),
                Some(w) if w.union(valid) != valid => {
                    return bad(format!("window set of arm {a} uses windows outside 1..={q}"))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = window_sets.keys().find(|&&a| a == CONTROL || a > k) {
            return bad(format!(
                "window_sets lists arm {extra}; only active arms 1..={k} are allowed (control windows are derived)"
            ));
        }
        if !calendar_bounds.is_empty() {
            if calendar_bounds.len() != q as usize {
                return bad(format!(
                    "calendar_bounds has {} entries, expected {q}",
                    calendar_bounds.len()
                ));
            }
            for (i, &(s, e)) in calendar_bounds.iter().enumerate() {
                if !(s.is_finite() && e.is_finite() && s < e) {
                    return bad(format!("window {} has invalid bounds [{s}, {e})", i + 1));
                }
            }
            for (i, pair) in calendar_bounds.windows(2).enumerate() {
                if (pair[0].1 - pair[1].0).abs() > 1e-9 {
                    return bad(format!(
                        "windows {} and {} are not contiguous",
                        i + 1,
                        i + 2
                    ));
                }
            }
        }
        Ok(TrialDesign {
            k,
            q,
            tau,
            window_sets,
            calendar_bounds,
        })
    }

    /// `w_a` for an active arm, `w_0 = union of all w_a` for control.
    pub fn windows(&self, arm: Arm) -> WindowSet {
        if arm == CONTROL {
            self.window_sets
                .values()
                .fold(WindowSet::empty(), |acc, w| acc.union(*w))
        } else {
            self.window_sets
                .get(&arm)
                .copied()
                .unwrap_or(WindowSet::empty())
        }
    }

    pub fn active_arms(&self) -> impl Iterator<Item = Arm> + '_ {
        1..=self.k
    }

    /// Active arms under randomization in window `w`.
    pub fn arms_in_window(&self, window: u32) -> Vec<Arm> {
        self.window_sets
            .iter()
            .filter(|(_, w)| w.contains(window))
            .map(|(a, _)| *a)
            .collect()
    }

    /// Window containing calendar time `c`, if calendar bounds are given.
    pub fn window_at(&self, calendar: f64) -> Option<u32> {
        self.calendar_bounds
            .iter()
            .position(|&(s, e)| calendar >= s && calendar < e)
            .map(|i| i as u32 + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Platform,
    /// Data from an independent two-arm trial of the given intervention against its own
    /// control. Window labels are validated but carry no meaning for estimation.
    Separate(Arm),
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub records: Vec<ParticipantRecord>,
    pub design: TrialDesign,
    pub coarsening: CoarseningMap,
    pub kind: DatasetKind,
}

impl Dataset {
    /// Builds a dataset from already-validated parts. `v` is recomputed from `z`.
    pub fn new(
        mut records: Vec<ParticipantRecord>,
        design: TrialDesign,
        coarsening: CoarseningMap,
        kind: DatasetKind,
    ) -> Self {
        for r in &mut records {
            r.v = coarsening.coarsen(r.z);
        }
        Dataset {
            records,
            design,
            coarsening,
            kind,
        }
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    /// Window set used when estimating curves for `arm`: the design window set on platform
    /// data, every window on separate-trial data.
    pub fn estimation_windows(&self, arm: Arm) -> WindowSet {
        match self.kind {
            DatasetKind::Platform => self.design.windows(arm),
            DatasetKind::Separate(_) => WindowSet::all(),
        }
    }

    /// The same records under a different coarsening of the same covariate levels.
    pub fn with_coarsening(&self, coarsening: CoarseningMap) -> Result<Dataset, DataError> {
        let mut remap = Vec::with_capacity(self.coarsening.z_count());
        for label in self.coarsening.z_labels() {
            remap.push(coarsening.z_index(label).ok_or_else(|| {
                DataError::InvalidCoarsening(format!("level '{label}' has no image"))
            })?);
        }
        let records = self
            .records
            .iter()
            .map(|r| ParticipantRecord {
                z: remap[r.z],
                v: coarsening.coarsen(remap[r.z]),
                ..r.clone()
            })
            .collect();
        Ok(Dataset {
            records,
            design: self.design.clone(),
            coarsening,
            kind: self.kind,
        })
    }

    /// Writes the records as CSV with the canonical header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(CSV_HEADER)?;
        for r in &self.records {
            out.write_record([
                r.id.to_string(),
                r.x.to_string(),
                u8::from(r.delta).to_string(),
                r.arm.to_string(),
                r.window.to_string(),
                self.coarsening.z_label(r.z).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// Parses a CSV byte stream into a dataset. Row order is preserved.
pub fn load_dataset<R: Read>(
    source: R,
    design: TrialDesign,
    coarsening: CoarseningMap,
    kind: DatasetKind,
) -> Result<Dataset, DataError> {
    if let DatasetKind::Separate(a) = kind {
        if a == CONTROL || a > design.k {
            return Err(DataError::InvalidDesign(format!(
                "separate trial arm {a} is not an active arm of the design"
            )));
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.iter().map(String::as_str).ne(CSV_HEADER.iter().copied()) {
        return Err(DataError::BadHeader { found: header });
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let malformed = |reason: String| DataError::MalformedRow { line, reason };
        if row.len() != CSV_HEADER.len() {
            return Err(malformed(format!("expected 6 fields, found {}", row.len())));
        }
        let id: u64 = row[0]
            .parse()
            .map_err(|_| malformed(format!("id '{}' is not a non-negative integer", &row[0])))?;
        let x: f64 = row[1]
            .parse()
            .map_err(|_| malformed(format!("x '{}' is not a number", &row[1])))?;
        if !x.is_finite() {
            return Err(malformed("x must be finite".into()));
        }
        if x < 0.0 {
            return Err(DataError::NegativeTime { line });
        }
        let delta = match &row[2] {
            "0" => false,
            "1" => true,
            other => return Err(malformed(format!("delta '{other}' is not 0 or 1"))),
        };
        let arm: Arm = row[3]
            .parse()
            .map_err(|_| malformed(format!("arm '{}' is not an integer label", &row[3])))?;
        let arm_ok = match kind {
            DatasetKind::Platform => arm <= design.k,
            DatasetKind::Separate(a) => arm == CONTROL || arm == a,
        };
        if !arm_ok {
            return Err(DataError::UnknownArm { line, arm });
        }
        let window: u32 = row[4]
            .parse()
            .map_err(|_| malformed(format!("window '{}' is not an integer", &row[4])))?;
        if !(1..=design.q).contains(&window) {
            return Err(DataError::UnknownWindow { line, window });
        }
        let z = coarsening
            .z_index(&row[5])
            .ok_or_else(|| DataError::UnknownCovariate {
                line,
                z: row[5].to_string(),
            })?;
        records.push(ParticipantRecord {
            id,
            x,
            delta,
            arm,
            window,
            z,
            v: coarsening.coarsen(z),
        });
    }
    Ok(Dataset {
        records,
        design,
        coarsening,
        kind,
    })
}

pub fn load_design<R: Read>(source: R) -> Result<TrialDesign, DataError> {
    Ok(serde_json::from_reader(source)?)
}

pub fn load_coarsening<R: Read>(source: R) -> Result<CoarseningMap, DataError> {
    Ok(serde_json::from_reader(source)?)
}

/// Empirical mass of the context `(W in w_a, V = v)` for one active arm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratumMass {
    pub arm: Arm,
    pub v: String,
    /// Records (any arm) with `W in w_a`, `V = v`.
    pub context: usize,
    pub on_arm: usize,
    pub on_control: usize,
    /// `RR(.|a, v)` is estimable: both arm and control records are present.
    pub defined: bool,
}

/// Risk-set check at time 0 for one covariate level present in an arm's context.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellCheck {
    pub arm: Arm,
    pub z: String,
    pub arm_at_risk: usize,
    pub control_at_risk: usize,
}

impl CellCheck {
    pub fn nonempty(&self) -> bool {
        self.arm_at_risk > 0 && self.control_at_risk > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowViolation {
    pub id: u64,
    pub arm: Arm,
    pub window: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub strata: Vec<StratumMass>,
    pub cells: Vec<CellCheck>,
    pub window_violations: Vec<WindowViolation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.window_violations.is_empty()
            && self.strata.iter().all(|s| s.defined)
            && self.cells.iter().all(CellCheck::nonempty)
    }

    /// Human-readable list of problems.
    pub fn flags(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in self.strata.iter().filter(|s| !s.defined) {
            out.push(format!("RR(.|{},{}) undefined", s.arm, s.v));
        }
        for c in self.cells.iter().filter(|c| !c.nonempty()) {
            out.push(format!(
                "empty risk set at time 0 for arm {} or control in covariate cell {}",
                c.arm, c.z
            ));
        }
        for v in &self.window_violations {
            out.push(format!(
                "record {} on arm {} enrolled in window {} outside its design windows",
                v.id, v.arm, v.window
            ));
        }
        out
    }
}

/// Empirical well-definedness checks. Report-only.
pub fn validate(dataset: &Dataset) -> ValidationReport {
    let map = &dataset.coarsening;
    let mut report = ValidationReport::default();

    if let DatasetKind::Platform = dataset.kind {
        let control_windows = dataset.design.windows(CONTROL);
        for r in &dataset.records {
            let allowed = dataset.design.windows(r.arm);
            let ok = if r.arm == CONTROL {
                control_windows.contains(r.window)
            } else {
                allowed.contains(r.window)
            };
            if !ok {
                report.window_violations.push(WindowViolation {
                    id: r.id,
                    arm: r.arm,
                    window: r.window,
                });
            }
        }
    }

    let arms: Vec<Arm> = match dataset.kind {
        DatasetKind::Platform => dataset.design.active_arms().collect(),
        DatasetKind::Separate(a) => vec![a],
    };
    for a in arms {
        let windows = dataset.estimation_windows(a);
        let in_context: Vec<&ParticipantRecord> = dataset
            .records
            .iter()
            .filter(|r| windows.contains(r.window))
            .collect();
        for v in 0..map.v_count() {
            let ctx = in_context.iter().filter(|r| r.v == v);
            let (mut context, mut on_arm, mut on_control) = (0, 0, 0);
            for r in ctx {
                context += 1;
                if r.arm == a {
                    on_arm += 1;
                } else if r.arm == CONTROL {
                    on_control += 1;
                }
            }
            report.strata.push(StratumMass {
                arm: a,
                v: map.v_label(v).to_string(),
                context,
                on_arm,
                on_control,
                defined: on_arm > 0 && on_control > 0,
            });
        }
        for z in 0..map.z_count() {
            let present = in_context.iter().any(|r| r.z == z);
            if !present {
                continue;
            }
            let arm_at_risk = in_context
                .iter()
                .filter(|r| r.z == z && r.arm == a)
                .count();
            let control_at_risk = in_context
                .iter()
                .filter(|r| r.z == z && r.arm == CONTROL)
                .count();
            report.cells.push(CellCheck {
                arm: a,
                z: map.z_label(z).to_string(),
                arm_at_risk,
                control_at_risk,
            });
        }
    }
    report
}
