//! Study metrics from trial records and machine song recognition from
//! haptic rhythm fingerprints.

use crate::layout::ActuatorSite;
use crate::timeline::{DeviceCommand, HapticTimeline};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use thiserror::Error;

/// Upper bound on `total_trials` accepted by [`table1_consistency`].
pub const TABLE1_MAX_TOTAL: u32 = 200;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trials file: {0}")]
    Csv(#[from] csv::Error),
    #[error("trial {row}: confidence {value} outside 1..=10")]
    Confidence { row: usize, value: u8 },
    #[error("label `{0}` is not in the label set")]
    UnknownLabel(String),
    #[error("confusion matrix must be square over {labels} labels")]
    Shape { labels: usize },
    #[error("total of {0} trials exceeds the exhaustive search bound of {TABLE1_MAX_TOTAL}")]
    TooManyTrials(u32),
    #[error("expected {expected} entries, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct TrialRecord {
    #[serde(rename = "participant")]
    pub participant_id: String,
    pub presented: String,
    pub answered: String,
    #[serde(deserialize_with = "optional_u8")]
    pub confidence: Option<u8>,
    #[serde(deserialize_with = "flag")]
    pub trained: bool,
}

impl TrialRecord {
    pub fn is_correct(&self) -> bool {
        self.presented == self.answered
    }
}

fn optional_u8<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u8>, D::Error> {
    let raw = String::deserialize(d)?;
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(serde::de::Error::custom)
}

fn flag<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    let raw = String::deserialize(d)?;
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "y" | "1" => Ok(true),
        "false" | "no" | "n" | "0" => Ok(false),
        other => Err(serde::de::Error::custom(format!("`{other}` is not a boolean"))),
    }
}

/// Reads `participant,presented,answered,confidence,trained` records.
pub fn load_trials<R: Read>(input: R) -> Result<Vec<TrialRecord>, EvalError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<TrialRecord>().enumerate() {
        let rec = rec?;
        if let Some(c) = rec.confidence {
            if !(1..=10).contains(&c) {
                return Err(EvalError::Confidence { row: i + 1, value: c });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Rows are presented labels, columns answered labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let n = labels.len();
        if counts.len() != n || counts.iter().any(|row| row.len() != n) {
            return Err(EvalError::Shape { labels: n });
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    /// Tallies trials over `labels`; every presented and answered label
    /// must belong to the set.
    pub fn from_trials(labels: &[String], trials: &[TrialRecord]) -> Result<Self, EvalError> {
        let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let find = |l: &str| index.get(l).copied().ok_or_else(|| EvalError::UnknownLabel(l.to_string()));
        let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
        for t in trials {
            counts[find(&t.presented)?][find(&t.answered)?] += 1;
        }
        Ok(ConfusionMatrix {
            labels: labels.to_vec(),
            counts,
        })
    }

    /// Label set = every label seen in the trials, sorted.
    pub fn from_trials_observed(trials: &[TrialRecord]) -> Self {
        let labels: BTreeSet<&str> = trials
            .iter()
            .flat_map(|t| [t.presented.as_str(), t.answered.as_str()])
            .collect();
        let labels: Vec<String> = labels.into_iter().map(str::to_string).collect();
        Self::from_trials(&labels, trials).expect("labels drawn from trials")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn column_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn diagonal(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelScores {
    pub label: String,
    /// `None` when nothing was answered with this label.
    pub precision: Option<f64>,
    /// `None` when this label was never presented.
    pub recall: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn precision_recall(m: &ConfusionMatrix) -> Vec<LabelScores> {
    (0..m.labels.len())
        .map(|i| LabelScores {
            label: m.labels[i].clone(),
            precision: ratio(m.counts[i][i], m.column_sum(i)),
            recall: ratio(m.counts[i][i], m.row_sum(i)),
        })
        .collect()
}

/// Diagonal over total; equals overall accuracy.
pub fn micro_recall(m: &ConfusionMatrix) -> Option<f64> {
    ratio(m.diagonal(), m.total())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupStats {
    pub trials: u64,
    pub correct: u64,
    pub confidence_sum: u64,
    pub confidence_count: u64,
}

impl GroupStats {
    fn add(&mut self, t: &TrialRecord) {
        self.trials += 1;
        self.correct += u64::from(t.is_correct());
        if let Some(c) = t.confidence {
            self.confidence_sum += u64::from(c);
            self.confidence_count += 1;
        }
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct, self.trials)
    }

    pub fn mean_confidence(&self) -> Option<f64> {
        ratio(self.confidence_sum, self.confidence_count)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupReport {
    pub participants: BTreeMap<String, GroupStats>,
    pub trained: GroupStats,
    pub untrained: GroupStats,
    pub overall: GroupStats,
}

pub fn accuracy_by_group(trials: &[TrialRecord]) -> GroupReport {
    let mut report = GroupReport::default();
    for t in trials {
        report.participants.entry(t.participant_id.clone()).or_default().add(t);
        if t.trained {
            report.trained.add(t);
        } else {
            report.untrained.add(t);
        }
        report.overall.add(t);
    }
    report
}

/// `round(100 * num / den)` with halves rounded up, in exact integers.
fn percent(num: u32, den: u32) -> u32 {
    (200 * num + den) / (2 * den)
}

fn to_percent(x: f64) -> u32 {
    (x * 100.0).round() as u32
}

/// Every 3×3 confusion matrix with `total_trials` entries whose per-label
/// precision and recall, rounded to two decimals, equal `targets`.
///
/// `row_sums` pins the number of trials per presented label. Labels whose
/// precision or recall is undefined never match a target.
pub fn table1_consistency(
    targets: &[(f64, f64)],
    total_trials: u32,
    row_sums: Option<&[u32]>,
) -> Result<Vec<[[u32; 3]; 3]>, EvalError> {
    if targets.len() != 3 {
        return Err(EvalError::Arity { expected: 3, got: targets.len() });
    }
    if let Some(rs) = row_sums {
        if rs.len() != 3 {
            return Err(EvalError::Arity { expected: 3, got: rs.len() });
        }
    }
    if total_trials > TABLE1_MAX_TOTAL {
        return Err(EvalError::TooManyTrials(total_trials));
    }
    let n = total_trials;
    let precision: Vec<u32> = targets.iter().map(|t| to_percent(t.0)).collect();
    let recall: Vec<u32> = targets.iter().map(|t| to_percent(t.1)).collect();

    // diag_ok[i][r]: diagonal values matching label i's recall at row sum r
    let diag_ok: Vec<Vec<Vec<u32>>> = (0..3)
        .map(|i| {
            (0..=n)
                .map(|r| if r == 0 { vec![] } else { (0..=r).filter(|&d| percent(d, r) == recall[i]).collect() })
                .collect()
        })
        .collect();
    // col_ok[i][d]: column sums matching label i's precision at diagonal d
    let col_ok: Vec<Vec<Vec<u32>>> = (0..3)
        .map(|i| {
            (0..=n)
                .map(|d| (d.max(1)..=n).filter(|&c| percent(d, c) == precision[i]).collect())
                .collect()
        })
        .collect();

    let mut found = Vec::new();
    let mut visit_rows = |rows: [u32; 3]| {
        for &d0 in &diag_ok[0][rows[0] as usize] {
            for &d1 in &diag_ok[1][rows[1] as usize] {
                for &d2 in &diag_ok[2][rows[2] as usize] {
                    let diag = [d0, d1, d2];
                    for &c0 in &col_ok[0][d0 as usize] {
                        for &c1 in &col_ok[1][d1 as usize] {
                            let Some(c2) = n.checked_sub(c0 + c1) else { continue };
                            if !col_ok[2][d2 as usize].contains(&c2) {
                                continue;
                            }
                            fill_off_diagonal(rows, [c0, c1, c2], diag, &mut found);
                        }
                    }
                }
            }
        }
    };
    match row_sums {
        Some(rs) => {
            if rs.iter().sum::<u32>() == n {
                visit_rows([rs[0], rs[1], rs[2]]);
            }
        }
        None => {
            for r0 in 0..=n {
                for r1 in 0..=n - r0 {
                    visit_rows([r0, r1, n - r0 - r1]);
                }
            }
        }
    }
    Ok(found)
}

/// With the diagonal fixed, choosing entry (0,1) determines the rest.
fn fill_off_diagonal(rows: [u32; 3], cols: [u32; 3], diag: [u32; 3], out: &mut Vec<[[u32; 3]; 3]>) {
    let a: [i64; 3] = std::array::from_fn(|i| i64::from(rows[i]) - i64::from(diag[i]));
    let b: [i64; 3] = std::array::from_fn(|j| i64::from(cols[j]) - i64::from(diag[j]));
    for x01 in 0..=a[0] {
        let x02 = a[0] - x01;
        let x21 = b[1] - x01;
        let x20 = a[2] - x21;
        let x10 = b[0] - x20;
        let x12 = a[1] - x10;
        if [x02, x21, x20, x10, x12].iter().any(|&x| x < 0) || x02 + x12 != b[2] {
            continue;
        }
        let u = |x: i64| x as u32;
        out.push([
            [diag[0], u(x01), u(x02)],
            [u(x10), diag[1], u(x12)],
            [u(x20), u(x21), diag[2]],
        ]);
    }
}

/// One fingerprint token: representative site id and the inter-onset
/// interval from the previous gesture in 10 ms bins.
pub type Token = (u8, u32);

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Fingerprint(pub Vec<Token>);

impl Fingerprint {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Builds tokens from `(onset seconds, site)` pairs already in onset order.
    pub fn from_onsets(onsets: &[(f64, ActuatorSite)]) -> Fingerprint {
        let mut prev = onsets.first().map_or(0.0, |o| o.0);
        Fingerprint(
            onsets
                .iter()
                .map(|&(t, site)| {
                    let ioi = ((t - prev) * 100.0).round().max(0.0) as u32;
                    prev = t;
                    (site.id(), ioi)
                })
                .collect(),
        )
    }
}

/// Gesture onsets in order; each gesture's site is that of its first event.
pub fn fingerprint(timeline: &HapticTimeline) -> Fingerprint {
    let mut first: BTreeMap<u64, (f64, ActuatorSite)> = BTreeMap::new();
    for e in timeline.events() {
        first.entry(e.gesture_id).or_insert((e.t_on, e.site));
    }
    let mut onsets: Vec<(f64, u64, ActuatorSite)> = first.into_iter().map(|(g, (t, s))| (t, g, s)).collect();
    onsets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let onsets: Vec<(f64, ActuatorSite)> = onsets.into_iter().map(|(t, _, s)| (t, s)).collect();
    Fingerprint::from_onsets(&onsets)
}

/// Fingerprint of a command stream, taking each site's switch-on from 0
/// as an onset. Commands must be time-ordered.
pub fn fingerprint_from_commands(commands: &[DeviceCommand]) -> Fingerprint {
    let mut level = [0u8; 10];
    let mut onsets = Vec::new();
    for c in commands {
        let slot = &mut level[usize::from(c.site.id())];
        if *slot == 0 && c.intensity > 0 {
            onsets.push((c.t, c.site));
        }
        *slot = c.intensity;
    }
    Fingerprint::from_onsets(&onsets)
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer length; 0 for two empty sequences.
pub fn normalized_distance(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(&a.0, &b.0) as f64 / longest as f64
}

/// Nearest candidate by normalized edit distance, ties to the smallest
/// label. Score is `1 - distance`. `None` when there are no candidates.
pub fn identify(query: &Fingerprint, candidates: &BTreeMap<String, Fingerprint>) -> Option<(String, f64)> {
    let mut best: Option<(&String, f64)> = None;
    for (label, fp) in candidates {
        let d = normalized_distance(query, fp);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((label, d));
        }
    }
    best.map(|(label, d)| (label.clone(), 1.0 - d))
}

/// Shifts every gesture by its own N(0, sigma) offset; onsets clamp at 0.
pub fn jittered<R: Rng + ?Sized>(timeline: &HapticTimeline, sigma: f64, rng: &mut R) -> HapticTimeline {
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut shift: BTreeMap<u64, f64> = BTreeMap::new();
    let events = timeline
        .events()
        .iter()
        .map(|e| {
            let dt = *shift.entry(e.gesture_id).or_insert_with(|| normal.sample(rng));
            let mut e = *e;
            e.t_on = (e.t_on + dt).max(0.0);
            e
        })
        .collect();
    HapticTimeline::new(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::ActuatorSite::*;
    use crate::mapping::HapticEvent;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn labels(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("song{i}")).collect()
    }

    fn trial(p: &str, presented: &str, answered: &str, conf: Option<u8>, trained: bool) -> TrialRecord {
        TrialRecord {
            participant_id: p.into(),
            presented: presented.into(),
            answered: answered.into(),
            confidence: conf,
            trained,
        }
    }

    #[test]
    fn csv_loading() {
        let text = "participant,presented,answered,confidence,trained\n\
                    p1,song1,song1,9,true\n\
                    p2, song2 ,song3,,no\n";
        let t = load_trials(text.as_bytes()).unwrap();
        assert_eq!(t[0], trial("p1", "song1", "song1", Some(9), true));
        assert_eq!(t[1], trial("p2", "song2", "song3", None, false));
        let bad = "participant,presented,answered,confidence,trained\np,a,a,11,1\n";
        assert!(matches!(load_trials(bad.as_bytes()), Err(EvalError::Confidence { row: 1, value: 11 })));
        let header_only = "participant,presented,answered,confidence,trained\n";
        assert!(load_trials(header_only.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn perfect_diagonal() {
        let m = ConfusionMatrix::new(labels(3), vec![vec![5, 0, 0], vec![0, 4, 0], vec![0, 0, 7]]).unwrap();
        for s in precision_recall(&m) {
            assert_eq!(s.precision, Some(1.0));
            assert_eq!(s.recall, Some(1.0));
        }
    }

    #[test]
    fn constructed_matrix() {
        let m = ConfusionMatrix::new(labels(3), vec![vec![15, 1, 0], vec![1, 15, 2], vec![0, 2, 14]]).unwrap();
        let s = precision_recall(&m);
        assert_eq!(s[0].precision, Some(0.9375));
        assert_eq!(s[0].recall, Some(0.9375));
        assert_eq!(s[1].precision, Some(15.0 / 18.0));
        assert_eq!(s[2].recall, Some(14.0 / 16.0));
    }

    #[test]
    fn undefined_is_not_zero() {
        let m = ConfusionMatrix::new(labels(2), vec![vec![3, 0], vec![0, 0]]).unwrap();
        let s = precision_recall(&m);
        assert_eq!(s[1].precision, None);
        assert_eq!(s[1].recall, None);
        let empty = ConfusionMatrix::new(labels(2), vec![vec![0, 0], vec![0, 0]]).unwrap();
        assert_eq!(micro_recall(&empty), None);
    }

    #[test]
    fn matrix_shape_and_labels() {
        assert!(ConfusionMatrix::new(labels(2), vec![vec![1, 2]]).is_err());
        let err = ConfusionMatrix::from_trials(&labels(2), &[trial("p", "song1", "song9", None, false)]);
        assert!(matches!(err, Err(EvalError::UnknownLabel(l)) if l == "song9"));
    }

    /// Per-label correct/detected/given tallies straight from the trials.
    fn count_oracle(trials: &[TrialRecord], label: &str) -> (u64, u64, u64) {
        let correct = trials.iter().filter(|t| t.presented == label && t.answered == label).count();
        let detected = trials.iter().filter(|t| t.answered == label).count();
        let given = trials.iter().filter(|t| t.presented == label).count();
        (correct as u64, detected as u64, given as u64)
    }

    fn arb_trials() -> impl Strategy<Value = Vec<TrialRecord>> {
        proptest::collection::vec((0usize..3, 0usize..3, any::<bool>()), 0..60).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (p, a, tr))| {
                    trial(&format!("p{}", i % 4), &format!("song{}", p + 1), &format!("song{}", a + 1), None, tr)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn scores_match_count_oracle(trials in arb_trials()) {
            let l = labels(3);
            let m = ConfusionMatrix::from_trials(&l, &trials).unwrap();
            for (s, label) in precision_recall(&m).iter().zip(&l) {
                let (c, det, giv) = count_oracle(&trials, label);
                prop_assert_eq!(s.precision, (det > 0).then(|| c as f64 / det as f64));
                prop_assert_eq!(s.recall, (giv > 0).then(|| c as f64 / giv as f64));
                for v in [s.precision, s.recall].into_iter().flatten() {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            let acc = accuracy_by_group(&trials).overall.accuracy();
            prop_assert_eq!(micro_recall(&m), acc);
        }
    }

    #[test]
    fn group_accuracy() {
        let mut trials = Vec::new();
        for i in 0..10 {
            let answered = if i < 8 { "song1" } else { "song2" };
            trials.push(trial("u1", "song1", answered, Some(6), false));
        }
        for _ in 0..10 {
            trials.push(trial("t1", "song2", "song2", Some(9), true));
        }
        let r = accuracy_by_group(&trials);
        assert_eq!(r.participants["u1"].accuracy(), Some(0.8));
        assert_eq!(r.participants["t1"].accuracy(), Some(1.0));
        assert_eq!(r.trained.mean_confidence(), Some(9.0));
        assert_eq!(r.untrained.mean_confidence(), Some(6.0));
        assert_eq!(accuracy_by_group(&[]).trained.accuracy(), None);
    }

    #[test]
    fn synthetic_cohort_group_split() {
        // 3 trained all correct; 5 untrained of which 3 at 8/10
        let mut trials = Vec::new();
        for p in 0..8 {
            let trained = p < 3;
            for i in 0..10 {
                let wrong = !trained && p < 6 && i >= 8;
                trials.push(trial(
                    &format!("p{p}"),
                    "song1",
                    if wrong { "song2" } else { "song1" },
                    None,
                    trained,
                ));
            }
        }
        let r = accuracy_by_group(&trials);
        assert_eq!(r.trained.accuracy(), Some(1.0));
        let at_80 = r.participants.values().filter(|s| s.accuracy() == Some(0.8)).count();
        let at_100 = r.participants.values().filter(|s| s.accuracy() == Some(1.0)).count();
        assert_eq!((at_80, at_100), (3, 5));
    }

    #[test]
    fn exact_percent_rounding() {
        assert_eq!(percent(15, 16), 94);
        assert_eq!(percent(1, 8), 13);
        assert_eq!(percent(5, 6), 83);
        assert_eq!(percent(0, 3), 0);
    }

    #[test]
    fn all_ones_total_30() {
        let found = table1_consistency(&[(1.0, 1.0); 3], 30, None).unwrap();
        assert_eq!(found.len(), 406);
        for m in &found {
            for i in 0..3 {
                assert!(m[i][i] > 0);
                for j in 0..3 {
                    if i != j {
                        assert_eq!(m[i][j], 0);
                    }
                }
            }
        }
    }

    #[test]
    fn empty_row_cannot_match() {
        let found = table1_consistency(&[(0.5, 1.0), (1.0, 1.0), (1.0, 1.0)], 10, Some(&[0, 5, 5])).unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn table1_bounds() {
        assert!(matches!(table1_consistency(&[(1.0, 1.0); 3], 201, None), Err(EvalError::TooManyTrials(201))));
        assert!(table1_consistency(&[(1.0, 1.0); 2], 10, None).is_err());
    }

    /// Every 3x3 matrix with the given total, checked one by one.
    fn brute_table1(targets: &[(f64, f64)], total: u32) -> Vec<[[u32; 3]; 3]> {
        fn rounded(num: u32, den: u32) -> Option<u32> {
            (den > 0).then(|| (f64::from(num) / f64::from(den) * 100.0 + 0.5 + 1e-9).floor() as u32)
        }
        let mut out = Vec::new();
        let mut cells = [0u32; 9];
        fn rec(k: usize, left: u32, cells: &mut [u32; 9], f: &mut dyn FnMut(&[u32; 9])) {
            if k == 8 {
                cells[8] = left;
                f(cells);
                return;
            }
            for v in 0..=left {
                cells[k] = v;
                rec(k + 1, left - v, cells, f);
            }
        }
        rec(0, total, &mut cells, &mut |c| {
            let m = [[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]];
            let ok = (0..3).all(|i| {
                let row: u32 = m[i].iter().sum();
                let col: u32 = (0..3).map(|r| m[r][i]).sum();
                let p = rounded(m[i][i], col);
                let r = rounded(m[i][i], row);
                p == Some((targets[i].0 * 100.0).round() as u32) && r == Some((targets[i].1 * 100.0).round() as u32)
            });
            if ok {
                out.push(m);
            }
        });
        out
    }

    #[test]
    fn table1_matches_brute_force() {
        let cases: [[(f64, f64); 3]; 4] = [
            [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)],
            [(0.67, 1.0), (1.0, 0.5), (1.0, 1.0)],
            [(0.75, 0.75), (0.75, 0.75), (1.0, 1.0)],
            [(0.8, 0.67), (0.5, 0.5), (0.67, 1.0)],
        ];
        for targets in &cases {
            for total in [4, 7, 10] {
                let mut fast = table1_consistency(targets, total, None).unwrap();
                let mut slow = brute_table1(targets, total);
                fast.sort();
                slow.sort();
                assert_eq!(fast, slow, "targets {targets:?} total {total}");
            }
        }
    }

    fn gesture(t_on: f64, site: ActuatorSite, gesture_id: u64) -> HapticEvent {
        HapticEvent {
            t_on,
            duration: 0.1,
            site,
            intensity: 100,
            gesture_id,
        }
    }

    fn melody(onsets: &[f64]) -> HapticTimeline {
        HapticTimeline::new(
            onsets
                .iter()
                .enumerate()
                .map(|(i, &t)| gesture(t, ActuatorSite::TIPS[i % 5], i as u64))
                .collect(),
        )
    }

    #[test]
    fn fingerprint_basics() {
        assert!(fingerprint(&HapticTimeline::default()).is_empty());
        assert_eq!(fingerprint(&melody(&[0.3])).0, vec![(0, 0)]);
        let fp = fingerprint(&melody(&[0.0, 0.5, 1.0, 1.5]));
        assert!(fp.0[1..].iter().all(|t| t.1 == 50));
    }

    #[test]
    fn fingerprint_uses_first_event_per_gesture() {
        let tl = HapticTimeline::new(vec![
            gesture(0.0, TipIndex, 0),
            gesture(0.06, TipMiddle, 0),
            gesture(0.25, Thenar, 1),
        ]);
        assert_eq!(fingerprint(&tl).0, vec![(1, 0), (8, 25)]);
    }

    #[test]
    fn slower_tempo_doubles_iois() {
        let onsets = [0.0, 0.12, 0.25, 0.5, 0.62];
        let slow: Vec<f64> = onsets.iter().map(|t| t * 2.0).collect();
        let a = fingerprint(&melody(&onsets));
        let b = fingerprint(&melody(&slow));
        let sites = |f: &Fingerprint| f.0.iter().map(|t| t.0).collect::<Vec<_>>();
        assert_eq!(sites(&a), sites(&b));
        let expected: Vec<u32> = slow
            .windows(2)
            .map(|w| ((w[1] - w[0]) * 100.0).round() as u32)
            .collect();
        assert_eq!(b.0[1..].iter().map(|t| t.1).collect::<Vec<_>>(), expected);
    }

    #[test]
    fn commands_fingerprint_uses_rising_edges() {
        let c = |t, site, intensity| DeviceCommand { t, site, intensity };
        let commands = vec![
            c(0.0, TipRing, 100),
            c(0.1, TipRing, 150),
            c(0.2, TipRing, 0),
            c(0.3, TipThumb, 90),
            c(0.4, TipRing, 90),
        ];
        assert_eq!(fingerprint_from_commands(&commands).0, vec![(3, 0), (0, 30), (3, 10)]);
    }

    #[test]
    fn levenshtein_table() {
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
        assert_eq!(levenshtein(b"", b"abc"), 3);
        assert_eq!(levenshtein(b"flaw", b"lawn"), 2);
        assert_eq!(levenshtein::<u8>(b"", b""), 0);
    }

    #[test]
    fn identify_identity_and_ties() {
        let a = Fingerprint(vec![(0, 0), (1, 25), (2, 25)]);
        let b = Fingerprint(vec![(0, 0), (1, 25), (3, 25)]);
        let c = Fingerprint(vec![(0, 0), (1, 25), (4, 25)]);
        let cands: BTreeMap<String, Fingerprint> =
            [("beta".to_string(), b.clone()), ("alpha".to_string(), a.clone())].into();
        assert_eq!(identify(&a, &cands), Some(("alpha".into(), 1.0)));
        let (label, score) = identify(&c, &cands).unwrap();
        assert_eq!(label, "alpha");
        assert!((score - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(identify(&a, &BTreeMap::new()), None);
    }

    proptest! {
        #[test]
        fn shift_invariance_and_self_identification(
            gaps in proptest::collection::vec(1u32..100, 1..30),
            shift in 0u32..500,
        ) {
            let mut t = 0.0;
            let onsets: Vec<f64> = gaps.iter().map(|g| { t += f64::from(*g) / 64.0; t }).collect();
            let shifted: Vec<f64> = onsets.iter().map(|o| o + f64::from(shift) / 64.0).collect();
            let fp = fingerprint(&melody(&onsets));
            prop_assert_eq!(&fp, &fingerprint(&melody(&shifted)));

            let other = fingerprint(&melody(&onsets[..onsets.len() / 2]));
            let cands: BTreeMap<String, Fingerprint> =
                [("query".to_string(), fp.clone()), ("aaa".to_string(), other)].into();
            let (label, score) = identify(&fp, &cands).unwrap();
            if fp != cands["aaa"] {
                prop_assert_eq!(label, "query");
            }
            prop_assert_eq!(score, 1.0);
        }
    }

    #[test]
    fn jitter_moves_whole_gestures() {
        let tl = HapticTimeline::new(vec![
            gesture(1.0, TipIndex, 0),
            gesture(1.06, TipMiddle, 0),
            gesture(2.0, Thenar, 1),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let j = jittered(&tl, 0.02, &mut rng);
        let g0: Vec<f64> = j.events().iter().filter(|e| e.gesture_id == 0).map(|e| e.t_on).collect();
        assert!((g0[1] - g0[0] - 0.06).abs() < 1e-9);
        assert_eq!(jittered(&tl, 0.0, &mut rng), tl);
    }
}
