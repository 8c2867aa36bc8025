use super::SmfDocument;

/// 120 BPM, the MIDI default when a file carries no tempo event.
pub const DEFAULT_TEMPO_USPQ: u32 = 500_000;

/// Tempo segments as `(start tick, microseconds per quarter)`, strictly
/// increasing in tick and always starting at tick 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TempoMap {
    entries: Vec<(u64, u32)>,
}

impl Default for TempoMap {
    fn default() -> Self {
        TempoMap {
            entries: vec![(0, DEFAULT_TEMPO_USPQ)],
        }
    }
}

impl TempoMap {
    /// Builds a map from raw tempo changes in any order. Later entries win
    /// on equal ticks.
    pub fn from_changes(changes: &[(u64, u32)]) -> TempoMap {
        let mut sorted = changes.to_vec();
        sorted.sort_by_key(|&(tick, _)| tick);
        let mut entries: Vec<(u64, u32)> = Vec::with_capacity(sorted.len() + 1);
        for (tick, uspq) in sorted {
            match entries.last_mut() {
                Some(last) if last.0 == tick => last.1 = uspq,
                _ => entries.push((tick, uspq)),
            }
        }
        if entries.first().map(|e| e.0) != Some(0) {
            entries.insert(0, (0, DEFAULT_TEMPO_USPQ));
        }
        TempoMap { entries }
    }

    pub fn entries(&self) -> &[(u64, u32)] {
        &self.entries
    }

    /// Seconds elapsed at `tick`.
    pub fn seconds_at(&self, ticks_per_quarter: u16, tick: u64) -> f64 {
        ticks_to_seconds(self, ticks_per_quarter, tick)
    }
}

pub fn build_tempo_map(doc: &SmfDocument) -> TempoMap {
    TempoMap::from_changes(&doc.tempo_changes)
}

/// Piecewise-linear tick to seconds conversion across tempo segments.
pub fn ticks_to_seconds(map: &TempoMap, ticks_per_quarter: u16, tick: u64) -> f64 {
    assert!(ticks_per_quarter > 0, "ticks per quarter must be positive");
    let tpq = f64::from(ticks_per_quarter);
    let mut micros = 0.0f64;
    for (i, &(start, uspq)) in map.entries.iter().enumerate() {
        if start >= tick {
            break;
        }
        let end = map
            .entries
            .get(i + 1)
            .map_or(tick, |&(next, _)| next.min(tick));
        micros += (end - start) as f64 * f64::from(uspq) / tpq;
    }
    micros / 1_000_000.0
}
