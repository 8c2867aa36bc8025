//! Per-actuator arbitration of overlapping gestures and clocked playback.

use crate::layout::ActuatorSite;
use crate::mapping::HapticEvent;
use crate::transport::Backend;
use std::collections::BTreeMap;
use std::io;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Lateness above which a playback report flags a command (seconds).
pub const DEFAULT_LATENESS_ALERT: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HapticTimeline {
    events: Vec<HapticEvent>,
    duration: f64,
}

impl HapticTimeline {
    /// Sorts events by `(t_on, site id, gesture_id)` and sets the duration
    /// to the end of the last event.
    pub fn new(mut events: Vec<HapticEvent>) -> HapticTimeline {
        events.sort_by(|a, b| {
            a.t_on
                .total_cmp(&b.t_on)
                .then(a.site.id().cmp(&b.site.id()))
                .then(a.gesture_id.cmp(&b.gesture_id))
        });
        let duration = events.iter().map(HapticEvent::end).fold(0.0, f64::max);
        HapticTimeline { events, duration }
    }

    pub fn events(&self) -> &[HapticEvent] {
        &self.events
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<HapticEvent> {
        self.events
    }
}

/// Set one actuator to an intensity at time `t`; 0 switches it off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceCommand {
    pub t: f64,
    pub site: ActuatorSite,
    pub intensity: u8,
}

/// Max-merges overlapping events per site into change-point commands.
///
/// At any instant a site's level is the highest intensity among its events
/// active at that instant (`t_on <= t < t_on + duration`). Commands are
/// emitted only where the level changes, ordered by `(t, site id)`, and
/// every touched site finishes at 0.
pub fn arbitrate(timeline: &HapticTimeline) -> Vec<DeviceCommand> {
    let mut per_site: BTreeMap<u8, Vec<&HapticEvent>> = BTreeMap::new();
    for e in timeline.events() {
        per_site.entry(e.site.id()).or_default().push(e);
    }

    let mut commands = Vec::new();
    for events in per_site.values() {
        let site = events[0].site;
        // (time, is_start, intensity); ends sort before starts at equal time
        let mut edges: Vec<(f64, bool, u8)> = Vec::with_capacity(events.len() * 2);
        for e in events {
            edges.push((e.t_on, true, e.intensity));
            edges.push((e.end(), false, e.intensity));
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut active: BTreeMap<u8, usize> = BTreeMap::new();
        let mut level = 0u8;
        for group in edges.chunk_by(|a, b| a.0 == b.0) {
            for &(_, is_start, intensity) in group {
                if is_start {
                    *active.entry(intensity).or_default() += 1;
                } else if let Some(n) = active.get_mut(&intensity) {
                    *n -= 1;
                    if *n == 0 {
                        active.remove(&intensity);
                    }
                }
            }
            let now = active.keys().next_back().copied().unwrap_or(0);
            if now != level {
                commands.push(DeviceCommand {
                    t: group[0].0,
                    site,
                    intensity: now,
                });
                level = now;
            }
        }
    }
    commands.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.site.id().cmp(&b.site.id())));
    commands
}

/// Time source for playback, in seconds since playback start.
pub trait Clock {
    fn now(&self) -> f64;
    /// Blocks (or jumps, for simulated clocks) until `t`.
    fn wait_until(&mut self, t: f64);
}

/// Simulated clock: waiting jumps straight to the target time.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now: f64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&mut self, dt: f64) {
        self.now += dt.max(0.0);
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> f64 {
        self.now
    }

    fn wait_until(&mut self, t: f64) {
        if t > self.now {
            self.now = t;
        }
    }
}

/// Wall clock anchored at construction.
#[derive(Debug, Clone)]
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { start: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn wait_until(&mut self, t: f64) {
        let remaining = t - self.now();
        if remaining > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(remaining));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlaybackReport {
    pub emitted: usize,
    /// Worst delivery delay behind the scheduled time, in seconds.
    pub max_lateness: f64,
    /// Commands delivered later than the alert threshold.
    pub late_commands: usize,
    pub cancelled: bool,
}

#[derive(Debug, Error)]
#[error("backend write failed at command {index}: {source}")]
pub struct PlaybackError {
    pub index: usize,
    #[source]
    pub source: io::Error,
    /// Shutoff writes that also failed.
    pub shutoff_failures: usize,
}

/// Delivers commands to `backend` as `clock` reaches each command's time.
///
/// `cancel` is polled between emissions; on cancellation every site is
/// switched off and the partial report is returned. A backend failure
/// also triggers the shutoff before the error is returned.
pub fn playback(
    commands: &[DeviceCommand],
    clock: &mut dyn Clock,
    backend: &mut dyn Backend,
    cancel: &AtomicBool,
    lateness_alert: f64,
) -> Result<PlaybackReport, PlaybackError> {
    let mut report = PlaybackReport::default();
    for (index, cmd) in commands.iter().enumerate() {
        if cancel.load(Ordering::Relaxed) {
            report.cancelled = true;
            shutoff(backend, clock.now());
            return Ok(report);
        }
        clock.wait_until(cmd.t);
        let lateness = (clock.now() - cmd.t).max(0.0);
        if let Err(source) = backend.send(cmd) {
            let shutoff_failures = shutoff(backend, clock.now());
            return Err(PlaybackError {
                index,
                source,
                shutoff_failures,
            });
        }
        report.emitted += 1;
        report.max_lateness = report.max_lateness.max(lateness);
        if lateness > lateness_alert {
            report.late_commands += 1;
        }
    }
    if let Err(source) = backend.flush() {
        let shutoff_failures = shutoff(backend, clock.now());
        return Err(PlaybackError {
            index: commands.len(),
            source,
            shutoff_failures,
        });
    }
    Ok(report)
}

/// Commands every site to 0, returning how many writes failed.
pub fn shutoff(backend: &mut dyn Backend, t: f64) -> usize {
    let mut failures = 0;
    for site in ActuatorSite::ALL {
        if backend.send(&DeviceCommand { t, site, intensity: 0 }).is_err() {
            failures += 1;
        }
    }
    if backend.flush().is_err() {
        failures += 1;
    }
    failures
}
