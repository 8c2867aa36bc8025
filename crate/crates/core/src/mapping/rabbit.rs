use super::{HapticEvent, RabbitParams, Sequencing};
use crate::layout::ActuatorSite;

/// Tap train across two fingertips that makes a pitch class between them
/// feel as if it sits at `fraction` of the way from `from` to `to`.
///
/// `round(tap_count * fraction)` taps land on `to` and the rest on `from`.
/// Taps start at `t_on` and are spaced `inter_tap_ms` apart; when the train
/// would outlast the note the spacing is compressed so it ends with the
/// note, and if even that cannot fit the taps tile the note evenly.
pub fn rabbit_train(
    from: ActuatorSite,
    to: ActuatorSite,
    fraction: f64,
    t_on: f64,
    duration: f64,
    intensity: u8,
    params: &RabbitParams,
) -> Vec<HapticEvent> {
    let n = params.tap_count.max(1);
    let on_to = ((f64::from(n) * fraction.clamp(0.0, 1.0)).round() as u32).min(n);

    let mut spacing = params.inter_tap_ms / 1000.0;
    let mut tap = params.tap_duration_ms / 1000.0;
    let steps = f64::from(n - 1);
    if steps * spacing + tap > duration {
        if n > 1 && (duration - tap) / steps >= tap {
            spacing = (duration - tap) / steps;
        } else {
            spacing = duration / f64::from(n);
            tap = spacing;
        }
    }

    (0..n)
        .map(|i| {
            let at_to = match params.sequencing {
                Sequencing::Alternating => to_share(i + 1, on_to, n) > to_share(i, on_to, n),
                Sequencing::Saltation => i >= n - on_to,
            };
            HapticEvent {
                t_on: t_on + f64::from(i) * spacing,
                duration: tap,
                site: if at_to { to } else { from },
                intensity,
                gesture_id: 0,
            }
        })
        .collect()
}

/// Midpoint Bresenham: how many of the first `m` taps go to `to` when `k`
/// of `n` do, rounding half down so the train opens on `from`.
fn to_share(m: u32, k: u32, n: u32) -> u32 {
    (2 * m * k + n - 1) / (2 * n)
}
