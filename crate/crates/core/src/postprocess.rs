//! Smoothing of raw per-sample predictions and merging of nearby detections.
//!
//! Smoothing uses a *trailing* (causal) window so it can run online; this
//! delays detected onsets by up to `smooth_window_s`. A sample becomes 1 only
//! when strictly more than half of the window is 1, so ties resolve to 0.
//! A moving average thresholded at 0.5 and a majority vote are the same
//! operator on binary labels, so only one is implemented.

use serde::{Deserialize, Serialize};

use crate::error::{err, Result};
use crate::timeline::{
    events_to_labels, labels_to_events, validate_event_list, Event, LabelSeries, SEIZURE,
};

const MODULE: &str = "postprocess";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocessConfig {
    pub smooth_window_s: f64,
    pub merge_gap_s: f64,
    /// Events shorter than this are dropped after merging; 0 disables.
    pub min_event_s: f64,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            smooth_window_s: 5.0,
            merge_gap_s: 30.0,
            min_event_s: 0.0,
        }
    }
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.smooth_window_s > 0.0) {
            return Err(err!(Validation, MODULE, "smooth_window_s must be > 0"));
        }
        if !(self.merge_gap_s >= 0.0) {
            return Err(err!(Validation, MODULE, "merge_gap_s must be >= 0"));
        }
        if !(self.min_event_s >= 0.0) {
            return Err(err!(Validation, MODULE, "min_event_s must be >= 0"));
        }
        Ok(())
    }

    /// Smoothing window length in samples at `fs` (at least one sample).
    pub fn window_samples(&self, fs: f64) -> usize {
        ((self.smooth_window_s * fs).round() as usize).max(1)
    }
}

/// Trailing-window strict-majority vote.
pub fn smooth_majority(hyp: &LabelSeries, cfg: &PostprocessConfig) -> Result<LabelSeries> {
    cfg.validate()?;
    let w = cfg.window_samples(hyp.fs());
    let labels = hyp.labels();
    let mut out = Vec::with_capacity(labels.len());
    let mut ones = 0usize;
    for i in 0..labels.len() {
        ones += labels[i] as usize;
        if i >= w {
            ones -= labels[i - w] as usize;
        }
        let span = w.min(i + 1);
        out.push(u8::from(2 * ones > span));
    }
    LabelSeries::new(out, hyp.fs(), hyp.origin())
}

/// Replaces consecutive events closer than `merge_gap_s` by their hull
/// (transitively), then drops events shorter than `min_event_s`.
pub fn merge_close_events(events: &[Event], cfg: &PostprocessConfig) -> Result<Vec<Event>> {
    cfg.validate()?;
    validate_event_list(events, MODULE)?;
    let mut merged: Vec<Event> = Vec::with_capacity(events.len());
    for e in events {
        match merged.last_mut() {
            Some(last) if e.start - last.end < cfg.merge_gap_s => last.end = last.end.max(e.end),
            _ => merged.push(*e),
        }
    }
    merged.retain(|e| e.duration() >= cfg.min_event_s);
    Ok(merged)
}

/// Full post-processing of one file's raw prediction: smoothing, event
/// merging, and rasterizing back onto the input grid.
pub fn postprocess_series(hyp: &LabelSeries, cfg: &PostprocessConfig) -> Result<LabelSeries> {
    let smoothed = smooth_majority(hyp, cfg)?;
    let events = merge_close_events(&labels_to_events(&smoothed, SEIZURE), cfg)?;
    events_to_labels(&events, hyp.fs(), hyp.duration_s(), hyp.origin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(window: f64, gap: f64) -> PostprocessConfig {
        PostprocessConfig {
            smooth_window_s: window,
            merge_gap_s: gap,
            min_event_s: 0.0,
        }
    }

    fn ev(s: f64, e: f64) -> Event {
        Event::seizure(s, e).unwrap()
    }

    /// Direct windowed tally, independent of the running-sum implementation.
    fn brute_majority(labels: &[u8], w: usize) -> Vec<u8> {
        (0..labels.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(w);
                let win = &labels[lo..=i];
                let ones = win.iter().filter(|&&l| l == 1).count();
                u8::from(ones * 2 > win.len())
            })
            .collect()
    }

    #[test]
    fn isolated_positive_removed() {
        let mut l = vec![0u8; 20];
        l[1] = 1;
        let s = LabelSeries::new(l, 1.0, 0.0).unwrap();
        let out = smooth_majority(&s, &cfg(5.0, 30.0)).unwrap();
        assert!(out.labels().iter().all(|&x| x == 0));
    }

    #[test]
    fn constant_ones_preserved() {
        let s = LabelSeries::new(vec![1; 12], 1.0, 0.0).unwrap();
        let out = smooth_majority(&s, &cfg(5.0, 30.0)).unwrap();
        assert_eq!(out.labels(), &[1; 12]);
    }

    #[test]
    fn window_three_fills_gap() {
        let l = [1, 1, 1, 0, 1, 1];
        let s = LabelSeries::new(l.to_vec(), 1.0, 0.0).unwrap();
        let out = smooth_majority(&s, &cfg(3.0, 30.0)).unwrap();
        assert_eq!(out.labels(), brute_majority(&l, 3).as_slice());
        assert_eq!(out.labels(), &[1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn ties_resolve_to_zero() {
        let s = LabelSeries::new(vec![0, 1, 1, 0], 1.0, 0.0).unwrap();
        let out = smooth_majority(&s, &cfg(2.0, 30.0)).unwrap();
        // windows: [0], [0,1], [1,1], [1,0]
        assert_eq!(out.labels(), &[0, 0, 1, 0]);
    }

    #[test]
    fn merge_examples() {
        let c = cfg(5.0, 30.0);
        assert_eq!(
            merge_close_events(&[ev(0.0, 10.0), ev(15.0, 20.0)], &c).unwrap(),
            vec![ev(0.0, 20.0)]
        );
        assert_eq!(
            merge_close_events(&[ev(0.0, 10.0), ev(45.0, 50.0)], &c).unwrap(),
            vec![ev(0.0, 10.0), ev(45.0, 50.0)]
        );
        assert_eq!(
            merge_close_events(&[ev(0.0, 1.0), ev(2.0, 3.0), ev(4.0, 5.0)], &c).unwrap(),
            vec![ev(0.0, 5.0)]
        );
    }

    #[test]
    fn merge_rejects_unsorted() {
        assert!(merge_close_events(&[ev(10.0, 20.0), ev(0.0, 5.0)], &cfg(5.0, 30.0)).is_err());
    }

    #[test]
    fn min_event_drops_short() {
        let c = PostprocessConfig {
            min_event_s: 5.0,
            ..cfg(5.0, 1.0)
        };
        assert_eq!(
            merge_close_events(&[ev(0.0, 2.0), ev(10.0, 20.0)], &c).unwrap(),
            vec![ev(10.0, 20.0)]
        );
    }

    #[test]
    fn invalid_config() {
        assert!(cfg(0.0, 30.0).validate().is_err());
        assert!(cfg(5.0, -1.0).validate().is_err());
    }

    #[test]
    fn full_postprocess_on_grid() {
        // Two detections 10 s apart merge; an isolated blip disappears.
        let mut l = vec![0u8; 200];
        l[20..40].fill(1);
        l[50..70].fill(1);
        l[150] = 1;
        let s = LabelSeries::new(l, 1.0, 0.0).unwrap();
        let out = postprocess_series(&s, &PostprocessConfig::default()).unwrap();
        let events = labels_to_events(&out, 1);
        assert_eq!(events.len(), 1);
        assert_eq!((events[0].start, events[0].end), (22.0, 72.0));
    }

    fn event_list() -> impl Strategy<Value = Vec<Event>> {
        proptest::collection::vec((0.0f64..50.0, 0.1f64..20.0), 0..30).prop_map(|parts| {
            let mut t = 0.0;
            parts
                .into_iter()
                .map(|(gap, len)| {
                    let e = Event::seizure(t + gap, t + gap + len).unwrap();
                    t = e.end;
                    e
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn merge_is_idempotent_and_gap_respecting(events in event_list(), gap in 0.0f64..40.0, min in 0.0f64..10.0) {
            let c = PostprocessConfig { smooth_window_s: 5.0, merge_gap_s: gap, min_event_s: min };
            let once = merge_close_events(&events, &c).unwrap();
            let twice = merge_close_events(&once, &c).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.len() <= events.len());
            for w in once.windows(2) {
                prop_assert!(w[1].start - w[0].end >= gap);
            }
        }

        #[test]
        fn smoothing_matches_oracle(labels in proptest::collection::vec(0u8..=1, 0..300), w in 1usize..40) {
            let s = LabelSeries::new(labels.clone(), 1.0, 0.0).unwrap();
            let out = smooth_majority(&s, &cfg(w as f64, 30.0)).unwrap();
            let expected = brute_majority(&labels, w);
            prop_assert_eq!(out.labels(), expected.as_slice());
            // Never invents a positive inside an all-zero window.
            for i in 0..labels.len() {
                let lo = (i + 1).saturating_sub(w);
                if labels[lo..=i].iter().all(|&x| x == 0) {
                    prop_assert_eq!(out.labels()[i], 0);
                }
            }
        }
    }
}
