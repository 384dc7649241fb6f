use serde::Serialize;

use crate::coordmodels::{convention_discrepancy, CoordinateConvention};
use crate::error::Result;
use crate::truth::TruthTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapRow {
    pub epoch: f64,
    pub label_offset_a: f64,
    pub label_offset_b: f64,
    pub label_delta: f64,
    pub pairwise_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSwap {
    /// Largest change in any pairwise displayed-time difference.
    pub pairwise_delta: f64,
    /// Largest |label_a − label_b| over the run.
    pub label_delta: f64,
    pub rows: Vec<SwapRow>,
}

/// Label every tabulated event under each convention, then compare every
/// pairwise clock difference event by event.
///
/// Events are matched by identity, never by inverting a label, so the only
/// way a pairwise difference could change is if a convention leaked into
/// the clock computation.
pub fn model_swap(truth: &TruthTable, a: &CoordinateConvention, b: &CoordinateConvention) -> Result<ModelSwap> {
    a.validate()?;
    b.validate()?;
    let labelled_a = label_events(truth, a);
    let labelled_b = label_events(truth, b);
    let n = truth.clocks().len();
    let mut rows = Vec::with_capacity(truth.len());
    let mut pairwise_delta = 0.0f64;
    let mut position_b = vec![0; labelled_b.len()];
    for (p, e) in labelled_b.iter().enumerate() {
        position_b[e.event] = p;
    }
    for ea in &labelled_a {
        let eb = &labelled_b[position_b[ea.event]];
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let under_a = pairwise(truth, ea, i, j);
                let under_b = pairwise(truth, eb, i, j);
                worst = worst.max((under_a - under_b).abs());
            }
        }
        pairwise_delta = pairwise_delta.max(worst);
        let epoch = truth.epoch(ea.event);
        rows.push(SwapRow {
            epoch,
            label_offset_a: ea.label_offset,
            label_offset_b: eb.label_offset,
            label_delta: ea.label_offset - eb.label_offset,
            pairwise_delta: worst,
        });
    }
    let label_delta = if truth.len() > 1 {
        convention_discrepancy(a, b, 0.0, truth.end())?.max
    } else {
        (a.label_offset(0.0) - b.label_offset(0.0)).abs()
    };
    Ok(ModelSwap {
        pairwise_delta,
        label_delta,
        rows,
    })
}

struct Labelled {
    event: usize,
    label_offset: f64,
}

fn label_events(truth: &TruthTable, c: &CoordinateConvention) -> Vec<Labelled> {
    let mut events: Vec<Labelled> = (0..truth.len())
        .map(|k| Labelled {
            event: k,
            label_offset: c.label_offset(truth.epoch(k)),
        })
        .collect();
    // Labels are monotone, so ordering by label keeps event order.
    events.sort_by(|x, y| {
        let lx = truth.epoch(x.event) + x.label_offset;
        let ly = truth.epoch(y.event) + y.label_offset;
        lx.total_cmp(&ly).then(x.event.cmp(&y.event))
    });
    events
}

fn pairwise(truth: &TruthTable, e: &Labelled, i: usize, j: usize) -> f64 {
    truth.displayed_offset(i, e.event) - truth.displayed_offset(j, e.event)
}
