//! Process-wide counters for domain clamps that exceeded the reporting threshold.
//!
//! Kernel functions clamp arguments of `acosh`, `atanh` and ball norms back into
//! their domain. Tiny excursions are rounding noise; anything beyond
//! [`REPORT_THRESHOLD`] is counted here so callers can detect silent trouble.

use std::sync::atomic::{AtomicU64, Ordering};

pub const REPORT_THRESHOLD: f64 = 1e-6;

static ACOSH: AtomicU64 = AtomicU64::new(0);
static ATANH: AtomicU64 = AtomicU64::new(0);
static BALL: AtomicU64 = AtomicU64::new(0);
static APERTURE: AtomicU64 = AtomicU64::new(0);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClampCounts {
    pub acosh: u64,
    pub atanh: u64,
    pub ball: u64,
    pub aperture: u64,
}

impl ClampCounts {
    pub fn total(&self) -> u64 {
        self.acosh + self.atanh + self.ball + self.aperture
    }
}

pub fn snapshot() -> ClampCounts {
    ClampCounts {
        acosh: ACOSH.load(Ordering::Relaxed),
        atanh: ATANH.load(Ordering::Relaxed),
        ball: BALL.load(Ordering::Relaxed),
        aperture: APERTURE.load(Ordering::Relaxed),
    }
}

pub(crate) fn report_acosh(excess: f64) {
    if excess > REPORT_THRESHOLD {
        ACOSH.fetch_add(1, Ordering::Relaxed);
        log::debug!("acosh argument below 1 by {excess:e}");
    }
}

pub(crate) fn report_atanh(excess: f64) {
    if excess > REPORT_THRESHOLD {
        ATANH.fetch_add(1, Ordering::Relaxed);
        log::debug!("atanh argument above its bound by {excess:e}");
    }
}

pub(crate) fn report_ball(excess: f64) {
    if excess > REPORT_THRESHOLD {
        BALL.fetch_add(1, Ordering::Relaxed);
        log::debug!("ball point outside radius by {excess:e}");
    }
}

pub(crate) fn report_aperture() {
    APERTURE.fetch_add(1, Ordering::Relaxed);
    log::debug!("entailment aperture saturated near the origin");
}
