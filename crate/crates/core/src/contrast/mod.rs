//! Pairwise dominance between conditions, numeral sweeps, flip probes, and
//! exact binomial inference.

mod binomial;
mod dominance;
mod sweep;

pub use binomial::{binomial_test, binomial_test_with, clopper_pearson, Alternative, BinomialResult, CONFIDENCE};
pub use dominance::{dominance, dominance_values, flip_probe, DominanceResult, FlipReport, Outcome};
pub use sweep::{is_sweep_numeral, sweep_gap, sweep_vs_base, SweepCurve, SweepMode, SweepPoint, DEFAULT_BASE};
