//! Every numeric default in one place. Solver configs, the CLI, and the
//! sweep all start from these values, so reports are reproducible across
//! machines.

/// Absolute and relative tolerance of the radial ODE integrator.
pub const ODE_TOL: f64 = 1e-12;
/// Series-start radius as a fraction of the ball radius.
pub const SERIES_START_FRACTION: f64 = 1e-6;
/// Series start is also capped at this fraction of the local length scale
/// `sqrt(2n·alpha/|f(0,alpha)|)`, so very tall starts keep the Taylor data accurate.
pub const SERIES_START_SCALE_FRACTION: f64 = 1e-4;
/// Logarithmic search grid for initial heights.
pub const ALPHA_MIN: f64 = 1e-3;
pub const ALPHA_MAX: f64 = 1e3;
pub const ALPHA_POINTS: usize = 61;
/// Trajectories used to evaluate the first-zero map run to this multiple of R.
pub const BRACKET_HORIZON: f64 = 2.0;
/// Accept a scalar shooting height when the first zero lies within this
/// fraction of R (and not before R).
pub const RADIUS_TOL: f64 = 1e-11;
/// Pair shooting accepts when |u(R)| and |v(R)| are below this.
pub const BOUNDARY_TOL: f64 = 1e-10;
pub const MAX_BISECTION: usize = 200;
pub const MAX_NEWTON: usize = 50;
pub const BLOW_UP: f64 = 1e8;
/// Uniform output grid of radial solutions (2^11 + 1 nodes).
pub const RADIAL_GRID_POINTS: usize = 2049;
/// Finite-difference Jacobian step of pair shooting, relative to `1 + |alpha|`.
pub const JACOBIAN_STEP: f64 = 1e-6;

/// Rectangle grid: intervals per side.
pub const GRID_INTERVALS: usize = 256;
/// Direct banded solves up to this many intervals per side, CG beyond.
pub const BANDED_MAX_INTERVALS: usize = 256;
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 30;
pub const CG_REL_TOL: f64 = 1e-13;
pub const CONTINUATION_STEPS: usize = 8;

/// Identity verification.
pub const EQUATION_RESIDUAL_GATE: f64 = 1e-4;
pub const VERIFY_GATE: f64 = 1e-5;
/// Floor of the relative-residual normalization `max(|lhs|, |rhs|, floor)`.
pub const REL_RESIDUAL_FLOOR: f64 = 1e-30;
/// Nodes excluded next to each end when measuring pointwise residuals.
pub const RESIDUAL_EDGE_SKIP: usize = 2;

/// Criteria sampling.
pub const CRITERIA_ALPHA_RANGE: (f64, f64) = (-2.0, 3.0);
pub const CRITERIA_SAMPLE_RANGE: (f64, f64) = (1e-4, 1e4);
pub const CRITERIA_SAMPLE_POINTS: usize = 33;
/// Coordinates per point in the domain sampler (per radial shell or axis).
pub const CRITERIA_X_POINTS: usize = 9;
/// Cap on `(u, v)` sample combinations when there are several pairs.
pub const CRITERIA_SAMPLE_BUDGET: usize = 20_000;
/// Strictness: an inequality holds strictly when its margin exceeds this
/// multiple of the magnitude of its terms.
pub const STRICTNESS: f64 = 1e-12;

/// Sweep shooting probes.
pub const PROBE_HORIZON_FACTOR: f64 = 50.0;
pub const PROBE_STARTS: usize = 25;
