//! Benchmark workloads and two-phase node profiling.
//!
//! Phase 1 copies static context (class, clock, cores, memory, battery);
//! phase 2 dispatches a compute-bound Mandelbrot workload and a memory-heavy
//! FFT workload through a [`BenchmarkRunner`], converts mean runtimes to
//! GFLOPS, and averages the two into the node's benchmark score.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{validate_profile, DomainError, NodeClass, NodeId, NodeProfile};
use crate::rng::SplitMix64;

/// Region of the complex plane sampled by the Mandelbrot workload.
pub const MANDELBROT_REGION: (f64, f64, f64, f64) = (-2.0, 0.47, -1.12, 1.12);

/// Flops charged per escape-time iteration: complex square (3 mul + 2 add),
/// add c (2 add), squared-magnitude test against 4.0 (1 compare).
pub const MANDELBROT_FLOPS_PER_ITER: u64 = 8;

/// Seed for the FFT workload's pseudo-random input signal.
const FFT_INPUT_SEED: u64 = 0x0ff1_0ad5;

#[derive(Debug, Error, PartialEq)]
pub enum ProfilerError {
    #[error("fft size must be a power of two >= 2, got {0}")]
    InvalidSize(usize),
    #[error("benchmark result not received within deadline")]
    BenchmarkTimeout,
    #[error("benchmark transport failed: {0}")]
    Transport(String),
    #[error("workload kind mismatch: expected {expected:?}, got {got:?}")]
    KindMismatch { expected: WorkloadKind, got: WorkloadKind },
    #[error(transparent)]
    Profile(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKind {
    Mandelbrot,
    Fft,
}

/// Parameters of one benchmark workload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadSpec {
    Mandelbrot { width: u32, height: u32, max_iter: u32 },
    Fft { size: usize },
}

impl WorkloadSpec {
    /// 800x800 escape-time grid, 256 iterations deep.
    pub fn default_mandelbrot() -> Self {
        WorkloadSpec::Mandelbrot { width: 800, height: 800, max_iter: 256 }
    }

    /// 2^20-point transform; the working set exceeds typical L2 caches.
    pub fn default_fft() -> Self {
        WorkloadSpec::Fft { size: 1 << 20 }
    }

    pub fn kind(&self) -> WorkloadKind {
        match self {
            WorkloadSpec::Mandelbrot { .. } => WorkloadKind::Mandelbrot,
            WorkloadSpec::Fft { .. } => WorkloadKind::Fft,
        }
    }
}

/// Timing and throughput of one workload, averaged over `runs` executions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadResult {
    pub kind: WorkloadKind,
    pub runs: u32,
    pub mean_runtime_s: f64,
    pub gflops: f64,
}

/// Escape-time iteration count for one point: the number of z <- z^2 + c
/// steps executed, capped at `max_iter` when the orbit never leaves |z| <= 2.
pub fn escape_iterations(cx: f64, cy: f64, max_iter: u32) -> u32 {
    let mut zx = 0.0f64;
    let mut zy = 0.0f64;
    for step in 1..=max_iter {
        let nzx = zx * zx - zy * zy + cx;
        let nzy = 2.0 * zx * zy + cy;
        zx = nzx;
        zy = nzy;
        if zx * zx + zy * zy > 4.0 {
            return step;
        }
    }
    max_iter
}

/// Iteration-count grid over the sampled region plus the total number of
/// escape-time steps executed (the basis for flop accounting).
pub struct MandelbrotGrid {
    pub counts: Vec<u32>,
    pub total_steps: u64,
}

impl MandelbrotGrid {
    /// FNV-1a over the little-endian iteration counts; identical specs must
    /// produce identical checksums.
    pub fn checksum(&self) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        for count in &self.counts {
            for byte in count.to_le_bytes() {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        hash
    }
}

/// Computes the escape-time grid for a Mandelbrot spec. Pixels sample the
/// region at cell centers.
pub fn mandelbrot_grid(width: u32, height: u32, max_iter: u32) -> MandelbrotGrid {
    let (x_min, x_max, y_min, y_max) = MANDELBROT_REGION;
    let mut counts = Vec::with_capacity((width * height) as usize);
    let mut total_steps = 0u64;
    for py in 0..height {
        let cy = y_min + (y_max - y_min) * (py as f64 + 0.5) / height as f64;
        for px in 0..width {
            let cx = x_min + (x_max - x_min) * (px as f64 + 0.5) / width as f64;
            let iters = escape_iterations(cx, cy, max_iter);
            total_steps += iters as u64;
            counts.push(iters);
        }
    }
    MandelbrotGrid { counts, total_steps }
}

/// Runs the escape-time workload `runs` times and reports mean runtime and
/// derived GFLOPS.
pub fn run_mandelbrot(spec: &WorkloadSpec, runs: u32) -> Result<WorkloadResult, ProfilerError> {
    let (width, height, max_iter) = match spec {
        WorkloadSpec::Mandelbrot { width, height, max_iter } => (*width, *height, *max_iter),
        other => {
            return Err(ProfilerError::KindMismatch {
                expected: WorkloadKind::Mandelbrot,
                got: other.kind(),
            })
        }
    };
    let runs = runs.max(1);
    let mut total_runtime = 0.0;
    let mut flops = 0u64;
    for _ in 0..runs {
        let start = Instant::now();
        let grid = mandelbrot_grid(width, height, max_iter);
        total_runtime += clamp_runtime(start.elapsed());
        flops = grid.total_steps * MANDELBROT_FLOPS_PER_ITER;
        std::hint::black_box(grid.checksum());
    }
    let mean_runtime_s = total_runtime / runs as f64;
    Ok(WorkloadResult {
        kind: WorkloadKind::Mandelbrot,
        runs,
        mean_runtime_s,
        gflops: flops as f64 / mean_runtime_s / 1e9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    fn mul(self, other: Complex) -> Complex {
        Complex {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    fn add(self, other: Complex) -> Complex {
        Complex { re: self.re + other.re, im: self.im + other.im }
    }

    fn sub(self, other: Complex) -> Complex {
        Complex { re: self.re - other.re, im: self.im - other.im }
    }
}

/// In-place radix-2 Cooley-Tukey transform. Forward uses the e^(-2*pi*i/N)
/// convention; the inverse divides by N so that `ifft(fft(x)) == x`.
pub fn fft_in_place(buf: &mut [Complex], inverse: bool) -> Result<(), ProfilerError> {
    let n = buf.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(ProfilerError::InvalidSize(n));
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) & (n - 1);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let angle = sign * 2.0 * std::f64::consts::PI / len as f64;
        let w_len = Complex::new(angle.cos(), angle.sin());
        for start in (0..n).step_by(len) {
            let mut w = Complex::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = buf[start + k];
                let v = buf[start + k + len / 2].mul(w);
                buf[start + k] = u.add(v);
                buf[start + k + len / 2] = u.sub(v);
                w = w.mul(w_len);
            }
        }
        len <<= 1;
    }
    if inverse {
        let scale = 1.0 / n as f64;
        for x in buf.iter_mut() {
            x.re *= scale;
            x.im *= scale;
        }
    }
    Ok(())
}

/// Deterministic pseudo-random input signal for the FFT workload.
pub fn fft_input(size: usize) -> Vec<Complex> {
    let mut rng = SplitMix64::new(FFT_INPUT_SEED);
    (0..size)
        .map(|_| Complex::new(2.0 * rng.next_f64() - 1.0, 2.0 * rng.next_f64() - 1.0))
        .collect()
}

/// Standard radix-2 flop count.
pub fn fft_flops(size: usize) -> u64 {
    (5 * size as u64) * (size.trailing_zeros() as u64)
}

/// Runs the FFT workload `runs` times over the seeded input and reports mean
/// runtime and derived GFLOPS.
pub fn run_fft(spec: &WorkloadSpec, runs: u32) -> Result<WorkloadResult, ProfilerError> {
    let size = match spec {
        WorkloadSpec::Fft { size } => *size,
        other => {
            return Err(ProfilerError::KindMismatch {
                expected: WorkloadKind::Fft,
                got: other.kind(),
            })
        }
    };
    if size < 2 || !size.is_power_of_two() {
        return Err(ProfilerError::InvalidSize(size));
    }
    let runs = runs.max(1);
    let input = fft_input(size);
    let mut total_runtime = 0.0;
    for _ in 0..runs {
        let mut buf = input.clone();
        let start = Instant::now();
        fft_in_place(&mut buf, false)?;
        total_runtime += clamp_runtime(start.elapsed());
        std::hint::black_box(buf[0]);
    }
    let mean_runtime_s = total_runtime / runs as f64;
    Ok(WorkloadResult {
        kind: WorkloadKind::Fft,
        runs,
        mean_runtime_s,
        gflops: fft_flops(size) as f64 / mean_runtime_s / 1e9,
    })
}

/// Sub-nanosecond timings would make GFLOPS blow up to infinity on trivially
/// small specs; one nanosecond is the floor.
fn clamp_runtime(elapsed: Duration) -> f64 {
    elapsed.as_secs_f64().max(1e-9)
}

/// Mean of the two workload throughputs.
pub fn benchmark_score(mandelbrot: &WorkloadResult, fft: &WorkloadResult) -> f64 {
    debug_assert_eq!(mandelbrot.kind, WorkloadKind::Mandelbrot);
    debug_assert_eq!(fft.kind, WorkloadKind::Fft);
    (mandelbrot.gflops + fft.gflops) / 2.0
}

/// Static half of a node description, collected before any workload runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticContext {
    pub node_id: NodeId,
    pub class: NodeClass,
    pub cpu_clock_ghz: f64,
    pub cpu_cores: u32,
    pub memory_gb: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_level_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charging: Option<bool>,
}

/// The pair of workloads dispatched during phase 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSuite {
    pub mandelbrot: WorkloadSpec,
    pub fft: WorkloadSpec,
    pub runs: u32,
}

impl Default for BenchmarkSuite {
    fn default() -> Self {
        Self {
            mandelbrot: WorkloadSpec::default_mandelbrot(),
            fft: WorkloadSpec::default_fft(),
            runs: 5,
        }
    }
}

impl BenchmarkSuite {
    /// Small grids for tests and quick probes.
    pub fn fast() -> Self {
        Self {
            mandelbrot: WorkloadSpec::Mandelbrot { width: 64, height: 64, max_iter: 64 },
            fft: WorkloadSpec::Fft { size: 1 << 12 },
            runs: 2,
        }
    }
}

/// Dispatches one workload and returns its result. Implementations decide
/// where the workload actually runs: in-process, over the wire, or not at
/// all for simulated nodes.
pub trait BenchmarkRunner {
    fn run(&self, spec: &WorkloadSpec, runs: u32, deadline: Duration)
        -> Result<WorkloadResult, ProfilerError>;
}

/// Executes workloads in-process. Benchmark execution is strictly
/// sequential; the runner itself holds no state worth sharing.
#[derive(Debug, Default, Clone)]
pub struct LocalRunner {
    /// Untimed executions discarded before the measured runs.
    pub warmup_runs: u32,
}

impl BenchmarkRunner for LocalRunner {
    fn run(
        &self,
        spec: &WorkloadSpec,
        runs: u32,
        _deadline: Duration,
    ) -> Result<WorkloadResult, ProfilerError> {
        for _ in 0..self.warmup_runs {
            match spec.kind() {
                WorkloadKind::Mandelbrot => {
                    run_mandelbrot(spec, 1)?;
                }
                WorkloadKind::Fft => {
                    run_fft(spec, 1)?;
                }
            }
        }
        match spec.kind() {
            WorkloadKind::Mandelbrot => run_mandelbrot(spec, runs),
            WorkloadKind::Fft => run_fft(spec, runs),
        }
    }
}

/// Returns the configured throughput without executing anything, so that
/// scenario files can carry published benchmark figures verbatim.
#[derive(Debug, Clone)]
pub struct SimulatedRunner {
    pub gflops: f64,
}

impl BenchmarkRunner for SimulatedRunner {
    fn run(
        &self,
        spec: &WorkloadSpec,
        runs: u32,
        _deadline: Duration,
    ) -> Result<WorkloadResult, ProfilerError> {
        // Synthesize a runtime consistent with the configured throughput.
        let flops = match spec {
            WorkloadSpec::Mandelbrot { width, height, max_iter } => {
                *width as u64 * *height as u64 * *max_iter as u64 * MANDELBROT_FLOPS_PER_ITER
            }
            WorkloadSpec::Fft { size } => {
                if *size < 2 || !size.is_power_of_two() {
                    return Err(ProfilerError::InvalidSize(*size));
                }
                fft_flops(*size)
            }
        };
        Ok(WorkloadResult {
            kind: spec.kind(),
            runs,
            mean_runtime_s: flops as f64 / (self.gflops * 1e9),
            gflops: self.gflops,
        })
    }
}

/// Two-phase profiling: copy the static context, then dispatch both
/// workloads through the runner and average their GFLOPS into the
/// benchmark score.
pub fn profile_node(
    ctx: &StaticContext,
    runner: &dyn BenchmarkRunner,
    suite: &BenchmarkSuite,
    deadline: Duration,
) -> Result<NodeProfile, ProfilerError> {
    let mandelbrot = runner.run(&suite.mandelbrot, suite.runs, deadline)?;
    let fft = runner.run(&suite.fft, suite.runs, deadline)?;
    let profile = NodeProfile {
        node_id: ctx.node_id.clone(),
        class: ctx.class,
        benchmark_gflops: benchmark_score(&mandelbrot, &fft),
        cpu_clock_ghz: ctx.cpu_clock_ghz,
        cpu_cores: ctx.cpu_cores,
        memory_gb: ctx.memory_gb,
        battery_level_pct: ctx.battery_level_pct,
        charging: ctx.charging,
    };
    validate_profile(&profile)?;
    Ok(profile)
}
