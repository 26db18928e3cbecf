//! C ABI over `graphsteer`.
//!
//! Objects are opaque handles created by `gs_*_new`-style functions and
//! released with the matching `gs_*_free`. Every fallible call returns a
//! [`GsStatus`]; on failure [`gs_last_error`] describes the most recent error
//! on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use graphsteer::cli::commands::{sample as run_sample, SampleArgs};
use graphsteer::error::ErrorClass;
use graphsteer::graphs::io::{pad_all, read_graphs, write_records, GraphRecord};
use graphsteer::graphs::{
    constraint_reward, quantize, star_reward, ConstraintKind, ConstraintSpec, LossVariant, Reward,
};
use graphsteer::guidance::{ControllerConfig, ControllerKind, MuRule};
use graphsteer::sampler::{batch_sample, SamplerConfig};
use graphsteer::{EmpiricalMixturePrior, Error, GaussianPrior, GraphState, NoiseSchedule, ScoreModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    Config = 1,
    Usage = 2,
    Numerical = 3,
    Io = 4,
    NullPointer = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsController {
    Gradient = 0,
    OnePoint = 1,
    TwoPoint = 2,
    BestOfN = 3,
    MultiPoint = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsCountStat {
    EdgeCount = 0,
    TriangleCount = 1,
    MaxDegree = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsLoss {
    L2 = 0,
    OneSidedHinge = 1,
    QuantizedL2 = 2,
    QuantizedHinge = 3,
}

/// Noise schedule with `steps` levels and betas ramping linearly from
/// `beta_min` to `beta_max`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GsSchedule {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GsSamplerOptions {
    pub controller: GsController,
    pub k: f64,
    /// Smoothing radius scale; the radius at step t is `mu0 * sigma_t`.
    pub mu0: f64,
    pub n_candidates: usize,
    pub add_ancestral_noise: bool,
    pub final_denoise: bool,
    pub n_chains: usize,
    pub seed: u64,
}

/// Prior handle.
pub struct GsPrior(Box<dyn ScoreModel>);

/// Reward handle.
pub struct GsReward(Box<dyn Reward>);

/// Finished samples, one graph per successful chain.
pub struct GsSampleSet(Vec<GraphState>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GsStatus {
    match e.class() {
        ErrorClass::Config => GsStatus::Config,
        ErrorClass::Usage => GsStatus::Usage,
        ErrorClass::Numerical => GsStatus::Numerical,
        ErrorClass::Io => GsStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GsStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            GsStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn path_arg(p: *const c_char, what: &'static str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::Usage(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn schedule(s: GsSchedule) -> Result<Arc<NoiseSchedule>, Error> {
    Ok(Arc::new(NoiseSchedule::new(s.steps, s.beta_min, s.beta_max)?))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn gs_schedule_default() -> GsSchedule {
    GsSchedule {
        steps: 200,
        beta_min: 5e-4,
        beta_max: 0.1,
    }
}

#[no_mangle]
pub extern "C" fn gs_sampler_options_default() -> GsSamplerOptions {
    let c = ControllerConfig::default();
    GsSamplerOptions {
        controller: GsController::BestOfN,
        k: c.k,
        mu0: c.mu0,
        n_candidates: c.n_candidates,
        add_ancestral_noise: true,
        final_denoise: true,
        n_chains: 16,
        seed: 0,
    }
}

/// Gaussian prior `N(0, std^2 I)` over graphs with `n_nodes` nodes and
/// `n_features` features per node.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_prior_gaussian(
    n_nodes: usize,
    n_features: usize,
    std: f64,
    sched: GsSchedule,
    out: *mut *mut GsPrior,
) -> GsStatus {
    guard(|| {
        let prior = GaussianPrior::new(GraphState::zeros(n_nodes, n_features), std, schedule(sched)?)?;
        emit(out, GsPrior(Box::new(prior)))
    })
}

/// Empirical mixture prior over the graphs of a JSON-lines dataset file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn gs_prior_from_dataset(
    path: *const c_char,
    sched: GsSchedule,
    out: *mut *mut GsPrior,
) -> GsStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let graphs: Vec<GraphState> = read_graphs(&path)?.into_iter().map(|(g, _)| g).collect();
        if graphs.is_empty() {
            return Err(Error::Config(format!("{} has no graphs", path.display())).into());
        }
        let prior = EmpiricalMixturePrior::new(pad_all(&graphs)?, schedule(sched)?)?;
        emit(out, GsPrior(Box::new(prior)))
    })
}

/// Node count of the prior's graphs.
///
/// # Safety
/// `prior` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gs_prior_n_nodes(prior: *const GsPrior) -> usize {
    prior.as_ref().map_or(0, |p| p.0.shape().0)
}

/// # Safety
/// `prior` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_prior_free(prior: *mut GsPrior) {
    if !prior.is_null() {
        drop(Box::from_raw(prior));
    }
}

/// Reward penalizing a count statistic above `bound`.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_reward_count(
    stat: GsCountStat,
    bound: f64,
    loss: GsLoss,
    out: *mut *mut GsReward,
) -> GsStatus {
    guard(|| {
        let kind = match stat {
            GsCountStat::EdgeCount => ConstraintKind::EdgeCount,
            GsCountStat::TriangleCount => ConstraintKind::TriangleCount,
            GsCountStat::MaxDegree => ConstraintKind::MaxDegree,
        };
        let loss = match loss {
            GsLoss::L2 => LossVariant::L2,
            GsLoss::OneSidedHinge => LossVariant::OneSidedHinge,
            GsLoss::QuantizedL2 => LossVariant::QuantizedL2,
            GsLoss::QuantizedHinge => LossVariant::QuantizedHinge,
        };
        let reward = constraint_reward(&ConstraintSpec::count(kind, bound, loss))?;
        emit(out, GsReward(reward))
    })
}

/// Reward that is highest on star graphs.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_reward_star(out: *mut *mut GsReward) -> GsStatus {
    guard(|| emit(out, GsReward(Box::new(star_reward()))))
}

/// # Safety
/// `reward` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_reward_free(reward: *mut GsReward) {
    if !reward.is_null() {
        drop(Box::from_raw(reward));
    }
}

/// Runs `options.n_chains` chains. A null `reward` samples without guidance.
/// Fails if any chain fails.
///
/// # Safety
/// `prior` must be a live handle, `reward` a live handle or null, and `out`
/// valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_sample(
    prior: *const GsPrior,
    reward: *const GsReward,
    options: GsSamplerOptions,
    out: *mut *mut GsSampleSet,
) -> GsStatus {
    guard(|| {
        let prior = borrow(prior, "prior")?;
        let reward = reward.as_ref().map(|r| r.0.as_ref());
        let kind = match options.controller {
            GsController::Gradient => ControllerKind::Gradient,
            GsController::OnePoint => ControllerKind::OnePoint,
            GsController::TwoPoint => ControllerKind::TwoPoint,
            GsController::BestOfN => ControllerKind::BestOfN,
            GsController::MultiPoint => ControllerKind::MultiPoint,
        };
        let controller = ControllerConfig::new(kind, options.k)
            .with_mu(options.mu0, MuRule::ProportionalToSigma)
            .with_candidates(options.n_candidates);
        let mut cfg = SamplerConfig::new(controller, options.seed);
        cfg.add_ancestral_noise = options.add_ancestral_noise;
        cfg.final_denoise = options.final_denoise;
        let batch = batch_sample(prior.0.as_ref(), reward, &cfg, options.n_chains, options.seed)?;
        let finals = batch.into_result()?.into_iter().map(|t| t.final_state).collect();
        emit(out, GsSampleSet(finals))
    })
}

/// # Safety
/// `set` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gs_sample_set_len(set: *const GsSampleSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Writes the 0/1 adjacency of graph `index`, thresholded at 1/2, row-major
/// into `buffer`, which must hold `n_nodes * n_nodes` bytes.
///
/// # Safety
/// `set` must be a live handle and `buffer` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gs_sample_set_adjacency(
    set: *const GsSampleSet,
    index: usize,
    buffer: *mut u8,
    len: usize,
) -> GsStatus {
    guard(|| {
        let set = borrow(set, "set")?;
        let g = set
            .0
            .get(index)
            .ok_or_else(|| Error::Usage(format!("index {index} out of range for {} graphs", set.0.len())))?;
        let n = g.n_nodes();
        if len < n * n {
            return Err(Error::Usage(format!("buffer holds {len} bytes, need {}", n * n)).into());
        }
        if buffer.is_null() {
            return Err(Failure::Null("buffer"));
        }
        let out = std::slice::from_raw_parts_mut(buffer, n * n);
        for (o, v) in out.iter_mut().zip(quantize(g, 0.5).dense_adjacency()) {
            *o = v as u8;
        }
        Ok(())
    })
}

/// Writes the samples as a JSON-lines dataset file.
///
/// # Safety
/// `set` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gs_sample_set_write(set: *const GsSampleSet, path: *const c_char) -> GsStatus {
    guard(|| {
        let set = borrow(set, "set")?;
        let path = path_arg(path, "path")?;
        let records: Vec<GraphRecord> = set.0.iter().map(|g| GraphRecord::from_state(g, None)).collect();
        write_records(&path, &records)?;
        Ok(())
    })
}

/// # Safety
/// `set` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_sample_set_free(set: *mut GsSampleSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Same as `graphsteer sample --config <config> --out <out_dir>`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn gs_run_config(config: *const c_char, out_dir: *const c_char) -> GsStatus {
    guard(|| {
        let args = SampleArgs {
            config: path_arg(config, "config")?,
            out: Some(path_arg(out_dir, "out_dir")?),
            ..Default::default()
        };
        run_sample(&args)?;
        Ok(())
    })
}
