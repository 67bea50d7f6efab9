//! C ABI over the dynma solver.
//!
//! Every fallible call returns a [`DynmaStatus`]; on failure the message is
//! kept per thread and can be read with [`dynma_last_error`]. Instances and
//! reports are opaque handles released with their `_free` functions.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dynma::netmodel::{
    generate_instance, ChannelModelParams, ChannelRealization, Matrix, NetworkInstance, SubcarrierMode,
};
use dynma::solver::{exhaustive_oracle, solve, Mode, OracleConfig, SolutionReport, SolverConfig};
use dynma::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynmaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidInstance = 3,
    /// The instance has no channel yet.
    NoChannel = 4,
    EnumerationCap = 5,
    Limit = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynmaMode {
    Hybrid = 0,
    PureOma = 1,
    PureNoma = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynmaAccess {
    Idle = 0,
    Oma = 1,
    Noma = 2,
}

/// Network description. Users are spread round-robin over the providers,
/// and every provider gets the same minimum rate until changed.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynmaNetworkParams {
    pub users: usize,
    pub subcarriers: usize,
    pub service_providers: usize,
    pub min_rate: f64,
    pub p_max: f64,
    pub p_d: f64,
    pub noise_var: f64,
    pub cost_a: f64,
    pub cost_v: f64,
    pub log_base: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynmaChannelParams {
    pub pathloss_exp: f64,
    pub area_side: f64,
    /// Share of users placed in the outer ring; negative for uniform
    /// placement.
    pub edge_fraction: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynmaReportSummary {
    /// Utility of the returned point, 0 when infeasible.
    pub utility: f64,
    pub total_rate: f64,
    pub feasible: bool,
    pub converged: bool,
    pub noma_subcarriers: usize,
    pub outer_iterations: usize,
}

/// Access on one subcarrier. `first` is the OMA user or the stronger user
/// of a pair; unused indices are -1.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DynmaSubcarrier {
    pub access: DynmaAccess,
    pub first: i64,
    pub second: i64,
}

pub struct DynmaInstance {
    network: NetworkInstance,
    channel: Option<ChannelRealization>,
}

pub struct DynmaReport {
    report: SolutionReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn fail(status: DynmaStatus, message: impl Into<String>) -> DynmaStatus {
    set_error(message);
    status
}

fn from_error(e: Error) -> DynmaStatus {
    let status = match &e {
        Error::InvalidInstance(_) => DynmaStatus::InvalidInstance,
        Error::EnumerationCap { .. } => DynmaStatus::EnumerationCap,
        Error::Limit(_) => DynmaStatus::Limit,
        Error::Contract(_) | Error::Config(_) | Error::Parse { .. } => DynmaStatus::InvalidArgument,
        _ => DynmaStatus::Internal,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning a panic into `Internal`.
fn guard(f: impl FnOnce() -> DynmaStatus) -> DynmaStatus {
    set_error("");
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(DynmaStatus::Internal, "panic inside dynma"))
}

unsafe fn slice<'a, T>(data: *const T, len: usize, expected: usize, what: &str) -> Result<&'a [T], DynmaStatus> {
    if data.is_null() {
        return Err(fail(DynmaStatus::NullPointer, format!("{what} is null")));
    }
    if len != expected {
        return Err(fail(DynmaStatus::InvalidArgument, format!("{what} has length {len}, expected {expected}")));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, expected: usize, what: &str) -> Result<&'a mut [T], DynmaStatus> {
    if data.is_null() {
        return Err(fail(DynmaStatus::NullPointer, format!("{what} is null")));
    }
    if len != expected {
        return Err(fail(DynmaStatus::InvalidArgument, format!("{what} has length {len}, expected {expected}")));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

macro_rules! deref {
    ($p:expr, $what:literal) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(DynmaStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr, $what:literal) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return fail(DynmaStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dynma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// NUL-terminated) and returns the length the full message needs,
/// including the NUL. `buf` may be null when `len` is 0.
///
/// # Safety
/// `buf` must be valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn dynma_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len) - 1;
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// The reference simulation values: 20 users, 10 subcarriers, 2 providers
/// at 48 rate units, 100 W, unit noise, P_d = 0.01, A = V = 2, base-2 rates.
#[no_mangle]
pub extern "C" fn dynma_network_params_default() -> DynmaNetworkParams {
    let base = NetworkInstance::round_robin(20, 10, 2, 48.0).expect("reference network is valid");
    DynmaNetworkParams {
        users: base.users,
        subcarriers: base.subcarriers,
        service_providers: 2,
        min_rate: 48.0,
        p_max: base.p_max,
        p_d: base.p_d,
        noise_var: base.noise_var,
        cost_a: base.cost_a,
        cost_v: base.cost_v,
        log_base: base.log_base,
    }
}

#[no_mangle]
pub extern "C" fn dynma_channel_params_default() -> DynmaChannelParams {
    let base = ChannelModelParams::default();
    DynmaChannelParams {
        pathloss_exp: base.pathloss_exp,
        area_side: base.area_side,
        edge_fraction: base.edge_fraction.unwrap_or(-1.0),
        seed: base.seed,
    }
}

/// Creates an instance without a channel.
///
/// # Safety
/// `params` must point to a valid struct and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn dynma_instance_new(
    params: *const DynmaNetworkParams,
    out: *mut *mut DynmaInstance,
) -> DynmaStatus {
    guard(|| {
        let p = deref!(params, "params");
        let out = deref_mut!(out, "out");
        *out = ptr::null_mut();
        let mut network = match NetworkInstance::round_robin(p.users, p.subcarriers, p.service_providers, p.min_rate) {
            Ok(n) => n,
            Err(e) => return from_error(e),
        };
        network.p_max = p.p_max;
        network.p_d = p.p_d;
        network.noise_var = p.noise_var;
        network.cost_a = p.cost_a;
        network.cost_v = p.cost_v;
        network.log_base = p.log_base;
        if let Err(e) = network.validate() {
            return from_error(e);
        }
        *out = Box::into_raw(Box::new(DynmaInstance { network, channel: None }));
        DynmaStatus::Ok
    })
}

/// # Safety
/// `inst` must come from [`dynma_instance_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dynma_instance_free(inst: *mut DynmaInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Replaces the per-provider minimum rates; `len` must equal the number of
/// providers.
///
/// # Safety
/// `inst` must be a live instance and `rates` valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn dynma_instance_set_min_rates(
    inst: *mut DynmaInstance,
    rates: *const f64,
    len: usize,
) -> DynmaStatus {
    guard(|| {
        let inst = deref_mut!(inst, "instance");
        let rates = tri!(slice(rates, len, inst.network.service_providers(), "rates"));
        let mut network = inst.network.clone();
        network.min_rate = rates.to_vec();
        if let Err(e) = network.validate() {
            return from_error(e);
        }
        inst.network = network;
        DynmaStatus::Ok
    })
}

/// Replaces the provider of every user; `len` must equal the user count.
///
/// # Safety
/// `inst` must be a live instance and `providers` valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn dynma_instance_set_providers(
    inst: *mut DynmaInstance,
    providers: *const usize,
    len: usize,
) -> DynmaStatus {
    guard(|| {
        let inst = deref_mut!(inst, "instance");
        let providers = tri!(slice(providers, len, inst.network.users, "providers"));
        let mut network = inst.network.clone();
        network.sp_of = providers.to_vec();
        if let Err(e) = network.validate() {
            return from_error(e);
        }
        inst.network = network;
        DynmaStatus::Ok
    })
}

/// Draws user positions and fading from the channel model.
///
/// # Safety
/// `inst` must be a live instance and `params` a valid struct.
#[no_mangle]
pub unsafe extern "C" fn dynma_instance_draw_channel(
    inst: *mut DynmaInstance,
    params: *const DynmaChannelParams,
) -> DynmaStatus {
    guard(|| {
        let inst = deref_mut!(inst, "instance");
        let p = deref!(params, "params");
        let model = ChannelModelParams {
            pathloss_exp: p.pathloss_exp,
            area_side: p.area_side,
            edge_fraction: (p.edge_fraction >= 0.0).then_some(p.edge_fraction),
            seed: p.seed,
        };
        match generate_instance(&model, &inst.network) {
            Ok(ch) => {
                inst.channel = Some(ch);
                DynmaStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sets the channel gains directly, row-major with one row per user.
///
/// # Safety
/// `inst` must be a live instance and `gains` valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn dynma_instance_set_gains(
    inst: *mut DynmaInstance,
    gains: *const f64,
    len: usize,
) -> DynmaStatus {
    guard(|| {
        let inst = deref_mut!(inst, "instance");
        let (kk, nn) = (inst.network.users, inst.network.subcarriers);
        let gains = tri!(slice(gains, len, kk * nn, "gains"));
        let built = Matrix::from_vec(kk, nn, gains.to_vec())
            .and_then(|m| ChannelRealization::new(vec![[0.0; 2]; kk], m))
            .and_then(|ch| ch.check_against(&inst.network).map(|_| ch));
        match built {
            Ok(ch) => {
                inst.channel = Some(ch);
                DynmaStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Copies the channel gains out, row-major with one row per user.
///
/// # Safety
/// `inst` must be a live instance and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dynma_instance_gains(inst: *const DynmaInstance, out: *mut f64, len: usize) -> DynmaStatus {
    guard(|| {
        let inst = deref!(inst, "instance");
        let Some(ch) = &inst.channel else {
            return fail(DynmaStatus::NoChannel, "instance has no channel");
        };
        let out = tri!(slice_mut(out, len, inst.network.users * inst.network.subcarriers, "out"));
        out.copy_from_slice(ch.gains.as_slice());
        DynmaStatus::Ok
    })
}

fn finish(result: dynma::Result<SolutionReport>, out: &mut *mut DynmaReport) -> DynmaStatus {
    match result {
        Ok(report) => {
            *out = Box::into_raw(Box::new(DynmaReport { report }));
            DynmaStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Runs the alternating solver with default settings; `mode` is a
/// [`DynmaMode`] value.
///
/// # Safety
/// `inst` must be a live instance and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dynma_solve(
    inst: *const DynmaInstance,
    mode: u32,
    out: *mut *mut DynmaReport,
) -> DynmaStatus {
    guard(|| {
        let inst = deref!(inst, "instance");
        let out = deref_mut!(out, "out");
        *out = ptr::null_mut();
        let Some(ch) = &inst.channel else {
            return fail(DynmaStatus::NoChannel, "instance has no channel");
        };
        let mode = match mode {
            m if m == DynmaMode::Hybrid as u32 => Mode::Hybrid,
            m if m == DynmaMode::PureOma as u32 => Mode::PureOma,
            m if m == DynmaMode::PureNoma as u32 => Mode::PureNoma,
            m => return fail(DynmaStatus::InvalidArgument, format!("unknown mode {m}")),
        };
        finish(solve(&inst.network, ch, &SolverConfig::with_mode(mode)), out)
    })
}

/// Exhaustive search over all access assignments, refusing more than
/// `enumeration_cap` of them.
///
/// # Safety
/// `inst` must be a live instance and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dynma_oracle(
    inst: *const DynmaInstance,
    enumeration_cap: u64,
    out: *mut *mut DynmaReport,
) -> DynmaStatus {
    guard(|| {
        let inst = deref!(inst, "instance");
        let out = deref_mut!(out, "out");
        *out = ptr::null_mut();
        let Some(ch) = &inst.channel else {
            return fail(DynmaStatus::NoChannel, "instance has no channel");
        };
        let cfg = OracleConfig { enumeration_cap: enumeration_cap.into(), ..OracleConfig::default() };
        finish(exhaustive_oracle(&inst.network, ch, &cfg).map(|o| o.report), out)
    })
}

/// # Safety
/// `report` must come from a solve call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dynma_report_free(report: *mut DynmaReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dynma_report_summary(report: *const DynmaReport, out: *mut DynmaReportSummary) -> DynmaStatus {
    guard(|| {
        let r = &deref!(report, "report").report;
        let out = deref_mut!(out, "out");
        *out = DynmaReportSummary {
            utility: r.utility,
            total_rate: r.total_rate,
            feasible: r.feasible,
            converged: r.converged,
            noma_subcarriers: r.noma_subcarriers,
            outer_iterations: r.outer_iterations,
        };
        DynmaStatus::Ok
    })
}

/// Copies the power matrix, row-major with one row per user.
///
/// # Safety
/// `report` must be live and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dynma_report_powers(report: *const DynmaReport, out: *mut f64, len: usize) -> DynmaStatus {
    guard(|| {
        let p = &deref!(report, "report").report.powers;
        let out = tri!(slice_mut(out, len, p.users() * p.subcarriers(), "out"));
        out.copy_from_slice(p.as_matrix().as_slice());
        DynmaStatus::Ok
    })
}

/// Copies the rate delivered to each provider.
///
/// # Safety
/// `report` must be live and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dynma_report_sp_rates(report: *const DynmaReport, out: *mut f64, len: usize) -> DynmaStatus {
    guard(|| {
        let rates = &deref!(report, "report").report.sp_rates;
        let out = tri!(slice_mut(out, len, rates.len(), "out"));
        out.copy_from_slice(rates);
        DynmaStatus::Ok
    })
}

/// Copies the access decision of each subcarrier.
///
/// # Safety
/// `report` must be live and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dynma_report_subcarriers(
    report: *const DynmaReport,
    out: *mut DynmaSubcarrier,
    len: usize,
) -> DynmaStatus {
    guard(|| {
        let modes = &deref!(report, "report").report.modes;
        let out = tri!(slice_mut(out, len, modes.len(), "out"));
        for (slot, mode) in out.iter_mut().zip(modes) {
            *slot = match *mode {
                SubcarrierMode::Idle => DynmaSubcarrier { access: DynmaAccess::Idle, first: -1, second: -1 },
                SubcarrierMode::Oma { user } => DynmaSubcarrier { access: DynmaAccess::Oma, first: user as i64, second: -1 },
                SubcarrierMode::Noma { first, second } => DynmaSubcarrier {
                    access: DynmaAccess::Noma,
                    first: first as i64,
                    second: second as i64,
                },
            };
        }
        DynmaStatus::Ok
    })
}
