//! C ABI over the `pdqp` crate.
//!
//! Circuits and history distributions are opaque handles created and freed
//! on this side. Every fallible call returns a [`PdqpStatus`]; on failure the
//! message is kept per thread and read with [`pdqp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pdqp::algorithms::{self, SdInstance, SdVerdict, SearchInstance, SearchOutcome};
use pdqp::circuit::{parse_circuit, parse_circuit_file, MAX_TABLE_INPUT_BITS};
use pdqp::exact_sim::exact_sample_history;
use pdqp::qp_oracle::{history_distribution_exact, QpSampler, DEFAULT_BUDGET};
use pdqp::{rng, Circuit, ClassicalFunction, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdqpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    InvalidCircuit = 5,
    BudgetExceeded = 6,
    BufferTooSmall = 7,
    Io = 8,
    Panic = 9,
}

/// A parsed circuit.
pub struct PdqpCircuit {
    inner: Circuit,
}

/// An exact distribution over histories `(v_0, …, v_T)`, in lexicographic
/// order of the histories.
pub struct PdqpDistribution {
    steps: usize,
    entries: Vec<(Vec<usize>, f64)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(PdqpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } | Error::Table(_) => PdqpStatus::Parse,
            Error::InvalidCircuit(_) | Error::Hypothesis(_) | Error::UnsupportedGate(_) => PdqpStatus::InvalidCircuit,
            Error::BudgetExceeded { .. } => PdqpStatus::BudgetExceeded,
            Error::Io(_) => PdqpStatus::Io,
            _ => PdqpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: PdqpStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, recording the message of any error or panic.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PdqpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdqpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            PdqpStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(fail(PdqpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(PdqpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn circuit_ref<'a>(c: *const PdqpCircuit) -> Result<&'a Circuit, Failure> {
    c.as_ref()
        .map(|c| &c.inner)
        .ok_or_else(|| fail(PdqpStatus::NullPointer, "circuit handle is null"))
}

fn non_null<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(PdqpStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn write_history(samples: &[usize], out: *mut u64, len: usize) -> Result<(), Failure> {
    non_null(out, "output buffer")?;
    if len < samples.len() {
        return Err(fail(
            PdqpStatus::BufferTooSmall,
            format!("history has {} samples, buffer holds {len}", samples.len()),
        ));
    }
    for (k, &v) in samples.iter().enumerate() {
        *out.add(k) = v as u64;
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pdqp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failure on this thread, or null if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pdqp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses circuit text. Table files are resolved against the working
/// directory.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pdqp_circuit_parse(text: *const c_char, out: *mut *mut PdqpCircuit) -> PdqpStatus {
    guard(|| {
        non_null(out, "out")?;
        let c = parse_circuit(read_str(text, "text")?)?;
        *out = Box::into_raw(Box::new(PdqpCircuit { inner: c }));
        Ok(())
    })
}

/// Parses a circuit file; table files resolve against its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pdqp_circuit_parse_file(path: *const c_char, out: *mut *mut PdqpCircuit) -> PdqpStatus {
    guard(|| {
        non_null(out, "out")?;
        let c = parse_circuit_file(Path::new(read_str(path, "path")?))?;
        *out = Box::into_raw(Box::new(PdqpCircuit { inner: c }));
        Ok(())
    })
}

/// # Safety
/// `circuit` must be null or a handle from `pdqp_circuit_parse*` not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn pdqp_circuit_free(circuit: *mut PdqpCircuit) {
    if !circuit.is_null() {
        drop(Box::from_raw(circuit));
    }
}

/// Register size, or 0 for a null handle.
///
/// # Safety
/// `circuit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdqp_circuit_num_qubits(circuit: *const PdqpCircuit) -> usize {
    circuit.as_ref().map_or(0, |c| c.inner.num_qubits())
}

/// Number of steps T; a history has T + 1 samples.
///
/// # Safety
/// `circuit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdqp_circuit_num_steps(circuit: *const PdqpCircuit) -> usize {
    circuit.as_ref().map_or(0, |c| c.inner.len())
}

/// Samples one history `v_0, …, v_T` into `out[0..=T]`.
///
/// # Safety
/// `circuit` must be a live handle and `out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn pdqp_sample_history(
    circuit: *const PdqpCircuit,
    seed: u64,
    out: *mut u64,
    len: usize,
) -> PdqpStatus {
    guard(|| {
        let c = circuit_ref(circuit)?;
        let h = QpSampler::new(c)?.sample(&mut rng::seeded(seed))?;
        write_history(&h.samples, out, len)
    })
}

/// Like [`pdqp_sample_history`] but drawn with exact dyadic arithmetic.
/// Only H, X, CNOT and Toffoli gates are supported.
///
/// # Safety
/// As for [`pdqp_sample_history`].
#[no_mangle]
pub unsafe extern "C" fn pdqp_exact_sample_history(
    circuit: *const PdqpCircuit,
    seed: u64,
    out: *mut u64,
    len: usize,
) -> PdqpStatus {
    guard(|| {
        let c = circuit_ref(circuit)?;
        let h = exact_sample_history(c, &mut rng::seeded(seed))?;
        write_history(&h.samples, out, len)
    })
}

/// Enumerates the full history distribution. `budget` caps the number of
/// branches explored; 0 selects the default.
///
/// # Safety
/// `circuit` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pdqp_history_distribution(
    circuit: *const PdqpCircuit,
    budget: u64,
    out: *mut *mut PdqpDistribution,
) -> PdqpStatus {
    guard(|| {
        non_null(out, "out")?;
        let c = circuit_ref(circuit)?;
        let budget = if budget == 0 {
            DEFAULT_BUDGET
        } else {
            u128::from(budget)
        };
        let d = history_distribution_exact(c, budget)?;
        let entries: Vec<(Vec<usize>, f64)> = d.iter().map(|(h, p)| (h.clone(), p)).collect();
        *out = Box::into_raw(Box::new(PdqpDistribution {
            steps: c.len(),
            entries,
        }));
        Ok(())
    })
}

/// # Safety
/// `dist` must be null or a live distribution handle.
#[no_mangle]
pub unsafe extern "C" fn pdqp_distribution_free(dist: *mut PdqpDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Number of histories with non-zero probability.
///
/// # Safety
/// `dist` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdqp_distribution_len(dist: *const PdqpDistribution) -> usize {
    dist.as_ref().map_or(0, |d| d.entries.len())
}

/// Samples per history, T + 1.
///
/// # Safety
/// `dist` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdqp_distribution_history_len(dist: *const PdqpDistribution) -> usize {
    dist.as_ref().map_or(0, |d| d.steps + 1)
}

/// Copies entry `index` into `history[0..=T]` and `*probability`.
///
/// # Safety
/// `dist` must be a live handle, `history` must have room for `len` values
/// and `probability` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pdqp_distribution_entry(
    dist: *const PdqpDistribution,
    index: usize,
    history: *mut u64,
    len: usize,
    probability: *mut f64,
) -> PdqpStatus {
    guard(|| {
        let d = dist
            .as_ref()
            .ok_or_else(|| fail(PdqpStatus::NullPointer, "distribution handle is null"))?;
        non_null(probability, "probability")?;
        let (h, p) = d.entries.get(index).ok_or_else(|| {
            fail(
                PdqpStatus::InvalidArgument,
                format!("entry {index} out of range for {} entries", d.entries.len()),
            )
        })?;
        write_history(h, history, len)?;
        *probability = *p;
        Ok(())
    })
}

/// One run of the non-collapsing search over `2^n` items with `marked`
/// the marked item, or negative for none. `iterations` or `samples` of 0
/// select the default K and R. `*found` receives the item found or -1.
///
/// # Safety
/// `found` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pdqp_search(
    n: usize,
    marked: i64,
    iterations: usize,
    samples: usize,
    seed: u64,
    found: *mut i64,
) -> PdqpStatus {
    guard(|| {
        non_null(found, "found")?;
        let (k, r) = algorithms::default_search_parameters(n, 1.0, 1.0);
        let marked = usize::try_from(marked).ok();
        let inst = SearchInstance::new(
            n,
            marked,
            if iterations == 0 { k } else { iterations },
            if samples == 0 { r } else { samples },
            1,
        )?;
        *found = match algorithms::pdqp_search(&inst, &mut rng::seeded(seed))? {
            SearchOutcome::Found(x) => x as i64,
            SearchOutcome::NotFound => -1,
        };
        Ok(())
    })
}

/// Decides whether two samplers, given as truth tables of length
/// `2^input_bits` with values below `2^output_bits`, are far apart.
/// `*far` is set to true for "far" and false for "close".
///
/// # Safety
/// `p0` and `p1` must each point to `2^input_bits` readable values and `far`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn pdqp_sd_decide(
    input_bits: usize,
    output_bits: usize,
    p0: *const u64,
    p1: *const u64,
    seed: u64,
    far: *mut bool,
) -> PdqpStatus {
    guard(|| {
        non_null(far, "far")?;
        if p0.is_null() || p1.is_null() {
            return Err(fail(PdqpStatus::NullPointer, "table pointer is null"));
        }
        if input_bits > MAX_TABLE_INPUT_BITS {
            return Err(fail(
                PdqpStatus::InvalidArgument,
                format!("input_bits = {input_bits} exceeds {MAX_TABLE_INPUT_BITS}"),
            ));
        }
        let len = 1usize << input_bits;
        let table = |p: *const u64| -> Result<ClassicalFunction, Failure> {
            let values = std::slice::from_raw_parts(p, len).iter().map(|&v| v as usize).collect();
            Ok(ClassicalFunction::new(input_bits, output_bits, values)?)
        };
        let inst = SdInstance::new(table(p0)?, table(p1)?, None)?;
        let verdict = algorithms::solve_statistical_difference(&inst, &mut rng::seeded(seed))?;
        *far = verdict == SdVerdict::Far;
        Ok(())
    })
}
