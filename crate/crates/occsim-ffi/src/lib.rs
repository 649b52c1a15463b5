//! C ABI for the occsim library.
//!
//! Handles are opaque pointers created and destroyed by this library;
//! every fallible call returns an [`OccsimStatus`] and leaves a
//! human-readable message retrievable with [`occsim_last_error`] on
//! failure. Strings returned by accessor functions point into the handle
//! they were read from and stay valid until that handle is freed.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;
use std::str::FromStr;

use libc::c_char;

use occsim::graph::{aggregate_blocks, BlockWeightedGraph, Taxonomy};
use occsim::ingest::{load_taxonomy, TaxonomyFiles};
use occsim::projections::{project, rank_from_matrix, MeasureId, SimilarityMatrix};
use occsim::rbo::{rbo, rbo_weight, RboConfig};

/// Result codes for every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccsimStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument was out of range or otherwise invalid.
    InvalidArgument = 3,
    /// A named entity (measure, occupation id) does not exist.
    NotFound = 4,
    /// Input files failed to parse or validate.
    ParseError = 5,
    /// The underlying file system operation failed.
    IoError = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).expect("NUL bytes stripped above");
    });
}

fn fail(status: OccsimStatus, message: impl Into<String>) -> OccsimStatus {
    set_error(message);
    status
}

/// A loaded taxonomy plus its block weights and cached C strings.
pub struct OccsimTaxonomy {
    taxonomy: Taxonomy,
    weights: BlockWeightedGraph,
    occupation_ids: Vec<CString>,
}

/// A computed similarity matrix with cached C strings.
pub struct OccsimMatrix {
    matrix: SimilarityMatrix,
    ids: Vec<CString>,
    measure: CString,
}

unsafe fn utf8_arg<'a>(arg: *const c_char, name: &str) -> Result<&'a str, OccsimStatus> {
    if arg.is_null() {
        return Err(fail(OccsimStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(arg)
        .to_str()
        .map_err(|_| fail(OccsimStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn cstring_lossy(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).expect("NUL bytes stripped above")
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn occsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn occsim_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Load the four canonical taxonomy CSVs from `dir` and precompute block
/// weights. On success `*out` owns the new handle.
///
/// # Safety
/// `dir` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn occsim_taxonomy_load(
    dir: *const c_char,
    out: *mut *mut OccsimTaxonomy,
) -> OccsimStatus {
    if out.is_null() {
        return fail(OccsimStatus::NullArgument, "out is null");
    }
    *out = ptr::null_mut();
    let dir = match utf8_arg(dir, "dir") {
        Ok(d) => d,
        Err(status) => return status,
    };
    let files = TaxonomyFiles::in_dir(Path::new(dir));
    for path in files.paths() {
        if !path.is_file() {
            return fail(
                OccsimStatus::IoError,
                format!("missing file {}", path.display()),
            );
        }
    }
    match load_taxonomy(&files) {
        Ok(load) => {
            let taxonomy = load.taxonomy;
            let weights = aggregate_blocks(&taxonomy);
            let occupation_ids = taxonomy
                .occupations()
                .iter()
                .map(|o| cstring_lossy(&o.id))
                .collect();
            *out = Box::into_raw(Box::new(OccsimTaxonomy {
                taxonomy,
                weights,
                occupation_ids,
            }));
            OccsimStatus::Ok
        }
        Err(e) => fail(OccsimStatus::ParseError, e.to_string()),
    }
}

/// Free a taxonomy handle. Null is a no-op.
///
/// # Safety
/// `taxonomy` must come from [`occsim_taxonomy_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn occsim_taxonomy_free(taxonomy: *mut OccsimTaxonomy) {
    if !taxonomy.is_null() {
        drop(Box::from_raw(taxonomy));
    }
}

/// Number of occupations; 0 when the handle is null.
///
/// # Safety
/// `taxonomy` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn occsim_taxonomy_occupation_count(
    taxonomy: *const OccsimTaxonomy,
) -> usize {
    taxonomy.as_ref().map_or(0, |t| t.taxonomy.occupation_count())
}

/// Number of skills; 0 when the handle is null.
///
/// # Safety
/// `taxonomy` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn occsim_taxonomy_skill_count(taxonomy: *const OccsimTaxonomy) -> usize {
    taxonomy.as_ref().map_or(0, |t| t.taxonomy.skill_count())
}

/// Number of skill blocks; 0 when the handle is null.
///
/// # Safety
/// `taxonomy` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn occsim_taxonomy_block_count(taxonomy: *const OccsimTaxonomy) -> usize {
    taxonomy.as_ref().map_or(0, |t| t.taxonomy.block_count())
}

/// Occupation id at `index`, or null when out of range. The string lives
/// as long as the taxonomy handle.
///
/// # Safety
/// `taxonomy` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn occsim_taxonomy_occupation_id(
    taxonomy: *const OccsimTaxonomy,
    index: usize,
) -> *const c_char {
    taxonomy
        .as_ref()
        .and_then(|t| t.occupation_ids.get(index))
        .map_or(ptr::null(), |id| id.as_ptr())
}

/// Project the taxonomy under a measure named as in the CLI (`jacc_sym`,
/// `jacc_multi_sym`, `jacc_asym`, `jacc`, `coll_sym`, `coll`, `gjacc_sym`,
/// `gjacc`, `colf_sym`, `colf`). On success `*out` owns the matrix.
///
/// # Safety
/// `taxonomy` must be a live handle; `measure` a valid string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn occsim_project(
    taxonomy: *const OccsimTaxonomy,
    measure: *const c_char,
    out: *mut *mut OccsimMatrix,
) -> OccsimStatus {
    if out.is_null() {
        return fail(OccsimStatus::NullArgument, "out is null");
    }
    *out = ptr::null_mut();
    let Some(handle) = taxonomy.as_ref() else {
        return fail(OccsimStatus::NullArgument, "taxonomy is null");
    };
    let name = match utf8_arg(measure, "measure") {
        Ok(n) => n,
        Err(status) => return status,
    };
    let measure = match MeasureId::from_str(name) {
        Ok(m) => m,
        Err(e) => return fail(OccsimStatus::NotFound, e.to_string()),
    };
    let matrix = project(&handle.taxonomy, &handle.weights, measure);
    *out = Box::into_raw(Box::new(wrap_matrix(matrix)));
    OccsimStatus::Ok
}

fn wrap_matrix(matrix: SimilarityMatrix) -> OccsimMatrix {
    let ids = matrix.ids().iter().map(|id| cstring_lossy(id)).collect();
    let measure = cstring_lossy(matrix.measure().name());
    OccsimMatrix { matrix, ids, measure }
}

/// Free a matrix handle. Null is a no-op.
///
/// # Safety
/// `matrix` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn occsim_matrix_free(matrix: *mut OccsimMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Number of occupations the matrix covers; 0 when the handle is null.
///
/// # Safety
/// `matrix` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn occsim_matrix_size(matrix: *const OccsimMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.matrix.size())
}

/// Name of the measure that produced the matrix, or null.
///
/// # Safety
/// `matrix` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn occsim_matrix_measure(matrix: *const OccsimMatrix) -> *const c_char {
    matrix.as_ref().map_or(ptr::null(), |m| m.measure.as_ptr())
}

/// Occupation id at `index`, or null when out of range.
///
/// # Safety
/// `matrix` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn occsim_matrix_id(
    matrix: *const OccsimMatrix,
    index: usize,
) -> *const c_char {
    matrix
        .as_ref()
        .and_then(|m| m.ids.get(index))
        .map_or(ptr::null(), |id| id.as_ptr())
}

/// Similarity value at (source, target) written to `*out`.
///
/// # Safety
/// `matrix` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn occsim_matrix_value(
    matrix: *const OccsimMatrix,
    source: usize,
    target: usize,
    out: *mut f64,
) -> OccsimStatus {
    let Some(handle) = matrix.as_ref() else {
        return fail(OccsimStatus::NullArgument, "matrix is null");
    };
    if out.is_null() {
        return fail(OccsimStatus::NullArgument, "out is null");
    }
    let n = handle.matrix.size();
    if source >= n || target >= n {
        return fail(
            OccsimStatus::InvalidArgument,
            format!("index ({source}, {target}) out of range for {n} occupations"),
        );
    }
    *out = handle.matrix.get(source, target);
    OccsimStatus::Ok
}

/// Top-k most similar occupations for `source_id`, as indices into the
/// matrix (resolve them with [`occsim_matrix_id`]). `out_indices` must have
/// room for `k` entries; `*out_len` receives how many were written (k is
/// clamped to the candidate count).
///
/// # Safety
/// `matrix` must be a live handle; `source_id` a valid string;
/// `out_indices` must point to at least `k` writable entries.
#[no_mangle]
pub unsafe extern "C" fn occsim_matrix_rank(
    matrix: *const OccsimMatrix,
    source_id: *const c_char,
    k: usize,
    out_indices: *mut usize,
    out_len: *mut usize,
) -> OccsimStatus {
    let Some(handle) = matrix.as_ref() else {
        return fail(OccsimStatus::NullArgument, "matrix is null");
    };
    if out_len.is_null() || (k > 0 && out_indices.is_null()) {
        return fail(OccsimStatus::NullArgument, "output buffer is null");
    }
    *out_len = 0;
    let source = match utf8_arg(source_id, "source_id") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let ranked = match rank_from_matrix(&handle.matrix, source, k) {
        Ok(r) => r,
        Err(e) => return fail(OccsimStatus::NotFound, e.to_string()),
    };
    for (slot, id) in ranked.iter().enumerate() {
        let index = handle
            .matrix
            .index_of(id)
            .expect("ranked ids come from the matrix");
        *out_indices.add(slot) = index;
    }
    *out_len = ranked.len();
    OccsimStatus::Ok
}

unsafe fn write_matrix(
    matrix: *const OccsimMatrix,
    path: *const c_char,
    binary: bool,
) -> OccsimStatus {
    let Some(handle) = matrix.as_ref() else {
        return fail(OccsimStatus::NullArgument, "matrix is null");
    };
    let path = match utf8_arg(path, "path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    let result = if binary {
        handle.matrix.write_binary(Path::new(path))
    } else {
        handle.matrix.write_csv(Path::new(path))
    };
    match result {
        Ok(()) => OccsimStatus::Ok,
        Err(e) => fail(OccsimStatus::IoError, e.to_string()),
    }
}

/// Write the matrix as `source_id,target_id,value` CSV (diagonal omitted).
///
/// # Safety
/// `matrix` must be a live handle; `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn occsim_matrix_write_csv(
    matrix: *const OccsimMatrix,
    path: *const c_char,
) -> OccsimStatus {
    write_matrix(matrix, path, false)
}

/// Write the matrix in the binary cache format.
///
/// # Safety
/// `matrix` must be a live handle; `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn occsim_matrix_write_binary(
    matrix: *const OccsimMatrix,
    path: *const c_char,
) -> OccsimStatus {
    write_matrix(matrix, path, true)
}

/// Read a matrix from the binary cache format.
///
/// # Safety
/// `path` must be a valid string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn occsim_matrix_read_binary(
    path: *const c_char,
    out: *mut *mut OccsimMatrix,
) -> OccsimStatus {
    if out.is_null() {
        return fail(OccsimStatus::NullArgument, "out is null");
    }
    *out = ptr::null_mut();
    let path = match utf8_arg(path, "path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match SimilarityMatrix::read_binary(Path::new(path)) {
        Ok(matrix) => {
            *out = Box::into_raw(Box::new(wrap_matrix(matrix)));
            OccsimStatus::Ok
        }
        Err(e) => fail(OccsimStatus::ParseError, e.to_string()),
    }
}

unsafe fn string_list<'a>(
    items: *const *const c_char,
    len: usize,
    name: &str,
) -> Result<Vec<&'a str>, OccsimStatus> {
    if len > 0 && items.is_null() {
        return Err(fail(OccsimStatus::NullArgument, format!("{name} is null")));
    }
    let mut list = Vec::with_capacity(len);
    for i in 0..len {
        list.push(utf8_arg(*items.add(i), name)?);
    }
    Ok(list)
}

/// Rank-biased overlap of two duplicate-free ranked lists of strings.
/// `max_depth` of 0 means no truncation cap. Writes the value and the
/// residual tail mass.
///
/// # Safety
/// The list pointers must reference `len_a`/`len_b` valid strings;
/// `out_value` and `out_residual` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn occsim_rbo(
    list_a: *const *const c_char,
    len_a: usize,
    list_b: *const *const c_char,
    len_b: usize,
    p: f64,
    max_depth: usize,
    out_value: *mut f64,
    out_residual: *mut f64,
) -> OccsimStatus {
    if out_value.is_null() || out_residual.is_null() {
        return fail(OccsimStatus::NullArgument, "output pointer is null");
    }
    let a = match string_list(list_a, len_a, "list_a") {
        Ok(v) => v,
        Err(status) => return status,
    };
    let b = match string_list(list_b, len_b, "list_b") {
        Ok(v) => v,
        Err(status) => return status,
    };
    let config = match RboConfig::new(p).and_then(|c| {
        if max_depth == 0 {
            Ok(c)
        } else {
            c.with_max_depth(max_depth)
        }
    }) {
        Ok(c) => c,
        Err(e) => return fail(OccsimStatus::InvalidArgument, e.to_string()),
    };
    match rbo(&a, &b, &config) {
        Ok(result) => {
            *out_value = result.value;
            *out_residual = result.residual;
            OccsimStatus::Ok
        }
        Err(e) => fail(OccsimStatus::InvalidArgument, e.to_string()),
    }
}

/// Contribution of the first `depth` ranks to the full RBO value.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn occsim_rbo_weight(
    p: f64,
    depth: usize,
    out: *mut f64,
) -> OccsimStatus {
    if out.is_null() {
        return fail(OccsimStatus::NullArgument, "out is null");
    }
    match rbo_weight(p, depth) {
        Ok(w) => {
            *out = w;
            OccsimStatus::Ok
        }
        Err(e) => fail(OccsimStatus::InvalidArgument, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use occsim::fixtures::small_taxonomy;
    use occsim::ingest::write_taxonomy;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn loaded_fixture() -> (*mut OccsimTaxonomy, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        write_taxonomy(&small_taxonomy(), dir.path()).unwrap();
        let c_dir = c(dir.path().to_str().unwrap());
        let mut handle = ptr::null_mut();
        let status = unsafe { occsim_taxonomy_load(c_dir.as_ptr(), &mut handle) };
        assert_eq!(status, OccsimStatus::Ok);
        assert!(!handle.is_null());
        (handle, dir)
    }

    #[test]
    fn load_project_and_rank() {
        let (taxonomy, _dir) = loaded_fixture();
        unsafe {
            assert_eq!(occsim_taxonomy_occupation_count(taxonomy), 3);
            assert_eq!(occsim_taxonomy_skill_count(taxonomy), 4);
            assert_eq!(occsim_taxonomy_block_count(taxonomy), 2);
            let id = occsim_taxonomy_occupation_id(taxonomy, 0);
            assert_eq!(CStr::from_ptr(id).to_str().unwrap(), "o1");

            let measure = c("jacc_sym");
            let mut matrix = ptr::null_mut();
            assert_eq!(
                occsim_project(taxonomy, measure.as_ptr(), &mut matrix),
                OccsimStatus::Ok
            );
            assert_eq!(occsim_matrix_size(matrix), 3);
            let mut value = 0.0;
            assert_eq!(
                occsim_matrix_value(matrix, 0, 1, &mut value),
                OccsimStatus::Ok
            );
            assert!((value - 2.0 / 3.0).abs() < 1e-12);
            assert_eq!(
                occsim_matrix_value(matrix, 9, 0, &mut value),
                OccsimStatus::InvalidArgument
            );
            assert!(!occsim_last_error().is_null());

            let source = c("o1");
            let mut indices = [0usize; 2];
            let mut len = 0usize;
            assert_eq!(
                occsim_matrix_rank(matrix, source.as_ptr(), 2, indices.as_mut_ptr(), &mut len),
                OccsimStatus::Ok
            );
            assert_eq!(len, 2);
            let top = CStr::from_ptr(occsim_matrix_id(matrix, indices[0]));
            assert_eq!(top.to_str().unwrap(), "o2");

            let missing = c("ghost");
            assert_eq!(
                occsim_matrix_rank(matrix, missing.as_ptr(), 2, indices.as_mut_ptr(), &mut len),
                OccsimStatus::NotFound
            );

            occsim_matrix_free(matrix);
            occsim_taxonomy_free(taxonomy);
        }
    }

    #[test]
    fn matrix_round_trip_through_binary() {
        let (taxonomy, dir) = loaded_fixture();
        unsafe {
            let measure = c("colf");
            let mut matrix = ptr::null_mut();
            assert_eq!(
                occsim_project(taxonomy, measure.as_ptr(), &mut matrix),
                OccsimStatus::Ok
            );
            let path = c(dir.path().join("m.bin").to_str().unwrap());
            assert_eq!(
                occsim_matrix_write_binary(matrix, path.as_ptr()),
                OccsimStatus::Ok
            );
            let mut back = ptr::null_mut();
            assert_eq!(
                occsim_matrix_read_binary(path.as_ptr(), &mut back),
                OccsimStatus::Ok
            );
            let name = CStr::from_ptr(occsim_matrix_measure(back));
            assert_eq!(name.to_str().unwrap(), "colf");
            let (mut a, mut b) = (0.0, 0.0);
            occsim_matrix_value(matrix, 0, 1, &mut a);
            occsim_matrix_value(back, 0, 1, &mut b);
            assert_eq!(a, b);
            occsim_matrix_free(matrix);
            occsim_matrix_free(back);
            occsim_taxonomy_free(taxonomy);
        }
    }

    #[test]
    fn unknown_measure_and_missing_dir_fail_cleanly() {
        let (taxonomy, _dir) = loaded_fixture();
        unsafe {
            let bad = c("nope");
            let mut matrix = ptr::null_mut();
            assert_eq!(
                occsim_project(taxonomy, bad.as_ptr(), &mut matrix),
                OccsimStatus::NotFound
            );
            assert!(matrix.is_null());
            let msg = CStr::from_ptr(occsim_last_error()).to_str().unwrap();
            assert!(msg.contains("nope"));
            occsim_taxonomy_free(taxonomy);

            let ghost = c("/definitely/not/here");
            let mut handle = ptr::null_mut();
            assert_eq!(
                occsim_taxonomy_load(ghost.as_ptr(), &mut handle),
                OccsimStatus::IoError
            );
            assert!(handle.is_null());
        }
    }

    #[test]
    fn rbo_hand_case_through_the_c_surface() {
        let a: Vec<CString> = ["a", "b", "c"].iter().map(|s| c(s)).collect();
        let b: Vec<CString> = ["a", "c", "b"].iter().map(|s| c(s)).collect();
        let a_ptrs: Vec<*const c_char> = a.iter().map(|s| s.as_ptr()).collect();
        let b_ptrs: Vec<*const c_char> = b.iter().map(|s| s.as_ptr()).collect();
        let (mut value, mut residual) = (0.0, 0.0);
        unsafe {
            assert_eq!(
                occsim_rbo(
                    a_ptrs.as_ptr(),
                    3,
                    b_ptrs.as_ptr(),
                    3,
                    0.5,
                    0,
                    &mut value,
                    &mut residual
                ),
                OccsimStatus::Ok
            );
            assert_eq!(value, 0.75);
            assert_eq!(residual, 0.125);

            assert_eq!(
                occsim_rbo(
                    a_ptrs.as_ptr(),
                    3,
                    b_ptrs.as_ptr(),
                    3,
                    1.5,
                    0,
                    &mut value,
                    &mut residual
                ),
                OccsimStatus::InvalidArgument
            );

            let mut w = 0.0;
            assert_eq!(occsim_rbo_weight(0.9, 20, &mut w), OccsimStatus::Ok);
            assert!(w > 0.9 && w < 1.0);
        }
    }

    #[test]
    fn generated_header_covers_the_surface() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/occsim.h");
        let text = std::fs::read_to_string(&header).expect("header generated at build time");
        for symbol in [
            "occsim_taxonomy_load",
            "occsim_project",
            "occsim_matrix_rank",
            "occsim_rbo",
            "occsim_rbo_weight",
            "occsim_last_error",
            "OccsimStatus",
        ] {
            assert!(text.contains(symbol), "header is missing {symbol}");
        }
    }
}
