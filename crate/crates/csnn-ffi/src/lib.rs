//! C ABI over the csnn pipeline.
//!
//! Handles are opaque pointers created and destroyed by this library; every
//! fallible call returns a [`CsnnStatus`] and stores a human-readable
//! message retrievable with [`csnn_last_error`] (thread-local). Patches are
//! flat row-major `31*31` byte buffers; arrays of patches are contiguous.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use csnn::builder::{
    build_network, calibrate, transform_stream, BuiltNetwork, PoolLayerPlan, PoolMode,
};
use csnn::colanet::{Colanet, ColanetParams};
use csnn::kernel::{learn_bank, KernelBank, LearnerParams};
use csnn::preprocess::{
    crop_square, heat_map, shrink_max, BoundingBox, GrayImage, PATCH_SIDE,
};
use csnn::snn::SpikeSchedule;
use csnn::Error;

/// Pixels in one normalized patch buffer (31 * 31).
pub const CSNN_PATCH_LEN: usize = 961;
const _: () = assert!(CSNN_PATCH_LEN == (PATCH_SIDE * PATCH_SIDE) as usize);

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsnnStatus {
    Ok = 0,
    /// A pointer was null, a buffer had the wrong length, or a parameter
    /// violated its documented range.
    InvalidArgument = 1,
    /// File system failure.
    Io = 2,
    /// A persisted file failed to parse.
    Parse = 3,
    /// Calibration could not reach the target rate.
    Unreachable = 4,
    Internal = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let owned = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn fail(status: CsnnStatus, message: &str) -> CsnnStatus {
    set_error(message);
    status
}

fn from_error(err: &Error) -> CsnnStatus {
    let status = match err {
        Error::Io(_) | Error::Image(_) | Error::Csv(_) => CsnnStatus::Io,
        Error::Parse { .. } => CsnnStatus::Parse,
        Error::CalibrationUnreachable { .. } => CsnnStatus::Unreachable,
        _ => CsnnStatus::InvalidArgument,
    };
    set_error(&err.to_string());
    status
}

/// Message for the most recent failure on this thread. Valid until the next
/// failing call; never null.
#[no_mangle]
pub extern "C" fn csnn_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Side of a normalized patch in pixels (31).
#[no_mangle]
pub extern "C" fn csnn_patch_side() -> u32 {
    PATCH_SIDE
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, CsnnStatus> {
    if ptr.is_null() {
        return Err(fail(CsnnStatus::InvalidArgument, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(CsnnStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn patch_arg(ptr: *const u8) -> Result<GrayImage, CsnnStatus> {
    if ptr.is_null() {
        return Err(fail(CsnnStatus::InvalidArgument, "null patch pointer"));
    }
    let pixels = std::slice::from_raw_parts(ptr, CSNN_PATCH_LEN).to_vec();
    GrayImage::new(PATCH_SIDE, PATCH_SIDE, pixels).map_err(|e| from_error(&e))
}

unsafe fn patches_arg(ptr: *const u8, count: usize) -> Result<Vec<GrayImage>, CsnnStatus> {
    if ptr.is_null() || count == 0 {
        return Err(fail(
            CsnnStatus::InvalidArgument,
            "null or empty patch array",
        ));
    }
    let raw = std::slice::from_raw_parts(ptr, count * CSNN_PATCH_LEN);
    raw.chunks_exact(CSNN_PATCH_LEN)
        .map(|chunk| {
            GrayImage::new(PATCH_SIDE, PATCH_SIDE, chunk.to_vec()).map_err(|e| from_error(&e))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// preprocessing
// ---------------------------------------------------------------------------

/// Normalize one annotated object from a grayscale frame: differential heat
/// map, square crop around the box, max-shrink to 31x31.
///
/// `pixels` is row-major `width*height`; `out_patch` receives 31*31 bytes.
///
/// # Safety
/// `pixels` and `out_patch` must point to buffers of the documented sizes.
#[no_mangle]
pub unsafe extern "C" fn csnn_preprocess(
    pixels: *const u8,
    width: u32,
    height: u32,
    box_x: i64,
    box_y: i64,
    box_w: u32,
    box_h: u32,
    out_patch: *mut u8,
) -> CsnnStatus {
    if pixels.is_null() || out_patch.is_null() {
        return fail(CsnnStatus::InvalidArgument, "null buffer");
    }
    if width == 0 || height == 0 {
        return fail(CsnnStatus::InvalidArgument, "zero-sized image");
    }
    let data = std::slice::from_raw_parts(pixels, width as usize * height as usize).to_vec();
    let result = GrayImage::new(width, height, data)
        .and_then(|gray| heat_map(&gray))
        .and_then(|heat| {
            let bbox = BoundingBox::new(box_x, box_y, box_w, box_h, "");
            crop_square(&heat, &bbox)
        })
        .and_then(|crop| shrink_max(&crop, PATCH_SIDE));
    match result {
        Ok(patch) => {
            std::ptr::copy_nonoverlapping(patch.pixels().as_ptr(), out_patch, CSNN_PATCH_LEN);
            CsnnStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

// ---------------------------------------------------------------------------
// kernel bank
// ---------------------------------------------------------------------------

/// Opaque learned kernel bank.
pub struct CsnnBank {
    inner: KernelBank,
}

/// Learn a kernel bank from `count` patches (flat `count*31*31` bytes).
///
/// `learning_rate <= 0` derives the rate from the corpus size. On success
/// `*out` owns the bank; release it with [`csnn_bank_free`].
///
/// # Safety
/// `patches` must hold `count` packed patches; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csnn_bank_learn(
    patches: *const u8,
    count: usize,
    kernel_count: u32,
    kernel_size: u32,
    stride: u32,
    brightness_threshold: u8,
    w_min: f64,
    w_max: f64,
    learning_rate: f64,
    seed: u64,
    out: *mut *mut CsnnBank,
) -> CsnnStatus {
    if out.is_null() {
        return fail(CsnnStatus::InvalidArgument, "null output handle");
    }
    let corpus = match patches_arg(patches, count) {
        Ok(c) => c,
        Err(status) => return status,
    };
    let params = LearnerParams {
        kernel_size: kernel_size as usize,
        kernel_count: kernel_count as usize,
        stride: stride as usize,
        brightness_threshold,
        w_min,
        w_max,
        learning_rate: (learning_rate > 0.0).then_some(learning_rate),
        corpus_size: corpus.len(),
        seed,
    };
    match learn_bank(&corpus, params) {
        Ok((bank, _)) => {
            *out = Box::into_raw(Box::new(CsnnBank { inner: bank }));
            CsnnStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Load a bank from its text format.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csnn_bank_load(
    path: *const c_char,
    stride: u32,
    out: *mut *mut CsnnBank,
) -> CsnnStatus {
    if out.is_null() {
        return fail(CsnnStatus::InvalidArgument, "null output handle");
    }
    let path = match str_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match KernelBank::load(Path::new(path)) {
        Ok(mut bank) => {
            bank.set_stride(stride as usize);
            *out = Box::into_raw(Box::new(CsnnBank { inner: bank }));
            CsnnStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// # Safety
/// `bank` must be a live handle; `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn csnn_bank_save(bank: *const CsnnBank, path: *const c_char) -> CsnnStatus {
    let Some(bank) = bank.as_ref() else {
        return fail(CsnnStatus::InvalidArgument, "null bank");
    };
    let path = match str_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match bank.inner.save(Path::new(path)) {
        Ok(()) => CsnnStatus::Ok,
        Err(e) => from_error(&e),
    }
}

/// # Safety
/// `bank` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csnn_bank_kernel_count(bank: *const CsnnBank) -> u32 {
    bank.as_ref().map_or(0, |b| b.inner.kernel_count() as u32)
}

/// # Safety
/// `bank` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csnn_bank_kernel_size(bank: *const CsnnBank) -> u32 {
    bank.as_ref().map_or(0, |b| b.inner.kernel_size() as u32)
}

/// Copy all kernel weights (kernel-major, row-major inside a kernel) into
/// `out`, which holds `len` doubles; `len` must equal
/// `kernel_count * kernel_size * kernel_size`.
///
/// # Safety
/// `bank` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csnn_bank_weights(
    bank: *const CsnnBank,
    out: *mut f64,
    len: usize,
) -> CsnnStatus {
    let Some(bank) = bank.as_ref() else {
        return fail(CsnnStatus::InvalidArgument, "null bank");
    };
    if out.is_null() {
        return fail(CsnnStatus::InvalidArgument, "null output buffer");
    }
    let n = bank.inner.kernel_count();
    let kk = bank.inner.kernel_size() * bank.inner.kernel_size();
    if len != n * kk {
        return fail(
            CsnnStatus::InvalidArgument,
            &format!("weight buffer holds {len}, bank needs {}", n * kk),
        );
    }
    for a in 0..n {
        let src = bank.inner.kernel_weights(a);
        std::ptr::copy_nonoverlapping(src.as_ptr(), out.add(a * kk), kk);
    }
    CsnnStatus::Ok
}

/// # Safety
/// `bank` must be null or a handle produced by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csnn_bank_free(bank: *mut CsnnBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

// ---------------------------------------------------------------------------
// feature network
// ---------------------------------------------------------------------------

/// Opaque fixed-weight convolution + pooling network.
pub struct CsnnNetwork {
    inner: BuiltNetwork,
}

fn pool_plan(use_max_pooling: bool) -> PoolLayerPlan {
    PoolLayerPlan::with_mode(if use_max_pooling {
        PoolMode::MaxWta
    } else {
        PoolMode::Average
    })
}

/// Build the feature network from a bank at a fixed weight scale.
///
/// # Safety
/// `bank` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csnn_network_build(
    bank: *const CsnnBank,
    scale: f64,
    use_max_pooling: bool,
    out: *mut *mut CsnnNetwork,
) -> CsnnStatus {
    let Some(bank) = bank.as_ref() else {
        return fail(CsnnStatus::InvalidArgument, "null bank");
    };
    if out.is_null() {
        return fail(CsnnStatus::InvalidArgument, "null output handle");
    }
    match build_network(&bank.inner, scale, &pool_plan(use_max_pooling)) {
        Ok(net) => {
            *out = Box::into_raw(Box::new(CsnnNetwork { inner: net }));
            CsnnStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Find the weight scale whose mean pooling rate lands within
/// `tolerance * target_hz` of `target_hz` on a sample of patches.
///
/// # Safety
/// `bank` must be a live handle, `sample` holds `count` packed patches and
/// `out_scale` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csnn_network_calibrate(
    bank: *const CsnnBank,
    use_max_pooling: bool,
    sample: *const u8,
    count: usize,
    target_hz: f64,
    tolerance: f64,
    out_scale: *mut f64,
) -> CsnnStatus {
    let Some(bank) = bank.as_ref() else {
        return fail(CsnnStatus::InvalidArgument, "null bank");
    };
    if out_scale.is_null() {
        return fail(CsnnStatus::InvalidArgument, "null output scale");
    }
    let patches = match patches_arg(sample, count) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match calibrate(
        &bank.inner,
        &pool_plan(use_max_pooling),
        &patches,
        target_hz,
        tolerance,
    ) {
        Ok(outcome) => {
            *out_scale = outcome.scale;
            CsnnStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Number of flattened pooling outputs.
///
/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csnn_network_output_len(net: *const CsnnNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.inner.output_len())
}

/// Present one patch for a full 20 ms cycle and write each pooling node's
/// spike count into `out_counts` (`len` must equal the output length).
///
/// # Safety
/// `net` must be a live handle, `patch` 31*31 bytes, `out_counts` `len`
/// entries.
#[no_mangle]
pub unsafe extern "C" fn csnn_network_transform(
    net: *const CsnnNetwork,
    patch: *const u8,
    out_counts: *mut u32,
    len: usize,
) -> CsnnStatus {
    let Some(net) = net.as_ref() else {
        return fail(CsnnStatus::InvalidArgument, "null network");
    };
    if out_counts.is_null() {
        return fail(CsnnStatus::InvalidArgument, "null output buffer");
    }
    if len != net.inner.output_len() {
        return fail(
            CsnnStatus::InvalidArgument,
            &format!(
                "count buffer holds {len}, network has {} outputs",
                net.inner.output_len()
            ),
        );
    }
    let patch = match patch_arg(patch) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match transform_stream(&net.inner, std::slice::from_ref(&patch)) {
        Ok(streams) => {
            let counts = std::slice::from_raw_parts_mut(out_counts, len);
            counts.fill(0);
            for event in &streams[0].events {
                counts[event.node] += 1;
            }
            CsnnStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// # Safety
/// `net` must be null or a handle produced by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csnn_network_free(net: *mut CsnnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

// ---------------------------------------------------------------------------
// classifier head
// ---------------------------------------------------------------------------

/// Opaque columnar classifier head.
pub struct CsnnClassifier {
    inner: Colanet,
}

/// Create an untrained head. `inputs` must match the network's output
/// length it will be trained against.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csnn_classifier_new(
    num_classes: u32,
    microcolumns_per_column: u32,
    inputs: usize,
    learning_rate: f64,
    weight_min: f64,
    weight_max: f64,
    bias_increment: f64,
    seed: u64,
    out: *mut *mut CsnnClassifier,
) -> CsnnStatus {
    if out.is_null() {
        return fail(CsnnStatus::InvalidArgument, "null output handle");
    }
    let params = ColanetParams {
        num_classes: num_classes as usize,
        microcolumns_per_column: microcolumns_per_column as usize,
        inputs,
        learning_rate,
        weight_min,
        weight_max,
        bias_increment,
        seed,
    };
    match Colanet::new(params) {
        Ok(head) => {
            *out = Box::into_raw(Box::new(CsnnClassifier { inner: head }));
            CsnnStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

fn streams_for(
    net: &BuiltNetwork,
    patches: &[GrayImage],
) -> Result<Vec<SpikeSchedule>, Error> {
    transform_stream(net, patches)
}

/// One training epoch over `count` labeled patches (single pass, in
/// order): each patch is run through the network and presented to the head
/// with its label.
///
/// # Safety
/// Handles must be live; `patches` holds `count` packed patches and
/// `labels` `count` entries.
#[no_mangle]
pub unsafe extern "C" fn csnn_classifier_train_epoch(
    classifier: *mut CsnnClassifier,
    net: *const CsnnNetwork,
    patches: *const u8,
    labels: *const u32,
    count: usize,
) -> CsnnStatus {
    let Some(classifier) = classifier.as_mut() else {
        return fail(CsnnStatus::InvalidArgument, "null classifier");
    };
    let Some(net) = net.as_ref() else {
        return fail(CsnnStatus::InvalidArgument, "null network");
    };
    if labels.is_null() {
        return fail(CsnnStatus::InvalidArgument, "null labels");
    }
    let imgs = match patches_arg(patches, count) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let labels = std::slice::from_raw_parts(labels, count);
    let streams = match streams_for(&net.inner, &imgs) {
        Ok(s) => s,
        Err(e) => return from_error(&e),
    };
    let items: Vec<(SpikeSchedule, usize)> = streams
        .into_iter()
        .zip(labels.iter().map(|&l| l as usize))
        .collect();
    match classifier.inner.train_epoch(&items) {
        Ok(_) => CsnnStatus::Ok,
        Err(e) => from_error(&e),
    }
}

/// Classify one patch; returns the class index, or a negative value on
/// error (inspect [`csnn_last_error`]).
///
/// # Safety
/// Handles must be live; `patch` holds 31*31 bytes.
#[no_mangle]
pub unsafe extern "C" fn csnn_classifier_predict(
    classifier: *const CsnnClassifier,
    net: *const CsnnNetwork,
    patch: *const u8,
) -> i32 {
    let Some(classifier) = classifier.as_ref() else {
        fail(CsnnStatus::InvalidArgument, "null classifier");
        return -1;
    };
    let Some(net) = net.as_ref() else {
        fail(CsnnStatus::InvalidArgument, "null network");
        return -1;
    };
    let patch = match patch_arg(patch) {
        Ok(p) => p,
        Err(_) => return -1,
    };
    let streams = match streams_for(&net.inner, std::slice::from_ref(&patch)) {
        Ok(s) => s,
        Err(e) => {
            from_error(&e);
            return -1;
        }
    };
    match classifier.inner.classify(&streams[0]) {
        Ok(outcome) => outcome.predicted as i32,
        Err(e) => {
            from_error(&e);
            -1
        }
    }
}

/// # Safety
/// `classifier` must be a live handle; `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn csnn_classifier_save(
    classifier: *const CsnnClassifier,
    path: *const c_char,
) -> CsnnStatus {
    let Some(classifier) = classifier.as_ref() else {
        return fail(CsnnStatus::InvalidArgument, "null classifier");
    };
    let path = match str_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match classifier.inner.save(Path::new(path)) {
        Ok(()) => CsnnStatus::Ok,
        Err(e) => from_error(&e),
    }
}

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn csnn_classifier_load(
    path: *const c_char,
    out: *mut *mut CsnnClassifier,
) -> CsnnStatus {
    if out.is_null() {
        return fail(CsnnStatus::InvalidArgument, "null output handle");
    }
    let path = match str_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match Colanet::load(Path::new(path)) {
        Ok(head) => {
            *out = Box::into_raw(Box::new(CsnnClassifier { inner: head }));
            CsnnStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// # Safety
/// `classifier` must be null or a handle produced by this library, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn csnn_classifier_free(classifier: *mut CsnnClassifier) {
    if !classifier.is_null() {
        drop(Box::from_raw(classifier));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use csnn::pipeline::synth;

    fn packed_corpus(per_class: usize, seed: u64) -> (Vec<u8>, Vec<u32>) {
        let corpus = synth::make_corpus(per_class, seed);
        let mut bytes = Vec::with_capacity(corpus.len() * CSNN_PATCH_LEN);
        let mut labels = Vec::with_capacity(corpus.len());
        for (patch, label) in &corpus {
            bytes.extend_from_slice(patch.pixels());
            labels.push(*label as u32);
        }
        (bytes, labels)
    }

    unsafe fn learn_small_bank(bytes: &[u8], count: usize) -> *mut CsnnBank {
        let mut bank: *mut CsnnBank = std::ptr::null_mut();
        let status = csnn_bank_learn(
            bytes.as_ptr(),
            count,
            4,
            9,
            2,
            26,
            -5.0 / 3.0 / 255.0,
            5.0 / 255.0,
            0.0,
            7,
            &mut bank,
        );
        assert_eq!(status, CsnnStatus::Ok);
        bank
    }

    #[test]
    fn end_to_end_through_the_c_surface() {
        unsafe {
            let (bytes, labels) = packed_corpus(12, 1);
            let count = labels.len();
            let bank = learn_small_bank(&bytes, count);
            assert_eq!(csnn_bank_kernel_count(bank), 4);
            assert_eq!(csnn_bank_kernel_size(bank), 9);

            let mut weights = vec![0.0f64; 4 * 81];
            assert_eq!(
                csnn_bank_weights(bank, weights.as_mut_ptr(), weights.len()),
                CsnnStatus::Ok
            );
            assert!(weights.iter().any(|&w| w != 0.0));

            let mut scale = 0.0f64;
            let status = csnn_network_calibrate(
                bank,
                false,
                bytes.as_ptr(),
                8,
                50.0,
                0.1,
                &mut scale,
            );
            assert_eq!(status, CsnnStatus::Ok);
            assert!(scale > 0.0);

            let mut net: *mut CsnnNetwork = std::ptr::null_mut();
            assert_eq!(
                csnn_network_build(bank, scale, false, &mut net),
                CsnnStatus::Ok
            );
            let out_len = csnn_network_output_len(net);
            assert_eq!(out_len, 4 * 36);

            let mut counts = vec![0u32; out_len];
            assert_eq!(
                csnn_network_transform(net, bytes.as_ptr(), counts.as_mut_ptr(), out_len),
                CsnnStatus::Ok
            );
            assert!(counts.iter().any(|&c| c > 0));

            let mut head: *mut CsnnClassifier = std::ptr::null_mut();
            assert_eq!(
                csnn_classifier_new(3, 6, out_len, 0.0035, -0.0628, 0.152, 0.02, 9, &mut head),
                CsnnStatus::Ok
            );
            assert_eq!(
                csnn_classifier_train_epoch(
                    head,
                    net,
                    bytes.as_ptr(),
                    labels.as_ptr(),
                    count
                ),
                CsnnStatus::Ok
            );
            let label = csnn_classifier_predict(head, net, bytes.as_ptr());
            assert!((0..3).contains(&label));

            csnn_classifier_free(head);
            csnn_network_free(net);
            csnn_bank_free(bank);
        }
    }

    #[test]
    fn preprocess_produces_a_patch() {
        let mut frame = vec![12u8; 64 * 64];
        for y in 16..48 {
            for x in 16..48 {
                if (x / 4 + y / 4) % 2 == 0 {
                    frame[y * 64 + x] = 210;
                }
            }
        }
        let mut patch = vec![0u8; CSNN_PATCH_LEN];
        let status = unsafe {
            csnn_preprocess(frame.as_ptr(), 64, 64, 14, 14, 36, 34, patch.as_mut_ptr())
        };
        assert_eq!(status, CsnnStatus::Ok);
        assert!(patch.iter().any(|&p| p > 0));
    }

    #[test]
    fn errors_set_status_and_message() {
        unsafe {
            let mut bank: *mut CsnnBank = std::ptr::null_mut();
            // Invalid params: w_min must be <= 0.
            let (bytes, labels) = packed_corpus(2, 2);
            let status = csnn_bank_learn(
                bytes.as_ptr(),
                labels.len(),
                4,
                9,
                2,
                26,
                0.5,
                0.02,
                0.0,
                1,
                &mut bank,
            );
            assert_eq!(status, CsnnStatus::InvalidArgument);
            let msg = CStr::from_ptr(csnn_last_error()).to_string_lossy().into_owned();
            assert!(msg.contains("w_min"), "{msg}");

            let status = csnn_bank_load(
                CString::new("/nonexistent/bank.kbank").unwrap().as_ptr(),
                2,
                &mut bank,
            );
            assert_eq!(status, CsnnStatus::Io);

            // Wrong buffer length.
            let bank = learn_small_bank(&bytes, labels.len());
            let mut too_small = vec![0.0f64; 3];
            assert_eq!(
                csnn_bank_weights(bank, too_small.as_mut_ptr(), too_small.len()),
                CsnnStatus::InvalidArgument
            );
            csnn_bank_free(bank);
        }
    }

    #[test]
    fn bank_roundtrips_through_a_file() {
        unsafe {
            let (bytes, labels) = packed_corpus(4, 3);
            let bank = learn_small_bank(&bytes, labels.len());
            let dir = std::env::temp_dir().join("csnn_ffi_bank_test");
            std::fs::create_dir_all(&dir).unwrap();
            let path = dir.join("bank.kbank");
            let cpath = CString::new(path.to_str().unwrap()).unwrap();
            assert_eq!(csnn_bank_save(bank, cpath.as_ptr()), CsnnStatus::Ok);
            let mut loaded: *mut CsnnBank = std::ptr::null_mut();
            assert_eq!(csnn_bank_load(cpath.as_ptr(), 2, &mut loaded), CsnnStatus::Ok);
            assert_eq!(csnn_bank_kernel_count(loaded), 4);
            let mut a = vec![0.0f64; 4 * 81];
            let mut b = vec![0.0f64; 4 * 81];
            assert_eq!(csnn_bank_weights(bank, a.as_mut_ptr(), a.len()), CsnnStatus::Ok);
            assert_eq!(
                csnn_bank_weights(loaded, b.as_mut_ptr(), b.len()),
                CsnnStatus::Ok
            );
            assert_eq!(a, b);
            csnn_bank_free(bank);
            csnn_bank_free(loaded);
            std::fs::remove_dir_all(&dir).ok();
        }
    }

    #[test]
    fn generated_header_exists_and_declares_the_surface() {
        let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/csnn.h");
        let text = std::fs::read_to_string(header).expect("cbindgen header");
        for symbol in [
            "csnn_last_error",
            "csnn_preprocess",
            "csnn_bank_learn",
            "csnn_network_build",
            "csnn_network_transform",
            "csnn_classifier_train_epoch",
            "csnn_classifier_predict",
            "CsnnStatus",
        ] {
            assert!(text.contains(symbol), "header missing {symbol}");
        }
    }
}
