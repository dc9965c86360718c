#ifndef QMCMET_H
#define QMCMET_H

/* C interface to the nanobeam cavity metrology core.
 *
 * Conventions:
 *   - Every operation returns an int status: QMCMET_OK (0) on success, a
 *     QMCMET_ERR_* code on failure. On failure no out-parameter is written.
 *   - qmcmet_last_status() / qmcmet_last_message() return the most recent
 *     failure on the calling thread; a successful call clears them.
 *   - Handles come from _read/_build/_fit constructors and are released with
 *     the matching _free. Passing NULL to any _free is a no-op. Handles are
 *     immutable after construction, so concurrent reads are safe; creation
 *     and destruction are not synchronized.
 *   - char** outputs are heap strings released with qmcmet_string_free.
 *     const char* returns are owned by the handle and stay valid until it is
 *     freed.
 *   - Units ride in the parameter names: _nm, _um, _px, _deg. Out-pointer
 *     arguments marked "may be NULL" are skipped when NULL.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values are a stable contract. */
enum {
    QMCMET_OK = 0,
    QMCMET_ERR_INVALID_ARGUMENT = 1,
    QMCMET_ERR_UNKNOWN_UNIT = 2,
    QMCMET_ERR_IO_FAILURE = 3,
    QMCMET_ERR_BAD_MAGIC = 4,
    QMCMET_ERR_HEADER_MISMATCH = 5,
    QMCMET_ERR_NON_MONOTONIC_AXIS = 6,
    QMCMET_ERR_UNSUPPORTED_FORMAT = 7,
    QMCMET_ERR_MISSING_SCALE = 8,
    QMCMET_ERR_EMPTY_SPECTRUM = 9,
    QMCMET_ERR_WINDOW_TOO_SMALL = 10,
    QMCMET_ERR_TOO_FEW_SAMPLES = 11,
    QMCMET_ERR_ALL_MODES_UNRESOLVED = 12,
    QMCMET_ERR_SEED_PEAK_NOT_FOUND = 13,
    QMCMET_ERR_TRACK_LOST = 14,
    QMCMET_ERR_ZERO_OFF_RESONANCE_SIGNAL = 15,
    QMCMET_ERR_CHIPLET_OUT_OF_RANGE = 16,
    QMCMET_ERR_IMAGE_TOO_SMALL = 17,
    QMCMET_ERR_LOW_COHERENCE = 18,
    QMCMET_ERR_EDGE_COUNT_MISMATCH = 19,
    QMCMET_ERR_TRAPEZOID_VIOLATION = 20,
    QMCMET_ERR_RIDGE_COUNT_MISMATCH = 21,
    QMCMET_ERR_NON_PARALLEL_RIDGES = 22,
    QMCMET_ERR_INVALID_GEOMETRY = 23,
    QMCMET_ERR_DEGENERATE_TILT = 24,
    QMCMET_ERR_UNSTABLE_GEOMETRY = 25,
    QMCMET_ERR_OUT_OF_VALIDITY_RANGE = 26,
    QMCMET_ERR_POLE_PROXIMITY = 27,
    QMCMET_ERR_OUT_OF_VALIDITY_BOX = 28,
    QMCMET_ERR_RANK_DEFICIENT = 29,
    QMCMET_ERR_NO_SIGN_CHANGE = 30,
    QMCMET_ERR_NON_MONOTONE_ON_BRACKET = 31,
    QMCMET_ERR_TOO_MANY_FAILURES = 32,
    QMCMET_ERR_NO_PAIRS_IN_RANGE = 33,
    QMCMET_ERR_INTERNAL = 1000
};

/* Library version, e.g. "1.0.0". Static storage. */
const char* qmcmet_version(void);

/* Last failure on this thread. The message is thread-local storage,
 * overwritten by the next failing call and cleared by a succeeding one;
 * it is never NULL. */
int qmcmet_last_status(void);
const char* qmcmet_last_message(void);

void qmcmet_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Result tables                                                       */

typedef struct qmcmet_table qmcmet_table;

enum {
    QMCMET_CELL_INT = 0,
    QMCMET_CELL_REAL = 1,
    QMCMET_CELL_TEXT = 2
};

int qmcmet_table_read_csv(const char* path, qmcmet_table** out);

/* Shape accessors tolerate NULL (return 0). */
size_t qmcmet_table_rows(const qmcmet_table* t);
size_t qmcmet_table_cols(const qmcmet_table* t);

/* NULL when col is out of range. Owned by the table. */
const char* qmcmet_table_name(const qmcmet_table* t, size_t col);

/* QMCMET_CELL_* on success, -1 when col is out of range. */
int qmcmet_table_cell_type(const qmcmet_table* t, size_t col);

/* Resolves a column by name; QMCMET_ERR_INVALID_ARGUMENT when absent. */
int qmcmet_table_column(const qmcmet_table* t, const char* name, size_t* out_col);

/* Typed cell reads. A null real cell reads as NaN. numeric_at widens an
 * int cell to double. Type or bounds mismatch is an error. */
int qmcmet_table_int_at(const qmcmet_table* t, size_t row, size_t col, int64_t* out);
int qmcmet_table_real_at(const qmcmet_table* t, size_t row, size_t col, double* out);
int qmcmet_table_text_at(const qmcmet_table* t, size_t row, size_t col, const char** out);
int qmcmet_table_numeric_at(const qmcmet_table* t, size_t row, size_t col, double* out);

/* CSV: RFC-4180-style quoting, LF line ends, header row. JSON: array of
 * records. Reals carry 17 significant digits and round-trip bit-exactly. */
int qmcmet_table_to_csv(const qmcmet_table* t, char** out);
int qmcmet_table_to_json(const qmcmet_table* t, char** out);
int qmcmet_table_write_csv(const qmcmet_table* t, const char* path);
int qmcmet_table_write_json(const qmcmet_table* t, const char* path);

void qmcmet_table_free(qmcmet_table* t);

/* ------------------------------------------------------------------ */
/* Spectra                                                             */

typedef struct qmcmet_spectrum qmcmet_spectrum;

/* CSV with header columns wavelength_nm, intensity. */
int qmcmet_spectrum_read_csv(const char* path, qmcmet_spectrum** out);

/* Axis must be strictly increasing and finite. */
int qmcmet_spectrum_from_arrays(const double* wavelength_nm, const double* intensity,
                                size_t n, qmcmet_spectrum** out);

size_t qmcmet_spectrum_size(const qmcmet_spectrum* s);

/* Copies the axis and/or intensities into caller buffers of length
 * qmcmet_spectrum_size(s). Either destination may be NULL. */
int qmcmet_spectrum_copy(const qmcmet_spectrum* s, double* wavelength_nm,
                         double* intensity);

void qmcmet_spectrum_free(qmcmet_spectrum* s);

/* ------------------------------------------------------------------ */
/* Peak finding and line-shape fits                                    */

/* Local maxima by contour prominence, sorted by prominence descending.
 * fwhm_lo_nm/fwhm_hi_nm bound the half-prominence width (fwhm_lo_nm = 0
 * disables the floor, fwhm_hi_nm <= 0 means unbounded); max_peaks = 0
 * means unlimited. Columns: index (int), center_nm, prominence, fwhm_nm,
 * height. A clean no-peak result is an empty table, not an error. */
int qmcmet_find_peaks(const qmcmet_spectrum* s, double min_prominence,
                      double fwhm_lo_nm, double fwhm_hi_nm, size_t max_peaks,
                      qmcmet_table** out);

typedef struct qmcmet_line_fit {
    double center_nm;
    double fwhm_nm;
    double amplitude;
    double offset;
    double q_factor;      /* center/fwhm of this fit, exactly */
    double q_asym;        /* Fano asymmetry; 0 for a Lorentzian fit */
    double residual_rms;
    int converged;        /* 0 means the seed is echoed back, not an error */
    int iterations;
} qmcmet_line_fit;

/* Damped Gauss-Newton inside [window_lo_nm, window_hi_nm]; the window must
 * hold at least five samples and contain init_center_nm. */
int qmcmet_fit_lorentzian(const qmcmet_spectrum* s, double window_lo_nm,
                          double window_hi_nm, double init_center_nm,
                          double init_fwhm_nm, double init_height,
                          qmcmet_line_fit* out);
int qmcmet_fit_fano(const qmcmet_spectrum* s, double window_lo_nm,
                    double window_hi_nm, double init_center_nm,
                    double init_fwhm_nm, double init_height,
                    qmcmet_line_fit* out);

/* Matrix-pencil ringdown decomposition of a uniformly sampled record.
 * im may be NULL for a real record (conjugate pairs fold onto f >= 0).
 * max_order <= 0 and sv_ratio <= 0 select the defaults (8, 1e-8).
 * Columns: frequency (1/dt units), gamma, q_factor (null when the decay
 * rate is not resolvable as a finite Q), amp_magnitude, amp_phase_rad,
 * unresolved (int), sorted by amplitude descending. */
int qmcmet_prony_modes(const double* re, const double* im, size_t n, double dt,
                       int max_order, double sv_ratio, qmcmet_table** out);

/* ------------------------------------------------------------------ */
/* Hyperspectral cubes and cavity maps                                 */

typedef struct qmcmet_cube qmcmet_cube;
typedef struct qmcmet_cavity_map qmcmet_cavity_map;

int qmcmet_cube_read(const char* path, qmcmet_cube** out);

/* Long-format CSV with columns x_idx, y_idx, lambda_nm, intensity; the
 * index grid must be complete. */
int qmcmet_cube_from_long_csv(const char* path, double pixel_pitch_um,
                              double origin_x_um, double origin_y_um,
                              qmcmet_cube** out);

int qmcmet_cube_write(const qmcmet_cube* c, const char* path);

int qmcmet_cube_dims(const qmcmet_cube* c, int* nx, int* ny, size_t* n_lambda);

/* Copies the wavelength axis into a caller buffer of length n_lambda. */
int qmcmet_cube_axis(const qmcmet_cube* c, double* lambda_nm);

int qmcmet_cube_spectrum_at(const qmcmet_cube* c, int x, int y,
                            qmcmet_spectrum** out);

void qmcmet_cube_free(qmcmet_cube* c);

/* Per-pixel peak search and Lorentzian fit over the whole raster, merged
 * across 8-connected neighbors. The chiplet grid tiles the raster rows x
 * cols, each tile holding `nanobeams` horizontal strips. fit_halfwidth_nm
 * and merge_tol_nm <= 0 select the defaults (1.0, 0.3). Deterministic for
 * any thread count. */
int qmcmet_cavity_map_build(const qmcmet_cube* c, int rows, int cols,
                            int nanobeams, double min_prominence,
                            double fit_halfwidth_nm, double merge_tol_nm,
                            qmcmet_cavity_map** out);

/* One row per detected cavity: x_idx, y_idx, chiplet_row, chiplet_col,
 * nanobeam (int), lambda_nm, fwhm_nm, q_factor, amplitude, offset,
 * residual_rms, converged (int), iterations (int). */
int qmcmet_cavity_map_records(const qmcmet_cavity_map* m, qmcmet_table** out);

/* One row per chiplet: chiplet_row, chiplet_col, n_cavities (int),
 * mean_lambda_nm, std_lambda_nm, mean_q, std_q (null where undefined),
 * fill_fraction. */
int qmcmet_cavity_map_summary(const qmcmet_cavity_map* m, qmcmet_table** out);

/* Fraction of the chiplet's nanobeam slots holding at least one record. */
int qmcmet_cavity_map_fill_fraction(const qmcmet_cavity_map* m, int chiplet_row,
                                    int chiplet_col, double* out);

void qmcmet_cavity_map_free(qmcmet_cavity_map* m);

/* ------------------------------------------------------------------ */
/* Resonance tracking and enhancement                                  */

/* Follows one resonance through an ordered frame sequence, seeded by the
 * most prominent peak inside [seed_lo_nm, seed_hi_nm] on frame 0.
 * search_radius_nm / fit_halfwidth_nm <= 0 select the defaults (1.0, 1.0);
 * max_gap <= 0 selects 5. Trajectory columns: frame (int), lambda_nm
 * (null where the peak was absent). */
int qmcmet_track_shift(const qmcmet_spectrum* const* frames, size_t n_frames,
                       double seed_lo_nm, double seed_hi_nm,
                       double min_prominence, double search_radius_nm,
                       double fit_halfwidth_nm, int max_gap,
                       double* total_shift_nm, int* direction,
                       qmcmet_table** out_trajectory);

/* Ratio of background-subtracted integrals over line +- half_width;
 * background is the per-spectrum median outside the window. */
int qmcmet_enhancement_factor(const qmcmet_spectrum* on, const qmcmet_spectrum* off,
                              double line_nm, double half_width_nm, double* out);

/* ------------------------------------------------------------------ */
/* Micrograph geometry                                                 */

typedef struct qmcmet_image qmcmet_image;

/* PGM (P5) or 8-bit grayscale PNG. scale_override_nm_per_px > 0 wins over
 * the "<path>.meta.json" sidecar; with neither the read fails with
 * QMCMET_ERR_MISSING_SCALE. */
int qmcmet_image_read(const char* path, double scale_override_nm_per_px,
                      qmcmet_image** out);

/* tilt_deg reads NaN when the sidecar carried none. Outs may be NULL. */
int qmcmet_image_info(const qmcmet_image* img, int* width, int* height,
                      double* scale_nm_per_px, double* tilt_deg);

void qmcmet_image_free(qmcmet_image* img);

typedef struct qmcmet_beam_axis {
    double angle_deg;   /* beam direction, normalized to (-90, 90] */
    double coherence;   /* structure-tensor anisotropy in [0, 1] */
} qmcmet_beam_axis;

int qmcmet_sem_beam_axis(const qmcmet_image* img, qmcmet_beam_axis* out);

typedef struct qmcmet_widths {
    double w_top_nm;
    double w_bottom_nm;
    double sigma_w_top_nm;
    double sigma_w_bottom_nm;
    double edge_positions_px[4];  /* along the beam normal, ascending */
    double edge_weights[4];       /* gradient mass used per edge */
} qmcmet_widths;

/* Top-view sidewall edges: rise, rise, fall, fall along the beam normal.
 * The outer pair spans the bottom width, the inner pair the top width. */
int qmcmet_sem_measure_widths(const qmcmet_image* img, const qmcmet_beam_axis* axis,
                              qmcmet_widths* out);

/* Gradient-direction Hough circle detection along the beam midline.
 * Config values <= 0 select the defaults: radius range 20-80 nm, midline
 * offset 60 nm, spacing 80 nm. Columns: center_x_px, center_y_px,
 * radius_nm, ordered along the beam axis. No circular features is an
 * empty table. Outs may be NULL. */
int qmcmet_sem_detect_holes(const qmcmet_image* img, const qmcmet_beam_axis* axis,
                            double r_lo_nm, double r_hi_nm,
                            double max_midline_offset_nm, double min_spacing_nm,
                            double* mean_radius_nm, double* std_radius_nm,
                            qmcmet_table** out);

typedef struct qmcmet_ridges {
    double d_t_px;               /* far-top to near-top separation */
    double d_nb_px;              /* near-top to near-bottom separation */
    double psi_deg;              /* mean in-plane rotation of the ridges */
    double psi_spread_deg;       /* largest pairwise angle disagreement */
    double line_angles_deg[3];   /* absolute image-frame angles */
    double line_offsets_px[3];   /* perpendicular offsets, ascending */
} qmcmet_ridges;

/* The three near-parallel ridges of a tilted view, ordered across the
 * image normal: far-top, near-top, near-bottom. */
int qmcmet_sem_detect_ridges(const qmcmet_image* img, qmcmet_ridges* out);

/* Closed-form thickness from the projected-geometry ratio; depends on
 * (d_t, d_nb) only through their ratio. theta_deg must lie in (0, 90)
 * and |psi_deg| < 90. */
int qmcmet_thickness(double w_top_um, double w_bottom_um, double d_t, double d_nb,
                     double theta_deg, double psi_deg, double* t_um);

/* Monte Carlo propagation of Gaussian input noise through the projection
 * formula; n_mc >= 100 independent draws, deterministic for a fixed seed.
 * More than 10% invalid draws fail with QMCMET_ERR_UNSTABLE_GEOMETRY.
 * Outs may be NULL. */
int qmcmet_thickness_mc(double w_top_um, double w_bottom_um, double d_t_px,
                        double d_nb_px, double theta_deg, double psi_deg,
                        double sigma_w_top_um, double sigma_w_bottom_um,
                        double sigma_d_t_px, double sigma_d_nb_px, int n_mc,
                        uint64_t seed, double* t_um, double* sigma_t_um);

/* ------------------------------------------------------------------ */
/* Dispersion and resonance surrogate                                  */

/* Diamond Sellmeier index; valid 0.23-5 um. */
int qmcmet_sellmeier_n(double lambda_um, double* out);

/* Same dispersion form with caller coefficients: n^2 = 1 +
 * b1 l^2/(l^2 - c1) + b2 l^2/(l^2 - c2), l in um, c terms in um^2. */
int qmcmet_sellmeier_n_custom(double lambda_um, double b1, double c1_um2,
                              double b2, double c2_um2, double valid_lo_um,
                              double valid_hi_um, double* out);

typedef struct qmcmet_surrogate qmcmet_surrogate;

/* Linearization of the shipped analytic stand-in around W 0.330 um,
 * r 0.045 um, t 0.129 um. Not an electromagnetic solve; its provenance
 * string says so. */
int qmcmet_surrogate_default(qmcmet_surrogate** out);

/* JSON calibration file: {reference, linear, quadratic?, validity,
 * provenance}. */
int qmcmet_surrogate_load(const char* path, qmcmet_surrogate** out);
int qmcmet_surrogate_save(const qmcmet_surrogate* m, const char* path);

enum {
    QMCMET_SURROGATE_LINEAR = 1,
    QMCMET_SURROGATE_QUADRATIC = 2
};

/* Least-squares response-surface fit about the sample centroid. Input
 * order never changes the coefficients. Requires n >= 2x the coefficient
 * count (4 linear, 10 quadratic) and a well-conditioned design. */
int qmcmet_surrogate_fit(const double* w_um, const double* r_um, const double* t_um,
                         const double* lambda_nm, size_t n, int order,
                         qmcmet_surrogate** out);

/* Fails with QMCMET_ERR_OUT_OF_VALIDITY_BOX outside the calibrated box. */
int qmcmet_surrogate_eval(const qmcmet_surrogate* m, double w_um, double r_um,
                          double t_um, double* lambda_nm);

/* Bisection for thickness on [t_lo_um, t_hi_um] to |interval| < 1e-7 um. */
int qmcmet_surrogate_invert(const qmcmet_surrogate* m, double w_um, double r_um,
                            double lambda_nm, double t_lo_um, double t_hi_um,
                            double* t_um);

/* reference = {w0_um, r0_um, t0_um, lambda0_nm}; linear = {c_w, c_r, c_t}
 * in nm/um; quadratic = {ww, rr, tt, wr, wt, rt} in nm/um^2, NaN-filled
 * when the model is linear; validity = {w_lo, w_hi, r_lo, r_hi, t_lo,
 * t_hi} in um. Any out may be NULL. */
int qmcmet_surrogate_info(const qmcmet_surrogate* m, double reference[4],
                          double linear[3], double quadratic[6],
                          double validity[6]);

/* Owned by the handle. */
const char* qmcmet_surrogate_provenance(const qmcmet_surrogate* m);

void qmcmet_surrogate_free(qmcmet_surrogate* m);

/* ------------------------------------------------------------------ */
/* Monte Carlo thickness inversion                                     */

typedef struct qmcmet_mc_result qmcmet_mc_result;

/* Draws (W, r, lambda) per index from independent counter-based streams,
 * inverts the surrogate for thickness on [bracket_lo_um, bracket_hi_um],
 * and aggregates with a fixed-order compensated sum: results are
 * bit-identical for any thread count. More than 20% failed inversions
 * fail with QMCMET_ERR_TOO_MANY_FAILURES. */
int qmcmet_invert_mc_gaussian(const qmcmet_surrogate* m, double w_mean_um,
                              double w_std_um, double r_mean_um, double r_std_um,
                              double lambda_mean_nm, double lambda_std_nm,
                              int n_mc, uint64_t seed, double bracket_lo_um,
                              double bracket_hi_um, qmcmet_mc_result** out);

/* Same, but wavelengths are resampled uniformly with replacement from an
 * empirical sample set. */
int qmcmet_invert_mc_empirical(const qmcmet_surrogate* m, double w_mean_um,
                               double w_std_um, double r_mean_um, double r_std_um,
                               const double* lambda_nm, size_t n_lambda,
                               int n_mc, uint64_t seed, double bracket_lo_um,
                               double bracket_hi_um, qmcmet_mc_result** out);

/* std is the n-1 sample deviation. Outs may be NULL. */
int qmcmet_mc_result_stats(const qmcmet_mc_result* r, double* mean_um,
                           double* std_um, int* n_failed, size_t* n_samples,
                           uint64_t* seed);

/* Copies the successful inversions, in draw order, into a caller buffer
 * of length n_samples. */
int qmcmet_mc_result_samples(const qmcmet_mc_result* r, double* samples_um);

void qmcmet_mc_result_free(qmcmet_mc_result* r);

/* ------------------------------------------------------------------ */
/* Spatial statistics                                                  */

/* z = b0 + b1 x + b2 y + b3 x^2 + b4 xy + b5 y^2, x/y in um, z in nm.
 * Requires at least 6 points spanning the quadratic basis. Input order
 * never changes the coefficients. */
int qmcmet_fit_quadratic_surface(const double* x_um, const double* y_um,
                                 const double* z_nm, size_t n, double beta[6]);

int qmcmet_quadratic_eval(const double beta[6], double x_um, double y_um,
                          double* z_nm);

/* ceil(0.3 n) clamped to [3, n]. */
int qmcmet_default_loess_k(size_t n, int* out);

/* Locally weighted planes over the k nearest neighbors with tricube
 * weights; k <= 0 selects the default. Collinear neighborhoods fall back
 * to the weighted mean and flag degenerate[i] = 1 (buffer may be NULL).
 * fitted_nm must hold n values. Input order never changes the fit. */
int qmcmet_loess(const double* x_um, const double* y_um, const double* z_nm,
                 size_t n, int k, double* fitted_nm, uint8_t* degenerate);

/* Sample std of z before and of z - fitted after; reduction_pct =
 * 100 (1 - after/before), 0 when before is 0. Outs may be NULL. */
int qmcmet_residual_summary(const double* z_nm, const double* fitted_nm, size_t n,
                            double* std_before_nm, double* std_after_nm,
                            double* reduction_pct);

enum {
    QMCMET_AXIS_X = 0,
    QMCMET_AXIS_Y = 1
};

/* Pairs binned by |axis separation| with the orthogonal separation below
 * bin_width/2; gamma(h) = sum (zi - zj)^2 / (2 pairs). Columns: lag_um,
 * gamma_nm2, pairs (int); non-empty bins only, lags increasing. nugget
 * (first reported bin) may be NULL. */
int qmcmet_semivariogram(const double* x_um, const double* y_um, const double* z_nm,
                         size_t n, int axis, double bin_width_um, double max_lag_um,
                         double* nugget_nm2, qmcmet_table** out);

/* ------------------------------------------------------------------ */
/* Integration yield                                                   */

/* total = e0 + b * eu; per_chiplet = e0/(b*nc) + eu/nc, decreasing in b
 * with floor eu/nc. Outs may be NULL. */
int qmcmet_integration_effort(double e0, double eu, int nc, int b,
                              double* total, double* per_chiplet);

/* n_good = n (1 - q^(r+1)) with q = 1 - p; residual_defect = q^(r+1).
 * r counts replacement attempts after the first. Outs may be NULL. */
int qmcmet_expected_functional(int n, double p, int r, double* n_good,
                               double* residual_defect);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* QMCMET_H */
