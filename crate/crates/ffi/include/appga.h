#ifndef APPGA_H
#define APPGA_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AppgaStatus {
  APPGA_STATUS_OK = 0,
  APPGA_STATUS_NULL_POINTER = 1,
  APPGA_STATUS_SHAPE = 2,
  APPGA_STATUS_DOMAIN = 3,
  APPGA_STATUS_PARAMETER = 4,
  APPGA_STATUS_SCHEDULE = 5,
  APPGA_STATUS_SPEC = 6,
  APPGA_STATUS_POWER_ITERATION = 7,
  APPGA_STATUS_NON_FINITE = 8,
  APPGA_STATUS_CONFIG = 9,
  APPGA_STATUS_FORMAT = 10,
  APPGA_STATUS_IO = 11,
  APPGA_STATUS_PANIC = 12,
} AppgaStatus;

typedef enum AppgaAlgorithm {
  APPGA_ALGORITHM_PPGA = 0,
  APPGA_ALGORITHM_APPGA = 1,
  APPGA_ALGORITHM_FPPA = 2,
  APPGA_ALGORITHM_AFPPA = 3,
} AppgaAlgorithm;

/**
 * Simulated uniform-phantom acquisition.
 */
typedef struct AppgaAcquisition AppgaAcquisition;

/**
 * Objective built from an acquisition.
 */
typedef struct AppgaProblem AppgaProblem;

/**
 * Solver settings. `safety <= 0` disables the step cap; `omega`, `a` and
 * `b` are read only by the accelerated variants.
 */
typedef struct AppgaSolverParams {
  enum AppgaAlgorithm algorithm;
  size_t iterations;
  double beta;
  size_t freeze_after;
  double safety;
  double omega;
  double a;
  double b;
} AppgaSolverParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *appga_last_error(void);

/**
 * Simulates the uniform hot-sphere phantom on an `n × n` grid with the
 * desk geometry, 25% scatter and randoms, and `total_counts` expected
 * counts (`<= 0` selects the size-scaled default).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum AppgaStatus appga_acquisition_simulate(size_t n,
                                            double total_counts,
                                            uint64_t seed,
                                            struct AppgaAcquisition **out);

/**
 * # Safety
 * `h` must be NULL or a handle from [`appga_acquisition_simulate`] not yet freed.
 */
void appga_acquisition_free(struct AppgaAcquisition *h);

/**
 * Grid side `n`; images hold `n²` values. Returns 0 for NULL.
 *
 * # Safety
 * `h` must be NULL or a live acquisition handle.
 */
size_t appga_acquisition_side(const struct AppgaAcquisition *h);

/**
 * Number of sinogram bins. Returns 0 for NULL.
 *
 * # Safety
 * `h` must be NULL or a live acquisition handle.
 */
size_t appga_acquisition_bins(const struct AppgaAcquisition *h);

/**
 * Copies the noisy counts into `buf` (`len` must equal the bin count).
 *
 * # Safety
 * `h` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum AppgaStatus appga_acquisition_counts(const struct AppgaAcquisition *h,
                                          double *buf,
                                          size_t len);

/**
 * Copies the scaled ground-truth image into `buf` (`len` = `n²`).
 *
 * # Safety
 * `h` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum AppgaStatus appga_acquisition_truth(const struct AppgaAcquisition *h, double *buf, size_t len);

/**
 * Copies the uniform initial image into `buf` (`len` = `n²`).
 *
 * # Safety
 * `h` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum AppgaStatus appga_acquisition_initial(const struct AppgaAcquisition *h,
                                           double *buf,
                                           size_t len);

/**
 * Builds the smoothed objective. The acquisition may be freed afterwards.
 *
 * # Safety
 * `acq` must be a live handle; `out` must be writable.
 */
enum AppgaStatus appga_problem_new(const struct AppgaAcquisition *acq,
                                   double epsilon,
                                   double lambda1,
                                   double lambda2,
                                   struct AppgaProblem **out);

/**
 * # Safety
 * `h` must be NULL or a handle from [`appga_problem_new`] not yet freed.
 */
void appga_problem_free(struct AppgaProblem *h);

/**
 * Smoothed objective `φ(f)`; `len` must be `n²`.
 *
 * # Safety
 * `h` must be live, `f` readable for `len` doubles and `value` writable.
 */
enum AppgaStatus appga_problem_value(const struct AppgaProblem *h,
                                     const double *f,
                                     size_t len,
                                     double *value);

/**
 * `∇φ(f)` written into `grad` (both of length `n²`).
 *
 * # Safety
 * `h` must be live; `f` and `grad` must each hold `len` doubles.
 */
enum AppgaStatus appga_problem_gradient(const struct AppgaProblem *h,
                                        const double *f,
                                        double *grad,
                                        size_t len);

/**
 * Runs a solver from `init` and writes the last iterate to `result`.
 * `final_phi` (nullable) receives the last objective value: the smoothed
 * one for PPGA/APPGA, the nonsmooth one for FPPA/AFPPA.
 *
 * # Safety
 * `h` and `params` must be valid; `init` and `result` must each hold `len`
 * doubles and may alias.
 */
enum AppgaStatus appga_reconstruct(const struct AppgaProblem *h,
                                   const struct AppgaSolverParams *params,
                                   const double *init,
                                   double *result,
                                   size_t len,
                                   double *final_phi);

/**
 * Checks the momentum condition for `t_k = a k^ω + b` up to `kmax` and
 * stores the verdict in `holds`.
 *
 * # Safety
 * `holds` must be writable.
 */
enum AppgaStatus appga_check_schedule(double omega, double a, double b, uint64_t kmax, bool *holds);

/**
 * Runs the experiment described by the TOML file at `config_path`.
 * `out_dir` may be NULL to use the directory named in the config.
 *
 * # Safety
 * `config_path` must be a NUL-terminated UTF-8 string; `out_dir` likewise
 * or NULL.
 */
enum AppgaStatus appga_experiment_run(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* APPGA_H */
