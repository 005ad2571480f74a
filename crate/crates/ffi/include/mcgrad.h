#ifndef MCGRAD_H
#define MCGRAD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MCG_OK 0

#define MCG_ERR_NULL_POINTER -1

#define MCG_ERR_INVALID_ARGUMENT -2

#define MCG_ERR_PARSE -3

#define MCG_ERR_SOLVER -4

#define MCG_ERR_IO -5

#define MCG_ERR_DEGENERATE -6

#define MCG_ERR_PANIC -255

/**
 * Nodal field on a square [−R, R]².
 */
typedef struct McgGrid McgGrid;

/**
 * Nonlinearity f(∇u).
 */
typedef struct McgModel McgModel;

/**
 * Sampled radial solution.
 */
typedef struct McgRadial McgRadial;

/**
 * Boundary value callback g(x, y, user_data).
 */
typedef double (*McgBoundaryFn)(double x, double y, void *user_data);

/**
 * Bound shape exponents θ and η.
 */
typedef struct McgShape {
  double theta;
  double eta;
} McgShape;

/**
 * Summary of the inequality at the discrete maximum of hFφ.
 */
typedef struct McgArgmaxReport {
  size_t i;
  size_t j;
  double x;
  double y;
  double p_max;
  double z;
  double stationarity;
  double terms[9];
  double lhs;
  double rhs;
  double margin;
  double required_constant;
  double h;
} McgArgmaxReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len` bytes) and returns the full message length
 * in bytes, excluding the terminator. Pass a null buffer to query the length.
 */
size_t mcg_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mcg_version(void);

/**
 * Parses a model spec such as `zero`, `power:2`, `imcf:0.5`, `logpow:θ,m1`,
 * `ratio` or `const:1`.
 */
int32_t mcg_model_new(const char *spec, struct McgModel **out);

void mcg_model_free(struct McgModel *model);

/**
 * f(p) for a gradient vector of length `dim`.
 */
int32_t mcg_model_eval(const struct McgModel *model, const double *p, size_t dim, double *out);

/**
 * ∇ₚf(p) written to `grad` (length `dim`).
 */
int32_t mcg_model_grad(const struct McgModel *model, const double *p, size_t dim, double *grad);

/**
 * Integrates outward from the axis with u(0) = `u0`.
 */
int32_t mcg_radial_from_origin(const struct McgModel *model,
                               size_t n,
                               double u0,
                               double r_max,
                               double tol,
                               struct McgRadial **out);

/**
 * Solves the annulus Dirichlet problem by shooting. Returns
 * `MCG_ERR_SOLVER` without a handle when shooting does not converge.
 */
int32_t mcg_radial_annulus(const struct McgModel *model,
                           size_t n,
                           double r_in,
                           double r_out,
                           double u_in,
                           double u_out,
                           double tol,
                           struct McgRadial **out);

void mcg_radial_free(struct McgRadial *sol);

/**
 * Number of stored nodes.
 */
int32_t mcg_radial_len(const struct McgRadial *sol, size_t *out);

/**
 * Copies r, u and u′ at the nodes into the given arrays of capacity `cap`.
 * Any output pointer may be null to skip it. Fails when `cap` is smaller
 * than the node count.
 */
int32_t mcg_radial_nodes(const struct McgRadial *sol, double *r, double *u, double *w, size_t cap);

/**
 * Interpolated (u, u′) at radius `r` inside the profile.
 */
int32_t mcg_radial_sample(const struct McgRadial *sol, double r, double *u, double *w);

/**
 * Blow-up radius. `has_blowup` receives 1 and `radius` the value when the
 * integration stopped at a singularity, otherwise 0.
 */
int32_t mcg_radial_blowup(const struct McgRadial *sol, int32_t *has_blowup, double *radius);

/**
 * Newton solve with boundary values from a callback.
 */
int32_t mcg_grid_solve(const struct McgModel *model,
                       double r_dom,
                       size_t nx,
                       McgBoundaryFn boundary,
                       void *user_data,
                       struct McgGrid **out);

/**
 * Newton solve with named boundary data (`const:c`, `affine:a,b,c`,
 * `cap:rho`, `catenoid:c,x0,y0`, `saddle:A`).
 */
int32_t mcg_grid_solve_data(const struct McgModel *model,
                            double r_dom,
                            size_t nx,
                            const char *data,
                            struct McgGrid **out);

/**
 * Reads a grid file.
 */
int32_t mcg_grid_read(const char *path, struct McgGrid **out);

/**
 * Writes the grid file format (atomically).
 */
int32_t mcg_grid_write(const struct McgGrid *grid, const char *path);

void mcg_grid_free(struct McgGrid *grid);

/**
 * Nodes per side, half-width and spacing.
 */
int32_t mcg_grid_shape(const struct McgGrid *grid, size_t *nx, double *r_dom, double *h);

/**
 * Copies the row-major nodal values (nx·nx entries) into `values`.
 */
int32_t mcg_grid_values(const struct McgGrid *grid, double *values, size_t cap);

/**
 * Value of the bound for case `A`, `B`, `C-sq`, `C-lin`, `D` or `E`.
 */
int32_t mcg_bound_value(const char *case_,
                        struct McgShape shape,
                        double r,
                        double l,
                        double c,
                        double *out);

/**
 * Smallest constant whose bound covers `observed` (|∇u| for cases A and
 * C-lin, |∇u|² otherwise). May be +∞.
 */
int32_t mcg_min_constant(const char *case_,
                         struct McgShape shape,
                         double observed,
                         double r,
                         double l,
                         double *out);

/**
 * G and H at z > 0 for profile `z` or `log1pz`.
 */
int32_t mcg_coefficients_gh(const char *profile, double z, double *g, double *h);

/**
 * Locates the argmax of hFφ on the grid and evaluates I₁…I₉ there.
 * `weight` is `one`, `power:b` or `power:b,plus1`.
 */
int32_t mcg_argmax_inequality(const struct McgGrid *grid,
                              const struct McgModel *model,
                              const char *profile,
                              const char *weight,
                              double alpha,
                              double c_suite,
                              struct McgArgmaxReport *out);

/**
 * Runs an experiment config file, writing reports under `out_dir`.
 * `exit_code` receives the command-line exit code (0 ok, 1 I/O, 2 config,
 * 3 solver failure, 4 violation); the return value is `MCG_OK` whenever
 * the run completed, including runs that found violations.
 */
int32_t mcg_run_config(const char *config_path,
                       const char *out_dir,
                       size_t jobs,
                       int32_t force,
                       int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MCGRAD_H */
