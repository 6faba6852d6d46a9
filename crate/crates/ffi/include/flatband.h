#ifndef FLATBAND_H
#define FLATBAND_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FbStatus {
  FbStatus_Ok = 0,
  /*
   Malformed argument: bad UTF-8, unknown name, wrong buffer length.
   */
  FbStatus_InvalidArgument = 1,
  /*
   Rejected parameters, model or configuration.
   */
  FbStatus_ConfigError = 2,
  /*
   Solver or propagator failure.
   */
  FbStatus_NumericFailure = 3,
  FbStatus_NullPointer = 4,
  FbStatus_Panic = 5,
} FbStatus;

typedef enum FbIntersectionKind {
  FbIntersectionKind_Separated = 0,
  FbIntersectionKind_IsolatedEp = 1,
  FbIntersectionKind_SingleEpRing = 2,
  FbIntersectionKind_DoubleEpRing = 3,
  FbIntersectionKind_ChiralDegeneratePair = 4,
} FbIntersectionKind;

/*
 Opaque finite-lattice handle.
 */
typedef struct FbLattice FbLattice;

/*
 Opaque model handle.
 */
typedef struct FbModel FbModel;

typedef struct FbFlatness {
  double candidate_re;
  double candidate_im;
  double max_deviation;
  /*
   `|γ − J sin φ|`.
   */
  double condition_residual;
  bool is_flat;
} FbFlatness;

typedef struct FbEvolution {
  size_t steps;
  double max_intensity_drift;
  double final_norm;
} FbEvolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 The message of the last failed call on this thread, empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *fb_last_error_message(void);

/*
 Builds a named model (`"lieb-extended"`, `"tasaki"`, ...). `phi` is a
 phase string such as `"pi/3"` or `"1.047"`.

 # Safety
 `kind` and `phi` must be NUL-terminated strings; `out_model` must be writable.
 */
enum FbStatus fb_model_new(const char *kind,
                           double kappa,
                           double j,
                           const char *phi,
                           double gamma,
                           struct FbModel **out_model);

/*
 As [`fb_model_new`] with `γ = J sin φ`.

 # Safety
 See [`fb_model_new`].
 */
enum FbStatus fb_model_new_flatband(const char *kind,
                                    double kappa,
                                    double j,
                                    const char *phi,
                                    struct FbModel **out_model);

/*
 # Safety
 `json` must be a NUL-terminated string; `out_model` must be writable.
 */
enum FbStatus fb_model_from_json(const char *json, struct FbModel **out_model);

/*
 Writes a newly allocated JSON string; release it with [`fb_string_free`].

 # Safety
 `model` must come from this library; `out_json` must be writable.
 */
enum FbStatus fb_model_to_json(const struct FbModel *model, char **out_json);

/*
 # Safety
 `s` must come from this library or be null.
 */
void fb_string_free(char *s);

/*
 # Safety
 `model` must come from this library or be null.
 */
void fb_model_free(struct FbModel *model);

/*
 The three band energies at `(kx, ky)`, ordered by real then imaginary part.

 # Safety
 `out_energies` must hold 6 doubles.
 */
enum FbStatus fb_bands(const struct FbModel *model, double kx, double ky, double *out_energies);

/*
 # Safety
 `model` must come from this library; `out_report` must be writable.
 */
enum FbStatus fb_flatness(const struct FbModel *model,
                          size_t nx,
                          size_t ny,
                          double tol_flat,
                          struct FbFlatness *out_report);

/*
 Classifies where the flat band meets the dispersive bands. The degeneracy
 loci are written to `out_loci` as `kx, ky` pairs, up to `loci_capacity`
 points; `out_loci_len` receives the full count. Pass a null `out_loci` to
 query the count alone.

 # Safety
 `out_loci`, when non-null, must hold `2 * loci_capacity` doubles.
 */
enum FbStatus fb_classify(const struct FbModel *model,
                          size_t nx,
                          size_t ny,
                          double tol_e,
                          double cond_ep,
                          double tol_flat,
                          enum FbIntersectionKind *out_kind,
                          double *out_loci,
                          size_t loci_capacity,
                          size_t *out_loci_len);

/*
 An `m × n` cell lattice, open or periodic.

 # Safety
 `model` must come from this library; `out_lattice` must be writable.
 */
enum FbStatus fb_lattice_new(const struct FbModel *model,
                             size_t m,
                             size_t n,
                             bool periodic,
                             struct FbLattice **out_lattice);

/*
 # Safety
 `lattice` must come from this library or be null.
 */
void fb_lattice_free(struct FbLattice *lattice);

/*
 Number of sites, `3 m n`; 0 for a null handle.

 # Safety
 `lattice` must come from this library or be null.
 */
size_t fb_lattice_dim(const struct FbLattice *lattice);

/*
 Single-cell compact localized state in cell `(cm, cn)`. Writes `len`
 amplitudes (`len` must equal the lattice dimension) and the eigen-residual.

 # Safety
 `out_state` must hold `2 * len` doubles; `out_residual` must be writable.
 */
enum FbStatus fb_cls_single(const struct FbModel *model,
                            const struct FbLattice *lattice,
                            size_t cm,
                            size_t cn,
                            double *out_state,
                            size_t len,
                            double *out_residual);

/*
 Three-cell state anchored at `(cm, cn)`, for chiral models.

 # Safety
 As [`fb_cls_single`].
 */
enum FbStatus fb_cls_three(const struct FbModel *model,
                           const struct FbLattice *lattice,
                           size_t cm,
                           size_t cn,
                           double *out_state,
                           size_t len,
                           double *out_residual);

/*
 Propagates `state` (length `len`) to `t_end` in steps of `dt`, in place.

 # Safety
 `state` must hold `2 * len` doubles; `out_report` must be writable.
 */
enum FbStatus fb_evolve(const struct FbLattice *lattice,
                        double *state,
                        size_t len,
                        double t_end,
                        double dt,
                        struct FbEvolution *out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLATBAND_H */
