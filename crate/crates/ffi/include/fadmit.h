#ifndef FADMIT_H
#define FADMIT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FadmitStatus {
  FADMIT_STATUS_OK = 0,
  FADMIT_STATUS_NULL_POINTER = 1,
  FADMIT_STATUS_INVALID_ARGUMENT = 2,
  FADMIT_STATUS_NON_FINITE = 3,
  FADMIT_STATUS_CONFIG = 4,
  FADMIT_STATUS_IO = 5,
  FADMIT_STATUS_CHECK_FAILED = 6,
  FADMIT_STATUS_PANIC = 7,
  FADMIT_STATUS_INTERNAL = 8,
} FadmitStatus;

/**
 * Opaque controller handle.
 */
typedef struct FadmitController FadmitController;

/**
 * Opaque finished-episode handle.
 */
typedef struct FadmitEpisode FadmitEpisode;

typedef struct FadmitAdmittanceConfig {
  double mass;
  double stiffness;
  double damping_ratio;
  double rot_mass;
  double rot_stiffness;
  double tangent_scale;
  bool enable_normal_regulation;
  bool enable_tangent_stiffening;
  double target_force;
  double force_deadband;
  double torque_deadband;
} FadmitAdmittanceConfig;

/**
 * Reference command for one tick. `normal` is used only when `contact` is
 * set and is normalized internally.
 */
typedef struct FadmitCommand {
  double x_cmd[3];
  /**
   * Quaternion (w, x, y, z).
   */
  double q_cmd[4];
  double normal[3];
  bool contact;
} FadmitCommand;

typedef struct FadmitTickOutput {
  double sensed_force[3];
  double sensed_torque[3];
  double f_cmd[3];
  /**
   * Eigenvalues of the effective stiffness, ascending.
   */
  double k_eig[3];
} FadmitTickOutput;

typedef struct FadmitState {
  double x_r[3];
  double v_r[3];
  /**
   * Quaternion (w, x, y, z).
   */
  double q_r[4];
  double w_r[3];
} FadmitState;

typedef struct FadmitMetrics {
  bool success;
  bool safety_stop;
  /**
   * Opening angle (deg), insertion depth (mm) or remaining ink (cm) by task.
   */
  double primary_metric;
  double peak_force;
  uint64_t ticks;
} FadmitMetrics;

typedef struct FadmitVerifySummary {
  uint64_t reports;
  uint64_t passed;
  uint64_t failed;
} FadmitVerifySummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next fadmit call on the same thread.
 */
const char *fadmit_last_error(void);

/**
 * Fills `out` with the library defaults.
 *
 * # Safety
 * `out` must be null or point to writable memory for one config.
 */
enum FadmitStatus fadmit_admittance_config_default(struct FadmitAdmittanceConfig *out);

/**
 * Creates a controller at rest at `x0` with identity orientation.
 *
 * # Safety
 * `cfg` must point to a config, `x0` to three doubles, `out` to a handle slot.
 */
enum FadmitStatus fadmit_controller_create(const struct FadmitAdmittanceConfig *cfg,
                                           const double *x0,
                                           struct FadmitController **out);

/**
 * Releases a controller. Null is ignored.
 *
 * # Safety
 * `ctl` must come from `fadmit_controller_create` and not be used afterwards.
 */
void fadmit_controller_free(struct FadmitController *ctl);

/**
 * Advances the controller by `dt` seconds given a raw force/torque reading.
 * `out` may be null.
 *
 * # Safety
 * `force` and `torque` must point to three doubles each; other pointers to
 * their types or (for `out`) null.
 */
enum FadmitStatus fadmit_controller_step(struct FadmitController *ctl,
                                         const struct FadmitCommand *cmd,
                                         const double *force,
                                         const double *torque,
                                         double dt,
                                         struct FadmitTickOutput *out);

/**
 * # Safety
 * `ctl` must be a live handle and `out` writable.
 */
enum FadmitStatus fadmit_controller_state(const struct FadmitController *ctl,
                                          struct FadmitState *out);

/**
 * Runs one episode described by scenario TOML text.
 *
 * # Safety
 * `config_toml` must be a nul-terminated string and `out` a handle slot.
 */
enum FadmitStatus fadmit_episode_run(const char *config_toml, struct FadmitEpisode **out);

/**
 * # Safety
 * `ep` must come from `fadmit_episode_run` and not be used afterwards.
 */
void fadmit_episode_free(struct FadmitEpisode *ep);

/**
 * # Safety
 * `ep` must be a live handle and `out` writable.
 */
enum FadmitStatus fadmit_episode_metrics(const struct FadmitEpisode *ep, struct FadmitMetrics *out);

/**
 * Writes the per-tick trace CSV of an episode.
 *
 * # Safety
 * `ep` must be a live handle and `path` a nul-terminated string.
 */
enum FadmitStatus fadmit_episode_write_trace(const struct FadmitEpisode *ep, const char *path);

/**
 * Checks contact convergence for one parameter set, starting at the surface
 * at rest and running for 20 time constants. `passed` receives the verdict.
 *
 * # Safety
 * `passed` must be writable.
 */
enum FadmitStatus fadmit_verify_contact(double m, double d, double k_e, double f_h, bool *passed);

/**
 * Runs the default verification grid. Returns `CheckFailed` when any
 * report fails; `out` is filled either way.
 *
 * # Safety
 * `out` must be writable.
 */
enum FadmitStatus fadmit_verify_default(struct FadmitVerifySummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FADMIT_H */
