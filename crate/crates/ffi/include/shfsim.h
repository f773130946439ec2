/* Copyright 2026 The shfsim Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Generated by cbindgen. Do not edit. */

#ifndef SHFSIM_H
#define SHFSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ShfStatus {
  SHF_STATUS_OK = 0,
  SHF_STATUS_NULL_POINTER = 1,
  SHF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Bad scenario text or physical parameters.
   */
  SHF_STATUS_CONFIG = 3,
  /**
   * Simulation failed or a fidelity floor was missed.
   */
  SHF_STATUS_RUNTIME = 4,
  SHF_STATUS_BUFFER_TOO_SMALL = 5,
  SHF_STATUS_PANIC = 6,
} ShfStatus;

/**
 * Opaque spin system.
 */
typedef struct ShfSystem ShfSystem;

typedef struct ShfFeasibilityInputs {
  /**
   * rad/s
   */
  double a_s;
  /**
   * rad/s
   */
  double electron_zeeman;
  /**
   * rad/s
   */
  double nuclear_zeeman;
  /**
   * Hz
   */
  double esr_linewidth_hz;
  /**
   * s
   */
  double t1_nuclear;
  /**
   * s
   */
  double t1_electron;
} ShfFeasibilityInputs;

typedef struct ShfFeasibilityReport {
  bool regime_ok;
  double electron_ratio;
  double nuclear_ratio;
  double op_time;
  double dephasing_time;
  double coherence_time;
  double ops_within_coherence;
  bool preskill_ok;
} ShfFeasibilityReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next library call on the same thread.
 */
const char *shf_last_error(void);

/**
 * Library version as a static string.
 */
const char *shf_version(void);

/**
 * One electron and one nuclear site. Energies in rad/s.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum ShfStatus shf_system_new_single(double electron_zeeman, double a_s, struct ShfSystem **out);

/**
 * One electron and two nuclear sites, both couplings on.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum ShfStatus shf_system_new_double(double electron_zeeman,
                                     double a1,
                                     double a2,
                                     struct ShfSystem **out);

/**
 * Build a system from the `[system]` table of a scenario.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum ShfStatus shf_system_from_toml(const char *toml, struct ShfSystem **out);

/**
 * # Safety
 * `sys` must come from a `shf_system_new_*` call and not be used afterwards.
 * Null is ignored.
 */
void shf_system_free(struct ShfSystem *sys);

/**
 * Number of nuclear sites, or 0 for a null handle.
 *
 * # Safety
 * `sys` must be null or a live handle.
 */
size_t shf_system_sites(const struct ShfSystem *sys);

/**
 * Switch the laser-controlled coupling of one site.
 *
 * # Safety
 * `sys` must be a live handle.
 */
enum ShfStatus shf_system_set_coupling(struct ShfSystem *sys, size_t site, bool on);

/**
 * Exact levels, highest first.
 *
 * `energies` receives rad/s; `labels`, if not null, receives the index of
 * the Zeeman product state each level is tagged with (electron in the most
 * significant bit, down = 1). `len` must be at least 2^(sites+1).
 *
 * # Safety
 * `energies` and `labels` must point to `len` writable elements.
 */
enum ShfStatus shf_system_levels(const struct ShfSystem *sys,
                                 double *energies,
                                 uint32_t *labels,
                                 size_t len);

/**
 * First Bell sequence on a two-site system.
 *
 * `rabi_amplitude` > 0 selects finite-amplitude pulses (rad/s); 0 selects
 * ideal rotations. `entanglement_bits` may be null.
 *
 * # Safety
 * `sys` must be a live handle; output pointers must be writable.
 */
enum ShfStatus shf_bell_a(const struct ShfSystem *sys,
                          double rabi_amplitude,
                          double *fidelity,
                          double *entanglement_bits);

/**
 * Second Bell sequence on a two-site system. See [`shf_bell_a`].
 *
 * # Safety
 * `sys` must be a live handle; output pointers must be writable.
 */
enum ShfStatus shf_bell_b(const struct ShfSystem *sys,
                          double rabi_amplitude,
                          double *fidelity,
                          double *entanglement_bits);

/**
 * Fidelity of the composite C-NOT on a one-site system.
 *
 * `gap_fraction` > 0 runs finite-amplitude pulses with the Rabi amplitude
 * set to that fraction of the smallest spectator gap; 0 uses ideal rotations.
 *
 * # Safety
 * `sys` must be a live handle; `fidelity` must be writable.
 */
enum ShfStatus shf_cnot_fidelity(const struct ShfSystem *sys,
                                 double gap_fraction,
                                 double *fidelity);

/**
 * Regime and operation-budget check.
 *
 * # Safety
 * `inputs` must be readable and `out` writable.
 */
enum ShfStatus shf_feasibility(const struct ShfFeasibilityInputs *inputs,
                               struct ShfFeasibilityReport *out);

/**
 * Run a scenario and return the JSON bundle the CLI would print.
 *
 * `command` is `"levels"`, `"run"` or `"check"`. On success `*out_json`
 * owns a string to release with [`shf_string_free`]. A missed fidelity
 * floor still fills `*out_json` and returns `SHF_STATUS_RUNTIME`.
 *
 * # Safety
 * `toml` and `command` must be NUL-terminated; `out_json` must be writable.
 */
enum ShfStatus shf_run_scenario(const char *toml, const char *command, char **out_json);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void shf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHFSIM_H */
