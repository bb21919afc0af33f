#ifndef OILCHAIN_H
#define OILCHAIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define OC_ADDRESS_LEN 20

#define OC_PUBLIC_KEY_LEN 32

#define OC_SIGNATURE_LEN 64

typedef enum OcStatus {
  OC_STATUS_OK = 0,
  OC_STATUS_NULL_ARGUMENT = 1,
  OC_STATUS_INVALID_UTF8 = 2,
  OC_STATUS_PARSE = 3,
  OC_STATUS_VALIDATION = 4,
  OC_STATUS_RUNTIME = 5,
  OC_STATUS_UNKNOWN_BATCH = 6,
  OC_STATUS_UNKNOWN_FUNCTION = 7,
  OC_STATUS_IO = 8,
  OC_STATUS_CORRUPT_LEDGER = 9,
  OC_STATUS_INVALID_ARGUMENT = 10,
  OC_STATUS_PANIC = 11,
} OcStatus;

typedef enum OcRole {
  OC_ROLE_DRILLER = 0,
  OC_ROLE_REFINERY = 1,
  OC_ROLE_STORAGE = 2,
  OC_ROLE_PUMP = 3,
  OC_ROLE_OTHER_FACTORY = 4,
  OC_ROLE_CONSUMER = 5,
} OcRole;

/**
 * Actor key pair.
 */
typedef struct OcActor OcActor;

/**
 * Result of a scenario run: report plus every chain.
 */
typedef struct OcRun OcRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the calling thread's last error message, or `NULL` if the last
 * call succeeded. Free with `oc_string_free`.
 */
char *oc_last_error(void);

void oc_string_free(char *s);

/**
 * Library version as a static string. Do not free.
 */
const char *oc_version(void);

/**
 * Runs a scenario given as TOML text. `seed` may be `NULL` to use the
 * scenario's own seed.
 */
enum OcStatus oc_run_scenario(const char *toml, const uint64_t *seed, struct OcRun **out);

/**
 * Runs a bundled scenario by name.
 */
enum OcStatus oc_run_bundled(const char *name, const uint64_t *seed, struct OcRun **out);

/**
 * Structured report of a run as JSON.
 */
enum OcStatus oc_run_report_json(const struct OcRun *run, char **out);

/**
 * Number of violations across every batch of the run.
 */
enum OcStatus oc_run_violation_count(const struct OcRun *run, uint64_t *out);

/**
 * Provenance of `batch` as JSON. `clean` may be `NULL`.
 */
enum OcStatus oc_run_trace_json(const struct OcRun *run,
                                const char *batch,
                                char **out,
                                bool *clean);

/**
 * Persists every chain of the run under `dir`, replacing its contents.
 */
enum OcStatus oc_run_save_store(const struct OcRun *run, const char *dir);

void oc_run_free(struct OcRun *run);

/**
 * Re-verifies one persisted chain directory. On `CorruptLedger`,
 * `first_bad_index` receives the offending block index.
 */
enum OcStatus oc_chain_verify(const char *dir, uint64_t *first_bad_index);

/**
 * Execution and transaction gas of a contract function.
 */
enum OcStatus oc_gas_cost(const char *function, uint64_t *execution, uint64_t *transaction);

/**
 * `gas * gwei * 1e-9 * eth_usd`.
 */
double oc_fiat_cost(uint64_t gas, double gwei, double eth_usd);

/**
 * Deterministic actor for an `OcRole` code and seed.
 */
enum OcStatus oc_actor_generate(uint32_t role, uint64_t seed, struct OcActor **out);

/**
 * Writes `OC_ADDRESS_LEN` bytes to `out`.
 */
enum OcStatus oc_actor_address(const struct OcActor *actor, uint8_t *out);

/**
 * Writes `OC_PUBLIC_KEY_LEN` bytes to `out`.
 */
enum OcStatus oc_actor_public_key(const struct OcActor *actor, uint8_t *out);

/**
 * Signs `len` bytes at `msg`; writes `OC_SIGNATURE_LEN` bytes to `out`.
 */
enum OcStatus oc_actor_sign(const struct OcActor *actor,
                            const uint8_t *msg,
                            size_t len,
                            uint8_t *out);

void oc_actor_free(struct OcActor *actor);

/**
 * Checks an Ed25519 signature (`OC_SIGNATURE_LEN` bytes) over `len` bytes at
 * `msg` against a public key (`OC_PUBLIC_KEY_LEN` bytes). `valid` receives
 * the verdict; an invalid signature is not an error.
 */
enum OcStatus oc_verify(const uint8_t *msg,
                        size_t len,
                        const uint8_t *signature,
                        const uint8_t *public_key,
                        bool *valid);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OILCHAIN_H */
