#include <stdio.h>
#include <string.h>

#include "oilchain.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            fprintf(stderr, "check failed line %d: %s\n", __LINE__, #cond); \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    OcRun *run = NULL;
    CHECK(oc_run_bundled("pressure_fault_hop2", NULL, &run) == OC_STATUS_OK);
    uint64_t violations = 0;
    CHECK(oc_run_violation_count(run, &violations) == OC_STATUS_OK);
    CHECK(violations == 3);

    char *trace = NULL;
    bool clean = true;
    CHECK(oc_run_trace_json(run, "101", &trace, &clean) == OC_STATUS_OK);
    CHECK(!clean);
    CHECK(strstr(trace, "Lower Pressure") != NULL);
    oc_string_free(trace);

    CHECK(oc_run_trace_json(run, "nope", &trace, NULL) == OC_STATUS_UNKNOWN_BATCH);
    char *err = oc_last_error();
    CHECK(err != NULL && strstr(err, "nope") != NULL);
    oc_string_free(err);
    oc_run_free(run);

    uint64_t exec = 0, tx = 0;
    CHECK(oc_gas_cost("readyToFactory", &exec, &tx) == OC_STATUS_OK);
    CHECK(exec == 108601 && tx == 131857);
    double usd = oc_fiat_cost(exec, 147.0, 2291.0);
    CHECK(usd > 36.56 && usd < 36.58);

    OcActor *actor = NULL;
    CHECK(oc_actor_generate(OC_ROLE_DRILLER, 42, &actor) == OC_STATUS_OK);
    uint8_t pk[OC_PUBLIC_KEY_LEN], sig[OC_SIGNATURE_LEN];
    const char *msg = "accept";
    CHECK(oc_actor_public_key(actor, pk) == OC_STATUS_OK);
    CHECK(oc_actor_sign(actor, (const uint8_t *)msg, strlen(msg), sig) == OC_STATUS_OK);
    bool valid = false;
    CHECK(oc_verify((const uint8_t *)msg, strlen(msg), sig, pk, &valid) == OC_STATUS_OK && valid);
    sig[0] ^= 1;
    CHECK(oc_verify((const uint8_t *)msg, strlen(msg), sig, pk, &valid) == OC_STATUS_OK && !valid);
    oc_actor_free(actor);

    printf("ok %s\n", oc_version());
    return 0;
}
