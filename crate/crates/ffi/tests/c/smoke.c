#include <math.h>
#include <stdio.h>
#include <string.h>

#include "blab.h"

int main(void) {
    const char *toml =
        "m = 5\ndims = [5]\n[conventions]\nlock_a = \"verified\"\nfourth_moment = \"isotropic\"\n";
    BlabConfig *cfg = NULL;
    if (blab_config_parse(toml, &cfg) != BLAB_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", blab_last_error_message());
        return 1;
    }
    BlabOutcome *out = NULL;
    if (blab_run(cfg, BLAB_COMMAND_VERIFY_IDENTITIES, 0, &out) != BLAB_STATUS_OK) {
        fprintf(stderr, "run: %s\n", blab_last_error_message());
        return 1;
    }
    bool passed = false;
    blab_outcome_passed(out, &passed);
    char *json = NULL;
    blab_outcome_summary_json(out, &json);
    int has_schema = json != NULL && strstr(json, "blab.summary/1") != NULL;
    blab_string_free(json);
    blab_outcome_free(out);
    blab_config_free(cfg);

    BlabConfig *bad = NULL;
    int rejected = blab_config_parse("m = [", &bad) == BLAB_STATUS_CONFIG && bad == NULL;

    double v = 0.0;
    double z[5] = {0};
    blab_bubble_eval(5, z, 5, &v);
    int bubble_ok = fabs(v - pow(15.0, 0.75)) < 1e-12;

    if (passed && has_schema && rejected && bubble_ok) {
        printf("ok\n");
        return 0;
    }
    fprintf(stderr, "passed=%d schema=%d rejected=%d bubble=%d\n", passed, has_schema, rejected, bubble_ok);
    return 1;
}
