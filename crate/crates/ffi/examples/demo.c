/* Minimal C consumer of the vrfatigue FFI.
 *
 * Build the library, then compile and run against it:
 *
 *   cargo build -p vrfatigue-ffi
 *   cc -std=c99 -Wall -Werror crates/ffi/examples/demo.c \
 *      -Icrates/ffi/include -Ltarget/debug -lvrfatigue_ffi -lm \
 *      -o /tmp/vrf_demo
 *   LD_LIBRARY_PATH=target/debug /tmp/vrf_demo
 */
#include <stdio.h>
#include <stdlib.h>

#include "vrfatigue.h"

static int fail(const char *what) {
    fprintf(stderr, "%s: %s\n", what, vrf_last_error());
    return 1;
}

int main(void) {
    printf("vrfatigue %s\n", vrf_version());

    /* Build an EKYT classifier for 5 s windows at 250 Hz (1250 samples). */
    VrfModel *model = NULL;
    if (vrf_model_build(VRF_MODEL_KIND_EKYT, 1250, 42, &model) != VRF_STATUS_OK)
        return fail("build");
    printf("EKYT parameters: %zu, input length: %zu\n",
           vrf_model_param_count(model), vrf_model_input_len(model));

    /* One zeroed window: batch 1 × 4 channels × 1250 samples. */
    double *window = calloc(4 * 1250, sizeof(double));
    double probs[2] = {0};
    if (vrf_model_predict(model, window, 1, 4, 1250, probs) != VRF_STATUS_OK) {
        free(window);
        vrf_model_free(model);
        return fail("predict");
    }
    printf("fatigue probability on a zero window: %.6f\n", probs[1]);
    free(window);
    vrf_model_free(model);

    /* Welch two-sample t-test. */
    const double a[] = {6.1, 7.0, 6.4, 6.8, 5.9};
    const double b[] = {7.2, 7.5, 6.9, 7.8, 7.1};
    double t, p, df;
    if (vrf_two_sample_t(a, 5, b, 5, 0, &t, &p, &df) != VRF_STATUS_OK)
        return fail("t-test");
    printf("welch: t = %.4f  p = %.4f  df = %.2f\n", t, p, df);

    /* Gaze vector → horizontal/vertical angles (degrees). */
    double h, v;
    if (vrf_vector_to_angles(0.1, -0.05, 0.99, &h, &v) != VRF_STATUS_OK)
        return fail("angles");
    printf("gaze (0.1, -0.05, 0.99) → H %.4f°, V %.4f°\n", h, v);

    /* Errors are retrievable: a zero vector has no direction. */
    if (vrf_vector_to_angles(0.0, 0.0, 0.0, &h, &v) == VRF_STATUS_OK) {
        fprintf(stderr, "zero vector unexpectedly accepted\n");
        return 1;
    }
    printf("zero-vector error (expected): %s\n", vrf_last_error());
    return 0;
}
