/* Drives the C interface end to end: mask -> tree -> perturb -> features ->
 * hint -> statistics, plus the error path. Exits nonzero on any mismatch. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "bte.h"

#define CHECK(call)                                                           \
    do {                                                                      \
        BteStatus s_ = (call);                                                \
        if (s_ != BTE_STATUS_OK) {                                            \
            fprintf(stderr, "%s failed: %d (%s)\n", #call, (int)s_,           \
                    bte_last_error() ? bte_last_error() : "?");               \
            return 1;                                                         \
        }                                                                     \
    } while (0)

int main(void) {
    enum { W = 96, H = 64 };
    static uint8_t bits[W * H];
    for (int r = 30; r <= 33; ++r)
        for (int c = 8; c < 88; ++c) bits[r * W + c] = 1;

    BteMask *mask = NULL;
    CHECK(bte_mask_from_bits(bits, W, H, &mask));
    size_t w = 0, h = 0;
    CHECK(bte_mask_dims(mask, &w, &h));
    if (w != W || h != H) return 2;

    BteTree *tree = NULL;
    CHECK(bte_encode(mask, "bar", &tree));
    size_t n = bte_tree_segment_count(tree);
    if (n < 1) return 3;
    BteSegment seg;
    CHECK(bte_tree_segment(tree, 0, &seg));
    if (seg.parent != -1 || seg.radius <= 0.0) return 4;

    BteTree *bent = NULL;
    CHECK(bte_perturb(tree, mask, "tortuosity_4x", 0.15, 7, &bent));
    BteSegment moved;
    CHECK(bte_tree_segment(bent, 0, &moved));
    if (moved.control[0] != seg.control[0] || moved.control[7] != seg.control[7]) return 5;

    double f0[20], f1[20];
    CHECK(bte_features(tree, mask, f0));
    CHECK(bte_features(bent, mask, f1));
    if (strcmp(bte_feature_name(0), "total_arc_length") != 0) return 6;
    if (bte_feature_name(20) != NULL) return 6;
    if (!(f1[6] > f0[6])) return 6; /* mean_tortuosity rises */

    BteHint *base = NULL, *tort = NULL;
    CHECK(bte_hint_render(tree, mask, &base));
    CHECK(bte_hint_render_config(tree, mask, "tortuosity_4x", 0.15, 7, &tort));
    double *a = malloc(sizeof(double) * W * H), *b = malloc(sizeof(double) * W * H);
    CHECK(bte_hint_channel(base, 0, a, W * H));
    CHECK(bte_hint_channel(tort, 0, b, W * H));
    if (memcmp(a, b, sizeof(double) * W * H) != 0) return 7;
    if (bte_hint_channel(base, 0, a, 10) != BTE_STATUS_BUFFER_TOO_SMALL) return 8;

    double pc[3] = {0.5, 0.6, 0.7}, pb[3] = {0.25, 0.25, 0.5};
    BtePairedEffect eff;
    CHECK(bte_paired_effect(pc, pb, 3, &eff));
    if (eff.n != 3 || fabs(eff.delta_mean - 0.8 / 3.0) > 1e-12) return 9;
    double q = 0.0;
    CHECK(bte_t_quantile(0.975, 29.0, &q));
    if (fabs(q - 2.045) > 5e-4) return 10;

    if (bte_encode(NULL, NULL, &tree) != BTE_STATUS_NULL_ARGUMENT) return 11;
    if (bte_last_error() == NULL || strstr(bte_last_error(), "mask") == NULL) return 12;
    if (bte_perturb(tree, mask, "swirl", 0.15, 7, &bent) != BTE_STATUS_INVALID_ARGUMENT) return 13;

    printf("ok %s segments=%zu arc=%.3f tort=%.4f->%.4f t=%.4f\n", bte_version(), n, f0[0], f0[6], f1[6], q);
    free(a);
    free(b);
    bte_hint_free(base);
    bte_hint_free(tort);
    bte_tree_free(bent);
    bte_tree_free(tree);
    bte_mask_free(mask);
    bte_mask_free(NULL);
    return 0;
}
