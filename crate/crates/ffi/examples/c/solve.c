#include <complex.h>
#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "blab.h"

int main(void) {
    const size_t n = 128;
    const double half_width = 2.0;
    double *mu = calloc(2 * n * n, sizeof(double));
    if (!mu) return 1;
    double h = 2.0 * half_width / (double)n;
    for (size_t r = 0; r < n; r++) {
        for (size_t c = 0; c < n; c++) {
            double x = -half_width + (c + 0.5) * h;
            double y = -half_width + (r + 0.5) * h;
            double rho = hypot(x, y);
            if (rho < 0.5 && rho > 0.0) {
                double complex z = x + y * I;
                double complex v = (1.0 / 3.0) * z / conj(z);
                mu[2 * (r * n + c)] = creal(v);
                mu[2 * (r * n + c) + 1] = cimag(v);
            }
        }
    }

    BlabField *field = NULL;
    BlabField *map = NULL;
    BlabSolveSummary summary;
    if (blab_field_new(n, half_width, 0.0, 0.0, mu, &field) != BLAB_STATUS_OK) {
        fprintf(stderr, "%s\n", blab_last_error());
        return 1;
    }
    BlabStatus st = blab_solve_principal(field, 1e-10, 1000, &map, &summary);
    if (st != BLAB_STATUS_OK) {
        fprintf(stderr, "solve failed (%d): %s\n", (int)st, blab_last_error());
        blab_field_free(field);
        return 1;
    }
    printf("blab %s: %zu iterations, residual %.3e, koebe %s\n", blab_version(), summary.iterations,
           summary.final_residual, summary.koebe_verdict ? "pass" : "fail");

    blab_field_free(map);
    blab_field_free(field);
    free(mu);
    return 0;
}
