#include "floquet.h"

int main(void) {
    const double mean[4] = {0.0, 0.0, 0.0, 1.0};
    const double cos1[4] = {0.0, 0.3, 0.3, 0.0};
    FloquetPotential *p = NULL;
    if (floquet_potential_new(2, mean, 1, cos1, NULL, &p) != FLOQUET_STATUS_NULL_POINTER) {
        return 1;
    }
    const double sin1[4] = {0.0, 0.0, 0.0, 0.0};
    if (floquet_potential_new(2, mean, 1, cos1, sin1, &p) != FLOQUET_STATUS_OK) {
        return 2;
    }
    double re[2], im[2];
    FloquetStatus s = floquet_lyapunov_values(p, 3.0, 0.0, re, im, 2);
    floquet_potential_free(p);
    return s == FLOQUET_STATUS_OK ? 0 : 3;
}
