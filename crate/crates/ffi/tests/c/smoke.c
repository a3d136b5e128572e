#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "relaxlab.h"

#define CHECK(call)                                                        \
  do {                                                                     \
    RelaxlabStatus s_ = (call);                                            \
    if (s_ != RELAXLAB_STATUS_OK) {                                        \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, relaxlab_last_error()); \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  const char *json =
      "{\"name\": \"splitting-order\", \"grid\": {\"n_coarse\": 8, \"refine\": 2},"
      " \"scheme\": {\"dt\": 0.125, \"horizon\": 0.25, \"mu\": 40}}";
  RelaxlabConfig *cfg = NULL;
  RelaxlabSimulation *sim = NULL;
  CHECK(relaxlab_config_parse(json, NULL, &cfg));
  CHECK(relaxlab_simulation_new(cfg, &sim));
  relaxlab_config_free(cfg);

  size_t n = relaxlab_simulation_len(sim);
  double *u = malloc(n * sizeof(double));
  double *v = malloc(n * sizeof(double));
  CHECK(relaxlab_simulation_get_fields(sim, u, v, n));
  double m0 = 0.0, m1 = 0.0;
  for (size_t i = 0; i < n; i++) m0 += u[i] + v[i];
  CHECK(relaxlab_simulation_run(sim));
  CHECK(relaxlab_simulation_get_fields(sim, u, v, n));
  for (size_t i = 0; i < n; i++) m1 += u[i] + v[i];

  double conv = 1.0, ev = 1.0;
  CHECK(relaxlab_simulation_residuals(sim, &conv, &ev));
  relaxlab_simulation_free(sim);
  free(u);
  free(v);

  if (relaxlab_simulation_run(NULL) != RELAXLAB_STATUS_NULL_POINTER) return 2;
  printf("cells %zu mass %.17g %.17g residuals %.3g %.3g\n", n, m0, m1, conv, ev);
  return fabs(m1 - m0) < 1e-12 && conv <= 1e-12 && ev <= 1e-10 ? 0 : 3;
}
