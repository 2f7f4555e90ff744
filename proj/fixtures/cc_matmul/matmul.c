#include <stdio.h>
#include <time.h>

#define N 160
#define TI #P0
#define TJ #P1
#define TK #P2

static double a[N][N], b[N][N], c[N][N];

int main(void) {
  for (int i = 0; i < N; i++)
    for (int j = 0; j < N; j++) {
      a[i][j] = (double)(i + j) / N;
      b[i][j] = (double)(i - j) / N;
      c[i][j] = 0.0;
    }
  struct timespec start, stop;
  clock_gettime(CLOCK_MONOTONIC, &start);
  for (int ii = 0; ii < N; ii += TI)
    for (int kk = 0; kk < N; kk += TK)
      for (int jj = 0; jj < N; jj += TJ)
        for (int i = ii; i < ii + TI && i < N; i++)
          for (int k = kk; k < kk + TK && k < N; k++)
            for (int j = jj; j < jj + TJ && j < N; j++)
              c[i][j] += a[i][k] * b[k][j];
  clock_gettime(CLOCK_MONOTONIC, &stop);
  double sum = 0.0;
  for (int i = 0; i < N; i++)
    for (int j = 0; j < N; j++) sum += c[i][j];
  fprintf(stderr, "checksum %.6e\n", sum);
  printf("%0.6f\n", (stop.tv_sec - start.tv_sec) + 1e-9 * (stop.tv_nsec - start.tv_nsec));
  return 0;
}
