#include <stdio.h>
#include <stdlib.h>
#include <time.h>

#ifndef N_SIZE
#define N_SIZE 240
#endif
#ifndef M_SIZE
#define M_SIZE 200
#endif

static double A[N_SIZE][M_SIZE];
static double B[N_SIZE][M_SIZE];
static double C[N_SIZE][N_SIZE];

static void init_array(int n, int m, double *alpha, double *beta) {
  *alpha = 1.5;
  *beta = 1.2;
  for (int i = 0; i < n; i++)
    for (int j = 0; j < m; j++) {
      A[i][j] = (double)((i * j + 1) % n) / n;
      B[i][j] = (double)((i * j + 2) % m) / m;
    }
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++)
      C[i][j] = (double)((i * j + 3) % n) / m;
}

static void kernel_syr2k(int n, int m, double alpha, double beta) {
  int i, j, k;
  for (i = 0; i < n; i++)
    for (k = 0; k <= i; k++)
      C[i][k] *= beta;

#P0
#P1
#P2
#pragma clang loop(i,j,k) tile sizes(#P3,#P4,#P5) floor_ids(i1,j1,k1) tile_ids(i2,j2,k2)
#pragma clang loop id(i)
  for (i = 0; i < n; i++) {
    #pragma clang loop id(j)
    for (j = 0; j < m; j++) {
     #pragma clang loop id(k)
        for (k = 0; k <= i; k++)
        {
          C[i][k] += A[k][j]*alpha*B[i][j] + B[k][j]*alpha*A[i][j];
        }
    }
  }
}

int main(void) {
  double alpha, beta;
  struct timespec start, stop;
  init_array(N_SIZE, M_SIZE, &alpha, &beta);
  clock_gettime(CLOCK_MONOTONIC, &start);
  kernel_syr2k(N_SIZE, M_SIZE, alpha, beta);
  clock_gettime(CLOCK_MONOTONIC, &stop);
  double sum = 0.0;
  for (int i = 0; i < N_SIZE; i++)
    for (int k = 0; k <= i; k++) sum += C[i][k];
  fprintf(stderr, "checksum %.6e\n", sum);
  printf("%0.6f\n", (stop.tv_sec - start.tv_sec) + 1e-9 * (stop.tv_nsec - start.tv_nsec));
  return 0;
}
