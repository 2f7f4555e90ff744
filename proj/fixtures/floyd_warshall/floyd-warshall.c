#include <stdio.h>
#include <stdlib.h>
#include <time.h>

#ifndef N
#define N 500
#endif

static int path[N][N];

static void init_array(void) {
  for (int i = 0; i < N; i++)
    for (int j = 0; j < N; j++) {
      path[i][j] = i * j % 7 + 1;
      if ((i + j) % 13 == 0 || (i + j) % 7 == 0 || (i + j) % 11 == 0) path[i][j] = 999;
    }
}

static void kernel_floyd_warshall(void) {
#pragma clang loop id(loop1)
  for (int k = 0; k < N; k++)
#pragma clang loop id(loop2)
    for (int i = 0; i < N; i++)
#pragma clang loop id(loop3)
      for (int j = 0; j < N; j++)
        path[i][j] = path[i][j] < path[i][k] + path[k][j] ? path[i][j] : path[i][k] + path[k][j];
}

int main(void) {
  init_array();
  struct timespec start, stop;
  clock_gettime(CLOCK_MONOTONIC, &start);
  kernel_floyd_warshall();
  clock_gettime(CLOCK_MONOTONIC, &stop);
  long sum = 0;
  for (int i = 0; i < N; i++)
    for (int j = 0; j < N; j++) sum += path[i][j];
  fprintf(stderr, "checksum %ld\n", sum);
  printf("%0.6f\n", (stop.tv_sec - start.tv_sec) + 1e-9 * (stop.tv_nsec - start.tv_nsec));
  return 0;
}
