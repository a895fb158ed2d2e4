/* The public header must compile as C. */
#include "mirage/mirage.h"

#include <stdio.h>

int main(void) {
  double v[2] = {3.0, 4.0};
  double out[2];
  if (mirage_normalize(v, 2, out) != MIRAGE_OK) {
    fprintf(stderr, "%s\n", mirage_last_error());
    return 1;
  }
  printf("%s %.1f %.1f\n", mirage_version(), out[0], out[1]);
  return 0;
}
