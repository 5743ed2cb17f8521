// SPDX-License-Identifier: Apache-2.0
// Placeholder; criteria filled in below.
#include <cstdio>

int main() {
  std::printf("acceptance suite placeholder\n");
  return 1;
}
