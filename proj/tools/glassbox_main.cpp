#include <iostream>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::cerr << "glassbox: cli not wired up yet\n";
  return 1;
}
