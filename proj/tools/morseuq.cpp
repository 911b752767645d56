#include "morseuq/cli.hpp"

int main(int argc, char** argv) {
  morseuq::cli::configure_logging();
  return morseuq::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
