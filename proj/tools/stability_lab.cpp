#include <exception>
#include <iostream>

#include "stability_lab/cli.hpp"

int main(int argc, char** argv) {
  namespace cli = stability_lab::cli;
  const cli::ParseOutcome parsed = cli::parse_config(argc, argv);
  if (!parsed.config) {
    (parsed.exit_code == cli::kExitOk ? std::cout : std::cerr) << parsed.message;
    return parsed.exit_code;
  }
  try {
    return cli::run(*parsed.config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitUsage;
  }
}
