#include "twotsd/cli.hpp"

#include <csignal>
#include <iostream>

namespace {

extern "C" void on_signal(int) { twotsd::stop_requested().store(true); }

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    return twotsd::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
