#include "emh/runner.hpp"

int main(int argc, char** argv) {
    return emh::cli_main(argc, argv);
}
