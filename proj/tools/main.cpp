#include "pcmea/cli.hpp"

int main(int argc, char** argv) { return pcmea::cli_main(argc, argv); }
