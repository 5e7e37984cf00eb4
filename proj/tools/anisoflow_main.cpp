#include <anisoflow/cli.hpp>

int main(int argc, char** argv) { return aniso::cli_main(argc, argv); }
