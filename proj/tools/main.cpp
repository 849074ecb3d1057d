#include "cli_app.hpp"

int main(int argc, char** argv) { return oodselect::cli::run(argc, argv); }
