#include "app.hpp"

int main(int argc, char** argv) { return diffstruct::app::run_cli(argc, argv); }
