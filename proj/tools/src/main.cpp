#include <iostream>

#include "wglasso_cli/app.hpp"

int main(int argc, char** argv) { return wgl::cli::run(argc, argv, std::cout, std::cerr); }
