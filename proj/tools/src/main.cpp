#include "app.hpp"

int main(int argc, char** argv) { return mitodet::app::main(argc, argv); }
