#include "mbti/cli.hpp"

int main(int argc, char** argv) { return mbti::run_command(argc, argv); }
