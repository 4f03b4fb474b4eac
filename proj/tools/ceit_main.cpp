#include "ceit/cli.hpp"

int main(int argc, char** argv)
{
    return ceit::parse_and_dispatch(argc, argv);
}
