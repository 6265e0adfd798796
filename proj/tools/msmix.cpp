// SPDX-License-Identifier: Apache-2.0
#include "msmix/cli.hpp"

int main(int argc, char **argv) { return msmix::cli::parse_and_dispatch(argc, argv); }
