// Copyright 2026 The gapnet Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) { return gapnet::cli::run(argc, argv, std::cout, std::cerr); }
