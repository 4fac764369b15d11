// Copyright (c) 2026 the imc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace imc {

inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace imc
