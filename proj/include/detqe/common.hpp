// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace detqe {

// Configuration / validation problems. CLI exit code 1.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed runtime inputs (bad ids, misaligned sequences, parse failures).
// CLI exit code 2.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse (e.g. backward before forward) or internal failures.
struct state_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_ws(std::string_view line);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Whitespace normalization: collapse runs of whitespace to single spaces,
// trim the ends. Tokenization round-trips are defined on this form.
std::string normalize_ws(std::string_view text);

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// FNV-1a, used for content addressing in manifests and checkpoint/vocab
// compatibility stamps. Not cryptographic.
uint64_t fnv1a(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a_file(const std::string& path);
std::string hex64(uint64_t v);

std::string format_double(double v, int digits = 6);

}  // namespace detqe
