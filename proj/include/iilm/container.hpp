#pragma once

// Self-describing tensor container used for checkpoints and Fisher files.
//
//   iilm-container 1\n
//   key=value\n            (header, any number of lines)
//   ---\n
//   tensor <name> <rank> <d0> ... <dn>\n<8*numel bytes, little-endian float64>
//   ...

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "iilm/tensor.hpp"

namespace iilm {

struct Container {
  std::map<std::string, std::string> header;
  std::map<std::string, Tensor> tensors;
};

std::string serialize_container(const Container& c);
// Throws ParseError on malformed input.
Container parse_container(std::string_view bytes);

void save_container(const std::filesystem::path& path, const Container& c);
Container load_container(const std::filesystem::path& path);

}  // namespace iilm
