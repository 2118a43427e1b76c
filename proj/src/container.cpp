#include "iilm/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "iilm/errors.hpp"
#include "iilm/io.hpp"

namespace iilm {

namespace {

constexpr std::string_view kMagic = "iilm-container 1";
constexpr std::string_view kSeparator = "---";

void put_f64(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

bool clean_token(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') return false;
  return true;
}

}  // namespace

std::string serialize_container(const Container& c) {
  std::string out;
  out += kMagic;
  out += '\n';
  for (const auto& [k, v] : c.header) {
    if (k.empty() || k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw ValidationError("container header entry '" + k + "' cannot be serialized");
    }
    out += k + "=" + v + "\n";
  }
  out += kSeparator;
  out += '\n';
  for (const auto& [name, t] : c.tensors) {
    if (!clean_token(name)) throw ValidationError("tensor name '" + name + "' cannot be serialized");
    out += "tensor " + name + " " + std::to_string(t.rank());
    for (auto d : t.shape()) out += " " + std::to_string(d);
    out += '\n';
    for (double x : t.data()) put_f64(out, x);
  }
  return out;
}

Container parse_container(std::string_view bytes) {
  Container c;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string_view {
    const std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) throw ParseError("unexpected end of container", line_no + 1);
    std::string_view line = bytes.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    return line;
  };
  if (next_line() != kMagic) throw ParseError("not an iilm container", 1);
  for (;;) {
    std::string_view line = next_line();
    if (line == kSeparator) break;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) throw ParseError("malformed header line", line_no);
    c.header.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  while (pos < bytes.size()) {
    std::istringstream is{std::string(next_line())};
    std::string tag, name;
    std::size_t rank = 0;
    if (!(is >> tag >> name >> rank) || tag != "tensor" || rank == 0) {
      throw ParseError("malformed tensor record", line_no);
    }
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      if (!(is >> d) || d == 0) throw ParseError("malformed tensor shape", line_no);
      numel *= d;
    }
    if (bytes.size() - pos < numel * 8) throw ParseError("truncated data for tensor '" + name + "'", line_no);
    std::vector<double> data(numel);
    for (std::size_t i = 0; i < numel; ++i) data[i] = get_f64(bytes.data() + pos + 8 * i);
    pos += numel * 8;
    if (!c.tensors.emplace(name, Tensor(std::move(shape), std::move(data))).second) {
      throw ParseError("duplicate tensor '" + name + "'", line_no);
    }
  }
  return c;
}

void save_container(const std::filesystem::path& path, const Container& c) {
  write_file_atomic(path, serialize_container(c));
}

Container load_container(const std::filesystem::path& path) {
  return parse_container(read_file(path));
}

}  // namespace iilm
