// Plain-text network format:
//
//   art-network v1
//   layer <out>x<in> relu|linear
//   <out lines of <in> weights, row-major>
//   <one line of <out> biases>
//   layer ...
//
// Blank lines and lines starting with '#' are ignored. Numbers are written in
// shortest round-trip form, so save/load reproduces every weight bit-exactly.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include "art/diffnet.hpp"

namespace art {

namespace {

constexpr std::string_view kHeader = "art-network v1";

struct LineReader {
  std::istringstream in;
  std::size_t line_no = 0;

  explicit LineReader(const std::string& text) : in(text) {}

  // Next meaningful line, or false at end of input.
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto last = line.find_last_not_of(" \t\r");
      line = line.substr(first, last - first + 1);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("network file line " + std::to_string(line_no) + ": " + what);
  }
};

std::vector<double> parse_numbers(const std::string& line, std::size_t expected, LineReader& reader) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    if (p == end) break;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t')) {
      reader.fail("expected a number near column " + std::to_string(p - line.data() + 1));
    }
    out.push_back(v);
    p = next;
  }
  if (out.size() != expected) {
    reader.fail("expected " + std::to_string(expected) + " numbers, found " + std::to_string(out.size()));
  }
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, ptr);
}

std::string network_to_text(const Network& net) {
  std::string out(kHeader);
  out += '\n';
  for (const auto& layer : net.layers()) {
    out += "layer " + std::to_string(layer.out_dim()) + "x" + std::to_string(layer.in_dim()) +
           (layer.apply_relu ? " relu\n" : " linear\n");
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
      for (std::size_t i = 0; i < layer.in_dim(); ++i) {
        if (i) out += ' ';
        out += format_double(layer.weights(j, i));
      }
      out += '\n';
    }
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
      if (j) out += ' ';
      out += format_double(layer.bias[j]);
    }
    out += '\n';
  }
  return out;
}

Network network_from_text(const std::string& text) {
  LineReader reader(text);
  std::string line;
  if (!reader.next(line) || line != kHeader) reader.fail("missing '" + std::string(kHeader) + "' header");

  std::vector<LayerSpec> layers;
  while (reader.next(line)) {
    std::istringstream head(line);
    std::string keyword, shape, activation, extra;
    head >> keyword >> shape >> activation;
    if (keyword != "layer" || (head >> extra)) reader.fail("expected 'layer <out>x<in> relu|linear'");
    const auto x = shape.find('x');
    std::size_t out_dim = 0, in_dim = 0;
    if (x == std::string::npos ||
        std::from_chars(shape.data(), shape.data() + x, out_dim).ptr != shape.data() + x ||
        std::from_chars(shape.data() + x + 1, shape.data() + shape.size(), in_dim).ptr != shape.data() + shape.size() ||
        out_dim == 0 || in_dim == 0) {
      reader.fail("bad layer shape '" + shape + "'");
    }
    if (activation != "relu" && activation != "linear") reader.fail("unknown activation '" + activation + "'");

    LayerSpec layer{Matrix(out_dim, in_dim), Vector(out_dim, 0.0), activation == "relu"};
    for (std::size_t j = 0; j < out_dim; ++j) {
      if (!reader.next(line)) reader.fail("unexpected end of file in weight rows");
      const auto row = parse_numbers(line, in_dim, reader);
      std::copy(row.begin(), row.end(), layer.weights.data.begin() + static_cast<std::ptrdiff_t>(j * in_dim));
    }
    if (!reader.next(line)) reader.fail("unexpected end of file, expected bias row");
    layer.bias = parse_numbers(line, out_dim, reader);
    layers.push_back(std::move(layer));
  }
  if (layers.empty()) reader.fail("no layers");
  try {
    return Network(std::move(layers));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("network file: ") + e.what());
  }
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << network_to_text(net);
  if (!out) throw std::runtime_error("failed writing " + path);
}

Network load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return network_from_text(buf.str());
}

}  // namespace art
