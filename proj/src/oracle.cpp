#include "art/oracle.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

#include "parallel.hpp"

namespace art {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double unit_double(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace

Vector sample_point(const Box& box, std::uint64_t seed, std::uint64_t index) {
  Vector x(box.dim());
  const std::uint64_t base = mix64(seed ^ mix64(index));
  for (std::size_t j = 0; j < box.dim(); ++j) {
    const double u = unit_double(mix64(base + j));
    x[j] = box.lower(j) + u * box.width(j);
  }
  return x;
}

std::vector<SoundnessViolation> check_output_bounds(const Network& net, const Box& inputs, const Box& claimed,
                                                    std::size_t n, std::uint64_t seed, unsigned threads,
                                                    double tolerance) {
  if (claimed.dim() != net.output_dim()) throw ShapeError("claimed bounds do not match the network output");
  std::vector<std::vector<SoundnessViolation>> found(n);
  detail::parallel_for(n, threads, [&](std::size_t i) {
    const Vector x = sample_point(inputs, seed, i);
    const Vector y = evaluate(net, x);
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] < claimed.lower(j) - tolerance || y[j] > claimed.upper(j) + tolerance) {
        found[i].push_back({i, x, j, y[j], claimed.lower(j), claimed.upper(j)});
      }
    }
  });
  std::vector<SoundnessViolation> out;
  for (auto& v : found) std::move(v.begin(), v.end(), std::back_inserter(out));
  return out;
}

std::vector<SoundnessViolation> mc_soundness(const Network& net, const Box& box, std::size_t n, std::uint64_t seed,
                                             unsigned threads, double tolerance) {
  if (n == 0) throw std::invalid_argument("sample count must be positive");
  return check_output_bounds(net, box, evaluate_box(net, box), n, seed, threads, tolerance);
}

double grid_worst_dist(const Network& net, const Box& box, const OutputPredicate& pred, std::size_t resolution,
                       double margin) {
  if (box.dim() > kMaxGridDim) {
    throw std::invalid_argument("grid search refuses " + std::to_string(box.dim()) + " dimensions; sample instead");
  }
  if (resolution < 2) throw std::invalid_argument("grid resolution must be at least 2");
  if (box.dim() != net.input_dim()) throw ShapeError("box does not match the network input");

  const std::size_t d = box.dim();
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= resolution;

  double worst = 0.0;
  std::vector<std::size_t> idx(d, 0);
  Vector x(d);
  for (std::size_t n = 0; n < total; ++n) {
    for (std::size_t i = 0; i < d; ++i) {
      // Endpoints are hit exactly so the grid stays inside the box.
      x[i] = idx[i] + 1 == resolution
                 ? box.upper(i)
                 : box.lower(i) + box.width(i) * static_cast<double>(idx[i]) / static_cast<double>(resolution - 1);
    }
    worst = std::max(worst, dist_concrete(evaluate(net, x), pred, margin));
    for (std::size_t i = 0; i < d; ++i) {
      if (++idx[i] < resolution) break;
      idx[i] = 0;
    }
  }
  return worst;
}

SatisfactionCheck sample_satisfaction(const Network& net, const CorrectnessProperty& prop, std::size_t n,
                                      std::uint64_t seed, std::size_t keep, unsigned threads) {
  if (prop.input.dim() != net.input_dim()) throw ShapeError("property input does not match the network");
  std::vector<std::optional<Counterexample>> found(n);
  detail::parallel_for(n, threads, [&](std::size_t i) {
    Vector x = sample_point(prop.input, seed, i);
    Vector y = evaluate(net, x);
    if (!satisfies(y, prop.output)) {
      const double dist = dist_concrete(y, prop.output);
      found[i] = Counterexample{i, std::move(x), std::move(y), dist};
    }
  });
  SatisfactionCheck check;
  check.samples = n;
  for (auto& f : found) {
    if (!f) continue;
    ++check.violations;
    if (check.examples.size() < keep) check.examples.push_back(std::move(*f));
  }
  return check;
}

LabelledSplit label_with_oracle(const Network& oracle, std::size_t n_train, std::size_t n_test, const Box& input_box,
                                std::uint64_t seed, LabelPolarity polarity) {
  if (input_box.dim() != oracle.input_dim()) throw ShapeError("input box does not match the oracle network");
  auto label = [&](const Vector& x) {
    const Vector y = evaluate(oracle, x);
    const auto it = polarity == LabelPolarity::argmax ? std::max_element(y.begin(), y.end())
                                                      : std::min_element(y.begin(), y.end());
    return static_cast<std::size_t>(it - y.begin());
  };
  LabelledSplit split;
  for (std::size_t i = 0; i < n_train + n_test; ++i) {
    Vector x = sample_point(input_box, seed, i);
    Dataset& dst = i < n_train ? split.train : split.test;
    dst.labels.push_back(label(x));
    dst.inputs.push_back(std::move(x));
  }
  return split;
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out = "# art-dataset v1\n";
  const std::size_t d = data.empty() ? 0 : data.inputs.front().size();
  for (std::size_t j = 0; j < d; ++j) out += "x" + std::to_string(j) + ",";
  out += "label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.inputs[i]) out += format_double(v) + ",";
    out += std::to_string(data.labels[i]) + "\n";
  }
  return out;
}

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> void {
    throw ParseError("dataset line " + std::to_string(line_no) + ": " + what);
  };

  if (!std::getline(in, line)) fail("empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "# art-dataset v1") fail("missing '# art-dataset v1' header");
  if (!std::getline(in, line)) fail("missing column header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::size_t columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (line.size() < 5 || line.substr(line.size() - 5) != "label") fail("last column must be 'label'");
  const std::size_t d = columns - 1;

  Dataset data;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Vector x;
    std::size_t start = 0;
    for (std::size_t c = 0; c < columns; ++c) {
      const std::size_t end = c + 1 < columns ? line.find(',', start) : line.size();
      if (end == std::string::npos) fail("expected " + std::to_string(columns) + " columns");
      const char* first = line.data() + start;
      const char* last = line.data() + end;
      if (c < d) {
        double v = 0.0;
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || p != last) fail("bad number in column " + std::to_string(c + 1));
        x.push_back(v);
      } else {
        std::size_t label = 0;
        auto [p, ec] = std::from_chars(first, last, label);
        if (ec != std::errc() || p != last) fail("bad label");
        data.labels.push_back(label);
      }
      start = end + 1;
    }
    data.inputs.push_back(std::move(x));
  }
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << dataset_to_csv(data);
  if (!out) throw std::runtime_error("failed writing " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return dataset_from_csv(buf.str());
}

}  // namespace art
