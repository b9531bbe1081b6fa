#include "art/property.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace art {

double Atom::norm() const {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

OutputPredicate OutputPredicate::atom(Vector a, double b) { return atom(Atom{std::move(a), b, false}); }

OutputPredicate OutputPredicate::atom(Atom atom) {
  if (atom.a.empty()) throw ShapeError("atom coefficient vector is empty");
  bool nonzero = false;
  for (double v : atom.a) {
    if (!std::isfinite(v)) throw std::invalid_argument("atom coefficient is not finite");
    nonzero = nonzero || v != 0.0;
  }
  if (!nonzero) throw std::invalid_argument("atom coefficient vector is zero");
  if (!std::isfinite(atom.b)) throw std::invalid_argument("atom threshold is not finite");
  OutputPredicate p;
  p.kind_ = Kind::atom;
  p.atom_ = std::move(atom);
  return p;
}

OutputPredicate OutputPredicate::negate(const OutputPredicate& p) {
  switch (p.kind_) {
    case Kind::atom: {
      // not (a.y <= b)  <=>  -a.y < -b ;  not (a.y < b)  <=>  -a.y <= -b
      Atom flipped = p.atom_;
      for (double& v : flipped.a) v = -v;
      flipped.b = -flipped.b;
      flipped.strict = !flipped.strict;
      return atom(std::move(flipped));
    }
    case Kind::all_of:
    case Kind::any_of: {
      std::vector<OutputPredicate> negated;
      negated.reserve(p.children_.size());
      for (const auto& c : p.children_) negated.push_back(negate(c));
      return p.kind_ == Kind::all_of ? any_of(std::move(negated)) : all_of(std::move(negated));
    }
  }
  throw std::logic_error("unreachable");
}

OutputPredicate OutputPredicate::all_of(std::vector<OutputPredicate> children) {
  if (children.empty()) throw std::invalid_argument("'and' needs at least one operand");
  OutputPredicate p;
  p.kind_ = Kind::all_of;
  p.children_ = std::move(children);
  p.output_dim();  // validates widths
  return p;
}

OutputPredicate OutputPredicate::any_of(std::vector<OutputPredicate> children) {
  if (children.empty()) throw std::invalid_argument("'or' needs at least one operand");
  OutputPredicate p;
  p.kind_ = Kind::any_of;
  p.children_ = std::move(children);
  p.output_dim();
  return p;
}

OutputPredicate OutputPredicate::greater(std::size_t e, std::size_t i, std::size_t j) {
  if (i >= e || j >= e || i == j) throw std::invalid_argument("bad output indices for comparison");
  Vector a(e, 0.0);
  a[i] = 1.0;
  a[j] = -1.0;
  return negate(atom(std::move(a), 0.0));  // not (y_i - y_j <= 0)
}

std::size_t OutputPredicate::output_dim() const {
  if (kind_ == Kind::atom) return atom_.a.size();
  const std::size_t e = children_.front().output_dim();
  for (const auto& c : children_) {
    if (c.output_dim() != e) throw ShapeError("predicate operands refer to different output widths");
  }
  return e;
}

namespace {

double dot(std::span<const double> a, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * y[i];
  return s;
}

void check_width(std::size_t n, const OutputPredicate& p) {
  if (n != p.output_dim()) {
    throw ShapeError("output has " + std::to_string(n) + " entries, predicate expects " +
                     std::to_string(p.output_dim()));
  }
}

bool satisfies_impl(std::span<const double> y, const OutputPredicate& p) {
  switch (p.kind()) {
    case OutputPredicate::Kind::atom: {
      const auto& at = p.as_atom();
      const double lhs = dot(at.a, y);
      return at.strict ? lhs < at.b : lhs <= at.b;
    }
    case OutputPredicate::Kind::all_of:
      for (const auto& c : p.children())
        if (!satisfies_impl(y, c)) return false;
      return true;
    case OutputPredicate::Kind::any_of:
      for (const auto& c : p.children())
        if (satisfies_impl(y, c)) return true;
      return false;
  }
  return false;
}

double dist_concrete_impl(std::span<const double> y, const OutputPredicate& p, double margin) {
  switch (p.kind()) {
    case OutputPredicate::Kind::atom: {
      const auto& at = p.as_atom();
      const double excess = dot(at.a, y) - at.b + (at.strict ? margin : 0.0);
      return excess > 0.0 ? excess / at.norm() : 0.0;
    }
    case OutputPredicate::Kind::all_of: {
      double best = 0.0;
      for (const auto& c : p.children()) best = std::max(best, dist_concrete_impl(y, c, margin));
      return best;
    }
    case OutputPredicate::Kind::any_of: {
      double best = dist_concrete_impl(y, p.children().front(), margin);
      for (std::size_t i = 1; i < p.children().size() && best > 0.0; ++i) {
        best = std::min(best, dist_concrete_impl(y, p.children()[i], margin));
      }
      return best;
    }
  }
  return 0.0;
}

AbstractLoss dist_abstract_impl(const Box& out, const OutputPredicate& p, double margin) {
  const std::size_t e = out.dim();
  switch (p.kind()) {
    case OutputPredicate::Kind::atom: {
      const auto& at = p.as_atom();
      // sup over the box of a.y picks the upper bound for non-negative
      // coefficients and the lower bound otherwise.
      double sup = 0.0;
      for (std::size_t i = 0; i < e; ++i) sup += at.a[i] >= 0.0 ? at.a[i] * out.upper(i) : at.a[i] * out.lower(i);
      const double norm = at.norm();
      const double excess = sup - at.b + (at.strict ? margin : 0.0);
      AbstractLoss r{0.0, Vector(e, 0.0), Vector(e, 0.0)};
      if (excess > 0.0) {
        r.value = excess / norm;
        for (std::size_t i = 0; i < e; ++i) {
          if (at.a[i] >= 0.0) {
            r.d_upper[i] = at.a[i] / norm;
          } else {
            r.d_lower[i] = at.a[i] / norm;
          }
        }
      }
      return r;
    }
    case OutputPredicate::Kind::all_of:
    case OutputPredicate::Kind::any_of: {
      const bool take_max = p.kind() == OutputPredicate::Kind::all_of;
      AbstractLoss best = dist_abstract_impl(out, p.children().front(), margin);
      for (std::size_t i = 1; i < p.children().size(); ++i) {
        AbstractLoss c = dist_abstract_impl(out, p.children()[i], margin);
        if (take_max ? c.value > best.value : c.value < best.value) best = std::move(c);
      }
      return best;
    }
  }
  return {};
}

}  // namespace

bool satisfies(std::span<const double> y, const OutputPredicate& p) {
  check_width(y.size(), p);
  return satisfies_impl(y, p);
}

double dist_concrete(std::span<const double> y, const OutputPredicate& p, double margin) {
  check_width(y.size(), p);
  return dist_concrete_impl(y, p, margin);
}

AbstractLoss dist_abstract(const Box& out, const OutputPredicate& p, double margin) {
  check_width(out.dim(), p);
  return dist_abstract_impl(out, p, margin);
}

double attach_abstract_loss(Tape& tape, const OutputPredicate& p, double margin) {
  if (tape.kind != Tape::Kind::interval || tape.activations.empty()) {
    throw UsageError("abstract loss needs an interval tape");
  }
  const auto& out = tape.activations.back();
  AbstractLoss loss = dist_abstract(Box(out.lower, out.upper), p, margin);
  tape.attach_loss(loss.value, std::move(loss.d_lower), std::move(loss.d_upper));
  return tape.loss;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw ParseError("property " + where + ": " + what);
}

Vector number_list(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) schema_error(where, "expected a list of numbers");
  Vector out;
  for (const auto& v : j) {
    if (!v.is_number()) schema_error(where, "expected a list of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

OutputPredicate predicate_at(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string()) schema_error(where, "missing 'op'");
  const auto op = j["op"].get<std::string>();
  try {
    if (op == "atom") {
      if (!j.contains("a") || !j.contains("b") || !j["b"].is_number()) schema_error(where, "atom needs 'a' and 'b'");
      return OutputPredicate::atom(number_list(j["a"], where + ".a"), j["b"].get<double>());
    }
    std::vector<OutputPredicate> args;
    if (j.contains("args")) {
      if (!j["args"].is_array()) schema_error(where, "'args' must be a list");
      for (std::size_t i = 0; i < j["args"].size(); ++i) {
        args.push_back(predicate_at(j["args"][i], where + ".args[" + std::to_string(i) + "]"));
      }
    } else if (j.contains("arg")) {
      args.push_back(predicate_at(j["arg"], where + ".arg"));
    }
    if (op == "not") {
      if (args.size() != 1) schema_error(where, "'not' takes exactly one operand");
      return OutputPredicate::negate(args.front());
    }
    if (op == "and") return OutputPredicate::all_of(std::move(args));
    if (op == "or") return OutputPredicate::any_of(std::move(args));
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    schema_error(where, e.what());
  }
  schema_error(where, "unknown op '" + op + "'");
}

nlohmann::json atom_json(const Vector& a, double b) { return {{"op", "atom"}, {"a", a}, {"b", b}}; }

}  // namespace

OutputPredicate predicate_from_json(const nlohmann::json& j) { return predicate_at(j, "output"); }

nlohmann::json predicate_to_json(const OutputPredicate& p) {
  switch (p.kind()) {
    case OutputPredicate::Kind::atom: {
      const auto& at = p.as_atom();
      if (!at.strict) return atom_json(at.a, at.b);
      Vector neg = at.a;
      for (double& v : neg) v = -v;
      return {{"op", "not"}, {"args", nlohmann::json::array({atom_json(neg, -at.b)})}};
    }
    case OutputPredicate::Kind::all_of:
    case OutputPredicate::Kind::any_of: {
      auto args = nlohmann::json::array();
      for (const auto& c : p.children()) args.push_back(predicate_to_json(c));
      return {{"op", p.kind() == OutputPredicate::Kind::all_of ? "and" : "or"}, {"args", std::move(args)}};
    }
  }
  return {};
}

CorrectnessProperty property_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("input") || !j.contains("output")) {
    schema_error("", "expected an object with 'input' and 'output'");
  }
  const auto& in = j["input"];
  if (!in.is_object() || !in.contains("lower") || !in.contains("upper")) {
    schema_error("input", "expected 'lower' and 'upper'");
  }
  Box box;
  try {
    box = Box(number_list(in["lower"], "input.lower"), number_list(in["upper"], "input.upper"));
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    schema_error("input", e.what());
  }
  return {std::move(box), predicate_from_json(j["output"])};
}

nlohmann::json property_to_json(const CorrectnessProperty& p) {
  return {{"input", {{"lower", p.input.lower()}, {"upper", p.input.upper()}}},
          {"output", predicate_to_json(p.output)}};
}

std::vector<CorrectnessProperty> properties_from_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("property file: ") + e.what());
  }
  const nlohmann::json* list = &doc;
  if (doc.is_object() && doc.contains("properties")) {
    if (doc.contains("version") && doc["version"] != 1) throw ParseError("property file: unsupported version");
    list = &doc["properties"];
  }
  std::vector<CorrectnessProperty> out;
  if (list->is_array()) {
    for (std::size_t i = 0; i < list->size(); ++i) {
      try {
        out.push_back(property_from_json((*list)[i]));
      } catch (const ParseError& e) {
        throw ParseError("property #" + std::to_string(i) + ": " + e.what());
      }
    }
  } else {
    out.push_back(property_from_json(*list));
  }
  for (const auto& p : out) {
    if (p.input.dim() == 0) throw ParseError("property file: empty input box");
  }
  return out;
}

std::string properties_to_string(const std::vector<CorrectnessProperty>& props) {
  auto list = nlohmann::json::array();
  for (const auto& p : props) list.push_back(property_to_json(p));
  nlohmann::json doc = {{"format", "art-property"}, {"version", 1}, {"properties", std::move(list)}};
  return doc.dump(2) + "\n";
}

std::vector<CorrectnessProperty> load_properties(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return properties_from_string(buf.str());
}

void save_properties(const std::vector<CorrectnessProperty>& props, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << properties_to_string(props);
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace art
