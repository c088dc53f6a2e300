// Copyright (c) LagrangeKit contributors

#include "lagrangekit/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <system_error>
#include <vector>

#include <unistd.h>

namespace lagrangekit {

namespace {

using Kind = CheckpointError::Kind;

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

std::string render(const Vector& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_hex_double(v(i));
  }
  return out + "]";
}

template <typename Int>
std::string render(const std::vector<Int>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(static_cast<std::int64_t>(v[i]));
  }
  return out + "]";
}

std::string render(const std::optional<Vector>& v) { return v ? render(*v) : "absent"; }

std::string primal_kind(PrimalOptimizerKind k) {
  switch (k) {
    case PrimalOptimizerKind::GD:
      return "gd";
    case PrimalOptimizerKind::Momentum:
      return "momentum";
    case PrimalOptimizerKind::AdamLike:
      return "adam";
  }
  return "unknown";
}

std::string dual_kind(DualOptimizerKind k) {
  return k == DualOptimizerKind::NuPI ? "nupi" : "gradient_ascent";
}

std::string multiplier_key(const std::string& id) { return "groups." + id + ".multiplier"; }
std::string penalty_key(const std::string& id) { return "groups." + id + ".penalty"; }

struct Value {
  enum class Type { Absent, Scalar, String, Array } type = Type::Absent;
  std::string text;
  std::vector<std::string> items;
};

CheckpointError corrupt(const std::string& key, const std::string& why) {
  return CheckpointError(Kind::CorruptSection, key,
                         "corrupt checkpoint section '" + key + "': " + why);
}

Value parse_value(const std::string& key, const std::string& raw) {
  Value v;
  if (raw == "absent") return v;
  if (raw.empty()) throw corrupt(key, "empty value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') throw corrupt(key, "unterminated string");
    v.type = Value::Type::String;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\') {
        if (i + 2 >= raw.size()) throw corrupt(key, "dangling escape");
        ++i;
      }
      v.text += raw[i];
    }
    return v;
  }
  if (raw.front() == '[') {
    if (raw.back() != ']') throw corrupt(key, "unterminated array");
    v.type = Value::Type::Array;
    const std::string body = raw.substr(1, raw.size() - 2);
    if (body.empty()) return v;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = body.find(',', start);
      std::string item = body.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      const auto first = item.find_first_not_of(' ');
      const auto last = item.find_last_not_of(' ');
      if (first == std::string::npos) throw corrupt(key, "empty array element");
      v.items.push_back(item.substr(first, last - first + 1));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return v;
  }
  v.type = Value::Type::Scalar;
  v.text = raw;
  return v;
}

double parse_double(const std::string& key, const std::string& token) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size() || token.empty() || errno == ERANGE)
    throw corrupt(key, "bad number '" + token + "'");
  return d;
}

std::int64_t parse_int(const std::string& key, const std::string& token) {
  errno = 0;
  char* end = nullptr;
  const long long n = std::strtoll(token.c_str(), &end, 10);
  if (end != token.c_str() + token.size() || token.empty() || errno == ERANGE)
    throw corrupt(key, "bad integer '" + token + "'");
  return n;
}

// Key/value table that records which keys were consumed.
class Table {
 public:
  explicit Table(std::map<std::string, Value> entries) : entries_(std::move(entries)) {}

  const Value& get(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw corrupt(key, "missing");
    used_.insert(key);
    return it->second;
  }

  std::string string(const std::string& key) {
    const Value& v = get(key);
    if (v.type != Value::Type::String) throw corrupt(key, "expected a string");
    return v.text;
  }

  std::int64_t integer(const std::string& key) {
    const Value& v = get(key);
    if (v.type != Value::Type::Scalar) throw corrupt(key, "expected an integer");
    return parse_int(key, v.text);
  }

  std::optional<double> optional_double(const std::string& key) {
    const Value& v = get(key);
    if (v.type == Value::Type::Absent) return std::nullopt;
    if (v.type != Value::Type::Scalar) throw corrupt(key, "expected a number");
    return parse_double(key, v.text);
  }

  std::optional<Vector> optional_vector(const std::string& key, Eigen::Index size) {
    const Value& v = get(key);
    if (v.type == Value::Type::Absent) return std::nullopt;
    if (v.type != Value::Type::Array) throw corrupt(key, "expected an array");
    if (size >= 0 && static_cast<Eigen::Index>(v.items.size()) != size)
      throw corrupt(key, "expected " + std::to_string(size) + " entries, found " +
                             std::to_string(v.items.size()));
    Vector out(static_cast<Eigen::Index>(v.items.size()));
    for (std::size_t i = 0; i < v.items.size(); ++i)
      out(static_cast<Eigen::Index>(i)) = parse_double(key, v.items[i]);
    if (!out.allFinite()) throw corrupt(key, "non-finite entry");
    return out;
  }

  Vector vector(const std::string& key, Eigen::Index size) {
    auto v = optional_vector(key, size);
    if (!v) throw corrupt(key, "unexpectedly absent");
    return *v;
  }

  std::optional<std::vector<std::int64_t>> optional_ints(const std::string& key, std::size_t size) {
    const Value& v = get(key);
    if (v.type == Value::Type::Absent) return std::nullopt;
    if (v.type != Value::Type::Array) throw corrupt(key, "expected an array");
    if (v.items.size() != size) throw corrupt(key, "wrong number of entries");
    std::vector<std::int64_t> out;
    for (const auto& item : v.items) out.push_back(parse_int(key, item));
    return out;
  }

  void require_absent(const std::string& key) {
    if (get(key).type != Value::Type::Absent) throw corrupt(key, "expected absent");
  }

  void require_all_used() const {
    for (const auto& [key, _] : entries_)
      if (!used_.count(key)) throw corrupt(key, "unexpected key");
  }

 private:
  std::map<std::string, Value> entries_;
  std::set<std::string> used_;
};

std::map<std::string, std::string> split_signature(const std::string& sig, std::string& dim) {
  std::map<std::string, std::string> groups;
  std::stringstream ss(sig);
  std::string part;
  bool first = true;
  while (std::getline(ss, part, ';')) {
    if (first) {
      dim = part;
      first = false;
      continue;
    }
    groups[part.substr(0, part.find(':'))] = part;
  }
  return groups;
}

void check_signature(const std::string& saved, const ConstrainedMinimizationProblem& problem) {
  const std::string current = problem.signature();
  if (saved == current) return;
  std::string saved_dim, current_dim;
  const auto saved_groups = split_signature(saved, saved_dim);
  const auto current_groups = split_signature(current, current_dim);
  for (const auto& g : problem.groups()) {
    auto it = saved_groups.find(g.id);
    if (it == saved_groups.end() || it->second != current_groups.at(g.id))
      throw CheckpointError(Kind::SignatureMismatch, g.id,
                            "checkpoint does not match group '" + g.id + "' (saved: " +
                                (it == saved_groups.end() ? std::string("missing") : it->second) +
                                ", current: " + current_groups.at(g.id) + ")");
  }
  for (const auto& [id, _] : saved_groups)
    if (!current_groups.count(id))
      throw CheckpointError(Kind::SignatureMismatch, id,
                            "checkpoint has group '" + id + "' which the problem lacks");
  throw CheckpointError(Kind::SignatureMismatch, "dimension",
                        "checkpoint problem dimension differs (saved " + saved_dim + ", current " +
                            current_dim + ")");
}

}  // namespace

std::string format_hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

std::string serialize_checkpoint(const ConstrainedOptimizer& optimizer) {
  const auto& problem = optimizer.problem();
  std::map<std::string, std::string> kv;
  kv["version"] = std::to_string(kCheckpointVersion);
  kv["signature"] = quote(problem.signature());
  kv["step"] = std::to_string(optimizer.step_count());
  kv["x"] = render(problem.x());

  for (const auto& g : problem.groups()) {
    if (g.multiplier) {
      kv[multiplier_key(g.id)] = render(g.multiplier->values());
      kv[multiplier_key(g.id) + ".counts"] = render(g.multiplier->update_counts());
    } else {
      kv[multiplier_key(g.id)] = "absent";
    }
    kv[penalty_key(g.id)] = g.penalty ? render(g.penalty->value) : "absent";
  }

  const auto& primal = optimizer.primal_optimizer();
  kv["opt.primal.kind"] = quote(primal_kind(primal.options().kind));
  kv["opt.primal.step_count"] = std::to_string(primal.state().step_count);
  kv["opt.primal.first"] = render(primal.state().first);
  kv["opt.primal.second"] = render(primal.state().second);

  for (const auto& [id, dual] : optimizer.dual_optimizers()) {
    const std::string p = "opt.dual." + id + ".";
    kv[p + "kind"] = quote(dual_kind(dual.options().kind));
    kv[p + "error_average"] = render(dual.state().error_average);
    kv[p + "seen"] = dual.state().error_average ? render(dual.state().seen) : "absent";
  }
  for (const auto& [id, sched] : optimizer.penalty_schedules())
    kv["opt.penalty." + id + ".previous_norm"] =
        sched.previous_norm ? format_hex_double(*sched.previous_norm) : "absent";

  std::string out = std::string(kCheckpointMagic) + "\n";
  for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
  return out;
}

std::int64_t restore_checkpoint(const std::string& text, ConstrainedOptimizer& optimizer) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    if (line.rfind("LAGRANGEKIT-CKPT ", 0) == 0)
      throw CheckpointError(Kind::UnsupportedVersion, "header",
                            "unsupported checkpoint header '" + line + "'");
    throw corrupt("header", "missing magic line");
  }
  std::map<std::string, Value> entries;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos || eq == 0) throw corrupt(line.substr(0, 40), "malformed line");
    const std::string key = line.substr(0, eq);
    if (entries.count(key)) throw corrupt(key, "duplicate key");
    entries.emplace(key, parse_value(key, line.substr(eq + 3)));
  }
  if (!text.empty() && text.back() != '\n') throw corrupt("end", "file is truncated");

  Table table(std::move(entries));
  const std::int64_t version = table.integer("version");
  if (version != kCheckpointVersion)
    throw CheckpointError(Kind::UnsupportedVersion, "version",
                          "unsupported checkpoint version " + std::to_string(version));
  check_signature(table.string("signature"), optimizer.problem());

  const auto& problem = optimizer.problem();
  const std::int64_t step = table.integer("step");
  if (step < 0) throw corrupt("step", "negative step");
  const Vector x = table.vector("x", problem.dimension());

  std::vector<ConstraintGroup> groups = problem.groups();
  for (auto& g : groups) {
    const std::string mk = multiplier_key(g.id);
    if (g.multiplier) {
      Vector values = table.vector(mk, g.size);
      auto counts = table.optional_ints(mk + ".counts", static_cast<std::size_t>(g.size));
      if (!counts) throw corrupt(mk + ".counts", "unexpectedly absent");
      try {
        g.multiplier->restore(std::move(values), std::move(*counts));
      } catch (const InvalidArgument& e) {
        throw corrupt(mk, e.what());
      }
    } else {
      table.require_absent(mk);
    }
    const std::string pk = penalty_key(g.id);
    if (g.penalty) {
      Vector value = table.vector(pk, -1);
      if (value.size() != 1 && value.size() != g.size) throw corrupt(pk, "wrong length");
      if ((value.array() <= 0).any()) throw corrupt(pk, "non-positive coefficient");
      g.penalty = PenaltyCoefficient(std::move(value));
    } else {
      table.require_absent(pk);
    }
  }

  PrimalOptimizer primal = optimizer.primal_optimizer();
  if (table.string("opt.primal.kind") != primal_kind(primal.options().kind))
    throw corrupt("opt.primal.kind", "optimizer kind differs from the configured one");
  PrimalOptimizerState ps;
  ps.step_count = table.integer("opt.primal.step_count");
  ps.first = table.optional_vector("opt.primal.first", problem.dimension());
  ps.second = table.optional_vector("opt.primal.second", problem.dimension());
  try {
    primal.restore(std::move(ps));
  } catch (const InvalidArgument& e) {
    throw corrupt("opt.primal", e.what());
  }

  auto duals = optimizer.dual_optimizers();
  for (auto& [id, dual] : duals) {
    const std::string p = "opt.dual." + id + ".";
    if (table.string(p + "kind") != dual_kind(dual.options().kind))
      throw corrupt(p + "kind", "optimizer kind differs from the configured one");
    const Eigen::Index n = problem.group(id).size;
    DualOptimizerState ds;
    ds.error_average = table.optional_vector(p + "error_average", n);
    auto seen = table.optional_ints(p + "seen", static_cast<std::size_t>(n));
    if (ds.error_average.has_value() != seen.has_value())
      throw corrupt(p + "seen", "inconsistent with error_average");
    if (seen)
      for (auto s : *seen) {
        if (s != 0 && s != 1) throw corrupt(p + "seen", "flags must be 0 or 1");
        ds.seen.push_back(static_cast<std::uint8_t>(s));
      }
    dual.restore(std::move(ds));
  }

  auto schedules = optimizer.penalty_schedules();
  for (auto& [id, sched] : schedules) {
    const std::string key = "opt.penalty." + id + ".previous_norm";
    sched.previous_norm = table.optional_double(key);
    if (sched.previous_norm && !(*sched.previous_norm >= 0)) throw corrupt(key, "negative norm");
  }
  table.require_all_used();

  auto& mutable_problem = optimizer.problem();
  mutable_problem.set_x(x);
  mutable_problem.groups() = std::move(groups);
  optimizer.primal_optimizer() = std::move(primal);
  optimizer.dual_optimizers() = std::move(duals);
  optimizer.penalty_schedules() = std::move(schedules);
  optimizer.set_step_count(step);
  return step;
}

void save_checkpoint(const ConstrainedOptimizer& optimizer, const std::filesystem::path& path) {
  const std::string text = serialize_checkpoint(optimizer);
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (out) out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw CheckpointError(Kind::Io, path.string(), "cannot write checkpoint " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw CheckpointError(Kind::Io, path.string(),
                          "cannot move checkpoint into place at " + path.string());
  }
}

std::int64_t load_checkpoint(const std::filesystem::path& path, ConstrainedOptimizer& optimizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::Io, path.string(), "cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return restore_checkpoint(ss.str(), optimizer);
}

}  // namespace lagrangekit
