#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "steindisc/harness.hpp"

namespace steindisc::harness {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_report(const std::vector<ReportRow>& rows, std::ostream& out) {
  out << "family,param,true_value,method,bias,mse,ne_percent,reps_used,wall_seconds\n";
  for (const auto& r : rows) {
    out << r.family << ',' << r.param << ',' << format_double(r.true_value) << ',' << r.method << ','
        << format_double(r.bias) << ',' << format_double(r.mse) << ',' << format_double(r.ne_percent) << ','
        << r.reps_used << ',' << format_double(r.wall_seconds) << '\n';
  }
}

void write_report(const std::vector<ReportRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open '" + path + "' for writing");
  write_report(rows, out);
}

void write_efficiency(const std::vector<EfficiencyPoint>& points, std::ostream& out) {
  out << "p,v_stein,v_ml,ratio\n";
  for (const auto& pt : points) {
    out << format_double(pt.p) << ',' << format_double(pt.v_stein) << ',' << format_double(pt.v_ml) << ','
        << format_double(pt.ratio) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ParseError("config field '" + path + "': " + message);
}

void check_fields(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail(path.empty() ? key : path + "." + key, "unknown field");
    }
  }
}

double number(const json& v, const std::string& path, bool allow_inf) {
  if (v.is_number()) return v.get<double>();
  if (allow_inf && v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "+inf")) {
    return std::numeric_limits<double>::infinity();
  }
  fail(path, allow_inf ? "expected a number or \"inf\"" : "expected a number");
}

std::vector<double> numbers(const json& v, const std::string& path, bool allow_inf) {
  if (!v.is_array()) return {number(v, path, allow_inf)};
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]", allow_inf));
  if (out.empty()) fail(path, "empty list");
  return out;
}

NamedValues named_values(const json& obj, const std::string& path, bool allow_inf) {
  if (!obj.is_object()) fail(path, "expected an object");
  NamedValues out;
  for (const auto& [key, v] : obj.items()) out[key] = numbers(v, path + "." + key, allow_inf);
  return out;
}

std::uint64_t unsigned_int(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  fail(path, "expected a non-negative integer");
}

std::string string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

baselines::MdReading md_reading_from_name(const std::string& name, const std::string& path) {
  if (name == "at_least") return baselines::MdReading::AtLeast;
  if (name == "as_printed") return baselines::MdReading::AsPrinted;
  if (name == "square_inside") return baselines::MdReading::SquareInside;
  fail(path, "expected \"at_least\", \"as_printed\" or \"square_inside\"");
}

std::string_view md_reading_name(baselines::MdReading reading) {
  switch (reading) {
    case baselines::MdReading::AtLeast: return "at_least";
    case baselines::MdReading::AsPrinted: return "as_printed";
    case baselines::MdReading::SquareInside: return "square_inside";
  }
  return "at_least";
}

MethodSpec method_from_json(const json& obj, const std::string& path) {
  if (obj.is_string()) {
    MethodSpec m;
    try {
      m.kind = method_kind_from_name(obj.get<std::string>());
    } catch (const UsageError& e) {
      fail(path, e.what());
    }
    return m;
  }
  check_fields(obj, path, {"kind", "test_functions", "md_reading"});
  if (!obj.contains("kind")) fail(path + ".kind", "missing");
  MethodSpec m;
  try {
    m.kind = method_kind_from_name(string(obj["kind"], path + ".kind"));
  } catch (const UsageError& e) {
    fail(path + ".kind", e.what());
  }
  if (obj.contains("test_functions")) {
    const auto& tf = obj["test_functions"];
    if (!tf.is_array()) fail(path + ".test_functions", "expected a list of names");
    for (std::size_t i = 0; i < tf.size(); ++i) {
      m.test_functions.push_back(string(tf[i], path + ".test_functions[" + std::to_string(i) + "]"));
    }
  }
  if (obj.contains("md_reading")) {
    m.md_reading = md_reading_from_name(string(obj["md_reading"], path + ".md_reading"), path + ".md_reading");
  }
  return m;
}

ExperimentConfig config_from_json(const json& obj, const std::string& path) {
  check_fields(obj, path,
               {"family", "params", "fixed", "n", "reps", "methods", "domain_mode", "ne_policy", "seed",
                "record_timing"});
  auto field = [&](const char* key) { return path.empty() ? std::string(key) : path + "." + key; };
  if (!obj.contains("family")) fail(field("family"), "missing");
  if (!obj.contains("params")) fail(field("params"), "missing");
  if (!obj.contains("methods")) fail(field("methods"), "missing");

  ModelDescription desc;
  try {
    desc.family = family_from_name(string(obj["family"], field("family")));
  } catch (const UsageError& e) {
    fail(field("family"), e.what());
  }
  desc.params = named_values(obj["params"], field("params"), false);
  if (obj.contains("fixed")) desc.fixed = named_values(obj["fixed"], field("fixed"), true);

  ExperimentConfig config;
  try {
    config.model = build_model(desc);
  } catch (const UsageError& e) {
    fail(field("params"), e.what());
  } catch (const InvalidModel& e) {
    fail(field("params"), e.what());
  }
  if (obj.contains("n")) config.n = unsigned_int(obj["n"], field("n"));
  if (obj.contains("reps")) config.reps = unsigned_int(obj["reps"], field("reps"));
  if (obj.contains("seed")) config.seed = unsigned_int(obj["seed"], field("seed"));
  if (obj.contains("record_timing")) {
    if (!obj["record_timing"].is_boolean()) fail(field("record_timing"), "expected true or false");
    config.record_timing = obj["record_timing"].get<bool>();
  }
  if (obj.contains("domain_mode")) {
    const auto mode = string(obj["domain_mode"], field("domain_mode"));
    if (mode == "known") {
      config.domain_mode = DomainMode::Known;
    } else if (mode == "estimated") {
      config.domain_mode = DomainMode::Estimated;
    } else {
      fail(field("domain_mode"), "expected \"known\" or \"estimated\"");
    }
  }
  if (obj.contains("ne_policy")) {
    const auto& ne = obj["ne_policy"];
    check_fields(ne, field("ne_policy"), {"bnb_truncated_mean", "runtime_budget"});
    if (ne.contains("bnb_truncated_mean") && !ne["bnb_truncated_mean"].is_null()) {
      config.ne_policy.bnb_truncated_mean =
          number(ne["bnb_truncated_mean"], field("ne_policy.bnb_truncated_mean"), false);
    }
    if (ne.contains("runtime_budget")) {
      config.ne_policy.runtime_budget = number(ne["runtime_budget"], field("ne_policy.runtime_budget"), false);
    }
  }
  const auto& methods = obj["methods"];
  if (!methods.is_array()) fail(field("methods"), "expected a list");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    config.methods.push_back(method_from_json(methods[i], field("methods") + "[" + std::to_string(i) + "]"));
  }
  try {
    validate_config(config);
  } catch (const std::invalid_argument& e) {
    fail(path.empty() ? "(experiment)" : path, e.what());
  }
  return config;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // Recover the line number from the byte offset.
    std::size_t line = 1;
    const std::size_t end = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i < end; ++i) line += text[i] == '\n' ? 1 : 0;
    throw ParseError("config: JSON syntax error at line " + std::to_string(line) + ": " + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json values_to_json(const std::vector<double>& values, bool as_list) {
  auto one = [](double v) { return std::isinf(v) ? json("inf") : json(v); };
  if (!as_list && values.size() == 1) return one(values[0]);
  json arr = json::array();
  for (double v : values) arr.push_back(one(v));
  return arr;
}

}  // namespace

std::vector<ExperimentConfig> parse_configs(std::string_view text) {
  const json doc = parse_json(text);
  std::vector<ExperimentConfig> out;
  if (doc.is_object() && doc.contains("experiments")) {
    check_fields(doc, "", {"experiments"});
    const auto& list = doc["experiments"];
    if (!list.is_array() || list.empty()) fail("experiments", "expected a non-empty list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      out.push_back(config_from_json(list[i], "experiments[" + std::to_string(i) + "]"));
    }
  } else {
    out.push_back(config_from_json(doc, ""));
  }
  return out;
}

ExperimentConfig parse_config(std::string_view text) {
  auto configs = parse_configs(text);
  if (configs.size() != 1) throw ParseError("config: expected exactly one experiment");
  return configs.front();
}

std::vector<ExperimentConfig> read_configs(const std::string& path) { return parse_configs(read_file(path)); }

ExperimentConfig read_config(const std::string& path) { return parse_config(read_file(path)); }

std::string config_to_json(const ExperimentConfig& config) {
  const ModelDescription desc = describe(config.model);
  const bool multivariate = is_multivariate(config.model.family);
  json obj;
  obj["family"] = std::string(family_name(desc.family));
  json params = json::object();
  for (const auto& [key, values] : desc.params) params[key] = values_to_json(values, multivariate);
  obj["params"] = params;
  json fixed = json::object();
  for (const auto& [key, values] : desc.fixed) fixed[key] = values_to_json(values, multivariate && values.size() > 1);
  obj["fixed"] = fixed;
  obj["n"] = config.n;
  obj["reps"] = config.reps;
  json methods = json::array();
  for (const auto& m : config.methods) {
    json jm;
    jm["kind"] = std::string(method_kind_name(m.kind));
    if (!m.test_functions.empty()) jm["test_functions"] = m.test_functions;
    if (m.md_reading != baselines::MdReading::AtLeast || m.kind == MethodKind::MinimumDistance) {
      jm["md_reading"] = std::string(md_reading_name(m.md_reading));
    }
    methods.push_back(jm);
  }
  obj["methods"] = methods;
  obj["domain_mode"] = config.domain_mode == DomainMode::Known ? "known" : "estimated";
  json ne;
  ne["bnb_truncated_mean"] = config.ne_policy.bnb_truncated_mean ? json(*config.ne_policy.bnb_truncated_mean) : json();
  ne["runtime_budget"] = config.ne_policy.runtime_budget;
  obj["ne_policy"] = ne;
  obj["seed"] = config.seed;
  obj["record_timing"] = config.record_timing;
  return obj.dump(2) + "\n";
}

void write_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open '" + path + "' for writing");
  out << config_to_json(config);
}

}  // namespace steindisc::harness
