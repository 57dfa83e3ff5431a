#include "cli_app.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "steindisc/baselines.hpp"
#include "steindisc/stein.hpp"
#include "steindisc/truncation.hpp"

namespace steindisc::cli {

namespace {

double parse_value(const std::string& token) {
  if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != token.size()) throw UsageError("'" + token + "' is not a number");
  return v;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ModelArgs {
  std::string family;
  std::string params;
  std::string fixed;
};

void add_model_options(CLI::App* cmd, ModelArgs& m, bool with_params) {
  cmd->add_option("--model,--family", m.family, "Model family (poisson, binomial, yulesimon, bnb, logarithmic, "
                                        "truncpoisson, truncbinomial, nm, tnm, dnm)")
      ->required();
  if (with_params) cmd->add_option("--params", m.params, "Parameters, e.g. lambda=2 or p=0.2,0.3")->required();
  cmd->add_option("--fixed", m.fixed, "Fixed quantities, e.g. m=10 or r=1.5,a=2,b=inf");
}

ModelSpec model_from_args(const ModelArgs& m) {
  harness::ModelDescription d;
  d.family = family_from_name(m.family);
  d.params = parse_named_values(m.params);
  d.fixed = parse_named_values(m.fixed);
  return harness::build_model(d);
}

void print_values(std::ostream& out, const std::vector<std::string>& names, const std::vector<double>& values) {
  for (std::size_t j = 0; j < values.size(); ++j) {
    out << names[j] << '=' << harness::format_double(values[j]) << '\n';
  }
}

// Writes to `path` when given, else to `fallback`.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw UsageError("cannot open '" + path + "' for writing");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

// Empirical sandwich standard errors at θ̂; empty when the plug-in Jacobian is singular.
std::vector<double> stein_standard_errors(const ModelFrame& frame, const harness::MethodSpec& method,
                                          const IntMatrix& x, const std::vector<double>& theta) {
  std::vector<TestFunction> fs;
  if (method.test_functions.empty()) {
    fs = stein::default_test_functions(frame);
  } else {
    for (const auto& name : method.test_functions) fs.push_back(stein::make_test_function(name, frame));
  }
  const stein::LinearSteinForm form(frame, fs);
  try {
    const Eigen::MatrixXd cov =
        stein::sandwich_covariance(with_theta(frame, theta), form, stein::CovarianceMode::Empirical, &x);
    std::vector<double> se;
    for (Eigen::Index j = 0; j < cov.rows(); ++j) se.push_back(std::sqrt(cov(j, j) / static_cast<double>(x.rows())));
    return se;
  } catch (const NumericalError&) {
    return {};
  }
}

std::string bound_text(const Bound& b) {
  return b.is_finite() ? std::to_string(b.value) : std::string("inf");
}

}  // namespace

harness::NamedValues parse_named_values(std::string_view text) {
  harness::NamedValues out;
  std::string current;
  std::string s(text);
  std::stringstream ss(s);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto trim = [](std::string t) {
      const auto b = t.find_first_not_of(" \t");
      const auto e = t.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : t.substr(b, e - b + 1);
    };
    token = trim(token);
    if (token.empty()) continue;
    const auto eq = token.find('=');
    if (eq != std::string::npos) {
      current = trim(token.substr(0, eq));
      if (current.empty()) throw UsageError("missing name before '=' in '" + s + "'");
      if (out.count(current) != 0) throw UsageError("'" + current + "' given twice");
      out[current].push_back(parse_value(trim(token.substr(eq + 1))));
    } else {
      if (current.empty()) throw UsageError("value '" + token + "' has no name");
      out[current].push_back(parse_value(token));
    }
  }
  return out;
}

IntMatrix parse_data(std::string_view text) {
  IntMatrix data;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::int64_t> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string field;
    row.clear();
    while (fields >> field) {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != field.size()) {
        throw ParseError("data line " + std::to_string(line_no) + ": '" + field + "' is not an integer");
      }
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!data.empty() && row.size() != data.cols()) {
      throw ParseError("data line " + std::to_string(line_no) + ": expected " + std::to_string(data.cols()) +
                       " value(s), found " + std::to_string(row.size()));
    }
    data.push_row(row);
  }
  if (data.empty()) throw ParseError("data contains no observations");
  return data;
}

IntMatrix read_data(const std::string& path) { return parse_data(read_text(path)); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stein-type parameter estimation for discrete distributions", "steindisc"};
  app.require_subcommand(1);

  // sample
  ModelArgs sample_model;
  std::size_t sample_n = 0;
  std::uint64_t sample_seed = 1;
  std::string sample_out;
  auto* sample_cmd = app.add_subcommand("sample", "Draw a sample and print one observation per line");
  add_model_options(sample_cmd, sample_model, true);
  sample_cmd->add_option("-n,--n", sample_n, "Sample size")->required()->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", sample_seed, "Random seed");
  sample_cmd->add_option("--out", sample_out, "Output path (default: standard output)");

  // estimate
  ModelArgs est_model;
  std::string est_data, est_method = "stein", est_domain = "known", est_tf, est_md = "at_least", est_out;
  double est_budget = 10.0;
  auto* est_cmd = app.add_subcommand("estimate", "Estimate parameters from a data file");
  add_model_options(est_cmd, est_model, false);
  est_cmd->add_option("--data", est_data, "Data file, one observation per line")->required();
  est_cmd->add_option("--method", est_method, "stein, mle, moment, sm or md")
      ->check(CLI::IsMember({"stein", "mle", "moment", "sm", "md"}));
  est_cmd->add_option("--domain", est_domain, "Truncation domain: known or estimate")
      ->check(CLI::IsMember({"known", "estimate", "estimated"}));
  est_cmd->add_option("--test-fn,--test-functions", est_tf, "Comma-separated Stein test function names");
  est_cmd->add_option("--md-reading", est_md, "Minimum distance objective: at_least, as_printed or square_inside")
      ->check(CLI::IsMember({"at_least", "as_printed", "square_inside"}));
  est_cmd->add_option("--budget", est_budget, "Seconds allowed for iterative estimators")->check(CLI::PositiveNumber);
  est_cmd->add_option("--out", est_out, "Output path (default: standard output)");

  // simulate
  std::string sim_config, sim_out;
  std::size_t sim_workers = 0;
  std::size_t sim_reps = 0;
  bool sim_no_timing = false;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the experiments of a JSON config and write a CSV report");
  sim_cmd->add_option("--config", sim_config, "JSON config file")->required();
  sim_cmd->add_option("--out", sim_out, "CSV output path (default: standard output)");
  sim_cmd->add_option("--workers", sim_workers, "Worker threads (0 = automatic)");
  sim_cmd->add_option("--reps", sim_reps, "Override the repetitions of every experiment (e.g. 10000)");
  sim_cmd->add_flag("--no-timing", sim_no_timing, "Write 0 in the wall_seconds column");

  // efficiency
  std::string eff_grid = "0.01:0.99:0.01", eff_out;
  std::size_t eff_workers = 0;
  auto* eff_cmd = app.add_subcommand("efficiency", "Asymptotic variance ratio for the logarithmic distribution");
  eff_cmd->add_option("--grid", eff_grid, "Grid lo:hi:step");
  eff_cmd->add_option("--out", eff_out, "CSV output path (default: standard output)");
  eff_cmd->add_option("--workers", eff_workers, "Worker threads (0 = automatic)");

  // check-identity
  ModelArgs id_model;
  std::string id_tf;
  double id_tol = 1e-8;
  auto* id_cmd = app.add_subcommand("check-identity", "Evaluate E[A f(X)] by exact summation");
  add_model_options(id_cmd, id_model, true);
  id_cmd->add_option("--test-fn,--test-function", id_tf, "Test function name (default: the family's first)");
  id_cmd->add_option("--tol", id_tol, "Absolute tolerance for each component")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*sample_cmd) {
      const ModelSpec model = model_from_args(sample_model);
      const IntMatrix x = sample(model, sample_n, sample_seed);
      Output dst(sample_out, out);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        for (std::size_t i = 0; i < row.size(); ++i) dst.get() << (i ? " " : "") << row[i];
        dst.get() << '\n';
      }
      return kSuccess;
    }

    if (*est_cmd) {
      const Family family = family_from_name(est_model.family);
      const IntMatrix x = read_data(est_data);
      const harness::NamedValues fixed = parse_named_values(est_model.fixed);
      const bool estimated = est_domain != "known";
      if (estimated && !is_truncated(family)) throw UsageError("--domain estimate needs a truncated family");
      std::optional<truncation::DomainEstimate> dom;
      if (estimated) dom = truncation::estimate_domain(x);
      const ModelFrame frame = harness::build_frame(family, fixed, x.cols(), dom ? &dom->box : nullptr);

      harness::MethodSpec method;
      method.kind = harness::method_kind_from_name(est_method);
      if (!est_tf.empty()) {
        std::stringstream ss(est_tf);
        std::string name;
        while (std::getline(ss, name, ',')) {
          if (!name.empty()) method.test_functions.push_back(name);
        }
      }
      method.md_reading = est_md == "square_inside" ? baselines::MdReading::SquareInside
                          : est_md == "as_printed"  ? baselines::MdReading::AsPrinted
                                                    : baselines::MdReading::AtLeast;

      harness::ExperimentConfig config;
      config.model.family = frame.family;
      config.model.fixed = frame.fixed;
      config.model.support = frame.support;
      config.model.theta = baselines::default_start(frame);
      config.domain_mode = estimated ? harness::DomainMode::Estimated : harness::DomainMode::Known;
      config.ne_policy.runtime_budget = est_budget;
      config.methods = {method};
      config.n = x.rows();
      config.reps = 1;
      harness::validate_config(config);
      if (!estimated) stein::require_sample_in_support(frame, x);

      Output dst(est_out, out);
      if (estimated) {
        const LatticeBox box = truncation::plugin_box(frame, *dom);
        for (std::size_t i = 0; i < box.dim(); ++i) {
          const std::string suffix = box.dim() > 1 ? std::to_string(i + 1) : std::string();
          dst.get() << "a" << suffix << '=' << bound_text(box.lower(i)) << '\n';
          dst.get() << "b" << suffix << '=' << bound_text(box.upper(i)) << '\n';
        }
      }
      const EstimateResult res = harness::apply_method(config, method, x);
      if (!res.eligible()) {
        dst.get() << "not_eligible=" << ne_reason_name(res.ne_reason) << '\n';
        if (!res.detail.empty()) err << "steindisc: " << res.detail << '\n';
        return kNotEligible;
      }
      const auto names = parameter_names(family, x.cols());
      print_values(dst.get(), names, *res.value);
      if (method.kind == harness::MethodKind::Stein) {
        const auto used = estimated ? truncation::estimated_frame(frame, x) : std::optional<ModelFrame>(frame);
        if (used) {
          const auto se = stein_standard_errors(*used, method, x, *res.value);
          for (std::size_t j = 0; j < se.size(); ++j) {
            dst.get() << "se_" << names[j] << '=' << harness::format_double(se[j]) << '\n';
          }
        }
      }
      return kSuccess;
    }

    if (*sim_cmd) {
      auto configs = harness::read_configs(sim_config);
      std::vector<harness::ReportRow> rows;
      for (auto& config : configs) {
        if (sim_no_timing) config.record_timing = false;
        if (sim_reps > 0) config.reps = sim_reps;
        auto part = harness::run_experiment(config, sim_workers);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      if (sim_out.empty()) {
        harness::write_report(rows, out);
      } else {
        harness::write_report(rows, sim_out);
      }
      return kSuccess;
    }

    if (*eff_cmd) {
      const auto grid = harness::parse_grid(eff_grid);
      const auto points = harness::efficiency_curve(grid, eff_workers);
      if (eff_out.empty()) {
        harness::write_efficiency(points, out);
      } else {
        std::ofstream file(eff_out);
        if (!file) throw UsageError("cannot open '" + eff_out + "' for writing");
        harness::write_efficiency(points, file);
      }
      return kSuccess;
    }

    if (*id_cmd) {
      const ModelSpec model = model_from_args(id_model);
      const ModelFrame frame = model.frame();
      const std::string name = id_tf.empty() ? stein::default_test_function_names(model.family).front() : id_tf;
      const TestFunction f = stein::make_test_function(name, frame);
      const ExpectationResult r = stein::check_stein_identity_detailed(model, f);
      bool pass = true;
      for (std::size_t i = 0; i < r.value.size(); ++i) {
        out << "component" << (i + 1) << '=' << harness::format_double(r.value[i]) << '\n';
        pass = pass && std::abs(r.value[i]) <= id_tol;
      }
      out << "tail_estimate=" << harness::format_double(r.tail_estimate) << '\n';
      out << "points=" << r.points << '\n';
      out << "identity=" << (pass ? "holds" : "violated") << '\n';
      return pass ? kSuccess : kNumericalFailure;
    }
  } catch (const NumericalError& e) {
    err << "steindisc: numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "steindisc: " << e.what() << '\n';
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace steindisc::cli
