#include "defglm_cli/config.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include <json.hpp>

#include "defglm/errors.hpp"

namespace defglm::cli {

using nlohmann::json;

namespace {

// Line of the first occurrence of "key" at or after `from`; 0 if absent.
std::size_t line_of_key(std::string_view text, std::string_view key, std::size_t from = 0) {
  const std::string needle = "\"" + std::string(key) + "\"";
  const auto pos = text.find(needle, from);
  if (pos == std::string_view::npos) return 0;
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n')) + 1;
}

class Reader {
 public:
  Reader(std::string_view text, std::string_view source) : text_(text), source_(source) {}

  [[noreturn]] void fail(std::string_view key, const std::string& what, std::size_t from = 0) const {
    std::ostringstream msg;
    msg << source_;
    if (const auto line = line_of_key(text_, key, from); line > 0) msg << ":" << line;
    msg << ": field '" << key << "': " << what;
    throw ConfigError(msg.str());
  }

  // Library validation messages start with the field name; point at its line
  // when that field was set in this document.
  [[noreturn]] void fail_validation(const json& obj, const std::string& what, std::string_view prefix,
                                    std::size_t from = 0) const {
    const std::string key = what.substr(0, what.find(' '));
    if (obj.contains(key)) fail(key, what, from);
    throw ConfigError(std::string(source_) + ": " + std::string(prefix) + what);
  }

  void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                  std::size_t from = 0) const {
    for (const auto& [key, value] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
      std::string list;
      for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      std::ostringstream msg;
      msg << source_;
      if (const auto line = line_of_key(text_, key, from); line > 0) msg << ":" << line;
      msg << ": unknown key '" << key << "' (allowed: " << list << ")";
      throw ConfigError(msg.str());
    }
  }

  template <typename T>
  void get(const json& obj, std::string_view key, T& out, std::size_t from = 0) const {
    const auto it = obj.find(std::string(key));
    if (it == obj.end()) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) fail(key, "expected true or false", from);
      out = it->template get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) fail(key, "expected an integer", from);
      if (std::is_unsigned_v<T> && it->is_number_unsigned() == false && it->template get<long long>() < 0) {
        fail(key, "expected a nonnegative integer", from);
      }
      out = it->template get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) fail(key, "expected a number", from);
      out = it->template get<T>();
    } else {
      if (!it->is_string()) fail(key, "expected a string", from);
      out = it->template get<T>();
    }
  }

  std::optional<Hyperbox> box(const json& obj, std::string_view key) const {
    const auto it = obj.find(std::string(key));
    if (it == obj.end()) return std::nullopt;
    if (!it->is_array() || it->size() != 4 ||
        !std::all_of(it->begin(), it->end(), [](const json& v) { return v.is_number(); })) {
      fail(key, "expected [lo1, hi1, lo2, hi2]");
    }
    Hyperbox b{(*it)[0].get<double>(), (*it)[1].get<double>(), (*it)[2].get<double>(),
               (*it)[3].get<double>()};
    try {
      b.validate();
    } catch (const ConfigError& e) {
      fail(key, e.what());
    }
    return b;
  }

  std::string_view text() const { return text_; }

 private:
  std::string_view text_;
  std::string_view source_;
};

}  // namespace

std::vector<Method> parse_method_list(std::string_view list) {
  std::vector<Method> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    auto end = list.find(',', pos);
    if (end == std::string_view::npos) end = list.size();
    const auto item = list.substr(pos, end - pos);
    if (!item.empty()) {
      const Method m = method_from_string(item);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    pos = end + 1;
  }
  if (out.empty()) throw ConfigError("method list is empty");
  return out;
}

RunConfig parse_config(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(source) + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(std::string(source) + ": top level must be an object");

  const Reader r(text, source);
  r.check_keys(doc, {"family", "mean_index", "disp_index", "n", "replicates", "sigma2", "trials",
                     "grid_intervals", "mean_knots", "disp_knots", "cv_folds", "cv_samples",
                     "bernoulli_box", "gaussian_box", "pmle_box", "seed", "methods",
                     "truncate_disp", "optim"});

  RunConfig cfg;
  auto& sc = cfg.scenario;
  std::string family = std::string(to_string(sc.family));
  r.get(doc, "family", family);
  try {
    sc.family = family_from_string(family);
  } catch (const ConfigError& e) {
    r.fail("family", e.what());
  }
  sc.mean_index = ScenarioConfig::default_mean_index(sc.family);
  r.get(doc, "mean_index", sc.mean_index);
  r.get(doc, "disp_index", sc.disp_index);
  r.get(doc, "n", sc.n);
  r.get(doc, "replicates", sc.replicates);
  r.get(doc, "sigma2", sc.sigma2);
  r.get(doc, "trials", sc.trials);
  r.get(doc, "grid_intervals", sc.grid_intervals);
  r.get(doc, "mean_knots", sc.mean_knots);
  r.get(doc, "disp_knots", sc.disp_knots);
  r.get(doc, "cv_folds", sc.cv_folds);
  r.get(doc, "cv_samples", sc.cv_samples);
  sc.bernoulli_box = r.box(doc, "bernoulli_box");
  sc.gaussian_box = r.box(doc, "gaussian_box");
  sc.pmle_box = r.box(doc, "pmle_box");
  if (doc.contains("seed")) {
    std::uint64_t seed = 0;
    r.get(doc, "seed", seed);
    cfg.seed = seed;
  }
  if (doc.contains("methods")) {
    const auto& m = doc["methods"];
    if (!m.is_array() || m.empty()) r.fail("methods", "expected a nonempty array of method names");
    for (const auto& item : m) {
      if (!item.is_string()) r.fail("methods", "expected method names as strings");
      try {
        const Method method = method_from_string(item.get<std::string>());
        if (std::find(cfg.methods.begin(), cfg.methods.end(), method) == cfg.methods.end()) {
          cfg.methods.push_back(method);
        }
      } catch (const ConfigError& e) {
        r.fail("methods", e.what());
      }
    }
  }
  r.get(doc, "truncate_disp", cfg.truncate_disp);

  if (doc.contains("optim")) {
    const auto& o = doc["optim"];
    const std::string optim_key = "\"optim\"";
    const std::size_t from = r.text().find(optim_key);
    if (!o.is_object()) r.fail("optim", "expected an object");
    r.check_keys(o, {"batch_size", "max_iterations", "trace_every", "stationarity_window",
                     "stationarity_tol", "rho", "epsilon", "max_abs_disp_predictor",
                     "implicit_penalty"},
                 from);
    auto& oc = sc.optim;
    r.get(o, "batch_size", oc.batch_size, from);
    r.get(o, "max_iterations", oc.max_iterations, from);
    r.get(o, "trace_every", oc.trace_every, from);
    r.get(o, "stationarity_window", oc.stationarity_window, from);
    r.get(o, "stationarity_tol", oc.stationarity_tol, from);
    r.get(o, "rho", oc.rho, from);
    r.get(o, "epsilon", oc.epsilon, from);
    r.get(o, "max_abs_disp_predictor", oc.max_abs_disp_predictor, from);
    r.get(o, "implicit_penalty", oc.implicit_penalty, from);
    try {
      oc.validate(std::max<Eigen::Index>(oc.batch_size, 1));
    } catch (const ConfigError& e) {
      r.fail_validation(o, e.what(), "optim: ", from);
    }
  }

  try {
    sc.validate();
  } catch (const ConfigError& e) {
    r.fail_validation(doc, e.what(), "");
  }
  return cfg;
}

std::string default_config_text() {
  const ScenarioConfig sc;
  const auto box = [](const Hyperbox& b) { return json::array({b.lo1, b.hi1, b.lo2, b.hi2}); };
  json doc = {
      {"family", "gaussian"},
      {"mean_index", sc.mean_index},
      {"disp_index", sc.disp_index},
      {"n", sc.n},
      {"replicates", sc.replicates},
      {"sigma2", sc.sigma2},
      {"trials", sc.trials},
      {"grid_intervals", sc.grid_intervals},
      {"mean_knots", sc.mean_knots},
      {"disp_knots", sc.disp_knots},
      {"cv_folds", sc.cv_folds},
      {"cv_samples", sc.cv_samples},
      {"bernoulli_box", box(simulation_box(Method::bernoulli))},
      {"gaussian_box", box(simulation_box(Method::gaussian))},
      {"pmle_box", box(simulation_box(Method::pmle))},
      {"methods", {"bernoulli", "gaussian", "pmle"}},
      {"truncate_disp", true},
      {"optim",
       {{"batch_size", sc.optim.batch_size},
        {"max_iterations", sc.optim.max_iterations},
        {"trace_every", sc.optim.trace_every},
        {"stationarity_window", sc.optim.stationarity_window},
        {"stationarity_tol", sc.optim.stationarity_tol},
        {"rho", sc.optim.rho},
        {"epsilon", sc.optim.epsilon},
        {"max_abs_disp_predictor", sc.optim.max_abs_disp_predictor},
        {"implicit_penalty", sc.optim.implicit_penalty}}},
  };
  return doc.dump(2) + "\n";
}

}  // namespace defglm::cli
