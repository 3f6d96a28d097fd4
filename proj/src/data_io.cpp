#include "idealband/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace idealband {

namespace {

using ordered_json = nlohmann::ordered_json;

/// %.12g with explicit inf tokens, shared by every tabular export.
std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json record;
    try {
      record = ordered_json::parse(line);
    } catch (const ordered_json::exception&) {
      throw SchemaError(lineno, "json", "invalid JSON");
    }
    if (!record.is_object()) {
      throw SchemaError(lineno, "json", "record must be an object");
    }
    fn(lineno, record);
  }
}

std::string require_string(const ordered_json& j, std::size_t lineno,
                           const char* field) {
  if (!j.contains(field) || !j[field].is_string()) {
    throw SchemaError(lineno, field, "required string");
  }
  const auto value = j[field].get<std::string>();
  if (value.empty()) throw SchemaError(lineno, field, "must be non-empty");
  return value;
}

double require_finite(const ordered_json& j, std::size_t lineno,
                      const char* field) {
  if (!j.contains(field) || !j[field].is_number()) {
    throw SchemaError(lineno, field, "required finite number");
  }
  const double v = j[field].get<double>();
  if (!std::isfinite(v)) throw SchemaError(lineno, field, "must be finite");
  return v;
}

double require_positive(const ordered_json& j, std::size_t lineno,
                        const char* field) {
  const double v = require_finite(j, lineno, field);
  if (!(v > 0.0)) throw SchemaError(lineno, field, "must be > 0");
  return v;
}

int require_binary(const ordered_json& j, std::size_t lineno,
                   const char* field) {
  if (!j.contains(field) || !j[field].is_number_integer()) {
    throw SchemaError(lineno, field, "required 0/1 integer");
  }
  const auto v = j[field].get<long long>();
  if (v != 0 && v != 1) throw SchemaError(lineno, field, "must be 0 or 1");
  return static_cast<int>(v);
}

/// A window bound: a finite number, or the matching infinity token
/// ("-inf" for lower, "+inf" for upper) meaning the bound is absent.
std::optional<double> parse_bound(const ordered_json& value, std::size_t lineno,
                                  const char* field, bool is_lower) {
  if (value.is_number()) {
    const double v = value.get<double>();
    if (!std::isfinite(v)) throw SchemaError(lineno, field, "must be finite");
    return v;
  }
  if (value.is_string()) {
    const auto token = value.get<std::string>();
    if (is_lower && token == "-inf") return std::nullopt;
    if (!is_lower && token == "+inf") return std::nullopt;
    throw SchemaError(lineno, field,
                      is_lower ? "expected number or \"-inf\""
                               : "expected number or \"+inf\"");
  }
  throw SchemaError(lineno, field, "expected number or infinity token");
}

PropensityWindow checked_window(std::optional<double> lo,
                                std::optional<double> hi, double a,
                                std::size_t lineno, const char* field) {
  const PropensityWindow w{lo, hi, a};
  try {
    w.validate();
  } catch (const Error& e) {
    throw SchemaError(lineno, field, e.what());
  }
  return w;
}

ordered_json bound_json(const std::optional<double>& bound, bool is_lower) {
  if (bound) return *bound;
  return is_lower ? "-inf" : "+inf";
}

std::string incitation_token(const std::optional<int>& level) {
  return level ? std::to_string(*level) : "unprompted";
}

}  // namespace

ItemBank load_item_bank(const std::filesystem::path& path) {
  ItemBank bank;
  for_each_record(path, [&bank](std::size_t lineno, const ordered_json& j) {
    ItemRecord record;
    record.id = require_string(j, lineno, "id");
    if (bank.index.count(record.id)) throw DuplicateId(lineno, record.id);
    const std::string kind = require_string(j, lineno, "kind");
    if (kind == "capability") {
      record.kind = ItemKind::Capability;
      record.capability.difficulty_b = require_finite(j, lineno, "b");
      record.capability.discrimination_a = require_positive(j, lineno, "a");
    } else if (kind == "propensity") {
      record.kind = ItemKind::Propensity;
      if (!j.contains("b_l")) throw SchemaError(lineno, "b_l", "required");
      if (!j.contains("b_u")) throw SchemaError(lineno, "b_u", "required");
      const auto lo = parse_bound(j["b_l"], lineno, "b_l", true);
      const auto hi = parse_bound(j["b_u"], lineno, "b_u", false);
      record.window =
          checked_window(lo, hi, require_positive(j, lineno, "a"), lineno,
                         "bounds");
    } else {
      throw SchemaError(lineno, "kind",
                        "must be \"capability\" or \"propensity\"");
    }
    if (j.contains("metadata")) {
      const auto& m = j["metadata"];
      if (!m.is_object()) throw SchemaError(lineno, "metadata", "must be an object");
      if (m.contains("dataset")) {
        if (!m["dataset"].is_string()) {
          throw SchemaError(lineno, "metadata.dataset", "must be a string");
        }
        record.metadata.dataset = m["dataset"].get<std::string>();
      }
      if (m.contains("propensity_name")) {
        if (!m["propensity_name"].is_string()) {
          throw SchemaError(lineno, "metadata.propensity_name",
                            "must be a string");
        }
        record.metadata.propensity_name =
            m["propensity_name"].get<std::string>();
      }
      if (m.contains("question_text")) {
        if (!m["question_text"].is_string()) {
          throw SchemaError(lineno, "metadata.question_text",
                            "must be a string");
        }
        record.metadata.question_text = m["question_text"].get<std::string>();
      }
    }
    bank.index.emplace(record.id, bank.items.size());
    bank.items.push_back(std::move(record));
  });
  return bank;
}

void write_item_bank(const std::filesystem::path& path, const ItemBank& bank) {
  std::string out;
  for (const auto& record : bank.items) {
    ordered_json j;
    j["id"] = record.id;
    if (record.kind == ItemKind::Capability) {
      j["kind"] = "capability";
      j["b"] = record.capability.difficulty_b;
      j["a"] = record.capability.discrimination_a;
    } else {
      j["kind"] = "propensity";
      j["b_l"] = bound_json(record.window.lower_bl, true);
      j["b_u"] = bound_json(record.window.upper_bu, false);
      j["a"] = record.window.base_discrimination_a;
    }
    const auto& m = record.metadata;
    if (!m.dataset.empty() || !m.propensity_name.empty() || m.question_text) {
      ordered_json meta;
      if (!m.dataset.empty()) meta["dataset"] = m.dataset;
      if (!m.propensity_name.empty()) {
        meta["propensity_name"] = m.propensity_name;
      }
      if (m.question_text) meta["question_text"] = *m.question_text;
      j["metadata"] = std::move(meta);
    }
    out += j.dump();
    out += '\n';
  }
  write_text_atomic(path, out);
}

std::vector<OutcomeRow> load_outcomes(const std::filesystem::path& path,
                                      const ItemBank& bank) {
  std::vector<OutcomeRow> rows;
  for_each_record(path, [&](std::size_t lineno, const ordered_json& j) {
    OutcomeRow row;
    row.agent_id = require_string(j, lineno, "agent_id");
    row.item_id = require_string(j, lineno, "item_id");
    if (!bank.find(row.item_id)) {
      throw SchemaError(lineno, "item_id",
                        "unknown item '" + row.item_id + "'");
    }
    row.y = require_binary(j, lineno, "y");
    if (j.contains("incitation_level")) {
      const auto& level = j["incitation_level"];
      if (level.is_string() && level.get<std::string>() == "unprompted") {
        row.incitation_level = std::nullopt;
      } else if (level.is_number_integer()) {
        const auto v = level.get<long long>();
        if (v < -3 || v > 3) {
          throw SchemaError(lineno, "incitation_level", "must be in [-3, 3]");
        }
        row.incitation_level = static_cast<int>(v);
      } else {
        throw SchemaError(lineno, "incitation_level",
                          "expected integer or \"unprompted\"");
      }
    }
    rows.push_back(std::move(row));
  });
  return rows;
}

void write_outcomes(const std::filesystem::path& path,
                    const std::vector<OutcomeRow>& rows) {
  std::string out;
  for (const auto& row : rows) {
    ordered_json j;
    j["agent_id"] = row.agent_id;
    j["item_id"] = row.item_id;
    j["y"] = row.y;
    if (row.incitation_level) j["incitation_level"] = *row.incitation_level;
    out += j.dump();
    out += '\n';
  }
  write_text_atomic(path, out);
}

std::vector<InstanceFeatures> load_instances(
    const std::filesystem::path& path) {
  std::vector<InstanceFeatures> instances;
  for_each_record(path, [&](std::size_t lineno, const ordered_json& j) {
    InstanceFeatures inst;
    inst.id = require_string(j, lineno, "id");
    if (!j.contains("capability_demands") ||
        !j["capability_demands"].is_array() ||
        j["capability_demands"].size() != kNumDemandDims) {
      throw SchemaError(lineno, "capability_demands",
                        "required array of exactly " +
                            std::to_string(kNumDemandDims) + " numbers");
    }
    for (std::size_t d = 0; d < kNumDemandDims; ++d) {
      const auto& v = j["capability_demands"][d];
      if (!v.is_number()) {
        throw SchemaError(lineno, "capability_demands", "must be numeric");
      }
      const double demand = v.get<double>();
      if (!std::isfinite(demand) || demand < 0.0 || demand > 6.0) {
        throw SchemaError(lineno, "capability_demands",
                          "levels must lie in [0, 6]");
      }
      inst.capability_demands[d] = demand;
    }
    if (!j.contains("propensity_windows") ||
        !j["propensity_windows"].is_array() ||
        j["propensity_windows"].size() != kNumPropensityDims) {
      throw SchemaError(lineno, "propensity_windows",
                        "required array of exactly " +
                            std::to_string(kNumPropensityDims) + " windows");
    }
    for (std::size_t w = 0; w < kNumPropensityDims; ++w) {
      const auto& pair = j["propensity_windows"][w];
      if (!pair.is_array() || pair.size() != 2) {
        throw SchemaError(lineno, "propensity_windows",
                          "each window must be a [lower, upper] pair");
      }
      const auto lo = parse_bound(pair[0], lineno, "propensity_windows", true);
      const auto hi = parse_bound(pair[1], lineno, "propensity_windows", false);
      if (!lo && !hi) {
        throw SchemaError(lineno, "propensity_windows",
                          "window needs at least one finite bound");
      }
      if (lo && hi && *lo > *hi) {
        throw SchemaError(lineno, "propensity_windows",
                          "bounds out of order");
      }
      inst.propensity_windows[w] = PropensityWindow{lo, hi, 1.0};
    }
    inst.label = require_binary(j, lineno, "y");
    instances.push_back(std::move(inst));
  });
  return instances;
}

void write_instances(const std::filesystem::path& path,
                     const std::vector<InstanceFeatures>& instances) {
  std::string out;
  for (const auto& inst : instances) {
    ordered_json j;
    j["id"] = inst.id;
    j["capability_demands"] = inst.capability_demands;
    ordered_json windows = ordered_json::array();
    for (const auto& w : inst.propensity_windows) {
      windows.push_back(ordered_json::array(
          {bound_json(w.lower_bl, true), bound_json(w.upper_bu, false)}));
    }
    j["propensity_windows"] = std::move(windows);
    j["y"] = inst.label;
    out += j.dump();
    out += '\n';
  }
  write_text_atomic(path, out);
}

std::vector<AnnotationRequestRow> load_annotation_requests(
    const std::filesystem::path& path, const std::string& default_model,
    const std::string& default_endpoint, double default_temperature,
    const std::string& default_rubric) {
  std::vector<AnnotationRequestRow> rows;
  for_each_record(path, [&](std::size_t lineno, const ordered_json& j) {
    AnnotationRequestRow row;
    row.request.propensity_name = require_string(j, lineno, "propensity_name");
    row.request.question_text = require_string(j, lineno, "question_text");
    if (j.contains("rubric")) {
      row.request.rubric_text = require_string(j, lineno, "rubric");
    } else if (!default_rubric.empty()) {
      row.request.rubric_text = default_rubric;
    } else {
      throw SchemaError(lineno, "rubric",
                        "required when no default rubric is configured");
    }
    row.request.model_name =
        j.contains("model") ? require_string(j, lineno, "model") : default_model;
    row.request.endpoint = j.contains("endpoint")
                               ? require_string(j, lineno, "endpoint")
                               : default_endpoint;
    row.request.temperature = j.contains("temperature")
                                  ? require_finite(j, lineno, "temperature")
                                  : default_temperature;
    row.id = j.contains("id") ? require_string(j, lineno, "id")
                              : std::to_string(rows.size());
    rows.push_back(std::move(row));
  });
  return rows;
}

void write_annotation_results(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, AnnotationResult>>& results) {
  std::string out;
  for (const auto& [id, result] : results) {
    ordered_json j;
    j["id"] = id;
    j["status"] = to_string(result.status);
    if (result.status == AnnotationStatus::Ok && result.window) {
      j["b_l"] = static_cast<long long>(std::llround(*result.window->lower_bl));
      j["b_u"] = static_cast<long long>(std::llround(*result.window->upper_bu));
    }
    out += j.dump();
    out += '\n';
  }
  write_text_atomic(path, out);
}

void export_irc(const std::filesystem::path& path,
                const PropensityWindow& window, double theta_min,
                double theta_max, double step) {
  window.validate();
  if (!(step > 0.0) || !(theta_min <= theta_max)) {
    throw Error("invalid theta grid");
  }
  std::string out = "theta\tp_unnorm\tp_naive_norm\tp_final\n";
  const double a = window.base_discrimination_a;
  double naive_denominator = 1.0;
  if (window.two_sided()) {
    const double s = sigmoid(a * window.radius());
    naive_denominator = s * s;
  }
  const auto n =
      static_cast<std::size_t>(std::floor((theta_max - theta_min) / step + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) {
    const double theta = theta_min + static_cast<double>(k) * step;
    const double raw = p_propensity_unnormalized(theta, window, a, a);
    const double naive = window.two_sided() ? raw / naive_denominator : raw;
    out += fmt(theta);
    out += '\t';
    out += fmt(raw);
    out += '\t';
    out += fmt(naive);
    out += '\t';
    out += fmt(p_propensity(theta, window));
    out += '\n';
  }
  write_text_atomic(path, out);
}

namespace {

std::string surface_row(double lo, double hi, double p) {
  std::string row;
  row += fmt(lo);
  row += '\t';
  row += fmt(hi);
  row += '\t';
  if (std::isinf(lo) || std::isinf(hi)) {
    row += "NA\tNA";
  } else {
    row += fmt((lo + hi) / 2.0);
    row += '\t';
    row += fmt(hi - lo);
  }
  row += '\t';
  row += fmt(p);
  row += '\n';
  return row;
}

constexpr const char* kSurfaceHeader = "b_l\tb_u\tm\twidth\tp\n";

}  // namespace

void export_surface(const std::filesystem::path& path,
                    const std::vector<PropensityWindow>& windows,
                    double theta) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::string out = kSurfaceHeader;
  for (const auto& w : windows) {
    w.validate();
    out += surface_row(w.lower_bl.value_or(-inf), w.upper_bu.value_or(inf),
                       p_propensity(theta, w));
  }
  write_text_atomic(path, out);
}

void export_surface(const std::filesystem::path& path,
                    const std::vector<PropensityWindow>& windows,
                    const std::vector<OutcomeRecord>& outcomes) {
  std::string out = kSurfaceHeader;
  for (const auto& [bounds, p] : empirical_surface(windows, outcomes)) {
    out += surface_row(bounds.first, bounds.second, p);
  }
  write_text_atomic(path, out);
}

void export_collapse(const std::filesystem::path& path,
                     const std::vector<PropensityWindow>& windows,
                     const std::vector<OutcomeRecord>& outcomes, double x_min,
                     double x_max, double step) {
  if (!(step > 0.0) || !(x_min <= x_max)) throw Error("invalid x grid");
  std::string out = "x\tp_emp\tn_cover\n";
  const auto n =
      static_cast<std::size_t>(std::floor((x_max - x_min) / step + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) {
    const double x = x_min + static_cast<double>(k) * step;
    std::size_t covered = 0;
    for (const auto& w : windows) {
      if ((!w.lower_bl || *w.lower_bl <= x) && (!w.upper_bu || x <= *w.upper_bu)) {
        ++covered;
      }
    }
    const auto p = empirical_point_collapse(windows, outcomes, x);
    out += fmt(x);
    out += '\t';
    out += p ? fmt(*p) : "NA";
    out += '\t';
    out += std::to_string(covered);
    out += '\n';
  }
  write_text_atomic(path, out);
}

void export_comparison(
    const std::filesystem::path& path,
    const std::vector<std::pair<FeatureSet, CvResult>>& results) {
  std::string out = "feature_set\tmean_auroc";
  const std::size_t folds =
      results.empty() ? 0 : results.front().second.fold_aurocs.size();
  for (std::size_t f = 0; f < folds; ++f) {
    out += "\tfold_" + std::to_string(f);
  }
  out += '\n';
  for (const auto& [set, cv] : results) {
    out += to_string(set);
    out += '\t';
    out += fmt(cv.mean_auroc);
    for (const double v : cv.fold_aurocs) {
      out += '\t';
      out += fmt(v);
    }
    out += '\n';
  }
  write_text_atomic(path, out);
}

void write_fit_report(const std::filesystem::path& path,
                      std::vector<FitReportRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const FitReportRow& a, const FitReportRow& b) {
              if (a.agent_id != b.agent_id) return a.agent_id < b.agent_id;
              if (a.dataset != b.dataset) return a.dataset < b.dataset;
              // unprompted sorts before numeric levels
              if (a.incitation_level.has_value() !=
                  b.incitation_level.has_value()) {
                return !a.incitation_level.has_value();
              }
              if (a.incitation_level && b.incitation_level) {
                return *a.incitation_level < *b.incitation_level;
              }
              return false;
            });
  std::string out =
      "agent\tdataset\tincitation\ttheta_hat\tstd_error\tlog_likelihood\t"
      "n_items\tconverged\tat_bound\n";
  for (const auto& row : rows) {
    out += row.agent_id;
    out += '\t';
    out += row.dataset;
    out += '\t';
    out += incitation_token(row.incitation_level);
    out += '\t';
    out += fmt(row.fit.theta_hat);
    out += '\t';
    out += row.fit.std_error ? fmt(*row.fit.std_error) : "NA";
    out += '\t';
    out += fmt(row.fit.log_likelihood);
    out += '\t';
    out += std::to_string(row.fit.n_items);
    out += '\t';
    out += fmt_bool(row.fit.converged);
    out += '\t';
    out += fmt_bool(row.fit.at_bound);
    out += '\n';
  }
  write_text_atomic(path, out);
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  try {
    if (path.has_parent_path()) {
      std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << content;
      if (!out) throw IoError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(e.what());
  }
}

}  // namespace idealband
