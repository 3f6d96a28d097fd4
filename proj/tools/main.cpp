#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "idealband/annotation.hpp"
#include "idealband/assessor.hpp"
#include "idealband/data_io.hpp"
#include "idealband/estimation.hpp"
#include "idealband/model.hpp"
#include "idealband/simulation.hpp"

namespace {

using namespace idealband;

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Optional-bound CLI token: a number, or "-inf"/"+inf" for a missing side.
std::optional<double> parse_bound_flag(const std::string& token, bool is_lower) {
  if ((is_lower && token == "-inf") || (!is_lower && token == "+inf")) {
    return std::nullopt;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used == token.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw Error("invalid bound '" + token + "' (expected a number or " +
              (is_lower ? "\"-inf\"" : "\"+inf\"") + ")");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// -- fit -------------------------------------------------------------------

struct FitArgs {
  std::string items_path;
  std::string outcomes_path;
  std::string out_path;
  FitConfig config;
};

void run_fit(const FitArgs& args) {
  const ItemBank bank = load_item_bank(args.items_path);
  const auto rows = load_outcomes(args.outcomes_path, bank);

  // Group outcome rows by (agent, dataset, incitation); INT_MIN stands in
  // for "unprompted" so the key stays a plain tuple.
  std::map<std::tuple<std::string, std::string, int>, std::vector<std::size_t>>
      groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ItemRecord* item = bank.find(rows[i].item_id);
    groups[{rows[i].agent_id, item->metadata.dataset,
            rows[i].incitation_level.value_or(INT_MIN)}]
        .push_back(i);
  }

  std::vector<FitReportRow> report;
  for (const auto& [key, indices] : groups) {
    const auto& [agent, dataset, level] = key;
    bool any_capability = false;
    bool any_propensity = false;
    std::vector<CapabilityItem> cap_items;
    std::vector<PropensityWindow> prop_items;
    std::vector<OutcomeRecord> outcomes;
    for (const std::size_t i : indices) {
      const ItemRecord* item = bank.find(rows[i].item_id);
      if (item->kind == ItemKind::Capability) {
        any_capability = true;
        cap_items.push_back(item->capability);
      } else {
        any_propensity = true;
        prop_items.push_back(item->window);
      }
      outcomes.push_back(OutcomeRecord{rows[i].item_id, rows[i].y});
    }
    if (any_capability && any_propensity) {
      throw Error("agent '" + agent + "', dataset '" + dataset +
                  "': a fit group mixes capability and propensity items");
    }
    FitReportRow row;
    row.agent_id = agent;
    row.dataset = dataset;
    if (level != INT_MIN) row.incitation_level = level;
    row.fit = any_capability ? fit_capability(cap_items, outcomes, args.config)
                             : fit_propensity(prop_items, outcomes, args.config);
    report.push_back(std::move(row));
  }
  write_fit_report(args.out_path, std::move(report));
}

// -- simulate ----------------------------------------------------------------

struct SimulateArgs {
  RecoveryConfig config;
  std::string out_path;
  std::string emit_items_path;
  std::string emit_outcomes_path;
};

void run_simulate(const SimulateArgs& args) {
  const RecoverySummary summary = recovery_experiment(args.config);
  std::string out =
      "row\ttheta_mle\tmle_abs_error\tcollapse_peak\tcollapse_abs_error\t"
      "std_error\tconverged\n";
  for (const auto& seed : summary.per_seed) {
    out += std::to_string(seed.seed_index);
    out += '\t';
    out += fmt(seed.theta_mle);
    out += '\t';
    out += fmt(seed.mle_abs_error);
    out += '\t';
    out += seed.collapse_peak ? fmt(*seed.collapse_peak) : "NA";
    out += '\t';
    out += seed.collapse_abs_error ? fmt(*seed.collapse_abs_error) : "NA";
    out += '\t';
    out += seed.std_error ? fmt(*seed.std_error) : "NA";
    out += '\t';
    out += seed.converged ? "true" : "false";
    out += '\n';
  }
  out += "median\tNA\t" + fmt(summary.median_mle_abs_error) + "\tNA\t" +
         fmt(summary.median_collapse_abs_error) + "\tNA\tNA\n";
  write_text_atomic(args.out_path, out);

  // Optional fixtures from the first seed, for feeding `fit` offline.
  if (!args.emit_items_path.empty() || !args.emit_outcomes_path.empty()) {
    WindowDistribution dist = args.config.windows;
    dist.seed = splitmix64(args.config.base_seed);
    const auto windows = sample_windows(dist);
    const auto outcomes = simulate_outcomes(args.config.true_theta, windows,
                                            splitmix64(args.config.base_seed + 1));
    ItemBank bank;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      ItemRecord record;
      record.id = "w" + std::to_string(i);
      record.kind = ItemKind::Propensity;
      record.window = windows[i];
      record.metadata.dataset = "synthetic";
      bank.index.emplace(record.id, bank.items.size());
      bank.items.push_back(std::move(record));
    }
    if (!args.emit_items_path.empty()) {
      write_item_bank(args.emit_items_path, bank);
    }
    if (!args.emit_outcomes_path.empty()) {
      std::vector<OutcomeRow> rows;
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        rows.push_back(OutcomeRow{"sim", "w" + std::to_string(i),
                                  outcomes[i].success, std::nullopt});
      }
      write_outcomes(args.emit_outcomes_path, rows);
    }
  }
}

// -- validate ---------------------------------------------------------------

struct ValidateArgs {
  ValidationOptions options;
  std::string out_path;
};

int run_validate(const ValidateArgs& args) {
  const TheoremReport report = validate_theorems(args.options);
  std::string out;
  for (const auto& check : report.checks) {
    out += check.name;
    out += check.passed ? "\tPASS\t" : "\tFAIL\t";
    out += "worst=" + fmt(check.worst_deviation);
    out += "\ttol=" + fmt(check.tolerance);
    out += '\t';
    out += check.detail;
    out += '\n';
  }
  out += report.all_passed ? "all checks passed\n" : "CHECKS FAILED\n";
  std::cout << out;
  if (!args.out_path.empty()) write_text_atomic(args.out_path, out);
  return report.all_passed ? 0 : 1;
}

// -- assess -------------------------------------------------------------------

struct AssessArgs {
  std::string instances_path;
  std::string out_path;
  std::string feature_set = "all";
  AssessorConfig config;
};

FeatureSet feature_set_from_name(const std::string& name) {
  if (name == "caps_only") return FeatureSet::CapsOnly;
  if (name == "caps_plus_ultracrep") return FeatureSet::CapsPlusUltracrep;
  if (name == "caps_plus_all") return FeatureSet::CapsPlusAll;
  throw Error("unknown feature set '" + name + "'");
}

void run_assess(const AssessArgs& args) {
  const auto instances = load_instances(args.instances_path);
  std::vector<std::pair<FeatureSet, CvResult>> results;
  if (args.feature_set == "all") {
    results = compare_feature_sets(instances, args.config);
  } else {
    AssessorConfig config = args.config;
    config.feature_set = feature_set_from_name(args.feature_set);
    results.emplace_back(config.feature_set,
                         cross_validated_auroc(instances, config));
  }
  export_comparison(args.out_path, results);
}

// -- annotate ----------------------------------------------------------------

struct AnnotateArgs {
  std::string requests_path;
  std::string out_path;
  std::string model;
  std::string endpoint;
  std::string rubric_path;
  std::string cache_dir;
  double temperature = 0.0;
  std::size_t concurrency = 4;
  RetryPolicy policy;
};

void run_annotate(const AnnotateArgs& args) {
  const std::string rubric =
      args.rubric_path.empty() ? "" : read_text_file(args.rubric_path);
  const auto rows = load_annotation_requests(
      args.requests_path, args.model, args.endpoint, args.temperature, rubric);
  std::vector<AnnotationRequest> requests;
  requests.reserve(rows.size());
  for (const auto& row : rows) requests.push_back(row.request);

  std::optional<AnnotationCache> cache;
  if (!args.cache_dir.empty()) cache.emplace(args.cache_dir);
  const auto results = annotate_batch(requests, args.concurrency,
                                      cache ? &*cache : nullptr, args.policy);

  std::vector<std::pair<std::string, AnnotationResult>> keyed;
  keyed.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    keyed.emplace_back(rows[i].id, results[i]);
  }
  write_annotation_results(args.out_path, keyed);
}

// -- plot-data ----------------------------------------------------------------

struct PlotArgs {
  std::string kind;
  std::string out_path;
  std::string items_path;
  std::string outcomes_path;
  std::string instances_path;
  std::string bl = "-2";
  std::string bu = "4";
  double a = 1.0;
  std::optional<double> theta;
  double theta_min = -10.0;
  double theta_max = 10.0;
  double step = 0.01;
  std::optional<double> x_min;
  std::optional<double> x_max;
  AssessorConfig assess_config;
};

/// Windows aligned with outcome rows (one entry per response), for the
/// empirical plot kinds.
std::pair<std::vector<PropensityWindow>, std::vector<OutcomeRecord>>
aligned_windows(const ItemBank& bank, const std::vector<OutcomeRow>& rows) {
  std::vector<PropensityWindow> windows;
  std::vector<OutcomeRecord> outcomes;
  for (const auto& row : rows) {
    const ItemRecord* item = bank.find(row.item_id);
    if (item->kind != ItemKind::Propensity) {
      throw Error("item '" + row.item_id + "' is not a propensity item");
    }
    windows.push_back(item->window);
    outcomes.push_back(OutcomeRecord{row.item_id, row.y});
  }
  if (windows.empty()) throw EmptyData("no propensity outcomes to plot");
  return {std::move(windows), std::move(outcomes)};
}

std::vector<PropensityWindow> bank_windows(const ItemBank& bank) {
  std::vector<PropensityWindow> windows;
  for (const auto& item : bank.items) {
    if (item.kind == ItemKind::Propensity) windows.push_back(item.window);
  }
  if (windows.empty()) throw EmptyData("item bank has no propensity items");
  return windows;
}

std::pair<double, double> window_span(const std::vector<PropensityWindow>& ws) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& w : ws) {
    if (w.lower_bl) {
      lo = std::min(lo, *w.lower_bl);
      hi = std::max(hi, *w.lower_bl);
    }
    if (w.upper_bu) {
      lo = std::min(lo, *w.upper_bu);
      hi = std::max(hi, *w.upper_bu);
    }
  }
  return {lo, hi};
}

void run_plot(const PlotArgs& args) {
  if (args.kind == "irc") {
    const PropensityWindow window{parse_bound_flag(args.bl, true),
                                  parse_bound_flag(args.bu, false), args.a};
    export_irc(args.out_path, window, args.theta_min, args.theta_max,
               args.step);
  } else if (args.kind == "surface") {
    if (args.items_path.empty()) throw Error("surface needs --items");
    const ItemBank bank = load_item_bank(args.items_path);
    if (args.outcomes_path.empty()) {
      if (!args.theta) throw Error("analytic surface needs --theta");
      export_surface(args.out_path, bank_windows(bank), *args.theta);
    } else {
      const auto rows = load_outcomes(args.outcomes_path, bank);
      const auto [windows, outcomes] = aligned_windows(bank, rows);
      export_surface(args.out_path, windows, outcomes);
    }
  } else if (args.kind == "collapse") {
    if (args.items_path.empty() || args.outcomes_path.empty()) {
      throw Error("collapse needs --items and --outcomes");
    }
    const ItemBank bank = load_item_bank(args.items_path);
    const auto rows = load_outcomes(args.outcomes_path, bank);
    const auto [windows, outcomes] = aligned_windows(bank, rows);
    const auto [span_lo, span_hi] = window_span(windows);
    const double x_min = args.x_min.value_or(span_lo - 2.0);
    const double x_max = args.x_max.value_or(span_hi + 2.0);
    export_collapse(args.out_path, windows, outcomes, x_min, x_max, args.step);
  } else if (args.kind == "comparison") {
    if (args.instances_path.empty()) throw Error("comparison needs --instances");
    const auto instances = load_instances(args.instances_path);
    export_comparison(args.out_path,
                      compare_feature_sets(instances, args.assess_config));
  } else {
    throw Error("unknown plot kind '" + args.kind + "'");
  }
}

int run(int argc, char** argv) {
  CLI::App app{
      "idealband: two-sided propensity and capability measurement toolkit"};
  app.require_subcommand(1);
  int exit_code = 0;

  // fit
  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand(
      "fit", "Maximum-likelihood trait fits per (agent, dataset, incitation)");
  fit_cmd->add_option("--items", fit_args.items_path, "Item bank (JSONL)")
      ->required();
  fit_cmd->add_option("--outcomes", fit_args.outcomes_path, "Outcomes (JSONL)")
      ->required();
  fit_cmd->add_option("--out", fit_args.out_path, "Report path (TSV)")
      ->required();
  fit_cmd->add_option("--theta-min", fit_args.config.theta_min,
                      "Lower trait bound");
  fit_cmd->add_option("--theta-max", fit_args.config.theta_max,
                      "Upper trait bound");
  fit_cmd->add_option("--grid-step", fit_args.config.grid_step,
                      "Initialization grid step");
  fit_cmd->add_option("--tolerance", fit_args.config.tolerance,
                      "Convergence tolerance");
  fit_cmd->add_option("--max-iterations", fit_args.config.max_iterations,
                      "Refinement iteration cap");
  fit_cmd->callback([&] { run_fit(fit_args); });

  // simulate
  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Synthetic window recovery across seeds (MLE vs collapse)");
  sim_cmd->add_option("--true-theta", sim_args.config.true_theta,
                      "Latent trait to recover");
  sim_cmd->add_option("--n-items", sim_args.config.windows.n_items,
                      "Windows per seed")
      ->required();
  sim_cmd->add_option("--support-min", sim_args.config.windows.support_min,
                      "Window support lower edge");
  sim_cmd->add_option("--support-max", sim_args.config.windows.support_max,
                      "Window support upper edge");
  sim_cmd->add_option("--a", sim_args.config.windows.discrimination_a,
                      "Base discrimination");
  sim_cmd->add_option("--seeds", sim_args.config.n_seeds, "Number of seeds");
  sim_cmd->add_option("--seed", sim_args.config.base_seed,
                      "Base seed (default 1729)");
  sim_cmd->add_option("--grid-step", sim_args.config.fit.grid_step,
                      "Grid step for init and collapse scan");
  sim_cmd->add_option("--out", sim_args.out_path, "Per-seed report (TSV)")
      ->required();
  sim_cmd->add_option("--emit-items", sim_args.emit_items_path,
                      "Also write the first seed's windows as an item bank");
  sim_cmd->add_option("--emit-outcomes", sim_args.emit_outcomes_path,
                      "Also write the first seed's outcomes");
  sim_cmd->callback([&] { run_simulate(sim_args); });

  // validate
  ValidateArgs val_args;
  auto* val_cmd = app.add_subcommand(
      "validate", "Run the closed-form property suite over the response model");
  val_cmd->add_option("--draws", val_args.options.draws,
                      "Randomized draws per property");
  val_cmd->add_option("--seed", val_args.options.seed,
                      "Property-draw seed (default 1729)");
  val_cmd->add_option("--out", val_args.out_path, "Also write the report here");
  val_cmd->add_flag("--self-test-fail", val_args.options.inject_fault,
                    "Inject a deliberately failing check (exit 1)");
  val_cmd->callback([&] { exit_code = run_validate(val_args); });

  // assess
  AssessArgs assess_args;
  auto* assess_cmd = app.add_subcommand(
      "assess", "Cross-validated demand-feature assessor comparison");
  assess_cmd
      ->add_option("--instances", assess_args.instances_path,
                   "Instance file (JSONL)")
      ->required();
  assess_cmd->add_option("--out", assess_args.out_path, "Comparison table (TSV)")
      ->required();
  assess_cmd->add_option("--folds", assess_args.config.n_folds,
                         "Cross-validation folds");
  assess_cmd->add_option("--trees", assess_args.config.forest.n_trees,
                         "Trees per forest");
  assess_cmd->add_option("--min-split",
                         assess_args.config.forest.min_samples_split,
                         "Minimum node size to split");
  assess_cmd->add_option("--seed", assess_args.config.seed,
                         "CV/forest seed (default 1729)");
  assess_cmd
      ->add_option("--feature-set", assess_args.feature_set,
                   "caps_only | caps_plus_ultracrep | caps_plus_all | all")
      ->check(CLI::IsMember(
          {"caps_only", "caps_plus_ultracrep", "caps_plus_all", "all"}));
  assess_cmd->callback([&] { run_assess(assess_args); });

  // annotate
  AnnotateArgs ann_args;
  auto* ann_cmd = app.add_subcommand(
      "annotate", "Rubric-based interval annotation via a chat endpoint");
  ann_cmd->add_option("--requests", ann_args.requests_path,
                      "Annotation requests (JSONL)")
      ->required();
  ann_cmd->add_option("--out", ann_args.out_path, "Results (JSONL)")->required();
  ann_cmd->add_option("--model", ann_args.model, "Default model name")
      ->required();
  ann_cmd->add_option("--endpoint", ann_args.endpoint,
                      "Default chat-completions endpoint")
      ->required();
  ann_cmd->add_option("--rubric", ann_args.rubric_path,
                      "File with the default rubric text");
  ann_cmd->add_option("--cache", ann_args.cache_dir,
                      "Response cache directory (content-addressed)");
  ann_cmd->add_option("--temperature", ann_args.temperature,
                      "Default sampling temperature");
  ann_cmd->add_option("--concurrency", ann_args.concurrency,
                      "Max in-flight requests");
  ann_cmd->add_option("--retries", ann_args.policy.max_retries,
                      "Retries per item on transient failures");
  ann_cmd->add_option("--backoff-ms", ann_args.policy.initial_backoff_ms,
                      "Initial retry backoff (doubles per retry)");
  ann_cmd->add_option("--timeout-sec", ann_args.policy.timeout_sec,
                      "Per-request timeout");
  ann_cmd->callback([&] { run_annotate(ann_args); });

  // plot-data
  PlotArgs plot_args;
  auto* plot_cmd =
      app.add_subcommand("plot-data", "Tabular exports for plotting");
  plot_cmd
      ->add_option("--kind", plot_args.kind,
                   "irc | surface | collapse | comparison")
      ->required()
      ->check(CLI::IsMember({"irc", "surface", "collapse", "comparison"}));
  plot_cmd->add_option("--out", plot_args.out_path, "Output path (TSV)")
      ->required();
  plot_cmd->add_option("--items", plot_args.items_path,
                       "Item bank (surface, collapse)");
  plot_cmd->add_option("--outcomes", plot_args.outcomes_path,
                       "Outcomes (empirical surface, collapse)");
  plot_cmd->add_option("--instances", plot_args.instances_path,
                       "Instances (comparison)");
  plot_cmd->add_option("--bl", plot_args.bl, "irc: lower bound or \"-inf\"");
  plot_cmd->add_option("--bu", plot_args.bu, "irc: upper bound or \"+inf\"");
  plot_cmd->add_option("--a", plot_args.a, "irc: base discrimination");
  plot_cmd->add_option("--theta", plot_args.theta,
                       "surface: trait for the analytic surface");
  plot_cmd->add_option("--theta-min", plot_args.theta_min, "irc: grid start");
  plot_cmd->add_option("--theta-max", plot_args.theta_max, "irc: grid end");
  plot_cmd->add_option("--step", plot_args.step, "Grid step (irc, collapse)");
  plot_cmd->add_option("--x-min", plot_args.x_min,
                       "collapse: grid start (default: span - 2)");
  plot_cmd->add_option("--x-max", plot_args.x_max,
                       "collapse: grid end (default: span + 2)");
  plot_cmd->add_option("--folds", plot_args.assess_config.n_folds,
                       "comparison: cross-validation folds");
  plot_cmd->add_option("--trees", plot_args.assess_config.forest.n_trees,
                       "comparison: trees per forest");
  plot_cmd->add_option("--min-split",
                       plot_args.assess_config.forest.min_samples_split,
                       "comparison: minimum node size to split");
  plot_cmd->add_option("--seed", plot_args.assess_config.seed,
                       "comparison: CV/forest seed");
  plot_cmd->callback([&] { run_plot(plot_args); });

  CLI11_PARSE(app, argc, argv);
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
